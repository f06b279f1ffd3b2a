//! `ocean`: command-line front end. Every analysis subcommand runs as a
//! one-step pipeline, so it validates up front and writes a manifest.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ocean_core::io::ClipSpec;
use ocean_core::runner::{
    self, records_csv, run_benchmark, BenchParams, InputFormat, InputSpec, PipelineConfig, StepConfig, Suite,
};
use ocean_core::Error;
use serde_json::{Map, Value};

#[derive(Parser, Debug)]
#[command(name = "ocean", version, about = "Feature extraction and tracking for ocean model output")]
struct Cli {
    /// Worker count [default: 1, or the pipeline's own setting for `run`].
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// JSON file: the pipeline for `run`, benchmark parameters for `bench`,
    /// step parameters for every other subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, default_value = "info")]
    log_level: log::LevelFilter,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Read NetCDF or raw input, clip it and write the raw format.
    Ingest(OpArgs),
    /// Resample onto a regular depth and horizontal grid.
    Resample(OpArgs),
    /// Derived fields (speed, vorticity, curl, okuboWeiss) from velocity.
    Derive(OpArgs),
    /// Place seeds.
    Seeds(OpArgs),
    /// Trace streamlines at one time step.
    Streamlines(OpArgs),
    /// Trace pathlines through time.
    Pathlines(OpArgs),
    /// Extract north-facing surface fronts.
    Fronts(OpArgs),
    /// Build the front track graph and its longest tracks.
    Track(OpArgs),
    /// Detect eddies.
    Eddies(EddyArgs),
    /// Sample vertical profiles.
    Profile(ProfileArgs),
    /// Generate the float-image database.
    Cinema(OpArgs),
    /// Run a scaling benchmark suite.
    Bench(BenchArgs),
    /// Write the bundle read by the browser viewer.
    ViewerExport(OpArgs),
    /// Run a pipeline from `--config`.
    Run,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
enum Format {
    Raw,
    Netcdf,
    Synthetic,
}

#[derive(Args, Debug)]
struct OpArgs {
    /// Input file or raw directory; omit with `--format synthetic`.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Input format; inferred from the path when absent.
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Variables to read (comma-separated).
    #[arg(long, value_delimiter = ',')]
    variables: Vec<String>,
    /// Clip box: lonMin,lonMax,latMin,latMax,maxDepth.
    #[arg(long, value_delimiter = ',')]
    clip: Option<Vec<f64>>,
    /// Step parameters as inline JSON; merged over `--config`.
    #[arg(long)]
    params: Option<String>,
}

#[derive(Args, Debug)]
struct EddyArgs {
    #[command(flatten)]
    op: OpArgs,
    /// Allowed closure gap as a fraction of the seed radius.
    #[arg(long)]
    closure_fraction: Option<f64>,
    /// Minimum persistence of a speed minimum (m/s); 10% of the slice range when absent.
    #[arg(long)]
    persistence_threshold: Option<f64>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    #[command(flatten)]
    op: OpArgs,
    /// Needle position lon,lat; repeatable.
    #[arg(long, value_delimiter = ',', num_args = 2, action = clap::ArgAction::Append)]
    needle: Vec<f64>,
}

#[derive(Copy, Clone, Debug, ValueEnum)]
#[value(rename_all = "camelCase")]
enum SuiteArg {
    WeakScaling,
    StrongScaling,
    ResolutionScaling,
    IoLoad,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum)]
    suite: SuiteArg,
    /// Worker counts to sweep (comma-separated).
    #[arg(long, value_delimiter = ',')]
    sweep: Vec<usize>,
    /// Repeats per cell.
    #[arg(long)]
    repeats: Option<usize>,
}

fn read_json(path: &Path) -> Result<Value, Error> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::InvalidParameter(format!("{}: {e}", path.display())))
}

fn merge(base: &mut Map<String, Value>, over: Map<String, Value>) {
    for (k, v) in over {
        base.insert(k, v);
    }
}

fn object(v: Value, what: &str) -> Result<Map<String, Value>, Error> {
    match v {
        Value::Object(m) => Ok(m),
        Value::Null => Ok(Map::new()),
        _ => Err(Error::InvalidParameter(format!("{what} must be a JSON object"))),
    }
}

fn step_params(cli: &Cli, op: &OpArgs) -> Result<Map<String, Value>, Error> {
    let mut params = match &cli.config {
        Some(path) => object(read_json(path)?, "--config")?,
        None => Map::new(),
    };
    if let Some(text) = &op.params {
        let v = serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("--params: {e}")))?;
        merge(&mut params, object(v, "--params")?);
    }
    Ok(params)
}

fn input_spec(op: &OpArgs) -> Result<InputSpec, Error> {
    let format = match (op.format, &op.input) {
        (Some(Format::Raw), _) => InputFormat::Raw,
        (Some(Format::Netcdf), _) => InputFormat::Netcdf,
        (Some(Format::Synthetic), _) => InputFormat::Synthetic,
        (None, Some(p)) if matches!(p.extension().and_then(|e| e.to_str()), Some("nc" | "nc4" | "cdf")) => {
            InputFormat::Netcdf
        }
        (None, Some(_)) => InputFormat::Raw,
        (None, None) => {
            return Err(Error::InvalidParameter("--input is required unless --format synthetic".into()))
        }
    };
    Ok(InputSpec {
        path: op.input.clone(),
        format,
        variables: op.variables.clone(),
        synthetic: None,
    })
}

fn clip_spec(op: &OpArgs) -> Result<Option<ClipSpec>, Error> {
    let Some(c) = &op.clip else {
        return Ok(None);
    };
    let &[lon_min, lon_max, lat_min, lat_max, max_depth] = c.as_slice() else {
        return Err(Error::InvalidParameter(format!(
            "--clip takes lonMin,lonMax,latMin,latMax,maxDepth, got {} values",
            c.len()
        )));
    };
    Ok(Some(ClipSpec {
        lon_min,
        lon_max,
        lat_min,
        lat_max,
        max_depth,
        time_range: None,
    }))
}

fn out_dir(cli: &Cli) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn run_step(cli: &Cli, name: &str, op: &OpArgs, params: Map<String, Value>) -> Result<(), Error> {
    let config = PipelineConfig {
        input: input_spec(op)?,
        clip: clip_spec(op)?,
        steps: vec![StepConfig {
            op: name.into(),
            params: Value::Object(params),
        }],
        workers: cli.workers.unwrap_or(1),
        out_dir: out_dir(cli),
    };
    report(&config.out_dir, runner::run(&config)?)
}

/// One line per step; checksums are in the manifest.
fn report(out: &Path, manifest: runner::Manifest) -> Result<(), Error> {
    for step in &manifest.steps {
        let bytes: u64 = step.artifacts.iter().map(|a| a.bytes).sum();
        println!("{}: {} files, {bytes} bytes", step.op, step.artifacts.len());
    }
    println!("manifest: {}", out.join("manifest.json").display());
    Ok(())
}

fn bench(cli: &Cli, args: &BenchArgs) -> Result<(), Error> {
    let mut params: BenchParams = match &cli.config {
        Some(path) => serde_json::from_value(read_json(path)?)
            .map_err(|e| Error::InvalidParameter(format!("benchmark parameters: {e}")))?,
        None => BenchParams::default(),
    };
    if !args.sweep.is_empty() {
        params.workers = args.sweep.clone();
    }
    if let Some(w) = cli.workers {
        params.resolution_workers = w;
    }
    if let Some(r) = args.repeats {
        params.repeats = r;
    }
    let suite = match args.suite {
        SuiteArg::WeakScaling => Suite::WeakScaling,
        SuiteArg::StrongScaling => Suite::StrongScaling,
        SuiteArg::ResolutionScaling => Suite::ResolutionScaling,
        SuiteArg::IoLoad => Suite::IoLoad,
    };
    let report = run_benchmark(suite, &params)?;
    let out = out_dir(cli);
    std::fs::create_dir_all(&out).map_err(|source| Error::Io {
        path: out.clone(),
        source,
    })?;
    let name = serde_json::to_value(suite)?.as_str().unwrap_or("bench").to_string();
    let csv_path = out.join(format!("{name}.csv"));
    let csv = records_csv(&report.records);
    std::fs::write(&csv_path, &csv).map_err(|source| Error::Io { path: csv_path, source })?;
    let json_path = out.join(format!("{name}.json"));
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)
        .map_err(|source| Error::Io { path: json_path, source })?;
    print!("{csv}");
    if let Some(msg) = &report.aborted {
        eprintln!("aborted: {msg}");
    }
    Ok(())
}

fn execute(cli: &Cli) -> Result<(), Error> {
    match &cli.command {
        Command::Run => {
            let path = cli
                .config
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter("run needs --config".into()))?;
            let mut config = PipelineConfig::from_file(path)?;
            if let Some(out) = &cli.out {
                config.out_dir = out.clone();
            }
            if let Some(w) = cli.workers {
                config.workers = w;
            }
            report(&config.out_dir, runner::run(&config)?)
        }
        Command::Bench(args) => bench(cli, args),
        Command::Eddies(a) => {
            let mut params = step_params(cli, &a.op)?;
            let mut eddy = object(params.remove("eddy").unwrap_or(Value::Null), "eddy")?;
            if let Some(c) = a.closure_fraction {
                eddy.insert("closureFraction".into(), c.into());
            }
            if let Some(p) = a.persistence_threshold {
                eddy.insert("persistenceThreshold".into(), p.into());
            }
            if !eddy.is_empty() {
                params.insert("eddy".into(), Value::Object(eddy));
            }
            run_step(cli, "eddies", &a.op, params)
        }
        Command::Profile(a) => {
            let mut params = step_params(cli, &a.op)?;
            if !a.needle.is_empty() {
                let needles: Vec<Value> = a.needle.chunks(2).map(|c| serde_json::json!([c[0], c[1]])).collect();
                params.insert("needles".into(), Value::Array(needles));
            }
            run_step(cli, "profile", &a.op, params)
        }
        Command::Ingest(a) => run_step(cli, "ingest", a, step_params(cli, a)?),
        Command::Resample(a) => run_step(cli, "resample", a, step_params(cli, a)?),
        Command::Derive(a) => run_step(cli, "derive", a, step_params(cli, a)?),
        Command::Seeds(a) => run_step(cli, "seeds", a, step_params(cli, a)?),
        Command::Streamlines(a) => run_step(cli, "streamlines", a, step_params(cli, a)?),
        Command::Pathlines(a) => run_step(cli, "pathlines", a, step_params(cli, a)?),
        Command::Fronts(a) => run_step(cli, "fronts", a, step_params(cli, a)?),
        Command::Track(a) => run_step(cli, "track", a, step_params(cli, a)?),
        Command::Cinema(a) => run_step(cli, "cinema", a, step_params(cli, a)?),
        Command::ViewerExport(a) => run_step(cli, "viewerExport", a, step_params(cli, a)?),
    }
}

/// 2 for invalid input or parameters, 4 for I/O failures, 3 otherwise.
fn exit_code(e: &Error) -> u8 {
    if e.is_validation() {
        2
    } else if e.is_io() {
        4
    } else {
        3
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::new().filter_level(cli.log_level).init();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
