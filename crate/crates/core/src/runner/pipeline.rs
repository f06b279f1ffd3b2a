//! JSON-configured pipelines. Steps run in order on one worker pool; every
//! file they write is listed with its SHA-256 in `manifest.json`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::export::{viewer_export, ExportParams};
use super::{write_json, write_text, WorkerPool};
use crate::cinema::{compression_report, generate_database, CinemaSpec, Orientation};
use crate::eddy::{detect_eddies, eddies_geojson, EddyDescriptor, EddyParams};
use crate::flow::{
    pathlines, place_seeds, polylines_geojson, preload_velocity, streamlines, IntegrationParams, PathlineSeries,
    Point, SeedSpec, SeedStrategy,
};
use crate::fronts::{
    build_track_graph, check_neighbourhood, extract_fronts, extract_fronts_partitioned, longest_tracks,
    tracks_geojson, IsovolumeSpec, SurfaceFront, DEFAULT_NEIGHBOURHOOD,
};
use crate::grid::{derived_field, resample_regular, DerivedFieldKind, ResampleSpec, ScalarVolume};
use crate::io::{resolve_time_range, write_raw, ClipSpec, Dataset, MemorySource};
use crate::partition::{balance_report, plan_partition, Scheme};
use crate::profile::{profile_csv, sample_needle, select_depth_interval, DepthProfile};
use crate::synthetic::{synthetic_dataset, SyntheticSpec};
use crate::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum InputFormat {
    /// Directory header written by the `ingest` step.
    Raw,
    Netcdf,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InputSpec {
    #[serde(default)]
    pub path: Option<PathBuf>,
    pub format: InputFormat,
    /// Variables to read; required for NetCDF, a filter otherwise.
    #[serde(default)]
    pub variables: Vec<String>,
    #[serde(default)]
    pub synthetic: Option<SyntheticSpec>,
}

impl InputSpec {
    pub fn open(&self) -> Result<Dataset> {
        let path = || {
            self.path
                .as_ref()
                .ok_or_else(|| Error::InvalidParameter(format!("{:?} input needs a path", self.format)))
        };
        let ds = match self.format {
            InputFormat::Raw => {
                let p = path()?;
                let header = if p.is_dir() { p.join("header.json") } else { p.clone() };
                Dataset::open_raw(header)?
            }
            InputFormat::Netcdf => {
                if self.variables.is_empty() {
                    return Err(Error::InvalidParameter("NetCDF input needs a variable list".into()));
                }
                return Dataset::open_netcdf(path()?, &self.variables, &ClipSpec::everything());
            }
            InputFormat::Synthetic => synthetic_dataset(&self.synthetic.clone().unwrap_or_default())?,
        };
        if self.variables.is_empty() {
            Ok(ds)
        } else {
            ds.select_variables(&self.variables)
        }
    }

    fn validate(&self) -> Result<()> {
        match self.format {
            InputFormat::Raw | InputFormat::Netcdf if self.path.is_none() => Err(Error::InvalidParameter(format!(
                "{:?} input needs a path",
                self.format
            ))),
            InputFormat::Netcdf if self.variables.is_empty() => {
                Err(Error::InvalidParameter("NetCDF input needs a variable list".into()))
            }
            InputFormat::Synthetic => self.synthetic.clone().unwrap_or_default().validate(),
            _ => Ok(()),
        }
    }
}

/// `{op, params}` as written in the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StepConfig {
    pub op: String,
    #[serde(default)]
    pub params: Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub clip: Option<ClipSpec>,
    pub steps: Vec<StepConfig>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub out_dir: PathBuf,
}

fn default_workers() -> usize {
    1
}

type Velocity = (String, String);

fn default_velocity() -> Velocity {
    ("u".into(), "v".into())
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct IngestParams {
    /// Value written for land; NaN when absent.
    pub fill_value: Option<f32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct DeriveParams {
    pub field: String,
    pub velocity: Velocity,
    pub time_range: Option<(usize, usize)>,
}

impl Default for DeriveParams {
    fn default() -> Self {
        DeriveParams {
            field: "speed".into(),
            velocity: default_velocity(),
            time_range: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct FlowParams {
    pub seeds: SeedSpec,
    pub integration: IntegrationParams,
    /// Time step for seeds and streamlines.
    pub t: usize,
    /// Steps for pathlines.
    pub time_range: Option<(usize, usize)>,
    pub velocity: Velocity,
}

impl Default for FlowParams {
    fn default() -> Self {
        FlowParams {
            seeds: SeedSpec::uniform(100, 0),
            integration: IntegrationParams::default(),
            t: 0,
            time_range: None,
            velocity: default_velocity(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct PartitionParams {
    pub scheme: Scheme,
    #[serde(default = "one")]
    pub ghost_width: usize,
    /// Block count; the worker count when absent.
    #[serde(default)]
    pub blocks: Option<usize>,
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct FrontParams {
    pub isovolume: IsovolumeSpec,
    pub neighbourhood: usize,
    pub time_range: Option<(usize, usize)>,
    pub partition: Option<PartitionParams>,
    pub top_k: usize,
}

impl Default for FrontParams {
    fn default() -> Self {
        FrontParams {
            isovolume: IsovolumeSpec::salinity("salinity"),
            neighbourhood: DEFAULT_NEIGHBOURHOOD,
            time_range: None,
            partition: None,
            top_k: 5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct EddyStepParams {
    pub eddy: EddyParams,
    pub time_range: Option<(usize, usize)>,
    pub velocity: Velocity,
}

impl Default for EddyStepParams {
    fn default() -> Self {
        EddyStepParams {
            eddy: EddyParams::default(),
            time_range: None,
            velocity: default_velocity(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ProfileParams {
    /// (lon, lat) positions.
    pub needles: Vec<(f64, f64)>,
    /// Variables to sample; all when empty.
    pub fields: Vec<String>,
    pub time_range: Option<(usize, usize)>,
    pub intervals: Option<Vec<(f64, f64)>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct CinemaParams {
    pub fields: Vec<String>,
    pub orientation: Orientation,
    pub velocity: Velocity,
    pub time_range: Option<(usize, usize)>,
}

impl Default for CinemaParams {
    fn default() -> Self {
        CinemaParams {
            fields: Vec::new(),
            orientation: Orientation::Depth,
            velocity: default_velocity(),
            time_range: None,
        }
    }
}

/// A validated pipeline step.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Ingest(IngestParams),
    Resample(ResampleSpec),
    Derive(DeriveParams),
    Seeds(FlowParams),
    Streamlines(FlowParams),
    Pathlines(FlowParams),
    Fronts(FrontParams),
    Track(FrontParams),
    Eddies(EddyStepParams),
    Profile(ProfileParams),
    Cinema(CinemaParams),
    ViewerExport(ExportParams),
}

pub const OPERATIONS: [&str; 12] = [
    "ingest",
    "resample",
    "derive",
    "seeds",
    "streamlines",
    "pathlines",
    "fronts",
    "track",
    "eddies",
    "profile",
    "cinema",
    "viewerExport",
];

fn params<T: DeserializeOwned>(op: &str, value: &Value) -> Result<T> {
    let v = if value.is_null() { json!({}) } else { value.clone() };
    serde_json::from_value(v).map_err(|e| Error::InvalidParameter(format!("{op}: {e}")))
}

impl Step {
    /// Parses and validates one `{op, params}` entry.
    pub fn parse(config: &StepConfig) -> Result<Self> {
        let op = config.op.as_str();
        let p = &config.params;
        let step = match op {
            "ingest" => Step::Ingest(params(op, p)?),
            "resample" => {
                let spec: ResampleSpec = params(op, p)?;
                spec.validate()?;
                Step::Resample(spec)
            }
            "derive" => {
                let d: DeriveParams = params(op, p)?;
                DerivedFieldKind::parse(&d.field)?;
                Step::Derive(d)
            }
            "seeds" | "streamlines" | "pathlines" => {
                let f: FlowParams = params(op, p)?;
                f.integration.validate()?;
                if f.seeds.count == 0 {
                    return Err(Error::InvalidParameter(format!("{op}: seed count must be at least 1")));
                }
                match op {
                    "seeds" => Step::Seeds(f),
                    "streamlines" => Step::Streamlines(f),
                    _ => Step::Pathlines(f),
                }
            }
            "fronts" | "track" => {
                let f: FrontParams = params(op, p)?;
                f.isovolume.validate()?;
                check_neighbourhood(f.neighbourhood)?;
                if f.top_k == 0 {
                    return Err(Error::InvalidParameter(format!("{op}: topK must be at least 1")));
                }
                if op == "fronts" {
                    Step::Fronts(f)
                } else {
                    Step::Track(f)
                }
            }
            "eddies" => {
                let e: EddyStepParams = params(op, p)?;
                e.eddy.validate()?;
                Step::Eddies(e)
            }
            "profile" => Step::Profile(params(op, p)?),
            "cinema" => Step::Cinema(params(op, p)?),
            "viewerExport" | "viewer-export" => {
                let e: ExportParams = params(op, p)?;
                e.validate()?;
                Step::ViewerExport(e)
            }
            other => {
                return Err(Error::InvalidParameter(format!(
                    "unknown operation '{other}'; expected one of {}",
                    OPERATIONS.join(", ")
                )))
            }
        };
        Ok(step)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Step::Ingest(_) => "ingest",
            Step::Resample(_) => "resample",
            Step::Derive(_) => "derive",
            Step::Seeds(_) => "seeds",
            Step::Streamlines(_) => "streamlines",
            Step::Pathlines(_) => "pathlines",
            Step::Fronts(_) => "fronts",
            Step::Track(_) => "track",
            Step::Eddies(_) => "eddies",
            Step::Profile(_) => "profile",
            Step::Cinema(_) => "cinema",
            Step::ViewerExport(_) => "viewerExport",
        }
    }
}

impl PipelineConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidParameter(format!("pipeline config: {e}")))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        Self::from_json(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }

    /// Checks everything that can be checked without reading data.
    pub fn validate(&self) -> Result<Vec<Step>> {
        if self.workers == 0 {
            return Err(Error::InvalidParameter("workers must be at least 1".into()));
        }
        if self.steps.is_empty() {
            return Err(Error::InvalidParameter("pipeline has no steps".into()));
        }
        self.input.validate()?;
        if let Some(c) = &self.clip {
            c.validate()?;
        }
        self.steps
            .iter()
            .enumerate()
            .map(|(i, s)| Step::parse(s).map_err(|e| Error::InvalidParameter(format!("step {i}: {e}"))))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Artifact {
    /// Relative to the output directory, with `/` separators.
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepRecord {
    pub index: usize,
    pub op: String,
    pub artifacts: Vec<Artifact>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct FailedStep {
    pub index: usize,
    pub op: String,
    pub error: String,
}

/// Lists what each step wrote. Free of timings and worker counts so that it
/// is itself identical across runs with different pools.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Manifest {
    pub status: String,
    pub failed_step: Option<FailedStep>,
    pub steps: Vec<StepRecord>,
}

fn list_files(root: &Path, dir: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let path = entry.path();
        if path.is_dir() {
            list_files(root, &path, out)?;
        } else if path != root.join(MANIFEST_FILE) {
            out.push(path);
        }
    }
    Ok(())
}

fn relative(root: &Path, path: &Path) -> String {
    path.strip_prefix(root)
        .unwrap_or(path)
        .components()
        .map(|c| c.as_os_str().to_string_lossy().into_owned())
        .collect::<Vec<_>>()
        .join("/")
}

/// Files under `root` that are not in `seen`, checksummed, in path order.
fn new_artifacts(root: &Path, seen: &mut BTreeSet<String>) -> Result<Vec<Artifact>> {
    let mut files = Vec::new();
    list_files(root, root, &mut files)?;
    let mut fresh: Vec<(String, PathBuf)> = files
        .into_iter()
        .map(|p| (relative(root, &p), p))
        .filter(|(r, _)| !seen.contains(r))
        .collect();
    fresh.sort();
    let artifacts = fresh
        .par_iter()
        .map(|(rel, p)| {
            let bytes = fs::read(p).map_err(|e| Error::io(p, e))?;
            Ok(Artifact {
                path: rel.clone(),
                bytes: bytes.len() as u64,
                sha256: hex::encode(Sha256::digest(&bytes)),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    seen.extend(fresh.into_iter().map(|(r, _)| r));
    Ok(artifacts)
}

/// Materialises `f(t)` for every step into a new in-memory dataset variable.
fn materialise(
    grid: crate::grid::Grid4D,
    name: &str,
    steps: usize,
    f: impl Fn(usize) -> Result<ScalarVolume> + Sync,
) -> Result<Dataset> {
    let vols = (0..steps)
        .into_par_iter()
        .map(|t| f(t).map(ScalarVolume::into_values))
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset::new(MemorySource::new(grid).with_variable(name, vols)?))
}

struct Context {
    dataset: Dataset,
    out: PathBuf,
    workers: usize,
}

impl Context {
    fn step(&mut self, step: &Step) -> Result<()> {
        let ds = &self.dataset;
        let out = &self.out;
        match step {
            Step::Ingest(p) => {
                write_raw(ds, out.join("raw"), p.fill_value)?;
            }
            Step::Resample(spec) => {
                let target = spec.target_grid(ds.grid())?;
                let mut src = MemorySource::new(target.clone());
                for var in ds.variables() {
                    let vols = (0..ds.steps())
                        .into_par_iter()
                        .map(|t| resample_regular(&ds.load(t, var)?, spec).map(ScalarVolume::into_values))
                        .collect::<Result<Vec<_>>>()?;
                    src = src.with_variable(var, vols)?;
                }
                let header = write_raw(&Dataset::new(src), out.join("resampled"), None)?;
                // Later steps work on the resampled data.
                self.dataset = Dataset::open_raw(header)?;
            }
            Step::Derive(p) => {
                let kind = DerivedFieldKind::parse(&p.field)?;
                let time = resolve_time_range(ds, p.time_range)?;
                let grid = ds.grid().with_time(ds.grid().time().sub(time.clone())?)?;
                let derived = materialise(grid, &p.field, time.len(), |i| {
                    let vel = ds.load_velocity(time.start + i, &p.velocity.0, &p.velocity.1, None)?;
                    derived_field(&vel, &kind)
                })?;
                write_raw(&derived, out.join("derived"), None)?;
            }
            Step::Seeds(p) => {
                let seeds = self.seeds(p)?;
                write_json(&out.join("seeds.json"), &seeds)?;
            }
            Step::Streamlines(p) => {
                let seeds = self.seeds(p)?;
                let vel = ds.load_velocity(p.t, &p.velocity.0, &p.velocity.1, None)?;
                let lines = streamlines(&vel, &seeds, &p.integration)?;
                write_json(&out.join("streamlines.geojson"), &polylines_geojson(&lines, ds.grid().metric()))?;
            }
            Step::Pathlines(p) => {
                let time = resolve_time_range(ds, p.time_range)?;
                let first = FlowParams { t: time.start, ..p.clone() };
                let seeds = self.seeds(&first)?;
                let series: PathlineSeries = preload_velocity(ds, &p.velocity.0, &p.velocity.1, time)?;
                let lines = pathlines(&series, &seeds, &p.integration)?;
                write_json(&out.join("pathlines.geojson"), &polylines_geojson(&lines, ds.grid().metric()))?;
            }
            Step::Fronts(p) => {
                let time = resolve_time_range(ds, p.time_range)?;
                let plan = match p.partition {
                    Some(pp) => Some(plan_partition(
                        ds.grid().volume_shape(),
                        pp.blocks.unwrap_or(self.workers),
                        pp.scheme,
                        pp.ghost_width,
                    )?),
                    None => None,
                };
                let steps = time
                    .into_par_iter()
                    .map(|t| {
                        let field = ds.load(t, &p.isovolume.variable)?;
                        let step = match &plan {
                            Some(plan) => extract_fronts_partitioned(&field, &p.isovolume, p.neighbourhood, plan)?,
                            None => extract_fronts(&field, &p.isovolume, p.neighbourhood)?,
                        };
                        let balance = match &plan {
                            Some(plan) => Some(balance_report(plan, &field.ocean_mask())?),
                            None => None,
                        };
                        Ok((step, balance))
                    })
                    .collect::<Result<Vec<_>>>()?;
                let summary: Vec<Value> = steps
                    .iter()
                    .map(|(s, balance)| {
                        json!({
                            "t": s.t,
                            "count": s.labeling.count,
                            "fronts": s.fronts.iter().collect::<Vec<&SurfaceFront>>(),
                            "balance": balance,
                        })
                    })
                    .collect();
                write_json(&out.join("fronts.json"), &summary)?;
            }
            Step::Track(p) => {
                let time = resolve_time_range(ds, p.time_range)?;
                let graph = build_track_graph(ds, &p.isovolume, p.neighbourhood, time)?;
                let best = longest_tracks(&graph, p.top_k)?;
                write_text(&out.join("track_graph.json"), &graph.to_json()?)?;
                write_json(&out.join("tracks.geojson"), &tracks_geojson(&graph, &best))?;
            }
            Step::Eddies(p) => {
                let time = resolve_time_range(ds, p.time_range)?;
                let eddies: Vec<EddyDescriptor> = time
                    .into_par_iter()
                    .map(|t| detect_eddies(&ds.load_velocity(t, &p.velocity.0, &p.velocity.1, None)?, &p.eddy))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .flatten()
                    .collect();
                write_json(&out.join("eddies.json"), &eddies)?;
                write_json(&out.join("eddies.geojson"), &eddies_geojson(&eddies))?;
            }
            Step::Profile(p) => {
                let time = resolve_time_range(ds, p.time_range)?;
                let fields = if p.fields.is_empty() {
                    ds.variables().to_vec()
                } else {
                    p.fields.clone()
                };
                let needles = if p.needles.is_empty() {
                    return Err(Error::InvalidParameter("profile: at least one needle is required".into()));
                } else {
                    &p.needles
                };
                let mut profiles: Vec<DepthProfile> = Vec::new();
                for (n, &(lon, lat)) in needles.iter().enumerate() {
                    let mut prof = sample_needle(ds, lon, lat, &fields, time.clone())?;
                    if let Some(iv) = &p.intervals {
                        prof = select_depth_interval(&prof, iv)?;
                    }
                    write_text(&out.join(format!("profile_{n}.csv")), &profile_csv(&prof))?;
                    profiles.push(prof);
                }
                write_json(&out.join("profiles.json"), &profiles)?;
            }
            Step::Cinema(p) => {
                let time = resolve_time_range(ds, p.time_range)?;
                let fields = if p.fields.is_empty() {
                    ds.variables().to_vec()
                } else {
                    p.fields.clone()
                };
                let spec = CinemaSpec {
                    fields,
                    orientation: p.orientation,
                    velocity: p.velocity.clone(),
                };
                let index = generate_database(ds, &spec, time, out.join("cinema"))?;
                write_json(&out.join("compression.json"), &compression_report(ds, &index)?)?;
            }
            Step::ViewerExport(p) => {
                viewer_export(ds, p, out.join("viewer"))?;
            }
        }
        Ok(())
    }

    fn seeds(&self, p: &FlowParams) -> Result<Vec<Point>> {
        let ds = &self.dataset;
        let vel = ds.load_velocity(p.t, &p.velocity.0, &p.velocity.1, None)?;
        let user = match &p.seeds.strategy {
            SeedStrategy::Weighted {
                field: DerivedFieldKind::UserScalar(name),
            } => Some(ds.load(p.t, name)?),
            _ => None,
        };
        place_seeds(&vel, &p.seeds, user.as_ref())
    }
}

/// Validates `config`, then runs its steps in order on a pool of
/// `config.workers` workers. `manifest.json` is written after every step, so
/// a failing run keeps its partial artifacts and records the failure point;
/// the step's error is then returned.
pub fn run(config: &PipelineConfig) -> Result<Manifest> {
    let steps = config.validate()?;
    let pool = WorkerPool::new(config.workers)?;
    let out = config.out_dir.clone();
    fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;

    let mut manifest = Manifest {
        status: "running".into(),
        failed_step: None,
        steps: Vec::new(),
    };
    let mut seen = BTreeSet::new();
    // Files already present are not this run's artifacts.
    new_artifacts(&out, &mut seen)?;
    let manifest_path = out.join(MANIFEST_FILE);

    let opened = (|| {
        let ds = config.input.open()?;
        match &config.clip {
            Some(c) => ds.clip(c),
            None => Ok(ds),
        }
    })();
    let mut ctx = match opened {
        Ok(dataset) => Context {
            dataset,
            out: out.clone(),
            workers: config.workers,
        },
        Err(e) => {
            manifest.status = "failed".into();
            manifest.failed_step = Some(FailedStep {
                index: 0,
                op: "open".into(),
                error: e.to_string(),
            });
            write_json(&manifest_path, &manifest)?;
            return Err(e);
        }
    };

    for (index, step) in steps.iter().enumerate() {
        log::info!("step {index}: {}", step.name());
        let result = pool.install(|| ctx.step(step));
        let artifacts = new_artifacts(&out, &mut seen)?;
        manifest.steps.push(StepRecord {
            index,
            op: step.name().into(),
            artifacts,
        });
        if let Err(e) = result {
            manifest.status = "failed".into();
            manifest.failed_step = Some(FailedStep {
                index,
                op: step.name().into(),
                error: e.to_string(),
            });
            write_json(&manifest_path, &manifest)?;
            return Err(e);
        }
        write_json(&manifest_path, &manifest)?;
    }
    manifest.status = "ok".into();
    write_json(&manifest_path, &manifest)?;
    Ok(manifest)
}
