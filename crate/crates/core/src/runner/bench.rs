//! Scaling benchmarks on the synthetic dataset: strong, weak and resolution
//! scaling of track-graph construction, and concurrent NetCDF loading.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::WorkerPool;
use crate::fronts::{build_track_graph, IsovolumeSpec, DEFAULT_NEIGHBOURHOOD};
use crate::io::{write_netcdf_classic, ClipSpec, Dataset};
use crate::synthetic::{synthetic_dataset_in_memory, SyntheticSpec, VARIABLES};
use crate::{Error, Result};

pub const CSV_HEADER: &str = "operation,workers,scale,seconds";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Suite {
    WeakScaling,
    StrongScaling,
    ResolutionScaling,
    IoLoad,
}

impl Suite {
    pub fn parse(name: &str) -> Result<Self> {
        serde_json::from_value(serde_json::Value::String(name.to_string())).map_err(|_| {
            Error::InvalidParameter(format!(
                "unknown benchmark suite '{name}'; expected weakScaling, strongScaling, resolutionScaling or ioLoad"
            ))
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct BenchParams {
    /// Dataset at scale 1.
    pub base: SyntheticSpec,
    pub workers: Vec<usize>,
    /// Horizontal data multipliers for resolution scaling; perfect squares.
    pub scales: Vec<usize>,
    pub resolution_workers: usize,
    pub repeats: usize,
    /// Bytes the resolution suite may use; free memory when absent.
    pub memory_budget: Option<u64>,
    pub neighbourhood: usize,
    /// Where the I/O suite writes its NetCDF file; the system temp dir when absent.
    pub scratch_dir: Option<PathBuf>,
}

impl Default for BenchParams {
    fn default() -> Self {
        BenchParams {
            base: SyntheticSpec::standard(),
            workers: vec![1, 2, 4, 8],
            scales: vec![1, 4, 16],
            resolution_workers: 1,
            repeats: 3,
            memory_budget: None,
            neighbourhood: DEFAULT_NEIGHBOURHOOD,
            scratch_dir: None,
        }
    }
}

impl BenchParams {
    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        if self.workers.is_empty() || self.workers.contains(&0) {
            return Err(Error::InvalidParameter("worker counts must be non-empty and positive".into()));
        }
        if self.resolution_workers == 0 || self.repeats == 0 {
            return Err(Error::InvalidParameter("resolutionWorkers and repeats must be at least 1".into()));
        }
        for &s in &self.scales {
            self.base.scaled(s)?;
        }
        crate::fronts::check_neighbourhood(self.neighbourhood)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchmarkRecord {
    pub operation: String,
    pub workers: usize,
    pub scale: usize,
    pub seconds: f64,
    /// Seconds since the Unix epoch when the measurement finished.
    pub timestamp: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BenchReport {
    pub suite: Suite,
    pub records: Vec<BenchmarkRecord>,
    /// Why the suite stopped early, if it did.
    pub aborted: Option<String>,
    pub largest_completed_scale: Option<usize>,
}

pub fn records_csv(records: &[BenchmarkRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!("{},{},{},{}\n", r.operation, r.workers, r.scale, r.seconds));
    }
    out
}

/// Median over the repeats of one (operation, workers, scale) cell.
pub fn median_seconds(records: &[BenchmarkRecord], operation: &str, workers: usize, scale: usize) -> Option<f64> {
    let mut s: Vec<f64> = records
        .iter()
        .filter(|r| r.operation == operation && r.workers == workers && r.scale == scale)
        .map(|r| r.seconds)
        .collect();
    if s.is_empty() {
        return None;
    }
    s.sort_by(f64::total_cmp);
    let m = s.len() / 2;
    Some(if s.len() % 2 == 1 { s[m] } else { 0.5 * (s[m - 1] + s[m]) })
}

/// `MemAvailable` from `/proc/meminfo`, when the platform provides it.
pub fn available_memory() -> Option<u64> {
    let text = fs::read_to_string("/proc/meminfo").ok()?;
    let line = text.lines().find(|l| l.starts_with("MemAvailable:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

/// Peak bytes for building a track graph over `spec` held in memory: every
/// variable as f64, plus masks and labels for the steps in flight.
pub fn estimate_bytes(spec: &SyntheticSpec) -> u64 {
    let voxels = spec.voxels() as u64;
    let volume = (spec.depths * spec.ny * spec.nx) as u64;
    voxels * VARIABLES.len() as u64 * 8 + volume * 16 * spec.steps.min(16) as u64
}

fn now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

fn record(operation: &str, workers: usize, scale: usize, seconds: f64) -> BenchmarkRecord {
    log::info!("{operation} workers={workers} scale={scale}: {seconds:.4}s");
    BenchmarkRecord {
        operation: operation.into(),
        workers,
        scale,
        seconds,
        timestamp: now(),
    }
}

fn time_track_graph(ds: &Dataset, pool: &WorkerPool, n: usize) -> Result<f64> {
    let spec = IsovolumeSpec::salinity("salinity");
    let start = Instant::now();
    pool.install(|| build_track_graph(ds, &spec, n, 0..ds.steps()))?;
    Ok(start.elapsed().as_secs_f64())
}

fn scratch_file(dir: Option<&Path>) -> PathBuf {
    let dir = dir.map(Path::to_path_buf).unwrap_or_else(std::env::temp_dir);
    let nanos = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_nanos())
        .unwrap_or(0);
    dir.join(format!("ocean-bench-{}-{nanos}.nc", std::process::id()))
}

/// Runs one suite. Operations are timed with wall clocks; each cell is
/// repeated `params.repeats` times. The resolution suite checks the memory
/// estimate before each scale and stops with a report instead of running
/// out of memory.
pub fn run_benchmark(suite: Suite, params: &BenchParams) -> Result<BenchReport> {
    params.validate()?;
    let mut records = Vec::new();
    let mut aborted = None;
    let mut largest = None;
    let n = params.neighbourhood;
    match suite {
        Suite::StrongScaling => {
            let ds = synthetic_dataset_in_memory(&params.base)?;
            for &w in &params.workers {
                let pool = WorkerPool::new(w)?;
                for _ in 0..params.repeats {
                    records.push(record("buildTrackGraph", w, 1, time_track_graph(&ds, &pool, n)?));
                }
            }
            largest = Some(1);
        }
        Suite::WeakScaling => {
            for &w in &params.workers {
                let spec = SyntheticSpec {
                    steps: params.base.steps * w,
                    ..params.base.clone()
                };
                let ds = synthetic_dataset_in_memory(&spec)?;
                let pool = WorkerPool::new(w)?;
                for _ in 0..params.repeats {
                    records.push(record("buildTrackGraph", w, w, time_track_graph(&ds, &pool, n)?));
                }
            }
            largest = params.workers.iter().copied().max();
        }
        Suite::ResolutionScaling => {
            let pool = WorkerPool::new(params.resolution_workers)?;
            for &s in &params.scales {
                let spec = params.base.scaled(s)?;
                let need = estimate_bytes(&spec);
                if let Some(budget) = params.memory_budget.or_else(available_memory) {
                    if need > budget {
                        let msg = format!(
                            "scale {s} needs about {need} bytes but only {budget} are available; \
                             largest completed scale: {largest:?}"
                        );
                        log::warn!("{msg}");
                        aborted = Some(msg);
                        break;
                    }
                }
                let ds = synthetic_dataset_in_memory(&spec)?;
                for _ in 0..params.repeats {
                    records.push(record(
                        "buildTrackGraph",
                        params.resolution_workers,
                        s,
                        time_track_graph(&ds, &pool, n)?,
                    ));
                }
                largest = Some(s);
            }
        }
        Suite::IoLoad => {
            let path = scratch_file(params.scratch_dir.as_deref());
            let vars: Vec<String> = VARIABLES.iter().map(|s| s.to_string()).collect();
            let result: Result<()> = (|| {
                write_netcdf_classic(&synthetic_dataset_in_memory(&params.base)?, &path, &vars)?;
                for &w in &params.workers {
                    let pool = WorkerPool::new(w)?;
                    for _ in 0..params.repeats {
                        let ds = Dataset::open_netcdf(&path, &vars, &ClipSpec::everything())?;
                        let jobs: Vec<(usize, &String)> =
                            (0..ds.steps()).flat_map(|t| vars.iter().map(move |v| (t, v))).collect();
                        let start = Instant::now();
                        pool.install(|| jobs.par_iter().try_for_each(|&(t, v)| ds.load(t, v).map(drop)))?;
                        let wall = start.elapsed().as_secs_f64();
                        let log = ds.load_log();
                        let mean = log.iter().map(|r| r.seconds).sum::<f64>() / log.len().max(1) as f64;
                        records.push(record("loadTimeStep", w, 1, mean));
                        records.push(record("loadAllSteps", w, 1, wall));
                    }
                }
                Ok(())
            })();
            let _ = fs::remove_file(&path);
            result?;
            largest = Some(1);
        }
    }
    Ok(BenchReport {
        suite,
        records,
        aborted,
        largest_completed_scale: largest,
    })
}
