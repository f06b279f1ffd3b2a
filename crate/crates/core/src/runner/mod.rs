//! Orchestration: the worker pool, JSON pipelines with checksummed
//! manifests, the viewer export bundle and the scaling benchmark harness.

mod bench;
mod export;
mod pipeline;

pub use bench::{
    available_memory, estimate_bytes, median_seconds, records_csv, run_benchmark, BenchParams, BenchReport,
    BenchmarkRecord, Suite, CSV_HEADER,
};
pub use export::{viewer_export, ExportParams, ExportSummary};
pub use pipeline::{
    run, Artifact, FailedStep, InputFormat, InputSpec, Manifest, PipelineConfig, Step, StepConfig, StepRecord,
    MANIFEST_FILE, OPERATIONS,
};

use std::fs;
use std::path::Path;

use serde::Serialize;

use crate::{Error, Result};

fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Pretty JSON, except compact for bulky `.geojson` overlays.
fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let text = if path.extension().is_some_and(|e| e == "geojson") {
        serde_json::to_string(value)?
    } else {
        serde_json::to_string_pretty(value)?
    };
    write_text(path, &text)
}

/// `n` independent workers sharing read-only inputs. Everything that runs
/// inside [`WorkerPool::install`] uses this pool for its parallel loops.
pub struct WorkerPool {
    pool: rayon::ThreadPool,
    workers: usize,
}

impl std::fmt::Debug for WorkerPool {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("WorkerPool").field("workers", &self.workers).finish()
    }
}

impl WorkerPool {
    pub fn new(workers: usize) -> Result<Self> {
        if workers == 0 {
            return Err(Error::InvalidParameter("worker count must be at least 1".into()));
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .thread_name(|i| format!("ocean-worker-{i}"))
            .build()
            .map_err(|e| Error::Infeasible(format!("cannot start {workers} workers: {e}")))?;
        Ok(WorkerPool { pool, workers })
    }

    pub fn workers(&self) -> usize {
        self.workers
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}
