//! Dataset handles over the raw binary format, NetCDF classic files and
//! in-memory sources.
//!
//! A [`Dataset`] is lazily read: nothing is materialised until
//! [`Dataset::load`] is called for a given time step and variable. Every load
//! is timed and appended to the handle's load log.

mod memory;
mod netcdf;
mod raw;

use std::ops::Range;
use std::sync::{Arc, Mutex};
use std::time::Instant;

use ndarray::{s, Array3};
use serde::{Deserialize, Serialize};

use crate::grid::{Grid4D, ScalarVolume, VectorVolume};
use crate::{Error, Result};

pub use memory::{FnSource, MemorySource};
pub use netcdf::{write_netcdf_classic, NetcdfSource};
pub use raw::{write_raw, RawHeader, RawSource, RAW_FORMAT};

/// Backing store of a dataset. Reads always return a full source volume.
pub trait DataSource: Send + Sync {
    fn grid(&self) -> &Grid4D;
    fn variables(&self) -> Vec<String>;
    fn read(&self, t: usize, variable: &str) -> Result<Array3<f64>>;
    /// Bytes on disk (or in memory) used by `variables` over the source steps.
    fn source_bytes(&self, variables: &[String]) -> u64;
}

/// Geographic, depth and time clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ClipSpec {
    pub lon_min: f64,
    pub lon_max: f64,
    pub lat_min: f64,
    pub lat_max: f64,
    pub max_depth: f64,
    /// Inclusive step indices.
    #[serde(default)]
    pub time_range: Option<(usize, usize)>,
}

impl ClipSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.lon_min < self.lon_max) || !(self.lat_min < self.lat_max) || !(self.max_depth > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "clip requires lonMin < lonMax, latMin < latMax and maxDepth > 0, got {self:?}"
            )));
        }
        if let Some((a, b)) = self.time_range {
            if a > b {
                return Err(Error::InvalidRange(format!("time range {a}..={b} is reversed")));
            }
        }
        Ok(())
    }

    /// Clip that keeps everything.
    pub fn everything() -> Self {
        ClipSpec {
            lon_min: -180.0,
            lon_max: 360.0,
            lat_min: -90.0,
            lat_max: 90.0,
            max_depth: f64::MAX,
            time_range: None,
        }
    }
}

/// One timed call of [`Dataset::load`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadRecord {
    pub t: usize,
    pub variable: String,
    pub seconds: f64,
}

#[derive(Debug, Clone)]
struct Selection {
    time: Range<usize>,
    depth: Range<usize>,
    lat: Range<usize>,
    lon: Range<usize>,
}

/// A lazily-read, optionally clipped dataset. Safe to share between workers.
pub struct Dataset {
    source: Arc<dyn DataSource>,
    grid: Arc<Grid4D>,
    selection: Selection,
    variables: Vec<String>,
    log: Mutex<Vec<LoadRecord>>,
}

impl std::fmt::Debug for Dataset {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dataset")
            .field("shape", &self.grid.shape())
            .field("variables", &self.variables)
            .finish()
    }
}

impl Dataset {
    pub fn new(source: impl DataSource + 'static) -> Self {
        Self::from_arc(Arc::new(source))
    }

    fn from_arc(source: Arc<dyn DataSource>) -> Self {
        let grid = source.grid().clone();
        let [nt, nd, ny, nx] = grid.shape();
        Dataset {
            variables: source.variables(),
            grid: Arc::new(grid),
            selection: Selection {
                time: 0..nt,
                depth: 0..nd,
                lat: 0..ny,
                lon: 0..nx,
            },
            source,
            log: Mutex::new(Vec::new()),
        }
    }

    /// Opens a raw-format dataset from its JSON header.
    pub fn open_raw(header: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(Self::new(RawSource::open(header)?))
    }

    /// Opens a CF-style NetCDF classic file, keeping `variables` inside `clip`.
    pub fn open_netcdf(
        path: impl AsRef<std::path::Path>,
        variables: &[String],
        clip: &ClipSpec,
    ) -> Result<Self> {
        Self::new(NetcdfSource::open(path, variables)?)
            .select_variables(variables)?
            .clip(clip)
    }

    pub fn grid(&self) -> &Arc<Grid4D> {
        &self.grid
    }

    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn has_variable(&self, name: &str) -> bool {
        self.variables.iter().any(|v| v == name)
    }

    pub fn steps(&self) -> usize {
        self.grid.time().len()
    }

    /// Restricts the dataset to `variables`, keeping their order.
    pub fn select_variables(mut self, variables: &[String]) -> Result<Self> {
        for v in variables {
            if !self.has_variable(v) {
                return Err(Error::NotFound(format!("variable '{v}'")));
            }
        }
        self.variables = variables.to_vec();
        Ok(self)
    }

    /// Clips to a lon/lat box, a maximum depth and an inclusive time range.
    pub fn clip(mut self, clip: &ClipSpec) -> Result<Self> {
        clip.validate()?;
        let g = &self.grid;
        let empty = |what: &str| Error::OutOfDomain(format!("clip {clip:?} selects no {what}"));
        let lon = g.lon().index_range(clip.lon_min, clip.lon_max);
        let lat = g.lat().index_range(clip.lat_min, clip.lat_max);
        let depth = g.depth().index_range(f64::MIN, clip.max_depth);
        let time = match clip.time_range {
            Some((a, b)) => {
                if b >= g.time().len() {
                    return Err(Error::Bounds {
                        what: "time axis",
                        index: b,
                        len: g.time().len(),
                    });
                }
                a..b + 1
            }
            None => 0..g.time().len(),
        };
        for (range, what) in [(&lon, "longitudes"), (&lat, "latitudes"), (&depth, "depths")] {
            if range.is_empty() {
                return Err(empty(what));
            }
        }
        let grid = g.subgrid(time.clone(), depth.clone(), lat.clone(), lon.clone())?;
        let shift = |outer: &Range<usize>, inner: Range<usize>| outer.start + inner.start..outer.start + inner.end;
        self.selection = Selection {
            time: shift(&self.selection.time, time),
            depth: shift(&self.selection.depth, depth),
            lat: shift(&self.selection.lat, lat),
            lon: shift(&self.selection.lon, lon),
        };
        self.grid = Arc::new(grid);
        Ok(self)
    }

    /// Materialises one variable at time step `t` (relative to this handle).
    pub fn load(&self, t: usize, variable: &str) -> Result<ScalarVolume> {
        if t >= self.steps() {
            return Err(Error::Bounds {
                what: "time axis",
                index: t,
                len: self.steps(),
            });
        }
        if !self.has_variable(variable) {
            return Err(Error::NotFound(format!("variable '{variable}'")));
        }
        let start = Instant::now();
        let full = self.source.read(self.selection.time.start + t, variable)?;
        let sel = &self.selection;
        let values = if full.dim() == self.grid.volume_shape() {
            full
        } else {
            full.slice(s![sel.depth.clone(), sel.lat.clone(), sel.lon.clone()])
                .to_owned()
        };
        let volume = ScalarVolume::new(self.grid.clone(), t, values)?;
        let seconds = start.elapsed().as_secs_f64();
        self.log.lock().expect("load log poisoned").push(LoadRecord {
            t,
            variable: variable.to_string(),
            seconds,
        });
        Ok(volume)
    }

    pub fn load_velocity(&self, t: usize, u: &str, v: &str, w: Option<&str>) -> Result<VectorVolume> {
        let w = w.map(|name| self.load(t, name)).transpose()?;
        VectorVolume::new(self.load(t, u)?, self.load(t, v)?, w)
    }

    pub fn load_log(&self) -> Vec<LoadRecord> {
        self.log.lock().expect("load log poisoned").clone()
    }

    pub fn clear_load_log(&self) {
        self.log.lock().expect("load log poisoned").clear();
    }

    /// Bytes used by the selected variables in the backing store.
    pub fn source_bytes(&self) -> u64 {
        self.source.source_bytes(&self.variables)
    }

    /// A new handle over the same source and selection, with an empty load log.
    pub fn share(&self) -> Dataset {
        Dataset {
            source: self.source.clone(),
            grid: self.grid.clone(),
            selection: self.selection.clone(),
            variables: self.variables.clone(),
            log: Mutex::new(Vec::new()),
        }
    }
}

/// Resolves an optional inclusive time range against the dataset length.
pub fn resolve_time_range(dataset: &Dataset, range: Option<(usize, usize)>) -> Result<Range<usize>> {
    let n = dataset.steps();
    match range {
        None => Ok(0..n),
        Some((a, b)) if a <= b && b < n => Ok(a..b + 1),
        Some((a, b)) => Err(Error::InvalidRange(format!(
            "time range {a}..={b} outside 0..{n}"
        ))),
    }
}
