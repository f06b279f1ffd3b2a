//! Extraction and tracking of oceanographic features from time-varying
//! rectilinear ocean fields.
//!
//! The crate is organised by feature family:
//!
//! - [`grid`]: the (time, depth, lat, lon) data model, resampling and derived fields
//! - [`io`]: the raw binary format, NetCDF classic ingestion and dataset handles
//! - [`partition`]: depth-slab and lat-lon block decompositions with ghost layers
//! - [`fronts`]: salinity isovolumes, north-facing surface fronts and track graphs
//! - [`flow`]: seed placement, streamlines and pathlines
//! - [`eddy`]: speed-minimum eddy detection with persistence and winding checks
//! - [`profile`]: vertical "needle" profiles
//! - [`cinema`]: float-image database generation
//! - [`runner`]: worker pool, pipelines and the scaling benchmark harness
//!
//! Everything is deterministic with respect to the number of workers.

pub mod cinema;
pub mod eddy;
mod error;
pub mod flow;
pub mod fronts;
pub mod geojson;
pub mod grid;
pub mod io;
pub mod partition;
pub mod profile;
pub mod runner;
pub mod synthetic;

pub use error::{Error, Result};
pub use grid::{AxisKind, DerivedFieldKind, Grid4D, GridAxis, Metric, ScalarVolume, VectorVolume};
pub use io::Dataset;
pub use runner::WorkerPool;
