//! Raw internal format: a JSON header plus one little-endian `float32` blob
//! per variable per time step, row-major over (depth, lat, lon).

use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array3;
use serde::{Deserialize, Serialize};

use super::{DataSource, Dataset};
use crate::grid::{AxisKind, Grid4D, GridAxis, Metric};
use crate::{Error, Result};

pub const RAW_FORMAT: &str = "ocean-raw";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawAxes {
    pub time: Vec<f64>,
    pub depth: Vec<f64>,
    pub lat: Vec<f64>,
    pub lon: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawHeader {
    pub format: String,
    pub version: u32,
    pub axes: RawAxes,
    #[serde(default)]
    pub metric: Metric,
    /// `[T, D, NLat, NLon]`.
    pub shape: [usize; 4],
    pub variables: Vec<String>,
    /// Stored value that stands for land; `None` means land is stored as NaN.
    #[serde(default)]
    pub fill_value: Option<f32>,
    pub dtype: String,
    pub layout: String,
}

impl RawHeader {
    pub fn for_grid(grid: &Grid4D, variables: Vec<String>, fill_value: Option<f32>) -> Self {
        RawHeader {
            format: RAW_FORMAT.to_string(),
            version: 1,
            axes: RawAxes {
                time: grid.time().coords().to_vec(),
                depth: grid.depth().coords().to_vec(),
                lat: grid.lat().coords().to_vec(),
                lon: grid.lon().coords().to_vec(),
            },
            metric: grid.metric(),
            shape: grid.shape(),
            variables,
            fill_value,
            dtype: "float32-le".to_string(),
            layout: "depth,lat,lon".to_string(),
        }
    }

    pub fn grid(&self) -> Result<Grid4D> {
        let grid = Grid4D::new(
            GridAxis::new(AxisKind::Time, self.axes.time.clone())?,
            GridAxis::new(AxisKind::Depth, self.axes.depth.clone())?,
            GridAxis::new(AxisKind::Lat, self.axes.lat.clone())?,
            GridAxis::new(AxisKind::Lon, self.axes.lon.clone())?,
            self.metric,
        )?;
        if grid.shape() != self.shape {
            return Err(Error::Format(format!(
                "header shape {:?} does not match axes {:?}",
                self.shape,
                grid.shape()
            )));
        }
        Ok(grid)
    }
}

/// File name of the blob holding `variable` at step `t`.
pub fn blob_name(variable: &str, t: usize) -> String {
    format!("{variable}.t{t:05}.f32")
}

/// Raw-format dataset on disk.
#[derive(Debug)]
pub struct RawSource {
    dir: PathBuf,
    header: RawHeader,
    grid: Grid4D,
}

impl RawSource {
    pub fn open(header_path: impl AsRef<Path>) -> Result<Self> {
        let path = header_path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let header: RawHeader = serde_json::from_str(&text)
            .map_err(|e| Error::Format(format!("{}: {e}", path.display())))?;
        if header.format != RAW_FORMAT {
            return Err(Error::Format(format!(
                "{}: unexpected format tag '{}'",
                path.display(),
                header.format
            )));
        }
        let grid = header.grid()?;
        Ok(RawSource {
            dir: path.parent().unwrap_or(Path::new(".")).to_path_buf(),
            header,
            grid,
        })
    }

    pub fn header(&self) -> &RawHeader {
        &self.header
    }
}

impl DataSource for RawSource {
    fn grid(&self) -> &Grid4D {
        &self.grid
    }

    fn variables(&self) -> Vec<String> {
        self.header.variables.clone()
    }

    fn read(&self, t: usize, variable: &str) -> Result<Array3<f64>> {
        let path = self.dir.join(blob_name(variable, t));
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let shape = self.grid.volume_shape();
        let n = shape.0 * shape.1 * shape.2;
        if bytes.len() != n * 4 {
            return Err(Error::Format(format!(
                "{}: expected {} bytes, found {}",
                path.display(),
                n * 4,
                bytes.len()
            )));
        }
        let fill = self.header.fill_value.map(f32::to_bits);
        let values: Vec<f64> = bytes
            .chunks_exact(4)
            .map(|c| {
                let bits = u32::from_le_bytes([c[0], c[1], c[2], c[3]]);
                if Some(bits) == fill {
                    f64::NAN
                } else {
                    f32::from_bits(bits) as f64
                }
            })
            .collect();
        Array3::from_shape_vec(shape, values).map_err(|e| Error::Format(e.to_string()))
    }

    fn source_bytes(&self, variables: &[String]) -> u64 {
        let steps = self.grid.time().len();
        variables
            .iter()
            .flat_map(|v| (0..steps).map(move |t| blob_name(v, t)))
            .filter_map(|name| fs::metadata(self.dir.join(name)).ok())
            .map(|m| m.len())
            .sum()
    }
}

/// Writes `dataset` (all steps, selected variables) in raw format under `dir`.
/// Returns the path of the header.
pub fn write_raw(dataset: &Dataset, dir: impl AsRef<Path>, fill_value: Option<f32>) -> Result<PathBuf> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let header = RawHeader::for_grid(dataset.grid(), dataset.variables().to_vec(), fill_value);
    for variable in dataset.variables() {
        for t in 0..dataset.steps() {
            let vol = dataset.load(t, variable)?;
            let mut bytes = Vec::with_capacity(vol.values().len() * 4);
            for &v in vol.values().iter() {
                let x = match fill_value {
                    Some(fv) if v.is_nan() => fv,
                    _ => v as f32,
                };
                bytes.extend_from_slice(&x.to_le_bytes());
            }
            let path = dir.join(blob_name(variable, t));
            fs::write(&path, bytes).map_err(|e| Error::io(&path, e))?;
        }
    }
    let path = dir.join("header.json");
    fs::write(&path, serde_json::to_vec_pretty(&header)?).map_err(|e| Error::io(&path, e))?;
    Ok(path)
}
