//! CF-style NetCDF classic reader (CDF-1/2/5).
//!
//! Dimensions are identified as (time, depth, lat, lon) from the coordinate
//! variables' `axis`, `standard_name`, `units` and `positive` attributes, with
//! a fallback on common dimension names. Decreasing axes are flipped, depth
//! is made positive-down and longitudes are normalised to [-180, 180).

use std::path::{Path, PathBuf};
use std::sync::Mutex;

use ndarray::{Array3, Axis};
use netcdf3::{DataSet, DataType, DataVector, FileReader, FileWriter, Version};

use super::{DataSource, Dataset};
use crate::grid::{AxisKind, Grid4D, GridAxis, Metric};
use crate::{Error, Result};

#[derive(Debug, Clone)]
struct VarMeta {
    fill: Option<f64>,
    scale: f64,
    offset: f64,
}

#[derive(Debug)]
pub struct NetcdfSource {
    path: PathBuf,
    grid: Grid4D,
    variables: Vec<String>,
    meta: Vec<VarMeta>,
    /// Whether each of (time, depth, lat, lon) is stored in decreasing order.
    flipped: [bool; 4],
    time_is_record: bool,
    file_bytes: u64,
    // Metadata parsing is not reentrant across readers of one file.
    lock: Mutex<()>,
}

fn nc_err(path: &Path, e: impl std::fmt::Debug) -> Error {
    Error::Format(format!("{}: {e:?}", path.display()))
}

fn attr_string(ds: &DataSet, var: &str, attr: &str) -> Option<String> {
    ds.get_var_attr_as_string(var, attr)
        .map(|s| s.trim_end_matches('\0').trim().to_string())
}

fn attr_number(ds: &DataSet, var: &str, attr: &str) -> Option<f64> {
    let a = ds.get_var_attr(var, attr)?;
    a.get_f64()
        .and_then(|v| v.first().copied())
        .or_else(|| a.get_f32().and_then(|v| v.first().map(|&x| x as f64)))
        .or_else(|| a.get_i32().and_then(|v| v.first().map(|&x| x as f64)))
        .or_else(|| a.get_i16().and_then(|v| v.first().map(|&x| x as f64)))
        .or_else(|| a.get_i8().and_then(|v| v.first().map(|&x| x as f64)))
        .or_else(|| a.get_u8().and_then(|v| v.first().map(|&x| x as f64)))
}

fn default_fill(dtype: DataType) -> f64 {
    match dtype {
        DataType::I8 => netcdf3::NC_FILL_I8 as f64,
        DataType::U8 => netcdf3::NC_FILL_U8 as f64,
        DataType::I16 => netcdf3::NC_FILL_I16 as f64,
        DataType::I32 => netcdf3::NC_FILL_I32 as f64,
        DataType::F32 => netcdf3::NC_FILL_F32 as f64,
        DataType::F64 => netcdf3::NC_FILL_F64,
    }
}

fn to_f64(data: DataVector) -> Vec<f64> {
    match data {
        DataVector::I8(v) => v.into_iter().map(f64::from).collect(),
        DataVector::U8(v) => v.into_iter().map(f64::from).collect(),
        DataVector::I16(v) => v.into_iter().map(f64::from).collect(),
        DataVector::I32(v) => v.into_iter().map(f64::from).collect(),
        DataVector::F32(v) => v.into_iter().map(f64::from).collect(),
        DataVector::F64(v) => v,
    }
}

fn classify(ds: &DataSet, dim: &str) -> Option<AxisKind> {
    if ds.has_var(dim) {
        if let Some(axis) = attr_string(ds, dim, "axis") {
            match axis.to_ascii_uppercase().as_str() {
                "T" => return Some(AxisKind::Time),
                "Z" => return Some(AxisKind::Depth),
                "Y" => return Some(AxisKind::Lat),
                "X" => return Some(AxisKind::Lon),
                _ => {}
            }
        }
        if let Some(name) = attr_string(ds, dim, "standard_name") {
            match name.as_str() {
                "time" => return Some(AxisKind::Time),
                "depth" | "altitude" | "height" => return Some(AxisKind::Depth),
                "latitude" => return Some(AxisKind::Lat),
                "longitude" => return Some(AxisKind::Lon),
                _ => {}
            }
        }
        if let Some(units) = attr_string(ds, dim, "units") {
            let u = units.to_ascii_lowercase();
            if u.contains(" since ") {
                return Some(AxisKind::Time);
            }
            if matches!(u.as_str(), "degrees_north" | "degree_north" | "degree_n" | "degrees_n") {
                return Some(AxisKind::Lat);
            }
            if matches!(u.as_str(), "degrees_east" | "degree_east" | "degree_e" | "degrees_e") {
                return Some(AxisKind::Lon);
            }
        }
        if attr_string(ds, dim, "positive").is_some() {
            return Some(AxisKind::Depth);
        }
    }
    match dim.to_ascii_lowercase().as_str() {
        "time" | "t" | "time_counter" => Some(AxisKind::Time),
        "depth" | "deptht" | "depthu" | "depthv" | "lev" | "level" | "z" => Some(AxisKind::Depth),
        "lat" | "latitude" | "y" | "nav_lat" => Some(AxisKind::Lat),
        "lon" | "longitude" | "x" | "nav_lon" => Some(AxisKind::Lon),
        _ => None,
    }
}

fn days_per_unit(units: &str) -> f64 {
    let u = units.to_ascii_lowercase();
    let unit = u.split(" since ").next().unwrap_or("").trim();
    match unit {
        "seconds" | "second" | "s" | "sec" => 1.0 / 86_400.0,
        "minutes" | "minute" | "min" => 1.0 / 1_440.0,
        "hours" | "hour" | "h" | "hr" => 1.0 / 24.0,
        _ => 1.0,
    }
}

/// Returns the axis in increasing order and whether it was flipped.
fn orient(kind: AxisKind, coords: Vec<f64>) -> Result<(GridAxis, bool)> {
    let increasing = coords.windows(2).all(|w| w[1] > w[0]);
    let decreasing = coords.len() > 1 && coords.windows(2).all(|w| w[1] < w[0]);
    if increasing {
        Ok((GridAxis::new(kind, coords)?, false))
    } else if decreasing {
        Ok((GridAxis::new(kind, coords.into_iter().rev().collect())?, true))
    } else {
        Err(Error::Format(format!("{} coordinate is not monotone", kind.name())))
    }
}

/// Maps a longitude to [-180, 180).
pub fn normalize_lon(x: f64) -> f64 {
    // In-range values pass through untouched so coordinates survive exactly.
    if (-180.0..180.0).contains(&x) {
        x
    } else {
        (x + 180.0).rem_euclid(360.0) - 180.0
    }
}

/// Writes `variables` of `dataset` to a new 64-bit-offset NetCDF classic file
/// with time as the record dimension, as float32 with NaN for land. Used to
/// build single-file benchmark and test inputs.
pub fn write_netcdf_classic(dataset: &Dataset, path: impl AsRef<Path>, variables: &[String]) -> Result<u64> {
    let path = path.as_ref();
    let grid = dataset.grid();
    let [nt, nd, ny, nx] = grid.shape();
    let def_err = |e: netcdf3::error::InvalidDataSet| Error::Format(format!("{}: {e:?}", path.display()));
    let mut ds = DataSet::new();
    ds.set_unlimited_dim("time", nt).map_err(def_err)?;
    for (d, n) in [("depth", nd), ("lat", ny), ("lon", nx)] {
        ds.add_fixed_dim(d, n).map_err(def_err)?;
    }
    let axes: [(&str, &str, &str); 4] = [
        ("time", "T", "days since 2000-01-01"),
        ("depth", "Z", "m"),
        ("lat", "Y", "degrees_north"),
        ("lon", "X", "degrees_east"),
    ];
    for (name, axis, units) in axes {
        ds.add_var_f64(name, &[name]).map_err(def_err)?;
        ds.add_var_attr_string(name, "axis", axis).map_err(def_err)?;
        ds.add_var_attr_string(name, "units", units).map_err(def_err)?;
    }
    ds.add_var_attr_string("depth", "positive", "down").map_err(def_err)?;
    for v in variables {
        if !dataset.has_variable(v) {
            return Err(Error::NotFound(format!("variable '{v}'")));
        }
        ds.add_var_f32(v, &["time", "depth", "lat", "lon"]).map_err(def_err)?;
    }
    let mut w = FileWriter::create_new(path).map_err(|e| nc_err(path, e))?;
    w.set_def(&ds, Version::Offset64Bit, 0).map_err(|e| nc_err(path, e))?;
    w.write_var_f64("depth", grid.depth().coords()).map_err(|e| nc_err(path, e))?;
    w.write_var_f64("lat", grid.lat().coords()).map_err(|e| nc_err(path, e))?;
    w.write_var_f64("lon", grid.lon().coords()).map_err(|e| nc_err(path, e))?;
    for t in 0..nt {
        w.write_record_f64("time", t, &[grid.time().coords()[t]]).map_err(|e| nc_err(path, e))?;
        for v in variables {
            let vol = dataset.load(t, v)?;
            let rec: Vec<f32> = vol.values().iter().map(|&x| x as f32).collect();
            w.write_record_f32(v, t, &rec).map_err(|e| nc_err(path, e))?;
        }
    }
    w.close().map_err(|e| nc_err(path, e))?;
    Ok(std::fs::metadata(path).map_err(|e| Error::io(path, e))?.len())
}

impl NetcdfSource {
    pub fn open(path: impl AsRef<Path>, variables: &[String]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file_bytes = std::fs::metadata(&path).map_err(|e| Error::io(&path, e))?.len();
        let (ds, _) = FileReader::open(&path).map_err(|e| nc_err(&path, e))?.close();
        let mut reader = FileReader::open(&path).map_err(|e| nc_err(&path, e))?;
        if variables.is_empty() {
            return Err(Error::InvalidParameter("no variables requested".into()));
        }
        let mut dims: Option<Vec<String>> = None;
        for var in variables {
            let v = ds
                .get_var(var)
                .ok_or_else(|| Error::NotFound(format!("variable '{var}' in {}", path.display())))?;
            let names = v.dim_names();
            match &dims {
                None => dims = Some(names),
                Some(d) if *d == names => {}
                Some(d) => {
                    return Err(Error::Format(format!(
                        "variable '{var}' has dimensions {names:?}, expected {d:?}"
                    )))
                }
            }
        }
        let dims = dims.unwrap_or_default();
        let kinds: Vec<Option<AxisKind>> = dims.iter().map(|d| classify(&ds, d)).collect();
        let expected = [AxisKind::Time, AxisKind::Depth, AxisKind::Lat, AxisKind::Lon];
        if kinds.len() != 4 || kinds.iter().zip(expected).any(|(k, e)| *k != Some(e)) {
            return Err(Error::Format(format!(
                "expected (time, depth, lat, lon) dimensions, found {dims:?} classified as {kinds:?}"
            )));
        }

        let mut axes = Vec::with_capacity(4);
        let mut flipped = [false; 4];
        for (i, (dim, kind)) in dims.iter().zip(expected).enumerate() {
            let len = ds.dim_size(dim).unwrap_or(0);
            let mut coords = if ds.has_var(dim) {
                to_f64(reader.read_var(dim).map_err(|e| nc_err(&path, e))?)
            } else {
                (0..len).map(|k| k as f64).collect()
            };
            match kind {
                AxisKind::Time => {
                    if let Some(units) = attr_string(&ds, dim, "units") {
                        let f = days_per_unit(&units);
                        coords.iter_mut().for_each(|c| *c *= f);
                    }
                }
                AxisKind::Depth => {
                    let up = attr_string(&ds, dim, "positive")
                        .is_some_and(|p| p.eq_ignore_ascii_case("up"));
                    if up {
                        coords.iter_mut().for_each(|c| *c = -*c);
                    }
                }
                AxisKind::Lon => coords.iter_mut().for_each(|c| *c = normalize_lon(*c)),
                AxisKind::Lat => {}
            }
            let (axis, flip) = orient(kind, coords)?;
            flipped[i] = flip;
            axes.push(axis);
        }
        let mut it = axes.into_iter();
        let grid = Grid4D::new(
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            it.next().unwrap(),
            Metric::Spherical,
        )?;

        let meta = variables
            .iter()
            .map(|var| {
                let dtype = ds.var_data_type(var).unwrap_or(DataType::F32);
                let fill = attr_number(&ds, var, "_FillValue")
                    .or_else(|| attr_number(&ds, var, "missing_value"))
                    .or(Some(default_fill(dtype)));
                VarMeta {
                    fill,
                    scale: attr_number(&ds, var, "scale_factor").unwrap_or(1.0),
                    offset: attr_number(&ds, var, "add_offset").unwrap_or(0.0),
                }
            })
            .collect();
        let time_is_record = ds.is_record_var(&variables[0]).unwrap_or(false);
        Ok(NetcdfSource {
            path,
            grid,
            variables: variables.to_vec(),
            meta,
            flipped,
            time_is_record,
            file_bytes,
            lock: Mutex::new(()),
        })
    }
}

impl DataSource for NetcdfSource {
    fn grid(&self) -> &Grid4D {
        &self.grid
    }

    fn variables(&self) -> Vec<String> {
        self.variables.clone()
    }

    fn read(&self, t: usize, variable: &str) -> Result<Array3<f64>> {
        let idx = self
            .variables
            .iter()
            .position(|v| v == variable)
            .ok_or_else(|| Error::NotFound(format!("variable '{variable}'")))?;
        let [nt, nd, ny, nx] = self.grid.shape();
        if t >= nt {
            return Err(Error::Bounds {
                what: "time axis",
                index: t,
                len: nt,
            });
        }
        let src_t = if self.flipped[0] { nt - 1 - t } else { t };
        let per_step = nd * ny * nx;
        let raw = {
            let _guard = self.lock.lock().expect("netcdf lock poisoned");
            let mut reader = FileReader::open(&self.path).map_err(|e| nc_err(&self.path, e))?;
            if self.time_is_record {
                to_f64(reader.read_record(variable, src_t).map_err(|e| nc_err(&self.path, e))?)
            } else {
                let all = to_f64(reader.read_var(variable).map_err(|e| nc_err(&self.path, e))?);
                all[src_t * per_step..(src_t + 1) * per_step].to_vec()
            }
        };
        if raw.len() != per_step {
            return Err(Error::Format(format!(
                "{}: step of '{variable}' has {} values, expected {per_step}",
                self.path.display(),
                raw.len()
            )));
        }
        let m = &self.meta[idx];
        let values: Vec<f64> = raw
            .into_iter()
            .map(|x| {
                if x.is_nan() || Some(x) == m.fill {
                    f64::NAN
                } else if m.scale == 1.0 && m.offset == 0.0 {
                    x
                } else {
                    x * m.scale + m.offset
                }
            })
            .collect();
        let mut arr = Array3::from_shape_vec((nd, ny, nx), values)
            .map_err(|e| Error::Format(e.to_string()))?;
        for (axis, flip) in self.flipped[1..].iter().enumerate() {
            if *flip {
                arr.invert_axis(Axis(axis));
            }
        }
        Ok(if arr.is_standard_layout() {
            arr
        } else {
            arr.as_standard_layout().to_owned()
        })
    }

    fn source_bytes(&self, _variables: &[String]) -> u64 {
        self.file_bytes
    }
}
