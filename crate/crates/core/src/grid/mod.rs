//! Rectilinear (time, depth, lat, lon) data model.
//!
//! Depth is positive-down in metres, latitude and longitude are in degrees and
//! time coordinates are in days. Land is encoded as NaN in every scalar volume.

mod derive;
mod interp;
mod resample;

use std::sync::Arc;

use ndarray::{Array3, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use derive::{derived_field, horizontal_gradients, HorizontalGradients, EARTH_RADIUS_M};
pub use interp::{bilinear, trilinear, Stencil};
pub use resample::{resample_regular, ResampleSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AxisKind {
    Time,
    Depth,
    Lat,
    Lon,
}

impl AxisKind {
    pub fn name(self) -> &'static str {
        match self {
            AxisKind::Time => "time",
            AxisKind::Depth => "depth",
            AxisKind::Lat => "lat",
            AxisKind::Lon => "lon",
        }
    }
}

/// One coordinate axis. Coordinates are strictly increasing and non-empty.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridAxis {
    kind: AxisKind,
    coords: Vec<f64>,
}

impl GridAxis {
    pub fn new(kind: AxisKind, coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::InvalidInput(format!("{} axis is empty", kind.name())));
        }
        if coords.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{} axis has non-finite coordinates",
                kind.name()
            )));
        }
        if coords.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Format(format!(
                "{} axis is not strictly increasing",
                kind.name()
            )));
        }
        Ok(GridAxis { kind, coords })
    }

    /// `n` coordinates `start + k * step`.
    pub fn regular(kind: AxisKind, start: f64, step: f64, n: usize) -> Result<Self> {
        if !(step > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "{} axis step must be positive",
                kind.name()
            )));
        }
        Self::new(kind, (0..n).map(|k| start + k as f64 * step).collect())
    }

    pub fn kind(&self) -> AxisKind {
        self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.coords[0]
    }

    pub fn last(&self) -> f64 {
        self.coords[self.coords.len() - 1]
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.first() && x <= self.last()
    }

    /// Linear interpolation stencil for coordinate `x`, `None` outside the axis.
    pub fn locate(&self, x: f64) -> Option<Stencil> {
        if !self.contains(x) {
            return None;
        }
        let n = self.coords.len();
        let upper = self.coords.partition_point(|&c| c <= x);
        let i0 = upper.saturating_sub(1);
        if i0 + 1 >= n {
            return Some(Stencil::node(n - 1));
        }
        let (c0, c1) = (self.coords[i0], self.coords[i0 + 1]);
        Some(Stencil::new(i0, (x - c0) / (c1 - c0)))
    }

    /// Coordinate at a fractional index, clamped to the axis.
    pub fn coord_at(&self, index: f64) -> f64 {
        let n = self.coords.len();
        if n == 1 || index <= 0.0 {
            return self.coords[0];
        }
        if index >= (n - 1) as f64 {
            return self.coords[n - 1];
        }
        let i0 = index.floor() as usize;
        let w = index - i0 as f64;
        if w == 0.0 {
            self.coords[i0]
        } else {
            self.coords[i0] * (1.0 - w) + self.coords[i0 + 1] * w
        }
    }

    /// Fractional index of coordinate `x`, `None` outside the axis.
    pub fn fractional_index(&self, x: f64) -> Option<f64> {
        self.locate(x).map(|s| s.i0 as f64 + s.w1)
    }

    /// Index of the node closest to `x` (ties go to the lower index).
    pub fn nearest(&self, x: f64) -> usize {
        let n = self.coords.len();
        let upper = self.coords.partition_point(|&c| c < x);
        if upper == 0 {
            0
        } else if upper >= n {
            n - 1
        } else if (x - self.coords[upper - 1]) <= (self.coords[upper] - x) {
            upper - 1
        } else {
            upper
        }
    }

    /// Half-open index range of nodes with coordinates inside `[lo, hi]`.
    pub fn index_range(&self, lo: f64, hi: f64) -> std::ops::Range<usize> {
        let start = self.coords.partition_point(|&c| c < lo);
        let end = self.coords.partition_point(|&c| c <= hi);
        start..end.max(start)
    }

    pub fn sub(&self, range: std::ops::Range<usize>) -> Result<Self> {
        if range.end > self.len() || range.is_empty() {
            return Err(Error::InvalidRange(format!(
                "{} axis selection {:?} is empty or exceeds length {}",
                self.kind.name(),
                range,
                self.len()
            )));
        }
        Ok(GridAxis {
            kind: self.kind,
            coords: self.coords[range].to_vec(),
        })
    }
}

#[derive(Deserialize)]
struct AxisRepr {
    kind: AxisKind,
    coords: Vec<f64>,
}

impl<'de> Deserialize<'de> for GridAxis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let repr = AxisRepr::deserialize(d)?;
        GridAxis::new(repr.kind, repr.coords).map_err(serde::de::Error::custom)
    }
}

/// How horizontal derivatives and velocities map onto coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    /// Degrees on the sphere with local `R cos(lat)` scaling.
    #[default]
    Spherical,
    /// Coordinates are already lengths; used by synthetic test grids.
    Cartesian,
}

/// The full 4D grid. Its shape is `(T, D, NLat, NLon)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid4D {
    time: GridAxis,
    depth: GridAxis,
    lat: GridAxis,
    lon: GridAxis,
    #[serde(default)]
    metric: Metric,
}

impl Grid4D {
    pub fn new(
        time: GridAxis,
        depth: GridAxis,
        lat: GridAxis,
        lon: GridAxis,
        metric: Metric,
    ) -> Result<Self> {
        let expected = [AxisKind::Time, AxisKind::Depth, AxisKind::Lat, AxisKind::Lon];
        for (axis, kind) in [&time, &depth, &lat, &lon].iter().zip(expected) {
            if axis.kind() != kind {
                return Err(Error::InvalidInput(format!(
                    "expected {} axis, got {}",
                    kind.name(),
                    axis.kind().name()
                )));
            }
        }
        Ok(Grid4D {
            time,
            depth,
            lat,
            lon,
            metric,
        })
    }

    /// Regularly spaced Cartesian grid with unit time steps, handy for synthetic fields.
    pub fn cartesian(
        steps: usize,
        depths: Vec<f64>,
        y: (f64, f64, usize),
        x: (f64, f64, usize),
    ) -> Result<Self> {
        Grid4D::new(
            GridAxis::regular(AxisKind::Time, 0.0, 1.0, steps)?,
            GridAxis::new(AxisKind::Depth, depths)?,
            GridAxis::regular(AxisKind::Lat, y.0, y.1, y.2)?,
            GridAxis::regular(AxisKind::Lon, x.0, x.1, x.2)?,
            Metric::Cartesian,
        )
    }

    pub fn time(&self) -> &GridAxis {
        &self.time
    }
    pub fn depth(&self) -> &GridAxis {
        &self.depth
    }
    pub fn lat(&self) -> &GridAxis {
        &self.lat
    }
    pub fn lon(&self) -> &GridAxis {
        &self.lon
    }
    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn with_metric(mut self, metric: Metric) -> Self {
        self.metric = metric;
        self
    }

    pub fn shape(&self) -> [usize; 4] {
        [self.time.len(), self.depth.len(), self.lat.len(), self.lon.len()]
    }

    /// Shape of one time step: `(D, NLat, NLon)`.
    pub fn volume_shape(&self) -> (usize, usize, usize) {
        (self.depth.len(), self.lat.len(), self.lon.len())
    }

    pub fn subgrid(
        &self,
        time: std::ops::Range<usize>,
        depth: std::ops::Range<usize>,
        lat: std::ops::Range<usize>,
        lon: std::ops::Range<usize>,
    ) -> Result<Self> {
        Grid4D::new(
            self.time.sub(time)?,
            self.depth.sub(depth)?,
            self.lat.sub(lat)?,
            self.lon.sub(lon)?,
            self.metric,
        )
    }

    pub fn with_time(&self, time: GridAxis) -> Result<Self> {
        Grid4D::new(time, self.depth.clone(), self.lat.clone(), self.lon.clone(), self.metric)
    }

    pub fn with_depth(&self, depth: GridAxis) -> Result<Self> {
        Grid4D::new(self.time.clone(), depth, self.lat.clone(), self.lon.clone(), self.metric)
    }
}

/// A 3D scalar field at one time step. NaN marks land.
#[derive(Debug, Clone)]
pub struct ScalarVolume {
    grid: Arc<Grid4D>,
    t: usize,
    values: Array3<f64>,
}

impl ScalarVolume {
    pub fn new(grid: Arc<Grid4D>, t: usize, values: Array3<f64>) -> Result<Self> {
        let [nt, nd, ny, nx] = grid.shape();
        if t >= nt {
            return Err(Error::Bounds {
                what: "time axis",
                index: t,
                len: nt,
            });
        }
        if values.dim() != (nd, ny, nx) {
            return Err(Error::InvalidInput(format!(
                "volume shape {:?} does not match grid ({nd}, {ny}, {nx})",
                values.dim()
            )));
        }
        if values.iter().any(|v| v.is_infinite()) {
            return Err(Error::InvalidInput(
                "scalar volume contains infinite values".into(),
            ));
        }
        Ok(ScalarVolume { grid, t, values })
    }

    /// Builds a volume by evaluating `f(depth, lat, lon)` at every node.
    pub fn from_fn(
        grid: Arc<Grid4D>,
        t: usize,
        f: impl Fn(f64, f64, f64) -> f64,
    ) -> Result<Self> {
        let (nd, ny, nx) = grid.volume_shape();
        let values = Array3::from_shape_fn((nd, ny, nx), |(k, i, j)| {
            f(grid.depth.coords[k], grid.lat.coords[i], grid.lon.coords[j])
        });
        Self::new(grid, t, values)
    }

    pub fn grid(&self) -> &Arc<Grid4D> {
        &self.grid
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn values(&self) -> &Array3<f64> {
        &self.values
    }

    pub fn into_values(self) -> Array3<f64> {
        self.values
    }

    pub fn slice(&self, depth: usize) -> ArrayView2<'_, f64> {
        self.values.index_axis(Axis(0), depth)
    }

    /// `true` where the cell is ocean.
    pub fn ocean_mask(&self) -> Array3<bool> {
        self.values.mapv(|v| !v.is_nan())
    }
}

/// Horizontal (and optionally vertical) velocity at one time step, in m/s.
#[derive(Debug, Clone)]
pub struct VectorVolume {
    u: ScalarVolume,
    v: ScalarVolume,
    w: Option<ScalarVolume>,
}

impl VectorVolume {
    pub fn new(u: ScalarVolume, v: ScalarVolume, w: Option<ScalarVolume>) -> Result<Self> {
        let check = |other: &ScalarVolume, name: &str| -> Result<()> {
            if *other.grid != *u.grid || other.t != u.t {
                return Err(Error::InvalidInput(format!(
                    "velocity component {name} is on a different grid"
                )));
            }
            let same_mask = u
                .values
                .iter()
                .zip(other.values.iter())
                .all(|(a, b)| a.is_nan() == b.is_nan());
            if !same_mask {
                return Err(Error::InvalidInput(format!(
                    "velocity component {name} has a different land mask"
                )));
            }
            Ok(())
        };
        check(&v, "v")?;
        if let Some(w) = &w {
            check(w, "w")?;
        }
        Ok(VectorVolume { u, v, w })
    }

    pub fn u(&self) -> &ScalarVolume {
        &self.u
    }
    pub fn v(&self) -> &ScalarVolume {
        &self.v
    }
    pub fn w(&self) -> Option<&ScalarVolume> {
        self.w.as_ref()
    }
    pub fn grid(&self) -> &Arc<Grid4D> {
        &self.u.grid
    }
    pub fn t(&self) -> usize {
        self.u.t
    }
}

/// Scalar fields derivable from a velocity volume.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum DerivedFieldKind {
    Speed,
    Vorticity,
    CurlMagnitude,
    OkuboWeiss,
    /// A scalar variable already present in the dataset.
    UserScalar(String),
}

impl DerivedFieldKind {
    pub fn parse(name: &str) -> Result<Self> {
        Ok(match name {
            "speed" => DerivedFieldKind::Speed,
            "vorticity" => DerivedFieldKind::Vorticity,
            "curl" | "curlMagnitude" | "curl_magnitude" => DerivedFieldKind::CurlMagnitude,
            "okuboWeiss" | "okubo_weiss" | "okubo-weiss" => DerivedFieldKind::OkuboWeiss,
            other => match other.strip_prefix("user:") {
                Some(var) if !var.is_empty() => DerivedFieldKind::UserScalar(var.to_string()),
                _ => {
                    return Err(Error::InvalidParameter(format!(
                        "unknown derived field '{other}'"
                    )))
                }
            },
        })
    }
}
