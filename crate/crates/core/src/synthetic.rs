//! Synthetic ocean data: a parameterised benchmark dataset (translating
//! salinity blobs over drifting vortices) and small analytic velocity fields.

use std::sync::Arc;

use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::grid::{AxisKind, Grid4D, GridAxis, Metric, ScalarVolume, VectorVolume};
use crate::io::{Dataset, FnSource, MemorySource};
use crate::{Error, Result};

/// Variables produced by [`synthetic_dataset`].
pub const VARIABLES: [&str; 4] = ["salinity", "temperature", "u", "v"];

/// A lon/lat box sampled at `ny × nx` nodes, `depths` levels down to
/// `max_depth` metres, and `steps` daily time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct SyntheticSpec {
    pub steps: usize,
    pub depths: usize,
    pub ny: usize,
    pub nx: usize,
    pub max_depth: f64,
    pub lon0: f64,
    pub lat0: f64,
    /// Side of the (square) box in degrees.
    pub extent: f64,
    pub blobs: usize,
    pub vortices: usize,
    /// Mask a coastal corner as land.
    pub land: bool,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            steps: 6,
            depths: 32,
            ny: 32,
            nx: 32,
            max_depth: 200.0,
            lon0: 86.0,
            lat0: 14.0,
            extent: 32.0 / 12.0,
            blobs: 3,
            vortices: 2,
            land: true,
            seed: 7,
        }
    }
}

impl SyntheticSpec {
    /// The 32 × 32 × 32 × 6 fixture.
    pub fn standard() -> Self {
        Self::default()
    }

    /// Same box with `scale` times as many horizontal nodes. `scale` must be
    /// a power of 4 so both sides grow by the same integer factor.
    pub fn scaled(&self, scale: usize) -> Result<Self> {
        let f = (scale as f64).sqrt().round() as usize;
        if scale == 0 || f * f != scale {
            return Err(Error::InvalidParameter(format!("data scale {scale} is not a perfect square")));
        }
        Ok(SyntheticSpec {
            ny: self.ny * f,
            nx: self.nx * f,
            ..self.clone()
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps == 0 || self.depths == 0 || self.ny < 2 || self.nx < 2 {
            return Err(Error::InvalidParameter(format!(
                "synthetic grid needs steps, depths ≥ 1 and ny, nx ≥ 2, got {self:?}"
            )));
        }
        if !(self.max_depth > 0.0 && self.extent > 0.0) {
            return Err(Error::InvalidParameter("max depth and extent must be positive".into()));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid4D> {
        self.validate()?;
        let dz = self.max_depth / self.depths as f64;
        Grid4D::new(
            GridAxis::regular(AxisKind::Time, 0.0, 1.0, self.steps)?,
            GridAxis::new(AxisKind::Depth, (1..=self.depths).map(|k| k as f64 * dz).collect())?,
            GridAxis::regular(AxisKind::Lat, self.lat0, self.extent / (self.ny - 1) as f64, self.ny)?,
            GridAxis::regular(AxisKind::Lon, self.lon0, self.extent / (self.nx - 1) as f64, self.nx)?,
            Metric::Spherical,
        )
    }

    /// Voxel count of one variable over all steps.
    pub fn voxels(&self) -> usize {
        self.steps * self.depths * self.ny * self.nx
    }
}

/// Positions and sizes as fractions of the box; drifts per time step.
#[derive(Debug, Clone, Copy)]
struct Feature {
    x: f64,
    y: f64,
    dx: f64,
    dy: f64,
    radius: f64,
    depth_scale: f64,
    strength: f64,
}

#[derive(Debug, Clone)]
struct Model {
    spec: SyntheticSpec,
    blobs: Vec<Feature>,
    vortices: Vec<Feature>,
}

impl Model {
    fn new(spec: &SyntheticSpec) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let blobs = (0..spec.blobs)
            .map(|_| Feature {
                x: rng.gen_range(0.15..0.6),
                y: rng.gen_range(0.1..0.5),
                dx: rng.gen_range(0.01..0.04),
                dy: rng.gen_range(0.02..0.05),
                radius: rng.gen_range(0.08..0.14),
                depth_scale: rng.gen_range(0.3..0.7),
                strength: rng.gen_range(1.6..2.2),
            })
            .collect();
        let mut vortices: Vec<Feature> = (0..spec.vortices)
            .map(|n| Feature {
                x: rng.gen_range(0.3..0.7),
                y: rng.gen_range(0.3..0.7),
                dx: rng.gen_range(-0.01..0.01),
                dy: rng.gen_range(-0.01..0.01),
                radius: rng.gen_range(0.06..0.09),
                depth_scale: rng.gen_range(0.6..1.2),
                strength: if n % 2 == 0 { 0.5 } else { -0.4 },
            })
            .collect();
        // Keep vortex cores apart so each has its own basin.
        for n in 1..vortices.len() {
            let shift = n as f64 * 0.45;
            vortices[n].x = (vortices[0].x + shift) % 0.8 + 0.1;
            vortices[n].y = (vortices[0].y + 0.5 * shift) % 0.8 + 0.1;
        }
        Model {
            spec: spec.clone(),
            blobs,
            vortices,
        }
    }

    fn is_land(&self, fx: f64, fy: f64, fz: f64) -> bool {
        // A sloping coast in the north-west corner.
        self.spec.land && fx < 0.12 + 0.1 * fz && fy > 0.8 - 0.1 * fz
    }

    fn salinity(&self, t: f64, fx: f64, fy: f64, fz: f64) -> f64 {
        let mut s = 33.6 + 0.8 * fz;
        for b in &self.blobs {
            let (cx, cy) = (b.x + b.dx * t, b.y + b.dy * t);
            let r2 = ((fx - cx).powi(2) + (fy - cy).powi(2)) / (b.radius * b.radius);
            s += b.strength * (-r2 - (fz / b.depth_scale).powi(2)).exp();
        }
        s
    }

    fn temperature(&self, t: f64, fx: f64, fy: f64, fz: f64) -> f64 {
        29.0 - 14.0 * fz + 0.3 * (6.0 * fx + 0.2 * t).sin() * (4.0 * fy).cos()
    }

    /// Sum of Lamb-Oseen vortices in a box-fraction frame; m/s.
    fn velocity(&self, t: f64, fx: f64, fy: f64, fz: f64) -> (f64, f64) {
        let (mut u, mut v) = (0.0, 0.0);
        for w in &self.vortices {
            let (dx, dy) = (fx - (w.x + w.dx * t), fy - (w.y + w.dy * t));
            let r = dx.hypot(dy);
            if r == 0.0 {
                continue;
            }
            let vt = lamb_oseen_speed(r, w.radius, w.strength) * (-fz / w.depth_scale).exp();
            u -= vt * dy / r;
            v += vt * dx / r;
        }
        (u, v)
    }

    fn field(&self, t: usize, variable: &str, grid: &Grid4D) -> Result<Array3<f64>> {
        let tt = t as f64;
        let (nd, ny, nx) = grid.volume_shape();
        let frac = |i: usize, n: usize| if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
        let kind = VARIABLES
            .iter()
            .position(|v| *v == variable)
            .ok_or_else(|| Error::NotFound(format!("variable '{variable}'")))?;
        Ok(Array3::from_shape_fn((nd, ny, nx), |(k, i, j)| {
            let (fz, fy, fx) = ((k + 1) as f64 / nd as f64, frac(i, ny), frac(j, nx));
            if self.is_land(fx, fy, fz) {
                return f64::NAN;
            }
            match kind {
                0 => self.salinity(tt, fx, fy, fz),
                1 => self.temperature(tt, fx, fy, fz),
                2 => self.velocity(tt, fx, fy, fz).0,
                _ => self.velocity(tt, fx, fy, fz).1,
            }
        }))
    }
}

/// Tangential speed of a Lamb-Oseen vortex with core radius `rc` whose peak
/// speed (reached at r ≈ 1.121 rc) is `peak`.
pub fn lamb_oseen_speed(r: f64, rc: f64, peak: f64) -> f64 {
    // max over r of (1 - exp(-x²)) / x, attained at x ≈ 1.1209.
    const PEAK_FACTOR: f64 = 0.638_172_686_338_951_5;
    if r == 0.0 {
        return 0.0;
    }
    let x = r / rc;
    peak / PEAK_FACTOR * (1.0 - (-x * x).exp()) / x
}

/// The benchmark dataset, generated on demand per (step, variable).
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<Dataset> {
    let grid = spec.grid()?;
    let model = Model::new(spec);
    Ok(Dataset::new(FnSource::new(
        grid,
        VARIABLES.iter().map(|s| s.to_string()).collect(),
        move |t, var, g| model.field(t, var, g),
    )))
}

/// The benchmark dataset fully materialised in memory.
pub fn synthetic_dataset_in_memory(spec: &SyntheticSpec) -> Result<Dataset> {
    let grid = spec.grid()?;
    let model = Model::new(spec);
    let mut src = MemorySource::new(grid.clone());
    for var in VARIABLES {
        let steps = (0..spec.steps)
            .map(|t| model.field(t, var, &grid))
            .collect::<Result<Vec<_>>>()?;
        src = src.with_variable(var, steps)?;
    }
    Ok(Dataset::new(src))
}

/// Velocity on a unit-spaced Cartesian `n × n` grid with the given depths,
/// from `f(x, y, depth) -> (u, v)`.
pub fn cartesian_velocity(n: usize, depths: Vec<f64>, f: impl Fn(f64, f64, f64) -> (f64, f64)) -> Result<VectorVolume> {
    let g = Arc::new(Grid4D::cartesian(1, depths, (0.0, 1.0, n), (0.0, 1.0, n))?);
    let u = ScalarVolume::from_fn(g.clone(), 0, |d, y, x| f(x, y, d).0)?;
    let v = ScalarVolume::from_fn(g, 0, |d, y, x| f(x, y, d).1)?;
    VectorVolume::new(u, v, None)
}

/// Lamb-Oseen vortex centred at `(cx, cy)`; `sign` +1 is anticlockwise.
pub fn lamb_oseen(n: usize, (cx, cy): (f64, f64), core_radius: f64, peak: f64, sign: f64) -> Result<VectorVolume> {
    cartesian_velocity(n, vec![0.0], |x, y, _| {
        let (dx, dy) = (x - cx, y - cy);
        let r = dx.hypot(dy);
        if r == 0.0 {
            return (0.0, 0.0);
        }
        let vt = sign * lamb_oseen_speed(r, core_radius, peak);
        (-vt * dy / r, vt * dx / r)
    })
}

/// Solid-body core of radius `radius` and angular velocity `omega` in still
/// water: the closed streamlines end exactly at the core edge.
pub fn rankine_core(n: usize, (cx, cy): (f64, f64), radius: f64, omega: f64) -> Result<VectorVolume> {
    cartesian_velocity(n, vec![0.0], |x, y, _| {
        let (dx, dy) = (x - cx, y - cy);
        if dx.hypot(dy) <= radius {
            (-omega * dy, omega * dx)
        } else {
            (0.0, 0.0)
        }
    })
}

/// u = −ω(y − c), v = ω(x − c) about the grid centre.
pub fn solid_body(n: usize, omega: f64) -> Result<VectorVolume> {
    let c = (n as f64 - 1.0) / 2.0;
    cartesian_velocity(n, vec![0.0], |x, y, _| (-omega * (y - c), omega * (x - c)))
}

/// u = x − c, v = −(y − c).
pub fn pure_strain(n: usize) -> Result<VectorVolume> {
    let c = (n as f64 - 1.0) / 2.0;
    cartesian_velocity(n, vec![0.0], |x, y, _| (x - c, -(y - c)))
}

/// u = y − c, v = 0.
pub fn pure_shear(n: usize) -> Result<VectorVolume> {
    let c = (n as f64 - 1.0) / 2.0;
    cartesian_velocity(n, vec![0.0], |_, y, _| (y - c, 0.0))
}

pub fn uniform_flow(n: usize, u: f64, v: f64) -> Result<VectorVolume> {
    cartesian_velocity(n, vec![0.0], |_, _, _| (u, v))
}

/// Two days of salinity on a 0.25° box around 17.5°N, 88.5°E with 20 m
/// levels to 500 m. On the second day a fresh filament crosses the box
/// through that point, confined to the top 200 m.
pub fn filament_dataset() -> Result<Dataset> {
    let grid = Grid4D::new(
        GridAxis::regular(AxisKind::Time, 0.0, 1.0, 2)?,
        GridAxis::new(AxisKind::Depth, (0..26).map(|k| k as f64 * 20.0).collect())?,
        GridAxis::regular(AxisKind::Lat, 15.0, 0.25, 21)?,
        GridAxis::regular(AxisKind::Lon, 86.0, 0.25, 21)?,
        Metric::Spherical,
    )?;
    let field = |t: usize, g: &Grid4D| {
        Array3::from_shape_fn(g.volume_shape(), |(k, i, j)| {
            let (z, lat, lon) = (g.depth().coords()[k], g.lat().coords()[i], g.lon().coords()[j]);
            let mut s = 33.5 + 1.5 * (1.0 - (-z / 150.0).exp());
            if t == 1 && z <= 200.0 {
                // Band 0.5° wide along lat − 17.5 = 0.8 (lon − 88.5).
                let d = (lat - 17.5 - 0.8 * (lon - 88.5)).abs();
                s -= 1.2 * (-(d / 0.25).powi(2)).exp() * (1.0 - z / 200.0).max(0.0).sqrt();
            }
            s
        })
    };
    let steps = vec![field(0, &grid), field(1, &grid)];
    Ok(Dataset::new(MemorySource::new(grid).with_variable("salinity", steps)?))
}
