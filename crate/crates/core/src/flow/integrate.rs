use std::ops::Range;
use std::sync::Arc;
use std::time::Instant;

use ndarray::ArrayView2;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Direction, IntegrationParams, Point, Polyline};
use crate::grid::{bilinear, trilinear, Grid4D, Metric, Stencil, VectorVolume, EARTH_RADIUS_M};
use crate::io::Dataset;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum StopReason {
    MaxSteps,
    LeftDomain,
    Land,
    Slow,
    EndOfTime,
    /// A caller-supplied predicate ended the trace.
    Halted,
}

pub(crate) type Vec2 = (f64, f64);

fn axpy(x: Vec2, h: f64, k: Vec2) -> Vec2 {
    (x.0 + h * k.0, x.1 + h * k.1)
}

/// Classic fourth-order Runge-Kutta step of `x' = f(s, x)`.
fn rk4<F>(f: &F, s: f64, x: Vec2, h: f64) -> Result<Vec2, StopReason>
where
    F: Fn(f64, Vec2) -> Result<Vec2, StopReason>,
{
    let k1 = f(s, x)?;
    let k2 = f(s + 0.5 * h, axpy(x, 0.5 * h, k1))?;
    let k3 = f(s + 0.5 * h, axpy(x, 0.5 * h, k2))?;
    let k4 = f(s + h, axpy(x, h, k3))?;
    Ok((
        x.0 + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        x.1 + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
    ))
}

/// Horizontal velocity (m/s) at `(lon, lat)` on one depth slice.
fn sample_slice(grid: &Grid4D, u: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>, x: Vec2) -> Result<Vec2, StopReason> {
    let (Some(sy), Some(sx)) = (grid.lat().locate(x.1), grid.lon().locate(x.0)) else {
        return Err(StopReason::LeftDomain);
    };
    let uu = bilinear(u, sy, sx);
    let vv = bilinear(v, sy, sx);
    if uu.is_nan() || vv.is_nan() {
        return Err(StopReason::Land);
    }
    Ok((uu, vv))
}

/// Unit tangent in coordinate space: degrees per unit arc length on the
/// sphere, plain direction on Cartesian grids.
fn unit_tangent(metric: Metric, lat: f64, (u, v): Vec2) -> Result<Vec2, StopReason> {
    let s = u.hypot(v);
    if s == 0.0 {
        return Err(StopReason::Slow);
    }
    Ok(match metric {
        Metric::Cartesian => (u / s, v / s),
        Metric::Spherical => (u / s / lat.to_radians().cos(), v / s),
    })
}

/// Traces the normalised horizontal field on depth level `k`. `halt` sees
/// every accepted point and ends the trace by returning true.
pub(crate) fn trace_slice(
    vel: &VectorVolume,
    k: usize,
    start: Vec2,
    params: &IntegrationParams,
    sign: f64,
    halt: &mut dyn FnMut(Vec2) -> bool,
) -> (Vec<Vec2>, Vec<f64>, StopReason) {
    let grid = vel.grid();
    let (u, v) = (vel.u().slice(k), vel.v().slice(k));
    let field = |_: f64, x: Vec2| {
        let uv = sample_slice(grid, u, v, x)?;
        let t = unit_tangent(grid.metric(), x.1, uv)?;
        Ok((sign * t.0, sign * t.1))
    };
    let mut x = start;
    let mut speed = match sample_slice(grid, u, v, x) {
        Ok(uv) => uv.0.hypot(uv.1),
        Err(reason) => return (vec![x], vec![f64::NAN], reason),
    };
    let mut points = vec![x];
    let mut speeds = vec![speed];
    for _ in 0..params.max_steps {
        if speed < params.termination_speed || speed == 0.0 {
            return (points, speeds, StopReason::Slow);
        }
        let next = match rk4(&field, 0.0, x, params.step_size) {
            Ok(n) => n,
            Err(reason) => return (points, speeds, reason),
        };
        match sample_slice(grid, u, v, next) {
            Ok(uv) => speed = uv.0.hypot(uv.1),
            Err(reason) => return (points, speeds, reason),
        }
        x = next;
        points.push(x);
        speeds.push(speed);
        if halt(x) {
            return (points, speeds, StopReason::Halted);
        }
    }
    (points, speeds, StopReason::MaxSteps)
}

/// RK4 streamline of the horizontal field on the depth level nearest the seed.
pub fn streamline(vel: &VectorVolume, seed: Point, params: &IntegrationParams, seed_index: usize) -> Result<Polyline> {
    params.validate()?;
    let grid = vel.grid();
    let k = grid.depth().nearest(seed.depth);
    let depth = grid.depth().coords()[k];
    let start = (seed.lon, seed.lat);
    match sample_slice(grid, vel.u().slice(k), vel.v().slice(k), start) {
        Err(StopReason::LeftDomain) => {
            return Err(Error::OutOfDomain(format!(
                "seed ({}, {}) is outside the grid",
                seed.lon, seed.lat
            )))
        }
        Err(_) => {
            return Err(Error::InvalidSeed(format!(
                "seed ({}, {}, {}) is on land",
                seed.lon, seed.lat, seed.depth
            )))
        }
        Ok(_) => {}
    }
    let (points, speeds, stop) = match params.direction {
        Direction::Forward => trace_slice(vel, k, start, params, 1.0, &mut |_| false),
        Direction::Backward => trace_slice(vel, k, start, params, -1.0, &mut |_| false),
        Direction::Both => {
            let (mut bp, mut bs, _) = trace_slice(vel, k, start, params, -1.0, &mut |_| false);
            let (fp, fs, stop) = trace_slice(vel, k, start, params, 1.0, &mut |_| false);
            bp.reverse();
            bs.reverse();
            bp.pop();
            bs.pop();
            bp.extend(fp);
            bs.extend(fs);
            (bp, bs, stop)
        }
    };
    Ok(Polyline {
        seed_index,
        points: points.into_iter().map(|(lon, lat)| Point { lon, lat, depth }).collect(),
        times: None,
        speeds,
        stop,
    })
}

/// Streamlines for many seeds, one task per seed, in seed order. Seeds that
/// are on land or outside the grid are skipped with a warning.
pub fn streamlines(vel: &VectorVolume, seeds: &[Point], params: &IntegrationParams) -> Result<Vec<Polyline>> {
    params.validate()?;
    let lines: Vec<Option<Polyline>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| match streamline(vel, s, params, i) {
            Ok(l) => Some(l),
            Err(e) => {
                log::warn!("skipping seed {i}: {e}");
                None
            }
        })
        .collect();
    Ok(lines.into_iter().flatten().collect())
}

/// Velocity steps held in memory for pathline integration.
#[derive(Debug, Clone)]
pub struct PathlineSeries {
    grid: Arc<Grid4D>,
    times: Vec<f64>,
    steps: Vec<VectorVolume>,
}

impl PathlineSeries {
    /// `steps` must share one grid and be consecutive time indices.
    pub fn new(steps: Vec<VectorVolume>) -> Result<Self> {
        if steps.len() < 2 {
            return Err(Error::InvalidRange(format!(
                "pathlines need at least 2 time steps, got {}",
                steps.len()
            )));
        }
        let grid = steps[0].grid().clone();
        if steps.iter().any(|s| **s.grid() != *grid) {
            return Err(Error::InvalidInput("velocity steps are on different grids".into()));
        }
        let times = steps.iter().map(|s| grid.time().coords()[s.t()]).collect::<Vec<_>>();
        if times.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput("velocity steps are not in time order".into()));
        }
        Ok(PathlineSeries { grid, times, steps })
    }

    pub fn grid(&self) -> &Arc<Grid4D> {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// Velocity in m/s at `(lon, lat)` and time `t`, linear in time.
    fn sample(&self, depth: Stencil, x: Vec2, t: f64) -> Result<Vec2, StopReason> {
        let n = self.times.len();
        if !(t >= self.times[0] && t <= self.times[n - 1]) {
            return Err(StopReason::EndOfTime);
        }
        let (Some(sy), Some(sx)) = (self.grid.lat().locate(x.1), self.grid.lon().locate(x.0)) else {
            return Err(StopReason::LeftDomain);
        };
        let upper = self.times.partition_point(|&c| c <= t);
        let i0 = upper.saturating_sub(1).min(n - 2);
        let a = (t - self.times[i0]) / (self.times[i0 + 1] - self.times[i0]);
        let at = |i: usize| -> Result<Vec2, StopReason> {
            let s = &self.steps[i];
            let u = trilinear(s.u().values().view(), depth, sy, sx);
            let v = trilinear(s.v().values().view(), depth, sy, sx);
            if u.is_nan() || v.is_nan() {
                Err(StopReason::Land)
            } else {
                Ok((u, v))
            }
        };
        if a == 0.0 {
            return at(i0);
        }
        if a == 1.0 {
            return at(i0 + 1);
        }
        let (f0, f1) = (at(i0)?, at(i0 + 1)?);
        Ok((f0.0 + a * (f1.0 - f0.0), f0.1 + a * (f1.1 - f0.1)))
    }

    /// Position rate of change per time unit. Spherical grids convert m/s to
    /// degrees per day; Cartesian grids use the velocity as is.
    fn rate(&self, lat: f64, (u, v): Vec2) -> Vec2 {
        match self.grid.metric() {
            Metric::Cartesian => (u, v),
            Metric::Spherical => {
                let k = 86_400.0 / EARTH_RADIUS_M * 180.0 / std::f64::consts::PI;
                (u * k / lat.to_radians().cos(), v * k)
            }
        }
    }

    fn trace(&self, seed: Point, params: &IntegrationParams, seed_index: usize) -> Result<Polyline> {
        let depth = self.grid.depth().locate(seed.depth).ok_or_else(|| {
            Error::OutOfDomain(format!("seed depth {} is outside the grid", seed.depth))
        })?;
        let (sign, t_start, t_end) = match params.direction {
            Direction::Forward => (1.0, self.times[0], *self.times.last().unwrap()),
            Direction::Backward => (-1.0, *self.times.last().unwrap(), self.times[0]),
            Direction::Both => {
                return Err(Error::InvalidParameter(
                    "pathlines integrate forward or backward in time, not both".into(),
                ))
            }
        };
        let mut x = (seed.lon, seed.lat);
        let mut uv = match self.sample(depth, x, t_start) {
            Ok(uv) => uv,
            Err(StopReason::LeftDomain) => {
                return Err(Error::OutOfDomain(format!("seed ({}, {}) is outside the grid", x.0, x.1)))
            }
            Err(_) => return Err(Error::InvalidSeed(format!("seed ({}, {}) is on land", x.0, x.1))),
        };
        let field = |t: f64, x: Vec2| -> Result<Vec2, StopReason> {
            let uv = self.sample(depth, x, t)?;
            Ok(self.rate(x.1, uv))
        };
        let mut t = t_start;
        let mut points = vec![x];
        let mut times = vec![t];
        let mut speeds = vec![uv.0.hypot(uv.1)];
        let mut stop = StopReason::MaxSteps;
        for _ in 0..params.max_steps {
            let remaining = (t_end - t) * sign;
            if remaining <= 0.0 {
                stop = StopReason::EndOfTime;
                break;
            }
            // No speed cut-off here: in a time-varying field a momentarily
            // stationary particle moves on once the flow picks up again.
            let h = sign * params.step_size.min(remaining);
            let next = match rk4(&field, t, x, h) {
                Ok(n) => n,
                Err(reason) => {
                    stop = reason;
                    break;
                }
            };
            let t_next = if params.step_size >= remaining { t_end } else { t + h };
            match self.sample(depth, next, t_next) {
                Ok(s) => uv = s,
                Err(reason) => {
                    stop = reason;
                    break;
                }
            }
            x = next;
            t = t_next;
            points.push(x);
            times.push(t);
            speeds.push(uv.0.hypot(uv.1));
        }
        Ok(Polyline {
            seed_index,
            points: points
                .into_iter()
                .map(|(lon, lat)| Point { lon, lat, depth: seed.depth })
                .collect(),
            times: Some(times),
            speeds,
            stop,
        })
    }
}

/// Loads `u` and `v` for every step of `time_range` before any integration.
pub fn preload_velocity(dataset: &Dataset, u: &str, v: &str, time_range: Range<usize>) -> Result<PathlineSeries> {
    if time_range.len() < 2 {
        return Err(Error::InvalidRange(format!(
            "pathlines need at least 2 time steps, got {time_range:?}"
        )));
    }
    let steps = time_range
        .into_par_iter()
        .map(|t| dataset.load_velocity(t, u, v, None))
        .collect::<Result<Vec<_>>>()?;
    PathlineSeries::new(steps)
}

/// Pathlines for every seed, in seed order. Seeds that are on land or outside
/// the grid are skipped with a warning.
pub fn pathlines(series: &PathlineSeries, seeds: &[Point], params: &IntegrationParams) -> Result<Vec<Polyline>> {
    params.validate()?;
    if params.direction == Direction::Both {
        return Err(Error::InvalidParameter(
            "pathlines integrate forward or backward in time, not both".into(),
        ));
    }
    let started = Instant::now();
    let lines: Vec<Option<Polyline>> = seeds
        .par_iter()
        .enumerate()
        .map(|(i, &s)| match series.trace(s, params, i) {
            Ok(l) => Some(l),
            Err(e) => {
                log::warn!("skipping seed {i}: {e}");
                None
            }
        })
        .collect();
    log::info!(
        "pathlines: {} seeds over {} steps in {:.3} s",
        seeds.len(),
        series.times.len(),
        started.elapsed().as_secs_f64()
    );
    Ok(lines.into_iter().flatten().collect())
}
