//! Winding checks around a candidate centre and the radial boundary search.

use std::f64::consts::{FRAC_PI_2, PI, TAU};

use serde::Serialize;

use super::EddyParams;
use crate::flow::{trace_slice, Direction, IntegrationParams, Point, Polyline, StopReason, Vec2};
use crate::grid::{Grid4D, Metric, VectorVolume, EARTH_RADIUS_M};
use crate::{Error, Result};

/// Compass names of the radial axes, anticlockwise from east.
pub const AXES: [&str; 8] = ["E", "NE", "N", "NW", "W", "SW", "S", "SE"];

/// Local tangent-plane frame around a centre: x east, y north, both in
/// degrees of arc on spherical grids and coordinate units otherwise.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Frame {
    lon0: f64,
    lat0: f64,
    coslat: f64,
    /// Voxel size along x and y in frame units.
    hx: f64,
    hy: f64,
    metric: Metric,
}

impl Frame {
    pub(crate) fn new(grid: &Grid4D, (lon0, lat0): Vec2) -> Result<Self> {
        let (Some(fi), Some(fj)) = (grid.lat().fractional_index(lat0), grid.lon().fractional_index(lon0)) else {
            return Err(Error::OutOfDomain(format!("centre ({lon0}, {lat0}) is outside the grid")));
        };
        let spacing = |c: &[f64], f: f64| {
            if c.len() < 2 {
                return f64::NAN;
            }
            let i = (f.floor() as usize).min(c.len() - 2);
            c[i + 1] - c[i]
        };
        let coslat = match grid.metric() {
            Metric::Spherical => lat0.to_radians().cos(),
            Metric::Cartesian => 1.0,
        };
        let hx = spacing(grid.lon().coords(), fj) * coslat;
        let hy = spacing(grid.lat().coords(), fi);
        if !(hx > 0.0 && hy > 0.0) {
            return Err(Error::InvalidInput("eddy detection needs at least 2×2 horizontal nodes".into()));
        }
        Ok(Frame {
            lon0,
            lat0,
            coslat,
            hx,
            hy,
            metric: grid.metric(),
        })
    }

    fn local(&self, (lon, lat): Vec2) -> Vec2 {
        ((lon - self.lon0) * self.coslat, lat - self.lat0)
    }

    fn global(&self, (x, y): Vec2) -> Vec2 {
        (self.lon0 + x / self.coslat, self.lat0 + y)
    }

    /// Frame offset of `r` voxels along compass axis `a`.
    fn axis_offset(&self, a: usize, r: f64) -> Vec2 {
        let theta = a as f64 * PI / 4.0;
        (r * theta.cos() * self.hx, r * theta.sin() * self.hy)
    }

    /// Frame length in metres (spherical) or coordinate units.
    fn metres(&self, d: f64) -> f64 {
        match self.metric {
            Metric::Spherical => d.to_radians() * EARTH_RADIUS_M,
            Metric::Cartesian => d,
        }
    }
}

/// One traced orbit around a centre.
#[derive(Debug, Clone)]
pub(crate) struct Orbit {
    pub polyline: Polyline,
    /// Accumulated signed angle of the position vector, anticlockwise positive.
    pub winding: f64,
    pub quadrants: u8,
    /// Distance between the last and first point in frame units.
    pub gap: f64,
    /// Seed distance from the centre in frame units.
    pub seed_radius: f64,
}

impl Orbit {
    pub fn all_quadrants(&self) -> bool {
        self.quadrants == 0b1111
    }

    fn closes(&self, closure_fraction: f64) -> bool {
        self.winding.abs() >= TAU && self.gap <= closure_fraction * self.seed_radius
    }
}

fn quadrant((x, y): Vec2) -> u8 {
    match (x >= 0.0, y >= 0.0) {
        (true, true) => 1,
        (false, true) => 2,
        (false, false) => 4,
        (true, false) => 8,
    }
}

/// Quadrants swept by a chord that starts at angle `from` and turns by `d`
/// (|d| < π) around the centre. A chord passing close to the centre can
/// cross a quadrant without a vertex landing in it.
fn swept_quadrants(from: f64, d: f64) -> u8 {
    let (lo, hi) = if d >= 0.0 { (from, from + d) } else { (from + d, from) };
    let first = (lo / FRAC_PI_2).floor() as i64;
    let last = (hi / FRAC_PI_2).floor() as i64;
    (first..=last).fold(0, |m, q| m | 1 << q.rem_euclid(4))
}

/// Traces the streamline seeded at `offset` from the centre until it has
/// wound a full turn or the step budget is spent.
fn orbit(vel: &VectorVolume, k: usize, frame: &Frame, offset: Vec2, params: &EddyParams) -> Orbit {
    let seed_radius = offset.0.hypot(offset.1);
    let step = params.step_voxels * frame.hx.min(frame.hy);
    let budget = (params.max_turns * TAU * seed_radius / step).ceil() as usize + 16;
    let ip = IntegrationParams {
        step_size: step,
        max_steps: budget,
        direction: Direction::Forward,
        termination_speed: params.termination_speed,
    };
    let start = frame.global(offset);
    let mut winding = 0.0;
    let mut quadrants = quadrant(offset);
    let mut prev_angle = offset.1.atan2(offset.0);
    let mut halt = |p: Vec2| {
        let q = frame.local(p);
        let a = q.1.atan2(q.0);
        let mut d = a - prev_angle;
        if d > PI {
            d -= TAU;
        } else if d < -PI {
            d += TAU;
        }
        quadrants |= swept_quadrants(prev_angle, d);
        winding += d;
        prev_angle = a;
        winding.abs() >= TAU
    };
    let (points, speeds, stop) = trace_slice(vel, k, start, &ip, 1.0, &mut halt);
    let last = frame.local(*points.last().unwrap_or(&start));
    let depth = vel.grid().depth().coords()[k];
    Orbit {
        polyline: Polyline {
            seed_index: 0,
            points: points.into_iter().map(|(lon, lat)| Point { lon, lat, depth }).collect(),
            times: None,
            speeds,
            stop,
        },
        winding,
        quadrants,
        gap: (last.0 - offset.0).hypot(last.1 - offset.1),
        seed_radius,
    }
}

/// Outcome of the four-quadrant check around a candidate centre.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct WindingOutcome {
    pub pass: bool,
    pub winding_angle: f64,
    pub quadrants_visited: u32,
    pub stop: StopReason,
    #[serde(skip)]
    pub streamline: Polyline,
}

fn check_level(vel: &VectorVolume, k: usize) -> Result<()> {
    let nd = vel.grid().depth().len();
    if k >= nd {
        return Err(Error::Bounds {
            what: "depth level",
            index: k,
            len: nd,
        });
    }
    Ok(())
}

/// Seeds a streamline one voxel east of `center` (lon, lat) on depth level
/// `k`. Passes iff the streamline visits all four quadrants around the centre.
pub fn winding_test(vel: &VectorVolume, k: usize, center: Vec2, params: &EddyParams) -> Result<WindingOutcome> {
    check_level(vel, k)?;
    params.validate()?;
    let frame = Frame::new(vel.grid(), center)?;
    let o = orbit(vel, k, &frame, (frame.hx, 0.0), params);
    Ok(WindingOutcome {
        pass: o.all_quadrants(),
        winding_angle: o.winding,
        quadrants_visited: o.quadrants.count_ones(),
        stop: o.polyline.stop,
        streamline: o.polyline,
    })
}

/// Boundary radii along the eight compass axes plus the accepted streamlines.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary {
    /// Metres (spherical) or coordinate units; `None` where no radius passed.
    pub radii: [Option<f64>; 8],
    /// The same radii in voxels.
    pub radii_voxels: [Option<f64>; 8],
    /// Largest radius searched, in voxels.
    pub r_max: f64,
    /// Number of streamlines traced per axis.
    pub probes: [usize; 8],
    /// Accepted boundary streamlines in axis order.
    pub streamlines: Vec<Polyline>,
}

/// Largest radius (voxels) whose circle around the centre stays inside the
/// grid, less half a voxel so the integrator's stages stay in bounds.
fn inscribed_radius(grid: &Grid4D, center: Vec2) -> f64 {
    let fi = grid.lat().fractional_index(center.1).unwrap_or(0.0);
    let fj = grid.lon().fractional_index(center.0).unwrap_or(0.0);
    let ny = grid.lat().len() as f64 - 1.0;
    let nx = grid.lon().len() as f64 - 1.0;
    fi.min(ny - fi).min(fj).min(nx - fj) - 0.5
}

/// Binary search over seed radii `1, 1.5, 2, …, rMax` voxels on each axis for
/// the largest radius whose streamline winds a full turn and closes within
/// `closureFraction` of its seed radius. Assumes the predicate is monotone
/// (passing up to some radius, failing beyond).
pub fn eddy_boundary(vel: &VectorVolume, k: usize, center: Vec2, params: &EddyParams) -> Result<Boundary> {
    check_level(vel, k)?;
    params.validate()?;
    let grid = vel.grid();
    let frame = Frame::new(grid, center)?;
    let mut r_max = inscribed_radius(grid, center);
    if let Some(cap) = params.max_radius_voxels {
        r_max = r_max.min(cap);
    }
    let mut out = Boundary {
        radii: [None; 8],
        radii_voxels: [None; 8],
        r_max,
        probes: [0; 8],
        streamlines: Vec::new(),
    };
    if r_max < 1.0 {
        return Err(Error::DegenerateEddy(format!(
            "centre ({}, {}) is too close to the grid edge",
            center.0, center.1
        )));
    }
    let candidates = ((r_max - 1.0) / 0.5).floor() as usize + 1;
    let radius = |i: usize| 1.0 + 0.5 * i as f64;
    for a in 0..8 {
        // Everything below `lo` passes, everything from `hi` on fails.
        let (mut lo, mut hi) = (0usize, candidates);
        let mut best: Option<Orbit> = None;
        while lo < hi {
            let mid = (lo + hi) / 2;
            let o = orbit(vel, k, &frame, frame.axis_offset(a, radius(mid)), params);
            out.probes[a] += 1;
            if o.closes(params.closure_fraction) {
                lo = mid + 1;
                best = Some(o);
            } else {
                hi = mid;
            }
        }
        if let Some(mut o) = best {
            out.radii[a] = Some(frame.metres(o.seed_radius));
            out.radii_voxels[a] = Some(radius(lo - 1));
            o.polyline.seed_index = a;
            out.streamlines.push(o.polyline);
        }
    }
    if out.radii.iter().all(Option::is_none) {
        return Err(Error::DegenerateEddy(format!(
            "no closed streamline around ({}, {}) on any axis",
            center.0, center.1
        )));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::ScalarVolume;

    #[test]
    fn chords_near_the_centre_sweep_quadrants() {
        // From just above the +x axis, turning almost half a turn
        // anticlockwise crosses into the second quadrant.
        assert_eq!(swept_quadrants(0.1, 3.0), 0b0011);
        assert_eq!(swept_quadrants(0.1, -3.0), 0b1101);
        assert_eq!(swept_quadrants(0.2, 0.1), 0b0001);
        assert_eq!(swept_quadrants(2.9, 0.5), 0b0110);
    }

    fn field(n: usize, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> VectorVolume {
        let g = Arc::new(Grid4D::cartesian(1, vec![0.0], (0.0, 1.0, n), (0.0, 1.0, n)).unwrap());
        let u = ScalarVolume::from_fn(g.clone(), 0, |_, y, x| fu(x, y)).unwrap();
        let v = ScalarVolume::from_fn(g, 0, |_, y, x| fv(x, y)).unwrap();
        VectorVolume::new(u, v, None).unwrap()
    }

    #[test]
    fn solid_body_passes_with_full_turn() {
        let vel = field(21, |_, y| -(y - 10.0), |x, _| x - 10.0);
        let w = winding_test(&vel, 0, (10.0, 10.0), &EddyParams::default()).unwrap();
        assert!(w.pass);
        assert!(w.winding_angle >= TAU);
        assert_eq!(w.stop, StopReason::Halted);
        let cw = field(21, |_, y| y - 10.0, |x, _| -(x - 10.0));
        let w = winding_test(&cw, 0, (10.0, 10.0), &EddyParams::default()).unwrap();
        assert!(w.pass && w.winding_angle <= -TAU);
    }

    #[test]
    fn uniform_and_shear_fail() {
        let uniform = field(21, |_, _| 1.0, |_, _| 0.0);
        let w = winding_test(&uniform, 0, (10.0, 10.0), &EddyParams::default()).unwrap();
        assert!(!w.pass);
        assert!(w.quadrants_visited <= 2);
        let shear = field(21, |_, y| y - 10.0, |_, _| 0.0);
        assert!(!winding_test(&shear, 0, (10.0, 10.0), &EddyParams::default()).unwrap().pass);
    }

    #[test]
    fn solid_body_boundary_is_domain_limited() {
        let vel = field(25, |_, y| -(y - 12.0), |x, _| x - 12.0);
        let b = eddy_boundary(&vel, 0, (12.0, 12.0), &EddyParams::default()).unwrap();
        assert_eq!(b.r_max, 11.5);
        for a in 0..8 {
            assert_eq!(b.radii_voxels[a], Some(11.5), "axis {}", AXES[a]);
            let bound = (b.r_max / 0.5).log2().ceil() as usize;
            assert!(b.probes[a] <= bound);
        }
        assert_eq!(b.streamlines.len(), 8);
    }

    #[test]
    fn uniform_flow_has_no_boundary() {
        let vel = field(21, |_, _| 1.0, |_, _| 0.5);
        assert!(matches!(
            eddy_boundary(&vel, 0, (10.0, 10.0), &EddyParams::default()),
            Err(Error::DegenerateEddy(_))
        ));
    }
}
