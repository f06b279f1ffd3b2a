//! Eddy detection from minima of the horizontal flow speed.
//!
//! Per depth level: strict speed minima are paired by a sublevel-set merge
//! tree, low-persistence minima are dropped, the survivors must pass a
//! four-quadrant winding check, and a radial binary search finds the
//! furthest closed streamline along eight axes. Detections on adjacent
//! levels within the neighbourhood disk are merged into eddy columns.

mod persistence;
mod winding;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use persistence::{merge_tree_minima, simplify_minima, speed_minima, speed_slice, PersistencePair};
pub use winding::{eddy_boundary, winding_test, Boundary, WindingOutcome, AXES};

use crate::flow::{Point, Polyline};
use crate::geojson;
use crate::grid::VectorVolume;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct EddyParams {
    /// A boundary streamline must end within this fraction of its seed
    /// radius from where it started.
    pub closure_fraction: f64,
    /// Minimum persistence (m/s); `None` means 10% of the level's speed range.
    pub persistence_threshold: Option<f64>,
    /// Integration step as a fraction of the smaller voxel side.
    pub step_voxels: f64,
    /// Step budget per streamline, in turns around the seed circle.
    pub max_turns: f64,
    pub max_radius_voxels: Option<f64>,
    /// Disk diameter (odd) for merging detections across depth levels.
    pub neighbourhood: usize,
    pub termination_speed: f64,
}

impl Default for EddyParams {
    fn default() -> Self {
        EddyParams {
            closure_fraction: 0.2,
            persistence_threshold: None,
            step_voxels: 0.1,
            max_turns: 3.0,
            max_radius_voxels: None,
            neighbourhood: 3,
            termination_speed: 1e-9,
        }
    }
}

impl EddyParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.closure_fraction > 0.0) {
            return bad(format!("closure fraction must be positive, got {}", self.closure_fraction));
        }
        if let Some(t) = self.persistence_threshold {
            if !(t >= 0.0) {
                return bad(format!("persistence threshold must be non-negative, got {t}"));
            }
        }
        if !(self.step_voxels > 0.0 && self.step_voxels <= 1.0) {
            return bad(format!("step must be in (0, 1] voxels, got {}", self.step_voxels));
        }
        if !(self.max_turns >= 1.0) {
            return bad(format!("max turns must be at least 1, got {}", self.max_turns));
        }
        if let Some(r) = self.max_radius_voxels {
            if !(r >= 1.0) {
                return bad(format!("max radius must be at least 1 voxel, got {r}"));
            }
        }
        crate::fronts::check_neighbourhood(self.neighbourhood)?;
        if !(self.termination_speed >= 0.0) {
            return bad("termination speed must be non-negative".into());
        }
        Ok(())
    }
}

/// One depth level of an eddy column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EddyLevel {
    pub depth: f64,
    pub lon: f64,
    pub lat: f64,
    pub core_speed: f64,
    pub radii: [Option<f64>; 8],
    pub winding_angle: f64,
    #[serde(skip)]
    index: (usize, usize, usize),
    #[serde(skip)]
    streamlines: Vec<Polyline>,
}

/// A detected eddy column. `center`, radii and winding angle are those of the
/// shallowest level; `profile` lists every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EddyDescriptor {
    pub t: usize,
    pub center: Point,
    pub depth_extent: [f64; 2],
    pub core_speed: f64,
    /// Per compass axis (E, NE, …, SE): metres on spherical grids,
    /// coordinate units on Cartesian ones; null where no radius passed.
    #[serde(rename = "radii")]
    pub boundary_radii: [Option<f64>; 8],
    pub winding_angle: f64,
    pub profile: Vec<EddyLevel>,
    /// Boundary streamlines then the core streamline, per level.
    #[serde(skip)]
    pub streamlines: Vec<Polyline>,
}

/// Detections on one depth level, in order of increasing core speed.
pub fn detect_level(vel: &VectorVolume, k: usize, params: &EddyParams) -> Result<Vec<EddyLevel>> {
    params.validate()?;
    let speed = speed_slice(vel, k)?;
    let (ny, nx) = speed.dim();
    let (lo, hi) = speed
        .iter()
        .filter(|s| !s.is_nan())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &s| (a.min(s), b.max(s)));
    if lo > hi {
        return Ok(Vec::new());
    }
    let threshold = params.persistence_threshold.unwrap_or(0.1 * (hi - lo));
    let pairs = simplify_minima(&merge_tree_minima(speed.view()), threshold)?;
    let grid = vel.grid();
    let depth = grid.depth().coords()[k];
    let mut out = Vec::new();
    for p in pairs {
        let (i, j) = p.minimum_index;
        if i == 0 || j == 0 || i + 1 == ny || j + 1 == nx {
            continue;
        }
        let center = (grid.lon().coords()[j], grid.lat().coords()[i]);
        let w = winding_test(vel, k, center, params)?;
        if !w.pass {
            log::debug!("minimum at ({i}, {j}) on level {k} fails the winding check");
            continue;
        }
        let b = match eddy_boundary(vel, k, center, params) {
            Ok(b) => b,
            Err(Error::DegenerateEddy(m)) => {
                log::debug!("level {k}: {m}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let mut streamlines = b.streamlines;
        let mut core = w.streamline;
        core.seed_index = AXES.len();
        streamlines.push(core);
        out.push(EddyLevel {
            depth,
            lon: center.0,
            lat: center.1,
            core_speed: p.birth_value,
            radii: b.radii,
            winding_angle: w.winding_angle,
            index: (k, i, j),
            streamlines,
        });
    }
    Ok(out)
}

/// Detects eddies on every depth level of `vel` in parallel and merges
/// detections on consecutive levels whose voxel centres lie within the
/// neighbourhood disk into columns. The merge runs in depth order, so the
/// result does not depend on the number of workers.
pub fn detect_eddies(vel: &VectorVolume, params: &EddyParams) -> Result<Vec<EddyDescriptor>> {
    params.validate()?;
    let nd = vel.grid().depth().len();
    let per_level = (0..nd)
        .into_par_iter()
        .map(|k| detect_level(vel, k, params))
        .collect::<Result<Vec<_>>>()?;
    Ok(merge_columns(vel.t(), per_level, params.neighbourhood))
}

fn merge_columns(t: usize, per_level: Vec<Vec<EddyLevel>>, n: usize) -> Vec<EddyDescriptor> {
    let r2 = (n * n) as isize;
    let mut columns: Vec<Vec<EddyLevel>> = Vec::new();
    // Columns whose deepest level is the previous depth index.
    let mut open: Vec<usize> = Vec::new();
    for (k, level) in per_level.into_iter().enumerate() {
        let mut next_open = Vec::new();
        let mut taken = vec![false; open.len()];
        for e in level {
            let (_, i, j) = e.index;
            // Nearest unclaimed open column; ties go to the older column.
            let best = open
                .iter()
                .enumerate()
                .filter(|&(slot, _)| !taken[slot])
                .filter_map(|(slot, &c)| {
                    let (_, ci, cj) = columns[c].last().unwrap().index;
                    let d2 = (i as isize - ci as isize).pow(2) + (j as isize - cj as isize).pow(2);
                    (d2 <= r2).then_some((d2, c, slot))
                })
                .min();
            match best {
                Some((_, c, slot)) => {
                    taken[slot] = true;
                    columns[c].push(e);
                    next_open.push(c);
                }
                None => {
                    columns.push(vec![e]);
                    next_open.push(columns.len() - 1);
                }
            }
        }
        debug_assert!(next_open.iter().all(|&c| columns[c].last().unwrap().index.0 == k));
        next_open.sort_unstable();
        open = next_open;
    }
    let mut out: Vec<EddyDescriptor> = columns
        .into_iter()
        .map(|mut levels| {
            let streamlines = levels.iter_mut().flat_map(|l| std::mem::take(&mut l.streamlines)).collect();
            let top = &levels[0];
            EddyDescriptor {
                t,
                center: Point::new(top.lon, top.lat, top.depth),
                depth_extent: [top.depth, levels.last().unwrap().depth],
                core_speed: top.core_speed,
                boundary_radii: top.radii,
                winding_angle: top.winding_angle,
                streamlines,
                profile: levels,
            }
        })
        .collect();
    out.sort_by_key(|e| e.profile[0].index);
    out
}

/// `{center, depthExtent, radii, windingAngle, …}` per eddy.
pub fn eddies_json(eddies: &[EddyDescriptor]) -> Result<String> {
    Ok(serde_json::to_string_pretty(eddies)?)
}

/// Vertex cap per streamline in the GeoJSON overlay.
pub const OVERLAY_VERTICES: usize = 64;

/// Streamline bundles as LineStrings (decimated to [`OVERLAY_VERTICES`])
/// plus a centre Point per eddy.
pub fn eddies_geojson(eddies: &[EddyDescriptor]) -> Value {
    let mut features = Vec::new();
    for (e, eddy) in eddies.iter().enumerate() {
        features.push(geojson::point_feature(
            vec![eddy.center.lon, eddy.center.lat, eddy.center.depth],
            json!({
                "eddy": e,
                "t": eddy.t,
                "kind": "center",
                "depthExtent": eddy.depth_extent,
                "windingAngle": eddy.winding_angle,
                "coreSpeed": eddy.core_speed,
            }),
        ));
        for line in &eddy.streamlines {
            let axis = AXES.get(line.seed_index).copied().unwrap_or("core");
            features.push(geojson::line_feature(
                geojson::decimate(&line.points, OVERLAY_VERTICES)
                    .iter()
                    .map(|p| vec![p.lon, p.lat, p.depth])
                    .collect(),
                json!({
                    "eddy": e,
                    "t": eddy.t,
                    "kind": "streamline",
                    "axis": axis,
                    "depth": line.points.first().map_or(f64::NAN, |p| p.depth),
                }),
            ));
        }
    }
    geojson::feature_collection(features)
}
