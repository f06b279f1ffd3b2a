use std::ops::Range;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Point;
use crate::grid::{derived_field, DerivedFieldKind, Grid4D, GridAxis, ScalarVolume, VectorVolume};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum SeedStrategy {
    #[default]
    Uniform,
    Weighted { field: DerivedFieldKind },
}

/// Coordinate box restricting where seeds may land. Bounds are inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lat: (f64, f64),
    pub lon: (f64, f64),
    #[serde(default)]
    pub depth: Option<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SeedSpec {
    pub count: usize,
    #[serde(default)]
    pub strategy: SeedStrategy,
    #[serde(default)]
    pub region: Option<Region>,
    #[serde(default)]
    pub rng_seed: u64,
}

impl SeedSpec {
    pub fn uniform(count: usize, rng_seed: u64) -> Self {
        SeedSpec {
            count,
            strategy: SeedStrategy::Uniform,
            region: None,
            rng_seed,
        }
    }

    pub fn weighted(count: usize, field: DerivedFieldKind, rng_seed: u64) -> Self {
        SeedSpec {
            count,
            strategy: SeedStrategy::Weighted { field },
            region: None,
            rng_seed,
        }
    }

    fn candidate_box(&self, grid: &Grid4D) -> Result<[Range<usize>; 3]> {
        if self.count == 0 {
            return Err(Error::InvalidParameter("seed count must be at least 1".into()));
        }
        let Some(region) = self.region else {
            let (nd, ny, nx) = grid.volume_shape();
            return Ok([0..nd, 0..ny, 0..nx]);
        };
        let pick = |axis: &GridAxis, (lo, hi): (f64, f64)| -> Result<Range<usize>> {
            if !(lo <= hi) || lo < axis.first() || hi > axis.last() {
                return Err(Error::InvalidParameter(format!(
                    "seed region {} [{lo}, {hi}] is outside the grid [{}, {}]",
                    axis.kind().name(),
                    axis.first(),
                    axis.last()
                )));
            }
            let r = axis.index_range(lo, hi);
            if r.is_empty() {
                return Err(Error::InvalidParameter(format!(
                    "seed region {} [{lo}, {hi}] contains no grid node",
                    axis.kind().name()
                )));
            }
            Ok(r)
        };
        let depth = match region.depth {
            Some(d) => pick(grid.depth(), d)?,
            None => 0..grid.depth().len(),
        };
        Ok([depth, pick(grid.lat(), region.lat)?, pick(grid.lon(), region.lon)?])
    }
}

/// Uniform position inside the node-centred cell of index `i`, clipped to the axis.
fn jitter(axis: &GridAxis, i: usize, rng: &mut impl Rng) -> f64 {
    let c = axis.coords();
    let lo = if i == 0 { c[0] } else { 0.5 * (c[i - 1] + c[i]) };
    let hi = if i + 1 == c.len() { c[i] } else { 0.5 * (c[i] + c[i + 1]) };
    if hi > lo {
        let x = lo + rng.gen::<f64>() * (hi - lo);
        x.min(hi)
    } else {
        c[i]
    }
}

fn jittered_point(grid: &Grid4D, (k, i, j): (usize, usize, usize), rng: &mut impl Rng) -> Point {
    let lon = jitter(grid.lon(), j, rng);
    let lat = jitter(grid.lat(), i, rng);
    let depth = jitter(grid.depth(), k, rng);
    Point { lon, lat, depth }
}

fn unravel(n: usize, b: &[Range<usize>; 3]) -> (usize, usize, usize) {
    let (ny, nx) = (b[1].len(), b[2].len());
    (b[0].start + n / (ny * nx), b[1].start + (n / nx) % ny, b[2].start + n % nx)
}

/// Rejection-samples ocean voxels of `reference` uniformly, then jitters
/// inside the chosen voxel.
pub fn place_seeds_uniform(reference: &ScalarVolume, spec: &SeedSpec) -> Result<Vec<Point>> {
    let grid = reference.grid();
    let b = spec.candidate_box(grid)?;
    let values = reference.values();
    let total = b.iter().map(|r| r.len()).product::<usize>();
    let any_ocean = (0..total).any(|n| {
        let (k, i, j) = unravel(n, &b);
        !values[[k, i, j]].is_nan()
    });
    if !any_ocean {
        return Err(Error::InvalidInput("seed region contains no ocean voxel".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut out = Vec::with_capacity(spec.count);
    while out.len() < spec.count {
        let idx = unravel(rng.gen_range(0..total), &b);
        if values[idx].is_nan() {
            continue;
        }
        out.push(jittered_point(grid, idx, &mut rng));
    }
    Ok(out)
}

/// Samples voxels with probability proportional to `max(weight, 0)` (NaN
/// counts as 0), then jitters inside the chosen voxel.
pub fn place_seeds_weighted(weights: &ScalarVolume, spec: &SeedSpec) -> Result<Vec<Point>> {
    let grid = weights.grid();
    let b = spec.candidate_box(grid)?;
    let values = weights.values();
    let total = b.iter().map(|r| r.len()).product::<usize>();
    let w: Vec<f64> = (0..total)
        .map(|n| {
            let v = values[unravel(n, &b)];
            if v.is_nan() {
                0.0
            } else {
                v.max(0.0)
            }
        })
        .collect();
    if !w.iter().any(|&x| x > 0.0) {
        return Err(Error::DegenerateWeights);
    }
    let dist = WeightedIndex::new(&w).map_err(|_| Error::DegenerateWeights)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    Ok((0..spec.count)
        .map(|_| {
            let idx = unravel(dist.sample(&mut rng), &b);
            jittered_point(grid, idx, &mut rng)
        })
        .collect())
}

/// Dispatches on the strategy. A user-scalar weighting needs that field in `user`.
pub fn place_seeds(vel: &VectorVolume, spec: &SeedSpec, user: Option<&ScalarVolume>) -> Result<Vec<Point>> {
    match &spec.strategy {
        SeedStrategy::Uniform => place_seeds_uniform(vel.u(), spec),
        SeedStrategy::Weighted {
            field: DerivedFieldKind::UserScalar(name),
        } => {
            let field = user.ok_or_else(|| {
                Error::InvalidInput(format!("weighting by '{name}' needs that field loaded"))
            })?;
            place_seeds_weighted(field, spec)
        }
        SeedStrategy::Weighted { field } => place_seeds_weighted(&derived_field(vel, field)?, spec),
    }
}
