//! Domain decomposition of a (depth, lat, lon) volume across workers.
//!
//! Two schemes are supported: contiguous depth slabs and a near-square grid of
//! lat-lon blocks. Every block carries a ghost layer on faces interior to the
//! domain so stencil filters can run per block and agree with a single-block
//! run.

use std::ops::Range;

use ndarray::{s, Array3, ArrayView3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Scheme {
    DepthSlab,
    LatLonBlocks,
}

impl Scheme {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "depthSlab" | "depth-slab" | "depth" => Ok(Scheme::DepthSlab),
            "latLonBlocks" | "lat-lon-blocks" | "latlon" => Ok(Scheme::LatLonBlocks),
            other => Err(Error::InvalidParameter(format!("unknown partition scheme '{other}'"))),
        }
    }
}

/// Half-open index ranges along (depth, lat, lon).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexBox {
    pub depth: Range<usize>,
    pub lat: Range<usize>,
    pub lon: Range<usize>,
}

impl IndexBox {
    pub fn full(shape: (usize, usize, usize)) -> Self {
        IndexBox {
            depth: 0..shape.0,
            lat: 0..shape.1,
            lon: 0..shape.2,
        }
    }

    pub fn len(&self) -> usize {
        self.depth.len() * self.lat.len() * self.lon.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn contains(&self, (k, i, j): (usize, usize, usize)) -> bool {
        self.depth.contains(&k) && self.lat.contains(&i) && self.lon.contains(&j)
    }

    fn grow(&self, g: usize, shape: (usize, usize, usize), axes: [bool; 3]) -> Self {
        let grow = |r: &Range<usize>, n: usize, on: bool| {
            if on {
                r.start.saturating_sub(g)..(r.end + g).min(n)
            } else {
                r.clone()
            }
        };
        IndexBox {
            depth: grow(&self.depth, shape.0, axes[0]),
            lat: grow(&self.lat, shape.1, axes[1]),
            lon: grow(&self.lon, shape.2, axes[2]),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Block {
    pub interior: IndexBox,
    /// Interior plus the ghost layer, clipped to the domain.
    pub ghosted: IndexBox,
    pub owner: usize,
}

impl Block {
    pub fn ghost_cells(&self) -> usize {
        self.ghosted.len() - self.interior.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PartitionPlan {
    pub scheme: Scheme,
    pub shape: (usize, usize, usize),
    pub ghost_width: usize,
    pub blocks: Vec<Block>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BalanceReport {
    pub per_block_ocean_voxels: Vec<usize>,
    /// Largest block load over the mean load; 1 for a perfectly even split.
    pub imbalance: f64,
    pub ghost_cell_count: usize,
}

/// Splits `0..n` into `parts` contiguous runs whose lengths differ by at most one.
/// Longer runs come first.
pub fn even_runs(n: usize, parts: usize) -> Vec<Range<usize>> {
    let base = n / parts;
    let extra = n % parts;
    let mut start = 0;
    (0..parts)
        .map(|p| {
            let len = base + usize::from(p < extra);
            let r = start..start + len;
            start += len;
            r
        })
        .collect()
}

/// Factor pair `(a, b)` with `a * b == workers` minimising `|a/b - nlat/nlon|`,
/// skipping pairs that would produce empty blocks.
fn block_factors(workers: usize, nlat: usize, nlon: usize) -> Option<(usize, usize)> {
    let target = nlat as f64 / nlon as f64;
    (1..=workers)
        .filter(|&a| workers.is_multiple_of(a))
        .map(|a| (a, workers / a))
        .filter(|&(a, b)| a <= nlat && b <= nlon)
        .min_by(|x, y| {
            let dx = (x.0 as f64 / x.1 as f64 - target).abs();
            let dy = (y.0 as f64 / y.1 as f64 - target).abs();
            dx.total_cmp(&dy).then(x.0.cmp(&y.0))
        })
}

pub fn plan_partition(
    shape: (usize, usize, usize),
    workers: usize,
    scheme: Scheme,
    ghost_width: usize,
) -> Result<PartitionPlan> {
    if workers == 0 {
        return Err(Error::InvalidParameter("workers must be at least 1".into()));
    }
    let (nd, ny, nx) = shape;
    let interiors: Vec<IndexBox> = match scheme {
        Scheme::DepthSlab => {
            if workers > nd {
                return Err(Error::Infeasible(format!(
                    "{workers} workers cannot split {nd} depth levels into slabs"
                )));
            }
            even_runs(nd, workers)
                .into_iter()
                .map(|depth| IndexBox {
                    depth,
                    lat: 0..ny,
                    lon: 0..nx,
                })
                .collect()
        }
        Scheme::LatLonBlocks => {
            let (a, b) = block_factors(workers, ny, nx).ok_or_else(|| {
                Error::Infeasible(format!("{workers} workers cannot tile a {ny}x{nx} slice"))
            })?;
            let lats = even_runs(ny, a);
            let lons = even_runs(nx, b);
            lats.iter()
                .flat_map(|lat| {
                    lons.iter().map(move |lon| IndexBox {
                        depth: 0..nd,
                        lat: lat.clone(),
                        lon: lon.clone(),
                    })
                })
                .collect()
        }
    };
    let axes = match scheme {
        Scheme::DepthSlab => [true, false, false],
        Scheme::LatLonBlocks => [false, true, true],
    };
    let blocks = interiors
        .into_iter()
        .enumerate()
        .map(|(owner, interior)| Block {
            ghosted: interior.grow(ghost_width, shape, axes),
            interior,
            owner,
        })
        .collect();
    Ok(PartitionPlan {
        scheme,
        shape,
        ghost_width,
        blocks,
    })
}

/// Exact ocean-voxel counts per block. `ocean` is `true` on water.
pub fn balance_report(plan: &PartitionPlan, ocean: &Array3<bool>) -> Result<BalanceReport> {
    if ocean.dim() != plan.shape {
        return Err(Error::InvalidInput(format!(
            "mask shape {:?} does not match plan shape {:?}",
            ocean.dim(),
            plan.shape
        )));
    }
    let counts: Vec<usize> = plan
        .blocks
        .iter()
        .map(|b| {
            let i = &b.interior;
            ocean
                .slice(s![i.depth.clone(), i.lat.clone(), i.lon.clone()])
                .iter()
                .filter(|&&o| o)
                .count()
        })
        .collect();
    let max = counts.iter().copied().max().unwrap_or(0) as f64;
    let mean = counts.iter().sum::<usize>() as f64 / counts.len().max(1) as f64;
    let imbalance = if mean > 0.0 { max / mean } else { 1.0 };
    Ok(BalanceReport {
        per_block_ocean_voxels: counts,
        imbalance,
        ghost_cell_count: plan.blocks.iter().map(Block::ghost_cells).sum(),
    })
}

/// Runs `filter` on each block's ghosted sub-volume in parallel and stitches
/// the interiors back together.
///
/// `filter` must return an array shaped like its input.
pub fn apply_blockwise<T, U, F>(plan: &PartitionPlan, input: ArrayView3<'_, T>, filter: F) -> Result<Array3<U>>
where
    T: Sync,
    U: Clone + Default + Send + Sync,
    F: Fn(ArrayView3<'_, T>) -> Array3<U> + Sync,
{
    if input.dim() != plan.shape {
        return Err(Error::InvalidInput(format!(
            "input shape {:?} does not match plan shape {:?}",
            input.dim(),
            plan.shape
        )));
    }
    let pieces: Vec<Array3<U>> = plan
        .blocks
        .par_iter()
        .map(|b| {
            let g = &b.ghosted;
            let sub = input.slice(s![g.depth.clone(), g.lat.clone(), g.lon.clone()]);
            let out = filter(sub);
            let i = &b.interior;
            out.slice(s![
                i.depth.start - g.depth.start..i.depth.end - g.depth.start,
                i.lat.start - g.lat.start..i.lat.end - g.lat.start,
                i.lon.start - g.lon.start..i.lon.end - g.lon.start
            ])
            .to_owned()
        })
        .collect();
    let mut result = Array3::<U>::default(plan.shape);
    for (b, piece) in plan.blocks.iter().zip(pieces) {
        let i = &b.interior;
        result
            .slice_mut(s![i.depth.clone(), i.lat.clone(), i.lon.clone()])
            .assign(&piece);
    }
    Ok(result)
}
