//! Sublevel-set merge tree of a 2D speed slice.

use ndarray::{Array2, ArrayView2, Zip};
use serde::{Deserialize, Serialize};

use crate::grid::VectorVolume;
use crate::{Error, Result};

/// A speed minimum and the value at which its basin merges into an older one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct PersistencePair {
    /// (lat, lon) voxel of the minimum.
    pub minimum_index: (usize, usize),
    pub birth_value: f64,
    /// Infinite for the oldest minimum of each connected ocean region.
    pub death_value: f64,
    pub persistence: f64,
}

/// Horizontal speed of one depth level; vertical velocity is ignored.
pub fn speed_slice(vel: &VectorVolume, depth: usize) -> Result<Array2<f64>> {
    let nd = vel.grid().depth().len();
    if depth >= nd {
        return Err(Error::Bounds {
            what: "depth level",
            index: depth,
            len: nd,
        });
    }
    Ok(Zip::from(vel.u().slice(depth))
        .and(vel.v().slice(depth))
        .map_collect(|&u, &v| (u * u + v * v).sqrt()))
}

/// Minima of `speedMinima` for one depth level of `vel`.
pub fn speed_minima(vel: &VectorVolume, depth: usize) -> Result<Vec<PersistencePair>> {
    Ok(merge_tree_minima(speed_slice(vel, depth)?.view()))
}

fn find(parent: &mut [usize], mut x: usize) -> usize {
    while parent[x] != x {
        parent[x] = parent[parent[x]];
        x = parent[x];
    }
    x
}

fn neighbours(i: usize, j: usize, ny: usize, nx: usize) -> impl Iterator<Item = (usize, usize)> {
    let up = (i > 0).then(|| (i - 1, j));
    let down = (i + 1 < ny).then(|| (i + 1, j));
    let left = (j > 0).then(|| (i, j - 1));
    let right = (j + 1 < nx).then(|| (i, j + 1));
    [up, down, left, right].into_iter().flatten()
}

/// Pairs every strict 4-neighbourhood minimum of `field` (NaN = land) with
/// its merge value. Voxels are swept in order of (value, raster index), so
/// equal values are ordered by index and the elder basin is always the one
/// whose minimum was swept first. Plateau minima are not reported.
pub fn merge_tree_minima(field: ArrayView2<'_, f64>) -> Vec<PersistencePair> {
    let (ny, nx) = field.dim();
    let flat = |i: usize, j: usize| i * nx + j;
    let mut order: Vec<usize> = (0..ny * nx)
        .filter(|&n| !field[[n / nx, n % nx]].is_nan())
        .collect();
    order.sort_by(|&a, &b| {
        field[[a / nx, a % nx]]
            .total_cmp(&field[[b / nx, b % nx]])
            .then(a.cmp(&b))
    });
    let mut rank = vec![usize::MAX; ny * nx];
    for (r, &n) in order.iter().enumerate() {
        rank[n] = r;
    }
    // A basin's root is always its minimum: the elder root survives a merge.
    let mut parent: Vec<usize> = (0..ny * nx).collect();
    let mut swept = vec![false; ny * nx];
    let mut deaths: Vec<(usize, f64)> = Vec::new();

    for &n in &order {
        let (i, j) = (n / nx, n % nx);
        let value = field[[i, j]];
        let mut roots: Vec<usize> = neighbours(i, j, ny, nx)
            .map(|(a, b)| flat(a, b))
            .filter(|&m| swept[m])
            .map(|m| find(&mut parent, m))
            .collect();
        roots.sort_unstable();
        roots.dedup();
        swept[n] = true;
        let Some(&elder) = roots.iter().min_by_key(|&&r| rank[r]) else {
            continue;
        };
        for &r in &roots {
            if r != elder {
                deaths.push((r, value));
                parent[r] = elder;
            }
        }
        parent[n] = elder;
    }
    for &n in &order {
        if find(&mut parent, n) == n {
            deaths.push((n, f64::INFINITY));
        }
    }

    let strict = |n: usize| {
        let (i, j) = (n / nx, n % nx);
        let v = field[[i, j]];
        neighbours(i, j, ny, nx).all(|(a, b)| {
            let w = field[[a, b]];
            w.is_nan() || w > v
        })
    };
    let mut pairs: Vec<PersistencePair> = deaths
        .into_iter()
        .filter(|&(b, _)| strict(b))
        .map(|(b, death)| {
            let birth_value = field[[b / nx, b % nx]];
            PersistencePair {
                minimum_index: (b / nx, b % nx),
                birth_value,
                death_value: death,
                persistence: death - birth_value,
            }
        })
        .collect();
    pairs.sort_by_key(|p| rank[flat(p.minimum_index.0, p.minimum_index.1)]);
    pairs
}

/// Keeps the pairs with `persistence >= threshold`.
pub fn simplify_minima(pairs: &[PersistencePair], threshold: f64) -> Result<Vec<PersistencePair>> {
    if !(threshold >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "persistence threshold must be non-negative, got {threshold}"
        )));
    }
    Ok(pairs.iter().filter(|p| p.persistence >= threshold).copied().collect())
}
