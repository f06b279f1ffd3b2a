//! Connected-component labelling with 26-connectivity.

use ndarray::{Array3, ArrayView3};
use serde::Serialize;

/// Component labels; 0 is background and components are numbered `1..=count`
/// in raster order of their first voxel.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Labeling {
    #[serde(skip)]
    pub labels: Array3<u32>,
    pub count: u32,
}

impl Labeling {
    pub fn empty(shape: (usize, usize, usize)) -> Self {
        Labeling {
            labels: Array3::zeros(shape),
            count: 0,
        }
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

fn union(parent: &mut [u32], a: u32, b: u32) {
    let (ra, rb) = (find(parent, a), find(parent, b));
    if ra != rb {
        // Keep the smaller provisional label as root.
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        parent[hi as usize] = lo;
    }
}

/// The 13 neighbours that precede a voxel in raster order.
const BACKWARD: [(isize, isize, isize); 13] = [
    (-1, -1, -1),
    (-1, -1, 0),
    (-1, -1, 1),
    (-1, 0, -1),
    (-1, 0, 0),
    (-1, 0, 1),
    (-1, 1, -1),
    (-1, 1, 0),
    (-1, 1, 1),
    (0, -1, -1),
    (0, -1, 0),
    (0, -1, 1),
    (0, 0, -1),
];

/// Two-pass union-find labelling of `mask`.
pub fn label_components(mask: ArrayView3<'_, bool>) -> Labeling {
    let (nd, ny, nx) = mask.dim();
    let mut prov = Array3::<u32>::zeros((nd, ny, nx));
    // parent[0] is a sentinel for the background.
    let mut parent: Vec<u32> = vec![0];
    for k in 0..nd {
        for i in 0..ny {
            for j in 0..nx {
                if !mask[[k, i, j]] {
                    continue;
                }
                let mut current = 0u32;
                for &(dk, di, dj) in &BACKWARD {
                    let (kk, ii, jj) = (k as isize + dk, i as isize + di, j as isize + dj);
                    if kk < 0 || ii < 0 || jj < 0 || ii >= ny as isize || jj >= nx as isize {
                        continue;
                    }
                    let l = prov[[kk as usize, ii as usize, jj as usize]];
                    if l == 0 {
                        continue;
                    }
                    if current == 0 {
                        current = l;
                    } else {
                        union(&mut parent, current, l);
                    }
                }
                if current == 0 {
                    current = parent.len() as u32;
                    parent.push(current);
                }
                prov[[k, i, j]] = current;
            }
        }
    }
    let mut final_label = vec![0u32; parent.len()];
    let mut count = 0u32;
    for l in prov.iter_mut() {
        if *l == 0 {
            continue;
        }
        let root = find(&mut parent, *l) as usize;
        if final_label[root] == 0 {
            count += 1;
            final_label[root] = count;
        }
        *l = final_label[root];
    }
    Labeling { labels: prov, count }
}

/// Renumbers non-zero labels to `1..=K` in raster order of first appearance.
pub fn relabel_in_raster_order(labels: &mut Array3<u32>) -> u32 {
    let mut map = std::collections::HashMap::new();
    let mut count = 0u32;
    for l in labels.iter_mut() {
        if *l == 0 {
            continue;
        }
        *l = *map.entry(*l).or_insert_with(|| {
            count += 1;
            count
        });
    }
    count
}
