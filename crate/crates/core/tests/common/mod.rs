//! Shared fixtures and an independent brute-force front-tracking oracle.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use ndarray::Array3;
use ocean_core::io::MemorySource;
use ocean_core::{Dataset, Grid4D};

/// A single-variable dataset on a unit Cartesian grid; `steps[t]` is
/// indexed `(depth, lat, lon)`.
pub fn scalar_dataset(name: &str, steps: Vec<Array3<f64>>) -> Dataset {
    let (nd, ny, nx) = steps[0].dim();
    let depths = (0..nd).map(|k| 10.0 * (k + 1) as f64).collect();
    let grid = Grid4D::cartesian(steps.len(), depths, (0.0, 1.0, ny), (0.0, 1.0, nx)).unwrap();
    Dataset::new(MemorySource::new(grid).with_variable(name, steps).unwrap())
}

/// Fronts and arcs as computed by the oracle: vertices keyed by
/// `(t, label)` with their voxels in raster order.
#[derive(Debug, Default, PartialEq, Eq)]
pub struct OracleGraph {
    pub vertices: BTreeMap<(usize, u32), Vec<[usize; 3]>>,
    pub arcs: BTreeSet<(usize, u32, u32)>,
}

type Grid3<T> = Vec<Vec<Vec<T>>>;

fn grid3<T: Clone>(nd: usize, ny: usize, nx: usize, v: T) -> Grid3<T> {
    vec![vec![vec![v; nx]; ny]; nd]
}

/// Labels for one step, computed voxel by voxel: threshold, 3×3 boundary
/// test, north-facing test, n×n×2 dilation by scanning, breadth-first
/// 26-connected flood fill, then numbering in raster order.
pub fn oracle_labels(values: &Array3<f64>, threshold: f64, n: usize) -> Grid3<u32> {
    let (nd, ny, nx) = values.dim();
    let h = (n as isize - 1) / 2;
    let mut iso = grid3(nd, ny, nx, false);
    for k in 0..nd {
        for i in 0..ny {
            for j in 0..nx {
                iso[k][i][j] = values[[k, i, j]] >= threshold;
            }
        }
    }

    let mut north = grid3(nd, ny, nx, false);
    for k in 0..nd {
        for i in 0..ny {
            for j in 0..nx {
                if !iso[k][i][j] {
                    continue;
                }
                let (mut ones, mut total) = (0, 0);
                for di in -1isize..=1 {
                    for dj in -1isize..=1 {
                        let (ii, jj) = (i as isize + di, j as isize + dj);
                        if ii >= 0 && jj >= 0 && ii < ny as isize && jj < nx as isize {
                            total += 1;
                            if iso[k][ii as usize][jj as usize] {
                                ones += 1;
                            }
                        }
                    }
                }
                let boundary = ones > 0 && ones < total;
                let open_north = i + 1 == ny || !iso[k][i + 1][j];
                north[k][i][j] = boundary && open_north;
            }
        }
    }

    // A voxel is in the dilation if a north-facing voxel on its own level or
    // the level above lies within the n×n square around it.
    let mut dilated = grid3(nd, ny, nx, false);
    for k in 0..nd {
        for i in 0..ny {
            for j in 0..nx {
                'scan: for kk in [k as isize - 1, k as isize] {
                    if kk < 0 {
                        continue;
                    }
                    for di in -h..=h {
                        for dj in -h..=h {
                            let (ii, jj) = (i as isize + di, j as isize + dj);
                            if ii >= 0
                                && jj >= 0
                                && ii < ny as isize
                                && jj < nx as isize
                                && north[kk as usize][ii as usize][jj as usize]
                            {
                                dilated[k][i][j] = true;
                                break 'scan;
                            }
                        }
                    }
                }
            }
        }
    }

    let mut component = grid3(nd, ny, nx, 0usize);
    let mut next = 0;
    for k in 0..nd {
        for i in 0..ny {
            for j in 0..nx {
                if !dilated[k][i][j] || component[k][i][j] != 0 {
                    continue;
                }
                next += 1;
                component[k][i][j] = next;
                let mut queue = VecDeque::from([(k, i, j)]);
                while let Some((a, b, c)) = queue.pop_front() {
                    for da in -1isize..=1 {
                        for db in -1isize..=1 {
                            for dc in -1isize..=1 {
                                let (x, y, z) = (a as isize + da, b as isize + db, c as isize + dc);
                                if x < 0 || y < 0 || z < 0 || x >= nd as isize || y >= ny as isize || z >= nx as isize
                                {
                                    continue;
                                }
                                let (x, y, z) = (x as usize, y as usize, z as usize);
                                if dilated[x][y][z] && component[x][y][z] == 0 {
                                    component[x][y][z] = next;
                                    queue.push_back((x, y, z));
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    let mut renumber: BTreeMap<usize, u32> = BTreeMap::new();
    let mut labels = grid3(nd, ny, nx, 0u32);
    for k in 0..nd {
        for i in 0..ny {
            for j in 0..nx {
                if north[k][i][j] {
                    let fresh = renumber.len() as u32 + 1;
                    labels[k][i][j] = *renumber.entry(component[k][i][j]).or_insert(fresh);
                }
            }
        }
    }
    labels
}

/// The whole track graph by brute force over `steps`.
pub fn oracle_graph(steps: &[Array3<f64>], threshold: f64, n: usize) -> OracleGraph {
    let labels: Vec<Grid3<u32>> = steps.iter().map(|v| oracle_labels(v, threshold, n)).collect();
    let mut graph = OracleGraph::default();
    for (t, l) in labels.iter().enumerate() {
        for (k, plane) in l.iter().enumerate() {
            for (i, row) in plane.iter().enumerate() {
                for (j, &label) in row.iter().enumerate() {
                    if label > 0 {
                        graph.vertices.entry((t, label)).or_default().push([k, i, j]);
                    }
                }
            }
        }
    }
    let r = n as isize;
    for t in 1..labels.len() {
        let (a, b) = (&labels[t - 1], &labels[t]);
        let (nd, ny, nx) = (a.len(), a[0].len(), a[0][0].len());
        for k in 0..nd {
            for i in 0..ny {
                for j in 0..nx {
                    if a[k][i][j] == 0 {
                        continue;
                    }
                    for ii in 0..ny {
                        for jj in 0..nx {
                            let (di, dj) = (ii as isize - i as isize, jj as isize - j as isize);
                            if di * di + dj * dj <= r * r && b[k][ii][jj] > 0 {
                                graph.arcs.insert((t - 1, a[k][i][j], b[k][ii][jj]));
                            }
                        }
                    }
                }
            }
        }
    }
    graph
}

/// The library's graph in the oracle's terms.
pub fn as_oracle(graph: &ocean_core::fronts::TrackGraph) -> OracleGraph {
    OracleGraph {
        vertices: graph
            .vertices
            .iter()
            .map(|v| ((v.t, v.label), v.voxels.clone()))
            .collect(),
        arcs: graph.arcs.iter().map(|a| (a.from_t, a.from_label, a.to_label)).collect(),
    }
}

/// Every file under `dir` with its bytes, keyed by relative path.
pub fn read_tree(dir: &std::path::Path) -> BTreeMap<String, Vec<u8>> {
    fn walk(root: &std::path::Path, dir: &std::path::Path, out: &mut BTreeMap<String, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let rel = path.strip_prefix(root).unwrap().to_string_lossy().replace('\\', "/");
                out.insert(rel, std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}
