//! Temporal correspondence of fronts and the track graph.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::ops::Range;

use ndarray::Array3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{extract_fronts, FrontStep, IsovolumeSpec, SurfaceFront};
use crate::geojson;
use crate::io::Dataset;
use crate::{Error, Result};

/// Integer offsets `(di, dj)` with `di² + dj² ≤ n²`, in raster order.
pub fn disk_offsets(n: usize) -> Vec<(isize, isize)> {
    let r = n as isize;
    let mut out = Vec::new();
    for di in -r..=r {
        for dj in -r..=r {
            if di * di + dj * dj <= r * r {
                out.push((di, dj));
            }
        }
    }
    out
}

/// Label pairs `(a, b)` such that some voxel labelled `a` at time t has a
/// voxel labelled `b` at time t+1 within the radius-n disk at the same depth.
pub fn correspondence_arcs(a: &Array3<u32>, b: &Array3<u32>, n: usize) -> Result<BTreeSet<(u32, u32)>> {
    if a.dim() != b.dim() {
        return Err(Error::InvalidInput(format!(
            "labelings have different shapes {:?} and {:?}",
            a.dim(),
            b.dim()
        )));
    }
    let (nd, ny, nx) = a.dim();
    let offsets = disk_offsets(n);
    let per_slice: Vec<BTreeSet<(u32, u32)>> = (0..nd)
        .into_par_iter()
        .map(|k| {
            let mut arcs = BTreeSet::new();
            for i in 0..ny {
                for j in 0..nx {
                    let la = a[[k, i, j]];
                    if la == 0 {
                        continue;
                    }
                    for &(di, dj) in &offsets {
                        let (ii, jj) = (i as isize + di, j as isize + dj);
                        if ii < 0 || jj < 0 || ii >= ny as isize || jj >= nx as isize {
                            continue;
                        }
                        let lb = b[[k, ii as usize, jj as usize]];
                        if lb != 0 {
                            arcs.insert((la, lb));
                        }
                    }
                }
            }
            arcs
        })
        .collect();
    Ok(per_slice.into_iter().flatten().collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrackArc {
    pub from_t: usize,
    pub from_label: u32,
    pub to_label: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackGraph {
    pub n: usize,
    /// Sorted by `(t, label)`.
    pub vertices: Vec<SurfaceFront>,
    /// Sorted; arcs always go from step `fromT` to `fromT + 1`.
    pub arcs: Vec<TrackArc>,
}

impl TrackGraph {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn vertex(&self, t: usize, label: u32) -> Option<&SurfaceFront> {
        self.vertices
            .binary_search_by(|v| (v.t, v.label).cmp(&(t, label)))
            .ok()
            .map(|i| &self.vertices[i])
    }
}

/// Assembles the graph from per-step fronts (any order; sorted here).
pub fn track_graph_from_steps(mut steps: Vec<FrontStep>, n: usize) -> Result<TrackGraph> {
    steps.sort_by_key(|s| s.t);
    let arcs: Vec<Vec<TrackArc>> = steps
        .par_windows(2)
        .map(|w| {
            let (s0, s1) = (&w[0], &w[1]);
            if s1.t != s0.t + 1 {
                return Ok(Vec::new());
            }
            Ok(correspondence_arcs(&s0.labeling.labels, &s1.labeling.labels, n)?
                .into_iter()
                .map(|(a, b)| TrackArc {
                    from_t: s0.t,
                    from_label: a,
                    to_label: b,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    let vertices = steps.into_iter().flat_map(|s| s.fronts).collect();
    Ok(TrackGraph {
        n,
        vertices,
        arcs: arcs.into_iter().flatten().collect(),
    })
}

/// Per-step extraction in parallel, then arcs once both endpoints exist.
pub fn build_track_graph(
    dataset: &Dataset,
    spec: &IsovolumeSpec,
    n: usize,
    time_range: Range<usize>,
) -> Result<TrackGraph> {
    if time_range.len() < 2 {
        return Err(Error::InvalidRange(format!(
            "track graph needs at least 2 time steps, got {time_range:?}"
        )));
    }
    if time_range.end > dataset.steps() {
        return Err(Error::Bounds {
            what: "time axis",
            index: time_range.end - 1,
            len: dataset.steps(),
        });
    }
    spec.validate()?;
    let steps: Vec<FrontStep> = time_range
        .into_par_iter()
        .map(|t| {
            let field = dataset.load(t, &spec.variable)?;
            extract_fronts(&field, spec, n)
        })
        .collect::<Result<_>>()?;
    track_graph_from_steps(steps, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TrackVertexRef {
    pub t: usize,
    pub label: u32,
}

/// A directed path through the graph, one vertex per consecutive step.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Track {
    pub vertices: Vec<TrackVertexRef>,
}

impl Track {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    pub fn start_t(&self) -> usize {
        self.vertices.first().map_or(0, |v| v.t)
    }

    fn rank(&self, other: &Track) -> Ordering {
        other
            .len()
            .cmp(&self.len())
            .then(self.start_t().cmp(&other.start_t()))
            .then_with(|| {
                let a = self.vertices.iter().map(|v| v.label);
                let b = other.vertices.iter().map(|v| v.label);
                a.cmp(b)
            })
    }
}

/// The `k` best maximal paths: longest first, then earlier start, then
/// lexicographically smaller label sequence.
pub fn longest_tracks(graph: &TrackGraph, k: usize) -> Result<Vec<Track>> {
    if k == 0 {
        return Err(Error::InvalidParameter("k must be at least 1".into()));
    }
    let mut preds: BTreeMap<TrackVertexRef, Vec<TrackVertexRef>> = BTreeMap::new();
    let mut has_succ: BTreeSet<TrackVertexRef> = BTreeSet::new();
    for a in &graph.arcs {
        let from = TrackVertexRef { t: a.from_t, label: a.from_label };
        let to = TrackVertexRef { t: a.from_t + 1, label: a.to_label };
        preds.entry(to).or_default().push(from);
        has_succ.insert(from);
    }
    let mut order: Vec<TrackVertexRef> = graph
        .vertices
        .iter()
        .map(|v| TrackVertexRef { t: v.t, label: v.label })
        .collect();
    order.sort();
    let mut best: BTreeMap<TrackVertexRef, Track> = BTreeMap::new();
    for v in &order {
        let mut chosen: Option<Track> = None;
        for p in preds.get(v).into_iter().flatten() {
            let Some(prev) = best.get(p) else { continue };
            let mut cand = prev.clone();
            cand.vertices.push(*v);
            if chosen.as_ref().is_none_or(|c| cand.rank(c) == Ordering::Less) {
                chosen = Some(cand);
            }
        }
        best.insert(*v, chosen.unwrap_or(Track { vertices: vec![*v] }));
    }
    let mut tracks: Vec<Track> = order
        .iter()
        .filter(|v| !has_succ.contains(v))
        .map(|v| best[v].clone())
        .collect();
    tracks.sort_by(|a, b| a.rank(b));
    tracks.truncate(k);
    Ok(tracks)
}

/// Centroid polylines of `tracks` as a GeoJSON FeatureCollection.
pub fn tracks_geojson(graph: &TrackGraph, tracks: &[Track]) -> Value {
    let features = tracks
        .iter()
        .enumerate()
        .map(|(rank, track)| {
            let fronts: Vec<&SurfaceFront> = track
                .vertices
                .iter()
                .filter_map(|v| graph.vertex(v.t, v.label))
                .collect();
            let coords = fronts
                .iter()
                .map(|f| vec![f.centroid.lon, f.centroid.lat, f.centroid.depth])
                .collect();
            geojson::line_feature(
                coords,
                json!({
                    "rank": rank,
                    "length": track.len(),
                    "startT": track.start_t(),
                    "times": fronts.iter().map(|f| f.t).collect::<Vec<_>>(),
                    "labels": fronts.iter().map(|f| f.label).collect::<Vec<_>>(),
                }),
            )
        })
        .collect();
    geojson::feature_collection(features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fronts::Centroid;

    fn vertex(t: usize, label: u32) -> SurfaceFront {
        SurfaceFront {
            t,
            label,
            centroid: Centroid { lat: t as f64, lon: label as f64, depth: 0.0 },
            voxel_count: 1,
            depth_range: [0.0, 0.0],
            voxels: vec![],
        }
    }

    fn graph(vertices: &[(usize, u32)], arcs: &[(usize, u32, u32)]) -> TrackGraph {
        let mut vs: Vec<_> = vertices.iter().map(|&(t, l)| vertex(t, l)).collect();
        vs.sort_by_key(|v| (v.t, v.label));
        TrackGraph {
            n: 3,
            vertices: vs,
            arcs: arcs
                .iter()
                .map(|&(from_t, from_label, to_label)| TrackArc { from_t, from_label, to_label })
                .collect(),
        }
    }

    #[test]
    fn disk_membership() {
        assert_eq!(disk_offsets(1).len(), 5);
        assert_eq!(disk_offsets(2).len(), 13);
        assert!(disk_offsets(3).contains(&(0, 3)));
        assert!(!disk_offsets(3).contains(&(2, 3)));
    }

    #[test]
    fn identical_labelings_give_self_arcs() {
        let mut a = Array3::<u32>::zeros((1, 10, 10));
        a[[0, 2, 2]] = 1;
        a[[0, 7, 7]] = 2;
        let arcs = correspondence_arcs(&a, &a, 1).unwrap();
        assert_eq!(arcs.into_iter().collect::<Vec<_>>(), vec![(1, 1), (2, 2)]);
        assert!(correspondence_arcs(&a, &Array3::zeros((1, 10, 9)), 1).is_err());
    }

    #[test]
    fn translation_within_n_gives_single_arc() {
        let mut a = Array3::<u32>::zeros((1, 12, 12));
        let mut b = a.clone();
        a[[0, 5, 2]] = 1;
        b[[0, 5, 5]] = 1;
        assert_eq!(correspondence_arcs(&a, &b, 3).unwrap().len(), 1);
        assert!(correspondence_arcs(&a, &b, 2).unwrap().is_empty());
    }

    #[test]
    fn split_gives_two_out_arcs() {
        let mut a = Array3::<u32>::zeros((1, 12, 12));
        let mut b = a.clone();
        a[[0, 5, 5]] = 1;
        b[[0, 3, 5]] = 1;
        b[[0, 7, 5]] = 2;
        let arcs = correspondence_arcs(&a, &b, 2).unwrap();
        assert_eq!(arcs.into_iter().collect::<Vec<_>>(), vec![(1, 1), (1, 2)]);
    }

    #[test]
    fn path_graph_is_its_own_longest_track() {
        let g = graph(&[(0, 1), (1, 1), (2, 1), (3, 1)], &[(0, 1, 1), (1, 1, 1), (2, 1, 1)]);
        let tracks = longest_tracks(&g, 3).unwrap();
        assert_eq!(tracks.len(), 1);
        assert_eq!(tracks[0].len(), 4);
    }

    #[test]
    fn longer_of_two_disjoint_paths_wins() {
        let mut vs = vec![];
        let mut arcs = vec![];
        for t in 0..5 {
            vs.push((t, 1));
            if t > 0 {
                arcs.push((t - 1, 1, 1));
            }
        }
        for t in 0..3 {
            vs.push((t, 2));
            if t > 0 {
                arcs.push((t - 1, 2, 2));
            }
        }
        let g = graph(&vs, &arcs);
        let best = longest_tracks(&g, 1).unwrap();
        assert_eq!(best.len(), 1);
        assert_eq!(best[0].len(), 5);
        assert!(best[0].vertices.iter().all(|v| v.label == 1));
        assert_eq!(longest_tracks(&g, 2).unwrap()[1].len(), 3);
    }

    #[test]
    fn ties_prefer_earlier_start_then_smaller_label() {
        let g = graph(
            &[(0, 2), (1, 2), (1, 1), (2, 1), (0, 3), (1, 3)],
            &[(0, 2, 2), (1, 1, 1), (0, 3, 3)],
        );
        let tracks = longest_tracks(&g, 3).unwrap();
        let heads: Vec<_> = tracks.iter().map(|t| (t.start_t(), t.vertices[0].label)).collect();
        assert_eq!(heads, vec![(0, 2), (0, 3), (1, 1)]);
    }

    #[test]
    fn empty_graph_and_zero_k() {
        let g = graph(&[], &[]);
        assert!(longest_tracks(&g, 1).unwrap().is_empty());
        assert!(longest_tracks(&g, 0).is_err());
    }

    #[test]
    fn json_schema() {
        let g = graph(&[(0, 1), (1, 1)], &[(0, 1, 1)]);
        let v: Value = serde_json::from_str(&g.to_json().unwrap()).unwrap();
        assert_eq!(v["arcs"][0], json!({"fromT": 0, "fromLabel": 1, "toLabel": 1}));
        let keys: Vec<_> = v["vertices"][0].as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, vec!["centroid", "depthRange", "label", "t", "voxelCount"]);
        let fc = tracks_geojson(&g, &longest_tracks(&g, 1).unwrap());
        assert_eq!(fc["features"][0]["geometry"]["coordinates"].as_array().unwrap().len(), 2);
    }
}
