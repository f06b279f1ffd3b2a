//! Surface-front extraction and tracking.
//!
//! Per time step: isovolume → inner boundary (3×3 mean strictly between
//! zero and one) → north-facing voxels → n×n×2 dilation → 26-connected labels
//! multiplied back onto the north-facing voxels. Consecutive steps are linked by a
//! radius-n disk overlap test into a track graph.

mod label;
mod morphology;
mod track;

use ndarray::{Array3, ArrayView3, Zip};
use serde::{Deserialize, Serialize};

pub use label::{label_components, relabel_in_raster_order, Labeling};
pub use morphology::{
    boundary_grid, check_neighbourhood, dilate, extract_isovolume, north_facing, north_facing_boundary,
    Comparison, IsovolumeSpec,
};
pub use track::{
    build_track_graph, correspondence_arcs, disk_offsets, longest_tracks, track_graph_from_steps,
    tracks_geojson, Track, TrackArc, TrackGraph, TrackVertexRef,
};

use crate::grid::{Grid4D, ScalarVolume};
use crate::partition::{apply_blockwise, PartitionPlan};
use crate::Result;

pub const DEFAULT_NEIGHBOURHOOD: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Centroid {
    pub lat: f64,
    pub lon: f64,
    pub depth: f64,
}

/// One connected north-facing front at one time step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SurfaceFront {
    pub t: usize,
    pub label: u32,
    pub centroid: Centroid,
    pub voxel_count: usize,
    /// Shallowest and deepest depth in metres.
    pub depth_range: [f64; 2],
    /// `(depth, lat, lon)` indices in raster order.
    #[serde(skip)]
    pub voxels: Vec<[usize; 3]>,
}

/// Labelled fronts of one time step.
#[derive(Debug, Clone)]
pub struct FrontStep {
    pub t: usize,
    pub labeling: Labeling,
    pub fronts: Vec<SurfaceFront>,
}

/// Groups north-facing voxels into fronts: segments whose n×n×2 dilations
/// touch (26-connectivity) share a label.
pub fn group_fronts(north: ArrayView3<'_, bool>, n: usize) -> Result<Labeling> {
    let dilated = dilate(north, n)?;
    let components = label_components(dilated.view());
    let mut labels = Array3::<u32>::zeros(north.dim());
    Zip::from(&mut labels)
        .and(&north)
        .and(&components.labels)
        .for_each(|l, &set, &c| {
            if set {
                *l = c;
            }
        });
    let count = relabel_in_raster_order(&mut labels);
    Ok(Labeling { labels, count })
}

/// Summarises each label of `labeling` as a [`SurfaceFront`].
pub fn fronts_of(labeling: &Labeling, grid: &Grid4D, t: usize) -> Vec<SurfaceFront> {
    let mut voxels: Vec<Vec<[usize; 3]>> = vec![Vec::new(); labeling.count as usize];
    for ((k, i, j), &l) in labeling.labels.indexed_iter() {
        if l > 0 {
            voxels[l as usize - 1].push([k, i, j]);
        }
    }
    let (depth, lat, lon) = (grid.depth().coords(), grid.lat().coords(), grid.lon().coords());
    voxels
        .into_iter()
        .enumerate()
        .map(|(idx, vox)| {
            let count = vox.len() as f64;
            let (mut sd, mut sy, mut sx) = (0.0, 0.0, 0.0);
            let (mut dmin, mut dmax) = (f64::INFINITY, f64::NEG_INFINITY);
            for &[k, i, j] in &vox {
                sd += depth[k];
                sy += lat[i];
                sx += lon[j];
                dmin = dmin.min(depth[k]);
                dmax = dmax.max(depth[k]);
            }
            SurfaceFront {
                t,
                label: idx as u32 + 1,
                centroid: Centroid {
                    lat: sy / count,
                    lon: sx / count,
                    depth: sd / count,
                },
                voxel_count: vox.len(),
                depth_range: [dmin, dmax],
                voxels: vox,
            }
        })
        .collect()
}

/// Runs the whole per-step pipeline on one salinity (or other scalar) volume.
pub fn extract_fronts(field: &ScalarVolume, spec: &IsovolumeSpec, n: usize) -> Result<FrontStep> {
    spec.validate()?;
    check_neighbourhood(n)?;
    let iso = extract_isovolume(field.values().view(), spec);
    let north = north_facing_boundary(iso.view());
    finish_step(field, north, n)
}

/// Like [`extract_fronts`], but the per-slice filters run block by block under
/// `plan`, each block seeing only its ghosted sub-volume.
pub fn extract_fronts_partitioned(
    field: &ScalarVolume,
    spec: &IsovolumeSpec,
    n: usize,
    plan: &PartitionPlan,
) -> Result<FrontStep> {
    spec.validate()?;
    check_neighbourhood(n)?;
    let north = apply_blockwise(plan, field.values().view(), |sub| {
        let iso = extract_isovolume(sub, spec);
        north_facing_boundary(iso.view())
    })?;
    finish_step(field, north, n)
}

fn finish_step(field: &ScalarVolume, north: Array3<bool>, n: usize) -> Result<FrontStep> {
    let labeling = group_fronts(north.view(), n)?;
    let fronts = fronts_of(&labeling, field.grid(), field.t());
    Ok(FrontStep {
        t: field.t(),
        labeling,
        fronts,
    })
}
