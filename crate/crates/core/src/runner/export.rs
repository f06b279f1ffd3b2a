//! The bundle consumed by the browser viewer: the float-image database plus
//! track, eddy and profile overlays in one directory.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{write_json, write_text};
use crate::cinema::{generate_database, CinemaSpec, Orientation};
use crate::eddy::{detect_eddies, eddies_geojson, EddyDescriptor, EddyParams};
use crate::fronts::{build_track_graph, longest_tracks, tracks_geojson, IsovolumeSpec, DEFAULT_NEIGHBOURHOOD};
use crate::geojson;
use crate::io::{resolve_time_range, Dataset};
use crate::profile::{sample_needle, DepthProfile};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct ExportParams {
    /// Image fields; empty means every dataset variable plus `speed` when
    /// the velocity components exist.
    pub fields: Vec<String>,
    pub time_range: Option<(usize, usize)>,
    pub isovolume: IsovolumeSpec,
    pub neighbourhood: usize,
    pub top_k: usize,
    pub eddy: EddyParams,
    pub velocity: (String, String),
    /// (lon, lat) needle positions; empty means the domain centre.
    pub needles: Vec<(f64, f64)>,
}

impl Default for ExportParams {
    fn default() -> Self {
        ExportParams {
            fields: Vec::new(),
            time_range: None,
            isovolume: IsovolumeSpec::salinity("salinity"),
            neighbourhood: DEFAULT_NEIGHBOURHOOD,
            top_k: 5,
            eddy: EddyParams::default(),
            velocity: ("u".into(), "v".into()),
            needles: Vec::new(),
        }
    }
}

impl ExportParams {
    pub fn validate(&self) -> Result<()> {
        self.isovolume.validate()?;
        crate::fronts::check_neighbourhood(self.neighbourhood)?;
        self.eddy.validate()?;
        if self.top_k == 0 {
            return Err(Error::InvalidParameter("topK must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExportSummary {
    pub images: usize,
    pub tracks: usize,
    pub eddies: usize,
    pub profiles: usize,
}

/// Writes `data.csv`, `metadata.json`, the PNGs, `tracks.geojson`,
/// `track_graph.json`, `eddies.geojson`, `eddies.json` and `profiles.json`
/// into `dir`. Overlays whose inputs are missing (no isovolume variable, no
/// velocity, fewer than two steps) are written empty.
pub fn viewer_export(dataset: &Dataset, params: &ExportParams, dir: impl AsRef<Path>) -> Result<ExportSummary> {
    params.validate()?;
    let dir = dir.as_ref();
    let time = resolve_time_range(dataset, params.time_range)?;
    let (u, v) = (&params.velocity.0, &params.velocity.1);
    let has_velocity = dataset.has_variable(u) && dataset.has_variable(v);

    let fields = if params.fields.is_empty() {
        let mut f = dataset.variables().to_vec();
        if has_velocity && !dataset.has_variable("speed") {
            f.push("speed".into());
        }
        f
    } else {
        params.fields.clone()
    };
    let spec = CinemaSpec {
        fields,
        orientation: Orientation::Depth,
        velocity: params.velocity.clone(),
    };
    let index = generate_database(dataset, &spec, time.clone(), dir)?;

    let mut tracks = 0;
    let tracks_json = if dataset.has_variable(&params.isovolume.variable) && time.len() >= 2 {
        let graph = build_track_graph(dataset, &params.isovolume, params.neighbourhood, time.clone())?;
        let best = longest_tracks(&graph, params.top_k)?;
        tracks = best.len();
        write_text(&dir.join("track_graph.json"), &graph.to_json()?)?;
        tracks_geojson(&graph, &best)
    } else {
        geojson::feature_collection(Vec::new())
    };
    write_json(&dir.join("tracks.geojson"), &tracks_json)?;

    let eddies: Vec<EddyDescriptor> = if has_velocity {
        time.clone()
            .into_par_iter()
            .map(|t| detect_eddies(&dataset.load_velocity(t, u, v, None)?, &params.eddy))
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .flatten()
            .collect()
    } else {
        Vec::new()
    };
    write_json(&dir.join("eddies.geojson"), &eddies_geojson(&eddies))?;
    write_json(&dir.join("eddies.json"), &eddies)?;

    let grid = dataset.grid();
    let needles = if params.needles.is_empty() {
        let mid = |c: &[f64]| c[c.len() / 2];
        vec![(mid(grid.lon().coords()), mid(grid.lat().coords()))]
    } else {
        params.needles.clone()
    };
    let vars = dataset.variables().to_vec();
    let profiles = needles
        .iter()
        .map(|&(lon, lat)| sample_needle(dataset, lon, lat, &vars, time.clone()))
        .collect::<Result<Vec<DepthProfile>>>()?;
    let profiles_json: Value = serde_json::to_value(&profiles)?;
    write_json(&dir.join("profiles.json"), &profiles_json)?;

    Ok(ExportSummary {
        images: index.rows.len(),
        tracks,
        eddies: eddies.len(),
        profiles: profiles.len(),
    })
}
