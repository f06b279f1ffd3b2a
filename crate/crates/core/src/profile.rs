//! Vertical "needle" profiles through a dataset.

use std::fmt::Write as _;
use std::ops::Range;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::grid::{bilinear, ScalarVolume};
use crate::io::Dataset;
use crate::{Error, Result};

/// One field at one time step along the needle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProfileSeries {
    pub field: String,
    pub t: usize,
    pub time: f64,
    /// Strictly increasing depths in metres.
    pub depths: Vec<f64>,
    /// NaN (null in JSON) on land or below the sea floor.
    pub values: Vec<f64>,
    /// Every sample is NaN.
    pub land: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct DepthProfile {
    pub lon: f64,
    pub lat: f64,
    pub series: Vec<ProfileSeries>,
    /// Depth intervals the profile was restricted to, if any.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<Vec<(f64, f64)>>,
}

/// Bilinear samples of `volume` at every depth level below `(lon, lat)`.
/// A sample touching a NaN corner is NaN.
pub fn needle(volume: &ScalarVolume, lon: f64, lat: f64) -> Result<Vec<f64>> {
    let grid = volume.grid();
    let (Some(sy), Some(sx)) = (grid.lat().locate(lat), grid.lon().locate(lon)) else {
        return Err(Error::OutOfDomain(format!(
            "needle ({lon}, {lat}) is outside lon [{}, {}], lat [{}, {}]",
            grid.lon().first(),
            grid.lon().last(),
            grid.lat().first(),
            grid.lat().last()
        )));
    };
    Ok((0..grid.depth().len())
        .map(|k| bilinear(volume.slice(k), sy, sx))
        .collect())
}

/// Samples `fields` along the vertical line at `(lon, lat)` for every step in
/// `time`. Series are ordered by time step, then by the order of `fields`.
pub fn sample_needle(
    dataset: &Dataset,
    lon: f64,
    lat: f64,
    fields: &[String],
    time: Range<usize>,
) -> Result<DepthProfile> {
    let grid = dataset.grid();
    if !(grid.lat().contains(lat) && grid.lon().contains(lon)) {
        // Checked up front so an empty time range still reports it.
        return Err(Error::OutOfDomain(format!("needle ({lon}, {lat}) is outside the grid")));
    }
    if time.end > dataset.steps() {
        return Err(Error::Bounds {
            what: "time axis",
            index: time.end.saturating_sub(1),
            len: dataset.steps(),
        });
    }
    for f in fields {
        if !dataset.has_variable(f) {
            return Err(Error::NotFound(format!("variable '{f}'")));
        }
    }
    let depths = grid.depth().coords().to_vec();
    let jobs: Vec<(usize, &String)> = time.flat_map(|t| fields.iter().map(move |f| (t, f))).collect();
    let series = jobs
        .par_iter()
        .map(|&(t, field)| {
            let values = needle(&dataset.load(t, field)?, lon, lat)?;
            Ok(ProfileSeries {
                field: field.clone(),
                t,
                time: grid.time().coords()[t],
                depths: depths.clone(),
                land: values.iter().all(|v| v.is_nan()),
                values,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DepthProfile {
        lon,
        lat,
        series,
        selection: None,
    })
}

/// Restricts every series to samples whose depth lies in one of the
/// inclusive `intervals`. No overlap yields empty series, not an error.
pub fn select_depth_interval(profile: &DepthProfile, intervals: &[(f64, f64)]) -> Result<DepthProfile> {
    if let Some(&(a, b)) = intervals.iter().find(|(a, b)| !(a <= b)) {
        return Err(Error::InvalidRange(format!("depth interval [{a}, {b}] is reversed")));
    }
    let keep = |d: f64| intervals.iter().any(|&(a, b)| a <= d && d <= b);
    let series = profile
        .series
        .iter()
        .map(|s| {
            let (depths, values): (Vec<f64>, Vec<f64>) = s
                .depths
                .iter()
                .zip(&s.values)
                .filter(|(d, _)| keep(**d))
                .map(|(&d, &v)| (d, v))
                .unzip();
            ProfileSeries {
                field: s.field.clone(),
                t: s.t,
                time: s.time,
                land: s.land,
                depths,
                values,
            }
        })
        .collect();
    Ok(DepthProfile {
        lon: profile.lon,
        lat: profile.lat,
        series,
        selection: Some(intervals.to_vec()),
    })
}

/// `time,depth,field,value` rows, time being the step index.
pub fn profile_csv(profile: &DepthProfile) -> String {
    let mut out = String::from("time,depth,field,value\n");
    for s in &profile.series {
        for (d, v) in s.depths.iter().zip(&s.values) {
            let _ = writeln!(out, "{},{},{},{}", s.t, d, s.field, v);
        }
    }
    out
}

pub fn profile_json(profile: &DepthProfile) -> Result<String> {
    Ok(serde_json::to_string_pretty(profile)?)
}
