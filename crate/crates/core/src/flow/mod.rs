//! Seed placement and integral curves (streamlines and pathlines).

mod integrate;
mod seeds;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use integrate::{
    pathlines, preload_velocity, streamline, streamlines, PathlineSeries, StopReason,
};
pub(crate) use integrate::{trace_slice, Vec2};
pub use seeds::{place_seeds, place_seeds_uniform, place_seeds_weighted, Region, SeedSpec, SeedStrategy};

use crate::geojson;
use crate::grid::{Metric, EARTH_RADIUS_M};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub lon: f64,
    pub lat: f64,
    pub depth: f64,
}

impl Point {
    pub fn new(lon: f64, lat: f64, depth: f64) -> Self {
        Point { lon, lat, depth }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Direction {
    #[default]
    Forward,
    Backward,
    Both,
}

impl Direction {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "forward" => Ok(Direction::Forward),
            "backward" => Ok(Direction::Backward),
            "both" => Ok(Direction::Both),
            other => Err(Error::InvalidParameter(format!("unknown direction '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct IntegrationParams {
    /// Arc length per step in coordinate units (degrees on spherical grids)
    /// for streamlines; time per step in time-axis units for pathlines.
    pub step_size: f64,
    pub max_steps: usize,
    pub direction: Direction,
    /// Integration stops where the speed (m/s) drops below this.
    pub termination_speed: f64,
}

impl Default for IntegrationParams {
    fn default() -> Self {
        IntegrationParams {
            step_size: 0.02,
            max_steps: 2000,
            direction: Direction::Forward,
            termination_speed: 1e-6,
        }
    }
}

impl IntegrationParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "step size must be positive, got {}",
                self.step_size
            )));
        }
        if self.max_steps == 0 {
            return Err(Error::InvalidParameter("max steps must be at least 1".into()));
        }
        if !(self.termination_speed >= 0.0) {
            return Err(Error::InvalidParameter("termination speed must be non-negative".into()));
        }
        Ok(())
    }
}

/// An integral curve. `speeds` holds the velocity magnitude (m/s) at each point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Polyline {
    pub seed_index: usize,
    pub points: Vec<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<Vec<f64>>,
    pub speeds: Vec<f64>,
    pub stop: StopReason,
}

impl Polyline {
    /// Length in metres on spherical grids, coordinate units on Cartesian ones.
    pub fn length(&self, metric: Metric) -> f64 {
        self.points
            .windows(2)
            .map(|w| segment_length(w[0], w[1], metric))
            .sum()
    }

    pub fn mean_speed(&self) -> f64 {
        if self.speeds.is_empty() {
            0.0
        } else {
            self.speeds.iter().sum::<f64>() / self.speeds.len() as f64
        }
    }
}

pub(crate) fn segment_length(a: Point, b: Point, metric: Metric) -> f64 {
    match metric {
        Metric::Cartesian => (b.lon - a.lon).hypot(b.lat - a.lat),
        Metric::Spherical => {
            let mid = (0.5 * (a.lat + b.lat)).to_radians();
            let dx = (b.lon - a.lon).to_radians() * mid.cos();
            let dy = (b.lat - a.lat).to_radians();
            EARTH_RADIUS_M * dx.hypot(dy)
        }
    }
}

/// GeoJSON LineStrings with `{seedIndex, length, meanSpeed}` properties.
pub fn polylines_geojson(lines: &[Polyline], metric: Metric) -> Value {
    let features = lines
        .iter()
        .map(|l| {
            geojson::line_feature(
                l.points.iter().map(|p| vec![p.lon, p.lat, p.depth]).collect(),
                json!({
                    "seedIndex": l.seed_index,
                    "length": l.length(metric),
                    "meanSpeed": l.mean_speed(),
                }),
            )
        })
        .collect();
    geojson::feature_collection(features)
}
