//! Minimal GeoJSON builders for the overlay files.

use serde_json::{json, Value};

/// A `LineString` feature; `coords` are `[lon, lat]` or `[lon, lat, depth]`.
pub fn line_feature(coords: Vec<Vec<f64>>, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "LineString", "coordinates": coords },
        "properties": properties,
    })
}

pub fn point_feature(coord: Vec<f64>, properties: Value) -> Value {
    json!({
        "type": "Feature",
        "geometry": { "type": "Point", "coordinates": coord },
        "properties": properties,
    })
}

/// At most `max` (≥ 2) evenly spaced items of `items`, always keeping the
/// first and last, so long polylines stay light in overlay files.
pub fn decimate<T: Clone>(items: &[T], max: usize) -> Vec<T> {
    let max = max.max(2);
    if items.len() <= max {
        return items.to_vec();
    }
    let last = items.len() - 1;
    (0..max).map(|i| items[i * last / (max - 1)].clone()).collect()
}

pub fn feature_collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}
