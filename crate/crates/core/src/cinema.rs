//! Float-image database: one lossless PNG per (time, depth, field) slice and a
//! `data.csv` index.
//!
//! Each pixel's RGBA bytes are the little-endian IEEE-754 bits of a float32,
//! so decoding is bit-exact for every value including NaN and infinities.
//! Images are stored north-up: the first row is the northernmost latitude.

use std::fmt::Write as _;
use std::fs;
use std::io::Cursor;
use std::ops::Range;
use std::path::{Path, PathBuf};

use ndarray::{Array2, Array3, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::grid::{derived_field, DerivedFieldKind, ScalarVolume, VectorVolume};
use crate::io::Dataset;
use crate::{Error, Result};

pub const ENCODER: &str = "f32le-rgba";
pub const FORMAT_VERSION: u32 = 1;
pub const INDEX_FILE: &str = "data.csv";
pub const METADATA_FILE: &str = "metadata.json";

fn png_err(e: impl std::fmt::Display) -> Error {
    Error::Png(e.to_string())
}

/// Encodes `pixels` (row 0 at the top) as an RGBA8 PNG carrying the raw
/// float32 bytes.
pub fn encode_float_image(pixels: ArrayView2<'_, f32>) -> Result<Vec<u8>> {
    let (h, w) = pixels.dim();
    if h == 0 || w == 0 {
        return Err(Error::InvalidInput("cannot encode an empty image".into()));
    }
    let mut data = Vec::with_capacity(h * w * 4);
    for v in pixels.iter() {
        data.extend_from_slice(&v.to_le_bytes());
    }
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, w as u32, h as u32);
        enc.set_color(png::ColorType::Rgba);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(png_err)?;
        writer.write_image_data(&data).map_err(png_err)?;
        writer.finish().map_err(png_err)?;
    }
    Ok(out)
}

/// Inverse of [`encode_float_image`].
pub fn decode_float_image(bytes: &[u8]) -> Result<Array2<f32>> {
    let mut reader = png::Decoder::new(Cursor::new(bytes)).read_info().map_err(png_err)?;
    let info = reader.info();
    if info.color_type != png::ColorType::Rgba || info.bit_depth != png::BitDepth::Eight {
        return Err(Error::Format(format!(
            "float image must be 8-bit RGBA, got {:?} {:?}",
            info.color_type, info.bit_depth
        )));
    }
    let (w, h) = (info.width as usize, info.height as usize);
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| Error::Format("PNG is too large".into()))?;
    let mut buf = vec![0u8; size];
    let frame = reader.next_frame(&mut buf).map_err(png_err)?;
    let buf = &buf[..frame.buffer_size()];
    let values = buf
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    Array2::from_shape_vec((h, w), values).map_err(|e| Error::Format(e.to_string()))
}

/// A lat-major slice (row = latitude index, increasing northwards) as a
/// north-up float32 image.
pub fn slice_to_image(slice: ArrayView2<'_, f64>) -> Array2<f32> {
    let mut img = slice.mapv(|v| v as f32);
    img.invert_axis(Axis(0));
    img
}

/// Inverse of [`slice_to_image`], widened back to f64.
pub fn image_to_slice(image: ArrayView2<'_, f32>) -> Array2<f64> {
    let mut s = image.mapv(f64::from);
    s.invert_axis(Axis(0));
    s
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub enum Orientation {
    /// One lat-lon image per depth level.
    #[default]
    Depth,
    /// One depth-lon image per latitude row, surface at the top.
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CinemaSpec {
    /// Dataset variables or derived field names (`speed`, `vorticity`, …).
    pub fields: Vec<String>,
    #[serde(default)]
    pub orientation: Orientation,
    /// Velocity components used for derived fields.
    #[serde(default = "default_velocity")]
    pub velocity: (String, String),
}

fn default_velocity() -> (String, String) {
    ("u".into(), "v".into())
}

impl CinemaSpec {
    pub fn new(fields: &[&str]) -> Self {
        CinemaSpec {
            fields: fields.iter().map(|s| s.to_string()).collect(),
            orientation: Orientation::Depth,
            velocity: default_velocity(),
        }
    }
}

/// One row of `data.csv`. For vertical databases `level` is a latitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CinemaRow {
    pub time: usize,
    pub level: f64,
    pub field: String,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CinemaIndex {
    pub dir: PathBuf,
    pub orientation: Orientation,
    pub fields: Vec<String>,
    pub rows: Vec<CinemaRow>,
}

impl CinemaIndex {
    /// Reads the `data.csv` and `metadata.json` written by [`generate_database`].
    pub fn read(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref().to_path_buf();
        let meta_path = dir.join(METADATA_FILE);
        let meta: serde_json::Value =
            serde_json::from_slice(&fs::read(&meta_path).map_err(|e| Error::io(&meta_path, e))?)?;
        let orientation: Orientation = serde_json::from_value(meta["orientation"].clone())?;
        let fields: Vec<String> = serde_json::from_value(meta["fields"].clone())?;
        let csv_path = dir.join(INDEX_FILE);
        let text = fs::read_to_string(&csv_path).map_err(|e| Error::io(&csv_path, e))?;
        let mut rows = Vec::new();
        for (n, line) in text.lines().enumerate().skip(1) {
            let bad = || Error::Format(format!("{}:{}: malformed row '{line}'", csv_path.display(), n + 1));
            let cols: Vec<&str> = line.split(',').collect();
            let [t, level, field, file] = cols[..] else {
                return Err(bad());
            };
            rows.push(CinemaRow {
                time: t.parse().map_err(|_| bad())?,
                level: level.parse().map_err(|_| bad())?,
                field: field.to_string(),
                file: file.to_string(),
            });
        }
        Ok(CinemaIndex {
            dir,
            orientation,
            fields,
            rows,
        })
    }

    /// Decodes the image of `row` in its stored (north-up) orientation.
    pub fn image(&self, row: &CinemaRow) -> Result<Array2<f32>> {
        let path = self.dir.join(&row.file);
        decode_float_image(&fs::read(&path).map_err(|e| Error::io(&path, e))?)
    }

    pub fn find(&self, time: usize, level: f64, field: &str) -> Option<&CinemaRow> {
        self.rows
            .iter()
            .find(|r| r.time == time && r.level == level && r.field == field)
    }

    /// Total bytes of images, index and metadata.
    pub fn bytes_on_disk(&self) -> Result<u64> {
        let mut total = 0;
        let files = self
            .rows
            .iter()
            .map(|r| self.dir.join(&r.file))
            .chain([self.dir.join(INDEX_FILE), self.dir.join(METADATA_FILE)]);
        for p in files {
            total += fs::metadata(&p).map_err(|e| Error::io(&p, e))?.len();
        }
        Ok(total)
    }
}

enum FieldSource {
    Variable(String),
    Derived(DerivedFieldKind),
}

fn resolve_fields(dataset: &Dataset, spec: &CinemaSpec) -> Result<Vec<FieldSource>> {
    let mut seen = std::collections::BTreeSet::new();
    spec.fields
        .iter()
        .map(|f| {
            if f.is_empty() || f.contains([',', '/', '\\', '\n']) {
                return Err(Error::InvalidParameter(format!("field name '{f}' cannot be used in file names")));
            }
            if !seen.insert(f.as_str()) {
                return Err(Error::InvalidParameter(format!("field '{f}' listed twice")));
            }
            if dataset.has_variable(f) {
                return Ok(FieldSource::Variable(f.clone()));
            }
            match DerivedFieldKind::parse(f) {
                Ok(DerivedFieldKind::UserScalar(_)) | Err(_) => Err(Error::NotFound(format!("variable '{f}'"))),
                Ok(kind) => {
                    for c in [&spec.velocity.0, &spec.velocity.1] {
                        if !dataset.has_variable(c) {
                            return Err(Error::NotFound(format!(
                                "variable '{c}' needed for derived field '{f}'"
                            )));
                        }
                    }
                    Ok(FieldSource::Derived(kind))
                }
            }
        })
        .collect()
}

/// Rounds to float32 precision, the precision the database stores.
fn to_f32_precision(v: &ScalarVolume) -> Result<ScalarVolume> {
    ScalarVolume::new(v.grid().clone(), v.t(), v.values().mapv(|x| x as f32 as f64))
}

fn file_name(orientation: Orientation, t: usize, level: usize, field: &str) -> String {
    match orientation {
        Orientation::Depth => format!("time{t}_depth{level}_{field}.png"),
        Orientation::Vertical => format!("time{t}_lat{level}_{field}.png"),
    }
}

fn images(values: &Array3<f64>, orientation: Orientation) -> Vec<Array2<f32>> {
    match orientation {
        Orientation::Depth => values.outer_iter().map(|s| slice_to_image(s)).collect(),
        // (depth, lon) per latitude; depth grows downwards so no flip.
        Orientation::Vertical => values
            .axis_iter(Axis(1))
            .map(|s| s.mapv(|v| v as f32))
            .collect(),
    }
}

/// Writes one image per (time step in `time`, level, field) under `out_dir`,
/// then `data.csv` and `metadata.json`. Derived fields are computed from the
/// velocity rounded to float32, so they can be recomputed exactly from the
/// stored `u`/`v` images. Output is byte-identical for any worker count.
pub fn generate_database(
    dataset: &Dataset,
    spec: &CinemaSpec,
    time: Range<usize>,
    out_dir: impl AsRef<Path>,
) -> Result<CinemaIndex> {
    let out_dir = out_dir.as_ref();
    if time.end > dataset.steps() || time.start > time.end {
        return Err(Error::InvalidRange(format!(
            "time range {}..{} outside 0..{}",
            time.start,
            time.end,
            dataset.steps()
        )));
    }
    let sources = resolve_fields(dataset, spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let grid = dataset.grid();
    let levels: Vec<f64> = match spec.orientation {
        Orientation::Depth => grid.depth().coords().to_vec(),
        Orientation::Vertical => grid.lat().coords().to_vec(),
    };
    let needs_velocity = sources.iter().any(|s| matches!(s, FieldSource::Derived(_)));

    let per_step: Vec<Vec<CinemaRow>> = time
        .clone()
        .into_par_iter()
        .map(|t| {
            let vel = if needs_velocity {
                let v = dataset.load_velocity(t, &spec.velocity.0, &spec.velocity.1, None)?;
                Some(VectorVolume::new(to_f32_precision(v.u())?, to_f32_precision(v.v())?, None)?)
            } else {
                None
            };
            let mut rows = Vec::new();
            for (src, name) in sources.iter().zip(&spec.fields) {
                let volume = match src {
                    FieldSource::Variable(v) => dataset.load(t, v)?,
                    FieldSource::Derived(kind) => derived_field(vel.as_ref().expect("velocity loaded"), kind)?,
                };
                let imgs = images(volume.values(), spec.orientation);
                let written = imgs
                    .par_iter()
                    .enumerate()
                    .map(|(level, img)| {
                        let file = file_name(spec.orientation, t, level, name);
                        let path = out_dir.join(&file);
                        fs::write(&path, encode_float_image(img.view())?).map_err(|e| Error::io(&path, e))?;
                        Ok(CinemaRow {
                            time: t,
                            level: levels[level],
                            field: name.clone(),
                            file,
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                rows.extend(written);
            }
            Ok(rows)
        })
        .collect::<Result<_>>()?;

    // Row order: time, level, field (as listed).
    let mut rows: Vec<CinemaRow> = per_step.into_iter().flatten().collect();
    let field_rank = |f: &str| spec.fields.iter().position(|x| x == f).unwrap_or(usize::MAX);
    rows.sort_by(|a, b| {
        a.time
            .cmp(&b.time)
            .then(a.level.total_cmp(&b.level))
            .then(field_rank(&a.field).cmp(&field_rank(&b.field)))
    });

    let level_col = match spec.orientation {
        Orientation::Depth => "depth",
        Orientation::Vertical => "lat",
    };
    let mut csv = format!("time,{level_col},field,FILE\n");
    for r in &rows {
        let _ = writeln!(csv, "{},{},{},{}", r.time, r.level, r.field, r.file);
    }
    let csv_path = out_dir.join(INDEX_FILE);
    fs::write(&csv_path, csv).map_err(|e| Error::io(&csv_path, e))?;

    let metadata = json!({
        "axes": {
            "time": grid.time().coords()[time.clone()],
            "depth": grid.depth().coords(),
            "lat": grid.lat().coords(),
            "lon": grid.lon().coords(),
        },
        "fields": spec.fields,
        "encoder": ENCODER,
        "version": FORMAT_VERSION,
        "orientation": spec.orientation,
        "rowOrder": match spec.orientation {
            Orientation::Depth => "northUp",
            Orientation::Vertical => "surfaceDown",
        },
        "metric": grid.metric(),
        "timeSteps": [time.start, time.end],
        "velocity": [spec.velocity.0, spec.velocity.1],
    });
    let meta_path = out_dir.join(METADATA_FILE);
    fs::write(&meta_path, serde_json::to_string_pretty(&metadata)?).map_err(|e| Error::io(&meta_path, e))?;

    Ok(CinemaIndex {
        dir: out_dir.to_path_buf(),
        orientation: spec.orientation,
        fields: spec.fields.clone(),
        rows,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct CompressionReport {
    pub database_bytes: u64,
    pub source_bytes: u64,
    /// databaseBytes / sourceBytes.
    pub ratio: f64,
    /// Reduction seen at full scale (about 750 GB to 2.6 GB), for context.
    pub reference_ratio: f64,
}

pub fn compression_report(dataset: &Dataset, index: &CinemaIndex) -> Result<CompressionReport> {
    let database_bytes = index.bytes_on_disk()?;
    let source_bytes = dataset.source_bytes();
    Ok(CompressionReport {
        database_bytes,
        source_bytes,
        ratio: if source_bytes == 0 {
            f64::NAN
        } else {
            database_bytes as f64 / source_bytes as f64
        },
        reference_ratio: 0.0035,
    })
}

#[cfg(test)]
mod tests {
    use ndarray::Array2;

    use super::*;

    #[test]
    fn special_values_round_trip() {
        let vals = [
            std::f32::consts::PI,
            f32::NAN,
            f32::INFINITY,
            f32::NEG_INFINITY,
            -0.0,
            f32::MIN_POSITIVE / 4.0,
        ];
        let img = Array2::from_shape_fn((2, 3), |(i, j)| vals[i * 3 + j]);
        let back = decode_float_image(&encode_float_image(img.view()).unwrap()).unwrap();
        for (a, b) in img.iter().zip(back.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn images_are_north_up() {
        let slice = Array2::from_shape_fn((3, 2), |(i, _)| i as f64);
        let img = slice_to_image(slice.view());
        assert_eq!(img[[0, 0]], 2.0);
        assert_eq!(image_to_slice(img.view()), slice);
    }

    #[test]
    fn rejects_other_pngs() {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, 1, 1);
            enc.set_color(png::ColorType::Grayscale);
            enc.write_header().unwrap().write_image_data(&[7]).unwrap();
        }
        assert!(matches!(decode_float_image(&out), Err(Error::Format(_))));
        assert!(decode_float_image(b"not a png").is_err());
    }
}
