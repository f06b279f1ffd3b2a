use ndarray::Array3;
use ocean_core::io::{write_netcdf_classic, write_raw, ClipSpec};
use ocean_core::profile::{needle, profile_csv, sample_needle, select_depth_interval};
use ocean_core::synthetic::{synthetic_dataset, SyntheticSpec, VARIABLES};
use ocean_core::{Dataset, Grid4D, ScalarVolume};
use proptest::prelude::*;
use std::sync::Arc;

fn small_spec() -> SyntheticSpec {
    SyntheticSpec {
        steps: 2,
        depths: 5,
        ny: 9,
        nx: 11,
        ..SyntheticSpec::standard()
    }
}

fn names() -> Vec<String> {
    VARIABLES.iter().map(|s| s.to_string()).collect()
}

/// Every variable and step of `b` equals `a` rounded to float32, NaN for NaN.
fn assert_f32_copy(a: &Dataset, b: &Dataset) {
    assert_eq!(a.grid().shape(), b.grid().shape());
    assert_eq!(a.grid().depth().coords(), b.grid().depth().coords());
    assert_eq!(a.grid().lat().coords(), b.grid().lat().coords());
    assert_eq!(a.grid().lon().coords(), b.grid().lon().coords());
    for v in VARIABLES {
        for t in 0..a.steps() {
            let (x, y) = (a.load(t, v).unwrap(), b.load(t, v).unwrap());
            for (p, q) in x.values().iter().zip(y.values()) {
                assert!(p.is_nan() && q.is_nan() || (*p as f32) as f64 == *q, "{v}@{t}: {p} vs {q}");
            }
        }
    }
}

#[test]
fn raw_format_round_trips() {
    let ds = synthetic_dataset(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let header = write_raw(&ds, dir.path(), None).unwrap();
    assert_f32_copy(&ds, &Dataset::open_raw(&header).unwrap());
}

#[test]
fn netcdf_round_trips() {
    let ds = synthetic_dataset(&small_spec()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ocean.nc");
    assert!(write_netcdf_classic(&ds, &path, &names()).unwrap() > 0);
    assert_f32_copy(&ds, &Dataset::open_netcdf(&path, &names(), &ClipSpec::everything()).unwrap());
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert!(Dataset::open_raw(dir.path().join("header.json")).unwrap_err().is_io());
    let err = Dataset::open_netcdf(dir.path().join("none.nc"), &names(), &ClipSpec::everything()).unwrap_err();
    assert!(err.is_io());
}

#[test]
fn clipping_keeps_the_requested_box() {
    let ds = synthetic_dataset(&small_spec()).unwrap();
    let lat = ds.grid().lat().coords().to_vec();
    let lon = ds.grid().lon().coords().to_vec();
    let clip = ClipSpec {
        lon_min: lon[2],
        lon_max: lon[6],
        lat_min: lat[1],
        lat_max: lat[4],
        max_depth: ds.grid().depth().coords()[2],
        time_range: Some((1, 1)),
    };
    let clipped = synthetic_dataset(&small_spec()).unwrap().clip(&clip).unwrap();
    assert_eq!(clipped.grid().shape(), [1, 3, 4, 5]);
    let full = ds.load(1, "salinity").unwrap();
    let part = clipped.load(0, "salinity").unwrap();
    for ((k, i, j), v) in part.values().indexed_iter() {
        let w = full.values()[[k, i + 1, j + 2]];
        assert!(v.is_nan() && w.is_nan() || *v == w);
    }
}

#[test]
fn needles_outside_the_grid_are_rejected() {
    let ds = synthetic_dataset(&small_spec()).unwrap();
    let err = sample_needle(&ds, 0.0, 0.0, &names(), 0..1).unwrap_err();
    assert!(err.is_validation());
}

#[test]
fn profiles_cover_every_step_and_field() {
    let ds = synthetic_dataset(&small_spec()).unwrap();
    let (lon, lat) = (ds.grid().lon().coords()[5] + 0.01, ds.grid().lat().coords()[4] + 0.02);
    let fields = vec!["temperature".to_string(), "salinity".to_string()];
    let p = sample_needle(&ds, lon, lat, &fields, 0..2).unwrap();
    assert_eq!(p.series.len(), 4);
    assert_eq!((p.series[1].t, p.series[1].field.as_str()), (0, "salinity"));
    let depths = ds.grid().depth().coords();
    let sel = select_depth_interval(&p, &[(depths[1], depths[2])]).unwrap();
    assert!(sel.series.iter().all(|s| s.depths == depths[1..=2]));
    let csv = profile_csv(&sel);
    assert_eq!(csv.lines().count(), 1 + 4 * 2);
    assert!(select_depth_interval(&p, &[(5.0, 1.0)]).unwrap_err().is_validation());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// Bilinear needles reproduce any field linear in lon and lat exactly.
    #[test]
    fn needles_are_exact_on_linear_fields(
        a in -5.0f64..5.0, b in -5.0f64..5.0, c in -5.0f64..5.0,
        x in 0.0f64..7.0, y in 0.0f64..5.0,
    ) {
        let g = Arc::new(Grid4D::cartesian(1, vec![1.0, 2.0, 4.0], (0.0, 1.0, 6), (0.0, 1.0, 8)).unwrap());
        let vol = ScalarVolume::from_fn(g, 0, |d, lat, lon| a * lon + b * lat + c * d).unwrap();
        let n = needle(&vol, x, y).unwrap();
        for (v, d) in n.iter().zip([1.0, 2.0, 4.0]) {
            prop_assert!((v - (a * x + b * y + c * d)).abs() < 1e-9);
        }
    }

    #[test]
    fn land_corners_poison_samples(i in 0usize..5, j in 0usize..7) {
        let g = Arc::new(Grid4D::cartesian(1, vec![1.0], (0.0, 1.0, 6), (0.0, 1.0, 8)).unwrap());
        let mut values = Array3::from_elem((1, 6, 8), 1.0);
        values[[0, i, j]] = f64::NAN;
        let vol = ScalarVolume::new(g, 0, values).unwrap();
        prop_assert!(needle(&vol, j as f64 + 0.5, i as f64 + 0.5).unwrap()[0].is_nan());
    }
}
