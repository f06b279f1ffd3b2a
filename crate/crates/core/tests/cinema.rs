use ndarray::Array2;
use ocean_core::cinema::{
    compression_report, decode_float_image, encode_float_image, generate_database, image_to_slice, slice_to_image,
    CinemaIndex, CinemaSpec, Orientation,
};
use ocean_core::synthetic::{synthetic_dataset, SyntheticSpec};
use proptest::prelude::*;

fn special_bits() -> impl Strategy<Value = u32> {
    prop_oneof![
        4 => any::<u32>(),
        1 => Just(f32::NAN.to_bits()),
        1 => Just(0x7fc0_0001u32),
        1 => Just(0xffff_ffffu32),
        1 => Just(f32::INFINITY.to_bits()),
        1 => Just(f32::NEG_INFINITY.to_bits()),
        1 => 1u32..0x0080_0000,
        1 => (1u32..0x0080_0000).prop_map(|m| m | 0x8000_0000),
        1 => Just(0x8000_0000u32),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn float_images_round_trip_bit_exact(
        (h, w, bits) in (1usize..40, 1usize..40).prop_flat_map(|(h, w)| {
            (Just(h), Just(w), prop::collection::vec(special_bits(), h * w))
        })
    ) {
        let img = Array2::from_shape_vec((h, w), bits.iter().map(|&b| f32::from_bits(b)).collect()).unwrap();
        let back = decode_float_image(&encode_float_image(img.view()).unwrap()).unwrap();
        prop_assert_eq!(back.dim(), (h, w));
        for (a, b) in img.iter().zip(back.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn slices_flip_north_up(h in 1usize..10, w in 1usize..10) {
        let s = Array2::from_shape_fn((h, w), |(i, j)| (i * 100 + j) as f64);
        let img = slice_to_image(s.view());
        prop_assert_eq!(img[[0, 0]] as f64, s[[h - 1, 0]]);
        prop_assert_eq!(image_to_slice(img.view()), s);
    }
}

#[test]
fn speed_recomputes_exactly_from_stored_velocity() {
    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let index = generate_database(&ds, &CinemaSpec::new(&["u", "v", "speed"]), 0..2, dir.path()).unwrap();
    let mut compared = 0;
    for row in index.rows.iter().filter(|r| r.field == "speed") {
        let speed = index.image(row).unwrap();
        let u = index.image(index.find(row.time, row.level, "u").unwrap()).unwrap();
        let v = index.image(index.find(row.time, row.level, "v").unwrap()).unwrap();
        for ((s, u), v) in speed.iter().zip(u.iter()).zip(v.iter()) {
            let (u, v) = (*u as f64, *v as f64);
            let r = (u * u + v * v).sqrt() as f32;
            assert_eq!(s.to_bits(), r.to_bits(), "u={u} v={v}");
            compared += 1;
        }
    }
    assert_eq!(compared, 2 * 32 * 32 * 32);
}

#[test]
fn stored_variables_match_the_dataset_in_f32() {
    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let index = generate_database(&ds, &CinemaSpec::new(&["salinity"]), 3..4, dir.path()).unwrap();
    let field = ds.load(3, "salinity").unwrap();
    for (k, &depth) in ds.grid().depth().coords().iter().enumerate() {
        let img = index.image(index.find(3, depth, "salinity").unwrap()).unwrap();
        let expect = slice_to_image(field.slice(k));
        for (a, b) in img.iter().zip(expect.iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }
}

#[test]
fn index_and_metadata_describe_the_database() {
    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spec = CinemaSpec::new(&["temperature", "vorticity"]);
    let index = generate_database(&ds, &spec, 0..3, dir.path()).unwrap();
    assert_eq!(index.rows.len(), 3 * 32 * 2);
    let csv = std::fs::read_to_string(dir.path().join("data.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "time,depth,field,FILE");
    let reread = CinemaIndex::read(dir.path()).unwrap();
    assert_eq!(reread, index);
    assert_eq!(reread.orientation, Orientation::Depth);
    let report = compression_report(&ds, &index).unwrap();
    assert!(report.database_bytes > 0);
}

#[test]
fn vertical_orientation_has_one_image_per_row() {
    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let spec = CinemaSpec {
        orientation: Orientation::Vertical,
        ..CinemaSpec::new(&["salinity"])
    };
    let index = generate_database(&ds, &spec, 0..1, dir.path()).unwrap();
    assert_eq!(index.rows.len(), 32);
    let img = index.image(&index.rows[0]).unwrap();
    assert_eq!(img.dim(), (32, 32));
}

#[test]
fn unknown_fields_are_rejected_before_writing() {
    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("db");
    let err = generate_database(&ds, &CinemaSpec::new(&["nope"]), 0..1, &out).unwrap_err();
    assert!(err.is_validation());
    assert!(!out.exists());
}
