//! Acceptance gate: one PASS / FAIL / BLOCKED line per criterion.
//!
//! BLOCKED means the host cannot exercise the criterion (too few cores);
//! the measurement is still taken and printed. The process fails only on
//! FAIL.

mod common;

use std::sync::Arc;
use std::time::Instant;

use common::{as_oracle, oracle_graph, read_tree};
use ndarray::Array2;
use ocean_core::cinema::{decode_float_image, encode_float_image, generate_database, CinemaSpec};
use ocean_core::eddy::{detect_eddies, detect_level, EddyParams};
use ocean_core::flow::{place_seeds_uniform, place_seeds_weighted, streamline, IntegrationParams, Point, SeedSpec};
use ocean_core::fronts::{build_track_graph, extract_fronts, extract_fronts_partitioned, IsovolumeSpec};
use ocean_core::grid::horizontal_gradients;
use ocean_core::partition::{plan_partition, Scheme};
use ocean_core::runner::{median_seconds, run, run_benchmark, BenchParams, PipelineConfig, Suite};
use ocean_core::synthetic::{
    lamb_oseen, pure_shear, pure_strain, rankine_core, solid_body, synthetic_dataset, uniform_flow, SyntheticSpec,
};
use ocean_core::{DerivedFieldKind, Grid4D, ScalarVolume, VectorVolume};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;
use statrs::distribution::{ChiSquared, ContinuousCDF};

enum Verdict {
    Pass(String),
    Fail(String),
    Blocked(String),
}

use Verdict::{Blocked, Fail, Pass};

fn check(ok: bool, detail: String) -> Verdict {
    if ok {
        Pass(detail)
    } else {
        Fail(detail)
    }
}

fn cores() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

fn front_oracle() -> Verdict {
    let mut worst = 0.0f64;
    for (depths, n) in [(4, 1), (8, 3), (16, 3), (16, 5)] {
        let spec = SyntheticSpec {
            depths,
            ..SyntheticSpec::standard()
        };
        let ds = synthetic_dataset(&spec).unwrap();
        let steps: Vec<_> = (0..ds.steps()).map(|t| ds.load(t, "salinity").unwrap().into_values()).collect();
        let start = Instant::now();
        let graph = build_track_graph(&ds, &IsovolumeSpec::salinity("salinity"), n, 0..ds.steps()).unwrap();
        worst = worst.max(start.elapsed().as_secs_f64());
        let oracle = oracle_graph(&steps, 35.0, n);
        if as_oracle(&graph) != oracle {
            return Fail(format!("graph differs from brute force on {depths}×32×32×6, n={n}"));
        }
    }
    check(worst < 10.0, format!("4 grids up to 16×32×32×6 isomorphic; slowest {worst:.2}s (< 10s)"))
}

fn worker_determinism() -> Verdict {
    let trees: Vec<_> = [1, 2, 4, 8]
        .iter()
        .map(|&w| {
            let dir = tempfile::tempdir().unwrap();
            let cfg = PipelineConfig::from_json(
                &json!({
                    "input": {"format": "synthetic"},
                    "steps": [
                        {"op": "track"},
                        {"op": "eddies"},
                        {"op": "cinema", "params": {"fields": ["salinity", "temperature", "u", "v", "speed"]}},
                    ],
                    "workers": w,
                    "outDir": dir.path(),
                })
                .to_string(),
            )
            .unwrap();
            run(&cfg).unwrap();
            read_tree(dir.path())
        })
        .collect();
    let files = trees[0].len();
    let same = trees.iter().all(|t| t == &trees[0]);
    check(same, format!("track graph, eddies and {files}-file tree byte-identical for 1/2/4/8 workers"))
}

fn bench_params() -> BenchParams {
    BenchParams {
        repeats: 3,
        ..BenchParams::default()
    }
}

fn strong_scaling() -> Verdict {
    // The 16V grid gives each worker enough work to amortise scheduling.
    let params = BenchParams {
        base: SyntheticSpec::standard().scaled(16).unwrap(),
        ..bench_params()
    };
    let report = run_benchmark(Suite::StrongScaling, &params).unwrap();
    let ws = [1, 2, 4, 8];
    let t: Vec<f64> = ws
        .iter()
        .map(|&w| median_seconds(&report.records, "buildTrackGraph", w, 1).unwrap())
        .collect();
    // Monotone non-increasing, with one rise of at most 10% tolerated.
    let rises: Vec<f64> = t.windows(2).filter(|p| p[1] > p[0]).map(|p| p[1] / p[0] - 1.0).collect();
    let monotone = rises.is_empty() || (rises.len() == 1 && rises[0] <= 0.10);
    let speedup = t[0] / t[3];
    let detail = format!(
        "medians {:?}s; speedup 1→8 {speedup:.2}× (need ≥ 3×); monotone: {monotone}",
        t.iter().map(|s| (s * 1e4).round() / 1e4).collect::<Vec<_>>()
    );
    if cores() < 8 {
        Blocked(format!("host has {} core(s), needs 8; {detail}", cores()))
    } else {
        check(monotone && speedup >= 3.0, detail)
    }
}

fn resolution_scaling() -> Verdict {
    // A 64 × 64 base keeps the smallest cell well above timer noise. The
    // suite is run several times so that scales are interleaved in time, and
    // the fastest repeat per scale discards contention from other processes.
    let params = BenchParams {
        base: SyntheticSpec::standard().scaled(4).unwrap(),
        repeats: 3,
        ..bench_params()
    };
    let mut records = Vec::new();
    for _ in 0..3 {
        let report = run_benchmark(Suite::ResolutionScaling, &params).unwrap();
        if let Some(msg) = report.aborted {
            return Blocked(msg);
        }
        records.extend(report.records);
    }
    let t: Vec<f64> = [1, 4, 16]
        .iter()
        .map(|&s| {
            records
                .iter()
                .filter(|r| r.scale == s)
                .map(|r| r.seconds)
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let g = [t[1] / t[0], t[2] / t[1]];
    check(
        g.iter().all(|x| (3.0..=6.0).contains(x)),
        format!("V→4V {:.2}×, 4V→16V {:.2}× (need within [3, 6])", g[0], g[1]),
    )
}

fn weak_scaling() -> Verdict {
    let report = run_benchmark(Suite::WeakScaling, &bench_params()).unwrap();
    let t: Vec<f64> = [1, 2, 4, 8]
        .iter()
        .map(|&w| median_seconds(&report.records, "buildTrackGraph", w, w).unwrap())
        .collect();
    let growth = t[3] / t[0] - 1.0;
    let detail = format!("time growth 1→8 workers {:.0}% (need ≤ 50%)", growth * 100.0);
    if cores() < 8 {
        Blocked(format!("host has {} core(s), needs 8; {detail}", cores()))
    } else {
        check(growth <= 0.5, detail)
    }
}

fn eddy_accuracy() -> Verdict {
    let p = EddyParams::default();
    let mut worst_centre = 0.0f64;
    let mut worst_radius = 0.0f64;
    for n in [64usize, 128] {
        for (ox, oy) in [(0.0, 0.0), (0.3, 0.7), (0.85, 0.2)] {
            for sign in [1.0, -1.0] {
                let c = (n as f64 * 0.45 + ox, n as f64 * 0.55 + oy);
                let levels = detect_level(&lamb_oseen(n, c, n as f64 / 10.0, 1.0, sign).unwrap(), 0, &p).unwrap();
                if levels.len() != 1 {
                    return Fail(format!("Lamb-Oseen n={n} at {c:?}: {} detections", levels.len()));
                }
                worst_centre = worst_centre.max((levels[0].lon - c.0).hypot(levels[0].lat - c.1));
            }
        }
        let radius = 0.2 * n as f64;
        let levels = detect_level(&rankine_core(n, (n as f64 / 2.0, n as f64 / 2.0), radius, 1e-2).unwrap(), 0, &p)
            .unwrap();
        let r: Vec<f64> = levels.iter().flat_map(|l| l.radii.iter().flatten().copied()).collect();
        if levels.len() != 1 || r.len() != 8 {
            return Fail(format!("Rankine n={n}: {} detections, {} radii", levels.len(), r.len()));
        }
        let mean = r.iter().sum::<f64>() / 8.0;
        worst_radius = worst_radius.max((mean - radius).abs() / radius);
    }
    let mut spurious = 0;
    for n in [64usize, 128] {
        for vel in [uniform_flow(n, 0.3, -0.1).unwrap(), pure_shear(n).unwrap()] {
            spurious += detect_eddies(&vel, &p).unwrap().len();
        }
    }
    check(
        worst_centre <= 1.0 && worst_radius <= 0.1 && spurious == 0,
        format!(
            "centre error ≤ {worst_centre:.3} voxel; radius error ≤ {:.1}%; {spurious} detections in uniform/shear",
            worst_radius * 100.0
        ),
    )
}

fn okubo_weiss() -> Verdict {
    let dev = |vel: VectorVolume, w: f64, omega: f64| {
        let g = horizontal_gradients(&vel, 0);
        let a = g.okubo_weiss().iter().map(|x| (x - w).abs()).fold(0.0, f64::max);
        let b = g.vorticity().iter().map(|x| (x - omega).abs()).fold(0.0, f64::max);
        a.max(b)
    };
    let e = dev(solid_body(64, 1.0).unwrap(), -4.0, 2.0).max(dev(pure_strain(64).unwrap(), 4.0, 0.0));
    check(e <= 1e-9, format!("max deviation {e:.1e} (tolerance 1e-9)"))
}

fn rk4_order() -> Verdict {
    let g = Arc::new(Grid4D::cartesian(1, vec![0.0], (-2.0, 0.1, 41), (-2.0, 0.1, 41)).unwrap());
    let u = ScalarVolume::from_fn(g.clone(), 0, |_, y, _| -y).unwrap();
    let v = ScalarVolume::from_fn(g, 0, |_, _, x| x).unwrap();
    let vel = VectorVolume::new(u, v, None).unwrap();
    let err = |steps: usize| {
        let params = IntegrationParams {
            step_size: std::f64::consts::TAU / steps as f64,
            max_steps: steps,
            termination_speed: 0.0,
            ..IntegrationParams::default()
        };
        let line = streamline(&vel, Point::new(1.0, 0.0, 0.0), &params, 0).unwrap();
        let end = line.points.last().unwrap();
        (end.lon - 1.0).hypot(end.lat)
    };
    let (coarse, fine) = (err(16), err(32));
    let factor = coarse / fine;
    check(factor >= 12.0, format!("full orbit error {coarse:.2e} → {fine:.2e}: factor {factor:.1} (need ≥ 12)"))
}

fn float_round_trip() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0cea);
    let specials = [
        f32::NAN.to_bits(),
        0x7fc0_0001,
        0xffff_ffff,
        f32::INFINITY.to_bits(),
        f32::NEG_INFINITY.to_bits(),
        0x8000_0000,
    ];
    let bits: Vec<u32> = (0..1_000_000)
        .map(|i| match i % 8 {
            0 => specials[rng.gen_range(0..specials.len())],
            1 => rng.gen_range(1..0x0080_0000) | (rng.gen::<u32>() & 0x8000_0000),
            _ => rng.gen(),
        })
        .collect();
    let img = Array2::from_shape_vec((1000, 1000), bits.iter().map(|&b| f32::from_bits(b)).collect()).unwrap();
    let back = decode_float_image(&encode_float_image(img.view()).unwrap()).unwrap();
    let bad = img.iter().zip(back.iter()).filter(|(a, b)| a.to_bits() != b.to_bits()).count();

    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let index = generate_database(&ds, &CinemaSpec::new(&["u", "v", "speed"]), 0..ds.steps(), dir.path()).unwrap();
    let mut mismatched = 0;
    let mut pixels = 0;
    for row in index.rows.iter().filter(|r| r.field == "speed") {
        let s = index.image(row).unwrap();
        let u = index.image(index.find(row.time, row.level, "u").unwrap()).unwrap();
        let v = index.image(index.find(row.time, row.level, "v").unwrap()).unwrap();
        for ((s, u), v) in s.iter().zip(u.iter()).zip(v.iter()) {
            let (u, v) = (*u as f64, *v as f64);
            mismatched += usize::from(((u * u + v * v).sqrt() as f32).to_bits() != s.to_bits());
            pixels += 1;
        }
    }
    check(
        bad == 0 && mismatched == 0,
        format!("{bad} of 10^6 fuzzed floats differ; speed recompute differs in {mismatched} of {pixels} pixels"),
    )
}

fn seed_weighting() -> Verdict {
    let g = Arc::new(Grid4D::cartesian(1, vec![0.0, 1.0], (0.0, 1.0, 8), (0.0, 1.0, 8)).unwrap());
    let voxel = |p: &Point| (g.depth().nearest(p.depth), g.lat().nearest(p.lat), g.lon().nearest(p.lon));
    let mass = ScalarVolume::from_fn(g.clone(), 0, |d, y, x| if (d, y, x) == (1.0, 2.0, 5.0) { 1.0 } else { 0.0 })
        .unwrap();
    let seeds = place_seeds_weighted(&mass, &SeedSpec::weighted(10_000, DerivedFieldKind::Speed, 5)).unwrap();
    let hit = seeds.iter().filter(|p| voxel(p) == (1, 2, 5)).count();

    let flat = ScalarVolume::from_fn(g.clone(), 0, |_, _, _| 1.0).unwrap();
    let n = 100_000;
    let seeds = place_seeds_uniform(&flat, &SeedSpec::uniform(n, 17)).unwrap();
    let mut counts = [0usize; 128];
    for p in &seeds {
        let (k, i, j) = voxel(p);
        counts[(k * 8 + i) * 8 + j] += 1;
    }
    let expected = n as f64 / 128.0;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let critical = ChiSquared::new(127.0).unwrap().inverse_cdf(0.99);
    check(
        hit == 10_000 && stat < critical,
        format!(
            "point mass {:.1}% in target voxel; chi-square {stat:.1} < {critical:.1} (α = 0.01, 10^5 seeds)",
            100.0 * hit as f64 / 10_000.0
        ),
    )
}

fn ghost_cells() -> Verdict {
    let ds = synthetic_dataset(&SyntheticSpec::standard()).unwrap();
    let spec = IsovolumeSpec::salinity("salinity");
    for t in 0..ds.steps() {
        let field = ds.load(t, "salinity").unwrap();
        let whole = extract_fronts(&field, &spec, 3).unwrap();
        let plan = plan_partition(field.values().dim(), 2, Scheme::DepthSlab, 1).unwrap();
        let part = extract_fronts_partitioned(&field, &spec, 3, &plan).unwrap();
        if part.labeling != whole.labeling || part.fronts != whole.fronts {
            return Fail(format!("step {t}: 2-slab result differs from single block"));
        }
    }
    Pass("2-slab partition with ghost width 1 identical to single block on all 6 steps".into())
}

fn main() {
    let criteria: [(&str, fn() -> Verdict); 11] = [
        ("front tracking matches brute-force oracle", front_oracle),
        ("outputs identical across worker counts", worker_determinism),
        ("strong scaling", strong_scaling),
        ("resolution scaling", resolution_scaling),
        ("weak scaling", weak_scaling),
        ("eddy detection accuracy", eddy_accuracy),
        ("Okubo-Weiss and vorticity", okubo_weiss),
        ("RK4 convergence order", rk4_order),
        ("float image round trip", float_round_trip),
        ("seed weighting", seed_weighting),
        ("ghost cells", ghost_cells),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let (tag, detail) = match f() {
            Pass(d) => ("PASS", d),
            Fail(d) => {
                failed += 1;
                ("FAIL", d)
            }
            Blocked(d) => ("BLOCKED", d),
        };
        println!("{tag:<7} {:>2}. {name}: {detail}", i + 1);
    }
    if failed > 0 {
        eprintln!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
