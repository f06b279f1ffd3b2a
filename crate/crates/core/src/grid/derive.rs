use ndarray::{Array2, Array3, ArrayView2, Axis, Zip};
use rayon::prelude::*;

use super::{DerivedFieldKind, Metric, ScalarVolume, VectorVolume};
use crate::{Error, Result};

/// Mean Earth radius used for the local metric.
pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// First derivative along the last axis of `f` with respect to `coords`.
/// Central differences inside, one-sided first order at the two ends.
fn diff_last_axis(f: ArrayView2<'_, f64>, coords: &[f64]) -> Array2<f64> {
    let (rows, n) = f.dim();
    let mut out = Array2::zeros((rows, n));
    if n < 2 {
        // A single column has no horizontal extent; keep NaN closure.
        Zip::from(&mut out).and(&f).for_each(|o, &v| *o = v * 0.0);
        return out;
    }
    for r in 0..rows {
        for j in 0..n {
            let (a, b) = if j == 0 {
                (0, 1)
            } else if j == n - 1 {
                (n - 2, n - 1)
            } else {
                (j - 1, j + 1)
            };
            out[[r, j]] = (f[[r, b]] - f[[r, a]]) / (coords[b] - coords[a]);
        }
    }
    out
}

/// Horizontal velocity gradients of one depth slice, in 1/s for spherical grids.
#[derive(Debug, Clone)]
pub struct HorizontalGradients {
    pub du_dx: Array2<f64>,
    pub du_dy: Array2<f64>,
    pub dv_dx: Array2<f64>,
    pub dv_dy: Array2<f64>,
}

impl HorizontalGradients {
    pub fn vorticity(&self) -> Array2<f64> {
        &self.dv_dx - &self.du_dy
    }

    pub fn normal_strain(&self) -> Array2<f64> {
        &self.du_dx - &self.dv_dy
    }

    pub fn shear_strain(&self) -> Array2<f64> {
        &self.dv_dx + &self.du_dy
    }

    pub fn okubo_weiss(&self) -> Array2<f64> {
        let sn = self.normal_strain();
        let ss = self.shear_strain();
        let w = self.vorticity();
        Zip::from(&sn)
            .and(&ss)
            .and(&w)
            .map_collect(|&a, &b, &c| a * a + b * b - c * c)
    }
}

/// Gradients of `u` and `v` at depth level `depth`.
pub fn horizontal_gradients(vel: &VectorVolume, depth: usize) -> HorizontalGradients {
    let grid = vel.grid();
    let lat = grid.lat().coords();
    let lon = grid.lon().coords();
    let d_dx = |f: ArrayView2<'_, f64>| {
        let mut d = diff_last_axis(f, lon);
        if grid.metric() == Metric::Spherical {
            for (i, mut row) in d.axis_iter_mut(Axis(0)).enumerate() {
                let scale = 1.0 / (EARTH_RADIUS_M * lat[i].to_radians().cos() * 1f64.to_radians());
                row.mapv_inplace(|v| v * scale);
            }
        }
        d
    };
    let d_dy = |f: ArrayView2<'_, f64>| {
        let mut d = diff_last_axis(f.t(), lat).reversed_axes();
        if grid.metric() == Metric::Spherical {
            let scale = 1.0 / (EARTH_RADIUS_M * 1f64.to_radians());
            d.mapv_inplace(|v| v * scale);
        }
        d
    };
    let u = vel.u().slice(depth);
    let v = vel.v().slice(depth);
    HorizontalGradients {
        du_dx: d_dx(u),
        du_dy: d_dy(u),
        dv_dx: d_dx(v),
        dv_dy: d_dy(v),
    }
}

/// Computes a derived scalar field, slice by slice.
///
/// `UserScalar` refers to a dataset variable and cannot be computed from the
/// velocity alone; it is rejected here.
pub fn derived_field(vel: &VectorVolume, kind: &DerivedFieldKind) -> Result<ScalarVolume> {
    if let DerivedFieldKind::UserScalar(name) = kind {
        return Err(Error::InvalidInput(format!(
            "user scalar '{name}' must be read from the dataset"
        )));
    }
    let (nd, ny, nx) = vel.grid().volume_shape();
    let mut out = Array3::<f64>::zeros((nd, ny, nx));
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .enumerate()
        .for_each(|(k, mut slice)| {
            let values = match kind {
                DerivedFieldKind::Speed => Zip::from(vel.u().slice(k))
                    .and(vel.v().slice(k))
                    .map_collect(|&u, &v| (u * u + v * v).sqrt()),
                DerivedFieldKind::Vorticity => horizontal_gradients(vel, k).vorticity(),
                DerivedFieldKind::CurlMagnitude => {
                    horizontal_gradients(vel, k).vorticity().mapv(f64::abs)
                }
                DerivedFieldKind::OkuboWeiss => horizontal_gradients(vel, k).okubo_weiss(),
                DerivedFieldKind::UserScalar(_) => unreachable!(),
            };
            slice.assign(&values);
            // Land stays land even where the stencil straddles it.
            Zip::from(&mut slice)
                .and(vel.u().slice(k))
                .for_each(|o, &u| {
                    if u.is_nan() {
                        *o = f64::NAN;
                    }
                });
        });
    ScalarVolume::new(vel.grid().clone(), vel.t(), out)
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::grid::{AxisKind, Grid4D, GridAxis};

    fn cartesian(n: usize) -> Arc<Grid4D> {
        Arc::new(Grid4D::cartesian(1, vec![0.0, 5.0], (-1.0, 2.0 / (n - 1) as f64, n), (-1.0, 2.0 / (n - 1) as f64, n)).unwrap())
    }

    fn field(g: &Arc<Grid4D>, fu: impl Fn(f64, f64) -> f64, fv: impl Fn(f64, f64) -> f64) -> VectorVolume {
        let u = ScalarVolume::from_fn(g.clone(), 0, |_, y, x| fu(x, y)).unwrap();
        let v = ScalarVolume::from_fn(g.clone(), 0, |_, y, x| fv(x, y)).unwrap();
        VectorVolume::new(u, v, None).unwrap()
    }

    #[test]
    fn solid_body_rotation() {
        let g = cartesian(9);
        let vel = field(&g, |_, y| -y, |x, _| x);
        let w = derived_field(&vel, &DerivedFieldKind::Vorticity).unwrap();
        let ow = derived_field(&vel, &DerivedFieldKind::OkuboWeiss).unwrap();
        let curl = derived_field(&vel, &DerivedFieldKind::CurlMagnitude).unwrap();
        for ((a, b), c) in w.values().iter().zip(ow.values()).zip(curl.values()) {
            assert!((a - 2.0).abs() < 1e-12);
            assert!((b + 4.0).abs() < 1e-12);
            assert!((c - 2.0).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_strain() {
        let g = cartesian(7);
        let vel = field(&g, |x, _| x, |_, y| -y);
        let grads = horizontal_gradients(&vel, 1);
        for v in grads.normal_strain().iter() {
            assert!((v - 2.0).abs() < 1e-12);
        }
        for v in grads.shear_strain().iter().chain(grads.vorticity().iter()) {
            assert!(v.abs() < 1e-12);
        }
        for v in grads.okubo_weiss().iter() {
            assert!((v - 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn speed_is_non_negative_and_nan_closed() {
        let g = cartesian(5);
        let vel = field(
            &g,
            |x, y| if x > 0.4 && y > 0.4 { f64::NAN } else { x - y },
            |x, y| if x > 0.4 && y > 0.4 { f64::NAN } else { x * y - 0.3 },
        );
        let s = derived_field(&vel, &DerivedFieldKind::Speed).unwrap();
        for (sv, uv) in s.values().iter().zip(vel.u().values()) {
            assert_eq!(sv.is_nan(), uv.is_nan());
            if !sv.is_nan() {
                assert!(*sv >= 0.0);
            }
        }
    }

    #[test]
    fn nan_stencil_gives_nan_derivative() {
        let g = cartesian(5);
        let vel = field(
            &g,
            |x, y| if x.abs() < 1e-9 && y.abs() < 1e-9 { f64::NAN } else { 1.0 },
            |x, y| if x.abs() < 1e-9 && y.abs() < 1e-9 { f64::NAN } else { 1.0 },
        );
        let w = derived_field(&vel, &DerivedFieldKind::Vorticity).unwrap();
        // The four 4-neighbours of the centre see it through their central stencil.
        for (i, j) in [(2, 1), (2, 3), (1, 2), (3, 2), (2, 2)] {
            assert!(w.values()[[0, i, j]].is_nan(), "({i},{j})");
        }
        assert!(!w.values()[[0, 1, 1]].is_nan());
    }

    #[test]
    fn spherical_metric_scales_by_cos_lat() {
        let h = 0.1;
        let g = Arc::new(
            Grid4D::new(
                GridAxis::regular(AxisKind::Time, 0.0, 1.0, 1).unwrap(),
                GridAxis::new(AxisKind::Depth, vec![0.0]).unwrap(),
                GridAxis::regular(AxisKind::Lat, 59.8, h, 5).unwrap(),
                GridAxis::regular(AxisKind::Lon, 10.0, h, 5).unwrap(),
                Metric::Spherical,
            )
            .unwrap(),
        );
        // v grows by 1 m/s per degree of longitude.
        let vel = field(&g, |_, _| 0.0, |x, _| x);
        let grads = horizontal_gradients(&vel, 0);
        let expected = 1.0 / (EARTH_RADIUS_M * 60f64.to_radians().cos() * 1f64.to_radians());
        let got = grads.dv_dx[[2, 2]];
        assert!(((got - expected) / expected).abs() < 1e-12);
    }
}
