use std::sync::Arc;

use ndarray::{Array3, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::interp::trilinear;
use super::{AxisKind, Grid4D, GridAxis, ScalarVolume};
use crate::{Error, Result};

/// Target of a regular resampling: depth levels `step, 2*step, ..., max_depth`
/// and a horizontal spacing of `1 / (12 * r)` degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResampleSpec {
    pub depth_step: f64,
    pub max_depth: f64,
    pub horizontal_factor: u32,
}

impl ResampleSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.depth_step > 0.0) || !(self.max_depth > 0.0) {
            return Err(Error::InvalidParameter(
                "depthStep and maxDepth must be positive".into(),
            ));
        }
        if self.horizontal_factor == 0 {
            return Err(Error::InvalidParameter(
                "horizontalFactor must be a positive integer".into(),
            ));
        }
        let ratio = self.max_depth / self.depth_step;
        if (ratio - ratio.round()).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "maxDepth {} is not a multiple of depthStep {}",
                self.max_depth, self.depth_step
            )));
        }
        Ok(())
    }

    pub fn depth_levels(&self) -> usize {
        (self.max_depth / self.depth_step).round() as usize
    }

    pub fn horizontal_step(&self) -> f64 {
        1.0 / (12.0 * self.horizontal_factor as f64)
    }

    /// Target axes for a source grid. Lat/lon start at the source origin and
    /// stay inside the source extent.
    pub fn target_grid(&self, source: &Grid4D) -> Result<Grid4D> {
        self.validate()?;
        let depth = GridAxis::new(
            AxisKind::Depth,
            (1..=self.depth_levels())
                .map(|k| k as f64 * self.depth_step)
                .collect(),
        )?;
        let h = self.horizontal_step();
        let span = |axis: &GridAxis| -> usize {
            // Tolerance keeps the last node when the extent is a multiple of h.
            ((axis.last() - axis.first()) / h + 1e-9).floor() as usize + 1
        };
        let lat = GridAxis::regular(AxisKind::Lat, source.lat().first(), h, span(source.lat()))?;
        let lon = GridAxis::regular(AxisKind::Lon, source.lon().first(), h, span(source.lon()))?;
        Grid4D::new(source.time().clone(), depth, lat, lon, source.metric())
    }
}

/// Trilinear resampling onto regular depth levels and a regular lat-lon grid.
///
/// Any stencil that touches a NaN produces NaN. Nodes that coincide with
/// source nodes are copied bit-for-bit.
pub fn resample_regular(field: &ScalarVolume, spec: &ResampleSpec) -> Result<ScalarVolume> {
    let source = field.grid();
    let target = spec.target_grid(source)?;
    let locate = |axis: &GridAxis, coords: &[f64]| {
        coords
            .iter()
            .map(|&c| {
                axis.locate(c).ok_or_else(|| {
                    Error::OutOfDomain(format!(
                        "target {} {c} outside source range [{}, {}]",
                        axis.kind().name(),
                        axis.first(),
                        axis.last()
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()
    };
    let dz = locate(source.depth(), target.depth().coords())?;
    let dy = locate(source.lat(), target.lat().coords())?;
    let dx = locate(source.lon(), target.lon().coords())?;

    let (nd, ny, nx) = target.volume_shape();
    let mut out = Array3::<f64>::zeros((nd, ny, nx));
    let src = field.values().view();
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(dz.par_iter())
        .for_each(|(mut slice, &sz)| {
            for (i, sy) in dy.iter().enumerate() {
                for (j, sx) in dx.iter().enumerate() {
                    slice[[i, j]] = trilinear(src, sz, *sy, *sx);
                }
            }
        });
    ScalarVolume::new(Arc::new(target), field.t(), out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Metric;

    fn regular_source(depths: Vec<f64>, n: usize) -> Arc<Grid4D> {
        let h = 1.0 / 12.0;
        Arc::new(
            Grid4D::new(
                GridAxis::regular(AxisKind::Time, 0.0, 1.0, 1).unwrap(),
                GridAxis::new(AxisKind::Depth, depths).unwrap(),
                GridAxis::regular(AxisKind::Lat, 10.0, h, n).unwrap(),
                GridAxis::regular(AxisKind::Lon, 80.0, h, n).unwrap(),
                Metric::Spherical,
            )
            .unwrap(),
        )
    }

    #[test]
    fn two_hundred_metre_column_gives_two_hundred_levels() {
        let spec = ResampleSpec {
            depth_step: 1.0,
            max_depth: 200.0,
            horizontal_factor: 1,
        };
        assert_eq!(spec.depth_levels(), 200);
        let g = regular_source(vec![0.5, 50.0, 120.0, 250.0], 4);
        let t = spec.target_grid(&g).unwrap();
        assert_eq!(t.depth().len(), 200);
        assert_eq!(t.depth().first(), 1.0);
        assert_eq!(t.depth().last(), 200.0);
    }

    #[test]
    fn identity_spec_is_bit_exact_even_near_land() {
        let depths: Vec<f64> = (1..=5).map(|k| k as f64 * 2.0).collect();
        let g = regular_source(depths, 6);
        let field = ScalarVolume::from_fn(g, 0, |z, y, x| {
            if x > 80.3 && y > 10.3 {
                f64::NAN
            } else {
                (z * 0.37 + y * 1.3).sin() + x.cos() / 3.0
            }
        })
        .unwrap();
        let spec = ResampleSpec {
            depth_step: 2.0,
            max_depth: 10.0,
            horizontal_factor: 1,
        };
        let out = resample_regular(&field, &spec).unwrap();
        assert_eq!(**out.grid(), **field.grid());
        for (a, b) in out.values().iter().zip(field.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        let again = resample_regular(&out, &spec).unwrap();
        for (a, b) in again.values().iter().zip(out.values().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn linear_depth_ramp_is_reproduced() {
        let g = regular_source(vec![0.3, 4.1, 9.7, 17.2, 26.0], 3);
        let field = ScalarVolume::from_fn(g, 0, |z, _, _| z).unwrap();
        let spec = ResampleSpec {
            depth_step: 5.0,
            max_depth: 25.0,
            horizontal_factor: 1,
        };
        let out = resample_regular(&field, &spec).unwrap();
        for ((k, _, _), v) in out.values().indexed_iter() {
            let z = (k + 1) as f64 * 5.0;
            assert!((v - z).abs() < 1e-12, "level {k}: {v} vs {z}");
        }
    }

    #[test]
    fn nan_in_stencil_propagates() {
        let g = regular_source(vec![0.0, 10.0], 3);
        let field = ScalarVolume::from_fn(g, 0, |z, _, _| if z > 5.0 { f64::NAN } else { 1.0 }).unwrap();
        let spec = ResampleSpec {
            depth_step: 5.0,
            max_depth: 10.0,
            horizontal_factor: 1,
        };
        let out = resample_regular(&field, &spec).unwrap();
        assert!(out.values().iter().all(|v| v.is_nan()));
    }

    #[test]
    fn depth_beyond_source_is_out_of_domain() {
        let g = regular_source(vec![0.0, 10.0], 3);
        let field = ScalarVolume::from_fn(g, 0, |_, _, _| 1.0).unwrap();
        let spec = ResampleSpec {
            depth_step: 5.0,
            max_depth: 20.0,
            horizontal_factor: 1,
        };
        assert!(matches!(resample_regular(&field, &spec), Err(Error::OutOfDomain(_))));
    }

    #[test]
    fn max_depth_must_be_multiple_of_step() {
        let spec = ResampleSpec {
            depth_step: 3.0,
            max_depth: 10.0,
            horizontal_factor: 1,
        };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn finer_horizontal_factor_doubles_resolution() {
        let g = regular_source(vec![0.0, 10.0], 5);
        let spec = ResampleSpec {
            depth_step: 10.0,
            max_depth: 10.0,
            horizontal_factor: 2,
        };
        let t = spec.target_grid(&g).unwrap();
        assert_eq!(t.lat().len(), 9);
        assert_eq!(t.lon().len(), 9);
    }
}
