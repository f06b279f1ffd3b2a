//! Per-voxel morphology on binary grids: isovolume, inner boundary,
//! north-facing selection and the n×n×2 dilation used to group segments.

use ndarray::{Array3, ArrayView3, Axis, Zip};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", tag = "kind")]
pub enum Comparison {
    Geq,
    Leq,
    Interval { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct IsovolumeSpec {
    pub variable: String,
    #[serde(default = "IsovolumeSpec::default_threshold")]
    pub threshold: f64,
    #[serde(default = "IsovolumeSpec::default_comparison")]
    pub comparison: Comparison,
}

impl IsovolumeSpec {
    fn default_threshold() -> f64 {
        35.0
    }

    fn default_comparison() -> Comparison {
        Comparison::Geq
    }

    /// High-salinity water: `variable >= 35`.
    pub fn salinity(variable: &str) -> Self {
        IsovolumeSpec {
            variable: variable.to_string(),
            threshold: Self::default_threshold(),
            comparison: Comparison::Geq,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.comparison {
            Comparison::Interval { lo, hi } if !(lo < hi) => Err(Error::InvalidParameter(format!(
                "isovolume interval requires lo < hi, got [{lo}, {hi}]"
            ))),
            _ if !self.threshold.is_finite() => {
                Err(Error::InvalidParameter("isovolume threshold must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// Whether `value` is inside the isovolume. NaN never is.
    pub fn test(&self, value: f64) -> bool {
        match self.comparison {
            Comparison::Geq => value >= self.threshold,
            Comparison::Leq => value <= self.threshold,
            Comparison::Interval { lo, hi } => value >= lo && value <= hi,
        }
    }
}

pub fn extract_isovolume(values: ArrayView3<'_, f64>, spec: &IsovolumeSpec) -> Array3<bool> {
    let mut out = Array3::from_elem(values.dim(), false);
    Zip::from(&mut out)
        .and(&values)
        .par_for_each(|o, &v| *o = spec.test(v));
    out
}

/// Inner boundary of `iso`: voxels set in `iso` whose 3×3 lat-lon
/// neighbourhood mean (over in-domain neighbours) lies strictly in (0, 1).
pub fn boundary_grid(iso: ArrayView3<'_, bool>) -> Array3<bool> {
    let (_, ny, nx) = iso.dim();
    let mut out = Array3::from_elem(iso.dim(), false);
    out.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(iso.axis_iter(Axis(0)))
        .for_each(|(mut o, s)| {
            for i in 0..ny {
                for j in 0..nx {
                    if !s[[i, j]] {
                        continue;
                    }
                    let mut ones = 0usize;
                    let mut total = 0usize;
                    for ii in i.saturating_sub(1)..(i + 2).min(ny) {
                        for jj in j.saturating_sub(1)..(j + 2).min(nx) {
                            total += 1;
                            ones += usize::from(s[[ii, jj]]);
                        }
                    }
                    o[[i, j]] = ones > 0 && ones < total;
                }
            }
        });
    out
}

/// Boundary voxels whose northern neighbour (latitude index + 1) is outside
/// the isovolume or beyond the domain edge.
pub fn north_facing(boundary: ArrayView3<'_, bool>, iso: ArrayView3<'_, bool>) -> Array3<bool> {
    let (_, ny, _) = iso.dim();
    Array3::from_shape_fn(iso.dim(), |(k, i, j)| {
        boundary[[k, i, j]] && (i + 1 == ny || !iso[[k, i + 1, j]])
    })
}

/// Boundary followed by north-facing selection, in one call.
pub fn north_facing_boundary(iso: ArrayView3<'_, bool>) -> Array3<bool> {
    let b = boundary_grid(iso);
    north_facing(b.view(), iso)
}

pub fn check_neighbourhood(n: usize) -> Result<()> {
    if n == 0 || n.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "neighbourhood size n must be a positive odd number, got {n}"
        )));
    }
    Ok(())
}

/// Dilates every set voxel into an n×n lat-lon square spanning its own depth
/// level and the next one.
pub fn dilate(mask: ArrayView3<'_, bool>, n: usize) -> Result<Array3<bool>> {
    check_neighbourhood(n)?;
    let h = (n - 1) / 2;
    let (nd, ny, nx) = mask.dim();
    // Horizontal pass per slice, then the one-level depth extension.
    let mut flat = Array3::from_elem(mask.dim(), false);
    flat.axis_iter_mut(Axis(0))
        .into_par_iter()
        .zip(mask.axis_iter(Axis(0)))
        .for_each(|(mut o, s)| {
            for ((i, j), &set) in s.indexed_iter() {
                if set {
                    for ii in i.saturating_sub(h)..(i + h + 1).min(ny) {
                        for jj in j.saturating_sub(h)..(j + h + 1).min(nx) {
                            o[[ii, jj]] = true;
                        }
                    }
                }
            }
        });
    let mut out = flat.clone();
    for k in 1..nd {
        Zip::from(out.index_axis_mut(Axis(0), k))
            .and(flat.index_axis(Axis(0), k - 1))
            .for_each(|c, &p| *c |= p);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{s, Array2};

    fn slice(rows: &[&str]) -> Array3<bool> {
        // Rows are written north-up; row 0 of the text is the highest latitude.
        let ny = rows.len();
        let nx = rows[0].len();
        Array3::from_shape_fn((1, ny, nx), |(_, i, j)| rows[ny - 1 - i].as_bytes()[j] == b'#')
    }

    fn render(a: &Array3<bool>) -> Vec<String> {
        let (_, ny, _) = a.dim();
        (0..ny)
            .rev()
            .map(|i| a.slice(s![0, i, ..]).iter().map(|&b| if b { '#' } else { '.' }).collect())
            .collect()
    }

    #[test]
    fn isovolume_constant_fields() {
        let spec = IsovolumeSpec::salinity("salt");
        let mut v = Array3::from_elem((2, 3, 3), 36.0);
        v[[0, 0, 0]] = f64::NAN;
        let iso = extract_isovolume(v.view(), &spec);
        assert_eq!(iso.iter().filter(|&&b| b).count(), 17);
        assert!(!iso[[0, 0, 0]]);
        let low = Array3::from_elem((2, 3, 3), 34.0);
        assert!(extract_isovolume(low.view(), &spec).iter().all(|&b| !b));
    }

    #[test]
    fn interval_requires_order() {
        let mut spec = IsovolumeSpec::salinity("s");
        spec.comparison = Comparison::Interval { lo: 2.0, hi: 1.0 };
        assert!(spec.validate().is_err());
        spec.comparison = Comparison::Interval { lo: 1.0, hi: 2.0 };
        assert!(spec.validate().is_ok());
        assert!(spec.test(1.5) && !spec.test(2.5) && !spec.test(f64::NAN));
    }

    #[test]
    fn all_ones_has_no_boundary() {
        let iso = Array3::from_elem((2, 4, 5), true);
        assert!(boundary_grid(iso.view()).iter().all(|&b| !b));
        assert!(north_facing_boundary(iso.view()).iter().all(|&b| !b));
    }

    #[test]
    fn block_ring_and_top_row() {
        let iso = slice(&[
            ".......", ".......", "..###..", "..###..", "..###..", ".......", ".......",
        ]);
        let b = boundary_grid(iso.view());
        assert_eq!(
            render(&b),
            vec![".......", ".......", "..###..", "..#.#..", "..###..", ".......", "......."]
        );
        let nf = north_facing(b.view(), iso.view());
        assert_eq!(
            render(&nf),
            vec![".......", ".......", "..###..", ".......", ".......", ".......", "......."]
        );
    }

    #[test]
    fn isolated_voxel_is_boundary() {
        let iso = slice(&["...", ".#.", "..."]);
        assert_eq!(render(&boundary_grid(iso.view())), vec!["...", ".#.", "..."]);
    }

    #[test]
    fn band_north_edge() {
        let iso = slice(&["......", "######", "######", "......"]);
        let nf = north_facing_boundary(iso.view());
        assert_eq!(render(&nf), vec!["......", "######", "......", "......"]);
    }

    #[test]
    fn dilation_shape() {
        let mut m = Array3::from_elem((3, 5, 5), false);
        m[[1, 2, 2]] = true;
        let d = dilate(m.view(), 3).unwrap();
        assert_eq!(d.iter().filter(|&&b| b).count(), 18);
        assert!(d.slice(s![0, .., ..]).iter().all(|&b| !b));
        let expected = Array2::from_shape_fn((5, 5), |(i, j)| (1..4).contains(&i) && (1..4).contains(&j));
        assert_eq!(d.slice(s![2, .., ..]), expected);
        assert!(dilate(m.view(), 2).is_err());
        assert!(dilate(m.view(), 0).is_err());
    }
}
