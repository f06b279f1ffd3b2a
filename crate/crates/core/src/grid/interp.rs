use ndarray::{ArrayView2, ArrayView3};

/// Two-node linear interpolation stencil along one axis.
///
/// A node whose weight is exactly zero is not part of the stencil, so sampling
/// exactly on a node never looks at (possibly NaN) neighbours.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stencil {
    pub i0: usize,
    pub i1: usize,
    /// Weight of `i1`; `i0` gets `1 - w1`.
    pub w1: f64,
}

impl Stencil {
    pub fn node(i: usize) -> Self {
        Stencil { i0: i, i1: i, w1: 0.0 }
    }

    pub fn new(i0: usize, w1: f64) -> Self {
        if w1 == 0.0 {
            Stencil::node(i0)
        } else {
            Stencil { i0, i1: i0 + 1, w1 }
        }
    }

    /// `(index, weight)` pairs with non-zero weight.
    pub fn taps(&self) -> impl Iterator<Item = (usize, f64)> {
        let two = self.w1 != 0.0;
        std::iter::once((self.i0, 1.0 - self.w1)).chain(two.then_some((self.i1, self.w1)))
    }
}

/// Bilinear sample of a (lat, lon) slice. NaN if any touched node is NaN.
pub fn bilinear(slice: ArrayView2<'_, f64>, lat: Stencil, lon: Stencil) -> f64 {
    let mut acc = 0.0;
    for (i, wi) in lat.taps() {
        for (j, wj) in lon.taps() {
            let v = slice[[i, j]];
            if v.is_nan() {
                return f64::NAN;
            }
            acc += wi * wj * v;
        }
    }
    acc
}

/// Trilinear sample of a (depth, lat, lon) volume. NaN if any touched node is NaN.
pub fn trilinear(vol: ArrayView3<'_, f64>, depth: Stencil, lat: Stencil, lon: Stencil) -> f64 {
    let mut acc = 0.0;
    for (k, wk) in depth.taps() {
        for (i, wi) in lat.taps() {
            for (j, wj) in lon.taps() {
                let v = vol[[k, i, j]];
                if v.is_nan() {
                    return f64::NAN;
                }
                acc += wk * wi * wj * v;
            }
        }
    }
    acc
}
