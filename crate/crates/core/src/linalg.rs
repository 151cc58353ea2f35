//! Dense linear-algebra helpers on top of nalgebra's SVD.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};

pub fn to_dmatrix(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub fn from_dmatrix(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Minimum-ℓ2-norm solution of `min ‖A x − b‖₂`, singular values below
/// `max(m, n) · ε · σ_max` treated as zero.
pub fn lstsq_min_norm(a: ArrayView2<f64>, b: ArrayView1<f64>) -> Array1<f64> {
    if a.ncols() == 0 {
        return Array1::zeros(0);
    }
    let am = to_dmatrix(a);
    let svd = am.svd(true, true);
    let smax = svd.singular_values.iter().fold(0.0f64, |m, v| m.max(*v));
    let cutoff = smax * f64::EPSILON * a.nrows().max(a.ncols()) as f64;
    let u = svd.u.as_ref().expect("u requested");
    let vt = svd.v_t.as_ref().expect("v_t requested");
    let mut x = Array1::zeros(a.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coef: f64 = (0..a.nrows()).map(|i| u[(i, k)] * b[i]).sum::<f64>() / s;
        for j in 0..a.ncols() {
            x[j] += coef * vt[(k, j)];
        }
    }
    x
}

/// Singular values in decreasing order with left/right singular vectors
/// as columns of `u` and rows of `vt`.
pub struct Svd {
    pub u: Array2<f64>,
    pub s: Vec<f64>,
    pub vt: Array2<f64>,
}

pub fn svd(a: ArrayView2<f64>) -> Svd {
    let am = to_dmatrix(a);
    let svd = am.svd(true, true);
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].total_cmp(&svd.singular_values[i]));
    let u0 = svd.u.expect("u requested");
    let vt0 = svd.v_t.expect("v_t requested");
    let k = order.len();
    let u = Array2::from_shape_fn((a.nrows(), k), |(i, c)| u0[(i, order[c])]);
    let vt = Array2::from_shape_fn((k, a.ncols()), |(r, j)| vt0[(order[r], j)]);
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    Svd { u, s, vt }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn min_norm_on_rank_deficient() {
        // duplicated column: minimum-norm solution splits the weight
        let a = array![[1.0, 1.0], [2.0, 2.0]];
        let b = array![2.0, 4.0];
        let x = lstsq_min_norm(a.view(), b.view());
        assert!((x[0] - 1.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn svd_sorted() {
        let a = array![[1.0, 0.0], [0.0, 3.0], [0.0, 0.0]];
        let d = svd(a.view());
        assert!((d.s[0] - 3.0).abs() < 1e-12 && (d.s[1] - 1.0).abs() < 1e-12);
        assert!((d.u[[1, 0]].abs() - 1.0).abs() < 1e-12);
    }
}
