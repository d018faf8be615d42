//! Dense SVD backed by faer. nalgebra's complex SVD can return factors that do not
//! reproduce rank-deficient inputs, so every decomposition goes through here.

use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::fourier::C64;

/// `a = u · diag(s) · v^*`, singular values descending.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DMatrix<C64>,
    pub s: Vec<f64>,
    pub v: DMatrix<C64>,
}

fn to_faer(a: &DMatrix<C64>) -> Mat<C64> {
    Mat::from_fn(a.nrows(), a.ncols(), |i, j| a[(i, j)])
}

fn from_faer(m: faer::MatRef<'_, C64>) -> DMatrix<C64> {
    DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
}

/// With `full` both `u` and `v` are square; otherwise they have `min(m, n)` columns.
pub fn svd(a: &DMatrix<C64>, full: bool) -> Svd {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        let k = if full { 0 } else { m.min(n) };
        return Svd {
            u: DMatrix::identity(m, if full { m } else { k }),
            s: vec![],
            v: DMatrix::identity(n, if full { n } else { k }),
        };
    }
    let fa = to_faer(a);
    let dec = if full { fa.svd() } else { fa.thin_svd() }.expect("SVD iteration converges on finite input");
    let s_raw: Vec<f64> = dec.S().column_vector().iter().map(|c| c.re).collect();
    let u = from_faer(dec.U());
    let v = from_faer(dec.V());
    let mut order: Vec<usize> = (0..s_raw.len()).collect();
    order.sort_by(|&i, &j| s_raw[j].partial_cmp(&s_raw[i]).unwrap_or(std::cmp::Ordering::Equal));
    if order.iter().enumerate().all(|(k, &i)| k == i) {
        return Svd { u, s: s_raw, v };
    }
    let mut us = u.clone();
    let mut vs = v.clone();
    for (dst, &src) in order.iter().enumerate() {
        us.set_column(dst, &u.column(src));
        vs.set_column(dst, &v.column(src));
    }
    Svd { u: us, s: order.iter().map(|&i| s_raw[i]).collect(), v: vs }
}

pub fn singular_values(a: &DMatrix<C64>) -> Vec<f64> {
    svd(a, false).s
}

pub fn spectral_norm(a: &DMatrix<C64>) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Minimum-norm least squares solution, singular values at or below `cutoff` treated as zero.
pub fn least_squares(a: &DMatrix<C64>, b: &DVector<C64>, cutoff: f64) -> DVector<C64> {
    let d = svd(a, false);
    let mut x = DVector::zeros(a.ncols());
    for (k, &s) in d.s.iter().enumerate() {
        if s > cutoff {
            let coeff = d.u.column(k).dotc(b) / s;
            x += d.v.column(k) * coeff;
        }
    }
    x
}
