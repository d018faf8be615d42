//! Orthonormal frames, null spaces, sums, complements and principal angles.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::{AnalyticVector, C64};
use crate::linalg;

/// Default relative singular-value threshold for null spaces.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;
/// Gap ratio below which a rank decision is reported as fragile.
pub const GAP_WARN_RATIO: f64 = 1e3;

/// Subspace of `C^ambient` given by orthonormal columns.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    frame: DMatrix<C64>,
    rank_tol: f64,
}

/// Singular values with the rank decision that was taken on them.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    /// Descending.
    pub singular_values: Vec<f64>,
    pub rank: usize,
    pub threshold: f64,
}

impl Spectrum {
    pub fn sigma_max(&self) -> f64 {
        self.singular_values.first().copied().unwrap_or(0.0)
    }

    /// Smallest kept over largest dropped singular value (infinite when nothing is dropped or the drop is exact).
    pub fn gap_ratio(&self) -> f64 {
        if self.rank == 0 || self.rank >= self.singular_values.len() {
            return f64::INFINITY;
        }
        let kept = self.singular_values[self.rank - 1];
        let dropped = self.singular_values[self.rank];
        if dropped == 0.0 {
            f64::INFINITY
        } else {
            kept / dropped
        }
    }
}

/// SVD with a complete right basis, sorted descending.
fn full_svd(a: &DMatrix<C64>) -> linalg::Svd {
    linalg::svd(a, true)
}

impl SubspaceBasis {
    /// Wraps columns that are already orthonormal.
    pub fn from_orthonormal(frame: DMatrix<C64>, rank_tol: f64) -> Self {
        Self { frame, rank_tol }
    }

    pub fn empty(ambient: usize) -> Self {
        Self { frame: DMatrix::zeros(ambient, 0), rank_tol: 0.0 }
    }

    pub fn full(ambient: usize) -> Self {
        Self { frame: DMatrix::identity(ambient, ambient), rank_tol: 0.0 }
    }

    /// Orthonormal basis of the column span; singular values at or below
    /// `tol·max(1, σ_max)` are discarded (so zero generators drop out).
    pub fn from_columns(a: &DMatrix<C64>, tol: f64) -> Self {
        if a.ncols() == 0 {
            return Self::empty(a.nrows());
        }
        let svd = linalg::svd(a, false);
        let u = svd.u;
        let s = &svd.s;
        let smax = s.iter().copied().fold(0.0, f64::max);
        let thresh = tol * smax.max(1.0);
        let keep: Vec<usize> = (0..s.len()).filter(|&i| s[i] > thresh).collect();
        let mut frame = DMatrix::zeros(a.nrows(), keep.len());
        for (dst, &src) in keep.iter().enumerate() {
            frame.set_column(dst, &u.column(src));
        }
        Self { frame, rank_tol: tol }
    }

    pub fn from_vectors(ambient: usize, vectors: &[DVector<C64>], tol: f64) -> Result<Self> {
        if let Some(v) = vectors.iter().find(|v| v.len() != ambient) {
            return Err(Error::DimensionMismatch(format!("vector of length {} in ambient {ambient}", v.len())));
        }
        if vectors.is_empty() {
            return Ok(Self::empty(ambient));
        }
        Ok(Self::from_columns(&DMatrix::from_columns(vectors), tol))
    }

    pub fn from_analytic(vectors: &[AnalyticVector], tol: f64) -> Result<Self> {
        let ambient = vectors.first().map_or(0, |v| v.order() + 1);
        let cols: Vec<DVector<C64>> = vectors.iter().map(|v| v.to_dvector()).collect();
        Self::from_vectors(ambient, &cols, tol)
    }

    pub fn frame(&self) -> &DMatrix<C64> {
        &self.frame
    }

    pub fn dim(&self) -> usize {
        self.frame.ncols()
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    pub fn column(&self, j: usize) -> DVector<C64> {
        self.frame.column(j).into_owned()
    }

    pub fn columns(&self) -> Vec<DVector<C64>> {
        (0..self.dim()).map(|j| self.column(j)).collect()
    }

    /// Orthogonal projection onto the subspace.
    pub fn project(&self, v: &DVector<C64>) -> DVector<C64> {
        &self.frame * (self.frame.adjoint() * v)
    }

    /// `v - P v`.
    pub fn residual(&self, v: &DVector<C64>) -> DVector<C64> {
        v - self.project(v)
    }

    pub fn project_columns(&self, a: &DMatrix<C64>) -> DMatrix<C64> {
        &self.frame * (self.frame.adjoint() * a)
    }

    /// Largest deviation of `frame* frame` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let g = self.frame.adjoint() * &self.frame;
        let k = g.nrows();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            for j in 0..k {
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - C64::new(want, 0.0)).norm());
            }
        }
        worst
    }

    fn check_same_ambient(&self, other: &Self) -> Result<()> {
        if self.ambient_dim() != other.ambient_dim() {
            return Err(Error::DimensionMismatch(format!(
                "ambient dimensions {} and {}",
                self.ambient_dim(),
                other.ambient_dim()
            )));
        }
        Ok(())
    }
}

/// Null space `{x : ‖Ax‖ ≤ rank_tol·σ_max·‖x‖}` together with its complement
/// (the row space) and the spectrum behind the rank decision.
#[derive(Debug, Clone)]
pub struct NullSpace {
    pub kernel: SubspaceBasis,
    pub row_space: SubspaceBasis,
    pub spectrum: Spectrum,
}

pub fn null_space_detailed(a: &DMatrix<C64>, rank_tol: f64) -> NullSpace {
    let n = a.ncols();
    if a.nrows() == 0 || n == 0 {
        return NullSpace {
            kernel: SubspaceBasis { frame: DMatrix::identity(n, n), rank_tol },
            row_space: SubspaceBasis::empty(n),
            spectrum: Spectrum { singular_values: vec![], rank: 0, threshold: 0.0 },
        };
    }
    let svd = full_svd(a);
    let smax = svd.s.first().copied().unwrap_or(0.0);
    let threshold = rank_tol * smax;
    let rank = if smax == 0.0 { 0 } else { svd.s.iter().filter(|&&s| s > threshold).count() };
    let kernel = svd.v.columns(rank, n - rank).into_owned();
    let row = svd.v.columns(0, rank).into_owned();
    let sv: Vec<f64> = svd.s.iter().copied().take(a.nrows().min(n)).collect();
    NullSpace {
        kernel: SubspaceBasis { frame: kernel, rank_tol },
        row_space: SubspaceBasis { frame: row, rank_tol },
        spectrum: Spectrum { singular_values: sv, rank, threshold },
    }
}

pub fn null_space(a: &DMatrix<C64>, rank_tol: f64) -> SubspaceBasis {
    null_space_detailed(a, rank_tol).kernel
}

/// Orthonormal frame of the sum of two subspaces.
pub fn subspace_sum(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<SubspaceBasis> {
    a.check_same_ambient(b)?;
    let mut m = DMatrix::zeros(a.ambient_dim(), a.dim() + b.dim());
    m.columns_mut(0, a.dim()).copy_from(&a.frame);
    m.columns_mut(a.dim(), b.dim()).copy_from(&b.frame);
    let tol = a.rank_tol.max(b.rank_tol).max(1e-12);
    Ok(SubspaceBasis::from_columns(&m, tol))
}

/// Orthogonal complement inside the ambient space.
pub fn complement_in(s: &SubspaceBasis) -> SubspaceBasis {
    let n = s.ambient_dim();
    if s.dim() == 0 {
        return SubspaceBasis::full(n);
    }
    let a = s.frame.adjoint();
    let svd = full_svd(&a);
    // Columns of an orthonormal frame have unit singular values; anything
    // clearly below one is numerical noise.
    let rank = svd.s.iter().filter(|&&x| x > 0.5).count();
    SubspaceBasis { frame: svd.v.columns(rank, n - rank).into_owned(), rank_tol: s.rank_tol }
}

/// Intersection as the complement of the sum of complements.
pub fn intersection(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<SubspaceBasis> {
    let sum = subspace_sum(&complement_in(a), &complement_in(b))?;
    Ok(complement_in(&sum))
}

pub fn dist_to(v: &DVector<C64>, s: &SubspaceBasis) -> Result<f64> {
    if v.len() != s.ambient_dim() {
        return Err(Error::DimensionMismatch(format!("vector {} vs ambient {}", v.len(), s.ambient_dim())));
    }
    Ok(s.residual(v).norm())
}

/// Principal angles in ascending order; there are `min(dim a, dim b)` of them.
/// Small angles come from sines, large ones from cosines.
pub fn principal_angles(a: &SubspaceBasis, b: &SubspaceBasis) -> Result<Vec<f64>> {
    a.check_same_ambient(b)?;
    let (small, big) = if a.dim() <= b.dim() { (a, b) } else { (b, a) };
    let k = small.dim();
    if k == 0 {
        return Ok(Vec::new());
    }
    let cross = small.frame.adjoint() * &big.frame;
    let mut cosines: Vec<f64> = linalg::singular_values(&cross).iter().map(|c| c.min(1.0)).collect();
    cosines.sort_by(|x, y| y.partial_cmp(x).unwrap());
    cosines.resize(k, 0.0);
    let outside = big.residual_columns(&small.frame);
    let mut sines: Vec<f64> = linalg::singular_values(&outside).iter().map(|s| s.min(1.0)).collect();
    sines.sort_by(|x, y| x.partial_cmp(y).unwrap());
    let mut angles = Vec::with_capacity(k);
    for i in 0..k {
        let s = sines.get(i).copied().unwrap_or(0.0);
        if s * s < 0.5 {
            angles.push(s.asin());
        } else {
            angles.push(cosines[i].acos());
        }
    }
    angles.sort_by(|x, y| x.partial_cmp(y).unwrap());
    Ok(angles)
}

impl SubspaceBasis {
    fn residual_columns(&self, a: &DMatrix<C64>) -> DMatrix<C64> {
        a - self.project_columns(a)
    }
}

/// Largest angle between a vector of `small` and the subspace `big`
/// (zero when `small` is trivial, π/2 when containment is impossible by dimension).
pub fn max_angle_into(small: &SubspaceBasis, big: &SubspaceBasis) -> Result<f64> {
    small.check_same_ambient(big)?;
    if small.dim() == 0 {
        return Ok(0.0);
    }
    let outside = big.residual_columns(&small.frame);
    let s = linalg::singular_values(&outside).iter().copied().fold(0.0, f64::max).min(1.0);
    Ok(s.asin())
}

/// Every principal angle of `small` against `big` is at most `tol`.
pub fn contains(small: &SubspaceBasis, big: &SubspaceBasis, tol: f64) -> Result<bool> {
    Ok(max_angle_into(small, big)? <= tol)
}

/// `{f ∈ M : f(0) = 0}`.
pub fn zero_at_origin_slice(m: &SubspaceBasis) -> SubspaceBasis {
    if m.dim() == 0 {
        return m.clone();
    }
    let row = m.frame.rows(0, 1).into_owned();
    // absolute test: a row of rounding noise must not cost a dimension
    let mut combo = if row.norm() <= 1e-12 {
        m.frame.clone()
    } else {
        &m.frame * null_space(&row, 1e-12).frame()
    };
    combo.row_mut(0).fill(C64::new(0.0, 0.0));
    SubspaceBasis::from_columns(&combo, 1e-9)
}

/// Elements of `M` of degree at most `d`, made exact by zeroing the (tiny)
/// coefficients above `d` and re-orthonormalizing.
pub fn degree_slice(m: &SubspaceBasis, d: usize, tol: f64) -> SubspaceBasis {
    let n = m.ambient_dim();
    if d + 1 >= n || m.dim() == 0 {
        return m.clone();
    }
    let high = m.frame.rows(d + 1, n - d - 1).into_owned();
    let svd = full_svd(&high);
    let rank = svd.s.iter().filter(|&&x| x > tol).count();
    let k = m.dim();
    let coeffs = svd.v.columns(rank, k - rank).into_owned();
    let mut combo = &m.frame * coeffs;
    combo.rows_mut(d + 1, n - d - 1).fill(C64::new(0.0, 0.0));
    SubspaceBasis::from_columns(&combo, 1e-9)
}
