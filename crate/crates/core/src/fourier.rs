//! Truncated Fourier and Taylor coefficient arrays.
//!
//! A [`LaurentVector`] of order `N` stores the coefficients of `z^n` for
//! `n = -N..=N` in one flat array with offset `N`. An [`AnalyticVector`] of
//! order `N` stores `n = 0..=N`. Every accessor takes the frequency index,
//! never the array position.

use nalgebra::DVector;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Default max-norm tolerance for vector equality.
pub const EQ_TOL: f64 = 1e-12;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

fn check_finite(coeffs: &[C64]) -> Result<()> {
    if coeffs.iter().all(|c| c.re.is_finite() && c.im.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("non-finite coefficient".into()))
    }
}

/// Trigonometric polynomial `Σ_{n=-N}^{N} c_n z^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct LaurentVector {
    order: usize,
    coeffs: Vec<C64>,
}

impl LaurentVector {
    pub fn zeros(order: usize) -> Self {
        Self { order, coeffs: vec![ZERO; 2 * order + 1] }
    }

    /// `coeffs[i]` is the coefficient of `z^(i - order)`.
    pub fn new(order: usize, coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.len() != 2 * order + 1 {
            return Err(Error::DimensionMismatch(format!(
                "order {order} needs {} coefficients, got {}",
                2 * order + 1,
                coeffs.len()
            )));
        }
        check_finite(&coeffs)?;
        Ok(Self { order, coeffs })
    }

    /// Builds from `(index, value)` pairs; repeated indices accumulate.
    pub fn from_terms(order: usize, terms: &[(isize, C64)]) -> Result<Self> {
        let mut out = Self::zeros(order);
        for &(n, c) in terms {
            if n.unsigned_abs() > order {
                return Err(Error::BudgetExceeded(format!("index {n} outside order {order}")));
            }
            out.coeffs[(n + order as isize) as usize] += c;
        }
        check_finite(&out.coeffs)?;
        Ok(out)
    }

    pub fn monomial(order: usize, n: isize, c: C64) -> Result<Self> {
        Self::from_terms(order, &[(n, c)])
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `z^n`; zero outside the stored range.
    pub fn coeff(&self, n: isize) -> C64 {
        if n.unsigned_abs() > self.order {
            ZERO
        } else {
            self.coeffs[(n + self.order as isize) as usize]
        }
    }

    pub fn indexed(&self) -> impl Iterator<Item = (isize, C64)> + '_ {
        let off = self.order as isize;
        self.coeffs.iter().enumerate().map(move |(i, &c)| (i as isize - off, c))
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Norm of the part with negative frequencies.
    pub fn negative_norm(&self) -> f64 {
        self.coeffs[..self.order].iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Re-sections to a new order; coefficients outside `-order..=order` are dropped.
    pub fn section(&self, order: usize) -> Self {
        let mut out = Self::zeros(order);
        let m = order.min(self.order) as isize;
        for n in -m..=m {
            out.coeffs[(n + order as isize) as usize] = self.coeff(n);
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { order: self.order, coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// Sum; the result has the larger of the two orders.
    pub fn plus(&self, other: &Self) -> Self {
        let order = self.order.max(other.order);
        let o = order as isize;
        let coeffs = (-o..=o).map(|n| self.coeff(n) + other.coeff(n)).collect();
        Self { order, coeffs }
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scale(-ONE))
    }

    /// Exact product; the result has order `self.order + other.order`.
    pub fn mul(&self, other: &Self) -> Self {
        let order = self.order + other.order;
        let mut out = Self::zeros(order);
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == ZERO {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                out.coeffs[i + j] += a * b;
            }
        }
        out
    }

    /// Largest coefficient difference, treating missing indices as zero.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let o = self.order.max(other.order) as isize;
        (-o..=o).map(|n| (self.coeff(n) - other.coeff(n)).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

/// Truncated Taylor series `Σ_{n=0}^{N} c_n z^n`.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalyticVector {
    coeffs: Vec<C64>,
}

impl AnalyticVector {
    pub fn zeros(order: usize) -> Self {
        Self { coeffs: vec![ZERO; order + 1] }
    }

    /// `coeffs[n]` is the coefficient of `z^n`; order is `coeffs.len() - 1`.
    pub fn new(coeffs: Vec<C64>) -> Result<Self> {
        if coeffs.is_empty() {
            return Err(Error::DimensionMismatch("empty coefficient array".into()));
        }
        check_finite(&coeffs)?;
        Ok(Self { coeffs })
    }

    /// Pads `coeffs` with zeros up to `order`; errors if it does not fit.
    pub fn padded(coeffs: &[C64], order: usize) -> Result<Self> {
        if coeffs.len() > order + 1 {
            return Err(Error::BudgetExceeded(format!(
                "degree {} does not fit order {order}",
                coeffs.len() - 1
            )));
        }
        let mut v = coeffs.to_vec();
        v.resize(order + 1, ZERO);
        Self::new(v)
    }

    pub fn monomial(order: usize, k: usize, c: C64) -> Result<Self> {
        if k > order {
            return Err(Error::BudgetExceeded(format!("z^{k} outside order {order}")));
        }
        let mut out = Self::zeros(order);
        out.coeffs[k] = c;
        Ok(out)
    }

    pub fn from_dvector(v: &DVector<C64>) -> Self {
        Self { coeffs: v.iter().copied().collect() }
    }

    pub fn to_dvector(&self) -> DVector<C64> {
        DVector::from_column_slice(&self.coeffs)
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> C64 {
        self.coeffs.get(n).copied().unwrap_or(ZERO)
    }

    pub fn value_at_zero(&self) -> C64 {
        self.coeffs[0]
    }

    /// Highest index with modulus above `tol`, `None` for the (numerically) zero vector.
    pub fn degree(&self, tol: f64) -> Option<usize> {
        self.coeffs.iter().rposition(|c| c.norm() > tol)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * z + c)
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn to_laurent(&self) -> LaurentVector {
        let order = self.order();
        let mut coeffs = vec![ZERO; order];
        coeffs.extend_from_slice(&self.coeffs);
        LaurentVector { order, coeffs }
    }

    /// Changes the order, failing if a nonzero coefficient would be dropped.
    pub fn resized(&self, order: usize) -> Result<Self> {
        if let Some(deg) = self.degree(0.0) {
            if deg > order {
                return Err(Error::BudgetExceeded(format!("degree {deg} exceeds order {order}")));
            }
        }
        Ok(self.truncated(order))
    }

    /// Finite-section cut (or zero padding) to `order`.
    pub fn truncated(&self, order: usize) -> Self {
        let mut v = self.coeffs.clone();
        v.resize(order + 1, ZERO);
        Self { coeffs: v }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { coeffs: self.coeffs.iter().map(|&c| c * s).collect() }
    }

    /// Sum; the result has the larger of the two orders.
    pub fn plus(&self, other: &Self) -> Self {
        let order = self.order().max(other.order());
        Self { coeffs: (0..=order).map(|n| self.coeff(n) + other.coeff(n)).collect() }
    }

    pub fn minus(&self, other: &Self) -> Self {
        self.plus(&other.scale(-ONE))
    }

    /// Product cut at `order`.
    pub fn mul_truncated(&self, other: &Self, order: usize) -> Self {
        Self { coeffs: convolve_truncated(&self.coeffs, &other.coeffs, order) }
    }

    /// Product that must fit in `order` exactly.
    pub fn mul_within(&self, other: &Self, order: usize) -> Result<Self> {
        let da = self.degree(0.0);
        let db = other.degree(0.0);
        if let (Some(a), Some(b)) = (da, db) {
            if a + b > order {
                return Err(Error::BudgetExceeded(format!("product degree {} exceeds {order}", a + b)));
            }
        }
        Ok(self.mul_truncated(other, order))
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let order = self.order().max(other.order());
        (0..=order).map(|n| (self.coeff(n) - other.coeff(n)).norm()).fold(0.0, f64::max)
    }

    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }
}

/// Cauchy product of two coefficient arrays, cut at degree `order`.
pub fn convolve_truncated(a: &[C64], b: &[C64], order: usize) -> Vec<C64> {
    let mut out = vec![ZERO; order + 1];
    for (i, &x) in a.iter().enumerate().take(order + 1) {
        if x == ZERO {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// `(Jv)_n = v_{-n}`.
pub fn flip(v: &LaurentVector) -> LaurentVector {
    let mut coeffs = v.coeffs.clone();
    coeffs.reverse();
    LaurentVector { order: v.order, coeffs }
}

/// Keeps the indices `n >= 0`.
pub fn riesz_project(v: &LaurentVector) -> AnalyticVector {
    AnalyticVector { coeffs: v.coeffs[v.order..].to_vec() }
}

/// Keeps the indices `n <= -1`.
pub fn co_project(v: &LaurentVector) -> LaurentVector {
    let mut coeffs = v.coeffs.clone();
    for c in &mut coeffs[v.order..] {
        *c = ZERO;
    }
    LaurentVector { order: v.order, coeffs }
}

/// Multiplication by `z` within the same order.
pub fn shift(f: &AnalyticVector) -> Result<AnalyticVector> {
    let n = f.order();
    if f.coeffs[n] != ZERO {
        return Err(Error::BudgetExceeded(format!("shift pushes z^{n} past order {n}")));
    }
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[1..].copy_from_slice(&f.coeffs[..n]);
    Ok(AnalyticVector { coeffs })
}

/// `(f - f(0)) / z`.
pub fn backshift(f: &AnalyticVector) -> AnalyticVector {
    let n = f.order();
    let mut coeffs = vec![ZERO; n + 1];
    coeffs[..n].copy_from_slice(&f.coeffs[1..]);
    AnalyticVector { coeffs }
}

/// The L² pairing `Σ a_n conj(b_n)`.
pub trait Inner {
    fn inner(&self, other: &Self) -> Result<C64>;
}

fn pair(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

impl Inner for LaurentVector {
    fn inner(&self, other: &Self) -> Result<C64> {
        if self.order != other.order {
            return Err(Error::DimensionMismatch(format!("orders {} and {}", self.order, other.order)));
        }
        Ok(pair(&self.coeffs, &other.coeffs))
    }
}

impl Inner for AnalyticVector {
    fn inner(&self, other: &Self) -> Result<C64> {
        if self.order() != other.order() {
            return Err(Error::DimensionMismatch(format!(
                "orders {} and {}",
                self.order(),
                other.order()
            )));
        }
        Ok(pair(&self.coeffs, &other.coeffs))
    }
}

pub fn inner<T: Inner>(a: &T, b: &T) -> Result<C64> {
    a.inner(b)
}

/// Truncation parameters shared by every finite-section computation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TruncationBudget {
    /// Matrix order `N`: vectors carry indices `0..=N`.
    pub order: usize,
    /// Degree budget `d` for test vectors.
    pub degree: usize,
    pub tail_eps: f64,
    /// Minimum size of the band `N - 2d`.
    pub guard: usize,
}

pub const DEFAULT_TAIL_EPS: f64 = 1e-12;
pub const DEFAULT_GUARD: usize = 10;

impl TruncationBudget {
    pub fn new(order: usize, degree: usize) -> Result<Self> {
        Self::with_params(order, degree, DEFAULT_TAIL_EPS, DEFAULT_GUARD)
    }

    pub fn with_params(order: usize, degree: usize, tail_eps: f64, guard: usize) -> Result<Self> {
        let b = Self { order, degree, tail_eps, guard };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tail_eps > 0.0 && self.tail_eps.is_finite()) {
            return Err(Error::InvalidBudget(format!("tail_eps must be positive, got {}", self.tail_eps)));
        }
        if self.order < 2 * self.degree + self.guard {
            return Err(Error::InvalidBudget(format!(
                "order {} below 2*{} + guard {}",
                self.order, self.degree, self.guard
            )));
        }
        Ok(())
    }

    /// Also requires room for data of polynomial degree `bandwidth`.
    pub fn check_bandwidth(&self, bandwidth: usize) -> Result<()> {
        let need = 2 * self.degree + self.guard.max(bandwidth);
        if self.order < need {
            return Err(Error::BudgetExceeded(format!(
                "order {} below 2*{} + max(guard {}, bandwidth {bandwidth})",
                self.order, self.degree, self.guard
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn flip_negates_indices() {
        let v = LaurentVector::from_terms(2, &[(-1, c(1.0)), (1, c(2.0))]).unwrap();
        let w = flip(&v);
        assert_eq!(w.coeff(1), c(1.0));
        assert_eq!(w.coeff(-1), c(2.0));
        let z2 = LaurentVector::monomial(3, 2, c(1.0)).unwrap();
        assert_eq!(flip(&z2), LaurentVector::monomial(3, -2, c(1.0)).unwrap());
        let one = LaurentVector::monomial(1, 0, c(1.0)).unwrap();
        assert_eq!(flip(&one), one);
    }

    #[test]
    fn projections_split_frequencies() {
        let v = LaurentVector::from_terms(1, &[(-1, c(1.0)), (0, c(2.0)), (1, c(1.0))]).unwrap();
        assert_eq!(riesz_project(&v).coeffs(), &[c(2.0), c(1.0)]);
        let co = co_project(&v);
        assert_eq!(co, LaurentVector::monomial(1, -1, c(1.0)).unwrap());
        assert_eq!(riesz_project(&v).to_laurent().plus(&co), v);
        let m2 = LaurentVector::monomial(2, -2, c(1.0)).unwrap();
        assert_eq!(riesz_project(&m2).norm(), 0.0);
        assert_eq!(co_project(&LaurentVector::monomial(2, 0, c(1.0)).unwrap()).norm(), 0.0);
    }

    #[test]
    fn shifts_move_one_step() {
        let f = AnalyticVector::padded(&[c(1.0), c(1.0)], 4).unwrap();
        assert_eq!(shift(&f).unwrap().coeffs()[..3], [c(0.0), c(1.0), c(1.0)]);
        let g = AnalyticVector::padded(&[c(1.0), c(0.0), c(3.0)], 4).unwrap();
        assert_eq!(backshift(&g), AnalyticVector::monomial(4, 1, c(3.0)).unwrap());
        assert_eq!(backshift(&AnalyticVector::monomial(4, 0, c(5.0)).unwrap()).norm(), 0.0);
        let top = AnalyticVector::monomial(4, 4, c(1.0)).unwrap();
        assert!(matches!(shift(&top), Err(Error::BudgetExceeded(_))));
    }

    #[test]
    fn inner_products() {
        let z = AnalyticVector::monomial(3, 1, c(1.0)).unwrap();
        let one = AnalyticVector::monomial(3, 0, c(1.0)).unwrap();
        assert_eq!(inner(&z, &z).unwrap(), c(1.0));
        assert_eq!(inner(&one, &z).unwrap(), c(0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let h = AnalyticVector::padded(&[c(s), c(s)], 3).unwrap();
        assert!((inner(&h, &one).unwrap() - c(s)).norm() < 1e-15);
        let short = AnalyticVector::zeros(2);
        assert!(matches!(inner(&h, &short), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn degree_guards() {
        let a = AnalyticVector::padded(&[c(1.0), c(1.0)], 2).unwrap();
        assert!(a.mul_within(&a, 2).is_ok());
        assert!(a.mul_within(&a, 1).is_err());
        assert!(a.resized(0).is_err());
        assert!(AnalyticVector::padded(&[c(1.0); 4], 2).is_err());
        assert!(LaurentVector::new(1, vec![c(f64::NAN), c(0.0), c(0.0)]).is_err());
    }

    #[test]
    fn budget_guard() {
        assert!(TruncationBudget::new(30, 10).is_ok());
        assert!(TruncationBudget::new(29, 10).is_err());
        assert!(TruncationBudget::with_params(40, 10, 0.0, 10).is_err());
        let b = TruncationBudget::new(30, 10).unwrap();
        assert!(b.check_bandwidth(12).is_err());
    }
}
