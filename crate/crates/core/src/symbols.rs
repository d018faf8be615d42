//! Symbol classes: finite Blaschke products, invertible outer factors and
//! the Laurent symbols built from them.

use crate::error::{Error, Result};
use crate::fourier::{convolve_truncated, flip, AnalyticVector, LaurentVector, TruncationBudget, C64, ONE, ZERO};

/// Extra expansion length used when forming products like `conj(θ)·g`.
const PRODUCT_PAD: usize = 64;
/// Largest order the automatic budget will consider.
pub const MAX_AUTO_ORDER: usize = 512;

/// `c · Π (z - a_j) / (1 - conj(a_j) z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BlaschkeProduct {
    zeros: Vec<C64>,
    unimodular: C64,
}

impl BlaschkeProduct {
    pub fn new(zeros: Vec<C64>, unimodular: C64) -> Result<Self> {
        if let Some(a) = zeros.iter().find(|a| !(a.norm() < 1.0)) {
            return Err(Error::ZeroOutsideDisk(format!("{a}")));
        }
        if !((unimodular.norm() - 1.0).abs() <= 1e-14) {
            return Err(Error::InvalidInput(format!("|{unimodular}| != 1")));
        }
        Ok(Self { zeros, unimodular })
    }

    pub fn from_zeros(zeros: Vec<C64>) -> Result<Self> {
        Self::new(zeros, ONE)
    }

    /// `z^k`.
    pub fn monomial(k: usize) -> Self {
        Self { zeros: vec![ZERO; k], unimodular: ONE }
    }

    pub fn zeros(&self) -> &[C64] {
        &self.zeros
    }

    pub fn unimodular(&self) -> C64 {
        self.unimodular
    }

    pub fn degree(&self) -> usize {
        self.zeros.len()
    }

    /// Largest zero modulus (0 for monomials and constants).
    pub fn radius(&self) -> f64 {
        self.zeros.iter().map(|a| a.norm()).fold(0.0, f64::max)
    }

    pub fn eval(&self, z: C64) -> C64 {
        self.zeros.iter().fold(self.unimodular, |acc, a| acc * (z - a) / (ONE - a.conj() * z))
    }

    /// Taylor coefficients through degree `order`.
    pub fn coeffs(&self, order: usize) -> AnalyticVector {
        let mut acc = vec![ZERO; order + 1];
        acc[0] = self.unimodular;
        for a in &self.zeros {
            acc = convolve_truncated(&acc, &mobius_series(*a, order), order);
        }
        AnalyticVector::new(acc).expect("finite coefficients")
    }

    /// Certified bound on `Σ_{n>order} |θ̂(n)|`.
    pub fn tail_bound(&self, order: usize) -> f64 {
        let radii: Vec<f64> = self.zeros.iter().map(|a| a.norm()).collect();
        majorant_tail(&radii, order)
    }
}

/// Geometric-series expansion of `(z - a)/(1 - conj(a) z)`:
/// constant term `-a`, then `(1 - |a|²) conj(a)^(n-1)`.
pub(crate) fn mobius_series(a: C64, order: usize) -> Vec<C64> {
    let mut out = vec![ZERO; order + 1];
    out[0] = -a;
    let mut p = C64::new(1.0 - a.norm_sqr(), 0.0);
    for c in out.iter_mut().skip(1) {
        *c = p;
        p *= a.conj();
    }
    out
}

/// Tail of the coefficient majorant `Π (r + (1-r²) z / (1 - r z))`, which
/// dominates every Blaschke product with zero moduli `radii`.
fn majorant_tail(radii: &[f64], order: usize) -> f64 {
    let rmax = radii.iter().copied().fold(0.0, f64::max);
    if rmax == 0.0 {
        // c·z^p: a single coefficient of modulus one.
        return if radii.len() > order { 1.0 } else { 0.0 };
    }
    let explicit = 3 * order + 30;
    let mut acc = vec![0.0; explicit + 1];
    acc[0] = 1.0;
    for &r in radii {
        let mut series = vec![0.0; explicit + 1];
        series[0] = r;
        let mut p = 1.0 - r * r;
        for c in series.iter_mut().skip(1) {
            *c = p;
            p *= r;
        }
        acc = conv_real(&acc, &series, explicit);
    }
    let middle: f64 = acc[order + 1..].iter().sum();
    // Cauchy estimate for indices beyond the explicit range.
    let value_at = |x: f64| radii.iter().map(|&r| r + (1.0 - r * r) * x / (1.0 - r * x)).product::<f64>();
    let mut far = f64::INFINITY;
    for i in 1..400 {
        let s = rmax + (1.0 - rmax) * i as f64 / 400.0;
        let b = value_at(1.0 / s) * s.powi(explicit as i32 + 1) / (1.0 - s);
        far = far.min(b);
    }
    // for one zero the majorant is exact, so pad for rounding in the sums
    (middle + far) * (1.0 + 1e-12)
}

fn conv_real(a: &[f64], b: &[f64], order: usize) -> Vec<f64> {
    let mut out = vec![0.0; order + 1];
    for (i, &x) in a.iter().enumerate().take(order + 1) {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate().take(order + 1 - i) {
            out[i + j] += x * y;
        }
    }
    out
}

/// Conjugate symbol `conj(θ)` on the circle: `(conj θ)^(-n) = conj(θ̂(n))`.
pub fn conj_symbol_coeffs(theta: &BlaschkeProduct, order: usize) -> LaurentVector {
    let t = theta.coeffs(order);
    conj_of_analytic(&t)
}

/// Boundary conjugate of an analytic vector, as a Laurent vector supported on `n <= 0`.
pub fn conj_of_analytic(f: &AnalyticVector) -> LaurentVector {
    let conj: Vec<C64> = f.coeffs().iter().map(|c| c.conj()).collect();
    flip(&AnalyticVector::new(conj).expect("finite").to_laurent())
}

pub fn blaschke_coeffs(theta: &BlaschkeProduct, order: usize) -> AnalyticVector {
    theta.coeffs(order)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OuterClass {
    /// Nonzero constant.
    Literal,
    /// `c · exp(p)` with a polynomial `p`.
    Extended,
}

/// Invertible outer factor `g = c · exp(p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OuterSymbol {
    constant: C64,
    log_coeffs: Vec<C64>,
    class: OuterClass,
}

impl OuterSymbol {
    pub fn literal(constant: C64) -> Result<Self> {
        Self::new(constant, Vec::new(), OuterClass::Literal)
    }

    pub fn extended(constant: C64, log_coeffs: Vec<C64>) -> Result<Self> {
        Self::new(constant, log_coeffs, OuterClass::Extended)
    }

    pub fn new(constant: C64, log_coeffs: Vec<C64>, class: OuterClass) -> Result<Self> {
        if constant == ZERO || !constant.re.is_finite() || !constant.im.is_finite() {
            return Err(Error::ZeroConstant);
        }
        if log_coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite log coefficient".into()));
        }
        if class == OuterClass::Literal && log_coeffs.iter().any(|c| *c != ZERO) {
            return Err(Error::InvalidInput("literal outer symbols are constants".into()));
        }
        Ok(Self { constant, log_coeffs, class })
    }

    pub fn constant(&self) -> C64 {
        self.constant
    }

    pub fn log_coeffs(&self) -> &[C64] {
        &self.log_coeffs
    }

    pub fn class(&self) -> OuterClass {
        self.class
    }

    pub fn is_constant(&self) -> bool {
        self.log_coeffs.iter().skip(1).all(|c| *c == ZERO)
    }

    /// Certified bound on the coefficient tail past `order`, for g and for 1/g.
    pub fn tail_bound(&self, order: usize) -> f64 {
        if self.is_constant() {
            return 0.0;
        }
        let moduli: Vec<f64> = self.log_coeffs.iter().map(|c| c.norm()).collect();
        let scale = self.constant.norm().max(1.0 / self.constant.norm())
            * self.log_coeffs.first().map_or(1.0, |c| c.norm().exp());
        let mut best = f64::INFINITY;
        for i in 1..400 {
            let rho = 1.0 + i as f64 * 0.25;
            let m: f64 = moduli.iter().enumerate().skip(1).map(|(k, a)| a * rho.powi(k as i32)).sum();
            let b = scale * (m - (order as f64 + 1.0) * rho.ln()).exp() / (1.0 - 1.0 / rho);
            best = best.min(b);
        }
        best
    }
}

/// Coefficients of `exp(p)` via `n e_n = Σ_{k=1}^{n} k p_k e_{n-k}`.
fn exp_series(p: &[C64], order: usize) -> Vec<C64> {
    let mut e = vec![ZERO; order + 1];
    e[0] = p.first().copied().unwrap_or(ZERO).exp();
    for n in 1..=order {
        let mut s = ZERO;
        for k in 1..=n.min(p.len().saturating_sub(1)) {
            s += p[k] * (k as f64) * e[n - k];
        }
        e[n] = s / n as f64;
    }
    e
}

pub fn outer_coeffs(g: &OuterSymbol, order: usize) -> AnalyticVector {
    let e = exp_series(&g.log_coeffs, order);
    AnalyticVector::new(e).expect("finite").scale(g.constant)
}

/// Coefficients of `1/g = c^{-1} exp(-p)`.
pub fn inverse_outer_coeffs(g: &OuterSymbol, order: usize) -> AnalyticVector {
    let neg: Vec<C64> = g.log_coeffs.iter().map(|c| -c).collect();
    AnalyticVector::new(exp_series(&neg, order)).expect("finite").scale(ONE / g.constant)
}

/// What symbol a scenario uses.
#[derive(Debug, Clone, PartialEq)]
pub enum SymbolSpec {
    Zero,
    /// Polynomial symbol in `zH²`; `coeffs[0]` must vanish.
    AnalyticShift(AnalyticVector),
    ConjInner(BlaschkeProduct),
    ConjInnerTimesOuter(BlaschkeProduct, OuterSymbol),
    RawLaurent(LaurentVector),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SymbolKind {
    Zero,
    AnalyticShift,
    ConjInner,
    ConjInnerTimesOuter,
    RawLaurent,
}

impl SymbolSpec {
    pub fn kind(&self) -> SymbolKind {
        match self {
            SymbolSpec::Zero => SymbolKind::Zero,
            SymbolSpec::AnalyticShift(_) => SymbolKind::AnalyticShift,
            SymbolSpec::ConjInner(_) => SymbolKind::ConjInner,
            SymbolSpec::ConjInnerTimesOuter(..) => SymbolKind::ConjInnerTimesOuter,
            SymbolSpec::RawLaurent(_) => SymbolKind::RawLaurent,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let SymbolSpec::AnalyticShift(f) = self {
            if f.value_at_zero() != ZERO {
                return Err(Error::InvalidInput("analytic shift symbol must vanish at 0".into()));
            }
        }
        Ok(())
    }

    pub fn theta(&self) -> Option<&BlaschkeProduct> {
        match self {
            SymbolSpec::ConjInner(t) | SymbolSpec::ConjInnerTimesOuter(t, _) => Some(t),
            _ => None,
        }
    }

    pub fn outer(&self) -> Option<&OuterSymbol> {
        match self {
            SymbolSpec::ConjInnerTimesOuter(_, g) => Some(g),
            _ => None,
        }
    }

    /// Degree of the polynomial data (0 for rational symbols).
    pub fn bandwidth(&self) -> usize {
        match self {
            SymbolSpec::AnalyticShift(f) => f.degree(0.0).unwrap_or(0),
            SymbolSpec::RawLaurent(v) => v.indexed().filter(|(_, c)| *c != ZERO).map(|(n, _)| n.unsigned_abs()).max().unwrap_or(0),
            _ => 0,
        }
    }

    /// Certified coefficient tail past `order` of the rational factors.
    pub fn tail_bound(&self, order: usize) -> f64 {
        let t = self.theta().map_or(0.0, |t| t.tail_bound(order));
        let g = self.outer().map_or(0.0, |g| g.tail_bound(order));
        t + g
    }
}

/// Symbol expanded for a matrix order `N`.
#[derive(Debug, Clone)]
pub struct ResolvedSymbol {
    pub spec: SymbolSpec,
    pub order: usize,
    /// `φ` on `-(2N+2)..=2N+2`, enough for every Hankel entry of order N.
    pub phi: LaurentVector,
    /// `θ` (or `g` alone) expansions on `0..=expansion_order`.
    pub theta: Option<AnalyticVector>,
    pub outer: Option<AnalyticVector>,
    pub outer_inv: Option<AnalyticVector>,
    pub expansion_order: usize,
    pub tail_bound: f64,
}

pub fn symbol_order(order: usize) -> usize {
    2 * order + 2
}

/// Expands a symbol for matrix order `order` without checking the tail.
pub fn resolve_symbol(spec: &SymbolSpec, order: usize) -> Result<ResolvedSymbol> {
    spec.validate()?;
    let sym = symbol_order(order);
    let exp_order = sym + PRODUCT_PAD;
    let mut theta = None;
    let mut outer = None;
    let mut outer_inv = None;
    let phi = match spec {
        SymbolSpec::Zero => LaurentVector::zeros(sym),
        SymbolSpec::AnalyticShift(f) => f.to_laurent().section(sym),
        SymbolSpec::RawLaurent(v) => v.section(sym),
        SymbolSpec::ConjInner(t) => {
            let tc = t.coeffs(exp_order);
            let phi = conj_of_analytic(&tc).section(sym);
            theta = Some(tc);
            phi
        }
        SymbolSpec::ConjInnerTimesOuter(t, g) => {
            let tc = t.coeffs(exp_order);
            let gc = outer_coeffs(g, exp_order);
            let phi = conj_of_analytic(&tc).mul(&gc.to_laurent()).section(sym);
            theta = Some(tc);
            outer_inv = Some(inverse_outer_coeffs(g, exp_order));
            outer = Some(gc);
            phi
        }
    };
    Ok(ResolvedSymbol {
        spec: spec.clone(),
        order,
        phi,
        theta,
        outer,
        outer_inv,
        expansion_order: exp_order,
        tail_bound: spec.tail_bound(order),
    })
}

/// `φ` for the budget, with the tail certificate enforced.
pub fn build_symbol(spec: &SymbolSpec, budget: &TruncationBudget) -> Result<LaurentVector> {
    Ok(resolve_checked(spec, budget)?.phi)
}

pub fn resolve_checked(spec: &SymbolSpec, budget: &TruncationBudget) -> Result<ResolvedSymbol> {
    budget.validate()?;
    budget.check_bandwidth(spec.bandwidth())?;
    let bound = spec.tail_bound(budget.order);
    if bound > budget.tail_eps {
        return Err(Error::TailBudgetUnreachable { order: budget.order, bound, eps: budget.tail_eps });
    }
    resolve_symbol(spec, budget.order)
}

/// Smallest order meeting both the guard and the tail certificate.
pub fn auto_budget(spec: &SymbolSpec, degree: usize, tail_eps: f64, guard: usize, bandwidth: usize) -> Result<TruncationBudget> {
    let start = 2 * degree + guard.max(bandwidth).max(spec.bandwidth());
    for order in start..=MAX_AUTO_ORDER.max(start) {
        if spec.tail_bound(order) <= tail_eps {
            return TruncationBudget::with_params(order, degree, tail_eps, guard);
        }
    }
    Err(Error::TailBudgetUnreachable {
        order: MAX_AUTO_ORDER,
        bound: spec.tail_bound(MAX_AUTO_ORDER),
        eps: tail_eps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    /// Power-series long division of `num` by `den` (den[0] != 0).
    fn long_division(num: &[C64], den: &[C64], order: usize) -> Vec<C64> {
        let mut rem: Vec<C64> = num.to_vec();
        rem.resize(order + den.len() + 1, ZERO);
        let mut q = vec![ZERO; order + 1];
        for n in 0..=order {
            q[n] = rem[n] / den[0];
            for (k, d) in den.iter().enumerate() {
                rem[n + k] -= q[n] * d;
            }
        }
        q
    }

    #[test]
    fn single_zero_half_matches_closed_form_and_division() {
        let t = BlaschkeProduct::from_zeros(vec![c(0.5, 0.0)]).unwrap();
        let got = t.coeffs(30);
        assert!((got.coeff(0) - c(-0.5, 0.0)).norm() < 1e-16);
        for n in 1..=30 {
            let closed = 3.0 * 2f64.powi(-(n as i32 + 1));
            assert!((got.coeff(n) - c(closed, 0.0)).norm() < 1e-16, "n = {n}");
        }
        let div = long_division(&[c(-0.5, 0.0), c(1.0, 0.0)], &[c(1.0, 0.0), c(-0.5, 0.0)], 30);
        for n in 0..=30 {
            assert!((got.coeff(n) - div[n]).norm() < 1e-15);
        }
        // θ(1) = 1: partial sums approach it within the certified tail.
        let partial: C64 = got.coeffs().iter().sum();
        assert!((partial - ONE).norm() <= t.tail_bound(30) + 1e-15);
    }

    #[test]
    fn monomial_and_conjugate() {
        let z = BlaschkeProduct::from_zeros(vec![ZERO]).unwrap();
        assert_eq!(z.coeffs(3).coeffs(), &[ZERO, ONE, ZERO, ZERO]);
        assert_eq!(conj_symbol_coeffs(&z, 3), LaurentVector::monomial(3, -1, ONE).unwrap());
        let z2 = BlaschkeProduct::monomial(2);
        assert_eq!(conj_symbol_coeffs(&z2, 3), LaurentVector::monomial(3, -2, ONE).unwrap());
        let t = BlaschkeProduct::from_zeros(vec![c(0.5, 0.0)]).unwrap();
        let tc = t.coeffs(10);
        let cj = conj_symbol_coeffs(&t, 10);
        for n in 0..=10 {
            assert_eq!(cj.coeff(-(n as isize)), tc.coeff(n).conj());
            assert_eq!(cj.coeff(n as isize + 1), ZERO);
        }
        assert_eq!(z.tail_bound(0), 1.0);
        assert_eq!(z.tail_bound(1), 0.0);
    }

    #[test]
    fn rejects_bad_zeros() {
        assert!(matches!(BlaschkeProduct::from_zeros(vec![c(1.2, 0.0)]), Err(Error::ZeroOutsideDisk(_))));
        assert!(BlaschkeProduct::from_zeros(vec![c(0.0, 1.0)]).is_err());
        assert!(BlaschkeProduct::new(vec![], c(2.0, 0.0)).is_err());
    }

    #[test]
    fn tail_certificate_dominates_extended_sum() {
        let t = BlaschkeProduct::from_zeros(vec![c(0.7, 0.1), c(-0.3, 0.6), c(0.0, -0.5)]).unwrap();
        for order in [10usize, 30, 60] {
            let long = t.coeffs(3 * order);
            let actual: f64 = long.coeffs()[order + 1..].iter().map(|c| c.norm()).sum();
            assert!(actual <= t.tail_bound(order), "order {order}: {actual} vs {}", t.tail_bound(order));
        }
    }

    #[test]
    fn outer_constant_and_exponential() {
        let g = OuterSymbol::literal(c(2.0, 0.0)).unwrap();
        assert_eq!(outer_coeffs(&g, 3).coeffs(), &[c(2.0, 0.0), ZERO, ZERO, ZERO]);
        assert_eq!(inverse_outer_coeffs(&g, 2).coeffs(), &[c(0.5, 0.0), ZERO, ZERO]);
        assert!(matches!(OuterSymbol::literal(ZERO), Err(Error::ZeroConstant)));

        let e = OuterSymbol::extended(ONE, vec![ZERO, c(0.25, 0.0)]).unwrap();
        let coeffs = outer_coeffs(&e, 12);
        let mut fact = 1.0;
        for n in 0..=12 {
            if n > 0 {
                fact *= n as f64;
            }
            let want = 0.25f64.powi(n as i32) / fact;
            assert!((coeffs.coeff(n) - c(want, 0.0)).norm() < 1e-16);
        }
        let prod = coeffs.mul_truncated(&inverse_outer_coeffs(&e, 12), 12);
        assert!(prod.approx_eq(&AnalyticVector::monomial(12, 0, ONE).unwrap(), 1e-12));
        assert!(e.tail_bound(20) < 1e-25);
    }

    #[test]
    fn built_symbols() {
        let b = TruncationBudget::new(30, 10).unwrap();
        assert_eq!(build_symbol(&SymbolSpec::Zero, &b).unwrap().norm(), 0.0);
        let z = BlaschkeProduct::monomial(1);
        let phi = build_symbol(&SymbolSpec::ConjInner(z.clone()), &b).unwrap();
        assert_eq!(phi.coeff(-1), ONE);
        assert_eq!(phi.norm(), 1.0);
        let g = OuterSymbol::literal(c(2.0, 0.0)).unwrap();
        let phi = build_symbol(&SymbolSpec::ConjInnerTimesOuter(z, g), &b).unwrap();
        assert_eq!(phi.coeff(-1), c(2.0, 0.0));
        assert!((phi.norm() - 2.0).abs() < 1e-15);
        let bad = AnalyticVector::padded(&[ONE, ONE], 3).unwrap();
        assert!(build_symbol(&SymbolSpec::AnalyticShift(bad), &b).is_err());
    }

    #[test]
    fn tail_budget_enforced_and_auto_order() {
        let t = BlaschkeProduct::from_zeros(vec![c(0.8, 0.0); 3]).unwrap();
        let spec = SymbolSpec::ConjInner(t);
        let b = TruncationBudget::new(40, 10).unwrap();
        assert!(matches!(build_symbol(&spec, &b), Err(Error::TailBudgetUnreachable { .. })));
        let auto = auto_budget(&spec, 10, 1e-12, 10, 0).unwrap();
        assert!(auto.order > 40 && auto.order < 250, "{}", auto.order);
        assert!(spec.tail_bound(auto.order) <= 1e-12);
        assert!(spec.tail_bound(auto.order - 1) > 1e-12);
    }
}
