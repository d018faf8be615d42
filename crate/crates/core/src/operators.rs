//! Finite sections of Toeplitz and Hankel operators, model-space projections
//! and rank-n perturbations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::{AnalyticVector, Inner, LaurentVector, TruncationBudget, C64, ONE, ZERO};
use crate::symbols::{resolve_symbol, BlaschkeProduct, SymbolSpec};

/// Which frequencies the rows of a section stand for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowIndex {
    /// Rows `0..=N`.
    Analytic,
    /// Rows `-1, -2, .., -N` (row `j-1` is frequency `-j`).
    CoAnalytic,
}

/// Hankel convention: `H_φ f = PJ(φf)` or `Ĥ_φ f = (I-P)(φf)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    Pj,
    CoAnalytic,
}

impl Convention {
    pub fn rows(self) -> RowIndex {
        match self {
            Convention::Pj => RowIndex::Analytic,
            Convention::CoAnalytic => RowIndex::CoAnalytic,
        }
    }
}

/// Dense section acting on coefficients `0..=N`.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<C64>,
    rows: RowIndex,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<C64>, rows: RowIndex) -> Result<Self> {
        let n = entries.ncols();
        if n == 0 {
            return Err(Error::DimensionMismatch("section needs at least one column".into()));
        }
        let want = match rows {
            RowIndex::Analytic => n,
            RowIndex::CoAnalytic => n - 1,
        };
        if entries.nrows() != want {
            return Err(Error::DimensionMismatch(format!("{} rows for {} columns", entries.nrows(), n)));
        }
        if entries.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::InvalidInput("non-finite matrix entry".into()));
        }
        Ok(Self { entries, rows })
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }

    pub fn rows(&self) -> RowIndex {
        self.rows
    }

    /// Truncation order `N`.
    pub fn order(&self) -> usize {
        self.entries.ncols() - 1
    }

    pub fn apply(&self, x: &DVector<C64>) -> DVector<C64> {
        &self.entries * x
    }
}

fn need_order(phi: &LaurentVector, need: usize) -> Result<()> {
    if phi.order() < need {
        return Err(Error::DimensionMismatch(format!(
            "symbol of order {} but the section reads frequencies down to -{need}",
            phi.order()
        )));
    }
    Ok(())
}

/// `(m, k) ↦ φ̂(m - k)`.
pub fn toeplitz_matrix(phi: &LaurentVector, order: usize) -> Result<OperatorMatrix> {
    need_order(phi, order)?;
    let m = DMatrix::from_fn(order + 1, order + 1, |r, c| phi.coeff(r as isize - c as isize));
    OperatorMatrix::new(m, RowIndex::Analytic)
}

/// `(m, k) ↦ φ̂(-m - k)`.
pub fn hankel_matrix(phi: &LaurentVector, order: usize) -> Result<OperatorMatrix> {
    need_order(phi, 2 * order)?;
    let m = DMatrix::from_fn(order + 1, order + 1, |r, c| phi.coeff(-((r + c) as isize)));
    OperatorMatrix::new(m, RowIndex::Analytic)
}

/// `(-j, k) ↦ φ̂(-j - k)` for `j = 1..=N`.
pub fn hankel_hat_matrix(phi: &LaurentVector, order: usize) -> Result<OperatorMatrix> {
    need_order(phi, 2 * order)?;
    let m = DMatrix::from_fn(order, order + 1, |r, c| phi.coeff(-((r + 1 + c) as isize)));
    OperatorMatrix::new(m, RowIndex::CoAnalytic)
}

pub fn hankel_for(convention: Convention, phi: &LaurentVector, order: usize) -> Result<OperatorMatrix> {
    match convention {
        Convention::Pj => hankel_matrix(phi, order),
        Convention::CoAnalytic => hankel_hat_matrix(phi, order),
    }
}

/// Lower-triangular multiplication matrix of an analytic function on `0..=N`.
pub fn multiplication_matrix(f: &AnalyticVector, order: usize) -> DMatrix<C64> {
    DMatrix::from_fn(order + 1, order + 1, |r, c| if r >= c { f.coeff(r - c) } else { ZERO })
}

/// Projection onto `θH²` from its Taylor coefficients: `L L*` with `L` the
/// multiplication matrix of `θ`. This is the exact compression since `L*` is
/// the section of `T_conj(θ)`.
pub fn theta_h2_projection(theta: &AnalyticVector, order: usize) -> DMatrix<C64> {
    let l = multiplication_matrix(theta, order);
    &l * l.adjoint()
}

/// `(P_θH², P_Kθ)` on the budget's section.
pub fn model_projectors(theta: &BlaschkeProduct, budget: &TruncationBudget) -> Result<(OperatorMatrix, OperatorMatrix)> {
    let bound = theta.tail_bound(budget.order);
    if bound > budget.tail_eps {
        return Err(Error::TailBudgetUnreachable { order: budget.order, bound, eps: budget.tail_eps });
    }
    let p = theta_h2_projection(&theta.coeffs(budget.order), budget.order);
    let k = DMatrix::identity(budget.order + 1, budget.order + 1) - &p;
    Ok((OperatorMatrix::new(p, RowIndex::Analytic)?, OperatorMatrix::new(k, RowIndex::Analytic)?))
}

/// The data `{u_i}, {v_i}` of the perturbation `h ↦ Σ ⟨h, u_i⟩ v_i`.
///
/// `vs` are analytic for [`Convention::Pj`] and supported on negative
/// frequencies for [`Convention::CoAnalytic`].
#[derive(Debug, Clone, PartialEq)]
pub struct PerturbationData {
    us: Vec<AnalyticVector>,
    vs: Vec<LaurentVector>,
    convention: Convention,
}

pub const UNIT_NORM_TOL: f64 = 1e-12;
/// Coefficients below this do not count towards the bandwidth (decaying series).
pub const BANDWIDTH_TOL: f64 = 1e-13;

impl PerturbationData {
    pub fn new(us: Vec<AnalyticVector>, vs: Vec<LaurentVector>, convention: Convention) -> Result<Self> {
        let p = Self::new_relaxed(us, vs, convention)?;
        for (i, u) in p.us.iter().enumerate() {
            if (u.norm() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidInput(format!("u_{} has norm {}", i + 1, u.norm())));
            }
        }
        Ok(p)
    }

    /// Like [`PerturbationData::new`] but only asks the `u_i` to be nonzero.
    pub fn new_relaxed(us: Vec<AnalyticVector>, vs: Vec<LaurentVector>, convention: Convention) -> Result<Self> {
        if us.is_empty() || us.len() != vs.len() {
            return Err(Error::InvalidInput(format!("need n >= 1 pairs, got {} u and {} v", us.len(), vs.len())));
        }
        for (i, v) in vs.iter().enumerate() {
            if (v.norm() - 1.0).abs() > UNIT_NORM_TOL {
                return Err(Error::InvalidInput(format!("v_{} has norm {}", i + 1, v.norm())));
            }
            let wrong_side = match convention {
                Convention::Pj => v.negative_norm(),
                Convention::CoAnalytic => (0..=v.order() as isize).map(|n| v.coeff(n).norm()).fold(0.0, f64::max),
            };
            if wrong_side > 0.0 {
                return Err(Error::InvalidInput(format!("v_{} has frequencies outside its convention", i + 1)));
            }
        }
        if let Some(i) = us.iter().position(|u| u.norm() == 0.0) {
            return Err(Error::InvalidInput(format!("u_{} vanishes", i + 1)));
        }
        Ok(Self { us, vs, convention })
    }

    /// Unit-norm data with strictly orthonormal sets.
    pub fn new_orthonormal(us: Vec<AnalyticVector>, vs: Vec<LaurentVector>, convention: Convention) -> Result<Self> {
        let p = Self::new(us, vs, convention)?;
        let defect = p.orthogonality_defect();
        if defect > UNIT_NORM_TOL {
            return Err(Error::InvalidInput(format!("sets not orthonormal (defect {defect:e})")));
        }
        Ok(p)
    }

    pub fn rank(&self) -> usize {
        self.us.len()
    }

    pub fn us(&self) -> &[AnalyticVector] {
        &self.us
    }

    pub fn vs(&self) -> &[LaurentVector] {
        &self.vs
    }

    pub fn convention(&self) -> Convention {
        self.convention
    }

    /// Largest `|⟨u_i, u_j⟩|` or `|⟨v_i, v_j⟩|` over distinct pairs.
    pub fn orthogonality_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.rank() {
            for j in 0..i {
                let a = &self.us[i];
                let b = &self.us[j];
                let o = a.order().max(b.order());
                worst = worst.max(a.truncated(o).inner(&b.truncated(o)).map_or(0.0, |c| c.norm()));
                let (a, b) = (&self.vs[i], &self.vs[j]);
                let o = a.order().max(b.order());
                worst = worst.max(a.section(o).inner(&b.section(o)).map_or(0.0, |c| c.norm()));
            }
        }
        worst
    }

    /// Highest frequency among the data carrying a coefficient above [`BANDWIDTH_TOL`].
    pub fn bandwidth(&self) -> usize {
        let u = self.us.iter().filter_map(|u| u.degree(BANDWIDTH_TOL)).max().unwrap_or(0);
        let v = self
            .vs
            .iter()
            .flat_map(|v| v.indexed().filter(|(_, c)| c.norm() > BANDWIDTH_TOL).map(|(n, _)| n.unsigned_abs()))
            .max()
            .unwrap_or(0);
        u.max(v)
    }

    /// `u_i` as a column on `0..=order`; only negligible coefficients may be cut.
    pub fn u_column(&self, i: usize, order: usize) -> Result<DVector<C64>> {
        let u = &self.us[i];
        if u.degree(BANDWIDTH_TOL).is_some_and(|d| d > order) {
            return Err(Error::DimensionMismatch(format!("u_{} has degree beyond order {order}", i + 1)));
        }
        Ok(u.truncated(order).to_dvector())
    }

    /// `v_i` as a column in the row semantics of the convention.
    pub fn v_column(&self, i: usize, order: usize) -> Result<DVector<C64>> {
        let v = &self.vs[i];
        let reach = v.indexed().filter(|(_, c)| c.norm() > BANDWIDTH_TOL).map(|(n, _)| n.unsigned_abs()).max().unwrap_or(0);
        if reach > order {
            return Err(Error::DimensionMismatch(format!("v_{} reaches frequency {reach} beyond order {order}", i + 1)));
        }
        Ok(match self.convention {
            Convention::Pj => DVector::from_fn(order + 1, |m, _| v.coeff(m as isize)),
            Convention::CoAnalytic => DVector::from_fn(order, |j, _| v.coeff(-(j as isize) - 1)),
        })
    }
}

/// `R = H + Σ v_i u_i*`.
pub fn perturbed_operator(h: &OperatorMatrix, pert: &PerturbationData) -> Result<OperatorMatrix> {
    if h.rows() != pert.convention().rows() {
        return Err(Error::DimensionMismatch("operator rows and v_i use different conventions".into()));
    }
    let order = h.order();
    let mut r = h.entries().clone();
    for i in 0..pert.rank() {
        let u = pert.u_column(i, order)?;
        let v = pert.v_column(i, order)?;
        r += &v * u.adjoint();
    }
    OperatorMatrix::new(r, h.rows())
}

/// Residuals of the structural identities on the budgeted block (rows and
/// columns `0..=d`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntertwiningResiduals {
    /// `T_conj(z) H_φ - H_zφ`.
    pub backshift_relation: f64,
    /// `(I-P) S Ĥ_φ - Ĥ_zφ`.
    pub coanalytic_relation: f64,
    /// `T_φ̆ H_zψ + H_zφ T_ψ - H_zφψ`.
    pub product_identity: f64,
}

impl IntertwiningResiduals {
    pub fn max(&self) -> f64 {
        self.backshift_relation.max(self.coanalytic_relation).max(self.product_identity)
    }
}

fn block_diff(a: &DMatrix<C64>, b: &DMatrix<C64>, d: usize) -> f64 {
    let r = (d + 1).min(a.nrows());
    let c = (d + 1).min(a.ncols());
    (a.view((0, 0), (r, c)) - b.view((0, 0), (r, c))).iter().map(|x| x.norm()).fold(0.0, f64::max)
}

/// Checks the shift relations of both Hankel conventions and the two-term
/// product identity with the polynomial `psi`. The identities are exact on the
/// block, so the tail certificate is not required here.
pub fn verify_intertwining(spec: &SymbolSpec, budget: &TruncationBudget, psi: &LaurentVector) -> Result<IntertwiningResiduals> {
    budget.validate()?;
    let psi_band = psi.indexed().filter(|(_, c)| *c != ZERO).map(|(n, _)| n.unsigned_abs()).max().unwrap_or(0);
    budget.check_bandwidth(spec.bandwidth().max(psi_band))?;
    let n = budget.order;
    let d = budget.degree;
    let sym = resolve_symbol(spec, n)?;
    let phi = &sym.phi;
    let z = LaurentVector::monomial(1, 1, ONE)?;
    let zbar = LaurentVector::monomial(1, -1, ONE)?;
    let z_phi = z.mul(phi);

    let t_zbar = toeplitz_matrix(&zbar.section(n), n)?;
    let lhs = t_zbar.entries() * hankel_matrix(phi, n)?.entries();
    let backshift_relation = block_diff(&lhs, hankel_matrix(&z_phi, n)?.entries(), d);

    // (I-P)S on co-analytic rows: row -j of the result is row -(j+1).
    let hat = hankel_hat_matrix(phi, n)?;
    let shift_down = DMatrix::from_fn(n, n, |r, c| if c == r + 1 { ONE } else { ZERO });
    let lhs = shift_down * hat.entries();
    let coanalytic_relation = block_diff(&lhs, hankel_hat_matrix(&z_phi, n)?.entries(), d);

    let phi_breve = crate::fourier::flip(phi);
    let wide = psi.order().max(phi.order());
    let psi_w = psi.section(wide);
    let z_psi = z.mul(&psi_w);
    let lhs = toeplitz_matrix(&phi_breve, n)?.entries() * hankel_matrix(&z_psi.section(2 * n + 2), n)?.entries()
        + hankel_matrix(&z_phi, n)?.entries() * toeplitz_matrix(&psi_w.section(2 * n + 2), n)?.entries();
    let rhs = hankel_matrix(&z_phi.mul(&psi_w), n)?;
    let product_identity = block_diff(&lhs, rhs.entries(), d);

    Ok(IntertwiningResiduals { backshift_relation, coanalytic_relation, product_identity })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symbols::BlaschkeProduct;

    fn lv(order: usize, terms: &[(isize, f64)]) -> LaurentVector {
        let t: Vec<(isize, C64)> = terms.iter().map(|&(n, c)| (n, C64::new(c, 0.0))).collect();
        LaurentVector::from_terms(order, &t).unwrap()
    }

    /// Expands `PJ(φ z^k)` or `(I-P)(φ z^k)` monomial by monomial.
    fn oracle(phi: &LaurentVector, order: usize, hat: bool) -> DMatrix<C64> {
        let rows = if hat { order } else { order + 1 };
        let mut m = DMatrix::zeros(rows, order + 1);
        for k in 0..=order {
            for (n, c) in phi.indexed() {
                let freq = n + k as isize;
                if hat {
                    if freq <= -1 && (-freq) as usize <= order {
                        m[((-freq) as usize - 1, k)] += c;
                    }
                } else {
                    let flipped = -freq;
                    if flipped >= 0 && flipped as usize <= order {
                        m[(flipped as usize, k)] += c;
                    }
                }
            }
        }
        m
    }

    #[test]
    fn toeplitz_examples() {
        let n = 5;
        let t = toeplitz_matrix(&lv(n, &[(-1, 1.0)]), n).unwrap();
        for r in 0..=n {
            for c in 0..=n {
                let want = if c == r + 1 { 1.0 } else { 0.0 };
                assert_eq!(t.entries()[(r, c)], C64::new(want, 0.0));
            }
        }
        assert_eq!(toeplitz_matrix(&lv(n, &[(0, 1.0)]), n).unwrap().entries(), &DMatrix::identity(n + 1, n + 1));
        let t = toeplitz_matrix(&lv(n, &[(1, 1.0)]), n).unwrap();
        assert_eq!(t.entries()[(1, 0)], ONE);
        assert_eq!(t.entries()[(0, 1)], ZERO);
    }

    #[test]
    fn hankel_examples_match_monomial_oracle() {
        let n = 6;
        for phi in [lv(2 * n, &[(-1, 1.0)]), lv(2 * n, &[(0, 1.0)]), lv(2 * n, &[(-2, 1.0)]), lv(2 * n, &[(-3, 0.5), (2, 1.0), (-7, 2.0)])] {
            assert_eq!(hankel_matrix(&phi, n).unwrap().entries(), &oracle(&phi, n, false));
            assert_eq!(hankel_hat_matrix(&phi, n).unwrap().entries(), &oracle(&phi, n, true));
        }
        let h1 = hankel_matrix(&lv(2 * n, &[(0, 1.0)]), n).unwrap();
        assert_eq!(h1.entries().iter().filter(|c| **c != ZERO).count(), 1);
        assert_eq!(hankel_hat_matrix(&lv(2 * n, &[(0, 1.0)]), n).unwrap().entries().norm(), 0.0);
        assert!(matches!(hankel_matrix(&lv(n, &[(-1, 1.0)]), n), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn model_projector_examples() {
        let b = TruncationBudget::new(30, 10).unwrap();
        let (p, k) = model_projectors(&BlaschkeProduct::monomial(1), &b).unwrap();
        let one_plus_z = AnalyticVector::padded(&[ONE, ONE], 30).unwrap().to_dvector();
        let pz = p.apply(&one_plus_z);
        assert_eq!(pz, AnalyticVector::monomial(30, 1, ONE).unwrap().to_dvector());
        assert_eq!(k.apply(&one_plus_z), AnalyticVector::monomial(30, 0, ONE).unwrap().to_dvector());

        let (_, k) = model_projectors(&BlaschkeProduct::monomial(2), &b).unwrap();
        let mut x = AnalyticVector::padded(&[C64::new(3.0, 0.0), ONE], 30).unwrap().to_dvector();
        x[5] = ONE;
        let want = AnalyticVector::padded(&[C64::new(3.0, 0.0), ONE], 30).unwrap().to_dvector();
        assert!((k.apply(&x) - want).norm() < 1e-15);

        let half = BlaschkeProduct::from_zeros(vec![C64::new(0.5, 0.0)]).unwrap();
        let b = TruncationBudget::new(60, 10).unwrap();
        let (p, _) = model_projectors(&half, &b).unwrap();
        let one = AnalyticVector::monomial(60, 0, ONE).unwrap().to_dvector();
        let got = p.apply(&one);
        let want = half.coeffs(60).scale(C64::new(-0.5, 0.0)).to_dvector();
        assert!((&got - want).norm() < 1e-14);
        assert!((got[0] - C64::new(0.25, 0.0)).norm() < 1e-15);
        assert!((got[1] - C64::new(-0.375, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn w1_assembly() {
        let n = 5;
        let h = hankel_matrix(&lv(2 * n, &[(-1, 1.0)]), n).unwrap();
        let u = AnalyticVector::monomial(n, 2, ONE).unwrap();
        let v = LaurentVector::monomial(0, 0, ONE).unwrap();
        let pert = PerturbationData::new(vec![u], vec![v], Convention::Pj).unwrap();
        let r = perturbed_operator(&h, &pert).unwrap();
        let mut want = h.entries().clone();
        want[(0, 2)] += ONE;
        assert_eq!(r.entries(), &want);

        let zero = OperatorMatrix::new(DMatrix::zeros(n + 1, n + 1), RowIndex::Analytic).unwrap();
        let pert = PerturbationData::new(vec![AnalyticVector::monomial(n, 1, ONE).unwrap()], vec![v_one()], Convention::Pj).unwrap();
        let r = perturbed_operator(&zero, &pert).unwrap();
        assert_eq!(r.entries().iter().filter(|c| **c != ZERO).count(), 1);
        assert_eq!(r.entries()[(0, 1)], ONE);
    }

    fn v_one() -> LaurentVector {
        LaurentVector::monomial(0, 0, ONE).unwrap()
    }

    #[test]
    fn perturbation_validation() {
        let u = AnalyticVector::monomial(3, 1, C64::new(2.0, 0.0)).unwrap();
        assert!(PerturbationData::new(vec![u.clone()], vec![v_one()], Convention::Pj).is_err());
        assert!(PerturbationData::new_relaxed(vec![u], vec![v_one()], Convention::Pj).is_ok());
        let unit = AnalyticVector::monomial(3, 1, ONE).unwrap();
        assert!(PerturbationData::new(vec![unit.clone()], vec![v_one()], Convention::CoAnalytic).is_err());
        assert!(PerturbationData::new(vec![], vec![], Convention::Pj).is_err());
        let both = AnalyticVector::padded(&[C64::new(0.6, 0.0), C64::new(0.8, 0.0)], 3).unwrap();
        let p = PerturbationData::new(vec![unit.clone(), both], vec![v_one(), v_one()], Convention::Pj).unwrap();
        assert!((p.orthogonality_defect() - 1.0).abs() < 1e-15);
        assert!(PerturbationData::new_orthonormal(p.us().to_vec(), p.vs().to_vec(), Convention::Pj).is_err());
    }

    #[test]
    fn rank_of_two_term_update() {
        let n = 8;
        let zero = OperatorMatrix::new(DMatrix::zeros(n + 1, n + 1), RowIndex::Analytic).unwrap();
        let us = vec![AnalyticVector::monomial(n, 1, ONE).unwrap(), AnalyticVector::monomial(n, 3, ONE).unwrap()];
        let vs = vec![v_one(), LaurentVector::monomial(2, 2, ONE).unwrap()];
        let r = perturbed_operator(&zero, &PerturbationData::new(us, vs, Convention::Pj).unwrap()).unwrap();
        assert_eq!(r.entries().rank(1e-12), 2);
    }

    #[test]
    fn intertwining_examples() {
        let b = TruncationBudget::new(30, 10).unwrap();
        let psi = lv(3, &[(0, 1.0), (-1, 0.5), (2, 0.25)]);
        let z = BlaschkeProduct::monomial(1);
        assert_eq!(verify_intertwining(&SymbolSpec::ConjInner(z), &b, &psi).unwrap().max(), 0.0);
        assert_eq!(verify_intertwining(&SymbolSpec::Zero, &b, &psi).unwrap().max(), 0.0);
        let half = BlaschkeProduct::from_zeros(vec![C64::new(0.5, 0.0)]).unwrap();
        let b = TruncationBudget::new(40, 10).unwrap();
        assert!(verify_intertwining(&SymbolSpec::ConjInner(half), &b, &psi).unwrap().max() <= 1e-10);

        // the single entry of T_zbar H_zbar is (0,0)
        let n = 4;
        let zbar = lv(2 * n, &[(-1, 1.0)]);
        let prod = toeplitz_matrix(&zbar, n).unwrap().entries() * hankel_matrix(&zbar, n).unwrap().entries();
        assert_eq!(prod[(0, 0)], ONE);
        assert_eq!(prod.iter().filter(|c| **c != ZERO).count(), 1);
    }

    #[test]
    fn conventions_agree_through_flip() {
        let n = 6;
        let phi = lv(2 * n, &[(-1, 1.0), (-4, -0.3), (-9, 0.7), (3, 2.0)]);
        let h = hankel_matrix(&phi, n).unwrap();
        // row -j of the co-analytic section is row j of the flipped one
        let hat = hankel_hat_matrix(&phi, n).unwrap();
        for j in 1..=n {
            for k in 0..=n {
                assert_eq!(hat.entries()[(j - 1, k)], h.entries()[(j, k)]);
            }
        }
    }
}
