//! Near-backward-shift and almost-shift invariance of perturbed Hankel
//! kernels: theorem-prescribed defect spans, least-squares defect vectors,
//! the explicit defect-vector construction and minimal defect estimates.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::fourier::{self, backshift, shift, AnalyticVector, LaurentVector, TruncationBudget, C64, ONE, ZERO};
use crate::linalg;
use crate::operators::{hankel_for, hankel_matrix, perturbed_operator, Convention, OperatorMatrix, PerturbationData};
use crate::subspaces::{
    degree_slice, max_angle_into, null_space_detailed, zero_at_origin_slice, Spectrum, SubspaceBasis, DEFAULT_RANK_TOL,
};
use crate::symbols::{conj_of_analytic, resolve_symbol, OuterClass, ResolvedSymbol, SymbolSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    /// `S*f ∈ M + F` for `f ∈ M` with `f(0) = 0`.
    NearSStar,
    /// `Sf ∈ M + F` for `f ∈ M`.
    AlmostShift,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::NearSStar => "near-backshift",
            Mode::AlmostShift => "almost-shift",
        }
    }
}

/// Which defect-span formula covers a `(symbol, convention, mode)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TheoremClass {
    /// `φ = 0` or `φ ∈ zH²`, near-backshift: `F = span{u_i}`.
    AnalyticSymbolNear,
    /// `φ = 0` or `φ ∈ zH²`, almost-shift: `F = span{u_i}`.
    AnalyticSymbolAlmost,
    /// `φ = conj(θ)·g`, near-backshift.
    ConjInnerOuterNear,
    /// `φ = g` (constant inner factor), near-backshift.
    OuterOnlyNear,
    /// `φ = conj(θ)`, near-backshift.
    ConjInnerNear,
    /// `φ = conj(θ)`, almost-shift.
    ConjInnerAlmost,
    /// `φ = conj(θ)·g`, almost-shift.
    ConjInnerOuterAlmost,
    /// Co-analytic convention, near-backshift.
    CoAnalyticNear,
    /// Co-analytic convention, almost-shift.
    CoAnalyticAlmost,
}

impl TheoremClass {
    pub const ALL: [TheoremClass; 9] = [
        TheoremClass::AnalyticSymbolNear,
        TheoremClass::AnalyticSymbolAlmost,
        TheoremClass::ConjInnerOuterNear,
        TheoremClass::OuterOnlyNear,
        TheoremClass::ConjInnerNear,
        TheoremClass::ConjInnerAlmost,
        TheoremClass::ConjInnerOuterAlmost,
        TheoremClass::CoAnalyticNear,
        TheoremClass::CoAnalyticAlmost,
    ];

    pub fn name(self) -> &'static str {
        match self {
            TheoremClass::AnalyticSymbolNear => "analytic-symbol-near",
            TheoremClass::AnalyticSymbolAlmost => "analytic-symbol-almost",
            TheoremClass::ConjInnerOuterNear => "conj-inner-outer-near",
            TheoremClass::OuterOnlyNear => "outer-only-near",
            TheoremClass::ConjInnerNear => "conj-inner-near",
            TheoremClass::ConjInnerAlmost => "conj-inner-almost",
            TheoremClass::ConjInnerOuterAlmost => "conj-inner-outer-almost",
            TheoremClass::CoAnalyticNear => "coanalytic-near",
            TheoremClass::CoAnalyticAlmost => "coanalytic-almost",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }

    /// Bound on the defect dimension: `n` for analytic symbols, `2n` otherwise.
    pub fn defect_bound(self, rank: usize) -> usize {
        match self {
            TheoremClass::AnalyticSymbolNear | TheoremClass::AnalyticSymbolAlmost => rank,
            _ => 2 * rank,
        }
    }

    pub fn mode(self) -> Mode {
        match self {
            TheoremClass::AnalyticSymbolNear
            | TheoremClass::ConjInnerOuterNear
            | TheoremClass::OuterOnlyNear
            | TheoremClass::ConjInnerNear
            | TheoremClass::CoAnalyticNear => Mode::NearSStar,
            _ => Mode::AlmostShift,
        }
    }
}

/// Resolves the covering class, or `UnsupportedSymbolClass`.
pub fn classify(spec: &SymbolSpec, convention: Convention, mode: Mode) -> Result<TheoremClass> {
    use TheoremClass::*;
    let analytic = match spec {
        SymbolSpec::Zero | SymbolSpec::AnalyticShift(_) => true,
        SymbolSpec::RawLaurent(v) => (-(v.order() as isize)..=0).all(|n| v.coeff(n) == ZERO),
        _ => false,
    };
    if analytic {
        return Ok(match mode {
            Mode::NearSStar => AnalyticSymbolNear,
            Mode::AlmostShift => AnalyticSymbolAlmost,
        });
    }
    let unsupported = || Err(Error::UnsupportedSymbolClass(format!("{:?} / {:?} / {}", spec.kind(), convention, mode.name())));
    let (theta, outer) = match spec {
        SymbolSpec::ConjInner(t) => (t, None),
        SymbolSpec::ConjInnerTimesOuter(t, g) => (t, Some(g)),
        _ => return unsupported(),
    };
    let constant_theta = theta.degree() == 0;
    let constant_g = outer.map_or(true, |g| g.is_constant());
    match (convention, mode) {
        (Convention::Pj, Mode::NearSStar) => Ok(if constant_theta {
            OuterOnlyNear
        } else if outer.is_some() {
            ConjInnerOuterNear
        } else {
            ConjInnerNear
        }),
        (Convention::Pj, Mode::AlmostShift) if !constant_theta => {
            Ok(if outer.is_some() { ConjInnerOuterAlmost } else { ConjInnerAlmost })
        }
        (Convention::CoAnalytic, Mode::NearSStar) if !constant_theta => Ok(CoAnalyticNear),
        (Convention::CoAnalytic, Mode::AlmostShift) if !constant_theta && constant_g => Ok(CoAnalyticAlmost),
        _ => unsupported(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Absolute bound on containment residuals of unit vectors.
    pub verdict: f64,
    /// Relative singular-value threshold for the kernel.
    pub rank: f64,
    /// Threshold for the degree-slice null space.
    pub slice: f64,
    /// Angle bound for the defect frame inside `(I - P_M)F`.
    pub defect_angle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { verdict: 1e-7, rank: DEFAULT_RANK_TOL, slice: 1e-9, defect_angle: 1e-6 }
    }
}

/// The perturbed operator at a finite section together with its kernel `M`.
#[derive(Debug, Clone)]
pub struct KernelProblem {
    pub symbol: ResolvedSymbol,
    pub pert: PerturbationData,
    pub budget: TruncationBudget,
    pub operator: OperatorMatrix,
    pub kernel: SubspaceBasis,
    /// Orthogonal complement of the kernel in the section.
    pub co_kernel: SubspaceBasis,
    pub spectrum: Spectrum,
}

impl KernelProblem {
    /// Builds `R_n` and its kernel. With `check_tail` the symbol must meet the
    /// budget's tail certificate.
    pub fn new(spec: &SymbolSpec, pert: &PerturbationData, budget: &TruncationBudget, rank_tol: f64, check_tail: bool) -> Result<Self> {
        budget.validate()?;
        budget.check_bandwidth(spec.bandwidth().max(pert.bandwidth()))?;
        if check_tail {
            let bound = spec.tail_bound(budget.order);
            if bound > budget.tail_eps {
                return Err(Error::TailBudgetUnreachable { order: budget.order, bound, eps: budget.tail_eps });
            }
        }
        let symbol = resolve_symbol(spec, budget.order)?;
        let h = hankel_for(pert.convention(), &symbol.phi, budget.order)?;
        let operator = perturbed_operator(&h, pert)?;
        let ns = null_space_detailed(operator.entries(), rank_tol);
        Ok(Self {
            symbol,
            pert: pert.clone(),
            budget: *budget,
            operator,
            kernel: ns.kernel,
            co_kernel: ns.row_space,
            spectrum: ns.spectrum,
        })
    }

    pub fn order(&self) -> usize {
        self.budget.order
    }

    pub fn convention(&self) -> Convention {
        self.pert.convention()
    }

    /// `‖R x‖`.
    pub fn apply_norm(&self, x: &DVector<C64>) -> f64 {
        self.operator.apply(x).norm()
    }

    /// `(I - P_M) x`.
    pub fn mod_kernel(&self, x: &DVector<C64>) -> DVector<C64> {
        self.co_kernel.project(x)
    }

    /// The slice of `M` the theorem quantifies over, cut at degree `d`.
    pub fn slice(&self, mode: Mode, slice_tol: f64) -> SubspaceBasis {
        let low = degree_slice(&self.kernel, self.budget.degree, slice_tol);
        match mode {
            Mode::NearSStar => zero_at_origin_slice(&low),
            Mode::AlmostShift => low,
        }
    }
}

/// Shift or backshift of a section vector.
pub fn mode_image(x: &DVector<C64>, mode: Mode) -> Result<DVector<C64>> {
    let a = AnalyticVector::from_dvector(x);
    Ok(match mode {
        Mode::NearSStar => backshift(&a),
        Mode::AlmostShift => shift(&a)?,
    }
    .to_dvector())
}

// ---- coefficient helpers at the expansion order -------------------------

fn padded(f: &AnalyticVector, len: usize) -> Vec<C64> {
    let mut v = f.coeffs().to_vec();
    v.resize(len + 1, ZERO);
    v.truncate(len + 1);
    v
}

pub(crate) fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    fourier::convolve_truncated(a, b, a.len().max(b.len()) - 1)
}

/// `T_conj(θ) x`: `y_m = Σ_{k≥m} conj(θ_{k-m}) x_k`.
pub(crate) fn toeplitz_conj(theta: &[C64], x: &[C64]) -> Vec<C64> {
    let n = x.len();
    (0..n)
        .map(|m| (m..n).map(|k| theta.get(k - m).map_or(ZERO, |t| t.conj()) * x[k]).sum())
        .collect()
}

/// `θ · T_conj(θ) x`.
fn project_theta(theta: &[C64], x: &[C64]) -> Vec<C64> {
    mul(theta, &toeplitz_conj(theta, x))
}

/// `y_m = Σ_k ψ_{m+k} x_k`, the Hankel operator with symbol `J ψ`.
fn hankel_flipped(psi: &[C64], x: &[C64], rows: usize) -> Vec<C64> {
    (0..rows)
        .map(|m| x.iter().enumerate().map(|(k, xk)| psi.get(m + k).copied().unwrap_or(ZERO) * xk).sum())
        .collect()
}

fn cut(x: &[C64], order: usize) -> DVector<C64> {
    DVector::from_fn(order + 1, |i, _| x.get(i).copied().unwrap_or(ZERO))
}

/// Expansions of `θ`, `g` and `1/g` at the working length (`1` stands in for absent factors).
struct Factors {
    theta: Vec<C64>,
    outer: Vec<C64>,
    outer_inv: Vec<C64>,
    len: usize,
}

fn factors(sym: &ResolvedSymbol) -> Factors {
    let len = sym.expansion_order;
    let one = {
        let mut v = vec![ZERO; len + 1];
        v[0] = ONE;
        v
    };
    Factors {
        theta: sym.theta.as_ref().map_or(one.clone(), |t| padded(t, len)),
        outer: sym.outer.as_ref().map_or(one.clone(), |g| padded(g, len)),
        outer_inv: sym.outer_inv.as_ref().map_or(one, |g| padded(g, len)),
        len,
    }
}

/// Generators of the theorem's defect span and their orthonormal frame.
#[derive(Debug, Clone)]
pub struct DefectSpan {
    pub class: TheoremClass,
    pub generators: Vec<DVector<C64>>,
    pub frame: SubspaceBasis,
    /// Generators that vanished numerically and were dropped.
    pub dropped: usize,
}

/// Threshold under which a generator counts as zero.
const GENERATOR_TOL: f64 = 1e-12;

pub fn theorem_defect_span(problem: &KernelProblem, mode: Mode) -> Result<DefectSpan> {
    let class = classify(&problem.symbol.spec, problem.convention(), mode)?;
    let n = problem.order();
    let f = factors(&problem.symbol);
    let len = f.len;
    let pert = &problem.pert;
    let mut gens = Vec::new();
    for i in 0..pert.rank() {
        let u = padded(&pert.us()[i], len);
        let v = &pert.vs()[i];
        // analytic v as coefficients 0..len, co-analytic as index j-1 <-> z^{-j}
        let v_an: Vec<C64> = (0..=len).map(|m| v.coeff(m as isize)).collect();
        let v_co: Vec<C64> = (1..=len + 1).map(|j| v.coeff(-(j as isize))).collect();
        match class {
            TheoremClass::AnalyticSymbolNear | TheoremClass::AnalyticSymbolAlmost => {
                gens.push(cut(&u, n));
            }
            TheoremClass::ConjInnerOuterNear | TheoremClass::OuterOnlyNear | TheoremClass::ConjInnerNear => {
                let psi = mul(&f.theta, &f.outer_inv);
                let mut zv = vec![ZERO; len + 1];
                zv[1..].copy_from_slice(&v_an[..len]);
                gens.push(cut(&hankel_flipped(&psi, &zv, n + 1), n));
                let gu = mul(&f.outer, &u);
                gens.push(cut(&mul(&f.outer_inv, &project_theta(&f.theta, &gu)), n));
            }
            TheoremClass::ConjInnerAlmost | TheoremClass::ConjInnerOuterAlmost => {
                let psi = mul(&f.theta, &f.outer_inv);
                let sv = backshift(&AnalyticVector::new(v_an.clone())?);
                gens.push(cut(&hankel_flipped(&psi, sv.coeffs(), n + 1), n));
                let gu = mul(&f.outer, &u);
                let p = project_theta(&f.theta, &gu);
                let at_zero = toeplitz_conj(&f.theta, &p)[0];
                let inner: Vec<C64> = p.iter().zip(&f.theta).map(|(a, t)| a - at_zero * t).collect();
                gens.push(cut(&mul(&f.outer_inv, &inner), n));
            }
            TheoremClass::CoAnalyticNear => {
                let mut zgu = vec![ZERO; len + 1];
                let gu = mul(&f.outer, &u);
                zgu[1..].copy_from_slice(&gu[..len]);
                let q = mul(&f.outer_inv, &project_theta(&f.theta, &zgu));
                gens.push(cut(&q[1..], n));
                // P(conj(z) θ g̃ v): y_m = Σ_{j≥1} ψ_{m+j+1} v̂(-j)
                let psi = mul(&f.theta, &f.outer_inv);
                let y: Vec<C64> =
                    (0..=n).map(|m| (1..=len).map(|j| psi.get(m + j + 1).copied().unwrap_or(ZERO) * v_co[j - 1]).sum()).collect();
                gens.push(DVector::from_vec(y));
            }
            TheoremClass::CoAnalyticAlmost => {
                gens.push(cut(&project_theta(&f.theta, &u), n));
                // P(θ (I-P)(z v)): y_m = Σ_{j≥1} θ_{m+j} v̂(-j-1)
                let y: Vec<C64> =
                    (0..=n).map(|m| (1..len).map(|j| f.theta.get(m + j).copied().unwrap_or(ZERO) * v_co[j]).sum()).collect();
                gens.push(DVector::from_vec(y));
            }
        }
    }
    let kept: Vec<DVector<C64>> = gens.iter().filter(|g| g.norm() > GENERATOR_TOL).cloned().collect();
    let dropped = gens.len() - kept.len();
    let frame = SubspaceBasis::from_vectors(n + 1, &kept, 1e-10)?;
    Ok(DefectSpan { class, generators: gens, frame, dropped })
}

/// Least-squares defect vector: `w ∈ F` minimizing `dist(S*h + w, M)` (or `Sh + w`).
#[derive(Debug, Clone)]
pub struct SolvedW {
    pub w: DVector<C64>,
    /// `dist(S*h + w, M)`, which equals `dist(S*h, M + F)`.
    pub residual: f64,
    /// `‖R(S*h + w)‖`.
    pub kernel_residual: f64,
    /// `(I - P_M)(S*h + w)`.
    pub residual_vector: DVector<C64>,
}

pub fn solve_w_in_f(h: &DVector<C64>, problem: &KernelProblem, f: &SubspaceBasis, mode: Mode) -> Result<SolvedW> {
    if h.len() != problem.order() + 1 || f.ambient_dim() != h.len() {
        return Err(Error::DimensionMismatch("h, M and F must share the section".into()));
    }
    let x = mode_image(h, mode)?;
    let b = problem.mod_kernel(&x);
    let (w, residual_vector) = if f.dim() == 0 {
        (DVector::zeros(h.len()), b)
    } else {
        let a = problem.co_kernel.project_columns(f.frame());
        let smax = a.norm();
        let coeffs = linalg::least_squares(&a, &(-&b), 1e-10 * smax.max(1.0));
        let res = &b + &a * &coeffs;
        (f.frame() * coeffs, res)
    };
    let kernel_residual = problem.apply_norm(&(&x + &w));
    Ok(SolvedW { w, residual: residual_vector.norm(), kernel_residual, residual_vector })
}

/// Smallest defect at the truncation: rank of `{(I - P_M) T b_j}` over the slice.
#[derive(Debug, Clone)]
pub struct DefectEstimate {
    pub dim: usize,
    pub frame: SubspaceBasis,
    pub singular_values: Vec<f64>,
}

pub fn minimal_defect(m: &SubspaceBasis, mode: Mode, budget: &TruncationBudget, tol: f64) -> Result<DefectEstimate> {
    if m.ambient_dim() != budget.order + 1 {
        return Err(Error::DimensionMismatch("subspace does not live on the budget's section".into()));
    }
    let low = degree_slice(m, budget.degree, 1e-9);
    let slice = match mode {
        Mode::NearSStar => zero_at_origin_slice(&low),
        Mode::AlmostShift => low,
    };
    let residuals: Vec<DVector<C64>> =
        slice.columns().iter().map(|b| mode_image(b, mode).map(|x| m.residual(&x))).collect::<Result<_>>()?;
    Ok(defect_from_residuals(m.ambient_dim(), &residuals, tol))
}

fn defect_from_residuals(ambient: usize, residuals: &[DVector<C64>], tol: f64) -> DefectEstimate {
    if residuals.is_empty() {
        return DefectEstimate { dim: 0, frame: SubspaceBasis::empty(ambient), singular_values: vec![] };
    }
    let mat = DMatrix::from_columns(residuals);
    let svd = linalg::svd(&mat, false);
    let keep = svd.s.iter().filter(|&&s| s > tol).count();
    let frame = svd.u.columns(0, keep).into_owned();
    let singular_values = svd.s;
    DefectEstimate { dim: keep, frame: SubspaceBasis::from_orthonormal(frame, tol), singular_values }
}

/// Intermediate objects of the explicit construction.
#[derive(Debug, Clone)]
pub struct DecompositionTrace {
    /// Co-analytic part of the first auxiliary function (indices `-1..`).
    pub f1: LaurentVector,
    pub f11: LaurentVector,
    pub f12: LaurentVector,
    /// Size of the analytic part of the first auxiliary function, which the kernel equation forces to vanish.
    pub f1_analytic_residual: f64,
    pub b_frame: SubspaceBasis,
    /// `y_i = y_{i1} + θ y_{i2}` with `y_i = g u_i`.
    pub y1_parts: Vec<AnalyticVector>,
    pub y2_parts: Vec<AnalyticVector>,
    /// Largest reconstruction error of `y_i` from its parts (on the section).
    pub reconstruction_error: f64,
}

#[derive(Debug, Clone)]
pub struct ExplicitW {
    pub w: DVector<C64>,
    pub trace: Option<DecompositionTrace>,
    /// Norm of the negative-frequency part dropped when taking the analytic part of `w`.
    pub discarded_negative: f64,
    /// Residual of the kernel equation after the backward-shift intertwining (the necessary condition).
    pub residual_necessary: f64,
    /// `‖R(S*h + w)‖` (or `‖R(zh + w)‖`).
    pub residual_kernel: f64,
}

/// Tolerance for the preconditions of the explicit construction.
const PRECONDITION_TOL: f64 = 1e-8;

/// The explicit defect vector for classes of the `PJ` convention.
pub fn construct_explicit_w(h: &DVector<C64>, problem: &KernelProblem, mode: Mode) -> Result<ExplicitW> {
    let class = classify(&problem.symbol.spec, problem.convention(), mode)?;
    let n = problem.order();
    if h.len() != n + 1 {
        return Err(Error::DimensionMismatch("h must live on the section".into()));
    }
    let kernel_res = problem.apply_norm(h);
    if kernel_res > PRECONDITION_TOL * h.norm().max(1.0) {
        return Err(Error::NotInKernel(kernel_res));
    }
    if mode == Mode::NearSStar && h[0].norm() > PRECONDITION_TOL {
        return Err(Error::OriginValueNonzero(h[0].norm()));
    }
    let x = mode_image(h, mode)?;
    let coeffs_h: Vec<C64> = (0..problem.pert.rank()).map(|i| h.dotc(&cut(problem.pert.us()[i].coeffs(), n)).conj()).collect();
    // ⟨h, u_i⟩ = Σ h_k conj(u_k); dotc conjugates its receiver, hence the conj above.

    let (w, trace, discarded) = match class {
        TheoremClass::AnalyticSymbolNear | TheoremClass::AnalyticSymbolAlmost => (DVector::zeros(n + 1), None, 0.0),
        TheoremClass::CoAnalyticNear | TheoremClass::CoAnalyticAlmost => {
            return Err(Error::UnsupportedSymbolClass("no explicit construction in the co-analytic convention".into()))
        }
        _ => {
            let (w, trace, disc) = explicit_w_parts(h, &coeffs_h, problem, mode)?;
            (w, Some(trace), disc)
        }
    };
    let residual_kernel = problem.apply_norm(&(&x + &w));
    let residual_necessary = necessary_residual(&(&x + &w), problem, mode)?;
    Ok(ExplicitW { w, trace, discarded_negative: discarded, residual_necessary, residual_kernel })
}

/// `‖H_zφ y + Σ ⟨y, u_i⟩ S*v_i‖` (near) or `‖H_φ y + Σ ⟨y, u_i⟩ v_i‖` (almost).
fn necessary_residual(y: &DVector<C64>, problem: &KernelProblem, mode: Mode) -> Result<f64> {
    let n = problem.order();
    let phi = &problem.symbol.phi;
    let pert = &problem.pert;
    let mut out = match mode {
        Mode::NearSStar => {
            let zphi = LaurentVector::monomial(1, 1, ONE)?.mul(phi);
            hankel_matrix(&zphi, n)?.apply(y)
        }
        Mode::AlmostShift => hankel_matrix(phi, n)?.apply(y),
    };
    for i in 0..pert.rank() {
        let c = y.dotc(&pert.u_column(i, n)?).conj();
        let v = AnalyticVector::from_dvector(&pert.v_column(i, n)?);
        let v = match mode {
            Mode::NearSStar => backshift(&v),
            Mode::AlmostShift => v,
        };
        out += v.to_dvector() * c;
    }
    Ok(out.norm())
}

/// Co-analytic vector on indices `-1..=-len` as a column (`j-1` ↔ `z^{-j}`).
fn co_column(v: &LaurentVector, len: usize) -> DVector<C64> {
    DVector::from_fn(len, |j, _| v.coeff(-(j as isize) - 1))
}

fn co_from_column(col: &DVector<C64>) -> LaurentVector {
    let len = col.len();
    let mut terms = Vec::with_capacity(len);
    for j in 0..len {
        terms.push((-(j as isize) - 1, col[j]));
    }
    LaurentVector::from_terms(len, &terms).expect("in range")
}

fn explicit_w_parts(h: &DVector<C64>, coeffs_h: &[C64], problem: &KernelProblem, mode: Mode) -> Result<(DVector<C64>, DecompositionTrace, f64)> {
    let n = problem.order();
    let f = factors(&problem.symbol);
    let len = f.len;
    let pert = &problem.pert;
    let theta_an = AnalyticVector::new(f.theta.clone())?;
    let theta_bar = conj_of_analytic(&theta_an);

    // first auxiliary function
    let hv = padded(&AnalyticVector::from_dvector(h), len);
    let mut gh = mul(&f.outer, &hv);
    if mode == Mode::AlmostShift {
        gh.rotate_right(1);
        gh[0] = ZERO;
    }
    let prod = theta_bar.mul(&AnalyticVector::new(gh)?.to_laurent());
    let mut f1_full = fourier::flip(&prod);
    for (i, c) in coeffs_h.iter().enumerate() {
        let v = &pert.vs()[i];
        let term = match mode {
            Mode::NearSStar => v.clone(),
            Mode::AlmostShift => backshift(&fourier::riesz_project(v)).to_laurent(),
        };
        f1_full = f1_full.plus(&term.scale(*c));
    }
    let f1_analytic_residual = fourier::riesz_project(&f1_full).norm();
    let f1 = co_column(&f1_full, len);

    // split y_i = g u_i against θ
    let mut y1_parts = Vec::new();
    let mut y2_parts = Vec::new();
    let mut b_gens = Vec::new();
    let mut reconstruction_error: f64 = 0.0;
    for u in pert.us() {
        let y = mul(&f.outer, &padded(u, len));
        let y2 = toeplitz_conj(&f.theta, &y);
        let ty2 = mul(&f.theta, &y2);
        let y1: Vec<C64> = y.iter().zip(&ty2).map(|(a, b)| a - b).collect();
        let recon: Vec<C64> = y1.iter().zip(&ty2).map(|(a, b)| a + b).collect();
        reconstruction_error = reconstruction_error.max((cut(&recon, n) - cut(&y, n)).norm());
        let b: Vec<C64> = match mode {
            Mode::NearSStar => {
                let mut s = vec![ZERO; len + 1];
                s[1..].copy_from_slice(&y2[..len]);
                s
            }
            Mode::AlmostShift => {
                let mut s = y2.clone();
                s[0] = ZERO;
                s
            }
        };
        b_gens.push(b);
        y1_parts.push(AnalyticVector::new(cut(&y1, n).iter().copied().collect())?);
        y2_parts.push(AnalyticVector::new(cut(&y2, n).iter().copied().collect())?);
    }
    // J(B) lives on indices -1..-len: the column of J(b) is b_1, b_2, ...
    let jb: Vec<DVector<C64>> = b_gens.iter().map(|b| DVector::from_fn(len, |j, _| b[j + 1])).collect();
    let jb_frame = SubspaceBasis::from_vectors(len, &jb, 1e-12)?;
    let f11 = jb_frame.project(&f1);
    let f12 = &f1 - &f11;
    let b_cols: Vec<DVector<C64>> = b_gens.iter().map(|b| cut(b, n)).collect();
    let b_frame = SubspaceBasis::from_vectors(n + 1, &b_cols, 1e-12)?;

    // J(f11) as analytic coefficients 0..len (index 0 is zero)
    let mut jf11 = vec![ZERO; len + 1];
    jf11[1..].copy_from_slice(f11.as_slice());
    let psi = mul(&f.theta, &f.outer_inv);
    let psi_l = AnalyticVector::new(psi.clone())?.to_laurent();
    let mut w_full = LaurentVector::zeros(len);
    for (i, c) in coeffs_h.iter().enumerate() {
        let v = fourier::riesz_project(&pert.vs()[i]);
        let inner = match mode {
            Mode::NearSStar => fourier::shift(&v.truncated(v.order() + 1))?,
            Mode::AlmostShift => backshift(&v),
        };
        let j = fourier::flip(&inner.to_laurent());
        w_full = w_full.plus(&psi_l.mul(&j).scale(*c));
    }
    let correction = match mode {
        Mode::NearSStar => mul(&psi, &jf11[1..]),
        Mode::AlmostShift => mul(&psi, &jf11),
    };
    let correction = AnalyticVector::new(correction)?.to_laurent();
    w_full = w_full.minus(&correction);
    let discarded = w_full.negative_norm();
    let w = fourier::riesz_project(&w_full);
    let w = cut(w.coeffs(), n);

    let trace = DecompositionTrace {
        f1: co_from_column(&f1),
        f11: co_from_column(&f11),
        f12: co_from_column(&f12),
        f1_analytic_residual,
        b_frame,
        y1_parts,
        y2_parts,
        reconstruction_error,
    };
    Ok((w, trace, discarded))
}

/// Result of one slice vector.
#[derive(Debug, Clone)]
pub struct VectorCheck {
    pub h: DVector<C64>,
    pub solved: SolvedW,
    pub explicit: Option<ExplicitW>,
    /// Distance of the explicit `w` to `F`.
    pub explicit_w_dist_to_f: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct InvarianceReport {
    pub mode: Mode,
    pub class: TheoremClass,
    pub theorem_f: DefectSpan,
    pub slice_dim: usize,
    pub minimal_defect: DefectEstimate,
    /// Largest angle of the minimal defect frame against `(I - P_M)F`.
    pub defect_containment_angle: f64,
    pub per_vector: Vec<VectorCheck>,
    /// Largest `dist(S*h, M + F)` over unit `h` in the slice.
    pub max_residual: f64,
    pub defect_bound: usize,
    pub tolerances: Tolerances,
    pub pass: bool,
    pub notes: Vec<String>,
}

impl InvarianceReport {
    pub fn defect_within_bound(&self) -> bool {
        self.minimal_defect.dim <= self.defect_bound
    }
}

pub fn check_invariance(problem: &KernelProblem, mode: Mode, tol: &Tolerances) -> Result<InvarianceReport> {
    let span = theorem_defect_span(problem, mode)?;
    let slice = problem.slice(mode, tol.slice);
    let mut notes = Vec::new();
    if span.dropped > 0 {
        notes.push(format!("{} generator(s) vanished and were dropped from F", span.dropped));
    }
    let explicit = !matches!(span.class, TheoremClass::CoAnalyticNear | TheoremClass::CoAnalyticAlmost);
    let mut per_vector = Vec::with_capacity(slice.dim());
    let mut residuals = Vec::with_capacity(slice.dim());
    for h in slice.columns() {
        let solved = solve_w_in_f(&h, problem, &span.frame, mode)?;
        residuals.push(problem.mod_kernel(&mode_image(&h, mode)?));
        let (explicit_w, dist) = if explicit {
            match construct_explicit_w(&h, problem, mode) {
                Ok(p) => {
                    let d = span.frame.residual(&p.w).norm();
                    (Some(p), Some(d))
                }
                Err(e) => {
                    notes.push(format!("explicit construction skipped: {e}"));
                    (None, None)
                }
            }
        } else {
            (None, None)
        };
        per_vector.push(VectorCheck { h, solved, explicit: explicit_w, explicit_w_dist_to_f: dist });
    }
    let minimal_defect = defect_from_residuals(problem.order() + 1, &residuals, tol.verdict);
    let f_mod = SubspaceBasis::from_columns(&problem.co_kernel.project_columns(span.frame.frame()), 1e-10);
    let defect_containment_angle = max_angle_into(&minimal_defect.frame, &f_mod)?;
    // the slice frame is orthonormal, so this is the worst case over unit vectors
    let max_residual = if per_vector.is_empty() {
        0.0
    } else {
        let cols: Vec<DVector<C64>> = per_vector.iter().map(|v| v.solved.residual_vector.clone()).collect();
        linalg::spectral_norm(&DMatrix::from_columns(&cols))
    };
    let pass = max_residual <= tol.verdict
        && minimal_defect.dim <= span.frame.dim()
        && defect_containment_angle <= tol.defect_angle;
    Ok(InvarianceReport {
        mode,
        class: span.class,
        defect_bound: span.class.defect_bound(problem.pert.rank()),
        theorem_f: span,
        slice_dim: slice.dim(),
        minimal_defect,
        defect_containment_angle,
        per_vector,
        max_residual,
        tolerances: *tol,
        pass,
        notes,
    })
}

/// Whether the outer factor (if any) is of the literal class.
pub fn literal_outer(spec: &SymbolSpec) -> bool {
    spec.outer().map_or(true, |g| g.class() == OuterClass::Literal)
}
