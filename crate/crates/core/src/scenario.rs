//! Scenario files (JSON, complex numbers as `[re, im]`) and seeded random scenarios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::{AnalyticVector, LaurentVector, TruncationBudget, C64, DEFAULT_GUARD, DEFAULT_TAIL_EPS};
use crate::invariance::{Mode, TheoremClass, Tolerances};
use crate::operators::{Convention, PerturbationData};
use crate::subspaces::DEFAULT_RANK_TOL;
use crate::symbols::{auto_budget, BlaschkeProduct, OuterClass, OuterSymbol, SymbolSpec};

pub type Cx = [f64; 2];

fn cx(c: &Cx) -> C64 {
    C64::new(c[0], c[1])
}

fn to_cx(c: C64) -> Cx {
    [c.re, c.im]
}

fn one() -> Cx {
    [1.0, 0.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OuterClassDto {
    Literal,
    Extended,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OuterDto {
    pub constant: Cx,
    /// `p` in `g = c·exp(p)`, coefficients from `z^0`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub log_coeffs: Vec<Cx>,
    #[serde(default = "literal")]
    pub class: OuterClassDto,
}

fn literal() -> OuterClassDto {
    OuterClassDto::Literal
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SymbolDto {
    Zero,
    /// Coefficients from `z^0` (which must vanish).
    AnalyticShift { coeffs: Vec<Cx> },
    ConjInner {
        zeros: Vec<Cx>,
        #[serde(default = "one")]
        unimodular: Cx,
    },
    ConjInnerTimesOuter {
        zeros: Vec<Cx>,
        #[serde(default = "one")]
        unimodular: Cx,
        outer: OuterDto,
    },
    /// Coefficients for `z^-order ..= z^order`.
    RawLaurent { order: usize, coeffs: Vec<Cx> },
}

impl SymbolDto {
    pub fn to_spec(&self) -> Result<SymbolSpec> {
        let cs = |v: &[Cx]| v.iter().map(cx).collect::<Vec<_>>();
        let spec = match self {
            SymbolDto::Zero => SymbolSpec::Zero,
            SymbolDto::AnalyticShift { coeffs } => SymbolSpec::AnalyticShift(AnalyticVector::new(cs(coeffs))?),
            SymbolDto::ConjInner { zeros, unimodular } => SymbolSpec::ConjInner(BlaschkeProduct::new(cs(zeros), cx(unimodular))?),
            SymbolDto::ConjInnerTimesOuter { zeros, unimodular, outer } => {
                let class = match outer.class {
                    OuterClassDto::Literal => OuterClass::Literal,
                    OuterClassDto::Extended => OuterClass::Extended,
                };
                SymbolSpec::ConjInnerTimesOuter(
                    BlaschkeProduct::new(cs(zeros), cx(unimodular))?,
                    OuterSymbol::new(cx(&outer.constant), cs(&outer.log_coeffs), class)?,
                )
            }
            SymbolDto::RawLaurent { order, coeffs } => SymbolSpec::RawLaurent(LaurentVector::new(*order, cs(coeffs))?),
        };
        spec.validate()?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RandomFill {
    pub rank: usize,
    pub degree: usize,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationDto {
    /// Coefficient lists of `u_i` from `z^0`.
    #[serde(default)]
    pub us: Vec<Vec<Cx>>,
    /// Coefficient lists of `v_i`: from `z^0` (PJ) or of `z^-1, z^-2, …` (co-analytic).
    #[serde(default)]
    pub vs: Vec<Vec<Cx>>,
    /// Draw the data from the scenario seed instead.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub random: Option<RandomFill>,
    /// Scale every `u_i`, `v_i` to unit norm.
    #[serde(default)]
    pub normalize: bool,
    /// Allow `u_i` of any nonzero norm.
    #[serde(default)]
    pub relaxed: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConventionDto {
    #[default]
    Pj,
    Coanalytic,
}

impl From<ConventionDto> for Convention {
    fn from(c: ConventionDto) -> Self {
        match c {
            ConventionDto::Pj => Convention::Pj,
            ConventionDto::Coanalytic => Convention::CoAnalytic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeDto {
    NearSStar,
    AlmostShift,
    Cgp,
    #[default]
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetDto {
    /// Matrix order; chosen from the tail certificate when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub order: Option<usize>,
    #[serde(default = "default_degree")]
    pub degree: usize,
    #[serde(default = "default_tail_eps")]
    pub tail_eps: f64,
    #[serde(default = "default_guard")]
    pub guard: usize,
}

fn default_degree() -> usize {
    10
}
fn default_tail_eps() -> f64 {
    DEFAULT_TAIL_EPS
}
fn default_guard() -> usize {
    DEFAULT_GUARD
}

impl Default for BudgetDto {
    fn default() -> Self {
        Self { order: None, degree: default_degree(), tail_eps: default_tail_eps(), guard: default_guard() }
    }
}

pub const DEFAULT_CGP_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TolerancesDto {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verdict: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slice: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub defect_angle: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cgp: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    #[serde(default)]
    pub name: String,
    pub symbol: SymbolDto,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub perturbation: Option<PerturbationDto>,
    #[serde(default)]
    pub convention: ConventionDto,
    #[serde(default)]
    pub mode: ModeDto,
    #[serde(default)]
    pub budget: BudgetDto,
    #[serde(default)]
    pub tolerances: TolerancesDto,
    #[serde(default)]
    pub seed: u64,
}

/// A scenario in domain types, with the order fixed.
#[derive(Debug, Clone)]
pub struct ResolvedScenario {
    pub spec: SymbolSpec,
    pub pert: Option<PerturbationData>,
    pub convention: Convention,
    pub mode: ModeDto,
    pub budget: TruncationBudget,
    pub tolerances: Tolerances,
    pub cgp_tol: f64,
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("scenario: {e}")))
    }

    pub fn tolerances(&self, overrides: &TolerancesDto) -> Tolerances {
        let d = Tolerances::default();
        let pick = |o: Option<f64>, s: Option<f64>, def: f64| o.or(s).unwrap_or(def);
        let t = &self.tolerances;
        Tolerances {
            verdict: pick(overrides.verdict, t.verdict, d.verdict),
            rank: pick(overrides.rank, t.rank, DEFAULT_RANK_TOL),
            slice: pick(overrides.slice, t.slice, d.slice),
            defect_angle: pick(overrides.defect_angle, t.defect_angle, d.defect_angle),
        }
    }

    pub fn perturbation_data(&self) -> Result<Option<PerturbationData>> {
        let Some(p) = &self.perturbation else { return Ok(None) };
        let convention: Convention = self.convention.into();
        let (mut us, mut vs) = if let Some(fill) = &p.random {
            if fill.rank == 0 {
                return Err(Error::InvalidInput("random fill needs rank >= 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
            let us = (0..fill.rank).map(|_| unit_poly(&mut rng, fill.degree)).collect::<Vec<_>>();
            let vs = (0..fill.rank).map(|_| unit_poly(&mut rng, fill.degree)).collect::<Vec<_>>();
            (us, vs)
        } else {
            let to = |l: &Vec<Vec<Cx>>| l.iter().map(|v| v.iter().map(cx).collect::<Vec<_>>()).collect::<Vec<_>>();
            (to(&p.us), to(&p.vs))
        };
        if us.is_empty() && vs.is_empty() {
            return Ok(None);
        }
        if p.normalize {
            for x in us.iter_mut().chain(vs.iter_mut()) {
                let n = x.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
                if n > 0.0 {
                    x.iter_mut().for_each(|c| *c /= n);
                }
            }
        }
        let us = us.into_iter().map(AnalyticVector::new).collect::<Result<Vec<_>>>()?;
        let vs = vs.into_iter().map(|v| laurent_from_list(&v, convention)).collect::<Result<Vec<_>>>()?;
        let data = if p.relaxed {
            PerturbationData::new_relaxed(us, vs, convention)?
        } else {
            PerturbationData::new(us, vs, convention)?
        };
        Ok(Some(data))
    }

    /// Domain objects; the order comes from the tail certificate unless given.
    pub fn resolve(&self, overrides: &TolerancesDto) -> Result<ResolvedScenario> {
        let spec = self.symbol.to_spec()?;
        let pert = self.perturbation_data()?;
        let bw = pert.as_ref().map_or(0, |p| p.bandwidth());
        let b = &self.budget;
        let budget = match b.order {
            Some(order) => {
                let budget = TruncationBudget::with_params(order, b.degree, b.tail_eps, b.guard)?;
                budget.check_bandwidth(bw.max(spec.bandwidth()))?;
                budget
            }
            None => auto_budget(&spec, b.degree, b.tail_eps, b.guard, bw)?,
        };
        Ok(ResolvedScenario {
            spec,
            pert,
            convention: self.convention.into(),
            mode: self.mode,
            budget,
            tolerances: self.tolerances(overrides),
            cgp_tol: overrides.cgp.or(self.tolerances.cgp).unwrap_or(DEFAULT_CGP_TOL),
        })
    }
}

fn laurent_from_list(v: &[C64], convention: Convention) -> Result<LaurentVector> {
    match convention {
        Convention::Pj => {
            let order = v.len().saturating_sub(1);
            let terms: Vec<(isize, C64)> = v.iter().enumerate().map(|(k, c)| (k as isize, *c)).collect();
            LaurentVector::from_terms(order, &terms)
        }
        Convention::CoAnalytic => {
            let terms: Vec<(isize, C64)> = v.iter().enumerate().map(|(j, c)| (-(j as isize) - 1, *c)).collect();
            LaurentVector::from_terms(v.len(), &terms)
        }
    }
}

fn unit_poly(rng: &mut ChaCha8Rng, degree: usize) -> Vec<C64> {
    let mut p: Vec<C64> = (0..=degree).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
    let n = p.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
    p.iter_mut().for_each(|c| *c /= n);
    p
}

/// Degree budget used for random scenarios.
pub const RANDOM_DEGREE: usize = 6;
/// Largest zero modulus of random inner factors.
pub const RANDOM_MAX_RADIUS: f64 = 0.8;

fn random_zeros(rng: &mut ChaCha8Rng) -> Vec<Cx> {
    let k = rng.random_range(1..=3);
    (0..k)
        .map(|_| {
            let r = RANDOM_MAX_RADIUS * rng.random_range(0.0f64..1.0).sqrt();
            let t = rng.random_range(0.0..std::f64::consts::TAU);
            [r * t.cos(), r * t.sin()]
        })
        .collect()
}

fn random_phase(rng: &mut ChaCha8Rng) -> Cx {
    let t: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    [t.cos(), t.sin()]
}

fn random_constant(rng: &mut ChaCha8Rng) -> Cx {
    let m: f64 = rng.random_range(0.5..2.0);
    let p = random_phase(rng);
    [m * p[0], m * p[1]]
}

/// The fixed non-constant outer factor `exp(z/4)` of the extended probe.
pub fn extended_outer() -> OuterDto {
    OuterDto { constant: one(), log_coeffs: vec![[0.0, 0.0], [0.25, 0.0]], class: OuterClassDto::Extended }
}

/// Scenario `index` of class `class` under `seed`. Each index has its own stream,
/// so scenarios do not depend on how many others are drawn. With `extended` the outer
/// factor of the `conj-inner-outer` classes is `exp(z/4)`.
pub fn random_scenario(class: TheoremClass, seed: u64, index: u64, extended: bool) -> Scenario {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    use TheoremClass::*;
    let coanalytic = matches!(class, CoAnalyticNear | CoAnalyticAlmost);
    let outer = |rng: &mut ChaCha8Rng| {
        if extended {
            extended_outer()
        } else {
            OuterDto { constant: random_constant(rng), log_coeffs: vec![], class: OuterClassDto::Literal }
        }
    };
    let symbol = match class {
        AnalyticSymbolNear | AnalyticSymbolAlmost => {
            if rng.random_range(0..3) == 0 {
                SymbolDto::Zero
            } else {
                let mut coeffs = vec![[0.0, 0.0]];
                let degree = rng.random_range(0..4);
                coeffs.extend(unit_poly(&mut rng, degree).into_iter().map(to_cx));
                SymbolDto::AnalyticShift { coeffs }
            }
        }
        ConjInnerNear | ConjInnerAlmost => SymbolDto::ConjInner { zeros: random_zeros(&mut rng), unimodular: random_phase(&mut rng) },
        ConjInnerOuterNear | ConjInnerOuterAlmost => {
            let zeros = random_zeros(&mut rng);
            SymbolDto::ConjInnerTimesOuter { zeros, unimodular: random_phase(&mut rng), outer: outer(&mut rng) }
        }
        OuterOnlyNear => SymbolDto::ConjInnerTimesOuter { zeros: vec![], unimodular: random_phase(&mut rng), outer: outer(&mut rng) },
        CoAnalyticNear | CoAnalyticAlmost => {
            let zeros = random_zeros(&mut rng);
            let unimodular = random_phase(&mut rng);
            if rng.random_range(0..2) == 0 {
                SymbolDto::ConjInner { zeros, unimodular }
            } else {
                let outer = OuterDto { constant: random_constant(&mut rng), log_coeffs: vec![], class: OuterClassDto::Literal };
                SymbolDto::ConjInnerTimesOuter { zeros, unimodular, outer }
            }
        }
    };
    let rank = rng.random_range(1..=2);
    let draw = |rng: &mut ChaCha8Rng| {
        let degree = rng.random_range(0..=5);
        unit_poly(rng, degree).into_iter().map(to_cx).collect::<Vec<Cx>>()
    };
    let us: Vec<Vec<Cx>> = (0..rank).map(|_| draw(&mut rng)).collect();
    let vs: Vec<Vec<Cx>> = (0..rank).map(|_| draw(&mut rng)).collect();
    let mode = match class.mode() {
        Mode::NearSStar => ModeDto::NearSStar,
        Mode::AlmostShift => ModeDto::AlmostShift,
    };
    Scenario {
        name: format!("{}-{seed}-{index}", class.name()),
        symbol,
        perturbation: Some(PerturbationDto { us, vs, random: None, normalize: false, relaxed: false }),
        convention: if coanalytic { ConventionDto::Coanalytic } else { ConventionDto::Pj },
        mode,
        budget: BudgetDto { degree: RANDOM_DEGREE, ..BudgetDto::default() },
        tolerances: TolerancesDto::default(),
        seed,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const W1: &str = r#"{
        "name": "w1",
        "symbol": {"kind": "conj_inner", "zeros": [[0, 0]]},
        "perturbation": {"us": [[[0, 0], [0, 0], [1, 0]]], "vs": [[[1, 0]]]},
        "budget": {"order": 8, "degree": 3, "guard": 2}
    }"#;

    #[test]
    fn parses_and_resolves() {
        let s = Scenario::from_json(W1).unwrap();
        assert_eq!(s.mode, ModeDto::All);
        let r = s.resolve(&TolerancesDto::default()).unwrap();
        assert_eq!(r.budget.order, 8);
        assert_eq!(r.pert.as_ref().unwrap().rank(), 1);
        assert!(matches!(r.spec, SymbolSpec::ConjInner(_)));
        let back: Scenario = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn rejects_bad_input() {
        let bad_zero = W1.replace("[[0, 0]]}", "[[1.2, 0]]}");
        assert!(matches!(Scenario::from_json(&bad_zero).unwrap().resolve(&TolerancesDto::default()), Err(Error::ZeroOutsideDisk(_))));
        assert!(Scenario::from_json(&W1.replace("\"name\"", "\"nmae\"")).is_err());
        let non_unit = W1.replace("[[[1, 0]]]", "[[[2, 0]]]");
        assert!(Scenario::from_json(&non_unit).unwrap().resolve(&TolerancesDto::default()).is_err());
    }

    #[test]
    fn coanalytic_vs_are_negative_frequencies() {
        let v = laurent_from_list(&[C64::new(0.0, 0.0), C64::new(1.0, 0.0)], Convention::CoAnalytic).unwrap();
        assert_eq!(v.coeff(-2), C64::new(1.0, 0.0));
        assert_eq!(v.norm(), 1.0);
    }

    #[test]
    fn random_scenarios_are_reproducible_and_valid() {
        for class in TheoremClass::ALL {
            let a = random_scenario(class, 42, 3, false);
            assert_eq!(a, random_scenario(class, 42, 3, false));
            assert_ne!(a, random_scenario(class, 42, 4, false));
            let r = a.resolve(&TolerancesDto::default()).unwrap();
            assert!(r.budget.order >= 2 * RANDOM_DEGREE + DEFAULT_GUARD);
            let p = r.pert.unwrap();
            assert!(p.rank() == 1 || p.rank() == 2);
            assert_eq!(crate::invariance::classify(&r.spec, r.convention, class.mode()).unwrap(), class);
        }
    }
}
