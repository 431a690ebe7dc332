//! Numerical checks of the recovery guarantees for the greedy solver.
//!
//! * [`condition_eq4_min_s`] finds the smallest sparsity level `s` at which
//!   the restricted-convexity hypothesis
//!   `s ≥ |F̄ ∪ F⁰| + 4|F̄∖F⁰| · ρ₊(1)/ρ₋(s) · ln(20 ρ₊(|F̄∖F⁰|)/ρ₋(s))` holds.
//! * [`verify_theorem1`] compares a finished run of `k₀ = s − |F̄ ∪ F⁰|`
//!   steps against `Q(x⁽ᵏ⁾) ≤ Q(x̄) + 2.5 ε_s²/ρ₋(s)` and
//!   `‖x⁽ᵏ⁾ − x̄‖₂ ≤ √6 ε_s/ρ₋(s)`.
//! * [`verify_corollary2`] checks the noise-level form
//!   `‖x⁽ᵏ⁾ − x̄‖₂ ≤ 2√6 ρ₊(s)^{1/2} ‖Ax̄ − y‖₂ / ρ₋(s)` with `s = 31k̄`.
//! * The `lemma*_oracle` functions evaluate the three supporting one-step
//!   inequalities on concrete instances and return the amount by which each
//!   is violated (zero when it holds).
//!
//! Bounds are only *asserted* when every constant involved is exact; with
//! sampled constants the outcome is reported as a warning.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{distance, DenseVector, SupportSet};
use crate::math::{ceil, ln, sqrt};
use crate::objective::{Objective, SensingProblem};
use crate::omp::{select_coordinate, OmpResult};
use crate::rsc::{top_s_norm, Mode, RscLookup};

/// Absolute slack allowed on every bound and lemma inequality.
pub const BOUND_SLACK: f64 = 1e-9;

/// Coefficient of `ε_s²/ρ₋(s)` in the objective-gap bound.
pub const OBJECTIVE_GAP_COEFFICIENT: f64 = 2.5;

/// Square of the coefficient of `ε_s/ρ₋(s)` in the parameter bound.
pub const PARAM_ERROR_COEFFICIENT_SQ: f64 = 6.0;

/// Sparsity multiple `s = 31k̄` of the simplified condition.
pub const COROLLARY_LEVEL_FACTOR: usize = 31;

/// Iteration multiple `k₀ = 30k̄` of the simplified condition.
pub const COROLLARY_ITERATION_FACTOR: usize = 30;

/// Admissible ratio `ρ₊(k̄)/ρ₋(31k̄)`.
pub const COROLLARY_RATIO: f64 = 2.0;

/// `num / den`, with `0` for a zero numerator and `+∞` for a non-positive
/// denominator.
fn quotient(num: f64, den: f64) -> f64 {
    if num == 0.0 {
        0.0
    } else if den <= 0.0 {
        f64::INFINITY
    } else {
        num / den
    }
}

/// A target vector `x̄` together with its support `F̄`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TargetSignal {
    xbar: DenseVector,
    support: SupportSet,
}

impl TargetSignal {
    pub fn new(xbar: DenseVector) -> Self {
        let support = xbar.support();
        Self { xbar, support }
    }

    pub fn xbar(&self) -> &DenseVector {
        &self.xbar
    }

    pub fn support(&self) -> &SupportSet {
        &self.support
    }

    /// `k̄ = |supp(x̄)|`
    pub fn kbar(&self) -> usize {
        self.support.len()
    }

    pub fn dimension(&self) -> usize {
        self.xbar.len()
    }
}

/// Right-hand side of the sparsity condition at level `s`.
pub fn condition_eq4_rhs(
    fbar: &SupportSet,
    f0: &SupportSet,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    let union = fbar.union(f0).len() as f64;
    let missing = fbar.difference(f0).len();
    if missing == 0 {
        return Ok(union);
    }
    let rho_minus_s = rsc.rho_minus(s)?;
    if rho_minus_s <= 0.0 {
        return Ok(f64::INFINITY);
    }
    let rho_plus_1 = rsc.rho_plus(1)?;
    let rho_plus_missing = rsc.rho_plus(missing)?;
    Ok(union
        + 4.0
            * missing as f64
            * (rho_plus_1 / rho_minus_s)
            * ln(20.0 * rho_plus_missing / rho_minus_s))
}

/// Whether the sparsity condition holds at level `s`.
pub fn condition_eq4_holds(
    fbar: &SupportSet,
    f0: &SupportSet,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<bool> {
    if s < fbar.union(f0).len() {
        return Ok(false);
    }
    Ok(s as f64 >= condition_eq4_rhs(fbar, f0, s, rsc)?)
}

/// Smallest `s ≤ d` satisfying the sparsity condition, scanning upward from
/// `|F̄ ∪ F⁰|`; `None` when no level qualifies.
pub fn condition_eq4_min_s(
    fbar: &SupportSet,
    f0: &SupportSet,
    d: usize,
    rsc: &dyn RscLookup,
) -> Result<Option<usize>> {
    let union = fbar.union(f0).len();
    if fbar.difference(f0).is_empty() {
        return Ok((union <= d).then_some(union));
    }
    for s in union.max(1)..=d {
        if condition_eq4_holds(fbar, f0, s, rsc)? {
            return Ok(Some(s));
        }
    }
    Ok(None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Corollary1Verdict {
    pub holds: bool,
    /// `30k̄`
    pub k0: usize,
    /// `31k̄`
    pub s: usize,
}

/// `ρ₊(k̄) ≤ 2ρ₋(31k̄)`, with the iteration count and level it licenses.
pub fn corollary1_check(
    rho_plus_kbar: f64,
    rho_minus_31kbar: f64,
    kbar: usize,
) -> Corollary1Verdict {
    Corollary1Verdict {
        holds: rho_plus_kbar <= COROLLARY_RATIO * rho_minus_31kbar,
        k0: COROLLARY_ITERATION_FACTOR * kbar,
        s: COROLLARY_LEVEL_FACTOR * kbar,
    }
}

/// Whether a hypothesis was established with certified constants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Certainty {
    Exact,
    Heuristic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    /// Hypothesis holds with exact constants and both bounds hold.
    Pass,
    /// Hypothesis holds with exact constants and a bound is violated.
    Fail,
    /// Hypothesis holds only with sampled constants and a bound is violated.
    Warning,
    /// Hypothesis fails, or the run length does not match the guarantee.
    NotApplicable,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LemmaId {
    Lemma1,
    Lemma2,
    Lemma3,
}

/// Aggregate of one lemma oracle over several instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LemmaCheck {
    pub lemma: LemmaId,
    pub instances: usize,
    pub max_violation: f64,
}

impl LemmaCheck {
    pub fn new(lemma: LemmaId) -> Self {
        Self {
            lemma,
            instances: 0,
            max_violation: 0.0,
        }
    }

    pub fn record(&mut self, violation: f64) {
        self.instances += 1;
        self.max_violation = self.max_violation.max(violation);
    }

    pub fn merge(&mut self, other: &LemmaCheck) {
        debug_assert_eq!(self.lemma, other.lemma);
        self.instances += other.instances;
        self.max_violation = self.max_violation.max(other.max_violation);
    }

    pub fn passed(&self) -> bool {
        self.max_violation <= BOUND_SLACK
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReportKind {
    Theorem1,
    Corollary2,
}

/// Hypothesis status, bounds, measured quantities and slacks for one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryReport {
    pub kind: ReportKind,
    pub s_used: usize,
    pub hypothesis_holds: bool,
    pub certainty: Certainty,
    /// Smallest level satisfying the sparsity condition, when every level up
    /// to it is available from the constants source.
    pub min_s: Option<usize>,
    pub k0_required: usize,
    pub iterations_run: usize,
    /// The run had budget `k0_required` and either used it all or stopped on
    /// a vanishing gradient.
    pub conforming: bool,
    pub epsilon: f64,
    pub rho_minus_s: f64,
    pub objective_gap: f64,
    pub objective_bound: f64,
    pub param_error: f64,
    pub param_bound: f64,
    /// `√6 ε_s/ρ₋(s)`; equals `param_bound` for [`ReportKind::Theorem1`].
    pub theorem1_param_bound: f64,
    pub objective_slack: f64,
    pub param_slack: f64,
    pub verdict: Verdict,
    pub lemma_checks: Vec<LemmaCheck>,
}

impl TheoryReport {
    /// Largest amount by which an asserted bound or lemma is exceeded.
    pub fn max_violation(&self) -> f64 {
        let mut v: f64 = 0.0;
        if self.verdict == Verdict::Fail {
            v = v.max(-self.objective_slack).max(-self.param_slack);
        }
        for c in &self.lemma_checks {
            v = v.max(c.max_violation);
        }
        v
    }

    pub fn failed(&self) -> bool {
        self.verdict == Verdict::Fail || self.lemma_checks.iter().any(|c| !c.passed())
    }
}

fn certainty_of(levels: &[Mode]) -> Certainty {
    if levels.iter().all(|m| *m == Mode::Exact) {
        Certainty::Exact
    } else {
        Certainty::Heuristic
    }
}

fn verdict_for(
    hypothesis: bool,
    conforming: bool,
    certainty: Certainty,
    slacks: &[f64],
) -> Verdict {
    if !hypothesis || !conforming {
        Verdict::NotApplicable
    } else if slacks.iter().all(|s| *s >= -BOUND_SLACK) {
        Verdict::Pass
    } else if certainty == Certainty::Exact {
        Verdict::Fail
    } else {
        Verdict::Warning
    }
}

fn check_level(s: usize, d: usize) -> Result<()> {
    if s == 0 || s > d {
        return Err(Error::InvalidSparsity { s, d });
    }
    Ok(())
}

/// Violation of `Q(x) − Q(x̄) ≤ 1.5ρ₊(s)‖x̄_{F̄∖F}‖² + 0.5ε_s(x̄)²/ρ₊(s)` for
/// a given restricted minimizer `x` over `F`.
fn lemma1_violation(
    obj: &dyn Objective,
    target: &TargetSignal,
    f: &SupportSet,
    x: &[f64],
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    check_level(s, obj.dimension())?;
    let missing = target.support().difference(f);
    if s < missing.len() {
        return Err(Error::InvalidArgument("lemma 1 needs s >= |Fbar \\ F|"));
    }
    let xbar = target.xbar();
    let rho_plus = rsc.rho_plus(s)?;
    let grad_bar = obj.gradient(xbar)?;
    let eps = top_s_norm(&grad_bar, s);
    let tail_sq: f64 = missing.iter().map(|i| xbar[i] * xbar[i]).sum();
    let lhs = obj.value(x)? - obj.value(xbar)?;
    let rhs = 1.5 * rho_plus * tail_sq + 0.5 * quotient(eps * eps, rho_plus);
    Ok((lhs - rhs).max(0.0))
}

/// Violation of `ρ₋(s)‖x − x̄‖² ≤ 2[Q(x) − Q(x̄)] + ε_s(x̄)²/ρ₋(s)`.
fn lemma2_violation(
    obj: &dyn Objective,
    target: &TargetSignal,
    f: &SupportSet,
    x: &[f64],
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    check_level(s, obj.dimension())?;
    if s < f.union(target.support()).len() {
        return Err(Error::InvalidArgument("lemma 2 needs s >= |F u Fbar|"));
    }
    let xbar = target.xbar();
    let rho_minus = rsc.rho_minus(s)?;
    let eps = top_s_norm(&obj.gradient(xbar)?, s);
    let dist = distance(x, xbar);
    let lhs = rho_minus * dist * dist;
    let rhs = 2.0 * (obj.value(x)? - obj.value(xbar)?) + quotient(eps * eps, rho_minus);
    Ok((lhs - rhs).max(0.0))
}

/// Violation of the one-step progress bound
/// `min_α Q(x + αeⱼ) ≤ Q(x) − ρ₋(s)‖x − x̄‖² / (ρ₊(1) (Σ_{F̄∖F}|x̄ᵢ|)²) · max(0, Q(x) − Q(x̄))`
/// with `j = argmaxᵢ |∇Q(x)ᵢ|`.
fn lemma3_violation(
    obj: &dyn Objective,
    target: &TargetSignal,
    f: &SupportSet,
    x: &[f64],
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    check_level(s, obj.dimension())?;
    let missing = target.support().difference(f);
    if missing.is_empty() {
        return Err(Error::InvalidArgument("lemma 3 needs Fbar \\ F nonempty"));
    }
    if s < f.union(target.support()).len() {
        return Err(Error::InvalidArgument("lemma 3 needs s >= |F u Fbar|"));
    }
    let xbar = target.xbar();
    let rho_minus = rsc.rho_minus(s)?;
    let rho_plus_1 = rsc.rho_plus(1)?;
    let j = select_coordinate(&obj.gradient(x)?)?;
    let lhs = obj.coordinate_minimum(x, j)?;
    let q = obj.value(x)?;
    let mass: f64 = missing.iter().map(|i| xbar[i].abs()).sum();
    let dist = distance(x, xbar);
    let rate = quotient(rho_minus * dist * dist, rho_plus_1 * mass * mass);
    let rhs = q - rate * (q - obj.value(xbar)?).max(0.0);
    Ok((lhs - rhs).max(0.0))
}

/// Lemma 1 on `x = argmin_{supp(z) ⊆ F} Q(z)`; requires `s ≥ |F̄∖F|`.
pub fn lemma1_oracle(
    obj: &dyn Objective,
    target: &TargetSignal,
    f: &SupportSet,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    let x = obj.restricted_minimize(f)?;
    lemma1_violation(obj, target, f, &x, s, rsc)
}

/// Lemma 2 on `x = argmin_{supp(z) ⊆ F} Q(z)`; requires `s ≥ |F ∪ F̄|`.
pub fn lemma2_oracle(
    obj: &dyn Objective,
    target: &TargetSignal,
    f: &SupportSet,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    let x = obj.restricted_minimize(f)?;
    lemma2_violation(obj, target, f, &x, s, rsc)
}

/// Lemma 3 on `x = argmin_{supp(z) ⊆ F} Q(z)`; requires `F̄∖F ≠ ∅` and
/// `s ≥ |F ∪ F̄|`.
pub fn lemma3_oracle(
    obj: &dyn Objective,
    target: &TargetSignal,
    f: &SupportSet,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<f64> {
    let x = obj.restricted_minimize(f)?;
    lemma3_violation(obj, target, f, &x, s, rsc)
}

/// Runs whichever lemma oracles apply at level `s` on every iterate of a
/// trace. Missing constants skip a lemma rather than failing.
fn trajectory_lemmas(
    obj: &dyn Objective,
    target: &TargetSignal,
    result: &OmpResult,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<Vec<LemmaCheck>> {
    let mut checks = [
        LemmaCheck::new(LemmaId::Lemma1),
        LemmaCheck::new(LemmaId::Lemma2),
        LemmaCheck::new(LemmaId::Lemma3),
    ];
    let fbar = target.support();
    for (f, x) in result.supports.iter().zip(&result.iterates) {
        let union = f.union(fbar).len();
        let missing = fbar.difference(f).len();
        let mut run = |idx: usize, r: Result<f64>| -> Result<()> {
            match r {
                Ok(v) => {
                    checks[idx].record(v);
                    Ok(())
                }
                Err(Error::MissingLevel(_)) => Ok(()),
                Err(e) => Err(e),
            }
        };
        if missing <= s {
            run(0, lemma1_violation(obj, target, f, x, s, rsc))?;
        }
        if union <= s {
            run(1, lemma2_violation(obj, target, f, x, s, rsc))?;
            if missing > 0 {
                run(2, lemma3_violation(obj, target, f, x, s, rsc))?;
            }
        }
    }
    Ok(checks.into_iter().filter(|c| c.instances > 0).collect())
}

/// Checks a finished run against the two conclusions of the main guarantee
/// at level `s`, using the run's own initial support as `F⁰`.
///
/// The run is conforming when it was given `k₀ = s − |F̄ ∪ F⁰|`; otherwise
/// the report is produced with verdict [`Verdict::NotApplicable`].
pub fn verify_theorem1(
    obj: &dyn Objective,
    target: &TargetSignal,
    result: &OmpResult,
    s: usize,
    rsc: &dyn RscLookup,
) -> Result<TheoryReport> {
    let d = obj.dimension();
    if target.dimension() != d {
        return Err(Error::DimensionMismatch {
            what: "target length",
            expected: d,
            found: target.dimension(),
        });
    }
    check_level(s, d)?;
    let fbar = target.support();
    let f0 = result.initial_support();
    let union = fbar.union(f0).len();
    let missing = fbar.difference(f0).len();
    let k0_required = s.saturating_sub(union);

    let hypothesis_holds = condition_eq4_holds(fbar, f0, s, rsc)?;
    let mut modes = alloc::vec![rsc.level(s)?.mode];
    if missing > 0 {
        modes.push(rsc.level(1)?.mode);
        modes.push(rsc.level(missing)?.mode);
    }
    let certainty = certainty_of(&modes);
    let min_s = condition_eq4_min_s(fbar, f0, d, rsc).unwrap_or(None);
    let conforming = s >= union && result.k0 == k0_required && result.completed();

    let xbar = target.xbar();
    let eps = top_s_norm(&obj.gradient(xbar)?, s);
    let rho_minus_s = rsc.rho_minus(s)?;
    let objective_gap = result.final_objective() - obj.value(xbar)?;
    let objective_bound = OBJECTIVE_GAP_COEFFICIENT * quotient(eps * eps, rho_minus_s);
    let param_error = distance(result.final_iterate(), xbar);
    let param_bound = sqrt(PARAM_ERROR_COEFFICIENT_SQ) * quotient(eps, rho_minus_s);
    let objective_slack = objective_bound - objective_gap;
    let param_slack = param_bound - param_error;

    Ok(TheoryReport {
        kind: ReportKind::Theorem1,
        s_used: s,
        hypothesis_holds,
        certainty,
        min_s,
        k0_required,
        iterations_run: result.iterations(),
        conforming,
        epsilon: eps,
        rho_minus_s,
        objective_gap,
        objective_bound,
        param_error,
        param_bound,
        theorem1_param_bound: param_bound,
        objective_slack,
        param_slack,
        verdict: verdict_for(
            hypothesis_holds,
            conforming,
            certainty,
            &[objective_slack, param_slack],
        ),
        lemma_checks: trajectory_lemmas(obj, target, result, s, rsc)?,
    })
}

/// Checks a least-squares run with `F⁰ = ∅` and `k₀ = 30k̄` against the
/// noise-level bound at `s = 31k̄` (constants read at `min(31k̄, d)`).
pub fn verify_corollary2(
    p: &SensingProblem,
    target: &TargetSignal,
    result: &OmpResult,
    rsc: &dyn RscLookup,
) -> Result<TheoryReport> {
    let d = p.dimension();
    let kbar = target.kbar();
    if kbar == 0 {
        return Err(Error::InvalidArgument(
            "target must have at least one nonzero",
        ));
    }
    let s = COROLLARY_LEVEL_FACTOR * kbar;
    let s_eff = s.min(d);
    let k0_required = COROLLARY_ITERATION_FACTOR * kbar;

    let lvl_kbar = rsc.level(kbar)?;
    let lvl_s = rsc.level(s_eff)?;
    let verdict1 = corollary1_check(lvl_kbar.rho_plus, lvl_s.rho_minus, kbar);
    let certainty = certainty_of(&[lvl_kbar.mode, lvl_s.mode]);
    let conforming =
        result.initial_support().is_empty() && result.k0 == k0_required && result.completed();

    let xbar = target.xbar();
    let residual = p.residual(xbar)?.norm2();
    let eps = top_s_norm(&p.gradient(xbar)?, s_eff);
    let rho_minus_s = lvl_s.rho_minus;
    let param_bound = 2.0
        * sqrt(PARAM_ERROR_COEFFICIENT_SQ)
        * quotient(sqrt(lvl_s.rho_plus) * residual, rho_minus_s);
    let theorem1_param_bound = sqrt(PARAM_ERROR_COEFFICIENT_SQ) * quotient(eps, rho_minus_s);
    let objective_gap = result.final_objective() - p.value(xbar)?;
    let objective_bound = OBJECTIVE_GAP_COEFFICIENT * quotient(eps * eps, rho_minus_s);
    let param_error = distance(result.final_iterate(), xbar);
    let objective_slack = objective_bound - objective_gap;
    let param_slack = param_bound - param_error;

    let f0 = SupportSet::empty();
    let min_s = condition_eq4_min_s(target.support(), &f0, d, rsc).unwrap_or(None);

    Ok(TheoryReport {
        kind: ReportKind::Corollary2,
        s_used: s,
        hypothesis_holds: verdict1.holds,
        certainty,
        min_s,
        k0_required,
        iterations_run: result.iterations(),
        conforming,
        epsilon: eps,
        rho_minus_s,
        objective_gap,
        objective_bound,
        param_error,
        param_bound,
        theorem1_param_bound,
        objective_slack,
        param_slack,
        verdict: verdict_for(
            verdict1.holds,
            conforming,
            certainty,
            &[objective_slack, param_slack],
        ),
        lemma_checks: trajectory_lemmas(p, target, result, s_eff, rsc)?,
    })
}

/// `⌈(1 + 8 ln 40) k̄⌉`: the level at which the sparsity condition first
/// holds when `ρ₊/ρ₋ ≡ 2` and `F⁰ = ∅`.
pub fn ratio_two_level(kbar: usize) -> usize {
    ceil((1.0 + 8.0 * ln(40.0)) * kbar as f64) as usize
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::DenseMatrix;
    use crate::omp::{omp_run, OmpConfig};
    use crate::rsc::{RscLevel, RscProfile, UniformRsc};
    use alloc::vec;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn uniform(rho_minus: f64, rho_plus: f64) -> UniformRsc {
        UniformRsc {
            rho_minus,
            rho_plus,
            mode: Mode::Exact,
        }
    }

    fn support(ix: &[usize], d: usize) -> SupportSet {
        SupportSet::new(ix.iter().copied(), d).unwrap()
    }

    #[test]
    fn min_s_identity_is_thirteen() {
        let s = condition_eq4_min_s(
            &support(&[0], 32),
            &SupportSet::empty(),
            32,
            &uniform(1.0, 1.0),
        )
        .unwrap();
        assert_eq!(s, Some(13));
        // 1 + 4 ln 20 ≈ 12.98
        let rhs = condition_eq4_rhs(
            &support(&[0], 32),
            &SupportSet::empty(),
            13,
            &uniform(1.0, 1.0),
        )
        .unwrap();
        assert!((rhs - 12.982929094215963).abs() < 1e-12);
    }

    #[test]
    fn warm_start_covering_target() {
        let fbar = support(&[1, 4], 10);
        let f0 = support(&[1, 4, 7], 10);
        assert_eq!(
            condition_eq4_min_s(&fbar, &f0, 10, &uniform(0.0, 9.0)).unwrap(),
            Some(3)
        );
    }

    #[test]
    fn ratio_two_matches_simplified_condition() {
        for kbar in 1..=3 {
            let fbar = SupportSet::full(kbar);
            let s = condition_eq4_min_s(&fbar, &SupportSet::empty(), 200, &uniform(1.0, 2.0))
                .unwrap()
                .unwrap();
            assert_eq!(s, ratio_two_level(kbar));
            assert!(s <= COROLLARY_LEVEL_FACTOR * kbar);
        }
        assert_eq!(ratio_two_level(1), 31);
    }

    #[test]
    fn no_level_qualifies() {
        let s = condition_eq4_min_s(
            &support(&[0], 12),
            &SupportSet::empty(),
            12,
            &uniform(1.0, 1.0),
        )
        .unwrap();
        assert_eq!(s, None);
        let s = condition_eq4_min_s(
            &support(&[0], 40),
            &SupportSet::empty(),
            40,
            &uniform(0.0, 1.0),
        )
        .unwrap();
        assert_eq!(s, None);
    }

    #[test]
    fn missing_levels_surface_as_errors() {
        let profile = RscProfile::new().with(RscLevel::exact(1, 1.0, 1.0));
        assert!(matches!(
            condition_eq4_min_s(&support(&[0], 32), &SupportSet::empty(), 32, &profile),
            Err(Error::MissingLevel(_))
        ));
    }

    #[test]
    fn corollary1_examples() {
        assert_eq!(
            corollary1_check(1.0, 1.0, 1),
            Corollary1Verdict {
                holds: true,
                k0: 30,
                s: 31
            }
        );
        assert!(corollary1_check(4.0 / 3.0, 2.0 / 3.0, 1).holds);
        assert!(!corollary1_check(2.1, 1.0, 1).holds);
    }

    fn identity_instance(d: usize, xbar: &[f64], noise: &[f64]) -> (SensingProblem, TargetSignal) {
        let y: Vec<f64> = xbar.iter().zip(noise).map(|(a, b)| a + b).collect();
        let p = SensingProblem::new(DenseMatrix::identity(d), y.into()).unwrap();
        (p, TargetSignal::new(xbar.to_vec().into()))
    }

    fn identity_profile() -> RscProfile {
        RscProfile::exact(&DenseMatrix::identity(31), [1, 31], 1_000).unwrap()
    }

    #[test]
    fn theorem1_noiseless_identity_has_zero_slack() {
        let mut xbar = vec![0.0; 31];
        xbar[0] = 7.0;
        let (p, target) = identity_instance(31, &xbar, &[0.0; 31]);
        let r = omp_run(&p, &OmpConfig::new(30)).unwrap();
        let rep = verify_theorem1(&p, &target, &r, 31, &identity_profile()).unwrap();
        assert!(rep.hypothesis_holds && rep.conforming);
        assert_eq!(rep.certainty, Certainty::Exact);
        assert_eq!(
            (rep.epsilon, rep.objective_bound, rep.param_bound),
            (0.0, 0.0, 0.0)
        );
        assert_eq!((rep.objective_gap, rep.param_error), (0.0, 0.0));
        assert_eq!(rep.verdict, Verdict::Pass);
        assert!(!rep.failed());
    }

    #[test]
    fn theorem1_noisy_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let raw: Vec<f64> = (0..31).map(|_| rng.sample(StandardNormal)).collect();
        let norm = sqrt(raw.iter().map(|v| v * v).sum());
        let noise: Vec<f64> = raw.iter().map(|v| 0.1 * v / norm).collect();
        let mut xbar = vec![0.0; 31];
        xbar[0] = 7.0;
        let (p, target) = identity_instance(31, &xbar, &noise);
        let r = omp_run(&p, &OmpConfig::new(30)).unwrap();
        let rep = verify_theorem1(&p, &target, &r, 31, &identity_profile()).unwrap();
        // ∇Q(x̄) = −2η, so ε₃₁ = 2‖η‖ = 0.2.
        assert!((rep.epsilon - 0.2).abs() < 1e-12);
        assert!(rep.param_error <= sqrt(6.0) * 0.2);
        assert_eq!(rep.verdict, Verdict::Pass);
        assert_eq!(rep.min_s, None, "levels 2..30 are not in the profile");
        assert!(rep.lemma_checks.iter().all(LemmaCheck::passed));
    }

    #[test]
    fn theorem1_flags_wrong_run_length() {
        let mut xbar = vec![0.0; 31];
        xbar[4] = 1.0;
        let noise: Vec<f64> = (0..31).map(|i| 0.001 * (i as f64 - 15.0)).collect();
        let (p, target) = identity_instance(31, &xbar, &noise);
        let r = omp_run(&p, &OmpConfig::new(5)).unwrap();
        let rep = verify_theorem1(&p, &target, &r, 31, &identity_profile()).unwrap();
        assert!(!rep.conforming);
        assert_eq!(rep.verdict, Verdict::NotApplicable);
    }

    #[test]
    fn corollary2_identity_bound() {
        let mut xbar = vec![0.0; 31];
        xbar[0] = 1.0;
        let mut v = vec![0.0; 31];
        v[3] = 0.6;
        v[8] = -0.8;
        let noise: Vec<f64> = v.iter().map(|x| 0.05 * x).collect();
        let (p, target) = identity_instance(31, &xbar, &noise);
        let r = omp_run(&p, &OmpConfig::new(30)).unwrap();
        let rep = verify_corollary2(&p, &target, &r, &identity_profile()).unwrap();
        assert!((rep.param_bound - 2.0 * sqrt(6.0) * 0.05).abs() < 1e-12);
        assert!(rep.param_error <= rep.param_bound);
        assert!(rep.param_bound >= rep.theorem1_param_bound - 1e-12);
        assert_eq!(rep.verdict, Verdict::Pass);
    }

    #[test]
    fn sampled_constants_downgrade_to_warning() {
        let mut xbar = vec![0.0; 31];
        xbar[0] = 1.0;
        let (p, target) = identity_instance(31, &xbar, &[0.0; 31]);
        let r = omp_run(&p, &OmpConfig::new(30)).unwrap();
        let sampled = UniformRsc {
            rho_minus: 1.0,
            rho_plus: 1.0,
            mode: Mode::Sampled,
        };
        let rep = verify_theorem1(&p, &target, &r, 31, &sampled).unwrap();
        assert_eq!(rep.certainty, Certainty::Heuristic);
        assert_eq!(
            verdict_for(true, true, Certainty::Heuristic, &[-1.0]),
            Verdict::Warning
        );
        assert_eq!(
            verdict_for(true, true, Certainty::Exact, &[-1.0]),
            Verdict::Fail
        );
    }

    #[test]
    fn lemma_trivial_cases() {
        let mut xbar = vec![0.0; 6];
        xbar[0] = 7.0;
        let (p, target) = identity_instance(6, &xbar, &[0.0; 6]);
        let rsc = uniform(1.0, 1.0);
        // F ⊇ F̄
        assert_eq!(
            lemma1_oracle(&p, &target, &support(&[0, 2], 6), 1, &rsc).unwrap(),
            0.0
        );
        assert_eq!(
            lemma2_oracle(&p, &target, &support(&[0], 6), 1, &rsc).unwrap(),
            0.0
        );
        // F = ∅ on the identity: j = 0 and min_α Q = 0.
        assert_eq!(
            lemma3_oracle(&p, &target, &SupportSet::empty(), 1, &rsc).unwrap(),
            0.0
        );
        assert!(lemma3_oracle(&p, &target, &support(&[0], 6), 1, &rsc).is_err());
        assert!(lemma2_oracle(&p, &target, &support(&[1, 2], 6), 2, &rsc).is_err());
    }

    #[test]
    fn lemma1_identity_closed_form() {
        // Identity, F = ∅: Q(0) − Q(x̄) = ‖y‖² − ‖η‖², RHS = 1.5‖x̄‖² + 0.5 ε².
        let mut xbar = vec![0.0; 5];
        xbar[1] = 2.0;
        let noise = [0.1, 0.0, -0.2, 0.0, 0.05];
        let (p, target) = identity_instance(5, &xbar, &noise);
        let y: Vec<f64> = xbar.iter().zip(&noise).map(|(a, b)| a + b).collect();
        let lhs = y.iter().map(|v| v * v).sum::<f64>() - noise.iter().map(|v| v * v).sum::<f64>();
        let eps1 = 2.0 * 0.2;
        let rhs = 1.5 * 4.0 + 0.5 * eps1 * eps1;
        assert!(lhs < rhs);
        assert_eq!(
            lemma1_oracle(&p, &target, &SupportSet::empty(), 1, &uniform(1.0, 1.0)).unwrap(),
            0.0
        );
    }

    #[test]
    fn oracles_detect_wrong_constants() {
        // Identity, x̄ = e₀, F = ∅: Q(0) − Q(x̄) = 1 and ‖x − x̄‖ = 1.
        let mut xbar = vec![0.0; 4];
        xbar[0] = 1.0;
        let (p, target) = identity_instance(4, &xbar, &[0.0; 4]);
        let f = SupportSet::empty();
        // Claiming ρ₊ = 0.5 makes the right side 0.75 < 1.
        assert!(
            (lemma1_oracle(&p, &target, &f, 1, &uniform(1.0, 0.5)).unwrap() - 0.25).abs() < 1e-12
        );
        // Claiming ρ₋ = 3 makes the left side 3 > 2.
        assert!(
            (lemma2_oracle(&p, &target, &f, 1, &uniform(3.0, 3.0)).unwrap() - 1.0).abs() < 1e-12
        );
        // Claiming ρ₋ = 2, ρ₊(1) = 1 promises a decrease of 2 from Q = 1.
        assert!(
            (lemma3_oracle(&p, &target, &f, 1, &uniform(2.0, 1.0)).unwrap() - 1.0).abs() < 1e-12
        );
    }

    #[test]
    fn lemma_oracles_hold_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let a = DenseMatrix::from_fn(8, 12, |_, _| {
                rng.sample::<f64, _>(StandardNormal) / sqrt(8.0)
            })
            .unwrap();
            let kbar = rng.random_range(1..=3);
            let mut xbar = vec![0.0; 12];
            for j in rand::seq::index::sample(&mut rng, 12, kbar) {
                xbar[j] = rng.sample(StandardNormal);
            }
            let mut y = a.mul_vec(&xbar).unwrap();
            for v in y.iter_mut() {
                *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
            }
            let p = SensingProblem::new(a.clone(), y).unwrap();
            let target = TargetSignal::new(xbar.into());
            let size = rng.random_range(0..=3);
            let f = SupportSet::new(rand::seq::index::sample(&mut rng, 12, size), 12).unwrap();
            let profile = RscProfile::exact(&a, 1..=6, 10_000).unwrap();
            let union = f.union(target.support()).len();
            let missing = target.support().difference(&f).len();
            for s in missing.max(1)..=6 {
                assert!(lemma1_oracle(&p, &target, &f, s, &profile).unwrap() <= BOUND_SLACK);
            }
            for s in union.max(1)..=6 {
                assert!(lemma2_oracle(&p, &target, &f, s, &profile).unwrap() <= BOUND_SLACK);
                if missing > 0 {
                    assert!(lemma3_oracle(&p, &target, &f, s, &profile).unwrap() <= BOUND_SLACK);
                }
            }
        }
    }
}
