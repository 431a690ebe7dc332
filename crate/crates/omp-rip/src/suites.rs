//! Randomized verification suites at desk scale. Instance `i` uses seed
//! `base_seed + i`; a failing instance is replayed by passing its seed with
//! `--instances 1`.
//!
//! * `lemmas`: random `8×12` quadratic instances with `k̄ ≤ 3` and exact
//!   constants for `s ≤ 6`; the three one-step inequalities are checked on a
//!   random support and along a short greedy trajectory at every admissible
//!   `s`.
//! * `theorem1`: identity and rotated-diagonal sensing in dimension 31 with
//!   `k̄ = 1`, `s = 31`, `k₀ = 30` and noise radius cycling through
//!   `{0, 0.01, 0.1}`; every third instance is a `24×32` Gaussian matrix with
//!   sampled constants, reported but never counted as a failure.
//! * `corollaries`: the `31k̄` arithmetic, the noise-level bound on the same
//!   families, and the three estimates of `ε_s`.

use omp_rip_core::rsc::UniformRsc;
use omp_rip_core::rsc::{proposition1_check, rho_sampled};
use omp_rip_core::theory::{
    condition_eq4_min_s, corollary1_check, lemma1_oracle, lemma2_oracle, lemma3_oracle,
    ratio_two_level, verify_corollary2, verify_theorem1, LemmaCheck, LemmaId, BOUND_SLACK,
};
use omp_rip_core::{
    omp_run, DenseMatrix, DenseVector, Error as CoreError, Mode, OmpConfig, RscLevel, RscLookup,
    RscProfile, SensingProblem, SupportSet, TargetSignal, TheoryReport,
};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::error::{AppError, AppResult};
use crate::harness::{gen_gaussian_matrix, gen_noise, gen_orthogonal};

/// Violations above this fail a suite.
pub const VIOLATION_TOLERANCE: f64 = BOUND_SLACK;

const LEMMA_N: usize = 8;
const LEMMA_D: usize = 12;
const LEMMA_MAX_KBAR: usize = 3;
const LEMMA_MAX_S: usize = 6;
const FAMILY_D: usize = 31;
const NOISE_RADII: [f64; 3] = [0.0, 0.01, 0.1];
const REPORT_ONLY_TRIALS: usize = 2000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Lemmas,
    Theorem1,
    Corollaries,
    All,
}

impl Suite {
    fn parts(self) -> &'static [Suite] {
        match self {
            Suite::All => &[Suite::Lemmas, Suite::Theorem1, Suite::Corollaries],
            Suite::Lemmas => &[Suite::Lemmas],
            Suite::Theorem1 => &[Suite::Theorem1],
            Suite::Corollaries => &[Suite::Corollaries],
        }
    }
}

/// Result of one randomized instance.
#[derive(Debug, Clone, Serialize)]
pub struct InstanceOutcome {
    pub suite: Suite,
    pub seed: u64,
    pub max_violation: f64,
    pub failed: bool,
    pub detail: Value,
    #[serde(skip)]
    pub lemma_checks: Vec<LemmaCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Aggregate {
    pub instances: usize,
    pub failures: usize,
    pub max_violation: f64,
    pub worst_seed: Option<u64>,
    pub lemma_checks: Vec<LemmaCheck>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub instances: Vec<InstanceOutcome>,
    pub aggregate: Aggregate,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.aggregate.failures == 0
    }

    /// `Ok` when every instance passed, else the verification error.
    pub fn into_result(self) -> AppResult<SuiteReport> {
        if self.passed() {
            Ok(self)
        } else {
            Err(AppError::Verification {
                instances: self.aggregate.instances,
                failures: self.aggregate.failures,
                max_violation: self.aggregate.max_violation,
                worst_seed: self.aggregate.worst_seed.unwrap_or(self.seed),
            })
        }
    }
}

fn aggregate(outcomes: &[InstanceOutcome]) -> Aggregate {
    let mut checks: Vec<LemmaCheck> = Vec::new();
    let mut worst: Option<(f64, u64)> = None;
    for o in outcomes {
        for c in &o.lemma_checks {
            match checks.iter_mut().find(|x| x.lemma == c.lemma) {
                Some(x) => x.merge(c),
                None => checks.push(*c),
            }
        }
        if worst.is_none_or(|(v, _)| o.max_violation > v) {
            worst = Some((o.max_violation, o.seed));
        }
    }
    checks.sort_by_key(|c| c.lemma);
    Aggregate {
        instances: outcomes.len(),
        failures: outcomes.iter().filter(|o| o.failed).count(),
        max_violation: worst.map_or(0.0, |w| w.0),
        worst_seed: worst.map(|w| w.1),
        lemma_checks: checks,
    }
}

/// Runs `suite` on `instances` seeds starting at `seed`, on the current
/// rayon pool. Violations are reported in the returned value; `Err` is
/// reserved for solver or input failures.
pub fn run_suite(suite: Suite, instances: usize, seed: u64) -> AppResult<SuiteReport> {
    let mut outcomes = Vec::new();
    for &part in suite.parts() {
        let batch: Vec<AppResult<InstanceOutcome>> = (0..instances)
            .into_par_iter()
            .map(|i| {
                let s = seed.wrapping_add(i as u64);
                match part {
                    Suite::Lemmas => lemma_instance(s),
                    Suite::Theorem1 => theorem1_instance(i, s),
                    Suite::Corollaries => corollary_instance(i, s),
                    Suite::All => unreachable!("expanded above"),
                }
            })
            .collect();
        for o in batch {
            outcomes.push(o?);
        }
    }
    let aggregate = aggregate(&outcomes);
    Ok(SuiteReport {
        suite,
        seed,
        instances: outcomes,
        aggregate,
    })
}

fn gaussian_entries(rng: &mut ChaCha8Rng, n: usize, d: usize) -> DenseMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    DenseMatrix::from_fn(n, d, |_, _| rng.sample::<f64, _>(StandardNormal) * scale).expect("finite")
}

fn random_sparse(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Vec<f64> {
    let mut x = vec![0.0; d];
    for j in index::sample(rng, d, k) {
        let mag = rng.random_range(0.5..2.0);
        x[j] = if rng.random_bool(0.5) { mag } else { -mag };
    }
    x
}

fn observe(a: &DenseMatrix, xbar: &[f64], noise: &[f64]) -> AppResult<SensingProblem> {
    let mut y = a.mul_vec(xbar)?;
    for (yi, ni) in y.iter_mut().zip(noise) {
        *yi += ni;
    }
    Ok(SensingProblem::new(a.clone(), y)?)
}

fn lemma_instance(seed: u64) -> AppResult<InstanceOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = gaussian_entries(&mut rng, LEMMA_N, LEMMA_D);
    let kbar = rng.random_range(1..=LEMMA_MAX_KBAR);
    let xbar = random_sparse(&mut rng, LEMMA_D, kbar);
    let noise_level = rng.random_range(0.0..0.5);
    let noise: Vec<f64> = (0..LEMMA_N)
        .map(|_| noise_level * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let p = observe(&a, &xbar, &noise)?;
    let target = TargetSignal::new(DenseVector::new(xbar)?);
    let size = rng.random_range(0..=LEMMA_MAX_KBAR);
    let random_f = SupportSet::new(index::sample(&mut rng, LEMMA_D, size), LEMMA_D)?;

    let profile = RscProfile::exact(&a, 1..=LEMMA_MAX_S, u64::MAX)?;
    let trajectory = omp_run(&p, &OmpConfig::new(LEMMA_MAX_KBAR)).map_err(AppError::Solver)?;
    let mut supports = vec![random_f.clone()];
    supports.extend(trajectory.supports.iter().cloned());

    let mut checks = [LemmaId::Lemma1, LemmaId::Lemma2, LemmaId::Lemma3].map(LemmaCheck::new);
    for f in &supports {
        let union = f.union(target.support()).len();
        let missing = target.support().difference(f).len();
        for s in missing.max(1)..=LEMMA_MAX_S {
            checks[0].record(lemma1_oracle(&p, &target, f, s, &profile)?);
        }
        for s in union.max(1)..=LEMMA_MAX_S {
            checks[1].record(lemma2_oracle(&p, &target, f, s, &profile)?);
            if missing > 0 {
                checks[2].record(lemma3_oracle(&p, &target, f, s, &profile)?);
            }
        }
    }
    let checks: Vec<LemmaCheck> = checks.into_iter().filter(|c| c.instances > 0).collect();
    let max_violation = checks.iter().map(|c| c.max_violation).fold(0.0, f64::max);
    Ok(InstanceOutcome {
        suite: Suite::Lemmas,
        seed,
        max_violation,
        failed: max_violation > VIOLATION_TOLERANCE,
        detail: json!({
            "kbar": kbar,
            "noise_level": noise_level,
            "random_support": random_f.as_slice(),
            "checks": checks,
        }),
        lemma_checks: checks,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
enum Family {
    Identity,
    RotatedDiagonal,
    GaussianReportOnly,
}

/// Identity or `Q·diag(σ)` with `σ ∈ [0.9, 1.1]`: the sparse spectrum is
/// `{σᵢ²}` for every support, so `ρ₊/ρ₋ ≤ 1.5` at all levels.
fn family_matrix(family: Family, seed: u64) -> DenseMatrix {
    match family {
        Family::Identity => DenseMatrix::identity(FAMILY_D),
        Family::RotatedDiagonal => {
            let q = gen_orthogonal(FAMILY_D, seed);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(3);
            let sigma: Vec<f64> = (0..FAMILY_D).map(|_| rng.random_range(0.9..1.1)).collect();
            DenseMatrix::from_fn(FAMILY_D, FAMILY_D, |i, j| q.get(i, j) * sigma[j]).expect("finite")
        }
        Family::GaussianReportOnly => gen_gaussian_matrix(24, 32, seed, false),
    }
}

struct FamilyInstance {
    noise_level: f64,
    problem: SensingProblem,
    target: TargetSignal,
}

fn family_instance(family: Family, i: usize, seed: u64) -> AppResult<FamilyInstance> {
    let a = family_matrix(family, seed);
    let noise_level = NOISE_RADII[(i / 3) % NOISE_RADII.len()];
    let kbar = if family == Family::GaussianReportOnly {
        2
    } else {
        1
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(4);
    let xbar = random_sparse(&mut rng, a.cols(), kbar);
    let problem = observe(&a, &xbar, &gen_noise(a.rows(), noise_level, seed))?;
    Ok(FamilyInstance {
        noise_level,
        problem,
        target: TargetSignal::new(DenseVector::new(xbar)?),
    })
}

fn report_outcome(
    suite: Suite,
    seed: u64,
    family: Family,
    noise_level: f64,
    report: &TheoryReport,
    enforce: bool,
) -> InstanceOutcome {
    let violation = report.max_violation();
    InstanceOutcome {
        suite,
        seed,
        max_violation: if enforce { violation } else { 0.0 },
        failed: enforce && (report.failed() || violation > VIOLATION_TOLERANCE),
        detail: json!({ "family": family, "noise_level": noise_level, "report": report }),
        lemma_checks: if enforce {
            report.lemma_checks.clone()
        } else {
            Vec::new()
        },
    }
}

fn theorem1_instance(i: usize, seed: u64) -> AppResult<InstanceOutcome> {
    let family = [
        Family::Identity,
        Family::RotatedDiagonal,
        Family::GaussianReportOnly,
    ][i % 3];
    let inst = family_instance(family, i, seed)?;
    let a = inst.problem.matrix();
    let (s, profile) = if family == Family::GaussianReportOnly {
        let s = a.rows();
        let mut profile = RscProfile::exact(a, [1, 2], u64::MAX)?;
        let (lo, hi) = rho_sampled(a, s, REPORT_ONLY_TRIALS, seed)?;
        profile.insert(RscLevel::new(
            s,
            lo,
            hi,
            Mode::Sampled,
            Some(REPORT_ONLY_TRIALS as u64),
        ));
        (s, profile)
    } else {
        (FAMILY_D, RscProfile::exact(a, [1, FAMILY_D], u64::MAX)?)
    };
    let k0 = s - inst.target.kbar();
    let run = omp_run(&inst.problem, &OmpConfig::new(k0)).map_err(AppError::Solver)?;
    let report = verify_theorem1(&inst.problem, &inst.target, &run, s, &profile)?;
    let enforce = family != Family::GaussianReportOnly;
    let mut out = report_outcome(
        Suite::Theorem1,
        seed,
        family,
        inst.noise_level,
        &report,
        enforce,
    );
    // A conforming exactly-certified run must meet the hypothesis here.
    if enforce && !(report.hypothesis_holds && report.conforming) {
        out.failed = true;
    }
    Ok(out)
}

fn corollary_instance(i: usize, seed: u64) -> AppResult<InstanceOutcome> {
    let family = [Family::Identity, Family::RotatedDiagonal][i % 2];
    let inst = family_instance(family, i, seed)?;
    let a = inst.problem.matrix();
    let profile = RscProfile::exact(a, [1, FAMILY_D], u64::MAX)?;
    let run = omp_run(&inst.problem, &OmpConfig::new(30)).map_err(AppError::Solver)?;
    let report = verify_corollary2(&inst.problem, &inst.target, &run, &profile)?;
    let mut out = report_outcome(
        Suite::Corollaries,
        seed,
        family,
        inst.noise_level,
        &report,
        true,
    );
    if !(report.hypothesis_holds && report.conforming) {
        out.failed = true;
    }

    // Arithmetic of the simplified condition, cycling k̄ through 1..=3.
    let kbar = 1 + i % 3;
    let fbar = SupportSet::full(kbar);
    let ratio_two = UniformRsc {
        rho_minus: 1.0,
        rho_plus: 2.0,
        mode: Mode::Exact,
    };
    let unit = UniformRsc {
        rho_minus: 1.0,
        rho_plus: 1.0,
        mode: Mode::Exact,
    };
    let min_s = condition_eq4_min_s(&fbar, &SupportSet::empty(), 31 * kbar, &ratio_two)?;
    let unit_s = condition_eq4_min_s(&SupportSet::full(1), &SupportSet::empty(), FAMILY_D, &unit)?;
    let verdict = corollary1_check(2.0, 1.0, kbar);
    let arithmetic_ok = min_s == Some(ratio_two_level(kbar))
        && min_s <= Some(verdict.s)
        && verdict.holds
        && unit_s == Some(13);

    // ε_s estimates with ε̄ = Q(x̄), valid because Q ≥ 0.
    let xbar = inst.target.xbar();
    let epsbar = inst.problem.residual(xbar)?.norm_sq();
    let rho_plus = profile.rho_plus(FAMILY_D)?;
    let prop = match proposition1_check(&inst.problem, xbar, FAMILY_D, rho_plus, Some(epsbar)) {
        Ok(r) => Ok(r),
        Err(CoreError::BoundViolation { what, excess }) => Err((what, excess)),
        Err(e) => return Err(e.into()),
    };
    let prop_violation = prop.as_ref().err().map_or(0.0, |e| e.1);

    out.max_violation = out.max_violation.max(prop_violation);
    out.failed |= !arithmetic_ok || prop_violation > VIOLATION_TOLERANCE;
    out.detail["arithmetic"] = json!({
        "kbar": kbar,
        "min_s_ratio_two": min_s,
        "expected": ratio_two_level(kbar),
        "min_s_unit": unit_s,
        "ok": arithmetic_ok,
    });
    out.detail["optimality"] = match prop {
        Ok(r) => json!(r),
        Err((what, excess)) => json!({ "violated": what, "excess": excess }),
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::with_jobs;

    #[test]
    fn every_suite_passes_a_few_instances() {
        for suite in [Suite::Lemmas, Suite::Theorem1, Suite::Corollaries] {
            let r = run_suite(suite, 6, 100).unwrap();
            assert!(r.passed(), "{suite:?}: {:?}", r.aggregate);
            assert_eq!(r.aggregate.instances, 6);
        }
    }

    #[test]
    fn all_runs_every_part() {
        let r = run_suite(Suite::All, 1, 3).unwrap();
        assert_eq!(r.aggregate.instances, 3);
        assert!(r.passed());
    }

    #[test]
    fn noiseless_identity_has_zero_error() {
        let r = run_suite(Suite::Theorem1, 1, 9).unwrap();
        let rep = &r.instances[0].detail["report"];
        assert_eq!(r.instances[0].detail["family"], "identity");
        assert_eq!(rep["param_error"], 0.0);
        assert_eq!(rep["verdict"], "pass");
    }

    #[test]
    fn reports_do_not_depend_on_jobs() {
        let one = with_jobs(1, || run_suite(Suite::All, 4, 11))
            .unwrap()
            .unwrap();
        let four = with_jobs(4, || run_suite(Suite::All, 4, 11))
            .unwrap()
            .unwrap();
        assert_eq!(
            serde_json::to_string(&one).unwrap(),
            serde_json::to_string(&four).unwrap()
        );
    }

    #[test]
    fn failures_map_to_verification_error() {
        let mut r = run_suite(Suite::Lemmas, 1, 1).unwrap();
        r.aggregate.failures = 1;
        r.aggregate.worst_seed = Some(1);
        let err = r.into_result().unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_VERIFICATION);
        assert!(err.to_string().contains("--seed 1"));
    }
}
