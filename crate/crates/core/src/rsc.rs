//! Restricted strong convexity constants `ρ₋(s)`, `ρ₊(s)`, the restricted
//! isometry constant `δ_s`, and the restricted gradient optimality constant
//! `ε_s`.
//!
//! For the least-squares objective the constants are the extreme sparse
//! eigenvalues of `AᵀA`: the minimum over all size-`s` supports `S` of
//! `λ_min(A_SᵀA_S)` and the maximum of `λ_max(A_SᵀA_S)`. [`rho_exact`]
//! enumerates every support in colexicographic order; [`rho_sampled`] draws
//! a random subset of supports and therefore only yields one-sided
//! envelopes (an upper bound on `ρ₋`, a lower bound on `ρ₊`).
//!
//! Enumeration is split into rank ranges ([`extremes_over_ranks`]) so that a
//! caller can partition the support stream across workers; the min/max
//! reduction makes the result independent of the partition.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::ops::Range;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{jacobi_extremes_in_place, DenseMatrix};
use crate::math::sqrt;
use crate::objective::Objective;

/// Default cap on the number of supports [`rho_exact`] will enumerate.
pub const DEFAULT_ENUMERATION_BUDGET: u64 = 2_000_000;

/// Slack allowed when asserting the bounds on `ε_s`.
pub const PROPOSITION_SLACK: f64 = 1e-9;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays integral at every step.
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// The `rank`-th `s`-subset of `{0, …, d−1}` in colexicographic order.
pub fn colex_unrank(mut rank: u128, s: usize, d: usize) -> Vec<usize> {
    let mut out = alloc::vec![0usize; s];
    let mut upper = d;
    for slot in (0..s).rev() {
        let k = slot + 1;
        // Largest c < upper with C(c, k) <= rank.
        let mut c = upper - 1;
        while binomial(c, k) > rank {
            c -= 1;
        }
        out[slot] = c;
        rank -= binomial(c, k);
        upper = c;
    }
    out
}

/// Advances `comb` to its colexicographic successor; false when exhausted.
pub fn colex_next(comb: &mut [usize], d: usize) -> bool {
    let s = comb.len();
    for i in 0..s {
        let limit = if i + 1 < s { comb[i + 1] } else { d };
        if comb[i] + 1 < limit {
            comb[i] += 1;
            for (k, c) in comb.iter_mut().enumerate().take(i) {
                *c = k;
            }
            return true;
        }
    }
    false
}

/// Sparse eigen-extremes over the supports with colex ranks in `ranks`,
/// read from a precomputed Gram matrix. Returns `(min λ_min, max λ_max)`,
/// or `(+∞, −∞)` for an empty range.
pub fn extremes_over_ranks(gram: &DenseMatrix, s: usize, ranks: Range<u128>) -> (f64, f64) {
    let d = gram.cols();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    if s == 0 || ranks.start >= ranks.end {
        return (lo, hi);
    }
    let mut comb = colex_unrank(ranks.start, s, d);
    let mut buf = Vec::with_capacity(s * s);
    let mut remaining = ranks.end - ranks.start;
    loop {
        gram.principal_into(&comb, &mut buf);
        let (a, b) = jacobi_extremes_in_place(&mut buf, s);
        lo = lo.min(a);
        hi = hi.max(b);
        remaining -= 1;
        if remaining == 0 || !colex_next(&mut comb, d) {
            break;
        }
    }
    (lo, hi)
}

/// Sparse eigen-extremes over an explicit list of supports.
pub fn extremes_over_supports<'a>(
    gram: &DenseMatrix,
    supports: impl IntoIterator<Item = &'a [usize]>,
) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut buf = Vec::new();
    for s in supports {
        gram.principal_into(s, &mut buf);
        let (a, b) = jacobi_extremes_in_place(&mut buf, s.len());
        lo = lo.min(a);
        hi = hi.max(b);
    }
    (lo, hi)
}

fn check_sparsity(s: usize, d: usize) -> Result<()> {
    if s == 0 || s > d {
        return Err(Error::InvalidSparsity { s, d });
    }
    Ok(())
}

/// Rejects `C(d, s) > budget`, returning the support count otherwise.
pub fn check_budget(d: usize, s: usize, budget: u64) -> Result<u128> {
    check_sparsity(s, d)?;
    let supports = binomial(d, s);
    if supports > budget as u128 {
        return Err(Error::BudgetExceeded { supports, budget });
    }
    Ok(supports)
}

/// Exact `(ρ₋(s), ρ₊(s))` of the quadratic objective by enumerating all
/// `C(d, s)` supports. `ρ₋` is clamped at zero against roundoff.
pub fn rho_exact(a: &DenseMatrix, s: usize, budget: u64) -> Result<(f64, f64)> {
    let total = check_budget(a.cols(), s, budget)?;
    let gram = a.gram();
    let (lo, hi) = extremes_over_ranks(&gram, s, 0..total);
    Ok((lo.max(0.0), hi))
}

/// How random supports are drawn by [`sample_supports`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SupportSampling {
    /// Distinct supports; when `trials ≥ C(d, s)` every support is visited.
    WithoutReplacement,
    /// Independent uniform supports.
    WithReplacement,
}

/// Draws `trials` random `s`-supports, deterministic in `seed`.
///
/// Without replacement, ranks are sampled from `[0, C(d, s))` and unranked;
/// if `C(d, s)` does not fit in `usize` the draw falls back to independent
/// supports, which for such sizes are distinct with overwhelming probability.
pub fn sample_supports(
    d: usize,
    s: usize,
    trials: usize,
    seed: u64,
    mode: SupportSampling,
) -> Result<Vec<Vec<usize>>> {
    check_sparsity(s, d)?;
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let total = binomial(d, s);
    if mode == SupportSampling::WithoutReplacement {
        if total <= trials as u128 {
            let mut out = Vec::with_capacity(total as usize);
            let mut comb: Vec<usize> = (0..s).collect();
            loop {
                out.push(comb.clone());
                if !colex_next(&mut comb, d) {
                    break;
                }
            }
            return Ok(out);
        }
        if let Ok(total) = usize::try_from(total) {
            let mut ranks = index::sample(&mut rng, total, trials).into_vec();
            ranks.sort_unstable();
            return Ok(ranks
                .into_iter()
                .map(|r| colex_unrank(r as u128, s, d))
                .collect());
        }
    }
    Ok((0..trials)
        .map(|_| {
            let mut v = index::sample(&mut rng, d, s).into_vec();
            v.sort_unstable();
            v
        })
        .collect())
}

/// One-sided envelopes from `trials` random supports (drawn without
/// replacement): an upper bound on `ρ₋(s)` and a lower bound on `ρ₊(s)`.
pub fn rho_sampled(a: &DenseMatrix, s: usize, trials: usize, seed: u64) -> Result<(f64, f64)> {
    let supports = sample_supports(
        a.cols(),
        s,
        trials,
        seed,
        SupportSampling::WithoutReplacement,
    )?;
    let gram = a.gram();
    let (lo, hi) = extremes_over_supports(&gram, supports.iter().map(Vec::as_slice));
    Ok((lo.max(0.0), hi))
}

/// Envelopes of the restricted curvature of a general objective.
///
/// Probes the three-point quantity
/// `[Q(x′) − Q(x) − ∇Q(x)ᵀ(x′ − x)] / ‖x′ − x‖²` over `trials` random pairs
/// in the box `center ± radius` that differ on exactly `s` coordinates.
/// Returns `(min, max)` observed.
pub fn rho_sampled_objective(
    obj: &dyn Objective,
    center: &[f64],
    radius: f64,
    s: usize,
    trials: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let d = obj.dimension();
    check_sparsity(s, d)?;
    if center.len() != d {
        return Err(Error::DimensionMismatch {
            what: "box center",
            expected: d,
            found: center.len(),
        });
    }
    if radius.is_nan() || radius <= 0.0 || trials == 0 {
        return Err(Error::InvalidArgument(
            "radius must be positive and trials at least 1",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for _ in 0..trials {
        let (x, xp) = sample_sparse_pair(&mut rng, center, radius, s);
        let gap = three_point_gap(obj, &x, &xp)?;
        let dist_sq: f64 = x.iter().zip(&xp).map(|(a, b)| (a - b) * (a - b)).sum();
        if dist_sq == 0.0 {
            continue;
        }
        let ratio = gap / dist_sq;
        lo = lo.min(ratio);
        hi = hi.max(ratio);
    }
    Ok((lo.max(0.0), hi))
}

/// A random pair in `center ± radius` differing on exactly `s` coordinates.
pub fn sample_sparse_pair(
    rng: &mut ChaCha8Rng,
    center: &[f64],
    radius: f64,
    s: usize,
) -> (Vec<f64>, Vec<f64>) {
    use rand::Rng;
    let x: Vec<f64> = center
        .iter()
        .map(|c| c + rng.random_range(-radius..radius))
        .collect();
    let mut xp = x.clone();
    for j in index::sample(rng, center.len(), s) {
        xp[j] = center[j] + rng.random_range(-radius..radius);
    }
    (x, xp)
}

/// `Q(x′) − Q(x) − ∇Q(x)ᵀ(x′ − x)`
pub fn three_point_gap(obj: &dyn Objective, x: &[f64], xp: &[f64]) -> Result<f64> {
    let g = obj.gradient(x)?;
    let lin: f64 = g
        .iter()
        .zip(xp.iter().zip(x))
        .map(|(gi, (a, b))| gi * (a - b))
        .sum();
    Ok(obj.value(xp)? - obj.value(x)? - lin)
}

/// Whether a constant was certified by exhaustive enumeration (or is known
/// analytically) or estimated from samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Exact,
    Sampled,
}

/// Constants at one sparsity level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RscLevel {
    pub s: usize,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub delta: f64,
    pub mode: Mode,
    pub sample_count: Option<u64>,
}

impl RscLevel {
    pub fn new(
        s: usize,
        rho_minus: f64,
        rho_plus: f64,
        mode: Mode,
        sample_count: Option<u64>,
    ) -> Self {
        Self {
            s,
            rho_minus,
            rho_plus,
            delta: restricted_isometry_constant(rho_minus, rho_plus),
            mode,
            sample_count,
        }
    }

    pub fn exact(s: usize, rho_minus: f64, rho_plus: f64) -> Self {
        Self::new(s, rho_minus, rho_plus, Mode::Exact, None)
    }
}

/// `δ = max(ρ₊ − 1, 1 − ρ₋)`, the smallest symmetric isometry constant
/// consistent with the pair.
pub fn restricted_isometry_constant(rho_minus: f64, rho_plus: f64) -> f64 {
    f64::max(rho_plus - 1.0, 1.0 - rho_minus)
}

/// Source of `ρ±(s)` for the theory checks.
pub trait RscLookup {
    fn level(&self, s: usize) -> Result<RscLevel>;

    fn rho_minus(&self, s: usize) -> Result<f64> {
        Ok(self.level(s)?.rho_minus)
    }

    fn rho_plus(&self, s: usize) -> Result<f64> {
        Ok(self.level(s)?.rho_plus)
    }
}

/// Constants per sparsity level; levels may be sparse (e.g. only `{1, 31}`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RscProfile {
    levels: BTreeMap<usize, RscLevel>,
}

impl RscProfile {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, level: RscLevel) {
        self.levels.insert(level.s, level);
    }

    pub fn with(mut self, level: RscLevel) -> Self {
        self.insert(level);
        self
    }

    pub fn levels(&self) -> impl Iterator<Item = &RscLevel> {
        self.levels.values()
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Exact profile of `A` at the listed levels, enumerated sequentially.
    pub fn exact(
        a: &DenseMatrix,
        levels: impl IntoIterator<Item = usize>,
        budget: u64,
    ) -> Result<Self> {
        let gram = a.gram();
        let mut profile = Self::new();
        for s in levels {
            let total = check_budget(a.cols(), s, budget)?;
            let (lo, hi) = extremes_over_ranks(&gram, s, 0..total);
            profile.insert(RscLevel::exact(s, lo.max(0.0), hi));
        }
        Ok(profile)
    }

    /// `ρ₋` non-increasing and `ρ₊` non-decreasing across consecutive levels.
    pub fn is_monotone(&self) -> bool {
        let levels: Vec<&RscLevel> = self.levels.values().collect();
        levels
            .windows(2)
            .all(|w| w[1].rho_minus <= w[0].rho_minus && w[1].rho_plus >= w[0].rho_plus)
    }
}

impl RscLookup for RscProfile {
    fn level(&self, s: usize) -> Result<RscLevel> {
        self.levels.get(&s).copied().ok_or(Error::MissingLevel(s))
    }
}

/// The same constants at every level; for matrices whose sparse spectrum is
/// known in closed form, or for arithmetic on hypothetical ratios.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformRsc {
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub mode: Mode,
}

impl RscLookup for UniformRsc {
    fn level(&self, s: usize) -> Result<RscLevel> {
        Ok(RscLevel::new(
            s,
            self.rho_minus,
            self.rho_plus,
            self.mode,
            None,
        ))
    }
}

/// `ε_s(x̄)`: the 2-norm of the `s` largest-magnitude entries of `∇Q(x̄)`,
/// which is the supremum of `|∇Q(x̄)ᵀu| / ‖u‖₂` over `s`-sparse `u`.
pub fn epsilon_s(obj: &dyn Objective, xbar: &[f64], s: usize) -> Result<f64> {
    check_sparsity(s, obj.dimension())?;
    let g = obj.gradient(xbar)?;
    Ok(top_s_norm(&g, s))
}

/// 2-norm of the `s` largest-magnitude entries.
pub fn top_s_norm(g: &[f64], s: usize) -> f64 {
    let mut sq: Vec<f64> = g.iter().map(|v| v * v).collect();
    sq.sort_unstable_by(|a, b| b.total_cmp(a));
    sqrt(sq.iter().take(s).sum())
}

/// `ε_s` and its three upper estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalityReport {
    pub s: usize,
    pub epsilon_s: f64,
    /// `√s · ‖∇Q(x̄)‖_∞`
    pub bound_sqrt_s_inf: f64,
    /// `‖∇Q(x̄)‖₂`
    pub bound_l2: f64,
    /// `2√(ρ₊(s) ε̄)` when a suboptimality `ε̄` is supplied.
    pub bound_suboptimality: Option<f64>,
}

/// Computes `ε_s(x̄)` and checks it against `√s‖∇Q‖_∞`, `‖∇Q‖₂` and, when
/// `epsbar` (a bound on `Q(x̄) − inf_{‖x‖₀ ≤ ‖x̄‖₀+s} Q(x)`) is given,
/// `2√(ρ₊(s) ε̄)`. Any violation beyond [`PROPOSITION_SLACK`] is an error.
pub fn proposition1_check(
    obj: &dyn Objective,
    xbar: &[f64],
    s: usize,
    rho_plus_s: f64,
    epsbar: Option<f64>,
) -> Result<OptimalityReport> {
    check_sparsity(s, obj.dimension())?;
    if epsbar.is_some() && (rho_plus_s.is_nan() || rho_plus_s <= 0.0) {
        return Err(Error::InvalidArgument("rho_plus_s must be positive"));
    }
    if epsbar.is_some_and(|e| e < 0.0) {
        return Err(Error::InvalidArgument("suboptimality must be non-negative"));
    }
    let g = obj.gradient(xbar)?;
    let report = OptimalityReport {
        s,
        epsilon_s: top_s_norm(&g, s),
        bound_sqrt_s_inf: sqrt(s as f64) * g.norm_inf(),
        bound_l2: g.norm2(),
        bound_suboptimality: epsbar.map(|e| 2.0 * sqrt(rho_plus_s * e)),
    };
    let checks = [
        (
            "epsilon_s <= sqrt(s) * |grad|_inf",
            Some(report.bound_sqrt_s_inf),
        ),
        ("epsilon_s <= |grad|_2", Some(report.bound_l2)),
        (
            "epsilon_s <= 2 sqrt(rho_plus(s) * epsbar)",
            report.bound_suboptimality,
        ),
    ];
    for (what, bound) in checks {
        if let Some(bound) = bound {
            let excess = report.epsilon_s - bound;
            if excess > PROPOSITION_SLACK {
                return Err(Error::BoundViolation { what, excess });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{symmetric_eig_extremes, SupportSet};
    use crate::objective::SensingProblem;
    use alloc::vec;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian(rows: usize, cols: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal)).unwrap()
    }

    /// Max and min of the Rayleigh quotient of a 2×2 block over a dense grid
    /// of unit directions, refined by local ternary search.
    fn rayleigh_grid_2(g: &DenseMatrix, i: usize, j: usize) -> (f64, f64) {
        let q = |t: f64| {
            let (c, s) = (libm::cos(t), libm::sin(t));
            c * c * g.get(i, i) + 2.0 * c * s * g.get(i, j) + s * s * g.get(j, j)
        };
        let n = 2000;
        let step = core::f64::consts::PI / n as f64;
        let refine = |t0: f64, sign: f64| {
            let (mut a, mut b) = (t0 - step, t0 + step);
            for _ in 0..200 {
                let m1 = a + (b - a) / 3.0;
                let m2 = b - (b - a) / 3.0;
                if sign * q(m1) < sign * q(m2) {
                    a = m1;
                } else {
                    b = m2;
                }
            }
            q(0.5 * (a + b))
        };
        let (mut tmin, mut tmax) = (0.0, 0.0);
        for k in 0..n {
            let t = k as f64 * step;
            if q(t) < q(tmin) {
                tmin = t;
            }
            if q(t) > q(tmax) {
                tmax = t;
            }
        }
        (refine(tmin, -1.0), refine(tmax, 1.0))
    }

    #[test]
    fn binomial_and_colex_roundtrip() {
        assert_eq!(binomial(64, 3), 41664);
        assert_eq!(binomial(5, 0), 1);
        assert_eq!(binomial(3, 5), 0);
        let d = 7;
        let s = 3;
        let mut comb: Vec<usize> = (0..s).collect();
        let mut rank = 0u128;
        loop {
            assert_eq!(colex_unrank(rank, s, d), comb);
            rank += 1;
            if !colex_next(&mut comb, d) {
                break;
            }
        }
        assert_eq!(rank, binomial(d, s));
    }

    #[test]
    fn identity_and_diagonal() {
        for s in 1..=5 {
            assert_eq!(
                rho_exact(&DenseMatrix::identity(5), s, DEFAULT_ENUMERATION_BUDGET).unwrap(),
                (1.0, 1.0)
            );
            assert_eq!(
                rho_sampled(&DenseMatrix::identity(5), s, 3, 0).unwrap(),
                (1.0, 1.0)
            );
        }
        let a = DenseMatrix::diagonal(&[2.0, 3.0]).unwrap();
        assert_eq!(
            rho_exact(&a, 1, DEFAULT_ENUMERATION_BUDGET).unwrap(),
            (4.0, 9.0)
        );
    }

    #[test]
    fn rho_exact_matches_rayleigh_grid_oracle() {
        let a = gaussian(8, 10, 21);
        let g = a.gram();
        let (lo, hi) = rho_exact(&a, 2, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let mut olo = f64::INFINITY;
        let mut ohi = f64::NEG_INFINITY;
        for i in 0..10 {
            for j in i + 1..10 {
                let (a, b) = rayleigh_grid_2(&g, i, j);
                olo = olo.min(a);
                ohi = ohi.max(b);
            }
        }
        assert!((lo - olo).abs() < 1e-6, "{lo} vs {olo}");
        assert!((hi - ohi).abs() < 1e-6, "{hi} vs {ohi}");
    }

    #[test]
    fn rank_ranges_partition_exactly() {
        let a = gaussian(6, 9, 4);
        let g = a.gram();
        let total = binomial(9, 3);
        let whole = extremes_over_ranks(&g, 3, 0..total);
        let cuts = [0, 7, 40, 41, total];
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for w in cuts.windows(2) {
            let (a, b) = extremes_over_ranks(&g, 3, w[0]..w[1]);
            lo = lo.min(a);
            hi = hi.max(b);
        }
        assert_eq!(whole, (lo, hi));
    }

    #[test]
    fn exhaustive_sampling_equals_exact() {
        let a = gaussian(5, 8, 6);
        let total = binomial(8, 3) as usize;
        assert_eq!(
            rho_sampled(&a, 3, total, 99).unwrap(),
            rho_exact(&a, 3, DEFAULT_ENUMERATION_BUDGET).unwrap()
        );
        let supports =
            sample_supports(8, 3, total, 1, SupportSampling::WithoutReplacement).unwrap();
        let mut dedup = supports.clone();
        dedup.dedup();
        assert_eq!(dedup.len(), total);
    }

    #[test]
    fn sampled_envelope_brackets_exact() {
        let a = gaussian(20, 64, 2);
        let (lo, hi) = rho_exact(&a, 3, DEFAULT_ENUMERATION_BUDGET).unwrap();
        let (slo, shi) = rho_sampled(&a, 3, 5000, 2).unwrap();
        assert!(lo <= slo && slo <= shi && shi <= hi);
    }

    #[test]
    fn budget_is_enforced() {
        let a = DenseMatrix::identity(40);
        assert!(matches!(
            rho_exact(&a, 20, DEFAULT_ENUMERATION_BUDGET),
            Err(Error::BudgetExceeded { .. })
        ));
        assert!(matches!(
            rho_exact(&a, 0, 10),
            Err(Error::InvalidSparsity { .. })
        ));
        assert!(matches!(
            rho_exact(&a, 41, 10),
            Err(Error::InvalidSparsity { .. })
        ));
    }

    #[test]
    fn profile_monotone_and_sandwich() {
        let a = gaussian(8, 10, 3);
        let profile = RscProfile::exact(&a, 1..=4, DEFAULT_ENUMERATION_BUDGET).unwrap();
        assert!(profile.is_monotone());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for level in profile.levels() {
            for _ in 0..1000 {
                let idx = index::sample(&mut rng, 10, level.s);
                let mut dx = vec![0.0; 10];
                for j in idx {
                    dx[j] = rng.sample(StandardNormal);
                }
                let adx = a.mul_vec(&dx).unwrap().norm_sq();
                let nn: f64 = dx.iter().map(|v| v * v).sum();
                assert!(level.rho_minus * nn - 1e-9 <= adx);
                assert!(adx <= level.rho_plus * nn + 1e-9);
            }
            assert_eq!(
                level.delta,
                f64::max(level.rho_plus - 1.0, 1.0 - level.rho_minus)
            );
        }
    }

    #[test]
    fn per_support_extremes_match_linalg() {
        let a = gaussian(7, 6, 10);
        let g = a.gram();
        let s = SupportSet::new([0, 2, 5], 6).unwrap();
        let mut buf = Vec::new();
        g.principal_into(s.as_slice(), &mut buf);
        let direct = symmetric_eig_extremes(&a.restricted_gram(&s)).unwrap();
        let (lo, hi) = jacobi_extremes_in_place(&mut buf, 3);
        assert!((lo - direct.0).abs() < 1e-12 && (hi - direct.1).abs() < 1e-12);
    }

    fn problem_with_gradient(g: &[f64]) -> (SensingProblem, Vec<f64>) {
        // Identity sensing: ∇Q(0) = −2y, so y = −g/2 yields gradient g at 0.
        let y: Vec<f64> = g.iter().map(|v| -0.5 * v).collect();
        (
            SensingProblem::new(DenseMatrix::identity(g.len()), y.into()).unwrap(),
            vec![0.0; g.len()],
        )
    }

    #[test]
    fn epsilon_examples() {
        let (p, x) = problem_with_gradient(&[0.0, 0.0, 0.0]);
        assert_eq!(epsilon_s(&p, &x, 2).unwrap(), 0.0);
        let (p, x) = problem_with_gradient(&[3.0, -4.0, 0.0]);
        assert_eq!(epsilon_s(&p, &x, 2).unwrap(), 5.0);
        let (p, x) = problem_with_gradient(&[1.0, 1.0, 1.0, 1.0]);
        let r = proposition1_check(&p, &x, 4, 1.0, None).unwrap();
        assert_eq!(
            (r.epsilon_s, r.bound_sqrt_s_inf, r.bound_l2),
            (2.0, 2.0, 2.0)
        );
    }

    #[test]
    fn epsilon_dominates_random_probes() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let g: Vec<f64> = (0..12).map(|_| rng.sample(StandardNormal)).collect();
        let (p, x) = problem_with_gradient(&g);
        let eps = epsilon_s(&p, &x, 3).unwrap();
        let mut best: f64 = 0.0;
        for _ in 0..100_000 {
            let mut dot = 0.0;
            let mut nn = 0.0;
            for j in index::sample(&mut rng, 12, 3) {
                let u: f64 = rng.sample(StandardNormal);
                dot += g[j] * u;
                nn += u * u;
            }
            let v = libm::fabs(dot) / sqrt(nn);
            assert!(v <= eps + 1e-12);
            best = best.max(v);
        }
        assert!(eps - best < 1e-3, "closed form {eps} vs best probe {best}");
    }

    #[test]
    fn epsilon_monotone_and_full_is_l2() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let g: Vec<f64> = (0..9).map(|_| rng.sample(StandardNormal)).collect();
        let (p, x) = problem_with_gradient(&g);
        let eps: Vec<f64> = (1..=9).map(|s| epsilon_s(&p, &x, s).unwrap()).collect();
        assert!(eps.windows(2).all(|w| w[0] <= w[1]));
        assert!((eps[8] - p.gradient(&x).unwrap().norm2()).abs() < 1e-15);
    }

    #[test]
    fn proposition1_flags_bogus_suboptimality() {
        let (p, x) = problem_with_gradient(&[3.0, -4.0, 0.0]);
        assert!(matches!(
            proposition1_check(&p, &x, 2, 1.0, Some(0.0)),
            Err(Error::BoundViolation { .. })
        ));
    }
}
