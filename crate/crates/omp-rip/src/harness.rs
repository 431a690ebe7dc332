//! Instance generation, single trials and phase-transition sweeps.
//!
//! Randomness comes from ChaCha8 seeded with `seed_from_u64`. Within one
//! trial seed the matrix, signal and noise use streams 0, 1 and 2, so each
//! component is reproducible on its own. Sweep trial `t` uses seed
//! `base_seed + t` in every cell.

use std::fmt;
use std::str::FromStr;

use omp_rip_core::linalg::{distance, dot};
use omp_rip_core::rsc::{binomial, check_budget, colex_next, colex_unrank};
use omp_rip_core::{
    omp_run, DenseMatrix, DenseVector, Objective, OmpConfig, SensingProblem, TargetSignal,
};
use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{AppError, AppResult};
use crate::formats::fmt_f64;

const MATRIX_STREAM: u64 = 0;
const SIGNAL_STREAM: u64 = 1;
const NOISE_STREAM: u64 = 2;

/// Relative error below which a noiseless trial counts as exact recovery.
pub const NOISELESS_SUCCESS_TOL: f64 = 1e-6;

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Magnitudes of the nonzero coefficients.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SignalProfile {
    /// All `±1`.
    Flat,
    /// The `i`-th largest magnitude (from `i = 0`) is `rate^i`.
    Decay(f64),
}

impl fmt::Display for SignalProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SignalProfile::Flat => write!(f, "flat"),
            SignalProfile::Decay(r) => write!(f, "decay:{r}"),
        }
    }
}

impl FromStr for SignalProfile {
    type Err = String;

    /// `flat`, or `decay:RATE` with `RATE > 0`.
    fn from_str(s: &str) -> Result<Self, String> {
        if s == "flat" {
            return Ok(SignalProfile::Flat);
        }
        let rate = s
            .strip_prefix("decay:")
            .or_else(|| s.strip_prefix("decay(").and_then(|r| r.strip_suffix(')')))
            .ok_or_else(|| format!("unknown profile {s:?}; expected flat or decay:RATE"))?;
        let r: f64 = rate
            .parse()
            .map_err(|_| format!("bad decay rate {rate:?}"))?;
        if !(r.is_finite() && r > 0.0) {
            return Err(format!("decay rate must be positive, got {r}"));
        }
        Ok(SignalProfile::Decay(r))
    }
}

/// How the sensing matrix is built.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Sensing {
    /// I.i.d. `N(0, 1/n)` entries.
    Gaussian,
    /// `[I_d; 0]`, requiring `n ≥ d`.
    Identity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialSpec {
    pub n: usize,
    pub d: usize,
    pub kbar: usize,
    pub signal_profile: SignalProfile,
    /// 2-norm of the additive noise.
    pub noise_level: f64,
    pub k0: usize,
    pub seed: u64,
    pub normalize_columns: bool,
    pub sensing: Sensing,
}

impl TrialSpec {
    pub fn validate(&self) -> AppResult<()> {
        if self.n == 0 || self.d == 0 {
            return Err(AppError::input("n and d must be at least 1"));
        }
        if self.kbar > self.d {
            return Err(AppError::input(format!(
                "kbar = {} exceeds d = {}",
                self.kbar, self.d
            )));
        }
        if !(self.noise_level.is_finite() && self.noise_level >= 0.0) {
            return Err(AppError::input(
                "noise level must be finite and non-negative",
            ));
        }
        if self.sensing == Sensing::Identity && self.n < self.d {
            return Err(AppError::input(format!(
                "identity sensing needs n >= d, got n = {} < d = {}",
                self.n, self.d
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub spec: TrialSpec,
    pub l2_error: f64,
    pub signal_norm: f64,
    /// The `k̄` largest entries of the output sit exactly on `supp(x̄)`.
    pub support_recovered_topk: bool,
    pub objective_gap: f64,
    pub iterations_run: usize,
}

/// `n×d` matrix with i.i.d. `N(0, 1/n)` entries, optionally rescaled to unit
/// column norms.
pub fn gen_gaussian_matrix(n: usize, d: usize, seed: u64, normalize_columns: bool) -> DenseMatrix {
    let mut rng = rng_for(seed, MATRIX_STREAM);
    let scale = 1.0 / (n as f64).sqrt();
    let mut data: Vec<f64> = (0..n * d)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    if normalize_columns {
        for j in 0..d {
            let norm = (0..n)
                .map(|i| data[i * d + j] * data[i * d + j])
                .sum::<f64>()
                .sqrt();
            if norm > 0.0 {
                for i in 0..n {
                    data[i * d + j] /= norm;
                }
            }
        }
    }
    DenseMatrix::new(n, d, data).expect("finite Gaussian draws")
}

/// `[I_d; 0]` of size `n×d`.
pub fn identity_sensing(n: usize, d: usize) -> DenseMatrix {
    DenseMatrix::from_fn(n, d, |i, j| if i == j { 1.0 } else { 0.0 }).expect("finite")
}

/// Uniformly random `d×d` orthogonal matrix (Gram-Schmidt on Gaussian
/// columns, re-orthogonalized once).
pub fn gen_orthogonal(d: usize, seed: u64) -> DenseMatrix {
    let mut rng = rng_for(seed, MATRIX_STREAM);
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    while cols.len() < d {
        let mut v: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        for _ in 0..2 {
            for q in &cols {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(vi, qi)| *vi -= c * qi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-8 {
            cols.push(v.into_iter().map(|x| x / norm).collect());
        }
    }
    DenseMatrix::from_fn(d, d, |i, j| cols[j][i]).expect("finite")
}

/// Signal with `kbar` nonzeros on a uniformly random support.
pub fn gen_sparse_signal(
    d: usize,
    kbar: usize,
    profile: SignalProfile,
    seed: u64,
) -> AppResult<TargetSignal> {
    if kbar > d {
        return Err(AppError::input(format!("kbar = {kbar} exceeds d = {d}")));
    }
    let mut rng = rng_for(seed, SIGNAL_STREAM);
    let mut x = vec![0.0; d];
    let picks = index::sample(&mut rng, d, kbar).into_vec();
    for (rank, j) in picks.into_iter().enumerate() {
        let magnitude = match profile {
            SignalProfile::Flat => 1.0,
            SignalProfile::Decay(r) => r.powi(rank as i32),
        };
        x[j] = if rng.random_bool(0.5) {
            magnitude
        } else {
            -magnitude
        };
    }
    Ok(TargetSignal::new(DenseVector::new(x)?))
}

/// Noise of 2-norm exactly `level` in a uniformly random direction.
pub fn gen_noise(n: usize, level: f64, seed: u64) -> Vec<f64> {
    if level == 0.0 {
        return vec![0.0; n];
    }
    let mut rng = rng_for(seed, NOISE_STREAM);
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let norm = dot(&v, &v).sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| level * x / norm).collect();
        }
    }
}

/// Whether the `k` largest-magnitude entries of `x` (lowest index on ties)
/// are exactly `support`.
pub fn top_k_matches(x: &[f64], support: &[usize]) -> bool {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].abs().total_cmp(&x[a].abs()).then(a.cmp(&b)));
    let mut top: Vec<usize> = order.into_iter().take(support.len()).collect();
    top.sort_unstable();
    top == support
}

pub fn sensing_matrix(spec: &TrialSpec) -> DenseMatrix {
    match spec.sensing {
        Sensing::Gaussian => gen_gaussian_matrix(spec.n, spec.d, spec.seed, spec.normalize_columns),
        Sensing::Identity => identity_sensing(spec.n, spec.d),
    }
}

/// Builds `y = Ax̄ + noise` and runs the greedy solver from `F⁰ = ∅`.
pub fn run_trial(spec: &TrialSpec) -> AppResult<TrialRecord> {
    spec.validate()?;
    let a = sensing_matrix(spec);
    let target = gen_sparse_signal(spec.d, spec.kbar, spec.signal_profile, spec.seed)?;
    let mut y = a.mul_vec(target.xbar())?;
    for (yi, ni) in y
        .iter_mut()
        .zip(gen_noise(spec.n, spec.noise_level, spec.seed))
    {
        *yi += ni;
    }
    let p = SensingProblem::new(a, y)?;
    let r = omp_run(&p, &OmpConfig::new(spec.k0)).map_err(AppError::Solver)?;
    let x = r.final_iterate();
    Ok(TrialRecord {
        spec: spec.clone(),
        l2_error: distance(x, target.xbar()),
        signal_norm: target.xbar().norm2(),
        support_recovered_topk: top_k_matches(x, target.support().as_slice()),
        objective_gap: r.final_objective() - p.value(target.xbar())?,
        iterations_run: r.iterations(),
    })
}

/// Iteration budget per cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
pub enum K0Rule {
    /// `k₀ = k̄`
    #[serde(rename = "exact_k")]
    #[value(name = "exact_k", alias = "exact-k")]
    ExactK,
    /// `k₀ = 30k̄`
    #[serde(rename = "30k")]
    #[value(name = "30k")]
    ThirtyK,
}

impl K0Rule {
    pub fn k0(self, kbar: usize) -> usize {
        match self {
            K0Rule::ExactK => kbar,
            K0Rule::ThirtyK => 30 * kbar,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub d: usize,
    pub kbars: Vec<usize>,
    pub n_grid: Vec<usize>,
    pub trials_per_cell: usize,
    pub k0_rule: K0Rule,
    pub signal_profile: SignalProfile,
    pub noise_level: f64,
    pub seed: u64,
    pub normalize_columns: bool,
    pub sensing: Sensing,
}

impl SweepConfig {
    pub fn validate(&self) -> AppResult<()> {
        if self.kbars.is_empty() || self.n_grid.is_empty() {
            return Err(AppError::input("kbar and n grids must be nonempty"));
        }
        if self.trials_per_cell == 0 {
            return Err(AppError::input("trials per cell must be at least 1"));
        }
        for &kbar in &self.kbars {
            for &n in &self.n_grid {
                self.trial(kbar, n, 0).validate()?;
            }
        }
        Ok(())
    }

    pub fn trial(&self, kbar: usize, n: usize, t: usize) -> TrialSpec {
        TrialSpec {
            n,
            d: self.d,
            kbar,
            signal_profile: self.signal_profile,
            noise_level: self.noise_level,
            k0: self.k0_rule.k0(kbar),
            seed: self.seed.wrapping_add(t as u64),
            normalize_columns: self.normalize_columns,
            sensing: self.sensing,
        }
    }

    /// Noiseless: relative error at most [`NOISELESS_SUCCESS_TOL`].
    /// Noisy: error at most `2√6 · noise_level`, the noise-level bound with
    /// unit restricted constants.
    pub fn is_success(&self, r: &TrialRecord) -> bool {
        if self.noise_level == 0.0 {
            r.l2_error <= NOISELESS_SUCCESS_TOL * r.signal_norm
        } else {
            r.l2_error <= 2.0 * 6f64.sqrt() * self.noise_level
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub kbar: usize,
    pub n: usize,
    pub trials: usize,
    pub successes: usize,
    pub success_rate: f64,
    pub mean_l2_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseTable {
    pub cells: Vec<PhaseCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub config: SweepConfig,
    /// Smallest `n` with success rate at least one half, per `k̄`.
    pub n50: std::collections::BTreeMap<usize, Option<usize>>,
}

impl PhaseTable {
    pub const CSV_HEADER: [&'static str; 6] = [
        "kbar",
        "n",
        "trials",
        "successes",
        "success_rate",
        "mean_l2_error",
    ];

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(Self::CSV_HEADER).expect("in-memory write");
        for c in &self.cells {
            w.write_record([
                c.kbar.to_string(),
                c.n.to_string(),
                c.trials.to_string(),
                c.successes.to_string(),
                fmt_f64(c.success_rate),
                fmt_f64(c.mean_l2_error),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }

    /// Smallest `n` in the grid with success rate `≥ 0.5` at this `k̄`.
    pub fn n50(&self, kbar: usize) -> Option<usize> {
        self.cells
            .iter()
            .filter(|c| c.kbar == kbar && c.success_rate >= 0.5)
            .map(|c| c.n)
            .min()
    }

    pub fn summary(&self, config: &SweepConfig) -> SweepSummary {
        SweepSummary {
            config: config.clone(),
            n50: config.kbars.iter().map(|&k| (k, self.n50(k))).collect(),
        }
    }
}

/// Runs every `(k̄, n)` cell on the current rayon pool. Cells appear in the
/// order `kbars × n_grid` as given.
pub fn phase_sweep(cfg: &SweepConfig) -> AppResult<PhaseTable> {
    cfg.validate()?;
    let cells: Vec<(usize, usize)> = cfg
        .kbars
        .iter()
        .flat_map(|&k| cfg.n_grid.iter().map(move |&n| (k, n)))
        .collect();
    let trials = cfg.trials_per_cell;
    let records: Vec<AppResult<TrialRecord>> = (0..cells.len() * trials)
        .into_par_iter()
        .map(|i| {
            let (kbar, n) = cells[i / trials];
            run_trial(&cfg.trial(kbar, n, i % trials))
        })
        .collect();
    let mut out = Vec::with_capacity(cells.len());
    let mut it = records.into_iter();
    for &(kbar, n) in &cells {
        let mut successes = 0;
        let mut err_sum = 0.0;
        for _ in 0..trials {
            let r = it.next().expect("one record per trial")?;
            successes += usize::from(cfg.is_success(&r));
            err_sum += r.l2_error;
        }
        out.push(PhaseCell {
            kbar,
            n,
            trials,
            successes,
            success_rate: successes as f64 / trials as f64,
            mean_l2_error: err_sum / trials as f64,
        });
    }
    Ok(PhaseTable { cells: out })
}

const PREFIXES_PER_CHUNK: u128 = 4096;

/// Every `k`-support `T` whose least-squares fit leaves
/// `‖y − P_T y‖² ≤ tol·‖y‖²`, sorted. Supports with numerically
/// dependent columns are skipped. `x̄` is the unique `k`-sparse preimage of
/// `y = Ax̄` exactly when the result is `[supp(x̄)]`.
///
/// Each `(k−1)`-prefix is factored once and every extension is scored by a
/// rank-one residual update, so the cost is `O(k²)` per support. The update
/// cancels to about `1e-16·‖y‖²`, so `tol` should sit well above that.
pub fn sparse_preimages(
    a: &DenseMatrix,
    y: &[f64],
    k: usize,
    tol: f64,
    budget: u64,
) -> AppResult<Vec<Vec<usize>>> {
    let d = a.cols();
    if y.len() != a.rows() {
        return Err(AppError::input(format!(
            "observation has {} entries, matrix has {} rows",
            y.len(),
            a.rows()
        )));
    }
    check_budget(d, k, budget)?;
    if k == 0 {
        return Ok(if dot(y, y) == 0.0 {
            vec![vec![]]
        } else {
            vec![]
        });
    }
    let g = a.gram();
    let b = a.tr_mul_vec(y)?.into_vec();
    let yy = dot(y, y);
    let p = k - 1;
    let prefixes = binomial(d, p);
    let chunks = prefixes.div_ceil(PREFIXES_PER_CHUNK) as u64;
    let found: Vec<Vec<Vec<usize>>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c as u128 * PREFIXES_PER_CHUNK;
            let end = (start + PREFIXES_PER_CHUNK).min(prefixes);
            let mut hits = Vec::new();
            let mut prefix = colex_unrank(start, p, d);
            let mut l = vec![0.0; p * p];
            let mut z = vec![0.0; p];
            let mut w = vec![0.0; p];
            for _ in start..end {
                if factor_prefix(&g, &b, &prefix, &mut l, &mut z) {
                    let resid = yy - dot(&z, &z);
                    let first = prefix.last().map_or(0, |&m| m + 1);
                    for (j, &bj) in b.iter().enumerate().skip(first) {
                        // w = L⁻¹ G[P, j]
                        for r in 0..p {
                            let mut v = g.get(prefix[r], j);
                            for c in 0..r {
                                v -= l[r * p + c] * w[c];
                            }
                            w[r] = v / l[r * p + r];
                        }
                        let gjj = g.get(j, j);
                        let den = gjj - dot(&w, &w);
                        if den <= 1e-12 * gjj {
                            continue;
                        }
                        let num = bj - dot(&w, &z);
                        if resid - num * num / den <= tol * yy {
                            let mut t = prefix.clone();
                            t.push(j);
                            hits.push(t);
                        }
                    }
                }
                colex_next(&mut prefix, d);
            }
            hits
        })
        .collect();
    let mut found: Vec<Vec<usize>> = found.into_iter().flatten().collect();
    found.sort_unstable();
    Ok(found)
}

/// Cholesky `G[P, P] = LLᵀ` and `z = L⁻¹ b[P]`; false if the prefix columns
/// are numerically dependent.
fn factor_prefix(
    g: &DenseMatrix,
    b: &[f64],
    prefix: &[usize],
    l: &mut [f64],
    z: &mut [f64],
) -> bool {
    let p = prefix.len();
    for r in 0..p {
        for c in 0..=r {
            let mut v = g.get(prefix[r], prefix[c]);
            for m in 0..c {
                v -= l[r * p + m] * l[c * p + m];
            }
            if r == c {
                if v <= 1e-12 * g.get(prefix[r], prefix[r]) {
                    return false;
                }
                l[r * p + r] = v.sqrt();
            } else {
                l[r * p + c] = v / l[c * p + c];
            }
        }
        let mut v = b[prefix[r]];
        for m in 0..r {
            v -= l[r * p + m] * z[m];
        }
        z[r] = v / l[r * p + r];
    }
    true
}
