//! Multi-threaded certification. Work is split into fixed rank ranges that do
//! not depend on the worker count, and min/max reductions are exact, so the
//! output is identical for any number of jobs.

use omp_rip_core::rsc::{
    binomial, check_budget, extremes_over_ranks, rho_sampled, DEFAULT_ENUMERATION_BUDGET,
};
use omp_rip_core::{DenseMatrix, Mode, RscLevel, RscProfile};
use rayon::prelude::*;

use crate::error::{AppError, AppResult};

/// Supports handled per task.
const RANKS_PER_CHUNK: u128 = 4096;

/// Environment variable overriding the enumeration budget.
pub const BUDGET_ENV: &str = "OMP_RIP_BUDGET";

/// Enumeration budget from [`BUDGET_ENV`], or the library default.
pub fn enumeration_budget() -> AppResult<u64> {
    match std::env::var(BUDGET_ENV) {
        Ok(v) => v.trim().parse().map_err(|_| {
            AppError::input(format!(
                "{BUDGET_ENV} must be a non-negative integer, got {v:?}"
            ))
        }),
        Err(_) => Ok(DEFAULT_ENUMERATION_BUDGET),
    }
}

/// Runs `f` on a pool of `jobs` threads (`0` picks the rayon default).
pub fn with_jobs<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> AppResult<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| AppError::input(format!("cannot start {jobs} workers: {e}")))?;
    Ok(pool.install(f))
}

fn extremes_par(gram: &DenseMatrix, s: usize, total: u128) -> (f64, f64) {
    let chunks = total.div_ceil(RANKS_PER_CHUNK) as u64;
    (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c as u128 * RANKS_PER_CHUNK;
            let end = (start + RANKS_PER_CHUNK).min(total);
            extremes_over_ranks(gram, s, start..end)
        })
        .reduce(
            || (f64::INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.min(b.0), a.1.max(b.1)),
        )
}

/// Exact `(ρ₋(s), ρ₊(s))`, enumerated in parallel on the current pool.
pub fn rho_exact_par(a: &DenseMatrix, s: usize, budget: u64) -> AppResult<(f64, f64)> {
    let total = check_budget(a.cols(), s, budget)?;
    let (lo, hi) = extremes_par(&a.gram(), s, total);
    Ok((lo.max(0.0), hi))
}

/// Exact profile at every listed level. All budgets are checked before any
/// enumeration starts.
pub fn profile_exact_par(a: &DenseMatrix, levels: &[usize], budget: u64) -> AppResult<RscProfile> {
    let totals = levels
        .iter()
        .map(|&s| check_budget(a.cols(), s, budget))
        .collect::<Result<Vec<_>, _>>()?;
    let gram = a.gram();
    let mut profile = RscProfile::new();
    for (&s, &total) in levels.iter().zip(&totals) {
        let (lo, hi) = extremes_par(&gram, s, total);
        profile.insert(RscLevel::exact(s, lo.max(0.0), hi));
    }
    Ok(profile)
}

/// Sampled profile: level `s` draws `trials` distinct supports with seed
/// `seed + s`. A level with at most `trials` supports is enumerated in full
/// and reported as exact.
pub fn profile_sampled_par(
    a: &DenseMatrix,
    levels: &[usize],
    trials: usize,
    seed: u64,
) -> AppResult<RscProfile> {
    let d = a.cols();
    let computed = levels
        .par_iter()
        .map(|&s| -> AppResult<RscLevel> {
            let (lo, hi) = rho_sampled(a, s, trials, seed.wrapping_add(s as u64))?;
            let total = binomial(d, s);
            Ok(if total <= trials as u128 {
                RscLevel::new(s, lo, hi, Mode::Exact, Some(total as u64))
            } else {
                RscLevel::new(s, lo, hi, Mode::Sampled, Some(trials as u64))
            })
        })
        .collect::<Vec<_>>();
    let mut profile = RscProfile::new();
    for level in computed {
        profile.insert(level?);
    }
    Ok(profile)
}

#[cfg(test)]
mod tests {
    use super::*;
    use omp_rip_core::rsc::rho_exact;
    use omp_rip_core::RscLookup;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(n: usize, d: usize, seed: u64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        DenseMatrix::from_fn(n, d, |_, _| rng.random_range(-1.0..1.0)).unwrap()
    }

    #[test]
    fn parallel_matches_sequential_for_any_job_count() {
        let a = random_matrix(9, 16, 5);
        for s in [1, 3, 6] {
            let seq = rho_exact(&a, s, 1 << 20).unwrap();
            for jobs in [1, 3, 8] {
                let par = with_jobs(jobs, || rho_exact_par(&a, s, 1 << 20))
                    .unwrap()
                    .unwrap();
                assert_eq!(seq, par);
            }
        }
    }

    #[test]
    fn budget_is_checked_up_front() {
        let a = random_matrix(4, 20, 1);
        let err = profile_exact_par(&a, &[1, 10], 1000).unwrap_err();
        assert_eq!(err.exit_code(), crate::error::EXIT_BUDGET);
    }

    #[test]
    fn small_sampled_levels_become_exact() {
        let a = random_matrix(6, 8, 2);
        let p = with_jobs(2, || profile_sampled_par(&a, &[1, 4, 8], 60, 0))
            .unwrap()
            .unwrap();
        assert_eq!(p.level(1).unwrap().mode, Mode::Exact);
        assert_eq!(p.level(4).unwrap().mode, Mode::Sampled);
        assert_eq!(p.level(8).unwrap().mode, Mode::Exact);
        let exact = rho_exact(&a, 1, 100).unwrap();
        assert_eq!(
            (p.level(1).unwrap().rho_minus, p.level(1).unwrap().rho_plus),
            exact
        );
    }
}
