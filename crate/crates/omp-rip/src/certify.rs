//! Per-level restricted constants of a sensing matrix, with the `31k̄`
//! verdict for every `k̄` the profile can evaluate.

use omp_rip_core::theory::{corollary1_check, COROLLARY_LEVEL_FACTOR};
use omp_rip_core::{DenseMatrix, Mode, RscLevel, RscLookup, RscProfile};
use serde::Serialize;

use crate::error::{AppError, AppResult};
use crate::formats::fmt_f64;
use crate::parallel::{profile_exact_par, profile_sampled_par};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum CertifyMode {
    Exact,
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Corollary1Row {
    pub kbar: usize,
    pub rho_plus_kbar: f64,
    pub rho_minus_31kbar: f64,
    pub holds: bool,
    pub k0: usize,
    pub s: usize,
    /// Both constants are exact.
    pub certified: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CertifyReport {
    pub n: usize,
    pub d: usize,
    pub s_max: usize,
    pub mode: CertifyMode,
    pub levels: Vec<RscLevel>,
    pub corollary1: Vec<Corollary1Row>,
    /// Set when no `k̄` has `31k̄ ≤ s_max`.
    pub corollary1_note: Option<String>,
}

/// Constants for `s = 1..=s_max` on the current rayon pool. `seed` is
/// required in sampled mode.
pub fn certify(
    a: &DenseMatrix,
    s_max: usize,
    mode: CertifyMode,
    trials: usize,
    seed: Option<u64>,
    budget: u64,
) -> AppResult<CertifyReport> {
    let d = a.cols();
    if s_max == 0 || s_max > d {
        return Err(AppError::input(format!(
            "s_max must be in 1..={d}, got {s_max}"
        )));
    }
    let levels: Vec<usize> = (1..=s_max).collect();
    let profile: RscProfile = match mode {
        CertifyMode::Exact => profile_exact_par(a, &levels, budget)?,
        CertifyMode::Sampled => {
            let seed = seed.ok_or_else(|| AppError::input("sampled mode requires --seed"))?;
            if trials == 0 {
                return Err(AppError::input("trials must be at least 1"));
            }
            profile_sampled_par(a, &levels, trials, seed)?
        }
    };
    let mut corollary1 = Vec::new();
    for kbar in (1..).take_while(|k| COROLLARY_LEVEL_FACTOR * k <= s_max) {
        let hi = profile.level(kbar)?;
        let lo = profile.level(COROLLARY_LEVEL_FACTOR * kbar)?;
        let v = corollary1_check(hi.rho_plus, lo.rho_minus, kbar);
        corollary1.push(Corollary1Row {
            kbar,
            rho_plus_kbar: hi.rho_plus,
            rho_minus_31kbar: lo.rho_minus,
            holds: v.holds,
            k0: v.k0,
            s: v.s,
            certified: hi.mode == Mode::Exact && lo.mode == Mode::Exact,
        });
    }
    let corollary1_note = corollary1
        .is_empty()
        .then(|| format!("not evaluable: needs s_max >= {COROLLARY_LEVEL_FACTOR}"));
    Ok(CertifyReport {
        n: a.rows(),
        d,
        s_max,
        mode,
        levels: profile.levels().copied().collect(),
        corollary1,
        corollary1_note,
    })
}

impl CertifyReport {
    /// One row per level: `s,rho_minus,rho_plus,delta,mode,sample_count`.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "s",
            "rho_minus",
            "rho_plus",
            "delta",
            "mode",
            "sample_count",
        ])
        .expect("in-memory write");
        for l in &self.levels {
            let mode = match l.mode {
                Mode::Exact => "exact",
                Mode::Sampled => "sampled",
            };
            w.write_record([
                l.s.to_string(),
                fmt_f64(l.rho_minus),
                fmt_f64(l.rho_plus),
                fmt_f64(l.delta),
                mode.to_string(),
                l.sample_count.map(|c| c.to_string()).unwrap_or_default(),
            ])
            .expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use omp_rip_core::rsc::rho_exact;

    #[test]
    fn identity_levels_are_unit() {
        let r = certify(
            &DenseMatrix::identity(8),
            4,
            CertifyMode::Exact,
            0,
            None,
            1000,
        )
        .unwrap();
        assert_eq!(r.levels.len(), 4);
        for l in &r.levels {
            assert_eq!((l.rho_minus, l.rho_plus, l.delta), (1.0, 1.0, 0.0));
        }
        assert!(r.corollary1.is_empty());
        assert!(r.corollary1_note.is_some());
    }

    #[test]
    fn identity_32_sampled_certifies_kbar_one() {
        let r = certify(
            &DenseMatrix::identity(32),
            32,
            CertifyMode::Sampled,
            500,
            Some(1),
            1000,
        )
        .unwrap();
        assert_eq!(r.corollary1.len(), 1);
        let row = &r.corollary1[0];
        assert!(row.holds && row.certified);
        assert_eq!((row.k0, row.s), (30, 31));
    }

    #[test]
    fn matches_direct_enumeration() {
        let a = crate::harness::gen_gaussian_matrix(8, 10, 21, false);
        let r = certify(&a, 2, CertifyMode::Exact, 0, None, 1000).unwrap();
        for l in &r.levels {
            assert_eq!((l.rho_minus, l.rho_plus), rho_exact(&a, l.s, 1000).unwrap());
        }
        let csv = r.to_csv();
        assert!(csv.starts_with("s,rho_minus,rho_plus,delta,mode,sample_count\n1,"));
    }

    #[test]
    fn errors() {
        let a = DenseMatrix::identity(30);
        assert_eq!(
            certify(&a, 15, CertifyMode::Exact, 0, None, 1000)
                .unwrap_err()
                .exit_code(),
            3
        );
        assert_eq!(
            certify(&a, 31, CertifyMode::Exact, 0, None, 1000)
                .unwrap_err()
                .exit_code(),
            2
        );
        assert_eq!(
            certify(&a, 3, CertifyMode::Sampled, 10, None, 1000)
                .unwrap_err()
                .exit_code(),
            2
        );
    }
}
