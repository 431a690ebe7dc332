use omp_rip_core::linalg::{dot, norm2, restricted_least_squares, symmetric_eig_extremes};
use omp_rip_core::rsc::{binomial, colex_next, colex_unrank, epsilon_s, top_s_norm, RscProfile};
use omp_rip_core::theory::{lemma1_oracle, lemma2_oracle, lemma3_oracle, BOUND_SLACK};
use omp_rip_core::{
    omp_run, DenseMatrix, Objective, OmpConfig, SensingProblem, SupportSet, TargetSignal,
};
use proptest::prelude::*;

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = DenseMatrix> {
    prop::collection::vec(-2.0f64..2.0, rows * cols)
        .prop_map(move |v| DenseMatrix::new(rows, cols, v).unwrap())
}

fn instance() -> impl Strategy<Value = (DenseMatrix, Vec<f64>)> {
    (2usize..8, 2usize..10)
        .prop_flat_map(|(n, d)| (matrix(n, d), prop::collection::vec(-3.0f64..3.0, n)))
}

fn sparse_target(d: usize, max_k: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::btree_map(0..d, 0.2f64..2.0, 1..=max_k).prop_map(move |m| {
        let mut x = vec![0.0; d];
        for (i, v) in m {
            x[i] = if i % 2 == 0 { v } else { -v };
        }
        x
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn restricted_minimizer_is_on_support_and_stationary(
        (a, y) in instance(),
        mask in prop::collection::vec(any::<bool>(), 10),
    ) {
        let d = a.cols();
        let f = SupportSet::new((0..d).filter(|&j| mask[j]), d).unwrap();
        let p = SensingProblem::new(a.clone(), y.clone().into()).unwrap();
        let x = restricted_least_squares(&a, &y, &f).unwrap();
        let g = p.gradient(&x).unwrap();
        for j in 0..d {
            if f.contains(j) {
                prop_assert!(g[j].abs() <= p.tol_opt());
            } else {
                prop_assert_eq!(x[j], 0.0);
            }
        }
    }

    #[test]
    fn omp_trace_invariants((a, y) in instance(), k0 in 0usize..6) {
        let p = SensingProblem::new(a, y.into()).unwrap();
        let r = omp_run(&p, &OmpConfig::new(k0)).unwrap();
        prop_assert!(r.iterations() <= k0);
        prop_assert_eq!(r.iterates.len(), r.iterations() + 1);
        for k in 1..=r.iterations() {
            prop_assert!(r.objective_values[k] <= r.objective_values[k - 1] + 1e-9 * (1.0 + r.objective_values[0]));
            prop_assert!(r.supports[k - 1].is_subset(&r.supports[k]));
            prop_assert_eq!(r.supports[k].len(), r.supports[k - 1].len() + 1);
            prop_assert!(r.supports[k].contains(r.selected[k - 1]));
        }
        for (f, x) in r.supports.iter().zip(&r.iterates) {
            prop_assert!(x.support().is_subset(f));
        }
    }

    #[test]
    fn colex_roundtrip(d in 1usize..12, s in 1usize..6) {
        prop_assume!(s <= d);
        let total = binomial(d, s);
        let mut comb = colex_unrank(0, s, d);
        for rank in 0..total {
            prop_assert_eq!(&comb, &colex_unrank(rank, s, d));
            let more = colex_next(&mut comb, d);
            prop_assert_eq!(more, rank + 1 < total);
        }
    }

    #[test]
    fn rayleigh_quotients_lie_in_sparse_spectrum(
        a in matrix(6, 7),
        s in 1usize..4,
        x in prop::collection::vec(-1.0f64..1.0, 3),
        start in 0usize..5,
    ) {
        let profile = RscProfile::exact(&a, [s], 1_000).unwrap();
        let level = profile.levels().next().unwrap();
        let mut v = vec![0.0; 7];
        for (k, xi) in x.iter().take(s).enumerate() {
            v[start + k] = *xi;
        }
        let av = a.mul_vec(&v).unwrap();
        let nn = dot(&v, &v);
        let q = dot(&av, &av);
        let tol = 1e-9 * (1.0 + level.rho_plus) * (1.0 + nn);
        prop_assert!(level.rho_minus * nn <= q + tol);
        prop_assert!(q <= level.rho_plus * nn + tol);
        if s == 7 {
            let (lo, hi) = symmetric_eig_extremes(&a.gram()).unwrap();
            prop_assert!((lo - level.rho_minus).abs() < 1e-9 && (hi - level.rho_plus).abs() < 1e-9);
        }
    }

    #[test]
    fn epsilon_is_monotone_and_dominated(g in prop::collection::vec(-5.0f64..5.0, 1..12)) {
        let d = g.len();
        let inf = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut prev = 0.0;
        for s in 1..=d {
            let e = top_s_norm(&g, s);
            prop_assert!(e >= prev);
            prop_assert!(e <= (s as f64).sqrt() * inf + 1e-12);
            prop_assert!(e <= norm2(&g) + 1e-12);
            prev = e;
        }
        prop_assert!((top_s_norm(&g, d) - norm2(&g)).abs() < 1e-12);
    }

    #[test]
    fn support_algebra(
        xs in prop::collection::btree_set(0usize..20, 0..8),
        ys in prop::collection::btree_set(0usize..20, 0..8),
    ) {
        let x = SupportSet::new(xs.iter().copied(), 20).unwrap();
        let y = SupportSet::new(ys.iter().copied(), 20).unwrap();
        let u = x.union(&y);
        let diff = x.difference(&y);
        prop_assert_eq!(u.len(), xs.union(&ys).count());
        prop_assert_eq!(diff.as_slice(), &xs.difference(&ys).copied().collect::<Vec<_>>()[..]);
        prop_assert!(x.is_subset(&u) && y.is_subset(&u));
        prop_assert_eq!(diff.union(&y), u);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn lemmas_hold_with_exact_constants(
        a in matrix(6, 8),
        xbar in sparse_target(8, 2),
        noise in prop::collection::vec(-0.2f64..0.2, 6),
        fs in prop::collection::btree_set(0usize..8, 0..3),
    ) {
        let mut y = a.mul_vec(&xbar).unwrap();
        for (yi, ni) in y.iter_mut().zip(&noise) {
            *yi += ni;
        }
        let p = SensingProblem::new(a.clone(), y).unwrap();
        let target = TargetSignal::new(xbar.clone().into());
        let f = SupportSet::new(fs, 8).unwrap();
        let profile = RscProfile::exact(&a, 1..=5, 10_000).unwrap();
        let union = f.union(target.support()).len();
        let missing = target.support().difference(&f).len();
        prop_assert!(epsilon_s(&p, &xbar, 5).unwrap() >= epsilon_s(&p, &xbar, 1).unwrap());
        for s in missing.max(1)..=5 {
            prop_assert!(lemma1_oracle(&p, &target, &f, s, &profile).unwrap() <= BOUND_SLACK);
        }
        for s in union.max(1)..=5 {
            prop_assert!(lemma2_oracle(&p, &target, &f, s, &profile).unwrap() <= BOUND_SLACK);
            if missing > 0 {
                prop_assert!(lemma3_oracle(&p, &target, &f, s, &profile).unwrap() <= BOUND_SLACK);
            }
        }
    }
}
