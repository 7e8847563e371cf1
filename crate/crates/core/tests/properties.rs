mod common;

use common::*;
use dclab::dcgauge::{dc_sum, pairing_chain};
use dclab::dyadic::{conditional_expectation, expectation, tail_weighted_sum, DyadicTable, FiltrationLevel};
use dclab::factorize::{block_assemble, dss_from_factorization, gamma2_l1_linf, spectral_split, Gamma2Config};
use dclab::martingale::{doob_ratio, WalshPaleyMartingale};
use dclab::quadform::{split_blocks, NormedSpace, QuadraticForm, SymOperator};
use nalgebra::DMatrix;
use proptest::prelude::*;

fn table_strategy(max_depth: usize, max_dim: usize) -> impl Strategy<Value = DyadicTable> {
    (1..=max_depth, 1..=max_dim).prop_flat_map(|(n, m)| {
        prop::collection::vec(-5.0..5.0f64, m << n).prop_map(move |v| DyadicTable::new(n, m, v).unwrap())
    })
}

fn exponent() -> impl Strategy<Value = f64> {
    prop_oneof![Just(1.0), Just(1.5), Just(2.0), Just(3.0), Just(f64::INFINITY)]
}

fn sym_strategy(max_dim: usize) -> impl Strategy<Value = DMatrix<f64>> {
    (1..=max_dim).prop_flat_map(|m| {
        prop::collection::vec(-2.0..2.0f64, m * m).prop_map(move |v| {
            let a = DMatrix::from_vec(m, m, v);
            (&a + a.transpose()) * 0.5
        })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn conditional_expectation_tower(f in table_strategy(6, 3), a in 0usize..7, b in 0usize..7) {
        let n = f.depth();
        let (j, k) = (a.min(n), b.min(n));
        let inner = conditional_expectation(&f, FiltrationLevel(k)).unwrap();
        prop_assert!(inner.is_measurable(FiltrationLevel(k), 0.0));
        let twice = conditional_expectation(&inner, FiltrationLevel(j)).unwrap();
        let once = conditional_expectation(&f, FiltrationLevel(j.min(k))).unwrap();
        prop_assert!(twice.max_abs_diff(&once) <= 1e-12);
        let (e1, e2) = (expectation(&inner), mean(&f));
        for (x, y) in e1.iter().zip(&e2) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn tail_sum_below_moment_bound(
        vals in prop::collection::vec(0.0..40.0f64, 16),
        p in prop_oneof![Just(0.5), Just(1.0), Just(2.0), Just(3.0)],
    ) {
        let (lhs, rhs) = tail_weighted_sum(&DyadicTable::scalar(4, vals).unwrap(), p).unwrap();
        prop_assert!(lhs <= rhs);
    }

    #[test]
    fn differences_telescope(f in table_strategy(6, 3)) {
        let mart = WalshPaleyMartingale::from_terminal(f.clone());
        let mut sum = DyadicTable::constant(f.depth(), mart.initial()).unwrap();
        for d in mart.differences() {
            sum = sum.add(&d).unwrap();
        }
        prop_assert!(sum.max_abs_diff(&f) <= 1e-12);
    }

    #[test]
    fn doob_bound(f in table_strategy(6, 3), p in prop_oneof![Just(1.5), Just(2.0), Just(4.0)], q in exponent()) {
        let mart = WalshPaleyMartingale::from_terminal(f.clone());
        let space = NormedSpace::lp(f.dim(), q).unwrap();
        prop_assert!(doob_ratio(&mart, p, &space).unwrap() <= p / (p - 1.0) + 1e-9);
    }

    #[test]
    fn norm_axioms_and_duality(
        x in prop::collection::vec(-3.0..3.0f64, 4),
        y in prop::collection::vec(-3.0..3.0f64, 4),
        t in -4.0..4.0f64,
        p in exponent(),
    ) {
        let space = NormedSpace::lp(4, p).unwrap();
        let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
        let scaled: Vec<f64> = x.iter().map(|a| t * a).collect();
        prop_assert!(space.norm(&sum) <= space.norm(&x) + space.norm(&y) + 1e-12);
        prop_assert!((space.norm(&scaled) - t.abs() * space.norm(&x)).abs() <= 1e-12 * (1.0 + space.norm(&scaled)));
        prop_assert!(dot(&x, &y).abs() <= space.norm(&x) * space.dual().norm(&y) + 1e-12);
    }

    #[test]
    fn dc_sum_telescopes_and_respects_hilbert_ceiling(t in sym_strategy(4), seed in any::<u64>()) {
        let m = t.nrows();
        let mut r = rng(seed);
        let mart = martingale(&mut r, 3, m);
        let q = QuadraticForm::new(SymOperator::new(t.clone()).unwrap());
        let rep = dc_sum(&q, &NormedSpace::euclidean(m).unwrap(), &mart).unwrap();
        prop_assert!((rep.signed - rep.telescoped).abs() <= 1e-10 * (1.0 + rep.absolute));
        let norm = t.symmetric_eigen().eigenvalues.amax();
        prop_assert!(rep.ratio <= 2.0 * norm + 1e-9);
    }

    #[test]
    fn pairing_identity(t in sym_strategy(4), seed in any::<u64>(), p in exponent()) {
        let m = t.nrows();
        let mut r = rng(seed);
        let mart = martingale(&mut r, 4, m);
        let q = QuadraticForm::new(SymOperator::new(t).unwrap());
        let rep = pairing_chain(&q, &NormedSpace::lp(m, p).unwrap(), &mart).unwrap();
        prop_assert!(rep.signs_predictable);
        prop_assert!(rep.gap <= 1e-9 * (1.0 + rep.absolute_sum));
        prop_assert!(rep.absolute_sum <= rep.cauchy_schwarz * (1.0 + 1e-9) + 1e-12);
    }

    #[test]
    fn spectral_split_is_orthogonal(t in sym_strategy(5)) {
        let (plus, minus) = spectral_split(&SymOperator::new(t.clone()).unwrap());
        prop_assert!((plus.matrix() - minus.matrix() - &t).amax() <= 1e-10);
        prop_assert!((plus.matrix() * minus.matrix()).amax() <= 1e-10);
        for s in [plus.matrix(), minus.matrix()] {
            prop_assert!(s.clone().symmetric_eigen().eigenvalues.min() >= -1e-10);
        }
    }

    #[test]
    fn dss_parts_are_gram_forms(seed in any::<u64>(), m in 1usize..5, h in 1usize..5) {
        let mut r = rng(seed);
        let a = matrix(&mut r, h, m);
        let g = matrix(&mut r, h, h);
        // B = Aᵀ(G + Gᵀ) makes BA symmetric
        let b = a.transpose() * (&g + g.transpose());
        let (q1, q2) = dss_from_factorization(&a, &b).unwrap();
        for q in [&q1, &q2] {
            prop_assert!(q.matrix().clone().symmetric_eigen().eigenvalues.min() >= -1e-10);
        }
        let ba = &b * &a;
        for _ in 0..20 {
            let x: Vec<f64> = matrix(&mut r, m, 1).iter().copied().collect();
            let direct = dot(&x, &mat_vec(&ba, &x));
            prop_assert!((q1.eval(&x) - q2.eval(&x) - direct).abs() <= 1e-10 * (1.0 + direct.abs()));
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn gamma2_estimate_invariants(seed in any::<u64>(), r0 in 1usize..4, rows in 2usize..5, cols in 2usize..5) {
        let mut r = rng(seed);
        let m = matrix(&mut r, rows, r0) * matrix(&mut r, r0, cols);
        let cfg = Gamma2Config { restarts: 2, iterations: 200, ..Gamma2Config::default() };
        let est = gamma2_l1_linf(&m, &cfg).unwrap();
        prop_assert!(est.lower_bound <= est.value + 1e-12);
        prop_assert!((&est.b * &est.a - &m).amax() <= 1e-8);
        let row_max = (0..est.b.nrows()).map(|i| est.b.row(i).norm()).fold(0.0, f64::max);
        let col_max = (0..est.a.ncols()).map(|j| est.a.column(j).norm()).fold(0.0, f64::max);
        prop_assert!((row_max * col_max - est.value).abs() <= 1e-9 * (1.0 + est.value));
        let wide = gamma2_l1_linf(&m, &Gamma2Config { rank: Some(r0.min(rows).min(cols) + 2), ..cfg }).unwrap();
        prop_assert!(wide.value <= est.value + 1e-9);
    }

    #[test]
    fn assembly_restricts_to_blocks(t in sym_strategy(4).prop_filter("even size", |t| t.nrows() % 2 == 0)) {
        let a = t.nrows() / 2;
        let [t11, t12, t21, t22] = split_blocks(&t, a);
        let op = block_assemble(&t11, &t12, &t21, &t22).unwrap();
        prop_assert_eq!(op.matrix(), &t);
        let cfg = Gamma2Config { restarts: 2, ..Gamma2Config::default() };
        let whole = gamma2_l1_linf(&t, &cfg).unwrap();
        for (rows, cols, block) in [(0..a, 0..a, &t11), (a..2 * a, a..2 * a, &t22)] {
            let b = whole.b.rows(rows.start, rows.len()).into_owned();
            let ac = whole.a.columns(cols.start, cols.len()).into_owned();
            prop_assert!((&b * &ac - block).amax() <= 1e-8);
            let row_max = (0..b.nrows()).map(|i| b.row(i).norm()).fold(0.0, f64::max);
            let col_max = (0..ac.ncols()).map(|j| ac.column(j).norm()).fold(0.0, f64::max);
            prop_assert!(row_max * col_max <= whole.value + 1e-9);
            let own = gamma2_l1_linf(block, &cfg).unwrap();
            prop_assert!(own.value <= whole.value + 2e-2);
        }
    }
}
