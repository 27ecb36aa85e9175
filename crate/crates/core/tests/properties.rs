use ndarray::Array2;
use pcskew::baselines;
use pcskew::estimator::{self, EstimateConfig, PValueSequence, ResidualAnalysis, TestKind};
use pcskew::matrix::{self, DataMatrix};
use pcskew::sim::{self, ScoreDistribution};
use pcskew::skew;
use proptest::prelude::*;

/// Continuous values: exact kernel ties such as arithmetic progressions would
/// let rounding in `a·y + b` flip signs.
fn sample(min: usize, max: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-100.0f64..100.0, min..=max)
}

fn matrix_strategy(n: usize, d: usize) -> impl Strategy<Value = Array2<f64>> {
    prop::collection::vec(-10.0f64..10.0, n * d).prop_map(move |v| Array2::from_shape_vec((n, d), v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normal_cdf_is_symmetric(x in -40.0f64..40.0) {
        let s = skew::std_normal_cdf(x) + skew::std_normal_cdf(-x) - 1.0;
        prop_assert!(s.abs() <= 1e-14);
    }

    #[test]
    fn dagostino_is_antisymmetric(y in sample(8, 120)) {
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = skew::dagostino_test_right(&y).unwrap();
        let b = skew::dagostino_test_right(&neg).unwrap();
        prop_assert_eq!(a.statistic, -b.statistic);
        prop_assert!((a.p_right - (1.0 - b.p_right)).abs() < 1e-15);
    }

    #[test]
    fn triples_is_antisymmetric(y in sample(10, 60)) {
        let neg: Vec<f64> = y.iter().map(|v| -v).collect();
        let a = skew::triples_test_right(&y).unwrap();
        let b = skew::triples_test_right(&neg).unwrap();
        prop_assert_eq!(a.statistic, -b.statistic);
        prop_assert!((a.p_right - (1.0 - b.p_right)).abs() < 1e-15);
    }

    #[test]
    fn statistics_are_affine_invariant(y in sample(10, 60), a in 0.01f64..100.0, b in -50.0f64..50.0) {
        let z: Vec<f64> = y.iter().map(|v| a * v + b).collect();
        for kind in TestKind::ALL {
            let s0 = kind.run(&y).unwrap().statistic;
            let s1 = kind.run(&z).unwrap().statistic;
            prop_assert!((s0 - s1).abs() < 1e-10, "{kind}: {s0} vs {s1}");
        }
    }

    #[test]
    fn m_hat_non_decreasing_in_alpha(
        p in prop::collection::vec(0.0f64..1.0, 1..30),
        a1 in 0.001f64..0.999,
        a2 in 0.001f64..0.999,
    ) {
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let seq = PValueSequence::from_values(TestKind::DAgostino, p);
        let e_lo = estimator::estimate_m(&seq, lo).unwrap();
        let e_hi = estimator::estimate_m(&seq, hi).unwrap();
        // A larger alpha shrinks the set {k : p_k > alpha}.
        prop_assert!(e_lo.m_hat <= e_hi.m_hat);
    }

    #[test]
    fn residuals_nonnegative_and_monotone(x in matrix_strategy(7, 12)) {
        let data = DataMatrix::new(x).unwrap();
        let g = matrix::gram(&data);
        let w = matrix::pc_scores(&g.eigen().unwrap(), 6).unwrap();
        let r = matrix::residual_lengths(&g, &w, 6).unwrap();
        for row in r.table().rows() {
            for k in 0..row.len() {
                prop_assert!(row[k] >= 0.0);
                if k > 0 {
                    prop_assert!(row[k] <= row[k - 1]);
                }
            }
        }
    }

    #[test]
    fn pvalues_are_scale_invariant(x in matrix_strategy(12, 30), c in 0.001f64..1000.0) {
        let data = DataMatrix::new(x).unwrap();
        let base = ResidualAnalysis::from_data(&data, Some(8), false, false).unwrap();
        let scaled = ResidualAnalysis::from_data(&data.scaled(c), Some(8), false, false).unwrap();
        for kind in TestKind::ALL {
            let p0 = base.pvalues(kind).unwrap().p;
            let p1 = scaled.pvalues(kind).unwrap().p;
            for (a, b) in p0.iter().zip(&p1) {
                prop_assert!((a - b).abs() < 1e-10, "{kind}: {a} vs {b}");
            }
        }
        let cfg = EstimateConfig::default();
        let e0 = estimator::estimate_from_data(&data, &cfg).unwrap().estimate.m_hat;
        let e1 = estimator::estimate_from_data(&data.scaled(c), &cfg).unwrap().estimate.m_hat;
        prop_assert_eq!(e0, e1);
    }

    #[test]
    fn kn_non_decreasing_in_alpha(seed in 0u64..1000, a1 in 0.01f64..0.5, a2 in 0.01f64..0.5) {
        let (lo, hi) = if a1 < a2 { (a1, a2) } else { (a2, a1) };
        let model = sim::eigen_model(400, 2, 0.2, 1.0, 0.0).unwrap();
        let z = sim::sample_panel(30, 400, ScoreDistribution::StandardNormal, seed, 0);
        let x = sim::synth_data(&model, &z).unwrap();
        let a = ResidualAnalysis::from_data(&x, Some(20), false, false).unwrap();
        let eig = a.sample_eigenvalues();
        let m_lo = baselines::kritchman_nadler(&eig, 30, 400, lo, 20).unwrap().m_hat;
        let m_hi = baselines::kritchman_nadler(&eig, 30, 400, hi, 20).unwrap().m_hat;
        prop_assert!(m_lo <= m_hi);
    }

    #[test]
    fn bai_ng_trace_finite_and_scale_invariant(x in matrix_strategy(10, 25), c in 0.01f64..100.0) {
        let data = DataMatrix::new(x).unwrap();
        let r0 = ResidualAnalysis::from_data(&data, Some(6), false, false).unwrap().residuals;
        let r1 = ResidualAnalysis::from_data(&data.scaled(c), Some(6), false, false).unwrap().residuals;
        let b0 = baselines::bai_ng(&r0, 6).unwrap();
        let b1 = baselines::bai_ng(&r1, 6).unwrap();
        prop_assert!(b0.criterion_trace.iter().all(|v| v.is_finite()));
        prop_assert_eq!(b0.m_hat, b1.m_hat);
    }
}

#[test]
fn rotation_leaves_residuals_unchanged() {
    let model = sim::eigen_model(60, 2, 0.3, 1.0, 0.3).unwrap();
    for rep in 0..5 {
        let z = sim::sample_panel(15, 60, ScoreDistribution::StandardNormal, 3, rep);
        let plain = sim::synth_data(&model, &z).unwrap();
        let rotated = sim::synth_data_rotated(&model, &z, 3, rep).unwrap();
        let g0 = matrix::gram(&plain);
        let g1 = matrix::gram(&rotated);
        let scale = g0.entries().iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        for (a, b) in g0.entries().iter().zip(g1.entries()) {
            assert!((a - b).abs() <= 1e-8 * scale);
        }
        let r0 = ResidualAnalysis::from_data(&plain, Some(10), false, false).unwrap().residuals;
        let r1 = ResidualAnalysis::from_data(&rotated, Some(10), false, false).unwrap().residuals;
        for (a, b) in r0.table().iter().zip(r1.table()) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }
}
