mod common;

use proptest::prelude::*;
use riskstop_core::dual::{dual_domination, entropic_optimal_kernel};
use riskstop_core::filter::{
    belief_recursion, check_history_consistency, check_transition_consistency_filtered,
    direct_posterior, positive_histories, PathParamFunctional,
};
use riskstop_core::random::{random_chain, random_table, rng};
use riskstop_core::{CompositeSpec, RiskFamily};

proptest! {
    /// Perturbing `f` by 1e-8 moves the optimal density rows by at most 1e-6.
    #[test]
    fn optimal_kernel_is_continuous(seed in any::<u64>(), n in 2usize..5, gamma in 0.2..2.0f64) {
        let mut r = rng(seed);
        let chain = random_chain(&mut r, n);
        let f: Vec<Vec<f64>> = (0..n).map(|_| random_table(&mut r, n, -5.0, 5.0)).collect();
        let bump: Vec<Vec<f64>> = f.iter().map(|row| row.iter().map(|v| v + 1e-8).collect()).collect();
        let wiggle: Vec<Vec<f64>> = f
            .iter()
            .map(|row| row.iter().enumerate().map(|(j, v)| v + if j % 2 == 0 { 1e-8 } else { -1e-8 }).collect())
            .collect();
        for x in 0..n {
            let base = entropic_optimal_kernel(&chain, x, &f, gamma).unwrap();
            for g in [&bump, &wiggle] {
                let moved = entropic_optimal_kernel(&chain, x, g, gamma).unwrap();
                for (a, b) in base.iter().zip(&moved) {
                    prop_assert!((a - b).abs() <= 1e-6);
                }
            }
        }
    }

    #[test]
    fn indicator_penalties_dominate(seed in any::<u64>(), n in 2usize..4, lambda in 0.05..0.95f64) {
        let mut r = rng(seed);
        let chain = random_chain(&mut r, n);
        let f: Vec<Vec<f64>> = (0..n).map(|_| random_table(&mut r, n, -5.0, 5.0)).collect();
        for family in [RiskFamily::WorstCase, RiskFamily::AverageValueAtRisk { lambda }] {
            let v = dual_domination(&family, &chain, &f, 200, seed).unwrap();
            prop_assert!(v <= 1e-9, "{}: {v}", family.name());
        }
    }

    #[test]
    fn filter_matches_direct_conditional_up_to_four_steps(seed in any::<u64>()) {
        let mut r = rng(seed);
        let model = common::random_po_model(&mut r, 2, 2, CompositeSpec::expectation(), 4);
        for t in 0..=4 {
            for h in positive_histories(&model, t).unwrap() {
                let nu = belief_recursion(&model, &h).unwrap();
                let direct = direct_posterior(&model, &h).unwrap();
                let joint = common::joint_masses(&model, &h);
                let total: f64 = joint.iter().sum();
                for xi in 0..2 {
                    prop_assert!((nu.weights()[xi] - direct[xi]).abs() <= 1e-12);
                    prop_assert!((direct[xi] - joint[xi] / total).abs() <= 1e-12);
                    prop_assert!(nu.weights()[xi] >= 0.0);
                }
                prop_assert!((nu.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn history_and_transition_consistency(seed in any::<u64>(), entropic in any::<bool>()) {
        let mut r = rng(seed);
        let risk = if entropic {
            CompositeSpec::entropic(random_table(&mut r, 2, 0.2, 2.0))
        } else {
            CompositeSpec::mean_semideviation(random_table(&mut r, 2, 0.0, 1.0), 2)
        };
        let model = common::random_po_model(&mut r, 2, 2, risk, 2);
        let z = PathParamFunctional { horizon: 2, values: random_table(&mut r, 8 * 2, -3.0, 3.0) };
        for (t, s) in [(0, 0), (0, 1), (0, 2), (1, 2)] {
            let rep = check_history_consistency(&model, &z, t, s, 1e-10).unwrap();
            prop_assert!(rep.pass, "t={t} s={s}: {}", rep.max_discrepancy);
        }
        let f = random_table(&mut r, 2, -3.0, 3.0);
        for t in 0..2 {
            let rep = check_transition_consistency_filtered(&model, t, &f, 1e-12).unwrap();
            prop_assert!(rep.pass, "{}", rep.max_discrepancy);
        }
    }
}
