use proptest::prelude::*;
use riskstop_core::random::{random_chain, random_families, random_functional, rng};
use riskstop_core::risk::{
    average_value_at_risk, conditional_risk, conditional_risk_by_ratio, entropic_risk,
    mean_semideviation_risk, value_at_risk,
};
use riskstop_core::{CompositeSpec, FiniteDistribution, PathFunctional, RiskFamily};

fn law() -> impl Strategy<Value = FiniteDistribution> {
    prop::collection::vec((-5.0..5.0f64, 0.05..1.0f64), 1..7).prop_map(|atoms| {
        let total: f64 = atoms.iter().map(|a| a.1).sum();
        let mut atoms: Vec<(f64, f64)> = atoms.into_iter().map(|(v, w)| (v, w / total)).collect();
        let k = atoms.len() - 1;
        atoms[k].1 = 1.0 - atoms[..k].iter().map(|a| a.1).sum::<f64>();
        FiniteDistribution::new(atoms).unwrap()
    })
}

fn families(seed: u64) -> Vec<RiskFamily> {
    random_families(&mut rng(seed), 1)
}

proptest! {
    #[test]
    fn translation_invariance(dist in law(), seed in any::<u64>()) {
        for family in families(seed) {
            let base = family.static_risk(0, &dist).unwrap();
            for c in [-3.0, 0.5, 7.0] {
                let moved = family.static_risk(0, &dist.shifted(c)).unwrap();
                prop_assert!((moved - base - c).abs() <= 1e-10, "{}: {moved} vs {base} + {c}", family.name());
            }
        }
    }

    #[test]
    fn monotonicity(dist in law(), bumps in prop::collection::vec(0.0..3.0f64, 7), seed in any::<u64>()) {
        let bigger = FiniteDistribution::new(
            dist.atoms().iter().zip(&bumps).map(|(&(v, p), b)| (v + b, p)),
        ).unwrap();
        for family in families(seed) {
            let a = family.static_risk(0, &dist).unwrap();
            let b = family.static_risk(0, &bigger).unwrap();
            prop_assert!(a <= b + 1e-10, "{}: {a} > {b}", family.name());
        }
    }

    #[test]
    fn normalisation(seed in any::<u64>()) {
        for family in families(seed) {
            let v = family.static_risk(0, &FiniteDistribution::point(0.0)).unwrap();
            prop_assert!(v.abs() <= 1e-12);
        }
    }

    #[test]
    fn ordering(dist in law(), lambda in 0.01..0.99f64) {
        let avar = average_value_at_risk(&dist, lambda).unwrap();
        prop_assert!(dist.mean() <= avar + 1e-10);
        prop_assert!(avar <= dist.max_value() + 1e-10);
        prop_assert!(value_at_risk(&dist, lambda).unwrap() <= avar + 1e-10);
    }

    #[test]
    fn entropic_increases_with_gamma(dist in law(), g in 0.05..3.0f64, dg in 0.01..2.0f64) {
        let lo = entropic_risk(&dist, g).unwrap();
        let hi = entropic_risk(&dist, g + dg).unwrap();
        prop_assert!(lo <= hi + 1e-10);
        prop_assert!(dist.mean() <= lo + 1e-10 && hi <= dist.max_value() + 1e-10);
    }

    #[test]
    fn composite_matches_dedicated(dist in law(), g in 0.05..3.0f64, kappa in 0.0..1.0f64, p in 1u32..4) {
        let e = CompositeSpec::entropic(vec![g]).risk(0, &dist).unwrap();
        prop_assert!((e - entropic_risk(&dist, g).unwrap()).abs() <= 1e-12);
        let s = CompositeSpec::mean_semideviation(vec![kappa], p).risk(0, &dist).unwrap();
        prop_assert!((s - mean_semideviation_risk(&dist, kappa, p).unwrap()).abs() <= 1e-12);
        let m = CompositeSpec::expectation().risk(0, &dist).unwrap();
        prop_assert!((m - dist.mean()).abs() <= 1e-12);
    }

    /// Evaluating per prefix through the suffix law and through the conditioned joint law agree.
    #[test]
    fn update_rule_invariance(seed in any::<u64>(), n in 2usize..4, t in 0usize..3) {
        let mut r = rng(seed);
        let chain = random_chain(&mut r, n);
        let z = random_functional(&mut r, n, 3);
        for family in random_families(&mut r, n) {
            for x in 0..n {
                for p in riskstop_core::model::reachable_prefixes(&chain, x, t + 1)
                    .into_iter()
                    .filter(|p| p.len() == t + 1)
                {
                    let a = conditional_risk(&family, &chain, &z, &p, 3).unwrap();
                    let b = conditional_risk_by_ratio(&family, &chain, &z, &p, 3).unwrap();
                    prop_assert!((a - b).abs() <= 1e-12, "{}: {a} vs {b}", family.name());
                }
            }
        }
    }

    /// Splicing two functionals on a partition of prefixes and evaluating per prefix gives the
    /// per-branch values.
    #[test]
    fn conditional_locality(seed in any::<u64>(), n in 2usize..4, t in 0usize..3) {
        let mut r = rng(seed);
        let chain = random_chain(&mut r, n);
        let a = random_functional(&mut r, n, 3);
        let b = random_functional(&mut r, n, 3);
        let in_a = |path: &[usize]| path[..=t].iter().sum::<usize>() % 2 == 0;
        let mixed = PathFunctional::from_fn(n, 3, |path| {
            if in_a(path) { a.eval(path) } else { b.eval(path) }
        }).unwrap();
        for family in random_families(&mut r, n) {
            for p in riskstop_core::model::positive_prefixes(&chain, t) {
                let branch = if in_a(&p) { &a } else { &b };
                let left = conditional_risk(&family, &chain, &mixed, &p, 3).unwrap();
                let right = conditional_risk(&family, &chain, branch, &p, 3).unwrap();
                prop_assert!((left - right).abs() <= 1e-12);
            }
        }
    }
}

/// Upper-tail averages worked out by hand: the top 25% sits at 2, the top 75% is half at 2 and
/// a quarter at 0.
#[test]
fn avar_averages_the_upper_tail() {
    let dist = FiniteDistribution::new([(-1.0, 0.25), (0.0, 0.25), (2.0, 0.5)]).unwrap();
    assert!((average_value_at_risk(&dist, 0.25).unwrap() - 2.0).abs() < 1e-12);
    assert!((average_value_at_risk(&dist, 0.75).unwrap() - 4.0 / 3.0).abs() < 1e-12);
    assert!((average_value_at_risk(&dist, 1e-9).unwrap() - 2.0).abs() < 1e-12);
}
