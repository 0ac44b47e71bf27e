//! Seeded generators for random chains, functionals, laws and family parameters.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{Chain, PathFunctional};
use crate::risk::{CompositeSpec, FiniteDistribution, RiskFamily};

/// Smallest unnormalised kernel weight; keeps every transition well away from zero.
pub const KERNEL_FLOOR: f64 = 0.05;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent substream `stream` of `seed`, used to make parallel sampling order-free.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Rows of `max(U, 0.05)` weights, normalised.
pub fn random_chain<R: Rng>(rng: &mut R, n: usize) -> Chain {
    let kernel = (0..n)
        .map(|_| {
            let w: Vec<f64> = (0..n)
                .map(|_| rng.random::<f64>().max(KERNEL_FLOOR))
                .collect();
            let s: f64 = w.iter().sum();
            w.into_iter().map(|v| v / s).collect()
        })
        .collect();
    Chain::new(kernel).expect("normalised rows")
}

pub fn random_table<R: Rng>(rng: &mut R, len: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(lo..hi)).collect()
}

/// Functional of `(X_0, ..., X_hz)` with values uniform in `[-5, 5)`.
pub fn random_functional<R: Rng>(rng: &mut R, n: usize, hz: usize) -> PathFunctional {
    let len = n.pow(hz as u32 + 1);
    PathFunctional::from_values(n, hz, random_table(rng, len, -5.0, 5.0))
        .expect("table has the right length")
}

/// Functional with small integer values, which produces ties in quantile-based families.
pub fn random_integer_functional<R: Rng>(rng: &mut R, n: usize, hz: usize) -> PathFunctional {
    let len = n.pow(hz as u32 + 1);
    let values = (0..len).map(|_| rng.random_range(0..10) as f64).collect();
    PathFunctional::from_values(n, hz, values).expect("table has the right length")
}

/// Law with `n_atoms` values in `[-5, 5)` and random positive weights.
pub fn random_distribution<R: Rng>(rng: &mut R, n_atoms: usize) -> FiniteDistribution {
    let weights: Vec<f64> = (0..n_atoms)
        .map(|_| rng.random::<f64>().max(KERNEL_FLOOR))
        .collect();
    let s: f64 = weights.iter().sum();
    let atoms: Vec<(f64, f64)> = weights
        .into_iter()
        .map(|w| (rng.random_range(-5.0..5.0), w / s))
        .collect();
    // Renormalising can leave the sum one ulp away from 1; absorb it into the last weight.
    let head: f64 = atoms[..n_atoms - 1].iter().map(|a| a.1).sum();
    let mut atoms = atoms;
    atoms[n_atoms - 1].1 = 1.0 - head;
    FiniteDistribution::new(atoms).expect("valid law")
}

/// One instance of every family, with random parameters for an `n`-state chain.
pub fn random_families<R: Rng>(rng: &mut R, n: usize) -> Vec<RiskFamily> {
    let gamma = random_table(rng, n, 0.2, 2.0);
    let kappa = random_table(rng, n, 0.0, 1.0);
    let p = rng.random_range(1..=3);
    let lambda_var = rng.random_range(0.1..0.9);
    let lambda_avar = rng.random_range(0.1..0.9);
    let composite = if rng.random::<bool>() {
        CompositeSpec::entropic(random_table(rng, n, 0.2, 2.0))
    } else {
        CompositeSpec::mean_semideviation(random_table(rng, n, 0.0, 1.0), rng.random_range(1..=3))
    };
    vec![
        RiskFamily::Expectation,
        RiskFamily::Entropic { gamma },
        RiskFamily::MeanSemiDeviation { kappa, p },
        RiskFamily::WorstCase,
        RiskFamily::ValueAtRisk { lambda: lambda_var },
        RiskFamily::AverageValueAtRisk { lambda: lambda_avar },
        RiskFamily::Composite(composite),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reproducible() {
        let a = random_chain(&mut rng(7), 3);
        let b = random_chain(&mut rng(7), 3);
        assert_eq!(a, b);
        assert_ne!(a, random_chain(&mut rng(8), 3));
    }

    #[test]
    fn substreams_differ() {
        let x: f64 = substream(1, 0).random();
        let y: f64 = substream(1, 1).random();
        assert_ne!(x, y);
        assert_eq!(x, substream(1, 0).random::<f64>());
    }

    #[test]
    fn kernels_are_bounded_away_from_zero() {
        let c = random_chain(&mut rng(3), 4);
        for row in c.kernel() {
            assert!(row.iter().all(|&p| p >= KERNEL_FLOOR / 4.0));
        }
    }

    #[test]
    fn families_are_valid() {
        let mut r = rng(11);
        for n in 1..5 {
            for f in random_families(&mut r, n) {
                f.validate(n).unwrap();
            }
        }
    }
}
