//! One-step dual representation: penalised expectations over kernels absolutely continuous
//! with respect to the chain's kernel.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::Chain;
use crate::random;
use crate::risk::{
    average_value_at_risk, entropic_risk, one_step_law, worst_case_risk, RiskFamily,
};

const DENSITY_TOL: f64 = 1e-12;

/// Densities `d(y|x)` of a kernel `q` with respect to `q^X`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KernelDensity {
    density: Vec<Vec<f64>>,
}

impl KernelDensity {
    /// Requires `d >= 0`, `d = 0` off the support of `q^X(.|x)` and `Σ_y d q^X = 1` per row.
    pub fn new(chain: &Chain, density: Vec<Vec<f64>>) -> Result<Self> {
        let n = chain.n_states();
        if density.len() != n || density.iter().any(|r| r.len() != n) {
            return Err(Error::Malformed(format!("density must be {n}x{n}")));
        }
        for (x, row) in density.iter().enumerate() {
            check_density_row(chain, x, row)?;
        }
        Ok(Self { density })
    }

    /// `d ≡ 1`, i.e. `q = q^X`.
    pub fn identity(chain: &Chain) -> Self {
        let n = chain.n_states();
        let density = (0..n)
            .map(|x| (0..n).map(|y| if chain.prob(x, y) > 0.0 { 1.0 } else { 0.0 }).collect())
            .collect();
        Self { density }
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.density[x]
    }

    /// `q(y|x) = d(y|x) q^X(y|x)`.
    pub fn kernel_row(&self, chain: &Chain, x: usize) -> Vec<f64> {
        self.density[x]
            .iter()
            .zip(chain.row(x))
            .map(|(d, p)| d * p)
            .collect()
    }
}

fn check_density_row(chain: &Chain, x: usize, row: &[f64]) -> Result<()> {
    let mut mass = 0.0;
    for (y, &d) in row.iter().enumerate() {
        let p = chain.prob(x, y);
        if !d.is_finite() || d < 0.0 {
            return Err(Error::NonFinite(format!("density d({y}|{x}) = {d}")));
        }
        if p == 0.0 && d != 0.0 {
            return Err(Error::Malformed(format!(
                "density d({y}|{x}) = {d} on a null transition"
            )));
        }
        mass += d * p;
    }
    if (mass - 1.0).abs() > DENSITY_TOL {
        return Err(Error::Malformed(format!("density row {x} integrates to {mass}")));
    }
    Ok(())
}

fn penalty_row(chain: &Chain, x: usize, d: &[f64], gamma: f64) -> f64 {
    let s: f64 = d
        .iter()
        .zip(chain.row(x))
        .filter(|(&d, _)| d > 0.0)
        .map(|(&d, &p)| d * d.ln() * p)
        .sum();
    s / gamma
}

/// `(1/γ) Σ_y d(y|x) ln d(y|x) q^X(y|x)` with `0 ln 0 = 0`.
pub fn entropic_penalty(chain: &Chain, x: usize, q: &KernelDensity, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    Ok(penalty_row(chain, x, q.row(x), gamma))
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("gamma = {gamma} must lie in (0, inf)")))
    }
}

/// Density of the maximising kernel, `e^{γ f(x,y)} / Σ_z e^{γ f(x,z)} q^X(z|x)`.
pub fn entropic_optimal_kernel(
    chain: &Chain,
    x: usize,
    f: &[Vec<f64>],
    gamma: f64,
) -> Result<Vec<f64>> {
    check_gamma(gamma)?;
    let row = &f[x];
    let top = chain
        .successors(x)
        .map(|(y, _)| row[y])
        .fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = (0..chain.n_states())
        .map(|y| {
            if chain.prob(x, y) > 0.0 {
                (gamma * (row[y] - top)).exp()
            } else {
                0.0
            }
        })
        .collect();
    let norm: f64 = weights.iter().zip(chain.row(x)).map(|(w, p)| w * p).sum();
    Ok(weights.into_iter().map(|w| w / norm).collect())
}

/// `E_q[f(x, .)] - α^x(q)` for the density row `d`.
fn penalised_value(chain: &Chain, x: usize, f: &[f64], d: &[f64], gamma: f64) -> f64 {
    let expectation: f64 = (0..chain.n_states())
        .map(|y| d[y] * chain.prob(x, y) * f[y])
        .sum();
    expectation - penalty_row(chain, x, d, gamma)
}

/// Per-state outcome of the dual check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualState {
    pub state: usize,
    pub risk: f64,
    pub value_at_qop: f64,
    pub gap_at_qop: f64,
    pub max_violation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    pub samples: usize,
    pub seed: u64,
    pub states: Vec<DualState>,
    /// `max_x |E_{q_op}[f] - α(q_op) - ρ^x(f(x, X_1))|`.
    pub gap_at_qop: f64,
    /// `max` over samples and states of `E_q[f] - α(q) - ρ^x(f(x, X_1))`; not positive when
    /// the representation holds.
    pub max_violation: f64,
}

/// Random density row: `q(y) ∝ exp(σ N(0,1))` on the support of `q^X(.|x)`.
fn sample_density_row<R: Rng>(rng: &mut R, chain: &Chain, x: usize, sigma: f64) -> Vec<f64> {
    let n = chain.n_states();
    let mut w = vec![0.0; n];
    for (y, _) in chain.successors(x) {
        let g: f64 = rng.sample(StandardNormal);
        w[y] = (sigma * g).exp();
    }
    let total: f64 = w.iter().sum();
    (0..n)
        .map(|y| {
            let p = chain.prob(x, y);
            if p > 0.0 {
                w[y] / total / p
            } else {
                0.0
            }
        })
        .collect()
}

fn sampled_densities(chain: &Chain, seed: u64, i: usize) -> Vec<Vec<f64>> {
    let mut rng = random::substream(seed, i as u64);
    let sigma = rng.random_range(0.1..3.0);
    (0..chain.n_states())
        .map(|x| sample_density_row(&mut rng, chain, x, sigma))
        .collect()
}

/// Checks `ρ^x(f(x, X_1)) >= E_q[f] - α^x(q)` for `n_samples` random kernels and equality at
/// the optimal kernel, for the entropic family with per-state `gamma`.
pub fn dual_gap(
    chain: &Chain,
    gamma: &[f64],
    f: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<DualReport> {
    let n = chain.n_states();
    check_table(f, n)?;
    if gamma.len() != n {
        return Err(Error::ParameterOutOfRange(format!(
            "gamma has {} entries, expected {n}",
            gamma.len()
        )));
    }
    gamma.iter().try_for_each(|&g| check_gamma(g))?;
    if n_samples == 0 {
        return Err(Error::ParameterOutOfRange("at least one sample is required".into()));
    }
    let risk: Vec<f64> = (0..n)
        .map(|x| entropic_risk(&one_step_law(chain, x, &f[x])?, gamma[x]))
        .collect::<Result<_>>()?;

    let per_sample: Vec<Vec<f64>> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let d = sampled_densities(chain, seed, i);
            (0..n)
                .map(|x| penalised_value(chain, x, &f[x], &d[x], gamma[x]) - risk[x])
                .collect()
        })
        .collect();

    let mut states = Vec::with_capacity(n);
    for x in 0..n {
        let d_op = entropic_optimal_kernel(chain, x, f, gamma[x])?;
        let value_at_qop = penalised_value(chain, x, &f[x], &d_op, gamma[x]);
        let max_violation = per_sample
            .iter()
            .map(|v| v[x])
            .fold(f64::NEG_INFINITY, f64::max);
        states.push(DualState {
            state: x,
            risk: risk[x],
            value_at_qop,
            gap_at_qop: (value_at_qop - risk[x]).abs(),
            max_violation,
        });
    }
    Ok(DualReport {
        samples: n_samples,
        seed,
        gap_at_qop: states.iter().map(|s| s.gap_at_qop).fold(0.0, f64::max),
        max_violation: states
            .iter()
            .map(|s| s.max_violation)
            .fold(f64::NEG_INFINITY, f64::max),
        states,
    })
}

/// Domination-only check for families whose penalty is an indicator: the worst case (every
/// kernel in the dominated set has penalty 0) and AVaR (penalty 0 iff `d <= 1/λ`). Sampled
/// densities are pulled towards 1 until they satisfy the AVaR bound.
///
/// Returns `max` over samples and states of `E_q[f] - ρ^x(f(x, X_1))`.
pub fn dual_domination(
    family: &RiskFamily,
    chain: &Chain,
    f: &[Vec<f64>],
    n_samples: usize,
    seed: u64,
) -> Result<f64> {
    let n = chain.n_states();
    check_table(f, n)?;
    family.validate(n)?;
    let bound = match family {
        RiskFamily::WorstCase => f64::INFINITY,
        RiskFamily::AverageValueAtRisk { lambda } => 1.0 / lambda,
        other => {
            return Err(Error::Unsupported(format!(
                "no indicator penalty for family `{}`",
                other.name()
            )))
        }
    };
    let risk: Vec<f64> = (0..n)
        .map(|x| {
            let law = one_step_law(chain, x, &f[x])?;
            match family {
                RiskFamily::AverageValueAtRisk { lambda } => average_value_at_risk(&law, *lambda),
                _ => Ok(worst_case_risk(&law)),
            }
        })
        .collect::<Result<_>>()?;
    let per_sample: Vec<f64> = (0..n_samples)
        .into_par_iter()
        .map(|i| {
            let d = sampled_densities(chain, seed, i);
            (0..n)
                .map(|x| {
                    let row = clamp_density(&d[x], bound);
                    let e: f64 = (0..n).map(|y| row[y] * chain.prob(x, y) * f[x][y]).sum();
                    e - risk[x]
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect();
    Ok(per_sample.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// Mixes `d` with the constant density 1 so that its maximum does not exceed `bound`.
fn clamp_density(d: &[f64], bound: f64) -> Vec<f64> {
    let top = d.iter().copied().fold(0.0, f64::max);
    if top <= bound {
        return d.to_vec();
    }
    let s = (bound - 1.0) / (top - 1.0);
    d.iter()
        .map(|&v| if v > 0.0 { 1.0 + s * (v - 1.0) } else { 0.0 })
        .collect()
}

fn check_table(f: &[Vec<f64>], n: usize) -> Result<()> {
    if f.len() != n || f.iter().any(|r| r.len() != n) {
        return Err(Error::Malformed(format!("f must be a {n}x{n} table")));
    }
    if f.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("f has a non-finite entry".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fair() -> Chain {
        Chain::new(vec![vec![0.5, 0.5], vec![0.5, 0.5]]).unwrap()
    }

    fn f_next() -> Vec<Vec<f64>> {
        vec![vec![0.0, 1.0], vec![0.0, 1.0]]
    }

    #[test]
    fn identity_density_has_zero_penalty() {
        let c = fair();
        let q = KernelDensity::identity(&c);
        assert_eq!(entropic_penalty(&c, 0, &q, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn penalty_is_relative_entropy() {
        let c = fair();
        let e = 1f64.exp();
        let q = [1.0 / (1.0 + e), e / (1.0 + e)];
        let d = vec![vec![2.0 * q[0], 2.0 * q[1]], vec![1.0, 1.0]];
        let kd = KernelDensity::new(&c, d).unwrap();
        let kl: f64 = q.iter().map(|&qi| qi * (qi / 0.5).ln()).sum();
        let p1 = entropic_penalty(&c, 0, &kd, 1.0).unwrap();
        assert!((p1 - kl).abs() < 1e-15);
        assert!((p1 - 0.110944).abs() < 1e-6);
        let p2 = entropic_penalty(&c, 0, &kd, 2.0).unwrap();
        assert!((p2 - p1 / 2.0).abs() < 1e-16);
    }

    #[test]
    fn optimal_kernel_values() {
        let c = fair();
        let zero = vec![vec![0.0; 2]; 2];
        assert_eq!(entropic_optimal_kernel(&c, 0, &zero, 3.0).unwrap(), vec![1.0, 1.0]);
        let d = entropic_optimal_kernel(&c, 0, &f_next(), 1.0).unwrap();
        let e = 1f64.exp();
        assert!((d[1] * 0.5 - e / (1.0 + e)).abs() < 1e-15);
        assert!((d[1] * 0.5 - 0.731059).abs() < 1e-6);
        let v = penalised_value(&c, 0, &f_next()[0], &d, 1.0);
        assert!((v - ((1.0 + e) / 2.0).ln()).abs() < 1e-15);
    }

    #[test]
    fn gap_report_on_fair_chain() {
        let c = fair();
        let r = dual_gap(&c, &[1.0, 1.0], &f_next(), 1000, 5).unwrap();
        assert!(r.gap_at_qop <= 1e-9);
        assert!(r.max_violation <= 1e-9);
        for s in &r.states {
            assert!((s.risk - 0.620115).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_f_attains_at_reference_kernel() {
        let c = fair();
        let f = vec![vec![2.0; 2]; 2];
        let r = dual_gap(&c, &[0.7, 1.3], &f, 200, 1).unwrap();
        assert!(r.max_violation <= 1e-12);
        assert!(r.gap_at_qop <= 1e-12);
    }

    #[test]
    fn rejects_mass_off_support() {
        let c = Chain::new(vec![vec![1.0, 0.0], vec![0.5, 0.5]]).unwrap();
        assert!(KernelDensity::new(&c, vec![vec![1.0, 0.5], vec![1.0, 1.0]]).is_err());
        assert!(KernelDensity::new(&c, vec![vec![1.0, 0.0], vec![1.5, 0.5]]).is_ok());
    }

    #[test]
    fn indicator_penalties_dominate() {
        let c = Chain::new(vec![vec![0.2, 0.8], vec![0.6, 0.4]]).unwrap();
        let f = vec![vec![1.0, -2.0], vec![3.0, 0.5]];
        for fam in [RiskFamily::WorstCase, RiskFamily::AverageValueAtRisk { lambda: 0.3 }] {
            assert!(dual_domination(&fam, &c, &f, 500, 9).unwrap() <= 1e-12);
        }
        assert!(dual_domination(&RiskFamily::Expectation, &c, &f, 10, 0).is_err());
    }
}
