//! Regular conditional risk mappings on finite laws and their per-prefix update rules.
//!
//! A family is evaluated "statically" on the law of `Z` under `P^x`. The update rule `ρ^x_t`
//! applies the same formula to the conditional law of `Z` given `(X_0, ..., X_t)`, with
//! state-dependent parameters read at `X_t`.

mod composite;
mod distribution;
pub mod expr;

use serde::Serialize;

pub use composite::CompositeSpec;
pub use distribution::FiniteDistribution;

use crate::error::{Error, Result};
use crate::model::{enumerate_paths, Chain, PathFunctional, Tuples, PROB_TOL};

/// The supported risk-mapping families and their parameters.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum RiskFamily {
    Expectation,
    Entropic { gamma: Vec<f64> },
    #[serde(rename = "semidev")]
    MeanSemiDeviation { kappa: Vec<f64>, p: u32 },
    WorstCase,
    #[serde(rename = "var")]
    ValueAtRisk { lambda: f64 },
    #[serde(rename = "avar")]
    AverageValueAtRisk { lambda: f64 },
    Composite(CompositeSpec),
}

impl RiskFamily {
    /// Short name used in reports and model files.
    pub fn name(&self) -> &'static str {
        match self {
            RiskFamily::Expectation => "expectation",
            RiskFamily::Entropic { .. } => "entropic",
            RiskFamily::MeanSemiDeviation { .. } => "semidev",
            RiskFamily::WorstCase => "worstcase",
            RiskFamily::ValueAtRisk { .. } => "var",
            RiskFamily::AverageValueAtRisk { .. } => "avar",
            RiskFamily::Composite(_) => "composite",
        }
    }

    /// Families whose update rule satisfies `ρ_s = ρ_s ∘ ρ_t`. The entropic rule qualifies only
    /// with a state-independent `γ`: nesting `1/γ(X_t) ln E[e^{γ(X_t) Z} | F_t]` under a different
    /// `γ(X_s)` changes the value.
    pub fn is_time_consistent(&self) -> bool {
        match self {
            RiskFamily::Expectation | RiskFamily::WorstCase => true,
            RiskFamily::Entropic { gamma } => gamma.windows(2).all(|w| w[0] == w[1]),
            _ => false,
        }
    }

    pub fn validate(&self, n_states: usize) -> Result<()> {
        let per_state = |name: &str, v: &[f64]| {
            if v.len() != n_states {
                Err(Error::ParameterOutOfRange(format!(
                    "{name} has {} entries, expected {n_states}",
                    v.len()
                )))
            } else {
                Ok(())
            }
        };
        match self {
            RiskFamily::Expectation | RiskFamily::WorstCase => Ok(()),
            RiskFamily::Entropic { gamma } => {
                per_state("gamma", gamma)?;
                gamma.iter().try_for_each(|&g| check_gamma(g))
            }
            RiskFamily::MeanSemiDeviation { kappa, p } => {
                per_state("kappa", kappa)?;
                kappa.iter().try_for_each(|&k| check_semidev(k, *p))
            }
            RiskFamily::ValueAtRisk { lambda } | RiskFamily::AverageValueAtRisk { lambda } => {
                check_lambda(*lambda)
            }
            RiskFamily::Composite(spec) => spec.validate(n_states),
        }
    }

    /// `ρ^x(Z)` where `dist` is the law of `Z` under `P^x`.
    pub fn static_risk(&self, x: usize, dist: &FiniteDistribution) -> Result<f64> {
        match self {
            RiskFamily::Expectation => Ok(dist.mean()),
            RiskFamily::Entropic { gamma } => entropic_risk(dist, param_at(gamma, x)?),
            RiskFamily::MeanSemiDeviation { kappa, p } => {
                mean_semideviation_risk(dist, param_at(kappa, x)?, *p)
            }
            RiskFamily::WorstCase => Ok(worst_case_risk(dist)),
            RiskFamily::ValueAtRisk { lambda } => value_at_risk(dist, *lambda),
            RiskFamily::AverageValueAtRisk { lambda } => average_value_at_risk(dist, *lambda),
            RiskFamily::Composite(spec) => spec.risk(x, dist),
        }
    }
}

fn param_at(v: &[f64], x: usize) -> Result<f64> {
    v.get(x).copied().ok_or_else(|| {
        Error::ParameterOutOfRange(format!("no parameter for state {x} ({} given)", v.len()))
    })
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma.is_finite() && gamma > 0.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("gamma = {gamma} must lie in (0, inf)")))
    }
}

fn check_semidev(kappa: f64, p: u32) -> Result<()> {
    if !(0.0..=1.0).contains(&kappa) {
        return Err(Error::ParameterOutOfRange(format!("kappa = {kappa} must lie in [0, 1]")));
    }
    if p < 1 {
        return Err(Error::ParameterOutOfRange(format!("p = {p} must be at least 1")));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda < 1.0 {
        Ok(())
    } else {
        Err(Error::ParameterOutOfRange(format!("lambda = {lambda} must lie in (0, 1)")))
    }
}

/// `(1/γ) ln E[e^{γZ}]`, evaluated as `max Z + (1/γ) ln E[e^{γ(Z - max Z)}]`.
pub fn entropic_risk(dist: &FiniteDistribution, gamma: f64) -> Result<f64> {
    check_gamma(gamma)?;
    let top = dist.max_value();
    let sum: f64 = dist
        .atoms()
        .iter()
        .map(|&(v, p)| p * (gamma * (v - top)).exp())
        .sum();
    Ok(top + sum.ln() / gamma)
}

/// `E[Z] + κ (E[((Z - E[Z])^+)^p])^{1/p}`.
pub fn mean_semideviation_risk(dist: &FiniteDistribution, kappa: f64, p: u32) -> Result<f64> {
    check_semidev(kappa, p)?;
    let mean = dist.mean();
    let moment: f64 = dist
        .atoms()
        .iter()
        .map(|&(v, q)| (v - mean).max(0.0).powf(p as f64) * q)
        .sum();
    Ok(mean + kappa * moment.powf(1.0 / p as f64))
}

/// Largest point of the support.
pub fn worst_case_risk(dist: &FiniteDistribution) -> f64 {
    dist.max_value()
}

/// `inf { m : P(Z > m) <= λ }`; ties at `P(Z > m) = λ` resolve to the smaller `m`.
pub fn value_at_risk(dist: &FiniteDistribution, lambda: f64) -> Result<f64> {
    check_lambda(lambda)?;
    let atoms = dist.atoms();
    let mut tails = vec![0.0; atoms.len()];
    for i in (0..atoms.len().saturating_sub(1)).rev() {
        tails[i] = tails[i + 1] + atoms[i + 1].1;
    }
    let i = tails
        .iter()
        .position(|&tail| tail <= lambda + PROB_TOL)
        .unwrap_or(atoms.len() - 1);
    Ok(atoms[i].0)
}

/// `VaR + (1/λ) E[(Z - VaR)^+]`.
pub fn average_value_at_risk(dist: &FiniteDistribution, lambda: f64) -> Result<f64> {
    let var = value_at_risk(dist, lambda)?;
    let excess: f64 = dist
        .atoms()
        .iter()
        .map(|&(v, p)| (v - var).max(0.0) * p)
        .sum();
    Ok(var + excess / lambda)
}

/// Law of `Z` given `(X_0, ..., X_t) = prefix`, each path weighted by the product of the kernel
/// entries after the prefix.
pub fn conditional_law(
    chain: &Chain,
    z: &PathFunctional,
    prefix: &[usize],
) -> Result<FiniteDistribution> {
    let horizon = z.horizon().max(prefix.len() - 1);
    let paths = enumerate_paths(chain, prefix, horizon)?;
    FiniteDistribution::new(paths.atoms.iter().map(|(path, p)| (z.eval(path), *p)))
}

/// Same law computed by disintegration: joint path masses from `x_0` up to `horizon`, restricted
/// to the prefix and divided by its mass.
pub fn conditional_law_by_ratio(
    chain: &Chain,
    z: &PathFunctional,
    prefix: &[usize],
    horizon: usize,
) -> Result<FiniteDistribution> {
    chain.check_prefix(prefix)?;
    let horizon = horizon.max(z.horizon()).max(prefix.len() - 1);
    let all = enumerate_paths(chain, &prefix[..1], horizon)?;
    let matching: Vec<(f64, f64)> = all
        .atoms
        .iter()
        .filter(|(path, _)| path.starts_with(prefix))
        .map(|(path, p)| (z.eval(path), *p))
        .collect();
    let mass: f64 = matching.iter().map(|(_, p)| p).sum();
    if mass <= 0.0 {
        return Err(Error::NullEvent(format!("prefix {prefix:?}")));
    }
    FiniteDistribution::new(matching.into_iter().map(|(v, p)| (v, p / mass)))
}

/// `ρ^{x_0}_t(Z)` on the prefix `(x_0, ..., x_t)`, with `hz(Z) <= horizon`.
pub fn conditional_risk(
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    prefix: &[usize],
    horizon: usize,
) -> Result<f64> {
    if z.horizon() > horizon || prefix.len() > horizon + 1 {
        return Err(Error::Malformed(format!(
            "functional horizon {} / prefix length {} exceed horizon {horizon}",
            z.horizon(),
            prefix.len()
        )));
    }
    let law = conditional_law(chain, z, prefix)?;
    family.static_risk(*prefix.last().expect("checked non-empty"), &law)
}

/// [`conditional_risk`] evaluated on the law from [`conditional_law_by_ratio`].
pub fn conditional_risk_by_ratio(
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    prefix: &[usize],
    horizon: usize,
) -> Result<f64> {
    let law = conditional_law_by_ratio(chain, z, prefix, horizon)?;
    family.static_risk(*prefix.last().expect("non-empty prefix"), &law)
}

/// `ρ_t(Z)` as an `F_t`-measurable functional. Null prefixes carry the value 0.
pub fn conditional_functional(
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    t: usize,
) -> Result<PathFunctional> {
    let values = Tuples::new(chain.n_states(), t + 1)
        .map(|prefix| {
            if chain.prefix_probability(&prefix) > 0.0 {
                let law = conditional_law(chain, z, &prefix)?;
                family.static_risk(prefix[t], &law)
            } else {
                Ok(0.0)
            }
        })
        .collect::<Result<Vec<_>>>()?;
    PathFunctional::from_values(chain.n_states(), t, values)
}

/// Law of `f(X_1)` under `P^x`.
pub fn one_step_law(chain: &Chain, x: usize, f: &[f64]) -> Result<FiniteDistribution> {
    FiniteDistribution::new(chain.successors(x).map(|(y, p)| (f[y], p)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bern() -> FiniteDistribution {
        FiniteDistribution::new([(0.0, 0.5), (1.0, 0.5)]).unwrap()
    }

    fn all_families() -> Vec<RiskFamily> {
        vec![
            RiskFamily::Expectation,
            RiskFamily::Entropic { gamma: vec![1.0, 0.5] },
            RiskFamily::MeanSemiDeviation { kappa: vec![1.0, 0.3], p: 2 },
            RiskFamily::WorstCase,
            RiskFamily::ValueAtRisk { lambda: 0.3 },
            RiskFamily::AverageValueAtRisk { lambda: 0.3 },
            RiskFamily::Composite(CompositeSpec::entropic(vec![1.0, 2.0])),
        ]
    }

    #[test]
    fn normalisation_and_constants() {
        for f in all_families() {
            assert_eq!(f.static_risk(0, &FiniteDistribution::point(0.0)).unwrap(), 0.0);
            let c = f.static_risk(1, &FiniteDistribution::point(3.25)).unwrap();
            assert!((c - 3.25).abs() < 1e-12, "{}: {c}", f.name());
        }
    }

    #[test]
    fn entropic_values() {
        let expected = ((1.0 + 1f64.exp()) / 2.0).ln();
        assert!((entropic_risk(&bern(), 1.0).unwrap() - expected).abs() < 1e-15);
        assert!((expected - 0.620115).abs() < 1e-6);
        assert_eq!(entropic_risk(&FiniteDistribution::point(5.0), 2.0).unwrap(), 5.0);
        let g = 50.0;
        let large = entropic_risk(&bern(), g).unwrap();
        let closed = ((1.0 + g.exp()) / 2.0).ln() / g;
        assert!((large - closed).abs() < 1e-12);
        assert!((large - 1.0).abs() < 0.02);
        assert!(entropic_risk(&bern(), 0.0).is_err());
    }

    #[test]
    fn semideviation_values() {
        let d = FiniteDistribution::new([(0.0, 0.25), (4.0, 0.75)]).unwrap();
        assert_eq!(mean_semideviation_risk(&d, 0.0, 3).unwrap(), d.mean());
        assert!((mean_semideviation_risk(&bern(), 1.0, 1).unwrap() - 0.75).abs() < 1e-15);
        let v = mean_semideviation_risk(&bern(), 1.0, 2).unwrap();
        assert!((v - (0.5 + 0.125f64.sqrt())).abs() < 1e-15);
        assert!((v - 0.853553).abs() < 1e-6);
        assert!(mean_semideviation_risk(&bern(), 1.5, 1).is_err());
    }

    #[test]
    fn worst_case_values() {
        let d = FiniteDistribution::new([(-1.0, 0.9), (3.0, 0.1)]).unwrap();
        assert_eq!(worst_case_risk(&d), 3.0);
    }

    #[test]
    fn var_values() {
        assert_eq!(value_at_risk(&bern(), 0.3).unwrap(), 1.0);
        assert_eq!(value_at_risk(&bern(), 0.5).unwrap(), 0.0);
        assert_eq!(value_at_risk(&FiniteDistribution::point(-2.0), 0.7).unwrap(), -2.0);
        assert!(value_at_risk(&bern(), 1.0).is_err());
        assert!(value_at_risk(&bern(), 0.0).is_err());
    }

    #[test]
    fn avar_values() {
        assert_eq!(average_value_at_risk(&bern(), 0.5).unwrap(), 1.0);
        assert_eq!(average_value_at_risk(&FiniteDistribution::point(4.0), 0.2).unwrap(), 4.0);
        let d = FiniteDistribution::new([(-1.0, 0.2), (0.5, 0.3), (2.0, 0.5)]).unwrap();
        let near_one = average_value_at_risk(&d, 1.0 - 1e-9).unwrap();
        assert!((near_one - d.mean()).abs() < 1e-6);
    }

    #[test]
    fn composite_reduces_to_dedicated_operations() {
        let lin = CompositeSpec::parse(&["z"], Default::default()).unwrap();
        let d = FiniteDistribution::new([(0.0, 0.5), (2.0, 0.5)]).unwrap();
        assert_eq!(lin.risk(0, &d).unwrap(), 1.0);

        let ent = CompositeSpec::entropic(vec![1.0]);
        let expected = entropic_risk(&bern(), 1.0).unwrap();
        assert!((ent.risk(0, &bern()).unwrap() - expected).abs() < 1e-12);

        let sd = CompositeSpec::mean_semideviation(vec![1.0], 1);
        assert!((sd.risk(0, &bern()).unwrap() - 0.75).abs() < 1e-12);
        let sd2 = CompositeSpec::mean_semideviation(vec![1.0], 2);
        let expected = mean_semideviation_risk(&bern(), 1.0, 2).unwrap();
        assert!((sd2.risk(0, &bern()).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn composite_non_finite_is_an_error() {
        let bad = CompositeSpec::parse(&["z", "ln(r - 1)"], Default::default()).unwrap();
        assert!(matches!(bad.risk(0, &bern()), Err(Error::NonFinite(_))));
    }

    #[test]
    fn validation() {
        assert!(RiskFamily::Entropic { gamma: vec![1.0] }.validate(2).is_err());
        assert!(RiskFamily::Entropic { gamma: vec![1.0, -1.0] }.validate(2).is_err());
        assert!(RiskFamily::ValueAtRisk { lambda: 1.2 }.validate(2).is_err());
        assert!(RiskFamily::MeanSemiDeviation { kappa: vec![0.5], p: 0 }.validate(1).is_err());
        for f in all_families() {
            f.validate(2).unwrap();
        }
    }

    fn chain() -> Chain {
        Chain::new(vec![vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap()
    }

    #[test]
    fn worst_case_of_next_state() {
        let z = PathFunctional::coordinate(1, &[0.0, 1.0]).unwrap();
        let v = conditional_risk(&RiskFamily::WorstCase, &chain(), &z, &[0], 1).unwrap();
        assert_eq!(v, 1.0);
        let z2 = PathFunctional::coordinate(2, &[0.0, 1.0]).unwrap();
        let v = conditional_risk(&RiskFamily::WorstCase, &chain(), &z2, &[0, 1], 2).unwrap();
        assert_eq!(v, 1.0);
    }

    #[test]
    fn anchored_at_time_zero() {
        let c = chain();
        let z = PathFunctional::from_fn(2, 2, |t| (t[0] + 2 * t[1] + 3 * t[2]) as f64).unwrap();
        for f in all_families() {
            for x in 0..2 {
                let law = conditional_law(&c, &z, &[x]).unwrap();
                assert_eq!(
                    conditional_risk(&f, &c, &z, &[x], 2).unwrap(),
                    f.static_risk(x, &law).unwrap()
                );
            }
        }
    }

    #[test]
    fn measurable_functional_returns_itself() {
        let c = chain();
        let z = PathFunctional::from_fn(2, 1, |t| 1.5 * t[0] as f64 - t[1] as f64).unwrap();
        for f in all_families() {
            for prefix in [[0, 0, 1], [1, 1, 0], [0, 1, 1]] {
                let v = conditional_risk(&f, &c, &z, &prefix, 2).unwrap();
                assert!((v - z.eval(&prefix)).abs() < 1e-12, "{}", f.name());
            }
        }
    }

    #[test]
    fn ratio_route_agrees_with_suffix_route() {
        let c = Chain::new(vec![
            vec![0.2, 0.5, 0.3],
            vec![0.1, 0.1, 0.8],
            vec![0.6, 0.3, 0.1],
        ])
        .unwrap();
        let z = PathFunctional::from_fn(3, 3, |t| (t[1] * t[3]) as f64 - t[2] as f64).unwrap();
        for prefix in crate::model::positive_prefixes(&c, 1) {
            let a = conditional_law(&c, &z, &prefix).unwrap();
            let b = conditional_law_by_ratio(&c, &z, &prefix, 3).unwrap();
            assert_eq!(a.atoms().len(), b.atoms().len());
            for (x, y) in a.atoms().iter().zip(b.atoms()) {
                assert_eq!(x.0, y.0);
                assert!((x.1 - y.1).abs() < 1e-14);
            }
        }
    }
}
