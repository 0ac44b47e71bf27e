//! Exhaustive checks of the structural properties of an update rule on a finite chain.
//!
//! Every check returns the largest absolute discrepancy over positive-probability prefixes,
//! together with the prefix that attains it.

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{positive_prefixes, Chain, PathFunctional, StoppingRule};
use crate::random;
use crate::risk::{
    conditional_functional, conditional_law, conditional_risk, conditional_risk_by_ratio,
    RiskFamily,
};

/// Outcome of a property check; `pass` holds iff `max_discrepancy <= tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PropertyReport {
    pub property: String,
    pub family: String,
    pub chain_digest: String,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub witness: Option<Witness>,
    pub pass: bool,
}

/// Where the largest discrepancy was seen, and the two sides compared there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub prefix: Vec<usize>,
    pub left: f64,
    pub right: f64,
    /// Constant added to the functional, for the acceptance-set check.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub offset: Option<f64>,
}

impl PropertyReport {
    pub(crate) fn from_rows(
        property: &str,
        family: &RiskFamily,
        chain: &Chain,
        tolerance: f64,
        rows: Vec<(Vec<usize>, f64, f64)>,
    ) -> Self {
        Self::from_named_rows(property, family.name(), chain.digest(), tolerance, rows)
    }

    /// Report over `(prefix, left, right)` rows; the first row attaining the maximum is kept.
    pub(crate) fn from_named_rows(
        property: &str,
        family: &str,
        digest: String,
        tolerance: f64,
        rows: Vec<(Vec<usize>, f64, f64)>,
    ) -> Self {
        let mut max = 0.0;
        let mut witness = None;
        for (prefix, left, right) in rows {
            let d = (left - right).abs();
            if witness.is_none() || d > max {
                max = d;
                witness = Some(Witness {
                    prefix,
                    left,
                    right,
                    offset: None,
                });
            }
        }
        Self {
            property: property.to_string(),
            family: family.to_string(),
            chain_digest: digest,
            max_discrepancy: max,
            tolerance,
            witness,
            pass: max <= tolerance,
        }
    }
}

fn evaluate_rows(
    prefixes: Vec<Vec<usize>>,
    f: impl Fn(&[usize]) -> Result<(f64, f64)> + Sync,
) -> Result<Vec<(Vec<usize>, f64, f64)>> {
    prefixes
        .into_par_iter()
        .map(|p| {
            let (l, r) = f(&p)?;
            Ok((p, l, r))
        })
        .collect()
}

fn require(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::Malformed(msg()))
    }
}

/// `ρ^x(Z)` with `x` the initial state, from the law of `Z` under `P^x`.
fn static_value(family: &RiskFamily, chain: &Chain, z: &PathFunctional, x: usize) -> Result<f64> {
    family.static_risk(x, &conditional_law(chain, z, &[x])?)
}

/// Compares `ρ^{x_0}_t(Z ∘ θ_t)` with `ρ^{x_t}(Z)` on every positive prefix `(x_0, ..., x_t)`.
/// The left side conditions the joint path law from `x_0` on the prefix; the right side uses
/// the law of `Z` under `P^{x_t}`.
pub fn check_markov(
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    t: usize,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    check_markov_named("markov", family, chain, z, t, horizon, tolerance)
}

fn check_markov_named(
    property: &str,
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    t: usize,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    require(z.horizon() + t <= horizon, || {
        format!("hz(Z) + t = {} exceeds horizon {horizon}", z.horizon() + t)
    })?;
    let shifted = z.shift(t);
    let right: Vec<f64> = (0..chain.n_states())
        .map(|x| static_value(family, chain, z, x))
        .collect::<Result<_>>()?;
    let rows = evaluate_rows(positive_prefixes(chain, t), |p| {
        let left = conditional_risk_by_ratio(family, chain, &shifted, p, horizon)?;
        Ok((left, right[p[t]]))
    })?;
    Ok(PropertyReport::from_rows(property, family, chain, tolerance, rows))
}

/// Markov check for `Z = f(X_0, ..., X_k)`, where `f` has horizon `k`.
pub fn check_k_step(
    family: &RiskFamily,
    chain: &Chain,
    f: &PathFunctional,
    t: usize,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    check_markov_named("k_step_markov", family, chain, f, t, horizon, tolerance)
}

/// Compares `ρ_τ(Z_τ ∘ θ_τ)` with `g(τ, X_τ) = ρ^{X_τ}(Z_τ)` on every prefix at which `rule`
/// stops. The left side is evaluated on the single random variable `W = Z_τ ∘ θ_τ`.
pub fn check_strong_markov(
    family: &RiskFamily,
    chain: &Chain,
    z_seq: &[PathFunctional],
    rule: &StoppingRule,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    let stop_horizon = rule.horizon();
    require(z_seq.len() > stop_horizon, || {
        format!("need Z_0..Z_{stop_horizon}, got {} functionals", z_seq.len())
    })?;
    let max_hz = z_seq.iter().map(PathFunctional::horizon).max().unwrap_or(0);
    require(stop_horizon + max_hz <= horizon, || {
        format!("rule horizon + max hz = {} exceeds {horizon}", stop_horizon + max_hz)
    })?;
    let n = chain.n_states();
    let w = PathFunctional::from_fn(n, horizon, |path| {
        let tau = rule.stopping_index(path);
        z_seq[tau].eval(&path[tau..])
    })?;
    let g: Vec<Vec<f64>> = z_seq[..=stop_horizon]
        .iter()
        .map(|z| (0..n).map(|x| static_value(family, chain, z, x)).collect())
        .collect::<Result<_>>()?;
    let prefixes: Vec<Vec<usize>> = (0..=stop_horizon)
        .flat_map(|t| positive_prefixes(chain, t))
        .filter(|p| p[0] == rule.initial() && rule.stops_exactly_at(p))
        .collect();
    let rows = evaluate_rows(prefixes, |p| {
        let t = p.len() - 1;
        let left = conditional_risk(family, chain, &w, p, horizon)?;
        Ok((left, g[t][p[t]]))
    })?;
    Ok(PropertyReport::from_rows("strong_markov", family, chain, tolerance, rows))
}

/// Compares `ρ_s(Z)` with `ρ_s(ρ_t(Z))` on every positive prefix of length `s + 1`.
pub fn check_time_consistency(
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    s: usize,
    t: usize,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    require(s <= t && t <= horizon && z.horizon() <= horizon, || {
        format!("need s <= t <= T and hz(Z) <= T (s={s}, t={t}, T={horizon})")
    })?;
    let inner = conditional_functional(family, chain, z, t)?;
    let rows = evaluate_rows(positive_prefixes(chain, s), |p| {
        let left = conditional_risk(family, chain, z, p, horizon)?;
        let right = conditional_risk(family, chain, &inner, p, horizon)?;
        Ok((left, right))
    })?;
    Ok(PropertyReport::from_rows("time_consistency", family, chain, tolerance, rows))
}

/// Offsets added to the functional to probe the boundary `ρ = 0` of the acceptance sets.
pub const ACCEPTANCE_OFFSETS: [f64; 3] = [-1.0, 0.0, 1.0];

/// For each initial state and each offset `c`, compares membership of `(Z + c) ∘ θ_t` in the
/// time-`t` acceptance set with membership of `Z + c` in the set defined through `ρ^{X_t}`.
/// A value is accepted when it is at most `tolerance`. The discrepancy counts disagreements.
pub fn check_acceptance_sets(
    family: &RiskFamily,
    chain: &Chain,
    z: &PathFunctional,
    t: usize,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    require(z.horizon() + t <= horizon, || {
        format!("hz(Z) + t = {} exceeds horizon {horizon}", z.horizon() + t)
    })?;
    let n = chain.n_states();
    let prefixes = positive_prefixes(chain, t);
    let mut mismatches = 0usize;
    let mut witness = None;
    for c in ACCEPTANCE_OFFSETS {
        let zc = z.add_constant(c);
        let shifted = zc.shift(t);
        let left = evaluate_rows(prefixes.clone(), |p| {
            Ok((conditional_risk(family, chain, &shifted, p, horizon)?, 0.0))
        })?;
        let at_state: Vec<f64> = (0..n)
            .map(|x| static_value(family, chain, &zc, x))
            .collect::<Result<_>>()?;
        for x0 in 0..n {
            let mut worst_left = f64::NEG_INFINITY;
            let mut worst_right = f64::NEG_INFINITY;
            for (p, l, _) in left.iter().filter(|(p, _, _)| p[0] == x0) {
                worst_left = worst_left.max(*l);
                worst_right = worst_right.max(at_state[p[t]]);
            }
            let in_left = worst_left <= tolerance;
            let in_right = worst_right <= tolerance;
            let w = Witness {
                prefix: vec![x0],
                left: worst_left,
                right: worst_right,
                offset: Some(c),
            };
            if in_left != in_right {
                if mismatches == 0 {
                    witness = Some(w);
                }
                mismatches += 1;
            } else if witness.is_none() {
                witness = Some(w);
            }
        }
    }
    let max = mismatches as f64;
    Ok(PropertyReport {
        property: "acceptance_sets".into(),
        family: family.name().into(),
        chain_digest: chain.digest(),
        max_discrepancy: max,
        tolerance,
        witness,
        pass: max <= tolerance,
    })
}

/// A two-state instance on which `ρ_0(Z) != ρ_0(ρ_1(Z))` for `Z = f(X_0, X_1, X_2)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InconsistencyWitness {
    pub instance: u64,
    pub kernel: Vec<Vec<f64>>,
    pub z_values: Vec<f64>,
    pub report: PropertyReport,
}

/// Scans seeded random two-state instances for a violation of `ρ_0 = ρ_0 ∘ ρ_1` larger than
/// `threshold`. Returns the first one in seed order, independent of the worker count.
pub fn search_time_inconsistency(
    family: &RiskFamily,
    seed: u64,
    instances: u64,
    threshold: f64,
) -> Result<Option<InconsistencyWitness>> {
    family.validate(2)?;
    let found = (0..instances).into_par_iter().find_map_first(|i| {
        let mut rng = random::substream(seed, i);
        let chain = random::random_chain(&mut rng, 2);
        let z = if rng.random::<bool>() {
            random::random_integer_functional(&mut rng, 2, 2)
        } else {
            random::random_functional(&mut rng, 2, 2)
        };
        match check_time_consistency(family, &chain, &z, 0, 1, 2, threshold) {
            Ok(report) if !report.pass => Some(Ok(InconsistencyWitness {
                instance: i,
                kernel: chain.kernel().to_vec(),
                z_values: z.values().to_vec(),
                report,
            })),
            Ok(_) => None,
            Err(e) => Some(Err(e)),
        }
    });
    found.transpose()
}
