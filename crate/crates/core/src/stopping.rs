//! Risk-sensitive optimal stopping with running costs: backward induction, an exhaustive
//! oracle over adapted rules, and the reduction of a deterministic exercise lag.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{
    positive_prefixes, reachable_prefixes, Chain, PathFunctional, StoppingRule, StoppingRuleSpace,
};
use crate::risk::{
    conditional_functional, conditional_law, conditional_risk, one_step_law, FiniteDistribution,
    RiskFamily,
};
use crate::verify::PropertyReport;

/// Per-state cost tables: exercise cost `h`, running cost `c`, lagged exercise cost `g` and the
/// deterministic lag `d`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostSpec {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub g: Option<Vec<f64>>,
    pub lag: usize,
}

impl CostSpec {
    pub fn validate(&self, n_states: usize) -> Result<()> {
        let tables = [Some(&self.h), Some(&self.c), self.g.as_ref()];
        for (name, table) in ["h", "c", "g"].iter().zip(tables) {
            let Some(t) = table else { continue };
            check_table(name, t, n_states)?;
        }
        Ok(())
    }
}

fn check_table(name: &str, t: &[f64], n_states: usize) -> Result<()> {
    if t.len() != n_states {
        return Err(Error::Malformed(format!(
            "cost table `{name}` has {} entries, expected {n_states}",
            t.len()
        )));
    }
    if t.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(format!("cost table `{name}`")));
    }
    Ok(())
}

/// `values[m][x] = V^m(x)` for `m = 0..=T`, and the stop region `stop[m][x]`, i.e. whether
/// `h(x)` attains the minimum with `m` steps to go.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueFunction {
    pub horizon: usize,
    pub values: Vec<Vec<f64>>,
    pub stop: Vec<Vec<bool>>,
}

impl ValueFunction {
    /// First-entry rule from `initial`: stop at time `t` iff `stop[T - t][x_t]`.
    pub fn optimal_rule(&self, chain: &Chain, initial: usize) -> Result<StoppingRule> {
        let horizon = self.horizon;
        StoppingRule::from_fn(chain, initial, horizon, |p| {
            let t = p.len() - 1;
            self.stop[horizon - t][p[t]]
        })
    }

    /// `V^T`.
    pub fn value(&self) -> &[f64] {
        &self.values[self.horizon]
    }
}

/// `ρ_{t,τ}(c(X_t), ..., c(X_{τ-1}), h(X_τ))` on `prefix = (x_0, ..., x_t)`:
/// 0 if the rule stopped before `t`, `h(x_t)` if it stops at `t`, and otherwise
/// `ρ_t(c(X_t) + ρ_{t+1,τ}(...))`.
pub fn aggregated_risk(
    family: &RiskFamily,
    chain: &Chain,
    prefix: &[usize],
    c: &[f64],
    h: &[f64],
    rule: &StoppingRule,
    horizon: usize,
) -> Result<f64> {
    aggregated_risk_with(family, chain, prefix, c, rule, horizon, &|p: &[usize]| {
        Ok(h[p[p.len() - 1]])
    })
}

/// [`aggregated_risk`] with the value at the stopping time supplied by `terminal(prefix)`,
/// which must be the time-`τ` conditional risk of the terminal cost.
pub fn aggregated_risk_with(
    family: &RiskFamily,
    chain: &Chain,
    prefix: &[usize],
    c: &[f64],
    rule: &StoppingRule,
    horizon: usize,
    terminal: &(dyn Fn(&[usize]) -> Result<f64> + Sync),
) -> Result<f64> {
    chain.check_prefix(prefix)?;
    if prefix[0] != rule.initial() {
        return Err(Error::Malformed(format!(
            "prefix starts at {} but the rule starts at {}",
            prefix[0],
            rule.initial()
        )));
    }
    if rule.horizon() > horizon || prefix.len() > rule.horizon() + 1 {
        return Err(Error::Malformed(format!(
            "rule horizon {} / prefix length {} incompatible with horizon {horizon}",
            rule.horizon(),
            prefix.len()
        )));
    }
    let t = prefix.len() - 1;
    if (0..t).any(|s| rule.stops_at(&prefix[..=s])) {
        return Ok(0.0);
    }
    nested(family, chain, &mut prefix.to_vec(), c, rule, terminal)
}

fn nested(
    family: &RiskFamily,
    chain: &Chain,
    prefix: &mut Vec<usize>,
    c: &[f64],
    rule: &StoppingRule,
    terminal: &(dyn Fn(&[usize]) -> Result<f64> + Sync),
) -> Result<f64> {
    let x = prefix[prefix.len() - 1];
    if rule.stops_at(prefix) {
        let v = terminal(prefix)?;
        return family.static_risk(x, &FiniteDistribution::point(v));
    }
    let mut atoms = Vec::new();
    for (y, p) in chain.successors(x) {
        prefix.push(y);
        let child = nested(family, chain, prefix, c, rule, terminal)?;
        prefix.pop();
        atoms.push((c[x] + child, p));
    }
    family.static_risk(x, &FiniteDistribution::new(atoms)?)
}

/// `V^0 = h`, `V^m(x) = min(h(x), c(x) + ρ^x(V^{m-1}(X_1)))`; ties stop.
pub fn wald_bellman(
    family: &RiskFamily,
    chain: &Chain,
    c: &[f64],
    h: &[f64],
    horizon: usize,
) -> Result<ValueFunction> {
    let n = chain.n_states();
    check_table("c", c, n)?;
    check_table("h", h, n)?;
    family.validate(n)?;
    let mut values = vec![h.to_vec()];
    let mut stop = vec![vec![true; n]];
    for m in 1..=horizon {
        let prev = &values[m - 1];
        let layer: Vec<(f64, bool)> = (0..n)
            .into_par_iter()
            .map(|x| {
                let cont = c[x] + family.static_risk(x, &one_step_law(chain, x, prev)?)?;
                Ok(if h[x] <= cont { (h[x], true) } else { (cont, false) })
            })
            .collect::<Result<_>>()?;
        values.push(layer.iter().map(|l| l.0).collect());
        stop.push(layer.iter().map(|l| l.1).collect());
    }
    Ok(ValueFunction {
        horizon,
        values,
        stop,
    })
}

/// Minimum of the nested objective over every adapted rule from `initial`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleValue {
    pub initial: usize,
    pub value: f64,
    pub rules: usize,
    pub argmin: StoppingRule,
}

/// Exhaustive minimum of [`aggregated_risk`] at `(initial)` over all adapted rules.
pub fn oracle_optimal_value(
    family: &RiskFamily,
    chain: &Chain,
    c: &[f64],
    h: &[f64],
    initial: usize,
    horizon: usize,
    cap: u128,
) -> Result<OracleValue> {
    let terminal = |p: &[usize]| Ok(h[p[p.len() - 1]]);
    oracle_with(family, chain, c, initial, horizon, cap, &terminal)
}

fn oracle_with(
    family: &RiskFamily,
    chain: &Chain,
    c: &[f64],
    initial: usize,
    horizon: usize,
    cap: u128,
    terminal: &(dyn Fn(&[usize]) -> Result<f64> + Sync),
) -> Result<OracleValue> {
    let space = StoppingRuleSpace::new(chain, initial, horizon, cap)?;
    let values: Vec<f64> = (0..space.len())
        .into_par_iter()
        .map(|i| {
            let rule = space.rule(i);
            aggregated_risk_with(family, chain, &[initial], c, &rule, horizon, terminal)
        })
        .collect::<Result<_>>()?;
    let (best, value) = values
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    Ok(OracleValue {
        initial,
        value,
        rules: space.len(),
        argmin: space.rule(best),
    })
}

/// `h(x) = ρ^x(g(X_d))`.
pub fn lag_reduce(family: &RiskFamily, chain: &Chain, g: &[f64], d: usize) -> Result<Vec<f64>> {
    let n = chain.n_states();
    check_table("g", g, n)?;
    let z = PathFunctional::coordinate(d, g)?;
    (0..n)
        .map(|x| family.static_risk(x, &conditional_law(chain, &z, &[x])?))
        .collect()
}

/// Lagged problem solved through the reduced exercise cost, with an optional brute-force
/// value per initial state.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LagSolution {
    pub lag: usize,
    pub h: Vec<f64>,
    pub value_function: ValueFunction,
    pub brute_force: Option<Vec<f64>>,
    pub max_gap: Option<f64>,
}

/// Solves `inf_τ ρ_{0,τ}(c(X_0), ..., c(X_{τ-1}), g(X_{τ+d}))` by reducing the lag and running
/// [`wald_bellman`]. When `cross_check` is set, every adapted rule is also evaluated on the
/// lagged objective directly, with `ρ_τ(g(X_{τ+d}))` computed from the conditional path law.
#[allow(clippy::too_many_arguments)]
pub fn solve_with_lag(
    family: &RiskFamily,
    chain: &Chain,
    c: &[f64],
    g: &[f64],
    d: usize,
    horizon: usize,
    cross_check: bool,
    cap: u128,
) -> Result<LagSolution> {
    if !family.is_time_consistent() {
        return Err(Error::NotTimeConsistent(family.name().to_string()));
    }
    let h = lag_reduce(family, chain, g, d)?;
    let value_function = wald_bellman(family, chain, c, &h, horizon)?;
    let (brute_force, max_gap) = if cross_check {
        let brute = (0..chain.n_states())
            .map(|x| lagged_oracle_value(family, chain, c, g, d, x, horizon, cap))
            .collect::<Result<Vec<_>>>()?;
        let gap = brute
            .iter()
            .zip(value_function.value())
            .map(|(b, v)| (b - v).abs())
            .fold(0.0, f64::max);
        (Some(brute), Some(gap))
    } else {
        (None, None)
    };
    Ok(LagSolution {
        lag: d,
        h,
        value_function,
        brute_force,
        max_gap,
    })
}

/// Exhaustive minimum of the lagged objective from `initial`.
#[allow(clippy::too_many_arguments)]
pub fn lagged_oracle_value(
    family: &RiskFamily,
    chain: &Chain,
    c: &[f64],
    g: &[f64],
    d: usize,
    initial: usize,
    horizon: usize,
    cap: u128,
) -> Result<f64> {
    check_table("g", g, chain.n_states())?;
    let mut spliced: HashMap<Vec<usize>, f64> = HashMap::new();
    for p in reachable_prefixes(chain, initial, horizon + 1) {
        let t = p.len() - 1;
        let z = PathFunctional::coordinate(t + d, g)?;
        let v = conditional_risk(family, chain, &z, &p, t + d)?;
        spliced.insert(p, v);
    }
    let terminal = |p: &[usize]| {
        spliced
            .get(p)
            .copied()
            .ok_or_else(|| Error::NullEvent(format!("prefix {p:?}")))
    };
    Ok(oracle_with(family, chain, c, initial, horizon, cap, &terminal)?.value)
}

/// `ρ_{s,s+m}(Z_s, ..., Z_{s+m})` as a functional of `(X_0, ..., X_s)`, where `zs[r]` is the
/// term at time `s + r`.
pub fn aggregated_functional(
    family: &RiskFamily,
    chain: &Chain,
    zs: &[PathFunctional],
    s: usize,
) -> Result<PathFunctional> {
    let (last, rest) = zs
        .split_last()
        .ok_or_else(|| Error::Malformed("no terms to aggregate".into()))?;
    let mut acc = conditional_functional(family, chain, last, s + rest.len())?;
    for (r, z) in rest.iter().enumerate().rev() {
        acc = conditional_functional(family, chain, &z.add(&acc), s + r)?;
    }
    Ok(acc)
}

/// Compares `ρ_{s,t}(Z_s, ..., Z_t) ∘ θ_k` with `ρ_{s+k,t+k}(Z_s ∘ θ_k, ..., Z_t ∘ θ_k)` on every
/// positive prefix of length `s + k + 1`. `zs` holds `Z_s, ..., Z_t`.
#[allow(clippy::too_many_arguments)]
pub fn check_shift_covariance(
    family: &RiskFamily,
    chain: &Chain,
    zs: &[PathFunctional],
    s: usize,
    k: usize,
    horizon: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    let max_hz = zs.iter().map(PathFunctional::horizon).max().unwrap_or(0);
    if max_hz + k > horizon || s + zs.len() + k > horizon + 1 {
        return Err(Error::Malformed(format!(
            "terms up to time {} with hz {max_hz} and shift {k} exceed horizon {horizon}",
            s + zs.len().saturating_sub(1)
        )));
    }
    let left = aggregated_functional(family, chain, zs, s)?.shift(k);
    let shifted: Vec<PathFunctional> = zs.iter().map(|z| z.shift(k)).collect();
    let right = aggregated_functional(family, chain, &shifted, s + k)?;
    let rows: Vec<(Vec<usize>, f64, f64)> = positive_prefixes(chain, s + k)
        .into_iter()
        .map(|p| {
            let (l, r) = (left.eval(&p), right.eval(&p));
            (p, l, r)
        })
        .collect();
    Ok(PropertyReport::from_rows("shift_covariance", family, chain, tolerance, rows))
}
