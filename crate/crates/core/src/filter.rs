//! Stopping under partial observation: an observed chain `Y` whose kernel depends on a hidden
//! constant parameter `Ξ` with finite support.
//!
//! Two dynamic programs are provided. [`history_dp`] works on observation histories and
//! computes every conditional law directly from the joint mixture. [`belief_dp`] works on
//! `(y, ν)` nodes reached through the Bayes recursion.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{hex_string, PROB_TOL};
use crate::risk::CompositeSpec;
use crate::verify::PropertyReport;

/// Entries of a belief above `-BELIEF_CLAMP` and below zero are rounding noise.
const BELIEF_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct POModel {
    obs_labels: Vec<String>,
    param_labels: Vec<String>,
    /// `kernels[ξ][y][y'] = q^Y_ξ(y'|y)`.
    kernels: Vec<Vec<Vec<f64>>>,
    /// `prior[y_0][ξ]`.
    prior: Vec<Vec<f64>>,
    /// `h[y][ξ]`.
    h: Vec<Vec<f64>>,
    risk: CompositeSpec,
    horizon: usize,
}

impl POModel {
    pub fn new(
        obs_labels: Vec<String>,
        param_labels: Vec<String>,
        kernels: Vec<Vec<Vec<f64>>>,
        prior: Vec<Vec<f64>>,
        h: Vec<Vec<f64>>,
        risk: CompositeSpec,
        horizon: usize,
    ) -> Result<Self> {
        let ny = obs_labels.len();
        let nx = param_labels.len();
        if ny == 0 || nx == 0 {
            return Err(Error::Malformed("empty observation or parameter set".into()));
        }
        if kernels.len() != nx {
            return Err(Error::Malformed(format!(
                "{} kernels for {nx} parameter values",
                kernels.len()
            )));
        }
        for (xi, k) in kernels.iter().enumerate() {
            if k.len() != ny || k.iter().any(|r| r.len() != ny) {
                return Err(Error::Malformed(format!("kernel {xi} must be {ny}x{ny}")));
            }
            for (row, r) in k.iter().enumerate() {
                check_probabilities(r).map_err(|sum| match sum {
                    Some(sum) => Error::NonStochasticRow { row, sum },
                    None => Error::Malformed(format!("kernel {xi} row {row} has a bad entry")),
                })?;
            }
        }
        if prior.len() != ny || prior.iter().any(|p| p.len() != nx) {
            return Err(Error::Malformed(format!("prior must be {ny}x{nx}")));
        }
        for (y, p) in prior.iter().enumerate() {
            check_probabilities(p)
                .map_err(|_| Error::Malformed(format!("prior for observation {y} is not a law")))?;
        }
        if h.len() != ny || h.iter().any(|r| r.len() != nx) {
            return Err(Error::Malformed(format!("cost table must be {ny}x{nx}")));
        }
        if h.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("cost table".into()));
        }
        risk.validate(ny)?;
        Ok(Self {
            obs_labels,
            param_labels,
            kernels,
            prior,
            h,
            risk,
            horizon,
        })
    }

    pub fn n_obs(&self) -> usize {
        self.obs_labels.len()
    }

    pub fn n_params(&self) -> usize {
        self.param_labels.len()
    }

    pub fn obs_labels(&self) -> &[String] {
        &self.obs_labels
    }

    pub fn param_labels(&self) -> &[String] {
        &self.param_labels
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn risk(&self) -> &CompositeSpec {
        &self.risk
    }

    pub fn kernel(&self, xi: usize, y: usize, y_next: usize) -> f64 {
        self.kernels[xi][y][y_next]
    }

    pub fn prior(&self, y0: usize) -> &[f64] {
        &self.prior[y0]
    }

    pub fn cost(&self, y: usize, xi: usize) -> f64 {
        self.h[y][xi]
    }

    /// Hex SHA-256 over the dimensions and the bit patterns of every table.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_obs() as u64).to_le_bytes());
        hasher.update((self.n_params() as u64).to_le_bytes());
        hasher.update((self.horizon as u64).to_le_bytes());
        let tables = self
            .kernels
            .iter()
            .flatten()
            .chain(&self.prior)
            .chain(&self.h);
        for row in tables {
            for v in row {
                hasher.update(v.to_bits().to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }

    /// Mass of the hidden parameter jointly with the observed `history`: `prior · Π q_ξ`.
    fn joint(&self, history: &[usize]) -> Vec<f64> {
        (0..self.n_params())
            .map(|xi| {
                history
                    .windows(2)
                    .fold(self.prior[history[0]][xi], |m, w| m * self.kernels[xi][w[0]][w[1]])
            })
            .collect()
    }
}

/// `Err(Some(sum))` for a bad sum, `Err(None)` for a bad entry.
fn check_probabilities(v: &[f64]) -> std::result::Result<(), Option<f64>> {
    if v.iter().any(|p| !p.is_finite() || *p < 0.0 || *p > 1.0) {
        return Err(None);
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(Some(sum));
    }
    Ok(())
}

/// A probability vector over the parameter support.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Clamps entries in `[-1e-15, 0)` to zero and renormalises when the sum is within `1e-12`
    /// of one; anything else is rejected.
    pub fn new(mut weights: Vec<f64>) -> Result<Self> {
        for w in weights.iter_mut() {
            if !w.is_finite() || *w < -BELIEF_CLAMP {
                return Err(Error::Malformed(format!("belief entry {w}")));
            }
            if *w < 0.0 {
                *w = 0.0;
            }
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > PROB_TOL {
            return Err(Error::Malformed(format!("belief sums to {sum}")));
        }
        if sum != 1.0 {
            weights.iter_mut().for_each(|w| *w /= sum);
        }
        Ok(Self(weights))
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    fn key(&self) -> Vec<u64> {
        self.0.iter().map(|w| w.to_bits()).collect()
    }
}

/// Posterior after observing `y -> y_next`: weights proportional to `ν(ξ) q_ξ(y_next|y)`.
pub fn bayes_update(model: &POModel, belief: &Belief, y: usize, y_next: usize) -> Result<Belief> {
    let w: Vec<f64> = belief
        .0
        .iter()
        .enumerate()
        .map(|(xi, nu)| nu * model.kernel(xi, y, y_next))
        .collect();
    let mass: f64 = w.iter().sum();
    if mass <= 0.0 {
        return Err(Error::NullEvent(format!(
            "observation {y} -> {y_next} has zero predictive probability"
        )));
    }
    Belief::new(w.into_iter().map(|v| v / mass).collect())
}

/// `ν̄_t(.|y_{0:t})` by the Bayes recursion from the prior at `y_0`.
pub fn belief_recursion(model: &POModel, history: &[usize]) -> Result<Belief> {
    check_history(model, history)?;
    let mut nu = Belief::new(model.prior(history[0]).to_vec())?;
    for w in history.windows(2) {
        nu = bayes_update(model, &nu, w[0], w[1])?;
    }
    Ok(nu)
}

fn check_history(model: &POModel, history: &[usize]) -> Result<()> {
    if history.is_empty() || history.iter().any(|&y| y >= model.n_obs()) {
        return Err(Error::Malformed(format!("history {history:?}")));
    }
    Ok(())
}

/// `P(Ξ = .|Y_{0:t} = history)` from the joint masses of the mixture.
pub fn direct_posterior(model: &POModel, history: &[usize]) -> Result<Vec<f64>> {
    check_history(model, history)?;
    let joint = model.joint(history);
    let mass: f64 = joint.iter().sum();
    if mass <= 0.0 {
        return Err(Error::NullEvent(format!("history {history:?}")));
    }
    Ok(joint.into_iter().map(|j| j / mass).collect())
}

/// `P(Y_{t+1} = y'|Y_{0:t} = history)` from joint masses; zero entries mark pruned branches.
pub fn direct_predictive(model: &POModel, history: &[usize]) -> Result<Vec<f64>> {
    check_history(model, history)?;
    let mass: f64 = model.joint(history).iter().sum();
    if mass <= 0.0 {
        return Err(Error::NullEvent(format!("history {history:?}")));
    }
    let mut ext = history.to_vec();
    ext.push(0);
    Ok((0..model.n_obs())
        .map(|y| {
            *ext.last_mut().expect("non-empty") = y;
            model.joint(&ext).iter().sum::<f64>() / mass
        })
        .collect())
}

/// `Σ_ξ ν(ξ) q_ξ(y'|y)`.
pub fn belief_predictive(model: &POModel, y: usize, belief: &Belief) -> Vec<f64> {
    (0..model.n_obs())
        .map(|y_next| {
            belief
                .0
                .iter()
                .enumerate()
                .map(|(xi, nu)| nu * model.kernel(xi, y, y_next))
                .sum()
        })
        .collect()
}

/// `h̃_K(y, ν)`: the composite recursion on `ξ ↦ h(y, ξ)` under `ν`.
pub fn lift_cost(model: &POModel, y: usize, belief: &Belief) -> Result<f64> {
    let atoms: Vec<(f64, f64)> = belief
        .0
        .iter()
        .enumerate()
        .map(|(xi, &nu)| (model.cost(y, xi), nu))
        .collect();
    model.risk.risk_weighted(y, &atoms)
}

/// `ρ^{y_{0:t}}(h(Y_t, Ξ))` with the law of `Ξ` taken from the joint masses.
pub fn direct_history_cost(model: &POModel, history: &[usize]) -> Result<f64> {
    let y = history[history.len() - 1];
    let post = direct_posterior(model, history)?;
    let atoms: Vec<(f64, f64)> = post
        .iter()
        .enumerate()
        .map(|(xi, &p)| (model.cost(y, xi), p))
        .collect();
    model.risk.risk_weighted(y, &atoms)
}

fn composite_on(model: &POModel, y: usize, values: &[f64], probs: &[f64]) -> Result<f64> {
    let atoms: Vec<(f64, f64)> = values
        .iter()
        .zip(probs)
        .filter(|(_, &p)| p > 0.0)
        .map(|(&v, &p)| (v, p))
        .collect();
    model.risk.risk_weighted(y, &atoms)
}

fn check_cap(model: &POModel, cap: u128) -> Result<()> {
    let required = (model.n_obs() as u128)
        .checked_pow(model.horizon as u32 + 1)
        .unwrap_or(u128::MAX);
    if required > cap {
        return Err(Error::CapExceeded { required, cap });
    }
    Ok(())
}

/// `V^{T-t}` at one observation history, with whether stopping is optimal there.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HistoryValue {
    pub history: Vec<usize>,
    pub value: f64,
    pub stop: bool,
}

/// History-form backward induction: `V^0 = h_T` and
/// `V^{T-t}(y_{0:t}) = min(h_t(y_{0:t}), ρ^{y_{0:t}}(V^{T-t-1}(Y_{0:t+1})))`, where
/// `h_t(y_{0:t}) = ρ^{y_{0:t}}(h(Y_t, Ξ))`. Every predictive law and posterior is computed from
/// the joint masses. Histories are listed by length, then lexicographically.
pub fn history_dp(model: &POModel, cap: u128) -> Result<Vec<HistoryValue>> {
    check_cap(model, cap)?;
    let mut layers: Vec<Vec<Vec<usize>>> = vec![(0..model.n_obs()).map(|y| vec![y]).collect()];
    let mut predictive: Vec<Vec<Vec<f64>>> = Vec::new();
    for t in 0..model.horizon {
        let layer = &layers[t];
        let preds: Vec<Vec<f64>> = layer
            .iter()
            .map(|h| direct_predictive(model, h))
            .collect::<Result<_>>()?;
        let next = layer
            .iter()
            .zip(&preds)
            .flat_map(|(h, pred)| {
                pred.iter().enumerate().filter(|(_, &p)| p > 0.0).map(move |(y, _)| {
                    let mut e = h.clone();
                    e.push(y);
                    e
                })
            })
            .collect();
        predictive.push(preds);
        layers.push(next);
    }

    let mut values: BTreeMap<Vec<usize>, f64> = BTreeMap::new();
    let mut out: Vec<Vec<HistoryValue>> = vec![Vec::new(); model.horizon + 1];
    for t in (0..=model.horizon).rev() {
        let rows: Vec<HistoryValue> = layers[t]
            .par_iter()
            .enumerate()
            .map(|(i, h)| {
                let stop_cost = direct_history_cost(model, h)?;
                if t == model.horizon {
                    return Ok(HistoryValue {
                        history: h.clone(),
                        value: stop_cost,
                        stop: true,
                    });
                }
                let pred = &predictive[t][i];
                let mut ext = h.clone();
                ext.push(0);
                let next: Vec<f64> = (0..model.n_obs())
                    .map(|y| {
                        if pred[y] > 0.0 {
                            *ext.last_mut().expect("non-empty") = y;
                            values[&ext]
                        } else {
                            0.0
                        }
                    })
                    .collect();
                let cont = composite_on(model, h[t], &next, pred)?;
                let stop = stop_cost <= cont;
                Ok(HistoryValue {
                    history: h.clone(),
                    value: if stop { stop_cost } else { cont },
                    stop,
                })
            })
            .collect::<Result<_>>()?;
        for r in &rows {
            values.insert(r.history.clone(), r.value);
        }
        out[t] = rows;
    }
    Ok(out.into_iter().flatten().collect())
}

/// `Ṽ^{T-t}` at a reachable belief node.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BeliefNode {
    pub t: usize,
    pub y: usize,
    pub belief: Belief,
    pub value: f64,
    pub stop: bool,
}

type NodeKey = (usize, usize, Vec<u64>);

/// Belief-state backward induction on the nodes reachable from `(y_0, prior(y_0))`:
/// `Ṽ^0 = h̃` and `Ṽ^{T-t}(y, ν) = min(h̃(y, ν), ρ̃^{(y,ν)}(Ṽ^{T-t-1}(Y_1, ν_1)))` with
/// `Y_1 ~ Σ_ξ ν(ξ) q_ξ(.|y)` and `ν_1 = Φ(ν, y, Y_1)`. Nodes are listed by `t`, then by key.
pub fn belief_dp(model: &POModel, cap: u128) -> Result<Vec<BeliefNode>> {
    check_cap(model, cap)?;
    let mut layers: Vec<BTreeMap<NodeKey, Belief>> = Vec::new();
    let mut roots = BTreeMap::new();
    for y in 0..model.n_obs() {
        let nu = Belief::new(model.prior(y).to_vec())?;
        roots.insert((0, y, nu.key()), nu);
    }
    layers.push(roots);
    for t in 0..model.horizon {
        let mut next = BTreeMap::new();
        for ((_, y, _), nu) in &layers[t] {
            for (y_next, p) in belief_predictive(model, *y, nu).into_iter().enumerate() {
                if p > 0.0 {
                    let post = bayes_update(model, nu, *y, y_next)?;
                    next.insert((t + 1, y_next, post.key()), post);
                }
            }
        }
        layers.push(next);
    }

    let mut values: BTreeMap<NodeKey, f64> = BTreeMap::new();
    let mut out: Vec<Vec<BeliefNode>> = vec![Vec::new(); model.horizon + 1];
    for t in (0..=model.horizon).rev() {
        let rows: Vec<(NodeKey, BeliefNode)> = layers[t]
            .par_iter()
            .map(|(key, nu)| {
                let y = key.1;
                let stop_cost = lift_cost(model, y, nu)?;
                let (value, stop) = if t == model.horizon {
                    (stop_cost, true)
                } else {
                    let pred = belief_predictive(model, y, nu);
                    let next: Vec<f64> = (0..model.n_obs())
                        .map(|y_next| {
                            if pred[y_next] > 0.0 {
                                let post = bayes_update(model, nu, y, y_next)?;
                                Ok(values[&(t + 1, y_next, post.key())])
                            } else {
                                Ok(0.0)
                            }
                        })
                        .collect::<Result<_>>()?;
                    let cont = composite_on(model, y, &next, &pred)?;
                    if stop_cost <= cont {
                        (stop_cost, true)
                    } else {
                        (cont, false)
                    }
                };
                Ok((
                    key.clone(),
                    BeliefNode {
                        t,
                        y,
                        belief: nu.clone(),
                        value,
                        stop,
                    },
                ))
            })
            .collect::<Result<_>>()?;
        for (k, node) in rows {
            values.insert(k, node.value);
            out[t].push(node);
        }
    }
    Ok(out.into_iter().flatten().collect())
}

/// Both programs and the largest gap `|V^{T-t}(y_{0:t}) - Ṽ^{T-t}(y_t, ν̄_t)|` over histories.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FilterSolution {
    pub histories: Vec<HistoryValue>,
    pub belief_nodes: Vec<BeliefNode>,
    pub max_equivalence_gap: Option<f64>,
}

pub fn solve_filtered(model: &POModel, check_equivalence: bool, cap: u128) -> Result<FilterSolution> {
    let histories = history_dp(model, cap)?;
    let belief_nodes = belief_dp(model, cap)?;
    let max_equivalence_gap = if check_equivalence {
        Some(equivalence_gap(model, &histories, &belief_nodes)?)
    } else {
        None
    };
    Ok(FilterSolution {
        histories,
        belief_nodes,
        max_equivalence_gap,
    })
}

/// `max |V^{T-t}(y_{0:t}) - Ṽ^{T-t}(y_t, ν̄_t(y_{0:t}))|`, with `ν̄_t` from the Bayes recursion.
pub fn equivalence_gap(
    model: &POModel,
    histories: &[HistoryValue],
    belief_nodes: &[BeliefNode],
) -> Result<f64> {
    let index: BTreeMap<NodeKey, f64> = belief_nodes
        .iter()
        .map(|n| ((n.t, n.y, n.belief.key()), n.value))
        .collect();
    let mut gap: f64 = 0.0;
    for hv in histories {
        let t = hv.history.len() - 1;
        let nu = belief_recursion(model, &hv.history)?;
        let v = index
            .get(&(t, hv.history[t], nu.key()))
            .ok_or_else(|| Error::Malformed(format!("no belief node for {:?}", hv.history)))?;
        gap = gap.max((v - hv.value).abs());
    }
    Ok(gap)
}

/// Positive-probability histories of length `t + 1`, over every initial observation.
pub fn positive_histories(model: &POModel, t: usize) -> Result<Vec<Vec<usize>>> {
    let mut layer: Vec<Vec<usize>> = (0..model.n_obs()).map(|y| vec![y]).collect();
    for _ in 0..t {
        let mut next = Vec::new();
        for h in &layer {
            for (y, p) in direct_predictive(model, h)?.into_iter().enumerate() {
                if p > 0.0 {
                    let mut e = h.clone();
                    e.push(y);
                    next.push(e);
                }
            }
        }
        layer = next;
    }
    Ok(layer)
}

fn report(
    property: &str,
    model: &POModel,
    tolerance: f64,
    rows: Vec<(Vec<usize>, f64, f64)>,
) -> PropertyReport {
    PropertyReport::from_named_rows(property, "composite", model.digest(), tolerance, rows)
}

/// Compares `ρ^{y_{0:t}}(f(Y_{t+1}))`, from the joint masses, with
/// `ρ̃^{(y_t, ν̄_t)}(f(Y_1))`, from the belief predictive, on every history of length `t + 1`.
pub fn check_transition_consistency_filtered(
    model: &POModel,
    t: usize,
    f: &[f64],
    tolerance: f64,
) -> Result<PropertyReport> {
    if f.len() != model.n_obs() {
        return Err(Error::Malformed(format!("f has {} entries", f.len())));
    }
    let rows = positive_histories(model, t)?
        .into_iter()
        .map(|h| {
            let y = h[t];
            let left = composite_on(model, y, f, &direct_predictive(model, &h)?)?;
            let nu = belief_recursion(model, &h)?;
            let right = composite_on(model, y, f, &belief_predictive(model, y, &nu))?;
            Ok((h, left, right))
        })
        .collect::<Result<_>>()?;
    Ok(report("transition_consistency_filtered", model, tolerance, rows))
}

/// A random variable `Z(y_{0:T}, ξ)` tabulated with the path index most significant and the
/// parameter index last.
#[derive(Debug, Clone, PartialEq)]
pub struct PathParamFunctional {
    pub horizon: usize,
    pub values: Vec<f64>,
}

impl PathParamFunctional {
    fn eval(&self, n_obs: usize, n_params: usize, path: &[usize], xi: usize) -> f64 {
        let idx = path.iter().fold(0, |acc, &y| acc * n_obs + y);
        self.values[idx * n_params + xi]
    }
}

/// Atoms `((y_{0:T}, ξ), P)` of the law anchored at `start` with parameter law `nu`, over
/// full paths extending `start`.
fn anchored_atoms(
    model: &POModel,
    start: &[usize],
    nu: &[f64],
    horizon: usize,
) -> Vec<(Vec<usize>, usize, f64)> {
    let mut out = Vec::new();
    for (xi, &w) in nu.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let mut stack = vec![(start.to_vec(), w)];
        while let Some((path, m)) = stack.pop() {
            if path.len() == horizon + 1 {
                out.push((path, xi, m));
                continue;
            }
            let y = path[path.len() - 1];
            for y_next in (0..model.n_obs()).rev() {
                let p = model.kernel(xi, y, y_next);
                if p > 0.0 {
                    let mut e = path.clone();
                    e.push(y_next);
                    stack.push((e, m * p));
                }
            }
        }
    }
    out
}

/// Compares the update rule `R_K^{y_{0:t}}(Z|F^Y_s)` evaluated at an extension `y_{0:s}`, by
/// restricting the law anchored at `y_{0:t}` to paths through `y_{0:s}`, with the mapping
/// re-anchored at `y_{0:s}` using the Bayes belief `ν̄_s`. Runs over every history pair.
pub fn check_history_consistency(
    model: &POModel,
    z: &PathParamFunctional,
    t: usize,
    s: usize,
    tolerance: f64,
) -> Result<PropertyReport> {
    let horizon = z.horizon;
    if t > s || s > horizon {
        return Err(Error::Malformed(format!("need t <= s <= hz(Z), got {t}, {s}, {horizon}")));
    }
    let (ny, nx) = (model.n_obs(), model.n_params());
    if z.values.len() != ny.pow(horizon as u32 + 1) * nx {
        return Err(Error::Malformed("functional table has the wrong length".into()));
    }
    let mut rows = Vec::new();
    for anchor in positive_histories(model, t)? {
        let post = direct_posterior(model, &anchor)?;
        let atoms = anchored_atoms(model, &anchor, &post, horizon);
        for ext in positive_histories(model, s)?
            .into_iter()
            .filter(|e| e.starts_with(&anchor))
        {
            let within: Vec<(f64, f64)> = atoms
                .iter()
                .filter(|(p, _, _)| p.starts_with(&ext))
                .map(|(p, xi, m)| (z.eval(ny, nx, p, *xi), *m))
                .collect();
            let mass: f64 = within.iter().map(|a| a.1).sum();
            let conditioned: Vec<(f64, f64)> =
                within.into_iter().map(|(v, m)| (v, m / mass)).collect();
            let left = model.risk.risk_weighted(ext[s], &conditioned)?;

            let nu = belief_recursion(model, &ext)?;
            let reanchored: Vec<(f64, f64)> = anchored_atoms(model, &ext, nu.weights(), horizon)
                .into_iter()
                .map(|(p, xi, m)| (z.eval(ny, nx, &p, xi), m))
                .collect();
            let right = model.risk.risk_weighted(ext[s], &reanchored)?;
            let mut key = anchor.clone();
            key.push(usize::MAX);
            key.extend_from_slice(&ext);
            rows.push((key, left, right));
        }
    }
    Ok(report("history_consistency", model, tolerance, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Two observations, two parameters; observation `u = 1` has probability 0.8 under `A`
    /// and 0.2 under `B` from either state.
    fn informative(risk: CompositeSpec, horizon: usize) -> POModel {
        POModel::new(
            vec!["d".into(), "u".into()],
            vec!["A".into(), "B".into()],
            vec![
                vec![vec![0.2, 0.8], vec![0.2, 0.8]],
                vec![vec![0.8, 0.2], vec![0.8, 0.2]],
            ],
            vec![vec![0.5, 0.5], vec![0.5, 0.5]],
            vec![vec![0.0, 1.0], vec![3.0, -1.0]],
            risk,
            horizon,
        )
        .unwrap()
    }

    #[test]
    fn bayes_examples() {
        let m = informative(CompositeSpec::expectation(), 2);
        let nu = Belief::new(vec![0.5, 0.5]).unwrap();
        let post = bayes_update(&m, &nu, 0, 1).unwrap();
        assert!((post.weights()[0] - 0.8).abs() < 1e-15);
        let point = Belief::new(vec![1.0, 0.0]).unwrap();
        assert_eq!(bayes_update(&m, &point, 0, 1).unwrap(), point);
        let two = belief_recursion(&m, &[0, 1, 1]).unwrap();
        assert!((two.weights()[0] - 0.32 / 0.34).abs() < 1e-15);
        assert!((two.weights()[1] - 0.02 / 0.34).abs() < 1e-15);
        assert_eq!(belief_recursion(&m, &[1]).unwrap().weights(), &[0.5, 0.5]);
    }

    #[test]
    fn zero_predictive_mass_is_an_error() {
        let m = POModel::new(
            vec!["a".into(), "b".into()],
            vec!["x".into()],
            vec![vec![vec![1.0, 0.0], vec![0.5, 0.5]]],
            vec![vec![1.0], vec![1.0]],
            vec![vec![0.0], vec![0.0]],
            CompositeSpec::expectation(),
            1,
        )
        .unwrap();
        let nu = Belief::new(vec![1.0]).unwrap();
        assert!(matches!(bayes_update(&m, &nu, 0, 1), Err(Error::NullEvent(_))));
    }

    #[test]
    fn lift_examples() {
        let m = informative(CompositeSpec::entropic(vec![1.0, 1.0]), 1);
        let nu = Belief::new(vec![0.5, 0.5]).unwrap();
        let v = lift_cost(&m, 0, &nu).unwrap();
        assert!((v - ((1.0 + 1f64.exp()) / 2.0).ln()).abs() < 1e-15);
        let point = Belief::new(vec![0.0, 1.0]).unwrap();
        assert!((lift_cost(&m, 1, &point).unwrap() + 1.0).abs() < 1e-15);
        let lin = informative(CompositeSpec::expectation(), 1);
        assert_eq!(lift_cost(&lin, 1, &nu).unwrap(), 1.0);
    }

    #[test]
    fn belief_rejects_off_simplex() {
        assert!(Belief::new(vec![0.5, 0.4]).is_err());
        assert!(Belief::new(vec![1.0 + 1e-16, -1e-16]).is_ok());
        assert!(Belief::new(vec![1.1, -0.1]).is_err());
    }

    #[test]
    fn horizon_zero_is_the_lift() {
        let m = informative(CompositeSpec::entropic(vec![0.5, 2.0]), 0);
        let hist = history_dp(&m, 1 << 20).unwrap();
        for hv in &hist {
            let nu = Belief::new(m.prior(hv.history[0]).to_vec()).unwrap();
            assert_eq!(hv.value, lift_cost(&m, hv.history[0], &nu).unwrap());
        }
    }

    #[test]
    fn programs_agree() {
        for risk in [
            CompositeSpec::expectation(),
            CompositeSpec::entropic(vec![1.0, 0.4]),
            CompositeSpec::mean_semideviation(vec![0.5, 1.0], 2),
        ] {
            let m = informative(risk, 3);
            let sol = solve_filtered(&m, true, 1 << 20).unwrap();
            assert!(sol.max_equivalence_gap.unwrap() <= 1e-9);
            assert_eq!(sol.histories.len(), 2 + 4 + 8 + 16);
        }
    }

    #[test]
    fn cap_is_enforced() {
        let m = informative(CompositeSpec::expectation(), 5);
        assert!(matches!(history_dp(&m, 16), Err(Error::CapExceeded { .. })));
    }

    #[test]
    fn transition_consistency() {
        let m = informative(CompositeSpec::entropic(vec![1.0, 0.3]), 3);
        let r = check_transition_consistency_filtered(&m, 2, &[4.0, 4.0], 0.0).unwrap();
        assert_eq!(r.max_discrepancy, 0.0);
        let r = check_transition_consistency_filtered(&m, 2, &[1.0, -2.0], 1e-10).unwrap();
        assert!(r.pass, "{r:?}");
    }

    #[test]
    fn history_consistency() {
        let m = informative(CompositeSpec::entropic(vec![1.0, 0.3]), 2);
        let values = (0..8 * 2).map(|i| ((i * 7) % 5) as f64 - 2.0).collect();
        let z = PathParamFunctional { horizon: 2, values };
        for (t, s) in [(0, 0), (0, 1), (1, 2), (0, 2)] {
            let r = check_history_consistency(&m, &z, t, s, 1e-10).unwrap();
            assert!(r.pass, "{t} {s}: {r:?}");
        }
    }
}
