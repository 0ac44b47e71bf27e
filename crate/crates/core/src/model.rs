//! Finite Markov chains on the canonical path space.
//!
//! States are indexed `0..n`. A path of length `T + 1` is the tuple
//! `(x_0, ..., x_T)`; functionals of the path are dense tables indexed
//! lexicographically with `x_0` as the most significant digit.

use std::collections::BTreeMap;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Absolute tolerance for every "sums to one" check.
pub const PROB_TOL: f64 = 1e-12;

/// Default cap on the number of stopping rules produced by exhaustive enumeration.
pub const DEFAULT_RULE_CAP: u128 = 1 << 20;

/// A time-homogeneous chain on a finite state set.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Chain {
    labels: Vec<String>,
    kernel: Vec<Vec<f64>>,
    initial_law: Option<Vec<f64>>,
}

impl Chain {
    /// Chain with states labelled `"0"`, `"1"`, ... and no initial law.
    pub fn new(kernel: Vec<Vec<f64>>) -> Result<Self> {
        let labels = (0..kernel.len()).map(|i| i.to_string()).collect();
        Self::with_labels(labels, kernel, None)
    }

    pub fn with_labels(
        labels: Vec<String>,
        kernel: Vec<Vec<f64>>,
        initial_law: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n = kernel.len();
        if n == 0 {
            return Err(Error::Malformed("chain needs at least one state".into()));
        }
        if labels.len() != n {
            return Err(Error::Malformed(format!(
                "{} labels for {} kernel rows",
                labels.len(),
                n
            )));
        }
        for (i, label) in labels.iter().enumerate() {
            if labels[..i].contains(label) {
                return Err(Error::Malformed(format!("duplicate state label `{label}`")));
            }
        }
        for (row, entries) in kernel.iter().enumerate() {
            if entries.len() != n {
                return Err(Error::Malformed(format!(
                    "kernel row {row} has {} entries, expected {n}",
                    entries.len()
                )));
            }
            check_probability_vector(entries).map_err(|e| match e {
                ProbVecError::Entry(j, v) => Error::Malformed(format!(
                    "kernel entry ({row},{j}) = {v} is not a probability"
                )),
                ProbVecError::Sum(sum) => Error::NonStochasticRow { row, sum },
            })?;
        }
        if let Some(law) = &initial_law {
            if law.len() != n {
                return Err(Error::Malformed(format!(
                    "initial law has {} entries, expected {n}",
                    law.len()
                )));
            }
            check_probability_vector(law).map_err(|e| match e {
                ProbVecError::Entry(j, v) => {
                    Error::Malformed(format!("initial law entry {j} = {v} is not a probability"))
                }
                ProbVecError::Sum(sum) => Error::Malformed(format!("initial law sums to {sum}")),
            })?;
        }
        Ok(Self {
            labels,
            kernel,
            initial_law,
        })
    }

    pub fn n_states(&self) -> usize {
        self.kernel.len()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn kernel(&self) -> &[Vec<f64>] {
        &self.kernel
    }

    pub fn initial_law(&self) -> Option<&[f64]> {
        self.initial_law.as_deref()
    }

    /// `q(to | from)`.
    #[inline]
    pub fn prob(&self, from: usize, to: usize) -> f64 {
        self.kernel[from][to]
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.kernel[x]
    }

    /// Successor states reachable in one step, with their probabilities.
    pub fn successors(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.kernel[x]
            .iter()
            .copied()
            .enumerate()
            .filter(|&(_, p)| p > 0.0)
    }

    /// Product of the one-step kernel entries along `prefix`.
    pub fn prefix_probability(&self, prefix: &[usize]) -> f64 {
        prefix
            .windows(2)
            .map(|w| self.kernel[w[0]][w[1]])
            .product()
    }

    /// Rejects prefixes that are empty, leave the state set, or contain a null transition.
    pub fn check_prefix(&self, prefix: &[usize]) -> Result<()> {
        if prefix.is_empty() {
            return Err(Error::Malformed("empty prefix".into()));
        }
        if let Some(&x) = prefix.iter().find(|&&x| x >= self.n_states()) {
            return Err(Error::Malformed(format!(
                "state index {x} out of range for {} states",
                self.n_states()
            )));
        }
        if let Some(w) = prefix.windows(2).find(|w| self.kernel[w[0]][w[1]] <= 0.0) {
            return Err(Error::NullEvent(format!(
                "prefix {prefix:?} uses transition {} -> {} of probability zero",
                w[0], w[1]
            )));
        }
        Ok(())
    }

    /// Hex SHA-256 over the state count and the kernel bit patterns.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update((self.n_states() as u64).to_le_bytes());
        for row in &self.kernel {
            for p in row {
                hasher.update(p.to_bits().to_le_bytes());
            }
        }
        hex_string(&hasher.finalize())
    }
}

pub(crate) fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

enum ProbVecError {
    Entry(usize, f64),
    Sum(f64),
}

fn check_probability_vector(v: &[f64]) -> std::result::Result<(), ProbVecError> {
    if let Some((j, &p)) = v
        .iter()
        .enumerate()
        .find(|(_, p)| !p.is_finite() || **p < 0.0 || **p > 1.0)
    {
        return Err(ProbVecError::Entry(j, p));
    }
    let sum: f64 = v.iter().sum();
    if (sum - 1.0).abs() > PROB_TOL {
        return Err(ProbVecError::Sum(sum));
    }
    Ok(())
}

/// Iterator over all tuples in `{0..n}^len`, lexicographic with the first coordinate slowest.
#[derive(Debug, Clone)]
pub struct Tuples {
    n: usize,
    current: Option<Vec<usize>>,
}

impl Tuples {
    pub fn new(n: usize, len: usize) -> Self {
        let current = if n == 0 && len > 0 {
            None
        } else {
            Some(vec![0; len])
        };
        Self { n, current }
    }
}

impl Iterator for Tuples {
    type Item = Vec<usize>;

    fn next(&mut self) -> Option<Vec<usize>> {
        let out = self.current.clone()?;
        let mut next = out.clone();
        let mut carry = true;
        for digit in next.iter_mut().rev() {
            *digit += 1;
            if *digit < self.n {
                carry = false;
                break;
            }
            *digit = 0;
        }
        self.current = if carry { None } else { Some(next) };
        Some(out)
    }
}

/// A bounded random variable `Z = f(X_0, ..., X_horizon)` stored as a dense table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathFunctional {
    n_states: usize,
    horizon: usize,
    values: Vec<f64>,
}

impl PathFunctional {
    pub fn from_values(n_states: usize, horizon: usize, values: Vec<f64>) -> Result<Self> {
        let expected = table_len(n_states, horizon)?;
        if values.len() != expected {
            return Err(Error::Malformed(format!(
                "functional table has {} values, expected {expected}",
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("functional value {v}")));
        }
        Ok(Self {
            n_states,
            horizon,
            values,
        })
    }

    /// Tabulates `f` over every tuple of length `horizon + 1`.
    pub fn from_fn(
        n_states: usize,
        horizon: usize,
        mut f: impl FnMut(&[usize]) -> f64,
    ) -> Result<Self> {
        let values = Tuples::new(n_states, horizon + 1).map(|t| f(&t)).collect();
        Self::from_values(n_states, horizon, values)
    }

    pub fn constant(n_states: usize, c: f64) -> Result<Self> {
        Self::from_values(n_states, 0, vec![c; n_states])
    }

    /// `f(X_k)` for a per-state table `f`.
    pub fn coordinate(k: usize, f: &[f64]) -> Result<Self> {
        Self::from_fn(f.len(), k, |t| f[t[k]])
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Table index of a tuple of length exactly `horizon + 1`.
    pub fn index_of(&self, tuple: &[usize]) -> usize {
        debug_assert_eq!(tuple.len(), self.horizon + 1);
        tuple.iter().fold(0, |acc, &x| acc * self.n_states + x)
    }

    /// Value on a path; coordinates past the horizon are ignored.
    pub fn eval(&self, path: &[usize]) -> f64 {
        assert!(
            path.len() > self.horizon,
            "path of length {} too short for horizon {}",
            path.len(),
            self.horizon
        );
        self.values[self.index_of(&path[..=self.horizon])]
    }

    /// `Z ∘ θ_k`: the functional whose value on `(x_0, ..., x_{hz+k})` is `Z(x_k, ..., x_{hz+k})`.
    pub fn shift(&self, k: usize) -> Self {
        if k == 0 {
            return self.clone();
        }
        let block = self.values.len();
        let copies = self.n_states.pow(k as u32);
        let mut values = Vec::with_capacity(block * copies);
        for _ in 0..copies {
            values.extend_from_slice(&self.values);
        }
        Self {
            n_states: self.n_states,
            horizon: self.horizon + k,
            values,
        }
    }

    /// Same random variable, tabulated over a longer horizon.
    pub fn extend_to(&self, horizon: usize) -> Self {
        if horizon <= self.horizon {
            return self.clone();
        }
        let reps = self.n_states.pow((horizon - self.horizon) as u32);
        let values = self
            .values
            .iter()
            .flat_map(|&v| std::iter::repeat_n(v, reps))
            .collect();
        Self {
            n_states: self.n_states,
            horizon,
            values,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n_states, other.n_states, "state spaces differ");
        let horizon = self.horizon.max(other.horizon);
        let a = self.extend_to(horizon);
        let b = other.extend_to(horizon);
        let values = a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect();
        Self {
            n_states: self.n_states,
            horizon,
            values,
        }
    }

    pub fn add_constant(&self, c: f64) -> Self {
        Self {
            values: self.values.iter().map(|v| v + c).collect(),
            ..self.clone()
        }
    }
}

fn table_len(n_states: usize, horizon: usize) -> Result<usize> {
    u32::try_from(horizon + 1)
        .ok()
        .and_then(|e| n_states.checked_pow(e))
        .ok_or_else(|| Error::Malformed(format!("{n_states}^{} tuples overflow", horizon + 1)))
}

/// Conditional law of the full path `(X_0, ..., X_T)` given a prefix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PathDistribution {
    pub condition: Vec<usize>,
    pub atoms: Vec<(Vec<usize>, f64)>,
}

impl PathDistribution {
    /// Law of `X_time`.
    pub fn marginal(&self, n_states: usize, time: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_states];
        for (path, p) in &self.atoms {
            out[path[time]] += p;
        }
        out
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|(_, p)| p).sum()
    }
}

/// All positive-probability extensions of `prefix` to length `horizon + 1`, each weighted by the
/// product of kernel entries beyond the prefix.
pub fn enumerate_paths(
    chain: &Chain,
    prefix: &[usize],
    horizon: usize,
) -> Result<PathDistribution> {
    chain.check_prefix(prefix)?;
    if horizon + 1 < prefix.len() {
        return Err(Error::Malformed(format!(
            "horizon {horizon} shorter than prefix of length {}",
            prefix.len()
        )));
    }
    let mut atoms = Vec::new();
    let mut path = prefix.to_vec();
    extend_paths(chain, &mut path, horizon + 1, 1.0, &mut atoms);
    Ok(PathDistribution {
        condition: prefix.to_vec(),
        atoms,
    })
}

fn extend_paths(
    chain: &Chain,
    path: &mut Vec<usize>,
    len: usize,
    mass: f64,
    out: &mut Vec<(Vec<usize>, f64)>,
) {
    if path.len() == len {
        out.push((path.clone(), mass));
        return;
    }
    let x = *path.last().expect("non-empty path");
    for (y, p) in chain.successors(x) {
        path.push(y);
        extend_paths(chain, path, len, mass * p, out);
        path.pop();
    }
}

/// Positive-probability prefixes of length `max_len` or less started at `initial`, ordered by
/// length and then lexicographically.
pub fn reachable_prefixes(chain: &Chain, initial: usize, max_len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if max_len == 0 {
        return out;
    }
    let mut layer = vec![vec![initial]];
    for len in 1..=max_len {
        out.extend(layer.iter().cloned());
        if len == max_len {
            break;
        }
        layer = layer
            .iter()
            .flat_map(|p| {
                let x = *p.last().expect("non-empty prefix");
                chain.successors(x).map(move |(y, _)| {
                    let mut q = p.clone();
                    q.push(y);
                    q
                })
            })
            .collect();
    }
    out
}

/// Positive-probability prefixes `(x_0, ..., x_t)` over every initial state.
pub fn positive_prefixes(chain: &Chain, t: usize) -> Vec<Vec<usize>> {
    (0..chain.n_states())
        .flat_map(|x| {
            reachable_prefixes(chain, x, t + 1)
                .into_iter()
                .filter(|p| p.len() == t + 1)
        })
        .collect()
}

/// An adapted stop/continue decision per reachable prefix of a chain started at `initial`.
///
/// Prefixes of length `horizon + 1` always stop. Decisions are only stored for reachable
/// prefixes; the stopping index of a path is the first time its prefix says stop, so two paths
/// agreeing up to that index share it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StoppingRule {
    horizon: usize,
    initial: usize,
    #[serde(serialize_with = "decisions_as_list")]
    decisions: BTreeMap<Vec<usize>, bool>,
}

/// JSON object keys must be strings, so decisions are written as `{prefix, stop}` entries.
fn decisions_as_list<S: serde::Serializer>(
    decisions: &BTreeMap<Vec<usize>, bool>,
    serializer: S,
) -> std::result::Result<S::Ok, S::Error> {
    #[derive(Serialize)]
    struct Entry<'a> {
        prefix: &'a [usize],
        stop: bool,
    }
    serializer.collect_seq(decisions.iter().map(|(prefix, &stop)| Entry { prefix, stop }))
}

impl StoppingRule {
    /// Evaluates `stop` on every reachable prefix of length at most `horizon`.
    pub fn from_fn(
        chain: &Chain,
        initial: usize,
        horizon: usize,
        mut stop: impl FnMut(&[usize]) -> bool,
    ) -> Result<Self> {
        chain.check_prefix(&[initial])?;
        let decisions = reachable_prefixes(chain, initial, horizon)
            .into_iter()
            .map(|p| {
                let s = stop(&p);
                (p, s)
            })
            .collect();
        Ok(Self {
            horizon,
            initial,
            decisions,
        })
    }

    /// Deterministic rule `τ ≡ t` (capped at the horizon).
    pub fn constant(chain: &Chain, initial: usize, horizon: usize, t: usize) -> Result<Self> {
        Self::from_fn(chain, initial, horizon, |p| p.len() > t)
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn decisions(&self) -> &BTreeMap<Vec<usize>, bool> {
        &self.decisions
    }

    /// Decision at `prefix`; prefixes at the horizon, and unreachable ones, stop.
    pub fn stops_at(&self, prefix: &[usize]) -> bool {
        prefix.len() > self.horizon || self.decisions.get(prefix).copied().unwrap_or(true)
    }

    /// First `t` at which the rule stops along `path`.
    pub fn stopping_index(&self, path: &[usize]) -> usize {
        (0..=self.horizon)
            .find(|&t| t + 1 >= path.len() || self.stops_at(&path[..=t]))
            .unwrap_or(self.horizon)
    }

    /// Whether the rule stops exactly at the last coordinate of `prefix`.
    pub fn stops_exactly_at(&self, prefix: &[usize]) -> bool {
        let t = prefix.len() - 1;
        self.stops_at(prefix) && (0..t).all(|s| !self.stops_at(&prefix[..=s]))
    }
}

/// Every adapted stopping rule from a fixed initial state, indexed by a bit per decision node.
#[derive(Debug, Clone)]
pub struct StoppingRuleSpace {
    horizon: usize,
    initial: usize,
    nodes: Vec<Vec<usize>>,
}

impl StoppingRuleSpace {
    pub fn new(chain: &Chain, initial: usize, horizon: usize, cap: u128) -> Result<Self> {
        chain.check_prefix(&[initial])?;
        let nodes = reachable_prefixes(chain, initial, horizon);
        let required = if nodes.len() >= 127 {
            u128::MAX
        } else {
            1u128 << nodes.len()
        };
        if required > cap {
            return Err(Error::CapExceeded { required, cap });
        }
        Ok(Self {
            horizon,
            initial,
            nodes,
        })
    }

    /// Number of decision nodes.
    pub fn decision_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        1usize << self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Rule whose node `j` stops iff bit `j` of `index` is set.
    pub fn rule(&self, index: usize) -> StoppingRule {
        let decisions = self
            .nodes
            .iter()
            .enumerate()
            .map(|(j, p)| (p.clone(), index >> j & 1 == 1))
            .collect();
        StoppingRule {
            horizon: self.horizon,
            initial: self.initial,
            decisions,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = StoppingRule> + '_ {
        (0..self.len()).map(|i| self.rule(i))
    }
}

/// All adapted stopping rules from `initial` with horizon `horizon`.
pub fn enumerate_stopping_rules(
    chain: &Chain,
    initial: usize,
    horizon: usize,
    cap: u128,
) -> Result<Vec<StoppingRule>> {
    let space = StoppingRuleSpace::new(chain, initial, horizon, cap)?;
    Ok(space.iter().collect())
}
