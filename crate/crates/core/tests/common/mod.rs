//! Instance generators and independent oracles shared by the integration tests.
#![allow(dead_code)]

use rand::Rng;
use riskstop_core::filter::POModel;
use riskstop_core::random::random_table;
use riskstop_core::CompositeSpec;

fn random_row<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    let w: Vec<f64> = (0..n).map(|_| rng.random::<f64>().max(0.05)).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Random partially observed model with `ny` observations and `nx` parameter values.
pub fn random_po_model<R: Rng>(
    rng: &mut R,
    ny: usize,
    nx: usize,
    risk: CompositeSpec,
    horizon: usize,
) -> POModel {
    let kernels = (0..nx)
        .map(|_| (0..ny).map(|_| random_row(rng, ny)).collect())
        .collect();
    let prior = (0..ny).map(|_| random_row(rng, nx)).collect();
    let h = (0..ny).map(|_| random_table(rng, nx, -3.0, 3.0)).collect();
    POModel::new(
        (0..ny).map(|y| format!("y{y}")).collect(),
        (0..nx).map(|x| format!("p{x}")).collect(),
        kernels,
        prior,
        h,
        risk,
        horizon,
    )
    .expect("valid model")
}

/// `P(Y_{1:t} = y_{1:t}, Ξ = ξ | Y_0 = y_0)` by multiplying kernel entries along the history.
pub fn joint_masses(model: &POModel, history: &[usize]) -> Vec<f64> {
    (0..model.n_params())
        .map(|xi| {
            history.windows(2).fold(model.prior(history[0])[xi], |m, w| {
                m * model.kernel(xi, w[0], w[1])
            })
        })
        .collect()
}

fn history_cost(model: &POModel, history: &[usize]) -> f64 {
    let joint = joint_masses(model, history);
    let total: f64 = joint.iter().sum();
    let y = history[history.len() - 1];
    let atoms: Vec<(f64, f64)> = joint
        .iter()
        .enumerate()
        .filter(|(_, &m)| m > 0.0)
        .map(|(xi, &m)| (model.cost(y, xi), m / total))
        .collect();
    model.risk().risk_weighted(y, &atoms).expect("finite risk")
}

fn nested_value(model: &POModel, history: &[usize], stop: &dyn Fn(&[usize]) -> bool) -> f64 {
    if history.len() == model.horizon() + 1 || stop(history) {
        return history_cost(model, history);
    }
    let total: f64 = joint_masses(model, history).iter().sum();
    let y = history[history.len() - 1];
    let mut atoms = Vec::new();
    for y_next in 0..model.n_obs() {
        let mut ext = history.to_vec();
        ext.push(y_next);
        let p: f64 = joint_masses(model, &ext).iter().sum::<f64>() / total;
        if p > 0.0 {
            atoms.push((nested_value(model, &ext, stop), p));
        }
    }
    model.risk().risk_weighted(y, &atoms).expect("finite risk")
}

/// Minimum of the nested objective over every observation-adapted stopping rule from `y0`,
/// enumerated as bitmasks over the non-terminal histories of positive mass.
pub fn observation_rule_oracle(model: &POModel, y0: usize) -> f64 {
    let mut nodes = vec![vec![y0]];
    let mut frontier = vec![vec![y0]];
    for _ in 1..model.horizon() {
        let mut next = Vec::new();
        for h in &frontier {
            for y in 0..model.n_obs() {
                let mut e = h.clone();
                e.push(y);
                if joint_masses(model, &e).iter().sum::<f64>() > 0.0 {
                    next.push(e);
                }
            }
        }
        nodes.extend(next.iter().cloned());
        frontier = next;
    }
    if model.horizon() == 0 {
        nodes.clear();
    }
    assert!(nodes.len() <= 20, "too many decision nodes");
    let mut best = f64::INFINITY;
    for mask in 0u64..(1u64 << nodes.len()) {
        let stop = |h: &[usize]| {
            nodes
                .iter()
                .position(|n| n.as_slice() == h)
                .is_some_and(|j| mask >> j & 1 == 1)
        };
        best = best.min(nested_value(model, &[y0], &stop));
    }
    best
}
