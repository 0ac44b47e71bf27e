use std::collections::BTreeMap;

use serde::Serialize;

use super::distribution::FiniteDistribution;
use super::expr::Expr;
use crate::error::{Error, Result};

/// Stage functions `g_0(z, x)` and `g_k(z, r, x)`, `k = 1..=K`, with per-state constants.
///
/// `R_0 = E[g_0(Z, x)]` and `R_k = E[g_k(Z, R_{k-1}, x)]`; the risk is `R_K`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CompositeSpec {
    stages: Vec<String>,
    constants: BTreeMap<String, Vec<f64>>,
    #[serde(skip)]
    exprs: Vec<Expr>,
    #[serde(skip)]
    tables: Vec<Vec<f64>>,
}

impl CompositeSpec {
    pub fn parse<S: AsRef<str>>(
        stages: &[S],
        constants: BTreeMap<String, Vec<f64>>,
    ) -> Result<Self> {
        if stages.is_empty() {
            return Err(Error::Expression("composite needs at least g_0".into()));
        }
        let names: Vec<&str> = constants.keys().map(String::as_str).collect();
        for name in &names {
            if matches!(*name, "z" | "r" | "exp" | "ln" | "pow" | "max") {
                return Err(Error::Expression(format!("reserved constant name `{name}`")));
            }
        }
        let exprs = stages
            .iter()
            .map(|s| Expr::parse(s.as_ref(), &names))
            .collect::<Result<Vec<_>>>()?;
        if exprs[0].uses_r() {
            return Err(Error::Expression("g_0 cannot reference r".into()));
        }
        if let Some((name, v)) = constants
            .iter()
            .find(|(_, v)| v.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::NonFinite(format!("constant `{name}` = {v:?}")));
        }
        let tables = constants.values().cloned().collect();
        Ok(Self {
            stages: stages.iter().map(|s| s.as_ref().to_string()).collect(),
            constants,
            exprs,
            tables,
        })
    }

    /// `K = 0`, `g_0(z) = z`: the linear expectation.
    pub fn expectation() -> Self {
        Self::parse(&["z"], BTreeMap::new()).expect("static expression")
    }

    /// `K = 1`, `g_0 = exp(γ z)`, `g_1 = ln(r)/γ`.
    pub fn entropic(gamma: Vec<f64>) -> Self {
        let constants = BTreeMap::from([("gamma".to_string(), gamma)]);
        Self::parse(&["exp(gamma * z)", "ln(r) / gamma"], constants).expect("static expression")
    }

    /// `K = 2`, `g_0 = z`, `g_1 = ((z - r)^+)^p`, `g_2 = z + κ r^{1/p}`.
    pub fn mean_semideviation(kappa: Vec<f64>, p: u32) -> Self {
        let constants = BTreeMap::from([("kappa".to_string(), kappa)]);
        let g1 = format!("pow(max(z - r, 0), {p})");
        let g2 = format!("z + kappa * pow(r, 1 / {p})");
        Self::parse(&["z", g1.as_str(), g2.as_str()], constants).expect("static expression")
    }

    /// Number of nested stages above `g_0`.
    pub fn k(&self) -> usize {
        self.stages.len() - 1
    }

    pub fn stages(&self) -> &[String] {
        &self.stages
    }

    pub fn constants(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.constants
    }

    /// Every constant table must cover `n_states` states.
    pub fn validate(&self, n_states: usize) -> Result<()> {
        for (name, v) in &self.constants {
            if v.len() != n_states {
                return Err(Error::ParameterOutOfRange(format!(
                    "constant `{name}` has {} entries, expected {n_states}",
                    v.len()
                )));
            }
        }
        Ok(())
    }

    /// `g_k(z, r, x)`; `r` is ignored for `k = 0`.
    pub fn stage(&self, k: usize, z: f64, r: f64, x: usize) -> Result<f64> {
        let v = self.exprs[k].eval(z, r, x, &self.tables);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFinite(format!(
                "g_{k}(z={z}, r={r}, x={x}) = {v} for `{}`",
                self.stages[k]
            )))
        }
    }

    /// `R_K` on the law `dist` at state `x`.
    pub fn risk(&self, x: usize, dist: &FiniteDistribution) -> Result<f64> {
        self.risk_weighted(x, dist.atoms())
    }

    /// `R_K` when the "distribution" is a weighted list of values that need not be merged, e.g.
    /// a belief-weighted cost `h(y, ξ)`.
    pub fn risk_weighted(&self, x: usize, atoms: &[(f64, f64)]) -> Result<f64> {
        let mut r = 0.0;
        for k in 0..self.stages.len() {
            let mut acc = 0.0;
            for &(z, p) in atoms {
                acc += self.stage(k, z, r, x)? * p;
            }
            r = acc;
        }
        Ok(r)
    }
}
