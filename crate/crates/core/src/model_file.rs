//! JSON model documents. Unknown fields are rejected everywhere.
//!
//! Fully observed model:
//!
//! ```json
//! {
//!   "states": ["low", "high"],
//!   "kernel": [[0.7, 0.3], [0.4, 0.6]],
//!   "initial_law": [1.0, 0.0],
//!   "horizon": 3,
//!   "costs": {"h": [0.0, 10.0], "c": [1.0, 1.0], "g": [0.0, 5.0]},
//!   "risk": {"family": "entropic", "params": {"gamma": [1.0, 0.5]}},
//!   "lag": 1
//! }
//! ```
//!
//! Partially observed model (parameter-indexed tables follow `param_support`, observation
//! indexed ones follow `states`):
//!
//! ```json
//! {
//!   "states": ["d", "u"],
//!   "param_support": ["A", "B"],
//!   "kernels_by_param": [[[0.2, 0.8], [0.2, 0.8]], [[0.8, 0.2], [0.8, 0.2]]],
//!   "prior_by_initial_obs": [[0.5, 0.5], [0.5, 0.5]],
//!   "cost_h_by_obs_and_param": [[0.0, 1.0], [3.0, -1.0]],
//!   "horizon": 3,
//!   "risk": {"family": "entropic", "params": {"gamma": 1.0}}
//! }
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::POModel;
use crate::model::Chain;
use crate::risk::{CompositeSpec, RiskFamily};
use crate::stopping::CostSpec;

/// A scalar applied to every state, or one value per state.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum PerState {
    Scalar(f64),
    Table(Vec<f64>),
}

impl PerState {
    fn expand(self, n: usize) -> Vec<f64> {
        match self {
            PerState::Scalar(v) => vec![v; n],
            PerState::Table(t) => t,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct GammaParams {
    gamma: PerState,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SemidevParams {
    kappa: PerState,
    p: u32,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LambdaParams {
    lambda: f64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CompositeParams {
    stages: Vec<String>,
    #[serde(default)]
    constants: BTreeMap<String, PerState>,
}

#[derive(Debug, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NoParams {}

#[derive(Debug, Deserialize)]
#[allow(dead_code)]
#[serde(tag = "family", content = "params", rename_all = "lowercase", deny_unknown_fields)]
enum RiskDoc {
    Expectation(#[serde(default)] Option<NoParams>),
    Entropic(GammaParams),
    Semidev(SemidevParams),
    Worstcase(#[serde(default)] Option<NoParams>),
    Var(LambdaParams),
    Avar(LambdaParams),
    Composite(CompositeParams),
}

impl RiskDoc {
    fn build(self, n: usize) -> Result<RiskFamily> {
        let family = match self {
            RiskDoc::Expectation(_) => RiskFamily::Expectation,
            RiskDoc::Entropic(p) => RiskFamily::Entropic {
                gamma: p.gamma.expand(n),
            },
            RiskDoc::Semidev(p) => RiskFamily::MeanSemiDeviation {
                kappa: p.kappa.expand(n),
                p: p.p,
            },
            RiskDoc::Worstcase(_) => RiskFamily::WorstCase,
            RiskDoc::Var(p) => RiskFamily::ValueAtRisk { lambda: p.lambda },
            RiskDoc::Avar(p) => RiskFamily::AverageValueAtRisk { lambda: p.lambda },
            RiskDoc::Composite(p) => {
                let constants = p
                    .constants
                    .into_iter()
                    .map(|(k, v)| (k, v.expand(n)))
                    .collect();
                RiskFamily::Composite(CompositeSpec::parse(&p.stages, constants)?)
            }
        };
        family.validate(n)?;
        Ok(family)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct CostsDoc {
    h: Vec<f64>,
    c: Vec<f64>,
    #[serde(default)]
    g: Option<Vec<f64>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDoc {
    states: Vec<String>,
    kernel: Vec<Vec<f64>>,
    #[serde(default)]
    initial_law: Option<Vec<f64>>,
    horizon: usize,
    costs: CostsDoc,
    risk: RiskDoc,
    #[serde(default)]
    lag: Option<usize>,
}

/// A validated fully observed model.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    pub chain: Chain,
    pub horizon: usize,
    pub costs: CostSpec,
    pub risk: RiskFamily,
}

fn parse_error(e: serde_json::Error) -> Error {
    Error::Malformed(e.to_string())
}

pub fn parse_model(text: &str) -> Result<ModelSpec> {
    let doc: ModelDoc = serde_json::from_str(text).map_err(parse_error)?;
    let chain = Chain::with_labels(doc.states, doc.kernel, doc.initial_law)?;
    let n = chain.n_states();
    let costs = CostSpec {
        h: doc.costs.h,
        c: doc.costs.c,
        g: doc.costs.g,
        lag: doc.lag.unwrap_or(0),
    };
    costs.validate(n)?;
    let risk = doc.risk.build(n)?;
    Ok(ModelSpec {
        chain,
        horizon: doc.horizon,
        costs,
        risk,
    })
}

pub fn load_model(path: &Path) -> Result<ModelSpec> {
    parse_model(&read(path)?)
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path)
        .map_err(|e| Error::Malformed(format!("cannot read model `{}`: {e}", path.display())))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct POModelDoc {
    states: Vec<String>,
    param_support: Vec<String>,
    kernels_by_param: Vec<Vec<Vec<f64>>>,
    prior_by_initial_obs: Vec<Vec<f64>>,
    cost_h_by_obs_and_param: Vec<Vec<f64>>,
    horizon: usize,
    risk: RiskDoc,
}

/// Maps a family onto its composite form; only composite-expressible families are accepted.
pub fn composite_form(family: &RiskFamily) -> Result<CompositeSpec> {
    match family {
        RiskFamily::Expectation => Ok(CompositeSpec::expectation()),
        RiskFamily::Entropic { gamma } => Ok(CompositeSpec::entropic(gamma.clone())),
        RiskFamily::MeanSemiDeviation { kappa, p } => {
            Ok(CompositeSpec::mean_semideviation(kappa.clone(), *p))
        }
        RiskFamily::Composite(spec) => Ok(spec.clone()),
        other => Err(Error::Unsupported(format!(
            "family `{}` has no composite form",
            other.name()
        ))),
    }
}

pub fn parse_po_model(text: &str) -> Result<POModel> {
    let doc: POModelDoc = serde_json::from_str(text).map_err(parse_error)?;
    let ny = doc.states.len();
    let family = doc.risk.build(ny)?;
    POModel::new(
        doc.states,
        doc.param_support,
        doc.kernels_by_param,
        doc.prior_by_initial_obs,
        doc.cost_h_by_obs_and_param,
        composite_form(&family)?,
        doc.horizon,
    )
}

pub fn load_po_model(path: &Path) -> Result<POModel> {
    parse_po_model(&read(path)?)
}
