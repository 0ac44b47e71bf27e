//! Markov risk mappings on finite chains: exact conditional evaluation, structural property
//! checks, the entropic dual, and risk-sensitive optimal stopping (plain, lagged and filtered).

pub mod dual;
pub mod error;
pub mod filter;
pub mod model;
pub mod model_file;
pub mod random;
pub mod report;
pub mod risk;
pub mod stopping;
pub mod verify;

pub use error::{Error, Result};
pub use model::{
    enumerate_paths, enumerate_stopping_rules, Chain, PathDistribution, PathFunctional,
    StoppingRule, StoppingRuleSpace, DEFAULT_RULE_CAP, PROB_TOL,
};
pub use risk::{CompositeSpec, FiniteDistribution, RiskFamily};
