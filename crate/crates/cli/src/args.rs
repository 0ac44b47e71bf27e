use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(name = "riskstop", version, about = "Markov risk mappings and risk-sensitive optimal stopping on finite chains")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Wald-Bellman value table and first-entry rule, optionally checked against the exhaustive oracle.
    Solve {
        #[command(flatten)]
        common: Common,
        /// Also minimise over every adapted rule and report the gap to the DP.
        #[arg(long)]
        oracle: bool,
    },
    /// Stopping with a deterministic exercise lag, solved through the reduced exercise cost.
    LagSolve {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        family: FamilyArgs,
        /// Lag `d`; defaults to the model's `lag`.
        #[arg(long)]
        lag: Option<usize>,
        /// Cross-check against the brute-force lagged optimum.
        #[arg(long)]
        oracle: bool,
    },
    /// Partially observed stopping: history DP and belief DP.
    FilterSolve {
        #[command(flatten)]
        common: Common,
        /// Compare the two programs on every history.
        #[arg(long)]
        check_equivalence: bool,
    },
    /// Markov property on a seeded random functional.
    VerifyMarkov {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1)]
        t: usize,
    },
    /// `ρ_s = ρ_s ∘ ρ_t` on a seeded random functional.
    VerifyTimeConsistency {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 0)]
        s: usize,
        #[arg(long, default_value_t = 1)]
        t: usize,
    },
    /// Acceptance-set equivalence on a seeded random functional, with offsets -1, 0 and 1.
    VerifyAcceptance {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1)]
        t: usize,
    },
    /// Dual representation of the one-step risk of `f(x, y) = h(y)` against sampled kernels.
    DualCheck {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        family: FamilyArgs,
        #[arg(long, default_value_t = 1000)]
        samples: usize,
    },
    /// Exhaustive minimum of the nested objective over all adapted rules.
    Oracle {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        family: FamilyArgs,
    },
}

#[derive(Debug, Args, Clone, Serialize)]
pub struct Common {
    /// Model file (JSON).
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 1e-9)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Report path; the report goes to stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
}

/// Overrides the model's risk family.
#[derive(Debug, Args, Clone, Default, Serialize)]
pub struct FamilyArgs {
    /// One of expectation, entropic, semidev, worstcase, var, avar.
    #[arg(long)]
    pub family: Option<String>,
    /// Entropic `γ`: one value, or one per state separated by commas.
    #[arg(long, value_delimiter = ',')]
    pub gamma: Vec<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Semideviation weight: one value, or one per state separated by commas.
    #[arg(long, value_delimiter = ',')]
    pub kappa: Vec<f64>,
    #[arg(long)]
    pub p: Option<u32>,
}
