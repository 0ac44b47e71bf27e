use std::path::Path;

use riskstop_core::dual::{dual_domination, dual_gap};
use riskstop_core::filter::solve_filtered;
use riskstop_core::model_file::{parse_model, parse_po_model, ModelSpec};
use riskstop_core::random::{random_functional, random_integer_functional, rng};
use riskstop_core::report::{to_json, value_table_csv};
use riskstop_core::stopping::{oracle_optimal_value, solve_with_lag, wald_bellman, ValueFunction};
use riskstop_core::verify::{check_acceptance_sets, check_markov, check_time_consistency};
use riskstop_core::{Error, PathFunctional, RiskFamily, StoppingRule, DEFAULT_RULE_CAP};
use serde::Serialize;

use crate::args::{Command, Common, FamilyArgs, Format};
use crate::output::read_model;

/// A finished run: the rendered report and whether every checked property held.
pub struct Run {
    pub text: String,
    pub pass: bool,
}

fn input(e: Error) -> String {
    e.to_string()
}

#[derive(Serialize)]
struct Config<'a> {
    model: String,
    tolerance: f64,
    seed: u64,
    format: Format,
    #[serde(skip_serializing_if = "Option::is_none")]
    family: Option<&'a RiskFamily>,
    #[serde(skip_serializing_if = "Option::is_none")]
    samples: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    s: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    t: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    lag: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    check_equivalence: Option<bool>,
}

impl<'a> Config<'a> {
    fn new(common: &Common, family: Option<&'a RiskFamily>) -> Self {
        Config {
            model: common.model.display().to_string(),
            tolerance: common.tolerance,
            seed: common.seed,
            format: common.format,
            family,
            samples: None,
            s: None,
            t: None,
            lag: None,
            oracle: None,
            check_equivalence: None,
        }
    }
}

#[derive(Serialize)]
struct Report<'a, T: Serialize> {
    command: &'static str,
    model_digest: String,
    config: Config<'a>,
    states: &'a [String],
    pass: bool,
    result: T,
}

#[derive(Serialize)]
struct RuleEntry {
    prefix: Vec<String>,
    stop: bool,
}

fn labelled_rule(rule: &StoppingRule, labels: &[String]) -> Vec<RuleEntry> {
    rule.decisions()
        .iter()
        .map(|(p, &stop)| RuleEntry {
            prefix: p.iter().map(|&x| labels[x].clone()).collect(),
            stop,
        })
        .collect()
}

pub fn resolve_family(args: &FamilyArgs, default: &RiskFamily, n: usize) -> Result<RiskFamily, String> {
    let Some(name) = args.family.as_deref() else {
        if !args.gamma.is_empty() || args.lambda.is_some() || !args.kappa.is_empty() || args.p.is_some() {
            return Err("parameter flags need --family".into());
        }
        return Ok(default.clone());
    };
    let per_state = |flag: &str, v: &[f64]| match v.len() {
        0 => Err(format!("--family {name} needs --{flag}")),
        1 => Ok(vec![v[0]; n]),
        _ => Ok(v.to_vec()),
    };
    let lambda = || args.lambda.ok_or_else(|| format!("--family {name} needs --lambda"));
    let family = match name {
        "expectation" => RiskFamily::Expectation,
        "worstcase" => RiskFamily::WorstCase,
        "entropic" => RiskFamily::Entropic {
            gamma: per_state("gamma", &args.gamma)?,
        },
        "semidev" => RiskFamily::MeanSemiDeviation {
            kappa: per_state("kappa", &args.kappa)?,
            p: args.p.unwrap_or(1),
        },
        "var" => RiskFamily::ValueAtRisk { lambda: lambda()? },
        "avar" => RiskFamily::AverageValueAtRisk { lambda: lambda()? },
        other => return Err(format!("unknown family `{other}`")),
    };
    family.validate(n).map_err(input)?;
    Ok(family)
}

fn render<T: Serialize>(report: &Report<'_, T>) -> Result<String, String> {
    to_json(report).map_err(input)
}

fn load(path: &Path) -> Result<(ModelSpec, String), String> {
    let (text, digest) = read_model(path)?;
    Ok((parse_model(&text).map_err(input)?, digest))
}

fn json_only(common: &Common, command: &str) -> Result<(), String> {
    if common.format == Format::Csv {
        return Err(format!(
            "csv output covers value tables only (solve, lag-solve), not {command}"
        ));
    }
    Ok(())
}

pub fn run(command: &Command) -> Result<Run, String> {
    match command {
        Command::Solve { common, oracle } => solve(common, *oracle),
        Command::LagSolve {
            common,
            family,
            lag,
            oracle,
        } => lag_solve(common, family, *lag, *oracle),
        Command::FilterSolve {
            common,
            check_equivalence,
        } => filter_solve(common, *check_equivalence),
        Command::VerifyMarkov { common, family, t } => verify(common, family, Check::Markov { t: *t }),
        Command::VerifyTimeConsistency { common, family, s, t } => {
            verify(common, family, Check::TimeConsistency { s: *s, t: *t })
        }
        Command::VerifyAcceptance { common, family, t } => {
            verify(common, family, Check::Acceptance { t: *t })
        }
        Command::DualCheck {
            common,
            family,
            samples,
        } => dual_check(common, family, *samples),
        Command::Oracle { common, family } => oracle(common, family),
    }
}

#[derive(Serialize)]
struct OracleRow {
    initial: String,
    value: f64,
    rules: usize,
    argmin: Vec<RuleEntry>,
    #[serde(skip_serializing_if = "Option::is_none")]
    dp_gap: Option<f64>,
}

fn oracle_rows(
    model: &ModelSpec,
    family: &RiskFamily,
    dp: Option<&ValueFunction>,
) -> Result<Vec<OracleRow>, String> {
    let labels = model.chain.labels();
    (0..model.chain.n_states())
        .map(|x| {
            let o = oracle_optimal_value(
                family,
                &model.chain,
                &model.costs.c,
                &model.costs.h,
                x,
                model.horizon,
                DEFAULT_RULE_CAP,
            )
            .map_err(input)?;
            Ok(OracleRow {
                initial: labels[x].clone(),
                value: o.value,
                rules: o.rules,
                argmin: labelled_rule(&o.argmin, labels),
                dp_gap: dp.map(|vf| (vf.value()[x] - o.value).abs()),
            })
        })
        .collect()
}

#[derive(Serialize)]
struct SolveResult {
    values: Vec<Vec<f64>>,
    stop: Vec<Vec<bool>>,
    optimal_rules: Vec<InitialRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<Vec<OracleRow>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_dp_oracle_gap: Option<f64>,
}

#[derive(Serialize)]
struct InitialRule {
    initial: String,
    rule: Vec<RuleEntry>,
}

fn optimal_rules(vf: &ValueFunction, model: &ModelSpec) -> Result<Vec<InitialRule>, String> {
    let labels = model.chain.labels();
    (0..model.chain.n_states())
        .map(|x| {
            let rule = vf.optimal_rule(&model.chain, x).map_err(input)?;
            Ok(InitialRule {
                initial: labels[x].clone(),
                rule: labelled_rule(&rule, labels),
            })
        })
        .collect()
}

fn solve(common: &Common, with_oracle: bool) -> Result<Run, String> {
    let (model, digest) = load(&common.model)?;
    let vf = wald_bellman(&model.risk, &model.chain, &model.costs.c, &model.costs.h, model.horizon)
        .map_err(input)?;
    let labels = model.chain.labels();
    let oracle = if with_oracle {
        Some(oracle_rows(&model, &model.risk, Some(&vf))?)
    } else {
        None
    };
    let gap = oracle.as_ref().map(|rows| {
        rows.iter()
            .filter_map(|r| r.dp_gap)
            .fold(0.0, f64::max)
    });
    let pass = gap.is_none_or(|g| g <= common.tolerance);
    if common.format == Format::Csv {
        return Ok(Run {
            text: value_table_csv(&vf.values, labels),
            pass,
        });
    }
    let mut config = Config::new(common, Some(&model.risk));
    config.oracle = Some(with_oracle);
    let result = SolveResult {
        optimal_rules: optimal_rules(&vf, &model)?,
        values: vf.values,
        stop: vf.stop,
        oracle,
        max_dp_oracle_gap: gap,
    };
    let text = render(&Report {
        command: "solve",
        model_digest: digest,
        config,
        states: labels,
        pass,
        result,
    })?;
    Ok(Run { text, pass })
}

#[derive(Serialize)]
struct LagResult {
    lag: usize,
    reduced_h: Vec<f64>,
    values: Vec<Vec<f64>>,
    stop: Vec<Vec<bool>>,
    optimal_rules: Vec<InitialRule>,
    #[serde(skip_serializing_if = "Option::is_none")]
    brute_force: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_gap: Option<f64>,
}

fn lag_solve(common: &Common, fam: &FamilyArgs, lag: Option<usize>, cross_check: bool) -> Result<Run, String> {
    let (model, digest) = load(&common.model)?;
    let n = model.chain.n_states();
    let family = resolve_family(fam, &model.risk, n)?;
    let g = model
        .costs
        .g
        .as_ref()
        .ok_or("lag-solve needs the lagged exercise cost `costs.g`")?;
    let d = lag.unwrap_or(model.costs.lag);
    let sol = solve_with_lag(
        &family,
        &model.chain,
        &model.costs.c,
        g,
        d,
        model.horizon,
        cross_check,
        DEFAULT_RULE_CAP,
    )
    .map_err(input)?;
    let pass = sol.max_gap.is_none_or(|g| g <= common.tolerance);
    let labels = model.chain.labels();
    if common.format == Format::Csv {
        return Ok(Run {
            text: value_table_csv(&sol.value_function.values, labels),
            pass,
        });
    }
    let mut config = Config::new(common, Some(&family));
    config.lag = Some(d);
    config.oracle = Some(cross_check);
    let result = LagResult {
        lag: d,
        optimal_rules: optimal_rules(&sol.value_function, &model)?,
        reduced_h: sol.h,
        values: sol.value_function.values,
        stop: sol.value_function.stop,
        brute_force: sol.brute_force,
        max_gap: sol.max_gap,
    };
    let text = render(&Report {
        command: "lag-solve",
        model_digest: digest,
        config,
        states: labels,
        pass,
        result,
    })?;
    Ok(Run { text, pass })
}

#[derive(Serialize)]
struct HistoryRow {
    history: Vec<String>,
    value: f64,
    stop: bool,
}

#[derive(Serialize)]
struct BeliefRow {
    t: usize,
    y: String,
    belief: Vec<f64>,
    value: f64,
    stop: bool,
}

#[derive(Serialize)]
struct FilterResult<'a> {
    params: &'a [String],
    histories: Vec<HistoryRow>,
    belief_nodes: Vec<BeliefRow>,
    #[serde(skip_serializing_if = "Option::is_none")]
    max_equivalence_gap: Option<f64>,
}

fn filter_solve(common: &Common, check: bool) -> Result<Run, String> {
    json_only(common, "filter-solve")?;
    let (text, digest) = read_model(&common.model)?;
    let model = parse_po_model(&text).map_err(input)?;
    let sol = solve_filtered(&model, check, DEFAULT_RULE_CAP).map_err(input)?;
    let labels = model.obs_labels();
    let pass = sol.max_equivalence_gap.is_none_or(|g| g <= common.tolerance);
    let mut config = Config::new(common, None);
    config.check_equivalence = Some(check);
    let result = FilterResult {
        params: model.param_labels(),
        histories: sol
            .histories
            .iter()
            .map(|h| HistoryRow {
                history: h.history.iter().map(|&y| labels[y].clone()).collect(),
                value: h.value,
                stop: h.stop,
            })
            .collect(),
        belief_nodes: sol
            .belief_nodes
            .iter()
            .map(|b| BeliefRow {
                t: b.t,
                y: labels[b.y].clone(),
                belief: b.belief.weights().to_vec(),
                value: b.value,
                stop: b.stop,
            })
            .collect(),
        max_equivalence_gap: sol.max_equivalence_gap,
    };
    let text = render(&Report {
        command: "filter-solve",
        model_digest: digest,
        config,
        states: labels,
        pass,
        result,
    })?;
    Ok(Run { text, pass })
}

enum Check {
    Markov { t: usize },
    TimeConsistency { s: usize, t: usize },
    Acceptance { t: usize },
}

#[derive(Serialize)]
struct VerifyResult<'a, R: Serialize> {
    functional: &'a PathFunctional,
    #[serde(flatten)]
    report: R,
}

fn verify(common: &Common, fam: &FamilyArgs, check: Check) -> Result<Run, String> {
    let name = match check {
        Check::Markov { .. } => "verify-markov",
        Check::TimeConsistency { .. } => "verify-time-consistency",
        Check::Acceptance { .. } => "verify-acceptance",
    };
    json_only(common, name)?;
    let (model, digest) = load(&common.model)?;
    let n = model.chain.n_states();
    let family = resolve_family(fam, &model.risk, n)?;
    let horizon = model.horizon;
    let tol = common.tolerance;
    let mut r = rng(common.seed);
    let mut config = Config::new(common, Some(&family));
    let shifted_span = |t: usize| {
        horizon
            .checked_sub(t)
            .ok_or_else(|| format!("--t {t} exceeds the model horizon {horizon}"))
    };
    let (z, report) = match check {
        Check::Markov { t } => {
            config.t = Some(t);
            let z = random_functional(&mut r, n, shifted_span(t)?);
            let rep = check_markov(&family, &model.chain, &z, t, horizon, tol).map_err(input)?;
            (z, rep)
        }
        Check::TimeConsistency { s, t } => {
            config.s = Some(s);
            config.t = Some(t);
            let z = random_functional(&mut r, n, horizon);
            let rep = check_time_consistency(&family, &model.chain, &z, s, t, horizon, tol)
                .map_err(input)?;
            (z, rep)
        }
        Check::Acceptance { t } => {
            config.t = Some(t);
            let z = random_integer_functional(&mut r, n, shifted_span(t)?).add_constant(-5.0);
            let rep =
                check_acceptance_sets(&family, &model.chain, &z, t, horizon, tol).map_err(input)?;
            (z, rep)
        }
    };
    let pass = report.pass;
    let text = render(&Report {
        command: name,
        model_digest: digest,
        config,
        states: model.chain.labels(),
        pass,
        result: VerifyResult {
            functional: &z,
            report,
        },
    })?;
    Ok(Run { text, pass })
}

#[derive(Serialize)]
#[serde(untagged)]
enum DualResult {
    Entropic(riskstop_core::dual::DualReport),
    Domination { samples: usize, seed: u64, max_violation: f64 },
}

fn dual_check(common: &Common, fam: &FamilyArgs, samples: usize) -> Result<Run, String> {
    json_only(common, "dual-check")?;
    let (model, digest) = load(&common.model)?;
    let n = model.chain.n_states();
    let fam = if fam.family.is_none() && !fam.gamma.is_empty() {
        FamilyArgs {
            family: Some("entropic".into()),
            ..fam.clone()
        }
    } else {
        fam.clone()
    };
    let family = resolve_family(&fam, &model.risk, n)?;
    let f: Vec<Vec<f64>> = vec![model.costs.h.clone(); n];
    let tol = common.tolerance;
    let (result, pass) = match &family {
        RiskFamily::Entropic { gamma } => {
            let rep = dual_gap(&model.chain, gamma, &f, samples, common.seed).map_err(input)?;
            let pass = rep.gap_at_qop <= tol && rep.max_violation <= tol;
            (DualResult::Entropic(rep), pass)
        }
        other => {
            let v = dual_domination(other, &model.chain, &f, samples, common.seed).map_err(input)?;
            let r = DualResult::Domination {
                samples,
                seed: common.seed,
                max_violation: v,
            };
            (r, v <= tol)
        }
    };
    let mut config = Config::new(common, Some(&family));
    config.samples = Some(samples);
    let text = render(&Report {
        command: "dual-check",
        model_digest: digest,
        config,
        states: model.chain.labels(),
        pass,
        result,
    })?;
    Ok(Run { text, pass })
}

fn oracle(common: &Common, fam: &FamilyArgs) -> Result<Run, String> {
    json_only(common, "oracle")?;
    let (model, digest) = load(&common.model)?;
    let family = resolve_family(fam, &model.risk, model.chain.n_states())?;
    let rows = oracle_rows(&model, &family, None)?;
    let text = render(&Report {
        command: "oracle",
        model_digest: digest,
        config: Config::new(common, Some(&family)),
        states: model.chain.labels(),
        pass: true,
        result: rows,
    })?;
    Ok(Run { text, pass: true })
}
