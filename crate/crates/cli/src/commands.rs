//! Subcommand implementations. Each returns the text printed on stdout.

use std::fs;
use std::path::Path;

use log::info;
use serde::Serialize;
use serde_json::json;
use spreadopt::hjb::{self, residual::residual_sweep, variants, HjbSolution, SweepControl};
use spreadopt::sim::{
    dominance_test, estimate_objective, simulate_spread, simulate_wealth, Execution, PathBundle, SpreadScheme,
    WealthScheme,
};
use spreadopt::strategy::{baseline, optimal_strategy, Strategy, StrategyKind};
use spreadopt::Market;

use crate::config::{OutputFormat, RunConfig};
use crate::{figures, CliError, Cli, Command};

/// Residual threshold of the certification gate.
pub const RESIDUAL_THRESHOLD: f64 = 1e-6;
/// Paths written by `simulate` unless `--paths` is given.
pub const DEFAULT_SIM_PATHS: usize = 10;

pub fn dispatch(cli: &Cli, cfg: &RunConfig) -> Result<String, CliError> {
    let market = Market::new(cfg.model.clone())?;
    match &cli.command {
        Command::Solve => solve(&market, cfg),
        Command::ResidualCheck { samples, flip_alpha } => residual_check(&market, cfg, *samples, *flip_alpha),
        Command::Simulate => simulate(&market, cfg, &cli.strategy, cli.paths.unwrap_or(DEFAULT_SIM_PATHS)),
        Command::Evaluate => evaluate(&market, cfg, &cli.strategy),
        Command::Dominance { strategies } => dominance(&market, cfg, strategies),
        Command::Figures => figures::figures(&market, cfg),
        Command::Ledger { samples } => ledger(&market, cfg, *samples),
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable report")
}

pub(crate) fn write_csv(path: &Path, header: &[String], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> CliError {
    CliError::Io(std::io::Error::other(e.to_string()))
}

fn solve_market(market: &Market, cfg: &RunConfig) -> Result<HjbSolution, CliError> {
    info!("solving on {} grid steps", cfg.grid_k);
    Ok(hjb::solve(market, cfg.grid_k)?)
}

fn z0(market: &Market, sol: &HjbSolution) -> Result<f64, CliError> {
    let p = market.params();
    Ok(sol.value(p.x0, &p.s0, 0.0)?)
}

/// Writes the grid of `g` and `f`, and prints a summary.
pub fn solve(market: &Market, cfg: &RunConfig) -> Result<String, CliError> {
    cfg.prepare_output()?;
    let sol = solve_market(market, cfg)?;
    let d = market.d();
    let rows = sol.grid().iter().zip(sol.g_nodes()).zip(sol.f_nodes()).map(|((t, g), f)| {
        let mut row = vec![*t];
        row.extend(g.transpose().iter().copied());
        row.push(*f);
        row.push(sol.rho(*t));
        row
    });
    let grid_file = match cfg.format {
        OutputFormat::Csv => {
            let mut header = vec!["t".to_string()];
            for i in 1..=d {
                for j in 1..=d {
                    header.push(format!("g_{i}{j}"));
                }
            }
            header.extend(["f".to_string(), "rho".to_string()]);
            let path = cfg.output_dir.join("hjb_grid.csv");
            write_csv(&path, &header, rows)?;
            path
        }
        OutputFormat::Json => {
            let path = cfg.output_dir.join("hjb_grid.json");
            let rows: Vec<_> = rows
                .map(|r| json!({"t": r[0], "g": &r[1..1 + d * d], "f": r[1 + d * d], "rho": r[2 + d * d]}))
                .collect();
            fs::write(&path, to_json(&rows))?;
            path
        }
    };
    let g0 = &sol.g_nodes()[0];
    let summary = json!({
        "z0": z0(market, &sol)?,
        "rho0": sol.rho(0.0),
        "g0": (0..d).map(|i| (0..d).map(|j| g0[(i, j)]).collect::<Vec<_>>()).collect::<Vec<_>>(),
        "f0": sol.f_nodes()[0],
        "grid_k": cfg.grid_k,
        "grid_file": grid_file,
    });
    let text = to_json(&summary);
    fs::write(cfg.output_dir.join("solve_summary.json"), &text)?;
    Ok(text)
}

pub fn residual_check(market: &Market, cfg: &RunConfig, samples: usize, flip_alpha: bool) -> Result<String, CliError> {
    if samples == 0 {
        return Err(CliError::Config("--samples must be positive".into()));
    }
    let sol = solve_market(market, cfg)?;
    let rule = optimal_strategy(market, &sol);
    let flipped = rule.clone().with_flipped_alpha();
    let control = if flip_alpha { SweepControl::Policy(&flipped) } else { SweepControl::Maximizer };
    let summary = residual_sweep(market, &sol, samples, cfg.seed, control)?;
    let passed = summary.passes(RESIDUAL_THRESHOLD);
    let report = json!({
        "samples": summary.samples,
        "max_rel": summary.max_rel,
        "mean_rel": summary.mean_rel,
        "worst": {"x": summary.worst_x, "s": summary.worst_s, "t": summary.worst_t},
        "threshold": RESIDUAL_THRESHOLD,
        "flip_alpha": flip_alpha,
        "passed": passed,
    });
    if passed {
        Ok(to_json(&report))
    } else {
        Err(CliError::ResidualGate { max_rel: summary.max_rel, threshold: RESIDUAL_THRESHOLD, report: to_json(&report) })
    }
}

fn strategy(market: &Market, sol: &HjbSolution, flag: &str) -> Result<Strategy, CliError> {
    let kind: StrategyKind = flag.parse()?;
    Ok(baseline(kind, market, sol)?)
}

/// Runs `rule` on `paths` coupled paths.
pub fn simulate_paths(
    market: &Market,
    rule: &Strategy,
    steps: usize,
    paths: usize,
    seed: u64,
) -> Result<PathBundle, CliError> {
    let sp = simulate_spread(market, steps, paths, seed, SpreadScheme::EulerCoupled, Execution::Parallel)?;
    Ok(simulate_wealth(market, rule, &sp, WealthScheme::LogExact)?)
}

pub(crate) fn path_rows(bundle: &PathBundle, with_id: bool) -> (Vec<String>, Vec<Vec<f64>>) {
    let d = bundle.d;
    let mut header: Vec<String> = if with_id { vec!["path_id".into()] } else { vec![] };
    header.push("t".into());
    header.extend((1..=d).map(|i| format!("S_{i}")));
    header.push("X".into());
    header.extend((1..=d).map(|i| format!("alpha_{i}")));
    header.push("c".into());
    let mut rows = vec![];
    for (p, id) in bundle.path_ids.iter().enumerate() {
        for (k, t) in bundle.times.iter().enumerate() {
            let mut row = if with_id { vec![*id as f64] } else { vec![] };
            row.push(*t);
            row.extend_from_slice(&bundle.s[p][k * d..(k + 1) * d]);
            row.push(bundle.x[p][k]);
            row.extend_from_slice(&bundle.alpha[p][k * d..(k + 1) * d]);
            row.push(bundle.c[p][k]);
            rows.push(row);
        }
    }
    (header, rows)
}

pub fn simulate(market: &Market, cfg: &RunConfig, flag: &str, paths: usize) -> Result<String, CliError> {
    cfg.prepare_output()?;
    let sol = solve_market(market, cfg)?;
    let rule = strategy(market, &sol, flag)?;
    let bundle = simulate_paths(market, &rule, cfg.mc_steps, paths, cfg.seed)?;
    if bundle.rejected > 0 {
        log::warn!("{} paths rejected for non-positive wealth", bundle.rejected);
    }
    let (header, rows) = path_rows(&bundle, true);
    let path = cfg.output_dir.join("paths.csv");
    write_csv(&path, &header, rows.iter().cloned())?;
    Ok(fs::read_to_string(path)?)
}

#[derive(Debug, Serialize)]
pub struct EvaluateReport {
    pub strategy: String,
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub j_hat: f64,
    pub std_err: f64,
    pub rejected: usize,
    pub z_analytic: f64,
    /// `None` when the estimate is deterministic and differs from `z`.
    pub abs_diff_in_se: Option<f64>,
}

pub fn evaluate_report(market: &Market, cfg: &RunConfig, flag: &str) -> Result<EvaluateReport, CliError> {
    let sol = solve_market(market, cfg)?;
    let rule = strategy(market, &sol, flag)?;
    info!("{} paths x {} steps, seed {}", cfg.mc_paths, cfg.mc_steps, cfg.seed);
    let est = estimate_objective(market, &rule, WealthScheme::LogExact, cfg.mc_steps, cfg.mc_paths, cfg.seed, Execution::Parallel)?;
    let z = z0(market, &sol)?;
    let diff = (est.j_hat - z).abs();
    let abs_diff_in_se = if diff == 0.0 {
        Some(0.0)
    } else if est.std_err > 0.0 {
        Some(diff / est.std_err)
    } else {
        None
    };
    Ok(EvaluateReport {
        strategy: rule.kind().to_string(),
        paths: est.paths,
        steps: est.steps,
        seed: est.seed,
        j_hat: est.j_hat,
        std_err: est.std_err,
        rejected: est.rejected_paths,
        z_analytic: z,
        abs_diff_in_se,
    })
}

pub fn evaluate(market: &Market, cfg: &RunConfig, flag: &str) -> Result<String, CliError> {
    let report = evaluate_report(market, cfg, flag)?;
    let text = to_json(&report);
    let is_optimal = report.strategy == StrategyKind::Optimal.to_string();
    if is_optimal && !report.abs_diff_in_se.is_some_and(|r| r <= 3.0) {
        return Err(CliError::OptimalityGate {
            message: match report.abs_diff_in_se {
                Some(r) => format!("|J_hat - z| = {r:.3} standard errors exceeds 3"),
                None => "estimate has zero standard error and differs from z".into(),
            },
            report: text,
        });
    }
    Ok(text)
}

pub fn dominance(market: &Market, cfg: &RunConfig, list: &str) -> Result<String, CliError> {
    let sol = solve_market(market, cfg)?;
    let rules = list
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| strategy(market, &sol, s))
        .collect::<Result<Vec<_>, _>>()?;
    let report = dominance_test(market, &rules, cfg.mc_steps, cfg.mc_paths, cfg.seed, Execution::Parallel)?;
    let text = to_json(&json!({
        "z_analytic": z0(market, &sol)?,
        "passed": report.passes(),
        "report": report,
    }));
    if !report.passes() {
        return Err(CliError::OptimalityGate {
            message: "a strategy beats the optimal one by more than 3 standard errors".into(),
            report: text,
        });
    }
    Ok(text)
}

pub fn ledger(market: &Market, cfg: &RunConfig, samples: usize) -> Result<String, CliError> {
    cfg.prepare_output()?;
    let ledger = variants::discrepancy_ledger(market, cfg.grid_k, samples, cfg.seed)?;
    let text = to_json(&ledger);
    fs::write(cfg.output_dir.join("formula_variants.json"), &text)?;
    Ok(text)
}
