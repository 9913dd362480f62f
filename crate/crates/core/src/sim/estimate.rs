//! Monte Carlo estimation of the objective
//! `J = E[ int_0^T ln c dt + varpi ln X_T ]` and paired strategy comparisons.

use serde::Serialize;

use super::exec::{map_paths, path_rng, Execution};
use super::spread::{check_counts, draw_increments, Coeffs};
use super::wealth::{Lane, WealthScheme};
use crate::error::{Error, Result};
use crate::model::Market;
use crate::strategy::{Policy, Strategy, StrategyKind};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McEstimate {
    pub j_hat: f64,
    pub std_err: f64,
    /// Retained paths.
    pub paths: usize,
    pub steps: usize,
    pub seed: u64,
    pub rejected_paths: usize,
}

/// Neumaier-compensated sum of `values` in ascending order, so the result
/// does not depend on the order of the input.
fn ordered_sum(sorted: &[f64]) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in sorted {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Sample mean and standard error of the mean.
pub fn mean_and_se(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mean = ordered_sum(&sorted) / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let mut sq: Vec<f64> = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
    sq.sort_by(f64::total_cmp);
    let var = ordered_sum(&sq) / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

impl McEstimate {
    pub fn from_samples(values: &[f64], steps: usize, seed: u64, rejected_paths: usize) -> Self {
        let (j_hat, std_err) = mean_and_se(values);
        McEstimate { j_hat, std_err, paths: values.len(), steps, seed, rejected_paths }
    }
}

/// Realized objective of every rule on every path, `None` where the path was
/// rejected for that rule. All rules see the same increments.
pub fn path_objectives(
    market: &Market,
    policies: &[&dyn Policy],
    schemes: &[WealthScheme],
    n: usize,
    paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vec<Option<f64>>>> {
    check_counts(n, paths)?;
    if policies.len() != schemes.len() {
        return Err(Error::DimensionMismatch("one scheme per policy".into()));
    }
    for (p, s) in policies.iter().zip(schemes) {
        s.check(*p)?;
    }
    let coeffs = Coeffs::new(market);
    let (d, m) = (coeffs.d, coeffs.m);
    let horizon = market.horizon();
    let dt = horizon / n as f64;
    let sqrt_dt = dt.sqrt();
    let p = market.params();
    let (x0, varpi) = (p.x0, p.varpi);
    let s0 = p.s0.as_slice();

    struct Scratch {
        s: Vec<f64>,
        s_next: Vec<f64>,
        dw: Vec<f64>,
        lanes: Vec<Lane>,
        j: Vec<f64>,
    }
    let init = || Scratch {
        s: vec![0.0; d],
        s_next: vec![0.0; d],
        dw: vec![0.0; m],
        lanes: schemes.iter().map(|s| Lane::new(*s, x0, d)).collect(),
        j: vec![0.0; policies.len()],
    };

    Ok(map_paths(exec, paths, init, |w, i| {
        let mut rng = path_rng(seed, i);
        w.s.copy_from_slice(s0);
        for (lane, j) in w.lanes.iter_mut().zip(w.j.iter_mut()) {
            lane.reset(x0);
            *j = 0.0;
        }
        for k in 0..=n {
            let t = if k == n { horizon } else { k as f64 * dt };
            let weight = if k == 0 || k == n { 0.5 * dt } else { dt };
            for ((lane, j), policy) in w.lanes.iter_mut().zip(w.j.iter_mut()).zip(policies) {
                if let Some(ln_c) = lane.node(&coeffs, *policy, t, &w.s) {
                    *j += weight * ln_c;
                }
            }
            if k == n {
                break;
            }
            draw_increments(&mut rng, sqrt_dt, &mut w.dw);
            for lane in w.lanes.iter_mut() {
                lane.advance(&coeffs, dt, &w.s, &w.dw);
            }
            coeffs.euler_step(&w.s, &w.dw, dt, &mut w.s_next);
            std::mem::swap(&mut w.s, &mut w.s_next);
        }
        w.lanes
            .iter()
            .zip(&w.j)
            .map(|(lane, j)| lane.alive.then(|| j + varpi * lane.log_wealth()))
            .collect()
    }))
}

/// Monte Carlo estimate of the objective of `policy` with `n` steps.
pub fn estimate_objective(
    market: &Market,
    policy: &dyn Policy,
    scheme: WealthScheme,
    n: usize,
    paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<McEstimate> {
    let per_path = path_objectives(market, &[policy], &[scheme], n, paths, seed, exec)?;
    let values: Vec<f64> = per_path.iter().filter_map(|v| v[0]).collect();
    Ok(McEstimate::from_samples(&values, n, seed, paths - values.len()))
}

/// One rule compared against the optimal rule on common paths.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub strategy: String,
    pub estimate: McEstimate,
    /// Mean of `J(rule) - J(optimal)` over paths retained by both.
    pub diff_mean: f64,
    pub diff_std_err: f64,
    /// `diff_mean <= 3 * diff_std_err`.
    pub within_bound: bool,
    /// `diff_mean < -3 * diff_std_err`.
    pub strictly_dominated: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DominanceReport {
    pub optimal: McEstimate,
    pub comparisons: Vec<Comparison>,
}

impl DominanceReport {
    pub fn passes(&self) -> bool {
        self.comparisons.iter().all(|c| c.within_bound)
    }
}

/// Compares every strategy against the first optimal one in `strategies`
/// under common random numbers.
pub fn dominance_test(
    market: &Market,
    strategies: &[Strategy],
    n: usize,
    paths: usize,
    seed: u64,
    exec: Execution,
) -> Result<DominanceReport> {
    let opt = strategies
        .iter()
        .position(|s| s.kind() == StrategyKind::Optimal)
        .ok_or(Error::MissingOptimal)?;
    let policies: Vec<&dyn Policy> = strategies.iter().map(|s| s as &dyn Policy).collect();
    let schemes: Vec<WealthScheme> = policies.iter().map(|p| WealthScheme::for_policy(*p)).collect();
    let per_path = path_objectives(market, &policies, &schemes, n, paths, seed, exec)?;

    let column = |i: usize| -> Vec<f64> { per_path.iter().filter_map(|v| v[i]).collect() };
    let estimate = |i: usize| {
        let v = column(i);
        McEstimate::from_samples(&v, n, seed, paths - v.len())
    };
    let comparisons = (0..strategies.len())
        .filter(|&i| i != opt)
        .map(|i| {
            let diffs: Vec<f64> = per_path.iter().filter_map(|v| Some(v[i]? - v[opt]?)).collect();
            let (diff_mean, diff_std_err) = mean_and_se(&diffs);
            Comparison {
                strategy: policies[i].label(),
                estimate: estimate(i),
                diff_mean,
                diff_std_err,
                within_bound: diff_mean <= 3.0 * diff_std_err,
                strictly_dominated: diff_mean < -3.0 * diff_std_err,
            }
        })
        .collect();
    Ok(DominanceReport { optimal: estimate(opt), comparisons })
}
