//! Figure data for scalar markets plus a gnuplot script that renders it.

use std::fs;

use nalgebra::DVector;
use serde_json::json;
use spreadopt::hjb::{self, HjbSolution};
use spreadopt::presets::FIGURE_SETS;
use spreadopt::strategy::optimal_strategy;
use spreadopt::{Market, ModelParams};

use crate::commands::{path_rows, simulate_paths, write_csv};
use crate::config::RunConfig;
use crate::CliError;

pub const SURFACE_S: usize = 30;
pub const SURFACE_T: usize = 11;
pub const SWEEP_X: usize = 50;

/// Weighted form, so a grid over `[-b, b]` is exactly mirror-symmetric.
fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    let last = (n - 1) as f64;
    (0..n)
        .map(|i| match i {
            0 => a,
            _ if i + 1 == n => b,
            _ => ((last - i as f64) * a + i as f64 * b) / last,
        })
        .collect()
}

/// `z(x, s, t)` on a spread-by-time grid; rows are `(s, t, z)`.
pub fn value_surface(sol: &HjbSolution, x: f64, horizon: f64) -> Result<Vec<[f64; 3]>, CliError> {
    let mut rows = Vec::with_capacity(SURFACE_S * SURFACE_T);
    for s in linspace(-10.0, 10.0, SURFACE_S) {
        let sv = DVector::from_element(1, s);
        for t in linspace(0.0, horizon, SURFACE_T) {
            rows.push([s, t, sol.value(x, &sv, t)?]);
        }
    }
    Ok(rows)
}

/// `z(x, s, t)` against wealth on a log grid over `[x_lo, x_hi]`.
pub fn wealth_sweep(sol: &HjbSolution, s: f64, t: f64, x_lo: f64, x_hi: f64) -> Result<Vec<[f64; 2]>, CliError> {
    let sv = DVector::from_element(1, s);
    linspace(x_lo.ln(), x_hi.ln(), SWEEP_X)
        .into_iter()
        .map(|lx| {
            let x = lx.exp();
            Ok([x, sol.value(x, &sv, t)?])
        })
        .collect()
}

fn gnuplot_script() -> String {
    let mut gp = String::from(
        "set datafile separator ','\nset key autotitle columnhead\nset terminal pngcairo size 900,600\n\n\
         set output 'value_surface.png'\nset xlabel 's'\nset ylabel 't'\nset zlabel 'z'\n\
         set dgrid3d 11,30\nsplot 'value_surface.csv' using 1:2:3 with lines\nunset dgrid3d\n\n\
         set output 'x_sweep.png'\nset xlabel 'x'\nset ylabel 'z'\nset logscale x\n\
         plot 'x_sweep.csv' using 1:2 with lines\nunset logscale x\n",
    );
    for i in 1..=FIGURE_SETS.len() {
        gp.push_str(&format!(
            "\nset output 'paths_{i}.png'\nset multiplot layout 2,2\nset xlabel 't'\n\
             plot 'paths_{i}.csv' using 1:2 with lines title 'S'\n\
             plot 'paths_{i}.csv' using 1:3 with lines title 'X'\n\
             plot 'paths_{i}.csv' using 1:4 with lines title 'alpha'\n\
             plot 'paths_{i}.csv' using 1:5 with lines title 'c'\nunset multiplot\n"
        ));
    }
    gp
}

pub fn figures(market: &Market, cfg: &RunConfig) -> Result<String, CliError> {
    if market.d() != 1 {
        return Err(CliError::Config(format!("figures need a scalar market, got d = {}", market.d())));
    }
    cfg.prepare_output()?;
    let dir = &cfg.output_dir;
    let p = market.params();
    let sol = hjb::solve(market, cfg.grid_k)?;

    let surface = value_surface(&sol, p.x0, p.horizon)?;
    write_csv(&dir.join("value_surface.csv"), &["s".into(), "t".into(), "z".into()], surface.iter().map(|r| r.to_vec()))?;
    let sweep = wealth_sweep(&sol, p.s0[0], 0.0, p.x0 / 100.0, p.x0 * 100.0)?;
    write_csv(&dir.join("x_sweep.csv"), &["x".into(), "z".into()], sweep.iter().map(|r| r.to_vec()))?;

    let mut files = vec!["value_surface.csv".to_string(), "x_sweep.csv".to_string()];
    for (i, (sigma, r, kappa)) in FIGURE_SETS.into_iter().enumerate() {
        let params = ModelParams::scalar(kappa, sigma, r, p.horizon, p.varpi, p.x0, p.s0[0]);
        let fig_market = Market::new(params)?;
        let fig_sol = hjb::solve(&fig_market, cfg.grid_k)?;
        let rule = optimal_strategy(&fig_market, &fig_sol);
        let bundle = simulate_paths(&fig_market, &rule, cfg.mc_steps, 1, cfg.seed)?;
        let (header, rows) = path_rows(&bundle, false);
        let name = format!("paths_{}.csv", i + 1);
        write_csv(&dir.join(&name), &header, rows)?;
        files.push(name);
    }
    fs::write(dir.join("figures.gp"), gnuplot_script())?;
    files.push("figures.gp".into());
    let summary = json!({ "output_dir": dir, "files": files });
    Ok(serde_json::to_string_pretty(&summary).expect("serializable summary"))
}
