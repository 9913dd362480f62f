//! Two independent routes to the quadratic coefficient `g(t)`:
//!
//! * [`solve_g_ode`]: classical RK4 on the backward Lyapunov equation
//!   `g' = -(A'g + gA) - rho(t)/2 * B`, `g(T) = 0`;
//! * [`solve_g_expint`]: the vectorized solution
//!   `Z(t) = 1/2 int_t^T rho(v) e^{Gh (t - v)} vect(B) dv` with
//!   `Gh = build_gamma(-A)`, evaluated interval by interval with
//!   Gauss-Legendre quadrature and matrix exponentials.
//!
//! `build_gamma(-A)` vectorizes `G -> -A'(G + G')`. Its flow does not keep
//! `Z` symmetric, but the symmetric part of the result obeys the Lyapunov
//! equation above, so the expint route symmetrizes at the end.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{build_gamma, mat_exp, symmetrize, unvect, vect};
use crate::model::Market;

pub const MIN_GRID: usize = 100;

/// Default number of time steps on `[0, T]`.
pub const DEFAULT_GRID: usize = 2000;

// Gauss-Legendre nodes/weights on [-1, 1].
const GL_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683_1,
    0.0,
    0.538_469_310_105_683_1,
    0.906_179_845_938_664,
];
const GL_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Uniform grid `0 = t_0 < ... < t_k = T`.
pub fn uniform_grid(horizon: f64, k: usize) -> Vec<f64> {
    let h = horizon / k as f64;
    let mut grid: Vec<f64> = (0..=k).map(|i| i as f64 * h).collect();
    grid[k] = horizon;
    grid
}

fn check_grid(k: usize) -> Result<()> {
    if k < MIN_GRID {
        return Err(Error::GridTooCoarse { k, min: MIN_GRID });
    }
    Ok(())
}

/// Right-hand side of the Lyapunov equation for a given source weight.
pub fn lyapunov_rhs(a: &DMatrix<f64>, b: &DMatrix<f64>, weight: f64, g: &DMatrix<f64>) -> DMatrix<f64> {
    -(a.transpose() * g + g * a) - b * weight
}

/// Integrates `y' = rhs(t, y)` backward from `y(T) = terminal` with RK4 on a
/// uniform `k`-step grid. Output is ordered by increasing time.
pub fn rk4_backward<F>(horizon: f64, k: usize, terminal: DMatrix<f64>, rhs: F) -> Vec<DMatrix<f64>>
where
    F: Fn(f64, &DMatrix<f64>) -> DMatrix<f64>,
{
    let h = horizon / k as f64;
    let mut out = vec![terminal.clone(); k + 1];
    let mut y = terminal;
    for i in (0..k).rev() {
        let t = (i + 1) as f64 * h;
        // Step size is -h.
        let k1 = rhs(t, &y);
        let k2 = rhs(t - 0.5 * h, &(&y - &k1 * (0.5 * h)));
        let k3 = rhs(t - 0.5 * h, &(&y - &k2 * (0.5 * h)));
        let k4 = rhs(t - h, &(&y - &k3 * h));
        y = &y - (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        out[i] = y.clone();
    }
    out
}

/// Lyapunov route, RK4 with `k` steps.
pub fn solve_g_ode(market: &Market, k: usize) -> Result<Vec<DMatrix<f64>>> {
    check_grid(k)?;
    let a = &market.params().a;
    let b = &market.derived().b_mat;
    let d = market.d();
    let g = rk4_backward(market.horizon(), k, DMatrix::zeros(d, d), |t, g| {
        symmetrize(&lyapunov_rhs(a, b, 0.5 * market.rho(t), g))
    });
    Ok(g)
}

/// Vectorized route: `Z(t_i) = e^{-Gh h} Z(t_{i+1}) + 1/2 int_0^h rho(t_i + u) e^{-Gh u} b du`.
pub fn solve_g_expint(market: &Market, k: usize) -> Result<Vec<DMatrix<f64>>> {
    check_grid(k)?;
    let gamma_hat = build_gamma(&(-&market.params().a)).into_matrix();
    solve_vectorized(market, k, &gamma_hat, ExponentSign::BackwardPropagator)
}

/// Which propagator the vectorized integral uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum ExponentSign {
    /// `e^{Gamma (t - v)}` for `Z' = Gamma Z - rho/2 b`.
    BackwardPropagator,
    /// `e^{Gamma (v - t)}`.
    ForwardPropagator,
}

pub(crate) fn solve_vectorized(
    market: &Market,
    k: usize,
    gamma: &DMatrix<f64>,
    sign: ExponentSign,
) -> Result<Vec<DMatrix<f64>>> {
    let d = market.d();
    let horizon = market.horizon();
    let h = horizon / k as f64;
    let b_vec = vect(&market.derived().b_mat);
    // e^{s * Gamma * (t - v)} with v - t = u in [0, h].
    let s = match sign {
        ExponentSign::BackwardPropagator => -1.0,
        ExponentSign::ForwardPropagator => 1.0,
    };
    let step = mat_exp(&(gamma * (s * h)))?;
    let mut nodes = Vec::with_capacity(GL_NODES.len());
    for (&x, &w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
        let u = 0.5 * h * (x + 1.0);
        let prop_b: DVector<f64> = mat_exp(&(gamma * (s * u)))? * &b_vec;
        nodes.push((u, 0.5 * h * w, prop_b));
    }

    let mut z = DVector::zeros(d * d);
    let mut out = vec![DMatrix::zeros(d, d); k + 1];
    for i in (0..k).rev() {
        let t = i as f64 * h;
        let mut local = DVector::zeros(d * d);
        for (u, w, pb) in &nodes {
            local.axpy(0.5 * w * market.rho(t + u), pb, 1.0);
        }
        z = &step * z + local;
        out[i] = symmetrize(&unvect(&z, d));
    }
    Ok(out)
}

/// `int_t^T g(v) dv` on the grid by trapezoid with the endpoint-derivative
/// correction `h^2/12 (g'(t_i) - g'(t_{i+1}))`.
pub(crate) fn tail_integral(grid: &[f64], g: &[DMatrix<f64>], g_dot: &[DMatrix<f64>]) -> Vec<DMatrix<f64>> {
    let k = grid.len() - 1;
    let mut out = vec![DMatrix::zeros(g[0].nrows(), g[0].ncols()); k + 1];
    for i in (0..k).rev() {
        let h = grid[i + 1] - grid[i];
        let piece = (&g[i] + &g[i + 1]) * (0.5 * h) + (&g_dot[i] - &g_dot[i + 1]) * (h * h / 12.0);
        out[i] = &out[i + 1] + piece;
    }
    out
}

/// Integrand of `f`: `tr(sigma sigma' g) + r rho - 1 - ln rho`.
pub(crate) fn f_integrand(market: &Market, t: f64, g: &DMatrix<f64>) -> Result<f64> {
    let rho = market.rho(t);
    if rho <= 0.0 {
        return Err(Error::NegativeRho(rho));
    }
    let tr = (&market.derived().sig2 * g).trace();
    Ok(tr + market.params().r * rho - 1.0 - rho.ln())
}

/// `f(t) = int_t^T [tr(sigma sigma' g) + r rho - 1 - ln rho] dv` on the grid
/// of `g` (uniform over `[0, T]`), with `f(T) = 0`.
pub fn compute_f(market: &Market, g: &[DMatrix<f64>]) -> Result<Vec<f64>> {
    if g.len() < 2 {
        return Err(Error::BadCount { name: "grid", value: g.len() });
    }
    let k = g.len() - 1;
    let grid = uniform_grid(market.horizon(), k);
    let a = &market.params().a;
    let b = &market.derived().b_mat;
    let sig2 = &market.derived().sig2;
    let r = market.params().r;

    let mut phi = Vec::with_capacity(k + 1);
    let mut phi_dot = Vec::with_capacity(k + 1);
    for (t, gi) in grid.iter().zip(g) {
        phi.push(f_integrand(market, *t, gi)?);
        let rho = market.rho(*t);
        let gd = lyapunov_rhs(a, b, 0.5 * rho, gi);
        phi_dot.push((sig2 * gd).trace() - r + 1.0 / rho);
    }
    let mut f = vec![0.0; k + 1];
    for i in (0..k).rev() {
        let h = grid[i + 1] - grid[i];
        f[i] = f[i + 1] + 0.5 * h * (phi[i] + phi[i + 1]) + h * h / 12.0 * (phi_dot[i] - phi_dot[i + 1]);
    }
    Ok(f)
}
