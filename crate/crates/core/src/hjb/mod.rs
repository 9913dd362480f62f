//! Closed-form solution of the HJB equation for log utility on a spread
//! market.
//!
//! The value function is `z(x, s, t) = rho(t) ln x + s' g(t) s + f(t)` with
//! `rho(t) = T - t + varpi`, `g` solving the backward Lyapunov equation
//! `g' = -(A'g + gA) - rho/2 * A1' (sigma sigma')^{-1} A1`, `g(T) = 0`, and
//! `f(t) = int_t^T [tr(sigma sigma' g) + r rho - 1 - ln rho] dv`.
//!
//! Every formula above is derived from the Hamiltonian `H0` in
//! [`hamilton`] and is checked by [`residual::hjb_residual`], which
//! evaluates `z_t + sup_u H0` on the stored solution.

pub mod hamilton;
pub mod lyapunov;
pub mod residual;
pub mod variants;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::symmetrize;
use crate::model::Market;

pub use hamilton::{hamilton_h0, hamilton_max, HamiltonArgs, HamiltonMax};
pub use lyapunov::{compute_f, solve_g_expint, solve_g_ode, DEFAULT_GRID, MIN_GRID};
pub use residual::{hjb_residual, residual_with_control, ResidualSummary, SweepControl};

/// Grid representation of `g`, `int_t^T g`, and `f`, with their time
/// derivatives at the nodes. Values between nodes are linearly interpolated.
#[derive(Debug, Clone, PartialEq)]
pub struct HjbSolution {
    horizon: f64,
    varpi: f64,
    grid: Vec<f64>,
    g: Vec<DMatrix<f64>>,
    g_dot: Vec<DMatrix<f64>>,
    g_tilde: Vec<DMatrix<f64>>,
    f: Vec<f64>,
    f_dot: Vec<f64>,
}

/// Value and derivatives of `z` at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueDerivatives {
    pub z: f64,
    pub z_t: f64,
    /// Gradient `(z_x, z_s)`, length `d + 1`.
    pub grad: DVector<f64>,
    /// Hessian in `(x, s)`, `(d + 1) x (d + 1)`.
    pub hess: DMatrix<f64>,
}

/// Solves for `g` by RK4 on `k` uniform steps and assembles `f`.
pub fn solve(market: &Market, k: usize) -> Result<HjbSolution> {
    let g = solve_g_ode(market, k)?;
    let grid = lyapunov::uniform_grid(market.horizon(), k);
    let a = &market.params().a;
    let b = &market.derived().b_mat;
    let g_dot: Vec<_> = grid
        .iter()
        .zip(&g)
        .map(|(t, gi)| symmetrize(&lyapunov::lyapunov_rhs(a, b, 0.5 * market.rho(*t), gi)))
        .collect();
    let f = compute_f(market, &g)?;
    let f_dot = grid
        .iter()
        .zip(&g)
        .map(|(t, gi)| lyapunov::f_integrand(market, *t, gi).map(|v| -v))
        .collect::<Result<Vec<_>>>()?;
    let g_tilde = lyapunov::tail_integral(&grid, &g, &g_dot);
    Ok(HjbSolution {
        horizon: market.horizon(),
        varpi: market.params().varpi,
        grid,
        g,
        g_dot,
        g_tilde,
        f,
        f_dot,
    })
}

impl HjbSolution {
    /// Builds a solution from sampled `g` and `f` on a uniform grid,
    /// differentiating them numerically. `g` is symmetrized first since only
    /// its symmetric part enters `s' g s`.
    pub fn from_samples(market: &Market, g: Vec<DMatrix<f64>>, f: Vec<f64>) -> Result<Self> {
        let k = g.len().saturating_sub(1);
        if k < 4 || f.len() != g.len() {
            return Err(Error::BadCount { name: "grid", value: g.len() });
        }
        let grid = lyapunov::uniform_grid(market.horizon(), k);
        let h = market.horizon() / k as f64;
        let g: Vec<_> = g.iter().map(symmetrize).collect();
        let g_dot = (0..=k).map(|i| five_point(i, k, h, |j| g[j].clone())).collect::<Vec<_>>();
        let f_dot = (0..=k)
            .map(|i| five_point(i, k, h, |j| DMatrix::from_element(1, 1, f[j]))[(0, 0)])
            .collect();
        let g_tilde = lyapunov::tail_integral(&grid, &g, &g_dot);
        Ok(HjbSolution {
            horizon: market.horizon(),
            varpi: market.params().varpi,
            grid,
            g,
            g_dot,
            g_tilde,
            f,
            f_dot,
        })
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn g_nodes(&self) -> &[DMatrix<f64>] {
        &self.g
    }

    pub fn g_tilde_nodes(&self) -> &[DMatrix<f64>] {
        &self.g_tilde
    }

    pub fn f_nodes(&self) -> &[f64] {
        &self.f
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn varpi(&self) -> f64 {
        self.varpi
    }

    pub fn rho(&self, t: f64) -> f64 {
        self.horizon - t + self.varpi
    }

    fn locate(&self, t: f64) -> Result<(usize, f64)> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon: self.horizon });
        }
        let k = self.grid.len() - 1;
        let h = self.horizon / k as f64;
        let i = ((t / h).floor() as usize).min(k - 1);
        let w = ((t - self.grid[i]) / (self.grid[i + 1] - self.grid[i])).clamp(0.0, 1.0);
        Ok((i, w))
    }

    fn lerp_mat(v: &[DMatrix<f64>], i: usize, w: f64) -> DMatrix<f64> {
        if w == 0.0 {
            v[i].clone()
        } else if w == 1.0 {
            v[i + 1].clone()
        } else {
            &v[i] * (1.0 - w) + &v[i + 1] * w
        }
    }

    fn lerp(v: &[f64], i: usize, w: f64) -> f64 {
        if w == 0.0 {
            v[i]
        } else if w == 1.0 {
            v[i + 1]
        } else {
            v[i] * (1.0 - w) + v[i + 1] * w
        }
    }

    pub fn g_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let (i, w) = self.locate(t)?;
        Ok(Self::lerp_mat(&self.g, i, w))
    }

    pub fn g_tilde_at(&self, t: f64) -> Result<DMatrix<f64>> {
        let (i, w) = self.locate(t)?;
        Ok(Self::lerp_mat(&self.g_tilde, i, w))
    }

    pub fn f_at(&self, t: f64) -> Result<f64> {
        let (i, w) = self.locate(t)?;
        Ok(Self::lerp(&self.f, i, w))
    }

    /// `z(x, s, t)`.
    pub fn value(&self, x: f64, s: &DVector<f64>, t: f64) -> Result<f64> {
        if x <= 0.0 || !x.is_finite() {
            return Err(Error::NonPositiveWealth(x));
        }
        let (i, w) = self.locate(t)?;
        let g = Self::lerp_mat(&self.g, i, w);
        Ok(self.rho(t) * x.ln() + (s.transpose() * g * s)[(0, 0)] + Self::lerp(&self.f, i, w))
    }

    /// Analytic derivatives of `z`: `z_x = rho/x`, `z_xx = -rho/x^2`,
    /// `z_s = 2 g s`, `z_ss = 2 g`, no cross terms, and
    /// `z_t = -ln x + s' g' s + f'` using the stored node derivatives.
    pub fn derivatives(&self, x: f64, s: &DVector<f64>, t: f64) -> Result<ValueDerivatives> {
        if x <= 0.0 || !x.is_finite() {
            return Err(Error::NonPositiveWealth(x));
        }
        let d = s.len();
        if d != self.g[0].nrows() {
            return Err(Error::DimensionMismatch(format!("s has length {d}")));
        }
        let (i, w) = self.locate(t)?;
        let g = Self::lerp_mat(&self.g, i, w);
        let g_dot = Self::lerp_mat(&self.g_dot, i, w);
        let f = Self::lerp(&self.f, i, w);
        let f_dot = Self::lerp(&self.f_dot, i, w);
        let rho = self.rho(t);
        let gs = &g * s;

        let z = rho * x.ln() + s.dot(&gs) + f;
        let z_t = -x.ln() + (s.transpose() * g_dot * s)[(0, 0)] + f_dot;
        let mut grad = DVector::zeros(d + 1);
        grad[0] = rho / x;
        grad.rows_mut(1, d).copy_from(&(gs * 2.0));
        let mut hess = DMatrix::zeros(d + 1, d + 1);
        hess[(0, 0)] = -rho / (x * x);
        hess.view_mut((1, 1), (d, d)).copy_from(&(g * 2.0));
        Ok(ValueDerivatives { z, z_t, grad, hess })
    }
}

/// `z(x, s, t)` for a solved market.
pub fn value_z(sol: &HjbSolution, x: f64, s: &DVector<f64>, t: f64) -> Result<f64> {
    sol.value(x, s, t)
}

// Fourth-order finite difference at node i of a uniform grid with k >= 4 steps.
fn five_point<F>(i: usize, k: usize, h: f64, at: F) -> DMatrix<f64>
where
    F: Fn(usize) -> DMatrix<f64>,
{
    const STENCILS: [[f64; 5]; 5] = [
        [-25.0, 48.0, -36.0, 16.0, -3.0],
        [-3.0, -10.0, 18.0, -6.0, 1.0],
        [1.0, -8.0, 0.0, 8.0, -1.0],
        [-1.0, 6.0, -18.0, 10.0, 3.0],
        [3.0, -16.0, 36.0, -48.0, 25.0],
    ];
    let (base, pos) = if i < 2 {
        (0, i)
    } else if i + 2 > k {
        (k - 4, i + 4 - k)
    } else {
        (i - 2, 2)
    };
    let c = STENCILS[pos];
    let mut acc = at(base) * c[0];
    for (j, &cj) in c.iter().enumerate().skip(1) {
        if cj != 0.0 {
            acc += at(base + j) * cj;
        }
    }
    acc / (12.0 * h)
}
