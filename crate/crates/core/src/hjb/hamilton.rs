//! The Hamiltonian of the controlled state `(X, S)` and its pointwise
//! maximizer over the controls `(alpha, c)`.
//!
//! With drift `a(x, s, u) = (r x - alpha' A1 s - c, A s)` and diffusion
//! `b(u) = (alpha' sigma ; sigma)` the un-maximized Hamiltonian is
//!
//! ```text
//! H0(x, s, q, M, u) = a' q + 1/2 tr(b b' M) + ln c.
//! ```
//!
//! For `M11 < 0` and `q1 > 0` it is strictly concave in `(alpha, c)` and the
//! maximizer is `alpha0 = (sigma sigma')^{-1} tau / M11`, `c0 = 1 / q1`, with
//! `mu = (M_{1,2}, ..., M_{1,1+d})` and `tau = q1 A1 s - sigma sigma' mu`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::model::Market;

/// Checked arguments of the Hamiltonian at one spread value.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonArgs {
    pub q: DVector<f64>,
    pub m: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub tau: DVector<f64>,
}

impl HamiltonArgs {
    pub fn new(market: &Market, s: &DVector<f64>, q: &DVector<f64>, m: &DMatrix<f64>) -> Result<Self> {
        let d = market.d();
        check_dims(d, s, q, m)?;
        let (m11, q1) = (m[(0, 0)], q[0]);
        if !(m11 < 0.0 && q1 > 0.0) {
            return Err(Error::HamiltonUnbounded { m11, q1 });
        }
        let mu = DVector::from_fn(d, |j, _| m[(0, j + 1)]);
        let s_hat = &market.derived().a1 * s;
        let tau = s_hat * q1 - &market.derived().sig2 * &mu;
        Ok(HamiltonArgs { q: q.clone(), m: m.clone(), mu, tau })
    }

    pub fn m11(&self) -> f64 {
        self.m[(0, 0)]
    }

    pub fn q1(&self) -> f64 {
        self.q[0]
    }

    /// `tau' (sigma sigma')^{-1} tau`.
    pub fn tau_quadratic(&self, market: &Market) -> f64 {
        (self.tau.transpose() * &market.derived().sig2_inv * &self.tau)[(0, 0)]
    }
}

fn check_dims(d: usize, s: &DVector<f64>, q: &DVector<f64>, m: &DMatrix<f64>) -> Result<()> {
    if s.len() != d || q.len() != d + 1 || m.shape() != (d + 1, d + 1) {
        return Err(Error::DimensionMismatch(format!(
            "Hamiltonian arguments: s {}, q {}, M {:?} for d = {d}",
            s.len(),
            q.len(),
            m.shape()
        )));
    }
    Ok(())
}

/// Evaluates `H0` directly from the drift and diffusion of the state.
#[allow(clippy::too_many_arguments)]
pub fn hamilton_h0(
    market: &Market,
    x: f64,
    s: &DVector<f64>,
    q: &DVector<f64>,
    m: &DMatrix<f64>,
    alpha: &DVector<f64>,
    c: f64,
) -> Result<f64> {
    let d = market.d();
    check_dims(d, s, q, m)?;
    if alpha.len() != d {
        return Err(Error::DimensionMismatch(format!("alpha has length {}", alpha.len())));
    }
    if c <= 0.0 || !c.is_finite() {
        return Err(Error::BadConsumption(c));
    }
    let p = market.params();
    let s_hat = &market.derived().a1 * s;

    let mut drift = DVector::zeros(d + 1);
    drift[0] = p.r * x - alpha.dot(&s_hat) - c;
    drift.rows_mut(1, d).copy_from(&(&p.a * s));

    let mut diff = DMatrix::zeros(d + 1, p.m());
    diff.row_mut(0).copy_from(&(alpha.transpose() * &p.sigma));
    diff.view_mut((1, 0), (d, p.m())).copy_from(&p.sigma);

    let bbt = &diff * diff.transpose();
    Ok(drift.dot(q) + 0.5 * (bbt * m).trace() + c.ln())
}

/// Maximizer of `H0` over `(alpha, c)` and the maximal value.
#[derive(Debug, Clone, PartialEq)]
pub struct HamiltonMax {
    pub alpha: DVector<f64>,
    pub c: f64,
    pub h: f64,
}

pub fn hamilton_max(
    market: &Market,
    x: f64,
    s: &DVector<f64>,
    q: &DVector<f64>,
    m: &DMatrix<f64>,
) -> Result<HamiltonMax> {
    let args = HamiltonArgs::new(market, s, q, m)?;
    let alpha = &market.derived().sig2_inv * &args.tau / args.m11();
    let c = 1.0 / args.q1();
    let h = hamilton_h0(market, x, s, q, m, &alpha, c)?;
    Ok(HamiltonMax { alpha, c, h })
}

/// Closed-form maximal value
/// `r x q1 - ln q1 - 1 + tau' (ss')^{-1} tau / (2|M11|) + (A s)' q_s + 1/2 tr(ss' M_ss)`.
///
/// `trace_weight` is the factor on the last trace term (1/2 for the true
/// Hamiltonian). `flip_tau` evaluates with `-tau`.
pub fn hamilton_closed_form(
    market: &Market,
    x: f64,
    s: &DVector<f64>,
    q: &DVector<f64>,
    m: &DMatrix<f64>,
    trace_weight: f64,
    flip_tau: bool,
) -> Result<f64> {
    let mut args = HamiltonArgs::new(market, s, q, m)?;
    if flip_tau {
        args.tau = -args.tau;
    }
    let d = market.d();
    let p = market.params();
    let q_s = q.rows(1, d);
    let m_ss = m.view((1, 1), (d, d));
    let drift_s = (&p.a * s).dot(&q_s);
    let tr = (&market.derived().sig2 * m_ss).trace();
    Ok(p.r * x * args.q1() - args.q1().ln() - 1.0
        + args.tau_quadratic(market) / (2.0 * args.m11().abs())
        + drift_s
        + trace_weight * tr)
}
