//! Market model: a riskless bond with rate `r` and `d` spread assets
//! following `dS = A S dt + sigma dW` with an `m`-dimensional Brownian motion.
//!
//! [`ModelParams`] is the raw specification. [`validate`] checks it and
//! produces the [`DerivedMatrices`]; [`Market`] bundles both and is what the
//! solver and simulator consume.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, symmetrize};

/// Smallest admissible ratio of extreme singular values of `sigma sigma'`.
pub const SINGULARITY_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Mean-reversion matrix, `d x d`.
    pub a: DMatrix<f64>,
    /// Volatility matrix, `d x m`.
    pub sigma: DMatrix<f64>,
    /// Riskless rate.
    pub r: f64,
    /// Investment horizon `T`.
    pub horizon: f64,
    /// Weight of the terminal log-wealth utility.
    pub varpi: f64,
    /// Initial wealth.
    pub x0: f64,
    /// Initial spread values. Any sign is allowed.
    pub s0: DVector<f64>,
}

impl ModelParams {
    /// One spread asset with `dS = -kappa S dt + sigma dW`.
    pub fn scalar(kappa: f64, sigma: f64, r: f64, horizon: f64, varpi: f64, x0: f64, s0: f64) -> Self {
        ModelParams {
            a: DMatrix::from_element(1, 1, -kappa),
            sigma: DMatrix::from_element(1, 1, sigma),
            r,
            horizon,
            varpi,
            x0,
            s0: DVector::from_element(1, s0),
        }
    }

    pub fn d(&self) -> usize {
        self.a.nrows()
    }

    pub fn m(&self) -> usize {
        self.sigma.ncols()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DerivedMatrices {
    /// `A1 = r I - A`.
    pub a1: DMatrix<f64>,
    /// `sigma sigma'`.
    pub sig2: DMatrix<f64>,
    pub sig2_inv: DMatrix<f64>,
    /// `A1' (sigma sigma')^{-1} A1`, the source term of the g equation.
    pub b_mat: DMatrix<f64>,
}

/// Checks the model assumptions and computes the derived matrices.
pub fn validate(params: &ModelParams) -> Result<DerivedMatrices> {
    let d = params.a.nrows();
    if d == 0 || params.a.ncols() != d {
        return Err(Error::DimensionMismatch(format!(
            "A must be square and non-empty, got {:?}",
            params.a.shape()
        )));
    }
    if params.sigma.nrows() != d || params.sigma.ncols() == 0 {
        return Err(Error::DimensionMismatch(format!(
            "sigma must be {d} x m with m >= 1, got {:?}",
            params.sigma.shape()
        )));
    }
    if params.s0.len() != d {
        return Err(Error::DimensionMismatch(format!(
            "s0 has length {}, expected {d}",
            params.s0.len()
        )));
    }
    for (name, value) in [
        ("r", params.r),
        ("T", params.horizon),
        ("varpi", params.varpi),
        ("x0", params.x0),
    ] {
        if !value.is_finite() {
            return Err(Error::BadScalar { name, value });
        }
    }
    if params.r < 0.0 {
        return Err(Error::BadScalar { name: "r", value: params.r });
    }
    if params.horizon <= 0.0 {
        return Err(Error::BadScalar { name: "T", value: params.horizon });
    }
    if params.varpi <= 0.0 {
        return Err(Error::BadScalar { name: "varpi", value: params.varpi });
    }
    if params.x0 <= 0.0 {
        return Err(Error::BadScalar { name: "x0", value: params.x0 });
    }
    if params.a.iter().chain(params.sigma.iter()).chain(params.s0.iter()).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }

    let max_real = params
        .a
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max);
    if max_real >= 0.0 {
        return Err(Error::EigenvalueViolation { max_real });
    }

    let sig2 = symmetrize(&(&params.sigma * params.sigma.transpose()));
    let sv = sig2.singular_values();
    let (lo, hi) = sv.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let ratio = if hi > 0.0 { lo / hi } else { 0.0 };
    if ratio < SINGULARITY_RATIO {
        return Err(Error::SingularVolatility { ratio });
    }
    let sig2_inv = sig2
        .clone()
        .cholesky()
        .map(|c| symmetrize(&c.inverse()))
        .ok_or(Error::SingularVolatility { ratio })?;

    let a1 = DMatrix::identity(d, d) * params.r - &params.a;
    if a1.clone().lu().try_inverse().is_none() {
        return Err(Error::SingularDrift);
    }
    let b_mat = symmetrize(&(a1.transpose() * &sig2_inv * &a1));

    Ok(DerivedMatrices { a1, sig2, sig2_inv, b_mat })
}

/// Validated model: parameters plus derived matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct Market {
    params: ModelParams,
    derived: DerivedMatrices,
}

impl Market {
    pub fn new(params: ModelParams) -> Result<Self> {
        let derived = validate(&params)?;
        Ok(Market { params, derived })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn derived(&self) -> &DerivedMatrices {
        &self.derived
    }

    pub fn d(&self) -> usize {
        self.params.d()
    }

    pub fn m(&self) -> usize {
        self.params.m()
    }

    pub fn horizon(&self) -> f64 {
        self.params.horizon
    }

    /// `rho(t) = T - t + varpi`, the coefficient of `ln x` in the value function.
    pub fn rho(&self, t: f64) -> f64 {
        self.params.horizon - t + self.params.varpi
    }

    /// Returns a copy with different initial conditions.
    pub fn with_initial(&self, x0: f64, s0: DVector<f64>) -> Result<Self> {
        let mut params = self.params.clone();
        params.x0 = x0;
        params.s0 = s0;
        Market::new(params)
    }
}

/// Exact transition of the spread over `[t0, t1]`:
/// `S(t1) = mean_map * S(t0) + N(0, cov)`.
pub fn ou_transition(market: &Market, t0: f64, t1: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if t1 < t0 {
        return Err(Error::BadTimeOrder { t0, t1 });
    }
    let horizon = market.horizon();
    for t in [t0, t1] {
        if !(0.0..=horizon).contains(&t) {
            return Err(Error::TimeOutOfRange { t, horizon });
        }
    }
    ou_transition_step(market, t1 - t0)
}

/// Same as [`ou_transition`] for an elapsed time `dt` without the horizon check.
pub fn ou_transition_step(market: &Market, dt: f64) -> Result<(DMatrix<f64>, DMatrix<f64>)> {
    if dt < 0.0 {
        return Err(Error::BadTimeOrder { t0: 0.0, t1: dt });
    }
    let a = &market.params.a;
    let mean_map = linalg::mat_exp(&(a * dt))?;
    let cov = symmetrize(&linalg::block_exp_integral(a, &market.derived.sig2, dt)?);
    Ok((mean_map, cov))
}
