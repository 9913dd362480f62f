//! Investment/consumption rules `(t, x, s) -> (alpha, c)`.
//!
//! The optimal rule invests `alpha* = -(sigma sigma')^{-1} A1 s x` units in
//! the spreads and consumes at rate `c* = x / rho(t)`. The baselines keep one
//! of the two decisions and replace the other, so that Monte Carlo
//! comparisons isolate each decision.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hjb::HjbSolution;
use crate::model::Market;

/// A control value.
#[derive(Debug, Clone, PartialEq)]
pub struct Control {
    /// Units held of each spread asset.
    pub alpha: DVector<f64>,
    /// Consumption rate.
    pub c: f64,
}

/// A deterministic feedback rule.
pub trait Policy: Sync {
    /// Writes `alpha(t, x, s)` into `alpha` and returns `c(t, x, s)`.
    fn control_into(&self, t: f64, x: f64, s: &[f64], alpha: &mut [f64]) -> f64;

    /// True if `(alpha, c)` is linear in wealth, i.e.
    /// `control(t, x, s) = x * control(t, 1, s)`.
    fn is_proportional(&self) -> bool {
        false
    }

    fn label(&self) -> String {
        "custom".to_string()
    }

    fn control(&self, t: f64, x: f64, s: &DVector<f64>) -> Control {
        let mut alpha = DVector::zeros(s.len());
        let c = self.control_into(t, x, s.as_slice(), alpha.as_mut_slice());
        Control { alpha, c }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StrategyKind {
    Optimal,
    NoTrade,
    /// `lambda * alpha*` with `lambda` in `[0, 1]`.
    ScaledOptimal(f64),
    ConstantConsumption,
}

impl FromStr for StrategyKind {
    type Err = Error;

    /// Parses `optimal`, `no-trade`, `scaled:<lambda>`, or `const-c`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "optimal" => Ok(StrategyKind::Optimal),
            "no-trade" => Ok(StrategyKind::NoTrade),
            "const-c" => Ok(StrategyKind::ConstantConsumption),
            _ => {
                let lambda = s
                    .strip_prefix("scaled:")
                    .and_then(|v| v.parse::<f64>().ok())
                    .ok_or_else(|| Error::UnknownKind(s.to_string()))?;
                if !(0.0..=1.0).contains(&lambda) {
                    return Err(Error::UnknownKind(s.to_string()));
                }
                Ok(StrategyKind::ScaledOptimal(lambda))
            }
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StrategyKind::Optimal => write!(f, "optimal"),
            StrategyKind::NoTrade => write!(f, "no-trade"),
            StrategyKind::ScaledOptimal(l) => write!(f, "scaled:{l}"),
            StrategyKind::ConstantConsumption => write!(f, "const-c"),
        }
    }
}

/// One of the shipped strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    kind: StrategyKind,
    d: usize,
    /// `-(sigma sigma')^{-1} A1`, row-major.
    gain: Vec<f64>,
    horizon: f64,
    varpi: f64,
    alpha_sign: f64,
}

impl Strategy {
    fn build(kind: StrategyKind, market: &Market, sol: &HjbSolution) -> Self {
        let d = market.d();
        let gain: DMatrix<f64> = -(&market.derived().sig2_inv * &market.derived().a1);
        Strategy {
            kind,
            d,
            gain: gain.transpose().as_slice().to_vec(),
            horizon: sol.horizon(),
            varpi: sol.varpi(),
            alpha_sign: 1.0,
        }
    }

    pub fn kind(&self) -> StrategyKind {
        self.kind
    }

    /// Diagnostic: the same rule with the sign of `alpha` reversed.
    pub fn with_flipped_alpha(mut self) -> Self {
        self.alpha_sign = -self.alpha_sign;
        self
    }

    fn rho(&self, t: f64) -> f64 {
        self.horizon - t + self.varpi
    }

    fn alpha_scale(&self) -> Option<f64> {
        match self.kind {
            StrategyKind::Optimal => Some(1.0),
            StrategyKind::ScaledOptimal(l) => Some(l),
            StrategyKind::NoTrade | StrategyKind::ConstantConsumption => None,
        }
    }
}

impl Policy for Strategy {
    fn control_into(&self, t: f64, x: f64, s: &[f64], alpha: &mut [f64]) -> f64 {
        debug_assert_eq!(s.len(), self.d);
        match self.alpha_scale() {
            Some(lambda) => {
                let scale = self.alpha_sign * lambda * x;
                for (i, a) in alpha.iter_mut().enumerate() {
                    let row = &self.gain[i * self.d..(i + 1) * self.d];
                    *a = scale * row.iter().zip(s).map(|(g, s)| g * s).sum::<f64>();
                }
            }
            None => alpha.iter_mut().for_each(|a| *a = 0.0),
        }
        match self.kind {
            StrategyKind::ConstantConsumption => x / (self.horizon + self.varpi),
            _ => x / self.rho(t),
        }
    }

    fn is_proportional(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        if self.alpha_sign < 0.0 {
            format!("{}(flipped)", self.kind)
        } else {
            self.kind.to_string()
        }
    }
}

/// `alpha*(t, x, s) = -(sigma sigma')^{-1} A1 s x`, `c*(t, x, s) = x / rho(t)`.
pub fn optimal_strategy(market: &Market, sol: &HjbSolution) -> Strategy {
    Strategy::build(StrategyKind::Optimal, market, sol)
}

pub fn baseline(kind: StrategyKind, market: &Market, sol: &HjbSolution) -> Result<Strategy> {
    if let StrategyKind::ScaledOptimal(l) = kind {
        if !(0.0..=1.0).contains(&l) {
            return Err(Error::UnknownKind(kind.to_string()));
        }
    }
    Ok(Strategy::build(kind, market, sol))
}

/// Drift and diffusion of `dX*/X*` along the optimal rule:
/// `a* = r + s_hat' (ss')^{-1} s_hat - 1/rho(t)` and `b* = -sigma' (ss')^{-1} s_hat`
/// with `s_hat = A1 s`.
pub fn optimal_wealth_coeffs(market: &Market, s: &DVector<f64>, t: f64) -> (f64, DVector<f64>) {
    let dm = market.derived();
    let s_hat = &dm.a1 * s;
    let w = &dm.sig2_inv * &s_hat;
    let a_star = market.params().r + s_hat.dot(&w) - 1.0 / market.rho(t);
    let b_star = -(market.params().sigma.transpose() * w);
    (a_star, b_star)
}
