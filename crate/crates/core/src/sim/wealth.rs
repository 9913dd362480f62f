//! Wealth dynamics driven by the same increments as the spread.

use serde::{Deserialize, Serialize};

use super::spread::{Coeffs, SpreadPaths};
use crate::error::{Error, Result};
use crate::model::Market;
use crate::strategy::Policy;

/// Discretization of `dX = (r X - alpha' A1 S - c) dt + alpha' sigma dW`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WealthScheme {
    /// Euler-Maruyama on `X`. Paths reaching `X <= 0` are rejected.
    EulerDirect,
    /// Step of `ln X` with the Ito correction and a trapezoid drift. Only
    /// for wealth-proportional rules, which keep `X > 0`.
    LogExact,
}

impl WealthScheme {
    /// LogExact for proportional rules, EulerDirect otherwise.
    pub fn for_policy(policy: &dyn Policy) -> Self {
        if policy.is_proportional() {
            WealthScheme::LogExact
        } else {
            WealthScheme::EulerDirect
        }
    }

    pub(crate) fn check(self, policy: &dyn Policy) -> Result<()> {
        if self == WealthScheme::LogExact && !policy.is_proportional() {
            return Err(Error::SchemeMismatch);
        }
        Ok(())
    }
}

/// Wealth state of one path under one rule.
///
/// Under LogExact, `x` holds `ln X` and `alpha`, `c` hold the control per
/// unit of wealth. Under EulerDirect they hold `X` and the control itself.
#[derive(Debug, Clone)]
pub(crate) struct Lane {
    scheme: WealthScheme,
    pub x: f64,
    pub alive: bool,
    pub alpha: Vec<f64>,
    pub c: f64,
    s_hat: Vec<f64>,
    // LogExact: drift of ln X at the current node, and the weight with
    // which it still has to enter the step that ended here.
    drift: f64,
    pending: f64,
}

impl Lane {
    pub fn new(scheme: WealthScheme, x0: f64, d: usize) -> Self {
        let x = match scheme {
            WealthScheme::LogExact => x0.ln(),
            WealthScheme::EulerDirect => x0,
        };
        Lane { scheme, x, alive: true, alpha: vec![0.0; d], c: 0.0, s_hat: vec![0.0; d], drift: 0.0, pending: 0.0 }
    }

    pub fn reset(&mut self, x0: f64) {
        *self = Lane::new(self.scheme, x0, self.alpha.len());
    }

    pub fn wealth(&self) -> f64 {
        match self.scheme {
            WealthScheme::LogExact => self.x.exp(),
            WealthScheme::EulerDirect => self.x,
        }
    }

    pub fn log_wealth(&self) -> f64 {
        match self.scheme {
            WealthScheme::LogExact => self.x,
            WealthScheme::EulerDirect => self.x.ln(),
        }
    }

    fn carry(&mut self, coeffs: &Coeffs, s: &[f64]) -> f64 {
        coeffs.s_hat(s, &mut self.s_hat);
        self.alpha.iter().zip(&self.s_hat).map(|(a, h)| a * h).sum()
    }

    /// Evaluates the control at `(t, X, s)` and returns `ln c`, or `None`
    /// (and kills the lane) if wealth or consumption is not positive.
    pub fn node(&mut self, coeffs: &Coeffs, policy: &dyn Policy, t: f64, s: &[f64]) -> Option<f64> {
        if !self.alive {
            return None;
        }
        let ln_c = match self.scheme {
            WealthScheme::LogExact => {
                self.c = policy.control_into(t, 1.0, s, &mut self.alpha);
                let carry = self.carry(coeffs, s);
                self.drift = coeffs.r - carry - self.c - 0.5 * coeffs.quad(&self.alpha);
                self.x += self.pending * self.drift;
                self.pending = 0.0;
                self.x + self.c.ln()
            }
            WealthScheme::EulerDirect => {
                if self.x > 0.0 {
                    self.c = policy.control_into(t, self.x, s, &mut self.alpha);
                    self.c.ln()
                } else {
                    f64::NAN
                }
            }
        };
        if ln_c.is_finite() && self.c > 0.0 {
            Some(ln_c)
        } else {
            self.alive = false;
            None
        }
    }

    /// Steps over `dt` with increments `dw`, using the control from the last
    /// [`Lane::node`] call at `s`.
    ///
    /// LogExact integrates the drift of `ln X` by the trapezoid rule between
    /// this node and the next one, so the step is completed by the next
    /// `node` call.
    pub fn advance(&mut self, coeffs: &Coeffs, dt: f64, s: &[f64], dw: &[f64]) {
        if !self.alive {
            return;
        }
        let lin = coeffs.lin(&self.alpha, dw);
        match self.scheme {
            WealthScheme::LogExact => {
                self.x += 0.5 * dt * self.drift + lin;
                self.pending = 0.5 * dt;
            }
            WealthScheme::EulerDirect => {
                let drift = coeffs.r * self.x - self.carry(coeffs, s) - self.c;
                self.x += drift * dt + lin;
                if self.x <= 0.0 {
                    self.alive = false;
                }
            }
        }
        if !self.x.is_finite() {
            self.alive = false;
        }
    }

    /// The control in absolute units at the last node.
    pub fn absolute_control(&self, alpha: &mut [f64]) -> f64 {
        let scale = match self.scheme {
            WealthScheme::LogExact => self.wealth(),
            WealthScheme::EulerDirect => 1.0,
        };
        for (o, a) in alpha.iter_mut().zip(&self.alpha) {
            *o = scale * a;
        }
        scale * self.c
    }
}

/// Wealth paths with the spreads and controls that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle {
    pub times: Vec<f64>,
    pub d: usize,
    pub seed: u64,
    /// Index of each retained path in the driving [`SpreadPaths`].
    pub path_ids: Vec<usize>,
    /// Per retained path, `(n + 1) * d` spread values.
    pub s: Vec<Vec<f64>>,
    /// Per retained path, `n + 1` wealth values.
    pub x: Vec<Vec<f64>>,
    /// Per retained path, `(n + 1) * d` holdings.
    pub alpha: Vec<Vec<f64>>,
    /// Per retained path, `n + 1` consumption rates.
    pub c: Vec<Vec<f64>>,
    /// Per retained path, the realized objective.
    pub objective: Vec<f64>,
    pub rejected: usize,
}

/// Runs `policy` along coupled spread paths. Rejected paths are dropped and
/// counted.
pub fn simulate_wealth(
    market: &Market,
    policy: &dyn Policy,
    spread: &SpreadPaths,
    scheme: WealthScheme,
) -> Result<PathBundle> {
    scheme.check(policy)?;
    let dw_all = spread.dw.as_ref().ok_or(Error::MissingIncrements)?;
    if spread.d != market.d() || spread.m != market.m() {
        return Err(Error::DimensionMismatch("spread paths do not match the market".into()));
    }
    let coeffs = Coeffs::new(market);
    let (d, m) = (coeffs.d, coeffs.m);
    let n = spread.steps();
    let dt = spread.dt();
    let varpi = market.params().varpi;
    let x0 = market.params().x0;
    let mut out = PathBundle {
        times: spread.times.clone(),
        d,
        seed: spread.seed,
        path_ids: vec![],
        s: vec![],
        x: vec![],
        alpha: vec![],
        c: vec![],
        objective: vec![],
        rejected: 0,
    };
    let mut lane = Lane::new(scheme, x0, d);
    'paths: for (i, dw) in dw_all.iter().enumerate() {
        lane.reset(x0);
        let mut xs = Vec::with_capacity(n + 1);
        let mut alphas = vec![0.0; (n + 1) * d];
        let mut cs = Vec::with_capacity(n + 1);
        let mut j = 0.0;
        for k in 0..=n {
            let t = spread.times[k];
            let s = spread.at(i, k);
            let Some(ln_c) = lane.node(&coeffs, policy, t, s) else {
                out.rejected += 1;
                continue 'paths;
            };
            let w = if k == 0 || k == n { 0.5 } else { 1.0 };
            j += w * dt * ln_c;
            xs.push(lane.wealth());
            cs.push(lane.absolute_control(&mut alphas[k * d..(k + 1) * d]));
            if k < n {
                lane.advance(&coeffs, dt, s, &dw[k * m..(k + 1) * m]);
            }
        }
        out.path_ids.push(i);
        out.s.push(spread.s[i].clone());
        out.objective.push(j + varpi * lane.log_wealth());
        out.x.push(xs);
        out.alpha.push(alphas);
        out.c.push(cs);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::ModelParams;
    use crate::sim::{simulate_spread, Execution, SpreadScheme};

    /// Holds nothing and consumes nothing.
    struct Idle;

    impl Policy for Idle {
        fn control_into(&self, _: f64, _: f64, _: &[f64], alpha: &mut [f64]) -> f64 {
            alpha.iter_mut().for_each(|a| *a = 0.0);
            1e-300
        }
    }

    /// Consumes a fixed amount regardless of wealth.
    struct Spender(f64);

    impl Policy for Spender {
        fn control_into(&self, _: f64, _: f64, _: &[f64], alpha: &mut [f64]) -> f64 {
            alpha.iter_mut().for_each(|a| *a = 0.0);
            self.0
        }
    }

    fn market(x0: f64) -> Market {
        Market::new(ModelParams::scalar(0.1, 0.5, 0.05, 1.0, 1.0, x0, 5.0)).unwrap()
    }

    #[test]
    fn bank_account_compounds_discretely() {
        let m = market(100.0);
        let sp = simulate_spread(&m, 50, 2, 3, SpreadScheme::EulerCoupled, Execution::Sequential).unwrap();
        let b = simulate_wealth(&m, &Idle, &sp, WealthScheme::EulerDirect).unwrap();
        let want = 100.0 * (1.0 + 0.05 / 50.0f64).powi(50);
        for x in &b.x {
            assert!((x[50] - want).abs() < 1e-9 * want);
        }
    }

    #[test]
    fn overspending_is_rejected() {
        let m = market(1.0);
        let sp = simulate_spread(&m, 20, 4, 3, SpreadScheme::EulerCoupled, Execution::Sequential).unwrap();
        let b = simulate_wealth(&m, &Spender(5.0), &sp, WealthScheme::EulerDirect).unwrap();
        assert_eq!(b.rejected, 4);
        assert!(b.x.is_empty());
    }

    #[test]
    fn log_exact_needs_proportional_rule() {
        let m = market(1.0);
        let sp = simulate_spread(&m, 20, 1, 3, SpreadScheme::EulerCoupled, Execution::Sequential).unwrap();
        assert_eq!(simulate_wealth(&m, &Idle, &sp, WealthScheme::LogExact), Err(Error::SchemeMismatch));
        let exact = simulate_spread(&m, 20, 1, 3, SpreadScheme::ExactOu, Execution::Sequential).unwrap();
        assert_eq!(simulate_wealth(&m, &Idle, &exact, WealthScheme::EulerDirect), Err(Error::MissingIncrements));
    }
}
