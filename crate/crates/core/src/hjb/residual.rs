//! Pointwise residual `z_t + H(x, s, dz, d2z)` of the HJB equation, and a
//! randomized sweep over the state space.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{hamilton_h0, hamilton_max, HjbSolution};
use crate::error::Result;
use crate::model::Market;
use crate::strategy::Policy;

/// `z_t + sup_u H0` at `(x, s, t)`.
pub fn hjb_residual(market: &Market, sol: &HjbSolution, x: f64, s: &DVector<f64>, t: f64) -> Result<f64> {
    let dz = sol.derivatives(x, s, t)?;
    let hm = hamilton_max(market, x, s, &dz.grad, &dz.hess)?;
    Ok(dz.z_t + hm.h)
}

/// `z_t + H0(u)` for a given control `u = (alpha, c)`. Zero exactly when
/// `u` attains the supremum and `z` solves the equation.
pub fn residual_with_control(
    market: &Market,
    sol: &HjbSolution,
    x: f64,
    s: &DVector<f64>,
    t: f64,
    alpha: &DVector<f64>,
    c: f64,
) -> Result<f64> {
    let dz = sol.derivatives(x, s, t)?;
    Ok(dz.z_t + hamilton_h0(market, x, s, &dz.grad, &dz.hess, alpha, c)?)
}

/// Which control enters the Hamiltonian during a sweep.
#[derive(Clone, Copy)]
pub enum SweepControl<'a> {
    /// The pointwise maximizer.
    Maximizer,
    /// A feedback rule evaluated at the sampled state.
    Policy(&'a dyn Policy),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResidualSummary {
    pub samples: usize,
    /// Max of `|residual| / (1 + |z|)`.
    pub max_rel: f64,
    pub mean_rel: f64,
    pub worst_x: f64,
    pub worst_s: Vec<f64>,
    pub worst_t: f64,
}

impl ResidualSummary {
    pub fn passes(&self, threshold: f64) -> bool {
        self.max_rel <= threshold
    }
}

/// Samples `x` log-uniform in `[1, 1e3]`, `s` uniform in `[-10, 10]^d` and
/// `t` uniform in `[0, T)`, and reports relative residuals.
pub fn residual_sweep(
    market: &Market,
    sol: &HjbSolution,
    samples: usize,
    seed: u64,
    control: SweepControl<'_>,
) -> Result<ResidualSummary> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = market.d();
    let horizon = market.horizon();
    let mut summary = ResidualSummary {
        samples,
        max_rel: 0.0,
        mean_rel: 0.0,
        worst_x: f64::NAN,
        worst_s: vec![],
        worst_t: f64::NAN,
    };
    let mut total = 0.0;
    for _ in 0..samples {
        let x = (rng.random::<f64>() * 1e3f64.ln()).exp();
        let s = DVector::from_fn(d, |_, _| rng.random_range(-10.0..10.0));
        let t = rng.random::<f64>() * horizon;
        let res = match control {
            SweepControl::Maximizer => hjb_residual(market, sol, x, &s, t)?,
            SweepControl::Policy(p) => {
                let u = p.control(t, x, &s);
                residual_with_control(market, sol, x, &s, t, &u.alpha, u.c)?
            }
        };
        let z = sol.value(x, &s, t)?;
        let rel = res.abs() / (1.0 + z.abs());
        let rel = if rel.is_nan() { f64::INFINITY } else { rel };
        total += rel;
        if rel > summary.max_rel || summary.worst_s.is_empty() {
            summary.max_rel = rel;
            summary.worst_x = x;
            summary.worst_s = s.iter().copied().collect();
            summary.worst_t = t;
        }
    }
    if samples > 0 {
        summary.mean_rel = total / samples as f64;
    }
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hjb::solve;
    use crate::model::ModelParams;
    use crate::strategy::optimal_strategy;

    #[test]
    fn residual_near_horizon_matches_hand_limit() {
        // s = 0, varpi = 1, t -> T: z_t -> -ln x - (r - 1), H -> r - 1 + ln x.
        let m = Market::new(ModelParams::scalar(0.1, 0.5, 0.01, 1.0, 1.0, 100.0, 0.0)).unwrap();
        let sol = solve(&m, 500).unwrap();
        let x = 30.0;
        let s = DVector::zeros(1);
        let dz = sol.derivatives(x, &s, 1.0).unwrap();
        assert!((dz.z_t - (-x.ln() - 0.01 + 1.0)).abs() < 1e-13);
        let hm = hamilton_max(&m, x, &s, &dz.grad, &dz.hess).unwrap();
        assert!((hm.h - (0.01 - 1.0 + x.ln())).abs() < 1e-13);
        assert!(hjb_residual(&m, &sol, x, &s, 1.0 - 1e-12).unwrap().abs() < 1e-12);
    }

    #[test]
    fn optimal_policy_attains_the_supremum() {
        let m = Market::new(ModelParams::scalar(0.5, 1.0, 0.01, 1.0, 1.0, 100.0, 0.0)).unwrap();
        let sol = solve(&m, 500).unwrap();
        let st = optimal_strategy(&m, &sol);
        let good = residual_sweep(&m, &sol, 500, 3, SweepControl::Policy(&st)).unwrap();
        assert!(good.passes(1e-6), "{good:?}");
        let bad = residual_sweep(&m, &sol, 500, 3, SweepControl::Policy(&st.with_flipped_alpha())).unwrap();
        assert!(!bad.passes(1e-6));
    }
}
