//! Reference parameter sets and random well-posed markets for testing.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::model::ModelParams;

/// The scalar reference market: `T = 1`, `r = 0.01`, `kappa = 0.1`,
/// `sigma = 0.5`, `x0 = 100`, terminal weight 1, starting spread `s0`.
pub fn reference_scalar(s0: f64) -> ModelParams {
    ModelParams::scalar(0.1, 0.5, 0.01, 1.0, 1.0, 100.0, s0)
}

/// `(sigma, r, kappa)` of the four path-figure markets.
pub const FIGURE_SETS: [(f64, f64, f64); 4] = [(1.0, 0.01, 0.5), (5.0, 4.0, 5.0), (20.0, 0.01, 0.5), (0.1, 0.01, 5.0)];

/// A random market of dimension `d` with stable, generally non-symmetric
/// drift and a well-conditioned square volatility.
pub fn random_market<R: Rng>(rng: &mut R, d: usize) -> ModelParams {
    let mut uniform = |n: usize| DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let m = uniform(d);
    // -(M M' + 0.1 I) is symmetric negative definite; a similarity transform
    // keeps the spectrum and breaks the symmetry.
    let sym = -(&m * m.transpose() + DMatrix::identity(d, d) * 0.1);
    let p = DMatrix::identity(d, d) + uniform(d) * 0.3;
    let a = match p.clone().try_inverse() {
        Some(p_inv) => &p * sym * p_inv,
        None => sym,
    };
    let sigma = DMatrix::identity(d, d) * 0.5 + uniform(d) * 0.2;
    let r = rng.random_range(0.0..0.05);
    let horizon = rng.random_range(0.5..2.0);
    let varpi = rng.random_range(0.5..2.0);
    let s0 = DVector::from_fn(d, |_, _| rng.random_range(-3.0..3.0));
    ModelParams { a, sigma, r, horizon, varpi, x0: 100.0, s0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Market;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_markets_validate() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in 1..=4 {
            for _ in 0..25 {
                Market::new(random_market(&mut rng, d)).unwrap();
            }
        }
    }

    #[test]
    fn figure_sets_validate() {
        for (sigma, r, kappa) in FIGURE_SETS {
            Market::new(ModelParams::scalar(kappa, sigma, r, 1.0, 1.0, 100.0, 0.0)).unwrap();
        }
        Market::new(reference_scalar(5.0)).unwrap();
    }
}
