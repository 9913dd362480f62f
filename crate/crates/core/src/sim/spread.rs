//! Spread path generation.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::exec::{map_paths, path_rng, Execution};
use crate::error::{Error, Result};
use crate::model::{ou_transition_step, Market};

/// How the spread is advanced over one step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SpreadScheme {
    /// Exact Gaussian transition. Does not expose the Wiener increments, so
    /// it cannot drive wealth.
    ExactOu,
    /// Euler-Maruyama from stored increments `dW`, which wealth reuses.
    EulerCoupled,
}

/// Row-major copies of the model matrices for the inner loops.
#[derive(Debug, Clone)]
pub(crate) struct Coeffs {
    pub d: usize,
    pub m: usize,
    pub a: Vec<f64>,
    pub sigma: Vec<f64>,
    pub a1: Vec<f64>,
    pub r: f64,
}

fn row_major(m: &DMatrix<f64>) -> Vec<f64> {
    m.transpose().as_slice().to_vec()
}

impl Coeffs {
    pub fn new(market: &Market) -> Self {
        let p = market.params();
        Coeffs {
            d: market.d(),
            m: market.m(),
            a: row_major(&p.a),
            sigma: row_major(&p.sigma),
            a1: row_major(&market.derived().a1),
            r: p.r,
        }
    }

    /// `out = A1 s`.
    pub fn s_hat(&self, s: &[f64], out: &mut [f64]) {
        mat_vec(&self.a1, self.d, s, out);
    }

    /// `s_next = s + A s dt + sigma dw`.
    pub fn euler_step(&self, s: &[f64], dw: &[f64], dt: f64, s_next: &mut [f64]) {
        let (d, m) = (self.d, self.m);
        for i in 0..d {
            let drift: f64 = self.a[i * d..(i + 1) * d].iter().zip(s).map(|(a, s)| a * s).sum();
            let noise: f64 = self.sigma[i * m..(i + 1) * m].iter().zip(dw).map(|(v, w)| v * w).sum();
            s_next[i] = s[i] + drift * dt + noise;
        }
    }

    /// `alpha' sigma dw`.
    pub fn lin(&self, alpha: &[f64], dw: &[f64]) -> f64 {
        let (d, m) = (self.d, self.m);
        (0..m).map(|j| (0..d).map(|i| alpha[i] * self.sigma[i * m + j]).sum::<f64>() * dw[j]).sum()
    }

    /// `|alpha' sigma|^2`.
    pub fn quad(&self, alpha: &[f64]) -> f64 {
        let (d, m) = (self.d, self.m);
        (0..m)
            .map(|j| {
                let b: f64 = (0..d).map(|i| alpha[i] * self.sigma[i * m + j]).sum();
                b * b
            })
            .sum()
    }
}

pub(crate) fn mat_vec(a: &[f64], d: usize, x: &[f64], out: &mut [f64]) {
    let cols = x.len();
    for i in 0..d {
        out[i] = a[i * cols..(i + 1) * cols].iter().zip(x).map(|(a, x)| a * x).sum();
    }
}

/// Factor `L` with `L L' = cov`. Falls back to the eigen-decomposition for
/// semidefinite input, clamping round-off negatives.
pub fn factor_covariance(cov: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = cov.clone().cholesky() {
        return Ok(ch.l());
    }
    let eig = cov.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let min = eig.eigenvalues.min();
    if !min.is_finite() || min < -1e-10 * scale.max(1.0) {
        return Err(Error::CovFactorizationFailure(min));
    }
    let roots = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    Ok(&eig.eigenvectors * DMatrix::from_diagonal(&roots))
}

pub fn time_grid(horizon: f64, n: usize) -> Vec<f64> {
    let dt = horizon / n as f64;
    (0..=n).map(|k| if k == n { horizon } else { k as f64 * dt }).collect()
}

pub(crate) fn check_counts(n: usize, paths: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::BadCount { name: "steps", value: n });
    }
    if paths == 0 {
        return Err(Error::BadCount { name: "paths", value: paths });
    }
    Ok(())
}

/// Simulated spread paths on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpreadPaths {
    pub times: Vec<f64>,
    pub d: usize,
    pub m: usize,
    pub seed: u64,
    pub scheme: SpreadScheme,
    /// Per path, `(n + 1) * d` values, node-major.
    pub s: Vec<Vec<f64>>,
    /// Per path, `n * m` Wiener increments (coupled scheme only).
    pub dw: Option<Vec<Vec<f64>>>,
}

impl SpreadPaths {
    pub fn paths(&self) -> usize {
        self.s.len()
    }

    pub fn steps(&self) -> usize {
        self.times.len() - 1
    }

    pub fn dt(&self) -> f64 {
        self.times[self.steps()] / self.steps() as f64
    }

    /// `S(t_k)` on path `i`.
    pub fn at(&self, i: usize, k: usize) -> &[f64] {
        &self.s[i][k * self.d..(k + 1) * self.d]
    }

    /// The same paths on a grid `factor` times coarser, driven by the summed
    /// increments.
    pub fn coarsen(&self, market: &Market, factor: usize) -> Result<SpreadPaths> {
        let dw = self.dw.as_ref().ok_or(Error::MissingIncrements)?;
        let n = self.steps();
        if factor == 0 || n % factor != 0 {
            return Err(Error::BadCount { name: "coarsening factor", value: factor });
        }
        let nc = n / factor;
        let m = self.m;
        let coarse_dw: Vec<Vec<f64>> = dw
            .iter()
            .map(|w| {
                let mut out = vec![0.0; nc * m];
                for k in 0..n {
                    for j in 0..m {
                        out[(k / factor) * m + j] += w[k * m + j];
                    }
                }
                out
            })
            .collect();
        let horizon = self.times[n];
        let s = coarse_dw
            .iter()
            .map(|w| euler_spread_from_increments(market, w, horizon / nc as f64))
            .collect();
        Ok(SpreadPaths {
            times: time_grid(horizon, nc),
            d: self.d,
            m,
            seed: self.seed,
            scheme: self.scheme,
            s,
            dw: Some(coarse_dw),
        })
    }
}

/// Rebuilds an Euler spread path from `s0` and its increments.
pub fn euler_spread_from_increments(market: &Market, dw: &[f64], dt: f64) -> Vec<f64> {
    let c = Coeffs::new(market);
    let n = dw.len() / c.m;
    let mut s = vec![0.0; (n + 1) * c.d];
    s[..c.d].copy_from_slice(market.params().s0.as_slice());
    for k in 0..n {
        let (head, tail) = s.split_at_mut((k + 1) * c.d);
        c.euler_step(&head[k * c.d..], &dw[k * c.m..(k + 1) * c.m], dt, &mut tail[..c.d]);
    }
    s
}

/// Fills `dw` with `sqrt(dt) * N(0, I)`.
pub(crate) fn draw_increments<R: Rng>(rng: &mut R, sqrt_dt: f64, dw: &mut [f64]) {
    for w in dw.iter_mut() {
        let z: f64 = rng.sample(StandardNormal);
        *w = sqrt_dt * z;
    }
}

/// Simulates `paths` spread paths with `n` steps. Path `i` draws from stream
/// `i` of `seed`.
pub fn simulate_spread(
    market: &Market,
    n: usize,
    paths: usize,
    seed: u64,
    scheme: SpreadScheme,
    exec: Execution,
) -> Result<SpreadPaths> {
    check_counts(n, paths)?;
    let c = Coeffs::new(market);
    let (d, m) = (c.d, c.m);
    let horizon = market.horizon();
    let dt = horizon / n as f64;
    let s0 = market.params().s0.as_slice();

    let (s, dw) = match scheme {
        SpreadScheme::ExactOu => {
            let (mean_map, cov) = ou_transition_step(market, dt)?;
            let mean_map = row_major(&mean_map);
            let factor = row_major(&factor_covariance(&cov)?);
            let s = map_paths(exec, paths, || vec![0.0; 2 * d], |buf, i| {
                let mut rng = path_rng(seed, i);
                let mut out = vec![0.0; (n + 1) * d];
                out[..d].copy_from_slice(s0);
                let (z, eps) = buf.split_at_mut(d);
                for k in 0..n {
                    for v in z.iter_mut() {
                        *v = rng.sample(StandardNormal);
                    }
                    mat_vec(&factor, d, z, eps);
                    let (head, tail) = out.split_at_mut((k + 1) * d);
                    mat_vec(&mean_map, d, &head[k * d..], &mut tail[..d]);
                    for (o, e) in tail[..d].iter_mut().zip(eps.iter()) {
                        *o += e;
                    }
                }
                out
            });
            (s, None)
        }
        SpreadScheme::EulerCoupled => {
            let out = map_paths(exec, paths, || (), |_, i| {
                let mut rng = path_rng(seed, i);
                let mut dw = vec![0.0; n * m];
                draw_increments(&mut rng, dt.sqrt(), &mut dw);
                let s = euler_spread_from_increments(market, &dw, dt);
                (s, dw)
            });
            let (s, dw): (Vec<_>, Vec<_>) = out.into_iter().unzip();
            (s, Some(dw))
        }
    };
    Ok(SpreadPaths { times: time_grid(horizon, n), d, m, seed, scheme, s, dw })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat_exp;
    use crate::model::ModelParams;
    use nalgebra::DVector;

    #[test]
    fn zero_covariance_factors_to_zero() {
        let l = factor_covariance(&DMatrix::zeros(3, 3)).unwrap();
        assert_eq!(l.amax(), 0.0);
    }

    #[test]
    fn factor_reproduces_covariance() {
        let cov = DMatrix::from_row_slice(2, 2, &[2.0, 0.6, 0.6, 1.0]);
        let l = factor_covariance(&cov).unwrap();
        assert!((&l * l.transpose() - &cov).amax() < 1e-14);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let l = factor_covariance(&singular).unwrap();
        assert!((&l * l.transpose() - &singular).amax() < 1e-14);
        let bad = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        assert!(matches!(factor_covariance(&bad), Err(Error::CovFactorizationFailure(_))));
    }

    #[test]
    fn tiny_noise_tracks_mean() {
        let market = Market::new(ModelParams {
            a: DMatrix::from_row_slice(2, 2, &[-0.5, 0.3, -0.1, -0.2]),
            sigma: DMatrix::identity(2, 2) * 1e-9,
            r: 0.01,
            horizon: 1.0,
            varpi: 1.0,
            x0: 1.0,
            s0: DVector::from_row_slice(&[1.0, -2.0]),
        })
        .unwrap();
        let sp = simulate_spread(&market, 10, 3, 1, SpreadScheme::ExactOu, Execution::Sequential).unwrap();
        let want = mat_exp(&market.params().a).unwrap() * &market.params().s0;
        for i in 0..3 {
            let end = sp.at(i, 10);
            assert!((end[0] - want[0]).abs() < 1e-8 && (end[1] - want[1]).abs() < 1e-8);
        }
    }

    #[test]
    fn counts_are_checked() {
        let market = Market::new(ModelParams::scalar(0.1, 0.5, 0.01, 1.0, 1.0, 100.0, 0.0)).unwrap();
        for (n, p) in [(0, 1), (1, 0)] {
            let r = simulate_spread(&market, n, p, 0, SpreadScheme::ExactOu, Execution::Sequential);
            assert!(matches!(r, Err(Error::BadCount { .. })));
        }
    }

    #[test]
    fn coarsening_sums_increments() {
        let market = Market::new(ModelParams::scalar(0.3, 0.5, 0.01, 1.0, 1.0, 100.0, 2.0)).unwrap();
        let fine =
            simulate_spread(&market, 8, 2, 5, SpreadScheme::EulerCoupled, Execution::Sequential).unwrap();
        let coarse = fine.coarsen(&market, 2).unwrap();
        assert_eq!(coarse.steps(), 4);
        let (f, c) = (&fine.dw.as_ref().unwrap()[1], &coarse.dw.as_ref().unwrap()[1]);
        assert!((c[3] - (f[6] + f[7])).abs() < 1e-15);
        assert!(fine.coarsen(&market, 3).is_err());
        let exact = simulate_spread(&market, 8, 2, 5, SpreadScheme::ExactOu, Execution::Sequential).unwrap();
        assert_eq!(exact.coarsen(&market, 2), Err(Error::MissingIncrements));
    }
}
