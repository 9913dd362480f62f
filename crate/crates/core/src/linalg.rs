//! Dense kernels for small matrices: the matrix exponential, column-major
//! vectorization, the vectorized operator `G -> A'(G + G')`, and the
//! exponential integral `int_0^dt e^{Au} Q e^{A'u} du`.
//!
//! Dimensions here are tiny (d <= ~16, d^2 <= ~256), so everything is plain
//! `DMatrix<f64>` arithmetic.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Column-major vectorization: entry `j*d + i` (0-based) holds `H[(i, j)]`.
///
/// In 1-based indexing this is `h_{(j-1)d+i} = H_{ij}`, the convention the
/// `build_gamma` index formula is written against.
pub fn vect(h: &DMatrix<f64>) -> DVector<f64> {
    let (rows, cols) = h.shape();
    let mut out = DVector::zeros(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            out[j * rows + i] = h[(i, j)];
        }
    }
    out
}

/// Inverse of [`vect`] for a `d x d` matrix.
///
/// # Panics
/// Panics if `v.len() != d * d`.
pub fn unvect(v: &DVector<f64>, d: usize) -> DMatrix<f64> {
    assert_eq!(v.len(), d * d, "unvect: length {} is not {d}^2", v.len());
    DMatrix::from_fn(d, d, |i, j| v[j * d + i])
}

/// The `d^2 x d^2` matrix of the linear map `G -> A'(G + G')` in the
/// [`vect`] basis.
#[derive(Debug, Clone, PartialEq)]
pub struct GammaMatrix {
    d: usize,
    data: DMatrix<f64>,
}

impl GammaMatrix {
    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }

    /// `Gamma * vect(g)`.
    pub fn apply(&self, z: &DVector<f64>) -> DVector<f64> {
        &self.data * z
    }
}

/// Builds Gamma entrywise: with row `s = j*d + i` and column `t = k*d + l`,
/// `gamma[s, t] = A[l, i] * [k == j] + A[k, i] * [l == j]`.
pub fn build_gamma(a: &DMatrix<f64>) -> GammaMatrix {
    let d = a.nrows();
    assert_eq!(d, a.ncols(), "build_gamma requires a square matrix");
    let mut data = DMatrix::zeros(d * d, d * d);
    for j in 0..d {
        for i in 0..d {
            let s = j * d + i;
            for k in 0..d {
                for l in 0..d {
                    let t = k * d + l;
                    let mut v = 0.0;
                    if k == j {
                        v += a[(l, i)];
                    }
                    if l == j {
                        v += a[(k, i)];
                    }
                    data[(s, t)] = v;
                }
            }
        }
    }
    GammaMatrix { d, data }
}

// Degree-13 Pade coefficients.
const PADE13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// 1-norm scaling target before the Pade step.
const SCALE_TARGET: f64 = 0.5;

/// Matrix 1-norm (max absolute column sum).
pub fn norm1(m: &DMatrix<f64>) -> f64 {
    m.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Largest absolute entry.
pub fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

/// `(m + m') / 2`.
pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Matrix exponential by scaling and squaring with a degree-13 Pade
/// approximant. The argument is scaled until its 1-norm is at most 0.5.
pub fn mat_exp(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = m.nrows();
    if n != m.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "mat_exp: {}x{} is not square",
            n,
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }

    let norm = norm1(m);
    let squarings = if norm > SCALE_TARGET {
        (norm / SCALE_TARGET).log2().ceil() as i32
    } else {
        0
    };
    let scaled = m * 2f64.powi(-squarings);

    let ident = DMatrix::<f64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = &PADE13;

    let u_inner = &a6 * (&a6 * b[13] + &a4 * b[11] + &a2 * b[9])
        + &a6 * b[7]
        + &a4 * b[5]
        + &a2 * b[3]
        + &ident * b[1];
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b[12] + &a4 * b[10] + &a2 * b[8])
        + &a6 * b[6]
        + &a4 * b[4]
        + &a2 * b[2]
        + &ident * b[0];

    let num = &v + &u;
    let den = &v - &u;
    let mut r = den.lu().solve(&num).ok_or(Error::NonFinite)?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(r)
}

/// `int_0^dt e^{Au} Q e^{A'u} du` from the exponential of the block matrix
/// `[[A, Q], [0, -A']] * dt`, whose upper-right block `G` satisfies
/// `G e^{A' dt} = int_0^dt e^{Au} Q e^{A'u} du`.
pub fn block_exp_integral(a: &DMatrix<f64>, q: &DMatrix<f64>, dt: f64) -> Result<DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d || q.shape() != (d, d) {
        return Err(Error::DimensionMismatch(format!(
            "block_exp_integral: A is {:?}, Q is {:?}",
            a.shape(),
            q.shape()
        )));
    }
    if dt < 0.0 || !dt.is_finite() {
        return Err(Error::BadTimeOrder { t0: 0.0, t1: dt });
    }
    if dt == 0.0 {
        return Ok(DMatrix::zeros(d, d));
    }
    let mut block = DMatrix::zeros(2 * d, 2 * d);
    block.view_mut((0, 0), (d, d)).copy_from(&(a * dt));
    block.view_mut((0, d), (d, d)).copy_from(&(q * dt));
    block.view_mut((d, d), (d, d)).copy_from(&(-a.transpose() * dt));
    let e = mat_exp(&block)?;
    let upper_left = e.view((0, 0), (d, d)).into_owned();
    let upper_right = e.view((0, d), (d, d)).into_owned();
    Ok(upper_right * upper_left.transpose())
}
