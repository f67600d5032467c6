use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};

/// Max number of jitter doublings attempted after a failed factorization.
const JITTER_DOUBLINGS: u32 = 8;

/// Cholesky factorization, retrying with `jitter · 2^k` added to the
/// diagonal (k = 0..=8) when the matrix is numerically not positive definite.
pub fn cholesky_with_jitter(a: &DMatrix<f64>, jitter: f64) -> Result<Cholesky<f64, Dyn>> {
    if let Some(ch) = Cholesky::new(a.clone()) {
        return Ok(ch);
    }
    if jitter > 0.0 {
        let mut eps = jitter;
        for _ in 0..=JITTER_DOUBLINGS {
            let mut shifted = a.clone();
            for i in 0..shifted.nrows() {
                shifted[(i, i)] += eps;
            }
            if let Some(ch) = Cholesky::new(shifted) {
                return Ok(ch);
            }
            eps *= 2.0;
        }
    }
    Err(Error::numerical(format!(
        "Cholesky factorization of a {}x{} matrix failed after jitter",
        a.nrows(),
        a.ncols()
    )))
}

/// Replaces `m` with `(m + mᵀ) / 2`.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Pearson correlation of two equal-length slices.
pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma).powi(2);
        sbb += (y - mb).powi(2);
    }
    sab / (saa * sbb).sqrt()
}
