//! L2-regularized least squares via the normal equations.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::LearnerError;
use crate::linalg::{cholesky, cholesky_solve};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RidgeParams {
    /// Shrinkage on the squared weight norm; the bias is not penalized.
    pub lambda: f64,
}

impl Default for RidgeParams {
    fn default() -> Self {
        Self { lambda: 1.0 }
    }
}

/// Minimizes `sum (y - Xw - b)^2 + lambda |w|^2`. Returns `(w, b)`.
pub fn solve(x: ArrayView2<f64>, y: ArrayView1<f64>, lambda: f64) -> Result<(Vec<f64>, f64), LearnerError> {
    let n = x.nrows() as f64;
    let xm: Array1<f64> = x.mean_axis(Axis(0)).unwrap_or_else(|| Array1::zeros(x.ncols()));
    let ym = y.sum() / n;
    let xc: Array2<f64> = &x - &xm;
    let yc: Array1<f64> = y.mapv(|v| v - ym);
    let mut gram = xc.t().dot(&xc);
    for i in 0..gram.nrows() {
        gram[[i, i]] += lambda;
    }
    let l = cholesky(&gram).ok_or(LearnerError::SingularSystem)?;
    let w = cholesky_solve(&l, xc.t().dot(&yc).view());
    let b = ym - w.dot(&xm);
    Ok((w.to_vec(), b))
}

pub fn eval(w: &[f64], b: f64, z: &[f64]) -> f64 {
    b + w.iter().zip(z).map(|(w, z)| w * z).sum::<f64>()
}
