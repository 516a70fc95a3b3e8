//! Epsilon-insensitive support vector regression solved in the dual by
//! sequential minimal optimization with second-order working-set selection.
//!
//! The dual is written over `2n` variables `a = (alpha, alpha*)`:
//!
//! ```text
//! min 0.5 a'Qa + p'a   s.t.  s'a = 0,  0 <= a <= C
//! Q[t][u] = s_t s_u K(t mod n, u mod n),  s = (+1.., -1..)
//! p = (eps - y, eps + y)
//! ```
//!
//! and the regression function is `f(x) = sum_i (alpha_i - alpha*_i) K(x_i, x) + b`.

use ndarray::{Array2, ArrayView1, ArrayView2};
use serde::{Deserialize, Serialize};

use super::LearnerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    /// `exp(-gamma |x - z|^2)`; `None` means `1 / n_features`.
    Rbf { gamma: Option<f64> },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma.unwrap_or(1.0) * d2).exp()
            }
        }
    }

    fn resolve(self, dim: usize) -> Kernel {
        match self {
            Kernel::Rbf { gamma: None } => Kernel::Rbf {
                gamma: Some(1.0 / dim.max(1) as f64),
            },
            k => k,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrParams {
    pub c: f64,
    /// Tube half-width in standardized target units.
    pub epsilon: f64,
    pub kernel: Kernel,
    /// KKT violation tolerance.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvrParams {
    fn default() -> Self {
        Self {
            c: 1.0,
            epsilon: 0.01,
            kernel: Kernel::Rbf { gamma: None },
            tol: 1e-3,
            max_iter: 1_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    pub support_vectors: Vec<Vec<f64>>,
    pub coefficients: Vec<f64>,
    pub bias: f64,
    pub dual_objective: f64,
    pub iterations: usize,
}

impl SvrModel {
    pub fn eval(&self, z: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.coefficients)
                .map(|(sv, c)| c * self.kernel.eval(sv, z))
                .sum::<f64>()
    }
}

/// Result of the dual solve on a precomputed kernel matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DualSolution {
    /// `alpha - alpha*` per training point.
    pub beta: Vec<f64>,
    pub bias: f64,
    /// Dual objective `0.5 b'Kb + eps |b|_1 - y'b` (minimization form).
    pub objective: f64,
    /// Primal minus dual objective.
    pub duality_gap: f64,
    pub iterations: usize,
}

const TAU: f64 = 1e-12;

/// Solves the epsilon-SVR dual for kernel matrix `k` and targets `y`.
pub fn solve_dual(k: &Array2<f64>, y: &[f64], c: f64, eps: f64, tol: f64, max_iter: usize) -> Result<DualSolution, LearnerError> {
    let n = y.len();
    let l = 2 * n;
    let sign = |t: usize| if t < n { 1.0 } else { -1.0 };
    let q = |t: usize, u: usize| sign(t) * sign(u) * k[[t % n, u % n]];
    let p: Vec<f64> = (0..l).map(|t| if t < n { eps - y[t] } else { eps + y[t - n] }).collect();
    let qd: Vec<f64> = (0..l).map(|t| k[[t % n, t % n]]).collect();
    let mut a = vec![0.0; l];
    let mut g = p.clone();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iter = 0;
    let converged = loop {
        // Maximal violating pair with second-order choice of j.
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for t in 0..l {
            if sign(t) > 0.0 {
                if !upper(a[t]) && -g[t] >= gmax {
                    gmax = -g[t];
                    i = t;
                }
            } else if !lower(a[t]) && g[t] >= gmax {
                gmax = g[t];
                i = t;
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..l {
            let (admissible, gd, g2) = if sign(t) > 0.0 {
                (!lower(a[t]), gmax + g[t], g[t])
            } else {
                (!upper(a[t]), gmax - g[t], -g[t])
            };
            if !admissible {
                continue;
            }
            gmax2 = gmax2.max(g2);
            if i != usize::MAX && gd > 0.0 {
                let quad = qd[i] + qd[t] - 2.0 * k[[i % n, t % n]];
                let obj = -(gd * gd) / if quad > 0.0 { quad } else { TAU };
                if obj <= best {
                    best = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || i == usize::MAX || j == usize::MAX {
            break true;
        }
        if iter >= max_iter {
            break false;
        }
        iter += 1;

        let (oi, oj) = (a[i], a[j]);
        let qij = q(i, j);
        if sign(i) != sign(j) {
            let quad = (qd[i] + qd[j] + 2.0 * qij).max(TAU);
            let delta = (-g[i] - g[j]) / quad;
            let diff = a[i] - a[j];
            a[i] += delta;
            a[j] += delta;
            if diff > 0.0 {
                if a[j] < 0.0 {
                    a[j] = 0.0;
                    a[i] = diff;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = -diff;
            }
            if diff > 0.0 {
                if a[i] > c {
                    a[i] = c;
                    a[j] = c - diff;
                }
            } else if a[j] > c {
                a[j] = c;
                a[i] = c + diff;
            }
        } else {
            let quad = (qd[i] + qd[j] - 2.0 * qij).max(TAU);
            let delta = (g[i] - g[j]) / quad;
            let sum = a[i] + a[j];
            a[i] -= delta;
            a[j] += delta;
            if sum > c {
                if a[i] > c {
                    a[i] = c;
                    a[j] = sum - c;
                }
            } else if a[j] < 0.0 {
                a[j] = 0.0;
                a[i] = sum;
            }
            if sum > c {
                if a[j] > c {
                    a[j] = c;
                    a[i] = sum - c;
                }
            } else if a[i] < 0.0 {
                a[i] = 0.0;
                a[j] = sum;
            }
        }
        let (di, dj) = (a[i] - oi, a[j] - oj);
        if di != 0.0 || dj != 0.0 {
            for (t, gt) in g.iter_mut().enumerate().take(l) {
                *gt += q(t, i) * di + q(t, j) * dj;
            }
        }
    };

    // Bias from free variables, or the midpoint of the feasible interval.
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for t in 0..l {
        let yg = sign(t) * g[t];
        if upper(a[t]) {
            if sign(t) < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(a[t]) {
            if sign(t) > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 { sum_free / free as f64 } else { (ub + lb) / 2.0 };

    let beta: Vec<f64> = (0..n).map(|i| a[i] - a[i + n]).collect();
    let objective = 0.5 * (0..l).map(|t| a[t] * (g[t] + p[t])).sum::<f64>();
    let kb: Vec<f64> = (0..n).map(|i| (0..n).map(|m| k[[i, m]] * beta[m]).sum()).collect();
    let wnorm: f64 = beta.iter().zip(&kb).map(|(b, kb)| b * kb).sum();
    let hinge: f64 = (0..n).map(|i| ((y[i] - (kb[i] - rho)).abs() - eps).max(0.0)).sum();
    let primal = 0.5 * wnorm + c * hinge;
    let duality_gap = primal + objective;
    if !converged {
        return Err(LearnerError::NonConvergence {
            iterations: iter,
            duality_gap,
        });
    }
    Ok(DualSolution {
        beta,
        bias: -rho,
        objective,
        duality_gap,
        iterations: iter,
    })
}

pub fn kernel_matrix(kernel: &Kernel, x: ArrayView2<f64>) -> Array2<f64> {
    let rows: Vec<Vec<f64>> = x.rows().into_iter().map(|r| r.to_vec()).collect();
    let n = rows.len();
    let mut k = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v = kernel.eval(&rows[i], &rows[j]);
            k[[i, j]] = v;
            k[[j, i]] = v;
        }
    }
    k
}

/// Trains on already standardized data.
pub fn train(x: ArrayView2<f64>, y: ArrayView1<f64>, p: &SvrParams) -> Result<SvrModel, LearnerError> {
    let kernel = p.kernel.resolve(x.ncols());
    let k = kernel_matrix(&kernel, x);
    let sol = solve_dual(&k, &y.to_vec(), p.c, p.epsilon, p.tol, p.max_iter)?;
    let mut support_vectors = Vec::new();
    let mut coefficients = Vec::new();
    for (i, &b) in sol.beta.iter().enumerate() {
        if b != 0.0 {
            support_vectors.push(x.row(i).to_vec());
            coefficients.push(b);
        }
    }
    Ok(SvrModel {
        kernel,
        support_vectors,
        coefficients,
        bias: sol.bias,
        dual_objective: sol.objective,
        iterations: sol.iterations,
    })
}
