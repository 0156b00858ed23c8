//! L2-regularized logistic regression trained with a truncated Newton
//! (Newton-CG) method.
//!
//! Objective over parameters `theta = [w, b]`:
//!
//! ```text
//! f(w, b) = 1/2 |w|^2 + C * sum_i log(1 + exp(-y_i (w . x_i + b)))
//! ```
//!
//! with `y_i` in {-1, +1}. The bias is not penalized.

use serde::{Deserialize, Serialize};

use super::tfidf::{CsrMatrix, SparseVector};
use super::ScorerError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// Inverse regularization strength.
    pub c: f64,
    /// Stop once the gradient norm is at or below this.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainInfo {
    pub iterations: usize,
    pub objective: f64,
    pub gradient_norm: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub config: LogRegConfig,
    pub info: TrainInfo,
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// log(1 + exp(t)) without overflow.
#[inline]
fn softplus(t: f64) -> f64 {
    t.max(0.0) + (-t.abs()).exp().ln_1p()
}

/// The training objective over a fixed design matrix.
pub struct LogisticObjective<'a> {
    x: &'a CsrMatrix,
    y: Vec<f64>,
    c: f64,
}

impl<'a> LogisticObjective<'a> {
    pub fn new(x: &'a CsrMatrix, labels: &[u8], c: f64) -> Self {
        assert_eq!(x.nrows(), labels.len());
        let y = labels
            .iter()
            .map(|&l| if l == 1 { 1.0 } else { -1.0 })
            .collect();
        Self { x, y, c }
    }

    /// Number of parameters (features + bias).
    pub fn dim(&self) -> usize {
        self.x.ncols() + 1
    }

    fn margins(&self, theta: &[f64]) -> Vec<f64> {
        let (w, b) = theta.split_at(self.x.ncols());
        (0..self.x.nrows())
            .map(|r| self.x.row_dot(r, w) + b[0])
            .collect()
    }

    fn value_at(&self, theta: &[f64], z: &[f64]) -> f64 {
        let w = &theta[..self.x.ncols()];
        let reg = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
        let loss: f64 = z.iter().zip(&self.y).map(|(z, y)| softplus(-y * z)).sum();
        reg + self.c * loss
    }

    fn gradient_at(&self, theta: &[f64], z: &[f64]) -> Vec<f64> {
        let d = self.x.ncols();
        let mut g = theta.to_vec();
        g[d] = 0.0;
        for (r, (z, y)) in z.iter().zip(&self.y).enumerate() {
            let coef = -self.c * y * sigmoid(-y * z);
            self.x.add_row_to(r, coef, &mut g[..d]);
            g[d] += coef;
        }
        g
    }

    pub fn value(&self, theta: &[f64]) -> f64 {
        self.value_at(theta, &self.margins(theta))
    }

    pub fn gradient(&self, theta: &[f64]) -> Vec<f64> {
        self.gradient_at(theta, &self.margins(theta))
    }

    /// H v where `curvature[i] = C * s_i (1 - s_i)`.
    fn hessian_vec(&self, curvature: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.x.ncols();
        let mut out = v.to_vec();
        out[d] = 0.0;
        for (r, &k) in curvature.iter().enumerate() {
            let xv = self.x.row_dot(r, &v[..d]) + v[d];
            let s = k * xv;
            self.x.add_row_to(r, s, &mut out[..d]);
            out[d] += s;
        }
        out
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Conjugate gradient for H p = -g, stopping at relative residual `eta`.
fn newton_direction(
    obj: &LogisticObjective<'_>,
    curvature: &[f64],
    g: &[f64],
    eta: f64,
    max_steps: usize,
) -> Vec<f64> {
    let n = g.len();
    let mut p = vec![0.0; n];
    let mut r: Vec<f64> = g.iter().map(|v| -v).collect();
    let mut dir = r.clone();
    let mut rr = dot(&r, &r);
    let target = eta * norm(g);
    for _ in 0..max_steps {
        if rr.sqrt() <= target {
            break;
        }
        let hd = obj.hessian_vec(curvature, &dir);
        let dhd = dot(&dir, &hd);
        if dhd <= 0.0 {
            break;
        }
        let alpha = rr / dhd;
        for i in 0..n {
            p[i] += alpha * dir[i];
            r[i] -= alpha * hd[i];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            dir[i] = r[i] + beta * dir[i];
        }
    }
    if p.iter().all(|v| *v == 0.0) {
        // CG made no progress; fall back to steepest descent.
        return g.iter().map(|v| -v).collect();
    }
    p
}

/// Train from the zero vector.
pub fn train_logreg(
    features: &CsrMatrix,
    labels: &[u8],
    config: &LogRegConfig,
) -> Result<LogRegModel, ScorerError> {
    train_logreg_from(features, labels, config, None)
}

/// Train from an explicit starting point `[w, b]`.
pub fn train_logreg_from(
    features: &CsrMatrix,
    labels: &[u8],
    config: &LogRegConfig,
    init: Option<&[f64]>,
) -> Result<LogRegModel, ScorerError> {
    if labels.len() != features.nrows() {
        return Err(ScorerError::DimensionMismatch {
            expected: features.nrows(),
            found: labels.len(),
        });
    }
    if !labels.contains(&0) || !labels.contains(&1) {
        return Err(ScorerError::SingleClassTraining);
    }
    let obj = LogisticObjective::new(features, labels, config.c);
    let dim = obj.dim();
    let mut theta = match init {
        Some(t) if t.len() == dim => t.to_vec(),
        Some(t) => {
            return Err(ScorerError::DimensionMismatch {
                expected: dim,
                found: t.len(),
            })
        }
        None => vec![0.0; dim],
    };

    let mut z = obj.margins(&theta);
    let mut f = obj.value_at(&theta, &z);
    let mut g = obj.gradient_at(&theta, &z);
    let mut gnorm = norm(&g);
    let mut iterations = 0;
    let cg_steps = dim.clamp(10, 500);

    while gnorm > config.tol && iterations < config.max_iter {
        iterations += 1;
        let curvature: Vec<f64> = z
            .iter()
            .map(|&m| {
                let s = sigmoid(m);
                config.c * s * (1.0 - s)
            })
            .collect();
        let eta = gnorm.sqrt().min(0.5);
        let p = newton_direction(&obj, &curvature, &g, eta, cg_steps);
        let slope = dot(&g, &p);

        let mut step = 1.0;
        let mut accepted = None;
        while step >= 1e-12 {
            let cand: Vec<f64> = theta.iter().zip(&p).map(|(t, d)| t + step * d).collect();
            let cz = obj.margins(&cand);
            let cf = obj.value_at(&cand, &cz);
            let sufficient = cf <= f + 1e-4 * step * slope;
            // Near the optimum the decrease drops below rounding noise in f;
            // accept the step if f is flat to precision and the gradient shrank.
            let flat = (cf - f).abs() <= 16.0 * f64::EPSILON * f.abs().max(1.0);
            if sufficient || flat {
                let cg = obj.gradient_at(&cand, &cz);
                let cgnorm = norm(&cg);
                if sufficient || cgnorm < gnorm {
                    accepted = Some((cand, cz, cf, cg, cgnorm));
                    break;
                }
            }
            step *= 0.5;
        }
        match accepted {
            Some((t, nz, nf, ng, ngnorm)) => {
                theta = t;
                z = nz;
                f = nf;
                g = ng;
                gnorm = ngnorm;
            }
            None => break,
        }
    }

    let bias = theta.pop().unwrap_or(0.0);
    Ok(LogRegModel {
        weights: theta,
        bias,
        config: *config,
        info: TrainInfo {
            iterations,
            objective: f,
            gradient_norm: gnorm,
            converged: gnorm <= config.tol,
        },
    })
}

impl LogRegModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn decision(&self, x: &SparseVector) -> Result<f64, ScorerError> {
        if x.dim != self.weights.len() {
            return Err(ScorerError::DimensionMismatch {
                expected: self.weights.len(),
                found: x.dim,
            });
        }
        Ok(x.dot(&self.weights) + self.bias)
    }

    /// P(label = 1 | x).
    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64, ScorerError> {
        self.decision(x).map(sigmoid)
    }
}
