//! Levenberg-Marquardt least-squares training.
//!
//! Each epoch solves `(JᵀJ + λI) Δw = -Jᵀr` by Cholesky factorization. A step
//! is accepted only if it lowers the sum of squared residuals, after which
//! `λ` shrinks by `lambda_down`; otherwise `λ` grows by `lambda_up` and the
//! solve is retried.

use alloc::vec;
use alloc::vec::Vec;

use libm::sqrt;

use super::mlp::{MlpNetwork, N_INPUTS};
use crate::error::{Error, Result};

/// Damping ceiling; exceeding it ends training.
pub const LAMBDA_MAX: f64 = 1e10;
const MAX_RETRIES_PER_EPOCH: usize = 64;

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }
}

/// Normalized inputs and targets.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingSet {
    pub x: Vec<[f64; N_INPUTS]>,
    pub y: Vec<f64>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmOptions {
    pub max_epochs: usize,
    pub lambda0: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Stop once an accepted step lowers the loss by less than this.
    pub tol: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_epochs: 500,
            lambda0: 1e-3,
            lambda_up: 10.0,
            lambda_down: 10.0,
            tol: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Epochs run, including the one that hit a stopping rule.
    pub epochs: usize,
    pub initial_loss: f64,
    /// Loss after each accepted step.
    pub losses: Vec<f64>,
    pub final_lambda: f64,
    pub converged: bool,
}

impl TrainReport {
    pub fn final_loss(&self) -> f64 {
        self.losses.last().copied().unwrap_or(self.initial_loss)
    }
}

/// `d r_k / d w_j` for every sample `k` and parameter `j`, where
/// `r_k = net(x_k) - y_k`.
pub fn jacobian(net: &MlpNetwork, batch: &TrainingSet) -> Result<Matrix> {
    if batch.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let mut j = Matrix::zeros(batch.len(), net.n_params());
    for (k, x) in batch.x.iter().enumerate() {
        let cols = j.cols;
        net.gradient_into(x, &mut j.data[k * cols..(k + 1) * cols]);
    }
    Ok(j)
}

pub fn residuals(net: &MlpNetwork, params: &[f64], batch: &TrainingSet) -> Vec<f64> {
    batch
        .x
        .iter()
        .zip(&batch.y)
        .map(|(x, y)| net.forward_with(params, x) - y)
        .collect()
}

pub fn sum_of_squares(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// In-place lower Cholesky factor of a symmetric `n x n` matrix. Returns
/// `None` when the matrix is not numerically positive definite.
pub fn cholesky(a: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut l = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut s = a[i * n + j];
            for k in 0..j {
                s -= l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return None;
                }
                l[i * n + i] = sqrt(s);
            } else {
                l[i * n + j] = s / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` given the Cholesky factor `L`.
pub fn cholesky_solve(l: &[f64], n: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; n];
    for i in 0..n {
        let s: f64 = (0..i).map(|k| l[i * n + k] * y[k]).sum();
        y[i] = (b[i] - s) / l[i * n + i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| l[k * n + i] * x[k]).sum();
        x[i] = (y[i] - s) / l[i * n + i];
    }
    x
}

/// Trains `net` in place on normalized data.
#[allow(clippy::needless_range_loop)]
pub fn lm_train(net: &mut MlpNetwork, data: &TrainingSet, opts: &LmOptions) -> Result<TrainReport> {
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    if opts.max_epochs == 0 {
        return Err(Error::NotTrained);
    }
    let n = net.n_params();
    let mut lambda = opts.lambda0;
    let mut r = residuals(net, net.params(), data);
    let mut loss = sum_of_squares(&r);
    let mut report = TrainReport {
        epochs: 0,
        initial_loss: loss,
        losses: Vec::new(),
        final_lambda: lambda,
        converged: false,
    };

    for _ in 0..opts.max_epochs {
        report.epochs += 1;
        let j = jacobian(net, data)?;
        // JᵀJ and Jᵀr
        let mut jtj = vec![0.0; n * n];
        let mut jtr = vec![0.0; n];
        for k in 0..j.rows {
            let row = j.row(k);
            for a in 0..n {
                let ra = row[a];
                if ra == 0.0 {
                    continue;
                }
                jtr[a] += ra * r[k];
                for b in 0..=a {
                    jtj[a * n + b] += ra * row[b];
                }
            }
        }
        for a in 0..n {
            for b in 0..a {
                jtj[b * n + a] = jtj[a * n + b];
            }
        }

        let mut accepted = None;
        for _ in 0..MAX_RETRIES_PER_EPOCH {
            let mut damped = jtj.clone();
            for a in 0..n {
                damped[a * n + a] += lambda;
            }
            if let Some(l) = cholesky(&damped, n) {
                let neg: Vec<f64> = jtr.iter().map(|v| -v).collect();
                let step = cholesky_solve(&l, n, &neg);
                let trial: Vec<f64> = net.params().iter().zip(&step).map(|(w, d)| w + d).collect();
                let r_trial = residuals(net, &trial, data);
                let loss_trial = sum_of_squares(&r_trial);
                if loss_trial < loss {
                    lambda /= opts.lambda_down;
                    accepted = Some((trial, r_trial, loss_trial));
                    break;
                }
            }
            lambda *= opts.lambda_up;
            if lambda > LAMBDA_MAX {
                break;
            }
        }

        match accepted {
            Some((trial, r_trial, loss_trial)) => {
                net.params_mut().copy_from_slice(&trial);
                let improvement = loss - loss_trial;
                r = r_trial;
                loss = loss_trial;
                report.losses.push(loss);
                if improvement < opts.tol {
                    report.converged = true;
                    break;
                }
            }
            None => {
                if report.losses.is_empty() {
                    if lambda > LAMBDA_MAX {
                        return Err(Error::TrainingDiverged { lambda });
                    }
                    break;
                }
                // no further descent available from here
                report.converged = true;
                break;
            }
        }
    }
    report.final_lambda = lambda;
    Ok(report)
}
