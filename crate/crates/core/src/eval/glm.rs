//! Logistic regression `logit p = b0 + b1 x` by iteratively reweighted
//! least squares.

use serde::Serialize;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const TOLERANCE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct GlmFit {
    pub beta0: f64,
    pub beta: f64,
    /// Dispersion-1 binomial standard errors.
    pub se0: f64,
    pub se1: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Single-class outcomes or (quasi-)complete separation; coefficients
    /// are not meaningful.
    pub separated: bool,
}

fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// Gradient and information matrix of the log-likelihood at `(b0, b1)`.
fn score_and_information(data: &[(f64, bool)], b0: f64, b1: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mut g = [0.0; 2];
    let mut h = [[0.0; 2]; 2];
    for &(x, y) in data {
        let p = sigmoid(b0 + b1 * x);
        let r = f64::from(u8::from(y)) - p;
        let w = p * (1.0 - p);
        g[0] += r;
        g[1] += r * x;
        h[0][0] += w;
        h[0][1] += w * x;
        h[1][1] += w * x * x;
    }
    h[1][0] = h[0][1];
    (g, h)
}

fn invert(h: [[f64; 2]; 2]) -> Option<[[f64; 2]; 2]> {
    let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
    let scale = h[0][0].abs().max(h[1][1].abs());
    if !(det.abs() > 1e-14 * scale * scale) {
        return None;
    }
    Some([[h[1][1] / det, -h[0][1] / det], [-h[1][0] / det, h[0][0] / det]])
}

/// Euclidean norm of the score equations `sum (y - p) (1, x)`.
pub fn score_residual(data: &[(f64, bool)], beta0: f64, beta: f64) -> f64 {
    let (g, _) = score_and_information(data, beta0, beta);
    (g[0] * g[0] + g[1] * g[1]).sqrt()
}

pub fn fit_logistic_glm(data: &[(f64, bool)]) -> Result<GlmFit> {
    if data.len() < 2 {
        return Err(Error::InvalidArgument("logistic fit needs at least two trials".into()));
    }
    let positives = data.iter().filter(|d| d.1).count();
    if positives == 0 || positives == data.len() {
        return Ok(GlmFit {
            beta0: f64::NAN,
            beta: f64::NAN,
            se0: f64::NAN,
            se1: f64::NAN,
            iterations: 0,
            converged: false,
            separated: true,
        });
    }
    let (mut b0, mut b1) = (0.0, 0.0);
    let mut converged = false;
    let mut singular = false;
    let mut iterations = 0;
    while iterations < MAX_ITERATIONS {
        iterations += 1;
        let (g, h) = score_and_information(data, b0, b1);
        let Some(inv) = invert(h) else {
            singular = true;
            break;
        };
        let d0 = inv[0][0] * g[0] + inv[0][1] * g[1];
        let d1 = inv[1][0] * g[0] + inv[1][1] * g[1];
        b0 += d0;
        b1 += d1;
        if d0.abs().max(d1.abs()) < TOLERANCE {
            converged = true;
            break;
        }
    }
    let (_, h) = score_and_information(data, b0, b1);
    let (se0, se1) = match invert(h) {
        Some(inv) => (inv[0][0].sqrt(), inv[1][1].sqrt()),
        None => (f64::NAN, f64::NAN),
    };
    Ok(GlmFit { beta0: b0, beta: b1, se0, se1, iterations, converged, separated: singular || !converged })
}
