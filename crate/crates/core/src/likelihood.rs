//! Observation noise model.
//!
//! Each entry is reproduced correctly with probability `sigmoid(lambda)` and
//! flipped with probability `sigmoid(-lambda)`, so the full-data likelihood
//! depends on the factors only through the number of correct and wrong
//! predictions.

use serde::{Deserialize, Serialize};

use crate::bitmat::{prediction_counts, BinaryMatrix, PredictionCounts};
use crate::error::{Error, Result};

/// Upper bound on the noise precision, `logit(1 - 1e-8)`.
pub const LAMBDA_MAX: f64 = 18.420_680_733_952_23;

/// Starting value of the noise precision when none is given.
pub const LAMBDA_INIT: f64 = 0.5;

pub fn sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        1.0 / (1.0 + (-y).exp())
    } else {
        let e = y.exp();
        e / (1.0 + e)
    }
}

/// `log(sigmoid(y))` without underflow for large `|y|`.
pub fn log_sigmoid(y: f64) -> f64 {
    if y >= 0.0 {
        -(-y).exp().ln_1p()
    } else {
        y - y.exp().ln_1p()
    }
}

pub fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Noise precision on the logit scale. Always finite and in `[0, LAMBDA_MAX]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NoiseParam(f64);

impl NoiseParam {
    pub fn new(lambda: f64) -> Result<Self> {
        if !lambda.is_finite() || lambda < 0.0 {
            return Err(Error::Config(format!(
                "noise precision must be finite and nonnegative, got {lambda}"
            )));
        }
        Ok(NoiseParam(lambda.min(LAMBDA_MAX)))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl Default for NoiseParam {
    fn default() -> Self {
        NoiseParam(LAMBDA_INIT)
    }
}

/// `C log sigmoid(lambda) + W log sigmoid(-lambda)` for `C` correct and `W`
/// wrong predictions.
pub fn log_likelihood_counts(counts: &PredictionCounts, lambda: f64) -> f64 {
    counts.correct() as f64 * log_sigmoid(lambda) + counts.wrong() as f64 * log_sigmoid(-lambda)
}

pub fn log_likelihood(
    x: &BinaryMatrix,
    z: &BinaryMatrix,
    u: &BinaryMatrix,
    lambda: NoiseParam,
) -> Result<f64> {
    let counts = prediction_counts(x, z, u)?;
    Ok(log_likelihood_counts(&counts, lambda.get()))
}

/// Maximiser `logit(C / (C + W))`, optionally with add-one smoothing,
/// clamped to `[0, LAMBDA_MAX]`.
pub fn lambda_mle_with(counts: &PredictionCounts, smoothed: bool) -> NoiseParam {
    let c = counts.correct() as f64;
    let w = counts.wrong() as f64;
    let p = if smoothed {
        (c + 1.0) / (c + w + 2.0)
    } else if c + w == 0.0 {
        0.5
    } else {
        c / (c + w)
    };
    let lambda = if p >= 1.0 { LAMBDA_MAX } else { logit(p) };
    NoiseParam(lambda.clamp(0.0, LAMBDA_MAX))
}

/// Closed-form update of the noise precision from the current counts.
pub fn lambda_mle(counts: &PredictionCounts) -> NoiseParam {
    lambda_mle_with(counts, true)
}
