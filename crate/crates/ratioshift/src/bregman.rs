//! Bregman divergences and the training objectives built from them.
//!
//! Two generators are supported: the least-squares generator
//! `phi(x) = (x-1)^2`, whose divergence is the squared difference, and the
//! logistic-regression generator `phi(x) = x log x - (x+1) log(x+1)`, with
//! `phi(0) = 0` by the `0 log 0 = 0` convention. Each induces an empirical
//! objective for density-ratio estimation that depends on the data only
//! through the candidate function's values on the source and target samples.
//!
//! The importance-weighted squared loss used for corrected regression under
//! covariate shift lives here as well.

use crate::error::{Error, Result};
use crate::matrix::Matrix;

/// Selects which Bregman generator drives estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BregmanKind {
    /// `phi(x) = (x-1)^2`; the divergence is `(x-y)^2`.
    LeastSquares,
    /// `phi(x) = x log x - (x+1) log(x+1)`.
    LogisticRegression,
}

impl BregmanKind {
    pub fn label(self) -> &'static str {
        match self {
            BregmanKind::LeastSquares => "ls",
            BregmanKind::LogisticRegression => "lr",
        }
    }
}

/// The generator `phi`.
///
/// For the logistic-regression kind the domain is `x >= 0`, with
/// `phi(0) = 0`.
pub fn phi(kind: BregmanKind, x: f64) -> Result<f64> {
    match kind {
        BregmanKind::LeastSquares => Ok((x - 1.0) * (x - 1.0)),
        BregmanKind::LogisticRegression => {
            if x < 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "logistic-regression generator requires x >= 0, got {x}"
                )));
            }
            if x == 0.0 {
                return Ok(0.0);
            }
            Ok(x * x.ln() - (x + 1.0) * x.ln_1p())
        }
    }
}

/// Derivative of the generator; the logistic-regression kind needs `y > 0`.
fn phi_prime(kind: BregmanKind, y: f64) -> Result<f64> {
    match kind {
        BregmanKind::LeastSquares => Ok(2.0 * (y - 1.0)),
        BregmanKind::LogisticRegression => {
            if y <= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "logistic-regression derivative requires y > 0, got {y}"
                )));
            }
            Ok(y.ln() - y.ln_1p())
        }
    }
}

/// Bregman divergence `phi(x) - phi(y) - phi'(y)(x - y)`.
///
/// Nonnegative on its domain; zero exactly when `x == y`. The second
/// argument must be interior (for the logistic-regression kind, `y > 0`).
pub fn bregman_div(kind: BregmanKind, x: f64, y: f64) -> Result<f64> {
    if kind == BregmanKind::LeastSquares {
        // The definition collapses to the squared difference; computing it
        // directly keeps the identity exact in floating point.
        return Ok((x - y) * (x - y));
    }
    let px = phi(kind, x)?;
    let py = phi(kind, y)?;
    let dy = phi_prime(kind, y)?;
    Ok(px - py - dy * (x - y))
}

/// The divergence evaluated straight from the definition
/// `phi(x) - phi(y) - phi'(y)(x - y)`, as an independent route for
/// cross-checking [`bregman_div`].
pub fn bregman_div_from_definition(kind: BregmanKind, x: f64, y: f64) -> Result<f64> {
    let px = phi(kind, x)?;
    let py = phi(kind, y)?;
    let dy = phi_prime(kind, y)?;
    Ok(px - py - dy * (x - y))
}

/// Empirical least-squares ratio objective:
/// mean of squares on the source sample minus twice the mean on the target
/// sample, both through the candidate function's values.
pub fn ls_objective(f_source: &[f64], f_target: &[f64]) -> Result<f64> {
    if f_source.is_empty() || f_target.is_empty() {
        return Err(Error::InvalidArgument(
            "ls_objective requires nonempty source and target values".into(),
        ));
    }
    let sq = f_source.iter().map(|v| v * v).sum::<f64>() / f_source.len() as f64;
    let tm = f_target.iter().sum::<f64>() / f_target.len() as f64;
    Ok(sq - 2.0 * tm)
}

/// Empirical logistic-regression ratio objective:
/// mean `log(f+1)` on the source plus mean `-log f + log(f+1)` on the target.
///
/// Every value must be strictly positive; a nonpositive value signals a
/// mis-set lower truncation bound upstream and is rejected.
pub fn lr_objective(f_source: &[f64], f_target: &[f64]) -> Result<f64> {
    if f_source.is_empty() || f_target.is_empty() {
        return Err(Error::InvalidArgument(
            "lr_objective requires nonempty source and target values".into(),
        ));
    }
    if let Some(v) = f_source.iter().chain(f_target).find(|&&v| v <= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "lr_objective requires strictly positive values, got {v}"
        )));
    }
    let src = f_source.iter().map(|v| v.ln_1p()).sum::<f64>() / f_source.len() as f64;
    let tgt = f_target.iter().map(|v| -v.ln() + v.ln_1p()).sum::<f64>() / f_target.len() as f64;
    Ok(src + tgt)
}

/// Importance-weighted squared loss `(1/n) sum_i w_i ||y_i - yhat_i||^2`.
pub fn weighted_sq_loss(preds: &Matrix, targets: &Matrix, weights: &[f64]) -> Result<f64> {
    if preds.rows() != targets.rows() || preds.cols() != targets.cols() {
        return Err(Error::ShapeMismatch(format!(
            "preds are {}x{}, targets are {}x{}",
            preds.rows(),
            preds.cols(),
            targets.rows(),
            targets.cols()
        )));
    }
    if weights.len() != preds.rows() {
        return Err(Error::ShapeMismatch(format!(
            "{} weights for {} rows",
            weights.len(),
            preds.rows()
        )));
    }
    if let Some(w) = weights.iter().find(|&&w| w < 0.0) {
        return Err(Error::InvalidArgument(format!("negative weight {w}")));
    }
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        let mut sq = 0.0;
        for (p, t) in preds.row(i).iter().zip(targets.row(i)) {
            let d = t - p;
            sq += d * d;
        }
        acc += w * sq;
    }
    Ok(acc / preds.rows() as f64)
}
