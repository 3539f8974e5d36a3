//! Regression metrics: MSE, per-sample absolute error and MSE reduction
//! against a baseline.

use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};
use crate::num::abs;

/// `(1/M) Σ (y - ŷ)^2`.
pub fn loss_mse(pred: &[f64], target: &[f64]) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(domain(format!(
            "prediction/target length mismatch ({} vs {})",
            pred.len(),
            target.len()
        )));
    }
    if pred.is_empty() {
        return Err(domain("MSE of an empty batch"));
    }
    let sum: f64 = pred.iter().zip(target).map(|(p, y)| (y - p) * (y - p)).sum();
    Ok(sum / pred.len() as f64)
}

/// Per-sample `|y - ŷ|`.
pub fn error_map(pred: &[f64], target: &[f64]) -> Result<Vec<f64>> {
    if pred.len() != target.len() {
        return Err(domain(format!(
            "prediction/target length mismatch ({} vs {})",
            pred.len(),
            target.len()
        )));
    }
    Ok(pred.iter().zip(target).map(|(p, y)| abs(y - p)).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Reduction {
    /// `100 (base - model) / base` per fold, in input order.
    pub per_fold: Vec<f64>,
    /// Unweighted mean of `per_fold`.
    pub average: f64,
}

/// Relative MSE reduction of `model` against `baseline`, in percent.
pub fn reduction(model: &[f64], baseline: &[f64]) -> Result<Reduction> {
    if model.len() != baseline.len() || model.is_empty() {
        return Err(domain(format!(
            "reduction needs equal, non-empty fold lists ({} vs {})",
            model.len(),
            baseline.len()
        )));
    }
    let per_fold = model
        .iter()
        .zip(baseline)
        .map(|(&m, &b)| {
            if b > 0.0 {
                Ok(100.0 * (b - m) / b)
            } else {
                Err(domain(format!("baseline MSE must be positive, got {b}")))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let average = per_fold.iter().sum::<f64>() / per_fold.len() as f64;
    Ok(Reduction { per_fold, average })
}
