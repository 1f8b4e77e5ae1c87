//! Accuracy and the area under the decision rate curve (AUDRC).
//!
//! Predictions are ranked by certainty, most certain first; equal
//! certainties keep `pair_id` order.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::Direction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredPrediction {
    pub pair_id: String,
    pub predicted: Direction,
    pub truth: Direction,
    pub certainty: f64,
}

impl ScoredPrediction {
    pub fn correct(&self) -> bool {
        self.predicted == self.truth
    }
}

fn check(preds: &[ScoredPrediction]) -> Result<()> {
    if preds.is_empty() {
        return Err(Error::Input("no predictions to evaluate".into()));
    }
    if preds.iter().any(|p| !p.certainty.is_finite()) {
        return Err(Error::Input("certainties must be finite".into()));
    }
    Ok(())
}

pub fn accuracy(preds: &[ScoredPrediction]) -> Result<f64> {
    check(preds)?;
    Ok(preds.iter().filter(|p| p.correct()).count() as f64 / preds.len() as f64)
}

fn ranked(preds: &[ScoredPrediction]) -> Vec<&ScoredPrediction> {
    let mut v: Vec<&ScoredPrediction> = preds.iter().collect();
    v.sort_by(|a, b| a.pair_id.cmp(&b.pair_id));
    v.sort_by(|a, b| b.certainty.total_cmp(&a.certainty));
    v
}

/// Points `(m / M, accuracy of the top m)` for `m = 1..M`.
pub fn decision_rate_curve(preds: &[ScoredPrediction]) -> Result<Vec<(f64, f64)>> {
    check(preds)?;
    let total = preds.len() as f64;
    let mut correct = 0usize;
    Ok(ranked(preds)
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            correct += usize::from(p.correct());
            let m = (i + 1) as f64;
            (m / total, correct as f64 / m)
        })
        .collect())
}

/// Mean of the decision rate curve's prefix accuracies.
pub fn audrc(preds: &[ScoredPrediction]) -> Result<f64> {
    let curve = decision_rate_curve(preds)?;
    Ok(curve.iter().map(|(_, a)| a).sum::<f64>() / curve.len() as f64)
}
