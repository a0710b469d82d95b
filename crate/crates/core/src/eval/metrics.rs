//! Accuracy and pairwise kappa-error diversity statistics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn accuracy(predictions: &[usize], labels: &[usize]) -> Result<f64> {
    if predictions.len() != labels.len() {
        return Err(Error::Dimension(format!(
            "{} predictions for {} labels",
            predictions.len(),
            labels.len()
        )));
    }
    if labels.is_empty() {
        return Err(Error::Invalid("accuracy of an empty prediction list".into()));
    }
    let hits = predictions.iter().zip(labels).filter(|(p, y)| p == y).count();
    Ok(hits as f64 / labels.len() as f64)
}

/// Cohen's kappa between two prediction lists over `n_classes` classes.
/// Full agreement on a single class (chance agreement 1) gives 1.
pub fn kappa(pred_i: &[usize], pred_j: &[usize], n_classes: usize) -> Result<f64> {
    if pred_i.len() != pred_j.len() {
        return Err(Error::Dimension(format!(
            "prediction lists of length {} and {}",
            pred_i.len(),
            pred_j.len()
        )));
    }
    if pred_i.is_empty() {
        return Err(Error::Invalid("kappa of empty prediction lists".into()));
    }
    let m = pred_i.len() as f64;
    let mut table = vec![0usize; n_classes * n_classes];
    for (&a, &b) in pred_i.iter().zip(pred_j) {
        if a >= n_classes || b >= n_classes {
            return Err(Error::Invalid(format!("class index out of range for {n_classes} classes")));
        }
        table[a * n_classes + b] += 1;
    }
    let diag: usize = (0..n_classes).map(|k| table[k * n_classes + k]).sum();
    let theta1 = diag as f64 / m;
    let theta2: f64 = (0..n_classes)
        .map(|k| {
            let row: usize = (0..n_classes).map(|c| table[k * n_classes + c]).sum();
            let col: usize = (0..n_classes).map(|r| table[r * n_classes + k]).sum();
            (row as f64 / m) * (col as f64 / m)
        })
        .sum();
    if theta2 >= 1.0 {
        // both lists constant on the same class
        return Ok(1.0);
    }
    Ok((theta1 - theta2) / (1.0 - theta2))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaErrorPoint {
    pub member_i: usize,
    pub member_j: usize,
    pub kappa: f64,
    pub mean_error: f64,
}

/// One point per member pair `i < j`: their kappa and mean error.
pub fn kappa_error_points(members: &[Vec<usize>], labels: &[usize], n_classes: usize) -> Result<Vec<KappaErrorPoint>> {
    if members.len() < 2 {
        return Err(Error::Invalid(format!(
            "kappa-error needs at least 2 members, got {}",
            members.len()
        )));
    }
    let errors = members
        .iter()
        .map(|p| accuracy(p, labels).map(|a| 1.0 - a))
        .collect::<Result<Vec<_>>>()?;
    let l = members.len();
    let mut out = Vec::with_capacity(l * (l - 1) / 2);
    for i in 0..l {
        for j in (i + 1)..l {
            out.push(KappaErrorPoint {
                member_i: i,
                member_j: j,
                kappa: kappa(&members[i], &members[j], n_classes)?,
                mean_error: 0.5 * (errors[i] + errors[j]),
            });
        }
    }
    Ok(out)
}
