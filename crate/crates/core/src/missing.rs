//! MCAR missingness injection.
//!
//! For every attribute exactly `floor(N·R)` observed cells are removed,
//! chosen uniformly at random and independently of the values and labels.
//! Attributes are processed in column order. A removal that would leave a
//! record with no observed cell is redirected to the next eligible record in
//! the attribute's shuffled order, so per-attribute counts stay exact and no
//! record is ever fully unobserved.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::Seed;

/// Upper bound on the ratio. Above one half the full-row guard can run out of
/// eligible records.
pub const MAX_RATIO: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MissingnessSpec {
    pub ratio: f64,
    pub seed: u64,
}

impl MissingnessSpec {
    pub fn new(ratio: f64, seed: u64) -> Self {
        MissingnessSpec { ratio, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=MAX_RATIO).contains(&self.ratio) {
            return Err(Error::Invalid(format!(
                "missingness ratio {} outside [0, {MAX_RATIO}]",
                self.ratio
            )));
        }
        Ok(())
    }
}

/// `floor(n·ratio)`, tolerant of representation error in `ratio`
/// (0.3·50 must give 15).
pub fn removals_per_attribute(n: usize, ratio: f64) -> usize {
    (n as f64 * ratio + 1e-9).floor() as usize
}

pub fn inject_mcar(data: &Dataset, spec: &MissingnessSpec) -> Result<Dataset> {
    spec.validate()?;
    if !data.is_complete() {
        return Err(Error::Invalid(
            "input already contains missing cells".into(),
        ));
    }
    let n = data.n_records();
    let f = data.n_features();
    let k = removals_per_attribute(n, spec.ratio);
    if k == 0 {
        return Ok(data.clone());
    }
    if k >= n {
        return Err(Error::Invalid(format!(
            "cannot remove {k} of {n} values per attribute"
        )));
    }

    let mut out = data.clone();
    let mut observed_per_record = vec![f; n];
    let base = Seed::new(spec.seed);
    for attr in 0..f {
        let mut order: Vec<usize> = (0..n).collect();
        order.shuffle(&mut base.derive(attr as u64).stream());
        let mut removed = 0;
        for &r in &order {
            if removed == k {
                break;
            }
            // Would empty the record: skip; the removal goes to the next
            // candidate in the shuffled order instead.
            if observed_per_record[r] <= 1 {
                continue;
            }
            out.clear_cell(r, attr);
            observed_per_record[r] -= 1;
            removed += 1;
        }
        if removed < k {
            return Err(Error::Invalid(format!(
                "attribute {attr}: only {removed} of {k} removals possible without emptying a record"
            )));
        }
    }
    Ok(out)
}
