//! Mean, Gaussian-random and EM imputation, multiple-imputation draws and
//! the average-of-imputations collapse.

mod em;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::data::{all_attribute_stats, AttributeStats, Dataset, Scaling};
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::rng::Seed;

pub use em::{apply_em, conditional_row, fit_em, random_initial_cov, EmConfig, EmFit, GaussianModel};

/// Default bound on the standard-normal variate used by Gaussian-random
/// imputation.
pub const DEFAULT_Z_BOUND: f64 = 4.0;

/// Ridge escalation on numerical failure: each retry multiplies by this.
const RIDGE_ESCALATION: f64 = 100.0;
const RIDGE_RETRIES: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ImputerKind {
    Mean,
    GaussianRandom,
    Em,
}

impl ImputerKind {
    /// Whether repeated draws give different values.
    pub fn is_stochastic(self) -> bool {
        !matches!(self, ImputerKind::Mean)
    }
}

impl fmt::Display for ImputerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ImputerKind::Mean => "MEI",
            ImputerKind::GaussianRandom => "GRandI",
            ImputerKind::Em => "EMI",
        })
    }
}

impl FromStr for ImputerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mei" | "mean" => Ok(ImputerKind::Mean),
            "grandi" | "gaussian" => Ok(ImputerKind::GaussianRandom),
            "em" | "emi" => Ok(ImputerKind::Em),
            _ => Err(Error::Invalid(format!(
                "unknown imputer `{s}` (expected mei, grandi or em)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ImputeConfig {
    pub em: EmConfig,
    pub z_bound: f64,
}

impl Default for ImputeConfig {
    fn default() -> Self {
        ImputeConfig {
            em: EmConfig::default(),
            z_bound: DEFAULT_Z_BOUND,
        }
    }
}

impl ImputeConfig {
    pub fn validate(&self) -> Result<()> {
        self.em.validate()?;
        if !(self.z_bound > 0.0 && self.z_bound.is_finite()) {
            return Err(Error::Invalid(format!(
                "z_bound must be a positive finite number, got {}",
                self.z_bound
            )));
        }
        Ok(())
    }
}

/// Parameters learned from a training set, applied to any dataset with the
/// same attributes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum FittedImputer {
    Mean {
        stats: Vec<AttributeStats>,
    },
    GaussianRandom {
        stats: Vec<AttributeStats>,
        z_bound: f64,
    },
    /// The model lives in the standardized space defined by `scaling`.
    Em {
        scaling: Scaling,
        model: GaussianModel,
        ridge: f64,
    },
}

impl FittedImputer {
    pub fn kind(&self) -> ImputerKind {
        match self {
            FittedImputer::Mean { .. } => ImputerKind::Mean,
            FittedImputer::GaussianRandom { .. } => ImputerKind::GaussianRandom,
            FittedImputer::Em { .. } => ImputerKind::Em,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            FittedImputer::Mean { stats } | FittedImputer::GaussianRandom { stats, .. } => stats.len(),
            FittedImputer::Em { model, .. } => model.dim(),
        }
    }

    /// Fits `kind` on `train`. `rng` drives the random EM initialization.
    pub fn fit<R: Rng + ?Sized>(kind: ImputerKind, train: &Dataset, config: &ImputeConfig, rng: &mut R) -> Result<Self> {
        match kind {
            ImputerKind::Mean => fit_mei(train),
            ImputerKind::GaussianRandom => fit_grandi(train, config.z_bound),
            ImputerKind::Em => fit_em_imputer(train, &config.em, rng),
        }
    }

    /// Fills every unobserved cell. Observed cells are copied bit for bit.
    /// `rng` is only consumed by Gaussian-random imputation.
    pub fn apply<R: Rng + ?Sized>(&self, data: &Dataset, rng: &mut R) -> Result<Dataset> {
        data.check_features(self.n_features())?;
        if data.is_complete() {
            return Ok(data.clone());
        }
        match self {
            FittedImputer::Mean { .. } => apply_mei(self, data),
            FittedImputer::GaussianRandom { .. } => draw_grandi(self, data, rng),
            FittedImputer::Em { scaling, model, ridge } => {
                let imputed = apply_em(model, &scaling.apply(data)?, *ridge)?;
                let mut out = data.clone();
                for r in 0..data.n_records() {
                    for c in 0..data.n_features() {
                        if !data.is_observed(r, c) {
                            let z = imputed.get(r, c).expect("apply_em returns complete data");
                            out.set_cell(r, c, scaling.inverse(c, z));
                        }
                    }
                }
                Ok(out)
            }
        }
    }

    /// Imputes one record given as values plus observation mask. Unobserved
    /// entries of `row` are ignored.
    pub fn impute_record<R: Rng + ?Sized>(&self, row: &[f64], mask: &[bool], rng: &mut R) -> Result<Vec<f64>> {
        let f = self.n_features();
        if row.len() != f || mask.len() != f {
            return Err(Error::Dimension(format!(
                "record has {} cells, imputer expects {f}",
                row.len()
            )));
        }
        let mut out = row.to_vec();
        match self {
            FittedImputer::Mean { stats } => {
                for j in (0..f).filter(|&j| !mask[j]) {
                    out[j] = stats[j].mean;
                }
            }
            FittedImputer::GaussianRandom { stats, z_bound } => {
                for j in (0..f).filter(|&j| !mask[j]) {
                    out[j] = gaussian_value(&stats[j], *z_bound, rng);
                }
            }
            FittedImputer::Em { scaling, model, ridge } => {
                if mask.iter().all(|&o| o) {
                    return Ok(out);
                }
                let z: Vec<f64> = (0..f)
                    .map(|j| if mask[j] { scaling.forward(j, row[j]) } else { f64::NAN })
                    .collect();
                let filled = conditional_row(model, &z, mask, *ridge)?;
                for j in (0..f).filter(|&j| !mask[j]) {
                    out[j] = scaling.inverse(j, filled[j]);
                }
            }
        }
        Ok(out)
    }
}

pub fn fit_mei(train: &Dataset) -> Result<FittedImputer> {
    Ok(FittedImputer::Mean {
        stats: all_attribute_stats(train)?,
    })
}

pub fn apply_mei(imputer: &FittedImputer, data: &Dataset) -> Result<Dataset> {
    let FittedImputer::Mean { stats } = imputer else {
        return Err(Error::Invalid(format!("expected a MEI imputer, got {}", imputer.kind())));
    };
    data.check_features(stats.len())?;
    let mut out = data.clone();
    for r in 0..data.n_records() {
        for c in 0..data.n_features() {
            if !data.is_observed(r, c) {
                out.set_cell(r, c, stats[c].mean);
            }
        }
    }
    Ok(out)
}

pub fn fit_grandi(train: &Dataset, z_bound: f64) -> Result<FittedImputer> {
    if !(z_bound > 0.0 && z_bound.is_finite()) {
        return Err(Error::Invalid(format!("z_bound must be positive, got {z_bound}")));
    }
    Ok(FittedImputer::GaussianRandom {
        stats: all_attribute_stats(train)?,
        z_bound,
    })
}

pub fn draw_grandi<R: Rng + ?Sized>(imputer: &FittedImputer, data: &Dataset, rng: &mut R) -> Result<Dataset> {
    let FittedImputer::GaussianRandom { stats, z_bound } = imputer else {
        return Err(Error::Invalid(format!("expected a GRandI imputer, got {}", imputer.kind())));
    };
    data.check_features(stats.len())?;
    let mut out = data.clone();
    for r in 0..data.n_records() {
        for c in 0..data.n_features() {
            if !data.is_observed(r, c) {
                out.set_cell(r, c, gaussian_value(&stats[c], *z_bound, rng));
            }
        }
    }
    Ok(out)
}

fn gaussian_value<R: Rng + ?Sized>(stats: &AttributeStats, z_bound: f64, rng: &mut R) -> f64 {
    if stats.sd == 0.0 {
        return stats.mean;
    }
    stats.sd * truncated_normal(z_bound, rng) + stats.mean
}

/// Standard normal variate conditioned on `[-bound, bound]`, by rejection.
pub fn truncated_normal<R: Rng + ?Sized>(bound: f64, rng: &mut R) -> f64 {
    if bound >= 1.0 {
        loop {
            let z: f64 = StandardNormal.sample(rng);
            if z.abs() <= bound {
                return z;
            }
        }
    }
    // Narrow window: uniform proposal accepted with the normal density ratio.
    loop {
        let z = rng.random_range(-bound..=bound);
        if rng.random::<f64>() <= (-0.5 * z * z).exp() {
            return z;
        }
    }
}

/// Standardizes `train`, fits the Gaussian by EM and keeps the scaling so
/// imputations come back in original units. A numerical failure is retried
/// with a larger ridge.
pub fn fit_em_imputer<R: Rng + ?Sized>(train: &Dataset, config: &EmConfig, rng: &mut R) -> Result<FittedImputer> {
    let scaling = Scaling::fit(train)?;
    let standardized = scaling.apply(train)?;
    let mut cfg = *config;
    let mut attempt = 0;
    loop {
        match fit_em(&standardized, &cfg, rng) {
            Ok(fit) => {
                return Ok(FittedImputer::Em {
                    scaling,
                    model: fit.model,
                    ridge: cfg.ridge,
                })
            }
            Err(Error::Numerical(msg)) if attempt < RIDGE_RETRIES => {
                let next = (cfg.ridge * RIDGE_ESCALATION).max(1e-6);
                log::warn!("EM failed with ridge {:e} ({msg}); retrying with {next:e}", cfg.ridge);
                cfg.ridge = next;
                attempt += 1;
            }
            Err(e) => return Err(e),
        }
    }
}

/// `m` independent imputations of `train`. Copy `i` uses the stream
/// `seed.derive(i)`, so results do not depend on scheduling. Gaussian-random
/// imputers share one fit and redraw per copy; EM refits per copy from a
/// fresh random start.
pub fn multiple_impute(
    kind: ImputerKind,
    train: &Dataset,
    m: usize,
    config: &ImputeConfig,
    seed: Seed,
    exec: Exec,
) -> Result<(Vec<FittedImputer>, Vec<Dataset>)> {
    if !kind.is_stochastic() {
        return Err(Error::Invalid(
            "MEI is single-valued and cannot produce multiple imputations".into(),
        ));
    }
    if m == 0 {
        return Err(Error::Invalid("number of imputations must be >= 1".into()));
    }
    config.validate()?;
    let shared = match kind {
        ImputerKind::GaussianRandom => Some(fit_grandi(train, config.z_bound)?),
        _ => None,
    };
    let pairs = exec.try_map(m, |i| -> Result<(FittedImputer, Dataset)> {
        let mut rng = seed.derive(i as u64).stream();
        let imputer = match &shared {
            Some(f) => f.clone(),
            None => FittedImputer::fit(kind, train, config, &mut rng)?,
        };
        let copy = imputer.apply(train, &mut rng)?;
        Ok((imputer, copy))
    })?;
    Ok(pairs.into_iter().unzip())
}

/// Cell-wise mean of complete copies. Cells that agree bit for bit across all
/// copies (observed cells, vacuous imputations) are copied rather than
/// averaged so they stay exact.
pub fn average_imputations(copies: &[Dataset]) -> Result<Dataset> {
    let first = copies
        .first()
        .ok_or_else(|| Error::Invalid("no imputed copies to average".into()))?;
    for c in &copies[1..] {
        if c.n_records() != first.n_records() || c.n_features() != first.n_features() {
            return Err(Error::Dimension(format!(
                "copy shape {}x{} differs from {}x{}",
                c.n_records(),
                c.n_features(),
                first.n_records(),
                first.n_features()
            )));
        }
        if c.labels() != first.labels() || c.mask() != first.mask() {
            return Err(Error::Invalid("copies disagree on labels or observed cells".into()));
        }
    }
    if copies.len() == 1 {
        return Ok(first.clone());
    }
    let k = copies.len() as f64;
    let values = (0..first.values_raw().len())
        .map(|i| {
            let v0 = first.values_raw()[i];
            if copies.iter().all(|c| c.values_raw()[i].to_bits() == v0.to_bits()) {
                v0
            } else {
                copies.iter().map(|c| c.values_raw()[i]).sum::<f64>() / k
            }
        })
        .collect();
    Ok(first.with_cells(values, first.mask().to_vec()))
}

/// One complete dataset from `train`: the mean imputation, or the average of
/// `m` stochastic imputations. Returns the imputers used.
pub fn impute_collapsed(
    kind: ImputerKind,
    train: &Dataset,
    m: usize,
    config: &ImputeConfig,
    seed: Seed,
    exec: Exec,
) -> Result<(Vec<FittedImputer>, Dataset)> {
    if !kind.is_stochastic() {
        let imputer = fit_mei(train)?;
        let out = apply_mei(&imputer, train)?;
        return Ok((vec![imputer], out));
    }
    let (imputers, copies) = multiple_impute(kind, train, m, config, seed, exec)?;
    Ok((imputers, average_imputations(&copies)?))
}
