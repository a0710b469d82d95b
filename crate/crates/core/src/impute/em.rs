//! Multivariate Gaussian EM for incomplete data, and conditional-mean imputation.
//!
//! The model lives in standardized space. Starting values are zero means,
//! unit variances and random covariances drawn uniformly from
//! `(-init_range, init_range)`, repaired to positive definite by flooring the
//! eigenvalues. Random starting covariances make repeated fits produce
//! different imputations.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    /// Stop when the largest absolute change in any mean or covariance entry
    /// falls below this.
    pub tol: f64,
    pub max_iter: usize,
    /// Added to the diagonal of the observed block before it is factorized.
    pub ridge: f64,
    pub init_range: f64,
    pub eigen_floor: f64,
}

impl Default for EmConfig {
    fn default() -> Self {
        EmConfig {
            tol: 1e-5,
            max_iter: 100,
            ridge: 1e-6,
            init_range: 1.0,
            eigen_floor: 1e-3,
        }
    }
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Invalid(format!("em tol must be > 0, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::Invalid("em max_iter must be >= 1".into()));
        }
        if !(self.ridge >= 0.0) {
            return Err(Error::Invalid(format!("em ridge must be >= 0, got {}", self.ridge)));
        }
        if !(self.init_range > 0.0 && self.init_range <= 1.0) {
            return Err(Error::Invalid(format!(
                "em init_range must be in (0, 1], got {}",
                self.init_range
            )));
        }
        if !(self.eigen_floor > 0.0) {
            return Err(Error::Invalid(format!(
                "em eigen_floor must be > 0, got {}",
                self.eigen_floor
            )));
        }
        Ok(())
    }
}

/// Mean vector and covariance matrix (row-major) of a multivariate Gaussian.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianModel {
    pub mean: Vec<f64>,
    pub cov: Vec<f64>,
}

impl GaussianModel {
    pub fn new(mean: Vec<f64>, cov: Vec<f64>) -> Result<Self> {
        let f = mean.len();
        if cov.len() != f * f {
            return Err(Error::Dimension(format!(
                "covariance has {} entries for {f} attributes",
                cov.len()
            )));
        }
        Ok(GaussianModel { mean, cov })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_at(&self, i: usize, j: usize) -> f64 {
        self.cov[i * self.dim() + j]
    }

    fn cov_matrix(&self) -> DMatrix<f64> {
        let f = self.dim();
        DMatrix::from_row_slice(f, f, &self.cov)
    }

    fn from_parts(mean: &DVector<f64>, cov: &DMatrix<f64>) -> Self {
        let f = mean.len();
        let mut flat = Vec::with_capacity(f * f);
        for i in 0..f {
            for j in 0..f {
                flat.push(cov[(i, j)]);
            }
        }
        GaussianModel {
            mean: mean.iter().copied().collect(),
            cov: flat,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmFit {
    pub model: GaussianModel,
    pub iterations: usize,
    pub converged: bool,
    /// Largest parameter change in the final iteration.
    pub max_change: f64,
}

/// Random symmetric starting covariance with unit diagonal, eigenvalues
/// floored at `eigen_floor`.
pub fn random_initial_cov<R: Rng + ?Sized>(f: usize, config: &EmConfig, rng: &mut R) -> DMatrix<f64> {
    let mut m = DMatrix::<f64>::identity(f, f);
    for i in 0..f {
        for j in (i + 1)..f {
            let v = rng.random_range(-config.init_range..config.init_range);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
    floor_eigenvalues(&m, config.eigen_floor)
}

fn floor_eigenvalues(m: &DMatrix<f64>, floor: f64) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|&l| l >= floor) {
        return m.clone();
    }
    let clamped = eig.eigenvalues.map(|l| l.max(floor));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clamped) * v.transpose();
    symmetrize(out)
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Regression of a missing block on an observed block under the current model.
struct Conditional {
    observed: Vec<usize>,
    missing: Vec<usize>,
    /// Σ_mo Σ_oo⁻¹, `missing × observed`.
    coef: DMatrix<f64>,
    /// Σ_mm − Σ_mo Σ_oo⁻¹ Σ_om.
    residual_cov: DMatrix<f64>,
}

impl Conditional {
    fn new(cov: &DMatrix<f64>, observed: Vec<usize>, missing: Vec<usize>, ridge: f64) -> Result<Self> {
        let no = observed.len();
        let nm = missing.len();
        let mut s_oo = DMatrix::<f64>::zeros(no, no);
        for (a, &i) in observed.iter().enumerate() {
            for (b, &j) in observed.iter().enumerate() {
                s_oo[(a, b)] = cov[(i, j)];
            }
            s_oo[(a, a)] += ridge;
        }
        let mut s_om = DMatrix::<f64>::zeros(no, nm);
        for (a, &i) in observed.iter().enumerate() {
            for (b, &j) in missing.iter().enumerate() {
                s_om[(a, b)] = cov[(i, j)];
            }
        }
        // X = Σ_oo⁻¹ Σ_om
        let x = match s_oo.clone().cholesky() {
            Some(ch) => ch.solve(&s_om),
            None => match s_oo.try_inverse() {
                Some(inv) => inv * &s_om,
                None => {
                    return Err(Error::Numerical(
                        "observed covariance block is singular; retry with a larger ridge".into(),
                    ))
                }
            },
        };
        let coef = x.transpose();
        let mut residual_cov = DMatrix::<f64>::zeros(nm, nm);
        for (a, &i) in missing.iter().enumerate() {
            for (b, &j) in missing.iter().enumerate() {
                residual_cov[(a, b)] = cov[(i, j)];
            }
        }
        residual_cov -= s_om.transpose() * &x;
        if coef.iter().chain(residual_cov.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite conditional distribution".into()));
        }
        Ok(Conditional {
            observed,
            missing,
            coef,
            residual_cov,
        })
    }

    fn mean(&self, mean: &DVector<f64>, row: &[f64]) -> DVector<f64> {
        let dev = DVector::from_iterator(
            self.observed.len(),
            self.observed.iter().map(|&i| row[i] - mean[i]),
        );
        let mut out = &self.coef * dev;
        for (a, &j) in self.missing.iter().enumerate() {
            out[a] += mean[j];
        }
        out
    }
}

/// Record indices grouped by missingness pattern. Fully observed records are
/// kept separately since they need no conditioning.
struct Patterns {
    complete: Vec<usize>,
    groups: Vec<(Vec<usize>, Vec<usize>, Vec<usize>)>,
}

impl Patterns {
    fn of(data: &Dataset) -> Self {
        let mut complete = Vec::new();
        let mut by_mask: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
        for r in 0..data.n_records() {
            let m = data.row_mask(r);
            if m.iter().all(|&o| o) {
                complete.push(r);
            } else {
                by_mask.entry(m.to_vec()).or_default().push(r);
            }
        }
        let groups = by_mask
            .into_iter()
            .map(|(mask, rows)| {
                let observed = (0..mask.len()).filter(|&i| mask[i]).collect();
                let missing = (0..mask.len()).filter(|&i| !mask[i]).collect();
                (observed, missing, rows)
            })
            .collect();
        Patterns { complete, groups }
    }
}

fn check_fit_input(data: &Dataset) -> Result<()> {
    for j in 0..data.n_features() {
        let n = data.observed_column(j).count();
        if n < 2 {
            if n == 0 {
                return Err(Error::Unobserved(j));
            }
            return Err(Error::Invalid(format!(
                "attribute {j} has {n} observed value; EM needs at least 2"
            )));
        }
    }
    Ok(())
}

/// One E-step plus M-step. Returns the updated mean and covariance.
fn em_step(
    data: &Dataset,
    patterns: &Patterns,
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    ridge: f64,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let f = data.n_features();
    let n = data.n_records() as f64;
    let mut sum = DVector::<f64>::zeros(f);
    let mut cross = DMatrix::<f64>::zeros(f, f);
    let mut y = DVector::<f64>::zeros(f);

    for &r in &patterns.complete {
        y.copy_from_slice(data.row(r));
        sum += &y;
        cross.ger(1.0, &y, &y, 1.0);
    }
    for (observed, missing, rows) in &patterns.groups {
        if observed.is_empty() {
            // Not produced by the injector; contributes the current model.
            let outer = mean * mean.transpose();
            for _ in rows {
                sum += mean;
                cross += cov + &outer;
            }
            continue;
        }
        let cond = Conditional::new(cov, observed.clone(), missing.clone(), ridge)?;
        for &r in rows {
            let row = data.row(r);
            let m_hat = cond.mean(mean, row);
            for &i in observed {
                y[i] = row[i];
            }
            for (a, &j) in missing.iter().enumerate() {
                y[j] = m_hat[a];
            }
            sum += &y;
            cross.ger(1.0, &y, &y, 1.0);
            for (a, &i) in missing.iter().enumerate() {
                for (b, &j) in missing.iter().enumerate() {
                    cross[(i, j)] += cond.residual_cov[(a, b)];
                }
            }
        }
    }
    let new_mean = sum / n;
    let new_cov = symmetrize(cross / n - &new_mean * new_mean.transpose());
    if new_mean.iter().chain(new_cov.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite parameters during EM".into()));
    }
    Ok((new_mean, new_cov))
}

/// Fits a Gaussian to standardized incomplete data by EM from a random start.
pub fn fit_em<R: Rng + ?Sized>(train: &Dataset, config: &EmConfig, rng: &mut R) -> Result<EmFit> {
    config.validate()?;
    check_fit_input(train)?;
    let f = train.n_features();
    if train.n_records() <= f {
        log::warn!(
            "EM on {} records with {f} attributes; covariance estimate will be rank deficient",
            train.n_records()
        );
    }
    let patterns = Patterns::of(train);
    let mut mean = DVector::<f64>::zeros(f);
    let mut cov = random_initial_cov(f, config, rng);
    let mut max_change = f64::INFINITY;
    for it in 1..=config.max_iter {
        let (m, c) = em_step(train, &patterns, &mean, &cov, config.ridge)?;
        max_change = (&m - &mean)
            .iter()
            .chain((&c - &cov).iter())
            .fold(0.0_f64, |acc, d| acc.max(d.abs()));
        mean = m;
        cov = c;
        if max_change < config.tol {
            return Ok(EmFit {
                model: GaussianModel::from_parts(&mean, &cov),
                iterations: it,
                converged: true,
                max_change,
            });
        }
    }
    log::debug!(
        "EM stopped at max_iter={} with change {max_change:.3e}",
        config.max_iter
    );
    Ok(EmFit {
        model: GaussianModel::from_parts(&mean, &cov),
        iterations: config.max_iter,
        converged: false,
        max_change,
    })
}

/// Conditional mean of the unobserved cells of one record. Returns the full
/// row with observed cells untouched.
pub fn conditional_row(model: &GaussianModel, row: &[f64], mask: &[bool], ridge: f64) -> Result<Vec<f64>> {
    let f = model.dim();
    if row.len() != f || mask.len() != f {
        return Err(Error::Dimension(format!(
            "record has {} cells, model has {f} attributes",
            row.len()
        )));
    }
    let mut out = row.to_vec();
    if mask.iter().all(|&o| o) {
        return Ok(out);
    }
    let mean = DVector::from_column_slice(&model.mean);
    let observed: Vec<usize> = (0..f).filter(|&i| mask[i]).collect();
    let missing: Vec<usize> = (0..f).filter(|&i| !mask[i]).collect();
    if observed.is_empty() {
        for &j in &missing {
            out[j] = model.mean[j];
        }
        return Ok(out);
    }
    let cond = Conditional::new(&model.cov_matrix(), observed, missing.clone(), ridge)?;
    let m_hat = cond.mean(&mean, row);
    for (a, &j) in missing.iter().enumerate() {
        if !m_hat[a].is_finite() {
            return Err(Error::Numerical("non-finite conditional mean".into()));
        }
        out[j] = m_hat[a];
    }
    Ok(out)
}

/// Replaces unobserved cells of standardized data by their conditional means.
pub fn apply_em(model: &GaussianModel, data: &Dataset, ridge: f64) -> Result<Dataset> {
    data.check_features(model.dim())?;
    let f = data.n_features();
    let cov = model.cov_matrix();
    let mean = DVector::from_column_slice(&model.mean);
    let patterns = Patterns::of(data);
    let mut values = data.values_raw().to_vec();
    for (observed, missing, rows) in &patterns.groups {
        if observed.is_empty() {
            for &r in rows {
                for &j in missing {
                    values[r * f + j] = model.mean[j];
                }
            }
            continue;
        }
        let cond = Conditional::new(&cov, observed.clone(), missing.clone(), ridge)?;
        for &r in rows {
            let m_hat = cond.mean(&mean, data.row(r));
            for (a, &j) in missing.iter().enumerate() {
                if !m_hat[a].is_finite() {
                    return Err(Error::Numerical("non-finite conditional mean".into()));
                }
                values[r * f + j] = m_hat[a];
            }
        }
    }
    Ok(data.with_cells(values, vec![true; data.mask().len()]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Seed;

    fn bivariate(rho: f64) -> GaussianModel {
        GaussianModel::new(vec![0.0, 0.0], vec![1.0, rho, rho, 1.0]).unwrap()
    }

    #[test]
    fn initial_cov_is_positive_definite_and_unit_diagonal_when_untouched() {
        let cfg = EmConfig::default();
        for s in 0..50 {
            let m = random_initial_cov(8, &cfg, &mut Seed::new(s).stream());
            let eig = m.clone().symmetric_eigen();
            assert!(eig.eigenvalues.iter().all(|&l| l >= cfg.eigen_floor - 1e-9));
            assert!((&m - m.transpose()).amax() < 1e-12);
        }
        // 2×2 with |offdiag| < 1 is already PD: left exactly as drawn
        let m = random_initial_cov(2, &cfg, &mut Seed::new(1).stream());
        assert_eq!((m[(0, 0)], m[(1, 1)]), (1.0, 1.0));
    }

    #[test]
    fn closed_form_bivariate_conditional_mean() {
        for &rho in &[0.8, -0.3, 0.0] {
            let out = conditional_row(&bivariate(rho), &[2.0, f64::NAN], &[true, false], 0.0).unwrap();
            assert!((out[1] - 2.0 * rho).abs() < 1e-10);
            assert_eq!(out[0], 2.0);
        }
    }

    #[test]
    fn diagonal_model_imputes_marginal_means() {
        let model = GaussianModel::new(
            vec![0.5, -1.0, 2.0],
            vec![1.0, 0.0, 0.0, 0.0, 2.0, 0.0, 0.0, 0.0, 3.0],
        )
        .unwrap();
        let out = conditional_row(&model, &[7.0, f64::NAN, f64::NAN], &[true, false, false], 0.0).unwrap();
        assert_eq!(out, vec![7.0, -1.0, 2.0]);
    }

    #[test]
    fn complete_records_unchanged() {
        let d = Dataset::complete("c", &[vec![1.0, 2.0], vec![3.0, -4.0]], vec![0, 1], 2).unwrap();
        let out = apply_em(&bivariate(0.5), &d, 0.0).unwrap();
        assert_eq!(out, d);
    }

    #[test]
    fn fully_observed_data_converges_to_ml_estimates() {
        let rows = vec![
            vec![0.3, -1.2, 0.5],
            vec![1.1, 0.4, -0.7],
            vec![-0.8, 0.9, 1.3],
            vec![0.2, -0.1, -1.1],
            vec![-0.8, 0.0, 0.0],
        ];
        let d = Dataset::complete("c", &rows, vec![0, 1, 0, 1, 0], 2).unwrap();
        let fit = fit_em(&d, &EmConfig::default(), &mut Seed::new(4).stream()).unwrap();
        assert!(fit.converged);
        assert_eq!(fit.iterations, 2);
        let n = rows.len() as f64;
        for i in 0..3 {
            let mi: f64 = rows.iter().map(|r| r[i]).sum::<f64>() / n;
            assert!((fit.model.mean[i] - mi).abs() < 1e-12);
            for j in 0..3 {
                let mj: f64 = rows.iter().map(|r| r[j]).sum::<f64>() / n;
                let c: f64 = rows.iter().map(|r| (r[i] - mi) * (r[j] - mj)).sum::<f64>() / n;
                assert!((fit.model.cov_at(i, j) - c).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn uncorrelated_data_imputes_marginal_mean() {
        // x and y have zero empirical correlation on the complete rows
        let rows = vec![
            vec![Some(1.0), Some(1.0)],
            vec![Some(-1.0), Some(1.0)],
            vec![Some(1.0), Some(-1.0)],
            vec![Some(-1.0), Some(-1.0)],
            vec![Some(0.0), None],
        ];
        let d = Dataset::from_rows(
            "u",
            vec!["x".into(), "y".into()],
            &rows,
            vec![0, 1, 0, 1, 0],
            vec!["a".into(), "b".into()],
        )
        .unwrap();
        let fit = fit_em(&d, &EmConfig::default(), &mut Seed::new(9).stream()).unwrap();
        let out = apply_em(&fit.model, &d, 0.0).unwrap();
        let imputed = out.get(4, 1).unwrap();
        assert!((imputed - fit.model.mean[1]).abs() < 1e-6);
        assert!(imputed.abs() < 1e-6);
    }

    #[test]
    fn rejects_dimension_mismatch() {
        let d = Dataset::complete("c", &[vec![1.0], vec![2.0]], vec![0, 1], 2).unwrap();
        assert!(matches!(apply_em(&bivariate(0.1), &d, 0.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn config_validation() {
        let mut c = EmConfig::default();
        assert!(c.validate().is_ok());
        c.init_range = 1.5;
        assert!(c.validate().is_err());
        c = EmConfig { tol: 0.0, ..EmConfig::default() };
        assert!(c.validate().is_err());
    }
}
