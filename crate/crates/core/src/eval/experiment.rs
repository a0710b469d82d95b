//! Repeated cross-validation over datasets × ratios × methods.
//!
//! For every (dataset, ratio, repetition) the complete dataset receives MCAR
//! missingness once and is shuffled into folds. Each (fold, method) pair is an
//! independent unit: the model is built on the training part and scored on the
//! held-out part. Every random stream is derived from the unit coordinates, so
//! results are identical under any schedule.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::data::{load_csv, split_kfold, Dataset, FoldSplit, LabelColumn};
use crate::ensemble::{build, EnsembleConfig, MethodId};
use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, kappa_error_points, KappaErrorPoint};
use crate::exec::Exec;
use crate::missing::{inject_mcar, MissingnessSpec, MAX_RATIO};
use crate::rng::Seed;

pub const DEFAULT_RATIOS: [f64; 7] = [0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub methods: Vec<MethodId>,
    pub ratios: Vec<f64>,
    /// T
    pub repetitions: usize,
    pub folds: usize,
    /// B, M, tree and imputer settings; the seed field is overwritten per unit.
    pub ensemble: EnsembleConfig,
    pub master_seed: u64,
    /// Which (repetition, fold) supplies the kappa-error points of each
    /// ensemble cell; `None` disables their collection.
    pub kappa_cell: Option<(usize, usize)>,
}

impl Default for ExperimentGrid {
    fn default() -> Self {
        ExperimentGrid {
            methods: MethodId::ALL.to_vec(),
            ratios: DEFAULT_RATIOS.to_vec(),
            repetitions: 30,
            folds: 2,
            ensemble: EnsembleConfig::default(),
            master_seed: 1,
            kappa_cell: Some((0, 0)),
        }
    }
}

impl ExperimentGrid {
    pub fn validate(&self) -> Result<()> {
        if self.methods.is_empty() {
            return Err(Error::Invalid("no methods selected".into()));
        }
        if self.ratios.is_empty() {
            return Err(Error::Invalid("no ratios selected".into()));
        }
        for &r in &self.ratios {
            if !(0.0..=MAX_RATIO).contains(&r) {
                return Err(Error::Invalid(format!("ratio {r} outside [0, {MAX_RATIO}]")));
            }
        }
        if self.repetitions == 0 {
            return Err(Error::Invalid("repetitions must be >= 1".into()));
        }
        if self.folds < 2 {
            return Err(Error::Invalid("folds must be >= 2".into()));
        }
        for &m in &self.methods {
            self.ensemble.validate_for(m)?;
        }
        Ok(())
    }

    /// Number of run results produced per dataset.
    pub fn cells_per_dataset(&self) -> usize {
        self.methods.len() * self.ratios.len() * self.repetitions * self.folds
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub dataset: String,
    pub method: MethodId,
    pub ratio: f64,
    pub repetition: usize,
    pub fold: usize,
    pub accuracy: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KappaRecord {
    pub dataset: String,
    pub method: MethodId,
    pub ratio: f64,
    pub repetition: usize,
    pub fold: usize,
    pub points: Vec<KappaErrorPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetFailure {
    pub dataset: String,
    pub error: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ExperimentOutput {
    /// Sorted by (dataset order, ratio, repetition, fold, method order).
    pub results: Vec<RunResult>,
    pub kappa: Vec<KappaRecord>,
    pub failures: Vec<DatasetFailure>,
}

/// Where to read a dataset from.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetSource {
    pub path: PathBuf,
    pub label: LabelColumn,
}

/// Seed for MCAR injection into `dataset` at `ratio`, repetition `rep`.
pub fn injection_seed(master: u64, dataset: &str, ratio: f64, rep: usize) -> u64 {
    Seed::new(master)
        .derive_str("inject")
        .derive_str(dataset)
        .derive_f64(ratio)
        .derive(rep as u64)
        .value()
}

/// Stream seed for the fold shuffle; shared across ratios so every ratio
/// sees the same partition.
pub fn split_seed(master: u64, dataset: &str, rep: usize) -> Seed {
    Seed::new(master).derive_str("split").derive_str(dataset).derive(rep as u64)
}

/// Model seed of a unit. The method is deliberately absent so all bagging
/// methods of a unit draw the same bootstrap samples.
pub fn model_seed(master: u64, dataset: &str, ratio: f64, rep: usize, fold: usize) -> u64 {
    Seed::new(master)
        .derive_str("model")
        .derive_str(dataset)
        .derive_f64(ratio)
        .derive(rep as u64)
        .derive(fold as u64)
        .value()
}

struct Prepared {
    data: Dataset,
    folds: Vec<FoldSplit>,
}

struct Unit {
    prepared: usize,
    ratio: f64,
    rep: usize,
    fold: usize,
    method: MethodId,
}

struct UnitOutput {
    result: RunResult,
    kappa: Option<KappaRecord>,
}

fn run_unit(grid: &ExperimentGrid, name: &str, prepared: &Prepared, unit: &Unit) -> Result<UnitOutput> {
    let split = &prepared.folds[unit.fold];
    let train = prepared.data.subset(&split.train);
    let test = prepared.data.subset(&split.test);
    let config = EnsembleConfig {
        seed: model_seed(grid.master_seed, name, unit.ratio, unit.rep, unit.fold),
        ..grid.ensemble
    };
    let model = build(unit.method, &train, &config, Exec::Sequential)?;
    let want_kappa = unit.method.is_ensemble() && grid.kappa_cell == Some((unit.rep, unit.fold));
    let (acc, kappa) = if want_kappa {
        let votes = model.member_predictions(&test, Exec::Sequential)?;
        let points = kappa_error_points(&votes, test.labels(), test.n_classes())?;
        let preds = model.predict(&test, Exec::Sequential)?;
        let rec = KappaRecord {
            dataset: name.to_string(),
            method: unit.method,
            ratio: unit.ratio,
            repetition: unit.rep,
            fold: unit.fold,
            points,
        };
        (accuracy(&preds, test.labels())?, Some(rec))
    } else {
        (accuracy(&model.predict(&test, Exec::Sequential)?, test.labels())?, None)
    };
    log::debug!(
        "{name} {} r={} rep={} fold={} acc={acc:.4}",
        unit.method,
        unit.ratio,
        unit.rep,
        unit.fold
    );
    Ok(UnitOutput {
        result: RunResult {
            dataset: name.to_string(),
            method: unit.method,
            ratio: unit.ratio,
            repetition: unit.rep,
            fold: unit.fold,
            accuracy: acc,
        },
        kappa,
    })
}

fn run_dataset(grid: &ExperimentGrid, data: &Dataset, exec: Exec) -> Result<(Vec<RunResult>, Vec<KappaRecord>)> {
    if !data.is_complete() {
        return Err(Error::Invalid(format!(
            "dataset {} already has missing cells; the grid injects its own",
            data.name()
        )));
    }
    let name = data.name().to_string();
    let mut prepared = Vec::new();
    let mut units = Vec::new();
    for &ratio in &grid.ratios {
        for rep in 0..grid.repetitions {
            let spec = MissingnessSpec::new(ratio, injection_seed(grid.master_seed, &name, ratio, rep));
            let injected = inject_mcar(data, &spec)?;
            let folds = split_kfold(&injected, grid.folds, &mut split_seed(grid.master_seed, &name, rep).stream())?;
            let p = prepared.len();
            prepared.push(Prepared { data: injected, folds });
            for fold in 0..grid.folds {
                for &method in &grid.methods {
                    units.push(Unit {
                        prepared: p,
                        ratio,
                        rep,
                        fold,
                        method,
                    });
                }
            }
        }
    }
    let outputs = exec.try_map(units.len(), |i| {
        let u = &units[i];
        run_unit(grid, &name, &prepared[u.prepared], u)
    })?;
    let mut results = Vec::with_capacity(outputs.len());
    let mut kappa = Vec::new();
    for o in outputs {
        results.push(o.result);
        kappa.extend(o.kappa);
    }
    Ok((results, kappa))
}

/// Runs the grid over already-loaded complete datasets. A dataset whose units
/// fail is reported in `failures` and the rest of the grid continues.
pub fn run_experiment(grid: &ExperimentGrid, datasets: &[Dataset], exec: Exec) -> Result<ExperimentOutput> {
    grid.validate()?;
    let mut out = ExperimentOutput::default();
    for data in datasets {
        log::info!(
            "{}: {} records, {} attributes, {} classes; {} runs",
            data.name(),
            data.n_records(),
            data.n_features(),
            data.n_classes(),
            grid.cells_per_dataset()
        );
        match run_dataset(grid, data, exec) {
            Ok((results, kappa)) => {
                out.results.extend(results);
                out.kappa.extend(kappa);
            }
            Err(e) => {
                log::error!("{}: {e}", data.name());
                out.failures.push(DatasetFailure {
                    dataset: data.name().to_string(),
                    error: e.to_string(),
                });
            }
        }
    }
    Ok(out)
}

/// Loads every source, then runs the grid on those that loaded. Load errors
/// become dataset failures.
pub fn run_experiment_from_sources(grid: &ExperimentGrid, sources: &[DatasetSource], exec: Exec) -> Result<ExperimentOutput> {
    grid.validate()?;
    let mut loaded = Vec::new();
    let mut failures = Vec::new();
    for s in sources {
        match load_csv(&s.path, &s.label) {
            Ok(d) => loaded.push(d),
            Err(e) => {
                let name = s
                    .path
                    .file_stem()
                    .map(|n| n.to_string_lossy().into_owned())
                    .unwrap_or_else(|| s.path.display().to_string());
                log::error!("{name}: {e}");
                failures.push(DatasetFailure {
                    dataset: name,
                    error: e.to_string(),
                });
            }
        }
    }
    let mut out = run_experiment(grid, &loaded, exec)?;
    failures.append(&mut out.failures);
    out.failures = failures;
    Ok(out)
}
