//! Flat `key = value` run configuration.
//!
//! One setting per line, `#` starts a comment, list values are
//! comma-separated. Keys are case-insensitive and a few have short aliases
//! (`B`, `M`, `T`). Command-line flags are applied on top of the file as if
//! they were extra lines.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use ensimp::eval::{DatasetSource, ExperimentGrid, DEFAULT_RATIOS};
use ensimp::{EnsembleConfig, Family, LabelColumn, MethodId, TestImputation};

pub const OUTPUT_ENV: &str = "ENSIMP_OUTPUT_DIR";
pub const DEFAULT_OUTPUT: &str = "results";
pub const DEFAULT_DATA_DIR: &str = "data";
pub const DEFAULT_LABEL: &str = "class";

const KEYS: &[(&str, &[&str])] = &[
    ("datasets", &["dataset"]),
    ("data_dir", &[]),
    ("label", &[]),
    ("methods", &["method"]),
    ("ratios", &["ratio"]),
    ("ensemble_size", &["b"]),
    ("imputations", &["m"]),
    ("repetitions", &["t", "reps"]),
    ("folds", &[]),
    ("seed", &[]),
    ("em_tol", &[]),
    ("em_max_iter", &[]),
    ("em_ridge", &[]),
    ("z_bound", &["z"]),
    ("min_leaf_weight", &[]),
    ("max_depth", &[]),
    ("test_imputation", &[]),
    ("kappa", &[]),
    ("output_dir", &["output"]),
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config key '{}': {}", self.key, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(key: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        key: key.to_string(),
        message: message.into(),
    }
}

/// Canonical key for `raw`, or `None` if unknown. `label.<dataset>` keys are
/// kept as they are.
fn canonical(raw: &str) -> Option<String> {
    let k = raw.trim().to_ascii_lowercase().replace('-', "_");
    if let Some(ds) = k.strip_prefix("label.") {
        return (!ds.is_empty()).then_some(k);
    }
    KEYS.iter()
        .find(|(name, aliases)| *name == k || aliases.contains(&k.as_str()))
        .map(|(name, _)| name.to_string())
}

/// Raw settings: canonical key → (key as written, value).
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, (String, String)>,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        for (n, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(err(line, format!("line {}: expected `key = value`", n + 1)));
            };
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| err("config", format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.trim();
        let canon = canonical(key).ok_or_else(|| err(key, "unknown key"))?;
        self.entries.insert(canon, (key.to_string(), value.trim().to_string()));
        Ok(())
    }

    /// Parses a `key=value` override.
    pub fn set_pair(&mut self, pair: &str) -> Result<(), ConfigError> {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| err(pair, "expected `key=value`"))?;
        self.set(k, v)
    }

    fn get(&self, key: &str) -> Option<(&str, &str)> {
        self.entries.get(key).map(|(k, v)| (k.as_str(), v.as_str()))
    }

    fn parse_value<T: FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError>
    where
        T::Err: fmt::Display,
    {
        match self.get(key) {
            None => Ok(default),
            Some((written, v)) => v
                .parse()
                .map_err(|e| err(written, format!("cannot parse `{v}`: {e}"))),
        }
    }

    fn parse_list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, ConfigError>
    where
        T::Err: fmt::Display,
    {
        let Some((written, v)) = self.get(key) else {
            return Ok(None);
        };
        let items: Vec<&str> = v.split(',').map(str::trim).filter(|s| !s.is_empty()).collect();
        if items.is_empty() {
            return Err(err(written, "empty list"));
        }
        items
            .into_iter()
            .map(|s| s.parse().map_err(|e| err(written, format!("cannot parse `{s}`: {e}"))))
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    fn written(&self, key: &str) -> String {
        self.get(key).map_or_else(|| key.to_string(), |(w, _)| w.to_string())
    }
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub datasets: Vec<DatasetSource>,
    pub grid: ExperimentGrid,
    pub output_dir: PathBuf,
}

impl RunConfig {
    /// Validates every setting up front. `env_output` is the value of the
    /// output-directory environment variable, used when no key sets it.
    pub fn from_raw(raw: &RawConfig, env_output: Option<PathBuf>) -> Result<Self, ConfigError> {
        let data_dir: PathBuf = raw.parse_value("data_dir", PathBuf::from(DEFAULT_DATA_DIR))?;
        let default_label: String = raw.parse_value("label", DEFAULT_LABEL.to_string())?;

        let names: Vec<String> = raw
            .parse_list("datasets")?
            .ok_or_else(|| err("datasets", "required (comma-separated names or CSV paths)"))?;
        let mut datasets = Vec::with_capacity(names.len());
        for name in &names {
            let direct = PathBuf::from(name);
            let path = if direct.is_file() {
                direct
            } else {
                data_dir.join(format!("{name}.csv"))
            };
            if !path.is_file() {
                return Err(err(
                    &raw.written("datasets"),
                    format!("dataset `{name}` not found (looked for {})", path.display()),
                ));
            }
            let stem = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_ascii_lowercase())
                .unwrap_or_default();
            let label = raw
                .get(&format!("label.{stem}"))
                .map_or(default_label.as_str(), |(_, v)| v);
            datasets.push(DatasetSource {
                path,
                label: label.parse::<LabelColumn>().unwrap_or_else(|e| match e {}),
            });
        }

        let methods: Vec<MethodId> = raw.parse_list("methods")?.unwrap_or_else(|| MethodId::ALL.to_vec());
        let ratios: Vec<f64> = raw.parse_list("ratios")?.unwrap_or_else(|| DEFAULT_RATIOS.to_vec());
        for &r in &ratios {
            if !(0.0..=ensimp::missing::MAX_RATIO).contains(&r) {
                return Err(err(
                    &raw.written("ratios"),
                    format!("ratio {r} outside [0, {}]", ensimp::missing::MAX_RATIO),
                ));
            }
        }

        let mut ens = EnsembleConfig::default();
        ens.ensemble_size = raw.parse_value("ensemble_size", ens.ensemble_size)?;
        ens.imputations = raw.parse_value("imputations", ens.imputations)?;
        ens.em.tol = raw.parse_value("em_tol", ens.em.tol)?;
        ens.em.max_iter = raw.parse_value("em_max_iter", ens.em.max_iter)?;
        ens.em.ridge = raw.parse_value("em_ridge", ens.em.ridge)?;
        ens.z_bound = raw.parse_value("z_bound", ens.z_bound)?;
        ens.tree.min_leaf_weight = raw.parse_value("min_leaf_weight", ens.tree.min_leaf_weight)?;
        if raw.get("max_depth").is_some() {
            ens.tree.max_depth = Some(raw.parse_value("max_depth", 0usize)?);
        }
        ens.test_imputation = raw.parse_value("test_imputation", TestImputation::Member)?;

        let positive = |key: &str, ok: bool, what: &str| -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(err(&raw.written(key), what.to_string()))
            }
        };
        positive("ensemble_size", ens.ensemble_size >= 1, "B must be >= 1")?;
        positive("imputations", ens.imputations >= 1, "M must be >= 1")?;
        positive("em_tol", ens.em.tol > 0.0, "must be > 0")?;
        positive("em_max_iter", ens.em.max_iter >= 1, "must be >= 1")?;
        positive("em_ridge", ens.em.ridge >= 0.0, "must be >= 0")?;
        positive("z_bound", ens.z_bound > 0.0 && ens.z_bound.is_finite(), "must be a positive number")?;
        positive("min_leaf_weight", ens.tree.min_leaf_weight >= 1.0, "must be >= 1")?;
        if let Some(m) = methods.iter().find(|m| m.family() == Family::BagMi) {
            positive(
                "imputations",
                ens.ensemble_size % ens.imputations == 0,
                &format!(
                    "{m} needs B to be a multiple of M (B={}, M={})",
                    ens.ensemble_size, ens.imputations
                ),
            )?;
        }

        let repetitions: usize = raw.parse_value("repetitions", 30)?;
        positive("repetitions", repetitions >= 1, "T must be >= 1")?;
        let folds: usize = raw.parse_value("folds", 2)?;
        positive("folds", folds >= 2, "must be >= 2")?;
        let kappa: bool = raw.parse_value("kappa", true)?;

        let grid = ExperimentGrid {
            methods,
            ratios,
            repetitions,
            folds,
            ensemble: ens,
            master_seed: raw.parse_value("seed", 1u64)?,
            kappa_cell: kappa.then_some((0, 0)),
        };
        grid.validate().map_err(|e| err("config", e.to_string()))?;

        let output_dir = match raw.get("output_dir") {
            Some((_, v)) => PathBuf::from(v),
            None => env_output.unwrap_or_else(|| PathBuf::from(DEFAULT_OUTPUT)),
        };
        Ok(RunConfig {
            datasets,
            grid,
            output_dir,
        })
    }
}
