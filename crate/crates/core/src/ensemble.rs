//! The twelve imputation/classification methods and majority-vote prediction.
//!
//! Single methods train one tree. `NoImp` leaves missing cells to the tree,
//! `MEI` fills them with training means, and `GRandI`/`EM` fill them with the
//! average of M stochastic imputations. The three ensemble families each
//! produce exactly B trees:
//!
//! * bagging single imputation: B bootstraps, each collapsed to one complete
//!   dataset,
//! * bagging multiple imputation: B/M bootstraps, each imputed M times,
//! * multiple-imputation ensemble: B imputations of the training data itself.
//!
//! Bootstrap samples depend only on the seed and the bootstrap index, never on
//! the method, so bagging methods see identical samples.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::impute::{impute_collapsed, multiple_impute, EmConfig, FittedImputer, ImputeConfig, ImputerKind, DEFAULT_Z_BOUND};
use crate::rng::Seed;
use crate::tree::{argmax, DecisionTree, TreeConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum MethodId {
    NoImp,
    Mei,
    GRandI,
    Em,
    BagNoImp,
    BagMei,
    BagGRandI,
    BagEm,
    BagMiGRandI,
    BagMiEm,
    MiGRandI,
    MiEm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    Single,
    BagSingle,
    BagMi,
    MiEnsemble,
}

impl MethodId {
    pub const ALL: [MethodId; 12] = [
        MethodId::NoImp,
        MethodId::Mei,
        MethodId::GRandI,
        MethodId::Em,
        MethodId::BagNoImp,
        MethodId::BagMei,
        MethodId::BagGRandI,
        MethodId::BagEm,
        MethodId::BagMiGRandI,
        MethodId::BagMiEm,
        MethodId::MiGRandI,
        MethodId::MiEm,
    ];

    pub fn name(self) -> &'static str {
        match self {
            MethodId::NoImp => "NoImp",
            MethodId::Mei => "MEI",
            MethodId::GRandI => "GRandI",
            MethodId::Em => "EM",
            MethodId::BagNoImp => "BagNoImp",
            MethodId::BagMei => "BagMEI",
            MethodId::BagGRandI => "BagGRandI",
            MethodId::BagEm => "BagEM",
            MethodId::BagMiGRandI => "BagMIGRandI",
            MethodId::BagMiEm => "BagMIEM",
            MethodId::MiGRandI => "MIGRandI",
            MethodId::MiEm => "MIEM",
        }
    }

    pub fn family(self) -> Family {
        use MethodId::*;
        match self {
            NoImp | Mei | GRandI | Em => Family::Single,
            BagNoImp | BagMei | BagGRandI | BagEm => Family::BagSingle,
            BagMiGRandI | BagMiEm => Family::BagMi,
            MiGRandI | MiEm => Family::MiEnsemble,
        }
    }

    /// The imputer used, `None` for the methods that leave missing cells to
    /// the tree.
    pub fn imputer(self) -> Option<ImputerKind> {
        use MethodId::*;
        match self {
            NoImp | BagNoImp => None,
            Mei | BagMei => Some(ImputerKind::Mean),
            GRandI | BagGRandI | BagMiGRandI | MiGRandI => Some(ImputerKind::GaussianRandom),
            Em | BagEm | BagMiEm | MiEm => Some(ImputerKind::Em),
        }
    }

    pub fn is_ensemble(self) -> bool {
        self.family() != Family::Single
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        MethodId::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(t))
            .ok_or_else(|| {
                let names: Vec<&str> = MethodId::ALL.iter().map(|m| m.name()).collect();
                Error::Invalid(format!("unknown method `{t}` (expected one of {})", names.join(", ")))
            })
    }
}

/// How a member handles missing cells in a record it is asked to classify.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestImputation {
    /// Impute with the member's own fitted imputers (averaged when it holds
    /// several), then classify the completed record.
    #[default]
    Member,
    /// Leave missing cells to the tree's fractional descent.
    Native,
}

impl FromStr for TestImputation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "member" => Ok(TestImputation::Member),
            "native" => Ok(TestImputation::Native),
            _ => Err(Error::Invalid(format!(
                "unknown test imputation `{s}` (expected member or native)"
            ))),
        }
    }
}

impl fmt::Display for TestImputation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            TestImputation::Member => "member",
            TestImputation::Native => "native",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    /// B
    pub ensemble_size: usize,
    /// M
    pub imputations: usize,
    pub tree: TreeConfig,
    pub em: EmConfig,
    pub z_bound: f64,
    pub seed: u64,
    pub test_imputation: TestImputation,
}

impl Default for EnsembleConfig {
    fn default() -> Self {
        EnsembleConfig {
            ensemble_size: 25,
            imputations: 5,
            tree: TreeConfig::default(),
            em: EmConfig::default(),
            z_bound: DEFAULT_Z_BOUND,
            seed: 0,
            test_imputation: TestImputation::Member,
        }
    }
}

impl EnsembleConfig {
    pub fn impute_config(&self) -> ImputeConfig {
        ImputeConfig {
            em: self.em,
            z_bound: self.z_bound,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.ensemble_size == 0 {
            return Err(Error::Invalid("ensemble size B must be >= 1".into()));
        }
        if self.imputations == 0 {
            return Err(Error::Invalid("imputation count M must be >= 1".into()));
        }
        self.tree.validate()?;
        self.impute_config().validate()
    }

    /// Validation plus the constraints specific to `method`.
    pub fn validate_for(&self, method: MethodId) -> Result<()> {
        self.validate()?;
        if method.family() == Family::BagMi && !self.ensemble_size.is_multiple_of(self.imputations) {
            return Err(Error::Method {
                method: method.name().into(),
                reason: format!(
                    "B={} is not a multiple of M={}",
                    self.ensemble_size, self.imputations
                ),
            });
        }
        Ok(())
    }
}

/// `(bootstraps, imputations, datasets created)` for an ensemble family.
pub fn dataset_count(family: Family, b: usize, m: usize) -> Result<(usize, usize, usize)> {
    if b == 0 || m == 0 {
        return Err(Error::Invalid("B and M must be >= 1".into()));
    }
    match family {
        Family::Single => Err(Error::Invalid("dataset accounting applies to ensemble families".into())),
        Family::BagSingle => Ok((b, b * m, b + b * m)),
        Family::BagMi => {
            if !b.is_multiple_of(m) {
                return Err(Error::Invalid(format!("B={b} is not a multiple of M={m}")));
            }
            Ok((b / m, b, b + b / m))
        }
        Family::MiEnsemble => Ok((0, b, b)),
    }
}

/// N records drawn uniformly with replacement.
pub fn bootstrap<R: Rng + ?Sized>(data: &Dataset, rng: &mut R) -> Dataset {
    let n = data.n_records();
    let idx: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    data.subset(&idx)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Member {
    pub tree: DecisionTree,
    /// Imputers whose outputs are averaged for this member; empty when
    /// missing cells are left to the tree.
    pub imputers: Vec<FittedImputer>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleModel {
    pub version: u32,
    pub method: MethodId,
    pub members: Vec<Member>,
    pub n_classes: usize,
    pub n_features: usize,
    pub class_names: Vec<String>,
    pub feature_names: Vec<String>,
    pub seed: u64,
    pub test_imputation: TestImputation,
}

fn bootstrap_seed(config: &EnsembleConfig, b: usize) -> Seed {
    Seed::new(config.seed).derive_str("bootstrap").derive(b as u64)
}

fn impute_seed(config: &EnsembleConfig, method: MethodId) -> Seed {
    Seed::new(config.seed).derive_str("impute").derive_str(method.name())
}

fn wrong_builder(method: MethodId, expected: &str) -> Error {
    let reason = match method.imputer() {
        Some(ImputerKind::Mean) if expected != "single" && expected != "bagging" => {
            "MEI is single-valued and has no multiple imputations".to_string()
        }
        None if expected != "single" && expected != "bagging" => {
            "without imputation every copy would be identical".to_string()
        }
        _ => format!("not a {expected} method"),
    };
    Error::Method {
        method: method.name().into(),
        reason,
    }
}

/// Completes `data` for one tree: nothing, mean imputation, or the average of
/// M stochastic imputations.
fn prepare(
    method: MethodId,
    data: &Dataset,
    config: &EnsembleConfig,
    seed: Seed,
    exec: Exec,
) -> Result<(Vec<FittedImputer>, Dataset)> {
    match method.imputer() {
        None => Ok((Vec::new(), data.clone())),
        Some(kind) => impute_collapsed(kind, data, config.imputations, &config.impute_config(), seed, exec),
    }
}

impl EnsembleModel {
    fn assemble(method: MethodId, train: &Dataset, config: &EnsembleConfig, members: Vec<Member>) -> Self {
        let meta = train.meta();
        EnsembleModel {
            version: MODEL_FORMAT_VERSION,
            method,
            members,
            n_classes: meta.n_classes,
            n_features: meta.n_features,
            class_names: meta.class_names.clone(),
            feature_names: meta.feature_names.clone(),
            seed: config.seed,
            test_imputation: config.test_imputation,
        }
    }
}

pub fn build_single(method: MethodId, train: &Dataset, config: &EnsembleConfig, exec: Exec) -> Result<EnsembleModel> {
    if method.family() != Family::Single {
        return Err(wrong_builder(method, "single"));
    }
    config.validate_for(method)?;
    let (imputers, complete) = prepare(method, train, config, impute_seed(config, method), exec)?;
    let tree = DecisionTree::train(&complete, &config.tree, None)?;
    Ok(EnsembleModel::assemble(method, train, config, vec![Member { tree, imputers }]))
}

pub fn build_bag_single(method: MethodId, train: &Dataset, config: &EnsembleConfig, exec: Exec) -> Result<EnsembleModel> {
    if method.family() != Family::BagSingle {
        return Err(wrong_builder(method, "bagging"));
    }
    config.validate_for(method)?;
    let base = impute_seed(config, method);
    let members = exec.try_map(config.ensemble_size, |b| -> Result<Member> {
        let sample = bootstrap(train, &mut bootstrap_seed(config, b).stream());
        let (imputers, complete) = prepare(method, &sample, config, base.derive(b as u64), Exec::Sequential)?;
        let tree = DecisionTree::train(&complete, &config.tree, None)?;
        Ok(Member { tree, imputers })
    })?;
    Ok(EnsembleModel::assemble(method, train, config, members))
}

pub fn build_bag_mi(method: MethodId, train: &Dataset, config: &EnsembleConfig, exec: Exec) -> Result<EnsembleModel> {
    if method.family() != Family::BagMi {
        return Err(wrong_builder(method, "bagging multiple-imputation"));
    }
    config.validate_for(method)?;
    let kind = method.imputer().expect("bagging MI methods impute");
    let m = config.imputations;
    let base = impute_seed(config, method);
    let groups = exec.try_map(config.ensemble_size / m, |b| -> Result<Vec<Member>> {
        let sample = bootstrap(train, &mut bootstrap_seed(config, b).stream());
        let (imputers, copies) =
            multiple_impute(kind, &sample, m, &config.impute_config(), base.derive(b as u64), Exec::Sequential)?;
        imputers
            .into_iter()
            .zip(copies)
            .map(|(imp, copy)| {
                Ok(Member {
                    tree: DecisionTree::train(&copy, &config.tree, None)?,
                    imputers: vec![imp],
                })
            })
            .collect()
    })?;
    Ok(EnsembleModel::assemble(method, train, config, groups.into_iter().flatten().collect()))
}

pub fn build_mi_ensemble(method: MethodId, train: &Dataset, config: &EnsembleConfig, exec: Exec) -> Result<EnsembleModel> {
    if method.family() != Family::MiEnsemble {
        return Err(wrong_builder(method, "multiple-imputation ensemble"));
    }
    config.validate_for(method)?;
    let kind = method.imputer().expect("MI ensemble methods impute");
    let (imputers, copies) = multiple_impute(
        kind,
        train,
        config.ensemble_size,
        &config.impute_config(),
        impute_seed(config, method),
        exec,
    )?;
    let trees = exec.try_map(copies.len(), |i| DecisionTree::train(&copies[i], &config.tree, None))?;
    let members = trees
        .into_iter()
        .zip(imputers)
        .map(|(tree, imp)| Member { tree, imputers: vec![imp] })
        .collect();
    Ok(EnsembleModel::assemble(method, train, config, members))
}

/// Builds `method` on `train` with the family-appropriate constructor.
pub fn build(method: MethodId, train: &Dataset, config: &EnsembleConfig, exec: Exec) -> Result<EnsembleModel> {
    match method.family() {
        Family::Single => build_single(method, train, config, exec),
        Family::BagSingle => build_bag_single(method, train, config, exec),
        Family::BagMi => build_bag_mi(method, train, config, exec),
        Family::MiEnsemble => build_mi_ensemble(method, train, config, exec),
    }
}

/// Plurality of hard votes, ties to the lowest class index.
pub fn majority_vote(votes: &[usize], n_classes: usize) -> usize {
    let mut counts = vec![0.0; n_classes];
    for &v in votes {
        counts[v] += 1.0;
    }
    argmax(&counts)
}

impl EnsembleModel {
    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Class voted by member `m` for a record. `record_id` keys the stream
    /// used by Gaussian-random test-time imputation.
    pub fn member_vote(&self, m: usize, row: &[f64], mask: &[bool], record_id: u64) -> Result<usize> {
        let member = &self.members[m];
        if self.test_imputation == TestImputation::Native || member.imputers.is_empty() || mask.iter().all(|&o| o) {
            return Ok(member.tree.predict(row, mask));
        }
        let base = Seed::new(self.seed).derive_str("predict").derive(m as u64).derive(record_id);
        let mut filled = vec![0.0; row.len()];
        for (i, imp) in member.imputers.iter().enumerate() {
            let rec = imp.impute_record(row, mask, &mut base.derive(i as u64).stream())?;
            for (f, v) in filled.iter_mut().zip(rec) {
                *f += v;
            }
        }
        let k = member.imputers.len() as f64;
        for (j, f) in filled.iter_mut().enumerate() {
            *f = if mask[j] { row[j] } else { *f / k };
        }
        Ok(member.tree.predict(&filled, &vec![true; row.len()]))
    }

    pub fn predict_record(&self, row: &[f64], mask: &[bool], record_id: u64) -> Result<usize> {
        if self.is_empty() {
            return Err(Error::Invalid("empty ensemble".into()));
        }
        if row.len() != self.n_features || mask.len() != self.n_features {
            return Err(Error::Dimension(format!(
                "record has {} cells, model expects {}",
                row.len(),
                self.n_features
            )));
        }
        let votes = (0..self.len())
            .map(|m| self.member_vote(m, row, mask, record_id))
            .collect::<Result<Vec<_>>>()?;
        Ok(majority_vote(&votes, self.n_classes))
    }

    /// Ensemble prediction for every record; record ids are row indices.
    pub fn predict(&self, data: &Dataset, exec: Exec) -> Result<Vec<usize>> {
        data.check_features(self.n_features)?;
        exec.try_map(data.n_records(), |r| {
            self.predict_record(data.row(r), data.row_mask(r), r as u64)
        })
    }

    /// Votes of every member on every record, member-major.
    pub fn member_predictions(&self, data: &Dataset, exec: Exec) -> Result<Vec<Vec<usize>>> {
        data.check_features(self.n_features)?;
        exec.try_map(self.len(), |m| {
            (0..data.n_records())
                .map(|r| self.member_vote(m, data.row(r), data.row_mask(r), r as u64))
                .collect()
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let model: EnsembleModel = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::Format(format!(
                "model format version {} is not supported (expected {MODEL_FORMAT_VERSION})",
                model.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
