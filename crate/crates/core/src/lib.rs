//! Ensemble classification over incomplete numeric data.
//!
//! The crate builds twelve imputation/classification methods on top of a
//! gain-ratio decision tree that tolerates missing attribute values:
//!
//! * single-classifier methods (no imputation, mean imputation, averaged
//!   Gaussian-random imputation, averaged EM imputation),
//! * bagging followed by single or averaged imputation,
//! * bagging followed by multiple imputation,
//! * multiple-imputation ensembles without resampling.
//!
//! Around the methods sit an MCAR missingness injector, a repeated
//! cross-validation grid runner, kappa-error diversity statistics and the
//! Friedman rank sum test.
//!
//! All randomness is driven by explicit [`Seed`]s so every grid cell is
//! reproducible regardless of how work is scheduled across threads.

// NaN-rejecting checks are written as negated comparisons; index loops over
// parallel arrays read better than zipped iterators.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod data;
pub mod ensemble;
pub mod error;
pub mod eval;
pub mod exec;
pub mod impute;
pub mod missing;
pub mod rng;
pub mod tree;

pub use data::{AttributeStats, Dataset, DatasetMeta, FoldSplit, LabelColumn, Scaling};
pub use ensemble::{EnsembleConfig, EnsembleModel, Family, MethodId, TestImputation};
pub use error::{Error, Result};
pub use exec::Exec;
pub use impute::{EmConfig, FittedImputer, GaussianModel, ImputeConfig, ImputerKind};
pub use missing::MissingnessSpec;
pub use rng::Seed;
pub use tree::{DecisionTree, TreeConfig, TreeNode};
