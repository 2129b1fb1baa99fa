//! Data-generating audit instances, classifiers and population summaries.

mod classifier;
mod empirical;
mod logistic;
mod lower_bound;
mod mixture;
mod summary;

use std::fmt::Debug;

use crate::error::Result;
use crate::rng::RngStream;

pub use classifier::{
    builtin_classifier, Classifier, ClassifierKind, ClassifierSpec, ConstantClassifier,
    GroupLinearClassifier, RandomClassifier, SenseAttrClassifier,
};
pub use empirical::{EmpiricalAuditInstance, LabeledRow};
pub use logistic::{
    train_logistic, ColumnKind, EncodingSpec, LogisticConfig, LogisticModel, TrainingTrace,
};
pub use lower_bound::{make_lower_bound_pair, Hypothesis, LowerBoundClassifier, LowerBoundInstance};
pub use mixture::{
    generate_separated_mixture, separation_radius, LinearDesign, MixtureAuditInstance,
    MixtureConfig, MixtureSpecJson, SeparationSpace,
};
pub(crate) use summary::eod_from_rates;
pub use summary::{population_summary, JointTable, PopulationSummary, SummaryMode};

/// Group label; groups are numbered `0..n_groups`.
pub type Group = u32;

/// One individual `(x, a, y)` drawn from an instance.
#[derive(Debug, Clone, PartialEq)]
pub struct Draw {
    pub x: Vec<f64>,
    pub a: Group,
    pub y: u8,
}

/// A distribution over `(X, A, Y)`.
pub trait AuditInstance: Debug + Send + Sync {
    fn n_groups(&self) -> usize;
    fn feature_dim(&self) -> usize;
    fn draw(&self, rng: &mut RngStream) -> Draw;

    /// Exact joint table of `(f, y, a)` when available in closed form.
    fn exact_joint(&self, _classifier: &dyn Classifier) -> Option<Result<JointTable>> {
        None
    }
}
