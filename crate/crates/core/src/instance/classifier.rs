use std::any::Any;
use std::fmt::Debug;

use serde::{Deserialize, Serialize};

use super::logistic::LogisticModel;
use super::lower_bound::LowerBoundClassifier;
use super::Group;
use crate::error::{domain, Result};
use crate::rng::mix64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassifierKind {
    #[serde(rename = "all_LR", alias = "all_lr")]
    AllLr,
    #[serde(rename = "wo_A_LR", alias = "wo_a_lr")]
    WoALr,
    Random,
    SenseAttr,
    Custom,
}

/// A decision rule `f(x, a) ∈ {0, 1}`.
pub trait Classifier: Debug + Send + Sync {
    fn predict(&self, x: &[f64], a: Group) -> bool;
    fn kind(&self) -> ClassifierKind;
    fn as_any(&self) -> &dyn Any;
}

/// `f ≡ value`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConstantClassifier {
    pub value: bool,
}

impl Classifier for ConstantClassifier {
    fn predict(&self, _x: &[f64], _a: Group) -> bool {
        self.value
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Custom
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// `f(x, a) = a` for binary groups.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SenseAttrClassifier;

impl Classifier for SenseAttrClassifier {
    fn predict(&self, _x: &[f64], a: Group) -> bool {
        a == 1
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::SenseAttr
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Ber(1/2) per row identity: the decision is a hash of `(x, a, seed)`, so
/// repeated queries of the same row agree.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomClassifier {
    pub seed: u64,
}

impl Classifier for RandomClassifier {
    fn predict(&self, x: &[f64], a: Group) -> bool {
        let mut h = mix64(self.seed ^ 0xA5A5_5A5A_0F0F_F0F0);
        h = mix64(h ^ u64::from(a));
        for v in x {
            h = mix64(h ^ v.to_bits());
        }
        h >> 63 == 1
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Random
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Per-group halfspace `f(x, a) = 1 ⟺ w_a·x + b_a ≥ 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLinearClassifier {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<f64>,
}

impl GroupLinearClassifier {
    pub fn new(weights: Vec<Vec<f64>>, biases: Vec<f64>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return domain("need one weight vector and one bias per group");
        }
        let d = weights[0].len();
        if weights.iter().any(|w| w.len() != d) {
            return domain("weight vectors must share a dimension");
        }
        Ok(Self { weights, biases })
    }

    pub fn score(&self, x: &[f64], a: Group) -> f64 {
        let a = a as usize;
        crate::family::dot(&self.weights[a], x) + self.biases[a]
    }
}

impl Classifier for GroupLinearClassifier {
    fn predict(&self, x: &[f64], a: Group) -> bool {
        self.score(x, a) >= 0.0
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Custom
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

pub fn builtin_classifier(kind: ClassifierKind, seed: u64) -> Result<Box<dyn Classifier>> {
    match kind {
        ClassifierKind::Random => Ok(Box::new(RandomClassifier { seed })),
        ClassifierKind::SenseAttr => Ok(Box::new(SenseAttrClassifier)),
        other => domain(format!("{other:?} is not a builtin classifier")),
    }
}

/// Serializable description of any classifier the library can rebuild.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassifierSpec {
    Constant { value: bool },
    SenseAttr,
    Random { seed: u64 },
    GroupLinear(GroupLinearClassifier),
    Logistic(LogisticModel),
    LowerBound(LowerBoundClassifier),
}

impl ClassifierSpec {
    pub fn build(self) -> Box<dyn Classifier> {
        match self {
            ClassifierSpec::Constant { value } => Box::new(ConstantClassifier { value }),
            ClassifierSpec::SenseAttr => Box::new(SenseAttrClassifier),
            ClassifierSpec::Random { seed } => Box::new(RandomClassifier { seed }),
            ClassifierSpec::GroupLinear(c) => Box::new(c),
            ClassifierSpec::Logistic(m) => Box::new(m),
            ClassifierSpec::LowerBound(c) => Box::new(c),
        }
    }
}
