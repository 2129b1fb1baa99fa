use serde::{Deserialize, Serialize};

use super::{AuditInstance, Classifier, Draw, Group, JointTable};
use crate::error::{domain, Result};
use crate::rng::RngStream;

/// One encoded data row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledRow {
    pub x: Vec<f64>,
    pub a: Group,
    pub y: u8,
}

/// Uniform distribution over a finite table of rows.
#[derive(Debug, Clone)]
pub struct EmpiricalAuditInstance {
    rows: Vec<LabeledRow>,
    n_groups: usize,
    dim: usize,
}

impl EmpiricalAuditInstance {
    pub fn new(rows: Vec<LabeledRow>, n_groups: usize) -> Result<Self> {
        if rows.is_empty() {
            return domain("empirical instance needs at least one row");
        }
        let dim = rows[0].x.len();
        for (i, r) in rows.iter().enumerate() {
            if r.x.len() != dim {
                return domain(format!("row {i} has {} features, expected {dim}", r.x.len()));
            }
            if r.a as usize >= n_groups || r.y > 1 {
                return domain(format!("row {i} has group {} / label {}", r.a, r.y));
            }
        }
        Ok(Self {
            rows,
            n_groups,
            dim,
        })
    }

    pub fn rows(&self) -> &[LabeledRow] {
        &self.rows
    }
}

impl AuditInstance for EmpiricalAuditInstance {
    fn n_groups(&self) -> usize {
        self.n_groups
    }

    fn feature_dim(&self) -> usize {
        self.dim
    }

    fn draw(&self, rng: &mut RngStream) -> Draw {
        let r = &self.rows[rng.index(self.rows.len())];
        Draw {
            x: r.x.clone(),
            a: r.a,
            y: r.y,
        }
    }

    fn exact_joint(&self, classifier: &dyn Classifier) -> Option<Result<JointTable>> {
        let mut t = JointTable::zeros(self.n_groups);
        for r in &self.rows {
            t.add(classifier.predict(&r.x, r.a), r.y, r.a, 1.0);
        }
        Some(Ok(t.normalized()))
    }
}
