use serde::{Deserialize, Serialize};

use super::{AuditInstance, Classifier, Group};
use crate::error::{AuditError, Result};
use crate::rng::RngStream;

/// Joint mass of `(f, y, a)`, stored as `mass[a][f][y]`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointTable {
    mass: Vec<[[f64; 2]; 2]>,
}

impl JointTable {
    pub fn zeros(n_groups: usize) -> Self {
        Self {
            mass: vec![[[0.0; 2]; 2]; n_groups],
        }
    }

    pub fn n_groups(&self) -> usize {
        self.mass.len()
    }

    pub fn add(&mut self, f: bool, y: u8, a: Group, weight: f64) {
        self.mass[a as usize][usize::from(f)][y as usize] += weight;
    }

    pub fn set(&mut self, f: bool, y: u8, a: Group, value: f64) {
        self.mass[a as usize][usize::from(f)][y as usize] = value;
    }

    pub fn get(&self, f: bool, y: u8, a: Group) -> f64 {
        self.mass[a as usize][usize::from(f)][y as usize]
    }

    pub fn total(&self) -> f64 {
        self.mass.iter().flatten().flatten().sum()
    }

    pub fn normalized(mut self) -> Self {
        let t = self.total();
        if t > 0.0 {
            for v in self.mass.iter_mut().flatten().flatten() {
                *v /= t;
            }
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SummaryMode {
    Exact,
    MonteCarlo { n: usize, seed: u64 },
    /// Exact when the instance supports it, Monte Carlo otherwise.
    Auto { n: usize, seed: u64 },
}

/// Population quantities of an instance/classifier pair. Per-cell vectors
/// are indexed `[a][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationSummary {
    pub group_probs: Vec<f64>,
    /// `P[f = 0]`.
    pub beta_neg_rate: f64,
    /// `P[f = 0 | A = a]`.
    pub beta_a: Vec<f64>,
    /// `P[f = 1, Y = y, A = a]`.
    pub p_joint: Vec<[f64; 2]>,
    /// `P[Y = y, A = a]`.
    pub q_joint: Vec<[f64; 2]>,
    /// `P[f = 1, Y = y | A = a]`.
    pub p_cond: Vec<[f64; 2]>,
    /// `P[Y = y | A = a]`.
    pub q_cond: Vec<[f64; 2]>,
    /// `P[f = 1 | Y = y, A = a]`.
    pub rates: Vec<[f64; 2]>,
    /// `P[f = i, Y = j]`, indexed `[i][j]`.
    pub gamma: [[f64; 2]; 2],
    pub q_min: f64,
    pub q_max: f64,
    pub eod: f64,
    pub exact: bool,
}

impl PopulationSummary {
    pub fn from_table(table: &JointTable, exact: bool) -> Result<Self> {
        let k = table.n_groups();
        if k < 2 {
            return Err(AuditError::IllPosed("need at least two groups".into()));
        }
        let table = table.clone().normalized();
        let mut s = Self {
            group_probs: vec![0.0; k],
            beta_neg_rate: 0.0,
            beta_a: vec![0.0; k],
            p_joint: vec![[0.0; 2]; k],
            q_joint: vec![[0.0; 2]; k],
            p_cond: vec![[0.0; 2]; k],
            q_cond: vec![[0.0; 2]; k],
            rates: vec![[0.0; 2]; k],
            gamma: [[0.0; 2]; 2],
            q_min: f64::INFINITY,
            q_max: 0.0,
            eod: 0.0,
            exact,
        };
        for a in 0..k {
            let g = a as Group;
            for y in 0..2u8 {
                let pos = table.get(true, y, g);
                let neg = table.get(false, y, g);
                s.p_joint[a][y as usize] = pos;
                s.q_joint[a][y as usize] = pos + neg;
                s.gamma[1][y as usize] += pos;
                s.gamma[0][y as usize] += neg;
                s.beta_a[a] += neg;
                s.group_probs[a] += pos + neg;
            }
            if s.group_probs[a] <= 0.0 {
                return Err(AuditError::IllPosed(format!("group {a} has zero mass")));
            }
            for y in 0..2 {
                let q = s.q_joint[a][y];
                if q <= 0.0 {
                    return Err(AuditError::IllPosed(format!(
                        "cell (y={y}, a={a}) has zero mass"
                    )));
                }
                s.p_cond[a][y] = s.p_joint[a][y] / s.group_probs[a];
                s.q_cond[a][y] = q / s.group_probs[a];
                s.rates[a][y] = s.p_joint[a][y] / q;
                s.q_min = s.q_min.min(s.q_cond[a][y]);
                s.q_max = s.q_max.max(s.q_cond[a][y]);
            }
            s.beta_neg_rate += s.beta_a[a];
            s.beta_a[a] /= s.group_probs[a];
        }
        s.eod = eod_from_rates(&s.rates);
        Ok(s)
    }
}

/// `max_y max_{a, a'} |r[a][y] − r[a'][y]|`.
pub(crate) fn eod_from_rates(rates: &[[f64; 2]]) -> f64 {
    let mut eod: f64 = 0.0;
    for y in 0..2 {
        let hi = rates.iter().map(|r| r[y]).fold(f64::NEG_INFINITY, f64::max);
        let lo = rates.iter().map(|r| r[y]).fold(f64::INFINITY, f64::min);
        eod = eod.max(hi - lo);
    }
    eod
}

pub fn population_summary(
    instance: &dyn AuditInstance,
    classifier: &dyn Classifier,
    mode: SummaryMode,
) -> Result<PopulationSummary> {
    let (n, seed) = match mode {
        SummaryMode::Exact => {
            let table = instance.exact_joint(classifier).ok_or_else(|| {
                AuditError::Domain("instance has no exact summary for this classifier".into())
            })??;
            return PopulationSummary::from_table(&table, true);
        }
        SummaryMode::Auto { n, seed } => {
            if let Some(table) = instance.exact_joint(classifier) {
                return PopulationSummary::from_table(&table?, true);
            }
            (n, seed)
        }
        SummaryMode::MonteCarlo { n, seed } => (n, seed),
    };
    if n == 0 {
        return Err(AuditError::Domain("Monte Carlo summary needs n > 0".into()));
    }
    let mut rng = RngStream::new(seed);
    let mut table = JointTable::zeros(instance.n_groups());
    for _ in 0..n {
        let d = instance.draw(&mut rng);
        table.add(classifier.predict(&d.x, d.a), d.y, d.a, 1.0);
    }
    PopulationSummary::from_table(&table, false)
}
