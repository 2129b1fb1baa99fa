//! Plain logistic regression used as the audited classifier on tabular data.

use std::any::Any;

use rand::seq::index::sample;
use serde::{Deserialize, Serialize};

use super::{Classifier, ClassifierKind, Group, LabeledRow};
use crate::error::{domain, AuditError, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ColumnKind {
    Numeric,
    /// Values are level indices `0..levels`.
    Categorical { levels: usize },
}

/// Maps raw rows (numerics, categorical level indices, `NaN` for missing)
/// to the model's design vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncodingSpec {
    pub columns: Vec<ColumnKind>,
    pub n_groups: usize,
    pub include_sensitive: bool,
    /// Median (numeric) or mode (categorical) used for missing entries.
    pub impute: Vec<f64>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl EncodingSpec {
    pub fn fit(
        rows: &[LabeledRow],
        columns: &[ColumnKind],
        n_groups: usize,
        include_sensitive: bool,
    ) -> Result<Self> {
        if rows.is_empty() {
            return Err(AuditError::DegenerateData("no rows to fit".into()));
        }
        let p = columns.len();
        let mut impute = vec![0.0; p];
        let mut means = vec![0.0; p];
        let mut stds = vec![1.0; p];
        for (j, col) in columns.iter().enumerate() {
            let mut vals: Vec<f64> = rows.iter().map(|r| r.x[j]).filter(|v| !v.is_nan()).collect();
            if vals.is_empty() {
                continue;
            }
            match col {
                ColumnKind::Numeric => {
                    vals.sort_by(f64::total_cmp);
                    let n = vals.len();
                    impute[j] = if n % 2 == 1 {
                        vals[n / 2]
                    } else {
                        0.5 * (vals[n / 2 - 1] + vals[n / 2])
                    };
                    let m = vals.iter().sum::<f64>() / n as f64;
                    let var = vals.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n as f64;
                    means[j] = m;
                    stds[j] = if var > 0.0 { var.sqrt() } else { 1.0 };
                }
                ColumnKind::Categorical { levels } => {
                    let mut counts = vec![0usize; *levels];
                    for v in vals {
                        if let Some(c) = counts.get_mut(v as usize) {
                            *c += 1;
                        }
                    }
                    let mode = counts
                        .iter()
                        .enumerate()
                        .max_by(|x, y| x.1.cmp(y.1).then(y.0.cmp(&x.0)))
                        .map(|(i, _)| i)
                        .unwrap_or(0);
                    impute[j] = mode as f64;
                }
            }
        }
        Ok(Self {
            columns: columns.to_vec(),
            n_groups,
            include_sensitive,
            impute,
            means,
            stds,
        })
    }

    pub fn width(&self) -> usize {
        let base: usize = self
            .columns
            .iter()
            .map(|c| match c {
                ColumnKind::Numeric => 1,
                ColumnKind::Categorical { levels } => *levels,
            })
            .sum();
        base + if !self.include_sensitive {
            0
        } else if self.n_groups == 2 {
            1
        } else {
            self.n_groups
        }
    }

    pub fn encode(&self, x: &[f64], a: Group) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.width());
        for (j, col) in self.columns.iter().enumerate() {
            let v = if x[j].is_nan() { self.impute[j] } else { x[j] };
            match col {
                ColumnKind::Numeric => out.push((v - self.means[j]) / self.stds[j]),
                ColumnKind::Categorical { levels } => {
                    let start = out.len();
                    out.resize(start + levels, 0.0);
                    let k = v as usize;
                    if k < *levels {
                        out[start + k] = 1.0;
                    }
                }
            }
        }
        if self.include_sensitive {
            if self.n_groups == 2 {
                out.push(f64::from(a));
            } else {
                let start = out.len();
                out.resize(start + self.n_groups, 0.0);
                out[start + a as usize] = 1.0;
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticConfig {
    pub learning_rate: f64,
    pub iterations: usize,
    pub threshold: f64,
    /// Train on a uniform subsample of this many rows.
    pub subsample: Option<usize>,
    /// Use the sensitive attribute as a feature (`all_LR`) or not (`wo_A_LR`).
    pub include_sensitive: bool,
    /// Return an intercept-only model instead of failing on one-class data.
    pub allow_degenerate: bool,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.1,
            iterations: 2000,
            threshold: 0.5,
            subsample: None,
            include_sensitive: true,
            allow_degenerate: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub encoding: EncodingSpec,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub threshold: f64,
}

/// Mean log-loss after each gradient step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainingTrace {
    pub losses: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

impl LogisticModel {
    pub fn probability(&self, x: &[f64], a: Group) -> f64 {
        let phi = self.encoding.encode(x, a);
        sigmoid(crate::family::dot(&self.weights, &phi) + self.bias)
    }
}

impl Classifier for LogisticModel {
    fn predict(&self, x: &[f64], a: Group) -> bool {
        self.probability(x, a) >= self.threshold
    }

    fn kind(&self) -> ClassifierKind {
        if self.encoding.include_sensitive {
            ClassifierKind::AllLr
        } else {
            ClassifierKind::WoALr
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

/// Full-batch gradient descent on the mean log-loss, from zero weights.
pub fn train_logistic(
    rows: &[LabeledRow],
    columns: &[ColumnKind],
    n_groups: usize,
    cfg: &LogisticConfig,
    rng: &mut RngStream,
) -> Result<(LogisticModel, TrainingTrace)> {
    if !(cfg.learning_rate > 0.0) || !(0.0..=1.0).contains(&cfg.threshold) {
        return domain("learning rate must be positive and threshold in [0, 1]");
    }
    if rows.iter().any(|r| r.x.len() != columns.len()) {
        return domain("row width does not match the column schema");
    }
    let train: Vec<LabeledRow> = match cfg.subsample {
        Some(n) if n < rows.len() => sample(rng, rows.len(), n)
            .into_iter()
            .map(|i| rows[i].clone())
            .collect(),
        _ => rows.to_vec(),
    };
    let encoding = EncodingSpec::fit(&train, columns, n_groups, cfg.include_sensitive)?;
    let positives = train.iter().filter(|r| r.y == 1).count();
    if positives == 0 || positives == train.len() {
        if !cfg.allow_degenerate {
            return Err(AuditError::DegenerateData(format!(
                "training labels are all {}",
                u8::from(positives > 0)
            )));
        }
        let model = LogisticModel {
            weights: vec![0.0; encoding.width()],
            bias: if positives > 0 { 30.0 } else { -30.0 },
            threshold: cfg.threshold,
            encoding,
        };
        return Ok((model, TrainingTrace::default()));
    }

    let design: Vec<Vec<f64>> = train.iter().map(|r| encoding.encode(&r.x, r.a)).collect();
    let labels: Vec<f64> = train.iter().map(|r| f64::from(r.y)).collect();
    let n = design.len() as f64;
    let width = encoding.width();
    let mut w = vec![0.0; width];
    let mut b = 0.0;
    let mut trace = TrainingTrace::default();
    let mut grad = vec![0.0; width];
    for _ in 0..cfg.iterations {
        grad.iter_mut().for_each(|g| *g = 0.0);
        let mut gb = 0.0;
        for (phi, &y) in design.iter().zip(&labels) {
            let r = sigmoid(crate::family::dot(&w, phi) + b) - y;
            for (g, v) in grad.iter_mut().zip(phi) {
                *g += r * v;
            }
            gb += r;
        }
        for (wi, g) in w.iter_mut().zip(&grad) {
            *wi -= cfg.learning_rate * g / n;
        }
        b -= cfg.learning_rate * gb / n;
        let loss = design
            .iter()
            .zip(&labels)
            .map(|(phi, &y)| {
                let z = crate::family::dot(&w, phi) + b;
                softplus(z) - y * z
            })
            .sum::<f64>()
            / n;
        trace.losses.push(loss);
    }
    Ok((
        LogisticModel {
            encoding,
            weights: w,
            bias: b,
            threshold: cfg.threshold,
        },
        trace,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> Vec<LabeledRow> {
        (0..200)
            .map(|i| {
                let v = i as f64 / 10.0 - 10.0;
                LabeledRow {
                    x: vec![v, (i % 3) as f64],
                    a: (i % 2) as Group,
                    y: u8::from(v > 0.0),
                }
            })
            .collect()
    }

    const COLS: [ColumnKind; 2] = [ColumnKind::Numeric, ColumnKind::Categorical { levels: 3 }];

    #[test]
    fn loss_is_non_increasing_and_fits() {
        let rows = separable();
        let (m, trace) =
            train_logistic(&rows, &COLS, 2, &LogisticConfig::default(), &mut RngStream::new(1))
                .unwrap();
        for w in trace.losses.windows(2) {
            assert!(w[1] <= w[0] + 1e-12);
        }
        let acc = rows
            .iter()
            .filter(|r| m.predict(&r.x, r.a) == (r.y == 1))
            .count();
        assert!(acc >= 190);
    }

    #[test]
    fn one_class_data() {
        let rows: Vec<LabeledRow> = separable()
            .into_iter()
            .map(|mut r| {
                r.y = 1;
                r
            })
            .collect();
        let mut cfg = LogisticConfig::default();
        assert!(matches!(
            train_logistic(&rows, &COLS, 2, &cfg, &mut RngStream::new(1)),
            Err(AuditError::DegenerateData(_))
        ));
        cfg.allow_degenerate = true;
        let (m, _) = train_logistic(&rows, &COLS, 2, &cfg, &mut RngStream::new(1)).unwrap();
        assert!(rows.iter().all(|r| m.predict(&r.x, r.a)));
    }

    #[test]
    fn missing_values_are_imputed() {
        let mut rows = separable();
        rows[0].x[0] = f64::NAN;
        rows[1].x[1] = f64::NAN;
        let enc = EncodingSpec::fit(&rows, &COLS, 2, false).unwrap();
        let phi = enc.encode(&rows[1].x, 0);
        assert_eq!(phi.len(), 4);
        assert_eq!(phi[1..].iter().sum::<f64>(), 1.0);
        assert!(enc.encode(&rows[0].x, 0)[0].is_finite());
    }

    #[test]
    fn without_sensitive_attribute_ignores_group() {
        let rows = separable();
        let cfg = LogisticConfig {
            include_sensitive: false,
            ..Default::default()
        };
        let (m, _) = train_logistic(&rows, &COLS, 2, &cfg, &mut RngStream::new(1)).unwrap();
        assert_eq!(m.kind(), ClassifierKind::WoALr);
        for r in &rows {
            assert_eq!(m.probability(&r.x, 0), m.probability(&r.x, 1));
        }
    }
}
