//! Tabular datasets: CSV ingestion for Adult and Law School, a synthetic
//! stand-in, and classifier training on top of them.

use std::collections::{BTreeSet, HashMap};
use std::io::Read;
use std::path::Path;

use audit_core::instance::{
    train_logistic, Classifier, ClassifierKind, ColumnKind, EmpiricalAuditInstance, LabeledRow,
    LogisticConfig, RandomClassifier, SenseAttrClassifier,
};
use audit_core::RngStream;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::config::{ClassifierConfig, SyntheticSpec};
use crate::error::{HarnessError, Result};

/// Rows with binary group `a` and label `y`; missing feature values are
/// `NaN` and get imputed by the classifier's encoding.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub feature_names: Vec<String>,
    pub columns: Vec<ColumnKind>,
    /// Level names of categorical columns, empty for numeric ones.
    pub levels: Vec<Vec<String>>,
    pub rows: Vec<LabeledRow>,
}

#[derive(Serialize, Deserialize)]
struct DatasetFile {
    name: String,
    feature_names: Vec<String>,
    columns: Vec<ColumnKind>,
    levels: Vec<Vec<String>>,
    /// `x` with `null` for missing values.
    rows: Vec<(Vec<Option<f64>>, u32, u8)>,
}

impl Dataset {
    pub fn to_json(&self) -> Result<String> {
        let file = DatasetFile {
            name: self.name.clone(),
            feature_names: self.feature_names.clone(),
            columns: self.columns.clone(),
            levels: self.levels.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| {
                    let x = r.x.iter().map(|v| (!v.is_nan()).then_some(*v)).collect();
                    (x, r.a, r.y)
                })
                .collect(),
        };
        Ok(serde_json::to_string(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: DatasetFile = serde_json::from_str(text)?;
        let width = file.columns.len();
        if file.feature_names.len() != width || file.levels.len() != width {
            return Err(HarnessError::Format("dataset column metadata disagree".into()));
        }
        let mut rows = Vec::with_capacity(file.rows.len());
        for (i, (x, a, y)) in file.rows.into_iter().enumerate() {
            if x.len() != width || a > 1 || y > 1 {
                return Err(HarnessError::Format(format!("dataset row {i} is malformed")));
            }
            let x = x.into_iter().map(|v| v.unwrap_or(f64::NAN)).collect();
            rows.push(LabeledRow { x, a, y });
        }
        Ok(Self {
            name: file.name,
            feature_names: file.feature_names,
            columns: file.columns,
            levels: file.levels,
            rows,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json()?)?)
    }

    pub fn instance(&self) -> Result<EmpiricalAuditInstance> {
        Ok(EmpiricalAuditInstance::new(self.rows.clone(), 2)?)
    }

    /// Training subsample size used in the paper's tabular experiments.
    pub fn default_subsample(&self) -> Option<usize> {
        match self.name.as_str() {
            "adult" => Some(100),
            "law" => Some(5000),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Role {
    Numeric { range: Option<(f64, f64)> },
    Categorical,
    Sensitive(fn(&str) -> Option<u32>),
    Label(fn(&str) -> Option<u8>),
}

struct Field {
    name: &'static str,
    aliases: &'static [&'static str],
    role: Role,
}

const fn num(name: &'static str) -> Field {
    Field {
        name,
        aliases: &[],
        role: Role::Numeric { range: None },
    }
}

const fn cat(name: &'static str) -> Field {
    Field {
        name,
        aliases: &[],
        role: Role::Categorical,
    }
}

fn adult_gender(s: &str) -> Option<u32> {
    match s.to_ascii_lowercase().as_str() {
        "male" => Some(1),
        "female" => Some(0),
        _ => None,
    }
}

fn adult_income(s: &str) -> Option<u8> {
    match s.trim_end_matches('.') {
        ">50K" => Some(1),
        "<=50K" | "≤50K" => Some(0),
        _ => None,
    }
}

fn binary_flag(s: &str) -> Option<u8> {
    match s.parse::<f64>().ok()? {
        v if v == 1.0 => Some(1),
        v if v == 0.0 => Some(0),
        _ => None,
    }
}

fn law_male(s: &str) -> Option<u32> {
    binary_flag(s).map(u32::from)
}

const ADULT: &[Field] = &[
    num("age"),
    cat("workclass"),
    num("fnlwgt"),
    cat("education"),
    Field {
        name: "educational-num",
        aliases: &["education-num"],
        role: Role::Numeric { range: None },
    },
    cat("marital-status"),
    cat("occupation"),
    cat("relationship"),
    cat("race"),
    Field {
        name: "gender",
        aliases: &["sex"],
        role: Role::Sensitive(adult_gender),
    },
    num("capital-gain"),
    num("capital-loss"),
    num("hours-per-week"),
    cat("native-country"),
    Field {
        name: "income",
        aliases: &[],
        role: Role::Label(adult_income),
    },
];

const LAW: &[Field] = &[
    num("decile1b"),
    num("decile3"),
    Field {
        name: "lsat",
        aliases: &[],
        role: Role::Numeric {
            range: Some((11.0, 48.0)),
        },
    },
    num("ugpa"),
    num("zfygpa"),
    num("zgpa"),
    cat("fulltime"),
    cat("fam inc"),
    Field {
        name: "male",
        aliases: &[],
        role: Role::Sensitive(law_male),
    },
    cat("tier"),
    cat("racetxt"),
    Field {
        name: "pass bar",
        aliases: &[],
        role: Role::Label(binary_flag),
    },
];

/// Header names compare case-insensitively with `-`, `_` and spaces equal.
fn normalize(name: &str) -> String {
    name.trim()
        .to_ascii_lowercase()
        .chars()
        .map(|c| if c == '-' || c == ' ' { '_' } else { c })
        .collect()
}

fn is_missing(s: &str) -> bool {
    matches!(s, "" | "?" | "NA" | "NaN" | "nan")
}

fn ingest<R: Read>(reader: R, name: &str, schema: &[Field]) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();

    let mut wanted: HashMap<String, usize> = HashMap::new();
    for (i, f) in schema.iter().enumerate() {
        wanted.insert(normalize(f.name), i);
        for a in f.aliases {
            wanted.insert(normalize(a), i);
        }
    }
    let mut position = vec![None; schema.len()];
    let mut extra = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        // An unnamed leading column is a saved index, not data.
        if h.is_empty() || (j == 0 && normalize(h).starts_with("unnamed")) {
            continue;
        }
        match wanted.get(&normalize(h)) {
            Some(&i) if position[i].is_none() => position[i] = Some(j),
            _ => extra.push(h.to_string()),
        }
    }
    let missing: Vec<String> = schema
        .iter()
        .zip(&position)
        .filter(|(_, p)| p.is_none())
        .map(|(f, _)| f.name.to_string())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(HarnessError::Schema { missing, extra });
    }
    let position: Vec<usize> = position.into_iter().map(Option::unwrap).collect();

    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line());
        records.push((line, rec));
    }

    let features: Vec<usize> = schema
        .iter()
        .enumerate()
        .filter(|(_, f)| matches!(f.role, Role::Numeric { .. } | Role::Categorical))
        .map(|(i, _)| i)
        .collect();
    let mut levels: Vec<Vec<String>> = Vec::with_capacity(features.len());
    for &i in &features {
        if let Role::Categorical = schema[i].role {
            let set: BTreeSet<&str> = records
                .iter()
                .map(|(_, r)| &r[position[i]])
                .filter(|s| !is_missing(s))
                .collect();
            levels.push(set.into_iter().map(str::to_string).collect());
        } else {
            levels.push(Vec::new());
        }
    }

    let mut rows = Vec::with_capacity(records.len());
    for (line, rec) in &records {
        let row_err = |message: String| HarnessError::Row {
            line: *line,
            message,
        };
        let mut x = Vec::with_capacity(features.len());
        for (k, &i) in features.iter().enumerate() {
            let raw = &rec[position[i]];
            let field = &schema[i];
            if is_missing(raw) {
                x.push(f64::NAN);
                continue;
            }
            let v = match field.role {
                Role::Numeric { range } => {
                    let v: f64 = raw
                        .parse()
                        .map_err(|_| row_err(format!("{}: cannot parse {raw:?} as a number", field.name)))?;
                    if let Some((lo, hi)) = range {
                        if !(lo..=hi).contains(&v) {
                            return Err(row_err(format!(
                                "{}: {v} outside [{lo}, {hi}]",
                                field.name
                            )));
                        }
                    }
                    v
                }
                _ => levels[k].iter().position(|l| l == raw).expect("level collected") as f64,
            };
            x.push(v);
        }
        let (mut a, mut y) = (None, None);
        for (i, field) in schema.iter().enumerate() {
            let raw = &rec[position[i]];
            match field.role {
                Role::Sensitive(parse) => {
                    a = Some(parse(raw).ok_or_else(|| {
                        row_err(format!("{}: unrecognised value {raw:?}", field.name))
                    })?)
                }
                Role::Label(parse) => {
                    y = Some(parse(raw).ok_or_else(|| {
                        row_err(format!("{}: unrecognised value {raw:?}", field.name))
                    })?)
                }
                _ => {}
            }
        }
        rows.push(LabeledRow {
            x,
            a: a.expect("schema has a sensitive column"),
            y: y.expect("schema has a label column"),
        });
    }
    if rows.is_empty() {
        return Err(HarnessError::Format(format!("{name}: no data rows")));
    }
    Ok(Dataset {
        name: name.to_string(),
        feature_names: features.iter().map(|&i| schema[i].name.to_string()).collect(),
        columns: features
            .iter()
            .zip(&levels)
            .map(|(&i, l)| match schema[i].role {
                Role::Categorical => ColumnKind::Categorical { levels: l.len().max(1) },
                _ => ColumnKind::Numeric,
            })
            .collect(),
        levels,
        rows,
    })
}

/// Adult Income: `A` = gender (Male = 1), `Y` = income `>50K`.
pub fn ingest_adult<R: Read>(reader: R) -> Result<Dataset> {
    ingest(reader, "adult", ADULT)
}

/// Law School: `A` = male, `Y` = passed the bar on the first try.
pub fn ingest_law<R: Read>(reader: R) -> Result<Dataset> {
    ingest(reader, "law", LAW)
}

pub fn ingest_path(dataset: &str, path: &Path) -> Result<Dataset> {
    let file = std::fs::File::open(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    match dataset {
        "adult" => ingest_adult(file),
        "law" => ingest_law(file),
        other => Err(HarnessError::Config(format!("unknown dataset {other:?}"))),
    }
}

/// Three numeric columns and one four-level categorical column; the label
/// follows a logistic model that also depends on the group.
pub fn synthetic_tabular(spec: &SyntheticSpec) -> Result<Dataset> {
    let mut rng = RngStream::new(spec.seed);
    let mut rows = Vec::with_capacity(spec.n_rows);
    for _ in 0..spec.n_rows {
        let a = u32::from(rng.bernoulli(spec.p_group1));
        let z: [f64; 2] = [StandardNormal.sample(&mut rng), StandardNormal.sample(&mut rng)];
        let x0 = z[0] + 0.5 * f64::from(a);
        let x1 = z[1];
        let x2 = 10.0 * rng.uniform();
        let c = rng.index(4) as f64;
        let logit = -0.5 + 1.2 * x0 - 0.8 * x1 + 0.15 * (x2 - 5.0) + 0.4 * f64::from(c == 1.0)
            - 0.3 * f64::from(c == 3.0)
            + 0.6 * f64::from(a);
        let y = u8::from(rng.bernoulli(1.0 / (1.0 + (-logit).exp())));
        rows.push(LabeledRow {
            x: vec![x0, x1, x2, c],
            a,
            y,
        });
    }
    Ok(Dataset {
        name: "synthetic".into(),
        feature_names: vec!["x0".into(), "x1".into(), "x2".into(), "c".into()],
        columns: vec![
            ColumnKind::Numeric,
            ColumnKind::Numeric,
            ColumnKind::Numeric,
            ColumnKind::Categorical { levels: 4 },
        ],
        levels: vec![
            Vec::new(),
            Vec::new(),
            Vec::new(),
            (0..4).map(|i| format!("c{i}")).collect(),
        ],
        rows,
    })
}

/// The audited classifier for a tabular dataset.
pub fn build_classifier(ds: &Dataset, cfg: &ClassifierConfig) -> Result<Box<dyn Classifier>> {
    match cfg.kind {
        ClassifierKind::AllLr | ClassifierKind::WoALr => {
            let lr = LogisticConfig {
                learning_rate: cfg.learning_rate,
                iterations: cfg.iterations,
                threshold: cfg.threshold,
                subsample: cfg.subsample.or_else(|| ds.default_subsample()),
                include_sensitive: cfg.kind == ClassifierKind::AllLr,
                allow_degenerate: false,
            };
            let mut rng = RngStream::new(cfg.seed);
            let (model, _) = train_logistic(&ds.rows, &ds.columns, 2, &lr, &mut rng)?;
            Ok(Box::new(model))
        }
        ClassifierKind::Random => Ok(Box::new(RandomClassifier { seed: cfg.seed })),
        ClassifierKind::SenseAttr => Ok(Box::new(SenseAttrClassifier)),
        ClassifierKind::Custom => Err(HarnessError::Config(
            "custom classifiers are not trainable".into(),
        )),
    }
}
