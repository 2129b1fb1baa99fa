//! Experiment configuration, read from JSON.

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use audit_core::family::SmoothnessConstants;
use audit_core::instance::{ClassifierKind, SeparationSpace};
use serde::{Deserialize, Serialize};

use crate::error::{config_err, HarnessError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Blackbox,
    Mixture,
    #[serde(alias = "lower_bound")]
    LowerBoundCheck,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

/// `(c_feat, c_lab)`.
pub type CostPair = (f64, f64);

/// Tabular instance with a logistic ground truth, used when no dataset is
/// supplied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticSpec {
    pub n_rows: usize,
    pub p_group1: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            n_rows: 5000,
            p_group1: 0.7,
            seed: 0,
        }
    }
}

/// Separated Gaussian mixture regenerated for every run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MixtureSpec {
    pub dim: usize,
    pub sigma2: f64,
    pub group_probs: Vec<f64>,
    /// `P[Y = 1 | A = a]`.
    pub label_probs: Vec<f64>,
    pub separation: SeparationSpace,
    pub constants: SmoothnessConstants,
    /// Sweep points with `ε` above this audit a fair classifier.
    pub fair_above: f64,
    /// EOD of the classifier audited at the remaining sweep points.
    pub unfair_eod: f64,
    pub design_offset: f64,
    pub algorithms: Vec<String>,
}

impl Default for MixtureSpec {
    fn default() -> Self {
        Self {
            dim: 5,
            sigma2: 4.0,
            group_probs: vec![0.3, 0.7],
            label_probs: vec![0.4, 0.7],
            separation: SeparationSpace::Mean,
            constants: SmoothnessConstants::default(),
            fair_above: 0.3,
            unfair_eod: 0.2,
            design_offset: 0.5,
            algorithms: vec!["rs_audit".into(), "exp_audit".into()],
        }
    }
}

/// FAIR/UNFAIR lower-bound pairs, one per `(ε, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LowerBoundSpec {
    pub triples: Vec<[f64; 3]>,
    pub p_group1: f64,
}

impl Default for LowerBoundSpec {
    fn default() -> Self {
        Self {
            triples: vec![[0.2, 0.3, 0.3], [0.1, 0.3, 0.3], [0.05, 0.3, 0.3]],
            p_group1: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InstanceSpec {
    Adult { path: PathBuf },
    Law { path: PathBuf },
    /// A dataset written by `audit-lab ingest`.
    Dataset { path: PathBuf },
    Synthetic(SyntheticSpec),
    Mixture(MixtureSpec),
    LowerBound(LowerBoundSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierConfig {
    pub kind: ClassifierKind,
    /// Training subsample; defaults to 100 for Adult, 5000 for Law and the
    /// whole table otherwise.
    pub subsample: Option<usize>,
    pub seed: u64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub threshold: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            kind: ClassifierKind::AllLr,
            subsample: None,
            seed: 0,
            iterations: 2000,
            learning_rate: 0.1,
            threshold: 0.5,
        }
    }
}

fn default_taus() -> Vec<usize> {
    vec![5, 10, 50, 100, 200, 500, 1000]
}

fn default_eps_sweep() -> Vec<f64> {
    vec![0.8, 0.5, 0.25, 0.1, 0.05, 0.01, 0.001]
}

fn default_cost_pairs() -> Vec<CostPair> {
    vec![(0.0, 1.0), (0.5, 0.25), (0.5, 0.5), (0.5, 1.0), (0.5, 3.0)]
}

fn default_seeds() -> Vec<u64> {
    vec![1092, 42, 13, 729, 333]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub mode: Mode,
    #[serde(default)]
    pub instance: Option<InstanceSpec>,
    #[serde(default)]
    pub classifier: ClassifierConfig,
    /// Verdict threshold for the blackbox sweep.
    #[serde(default = "default_eps")]
    pub eps: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_taus")]
    pub tau_sweep: Vec<usize>,
    #[serde(default = "default_eps_sweep")]
    pub eps_sweep: Vec<f64>,
    #[serde(default = "default_cost_pairs")]
    pub cost_pairs: Vec<CostPair>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub seed_offset: u64,
    /// Absent: the mode's default. `null` lifts the cap.
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub tau_cap: Option<Option<usize>>,
    #[serde(default, deserialize_with = "present", skip_serializing_if = "Option::is_none")]
    pub r_cap: Option<Option<u64>>,
    #[serde(default = "default_past_db_size")]
    pub past_db_size: usize,
    /// Online draws per run; defaults to 1e7, or 1e8 for the lower-bound check.
    #[serde(default)]
    pub draw_cap: Option<u64>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    #[serde(default)]
    pub format: OutputFormat,
}

fn default_eps() -> f64 {
    0.1
}

fn default_delta() -> f64 {
    0.01
}

/// Marks a field as present, so `null` reads as `Some(None)`.
fn present<'de, D, T>(d: D) -> std::result::Result<Option<Option<T>>, D::Error>
where
    D: serde::Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

fn default_past_db_size() -> usize {
    200_000
}

impl ExperimentConfig {
    /// Defaults for `mode`, as if read from `{"mode": ...}`.
    pub fn new(mode: Mode) -> Self {
        let v = serde_json::json!({ "mode": mode });
        serde_json::from_value(v).expect("defaults deserialize")
    }

    /// Parses and validates; relative paths resolve against `base`.
    pub fn from_json(text: &str, base: Option<&Path>) -> Result<Self> {
        let mut cfg: Self =
            serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        if let Some(base) = base {
            cfg.resolve_paths(base);
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text, path.parent())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.instance {
            Some(InstanceSpec::Adult { path })
            | Some(InstanceSpec::Law { path })
            | Some(InstanceSpec::Dataset { path }) => fix(path),
            _ => {}
        }
        if let Some(p) = &mut self.output {
            fix(p);
        }
    }

    /// The instance spec, falling back to the mode's default.
    pub fn instance_spec(&self) -> InstanceSpec {
        match (&self.instance, self.mode) {
            (Some(spec), _) => spec.clone(),
            (None, Mode::Blackbox) => InstanceSpec::Synthetic(SyntheticSpec::default()),
            (None, Mode::Mixture) => InstanceSpec::Mixture(MixtureSpec::default()),
            (None, Mode::LowerBoundCheck) => InstanceSpec::LowerBound(LowerBoundSpec::default()),
        }
    }

    /// Cap on τ: 1000 by default, none for the lower-bound check whose
    /// label counts must scale with ε.
    pub fn tau_cap(&self) -> Option<usize> {
        self.tau_cap.unwrap_or(match self.mode {
            Mode::LowerBoundCheck => None,
            _ => Some(1000),
        })
    }

    pub fn r_cap(&self) -> Option<u64> {
        self.r_cap.unwrap_or(Some(20_000))
    }

    pub fn draw_cap(&self) -> u64 {
        self.draw_cap.unwrap_or(match self.mode {
            Mode::LowerBoundCheck => 100_000_000,
            _ => 10_000_000,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return config_err("seeds must be nonempty");
        }
        let distinct: HashSet<_> = self.seeds.iter().collect();
        if distinct.len() != self.seeds.len() {
            return config_err("seeds must be distinct");
        }
        if self.cost_pairs.is_empty() {
            return config_err("cost_pairs must be nonempty");
        }
        if self
            .cost_pairs
            .iter()
            .any(|&(f, l)| !(f >= 0.0 && f.is_finite() && l >= 0.0 && l.is_finite()))
        {
            return config_err("costs must be finite and non-negative");
        }
        if !(self.eps > 0.0 && self.eps < 1.0) || !(self.delta > 0.0 && self.delta < 1.0) {
            return config_err("eps and delta must lie in (0, 1)");
        }
        if self.tau_cap() == Some(0) || self.r_cap() == Some(0) || self.draw_cap == Some(0) {
            return config_err("caps must be positive");
        }
        let spec = self.instance_spec();
        match self.mode {
            Mode::Blackbox => {
                if self.tau_sweep.is_empty() || self.tau_sweep.contains(&0) {
                    return config_err("tau_sweep must be nonempty and positive");
                }
                if !matches!(
                    spec,
                    InstanceSpec::Adult { .. }
                        | InstanceSpec::Law { .. }
                        | InstanceSpec::Dataset { .. }
                        | InstanceSpec::Synthetic(_)
                ) {
                    return config_err("blackbox mode needs a tabular instance");
                }
                if let InstanceSpec::Synthetic(s) = &spec {
                    if s.n_rows < 10 || !(s.p_group1 > 0.0 && s.p_group1 < 1.0) {
                        return config_err("synthetic instance needs >= 10 rows and p_group1 in (0, 1)");
                    }
                }
                if matches!(self.classifier.kind, ClassifierKind::Custom) {
                    return config_err("classifier kind must be all_LR, wo_A_LR, random or sense_attr");
                }
            }
            Mode::Mixture => {
                if self.eps_sweep.is_empty() || self.eps_sweep.iter().any(|e| !(*e > 0.0 && *e < 1.0)) {
                    return config_err("eps_sweep must be nonempty with values in (0, 1)");
                }
                let InstanceSpec::Mixture(m) = &spec else {
                    return config_err("mixture mode needs a mixture instance");
                };
                if m.group_probs.len() != m.label_probs.len() || m.group_probs.len() < 2 {
                    return config_err("mixture needs matching group_probs and label_probs for >= 2 groups");
                }
                if m.algorithms.is_empty()
                    || m.algorithms.iter().any(|a| a != "rs_audit" && a != "exp_audit")
                {
                    return config_err("mixture algorithms must be drawn from rs_audit, exp_audit");
                }
                if !(m.unfair_eod > 0.0 && m.unfair_eod < 1.0) {
                    return config_err("unfair_eod must lie in (0, 1)");
                }
            }
            Mode::LowerBoundCheck => {
                let InstanceSpec::LowerBound(lb) = &spec else {
                    return config_err("lower-bound mode needs a lower_bound instance");
                };
                if lb.triples.is_empty() {
                    return config_err("lower_bound triples must be nonempty");
                }
            }
        }
        Ok(())
    }
}
