//! Parameter sweeps. Every `(sweep point, seed)` cell runs independently
//! on its own derived streams; results are reduced in a fixed order so the
//! output does not depend on scheduling.

use audit_core::blackbox::{baseline_audit, rs_audit, AuditReport, BlackboxParams, Verdict};
use audit_core::env::{
    PartialFeedbackEnv, PastDatabase, PastSource, ReplayedPastDatabase, ShuffledPastDatabase,
};
use audit_core::instance::{
    generate_separated_mixture, population_summary, AuditInstance, Classifier, LinearDesign,
    MixtureConfig, PopulationSummary, SummaryMode,
};
use audit_core::mixture::{exp_audit, ExpAuditParams};
use audit_core::rng::mix64;
use audit_core::{AuditError, RngStream};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, InstanceSpec, MixtureSpec, Mode};
use crate::dataset::{build_classifier, ingest_path, synthetic_tabular, Dataset};
use crate::error::{config_err, Result};
use crate::results::{aggregate, ResultRow, RowKey, RunOutcome};

// Stream labels for derived seeds.
const PAST: u64 = 1;
const ONLINE: u64 = 2;
const INSTANCE: u64 = 3;
const SGD: u64 = 4;

/// Seed of a sub-task, depending only on the run seed and the labels.
pub fn derive_seed(seed: u64, labels: &[u64]) -> u64 {
    labels
        .iter()
        .fold(mix64(seed), |h, l| mix64(h ^ mix64(l.wrapping_add(0x5EED))))
}

/// What a correct audit says about an instance with EOD `delta` at
/// tolerance `eps`; `None` when `0 < Δ ≤ ε` and either verdict is allowed.
pub fn ground_truth(delta: f64, eps: f64) -> Option<Verdict> {
    if delta <= 1e-12 {
        Some(Verdict::Fair)
    } else if delta > eps {
        Some(Verdict::Unfair)
    } else {
        None
    }
}

/// Outcome of one algorithm in one cell; `None` when the draw cap ended it.
#[derive(Debug, Clone)]
struct Cell {
    reports: Vec<Option<AuditReport>>,
    true_eod: f64,
    truth: Option<Verdict>,
}

fn truncated_ok(r: std::result::Result<AuditReport, AuditError>) -> Result<Option<AuditReport>> {
    match r {
        Ok(rep) => Ok(Some(rep)),
        Err(AuditError::DrawBudgetExhausted(cap)) => {
            log::warn!("run stopped at the draw cap of {cap}; excluded from aggregates");
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Reduces cells, laid out `[sweep_index][seed_index]`, into rows ordered
/// by algorithm, sweep value and cost pair.
fn reduce(
    cfg: &ExperimentConfig,
    algorithms: &[&str],
    sweep_values: &[f64],
    cells: &[Vec<Cell>],
) -> Vec<ResultRow> {
    let mut rows = Vec::new();
    for (ai, alg) in algorithms.iter().enumerate() {
        for (si, &value) in sweep_values.iter().enumerate() {
            let point = &cells[si];
            let true_eod = point.iter().map(|c| c.true_eod).sum::<f64>() / point.len() as f64;
            let premise_violated = point.iter().any(|c| c.truth.is_none());
            let truncated_run = point.iter().any(|c| c.reports[ai].is_none());
            if premise_violated {
                log::info!("{alg} at {value}: 0 < EOD <= eps, row annotated and not scored");
            }
            for &(c_feat, c_lab) in &cfg.cost_pairs {
                let runs: Vec<RunOutcome> = point
                    .iter()
                    .filter_map(|c| {
                        let rep = c.reports[ai].as_ref()?;
                        Some(RunOutcome {
                            cost: rep.price(c_feat, c_lab),
                            label_cost: c_lab * rep.defaults as f64,
                            labels: rep.labels_requested as f64,
                            samples: rep.samples_drawn as f64,
                            delta_hat: rep.delta_hat,
                            correct: c.truth == Some(rep.verdict),
                            capped: rep.capped,
                        })
                    })
                    .collect();
                rows.push(aggregate(
                    RowKey {
                        algorithm: alg,
                        sweep_value: value,
                        cost_pair: (c_feat, c_lab),
                        true_eod,
                        premise_violated,
                        truncated_run,
                    },
                    &runs,
                ));
            }
        }
    }
    rows
}

/// Loads the tabular dataset named by the config.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset> {
    match cfg.instance_spec() {
        InstanceSpec::Adult { path } => ingest_path("adult", &path),
        InstanceSpec::Law { path } => ingest_path("law", &path),
        InstanceSpec::Dataset { path } => Dataset::read(&path),
        InstanceSpec::Synthetic(spec) => synthetic_tabular(&spec),
        _ => config_err("blackbox mode needs a tabular instance"),
    }
}

/// Every row of the table with its classification; labels only for
/// positives.
pub fn past_table(ds: &Dataset, clf: &dyn Classifier) -> Result<PastDatabase> {
    let dim = ds.columns.len();
    let mut db = PastDatabase::new(dim, 2);
    for r in &ds.rows {
        let f = clf.predict(&r.x, r.a);
        db.push(&r.x, r.a, f, f.then_some(r.y))?;
    }
    Ok(db)
}

fn min_positive_cell(summary: &PopulationSummary) -> f64 {
    summary
        .p_joint
        .iter()
        .flatten()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// τ sweep on a tabular instance: Baseline and RS-Audit at each fixed τ.
pub fn run_blackbox_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if cfg.mode != Mode::Blackbox {
        return config_err("config mode is not blackbox");
    }
    cfg.validate()?;
    let ds = load_dataset(cfg)?;
    let inst = ds.instance()?;
    let clf = build_classifier(&ds, &cfg.classifier)?;
    let summary = population_summary(&inst, clf.as_ref(), SummaryMode::Exact)?;
    let truth = ground_truth(summary.eod, cfg.eps);
    let table = past_table(&ds, clf.as_ref())?;
    let per_pass = ds.rows.len() as f64 * min_positive_cell(&summary);

    let jobs: Vec<(usize, usize)> = (0..cfg.tau_sweep.len())
        .flat_map(|t| (0..cfg.seeds.len()).map(move |s| (t, s)))
        .collect();
    let done: Vec<Result<Cell>> = jobs
        .par_iter()
        .map(|&(ti, si)| {
            let tau = cfg.tau_sweep[ti];
            let seed = cfg.seeds[si].wrapping_add(cfg.seed_offset);
            let passes = (1.5 * tau as f64 / per_pass).ceil() as usize + 2;
            let past = ShuffledPastDatabase::new(table.clone(), derive_seed(seed, &[PAST]), passes)?;
            let params = BlackboxParams {
                tau_override: Some(tau),
                tau_cap: None,
                ..BlackboxParams::new(cfg.eps, cfg.delta)
            };
            let mut reports = Vec::with_capacity(2);
            for (ai, audit) in [baseline_audit, rs_audit].into_iter().enumerate() {
                let rng = RngStream::new(derive_seed(seed, &[ONLINE, ti as u64, ai as u64]));
                let mut env = PartialFeedbackEnv::new(&inst, clf.as_ref(), 0.0, 0.0, rng)?
                    .with_draw_cap(Some(cfg.draw_cap()));
                reports.push(truncated_ok(audit(&mut env, &past, &params))?);
            }
            Ok(Cell {
                reports,
                true_eod: summary.eod,
                truth,
            })
        })
        .collect();
    let cells = regroup(done, cfg.tau_sweep.len(), cfg.seeds.len())?;
    let taus: Vec<f64> = cfg.tau_sweep.iter().map(|&t| t as f64).collect();
    Ok(reduce(cfg, &["baseline", "rs_audit"], &taus, &cells))
}

fn regroup(done: Vec<Result<Cell>>, points: usize, seeds: usize) -> Result<Vec<Vec<Cell>>> {
    let mut flat = done.into_iter();
    let mut out = Vec::with_capacity(points);
    for _ in 0..points {
        out.push((0..seeds).map(|_| flat.next().expect("one cell per job")).collect::<Result<Vec<_>>>()?);
    }
    Ok(out)
}

/// Mixture parameters at one sweep point.
pub fn mixture_config(spec: &MixtureSpec, eps: f64) -> MixtureConfig {
    MixtureConfig {
        dim: spec.dim,
        sigma2: spec.sigma2,
        group_probs: spec.group_probs.clone(),
        label_probs: spec.label_probs.clone(),
        eps,
        constants: spec.constants,
        separation: spec.separation,
    }
}

/// ε sweep on freshly generated separated Gaussian mixtures.
pub fn run_mixture_sweep(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>> {
    if cfg.mode != Mode::Mixture {
        return config_err("config mode is not mixture");
    }
    cfg.validate()?;
    let InstanceSpec::Mixture(spec) = cfg.instance_spec() else {
        return config_err("mixture mode needs a mixture instance");
    };
    let jobs: Vec<(usize, usize)> = (0..cfg.eps_sweep.len())
        .flat_map(|e| (0..cfg.seeds.len()).map(move |s| (e, s)))
        .collect();
    let done: Vec<Result<Cell>> = jobs
        .par_iter()
        .map(|&(ei, si)| mixture_cell(cfg, &spec, ei, cfg.seeds[si].wrapping_add(cfg.seed_offset)))
        .collect();
    let cells = regroup(done, cfg.eps_sweep.len(), cfg.seeds.len())?;
    let algs: Vec<&str> = spec.algorithms.iter().map(String::as_str).collect();
    Ok(reduce(cfg, &algs, &cfg.eps_sweep, &cells))
}

fn mixture_cell(cfg: &ExperimentConfig, spec: &MixtureSpec, ei: usize, seed: u64) -> Result<Cell> {
    let eps = cfg.eps_sweep[ei];
    let ei = ei as u64;
    let mcfg = mixture_config(spec, eps);
    let inst = generate_separated_mixture(&mcfg, &mut RngStream::new(derive_seed(seed, &[INSTANCE, ei])))?;
    let target = if eps > spec.fair_above { 0.0 } else { spec.unfair_eod };
    let clf = LinearDesign {
        offset: spec.design_offset,
    }
    .classifier(&inst, target)?;
    let summary = population_summary(&inst, &clf, SummaryMode::Exact)?;
    let family = inst.family().as_ref();
    let k = inst.n_groups();

    let rs_params = BlackboxParams {
        tau_cap: cfg.tau_cap(),
        ..BlackboxParams::new(eps, cfg.delta)
    };
    let exp_params = ExpAuditParams {
        tau_cap: cfg.tau_cap(),
        r_cap: cfg.r_cap(),
        ..ExpAuditParams::new(eps, cfg.delta, family, k)
    };
    // Enough history for every past-side count, with a margin.
    let tau_past = audit_core::blackbox::resolve_count(
        audit_core::blackbox::stopping_threshold(576.0, exp_params.log_mult, eps, cfg.delta, k)?,
        cfg.tau_cap(),
    )
    .0;
    let hits = [
        rs_params.tau(k)?.0,
        tau_past,
        2 * exp_params.trunc.samples_needed(),
    ]
    .into_iter()
    .max()
    .unwrap_or(0) as f64;
    let len = cfg
        .past_db_size
        .max((1.25 * hits / min_positive_cell(&summary)).ceil() as usize + 1000);
    let past = ReplayedPastDatabase {
        instance: &inst,
        classifier: &clf,
        seed: derive_seed(seed, &[PAST, ei]),
        len,
    };

    let mut reports = Vec::with_capacity(spec.algorithms.len());
    for (ai, alg) in spec.algorithms.iter().enumerate() {
        let rng = RngStream::new(derive_seed(seed, &[ONLINE, ei, ai as u64]));
        let mut env = PartialFeedbackEnv::new(&inst, &clf, 0.0, 0.0, rng)?
            .with_draw_cap(Some(cfg.draw_cap()));
        let out = match alg.as_str() {
            "rs_audit" => rs_audit(&mut env, &past as &dyn PastSource, &rs_params),
            _ => {
                let mut sgd = RngStream::new(derive_seed(seed, &[SGD, ei]));
                exp_audit(&mut env, &past, family, &exp_params, &mut sgd).map(|r| r.report)
            }
        };
        reports.push(truncated_ok(out)?);
    }
    Ok(Cell {
        reports,
        true_eod: summary.eod,
        truth: ground_truth(summary.eod, eps),
    })
}
