//! Checks on the FAIR/UNFAIR instance pairs behind the label lower bound:
//! exact EOD values, and how RS-Audit's label count scales with `1/ε²`.

use audit_core::blackbox::{rs_audit, AuditReport, BlackboxParams, Verdict};
use audit_core::env::{PartialFeedbackEnv, ReplayedPastDatabase};
use audit_core::instance::{
    population_summary, Hypothesis, LowerBoundInstance, SummaryMode,
};
use audit_core::RngStream;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, InstanceSpec, Mode};
use crate::error::{config_err, Result};
use crate::results::{aggregate, ResultRow, RowKey, RunOutcome};
use crate::sweep::derive_seed;

/// Exact and Monte Carlo findings for one `(ε, p, q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairCheck {
    pub eps: f64,
    pub p: f64,
    pub q: f64,
    /// Exact EODs as reduced fractions.
    pub eod_fair: String,
    pub eod_unfair: String,
    /// `2ε/(1+4ε)`, exactly.
    pub eod_unfair_closed_form: String,
    /// FAIR has EOD 0 and UNFAIR matches the closed form.
    pub exact_match: bool,
    /// The true-positive gap sets the UNFAIR EOD.
    pub tpr_dominates: bool,
    pub tau: usize,
    pub mean_labels_fair: f64,
    pub mean_labels_unfair: f64,
    pub correct_fair: f64,
    pub correct_unfair: f64,
    /// Fraction of all runs with `|Δ̂ − Δ| ≤ ε/2`.
    pub within_half_eps: f64,
    pub runs: usize,
    pub truncated_runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundReport {
    pub delta: f64,
    pub pairs: Vec<PairCheck>,
    /// Least-squares slope of `ln(labels)` on `ln(1/ε²)`; `None` with fewer
    /// than two distinct ε.
    pub slope_fair: Option<f64>,
    pub slope_unfair: Option<f64>,
    pub slope_pooled: Option<f64>,
    pub exact_ok: bool,
}

impl LowerBoundReport {
    pub fn slope_in(&self, lo: f64, hi: f64) -> bool {
        self.slope_pooled.is_some_and(|s| (lo..=hi).contains(&s))
    }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    (x.len() >= 2 && sxx > 0.0).then(|| sxy / sxx)
}

fn slope_over(pairs: &[PairCheck], labels: impl Fn(&PairCheck) -> f64) -> Option<f64> {
    let (x, y): (Vec<f64>, Vec<f64>) = pairs
        .iter()
        .filter(|c| labels(c) > 0.0)
        .map(|c| ((1.0 / (c.eps * c.eps)).ln(), labels(c).ln()))
        .unzip();
    ols_slope(&x, &y)
}

struct Run {
    hyp: usize,
    report: Option<AuditReport>,
    true_eod: f64,
}

pub fn run_lower_bound_check(cfg: &ExperimentConfig) -> Result<(LowerBoundReport, Vec<ResultRow>)> {
    if cfg.mode != Mode::LowerBoundCheck {
        return config_err("config mode is not lower_bound_check");
    }
    cfg.validate()?;
    let InstanceSpec::LowerBound(spec) = cfg.instance_spec() else {
        return config_err("lower-bound mode needs a lower_bound instance");
    };
    let mut pairs = Vec::new();
    let mut rows = Vec::new();
    for (ti, &[eps, p, q]) in spec.triples.iter().enumerate() {
        let insts = [Hypothesis::Fair, Hypothesis::Unfair].map(|h| {
            LowerBoundInstance::new(eps, p, q, h).and_then(|i| i.with_group_probs(spec.p_group1))
        });
        let [fair, unfair] = insts;
        let (fair, unfair) = (fair?, unfair?);
        let exact_match = fair.eod_rational() == fair.closed_form_eod_rational()
            && unfair.eod_rational() == unfair.closed_form_eod_rational();

        let params = BlackboxParams {
            tau_cap: cfg.tau_cap(),
            ..BlackboxParams::new(eps, cfg.delta)
        };
        let (tau, capped) = params.tau(2)?;
        let jobs: Vec<(usize, usize)> = (0..2)
            .flat_map(|h| (0..cfg.seeds.len()).map(move |s| (h, s)))
            .collect();
        let runs: Vec<Result<Run>> = jobs
            .par_iter()
            .map(|&(h, si)| {
                let inst = if h == 0 { &fair } else { &unfair };
                let clf = inst.classifier();
                let summary = population_summary(inst, &clf, SummaryMode::Exact)?;
                let seed = cfg.seeds[si].wrapping_add(cfg.seed_offset);
                let min_cell = summary.p_joint.iter().flatten().copied().fold(1.0, f64::min);
                let past = ReplayedPastDatabase {
                    instance: inst,
                    classifier: &clf,
                    seed: derive_seed(seed, &[11, ti as u64, h as u64]),
                    len: (1.25 * tau as f64 / min_cell).ceil() as usize + 1000,
                };
                let rng = RngStream::new(derive_seed(seed, &[12, ti as u64, h as u64]));
                let mut env = PartialFeedbackEnv::new(inst, &clf, 0.0, 0.0, rng)?
                    .with_draw_cap(Some(cfg.draw_cap()));
                let report = match rs_audit(&mut env, &past, &params) {
                    Ok(r) => Some(r),
                    Err(audit_core::AuditError::DrawBudgetExhausted(_)) => None,
                    Err(e) => return Err(e.into()),
                };
                Ok(Run {
                    hyp: h,
                    report,
                    true_eod: summary.eod,
                })
            })
            .collect();
        let runs = runs.into_iter().collect::<Result<Vec<_>>>()?;

        let mut labels = [Vec::new(), Vec::new()];
        let mut correct = [0usize; 2];
        let mut within = 0usize;
        let mut done = 0usize;
        for r in &runs {
            let Some(rep) = &r.report else { continue };
            done += 1;
            labels[r.hyp].push(rep.labels_requested as f64);
            let want = if r.hyp == 0 { Verdict::Fair } else { Verdict::Unfair };
            correct[r.hyp] += usize::from(rep.verdict == want);
            within += usize::from((rep.delta_hat - r.true_eod).abs() <= eps / 2.0);
        }
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len().max(1) as f64;
        let frac = |c: usize, h: usize| c as f64 / labels[h].len().max(1) as f64;
        pairs.push(PairCheck {
            eps,
            p,
            q,
            eod_fair: fair.eod_rational().to_string(),
            eod_unfair: unfair.eod_rational().to_string(),
            eod_unfair_closed_form: unfair.closed_form_eod_rational().to_string(),
            exact_match,
            tpr_dominates: unfair.tpr_gap_dominates(),
            tau,
            mean_labels_fair: mean(&labels[0]),
            mean_labels_unfair: mean(&labels[1]),
            correct_fair: frac(correct[0], 0),
            correct_unfair: frac(correct[1], 1),
            within_half_eps: within as f64 / done.max(1) as f64,
            runs: runs.len(),
            truncated_runs: runs.len() - done,
        });

        for (h, name) in ["rs_audit_fair", "rs_audit_unfair"].iter().enumerate() {
            let hyp_runs: Vec<&Run> = runs.iter().filter(|r| r.hyp == h).collect();
            let true_eod = hyp_runs.first().map_or(f64::NAN, |r| r.true_eod);
            for &(c_feat, c_lab) in &cfg.cost_pairs {
                let outcomes: Vec<RunOutcome> = hyp_runs
                    .iter()
                    .filter_map(|r| {
                        let rep = r.report.as_ref()?;
                        let want = if h == 0 { Verdict::Fair } else { Verdict::Unfair };
                        Some(RunOutcome {
                            cost: rep.price(c_feat, c_lab),
                            label_cost: c_lab * rep.defaults as f64,
                            labels: rep.labels_requested as f64,
                            samples: rep.samples_drawn as f64,
                            delta_hat: rep.delta_hat,
                            correct: rep.verdict == want,
                            capped,
                        })
                    })
                    .collect();
                rows.push(aggregate(
                    RowKey {
                        algorithm: name,
                        sweep_value: eps,
                        cost_pair: (c_feat, c_lab),
                        true_eod,
                        premise_violated: false,
                        truncated_run: outcomes.len() < hyp_runs.len(),
                    },
                    &outcomes,
                ));
            }
        }
    }
    let report = LowerBoundReport {
        delta: cfg.delta,
        slope_fair: slope_over(&pairs, |c| c.mean_labels_fair),
        slope_unfair: slope_over(&pairs, |c| c.mean_labels_unfair),
        slope_pooled: slope_over(&pairs, |c| (c.mean_labels_fair + c.mean_labels_unfair) / 2.0),
        exact_ok: pairs.iter().all(|c| c.exact_match || !c.tpr_dominates),
        pairs,
    };
    // Rows ordered by algorithm first, like the sweeps.
    rows.sort_by_key(|r| r.algorithm != "rs_audit_fair");
    Ok((report, rows))
}
