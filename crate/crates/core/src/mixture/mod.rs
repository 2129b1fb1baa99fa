//! Auditing when each label-conditional feature distribution belongs to a
//! known exponential family.
//!
//! The expensive part of the blackbox auditors is buying labels of
//! negatives to estimate `P[Y=y | A=a]`. Here labels are bought only for a
//! coarse, ε-independent estimate of the class weights; the fine estimate
//! comes from buying features and labelling them with a MAP classifier fit
//! on the (free, truncated) positives of the past database.

mod trunc_est;

use serde::{Deserialize, Serialize};

pub use trunc_est::{
    candidate_count, mle_from_moments, project_to_feasible, sample_gradient, theoretical_schedule,
    trunc_est, TheoreticalSchedule, Truncation, TruncEstConfig, TruncEstOutput,
};

use crate::blackbox::{
    online_sample, past_sample, resolve_count, stopping_threshold, AuditReport, CellEstimates,
};
use crate::env::{collect_cells, PartialFeedbackEnv, PastSource};
use crate::error::{domain, AuditError, Result};
use crate::family::{log_density_unchecked, ExpFamily};
use crate::instance::Group;
use crate::rng::RngStream;

/// Bayes labeller for one group: `argmax_y log q̃_y + log E_{θ̂_y}(x)`,
/// ties going to `y = 1`.
#[derive(Debug, Clone)]
pub struct MapOracle<'f> {
    family: &'f dyn ExpFamily,
    thetas: [Vec<f64>; 2],
    log_weights: [f64; 2],
}

impl<'f> MapOracle<'f> {
    pub fn new(family: &'f dyn ExpFamily, thetas: [Vec<f64>; 2], weights: [f64; 2]) -> Result<Self> {
        if weights.iter().any(|w| !(*w > 0.0)) {
            return domain("class weights must be positive");
        }
        Ok(Self {
            family,
            thetas,
            log_weights: [weights[0].ln(), weights[1].ln()],
        })
    }

    pub fn classify(&self, x: &[f64]) -> u8 {
        let s0 = self.log_weights[0] + log_density_unchecked(self.family, &self.thetas[0], x);
        let s1 = self.log_weights[1] + log_density_unchecked(self.family, &self.thetas[1], x);
        u8::from(s1 >= s0)
    }
}

/// Convenience wrapper over [`MapOracle::classify`].
pub fn map_classify(oracle: &MapOracle<'_>, x: &[f64]) -> u8 {
    oracle.classify(x)
}

/// Feature purchases per group, `⌈3430 ln(log_mult·|A|/δ) / (q̃_m ε²)⌉`.
pub fn compute_r(
    q_tilde_min: f64,
    eps: f64,
    delta: f64,
    n_groups: usize,
    log_mult: f64,
) -> Result<u64> {
    if !(q_tilde_min > 0.0 && q_tilde_min <= 1.0) {
        return domain(format!("q_tilde_min must lie in (0, 1], got {q_tilde_min}"));
    }
    let r = stopping_threshold(3430.0, log_mult, eps, delta, n_groups)? / q_tilde_min;
    Ok(r.ceil() as u64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpAuditParams {
    pub eps: f64,
    pub delta: f64,
    /// Accuracy of the coarse class weights.
    pub eps_coarse: f64,
    /// Cap on the past-database success count.
    pub tau_cap: Option<usize>,
    pub r_cap: Option<u64>,
    /// Multiplier inside the log of the feature-purchase count.
    pub r_log_mult: f64,
    /// Multiplier inside the log of every other confidence split.
    pub log_mult: f64,
    pub trunc: TruncEstConfig,
}

impl ExpAuditParams {
    pub fn new(eps: f64, delta: f64, family: &dyn ExpFamily, n_groups: usize) -> Self {
        let log_mult = 14.0;
        let cell_delta = delta / (log_mult * n_groups as f64);
        Self {
            eps,
            delta,
            eps_coarse: 0.1,
            tau_cap: None,
            r_cap: None,
            r_log_mult: 12.0,
            log_mult,
            trunc: TruncEstConfig::practical(cell_delta, family.constants()),
        }
    }
}

/// Estimates for one `(y, a)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellParams {
    pub group: Group,
    pub y: u8,
    pub theta_hat: Vec<f64>,
    pub q_tilde: f64,
    pub q_hat: f64,
    pub p_hat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpAuditReport {
    pub report: AuditReport,
    pub cells: Vec<CellParams>,
    pub tau_coarse: usize,
    pub r: u64,
    pub r_capped: bool,
}

impl ExpAuditReport {
    /// Per-cell parameter estimates as JSON.
    pub fn params_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.cells)?)
    }
}

pub fn exp_audit(
    env: &mut PartialFeedbackEnv<'_>,
    past: &dyn PastSource,
    family: &dyn ExpFamily,
    params: &ExpAuditParams,
    rng: &mut RngStream,
) -> Result<ExpAuditReport> {
    let k = env.n_groups();
    if past.n_groups() != k || past.dim() != family.point_dim() {
        return domain("past database does not match the population or family");
    }
    let (eps, delta) = (params.eps, params.delta);
    let cell_delta = delta / (params.log_mult * k as f64);
    let tau_coarse = resolve_count(
        stopping_threshold(4.0, params.log_mult, params.eps_coarse, delta, k)?,
        None,
    )
    .0;
    let (tau_past, tau_capped) = resolve_count(
        stopping_threshold(576.0, params.log_mult, eps, delta, k)?,
        params.tau_cap,
    );
    let eps_theta = eps / (2.0 * family.constants().ball_beta);

    // Positives of each cell; the second half of the budget backs a retry.
    let need = params.trunc.samples_needed();
    let cells = collect_cells(past, 2 * need);
    let classifier = env.classifier();

    let mut thetas: Vec<[Vec<f64>; 2]> = Vec::with_capacity(k);
    let mut q_tilde = vec![[0.0; 2]; k];
    let mut est = CellEstimates::new(k);
    for a in 0..k {
        let g = a as Group;
        let accept = move |x: &[f64]| classifier.predict(x, g);
        let mut pair: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
        for y in 0..2u8 {
            let data = &cells[a][y as usize];
            let first = trunc_est(data, &accept, family, eps_theta, cell_delta, &params.trunc, rng);
            let out = match first {
                Err(AuditError::NoMajorityCandidate) => {
                    let fresh = if data.len() >= 2 * need { &data[need..] } else { &data[..] };
                    trunc_est(fresh, &accept, family, eps_theta, cell_delta, &params.trunc, rng)?
                }
                other => other?,
            };
            pair[y as usize] = out.theta;
            let n_online = online_sample(env, tau_coarse, y, g)?;
            q_tilde[a][y as usize] = tau_coarse as f64 / n_online as f64;
            let n_past = past_sample(past, tau_past, y, g, true)?;
            est.p_hat[a][y as usize] = tau_past as f64 / n_past as f64;
        }
        thetas.push(pair);
    }

    let q_min = q_tilde.iter().flatten().copied().fold(f64::INFINITY, f64::min);
    let r_raw = compute_r(q_min, eps, delta, k, params.r_log_mult)?;
    let (r, r_capped) = match params.r_cap {
        Some(c) if r_raw > c => (c, true),
        _ => (r_raw, false),
    };
    for a in 0..k {
        let oracle = MapOracle::new(family, thetas[a].clone(), q_tilde[a])?;
        let mut counts = [0u64; 2];
        let mut seen = 0;
        while seen < r {
            let mut ind = env.draw_individual()?;
            if ind.a() != a as Group {
                continue;
            }
            seen += 1;
            let y_hat = oracle.classify(env.reveal_feature(&mut ind));
            counts[y_hat as usize] += 1;
        }
        for y in 0..2 {
            // An empty class would make the ratio infinite; count it once.
            est.q_hat[a][y] = counts[y].max(1) as f64 / r as f64;
        }
    }

    let mut cells_out = Vec::with_capacity(2 * k);
    for a in 0..k {
        for y in 0..2 {
            cells_out.push(CellParams {
                group: a as Group,
                y: y as u8,
                theta_hat: thetas[a][y].clone(),
                q_tilde: q_tilde[a][y],
                q_hat: est.q_hat[a][y],
                p_hat: est.p_hat[a][y],
            });
        }
    }
    let report = AuditReport::from_env("exp_audit", eps, est, env, tau_past, tau_capped || r_capped);
    Ok(ExpAuditReport {
        report,
        cells: cells_out,
        tau_coarse,
        r,
        r_capped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::GaussianFamily;

    #[test]
    fn r_example() {
        let r = compute_r(0.3, 0.1, 0.01, 2, 12.0).unwrap();
        let expected = (3430.0 * 2400f64.ln() / (0.3 * 0.01)).ceil() as u64;
        assert_eq!(r, expected);
        assert!((r as f64 - 8_899_000.0).abs() < 1_000.0);
        assert!(compute_r(0.0, 0.1, 0.01, 2, 12.0).is_err());
    }

    #[test]
    fn map_ties_go_to_one() {
        let fam = GaussianFamily::new(1, 1.0).unwrap();
        let o = MapOracle::new(&fam, [vec![-1.0], vec![1.0]], [0.5, 0.5]).unwrap();
        assert_eq!(o.classify(&[0.0]), 1);
        assert_eq!(o.classify(&[-0.1]), 0);
        assert_eq!(o.classify(&[0.1]), 1);
    }

    #[test]
    fn map_weights_shift_boundary() {
        let fam = GaussianFamily::new(1, 1.0).unwrap();
        let o = MapOracle::new(&fam, [vec![-1.0], vec![1.0]], [0.9, 0.1]).unwrap();
        // Boundary moves to ln(9)/2.
        assert_eq!(o.classify(&[1.0]), 0);
        assert_eq!(o.classify(&[1.2]), 1);
    }
}
