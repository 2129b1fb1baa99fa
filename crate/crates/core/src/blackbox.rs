//! Distribution-free auditors: the joint-count baseline and the per-group
//! rejection-sampling auditor.
//!
//! Both estimate `P[f=1 | Y=y, A=a]` as a ratio of two stopping-time
//! estimates: the denominator from fresh online draws (paying for labels of
//! negatives), the numerator from the free past database of positives.

use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::env::{PartialFeedbackEnv, PastSource};
use crate::error::{domain, AuditError, Result};
use crate::instance::Group;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Fair,
    Unfair,
}

/// `UNFAIR` iff `delta_hat > eps / 2`.
pub fn decide(delta_hat: f64, eps: f64) -> Verdict {
    if delta_hat > eps / 2.0 {
        Verdict::Unfair
    } else {
        Verdict::Fair
    }
}

/// `coef · ln(log_mult · n_groups / δ) / ε²`.
pub fn stopping_threshold(
    coef: f64,
    log_mult: f64,
    eps: f64,
    delta: f64,
    n_groups: usize,
) -> Result<f64> {
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps must lie in (0, 1), got {eps}"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return domain(format!("delta must lie in (0, 1), got {delta}"));
    }
    if n_groups == 0 {
        return domain("need at least one group");
    }
    Ok(coef * (log_mult * n_groups as f64 / delta).ln() / (eps * eps))
}

/// Success count for both blackbox auditors, `576 ln(8|A|/δ) / ε²`.
pub fn compute_tau(eps: f64, delta: f64, n_groups: usize) -> Result<f64> {
    stopping_threshold(576.0, 8.0, eps, delta, n_groups)
}

/// `(τ, capped)`: the ceiling of `raw`, clipped to `cap`.
pub fn resolve_count(raw: f64, cap: Option<usize>) -> (usize, bool) {
    let t = raw.ceil().max(1.0);
    match cap {
        Some(c) if t > c as f64 => (c, true),
        _ => (t as usize, false),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlackboxParams {
    pub eps: f64,
    pub delta: f64,
    /// Use this τ instead of the formula (τ sweeps).
    pub tau_override: Option<usize>,
    pub tau_cap: Option<usize>,
}

impl BlackboxParams {
    pub fn new(eps: f64, delta: f64) -> Self {
        Self {
            eps,
            delta,
            tau_override: None,
            tau_cap: None,
        }
    }

    pub fn tau(&self, n_groups: usize) -> Result<(usize, bool)> {
        let raw = compute_tau(self.eps, self.delta, n_groups)?;
        Ok(match self.tau_override {
            Some(0) => return domain("tau must be at least 1"),
            Some(t) => (t, false),
            None => resolve_count(raw, self.tau_cap),
        })
    }
}

/// Per-cell estimates, indexed `[a][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellEstimates {
    pub p_hat: Vec<[f64; 2]>,
    pub q_hat: Vec<[f64; 2]>,
}

impl CellEstimates {
    pub fn new(n_groups: usize) -> Self {
        Self {
            p_hat: vec![[0.0; 2]; n_groups],
            q_hat: vec![[0.0; 2]; n_groups],
        }
    }

    /// Estimated `P[f=1 | Y=y, A=a]`.
    pub fn rates(&self) -> Vec<[f64; 2]> {
        self.p_hat
            .iter()
            .zip(&self.q_hat)
            .map(|(p, q)| [p[0] / q[0], p[1] / q[1]])
            .collect()
    }

    pub fn delta_hat(&self) -> f64 {
        crate::instance::eod_from_rates(&self.rates())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub algorithm: String,
    pub verdict: Verdict,
    pub delta_hat: f64,
    pub samples_drawn: u64,
    pub labels_requested: u64,
    pub features_requested: u64,
    /// Paid labels that came back `Y = 0`.
    pub defaults: u64,
    pub cost: f64,
    /// Part of `cost` charged through `c_lab`.
    pub label_cost: f64,
    pub tau: usize,
    pub capped: bool,
    pub seed: u64,
    pub estimates: CellEstimates,
}

impl AuditReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    /// What this run would have cost under another cost pair. Access
    /// decisions never depend on the prices, so the counts carry over.
    pub fn price(&self, c_feat: f64, c_lab: f64) -> f64 {
        c_feat * (self.labels_requested + self.features_requested) as f64
            + c_lab * self.defaults as f64
    }

    pub(crate) fn from_env(
        algorithm: &str,
        eps: f64,
        estimates: CellEstimates,
        env: &PartialFeedbackEnv<'_>,
        tau: usize,
        capped: bool,
    ) -> Self {
        let delta_hat = estimates.delta_hat();
        let l = env.ledger();
        Self {
            algorithm: algorithm.to_string(),
            verdict: decide(delta_hat, eps),
            delta_hat,
            samples_drawn: l.n_drawn,
            labels_requested: l.n_label_requests,
            features_requested: l.n_feature_requests,
            defaults: l.n_defaults,
            cost: l.total_cost,
            label_cost: l.label_cost(),
            tau,
            capped,
            seed: env.seed(),
            estimates,
        }
    }
}

/// Number of group-`a` individuals drawn online until `tau` of them have
/// `Y = y`. Other groups are skipped without looking at anything paid.
pub fn online_sample(
    env: &mut PartialFeedbackEnv<'_>,
    tau: usize,
    y: u8,
    a: Group,
) -> Result<usize> {
    if tau == 0 {
        return domain("tau must be at least 1");
    }
    let (mut n, mut hits) = (0, 0);
    loop {
        let mut ind = env.draw_individual()?;
        if ind.a() != a {
            continue;
        }
        n += 1;
        if env.reveal_label(&mut ind) == y {
            hits += 1;
            if hits == tau {
                return Ok(n);
            }
        }
    }
}

/// Number of individuals (of any group) drawn online until `tau` have
/// `(Y, A) = (y, a)`; every negative's label is bought.
pub fn online_sample_joint(
    env: &mut PartialFeedbackEnv<'_>,
    tau: usize,
    y: u8,
    a: Group,
) -> Result<usize> {
    if tau == 0 {
        return domain("tau must be at least 1");
    }
    let (mut n, mut hits) = (0, 0);
    loop {
        let mut ind = env.draw_individual()?;
        n += 1;
        let label = env.reveal_label(&mut ind);
        if ind.a() == a && label == y {
            hits += 1;
            if hits == tau {
                return Ok(n);
            }
        }
    }
}

/// Number of past records scanned until `tau` positives with `(Y, A) =
/// (y, a)`. With `per_group`, only group-`a` records are counted.
pub fn past_sample(
    past: &dyn PastSource,
    tau: usize,
    y: u8,
    a: Group,
    per_group: bool,
) -> Result<usize> {
    if tau == 0 {
        return domain("tau must be at least 1");
    }
    let (mut scanned, mut hits) = (0, 0);
    past.scan(&mut |r| {
        if per_group && r.a != a {
            return ControlFlow::Continue(());
        }
        scanned += 1;
        if r.f && r.a == a && r.y == Some(y) {
            hits += 1;
            if hits == tau {
                return ControlFlow::Break(());
            }
        }
        ControlFlow::Continue(())
    });
    if hits < tau {
        return Err(AuditError::InsufficientHistory {
            y,
            a,
            tau,
            hits,
            scanned,
        });
    }
    Ok(scanned)
}

fn run(
    env: &mut PartialFeedbackEnv<'_>,
    past: &dyn PastSource,
    params: &BlackboxParams,
    per_group: bool,
) -> Result<AuditReport> {
    let k = env.n_groups();
    if past.n_groups() != k {
        return domain("past database and population disagree on the groups");
    }
    let (tau, capped) = params.tau(k)?;
    let mut est = CellEstimates::new(k);
    for a in 0..k {
        for y in 0..2u8 {
            let g = a as Group;
            let n_online = if per_group {
                online_sample(env, tau, y, g)?
            } else {
                online_sample_joint(env, tau, y, g)?
            };
            let n_past = past_sample(past, tau, y, g, per_group)?;
            est.q_hat[a][y as usize] = tau as f64 / n_online as f64;
            est.p_hat[a][y as usize] = tau as f64 / n_past as f64;
        }
    }
    let name = if per_group { "rs_audit" } else { "baseline" };
    Ok(AuditReport::from_env(name, params.eps, est, env, tau, capped))
}

/// Joint-count auditor: labels every negative it draws, in every group.
pub fn baseline_audit(
    env: &mut PartialFeedbackEnv<'_>,
    past: &dyn PastSource,
    params: &BlackboxParams,
) -> Result<AuditReport> {
    run(env, past, params, false)
}

/// Per-group rejection-sampling auditor.
pub fn rs_audit(
    env: &mut PartialFeedbackEnv<'_>,
    past: &dyn PastSource,
    params: &BlackboxParams,
) -> Result<AuditReport> {
    run(env, past, params, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::env::generate_past_database;
    use crate::instance::make_lower_bound_pair;
    use crate::rng::RngStream;
    use approx::assert_abs_diff_eq;

    #[test]
    fn tau_example() {
        let t = compute_tau(0.1, 0.05, 2).unwrap();
        assert_abs_diff_eq!(t, 576.0 * 320f64.ln() / 0.01, epsilon = 1e-9);
        assert_eq!(resolve_count(t, Some(1000)), (1000, true));
        assert_eq!(resolve_count(12.2, Some(1000)), (13, false));
        assert!(compute_tau(0.0, 0.1, 2).is_err());
        assert!(compute_tau(0.1, 1.0, 2).is_err());
    }

    #[test]
    fn decision_rule_is_strict() {
        assert_eq!(decide(0.05, 0.1), Verdict::Fair);
        assert_eq!(decide(0.0500001, 0.1), Verdict::Unfair);
    }

    #[test]
    fn rs_audit_recovers_rates() {
        let (_, inst) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let c = inst.classifier();
        let past = generate_past_database(&inst, &c, 200_000, &mut RngStream::new(1));
        let mut env = PartialFeedbackEnv::new(&inst, &c, 0.0, 1.0, RngStream::new(2)).unwrap();
        let mut params = BlackboxParams::new(0.1, 0.1);
        params.tau_override = Some(2000);
        let r = rs_audit(&mut env, &past, &params).unwrap();
        let rates = r.estimates.rates();
        for a in 0..2 {
            for y in 0..2 {
                assert!((rates[a][y] - inst.rate(a, y)).abs() < 0.06, "{a} {y} {rates:?}");
            }
        }
        assert_abs_diff_eq!(r.cost, r.label_cost);
    }

    #[test]
    fn baseline_pays_more_than_rs() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let c = inst.classifier();
        let past = generate_past_database(&inst, &c, 100_000, &mut RngStream::new(1));
        let mut params = BlackboxParams::new(0.1, 0.1);
        params.tau_override = Some(200);
        let mut e1 = PartialFeedbackEnv::new(&inst, &c, 0.0, 1.0, RngStream::new(3)).unwrap();
        let mut e2 = PartialFeedbackEnv::new(&inst, &c, 0.0, 1.0, RngStream::new(3)).unwrap();
        let b = baseline_audit(&mut e1, &past, &params).unwrap();
        let r = rs_audit(&mut e2, &past, &params).unwrap();
        assert!(r.cost < b.cost);
    }

    #[test]
    fn short_history_is_reported() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let c = inst.classifier();
        let past = generate_past_database(&inst, &c, 50, &mut RngStream::new(1));
        let err = past_sample(&past, 100, 1, 0, true).unwrap_err();
        assert!(matches!(err, AuditError::InsufficientHistory { tau: 100, .. }));
    }
}
