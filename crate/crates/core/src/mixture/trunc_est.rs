//! Parameter estimation for an exponential family observed through a
//! truncation set `S = {x : f(x) = 1}` that we can query but not describe.
//!
//! Projected SGD on the truncated negative log-likelihood, whose gradient is
//! `E_θ[T(Z) | Z ∈ S] − T(z)`; the expectation is replaced by one rejection
//! sample from the current model. Several independent chains are run and
//! the candidate closest to a majority of the others is returned.

use serde::{Deserialize, Serialize};

use crate::error::{domain, AuditError, Result};
use crate::family::{distance, project_to_ball, ExpFamily, ParamSet, SmoothnessConstants};
use crate::rng::RngStream;

/// Membership oracle of the truncation set.
pub type Truncation<'a> = &'a (dyn Fn(&[f64]) -> bool + Sync);

/// One stochastic gradient `T(z′) − T(z)` with `z′ ~ E_θ` conditioned on the
/// truncation set.
pub fn sample_gradient(
    z: &[f64],
    theta: &[f64],
    family: &dyn ExpFamily,
    accept: Truncation<'_>,
    rng: &mut RngStream,
    max_attempts: usize,
) -> Result<Vec<f64>> {
    for _ in 0..max_attempts {
        let cand = family.sample_unchecked(theta, rng);
        if family.in_support(&cand) && accept(&cand) {
            let t_new = family.suff_stat(&cand);
            let t_obs = family.suff_stat(z);
            return Ok(t_new.iter().zip(&t_obs).map(|(a, b)| a - b).collect());
        }
    }
    Err(AuditError::AcceptanceFailure {
        attempts: max_attempts,
    })
}

/// Moment-matching estimate on the (truncated) sample, projected into the
/// parameter set. Biased by the truncation; it only seeds the SGD.
pub fn mle_from_moments(samples: &[Vec<f64>], family: &dyn ExpFamily) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(AuditError::InsufficientSamples { have: 0, need: 1 });
    }
    let k = family.dim();
    let mut mean = vec![0.0; k];
    for x in samples {
        for (m, t) in mean.iter_mut().zip(family.suff_stat(x)) {
            *m += t;
        }
    }
    mean.iter_mut().for_each(|m| *m /= samples.len() as f64);
    let theta = family.natural_from_mean(&mean).ok_or_else(|| {
        AuditError::Domain(format!("{} has no closed-form moment map", family.name()))
    })??;
    Ok(family.param_set().project(&theta))
}

/// Euclidean projection onto `ball(center, radius) ∩ set` via Dykstra's
/// alternating projections.
pub fn project_to_feasible(
    theta: &[f64],
    center: &[f64],
    radius: f64,
    set: &ParamSet,
) -> Result<Vec<f64>> {
    const TOL: f64 = 1e-10;
    if !(radius >= 0.0) {
        return domain("projection radius must be non-negative");
    }
    let in_ball = |v: &[f64]| distance(v, center) <= radius * (1.0 + 1e-12) + TOL;
    if in_ball(theta) && set.contains(theta) {
        return Ok(theta.to_vec());
    }
    let mut x = theta.to_vec();
    let d = x.len();
    let (mut p, mut q) = (vec![0.0; d], vec![0.0; d]);
    for _ in 0..500 {
        let y_in: Vec<f64> = (0..d).map(|i| x[i] + p[i]).collect();
        let y = project_to_ball(&y_in, center, radius);
        p = (0..d).map(|i| y_in[i] - y[i]).collect();
        let x_in: Vec<f64> = (0..d).map(|i| y[i] + q[i]).collect();
        let next = set.project(&x_in);
        q = (0..d).map(|i| x_in[i] - next[i]).collect();
        let moved = distance(&next, &x);
        x = next;
        if moved < TOL && in_ball(&x) {
            return Ok(x);
        }
    }
    if in_ball(&x) && set.contains(&x) {
        Ok(x)
    } else {
        Err(AuditError::InfeasibleIntersection)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncEstConfig {
    /// Samples spent on the moment-matching warm start.
    pub n_init: usize,
    /// SGD steps (and fresh samples) per chain.
    pub m: usize,
    pub n_candidates: usize,
    pub eta: f64,
    /// Rejection-sampling attempts per gradient.
    pub max_attempts: usize,
    /// Accuracy targets below this are raised to it.
    pub eps_floor: f64,
    /// Return the average of each chain's second half instead of its last
    /// iterate.
    pub tail_average: bool,
}

impl TruncEstConfig {
    /// Schedule sized for simulation rather than for the worst-case bound.
    pub fn practical(delta: f64, c: &SmoothnessConstants) -> Self {
        Self {
            n_init: 1000,
            m: 2000,
            n_candidates: candidate_count(delta),
            eta: 0.01 * c.kappa,
            max_attempts: (10.0 / c.positivity_alpha).ceil() as usize,
            eps_floor: 0.05,
            tail_average: true,
        }
    }

    /// Practical schedule whose chains use up exactly `n_samples` samples.
    pub fn fitted(n_samples: usize, delta: f64, c: &SmoothnessConstants) -> Result<Self> {
        let mut cfg = Self::practical(delta, c);
        cfg.n_init = (n_samples / 10).min(1000);
        cfg.m = (n_samples - cfg.n_init) / cfg.n_candidates;
        if cfg.m < 2 {
            return Err(AuditError::InsufficientSamples {
                have: n_samples,
                need: cfg.n_init + 2 * cfg.n_candidates,
            });
        }
        Ok(cfg)
    }

    pub fn samples_needed(&self) -> usize {
        self.n_init + self.n_candidates * self.m
    }
}

/// `max(10, 10⌈ln(1/δ)⌉)`.
pub fn candidate_count(delta: f64) -> usize {
    let c = 10.0 * (1.0 / delta).ln().ceil();
    (c.max(10.0)) as usize
}

/// Sample size, step count and step size that carry the worst-case
/// guarantee. These are astronomically large (the curvature floor underflows
/// `f64`), so everything except `n` is kept as a natural logarithm. They are
/// reported, not run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalSchedule {
    pub d_alpha: f64,
    pub ln_kappa_f: f64,
    pub ln_lambda_f: f64,
    pub ln_rho2: f64,
    pub ln_g: f64,
    pub n: f64,
    pub ln_m: f64,
    pub ln_eta: f64,
    pub n_candidates: usize,
}

/// `ln(e^a + e^b)`.
fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a > b { (a, b) } else { (b, a) };
    hi + (lo - hi).exp().ln_1p()
}

/// `c_const` is the anti-concentration constant of the degree-`k`
/// polynomial bound.
pub fn theoretical_schedule(
    c: &SmoothnessConstants,
    dim: usize,
    eps: f64,
    delta: f64,
    c_const: f64,
    degree: usize,
) -> Result<TheoreticalSchedule> {
    c.validate()?;
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) || degree == 0 || !(c_const > 0.0) {
        return domain("need eps > 0, delta in (0, 1), degree >= 1 and C > 0");
    }
    let (kappa, lambda, beta, alpha) = (c.kappa, c.lambda, c.ball_beta, c.positivity_alpha);
    let k = degree as f64;
    let d_alpha = eps * eps + 2.0 * beta * (1.0 / alpha).ln();
    let expo = 6.0 * lambda / (kappa * kappa) * d_alpha * d_alpha;
    let ln_base = 2.0 * alpha.ln() - expo - (4.0 * c_const * k).ln();
    let ln_kappa_f = 0.5f64.ln() + 2.0 * k * ln_base + kappa.ln();
    let ln_lambda_f = expo - 2.0 * alpha.ln() + lambda.ln();
    let inner = 12.0 * beta * lambda / (kappa * kappa) * d_alpha * d_alpha - 4.0 * beta * alpha.ln()
        + eps * eps;
    let ln_rho2 = log_add(
        (dim as f64).ln() + log_add(ln_lambda_f, lambda.ln()),
        2.0 * (1.0 + 2.0 * lambda / kappa).ln() + 2.0 * inner.abs().ln(),
    );
    let ln_eps2 = 2.0 * eps.ln();
    let ln_g = ln_rho2 - 2.0 * ln_kappa_f - ln_eps2;
    let n = (2.0 * beta * (1.0 / delta).ln() / (eps * eps)).ceil();
    let ln_eta = (ln_kappa_f + ln_eps2 - 2f64.ln() - ln_rho2).min(-ln_kappa_f);
    let log_factor = (d_alpha / (kappa * eps * eps)).ln();
    let ln_m = if log_factor > 0.0 {
        ln_g.max(0.5f64.ln()) + log_factor.ln()
    } else {
        0.0
    };
    Ok(TheoreticalSchedule {
        d_alpha,
        ln_kappa_f,
        ln_lambda_f,
        ln_rho2,
        ln_g,
        n,
        ln_m,
        ln_eta,
        n_candidates: 10 * (1.0 / delta).ln().ceil() as usize,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncEstOutput {
    pub theta: Vec<f64>,
    pub theta0: Vec<f64>,
    pub candidates: Vec<Vec<f64>>,
    /// Candidates within the majority radius of the returned one.
    pub support: usize,
    pub majority_radius: f64,
    pub samples_used: usize,
}

/// Estimate the natural parameter from `samples`, all of which lie in the
/// truncation set, to accuracy `eps` with confidence `1 − delta`.
pub fn trunc_est(
    samples: &[Vec<f64>],
    accept: Truncation<'_>,
    family: &dyn ExpFamily,
    eps: f64,
    delta: f64,
    cfg: &TruncEstConfig,
    rng: &mut RngStream,
) -> Result<TruncEstOutput> {
    if !(eps > 0.0) || !(delta > 0.0 && delta < 1.0) {
        return domain("need eps > 0 and delta in (0, 1)");
    }
    if cfg.n_candidates == 0 || cfg.m == 0 || !(cfg.eta > 0.0) {
        return domain("TruncEst needs candidates, steps and a positive step size");
    }
    let need = cfg.samples_needed();
    if samples.len() < need {
        return Err(AuditError::InsufficientSamples {
            have: samples.len(),
            need,
        });
    }
    let c = family.constants();
    let eps_int = eps.max(cfg.eps_floor) / 3f64.sqrt();
    let radius = (eps_int * eps_int + 2.0 * c.ball_beta * (1.0 / c.positivity_alpha).ln()) / c.kappa;
    let theta0 = mle_from_moments(&samples[..cfg.n_init], family)?;
    let set = family.param_set();

    let mut candidates = Vec::with_capacity(cfg.n_candidates);
    for chain in 0..cfg.n_candidates {
        let start = cfg.n_init + chain * cfg.m;
        let mut theta = theta0.clone();
        let mut avg = vec![0.0; theta.len()];
        let burn = cfg.m / 2;
        for (j, z) in samples[start..start + cfg.m].iter().enumerate() {
            let v = sample_gradient(z, &theta, family, accept, rng, cfg.max_attempts)?;
            let step: Vec<f64> = theta.iter().zip(&v).map(|(t, g)| t - cfg.eta * g).collect();
            theta = project_to_feasible(&step, &theta0, radius, set)?;
            if j >= burn {
                avg.iter_mut().zip(&theta).for_each(|(s, t)| *s += t);
            }
        }
        if cfg.tail_average {
            let n = (cfg.m - burn) as f64;
            avg.iter_mut().for_each(|s| *s /= n);
            candidates.push(avg);
        } else {
            candidates.push(theta);
        }
    }

    let majority_radius = 2.0 * eps_int * 3f64.sqrt();
    let mut best: Option<(usize, usize)> = None;
    for (i, ci) in candidates.iter().enumerate() {
        let support = candidates
            .iter()
            .filter(|cj| distance(ci, cj) <= majority_radius)
            .count();
        if 2 * support > candidates.len() && best.is_none_or(|(_, s)| support > s) {
            best = Some((i, support));
        }
    }
    let (i, support) = best.ok_or(AuditError::NoMajorityCandidate)?;
    Ok(TruncEstOutput {
        theta: candidates[i].clone(),
        theta0,
        candidates,
        support,
        majority_radius,
        samples_used: need,
    })
}
