//! Exponential families `h(x) exp(θᵀT(x) − W(θ))` and their parameter sets.
//!
//! A family is a behaviour bundle behind the [`ExpFamily`] trait so callers can
//! plug in their own. Two families ship with exact samplers: the spherical
//! Gaussian with known variance and the one-dimensional Exponential.

use std::fmt::Debug;
use std::sync::Arc;

use rand_distr::{Distribution, Exp, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{domain, AuditError, Result};
use crate::rng::RngStream;

const CONTAINS_TOL: f64 = 1e-12;

/// Curvature, Lipschitz, ball and positivity constants of a family on its
/// parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessConstants {
    /// Lower bound on the eigenvalues of ∇²W.
    pub kappa: f64,
    /// Upper bound on the eigenvalues of ∇²W.
    pub lambda: f64,
    /// Lipschitz constant of W.
    pub lipschitz_l: f64,
    /// `B(θ*, 1/ball_beta)` is contained in the parameter set.
    pub ball_beta: f64,
    /// Floor on the survival probability `P[f = 1 | Y, A]`.
    pub positivity_alpha: f64,
}

impl SmoothnessConstants {
    pub fn new(
        kappa: f64,
        lambda: f64,
        lipschitz_l: f64,
        ball_beta: f64,
        positivity_alpha: f64,
    ) -> Result<Self> {
        let c = Self {
            kappa,
            lambda,
            lipschitz_l,
            ball_beta,
            positivity_alpha,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa > 0.0 && self.kappa <= self.lambda) {
            return domain(format!(
                "need 0 < kappa <= lambda, got kappa={} lambda={}",
                self.kappa, self.lambda
            ));
        }
        if self.kappa > 1.0 {
            return domain("kappa must be normalized to at most 1");
        }
        if self.lipschitz_l < 1.0 || self.ball_beta < 1.0 {
            return domain("lipschitz_l and ball_beta must be at least 1");
        }
        if !(self.positivity_alpha > 0.0 && self.positivity_alpha <= 1.0) {
            return domain("positivity_alpha must lie in (0, 1]");
        }
        Ok(())
    }
}

impl Default for SmoothnessConstants {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            lambda: 4.0,
            lipschitz_l: 4.0,
            ball_beta: 2.0,
            positivity_alpha: 0.05,
        }
    }
}

/// Convex set of admissible natural parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParamSet {
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl ParamSet {
    pub fn ball(center: Vec<f64>, radius: f64) -> Self {
        ParamSet::Ball { center, radius }
    }

    pub fn cube(dim: usize, lo: f64, hi: f64) -> Self {
        ParamSet::Box {
            lo: vec![lo; dim],
            hi: vec![hi; dim],
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            ParamSet::Ball { center, .. } => center.len(),
            ParamSet::Box { lo, .. } => lo.len(),
        }
    }

    pub fn contains(&self, theta: &[f64]) -> bool {
        if theta.len() != self.dim() {
            return false;
        }
        match self {
            ParamSet::Ball { center, radius } => {
                distance(theta, center) <= radius + CONTAINS_TOL
            }
            ParamSet::Box { lo, hi } => theta
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(t, (l, h))| *t >= l - CONTAINS_TOL && *t <= h + CONTAINS_TOL),
        }
    }

    /// Euclidean projection: radial scaling for balls, clamping for boxes.
    pub fn project(&self, theta: &[f64]) -> Vec<f64> {
        match self {
            ParamSet::Ball { center, radius } => project_to_ball(theta, center, *radius),
            ParamSet::Box { lo, hi } => theta
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(t, (l, h))| t.clamp(*l, *h))
                .collect(),
        }
    }
}

pub(crate) fn project_to_ball(theta: &[f64], center: &[f64], radius: f64) -> Vec<f64> {
    let dist = distance(theta, center);
    if dist <= radius {
        return theta.to_vec();
    }
    let scale = radius / dist;
    theta
        .iter()
        .zip(center)
        .map(|(t, c)| c + (t - c) * scale)
        .collect()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// An exponential family with density `h(x) exp(θᵀT(x) − W(θ))`.
pub trait ExpFamily: Debug + Send + Sync {
    fn name(&self) -> &str;

    /// Dimension of θ and of T(x).
    fn dim(&self) -> usize;

    /// Dimension of a point x.
    fn point_dim(&self) -> usize {
        self.dim()
    }

    fn log_base_measure(&self, x: &[f64]) -> f64;
    fn suff_stat(&self, x: &[f64]) -> Vec<f64>;
    fn log_partition(&self, theta: &[f64]) -> f64;
    fn grad_log_partition(&self, theta: &[f64]) -> Vec<f64>;

    /// Exact draw; callers are expected to have checked `theta`.
    fn sample_unchecked(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64>;

    fn constants(&self) -> &SmoothnessConstants;
    fn param_set(&self) -> &ParamSet;

    fn in_support(&self, _x: &[f64]) -> bool {
        true
    }

    /// Highest polynomial degree among the components of T.
    fn suff_stat_degree(&self) -> usize {
        1
    }

    /// Closed-form inverse of the mean map `θ ↦ ∇W(θ)`, when available.
    fn natural_from_mean(&self, _mean: &[f64]) -> Option<Result<Vec<f64>>> {
        None
    }
}

pub type FamilyRef = Arc<dyn ExpFamily>;

/// `log h(x) + θᵀT(x) − W(θ)`.
pub fn log_density(family: &dyn ExpFamily, theta: &[f64], x: &[f64]) -> Result<f64> {
    check_param(family, theta)?;
    if !family.in_support(x) {
        return Ok(f64::NEG_INFINITY);
    }
    Ok(log_density_unchecked(family, theta, x))
}

pub(crate) fn log_density_unchecked(family: &dyn ExpFamily, theta: &[f64], x: &[f64]) -> f64 {
    family.log_base_measure(x) + dot(theta, &family.suff_stat(x)) - family.log_partition(theta)
}

pub fn sample(family: &dyn ExpFamily, theta: &[f64], rng: &mut RngStream) -> Result<Vec<f64>> {
    check_param(family, theta)?;
    Ok(family.sample_unchecked(theta, rng))
}

pub fn check_param(family: &dyn ExpFamily, theta: &[f64]) -> Result<()> {
    if theta.len() != family.dim() || !family.param_set().contains(theta) {
        return Err(AuditError::ParamOutOfSet {
            theta: theta.to_vec(),
        });
    }
    Ok(())
}

/// Spherical Gaussian `N(μ, σ² I)` with known σ². Natural parameter θ = μ/σ².
#[derive(Debug, Clone)]
pub struct GaussianFamily {
    dim: usize,
    sigma2: f64,
    constants: SmoothnessConstants,
    param_set: ParamSet,
}

impl GaussianFamily {
    /// Box parameter set `[-50, 50]^d` and the default constants.
    pub fn new(dim: usize, sigma2: f64) -> Result<Self> {
        Self::with_constants(
            dim,
            sigma2,
            SmoothnessConstants::default(),
            ParamSet::cube(dim, -50.0, 50.0),
        )
    }

    pub fn with_constants(
        dim: usize,
        sigma2: f64,
        constants: SmoothnessConstants,
        param_set: ParamSet,
    ) -> Result<Self> {
        if dim == 0 {
            return domain("Gaussian dimension must be positive");
        }
        if !(sigma2 > 0.0 && sigma2.is_finite()) {
            return domain(format!("sigma2 must be positive, got {sigma2}"));
        }
        if param_set.dim() != dim {
            return domain("parameter set dimension mismatch");
        }
        constants.validate()?;
        Ok(Self {
            dim,
            sigma2,
            constants,
            param_set,
        })
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn natural_from_location(&self, mu: &[f64]) -> Vec<f64> {
        mu.iter().map(|m| m / self.sigma2).collect()
    }

    pub fn location_from_natural(&self, theta: &[f64]) -> Vec<f64> {
        theta.iter().map(|t| t * self.sigma2).collect()
    }
}

impl ExpFamily for GaussianFamily {
    fn name(&self) -> &str {
        "gaussian"
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn log_base_measure(&self, x: &[f64]) -> f64 {
        -dot(x, x) / (2.0 * self.sigma2)
    }

    fn suff_stat(&self, x: &[f64]) -> Vec<f64> {
        x.to_vec()
    }

    fn log_partition(&self, theta: &[f64]) -> f64 {
        0.5 * self.sigma2 * dot(theta, theta)
            + 0.5 * self.dim as f64 * (2.0 * std::f64::consts::PI * self.sigma2).ln()
    }

    fn grad_log_partition(&self, theta: &[f64]) -> Vec<f64> {
        self.location_from_natural(theta)
    }

    fn sample_unchecked(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let sd = self.sigma2.sqrt();
        theta
            .iter()
            .map(|t| {
                let z: f64 = StandardNormal.sample(rng);
                t * self.sigma2 + sd * z
            })
            .collect()
    }

    fn constants(&self) -> &SmoothnessConstants {
        &self.constants
    }

    fn param_set(&self) -> &ParamSet {
        &self.param_set
    }

    fn natural_from_mean(&self, mean: &[f64]) -> Option<Result<Vec<f64>>> {
        Some(Ok(self.natural_from_location(mean)))
    }
}

/// One-dimensional Exponential family: θ < 0 is minus the rate, T(x) = x,
/// W(θ) = −log(−θ).
#[derive(Debug, Clone)]
pub struct ExponentialFamily {
    constants: SmoothnessConstants,
    param_set: ParamSet,
}

impl ExponentialFamily {
    /// θ ∈ [−10, −0.1]; on that box ∇²W = θ⁻² ∈ [0.01, 100] and |∇W| ≤ 10.
    pub fn new() -> Self {
        Self {
            constants: SmoothnessConstants {
                kappa: 0.01,
                lambda: 100.0,
                lipschitz_l: 10.0,
                ball_beta: 20.0,
                positivity_alpha: 0.05,
            },
            param_set: ParamSet::cube(1, -10.0, -0.1),
        }
    }

    pub fn with_param_set(param_set: ParamSet, constants: SmoothnessConstants) -> Result<Self> {
        if param_set.dim() != 1 {
            return domain("Exponential family is one-dimensional");
        }
        let negative = match &param_set {
            ParamSet::Box { hi, .. } => hi[0] < 0.0,
            ParamSet::Ball { center, radius } => center[0] + radius < 0.0,
        };
        if !negative {
            return domain("Exponential natural parameter set must lie in θ < 0");
        }
        constants.validate()?;
        Ok(Self {
            constants,
            param_set,
        })
    }
}

impl Default for ExponentialFamily {
    fn default() -> Self {
        Self::new()
    }
}

impl ExpFamily for ExponentialFamily {
    fn name(&self) -> &str {
        "exponential"
    }

    fn dim(&self) -> usize {
        1
    }

    fn log_base_measure(&self, x: &[f64]) -> f64 {
        if x[0] >= 0.0 {
            0.0
        } else {
            f64::NEG_INFINITY
        }
    }

    fn suff_stat(&self, x: &[f64]) -> Vec<f64> {
        vec![x[0]]
    }

    fn log_partition(&self, theta: &[f64]) -> f64 {
        -(-theta[0]).ln()
    }

    fn grad_log_partition(&self, theta: &[f64]) -> Vec<f64> {
        vec![-1.0 / theta[0]]
    }

    fn sample_unchecked(&self, theta: &[f64], rng: &mut RngStream) -> Vec<f64> {
        let exp = Exp::new(-theta[0]).expect("rate is positive inside the parameter set");
        vec![exp.sample(rng)]
    }

    fn constants(&self) -> &SmoothnessConstants {
        &self.constants
    }

    fn param_set(&self) -> &ParamSet {
        &self.param_set
    }

    fn in_support(&self, x: &[f64]) -> bool {
        x[0] >= 0.0
    }

    fn natural_from_mean(&self, mean: &[f64]) -> Option<Result<Vec<f64>>> {
        if mean[0] > 0.0 {
            Some(Ok(vec![-1.0 / mean[0]]))
        } else {
            Some(Err(AuditError::DegenerateMoments(mean.to_vec())))
        }
    }
}
