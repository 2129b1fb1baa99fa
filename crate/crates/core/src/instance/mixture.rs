use std::sync::Arc;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use super::{AuditInstance, Classifier, Draw, Group, GroupLinearClassifier, JointTable};
use crate::error::{domain, AuditError, Result};
use crate::family::{
    check_param, dot, ExponentialFamily, FamilyRef, GaussianFamily, SmoothnessConstants,
};
use crate::rng::RngStream;

/// Standard normal CDF.
pub(crate) fn phi(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// Minimum distance between the two label-conditional means of a group
/// that keeps the MAP labeller accurate enough for the mixture audit.
pub fn separation_radius(
    c: &SmoothnessConstants,
    eps: f64,
    q_max: f64,
    q_min: f64,
) -> Result<f64> {
    c.validate()?;
    if !(eps > 0.0 && eps < 1.0) {
        return domain(format!("eps must lie in (0, 1), got {eps}"));
    }
    if !(q_min > 0.0 && q_min <= q_max && q_max < 1.0) {
        return domain(format!("need 0 < q_min <= q_max < 1, got {q_min}, {q_max}"));
    }
    let b = c.ball_beta;
    let coef = (48.0 * c.lipschitz_l.max(b) * b + 3.0 * c.lambda) / (4.0 * c.kappa * b * b);
    let log_term = (10.0 * q_max / (q_min * eps)).ln();
    Ok((coef * log_term).max(0.0).sqrt())
}

/// Serialized form of a mixture instance. `means[a][y]` holds the
/// location of cell `(y, a)`; for the exponential family it is the scalar
/// mean `1 / rate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureSpecJson {
    pub family: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
    pub group_probs: Vec<f64>,
    /// `P[Y = 1 | A = a]`.
    pub label_probs: Vec<f64>,
    pub means: Vec<[Vec<f64>; 2]>,
    #[serde(default)]
    pub constants: Option<SmoothnessConstants>,
}

#[derive(Debug, Clone)]
pub struct MixtureAuditInstance {
    family: FamilyRef,
    sigma2: Option<f64>,
    group_probs: Vec<f64>,
    label_probs: Vec<f64>,
    /// Natural parameters, `[a][y]`.
    thetas: Vec<[Vec<f64>; 2]>,
    spec: MixtureSpecJson,
}

impl MixtureAuditInstance {
    pub fn from_spec(spec: MixtureSpecJson) -> Result<Self> {
        let k = spec.group_probs.len();
        if k < 2 || spec.label_probs.len() != k || spec.means.len() != k {
            return domain("group_probs, label_probs and means must share a length >= 2");
        }
        let total: f64 = spec.group_probs.iter().sum();
        if spec.group_probs.iter().any(|&p| p <= 0.0) || (total - 1.0).abs() > 1e-9 {
            return domain("group_probs must be positive and sum to 1");
        }
        if spec.label_probs.iter().any(|&q| !(q > 0.0 && q < 1.0)) {
            return domain("label_probs must lie in (0, 1)");
        }
        let (family, sigma2): (FamilyRef, Option<f64>) = match spec.family.as_str() {
            "gaussian" => {
                let s2 = spec
                    .sigma2
                    .ok_or_else(|| AuditError::Domain("gaussian mixture needs sigma2".into()))?;
                let fam = match spec.constants {
                    Some(c) => GaussianFamily::with_constants(
                        spec.dim,
                        s2,
                        c,
                        crate::family::ParamSet::cube(spec.dim, -50.0, 50.0),
                    )?,
                    None => GaussianFamily::new(spec.dim, s2)?,
                };
                (Arc::new(fam), Some(s2))
            }
            "exponential" => {
                if spec.dim != 1 {
                    return domain("exponential mixture is one-dimensional");
                }
                (Arc::new(ExponentialFamily::new()), None)
            }
            other => return domain(format!("unknown family {other:?}")),
        };
        let mut thetas = Vec::with_capacity(k);
        for cells in &spec.means {
            let mut pair: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
            for y in 0..2 {
                let m = &cells[y];
                if m.len() != spec.dim {
                    return domain("mean dimension mismatch");
                }
                let theta = match sigma2 {
                    Some(s2) => m.iter().map(|v| v / s2).collect(),
                    None => {
                        if m[0] <= 0.0 {
                            return domain("exponential means must be positive");
                        }
                        vec![-1.0 / m[0]]
                    }
                };
                check_param(family.as_ref(), &theta)?;
                pair[y] = theta;
            }
            thetas.push(pair);
        }
        Ok(Self {
            family,
            sigma2,
            group_probs: spec.group_probs.clone(),
            label_probs: spec.label_probs.clone(),
            thetas,
            spec,
        })
    }

    pub fn spec(&self) -> &MixtureSpecJson {
        &self.spec
    }

    pub fn family(&self) -> &FamilyRef {
        &self.family
    }

    pub fn sigma2(&self) -> Option<f64> {
        self.sigma2
    }

    pub fn group_probs(&self) -> &[f64] {
        &self.group_probs
    }

    pub fn label_probs(&self) -> &[f64] {
        &self.label_probs
    }

    /// Natural parameter of cell `(y, a)`.
    pub fn theta(&self, y: u8, a: Group) -> &[f64] {
        &self.thetas[a as usize][y as usize]
    }

    pub fn mean(&self, y: u8, a: Group) -> &[f64] {
        &self.spec.means[a as usize][y as usize]
    }

    /// `P[Y = y, A = a]`.
    pub fn cell_prob(&self, y: u8, a: Group) -> f64 {
        let q1 = self.label_probs[a as usize];
        self.group_probs[a as usize] * if y == 1 { q1 } else { 1.0 - q1 }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.spec)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Self::from_spec(serde_json::from_str(s)?)
    }
}

impl AuditInstance for MixtureAuditInstance {
    fn n_groups(&self) -> usize {
        self.group_probs.len()
    }

    fn feature_dim(&self) -> usize {
        self.spec.dim
    }

    fn draw(&self, rng: &mut RngStream) -> Draw {
        let u = rng.uniform();
        let mut acc = 0.0;
        let mut a = self.group_probs.len() - 1;
        for (i, p) in self.group_probs.iter().enumerate() {
            acc += p;
            if u < acc {
                a = i;
                break;
            }
        }
        let y = u8::from(rng.bernoulli(self.label_probs[a]));
        let x = self.family.sample_unchecked(&self.thetas[a][y as usize], rng);
        Draw {
            x,
            a: a as Group,
            y,
        }
    }

    fn exact_joint(&self, classifier: &dyn Classifier) -> Option<Result<JointTable>> {
        let s2 = self.sigma2?;
        let lin = classifier.as_any().downcast_ref::<GroupLinearClassifier>()?;
        if lin.weights.len() != self.n_groups() || lin.weights[0].len() != self.spec.dim {
            return Some(domain("linear classifier does not match the instance"));
        }
        let sigma = s2.sqrt();
        let mut t = JointTable::zeros(self.n_groups());
        for a in 0..self.n_groups() {
            let w = &lin.weights[a];
            let norm = dot(w, w).sqrt();
            for y in 0..2u8 {
                let m = dot(w, self.mean(y, a as Group)) + lin.biases[a];
                let rate = if norm == 0.0 {
                    if m >= 0.0 {
                        1.0
                    } else {
                        0.0
                    }
                } else {
                    phi(m / (sigma * norm))
                };
                let cell = self.cell_prob(y, a as Group);
                t.set(true, y, a as Group, cell * rate);
                t.set(false, y, a as Group, cell * (1.0 - rate));
            }
        }
        Some(Ok(t))
    }
}

/// Inputs for a random well-separated Gaussian mixture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureConfig {
    pub dim: usize,
    pub sigma2: f64,
    pub group_probs: Vec<f64>,
    pub label_probs: Vec<f64>,
    pub eps: f64,
    #[serde(default)]
    pub constants: SmoothnessConstants,
    #[serde(default)]
    pub separation: SeparationSpace,
}

/// Where the separation radius is measured. The natural parameters of the
/// Gaussian are `μ/σ²`, so `Natural` places the means `σ²·r` apart.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeparationSpace {
    #[default]
    Mean,
    Natural,
}

/// Per group, draws `μ_{1,a}` uniformly from `[−1, 1]^d` and places
/// `μ_{0,a}` at exactly the separation radius along a random direction.
pub fn generate_separated_mixture(
    cfg: &MixtureConfig,
    rng: &mut RngStream,
) -> Result<MixtureAuditInstance> {
    if cfg.dim == 0 {
        return domain("dimension must be positive");
    }
    let mut means = Vec::with_capacity(cfg.group_probs.len());
    for &q1 in &cfg.label_probs {
        if !(q1 > 0.0 && q1 < 1.0) {
            return domain("label_probs must lie in (0, 1)");
        }
        let mut r =
            separation_radius(&cfg.constants, cfg.eps, q1.max(1.0 - q1), q1.min(1.0 - q1))?;
        if cfg.separation == SeparationSpace::Natural {
            r *= cfg.sigma2;
        }
        let mu1: Vec<f64> = (0..cfg.dim).map(|_| 2.0 * rng.uniform() - 1.0).collect();
        let u = random_unit(cfg.dim, rng);
        let mu0: Vec<f64> = mu1.iter().zip(&u).map(|(m, ui)| m + r * ui).collect();
        means.push([mu0, mu1]);
    }
    MixtureAuditInstance::from_spec(MixtureSpecJson {
        family: "gaussian".into(),
        dim: cfg.dim,
        sigma2: Some(cfg.sigma2),
        group_probs: cfg.group_probs.clone(),
        label_probs: cfg.label_probs.clone(),
        means,
        constants: Some(cfg.constants),
    })
}

fn random_unit(dim: usize, rng: &mut RngStream) -> Vec<f64> {
    use rand_distr::{Distribution, StandardNormal};
    loop {
        let v: Vec<f64> = (0..dim).map(|_| StandardNormal.sample(rng)).collect();
        let n = dot(&v, &v).sqrt();
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Per-group halfspace classifiers for a Gaussian mixture whose exact
/// EOD can be dialed in.
///
/// Group `a` accepts iff `w_a·(x − μ_{1,a}) ≥ t_a` with unit `w_a` chosen so
/// that `w_a·(μ_{0,a} − μ_{1,a}) = −offset·σ`. Then
/// `P[f=1 | Y=1, a] = Φ(−t_a/σ)` and `P[f=1 | Y=0, a] = Φ((−offset·σ − t_a)/σ)`.
/// Group 0 uses `t = 0`; group 1 is shifted until the EOD hits the target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearDesign {
    /// Projected gap between the label-conditional means, in units of σ.
    pub offset: f64,
}

impl Default for LinearDesign {
    fn default() -> Self {
        Self { offset: 0.5 }
    }
}

impl LinearDesign {
    pub fn classifier(
        &self,
        inst: &MixtureAuditInstance,
        target_eod: f64,
    ) -> Result<GroupLinearClassifier> {
        let s2 = inst
            .sigma2()
            .ok_or_else(|| AuditError::Domain("linear design needs a gaussian mixture".into()))?;
        if inst.n_groups() != 2 {
            return domain("linear design supports two groups");
        }
        if !(0.0..1.0).contains(&target_eod) {
            return domain(format!("target EOD must lie in [0, 1), got {target_eod}"));
        }
        let sigma = s2.sqrt();
        let mut dirs = Vec::with_capacity(2);
        let mut offsets = [0.0; 2];
        for a in 0..2u32 {
            let mu0 = inst.mean(0, a);
            let mu1 = inst.mean(1, a);
            let diff: Vec<f64> = mu0.iter().zip(mu1).map(|(p, q)| p - q).collect();
            let r = dot(&diff, &diff).sqrt();
            if r == 0.0 {
                return domain("label-conditional means coincide");
            }
            let u: Vec<f64> = diff.iter().map(|v| v / r).collect();
            let c = if u.len() == 1 {
                r
            } else {
                (self.offset * sigma).min(r)
            };
            let cos = c / r;
            let sin = (1.0 - cos * cos).max(0.0).sqrt();
            let v = orthogonal_unit(&u);
            let w: Vec<f64> = u.iter().zip(&v).map(|(ui, vi)| -cos * ui + sin * vi).collect();
            offsets[a as usize] = c / sigma;
            dirs.push(w);
        }
        let gap = |s: f64| -> f64 {
            let d1 = (phi(s) - 0.5).abs();
            let d0 = (phi(s - offsets[1]) - phi(-offsets[0])).abs();
            d1.max(d0)
        };
        let s = if target_eod == 0.0 && offsets[0] == offsets[1] {
            0.0
        } else {
            let (mut lo, mut hi) = (0.0, 40.0);
            if gap(lo) > target_eod || gap(hi) < target_eod {
                return domain(format!("target EOD {target_eod} is not reachable"));
            }
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                if gap(mid) < target_eod {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            0.5 * (lo + hi)
        };
        let thresholds = [0.0, -s * sigma];
        let biases = (0..2)
            .map(|a| -dot(&dirs[a], inst.mean(1, a as Group)) - thresholds[a])
            .collect();
        GroupLinearClassifier::new(dirs, biases)
    }
}

/// A unit vector orthogonal to unit `u` (zero vector when `u` is 1-d).
fn orthogonal_unit(u: &[f64]) -> Vec<f64> {
    if u.len() < 2 {
        return vec![0.0; u.len()];
    }
    let k = (0..u.len())
        .min_by(|&i, &j| u[i].abs().total_cmp(&u[j].abs()))
        .unwrap_or(0);
    let mut v: Vec<f64> = u.iter().map(|ui| -u[k] * ui).collect();
    v[k] += 1.0;
    let n = dot(&v, &v).sqrt();
    v.into_iter().map(|x| x / n).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{population_summary, SummaryMode};
    use approx::assert_abs_diff_eq;

    fn cfg() -> MixtureConfig {
        MixtureConfig {
            dim: 5,
            sigma2: 4.0,
            group_probs: vec![0.3, 0.7],
            label_probs: vec![0.4, 0.7],
            eps: 0.1,
            constants: SmoothnessConstants::default(),
            separation: SeparationSpace::Mean,
        }
    }

    #[test]
    fn radius_example() {
        let r = separation_radius(&SmoothnessConstants::default(), 0.1, 0.7, 0.3).unwrap();
        assert_abs_diff_eq!(r, 11.617, epsilon = 1e-3);
    }

    #[test]
    fn generated_means_are_separated() {
        let inst = generate_separated_mixture(&cfg(), &mut RngStream::new(1)).unwrap();
        for a in 0..2u32 {
            let q1 = inst.label_probs()[a as usize];
            let r = separation_radius(
                &SmoothnessConstants::default(),
                0.1,
                q1.max(1.0 - q1),
                q1.min(1.0 - q1),
            )
            .unwrap();
            let d = crate::family::distance(inst.mean(0, a), inst.mean(1, a));
            assert_abs_diff_eq!(d, r, epsilon = 1e-9);
        }
    }

    #[test]
    fn natural_separation_scales_means() {
        let mut c = cfg();
        c.separation = SeparationSpace::Natural;
        let inst = generate_separated_mixture(&c, &mut RngStream::new(1)).unwrap();
        let r = separation_radius(&SmoothnessConstants::default(), 0.1, 0.6, 0.4).unwrap();
        let d = crate::family::distance(inst.theta(0, 0), inst.theta(1, 0));
        assert_abs_diff_eq!(d, r, epsilon = 1e-9);
    }

    #[test]
    fn spec_roundtrip() {
        let inst = generate_separated_mixture(&cfg(), &mut RngStream::new(2)).unwrap();
        let back = MixtureAuditInstance::from_json(&inst.to_json().unwrap()).unwrap();
        assert_eq!(back.spec(), inst.spec());
    }

    #[test]
    fn design_hits_target_eod() {
        let inst = generate_separated_mixture(&cfg(), &mut RngStream::new(3)).unwrap();
        for target in [0.0, 0.05, 0.2] {
            let c = LinearDesign::default().classifier(&inst, target).unwrap();
            let s = population_summary(&inst, &c, SummaryMode::Exact).unwrap();
            assert_abs_diff_eq!(s.eod, target, epsilon = 1e-9);
        }
    }

    #[test]
    fn exact_summary_agrees_with_monte_carlo() {
        let inst = generate_separated_mixture(&cfg(), &mut RngStream::new(4)).unwrap();
        let c = LinearDesign::default().classifier(&inst, 0.2).unwrap();
        let exact = population_summary(&inst, &c, SummaryMode::Exact).unwrap();
        let mc = population_summary(
            &inst,
            &c,
            SummaryMode::MonteCarlo {
                n: 400_000,
                seed: 9,
            },
        )
        .unwrap();
        for a in 0..2 {
            for y in 0..2 {
                assert!((exact.rates[a][y] - mc.rates[a][y]).abs() < 0.01);
            }
        }
    }
}
