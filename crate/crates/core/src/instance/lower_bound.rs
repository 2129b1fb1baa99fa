//! The two-instance construction behind the label-complexity lower bound.
//!
//! Both instances share `P[f = 1 | A = a]` and `P[Y = 1 | f = 1, A = a]`, so an
//! auditor that only sees positives and group membership cannot tell them
//! apart; they differ only inside the negatives of group 1.

use std::any::Any;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use super::{AuditInstance, Classifier, ClassifierKind, Draw, Group, JointTable};
use crate::error::{domain, AuditError, Result};
use crate::rng::RngStream;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    Fair,
    Unfair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundInstance {
    pub eps: f64,
    pub p: f64,
    pub q: f64,
    pub hypothesis: Hypothesis,
    pub group_probs: [f64; 2],
}

/// `f(x, a)` for lower-bound instances. Features are `x = [y + u]` with
/// `u ~ U(0, 1)`, and the rule accepts iff `u < rate[a][y]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LowerBoundClassifier {
    pub rates: [[f64; 2]; 2],
}

impl Classifier for LowerBoundClassifier {
    fn predict(&self, x: &[f64], a: Group) -> bool {
        let y = x[0].floor().clamp(0.0, 1.0);
        let u = x[0] - y;
        u < self.rates[a as usize][y as usize]
    }

    fn kind(&self) -> ClassifierKind {
        ClassifierKind::Custom
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

fn rat(v: f64) -> BigRational {
    BigRational::from_float(v).expect("finite input")
}

fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

impl LowerBoundInstance {
    pub fn new(eps: f64, p: f64, q: f64, hypothesis: Hypothesis) -> Result<Self> {
        if !(eps > 0.0 && eps < 0.25) {
            return domain(format!("eps must lie in (0, 1/4), got {eps}"));
        }
        if !(p > 0.0 && p < 0.5) || !(q > 0.0 && q < 0.5) {
            return domain(format!("p and q must lie in (0, 1/2), got p={p} q={q}"));
        }
        if q * (1.0 + 4.0 * eps) > 1.0 {
            return domain("q(1 + 4 eps) must not exceed 1");
        }
        let inst = Self {
            eps,
            p,
            q,
            hypothesis,
            group_probs: [0.5, 0.5],
        };
        for a in 0..2 {
            for y in 0..2 {
                let r = inst.rate(a, y);
                if !(0.0..=1.0).contains(&r) {
                    return domain(format!(
                        "P[f=1 | Y={y}, A={a}] = {r} is not a probability for these (eps, p, q)"
                    ));
                }
            }
        }
        Ok(inst)
    }

    pub fn with_group_probs(mut self, p1: f64) -> Result<Self> {
        if !(p1 > 0.0 && p1 < 1.0) {
            return domain(format!("P[A=1] must lie in (0, 1), got {p1}"));
        }
        self.group_probs = [1.0 - p1, p1];
        Ok(self)
    }

    fn unfair_group(&self, a: usize) -> bool {
        self.hypothesis == Hypothesis::Unfair && a == 1
    }

    /// `P[Y = 1 | A = a]`.
    pub fn label_prob(&self, a: usize) -> f64 {
        if self.unfair_group(a) {
            self.q * (1.0 + 4.0 * self.eps)
        } else {
            self.q
        }
    }

    /// `P[f = 1 | Y = y, A = a]`.
    pub fn rate(&self, a: usize, y: usize) -> f64 {
        let (e, p, q) = (self.eps, self.p, self.q);
        match (self.unfair_group(a), y) {
            (false, 1) => 0.5,
            (false, _) => p / (2.0 * (1.0 - q)),
            (true, 1) => 1.0 / (2.0 * (1.0 + 4.0 * e)),
            (true, _) => p / (2.0 * (1.0 - q - 4.0 * e * q)),
        }
    }

    pub fn classifier(&self) -> LowerBoundClassifier {
        LowerBoundClassifier {
            rates: [
                [self.rate(0, 0), self.rate(0, 1)],
                [self.rate(1, 0), self.rate(1, 1)],
            ],
        }
    }

    /// Exact `P[f = 1 | Y = y, A = a]`, indexed `[a][y]`, from the binary
    /// expansions of the stored parameters.
    pub fn rates_rational(&self) -> [[BigRational; 2]; 2] {
        let (e, p, q) = (rat(self.eps), rat(self.p), rat(self.q));
        let one = BigRational::one();
        let two = BigRational::from_integer(BigInt::from(2));
        let four = BigRational::from_integer(BigInt::from(4));
        let fair = [&p / (&two * (&one - &q)), &one / &two];
        let unfair = [
            &p / (&two * (&one - &q - &four * &e * &q)),
            &one / (&two * (&one + &four * &e)),
        ];
        let g1 = if self.hypothesis == Hypothesis::Unfair {
            unfair
        } else {
            fair.clone()
        };
        [fair, g1]
    }

    /// Exact `P[Y = 1 | A = a]`.
    pub fn label_prob_rational(&self, a: usize) -> BigRational {
        let q = rat(self.q);
        if self.unfair_group(a) {
            let four = BigRational::from_integer(BigInt::from(4));
            &q * (BigRational::one() + four * rat(self.eps))
        } else {
            q
        }
    }

    pub fn eod_rational(&self) -> BigRational {
        let r = self.rates_rational();
        let d0 = (&r[0][0] - &r[1][0]).abs();
        let d1 = (&r[0][1] - &r[1][1]).abs();
        if d0 > d1 {
            d0
        } else {
            d1
        }
    }

    /// `0` under FAIR and the true-positive gap `2ε/(1+4ε)` under UNFAIR,
    /// exactly. Equals [`Self::eod_rational`] when [`Self::tpr_gap_dominates`].
    pub fn closed_form_eod_rational(&self) -> BigRational {
        if self.hypothesis == Hypothesis::Fair {
            return BigRational::zero();
        }
        let e = rat(self.eps);
        let two = BigRational::from_integer(BigInt::from(2));
        let four = BigRational::from_integer(BigInt::from(4));
        &two * &e / (BigRational::one() + four * &e)
    }

    /// Whether the true-positive gap is at least the false-positive gap.
    pub fn tpr_gap_dominates(&self) -> bool {
        let r = self.rates_rational();
        (&r[0][1] - &r[1][1]).abs() >= (&r[0][0] - &r[1][0]).abs()
    }

    /// `(P[f = 1 | A = a], P[Y = 1 | f = 1, A = a])`, exactly.
    pub fn positive_view_rational(&self, a: usize) -> (BigRational, BigRational) {
        let r = &self.rates_rational()[a];
        let q1 = self.label_prob_rational(a);
        let q0 = BigRational::one() - &q1;
        let pos1 = &q1 * &r[1];
        let pos = &pos1 + &q0 * &r[0];
        if pos.is_zero() {
            return (pos, BigRational::zero());
        }
        let share = &pos1 / &pos;
        (pos, share)
    }

    /// `P[f = 0, Y = 1 | A = a]`.
    pub fn negative_positive_mass(&self, a: usize) -> f64 {
        self.label_prob(a) * (1.0 - self.rate(a, 1))
    }
}

impl AuditInstance for LowerBoundInstance {
    fn n_groups(&self) -> usize {
        2
    }

    fn feature_dim(&self) -> usize {
        1
    }

    fn draw(&self, rng: &mut RngStream) -> Draw {
        let a = Group::from(rng.bernoulli(self.group_probs[1]));
        let y = u8::from(rng.bernoulli(self.label_prob(a as usize)));
        let u = rng.uniform();
        Draw {
            x: vec![f64::from(y) + u],
            a,
            y,
        }
    }

    fn exact_joint(&self, classifier: &dyn Classifier) -> Option<Result<JointTable>> {
        let own = classifier.as_any().downcast_ref::<LowerBoundClassifier>()?;
        if *own != self.classifier() {
            return Some(Err(AuditError::Domain(
                "classifier does not belong to this instance".into(),
            )));
        }
        let rates = self.rates_rational();
        let mut t = JointTable::zeros(2);
        for a in 0..2 {
            let pa = rat(self.group_probs[a]);
            let q1 = self.label_prob_rational(a);
            let qs = [BigRational::one() - &q1, q1];
            for y in 0..2 {
                let cell = &pa * &qs[y];
                let pos = &cell * &rates[a][y];
                let neg = &cell - &pos;
                t.set(true, y as u8, a as Group, to_f64(&pos));
                t.set(false, y as u8, a as Group, to_f64(&neg));
            }
        }
        Some(Ok(t))
    }
}

/// `(FAIR, UNFAIR)` instances for a given `(eps, p, q)`.
pub fn make_lower_bound_pair(
    eps: f64,
    p: f64,
    q: f64,
) -> Result<(LowerBoundInstance, LowerBoundInstance)> {
    Ok((
        LowerBoundInstance::new(eps, p, q, Hypothesis::Fair)?,
        LowerBoundInstance::new(eps, p, q, Hypothesis::Unfair)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn fair_instance_has_zero_eod() {
        let (fair, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        assert!(fair.eod_rational().is_zero());
    }

    #[test]
    fn unfair_gap_is_one_seventh_at_tenth() {
        let (_, unfair) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        assert_abs_diff_eq!(to_f64(&unfair.eod_rational()), 1.0 / 7.0, epsilon = 1e-15);
        assert!(unfair.tpr_gap_dominates());
        assert_eq!(unfair.eod_rational(), unfair.closed_form_eod_rational());
        assert_abs_diff_eq!(unfair.label_prob(1), 0.42, epsilon = 1e-15);
        assert_abs_diff_eq!(unfair.negative_positive_mass(1), 0.15 * 1.8, epsilon = 1e-15);
    }

    #[test]
    fn false_positive_gap_can_dominate() {
        let inst = LowerBoundInstance::new(0.2, 0.38, 0.45, Hypothesis::Unfair).unwrap();
        let r = inst.rates_rational();
        let tpr_gap = (&r[0][1] - &r[1][1]).abs();
        let fpr_gap = (&r[0][0] - &r[1][0]).abs();
        assert!(fpr_gap > tpr_gap);
        assert!(!inst.tpr_gap_dominates());
        assert_ne!(inst.eod_rational(), inst.closed_form_eod_rational());
        assert_eq!(inst.eod_rational(), fpr_gap);
        assert!(to_f64(&inst.eod_rational()) > inst.eps);
    }

    #[test]
    fn positive_view_matches() {
        let (fair, unfair) = make_lower_bound_pair(0.2, 0.1, 0.4).unwrap();
        for a in 0..2 {
            assert_eq!(fair.positive_view_rational(a), unfair.positive_view_rational(a));
        }
    }

    #[test]
    fn domain_checks() {
        assert!(LowerBoundInstance::new(0.25, 0.3, 0.3, Hypothesis::Fair).is_err());
        assert!(LowerBoundInstance::new(0.1, 0.5, 0.3, Hypothesis::Fair).is_err());
        assert!(LowerBoundInstance::new(0.1, 0.3, 0.0, Hypothesis::Fair).is_err());
    }

    #[test]
    fn classifier_reproduces_rates() {
        let inst = LowerBoundInstance::new(0.1, 0.3, 0.3, Hypothesis::Unfair).unwrap();
        let c = inst.classifier();
        let mut rng = RngStream::new(3);
        let mut hits = [[0usize; 2]; 2];
        let mut seen = [[0usize; 2]; 2];
        for _ in 0..200_000 {
            let d = inst.draw(&mut rng);
            seen[d.a as usize][d.y as usize] += 1;
            hits[d.a as usize][d.y as usize] += usize::from(c.predict(&d.x, d.a));
        }
        for a in 0..2 {
            for y in 0..2 {
                let r = hits[a][y] as f64 / seen[a][y] as f64;
                assert!((r - inst.rate(a, y)).abs() < 0.01, "a={a} y={y} r={r}");
            }
        }
    }
}
