//! Partial-feedback access to a population, with cost accounting, and the
//! historical database of past decisions.
//!
//! Group membership and the decision `f` are always visible. For `f = 1`
//! the features and label are visible as well. For `f = 0` the auditor pays
//! `c_feat` once per individual to see the features, or to see features and
//! label together; a paid label that comes back `Y = 0` adds `c_lab`.

use std::io::{Read, Write};
use std::ops::ControlFlow;

use serde::{Deserialize, Serialize};

use crate::error::{domain, AuditError, Result};
use crate::instance::{AuditInstance, Classifier, Group};
use crate::rng::RngStream;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostLedger {
    pub c_feat: f64,
    pub c_lab: f64,
    pub total_cost: f64,
    /// Negatives whose label (and features) were bought.
    pub n_label_requests: u64,
    /// Negatives whose features, and only features, were bought.
    pub n_feature_requests: u64,
    /// Paid labels that came back `Y = 0`.
    pub n_defaults: u64,
    pub n_drawn: u64,
}

impl CostLedger {
    pub fn new(c_feat: f64, c_lab: f64) -> Result<Self> {
        if !(c_feat >= 0.0 && c_lab >= 0.0 && c_feat.is_finite() && c_lab.is_finite()) {
            return domain(format!("costs must be finite and non-negative, got ({c_feat}, {c_lab})"));
        }
        Ok(Self {
            c_feat,
            c_lab,
            total_cost: 0.0,
            n_label_requests: 0,
            n_feature_requests: 0,
            n_defaults: 0,
            n_drawn: 0,
        })
    }

    /// Part of the total charged through `c_lab`.
    pub fn label_cost(&self) -> f64 {
        self.c_lab * self.n_defaults as f64
    }

    /// `c_feat·(labels + features) + c_lab·defaults`, recomputed from counts.
    pub fn recomputed_total(&self) -> f64 {
        self.c_feat * (self.n_label_requests + self.n_feature_requests) as f64
            + self.c_lab * self.n_defaults as f64
    }
}

/// An individual drawn from the population. Hidden fields are reachable
/// only through the environment's reveal calls.
#[derive(Debug, Clone)]
pub struct Individual {
    id: u64,
    a: Group,
    f: bool,
    x: Vec<f64>,
    y: u8,
    feature_revealed: bool,
    label_revealed: bool,
}

impl Individual {
    pub fn id(&self) -> u64 {
        self.id
    }

    pub fn a(&self) -> Group {
        self.a
    }

    pub fn f(&self) -> bool {
        self.f
    }

    pub fn features(&self) -> Result<&[f64]> {
        if self.f || self.feature_revealed || self.label_revealed {
            Ok(&self.x)
        } else {
            Err(AuditError::Access(format!(
                "features of negative individual {} were not purchased",
                self.id
            )))
        }
    }

    pub fn label(&self) -> Result<u8> {
        if self.f || self.label_revealed {
            Ok(self.y)
        } else {
            Err(AuditError::Access(format!(
                "label of negative individual {} was not purchased",
                self.id
            )))
        }
    }
}

pub struct PartialFeedbackEnv<'a> {
    instance: &'a dyn AuditInstance,
    classifier: &'a dyn Classifier,
    ledger: CostLedger,
    rng: RngStream,
    draw_cap: Option<u64>,
}

impl<'a> PartialFeedbackEnv<'a> {
    pub fn new(
        instance: &'a dyn AuditInstance,
        classifier: &'a dyn Classifier,
        c_feat: f64,
        c_lab: f64,
        rng: RngStream,
    ) -> Result<Self> {
        Ok(Self {
            instance,
            classifier,
            ledger: CostLedger::new(c_feat, c_lab)?,
            rng,
            draw_cap: None,
        })
    }

    /// Fail with [`AuditError::DrawBudgetExhausted`] after `cap` draws.
    pub fn with_draw_cap(mut self, cap: Option<u64>) -> Self {
        self.draw_cap = cap;
        self
    }

    pub fn n_groups(&self) -> usize {
        self.instance.n_groups()
    }

    pub fn ledger(&self) -> &CostLedger {
        &self.ledger
    }

    pub fn seed(&self) -> u64 {
        self.rng.seed()
    }

    pub fn classifier(&self) -> &'a dyn Classifier {
        self.classifier
    }

    pub fn draw_individual(&mut self) -> Result<Individual> {
        if let Some(cap) = self.draw_cap {
            if self.ledger.n_drawn >= cap {
                return Err(AuditError::DrawBudgetExhausted(cap));
            }
        }
        let d = self.instance.draw(&mut self.rng);
        let f = self.classifier.predict(&d.x, d.a);
        let id = self.ledger.n_drawn;
        self.ledger.n_drawn += 1;
        Ok(Individual {
            id,
            a: d.a,
            f,
            x: d.x,
            y: d.y,
            feature_revealed: false,
            label_revealed: false,
        })
    }

    /// Label of `ind`, buying it (with its features) when `f = 0`.
    pub fn reveal_label(&mut self, ind: &mut Individual) -> u8 {
        if ind.f || ind.label_revealed {
            return ind.y;
        }
        if ind.feature_revealed {
            // c_feat was already paid; the request is upgraded.
            self.ledger.n_feature_requests -= 1;
        } else {
            self.ledger.total_cost += self.ledger.c_feat;
        }
        self.ledger.n_label_requests += 1;
        if ind.y == 0 {
            self.ledger.n_defaults += 1;
            self.ledger.total_cost += self.ledger.c_lab;
        }
        ind.label_revealed = true;
        ind.y
    }

    /// Features of `ind`, buying them when `f = 0`.
    pub fn reveal_feature<'b>(&mut self, ind: &'b mut Individual) -> &'b [f64] {
        if !ind.f && !ind.feature_revealed && !ind.label_revealed {
            self.ledger.total_cost += self.ledger.c_feat;
            self.ledger.n_feature_requests += 1;
            ind.feature_revealed = true;
        }
        &ind.x
    }
}

/// One record of the past database as seen while scanning. Labels exist
/// only for positively classified individuals.
#[derive(Debug, Clone, Copy)]
pub struct PastView<'r> {
    pub x: &'r [f64],
    pub a: Group,
    pub f: bool,
    pub y: Option<u8>,
}

/// Read-only, free, ordered access to past decisions.
pub trait PastSource: Send + Sync {
    fn dim(&self) -> usize;
    fn n_groups(&self) -> usize;
    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Visit records in stored order until `visit` breaks.
    fn scan(&self, visit: &mut dyn FnMut(PastView<'_>) -> ControlFlow<()>);
}

/// Features of labelled positives per cell, `[a][y]`, keeping at most
/// `limit` per cell and stopping once every cell is full.
pub fn collect_cells(src: &dyn PastSource, limit: usize) -> Vec<[Vec<Vec<f64>>; 2]> {
    let k = src.n_groups();
    let mut cells: Vec<[Vec<Vec<f64>>; 2]> = (0..k).map(|_| [Vec::new(), Vec::new()]).collect();
    let mut full = 0;
    src.scan(&mut |r| {
        if let (true, Some(y)) = (r.f, r.y) {
            let cell = &mut cells[r.a as usize][y as usize];
            if cell.len() < limit {
                cell.push(r.x.to_vec());
                if cell.len() == limit {
                    full += 1;
                }
            }
        }
        if full == 2 * k {
            ControlFlow::Break(())
        } else {
            ControlFlow::Continue(())
        }
    });
    cells
}

/// Materialized past database, stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct PastDatabase {
    dim: usize,
    n_groups: usize,
    xs: Vec<f64>,
    a: Vec<Group>,
    f: Vec<bool>,
    y: Vec<Option<u8>>,
}

impl PastDatabase {
    pub fn new(dim: usize, n_groups: usize) -> Self {
        Self {
            dim,
            n_groups,
            xs: Vec::new(),
            a: Vec::new(),
            f: Vec::new(),
            y: Vec::new(),
        }
    }

    pub fn push(&mut self, x: &[f64], a: Group, f: bool, y: Option<u8>) -> Result<()> {
        if x.len() != self.dim || a as usize >= self.n_groups {
            return domain("record does not match the database schema");
        }
        if f != y.is_some() {
            return domain("past labels exist exactly for positive decisions");
        }
        self.xs.extend_from_slice(x);
        self.a.push(a);
        self.f.push(f);
        self.y.push(y);
        Ok(())
    }

    pub fn get(&self, i: usize) -> PastView<'_> {
        PastView {
            x: &self.xs[i * self.dim..(i + 1) * self.dim],
            a: self.a[i],
            f: self.f[i],
            y: self.y[i],
        }
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header: Vec<String> = (0..self.dim).map(|j| format!("x_{j}")).collect();
        header.extend(["a", "f", "y"].map(String::from));
        out.write_record(&header)?;
        for i in 0..self.len() {
            let r = self.get(i);
            let mut rec: Vec<String> = r.x.iter().map(|v| v.to_string()).collect();
            rec.push(r.a.to_string());
            rec.push(u8::from(r.f).to_string());
            rec.push(r.y.map(|y| y.to_string()).unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R, n_groups: usize) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let dim = rdr.headers()?.iter().filter(|h| h.starts_with("x_")).count();
        let mut db = Self::new(dim, n_groups);
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let bad = |what: &str| AuditError::Serde(format!("record {line}: bad {what}"));
            if rec.len() != dim + 3 {
                return Err(bad("width"));
            }
            let x: Vec<f64> = (0..dim)
                .map(|j| rec[j].parse::<f64>().map_err(|_| bad("feature")))
                .collect::<Result<_>>()?;
            let a: Group = rec[dim].parse().map_err(|_| bad("group"))?;
            let f = match &rec[dim + 1] {
                "1" => true,
                "0" => false,
                _ => return Err(bad("decision")),
            };
            let y = match &rec[dim + 2] {
                "" => None,
                s => Some(s.parse::<u8>().map_err(|_| bad("label"))?),
            };
            db.push(&x, a, f, y)?;
        }
        Ok(db)
    }
}

impl PastSource for PastDatabase {
    fn dim(&self) -> usize {
        self.dim
    }

    fn n_groups(&self) -> usize {
        self.n_groups
    }

    fn len(&self) -> usize {
        self.a.len()
    }

    fn scan(&self, visit: &mut dyn FnMut(PastView<'_>) -> ControlFlow<()>) {
        for i in 0..self.len() {
            if visit(self.get(i)).is_break() {
                break;
            }
        }
    }
}

/// `n` i.i.d. past decisions of `classifier` on `instance`.
pub fn generate_past_database(
    instance: &dyn AuditInstance,
    classifier: &dyn Classifier,
    n: usize,
    rng: &mut RngStream,
) -> PastDatabase {
    let mut db = PastDatabase::new(instance.feature_dim(), instance.n_groups());
    db.xs.reserve(n * db.dim);
    for _ in 0..n {
        let d = instance.draw(rng);
        let f = classifier.predict(&d.x, d.a);
        db.xs.extend_from_slice(&d.x);
        db.a.push(d.a);
        db.f.push(f);
        db.y.push(f.then_some(d.y));
    }
    db
}

/// A past database regenerated from its seed on every scan. Scans see
/// exactly the records [`generate_past_database`] would store for the same
/// seed, without holding them in memory.
#[derive(Debug, Clone, Copy)]
pub struct ReplayedPastDatabase<'a> {
    pub instance: &'a dyn AuditInstance,
    pub classifier: &'a dyn Classifier,
    pub seed: u64,
    pub len: usize,
}

impl ReplayedPastDatabase<'_> {
    pub fn materialize(&self) -> PastDatabase {
        generate_past_database(
            self.instance,
            self.classifier,
            self.len,
            &mut RngStream::new(self.seed),
        )
    }
}

impl PastSource for ReplayedPastDatabase<'_> {
    fn dim(&self) -> usize {
        self.instance.feature_dim()
    }

    fn n_groups(&self) -> usize {
        self.instance.n_groups()
    }

    fn len(&self) -> usize {
        self.len
    }

    fn scan(&self, visit: &mut dyn FnMut(PastView<'_>) -> ControlFlow<()>) {
        let mut rng = RngStream::new(self.seed);
        for _ in 0..self.len {
            let d = self.instance.draw(&mut rng);
            let f = self.classifier.predict(&d.x, d.a);
            let view = PastView {
                x: &d.x,
                a: d.a,
                f,
                y: f.then_some(d.y),
            };
            if visit(view).is_break() {
                break;
            }
        }
    }
}

/// A finite table served in repeated passes, each pass in a fresh
/// seed-dependent order. Stands in for an unbounded history when the table
/// alone holds too few positives of some cell.
#[derive(Debug, Clone)]
pub struct ShuffledPastDatabase {
    db: PastDatabase,
    seed: u64,
    passes: usize,
}

impl ShuffledPastDatabase {
    pub fn new(db: PastDatabase, seed: u64, passes: usize) -> Result<Self> {
        if db.is_empty() || passes == 0 {
            return domain("need a non-empty table and at least one pass");
        }
        Ok(Self { db, seed, passes })
    }
}

impl PastSource for ShuffledPastDatabase {
    fn dim(&self) -> usize {
        self.db.dim
    }

    fn n_groups(&self) -> usize {
        self.db.n_groups
    }

    fn len(&self) -> usize {
        self.db.len() * self.passes
    }

    fn scan(&self, visit: &mut dyn FnMut(PastView<'_>) -> ControlFlow<()>) {
        use rand::seq::SliceRandom;
        let mut order: Vec<usize> = (0..self.db.len()).collect();
        for pass in 0..self.passes {
            order.shuffle(&mut RngStream::derive(self.seed, pass as u64));
            for &i in &order {
                if visit(self.db.get(i)).is_break() {
                    return;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{make_lower_bound_pair, ConstantClassifier};

    #[test]
    fn costs_follow_the_access_rules() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let never = ConstantClassifier { value: false };
        let mut env = PartialFeedbackEnv::new(&inst, &never, 0.5, 2.0, RngStream::new(1)).unwrap();
        let mut ind = env.draw_individual().unwrap();
        assert!(ind.features().is_err() && ind.label().is_err());
        env.reveal_feature(&mut ind);
        assert_eq!(env.ledger().total_cost, 0.5);
        let y = env.reveal_label(&mut ind);
        let expected = 0.5 + if y == 0 { 2.0 } else { 0.0 };
        assert_eq!(env.ledger().total_cost, expected);
        env.reveal_label(&mut ind);
        assert_eq!(env.ledger().total_cost, expected);
        assert_eq!(env.ledger().n_feature_requests, 0);
        assert_eq!(env.ledger().n_label_requests, 1);
        assert_eq!(env.ledger().recomputed_total(), expected);
    }

    #[test]
    fn positives_are_free() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let always = ConstantClassifier { value: true };
        let mut env = PartialFeedbackEnv::new(&inst, &always, 1.0, 1.0, RngStream::new(1)).unwrap();
        for _ in 0..100 {
            let mut ind = env.draw_individual().unwrap();
            env.reveal_label(&mut ind);
            env.reveal_feature(&mut ind);
            assert!(ind.label().is_ok());
        }
        assert_eq!(env.ledger().total_cost, 0.0);
        assert_eq!(env.ledger().n_drawn, 100);
    }

    #[test]
    fn draw_cap_is_enforced() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let c = inst.classifier();
        let mut env = PartialFeedbackEnv::new(&inst, &c, 0.0, 1.0, RngStream::new(1))
            .unwrap()
            .with_draw_cap(Some(3));
        for _ in 0..3 {
            env.draw_individual().unwrap();
        }
        assert_eq!(
            env.draw_individual().unwrap_err(),
            AuditError::DrawBudgetExhausted(3)
        );
    }

    #[test]
    fn negative_costs_rejected() {
        assert!(CostLedger::new(-1.0, 0.0).is_err());
    }

    #[test]
    fn replay_matches_materialized_and_csv_roundtrips() {
        let (_, inst) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let c = inst.classifier();
        let replay = ReplayedPastDatabase {
            instance: &inst,
            classifier: &c,
            seed: 5,
            len: 500,
        };
        let db = replay.materialize();
        let mut seen = Vec::new();
        replay.scan(&mut |r| {
            seen.push((r.x.to_vec(), r.a, r.f, r.y));
            ControlFlow::Continue(())
        });
        for (i, s) in seen.iter().enumerate() {
            let r = db.get(i);
            assert_eq!(*s, (r.x.to_vec(), r.a, r.f, r.y));
        }
        let mut buf = Vec::new();
        db.write_csv(&mut buf).unwrap();
        let back = PastDatabase::read_csv(buf.as_slice(), 2).unwrap();
        assert_eq!(back, db);
    }

    #[test]
    fn cells_hold_only_positives() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let c = inst.classifier();
        let db = generate_past_database(&inst, &c, 5000, &mut RngStream::new(2));
        let cells = collect_cells(&db, 50);
        for a in 0..2 {
            for y in 0..2 {
                assert_eq!(cells[a][y].len(), 50);
                for x in &cells[a][y] {
                    assert_eq!(x[0].floor() as usize, y);
                    assert!(c.predict(x, a as Group));
                }
            }
        }
    }

    #[test]
    fn shuffled_passes_cover_every_record() {
        let (inst, _) = make_lower_bound_pair(0.1, 0.3, 0.3).unwrap();
        let clf = inst.classifier();
        let db = generate_past_database(&inst, &clf, 50, &mut RngStream::new(4));
        let src = ShuffledPastDatabase::new(db.clone(), 7, 3).unwrap();
        assert_eq!(src.len(), 150);
        let mut seen = Vec::new();
        src.scan(&mut |r| {
            seen.push(r.x[0]);
            ControlFlow::Continue(())
        });
        let mut first: Vec<f64> = seen[..50].to_vec();
        let mut orig: Vec<f64> = (0..50).map(|i| db.get(i).x[0]).collect();
        assert_ne!(first, orig);
        first.sort_by(f64::total_cmp);
        orig.sort_by(f64::total_cmp);
        assert_eq!(first, orig);
        assert_ne!(seen[..50], seen[50..100]);
    }
}
