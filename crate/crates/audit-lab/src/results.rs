//! Aggregated measurements and their CSV/JSON serialization.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::{CostPair, OutputFormat};
use crate::error::{HarnessError, Result};

/// One aggregate over seeds for an `(algorithm, sweep_value, cost_pair)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub algorithm: String,
    /// τ for blackbox sweeps, ε for mixture and lower-bound runs.
    pub sweep_value: f64,
    pub cost_pair: CostPair,
    pub mean_cost: f64,
    pub std_cost: f64,
    pub mean_labels: f64,
    pub std_labels: f64,
    pub mean_samples: f64,
    pub mean_delta_hat: f64,
    pub std_delta_hat: f64,
    pub true_eod: f64,
    /// Fraction of runs whose verdict matched the ground truth; absent when
    /// the hypothesis premise fails.
    pub correctness_fraction: Option<f64>,
    pub n_seeds: usize,
    /// Some run hit a τ or R cap.
    pub capped: bool,
    /// Part of `mean_cost` charged through `c_lab`.
    pub mean_label_cost: f64,
    /// `0 < Δ ≤ ε`: neither verdict is wrong, so the row is not scored.
    pub premise_violated: bool,
    /// Some run hit the online draw cap and was left out of the means.
    pub truncated_run: bool,
}

pub const HEADER: [&str; 17] = [
    "algorithm",
    "sweep_value",
    "cost_pair",
    "mean_cost",
    "std_cost",
    "mean_labels",
    "std_labels",
    "mean_samples",
    "mean_delta_hat",
    "std_delta_hat",
    "true_eod",
    "correctness_fraction",
    "n_seeds",
    "capped",
    "mean_label_cost",
    "premise_violated",
    "truncated_run",
];

/// One audit run, already priced for a cost pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RunOutcome {
    pub cost: f64,
    pub label_cost: f64,
    pub labels: f64,
    pub samples: f64,
    pub delta_hat: f64,
    pub correct: bool,
    pub capped: bool,
}

/// Population mean and standard deviation (divisor `n`).
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

pub struct RowKey<'a> {
    pub algorithm: &'a str,
    pub sweep_value: f64,
    pub cost_pair: CostPair,
    pub true_eod: f64,
    pub premise_violated: bool,
    pub truncated_run: bool,
}

pub fn aggregate(key: RowKey<'_>, runs: &[RunOutcome]) -> ResultRow {
    let col = |f: fn(&RunOutcome) -> f64| runs.iter().map(f).collect::<Vec<_>>();
    let (mean_cost, std_cost) = mean_std(&col(|r| r.cost));
    let (mean_labels, std_labels) = mean_std(&col(|r| r.labels));
    let (mean_delta_hat, std_delta_hat) = mean_std(&col(|r| r.delta_hat));
    let correctness_fraction = (!key.premise_violated && !runs.is_empty())
        .then(|| runs.iter().filter(|r| r.correct).count() as f64 / runs.len() as f64);
    ResultRow {
        algorithm: key.algorithm.to_string(),
        sweep_value: key.sweep_value,
        cost_pair: key.cost_pair,
        mean_cost,
        std_cost,
        mean_labels,
        std_labels,
        mean_samples: mean_std(&col(|r| r.samples)).0,
        mean_delta_hat,
        std_delta_hat,
        true_eod: key.true_eod,
        correctness_fraction,
        n_seeds: runs.len(),
        capped: runs.iter().any(|r| r.capped),
        mean_label_cost: mean_std(&col(|r| r.label_cost)).0,
        premise_violated: key.premise_violated,
        truncated_run: key.truncated_run,
    }
}

/// `%.6g`: six significant digits, `.` as decimal separator.
pub fn fmt_g(x: f64) -> String {
    if x.is_nan() {
        return "NaN".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf" } else { "-inf" }.into();
    }
    if x == 0.0 {
        return "0".into();
    }
    let sci = format!("{x:.5e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..6).contains(&exp) {
        trim_zeros(format!("{:.*}", (5 - exp) as usize, x))
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa.to_string()), exp.abs())
    }
}

fn trim_zeros(s: String) -> String {
    if !s.contains('.') {
        return s;
    }
    s.trim_end_matches('0').trim_end_matches('.').to_string()
}

fn round6(x: f64) -> f64 {
    fmt_g(x).parse().expect("formatted float parses")
}

impl ResultRow {
    /// The row as it reads back after emitting: every float at six
    /// significant digits.
    pub fn rounded(&self) -> Self {
        Self {
            sweep_value: round6(self.sweep_value),
            cost_pair: (round6(self.cost_pair.0), round6(self.cost_pair.1)),
            mean_cost: round6(self.mean_cost),
            std_cost: round6(self.std_cost),
            mean_labels: round6(self.mean_labels),
            std_labels: round6(self.std_labels),
            mean_samples: round6(self.mean_samples),
            mean_delta_hat: round6(self.mean_delta_hat),
            std_delta_hat: round6(self.std_delta_hat),
            true_eod: round6(self.true_eod),
            correctness_fraction: self.correctness_fraction.map(round6),
            mean_label_cost: round6(self.mean_label_cost),
            ..self.clone()
        }
    }

    fn record(&self) -> Vec<String> {
        vec![
            self.algorithm.clone(),
            fmt_g(self.sweep_value),
            format!("({},{})", fmt_g(self.cost_pair.0), fmt_g(self.cost_pair.1)),
            fmt_g(self.mean_cost),
            fmt_g(self.std_cost),
            fmt_g(self.mean_labels),
            fmt_g(self.std_labels),
            fmt_g(self.mean_samples),
            fmt_g(self.mean_delta_hat),
            fmt_g(self.std_delta_hat),
            fmt_g(self.true_eod),
            self.correctness_fraction.map(fmt_g).unwrap_or_default(),
            self.n_seeds.to_string(),
            self.capped.to_string(),
            fmt_g(self.mean_label_cost),
            self.premise_violated.to_string(),
            self.truncated_run.to_string(),
        ]
    }

    fn from_record(rec: &csv::StringRecord) -> Result<Self> {
        let bad = |what: &str| HarnessError::Format(format!("bad {what} in results row"));
        if rec.len() != HEADER.len() {
            return Err(bad("width"));
        }
        let float = |i: usize| rec[i].parse::<f64>().map_err(|_| bad(HEADER[i]));
        let flag = |i: usize| rec[i].parse::<bool>().map_err(|_| bad(HEADER[i]));
        let pair = rec[2]
            .strip_prefix('(')
            .and_then(|s| s.strip_suffix(')'))
            .and_then(|s| s.split_once(','))
            .ok_or_else(|| bad("cost_pair"))?;
        Ok(Self {
            algorithm: rec[0].to_string(),
            sweep_value: float(1)?,
            cost_pair: (
                pair.0.parse().map_err(|_| bad("cost_pair"))?,
                pair.1.parse().map_err(|_| bad("cost_pair"))?,
            ),
            mean_cost: float(3)?,
            std_cost: float(4)?,
            mean_labels: float(5)?,
            std_labels: float(6)?,
            mean_samples: float(7)?,
            mean_delta_hat: float(8)?,
            std_delta_hat: float(9)?,
            true_eod: float(10)?,
            correctness_fraction: if rec[11].is_empty() { None } else { Some(float(11)?) },
            n_seeds: rec[12].parse().map_err(|_| bad("n_seeds"))?,
            capped: flag(13)?,
            mean_label_cost: float(14)?,
            premise_violated: flag(15)?,
            truncated_run: flag(16)?,
        })
    }
}

pub fn write_csv<W: Write>(rows: &[ResultRow], w: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(w);
    wtr.write_record(HEADER)?;
    for row in rows {
        wtr.write_record(row.record())?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_csv<R: Read>(r: R) -> Result<Vec<ResultRow>> {
    let mut rdr = csv::Reader::from_reader(r);
    let header = rdr.headers()?.clone();
    if header.iter().ne(HEADER.iter().copied()) {
        return Err(HarnessError::Format(format!(
            "results header {:?} does not match {:?}",
            header.iter().collect::<Vec<_>>(),
            HEADER
        )));
    }
    rdr.records()
        .map(|rec| ResultRow::from_record(&rec?))
        .collect()
}

/// JSON array of objects, floats at six significant digits.
pub fn to_json(rows: &[ResultRow]) -> Result<String> {
    let rounded: Vec<ResultRow> = rows.iter().map(ResultRow::rounded).collect();
    Ok(serde_json::to_string_pretty(&rounded)? + "\n")
}

pub fn from_json(text: &str) -> Result<Vec<ResultRow>> {
    Ok(serde_json::from_str(text)?)
}

pub fn render(rows: &[ResultRow], format: OutputFormat) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    match format {
        OutputFormat::Csv => write_csv(rows, &mut buf)?,
        OutputFormat::Json => buf = to_json(rows)?.into_bytes(),
    }
    Ok(buf)
}

pub fn emit_results(rows: &[ResultRow], path: &Path, format: OutputFormat) -> Result<()> {
    if rows.is_empty() {
        return Err(HarnessError::Format("no result rows to emit".into()));
    }
    std::fs::write(path, render(rows, format)?)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> ResultRow {
        ResultRow {
            algorithm: "rs_audit".into(),
            sweep_value: 0.1,
            cost_pair: (0.5, 0.25),
            mean_cost: 1234.56789,
            std_cost: 0.000012345678,
            mean_labels: 2.0 / 3.0,
            std_labels: 0.0,
            mean_samples: 12_345_678.9,
            mean_delta_hat: 0.2,
            std_delta_hat: 1e-9,
            true_eod: 0.2,
            correctness_fraction: Some(1.0),
            n_seeds: 5,
            capped: true,
            mean_label_cost: 100.0,
            premise_violated: false,
            truncated_run: false,
        }
    }

    #[test]
    fn g_format_matches_printf() {
        let cases = [
            (0.1, "0.1"),
            (1234.56789, "1234.57"),
            (2.0 / 3.0, "0.666667"),
            (12_345_678.9, "1.23457e+07"),
            (0.000012345678, "1.23457e-05"),
            (0.0001, "0.0001"),
            (999_999.5, "1e+06"),
            (100.0, "100"),
            (-0.5, "-0.5"),
            (0.0, "0"),
        ];
        for (x, want) in cases {
            assert_eq!(fmt_g(x), want, "{x}");
        }
    }

    #[test]
    fn one_row_gives_two_lines() {
        let mut buf = Vec::new();
        write_csv(&[row()], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().next().unwrap(), HEADER.join(","));
        assert!(text.contains("\"(0.5,0.25)\""));
    }

    #[test]
    fn csv_roundtrip() {
        let mut r2 = row();
        r2.correctness_fraction = None;
        r2.premise_violated = true;
        let rows = vec![row(), r2];
        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        let expected: Vec<_> = rows.iter().map(ResultRow::rounded).collect();
        assert_eq!(back, expected);
        let mut again = Vec::new();
        write_csv(&back, &mut again).unwrap();
        assert_eq!(buf, again);
    }

    #[test]
    fn json_roundtrip() {
        let rows = vec![row()];
        let text = to_json(&rows).unwrap();
        assert!(text.trim_start().starts_with('['));
        let back = from_json(&text).unwrap();
        assert_eq!(back, vec![row().rounded()]);
    }

    #[test]
    fn population_std_on_a_triple() {
        let (m, s) = mean_std(&[1.0, 2.0, 6.0]);
        assert_eq!(m, 3.0);
        // Σ(x − 3)² = 4 + 1 + 9 = 14, divided by 3.
        assert!((s - (14.0f64 / 3.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn premise_rows_are_not_scored() {
        let run = RunOutcome {
            cost: 1.0,
            label_cost: 1.0,
            labels: 1.0,
            samples: 1.0,
            delta_hat: 0.1,
            correct: false,
            capped: false,
        };
        let key = |pv| RowKey {
            algorithm: "x",
            sweep_value: 0.25,
            cost_pair: (0.0, 1.0),
            true_eod: 0.2,
            premise_violated: pv,
            truncated_run: false,
        };
        assert_eq!(aggregate(key(true), &[run]).correctness_fraction, None);
        assert_eq!(aggregate(key(false), &[run]).correctness_fraction, Some(0.0));
    }
}
