//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::time::{Duration, Instant};

use audit_core::family::{distance, ExpFamily, GaussianFamily};
use audit_core::instance::{
    generate_separated_mixture, Hypothesis, LowerBoundInstance, MixtureConfig, SeparationSpace,
};
use audit_core::mixture::{trunc_est, MapOracle, TruncEstConfig};
use audit_core::sampling::sample_until_tau_successes;
use audit_core::stats::negbin_bounds;
use audit_core::RngStream;
use audit_lab::config::{
    ExperimentConfig, InstanceSpec, LowerBoundSpec, MixtureSpec, Mode, OutputFormat, SyntheticSpec,
};
use audit_lab::lower_bound::run_lower_bound_check;
use audit_lab::results::render;
use audit_lab::sweep::{run_blackbox_sweep, run_mixture_sweep};
use audit_lab::ResultRow;

type Outcome = Result<(bool, String), String>;

fn find<'a>(rows: &'a [ResultRow], alg: &str, value: f64) -> Result<&'a ResultRow, String> {
    rows.iter()
        .find(|r| r.algorithm == alg && (r.sweep_value - value).abs() < 1e-12)
        .ok_or_else(|| format!("no {alg} row at {value}"))
}

fn c1_cost_saving() -> Outcome {
    let mut cfg = ExperimentConfig::new(Mode::Blackbox);
    cfg.instance = Some(InstanceSpec::Synthetic(SyntheticSpec::default()));
    cfg.tau_sweep = vec![100, 500, 1000];
    cfg.cost_pairs = vec![(0.0, 1.0)];
    let rows = run_blackbox_sweep(&cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for tau in [100.0, 500.0, 1000.0] {
        let rs = find(&rows, "rs_audit", tau)?;
        let base = find(&rows, "baseline", tau)?;
        let ratio = rs.mean_cost / base.mean_cost;
        ok &= ratio <= 0.75;
        parts.push(format!("tau {tau}: {:.0}/{:.0} = {ratio:.3}", rs.mean_cost, base.mean_cost));
    }
    Ok((ok, parts.join(", ")))
}

fn c2_correctness() -> Outcome {
    let mut cfg = ExperimentConfig::new(Mode::Mixture);
    cfg.instance = Some(InstanceSpec::Mixture(MixtureSpec::default()));
    cfg.eps_sweep = vec![0.5, 0.25, 0.1, 0.05];
    cfg.cost_pairs = vec![(0.0, 1.0)];
    let rows = run_mixture_sweep(&cfg).map_err(|e| e.to_string())?;
    let mut ok = true;
    let mut parts = Vec::new();
    for alg in ["rs_audit", "exp_audit"] {
        for eps in [0.5, 0.1, 0.05] {
            let r = find(&rows, alg, eps)?;
            let frac = r.correctness_fraction.unwrap_or(f64::NAN);
            ok &= frac == 1.0 && r.n_seeds == 5 && !r.premise_violated;
            parts.push(format!("{alg}@{eps} {frac}"));
        }
        let r = find(&rows, alg, 0.25)?;
        ok &= r.premise_violated && r.correctness_fraction.is_none();
        parts.push(format!("{alg}@0.25 premise_violated={}", r.premise_violated));
    }
    Ok((ok, parts.join(", ")))
}

fn c3_estimation_accuracy() -> Outcome {
    let mut cfg = ExperimentConfig::new(Mode::LowerBoundCheck);
    cfg.instance = Some(InstanceSpec::LowerBound(LowerBoundSpec {
        triples: vec![[0.2, 0.3, 0.3]],
        p_group1: 0.5,
    }));
    cfg.delta = 0.1;
    cfg.seeds = (1..=100).collect();
    cfg.cost_pairs = vec![(0.0, 1.0)];
    let (report, _) = run_lower_bound_check(&cfg).map_err(|e| e.to_string())?;
    let p = &report.pairs[0];
    let ok = p.truncated_runs == 0 && p.runs == 200 && p.within_half_eps >= 0.90;
    Ok((
        ok,
        format!("{} runs, within eps/2 in {:.3}, tau {}", p.runs, p.within_half_eps, p.tau),
    ))
}

fn c4_negbin_tails() -> Outcome {
    let trials = 2000;
    let mut ok = true;
    let mut worst = String::new();
    let mut worst_gap = f64::NEG_INFINITY;
    for (i, &p) in [0.1, 0.5].iter().enumerate() {
        for (j, &tau) in [500usize, 2000].iter().enumerate() {
            for (k, &eps) in [0.1, 0.2].iter().enumerate() {
                let bound = negbin_bounds(tau, p, eps).map_err(|e| e.to_string())?;
                let mut rng = RngStream::derive(404, (i * 4 + j * 2 + k) as u64);
                let mut out = 0usize;
                for _ in 0..trials {
                    let n = sample_until_tau_successes(std::iter::repeat_with(|| rng.bernoulli(p)), tau)
                        .map_err(|e| e.to_string())?;
                    out += usize::from(!bound.contains(n as f64));
                }
                let freq = out as f64 / trials as f64;
                let limit = bound.failure_prob + 0.01;
                ok &= freq <= limit;
                if freq - limit > worst_gap {
                    worst_gap = freq - limit;
                    worst = format!("p {p} tau {tau} eps {eps}: {freq:.4} vs {limit:.4}");
                }
            }
        }
    }
    Ok((ok, format!("tightest cell {worst}")))
}

fn c5_lower_bound_pairs() -> Outcome {
    let mut rng = RngStream::new(55);
    let mut checked = 0;
    let mut exact = 0;
    while checked < 10 {
        let eps = 0.01 + 0.23 * rng.uniform();
        let p = 0.01 + 0.48 * rng.uniform();
        let q = (0.01 + 0.48 * rng.uniform()).min(0.99 / (1.0 + 4.0 * eps));
        let (Ok(fair), Ok(unfair)) = (
            LowerBoundInstance::new(eps, p, q, Hypothesis::Fair),
            LowerBoundInstance::new(eps, p, q, Hypothesis::Unfair),
        ) else {
            continue;
        };
        if !unfair.tpr_gap_dominates() {
            continue;
        }
        checked += 1;
        exact += usize::from(
            fair.eod_rational().to_string() == "0"
                && unfair.eod_rational() == unfair.closed_form_eod_rational(),
        );
    }

    let mut cfg = ExperimentConfig::new(Mode::LowerBoundCheck);
    cfg.instance = Some(InstanceSpec::LowerBound(LowerBoundSpec::default()));
    cfg.delta = 0.1;
    cfg.seeds = vec![1, 2];
    cfg.cost_pairs = vec![(0.0, 1.0)];
    let (report, _) = run_lower_bound_check(&cfg).map_err(|e| e.to_string())?;
    let slope = report.slope_pooled.unwrap_or(f64::NAN);
    let ok = exact == 10 && report.exact_ok && report.slope_in(0.8, 1.2);
    Ok((ok, format!("{exact}/10 exact, label slope {slope:.3}")))
}

fn c6_truncated_estimation() -> Outcome {
    let fam = GaussianFamily::new(2, 1.0).map_err(|e| e.to_string())?;
    let accept = |x: &[f64]| x[0] >= 0.0;
    let truth = [0.0, 0.0];
    let mut errs = Vec::new();
    for seed in 0..5u64 {
        let mut rng = RngStream::derive(606, seed);
        let mut draw = |n: usize| -> Vec<Vec<f64>> {
            let mut out = Vec::with_capacity(n);
            while out.len() < n {
                let x = fam.sample_unchecked(&truth, &mut rng);
                if accept(&x) {
                    out.push(x);
                }
            }
            out
        };
        let small = draw(5_000);
        let large = draw(50_000);
        let mut est = |s: &[Vec<f64>]| -> Result<f64, String> {
            let cfg = TruncEstConfig::fitted(s.len(), 0.1, fam.constants()).map_err(|e| e.to_string())?;
            let out = trunc_est(s, &accept, &fam, 0.05, 0.1, &cfg, &mut rng).map_err(|e| e.to_string())?;
            Ok(distance(&out.theta, &truth))
        };
        errs.push((est(&small)?, est(&large)?));
    }
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    let improved = errs.iter().filter(|e| e.1 <= e.0).count();
    let ok = worst <= 0.15 && improved >= 4;
    Ok((ok, format!("worst error at 5e4 {worst:.4}, improved in {improved}/5 seeds")))
}

fn c7_map_accuracy() -> Outcome {
    let eps = 0.1;
    let cfg = MixtureConfig {
        dim: 5,
        sigma2: 4.0,
        group_probs: vec![0.3, 0.7],
        label_probs: vec![0.4, 0.7],
        eps,
        constants: Default::default(),
        separation: SeparationSpace::Natural,
    };
    let mut rng = RngStream::new(707);
    let inst = generate_separated_mixture(&cfg, &mut rng).map_err(|e| e.to_string())?;
    let fam = inst.family().as_ref();
    let n = 100_000;
    let mut ok = true;
    let mut worst = 0.0f64;
    for a in 0..2u32 {
        let q1 = inst.label_probs()[a as usize];
        let oracle = MapOracle::new(
            fam,
            [inst.theta(0, a).to_vec(), inst.theta(1, a).to_vec()],
            [1.0 - q1, q1],
        )
        .map_err(|e| e.to_string())?;
        let b = eps * q1.min(1.0 - q1) / 36.0;
        let limit = b + 3.0 * (b * (1.0 - b) / n as f64).sqrt();
        for y in 0..2u8 {
            let theta = inst.theta(y, a);
            let wrong = (0..n)
                .filter(|_| oracle.classify(&fam.sample_unchecked(theta, &mut rng)) != y)
                .count();
            let rate = wrong as f64 / n as f64;
            ok &= rate <= limit;
            worst = worst.max(rate / limit);
        }
    }
    Ok((ok, format!("worst misclassification at {:.3} of its bound", worst)))
}

fn c8_cost_scaling() -> Outcome {
    let mut cfg = ExperimentConfig::new(Mode::Mixture);
    cfg.instance = Some(InstanceSpec::Mixture(MixtureSpec::default()));
    cfg.eps_sweep = vec![0.5, 0.1, 0.05];
    cfg.delta = 0.4;
    cfg.cost_pairs = vec![(0.5, 1.0)];
    cfg.tau_cap = Some(Some(100_000));
    cfg.r_cap = Some(Some(100_000));
    let rows = run_mixture_sweep(&cfg).map_err(|e| e.to_string())?;
    let spread = |alg: &str, f: fn(&ResultRow) -> f64| -> Result<f64, String> {
        let v: Vec<f64> = [0.5, 0.1, 0.05]
            .iter()
            .map(|&e| find(&rows, alg, e).map(f))
            .collect::<Result<_, _>>()?;
        let max = v.iter().copied().fold(f64::MIN, f64::max);
        let min = v.iter().copied().fold(f64::MAX, f64::min);
        Ok(max / min)
    };
    let exp = spread("exp_audit", |r| r.mean_label_cost)?;
    let rs = spread("rs_audit", |r| r.mean_cost)?;
    let ok = exp <= 3.0 && rs >= 10.0;
    Ok((ok, format!("exp_audit label cost ratio {exp:.3}, rs_audit cost ratio {rs:.2}")))
}

fn c9_determinism() -> Outcome {
    let mut bb = ExperimentConfig::new(Mode::Blackbox);
    bb.instance = Some(InstanceSpec::Synthetic(SyntheticSpec::default()));
    bb.tau_sweep = vec![20, 100];
    bb.seeds = vec![3, 4];
    let mut mix = ExperimentConfig::new(Mode::Mixture);
    mix.instance = Some(InstanceSpec::Mixture(MixtureSpec::default()));
    mix.eps_sweep = vec![0.5];
    mix.seeds = vec![3, 4];
    mix.r_cap = Some(Some(2000));
    let csv = |rows: Vec<ResultRow>| render(&rows, OutputFormat::Csv).map_err(|e| e.to_string());
    let a = csv(run_blackbox_sweep(&bb).map_err(|e| e.to_string())?)?;
    let b = csv(run_blackbox_sweep(&bb).map_err(|e| e.to_string())?)?;
    let c = csv(run_mixture_sweep(&mix).map_err(|e| e.to_string())?)?;
    let d = csv(run_mixture_sweep(&mix).map_err(|e| e.to_string())?)?;
    let ok = a == b && c == d;
    Ok((ok, format!("blackbox {} bytes, mixture {} bytes", a.len(), c.len())))
}

fn main() {
    let criteria: [(u32, &str, u64, fn() -> Outcome); 9] = [
        (1, "RS-Audit cost below baseline", 120, c1_cost_saving),
        (2, "verdicts on separated mixtures", 600, c2_correctness),
        (3, "EOD estimate accuracy", 300, c3_estimation_accuracy),
        (4, "negative-binomial tails", 60, c4_negbin_tails),
        (5, "lower-bound pairs", 180, c5_lower_bound_pairs),
        (6, "truncated estimation", 180, c6_truncated_estimation),
        (7, "MAP labeller accuracy", 60, c7_map_accuracy),
        (8, "cost scaling in eps", 600, c8_cost_scaling),
        (9, "reproducible output", 600, c9_determinism),
    ];
    let mut failed = 0;
    for (n, name, budget, check) in criteria {
        let start = Instant::now();
        let result = check();
        let took = start.elapsed();
        let in_time = took <= Duration::from_secs(budget);
        let (pass, detail) = match result {
            Ok((ok, d)) => (ok && in_time, d),
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!pass);
        println!(
            "criterion {n} {}: {name}; {detail}; {:.1}s of {budget}s",
            if pass { "PASS" } else { "FAIL" },
            took.as_secs_f64()
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
