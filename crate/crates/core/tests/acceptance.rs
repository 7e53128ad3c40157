//! Acceptance checks. Each test prints one `criterion N: PASS|FAIL` line.

mod common;

use std::io::Write;
use std::sync::Arc;
use std::time::Instant;

use apgd::config::ExperimentConfig;
use apgd::datasets::{self, Schema};
use apgd::empirical::GapHistogram;
use apgd::environments::{Disclosure, ObservationProcess};
use apgd::estimators::{Estimator, ObservationEvent, Variant};
use apgd::experiment::{partition_mismatch, Experiment};
use apgd::metrics::LinearRegret;
use apgd::priors::{BetaComponent, MassComponent, MixturePrior, PriorSchedule};
use apgd::rng::{stream, Purpose};
use apgd::{DecisionVector, FeasibleSet, OptimizerState};
use common::Mixture;
use rand::Rng;
use rand_distr::{Distribution, Geometric};

const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Relative slack for floating-point rounding in deterministic inequalities.
const ROUNDING: f64 = 1e-9;

/// Writes straight to stdout so the line shows up without `--nocapture`.
fn report(n: u32, pass: bool, detail: String) {
    let line = format!("criterion {n}: {} {detail}\n", if pass { "PASS" } else { "FAIL" });
    let _ = std::io::stdout().lock().write_all(line.as_bytes());
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// A random ball and a random gradient sequence, as in the deterministic
/// bound checks.
struct LinearCase {
    set: FeasibleSet,
    gradients: Vec<DecisionVector>,
}

fn random_case(rng: &mut impl Rng) -> LinearCase {
    let dim = rng.random_range(1..=16);
    let rounds = rng.random_range(1..=2000);
    let radius = 10f64.powf(rng.random_range(-2.0..2.0));
    let center = DecisionVector::new((0..dim).map(|_| rng.random_range(-3.0..3.0)).collect()).unwrap();
    let scale = 10f64.powf(rng.random_range(-2.0..1.0));
    // Drifting gradients so the comparator sits away from the start.
    let drift: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
    let gradients = (0..rounds)
        .map(|_| {
            let coords = (0..dim)
                .map(|i| scale * (drift[i] + rng.random_range(-1.0..1.0)))
                .collect();
            DecisionVector::new(coords).unwrap()
        })
        .collect();
    LinearCase {
        set: FeasibleSet::ball(center, radius).unwrap(),
        gradients,
    }
}

#[test]
fn criterion_01_adaptive_step_bound_on_linear_runs() {
    let start = Instant::now();
    let mut rng = stream(101, 0, Purpose::Environment);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let case = random_case(&mut rng);
        let mut opt = OptimizerState::new(case.set.clone());
        let mut regret = LinearRegret::new(case.set.clone());
        let mut g_sq = 0.0;
        for g in &case.gradients {
            regret.push(opt.decision(), g).unwrap();
            g_sq += g.norm_sq();
            opt.step(g).unwrap();
        }
        let bound = SQRT_2 * case.set.diameter() * g_sq.sqrt();
        let r = regret.regret().unwrap();
        worst = worst.max(r / bound);
        if r > bound * (1.0 + ROUNDING) {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations == 0 && secs < 10.0;
    report(1, pass, format!("violations={violations} max_ratio={worst:.4} time={secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_02_decreasing_step_bound_on_linear_runs() {
    let start = Instant::now();
    let mut rng = stream(102, 0, Purpose::Environment);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..500 {
        let case = random_case(&mut rng);
        let c = 10f64.powf(rng.random_range(-3.0..1.0));
        let mut opt = OptimizerState::new(case.set.clone());
        let mut regret = LinearRegret::new(case.set.clone());
        let mut weighted = 0.0;
        let mut eta = 0.0;
        for (t, g) in case.gradients.iter().enumerate() {
            eta = c / ((t + 1) as f64).sqrt();
            regret.push(opt.decision(), g).unwrap();
            weighted += 0.5 * eta * g.norm_sq();
            opt.step_with_fixed_eta(g, eta).unwrap();
        }
        let d = case.set.diameter();
        let bound = d * d / (2.0 * eta) + weighted;
        let r = regret.regret().unwrap();
        worst = worst.max(r / bound);
        if r > bound * (1.0 + ROUNDING) {
            violations += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = violations == 0 && secs < 10.0;
    report(2, pass, format!("violations={violations} max_ratio={worst:.4} time={secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_03_substitute_moments() {
    let start = Instant::now();
    let draws = 100_000u64;
    let mut failures = Vec::new();
    for (i, &p) in [0.1, 0.25, 0.5, 0.9].iter().enumerate() {
        for (j, &norm) in [0.5, 1.0, 2.0].iter().enumerate() {
            let prior: Arc<dyn PriorSchedule> = Arc::new(MixturePrior::single_mass(p).unwrap());
            let rng = stream(103, (i * 3 + j) as u64, Purpose::Observation);
            let mut process = ObservationProcess::new(prior, Disclosure::Known, rng);
            let mut est = Estimator::for_variant(Variant::WithKnown, 2, None, false).unwrap();
            let g = DecisionVector::new(vec![0.6 * norm, -0.8 * norm]).unwrap();
            let mut sub_sq = Vec::with_capacity(draws as usize);
            let mut noise_sq = Vec::with_capacity(draws as usize);
            for t in 1..=draws {
                let s = est.estimate(&process.observe(t, &g)).unwrap();
                sub_sq.push(s.g_tilde.norm_sq());
                noise_sq.push(s.g_tilde.sub(&g).unwrap().norm_sq());
            }
            let n2 = norm * norm;
            let (m1, se1) = mean_se(&sub_sq);
            let (m2, se2) = mean_se(&noise_sq);
            if (m1 - n2 / p).abs() > 4.0 * se1 {
                failures.push(format!("E|g~|^2 p={p} |g|={norm}: {m1} vs {}", n2 / p));
            }
            if (m2 - n2 * (1.0 / p - 1.0)).abs() > 4.0 * se2 {
                failures.push(format!("E|noise|^2 p={p} |g|={norm}: {m2} vs {}", n2 * (1.0 / p - 1.0)));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures.is_empty() && secs < 5.0;
    report(3, pass, format!("cases=12 failures={failures:?} time={secs:.2}s"));
    assert!(pass);
}

/// The 50 random mixtures shared by the posterior checks.
fn random_mixtures() -> Vec<Mixture> {
    let mut rng = stream(104, 0, Purpose::Environment);
    (0..50)
        .map(|_| {
            let nb = rng.random_range(0..=3);
            let nm = if nb == 0 { rng.random_range(1..=3) } else { rng.random_range(0..=2) };
            let mut raw: Vec<f64> = (0..nb + nm).map(|_| rng.random_range(0.05..1.0)).collect();
            let total: f64 = raw.iter().sum();
            raw.iter_mut().for_each(|w| *w /= total);
            let betas = (0..nb)
                .map(|i| (rng.random_range(0.3..20.0), rng.random_range(0.3..20.0), raw[i]))
                .collect();
            let masses = (0..nm).map(|i| (rng.random_range(0.01..0.99), raw[nb + i])).collect();
            Mixture { betas, masses }
        })
        .collect()
}

fn library_prior(m: &Mixture) -> MixturePrior {
    let betas: Vec<BetaComponent> = m
        .betas
        .iter()
        .map(|&(alpha, beta, weight)| BetaComponent { alpha, beta, weight })
        .collect();
    let masses: Vec<MassComponent> = m.masses.iter().map(|&(p, weight)| MassComponent { p, weight }).collect();
    // Renormalization above leaves the weights within rounding of 1.
    MixturePrior::new(betas, masses).unwrap()
}

#[test]
fn criterion_04_posterior_recursion_against_quadrature() {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut failures = 0;
    for m in random_mixtures() {
        let prior = library_prior(&m);
        let mut state = prior.reset_after_observation();
        for gap in 0..=100u64 {
            assert_eq!(state.gap(), gap);
            let got = prior.posterior_p(&state).unwrap();
            let want = common::posterior_by_quadrature(&m, gap);
            let rel = (got - want).abs() / want;
            worst = worst.max(rel);
            if rel > 1e-6 {
                failures += 1;
            }
            state.advance(&prior);
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = failures == 0 && secs < 5.0;
    report(4, pass, format!("mixtures=50 gaps=0..100 failures={failures} max_rel_err={worst:.2e} time={secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_05_posterior_above_component_minimum() {
    let mut violations = 0;
    let mut checked = 0;
    for m in random_mixtures() {
        let prior = library_prior(&m);
        let mut state = prior.reset_after_observation();
        for _ in 0..=100 {
            let p = prior.posterior_p(&state).unwrap();
            let lower = prior.posterior_lower_bound(&state);
            // A convex combination can land a few ulps under its smallest term.
            if p < lower * (1.0 - 4.0 * f64::EPSILON) {
                violations += 1;
            }
            checked += 1;
            state.advance(&prior);
        }
    }
    report(5, violations == 0, format!("checked={checked} violations={violations}"));
    assert_eq!(violations, 0);
}

#[test]
fn criterion_06_incremental_estimate_matches_recount() {
    let start = Instant::now();
    let mut mismatches = 0;
    for s in 0..20u64 {
        let mut rng = stream(106, s, Purpose::Observation);
        let p = rng.random_range(0.05..0.95);
        let geo = Geometric::new(p).unwrap();
        let mut hist = GapHistogram::new();
        let mut counts: Vec<u64> = Vec::new();
        for _ in 0..10_000 {
            let gap = geo.sample(&mut rng) + 1;
            for _ in 0..gap {
                hist.advance_round();
            }
            let fast = hist.record_observation_and_estimate(gap).unwrap();

            let g = gap as usize;
            if counts.len() <= g {
                counts.resize(g + 1, 0);
            }
            counts[g] += 1;
            let tail: u64 = counts[g..].iter().sum();
            let slow = counts[g] as f64 / tail as f64;
            if fast != slow {
                mismatches += 1;
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = mismatches == 0 && secs < 2.0;
    report(6, pass, format!("streams=20 length=10000 mismatches={mismatches} time={secs:.2}s"));
    assert!(pass);
}

#[test]
fn criterion_07_empirical_estimate_converges() {
    let mut lines = Vec::new();
    let mut pass = true;
    for &p in &[0.1, 0.3, 0.7] {
        let geo = Geometric::new(p).unwrap();
        let (mut early, mut late) = (Vec::new(), Vec::new());
        let mut seeds_improving = 0;
        for seed in 0..20u64 {
            let mut rng = stream(107, seed, Purpose::Observation);
            let mut est = Estimator::for_variant(Variant::EmpiricalEp, 1, None, false).unwrap();
            let g = DecisionVector::new(vec![1.0]).unwrap();
            let mut round = 0;
            let mut errors = Vec::with_capacity(10_000);
            for _ in 0..10_000 {
                round += geo.sample(&mut rng) + 1;
                let s = est.estimate(&ObservationEvent::observed(round, g.clone(), None)).unwrap();
                errors.push((1.0 / p - 1.0 / s.p_used.unwrap()).abs());
            }
            let e = errors[..100].iter().sum::<f64>() / 100.0;
            let l = errors[4999..].iter().sum::<f64>() / errors[4999..].len() as f64;
            seeds_improving += usize::from(l < e);
            early.push(e);
            late.push(l);
        }
        let e = early.iter().sum::<f64>() / 20.0;
        let l = late.iter().sum::<f64>() / 20.0;
        pass &= l < e;
        lines.push(format!("p={p}: early={e:.4} late={l:.4} seeds_improving={seeds_improving}/20"));
    }
    report(7, pass, lines.join("; "));
    assert!(pass);
}

fn synthetic_config(body: &str) -> ExperimentConfig {
    let cfg = ExperimentConfig::from_toml(body).unwrap();
    cfg.validate().unwrap();
    cfg
}

#[test]
fn criterion_08_expected_regret_and_second_moment() {
    let start = Instant::now();
    let cfg = synthetic_config(
        r#"
rounds = 2000
trials = 200
seed = 108
variants = ["with_known"]
disclosure = "known"
[environment]
kind = "synthetic"
dim = 16
scale = 0.25
[[prior.mass]]
p = 0.3
weight = 1.0
"#,
    );
    let exp = Experiment::new(cfg).unwrap();
    let d = exp.feasible_set().diameter();
    let outs = exp.run_all().unwrap();
    let first: Vec<f64> = outs
        .iter()
        .map(|o| SQRT_2 * d * o.g_sq.sqrt() - o.regret.unwrap())
        .collect();
    let second: Vec<f64> = outs
        .iter()
        .map(|o| 6.0 * d * d * o.g_sq - o.regret.unwrap().powi(2))
        .collect();
    let (m1, se1) = mean_se(&first);
    let (m2, se2) = mean_se(&second);
    let secs = start.elapsed().as_secs_f64();
    let pass = m1 >= -4.0 * se1 && m2 >= -4.0 * se2 && secs < 60.0;
    report(
        8,
        pass,
        format!("trials={} slack1={m1:.3}(se {se1:.3}) slack2={m2:.3}(se {se2:.3}) time={secs:.2}s", outs.len()),
    );
    assert!(pass);
}

#[test]
fn criterion_09_bimodal_prior_comparison() {
    let start = Instant::now();
    let cfg = synthetic_config(
        r#"
rounds = 10000
trials = 20
seed = 109
variants = ["ignore", "with_known", "with_prior", "gml", "uniform", "apgd_ep"]
disclosure = "known"
[environment]
kind = "synthetic"
dim = 16
scale = 0.25
sign_law = "component_coupled"
[[prior.beta]]
alpha = 4.0
beta = 13.0
weight = 0.5
[[prior.beta]]
alpha = 13.0
beta = 4.0
weight = 0.5
"#,
    );
    let exp = Experiment::new(cfg).unwrap();
    let outs = exp.run_all().unwrap();
    let mean_of = |v: Variant| {
        let xs: Vec<f64> = outs.iter().filter(|o| o.variant == v).map(|o| o.final_value()).collect();
        xs.iter().sum::<f64>() / xs.len() as f64
    };
    let ignore = mean_of(Variant::Ignore);
    let known = mean_of(Variant::WithKnown);
    let mut pass = ignore >= 2.0 * known;
    let mut parts = vec![format!("ignore={ignore:.4}")];
    for v in [Variant::WithKnown, Variant::WithPrior, Variant::Gml, Variant::Uniform, Variant::EmpiricalEp] {
        let m = mean_of(v);
        pass &= m < 0.25 * ignore;
        parts.push(format!("{}={m:.4}", v.name()));
    }
    let violations: usize = outs.iter().map(|o| o.bound_violations.len()).sum();
    let secs = start.elapsed().as_secs_f64();
    pass &= violations == 0 && secs < 120.0;
    report(9, pass, format!("{} bound_violations={violations} time={secs:.2}s", parts.join(" ")));
    assert!(pass);
}

fn data_path(name: &str) -> String {
    format!("{}/../../data/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn criterion_10_dataset_pipeline() {
    let raw = datasets::load_csv(data_path("songs_200.csv"), &Schema { target: 0, features: None }).unwrap();
    let ds = datasets::normalize(&raw);
    let n = ds.len() as f64;
    let mut worst = 0.0f64;
    for j in 0..ds.feature_count() {
        let mean = (0..ds.len()).map(|i| ds.row(i)[j]).sum::<f64>() / n;
        let ms = (0..ds.len()).map(|i| ds.row(i)[j].powi(2)).sum::<f64>() / n;
        worst = worst.max(mean.abs()).max((ms - 1.0).abs());
    }
    let bias_ok = (0..ds.len()).all(|i| ds.row(i)[ds.feature_count()] == 1.0);
    let normalized = ds.len() == 200 && worst <= 1e-9 && bias_ok && ds.degenerate_features().is_empty();

    let cfg = ExperimentConfig::from_toml(&format!(
        r#"
rounds = 1500
trials = 2
seed = 110
variants = ["ignore", "apgd_ep"]
disclosure = "none"
[environment]
kind = "regression"
csv = "{}"
schema = {{ target = 0 }}
copies = 10
semi_adversarial = true
target_shift = -2000.0
component_partitions = [0, 1]
[[prior.beta]]
alpha = 13.0
beta = 4.0
weight = 0.5
[[prior.beta]]
alpha = 4.0
beta = 13.0
weight = 0.5
"#,
        data_path("songs_200.csv")
    ))
    .unwrap();
    let exp = Experiment::new(cfg).unwrap();
    let mut mismatches = 0;
    let mut served = 0;
    for trial in 0..2 {
        for out in exp.run_trial_all(trial, true).unwrap() {
            served += out.events.len();
            // Partition 0 holds years before 2000 after the shift below zero.
            for e in &out.events {
                let year = exp.dataset().unwrap().target(e.row.unwrap()) + 2000.0;
                if usize::from(year >= 2000.0) != e.partition.unwrap() {
                    mismatches += 1;
                }
            }
            if partition_mismatch(&out.events, &[0, 1]).is_some() {
                mismatches += 1;
            }
        }
    }
    let pass = normalized && mismatches == 0 && served == 4 * 1500;
    report(
        10,
        pass,
        format!("rows=200 max_moment_err={worst:.2e} bias_ok={bias_ok} served={served} partition_mismatches={mismatches}"),
    );
    assert!(pass);
}
