//! Running configured experiments: variants × trials over one environment.
//!
//! Every `(variant, trial)` pair gets a fresh environment, observation
//! process, estimator and optimizer. The environment and the observation
//! process draw from streams keyed by `(seed, trial)` and never look at the
//! learner's randomness, so all variants of a trial face the same
//! observation outcomes, hidden probabilities and data arrivals.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use rayon::prelude::*;

use crate::config::{EnvironmentConfig, ExperimentConfig};
use crate::datasets::{self, PartitionRule, TabularDataset};
use crate::descent::OptimizerState;
use crate::empirical::GapHistogram;
use crate::environments::{
    AdversarialLinearEnv, Arrival, DatasetEnv, Environment, LossKind, ObservationProcess,
};
use crate::error::{Error, Result};
use crate::estimators::{Estimator, Variant};
use crate::geometry::FeasibleSet;
use crate::metrics::{self, LinearRegret, SummaryEntry, TraceRow};
use crate::priors::{MixturePrior, PriorSchedule};
use crate::rng::{stream, Purpose};

/// Relative slack on the per-round substitute bound check.
pub const BOUND_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone)]
enum Source {
    Linear {
        dim: usize,
        scale: f64,
        law: crate::environments::SignLaw,
    },
    Data {
        data: Arc<TabularDataset>,
        loss: LossKind,
        arrival: Arrival,
        copies: u64,
        take: Option<u64>,
    },
}

/// A validated configuration with its data loaded and its prior built.
#[derive(Debug, Clone)]
pub struct Experiment {
    config: ExperimentConfig,
    variants: Vec<Variant>,
    prior: Arc<MixturePrior>,
    set: FeasibleSet,
    source: Source,
}

/// What happened in one round, shared by every variant of a trial.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RoundEvent {
    pub observed: bool,
    /// Hidden probability in force during the round.
    pub hidden_p: f64,
    /// Prior component that produced it.
    pub component: usize,
    pub row: Option<usize>,
    pub partition: Option<usize>,
}

/// Result of one `(variant, trial)` run.
#[derive(Debug, Clone)]
pub struct TrialOutput {
    pub variant: Variant,
    pub trial: u64,
    pub rounds: u64,
    pub cum_loss: f64,
    /// `Σ‖g̃_t‖²` fed to the optimizer.
    pub g_sq: f64,
    /// Regret against the best fixed decision, for linear environments.
    pub regret: Option<f64>,
    pub rows: Vec<TraceRow>,
    /// Per-round events, when requested.
    pub events: Vec<RoundEvent>,
    /// Rounds at which the substitute bound check failed.
    pub bound_violations: Vec<u64>,
    pub histogram: Option<GapHistogram>,
}

impl TrialOutput {
    /// Time-averaged regret for linear environments, time-averaged loss
    /// otherwise.
    pub fn final_value(&self) -> f64 {
        self.regret.unwrap_or(self.cum_loss) / self.rounds as f64
    }
}

/// Everything a finished experiment produced.
#[derive(Debug, Clone)]
pub struct RunReport {
    pub summary: BTreeMap<String, SummaryEntry>,
    pub bound_violations: u64,
    pub files: Vec<PathBuf>,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self> {
        config.validate()?;
        let variants = config.parsed_variants()?;
        let prior = Arc::new(config.prior.build()?);
        let (set, source) = match &config.environment {
            EnvironmentConfig::Synthetic {
                dim,
                scale,
                sign_law,
                radius,
            } => (
                FeasibleSet::centered_ball(*dim, *radius)?,
                Source::Linear {
                    dim: *dim,
                    scale: *scale,
                    law: *sign_law,
                },
            ),
            EnvironmentConfig::Regression(d) | EnvironmentConfig::Classification(d) => {
                let regression = matches!(config.environment, EnvironmentConfig::Regression(_));
                let raw = datasets::load_csv(config.resolve(&d.csv), &d.schema)?;
                let rule = d.partition.unwrap_or(if regression {
                    PartitionRule::Below(2000.0)
                } else {
                    PartitionRule::Equals(1.0)
                });
                // Partitions follow the raw targets; the shift only moves them.
                let shifted_rule = match rule {
                    PartitionRule::Below(v) => PartitionRule::Below(v + d.target_shift),
                    PartitionRule::Equals(v) => PartitionRule::Equals(v + d.target_shift),
                };
                let data = datasets::shift_targets(&datasets::normalize(&raw), d.target_shift);
                let radius = match (d.radius, regression) {
                    (Some(r), _) => r,
                    (None, true) => datasets::radius_for_ls(&data)?,
                    (None, false) => 1.0,
                };
                let arrival = if d.semi_adversarial {
                    Arrival::SemiAdversarial {
                        rule: shifted_rule,
                        component_partitions: d.component_partitions.clone(),
                    }
                } else {
                    Arrival::Randomized
                };
                (
                    FeasibleSet::centered_ball(data.dim(), radius)?,
                    Source::Data {
                        data: Arc::new(data),
                        loss: if regression {
                            LossKind::AbsoluteDeviation
                        } else {
                            LossKind::Logistic
                        },
                        arrival,
                        copies: d.copies,
                        take: d.take,
                    },
                )
            }
        };
        Ok(Self {
            config,
            variants,
            prior,
            set,
            source,
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.config
    }

    pub fn variants(&self) -> &[Variant] {
        &self.variants
    }

    pub fn feasible_set(&self) -> &FeasibleSet {
        &self.set
    }

    /// The loaded dataset, for dataset environments.
    pub fn dataset(&self) -> Option<&TabularDataset> {
        match &self.source {
            Source::Data { data, .. } => Some(data),
            Source::Linear { .. } => None,
        }
    }

    fn environment(&self, trial: u64) -> Result<Box<dyn Environment>> {
        let seed = self.config.seed;
        Ok(match &self.source {
            Source::Linear { dim, scale, law } => Box::new(AdversarialLinearEnv::new(
                *dim,
                *scale,
                *law,
                stream(seed, trial, Purpose::Environment),
            )?),
            Source::Data {
                data,
                loss,
                arrival,
                copies,
                take,
            } => Box::new(DatasetEnv::new(
                data.clone(),
                *loss,
                arrival,
                *copies,
                *take,
                stream(seed, trial, Purpose::Shuffle),
            )?),
        })
    }

    /// Runs one variant for one trial.
    pub fn run_trial(&self, variant: Variant, trial: u64, keep_events: bool) -> Result<TrialOutput> {
        let cfg = &self.config;
        let seed = cfg.seed;
        let schedule: Arc<dyn PriorSchedule> = self.prior.clone();
        let mut process = ObservationProcess::new(
            schedule.clone(),
            cfg.disclosure,
            stream(seed, trial, Purpose::Observation),
        );
        let mut env = self.environment(trial)?;
        let mut noise_rng = stream(seed, trial, Purpose::Noise);
        let dim = env.dim();
        let mut estimator = Estimator::for_variant(variant, dim, Some(schedule), cfg.empirical.exclude_current)?;
        let mut opt = OptimizerState::new(self.set.clone());
        let diameter = opt.diameter();
        let linear = matches!(self.source, Source::Linear { .. });

        let mut true_regret = linear.then(|| LinearRegret::new(self.set.clone()));
        let mut surrogate = LinearRegret::new(self.set.clone());
        let mut bound_violations = Vec::new();

        // Completed-gap contributions to the lower-bound reference, and the
        // open gap's length and largest gradient norm.
        let mut closed_sq = 0.0;
        let mut open_len = 0u64;
        let mut open_norm = 0.0f64;

        let mut rows = Vec::new();
        let mut events = Vec::new();
        let mut cum_loss = 0.0;
        let mut last_obs = 0u64;
        let mut rounds = 0u64;

        env.begin_segment(process.current_component());
        for t in 1..=cfg.rounds {
            let w = opt.decision().clone();
            let Some(round) = env.next_round(&w)? else {
                break;
            };
            rounds = t;
            cum_loss += round.loss;
            if let Some(tracker) = true_regret.as_mut() {
                tracker.push(&w, &round.gradient)?;
            }

            let hidden_p = process.current_p();
            let component = process.current_component();
            let seen = match &cfg.noise {
                Some(noise) => round.gradient.add_scaled(1.0, &noise.sample(dim, &mut noise_rng))?,
                None => round.gradient.clone(),
            };
            let event = process.observe(t, &seen);
            if event.is_observed() {
                env.begin_segment(process.current_component());
            }
            let sub = estimator.estimate(&event)?;
            opt.step(&sub.g_tilde)?;

            open_len += 1;
            open_norm = open_norm.max(round.gradient.norm());
            let gap = t - last_obs;
            if event.is_observed() {
                closed_sq += (open_norm * open_len as f64).powi(2);
                open_len = 0;
                open_norm = 0.0;
                last_obs = t;
            }

            if cfg.checks.substitute_bound {
                surrogate.push(&w, &sub.g_tilde)?;
                let lhs = surrogate.regret()?;
                let rhs = std::f64::consts::SQRT_2 * diameter * opt.g_sq().sqrt();
                if lhs > rhs + BOUND_TOLERANCE * (1.0 + rhs) {
                    bound_violations.push(t);
                }
            }

            if keep_events {
                events.push(RoundEvent {
                    observed: event.is_observed(),
                    hidden_p,
                    component,
                    row: round.row,
                    partition: round.partition,
                });
            }

            if t % cfg.output.trace_every == 0 || t == cfg.rounds {
                let regret = true_regret.as_ref().map(LinearRegret::regret).transpose()?;
                let lemma4_ref = linear.then(|| {
                    let open = (open_norm * open_len as f64).powi(2);
                    diameter / (2.0 * std::f64::consts::SQRT_2) * (closed_sq + open).sqrt()
                });
                rows.push(TraceRow {
                    round: t,
                    variant: variant.name().to_string(),
                    trial,
                    cum_loss,
                    avg_loss: cum_loss / t as f64,
                    regret,
                    lemma4_ref,
                    observed: u8::from(event.is_observed()),
                    gap,
                    p_used: sub.p_used,
                });
            }
        }
        if rounds == 0 {
            return Err(Error::Dataset("the environment served no rounds".into()));
        }
        // A dataset that runs out early still gets its final row.
        if rows.last().is_none_or(|r| r.round != rounds) {
            rows.push(TraceRow {
                round: rounds,
                variant: variant.name().to_string(),
                trial,
                cum_loss,
                avg_loss: cum_loss / rounds as f64,
                regret: None,
                lemma4_ref: None,
                observed: 0,
                gap: rounds - last_obs,
                p_used: None,
            });
        }
        Ok(TrialOutput {
            variant,
            trial,
            rounds,
            cum_loss,
            g_sq: opt.g_sq(),
            regret: true_regret.as_ref().map(LinearRegret::regret).transpose()?,
            rows,
            events,
            bound_violations,
            histogram: estimator.histogram().cloned(),
        })
    }

    /// Runs every configured variant on trial `trial`.
    pub fn run_trial_all(&self, trial: u64, keep_events: bool) -> Result<Vec<TrialOutput>> {
        self.variants
            .iter()
            .map(|&v| self.run_trial(v, trial, keep_events))
            .collect()
    }

    /// Runs all trials, in parallel, returning outputs in trial-major then
    /// variant order.
    pub fn run_all(&self) -> Result<Vec<TrialOutput>> {
        let per_trial: Vec<Vec<TrialOutput>> = (0..self.config.trials)
            .into_par_iter()
            .map(|trial| self.run_trial_all(trial, false))
            .collect::<Result<_>>()?;
        Ok(per_trial.into_iter().flatten().collect())
    }

    /// Runs everything and writes `trace.csv`, `summary.json` and, when
    /// APGD.EP runs, the first trial's gap histogram under `out`.
    pub fn run_to_dir(&self, out: &Path) -> Result<RunReport> {
        std::fs::create_dir_all(out)?;
        let trace_path = out.join("trace.csv");
        let mut trace = csv::Writer::from_writer(BufWriter::new(File::create(&trace_path)?));

        let mut finals: BTreeMap<Variant, Vec<f64>> = BTreeMap::new();
        let mut rounds: BTreeMap<Variant, u64> = BTreeMap::new();
        let mut violations = 0u64;
        let mut histogram = None;

        let batch = (rayon::current_num_threads() as u64 * 4).max(1);
        let mut start = 0;
        while start < self.config.trials {
            let end = (start + batch).min(self.config.trials);
            let outputs: Vec<Vec<TrialOutput>> = (start..end)
                .into_par_iter()
                .map(|trial| self.run_trial_all(trial, false))
                .collect::<Result<_>>()?;
            for out in outputs.into_iter().flatten() {
                for row in &out.rows {
                    trace.serialize(row).map_err(csv_io)?;
                }
                violations += out.bound_violations.len() as u64;
                finals.entry(out.variant).or_default().push(out.final_value());
                let r = rounds.entry(out.variant).or_insert(out.rounds);
                *r = (*r).min(out.rounds);
                if out.trial == 0 && histogram.is_none() {
                    histogram = out.histogram;
                }
            }
            start = end;
        }
        trace.flush()?;

        let mut summary = BTreeMap::new();
        for v in &self.variants {
            let xs = &finals[v];
            let entry = match metrics::aggregate(xs) {
                Ok(s) => SummaryEntry {
                    mean: s.mean,
                    sd: Some(s.sd),
                    trials: s.trials,
                    rounds: rounds[v],
                },
                Err(_) => SummaryEntry {
                    mean: xs[0],
                    sd: None,
                    trials: xs.len(),
                    rounds: rounds[v],
                },
            };
            summary.insert(v.name().to_string(), entry);
        }
        let summary_path = out.join("summary.json");
        metrics::write_summary(BufWriter::new(File::create(&summary_path)?), &summary)?;

        let mut files = vec![trace_path, summary_path];
        if let Some(h) = histogram {
            let path = out.join("apgd_ep_gaps_trial0.csv");
            h.write_csv(BufWriter::new(File::create(&path)?))?;
            files.push(path);
        }
        Ok(RunReport {
            summary,
            bound_violations: violations,
            files,
        })
    }
}

/// Checks that every served row came from the partition assigned to the
/// prior component in force. Returns the first offending round (1-based).
pub fn partition_mismatch(events: &[RoundEvent], component_partitions: &[usize]) -> Option<u64> {
    events.iter().enumerate().find_map(|(i, e)| match e.partition {
        Some(q) if component_partitions.get(e.component) == Some(&q) => None,
        _ => Some(i as u64 + 1),
    })
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}
