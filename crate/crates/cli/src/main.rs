use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use apgd::config::ExperimentConfig;
use apgd::priors::{BetaComponent, MassComponent, MixturePrior};
use apgd::{Error, Experiment};
use clap::{Args, Parser, Subcommand};

/// Online learning experiments with randomly missing sub-gradients.
#[derive(Debug, Parser)]
#[command(name = "apgd", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Linear adversary on a ball.
    RunSynthetic(RunArgs),
    /// Absolute-deviation regression over a CSV dataset.
    RunRegression(RunArgs),
    /// Logistic classification over a CSV dataset.
    RunClassification(RunArgs),
    /// Print the posterior observation probability for each gap as CSV.
    EstimatePriorDemo(DemoArgs),
    /// Check a configuration file without running it.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    rounds: Option<u64>,
    /// Comma-separated variant names.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct DemoArgs {
    /// Take the prior from this configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Beta component as `alpha,beta,weight`; repeatable.
    #[arg(long)]
    beta: Vec<String>,
    /// Point mass as `p,weight`; repeatable.
    #[arg(long)]
    mass: Vec<String>,
    /// Largest gap to tabulate.
    #[arg(long, default_value_t = 20)]
    max_gap: u64,
    /// Write the table here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

enum Failure {
    Error(Error),
    Violations(u64),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Violations(n)) => {
            eprintln!("error: the substitute regret bound was violated {n} times");
            ExitCode::from(3)
        }
    }
}

fn dispatch(command: Command) -> Result<(), Failure> {
    match command {
        Command::RunSynthetic(args) => run(args, "synthetic"),
        Command::RunRegression(args) => run(args, "regression"),
        Command::RunClassification(args) => run(args, "classification"),
        Command::EstimatePriorDemo(args) => demo(args),
        Command::ValidateConfig { config } => {
            let cfg = ExperimentConfig::load(&config)?;
            println!(
                "{}: ok ({}, {} variants, {} trials of {} rounds)",
                config.display(),
                cfg.environment.kind_name(),
                cfg.variants.len(),
                cfg.trials,
                cfg.rounds
            );
            Ok(())
        }
    }
}

fn run(args: RunArgs, kind: &str) -> Result<(), Failure> {
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if cfg.environment.kind_name() != kind {
        return Err(Error::Config {
            path: "environment.kind".into(),
            message: format!("expected `{kind}`, found `{}`", cfg.environment.kind_name()),
        }
        .into());
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(rounds) = args.rounds {
        cfg.rounds = rounds;
    }
    if let Some(variants) = args.variants {
        cfg.variants = variants;
    }
    let out = args.out.unwrap_or_else(|| cfg.resolve(&cfg.output.dir));
    let exp = Experiment::new(cfg)?;
    let report = exp.run_to_dir(&out)?;

    println!("{:<12} {:>12} {:>12} {:>7}", "variant", "mean", "sd", "trials");
    for v in exp.variants() {
        let e = &report.summary[v.name()];
        let sd = e.sd.map_or_else(|| "-".to_string(), |s| format!("{s:.6}"));
        println!("{:<12} {:>12.6} {:>12} {:>7}", v.label(), e.mean, sd, e.trials);
    }
    for f in &report.files {
        println!("wrote {}", f.display());
    }
    if report.bound_violations > 0 {
        return Err(Failure::Violations(report.bound_violations));
    }
    Ok(())
}

fn parse_numbers(flag: &str, text: &str, n: usize) -> Result<Vec<f64>, Error> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| Error::InvalidPrior(format!("--{flag} `{text}`: {e}")))?;
    if parts.len() != n {
        return Err(Error::InvalidPrior(format!("--{flag} `{text}`: expected {n} comma-separated numbers")));
    }
    Ok(parts)
}

fn demo_prior(args: &DemoArgs) -> Result<MixturePrior, Error> {
    if let Some(path) = &args.config {
        return ExperimentConfig::load(path)?.prior.build();
    }
    let betas = args
        .beta
        .iter()
        .map(|s| {
            parse_numbers("beta", s, 3).map(|v| BetaComponent {
                alpha: v[0],
                beta: v[1],
                weight: v[2],
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    let masses = args
        .mass
        .iter()
        .map(|s| parse_numbers("mass", s, 2).map(|v| MassComponent { p: v[0], weight: v[1] }))
        .collect::<Result<Vec<_>, _>>()?;
    MixturePrior::new(betas, masses)
}

fn demo(args: DemoArgs) -> Result<(), Failure> {
    let prior = demo_prior(&args)?;
    let mut table = String::from("gap,p_t,lower_bound\n");
    let mut state = prior.reset_after_observation();
    for gap in 1..=args.max_gap {
        let p = prior.posterior_p(&state)?;
        table.push_str(&format!("{gap},{p},{}\n", prior.posterior_lower_bound(&state)));
        state.advance(&prior);
    }
    match &args.out {
        Some(path) => write_file(path, &table)?,
        None => std::io::stdout().write_all(table.as_bytes()).map_err(Error::from)?,
    }
    Ok(())
}

fn write_file(path: &Path, text: &str) -> Result<(), Error> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, text)?;
    Ok(())
}
