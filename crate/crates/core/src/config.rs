//! Experiment configuration files.
//!
//! A configuration is a TOML document. Relative paths inside it are resolved
//! against the directory holding the file.
//!
//! ```toml
//! rounds = 10000
//! trials = 50
//! seed = 7
//! variants = ["ignore", "with_known", "with_prior", "gml", "uniform", "apgd_ep"]
//! disclosure = "known"
//!
//! [environment]
//! kind = "synthetic"
//! dim = 16
//! scale = 0.25
//!
//! [[prior.beta]]
//! alpha = 4.0
//! beta = 13.0
//! weight = 0.5
//!
//! [[prior.beta]]
//! alpha = 13.0
//! beta = 4.0
//! weight = 0.5
//! ```

use std::collections::HashSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::datasets::{PartitionRule, Schema};
use crate::environments::{Disclosure, NoiseModel, SignLaw};
use crate::error::{Error, Result};
use crate::estimators::Variant;
use crate::priors::{BetaComponent, MassComponent, MixturePrior};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub rounds: u64,
    pub trials: u64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "all_variants")]
    pub variants: Vec<String>,
    pub disclosure: Disclosure,
    pub environment: EnvironmentConfig,
    pub prior: PriorConfig,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub empirical: EmpiricalConfig,
    #[serde(default)]
    pub noise: Option<NoiseModel>,
    #[serde(default)]
    pub checks: ChecksConfig,
    /// Directory relative paths are resolved against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

fn all_variants() -> Vec<String> {
    Variant::ALL.iter().map(|v| v.name().to_string()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum EnvironmentConfig {
    Synthetic {
        dim: usize,
        scale: f64,
        #[serde(default = "default_sign_law")]
        sign_law: SignLaw,
        #[serde(default = "one")]
        radius: f64,
    },
    Regression(DatasetConfig),
    Classification(DatasetConfig),
}

fn default_sign_law() -> SignLaw {
    SignLaw::Independent
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub csv: PathBuf,
    pub schema: Schema,
    #[serde(default = "one_u64")]
    pub copies: u64,
    #[serde(default)]
    pub take: Option<u64>,
    #[serde(default)]
    pub semi_adversarial: bool,
    /// Partition rule; targets below 2000 for regression, label 1 for
    /// classification when absent.
    #[serde(default)]
    pub partition: Option<PartitionRule>,
    /// Partition served while each prior component is active.
    #[serde(default = "identity_map")]
    pub component_partitions: Vec<usize>,
    /// Added to every target after loading.
    #[serde(default)]
    pub target_shift: f64,
    /// Ball radius; regression derives it from least squares when absent,
    /// classification uses 1.
    #[serde(default)]
    pub radius: Option<f64>,
}

fn identity_map() -> Vec<usize> {
    vec![0, 1]
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PriorConfig {
    #[serde(default)]
    pub beta: Vec<BetaComponent>,
    #[serde(default)]
    pub mass: Vec<MassComponent>,
}

impl PriorConfig {
    pub fn build(&self) -> Result<MixturePrior> {
        MixturePrior::new(self.beta.clone(), self.mass.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_out_dir")]
    pub dir: PathBuf,
    /// Write every n-th round to the trace (the last round always appears).
    #[serde(default = "one_u64")]
    pub trace_every: u64,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: default_out_dir(),
            trace_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmpiricalConfig {
    #[serde(default)]
    pub exclude_current: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    /// Check the regret bound on the substitute losses every round.
    #[serde(default = "yes")]
    pub substitute_bound: bool,
}

fn yes() -> bool {
    true
}

impl Default for ChecksConfig {
    fn default() -> Self {
        Self {
            substitute_bound: true,
        }
    }
}

fn invalid(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| {
            let path = e.span().map_or_else(String::new, |s| format!("bytes {}..{}", s.start, s.end));
            invalid(&path, e.message())
        })
    }

    /// Reads and validates a configuration file.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)?;
        let mut cfg = Self::from_toml(&text)?;
        cfg.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is serializable")
    }

    /// Resolves `p` against the configuration's directory.
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    /// Variants in the order given, parsed.
    pub fn parsed_variants(&self) -> Result<Vec<Variant>> {
        self.variants
            .iter()
            .map(|s| s.parse::<Variant>().map_err(|e| invalid("variants", e)))
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 {
            return Err(invalid("rounds", "must be at least 1"));
        }
        if self.trials == 0 {
            return Err(invalid("trials", "must be at least 1"));
        }
        let variants = self.parsed_variants()?;
        if variants.is_empty() {
            return Err(invalid("variants", "at least one variant is required"));
        }
        let mut seen = HashSet::new();
        for v in &variants {
            if !seen.insert(*v) {
                return Err(invalid("variants", format!("`{v}` listed twice")));
            }
            match (v, self.disclosure) {
                (Variant::WithKnown, d) if d != Disclosure::Known => {
                    return Err(invalid(
                        "variants",
                        "with_known needs disclosure = \"known\"",
                    ))
                }
                (Variant::WithPrior, Disclosure::None) => {
                    return Err(invalid(
                        "variants",
                        "with_prior needs disclosure = \"known\" or \"prior_only\"",
                    ))
                }
                _ => {}
            }
        }
        let prior = self.prior.build().map_err(|e| invalid("prior", e.to_string()))?;
        if self.output.trace_every == 0 {
            return Err(invalid("output.trace_every", "must be at least 1"));
        }
        if let Some(noise) = &self.noise {
            if !(noise.sigma.is_finite() && noise.sigma >= 0.0) {
                return Err(invalid("noise.sigma", "must be finite and non-negative"));
            }
        }
        match &self.environment {
            EnvironmentConfig::Synthetic { dim, scale, radius, .. } => {
                if *dim == 0 {
                    return Err(invalid("environment.dim", "must be at least 1"));
                }
                if !(scale.is_finite() && *scale > 0.0) {
                    return Err(invalid("environment.scale", "must be positive"));
                }
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(invalid("environment.radius", "must be positive"));
                }
            }
            EnvironmentConfig::Regression(d) | EnvironmentConfig::Classification(d) => {
                if d.copies == 0 {
                    return Err(invalid("environment.copies", "must be at least 1"));
                }
                if d.take == Some(0) {
                    return Err(invalid("environment.take", "empty sample stream"));
                }
                if let Some(r) = d.radius {
                    if !(r.is_finite() && r > 0.0) {
                        return Err(invalid("environment.radius", "must be positive"));
                    }
                }
                if !d.target_shift.is_finite() {
                    return Err(invalid("environment.target_shift", "must be finite"));
                }
                if d.semi_adversarial {
                    if d.component_partitions.len() != prior.num_components() {
                        return Err(invalid(
                            "environment.component_partitions",
                            format!(
                                "needs one entry per prior component ({}), got {}",
                                prior.num_components(),
                                d.component_partitions.len()
                            ),
                        ));
                    }
                    if d.component_partitions.iter().any(|&q| q > 1) {
                        return Err(invalid("environment.component_partitions", "entries must be 0 or 1"));
                    }
                }
            }
        }
        Ok(())
    }
}

impl EnvironmentConfig {
    pub fn kind_name(&self) -> &'static str {
        match self {
            EnvironmentConfig::Synthetic { .. } => "synthetic",
            EnvironmentConfig::Regression(_) => "regression",
            EnvironmentConfig::Classification(_) => "classification",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
rounds = 100
trials = 2
seed = 1
variants = ["with_known"]
disclosure = "known"

[environment]
kind = "synthetic"
dim = 16
scale = 0.25

[[prior.beta]]
alpha = 4.0
beta = 13.0
weight = 0.5

[[prior.beta]]
alpha = 13.0
beta = 4.0
weight = 0.5
"#;

    #[test]
    fn parses_and_validates() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        cfg.validate().unwrap();
        assert_eq!(cfg.parsed_variants().unwrap(), vec![Variant::WithKnown]);
        assert_eq!(cfg.output.trace_every, 1);
        assert!(!cfg.empirical.exclude_current);
        assert!(cfg.checks.substitute_bound);
    }

    #[test]
    fn bad_weights_name_the_prior() {
        let cfg = ExperimentConfig::from_toml(&BASE.replace("weight = 0.5\n\n[[prior.beta]]", "weight = 0.4\n\n[[prior.beta]]")).unwrap();
        match cfg.validate().unwrap_err() {
            Error::Config { path, message } => {
                assert_eq!(path, "prior");
                assert!(message.contains("0.9"), "{message}");
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn disclosure_gates_variants() {
        let cfg = ExperimentConfig::from_toml(&BASE.replace("\"known\"", "\"prior_only\"")).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config { ref path, .. }) if path == "variants"));
        let cfg = ExperimentConfig::from_toml(
            &BASE
                .replace("\"known\"", "\"none\"")
                .replace("[\"with_known\"]", "[\"with_prior\"]"),
        )
        .unwrap();
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn unknown_variant_and_zero_rounds() {
        let cfg = ExperimentConfig::from_toml(&BASE.replace("[\"with_known\"]", "[\"adam\"]")).unwrap();
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig::from_toml(&BASE.replace("rounds = 100", "rounds = 0")).unwrap();
        assert!(matches!(cfg.validate(), Err(Error::Config { ref path, .. }) if path == "rounds"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(ExperimentConfig::from_toml(&format!("{BASE}\nbogus = 1\n")).is_err());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(ExperimentConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }
}
