use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Serialize, Serializer};
use usgd_core::diagnostics::EstimatorTag;
use usgd_core::model::{model_constants, ModelConfig, ModelConstants, ModelSpec};
use usgd_core::rmlmc::{auto_q, LevelDistribution, Variant};

use crate::{config_error, Result};

/// Full-scale budget, `n = 10⁸/k`.
pub const FULL_BUDGET: u64 = 100_000_000;
pub const DESK_BUDGET: u64 = 1_000_000;
pub const TABLE_KS: [u64; 4] = [50, 200, 800, 3200];

#[derive(Debug, Clone, PartialEq)]
pub enum ModelSelector {
    Dist1,
    Dist2,
    /// `γ = 4`, `d = 10`, `σ² = 1`.
    Divergence,
    File(PathBuf),
}

impl ModelSelector {
    pub fn load(&self) -> Result<ModelConfig> {
        match self {
            ModelSelector::Dist1 => Ok(ModelConfig::distribution_one()),
            ModelSelector::Dist2 => Ok(ModelConfig::distribution_two()),
            ModelSelector::Divergence => Ok(ModelConfig::divergence(10, 4.0, 1.0)),
            ModelSelector::File(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| config_error(format!("cannot read model file {}: {e}", path.display())))?;
                Ok(ModelConfig::parse(&text)?)
            }
        }
    }
}

impl fmt::Display for ModelSelector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModelSelector::Dist1 => f.write_str("dist1"),
            ModelSelector::Dist2 => f.write_str("dist2"),
            ModelSelector::Divergence => f.write_str("divergence"),
            ModelSelector::File(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for ModelSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        Ok(match s {
            "dist1" => ModelSelector::Dist1,
            "dist2" => ModelSelector::Dist2,
            "divergence" => ModelSelector::Divergence,
            "" => return Err("empty model selector".into()),
            path => ModelSelector::File(PathBuf::from(path)),
        })
    }
}

impl Serialize for ModelSelector {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum QPolicy {
    /// Expected cost of `f̂_k` twice that of `θ̄_k`.
    Auto,
    Fixed(f64),
}

impl QPolicy {
    pub fn resolve(self, k: u64, s: u64, delta: f64, variant: Variant) -> Result<f64> {
        match self {
            QPolicy::Auto => Ok(auto_q(k, s, &LevelDistribution::new(delta)?, variant)?),
            QPolicy::Fixed(q) if q > 0.0 && q <= 1.0 => Ok(q),
            QPolicy::Fixed(q) => Err(config_error(format!("q must lie in (0, 1], got {q}"))),
        }
    }
}

impl FromStr for QPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(QPolicy::Auto);
        }
        match s.parse::<f64>() {
            Ok(q) if q > 0.0 && q <= 1.0 => Ok(QPolicy::Fixed(q)),
            _ => Err(format!("expected `auto` or a number in (0, 1], got `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SqBiasMethod {
    /// Probe average of the squared mean debias draw (biased upward).
    Rmlmcb,
    /// Probe average of products of two independent debias draws.
    Urmlmcb,
}

impl SqBiasMethod {
    pub fn name(self) -> &'static str {
        match self {
            SqBiasMethod::Rmlmcb => "RMLMCB",
            SqBiasMethod::Urmlmcb => "URMLMCB",
        }
    }
}

impl FromStr for SqBiasMethod {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "rmlmcb" => Ok(SqBiasMethod::Rmlmcb),
            "urmlmcb" => Ok(SqBiasMethod::Urmlmcb),
            other => Err(format!("unknown squared-bias method `{other}` (expected RMLMCB|URMLMCB)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub model: ModelSelector,
    pub ks: Vec<u64>,
    /// Total sampling budget `B`; batches use `n = B/k` replicates.
    pub budget: u64,
    pub estimators: Vec<EstimatorTag>,
    pub variant: Variant,
    pub q: QPolicy,
    pub alpha: Option<f64>,
    pub delta: Option<f64>,
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    pub threads: usize,
    /// Replace `θ0` by `θ*`.
    pub start_at_optimum: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            model: ModelSelector::Dist1,
            ks: TABLE_KS.to_vec(),
            budget: DESK_BUDGET,
            estimators: EstimatorTag::ESTIMATORS.to_vec(),
            variant: Variant::RandomStart,
            q: QPolicy::Auto,
            alpha: None,
            delta: None,
            seed: 1,
            threads: 0,
            start_at_optimum: false,
        }
    }
}

/// A model with its derived constants.
#[derive(Debug, Clone)]
pub struct Resolved {
    pub name: String,
    pub model: ModelSpec,
    pub constants: ModelConstants,
}

impl ExperimentConfig {
    pub fn model_config(&self) -> Result<ModelConfig> {
        let mut cfg = self.model.load()?;
        if let Some(a) = self.alpha {
            cfg.alpha = a;
        }
        if let Some(d) = self.delta {
            cfg.delta = d;
        }
        Ok(cfg)
    }

    pub fn resolve(&self) -> Result<Resolved> {
        let cfg = self.model_config()?;
        let mut model = cfg.build()?;
        if self.start_at_optimum {
            let star = model.theta_star().to_vec();
            model = model.with_theta0(star)?;
        }
        if !model.is_diagonal() {
            return Err(config_error(format!(
                "model `{}` is the divergence example; use the diverge-demo subcommand",
                self.model
            )));
        }
        let constants = model_constants(&model, cfg.alpha, cfg.delta, cfg.gamma.as_override())?;
        Ok(Resolved { name: self.model.to_string(), model, constants })
    }

    pub fn validate_ks(&self, min_k: u64) -> Result<()> {
        if self.ks.is_empty() {
            return Err(config_error("no values of k given"));
        }
        if let Some(k) = self.ks.iter().find(|k| **k < min_k) {
            return Err(config_error(format!("k = {k} is below the minimum {min_k}")));
        }
        Ok(())
    }

    /// `n = B/k`, at least 2.
    pub fn n_for(&self, k: u64) -> Result<usize> {
        let n = self.budget / k;
        if n < 2 {
            return Err(config_error(format!("budget {} gives fewer than 2 replicates at k = {k}", self.budget)));
        }
        Ok(n as usize)
    }
}

/// Parses counts such as `1000000`, `1e6` or `2.5e5`.
pub fn parse_count(s: &str) -> std::result::Result<u64, String> {
    if let Ok(v) = s.parse::<u64>() {
        return Ok(v);
    }
    match s.parse::<f64>() {
        Ok(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("expected a nonnegative integer, got `{s}`")),
    }
}

/// Parses a comma-separated list of `k` values.
pub fn parse_k_list(s: &str) -> std::result::Result<Vec<u64>, String> {
    s.split(',').map(|p| parse_count(p.trim())).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_and_lists() {
        assert_eq!(parse_count("1e6").unwrap(), 1_000_000);
        assert_eq!(parse_count("250").unwrap(), 250);
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert_eq!(parse_k_list("50, 200,800").unwrap(), vec![50, 200, 800]);
        assert!(parse_k_list("50,x").is_err());
    }

    #[test]
    fn selectors() {
        assert_eq!("dist2".parse::<ModelSelector>().unwrap(), ModelSelector::Dist2);
        assert_eq!(
            "cfg/model.txt".parse::<ModelSelector>().unwrap(),
            ModelSelector::File(PathBuf::from("cfg/model.txt"))
        );
        assert!(ModelSelector::File("/nonexistent/model".into()).load().is_err());
    }

    #[test]
    fn q_policy() {
        assert_eq!("auto".parse::<QPolicy>().unwrap(), QPolicy::Auto);
        assert_eq!("0.25".parse::<QPolicy>().unwrap(), QPolicy::Fixed(0.25));
        assert!("0".parse::<QPolicy>().is_err());
        assert!("1.5".parse::<QPolicy>().is_err());
        let q = QPolicy::Auto.resolve(50, 25, 1.5, Variant::RandomStart).unwrap();
        assert!(q > 0.0 && q < 1.0);
    }

    #[test]
    fn replicate_counts() {
        let cfg = ExperimentConfig::default();
        assert_eq!(cfg.n_for(50).unwrap(), 20_000);
        let tiny = ExperimentConfig { budget: 100, ..cfg };
        assert!(tiny.n_for(80).is_err());
    }

    #[test]
    fn divergence_is_rejected_outside_the_demo() {
        let cfg = ExperimentConfig { model: ModelSelector::Divergence, ..Default::default() };
        assert!(matches!(cfg.resolve(), Err(crate::HarnessError::Config(_))));
    }
}
