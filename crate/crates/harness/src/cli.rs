use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use usgd_core::diagnostics::EstimatorTag;
use usgd_core::model::NoiseLaw;
use usgd_core::rmlmc::Variant;

use crate::commands::{
    cmd_diverge_demo, cmd_estimators, cmd_exact_bias, cmd_figures, cmd_sqbias, in_pool, DivergeParams,
};
use crate::config::{parse_count, parse_k_list, ExperimentConfig, ModelSelector, QPolicy, SqBiasMethod, FULL_BUDGET};
use crate::Result;

#[derive(Debug, Parser)]
#[command(name = "usgd", version, about = "Unbiased SGD estimators and their squared-bias and variance diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact squared bias of the tail-averaged iterate.
    ExactBias(Common),
    /// Estimate the squared bias without access to H.
    Sqbias {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value = "RMLMCB")]
        method: SqBiasMethod,
    },
    /// Batches of AvSGD/USGD/AUSGD/Z/Zavg with exact and probe variances.
    Estimators {
        #[command(flatten)]
        common: Common,
        /// Comma-separated subset of AvSGD,USGD,AUSGD,Z,Zavg.
        #[arg(long, value_delimiter = ',')]
        estimators: Option<Vec<EstimatorTag>>,
    },
    /// Efficiency and excess-risk series.
    Figures {
        #[command(flatten)]
        common: Common,
        /// Build the series from a saved `estimators` CSV instead of sampling.
        #[arg(long)]
        from: Option<PathBuf>,
    },
    /// Constant-step SGD with a step above the stability threshold.
    DivergeDemo(DivergeArgs),
}

#[derive(Debug, Args)]
pub struct Common {
    /// dist1, dist2, or a path to a model file.
    #[arg(long, default_value = "dist1")]
    pub model: ModelSelector,
    /// Comma-separated values of k.
    #[arg(long = "k", value_parser = parse_k_list, default_value = "50,200,800,3200")]
    pub ks: std::vec::Vec<u64>,
    /// Total budget B; each batch has n = B/k replicates.
    #[arg(long, value_parser = parse_count, default_value = "1e6")]
    pub budget: u64,
    /// Use the full budget of 1e8.
    #[arg(long, conflicts_with = "budget")]
    pub paper_scale: bool,
    #[arg(long, default_value = "random")]
    pub variant: Variant,
    /// Firing probability, or `auto`.
    #[arg(long, default_value = "auto")]
    pub q: QPolicy,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Start every chain at the optimum.
    #[arg(long)]
    pub start_at_optimum: bool,
    /// CSV output path; a .json sibling holds config and timings.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl Common {
    pub fn config(&self) -> ExperimentConfig {
        ExperimentConfig {
            model: self.model.clone(),
            ks: self.ks.clone(),
            budget: if self.paper_scale { FULL_BUDGET } else { self.budget },
            variant: self.variant,
            q: self.q,
            alpha: self.alpha,
            delta: self.delta,
            seed: self.seed,
            threads: self.threads,
            start_at_optimum: self.start_at_optimum,
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum NoiseArg {
    Gaussian,
    Rademacher,
}

impl From<NoiseArg> for NoiseLaw {
    fn from(n: NoiseArg) -> Self {
        match n {
            NoiseArg::Gaussian => NoiseLaw::Gaussian,
            NoiseArg::Rademacher => NoiseLaw::Rademacher,
        }
    }
}

#[derive(Debug, Args)]
pub struct DivergeArgs {
    #[arg(long, default_value_t = 10)]
    pub dim: usize,
    #[arg(long, default_value_t = 4.0)]
    pub gamma: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 30)]
    pub k_max: u64,
    #[arg(long, value_parser = parse_count, default_value = "10000")]
    pub reps: u64,
    #[arg(long, value_enum, default_value = "gaussian")]
    pub noise: NoiseArg,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl DivergeArgs {
    pub fn params(&self) -> DivergeParams {
        DivergeParams {
            d: self.dim,
            gamma: self.gamma,
            sigma2: self.sigma2,
            noise: self.noise.into(),
            k_max: self.k_max,
            reps: self.reps as usize,
            seed: self.seed,
            threads: self.threads,
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::ExactBias(c) => {
            let cfg = c.config();
            in_pool(cfg.threads, || cmd_exact_bias(&cfg))??.emit(&cfg, c.out.as_deref())
        }
        Command::Sqbias { common, method } => {
            let cfg = common.config();
            in_pool(cfg.threads, || cmd_sqbias(&cfg, method))??.emit(&cfg, common.out.as_deref())
        }
        Command::Estimators { common, estimators } => {
            let mut cfg = common.config();
            if let Some(e) = estimators {
                cfg.estimators = e;
            }
            in_pool(cfg.threads, || cmd_estimators(&cfg))??.emit(&cfg, common.out.as_deref())
        }
        Command::Figures { common, from } => {
            let cfg = common.config();
            in_pool(cfg.threads, || cmd_figures(&cfg, from.as_deref()))??.emit(&cfg, common.out.as_deref())
        }
        Command::DivergeDemo(args) => {
            let p = args.params();
            cmd_diverge_demo(&p)?.emit(&p, args.out.as_deref())
        }
    }
}
