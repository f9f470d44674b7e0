use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use usgd_core::diagnostics::{
    assemble_risk, efficiency, run_batch, sq_bias_rmlmcb, sq_bias_urmlmcb, variance_exact_h, variance_probe_h,
    EstimatorTag,
};
use usgd_core::model::{dot, exact_sq_bias, GammaPolicy, ModelConfig, ModelFamily, ModelKind, NoiseLaw};
use usgd_core::sgd::sgd_update;
use usgd_core::{Lineage, Role};

use crate::config::{ExperimentConfig, SqBiasMethod};
use crate::output::{read_result_rows, DivergeRow, Report, ResultRow, SeriesRow};
use crate::{config_error, Result};

/// Numbers of averaged copies used by the excess-risk figures.
pub const FIGURE_MS: [u64; 3] = [1, 100, 10_000];

/// Runs `f` on a dedicated pool with `threads` workers (0 = all cores).
pub fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| config_error(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

fn seconds(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Exact squared bias of `θ̄_k` from the closed-form mean; no sampling.
pub fn cmd_exact_bias(cfg: &ExperimentConfig) -> Result<Report<ResultRow>> {
    cfg.validate_ks(1)?;
    let r = cfg.resolve()?;
    let mut report = Report::new("exact-bias");
    for &k in &cfg.ks {
        let start = Instant::now();
        let s = r.constants.burn_in(k);
        let value = exact_sq_bias(&r.model, k, s, r.constants.gamma)?;
        report.push(
            ResultRow {
                command: "exact-bias".into(),
                model: r.name.clone(),
                k,
                method: "Exact".into(),
                sq_bias: Some(value),
                exact_sq_bias: Some(value),
                ..Default::default()
            },
            seconds(start),
        );
    }
    Ok(report)
}

/// H-free squared-bias estimates. RMLMCB uses `n = B/k` debias draws and
/// `n′ = B` probes; URMLMCB uses `B/k` repetitions with `n′ = k` probes each.
pub fn cmd_sqbias(cfg: &ExperimentConfig, method: SqBiasMethod) -> Result<Report<ResultRow>> {
    cfg.validate_ks(2)?;
    let r = cfg.resolve()?;
    let mut report = Report::new("sqbias");
    for &k in &cfg.ks {
        let start = Instant::now();
        let n = cfg.n_for(k)?;
        let lineage = Lineage::new(cfg.seed).tagged(&format!("{}/{}", method.name(), cfg.variant)).with_k(k);
        let (est, n_prime) = match method {
            SqBiasMethod::Rmlmcb => {
                let n_prime = cfg.budget as usize;
                (sq_bias_rmlmcb(&r.model, &r.constants, k, n, n_prime, cfg.variant, lineage)?, n_prime)
            }
            SqBiasMethod::Urmlmcb => {
                let n_prime = k as usize;
                (sq_bias_urmlmcb(&r.model, &r.constants, k, n, n_prime, cfg.variant, lineage)?, n_prime)
            }
        };
        let exact = exact_sq_bias(&r.model, k, r.constants.burn_in(k), r.constants.gamma)?;
        report.push(
            ResultRow {
                command: "sqbias".into(),
                model: r.name.clone(),
                k,
                method: format!("{}/{}", method.name(), cfg.variant),
                n: Some(n as u64),
                n_prime: Some(n_prime as u64),
                sq_bias: Some(est.value),
                sq_bias_raw: Some(est.raw),
                sq_bias_se: Some(est.se),
                sq_bias_clamped: Some(est.clamped),
                exact_sq_bias: Some(exact),
                cost: Some(est.cost),
                ..Default::default()
            },
            seconds(start),
        );
    }
    Ok(report)
}

/// `n = B/k` replicates of each estimator with exact-H and probe variances.
pub fn cmd_estimators(cfg: &ExperimentConfig) -> Result<Report<ResultRow>> {
    cfg.validate_ks(2)?;
    if cfg.estimators.is_empty() {
        return Err(config_error("no estimators selected"));
    }
    let r = cfg.resolve()?;
    let mut report = Report::new("estimators");
    for &k in &cfg.ks {
        let n = cfg.n_for(k)?;
        let s = r.constants.burn_in(k);
        for &tag in &cfg.estimators {
            let start = Instant::now();
            let q = match tag.variant() {
                Some(v) if tag.is_unbiased_for_optimum() => Some(cfg.q.resolve(k, s, r.constants.delta, v)?),
                _ => None,
            };
            let lineage = Lineage::new(cfg.seed).tagged(tag.name()).with_k(k);
            let batch = run_batch(&r.model, &r.constants, k, tag, q.unwrap_or(1.0), n, lineage)?;
            let var = variance_exact_h(&batch, &r.model)?;
            let n_prime = n * k as usize;
            let probes = Lineage::new(cfg.seed).tagged(&format!("{}/probe", tag.name())).with_k(k);
            let est = variance_probe_h(&batch, &r.model, k as usize, n_prime, probes)?;
            let exact = match tag {
                EstimatorTag::AvSgd => Some(exact_sq_bias(&r.model, k, s, r.constants.gamma)?),
                _ => None,
            };
            report.push(
                ResultRow {
                    command: "estimators".into(),
                    model: r.name.clone(),
                    k,
                    method: tag.name().into(),
                    n: Some(n as u64),
                    n_prime: Some(n_prime as u64),
                    q,
                    exact_sq_bias: exact,
                    sq_dist: Some(batch.sq_dist(&r.model)),
                    variance: Some(var.value),
                    variance_se: Some(var.se),
                    est_variance: Some(est.value),
                    est_variance_se: Some(est.se),
                    cost: Some(batch.total_cost()),
                    mean_cost: Some(batch.mean_cost()),
                    cost_of_est: Some(batch.total_cost() + est.cost),
                    ..Default::default()
                },
                seconds(start),
            );
        }
    }
    Ok(report)
}

/// Efficiency and excess-risk series from estimator rows. The squared bias is
/// the exact one for AvSGD and zero for the unbiased estimators.
pub fn figures_from_rows(rows: &[ResultRow], wall_times: &[f64]) -> Result<Report<SeriesRow>> {
    let mut report = Report::new("figures");
    for (i, row) in rows.iter().enumerate() {
        let wall = wall_times.get(i).copied().unwrap_or(0.0);
        let tag: EstimatorTag = row.method.parse().map_err(config_error)?;
        let missing = |what: &str| config_error(format!("row k={} {} lacks `{what}`", row.k, row.method));
        let variance = row.variance.ok_or_else(|| missing("variance"))?;
        let mean_cost = row.mean_cost.ok_or_else(|| missing("mean_cost"))?;
        report.push(
            SeriesRow {
                series: "efficiency".into(),
                k: row.k,
                method: row.method.clone(),
                m: None,
                value: efficiency(mean_cost, variance),
            },
            wall,
        );
        let (sq_bias, source) = if tag.is_unbiased_for_optimum() {
            (0.0, "unbiased")
        } else {
            (row.exact_sq_bias.ok_or_else(|| missing("exact_sq_bias"))?, "exact")
        };
        for m in FIGURE_MS {
            let risk = assemble_risk(sq_bias, variance, m)?.with_sources(source, "variance_exact_h");
            report.push(
                SeriesRow {
                    series: "excess_risk".into(),
                    k: row.k,
                    method: row.method.clone(),
                    m: Some(m),
                    value: risk.excess_risk,
                },
                wall,
            );
        }
    }
    Ok(report)
}

/// Figure series from a fresh estimator run, or from a saved estimator CSV.
pub fn cmd_figures(cfg: &ExperimentConfig, from: Option<&Path>) -> Result<Report<SeriesRow>> {
    match from {
        Some(path) => {
            let rows = read_result_rows(path)?;
            figures_from_rows(&rows, &[])
        }
        None => {
            let est = cmd_estimators(cfg)?;
            figures_from_rows(&est.rows, &est.wall_times)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DivergeParams {
    pub d: usize,
    pub gamma: f64,
    pub sigma2: f64,
    pub noise: NoiseLaw,
    pub k_max: u64,
    pub reps: usize,
    pub seed: u64,
    pub threads: usize,
}

impl Default for DivergeParams {
    fn default() -> Self {
        Self { d: 10, gamma: 4.0, sigma2: 1.0, noise: NoiseLaw::Gaussian, k_max: 30, reps: 10_000, seed: 1, threads: 0 }
    }
}

/// Constant-step SGD with `γ > 2` on the sphere/spike design (`v = e₁`,
/// `θ0 = 1/√d`, `s = 0`): closed-form and simulated `vᵀE(θ̄_k)` for
/// `k = 1..=k_max`.
pub fn cmd_diverge_demo(p: &DivergeParams) -> Result<Report<DivergeRow>> {
    if p.gamma.is_nan() || p.gamma <= 2.0 {
        return Err(config_error(format!("the divergence demo needs gamma > 2, got {}", p.gamma)));
    }
    if p.k_max == 0 || p.reps < 2 || p.d == 0 {
        return Err(config_error("diverge-demo needs d ≥ 1, k_max ≥ 1 and reps ≥ 2"));
    }
    let cfg = ModelConfig {
        family: ModelFamily::Divergence { d: p.d, sigma2: p.sigma2, noise: p.noise },
        gamma: GammaPolicy::Fixed(p.gamma),
        ..ModelConfig::divergence(p.d, p.gamma, p.sigma2)
    };
    let model = cfg.build()?;
    let ModelKind::SphereDivergence(div) = model.kind() else {
        unreachable!("divergence config builds a divergence model")
    };
    let v = div.v.clone();
    let prob = div.p;
    let a = div.contraction_along_v();
    let v_theta0 = dot(&v, model.theta0());
    let k_max = p.k_max as usize;

    let start = Instant::now();
    let lineage = Lineage::new(p.seed).tagged("diverge");
    let paths: Vec<Vec<f64>> = in_pool(p.threads, || {
        (0..p.reps as u64)
            .into_par_iter()
            .map(|r| {
                let stream = lineage.replicate(r).noise(Role::Chain);
                let mut theta = model.theta0().to_vec();
                let mut x = vec![0.0; p.d];
                let mut sum_v = 0.0;
                let mut out = Vec::with_capacity(k_max);
                for k in 1..=k_max {
                    sum_v += dot(&v, &theta);
                    out.push(sum_v / k as f64);
                    if k < k_max {
                        let y = stream.fill(&model, k as i64 - 1, &mut x);
                        sgd_update(&mut theta, &x, y, p.gamma);
                    }
                }
                out
            })
            .collect()
    })?;
    let elapsed = seconds(start) / k_max as f64;

    let mut report = Report::new("diverge-demo");
    let n = p.reps as f64;
    for k in 1..=k_max {
        let mean = paths.iter().map(|row| row[k - 1]).sum::<f64>() / n;
        let var = paths.iter().map(|row| (row[k - 1] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let sum_form = (1.0 - a.powi(k as i32)) / (1.0 - a) * v_theta0;
        let closed = sum_form / k as f64;
        report.push(
            DivergeRow {
                k: k as u64,
                closed_form: closed,
                sum_form,
                simulated_mean: mean,
                simulated_se: (var / n).sqrt(),
                lower_bound: prob / 2.0 * closed * closed,
            },
            elapsed,
        );
    }
    Ok(report)
}
