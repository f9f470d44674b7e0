//! Estimators of squared bias, variance and excess risk, replicated batch
//! generation, and closed-form bound calculators.
//!
//! Every Monte Carlo scalar comes with a grouped (delete-a-group) jackknife
//! standard error. Reductions run in replicate order, so results do not
//! depend on the number of worker threads.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::model::{dot, ModelConstants, ModelSpec};
use crate::rmlmc::{sample_debias, sample_unbiased, Variant};
use crate::sgd::{run_tail_average, CostMeter};
use crate::stream::{Lineage, NoiseStream, Role};

/// Number of jackknife groups.
pub const JACKKNIFE_GROUPS: usize = 20;

/// Probes handled per parallel work item.
const PROBE_CHUNK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimatorTag {
    /// Tail-averaged SGD `θ̄_k`.
    AvSgd,
    /// `θ̄_k` debiased with random-start differences.
    Usgd,
    /// `θ̄_k` debiased with average-start differences.
    Ausgd,
    /// Random-start debias draw alone.
    Z,
    /// Average-start debias draw alone.
    Zavg,
}

impl EstimatorTag {
    pub const ESTIMATORS: [EstimatorTag; 3] = [EstimatorTag::AvSgd, EstimatorTag::Usgd, EstimatorTag::Ausgd];

    pub fn name(self) -> &'static str {
        match self {
            EstimatorTag::AvSgd => "AvSGD",
            EstimatorTag::Usgd => "USGD",
            EstimatorTag::Ausgd => "AUSGD",
            EstimatorTag::Z => "Z",
            EstimatorTag::Zavg => "Zavg",
        }
    }

    /// Debiasing variant, if the estimator uses one.
    pub fn variant(self) -> Option<Variant> {
        match self {
            EstimatorTag::AvSgd => None,
            EstimatorTag::Usgd | EstimatorTag::Z => Some(Variant::RandomStart),
            EstimatorTag::Ausgd | EstimatorTag::Zavg => Some(Variant::AverageStart),
        }
    }

    pub fn debias_only(variant: Variant) -> Self {
        match variant {
            Variant::RandomStart => EstimatorTag::Z,
            Variant::AverageStart => EstimatorTag::Zavg,
        }
    }

    pub fn is_unbiased_for_optimum(self) -> bool {
        matches!(self, EstimatorTag::Usgd | EstimatorTag::Ausgd)
    }
}

impl fmt::Display for EstimatorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for EstimatorTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "avsgd" => Ok(EstimatorTag::AvSgd),
            "usgd" => Ok(EstimatorTag::Usgd),
            "ausgd" => Ok(EstimatorTag::Ausgd),
            "z" => Ok(EstimatorTag::Z),
            "zavg" => Ok(EstimatorTag::Zavg),
            other => Err(format!("unknown estimator `{other}` (expected AvSGD|USGD|AUSGD|Z|Zavg)")),
        }
    }
}

/// A Monte Carlo scalar with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub se: f64,
}

/// `n` replicate outputs of one estimator with their costs.
#[derive(Debug, Clone, PartialEq)]
pub struct EstimateBatch {
    tag: EstimatorTag,
    lineage: Lineage,
    values: Vec<Vec<f64>>,
    costs: Vec<u64>,
}

impl EstimateBatch {
    pub fn new(tag: EstimatorTag, lineage: Lineage, values: Vec<Vec<f64>>, costs: Vec<u64>) -> Result<Self> {
        if values.is_empty() {
            return Err(invalid("values", "a batch needs at least one replicate"));
        }
        if values.len() != costs.len() {
            return Err(invalid("costs", format!("{} costs for {} replicates", costs.len(), values.len())));
        }
        let d = values[0].len();
        if d == 0 || values.iter().any(|v| v.len() != d) {
            return Err(invalid("values", "replicates must share one nonzero dimension"));
        }
        if values.iter().flatten().any(|v| !v.is_finite()) {
            return Err(invalid("values", "replicates must be finite"));
        }
        Ok(Self { tag, lineage, values, costs })
    }

    pub fn tag(&self) -> EstimatorTag {
        self.tag
    }

    pub fn lineage(&self) -> Lineage {
        self.lineage
    }

    pub fn n(&self) -> usize {
        self.values.len()
    }

    pub fn dim(&self) -> usize {
        self.values[0].len()
    }

    pub fn values(&self) -> &[Vec<f64>] {
        &self.values
    }

    pub fn costs(&self) -> &[u64] {
        &self.costs
    }

    pub fn total_cost(&self) -> u64 {
        self.costs.iter().sum()
    }

    pub fn mean_cost(&self) -> f64 {
        self.total_cost() as f64 / self.n() as f64
    }

    pub fn mean(&self) -> Vec<f64> {
        mean_of(&self.values, 0..self.n(), None)
    }

    /// `‖ψ̄ − θ*‖²_H`; needs the true optimum.
    pub fn sq_dist(&self, model: &ModelSpec) -> f64 {
        let diff: Vec<f64> = self.mean().iter().zip(model.theta_star()).map(|(a, b)| a - b).collect();
        model.h_norm_sq(&diff)
    }
}

/// Mean of `rows[range]`, skipping `skip` if given.
fn mean_of(rows: &[Vec<f64>], range: Range<usize>, skip: Option<Range<usize>>) -> Vec<f64> {
    let mut acc = vec![0.0; rows[0].len()];
    let mut count = 0usize;
    for (i, row) in rows[range.clone()].iter().enumerate() {
        if skip.as_ref().is_some_and(|s| s.contains(&(range.start + i))) {
            continue;
        }
        acc.iter_mut().zip(row).for_each(|(a, b)| *a += b);
        count += 1;
    }
    let inv = 1.0 / count as f64;
    acc.iter_mut().for_each(|a| *a *= inv);
    acc
}

/// Contiguous, nearly equal groups covering `0..n`.
fn groups(n: usize, g: usize) -> Vec<Range<usize>> {
    let g = g.min(n).max(1);
    (0..g).map(|i| (i * n / g)..((i + 1) * n / g)).collect()
}

/// Delete-a-group jackknife standard error from leave-one-group-out values.
fn jackknife_se(leave_out: &[f64]) -> f64 {
    let g = leave_out.len();
    if g < 2 {
        return f64::NAN;
    }
    let mean = leave_out.iter().sum::<f64>() / g as f64;
    let ss: f64 = leave_out.iter().map(|v| (v - mean).powi(2)).sum();
    ((g - 1) as f64 / g as f64 * ss).sqrt()
}

/// Runs `n` independent replicates of an estimator. Replicate `i` draws all
/// its randomness from `lineage.replicate(i)`; the result does not depend on
/// the size of the rayon pool it runs on.
pub fn run_batch(
    model: &ModelSpec,
    constants: &ModelConstants,
    k: u64,
    tag: EstimatorTag,
    q: f64,
    n: usize,
    lineage: Lineage,
) -> Result<EstimateBatch> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    let rows: Vec<(Vec<f64>, u64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| run_replicate(model, constants, k, tag, q, lineage.replicate(i)))
        .collect::<Result<_>>()?;
    let (values, costs) = rows.into_iter().unzip();
    EstimateBatch::new(tag, lineage, values, costs)
}

fn run_replicate(
    model: &ModelSpec,
    constants: &ModelConstants,
    k: u64,
    tag: EstimatorTag,
    q: f64,
    rep: Lineage,
) -> Result<(Vec<f64>, u64)> {
    let mut rng = rep.control();
    match tag {
        EstimatorTag::AvSgd => {
            let mut meter = CostMeter::new();
            let v =
                run_tail_average(model, k, constants.burn_in(k), constants.gamma, &rep.noise(Role::Chain), &mut meter)?;
            Ok((v, meter.count()))
        }
        EstimatorTag::Usgd | EstimatorTag::Ausgd => {
            let variant = tag.variant().expect("debiased estimator");
            let est = sample_unbiased(
                model,
                k,
                constants,
                q,
                variant,
                &rep.noise(Role::Chain),
                &rep.noise(Role::Debias),
                &mut rng,
            )?;
            Ok((est.value, est.cost))
        }
        EstimatorTag::Z | EstimatorTag::Zavg => {
            let variant = tag.variant().expect("debias draw");
            let draw = sample_debias(model, k, constants, variant, &rep.noise(Role::Debias), &mut rng)?;
            Ok((draw.z, draw.cost))
        }
    }
}

/// `(uᵀx)²`; its mean over draws of `x` independent of `u` is `‖u‖²_H`.
pub fn h_quadratic_probe(u: &[f64], x: &[f64]) -> f64 {
    dot(u, x).powi(2)
}

/// Grouped sums of `x xᵀ` over probe covariates `x_t`, `t = 0..n`.
struct ProbeMoments {
    d: usize,
    /// Row-major `d × d` sums per group.
    sums: Vec<Vec<f64>>,
    counts: Vec<usize>,
}

impl ProbeMoments {
    fn collect(model: &ModelSpec, stream: &NoiseStream, n: usize, n_groups: usize) -> Self {
        let d = model.dim();
        let ranges = groups(n, n_groups);
        let work: Vec<(usize, Range<usize>)> = ranges
            .iter()
            .enumerate()
            .flat_map(|(g, r)| {
                r.clone().step_by(PROBE_CHUNK).map(move |start| (g, start..(start + PROBE_CHUNK).min(r.end)))
            })
            .collect();
        let partial: Vec<(usize, Vec<f64>)> = work
            .into_par_iter()
            .map(|(g, r)| {
                let mut m = vec![0.0; d * d];
                let mut x = vec![0.0; d];
                for t in r {
                    stream.fill(model, t as i64, &mut x);
                    for i in 0..d {
                        let xi = x[i];
                        let row = &mut m[i * d..(i + 1) * d];
                        for j in i..d {
                            row[j] += xi * x[j];
                        }
                    }
                }
                (g, m)
            })
            .collect();
        let mut sums = vec![vec![0.0; d * d]; ranges.len()];
        for (g, m) in partial {
            sums[g].iter_mut().zip(&m).for_each(|(a, b)| *a += b);
        }
        for s in &mut sums {
            for i in 0..d {
                for j in 0..i {
                    s[i * d + j] = s[j * d + i];
                }
            }
        }
        Self { d, sums, counts: ranges.iter().map(|r| r.len()).collect() }
    }

    fn n_groups(&self) -> usize {
        self.counts.len()
    }

    /// `(1/n)Σ_t (uᵀx_t)²` over all groups except `skip`.
    fn mean_quadratic(&self, u: &[f64], skip: Option<usize>) -> f64 {
        let d = self.d;
        let mut total = 0.0;
        let mut count = 0usize;
        for (g, (m, c)) in self.sums.iter().zip(&self.counts).enumerate() {
            if Some(g) == skip {
                continue;
            }
            count += c;
            for i in 0..d {
                total += u[i] * dot(&m[i * d..(i + 1) * d], u);
            }
        }
        total / count as f64
    }
}

/// A squared-bias estimate, raw and clamped at zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SqBiasEstimate {
    pub raw: f64,
    pub value: f64,
    pub clamped: bool,
    pub se: f64,
    pub cost: u64,
}

impl SqBiasEstimate {
    fn new(raw: f64, se: f64, cost: u64) -> Self {
        let clamped = raw < 0.0;
        Self { raw, value: raw.max(0.0), clamped, se, cost }
    }
}

/// `(1/n′)Σ_j (Z̄ᵀx_j)²` with `Z̄` the mean of `n` debias draws and `n′`
/// fresh probes; an upward-biased (by `var_H(Z)/n`) estimate of
/// `‖E(θ̄_k) − θ*‖²_H` that needs neither `H` nor `θ*`.
pub fn sq_bias_rmlmcb(
    model: &ModelSpec,
    constants: &ModelConstants,
    k: u64,
    n: usize,
    n_prime: usize,
    variant: Variant,
    lineage: Lineage,
) -> Result<SqBiasEstimate> {
    if n_prime == 0 {
        return Err(invalid("n_prime", "must be at least 1"));
    }
    let batch = run_batch(model, constants, k, EstimatorTag::debias_only(variant), 1.0, n, lineage)?;
    let probes = ProbeMoments::collect(model, &lineage.noise(Role::SharedProbe), n_prime, JACKKNIFE_GROUPS);
    let z_bar = batch.mean();
    let raw = probes.mean_quadratic(&z_bar, None);

    let row_groups = groups(n, probes.n_groups());
    let leave_out: Vec<f64> = if row_groups.len() == probes.n_groups() {
        row_groups
            .iter()
            .enumerate()
            .map(|(g, r)| {
                let z = mean_of(batch.values(), 0..n, Some(r.clone()));
                probes.mean_quadratic(&z, Some(g))
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(SqBiasEstimate::new(raw, jackknife_se(&leave_out), batch.total_cost() + n_prime as u64))
}

/// Unbiased estimate of `‖E(θ̄_k) − θ*‖²_H`: the mean over `outer_n`
/// repetitions of `(1/n′)Σ_j (Zᵀx_j)(Z̃ᵀx_j)` with `Z`, `Z̃` independent
/// debias draws and fresh probes for each repetition.
pub fn sq_bias_urmlmcb(
    model: &ModelSpec,
    constants: &ModelConstants,
    k: u64,
    outer_n: usize,
    n_prime: usize,
    variant: Variant,
    lineage: Lineage,
) -> Result<SqBiasEstimate> {
    if outer_n == 0 || n_prime == 0 {
        return Err(invalid("outer_n", "outer_n and n_prime must be at least 1"));
    }
    let d = model.dim();
    let reps: Vec<(f64, u64)> = (0..outer_n as u64)
        .into_par_iter()
        .map(|r| {
            let rep = lineage.replicate(r);
            let mut rng = rep.control();
            let z = sample_debias(model, k, constants, variant, &rep.noise(Role::Debias), &mut rng)?;
            let zt = sample_debias(model, k, constants, variant, &rep.noise(Role::DebiasTwin), &mut rng)?;
            let probe = rep.noise(Role::Probe);
            let mut x = vec![0.0; d];
            let mut acc = 0.0;
            for t in 0..n_prime {
                probe.fill(model, t as i64, &mut x);
                acc += dot(&z.z, &x) * dot(&zt.z, &x);
            }
            Ok((acc / n_prime as f64, z.cost + zt.cost + n_prime as u64))
        })
        .collect::<Result<_>>()?;
    let values: Vec<f64> = reps.iter().map(|r| r.0).collect();
    let raw = values.iter().sum::<f64>() / outer_n as f64;
    let leave_out: Vec<f64> = groups(outer_n, JACKKNIFE_GROUPS)
        .into_iter()
        .map(|r| {
            let kept = outer_n - r.len();
            let removed: f64 = values[r].iter().sum();
            (raw * outer_n as f64 - removed) / kept as f64
        })
        .collect();
    let se = if outer_n >= 2 { jackknife_se(&leave_out) } else { f64::NAN };
    Ok(SqBiasEstimate::new(raw, se, reps.iter().map(|r| r.1).sum()))
}

/// `Σ_i ‖ψ_i − ψ̄‖²_H / (n − 1)` using the known `H`.
pub fn variance_exact_h(batch: &EstimateBatch, model: &ModelSpec) -> Result<Estimate> {
    let n = batch.n();
    if n < 2 {
        return Err(invalid("batch", "variance needs at least two replicates"));
    }
    if batch.dim() != model.dim() {
        return Err(invalid("batch", "dimension differs from the model"));
    }
    let mean = batch.mean();
    let centered: Vec<Vec<f64>> =
        batch.values().iter().map(|row| row.iter().zip(&mean).map(|(a, b)| a - b).collect()).collect();
    let norms: Vec<f64> = centered.iter().map(|u| model.h_norm_sq(u)).collect();
    let total: f64 = norms.iter().sum();
    let value = total / (n - 1) as f64;

    let leave_out: Vec<f64> = groups(n, JACKKNIFE_GROUPS)
        .into_iter()
        .filter(|r| n - r.len() >= 2)
        .map(|r| {
            let kept = n - r.len();
            let shift = mean_of(&centered, 0..n, Some(r.clone()));
            let ss = total - norms[r].iter().sum::<f64>();
            (ss - kept as f64 * model.h_norm_sq(&shift)) / (kept - 1) as f64
        })
        .collect();
    Ok(Estimate { value, se: jackknife_se(&leave_out) })
}

/// H-free variance estimate with its probe cost.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProbeVariance {
    pub value: f64,
    pub se: f64,
    /// Probe covariates drawn: `n·K + n′`.
    pub cost: u64,
}

/// `[(1/K)Σ_iΣ_j (ψ_iᵀx_{ij})² − (n/n′)Σ_j (ψ̄ᵀx_j)²] / (n − 1)`, unbiased
/// for `var_H(ψ)` without using `H`. Row `i` reads its `K` probes from
/// `probes.replicate(i)`; the `n′` shared probes come from `probes` itself.
pub fn variance_probe_h(
    batch: &EstimateBatch,
    model: &ModelSpec,
    k_probes: usize,
    n_prime: usize,
    probes: Lineage,
) -> Result<ProbeVariance> {
    let n = batch.n();
    if n < 2 {
        return Err(invalid("batch", "variance needs at least two replicates"));
    }
    if k_probes == 0 || n_prime == 0 {
        return Err(invalid("k_probes", "probe counts must be at least 1"));
    }
    let d = model.dim();
    let per_row: Vec<f64> = batch
        .values()
        .par_iter()
        .enumerate()
        .map(|(i, psi)| {
            let stream = probes.replicate(i as u64).noise(Role::Probe);
            let mut x = vec![0.0; d];
            let mut acc = 0.0;
            for t in 0..k_probes {
                stream.fill(model, t as i64, &mut x);
                acc += h_quadratic_probe(psi, &x);
            }
            acc / k_probes as f64
        })
        .collect();
    let shared = ProbeMoments::collect(model, &probes.noise(Role::SharedProbe), n_prime, JACKKNIFE_GROUPS);
    let first: f64 = per_row.iter().sum();
    let mean = batch.mean();
    let value = (first - n as f64 * shared.mean_quadratic(&mean, None)) / (n - 1) as f64;

    let row_groups = groups(n, shared.n_groups());
    let leave_out: Vec<f64> = if row_groups.len() == shared.n_groups() {
        row_groups
            .iter()
            .enumerate()
            .filter(|(_, r)| n - r.len() >= 2)
            .map(|(g, r)| {
                let kept = n - r.len();
                let m = mean_of(batch.values(), 0..n, Some(r.clone()));
                let f = first - per_row[r.clone()].iter().sum::<f64>();
                (f - kept as f64 * shared.mean_quadratic(&m, Some(g))) / (kept - 1) as f64
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ProbeVariance { value, se: jackknife_se(&leave_out), cost: (n * k_probes + n_prime) as u64 })
}

/// Expected excess risk of the mean of `M` independent copies of an
/// estimator, `(sq_bias + variance/M)/2`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskReport {
    pub sq_bias: f64,
    pub variance: f64,
    pub m: u64,
    pub excess_risk: f64,
    /// The squared-bias input was negative and has been replaced by 0.
    pub sq_bias_clamped: bool,
    /// The variance input was negative and has been replaced by 0.
    pub variance_clamped: bool,
    pub sq_bias_source: String,
    pub variance_source: String,
}

impl RiskReport {
    pub fn with_sources(mut self, sq_bias: &str, variance: &str) -> Self {
        self.sq_bias_source = sq_bias.to_string();
        self.variance_source = variance.to_string();
        self
    }
}

pub fn assemble_risk(sq_bias: f64, variance: f64, m: u64) -> Result<RiskReport> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    if !sq_bias.is_finite() || !variance.is_finite() {
        return Err(invalid("sq_bias", "inputs must be finite"));
    }
    let (sb, var) = (sq_bias.max(0.0), variance.max(0.0));
    Ok(RiskReport {
        sq_bias: sb,
        variance: var,
        m,
        excess_risk: (sb + var / m as f64) / 2.0,
        sq_bias_clamped: sq_bias < 0.0,
        variance_clamped: variance < 0.0,
        sq_bias_source: "input".into(),
        variance_source: "input".into(),
    })
}

/// Time-variance product.
pub fn efficiency(mean_cost: f64, variance: f64) -> f64 {
    mean_cost * variance
}

/// Closed-form bounds for one `(model, γ, α, δ, k)` configuration. A bound
/// is `None` when its hypotheses fail.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryBounds {
    pub k: u64,
    pub s: u64,
    pub c: f64,
    pub xi: f64,
    /// `0 < γ < 2/R²`.
    pub gamma_admissible: bool,
    /// `‖E(θ̄_k) − θ*‖²_H`.
    pub sq_bias: Option<f64>,
    /// `var_H(θ̄_k)`.
    pub variance: Option<f64>,
    /// Expected excess risk of `θ̄_k`.
    pub excess_risk: Option<f64>,
    /// Excess risk of `θ̄_k` for `s = 0` and `γ < 1/R²`.
    pub excess_risk_small_step: Option<f64>,
    /// Excess risk of `θ̄_k` for `γ = 1/R²`.
    pub excess_risk_unit_step: Option<f64>,
    /// `E‖Z_k‖²_H`.
    pub z_second_moment: Option<f64>,
    /// `E‖Z_k‖²_H` for `k` past the exponential-decay threshold.
    pub z_second_moment_exp: Option<f64>,
    /// Threshold on `k` for the exponential bound.
    pub exp_threshold: Option<f64>,
    /// Expected cost of one debias draw.
    pub debias_cost: f64,
    #[serde(skip)]
    delta: f64,
    #[serde(skip)]
    risk_core: Option<f64>,
}

impl TheoryBounds {
    /// Expected cost of `f̂_k`.
    pub fn unbiased_cost(&self, q: f64) -> f64 {
        self.k as f64 + q * self.debias_cost
    }

    /// Expected excess risk of `f̂_k`.
    pub fn unbiased_excess_risk(&self, q: f64) -> Option<f64> {
        self.risk_core.map(|r| r / (2.0 * q * self.k as f64))
    }

    /// Expected excess risk of the mean of `m` independent copies of `f̂_k`.
    pub fn averaged_excess_risk(&self, q: f64, m: u64) -> Option<f64> {
        self.unbiased_excess_risk(q).map(|r| r / m as f64)
    }

    /// Bounds on `E‖f_{k,l+1} − f_{k,l}‖²_H`: the polynomial one (`None`
    /// for `l = 0` with no burn-in) and the exponential one.
    pub fn level_difference(&self, l: u32) -> (Option<f64>, f64) {
        let c = self.c;
        let poly = if l == 0 {
            (self.s > 0).then(|| 4.0 * c / self.s as f64)
        } else {
            Some(6.0 * c / (self.k as f64 * f64::from(l).exp2()))
        };
        let expo = 6.0 * c * (-self.xi * self.s as f64 * f64::from(l).exp2()).exp();
        (poly, expo)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }
}

pub fn theory_bounds(constants: &ModelConstants, model: &ModelSpec, k: u64, s: u64) -> Result<TheoryBounds> {
    if k == 0 || s >= k {
        return Err(invalid("s", format!("need 0 ≤ s < k, got s = {s}, k = {k}")));
    }
    let ModelConstants { r2, lambda_max, gamma, c, xi, alpha, delta, .. } = *constants;
    let e0 = model.initial_error_sq();
    let sigma2_d = model.sigma2() * model.dim() as f64;
    let width = (k - s) as f64;
    let kf = k as f64;
    let admissible = gamma > 0.0 && gamma * r2 < 2.0;
    let slack = 2.0 - gamma * r2;

    let sq_bias = admissible.then(|| e0 / (gamma * (2.0 - gamma * lambda_max) * width));
    let variance = admissible.then(|| 8.0 / width * (sigma2_d / slack + e0 / gamma));
    let excess_risk = admissible.then(|| (8.0 * sigma2_d + 17.0 * e0 / gamma) / (2.0 * slack * width));
    let small = gamma * r2 < 1.0 && gamma > 0.0 && s == 0;
    let excess_risk_small_step =
        small.then(|| (sigma2_d.sqrt() / (1.0 - (gamma * r2).sqrt()) + (e0 / gamma).sqrt()).powi(2) / (2.0 * kf));
    let unit = ((gamma * r2) - 1.0).abs() <= 1e-12;
    let excess_risk_unit_step = unit.then(|| (8.0 * sigma2_d + 9.0 * r2 * e0) / (2.0 * width));

    let ratio = (4.0 * delta + 8.0) / (alpha * xi);
    let debiasable = admissible && xi > 0.0 && k >= 2 && alpha > 0.0 && alpha <= 0.5 && delta > 1.0;
    let log_term = 6.0 * c * (4.0 * ratio.ln()).powf(delta + 1.0);
    let z_second_moment = debiasable.then(|| (11.0 * c / alpha + log_term) / kf);
    let exp_threshold = debiasable.then(|| ratio * ratio.ln());
    let z_second_moment_exp = exp_threshold
        .filter(|t| kf >= *t)
        .map(|_| 24.0 * c / kf.powf(delta + 1.0) * (-alpha * xi * kf / 2.0).exp() / kf);
    let risk_core = debiasable.then(|| 27.0 * c / alpha + log_term);

    Ok(TheoryBounds {
        k,
        s,
        c,
        xi,
        gamma_admissible: admissible,
        sq_bias,
        variance,
        excess_risk,
        excess_risk_small_step,
        excess_risk_unit_step,
        z_second_moment,
        z_second_moment_exp,
        exp_threshold,
        debias_cost: 4.0 * delta * kf / (delta - 1.0),
        delta,
        risk_core,
    })
}
