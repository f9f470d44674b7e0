//! Chain kernels: the constant-step SGD update, tail-averaged forward runs,
//! chains started in the past and read at time 0, and the single-pass
//! average-start recursion.
//!
//! All runners read their data from a [`NoiseStream`] by time index, so a
//! chain can be replayed exactly and several chains can share one noise
//! sequence without storing it.

use crate::error::{invalid, Result};
use crate::model::{dot, ModelSpec, Sample};
use crate::stream::NoiseStream;

/// Number of simulated covariate draws.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CostMeter {
    count: u64,
}

impl CostMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, draws: u64) {
        self.count += draws;
    }

    pub fn count(&self) -> u64 {
        self.count
    }
}

/// An iterate `θ_t` together with its time index.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainState {
    pub theta: Vec<f64>,
    pub t: i64,
}

impl ChainState {
    pub fn new(theta: Vec<f64>, t: i64) -> Self {
        Self { theta, t }
    }

    /// Applies the update with `(x_t, y_t)` and moves to `t + 1`.
    pub fn advance(&mut self, x: &[f64], y: f64, gamma: f64) {
        sgd_update(&mut self.theta, x, y, gamma);
        self.t += 1;
    }
}

/// `θ ← θ − γ(xᵀθ − y)x`.
#[inline]
pub fn sgd_update(theta: &mut [f64], x: &[f64], y: f64, gamma: f64) {
    let scale = gamma * (dot(x, theta) - y);
    for (th, xi) in theta.iter_mut().zip(x) {
        *th -= scale * xi;
    }
}

pub fn sgd_step(theta: &[f64], sample: &Sample, gamma: f64) -> Vec<f64> {
    let mut next = theta.to_vec();
    sgd_update(&mut next, &sample.x, sample.y, gamma);
    next
}

/// Tail average `(k − s)⁻¹ Σ_{t=s}^{k−1} θ_t` of the chain started at `θ0`,
/// driven by stream times `0..k−1`. Consumes `k − 1` draws.
pub fn run_tail_average(
    model: &ModelSpec,
    k: u64,
    s: u64,
    gamma: f64,
    stream: &NoiseStream,
    meter: &mut CostMeter,
) -> Result<Vec<f64>> {
    if k == 0 {
        return Err(invalid("k", "must be at least 1"));
    }
    if s >= k {
        return Err(invalid("s", format!("burn-in {s} must be below k = {k}")));
    }
    let d = model.dim();
    let mut theta = model.theta0().to_vec();
    // Running mean, so a chain sitting at a fixed point averages to it exactly.
    let mut mean = theta.clone();
    let mut x = vec![0.0; d];
    for t in 0..k {
        if t > s {
            let inv = 1.0 / (t - s + 1) as f64;
            mean.iter_mut().zip(&theta).for_each(|(a, b)| *a += (b - *a) * inv);
        } else if t == s {
            mean.copy_from_slice(&theta);
        }
        if t + 1 < k {
            let y = stream.fill(model, t as i64, &mut x);
            sgd_update(&mut theta, &x, y, gamma);
        }
    }
    meter.add(k - 1);
    Ok(mean)
}

/// `θ_{m:0}`: start at `θ0` at time `m ≤ 0` and apply the updates for
/// `t = m, …, −1`.
pub fn run_shifted_chain(
    model: &ModelSpec,
    m: i64,
    gamma: f64,
    stream: &NoiseStream,
    meter: &mut CostMeter,
) -> Result<Vec<f64>> {
    if m > 0 {
        return Err(invalid("m", format!("start time must be ≤ 0, got {m}")));
    }
    let mut theta = model.theta0().to_vec();
    let mut x = vec![0.0; model.dim()];
    for t in m..0 {
        let y = stream.fill(model, t, &mut x);
        sgd_update(&mut theta, &x, y, gamma);
    }
    meter.add(m.unsigned_abs());
    Ok(theta)
}

/// `(θ_{start_a:0}, θ_{start_b:0})` from one pass over the shared noise.
/// Shared draws are counted once.
pub fn run_coupled_pair(
    model: &ModelSpec,
    start_a: i64,
    start_b: i64,
    gamma: f64,
    stream: &NoiseStream,
    meter: &mut CostMeter,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(start_a <= start_b && start_b <= 0) {
        return Err(invalid("start", format!("need start_a ≤ start_b ≤ 0, got ({start_a}, {start_b})")));
    }
    let mut a = model.theta0().to_vec();
    let mut b = model.theta0().to_vec();
    let mut x = vec![0.0; model.dim()];
    for t in start_a..0 {
        let y = stream.fill(model, t, &mut x);
        sgd_update(&mut a, &x, y, gamma);
        if t >= start_b {
            sgd_update(&mut b, &x, y, gamma);
        }
    }
    meter.add(start_a.unsigned_abs());
    Ok((a, b))
}

/// Running average of `θ_{h:t}` over start times `h ∈ [m, min(m', t)]`.
#[derive(Debug, Clone)]
struct AverageStartChain {
    m: i64,
    m_prime: i64,
    eta: Vec<f64>,
}

impl AverageStartChain {
    fn new(m: i64, m_prime: i64, theta0: &[f64]) -> Self {
        Self { m, m_prime, eta: theta0.to_vec() }
    }

    /// Advances from `t` to `t + 1`.
    #[inline]
    fn step(&mut self, t: i64, x: &[f64], y: f64, gamma: f64, theta0: &[f64]) {
        sgd_update(&mut self.eta, x, y, gamma);
        if t < self.m_prime {
            // A new chain starts at t + 1: η ← ((t+1−m)η + θ0)/(t+2−m),
            // written as a mean update so that η = θ0 is kept exactly.
            let inv = 1.0 / (t + 2 - self.m) as f64;
            for (e, th0) in self.eta.iter_mut().zip(theta0) {
                *e += (th0 - *e) * inv;
            }
        }
    }
}

fn check_range(name: &'static str, m: i64, m_prime: i64) -> Result<()> {
    if !(m <= m_prime && m_prime <= 0) {
        return Err(invalid(name, format!("need m ≤ m' ≤ 0, got ({m}, {m_prime})")));
    }
    Ok(())
}

/// `(m' + 1 − m)⁻¹ Σ_{h=m}^{m'} θ_{h:0}` in one pass with O(d) memory.
pub fn run_average_start(
    model: &ModelSpec,
    m: i64,
    m_prime: i64,
    gamma: f64,
    stream: &NoiseStream,
    meter: &mut CostMeter,
) -> Result<Vec<f64>> {
    check_range("range", m, m_prime)?;
    let theta0 = model.theta0();
    let mut chain = AverageStartChain::new(m, m_prime, theta0);
    let mut x = vec![0.0; model.dim()];
    for t in m..0 {
        let y = stream.fill(model, t, &mut x);
        chain.step(t, &x, y, gamma, theta0);
    }
    meter.add(m.unsigned_abs());
    Ok(chain.eta)
}

/// Two average-start blocks driven by one shared pass. `range_a` must start
/// no later than `range_b`.
pub fn run_coupled_average_pair(
    model: &ModelSpec,
    range_a: (i64, i64),
    range_b: (i64, i64),
    gamma: f64,
    stream: &NoiseStream,
    meter: &mut CostMeter,
) -> Result<(Vec<f64>, Vec<f64>)> {
    check_range("range_a", range_a.0, range_a.1)?;
    check_range("range_b", range_b.0, range_b.1)?;
    if range_a.0 > range_b.0 {
        return Err(invalid("range_a", format!("must start no later than range_b ({} > {})", range_a.0, range_b.0)));
    }
    let theta0 = model.theta0();
    let mut a = AverageStartChain::new(range_a.0, range_a.1, theta0);
    let mut b = AverageStartChain::new(range_b.0, range_b.1, theta0);
    let mut x = vec![0.0; model.dim()];
    for t in range_a.0..0 {
        let y = stream.fill(model, t, &mut x);
        a.step(t, &x, y, gamma, theta0);
        if t >= range_b.0 {
            b.step(t, &x, y, gamma, theta0);
        }
    }
    meter.add(range_a.0.unsigned_abs());
    Ok((a.eta, b.eta))
}
