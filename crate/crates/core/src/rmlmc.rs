//! Randomized multilevel debiasing of the tail-averaged iterate.
//!
//! Level `l` reads the chain at a start time of order `k·2^l` in the past;
//! the single-term estimator picks one random level `N` and returns the
//! reweighted difference between levels `N + 1` and `N`, computed on two
//! chains that share their driving noise.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::model::{ModelConstants, ModelSpec};
use crate::sgd::{run_coupled_average_pair, run_coupled_pair, run_tail_average, CostMeter};
use crate::stream::NoiseStream;

/// Largest start-time magnitude a draw may reach.
const MAX_HORIZON: u64 = 1 << 62;

/// `p_l = a_l − a_{l+1}` with tail `a_l = 2^{−l}(l+1)^{−δ}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelDistribution {
    delta: f64,
}

impl LevelDistribution {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 1.0 && delta.is_finite()) {
            return Err(invalid("delta", format!("must be a finite real > 1, got {delta}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// `P(N ≥ l)`.
    pub fn tail(&self, l: u32) -> f64 {
        (-f64::from(l)).exp2() * f64::from(l + 1).powf(-self.delta)
    }

    pub fn pmf(&self, l: u32) -> f64 {
        self.tail(l) - self.tail(l + 1)
    }

    /// Exact inversion of the tail: the `l` with `a_{l+1} < U ≤ a_l` for
    /// `U` uniform on `(0, 1]`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u32 {
        let u = 1.0 - rng.random::<f64>();
        self.level_for(u)
    }

    fn level_for(&self, u: f64) -> u32 {
        let mut l = 0;
        while self.tail(l + 1) >= u {
            l += 1;
        }
        l
    }
}

pub fn level_pmf(dist: &LevelDistribution, l: u32) -> f64 {
    dist.pmf(l)
}

pub fn sample_level<R: Rng + ?Sized>(dist: &LevelDistribution, rng: &mut R) -> u32 {
    dist.sample(rng)
}

fn check_level(k: u64, level: u32) -> Result<()> {
    let fits = level + 2 < 63 && k <= MAX_HORIZON >> (level + 2);
    if fits {
        Ok(())
    } else {
        Err(Error::LevelOverflow { level, k })
    }
}

/// Inclusive range of `τ(k, l)`.
pub fn tau_range(k: u64, s: u64, l: u32) -> Result<(u64, u64)> {
    if k < 2 {
        return Err(invalid("k", format!("must be at least 2, got {k}")));
    }
    if s >= k {
        return Err(invalid("s", format!("burn-in {s} must be below k = {k}")));
    }
    check_level(k, l)?;
    if l == 0 {
        Ok((s, k - 1))
    } else {
        Ok((k * ((1 << l) - 1), k * ((1 << (l + 1)) - 1) - 1))
    }
}

/// `τ(k, l)`: uniform on `{s, …, k−1}` for `l = 0` and on
/// `{k(2^l − 1), …, k(2^{l+1} − 1) − 1}` otherwise.
pub fn sample_tau<R: Rng + ?Sized>(k: u64, s: u64, l: u32, rng: &mut R) -> Result<u64> {
    let (lo, hi) = tau_range(k, s, l)?;
    Ok(rng.random_range(lo..=hi))
}

/// Inclusive start-time block `(m, m')` averaged by the average-start
/// estimator at level `l`.
pub fn average_block(k: u64, s: u64, l: u32) -> Result<(i64, i64)> {
    let (lo, hi) = tau_range(k, s, l)?;
    Ok((-(hi as i64), -(lo as i64)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// Each level reads one chain started at a uniformly drawn time.
    RandomStart,
    /// Each level averages the chains started over its whole block.
    AverageStart,
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Variant::RandomStart => "random",
            Variant::AverageStart => "average",
        })
    }
}

impl std::str::FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" | "random-start" | "randomstart" => Ok(Variant::RandomStart),
            "average" | "average-start" | "averagestart" | "avg" => Ok(Variant::AverageStart),
            other => Err(format!("unknown variant `{other}` (expected random|average)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DebiasDraw {
    pub z: Vec<f64>,
    pub level: u32,
    pub cost: u64,
}

/// One draw of the single-term difference `(f_{N+1} − f_N)/p_N`, an unbiased
/// estimate of `θ* − E(θ̄_k)`.
pub fn sample_debias<R: Rng + ?Sized>(
    model: &ModelSpec,
    k: u64,
    constants: &ModelConstants,
    variant: Variant,
    stream: &NoiseStream,
    rng: &mut R,
) -> Result<DebiasDraw> {
    let dist = LevelDistribution::new(constants.delta)?;
    let s = constants.burn_in(k);
    let level = dist.sample(rng);
    check_level(k, level + 1)?;
    let mut meter = CostMeter::new();
    let (deep, shallow) = match variant {
        Variant::RandomStart => {
            let shallow = sample_tau(k, s, level, rng)?;
            let deep = sample_tau(k, s, level + 1, rng)?;
            run_coupled_pair(model, -(deep as i64), -(shallow as i64), constants.gamma, stream, &mut meter)?
        }
        Variant::AverageStart => {
            let deep = average_block(k, s, level + 1)?;
            let shallow = average_block(k, s, level)?;
            run_coupled_average_pair(model, deep, shallow, constants.gamma, stream, &mut meter)?
        }
    };
    let inv_p = 1.0 / dist.pmf(level);
    let z = deep.iter().zip(&shallow).map(|(a, b)| (a - b) * inv_p).collect();
    Ok(DebiasDraw { z, level, cost: meter.count() })
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnbiasedEstimate {
    pub value: Vec<f64>,
    pub q: f64,
    pub fired: bool,
    pub cost: u64,
}

/// `θ̄_k + Q·Z'/q` with `Q ~ Bernoulli(q)`. `θ̄_k` reads `chain_stream`;
/// `Z'` reads `debias_stream`, which must be independent of it. The gate,
/// level and start-time draws come from `rng`.
#[allow(clippy::too_many_arguments)]
pub fn sample_unbiased<R: Rng + ?Sized>(
    model: &ModelSpec,
    k: u64,
    constants: &ModelConstants,
    q: f64,
    variant: Variant,
    chain_stream: &NoiseStream,
    debias_stream: &NoiseStream,
    rng: &mut R,
) -> Result<UnbiasedEstimate> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(invalid("q", format!("must lie in (0, 1], got {q}")));
    }
    if k < 2 {
        return Err(invalid("k", format!("must be at least 2, got {k}")));
    }
    let mut meter = CostMeter::new();
    let mut value = run_tail_average(model, k, constants.burn_in(k), constants.gamma, chain_stream, &mut meter)?;
    let fired = rng.random::<f64>() < q;
    if fired {
        let draw = sample_debias(model, k, constants, variant, debias_stream, rng)?;
        value.iter_mut().zip(&draw.z).for_each(|(v, z)| *v += z / q);
        meter.add(draw.cost);
    }
    Ok(UnbiasedEstimate { value, q, fired, cost: meter.count() })
}

/// Riemann zeta for real `s > 1` by Euler–Maclaurin summation.
pub fn zeta(s: f64) -> f64 {
    assert!(s > 1.0, "zeta needs s > 1, got {s}");
    const N: f64 = 20.0;
    // B_{2j} / (2j)!
    const COEF: [f64; 6] =
        [1.0 / 12.0, -1.0 / 720.0, 1.0 / 30240.0, -1.0 / 1209600.0, 1.0 / 47900160.0, -691.0 / 1307674368000.0];
    let mut sum: f64 = (1..N as u32).map(|n| f64::from(n).powf(-s)).sum();
    sum += N.powf(1.0 - s) / (s - 1.0) + 0.5 * N.powf(-s);
    // Rising factorial s(s+1)…(s+2j−2) times N^{−s−2j+1}.
    let mut rising = s;
    let mut power = N.powf(-s - 1.0);
    for (j, c) in COEF.iter().enumerate() {
        sum += c * rising * power;
        let m = 2.0 * j as f64;
        rising *= (s + m + 1.0) * (s + m + 2.0);
        power /= N * N;
    }
    sum
}

/// Expected cost of one debias draw: `Σ_l p_l · E|start of level l + 1|`.
pub fn expected_debias_cost(k: u64, dist: &LevelDistribution, variant: Variant) -> f64 {
    // Σ_l p_l 2^{l+1} = Σ_l (2(l+1)^{−δ} − (l+2)^{−δ}) = ζ(δ) + 1.
    let weighted = zeta(dist.delta()) + 1.0;
    let k = k as f64;
    match variant {
        Variant::RandomStart => 1.5 * k * weighted - k - 0.5,
        Variant::AverageStart => 2.0 * k * weighted - k - 1.0,
    }
}

/// Gate probability making the expected cost of `f̂_k` twice that of `θ̄_k`.
pub fn auto_q(k: u64, s: u64, dist: &LevelDistribution, variant: Variant) -> Result<f64> {
    tau_range(k, s, 0)?;
    let cost = expected_debias_cost(k, dist, variant);
    Ok(((k - 1) as f64 / cost).min(1.0))
}
