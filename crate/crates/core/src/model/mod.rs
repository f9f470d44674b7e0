//! Synthetic least-squares models with known ground truth.
//!
//! Every model here has an explicit Hessian `H = E(x xᵀ)`, optimum `θ*` and
//! noise level, so the exact squared bias of the tail-averaged iterate can be
//! computed in closed form and used as an oracle for the Monte Carlo
//! estimators.

mod config;

pub use config::{GammaPolicy, ModelConfig, ModelFamily};

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// Law of the response in the divergence example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum NoiseLaw {
    #[default]
    Gaussian,
    /// ±σ with equal probability.
    Rademacher,
}

/// Rank-one-plus-isotropic design of the divergence example:
/// `x = v` with probability `p`, otherwise uniform on the unit sphere.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Divergence {
    pub p: f64,
    pub v: Vec<f64>,
    pub gamma: f64,
    pub noise: NoiseLaw,
}

impl Divergence {
    /// Eigenvalue of `I − γH` along `v`, `−(1 + (γ − 2)/d)`.
    pub fn contraction_along_v(&self) -> f64 {
        let d = self.v.len() as f64;
        -(1.0 + (self.gamma - 2.0) / d)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelKind {
    GaussianDiagonal,
    SphereDivergence(Divergence),
}

/// One `(x, y)` draw.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub x: Vec<f64>,
    pub y: f64,
}

/// A regression model. For the Gaussian kind `H = diag(h_diag)`; for the
/// divergence kind `H = diag(h_diag) + p vvᵀ` with `h_diag ≡ (1 − p)/d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    h_diag: Vec<f64>,
    sqrt_h: Vec<f64>,
    theta_star: Vec<f64>,
    theta0: Vec<f64>,
    sigma2: f64,
    kind: ModelKind,
}

impl ModelSpec {
    /// Diagonal Gaussian model with explicit parameters.
    pub fn gaussian(h_diag: Vec<f64>, theta_star: Vec<f64>, theta0: Vec<f64>, sigma2: f64) -> Result<Self> {
        let d = h_diag.len();
        if d == 0 {
            return Err(Error::InvalidModel("dimension must be at least 1".into()));
        }
        if theta_star.len() != d || theta0.len() != d {
            return Err(Error::InvalidModel("vector lengths disagree with dimension".into()));
        }
        if h_diag.iter().any(|&h| !(h > 0.0 && h.is_finite())) {
            return Err(Error::InvalidModel("H must be positive-definite (all diagonal entries > 0)".into()));
        }
        if !(sigma2 >= 0.0 && sigma2.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma2 must be nonnegative, got {sigma2}")));
        }
        if theta_star.iter().chain(&theta0).any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("non-finite parameter vector".into()));
        }
        let sqrt_h = h_diag.iter().map(|h| h.sqrt()).collect();
        Ok(Self { h_diag, sqrt_h, theta_star, theta0, sigma2, kind: ModelKind::GaussianDiagonal })
    }

    pub fn dim(&self) -> usize {
        self.h_diag.len()
    }

    pub fn h_diag(&self) -> &[f64] {
        &self.h_diag
    }

    pub fn theta_star(&self) -> &[f64] {
        &self.theta_star
    }

    pub fn theta0(&self) -> &[f64] {
        &self.theta0
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn is_diagonal(&self) -> bool {
        matches!(self.kind, ModelKind::GaussianDiagonal)
    }

    /// Same model with a different initial iterate.
    pub fn with_theta0(mut self, theta0: Vec<f64>) -> Result<Self> {
        if theta0.len() != self.dim() || theta0.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidModel("theta0 must be a finite d-vector".into()));
        }
        self.theta0 = theta0;
        Ok(self)
    }

    /// `‖u‖²_H = uᵀHu`.
    pub fn h_norm_sq(&self, u: &[f64]) -> f64 {
        let diag: f64 = self.h_diag.iter().zip(u).map(|(h, x)| h * x * x).sum();
        match &self.kind {
            ModelKind::GaussianDiagonal => diag,
            ModelKind::SphereDivergence(div) => {
                let vu = dot(&div.v, u);
                diag + div.p * vu * vu
            }
        }
    }

    /// `‖θ0 − θ*‖²`.
    pub fn initial_error_sq(&self) -> f64 {
        self.theta0.iter().zip(&self.theta_star).map(|(a, b)| (a - b) * (a - b)).sum()
    }

    /// Writes one covariate draw into `x` and returns the matching response.
    pub fn fill_sample<R: Rng + ?Sized>(&self, rng: &mut R, x: &mut [f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim());
        match &self.kind {
            ModelKind::GaussianDiagonal => {
                let mut fit = 0.0;
                for ((xi, s), ts) in x.iter_mut().zip(&self.sqrt_h).zip(&self.theta_star) {
                    let z: f64 = rng.sample(StandardNormal);
                    *xi = s * z;
                    fit += *xi * ts;
                }
                let noise =
                    if self.sigma2 > 0.0 { self.sigma2.sqrt() * rng.sample::<f64, _>(StandardNormal) } else { 0.0 };
                fit + noise
            }
            ModelKind::SphereDivergence(div) => {
                let on_v = rng.random::<f64>() < div.p;
                if on_v {
                    x.copy_from_slice(&div.v);
                } else {
                    fill_unit_sphere(rng, x);
                }
                let sigma = self.sigma2.sqrt();
                match div.noise {
                    NoiseLaw::Gaussian => sigma * rng.sample::<f64, _>(StandardNormal),
                    NoiseLaw::Rademacher => {
                        if rng.random::<bool>() {
                            sigma
                        } else {
                            -sigma
                        }
                    }
                }
            }
        }
    }
}

fn fill_unit_sphere<R: Rng + ?Sized>(rng: &mut R, x: &mut [f64]) {
    loop {
        let mut norm2 = 0.0;
        for xi in x.iter_mut() {
            let z: f64 = rng.sample(StandardNormal);
            *xi = z;
            norm2 += z * z;
        }
        if norm2 > 0.0 {
            let inv = norm2.sqrt().recip();
            x.iter_mut().for_each(|xi| *xi *= inv);
            return;
        }
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Gaussian design with `H = diag(i^(−diag_exponent))`, `θ*_i = 2/√d` and
/// `θ0_i = cos(2πi/d)/√d`.
pub fn make_gaussian_model(d: usize, diag_exponent: f64, sigma2: f64) -> Result<ModelSpec> {
    if d < 1 {
        return Err(Error::InvalidModel("dimension must be at least 1".into()));
    }
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(Error::InvalidModel(format!("sigma2 must be nonnegative, got {sigma2}")));
    }
    let root_d = (d as f64).sqrt();
    let h_diag = (1..=d).map(|i| (i as f64).powf(-diag_exponent)).collect();
    let theta_star = vec![2.0 / root_d; d];
    let theta0 = (1..=d).map(|i| (2.0 * PI * i as f64 / d as f64).cos() / root_d).collect();
    ModelSpec::gaussian(h_diag, theta_star, theta0, sigma2)
}

/// `H = diag(i⁻³)`, d = 25, σ² = 1.
pub fn distribution_one() -> ModelSpec {
    make_gaussian_model(25, 3.0, 1.0).expect("valid built-in model")
}

/// `H = diag(i⁻¹)`, d = 50, σ² = 0.01.
pub fn distribution_two() -> ModelSpec {
    make_gaussian_model(50, 1.0, 0.01).expect("valid built-in model")
}

/// Divergence example: `x = v` with probability `2/γ`, otherwise uniform on
/// the unit sphere; centered response independent of `x`. Here `θ* = 0` and
/// `R² = 1`, so any `γ > 2` violates the step-size condition.
pub fn make_divergence_model(d: usize, gamma: f64, sigma2: f64, v: Vec<f64>, theta0: Vec<f64>) -> Result<ModelSpec> {
    make_divergence_model_with_noise(d, gamma, sigma2, v, theta0, NoiseLaw::Gaussian)
}

pub fn make_divergence_model_with_noise(
    d: usize,
    gamma: f64,
    sigma2: f64,
    v: Vec<f64>,
    theta0: Vec<f64>,
    noise: NoiseLaw,
) -> Result<ModelSpec> {
    if d < 1 {
        return Err(Error::InvalidModel("dimension must be at least 1".into()));
    }
    if !(gamma > 2.0 && gamma.is_finite()) {
        return Err(invalid("gamma", format!("divergence example needs gamma > 2, got {gamma}")));
    }
    if sigma2.is_nan() || sigma2 < 0.0 {
        return Err(Error::InvalidModel(format!("sigma2 must be nonnegative, got {sigma2}")));
    }
    if v.len() != d || theta0.len() != d {
        return Err(Error::InvalidModel("vector lengths disagree with dimension".into()));
    }
    let norm = dot(&v, &v).sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(invalid("v", format!("must have unit norm, got {norm}")));
    }
    if dot(&v, &theta0) == 0.0 {
        return Err(invalid("theta0", "must satisfy vᵀθ0 ≠ 0"));
    }
    let p = 2.0 / gamma;
    let iso = (1.0 - p) / d as f64;
    let h_diag = vec![iso; d];
    let sqrt_h = vec![iso.sqrt(); d];
    Ok(ModelSpec {
        h_diag,
        sqrt_h,
        theta_star: vec![0.0; d],
        theta0,
        sigma2,
        kind: ModelKind::SphereDivergence(Divergence { p, v, gamma, noise }),
    })
}

/// Constants derived from a model and the algorithm's tuning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConstants {
    pub r2: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub gamma: f64,
    pub c: f64,
    pub xi: f64,
    pub alpha: f64,
    pub delta: f64,
}

impl ModelConstants {
    /// Burn-in `s(k) = ⌊αk⌋`.
    pub fn burn_in(&self, k: u64) -> u64 {
        burn_in(self.alpha, k)
    }
}

pub fn burn_in(alpha: f64, k: u64) -> u64 {
    let s = (alpha * k as f64).floor() as u64;
    s.min(k.saturating_sub(1))
}

/// Derives `R² = tr(H) + 2λ_max`, the default step `γ = 1/R²`, and the
/// constants `c` and `ξ`.
pub fn model_constants(
    model: &ModelSpec,
    alpha: f64,
    delta: f64,
    gamma_override: Option<f64>,
) -> Result<ModelConstants> {
    if !model.is_diagonal() {
        return Err(Error::UnsupportedModel("model constants (divergence model has R² = 1 fixed)"));
    }
    if !(alpha > 0.0 && alpha <= 0.5) {
        return Err(invalid("alpha", format!("must lie in (0, 1/2], got {alpha}")));
    }
    if !(delta > 1.0 && delta.is_finite()) {
        return Err(invalid("delta", format!("must exceed 1, got {delta}")));
    }
    let h = model.h_diag();
    let lambda_max = h.iter().copied().fold(f64::MIN, f64::max);
    let lambda_min = h.iter().copied().fold(f64::MAX, f64::min);
    let r2 = h.iter().sum::<f64>() + 2.0 * lambda_max;
    let gamma = match gamma_override {
        Some(g) => {
            if !(g > 0.0 && g < 2.0 / r2) {
                return Err(Error::StepSizeOutOfRange { gamma: g, upper: 2.0 / r2 });
            }
            g
        }
        None => 1.0 / r2,
    };
    let slack = 2.0 - gamma * r2;
    let d = model.dim() as f64;
    let c = model.sigma2() * d / (slack * slack) + model.initial_error_sq() / (gamma * slack);
    let xi = gamma * slack * lambda_min;
    Ok(ModelConstants { r2, lambda_min, lambda_max, gamma, c, xi, alpha, delta })
}

/// Draws one independent `(x, y)`.
pub fn draw_sample<R: Rng + ?Sized>(model: &ModelSpec, rng: &mut R) -> Sample {
    let mut x = vec![0.0; model.dim()];
    let y = model.fill_sample(rng, &mut x);
    Sample { x, y }
}

/// `L(θ) − L(θ*) = ½‖θ − θ*‖²_H`.
pub fn excess_risk(model: &ModelSpec, theta: &[f64]) -> f64 {
    let diff: Vec<f64> = theta.iter().zip(model.theta_star()).map(|(a, b)| a - b).collect();
    0.5 * model.h_norm_sq(&diff)
}

/// `r^n` for any sign of `r`.
fn pow_u(r: f64, n: u64) -> f64 {
    if n <= i32::MAX as u64 {
        r.powi(n as i32)
    } else if r >= 0.0 {
        r.powf(n as f64)
    } else {
        let m = (-r).powf(n as f64);
        if n.is_multiple_of(2) {
            m
        } else {
            -m
        }
    }
}

/// `Σ_{t=s}^{k−1} (1 − g)^t` without a k-step loop.
pub(crate) fn geometric_window(g: f64, s: u64, k: u64) -> f64 {
    debug_assert!(s < k);
    let len = (k - s) as f64;
    if g == 0.0 {
        return len;
    }
    if g > 0.0 && g < 1.0 {
        // r ∈ (0, 1): r^s (1 − r^(k−s)) / (1 − r), with 1 − r^n = −expm1(n ln r).
        let ln_r = (-g).ln_1p();
        let head = (s as f64 * ln_r).exp();
        return head * -((len * ln_r).exp_m1()) / g;
    }
    if g.abs() < 1e-12 {
        return (s..k).map(|t| pow_u(1.0 - g, t)).sum();
    }
    let r = 1.0 - g;
    (pow_u(r, s) - pow_u(r, k)) / g
}

/// `E(θ̄_k)` for the tail average over `t ∈ [s, k−1]`, from
/// `E(θ_t − θ*) = (I − γH)^t (θ0 − θ*)`.
pub fn exact_mean_bar_theta(model: &ModelSpec, k: u64, s: u64, gamma: f64) -> Result<Vec<f64>> {
    if s >= k {
        return Err(invalid("s", format!("burn-in {s} must be below k = {k}")));
    }
    let len = (k - s) as f64;
    let e0: Vec<f64> = model.theta0().iter().zip(model.theta_star()).map(|(a, b)| a - b).collect();
    let mean = match model.kind() {
        ModelKind::GaussianDiagonal => model
            .h_diag()
            .iter()
            .zip(&e0)
            .zip(model.theta_star())
            .map(|((h, e), ts)| ts + e * geometric_window(gamma * h, s, k) / len)
            .collect(),
        ModelKind::SphereDivergence(div) => {
            // Eigen-split: v (eigenvalue iso + p) and v⊥ (eigenvalue iso).
            let iso = model.h_diag()[0];
            let along = dot(&div.v, &e0);
            let w_v = geometric_window(gamma * (iso + div.p), s, k) / len;
            let w_perp = geometric_window(gamma * iso, s, k) / len;
            e0.iter()
                .zip(&div.v)
                .zip(model.theta_star())
                .map(|((e, vi), ts)| {
                    let par = along * vi;
                    ts + w_v * par + w_perp * (e - par)
                })
                .collect()
        }
    };
    Ok(mean)
}

/// `‖E(θ̄_k) − θ*‖²_H`.
pub fn exact_sq_bias(model: &ModelSpec, k: u64, s: u64, gamma: f64) -> Result<f64> {
    let mean = exact_mean_bar_theta(model, k, s, gamma)?;
    let bias: Vec<f64> = mean.iter().zip(model.theta_star()).map(|(m, t)| m - t).collect();
    Ok(model.h_norm_sq(&bias))
}
