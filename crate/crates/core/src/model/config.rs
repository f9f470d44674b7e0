//! Plain-text `key=value` model definitions.
//!
//! ```text
//! # distribution 1
//! kind=gaussian
//! d=25
//! exponent=3
//! sigma2=1
//! alpha=0.5
//! delta=1.5
//! gamma=auto
//! ```
//!
//! `kind=divergence` takes `d`, `sigma2`, an explicit `gamma` (> 2) and an
//! optional `noise=gaussian|rademacher`; it uses `v = e₁` and `θ0 = 1/√d`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{make_divergence_model_with_noise, make_gaussian_model, ModelSpec, NoiseLaw};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum GammaPolicy {
    /// `γ = 1/R²`.
    Auto,
    Fixed(f64),
}

impl GammaPolicy {
    pub fn as_override(self) -> Option<f64> {
        match self {
            GammaPolicy::Auto => None,
            GammaPolicy::Fixed(g) => Some(g),
        }
    }
}

impl fmt::Display for GammaPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            GammaPolicy::Auto => f.write_str("auto"),
            GammaPolicy::Fixed(g) => write!(f, "{g}"),
        }
    }
}

impl FromStr for GammaPolicy {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(GammaPolicy::Auto);
        }
        s.parse::<f64>().map(GammaPolicy::Fixed).map_err(|_| format!("expected `auto` or a number, got `{s}`"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ModelFamily {
    Gaussian { d: usize, exponent: f64, sigma2: f64 },
    Divergence { d: usize, sigma2: f64, noise: NoiseLaw },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub family: ModelFamily,
    pub alpha: f64,
    pub delta: f64,
    pub gamma: GammaPolicy,
}

impl ModelConfig {
    pub fn distribution_one() -> Self {
        Self {
            family: ModelFamily::Gaussian { d: 25, exponent: 3.0, sigma2: 1.0 },
            alpha: 0.5,
            delta: 1.5,
            gamma: GammaPolicy::Auto,
        }
    }

    pub fn distribution_two() -> Self {
        Self {
            family: ModelFamily::Gaussian { d: 50, exponent: 1.0, sigma2: 0.01 },
            alpha: 0.5,
            delta: 1.5,
            gamma: GammaPolicy::Auto,
        }
    }

    pub fn divergence(d: usize, gamma: f64, sigma2: f64) -> Self {
        Self {
            family: ModelFamily::Divergence { d, sigma2, noise: NoiseLaw::Gaussian },
            alpha: 0.5,
            delta: 1.5,
            gamma: GammaPolicy::Fixed(gamma),
        }
    }

    pub fn build(&self) -> Result<ModelSpec> {
        match &self.family {
            ModelFamily::Gaussian { d, exponent, sigma2 } => make_gaussian_model(*d, *exponent, *sigma2),
            ModelFamily::Divergence { d, sigma2, noise } => {
                let GammaPolicy::Fixed(gamma) = self.gamma else {
                    return Err(Error::Config { line: 0, reason: "divergence model needs an explicit gamma".into() });
                };
                let d = *d;
                let mut v = vec![0.0; d];
                if d > 0 {
                    v[0] = 1.0;
                }
                let theta0 = vec![1.0 / (d.max(1) as f64).sqrt(); d];
                make_divergence_model_with_noise(d, gamma, *sigma2, v, theta0, *noise)
            }
        }
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut d = None;
        let mut exponent = None;
        let mut sigma2 = None;
        let mut noise = NoiseLaw::Gaussian;
        let mut alpha = 0.5;
        let mut delta = 1.5;
        let mut gamma = GammaPolicy::Auto;

        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |reason: String| Error::Config { line: line_no, reason };
            let (key, value) = line.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let num = |v: &str| v.parse::<f64>().map_err(|_| err(format!("`{key}` expects a number, got `{v}`")));
            match key {
                "kind" => kind = Some(value.to_ascii_lowercase()),
                "d" => {
                    d = Some(
                        value
                            .parse::<usize>()
                            .map_err(|_| err(format!("`d` expects a positive integer, got `{value}`")))?,
                    )
                }
                "exponent" => exponent = Some(num(value)?),
                "sigma2" => sigma2 = Some(num(value)?),
                "alpha" => alpha = num(value)?,
                "delta" => delta = num(value)?,
                "gamma" => gamma = value.parse().map_err(err)?,
                "noise" => {
                    noise = match value.to_ascii_lowercase().as_str() {
                        "gaussian" => NoiseLaw::Gaussian,
                        "rademacher" => NoiseLaw::Rademacher,
                        other => return Err(err(format!("unknown noise law `{other}`"))),
                    }
                }
                other => return Err(err(format!("unknown key `{other}`"))),
            }
        }

        let missing = |what: &str| Error::Config { line: 0, reason: format!("missing `{what}`") };
        let d = d.ok_or_else(|| missing("d"))?;
        let sigma2 = sigma2.ok_or_else(|| missing("sigma2"))?;
        let family = match kind.as_deref() {
            Some("gaussian") => {
                ModelFamily::Gaussian { d, exponent: exponent.ok_or_else(|| missing("exponent"))?, sigma2 }
            }
            Some("divergence") => ModelFamily::Divergence { d, sigma2, noise },
            Some(other) => {
                return Err(Error::Config { line: 0, reason: format!("unknown kind `{other}`") });
            }
            None => return Err(missing("kind")),
        };
        Ok(Self { family, alpha, delta, gamma })
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        match &self.family {
            ModelFamily::Gaussian { d, exponent, sigma2 } => {
                out.push_str(&format!("kind=gaussian\nd={d}\nexponent={exponent}\nsigma2={sigma2}\n"));
            }
            ModelFamily::Divergence { d, sigma2, noise } => {
                let noise = match noise {
                    NoiseLaw::Gaussian => "gaussian",
                    NoiseLaw::Rademacher => "rademacher",
                };
                out.push_str(&format!("kind=divergence\nd={d}\nsigma2={sigma2}\nnoise={noise}\n"));
            }
        }
        out.push_str(&format!("alpha={}\ndelta={}\ngamma={}\n", self.alpha, self.delta, self.gamma));
        out
    }
}
