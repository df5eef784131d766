//! Corruption models: additive Gaussian, Poisson and uniform noise, and
//! salt-and-pepper replacement.
//!
//! Specs parse from and print to a compact text form used on the command
//! line and in manifests, e.g. `gaussian:var=0.05`, `poisson:lambda=0.02`,
//! `uniform:lo=-0.1,hi=0.1`, `salt_pepper:p=0.05`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    Gaussian,
    Poisson,
    Uniform,
    SaltPepper,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::Gaussian => "gaussian",
            NoiseKind::Poisson => "poisson",
            NoiseKind::Uniform => "uniform",
            NoiseKind::SaltPepper => "salt_pepper",
        }
    }
}

impl fmt::Display for NoiseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NoiseModel {
    Gaussian { variance: f64 },
    /// Adds `P(rate) - rate` when `centered`, raw `P(rate)` otherwise.
    Poisson { rate: f64, centered: bool },
    Uniform { lo: f64, hi: f64 },
    /// Each sample becomes 0 with probability `density / 2` and 1 with
    /// probability `density / 2`.
    SaltPepper { density: f64 },
}

impl NoiseModel {
    pub fn kind(&self) -> NoiseKind {
        match self {
            NoiseModel::Gaussian { .. } => NoiseKind::Gaussian,
            NoiseModel::Poisson { .. } => NoiseKind::Poisson,
            NoiseModel::Uniform { .. } => NoiseKind::Uniform,
            NoiseModel::SaltPepper { .. } => NoiseKind::SaltPepper,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            NoiseModel::Gaussian { variance } => variance.is_finite() && variance > 0.0,
            NoiseModel::Poisson { rate, .. } => rate.is_finite() && rate > 0.0,
            NoiseModel::Uniform { lo, hi } => lo.is_finite() && hi.is_finite() && lo < hi,
            NoiseModel::SaltPepper { density } => density > 0.0 && density < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!("invalid noise parameters: {self}")))
        }
    }

    /// The four standard corruption settings.
    pub fn standard_set() -> [NoiseModel; 4] {
        [
            NoiseModel::Gaussian { variance: 0.05 },
            NoiseModel::Poisson {
                rate: 0.02,
                centered: true,
            },
            NoiseModel::Uniform { lo: -0.1, hi: 0.1 },
            NoiseModel::SaltPepper { density: 0.05 },
        ]
    }

    pub fn default_for(kind: NoiseKind) -> NoiseModel {
        Self::standard_set()[kind as usize]
    }
}

impl fmt::Display for NoiseModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            NoiseModel::Gaussian { variance } => write!(f, "gaussian:var={variance}"),
            NoiseModel::Poisson { rate, centered } => {
                write!(f, "poisson:lambda={rate}")?;
                if !centered {
                    f.write_str(",raw")?;
                }
                Ok(())
            }
            NoiseModel::Uniform { lo, hi } => write!(f, "uniform:lo={lo},hi={hi}"),
            NoiseModel::SaltPepper { density } => write!(f, "salt_pepper:p={density}"),
        }
    }
}

impl FromStr for NoiseModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (name, args) = s.trim().split_once(':').unwrap_or((s.trim(), ""));
        let kind = match name.to_ascii_lowercase().replace('-', "_").as_str() {
            "gaussian" | "normal" => NoiseKind::Gaussian,
            "poisson" => NoiseKind::Poisson,
            "uniform" => NoiseKind::Uniform,
            "salt_pepper" | "saltpepper" | "sp" => NoiseKind::SaltPepper,
            other => {
                return Err(Error::invalid(format!(
                    "unknown noise kind '{other}', expected gaussian, poisson, uniform or salt_pepper"
                )))
            }
        };
        let mut model = NoiseModel::default_for(kind);
        for arg in args.split(',').map(str::trim).filter(|a| !a.is_empty()) {
            let (key, value) = match arg.split_once('=') {
                Some((k, v)) => (k.trim(), Some(v.trim())),
                None => (arg, None),
            };
            let num = || -> Result<f64> {
                let v = value.ok_or_else(|| Error::invalid(format!("noise parameter '{key}' needs a value")))?;
                v.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("noise parameter '{key}': '{v}' is not a number")))
            };
            match (&mut model, key) {
                (NoiseModel::Gaussian { variance }, "var" | "variance") => *variance = num()?,
                (NoiseModel::Gaussian { variance }, "sigma" | "std") => *variance = num()?.powi(2),
                (NoiseModel::Poisson { rate, .. }, "lambda" | "rate") => *rate = num()?,
                (NoiseModel::Poisson { centered, .. }, "raw") => *centered = false,
                (NoiseModel::Poisson { centered, .. }, "centered") => *centered = true,
                (NoiseModel::Uniform { lo, .. }, "lo" | "low") => *lo = num()?,
                (NoiseModel::Uniform { hi, .. }, "hi" | "high") => *hi = num()?,
                (NoiseModel::SaltPepper { density }, "p" | "density") => *density = num()?,
                _ => return Err(Error::invalid(format!("unknown parameter '{key}' for {kind} noise"))),
            }
        }
        model.validate()?;
        Ok(model)
    }
}

/// A corruption model plus the seed of its random stream.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    pub model: NoiseModel,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(model: NoiseModel, seed: u64) -> Self {
        Self { model, seed }
    }

    pub fn kind(&self) -> NoiseKind {
        self.model.kind()
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

/// Applies `spec` to `x`; the same spec always yields the same output.
pub fn corrupt(x: &[f64], spec: &NoiseSpec) -> Result<Vec<f64>> {
    spec.model.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let out = match spec.model {
        NoiseModel::Gaussian { variance } => {
            let normal = Normal::new(0.0, variance.sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
            x.iter().map(|v| v + normal.sample(&mut rng)).collect()
        }
        NoiseModel::Poisson { rate, centered } => {
            let poisson = Poisson::new(rate).map_err(|e| Error::invalid(e.to_string()))?;
            let shift = if centered { rate } else { 0.0 };
            x.iter().map(|v| v + poisson.sample(&mut rng) - shift).collect()
        }
        NoiseModel::Uniform { lo, hi } => x.iter().map(|v| v + rng.random_range(lo..hi)).collect(),
        NoiseModel::SaltPepper { density } => x
            .iter()
            .map(|&v| {
                let u: f64 = rng.random();
                if u < density / 2.0 {
                    0.0
                } else if u < density {
                    1.0
                } else {
                    v
                }
            })
            .collect(),
    };
    Ok(out)
}
