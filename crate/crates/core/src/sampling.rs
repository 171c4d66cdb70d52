//! Random sources of the matrix-element ratios `x_k` and the seeding scheme.
//!
//! Every realization owns an independent ChaCha20 stream selected from the
//! master seed, so results never depend on which thread ran which
//! realization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::delta_limit::{self, log_abs_x_asymptotic, DEFAULT_EXCISION};
use crate::error::{invalid, require_finite, Result};

/// Identifier of the generator and stream layout, recorded in manifests.
pub const GENERATOR_ID: &str = "chacha20 (rand_chacha 0.9), seed_from_u64(master), stream = realization * 16 + purpose";

/// Independent sub-streams inside one realization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Product = 0,
    Estimator = 1,
    Forcing = 2,
    Auxiliary = 3,
}

/// Generator for `(master, realization, purpose)`.
pub fn stream_rng(master: u64, realization: u64, purpose: Purpose) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master);
    rng.set_stream(realization.wrapping_mul(16).wrapping_add(purpose as u64));
    rng
}

/// Distribution of the magnitudes `|x_k|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Family {
    /// `x = 0.01 + (10 a u)^a` with `u` uniform on `[0, 1]`.
    Fig1Power { a: f64 },
    /// `ln x` normal with the given mean and standard deviation.
    Lognormal {
        sigma_x: f64,
        #[serde(default)]
        mean_log: f64,
    },
    /// `ln x` normal with variance `sigma0^2 / 2`, so that the log-ratio of
    /// two independent draws has standard deviation `sigma0`.
    NormalXi { sigma0: f64 },
    /// `low` or `high` with equal probability.
    TwoPoint { low: f64, high: f64 },
    /// Large-`q` impulse ratio with phase uniform on `(0, 2 pi)`.
    UniformTheta {
        #[serde(default = "default_excision")]
        excision: f64,
    },
    /// Impulse ratio at fixed `lambda` with `q` uniform on `[q_min, q_max]`.
    FixedLambdaQ { lambda: f64, q_min: f64, q_max: f64 },
}

fn default_excision() -> f64 {
    DEFAULT_EXCISION
}

fn default_p() -> f64 {
    1.0
}

/// Magnitude family plus the probability `p` that a sample is positive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    #[serde(flatten)]
    pub family: Family,
    #[serde(default = "default_p")]
    pub p: f64,
}

impl DistributionSpec {
    pub fn new(family: Family, p: f64) -> Result<Self> {
        let s = Self { family, p };
        s.validate()?;
        Ok(s)
    }

    pub fn positive(family: Family) -> Result<Self> {
        Self::new(family, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        require_finite("p", self.p)?;
        if !(0.0..=1.0).contains(&self.p) {
            return Err(invalid(format!("sign probability must lie in [0, 1], got {}", self.p)));
        }
        match self.family {
            Family::Fig1Power { a } => {
                if !(a > 0.0 && a.is_finite()) {
                    return Err(invalid(format!("power exponent must be positive, got {a}")));
                }
            }
            Family::Lognormal { sigma_x, mean_log } => {
                require_finite("mean_log", mean_log)?;
                if !(sigma_x >= 0.0 && sigma_x.is_finite()) {
                    return Err(invalid(format!("sigma_x must be non-negative, got {sigma_x}")));
                }
            }
            Family::NormalXi { sigma0 } => {
                if !(sigma0 >= 0.0 && sigma0.is_finite()) {
                    return Err(invalid(format!("sigma0 must be non-negative, got {sigma0}")));
                }
            }
            Family::TwoPoint { low, high } => {
                if !(low > 0.0 && high > 0.0 && low.is_finite() && high.is_finite()) {
                    return Err(invalid("two-point values must be positive"));
                }
            }
            Family::UniformTheta { excision } => {
                if !(0.0..0.5).contains(&excision) {
                    return Err(invalid(format!("excision must lie in [0, 0.5), got {excision}")));
                }
            }
            Family::FixedLambdaQ {
                lambda,
                q_min,
                q_max,
            } => {
                require_finite("lambda", lambda)?;
                if !(q_min > 0.0 && q_max >= q_min && q_max.is_finite()) {
                    return Err(invalid(format!(
                        "q range must satisfy 0 < q_min <= q_max, got [{q_min}, {q_max}]"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Closed-form spread of the log-ratio where one is available.
    pub fn sigma0_exact(&self) -> Option<f64> {
        match self.family {
            Family::NormalXi { sigma0 } => Some(sigma0),
            Family::Lognormal { sigma_x, .. } => Some(std::f64::consts::SQRT_2 * sigma_x),
            Family::TwoPoint { low, high } => {
                Some(std::f64::consts::SQRT_2 * 0.5 * (high / low).ln().abs())
            }
            Family::UniformTheta { excision } => delta_limit::sigma0_uniform_theta(excision)
                .ok()
                .map(|s| s.sigma0),
            _ => None,
        }
    }

    /// Source drawing from this distribution with the given generator.
    pub fn source(&self, rng: ChaCha20Rng) -> Result<XSampleSource> {
        self.validate()?;
        Ok(XSampleSource { spec: *self, rng })
    }
}

/// Stream of signed samples `x_k`.
///
/// Each sample consumes the draws for its magnitude followed by exactly one
/// uniform for its sign, so sources that differ only in `p` produce the same
/// magnitudes.
#[derive(Debug, Clone)]
pub struct XSampleSource {
    spec: DistributionSpec,
    rng: ChaCha20Rng,
}

impl XSampleSource {
    pub fn spec(&self) -> &DistributionSpec {
        &self.spec
    }

    fn magnitude(&mut self) -> f64 {
        match self.spec.family {
            Family::Fig1Power { a } => {
                let u: f64 = self.rng.random();
                0.01 + (10.0 * a * u).powf(a)
            }
            Family::Lognormal { sigma_x, mean_log } => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                (mean_log + sigma_x * z).exp()
            }
            Family::NormalXi { sigma0 } => {
                let z: f64 = StandardNormal.sample(&mut self.rng);
                (sigma0 * std::f64::consts::FRAC_1_SQRT_2 * z).exp()
            }
            Family::TwoPoint { low, high } => {
                if self.rng.random::<bool>() {
                    high
                } else {
                    low
                }
            }
            Family::UniformTheta { excision } => loop {
                let theta = 2.0 * PI * self.rng.random::<f64>();
                if (theta - PI).abs() >= excision && theta > 0.0 {
                    break log_abs_x_asymptotic(theta).exp();
                }
            },
            Family::FixedLambdaQ {
                lambda,
                q_min,
                q_max,
            } => {
                let q = q_min + (q_max - q_min) * self.rng.random::<f64>();
                let ps = delta_limit::principal_solution_delta(lambda, q)
                    .expect("finite parameters were validated");
                (ps.h() / ps.g()).abs()
            }
        }
    }

    /// Next signed sample.
    pub fn next_x(&mut self) -> f64 {
        let m = self.magnitude();
        let u: f64 = self.rng.random();
        if u < self.spec.p {
            m
        } else {
            -m
        }
    }

    pub fn take(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.next_x()).collect()
    }
}

/// Spread `sqrt(2 var(ln|x|))` measured on a sample.
pub fn sample_sigma0(xs: &[f64]) -> f64 {
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let logs: Vec<f64> = xs.iter().map(|x| x.abs().ln()).collect();
    let m = logs.iter().sum::<f64>() / n;
    let var = logs.iter().map(|l| (l - m).powi(2)).sum::<f64>() / (n - 1.0);
    (2.0 * var).sqrt()
}
