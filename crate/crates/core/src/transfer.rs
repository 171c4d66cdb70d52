//! Cycle parameters, 2x2 transfer matrices and log-renormalized products.
//!
//! A cycle of Hill's equation `y'' + [lambda + q Q(t)] y = 0` over `[0, pi]`
//! maps the state `(y, y')` at the start of the cycle to the state at its end.
//! For a symmetric forcing the map is fixed by two numbers taken from the
//! principal solutions: `h = y1(pi) = y2'(pi)` and `g = y1'(pi)`.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::ops::Mul;

use crate::error::{invalid, require_finite, Error, Result};

/// Smallest `|g|` accepted when building a transfer matrix from `(h, g)`.
pub const G_MIN: f64 = 1e-12;

/// Parameters `(lambda, q, mu)` of one forcing cycle.
///
/// `mu` is a frequency factor: the cycle spans `pi / mu` in time and the
/// forcing reads `Q(mu t)`.  `mu = 1` is the periodic case.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CycleParams {
    pub lambda: f64,
    pub q: f64,
    pub mu: f64,
}

impl CycleParams {
    pub fn new(lambda: f64, q: f64, mu: f64) -> Result<Self> {
        require_finite("lambda", lambda)?;
        require_finite("q", q)?;
        require_finite("mu", mu)?;
        if mu <= 0.0 {
            return Err(invalid(format!("mu must be positive, got {mu}")));
        }
        Ok(Self { lambda, q, mu })
    }

    /// Unit-frequency cycle.
    pub fn periodic(lambda: f64, q: f64) -> Result<Self> {
        Self::new(lambda, q, 1.0)
    }
}

/// Rescale time so that the cycle has unit frequency.
///
/// With `s = mu t` the equation keeps its form with `lambda / mu^2` and
/// `q / mu^2`.
pub fn rescale_aperiodic(p: CycleParams) -> CycleParams {
    let m2 = p.mu * p.mu;
    CycleParams {
        lambda: p.lambda / m2,
        q: p.q / m2,
        mu: 1.0,
    }
}

/// Values of the two principal solutions at the end of one cycle.
///
/// `y1(0) = 1, y1'(0) = 0` and `y2(0) = 0, y2'(0) = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PrincipalSolution {
    pub y1: f64,
    pub dy1: f64,
    pub y2: f64,
    pub dy2: f64,
}

impl PrincipalSolution {
    /// `h = y1(pi)`; equals `y2'(pi)` for symmetric forcing.
    pub fn h(&self) -> f64 {
        self.y1
    }

    /// `g = y1'(pi)`.
    pub fn g(&self) -> f64 {
        self.dy1
    }

    /// Trace of the monodromy matrix, `y1(pi) + y2'(pi)`.
    pub fn discriminant(&self) -> f64 {
        self.y1 + self.dy2
    }

    /// `y1 y2' - y1' y2`, identically 1 for the exact flow.
    pub fn wronskian(&self) -> f64 {
        self.y1 * self.dy2 - self.dy1 * self.y2
    }

    /// The full monodromy matrix acting on `(y, y')`.
    pub fn monodromy(&self) -> TransferMatrix {
        TransferMatrix::new(self.y1, self.y2, self.dy1, self.dy2)
    }

    /// Symmetric transfer matrix rebuilt from `(h, g)` alone.
    pub fn transfer(&self) -> Result<TransferMatrix> {
        transfer_from_principal(self.h(), self.g())
    }

    /// Ratio `x = h / g` used by the reduced products.
    pub fn x_ratio(&self) -> Result<f64> {
        if self.g().abs() < G_MIN {
            return Err(Error::SingularMap {
                g: self.g(),
                floor: G_MIN,
            });
        }
        Ok(self.h() / self.g())
    }
}

/// Real 2x2 matrix `[[a, b], [c, d]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferMatrix {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl TransferMatrix {
    pub const IDENTITY: Self = Self {
        a: 1.0,
        b: 0.0,
        c: 0.0,
        d: 1.0,
    };

    pub fn new(a: f64, b: f64, c: f64, d: f64) -> Self {
        Self { a, b, c, d }
    }

    pub fn det(&self) -> f64 {
        self.a * self.d - self.b * self.c
    }

    pub fn trace(&self) -> f64 {
        self.a + self.d
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs()).max(self.d.abs())
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s, self.d * s)
    }

    pub fn is_finite(&self) -> bool {
        self.a.is_finite() && self.b.is_finite() && self.c.is_finite() && self.d.is_finite()
    }

    /// Largest eigenvalue modulus.
    pub fn spectral_radius(&self) -> f64 {
        let half_t = 0.5 * self.trace();
        let det = self.det();
        let disc = half_t * half_t - det;
        if disc < 0.0 {
            // complex pair with |lambda|^2 = det
            return det.sqrt();
        }
        let root = disc.sqrt();
        let big = if half_t >= 0.0 {
            half_t + root
        } else {
            half_t - root
        };
        if big == 0.0 {
            return 0.0;
        }
        let small = det / big;
        big.abs().max(small.abs())
    }

    /// Relative distance `max|A - B| / max(max|A|, max|B|)`.
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let diff = TransferMatrix::new(
            self.a - other.a,
            self.b - other.b,
            self.c - other.c,
            self.d - other.d,
        );
        let s = self.max_abs().max(other.max_abs());
        if s == 0.0 {
            0.0
        } else {
            diff.max_abs() / s
        }
    }
}

impl Mul for TransferMatrix {
    type Output = TransferMatrix;

    fn mul(self, r: TransferMatrix) -> TransferMatrix {
        TransferMatrix::new(
            self.a * r.a + self.b * r.c,
            self.a * r.b + self.b * r.d,
            self.c * r.a + self.d * r.c,
            self.c * r.b + self.d * r.d,
        )
    }
}

/// Symmetric cycle matrix `[[h, (h^2 - 1)/g], [g, h]]` (determinant one).
pub fn transfer_from_principal(h: f64, g: f64) -> Result<TransferMatrix> {
    require_finite("h", h)?;
    require_finite("g", g)?;
    if g.abs() < G_MIN {
        return Err(Error::SingularMap { g, floor: G_MIN });
    }
    Ok(TransferMatrix::new(h, (h * h - 1.0) / g, g, h))
}

/// Floquet multiplier of largest modulus for discriminant `delta`.
///
/// Inside a stability band (`|delta| <= 2`) the multipliers lie on the unit
/// circle and the value 1 is returned.
pub fn floquet_multiplier(delta: f64) -> f64 {
    let a = delta.abs();
    if a <= 2.0 {
        1.0
    } else {
        // (a + sqrt(a^2 - 4)) / 2 written without cancellation for a near 2
        0.5 * (a + ((a - 2.0) * (a + 2.0)).sqrt())
    }
}

/// Ordered product of cycle matrices kept as `exp(log_scale) * unit`.
///
/// `unit` always has largest entry magnitude exactly one.  Factors are applied
/// in time order, so after `multiply(m1)` then `multiply(m2)` the product is
/// `m2 * m1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenormalizedProduct {
    pub unit: TransferMatrix,
    pub log_scale: f64,
    pub factors: usize,
}

impl Default for RenormalizedProduct {
    fn default() -> Self {
        Self::new()
    }
}

impl RenormalizedProduct {
    pub fn new() -> Self {
        Self {
            unit: TransferMatrix::IDENTITY,
            log_scale: 0.0,
            factors: 0,
        }
    }

    /// Apply the next cycle matrix.
    pub fn multiply(&mut self, m: &TransferMatrix) -> Result<()> {
        let next = *m * self.unit;
        let s = next.max_abs();
        if !(s > 0.0) || !s.is_finite() {
            return Err(Error::ZeroMatrix {
                cycles: self.factors + 1,
            });
        }
        // divide rather than multiply by 1/s so the largest entry is exactly 1
        self.unit = TransferMatrix::new(next.a / s, next.b / s, next.c / s, next.d / s);
        self.log_scale += s.ln();
        self.factors += 1;
        Ok(())
    }

    /// `ln` of the spectral radius of the accumulated product.
    pub fn log_spectral_radius(&self) -> Result<f64> {
        let rho = self.unit.spectral_radius();
        if !(rho > 0.0) {
            return Err(Error::ZeroMatrix {
                cycles: self.factors,
            });
        }
        Ok(self.log_scale + rho.ln())
    }

    /// The product itself; overflows for long chains.
    pub fn reconstruct(&self) -> TransferMatrix {
        self.unit.scale(self.log_scale.exp())
    }
}

/// Free-function form of [`RenormalizedProduct::multiply`].
pub fn multiply_renormalized(state: &mut RenormalizedProduct, m: &TransferMatrix) -> Result<()> {
    state.multiply(m)
}

/// Growth rate `ln(rho) / (pi N)` of a product of `N` unit-length cycles.
pub fn growth_rate_of_product(state: &RenormalizedProduct) -> Result<f64> {
    if state.factors == 0 {
        return Err(invalid("growth rate of an empty product"));
    }
    Ok(state.log_spectral_radius()? / (PI * state.factors as f64))
}

/// Multiply a whole sequence and return the growth rate.
pub fn growth_rate_of_sequence<'a, I>(matrices: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a TransferMatrix>,
{
    let mut p = RenormalizedProduct::new();
    for m in matrices {
        p.multiply(m)?;
    }
    growth_rate_of_product(&p)
}
