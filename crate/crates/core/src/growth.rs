//! Growth-rate estimators, asymptotic forms and bounds.
//!
//! Growth rates are per unit time with cycles of length `pi`, so a product of
//! `N` cycle matrices with spectral radius `rho` grows at `ln(rho) / (pi N)`.
//! The total rate splits as `gamma_infinity + delta_gamma`: the first part is
//! the mean of the single-cycle Floquet rates, the second comes from how
//! consecutive cycles are matched.

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::{LN_2, PI};

use crate::error::{invalid, Error, Result};
use crate::quadrature;
use crate::stats::MeanEstimate;
use crate::transfer::{floquet_multiplier, growth_rate_of_product, RenormalizedProduct, TransferMatrix};

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// `<ln|z|>` for a standard normal `z`.
pub const C0_NORMAL: f64 = -0.5 * (EULER_GAMMA + LN_2);
/// `<z; z >= 0>` for a standard normal `z`, i.e. `1 / sqrt(2 pi)`.
pub const C_INF_NORMAL: f64 = 0.398_942_280_401_432_7;
/// Density of a standard normal at the origin, `1 / sqrt(2 pi)`.
pub const C_DELTA_NORMAL: f64 = 0.398_942_280_401_432_7;
/// Default prefactor in the estimate of the error made by reduced matrices.
pub const K_EPS_DEFAULT: f64 = 0.25;
/// Rough threshold on the positive-sign correction above which mixed-sign
/// products start to grow.
pub const CROSSOVER_HEURISTIC: f64 = LN_2 / (2.0 * PI);

/// Mean single-cycle rate `(1/pi) <ln mu(Delta_k)>`.
pub fn gamma_infinity(discriminants: &[f64]) -> Result<f64> {
    if discriminants.is_empty() {
        return Err(invalid("no cycles given"));
    }
    let s: f64 = discriminants.iter().map(|&d| floquet_multiplier(d).ln()).sum();
    Ok(s / (PI * discriminants.len() as f64))
}

/// `ln cosh(u)` for `u >= 0` without overflow or cancellation.
fn ln_cosh(u: f64) -> f64 {
    if u < 1.0 {
        let s = (0.5 * u).sinh();
        (2.0 * s * s).ln_1p()
    } else {
        u + (-2.0 * u).exp().ln_1p() - LN_2
    }
}

/// `ln sinh(u)` for `u > 0`.
fn ln_sinh(u: f64) -> f64 {
    if u < 1.0 {
        u.sinh().ln()
    } else {
        u + (-(-2.0 * u).exp_m1()).ln() - LN_2
    }
}

fn half_log_ratio(a: f64, b: f64) -> f64 {
    0.5 * (b.ln() - a.ln()).abs()
}

/// Estimate of `delta_gamma` for positive ratios from the sample
/// `x_0, x_1, ...`, read as independent pairs `(x_0, x_1), (x_2, x_3), ...`.
///
/// Each pair contributes `(1/pi) ln cosh(xi / 2)` with `xi = ln(x'/x)`, the
/// average of `(1/pi) ln((1 + r) / 2)` over both orderings `r = x'/x, x/x'`.
pub fn delta_gamma_thm2(xs: &[f64]) -> Result<MeanEstimate> {
    if xs.len() < 4 {
        return Err(invalid("need at least two pairs of samples"));
    }
    if let Some(&bad) = xs.iter().find(|&&x| !(x > 0.0) || !x.is_finite()) {
        return Err(Error::NonPositiveSample { value: bad });
    }
    let vals: Vec<f64> = xs
        .chunks_exact(2)
        .map(|c| ln_cosh(half_log_ratio(c[0], c[1])) / PI)
        .collect();
    Ok(MeanEstimate::from_samples(&vals))
}

/// Result of an estimator whose expectation may be `-infinity`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateEstimate {
    Finite(MeanEstimate),
    /// Some pair had `|x| = |x'|` with opposite signs, where `ln|1 + r|`
    /// diverges.
    MinusInfinity { degenerate_pairs: usize, pairs: usize },
}

impl RateEstimate {
    pub fn finite(&self) -> Option<MeanEstimate> {
        match self {
            RateEstimate::Finite(m) => Some(*m),
            RateEstimate::MinusInfinity { .. } => None,
        }
    }
}

/// Estimate of `delta_gamma` when each `x_k` is positive with probability
/// `p`.  Signs are folded in analytically: a ratio is negative with
/// probability `2p(1-p)`, and the pair then contributes `ln|sinh(xi/2)|`
/// instead of `ln cosh(xi/2)`.  Only the magnitudes of `xs` are used.
pub fn delta_gamma_thm4(xs: &[f64], p: f64) -> Result<RateEstimate> {
    if !(0.0..=1.0).contains(&p) {
        return Err(invalid(format!("sign probability must lie in [0, 1], got {p}")));
    }
    if xs.len() < 4 {
        return Err(invalid("need at least two pairs of samples"));
    }
    if let Some(&bad) = xs.iter().find(|&&x| x == 0.0 || !x.is_finite()) {
        return Err(Error::NonPositiveSample { value: bad });
    }
    let w = 2.0 * p * (1.0 - p);
    let mut vals = Vec::with_capacity(xs.len() / 2);
    let mut degenerate = 0;
    for c in xs.chunks_exact(2) {
        let u = half_log_ratio(c[0].abs(), c[1].abs());
        let same = ln_cosh(u);
        if w == 0.0 {
            vals.push(same / PI);
        } else if u == 0.0 {
            degenerate += 1;
        } else {
            vals.push(((1.0 - w) * same + w * ln_sinh(u)) / PI);
        }
    }
    if degenerate > 0 {
        return Ok(RateEstimate::MinusInfinity {
            degenerate_pairs: degenerate,
            pairs: xs.len() / 2,
        });
    }
    Ok(RateEstimate::Finite(MeanEstimate::from_samples(&vals)))
}

/// Upper bound `sigma0^2 / (4 pi)` on the positive-sign correction.
pub fn bound_thm3(sigma0: f64) -> f64 {
    sigma0 * sigma0 / (4.0 * PI)
}

/// Small-spread limit of `delta_gamma`; `c0 = <ln|z|>` for the standardized
/// log-ratio `z = xi / sigma0`.
pub fn asymptote_small_variance(sigma0: f64, p: f64, c0: f64) -> f64 {
    if p == 1.0 || p == 0.0 {
        sigma0 * sigma0 / (8.0 * PI)
    } else {
        2.0 * p * (1.0 - p) / PI * (sigma0.ln() + c0 - LN_2)
    }
}

/// Small-spread form for normally distributed log-ratios, keeping both the
/// quadratic and the logarithmic terms.
pub fn normal_closed_form_small(sigma0: f64, p: f64) -> f64 {
    let q = 1.0 - p;
    ((p * p + q * q) * sigma0 * sigma0 / 8.0 + 2.0 * p * q * (sigma0.ln() - 0.5 * EULER_GAMMA)
        - 3.0 * p * q * LN_2)
        / PI
}

/// Large-spread slope form `sigma0 c_inf / pi`.
pub fn asymptote_large_variance(sigma0: f64, c_inf: f64) -> Result<f64> {
    if !(c_inf > 0.0 && c_inf <= 0.5) {
        return Err(invalid(format!("c_inf must lie in (0, 1/2], got {c_inf}")));
    }
    if !(sigma0 > 0.0) {
        return Err(invalid(format!("sigma0 must be positive, got {sigma0}")));
    }
    Ok(sigma0 * c_inf / PI)
}

/// Interpolation between the small- and large-spread limits for normal
/// log-ratios and positive signs.
pub fn normal_interpolation(sigma0: f64) -> f64 {
    (sigma0 * sigma0 / PI) / (8.0 + (2.0 * PI).sqrt() * sigma0)
}

/// Large-spread gap between positive-sign and mixed-sign corrections.
pub fn difference_large_sigma(sigma0: f64, p: f64, c_delta: f64) -> f64 {
    8.0 * p * (1.0 - p) * c_delta / (PI * sigma0)
}

/// Shape constants of a standardized log-ratio density.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeConstants {
    /// `<ln|z|>`
    pub c0: f64,
    /// `int_0^inf z f(z) dz`
    pub c_inf: f64,
    /// `f(0)`
    pub c_delta: f64,
}

/// Shape constants of a symmetric density `f` of `z = xi / sigma0`.
pub fn shape_constants<F: Fn(f64) -> f64>(density: F) -> Result<ShapeConstants> {
    let half_log = quadrature::integrate_to_infinity(
        |z| if z > 0.0 { z.ln() * density(z) } else { 0.0 },
        0.0,
        1e-12,
        1e-11,
    )?;
    let half_mean = quadrature::integrate_to_infinity(|z| z * density(z), 0.0, 1e-12, 1e-11)?;
    Ok(ShapeConstants {
        c0: 2.0 * half_log.value,
        c_inf: half_mean.value,
        c_delta: density(0.0),
    })
}

/// Diagnostics of the sign-balance random-walk picture of the crossover.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RandomWalkDiagnostics {
    pub n_cycles: usize,
    /// `ln N_S` with `N_S = 2^N` walk steps.
    pub log_steps: f64,
    /// `ln m_*`, the log of the sign excess needed for growth.
    pub log_m_star: f64,
    /// `ln z_*`.
    pub log_z_star: f64,
    /// Probability of growth, `erfc(z_*)`.
    pub p_growth: f64,
}

/// Residual of the mixed-sign crossover condition on a sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossover {
    /// `<ln|1 + r|>` over sign classes minus `ln 2`; zero at the crossover.
    pub residual: f64,
    pub residual_stderr: f64,
    /// Positive-sign correction on the same magnitudes.
    pub delta_gamma_positive: f64,
    /// The heuristic threshold `ln 2 / (2 pi)`.
    pub heuristic_threshold: f64,
    pub diagnostics: RandomWalkDiagnostics,
}

/// Evaluate the crossover condition for sign probability `p` on the pairs
/// of `xs`; `n_cycles` only sets the scale of the random-walk diagnostics.
pub fn crossover_condition(xs: &[f64], p: f64, n_cycles: usize) -> Result<Crossover> {
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("crossover needs 0 < p < 1, got {p}")));
    }
    let positive = delta_gamma_thm2(&xs.iter().map(|x| x.abs()).collect::<Vec<_>>())?;
    let w = 2.0 * p * (1.0 - p);
    let mut vals = Vec::with_capacity(xs.len() / 2);
    for c in xs.chunks_exact(2) {
        let (a, b) = (c[0].abs(), c[1].abs());
        let mut acc = 0.0;
        for r in [b / a, a / b] {
            let minus = (1.0 - r).abs();
            if minus == 0.0 {
                return Err(Error::DegenerateSample);
            }
            acc += 0.5 * ((1.0 - w) * r.ln_1p() + w * minus.ln());
        }
        vals.push(acc - LN_2);
    }
    let m = MeanEstimate::from_samples(&vals);
    let n = n_cycles as f64;
    let dg0 = positive.mean;
    let log_z_star = n * (0.5 * LN_2 - PI * dg0);
    let p_growth = if log_z_star > 700.0 {
        0.0
    } else {
        libm::erfc(log_z_star.exp())
    };
    Ok(Crossover {
        residual: m.mean,
        residual_stderr: m.stderr,
        delta_gamma_positive: dg0,
        heuristic_threshold: CROSSOVER_HEURISTIC,
        diagnostics: RandomWalkDiagnostics {
            n_cycles,
            log_steps: n * LN_2,
            log_m_star: n * (LN_2 - PI * dg0),
            log_z_star,
            p_growth,
        },
    })
}

/// Bracket on the error introduced by dropping the `1 - 1/h^2` factors from
/// the cycle matrices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReducedErrorBounds {
    pub lower: f64,
    pub upper: f64,
    pub estimate: f64,
}

pub fn error_bound_prop2(hs: &[f64], k_eps: f64) -> Result<ReducedErrorBounds> {
    if hs.is_empty() {
        return Err(invalid("no h values given"));
    }
    if let Some(&h) = hs.iter().find(|h| !(h.abs() > 1.0)) {
        return Err(Error::InvalidH { h });
    }
    let n = hs.len() as f64;
    let mean_log_phi = hs.iter().map(|h| (-1.0 / (h * h)).ln_1p()).sum::<f64>() / n;
    let mean_inv_h2 = hs.iter().map(|h| 1.0 / (h * h)).sum::<f64>() / n;
    Ok(ReducedErrorBounds {
        lower: 0.0,
        upper: -mean_log_phi / (2.0 * PI),
        estimate: k_eps / PI * mean_inv_h2,
    })
}

/// Full cycle matrix `[[1, x phi], [1/x, 1]]` scaled by `1/h`, with
/// `phi = 1 - 1/h^2`.
pub fn full_scaled_matrix(x: f64, h: f64) -> TransferMatrix {
    TransferMatrix::new(1.0, x * (1.0 - 1.0 / (h * h)), 1.0 / x, 1.0)
}

/// Reduced cycle matrix `[[1, x], [1/x, 1]]`.
pub fn reduced_matrix(x: f64) -> TransferMatrix {
    TransferMatrix::new(1.0, x, 1.0 / x, 1.0)
}

/// Closed-form rate of the products of `(x_k - 1) [[0, 1], [-1/x_k, 0]]`.
pub fn appendix_b_growth(xs: &[f64]) -> Result<f64> {
    if xs.len() < 2 {
        return Err(invalid("need at least two samples"));
    }
    let mut s = 0.0;
    for &x in xs {
        if x == 1.0 {
            return Err(Error::DegenerateSample);
        }
        if x == 0.0 || !x.is_finite() {
            return Err(invalid(format!("sample {x} has no reciprocal")));
        }
        s += (x - 1.0).abs().ln() + (1.0 / x - 1.0).abs().ln();
    }
    Ok(s / (2.0 * PI * xs.len() as f64))
}

/// The factor `(x - 1) [[0, 1], [-1/x, 0]]`.
pub fn appendix_b_matrix(x: f64) -> TransferMatrix {
    TransferMatrix::new(0.0, x - 1.0, -(x - 1.0) / x, 0.0)
}

/// Rate of the same products computed by brute-force multiplication.
pub fn appendix_b_product_growth(xs: &[f64]) -> Result<f64> {
    let mut p = RenormalizedProduct::new();
    for &x in xs {
        if x == 1.0 {
            return Err(Error::DegenerateSample);
        }
        p.multiply(&appendix_b_matrix(x))?;
    }
    growth_rate_of_product(&p)
}

/// `(Sigma_T, Sigma_B)` of the reduced product by enumerating its monomials.
///
/// The product `C_N ... C_1` equals `[[S_T, x_1 S_T], [S_B / x_1, S_B]]`
/// where `S_T` sums the `2^(N-1)` ratios obtained by choosing, for every
/// `k >= 2`, either `1` or `x_k / x_(k-1)`, and `S_B` sums their reciprocals.
pub fn reduced_expansion(xs: &[f64]) -> Result<(f64, f64)> {
    let n = xs.len();
    if n == 0 || n > 24 {
        return Err(invalid("expansion is enumerated for 1 to 24 factors"));
    }
    let ratios: Vec<f64> = xs.windows(2).map(|w| w[1] / w[0]).collect();
    let mut top = 0.0;
    let mut bottom = 0.0;
    for mask in 0u32..(1u32 << (n - 1)) {
        let mut r = 1.0;
        for (k, q) in ratios.iter().enumerate() {
            if mask & (1 << k) != 0 {
                r *= q;
            }
        }
        top += r;
        bottom += 1.0 / r;
    }
    Ok((top, bottom))
}

/// `P(n|N) = N! / ((N - 2n)! (n!)^2)`.
pub fn combinatoric_count(n: u32, big_n: u32) -> Result<BigUint> {
    if 2 * n > big_n {
        return Err(invalid(format!("need 2n <= N, got n = {n}, N = {big_n}")));
    }
    let fact = |k: u32| -> BigUint { (1..=k).fold(BigUint::one(), |acc, i| acc * BigUint::from(i)) };
    let num = fact(big_n);
    let den = fact(big_n - 2 * n) * fact(n) * fact(n);
    Ok(num / den)
}

/// Count together with the bracket `(1/9, 1/2)` for the crossing fraction.
pub fn combinatoric_estimate(n: u32, big_n: u32) -> Result<(BigUint, (f64, f64))> {
    Ok((combinatoric_count(n, big_n)?, (1.0 / 9.0, 0.5)))
}

fn big_ln(x: &BigUint) -> f64 {
    if x.is_zero() {
        return f64::NEG_INFINITY;
    }
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().expect("fits in f64").ln();
    }
    let shift = bits - 64;
    let top = (x >> shift).to_f64().expect("64 bits");
    top.ln() + shift as f64 * LN_2
}

/// Fraction `n/N` at which `n P(n|N)` first reaches `2^N`, with linear
/// interpolation of the logarithm between neighbouring integers.
pub fn combinatoric_root(big_n: u32) -> Result<f64> {
    if big_n < 2 {
        return Err(invalid("N must be at least 2"));
    }
    let target = big_n as f64 * LN_2;
    let f = |n: u32| -> Result<f64> {
        let c = combinatoric_count(n, big_n)? * BigUint::from(n);
        Ok(big_ln(&c) - target)
    };
    let mut prev = f(1)?;
    if prev >= 0.0 {
        return Ok(1.0 / big_n as f64);
    }
    for n in 2..=big_n / 2 {
        let cur = f(n)?;
        if cur >= 0.0 {
            let frac = prev / (prev - cur);
            return Ok((n as f64 - 1.0 + frac) / big_n as f64);
        }
        prev = cur;
    }
    Err(Error::RootFailure(format!("n P(n|{big_n}) never reaches 2^{big_n}")))
}

/// Large-`N` limit of [`combinatoric_root`]: the root `alpha` of
/// `-(1 - 2a) ln(1 - 2a) - 2a ln a = ln 2` below the maximum at `a = 1/3`.
pub fn combinatoric_root_asymptotic() -> Result<f64> {
    let f = |a: f64| -(1.0 - 2.0 * a) * (1.0 - 2.0 * a).ln() - 2.0 * a * a.ln() - LN_2;
    let (mut lo, mut hi) = (1e-6, 1.0 / 3.0);
    if f(lo) >= 0.0 || f(hi) <= 0.0 {
        return Err(Error::RootFailure("entropy root not bracketed".into()));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Summary of one growth-rate evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GrowthReport {
    pub estimator: String,
    pub sigma0: Option<f64>,
    pub p: f64,
    pub samples: usize,
    pub gamma_infinity: Option<f64>,
    pub delta_gamma: Option<f64>,
    pub stderr: Option<f64>,
    pub minus_infinity: bool,
    pub bound: Option<f64>,
}

/// One point of a `delta_gamma` curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub sigma0: f64,
    pub delta_gamma: f64,
    pub stderr: f64,
    pub estimator: String,
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from("sigma0,delta_gamma,stderr,estimator\n");
    for r in rows {
        s.push_str(&format!("{},{},{},{}\n", r.sigma0, r.delta_gamma, r.stderr, r.estimator));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn gamma_infinity_values() {
        assert_eq!(gamma_infinity(&[1.0, -2.0, 0.0]).unwrap(), 0.0);
        let mu = floquet_multiplier(5.0);
        assert_relative_eq!(gamma_infinity(&[5.0, 1.0]).unwrap(), mu.ln() / (2.0 * PI));
        assert!(gamma_infinity(&[]).is_err());
    }

    #[test]
    fn ln_cosh_and_sinh_branches() {
        for u in [1e-8, 0.3, 0.999_999, 1.0, 1.5, 40.0, 800.0] {
            let c = ln_cosh(u);
            let s = ln_sinh(u);
            if u < 300.0 {
                assert_relative_eq!(c, u.cosh().ln(), max_relative = 1e-12);
                assert_relative_eq!(s, u.sinh().ln(), max_relative = 1e-12);
            }
            assert!(s <= c);
        }
        assert_relative_eq!(ln_cosh(800.0), 800.0 - LN_2);
    }

    #[test]
    fn thm2_two_point_value() {
        // pairs (1, e) and (1, 1): mean of ln cosh(1/2) and 0, over pi
        let e = std::f64::consts::E;
        let xs = [1.0, e, 1.0, 1.0, e, 1.0, e, e];
        let est = delta_gamma_thm2(&xs).unwrap();
        assert_relative_eq!(est.mean, 0.5f64.cosh().ln() / (2.0 * PI), epsilon = 1e-15);
        // same value as ((ln(1+e) + ln(1+1/e) - 2 ln 2)/4)/pi up to pairing weight
        let closed = ((1.0 + e).ln() + (1.0 + 1.0 / e).ln() - 2.0 * LN_2) / 4.0 / PI;
        assert_relative_eq!(est.mean, closed, epsilon = 1e-15);
    }

    #[test]
    fn thm2_rejects_non_positive() {
        assert!(matches!(
            delta_gamma_thm2(&[1.0, 2.0, -1.0, 3.0]),
            Err(Error::NonPositiveSample { value }) if value == -1.0
        ));
    }

    #[test]
    fn thm4_degenerate_pair_flags() {
        let r = delta_gamma_thm4(&[2.0, 2.0, 1.0, 3.0], 0.5).unwrap();
        assert_eq!(r, RateEstimate::MinusInfinity { degenerate_pairs: 1, pairs: 2 });
        // with only positive signs the same pair is harmless
        assert!(delta_gamma_thm4(&[2.0, 2.0, 1.0, 3.0], 1.0).unwrap().finite().is_some());
    }

    #[test]
    fn asymptotic_forms() {
        assert_relative_eq!(asymptote_small_variance(0.1, 1.0, 0.0), 3.978_873_577e-4, max_relative = 1e-9);
        // the normal closed form equals the general one with c0 = <ln|z|>
        for &(s, p) in &[(0.1, 0.5), (0.03, 0.75)] {
            let q = 1.0 - p;
            let general = asymptote_small_variance(s, p, C0_NORMAL)
                + (p * p + q * q) * s * s / (8.0 * PI);
            assert_relative_eq!(normal_closed_form_small(s, p), general, max_relative = 1e-12);
        }
        assert_relative_eq!(normal_closed_form_small(0.3, 1.0), 0.09 / (8.0 * PI));
        assert_relative_eq!(
            asymptote_large_variance(30.0, C_INF_NORMAL).unwrap(),
            30.0 / (2f64.sqrt() * PI.powf(1.5)),
            max_relative = 1e-14
        );
        assert!(asymptote_large_variance(30.0, 0.6).is_err());
        assert!((normal_interpolation(1.0) - 0.030_30).abs() < 5e-6);
        assert_eq!(difference_large_sigma(20.0, 1.0, C_DELTA_NORMAL), 0.0);
        assert_relative_eq!(
            difference_large_sigma(20.0, 0.5, C_DELTA_NORMAL),
            0.012_69,
            max_relative = 1e-3
        );
        assert_relative_eq!(bound_thm3(2.159), 0.371, epsilon = 5e-4);
    }

    #[test]
    fn interpolation_small_limit() {
        let s = 1e-4;
        assert_relative_eq!(normal_interpolation(s), s * s / (8.0 * PI), max_relative = 1e-4);
    }

    #[test]
    fn normal_shape_constants() {
        let phi = |z: f64| (-0.5 * z * z).exp() / (2.0 * PI).sqrt();
        let c = shape_constants(phi).unwrap();
        assert!((c.c0 - C0_NORMAL).abs() < 1e-9, "{}", c.c0);
        assert!((c.c_inf - C_INF_NORMAL).abs() < 1e-10);
        assert_eq!(c.c_delta, C_DELTA_NORMAL);
    }

    #[test]
    fn crossover_reports_heuristic() {
        let xs = [1.0, 3.0, 2.0, 0.5, 1.0, 7.0, 0.2, 0.9];
        let c = crossover_condition(&xs, 0.5, 100).unwrap();
        assert_relative_eq!(c.heuristic_threshold, 0.110_318, max_relative = 1e-5);
        let t4 = delta_gamma_thm4(&xs, 0.5).unwrap().finite().unwrap();
        assert_relative_eq!(c.residual, PI * t4.mean, max_relative = 1e-12);
        assert!(crossover_condition(&xs, 1.0, 100).is_err());
    }

    #[test]
    fn prop2_examples() {
        let b = error_bound_prop2(&[10.0; 5], K_EPS_DEFAULT).unwrap();
        assert_relative_eq!(b.upper, 1.599_6e-3, max_relative = 1e-4);
        assert_relative_eq!(b.estimate, 0.25 / PI / 100.0);
        assert!(matches!(error_bound_prop2(&[10.0, -1.0], 0.25), Err(Error::InvalidH { .. })));
        let far = error_bound_prop2(&[1e8; 3], 0.25).unwrap();
        assert!(far.upper < 1e-16 && far.estimate < 1e-16);
    }

    #[test]
    fn appendix_b_examples() {
        assert_relative_eq!(appendix_b_growth(&[2.0; 6]).unwrap(), -LN_2 / (2.0 * PI), epsilon = 1e-15);
        assert!(matches!(appendix_b_growth(&[1.0, 2.0]), Err(Error::DegenerateSample)));
    }

    #[test]
    fn appendix_b_alternation() {
        let xs = [1.7, 0.4, 3.3, 2.2, 0.9, 5.0, 1.3, 0.6];
        let mut prod = TransferMatrix::IDENTITY;
        for (k, &x) in xs.iter().enumerate() {
            prod = appendix_b_matrix(x) * prod;
            if k % 2 == 1 {
                assert!(prod.b == 0.0 && prod.c == 0.0, "{k}: {prod:?}");
            } else {
                assert!(prod.a == 0.0 && prod.d == 0.0, "{k}: {prod:?}");
            }
        }
        // two factors: (x1 - 1)(x2 - 1) diag(-1/x1, -1/x2)
        let two = appendix_b_matrix(xs[1]) * appendix_b_matrix(xs[0]);
        let s = (xs[0] - 1.0) * (xs[1] - 1.0);
        assert_relative_eq!(two.a, -s / xs[0], max_relative = 1e-15);
        assert_relative_eq!(two.d, -s / xs[1], max_relative = 1e-15);
    }

    #[test]
    fn appendix_b_odd_length_is_exact() {
        let xs = [1.7, 0.4, 3.3, 2.2, 0.9, 5.0, 1.3];
        let a = appendix_b_growth(&xs).unwrap();
        let b = appendix_b_product_growth(&xs).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-13);
    }

    #[test]
    fn expansion_small_case() {
        // N = 2: C2 C1 has top-left 1 + x2/x1
        let (t, b) = reduced_expansion(&[2.0, 6.0]).unwrap();
        assert_eq!((t, b), (4.0, 4.0 / 3.0));
        let prod = reduced_matrix(6.0) * reduced_matrix(2.0);
        assert_relative_eq!(prod.a, t);
        assert_relative_eq!(prod.d, b);
    }

    #[test]
    fn combinatoric_small_counts() {
        assert_eq!(combinatoric_count(0, 7).unwrap(), BigUint::one());
        assert_eq!(combinatoric_count(1, 4).unwrap(), BigUint::from(12u32));
        assert_eq!(combinatoric_count(2, 4).unwrap(), BigUint::from(6u32));
        assert!(combinatoric_count(3, 5).is_err());
        let (_, bracket) = combinatoric_estimate(1, 10).unwrap();
        assert_eq!(bracket, (1.0 / 9.0, 0.5));
    }

    #[test]
    fn combinatoric_roots() {
        let a = combinatoric_root_asymptotic().unwrap();
        assert!((a - 0.11354).abs() < 1e-5, "{a}");
        assert!(a > 1.0 / 9.0 && a < 0.5);
    }

    #[test]
    fn sweep_csv_format() {
        let rows = vec![SweepRow { sigma0: 1.5, delta_gamma: 0.25, stderr: 0.01, estimator: "product".into() }];
        assert_eq!(sweep_csv(&rows), "sigma0,delta_gamma,stderr,estimator\n1.5,0.25,0.01,product\n");
    }

    proptest! {
        #[test]
        fn thm2_nonnegative_and_bounded(xs in proptest::collection::vec(0.01..100.0f64, 4..60)) {
            let est = delta_gamma_thm2(&xs).unwrap();
            prop_assert!(est.mean >= 0.0);
            // each pair obeys ln cosh(xi/2) <= xi^2 / 8
            let per_pair_bound: f64 = xs.chunks_exact(2)
                .map(|c| (c[1] / c[0]).ln().powi(2) / (8.0 * PI)).sum::<f64>() / (xs.len() / 2) as f64;
            prop_assert!(est.mean <= per_pair_bound + 1e-15);
        }

        #[test]
        fn thm4_at_p1_is_thm2(xs in proptest::collection::vec(0.01..100.0f64, 4..60)) {
            let a = delta_gamma_thm2(&xs).unwrap();
            let b = delta_gamma_thm4(&xs, 1.0).unwrap().finite().unwrap();
            prop_assert_eq!(a.mean.to_bits(), b.mean.to_bits());
            prop_assert_eq!(a.stderr.to_bits(), b.stderr.to_bits());
        }

        #[test]
        fn thm4_not_above_thm2(xs in proptest::collection::vec(0.01..100.0f64, 4..60), p in 0.0..1.0f64) {
            let a = delta_gamma_thm2(&xs).unwrap();
            if let RateEstimate::Finite(b) = delta_gamma_thm4(&xs, p).unwrap() {
                prop_assert!(b.mean <= a.mean + 1e-15);
            }
        }

        #[test]
        fn gamma_infinity_additive(a in proptest::collection::vec(-20.0..20.0f64, 1..30),
                                   b in proptest::collection::vec(-20.0..20.0f64, 1..30)) {
            let ga = gamma_infinity(&a).unwrap();
            let gb = gamma_infinity(&b).unwrap();
            let joined: Vec<f64> = a.iter().chain(&b).copied().collect();
            let gj = gamma_infinity(&joined).unwrap();
            let w = (a.len() as f64 * ga + b.len() as f64 * gb) / joined.len() as f64;
            prop_assert!((gj - w).abs() <= 1e-13 * (1.0 + gj.abs()));
        }

        #[test]
        fn reduced_product_matches_expansion(xs in proptest::collection::vec(0.05..20.0f64, 1..10)) {
            let (t, b) = reduced_expansion(&xs).unwrap();
            let mut p = TransferMatrix::IDENTITY;
            for &x in &xs { p = reduced_matrix(x) * p; }
            let x1 = xs[0];
            prop_assert!((p.a - t).abs() <= 1e-12 * t);
            prop_assert!((p.d - b).abs() <= 1e-12 * b);
            prop_assert!((p.b - x1 * p.a).abs() <= 1e-12 * p.b.abs());
            prop_assert!((p.c - p.d / x1).abs() <= 1e-12 * p.c.abs());
            // top / bottom = x_N / x_1 exactly
            prop_assert!((t / b - xs[xs.len() - 1] / x1).abs() <= 1e-12 * t / b);
        }
    }
}
