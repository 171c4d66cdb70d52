//! Closed forms for a cycle whose forcing is a single impulse at mid-cycle.
//!
//! Over one cycle the flow is free oscillation for `pi/2`, a kick
//! `y' -> y' - q y`, and free oscillation for another `pi/2`.  Everything in
//! this module follows from that composition.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::cycle_solver::{solve_cycle, ForcingShape};
use crate::error::{invalid, require_finite, Error, Result};
use crate::quadrature;
use crate::stats::linear_fit;
use crate::transfer::{CycleParams, PrincipalSolution, TransferMatrix};

/// `(cos(k tau), sin(k tau) / k)` with `k = sqrt(lambda)`, continued to
/// `lambda <= 0` through the hyperbolic functions.
fn trig_pair(lambda: f64, tau: f64) -> (f64, f64) {
    if lambda > 0.0 {
        let k = lambda.sqrt();
        let (s, c) = (k * tau).sin_cos();
        (c, s / k)
    } else if lambda < 0.0 {
        let k = (-lambda).sqrt();
        ((k * tau).cosh(), (k * tau).sinh() / k)
    } else {
        (1.0, tau)
    }
}

/// Flow of `y'' + lambda y = 0` over a time `tau`, acting on `(y, y')`.
pub fn free_propagator(lambda: f64, tau: f64) -> TransferMatrix {
    let (c, s) = trig_pair(lambda, tau);
    TransferMatrix::new(c, s, -lambda * s, c)
}

/// Jump of `y'` across an impulse of strength `q`.
pub fn kick(q: f64) -> TransferMatrix {
    TransferMatrix::new(1.0, 0.0, -q, 1.0)
}

/// Principal solutions at `t = pi` for impulse forcing of strength `q`.
pub fn principal_solution_delta(lambda: f64, q: f64) -> Result<PrincipalSolution> {
    require_finite("lambda", lambda)?;
    require_finite("q", q)?;
    let (c_full, s_full) = trig_pair(lambda, PI);
    let (c_half, s_half) = trig_pair(lambda, FRAC_PI_2);
    let h = c_full - 0.5 * q * s_full;
    Ok(PrincipalSolution {
        y1: h,
        dy1: -lambda * s_full - q * c_half * c_half,
        y2: s_full - q * s_half * s_half,
        dy2: h,
    })
}

/// `|h|` for impulse forcing; the cycle is unstable when it exceeds one.
pub fn instability_h(lambda: f64, q: f64) -> f64 {
    let (c, s) = trig_pair(lambda, PI);
    (0.5 * q * s - c).abs()
}

/// Growth rate `acosh(H) / pi` of the periodic impulse problem, zero inside
/// stability bands.
pub fn growth_rate_single(lambda: f64, q: f64) -> f64 {
    let h = instability_h(lambda, q);
    if h <= 1.0 {
        0.0
    } else {
        h.acosh() / PI
    }
}

/// Split of the monodromy matrix as `A - (q / (2 sqrt(lambda))) B`.
///
/// `A` is free rotation over the whole cycle; `B` is rank one with
/// `B^2 = 2 sin(2 theta) B`, where `theta = sqrt(lambda) pi / 2`.
pub fn decomposition_ab(lambda: f64) -> Result<(TransferMatrix, TransferMatrix)> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(invalid(format!("lambda must be positive, got {lambda}")));
    }
    let k = lambda.sqrt();
    let theta = 0.5 * k * PI;
    let (s, c) = theta.sin_cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let a = TransferMatrix::new(c2, s2 / k, -k * s2, c2);
    let b = TransferMatrix::new(s2, 2.0 * s * s / k, 2.0 * k * c * c, s2);
    Ok((a, b))
}

/// Instability map sampled on a rectangular `(lambda, q)` grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityChart {
    pub lambdas: Vec<f64>,
    pub qs: Vec<f64>,
    /// Row-major with `lambda` as the slow index.
    pub unstable: Vec<bool>,
}

impl StabilityChart {
    pub fn is_unstable(&self, i_lambda: usize, i_q: usize) -> bool {
        self.unstable[i_lambda * self.qs.len() + i_q]
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("lambda,q,unstable\n");
        for (i, &l) in self.lambdas.iter().enumerate() {
            for (j, &q) in self.qs.iter().enumerate() {
                let u = u8::from(self.is_unstable(i, j));
                out.push_str(&format!("{l},{q},{u}\n"));
            }
        }
        out
    }
}

fn grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| {
            if i + 1 == n {
                hi
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        })
        .collect()
}

/// Sample `H > 1` on an inclusive `resolution x resolution` grid.
pub fn stability_chart(
    lambda_range: (f64, f64),
    q_range: (f64, f64),
    resolution: usize,
) -> Result<StabilityChart> {
    for (name, (lo, hi)) in [("lambda", lambda_range), ("q", q_range)] {
        require_finite(name, lo)?;
        require_finite(name, hi)?;
        if !(hi > lo) || lo < 0.0 {
            return Err(invalid(format!(
                "{name} range must be non-negative and increasing, got [{lo}, {hi}]"
            )));
        }
    }
    if resolution < 2 {
        return Err(invalid("chart resolution must be at least 2"));
    }
    let lambdas = grid(lambda_range.0, lambda_range.1, resolution);
    let qs = grid(q_range.0, q_range.1, resolution);
    let unstable = lambdas
        .par_iter()
        .flat_map_iter(|&l| qs.iter().map(move |&q| instability_h(l, q) > 1.0))
        .collect();
    Ok(StabilityChart {
        lambdas,
        qs,
        unstable,
    })
}

/// Large-`q` width of the `n`-th stability band, `8 n^2 / (pi q)`.
pub fn zone_width(n: u32, q: f64) -> Result<f64> {
    if n == 0 {
        return Err(invalid("band index must be at least 1"));
    }
    if !(q > 0.0) || !q.is_finite() {
        return Err(invalid(format!("q must be positive, got {q}")));
    }
    let n = n as f64;
    Ok(8.0 * n * n / (PI * q))
}

/// Width of the `n`-th stability band above `lambda = n^2`, found by
/// bisection on `|h| = 1`; the bracket is closed to `lambda_tol`.
pub fn zone_width_bisect(n: u32, q: f64, lambda_tol: f64) -> Result<f64> {
    let guess = zone_width(n, q)?;
    let n2 = (n as f64).powi(2);
    let f = |l: f64| instability_h(l, q) - 1.0;
    // just above n^2 the cycle is stable; march outwards until it is not
    let mut lo = n2 + 1e-6 * guess;
    if f(lo) >= 0.0 {
        return Err(Error::RootFailure(format!(
            "no stability band just above lambda = {n2} at q = {q}"
        )));
    }
    let mut hi = n2 + 2.0 * guess;
    let mut tries = 0;
    while f(hi) <= 0.0 {
        lo = hi;
        hi = n2 + 2.0 * (hi - n2);
        tries += 1;
        if tries > 60 || hi > (n as f64 + 1.0).powi(2) {
            return Err(Error::RootFailure(format!(
                "band {n} at q = {q} does not close below the next integer square"
            )));
        }
    }
    while hi - lo > lambda_tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(0.5 * (lo + hi) - n2)
}

/// Large-`q` ratio `x = h / g` as a function of the cycle phase
/// `theta = sqrt(lambda) pi`.
pub fn x_ratio_asymptotic(theta: f64) -> Result<f64> {
    require_finite("theta", theta)?;
    if (1.0 + theta.cos()).abs() < 1e-12 {
        return Err(Error::PoleAt { theta });
    }
    if theta == 0.0 {
        return Ok(FRAC_PI_2);
    }
    Ok(PI / theta * (0.5 * theta).tan())
}

/// `ln|x|` of the large-`q` ratio, free of cancellation near the pole.
pub fn log_abs_x_asymptotic(theta: f64) -> f64 {
    if theta == 0.0 {
        return FRAC_PI_2.ln();
    }
    (PI / theta).abs().ln() + (0.5 * theta).tan().abs().ln()
}

/// Ratio `x = h / g` at `lambda = (theta / pi)^2` and finite `q`.
pub fn x_ratio_fixed_lambda(theta: f64, q: f64) -> Result<f64> {
    require_finite("theta", theta)?;
    require_finite("q", q)?;
    if !(theta > 0.0) {
        return Err(invalid(format!("theta must be positive, got {theta}")));
    }
    let (s, c) = theta.sin_cos();
    let num = q * (PI / theta) * s - 2.0 * c;
    let den = q * (1.0 + c) + 2.0 * (theta / PI) * s;
    if den.abs() < 1e-12 * (1.0 + q.abs()) {
        return Err(Error::PoleAt { theta });
    }
    Ok(num / den)
}

/// Spread of `ln|x|` for a phase uniform on `(0, 2 pi)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniformThetaSpread {
    pub mean_log: f64,
    pub var_log: f64,
    /// `sqrt(2 var)`, the spread of the log-ratio of two independent draws.
    pub sigma0: f64,
    pub excision: f64,
}

pub const DEFAULT_EXCISION: f64 = 1e-6;

/// Moments of `ln|x|` with the phases within `excision` of `pi` removed.
pub fn sigma0_uniform_theta(excision: f64) -> Result<UniformThetaSpread> {
    if !(0.0..0.5).contains(&excision) {
        return Err(invalid(format!("excision radius must lie in [0, 0.5), got {excision}")));
    }
    let pieces = [(0.0, PI - excision), (PI + excision, 2.0 * PI)];
    let len = 2.0 * PI - 2.0 * excision;
    let mut mean = 0.0;
    for &(a, b) in &pieces {
        mean += quadrature::integrate(log_abs_x_asymptotic, a, b, 1e-13, 1e-13)?.value;
    }
    mean /= len;
    let mut var = 0.0;
    for &(a, b) in &pieces {
        var += quadrature::integrate(
            |t| (log_abs_x_asymptotic(t) - mean).powi(2),
            a,
            b,
            1e-13,
            1e-13,
        )?
        .value;
    }
    var /= len;
    Ok(UniformThetaSpread {
        mean_log: mean,
        var_log: var,
        sigma0: (2.0 * var).sqrt(),
        excision,
    })
}

/// `q` at which the barrier interior phase `sqrt(lambda + q/w) w` equals
/// `(m + 1/2) pi`, where `|h|` peaks.
pub fn barrier_crest_q(lambda: f64, width: f64, m: u32) -> f64 {
    let phase = (m as f64 + 0.5) * PI;
    phase * phase / width - lambda * width
}

/// Power-law fit of `|h|` against `q` for a square barrier of given width.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingFit {
    pub exponent: f64,
    pub exponent_stderr: f64,
    pub log_prefactor: f64,
}

pub fn square_barrier_scaling(
    lambda: f64,
    qs: &[f64],
    width: f64,
    tol: f64,
) -> Result<ScalingFit> {
    if qs.len() < 2 {
        return Err(Error::FitFailure("need at least two q values".into()));
    }
    let shape = ForcingShape::SquareBarrier { width };
    let mut lx = Vec::with_capacity(qs.len());
    let mut ly = Vec::with_capacity(qs.len());
    for &q in qs {
        if !(q > 0.0) {
            return Err(Error::FitFailure(format!("q = {q} has no logarithm")));
        }
        let h = solve_cycle(shape, CycleParams::periodic(lambda, q)?, tol)?.h();
        if h == 0.0 || !h.is_finite() {
            return Err(Error::FitFailure(format!("|h| = {h} at q = {q}")));
        }
        lx.push(q.ln());
        ly.push(h.abs().ln());
    }
    let fit = linear_fit(&lx, &ly)?;
    Ok(ScalingFit {
        exponent: fit.slope,
        exponent_stderr: fit.slope_stderr,
        log_prefactor: fit.intercept,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn quarter_lambda_values() {
        let ps = principal_solution_delta(0.25, 7.0).unwrap();
        assert_relative_eq!(ps.h(), -7.0, epsilon = 1e-14);
        assert_relative_eq!(ps.g(), -4.0, epsilon = 1e-14);
        assert_relative_eq!(ps.x_ratio().unwrap(), 1.75, epsilon = 1e-14);
        assert_relative_eq!(instability_h(0.25, 7.0), 7.0, epsilon = 1e-14);
    }

    #[test]
    fn zero_q_is_free() {
        let ps = principal_solution_delta(2.0, 0.0).unwrap();
        let k = 2.0f64.sqrt();
        assert_relative_eq!(ps.h(), (k * PI).cos(), epsilon = 1e-15);
        assert_relative_eq!(ps.g(), -k * (k * PI).sin(), epsilon = 1e-14);
    }

    #[test]
    fn growth_rate_examples() {
        assert_eq!(growth_rate_single(0.25, 0.5), 0.0);
        // H = 100 at lambda = 1/4, q = 100
        let expected = (100.0 + 9999.0f64.sqrt()).ln() / PI;
        assert_relative_eq!(growth_rate_single(0.25, 100.0), expected, epsilon = 1e-14);
    }

    #[test]
    fn ab_split_reproduces_monodromy() {
        for &(l, q) in &[(0.3, 4.0), (2.7, -1.5), (9.2, 30.0)] {
            let (a, b) = decomposition_ab(l).unwrap();
            let f = q / (2.0 * l.sqrt());
            let m = TransferMatrix::new(a.a - f * b.a, a.b - f * b.b, a.c - f * b.c, a.d - f * b.d);
            let ps = principal_solution_delta(l, q).unwrap();
            assert!(m.rel_diff(&ps.monodromy()) < 1e-13);
            let theta = 0.5 * l.sqrt() * PI;
            assert!((b * b).rel_diff(&b.scale(2.0 * (2.0 * theta).sin())) < 1e-13);
            let a3 = a * a * a;
            let k = l.sqrt();
            let rot3 = free_propagator(l, 3.0 * PI);
            assert!(a3.rel_diff(&rot3) < 1e-12, "{k}");
        }
    }

    #[test]
    fn chart_is_lambda_major() {
        let c = stability_chart((0.0, 9.0), (0.0, 5.0), 4).unwrap();
        assert_eq!(c.lambdas, vec![0.0, 3.0, 6.0, 9.0]);
        let csv = c.to_csv();
        let mut lines = csv.lines();
        assert_eq!(lines.next(), Some("lambda,q,unstable"));
        assert!(lines.next().unwrap().starts_with("0,0,"));
        assert!(lines.next().unwrap().starts_with("0,1.6666"));
        // lambda = 0, q = 0 has H = 1 exactly: marginal, reported stable
        assert!(!c.is_unstable(0, 0));
        assert!(stability_chart((1.0, 0.0), (0.0, 1.0), 3).is_err());
        assert!(stability_chart((0.0, 1.0), (0.0, 1.0), 1).is_err());
    }

    #[test]
    fn chart_boundaries_at_integer_squares() {
        // with q -> 0+ the tongues touch down at lambda = n^2
        for n in 1..=3 {
            let l = (n * n) as f64;
            assert!(instability_h(l - 0.01, 0.5) > 1.0 || instability_h(l + 0.01, 0.5) > 1.0);
            assert!((instability_h(l, 0.0) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zone_width_formula() {
        assert_relative_eq!(zone_width(1, 1000.0).unwrap(), 8.0 / (PI * 1000.0));
        assert!(zone_width(0, 10.0).is_err());
        assert!(zone_width(1, -1.0).is_err());
    }

    #[test]
    fn x_ratio_values() {
        assert_relative_eq!(x_ratio_asymptotic(FRAC_PI_2).unwrap(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(x_ratio_asymptotic(0.0).unwrap(), FRAC_PI_2);
        assert!(matches!(x_ratio_asymptotic(PI), Err(Error::PoleAt { .. })));
        assert!(x_ratio_asymptotic(1.5 * PI).unwrap() < 0.0);
        assert_relative_eq!(
            x_ratio_fixed_lambda(FRAC_PI_2, 9.0).unwrap(),
            18.0 / 10.0,
            epsilon = 1e-14
        );
    }

    #[test]
    fn uniform_theta_spread() {
        let s = sigma0_uniform_theta(DEFAULT_EXCISION).unwrap();
        assert!((s.sigma0 - 2.161_495).abs() < 5e-6, "{}", s.sigma0);
        let none = sigma0_uniform_theta(0.0).unwrap();
        assert!((none.sigma0 - s.sigma0).abs() < 1e-4);
        assert!(sigma0_uniform_theta(-1.0).is_err());
    }

    #[test]
    fn crest_q_is_a_crest() {
        let (l, w) = (0.25, 1.0);
        let q = barrier_crest_q(l, w, 12);
        assert_relative_eq!(((l + q / w).sqrt() * w / PI), 12.5, epsilon = 1e-12);
    }

    #[test]
    fn scaling_fit_needs_data() {
        assert!(matches!(
            square_barrier_scaling(0.25, &[10.0], 1.0, 1e-8),
            Err(Error::FitFailure(_))
        ));
        assert!(square_barrier_scaling(0.25, &[-1.0, 10.0], 1.0, 1e-8).is_err());
    }

    proptest! {
        #[test]
        fn closed_form_equals_composition(lambda in -3.0..40.0f64, q in -50.0..50.0f64) {
            let ps = principal_solution_delta(lambda, q).unwrap();
            let half = free_propagator(lambda, FRAC_PI_2);
            let m = half * kick(q) * half;
            prop_assert!(ps.monodromy().rel_diff(&m) < 1e-12);
            prop_assert!((ps.wronskian() - 1.0).abs() < 1e-11 * (1.0 + ps.monodromy().max_abs().powi(2)));
        }

        #[test]
        fn fixed_lambda_ratio_matches_principal(theta in 0.05..6.2f64, q in 1.0..1e4f64) {
            prop_assume!((1.0 + theta.cos()).abs() > 1e-3);
            let lambda = (theta / PI).powi(2);
            let x = principal_solution_delta(lambda, q).unwrap().x_ratio().unwrap();
            let y = x_ratio_fixed_lambda(theta, q).unwrap();
            prop_assert!((x - y).abs() <= 1e-9 * (1.0 + x.abs()));
        }

        #[test]
        fn fixed_lambda_tends_to_asymptote(theta in 0.05..6.2f64) {
            prop_assume!((1.0 + theta.cos()).abs() > 1e-2);
            let x = x_ratio_fixed_lambda(theta, 1e9).unwrap();
            let y = x_ratio_asymptotic(theta).unwrap();
            prop_assert!((x - y).abs() <= 1e-6 * (1.0 + y.abs()));
        }

        #[test]
        fn growth_rate_nonnegative(lambda in 0.0..20.0f64, q in -40.0..40.0f64) {
            prop_assert!(growth_rate_single(lambda, q) >= 0.0);
        }
    }
}
