//! Numerical principal solutions over one forcing cycle.

use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI};

use crate::delta_limit;
use crate::error::{invalid, require_finite, Result};
use crate::ode::{Dopri5, OdeSystem};
use crate::transfer::{rescale_aperiodic, CycleParams, PrincipalSolution};

pub const DEFAULT_TOL: f64 = 1e-10;
pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-4;
/// Narrowest square barrier accepted as a stand-in for the delta function.
pub const MIN_BARRIER_WIDTH: f64 = 1e-6;

// Ratio between the per-step tolerance handed to the integrator and the
// accuracy promised for the end-of-cycle values.
const STEP_TOL_FACTOR: f64 = 1e-2;

/// Cycle forcing profile `Q(t)` on `[0, pi]`, symmetric about `pi/2` and of
/// unit integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ForcingShape {
    /// No forcing: `y'' + lambda y = 0`.
    Zero,
    /// Unit impulse at mid-cycle.
    Delta,
    /// Height `1/width` on `|t - pi/2| < width/2`.
    SquareBarrier { width: f64 },
    /// `(1 + cos(2 pi (t - pi/2) / width)) / width` on `|t - pi/2| < width/2`.
    RaisedCosine { width: f64 },
}

impl ForcingShape {
    pub fn validate(&self) -> Result<()> {
        match *self {
            ForcingShape::Zero | ForcingShape::Delta => Ok(()),
            ForcingShape::SquareBarrier { width } => {
                require_finite("width", width)?;
                if !(MIN_BARRIER_WIDTH..=PI).contains(&width) {
                    return Err(invalid(format!(
                        "square barrier width must lie in [{MIN_BARRIER_WIDTH:e}, pi], got {width}"
                    )));
                }
                Ok(())
            }
            ForcingShape::RaisedCosine { width } => {
                require_finite("width", width)?;
                if !(width > 0.0 && width <= PI) {
                    return Err(invalid(format!(
                        "raised cosine width must lie in (0, pi], got {width}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// `Q(t)` for `t` in `[0, pi]`; zero for the delta shape away from its
    /// support.
    pub fn value(&self, t: f64) -> f64 {
        let u = t - FRAC_PI_2;
        match *self {
            ForcingShape::Zero | ForcingShape::Delta => 0.0,
            ForcingShape::SquareBarrier { width } => {
                if u.abs() < 0.5 * width {
                    1.0 / width
                } else {
                    0.0
                }
            }
            ForcingShape::RaisedCosine { width } => {
                if u.abs() < 0.5 * width {
                    (1.0 + (2.0 * PI * u / width).cos()) / width
                } else {
                    0.0
                }
            }
        }
    }

    /// Points in `(0, pi)` where `Q` is not smooth.
    fn breakpoints(&self) -> Vec<f64> {
        match *self {
            ForcingShape::Zero | ForcingShape::Delta => vec![],
            ForcingShape::SquareBarrier { width } | ForcingShape::RaisedCosine { width } => {
                let lo = FRAC_PI_2 - 0.5 * width;
                let hi = FRAC_PI_2 + 0.5 * width;
                [lo, hi].into_iter().filter(|&b| b > 0.0 && b < PI).collect()
            }
        }
    }
}

struct CycleSystem {
    lambda: f64,
    q: f64,
    mu: f64,
    shape: ForcingShape,
}

impl OdeSystem<4> for CycleSystem {
    fn rhs(&self, t: f64, y: &[f64; 4], dy: &mut [f64; 4]) -> Result<()> {
        let w2 = self.lambda + self.q * self.shape.value(self.mu * t);
        dy[0] = y[1];
        dy[1] = -w2 * y[0];
        dy[2] = y[3];
        dy[3] = -w2 * y[2];
        Ok(())
    }
}

fn check_tol(tol: f64) -> Result<()> {
    if !(MIN_TOL..=MAX_TOL).contains(&tol) {
        return Err(invalid(format!(
            "tolerance must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {tol}"
        )));
    }
    Ok(())
}

fn integrate_segments(sys: &CycleSystem, end: f64, tol: f64) -> Result<PrincipalSolution> {
    let step_tol = tol * STEP_TOL_FACTOR;
    let ig = Dopri5::new(step_tol, step_tol)?;
    let mut knots: Vec<f64> = vec![0.0];
    knots.extend(sys.shape.breakpoints().into_iter().map(|b| b / sys.mu));
    knots.push(end);
    let mut y = [1.0, 0.0, 0.0, 1.0];
    for w in knots.windows(2) {
        if w[1] > w[0] {
            y = ig.integrate(sys, w[0], y, w[1])?.y;
        }
    }
    Ok(PrincipalSolution {
        y1: y[0],
        dy1: y[1],
        y2: y[2],
        dy2: y[3],
    })
}

/// Principal solutions at the end of one cycle, after rescaling to unit
/// frequency.
pub fn solve_cycle(shape: ForcingShape, p: CycleParams, tol: f64) -> Result<PrincipalSolution> {
    check_tol(tol)?;
    shape.validate()?;
    let r = rescale_aperiodic(p);
    match shape {
        ForcingShape::Delta => return delta_limit::principal_solution_delta(r.lambda, r.q),
        ForcingShape::Zero => {
            let m = delta_limit::free_propagator(r.lambda, PI);
            return Ok(PrincipalSolution {
                y1: m.a,
                dy1: m.c,
                y2: m.b,
                dy2: m.d,
            });
        }
        _ => {}
    }
    let sys = CycleSystem {
        lambda: r.lambda,
        q: r.q,
        mu: 1.0,
        shape,
    };
    integrate_segments(&sys, PI, tol)
}

/// Principal solutions over the physical cycle `[0, pi/mu]` with forcing
/// `Q(mu t)`, without rescaling time.
pub fn solve_cycle_unscaled(
    shape: ForcingShape,
    p: CycleParams,
    tol: f64,
) -> Result<PrincipalSolution> {
    check_tol(tol)?;
    shape.validate()?;
    let end = PI / p.mu;
    if shape == ForcingShape::Delta {
        // free flight, kick of strength q/mu, free flight
        let half = delta_limit::free_propagator(p.lambda, 0.5 * end);
        let m = half * delta_limit::kick(p.q / p.mu) * half;
        return Ok(PrincipalSolution {
            y1: m.a,
            dy1: m.c,
            y2: m.b,
            dy2: m.d,
        });
    }
    let sys = CycleSystem {
        lambda: p.lambda,
        q: p.q,
        mu: p.mu,
        shape,
    };
    integrate_segments(&sys, end, tol)
}

/// `y1(pi) + y2'(pi)`.
pub fn discriminant(ps: &PrincipalSolution) -> f64 {
    ps.discriminant()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transfer::TransferMatrix;
    use proptest::prelude::*;

    fn p(lambda: f64, q: f64) -> CycleParams {
        CycleParams::periodic(lambda, q).unwrap()
    }

    // Square barrier by exact composition of constant-coefficient flows.
    fn barrier_oracle(lambda: f64, q: f64, w: f64) -> TransferMatrix {
        let out = delta_limit::free_propagator(lambda, 0.5 * (PI - w));
        let inside = delta_limit::free_propagator(lambda + q / w, w);
        out * inside * out
    }

    #[test]
    fn zero_forcing_is_harmonic() {
        let lambda: f64 = 2.3;
        let ps = solve_cycle(ForcingShape::Zero, p(lambda, 5.0), 1e-10).unwrap();
        let k = lambda.sqrt();
        assert!((ps.y1 - (k * PI).cos()).abs() < 1e-10);
        assert!((ps.dy1 + k * (k * PI).sin()).abs() < 1e-10);
        assert!((ps.y2 - (k * PI).sin() / k).abs() < 1e-10);
        assert!((discriminant(&ps) - 2.0 * (k * PI).cos()).abs() < 1e-10);
        // the integrated path agrees with the closed form
        let num = solve_cycle_unscaled(ForcingShape::Zero, p(lambda, 5.0), 1e-10).unwrap();
        assert!((num.y1 - ps.y1).abs() < 1e-9 && (num.dy2 - ps.dy2).abs() < 1e-9);
        assert_eq!(discriminant(&solve_cycle(ForcingShape::Zero, p(1.0, 0.0), 1e-10).unwrap()), -2.0);
    }

    #[test]
    fn narrow_barrier_reaches_impulse_limit() {
        let ps = solve_cycle(ForcingShape::SquareBarrier { width: 1e-3 }, p(0.25, 2.0), 1e-10).unwrap();
        assert!((ps.h() + 2.0).abs() < 1e-2, "{}", ps.h());
        let m = barrier_oracle(0.25, 2.0, 1e-3);
        assert!((ps.y1 - m.a).abs() < 1e-8);
    }

    #[test]
    fn square_barrier_matches_composition() {
        for &(lambda, q, w) in &[(0.25, 10.0, 1.0), (3.1, -2.0, 0.4), (0.8, 40.0, 0.05)] {
            let ps = solve_cycle(ForcingShape::SquareBarrier { width: w }, p(lambda, q), 1e-10)
                .unwrap();
            let m = barrier_oracle(lambda, q, w);
            assert!(ps.monodromy().rel_diff(&m) < 1e-9, "{lambda} {q} {w}");
        }
    }

    #[test]
    fn symmetric_forcing_gives_equal_diagonal() {
        let ps = solve_cycle(ForcingShape::RaisedCosine { width: 1.2 }, p(1.7, 6.0), 1e-10)
            .unwrap();
        assert!((ps.y1 - ps.dy2).abs() < 1e-9);
        assert!((ps.wronskian() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn raised_cosine_has_unit_mass() {
        let s = ForcingShape::RaisedCosine { width: 0.7 };
        let r = crate::quadrature::integrate(|t| s.value(t), 0.0, PI, 1e-13, 0.0).unwrap();
        assert!((r.value - 1.0).abs() < 1e-11);
    }

    #[test]
    fn delta_shape_uses_closed_form() {
        let ps = solve_cycle(ForcingShape::Delta, p(0.25, 100.0), 1e-10).unwrap();
        assert!((ps.h() + 100.0).abs() < 1e-10);
        assert!((ps.g() + 50.5).abs() < 1e-10);
    }

    #[test]
    fn unscaled_cycle_obeys_chain_rule() {
        let shape = ForcingShape::SquareBarrier { width: 0.6 };
        let params = CycleParams::new(5.0, 12.0, 1.7).unwrap();
        let a = solve_cycle(shape, params, 1e-11).unwrap();
        let b = solve_cycle_unscaled(shape, params, 1e-11).unwrap();
        assert!((a.h() - b.h()).abs() < 1e-9);
        assert!((params.mu * a.g() - b.g()).abs() < 1e-9 * b.g().abs().max(1.0));
        assert!((a.y2 / params.mu - b.y2).abs() < 1e-9);
        let ad = solve_cycle(ForcingShape::Delta, params, 1e-11).unwrap();
        let bd = solve_cycle_unscaled(ForcingShape::Delta, params, 1e-11).unwrap();
        assert!((ad.h() - bd.h()).abs() < 1e-12);
        assert!((params.mu * ad.g() - bd.g()).abs() < 1e-12 * bd.g().abs().max(1.0));
    }

    #[test]
    fn validation() {
        assert!(solve_cycle(ForcingShape::Zero, p(1.0, 1.0), 1e-3).is_err());
        assert!(solve_cycle(ForcingShape::Zero, p(1.0, 1.0), 1e-13).is_err());
        assert!(solve_cycle(ForcingShape::SquareBarrier { width: 1e-7 }, p(1.0, 1.0), 1e-8).is_err());
        assert!(solve_cycle(ForcingShape::SquareBarrier { width: 4.0 }, p(1.0, 1.0), 1e-8).is_err());
        assert!(solve_cycle(ForcingShape::RaisedCosine { width: 0.0 }, p(1.0, 1.0), 1e-8).is_err());
    }

    #[test]
    fn shape_serde_round_trip() {
        let s = ForcingShape::SquareBarrier { width: 0.5 };
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(j, r#"{"kind":"square_barrier","width":0.5}"#);
        assert_eq!(serde_json::from_str::<ForcingShape>(&j).unwrap(), s);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn wronskian_is_one(lambda in 0.0..10.0f64, q in -3.0..20.0f64, w in 0.2..3.0f64) {
            let tol = 1e-10;
            let ps = solve_cycle(ForcingShape::SquareBarrier { width: w }, p(lambda, q), tol).unwrap();
            prop_assert!((ps.wronskian() - 1.0).abs() <= 10.0 * tol);
            let pc = solve_cycle(ForcingShape::RaisedCosine { width: w }, p(lambda, q), tol).unwrap();
            prop_assert!((pc.wronskian() - 1.0).abs() <= 10.0 * tol);
        }
    }
}
