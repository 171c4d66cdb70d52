//! Adaptive Dormand–Prince 5(4) integrator for fixed-size systems.
//!
//! The driver reports every accepted step to an observer together with the
//! derivative at its left end.  Because the scheme is one-step, the observer
//! can re-integrate any sub-interval of an accepted step with a single call to
//! [`Dopri5::step_to`], which is how dense output and event location are done
//! without an interpolant.

use crate::error::{invalid, Error, Result};

/// Right-hand side of `y' = f(t, y)`.
pub trait OdeSystem<const N: usize> {
    fn rhs(&self, t: f64, y: &[f64; N], dydt: &mut [f64; N]) -> Result<()>;
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;

const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// One accepted step, handed to the observer.
#[derive(Debug, Clone, Copy)]
pub struct Segment<const N: usize> {
    pub t0: f64,
    pub y0: [f64; N],
    /// `f(t0, y0)`, needed to re-step inside the segment.
    pub k0: [f64; N],
    pub t1: f64,
    pub y1: [f64; N],
}

/// Observer verdict after an accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Control {
    Continue,
    Stop,
}

/// Final state and work counters.
#[derive(Debug, Clone, Copy)]
pub struct Solution<const N: usize> {
    pub t: f64,
    pub y: [f64; N],
    pub accepted: usize,
    pub rejected: usize,
    pub rhs_evals: usize,
}

struct Trial<const N: usize> {
    y: [f64; N],
    k_end: [f64; N],
    err: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step length.
    pub h_max: f64,
    pub max_steps: usize,
    /// Only the first `controlled` components enter the error norm; the rest
    /// are carried along (running integrals and similar bookkeeping).
    pub controlled: usize,
}

impl Dopri5 {
    pub fn new(rtol: f64, atol: f64) -> Result<Self> {
        if !(rtol > 0.0 && rtol.is_finite()) || !(atol > 0.0 && atol.is_finite()) {
            return Err(invalid(format!(
                "tolerances must be positive and finite (rtol {rtol}, atol {atol})"
            )));
        }
        Ok(Self {
            rtol,
            atol,
            h_max: f64::INFINITY,
            max_steps: 5_000_000,
            controlled: usize::MAX,
        })
    }

    pub fn with_h_max(mut self, h_max: f64) -> Self {
        self.h_max = h_max;
        self
    }

    pub fn with_controlled(mut self, n: usize) -> Self {
        self.controlled = n;
        self
    }

    pub fn with_max_steps(mut self, n: usize) -> Self {
        self.max_steps = n;
        self
    }

    fn trial<const N: usize, S: OdeSystem<N>>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64; N],
        k1: &[f64; N],
        h: f64,
    ) -> Result<Trial<N>> {
        let mut k2 = [0.0; N];
        let mut k3 = [0.0; N];
        let mut k4 = [0.0; N];
        let mut k5 = [0.0; N];
        let mut k6 = [0.0; N];
        let mut k7 = [0.0; N];
        let mut s = [0.0; N];

        for i in 0..N {
            s[i] = y[i] + h * A21 * k1[i];
        }
        sys.rhs(t + C2 * h, &s, &mut k2)?;
        for i in 0..N {
            s[i] = y[i] + h * (A31 * k1[i] + A32 * k2[i]);
        }
        sys.rhs(t + C3 * h, &s, &mut k3)?;
        for i in 0..N {
            s[i] = y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]);
        }
        sys.rhs(t + C4 * h, &s, &mut k4)?;
        for i in 0..N {
            s[i] = y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i]);
        }
        sys.rhs(t + C5 * h, &s, &mut k5)?;
        for i in 0..N {
            s[i] = y[i]
                + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i]);
        }
        sys.rhs(t + h, &s, &mut k6)?;
        let mut y_new = [0.0; N];
        for i in 0..N {
            y_new[i] = y[i]
                + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i]);
        }
        sys.rhs(t + h, &y_new, &mut k7)?;

        let m = self.controlled.min(N);
        let mut acc = 0.0;
        for i in 0..m {
            let e = h
                * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let sc = self.atol + self.rtol * y[i].abs().max(y_new[i].abs());
            acc += (e / sc) * (e / sc);
        }
        let err = if m == 0 { 0.0 } else { (acc / m as f64).sqrt() };
        Ok(Trial {
            y: y_new,
            k_end: k7,
            err,
        })
    }

    /// Single unchecked step of length `h` from `(t, y)` with `k = f(t, y)`.
    ///
    /// Meant for sub-steps of an already accepted step, whose local error is
    /// no larger than that of the accepted step.
    pub fn step_to<const N: usize, S: OdeSystem<N>>(
        &self,
        sys: &S,
        t: f64,
        y: &[f64; N],
        k: &[f64; N],
        h: f64,
    ) -> Result<[f64; N]> {
        if h == 0.0 {
            return Ok(*y);
        }
        Ok(self.trial(sys, t, y, k, h)?.y)
    }

    fn initial_step<const N: usize>(&self, y0: &[f64; N], f0: &[f64; N], span: f64) -> f64 {
        let m = self.controlled.min(N).max(1).min(N);
        let mut d0 = 0.0;
        let mut d1 = 0.0;
        for i in 0..m {
            let sc = self.atol + self.rtol * y0[i].abs();
            d0 += (y0[i] / sc).powi(2);
            d1 += (f0[i] / sc).powi(2);
        }
        let d0 = (d0 / m as f64).sqrt();
        let d1 = (d1 / m as f64).sqrt();
        let h = if d0 < 1e-5 || d1 < 1e-5 {
            1e-6
        } else {
            0.01 * d0 / d1
        };
        h.min(span).min(self.h_max)
    }

    /// Integrate from `t0` to `t1 > t0` without an observer.
    pub fn integrate<const N: usize, S: OdeSystem<N>>(
        &self,
        sys: &S,
        t0: f64,
        y0: [f64; N],
        t1: f64,
    ) -> Result<Solution<N>> {
        self.integrate_observed(sys, t0, y0, t1, None, |_| Ok(Control::Continue))
    }

    /// Integrate from `t0` to `t1 > t0`, calling `observer` after every
    /// accepted step.  The observer may end the run early.
    pub fn integrate_observed<const N: usize, S, F>(
        &self,
        sys: &S,
        t0: f64,
        y0: [f64; N],
        t1: f64,
        h0: Option<f64>,
        mut observer: F,
    ) -> Result<Solution<N>>
    where
        S: OdeSystem<N>,
        F: FnMut(&Segment<N>) -> Result<Control>,
    {
        if !(t1 > t0) || !t0.is_finite() || !t1.is_finite() {
            return Err(invalid(format!("integration interval [{t0}, {t1}] is empty")));
        }
        let mut t = t0;
        let mut y = y0;
        let mut k = [0.0; N];
        sys.rhs(t, &y, &mut k)?;
        let mut rhs_evals = 1;
        let span = t1 - t0;
        let mut h = match h0 {
            Some(h) if h > 0.0 => h.min(span).min(self.h_max),
            _ => self.initial_step(&y, &k, span),
        };
        let mut accepted = 0;
        let mut rejected = 0;
        let mut last_rejected = false;

        loop {
            if accepted + rejected >= self.max_steps {
                return Err(Error::StepFailure {
                    t,
                    reason: format!("step budget of {} exhausted", self.max_steps),
                });
            }
            let remaining = t1 - t;
            let last = h >= remaining * (1.0 - 1e-12);
            let h_try = if last { remaining } else { h };
            if !last && h_try <= 1e-14 * t.abs().max(1.0) {
                return Err(Error::StepFailure {
                    t,
                    reason: format!("step size underflow (h = {h_try:e})"),
                });
            }
            let trial = self.trial(sys, t, &y, &k, h_try)?;
            rhs_evals += 6;
            let finite = trial.y.iter().all(|v| v.is_finite()) && trial.err.is_finite();
            if finite && trial.err <= 1.0 {
                let t_new = if last { t1 } else { t + h_try };
                let seg = Segment {
                    t0: t,
                    y0: y,
                    k0: k,
                    t1: t_new,
                    y1: trial.y,
                };
                t = t_new;
                y = trial.y;
                k = trial.k_end;
                accepted += 1;
                let verdict = observer(&seg)?;
                if last || verdict == Control::Stop {
                    break;
                }
                let mut fac = if trial.err == 0.0 {
                    5.0
                } else {
                    0.9 * trial.err.powf(-0.2)
                };
                fac = fac.clamp(0.2, if last_rejected { 1.0 } else { 5.0 });
                h = (h_try * fac).min(self.h_max);
                last_rejected = false;
            } else {
                rejected += 1;
                last_rejected = true;
                let fac = if finite {
                    (0.9 * trial.err.powf(-0.2)).clamp(0.1, 0.9)
                } else {
                    0.25
                };
                h = h_try * fac;
            }
        }
        Ok(Solution {
            t,
            y,
            accepted,
            rejected,
            rhs_evals,
        })
    }
}
