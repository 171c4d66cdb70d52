//! Planar orbits in the inner region of a triaxial `rho ~ 1/m` density and
//! the Hill's-equation cycles they induce for the perpendicular coordinate.
//!
//! An orbit confined to the `x-z` plane drives small `y` excursions through
//! `y'' + omega_y^2(x(t), z(t)) y = 0`.  Each pericenter-to-pericenter
//! passage is read as one forcing cycle: `lambda_k` is the floor of
//! `omega_y^2` over the cycle and `q_k` measures the excess above it.

use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::delta_limit::principal_solution_delta;
use crate::error::{invalid, require_finite, Error, Result};
use crate::growth::gamma_infinity;
use crate::ode::{Control, Dopri5, OdeSystem, Segment};
use crate::transfer::{rescale_aperiodic, CycleParams};

pub const MIN_TOL: f64 = 1e-12;
pub const MAX_TOL: f64 = 1e-6;
const STEP_TOL_FACTOR: f64 = 1e-2;

/// Axis parameters of the density ellipsoids, `a > b > c > 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TriaxialShape {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TriaxialShape {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        for (n, v) in [("a", a), ("b", b), ("c", c)] {
            require_finite(n, v)?;
        }
        if !(a > b && b > c && c > 0.0) {
            return Err(invalid(format!("need a > b > c > 0, got ({a}, {b}, {c})")));
        }
        Ok(Self { a, b, c })
    }
}

fn ln_ratio_term(alpha2: f64, f_alpha: f64, xi: f64, xi2: f64, lam: f64, gam: f64) -> Result<f64> {
    let num = 2.0 * f_alpha * gam.sqrt() + 2.0 * gam - lam * alpha2;
    let den = alpha2 * (2.0 * f_alpha * xi + lam - 2.0 * alpha2 * xi2);
    let r = num / den;
    if !(r.abs() > 0.0) || !r.is_finite() {
        return Err(invalid(format!("force logarithm argument {r} is out of range")));
    }
    Ok(r.abs().ln())
}

/// Acceleration at `pos = (x, y, z)`.
///
/// Each component is odd in its own coordinate and vanishes on the
/// coordinate plane where its prefactor is zero.
pub fn force(shape: &TriaxialShape, pos: [f64; 3]) -> Result<[f64; 3]> {
    let [x, y, z] = pos;
    let (a2, b2, c2) = (shape.a.powi(2), shape.b.powi(2), shape.c.powi(2));
    let (x2, y2, z2) = (x * x, y * y, z * z);
    let xi2 = x2 + y2 + z2;
    if !(xi2 > 0.0) || !xi2.is_finite() {
        return Err(Error::OutsideDomain { x, z });
    }
    let xi = xi2.sqrt();
    let lam = (b2 + c2) * x2 + (a2 + c2) * y2 + (a2 + b2) * z2;
    let gam = b2 * c2 * x2 + a2 * c2 * y2 + a2 * b2 * z2;
    // F(alpha) in closed form on each axis, free of cancellation
    let f_a = x.abs() * ((a2 - b2) * (a2 - c2)).sqrt();
    let f_b = y.abs() * ((a2 - b2) * (b2 - c2)).sqrt();
    let f_c = z.abs() * ((a2 - c2) * (b2 - c2)).sqrt();

    let fx = if x == 0.0 {
        0.0
    } else {
        -2.0 * x / f_a * ln_ratio_term(a2, f_a, xi, xi2, lam, gam)?
    };
    let fz = if z == 0.0 {
        0.0
    } else {
        -2.0 * z / f_c * ln_ratio_term(c2, f_c, xi, xi2, lam, gam)?
    };
    let fy = if y == 0.0 {
        0.0
    } else {
        // arcsines written as atan2 with their exact complements, which stay
        // accurate where the arguments approach +-1 near the plane y = 0
        let s1 = (lam - 2.0 * b2 * xi2).atan2(2.0 * xi * f_b);
        let s2 = (2.0 * gam / b2 - lam).atan2(2.0 * gam.sqrt() * f_b / b2);
        -2.0 * y / f_b * (s1 - s2)
    };
    Ok([fx, fy, fz])
}

/// Squared frequency of small `y` oscillations about the `x-z` plane.
pub fn omega_y_squared(shape: &TriaxialShape, x: f64, z: f64) -> Result<f64> {
    let r = x.hypot(z);
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::OutsideDomain { x, z });
    }
    let d = (shape.c * x).hypot(shape.a * z) + shape.b * r;
    Ok(4.0 / shape.b / d)
}

/// Position and velocity in the `x-z` plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitState {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub vx: f64,
    pub vz: f64,
}

impl OrbitState {
    pub fn radius(&self) -> f64 {
        self.x.hypot(self.z)
    }

    /// Same point with the velocity reversed.
    pub fn reversed(&self) -> Self {
        Self {
            vx: -self.vx,
            vz: -self.vz,
            ..*self
        }
    }

    fn validate(&self) -> Result<()> {
        for (n, v) in [("t", self.t), ("x", self.x), ("z", self.z), ("vx", self.vx), ("vz", self.vz)] {
            require_finite(n, v)?;
        }
        if !(self.radius() > 0.0) {
            return Err(Error::OutsideDomain { x: self.x, z: self.z });
        }
        Ok(())
    }

    fn from_vec(t: f64, y: &[f64; 6]) -> Self {
        Self {
            t,
            x: y[0],
            z: y[1],
            vx: y[2],
            vz: y[3],
        }
    }
}

/// State `(x, z, vx, vz, int omega^2 dt, work)`.
struct PlanarSystem {
    shape: TriaxialShape,
}

impl OdeSystem<6> for PlanarSystem {
    fn rhs(&self, _t: f64, y: &[f64; 6], dy: &mut [f64; 6]) -> Result<()> {
        let f = force(&self.shape, [y[0], 0.0, y[1]])?;
        dy[0] = y[2];
        dy[1] = y[3];
        dy[2] = f[0];
        dy[3] = f[2];
        dy[4] = omega_y_squared(&self.shape, y[0], y[1])?;
        dy[5] = f[0] * y[2] + f[2] * y[3];
        Ok(())
    }
}

/// One stored point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySample {
    pub t: f64,
    pub x: f64,
    pub z: f64,
    pub vx: f64,
    pub vz: f64,
    pub omega_y2: f64,
}

/// A located pericenter or `omega_y^2` minimum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitEvent {
    pub state: OrbitState,
    /// `int_0^t omega_y^2 dt` at the event.
    pub omega_integral: f64,
    pub omega_y2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitOptions {
    pub tol: f64,
    /// Spacing of stored samples; `None` stores none.
    pub output_dt: Option<f64>,
    pub h_max: f64,
}

impl OrbitOptions {
    pub fn new(tol: f64) -> Self {
        Self {
            tol,
            output_dt: Some(0.01),
            h_max: 0.05,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub shape: TriaxialShape,
    pub initial: OrbitState,
    pub final_state: OrbitState,
    pub samples: Vec<TrajectorySample>,
    pub pericenters: Vec<OrbitEvent>,
    pub omega_minima: Vec<OrbitEvent>,
    /// Largest `|E(t) - E(0)|` relative to the largest kinetic energy, with
    /// the potential tracked through the work integral.
    pub energy_drift: f64,
    /// `int omega_y^2 dt` over the whole run.
    pub omega_integral: f64,
    pub steps: usize,
}

fn peri_fn(y: &[f64; 6]) -> f64 {
    y[0] * y[2] + y[1] * y[3]
}

fn dd_fn(shape: &TriaxialShape, y: &[f64; 6]) -> f64 {
    let (x, z, vx, vz) = (y[0], y[1], y[2], y[3]);
    let e = (shape.c * x).hypot(shape.a * z);
    let r = x.hypot(z);
    (shape.c * shape.c * x * vx + shape.a * shape.a * z * vz) / e + shape.b * (x * vx + z * vz) / r
}

/// Locate the root of `g` inside an accepted step by bisection on the
/// sub-step length.
fn locate<G: Fn(&[f64; 6]) -> f64>(
    ig: &Dopri5,
    sys: &PlanarSystem,
    seg: &Segment<6>,
    g: G,
) -> Result<(f64, [f64; 6])> {
    let mut lo = 0.0;
    let mut hi = seg.t1 - seg.t0;
    let mut y_hi = seg.y1;
    let g_lo_sign = g(&seg.y0).signum();
    for _ in 0..200 {
        if hi - lo <= 4.0 * f64::EPSILON * seg.t1.abs().max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let y = ig.step_to(sys, seg.t0, &seg.y0, &seg.k0, mid)?;
        if g(&y).signum() == g_lo_sign {
            lo = mid;
        } else {
            hi = mid;
            y_hi = y;
        }
    }
    Ok((seg.t0 + hi, y_hi))
}

/// Integrate with default options (samples every 0.01, steps at most 0.05).
pub fn integrate_orbit(
    shape: &TriaxialShape,
    initial: OrbitState,
    t_max: f64,
    tol: f64,
) -> Result<Trajectory> {
    integrate_orbit_with(shape, initial, t_max, &OrbitOptions::new(tol))
}

pub fn integrate_orbit_with(
    shape: &TriaxialShape,
    initial: OrbitState,
    t_max: f64,
    opts: &OrbitOptions,
) -> Result<Trajectory> {
    initial.validate()?;
    if !(MIN_TOL..=MAX_TOL).contains(&opts.tol) {
        return Err(invalid(format!(
            "orbit tolerance must lie in [{MIN_TOL:e}, {MAX_TOL:e}], got {}",
            opts.tol
        )));
    }
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(invalid(format!("t_max must be positive, got {t_max}")));
    }
    if let Some(dt) = opts.output_dt {
        if !(dt > 0.0) {
            return Err(invalid(format!("output spacing must be positive, got {dt}")));
        }
    }
    let sys = PlanarSystem { shape: *shape };
    let step_tol = opts.tol * STEP_TOL_FACTOR;
    let ig = Dopri5::new(step_tol, step_tol)?
        .with_controlled(4)
        .with_h_max(opts.h_max);
    let t0 = initial.t;
    let y0 = [initial.x, initial.z, initial.vx, initial.vz, 0.0, 0.0];
    let sample = |t: f64, y: &[f64; 6]| -> Result<TrajectorySample> {
        Ok(TrajectorySample {
            t,
            x: y[0],
            z: y[1],
            vx: y[2],
            vz: y[3],
            omega_y2: omega_y_squared(shape, y[0], y[1])?,
        })
    };
    let event = |t: f64, y: &[f64; 6]| -> Result<OrbitEvent> {
        Ok(OrbitEvent {
            state: OrbitState::from_vec(t, y),
            omega_integral: y[4],
            omega_y2: omega_y_squared(shape, y[0], y[1])?,
        })
    };

    let mut samples = Vec::new();
    let mut next_out = 0usize;
    if opts.output_dt.is_some() {
        samples.push(sample(t0, &y0)?);
        next_out = 1;
    }
    let mut pericenters = Vec::new();
    let mut omega_minima = Vec::new();
    let e0 = 0.5 * (initial.vx.powi(2) + initial.vz.powi(2));
    let mut max_ke = e0;
    let mut max_de: f64 = 0.0;

    let sol = ig.integrate_observed(&sys, t0, y0, t0 + t_max, None, |seg| {
        if let Some(dt) = opts.output_dt {
            loop {
                let t_out = t0 + next_out as f64 * dt;
                if t_out > seg.t1 || t_out > t0 + t_max {
                    break;
                }
                let y = if t_out == seg.t1 {
                    seg.y1
                } else {
                    ig.step_to(&sys, seg.t0, &seg.y0, &seg.k0, t_out - seg.t0)?
                };
                samples.push(sample(t_out, &y)?);
                next_out += 1;
            }
        }
        if peri_fn(&seg.y0) < 0.0 && peri_fn(&seg.y1) >= 0.0 {
            let (t, y) = locate(&ig, &sys, seg, peri_fn)?;
            pericenters.push(event(t, &y)?);
        }
        let d0 = dd_fn(shape, &seg.y0);
        let d1 = dd_fn(shape, &seg.y1);
        if d0 > 0.0 && d1 <= 0.0 {
            let (t, y) = locate(&ig, &sys, seg, |y| dd_fn(shape, y))?;
            omega_minima.push(event(t, &y)?);
        }
        let ke = 0.5 * (seg.y1[2].powi(2) + seg.y1[3].powi(2));
        max_ke = max_ke.max(ke);
        max_de = max_de.max((ke - seg.y1[5] - e0).abs());
        Ok(Control::Continue)
    })?;

    Ok(Trajectory {
        shape: *shape,
        initial,
        final_state: OrbitState::from_vec(sol.t, &sol.y),
        samples,
        pericenters,
        omega_minima,
        energy_drift: if max_ke > 0.0 { max_de / max_ke } else { 0.0 },
        omega_integral: sol.y[4],
        steps: sol.accepted,
    })
}

/// Integrate forward for `t_max`, reverse the velocity, integrate back and
/// return the largest deviation from the reversed initial state, relative
/// to the orbit's position and velocity scales.
pub fn reversibility_residual(
    shape: &TriaxialShape,
    initial: OrbitState,
    t_max: f64,
    tol: f64,
) -> Result<f64> {
    let mut opts = OrbitOptions::new(tol);
    opts.output_dt = None;
    let fwd = integrate_orbit_with(shape, initial, t_max, &opts)?;
    let mut back_start = fwd.final_state.reversed();
    back_start.t = 0.0;
    let back = integrate_orbit_with(shape, back_start, t_max, &opts)?;
    let end = back.final_state.reversed();
    let r_scale = initial.radius();
    let v_scale = initial.vx.hypot(initial.vz).max(fwd.final_state.vx.hypot(fwd.final_state.vz));
    let dp = (end.x - initial.x).hypot(end.z - initial.z) / r_scale;
    let dv = (end.vx - initial.vx).hypot(end.vz - initial.vz) / v_scale;
    Ok(dp.max(dv))
}

fn build_cycle(t0: f64, t1: f64, integral: f64, lambda: f64) -> Result<CycleParams> {
    let dur = t1 - t0;
    let mu = PI / dur;
    CycleParams::new(lambda, mu * (integral - lambda * dur), mu)
}

fn cycles_from_events(pericenters: &[OrbitEvent], minima: &[OrbitEvent]) -> Result<Vec<CycleParams>> {
    if pericenters.len() < 2 {
        return Err(Error::TooFewCycles {
            found: pericenters.len(),
        });
    }
    let mut out = Vec::with_capacity(pericenters.len() - 1);
    for w in pericenters.windows(2) {
        let (t0, t1) = (w[0].state.t, w[1].state.t);
        let lambda = minima
            .iter()
            .filter(|e| e.state.t > t0 && e.state.t < t1)
            .map(|e| e.omega_y2)
            .fold(w[0].omega_y2.min(w[1].omega_y2), f64::min);
        out.push(build_cycle(t0, t1, w[1].omega_integral - w[0].omega_integral, lambda)?);
    }
    Ok(out)
}

/// Cycles between consecutive pericenters, from the located events.
///
/// `mu_k = pi / D_k` for a cycle of duration `D_k`, `lambda_k` is the
/// smallest `omega_y^2` in the cycle and `q_k = mu_k int (omega_y^2 -
/// lambda_k) dt`, so that after rescaling to unit frequency the forcing
/// above the floor has unit-normalized shape.
pub fn extract_cycles(traj: &Trajectory) -> Result<Vec<CycleParams>> {
    cycles_from_events(&traj.pericenters, &traj.omega_minima)
}

/// Pericenter times of a trajectory, in order.
pub fn pericenter_times(traj: &Trajectory) -> Vec<f64> {
    traj.pericenters.iter().map(|e| e.state.t).collect()
}

/// Cycles recovered from stored samples alone, for trajectories read back
/// from CSV, together with the pericenter times that bound them.  Every
/// gap between consecutive samples is re-integrated at `tol`, so the result
/// depends on the sampling density only at the level of the tolerance.
pub fn extract_cycles_from_samples(
    shape: &TriaxialShape,
    samples: &[TrajectorySample],
    tol: f64,
) -> Result<(Vec<CycleParams>, Vec<f64>)> {
    if samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
        return Err(invalid("trajectory samples must be strictly increasing in time"));
    }
    let mut opts = OrbitOptions::new(tol);
    opts.output_dt = None;
    let mut peri = Vec::new();
    let mut minima = Vec::new();
    let mut offset = 0.0;
    for w in samples.windows(2) {
        let start = OrbitState {
            t: w[0].t,
            x: w[0].x,
            z: w[0].z,
            vx: w[0].vx,
            vz: w[0].vz,
        };
        let piece = integrate_orbit_with(shape, start, w[1].t - w[0].t, &opts)?;
        let shift = |mut e: OrbitEvent| {
            e.omega_integral += offset;
            e
        };
        peri.extend(piece.pericenters.iter().copied().map(shift));
        minima.extend(piece.omega_minima.iter().copied().map(shift));
        offset += piece.omega_integral;
    }
    let times = peri.iter().map(|e| e.state.t).collect();
    Ok((cycles_from_events(&peri, &minima)?, times))
}

/// Mean single-cycle rate of an orbit's cycles in the impulse limit, after
/// rescaling every cycle to unit frequency.
pub fn cycles_gamma_infinity(cycles: &[CycleParams]) -> Result<f64> {
    let disc: Vec<f64> = cycles
        .iter()
        .map(|c| {
            let r = rescale_aperiodic(*c);
            principal_solution_delta(r.lambda, r.q).map(|p| p.discriminant())
        })
        .collect::<Result<_>>()?;
    gamma_infinity(&disc)
}

#[derive(Serialize, Deserialize)]
struct CycleRow {
    k: usize,
    lambda: f64,
    q: f64,
    mu: f64,
}

pub fn trajectory_csv(samples: &[TrajectorySample]) -> String {
    let mut s = String::from("t,x,z,vx,vz,omega_y2\n");
    for p in samples {
        s.push_str(&format!("{},{},{},{},{},{}\n", p.t, p.x, p.z, p.vx, p.vz, p.omega_y2));
    }
    s
}

pub fn parse_trajectory_csv(text: &str) -> Result<Vec<TrajectorySample>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize()
        .map(|r| r.map_err(|e| invalid(format!("bad trajectory row: {e}"))))
        .collect()
}

pub fn cycles_csv(cycles: &[CycleParams]) -> String {
    let mut s = String::from("k,lambda,q,mu\n");
    for (k, c) in cycles.iter().enumerate() {
        s.push_str(&format!("{},{},{},{}\n", k, c.lambda, c.q, c.mu));
    }
    s
}

pub fn parse_cycles_csv(text: &str) -> Result<Vec<CycleParams>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    rdr.deserialize::<CycleRow>()
        .map(|r| {
            let r = r.map_err(|e| invalid(format!("bad cycle row: {e}")))?;
            CycleParams::new(r.lambda, r.q, r.mu)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn shape() -> TriaxialShape {
        TriaxialShape::new(1.5, 1.0, 0.6).unwrap()
    }

    fn start(vz: f64) -> OrbitState {
        OrbitState {
            t: 0.0,
            x: 1.0,
            z: 0.0,
            vx: 0.0,
            vz,
        }
    }

    #[test]
    fn shape_ordering() {
        assert!(TriaxialShape::new(1.0, 1.0, 0.5).is_err());
        assert!(TriaxialShape::new(2.0, 1.0, 0.0).is_err());
    }

    #[test]
    fn axis_values() {
        let s = shape();
        let f = force(&s, [1.0, 0.0, 0.0]).unwrap();
        assert!((f[0] + 1.5697).abs() < 1e-4, "{f:?}");
        assert_eq!(f[1], 0.0);
        assert_eq!(f[2], 0.0);
        let g = force(&s, [0.0, 0.0, 1.0]).unwrap();
        assert!((g[2] + 2.4719).abs() < 1e-4, "{g:?}");
        assert!(force(&s, [0.0, 0.0, 0.0]).is_err());
    }

    #[test]
    fn omega_plug_in() {
        let s = TriaxialShape::new(3.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(omega_y_squared(&s, 1.0, 0.0).unwrap(), 4.0 / 1.5);
        assert!(omega_y_squared(&s, 0.0, 0.0).is_err());
    }

    #[test]
    fn omega_is_vertical_stiffness() {
        // -dF_y/dy at y = 0 reproduces omega_y^2
        let s = shape();
        for &(x, z) in &[(1.0, 0.3), (-0.4, 0.9), (0.2, -0.1)] {
            let h = 1e-6;
            let fy = force(&s, [x, h, z]).unwrap()[1];
            let w2 = omega_y_squared(&s, x, z).unwrap();
            assert!((-fy / h - w2).abs() < 1e-5 * w2, "{x} {z}: {} vs {w2}", -fy / h);
        }
    }

    #[test]
    fn planar_motion_along_axis() {
        // released at rest on the x-axis the orbit never leaves it
        let t = integrate_orbit(&shape(), start(0.0), 10.0, 1e-9).unwrap();
        assert!(t.samples.iter().all(|p| p.z == 0.0 && p.vz == 0.0));
    }

    #[test]
    fn one_dimensional_orbit_has_constant_period() {
        let t = integrate_orbit(&shape(), start(0.0), 30.0, 1e-10).unwrap();
        let cycles = extract_cycles(&t).unwrap();
        assert!(cycles.len() >= 5);
        let mu0 = cycles[0].mu;
        for c in &cycles {
            assert!(((c.mu - mu0) / mu0).abs() < 1e-6, "{} vs {mu0}", c.mu);
        }
    }

    #[test]
    fn cycles_are_positive_and_resampling_invariant() {
        let s = shape();
        let mut o = OrbitOptions::new(1e-10);
        let a = integrate_orbit_with(&s, start(0.5), 40.0, &o).unwrap();
        o.output_dt = Some(0.005);
        let b = integrate_orbit_with(&s, start(0.5), 40.0, &o).unwrap();
        let ca = extract_cycles(&a).unwrap();
        let cb = extract_cycles(&b).unwrap();
        assert_eq!(ca, cb);
        assert!(ca.len() >= 4);
        for c in &ca {
            assert!(c.lambda > 0.0 && c.q > 0.0 && c.mu > 0.0, "{c:?}");
        }
        // re-extraction from stored samples moves boundaries by less than tol
        let (cs, ts) = extract_cycles_from_samples(&s, &a.samples, 1e-10).unwrap();
        let (_, ts2) = extract_cycles_from_samples(&s, &b.samples, 1e-10).unwrap();
        assert_eq!(cs.len(), ca.len());
        assert_eq!(ts.len(), ts2.len());
        let times = pericenter_times(&a);
        for ((x, y), z) in ts.iter().zip(&ts2).zip(&times) {
            assert!((x - y).abs() < 1e-10 && (x - z).abs() < 1e-10, "{x} {y} {z}");
        }
        for (x, y) in cs.iter().zip(&ca) {
            assert!(((x.q - y.q) / y.q).abs() < 1e-8, "{x:?} {y:?}");
        }
    }

    #[test]
    fn energy_is_conserved() {
        let t = integrate_orbit(&shape(), start(0.5), 40.0, 1e-10).unwrap();
        assert!(t.energy_drift < 1e-8, "{}", t.energy_drift);
    }

    #[test]
    fn reversible() {
        let tol = 1e-10;
        let r = reversibility_residual(&shape(), start(0.5), 25.0, tol).unwrap();
        assert!(r < 100.0 * tol, "{r}");
    }

    #[test]
    fn too_few_cycles() {
        let t = integrate_orbit(&shape(), start(0.5), 0.3, 1e-8).unwrap();
        assert!(matches!(extract_cycles(&t), Err(Error::TooFewCycles { .. })));
    }

    #[test]
    fn pipeline_gives_positive_rate() {
        // a wide orbit whose cycles are often parametrically unstable
        let t = integrate_orbit(&shape(), start(1.0), 60.0, 1e-9).unwrap();
        let cycles = extract_cycles(&t).unwrap();
        assert!(cycles_gamma_infinity(&cycles).unwrap() > 0.0);
    }

    #[test]
    fn csv_round_trip() {
        let t = integrate_orbit(&shape(), start(0.5), 20.0, 1e-9).unwrap();
        let back = parse_trajectory_csv(&trajectory_csv(&t.samples)).unwrap();
        assert_eq!(back, t.samples);
        let cycles = extract_cycles(&t).unwrap();
        assert_eq!(parse_cycles_csv(&cycles_csv(&cycles)).unwrap(), cycles);
        assert!(parse_cycles_csv("k,lambda,q,mu\n0,1,2,-1\n").is_err());
    }

    fn curl_components(s: &TriaxialShape, p: [f64; 3]) -> (f64, f64) {
        let h = 1e-5 * (p[0].abs() + p[1].abs() + p[2].abs());
        let d = |i: usize, j: usize| {
            let mut a = p;
            let mut b = p;
            a[j] += h;
            b[j] -= h;
            (force(s, a).unwrap()[i] - force(s, b).unwrap()[i]) / (2.0 * h)
        };
        let c = [d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1)];
        let g = [d(2, 1), d(1, 2), d(0, 2), d(2, 0), d(1, 0), d(0, 1)];
        let scale = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (c.iter().fold(0.0f64, |m, v| m.max(v.abs())), scale)
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]
        #[test]
        fn curl_free(x in 0.1..2.0f64, y in 0.1..2.0f64, z in 0.1..2.0f64,
                     sx in prop::bool::ANY, sy in prop::bool::ANY, sz in prop::bool::ANY) {
            let p = [if sx { x } else { -x }, if sy { y } else { -y }, if sz { z } else { -z }];
            let (curl, scale) = curl_components(&shape(), p);
            prop_assert!(curl < 1e-4 * scale, "curl {curl} scale {scale}");
        }

        #[test]
        fn parity_and_attraction(x in 0.05..3.0f64, y in 0.05..3.0f64, z in 0.05..3.0f64) {
            let s = shape();
            let f = force(&s, [x, y, z]).unwrap();
            prop_assert!(f[0] < 0.0 && f[1] < 0.0 && f[2] < 0.0);
            let fx = force(&s, [-x, y, z]).unwrap();
            prop_assert_eq!(fx, [-f[0], f[1], f[2]]);
            let fy = force(&s, [x, -y, z]).unwrap();
            prop_assert_eq!(fy, [f[0], -f[1], f[2]]);
            let fz = force(&s, [x, y, -z]).unwrap();
            prop_assert_eq!(fz, [f[0], f[1], -f[2]]);
        }

        #[test]
        fn omega_homogeneous(x in -3.0..3.0f64, z in -3.0..3.0f64, k in 0.1..10.0f64) {
            prop_assume!(x.hypot(z) > 1e-3);
            let s = shape();
            let a = omega_y_squared(&s, k * x, k * z).unwrap();
            let b = omega_y_squared(&s, x, z).unwrap() / k;
            prop_assert!((a - b).abs() <= 1e-12 * b);
        }
    }
}
