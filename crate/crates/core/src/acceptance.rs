//! Acceptance suite: every quantitative claim the library is held to, each
//! reduced to a pass/fail outcome with the measured numbers attached.
//!
//! Sample sizes and tolerances are fixed here and nowhere else.  Failures
//! are reported, never softened: a criterion that cannot be met shows up red.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::cycle_solver::{solve_cycle, ForcingShape};
use crate::delta_limit::{principal_solution_delta, sigma0_uniform_theta, zone_width, zone_width_bisect, DEFAULT_EXCISION};
use crate::error::Result;
use crate::growth::{
    appendix_b_matrix, bound_thm3, normal_closed_form_small, normal_interpolation, reduced_expansion,
    reduced_matrix,
};
use crate::montecarlo::{
    appendix_b_comparison, full_vs_reduced, run_experiment_with_threads, run_product_experiment, sign_gap,
    theorem5_convergence, Experiment, ExperimentConfig, ProductSummary,
};
use crate::orbits::{
    extract_cycles, extract_cycles_from_samples, force, integrate_orbit, integrate_orbit_with,
    reversibility_residual, OrbitOptions, OrbitState, TriaxialShape,
};
use crate::sampling::{stream_rng, DistributionSpec, Family, Purpose};
use crate::stats::{linear_fit, log_space, power_law_fit};
use crate::transfer::{CycleParams, RenormalizedProduct, TransferMatrix};

/// Result of one acceptance criterion (or one part of a split criterion).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionOutcome {
    pub id: String,
    pub suite: String,
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl CriterionOutcome {
    fn new(id: &str, name: &str, passed: bool, detail: String) -> Self {
        Self {
            id: id.into(),
            suite: suite_of(id.trim_end_matches(char::is_alphabetic)).into(),
            name: name.into(),
            passed,
            detail,
        }
    }

    /// One line: `PASS|FAIL  <id> <suite> <name>: <detail>`.
    pub fn line(&self) -> String {
        format!(
            "{}  {:<3} {:<12} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.suite,
            self.name,
            self.detail
        )
    }
}

/// Suite names in criterion order.
pub const SUITES: [&str; 14] = [
    "thm2", "thm3", "quadratic", "normal", "fig3", "fig2", "phase", "zones", "thm5", "appb", "oracle", "solver",
    "orbits", "determinism",
];

fn suite_of(id: &str) -> &'static str {
    id.parse::<usize>()
        .ok()
        .and_then(|i| SUITES.get(i.wrapping_sub(1)))
        .copied()
        .unwrap_or("unknown")
}

fn errored(id: &str, name: &str, e: crate::Error) -> Vec<CriterionOutcome> {
    vec![CriterionOutcome::new(id, name, false, format!("error: {e}"))]
}

macro_rules! guard {
    ($id:expr, $name:expr, $body:expr) => {
        match (|| -> Result<Vec<CriterionOutcome>> { $body })() {
            Ok(v) => v,
            Err(e) => errored($id, $name, e),
        }
    };
}

// ---------------------------------------------------------------- 1 and 2

const FIG1_A: [f64; 6] = [0.25, 0.5, 1.0, 1.5, 2.0, 2.3];
const FIG1_CYCLES: usize = 10_000;
const FIG1_REALIZATIONS: usize = 1_000;
const FIG1_SEED: u64 = 101;

fn fig1_sweep() -> std::result::Result<&'static [(f64, ProductSummary)], String> {
    static CELL: OnceLock<std::result::Result<Vec<(f64, ProductSummary)>, String>> = OnceLock::new();
    CELL.get_or_init(|| {
        FIG1_A
            .iter()
            .map(|&a| {
                let spec = DistributionSpec::positive(Family::Fig1Power { a })?;
                Ok((a, run_product_experiment(&spec, FIG1_CYCLES, FIG1_REALIZATIONS, FIG1_SEED)?))
            })
            .collect::<Result<Vec<_>>>()
            .map_err(|e| e.to_string())
    })
    .as_ref()
    .map(|v| v.as_slice())
    .map_err(|e| e.clone())
}

pub fn criterion_1() -> Vec<CriterionOutcome> {
    let name = "product rate matches the pair formula";
    let sweep = match fig1_sweep() {
        Ok(s) => s,
        Err(e) => return vec![CriterionOutcome::new("1", name, false, format!("error: {e}"))],
    };
    let mut ok = true;
    let mut cols = Vec::new();
    for (a, s) in sweep {
        let Some(t) = s.thm4 else {
            ok = false;
            cols.push(format!("a={a}: pair estimator diverged"));
            continue;
        };
        let diff = (s.product.mean - t.mean).abs();
        let allowed = 0.01f64.max(3.0 * s.product.stderr.hypot(t.stderr));
        ok &= diff < allowed;
        cols.push(format!(
            "a={a} s0^2={:.3} |dg_mc-dg_thm2|={diff:.2e} (<{allowed:.2e})",
            s.sigma0_sq.mean
        ));
    }
    let span = (
        sweep.first().map(|s| s.1.sigma0_sq.mean).unwrap_or(f64::NAN),
        sweep.last().map(|s| s.1.sigma0_sq.mean).unwrap_or(f64::NAN),
    );
    let spans = span.0 <= 0.15 && span.1 >= 9.0;
    vec![CriterionOutcome::new(
        "1",
        name,
        ok && spans,
        format!("span s0^2 [{:.3}, {:.3}]; {}", span.0, span.1, cols.join("; ")),
    )]
}

pub fn criterion_2() -> Vec<CriterionOutcome> {
    let name = "pair-formula upper bound";
    let sweep = match fig1_sweep() {
        Ok(s) => s,
        Err(e) => return vec![CriterionOutcome::new("2", name, false, format!("error: {e}"))],
    };
    let mut ok = true;
    let mut cols = Vec::new();
    for (a, s) in sweep {
        let s2 = s.sigma0_sq.mean;
        let bound = bound_thm3(s2.sqrt());
        let m = s.product.mean;
        ok &= m <= bound + 3.0 * s.product.stderr;
        if s2 >= 4.0 {
            ok &= m <= 0.75 * bound;
        }
        cols.push(format!("a={a} dg={m:.4} bound={bound:.4} ratio={:.3}", m / bound));
    }
    vec![CriterionOutcome::new("2", name, ok, cols.join("; "))]
}

// ---------------------------------------------------------------- 3 and 4

fn normal_product(sigma0: f64, p: f64, n: usize, r: usize, seed: u64) -> Result<ProductSummary> {
    run_product_experiment(&DistributionSpec::new(Family::NormalXi { sigma0 }, p)?, n, r, seed)
}

pub fn criterion_3() -> Vec<CriterionOutcome> {
    let name = "small-spread quadratic law";
    guard!("3", name, {
        let mut ok = true;
        let mut cols = Vec::new();
        for s in [0.05, 0.1, 0.2] {
            let m = normal_product(s, 1.0, 10_000, 400, 303)?;
            let ratio = m.product.mean / (s * s / (8.0 * PI));
            ok &= (0.9..=1.1).contains(&ratio);
            cols.push(format!("s0={s} ratio={ratio:.4}+-{:.4}", m.product.stderr / (s * s / (8.0 * PI))));
        }
        Ok(vec![CriterionOutcome::new("3", name, ok, cols.join("; "))])
    })
}

pub fn criterion_4() -> Vec<CriterionOutcome> {
    let mut out = Vec::new();
    out.extend(guard!("4a", "mixed-sign small-spread closed form", {
        let m = normal_product(0.1, 0.5, 10_000, 400, 404)?;
        let cf = normal_closed_form_small(0.1, 0.5);
        let rel = (m.product.mean - cf) / cf;
        Ok(vec![CriterionOutcome::new(
            "4a",
            "mixed-sign small-spread closed form",
            rel.abs() < 0.05,
            format!("s0=0.1 p=0.5 dg={:.5}+-{:.1e} closed={cf:.5} rel={rel:+.4}", m.product.mean, m.product.stderr),
        )])
    }));
    out.extend(guard!("4b", "large-spread linear law", {
        let s = 30.0;
        let target = s / (2f64.sqrt() * PI.powf(1.5));
        let mut ok = true;
        let mut cols = Vec::new();
        for p in [1.0, 0.5] {
            let m = normal_product(s, p, 10_000, 200, 405)?;
            let rel = (m.product.mean - target) / target;
            ok &= rel.abs() < 0.05;
            // diagnostic only: the same expansion carries a constant -ln 2 / pi
            let with_offset = target - std::f64::consts::LN_2 / PI;
            cols.push(format!(
                "p={p} dg={:.4}+-{:.1e} rel={rel:+.4} (vs slope+offset {with_offset:.4}: {:+.4})",
                m.product.mean,
                m.product.stderr,
                (m.product.mean - with_offset) / with_offset
            ));
        }
        Ok(vec![CriterionOutcome::new(
            "4b",
            "large-spread linear law",
            ok,
            format!("s0=30 target={target:.4}; {}", cols.join("; ")),
        )])
    }));
    out.extend(guard!("4c", "interpolation formula", {
        let mut worst: f64 = 0.0;
        let mut cols = Vec::new();
        for s in log_space(0.1, 30.0, 9) {
            let m = normal_product(s, 1.0, 10_000, 200, 406)?;
            let f = normal_interpolation(s);
            let rel = (f - m.product.mean) / m.product.mean;
            worst = worst.max(rel.abs());
            cols.push(format!("{s:.3}:{rel:+.3}"));
        }
        Ok(vec![CriterionOutcome::new(
            "4c",
            "interpolation formula",
            worst <= 0.25,
            format!("max |rel dev|={worst:.4}; {}", cols.join(" ")),
        )])
    }));
    out
}

// ---------------------------------------------------------------- 5 and 6

pub fn criterion_5() -> Vec<CriterionOutcome> {
    let name = "large-spread slopes and sign gap";
    guard!("5", name, {
        let sigmas = [10.0, 18.0, 32.0, 56.0, 100.0];
        let mut pts = Vec::new();
        for &s in &sigmas {
            pts.push(sign_gap(s, 0.5, 10_000, 200, 505)?);
        }
        let pos: Vec<f64> = pts.iter().map(|g| g.positive.mean).collect();
        let diff: Vec<f64> = pts.iter().map(|g| g.difference.mean).collect();
        let f1 = power_law_fit(&sigmas, &pos)?;
        let f2 = power_law_fit(&sigmas, &diff)?;
        let last = pts.last().expect("five points");
        let rel = last.difference.mean / last.positive.mean;
        let ok = (f1.slope - 1.0).abs() <= 0.1 && (f2.slope + 1.0).abs() <= 0.15 && rel.abs() < 0.05;
        Ok(vec![CriterionOutcome::new(
            "5",
            name,
            ok,
            format!(
                "slope={:.4} gap slope={:.4} rel gap at 100={rel:.2e} (gaps: {})",
                f1.slope,
                f2.slope,
                pts.iter()
                    .map(|g| format!("{:.2e}+-{:.0e}", g.difference.mean, g.difference.stderr))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        )])
    })
}

pub fn criterion_6() -> Vec<CriterionOutcome> {
    let name = "sign-mixing ordering";
    guard!("6", name, {
        let ms: Vec<ProductSummary> = [1.0, 0.75, 0.5]
            .iter()
            .map(|&p| normal_product(1.0, p, 10_000, 200, 606))
            .collect::<Result<_>>()?;
        let g1 = ms[0].product.minus(&ms[1].product);
        let g2 = ms[1].product.minus(&ms[2].product);
        let ok = g1.mean > 3.0 * g1.stderr && g2.mean > 3.0 * g2.stderr;
        Ok(vec![CriterionOutcome::new(
            "6",
            name,
            ok,
            format!(
                "dg(1)={:.5} dg(.75)={:.5} dg(.5)={:.5}; gaps {:.4}/{:.1e}, {:.4}/{:.1e}",
                ms[0].product.mean, ms[1].product.mean, ms[2].product.mean, g1.mean, g1.stderr, g2.mean, g2.stderr
            ),
        )])
    })
}

// ---------------------------------------------------------------- 7 and 8

pub fn criterion_7() -> Vec<CriterionOutcome> {
    let name = "uniform-phase spread and bound";
    guard!("7", name, {
        let u = sigma0_uniform_theta(DEFAULT_EXCISION)?;
        let bound = bound_thm3(u.sigma0);
        let ok = (u.sigma0 - 2.159).abs() <= 0.005 && (bound - 0.371).abs() <= 0.002;
        Ok(vec![CriterionOutcome::new(
            "7",
            name,
            ok,
            format!("s0={:.5} (2.159+-0.005) bound={bound:.5} (0.371+-0.002)", u.sigma0),
        )])
    })
}

pub fn criterion_8() -> Vec<CriterionOutcome> {
    let name = "stable band widths";
    guard!("8", name, {
        let q = 1e3;
        let mut ok = true;
        let mut cols = Vec::new();
        for n in 1..=3 {
            let w = zone_width_bisect(n, q, 1e-12)?;
            let a = zone_width(n, q)?;
            let rel = (w - a) / a;
            ok &= rel.abs() < 0.02;
            cols.push(format!("n={n} width={w:.6} asym={a:.6} rel={rel:+.2e}"));
        }
        Ok(vec![CriterionOutcome::new("8", name, ok, cols.join("; "))])
    })
}

// ---------------------------------------------------------------- 9

pub fn criterion_9() -> Vec<CriterionOutcome> {
    let mut out = guard!("9a", "correction decays as inverse square", {
        let t = theorem5_convergence(0.25, 50.0, 150.0, &[1.0, 2.0, 4.0, 8.0], 10_000, 200, 909)?;
        Ok(vec![CriterionOutcome::new(
            "9a",
            "correction decays as inverse square",
            (t.exponent + 2.0).abs() <= 0.3,
            format!(
                "exponent={:.4}+-{:.2e}; corrections {}",
                t.exponent,
                t.exponent_stderr,
                t.points
                    .iter()
                    .map(|p| format!("{:.3e}", p.correction.mean))
                    .collect::<Vec<_>>()
                    .join(" ")
            ),
        )])
    });
    out.extend(guard!("9b", "reduced-matrix error bracket", {
        let spec = DistributionSpec::positive(Family::NormalXi { sigma0: 1.0 })?;
        let p = full_vs_reduced(&spec, 8.0, 12.0, 1.0, 10_000, 200, 910)?;
        let ok = p.gap.mean >= -3.0 * p.gap.stderr && p.gap.mean <= p.upper && p.k_eps > 0.0 && p.k_eps < 0.5;
        Ok(vec![CriterionOutcome::new(
            "9b",
            "reduced-matrix error bracket",
            ok,
            format!(
                "h~U[8,12] gap={:.3e}+-{:.1e} upper={:.3e} K={:.4}",
                p.gap.mean, p.gap.stderr, p.upper, p.k_eps
            ),
        )])
    }));
    out
}

// ---------------------------------------------------------------- 10 and 11

pub fn criterion_10() -> Vec<CriterionOutcome> {
    let name = "anti-diagonal product closed form";
    guard!("10", name, {
        let spec = DistributionSpec::positive(Family::Lognormal {
            sigma_x: 0.5,
            mean_log: 3.0,
        })?;
        let pts = appendix_b_comparison(&spec, 10_000, 20, 1010)?;
        let worst = pts
            .iter()
            .map(|p| ((p.product - p.closed_form) / p.closed_form).abs())
            .fold(0.0, f64::max);
        // even products are diagonal and odd ones anti-diagonal, exactly
        let mut rng = stream_rng(1010, 0, Purpose::Auxiliary);
        let mut structural = true;
        for _ in 0..50 {
            let mut m = TransferMatrix::IDENTITY;
            for n in 1..=8 {
                m = appendix_b_matrix(1.5 + 3.0 * rng.random::<f64>()) * m;
                structural &= if n % 2 == 0 {
                    m.b == 0.0 && m.c == 0.0
                } else {
                    m.a == 0.0 && m.d == 0.0
                };
            }
        }
        Ok(vec![CriterionOutcome::new(
            "10",
            name,
            worst < 0.01 && structural,
            format!("max rel diff={worst:.2e} over {} runs; alternation exact={structural}", pts.len()),
        )])
    })
}

pub fn criterion_11() -> Vec<CriterionOutcome> {
    let name = "product against monomial expansion";
    guard!("11", name, {
        let mut worst: f64 = 0.0;
        for r in 0..100 {
            let xs = DistributionSpec::positive(Family::NormalXi { sigma0: 1.5 })?
                .source(stream_rng(1111, r, Purpose::Product))?
                .take(10);
            let mut p = RenormalizedProduct::new();
            for &x in &xs {
                p.multiply(&reduced_matrix(x))?;
            }
            let eig = (p.log_spectral_radius()?).exp();
            let (t, b) = reduced_expansion(&xs)?;
            worst = worst.max(((t + b) - eig).abs() / eig);
        }
        Ok(vec![CriterionOutcome::new(
            "11",
            name,
            worst < 1e-10,
            format!("N=10, 100 draws, max rel diff={worst:.2e}"),
        )])
    })
}

// ---------------------------------------------------------------- 12

pub fn criterion_12() -> Vec<CriterionOutcome> {
    let name = "barrier convergence and Wronskian";
    guard!("12", name, {
        let (lambda, q, tol) = (0.25, 2.0, 1e-11);
        let exact = principal_solution_delta(lambda, q)?.h();
        let widths = [0.2, 0.1, 0.05, 0.025, 0.0125];
        let mut errs = Vec::new();
        for &w in &widths {
            let h = solve_cycle(ForcingShape::SquareBarrier { width: w }, CycleParams::periodic(lambda, q)?, tol)?.h();
            errs.push((h - exact).abs());
        }
        let lw: Vec<f64> = widths.iter().map(|w| w.ln()).collect();
        let le: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
        let order = linear_fit(&lw, &le)?.slope;

        let tol_w = 1e-9;
        let mut rng = stream_rng(1212, 0, Purpose::Auxiliary);
        let mut worst: f64 = 0.0;
        for i in 0..1000 {
            let l = 10.0 * rng.random::<f64>();
            let qq = -3.0 + 23.0 * rng.random::<f64>();
            let w = 0.2 + 2.8 * rng.random::<f64>();
            let shape = if i % 2 == 0 {
                ForcingShape::SquareBarrier { width: w }
            } else {
                ForcingShape::RaisedCosine { width: w }
            };
            let ps = solve_cycle(shape, CycleParams::periodic(l, qq)?, tol_w)?;
            worst = worst.max((ps.wronskian() - 1.0).abs());
        }
        Ok(vec![CriterionOutcome::new(
            "12",
            name,
            order >= 1.0 && worst <= 10.0 * tol_w,
            format!(
                "order in w={order:.3} (err/w: {}); max |W-1|={worst:.2e} (<= {:.0e}) over 1000 cycles",
                errs.iter().zip(&widths).map(|(e, w)| format!("{:.4}", e / w)).collect::<Vec<_>>().join(" "),
                10.0 * tol_w
            ),
        )])
    })
}

// ---------------------------------------------------------------- 13

pub fn criterion_13() -> Vec<CriterionOutcome> {
    let name = "orbit force and cycle extraction";
    guard!("13", name, {
        let shape = TriaxialShape::new(1.5, 1.0, 0.6)?;
        let mut rng = stream_rng(1313, 0, Purpose::Auxiliary);
        let mut curl_worst: f64 = 0.0;
        let mut parity = true;
        for _ in 0..100 {
            let p: [f64; 3] = std::array::from_fn(|_| (0.1 + 1.9 * rng.random::<f64>()) * if rng.random::<bool>() { 1.0 } else { -1.0 });
            let h = 1e-5 * (p[0].abs() + p[1].abs() + p[2].abs());
            let d = |i: usize, j: usize| -> Result<f64> {
                let mut a = p;
                let mut b = p;
                a[j] += h;
                b[j] -= h;
                Ok((force(&shape, a)?[i] - force(&shape, b)?[i]) / (2.0 * h))
            };
            let pairs = [(2, 1, 1, 2), (0, 2, 2, 0), (1, 0, 0, 1)];
            let mut scale: f64 = 0.0;
            let mut curl: f64 = 0.0;
            for (i, j, k, l) in pairs {
                let (u, v) = (d(i, j)?, d(k, l)?);
                scale = scale.max(u.abs()).max(v.abs());
                curl = curl.max((u - v).abs());
            }
            curl_worst = curl_worst.max(curl / scale);
            let f = force(&shape, p)?;
            for axis in 0..3 {
                let mut m = p;
                m[axis] = -m[axis];
                let g = force(&shape, m)?;
                for c in 0..3 {
                    let expect = if c == axis { -f[c] } else { f[c] };
                    parity &= g[c] == expect;
                }
            }
        }
        let tol = 1e-10;
        let start = OrbitState {
            t: 0.0,
            x: 1.0,
            z: 0.0,
            vx: 0.0,
            vz: 0.5,
        };
        let probe = integrate_orbit(&shape, start, 30.0, tol)?;
        // run long enough for ten full cycles
        let t_ten = probe.pericenters.get(10).map(|e| e.state.t).unwrap_or(30.0);
        let rev = reversibility_residual(&shape, start, t_ten, tol)?;
        let mut opts = OrbitOptions::new(tol);
        let a = integrate_orbit_with(&shape, start, 40.0, &opts)?;
        opts.output_dt = opts.output_dt.map(|d| d / 2.0);
        let b = integrate_orbit_with(&shape, start, 40.0, &opts)?;
        let ca = extract_cycles(&a)?;
        let cb = extract_cycles(&b)?;
        let (_, ta) = extract_cycles_from_samples(&shape, &a.samples, tol)?;
        let (_, tb) = extract_cycles_from_samples(&shape, &b.samples, tol)?;
        let sample_shift = if ta.len() == tb.len() {
            ta.iter().zip(&tb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
        } else {
            f64::INFINITY
        };
        let positive = ca.iter().all(|c| c.q > 0.0 && c.lambda > 0.0);
        let ok = curl_worst < 1e-4
            && parity
            && rev < 100.0 * tol
            && positive
            && ca == cb
            && sample_shift < tol;
        Ok(vec![CriterionOutcome::new(
            "13",
            name,
            ok,
            format!(
                "curl={curl_worst:.2e} parity={parity} reversibility={rev:.2e} (<{:.0e}) cycles={} q,lambda>0={positive} event cycles identical={} boundary shift at 2x sampling={sample_shift:.2e} (<{tol:.0e})",
                100.0 * tol,
                ca.len(),
                ca == cb
            ),
        )])
    })
}

// ---------------------------------------------------------------- 14

pub fn criterion_14() -> Vec<CriterionOutcome> {
    let name = "thread-count determinism";
    guard!("14", name, {
        let cfg = ExperimentConfig {
            experiment: Experiment::SigmaSweep {
                sigma0_values: vec![0.5, 2.0, 8.0],
                p_values: vec![1.0, 0.5],
            },
            n_cycles: 2_000,
            n_realizations: 64,
            master_seed: 7,
        };
        let one = run_experiment_with_threads(&cfg, 1)?;
        let many = run_experiment_with_threads(&cfg, 4)?;
        let same = one.csv == many.csv && one.summary.to_string() == many.summary.to_string();
        Ok(vec![CriterionOutcome::new(
            "14",
            name,
            same,
            format!("1 vs 4 threads byte-identical={same} ({} bytes)", one.csv.len()),
        )])
    })
}

/// Outcomes of one criterion by number.
pub fn run_criterion(id: usize) -> Option<Vec<CriterionOutcome>> {
    let f: fn() -> Vec<CriterionOutcome> = match id {
        1 => criterion_1,
        2 => criterion_2,
        3 => criterion_3,
        4 => criterion_4,
        5 => criterion_5,
        6 => criterion_6,
        7 => criterion_7,
        8 => criterion_8,
        9 => criterion_9,
        10 => criterion_10,
        11 => criterion_11,
        12 => criterion_12,
        13 => criterion_13,
        14 => criterion_14,
        _ => return None,
    };
    Some(f())
}

/// Outcomes of a named suite.
pub fn run_suite(name: &str) -> Option<Vec<CriterionOutcome>> {
    let i = SUITES.iter().position(|s| *s == name)?;
    run_criterion(i + 1)
}

pub fn run_all() -> Vec<CriterionOutcome> {
    (1..=SUITES.len()).flat_map(|i| run_criterion(i).unwrap_or_default()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suites_map_to_ids() {
        assert_eq!(suite_of("1"), "thm2");
        assert_eq!(suite_of("14"), "determinism");
        assert_eq!(suite_of("0"), "unknown");
        assert!(run_suite("nope").is_none());
        let o = CriterionOutcome::new("4b", "x", false, "d".into());
        assert_eq!(o.suite, "normal");
        assert!(o.line().starts_with("FAIL  4b"));
    }

    #[test]
    fn cheap_criteria_pass() {
        for id in [7, 8, 11] {
            for o in run_criterion(id).unwrap() {
                assert!(o.passed, "{}", o.line());
            }
        }
    }
}
