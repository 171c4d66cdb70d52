//! Monte Carlo experiments over random cycle sequences.
//!
//! Realizations run in parallel on the current rayon pool.  Each one draws
//! from its own generator stream and the per-realization results are reduced
//! in index order, so output does not depend on the number of threads.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::f64::consts::{LN_2, PI};

use crate::delta_limit::principal_solution_delta;
use crate::error::{invalid, Error, Result};
use crate::growth::{
    appendix_b_growth, appendix_b_product_growth, delta_gamma_thm2, delta_gamma_thm4,
    error_bound_prop2, full_scaled_matrix, gamma_infinity, reduced_matrix, sweep_csv, RateEstimate,
    SweepRow, K_EPS_DEFAULT,
};
use crate::sampling::{sample_sigma0, stream_rng, DistributionSpec, Family, Purpose};
use crate::stats::{power_law_fit, MeanEstimate};
use crate::transfer::{growth_rate_of_product, RenormalizedProduct};

fn default_cycles() -> usize {
    10_000
}

fn default_realizations() -> usize {
    1_000
}

/// A full experiment description, as read from a JSON config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default = "default_cycles")]
    pub n_cycles: usize,
    #[serde(default = "default_realizations")]
    pub n_realizations: usize,
    #[serde(default)]
    pub master_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    /// Reduced products for one distribution.
    Product { distribution: DistributionSpec },
    /// Power-law family with positive signs, one point per exponent `a`.
    Fig1 { a_values: Vec<f64> },
    /// Normal log-ratios for every combination of spread and sign probability.
    SigmaSweep {
        sigma0_values: Vec<f64>,
        p_values: Vec<f64>,
    },
    /// Positive-sign minus mixed-sign correction for normal log-ratios.
    SignGap { sigma0_values: Vec<f64>, p: f64 },
    /// Full cycle matrices for impulse forcing at fixed `lambda` with `q`
    /// uniform on `[q_min s, q_max s]` for each scale `s`.
    Theorem5 {
        lambda: f64,
        q_min: f64,
        q_max: f64,
        scales: Vec<f64>,
    },
    /// Reduced against full matrices with `h` uniform on
    /// `[h_min s, h_max s]`.
    FullVsReduced {
        distribution: DistributionSpec,
        h_min: f64,
        h_max: f64,
        h_scales: Vec<f64>,
    },
    /// Closed form against brute force for the anti-diagonal products.
    AppendixB { distribution: DistributionSpec },
}

/// Machine-readable result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentOutput {
    pub csv: String,
    pub summary: Value,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_cycles < 4 {
            return Err(invalid("n_cycles must be at least 4"));
        }
        if self.n_realizations < 2 {
            return Err(invalid("n_realizations must be at least 2"));
        }
        let nonempty = |v: &Vec<f64>, name: &str| {
            if v.is_empty() {
                Err(invalid(format!("{name} is empty")))
            } else {
                Ok(())
            }
        };
        match &self.experiment {
            Experiment::Product { distribution } | Experiment::AppendixB { distribution } => {
                distribution.validate()
            }
            Experiment::Fig1 { a_values } => nonempty(a_values, "a_values"),
            Experiment::SigmaSweep {
                sigma0_values,
                p_values,
            } => {
                nonempty(sigma0_values, "sigma0_values")?;
                nonempty(p_values, "p_values")
            }
            Experiment::SignGap { sigma0_values, p } => {
                nonempty(sigma0_values, "sigma0_values")?;
                if !(0.0..=1.0).contains(p) {
                    return Err(invalid(format!("p must lie in [0, 1], got {p}")));
                }
                Ok(())
            }
            Experiment::Theorem5 {
                q_min,
                q_max,
                scales,
                ..
            } => {
                nonempty(scales, "scales")?;
                if !(*q_min > 0.0 && q_max >= q_min) {
                    return Err(invalid(format!(
                        "q must be drawn away from zero: need 0 < q_min <= q_max, got [{q_min}, {q_max}]"
                    )));
                }
                if scales.iter().any(|s| !(*s > 0.0)) {
                    return Err(invalid("scales must be positive"));
                }
                Ok(())
            }
            Experiment::FullVsReduced {
                distribution,
                h_min,
                h_max,
                h_scales,
            } => {
                distribution.validate()?;
                nonempty(h_scales, "h_scales")?;
                if !(*h_min > 1.0 && h_max >= h_min) || h_scales.iter().any(|s| !(*s >= 1.0)) {
                    return Err(invalid("h range must satisfy 1 < h_min <= h_max with scales >= 1"));
                }
                Ok(())
            }
        }
    }
}

/// Realization-level results of a reduced-product run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProductSummary {
    /// `ln rho / (pi N) - ln 2 / pi` of the reduced product.
    pub product: MeanEstimate,
    /// Pair estimator with signs folded in analytically (equals the
    /// positive-sign estimator when `p = 1`).
    pub thm4: Option<MeanEstimate>,
    /// Realizations whose pair estimator diverged to minus infinity.
    pub thm4_divergent: usize,
    /// Mean over realizations of the sample `sigma0^2`.
    pub sigma0_sq: MeanEstimate,
    pub p: f64,
    pub n_cycles: usize,
    pub n_realizations: usize,
}

struct Realization {
    product: f64,
    thm4: RateEstimate,
    sigma0_sq: f64,
}

fn reduced_rate(xs: &[f64]) -> Result<f64> {
    let mut prod = RenormalizedProduct::new();
    for &x in xs {
        prod.multiply(&reduced_matrix(x))?;
    }
    Ok(growth_rate_of_product(&prod)? - LN_2 / PI)
}

fn one_realization(spec: &DistributionSpec, n: usize, seed: u64, r: u64) -> Result<Realization> {
    let mut src = spec.source(stream_rng(seed, r, Purpose::Product))?;
    let xs = src.take(n);
    let product = reduced_rate(&xs)?;
    let thm4 = if spec.p == 1.0 {
        RateEstimate::Finite(delta_gamma_thm2(&xs)?)
    } else {
        delta_gamma_thm4(&xs, spec.p)?
    };
    let s = sample_sigma0(&xs);
    Ok(Realization {
        product,
        thm4,
        sigma0_sq: s * s,
    })
}

/// Run `n_realizations` reduced products of `n_cycles` factors each.
pub fn run_product_experiment(
    spec: &DistributionSpec,
    n_cycles: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<ProductSummary> {
    spec.validate()?;
    if n_cycles < 4 || n_realizations < 2 {
        return Err(invalid("need at least 4 cycles and 2 realizations"));
    }
    let runs: Vec<Realization> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| one_realization(spec, n_cycles, master_seed, r))
        .collect::<Result<_>>()?;
    let product: Vec<f64> = runs.iter().map(|r| r.product).collect();
    let sig: Vec<f64> = runs.iter().map(|r| r.sigma0_sq).collect();
    let finite: Vec<f64> = runs
        .iter()
        .filter_map(|r| r.thm4.finite().map(|m| m.mean))
        .collect();
    let divergent = runs.len() - finite.len();
    Ok(ProductSummary {
        product: MeanEstimate::from_samples(&product),
        thm4: if divergent == 0 {
            Some(MeanEstimate::from_samples(&finite))
        } else {
            None
        },
        thm4_divergent: divergent,
        sigma0_sq: MeanEstimate::from_samples(&sig),
        p: spec.p,
        n_cycles,
        n_realizations,
    })
}

/// Product experiments for a list of distributions, in order.
pub fn sweep_variance(
    specs: &[DistributionSpec],
    n_cycles: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<ProductSummary>> {
    specs
        .iter()
        .map(|s| run_product_experiment(s, n_cycles, n_realizations, master_seed))
        .collect()
}

/// Positive-sign and mixed-sign corrections on the same magnitudes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignGapPoint {
    pub sigma0: f64,
    pub positive: MeanEstimate,
    pub mixed: MeanEstimate,
    pub difference: MeanEstimate,
}

pub fn sign_gap(
    sigma0: f64,
    p: f64,
    n_cycles: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<SignGapPoint> {
    let pos = DistributionSpec::new(Family::NormalXi { sigma0 }, 1.0)?;
    let mix = DistributionSpec::new(Family::NormalXi { sigma0 }, p)?;
    let runs: Vec<(f64, f64)> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let a = pos.source(stream_rng(master_seed, r, Purpose::Product))?.take(n_cycles);
            let b = mix.source(stream_rng(master_seed, r, Purpose::Product))?.take(n_cycles);
            Ok((reduced_rate(&a)?, reduced_rate(&b)?))
        })
        .collect::<Result<_>>()?;
    let a: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let b: Vec<f64> = runs.iter().map(|r| r.1).collect();
    let d: Vec<f64> = runs.iter().map(|r| r.0 - r.1).collect();
    Ok(SignGapPoint {
        sigma0,
        positive: MeanEstimate::from_samples(&a),
        mixed: MeanEstimate::from_samples(&b),
        difference: MeanEstimate::from_samples(&d),
    })
}

/// Correction `gamma - gamma_infinity` at one forcing scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Point {
    pub scale: f64,
    pub gamma: MeanEstimate,
    pub gamma_infinity: MeanEstimate,
    pub correction: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theorem5Result {
    pub points: Vec<Theorem5Point>,
    /// Log-log slope of the correction against the scale.
    pub exponent: f64,
    pub exponent_stderr: f64,
}

/// Impulse-forced cycles at fixed `lambda` with `q` scaled up: measure how
/// the gap between the true rate and the mean single-cycle rate closes.
pub fn theorem5_convergence(
    lambda: f64,
    q_min: f64,
    q_max: f64,
    scales: &[f64],
    n_cycles: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Theorem5Result> {
    if !(q_min > 0.0 && q_max >= q_min) {
        return Err(invalid(format!(
            "q must be drawn away from zero: need 0 < q_min <= q_max, got [{q_min}, {q_max}]"
        )));
    }
    let mut points = Vec::with_capacity(scales.len());
    for &s in scales {
        let runs: Vec<(f64, f64)> = (0..n_realizations as u64)
            .into_par_iter()
            .map(|r| {
                use rand::Rng;
                let mut rng = stream_rng(master_seed, r, Purpose::Forcing);
                let mut prod = RenormalizedProduct::new();
                let mut disc = Vec::with_capacity(n_cycles);
                for _ in 0..n_cycles {
                    let q = s * (q_min + (q_max - q_min) * rng.random::<f64>());
                    let ps = principal_solution_delta(lambda, q)?;
                    prod.multiply(&ps.transfer()?)?;
                    disc.push(ps.discriminant());
                }
                Ok((growth_rate_of_product(&prod)?, gamma_infinity(&disc)?))
            })
            .collect::<Result<_>>()?;
        let g: Vec<f64> = runs.iter().map(|r| r.0).collect();
        let gi: Vec<f64> = runs.iter().map(|r| r.1).collect();
        let c: Vec<f64> = runs.iter().map(|r| r.0 - r.1).collect();
        points.push(Theorem5Point {
            scale: s,
            gamma: MeanEstimate::from_samples(&g),
            gamma_infinity: MeanEstimate::from_samples(&gi),
            correction: MeanEstimate::from_samples(&c),
        });
    }
    let xs: Vec<f64> = points.iter().map(|p| p.scale).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.correction.mean).collect();
    let fit = power_law_fit(&xs, &ys)
        .map_err(|e| Error::FitFailure(format!("correction is not positive at every scale: {e}")))?;
    Ok(Theorem5Result {
        points,
        exponent: fit.slope,
        exponent_stderr: fit.slope_stderr,
    })
}

/// Reduced against full cycle matrices at one `h` scale.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FullVsReducedPoint {
    pub h_scale: f64,
    pub reduced: MeanEstimate,
    pub full: MeanEstimate,
    /// `reduced - full`, paired per realization.
    pub gap: MeanEstimate,
    pub mean_inv_h2: f64,
    pub upper: f64,
    pub estimate: f64,
    /// `pi gap / <h^-2>`, the prefactor the measurement implies.
    pub k_eps: f64,
}

pub fn full_vs_reduced(
    spec: &DistributionSpec,
    h_min: f64,
    h_max: f64,
    h_scale: f64,
    n_cycles: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<FullVsReducedPoint> {
    spec.validate()?;
    if !(h_min * h_scale > 1.0 && h_max >= h_min) {
        return Err(Error::InvalidH { h: h_min * h_scale });
    }
    struct Run {
        reduced: f64,
        full: f64,
        upper: f64,
        estimate: f64,
        inv_h2: f64,
    }
    let runs: Vec<Run> = (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            use rand::Rng;
            let xs = spec.source(stream_rng(master_seed, r, Purpose::Product))?.take(n_cycles);
            let mut rng = stream_rng(master_seed, r, Purpose::Auxiliary);
            let hs: Vec<f64> = (0..n_cycles)
                .map(|_| h_scale * (h_min + (h_max - h_min) * rng.random::<f64>()))
                .collect();
            let mut c = RenormalizedProduct::new();
            let mut b = RenormalizedProduct::new();
            for (&x, &h) in xs.iter().zip(&hs) {
                c.multiply(&reduced_matrix(x))?;
                b.multiply(&full_scaled_matrix(x, h))?;
            }
            let bounds = error_bound_prop2(&hs, K_EPS_DEFAULT)?;
            Ok(Run {
                reduced: growth_rate_of_product(&c)? - LN_2 / PI,
                full: growth_rate_of_product(&b)? - LN_2 / PI,
                upper: bounds.upper,
                estimate: bounds.estimate,
                inv_h2: hs.iter().map(|h| 1.0 / (h * h)).sum::<f64>() / hs.len() as f64,
            })
        })
        .collect::<Result<_>>()?;
    let n = runs.len() as f64;
    let red: Vec<f64> = runs.iter().map(|r| r.reduced).collect();
    let full: Vec<f64> = runs.iter().map(|r| r.full).collect();
    let gap: Vec<f64> = runs.iter().map(|r| r.reduced - r.full).collect();
    let mean_inv_h2 = runs.iter().map(|r| r.inv_h2).sum::<f64>() / n;
    let gap = MeanEstimate::from_samples(&gap);
    Ok(FullVsReducedPoint {
        h_scale,
        reduced: MeanEstimate::from_samples(&red),
        full: MeanEstimate::from_samples(&full),
        gap,
        mean_inv_h2,
        upper: runs.iter().map(|r| r.upper).sum::<f64>() / n,
        estimate: runs.iter().map(|r| r.estimate).sum::<f64>() / n,
        k_eps: PI * gap.mean / mean_inv_h2,
    })
}

/// Closed form against brute force for one realization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AppendixBPoint {
    pub closed_form: f64,
    pub product: f64,
}

pub fn appendix_b_comparison(
    spec: &DistributionSpec,
    n_cycles: usize,
    n_realizations: usize,
    master_seed: u64,
) -> Result<Vec<AppendixBPoint>> {
    spec.validate()?;
    (0..n_realizations as u64)
        .into_par_iter()
        .map(|r| {
            let xs = spec.source(stream_rng(master_seed, r, Purpose::Product))?.take(n_cycles);
            Ok(AppendixBPoint {
                closed_form: appendix_b_growth(&xs)?,
                product: appendix_b_product_growth(&xs)?,
            })
        })
        .collect()
}

/// Spread `sigma0*` at which the mixed-sign correction for normal log-ratios
/// changes sign, located by bisection on a fixed sample of `n_pairs` pairs.
pub fn crossover_sigma0(p: f64, n_pairs: usize, master_seed: u64, lo: f64, hi: f64) -> Result<f64> {
    use rand_distr::{Distribution, StandardNormal};
    if !(p > 0.0 && p < 1.0) {
        return Err(invalid(format!("crossover needs 0 < p < 1, got {p}")));
    }
    let mut rng = stream_rng(master_seed, 0, Purpose::Auxiliary);
    let z: Vec<f64> = (0..2 * n_pairs)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let f = |s: f64| -> Result<f64> {
        let xs: Vec<f64> = z.iter().map(|v| (s * std::f64::consts::FRAC_1_SQRT_2 * v).exp()).collect();
        match delta_gamma_thm4(&xs, p)? {
            RateEstimate::Finite(m) => Ok(m.mean),
            RateEstimate::MinusInfinity { .. } => Ok(f64::NEG_INFINITY),
        }
    };
    let (mut a, mut b) = (lo, hi);
    let (fa, fb) = (f(a)?, f(b)?);
    if !(fa < 0.0 && fb > 0.0) {
        return Err(Error::RootFailure(format!(
            "correction does not change sign on [{lo}, {hi}] ({fa}, {fb})"
        )));
    }
    while b - a > 1e-6 {
        let m = 0.5 * (a + b);
        if f(m)? > 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    Ok(0.5 * (a + b))
}

fn row(sigma0: f64, m: &MeanEstimate, est: String) -> SweepRow {
    SweepRow {
        sigma0,
        delta_gamma: m.mean,
        stderr: m.stderr,
        estimator: est,
    }
}

/// Run a configured experiment on the current rayon pool.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let (n, r, seed) = (cfg.n_cycles, cfg.n_realizations, cfg.master_seed);
    match &cfg.experiment {
        Experiment::Product { distribution } => {
            let s = run_product_experiment(distribution, n, r, seed)?;
            let sigma0 = s.sigma0_sq.mean.sqrt();
            let mut rows = vec![row(sigma0, &s.product, "product".into())];
            if let Some(t) = &s.thm4 {
                rows.push(row(sigma0, t, "pairs".into()));
            }
            Ok(ExperimentOutput {
                csv: sweep_csv(&rows),
                summary: json!({ "points": [s] }),
            })
        }
        Experiment::Fig1 { a_values } => {
            let mut rows = Vec::new();
            let mut points = Vec::new();
            for &a in a_values {
                let spec = DistributionSpec::new(Family::Fig1Power { a }, 1.0)?;
                let s = run_product_experiment(&spec, n, r, seed)?;
                let sigma0 = s.sigma0_sq.mean.sqrt();
                rows.push(row(sigma0, &s.product, "product".into()));
                if let Some(t) = &s.thm4 {
                    rows.push(row(sigma0, t, "thm2".into()));
                }
                rows.push(SweepRow {
                    sigma0,
                    delta_gamma: crate::growth::bound_thm3(sigma0),
                    stderr: 0.0,
                    estimator: "thm3_bound".into(),
                });
                points.push(json!({ "a": a, "summary": s }));
            }
            Ok(ExperimentOutput {
                csv: sweep_csv(&rows),
                summary: json!({ "points": points }),
            })
        }
        Experiment::SigmaSweep {
            sigma0_values,
            p_values,
        } => {
            let mut rows = Vec::new();
            let mut points = Vec::new();
            for &p in p_values {
                for &sigma0 in sigma0_values {
                    let spec = DistributionSpec::new(Family::NormalXi { sigma0 }, p)?;
                    let s = run_product_experiment(&spec, n, r, seed)?;
                    rows.push(row(sigma0, &s.product, format!("product_p{p}")));
                    if let Some(t) = &s.thm4 {
                        rows.push(row(sigma0, t, format!("thm4_p{p}")));
                    }
                    points.push(json!({ "sigma0": sigma0, "p": p, "summary": s }));
                }
            }
            Ok(ExperimentOutput {
                csv: sweep_csv(&rows),
                summary: json!({ "points": points }),
            })
        }
        Experiment::SignGap { sigma0_values, p } => {
            let mut csv = String::from(
                "sigma0,delta_gamma_p,delta_gamma_q,difference,stderr_p,stderr_q,stderr_difference\n",
            );
            let mut pts = Vec::new();
            for &s in sigma0_values {
                let g = sign_gap(s, *p, n, r, seed)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    s,
                    g.positive.mean,
                    g.mixed.mean,
                    g.difference.mean,
                    g.positive.stderr,
                    g.mixed.stderr,
                    g.difference.stderr
                ));
                pts.push(g);
            }
            let slope = |f: &dyn Fn(&SignGapPoint) -> f64| {
                let xs: Vec<f64> = pts.iter().map(|g| g.sigma0).collect();
                let ys: Vec<f64> = pts.iter().map(f).collect();
                power_law_fit(&xs, &ys).ok().map(|fit| fit.slope)
            };
            let summary = json!({
                "points": pts,
                "slope_positive": slope(&|g| g.positive.mean),
                "slope_difference": slope(&|g| g.difference.mean),
            });
            Ok(ExperimentOutput { csv, summary })
        }
        Experiment::Theorem5 {
            lambda,
            q_min,
            q_max,
            scales,
        } => {
            let t = theorem5_convergence(*lambda, *q_min, *q_max, scales, n, r, seed)?;
            let mut csv = String::from("scale,gamma,gamma_infinity,correction,stderr\n");
            for p in &t.points {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    p.scale, p.gamma.mean, p.gamma_infinity.mean, p.correction.mean, p.correction.stderr
                ));
            }
            Ok(ExperimentOutput {
                csv,
                summary: serde_json::to_value(&t).expect("plain data"),
            })
        }
        Experiment::FullVsReduced {
            distribution,
            h_min,
            h_max,
            h_scales,
        } => {
            let mut csv = String::from(
                "h_scale,mean_inv_h2,delta_gamma_reduced,delta_gamma_full,gap,gap_stderr,upper_bound,estimate,k_eps\n",
            );
            let mut pts = Vec::new();
            for &hs in h_scales {
                let p = full_vs_reduced(distribution, *h_min, *h_max, hs, n, r, seed)?;
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{}\n",
                    p.h_scale,
                    p.mean_inv_h2,
                    p.reduced.mean,
                    p.full.mean,
                    p.gap.mean,
                    p.gap.stderr,
                    p.upper,
                    p.estimate,
                    p.k_eps
                ));
                pts.push(p);
            }
            Ok(ExperimentOutput {
                csv,
                summary: json!({ "points": pts }),
            })
        }
        Experiment::AppendixB { distribution } => {
            let pts = appendix_b_comparison(distribution, n, r, seed)?;
            let mut csv = String::from("realization,closed_form,product\n");
            for (i, p) in pts.iter().enumerate() {
                csv.push_str(&format!("{},{},{}\n", i, p.closed_form, p.product));
            }
            let worst = pts
                .iter()
                .map(|p| ((p.product - p.closed_form) / p.closed_form).abs())
                .fold(0.0, f64::max);
            Ok(ExperimentOutput {
                csv,
                summary: json!({ "max_relative_difference": worst }),
            })
        }
    }
}

/// Run `f` on a dedicated pool of `threads` workers.  Every parallel
/// reduction in the crate collects in index order, so results do not
/// depend on `threads`.
pub fn with_threads<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> Result<R> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| invalid(format!("cannot start {threads} worker threads: {e}")))?;
    Ok(pool.install(f))
}

/// Run an experiment on a dedicated pool of `threads` workers.
pub fn run_experiment_with_threads(cfg: &ExperimentConfig, threads: usize) -> Result<ExperimentOutput> {
    with_threads(threads, || run_experiment(cfg))?
}

#[cfg(test)]
mod tests {
    use super::*;

    fn normal(s: f64, p: f64) -> DistributionSpec {
        DistributionSpec::new(Family::NormalXi { sigma0: s }, p).unwrap()
    }

    #[test]
    fn two_point_product_matches_pair_estimator() {
        let spec = DistributionSpec::positive(Family::TwoPoint {
            low: 1.0,
            high: std::f64::consts::E,
        })
        .unwrap();
        let s = run_product_experiment(&spec, 4000, 40, 1).unwrap();
        let exact = 0.019_117;
        assert!((s.product.mean - exact).abs() < 4.0 * s.product.stderr + 1e-4, "{:?}", s.product);
        let t = s.thm4.unwrap();
        assert!((t.mean - exact).abs() < 4.0 * t.stderr + 1e-4, "{t:?}");
    }

    #[test]
    fn thread_count_does_not_change_output() {
        let cfg = ExperimentConfig {
            experiment: Experiment::SigmaSweep {
                sigma0_values: vec![0.5, 2.0],
                p_values: vec![1.0, 0.5],
            },
            n_cycles: 300,
            n_realizations: 12,
            master_seed: 99,
        };
        let a = run_experiment_with_threads(&cfg, 1).unwrap();
        let b = run_experiment_with_threads(&cfg, 3).unwrap();
        assert_eq!(a.csv, b.csv);
        assert_eq!(a.summary, b.summary);
    }

    #[test]
    fn stderr_halves_with_four_times_realizations() {
        let spec = normal(1.0, 1.0);
        let a = run_product_experiment(&spec, 500, 100, 5).unwrap();
        let b = run_product_experiment(&spec, 500, 400, 5).unwrap();
        let ratio = a.product.stderr / b.product.stderr;
        assert!((ratio - 2.0).abs() < 0.4, "ratio {ratio}");
    }

    #[test]
    fn mixed_signs_lower_the_rate() {
        let g = sign_gap(1.0, 0.5, 2000, 16, 3).unwrap();
        assert!(g.difference.mean > 0.0);
        assert!(g.mixed.mean < 0.0);
    }

    #[test]
    fn theorem5_rejects_zero_q() {
        assert!(theorem5_convergence(0.25, 0.0, 1.0, &[1.0], 10, 2, 0).is_err());
    }

    #[test]
    fn prop2_gap_is_bracketed() {
        let spec = DistributionSpec::positive(Family::Lognormal {
            sigma_x: 0.5,
            mean_log: 0.0,
        })
        .unwrap();
        let p = full_vs_reduced(&spec, 8.0, 12.0, 1.0, 2000, 16, 4).unwrap();
        assert!(p.gap.mean > 0.0 && p.gap.mean < p.upper, "{p:?}");
        assert!(p.k_eps > 0.0 && p.k_eps < 0.5);
    }

    #[test]
    fn crossover_root_exists() {
        let s = crossover_sigma0(0.5, 20_000, 1, 0.5, 30.0).unwrap();
        assert!(s > 1.0 && s < 30.0, "{s}");
    }

    #[test]
    fn config_serde_and_validation() {
        let cfg: ExperimentConfig = serde_json::from_str(
            r#"{"experiment":{"kind":"sign_gap","sigma0_values":[10,20],"p":0.5},"n_realizations":8,"master_seed":3}"#,
        )
        .unwrap();
        assert_eq!(cfg.n_cycles, 10_000);
        assert!(cfg.validate().is_ok());
        let bad = ExperimentConfig {
            experiment: Experiment::Theorem5 {
                lambda: 0.25,
                q_min: 0.0,
                q_max: 2.0,
                scales: vec![1.0],
            },
            n_cycles: 100,
            n_realizations: 4,
            master_seed: 0,
        };
        assert!(bad.validate().is_err());
    }
}
