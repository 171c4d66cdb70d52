use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::json;
use std::f64::consts::{LN_2, PI};
use std::path::{Path, PathBuf};

use randhill::acceptance::{run_all, run_suite, CriterionOutcome, SUITES};
use randhill::cycle_solver::{solve_cycle, ForcingShape, DEFAULT_TOL};
use randhill::delta_limit::{principal_solution_delta, stability_chart};
use randhill::growth::{
    bound_thm3, delta_gamma_thm2, delta_gamma_thm4, gamma_infinity, reduced_matrix, GrowthReport, RateEstimate,
};
use randhill::montecarlo::{run_experiment_with_threads, with_threads, Experiment, ExperimentConfig};
use randhill::orbits::{
    cycles_csv, cycles_gamma_infinity, extract_cycles, extract_cycles_from_samples, integrate_orbit_with,
    parse_cycles_csv, parse_trajectory_csv, trajectory_csv, OrbitOptions, OrbitState, TriaxialShape,
};
use randhill::sampling::{sample_sigma0, stream_rng, DistributionSpec, Family, Purpose};
use randhill::stats::log_space;
use randhill::transfer::{growth_rate_of_sequence, rescale_aperiodic, CycleParams};

use crate::manifest::{unix_now, write_atomic, write_outputs, RunManifest};
use crate::{Command, EXIT_ACCEPTANCE};

pub fn dispatch(cmd: Command, threads: usize) -> Result<u8> {
    match cmd {
        Command::Cycle(a) => cycle(a),
        Command::Chart(a) => chart(a, threads),
        Command::Growth(a) => growth(a, threads),
        Command::Mc(a) => mc(a, threads),
        Command::Orbit(a) => orbit(a, threads),
        Command::Verify { suite, out } => verify(suite, out, threads),
    }
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("{} does not match the expected schema", path.display()))
}

/// Write to stdout; a reader that closed the pipe early is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    let mut out = std::io::stdout().lock();
    match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

fn print_json(v: &impl Serialize) -> Result<()> {
    emit(&(serde_json::to_string_pretty(v)? + "\n"))
}

// ------------------------------------------------------------------ cycle

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeName {
    Zero,
    Delta,
    Square,
    Cosine,
}

#[derive(Debug, Args)]
pub struct CycleArgs {
    #[arg(long, value_enum, default_value = "delta")]
    shape: ShapeName,
    #[arg(long, allow_hyphen_values = true)]
    lambda: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    q: f64,
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// Barrier width for the square and cosine shapes.
    #[arg(long, default_value_t = 0.1)]
    w: f64,
    #[arg(long, default_value_t = DEFAULT_TOL)]
    tol: f64,
}

fn verdict(delta: f64, slack: f64) -> &'static str {
    let d = delta.abs() - 2.0;
    if d.abs() <= slack {
        "boundary"
    } else if d > 0.0 {
        "unstable"
    } else {
        "stable"
    }
}

fn cycle(a: CycleArgs) -> Result<u8> {
    let shape = match a.shape {
        ShapeName::Zero => ForcingShape::Zero,
        ShapeName::Delta => ForcingShape::Delta,
        ShapeName::Square => ForcingShape::SquareBarrier { width: a.w },
        ShapeName::Cosine => ForcingShape::RaisedCosine { width: a.w },
    };
    let p = CycleParams::new(a.lambda, a.q, a.mu)?;
    let ps = solve_cycle(shape, p, a.tol)?;
    let slack = match shape {
        ForcingShape::Zero | ForcingShape::Delta => 1e-12,
        _ => 10.0 * a.tol,
    };
    let delta = ps.discriminant();
    print_json(&json!({
        "shape": shape,
        "params": p,
        "y1": ps.y1, "dy1": ps.dy1, "y2": ps.y2, "dy2": ps.dy2,
        "h": ps.h(),
        "g": ps.g(),
        "discriminant": delta,
        "wronskian": ps.wronskian(),
        "verdict": verdict(delta, slack),
    }))?;
    Ok(0)
}

// ------------------------------------------------------------------ chart

#[derive(Debug, Args)]
pub struct ChartArgs {
    /// Lambda range as `lo..hi`.
    #[arg(long, default_value = "0..9")]
    lambda: String,
    /// q range as `lo..hi`.
    #[arg(long, default_value = "0..20")]
    q: String,
    /// Grid points per axis.
    #[arg(long, default_value_t = 400)]
    res: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64)> {
    let (a, b) = s.split_once("..").ok_or_else(|| anyhow!("range `{s}` is not of the form lo..hi"))?;
    Ok((
        a.trim().parse().with_context(|| format!("bad range start in `{s}`"))?,
        b.trim().parse().with_context(|| format!("bad range end in `{s}`"))?,
    ))
}

fn chart(a: ChartArgs, threads: usize) -> Result<u8> {
    let started = unix_now();
    let lr = parse_range(&a.lambda)?;
    let qr = parse_range(&a.q)?;
    let c = with_threads(threads, || stability_chart(lr, qr, a.res))??;
    let config = json!({ "lambda": [lr.0, lr.1], "q": [qr.0, qr.1], "resolution": a.res });
    write_outputs(
        RunManifest::new(config, None, threads, started),
        &[(a.out.clone(), c.to_csv().into_bytes())],
    )?;
    let unstable = c.unstable.iter().filter(|u| **u).count();
    eprintln!("wrote {} ({} of {} grid points unstable)", a.out.display(), unstable, c.unstable.len());
    Ok(0)
}

// ------------------------------------------------------------------ growth

#[derive(Debug, Args)]
pub struct GrowthArgs {
    /// File of x samples: one value per line, or CSV with an `x` column.
    #[arg(long, group = "input")]
    samples: Option<PathBuf>,
    /// JSON `{ "distribution": {...}, "n": N, "seed": S }` to draw from.
    #[arg(long, group = "input")]
    spec: Option<PathBuf>,
    /// Cycle CSV with columns `k,lambda,q,mu`.
    #[arg(long, group = "input")]
    cycles: Option<PathBuf>,
    /// Trajectory CSV with columns `t,x,z,vx,vz,omega_y2`; needs `--shape`.
    #[arg(long, group = "input", requires = "shape")]
    trajectory: Option<PathBuf>,
    /// Ellipsoid axes `a,b,c` for `--trajectory`.
    #[arg(long)]
    shape: Option<String>,
    /// Tolerance for re-integrating a trajectory.
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
    /// Probability of a positive ratio; defaults to the positive fraction
    /// of the sample.
    #[arg(long)]
    p: Option<f64>,
    /// Write the reports as JSON here instead of printing them.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize, Deserialize)]
struct SpecFile {
    distribution: DistributionSpec,
    n: usize,
    #[serde(default)]
    seed: u64,
}

fn read_samples(path: &Path) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let mut col = 0;
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if i == 0 && rec.get(0).map(|f| f.parse::<f64>().is_err()).unwrap_or(false) {
            col = rec
                .iter()
                .position(|f| f == "x")
                .ok_or_else(|| anyhow!("{}: header has no `x` column", path.display()))?;
            continue;
        }
        let field = rec.get(col).ok_or_else(|| anyhow!("{}: row {} is short", path.display(), i + 1))?;
        out.push(
            field
                .parse()
                .with_context(|| format!("{}: row {}: `{field}` is not a number", path.display(), i + 1))?,
        );
    }
    Ok(out)
}

fn parse_shape(s: &str) -> Result<TriaxialShape> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .with_context(|| format!("shape `{s}` is not a,b,c"))?;
    if v.len() != 3 {
        bail!("shape `{s}` needs exactly three axes");
    }
    Ok(TriaxialShape::new(v[0], v[1], v[2])?)
}

/// Estimators on one sample of ratios.
fn reports_for(xs: &[f64], p: Option<f64>, gamma_inf: Option<f64>) -> Result<Vec<GrowthReport>> {
    let n = xs.len();
    let p = p.unwrap_or_else(|| xs.iter().filter(|x| **x > 0.0).count() as f64 / n.max(1) as f64);
    let sigma0 = sample_sigma0(xs);
    let product = growth_rate_of_sequence(xs.iter().map(|&x| reduced_matrix(x)).collect::<Vec<_>>().iter())?
        - LN_2 / PI;
    let base = GrowthReport {
        estimator: String::new(),
        sigma0: Some(sigma0),
        p,
        samples: n,
        gamma_infinity: gamma_inf,
        delta_gamma: None,
        stderr: None,
        minus_infinity: false,
        bound: Some(bound_thm3(sigma0)),
    };
    let mut out = vec![GrowthReport {
        estimator: "product".into(),
        delta_gamma: Some(product),
        ..base.clone()
    }];
    let pairs = if p == 1.0 {
        let mags: Vec<f64> = xs.iter().map(|x| x.abs()).collect();
        RateEstimate::Finite(delta_gamma_thm2(&mags)?)
    } else {
        delta_gamma_thm4(xs, p)?
    };
    out.push(match pairs {
        RateEstimate::Finite(m) => GrowthReport {
            estimator: "pairs".into(),
            delta_gamma: Some(m.mean),
            stderr: Some(m.stderr),
            ..base
        },
        RateEstimate::MinusInfinity { .. } => GrowthReport {
            estimator: "pairs".into(),
            minus_infinity: true,
            ..base
        },
    });
    Ok(out)
}

fn cycle_reports(cycles: &[CycleParams], p: Option<f64>) -> Result<Vec<GrowthReport>> {
    let mut xs = Vec::with_capacity(cycles.len());
    let mut disc = Vec::with_capacity(cycles.len());
    for c in cycles {
        let r = rescale_aperiodic(*c);
        let ps = principal_solution_delta(r.lambda, r.q)?;
        disc.push(ps.discriminant());
        xs.push(ps.x_ratio()?);
    }
    reports_for(&xs, p, Some(gamma_infinity(&disc)?))
}

fn growth(a: GrowthArgs, threads: usize) -> Result<u8> {
    let started = unix_now();
    let (reports, config, seed) = if let Some(path) = &a.samples {
        let xs = read_samples(path)?;
        (reports_for(&xs, a.p, None)?, json!({ "samples": path }), None)
    } else if let Some(path) = &a.spec {
        let spec: SpecFile = read_json(path)?;
        spec.distribution.validate()?;
        let xs = spec
            .distribution
            .source(stream_rng(spec.seed, 0, Purpose::Product))?
            .take(spec.n);
        let p = a.p.or(Some(spec.distribution.p));
        (reports_for(&xs, p, None)?, serde_json::to_value(&spec)?, Some(spec.seed))
    } else if let Some(path) = &a.cycles {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let cycles = parse_cycles_csv(&text)?;
        (cycle_reports(&cycles, a.p)?, json!({ "cycles": path }), None)
    } else if let Some(path) = &a.trajectory {
        let shape = parse_shape(a.shape.as_deref().unwrap_or_default())?;
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let samples = parse_trajectory_csv(&text)?;
        let (cycles, _) = extract_cycles_from_samples(&shape, &samples, a.tol)?;
        (
            cycle_reports(&cycles, a.p)?,
            json!({ "trajectory": path, "shape": shape, "tol": a.tol }),
            None,
        )
    } else {
        bail!("give one of --samples, --spec, --cycles or --trajectory");
    };
    match a.out {
        Some(out) => {
            let text = serde_json::to_string_pretty(&reports)? + "\n";
            write_outputs(RunManifest::new(config, seed, threads, started), &[(out, text.into_bytes())])?;
        }
        None => print_json(&reports)?,
    }
    Ok(0)
}

// ------------------------------------------------------------------ mc

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Preset {
    Fig1,
    Fig2,
    Fig3,
    Thm5,
    FullVsReduced,
    Appb,
}

#[derive(Debug, Args)]
pub struct McArgs {
    /// Experiment configuration as JSON.
    #[arg(long, group = "which")]
    config: Option<PathBuf>,
    /// Built-in experiment.
    #[arg(long, value_enum, group = "which")]
    experiment: Option<Preset>,
    #[arg(long)]
    seed: Option<u64>,
    /// Cycles per realization.
    #[arg(long)]
    cycles: Option<usize>,
    #[arg(long)]
    realizations: Option<usize>,
    /// CSV output; the JSON summary goes next to it as `<out>.summary.json`.
    #[arg(long)]
    out: PathBuf,
}

fn preset(p: Preset) -> Result<Experiment> {
    Ok(match p {
        Preset::Fig1 => Experiment::Fig1 {
            a_values: vec![0.25, 0.5, 1.0, 1.5, 2.0, 2.3],
        },
        Preset::Fig2 => Experiment::SigmaSweep {
            sigma0_values: log_space(0.1, 10.0, 12),
            p_values: vec![1.0, 0.75, 0.5],
        },
        Preset::Fig3 => Experiment::SignGap {
            sigma0_values: vec![10.0, 18.0, 32.0, 56.0, 100.0],
            p: 0.5,
        },
        Preset::Thm5 => Experiment::Theorem5 {
            lambda: 0.25,
            q_min: 50.0,
            q_max: 150.0,
            scales: vec![1.0, 2.0, 4.0, 8.0],
        },
        Preset::FullVsReduced => Experiment::FullVsReduced {
            distribution: DistributionSpec::positive(Family::NormalXi { sigma0: 1.0 })?,
            h_min: 8.0,
            h_max: 12.0,
            h_scales: vec![1.0, 2.0, 4.0],
        },
        Preset::Appb => Experiment::AppendixB {
            distribution: DistributionSpec::positive(Family::Lognormal {
                sigma_x: 0.5,
                mean_log: 3.0,
            })?,
        },
    })
}

fn mc(a: McArgs, threads: usize) -> Result<u8> {
    let started = unix_now();
    let mut cfg: ExperimentConfig = match (&a.config, a.experiment) {
        (Some(path), _) => read_json(path)?,
        (None, Some(p)) => serde_json::from_value(json!({ "experiment": preset(p)? }))?,
        (None, None) => bail!("give --config or --experiment"),
    };
    if let Some(s) = a.seed {
        cfg.master_seed = s;
    }
    if let Some(n) = a.cycles {
        cfg.n_cycles = n;
    }
    if let Some(r) = a.realizations {
        cfg.n_realizations = r;
    }
    let out = run_experiment_with_threads(&cfg, threads)?;
    let mut summary_path = a.out.clone().into_os_string();
    summary_path.push(".summary.json");
    let summary = serde_json::to_string_pretty(&out.summary)? + "\n";
    write_outputs(
        RunManifest::new(serde_json::to_value(&cfg)?, Some(cfg.master_seed), threads, started),
        &[
            (a.out.clone(), out.csv.into_bytes()),
            (PathBuf::from(summary_path), summary.into_bytes()),
        ],
    )?;
    eprintln!("wrote {}", a.out.display());
    Ok(0)
}

// ------------------------------------------------------------------ orbit

fn default_tol() -> f64 {
    1e-9
}
fn default_dt() -> f64 {
    0.01
}
fn default_h_max() -> f64 {
    0.05
}

#[derive(Debug, Serialize, Deserialize)]
struct OrbitConfig {
    shape: TriaxialShape,
    initial: OrbitState,
    t_max: f64,
    #[serde(default = "default_tol")]
    tol: f64,
    #[serde(default = "default_dt")]
    output_dt: f64,
    #[serde(default = "default_h_max")]
    h_max: f64,
}

#[derive(Debug, Args)]
pub struct OrbitArgs {
    /// Orbit configuration as JSON; overrides the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 1.5)]
    a: f64,
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    #[arg(long, default_value_t = 0.6)]
    c: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    x: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    z: f64,
    #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
    vx: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    vz: f64,
    #[arg(long, default_value_t = 100.0)]
    t_max: f64,
    #[arg(long, default_value_t = default_tol())]
    tol: f64,
    /// Sample spacing of the trajectory CSV.
    #[arg(long, default_value_t = default_dt())]
    dt: f64,
    /// Trajectory CSV output.
    #[arg(long)]
    out: PathBuf,
    /// Cycle CSV output.
    #[arg(long)]
    cycles_out: Option<PathBuf>,
}

fn orbit(a: OrbitArgs, threads: usize) -> Result<u8> {
    let started = unix_now();
    let cfg = match &a.config {
        Some(p) => read_json(p)?,
        None => OrbitConfig {
            shape: TriaxialShape::new(a.a, a.b, a.c)?,
            initial: OrbitState {
                t: 0.0,
                x: a.x,
                z: a.z,
                vx: a.vx,
                vz: a.vz,
            },
            t_max: a.t_max,
            tol: a.tol,
            output_dt: a.dt,
            h_max: default_h_max(),
        },
    };
    let shape = TriaxialShape::new(cfg.shape.a, cfg.shape.b, cfg.shape.c)?;
    let opts = OrbitOptions {
        tol: cfg.tol,
        output_dt: Some(cfg.output_dt),
        h_max: cfg.h_max,
    };
    let traj = integrate_orbit_with(&shape, cfg.initial, cfg.t_max, &opts)?;
    let cycles = extract_cycles(&traj);
    let mut files = vec![(a.out.clone(), trajectory_csv(&traj.samples).into_bytes())];
    let gamma = match (&cycles, &a.cycles_out) {
        (Ok(c), Some(p)) => {
            files.push((p.clone(), cycles_csv(c).into_bytes()));
            Some(cycles_gamma_infinity(c)?)
        }
        (Ok(c), None) => Some(cycles_gamma_infinity(c)?),
        (Err(e), Some(_)) => return Err(e.clone().into()),
        (Err(_), None) => None,
    };
    write_outputs(RunManifest::new(serde_json::to_value(&cfg)?, None, threads, started), &files)?;
    print_json(&json!({
        "pericenters": traj.pericenters.len(),
        "cycles": cycles.as_ref().map(|c| c.len()).unwrap_or(0),
        "gamma_infinity": gamma,
        "energy_drift": traj.energy_drift,
        "steps": traj.steps,
        "final_state": traj.final_state,
    }))?;
    Ok(0)
}

// ------------------------------------------------------------------ verify

fn verify(suite: Option<String>, out: Option<PathBuf>, threads: usize) -> Result<u8> {
    let outcomes: Vec<CriterionOutcome> = match &suite {
        Some(s) => {
            let s = s.clone();
            with_threads(threads, move || run_suite(&s))?
                .ok_or_else(|| anyhow!("unknown suite `{}`; known: {}", suite.as_deref().unwrap_or(""), SUITES.join(", ")))?
        }
        None => with_threads(threads, run_all)?,
    };
    let mut table: String = outcomes.iter().map(|o| o.line() + "\n").collect();
    let passed = outcomes.iter().filter(|o| o.passed).count();
    table.push_str(&format!("{passed}/{} criteria passed\n", outcomes.len()));
    emit(&table)?;
    if let Some(p) = out {
        write_atomic(&p, (serde_json::to_string_pretty(&outcomes)? + "\n").as_bytes())?;
    }
    Ok(if passed == outcomes.len() { 0 } else { EXIT_ACCEPTANCE })
}
