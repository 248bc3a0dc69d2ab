//! Experiment runner: configs in, CSV/JSON/SVG artifacts out.
//!
//! Every subcommand resolves its parameters in the same order: built-in
//! defaults, then the JSON config file (flat key/value, keys named exactly
//! like the long flags), then explicit flags. The seed falls back to the
//! ACPROP_LAB_SEED environment variable when neither flag nor config set
//! one. Exit status: 0 on success, 1 on a compute failure, 2 on a usage or
//! config error; failures emit a one-line JSON error record on stderr.

use acprop_lab::limits::{
    convergence_ratio_test, limit_m_problem1, limit_s_problem1, limits_problem2,
    simulate_problem1_orbit, simulate_problem2_orbit, DEFAULT_MAX_PERIODS, DEFAULT_SNAPSHOT_TOL,
};
use acprop_lab::mlp::{train_mlp, MlpConfig};
use acprop_lab::optim::{run_trajectory, HyperParams, Variant};
use acprop_lab::problems::{ProblemKind, ProblemSpec};
use acprop_lab::rate::measure_rate;
use acprop_lab::report;
use acprop_lab::series::harmonic_sum_check;
use acprop_lab::svg;
use acprop_lab::sweep::{log_grid, run_sweep, SweepGrid};
use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "acprop-lab", version, about = "optimizer lab experiment runner")]
struct Cli {
    /// JSON config file; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for output artifacts.
    #[arg(long = "output_dir", global = true)]
    output_dir: Option<PathBuf>,
    /// Master seed (flag > config > ACPROP_LAB_SEED > 42).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for parallel cells (default: available processors).
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convergence-region sweep over (P, beta2) for a set of optimizers.
    Sweep(SweepArgs),
    /// Single optimizer trajectory on one problem.
    Trajectory(TrajectoryArgs),
    /// Closed-form accumulator limits vs EMA simulation.
    Limits(LimitsArgs),
    /// Convergence-rate measurement on the noisy quadratic.
    Rate(RateArgs),
    /// MLP smoke training with denominator tracking.
    Mlp(MlpArgs),
    /// Generalized harmonic sum accuracy check.
    Harmonic(HarmonicArgs),
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    problem: Option<String>,
    /// Comma-separated optimizer list.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    beta1: Option<f64>,
    /// Comma-separated period values.
    #[arg(long = "p_values")]
    p_values: Option<String>,
    #[arg(long = "beta2_points")]
    beta2_points: Option<usize>,
    #[arg(long = "beta2_min")]
    beta2_min: Option<f64>,
    #[arg(long = "beta2_max")]
    beta2_max: Option<f64>,
    /// Comma-separated learning-rate candidates.
    #[arg(long = "lr_candidates")]
    lr_candidates: Option<String>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    tail: Option<u64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "stochastic_seeds")]
    stochastic_seeds: Option<u32>,
    #[arg(long = "delay_n")]
    delay_n: Option<usize>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct TrajectoryArgs {
    #[arg(long)]
    problem: Option<String>,
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    steps: Option<u64>,
    #[arg(long)]
    stride: Option<u64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long = "P")]
    p: Option<u32>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long = "delay_n")]
    delay_n: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    x0: Option<f64>,
    #[arg(long = "bias_correction")]
    bias_correction: Option<bool>,
    #[arg(long = "eps_inside_sqrt")]
    eps_inside_sqrt: Option<bool>,
}

#[derive(Args)]
struct LimitsArgs {
    /// periodic1 or sparse2.
    #[arg(long)]
    problem: Option<String>,
    #[arg(long = "P")]
    p: Option<u32>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long = "max_periods")]
    max_periods: Option<u64>,
    #[arg(long = "sim_tol")]
    sim_tol: Option<f64>,
}

#[derive(Args)]
struct RateArgs {
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    dims: Option<usize>,
    #[arg(long = "t_max")]
    t_max: Option<u64>,
    #[arg(long = "rate_seeds")]
    rate_seeds: Option<u32>,
}

#[derive(Args)]
struct MlpArgs {
    /// Comma-separated optimizer list.
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long = "in_dim")]
    in_dim: Option<usize>,
    #[arg(long = "hidden_dim")]
    hidden_dim: Option<usize>,
    #[arg(long = "out_dim")]
    out_dim: Option<usize>,
    #[arg(long = "n_samples")]
    n_samples: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    beta1: Option<f64>,
    #[arg(long)]
    beta2: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
}

#[derive(Args)]
struct HarmonicArgs {
    /// Comma-separated summation lengths.
    #[arg(long = "n_values")]
    n_values: Option<String>,
    /// Comma-separated exponents in [0.5, 1).
    #[arg(long)]
    etas: Option<String>,
}

/// Flat config file: keys are exactly the long flag names. Unknown keys are
/// rejected so typos never silently fall back to defaults.
#[derive(Debug, Default, serde::Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    output_dir: Option<String>,
    seed: Option<u64>,
    workers: Option<usize>,
    problem: Option<String>,
    optimizer: Option<String>,
    beta1: Option<f64>,
    beta2: Option<f64>,
    p_values: Option<String>,
    beta2_points: Option<usize>,
    beta2_min: Option<f64>,
    beta2_max: Option<f64>,
    lr_candidates: Option<String>,
    steps: Option<u64>,
    tail: Option<u64>,
    tol: Option<f64>,
    delta: Option<f64>,
    stochastic_seeds: Option<u32>,
    delay_n: Option<usize>,
    eps: Option<f64>,
    lr: Option<f64>,
    stride: Option<u64>,
    eta: Option<f64>,
    #[serde(rename = "P")]
    p: Option<u32>,
    sigma: Option<f64>,
    x0: Option<f64>,
    bias_correction: Option<bool>,
    eps_inside_sqrt: Option<bool>,
    max_periods: Option<u64>,
    sim_tol: Option<f64>,
    dims: Option<usize>,
    t_max: Option<u64>,
    rate_seeds: Option<u32>,
    in_dim: Option<usize>,
    hidden_dim: Option<usize>,
    out_dim: Option<usize>,
    n_samples: Option<usize>,
    epochs: Option<usize>,
    batch: Option<usize>,
    n_values: Option<String>,
    etas: Option<String>,
}

enum CliError {
    Usage(String),
    Compute(String),
}

impl From<acprop_lab::Error> for CliError {
    fn from(e: acprop_lab::Error) -> Self {
        match e {
            acprop_lab::Error::InvalidParameter(_) | acprop_lab::Error::Malformed(_) => {
                CliError::Usage(e.to_string())
            }
            other => CliError::Compute(other.to_string()),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("{}", serde_json::json!({"error": msg, "kind": "usage"}));
            ExitCode::from(2)
        }
        Err(CliError::Compute(msg)) => {
            eprintln!("{}", serde_json::json!({"error": msg, "kind": "compute"}));
            ExitCode::from(1)
        }
    }
}

fn parse_list<T: FromStr>(s: &str, what: &str) -> Result<Vec<T>, CliError> {
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| {
            p.parse::<T>()
                .map_err(|_| CliError::Usage(format!("bad {what} entry '{p}'")))
        })
        .collect()
}

fn load_config(path: Option<&Path>) -> Result<FileConfig, CliError> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad config: {e}")))
}

fn check_command(file: &FileConfig, actual: &str) -> Result<(), CliError> {
    if let Some(c) = &file.command {
        if c != actual {
            return Err(CliError::Usage(format!(
                "config is for command '{c}' but '{actual}' was invoked"
            )));
        }
    }
    Ok(())
}

fn resolve_seed(flag: Option<u64>, file: &FileConfig) -> Result<u64, CliError> {
    if let Some(s) = flag {
        return Ok(s);
    }
    if let Some(s) = file.seed {
        return Ok(s);
    }
    match std::env::var("ACPROP_LAB_SEED") {
        Ok(v) => v
            .parse()
            .map_err(|_| CliError::Usage(format!("ACPROP_LAB_SEED is not an integer: '{v}'"))),
        Err(_) => Ok(42),
    }
}

struct OutputWriter {
    dir: PathBuf,
    command: &'static str,
    seed: u64,
    config: serde_json::Value,
    started: Instant,
    outputs: Vec<String>,
}

impl OutputWriter {
    fn new(
        dir: Option<PathBuf>,
        file_dir: Option<&str>,
        command: &'static str,
        seed: u64,
        config: serde_json::Value,
    ) -> Result<Self, CliError> {
        let dir = dir
            .or_else(|| file_dir.map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("."));
        std::fs::create_dir_all(&dir)
            .map_err(|e| CliError::Usage(format!("cannot create {}: {e}", dir.display())))?;
        Ok(Self {
            dir,
            command,
            seed,
            config,
            started: Instant::now(),
            outputs: Vec::new(),
        })
    }

    fn config_json(&self) -> String {
        serde_json::to_string(&self.config).expect("config serialization")
    }

    fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        std::fs::write(&path, contents)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    fn finish(self) -> Result<(), CliError> {
        let wall = self.started.elapsed().as_secs_f64();
        let names: Vec<&str> = self.outputs.iter().map(String::as_str).collect();
        let meta = report::run_meta_json(self.command, self.seed, &self.config, wall, &names);
        let path = self.dir.join("run_meta.json");
        std::fs::write(&path, meta)
            .map_err(|e| CliError::Compute(format!("cannot write {}: {e}", path.display())))?;
        Ok(())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let file = load_config(cli.config.as_deref())?;
    if let Some(workers) = cli.workers.or(file.workers) {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot size worker pool: {e}")))?;
    }
    let seed = resolve_seed(cli.seed, &file)?;
    let out_dir = cli.output_dir.clone();
    match cli.command {
        Command::Sweep(args) => cmd_sweep(args, &file, seed, out_dir),
        Command::Trajectory(args) => cmd_trajectory(args, &file, seed, out_dir),
        Command::Limits(args) => cmd_limits(args, &file, seed, out_dir),
        Command::Rate(args) => cmd_rate(args, &file, seed, out_dir),
        Command::Mlp(args) => cmd_mlp(args, &file, seed, out_dir),
        Command::Harmonic(args) => cmd_harmonic(args, &file, seed, out_dir),
    }
}

fn parse_variants(s: &str) -> Result<Vec<Variant>, CliError> {
    let list: Vec<Variant> = parse_list(s, "optimizer")?;
    if list.is_empty() {
        return Err(CliError::Usage("optimizer list is empty".into()));
    }
    Ok(list)
}

fn cmd_sweep(
    args: SweepArgs,
    file: &FileConfig,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    check_command(file, "sweep")?;
    let problem: ProblemKind = args
        .problem
        .or_else(|| file.problem.clone())
        .unwrap_or_else(|| "periodic1".into())
        .parse()?;
    let optimizers = parse_variants(
        &args
            .optimizer
            .or_else(|| file.optimizer.clone())
            .unwrap_or_else(|| "acprop,adashift,adam,rmsprop,adabelief".into()),
    )?;
    let beta1 = args.beta1.or(file.beta1).unwrap_or(0.9);
    let mut grid = SweepGrid::new(problem, beta1, optimizers, seed);
    if let Some(pv) = args.p_values.or_else(|| file.p_values.clone()) {
        grid.p_values = parse_list(&pv, "p_values")?;
    }
    let b2_points = args.beta2_points.or(file.beta2_points).unwrap_or(20);
    let b2_min = args.beta2_min.or(file.beta2_min).unwrap_or(0.1);
    let b2_max = args.beta2_max.or(file.beta2_max).unwrap_or(0.999);
    if !(b2_min > 0.0 && b2_max < 1.0 && b2_min < b2_max && b2_points >= 2) {
        return Err(CliError::Usage(format!(
            "bad beta2 grid: {b2_points} points in [{b2_min}, {b2_max}]"
        )));
    }
    grid.beta2_values = log_grid(b2_min, b2_max, b2_points);
    if let Some(lrs) = args.lr_candidates.or_else(|| file.lr_candidates.clone()) {
        grid.lr_candidates = parse_list(&lrs, "lr_candidates")?;
    }
    grid.steps = args.steps.or(file.steps).unwrap_or(grid.steps);
    grid.tail = args.tail.or(file.tail).unwrap_or(grid.tail);
    grid.tol = args.tol.or(file.tol).unwrap_or(grid.tol);
    grid.delta = args.delta.or(file.delta).unwrap_or(grid.delta);
    grid.stochastic_seeds = args
        .stochastic_seeds
        .or(file.stochastic_seeds)
        .unwrap_or(grid.stochastic_seeds);
    grid.delay_n = args.delay_n.or(file.delay_n).unwrap_or(grid.delay_n);
    grid.eps = args.eps.or(file.eps).unwrap_or(grid.eps);
    grid.validate()?;

    let config = serde_json::to_value(&grid).expect("grid serialization");
    let mut writer = OutputWriter::new(out_dir, file.output_dir.as_deref(), "sweep", seed, config)?;
    let verdicts = run_sweep(&grid)?;
    let csv = report::sweep_csv(&verdicts, seed, &writer.config_json());
    writer.write("sweep.csv", &csv)?;
    writer.write("sweep.svg", &svg::render_sweep_svg(&csv)?)?;
    let converged = verdicts
        .iter()
        .filter(|c| c.verdict == acprop_lab::sweep::Verdict::Converge)
        .count();
    println!("sweep: {}/{} cells converge", converged, verdicts.len());
    writer.finish()
}

fn cmd_trajectory(
    args: TrajectoryArgs,
    file: &FileConfig,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    check_command(file, "trajectory")?;
    let kind: ProblemKind = args
        .problem
        .or_else(|| file.problem.clone())
        .unwrap_or_else(|| "absvalue".into())
        .parse()?;
    let p = args.p.or(file.p).unwrap_or(match kind {
        ProblemKind::Sparse2 => 5,
        _ => 3,
    });
    let delta = args.delta.or(file.delta).unwrap_or(0.1);
    let sigma = args.sigma.or(file.sigma).unwrap_or(1.0);
    let problem = ProblemSpec::from_kind(kind, p, delta, sigma, 1)?;
    let variant: Variant = args
        .optimizer
        .or_else(|| file.optimizer.clone())
        .unwrap_or_else(|| "acprop".into())
        .parse()?;
    let mut hp = HyperParams::new(variant, args.lr.or(file.lr).unwrap_or(1e-2));
    hp.beta1 = args.beta1.or(file.beta1).unwrap_or(hp.beta1);
    hp.beta2 = args.beta2.or(file.beta2).unwrap_or(hp.beta2);
    hp.eps = args.eps.or(file.eps).unwrap_or(hp.eps);
    hp.eta = args.eta.or(file.eta).unwrap_or(hp.eta);
    hp.delay_n = args.delay_n.or(file.delay_n).unwrap_or(hp.delay_n);
    hp.bias_correction = args
        .bias_correction
        .or(file.bias_correction)
        .unwrap_or(hp.bias_correction);
    hp.eps_inside_sqrt = args
        .eps_inside_sqrt
        .or(file.eps_inside_sqrt)
        .unwrap_or(hp.eps_inside_sqrt);
    hp.validate()?;
    let steps = args.steps.or(file.steps).unwrap_or(20_000);
    let stride = args.stride.or(file.stride).unwrap_or(1);
    let x0 = args
        .x0
        .or(file.x0)
        .map(|v| vec![v])
        .unwrap_or_else(|| problem.x0_default.clone());

    let config = serde_json::json!({
        "problem": problem,
        "hp": hp,
        "steps": steps,
        "stride": stride,
        "x0": x0,
    });
    let mut writer =
        OutputWriter::new(out_dir, file.output_dir.as_deref(), "trajectory", seed, config)?;
    let rec = run_trajectory(&hp, &problem, &x0, steps, seed, stride)?;
    let csv = report::trajectory_csv(&rec, seed, &writer.config_json())?;
    writer.write("trajectory.csv", &csv)?;
    writer.write("trajectory.svg", &svg::render_trajectory_svg(&csv)?)?;
    println!(
        "trajectory: {} steps, final x = {}",
        steps, rec.final_x[0]
    );
    writer.finish()
}

fn cmd_limits(
    args: LimitsArgs,
    file: &FileConfig,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    check_command(file, "limits")?;
    let problem = args
        .problem
        .or_else(|| file.problem.clone())
        .unwrap_or_else(|| "periodic1".into());
    let p = args.p.or(file.p).unwrap_or(3);
    let beta1 = args.beta1.or(file.beta1).unwrap_or(0.9);
    let beta2 = args.beta2.or(file.beta2).unwrap_or(0.9);
    let max_periods = args.max_periods.or(file.max_periods).unwrap_or(DEFAULT_MAX_PERIODS);
    let sim_tol = args.sim_tol.or(file.sim_tol).unwrap_or(DEFAULT_SNAPSHOT_TOL);

    let config = serde_json::json!({
        "problem": problem,
        "P": p,
        "beta1": beta1,
        "beta2": beta2,
        "max_periods": max_periods,
        "sim_tol": sim_tol,
    });
    let mut writer = OutputWriter::new(out_dir, file.output_dir.as_deref(), "limits", seed, config)?;

    let row = match problem.as_str() {
        "periodic1" => {
            let m = limit_m_problem1(p, beta1)?;
            let s = limit_s_problem1(p, beta1, beta2)?;
            let orbit = simulate_problem1_orbit(p, beta1, beta2, max_periods, sim_tol)?;
            println!("m limit      = {m}");
            println!("s limit      = {s}");
            println!("m simulated  = {} (|diff| = {:.3e})", orbit.m[0], (m - orbit.m[0]).abs());
            println!("s simulated  = {} (|diff| = {:.3e})", orbit.s[0], (s - orbit.s[0]).abs());
            println!("periods      = {} (converged: {})", orbit.periods_run, orbit.converged);
            report::LimitsRow::problem1(p, beta1, beta2, m, s, &orbit)
        }
        "sparse2" => {
            let rep = limits_problem2(p, beta1, beta2)?;
            let verdict = convergence_ratio_test(&rep, p);
            let orbit = simulate_problem2_orbit(p, beta1, beta2, max_periods, sim_tol)?;
            println!("m limit = {}, v limit = {}, s limit = {}", rep.m_inf, rep.v_inf, rep.s_inf);
            println!(
                "s+/s- = {} ({}), v+/v- = {} ({})",
                verdict.ratio_s,
                if verdict.s_ok { "ok" } else { "fails" },
                verdict.ratio_v,
                if verdict.v_ok { "ok" } else { "fails" }
            );
            println!(
                "sim deltas: m {:.3e}, v {:.3e}, s {:.3e} over {} periods",
                (rep.m_inf - orbit.m[0]).abs(),
                (rep.v_inf - orbit.v[0]).abs(),
                (rep.s_inf - orbit.s[0]).abs(),
                orbit.periods_run
            );
            report::LimitsRow::problem2(&rep, &verdict, &orbit)
        }
        other => {
            return Err(CliError::Usage(format!(
                "limits supports periodic1 or sparse2, not '{other}'"
            )))
        }
    };
    let csv = report::limits_csv(&[row], seed, &writer.config_json());
    writer.write("limits.csv", &csv)?;
    writer.write("limits.svg", &svg::render_limits_svg(&csv)?)?;
    writer.finish()
}

fn cmd_rate(
    args: RateArgs,
    file: &FileConfig,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    check_command(file, "rate")?;
    let variant: Variant = args
        .optimizer
        .or_else(|| file.optimizer.clone())
        .unwrap_or_else(|| "acprop".into())
        .parse()?;
    let mut hp = HyperParams::new(variant, args.lr.or(file.lr).unwrap_or(0.1));
    hp.beta1 = args.beta1.or(file.beta1).unwrap_or(hp.beta1);
    hp.beta2 = args.beta2.or(file.beta2).unwrap_or(hp.beta2);
    // The async first step divides by denom(0) = eps; keep it O(1) here.
    hp.eps = args.eps.or(file.eps).unwrap_or(1.0);
    hp.eta = args.eta.or(file.eta).unwrap_or(hp.eta);
    hp.validate()?;
    let sigma = args.sigma.or(file.sigma).unwrap_or(1.0);
    let dims = args.dims.or(file.dims).unwrap_or(10);
    let t_max = args.t_max.or(file.t_max).unwrap_or(100_000);
    let seeds = args.rate_seeds.or(file.rate_seeds).unwrap_or(5);

    let config = serde_json::json!({
        "hp": hp,
        "sigma": sigma,
        "dims": dims,
        "t_max": t_max,
        "rate_seeds": seeds,
    });
    let mut writer = OutputWriter::new(out_dir, file.output_dir.as_deref(), "rate", seed, config)?;
    let report_data = measure_rate(variant, &hp, sigma, dims, t_max, seeds)?;
    println!(
        "rate: fitted slope {:.4}, C_l {:.4e}, C_u {:.4e}",
        report_data.fitted_slope, report_data.c_l_est, report_data.c_u_est
    );
    let csv = report::rate_csv(&report_data, seed, &writer.config_json());
    writer.write("rate.csv", &csv)?;
    writer.write("rate.svg", &svg::render_rate_svg(&csv)?)?;
    let rate_json = serde_json::json!({
        "schema_version": acprop_lab::SCHEMA_VERSION,
        "generator": acprop_lab::rng::GENERATOR_NAME,
        "seed": seed,
        "config": writer.config,
        "report": report_data,
    });
    writer.write(
        "rate.json",
        &serde_json::to_string_pretty(&rate_json).expect("rate serialization"),
    )?;
    writer.finish()
}

fn cmd_mlp(
    args: MlpArgs,
    file: &FileConfig,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    check_command(file, "mlp")?;
    let variants = parse_variants(
        &args
            .optimizer
            .or_else(|| file.optimizer.clone())
            .unwrap_or_else(|| "acprop,adashift".into()),
    )?;
    let mut cfg = MlpConfig::default();
    cfg.seed = seed;
    cfg.in_dim = args.in_dim.or(file.in_dim).unwrap_or(cfg.in_dim);
    cfg.hidden_dim = args.hidden_dim.or(file.hidden_dim).unwrap_or(cfg.hidden_dim);
    cfg.out_dim = args.out_dim.or(file.out_dim).unwrap_or(cfg.out_dim);
    cfg.n_samples = args.n_samples.or(file.n_samples).unwrap_or(cfg.n_samples);
    cfg.epochs = args.epochs.or(file.epochs).unwrap_or(cfg.epochs);
    cfg.batch = args.batch.or(file.batch).unwrap_or(cfg.batch);
    cfg.hp.alpha0 = args.lr.or(file.lr).unwrap_or(cfg.hp.alpha0);
    cfg.hp.beta1 = args.beta1.or(file.beta1).unwrap_or(cfg.hp.beta1);
    cfg.hp.beta2 = args.beta2.or(file.beta2).unwrap_or(cfg.hp.beta2);
    cfg.hp.eps = args.eps.or(file.eps).unwrap_or(cfg.hp.eps);
    cfg.validate()?;

    let config = serde_json::json!({"mlp": cfg, "optimizers": variants});
    let mut writer = OutputWriter::new(out_dir, file.output_dir.as_deref(), "mlp", seed, config)?;
    let mut traces = Vec::new();
    for &variant in &variants {
        let trace = train_mlp(&cfg, variant)?;
        if trace.diverged {
            println!("mlp: {variant} diverged (loss left the finite range)");
        } else {
            let last = trace.points.last().map(|p| p.loss).unwrap_or(f64::NAN);
            println!("mlp: {variant} final loss {last:.4}");
        }
        traces.push(trace);
    }
    let csv = report::denom_csv(&traces, seed, &writer.config_json());
    writer.write("denom.csv", &csv)?;
    writer.write("denom.svg", &svg::render_denom_svg(&csv)?)?;
    writer.finish()
}

fn cmd_harmonic(
    args: HarmonicArgs,
    file: &FileConfig,
    seed: u64,
    out_dir: Option<PathBuf>,
) -> Result<(), CliError> {
    check_command(file, "harmonic")?;
    let n_values: Vec<u64> = parse_list(
        &args
            .n_values
            .or_else(|| file.n_values.clone())
            .unwrap_or_else(|| "1000,10000,100000,1000000".into()),
        "n_values",
    )?;
    let etas: Vec<f64> = parse_list(
        &args
            .etas
            .or_else(|| file.etas.clone())
            .unwrap_or_else(|| "0.5,0.7,0.9,0.99".into()),
        "etas",
    )?;
    let config = serde_json::json!({"n_values": n_values, "etas": etas});
    let mut writer = OutputWriter::new(out_dir, file.output_dir.as_deref(), "harmonic", seed, config)?;
    let mut checks = Vec::new();
    for &eta in &etas {
        for &n in &n_values {
            let c = harmonic_sum_check(n, eta)?;
            println!(
                "N={:>8} eta={:<5} exact={:.12e} approx={:.12e} abs_err={:.3e} rel_err={:.3e}",
                c.n,
                c.eta,
                c.exact,
                c.approx,
                c.abs_err,
                c.rel_err()
            );
            checks.push(c);
        }
    }
    let csv = report::harmonic_csv(&checks, seed, &writer.config_json());
    writer.write("harmonic.csv", &csv)?;
    writer.write("harmonic.svg", &svg::render_harmonic_svg(&csv)?)?;
    writer.finish()
}
