use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use blindcal::harness::{
    run_sweep_with_progress, run_timing_bench_with_progress, write_bench_csv, write_csv, write_heatmap, BenchSpec, Grid,
    HeatmapOptions, SweepSpec,
};
use blindcal::metrics::{grid_coords, verdict};
use blindcal::model::{delta_cf, generate_instance, ratio_to_f64, read_instance, write_instance, GeneratorConfig};
use blindcal::solvers::{self, ClosedFormMode, Diagnostic, SolveResult, SolverConfig, SolverKind};
use clap::{Args, Parser, Subcommand, ValueEnum};

const EXIT_USAGE: u8 = 2;
const EXIT_NOT_CONVERGED: u8 = 3;
const EXIT_IO: u8 = 4;

#[derive(Parser)]
#[command(name = "blindcal", version, about = "Blind sensor gain calibration for compressive sensing")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic instance.
    Gen(GenArgs),
    /// Run one solver on an instance file.
    Solve(SolveArgs),
    /// Phase-transition sweep over a (delta, rho) grid.
    Sweep(SweepArgs),
    /// Per-iteration timing against the number of signals.
    Bench(BenchArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    n: usize,
    #[arg(long)]
    m: usize,
    #[arg(long)]
    l: usize,
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pc: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Omit the true signals and gains from the file.
    #[arg(long)]
    no_truth: bool,
}

/// Solver settings; explicit flags override the JSON config file.
#[derive(Args)]
struct SolverFlags {
    /// JSON file with solver settings.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Initial ADMM penalty.
    #[arg(long)]
    penalty: Option<f64>,
    /// Keep the penalty fixed.
    #[arg(long)]
    fixed_penalty: bool,
    #[arg(long)]
    tol_abs: Option<f64>,
    #[arg(long)]
    tol_rel: Option<f64>,
    #[arg(long)]
    max_iter: Option<usize>,
    /// Gain sum constant (defaults to the sensor count).
    #[arg(long)]
    sum: Option<f64>,
}

impl SolverFlags {
    fn resolve(&self) -> anyhow::Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?
            }
            None => SolverConfig::default(),
        };
        if let Some(v) = self.penalty {
            cfg.rho = v;
        }
        if self.fixed_penalty {
            cfg.adaptive_penalty = false;
        }
        if let Some(v) = self.tol_abs {
            cfg.tol_abs = v;
        }
        if let Some(v) = self.tol_rel {
            cfg.tol_rel = v;
        }
        if let Some(v) = self.max_iter {
            cfg.max_iter = v;
        }
        if let Some(v) = self.sum {
            cfg.c = Some(v);
        }
        cfg.validate().map_err(usage)?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Amplitude,
    Complete,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, value_parser = parse_solver)]
    solver: SolverKind,
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Gain system used by the closed-form solver.
    #[arg(long, value_enum, default_value = "amplitude")]
    mode: Mode,
    #[command(flatten)]
    solver_flags: SolverFlags,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long, value_parser = parse_solver)]
    solver: SolverKind,
    #[arg(long)]
    n: usize,
    #[arg(long)]
    l: usize,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 0.0)]
    pc: f64,
    /// start:step:end, inclusive of end when the step divides the span.
    #[arg(long, value_parser = parse_grid)]
    delta_grid: Grid,
    #[arg(long, value_parser = parse_grid)]
    rho_grid: Grid,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, env = "BLINDCAL_JOBS")]
    jobs: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Binary PGM of the success rates.
    #[arg(long)]
    heatmap: Option<PathBuf>,
    /// Axis values for the heatmap.
    #[arg(long, requires = "heatmap")]
    ticks: Option<PathBuf>,
    /// Two-column (delta, rho) curve drawn into the SVG.
    #[arg(long, requires_all = ["heatmap", "svg"])]
    overlay: Option<PathBuf>,
    #[arg(long, requires = "overlay")]
    svg: Option<PathBuf>,
    /// Record mean wall time per cell (not reproducible).
    #[arg(long)]
    wall_time: bool,
    #[arg(long)]
    quiet: bool,
    #[command(flatten)]
    solver_flags: SolverFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Comma-separated solver names.
    #[arg(long, value_delimiter = ',', value_parser = parse_solver, default_value = "pcal,pcal-s")]
    solvers: Vec<SolverKind>,
    #[arg(long, value_delimiter = ',', default_value = "2,4,8")]
    l_list: Vec<usize>,
    #[arg(long, default_value_t = 32)]
    n: usize,
    #[arg(long, default_value_t = 0.8)]
    delta: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 0.0)]
    sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    pc: f64,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// ADMM iterations per timed solve.
    #[arg(long, default_value_t = 50)]
    max_iter: usize,
    #[arg(long)]
    out: PathBuf,
}

fn parse_solver(s: &str) -> Result<SolverKind, String> {
    s.parse::<SolverKind>().map_err(|e| e.to_string())
}

fn parse_grid(s: &str) -> Result<Grid, String> {
    s.parse::<Grid>().map_err(|e| e.to_string())
}

/// Error carrying an explicit exit code.
#[derive(Debug)]
struct Exit {
    code: u8,
    message: String,
}

impl std::fmt::Display for Exit {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Exit {}

fn usage(e: impl std::fmt::Display) -> anyhow::Error {
    Exit {
        code: EXIT_USAGE,
        message: e.to_string(),
    }
    .into()
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<Exit>() {
            return e.code;
        }
        if cause.is::<std::io::Error>() {
            return EXIT_IO;
        }
        if let Some(blindcal::Error::Io(_)) = cause.downcast_ref::<blindcal::Error>() {
            return EXIT_IO;
        }
    }
    EXIT_USAGE
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_USAGE } else { 0 });
        }
    };
    let outcome = match cli.command {
        Command::Gen(args) => cmd_gen(&args),
        Command::Solve(args) => cmd_solve(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Bench(args) => cmd_bench(&args),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> anyhow::Result<()> {
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

fn cmd_gen(args: &GenArgs) -> anyhow::Result<u8> {
    let cfg = GeneratorConfig {
        n: args.n,
        m: args.m,
        l: args.l,
        k: args.k,
        sigma: args.sigma,
        pc: args.pc,
        seed: args.seed,
    };
    cfg.validate().map_err(usage)?;
    let inst = generate_instance(&cfg).map_err(usage)?;
    write_instance(&args.out, &inst, !args.no_truth).with_context(|| format!("writing {}", args.out.display()))?;
    let coords = grid_coords(args.m as u64, args.n as u64, args.k as u64).map_err(usage)?;
    let cf = match delta_cf(args.n as u64, args.l as u64) {
        Ok(r) => format!("{}", ratio_to_f64(r)),
        Err(_) => "undefined".to_string(),
    };
    println!(
        "delta={} ({}/{}) rho={} ({}/{}) delta_cf={cf}",
        coords.delta_f64(),
        args.m,
        args.n,
        coords.rho_f64(),
        args.k,
        args.m
    );
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> anyhow::Result<u8> {
    let cfg = args.solver_flags.resolve()?;
    let file = match read_instance(&args.instance) {
        Ok(f) => f,
        Err(blindcal::Error::Io(e)) => {
            return Err(anyhow::Error::new(e).context(format!("reading {}", args.instance.display())))
        }
        Err(e) => return Err(usage(format!("{}: {e}", args.instance.display()))),
    };
    let (y, sensing) = (&file.measurements, &file.sensing);
    let result: SolveResult = match (args.solver, args.mode) {
        (SolverKind::ClosedForm, Mode::Complete) => solvers::solve_closed_form(y, sensing, &cfg, ClosedFormMode::Complete),
        (kind, _) => solvers::solve(kind, y, sensing, &cfg),
    }
    .map_err(usage)?;
    for d in &result.diagnostics {
        if let Diagnostic::DelegatedToFull { l } = d {
            eprintln!("note: {} with l={l} runs the full lifted program", args.solver);
        }
    }
    write_file(&args.out, result.to_json().map_err(usage)?)?;

    match &file.signals {
        Some(truth) => {
            let v = verdict(truth, &result.signals_hat).map_err(usage)?;
            for (l, mu) in v.per_column_mu.iter().enumerate() {
                println!("column {l}: mu={mu}");
            }
            println!("mean_mu={} perfect={}", v.mean_mu, v.perfect);
        }
        None => println!("no ground truth in instance"),
    }
    println!(
        "converged={} iterations={} constraint_residual={:e}",
        result.converged, result.iterations, result.constraint_residual
    );
    Ok(if result.converged { 0 } else { EXIT_NOT_CONVERGED })
}

fn default_jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn cmd_sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let spec = SweepSpec {
        solver: args.solver,
        n: args.n,
        l: args.l,
        sigma: args.sigma,
        pc: args.pc,
        delta: args.delta_grid,
        rho: args.rho_grid,
        trials: args.trials,
        seed: args.seed,
        config: args.solver_flags.resolve()?,
        jobs: args.jobs.unwrap_or_else(default_jobs),
        wall_time: args.wall_time,
    };
    spec.validate().map_err(usage)?;
    let quiet = args.quiet;
    let results = run_sweep_with_progress(&spec, |done, total| {
        if !quiet {
            eprint!("\r{done}/{total} trials");
            if done == total {
                eprintln!();
            }
        }
    })
    .map_err(usage)?;
    for cell in &results {
        for f in &cell.failures {
            eprintln!(
                "warning: delta={} rho={} trial {} (seed {}): {}",
                cell.delta, cell.rho, f.trial, f.seed, f.reason
            );
        }
    }
    write_csv(&results, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(pgm) = &args.heatmap {
        let hash = spec.hash();
        let overlay = args.overlay.as_deref().zip(args.svg.as_deref());
        let opts = HeatmapOptions {
            sweep_hash: &hash,
            ticks: args.ticks.as_deref(),
            overlay,
        };
        write_heatmap(&results, pgm, &opts).with_context(|| format!("writing {}", pgm.display()))?;
    }
    Ok(0)
}

fn cmd_bench(args: &BenchArgs) -> anyhow::Result<u8> {
    let spec = BenchSpec {
        solvers: args.solvers.clone(),
        l_values: args.l_list.clone(),
        n: args.n,
        delta: args.delta,
        rho: args.rho,
        sigma: args.sigma,
        pc: args.pc,
        trials: args.trials,
        seed: args.seed,
        max_iter: args.max_iter,
    };
    spec.validate().map_err(usage)?;
    let results = run_timing_bench_with_progress(&spec, |solver, l, ms| match ms {
        Some(ms) => println!("{solver} l={l} per_iteration_ms={ms}"),
        None => println!("{solver} l={l} no timed runs"),
    })
    .map_err(usage)?;
    for r in &results {
        for w in &r.warnings {
            eprintln!("warning: {w}");
        }
        match (r.slope, r.fit_residual) {
            (Some(s), Some(res)) => println!("{} slope={s} fit_residual={res}", r.solver),
            _ => println!("{} slope=undefined", r.solver),
        }
    }
    write_bench_csv(&results, args.n, &args.out).with_context(|| format!("writing {}", args.out.display()))?;
    if results.iter().any(|r| r.slope.is_none()) {
        bail!(Exit {
            code: EXIT_USAGE,
            message: "slope undefined for some solver".into(),
        });
    }
    Ok(0)
}
