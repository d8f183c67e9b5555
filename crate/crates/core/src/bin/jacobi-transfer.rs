use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand, ValueEnum};

use jacobi_transfer::io;
use jacobi_transfer::planner::{reconstruct_states, Backend};
use jacobi_transfer::scenario::{self, Mode, Scenario, SolutionReport, BUNDLED};
use jacobi_transfer::Error;

/// Worker-count override for the planner's thread pool.
const THREADS_ENV: &str = "JACOBI_TRANSFER_THREADS";

#[derive(Parser)]
#[command(version, about = "Minimum-delta-v two-impulse phase-free orbit transfers via Jacobi-metric geodesics")]
struct Cli {
    /// Log search progress to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan the minimum-delta-v transfer of a scenario and write a JSON report.
    Solve {
        /// Scenario file, or the name of a bundled scenario.
        #[arg(long)]
        scenario: String,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long, value_enum, default_value_t = ModeArg::CoarseToFine)]
        mode: ModeArg,
        #[arg(long)]
        seed: Option<u64>,
        /// Report path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export the optimal delta-v over an N x N division of both orbits as a CSV
    /// grid, closing row and column included, plus a JSON sidecar.
    Contour {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        resolution: usize,
        /// Grid CSV path; the sidecar is written next to it with a .json extension.
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample time, position and velocity along a solved transfer.
    Trajectory {
        /// Report written by `solve`.
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// CSV path; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the bundled scenarios, or print one as JSON.
    Scenarios {
        #[arg(long)]
        show: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Ellipse,
    Heatflow,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    CoarseToFine,
    RefineOnly,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let empty = e.chain().any(|c| matches!(c.downcast_ref::<Error>(), Some(Error::EmptyResult)));
            ExitCode::from(if empty { 2 } else { 1 })
        }
    }
}

fn configure_threads() -> anyhow::Result<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else { return Ok(()) };
    let n: usize = v.trim().parse().ok().filter(|&n| n > 0).with_context(|| {
        format!("{THREADS_ENV} must be a positive integer, got {v:?}")
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn emit(out: Option<&Path>, text: &str) -> anyhow::Result<()> {
    match out {
        Some(p) => io::write_atomic(p, text.as_bytes())?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cmd: Command) -> anyhow::Result<()> {
    configure_threads()?;
    match cmd {
        Command::Solve { scenario, backend, mode, seed, out } => {
            let mut s = Scenario::resolve(&scenario)?;
            if let Some(b) = backend {
                s.planner.backend = match b {
                    BackendArg::Ellipse => Backend::Ellipse,
                    BackendArg::Heatflow => Backend::Heatflow,
                };
            }
            if let Some(seed) = seed {
                s.planner.seed = seed;
            }
            let mode = match mode {
                ModeArg::CoarseToFine => Mode::CoarseToFine,
                ModeArg::RefineOnly => Mode::RefineOnly,
            };
            let report = scenario::solve(&s, mode)?;
            eprintln!(
                "{}: total dv {:.6} km/s (dv0 {:.6}, dvf {:.6}), tof {:.1} s, {:.1} s wall",
                report.scenario,
                report.total_dv,
                report.dv0.norm(),
                report.dvf.norm(),
                report.tof,
                report.diagnostics.wall_time_s
            );
            emit(out.as_deref(), &io::to_json(&report)?)
        }
        Command::Contour { scenario, resolution, out } => {
            let s = Scenario::resolve(&scenario)?;
            let (grid, meta) = scenario::contour(&s, resolution)?;
            io::write_atomic(&out, io::grid_to_csv(&grid.values)?.as_bytes())?;
            let sidecar = out.with_extension("json");
            if sidecar == out {
                bail!("grid output must not use the .json extension");
            }
            io::write_json(&sidecar, &meta)?;
            match meta.minimum_dv {
                Some(m) => eprintln!("{}: grid minimum {m:.6} km/s, {} near-optimal regions", meta.scenario, meta.near_optimal_regions),
                None => eprintln!("{}: no feasible cell", meta.scenario),
            }
            Ok(())
        }
        Command::Trajectory { solution, n, out } => {
            let report: SolutionReport = io::read_json(&solution)?;
            if report.solution.curve.is_none() {
                bail!("{}: report holds no transfer curve", solution.display());
            }
            let traj = reconstruct_states(&report.model, &report.solution, n)?;
            emit(out.as_deref(), &io::trajectory_to_csv(&traj)?)
        }
        Command::Scenarios { show } => {
            match show {
                Some(name) => {
                    let s = Scenario::bundled(&name).with_context(|| format!("no bundled scenario {name:?}"))?;
                    print!("{}", io::to_json(&s)?);
                }
                None => {
                    for (name, _) in BUNDLED {
                        let s = Scenario::bundled(name).expect("bundled");
                        println!("{name:<18} {}", s.description);
                    }
                }
            }
            Ok(())
        }
    }
}
