use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use galbrun_core::background::validate_background;
use galbrun_core::config::{parse_config_with, RunConfig};
use galbrun_core::convergence::convergence_study;
use galbrun_core::error::ConfigIssue;
use galbrun_core::opcheck::check_operators;
use galbrun_core::particles::validate_particles;
use galbrun_core::run::{run_simulation, summary_path, write_summary, CheckResult, ExitStatus, Setup};
use galbrun_core::{Error, Result};

/// In-memory budget for the particle-tracing field history before it
/// spills to temporary snapshot files.
const HISTORY_BUDGET: usize = 512 << 20;

#[derive(Parser)]
#[command(
    name = "galbrun",
    version,
    about = "Linearized Euler runs with Galbrun-equation monitors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct ConfigArgs {
    /// Run configuration file.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Override a key, e.g. `--set grid.nx=64`. Repeatable.
    #[arg(long = "set", value_name = "SECTION.KEY=VALUE")]
    set: Vec<String>,
}

#[derive(Subcommand)]
enum Command {
    /// Check positivity and steady-flow identities of the background.
    ValidateBackground(ConfigArgs),
    /// Run the coupled system, writing the monitor CSV, snapshots and summary.
    Run(ConfigArgs),
    /// Grid-refinement study over the configured levels.
    Convergence(ConfigArgs),
    /// Compare particle displacements against the transported w.
    TraceParticles(ConfigArgs),
    /// Integration by parts, Lie identities and boundary subspace checks.
    CheckOperators(ConfigArgs),
}

fn load(args: &ConfigArgs) -> Result<RunConfig> {
    let text = fs::read_to_string(&args.config).map_err(|e| {
        Error::Config(vec![ConfigIssue {
            key: "--config".into(),
            message: format!("cannot read {}: {e}", args.config.display()),
        }])
    })?;
    parse_config_with(&text, &args.set)
}

fn init_threads() -> Result<()> {
    let Ok(v) = std::env::var("GALBRUN_THREADS") else {
        return Ok(());
    };
    let n = v.trim().parse::<usize>().ok().filter(|&n| n > 0).ok_or_else(|| {
        Error::Config(vec![ConfigIssue {
            key: "GALBRUN_THREADS".into(),
            message: format!("expected a positive integer, got `{v}`"),
        }])
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))
}

fn finish(cfg: &RunConfig, checks: &[CheckResult]) -> Result<ExitStatus> {
    for c in checks {
        println!("{}", c.line());
    }
    write_summary(&summary_path(cfg), checks)
}

fn validate(cfg: &RunConfig) -> Result<ExitStatus> {
    let setup = Setup::new(cfg)?;
    let r = validate_background(&setup.bg, cfg.background_tol)?;
    let b = &r.bounds;
    println!("scenario = {}", cfg.scenario.name());
    println!(
        "rho0 in [{}, {}], c0 in [{}, {}]",
        b.rho_min, b.rho_max, b.c_min, b.c_max
    );
    println!("lambda0 = {:e}", r.lambda0);
    println!("mass_residual = {:e}", r.mass_residual);
    println!("state_residual = {:e}", r.state_residual);
    println!("momentum_residual = {:e}", r.momentum_residual);
    println!("wall_tangency = {:e}", r.wall_tangency);
    println!(
        "derivative_error = {:e} -> {:e} (order {:.3})",
        r.derivative_error, r.derivative_error_fine, r.derivative_order
    );
    for f in &r.failures {
        eprintln!("failure: {f}");
    }
    println!("background = {}", if r.pass { "pass" } else { "fail" });
    Ok(if r.pass {
        ExitStatus::Pass
    } else {
        ExitStatus::CheckFailed
    })
}

fn run(cfg: &RunConfig) -> Result<ExitStatus> {
    let (status, out) = run_simulation(cfg)?;
    let s = &out.stats;
    println!("steps = {}, dt = {:e}", s.nsteps, s.dt);
    if let Some(p) = &s.poisson {
        println!(
            "poisson: {} iterations, residual {:e}",
            p.iterations, p.relative_residual
        );
    }
    for c in &out.checks {
        println!("{}", c.line());
    }
    println!("wrote {}", cfg.output.dir.join(&cfg.output.csv).display());
    Ok(status)
}

fn convergence(cfg: &RunConfig) -> Result<ExitStatus> {
    let table = convergence_study(cfg)?;
    let path = cfg.output.dir.join(&cfg.convergence.csv);
    table.write_csv(&path)?;
    print!("{}", table.to_csv());
    let checks: Vec<_> = table
        .series
        .iter()
        .map(|s| {
            let last = s.orders.last().copied().flatten().unwrap_or(f64::NAN);
            CheckResult::new(format!("order_{}", s.monitor.name()), s.pass, last)
        })
        .collect();
    finish(cfg, &checks)
}

fn trace(cfg: &RunConfig) -> Result<ExitStatus> {
    let r = validate_particles(cfg, HISTORY_BUDGET)?;
    for (e, err) in r.epsilons.iter().zip(&r.errors) {
        println!("epsilon = {e:e}: error = {err:e}");
    }
    let p = &cfg.particles;
    let pass = r.ratios_within(p.ratio_min, p.ratio_max);
    let worst = r
        .ratios
        .iter()
        .copied()
        .max_by(|a, b| (a - 2.0).abs().total_cmp(&(b - 2.0).abs()))
        .unwrap_or(f64::NAN);
    finish(cfg, &[CheckResult::new("particle_ratio", pass, worst)])
}

fn operators(cfg: &RunConfig) -> Result<ExitStatus> {
    let r = check_operators(cfg)?;
    let checks = [
        CheckResult::new("ibp", r.ibp_pass, r.ibp_max),
        CheckResult::new("lie_identities", r.lie_pass, r.lie_orders.0.min(r.lie_orders.1)),
        CheckResult::new("boundary_subspaces", r.subspace_pass, r.subspace_max),
    ];
    finish(cfg, &checks)
}

fn dispatch(cli: &Cli) -> Result<ExitStatus> {
    init_threads()?;
    let (args, f): (_, fn(&RunConfig) -> Result<ExitStatus>) = match &cli.command {
        Command::ValidateBackground(a) => (a, validate),
        Command::Run(a) => (a, run),
        Command::Convergence(a) => (a, convergence),
        Command::TraceParticles(a) => (a, trace),
        Command::CheckOperators(a) => (a, operators),
    };
    f(&load(args)?)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let status = dispatch(&cli).unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitStatus::from_error(&e)
    });
    ExitCode::from(status.code() as u8)
}
