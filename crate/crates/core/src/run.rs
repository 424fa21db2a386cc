//! Orchestration of a coupled run: setup from a `RunConfig`, time stepping,
//! monitor CSV, snapshots, checks and `summary.txt`.

use std::fs;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::background::{build_scenario, growth_rate_nu, lambda0_estimate, BackgroundFlow, Scenario};
use crate::config::{AdmittanceSpec, Check, DensityInit, RunConfig, WMode};
use crate::diagnostics::{BoundConstants, MonitorRecord, RunHistory, CSV_HEADER};
use crate::displacement::{initial_displacement, CoupledState, CoupledSystem, PoissonReport};
use crate::error::{Error, Result};
use crate::euler::{max_time_step, periodic_offset, plan_steps, BoundarySpec, EulerState, EulerSystem};
use crate::mesh::{weighted_norm_rows, write_snapshot, Grid2D, ScalarField, VectorField};
use crate::operators::DiffOperators;
use crate::oracle::StandingWave;

/// Process exit status of a CLI command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExitStatus {
    Pass = 0,
    CheckFailed = 1,
    ConfigError = 2,
    RuntimeAbort = 3,
}

impl ExitStatus {
    pub fn code(self) -> i32 {
        self as i32
    }

    /// Config errors map to 2, everything else raised during a run to 3.
    pub fn from_error(e: &Error) -> Self {
        match e {
            Error::Config(_) | Error::Cfl { .. } => ExitStatus::ConfigError,
            _ => ExitStatus::RuntimeAbort,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub pass: bool,
    pub value: f64,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, pass: bool, value: f64) -> Self {
        Self {
            name: name.into(),
            pass,
            value,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} = {} ({:e})",
            self.name,
            if self.pass { "pass" } else { "fail" },
            self.value
        )
    }
}

/// Writes `summary.txt` lines and returns the exit status they imply.
pub fn write_summary(path: &Path, checks: &[CheckResult]) -> Result<ExitStatus> {
    let mut text = String::new();
    for c in checks {
        text.push_str(&c.line());
        text.push('\n');
    }
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(if checks.iter().all(|c| c.pass) {
        ExitStatus::Pass
    } else {
        ExitStatus::CheckFailed
    })
}

/// Everything a run needs, built from a `RunConfig`.
pub struct Setup {
    pub grid: Arc<Grid2D>,
    pub bg: BackgroundFlow,
    pub op: DiffOperators,
    pub spec: BoundarySpec,
}

impl Setup {
    pub fn new(cfg: &RunConfig) -> Result<Self> {
        let grid = Grid2D::new(cfg.nx, cfg.ny, cfg.lx, cfg.ly, cfg.order)?;
        let bg = build_scenario(&grid, cfg.scenario.clone())?;
        let op = DiffOperators::new(&grid);
        let spec = match &cfg.admittance {
            AdmittanceSpec::Constant(y) => BoundarySpec::uniform(&grid, *y, cfg.datum.clone())?,
            AdmittanceSpec::Table { lower, upper } => {
                BoundarySpec::from_profiles(lower.clone(), upper.clone(), cfg.datum.clone())?
            }
        }
        .with_sigma(cfg.sigma);
        Ok(Self { grid, bg, op, spec })
    }

    pub fn constants(&self, cfg: &RunConfig) -> Result<BoundConstants> {
        Ok(BoundConstants {
            lambda0: lambda0_estimate(&self.bg),
            nu: growth_rate_nu(&self.bg, cfg.tau0)?,
            c: self.bg.condition_constant(),
            a: self.spec.a,
            tau0: cfg.tau0,
            horizon: cfg.horizon,
            c0_max: self.bg.bounds.c_max,
        })
    }

    /// Step count and step size for the configured CFL number.
    pub fn plan(&self, cfg: &RunConfig) -> (usize, f64) {
        plan_steps(cfg.horizon, max_time_step(&self.bg, cfg.cfl))
    }

    /// The standing-wave reference, when the configuration admits one.
    pub fn oracle(&self, cfg: &RunConfig) -> Option<StandingWave> {
        match (&cfg.scenario, cfg.initial.drho) {
            (Scenario::QuiescentUniform { c, .. }, DensityInit::StandingWave { m, n }) => {
                Some(StandingWave {
                    amplitude: cfg.initial.amplitude,
                    m,
                    n,
                    c: *c,
                    lx: cfg.lx,
                    ly: cfg.ly,
                })
            }
            _ => None,
        }
    }

    /// Initial `(δu, δρ̂, w)`; the Poisson report is present for `w_mode = poisson`.
    pub fn initial_state(&self, cfg: &RunConfig) -> Result<(CoupledState, Option<PoissonReport>)> {
        let ic = &cfg.initial;
        let (cx, cy, r2) = (ic.centre[0], ic.centre[1], ic.radius * ic.radius);
        let lx = cfg.lx;
        let env = move |x: f64, y: f64| {
            let ox = periodic_offset(x - cx, lx);
            (-(ox * ox + (y - cy) * (y - cy)) / r2).exp()
        };
        let g = &self.grid;
        let drho_hat = match ic.drho {
            DensityInit::Zero => ScalarField::zeros(g),
            DensityInit::Gaussian => ScalarField::from_fn(g, |x, y| ic.amplitude * env(x, y)),
            DensityInit::StandingWave { m, n } => {
                let sw = StandingWave {
                    amplitude: ic.amplitude,
                    m,
                    n,
                    c: 1.0,
                    lx: cfg.lx,
                    ly: cfg.ly,
                };
                ScalarField::from_fn(g, |x, y| sw.drho_hat(x, y, 0.0))
            }
        };
        let du = VectorField::from_fn(g, |x, y| {
            let e = env(x, y);
            [ic.du[0] * e, ic.du[1] * e]
        });
        let xi = EulerState { du, drho_hat, t: 0.0 };
        xi.check_finite()?;
        let (w, report) = match ic.w_mode {
            WMode::Zero => (VectorField::zeros(g), None),
            WMode::Explicit => (
                VectorField::from_fn(g, |x, y| {
                    let e = env(x, y);
                    [ic.w[0] * e, ic.w[1] * e]
                }),
                None,
            ),
            WMode::Poisson => {
                let (d, rep) = initial_displacement(
                    &self.bg,
                    &self.op,
                    &xi.density(&self.bg),
                    cfg.tau0,
                    ic.poisson_tol,
                )?;
                (d.w, Some(rep))
            }
        };
        let s = CoupledState { xi, w };
        s.check_finite()?;
        Ok((s, report))
    }
}

/// Knobs for `simulate` beyond the configuration.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Fixed step size; must satisfy the CFL limit. Defaults to the planned step.
    pub dt: Option<f64>,
    /// Write CSV and snapshots to the configured output directory.
    pub write_outputs: bool,
}

/// Scalar outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub nsteps: usize,
    pub dt: f64,
    pub poisson: Option<PoissonReport>,
    /// `‖h_I‖_{ρ0} / ‖δρ_I‖` over the non-wall rows.
    pub h_ratio: f64,
    pub max_h_drift: f64,
    pub max_energy_increase_rel: f64,
    pub max_energy_residual: f64,
    pub max_galbrun_primary: f64,
    pub max_galbrun_diff: f64,
    pub min_mild_slack: f64,
    pub min_galbrun_slack: f64,
    pub oracle_error: Option<f64>,
    pub lambda0: f64,
    pub nu: f64,
}

pub struct RunOutcome {
    pub records: Vec<MonitorRecord>,
    pub stats: RunStats,
    pub checks: Vec<CheckResult>,
    pub final_state: CoupledState,
}

fn snapshot_fields(s: &CoupledState) -> [(&'static str, &[f64]); 5] {
    [
        ("du_x", &s.xi.du.x),
        ("du_y", &s.xi.du.y),
        ("drho_hat", s.xi.drho_hat.values()),
        ("w_x", &s.w.x),
        ("w_y", &s.w.y),
    ]
}

pub fn write_state_snapshot(path: &Path, s: &CoupledState) -> Result<()> {
    write_snapshot(path, s.xi.grid(), s.t(), &snapshot_fields(s))
}

/// Runs the coupled system, calling `observe(n, state)` after every step
/// (and once for the initial state with `n = 0`).
pub fn simulate(
    cfg: &RunConfig,
    opts: &SimOptions,
    mut observe: impl FnMut(usize, &CoupledState) -> Result<()>,
) -> Result<RunOutcome> {
    let setup = Setup::new(cfg)?;
    let (nsteps, dt) = match opts.dt {
        None => setup.plan(cfg),
        Some(dt) => {
            crate::euler::check_cfl(&setup.bg, dt, cfg.cfl)?;
            let n = (cfg.horizon / dt).round() as usize;
            (n.max(1), dt)
        }
    };
    let consts = setup.constants(cfg)?;
    let (state0, poisson) = setup.initial_state(cfg)?;
    let sys = CoupledSystem {
        euler: EulerSystem::new(&setup.bg, &setup.op, &setup.spec, &cfg.forcing)?,
    };
    let mut hist = RunHistory::new(
        &setup.bg,
        &setup.op,
        &setup.spec,
        &cfg.forcing,
        consts,
        dt,
        cfg.output.cadence,
    );

    let out_dir = &cfg.output.dir;
    let mut csv = None;
    if opts.write_outputs {
        fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
        let path = out_dir.join(&cfg.output.csv);
        let f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut w = BufWriter::new(f);
        writeln!(w, "{CSV_HEADER}").map_err(|e| Error::io(&path, e))?;
        csv = Some((w, path));
    }
    let mut pending: Vec<(usize, f64)> = cfg.output.snapshot_times.iter().copied().enumerate().collect();
    let mut take_snapshots = |s: &CoupledState| -> Result<()> {
        if !opts.write_outputs {
            return Ok(());
        }
        let mut keep = Vec::new();
        for (k, ts) in pending.drain(..) {
            if s.t() >= ts - 0.5 * dt {
                write_state_snapshot(&out_dir.join(format!("snapshot_{k}.snap")), s)?;
            } else {
                keep.push((k, ts));
            }
        }
        pending = keep;
        Ok(())
    };

    let grid = &setup.grid;
    let one = ScalarField::constant(grid, 1.0);
    let drho_norm = weighted_norm_rows(&state0.xi.density(&setup.bg), &one, grid.interior_rows(1))?;
    let mut s = state0;
    hist.push(0, &s)?;
    observe(0, &s)?;
    take_snapshots(&s)?;
    for n in 1..=nsteps {
        let next = match sys.step(&s, dt) {
            Ok(next) => next,
            Err(e) => {
                if opts.write_outputs {
                    write_state_snapshot(&out_dir.join("last_good.snap"), &s)?;
                }
                return Err(e);
            }
        };
        s = next;
        if let Some(rec) = hist.push(n, &s)? {
            if let Some((w, path)) = csv.as_mut() {
                writeln!(w, "{}", rec.csv_row()).map_err(|e| Error::io(&*path, e))?;
            }
        }
        observe(n, &s)?;
        take_snapshots(&s)?;
    }
    if let Some((mut w, path)) = csv {
        w.flush().map_err(|e| Error::io(&path, e))?;
    }

    let h_ratio = if drho_norm > 0.0 {
        hist.h0() / drho_norm
    } else {
        hist.h0()
    };
    let oracle_error = match setup.oracle(cfg) {
        Some(sw) => Some(sw.relative_error(&s.xi.drho_hat, s.t())?),
        None => None,
    };
    let e0 = hist.e_acoustic0;
    let stats = RunStats {
        nsteps,
        dt,
        poisson,
        h_ratio,
        max_h_drift: hist.max_h_drift,
        max_energy_increase_rel: if e0 > 0.0 {
            hist.max_energy_increase / e0
        } else {
            hist.max_energy_increase
        },
        max_energy_residual: hist.max_energy_residual,
        max_galbrun_primary: hist.max_galbrun_primary,
        max_galbrun_diff: hist.max_galbrun_diff,
        min_mild_slack: hist.min_mild_slack,
        min_galbrun_slack: hist.min_galbrun_slack,
        oracle_error,
        lambda0: consts.lambda0,
        nu: consts.nu,
    };

    let mut checks = Vec::new();
    let thr = cfg.checks.slack_threshold;
    for check in &cfg.checks.enforce {
        let r = match check {
            Check::MildBound => CheckResult::new(
                check.name(),
                hist.bound_check_mild(thr),
                finite_or_zero(stats.min_mild_slack),
            ),
            Check::GalbrunBound => CheckResult::new(
                check.name(),
                hist.bound_check_galbrun(thr)?,
                finite_or_zero(stats.min_galbrun_slack),
            ),
            Check::Dissipativity => CheckResult::new(
                check.name(),
                stats.max_energy_increase_rel <= cfg.checks.dissipativity_tol,
                stats.max_energy_increase_rel,
            ),
            Check::HInvariant => {
                CheckResult::new(check.name(), stats.h_ratio <= cfg.checks.h_tol, stats.h_ratio)
            }
            Check::OracleError => {
                let e = stats.oracle_error.unwrap_or(f64::INFINITY);
                CheckResult::new(check.name(), e <= cfg.checks.oracle_tol, e)
            }
        };
        checks.push(r);
    }
    Ok(RunOutcome {
        records: hist.records.clone(),
        stats,
        checks,
        final_state: s,
    })
}

fn finite_or_zero(v: f64) -> f64 {
    if v.is_finite() {
        v
    } else {
        0.0
    }
}

/// `run` command: simulate with outputs, write `summary.txt`, map to an exit status.
pub fn run_simulation(cfg: &RunConfig) -> Result<(ExitStatus, RunOutcome)> {
    let outcome = simulate(
        cfg,
        &SimOptions {
            dt: None,
            write_outputs: true,
        },
        |_, _| Ok(()),
    )?;
    let status = write_summary(&summary_path(cfg), &outcome.checks)?;
    Ok((status, outcome))
}

pub fn summary_path(cfg: &RunConfig) -> PathBuf {
    cfg.output.dir.join("summary.txt")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(extra: &str, dir: &Path) -> RunConfig {
        parse_config(&format!(
            "[scenario]\nname = quiescent-uniform\n[grid]\nnx = 16\nny = 9\n[time]\nhorizon = 0.2\n\
             [output]\ndir = {}\n{extra}",
            dir.display()
        ))
        .unwrap()
    }

    #[test]
    fn zero_data_run_is_silent_and_passes() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            "[checks]\nenforce = mild_bound, dissipativity, h_invariant\n[initial]\ndrho = zero\n",
            dir.path(),
        );
        let (status, out) = run_simulation(&c).unwrap();
        assert_eq!(status, ExitStatus::Pass);
        assert!(!out.records.is_empty());
        for r in &out.records {
            let v = r.values();
            assert!(v[1..].iter().all(|&x| x == 0.0), "{v:?}");
        }
        let summary = fs::read_to_string(dir.path().join("summary.txt")).unwrap();
        assert_eq!(summary.lines().count(), 3);
        assert!(summary.lines().all(|l| l.contains("= pass (")));
        let csv = fs::read_to_string(dir.path().join("monitor.csv")).unwrap();
        assert_eq!(csv.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(csv.lines().count(), out.records.len() + 1);
    }

    #[test]
    fn nan_initial_data_names_the_field() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg("[initial]\ndrho = gaussian\namplitude = NaN\n", dir.path());
        let err = run_simulation(&c).err().unwrap();
        assert_eq!(ExitStatus::from_error(&err), ExitStatus::RuntimeAbort);
        match err {
            Error::NonFinite { field, .. } => assert_eq!(field, "drho_hat"),
            e => panic!("{e}"),
        }
    }

    #[test]
    fn snapshots_at_requested_times() {
        let dir = tempfile::tempdir().unwrap();
        let c = cfg(
            "[initial]\ndrho = gaussian\n[output]\nsnapshot_times = 0, 0.1\n",
            dir.path(),
        );
        let (_, out) = run_simulation(&c).unwrap();
        let s0 = crate::mesh::read_snapshot(&dir.path().join("snapshot_0.snap")).unwrap();
        assert_eq!(s0.time, 0.0);
        let s1 = crate::mesh::read_snapshot(&dir.path().join("snapshot_1.snap")).unwrap();
        assert!((s1.time - 0.1).abs() <= 0.5 * out.stats.dt);
        assert_eq!(s1.fields.len(), 5);
    }
}
