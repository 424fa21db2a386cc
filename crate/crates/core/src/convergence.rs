//! Grid-refinement study: runs the configured case on nested grids with
//! halved time steps and reports observed orders per monitor.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::config::RunConfig;
use crate::error::ConfigIssue;
use crate::run::{simulate, RunStats, Setup, SimOptions};
use crate::{Error, Result};

/// Error measures a study can target.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Monitor {
    /// Relative L2 error of `δρ̂` against the standing-wave oracle at the horizon.
    SolutionError,
    /// Max drift of `‖h‖_{ρ0}` relative to `‖δρ̂_I‖`.
    HDrift,
    GalbrunFormDiff,
    GalbrunPrimary,
    EnergyResidual,
}

impl Monitor {
    pub const ALL: [Monitor; 5] = [
        Monitor::SolutionError,
        Monitor::HDrift,
        Monitor::GalbrunFormDiff,
        Monitor::GalbrunPrimary,
        Monitor::EnergyResidual,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Monitor::SolutionError => "solution_error",
            Monitor::HDrift => "h_drift",
            Monitor::GalbrunFormDiff => "galbrun_form_diff",
            Monitor::GalbrunPrimary => "galbrun_primary",
            Monitor::EnergyResidual => "energy_residual",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Expected order for operator order `p`.
    pub fn nominal_order(self, p: usize) -> f64 {
        match self {
            Monitor::SolutionError => p as f64,
            Monitor::HDrift | Monitor::GalbrunFormDiff | Monitor::GalbrunPrimary => p.min(2) as f64,
            Monitor::EnergyResidual => 2.0,
        }
    }

    /// The solution error must also not exceed the nominal order by more
    /// than the slack; the residual monitors only have a lower bound.
    pub fn two_sided(self) -> bool {
        self == Monitor::SolutionError
    }

    fn value(self, stats: &RunStats) -> Result<f64> {
        Ok(match self {
            Monitor::SolutionError => stats.oracle_error.ok_or_else(|| {
                Error::Config(vec![ConfigIssue {
                    key: "convergence.monitors".into(),
                    message: "solution_error needs the standing-wave oracle case".into(),
                }])
            })?,
            Monitor::HDrift => stats.max_h_drift,
            Monitor::GalbrunFormDiff => stats.max_galbrun_diff,
            Monitor::GalbrunPrimary => stats.max_galbrun_primary,
            Monitor::EnergyResidual => stats.max_energy_residual,
        })
    }
}

/// One refinement level of a study.
#[derive(Debug, Clone, PartialEq)]
pub struct Level {
    pub nx: usize,
    pub ny: usize,
    pub dt: f64,
    pub nsteps: usize,
}

/// Errors and observed orders of one monitor across the levels.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorSeries {
    pub monitor: Monitor,
    pub nominal: f64,
    pub errors: Vec<f64>,
    /// `log2(e_k / e_{k+1})`; `None` when both errors sit at the roundoff floor.
    pub orders: Vec<Option<f64>>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub levels: Vec<Level>,
    pub series: Vec<MonitorSeries>,
}

impl ConvergenceTable {
    pub fn pass(&self) -> bool {
        self.series.iter().all(|s| s.pass)
    }

    pub fn series(&self, m: Monitor) -> Option<&MonitorSeries> {
        self.series.iter().find(|s| s.monitor == m)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("monitor,nominal_order,nx,ny,dt,error,observed_order\n");
        for s in &self.series {
            for (k, l) in self.levels.iter().enumerate() {
                let order = match k.checked_sub(1).and_then(|i| s.orders[i]) {
                    Some(o) => format!("{o:.6}"),
                    None => String::new(),
                };
                let _ = writeln!(
                    out,
                    "{},{},{},{},{:.16e},{:.16e},{}",
                    s.monitor.name(),
                    s.nominal,
                    l.nx,
                    l.ny,
                    l.dt,
                    s.errors[k],
                    order
                );
            }
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }
}

fn levels_issue(message: String) -> Error {
    Error::Config(vec![ConfigIssue {
        key: "convergence.levels".into(),
        message,
    }])
}

/// Checks that each level halves both spacings of the previous one.
pub fn check_nested(levels: &[(usize, usize)]) -> Result<()> {
    if levels.len() < 3 {
        return Err(levels_issue(format!(
            "need at least 3 levels, got {}",
            levels.len()
        )));
    }
    for w in levels.windows(2) {
        let ((nx0, ny0), (nx1, ny1)) = (w[0], w[1]);
        if nx1 != 2 * nx0 || ny1 < 2 || ny1 - 1 != 2 * (ny0 - 1) {
            return Err(levels_issue(format!(
                "levels {nx0}x{ny0} and {nx1}x{ny1} are not nested (need nx -> 2nx, ny -> 2(ny-1)+1)"
            )));
        }
    }
    Ok(())
}

/// `log2(coarse / fine)`, with errors at or below `floor` treated as exact.
///
/// Two exact errors give `None`; a coarse error above the floor with an
/// exact fine error counts as infinitely fast convergence.
pub fn observed_order(coarse: f64, fine: f64, floor: f64) -> Option<f64> {
    match (coarse <= floor, fine <= floor) {
        (true, true) => None,
        (false, true) => Some(f64::INFINITY),
        _ => Some((coarse / fine).log2()),
    }
}

/// Decides a series on its finest pair of levels, where the asymptotic
/// regime is best resolved.
pub fn series_passes(orders: &[Option<f64>], nominal: f64, slack: f64, two_sided: bool) -> bool {
    match orders.last() {
        None => false,
        Some(None) => true,
        Some(Some(o)) if o.is_nan() => false,
        Some(Some(o)) => *o >= nominal - slack && (!two_sided || *o <= nominal + slack || o.is_infinite()),
    }
}

/// Runs the configured case on every level of `cfg.convergence.levels`.
///
/// The coarsest level takes its planned step; level `k` uses `dt_0 / 2^k`
/// and records monitors every `cadence * 2^k` steps so all levels sample the
/// same times.
pub fn convergence_study(cfg: &RunConfig) -> Result<ConvergenceTable> {
    let conv = &cfg.convergence;
    check_nested(&conv.levels)?;
    let monitors = conv
        .monitors
        .iter()
        .map(|m| {
            Monitor::from_name(m).ok_or_else(|| {
                Error::Config(vec![ConfigIssue {
                    key: "convergence.monitors".into(),
                    message: format!("unknown monitor `{m}`"),
                }])
            })
        })
        .collect::<Result<Vec<_>>>()?;
    if monitors.is_empty() {
        return Err(Error::Config(vec![ConfigIssue {
            key: "convergence.monitors".into(),
            message: "no monitors selected".into(),
        }]));
    }

    let mut levels = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); monitors.len()];
    let mut dt0 = None;
    for (k, &(nx, ny)) in conv.levels.iter().enumerate() {
        let mut c = cfg.clone();
        c.nx = nx;
        c.ny = ny;
        c.output.cadence = cfg.output.cadence << k;
        let dt = match dt0 {
            None => {
                let (_, dt) = Setup::new(&c)?.plan(&c);
                dt0 = Some(dt);
                dt
            }
            Some(d) => d / (1u64 << k) as f64,
        };
        let out = simulate(
            &c,
            &SimOptions {
                dt: Some(dt),
                write_outputs: false,
            },
            |_, _| Ok(()),
        )?;
        for (m, v) in monitors.iter().zip(values.iter_mut()) {
            v.push(m.value(&out.stats)?);
        }
        levels.push(Level {
            nx,
            ny,
            dt,
            nsteps: out.stats.nsteps,
        });
    }

    let p = cfg.order.p();
    let series = monitors
        .iter()
        .zip(values)
        .map(|(&m, errors)| {
            let orders: Vec<_> = errors
                .windows(2)
                .map(|w| observed_order(w[0], w[1], conv.roundoff_floor))
                .collect();
            let nominal = m.nominal_order(p);
            let pass = series_passes(&orders, nominal, conv.order_slack, m.two_sided());
            MonitorSeries {
                monitor: m,
                nominal,
                errors,
                orders,
                pass,
            }
        })
        .collect();
    Ok(ConvergenceTable { levels, series })
}
