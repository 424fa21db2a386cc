//! Run configuration: a flat `[section]` / `key = value` text format.
//!
//! Lines starting with `#` are comments, lists are comma separated. Every
//! problem found while reading a document is collected into one
//! [`Error::Config`] naming the offending keys.

use std::collections::BTreeMap;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use crate::background::Scenario;
use crate::error::{ConfigIssue, Error, Result};
use crate::euler::{BoundaryDatum, Forcing, Wall};
use crate::operators::Order;

/// Admittance on the two walls.
#[derive(Debug, Clone, PartialEq)]
pub enum AdmittanceSpec {
    Constant(f64),
    /// One value per x node on each wall.
    Table {
        lower: Vec<f64>,
        upper: Vec<f64>,
    },
}

impl AdmittanceSpec {
    /// Lower bound `a` over both walls.
    pub fn min(&self) -> f64 {
        match self {
            AdmittanceSpec::Constant(y) => *y,
            AdmittanceSpec::Table { lower, upper } => {
                lower.iter().chain(upper).copied().fold(f64::INFINITY, f64::min)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DensityInit {
    Zero,
    /// `amplitude exp(-(ox² + (y - cy)²)/radius²)`, `ox` the periodic x offset.
    Gaussian,
    /// `amplitude cos(2π m x/Lx) cos(n π y/Ly)`.
    StandingWave {
        m: u32,
        n: u32,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WMode {
    Poisson,
    Zero,
    /// `(w_x, w_y)` times the Gaussian envelope.
    Explicit,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InitialConfig {
    pub drho: DensityInit,
    pub amplitude: f64,
    pub centre: [f64; 2],
    pub radius: f64,
    /// Amplitudes of a Gaussian velocity bump, zero for none.
    pub du: [f64; 2],
    pub w_mode: WMode,
    pub w: [f64; 2],
    pub poisson_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Check {
    MildBound,
    GalbrunBound,
    Dissipativity,
    HInvariant,
    OracleError,
}

impl Check {
    pub const ALL: [Check; 5] = [
        Check::MildBound,
        Check::GalbrunBound,
        Check::Dissipativity,
        Check::HInvariant,
        Check::OracleError,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Check::MildBound => "mild_bound",
            Check::GalbrunBound => "galbrun_bound",
            Check::Dissipativity => "dissipativity",
            Check::HInvariant => "h_invariant",
            Check::OracleError => "oracle_error",
        }
    }
}

impl fmt::Display for Check {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Check {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Check::ALL.into_iter().find(|c| c.name() == s).ok_or_else(|| {
            let names: Vec<_> = Check::ALL.iter().map(|c| c.name()).collect();
            format!("unknown check `{s}`, expected one of {}", names.join(", "))
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChecksConfig {
    pub enforce: Vec<Check>,
    pub slack_threshold: f64,
    /// Allowed per-step increase of `E_acoustic`, relative to its initial value.
    pub dissipativity_tol: f64,
    /// Bound on `‖h_I‖_{ρ0} / ‖δρ_I‖`.
    pub h_tol: f64,
    /// Bound on the relative L2 error of `δρ̂` against the standing-wave oracle.
    pub oracle_tol: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub csv: String,
    pub cadence: usize,
    pub snapshot_times: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParticleConfig {
    pub epsilons: Vec<f64>,
    pub seeds: Vec<[f64; 2]>,
    pub ratio_min: f64,
    pub ratio_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub levels: Vec<(usize, usize)>,
    pub monitors: Vec<String>,
    /// Allowed shortfall of an observed order below its nominal value.
    pub order_slack: f64,
    /// Errors at or below this are treated as exact.
    pub roundoff_floor: f64,
    pub csv: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorCheckConfig {
    pub seed: u64,
    pub samples: usize,
    pub ibp_tol: f64,
    pub subspace_tol: f64,
}

/// Fully validated run configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: Scenario,
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub order: Order,
    pub cfl: f64,
    pub tau0: f64,
    pub horizon: f64,
    pub admittance: AdmittanceSpec,
    pub sigma: f64,
    pub datum: BoundaryDatum,
    pub forcing: Forcing,
    pub initial: InitialConfig,
    pub output: OutputConfig,
    pub checks: ChecksConfig,
    pub particles: ParticleConfig,
    pub convergence: ConvergenceConfig,
    pub background_tol: f64,
    pub operators: OperatorCheckConfig,
}

pub const MAX_ADMITTANCE: f64 = 1e6;

const CONVERGENCE_MONITORS: [&str; 5] = [
    "solution_error",
    "h_drift",
    "galbrun_form_diff",
    "galbrun_primary",
    "energy_residual",
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
    used: bool,
}

/// Raw `section.key → value` document.
#[derive(Debug, Clone, Default)]
pub struct Document {
    entries: BTreeMap<String, Entry>,
    issues: Vec<ConfigIssue>,
}

fn issue(key: impl Into<String>, message: impl Into<String>) -> ConfigIssue {
    ConfigIssue {
        key: key.into(),
        message: message.into(),
    }
}

impl Document {
    pub fn parse(text: &str) -> Self {
        let mut doc = Document::default();
        let mut section: Option<String> = None;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = match raw.find('#') {
                Some(p) => &raw[..p],
                None => raw,
            }
            .trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                match rest.strip_suffix(']') {
                    Some(name) if !name.trim().is_empty() => section = Some(name.trim().to_string()),
                    _ => doc.issues.push(issue(
                        format!("line {line_no}"),
                        format!("malformed section header `{line}`"),
                    )),
                }
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                doc.issues.push(issue(
                    format!("line {line_no}"),
                    format!("expected `key = value`, got `{line}`"),
                ));
                continue;
            };
            let k = k.trim();
            let Some(sec) = &section else {
                doc.issues
                    .push(issue(k, format!("line {line_no}: key outside any [section]")));
                continue;
            };
            let full = format!("{sec}.{k}");
            if let Some(prev) = doc.entries.get(&full) {
                doc.issues.push(issue(
                    &full,
                    format!("line {line_no}: duplicate key (first set on line {})", prev.line),
                ));
                continue;
            }
            doc.entries.insert(
                full,
                Entry {
                    value: v.trim().to_string(),
                    line: line_no,
                    used: false,
                },
            );
        }
        doc
    }

    /// Applies a `section.key=value` override.
    pub fn set(&mut self, assignment: &str) {
        match assignment.split_once('=') {
            Some((k, v)) if k.trim().contains('.') => {
                self.entries.insert(
                    k.trim().to_string(),
                    Entry {
                        value: v.trim().to_string(),
                        line: 0,
                        used: false,
                    },
                );
            }
            _ => self
                .issues
                .push(issue(assignment, "override must look like `section.key=value`")),
        }
    }

    fn raw(&mut self, key: &str) -> Option<String> {
        self.entries.get_mut(key).map(|e| {
            e.used = true;
            e.value.clone()
        })
    }

    fn get<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        match self.raw(key) {
            None => default,
            Some(v) => match v.parse::<T>() {
                Ok(x) => x,
                Err(e) => {
                    self.issues.push(issue(key, format!("cannot parse `{v}`: {e}")));
                    default
                }
            },
        }
    }

    fn required<T: FromStr>(&mut self, key: &str, default: T) -> T
    where
        T::Err: fmt::Display,
    {
        if !self.entries.contains_key(key) {
            self.issues.push(issue(key, "required key is missing"));
            return default;
        }
        self.get(key, default)
    }

    fn list<T: FromStr>(&mut self, key: &str, default: Vec<T>) -> Vec<T>
    where
        T::Err: fmt::Display,
    {
        let Some(v) = self.raw(key) else {
            return default;
        };
        let mut out = Vec::new();
        for item in v.split(',').map(str::trim).filter(|s| !s.is_empty()) {
            match item.parse::<T>() {
                Ok(x) => out.push(x),
                Err(e) => {
                    self.issues
                        .push(issue(key, format!("cannot parse list item `{item}`: {e}")));
                    return default;
                }
            }
        }
        out
    }

    fn choice(&mut self, key: &str, default: &str, allowed: &[&str]) -> String {
        let v = self.get(key, default.to_string());
        if allowed.contains(&v.as_str()) {
            v
        } else {
            self.issues
                .push(issue(key, format!("`{v}` is not one of {}", allowed.join(", "))));
            default.to_string()
        }
    }

    fn check(&mut self, key: &str, ok: bool, message: impl Into<String>) {
        if !ok {
            self.issues.push(issue(key, message));
        }
    }

    fn finish(mut self) -> Result<()> {
        for (k, e) in &self.entries {
            if !e.used {
                let at = if e.line > 0 {
                    format!("line {}: ", e.line)
                } else {
                    "override: ".to_string()
                };
                self.issues.push(issue(k, format!("{at}unknown key")));
            }
        }
        if self.issues.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(self.issues))
        }
    }

    /// Validates the document into a `RunConfig`.
    pub fn into_config(mut self) -> Result<RunConfig> {
        let d = &mut self;

        // scenario
        let name = d.choice("scenario.name", "quiescent-uniform", &Scenario::NAMES);
        let mut params = BTreeMap::new();
        let prefix = "scenario.";
        let keys: Vec<String> = d
            .entries
            .keys()
            .filter(|k| k.starts_with(prefix) && *k != "scenario.name")
            .cloned()
            .collect();
        let allowed = Scenario::param_names(&name);
        for k in keys {
            let short = &k[prefix.len()..];
            if allowed.contains(&short) {
                let v: f64 = d.get(&k, f64::NAN);
                params.insert(short.to_string(), v);
            }
        }
        let scenario = match Scenario::from_params(&name, &params) {
            Ok(s) => s,
            Err(e) => {
                d.issues.push(issue("scenario", e.to_string()));
                Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }
            }
        };

        // grid and time
        let nx: usize = d.required("grid.nx", 32);
        let ny: usize = d.required("grid.ny", 17);
        d.check("grid.nx", nx >= 8, format!("need nx >= 8, got {nx}"));
        d.check("grid.ny", ny >= 8, format!("need ny >= 8, got {ny}"));
        let lx: f64 = d.get("grid.lx", 1.0);
        let ly: f64 = d.get("grid.ly", 1.0);
        d.check("grid.lx", lx > 0.0 && lx.is_finite(), "must be positive");
        d.check("grid.ly", ly > 0.0 && ly.is_finite(), "must be positive");
        let p: usize = d.get("grid.p", 2);
        let order = Order::from_p(p).unwrap_or_else(|| {
            d.issues
                .push(issue("grid.p", format!("order must be 2 or 4, got {p}")));
            Order::Second
        });
        if order == Order::Fourth {
            d.check("grid.ny", ny >= 16, "fourth-order closures need ny >= 16");
        }
        let cfl: f64 = d.get("time.cfl", 0.4);
        d.check(
            "time.cfl",
            cfl > 0.0 && cfl < 1.0,
            format!("cfl = {cfl} outside the admissible interval (0, 1)"),
        );
        let horizon: f64 = d.required("time.horizon", 1.0);
        d.check(
            "time.horizon",
            horizon > 0.0 && horizon.is_finite(),
            "must be positive",
        );
        let tau0: f64 = d.get("time.tau0", 1.0);
        d.check("time.tau0", tau0 > 0.0 && tau0.is_finite(), "must be positive");

        // boundary
        let admittance = if d.entries.contains_key("boundary.admittance_lower")
            || d.entries.contains_key("boundary.admittance_upper")
        {
            let lower: Vec<f64> = d.list("boundary.admittance_lower", vec![]);
            let upper: Vec<f64> = d.list("boundary.admittance_upper", vec![]);
            d.check(
                "boundary.admittance",
                !d.entries.contains_key("boundary.admittance"),
                "give either a constant admittance or per-wall tables, not both",
            );
            d.check(
                "boundary.admittance_lower",
                lower.len() == nx,
                format!("needs {nx} values, got {}", lower.len()),
            );
            d.check(
                "boundary.admittance_upper",
                upper.len() == nx,
                format!("needs {nx} values, got {}", upper.len()),
            );
            AdmittanceSpec::Table { lower, upper }
        } else {
            AdmittanceSpec::Constant(d.get("boundary.admittance", 0.0))
        };
        let (ymin, ymax) = match &admittance {
            AdmittanceSpec::Constant(y) => (*y, *y),
            AdmittanceSpec::Table { lower, upper } => lower
                .iter()
                .chain(upper)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| {
                    (a.min(v), b.max(v))
                }),
        };
        d.check(
            "boundary.admittance",
            ymin >= 0.0 && ymax <= MAX_ADMITTANCE,
            format!("admittance must lie in [0, {MAX_ADMITTANCE:e}], got range [{ymin}, {ymax}]"),
        );
        let sigma: f64 = d.get("boundary.sigma", 1.0);
        d.check(
            "boundary.sigma",
            sigma >= 0.5 && sigma.is_finite(),
            format!("penalty strength must be >= 0.5, got {sigma}"),
        );
        let g_kind = d.choice("boundary.g", "zero", &["zero", "harmonic"]);
        let datum = if g_kind == "harmonic" {
            let amplitude: f64 = d.required("boundary.g_amplitude", 0.0);
            let mode: u32 = d.get("boundary.g_mode", 1);
            let omega: f64 = d.required("boundary.g_omega", 0.0);
            let wall = match d.choice("boundary.g_wall", "lower", &["lower", "upper"]).as_str() {
                "upper" => Wall::Upper,
                _ => Wall::Lower,
            };
            d.check("boundary.g_amplitude", amplitude.is_finite(), "must be finite");
            d.check("boundary.g_omega", omega.is_finite(), "must be finite");
            BoundaryDatum::Harmonic {
                amplitude,
                mode,
                omega,
                wall,
            }
        } else {
            BoundaryDatum::Zero
        };

        // forcing
        let f_kind = d.choice("forcing.kind", "zero", &["zero", "constant", "gaussian"]);
        let forcing = match f_kind.as_str() {
            "constant" => Forcing::Constant([d.get("forcing.fx", 0.0), d.get("forcing.fy", 0.0)]),
            "gaussian" => {
                let radius: f64 = d.get("forcing.radius", 0.1);
                let width: f64 = d.get("forcing.width", 0.1);
                d.check("forcing.radius", radius > 0.0, "must be positive");
                d.check("forcing.width", width > 0.0, "must be positive");
                Forcing::GaussianPulse {
                    amplitude: [d.get("forcing.fx", 0.0), d.get("forcing.fy", 0.0)],
                    centre: [
                        d.get("forcing.centre_x", 0.5 * lx),
                        d.get("forcing.centre_y", 0.5 * ly),
                    ],
                    radius,
                    t0: d.get("forcing.t0", 0.0),
                    width,
                    freq: d.get("forcing.freq", 0.0),
                }
            }
            _ => Forcing::Zero,
        };

        // initial data
        let drho_kind = d.choice("initial.drho", "zero", &["zero", "gaussian", "standing-wave"]);
        let drho = match drho_kind.as_str() {
            "gaussian" => DensityInit::Gaussian,
            "standing-wave" => {
                let m: u32 = d.get("initial.mode_x", 1);
                let n: u32 = d.get("initial.mode_y", 1);
                DensityInit::StandingWave { m, n }
            }
            _ => DensityInit::Zero,
        };
        let radius: f64 = d.get("initial.radius", 0.2);
        d.check("initial.radius", radius > 0.0, "must be positive");
        let w_mode = match d
            .choice("initial.w_mode", "poisson", &["poisson", "zero", "explicit"])
            .as_str()
        {
            "zero" => WMode::Zero,
            "explicit" => WMode::Explicit,
            _ => WMode::Poisson,
        };
        let poisson_tol: f64 = d.get("initial.poisson_tol", 1e-10);
        d.check(
            "initial.poisson_tol",
            poisson_tol > 0.0 && poisson_tol < 1.0,
            "must lie in (0, 1)",
        );
        let initial = InitialConfig {
            drho,
            // not range-checked: a non-finite amplitude is caught by the run
            amplitude: d.get("initial.amplitude", 1.0),
            centre: [
                d.get("initial.centre_x", 0.5 * lx),
                d.get("initial.centre_y", 0.5 * ly),
            ],
            radius,
            du: [d.get("initial.du_x", 0.0), d.get("initial.du_y", 0.0)],
            w_mode,
            w: [d.get("initial.w_x", 0.0), d.get("initial.w_y", 0.0)],
            poisson_tol,
        };

        // output
        let cadence: usize = d.get("output.cadence", 1);
        d.check("output.cadence", cadence >= 1, "must be at least 1");
        let snapshot_times: Vec<f64> = d.list("output.snapshot_times", vec![]);
        for t in &snapshot_times {
            d.check(
                "output.snapshot_times",
                *t >= 0.0 && *t <= horizon,
                format!("time {t} outside [0, horizon]"),
            );
        }
        let output = OutputConfig {
            dir: PathBuf::from(d.get("output.dir", "galbrun-out".to_string())),
            csv: d.get("output.csv", "monitor.csv".to_string()),
            cadence,
            snapshot_times,
        };

        // checks
        let enforce: Vec<Check> = d.list("checks.enforce", vec![]);
        let checks = ChecksConfig {
            slack_threshold: d.get("checks.slack_threshold", -0.05),
            dissipativity_tol: d.get("checks.dissipativity_tol", 1e-12),
            h_tol: d.get("checks.h_tol", 1e-9),
            oracle_tol: d.get("checks.oracle_tol", 1e-2),
            enforce,
        };
        if checks.enforce.contains(&Check::GalbrunBound) {
            d.check(
                "boundary.admittance",
                admittance.min() > 0.0,
                "the galbrun_bound check needs an admittance lower bound a > 0",
            );
        }
        if checks.enforce.contains(&Check::MildBound) {
            d.check(
                "boundary.g",
                datum.is_zero(),
                "the mild_bound check covers homogeneous wall data only; use g = zero",
            );
        }
        if checks.enforce.contains(&Check::OracleError) {
            d.check(
                "checks.enforce",
                matches!(scenario, Scenario::QuiescentUniform { .. })
                    && matches!(drho, DensityInit::StandingWave { .. })
                    && ymax == 0.0
                    && datum.is_zero()
                    && forcing.is_zero()
                    && initial.du == [0.0, 0.0],
                "oracle_error needs quiescent-uniform, a standing-wave start, hard walls and no forcing",
            );
        }

        // particles
        let epsilons: Vec<f64> = d.list("particles.epsilons", vec![1e-2, 5e-3]);
        for e in &epsilons {
            d.check("particles.epsilons", *e > 0.0, "must be positive");
        }
        let seeds_raw = d.raw("particles.seeds");
        let mut seeds = Vec::new();
        if let Some(s) = seeds_raw {
            for pair in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
                let xy: Vec<Option<f64>> = pair.split_whitespace().map(|v| v.parse().ok()).collect();
                match xy.as_slice() {
                    [Some(x), Some(y)] if *y > 0.0 && *y < ly => seeds.push([*x, *y]),
                    _ => d.issues.push(issue(
                        "particles.seeds",
                        format!("seed `{pair}` must be `x y` with 0 < y < Ly"),
                    )),
                }
            }
        } else {
            seeds.push([0.5 * lx, 0.5 * ly]);
        }
        let particles = ParticleConfig {
            epsilons,
            seeds,
            ratio_min: d.get("particles.ratio_min", 1.7),
            ratio_max: d.get("particles.ratio_max", 2.3),
        };

        // convergence
        let levels_raw: Vec<String> = d.list(
            "convergence.levels",
            vec!["32x17".into(), "64x33".into(), "128x65".into(), "256x129".into()],
        );
        let mut levels = Vec::new();
        for l in &levels_raw {
            match l
                .split_once('x')
                .map(|(a, b)| (a.trim().parse(), b.trim().parse()))
            {
                Some((Ok(a), Ok(b))) => levels.push((a, b)),
                _ => d.issues.push(issue(
                    "convergence.levels",
                    format!("level `{l}` must look like `NXxNY`"),
                )),
            }
        }
        let monitors: Vec<String> = d.list(
            "convergence.monitors",
            vec![
                "h_drift".into(),
                "galbrun_form_diff".into(),
                "galbrun_primary".into(),
            ],
        );
        for m in &monitors {
            d.check(
                "convergence.monitors",
                CONVERGENCE_MONITORS.contains(&m.as_str()),
                format!(
                    "unknown monitor `{m}`, expected one of {}",
                    CONVERGENCE_MONITORS.join(", ")
                ),
            );
        }
        let convergence = ConvergenceConfig {
            levels,
            monitors,
            order_slack: d.get("convergence.order_slack", 0.2),
            roundoff_floor: d.get("convergence.roundoff_floor", 1e-12),
            csv: d.get("convergence.csv", "convergence.csv".to_string()),
        };

        let background_tol: f64 = d.get("background.tol", 1e-3);
        let operators = OperatorCheckConfig {
            seed: d.get("operators.seed", 1),
            samples: d.get("operators.samples", 100),
            ibp_tol: d.get("operators.ibp_tol", 1e-12),
            subspace_tol: d.get("operators.subspace_tol", 1e-13),
        };

        let cfg = RunConfig {
            scenario,
            nx,
            ny,
            lx,
            ly,
            order,
            cfl,
            tau0,
            horizon,
            admittance,
            sigma,
            datum,
            forcing,
            initial,
            output,
            checks,
            particles,
            convergence,
            background_tol,
            operators,
        };
        self.finish()?;
        Ok(cfg)
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    Document::parse(text).into_config()
}

/// As `parse_config`, then applies `section.key=value` overrides first.
pub fn parse_config_with(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let mut doc = Document::parse(text);
    for o in overrides {
        doc.set(o);
    }
    doc.into_config()
}
