//! Particle-path validation of the displacement field.
//!
//! Paths of the perturbed flow `Ẋ = u0(X) + ε δu(X, t)` and of the background
//! flow `Ẋ0 = u0(X0)` start at the same seeds; `(X - X0)/ε` should match the
//! transported `w(X0, t)` up to `O(ε)`.

use std::sync::Arc;

use tempfile::TempDir;

use crate::background::BackgroundFlow;
use crate::config::{RunConfig, WMode};
use crate::displacement::CoupledState;
use crate::error::{ConfigIssue, Error, Result};
use crate::mesh::{read_snapshot, write_snapshot, Field, Grid2D, ScalarField, VectorField};
use crate::run::{simulate, Setup, SimOptions};

/// Bilinear interpolation of node values, periodic in x, clamped in y.
pub fn bilinear(grid: &Grid2D, values: &[f64], x: f64, y: f64) -> f64 {
    let (nx, ny) = (grid.nx(), grid.ny());
    let sx = (x / grid.dx()).rem_euclid(nx as f64);
    let i0 = (sx.floor() as usize).min(nx - 1);
    let fx = sx - i0 as f64;
    let i1 = (i0 + 1) % nx;
    let sy = (y / grid.dy()).clamp(0.0, (ny - 1) as f64);
    let j0 = (sy.floor() as usize).min(ny - 2);
    let fy = sy - j0 as f64;
    let v = |i: usize, j: usize| values[j * nx + i];
    (1.0 - fy) * ((1.0 - fx) * v(i0, j0) + fx * v(i1, j0))
        + fy * ((1.0 - fx) * v(i0, j0 + 1) + fx * v(i1, j0 + 1))
}

fn sample(v: &VectorField, x: f64, y: f64) -> [f64; 2] {
    let g = v.grid();
    [bilinear(g, &v.x, x, y), bilinear(g, &v.y, x, y)]
}

#[derive(Debug, Clone)]
struct Level {
    du: VectorField,
    w: VectorField,
}

enum Store {
    Memory(Vec<Level>),
    Disk { dir: TempDir, count: usize },
}

/// `δu` and `w` at equally spaced time levels, kept in memory while they fit
/// the budget and streamed to temporary snapshot files otherwise.
pub struct FieldHistory {
    grid: Arc<Grid2D>,
    dt: f64,
    budget: usize,
    store: Store,
}

impl FieldHistory {
    /// `budget` is the in-memory limit in bytes.
    pub fn new(grid: &Arc<Grid2D>, dt: f64, budget: usize) -> Self {
        Self {
            grid: grid.clone(),
            dt,
            budget,
            store: Store::Memory(Vec::new()),
        }
    }

    fn level_bytes(&self) -> usize {
        4 * self.grid.len() * std::mem::size_of::<f64>()
    }

    pub fn len(&self) -> usize {
        match &self.store {
            Store::Memory(v) => v.len(),
            Store::Disk { count, .. } => *count,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn is_streaming(&self) -> bool {
        matches!(self.store, Store::Disk { .. })
    }

    fn path(dir: &TempDir, n: usize) -> std::path::PathBuf {
        dir.path().join(format!("level_{n}.snap"))
    }

    fn write_level(&self, dir: &TempDir, n: usize, l: &Level) -> Result<()> {
        write_snapshot(
            &Self::path(dir, n),
            &self.grid,
            n as f64 * self.dt,
            &[
                ("du_x", &l.du.x),
                ("du_y", &l.du.y),
                ("w_x", &l.w.x),
                ("w_y", &l.w.y),
            ],
        )
    }

    pub fn push(&mut self, s: &CoupledState) -> Result<()> {
        let level = Level {
            du: s.xi.du.clone(),
            w: s.w.clone(),
        };
        let over = (self.len() + 1) * self.level_bytes() > self.budget;
        if let Store::Memory(levels) = &mut self.store {
            if !over {
                levels.push(level);
                return Ok(());
            }
            let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
            let old = std::mem::take(levels);
            for (n, l) in old.iter().enumerate() {
                self.write_level(&dir, n, l)?;
            }
            self.store = Store::Disk {
                dir,
                count: old.len(),
            };
        }
        let Store::Disk { dir, count } = &self.store else {
            unreachable!()
        };
        let n = *count;
        self.write_level(dir, n, &level)?;
        if let Store::Disk { count, .. } = &mut self.store {
            *count += 1;
        }
        Ok(())
    }

    fn level(&self, n: usize) -> Result<Level> {
        match &self.store {
            Store::Memory(v) => v
                .get(n)
                .cloned()
                .ok_or_else(|| Error::InsufficientHistory(format!("level {n} of {}", v.len()))),
            Store::Disk { dir, count } => {
                if n >= *count {
                    return Err(Error::InsufficientHistory(format!("level {n} of {count}")));
                }
                let snap = read_snapshot(&Self::path(dir, n))?;
                let field = |name: &str| -> Result<Vec<f64>> {
                    snap.fields
                        .iter()
                        .find(|(k, _)| k == name)
                        .map(|(_, v)| v.clone())
                        .ok_or_else(|| Error::Snapshot(format!("missing field {name}")))
                };
                let vf = |a: Vec<f64>, b: Vec<f64>| -> Result<VectorField> {
                    VectorField::from_components(
                        ScalarField::from_values(&self.grid, a)?,
                        ScalarField::from_values(&self.grid, b)?,
                    )
                };
                Ok(Level {
                    du: vf(field("du_x")?, field("du_y")?)?,
                    w: vf(field("w_x")?, field("w_y")?)?,
                })
            }
        }
    }
}

/// Paths and displacement samples for one amplitude `ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleSet {
    pub epsilon: f64,
    pub seeds: Vec<[f64; 2]>,
    /// `X(p_k, t_n)` indexed `[n][k]`.
    pub paths: Vec<Vec<[f64; 2]>>,
    /// `X0(p_k, t_n)`.
    pub base_paths: Vec<Vec<[f64; 2]>>,
    /// `W(p_k, t_n) = X - X0`.
    pub displacement: Vec<Vec<[f64; 2]>>,
    /// `max |W/ε - w(X0, t)|` over seeds and levels.
    pub error: f64,
}

fn advance(bg: &BackgroundFlow, a: &Level, b: &Level, eps: f64, dt: f64, p: [f64; 2]) -> [f64; 2] {
    let vel = |q: [f64; 2], theta: f64| {
        let u0 = sample(&bg.u0, q[0], q[1]);
        if eps == 0.0 {
            return u0;
        }
        let da = sample(&a.du, q[0], q[1]);
        let db = sample(&b.du, q[0], q[1]);
        [
            u0[0] + eps * ((1.0 - theta) * da[0] + theta * db[0]),
            u0[1] + eps * ((1.0 - theta) * da[1] + theta * db[1]),
        ]
    };
    let add = |q: [f64; 2], k: [f64; 2], s: f64| [q[0] + s * k[0], q[1] + s * k[1]];
    let k1 = vel(p, 0.0);
    let k2 = vel(add(p, k1, 0.5 * dt), 0.5);
    let k3 = vel(add(p, k2, 0.5 * dt), 0.5);
    let k4 = vel(add(p, k3, dt), 1.0);
    [
        p[0] + dt / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        p[1] + dt / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Integrates perturbed and background paths from each seed through the
/// stored history and compares `W/ε` with the stored `w` at `X0`.
pub fn trace_particles(
    bg: &BackgroundFlow,
    history: &FieldHistory,
    epsilon: f64,
    seeds: &[[f64; 2]],
) -> Result<ParticleSet> {
    if history.len() < 2 {
        return Err(Error::InsufficientHistory(format!(
            "particle tracing needs at least two stored levels, have {}",
            history.len()
        )));
    }
    if !(epsilon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "epsilon must be positive, got {epsilon}"
        )));
    }
    let grid = history.grid.clone();
    let (ly, half) = (grid.ly(), 0.5 * grid.dy());
    let dt = history.dt;
    let mut x = seeds.to_vec();
    let mut x0 = seeds.to_vec();
    let mut paths = vec![x.clone()];
    let mut base_paths = vec![x0.clone()];
    let mut displacement = vec![vec![[0.0; 2]; seeds.len()]];
    let mut error: f64 = 0.0;
    let mut a = history.level(0)?;
    for n in 0..history.len() - 1 {
        let b = history.level(n + 1)?;
        let t = (n + 1) as f64 * dt;
        let mut w_row = Vec::with_capacity(seeds.len());
        for k in 0..seeds.len() {
            x[k] = advance(bg, &a, &b, epsilon, dt, x[k]);
            x0[k] = advance(bg, &a, &b, 0.0, dt, x0[k]);
            for y in [x[k][1], x0[k][1]] {
                if y < -half || y > ly + half {
                    return Err(Error::ParticleEscaped { seed: k, y, t });
                }
            }
            let w = [x[k][0] - x0[k][0], x[k][1] - x0[k][1]];
            let ws = sample(&b.w, x0[k][0], x0[k][1]);
            let d = (w[0] / epsilon - ws[0]).hypot(w[1] / epsilon - ws[1]);
            error = error.max(d);
            w_row.push(w);
        }
        paths.push(x.clone());
        base_paths.push(x0.clone());
        displacement.push(w_row);
        a = b;
    }
    Ok(ParticleSet {
        epsilon,
        seeds: seeds.to_vec(),
        paths,
        base_paths,
        displacement,
        error,
    })
}

/// Errors for each amplitude and the ratios of consecutive errors.
#[derive(Debug, Clone, PartialEq)]
pub struct ParticleReport {
    pub epsilons: Vec<f64>,
    pub errors: Vec<f64>,
    pub ratios: Vec<f64>,
}

pub fn particle_study(
    bg: &BackgroundFlow,
    history: &FieldHistory,
    epsilons: &[f64],
    seeds: &[[f64; 2]],
) -> Result<ParticleReport> {
    let mut errors = Vec::new();
    for &e in epsilons {
        errors.push(trace_particles(bg, history, e, seeds)?.error);
    }
    let ratios = errors.windows(2).map(|p| p[0] / p[1]).collect();
    Ok(ParticleReport {
        epsilons: epsilons.to_vec(),
        errors,
        ratios,
    })
}

impl ParticleReport {
    /// Every consecutive ratio lies in `[lo, hi]`.
    pub fn ratios_within(&self, lo: f64, hi: f64) -> bool {
        !self.ratios.is_empty() && self.ratios.iter().all(|r| (lo..=hi).contains(r))
    }
}

/// Runs the configured case with `w_I = 0`, keeps every step of `δu` and `w`
/// (streaming to disk beyond `budget_bytes`) and traces the configured seeds
/// for each amplitude.
pub fn validate_particles(cfg: &RunConfig, budget_bytes: usize) -> Result<ParticleReport> {
    let mut issues = Vec::new();
    if cfg.initial.w_mode != WMode::Zero {
        issues.push(ConfigIssue {
            key: "initial.w_mode".into(),
            message: "particle tracing compares against w with w(0) = 0; set w_mode = zero".into(),
        });
    }
    if cfg.particles.epsilons.len() < 2 {
        issues.push(ConfigIssue {
            key: "particles.epsilons".into(),
            message: "need at least two amplitudes".into(),
        });
    }
    if cfg.particles.seeds.is_empty() {
        issues.push(ConfigIssue {
            key: "particles.seeds".into(),
            message: "need at least one seed".into(),
        });
    }
    if !issues.is_empty() {
        return Err(Error::Config(issues));
    }
    let setup = Setup::new(cfg)?;
    let (_, dt) = setup.plan(cfg);
    let mut history = FieldHistory::new(&setup.grid, dt, budget_bytes);
    simulate(cfg, &SimOptions::default(), |_, s| history.push(s))?;
    particle_study(&setup.bg, &history, &cfg.particles.epsilons, &cfg.particles.seeds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{build_scenario, Scenario};
    use crate::euler::EulerState;
    use crate::operators::Order;

    fn grid() -> Arc<Grid2D> {
        Grid2D::new(16, 9, 1.0, 1.0, Order::Second).unwrap()
    }

    fn state(g: &Arc<Grid2D>, du: [f64; 2], t: f64) -> CoupledState {
        CoupledState {
            xi: EulerState {
                du: VectorField::constant(g, du[0], du[1]),
                drho_hat: ScalarField::zeros(g),
                t,
            },
            w: VectorField::constant(g, du[0] * t, du[1] * t),
        }
    }

    #[test]
    fn bilinear_reproduces_linear_fields() {
        let g = grid();
        let f = ScalarField::from_fn(&g, |_, y| 2.0 * y - 0.3);
        for &(x, y) in &[(0.13, 0.27), (0.99, 0.5), (-0.2, 1.0), (0.5, 0.0)] {
            assert!((bilinear(&g, f.values(), x, y) - (2.0 * y - 0.3)).abs() < 1e-14);
        }
        // periodic wrap in x
        let f = ScalarField::from_fn(&g, |x, _| x);
        assert!((bilinear(&g, f.values(), 1.0 + 0.25, 0.3) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn zero_velocity_means_zero_displacement() {
        let g = grid();
        let bg = build_scenario(&g, Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }).unwrap();
        let mut h = FieldHistory::new(&g, 0.1, usize::MAX);
        for n in 0..5 {
            h.push(&state(&g, [0.0, 0.0], n as f64 * 0.1)).unwrap();
        }
        let p = trace_particles(&bg, &h, 1e-2, &[[0.3, 0.4]]).unwrap();
        assert_eq!(p.error, 0.0);
        assert!(p.displacement.iter().flatten().all(|w| *w == [0.0, 0.0]));
    }

    #[test]
    fn uniform_axial_base_path_is_straight() {
        let g = grid();
        let bg = build_scenario(
            &g,
            Scenario::UniformAxial {
                rho: 1.0,
                c: 1.0,
                mach: 0.4,
            },
        )
        .unwrap();
        let mut h = FieldHistory::new(&g, 0.05, usize::MAX);
        for n in 0..21 {
            h.push(&state(&g, [0.0, 0.0], n as f64 * 0.05)).unwrap();
        }
        let p = trace_particles(&bg, &h, 1e-2, &[[0.1, 0.5]]).unwrap();
        for (n, row) in p.base_paths.iter().enumerate() {
            assert!((row[0][0] - (0.1 + 0.4 * n as f64 * 0.05)).abs() < 1e-14);
            assert_eq!(row[0][1], 0.5);
        }
    }

    #[test]
    fn streaming_matches_memory() {
        let g = grid();
        let bg = build_scenario(&g, Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }).unwrap();
        let mut mem = FieldHistory::new(&g, 0.1, usize::MAX);
        let mut disk = FieldHistory::new(&g, 0.1, 3 * 4 * g.len() * 8);
        for n in 0..8 {
            let s = state(&g, [0.3, 0.1], n as f64 * 0.1);
            mem.push(&s).unwrap();
            disk.push(&s).unwrap();
        }
        assert!(!mem.is_streaming());
        assert!(disk.is_streaming());
        let a = trace_particles(&bg, &mem, 1e-2, &[[0.3, 0.4]]).unwrap();
        let b = trace_particles(&bg, &disk, 1e-2, &[[0.3, 0.4]]).unwrap();
        assert_eq!(a, b);
        // constant δu: W/ε = δu t exactly, matching w
        assert!(a.error < 1e-12, "{}", a.error);
    }

    #[test]
    fn escape_through_wall_is_an_error() {
        let g = grid();
        let bg = build_scenario(&g, Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }).unwrap();
        let mut h = FieldHistory::new(&g, 0.1, usize::MAX);
        for n in 0..10 {
            h.push(&state(&g, [0.0, 20.0], n as f64 * 0.1)).unwrap();
        }
        let e = trace_particles(&bg, &h, 1.0, &[[0.3, 0.9]]).unwrap_err();
        assert!(matches!(e, Error::ParticleEscaped { seed: 0, .. }));
    }
}
