//! Steady background flows tangential to the walls, with analytic first
//! derivatives and the flow constants entering the stability estimates.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::{max_abs_rows, Field, Grid2D, ScalarField, TensorField, VectorField};
use crate::operators::DiffOperators;

/// Shipped background flows and their profile constants.
#[derive(Debug, Clone, PartialEq)]
pub enum Scenario {
    QuiescentUniform {
        rho: f64,
        c: f64,
    },
    UniformAxial {
        rho: f64,
        c: f64,
        mach: f64,
    },
    /// `U(y) = mach c tanh((y - Ly/2)/delta)`, `ρ0 = rho (1 + rho_amp cos θ)`,
    /// `c0 = c (1 + c_amp cos θ)` with `θ = 2πy/Ly`.
    ParallelShear {
        rho: f64,
        c: f64,
        mach: f64,
        delta: f64,
        rho_amp: f64,
        c_amp: f64,
        p_ref: f64,
    },
}

impl Scenario {
    pub const NAMES: [&'static str; 3] = ["quiescent-uniform", "uniform-axial", "parallel-shear"];

    /// Parameter names accepted by `from_params` for scenario `name`.
    pub fn param_names(name: &str) -> &'static [&'static str] {
        match name {
            "quiescent-uniform" => &["rho", "c"],
            "uniform-axial" => &["rho", "c", "mach"],
            "parallel-shear" => &["rho", "c", "mach", "delta", "rho_amp", "c_amp", "p_ref"],
            _ => &[],
        }
    }

    /// Builds a scenario from its id and a parameter map; missing entries
    /// take defaults (`rho = c = 1`, `mach = 0.3`, `delta = 0.1`, no profile
    /// modulation, `p_ref = rho c^2`).
    pub fn from_params(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let allowed = Self::param_names(name);
        if allowed.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "unknown scenario `{name}`, expected one of {}",
                Self::NAMES.join(", ")
            )));
        }
        if let Some(k) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidArgument(format!(
                "scenario `{name}` has no parameter `{k}`"
            )));
        }
        let get = |k: &str, d: f64| params.get(k).copied().unwrap_or(d);
        let rho = get("rho", 1.0);
        let c = get("c", 1.0);
        let s = match name {
            "quiescent-uniform" => Scenario::QuiescentUniform { rho, c },
            "uniform-axial" => Scenario::UniformAxial {
                rho,
                c,
                mach: get("mach", 0.3),
            },
            _ => Scenario::ParallelShear {
                rho,
                c,
                mach: get("mach", 0.3),
                delta: get("delta", 0.1),
                rho_amp: get("rho_amp", 0.0),
                c_amp: get("c_amp", 0.0),
                p_ref: get("p_ref", rho * c * c),
            },
        };
        s.check()?;
        Ok(s)
    }

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::QuiescentUniform { .. } => Self::NAMES[0],
            Scenario::UniformAxial { .. } => Self::NAMES[1],
            Scenario::ParallelShear { .. } => Self::NAMES[2],
        }
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        let (rho, c) = match *self {
            Scenario::QuiescentUniform { rho, c } | Scenario::UniformAxial { rho, c, .. } => (rho, c),
            Scenario::ParallelShear {
                rho,
                c,
                delta,
                rho_amp,
                c_amp,
                ..
            } => {
                if !(delta > 0.0) {
                    return bad(format!("shear thickness delta must be positive, got {delta}"));
                }
                if !(rho_amp.abs() < 1.0) || !(c_amp.abs() < 1.0) {
                    return bad(format!(
                        "profile amplitudes must satisfy |rho_amp|, |c_amp| < 1, got {rho_amp}, {c_amp}"
                    ));
                }
                (rho, c)
            }
        };
        if !(rho > 0.0 && rho.is_finite()) || !(c > 0.0 && c.is_finite()) {
            return bad(format!("rho and c must be positive, got rho = {rho}, c = {c}"));
        }
        Ok(())
    }
}

/// Node-wise background values and their analytic derivatives at `(x, y)`.
struct Point {
    u: [f64; 2],
    grad_u: [[f64; 2]; 2],
    rho: f64,
    grad_rho: [f64; 2],
    c: f64,
    grad_c: [f64; 2],
    p: f64,
    grad_p: [f64; 2],
    phi: [f64; 2],
    grad_phi: [[f64; 2]; 2],
}

impl Scenario {
    fn eval(&self, _x: f64, y: f64, ly: f64) -> Point {
        match *self {
            Scenario::QuiescentUniform { rho, c } => uniform(rho, c, 0.0),
            Scenario::UniformAxial { rho, c, mach } => uniform(rho, c, mach * c),
            Scenario::ParallelShear {
                rho: r,
                c: cr,
                mach,
                delta,
                rho_amp: ra,
                c_amp: ca,
                p_ref,
            } => {
                let k = 2.0 * PI / ly;
                let (sn, cs) = (k * y).sin_cos();
                let t = ((y - 0.5 * ly) / delta).tanh();
                let u = mach * cr * t;
                let du = mach * cr * (1.0 - t * t) / delta;

                let rho = r * (1.0 + ra * cs);
                let drho = -r * ra * k * sn;
                let ddrho = -r * ra * k * k * cs;
                let s = 1.0 + ca * cs;
                let c = cr * s;
                let dc = -cr * ca * k * sn;
                let p = if ca == 0.0 {
                    p_ref + cr * cr * r * ra * cs
                } else {
                    p_ref + r * ra * cr * cr * s * s * s / (3.0 * ca)
                };
                let dp = -cr * cr * s * s * r * ra * k * sn;
                let phi = c * c * drho / rho;
                let dphi = 2.0 * c * dc * drho / rho + c * c * (ddrho / rho - drho * drho / (rho * rho));
                Point {
                    u: [u, 0.0],
                    grad_u: [[0.0, du], [0.0, 0.0]],
                    rho,
                    grad_rho: [0.0, drho],
                    c,
                    grad_c: [0.0, dc],
                    p,
                    grad_p: [0.0, dp],
                    phi: [0.0, phi],
                    grad_phi: [[0.0, 0.0], [0.0, dphi]],
                }
            }
        }
    }
}

fn uniform(rho: f64, c: f64, u: f64) -> Point {
    Point {
        u: [u, 0.0],
        grad_u: [[0.0; 2]; 2],
        rho,
        grad_rho: [0.0; 2],
        c,
        grad_c: [0.0; 2],
        p: rho * c * c,
        grad_p: [0.0; 2],
        phi: [0.0; 2],
        grad_phi: [[0.0; 2]; 2],
    }
}

/// Scalar bounds of the background used by the a-priori estimates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub rho_min: f64,
    pub rho_max: f64,
    pub c_min: f64,
    pub c_max: f64,
    /// Max over nodes of the spectral norm of `∇u0`.
    pub grad_u0: f64,
    /// Max over nodes of `|D0 c0 / c0|`.
    pub d0c0_rel: f64,
}

/// Steady background state on a grid.
#[derive(Debug, Clone)]
pub struct BackgroundFlow {
    pub scenario: Scenario,
    pub u0: VectorField,
    pub rho0: ScalarField,
    pub c0: ScalarField,
    pub p0: ScalarField,
    pub phi0: VectorField,
    /// `(∇u0)_{ab} = ∂_b u0_a`, so `(v·∇)u0 = (∇u0) v`.
    pub grad_u0: TensorField,
    pub grad_rho0: VectorField,
    pub grad_c0: VectorField,
    pub grad_p0: VectorField,
    pub grad_phi0: TensorField,
    /// `D0 c0 = u0·∇c0` for a steady flow.
    pub d0c0: ScalarField,
    pub bounds: Bounds,
}

pub fn build_scenario(grid: &Arc<Grid2D>, scenario: Scenario) -> Result<BackgroundFlow> {
    scenario.check()?;
    let n = grid.len();
    let mut u0 = VectorField::zeros(grid);
    let mut grad_u0 = TensorField::zeros(grid);
    let mut rho0 = vec![0.0; n];
    let mut c0 = vec![0.0; n];
    let mut p0 = vec![0.0; n];
    let mut phi0 = VectorField::zeros(grid);
    let mut grad_rho0 = VectorField::zeros(grid);
    let mut grad_c0 = VectorField::zeros(grid);
    let mut grad_p0 = VectorField::zeros(grid);
    let mut grad_phi0 = TensorField::zeros(grid);
    let mut d0c0 = vec![0.0; n];
    for j in 0..grid.ny() {
        for i in 0..grid.nx() {
            let k = grid.idx(i, j);
            let pt = scenario.eval(grid.x(i), grid.y(j), grid.ly());
            u0.x[k] = pt.u[0];
            u0.y[k] = pt.u[1];
            grad_u0.xx[k] = pt.grad_u[0][0];
            grad_u0.xy[k] = pt.grad_u[0][1];
            grad_u0.yx[k] = pt.grad_u[1][0];
            grad_u0.yy[k] = pt.grad_u[1][1];
            rho0[k] = pt.rho;
            c0[k] = pt.c;
            p0[k] = pt.p;
            phi0.x[k] = pt.phi[0];
            phi0.y[k] = pt.phi[1];
            grad_rho0.x[k] = pt.grad_rho[0];
            grad_rho0.y[k] = pt.grad_rho[1];
            grad_c0.x[k] = pt.grad_c[0];
            grad_c0.y[k] = pt.grad_c[1];
            grad_p0.x[k] = pt.grad_p[0];
            grad_p0.y[k] = pt.grad_p[1];
            grad_phi0.xx[k] = pt.grad_phi[0][0];
            grad_phi0.xy[k] = pt.grad_phi[0][1];
            grad_phi0.yx[k] = pt.grad_phi[1][0];
            grad_phi0.yy[k] = pt.grad_phi[1][1];
            d0c0[k] = pt.u[0] * pt.grad_c[0] + pt.u[1] * pt.grad_c[1];
        }
    }
    let mut bg = BackgroundFlow {
        scenario,
        u0,
        rho0: ScalarField::from_values(grid, rho0)?,
        c0: ScalarField::from_values(grid, c0)?,
        p0: ScalarField::from_values(grid, p0)?,
        phi0,
        grad_u0,
        grad_rho0,
        grad_c0,
        grad_p0,
        grad_phi0,
        d0c0: ScalarField::from_values(grid, d0c0)?,
        bounds: Bounds {
            rho_min: 0.0,
            rho_max: 0.0,
            c_min: 0.0,
            c_max: 0.0,
            grad_u0: 0.0,
            d0c0_rel: 0.0,
        },
    };
    bg.bounds = bg.compute_bounds();
    if bg.bounds.rho_min <= 0.0 || bg.bounds.c_min <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "background violates positivity: min rho0 = {}, min c0 = {}",
            bg.bounds.rho_min, bg.bounds.c_min
        )));
    }
    Ok(bg)
}

/// Largest singular value of a 2x2 matrix.
pub fn spectral_norm_2x2(m: [[f64; 2]; 2]) -> f64 {
    let fro2 = m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (fro2 + disc)).sqrt()
}

/// Smallest eigenvalue of the symmetric 2x2 matrix `[[a, b], [b, d]]`.
fn sym_min_eig(a: f64, b: f64, d: f64) -> f64 {
    let mean = 0.5 * (a + d);
    let r = (0.25 * (a - d) * (a - d) + b * b).sqrt();
    mean - r
}

impl BackgroundFlow {
    pub fn grid(&self) -> &Arc<Grid2D> {
        self.rho0.grid()
    }

    /// Recomputes the scalar bounds from the stored fields.
    pub fn compute_bounds(&self) -> Bounds {
        let (mut rho_min, mut rho_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut c_min, mut c_max) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut g, mut d): (f64, f64) = (0.0, 0.0);
        for k in 0..self.grid().len() {
            let r = self.rho0.values()[k];
            let c = self.c0.values()[k];
            rho_min = rho_min.min(r);
            rho_max = rho_max.max(r);
            c_min = c_min.min(c);
            c_max = c_max.max(c);
            g = g.max(spectral_norm_2x2(self.grad_u0.at(k)));
            d = d.max((self.d0c0.values()[k] / c).abs());
        }
        Bounds {
            rho_min,
            rho_max,
            c_min,
            c_max,
            grad_u0: g,
            d0c0_rel: d,
        }
    }

    /// `C = max ρ0 / min ρ0`.
    pub fn condition_constant(&self) -> f64 {
        self.bounds.rho_max / self.bounds.rho_min
    }

    /// Largest of `|u0| + c0`, the signal speed bounding the time step.
    pub fn max_signal_speed(&self) -> f64 {
        let mut m: f64 = 0.0;
        for k in 0..self.grid().len() {
            let s = self.u0.x[k].hypot(self.u0.y[k]) + self.c0.values()[k];
            m = m.max(s);
        }
        m
    }
}

/// Half the negated minimum node-wise eigenvalue of `ρ0⁻¹(B + Bᵀ)`, floored at 0.
pub fn lambda0_estimate(bg: &BackgroundFlow) -> f64 {
    let mut min_eig = f64::INFINITY;
    for k in 0..bg.grid().len() {
        let g = bg.grad_u0.at(k);
        let e_u = sym_min_eig(2.0 * g[0][0], g[0][1] + g[1][0], 2.0 * g[1][1]);
        let e_r = -2.0 * bg.d0c0.values()[k] / bg.c0.values()[k];
        min_eig = min_eig.min(e_u).min(e_r);
    }
    0.5 * (-min_eig).max(0.0)
}

/// `ν = (2/τ0) max{1 + τ0 |∇u0|, τ0 |c0⁻¹ D0 c0|}`.
pub fn growth_rate_nu(bg: &BackgroundFlow, tau0: f64) -> Result<f64> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "tau0 must be positive, got {tau0}"
        )));
    }
    let b = bg.bounds;
    Ok(2.0 / tau0 * (1.0 + tau0 * b.grad_u0).max(tau0 * b.d0c0_rel))
}

/// Outcome of `validate_background`.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub bounds: Bounds,
    pub positivity_ok: bool,
    /// Max-norm difference between discrete and analytic derivatives of the
    /// background fields, away from the walls.
    pub derivative_error: f64,
    /// Same on a grid refined twice in each direction.
    pub derivative_error_fine: f64,
    pub derivative_order: f64,
    pub mass_residual: f64,
    pub state_residual: f64,
    pub momentum_residual: f64,
    pub wall_tangency: f64,
    pub lambda0: f64,
    pub pass: bool,
    pub failures: Vec<String>,
}

fn derivative_mismatch(bg: &BackgroundFlow) -> Result<f64> {
    let grid = bg.grid();
    let op = DiffOperators::new(grid);
    let band = grid.interior_rows(grid.order().wall_band());
    let diff_vec = |d: VectorField, exact: &VectorField| {
        let mut d = d;
        d.axpy(-1.0, exact);
        max_abs_rows(&d, band.clone())
    };
    let mut e = diff_vec(op.gradient(&bg.rho0)?, &bg.grad_rho0);
    e = e.max(diff_vec(op.gradient(&bg.c0)?, &bg.grad_c0));
    e = e.max(diff_vec(op.gradient(&bg.p0)?, &bg.grad_p0));
    let mut j = op.jacobian(&bg.u0)?;
    for (a, b) in [
        (&mut j.xx, &bg.grad_u0.xx),
        (&mut j.xy, &bg.grad_u0.xy),
        (&mut j.yx, &bg.grad_u0.yx),
        (&mut j.yy, &bg.grad_u0.yy),
    ] {
        a.iter_mut().zip(b).for_each(|(x, y)| *x -= y);
    }
    Ok(e.max(max_abs_rows(&j, band)))
}

/// Checks the steady Euler constraints, wall tangency and positivity.
///
/// Residuals of identities that hold exactly for the shipped profiles must
/// be at most `tol` relative to the size of their terms. The discrete versus
/// analytic derivative mismatch instead has to shrink at the operator order
/// on a refined grid (or already sit below `tol`).
pub fn validate_background(bg: &BackgroundFlow, tol: f64) -> Result<ValidationReport> {
    let grid = bg.grid();
    let op = DiffOperators::new(grid);
    let bounds = bg.compute_bounds();
    let mut failures = Vec::new();

    let positivity_ok = bounds.rho_min > 0.0 && bounds.c_min > 0.0;
    if !positivity_ok {
        failures.push(format!(
            "positivity violated: min rho0 = {}, min c0 = {}",
            bounds.rho_min, bounds.c_min
        ));
    }

    let mass = op.divergence(&bg.u0.scaled_by(&bg.rho0))?.max_abs();
    let mass_scale = bounds.rho_max * (bg.u0.max_abs() + 1.0);

    let mut state: f64 = 0.0;
    let mut momentum: f64 = 0.0;
    let mut state_scale: f64 = 0.0;
    let mut mom_scale: f64 = 0.0;
    for k in 0..grid.len() {
        let c2 = bg.c0.values()[k].powi(2);
        let rho = bg.rho0.values()[k];
        for (gp, gr) in [
            (bg.grad_p0.x[k], bg.grad_rho0.x[k]),
            (bg.grad_p0.y[k], bg.grad_rho0.y[k]),
        ] {
            state = state.max((gp - c2 * gr).abs());
            state_scale = state_scale.max(gp.abs()).max((c2 * gr).abs());
        }
        let g = bg.grad_u0.at(k);
        let u = [bg.u0.x[k], bg.u0.y[k]];
        let gp = [bg.grad_p0.x[k], bg.grad_p0.y[k]];
        let phi = [bg.phi0.x[k], bg.phi0.y[k]];
        for a in 0..2 {
            let conv = g[a][0] * u[0] + g[a][1] * u[1];
            momentum = momentum.max((phi[a] - conv - gp[a] / rho).abs());
            mom_scale = mom_scale.max(phi[a].abs()).max(conv.abs());
        }
    }

    let mut tangency: f64 = 0.0;
    for (j, _) in grid.walls() {
        for i in 0..grid.nx() {
            tangency = tangency.max(bg.u0.y[grid.idx(i, j)].abs());
        }
    }

    let rel = |r: f64, s: f64| if s > 1.0 { r / s } else { r };
    let checks = [
        ("mass conservation", rel(mass, mass_scale)),
        ("state equation", rel(state, state_scale)),
        ("momentum balance", rel(momentum, mom_scale)),
        ("wall tangency", tangency),
    ];
    for (name, value) in checks {
        if !(value <= tol) {
            failures.push(format!("{name} residual {value:e} exceeds {tol:e}"));
        }
    }

    let derivative_error = derivative_mismatch(bg)?;
    let fine_grid = Grid2D::new(
        2 * grid.nx(),
        2 * (grid.ny() - 1) + 1,
        grid.lx(),
        grid.ly(),
        grid.order(),
    )?;
    let derivative_error_fine = match build_scenario(&fine_grid, bg.scenario.clone()) {
        Ok(fine) => derivative_mismatch(&fine)?,
        Err(_) => f64::NAN,
    };
    let derivative_order = (derivative_error / derivative_error_fine).log2();
    let p = grid.order().p() as f64;
    let deriv_scale = bounds.grad_u0.max(1.0) * bounds.rho_max.max(1.0) * bounds.c_max.max(1.0);
    let resolved = derivative_error <= tol * deriv_scale;
    if !resolved && !(derivative_order >= p - 0.2) {
        failures.push(format!(
            "derivative agreement converges at order {derivative_order:.3}, expected {p}"
        ));
    }

    Ok(ValidationReport {
        bounds,
        positivity_ok,
        derivative_error,
        derivative_error_fine,
        derivative_order,
        mass_residual: mass,
        state_residual: state,
        momentum_residual: momentum,
        wall_tangency: tangency,
        lambda0: lambda0_estimate(bg),
        pass: failures.is_empty(),
        failures,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::Order;

    fn grid(n: usize) -> Arc<Grid2D> {
        Grid2D::new(n, n / 2 + 1, 1.0, 1.0, Order::Second).unwrap()
    }

    fn shear(mach: f64, delta: f64, ra: f64, ca: f64) -> Scenario {
        Scenario::ParallelShear {
            rho: 1.0,
            c: 1.0,
            mach,
            delta,
            rho_amp: ra,
            c_amp: ca,
            p_ref: 1.0,
        }
    }

    #[test]
    fn quiescent_fields_vanish() {
        let bg = build_scenario(&grid(16), Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }).unwrap();
        assert_eq!(bg.u0.max_abs(), 0.0);
        assert_eq!(bg.phi0.max_abs(), 0.0);
        assert_eq!(bg.grad_p0.max_abs(), 0.0);
        let r = validate_background(&bg, 1e-12).unwrap();
        assert!(r.pass, "{:?}", r.failures);
        assert_eq!(r.mass_residual, 0.0);
        assert_eq!(r.state_residual, 0.0);
        assert_eq!(r.momentum_residual, 0.0);
        assert_eq!(lambda0_estimate(&bg), 0.0);
        assert_eq!(growth_rate_nu(&bg, 1.0).unwrap(), 2.0);
    }

    #[test]
    fn uniform_axial_is_constant_and_tangential() {
        let bg = build_scenario(
            &grid(16),
            Scenario::UniformAxial {
                rho: 1.0,
                c: 1.0,
                mach: 0.3,
            },
        )
        .unwrap();
        assert!(bg.u0.x.iter().all(|&u| u == 0.3));
        assert!(bg.u0.y.iter().all(|&u| u == 0.0));
        assert_eq!(bg.phi0.max_abs(), 0.0);
        assert_eq!(lambda0_estimate(&bg), 0.0);
        assert!(validate_background(&bg, 1e-12).unwrap().pass);
    }

    #[test]
    fn shear_with_constant_thermo_has_no_body_force() {
        let bg = build_scenario(&grid(32), shear(0.3, 0.2, 0.0, 0.0)).unwrap();
        assert_eq!(bg.phi0.max_abs(), 0.0);
        let r = validate_background(&bg, 1e-12).unwrap();
        assert_eq!(r.mass_residual, 0.0);
        assert!(r.pass, "{:?}", r.failures);
    }

    #[test]
    fn modulated_shear_validates() {
        let bg = build_scenario(&grid(32), shear(0.3, 0.2, 0.2, 0.1)).unwrap();
        let r = validate_background(&bg, 1e-12).unwrap();
        assert!(r.pass, "{:?}", r.failures);
        assert!((r.derivative_order - 2.0).abs() < 0.3, "{}", r.derivative_order);
        let bg = build_scenario(&grid(32), shear(0.3, 0.2, 0.2, 0.0)).unwrap();
        assert!(validate_background(&bg, 1e-12).unwrap().pass);
    }

    #[test]
    fn corrupted_density_fails_validation() {
        let mut bg = build_scenario(&grid(16), Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }).unwrap();
        bg.rho0.values_mut()[37] = -1.0;
        let r = validate_background(&bg, 1e-12).unwrap();
        assert!(!r.pass);
        assert!(!r.positivity_ok);
        assert!(r.failures.iter().any(|f| f.contains("positivity")));
    }

    #[test]
    fn lambda0_and_nu_for_shear() {
        // max |U'| = mach / delta at the centreline node
        let bg = build_scenario(&grid(32), shear(0.1, 0.1, 0.0, 0.0)).unwrap();
        assert!((bg.bounds.grad_u0 - 1.0).abs() < 1e-12);
        assert!((lambda0_estimate(&bg) - 0.5).abs() < 1e-12);
        assert!((growth_rate_nu(&bg, 1.0).unwrap() - 4.0).abs() < 1e-12);
        assert!((growth_rate_nu(&bg, 2.0).unwrap() - 3.0).abs() < 1e-12);
        assert!(growth_rate_nu(&bg, 0.0).is_err());
    }

    #[test]
    fn nu_is_non_increasing_in_tau0() {
        let bg = build_scenario(&grid(32), shear(0.3, 0.15, 0.1, 0.0)).unwrap();
        let mut prev = f64::INFINITY;
        for t in [0.1, 0.5, 1.0, 2.0, 10.0] {
            let nu = growth_rate_nu(&bg, t).unwrap();
            assert!(nu <= prev);
            assert!(nu >= 2.0 / t);
            prev = nu;
        }
    }

    #[test]
    fn spectral_norm_matches_known_cases() {
        assert!((spectral_norm_2x2([[0.0, 1.0], [0.0, 0.0]]) - 1.0).abs() < 1e-15);
        assert!((spectral_norm_2x2([[3.0, 0.0], [0.0, -4.0]]) - 4.0).abs() < 1e-15);
        // [[1,1],[0,1]] has largest singular value golden ratio
        let phi = 0.5 * (1.0 + 5f64.sqrt());
        assert!((spectral_norm_2x2([[1.0, 1.0], [0.0, 1.0]]) - phi).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut p = BTreeMap::new();
        assert!(Scenario::from_params("vortex", &p).is_err());
        p.insert("rho".to_string(), -1.0);
        assert!(Scenario::from_params("quiescent-uniform", &p).is_err());
        p.clear();
        p.insert("delta".to_string(), 0.1);
        assert!(Scenario::from_params("uniform-axial", &p).is_err());
        assert!(Scenario::from_params("parallel-shear", &p).is_ok());
    }
}
