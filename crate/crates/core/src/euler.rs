//! Semi-discrete linearized Euler system in the scaled variables
//! `ξ = (δu, δρ̂)`, `δρ̂ = c0 δρ / ρ0`, with weakly imposed admittance walls
//! and classical RK4 time stepping.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::background::BackgroundFlow;
use crate::error::{Error, Result};
use crate::mesh::{weighted_inner, Field, Grid2D, ScalarField, VectorField};
use crate::operators::DiffOperators;

/// Eulerian perturbation at one time level. Also used for tendencies.
#[derive(Debug, Clone)]
pub struct EulerState {
    pub du: VectorField,
    pub drho_hat: ScalarField,
    pub t: f64,
}

impl EulerState {
    pub fn zeros(grid: &Arc<Grid2D>, t: f64) -> Self {
        Self {
            du: VectorField::zeros(grid),
            drho_hat: ScalarField::zeros(grid),
            t,
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        self.drho_hat.grid()
    }

    /// `δρ = ρ0 δρ̂ / c0`.
    pub fn density(&self, bg: &BackgroundFlow) -> ScalarField {
        let mut d = self.drho_hat.zip_map(&bg.rho0, |r, rho| r * rho);
        d.values_mut()
            .iter_mut()
            .zip(bg.c0.values())
            .for_each(|(v, c)| *v /= c);
        d
    }

    /// `‖ξ‖²_{ρ0} = (ρ0 δu, δu) + (ρ0 δρ̂, δρ̂)`.
    pub fn norm_sq(&self, rho0: &ScalarField) -> Result<f64> {
        Ok(weighted_inner(&self.du, &self.du, rho0)? + weighted_inner(&self.drho_hat, &self.drho_hat, rho0)?)
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        let names = ["du_x", "du_y"];
        if let Some((c, i, j)) = self.du.first_non_finite() {
            return Err(non_finite(names[c], i, j, self.t));
        }
        if let Some((_, i, j)) = self.drho_hat.first_non_finite() {
            return Err(non_finite("drho_hat", i, j, self.t));
        }
        Ok(())
    }
}

pub(crate) fn non_finite(field: &str, i: usize, j: usize, t: f64) -> Error {
    Error::NonFinite {
        field: field.to_string(),
        i,
        j,
        t,
    }
}

/// States that RK4 can combine linearly.
pub trait Linear: Clone {
    /// `self += a * other`
    fn axpy(&mut self, a: f64, other: &Self);
}

impl Linear for EulerState {
    fn axpy(&mut self, a: f64, other: &Self) {
        self.du.axpy(a, &other.du);
        self.drho_hat.axpy(a, &other.drho_hat);
    }
}

/// One classical four-stage Runge-Kutta step of `dy/dt = f(y, t)`.
pub fn rk4<S: Linear>(y: &S, t: f64, dt: f64, f: impl Fn(&S, f64) -> Result<S>) -> Result<S> {
    let k1 = f(y, t)?;
    let mut s = y.clone();
    s.axpy(0.5 * dt, &k1);
    let k2 = f(&s, t + 0.5 * dt)?;
    let mut s = y.clone();
    s.axpy(0.5 * dt, &k2);
    let k3 = f(&s, t + 0.5 * dt)?;
    let mut s = y.clone();
    s.axpy(dt, &k3);
    let k4 = f(&s, t + dt)?;
    let mut out = y.clone();
    out.axpy(dt / 6.0, &k1);
    out.axpy(dt / 3.0, &k2);
    out.axpy(dt / 3.0, &k3);
    out.axpy(dt / 6.0, &k4);
    Ok(out)
}

/// Which wall a boundary datum acts on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Wall {
    Lower,
    Upper,
}

/// Right-hand side `g` of `-n·δu + Y δρ̂ = g`.
#[derive(Debug, Clone, PartialEq)]
pub enum BoundaryDatum {
    Zero,
    /// `g = amplitude cos(2π mode x / Lx) sin(omega t)` on one wall.
    Harmonic {
        amplitude: f64,
        mode: u32,
        omega: f64,
        wall: Wall,
    },
}

impl BoundaryDatum {
    pub fn eval(&self, wall: Wall, x: f64, lx: f64, t: f64) -> f64 {
        match *self {
            BoundaryDatum::Zero => 0.0,
            BoundaryDatum::Harmonic {
                amplitude,
                mode,
                omega,
                wall: w,
            } => {
                if w == wall {
                    amplitude * (2.0 * PI * mode as f64 * x / lx).cos() * (omega * t).sin()
                } else {
                    0.0
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match *self {
            BoundaryDatum::Zero => true,
            BoundaryDatum::Harmonic { amplitude, .. } => amplitude == 0.0,
        }
    }
}

/// Admittance walls: node values of `Y` on both walls, the lower bound `a`,
/// the datum `g` and the penalty strength `σ`.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    /// `Y` at the lower wall nodes, then at the upper wall nodes.
    admittance: Vec<f64>,
    pub a: f64,
    pub datum: BoundaryDatum,
    pub sigma: f64,
    nx: usize,
}

impl BoundarySpec {
    pub fn uniform(grid: &Grid2D, y: f64, datum: BoundaryDatum) -> Result<Self> {
        Self::from_profiles(vec![y; grid.nx()], vec![y; grid.nx()], datum)
    }

    /// Per-node admittance on the lower and upper wall; `a` is their minimum.
    pub fn from_profiles(lower: Vec<f64>, upper: Vec<f64>, datum: BoundaryDatum) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::InvalidArgument(
                "admittance profiles differ in length".into(),
            ));
        }
        let nx = lower.len();
        let mut admittance = lower;
        admittance.extend(upper);
        if let Some(y) = admittance.iter().find(|y| !(**y >= 0.0 && y.is_finite())) {
            return Err(Error::InvalidArgument(format!(
                "admittance must be finite and non-negative, got {y}"
            )));
        }
        let a = admittance.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            admittance,
            a,
            datum,
            sigma: 1.0,
            nx,
        })
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn admittance(&self, wall: Wall, i: usize) -> f64 {
        match wall {
            Wall::Lower => self.admittance[i],
            Wall::Upper => self.admittance[self.nx + i],
        }
    }

    pub fn max_admittance(&self) -> f64 {
        self.admittance.iter().copied().fold(0.0, f64::max)
    }

    fn check(&self, grid: &Grid2D) -> Result<()> {
        if self.nx != grid.nx() {
            return Err(Error::GridMismatch(format!(
                "admittance given on {} wall nodes, grid has nx = {}",
                self.nx,
                grid.nx()
            )));
        }
        Ok(())
    }
}

/// Wall rows paired with their `Wall` tag and outward normal y component.
pub(crate) fn walls(grid: &Grid2D) -> [(usize, Wall, f64); 2] {
    [(0, Wall::Lower, -1.0), (grid.ny() - 1, Wall::Upper, 1.0)]
}

/// Smooth periodic stand-in for an x offset: `(L/π) sin(π d / L)`.
pub fn periodic_offset(d: f64, lx: f64) -> f64 {
    lx / PI * (PI * d / lx).sin()
}

/// Body force `δφ(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum Forcing {
    Zero,
    Constant([f64; 2]),
    /// `amplitude exp(-|x - centre|²/radius²) exp(-(t - t0)²/width²) cos(2π freq (t - t0))`
    /// with the x offset measured by `periodic_offset`.
    GaussianPulse {
        amplitude: [f64; 2],
        centre: [f64; 2],
        radius: f64,
        t0: f64,
        width: f64,
        freq: f64,
    },
}

impl Forcing {
    pub fn is_zero(&self) -> bool {
        match self {
            Forcing::Zero => true,
            Forcing::Constant(a) | Forcing::GaussianPulse { amplitude: a, .. } => a[0] == 0.0 && a[1] == 0.0,
        }
    }

    /// Forcing field at time `t`, `None` when identically zero.
    pub fn eval(&self, grid: &Arc<Grid2D>, t: f64) -> Option<VectorField> {
        if self.is_zero() {
            return None;
        }
        match *self {
            Forcing::Zero => None,
            Forcing::Constant([fx, fy]) => Some(VectorField::constant(grid, fx, fy)),
            Forcing::GaussianPulse {
                amplitude,
                centre,
                radius,
                t0,
                width,
                freq,
            } => {
                let s = t - t0;
                let time = (-(s * s) / (width * width)).exp() * (2.0 * PI * freq * s).cos();
                let lx = grid.lx();
                Some(VectorField::from_fn(grid, |x, y| {
                    let ddx = periodic_offset(x - centre[0], lx);
                    let ddy = y - centre[1];
                    let env = (-(ddx * ddx + ddy * ddy) / (radius * radius)).exp() * time;
                    [amplitude[0] * env, amplitude[1] * env]
                }))
            }
        }
    }
}

/// `A ξ = (ρ0(u0·∇)δu + ∇(ρ0c0 δρ̂), ρ0c0 ∇·δu + ρ0(u0·∇)δρ̂)`.
pub fn apply_a(bg: &BackgroundFlow, op: &DiffOperators, xi: &EulerState) -> Result<EulerState> {
    let m = bg.rho0.zip_map(&bg.c0, |r, c| r * c);
    let mut du = op.convective_vec(&bg.u0, &xi.du)?.scaled_by(&bg.rho0);
    du.axpy(1.0, &op.gradient(&xi.drho_hat.zip_map(&m, |a, b| a * b))?);
    let mut dr = op.divergence(&xi.du)?.zip_map(&m, |a, b| a * b);
    dr.axpy(
        1.0,
        &op.convective(&bg.u0, &xi.drho_hat)?
            .zip_map(&bg.rho0, |a, b| a * b),
    );
    Ok(EulerState {
        du,
        drho_hat: dr,
        t: xi.t,
    })
}

/// Zeroth-order block: `B ξ = (ρ0(∇u0)δu - c0 ∇ρ0 δρ̂, c0 ∇ρ0·δu - ρ0 (D0c0/c0) δρ̂)`.
pub fn apply_b(bg: &BackgroundFlow, xi: &EulerState) -> Result<EulerState> {
    let grid = bg.grid();
    Grid2D::check_same(grid, xi.grid())?;
    let mut out = EulerState::zeros(grid, xi.t);
    let r = xi.drho_hat.values();
    for k in 0..grid.len() {
        let rho = bg.rho0.values()[k];
        let c = bg.c0.values()[k];
        let g = bg.grad_u0.at(k);
        let (ux, uy) = (xi.du.x[k], xi.du.y[k]);
        let (gx, gy) = (bg.grad_rho0.x[k], bg.grad_rho0.y[k]);
        out.du.x[k] = rho * (g[0][0] * ux + g[0][1] * uy) - c * gx * r[k];
        out.du.y[k] = rho * (g[1][0] * ux + g[1][1] * uy) - c * gy * r[k];
        out.drho_hat.values_mut()[k] = c * (gx * ux + gy * uy) - rho * bg.d0c0.values()[k] / c * r[k];
    }
    Ok(out)
}

/// Penalty terms imposing `-n·δu + Y δρ̂ = g` weakly at the wall nodes.
///
/// With `r = -n·δu + Y δρ̂ - g` the increments at a wall node of norm weight
/// `q dy` are `σ c0 Y n r / ((1+Y²) q dy)` on `δu` and `-σ c0 r / ((1+Y²) q dy)`
/// on `δρ̂`. For `σ = 1` and `g = 0` the wall contributes
/// `-ρ0 c0 Y ((n·δu)² + δρ̂²) / (1+Y²)` to the energy rate.
pub fn sat_penalty(bg: &BackgroundFlow, spec: &BoundarySpec, xi: &EulerState, t: f64) -> Result<EulerState> {
    let grid = bg.grid();
    Grid2D::check_same(grid, xi.grid())?;
    spec.check(grid)?;
    let mut out = EulerState::zeros(grid, xi.t);
    add_sat(bg, spec, xi, t, &mut out);
    Ok(out)
}

fn add_sat(bg: &BackgroundFlow, spec: &BoundarySpec, xi: &EulerState, t: f64, out: &mut EulerState) {
    let grid = bg.grid();
    for (j, wall, ny) in walls(grid) {
        let h = grid.weight(j) * grid.dy();
        for i in 0..grid.nx() {
            let k = grid.idx(i, j);
            let y = spec.admittance(wall, i);
            let g = spec.datum.eval(wall, grid.x(i), grid.lx(), t);
            let r = -ny * xi.du.y[k] + y * xi.drho_hat.values()[k] - g;
            let s = spec.sigma * bg.c0.values()[k] * r / ((1.0 + y * y) * h);
            out.du.y[k] += s * y * ny;
            out.drho_hat.values_mut()[k] -= s;
        }
    }
}

/// The semi-discrete system `dξ/dt = -ρ0⁻¹(A + B)ξ + (δφ, 0) + SAT`.
pub struct EulerSystem<'a> {
    pub bg: &'a BackgroundFlow,
    pub op: &'a DiffOperators,
    pub spec: &'a BoundarySpec,
    pub forcing: &'a Forcing,
}

impl<'a> EulerSystem<'a> {
    pub fn new(
        bg: &'a BackgroundFlow,
        op: &'a DiffOperators,
        spec: &'a BoundarySpec,
        forcing: &'a Forcing,
    ) -> Result<Self> {
        Grid2D::check_same(bg.grid(), op.grid())?;
        spec.check(bg.grid())?;
        Ok(Self {
            bg,
            op,
            spec,
            forcing,
        })
    }

    pub fn rhs(&self, xi: &EulerState, t: f64) -> Result<EulerState> {
        let mut out = apply_a(self.bg, self.op, xi)?;
        out.axpy(1.0, &apply_b(self.bg, xi)?);
        let rho = self.bg.rho0.values();
        for k in 0..rho.len() {
            let s = -1.0 / rho[k];
            out.du.x[k] *= s;
            out.du.y[k] *= s;
            out.drho_hat.values_mut()[k] *= s;
        }
        if let Some(f) = self.forcing.eval(self.bg.grid(), t) {
            out.du.axpy(1.0, &f);
        }
        add_sat(self.bg, self.spec, xi, t, &mut out);
        out.t = t;
        Ok(out)
    }

    pub fn rk4_step(&self, xi: &EulerState, dt: f64) -> Result<EulerState> {
        let mut next = rk4(xi, xi.t, dt, |s, t| self.rhs(s, t))?;
        next.t = xi.t + dt;
        Ok(next)
    }
}

/// Largest stable step `cfl min(dx, dy) / max(|u0| + c0)`.
pub fn max_time_step(bg: &BackgroundFlow, cfl: f64) -> f64 {
    let g = bg.grid();
    cfl * g.dx().min(g.dy()) / bg.max_signal_speed()
}

/// Number of equal steps covering `horizon` without exceeding `dt_max`.
pub fn plan_steps(horizon: f64, dt_max: f64) -> (usize, f64) {
    let n = ((horizon / dt_max) - 1e-9).ceil().max(1.0) as usize;
    (n, horizon / n as f64)
}

/// Errors with `Error::Cfl` if `dt` exceeds the limit for `cfl`.
pub fn check_cfl(bg: &BackgroundFlow, dt: f64, cfl: f64) -> Result<()> {
    let limit = max_time_step(bg, cfl);
    if dt > limit * (1.0 + 1e-12) {
        Err(Error::Cfl { dt, limit, cfl })
    } else {
        Ok(())
    }
}

/// Largest `|ξ̃ᵀ A(n) ξ|` over bases of the admissible subspaces
/// `N = {-n·ξ1 + Y ξ2 = 0}` and `Ñ = {n·ξ̃1 + Y ξ̃2 = 0}`, together with the
/// defect of `ker A(n) ⊂ N ∩ Ñ`.
pub fn check_boundary_subspaces(rho0c0: f64, n: [f64; 2], y: f64) -> Result<f64> {
    let len = n[0].hypot(n[1]);
    if !((len - 1.0).abs() <= 1e-12) {
        return Err(Error::InvalidArgument(format!(
            "normal must have unit length, got |n| = {len}"
        )));
    }
    if !(y >= 0.0 && y.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "admittance must be finite and non-negative, got {y}"
        )));
    }
    let a_n = |v: [f64; 3]| {
        [
            rho0c0 * n[0] * v[2],
            rho0c0 * n[1] * v[2],
            rho0c0 * (n[0] * v[0] + n[1] * v[1]),
        ]
    };
    let dot = |a: [f64; 3], b: [f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let t = [-n[1], n[0], 0.0];
    let s = 1.0 / (1.0 + y * y).sqrt();
    let basis_n = [t, [y * n[0] * s, y * n[1] * s, s]];
    let basis_nt = [t, [-y * n[0] * s, -y * n[1] * s, s]];
    let mut worst: f64 = 0.0;
    for xi in basis_n {
        for xt in basis_nt {
            worst = worst.max(dot(xt, a_n(xi)).abs());
        }
    }
    let e = [-n[0] * s, -n[1] * s, y * s];
    let et = [n[0] * s, n[1] * s, y * s];
    worst = worst.max(dot(e, t).abs()).max(dot(et, t).abs());
    let kt = a_n(t);
    worst = worst.max(dot(kt, kt).sqrt());
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::background::{build_scenario, Scenario};
    use crate::mesh::norm;
    use crate::operators::Order;

    fn quiescent(nx: usize, ny: usize) -> (BackgroundFlow, DiffOperators) {
        let g = Grid2D::new(nx, ny, 1.0, 1.0, Order::Second).unwrap();
        let bg = build_scenario(&g, Scenario::QuiescentUniform { rho: 1.0, c: 1.0 }).unwrap();
        (bg, DiffOperators::new(&g))
    }

    fn shear(nx: usize, ny: usize) -> (BackgroundFlow, DiffOperators) {
        let g = Grid2D::new(nx, ny, 1.0, 1.0, Order::Second).unwrap();
        let bg = build_scenario(
            &g,
            Scenario::ParallelShear {
                rho: 1.0,
                c: 1.0,
                mach: 0.3,
                delta: 0.2,
                rho_amp: 0.2,
                c_amp: 0.0,
                p_ref: 1.0,
            },
        )
        .unwrap();
        (bg, DiffOperators::new(&g))
    }

    /// Standing wave of the acoustic system with hard walls.
    fn standing(g: &Arc<Grid2D>, t: f64) -> EulerState {
        let (kx, ky) = (2.0 * PI, PI);
        let w = kx.hypot(ky);
        let mut s = EulerState::zeros(g, t);
        s.drho_hat = ScalarField::from_fn(g, |x, y| (kx * x).cos() * (ky * y).cos() * (w * t).cos());
        s.du = VectorField::from_fn(g, |x, y| {
            [
                kx / w * (kx * x).sin() * (ky * y).cos() * (w * t).sin(),
                ky / w * (kx * x).cos() * (ky * y).sin() * (w * t).sin(),
            ]
        });
        s
    }

    #[test]
    fn zero_is_a_fixed_point() {
        let (bg, op) = shear(16, 9);
        let spec = BoundarySpec::uniform(bg.grid(), 1.0, BoundaryDatum::Zero).unwrap();
        let sys = EulerSystem::new(&bg, &op, &spec, &Forcing::Zero).unwrap();
        let z = EulerState::zeros(bg.grid(), 0.0);
        let n = sys.rk4_step(&z, 0.01).unwrap();
        assert_eq!(n.du.max_abs(), 0.0);
        assert_eq!(n.drho_hat.max_abs(), 0.0);
        assert_eq!(n.t, 0.01);
    }

    #[test]
    fn apply_a_acoustic_examples() {
        let (bg, op) = quiescent(64, 9);
        let g = bg.grid().clone();
        let mut xi = EulerState::zeros(&g, 0.0);
        xi.drho_hat = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let a = apply_a(&bg, &op, &xi).unwrap();
        let exact = ScalarField::from_fn(&g, |x, _| 2.0 * PI * (2.0 * PI * x).cos());
        let mut e = a.du.component(0);
        e.axpy(-1.0, &exact);
        assert!(e.max_abs() < 0.02);
        assert_eq!(a.drho_hat.max_abs(), 0.0);

        let mut xi = EulerState::zeros(&g, 0.0);
        xi.du = VectorField::from_fn(&g, |x, _| [(2.0 * PI * x).sin(), 0.0]);
        let a = apply_a(&bg, &op, &xi).unwrap();
        assert_eq!(a.du.max_abs(), 0.0);
        let mut e = a.drho_hat.clone();
        e.axpy(-1.0, &exact);
        assert!(e.max_abs() < 0.02);
    }

    #[test]
    fn apply_b_examples() {
        let (bg, _) = quiescent(16, 9);
        let mut xi = EulerState::zeros(bg.grid(), 0.0);
        xi.du = VectorField::constant(bg.grid(), 0.3, -2.0);
        xi.drho_hat = ScalarField::constant(bg.grid(), 1.5);
        let b = apply_b(&bg, &xi).unwrap();
        assert_eq!(b.du.max_abs() + b.drho_hat.max_abs(), 0.0);

        let (bg, _) = shear(16, 17);
        let g = bg.grid().clone();
        let mut xi = EulerState::zeros(&g, 0.0);
        xi.du = VectorField::constant(&g, 0.0, 1.0);
        let b = apply_b(&bg, &xi).unwrap();
        for k in 0..g.len() {
            let rho = bg.rho0.values()[k];
            let expect_x = rho * bg.grad_u0.xy[k];
            assert!((b.du.x[k] - expect_x).abs() < 1e-15);
            assert_eq!(b.du.y[k], 0.0);
            let expect_m = bg.c0.values()[k] * bg.grad_rho0.y[k];
            assert!((b.drho_hat.values()[k] - expect_m).abs() < 1e-15);
        }

        let mut xi = EulerState::zeros(&g, 0.0);
        xi.drho_hat = ScalarField::constant(&g, 1.0);
        let b = apply_b(&bg, &xi).unwrap();
        for k in 0..g.len() {
            assert_eq!(b.du.x[k], 0.0);
            let expect = -bg.c0.values()[k] * bg.grad_rho0.y[k];
            assert!((b.du.y[k] - expect).abs() < 1e-15);
            assert_eq!(b.drho_hat.values()[k], 0.0);
        }
    }

    #[test]
    fn sat_examples() {
        let (bg, _) = quiescent(16, 9);
        let g = bg.grid().clone();
        // satisfied boundary condition gives no penalty
        let spec = BoundarySpec::uniform(&g, 2.0, BoundaryDatum::Zero).unwrap();
        let mut xi = EulerState::zeros(&g, 0.0);
        xi.drho_hat = ScalarField::constant(&g, 1.0);
        xi.du = VectorField::from_fn(&g, |_, y| [0.0, if y < 0.5 { -2.0 } else { 2.0 }]);
        let p = sat_penalty(&bg, &spec, &xi, 0.0).unwrap();
        assert_eq!(p.du.max_abs() + p.drho_hat.max_abs(), 0.0);

        // hard wall, normal velocity eps at one lower-wall node
        let spec = BoundarySpec::uniform(&g, 0.0, BoundaryDatum::Zero).unwrap();
        let mut xi = EulerState::zeros(&g, 0.0);
        let eps = 1e-3;
        xi.du.y[3] = -eps;
        let p = sat_penalty(&bg, &spec, &xi, 0.0).unwrap();
        let q = g.weight(0) * g.dy();
        assert!((p.drho_hat.values()[3] - eps / q).abs() < 1e-15);
        assert_eq!(p.du.max_abs(), 0.0);

        // forced wall with Y = 1 and g = 1 on the lower wall
        let datum = BoundaryDatum::Harmonic {
            amplitude: 1.0,
            mode: 0,
            omega: PI / 2.0,
            wall: Wall::Lower,
        };
        let spec = BoundarySpec::uniform(&g, 1.0, datum).unwrap();
        let xi = EulerState::zeros(&g, 1.0);
        let p = sat_penalty(&bg, &spec, &xi, 1.0).unwrap();
        assert!((p.drho_hat.values()[0] - 0.5 / q).abs() < 1e-12);
        assert!((p.du.y[0] - 0.5 / q).abs() < 1e-12);
        let top = g.idx(0, g.ny() - 1);
        assert_eq!(p.drho_hat.values()[top], 0.0);
    }

    #[test]
    fn constant_forcing_tendency() {
        let (bg, op) = quiescent(16, 9);
        let spec = BoundarySpec::uniform(bg.grid(), 0.0, BoundaryDatum::Zero).unwrap();
        let forcing = Forcing::Constant([1.0, 0.0]);
        let sys = EulerSystem::new(&bg, &op, &spec, &forcing).unwrap();
        let r = sys.rhs(&EulerState::zeros(bg.grid(), 0.0), 0.0).unwrap();
        assert!(r.du.x.iter().all(|&v| v == 1.0));
        assert_eq!(r.du.y.iter().fold(0.0f64, |m, v| m.max(v.abs())), 0.0);
        assert_eq!(r.drho_hat.max_abs(), 0.0);
    }

    #[test]
    fn tendency_matches_standing_wave_derivative() {
        let err = |n: usize| {
            let (bg, op) = quiescent(2 * n, n + 1);
            let g = bg.grid().clone();
            let spec = BoundarySpec::uniform(&g, 0.0, BoundaryDatum::Zero).unwrap();
            let sys = EulerSystem::new(&bg, &op, &spec, &Forcing::Zero).unwrap();
            let t = 0.3;
            let r = sys.rhs(&standing(&g, t), t).unwrap();
            // d/dt by centred difference of the exact solution, h small
            let h = 1e-6;
            let mut d = standing(&g, t + h);
            d.axpy(-1.0, &standing(&g, t - h));
            d.axpy(-2.0 * h, &r);
            let band = g.interior_rows(1);
            crate::mesh::max_abs_rows(&d.drho_hat, band) / (2.0 * h)
        };
        let rate = (err(16) / err(32)).log2();
        assert!(rate > 1.8, "{rate}");
    }

    #[test]
    fn standing_wave_returns_after_one_period() {
        let (bg, op) = quiescent(64, 33);
        let g = bg.grid().clone();
        let spec = BoundarySpec::uniform(&g, 0.0, BoundaryDatum::Zero).unwrap();
        let sys = EulerSystem::new(&bg, &op, &spec, &Forcing::Zero).unwrap();
        let period = 2.0 * PI / (2.0 * PI).hypot(PI);
        let (n, dt) = plan_steps(period, max_time_step(&bg, 0.4));
        let x0 = standing(&g, 0.0);
        let mut x = x0.clone();
        for _ in 0..n {
            x = sys.rk4_step(&x, dt).unwrap();
        }
        assert!((x.t - period).abs() < 1e-12);
        let mut e = x.drho_hat.clone();
        e.axpy(-1.0, &x0.drho_hat);
        assert!(norm(&e) / norm(&x0.drho_hat) < 0.05);
    }

    #[test]
    fn single_step_is_second_order_consistent_with_euler() {
        let (bg, op) = shear(32, 17);
        let g = bg.grid().clone();
        let spec = BoundarySpec::uniform(&g, 1.0, BoundaryDatum::Zero).unwrap();
        let sys = EulerSystem::new(&bg, &op, &spec, &Forcing::Zero).unwrap();
        let x0 = standing(&g, 0.2);
        let f0 = sys.rhs(&x0, 0.2).unwrap();
        let defect = |dt: f64| {
            let mut d = sys.rk4_step(&x0, dt).unwrap();
            d.axpy(-1.0, &x0);
            d.axpy(-dt, &f0);
            d.norm_sq(&bg.rho0).unwrap().sqrt()
        };
        let rate = (defect(1e-3) / defect(5e-4)).log2();
        assert!((rate - 2.0).abs() < 0.1, "{rate}");
    }

    #[test]
    fn acoustic_energy_decays_with_dissipative_walls() {
        let (bg, op) = quiescent(32, 17);
        let g = bg.grid().clone();
        let spec = BoundarySpec::uniform(&g, 1.0, BoundaryDatum::Zero).unwrap();
        let sys = EulerSystem::new(&bg, &op, &spec, &Forcing::Zero).unwrap();
        let mut x = standing(&g, 0.0);
        let dt = max_time_step(&bg, 0.4);
        let mut e = x.norm_sq(&bg.rho0).unwrap();
        let e0 = e;
        for _ in 0..200 {
            x = sys.rk4_step(&x, dt).unwrap();
            let en = x.norm_sq(&bg.rho0).unwrap();
            assert!(en <= e + 1e-12 * e0);
            e = en;
        }
        assert!(e < 0.9 * e0);
    }

    #[test]
    fn cfl_planning() {
        let (bg, _) = shear(32, 17);
        let dt = max_time_step(&bg, 0.4);
        let speed = 1.0 + 0.3 * (0.5f64 / 0.2).tanh();
        assert!((dt - 0.4 / 32.0 / speed).abs() < 1e-12 * dt);
        let (n, step) = plan_steps(1.0, dt);
        assert!(step <= dt && (n as f64 * step - 1.0).abs() < 1e-12);
        assert!(check_cfl(&bg, step, 0.4).is_ok());
        assert!(matches!(check_cfl(&bg, 2.0 * dt, 0.4), Err(Error::Cfl { .. })));
    }

    #[test]
    fn boundary_subspace_examples() {
        // explicit vectors ξ = ((0,-1),1) ∈ N and ξ̃ = ((0,1),1) ∈ Ñ for n = (0,-1), Y = 1
        let n = [0.0, -1.0];
        let xi = [0.0, -1.0, 1.0];
        let xt = [0.0, 1.0, 1.0];
        let a_xi = [n[0] * xi[2], n[1] * xi[2], n[0] * xi[0] + n[1] * xi[1]];
        assert_eq!(xt[0] * a_xi[0] + xt[1] * a_xi[1] + xt[2] * a_xi[2], 0.0);
        assert!(check_boundary_subspaces(1.0, n, 1.0).unwrap() <= 1e-13);
        assert!(check_boundary_subspaces(2.5, [0.6, 0.8], 0.0).unwrap() <= 1e-13 * 2.5);
        assert!(check_boundary_subspaces(1.0, [0.6, 0.8], 1e6).unwrap() <= 1e-13);
        assert!(check_boundary_subspaces(1.0, [1.0, 1.0], 1.0).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn subspaces_are_orthogonal(
                angle in 0.0f64..(2.0 * PI),
                y in prop_oneof![Just(0.0), Just(1e6), 0.0f64..100.0],
                rc in 0.1f64..10.0,
            ) {
                let n = [angle.cos(), angle.sin()];
                prop_assert!(check_boundary_subspaces(rc, n, y).unwrap() <= 1e-13 * rc);
            }

            #[test]
            fn step_is_linear(alpha in -2.0f64..2.0, beta in -2.0f64..2.0, amp in -1.0f64..1.0) {
                let (bg, op) = shear(16, 9);
                let g = bg.grid().clone();
                let datum = |a: f64| BoundaryDatum::Harmonic { amplitude: a, mode: 1, omega: 3.0, wall: Wall::Upper };
                let force = |a: f64| Forcing::Constant([a, -0.5 * a]);
                let x1 = standing(&g, 0.1);
                let mut x2 = EulerState::zeros(&g, 0.1);
                x2.drho_hat = ScalarField::from_fn(&g, |x, y| (x * 7.0).sin() * y);
                let step = |x: &EulerState, a: f64| {
                    let spec = BoundarySpec::uniform(&g, 0.7, datum(a)).unwrap();
                    let f = force(a);
                    EulerSystem::new(&bg, &op, &spec, &f).unwrap().rk4_step(x, 0.01).unwrap()
                };
                let mut combo = x1.clone();
                combo.drho_hat.scale(alpha);
                combo.du.scale(alpha);
                combo.axpy(beta, &x2);
                let lhs = step(&combo, alpha * amp + beta * 2.0 * amp);
                let mut rhs = step(&x1, amp);
                rhs.drho_hat.scale(alpha);
                rhs.du.scale(alpha);
                rhs.axpy(beta, &step(&x2, 2.0 * amp));
                let mut d = lhs.clone();
                d.axpy(-1.0, &rhs);
                prop_assert!(d.du.max_abs() + d.drho_hat.max_abs() < 1e-11);
            }
        }
    }
}
