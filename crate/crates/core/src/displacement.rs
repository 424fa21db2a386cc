//! Lagrangian displacement: initial datum from a Poisson solve, transport by
//! `(∂t + L_{u0}) w = δu` alongside the Euler state, and the quantity
//! `h = ρ0⁻¹(δρ + ∇·(ρ0 w))` whose vanishing is the no-resonance condition.

use std::sync::Arc;

use crate::background::BackgroundFlow;
use crate::error::{Error, Result};
use crate::euler::{non_finite, rk4, EulerState, EulerSystem, Linear};
use crate::mesh::{max_abs_rows, sum_rows, weighted_norm_rows, Field, Grid2D, ScalarField, VectorField};
use crate::operators::DiffOperators;

#[derive(Debug, Clone)]
pub struct DisplacementField {
    pub w: VectorField,
    pub tau0: f64,
    pub t: f64,
}

impl DisplacementField {
    pub fn zeros(grid: &Arc<Grid2D>, tau0: f64, t: f64) -> Result<Self> {
        check_tau0(tau0)?;
        Ok(Self {
            w: VectorField::zeros(grid),
            tau0,
            t,
        })
    }
}

fn check_tau0(tau0: f64) -> Result<()> {
    if tau0 > 0.0 && tau0.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "tau0 must be positive, got {tau0}"
        )))
    }
}

/// `-Δv = rhs` with `v = 0` on the walls and periodic in x.
#[derive(Debug, Clone)]
pub struct PoissonProblem {
    pub rhs: ScalarField,
    pub tol: f64,
    pub max_iter: usize,
}

impl PoissonProblem {
    pub fn new(rhs: ScalarField) -> Self {
        Self {
            rhs,
            tol: 1e-10,
            max_iter: 20_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonReport {
    pub iterations: usize,
    /// `‖Δv + rhs‖ / ‖rhs‖` over the non-wall rows in the SBP norm.
    pub relative_residual: f64,
}

/// Solves the Poisson problem with the composed Laplacian `divergence∘gradient`
/// by conjugate gradients.
///
/// Only non-wall rows are unknowns. On that subspace `-H Δ` is symmetric
/// positive definite, so the iteration runs in the `H`-weighted inner product.
pub fn solve_poisson(prob: &PoissonProblem, op: &DiffOperators) -> Result<(ScalarField, PoissonReport)> {
    let grid = op.grid().clone();
    Grid2D::check_same(&grid, prob.rhs.grid())?;
    if !(prob.tol > 0.0 && prob.tol < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "Poisson tolerance must lie in (0, 1), got {}",
            prob.tol
        )));
    }
    if let Some((_, i, j)) = prob.rhs.first_non_finite() {
        return Err(non_finite("poisson rhs", i, j, 0.0));
    }
    let nx = grid.nx();
    let rows = grid.interior_rows(1);
    let dot = |a: &[f64], b: &[f64]| {
        sum_rows(rows.clone(), |j| {
            let s: f64 = (j * nx..(j + 1) * nx).map(|k| a[k] * b[k]).sum();
            s * grid.weight(j)
        })
    };
    let mask_walls = |v: &mut [f64]| {
        for (j, _) in grid.walls() {
            v[j * nx..(j + 1) * nx].iter_mut().for_each(|x| *x = 0.0);
        }
    };
    let apply = |p: &ScalarField| -> Result<ScalarField> {
        let mut lp = op.laplacian(p)?;
        lp.scale(-1.0);
        mask_walls(lp.values_mut());
        Ok(lp)
    };

    let mut b = prob.rhs.clone();
    mask_walls(b.values_mut());
    let b_norm = dot(b.values(), b.values()).sqrt();
    let mut x = ScalarField::zeros(&grid);
    if b_norm == 0.0 {
        return Ok((
            x,
            PoissonReport {
                iterations: 0,
                relative_residual: 0.0,
            },
        ));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = dot(r.values(), r.values());
    let mut it = 0;
    while rr.sqrt() > prob.tol * b_norm {
        if it >= prob.max_iter {
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let ap = apply(&p)?;
        let pap = dot(p.values(), ap.values());
        if !(pap > 0.0 && pap.is_finite()) {
            // breakdown: the residual has stalled at roundoff above tol
            return Err(Error::SolverDiverged {
                iterations: it,
                residual: rr.sqrt() / b_norm,
            });
        }
        let alpha = rr / pap;
        x.axpy(alpha, &p);
        r.axpy(-alpha, &ap);
        let rr_new = dot(r.values(), r.values());
        let beta = rr_new / rr;
        rr = rr_new;
        let mut next = r.clone();
        next.axpy(beta, &p);
        p = next;
        it += 1;
        // guard against drift of the recursive residual
        if it % 50 == 0 || rr.sqrt() <= prob.tol * b_norm {
            let mut true_r = b.clone();
            true_r.axpy(-1.0, &apply(&x)?);
            r = true_r;
            rr = dot(r.values(), r.values());
        }
    }
    Ok((
        x,
        PoissonReport {
            iterations: it,
            relative_residual: rr.sqrt() / b_norm,
        },
    ))
}

/// `w_I = ρ0⁻¹ ∇v_I` with `-Δv_I = δρ_I`, so that `∇·(ρ0 w_I) = -δρ_I` away
/// from the walls up to the solver residual.
pub fn initial_displacement(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    drho: &ScalarField,
    tau0: f64,
    tol: f64,
) -> Result<(DisplacementField, PoissonReport)> {
    check_tau0(tau0)?;
    let mut prob = PoissonProblem::new(drho.clone());
    prob.tol = tol;
    let (v, report) = solve_poisson(&prob, op)?;
    let grad = op.gradient(&v)?;
    let inv = bg.rho0.map(|r| 1.0 / r);
    Ok((
        DisplacementField {
            w: grad.scaled_by(&inv),
            tau0,
            t: 0.0,
        },
        report,
    ))
}

/// `dw/dt = δu - L_{u0} w`.
pub fn displacement_rhs(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    w: &VectorField,
    du: &VectorField,
) -> Result<VectorField> {
    Grid2D::check_same(w.grid(), du.grid())?;
    let mut out = du.clone();
    out.axpy(-1.0, &op.lie_derivative(&bg.u0, w, &bg.grad_u0)?);
    Ok(out)
}

/// `h = ρ0⁻¹(δρ + ∇·(ρ0 w))`.
pub fn compute_h(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    drho: &ScalarField,
    w: &VectorField,
) -> Result<ScalarField> {
    Grid2D::check_same(drho.grid(), w.grid())?;
    let mut h = op.divergence(&w.scaled_by(&bg.rho0))?;
    h.axpy(1.0, drho);
    Ok(h.zip_map(&bg.rho0, |a, r| a / r))
}

/// `‖h‖_{ρ0}` over the non-wall rows; the wall rows carry no constraint
/// from the Poisson construction.
pub fn h_norm(bg: &BackgroundFlow, h: &ScalarField) -> Result<f64> {
    weighted_norm_rows(h, &bg.rho0, h.grid().interior_rows(1))
}

/// Max-norm, away from the walls, of
/// `∇·(ρ0 δu) - ρ0 D0(ρ0⁻¹ ∇·(ρ0 w))` where the time derivative inside `D0`
/// is `ρ0⁻¹ ∇·(ρ0 ẇ)` for a steady background.
pub fn check_divergence_identity(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    w: &VectorField,
    du: &VectorField,
    w_dot: &VectorField,
) -> Result<f64> {
    let inv = bg.rho0.map(|r| 1.0 / r);
    let mut res = op.divergence(&du.scaled_by(&bg.rho0))?;
    res.axpy(-1.0, &op.divergence(&w_dot.scaled_by(&bg.rho0))?);
    let q = op.divergence(&w.scaled_by(&bg.rho0))?.zip_map(&inv, |a, b| a * b);
    let adv = op.convective(&bg.u0, &q)?;
    res.axpy(-1.0, &adv.zip_map(&bg.rho0, |a, b| a * b));
    Ok(max_abs_rows(
        &res,
        res.grid().interior_rows(op.order().wall_band()),
    ))
}

/// Euler state together with the displacement it transports.
#[derive(Debug, Clone)]
pub struct CoupledState {
    pub xi: EulerState,
    pub w: VectorField,
}

impl Linear for CoupledState {
    fn axpy(&mut self, a: f64, other: &Self) {
        self.xi.axpy(a, &other.xi);
        self.w.axpy(a, &other.w);
    }
}

impl CoupledState {
    pub fn t(&self) -> f64 {
        self.xi.t
    }

    pub(crate) fn check_finite(&self) -> Result<()> {
        self.xi.check_finite()?;
        if let Some((c, i, j)) = self.w.first_non_finite() {
            return Err(non_finite(["w_x", "w_y"][c], i, j, self.xi.t));
        }
        Ok(())
    }
}

/// `(δu, δρ̂, w)` advanced as one system with shared RK4 stages.
pub struct CoupledSystem<'a> {
    pub euler: EulerSystem<'a>,
}

impl<'a> CoupledSystem<'a> {
    pub fn rhs(&self, s: &CoupledState, t: f64) -> Result<CoupledState> {
        Ok(CoupledState {
            xi: self.euler.rhs(&s.xi, t)?,
            w: displacement_rhs(self.euler.bg, self.euler.op, &s.w, &s.xi.du)?,
        })
    }

    /// One step; errors with `Error::NonFinite` naming the first bad field.
    pub fn step(&self, s: &CoupledState, dt: f64) -> Result<CoupledState> {
        let mut next = rk4(s, s.t(), dt, |y, t| self.rhs(y, t))?;
        next.xi.t = s.t() + dt;
        next.check_finite()?;
        Ok(next)
    }
}
