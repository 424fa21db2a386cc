//! Separable standing-wave solution of the quiescent uniform system with
//! hard walls, used as an exact reference.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::euler::EulerState;
use crate::mesh::{weighted_inner, Field, Grid2D, ScalarField, VectorField};
use crate::Result;

/// `δρ̂ = A cos(kx x) cos(ky y) cos(ωt)` with `kx = 2πm/Lx`, `ky = nπ/Ly`,
/// `ω = c |k|`, and the matching velocity
/// `δu = A (c/ω) (kx sin(kx x) cos(ky y), ky cos(kx x) sin(ky y)) sin(ωt)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandingWave {
    pub amplitude: f64,
    pub m: u32,
    pub n: u32,
    pub c: f64,
    pub lx: f64,
    pub ly: f64,
}

impl StandingWave {
    pub fn wavenumbers(&self) -> (f64, f64) {
        (2.0 * PI * self.m as f64 / self.lx, PI * self.n as f64 / self.ly)
    }

    pub fn omega(&self) -> f64 {
        let (kx, ky) = self.wavenumbers();
        self.c * kx.hypot(ky)
    }

    pub fn drho_hat(&self, x: f64, y: f64, t: f64) -> f64 {
        let (kx, ky) = self.wavenumbers();
        self.amplitude * (kx * x).cos() * (ky * y).cos() * (self.omega() * t).cos()
    }

    pub fn du(&self, x: f64, y: f64, t: f64) -> [f64; 2] {
        let (kx, ky) = self.wavenumbers();
        let s = self.amplitude * self.c / self.omega() * (self.omega() * t).sin();
        [
            s * kx * (kx * x).sin() * (ky * y).cos(),
            s * ky * (kx * x).cos() * (ky * y).sin(),
        ]
    }

    /// Displacement with `w(0) = w_I`, where `w_I` is either zero or the
    /// Poisson-constructed field `-(A/(c|k|²)) (kx sin cos, ky cos sin)`.
    pub fn w(&self, x: f64, y: f64, t: f64, poisson_start: bool) -> [f64; 2] {
        let (kx, ky) = self.wavenumbers();
        let k2 = kx * kx + ky * ky;
        let ct = (self.omega() * t).cos();
        let s = self.amplitude / (self.c * k2) * if poisson_start { -ct } else { 1.0 - ct };
        [
            s * kx * (kx * x).sin() * (ky * y).cos(),
            s * ky * (kx * x).cos() * (ky * y).sin(),
        ]
    }

    pub fn state(&self, grid: &Arc<Grid2D>, t: f64) -> EulerState {
        EulerState {
            du: VectorField::from_fn(grid, |x, y| self.du(x, y, t)),
            drho_hat: ScalarField::from_fn(grid, |x, y| self.drho_hat(x, y, t)),
            t,
        }
    }

    /// `‖δρ̂ - δρ̂_exact(t)‖ / ‖δρ̂_exact(0)‖` in the SBP norm.
    pub fn relative_error(&self, drho_hat: &ScalarField, t: f64) -> Result<f64> {
        let grid = drho_hat.grid();
        let one = ScalarField::constant(grid, 1.0);
        let exact = ScalarField::from_fn(grid, |x, y| self.drho_hat(x, y, t));
        let scale = ScalarField::from_fn(grid, |x, y| self.drho_hat(x, y, 0.0));
        let mut e = drho_hat.clone();
        e.axpy(-1.0, &exact);
        Ok((weighted_inner(&e, &e, &one)? / weighted_inner(&scale, &scale, &one)?).sqrt())
    }
}
