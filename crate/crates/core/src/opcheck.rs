//! Randomised and refinement checks of the discrete operators on the
//! configured background.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::background::BackgroundFlow;
use crate::config::RunConfig;
use crate::convergence::observed_order;
use crate::euler::check_boundary_subspaces;
use crate::mesh::{Grid2D, ScalarField, TensorField, VectorField};
use crate::operators::DiffOperators;
use crate::run::Setup;
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorReport {
    /// Worst relative integration-by-parts residual over the random fields.
    pub ibp_max: f64,
    pub ibp_pass: bool,
    /// Residuals of the divergence and product-rule Lie identities per level.
    pub lie_residuals: Vec<(f64, f64)>,
    /// Observed orders of the two identities on the finest pair of levels.
    pub lie_orders: (f64, f64),
    pub lie_pass: bool,
    /// Worst `check_boundary_subspaces` value divided by `ρ0c0`.
    pub subspace_max: f64,
    pub subspace_samples: usize,
    pub subspace_pass: bool,
}

impl OperatorReport {
    pub fn pass(&self) -> bool {
        self.ibp_pass && self.lie_pass && self.subspace_pass
    }

    /// `name = pass|fail (value)` lines.
    pub fn lines(&self) -> Vec<String> {
        let verdict = |b: bool| if b { "pass" } else { "fail" };
        vec![
            format!("ibp = {} ({:e})", verdict(self.ibp_pass), self.ibp_max),
            format!(
                "lie_identities = {} ({:.3}, {:.3})",
                verdict(self.lie_pass),
                self.lie_orders.0,
                self.lie_orders.1
            ),
            format!(
                "boundary_subspaces = {} ({:e} over {} samples)",
                verdict(self.subspace_pass),
                self.subspace_max,
                self.subspace_samples
            ),
        ]
    }
}

/// Max relative IBP residual of `samples` random scalar fields with entries
/// uniform in `[-1, 1]`.
pub fn random_ibp(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<f64> {
    let grid = bg.grid();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let v = (0..grid.len()).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let p = ScalarField::from_values(grid, v)?;
        worst = worst.max(op.check_ibp(bg, &p)?);
    }
    Ok(worst)
}

/// Lie identity residuals for smooth analytic fields on an `nx x ny` grid.
pub fn lie_residuals(
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    order: crate::operators::Order,
) -> Result<(f64, f64)> {
    let grid: Arc<Grid2D> = Grid2D::new(nx, ny, lx, ly, order)?;
    let op = DiffOperators::new(&grid);
    let kx = 2.0 * PI / lx;
    let ky = 2.0 / ly;
    let h = |y: f64| (ky * y).sin() + 1.5;
    let dh = |y: f64| ky * (ky * y).cos();
    let u = VectorField::from_fn(&grid, |x, y| [(kx * x).sin() * h(y), 0.0]);
    let grad = TensorField::from_fn(&grid, |x, y| {
        [[kx * (kx * x).cos() * h(y), (kx * x).sin() * dh(y)], [0.0, 0.0]]
    });
    let v = VectorField::from_fn(&grid, |x, y| {
        [0.5 * (kx * x).sin(), (3.0 * y / ly).cos() * (kx * x).cos()]
    });
    let s = ScalarField::from_fn(&grid, |x, _| (kx * x).cos());
    op.check_lie_identities(&u, &grad, &v, &s)
}

/// Worst boundary-subspace residual over `samples` random unit normals and
/// admittances (log-uniform in `[1e-6, 1e6]`), plus the extremes `Y = 0`
/// and `Y = 1e6`. Returns the value relative to `ρ0c0` and the sample count.
pub fn random_subspaces(rho0c0: f64, samples: usize, rng: &mut ChaCha8Rng) -> Result<(f64, usize)> {
    let mut ys = vec![0.0, crate::config::MAX_ADMITTANCE];
    while ys.len() < samples.max(2) {
        ys.push(10f64.powf(rng.gen_range(-6.0..=6.0)));
    }
    let mut worst: f64 = 0.0;
    for &y in &ys {
        let a: f64 = rng.gen_range(0.0..2.0 * PI);
        worst = worst.max(check_boundary_subspaces(rho0c0, [a.cos(), a.sin()], y)? / rho0c0);
    }
    Ok((worst, ys.len()))
}

/// Runs all operator checks for the configured grid and background. Lie
/// identities are measured on the configured grid and two refinements.
pub fn check_operators(cfg: &RunConfig) -> Result<OperatorReport> {
    let oc = &cfg.operators;
    let setup = Setup::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(oc.seed);

    let ibp_max = random_ibp(&setup.bg, &setup.op, oc.samples, &mut rng)?;

    let mut lie = Vec::new();
    let (mut nx, mut ny) = (cfg.nx, cfg.ny);
    for _ in 0..3 {
        lie.push(lie_residuals(nx, ny, cfg.lx, cfg.ly, cfg.order)?);
        nx *= 2;
        ny = 2 * (ny - 1) + 1;
    }
    let (c, f) = (lie[1], lie[2]);
    let order = |a: f64, b: f64| observed_order(a, b, 1e-13).unwrap_or(f64::INFINITY);
    let lie_orders = (order(c.0, f.0), order(c.1, f.1));
    let target = cfg.order.p() as f64 - 0.2;
    let lie_pass = lie_orders.0 >= target && lie_orders.1 >= target;

    let rc = setup.bg.rho0.values()[0] * setup.bg.c0.values()[0];
    let (subspace_max, subspace_samples) = random_subspaces(rc, oc.samples, &mut rng)?;

    Ok(OperatorReport {
        ibp_max,
        ibp_pass: ibp_max <= oc.ibp_tol,
        lie_residuals: lie,
        lie_orders,
        lie_pass,
        subspace_max,
        subspace_samples,
        subspace_pass: subspace_max <= oc.subspace_tol,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    #[test]
    fn default_checks_pass_on_shear() {
        let cfg = parse_config(
            "[scenario]\nname = parallel-shear\nrho_amp = 0.1\nc_amp = 0.05\n[grid]\nnx = 32\nny = 33\n[time]\nhorizon = 1\n",
        )
        .unwrap();
        let r = check_operators(&cfg).unwrap();
        assert!(r.pass(), "{:?}", r.lines());
        assert_eq!(r.subspace_samples, 100);
        assert_eq!(r.lines().len(), 3);
    }

    #[test]
    fn same_seed_same_report() {
        let cfg = parse_config(
            "[scenario]\nname = parallel-shear\n[grid]\nnx = 16\nny = 17\n[time]\nhorizon = 1\n",
        )
        .unwrap();
        assert_eq!(check_operators(&cfg).unwrap(), check_operators(&cfg).unwrap());
    }
}
