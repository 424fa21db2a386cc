//! Finite-difference operators on the channel grid.
//!
//! x derivatives are periodic centred differences. y derivatives use a
//! diagonal-norm summation-by-parts operator `D = H^{-1} Q` with
//! `Q + Q^T = diag(-1, 0, ..., 0, 1)`, so that for every column
//! `(D a, b)_H + (a, D b)_H = a_N b_N - a_0 b_0`.

use std::sync::Arc;

use crate::background::BackgroundFlow;
use crate::error::Result;
use crate::mesh::{
    fill_rows, max_abs_rows, weighted_inner, Field, Grid2D, ScalarField, TensorField, VectorField,
};

/// Interior accuracy of the difference operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Order {
    /// Centred interior, first-order one-sided closure.
    Second,
    /// SBP(4,2): fourth-order interior, second-order closure.
    Fourth,
}

const H4: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

const D4_BOUNDARY: [&[f64]; 4] = [
    &[-24.0 / 17.0, 59.0 / 34.0, -4.0 / 17.0, -3.0 / 34.0],
    &[-1.0 / 2.0, 0.0, 1.0 / 2.0],
    &[4.0 / 43.0, -59.0 / 86.0, 0.0, 59.0 / 86.0, -4.0 / 43.0],
    &[3.0 / 98.0, 0.0, -59.0 / 98.0, 0.0, 32.0 / 49.0, -4.0 / 49.0],
];

const D4_INTERIOR: [f64; 5] = [1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0];

impl Order {
    pub fn from_p(p: usize) -> Option<Self> {
        match p {
            2 => Some(Order::Second),
            4 => Some(Order::Fourth),
            _ => None,
        }
    }

    pub fn p(self) -> usize {
        match self {
            Order::Second => 2,
            Order::Fourth => 4,
        }
    }

    /// Rows next to each wall where compositions of two y derivatives lose
    /// accuracy; residual norms that involve such compositions skip them.
    pub fn wall_band(self) -> usize {
        match self {
            Order::Second => 2,
            Order::Fourth => 6,
        }
    }

    /// Diagonal of `H / dy` for `ny` nodes.
    pub fn norm_weights(self, ny: usize) -> Vec<f64> {
        let mut q = vec![1.0; ny];
        match self {
            Order::Second => {
                q[0] = 0.5;
                q[ny - 1] = 0.5;
            }
            Order::Fourth => {
                for (k, h) in H4.iter().enumerate() {
                    q[k] = *h;
                    q[ny - 1 - k] = *h;
                }
            }
        }
        q
    }

    /// Row stencils of `D * dy` as `(column, coefficient)` lists.
    fn y_stencils(self, ny: usize) -> Vec<Vec<(usize, f64)>> {
        let last = ny - 1;
        let mut rows: Vec<Vec<(usize, f64)>> = Vec::with_capacity(ny);
        match self {
            Order::Second => {
                for j in 0..ny {
                    rows.push(if j == 0 {
                        vec![(0, -1.0), (1, 1.0)]
                    } else if j == last {
                        vec![(last - 1, -1.0), (last, 1.0)]
                    } else {
                        vec![(j - 1, -0.5), (j + 1, 0.5)]
                    });
                }
            }
            Order::Fourth => {
                let nb = D4_BOUNDARY.len();
                for j in 0..ny {
                    let row = if j < nb {
                        nonzero(D4_BOUNDARY[j].iter().enumerate().map(|(m, &c)| (m, c)))
                    } else if j > last - nb {
                        let k = last - j;
                        nonzero(D4_BOUNDARY[k].iter().enumerate().map(|(m, &c)| (last - m, -c)))
                    } else {
                        nonzero(D4_INTERIOR.iter().enumerate().map(|(m, &c)| (j + m - 2, c)))
                    };
                    rows.push(row);
                }
            }
        }
        rows
    }
}

fn nonzero(it: impl Iterator<Item = (usize, f64)>) -> Vec<(usize, f64)> {
    it.filter(|(_, c)| *c != 0.0).collect()
}

/// Difference operators bound to one grid.
#[derive(Debug, Clone)]
pub struct DiffOperators {
    grid: Arc<Grid2D>,
    y_rows: Vec<Vec<(usize, f64)>>,
}

impl DiffOperators {
    pub fn new(grid: &Arc<Grid2D>) -> Self {
        Self {
            grid: grid.clone(),
            y_rows: grid.order().y_stencils(grid.ny()),
        }
    }

    pub fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }

    pub fn order(&self) -> Order {
        self.grid.order()
    }

    fn check(&self, f: &impl Field) -> Result<()> {
        Grid2D::check_same(&self.grid, f.grid())
    }

    fn d_x_raw(&self, f: &[f64]) -> Vec<f64> {
        let nx = self.grid.nx();
        let mut out = vec![0.0; f.len()];
        let order = self.order();
        let inv = 1.0 / self.grid.dx();
        fill_rows(&mut out, nx, |j, row| {
            let src = &f[j * nx..(j + 1) * nx];
            let at = |i: usize, o: isize| src[(i as isize + o).rem_euclid(nx as isize) as usize];
            for (i, r) in row.iter_mut().enumerate() {
                *r = match order {
                    Order::Second => 0.5 * (at(i, 1) - at(i, -1)) * inv,
                    Order::Fourth => (8.0 * (at(i, 1) - at(i, -1)) - (at(i, 2) - at(i, -2))) * inv / 12.0,
                };
            }
        });
        out
    }

    fn d_y_raw(&self, f: &[f64]) -> Vec<f64> {
        let nx = self.grid.nx();
        let mut out = vec![0.0; f.len()];
        let inv = 1.0 / self.grid.dy();
        fill_rows(&mut out, nx, |j, row| {
            for &(m, c) in &self.y_rows[j] {
                let src = &f[m * nx..(m + 1) * nx];
                for (r, s) in row.iter_mut().zip(src) {
                    *r += c * s;
                }
            }
            row.iter_mut().for_each(|r| *r *= inv);
        });
        out
    }

    pub fn d_x(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        ScalarField::from_values(&self.grid, self.d_x_raw(f.values()))
    }

    pub fn d_y(&self, f: &ScalarField) -> Result<ScalarField> {
        self.check(f)?;
        ScalarField::from_values(&self.grid, self.d_y_raw(f.values()))
    }

    pub fn gradient(&self, s: &ScalarField) -> Result<VectorField> {
        VectorField::from_components(self.d_x(s)?, self.d_y(s)?)
    }

    pub fn divergence(&self, v: &VectorField) -> Result<ScalarField> {
        self.check(v)?;
        let mut out = self.d_x_raw(&v.x);
        let dy = self.d_y_raw(&v.y);
        out.iter_mut().zip(&dy).for_each(|(a, b)| *a += b);
        ScalarField::from_values(&self.grid, out)
    }

    /// Discrete `(∇v)_{ab} = ∂_b v_a`.
    pub fn jacobian(&self, v: &VectorField) -> Result<TensorField> {
        self.check(v)?;
        let mut t = TensorField::zeros(&self.grid);
        t.xx = self.d_x_raw(&v.x);
        t.xy = self.d_y_raw(&v.x);
        t.yx = self.d_x_raw(&v.y);
        t.yy = self.d_y_raw(&v.y);
        Ok(t)
    }

    /// `divergence(gradient(s))` on every node, walls included.
    pub fn laplacian(&self, s: &ScalarField) -> Result<ScalarField> {
        self.divergence(&self.gradient(s)?)
    }

    /// `(u0·∇)f` for a scalar field.
    pub fn convective(&self, u0: &VectorField, f: &ScalarField) -> Result<ScalarField> {
        self.check(u0)?;
        self.check(f)?;
        let fx = self.d_x_raw(f.values());
        let fy = self.d_y_raw(f.values());
        let values = (0..f.values().len())
            .map(|k| u0.x[k] * fx[k] + u0.y[k] * fy[k])
            .collect();
        ScalarField::from_values(&self.grid, values)
    }

    /// `(u0·∇)v` for a vector field, component-wise.
    pub fn convective_vec(&self, u0: &VectorField, v: &VectorField) -> Result<VectorField> {
        VectorField::from_components(
            self.convective(u0, &v.component(0))?,
            self.convective(u0, &v.component(1))?,
        )
    }

    /// `L_{u0} w = (u0·∇)w - (w·∇)u0` with `(w·∇)u0 = (∇u0) w` taken from
    /// the supplied analytic gradient.
    pub fn lie_derivative(
        &self,
        u0: &VectorField,
        w: &VectorField,
        grad_u0: &TensorField,
    ) -> Result<VectorField> {
        self.check(grad_u0)?;
        let mut out = self.convective_vec(u0, w)?;
        out.axpy(-1.0, &grad_u0.apply(w));
        Ok(out)
    }

    /// Relative residual `|(ρ0 (u0·∇)p, p) - ½(ρ0 (n·u0) p, p)_∂Ω| / (ρ0 p, p)`.
    pub fn check_ibp(&self, bg: &BackgroundFlow, p: &ScalarField) -> Result<f64> {
        let conv = self.convective(&bg.u0, p)?;
        let volume = weighted_inner(&conv, p, &bg.rho0)?;
        let mut wall = 0.0;
        for (j, ny) in self.grid.walls() {
            let mut s = 0.0;
            for i in 0..self.grid.nx() {
                let k = self.grid.idx(i, j);
                s += bg.rho0.values()[k] * ny * bg.u0.y[k] * p.values()[k] * p.values()[k];
            }
            wall += s * self.grid.dx();
        }
        let scale = weighted_inner(p, p, &bg.rho0)?;
        let residual = (volume - 0.5 * wall).abs();
        Ok(if scale > 0.0 { residual / scale } else { residual })
    }

    /// Max-norm residuals over rows away from the walls of
    ///
    /// * `∇·L_u v - (u·∇)(∇·v) + (v·∇)(∇·u)`
    /// * `L_u(s v) - v (u·∇)s - s L_u v`
    ///
    /// with `grad_u` the exact gradient of `u` used inside `L_u`.
    pub fn check_lie_identities(
        &self,
        u: &VectorField,
        grad_u: &TensorField,
        v: &VectorField,
        s: &ScalarField,
    ) -> Result<(f64, f64)> {
        let band = self.grid.interior_rows(self.order().wall_band());

        let mut div_id = self.divergence(&self.lie_derivative(u, v, grad_u)?)?;
        div_id.axpy(-1.0, &self.convective(u, &self.divergence(v)?)?);
        div_id.axpy(1.0, &self.convective(v, &self.divergence(u)?)?);

        let sv = v.scaled_by(s);
        let mut prod = self.lie_derivative(u, &sv, grad_u)?;
        prod.axpy(-1.0, &v.scaled_by(&self.convective(u, s)?));
        prod.axpy(-1.0, &self.lie_derivative(u, v, grad_u)?.scaled_by(s));

        Ok((max_abs_rows(&div_id, band.clone()), max_abs_rows(&prod, band)))
    }

    /// Dense `D * dy` matrix in y, for tests and small diagnostics.
    pub fn y_matrix(&self) -> Vec<Vec<f64>> {
        let ny = self.grid.ny();
        let mut m = vec![vec![0.0; ny]; ny];
        for (j, row) in self.y_rows.iter().enumerate() {
            for &(c, v) in row {
                m[j][c] = v;
            }
        }
        m
    }
}

impl Grid2D {
    /// Convenience for `DiffOperators::new`.
    pub fn operators(self: &Arc<Self>) -> DiffOperators {
        DiffOperators::new(self)
    }
}
