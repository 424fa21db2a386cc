//! Structured channel grid, node fields and the quadrature used for every
//! inner product in the crate.
//!
//! The grid is node centred: `nx` nodes along the periodic x direction with
//! spacing `Lx / nx`, and `ny` nodes along y including both wall rows, with
//! spacing `Ly / (ny - 1)`. Field values are stored row-major with x fastest,
//! so node `(i, j)` lives at `j * nx + i`.
//!
//! Reductions always sum each row sequentially and then combine the row sums
//! in increasing `j`, also when rows are evaluated in parallel, so results do
//! not depend on the thread count.

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::ops::Range;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::operators::Order;

#[derive(Debug, Clone, PartialEq)]
pub struct Grid2D {
    nx: usize,
    ny: usize,
    lx: f64,
    ly: f64,
    dx: f64,
    dy: f64,
    order: Order,
    /// Diagonal SBP norm in y, in units of `dy`.
    weights: Vec<f64>,
}

impl Grid2D {
    pub fn new(nx: usize, ny: usize, lx: f64, ly: f64, order: Order) -> Result<Arc<Self>> {
        if nx < 8 || ny < 8 {
            return Err(Error::InvalidArgument(format!(
                "grid needs nx >= 8 and ny >= 8, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && lx.is_finite() && ly > 0.0 && ly.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "domain lengths must be positive, got Lx = {lx}, Ly = {ly}"
            )));
        }
        Ok(Arc::new(Self {
            nx,
            ny,
            lx,
            ly,
            dx: lx / nx as f64,
            dy: ly / (ny - 1) as f64,
            order,
            weights: order.norm_weights(ny),
        }))
    }

    pub fn nx(&self) -> usize {
        self.nx
    }
    pub fn ny(&self) -> usize {
        self.ny
    }
    pub fn lx(&self) -> f64 {
        self.lx
    }
    pub fn ly(&self) -> f64 {
        self.ly
    }
    pub fn dx(&self) -> f64 {
        self.dx
    }
    pub fn dy(&self) -> f64 {
        self.dy
    }
    pub fn order(&self) -> Order {
        self.order
    }
    pub fn len(&self) -> usize {
        self.nx * self.ny
    }
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Quadrature weight `q_j` of row `j` (multiply by `dy` for the length).
    pub fn weight(&self, j: usize) -> f64 {
        self.weights[j]
    }
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn x(&self, i: usize) -> f64 {
        i as f64 * self.dx
    }
    pub fn y(&self, j: usize) -> f64 {
        j as f64 * self.dy
    }

    #[inline]
    pub fn idx(&self, i: usize, j: usize) -> usize {
        j * self.nx + i
    }

    /// The two wall rows with their outward normal y component.
    pub fn walls(&self) -> [(usize, f64); 2] {
        [(0, -1.0), (self.ny - 1, 1.0)]
    }

    /// Rows `band..ny-band`, used for norms that skip rows near the walls.
    pub fn interior_rows(&self, band: usize) -> Range<usize> {
        band.min(self.ny / 2)..self.ny - band.min(self.ny / 2)
    }

    pub fn all_rows(&self) -> Range<usize> {
        0..self.ny
    }

    pub(crate) fn check_same(a: &Arc<Grid2D>, b: &Arc<Grid2D>) -> Result<()> {
        if Arc::ptr_eq(a, b) || a == b {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{}x{} ({} x {}) vs {}x{} ({} x {})",
                a.nx, a.ny, a.lx, a.ly, b.nx, b.ny, b.lx, b.ly
            )))
        }
    }
}

/// Anything stored as one or more node arrays on a grid.
pub trait Field {
    fn grid(&self) -> &Arc<Grid2D>;
    fn components(&self) -> Vec<&[f64]>;

    /// First non-finite entry as `(component, i, j)`.
    fn first_non_finite(&self) -> Option<(usize, usize, usize)> {
        let nx = self.grid().nx();
        self.components()
            .iter()
            .enumerate()
            .find_map(|(c, v)| v.iter().position(|x| !x.is_finite()).map(|k| (c, k % nx, k / nx)))
    }
}

#[derive(Debug, Clone)]
pub struct ScalarField {
    grid: Arc<Grid2D>,
    values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct VectorField {
    grid: Arc<Grid2D>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// Node-wise 2x2 matrices, `m[a][b]` stored as `xx, xy, yx, yy`.
#[derive(Debug, Clone)]
pub struct TensorField {
    grid: Arc<Grid2D>,
    pub xx: Vec<f64>,
    pub xy: Vec<f64>,
    pub yx: Vec<f64>,
    pub yy: Vec<f64>,
}

impl ScalarField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: &Arc<Grid2D>, value: f64) -> Self {
        Self {
            grid: grid.clone(),
            values: vec![value; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                values.push(f(grid.x(i), grid.y(j)));
            }
        }
        Self {
            grid: grid.clone(),
            values,
        }
    }

    pub fn from_values(grid: &Arc<Grid2D>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} values for a grid of {} nodes",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self {
            grid: grid.clone(),
            values,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.idx(i, j)]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &ScalarField, f: impl Fn(f64, f64) -> f64) -> Self {
        Self {
            grid: self.grid.clone(),
            values: self
                .values
                .iter()
                .zip(&other.values)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        }
    }

    /// `self += a * other`
    pub fn axpy(&mut self, a: f64, other: &ScalarField) {
        axpy(&mut self.values, a, &other.values);
    }

    pub fn scale(&mut self, a: f64) {
        self.values.iter_mut().for_each(|v| *v *= a);
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.values)
    }
}

impl VectorField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        Self {
            grid: grid.clone(),
            x: vec![0.0; grid.len()],
            y: vec![0.0; grid.len()],
        }
    }

    pub fn constant(grid: &Arc<Grid2D>, vx: f64, vy: f64) -> Self {
        Self {
            grid: grid.clone(),
            x: vec![vx; grid.len()],
            y: vec![vy; grid.len()],
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> [f64; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let [a, b] = f(grid.x(i), grid.y(j));
                let k = grid.idx(i, j);
                out.x[k] = a;
                out.y[k] = b;
            }
        }
        out
    }

    pub fn from_components(x: ScalarField, y: ScalarField) -> Result<Self> {
        Grid2D::check_same(&x.grid, &y.grid)?;
        Ok(Self {
            grid: x.grid.clone(),
            x: x.values,
            y: y.values,
        })
    }

    pub fn component(&self, c: usize) -> ScalarField {
        ScalarField {
            grid: self.grid.clone(),
            values: if c == 0 { self.x.clone() } else { self.y.clone() },
        }
    }

    pub fn get(&self, i: usize, j: usize) -> [f64; 2] {
        let k = self.grid.idx(i, j);
        [self.x[k], self.y[k]]
    }

    pub fn axpy(&mut self, a: f64, other: &VectorField) {
        axpy(&mut self.x, a, &other.x);
        axpy(&mut self.y, a, &other.y);
    }

    pub fn scale(&mut self, a: f64) {
        self.x.iter_mut().chain(self.y.iter_mut()).for_each(|v| *v *= a);
    }

    /// Node-wise product with a scalar field.
    pub fn scaled_by(&self, s: &ScalarField) -> Self {
        let v = s.values();
        Self {
            grid: self.grid.clone(),
            x: self.x.iter().zip(v).map(|(a, b)| a * b).collect(),
            y: self.y.iter().zip(v).map(|(a, b)| a * b).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.x).max(max_abs(&self.y))
    }
}

impl TensorField {
    pub fn zeros(grid: &Arc<Grid2D>) -> Self {
        let n = grid.len();
        Self {
            grid: grid.clone(),
            xx: vec![0.0; n],
            xy: vec![0.0; n],
            yx: vec![0.0; n],
            yy: vec![0.0; n],
        }
    }

    pub fn from_fn(grid: &Arc<Grid2D>, f: impl Fn(f64, f64) -> [[f64; 2]; 2]) -> Self {
        let mut out = Self::zeros(grid);
        for j in 0..grid.ny() {
            for i in 0..grid.nx() {
                let m = f(grid.x(i), grid.y(j));
                let k = grid.idx(i, j);
                out.xx[k] = m[0][0];
                out.xy[k] = m[0][1];
                out.yx[k] = m[1][0];
                out.yy[k] = m[1][1];
            }
        }
        out
    }

    pub fn at(&self, k: usize) -> [[f64; 2]; 2] {
        [[self.xx[k], self.xy[k]], [self.yx[k], self.yy[k]]]
    }

    /// Node-wise `M v`.
    pub fn apply(&self, v: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for k in 0..self.grid.len() {
            out.x[k] = self.xx[k] * v.x[k] + self.xy[k] * v.y[k];
            out.y[k] = self.yx[k] * v.x[k] + self.yy[k] * v.y[k];
        }
        out
    }

    /// Node-wise `M^T v`.
    pub fn apply_transpose(&self, v: &VectorField) -> VectorField {
        let mut out = VectorField::zeros(&self.grid);
        for k in 0..self.grid.len() {
            out.x[k] = self.xx[k] * v.x[k] + self.yx[k] * v.y[k];
            out.y[k] = self.xy[k] * v.x[k] + self.yy[k] * v.y[k];
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        [&self.xx, &self.xy, &self.yx, &self.yy]
            .iter()
            .map(|v| max_abs(v))
            .fold(0.0, f64::max)
    }
}

impl Field for ScalarField {
    fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }
    fn components(&self) -> Vec<&[f64]> {
        vec![&self.values]
    }
}

impl Field for VectorField {
    fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }
    fn components(&self) -> Vec<&[f64]> {
        vec![&self.x, &self.y]
    }
}

impl Field for TensorField {
    fn grid(&self) -> &Arc<Grid2D> {
        &self.grid
    }
    fn components(&self) -> Vec<&[f64]> {
        vec![&self.xx, &self.xy, &self.yx, &self.yy]
    }
}

pub(crate) fn axpy(y: &mut [f64], a: f64, x: &[f64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += a * xi);
}

pub(crate) fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// Grids below this many nodes are processed on the calling thread.
const PAR_THRESHOLD: usize = 4096;

/// Fills `out` row by row with `f(j, row)`, in parallel on large grids.
pub(crate) fn fill_rows(out: &mut [f64], nx: usize, f: impl Fn(usize, &mut [f64]) + Sync) {
    if out.len() >= PAR_THRESHOLD {
        out.par_chunks_mut(nx).enumerate().for_each(|(j, row)| f(j, row));
    } else {
        out.chunks_mut(nx).enumerate().for_each(|(j, row)| f(j, row));
    }
}

/// Sum of `row_sum(j)` over `rows`, with each row evaluated independently and
/// the row totals combined in increasing `j`.
pub(crate) fn sum_rows(rows: Range<usize>, row_sum: impl Fn(usize) -> f64 + Sync + Send) -> f64 {
    let partial: Vec<f64> = if rows.len() >= 64 {
        rows.into_par_iter().map(&row_sum).collect()
    } else {
        rows.map(row_sum).collect()
    };
    partial.iter().sum()
}

/// `∫ weight * a^T b` restricted to `rows`, trapezoid in x and the SBP norm in y.
pub fn weighted_inner_rows<F: Field>(a: &F, b: &F, weight: &ScalarField, rows: Range<usize>) -> Result<f64> {
    let grid = a.grid();
    Grid2D::check_same(grid, b.grid())?;
    Grid2D::check_same(grid, weight.grid())?;
    let ca = a.components();
    let cb = b.components();
    let w = weight.values();
    let nx = grid.nx();
    let area = grid.dx() * grid.dy();
    let total = sum_rows(rows, |j| {
        let mut s = 0.0;
        for i in 0..nx {
            let k = j * nx + i;
            let mut dot = 0.0;
            for (va, vb) in ca.iter().zip(&cb) {
                dot += va[k] * vb[k];
            }
            s += w[k] * dot;
        }
        s * grid.weight(j)
    });
    Ok(total * area)
}

/// Weighted `L2(Ω)` inner product `(weight a, b)`.
pub fn weighted_inner<F: Field>(a: &F, b: &F, weight: &ScalarField) -> Result<f64> {
    weighted_inner_rows(a, b, weight, a.grid().all_rows())
}

/// Weighted `L2(∂Ω)` inner product over the two wall rows.
pub fn boundary_inner(a: &ScalarField, b: &ScalarField, weight: &ScalarField) -> Result<f64> {
    let grid = a.grid();
    Grid2D::check_same(grid, b.grid())?;
    Grid2D::check_same(grid, weight.grid())?;
    let mut total = 0.0;
    for (j, _) in grid.walls() {
        let mut s = 0.0;
        for i in 0..grid.nx() {
            let k = grid.idx(i, j);
            s += weight.values[k] * a.values[k] * b.values[k];
        }
        total += s * grid.dx();
    }
    Ok(total)
}

/// Unweighted `L2(Ω)` norm.
pub fn norm<F: Field>(a: &F) -> f64 {
    let one = ScalarField::constant(a.grid(), 1.0);
    weighted_inner(a, a, &one).unwrap_or(f64::NAN).max(0.0).sqrt()
}

/// `sqrt((weight a, a))` over `rows`.
pub fn weighted_norm_rows<F: Field>(a: &F, weight: &ScalarField, rows: Range<usize>) -> Result<f64> {
    Ok(weighted_inner_rows(a, a, weight, rows)?.max(0.0).sqrt())
}

/// Max-norm over `rows` of every component.
pub fn max_abs_rows<F: Field>(a: &F, rows: Range<usize>) -> f64 {
    let nx = a.grid().nx();
    let comps = a.components();
    let mut m: f64 = 0.0;
    for j in rows {
        for c in &comps {
            m = m.max(max_abs(&c[j * nx..(j + 1) * nx]));
        }
    }
    m
}

/// A named set of node arrays at one time level, as read back from disk.
#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub nx: usize,
    pub ny: usize,
    pub lx: f64,
    pub ly: f64,
    pub time: f64,
    pub fields: Vec<(String, Vec<f64>)>,
}

pub const SNAPSHOT_MAGIC: &str = "GALBRUN-SNAPSHOT v1";

/// Writes the `GALBRUN-SNAPSHOT v1` format: ASCII header, blank line, then
/// little-endian f64 node arrays (x fastest), one per named field.
pub fn write_snapshot(path: &Path, grid: &Grid2D, time: f64, fields: &[(&str, &[f64])]) -> Result<()> {
    let mut out = Vec::new();
    let names: Vec<&str> = fields.iter().map(|(n, _)| *n).collect();
    if names
        .iter()
        .any(|n| n.is_empty() || n.contains(char::is_whitespace))
    {
        return Err(Error::Snapshot(format!("invalid field names {names:?}")));
    }
    write!(
        out,
        "{SNAPSHOT_MAGIC}\nnx {}\nny {}\nLx {:?}\nLy {:?}\ntime {:?}\nfields {}\n\n",
        grid.nx(),
        grid.ny(),
        grid.lx(),
        grid.ly(),
        time,
        names.join(" ")
    )
    .expect("write to Vec");
    for (name, values) in fields {
        if values.len() != grid.len() {
            return Err(Error::Snapshot(format!(
                "field `{name}` has {} values, grid has {}",
                values.len(),
                grid.len()
            )));
        }
        for v in *values {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub fn read_snapshot(path: &Path) -> Result<Snapshot> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut header = Vec::new();
    loop {
        let mut line = String::new();
        let n = reader.read_line(&mut line).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            return Err(Error::Snapshot("unterminated header".into()));
        }
        let line = line.trim_end_matches('\n').to_string();
        if line.is_empty() {
            break;
        }
        header.push(line);
    }
    if header.first().map(String::as_str) != Some(SNAPSHOT_MAGIC) {
        return Err(Error::Snapshot(format!("missing `{SNAPSHOT_MAGIC}` magic line")));
    }
    let value = |key: &str| -> Result<&str> {
        header
            .iter()
            .find_map(|l| l.strip_prefix(key).and_then(|r| r.strip_prefix(' ')))
            .ok_or_else(|| Error::Snapshot(format!("missing header key `{key}`")))
    };
    let parse = |key: &str| -> Result<f64> {
        value(key)?
            .trim()
            .parse()
            .map_err(|_| Error::Snapshot(format!("bad value for `{key}`")))
    };
    let nx: usize = value("nx")?
        .trim()
        .parse()
        .map_err(|_| Error::Snapshot("bad nx".into()))?;
    let ny: usize = value("ny")?
        .trim()
        .parse()
        .map_err(|_| Error::Snapshot("bad ny".into()))?;
    let names: Vec<String> = value("fields")?.split_whitespace().map(str::to_string).collect();
    let mut data = Vec::new();
    reader.read_to_end(&mut data).map_err(|e| Error::io(path, e))?;
    let n = nx * ny;
    if data.len() != names.len() * n * 8 {
        return Err(Error::Snapshot(format!(
            "payload has {} bytes, expected {}",
            data.len(),
            names.len() * n * 8
        )));
    }
    let fields = names
        .into_iter()
        .enumerate()
        .map(|(f, name)| {
            let values = data[f * n * 8..(f + 1) * n * 8]
                .chunks_exact(8)
                .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
                .collect();
            (name, values)
        })
        .collect();
    Ok(Snapshot {
        nx,
        ny,
        lx: parse("Lx")?,
        ly: parse("Ly")?,
        time: parse("time")?,
        fields,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn grid(n: usize) -> Arc<Grid2D> {
        Grid2D::new(n, n + 1, 1.0, 1.0, Order::Second).unwrap()
    }

    #[test]
    fn weights_integrate_to_ly() {
        for order in [Order::Second, Order::Fourth] {
            let g = Grid2D::new(16, 21, 2.0, 3.0, order).unwrap();
            let total: f64 = g.weights().iter().sum::<f64>() * g.dy();
            assert!((total - 3.0).abs() < 1e-14, "{order:?}: {total}");
        }
    }

    #[test]
    fn rejects_small_grids() {
        assert!(Grid2D::new(4, 16, 1.0, 1.0, Order::Second).is_err());
        assert!(Grid2D::new(16, 7, 1.0, 1.0, Order::Second).is_err());
        assert!(Grid2D::new(16, 16, -1.0, 1.0, Order::Second).is_err());
    }

    #[test]
    fn unit_area() {
        let g = grid(16);
        let one = ScalarField::constant(&g, 1.0);
        assert!((weighted_inner(&one, &one, &one).unwrap() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn sine_squared_is_exact_in_x() {
        let g = grid(32);
        let s = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).sin());
        let one = ScalarField::constant(&g, 1.0);
        assert!((weighted_inner(&s, &s, &one).unwrap() - 0.5).abs() < 1e-13);
    }

    #[test]
    fn bilinear_example() {
        let g = grid(16);
        let a = ScalarField::constant(&g, 1.0);
        let b = ScalarField::constant(&g, -1.0);
        let w = ScalarField::constant(&g, 2.0);
        assert!((weighted_inner(&a, &b, &w).unwrap() + 2.0).abs() < 1e-14);
    }

    #[test]
    fn quadrature_converges_at_second_order() {
        // ∫∫ cos(πy/2) exp(y) dx dy on [0,1]^2, closed form
        let exact = {
            let k = PI / 2.0;
            (1.0f64.exp() * (k.cos() + k * k.sin()) - 1.0) / (1.0 + k * k)
        };
        let err = |n: usize| {
            let g = Grid2D::new(8, n + 1, 1.0, 1.0, Order::Second).unwrap();
            let f = ScalarField::from_fn(&g, |_, y| (PI * y / 2.0).cos() * y.exp());
            let one = ScalarField::constant(&g, 1.0);
            (weighted_inner(&f, &one, &one).unwrap() - exact).abs()
        };
        let order = (err(16) / err(32)).log2();
        assert!(order > 1.9, "order {order}");
    }

    #[test]
    fn boundary_examples() {
        let g = grid(16);
        let one = ScalarField::constant(&g, 1.0);
        assert!((boundary_inner(&one, &one, &one).unwrap() - 2.0).abs() < 1e-14);
        let c = ScalarField::from_fn(&g, |x, _| (2.0 * PI * x).cos());
        assert!((boundary_inner(&c, &c, &one).unwrap() - 1.0).abs() < 1e-13);
        let zero = ScalarField::zeros(&g);
        assert_eq!(boundary_inner(&zero, &c, &one).unwrap(), 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let a = ScalarField::zeros(&grid(16));
        let b = ScalarField::zeros(&grid(8));
        let w = ScalarField::constant(&grid(16), 1.0);
        assert!(matches!(weighted_inner(&a, &b, &w), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn snapshot_round_trip_is_bit_exact() {
        let g = Grid2D::new(9, 11, 0.3, 1.7, Order::Second).unwrap();
        let a = ScalarField::from_fn(&g, |x, y| (x * 13.1).sin() / (y + 0.1));
        let b = ScalarField::from_fn(&g, |x, y| x.exp() - y * 1e-300);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.snap");
        write_snapshot(&path, &g, 0.1 + 0.2, &[("a", a.values()), ("b", b.values())]).unwrap();
        let snap = read_snapshot(&path).unwrap();
        assert_eq!(snap.nx, 9);
        assert_eq!(snap.ny, 11);
        assert_eq!(snap.lx.to_bits(), 0.3f64.to_bits());
        assert_eq!(snap.time.to_bits(), (0.1f64 + 0.2).to_bits());
        assert_eq!(snap.fields[0].0, "a");
        let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
        assert_eq!(bits(&snap.fields[0].1), bits(a.values()));
        assert_eq!(bits(&snap.fields[1].1), bits(b.values()));
    }

    #[test]
    fn snapshot_rejects_truncated_payload() {
        let g = grid(8);
        let a = ScalarField::zeros(&g);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.snap");
        write_snapshot(&path, &g, 0.0, &[("a", a.values())]).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        std::fs::write(&path, bytes).unwrap();
        assert!(matches!(read_snapshot(&path), Err(Error::Snapshot(_))));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn inner_is_symmetric_and_positive(
                seed_a in proptest::collection::vec(-1e3f64..1e3, 9 * 10),
                seed_b in proptest::collection::vec(-1e3f64..1e3, 9 * 10),
                wv in 0.1f64..10.0,
            ) {
                let g = Grid2D::new(9, 10, 1.3, 0.7, Order::Second).unwrap();
                let a = ScalarField::from_values(&g, seed_a).unwrap();
                let b = ScalarField::from_values(&g, seed_b).unwrap();
                let w = ScalarField::from_fn(&g, |x, y| wv + x * y);
                let ab = weighted_inner(&a, &b, &w).unwrap();
                let ba = weighted_inner(&b, &a, &w).unwrap();
                prop_assert_eq!(ab.to_bits(), ba.to_bits());
                prop_assert!(weighted_inner(&a, &a, &w).unwrap() >= 0.0);
            }
        }
    }
}
