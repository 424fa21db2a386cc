//! Run monitors: energies, boundary flux, the energy-balance residual,
//! Galbrun residuals in two formulations, and the a-priori bounds.

use std::collections::VecDeque;
use std::fmt::Write as _;

use crate::background::BackgroundFlow;
use crate::displacement::{compute_h, h_norm, CoupledState};
use crate::error::{Error, Result};
use crate::euler::{walls, BoundarySpec, Forcing};
use crate::mesh::{
    max_abs_rows, weighted_inner, weighted_norm_rows, Field, Grid2D, ScalarField, VectorField,
};
use crate::operators::DiffOperators;

/// Monitor values at one time level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonitorRecord {
    pub t: f64,
    pub e_total: f64,
    pub e_acoustic: f64,
    pub h_norm: f64,
    pub boundary_flux: f64,
    pub energy_residual: f64,
    pub galbrun_res_primary: f64,
    pub galbrun_res_standard: f64,
    pub galbrun_form_diff: f64,
    pub mild_slack: f64,
    pub galbrun_slack: f64,
    pub forcing_norm: f64,
    pub boundary_datum_norm: f64,
}

pub const CSV_HEADER: &str = "t,E_total,E_acoustic,h_norm,boundary_flux,energy_residual,\
galbrun_res_primary,galbrun_res_standard,galbrun_form_diff,mild_slack,galbrun_slack,\
forcing_norm,boundary_datum_norm";

impl MonitorRecord {
    pub fn values(&self) -> [f64; 13] {
        [
            self.t,
            self.e_total,
            self.e_acoustic,
            self.h_norm,
            self.boundary_flux,
            self.energy_residual,
            self.galbrun_res_primary,
            self.galbrun_res_standard,
            self.galbrun_form_diff,
            self.mild_slack,
            self.galbrun_slack,
            self.forcing_norm,
            self.boundary_datum_norm,
        ]
    }

    /// One CSV row, 17 significant digits per value.
    pub fn csv_row(&self) -> String {
        let mut s = String::new();
        for (i, v) in self.values().iter().enumerate() {
            if i > 0 {
                s.push(',');
            }
            write!(s, "{v:.16e}").expect("write to String");
        }
        s
    }
}

/// `(E_total, E_acoustic)` with
/// `E_total = ½(τ0⁻²‖w‖² + ‖δρ̂‖² + ‖δu‖²)` in the `ρ0`-weighted norm.
pub fn energies(bg: &BackgroundFlow, s: &CoupledState, tau0: f64) -> Result<(f64, f64)> {
    let ac = 0.5 * s.xi.norm_sq(&bg.rho0)?;
    let ww = weighted_inner(&s.w, &s.w, &bg.rho0)?;
    Ok((ac + 0.5 * ww / (tau0 * tau0), ac))
}

/// `∮ ρ0 ξᵀ K(n) ξ` on the wall traces, where `K(n)` couples `n·δu` and
/// `δρ̂` through `c0` and carries `n·u0` on the diagonal (including the `w`
/// block). For tangential flow this is `2∮ ρ0 c0 (n·δu) δρ̂`.
pub fn trace_flux(bg: &BackgroundFlow, s: &CoupledState, tau0: f64) -> Result<f64> {
    wall_flux(bg, None, s, tau0)
}

/// Wall flux `F` seen by the scheme: the trace flux plus the work done by the
/// boundary penalty, `2∮ σ ρ0 c0 r (δρ̂ - Y n·δu) / (1+Y²)` with
/// `r = -n·δu + Y δρ̂ - g`. Equal to the trace flux whenever the boundary
/// condition holds exactly, and for `g = 0`, `σ = 1` it is
/// `2∮ ρ0 c0 Y ((n·δu)² + δρ̂²) / (1+Y²) ≥ 0`.
pub fn boundary_flux(bg: &BackgroundFlow, spec: &BoundarySpec, s: &CoupledState, tau0: f64) -> Result<f64> {
    wall_flux(bg, Some(spec), s, tau0)
}

fn wall_flux(bg: &BackgroundFlow, spec: Option<&BoundarySpec>, s: &CoupledState, tau0: f64) -> Result<f64> {
    let grid = bg.grid();
    Grid2D::check_same(grid, s.xi.grid())?;
    let mut total = 0.0;
    for (j, wall, ny) in walls(grid) {
        let mut row = 0.0;
        for i in 0..grid.nx() {
            let k = grid.idx(i, j);
            let rho = bg.rho0.values()[k];
            let c = bg.c0.values()[k];
            let un = ny * bg.u0.y[k];
            let dn = ny * s.xi.du.y[k];
            let r = s.xi.drho_hat.values()[k];
            let sq = s.xi.du.x[k].powi(2)
                + s.xi.du.y[k].powi(2)
                + r * r
                + (s.w.x[k].powi(2) + s.w.y[k].powi(2)) / (tau0 * tau0);
            row += rho * (un * sq + 2.0 * c * dn * r);
            if let Some(spec) = spec {
                let y = spec.admittance(wall, i);
                let g = spec.datum.eval(wall, grid.x(i), grid.lx(), s.t());
                let res = -dn + y * r - g;
                row += 2.0 * spec.sigma * rho * c * res * (r - y * dn) / (1.0 + y * y);
            }
        }
        total += row * grid.dx();
    }
    Ok(total)
}

/// `‖g(t)‖_{∂Ω}`.
pub fn boundary_datum_norm(grid: &Grid2D, spec: &BoundarySpec, t: f64) -> f64 {
    let mut s = 0.0;
    for (_, wall, _) in walls(grid) {
        let mut row = 0.0;
        for i in 0..grid.nx() {
            row += spec.datum.eval(wall, grid.x(i), grid.lx(), t).powi(2);
        }
        s += row * grid.dx();
    }
    s.sqrt()
}

/// Right side of the energy balance at one level:
/// `τ0⁻²(ρ0w,(∇u0)w) + (ρ0δρ̂,(D0c0/c0)δρ̂) - (ρ0δu,(∇u0)δu) + τ0⁻²(ρ0δu,w) - ½F + (ρ0δu,δφ)`.
fn energy_rate(
    bg: &BackgroundFlow,
    spec: &BoundarySpec,
    s: &CoupledState,
    tau0: f64,
    phi: Option<&VectorField>,
) -> Result<f64> {
    let rho = &bg.rho0;
    let it2 = 1.0 / (tau0 * tau0);
    let gw = bg.grad_u0.apply(&s.w);
    let gu = bg.grad_u0.apply(&s.xi.du);
    let rel = bg.d0c0.zip_map(&bg.c0, |d, c| d / c);
    let rr = s.xi.drho_hat.zip_map(&rel, |a, b| a * b);
    let mut rate = it2 * weighted_inner(&s.w, &gw, rho)? + weighted_inner(&s.xi.drho_hat, &rr, rho)?
        - weighted_inner(&s.xi.du, &gu, rho)?
        + it2 * weighted_inner(&s.xi.du, &s.w, rho)?
        - 0.5 * boundary_flux(bg, spec, s, tau0)?;
    if let Some(f) = phi {
        rate += weighted_inner(&s.xi.du, f, rho)?;
    }
    Ok(rate)
}

/// `R = (E^{n+1} - E^{n-1}) / (2Δt)` minus the energy rate at level `n`.
pub fn energy_balance_residual(
    bg: &BackgroundFlow,
    spec: &BoundarySpec,
    window: [&CoupledState; 3],
    dt: f64,
    tau0: f64,
    forcing: &Forcing,
) -> Result<f64> {
    let (e_prev, _) = energies(bg, window[0], tau0)?;
    let (e_next, _) = energies(bg, window[2], tau0)?;
    let phi = forcing.eval(bg.grid(), window[1].t());
    Ok((e_next - e_prev) / (2.0 * dt) - energy_rate(bg, spec, window[1], tau0, phi.as_ref())?)
}

/// Which formulation of Galbrun's equation to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GalbrunForm {
    /// `ρ0D0(D0w-(w·∇)u0) - ∇(c0²∇·(ρ0w)) + ρ0((D0w-(w·∇)u0)·∇)u0 + (∇p0/ρ0)∇·(ρ0w)`
    Primary,
    /// `ρ0D0²w - ∇(ρ0c0²∇·w) + (∇p0)∇·w - (∇w)ᵀ∇p0 - ρ0(w·∇)φ0`
    Standard,
}

/// L2 and max norms over rows away from the walls.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub l2: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GalbrunResiduals {
    pub primary: ResidualNorms,
    pub standard: ResidualNorms,
    pub diff: ResidualNorms,
}

fn add_scaled(out: &mut VectorField, a: f64, v: &VectorField) {
    out.axpy(a, v);
}

fn scale_each(v: &VectorField, s: &ScalarField) -> VectorField {
    v.scaled_by(s)
}

/// Galbrun residual field at the middle level of `window`, time derivatives
/// by centred three-level differences.
pub fn galbrun_residual_field(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    window: [&CoupledState; 3],
    dt: f64,
    phi: Option<&VectorField>,
    form: GalbrunForm,
) -> Result<VectorField> {
    let grid = bg.grid();
    for s in window {
        Grid2D::check_same(grid, s.w.grid())?;
    }
    let (wm, w, wp) = (&window[0].w, &window[1].w, &window[2].w);
    let mut wt = wp.clone();
    wt.axpy(-1.0, wm);
    wt.scale(0.5 / dt);
    let mut wtt = wp.clone();
    wtt.axpy(-2.0, w);
    wtt.axpy(1.0, wm);
    wtt.scale(1.0 / (dt * dt));

    let u0 = &bg.u0;
    let conv = |v: &VectorField| op.convective_vec(u0, v);
    let rho = &bg.rho0;
    let c2 = bg.c0.map(|c| c * c);

    let mut res = match form {
        GalbrunForm::Primary => {
            // z = D0 w - G w
            let gw = bg.grad_u0.apply(w);
            let ew = conv(w)?;
            let ewt = conv(&wt)?;
            let mut z = wt.clone();
            add_scaled(&mut z, 1.0, &ew);
            add_scaled(&mut z, -1.0, &gw);
            // D0 z = wtt + 2 E wt - G wt + E E w - E(G w)
            let mut d0z = wtt.clone();
            add_scaled(&mut d0z, 2.0, &ewt);
            add_scaled(&mut d0z, -1.0, &bg.grad_u0.apply(&wt));
            add_scaled(&mut d0z, 1.0, &conv(&ew)?);
            add_scaled(&mut d0z, -1.0, &conv(&gw)?);

            let div_rw = op.divergence(&w.scaled_by(rho))?;
            let mut r = scale_each(&d0z, rho);
            let pressure = op.gradient(&div_rw.zip_map(&c2, |a, b| a * b))?;
            add_scaled(&mut r, -1.0, &pressure);
            add_scaled(&mut r, 1.0, &scale_each(&bg.grad_u0.apply(&z), rho));
            let coef = div_rw.zip_map(rho, |d, r| d / r);
            add_scaled(&mut r, 1.0, &scale_each(&bg.grad_p0, &coef));
            r
        }
        GalbrunForm::Standard => {
            let ew = conv(w)?;
            let mut d2 = wtt.clone();
            add_scaled(&mut d2, 2.0, &conv(&wt)?);
            add_scaled(&mut d2, 1.0, &conv(&ew)?);
            let mut r = scale_each(&d2, rho);
            let div_w = op.divergence(w)?;
            let rc2 = rho.zip_map(&c2, |a, b| a * b);
            add_scaled(&mut r, -1.0, &op.gradient(&div_w.zip_map(&rc2, |a, b| a * b))?);
            add_scaled(&mut r, 1.0, &scale_each(&bg.grad_p0, &div_w));
            let jw = op.jacobian(w)?;
            add_scaled(&mut r, -1.0, &jw.apply_transpose(&bg.grad_p0));
            add_scaled(&mut r, -1.0, &scale_each(&bg.grad_phi0.apply(w), rho));
            r
        }
    };
    if let Some(f) = phi {
        add_scaled(&mut res, -1.0, &scale_each(f, rho));
    }
    Ok(res)
}

fn band_norms(v: &VectorField, band: std::ops::Range<usize>) -> Result<ResidualNorms> {
    let one = ScalarField::constant(v.grid(), 1.0);
    Ok(ResidualNorms {
        l2: weighted_norm_rows(v, &one, band.clone())?,
        max: max_abs_rows(v, band),
    })
}

/// Both Galbrun residuals and their difference, normed over rows at least
/// `wall_band` away from each wall.
pub fn galbrun_residuals(
    bg: &BackgroundFlow,
    op: &DiffOperators,
    window: [&CoupledState; 3],
    dt: f64,
    forcing: &Forcing,
) -> Result<GalbrunResiduals> {
    let phi = forcing.eval(bg.grid(), window[1].t());
    let p = galbrun_residual_field(bg, op, window, dt, phi.as_ref(), GalbrunForm::Primary)?;
    let s = galbrun_residual_field(bg, op, window, dt, phi.as_ref(), GalbrunForm::Standard)?;
    let mut d = p.clone();
    d.axpy(-1.0, &s);
    let band = bg.grid().interior_rows(op.order().wall_band());
    Ok(GalbrunResiduals {
        primary: band_norms(&p, band.clone())?,
        standard: band_norms(&s, band.clone())?,
        diff: band_norms(&d, band)?,
    })
}

/// `RHS/LHS - 1`, with `0` when both sides vanish.
pub fn slack(lhs: f64, rhs: f64) -> f64 {
    if lhs > 0.0 {
        rhs / lhs - 1.0
    } else if rhs >= 0.0 {
        0.0
    } else {
        -1.0
    }
}

/// `τ0⁻²‖w‖² + ‖c0ρ0⁻¹∇·(ρ0w)‖² + ‖δu‖²`, unweighted.
pub fn galbrun_energy(bg: &BackgroundFlow, op: &DiffOperators, s: &CoupledState, tau0: f64) -> Result<f64> {
    let one = ScalarField::constant(bg.grid(), 1.0);
    let div = op.divergence(&s.w.scaled_by(&bg.rho0))?;
    let q = ScalarField::from_values(
        bg.grid(),
        (0..div.values().len())
            .map(|k| bg.c0.values()[k] * div.values()[k] / bg.rho0.values()[k])
            .collect(),
    )?;
    Ok(weighted_inner(&s.w, &s.w, &one)? / (tau0 * tau0)
        + weighted_inner(&q, &q, &one)?
        + weighted_inner(&s.xi.du, &s.xi.du, &one)?)
}

/// Constants of the a-priori bounds for a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundConstants {
    pub lambda0: f64,
    pub nu: f64,
    /// `ρ̄0 / ρ̲0`.
    pub c: f64,
    pub a: f64,
    pub tau0: f64,
    /// Run horizon entering `e^{λ0 τ}`.
    pub horizon: f64,
    pub c0_max: f64,
}

/// Monitor records of a run plus the three-level window and the running
/// integrals needed for the bounds.
pub struct RunHistory<'a> {
    bg: &'a BackgroundFlow,
    op: &'a DiffOperators,
    spec: &'a BoundarySpec,
    forcing: &'a Forcing,
    pub constants: BoundConstants,
    pub dt: f64,
    pub cadence: usize,
    pub records: Vec<MonitorRecord>,
    window: VecDeque<(usize, CoupledState)>,
    mild_integral: f64,
    galbrun_integral: f64,
    prev_f_norm: f64,
    prev_g_term: f64,
    xi0_norm: f64,
    galbrun0: f64,
    drho_hat0: f64,
    h0: f64,
    eps: f64,
    last_e_acoustic: f64,
    pub e_acoustic0: f64,
    pub max_energy_increase: f64,
    pub max_h_drift: f64,
    pub max_h_rel: f64,
    pub min_mild_slack: f64,
    pub min_galbrun_slack: f64,
    pub max_energy_residual: f64,
    pub max_galbrun_primary: f64,
    pub max_galbrun_diff: f64,
    pub max_galbrun_primary_inf: f64,
    pub max_galbrun_diff_inf: f64,
    pub last_h: Option<ScalarField>,
}

impl<'a> RunHistory<'a> {
    pub fn new(
        bg: &'a BackgroundFlow,
        op: &'a DiffOperators,
        spec: &'a BoundarySpec,
        forcing: &'a Forcing,
        constants: BoundConstants,
        dt: f64,
        cadence: usize,
    ) -> Self {
        Self {
            bg,
            op,
            spec,
            forcing,
            constants,
            dt,
            cadence: cadence.max(1),
            records: Vec::new(),
            window: VecDeque::with_capacity(3),
            mild_integral: 0.0,
            galbrun_integral: 0.0,
            prev_f_norm: 0.0,
            prev_g_term: 0.0,
            xi0_norm: 0.0,
            galbrun0: 0.0,
            drho_hat0: 0.0,
            h0: 0.0,
            eps: 0.0,
            last_e_acoustic: 0.0,
            e_acoustic0: 0.0,
            max_energy_increase: 0.0,
            max_h_drift: 0.0,
            max_h_rel: 0.0,
            min_mild_slack: f64::INFINITY,
            min_galbrun_slack: f64::INFINITY,
            max_energy_residual: 0.0,
            max_galbrun_primary: 0.0,
            max_galbrun_diff: 0.0,
            max_galbrun_primary_inf: 0.0,
            max_galbrun_diff_inf: 0.0,
            last_h: None,
        }
    }

    fn forcing_norms(&self, t: f64) -> Result<(f64, f64)> {
        match self.forcing.eval(self.bg.grid(), t) {
            None => Ok((0.0, 0.0)),
            Some(f) => {
                let one = ScalarField::constant(self.bg.grid(), 1.0);
                Ok((
                    weighted_inner(&f, &f, &self.bg.rho0)?.sqrt(),
                    weighted_inner(&f, &f, &one)?.sqrt(),
                ))
            }
        }
    }

    fn galbrun_source(&self, t: f64, f_plain: f64) -> f64 {
        let g = boundary_datum_norm(self.bg.grid(), self.spec, t);
        let gterm = if g == 0.0 {
            0.0
        } else {
            self.constants.c0_max * g * g / self.constants.a
        };
        self.constants.tau0 * f_plain * f_plain + gterm
    }

    /// Adds time level `n`; returns the record for level `n - 1` when it is
    /// due and a full three-level window is available.
    pub fn push(&mut self, n: usize, s: &CoupledState) -> Result<Option<MonitorRecord>> {
        let bg = self.bg;
        let t = s.t();
        let (f_l, f_plain) = self.forcing_norms(t)?;
        let g_term = self.galbrun_source(t, f_plain);
        let (_, e_ac) = energies(bg, s, self.constants.tau0)?;
        let h = compute_h(bg, self.op, &s.xi.density(bg), &s.w)?;
        let hn = h_norm(bg, &h)?;
        let rh = s.xi.drho_hat.clone();
        let rh_norm = weighted_inner(&rh, &rh, &bg.rho0)?.sqrt();
        if n == 0 {
            self.xi0_norm = s.xi.norm_sq(&bg.rho0)?.sqrt();
            self.galbrun0 = galbrun_energy(bg, self.op, s, self.constants.tau0)?;
            self.drho_hat0 = rh_norm;
            self.h0 = hn;
            self.eps = 1e-14 * self.xi0_norm;
            self.e_acoustic0 = e_ac;
            self.last_e_acoustic = e_ac;
            self.max_h_rel = if rh_norm.max(self.eps) > 0.0 {
                hn / rh_norm.max(self.eps)
            } else {
                0.0
            };
        } else {
            self.mild_integral += 0.5 * self.dt * (self.prev_f_norm + f_l);
            self.galbrun_integral += 0.5 * self.dt * (self.prev_g_term + g_term);
            self.max_energy_increase = self.max_energy_increase.max(e_ac - self.last_e_acoustic);
            self.last_e_acoustic = e_ac;
            let denom = if self.drho_hat0 > 0.0 { self.drho_hat0 } else { 1.0 };
            self.max_h_drift = self.max_h_drift.max((hn - self.h0).abs() / denom);
            let floor = rh_norm.max(self.eps);
            if floor > 0.0 {
                self.max_h_rel = self.max_h_rel.max(hn / floor);
            }
        }
        self.prev_f_norm = f_l;
        self.prev_g_term = g_term;
        self.last_h = Some(h);

        if self.window.len() == 3 {
            self.window.pop_front();
        }
        self.window.push_back((n, s.clone()));
        if self.window.len() < 3 {
            return Ok(None);
        }
        let mid = self.window[1].0;
        if mid % self.cadence != 0 {
            return Ok(None);
        }
        let rec = self.record_middle()?;
        Ok(Some(rec))
    }

    fn record_middle(&mut self) -> Result<MonitorRecord> {
        let bg = self.bg;
        let k = &self.constants;
        let win = [&self.window[0].1, &self.window[1].1, &self.window[2].1];
        let s = win[1];
        let t = s.t();
        let (e_total, e_acoustic) = energies(bg, s, k.tau0)?;
        let h = compute_h(bg, self.op, &s.xi.density(bg), &s.w)?;
        let hn = h_norm(bg, &h)?;
        let flux = boundary_flux(bg, self.spec, s, k.tau0)?;
        let r = energy_balance_residual(bg, self.spec, win, self.dt, k.tau0, self.forcing)?;
        let gal = galbrun_residuals(bg, self.op, win, self.dt, self.forcing)?;

        // integrals up to t_n: the running sums include level n+1, undo the last step
        let (f_l_next, _) = self.forcing_norms(win[2].t())?;
        let (f_l, f_plain) = self.forcing_norms(t)?;
        let mild_int = self.mild_integral - 0.5 * self.dt * (f_l + f_l_next);
        let g_next = self.prev_g_term;
        let g_here = self.galbrun_source(t, f_plain);
        let gal_int = self.galbrun_integral - 0.5 * self.dt * (g_here + g_next);

        let mild_lhs = s.xi.norm_sq(&bg.rho0)?.sqrt();
        let mild_rhs = (k.lambda0 * k.horizon).exp() * (self.xi0_norm + mild_int);
        let mild = slack(mild_lhs, mild_rhs);
        let gal_lhs = galbrun_energy(bg, self.op, s, k.tau0)?;
        let gal_rhs = k.c * (k.nu * t).exp() * (self.galbrun0 + gal_int);
        let gslack = slack(gal_lhs, gal_rhs);

        let (_, f_plain_here) = self.forcing_norms(t)?;
        let rec = MonitorRecord {
            t,
            e_total,
            e_acoustic,
            h_norm: hn,
            boundary_flux: flux,
            energy_residual: r,
            galbrun_res_primary: gal.primary.l2,
            galbrun_res_standard: gal.standard.l2,
            galbrun_form_diff: gal.diff.l2,
            mild_slack: mild,
            galbrun_slack: gslack,
            forcing_norm: f_plain_here,
            boundary_datum_norm: boundary_datum_norm(bg.grid(), self.spec, t),
        };
        self.min_mild_slack = self.min_mild_slack.min(mild);
        self.min_galbrun_slack = self.min_galbrun_slack.min(gslack);
        self.max_energy_residual = self.max_energy_residual.max(r.abs());
        self.max_galbrun_primary = self.max_galbrun_primary.max(gal.primary.l2);
        self.max_galbrun_diff = self.max_galbrun_diff.max(gal.diff.l2);
        self.max_galbrun_primary_inf = self.max_galbrun_primary_inf.max(gal.primary.max);
        self.max_galbrun_diff_inf = self.max_galbrun_diff_inf.max(gal.diff.max);
        self.records.push(rec);
        Ok(rec)
    }

    /// Pass iff `slack ≥ threshold` at every recorded time.
    pub fn bound_check_mild(&self, threshold: f64) -> bool {
        self.records.iter().all(|r| r.mild_slack >= threshold)
    }

    /// As `bound_check_mild` for the Galbrun energy bound; needs `a > 0`.
    pub fn bound_check_galbrun(&self, threshold: f64) -> Result<bool> {
        if !(self.constants.a > 0.0) {
            return Err(Error::InvalidArgument(
                "the Galbrun energy bound needs an admittance lower bound a > 0".into(),
            ));
        }
        Ok(self.records.iter().all(|r| r.galbrun_slack >= threshold))
    }

    pub fn h0(&self) -> f64 {
        self.h0
    }

    pub fn drho_hat0(&self) -> f64 {
        self.drho_hat0
    }
}
