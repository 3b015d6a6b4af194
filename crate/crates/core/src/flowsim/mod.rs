//! Desk-scale reference simulator: immiscible two-phase (CO2-brine)
//! gravity-segregating Darcy flow with a rate-controlled injector.
//!
//! IMPES scheme: an implicit 7-point finite-volume pressure solve with
//! harmonic transmissibilities and phase-potential-upwinded mobilities,
//! followed by explicit saturation sub-steps that transport gas with a
//! fractional-flow split of the frozen total velocity plus a
//! gravity-segregation term. No-flow boundaries everywhere; the areal
//! boundary ring carries a pore-volume multiplier that emulates a large
//! surrounding pressure-dissipation region. Constant fluid properties,
//! slightly compressible rock storage in the pressure equation only.

pub mod relperm;
pub mod solver;

pub use relperm::{brooks_corey, leverett_pc, RelPermConfig};

use crate::geomodel::GeoModel;
use crate::grid::Grid3;
use crate::{GhmError, Result};
use serde::{Deserialize, Serialize};
use solver::{cg_solve, SevenPoint};

pub const MD_TO_M2: f64 = 9.869233e-16;
pub const GRAVITY: f64 = 9.80665;
pub const DAY_SECONDS: f64 = 86400.0;
pub const YEAR_DAYS: f64 = 365.0;

/// Constant phase properties (defaults evaluated once at 20 MPa, 50.3 C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FluidConfig {
    /// Gas (supercritical CO2) density, kg/m3.
    pub rho_g: f64,
    /// Brine density, kg/m3.
    pub rho_w: f64,
    /// Gas viscosity, Pa s.
    pub mu_g: f64,
    /// Brine viscosity, Pa s.
    pub mu_w: f64,
}

impl Default for FluidConfig {
    fn default() -> Self {
        FluidConfig { rho_g: 784.0, rho_w: 1035.0, mu_g: 6.6e-5, mu_w: 5.5e-4 }
    }
}

impl FluidConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rho_g <= 0.0 || self.rho_w <= 0.0 || self.mu_g <= 0.0 || self.mu_w <= 0.0 {
            return Err(GhmError::Config("fluid properties must be positive".into()));
        }
        if self.rho_w <= self.rho_g {
            return Err(GhmError::Config("brine must be denser than CO2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WellKind {
    Injector,
    Monitor,
}

/// A vertical, fully penetrating well at areal column (i, j), 0-based.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WellSpec {
    pub i: usize,
    pub j: usize,
    /// Mass rate in Mt/year; only meaningful for injectors.
    pub rate_mt_per_year: f64,
    pub kind: WellKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    /// Number of report steps over the simulated period.
    pub n_steps: usize,
    pub total_days: f64,
    /// Pore-volume multiplier on areal boundary cells.
    pub m_pv: f64,
    /// Rock compressibility for the pressure storage term, 1/Pa.
    pub c_r: f64,
    /// Maximum saturation change per explicit sub-step.
    pub ds_max: f64,
    pub max_substeps_per_step: usize,
    pub cg_tol: f64,
    pub cg_max_iters: usize,
    /// Implicit pressure updates per report step.
    pub pressure_updates_per_step: usize,
    /// Initial pressure at the top of the aquifer, Pa.
    pub p_ref: f64,
    pub use_capillary: bool,
    /// Leverett J-function scale, Pa m.
    pub cap_c_ref: f64,
    pub cap_pc_max: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            n_steps: 30,
            total_days: YEAR_DAYS,
            m_pv: 1e4,
            c_r: 5e-10,
            ds_max: 0.05,
            max_substeps_per_step: 200_000,
            cg_tol: 1e-9,
            cg_max_iters: 8000,
            pressure_updates_per_step: 2,
            p_ref: 20e6,
            use_capillary: false,
            cap_c_ref: 1.6e-3,
            cap_pc_max: 5e5,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 1 || self.total_days <= 0.0 {
            return Err(GhmError::Config("simulation needs n_steps >= 1, total_days > 0".into()));
        }
        if !(self.ds_max > 0.0 && self.ds_max < 1.0) {
            return Err(GhmError::Config("ds_max must be in (0, 1)".into()));
        }
        if self.m_pv < 1.0 {
            return Err(GhmError::Config("pore-volume multiplier must be >= 1".into()));
        }
        if self.pressure_updates_per_step < 1 {
            return Err(GhmError::Config("pressure_updates_per_step must be >= 1".into()));
        }
        Ok(())
    }
}

/// Gas-saturation snapshots and mass ledger at report steps.
///
/// `sat[0]` is the initial condition; `sat[s]` corresponds to `times_days[s]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub sat: Vec<Grid3<f32>>,
    pub times_days: Vec<f64>,
    /// Cumulative injected mass, kg, per report step.
    pub mass_injected: Vec<f64>,
    /// Gas mass in place computed from the saturation state, kg.
    pub mass_in_place: Vec<f64>,
    pub substeps: usize,
    pub max_sg_seen: f64,
}

impl SimResult {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        use crate::io::{Ghm1File, Section};
        let mut f = Ghm1File::new();
        for (s, snap) in self.sat.iter().enumerate() {
            f.insert(
                &format!("sat{s:03}"),
                Section::f32(vec![snap.nx, snap.ny, snap.nz], snap.data.clone()),
            );
        }
        f.insert("times_days", Section::f64(vec![self.times_days.len()], self.times_days.clone()));
        f.insert(
            "mass_injected",
            Section::f64(vec![self.mass_injected.len()], self.mass_injected.clone()),
        );
        f.insert(
            "mass_in_place",
            Section::f64(vec![self.mass_in_place.len()], self.mass_in_place.clone()),
        );
        f.insert("substeps", Section::scalar(self.substeps as f64));
        f.insert("max_sg_seen", Section::scalar(self.max_sg_seen));
        f.write_to(path)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        use crate::io::Ghm1File;
        let f = Ghm1File::read_from(path)?;
        let times_days = f.get("times_days")?.as_f64()?.to_vec();
        let mut sat = Vec::with_capacity(times_days.len());
        for s in 0..times_days.len() {
            let sec = f.get(&format!("sat{s:03}"))?;
            if sec.shape.len() != 3 {
                return Err(GhmError::Format("snapshot section must be 3-D".into()));
            }
            sat.push(Grid3 {
                nx: sec.shape[0],
                ny: sec.shape[1],
                nz: sec.shape[2],
                data: sec.as_f32()?.to_vec(),
            });
        }
        Ok(SimResult {
            sat,
            times_days,
            mass_injected: f.get("mass_injected")?.as_f64()?.to_vec(),
            mass_in_place: f.get("mass_in_place")?.as_f64()?.to_vec(),
            substeps: f.get("substeps")?.scalar_value()? as usize,
            max_sg_seen: f.get("max_sg_seen")?.scalar_value()?,
        })
    }

    /// Relative mass-balance error at a report step (0 when nothing injected).
    pub fn mass_balance_error(&self, step: usize) -> f64 {
        let injected = self.mass_injected[step];
        if injected == 0.0 {
            return self.mass_in_place[step].abs();
        }
        (self.mass_in_place[step] - injected).abs() / injected
    }

    pub fn n_report_steps(&self) -> usize {
        self.sat.len() - 1
    }
}

/// Vertically resolved saturation profile at one areal location over time.
#[derive(Debug, Clone, PartialEq)]
pub struct MonitorProfile {
    pub nz: usize,
    pub steps: Vec<usize>,
    /// Row-major (layer, step): `data[k * steps.len() + s]`.
    pub data: Vec<f64>,
}

impl MonitorProfile {
    pub fn get(&self, layer: usize, step_pos: usize) -> f64 {
        self.data[layer * self.steps.len() + step_pos]
    }

    /// Step-major flattening (for each step, all layers), the ordering used
    /// by observation and prediction vectors.
    pub fn data_step_major(&self) -> Vec<f64> {
        let n_s = self.steps.len();
        let mut out = Vec::with_capacity(self.nz * n_s);
        for s in 0..n_s {
            for k in 0..self.nz {
                out.push(self.get(k, s));
            }
        }
        out
    }
}

/// Column of gas saturation at the well location for the requested steps.
pub fn extract_monitor(
    result: &SimResult,
    well: &WellSpec,
    step_indices: &[usize],
) -> Result<MonitorProfile> {
    let first = result
        .sat
        .first()
        .ok_or_else(|| GhmError::Shape("empty simulation result".into()))?;
    if well.i >= first.nx || well.j >= first.ny {
        return Err(GhmError::Config(format!(
            "monitor well ({}, {}) outside grid {}x{}",
            well.i, well.j, first.nx, first.ny
        )));
    }
    let nz = first.nz;
    let mut data = vec![0.0; nz * step_indices.len()];
    for (s, &step) in step_indices.iter().enumerate() {
        let snap = result.sat.get(step).ok_or_else(|| {
            GhmError::Config(format!("report step {step} out of range 0..={}", result.sat.len() - 1))
        })?;
        for k in 0..nz {
            data[k * step_indices.len() + s] = snap.get(well.i, well.j, k) as f64;
        }
    }
    Ok(MonitorProfile { nz, steps: step_indices.to_vec(), data })
}

struct FaceArrays {
    tx: Vec<f64>,
    ty: Vec<f64>,
    tz: Vec<f64>,
}

/// Run the IMPES simulation. Deterministic: no randomness anywhere.
pub fn simulate(
    model: &GeoModel,
    wells: &[WellSpec],
    fluid: &FluidConfig,
    relperm: &RelPermConfig,
    cfg: &SimConfig,
) -> Result<SimResult> {
    fluid.validate()?;
    relperm.validate()?;
    cfg.validate()?;
    let dims = &model.dims;
    let (nx, ny, nz) = (dims.nx, dims.ny, dims.nz);
    let n = dims.n_cells();
    if model.kx.len() != n || model.kz.len() != n || model.phi.len() != n {
        return Err(GhmError::Shape("geomodel field sizes do not match dims".into()));
    }

    let injectors: Vec<&WellSpec> = wells.iter().filter(|w| w.kind == WellKind::Injector).collect();
    if injectors.len() != 1 {
        return Err(GhmError::Config(format!("exactly one injector required, got {}", injectors.len())));
    }
    let inj = injectors[0];
    for w in wells {
        if w.i >= nx || w.j >= ny {
            return Err(GhmError::Config(format!("well ({}, {}) outside grid", w.i, w.j)));
        }
    }
    if inj.rate_mt_per_year < 0.0 {
        return Err(GhmError::Config("injection rate must be >= 0".into()));
    }

    let sx = ny * nz;
    let sg_max = relperm.sg_max();

    // Pore volumes with the boundary multiplier on the areal ring.
    let cell_vol = dims.dx * dims.dy * dims.dz;
    let is_boundary = |i: usize, j: usize| nx >= 3 && ny >= 3 && (i == 0 || i == nx - 1 || j == 0 || j == ny - 1);
    let mut v_p = vec![0.0; n];
    for i in 0..nx {
        for j in 0..ny {
            let mult = if is_boundary(i, j) { cfg.m_pv } else { 1.0 };
            for k in 0..nz {
                let idx = (i * ny + j) * nz + k;
                v_p[idx] = cell_vol * model.phi.data[idx] * mult;
            }
        }
    }

    // Geometric transmissibilities (harmonic permeability), m^3.
    let mut faces = FaceArrays { tx: vec![0.0; n], ty: vec![0.0; n], tz: vec![0.0; n] };
    let harm = |a: f64, b: f64| if a + b > 0.0 { 2.0 * a * b / (a + b) } else { 0.0 };
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let idx = (i * ny + j) * nz + k;
                if i + 1 < nx {
                    let kh = harm(model.kx.data[idx], model.kx.data[idx + sx]) * MD_TO_M2;
                    faces.tx[idx] = kh * dims.dy * dims.dz / dims.dx;
                }
                if j + 1 < ny {
                    let kh = harm(model.kx.data[idx], model.kx.data[idx + nz]) * MD_TO_M2;
                    faces.ty[idx] = kh * dims.dx * dims.dz / dims.dy;
                }
                if k + 1 < nz {
                    let kv = harm(model.kz.data[idx], model.kz.data[idx + 1]) * MD_TO_M2;
                    faces.tz[idx] = kv * dims.dx * dims.dy / dims.dz;
                }
            }
        }
    }

    let depth: Vec<f64> = (0..nz).map(|k| (k as f64 + 0.5) * dims.dz).collect();

    // Initial state: hydrostatic water, no gas.
    let mut s_g = vec![0.0; n];
    let mut p = vec![0.0; n];
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                p[(i * ny + j) * nz + k] = cfg.p_ref + fluid.rho_w * GRAVITY * depth[k];
            }
        }
    }

    // Injector column: allocation proportional to kx * dz (dz constant).
    let inj_cells: Vec<usize> = (0..nz).map(|k| (inj.i * ny + inj.j) * nz + k).collect();
    let weight_sum: f64 = inj_cells.iter().map(|&c| model.kx.data[c]).sum();
    if weight_sum <= 0.0 {
        return Err(GhmError::Numeric("injector column has zero permeability".into()));
    }
    let inj_weights: Vec<f64> = inj_cells.iter().map(|&c| model.kx.data[c] / weight_sum).collect();
    let rate_kg_s = inj.rate_mt_per_year * 1e9 / (YEAR_DAYS * DAY_SECONDS);
    let q_total = rate_kg_s / fluid.rho_g; // m^3/s of gas

    let mut lam_w = vec![0.0; n];
    let mut lam_g = vec![0.0; n];
    let update_mobility = |idx: usize, s_g: &[f64], lam_w: &mut [f64], lam_g: &mut [f64]| {
        let (krw, krg) = brooks_corey(1.0 - s_g[idx], relperm);
        lam_w[idx] = krw / fluid.mu_w;
        lam_g[idx] = krg / fluid.mu_g;
    };
    for idx in 0..n {
        update_mobility(idx, &s_g, &mut lam_w, &mut lam_g);
    }

    let mut ut_x = vec![0.0; n];
    let mut ut_y = vec![0.0; n];
    let mut ut_z = vec![0.0; n];

    let dt_report = cfg.total_days * DAY_SECONDS / cfg.n_steps as f64;
    let dt_chunk = dt_report / cfg.pressure_updates_per_step as f64;

    let mut result = SimResult {
        sat: Vec::with_capacity(cfg.n_steps + 1),
        times_days: Vec::with_capacity(cfg.n_steps + 1),
        mass_injected: Vec::with_capacity(cfg.n_steps + 1),
        mass_in_place: Vec::with_capacity(cfg.n_steps + 1),
        substeps: 0,
        max_sg_seen: 0.0,
    };
    let record = |result: &mut SimResult, s_g: &[f64], t_days: f64, injected_vol: f64| {
        let snap: Vec<f32> = s_g.iter().map(|&v| v as f32).collect();
        result.sat.push(Grid3 { nx, ny, nz, data: snap });
        result.times_days.push(t_days);
        result.mass_injected.push(injected_vol * fluid.rho_g);
        let in_place: f64 = s_g.iter().zip(&v_p).map(|(s, v)| s * v).sum();
        result.mass_in_place.push(in_place * fluid.rho_g);
    };
    record(&mut result, &s_g, 0.0, 0.0);

    let mut injected_vol = 0.0;
    let mut pc = if cfg.use_capillary { vec![cfg.cap_pc_max; n] } else { Vec::new() };
    let margin = cfg.ds_max;
    let gate = |s: f64| ((sg_max - s) / margin).clamp(0.0, 1.0);

    for step in 0..cfg.n_steps {
        let mut substeps_this_report = 0usize;
        for _chunk in 0..cfg.pressure_updates_per_step {
            // ---- implicit pressure solve ----
            let mut op = SevenPoint::zeros(nx, ny, nz);
            let mut rhs = vec![0.0; n];
            let storage: Vec<f64> = v_p.iter().map(|v| v * cfg.c_r / dt_chunk).collect();
            for idx in 0..n {
                op.diag[idx] = storage[idx];
                rhs[idx] = storage[idx] * p[idx];
            }
            if cfg.use_capillary {
                for idx in 0..n {
                    pc[idx] = leverett_pc(
                        1.0 - s_g[idx],
                        model.phi.data[idx],
                        model.kx.data[idx] * MD_TO_M2,
                        relperm,
                        cfg.cap_c_ref,
                        cfg.cap_pc_max,
                    )?;
                }
            }
            let mut add_face = |a: usize, b: usize, t_geo: f64, dd: f64, coeff: &mut f64| {
                if t_geo == 0.0 {
                    return;
                }
                // Phase-potential upwinding with the current (lagged) pressure.
                let pot_w = (p[a] - p[b]) - fluid.rho_w * GRAVITY * dd;
                let mut pot_g = (p[a] - p[b]) - fluid.rho_g * GRAVITY * dd;
                if cfg.use_capillary {
                    pot_g += pc[a] - pc[b];
                }
                let lw = if pot_w >= 0.0 { lam_w[a] } else { lam_w[b] };
                let lg = if pot_g >= 0.0 { lam_g[a] } else { lam_g[b] };
                let lt = lw + lg;
                *coeff = t_geo * lt;
                // Gravity source: T * (lw*rho_w + lg*rho_g) * g * dd, signed to cell a.
                let grav = t_geo * (lw * fluid.rho_w + lg * fluid.rho_g) * GRAVITY * dd;
                rhs[a] += grav;
                rhs[b] -= grav;
                if cfg.use_capillary {
                    let cap = t_geo * lg * (pc[a] - pc[b]);
                    rhs[a] -= cap;
                    rhs[b] += cap;
                }
            };
            for i in 0..nx {
                for j in 0..ny {
                    for k in 0..nz {
                        let idx = (i * ny + j) * nz + k;
                        if i + 1 < nx {
                            let mut c = 0.0;
                            add_face(idx, idx + sx, faces.tx[idx], 0.0, &mut c);
                            op.cx[idx] = c;
                        }
                        if j + 1 < ny {
                            let mut c = 0.0;
                            add_face(idx, idx + nz, faces.ty[idx], 0.0, &mut c);
                            op.cy[idx] = c;
                        }
                        if k + 1 < nz {
                            let mut c = 0.0;
                            add_face(idx, idx + 1, faces.tz[idx], depth[k] - depth[k + 1], &mut c);
                            op.cz[idx] = c;
                        }
                    }
                }
            }
            for idx in 0..n {
                let row_sum = op.cx[idx]
                    + op.cy[idx]
                    + op.cz[idx]
                    + if idx >= sx { op.cx[idx - sx] } else { 0.0 }
                    + if idx >= nz { op.cy[idx - nz] } else { 0.0 }
                    + if idx >= 1 { op.cz[idx - 1] } else { 0.0 };
                op.diag[idx] += row_sum;
            }
            if q_total > 0.0 {
                for (l, &cell) in inj_cells.iter().enumerate() {
                    rhs[cell] += q_total * inj_weights[l];
                }
            }
            cg_solve(&op, &rhs, &mut p, cfg.cg_tol, cfg.cg_max_iters)?;

            // ---- frozen total velocity on every face ----
            let set_ut = |a: usize, b: usize, t_geo: f64, dd: f64, out: &mut f64| {
                if t_geo == 0.0 {
                    *out = 0.0;
                    return;
                }
                let pot_w = (p[a] - p[b]) - fluid.rho_w * GRAVITY * dd;
                let mut pot_g = (p[a] - p[b]) - fluid.rho_g * GRAVITY * dd;
                if cfg.use_capillary {
                    pot_g += pc[a] - pc[b];
                }
                let lw = if pot_w >= 0.0 { lam_w[a] } else { lam_w[b] };
                let lg = if pot_g >= 0.0 { lam_g[a] } else { lam_g[b] };
                *out = t_geo * (lw * pot_w + lg * pot_g);
            };
            for i in 0..nx {
                for j in 0..ny {
                    for k in 0..nz {
                        let idx = (i * ny + j) * nz + k;
                        if i + 1 < nx {
                            let mut u = 0.0;
                            set_ut(idx, idx + sx, faces.tx[idx], 0.0, &mut u);
                            ut_x[idx] = u;
                        }
                        if j + 1 < ny {
                            let mut u = 0.0;
                            set_ut(idx, idx + nz, faces.ty[idx], 0.0, &mut u);
                            ut_y[idx] = u;
                        }
                        if k + 1 < nz {
                            let mut u = 0.0;
                            set_ut(idx, idx + 1, faces.tz[idx], depth[k] - depth[k + 1], &mut u);
                            ut_z[idx] = u;
                        }
                    }
                }
            }

            // ---- explicit saturation sub-steps over the chunk ----
            let mut t_left = dt_chunk;
            let mut rate = vec![0.0; n];
            let mut touched: Vec<usize> = Vec::with_capacity(1024);
            let mut stamp = vec![0u32; n];
            let mut epoch = 0u32;
            while t_left > 0.0 {
                substeps_this_report += 1;
                if substeps_this_report > cfg.max_substeps_per_step {
                    return Err(GhmError::Numeric(format!(
                        "CFL sub-step count exceeded {} in report step {step}",
                        cfg.max_substeps_per_step
                    )));
                }
                epoch += 1;
                touched.clear();

                let touch = |idx: usize,
                                 delta: f64,
                                 rate: &mut [f64],
                                 touched: &mut Vec<usize>,
                                 stamp: &mut [u32]| {
                    if stamp[idx] != epoch {
                        stamp[idx] = epoch;
                        rate[idx] = 0.0;
                        touched.push(idx);
                    }
                    rate[idx] += delta;
                };

                // Gas flux on a canonical face (a -> b positive), fractional
                // flow of the frozen total velocity plus gravity segregation.
                let dsg = fluid.rho_w - fluid.rho_g;
                let gas_flux = |a: usize, b: usize, u_t: f64, t_geo: f64, dd: f64, s_g: &[f64]| -> f64 {
                    let up = if u_t >= 0.0 { a } else { b };
                    let lt_up = lam_w[up] + lam_g[up];
                    let mut flux = if lt_up > 0.0 { lam_g[up] / lt_up * u_t } else { 0.0 };
                    if dd != 0.0 {
                        // deeper cell donates gas, shallower cell donates water
                        let (deep, shallow) = if dd < 0.0 { (b, a) } else { (a, b) };
                        let num = lam_g[deep] * lam_w[shallow];
                        if num > 0.0 {
                            let mob = num / (lam_g[deep] + lam_w[shallow]);
                            flux += t_geo * mob * dsg * GRAVITY * dd;
                        }
                    }
                    if cfg.use_capillary && t_geo != 0.0 {
                        let dpc = pc[a] - pc[b];
                        if dpc != 0.0 {
                            let don = if dpc >= 0.0 { a } else { b };
                            let oth = if dpc >= 0.0 { b } else { a };
                            let num = lam_g[don] * lam_w[oth];
                            if num > 0.0 {
                                flux += t_geo * num / (lam_g[don] + lam_w[oth]) * dpc;
                            }
                        }
                    }
                    // Inflow gate: no room in a nearly full receiving cell.
                    if flux > 0.0 {
                        flux * gate(s_g[b])
                    } else {
                        flux * gate(s_g[a])
                    }
                };

                // Sweep faces touching cells that hold gas (donor-side only:
                // a gas-free donor contributes nothing).
                for idx in 0..n {
                    if s_g[idx] <= 0.0 {
                        continue;
                    }
                    let k = idx % nz;
                    let j = (idx / nz) % ny;
                    let i = idx / sx;
                    let handle = |a: usize, b: usize, u_t: f64, t_geo: f64, dd: f64,
                                      rate: &mut [f64], touched: &mut Vec<usize>, stamp: &mut [u32]| {
                        // Process once: the gas-bearing side with the lower
                        // index owns the face when both sides hold gas.
                        let other = if idx == a { b } else { a };
                        if s_g[other] > 0.0 && other < idx {
                            return;
                        }
                        let f = gas_flux(a, b, u_t, t_geo, dd, &s_g);
                        if f != 0.0 {
                            touch(a, -f, rate, touched, stamp);
                            touch(b, f, rate, touched, stamp);
                        }
                    };
                    if i + 1 < nx {
                        handle(idx, idx + sx, ut_x[idx], faces.tx[idx], 0.0, &mut rate, &mut touched, &mut stamp);
                    }
                    if i > 0 {
                        handle(idx - sx, idx, ut_x[idx - sx], faces.tx[idx - sx], 0.0, &mut rate, &mut touched, &mut stamp);
                    }
                    if j + 1 < ny {
                        handle(idx, idx + nz, ut_y[idx], faces.ty[idx], 0.0, &mut rate, &mut touched, &mut stamp);
                    }
                    if j > 0 {
                        handle(idx - nz, idx, ut_y[idx - nz], faces.ty[idx - nz], 0.0, &mut rate, &mut touched, &mut stamp);
                    }
                    if k + 1 < nz {
                        handle(idx, idx + 1, ut_z[idx], faces.tz[idx], depth[k] - depth[k + 1], &mut rate, &mut touched, &mut stamp);
                    }
                    if k > 0 {
                        handle(idx - 1, idx, ut_z[idx - 1], faces.tz[idx - 1], depth[k - 1] - depth[k], &mut rate, &mut touched, &mut stamp);
                    }
                }

                // Injector source with gated re-allocation across the column.
                if q_total > 0.0 {
                    let gated: Vec<f64> = inj_cells
                        .iter()
                        .zip(&inj_weights)
                        .map(|(&c, &w)| w * gate(s_g[c]))
                        .collect();
                    let gate_sum: f64 = gated.iter().sum();
                    if gate_sum <= 0.0 {
                        return Err(GhmError::Numeric(
                            "injector column is fully gas-saturated; cannot sustain rate".into(),
                        ));
                    }
                    for (&cell, &g) in inj_cells.iter().zip(&gated) {
                        if g > 0.0 {
                            touch(cell, q_total * g / gate_sum, &mut rate, &mut touched, &mut stamp);
                        }
                    }
                }

                // CFL: saturation change capped by ds_max and by the distance
                // to the admissible bounds.
                let mut dt = t_left;
                for &idx in &touched {
                    let r = rate[idx];
                    if r > 0.0 {
                        let headroom = (sg_max - s_g[idx]).max(0.0);
                        dt = dt.min(headroom.min(cfg.ds_max) * v_p[idx] / r);
                    } else if r < 0.0 {
                        dt = dt.min(s_g[idx].min(cfg.ds_max) * v_p[idx] / (-r));
                    }
                }
                if !(dt > 0.0) {
                    return Err(GhmError::Numeric(format!(
                        "saturation sub-step collapsed to zero at report step {step}"
                    )));
                }

                for &idx in &touched {
                    if rate[idx] != 0.0 {
                        s_g[idx] = (s_g[idx] + dt * rate[idx] / v_p[idx]).clamp(0.0, sg_max);
                        update_mobility(idx, &s_g, &mut lam_w, &mut lam_g);
                        if s_g[idx] > result.max_sg_seen {
                            result.max_sg_seen = s_g[idx];
                        }
                    }
                }
                injected_vol += q_total * dt;
                t_left -= dt;
            }
        }
        result.substeps += substeps_this_report;
        let t_days = (step + 1) as f64 * cfg.total_days / cfg.n_steps as f64;
        record(&mut result, &s_g, t_days, injected_vol);
    }

    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geomodel::{assemble_from_field, Metaparameters};
    use crate::grf::derive_rng;
    use crate::grid::GridDims;
    use rand::Rng;

    fn meta() -> Metaparameters {
        Metaparameters { mu_logk: 5.0, sigma_logk: 1.0, log10_ar: -0.3, d: 0.03, e: 0.08 }
    }

    fn small_model(nx: usize, ny: usize, nz: usize, heterogeneous: bool, seed: u64) -> GeoModel {
        let dims = GridDims::new(nx, ny, nz, 7.0, 7.0, 2.0).unwrap();
        let y: Vec<f64> = if heterogeneous {
            let mut rng = derive_rng(seed, 0, 40);
            (0..dims.n_cells()).map(|_| rng.gen_range(-1.5..1.5)).collect()
        } else {
            vec![0.0; dims.n_cells()]
        };
        assemble_from_field(&meta(), &y, &dims)
    }

    fn wells_for(nx: usize, ny: usize, rate: f64) -> Vec<WellSpec> {
        vec![
            WellSpec { i: nx / 2, j: ny / 2, rate_mt_per_year: rate, kind: WellKind::Injector },
            WellSpec { i: nx / 2 + 1, j: ny / 2 + 1, rate_mt_per_year: 0.0, kind: WellKind::Monitor },
        ]
    }

    fn fast_cfg(n_steps: usize) -> SimConfig {
        SimConfig { n_steps, total_days: 120.0, ..SimConfig::default() }
    }

    #[test]
    fn zero_rate_gives_zero_saturation() {
        let model = small_model(6, 6, 4, true, 1);
        let res = simulate(&model, &wells_for(6, 6, 0.0), &FluidConfig::default(),
                           &RelPermConfig::default(), &fast_cfg(3)).unwrap();
        for snap in &res.sat {
            assert!(snap.data.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn mass_balance_is_tight() {
        let model = small_model(10, 10, 6, true, 2);
        let res = simulate(&model, &wells_for(10, 10, 0.002), &FluidConfig::default(),
                           &RelPermConfig::default(), &fast_cfg(5)).unwrap();
        for step in 1..=res.n_report_steps() {
            let err = res.mass_balance_error(step);
            assert!(err <= 1e-9, "step {step}: mass balance error {err}");
            // the ledger tracks rate * t exactly
            let expected = 0.002 * 1e9 * res.times_days[step] / YEAR_DAYS;
            assert!((res.mass_injected[step] - expected).abs() / expected < 1e-12);
        }
    }

    #[test]
    fn saturation_bounds_hold() {
        let model = small_model(8, 8, 5, true, 3);
        let res = simulate(&model, &wells_for(8, 8, 0.003), &FluidConfig::default(),
                           &RelPermConfig::default(), &fast_cfg(4)).unwrap();
        let bound = RelPermConfig::default().sg_max();
        assert!(res.max_sg_seen <= bound + 1e-12, "max s_g {}", res.max_sg_seen);
        for snap in &res.sat {
            for &v in &snap.data {
                assert!((0.0..=(bound as f32 + 1e-6)).contains(&v));
            }
        }
    }

    #[test]
    fn identical_inputs_are_bit_identical() {
        let model = small_model(7, 7, 4, true, 4);
        let run = || {
            simulate(&model, &wells_for(7, 7, 0.002), &FluidConfig::default(),
                     &RelPermConfig::default(), &fast_cfg(3)).unwrap()
        };
        let a = run();
        let b = run();
        assert_eq!(a, b);
    }

    #[test]
    fn buoyancy_raises_center_of_mass() {
        // homogeneous isotropic model: plume center of mass must not sink
        let dims = GridDims::new(9, 9, 8, 7.0, 7.0, 2.0).unwrap();
        let m = Metaparameters { mu_logk: 5.0, sigma_logk: 1.0, log10_ar: 0.0, d: 0.03, e: 0.08 };
        let model = assemble_from_field(&m, &vec![0.0; dims.n_cells()], &dims);
        let res = simulate(&model, &wells_for(9, 9, 0.002), &FluidConfig::default(),
                           &RelPermConfig::default(), &fast_cfg(6)).unwrap();
        let mut prev = f64::INFINITY;
        for snap in res.sat.iter().skip(1) {
            let mut mass = 0.0;
            let mut moment = 0.0;
            for i in 0..snap.nx {
                for j in 0..snap.ny {
                    for k in 0..snap.nz {
                        let s = snap.get(i, j, k) as f64;
                        mass += s;
                        moment += s * (k as f64 + 0.5) * dims.dz;
                    }
                }
            }
            if mass > 0.0 {
                let com = moment / mass;
                assert!(com <= prev + 1e-9, "center of mass sank: {com} > {prev}");
                prev = com;
            }
        }
    }

    #[test]
    fn homogeneous_plume_is_rotation_symmetric() {
        // odd grid, centered injector: final field invariant under 90-degree
        // rotation about the well axis
        let dims = GridDims::new(11, 11, 5, 7.0, 7.0, 2.0).unwrap();
        let m = Metaparameters { mu_logk: 5.0, sigma_logk: 1.0, log10_ar: -0.5, d: 0.03, e: 0.08 };
        let model = assemble_from_field(&m, &vec![0.0; dims.n_cells()], &dims);
        let wells = vec![WellSpec { i: 5, j: 5, rate_mt_per_year: 0.002, kind: WellKind::Injector }];
        let cfg = SimConfig { n_steps: 4, total_days: 120.0, cg_tol: 1e-12, ..SimConfig::default() };
        let res = simulate(&model, &wells, &FluidConfig::default(),
                           &RelPermConfig::default(), &cfg).unwrap();
        let last = res.sat.last().unwrap();
        let nx = dims.nx;
        let mut max_diff = 0.0f64;
        for i in 0..nx {
            for j in 0..nx {
                for k in 0..dims.nz {
                    let a = last.get(i, j, k) as f64;
                    let b = last.get(j, nx - 1 - i, k) as f64;
                    max_diff = max_diff.max((a - b).abs());
                }
            }
        }
        assert!(max_diff <= 1e-6, "rotation asymmetry {max_diff}");
    }

    #[test]
    fn monitor_extraction_matches_indexing() {
        let model = small_model(8, 8, 5, true, 5);
        let wells = wells_for(8, 8, 0.002);
        let res = simulate(&model, &wells, &FluidConfig::default(),
                           &RelPermConfig::default(), &fast_cfg(4)).unwrap();
        let mon = wells[1];
        let profile = extract_monitor(&res, &mon, &[0, 2, 4]).unwrap();
        assert_eq!(profile.nz, 5);
        // step 0 is the initial condition: all zero
        for k in 0..5 {
            assert_eq!(profile.get(k, 0), 0.0);
        }
        for (s, &step) in [0usize, 2, 4].iter().enumerate() {
            for k in 0..5 {
                assert_eq!(profile.get(k, s), res.sat[step].get(mon.i, mon.j, k) as f64);
            }
        }
        // out-of-grid monitor errors
        let bad = WellSpec { i: 99, j: 0, rate_mt_per_year: 0.0, kind: WellKind::Monitor };
        assert!(extract_monitor(&res, &bad, &[0]).is_err());
    }

    #[test]
    fn paper_shape_monitor_matrix() {
        // fabricate a paper-shaped result: 35 layers, 16 requested steps
        let nz = 35;
        let snap = Grid3::filled(4, 4, nz, 0.1f32);
        let res = SimResult {
            sat: vec![snap; 31],
            times_days: (0..31).map(|s| s as f64).collect(),
            mass_injected: vec![0.0; 31],
            mass_in_place: vec![0.0; 31],
            substeps: 0,
            max_sg_seen: 0.1,
        };
        let mon = WellSpec { i: 2, j: 2, rate_mt_per_year: 0.0, kind: WellKind::Monitor };
        let steps: Vec<usize> = (0..=30).step_by(2).collect();
        let profile = extract_monitor(&res, &mon, &steps).unwrap();
        assert_eq!(profile.steps.len(), 16);
        assert_eq!(profile.data.len(), 35 * 16);
    }

    #[test]
    fn exactly_one_injector_required() {
        let model = small_model(6, 6, 4, false, 6);
        let none: Vec<WellSpec> = vec![];
        assert!(simulate(&model, &none, &FluidConfig::default(),
                         &RelPermConfig::default(), &fast_cfg(2)).is_err());
        let two = vec![
            WellSpec { i: 1, j: 1, rate_mt_per_year: 0.001, kind: WellKind::Injector },
            WellSpec { i: 2, j: 2, rate_mt_per_year: 0.001, kind: WellKind::Injector },
        ];
        assert!(simulate(&model, &two, &FluidConfig::default(),
                         &RelPermConfig::default(), &fast_cfg(2)).is_err());
    }

    #[test]
    fn solver_failure_is_reported() {
        let model = small_model(8, 8, 5, true, 7);
        let cfg = SimConfig { cg_max_iters: 1, ..fast_cfg(2) };
        let err = simulate(&model, &wells_for(8, 8, 0.002), &FluidConfig::default(),
                           &RelPermConfig::default(), &cfg).unwrap_err();
        assert!(matches!(err, GhmError::Numeric(_)));
    }
}
