//! Fixed-grid enthalpy solver, used only to cross-validate the front-tracking
//! integrator.
//!
//! The slab is split into uniform cells holding the volumetric enthalpy
//! relative to solid at `T_m`:
//!
//! - `H <= 0`: solid, `T = T_m + H / (ρ_s c_s)`
//! - `0 <= H <= γ`: mushy, `T = T_m`
//! - `H >= γ`: liquid, `T = T_m + (H - γ) / (ρ_l c_l)`
//!
//! Cells exchange conductive fluxes through their faces and the boundary
//! flux enters at the actuated wall, so `Σ H_i Δx` changes by exactly
//! `q_c Δt` per step. The interface is not tracked: it is recovered as the
//! integrated liquid fraction, which interpolates linearly across the mushy
//! band.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StefanError};
use crate::physics::{derive, validity, DerivedParams, PhysicalParams, PlantState, ValidityTolerance};
use crate::solver::{ActuationSide, HeatInput};
use crate::trace::{RunStatus, Sample, Trace};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleConfig {
    pub cells: usize,
    /// Time step; `None` picks `0.4 Δx² / max α`.
    pub dt: Option<f64>,
    pub t_end: f64,
    /// Seconds between recorded samples.
    pub output_interval: f64,
    /// Node count per phase of the reconstructed [`PlantState`].
    pub reconstruct_nodes: usize,
}

impl OracleConfig {
    pub fn new(cells: usize, t_end: f64, output_interval: f64) -> Self {
        Self {
            cells,
            dt: None,
            t_end,
            output_interval,
            reconstruct_nodes: 101,
        }
    }
}

/// Enthalpy samples on the fixed cell grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EnthalpyField {
    pub h: Vec<f64>,
    pub dx: f64,
}

impl EnthalpyField {
    /// Cell averages of the enthalpy implied by `state`.
    pub fn from_state(state: &PlantState, dp: &DerivedParams, cells: usize) -> Self {
        const SUB: usize = 64;
        let dx = state.length / cells as f64;
        let h = (0..cells)
            .map(|i| {
                let mut acc = 0.0;
                for k in 0..SUB {
                    let x = (i as f64 + (k as f64 + 0.5) / SUB as f64) * dx;
                    let off = state.offset_at(x);
                    acc += if x < state.s {
                        dp.gamma + dp.cap_l * off
                    } else {
                        dp.cap_s * off
                    };
                }
                acc / SUB as f64
            })
            .collect();
        Self { h, dx }
    }

    pub fn total(&self) -> f64 {
        self.h.iter().sum::<f64>() * self.dx
    }

    pub fn liquid_fraction(&self, i: usize, dp: &DerivedParams) -> f64 {
        (self.h[i] / dp.gamma).clamp(0.0, 1.0)
    }

    pub fn offset(&self, i: usize, dp: &DerivedParams) -> f64 {
        temperature_offset(self.h[i], dp)
    }

    /// Interface position as the integrated liquid fraction.
    pub fn interface(&self, dp: &DerivedParams) -> f64 {
        (0..self.h.len())
            .map(|i| self.liquid_fraction(i, dp))
            .sum::<f64>()
            * self.dx
    }

    pub fn mushy_cells(&self, dp: &DerivedParams) -> usize {
        self.h.iter().filter(|&&h| h > 0.0 && h < dp.gamma).count()
    }

    /// Samples the field onto the immobilized grids of a [`PlantState`].
    pub fn reconstruct(&self, dp: &DerivedParams, t: f64, nodes: usize) -> PlantState {
        let length = self.dx * self.h.len() as f64;
        let s = self.interface(dp);
        let mut pts: Vec<(f64, f64)> = Vec::with_capacity(self.h.len() + 1);
        for (i, &h) in self.h.iter().enumerate() {
            let x = (i as f64 + 0.5) * self.dx;
            if h >= dp.gamma && x < s {
                pts.push((x, temperature_offset(h, dp)));
            }
        }
        pts.push((s, 0.0));
        for (i, &h) in self.h.iter().enumerate() {
            let x = (i as f64 + 0.5) * self.dx;
            if h <= 0.0 && x > s {
                pts.push((x, temperature_offset(h, dp)));
            }
        }
        let eval = |x: f64| -> f64 {
            let k = pts.partition_point(|p| p.0 < x);
            if k == 0 {
                return pts[0].1;
            }
            if k == pts.len() {
                return pts[pts.len() - 1].1;
            }
            let (a, b) = (pts[k - 1], pts[k]);
            a.1 + (x - a.0) / (b.0 - a.0) * (b.1 - a.1)
        };
        let mut st = PlantState::from_fns(s, length, nodes, nodes, eval, eval);
        st.t = t;
        *st.liquid.last_mut().unwrap() = 0.0;
        st.solid[0] = 0.0;
        st
    }
}

pub fn temperature_offset(h: f64, dp: &DerivedParams) -> f64 {
    if h <= 0.0 {
        h / dp.cap_s
    } else if h >= dp.gamma {
        (h - dp.gamma) / dp.cap_l
    } else {
        0.0
    }
}

fn conductivity(h: f64, dp: &DerivedParams, params: &PhysicalParams) -> f64 {
    let f = (h / dp.gamma).clamp(0.0, 1.0);
    f * params.k_l + (1.0 - f) * params.k_s
}

/// Integrates the enthalpy formulation from `initial`. `input` is evaluated
/// once per step; feedback laws see the reconstructed [`PlantState`].
pub fn oracle_run(
    initial: &PlantState,
    input: &mut dyn HeatInput,
    params: &PhysicalParams,
    side: ActuationSide,
    cfg: &OracleConfig,
) -> Result<Trace> {
    let dp = derive(params)?;
    if cfg.cells < 4 {
        return Err(StefanError::Config(format!(
            "oracle needs at least 4 cells, got {}",
            cfg.cells
        )));
    }
    let mut field = EnthalpyField::from_state(initial, &dp, cfg.cells);
    let dx = field.dx;
    let alpha_max = dp.alpha_l.max(dp.alpha_s);
    let dt = cfg.dt.unwrap_or(0.4 * dx * dx / alpha_max);
    if !(dt > 0.0 && dt <= 0.5 * dx * dx / alpha_max) {
        return Err(StefanError::Config(format!(
            "oracle dt = {dt} violates the explicit limit {}",
            0.5 * dx * dx / alpha_max
        )));
    }
    let n_steps = (cfg.t_end / dt).ceil() as usize;
    let stride = ((cfg.output_interval / dt).round() as usize).max(1);

    let mut trace = Trace::new(params.t_melt, params.length);
    let n = cfg.cells;
    let mut flux = vec![0.0; n + 1];
    let mut theta = vec![0.0; n];
    let mut cond = vec![0.0; n];
    let mut injected = 0.0;
    let mut state = initial.clone();
    let mut last_sample: Option<(f64, f64)> = None;
    let mut warned = false;

    for k in 0..=n_steps {
        let t = initial.t + k as f64 * dt;
        let record = k % stride == 0 || k == n_steps;
        if record || input.needs_state() {
            state = field.reconstruct(&dp, t, cfg.reconstruct_nodes.max(3));
        } else {
            state.t = t;
        }
        let q = input.heat_flux(&state, &dp);
        if !q.is_finite() {
            trace.status = RunStatus::Failed(StefanError::NumericalBlowup {
                t,
                what: "heat input",
            });
            return Ok(trace);
        }
        let mushy = field.mushy_cells(&dp);
        if mushy > 3 && !warned {
            trace.warnings.push(format!(
                "mushy band spans {mushy} cells at t = {t:.3} s; the front is under-resolved"
            ));
            warned = true;
        }
        if record {
            let s = field.interface(&dp);
            let s_dot = match last_sample {
                Some((t0, s0)) if t > t0 => (s - s0) / (t - t0),
                _ => f64::NAN,
            };
            last_sample = Some((t, s));
            trace.samples.push(Sample {
                t,
                s,
                q_c: q,
                liquid_boundary: field.offset(0, &dp),
                solid_boundary: field.offset(n - 1, &dp),
                energy: field.total(),
                injected,
                s_dot,
                validity: validity(&state, ValidityTolerance::default()),
            });
        }
        if k == n_steps {
            break;
        }

        for i in 0..n {
            theta[i] = field.offset(i, &dp);
            cond[i] = conductivity(field.h[i], &dp, params);
        }
        // flux[i] is the +x heat flux through the left face of cell i
        let (left, right) = match side {
            ActuationSide::HeatLiquid => (q, 0.0),
            ActuationSide::CoolSolid => (0.0, -q),
        };
        flux[0] = left;
        flux[n] = right;
        for i in 1..n {
            let k_face = 2.0 * cond[i - 1] * cond[i] / (cond[i - 1] + cond[i]);
            flux[i] = -k_face * (theta[i] - theta[i - 1]) / dx;
        }
        for i in 0..n {
            field.h[i] += dt * (flux[i] - flux[i + 1]) / dx;
        }
        injected += q * dt;
        if field.h.iter().any(|h| !h.is_finite()) {
            trace.status = RunStatus::Failed(StefanError::NumericalBlowup {
                t: t + dt,
                what: "enthalpy",
            });
            return Ok(trace);
        }
    }
    Ok(trace)
}
