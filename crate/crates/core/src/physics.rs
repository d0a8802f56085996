//! Material constants, plant state, internal energy and the model-validity
//! predicates that gate every simulation.
//!
//! Temperatures inside [`PlantState`] are stored as offsets from the melting
//! temperature (`u = T_l - T_m`, `v = T_s - T_m`). Keeping offsets avoids the
//! cancellation that would otherwise swamp the late-time decay of the
//! profiles (|u| ~ 1e-12 K next to T_m = 420 °C).

use serde::{Deserialize, Serialize};

use crate::error::{Result, StefanError};
use crate::solver::ActuationSide;

/// Material constants of the two phases plus the slab length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhysicalParams {
    /// Liquid density (kg/m³).
    pub rho_l: f64,
    /// Solid density (kg/m³).
    pub rho_s: f64,
    /// Liquid specific heat (J/(kg·K)).
    pub c_l: f64,
    /// Solid specific heat (J/(kg·K)).
    pub c_s: f64,
    /// Liquid thermal conductivity (W/(m·K)).
    pub k_l: f64,
    /// Solid thermal conductivity (W/(m·K)).
    pub k_s: f64,
    /// Melting temperature (°C). Any sign.
    pub t_melt: f64,
    /// Latent heat of fusion (J/kg).
    pub latent_heat: f64,
    /// Slab length (m).
    pub length: f64,
}

impl PhysicalParams {
    /// Zinc strip of unit length.
    pub fn zinc() -> Self {
        Self {
            rho_l: 6570.0,
            rho_s: 6890.0,
            c_l: 390.0,
            c_s: 390.0,
            k_l: 130.0,
            k_s: 100.0,
            t_melt: 420.0,
            latent_heat: 120_000.0,
            length: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("rho_l", self.rho_l),
            ("rho_s", self.rho_s),
            ("c_l", self.c_l),
            ("c_s", self.c_s),
            ("k_l", self.k_l),
            ("k_s", self.k_s),
            ("latent_heat", self.latent_heat),
            ("length", self.length),
        ];
        for (name, value) in fields {
            if !(value.is_finite() && value > 0.0) {
                return Err(StefanError::ParameterDomain { name, value });
            }
        }
        if !self.t_melt.is_finite() {
            return Err(StefanError::ParameterDomain {
                name: "t_melt",
                value: self.t_melt,
            });
        }
        Ok(())
    }

    /// Parameters of the reflected problem `x -> L - x` with the phases
    /// relabelled. The volumetric latent heat is preserved, so the latent
    /// heat per unit mass is rescaled by the density ratio.
    pub fn mirrored(&self) -> Self {
        Self {
            rho_l: self.rho_s,
            rho_s: self.rho_l,
            c_l: self.c_s,
            c_s: self.c_l,
            k_l: self.k_s,
            k_s: self.k_l,
            t_melt: self.t_melt,
            latent_heat: self.latent_heat * self.rho_l / self.rho_s,
            length: self.length,
        }
    }
}

/// Coefficients derived from [`PhysicalParams`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub alpha_l: f64,
    pub alpha_s: f64,
    pub beta_l: f64,
    pub beta_s: f64,
    /// Volumetric latent heat `rho_l * dH` (J/m³).
    pub gamma: f64,
    /// Volumetric heat capacity of the liquid, `rho_l c_l = k_l / alpha_l`.
    pub cap_l: f64,
    /// Volumetric heat capacity of the solid, `rho_s c_s = k_s / alpha_s`.
    pub cap_s: f64,
}

pub fn derive(params: &PhysicalParams) -> Result<DerivedParams> {
    params.validate()?;
    let gamma = params.rho_l * params.latent_heat;
    Ok(DerivedParams {
        alpha_l: params.k_l / (params.rho_l * params.c_l),
        alpha_s: params.k_s / (params.rho_s * params.c_s),
        beta_l: params.k_l / gamma,
        beta_s: params.k_s / gamma,
        gamma,
        cap_l: params.rho_l * params.c_l,
        cap_s: params.rho_s * params.c_s,
    })
}

/// Composite trapezoid rule for uniformly spaced samples.
pub fn trapezoid(values: &[f64], spacing: f64) -> f64 {
    match values.len() {
        0 | 1 => 0.0,
        n => {
            let interior: f64 = values[1..n - 1].iter().sum();
            spacing * (interior + 0.5 * (values[0] + values[n - 1]))
        }
    }
}

/// Liquid offsets on `xi = x / s`, solid offsets on `eta = (x - s) / (L - s)`;
/// both sampled uniformly on `[0, 1]`. `liquid[n_l - 1]` and `solid[0]` are
/// the interface nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub t: f64,
    pub s: f64,
    pub length: f64,
    /// `T_l - T_m` at `x_j = s * j / (n_l - 1)`.
    pub liquid: Vec<f64>,
    /// `T_s - T_m` at `x_j = s + (L - s) * j / (n_s - 1)`.
    pub solid: Vec<f64>,
}

impl PlantState {
    /// Samples offset profiles given as functions of physical position.
    pub fn from_fns(
        s: f64,
        length: f64,
        n_l: usize,
        n_s: usize,
        liquid: impl Fn(f64) -> f64,
        solid: impl Fn(f64) -> f64,
    ) -> Self {
        let liq = (0..n_l)
            .map(|j| liquid(s * j as f64 / (n_l - 1).max(1) as f64))
            .collect();
        let sol = (0..n_s)
            .map(|j| solid(s + (length - s) * j as f64 / (n_s - 1).max(1) as f64))
            .collect();
        Self {
            t: 0.0,
            s,
            length,
            liquid: liq,
            solid: sol,
        }
    }

    /// Both phases at the melting temperature.
    pub fn equilibrium(s: f64, length: f64, n_l: usize, n_s: usize) -> Self {
        Self::from_fns(s, length, n_l, n_s, |_| 0.0, |_| 0.0)
    }

    pub fn n_liquid(&self) -> usize {
        self.liquid.len()
    }

    pub fn n_solid(&self) -> usize {
        self.solid.len()
    }

    /// Physical spacing of the liquid grid.
    pub fn dx_liquid(&self) -> f64 {
        self.s / (self.liquid.len() - 1) as f64
    }

    pub fn dx_solid(&self) -> f64 {
        (self.length - self.s) / (self.solid.len() - 1) as f64
    }

    pub fn liquid_x(&self, j: usize) -> f64 {
        self.s * j as f64 / (self.liquid.len() - 1) as f64
    }

    pub fn solid_x(&self, j: usize) -> f64 {
        self.s + (self.length - self.s) * j as f64 / (self.solid.len() - 1) as f64
    }

    /// `∫_0^s (T_l - T_m) dx`.
    pub fn liquid_integral(&self) -> f64 {
        trapezoid(&self.liquid, self.dx_liquid())
    }

    /// `∫_s^L (T_s - T_m) dx`.
    pub fn solid_integral(&self) -> f64 {
        trapezoid(&self.solid, self.dx_solid())
    }

    /// `∂T_l/∂x` at the interface from the 3-point one-sided stencil.
    pub fn liquid_interface_slope(&self) -> f64 {
        let n = self.liquid.len();
        let u = &self.liquid;
        (3.0 * u[n - 1] - 4.0 * u[n - 2] + u[n - 3]) / (2.0 * self.dx_liquid())
    }

    /// `∂T_s/∂x` at the interface from the 3-point one-sided stencil.
    pub fn solid_interface_slope(&self) -> f64 {
        let v = &self.solid;
        (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * self.dx_solid())
    }

    /// Offset temperature at physical position `x` by linear interpolation.
    pub fn offset_at(&self, x: f64) -> f64 {
        if x <= self.s {
            interpolate(&self.liquid, (x / self.s).clamp(0.0, 1.0))
        } else {
            let eta = ((x - self.s) / (self.length - self.s)).clamp(0.0, 1.0);
            interpolate(&self.solid, eta)
        }
    }

    pub fn is_finite(&self) -> bool {
        self.s.is_finite()
            && self.liquid.iter().all(|v| v.is_finite())
            && self.solid.iter().all(|v| v.is_finite())
    }

    /// Reflects `x -> L - x`, swaps the phases and negates the offsets.
    pub fn mirrored(&self) -> Self {
        Self {
            t: self.t,
            s: self.length - self.s,
            length: self.length,
            liquid: self.solid.iter().rev().map(|v| -v).collect(),
            solid: self.liquid.iter().rev().map(|u| -u).collect(),
        }
    }
}

fn interpolate(values: &[f64], unit: f64) -> f64 {
    let n = values.len();
    let pos = unit * (n - 1) as f64;
    let i = (pos.floor() as usize).min(n - 2);
    let frac = pos - i as f64;
    values[i] * (1.0 - frac) + values[i + 1] * frac
}

/// Initial temperature profile specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialProfile {
    /// `T_l0(x) = A_l (1 - x/s0) + T_m`, `T_s0(x) = A_s (1 - (L-x)/(L-s0)) + T_m`.
    Linear {
        liquid_amplitude: f64,
        solid_amplitude: f64,
        s0: f64,
    },
    /// Uniform offsets; the interface node is pinned to `T_m`.
    Constant {
        liquid_offset: f64,
        solid_offset: f64,
        s0: f64,
    },
    /// Offsets tabulated on the immobilized grids, resampled linearly.
    Tabulated {
        liquid: Vec<f64>,
        solid: Vec<f64>,
        s0: f64,
    },
}

impl InitialProfile {
    pub fn s0(&self) -> f64 {
        match self {
            Self::Linear { s0, .. } | Self::Constant { s0, .. } | Self::Tabulated { s0, .. } => {
                *s0
            }
        }
    }

    pub fn build(&self, length: f64, n_l: usize, n_s: usize) -> PlantState {
        match self {
            Self::Linear {
                liquid_amplitude,
                solid_amplitude,
                s0,
            } => {
                let (al, as_, s0) = (*liquid_amplitude, *solid_amplitude, *s0);
                PlantState::from_fns(
                    s0,
                    length,
                    n_l,
                    n_s,
                    |x| al * (1.0 - x / s0),
                    |x| as_ * (1.0 - (length - x) / (length - s0)),
                )
            }
            Self::Constant {
                liquid_offset,
                solid_offset,
                s0,
            } => {
                let mut st =
                    PlantState::from_fns(*s0, length, n_l, n_s, |_| *liquid_offset, |_| {
                        *solid_offset
                    });
                *st.liquid.last_mut().unwrap() = 0.0;
                st.solid[0] = 0.0;
                st
            }
            Self::Tabulated { liquid, solid, s0 } => {
                let resample = |table: &[f64], n: usize| -> Vec<f64> {
                    if table.len() < 2 {
                        return vec![table.first().copied().unwrap_or(0.0); n];
                    }
                    (0..n)
                        .map(|j| interpolate(table, j as f64 / (n - 1) as f64))
                        .collect()
                };
                PlantState {
                    t: 0.0,
                    s: *s0,
                    length,
                    liquid: resample(liquid, n_l),
                    solid: resample(solid, n_s),
                }
            }
        }
    }
}

/// `E = rho_l c_l ∫u + rho_s c_s ∫v + gamma s` (J/m², per unit cross-section).
pub fn internal_energy(state: &PlantState, dp: &DerivedParams) -> f64 {
    dp.cap_l * state.liquid_integral() + dp.cap_s * state.solid_integral() + dp.gamma * state.s
}

/// Final interface position under zero input.
pub fn s_infinity(initial: &PlantState, dp: &DerivedParams) -> f64 {
    initial.s
        + dp.cap_l / dp.gamma * initial.liquid_integral()
        + dp.cap_s / dp.gamma * initial.solid_integral()
}

/// Pass/fail plus a signed margin (positive is inside the admissible set).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub ok: bool,
    pub margin: f64,
}

impl Check {
    fn from_margin(margin: f64, tol: f64) -> Self {
        Self {
            ok: margin >= -tol,
            margin,
        }
    }
}

/// Lipschitz-cone bound on an initial profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConeCheck {
    pub ok: bool,
    /// Worst sign margin (K); negative means the phase is on the wrong side of `T_m`.
    pub margin: f64,
    /// Smallest cone slope enclosing the data (K/m).
    pub lipschitz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub interface_interior: Check,
    pub liquid_cone: ConeCheck,
    pub solid_cone: ConeCheck,
    pub s_inf: f64,
    pub s_inf_interior: Check,
    /// Heating: `s_inf < s_r < L`. Cooling: `0 < s_r < s_inf`.
    pub setpoint: Check,
}

impl AdmissibilityReport {
    pub fn all_pass(&self) -> bool {
        self.interface_interior.ok
            && self.liquid_cone.ok
            && self.solid_cone.ok
            && self.s_inf_interior.ok
            && self.setpoint.ok
    }
}

impl std::fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let mark = |ok: bool| if ok { "pass" } else { "FAIL" };
        writeln!(
            f,
            "0 < s0 < L            {}  margin {:.4e} m",
            mark(self.interface_interior.ok),
            self.interface_interior.margin
        )?;
        writeln!(
            f,
            "liquid cone           {}  margin {:.4e} K, H_l = {:.4e} K/m",
            mark(self.liquid_cone.ok),
            self.liquid_cone.margin,
            self.liquid_cone.lipschitz
        )?;
        writeln!(
            f,
            "solid cone            {}  margin {:.4e} K, H_s = {:.4e} K/m",
            mark(self.solid_cone.ok),
            self.solid_cone.margin,
            self.solid_cone.lipschitz
        )?;
        writeln!(
            f,
            "0 < s_inf < L         {}  s_inf = {:.6} m, margin {:.4e} m",
            mark(self.s_inf_interior.ok),
            self.s_inf,
            self.s_inf_interior.margin
        )?;
        write!(
            f,
            "setpoint restriction  {}  margin {:.4e} m",
            mark(self.setpoint.ok),
            self.setpoint.margin
        )
    }
}

/// Tolerances for the validity predicates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityTolerance {
    /// Absolute on temperature margins (K); also used for interface slopes (K/m).
    pub temperature: f64,
    /// Absolute on the interface distance to the walls (m).
    pub interface: f64,
}

impl Default for ValidityTolerance {
    fn default() -> Self {
        Self {
            temperature: 1e-9,
            interface: 1e-12,
        }
    }
}

pub fn check_assumptions(
    initial: &PlantState,
    dp: &DerivedParams,
    s_r: f64,
    side: ActuationSide,
) -> AdmissibilityReport {
    let tol = ValidityTolerance::default();
    let l = initial.length;
    let s0 = initial.s;
    let interface_interior = Check::from_margin(s0.min(l - s0), 0.0);
    let interface_interior = Check {
        ok: interface_interior.margin > 0.0,
        ..interface_interior
    };

    // T_m <= T_l0(x) <= T_m + H_l (s0 - x)
    let n_l = initial.n_liquid();
    let mut liq_margin = f64::INFINITY;
    let mut h_l: f64 = 0.0;
    for (j, &u) in initial.liquid.iter().enumerate() {
        liq_margin = liq_margin.min(u);
        let gap = s0 - initial.liquid_x(j);
        if j + 1 < n_l && gap > 0.0 {
            h_l = h_l.max(u / gap);
        }
    }
    let u_interface = initial.liquid[n_l - 1].abs();
    liq_margin = liq_margin.min(-u_interface);
    let liquid_cone = ConeCheck {
        ok: liq_margin >= -tol.temperature && h_l.is_finite(),
        margin: liq_margin,
        lipschitz: h_l,
    };

    // T_m >= T_s0(x) >= T_m + H_s (s0 - x)
    let mut sol_margin = f64::INFINITY;
    let mut h_s: f64 = 0.0;
    for (j, &v) in initial.solid.iter().enumerate() {
        sol_margin = sol_margin.min(-v);
        let gap = initial.solid_x(j) - s0;
        if j > 0 && gap > 0.0 {
            h_s = h_s.max(-v / gap);
        }
    }
    sol_margin = sol_margin.min(-initial.solid[0].abs());
    let solid_cone = ConeCheck {
        ok: sol_margin >= -tol.temperature && h_s.is_finite(),
        margin: sol_margin,
        lipschitz: h_s,
    };

    let s_inf = s_infinity(initial, dp);
    let s_inf_margin = s_inf.min(l - s_inf);
    let s_inf_interior = Check {
        ok: s_inf_margin > 0.0,
        margin: s_inf_margin,
    };
    let sp_margin = match side {
        ActuationSide::HeatLiquid => (s_r - s_inf).min(l - s_r),
        ActuationSide::CoolSolid => s_r.min(s_inf - s_r),
    };
    let setpoint = Check {
        ok: sp_margin > 0.0,
        margin: sp_margin,
    };
    AdmissibilityReport {
        interface_interior,
        liquid_cone,
        solid_cone,
        s_inf,
        s_inf_interior,
        setpoint,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValidityReport {
    /// `min (T_l - T_m)` over the liquid nodes.
    pub liquid_above_melting: Check,
    /// `min (T_m - T_s)` over the solid nodes.
    pub solid_below_melting: Check,
    /// `min(s, L - s)`.
    pub interface_interior: Check,
    /// Margin is `-∂T_l/∂x(s)`.
    pub liquid_flux_sign: Check,
    /// Margin is `-∂T_s/∂x(s)`.
    pub solid_flux_sign: Check,
}

impl ValidityReport {
    /// Conditions that define a physically meaningful state.
    pub fn model_valid(&self) -> bool {
        self.liquid_above_melting.ok && self.solid_below_melting.ok && self.interface_interior.ok
    }

    pub fn all_pass(&self) -> bool {
        self.model_valid() && self.liquid_flux_sign.ok && self.solid_flux_sign.ok
    }
}

pub fn validity(state: &PlantState, tol: ValidityTolerance) -> ValidityReport {
    let liq = state.liquid.iter().copied().fold(f64::INFINITY, f64::min);
    let sol = state.solid.iter().map(|v| -v).fold(f64::INFINITY, f64::min);
    let dist = state.s.min(state.length - state.s);
    ValidityReport {
        liquid_above_melting: Check::from_margin(liq, tol.temperature),
        solid_below_melting: Check::from_margin(sol, tol.temperature),
        interface_interior: Check::from_margin(dist, tol.interface),
        liquid_flux_sign: Check::from_margin(-state.liquid_interface_slope(), tol.temperature),
        solid_flux_sign: Check::from_margin(-state.solid_interface_slope(), tol.temperature),
    }
}
