//! Front-tracking integrator for the liquid–interface–solid system.
//!
//! Each phase is mapped onto a fixed unit interval (`ξ = x/s` for the liquid,
//! `η = (x - s)/(L - s)` for the solid). In these coordinates the heat
//! equation for the liquid reads, in conservation form,
//!
//! ```text
//! ∂t (s U) = ∂ξ ( α/s ∂ξ U + ṡ ξ U ),
//! ```
//!
//! and the solid equation is the mirror image. The update is a vertex-centred
//! finite-volume θ-scheme whose control-volume weights are exactly the
//! trapezoid weights used for the internal energy. The interface flux that
//! enters the Stefan condition is the flux through the last interior face,
//! so the discrete energy `E` changes by exactly `q_c Δt` per step (up to the
//! tolerance of the interface fixed point).
//!
//! That last face flux is second-order accurate at the interface itself
//! because `U(1, t) ≡ 0` forces `∂ξ F = ∂t (sU) = 0` there.

use serde::{Deserialize, Serialize};

use crate::controllers::{ControllerSpec, Law};
use crate::error::{Result, StefanError};
use crate::physics::{
    check_assumptions, derive, internal_energy, validity, DerivedParams, InitialProfile,
    PhysicalParams, PlantState, ValidityTolerance,
};
use crate::trace::{RunStatus, Sample, Trace};

/// Node counts per phase (including both end nodes).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub n_l: usize,
    pub n_s: usize,
}

impl GridSpec {
    pub fn uniform(n: usize) -> Self {
        Self { n_l: n, n_s: n }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_l < 3 || self.n_s < 3 {
            return Err(StefanError::Stencil {
                liquid: self.n_l,
                solid: self.n_s,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Forward Euler on the whole system. Needs `Δt ≲ h² s² / (2α)`.
    ExplicitEuler,
    /// Crank–Nicolson weighting of the face fluxes.
    ImplicitMidpoint,
    /// Backward Euler weighting of the face fluxes.
    #[default]
    BackwardEuler,
}

impl Scheme {
    fn theta(self) -> f64 {
        match self {
            Scheme::ExplicitEuler => 0.0,
            Scheme::ImplicitMidpoint => 0.5,
            Scheme::BackwardEuler => 1.0,
        }
    }
}

/// Which boundary carries the heat input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ActuationSide {
    /// `∂T_l/∂x(0) = -q_c/k_l`, `∂T_s/∂x(L) = 0`.
    #[default]
    HeatLiquid,
    /// `∂T_l/∂x(0) = 0`, `∂T_s/∂x(L) = q_c/k_s`.
    CoolSolid,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub dt: f64,
    #[serde(default)]
    pub scheme: Scheme,
    pub t_end: f64,
    /// Steps between recorded samples.
    pub output_stride: usize,
    /// Samples between recorded profile snapshots; 0 disables snapshots.
    #[serde(default = "default_profile_stride")]
    pub profile_stride: usize,
    pub s_floor: f64,
    pub s_ceiling: f64,
    /// Freeze the interface (pure diffusion on fixed subdomains).
    #[serde(default)]
    pub pin_interface: bool,
}

fn default_profile_stride() -> usize {
    1
}

impl StepperConfig {
    /// Guard margins at `1e-3 L` from each wall.
    pub fn new(length: f64, dt: f64, t_end: f64, output_stride: usize) -> Self {
        Self {
            dt,
            scheme: Scheme::default(),
            t_end,
            output_stride,
            profile_stride: 1,
            s_floor: 1e-3 * length,
            s_ceiling: length - 1e-3 * length,
            pin_interface: false,
        }
    }

    pub fn validate(&self, length: f64) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(StefanError::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_end >= 0.0 && self.t_end.is_finite()) {
            return Err(StefanError::Config(format!(
                "t_end must be non-negative, got {}",
                self.t_end
            )));
        }
        if self.output_stride == 0 {
            return Err(StefanError::Config("output_stride must be >= 1".into()));
        }
        if !(0.0 < self.s_floor && self.s_floor < self.s_ceiling && self.s_ceiling < length) {
            return Err(StefanError::Config(format!(
                "need 0 < s_floor < s_ceiling < L, got {} / {} / {length}",
                self.s_floor, self.s_ceiling
            )));
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Largest step keeping the advective Courant number `|ṡ| Δt / Δx` below
/// `courant` on both grids, given an expected peak interface speed.
pub fn suggest_dt(state: &PlantState, peak_speed: f64, courant: f64) -> f64 {
    let dx = state.dx_liquid().min(state.dx_solid());
    if peak_speed <= 0.0 {
        return f64::INFINITY;
    }
    courant * dx / peak_speed
}

/// `ṡ = -β_l ∂T_l/∂x(s⁻) + β_s ∂T_s/∂x(s⁺)` with 3-point one-sided stencils.
pub fn interface_velocity(state: &PlantState, dp: &DerivedParams) -> Result<f64> {
    if state.n_liquid() < 3 || state.n_solid() < 3 {
        return Err(StefanError::Stencil {
            liquid: state.n_liquid(),
            solid: state.n_solid(),
        });
    }
    Ok(-dp.beta_l * state.liquid_interface_slope() + dp.beta_s * state.solid_interface_slope())
}

/// Per-step details from [`step_detailed`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// Interface velocity used over the step.
    pub s_dot: f64,
    /// Fixed-point iterations spent on the interface.
    pub iterations: usize,
    /// Remaining mismatch between the assumed and the recomputed velocity (m/s).
    pub residual: f64,
}

/// Scratch buffers for one phase.
#[derive(Default)]
struct PhaseWork {
    lower: Vec<f64>,
    diag: Vec<f64>,
    upper: Vec<f64>,
    rhs: Vec<f64>,
    old_flux: Vec<f64>,
}

/// Advances one phase written in "liquid form": Dirichlet zero at `ζ = 1`,
/// flux `boundary_flux = α ∂x U` at `ζ = 0`, domain length `len_old -> len_new`
/// moving with velocity `vel = d len / dt`. Returns the flux through the last
/// interior face (≈ `α ∂x U` at the Dirichlet end).
#[allow(clippy::too_many_arguments)]
fn advance_phase(
    u: &[f64],
    len_old: f64,
    len_new: f64,
    vel: f64,
    alpha: f64,
    boundary_flux: f64,
    theta: f64,
    dt: f64,
    out: &mut Vec<f64>,
    work: &mut PhaseWork,
) -> f64 {
    let n = u.len();
    let m = n - 1; // unknowns 0..m-1, u[m] = 0
    let h = 1.0 / m as f64;
    let d_old = alpha / (len_old * h);
    let d_new = alpha / (len_new * h);
    let adv = |j: usize| 0.5 * vel * (j as f64 + 0.5) * h; // face j+1/2
    let weight = |j: usize| if j == 0 { 0.5 * h } else { h };

    work.old_flux.clear();
    work.old_flux.extend(
        (0..m).map(|j| d_old * (u[j + 1] - u[j]) + adv(j) * (u[j] + u[j + 1])),
    );

    out.clear();
    out.resize(n, 0.0);
    if theta == 0.0 {
        for j in 0..m {
            let left = if j == 0 {
                boundary_flux
            } else {
                work.old_flux[j - 1]
            };
            let storage = weight(j) * len_old * u[j] + dt * (work.old_flux[j] - left);
            out[j] = storage / (weight(j) * len_new);
        }
        return work.old_flux[m - 1];
    }

    let tdt = theta * dt;
    let edt = (1.0 - theta) * dt;
    work.lower.clear();
    work.diag.clear();
    work.upper.clear();
    work.rhs.clear();
    for j in 0..m {
        let right_adv = adv(j);
        let mut a = 0.0;
        let mut b = weight(j) * len_new + tdt * (d_new - right_adv);
        let c = -tdt * (d_new + right_adv);
        let mut r = weight(j) * len_old * u[j] + edt * work.old_flux[j];
        if j == 0 {
            r -= dt * boundary_flux;
        } else {
            let left_adv = adv(j - 1);
            a = tdt * (-d_new + left_adv);
            b += tdt * (d_new + left_adv);
            r -= edt * work.old_flux[j - 1];
        }
        work.lower.push(a);
        work.diag.push(b);
        work.upper.push(c);
        work.rhs.push(r);
    }
    crate::tridiag::solve_in_place(&work.lower, &work.diag, &mut work.upper, &mut work.rhs);
    out[..m].copy_from_slice(&work.rhs);
    let new_flux = -d_new * out[m - 1] + adv(m - 1) * out[m - 1];
    theta * new_flux + (1.0 - theta) * work.old_flux[m - 1]
}

/// Reusable stepping context; avoids reallocating buffers every step.
pub struct Stepper {
    cfg: StepperConfig,
    side: ActuationSide,
    dp: DerivedParams,
    k_l: f64,
    k_s: f64,
    liquid: PhaseWork,
    solid: PhaseWork,
    solid_rev: Vec<f64>,
    liquid_out: Vec<f64>,
    solid_out: Vec<f64>,
    s_dot_guess: Option<f64>,
}

const MAX_INTERFACE_ITERATIONS: usize = 60;

impl Stepper {
    pub fn new(
        params: &PhysicalParams,
        cfg: StepperConfig,
        side: ActuationSide,
    ) -> Result<Self> {
        let dp = derive(params)?;
        cfg.validate(params.length)?;
        Ok(Self {
            cfg,
            side,
            dp,
            k_l: params.k_l,
            k_s: params.k_s,
            liquid: PhaseWork::default(),
            solid: PhaseWork::default(),
            solid_rev: Vec::new(),
            liquid_out: Vec::new(),
            solid_out: Vec::new(),
            s_dot_guess: None,
        })
    }

    pub fn derived(&self) -> &DerivedParams {
        &self.dp
    }

    pub fn config(&self) -> &StepperConfig {
        &self.cfg
    }

    /// Advances `state` in place by one step with the heat flux held at `q_c`.
    pub fn advance(&mut self, state: &mut PlantState, q_c: f64) -> Result<StepInfo> {
        if state.n_liquid() < 3 || state.n_solid() < 3 {
            return Err(StefanError::Stencil {
                liquid: state.n_liquid(),
                solid: state.n_solid(),
            });
        }
        if !q_c.is_finite() {
            return Err(StefanError::NumericalBlowup {
                t: state.t,
                what: "heat input",
            });
        }
        let dp = self.dp;
        let dt = self.cfg.dt;
        let theta = self.cfg.scheme.theta();
        let length = state.length;
        let (flux_l, flux_s) = match self.side {
            ActuationSide::HeatLiquid => (-dp.alpha_l * q_c / self.k_l, 0.0),
            ActuationSide::CoolSolid => (0.0, -dp.alpha_s * q_c / self.k_s),
        };
        self.solid_rev.clear();
        self.solid_rev.extend(state.solid.iter().rev());

        let solve = |this: &mut Self, s_dot: f64| -> f64 {
            let s_new = state.s + dt * s_dot;
            let g_l = advance_phase(
                &state.liquid,
                state.s,
                s_new,
                s_dot,
                dp.alpha_l,
                flux_l,
                theta,
                dt,
                &mut this.liquid_out,
                &mut this.liquid,
            );
            let g_s = advance_phase(
                &this.solid_rev,
                length - state.s,
                length - s_new,
                -s_dot,
                dp.alpha_s,
                flux_s,
                theta,
                dt,
                &mut this.solid_out,
                &mut this.solid,
            );
            -(dp.cap_l * g_l + dp.cap_s * g_s) / dp.gamma
        };

        let (s_dot, iterations, residual) = if self.cfg.pin_interface {
            solve(self, 0.0);
            (0.0, 1, 0.0)
        } else {
            let mut x0 = match self.s_dot_guess {
                Some(v) => v,
                None => interface_velocity(state, &dp)?,
            };
            let mut r0 = solve(self, x0) - x0;
            let mut x1 = x0 + r0;
            let mut iterations = 1;
            let scale = (state.s.min(length - state.s)) * 1e-14 / dt;
            loop {
                let r1 = solve(self, x1) - x1;
                iterations += 1;
                if !r1.is_finite() {
                    return Err(StefanError::NumericalBlowup {
                        t: state.t,
                        what: "interface velocity",
                    });
                }
                if r1.abs() <= scale.max(1e-13 * x1.abs()) {
                    break (x1, iterations, r1);
                }
                if iterations >= MAX_INTERFACE_ITERATIONS {
                    return Err(StefanError::NoConvergence {
                        t: state.t,
                        residual: r1 * dt,
                    });
                }
                // secant update, Picard fallback on a flat residual
                let denom = r1 - r0;
                let next = if denom != 0.0 {
                    x1 - r1 * (x1 - x0) / denom
                } else {
                    x1 + r1
                };
                x0 = x1;
                r0 = r1;
                x1 = next;
            }
        };

        let s_new = state.s + dt * s_dot;
        let t_new = state.t + dt;
        if !(self.liquid_out.iter().all(|v| v.is_finite())
            && self.solid_out.iter().all(|v| v.is_finite())
            && s_new.is_finite())
        {
            return Err(StefanError::NumericalBlowup {
                t: t_new,
                what: "temperature profile",
            });
        }
        if s_new < self.cfg.s_floor || s_new > self.cfg.s_ceiling {
            return Err(StefanError::PhaseDisappearance {
                t: t_new,
                s: s_new,
                floor: self.cfg.s_floor,
                ceiling: self.cfg.s_ceiling,
            });
        }
        state.s = s_new;
        state.t = t_new;
        std::mem::swap(&mut state.liquid, &mut self.liquid_out);
        *state.liquid.last_mut().unwrap() = 0.0;
        state.solid.clear();
        state.solid.extend(self.solid_out.iter().rev());
        state.solid[0] = 0.0;
        self.s_dot_guess = Some(s_dot);
        Ok(StepInfo {
            s_dot,
            iterations,
            residual,
        })
    }
}

/// One step from `state` under a constant heat flux `q_c`.
pub fn step(
    state: &PlantState,
    q_c: f64,
    cfg: &StepperConfig,
    side: ActuationSide,
    params: &PhysicalParams,
) -> Result<PlantState> {
    let mut stepper = Stepper::new(params, *cfg, side)?;
    let mut next = state.clone();
    stepper.advance(&mut next, q_c)?;
    Ok(next)
}

/// Same as [`step`] but also reports the interface velocity and iteration count.
pub fn step_detailed(
    state: &PlantState,
    q_c: f64,
    cfg: &StepperConfig,
    side: ActuationSide,
    params: &PhysicalParams,
) -> Result<(PlantState, StepInfo)> {
    let mut stepper = Stepper::new(params, *cfg, side)?;
    let mut next = state.clone();
    let info = stepper.advance(&mut next, q_c)?;
    Ok((next, info))
}

fn sample(state: &PlantState, q_c: f64, injected: f64, dp: &DerivedParams) -> Sample {
    Sample {
        t: state.t,
        s: state.s,
        q_c,
        liquid_boundary: state.liquid[0],
        solid_boundary: *state.solid.last().unwrap(),
        energy: internal_energy(state, dp),
        injected,
        s_dot: interface_velocity(state, dp).unwrap_or(f64::NAN),
        validity: validity(state, ValidityTolerance::default()),
    }
}

/// Source of the boundary heat flux for [`run_with`].
pub trait HeatInput {
    fn heat_flux(&mut self, state: &PlantState, dp: &DerivedParams) -> f64;

    /// Whether `heat_flux` reads the profiles (open-loop schedules do not).
    fn needs_state(&self) -> bool {
        true
    }
}

impl HeatInput for ControllerSpec {
    fn heat_flux(&mut self, state: &PlantState, dp: &DerivedParams) -> f64 {
        self.evaluate(state, dp)
    }

    fn needs_state(&self) -> bool {
        !matches!(self.law, Law::OpenLoopOracle { .. } | Law::Zero)
    }
}

/// Open-loop schedule `q_c(t)`.
pub struct Schedule<F: FnMut(f64) -> f64>(pub F);

impl<F: FnMut(f64) -> f64> HeatInput for Schedule<F> {
    fn heat_flux(&mut self, state: &PlantState, _dp: &DerivedParams) -> f64 {
        (self.0)(state.t)
    }

    fn needs_state(&self) -> bool {
        false
    }
}

/// Closed-loop driver: one controller evaluation per step (zero-order hold).
pub fn run(
    initial: &PlantState,
    controller: &ControllerSpec,
    cfg: &StepperConfig,
    side: ActuationSide,
    params: &PhysicalParams,
) -> Result<Trace> {
    controller.validate()?;
    let mut c = *controller;
    run_with(initial, &mut c, cfg, side, params)
}

/// Like [`run`] but refuses to start when the admissibility checks fail.
pub fn run_checked(
    initial: &PlantState,
    controller: &ControllerSpec,
    cfg: &StepperConfig,
    side: ActuationSide,
    params: &PhysicalParams,
) -> Result<Trace> {
    let dp = derive(params)?;
    let report = check_assumptions(initial, &dp, controller.setpoint, side);
    if !report.all_pass() {
        return Err(StefanError::Config(format!(
            "admissibility checks failed:\n{report}"
        )));
    }
    run(initial, controller, cfg, side, params)
}

/// Generic driver. Setup errors are returned as `Err`; failures during
/// stepping end the trace early with [`RunStatus::Failed`].
pub fn run_with(
    initial: &PlantState,
    input: &mut dyn HeatInput,
    cfg: &StepperConfig,
    side: ActuationSide,
    params: &PhysicalParams,
) -> Result<Trace> {
    let mut stepper = Stepper::new(params, *cfg, side)?;
    let dp = *stepper.derived();
    GridSpec {
        n_l: initial.n_liquid(),
        n_s: initial.n_solid(),
    }
    .validate()?;
    if (initial.length - params.length).abs() > 1e-12 * params.length {
        return Err(StefanError::Config(format!(
            "state length {} differs from material length {}",
            initial.length, params.length
        )));
    }

    let mut trace = Trace::new(params.t_melt, params.length);
    let mut state = initial.clone();
    let t0 = state.t;
    let n_steps = cfg.n_steps();
    let mut injected = 0.0;
    let mut n_samples = 0usize;
    for k in 0..=n_steps {
        let q = input.heat_flux(&state, &dp);
        if k % cfg.output_stride == 0 || k == n_steps {
            trace.samples.push(sample(&state, q, injected, &dp));
            if cfg.profile_stride > 0 && n_samples.is_multiple_of(cfg.profile_stride) {
                trace.snapshots.push(state.clone());
            }
            n_samples += 1;
        }
        if k == n_steps {
            break;
        }
        if let Err(e) = stepper.advance(&mut state, q) {
            trace.status = RunStatus::Failed(e);
            return Ok(trace);
        }
        // keep t on the k·dt lattice instead of accumulating round-off
        state.t = t0 + (k + 1) as f64 * cfg.dt;
        injected += q * cfg.dt;
    }
    Ok(trace)
}

/// Everything needed to reproduce one simulation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub params: PhysicalParams,
    pub initial: InitialProfile,
    pub grid: GridSpec,
    pub controller: ControllerSpec,
    pub stepper: StepperConfig,
    #[serde(default)]
    pub side: ActuationSide,
}

impl Scenario {
    pub fn initial_state(&self) -> PlantState {
        self.initial
            .build(self.params.length, self.grid.n_l, self.grid.n_s)
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        self.grid.validate()?;
        self.stepper.validate(self.params.length)?;
        self.controller.validate()
    }

    pub fn simulate(&self) -> Result<Trace> {
        self.validate()?;
        run(
            &self.initial_state(),
            &self.controller,
            &self.stepper,
            self.side,
            &self.params,
        )
    }

    pub fn with_grid(&self, grid: GridSpec) -> Self {
        Self {
            grid,
            ..self.clone()
        }
    }
}

/// Observed convergence order from a grid ladder.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RefinementReport {
    pub levels: Vec<GridSpec>,
    pub s_end: Vec<f64>,
    pub energy_end: Vec<f64>,
    /// `|f_k - f_{k+1}| / |f_{k+1} - f_{k+2}|` for the interface position.
    pub error_ratios_s: Vec<f64>,
    pub error_ratios_energy: Vec<f64>,
    pub order_s: Option<f64>,
    pub order_energy: Option<f64>,
    pub inconclusive: bool,
}

fn observed_order(values: &[f64], ratios_h: &[f64]) -> (Vec<f64>, Option<f64>, bool) {
    let diffs: Vec<f64> = values.windows(2).map(|w| (w[0] - w[1]).abs()).collect();
    let ratios: Vec<f64> = diffs
        .windows(2)
        .map(|d| {
            if d[0] == 0.0 && d[1] == 0.0 {
                1.0
            } else {
                d[0] / d[1]
            }
        })
        .collect();
    let monotone = diffs.windows(2).all(|d| d[1] < d[0]);
    let refines = ratios_h.iter().all(|&r| r > 1.0);
    let order = match (ratios.last(), ratios_h.last()) {
        (Some(&e), Some(&r)) if monotone && refines && e.is_finite() => Some(e.ln() / r.ln()),
        _ => None,
    };
    let conclusive = order.is_some();
    (ratios, order, !conclusive)
}

/// Runs `scenario` on each grid of `ladder` and estimates the order of
/// `s(t_end)` and `E(t_end)`.
pub fn refine_study(scenario: &Scenario, ladder: &[GridSpec]) -> Result<RefinementReport> {
    if ladder.len() < 3 {
        return Err(StefanError::Config(
            "refinement study needs at least 3 grid levels".into(),
        ));
    }
    let mut s_end = Vec::new();
    let mut energy_end = Vec::new();
    for grid in ladder {
        let trace = scenario.with_grid(*grid).simulate()?;
        if let RunStatus::Failed(e) = trace.status {
            return Err(e);
        }
        let last = trace.last().expect("trace has at least one sample");
        s_end.push(last.s);
        energy_end.push(last.energy);
    }
    // ratio of successive grid spacings, measured on the coarser phase count
    let h_ratios: Vec<f64> = ladder
        .windows(2)
        .map(|w| {
            let a = (w[0].n_l.min(w[0].n_s) - 1) as f64;
            let b = (w[1].n_l.min(w[1].n_s) - 1) as f64;
            b / a
        })
        .collect();
    let (error_ratios_s, order_s, inc_s) = observed_order(&s_end, &h_ratios[1..]);
    let (error_ratios_energy, order_energy, _) = observed_order(&energy_end, &h_ratios[1..]);
    Ok(RefinementReport {
        levels: ladder.to_vec(),
        s_end,
        energy_end,
        error_ratios_s,
        error_ratios_energy,
        order_s,
        order_energy,
        inconclusive: inc_s,
    })
}
