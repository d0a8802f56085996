//! Boundary heat-flux feedback laws.
//!
//! Every law is a pure, affine map from the plant state to the heat flux
//! `q_c` (W/m²). None of them clamps its output: positivity and validity are
//! properties to observe, not to enforce.

use serde::{Deserialize, Serialize};

use crate::error::{Result, StefanError};
use crate::physics::{internal_energy, DerivedParams, PlantState};

/// Closed interval `[lo, hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn exact(value: f64) -> Self {
        Self {
            lo: value,
            hi: value,
        }
    }

    /// `value * (1 ± frac)`.
    pub fn relative(value: f64, frac: f64) -> Self {
        Self {
            lo: value * (1.0 - frac),
            hi: value * (1.0 + frac),
        }
    }

    fn validate(&self, name: &str) -> Result<()> {
        if !(self.lo > 0.0 && self.lo <= self.hi && self.hi.is_finite()) {
            return Err(StefanError::Config(format!(
                "bound `{name}` needs 0 < lo <= hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }
}

/// Known intervals for the liquid conductivity, liquid diffusivity and the
/// volumetric latent heat.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamBounds {
    pub k_l: Interval,
    pub alpha_l: Interval,
    pub gamma: Interval,
}

impl ParamBounds {
    pub fn exact(k_l: f64, dp: &DerivedParams) -> Self {
        Self {
            k_l: Interval::exact(k_l),
            alpha_l: Interval::exact(dp.alpha_l),
            gamma: Interval::exact(dp.gamma),
        }
    }

    pub fn relative(k_l: f64, dp: &DerivedParams, frac: f64) -> Self {
        Self {
            k_l: Interval::relative(k_l, frac),
            alpha_l: Interval::relative(dp.alpha_l, frac),
            gamma: Interval::relative(dp.gamma, frac),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.k_l.validate("k_l")?;
        self.alpha_l.validate("alpha_l")?;
        self.gamma.validate("gamma")
    }

    /// Worst-case liquid heat capacity `k̄_l / α̲_l`.
    pub fn liquid_capacity(&self) -> f64 {
        self.k_l.hi / self.alpha_l.lo
    }

    /// Margin of `s0 + (k̄_l/(α̲_l γ̲)) ∫u0 < s_r < L`; positive when admissible.
    pub fn setpoint_margin(&self, initial: &PlantState, s_r: f64) -> f64 {
        let lower = initial.s + self.liquid_capacity() / self.gamma.lo * initial.liquid_integral();
        (s_r - lower).min(initial.length - s_r)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Law {
    TwoPhase,
    OnePhase,
    Robust { eps_l: f64, eps_s: f64, eps_f: f64 },
    ConservativeRobust { bounds: ParamBounds },
    /// Feedforward `c γ (s_r - s_inf) e^{-ct}`.
    OpenLoopOracle { s_inf: f64 },
    /// Two-phase energy shaping applied as a cooling flux at `x = L`.
    Cooling,
    Zero,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSpec {
    pub law: Law,
    /// Gain `c` (1/s).
    pub gain: f64,
    /// Interface setpoint `s_r` (m).
    pub setpoint: f64,
}

impl ControllerSpec {
    pub fn new(law: Law, gain: f64, setpoint: f64) -> Self {
        Self {
            law,
            gain,
            setpoint,
        }
    }

    pub fn zero() -> Self {
        Self::new(Law::Zero, 0.0, 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        match self.law {
            Law::Zero => {}
            _ if !(self.gain > 0.0 && self.gain.is_finite()) => {
                return Err(StefanError::Config(format!(
                    "controller gain must be positive, got {}",
                    self.gain
                )))
            }
            _ => {}
        }
        if !self.setpoint.is_finite() {
            return Err(StefanError::Config("setpoint must be finite".into()));
        }
        match self.law {
            Law::Robust {
                eps_l,
                eps_s,
                eps_f,
            } => {
                if !(eps_l > -1.0 && eps_s >= -1.0 && eps_f >= -1.0) {
                    return Err(StefanError::Perturbation(format!(
                        "need eps_l > -1, eps_s >= -1, eps_f >= -1; got ({eps_l}, {eps_s}, {eps_f})"
                    )));
                }
            }
            Law::ConservativeRobust { bounds } => bounds.validate()?,
            _ => {}
        }
        Ok(())
    }

    /// Heat flux for the current state (open-loop laws read `state.t`).
    pub fn evaluate(&self, state: &PlantState, dp: &DerivedParams) -> f64 {
        let (c, s_r) = (self.gain, self.setpoint);
        match self.law {
            Law::TwoPhase => two_phase(state, dp, c, s_r),
            Law::OnePhase => one_phase(state, dp, c, s_r),
            Law::Robust {
                eps_l,
                eps_s,
                eps_f,
            } => robust(state, dp, c, s_r, eps_l, eps_s, eps_f),
            Law::ConservativeRobust { bounds } => conservative_robust(state, &bounds, c, s_r),
            Law::OpenLoopOracle { s_inf } => open_loop_oracle(state.t, c, dp.gamma, s_r, s_inf),
            Law::Cooling => cooling_variant(state, dp, c, s_r),
            Law::Zero => 0.0,
        }
    }
}

/// `q_c = -c (E - γ s_r)`.
pub fn two_phase(state: &PlantState, dp: &DerivedParams, c: f64, s_r: f64) -> f64 {
    -c * (dp.cap_l * state.liquid_integral()
        + dp.cap_s * state.solid_integral()
        + dp.gamma * (state.s - s_r))
}

/// Energy shaping that ignores the solid sensible heat.
pub fn one_phase(state: &PlantState, dp: &DerivedParams, c: f64, s_r: f64) -> f64 {
    -c * (dp.cap_l * state.liquid_integral() + dp.gamma * (state.s - s_r))
}

/// Two-phase law with multiplicative errors on the liquid integral, the
/// solid integral and the latent term.
pub fn robust(
    state: &PlantState,
    dp: &DerivedParams,
    c: f64,
    s_r: f64,
    eps_l: f64,
    eps_s: f64,
    eps_f: f64,
) -> f64 {
    -c * ((1.0 + eps_l) * dp.cap_l * state.liquid_integral()
        + (1.0 + eps_s) * dp.cap_s * state.solid_integral()
        + (1.0 + eps_f) * dp.gamma * (state.s - s_r))
}

/// Bounds-based law: over-estimated liquid capacity, under-estimated latent
/// heat, no solid term.
pub fn conservative_robust(state: &PlantState, bounds: &ParamBounds, c: f64, s_r: f64) -> f64 {
    -c * (bounds.liquid_capacity() * state.liquid_integral() + bounds.gamma.lo * (state.s - s_r))
}

/// Closed-form closed-loop input of the two-phase law.
pub fn open_loop_oracle(t: f64, c: f64, gamma: f64, s_r: f64, s_inf: f64) -> f64 {
    c * gamma * (s_r - s_inf) * (-c * t).exp()
}

/// Same energy-shaping formula as [`two_phase`]; negative when `s_r < s_inf`,
/// and meant to be applied at `x = L`.
pub fn cooling_variant(state: &PlantState, dp: &DerivedParams, c: f64, s_r: f64) -> f64 {
    two_phase(state, dp, c, s_r)
}

/// `E - γ s_r`, the quantity the two-phase law drives to zero.
pub fn energy_error(state: &PlantState, dp: &DerivedParams, s_r: f64) -> f64 {
    internal_energy(state, dp) - dp.gamma * s_r
}
