use thiserror::Error;

/// Errors raised by parameter construction and time stepping.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StefanError {
    #[error("parameter `{name}` must be strictly positive and finite, got {value}")]
    ParameterDomain { name: &'static str, value: f64 },

    #[error("grid needs at least 3 nodes per phase, got {liquid} liquid / {solid} solid")]
    Stencil { liquid: usize, solid: usize },

    #[error("invalid stepper configuration: {0}")]
    Config(String),

    #[error("interface left the admissible band at t = {t:.6} s (s = {s:.6e} m, band = [{floor:.3e}, {ceiling:.3e}])")]
    PhaseDisappearance {
        t: f64,
        s: f64,
        floor: f64,
        ceiling: f64,
    },

    #[error("non-finite value in {what} at t = {t:.6} s")]
    NumericalBlowup { t: f64, what: &'static str },

    #[error("interface fixed-point iteration did not converge at t = {t:.6} s (residual {residual:.3e} m)")]
    NoConvergence { t: f64, residual: f64 },

    #[error("kernel parameter eps = {eps:.6e} must lie in (0, sqrt(2*alpha_l*c) = {bound:.6e})")]
    KernelDomain { eps: f64, bound: f64 },

    #[error("diagnostics need profile snapshots, but the trace has none")]
    DiagnosticsUnavailable,

    #[error("invalid perturbation: {0}")]
    Perturbation(String),
}

pub type Result<T> = std::result::Result<T, StefanError>;
