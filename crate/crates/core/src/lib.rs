//! Simulation and boundary control of the one-dimensional two-phase Stefan
//! problem.
//!
//! - [`physics`]: material constants, plant state, energy, validity checks
//! - [`solver`]: front-tracking integrator on immobilized coordinates
//! - [`controllers`]: energy-shaping feedback laws
//! - [`analysis`]: backstepping transforms, Lyapunov functionals, settling and decay fits
//! - [`oracle`]: independent fixed-grid enthalpy solver for cross-validation

pub mod analysis;
pub mod controllers;
pub mod error;
pub mod oracle;
pub mod physics;
pub mod solver;
pub mod trace;
mod tridiag;

pub use controllers::{ControllerSpec, Law, ParamBounds};
pub use error::{Result, StefanError};
pub use physics::{derive, DerivedParams, InitialProfile, PhysicalParams, PlantState};
pub use solver::{ActuationSide, GridSpec, Scenario, Scheme, StepperConfig};
pub use trace::{RunStatus, Sample, Trace};
