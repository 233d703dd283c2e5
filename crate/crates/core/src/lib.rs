//! Reduced dynamics of a particle coupled linearly to a massless Boson
//! field: Weyl-label flows, decoherence functions, induced superselection
//! and an independent finite-mode oracle.
//!
//! Phase-space, environment and interval types are generic over the scalar
//! ([`scalar::Real`]); the aliases below fix it to `f64`, which is what the
//! models, quadrature and eigen-solvers use.

// `!(x > y)` comparisons are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod curve;
pub mod environment;
pub mod error;
pub mod oracle;
pub mod phase_space;
pub mod position;
pub mod quadrature;
pub mod scalar;
pub mod spectral;
pub mod superselection;
pub mod velocity;

pub use curve::{DecoherenceCurve, Envelope, Growth, TimeGrid};
pub use environment::EnvironmentState;
pub use error::{Error, Result};
pub use oracle::{GridScheme, ModeSystem};
pub use position::FriedrichsOperator;
pub use spectral::{Boundedness, CouplingModel, FormFactor, IrClass};
pub use superselection::{DecayModel, WeylCombination};
pub use velocity::VelocityModel;

pub type WeylLabel = phase_space::WeylLabel<f64>;
pub type FrequencyGrid = phase_space::FrequencyGrid<f64>;
pub type FieldVector = phase_space::FieldVector<f64>;
pub type PhasePoint = phase_space::PhasePoint<f64>;
pub type MomentumInterval = superselection::MomentumInterval<f64>;
