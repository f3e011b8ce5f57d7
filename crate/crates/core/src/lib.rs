//! Pumped three-level atom coupled to a single lossy bosonic mode.
//!
//! Configuration values are frequencies in MHz (`/2π`); the solvers work in
//! angular units (rad/µs) with ħ = 1 and time in µs. [`units::angular`] and
//! [`units::from_angular`] are the only conversion points.

pub mod error;
pub mod hilbert;
pub mod lindblad;
pub mod model;
pub mod ode;
pub mod operator;
pub mod params;
pub mod semiclassical;
pub mod units;

pub use error::{Error, Result};
pub use hilbert::{HilbertSpace, Level};
pub use model::{build_collapse_ops, build_hamiltonian, validate_params, Channel, ChannelKind, ParamReport};
pub use operator::OperatorMatrix;
pub use params::ModelParams;
