//! Simulation and analysis of microwave-driven Mølmer–Sørensen gates with
//! Walsh-modulated dynamical decoupling.
//!
//! The numerical core (`walsh`, `schedule`, `dynamics`) is generic over the
//! scalar type through [`Real`]; the aliases below fix it to `f64`, with an
//! exact rational variant for Walsh moment checks.

pub mod config;
pub mod dynamics;
pub mod plot;
pub mod scalar;
pub mod schedule;
pub mod sweep;
pub mod tomography;
pub mod walsh;

pub use scalar::Real;

pub type Walsh = walsh::WalshSequence<f64>;
pub type ExactWalsh = walsh::WalshSequence<num_rational::BigRational>;
pub type Params = schedule::GateParams<f64>;
pub type Mode = schedule::ModeParams<f64>;
pub type Schedule = schedule::PulseSchedule<f64>;
pub type State = dynamics::QuantumState<f64>;
pub type Evolution = dynamics::Evolution<f64>;
pub type MpmShot = schedule::MpmShot<f64>;
