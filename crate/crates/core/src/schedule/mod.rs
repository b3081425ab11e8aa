//! Compilation of gate parameters into pulse schedules, plus the per-shot
//! microwave energy planner.

mod envelope;
mod mpm;
mod params;
mod pulse;

pub use envelope::{sin2_envelope, Drift, Envelope, Segment, Shape};
pub use mpm::{plan_mpm_shot, MpmShot, PlannedPulse};
pub use params::{
    solve_closure, zero_point_fluctuation, DecouplingMode, FrameModel, GateParams, ModeParams, CA43_MASS, HBAR,
};
pub use pulse::{build_gate_schedule, PulseSchedule, Tone, ToneRole};

use thiserror::Error;

use crate::walsh::WalshError;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScheduleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("parameters marked closed violate the loop-closure conditions")]
    NotClosed,
    #[error(transparent)]
    Walsh(#[from] WalshError),
    #[error("decoupling flip windows overlap: segment of {segment:e} s is shorter than the flip ramp {flip:e} s")]
    FlipWindowsOverlap { segment: f64, flip: f64 },
    #[error("decoupling flip at {at:e} s falls inside a sideband ramp")]
    FlipDuringRamp { at: f64 },
    #[error("mid-gate pi pulse needs an even loop count (got {0})")]
    PiPulseNeedsEvenLoops(u32),
    #[error("experiment energy {experiment:e} J exceeds the per-shot budget {budget:e} J by {overshoot:e} J")]
    BudgetExceeded { experiment: f64, budget: f64, overshoot: f64 },
    #[error("dummy pulse of {dummy:e} s does not fit in the {available:e} s left in the shot")]
    DummyDoesNotFit { dummy: f64, available: f64 },
    #[error("schedule text line {line}: {msg}")]
    Parse { line: usize, msg: String },
}
