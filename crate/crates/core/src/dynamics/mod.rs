//! Spin–motion dynamics on the two-qubit ⊗ Fock space.

mod analytic;
mod hamiltonian;
mod integrator;
pub mod linalg;
mod operators;
mod state;

pub use analytic::{ms_analytic_propagator, ms_loop_parameters, net_dd_rotation};
pub use hamiltonian::{
    build_lab_hamiltonian, build_ms_hamiltonian, lab_to_interaction_frame, ConstantGenerator, Generator, LabGenerator,
    MsGenerator,
};
pub use integrator::{integrate, propagator, IntegratorOptions, StepStats};
pub use linalg::{DenseMatrix, SparseMatrix};
pub use operators::OperatorSet;
pub use state::{thermal_weights, QuantumState, QubitDensity};

use num_complex::Complex;
use thiserror::Error;

use crate::scalar::Real;
use crate::schedule::{FrameModel, GateParams, ModeParams, PulseSchedule, ScheduleError};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("Hamiltonian is not Hermitian (max deviation {deviation:e})")]
    NonHermitian { deviation: f64 },
    #[error("step size underflow at t = {t:e} s (step {step:e} s)")]
    StepUnderflow { t: f64, step: f64 },
    #[error("exceeded {0} integrator steps")]
    TooManySteps(usize),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("state is not normalised (norm {norm})")]
    NotNormalized { norm: f64 },
    #[error("tolerance must be positive")]
    InvalidTolerance,
    #[error("time {t:e} s outside the schedule")]
    TimeOutOfRange { t: f64 },
    #[error("analytic propagator needs a square pulse: {0}")]
    RequiresSquarePulse(String),
    #[error("schedule has no {0} tone")]
    MissingTone(&'static str),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
}

/// Result of evolving one pure state over a schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution<T> {
    /// Final state in the interaction picture.
    pub state: QuantumState<T>,
    pub stats: StepStats<T>,
    /// Top-two-level Fock population exceeded the leakage threshold.
    pub leakage_flag: bool,
    /// `|‖ψ‖ − 1|` at the end.
    pub norm_drift: T,
    pub warnings: Vec<String>,
}

/// Evolves `state` over the whole schedule with the model selected in `params`.
///
/// Lab-frame runs are mapped back into the interaction picture at the end.
pub fn evolve<T: Real>(
    state: &QuantumState<T>,
    schedule: &PulseSchedule<T>,
    params: &GateParams<T>,
    mode: &ModeParams<T>,
    opts: &IntegratorOptions<T>,
) -> Result<Evolution<T>, DynamicsError> {
    let n_max = state.n_max();
    if n_max != params.fock_cutoff {
        return Err(DynamicsError::DimensionMismatch { expected: 4 * params.fock_cutoff, got: state.dim() });
    }
    let norm = state.norm();
    if (norm - T::one()).abs().as_f64() > 1e-9_f64.max(T::epsilon().as_f64() * 64.0) {
        return Err(DynamicsError::NotNormalized { norm: norm.as_f64() });
    }
    let ops = OperatorSet::new(n_max);
    let total = schedule.total_duration;
    let (mut amps, stats) = match params.model {
        FrameModel::Interaction => {
            let g = MsGenerator::new(schedule, params, &ops)?;
            integrate(&g, state.amplitudes(), T::zero(), total, opts, Some(n_max))?
        }
        FrameModel::Lab => {
            let g = LabGenerator::new(schedule, params, mode, &ops)?;
            integrate(&g, state.amplitudes(), T::zero(), total, opts, Some(n_max))?
        }
    };
    if params.model == FrameModel::Lab {
        lab_to_interaction_frame(&mut amps, n_max, params.mode_freq, params.qubit_freq, total);
    }
    let out = QuantumState::from_raw(amps, n_max);
    let norm_drift = (out.norm() - T::one()).abs();
    let leakage_flag = stats.max_leakage > opts.leakage_threshold;
    let mut warnings = Vec::new();
    if leakage_flag {
        warnings.push(format!(
            "Fock cutoff leakage {:e} above {:e}; increase n_max beyond {n_max}",
            stats.max_leakage.as_f64(),
            opts.leakage_threshold.as_f64()
        ));
    }
    Ok(Evolution { state: out, stats, leakage_flag, norm_drift, warnings })
}

/// Thermal motional state: the same qubit state combined with each Fock level, evolved separately.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermalEvolution<T> {
    pub members: Vec<(T, Evolution<T>)>,
}

impl<T: Real> ThermalEvolution<T> {
    pub fn qubit_density(&self) -> QubitDensity<T> {
        let mut rho = [[Complex::new(T::zero(), T::zero()); 4]; 4];
        for (w, ev) in &self.members {
            let r = ev.state.qubit_density();
            for i in 0..4 {
                for j in 0..4 {
                    rho[i][j] = rho[i][j] + r[i][j] * *w;
                }
            }
        }
        rho
    }

    pub fn leakage_flag(&self) -> bool {
        self.members.iter().any(|(_, e)| e.leakage_flag)
    }
}

/// Evolves `qubits ⊗ ρ_th(n̄)` as a Boltzmann mixture, dropping levels with weight below `1e-10`.
pub fn evolve_thermal<T: Real>(
    qubits: [Complex<T>; 4],
    mean_phonons: T,
    schedule: &PulseSchedule<T>,
    params: &GateParams<T>,
    mode: &ModeParams<T>,
    opts: &IntegratorOptions<T>,
) -> Result<ThermalEvolution<T>, DynamicsError> {
    let n_max = params.fock_cutoff;
    let mut members = Vec::new();
    for (n, w) in thermal_weights(mean_phonons, n_max, T::lit(1e-10)) {
        let psi = QuantumState::product(qubits, n, n_max)?;
        members.push((w, evolve(&psi, schedule, params, mode, opts)?));
    }
    Ok(ThermalEvolution { members })
}
