use crate::scalar::Real;

use super::ScheduleError;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Mass of a single ⁴³Ca⁺ ion, kg.
pub const CA43_MASS: f64 = 42.958_766 * 1.660_539_066_60e-27;

/// How the resonant decoupling drive is scheduled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DecouplingMode {
    Off,
    /// Sign follows the Walsh sequence of `GateParams::walsh_order`.
    Walsh,
    /// Constant drive with a π pulse about y inserted at mid-gate.
    PiPulse,
    /// Constant drive whose amplitude is rescaled so the rotation is a whole number of turns.
    Calibrated,
}

impl DecouplingMode {
    pub fn name(self) -> &'static str {
        match self {
            Self::Off => "off",
            Self::Walsh => "walsh",
            Self::PiPulse => "pi_pulse",
            Self::Calibrated => "calibrated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "off" | "none" => Some(Self::Off),
            "walsh" => Some(Self::Walsh),
            "pi_pulse" | "pi-pulse" | "pi_y" => Some(Self::PiPulse),
            "calibrated" | "2m_pi" | "2mpi" => Some(Self::Calibrated),
            _ => None,
        }
    }
}

/// Hamiltonian used by the integrator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameModel {
    /// Effective spin-motion coupling in the interaction picture.
    Interaction,
    /// Two-tone drive in the laboratory frame (slow; needs `qubit_freq` and `carrier_rabi`).
    Lab,
}

/// Scalar physics parameters of one gate. Angular frequencies in rad/s, times in s.
#[derive(Debug, Clone, PartialEq)]
pub struct GateParams<T> {
    pub gate_rabi: T,
    pub loops: u32,
    pub detuning: T,
    pub duration: T,
    pub mode_freq: T,
    pub carrier_rabi: T,
    pub qubit_freq: T,
    /// Residual (miscalibrated) a.c. Zeeman shift; signed.
    pub zeeman_shift: T,
    pub dd_rabi: T,
    pub dd_mode: DecouplingMode,
    pub walsh_order: u32,
    /// Relative linear and quadratic drift of the decoupling Rabi rate over the schedule.
    pub dd_drift: [T; 2],
    pub ramp_time: T,
    pub flip_ramp_time: T,
    pub fock_cutoff: usize,
    /// Offset of the applied sideband detuning from `detuning` (miscalibration).
    pub detuning_error: T,
    /// Whether `detuning` and `duration` satisfy the loop-closure conditions.
    pub closed: bool,
    /// Rescale the sideband peak so ramped envelopes accumulate the same loop phase as a square pulse.
    pub compensate_ramps: bool,
    pub model: FrameModel,
}

/// Detuning and duration of an `loops`-loop gate at gate Rabi rate `gate_rabi`.
///
/// Returns `(δ_g, t_g)` with `δ_g = 2 Ω_g √N` and `t_g = 2πN / δ_g`.
pub fn solve_closure<T: Real>(gate_rabi: T, loops: u32) -> (T, T) {
    let n = T::from_u32(loops).unwrap();
    let detuning = T::lit(2.0) * gate_rabi * n.sqrt();
    let duration = T::TAU() * n / detuning;
    (detuning, duration)
}

impl<T: Real> GateParams<T> {
    /// Closed gate with all error sources and the decoupling drive off.
    pub fn closed_gate(gate_rabi: T, loops: u32, mode_freq: T) -> Self {
        let (detuning, duration) = solve_closure(gate_rabi, loops);
        Self {
            gate_rabi,
            loops,
            detuning,
            duration,
            mode_freq,
            carrier_rabi: T::zero(),
            qubit_freq: T::zero(),
            zeeman_shift: T::zero(),
            dd_rabi: T::zero(),
            dd_mode: DecouplingMode::Off,
            walsh_order: 0,
            dd_drift: [T::zero(); 2],
            ramp_time: T::zero(),
            flip_ramp_time: T::zero(),
            fock_cutoff: 12,
            detuning_error: T::zero(),
            closed: true,
            compensate_ramps: true,
            model: FrameModel::Interaction,
        }
    }

    /// Recomputes `detuning` and `duration` from `gate_rabi` and `loops` and marks the set closed.
    pub fn close(&mut self) {
        let (d, t) = solve_closure(self.gate_rabi, self.loops);
        self.detuning = d;
        self.duration = t;
        self.closed = true;
    }

    /// True when both closure identities hold to relative `1e-12` (or the scalar's precision).
    pub fn satisfies_closure(&self) -> bool {
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        let n = T::from_u32(self.loops).unwrap();
        let target_detuning = T::lit(2.0) * self.gate_rabi * n.sqrt();
        let phase = self.duration * self.detuning;
        let target_phase = T::TAU() * n;
        (self.detuning - target_detuning).abs() <= tol * target_detuning.abs()
            && (phase - target_phase).abs() <= tol * target_phase
    }

    /// Total schedule length: the ramps straddle the nominal gate window by half a ramp each.
    pub fn total_duration(&self) -> T {
        self.duration + self.ramp_time
    }

    pub fn dd_active(&self) -> bool {
        self.dd_mode != DecouplingMode::Off && self.dd_rabi > T::zero()
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let positive = [
            ("gate_rabi", self.gate_rabi),
            ("detuning", self.detuning),
            ("duration", self.duration),
            ("mode_freq", self.mode_freq),
        ];
        for (name, v) in positive {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(ScheduleError::InvalidParameter(format!("{name} must be positive and finite")));
            }
        }
        let non_negative = [
            ("carrier_rabi", self.carrier_rabi),
            ("qubit_freq", self.qubit_freq),
            ("dd_rabi", self.dd_rabi),
            ("ramp_time", self.ramp_time),
            ("flip_ramp_time", self.flip_ramp_time),
        ];
        for (name, v) in non_negative {
            if !(v >= T::zero()) || !v.is_finite() {
                return Err(ScheduleError::InvalidParameter(format!("{name} must be non-negative and finite")));
            }
        }
        for (name, v) in [
            ("zeeman_shift", self.zeeman_shift),
            ("detuning_error", self.detuning_error),
            ("dd_drift[0]", self.dd_drift[0]),
            ("dd_drift[1]", self.dd_drift[1]),
        ] {
            if !v.is_finite() {
                return Err(ScheduleError::InvalidParameter(format!("{name} must be finite")));
            }
        }
        if self.loops == 0 {
            return Err(ScheduleError::InvalidParameter("loops must be at least 1".into()));
        }
        if self.fock_cutoff < 2 {
            return Err(ScheduleError::InvalidParameter("fock_cutoff must be at least 2".into()));
        }
        if self.ramp_time > self.duration {
            return Err(ScheduleError::InvalidParameter("ramp_time exceeds the gate duration".into()));
        }
        if self.closed && !self.satisfies_closure() {
            return Err(ScheduleError::NotClosed);
        }
        if self.dd_mode == DecouplingMode::Walsh && !crate::walsh::SUPPORTED_ORDERS.contains(&self.walsh_order) {
            return Err(ScheduleError::Walsh(crate::walsh::WalshError::UnsupportedOrder(self.walsh_order)));
        }
        if self.model == FrameModel::Lab && !(self.qubit_freq > T::zero()) {
            return Err(ScheduleError::InvalidParameter("lab-frame model needs a positive qubit_freq".into()));
        }
        Ok(())
    }

    /// Ramp-time to drive-period ratio `ramp / (2π/√(ω_m² + Ω²))`; large values mean adiabatic ramps.
    pub fn adiabaticity_ratio(&self) -> T {
        let w = (self.mode_freq * self.mode_freq + self.carrier_rabi * self.carrier_rabi).sqrt();
        self.ramp_time * w / T::TAU()
    }
}

/// Motional mode of the two-ion crystal.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeParams<T> {
    pub ion_mass: T,
    pub mode_freq: T,
    pub zpf: T,
    /// Mode-vector component per ion; `1/√2` for the rocking mode.
    pub eigenvector_factor: T,
}

impl<T: Real> ModeParams<T> {
    pub fn new(ion_mass: T, mode_freq: T) -> Self {
        Self {
            ion_mass,
            mode_freq,
            zpf: zero_point_fluctuation(ion_mass, mode_freq),
            eigenvector_factor: T::FRAC_1_SQRT_2(),
        }
    }

    pub fn calcium43(mode_freq: T) -> Self {
        Self::new(T::lit(CA43_MASS), mode_freq)
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        let expected = zero_point_fluctuation(self.ion_mass, self.mode_freq);
        let tol = T::lit(1e-12).max(T::epsilon() * T::lit(16.0));
        if !((self.zpf - expected).abs() <= tol * expected) {
            return Err(ScheduleError::InvalidParameter("zpf inconsistent with ion mass and mode frequency".into()));
        }
        Ok(())
    }

    /// Spatial slope of the carrier Rabi rate, `∂Ω/∂x = Ω_g / x_zpf`, in rad/s/m.
    pub fn rabi_gradient(&self, gate_rabi: T) -> T {
        gate_rabi / self.zpf
    }
}

/// `√(ħ / 2 m ω_m)`.
pub fn zero_point_fluctuation<T: Real>(mass: T, mode_freq: T) -> T {
    // evaluated in f64: ħ underflows f32
    let x = (HBAR / (2.0 * mass.as_f64() * mode_freq.as_f64())).sqrt();
    T::lit(x)
}
