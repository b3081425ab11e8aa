//! Microwave power management: fixed-length shots that inject a constant energy.
//!
//! Each shot opens with a dummy pulse (during optical state preparation, so it
//! does not act on the qubits) whose length tops the injected energy up to the
//! budget. Idle periods run the drive continuously at the budget's mean power.

use crate::scalar::Real;

use super::ScheduleError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlannedPulse<T> {
    /// Watts.
    pub power: T,
    /// Seconds.
    pub duration: T,
}

impl<T: Real> PlannedPulse<T> {
    pub fn energy(&self) -> T {
        self.power * self.duration
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpmShot<T> {
    pub shot_duration: T,
    pub experiment_pulses: Vec<PlannedPulse<T>>,
    pub dummy_power: T,
    pub dummy_duration: T,
    pub energy_budget: T,
}

impl<T: Real> MpmShot<T> {
    pub fn experiment_energy(&self) -> T {
        self.experiment_pulses.iter().fold(T::zero(), |acc, p| acc + p.energy())
    }

    pub fn injected_energy(&self) -> T {
        self.dummy_power * self.dummy_duration + self.experiment_energy()
    }

    /// Continuous power that keeps the mean injected power unchanged while idling.
    pub fn idle_power(&self) -> T {
        self.energy_budget / self.shot_duration
    }
}

/// Plans one shot so that the total injected energy equals `energy_budget`.
pub fn plan_mpm_shot<T: Real>(
    shot_duration: T,
    experiment_pulses: &[PlannedPulse<T>],
    energy_budget: T,
    dummy_power: T,
) -> Result<MpmShot<T>, ScheduleError> {
    if !(shot_duration > T::zero()) {
        return Err(ScheduleError::InvalidParameter("shot_duration must be positive".into()));
    }
    if !(dummy_power > T::zero()) {
        return Err(ScheduleError::InvalidParameter("dummy_power must be positive".into()));
    }
    if !(energy_budget >= T::zero()) {
        return Err(ScheduleError::InvalidParameter("energy_budget must be non-negative".into()));
    }
    for p in experiment_pulses {
        if !(p.power >= T::zero()) || !(p.duration >= T::zero()) {
            return Err(ScheduleError::InvalidParameter("pulse power and duration must be non-negative".into()));
        }
    }
    let experiment = experiment_pulses.iter().fold(T::zero(), |acc, p| acc + p.energy());
    // a relative rounding allowance so "experiment == budget" is not rejected
    let slack = energy_budget * T::epsilon() * T::lit(8.0);
    if experiment > energy_budget + slack {
        return Err(ScheduleError::BudgetExceeded {
            experiment: experiment.as_f64(),
            budget: energy_budget.as_f64(),
            overshoot: (experiment - energy_budget).as_f64(),
        });
    }
    let dummy_duration = ((energy_budget - experiment) / dummy_power).max(T::zero());
    let busy = experiment_pulses.iter().fold(T::zero(), |acc, p| acc + p.duration);
    let available = shot_duration - busy;
    if dummy_duration > available {
        return Err(ScheduleError::DummyDoesNotFit { dummy: dummy_duration.as_f64(), available: available.as_f64() });
    }
    Ok(MpmShot {
        shot_duration,
        experiment_pulses: experiment_pulses.to_vec(),
        dummy_power,
        dummy_duration,
        energy_budget,
    })
}
