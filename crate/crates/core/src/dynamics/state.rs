use num_complex::Complex;

use crate::scalar::Real;

use super::linalg::{czero, inner, vec_norm, C};
use super::DynamicsError;

/// Pure state on the two-qubit ⊗ Fock space, indexed `(2·q1 + q2)·n_max + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState<T> {
    amplitudes: Vec<C<T>>,
    n_max: usize,
}

/// Reduced two-qubit density matrix in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
pub type QubitDensity<T> = [[C<T>; 4]; 4];

impl<T: Real> QuantumState<T> {
    pub fn from_amplitudes(amplitudes: Vec<C<T>>, n_max: usize) -> Result<Self, DynamicsError> {
        if amplitudes.len() != 4 * n_max {
            return Err(DynamicsError::DimensionMismatch { expected: 4 * n_max, got: amplitudes.len() });
        }
        let s = Self { amplitudes, n_max };
        let norm = s.norm();
        if (norm - T::one()).abs().as_f64() > 1e-9_f64.max(T::epsilon().as_f64() * 64.0) {
            return Err(DynamicsError::NotNormalized { norm: norm.as_f64() });
        }
        Ok(s)
    }

    pub(crate) fn from_raw(amplitudes: Vec<C<T>>, n_max: usize) -> Self {
        Self { amplitudes, n_max }
    }

    pub fn basis(q1: usize, q2: usize, n: usize, n_max: usize) -> Self {
        assert!(q1 < 2 && q2 < 2 && n < n_max, "basis label out of range");
        let mut amplitudes = vec![czero(); 4 * n_max];
        amplitudes[(2 * q1 + q2) * n_max + n] = Complex::new(T::one(), T::zero());
        Self { amplitudes, n_max }
    }

    /// `|00⟩ ⊗ |0⟩`.
    pub fn ground(n_max: usize) -> Self {
        Self::basis(0, 0, 0, n_max)
    }

    /// Product of a two-qubit state (`|00⟩, |01⟩, |10⟩, |11⟩` amplitudes) and Fock state `n`.
    pub fn product(qubits: [C<T>; 4], n: usize, n_max: usize) -> Result<Self, DynamicsError> {
        let mut amplitudes = vec![czero(); 4 * n_max];
        for (q, amp) in qubits.into_iter().enumerate() {
            amplitudes[q * n_max + n] = amp;
        }
        Self::from_amplitudes(amplitudes, n_max)
    }

    /// `(|00⟩ + e^{iγ}|11⟩)/√2 ⊗ |0⟩`.
    pub fn bell(gamma: T, n_max: usize) -> Self {
        let h = T::FRAC_1_SQRT_2();
        let mut amplitudes = vec![czero(); 4 * n_max];
        amplitudes[0] = Complex::new(h, T::zero());
        amplitudes[3 * n_max] = Complex::from_polar(h, gamma);
        Self { amplitudes, n_max }
    }

    pub fn amplitudes(&self) -> &[C<T>] {
        &self.amplitudes
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> T {
        vec_norm(&self.amplitudes)
    }

    pub fn overlap(&self, other: &Self) -> C<T> {
        inner(&self.amplitudes, &other.amplitudes)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> T {
        self.overlap(other).norm_sqr()
    }

    /// Population of each Fock level, summed over the qubits.
    pub fn fock_populations(&self) -> Vec<T> {
        (0..self.n_max)
            .map(|n| (0..4).fold(T::zero(), |acc, q| acc + self.amplitudes[q * self.n_max + n].norm_sqr()))
            .collect()
    }

    /// Population in the highest `levels` Fock states.
    pub fn top_population(&self, levels: usize) -> T {
        let p = self.fock_populations();
        p[self.n_max.saturating_sub(levels)..].iter().fold(T::zero(), |a, &b| a + b)
    }

    /// Mean phonon number.
    pub fn mean_phonons(&self) -> T {
        self.fock_populations()
            .into_iter()
            .enumerate()
            .fold(T::zero(), |acc, (n, p)| acc + T::from_usize_lossy(n) * p)
    }

    /// Qubit state with the motion traced out.
    pub fn qubit_density(&self) -> QubitDensity<T> {
        let mut rho = [[czero(); 4]; 4];
        for (i, row) in rho.iter_mut().enumerate() {
            for (j, el) in row.iter_mut().enumerate() {
                *el = (0..self.n_max).fold(czero(), |acc, n| {
                    acc + self.amplitudes[i * self.n_max + n] * self.amplitudes[j * self.n_max + n].conj()
                });
            }
        }
        rho
    }
}

/// Boltzmann weights `p_n = n̄ⁿ/(n̄+1)ⁿ⁺¹` over `0..n_max`, dropping levels below `min_weight` and renormalising.
pub fn thermal_weights<T: Real>(nbar: T, n_max: usize, min_weight: T) -> Vec<(usize, T)> {
    if !(nbar > T::zero()) {
        return vec![(0, T::one())];
    }
    let ratio = nbar / (nbar + T::one());
    let mut w: Vec<(usize, T)> = (0..n_max)
        .map(|n| (n, ratio.powi(n as i32) / (nbar + T::one())))
        .filter(|&(_, p)| p >= min_weight)
        .collect();
    let total = w.iter().fold(T::zero(), |a, &(_, p)| a + p);
    for (_, p) in &mut w {
        *p = *p / total;
    }
    w
}
