//! Closed-form MS propagator for a square pulse: `U = D(α Ŝ_x,−) exp(iΦ Ŝ_x,−²)`.

use num_complex::Complex;

use crate::scalar::Real;
use crate::schedule::{GateParams, PulseSchedule, ToneRole};

use super::linalg::{czero, DenseMatrix};
use super::operators::annihilation;
use super::DynamicsError;

/// Displacement `α(t) = (Ω_g/2δ)(1 − e^{iδt})` and loop phase `Φ(t) = (Ω_g/2δ)²(δt − sin δt)`.
pub fn ms_loop_parameters<T: Real>(gate_rabi: T, detuning: T, t: T) -> (Complex<T>, T) {
    let r = gate_rabi / (T::lit(2.0) * detuning);
    let x = detuning * t;
    let alpha = Complex::new(r * (T::one() - x.cos()), -r * x.sin());
    (alpha, r * r * (x - x.sin()))
}

/// Square-pulse propagator on the `4·n_max` product space (`n_max = params.fock_cutoff`).
pub fn ms_analytic_propagator<T: Real>(params: &GateParams<T>, t: T) -> Result<DenseMatrix<T>, DynamicsError> {
    if params.ramp_time != T::zero() {
        return Err(DynamicsError::RequiresSquarePulse("ramped sideband envelope".into()));
    }
    if params.zeeman_shift != T::zero() {
        return Err(DynamicsError::RequiresSquarePulse("non-zero Zeeman shift".into()));
    }
    if params.dd_active() {
        return Err(DynamicsError::RequiresSquarePulse("decoupling drive present".into()));
    }
    let n_max = params.fock_cutoff;
    let (alpha, phi) = ms_loop_parameters(params.gate_rabi, params.detuning + params.detuning_error, t);

    let a = annihilation::<T>(n_max).to_dense();
    let generator = a.adjoint().scale(alpha).sub(&a.scale(alpha.conj()));

    // Ŝ_x,− eigenspaces in the computational basis: |+−⟩ (s = 2), |−+⟩ (s = −2), {|++⟩, |−−⟩} (s = 0)
    let h = T::FRAC_1_SQRT_2();
    let plus = [h, h];
    let minus = [h, -h];
    let product = |u: [T; 2], v: [T; 2]| [u[0] * v[0], u[0] * v[1], u[1] * v[0], u[1] * v[1]];
    let projector = |vecs: &[[T; 4]]| {
        let mut p = [[T::zero(); 4]; 4];
        for v in vecs {
            for i in 0..4 {
                for j in 0..4 {
                    p[i][j] = p[i][j] + v[i] * v[j];
                }
            }
        }
        p
    };
    let blocks = [
        (T::lit(2.0), projector(&[product(plus, minus)])),
        (T::lit(-2.0), projector(&[product(minus, plus)])),
        (T::zero(), projector(&[product(plus, plus), product(minus, minus)])),
    ];

    let dim = 4 * n_max;
    let mut u = DenseMatrix::zeros(dim);
    for (s, p) in blocks {
        let d = generator.scale(Complex::new(s, T::zero())).expm();
        let phase = Complex::from_polar(T::one(), phi * s * s);
        for qi in 0..4 {
            for qj in 0..4 {
                if p[qi][qj] == T::zero() {
                    continue;
                }
                let w = phase * p[qi][qj];
                for n in 0..n_max {
                    for m in 0..n_max {
                        let el = d[(n, m)];
                        if el != czero() {
                            u[(qi * n_max + n, qj * n_max + m)] = u[(qi * n_max + n, qj * n_max + m)] + w * el;
                        }
                    }
                }
            }
        }
    }
    Ok(u)
}

/// Residual decoupling rotation `∫ s(t) Ω_dd(t) dt` about x; `None` without a decoupling tone.
pub fn net_dd_rotation<T: Real>(schedule: &PulseSchedule<T>) -> Option<T> {
    schedule.tone(ToneRole::Decoupling).map(|t| t.envelope.signed_area())
}
