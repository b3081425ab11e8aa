//! Adaptive fourth-order Magnus integrator.
//!
//! Each step applies `exp(Ω)` with the two-point Gauss–Legendre Magnus
//! generator `Ω = −i h/2 (H₁+H₂) − (√3 h²/12)[H₂, H₁]`. Ω is anti-Hermitian, so
//! the step is unitary up to the Taylor truncation of the exponential action.
//! Local error comes from step doubling.

use num_complex::Complex;

use crate::scalar::Real;

use super::hamiltonian::Generator;
use super::linalg::{czero, vec_norm, DenseMatrix, C};
use super::DynamicsError;

#[derive(Debug, Clone, PartialEq)]
pub struct IntegratorOptions<T> {
    /// Local error target per accepted step.
    pub tolerance: T,
    /// Population in the top two Fock levels above which leakage is flagged.
    pub leakage_threshold: T,
    pub max_steps: usize,
}

impl<T: Real> IntegratorOptions<T> {
    pub fn with_tolerance(tolerance: T) -> Self {
        Self { tolerance, leakage_threshold: T::lit(1e-6), max_steps: 10_000_000 }
    }
}

impl<T: Real> Default for IntegratorOptions<T> {
    fn default() -> Self {
        Self::with_tolerance(T::lit(1e-10))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepStats<T> {
    pub accepted: usize,
    pub rejected: usize,
    /// Largest top-two-level Fock population seen at a step boundary.
    pub max_leakage: T,
}

struct Frozen<'a, T> {
    terms: &'a [crate::dynamics::linalg::SparseMatrix<T>],
    c: Vec<C<T>>,
}

impl<T: Real> Frozen<'_, T> {
    fn apply(&self, x: &[C<T>]) -> Vec<C<T>> {
        let mut y = vec![czero(); x.len()];
        for (m, &k) in self.terms.iter().zip(&self.c) {
            if k != czero() {
                m.apply_add(k, x, &mut y);
            }
        }
        y
    }
}

fn frozen<'a, T: Real, G: Generator<T> + ?Sized>(g: &'a G, t: T) -> Frozen<'a, T> {
    let mut c = vec![czero(); g.terms().len()];
    g.coefficients(t, &mut c);
    Frozen { terms: g.terms(), c }
}

/// One Magnus step of length `h` from `t`; `None` when the exponential series is not trustworthy.
fn magnus_step<T: Real, G: Generator<T> + ?Sized>(g: &G, t: T, h: T, psi: &[C<T>]) -> Option<Vec<C<T>>> {
    let off = T::lit(3.0).sqrt() / T::lit(6.0);
    let half = T::lit(0.5);
    let h1 = frozen(g, t + (half - off) * h);
    let h2 = frozen(g, t + (half + off) * h);
    let a = Complex::new(T::zero(), -h * half);
    let b = Complex::new(-T::lit(3.0).sqrt() * h * h / T::lit(12.0), T::zero());
    let omega = |v: &[C<T>]| -> Vec<C<T>> {
        let u1 = h1.apply(v);
        let u2 = h2.apply(v);
        let u21 = h2.apply(&u1);
        let u12 = h1.apply(&u2);
        (0..v.len()).map(|i| a * (u1[i] + u2[i]) + b * (u21[i] - u12[i])).collect()
    };

    let mut result = psi.to_vec();
    let mut term = psi.to_vec();
    let base = vec_norm(psi);
    for k in 1..=64 {
        term = omega(&term);
        let inv = T::one() / T::from_usize_lossy(k);
        for z in &mut term {
            *z = *z * inv;
        }
        let tn = vec_norm(&term);
        if k == 1 && tn > T::lit(4.0) * base {
            return None;
        }
        for (r, z) in result.iter_mut().zip(&term) {
            *r = *r + z;
        }
        if tn <= T::epsilon() * T::lit(0.01) * base {
            return Some(result);
        }
    }
    None
}

fn diff_norm<T: Real>(a: &[C<T>], b: &[C<T>]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (x, y)| acc + (x - y).norm_sqr()).sqrt()
}

fn top_two_population<T: Real>(psi: &[C<T>], n_max: usize) -> T {
    let lo = n_max.saturating_sub(2);
    (0..psi.len() / n_max).fold(T::zero(), |acc, q| {
        (lo..n_max).fold(acc, |a, n| a + psi[q * n_max + n].norm_sqr())
    })
}

/// Integrates `i ∂ψ/∂t = H(t) ψ` from `t0` to `t1`. `fock_levels` enables the leakage monitor.
pub fn integrate<T: Real, G: Generator<T> + ?Sized>(
    g: &G,
    psi0: &[C<T>],
    t0: T,
    t1: T,
    opts: &IntegratorOptions<T>,
    fock_levels: Option<usize>,
) -> Result<(Vec<C<T>>, StepStats<T>), DynamicsError> {
    if !(opts.tolerance > T::zero()) {
        return Err(DynamicsError::InvalidTolerance);
    }
    if psi0.len() != g.dim() {
        return Err(DynamicsError::DimensionMismatch { expected: g.dim(), got: psi0.len() });
    }
    let mut stats = StepStats { accepted: 0, rejected: 0, max_leakage: T::zero() };
    let mut psi = psi0.to_vec();
    if let Some(n) = fock_levels {
        stats.max_leakage = top_two_population(&psi, n);
    }
    if !(t1 > t0) {
        return Ok((psi, stats));
    }
    // the achievable local error is bounded by rounding
    let tol = opts.tolerance.max(T::epsilon() * T::lit(256.0));
    let span = t1 - t0;
    let min_step = span * T::epsilon() * T::lit(16.0);

    let mut knots: Vec<T> = g.breakpoints().into_iter().filter(|&b| b > t0 && b < t1).collect();
    knots.push(t1);
    let mut h = span / T::lit(64.0);
    let mut t = t0;
    let fifth = T::lit(0.2);
    for knot in knots {
        while knot - t > min_step {
            let remaining = knot - t;
            let last = h >= remaining;
            let step = if last { remaining } else { h };
            let coarse = magnus_step(g, t, step, &psi);
            let half = step / T::lit(2.0);
            let fine = magnus_step(g, t, half, &psi).and_then(|m| magnus_step(g, t + half, half, &m));
            let (Some(coarse), Some(fine)) = (coarse, fine) else {
                stats.rejected += 1;
                h = step * T::lit(0.25);
                if h < min_step {
                    return Err(DynamicsError::StepUnderflow { t: t.as_f64(), step: h.as_f64() });
                }
                continue;
            };
            let err = diff_norm(&coarse, &fine) / T::lit(15.0);
            let factor = if err > T::zero() {
                (T::lit(0.9) * (tol / err).powf(fifth)).min(T::lit(4.0)).max(T::lit(0.2))
            } else {
                T::lit(4.0)
            };
            if err <= tol {
                psi = fine;
                t = if last { knot } else { t + step };
                stats.accepted += 1;
                if stats.accepted > opts.max_steps {
                    return Err(DynamicsError::TooManySteps(opts.max_steps));
                }
                if let Some(n) = fock_levels {
                    stats.max_leakage = stats.max_leakage.max(top_two_population(&psi, n));
                }
                // a short final step to a knot should not shrink the running step size
                h = if last { h.max(step * factor) } else { step * factor };
            } else {
                stats.rejected += 1;
                h = step * factor;
                if h < min_step {
                    return Err(DynamicsError::StepUnderflow { t: t.as_f64(), step: h.as_f64() });
                }
            }
        }
        t = knot;
    }
    Ok((psi, stats))
}

/// Propagator over `[t0, t1]`, column by column.
pub fn propagator<T: Real, G: Generator<T> + ?Sized>(
    g: &G,
    t0: T,
    t1: T,
    opts: &IntegratorOptions<T>,
) -> Result<DenseMatrix<T>, DynamicsError> {
    let n = g.dim();
    let mut u = DenseMatrix::zeros(n);
    for c in 0..n {
        let mut e = vec![czero(); n];
        e[c] = Complex::new(T::one(), T::zero());
        let (col, _) = integrate(g, &e, t0, t1, opts, None)?;
        for (r, z) in col.into_iter().enumerate() {
            u[(r, c)] = z;
        }
    }
    Ok(u)
}
