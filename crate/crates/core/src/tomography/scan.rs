use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};

use num_complex::Complex64 as C;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use crate::dynamics::QubitDensity;

use super::{apply_readout_spam, ParityDataset, ParityPoint, TomographyError};

/// Global analysis pulse `exp(−i π/4 (σ_φ,1 + σ_φ,2))`, `σ_φ = cos φ σ_x + sin φ σ_y`.
pub fn analysis_rotation(phi: f64) -> [[C; 4]; 4] {
    let (c, s) = (FRAC_PI_4.cos(), FRAC_PI_4.sin());
    let minus_i = C::new(0.0, -s);
    let r = [
        [C::new(c, 0.0), minus_i * C::from_polar(1.0, -phi)],
        [minus_i * C::from_polar(1.0, phi), C::new(c, 0.0)],
    ];
    let mut out = [[C::new(0.0, 0.0); 4]; 4];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, el) in row.iter_mut().enumerate() {
            *el = r[i >> 1][j >> 1] * r[i & 1][j & 1];
        }
    }
    out
}

fn rotated_populations(rho: &QubitDensity<f64>, phi: f64) -> [f64; 4] {
    let u = analysis_rotation(phi);
    let mut pops = [0.0; 4];
    for (i, p) in pops.iter_mut().enumerate() {
        let mut acc = C::new(0.0, 0.0);
        for j in 0..4 {
            for k in 0..4 {
                acc += u[i][j] * rho[j][k] * u[i][k].conj();
            }
        }
        *p = acc.re.clamp(0.0, 1.0);
    }
    pops
}

fn diagonal(rho: &QubitDensity<f64>) -> [f64; 4] {
    [rho[0][0].re, rho[1][1].re, rho[2][2].re, rho[3][3].re].map(|x| x.clamp(0.0, 1.0))
}

/// Odd-outcome probability after the analysis pulse, with readout flips of probability `spam` per qubit.
pub fn parity_probability(rho: &QubitDensity<f64>, phi: f64, spam: f64) -> f64 {
    let p = apply_readout_spam(rotated_populations(rho, phi), spam);
    (p[1] + p[2]).clamp(0.0, 1.0)
}

fn check_inputs(shots: u64, spam: f64) -> Result<(), TomographyError> {
    if shots == 0 {
        return Err(TomographyError::InvalidData("shots must be positive".into()));
    }
    if !(0.0..=0.5).contains(&spam) {
        return Err(TomographyError::InvalidData("spam probability must lie in [0, 1/2]".into()));
    }
    Ok(())
}

/// Samples binomial odd counts at each phase. Deterministic in `seed`.
pub fn simulate_parity_scan(
    rho: &QubitDensity<f64>,
    phases: &[f64],
    shots: u64,
    spam: f64,
    seed: u64,
) -> Result<ParityDataset, TomographyError> {
    check_inputs(shots, spam)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(phases.len());
    for &phi in phases {
        let phase = phi.rem_euclid(TAU);
        let p = parity_probability(rho, phase, spam);
        let count_odd = Binomial::new(shots, p).expect("probability in [0, 1]").sample(&mut rng);
        points.push(ParityPoint { phase, shots, count_odd });
    }
    Ok(ParityDataset { points })
}

/// Outcome counts of a direct population measurement.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PopulationCounts {
    pub shots: u64,
    /// `00, 01, 10, 11`.
    pub counts: [u64; 4],
}

impl PopulationCounts {
    pub fn fraction(&self, outcome: usize) -> f64 {
        self.counts[outcome] as f64 / self.shots as f64
    }

    /// Binomial standard error of one outcome fraction.
    pub fn sigma(&self, outcome: usize) -> f64 {
        let p = self.fraction(outcome);
        (p * (1.0 - p) / self.shots as f64).sqrt()
    }
}

/// Multinomial sample of the four outcomes without an analysis pulse.
pub fn simulate_populations(
    rho: &QubitDensity<f64>,
    shots: u64,
    spam: f64,
    seed: u64,
) -> Result<PopulationCounts, TomographyError> {
    check_inputs(shots, spam)?;
    let probs = apply_readout_spam(diagonal(rho), spam);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut counts = [0u64; 4];
    let mut left = shots;
    let mut mass = 1.0;
    for k in 0..3 {
        let p = if mass > 0.0 { (probs[k] / mass).clamp(0.0, 1.0) } else { 0.0 };
        counts[k] = Binomial::new(left, p).expect("probability in [0, 1]").sample(&mut rng);
        left -= counts[k];
        mass -= probs[k];
    }
    counts[3] = left;
    Ok(PopulationCounts { shots, counts })
}

/// `n` evenly spaced phases over `[0, 2π)`.
pub fn uniform_phases(n: usize) -> Vec<f64> {
    (0..n).map(|i| TAU * i as f64 / n as f64).collect()
}

/// `n` phases split between clusters of half-width `spread` around `offset` and `offset + π/2`,
/// the fringe extrema for a fringe offset of `offset`.
pub fn concentrated_phases(n: usize, spread: f64, offset: f64) -> Vec<f64> {
    let first = n.div_ceil(2);
    let cluster = |k: usize, centre: f64| -> Vec<f64> {
        (0..k)
            .map(|i| {
                let x = if k == 1 { 0.0 } else { -spread + 2.0 * spread * i as f64 / (k - 1) as f64 };
                (centre + x).rem_euclid(TAU)
            })
            .collect()
    };
    let mut v = cluster(first, offset);
    v.extend(cluster(n - first, offset + FRAC_PI_2));
    v
}
