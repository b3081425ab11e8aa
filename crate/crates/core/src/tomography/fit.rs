//! Binomial maximum-likelihood fit of the parity fringe
//! `P_odd(φ) = p_mid − (C/2) cos 2(φ − φ₀)`.
//!
//! The fit runs in the linear parametrisation `P = b₀ + b₁ cos 2φ + b₂ sin 2φ`,
//! where the log-likelihood is concave and `P ∈ [0, 1]` for every phase is the
//! convex set `√(b₁² + b₂²) ≤ min(b₀, 1 − b₀)`. A log barrier on that set keeps
//! Newton iterates feasible.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};

use super::{ParityDataset, ParityPoint, TomographyError};

pub fn parity_model(phi: f64, contrast: f64, offset: f64, p_mid: f64) -> f64 {
    p_mid - 0.5 * contrast * (2.0 * (phi - offset)).cos()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalMethod {
    ProfileLikelihood,
    /// Parametric resampling of each point's counts; intervals are estimate ± one standard deviation.
    Bootstrap { resamples: usize, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FitOptions {
    pub intervals: IntervalMethod,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self { intervals: IntervalMethod::ProfileLikelihood }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParityFit {
    pub contrast: f64,
    /// In `[0, π)`.
    pub phase_offset: f64,
    pub p_mid: f64,
    /// One-sigma intervals.
    pub contrast_interval: (f64, f64),
    pub phase_interval: (f64, f64),
    pub p_mid_interval: (f64, f64),
    /// Log-likelihood at the estimate (natural log, summed over shots).
    pub log_likelihood: f64,
    /// Every point has the same odd fraction, so the fringe phase is undetermined.
    pub degenerate: bool,
    pub method: IntervalMethod,
}

impl ParityFit {
    pub fn contrast_sigma(&self) -> f64 {
        0.5 * (self.contrast_interval.1 - self.contrast_interval.0)
    }

    pub fn predict(&self, phi: f64) -> f64 {
        parity_model(phi, self.contrast, self.phase_offset, self.p_mid)
    }
}

type Vec3 = [f64; 3];
type Mat3 = [[f64; 3]; 3];

fn features(phi: f64) -> Vec3 {
    [1.0, (2.0 * phi).cos(), (2.0 * phi).sin()]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves `A x = b` for symmetric positive definite `A` (dimension ≤ 3) by Cholesky.
fn cholesky_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut l = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..=i {
            let s = a[i][j] - (0..j).map(|k| l[i][k] * l[j][k]).sum::<f64>();
            if i == j {
                if !(s > 0.0) {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; n];
    for i in 0..n {
        y[i] = (b[i] - (0..i).map(|k| l[i][k] * y[k]).sum::<f64>()) / l[i][i];
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        x[i] = (y[i] - (i + 1..n).map(|k| l[k][i] * x[k]).sum::<f64>()) / l[i][i];
    }
    Some(x)
}

/// Log-likelihood of a dataset, normalised by the total shot count.
struct Likelihood {
    x: Vec<Vec3>,
    odd: Vec<f64>,
    even: Vec<f64>,
    total: f64,
}

/// `b = base + Σ z_j cols[j]`, with extra constraints `lin.0 · z + lin.1 > 0`.
struct Affine<'a> {
    base: Vec3,
    cols: &'a [Vec3],
    lin: &'a [(Vec<f64>, f64)],
}

impl Affine<'_> {
    fn map(&self, z: &[f64]) -> Vec3 {
        let mut b = self.base;
        for (c, &zj) in self.cols.iter().zip(z) {
            for i in 0..3 {
                b[i] += zj * c[i];
            }
        }
        b
    }
}

fn cone_margins(b: &Vec3) -> (f64, f64) {
    let r2 = b[1] * b[1] + b[2] * b[2];
    (b[0] * b[0] - r2, (1.0 - b[0]) * (1.0 - b[0]) - r2)
}

impl Likelihood {
    fn new(data: &ParityDataset) -> Self {
        let x = data.points.iter().map(|p| features(p.phase)).collect();
        let odd: Vec<f64> = data.points.iter().map(|p| p.count_odd as f64).collect();
        let even: Vec<f64> = data.points.iter().map(|p| (p.shots - p.count_odd) as f64).collect();
        let total = data.total_shots() as f64;
        Self { x, odd, even, total }
    }

    fn value(&self, b: &Vec3) -> f64 {
        let mut ll = 0.0;
        for i in 0..self.x.len() {
            let p = dot(&self.x[i], b);
            if self.odd[i] > 0.0 {
                ll += self.odd[i] * p.ln();
            }
            if self.even[i] > 0.0 {
                ll += self.even[i] * (1.0 - p).ln();
            }
        }
        ll / self.total
    }

    fn grad_hess(&self, b: &Vec3) -> (Vec3, Mat3) {
        let mut g = [0.0; 3];
        let mut h = [[0.0; 3]; 3];
        for i in 0..self.x.len() {
            let p = dot(&self.x[i], b);
            let (k, m) = (self.odd[i], self.even[i]);
            let d1 = (if k > 0.0 { k / p } else { 0.0 }) - (if m > 0.0 { m / (1.0 - p) } else { 0.0 });
            let d2 = (if k > 0.0 { k / (p * p) } else { 0.0 }) + (if m > 0.0 { m / ((1.0 - p) * (1.0 - p)) } else { 0.0 });
            for r in 0..3 {
                g[r] += d1 * self.x[i][r] / self.total;
                for c in 0..3 {
                    h[r][c] -= d2 * self.x[i][r] * self.x[i][c] / self.total;
                }
            }
        }
        (g, h)
    }

    fn feasible(&self, b: &Vec3) -> bool {
        let (g1, g2) = cone_margins(b);
        g1 > 0.0 && g2 > 0.0 && b[0] > 0.0 && b[0] < 1.0
    }

    /// Barrier objective to minimise: `−LL − μ(ln g₁ + ln g₂ + Σ ln lin)`.
    fn objective(&self, aff: &Affine, z: &[f64], mu: f64) -> f64 {
        let b = aff.map(z);
        if !self.feasible(&b) {
            return f64::INFINITY;
        }
        let mut lin_sum = 0.0;
        for (a, c) in aff.lin {
            let v = dot(a, z) + c;
            if !(v > 0.0) {
                return f64::INFINITY;
            }
            lin_sum += v.ln();
        }
        let (g1, g2) = cone_margins(&b);
        -self.value(&b) - mu * (g1.ln() + g2.ln() + lin_sum)
    }

    /// Maximises the likelihood over the affine slice from the strictly feasible `z`.
    fn maximise(&self, aff: &Affine, mut z: Vec<f64>) -> Option<(Vec<f64>, f64)> {
        let k = z.len();
        if !self.objective(aff, &z, 1.0).is_finite() {
            return None;
        }
        let mut mu = 0.1;
        while mu > 1e-14 {
            for _ in 0..200 {
                let b = aff.map(&z);
                let (gl, hl) = self.grad_hess(&b);
                let (g1, g2) = cone_margins(&b);
                let dg1 = [2.0 * b[0], -2.0 * b[1], -2.0 * b[2]];
                let dg2 = [-2.0 * (1.0 - b[0]), -2.0 * b[1], -2.0 * b[2]];
                let hg = [2.0, -2.0, -2.0];
                let mut gb = [0.0; 3];
                let mut hb = [[0.0; 3]; 3];
                for r in 0..3 {
                    gb[r] = -gl[r] - mu * (dg1[r] / g1 + dg2[r] / g2);
                    for c in 0..3 {
                        let diag = if r == c { hg[r] } else { 0.0 };
                        hb[r][c] = -hl[r][c]
                            - mu * (diag / g1 - dg1[r] * dg1[c] / (g1 * g1) + diag / g2 - dg2[r] * dg2[c] / (g2 * g2));
                    }
                }
                let mut gz = vec![0.0; k];
                let mut hz = vec![vec![0.0; k]; k];
                for i in 0..k {
                    gz[i] = dot(&aff.cols[i], &gb);
                    for j in 0..k {
                        hz[i][j] = (0..3).map(|r| aff.cols[i][r] * dot(&hb[r], &aff.cols[j])).sum();
                    }
                }
                for (a, c) in aff.lin {
                    let v = dot(a, &z) + c;
                    for i in 0..k {
                        gz[i] -= mu * a[i] / v;
                        for j in 0..k {
                            hz[i][j] += mu * a[i] * a[j] / (v * v);
                        }
                    }
                }
                let neg: Vec<f64> = gz.iter().map(|g| -g).collect();
                let step = cholesky_solve(&hz, &neg).or_else(|| {
                    let scale = (0..k).map(|i| hz[i][i].abs()).fold(1e-300, f64::max);
                    let mut reg = hz.clone();
                    for (i, row) in reg.iter_mut().enumerate() {
                        row[i] += 1e-10 * scale;
                    }
                    cholesky_solve(&reg, &neg)
                })?;
                let decrement = -dot(&gz, &step);
                // only the last barrier stage needs a tight stop
                let stop = if mu > 1e-13 { 1e-12 } else { 1e-24 };
                if decrement < stop {
                    break;
                }
                let f0 = self.objective(aff, &z, mu);
                let mut t = 1.0;
                loop {
                    let trial: Vec<f64> = z.iter().zip(&step).map(|(a, d)| a + t * d).collect();
                    let f = self.objective(aff, &trial, mu);
                    if f <= f0 - 0.25 * t * decrement {
                        z = trial;
                        break;
                    }
                    t *= 0.5;
                    if t < 1e-12 {
                        break;
                    }
                }
                if t < 1e-12 {
                    break;
                }
            }
            mu *= 0.1;
        }
        let ll = self.value(&aff.map(&z));
        Some((z, ll))
    }

    fn full_fit(&self) -> Option<Vec3> {
        let frac = self.odd.iter().sum::<f64>() / self.total;
        let cols = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let aff = Affine { base: [0.0; 3], cols: &cols, lin: &[] };
        let (z, _) = self.maximise(&aff, vec![frac.clamp(0.01, 0.99), 0.0, 0.0])?;
        Some([z[0], z[1], z[2]])
    }

    /// Profile over the contrast: maximise over the fringe phase, with the midpoint solved exactly.
    fn profile_contrast(&self, c: f64, phase_hint: f64) -> f64 {
        let eval = |phi0: f64| self.best_midpoint(c, phi0);
        let n = 24;
        let mut best = (phase_hint, eval(phase_hint));
        for i in 0..n {
            let p = PI * i as f64 / n as f64;
            let v = eval(p);
            if v > best.1 {
                best = (p, v);
            }
        }
        // golden-section refinement around the best grid point
        let (mut a, mut b) = (best.0 - PI / n as f64, best.0 + PI / n as f64);
        let gr = 0.5 * (5f64.sqrt() - 1.0);
        let mut x1 = b - gr * (b - a);
        let mut x2 = a + gr * (b - a);
        let (mut f1, mut f2) = (eval(x1), eval(x2));
        for _ in 0..60 {
            if f1 > f2 {
                b = x2;
                x2 = x1;
                f2 = f1;
                x1 = b - gr * (b - a);
                f1 = eval(x1);
            } else {
                a = x1;
                x1 = x2;
                f1 = f2;
                x2 = a + gr * (b - a);
                f2 = eval(x2);
            }
        }
        best.1.max(f1).max(f2)
    }

    /// Max over the midpoint of the log-likelihood at fixed contrast and phase (concave, 1-D).
    fn best_midpoint(&self, c: f64, phi0: f64) -> f64 {
        let half = 0.5 * c;
        let cosines: Vec<f64> = self.x.iter().map(|x| x[1] * (2.0 * phi0).cos() + x[2] * (2.0 * phi0).sin()).collect();
        let prob = |m: f64, i: usize| m - half * cosines[i];
        let deriv = |m: f64| -> f64 {
            (0..self.x.len())
                .map(|i| {
                    let p = prob(m, i);
                    (if self.odd[i] > 0.0 { self.odd[i] / p } else { 0.0 })
                        - (if self.even[i] > 0.0 { self.even[i] / (1.0 - p) } else { 0.0 })
                })
                .sum()
        };
        let value = |m: f64| -> f64 {
            let b = [m, -half * (2.0 * phi0).cos(), -half * (2.0 * phi0).sin()];
            self.value(&b)
        };
        let (mut lo, mut hi) = (half, 1.0 - half);
        if hi <= lo {
            return value(0.5);
        }
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            let d = deriv(mid);
            if d.is_nan() {
                break;
            }
            if d > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let v = value(0.5 * (lo + hi));
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    }

    fn profile_phase(&self, phi0: f64) -> f64 {
        let cols = [[1.0, 0.0, 0.0], [0.0, -(2.0 * phi0).cos(), -(2.0 * phi0).sin()]];
        let lin = [(vec![0.0, 1.0], 0.0)];
        let aff = Affine { base: [0.0; 3], cols: &cols, lin: &lin };
        self.maximise(&aff, vec![0.5, 0.01]).map_or(f64::NEG_INFINITY, |r| r.1)
    }

    fn profile_midpoint(&self, m: f64) -> f64 {
        let cols = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let aff = Affine { base: [m, 0.0, 0.0], cols: &cols, lin: &[] };
        self.maximise(&aff, vec![0.0, 0.0]).map_or(f64::NEG_INFINITY, |r| r.1)
    }
}

/// Finds where a profile drops below `target` between `inside` (above target) and `edge`.
fn crossing(profile: impl Fn(f64) -> f64, inside: f64, edge: f64, target: f64) -> f64 {
    if profile(edge) >= target {
        return edge;
    }
    let (mut a, mut b) = (inside, edge);
    for _ in 0..50 {
        let m = 0.5 * (a + b);
        if profile(m) >= target {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

fn to_natural(b: &Vec3) -> (f64, f64, f64) {
    let r = (b[1] * b[1] + b[2] * b[2]).sqrt();
    let offset = if r > 0.0 { (0.5 * (-b[2]).atan2(-b[1])).rem_euclid(PI) } else { 0.0 };
    (2.0 * r, offset, b[0])
}

fn wrap_half_period(x: f64) -> f64 {
    (x + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2
}

fn is_degenerate(data: &ParityDataset) -> bool {
    let first = data.points[0];
    data.points.iter().all(|p| p.count_odd as u128 * first.shots as u128 == first.count_odd as u128 * p.shots as u128)
}

/// Maximum-likelihood fit with one-sigma intervals.
pub fn fit_parity_mle(data: &ParityDataset, opts: &FitOptions) -> Result<ParityFit, TomographyError> {
    data.validate()?;
    if data.points.iter().any(|p| p.shots == 0) {
        return Err(TomographyError::InvalidData("every point needs at least one shot".into()));
    }
    let distinct = data.distinct_phases();
    if distinct < 3 {
        return Err(TomographyError::InsufficientPhases(distinct));
    }
    let lk = Likelihood::new(data);
    let degenerate = is_degenerate(data);
    let b = if degenerate {
        [lk.odd.iter().sum::<f64>() / lk.total, 0.0, 0.0]
    } else {
        lk.full_fit().ok_or_else(|| TomographyError::InvalidData("likelihood maximisation failed".into()))?
    };
    let (contrast, phase_offset, p_mid) = to_natural(&b);
    let ll = lk.value(&b);

    let (contrast_interval, phase_interval, p_mid_interval) = match opts.intervals {
        IntervalMethod::ProfileLikelihood => {
            let target = ll - 0.5 / lk.total;
            let cmax = 1.0 - 1e-12;
            let pc = |c: f64| lk.profile_contrast(c, phase_offset);
            let ci = (crossing(pc, contrast, 0.0, target), crossing(pc, contrast, cmax, target));
            let pi = if degenerate || contrast == 0.0 {
                (0.0, PI)
            } else {
                let pp = |p: f64| lk.profile_phase(p);
                let lo = crossing(pp, phase_offset, phase_offset - FRAC_PI_2, target);
                let hi = crossing(pp, phase_offset, phase_offset + FRAC_PI_2, target);
                (lo, hi)
            };
            let pm = |m: f64| lk.profile_midpoint(m);
            let mi = (crossing(pm, p_mid, 1e-12, target), crossing(pm, p_mid, 1.0 - 1e-12, target));
            (ci, pi, mi)
        }
        IntervalMethod::Bootstrap { resamples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut samples = Vec::with_capacity(resamples);
            for _ in 0..resamples {
                let points: Vec<ParityPoint> = data
                    .points
                    .iter()
                    .map(|p| {
                        let q = p.count_odd as f64 / p.shots as f64;
                        ParityPoint { count_odd: Binomial::new(p.shots, q).expect("valid").sample(&mut rng), ..*p }
                    })
                    .collect();
                let l = Likelihood::new(&ParityDataset { points });
                if let Some(bb) = l.full_fit() {
                    let (c, o, m) = to_natural(&bb);
                    samples.push((c, wrap_half_period(o - phase_offset), m));
                }
            }
            let sd = |f: &dyn Fn(&(f64, f64, f64)) -> f64, centre: f64| {
                let n = samples.len().max(1) as f64;
                (samples.iter().map(|s| (f(s) - centre).powi(2)).sum::<f64>() / n).sqrt()
            };
            let sc = sd(&|s| s.0, contrast);
            let sp = sd(&|s| s.1, 0.0);
            let sm = sd(&|s| s.2, p_mid);
            ((contrast - sc, contrast + sc), (phase_offset - sp, phase_offset + sp), (p_mid - sm, p_mid + sm))
        }
    };

    Ok(ParityFit {
        contrast,
        phase_offset,
        p_mid,
        contrast_interval,
        phase_interval,
        p_mid_interval,
        log_likelihood: ll * lk.total,
        degenerate,
        method: opts.intervals,
    })
}

/// Expected Fisher information in the linear parametrisation for a design with `shots` per phase.
pub fn fisher_information(phases: &[f64], shots: u64, contrast: f64, offset: f64, p_mid: f64) -> Mat3 {
    let mut info = [[0.0; 3]; 3];
    for &phi in phases {
        let x = features(phi);
        let p = parity_model(phi, contrast, offset, p_mid);
        let w = shots as f64 / (p * (1.0 - p));
        for r in 0..3 {
            for c in 0..3 {
                info[r][c] += w * x[r] * x[c];
            }
        }
    }
    info
}

/// Cramér–Rao standard deviation of the contrast for a design.
pub fn contrast_sigma_fisher(phases: &[f64], shots: u64, contrast: f64, offset: f64, p_mid: f64) -> f64 {
    let info = fisher_information(phases, shots, contrast, offset, p_mid);
    let a: Vec<Vec<f64>> = info.iter().map(|r| r.to_vec()).collect();
    // ∂C/∂b for b₁ = −(C/2)cos 2φ₀, b₂ = −(C/2)sin 2φ₀
    let grad = [0.0, -2.0 * (2.0 * offset).cos(), -2.0 * (2.0 * offset).sin()];
    match cholesky_solve(&a, &grad) {
        Some(x) => dot(&grad, &x).sqrt(),
        None => f64::INFINITY,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tomography::{concentrated_phases, uniform_phases};

    fn exact(phases: &[f64], shots: u64, c: f64, o: f64, m: f64) -> ParityDataset {
        ParityDataset {
            points: phases
                .iter()
                .map(|&phase| ParityPoint {
                    phase,
                    shots,
                    count_odd: (parity_model(phase, c, o, m) * shots as f64).round() as u64,
                })
                .collect(),
        }
    }

    #[test]
    fn recovers_noiseless_fringe() {
        let d = exact(&uniform_phases(16), 1_000_000, 0.8, 0.3, 0.45);
        let f = fit_parity_mle(&d, &FitOptions::default()).unwrap();
        assert!((f.contrast - 0.8).abs() < 1e-5);
        assert!((f.phase_offset - 0.3).abs() < 1e-5);
        assert!((f.p_mid - 0.45).abs() < 1e-5);
        assert!(f.contrast_interval.0 < f.contrast && f.contrast < f.contrast_interval.1);
        assert!(f.phase_interval.0 < 0.3 && 0.3 < f.phase_interval.1);
        assert!(!f.degenerate);
    }

    #[test]
    fn perfect_fringe_hits_the_boundary() {
        let d = exact(&uniform_phases(12), 1_000_000_000, 1.0, 0.0, 0.5);
        let f = fit_parity_mle(&d, &FitOptions::default()).unwrap();
        assert!((f.contrast - 1.0).abs() < 1e-6, "{}", f.contrast);
        assert!((f.p_mid - 0.5).abs() < 1e-6);
        assert!(f.contrast_interval.1 <= 1.0);
    }

    #[test]
    fn degenerate_data_flagged() {
        let d = ParityDataset {
            points: uniform_phases(6).into_iter().map(|phase| ParityPoint { phase, shots: 100, count_odd: 50 }).collect(),
        };
        let f = fit_parity_mle(&d, &FitOptions::default()).unwrap();
        assert!(f.degenerate);
        assert_eq!(f.contrast, 0.0);
        assert_eq!(f.phase_interval, (0.0, PI));
        assert!(f.contrast_interval.1 > 0.05);
    }

    #[test]
    fn needs_three_phases() {
        let d = exact(&[0.0, PI, 1.0, 1.0 + PI], 100, 0.5, 0.0, 0.5);
        assert!(matches!(fit_parity_mle(&d, &FitOptions::default()), Err(TomographyError::InsufficientPhases(2))));
    }

    #[test]
    fn invariant_under_half_turn_shift() {
        let d = exact(&uniform_phases(10), 500, 0.9, 0.2, 0.5);
        let shifted = ParityDataset {
            points: d.points.iter().map(|p| ParityPoint { phase: (p.phase + PI).rem_euclid(2.0 * PI), ..*p }).collect(),
        };
        let a = fit_parity_mle(&d, &FitOptions::default()).unwrap();
        let b = fit_parity_mle(&shifted, &FitOptions::default()).unwrap();
        assert!((a.contrast - b.contrast).abs() < 1e-9, "{} {}", a.contrast, b.contrast);
        assert!((a.phase_offset - b.phase_offset).abs() < 1e-9);
    }

    #[test]
    fn bootstrap_is_seeded_and_comparable() {
        let d = exact(&concentrated_phases(12, 0.15, 0.0), 500, 0.95, 0.0, 0.5);
        let opts = FitOptions { intervals: IntervalMethod::Bootstrap { resamples: 200, seed: 9 } };
        let a = fit_parity_mle(&d, &opts).unwrap();
        let b = fit_parity_mle(&d, &opts).unwrap();
        assert_eq!(a, b);
        let p = fit_parity_mle(&d, &FitOptions::default()).unwrap();
        let ratio = a.contrast_sigma() / p.contrast_sigma();
        assert!(ratio > 0.5 && ratio < 2.0, "bootstrap/profile {ratio}");
    }

    #[test]
    fn fisher_matches_profile_width() {
        let ph = uniform_phases(20);
        let d = exact(&ph, 100_000, 0.9, 0.4, 0.5);
        let f = fit_parity_mle(&d, &FitOptions::default()).unwrap();
        let s = contrast_sigma_fisher(&ph, 100_000, 0.9, 0.4, 0.5);
        assert!((f.contrast_sigma() / s - 1.0).abs() < 0.05);
    }
}
