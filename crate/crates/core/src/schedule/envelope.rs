//! Piecewise amplitude/phase envelopes.

use num_complex::Complex;

use crate::scalar::Real;

use super::ScheduleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Shape {
    Flat,
    /// `sin²(π (t - start) / 2 (end - start))`, rising from 0 to 1.
    Sin2Rise,
    /// `cos²(π (t - start) / 2 (end - start))`, falling from 1 to 0.
    Sin2Fall,
}

impl Shape {
    pub fn name(self) -> &'static str {
        match self {
            Self::Flat => "flat",
            Self::Sin2Rise => "sin2_rise",
            Self::Sin2Fall => "sin2_fall",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "flat" => Some(Self::Flat),
            "sin2_rise" => Some(Self::Sin2Rise),
            "sin2_fall" => Some(Self::Sin2Fall),
            _ => None,
        }
    }
}

/// Multiplicative drift `1 + a1·u + a2·u²` with `u = t / t_ref`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drift<T> {
    pub a1: T,
    pub a2: T,
    pub t_ref: T,
}

impl<T: Real> Drift<T> {
    pub fn none() -> Self {
        Self { a1: T::zero(), a2: T::zero(), t_ref: T::one() }
    }

    #[inline]
    pub fn factor(&self, t: T) -> T {
        let u = t / self.t_ref;
        T::one() + self.a1 * u + self.a2 * u * u
    }
}

/// One piece of a tone: shape × peak × drift on `[start, end]` at a fixed phase.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T> {
    pub start: T,
    pub end: T,
    pub shape: Shape,
    pub peak: T,
    pub drift: Drift<T>,
    pub phase: T,
}

impl<T: Real> Segment<T> {
    pub fn flat(start: T, end: T, peak: T, phase: T) -> Self {
        Self { start, end, shape: Shape::Flat, peak, drift: Drift::none(), phase }
    }

    pub fn with_shape(mut self, shape: Shape) -> Self {
        self.shape = shape;
        self
    }

    pub fn with_drift(mut self, drift: Drift<T>) -> Self {
        self.drift = drift;
        self
    }

    pub fn duration(&self) -> T {
        self.end - self.start
    }

    /// Amplitude at `t`, assumed to lie within the segment.
    #[inline]
    pub fn amplitude(&self, t: T) -> T {
        let shape = match self.shape {
            Shape::Flat => T::one(),
            Shape::Sin2Rise | Shape::Sin2Fall => {
                let len = self.end - self.start;
                if len <= T::zero() {
                    return T::zero();
                }
                let x = (T::FRAC_PI_2() * (t - self.start) / len).sin();
                match self.shape {
                    Shape::Sin2Rise => x * x,
                    _ => T::one() - x * x,
                }
            }
        };
        self.peak * shape * self.drift.factor(t)
    }

    /// `∫ amplitude(t) · e^{i(ω t + phase)} dt` over the segment, by Gauss–Legendre quadrature.
    pub fn weighted_integral(&self, omega: T) -> Complex<T> {
        let len = self.end - self.start;
        if len <= T::zero() {
            return Complex::new(T::zero(), T::zero());
        }
        // split so that each panel spans at most ~1 rad of the carrier
        let panels = ((omega.abs() * len).as_f64().ceil() as usize).clamp(1, 1 << 20);
        let h = len / T::from_usize_lossy(panels);
        let mut acc = Complex::new(T::zero(), T::zero());
        for p in 0..panels {
            let a = self.start + h * T::from_usize_lossy(p);
            for (x, w) in gauss_legendre::<T>() {
                let t = a + h * (x + T::one()) / T::lit(2.0);
                let amp = self.amplitude(t);
                acc = acc + Complex::from_polar(amp * w * h / T::lit(2.0), omega * t + self.phase);
            }
        }
        acc
    }
}

/// 16-point Gauss–Legendre nodes and weights on `[-1, 1]`.
pub(crate) fn gauss_legendre<T: Real>() -> impl Iterator<Item = (T, T)> {
    const NODES: [(f64, f64); 8] = [
        (0.095_012_509_837_637_44, 0.189_450_610_455_068_5),
        (0.281_603_550_779_258_9, 0.182_603_415_044_923_6),
        (0.458_016_777_657_227_4, 0.169_156_519_395_002_5),
        (0.617_876_244_402_643_7, 0.149_595_988_816_576_7),
        (0.755_404_408_355_003_0, 0.124_628_971_255_533_9),
        (0.865_631_202_387_831_8, 0.095_158_511_682_492_78),
        (0.944_575_023_073_232_6, 0.062_253_523_938_647_89),
        (0.989_400_934_991_649_9, 0.027_152_459_411_754_09),
    ];
    NODES
        .into_iter()
        .flat_map(|(x, w)| [(T::lit(-x), T::lit(w)), (T::lit(x), T::lit(w))])
}

/// Contiguous sequence of segments.
#[derive(Debug, Clone, PartialEq)]
pub struct Envelope<T> {
    pub segments: Vec<Segment<T>>,
}

impl<T: Real> Envelope<T> {
    pub fn new(segments: Vec<Segment<T>>) -> Self {
        Self { segments }
    }

    pub fn start(&self) -> T {
        self.segments.first().map_or(T::zero(), |s| s.start)
    }

    pub fn end(&self) -> T {
        self.segments.last().map_or(T::zero(), |s| s.end)
    }

    fn locate(&self, t: T) -> Option<&Segment<T>> {
        if self.segments.is_empty() || t < self.start() || t > self.end() {
            return None;
        }
        let idx = self.segments.partition_point(|s| s.end < t);
        self.segments.get(idx.min(self.segments.len() - 1))
    }

    /// Amplitude at `t`; zero outside the envelope.
    pub fn amplitude(&self, t: T) -> T {
        self.locate(t).map_or(T::zero(), |s| s.amplitude(t))
    }

    /// Phase at `t`; zero outside the envelope.
    pub fn phase(&self, t: T) -> T {
        self.locate(t).map_or(T::zero(), |s| s.phase)
    }

    /// Complex drive `amplitude · e^{i phase}` at `t`.
    pub fn complex_amplitude(&self, t: T) -> Complex<T> {
        match self.locate(t) {
            Some(s) => Complex::from_polar(s.amplitude(t), s.phase),
            None => Complex::new(T::zero(), T::zero()),
        }
    }

    /// Segment boundaries, ascending and deduplicated.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut out: Vec<T> = Vec::with_capacity(self.segments.len() + 1);
        for s in &self.segments {
            for t in [s.start, s.end] {
                if out.last().map_or(true, |&l| t > l) {
                    out.push(t);
                }
            }
        }
        out
    }

    /// `∫ amplitude(t) dt`.
    pub fn area(&self) -> T {
        self.displacement_integral(T::zero()).re
    }

    /// `∫ amplitude(t) cos(phase(t)) dt`: signed area projected on the x axis.
    pub fn signed_area(&self) -> T {
        self.segments.iter().map(|s| s.weighted_integral(T::zero()).re).fold(T::zero(), |a, b| a + b)
    }

    /// Spin-dependent loop phase `Φ = ¼ ∫∫_{t₂<t₁} A(t₁)A(t₂) sin δ(t₁ - t₂)` accumulated by
    /// a spin-motion coupling with this envelope at detuning `detuning`.
    ///
    /// For a square pulse of height `Ω` and length `t` this is `(Ω/2δ)² (δt - sin δt)`.
    pub fn loop_phase(&self, detuning: T) -> T {
        // cells small against the loop period; within-cell pairs via nested quadrature
        let mut total = T::zero();
        let mut g = Complex::new(T::zero(), T::zero());
        let nodes: Vec<(T, T)> = gauss_legendre::<T>().collect();
        for seg in &self.segments {
            let len = seg.duration();
            if len <= T::zero() {
                continue;
            }
            let cells = ((detuning.abs() * len).as_f64() * 4.0).ceil().max(1.0) as usize;
            let h = len / T::from_usize_lossy(cells);
            for c in 0..cells {
                let a = seg.start + h * T::from_usize_lossy(c);
                let mut cell_int = Complex::new(T::zero(), T::zero());
                let mut self_term = T::zero();
                for &(x, w) in &nodes {
                    let t1 = a + h * (x + T::one()) / T::lit(2.0);
                    let f1 = seg.amplitude(t1);
                    let e1 = Complex::from_polar(f1, detuning * t1);
                    let w1 = w * h / T::lit(2.0);
                    cell_int = cell_int + e1 * w1;
                    // inner integral over [a, t1]
                    let hin = t1 - a;
                    let mut inner = T::zero();
                    for &(y, v) in &nodes {
                        let t2 = a + hin * (y + T::one()) / T::lit(2.0);
                        inner = inner + v * hin / T::lit(2.0) * seg.amplitude(t2) * (detuning * (t1 - t2)).sin();
                    }
                    self_term = self_term + w1 * f1 * inner;
                }
                // cross term with everything before this cell
                total = total + (cell_int * g.conj()).im + self_term;
                g = g + cell_int;
            }
        }
        total / T::lit(4.0)
    }

    /// `∫ A(t) e^{iδt} dt`, proportional to the final motional displacement.
    pub fn displacement_integral(&self, detuning: T) -> Complex<T> {
        self.segments
            .iter()
            .map(|s| {
                let mut seg = *s;
                seg.phase = T::zero();
                seg.weighted_integral(detuning)
            })
            .fold(Complex::new(T::zero(), T::zero()), |a, b| a + b)
    }
}

/// Rectangular pulse with `sin²` rise and fall of length `rise` each, starting at 0.
///
/// The envelope is `rise + flat + rise` long with area `peak · (flat + rise)`.
pub fn sin2_envelope<T: Real>(rise: T, flat: T, peak: T) -> Result<Envelope<T>, ScheduleError> {
    if !(rise >= T::zero()) || !(flat >= T::zero()) || !(peak >= T::zero()) {
        return Err(ScheduleError::InvalidParameter("envelope durations and peak must be non-negative".into()));
    }
    let mut segs = Vec::with_capacity(3);
    let zero = T::zero();
    if rise > zero {
        segs.push(Segment::flat(zero, rise, peak, zero).with_shape(Shape::Sin2Rise));
    }
    if flat > zero || rise == zero {
        segs.push(Segment::flat(rise, rise + flat, peak, zero));
    }
    if rise > zero {
        segs.push(Segment::flat(rise + flat, rise + flat + rise, peak, zero).with_shape(Shape::Sin2Fall));
    }
    Ok(Envelope::new(segs))
}
