//! Pulse schedules: sideband pair plus an optional sign-modulated decoupling tone.
//!
//! Timing layout for a gate of nominal length `t_g` with sideband ramp `r`:
//! the `sin²` rise occupies `[0, r]`, the flat top `[r, t_g]` and the fall
//! `[t_g, t_g + r]`. A `sin²` edge is a rectangle convolved with a half-sine
//! kernel, so this envelope has the same loop-closure zeros as a square pulse
//! of length `t_g`; the schedule lasts `t_g + r`.
//!
//! Decoupling sign flips dip the tone amplitude to zero over `flip_ramp_time`
//! (half before the switch, half after) and change the phase by π at the zero.
//! The tone also ramps in and out over half a flip ramp so every Walsh piece
//! has the same shape.

use std::fmt::Write as _;

use crate::scalar::Real;
use crate::walsh::make_walsh;

use super::envelope::{Drift, Envelope, Segment, Shape};
use super::params::{DecouplingMode, GateParams, ModeParams};
use super::ScheduleError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ToneRole {
    RedSideband,
    BlueSideband,
    Decoupling,
    Dummy,
}

impl ToneRole {
    pub fn name(self) -> &'static str {
        match self {
            Self::RedSideband => "red_sideband",
            Self::BlueSideband => "blue_sideband",
            Self::Decoupling => "decoupling",
            Self::Dummy => "dummy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "red_sideband" => Some(Self::RedSideband),
            "blue_sideband" => Some(Self::BlueSideband),
            "decoupling" => Some(Self::Decoupling),
            "dummy" => Some(Self::Dummy),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tone<T> {
    pub role: ToneRole,
    /// Angular frequency; measured from the qubit frequency when `qubit_freq` is zero.
    pub frequency: T,
    pub envelope: Envelope<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSchedule<T> {
    pub tones: Vec<Tone<T>>,
    pub total_duration: T,
}

impl<T: Real> PulseSchedule<T> {
    pub fn tone(&self, role: ToneRole) -> Option<&Tone<T>> {
        self.tones.iter().find(|t| t.role == role)
    }

    /// Union of all envelope breakpoints, plus the schedule ends.
    pub fn breakpoints(&self) -> Vec<T> {
        let mut all: Vec<T> = vec![T::zero(), self.total_duration];
        for tone in &self.tones {
            all.extend(tone.envelope.breakpoints());
        }
        all.sort_by(|a, b| a.partial_cmp(b).expect("finite breakpoints"));
        let tol = self.total_duration * T::epsilon() * T::lit(64.0);
        let mut out: Vec<T> = Vec::with_capacity(all.len());
        for t in all {
            if out.last().map_or(true, |&l| t - l > tol) {
                out.push(t);
            }
        }
        out
    }

    /// Times at which the decoupling phase changes, i.e. the Walsh switches.
    pub fn decoupling_flip_times(&self) -> Vec<T> {
        let Some(tone) = self.tone(ToneRole::Decoupling) else { return Vec::new() };
        tone.envelope
            .segments
            .windows(2)
            .filter(|w| w[0].phase != w[1].phase)
            .map(|w| w[0].end)
            .collect()
    }

    /// Envelope sanity: non-negative, continuous across segment joints (except across
    /// a deliberate phase jump), zero at both ends when the first/last segments are ramps.
    pub fn check_envelopes(&self) -> Result<(), String> {
        for (i, tone) in self.tones.iter().enumerate() {
            let segs = &tone.envelope.segments;
            let scale = segs.iter().map(|s| s.peak.abs()).fold(T::zero(), T::max).max(T::min_positive_value());
            let tol = scale * T::epsilon().sqrt();
            for s in segs {
                if s.peak < T::zero() || s.end < s.start {
                    return Err(format!("tone {i}: malformed segment"));
                }
                for t in [s.start, s.end] {
                    if s.amplitude(t) < -tol {
                        return Err(format!("tone {i}: negative amplitude"));
                    }
                }
            }
            for w in segs.windows(2) {
                if (w[0].end - w[1].start).abs() > tol / scale * self.total_duration {
                    return Err(format!("tone {i}: gap between segments"));
                }
                if w[0].phase == w[1].phase && (w[0].amplitude(w[0].end) - w[1].amplitude(w[1].start)).abs() > tol {
                    return Err(format!("tone {i}: discontinuous amplitude at {:e}", w[0].end.as_f64()));
                }
            }
            if let Some(first) = segs.first() {
                if first.shape == Shape::Sin2Rise && first.amplitude(first.start).abs() > tol {
                    return Err(format!("tone {i}: nonzero start"));
                }
            }
            if let Some(last) = segs.last() {
                if last.shape == Shape::Sin2Fall && last.amplitude(last.end).abs() > tol {
                    return Err(format!("tone {i}: nonzero end"));
                }
            }
        }
        Ok(())
    }

    /// Line-based text export: `#` header lines declare the duration and tones,
    /// then one row per envelope segment.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# msgate schedule v1\n");
        let _ = writeln!(s, "# total_duration={:e}", self.total_duration.as_f64());
        for (i, tone) in self.tones.iter().enumerate() {
            let _ = writeln!(s, "# tone={},{},{:e}", i, tone.role.name(), tone.frequency.as_f64());
        }
        s.push_str("tone_id,t_start,t_end,segment_kind,amplitude_params,phase\n");
        for (i, tone) in self.tones.iter().enumerate() {
            for seg in &tone.envelope.segments {
                let _ = writeln!(
                    s,
                    "{},{:e},{:e},{},peak={:e};a1={:e};a2={:e};t_ref={:e},{:e}",
                    i,
                    seg.start.as_f64(),
                    seg.end.as_f64(),
                    seg.shape.name(),
                    seg.peak.as_f64(),
                    seg.drift.a1.as_f64(),
                    seg.drift.a2.as_f64(),
                    seg.drift.t_ref.as_f64(),
                    seg.phase.as_f64(),
                );
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ScheduleError> {
        let err = |line: usize, msg: &str| ScheduleError::Parse { line, msg: msg.to_string() };
        let num = |line: usize, v: &str| -> Result<T, ScheduleError> {
            v.trim().parse::<f64>().map(T::lit).map_err(|_| err(line, &format!("bad number `{v}`")))
        };
        let mut total = None;
        let mut tones: Vec<Tone<T>> = Vec::new();
        let mut saw_header = false;
        for (idx, raw) in text.lines().enumerate() {
            let line_no = idx + 1;
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let rest = rest.trim();
                if let Some(v) = rest.strip_prefix("total_duration=") {
                    total = Some(num(line_no, v)?);
                } else if let Some(v) = rest.strip_prefix("tone=") {
                    let parts: Vec<&str> = v.split(',').collect();
                    if parts.len() != 3 {
                        return Err(err(line_no, "tone declaration needs id,role,frequency"));
                    }
                    let id: usize = parts[0].trim().parse().map_err(|_| err(line_no, "bad tone id"))?;
                    if id != tones.len() {
                        return Err(err(line_no, "tone ids must be consecutive from 0"));
                    }
                    let role = ToneRole::parse(parts[1].trim()).ok_or_else(|| err(line_no, "unknown tone role"))?;
                    tones.push(Tone { role, frequency: num(line_no, parts[2])?, envelope: Envelope::new(Vec::new()) });
                }
                continue;
            }
            if !saw_header {
                if line != "tone_id,t_start,t_end,segment_kind,amplitude_params,phase" {
                    return Err(err(line_no, "missing column header"));
                }
                saw_header = true;
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 6 {
                return Err(err(line_no, "expected 6 columns"));
            }
            let id: usize = cols[0].trim().parse().map_err(|_| err(line_no, "bad tone id"))?;
            let shape = Shape::parse(cols[3].trim()).ok_or_else(|| err(line_no, "unknown segment kind"))?;
            let (mut peak, mut a1, mut a2, mut t_ref) = (None, None, None, None);
            for kv in cols[4].split(';') {
                let (k, v) = kv.split_once('=').ok_or_else(|| err(line_no, "amplitude params need key=value"))?;
                let v = num(line_no, v)?;
                match k.trim() {
                    "peak" => peak = Some(v),
                    "a1" => a1 = Some(v),
                    "a2" => a2 = Some(v),
                    "t_ref" => t_ref = Some(v),
                    other => return Err(err(line_no, &format!("unknown amplitude param `{other}`"))),
                }
            }
            let seg = Segment {
                start: num(line_no, cols[1])?,
                end: num(line_no, cols[2])?,
                shape,
                peak: peak.ok_or_else(|| err(line_no, "missing peak"))?,
                drift: Drift {
                    a1: a1.unwrap_or(T::zero()),
                    a2: a2.unwrap_or(T::zero()),
                    t_ref: t_ref.unwrap_or(T::one()),
                },
                phase: num(line_no, cols[5])?,
            };
            tones
                .get_mut(id)
                .ok_or_else(|| err(line_no, "segment references undeclared tone"))?
                .envelope
                .segments
                .push(seg);
        }
        Ok(Self { tones, total_duration: total.ok_or_else(|| err(0, "missing total_duration"))? })
    }
}

/// Compiles gate parameters into a concrete schedule.
pub fn build_gate_schedule<T: Real>(
    params: &GateParams<T>,
    mode: &ModeParams<T>,
    dd_enabled: bool,
) -> Result<PulseSchedule<T>, ScheduleError> {
    params.validate()?;
    mode.validate()?;
    let rel = (mode.mode_freq - params.mode_freq).abs() / params.mode_freq;
    if rel > T::lit(1e-12).max(T::epsilon() * T::lit(16.0)) {
        return Err(ScheduleError::InvalidParameter("mode frequency differs between gate and mode parameters".into()));
    }

    let total = params.total_duration();
    let ramp = params.ramp_time;
    let peak = sideband_peak(params)?;
    let sideband = Envelope::new(sideband_segments(params.duration, ramp, peak));

    let offset = params.mode_freq + params.detuning + params.detuning_error;
    let mut tones = vec![
        Tone { role: ToneRole::RedSideband, frequency: params.qubit_freq - offset, envelope: sideband.clone() },
        Tone { role: ToneRole::BlueSideband, frequency: params.qubit_freq + offset, envelope: sideband },
    ];

    if dd_enabled && params.dd_active() {
        let segs = decoupling_segments(params, total)?;
        tones.push(Tone { role: ToneRole::Decoupling, frequency: params.qubit_freq, envelope: Envelope::new(segs) });
    }

    Ok(PulseSchedule { tones, total_duration: total })
}

fn sideband_segments<T: Real>(duration: T, ramp: T, peak: T) -> Vec<Segment<T>> {
    let zero = T::zero();
    if ramp > zero {
        vec![
            Segment::flat(zero, ramp, peak, zero).with_shape(Shape::Sin2Rise),
            Segment::flat(ramp, duration, peak, zero),
            Segment::flat(duration, duration + ramp, peak, zero).with_shape(Shape::Sin2Fall),
        ]
    } else {
        vec![Segment::flat(zero, duration, peak, zero)]
    }
}

/// Sideband peak rate: `Ω_g`, rescaled for ramped envelopes so the loop phase equals the square-pulse value.
fn sideband_peak<T: Real>(params: &GateParams<T>) -> Result<T, ScheduleError> {
    let g = params.gate_rabi;
    if !(params.ramp_time > T::zero()) || !params.compensate_ramps {
        return Ok(g);
    }
    let d = params.detuning;
    let x = d * params.duration;
    let target = (g / (T::lit(2.0) * d)).powi(2) * (x - x.sin());
    let ramped = Envelope::new(sideband_segments(params.duration, params.ramp_time, g)).loop_phase(d);
    if !(ramped > T::zero()) || !(target > T::zero()) {
        return Ok(g);
    }
    Ok(g * (target / ramped).sqrt())
}

fn decoupling_segments<T: Real>(params: &GateParams<T>, total: T) -> Result<Vec<Segment<T>>, ScheduleError> {
    let zero = T::zero();
    let half = params.flip_ramp_time / T::lit(2.0);
    let drift = Drift { a1: params.dd_drift[0], a2: params.dd_drift[1], t_ref: total };
    let peak = params.dd_rabi;
    let pi = T::PI();

    // each piece: (start, end, phase, ramp_in, ramp_out)
    let pieces: Vec<(T, T, T, bool, bool)> = match params.dd_mode {
        DecouplingMode::Off => return Ok(Vec::new()),
        DecouplingMode::Walsh => {
            let w = make_walsh(params.walsh_order, total)?;
            for p in w.pieces() {
                if p.1 - p.0 < params.flip_ramp_time {
                    return Err(ScheduleError::FlipWindowsOverlap {
                        segment: (p.1 - p.0).as_f64(),
                        flip: params.flip_ramp_time.as_f64(),
                    });
                }
            }
            let ramp = params.ramp_time;
            let tol = total * T::epsilon() * T::lit(64.0);
            for &s in w.switch_times() {
                if s - half < ramp - tol || s + half > total - ramp + tol {
                    return Err(ScheduleError::FlipDuringRamp { at: s.as_f64() });
                }
            }
            // dips only around interior switches, so the area lost to each flip is shared by opposite signs
            w.pieces()
                .into_iter()
                .map(|(a, b, sign)| (a, b, if sign > 0 { zero } else { pi }, a > zero, b < total))
                .collect()
        }
        DecouplingMode::PiPulse => {
            if params.loops % 2 != 0 {
                return Err(ScheduleError::PiPulseNeedsEvenLoops(params.loops));
            }
            let tau = pi / peak;
            let mid = total / T::lit(2.0);
            if tau + params.flip_ramp_time >= total {
                return Err(ScheduleError::InvalidParameter("pi pulse longer than the gate".into()));
            }
            let (a, b) = (mid - tau / T::lit(2.0), mid + tau / T::lit(2.0));
            vec![(zero, a, zero, true, false), (a, b, T::FRAC_PI_2(), false, false), (b, total, zero, false, true)]
        }
        DecouplingMode::Calibrated => vec![(zero, total, zero, true, true)],
    };

    let mut peak = peak;
    if params.dd_mode == DecouplingMode::Calibrated {
        let effective = total - half;
        let turns = (peak * effective / T::TAU()).round().max(T::one());
        peak = turns * T::TAU() / effective;
    }

    let mut segs = Vec::new();
    for (a, b, phase, ramp_in, ramp_out) in pieces {
        let mut flat_start = a;
        let mut flat_end = b;
        if half > zero && ramp_in {
            segs.push(Segment::flat(a, a + half, peak, phase).with_shape(Shape::Sin2Rise).with_drift(drift));
            flat_start = a + half;
        }
        if half > zero && ramp_out {
            flat_end = b - half;
        }
        if flat_end > flat_start {
            segs.push(Segment::flat(flat_start, flat_end, peak, phase).with_drift(drift));
        }
        if half > zero && ramp_out {
            segs.push(Segment::flat(b - half, b, peak, phase).with_shape(Shape::Sin2Fall).with_drift(drift));
        }
    }
    Ok(segs)
}
