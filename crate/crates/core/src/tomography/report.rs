use std::fmt::Write as _;

use crate::dynamics::QubitDensity;

use super::{
    fit_parity_mle, invert_readout_spam, simulate_parity_scan, simulate_populations, FitOptions, ParityDataset,
    ParityFit, PopulationCounts, TomographyError,
};

/// Raw (SPAM-uncorrected) estimates and their one-sigma uncertainties.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct BellInputs {
    pub p00: f64,
    pub p11: f64,
    pub contrast: f64,
    pub phase_offset: f64,
    pub spam_per_qubit: f64,
    pub p00_sigma: f64,
    pub p11_sigma: f64,
    pub contrast_sigma: f64,
    pub spam_sigma: f64,
}

/// SPAM-corrected Bell-state preparation error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellReport {
    pub p00: f64,
    pub p11: f64,
    pub contrast: f64,
    pub phase_offset: f64,
    pub spam_per_qubit: f64,
    /// `1 − (C + P00 + P11)/2` after correction.
    pub bell_error: f64,
    pub uncertainty: f64,
    /// Error before the SPAM correction.
    pub raw_bell_error: f64,
    /// A corrected quantity fell outside `[0, 1]` and was clamped.
    pub clamped: bool,
}

fn corrected(p00: f64, p11: f64, contrast: f64, spam: f64) -> (f64, f64, f64) {
    let odd = 1.0 - p00 - p11;
    let pops = invert_readout_spam([p00, 0.5 * odd, 0.5 * odd, p11], spam);
    (pops[0], pops[3], contrast / (1.0 - 2.0 * spam).powi(2))
}

fn error_of(p00: f64, p11: f64, contrast: f64, spam: f64) -> f64 {
    let (a, b, c) = corrected(p00, p11, contrast, spam);
    1.0 - (c + a + b) / 2.0
}

pub fn bell_error_report(inp: &BellInputs) -> Result<BellReport, TomographyError> {
    for (name, v) in [("p00", inp.p00), ("p11", inp.p11), ("contrast", inp.contrast)] {
        if !(0.0..=1.0).contains(&v) {
            return Err(TomographyError::InvalidData(format!("{name} must lie in [0, 1]")));
        }
    }
    if inp.p00 + inp.p11 > 1.0 + 1e-12 {
        return Err(TomographyError::InvalidData("p00 + p11 exceeds 1".into()));
    }
    if !(0.0..0.5).contains(&inp.spam_per_qubit) {
        return Err(TomographyError::InvalidData("spam probability must lie in [0, 1/2)".into()));
    }
    let p = inp.spam_per_qubit;
    let (p00, p11, contrast) = corrected(inp.p00, inp.p11, inp.contrast, p);
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let clamped = [p00, p11, contrast].iter().any(|&x| clamp(x) != x);
    let (p00, p11, contrast) = (clamp(p00), clamp(p11), clamp(contrast));
    let bell_error = 1.0 - (contrast + p00 + p11) / 2.0;

    let d2 = (1.0 - 2.0 * p).powi(2);
    let h = 1e-7;
    let d_spam = if p >= h {
        (error_of(inp.p00, inp.p11, inp.contrast, p + h) - error_of(inp.p00, inp.p11, inp.contrast, p - h)) / (2.0 * h)
    } else {
        (error_of(inp.p00, inp.p11, inp.contrast, p + h) - error_of(inp.p00, inp.p11, inp.contrast, p)) / h
    };
    let var = (inp.p00_sigma / (2.0 * d2)).powi(2)
        + (inp.p11_sigma / (2.0 * d2)).powi(2)
        + (inp.contrast_sigma / (2.0 * d2)).powi(2)
        + (d_spam * inp.spam_sigma).powi(2);

    Ok(BellReport {
        p00,
        p11,
        contrast,
        phase_offset: inp.phase_offset,
        spam_per_qubit: p,
        bell_error,
        uncertainty: var.sqrt(),
        raw_bell_error: 1.0 - (inp.contrast + inp.p00 + inp.p11) / 2.0,
        clamped,
    })
}

const KEYS: [&str; 9] =
    ["p00", "p11", "contrast", "phase_offset", "spam_per_qubit", "bell_error", "uncertainty", "raw_bell_error", "clamped"];

impl BellReport {
    /// Flat `key=value` lines.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let vals = [
            self.p00,
            self.p11,
            self.contrast,
            self.phase_offset,
            self.spam_per_qubit,
            self.bell_error,
            self.uncertainty,
            self.raw_bell_error,
        ];
        for (k, v) in KEYS.iter().zip(vals) {
            writeln!(s, "{k}={v}").unwrap();
        }
        writeln!(s, "clamped={}", self.clamped).unwrap();
        s
    }

    pub fn from_text(text: &str) -> Result<Self, TomographyError> {
        let mut vals = [None::<f64>; 8];
        let mut clamped = None;
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: String| TomographyError::Parse { line: i + 1, msg };
            let (k, v) = line.split_once('=').ok_or_else(|| err("expected key=value".into()))?;
            let (k, v) = (k.trim(), v.trim());
            if k == "clamped" {
                clamped = Some(v.parse::<bool>().map_err(|e| err(e.to_string()))?);
                continue;
            }
            let idx = KEYS.iter().position(|&x| x == k).ok_or_else(|| err(format!("unknown key {k}")))?;
            vals[idx] = Some(v.parse::<f64>().map_err(|e| err(e.to_string()))?);
        }
        let get = |i: usize| vals[i].ok_or(TomographyError::Parse { line: 0, msg: format!("missing {}", KEYS[i]) });
        Ok(Self {
            p00: get(0)?,
            p11: get(1)?,
            contrast: get(2)?,
            phase_offset: get(3)?,
            spam_per_qubit: get(4)?,
            bell_error: get(5)?,
            uncertainty: get(6)?,
            raw_bell_error: get(7)?,
            clamped: clamped.ok_or(TomographyError::Parse { line: 0, msg: "missing clamped".into() })?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub phases: Vec<f64>,
    pub shots_per_phase: u64,
    pub population_shots: u64,
    pub spam_per_qubit: f64,
    pub spam_sigma: f64,
    pub seed: u64,
    pub fit: FitOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutput {
    pub scan: ParityDataset,
    pub populations: PopulationCounts,
    pub fit: ParityFit,
    pub report: BellReport,
}

/// Simulated measurement, fit and SPAM-corrected report for one qubit state.
pub fn run_bell_pipeline(rho: &QubitDensity<f64>, cfg: &PipelineConfig) -> Result<PipelineOutput, TomographyError> {
    let scan = simulate_parity_scan(rho, &cfg.phases, cfg.shots_per_phase, cfg.spam_per_qubit, cfg.seed.wrapping_mul(2))?;
    let populations =
        simulate_populations(rho, cfg.population_shots, cfg.spam_per_qubit, cfg.seed.wrapping_mul(2).wrapping_add(1))?;
    let fit = fit_parity_mle(&scan, &cfg.fit)?;
    let report = bell_error_report(&BellInputs {
        p00: populations.fraction(0),
        p11: populations.fraction(3),
        contrast: fit.contrast,
        phase_offset: fit.phase_offset,
        spam_per_qubit: cfg.spam_per_qubit,
        p00_sigma: populations.sigma(0),
        p11_sigma: populations.sigma(3),
        contrast_sigma: fit.contrast_sigma(),
        spam_sigma: cfg.spam_sigma,
    })?;
    Ok(PipelineOutput { scan, populations, fit, report })
}
