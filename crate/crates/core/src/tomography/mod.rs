//! Bell-state characterisation: parity scans, binomial MLE fringe fits and
//! SPAM-corrected error reports.

mod fit;
mod report;
mod scan;

pub use fit::{
    contrast_sigma_fisher, fisher_information, fit_parity_mle, parity_model, FitOptions, IntervalMethod, ParityFit,
};
pub use report::{bell_error_report, run_bell_pipeline, BellInputs, BellReport, PipelineConfig, PipelineOutput};
pub use scan::{
    analysis_rotation, concentrated_phases, parity_probability, simulate_parity_scan, simulate_populations,
    uniform_phases, PopulationCounts,
};

use std::io::{Read, Write};

use thiserror::Error;

use crate::dynamics::{QuantumState, QubitDensity};

#[derive(Debug, Error)]
pub enum TomographyError {
    #[error("invalid data: {0}")]
    InvalidData(String),
    #[error("need at least 3 distinct phases modulo π, got {0}")]
    InsufficientPhases(usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("report line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One analysis phase of a parity scan.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParityPoint {
    /// Analysis pulse phase in `[0, 2π)`.
    pub phase: f64,
    pub shots: u64,
    /// Outcomes `01` or `10`.
    pub count_odd: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParityDataset {
    pub points: Vec<ParityPoint>,
}

#[derive(serde::Serialize, serde::Deserialize)]
struct CsvRow {
    phi_rad: f64,
    shots: u64,
    count_odd: u64,
}

impl ParityDataset {
    pub fn validate(&self) -> Result<(), TomographyError> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.phase >= 0.0 && p.phase < std::f64::consts::TAU) {
                return Err(TomographyError::InvalidData(format!("point {i}: phase {} outside [0, 2π)", p.phase)));
            }
            if p.count_odd > p.shots {
                return Err(TomographyError::InvalidData(format!("point {i}: count_odd exceeds shots")));
            }
        }
        Ok(())
    }

    pub fn total_shots(&self) -> u64 {
        self.points.iter().map(|p| p.shots).sum()
    }

    /// Number of distinct phases modulo π (the fringe period).
    pub fn distinct_phases(&self) -> usize {
        let mut v: Vec<f64> = self.points.iter().map(|p| p.phase.rem_euclid(std::f64::consts::PI)).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        if v.len() > 1 && (v[0] + std::f64::consts::PI - v[v.len() - 1]).abs() < 1e-12 {
            v.pop();
        }
        v.len()
    }

    /// Writes `phi_rad,shots,count_odd` with a header line.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), TomographyError> {
        let mut wr = csv::Writer::from_writer(w);
        for p in &self.points {
            wr.serialize(CsvRow { phi_rad: p.phase, shots: p.shots, count_odd: p.count_odd })?;
        }
        wr.flush().map_err(csv::Error::from)?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, TomographyError> {
        let mut rd = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r);
        let headers = rd.headers()?.clone();
        if headers.iter().collect::<Vec<_>>() != ["phi_rad", "shots", "count_odd"] {
            return Err(TomographyError::InvalidData("expected header phi_rad,shots,count_odd".into()));
        }
        let mut points = Vec::new();
        for row in rd.deserialize() {
            let row: CsvRow = row?;
            points.push(ParityPoint { phase: row.phi_rad, shots: row.shots, count_odd: row.count_odd });
        }
        let ds = Self { points };
        ds.validate()?;
        Ok(ds)
    }
}

/// Bell-state fidelity of a reduced two-qubit state, maximised over the relative phase.
pub fn bell_fidelity_density(rho: &QubitDensity<f64>) -> f64 {
    0.5 * (rho[0][0].re + rho[3][3].re) + rho[0][3].norm()
}

/// `max_γ ⟨Bell(γ)|ρ_q|Bell(γ)⟩` with the motion traced out.
pub fn bell_fidelity_exact(state: &QuantumState<f64>) -> f64 {
    bell_fidelity_density(&state.qubit_density())
}

/// Relative phase `γ` of the `|00⟩⟨11|` coherence, `ρ₁₁,₀₀ = |ρ| e^{iγ}`.
pub fn bell_phase(rho: &QubitDensity<f64>) -> f64 {
    rho[3][0].arg()
}

/// Fringe offset `φ₀` of the parity scan of `ρ`, in `[0, π)`.
pub fn expected_fringe_offset(rho: &QubitDensity<f64>) -> f64 {
    (0.5 * (bell_phase(rho) + std::f64::consts::PI)).rem_euclid(std::f64::consts::PI)
}

/// Forward symmetric readout flips with probability `p` per qubit on `[P00, P01, P10, P11]`.
pub fn apply_readout_spam(probs: [f64; 4], p: f64) -> [f64; 4] {
    let m = [[1.0 - p, p], [p, 1.0 - p]];
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, &pj) in probs.iter().enumerate() {
            *o += m[i >> 1][j >> 1] * m[i & 1][j & 1] * pj;
        }
    }
    out
}

/// Inverse of [`apply_readout_spam`]; requires `p ≠ 1/2`.
pub fn invert_readout_spam(probs: [f64; 4], p: f64) -> [f64; 4] {
    let d = 1.0 - 2.0 * p;
    let m = [[(1.0 - p) / d, -p / d], [-p / d, (1.0 - p) / d]];
    let mut out = [0.0; 4];
    for (i, o) in out.iter_mut().enumerate() {
        for (j, &pj) in probs.iter().enumerate() {
            *o += m[i >> 1][j >> 1] * m[i & 1][j & 1] * pj;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    #[test]
    fn fidelity_examples() {
        let ground = QuantumState::<f64>::ground(4);
        assert!((bell_fidelity_exact(&ground) - 0.5).abs() < 1e-15);
        let mut mixed = [[Complex64::new(0.0, 0.0); 4]; 4];
        for (i, row) in mixed.iter_mut().enumerate() {
            row[i] = Complex64::new(0.25, 0.0);
        }
        assert!((bell_fidelity_density(&mixed) - 0.25).abs() < 1e-15);
        let bell = QuantumState::<f64>::bell(1.3, 3);
        assert!((bell_fidelity_exact(&bell) - 1.0).abs() < 1e-15);
        assert!((bell_phase(&bell.qubit_density()) - 1.3).abs() < 1e-15);
    }

    #[test]
    fn spam_round_trip() {
        let p = [0.4, 0.1, 0.2, 0.3];
        let back = invert_readout_spam(apply_readout_spam(p, 0.0012), 0.0012);
        for i in 0..4 {
            assert!((back[i] - p[i]).abs() < 1e-15);
        }
        let half = apply_readout_spam([1.0, 0.0, 0.0, 0.0], 0.5);
        assert!(half.iter().all(|&x| (x - 0.25).abs() < 1e-15));
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let ds = ParityDataset {
            points: vec![
                ParityPoint { phase: 0.0, shots: 100, count_odd: 3 },
                ParityPoint { phase: 1.5707963267948966, shots: 100, count_odd: 97 },
            ],
        };
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        assert!(String::from_utf8_lossy(&buf).starts_with("phi_rad,shots,count_odd\n"));
        assert_eq!(ParityDataset::read_csv(buf.as_slice()).unwrap(), ds);
        let bad = "phi_rad,shots,count_odd\n0.1,10,11\n";
        assert!(ParityDataset::read_csv(bad.as_bytes()).is_err());
        let bad_phase = "phi_rad,shots,count_odd\n7.0,10,1\n";
        assert!(ParityDataset::read_csv(bad_phase.as_bytes()).is_err());
        let bad_header = "phi,shots,count_odd\n0.1,10,1\n";
        assert!(ParityDataset::read_csv(bad_header.as_bytes()).is_err());
    }

    #[test]
    fn distinct_phases_modulo_pi() {
        let pts = |ph: &[f64]| ParityDataset {
            points: ph.iter().map(|&phase| ParityPoint { phase, shots: 1, count_odd: 0 }).collect(),
        };
        assert_eq!(pts(&[0.0, std::f64::consts::PI, 1.0]).distinct_phases(), 2);
        assert_eq!(pts(&[0.1, 0.2, 0.3]).distinct_phases(), 3);
    }
}
