//! Parameter sweeps over gate configurations, evaluated on a bounded worker pool.
//!
//! Every `(value, variant)` point is an independent simulation. Finished rows
//! are appended to a checkpoint file as they complete so an interrupted sweep
//! can pick up where it stopped; the final result is sorted, so neither the
//! completion order nor the worker count shows up in the output.

mod single;

pub use single::{evaluate, run_single, simulate_gate, GateRun, SingleReport};

use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Observable, SweepSpec};

#[derive(Debug, Error)]
pub enum SweepError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("sweep CSV: {0}")]
    Format(String),
    #[error("invalid sweep: {0}")]
    Spec(String),
    #[error("worker pool: {0}")]
    Pool(String),
}

/// One evaluated `(axis value, variant)` point.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub axis_value: f64,
    pub variant: String,
    /// Observable value; NaN when the point failed.
    pub value: f64,
    pub n_max: usize,
    pub tol: f64,
    pub leakage_flag: bool,
    pub error: Option<String>,
}

fn same_bits(a: f64, b: f64) -> bool {
    a.to_bits() == b.to_bits() || (a.is_nan() && b.is_nan())
}

impl PartialEq for SweepRow {
    fn eq(&self, o: &Self) -> bool {
        same_bits(self.axis_value, o.axis_value)
            && self.variant == o.variant
            && same_bits(self.value, o.value)
            && self.n_max == o.n_max
            && same_bits(self.tol, o.tol)
            && self.leakage_flag == o.leakage_flag
            && self.error == o.error
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis: String,
    pub observable: Observable,
    pub rows: Vec<SweepRow>,
}

/// Seventeen significant digits: enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else {
        format!("{x:.16e}")
    }
}

impl SweepResult {
    fn header(&self) -> [String; 7] {
        [
            self.axis.clone(),
            "variant".into(),
            self.observable.name().into(),
            "n_max".into(),
            "tol".into(),
            "leakage_flag".into(),
            "error".into(),
        ]
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), SweepError> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(self.header())?;
        for r in &self.rows {
            wr.write_record(row_record(r))?;
        }
        wr.flush().map_err(|e| SweepError::Io { path: "<csv>".into(), source: e })?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self, SweepError> {
        let (axis, observable, rows, truncated) = read_rows(r)?;
        if truncated {
            return Err(SweepError::Format("malformed row".into()));
        }
        Ok(Self { axis, observable, rows })
    }

    /// Variant names in first-appearance order with their `(axis, value)` points.
    pub fn series(&self) -> Vec<(String, Vec<(f64, f64)>)> {
        let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
        for r in &self.rows {
            match out.iter_mut().find(|(n, _)| *n == r.variant) {
                Some((_, pts)) => pts.push((r.axis_value, r.value)),
                None => out.push((r.variant.clone(), vec![(r.axis_value, r.value)])),
            }
        }
        out
    }

    pub fn value(&self, axis_value: f64, variant: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.variant == variant && r.axis_value == axis_value).map(|r| r.value)
    }
}

fn row_record(r: &SweepRow) -> [String; 7] {
    [
        format_float(r.axis_value),
        r.variant.clone(),
        format_float(r.value),
        r.n_max.to_string(),
        format_float(r.tol),
        r.leakage_flag.to_string(),
        r.error.clone().unwrap_or_default(),
    ]
}

type ParsedRows = (String, Observable, Vec<SweepRow>, bool);

/// Reads a sweep CSV; a malformed trailing row (an interrupted write) is reported, not fatal.
fn read_rows<R: Read>(r: R) -> Result<ParsedRows, SweepError> {
    let mut rd = csv::ReaderBuilder::new().flexible(true).from_reader(r);
    let h = rd.headers()?.clone();
    let fixed = ["variant", "n_max", "tol", "leakage_flag", "error"];
    if h.len() != 7 || [1, 3, 4, 5, 6].iter().zip(fixed).any(|(&i, name)| &h[i] != name) {
        return Err(SweepError::Format(format!("unexpected header {h:?}")));
    }
    let observable = Observable::parse(&h[2]).ok_or_else(|| SweepError::Format(format!("unknown observable '{}'", &h[2])))?;
    let mut rows = Vec::new();
    let mut truncated = false;
    for rec in rd.records() {
        let rec = rec?;
        let parsed = (|| -> Option<SweepRow> {
            if rec.len() != 7 {
                return None;
            }
            Some(SweepRow {
                axis_value: rec[0].parse().ok()?,
                variant: rec[1].to_string(),
                value: rec[2].parse().ok()?,
                n_max: rec[3].parse().ok()?,
                tol: rec[4].parse().ok()?,
                leakage_flag: rec[5].parse().ok()?,
                error: (!rec[6].is_empty()).then(|| rec[6].to_string()),
            })
        })();
        match parsed {
            Some(row) => rows.push(row),
            None => {
                truncated = true;
                break;
            }
        }
    }
    Ok((h[0].to_string(), observable, rows, truncated))
}

#[derive(Debug, Clone, Default)]
pub struct SweepOptions {
    /// Worker threads; 0 uses one per core.
    pub jobs: usize,
    /// Rows are appended here as they finish and reused on the next run.
    pub checkpoint: Option<PathBuf>,
}

/// Seed of the point at grid position `index`, independent of evaluation order.
pub fn point_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Evaluates every `(value, variant)` pair of `spec`.
///
/// Failed points come back as NaN rows carrying the error text.
pub fn run_sweep(spec: &SweepSpec, opts: &SweepOptions) -> Result<SweepResult, SweepError> {
    spec.validate().map_err(SweepError::Spec)?;
    let mut result = SweepResult { axis: spec.axis.clone(), observable: spec.observable, rows: Vec::new() };

    let mut done: Vec<SweepRow> = Vec::new();
    if let Some(path) = &opts.checkpoint {
        if path.exists() {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            let (axis, observable, rows, _) = read_rows(file)?;
            if axis == spec.axis && observable == spec.observable {
                done = rows;
            }
        }
        let mut w = BufWriter::new(File::create(path).map_err(|e| io_err(path, e))?);
        let partial = SweepResult { rows: done.clone(), ..result.clone() };
        partial.write_csv(&mut w)?;
        w.flush().map_err(|e| io_err(path, e))?;
    }

    let tasks: Vec<(usize, f64, usize)> = spec
        .values
        .iter()
        .enumerate()
        .flat_map(|(i, &v)| (0..spec.variants.len()).map(move |j| (i * spec.variants.len() + j, v, j)))
        .collect();
    let wanted: HashSet<(u64, &str)> = tasks.iter().map(|&(_, v, j)| (v.to_bits(), spec.variants[j].name.as_str())).collect();
    done.retain(|r| wanted.contains(&(r.axis_value.to_bits(), r.variant.as_str())));
    let have: HashSet<(u64, String)> = done.iter().map(|r| (r.axis_value.to_bits(), r.variant.clone())).collect();
    let pending: Vec<_> =
        tasks.into_iter().filter(|&(_, v, j)| !have.contains(&(v.to_bits(), spec.variants[j].name.clone()))).collect();

    let sink = match &opts.checkpoint {
        Some(p) => Some(Mutex::new(BufWriter::new(OpenOptions::new().append(true).open(p).map_err(|e| io_err(p, e))?))),
        None => None,
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(opts.jobs).build().map_err(|e| SweepError::Pool(e.to_string()))?;
    let fresh: Vec<SweepRow> = pool.install(|| {
        pending
            .par_iter()
            .map(|&(index, value, j)| {
                let row = evaluate_point(spec, index, value, j);
                if let Some(sink) = &sink {
                    let mut w = sink.lock().unwrap_or_else(|p| p.into_inner());
                    let mut line = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
                    let _ = line.write_record(row_record(&row));
                    if let Ok(bytes) = line.into_inner() {
                        let _ = w.write_all(&bytes).and_then(|_| w.flush());
                    }
                }
                row
            })
            .collect()
    });

    let order = |name: &str| spec.variants.iter().position(|v| v.name == name).unwrap_or(usize::MAX);
    result.rows = done.into_iter().chain(fresh).collect();
    result.rows.sort_by(|a, b| a.axis_value.total_cmp(&b.axis_value).then(order(&a.variant).cmp(&order(&b.variant))));
    Ok(result)
}

fn evaluate_point(spec: &SweepSpec, index: usize, value: f64, variant: usize) -> SweepRow {
    let v = &spec.variants[variant];
    let failed = |tol: f64, n_max: usize, msg: String| SweepRow {
        axis_value: value,
        variant: v.name.clone(),
        value: f64::NAN,
        n_max,
        tol,
        leakage_flag: false,
        error: Some(msg),
    };
    let cfg = match spec.point_config(value, v) {
        Ok(c) => c,
        Err(e) => return failed(spec.base.tolerance, spec.base.params.fock_cutoff, e),
    };
    match evaluate(&cfg, spec.observable, point_seed(spec.seed, index)) {
        Ok((x, run)) => SweepRow {
            axis_value: value,
            variant: v.name.clone(),
            value: x,
            n_max: run.n_max,
            tol: cfg.tolerance,
            leakage_flag: run.evolution.leakage_flag,
            error: None,
        },
        Err(e) => failed(cfg.tolerance, cfg.params.fock_cutoff, e),
    }
}

fn io_err(path: &Path, e: std::io::Error) -> SweepError {
    SweepError::Io { path: path.display().to_string(), source: e }
}

/// Writes the CSV to `path` via a temporary file renamed into place.
pub fn write_csv_file(result: &SweepResult, path: &Path) -> Result<(), SweepError> {
    let tmp = path.with_extension("csv.tmp");
    {
        let mut w = BufWriter::new(File::create(&tmp).map_err(|e| io_err(&tmp, e))?);
        result.write_csv(&mut w)?;
        w.flush().map_err(|e| io_err(&tmp, e))?;
    }
    std::fs::rename(&tmp, path).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SweepResult {
        SweepResult {
            axis: "zeeman_shift".into(),
            observable: Observable::BellErrorExact,
            rows: vec![
                SweepRow {
                    axis_value: -0.1,
                    variant: "a,b".into(),
                    value: 1.0 / 3.0,
                    n_max: 12,
                    tol: 1e-10,
                    leakage_flag: false,
                    error: None,
                },
                SweepRow {
                    axis_value: 6.283185307179586e3,
                    variant: "dd".into(),
                    value: f64::NAN,
                    n_max: 20,
                    tol: 1e-10,
                    leakage_flag: true,
                    error: Some("step size underflow at t = 1e-4 s".into()),
                },
            ],
        }
    }

    #[test]
    fn csv_round_trip() {
        let r = sample();
        let text = r.to_csv_string();
        assert!(text.starts_with("zeeman_shift,variant,bell_error_exact,n_max,tol,leakage_flag,error\n"));
        assert_eq!(SweepResult::read_csv(text.as_bytes()).unwrap(), r);
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(format_float(0.1), "1.0000000000000001e-1");
        for x in [std::f64::consts::PI, 1e-300, -2.5e17, 0.0] {
            assert_eq!(format_float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn truncated_tail_tolerated_in_checkpoint() {
        let mut text = sample().to_csv_string();
        text.push_str("1.0e0,dd,2.0");
        let (_, _, rows, truncated) = read_rows(text.as_bytes()).unwrap();
        assert_eq!(rows.len(), 2);
        assert!(truncated);
        assert!(SweepResult::read_csv(text.as_bytes()).is_err());
    }

    #[test]
    fn point_seeds_distinct() {
        let s: HashSet<u64> = (0..1000).map(|i| point_seed(7, i)).collect();
        assert_eq!(s.len(), 1000);
    }
}
