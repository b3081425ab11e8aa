//! TOML configuration: named gate parameter sets, sweeps and MPM shot plans.
//!
//! Frequencies are written as ordinary frequencies (`"3.3 kHz"`, or a bare
//! number in Hz) and stored as angular frequencies. Times accept `s`, `ms`,
//! `us`/`µs` and `ns`. A file may pull in others with a top-level
//! `include = [...]`, and a gate block may start from another with `extends`.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use thiserror::Error;
use toml::{Table, Value};

use crate::dynamics::IntegratorOptions;
use crate::schedule::{
    plan_mpm_shot, solve_closure, DecouplingMode, FrameModel, GateParams, ModeParams, MpmShot, PlannedPulse,
    ScheduleError, CA43_MASS,
};

/// Directory searched for `*.toml` files when no `--config` is given.
pub const CONFIG_DIR_ENV: &str = "MSGATE_CONFIG_DIR";

const ATOMIC_MASS_UNIT: f64 = 1.660_539_066_60e-27;

const BUILTIN: &[(&str, &str)] = &[
    ("gates.toml", include_str!("../presets/gates.toml")),
    ("sweeps.toml", include_str!("../presets/sweeps.toml")),
];

/// File and (when known) line of a configuration item.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Location {
    pub file: String,
    pub line: Option<usize>,
}

impl fmt::Display for Location {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "{}:{}", self.file, l),
            None => write!(f, "{}", self.file),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{at}: {msg}")]
    Syntax { at: Location, msg: String },
    #[error("{at}: {field}: {msg}")]
    Field { at: Location, field: String, msg: String },
    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },
    #[error("include cycle through {0}")]
    Cycle(String),
    #[error("{0}")]
    Invalid(String),
}

/// Physical dimension of a configurable value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    /// Stored as rad/s.
    Frequency,
    Time,
    Power,
    Energy,
    Dimensionless,
}

impl Quantity {
    fn units(self) -> &'static [(&'static str, f64)] {
        match self {
            Self::Frequency => &[("Hz", TAU), ("kHz", TAU * 1e3), ("MHz", TAU * 1e6), ("GHz", TAU * 1e9), ("rad/s", 1.0)],
            Self::Time => &[("s", 1.0), ("ms", 1e-3), ("us", 1e-6), ("µs", 1e-6), ("ns", 1e-9)],
            Self::Power => &[("W", 1.0), ("mW", 1e-3)],
            Self::Energy => &[("J", 1.0), ("mJ", 1e-3), ("uJ", 1e-6), ("µJ", 1e-6)],
            Self::Dimensionless => &[("%", 1e-2)],
        }
    }

    fn bare_scale(self) -> f64 {
        if self == Self::Frequency {
            TAU
        } else {
            1.0
        }
    }
}

/// Converts a number or a `"<number> <unit>"` string to internal units.
pub fn parse_quantity(v: &Value, q: Quantity) -> Result<f64, String> {
    let x = match v {
        Value::Integer(i) => *i as f64 * q.bare_scale(),
        Value::Float(f) => *f * q.bare_scale(),
        Value::String(s) => parse_unit_string(s, q)?,
        other => return Err(format!("expected a number or a quantity string, found {}", other.type_str())),
    };
    if !x.is_finite() {
        return Err("value must be finite".into());
    }
    Ok(x)
}

fn parse_unit_string(s: &str, q: Quantity) -> Result<f64, String> {
    let s = s.trim();
    let split = s.find(|c: char| !(c.is_ascii_digit() || "+-.eE".contains(c))).unwrap_or(s.len());
    let (num, unit) = s.split_at(split);
    let x: f64 = num.parse().map_err(|_| format!("cannot read a number from '{s}'"))?;
    let unit = unit.trim();
    if unit.is_empty() {
        return Ok(x * q.bare_scale());
    }
    q.units()
        .iter()
        .find(|(u, _)| *u == unit)
        .map(|(_, scale)| x * scale)
        .ok_or_else(|| format!("unit '{unit}' is not valid for a {q:?} value"))
}

fn as_bool(v: &Value) -> Result<bool, String> {
    v.as_bool().ok_or_else(|| format!("expected true or false, found {}", v.type_str()))
}

fn as_uint(v: &Value) -> Result<u64, String> {
    match v {
        Value::Integer(i) if *i >= 0 => Ok(*i as u64),
        _ => Err(format!("expected a non-negative integer, found {v}")),
    }
}

fn as_str(v: &Value) -> Result<&str, String> {
    v.as_str().ok_or_else(|| format!("expected a string, found {}", v.type_str()))
}

/// Fringe-phase layout used by simulated parity scans.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PhaseDesign {
    Uniform,
    /// Clusters of half-width `spread` (rad) at the fringe extrema.
    Concentrated { spread: f64 },
}

/// Synthetic measurement settings behind the tomographic Bell error.
#[derive(Debug, Clone, PartialEq)]
pub struct TomographySettings {
    pub phases: usize,
    pub shots_per_phase: u64,
    pub population_shots: u64,
    pub spam_per_qubit: f64,
    pub spam_sigma: f64,
    pub design: PhaseDesign,
}

impl Default for TomographySettings {
    fn default() -> Self {
        Self {
            phases: 20,
            shots_per_phase: 500,
            population_shots: 10_000,
            spam_per_qubit: 0.0,
            spam_sigma: 0.0,
            design: PhaseDesign::Uniform,
        }
    }
}

/// One named gate configuration, before closure and validation.
#[derive(Debug, Clone, PartialEq)]
pub struct GateConfig {
    pub name: String,
    pub description: String,
    pub params: GateParams<f64>,
    pub ion_mass: f64,
    pub tolerance: f64,
    /// Cutoff ceiling for the automatic raise on leakage.
    pub max_fock_cutoff: usize,
    /// Calibrated a.c. Zeeman shift. Informational only: `params.zeeman_shift` is the residual error.
    pub ac_zeeman_shift: f64,
    pub tomography: TomographySettings,
    explicit_detuning: bool,
    explicit_duration: bool,
}

const FREQUENCY_KEYS: &[&str] = &[
    "gate_rabi",
    "detuning",
    "mode_freq",
    "carrier_rabi",
    "qubit_freq",
    "zeeman_shift",
    "dd_rabi",
    "detuning_error",
    "ac_zeeman_shift",
];
const TIME_KEYS: &[&str] = &["duration", "ramp_time", "flip_ramp_time"];
const PLAIN_KEYS: &[&str] = &["dd_drift.a1", "dd_drift.a2", "spam_per_qubit", "spam_sigma", "tomo_spread"];

/// Canonical name of a sweepable real-valued field and its dimension.
pub fn resolve_axis(path: &str) -> Option<(&'static str, Quantity)> {
    let path = match path {
        "motional_detuning_offset" | "detuning_offset" => "detuning_error",
        "a1" => "dd_drift.a1",
        "a2" => "dd_drift.a2",
        p => p,
    };
    let find = |keys: &[&'static str]| keys.iter().copied().find(|k| *k == path);
    find(FREQUENCY_KEYS)
        .map(|k| (k, Quantity::Frequency))
        .or_else(|| find(TIME_KEYS).map(|k| (k, Quantity::Time)))
        .or_else(|| find(PLAIN_KEYS).map(|k| (k, Quantity::Dimensionless)))
}

impl GateConfig {
    pub fn new(name: &str) -> Self {
        let mut params = GateParams::closed_gate(0.0, 1, 0.0);
        params.detuning = 0.0;
        params.duration = 0.0;
        Self {
            name: name.to_string(),
            description: String::new(),
            params,
            ion_mass: CA43_MASS,
            tolerance: 1e-10,
            max_fock_cutoff: 40,
            ac_zeeman_shift: 0.0,
            tomography: TomographySettings::default(),
            explicit_detuning: false,
            explicit_duration: false,
        }
    }

    /// Sets one field from a TOML value; `key` may be a dotted path such as `dd_drift.a2`.
    pub fn set(&mut self, key: &str, v: &Value) -> Result<(), String> {
        if let Some((k, q)) = resolve_axis(key) {
            let x = parse_quantity(v, q)?;
            self.set_real(k, x);
            return Ok(());
        }
        let p = &mut self.params;
        match key {
            "description" => self.description = as_str(v)?.to_string(),
            "loops" => p.loops = u32::try_from(as_uint(v)?).map_err(|e| e.to_string())?,
            "walsh_order" => p.walsh_order = u32::try_from(as_uint(v)?).map_err(|e| e.to_string())?,
            "fock_cutoff" => p.fock_cutoff = as_uint(v)? as usize,
            "max_fock_cutoff" => self.max_fock_cutoff = as_uint(v)? as usize,
            "closed" => p.closed = as_bool(v)?,
            "compensate_ramps" => p.compensate_ramps = as_bool(v)?,
            "dd_mode" => {
                p.dd_mode = DecouplingMode::parse(as_str(v)?)
                    .ok_or_else(|| "expected one of off, walsh, pi_pulse, calibrated".to_string())?
            }
            "model" => {
                p.model = match as_str(v)? {
                    "interaction" => FrameModel::Interaction,
                    "lab" => FrameModel::Lab,
                    _ => return Err("expected interaction or lab".into()),
                }
            }
            "dd_drift" => match v {
                Value::Array(a) if a.len() == 2 => {
                    self.set_real("dd_drift.a1", parse_quantity(&a[0], Quantity::Dimensionless)?);
                    self.set_real("dd_drift.a2", parse_quantity(&a[1], Quantity::Dimensionless)?);
                }
                Value::Table(t) => {
                    for (k, x) in t {
                        match k.as_str() {
                            "a1" | "a2" => self.set_real(&format!("dd_drift.{k}"), parse_quantity(x, Quantity::Dimensionless)?),
                            _ => return Err(format!("unknown drift coefficient '{k}'")),
                        }
                    }
                }
                _ => return Err("expected [a1, a2] or { a1 = .., a2 = .. }".into()),
            },
            "ion_mass_amu" => self.ion_mass = parse_quantity(v, Quantity::Dimensionless)? * ATOMIC_MASS_UNIT,
            "tolerance" => self.tolerance = parse_quantity(v, Quantity::Dimensionless)?,
            "tomo_phases" => self.tomography.phases = as_uint(v)? as usize,
            "tomo_shots_per_phase" => self.tomography.shots_per_phase = as_uint(v)?,
            "tomo_population_shots" => self.tomography.population_shots = as_uint(v)?,
            "tomo_design" => {
                self.tomography.design = match as_str(v)? {
                    "uniform" => PhaseDesign::Uniform,
                    "concentrated" => PhaseDesign::Concentrated { spread: 0.15 },
                    _ => return Err("expected uniform or concentrated".into()),
                }
            }
            _ => return Err("unknown field".into()),
        }
        Ok(())
    }

    /// Sets a real field (internal units) by canonical name, as returned by [`resolve_axis`].
    pub fn set_real(&mut self, key: &str, x: f64) {
        let p = &mut self.params;
        match key {
            "gate_rabi" => p.gate_rabi = x,
            "detuning" => {
                p.detuning = x;
                self.explicit_detuning = true;
            }
            "mode_freq" => p.mode_freq = x,
            "carrier_rabi" => p.carrier_rabi = x,
            "qubit_freq" => p.qubit_freq = x,
            "zeeman_shift" => p.zeeman_shift = x,
            "dd_rabi" => p.dd_rabi = x,
            "detuning_error" => p.detuning_error = x,
            "ac_zeeman_shift" => self.ac_zeeman_shift = x,
            "duration" => {
                p.duration = x;
                self.explicit_duration = true;
            }
            "ramp_time" => p.ramp_time = x,
            "flip_ramp_time" => p.flip_ramp_time = x,
            "dd_drift.a1" => p.dd_drift[0] = x,
            "dd_drift.a2" => p.dd_drift[1] = x,
            "spam_per_qubit" => self.tomography.spam_per_qubit = x,
            "spam_sigma" => self.tomography.spam_sigma = x,
            "tomo_spread" => self.tomography.design = PhaseDesign::Concentrated { spread: x },
            _ => panic!("set_real called with non-real key {key}"),
        }
    }

    /// Applies a `key=value` override; the value is read as TOML, falling back to a bare string.
    pub fn set_assignment(&mut self, assignment: &str) -> Result<(), String> {
        let (key, raw) = assignment.split_once('=').ok_or_else(|| format!("'{assignment}' is not key=value"))?;
        let key = key.trim();
        let raw = raw.trim();
        let value = toml::from_str::<Table>(&format!("v = {raw}"))
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set(key, &value).map_err(|e| format!("{key}: {e}"))
    }

    /// Closed (or explicitly given) gate and mode parameters, validated.
    pub fn resolve(&self) -> Result<(GateParams<f64>, ModeParams<f64>), ScheduleError> {
        let mut p = self.params.clone();
        let n = p.loops.max(1) as f64;
        match (self.explicit_detuning, self.explicit_duration) {
            (false, false) => {
                let (d, t) = solve_closure(p.gate_rabi, p.loops);
                p.detuning = d;
                p.duration = t;
            }
            (true, false) => p.duration = TAU * n / p.detuning,
            (false, true) => p.detuning = TAU * n / p.duration,
            (true, true) => {}
        }
        p.validate()?;
        let mode = ModeParams::new(self.ion_mass, p.mode_freq);
        Ok((p, mode))
    }

    pub fn integrator_options(&self) -> IntegratorOptions<f64> {
        IntegratorOptions::with_tolerance(self.tolerance)
    }
}

/// Requested observable of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Observable {
    BellErrorExact,
    BellErrorTomographic,
}

impl Observable {
    pub fn name(self) -> &'static str {
        match self {
            Self::BellErrorExact => "bell_error_exact",
            Self::BellErrorTomographic => "bell_error_tomographic",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "bell_error_exact" => Some(Self::BellErrorExact),
            "bell_error_tomographic" => Some(Self::BellErrorTomographic),
            _ => None,
        }
    }
}

/// Configuration overrides compared side by side in a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct Variant {
    pub name: String,
    pub overrides: Vec<(String, Value)>,
}

impl Variant {
    pub fn apply(&self, cfg: &mut GateConfig) -> Result<(), String> {
        for (k, v) in &self.overrides {
            cfg.set(k, v).map_err(|e| format!("{k}: {e}"))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub name: String,
    pub base: GateConfig,
    /// Canonical field name.
    pub axis: String,
    /// Axis values in internal units.
    pub values: Vec<f64>,
    pub observable: Observable,
    pub variants: Vec<Variant>,
    pub seed: u64,
}

impl SweepSpec {
    /// Gate configuration of one `(value, variant)` point.
    pub fn point_config(&self, value: f64, variant: &Variant) -> Result<GateConfig, String> {
        let mut cfg = self.base.clone();
        variant.apply(&mut cfg)?;
        cfg.set_real(&self.axis, value);
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if resolve_axis(&self.axis).map(|(k, _)| k) != Some(self.axis.as_str()) {
            return Err(format!("axis '{}' is not a real-valued field", self.axis));
        }
        if self.values.is_empty() {
            return Err("no axis values".into());
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err("axis values must be finite".into());
        }
        if self.variants.is_empty() {
            return Err("no variants".into());
        }
        let mut names: Vec<_> = self.variants.iter().map(|v| v.name.as_str()).collect();
        names.sort_unstable();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err("variant names must be unique".into());
        }
        for v in &self.variants {
            v.apply(&mut self.base.clone()).map_err(|e| format!("variant '{}': {e}", v.name))?;
        }
        Ok(())
    }
}

/// MPM shot plan inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct MpmConfig {
    pub name: String,
    pub shot_duration: f64,
    pub dummy_power: f64,
    pub energy_budget: f64,
    pub pulses: Vec<PlannedPulse<f64>>,
}

impl MpmConfig {
    pub fn plan(&self) -> Result<MpmShot<f64>, ScheduleError> {
        plan_mpm_shot(self.shot_duration, &self.pulses, self.energy_budget, self.dummy_power)
    }
}

#[derive(Debug, Clone)]
struct Source {
    file: String,
    text: Arc<str>,
}

#[derive(Debug, Clone)]
struct Block {
    section: &'static str,
    name: String,
    table: Table,
    source: Source,
}

impl Block {
    fn at(&self, key: Option<&str>) -> Location {
        Location { file: self.source.file.clone(), line: find_line(&self.source.text, self.section, &self.name, key) }
    }

    fn field_error(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        ConfigError::Field { at: self.at(Some(key)), field: format!("{}.{}.{key}", self.section, self.name), msg: msg.into() }
    }
}

/// 1-based line of `key` inside `[section.name]` (or of the header itself).
fn find_line(text: &str, section: &str, name: &str, key: Option<&str>) -> Option<usize> {
    let headers = [
        format!("[{section}.{name}]"),
        format!("[{section}.\"{name}\"]"),
        format!("[[{section}.{name}."),
        format!("[[{section}.\"{name}\"."),
    ];
    let lines: Vec<&str> = text.lines().collect();
    let start = lines.iter().position(|l| {
        let l = l.trim();
        headers[..2].iter().any(|h| l == h) || headers[2..].iter().any(|h| l.starts_with(h.as_str()))
    })?;
    let Some(key) = key else { return Some(start + 1) };
    let leaf = key.rsplit('.').next().unwrap_or(key);
    for (i, l) in lines.iter().enumerate().skip(start + 1) {
        let l = l.trim();
        if l.starts_with('[') && !l.starts_with(&format!("[[{section}.{name}.")) {
            break;
        }
        if let Some(rest) = l.strip_prefix(key).or_else(|| l.strip_prefix(leaf)) {
            if rest.trim_start().starts_with('=') || rest.starts_with('.') {
                return Some(i + 1);
            }
        }
    }
    Some(start + 1)
}

/// Every gate, sweep and MPM block visible to the command line.
#[derive(Debug, Clone, Default)]
pub struct Catalog {
    blocks: BTreeMap<(&'static str, String), Block>,
}

const SECTIONS: [&str; 3] = ["gate", "sweep", "mpm"];

impl Catalog {
    /// Presets shipped with the library.
    pub fn builtin() -> Self {
        let mut c = Self::default();
        for (name, _) in BUILTIN {
            c.load_builtin(name, &mut Vec::new()).expect("built-in presets parse");
        }
        c
    }

    /// Built-in presets, then `*.toml` from `$MSGATE_CONFIG_DIR`, then `config`; later definitions win.
    pub fn standard(config: Option<&Path>) -> Result<Self, ConfigError> {
        let mut c = Self::builtin();
        if let Some(dir) = std::env::var_os(CONFIG_DIR_ENV) {
            c.load_dir(Path::new(&dir))?;
        }
        if let Some(path) = config {
            c.load_file(path)?;
        }
        Ok(c)
    }

    pub fn load_dir(&mut self, dir: &Path) -> Result<(), ConfigError> {
        let io = |e| ConfigError::Io { path: dir.display().to_string(), source: e };
        let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
            .map_err(io)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "toml"))
            .collect();
        files.sort();
        for f in files {
            self.load_file(&f)?;
        }
        Ok(())
    }

    pub fn load_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        self.load_path(path, &mut Vec::new())
    }

    /// Loads configuration text; relative includes resolve against `dir`.
    pub fn load_str(&mut self, file: &str, text: &str, dir: Option<&Path>) -> Result<(), ConfigError> {
        self.load_text(file, text, dir, &mut Vec::new())
    }

    fn load_path(&mut self, path: &Path, stack: &mut Vec<String>) -> Result<(), ConfigError> {
        let key = path.canonicalize().unwrap_or_else(|_| path.to_path_buf()).display().to_string();
        if stack.contains(&key) {
            return Err(ConfigError::Cycle(path.display().to_string()));
        }
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io { path: path.display().to_string(), source: e })?;
        stack.push(key);
        let r = self.load_text(&path.display().to_string(), &text, path.parent(), stack);
        stack.pop();
        r
    }

    fn load_builtin(&mut self, name: &str, stack: &mut Vec<String>) -> Result<(), ConfigError> {
        let key = format!("<builtin>/{name}");
        if stack.contains(&key) {
            return Err(ConfigError::Cycle(key));
        }
        let (_, text) = BUILTIN
            .iter()
            .find(|(n, _)| *n == name)
            .ok_or_else(|| ConfigError::Unknown { kind: "built-in file", name: name.to_string() })?;
        stack.push(key.clone());
        let r = self.load_text(&key, text, None, stack);
        stack.pop();
        r
    }

    fn load_text(&mut self, file: &str, text: &str, dir: Option<&Path>, stack: &mut Vec<String>) -> Result<(), ConfigError> {
        let mut doc: Table = toml::from_str(text).map_err(|e| ConfigError::Syntax {
            at: Location { file: file.to_string(), line: e.span().map(|s| text[..s.start].lines().count().max(1)) },
            msg: e.message().to_string(),
        })?;
        let top = |key: Option<&str>| Location {
            file: file.to_string(),
            line: key.and_then(|k| text.lines().position(|l| l.trim_start().starts_with(k)).map(|i| i + 1)),
        };
        if let Some(inc) = doc.remove("include") {
            let list = match inc {
                Value::Array(a) => a,
                v => vec![v],
            };
            for item in list {
                let Value::String(rel) = item else {
                    return Err(ConfigError::Field {
                        at: top(Some("include")),
                        field: "include".into(),
                        msg: "expected file names".into(),
                    });
                };
                match dir {
                    Some(d) => self.load_path(&d.join(&rel), stack)?,
                    None => self.load_builtin(&rel, stack)?,
                }
            }
        }
        let source = Source { file: file.to_string(), text: Arc::from(text) };
        for (section_key, value) in doc {
            let Some(section) = SECTIONS.iter().copied().find(|s| *s == section_key) else {
                return Err(ConfigError::Field {
                    at: top(Some(&section_key)),
                    field: section_key,
                    msg: "unknown section (expected gate, sweep, mpm or include)".into(),
                });
            };
            let Value::Table(entries) = value else {
                return Err(ConfigError::Field { at: top(Some(section)), field: section.into(), msg: "expected a table".into() });
            };
            for (name, body) in entries {
                let Value::Table(table) = body else {
                    return Err(ConfigError::Field {
                        at: top(None),
                        field: format!("{section}.{name}"),
                        msg: "expected a table".into(),
                    });
                };
                self.blocks.insert((section, name.clone()), Block { section, name, table, source: source.clone() });
            }
        }
        Ok(())
    }

    pub fn names(&self, section: &str) -> Vec<String> {
        self.blocks.keys().filter(|(s, _)| *s == section).map(|(_, n)| n.clone()).collect()
    }

    pub fn contains(&self, section: &str, name: &str) -> bool {
        self.block(section, name).is_some()
    }

    fn block(&self, section: &str, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|((s, n), _)| *s == section && n == name).map(|(_, b)| b)
    }

    pub fn gate(&self, name: &str) -> Result<GateConfig, ConfigError> {
        let block = self.block("gate", name).ok_or_else(|| ConfigError::Unknown { kind: "gate", name: name.into() })?;
        self.gate_from_table(block, &block.table, name, &mut Vec::new())
    }

    fn gate_from_table(&self, block: &Block, table: &Table, name: &str, stack: &mut Vec<String>) -> Result<GateConfig, ConfigError> {
        if stack.iter().any(|s| s == name) {
            return Err(ConfigError::Cycle(format!("gate.{name}")));
        }
        stack.push(name.to_string());
        let mut cfg = match table.get("extends") {
            Some(Value::String(parent)) => {
                let pb = self
                    .block("gate", parent)
                    .ok_or_else(|| block.field_error("extends", format!("unknown gate '{parent}'")))?;
                let mut c = self.gate_from_table(pb, &pb.table, parent, stack)?;
                c.name = name.to_string();
                c
            }
            Some(_) => return Err(block.field_error("extends", "expected a gate name")),
            None => GateConfig::new(name),
        };
        stack.pop();
        for (k, v) in table {
            if k == "extends" {
                continue;
            }
            cfg.set(k, v).map_err(|e| block.field_error(k, e))?;
        }
        cfg.resolve().map_err(|e| ConfigError::Field {
            at: block.at(None),
            field: format!("{}.{}", block.section, block.name),
            msg: e.to_string(),
        })?;
        Ok(cfg)
    }

    pub fn sweep(&self, name: &str) -> Result<SweepSpec, ConfigError> {
        let b = self.block("sweep", name).ok_or_else(|| ConfigError::Unknown { kind: "sweep", name: name.into() })?;
        let t = &b.table;
        let base = match t.get("base") {
            Some(Value::String(g)) => self.gate(g).map_err(|e| match e {
                ConfigError::Unknown { .. } => b.field_error("base", format!("unknown gate '{g}'")),
                e => e,
            })?,
            Some(Value::Table(inline)) => self.gate_from_table(b, inline, &format!("{name}.base"), &mut Vec::new())?,
            _ => return Err(b.field_error("base", "expected a gate name or an inline table")),
        };
        let axis_raw = t.get("axis").and_then(Value::as_str).ok_or_else(|| b.field_error("axis", "missing axis"))?;
        let (axis, q) =
            resolve_axis(axis_raw).ok_or_else(|| b.field_error("axis", format!("'{axis_raw}' is not a real-valued field")))?;
        let values = parse_values(t, q).map_err(|e| b.field_error("values", e))?;
        let observable = match t.get("observable") {
            None => Observable::BellErrorExact,
            Some(v) => Observable::parse(as_str(v).map_err(|e| b.field_error("observable", e))?)
                .ok_or_else(|| b.field_error("observable", "expected bell_error_exact or bell_error_tomographic"))?,
        };
        let seed = match t.get("seed") {
            None => 0,
            Some(v) => as_uint(v).map_err(|e| b.field_error("seed", e))?,
        };
        let variants = match t.get("variant") {
            None => vec![Variant { name: "base".into(), overrides: Vec::new() }],
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, item)| {
                    let Value::Table(vt) = item else {
                        return Err(b.field_error("variant", "expected [[variant]] tables"));
                    };
                    let name = vt.get("name").and_then(Value::as_str).map(str::to_string).unwrap_or_else(|| format!("v{i}"));
                    let overrides = vt.iter().filter(|(k, _)| *k != "name").map(|(k, v)| (k.clone(), v.clone())).collect();
                    Ok(Variant { name, overrides })
                })
                .collect::<Result<_, _>>()?,
            Some(_) => return Err(b.field_error("variant", "expected [[variant]] tables")),
        };
        for key in t.keys() {
            if !["base", "axis", "values", "linspace", "observable", "seed", "variant", "description"].contains(&key.as_str()) {
                return Err(b.field_error(key, "unknown field"));
            }
        }
        let spec = SweepSpec { name: name.to_string(), base, axis: axis.to_string(), values, observable, variants, seed };
        spec.validate().map_err(|e| b.field_error("variant", e))?;
        Ok(spec)
    }

    pub fn mpm(&self, name: &str) -> Result<MpmConfig, ConfigError> {
        let b = self.block("mpm", name).ok_or_else(|| ConfigError::Unknown { kind: "mpm plan", name: name.into() })?;
        let get = |key: &str, q: Quantity| -> Result<f64, ConfigError> {
            let v = b.table.get(key).ok_or_else(|| b.field_error(key, "missing"))?;
            parse_quantity(v, q).map_err(|e| b.field_error(key, e))
        };
        let mut pulses = Vec::new();
        if let Some(v) = b.table.get("pulses") {
            let Value::Array(items) = v else { return Err(b.field_error("pulses", "expected an array of tables")) };
            for item in items {
                let (Some(power), Some(duration)) = (item.get("power"), item.get("duration")) else {
                    return Err(b.field_error("pulses", "each pulse needs power and duration"));
                };
                pulses.push(PlannedPulse {
                    power: parse_quantity(power, Quantity::Power).map_err(|e| b.field_error("pulses", e))?,
                    duration: parse_quantity(duration, Quantity::Time).map_err(|e| b.field_error("pulses", e))?,
                });
            }
        }
        Ok(MpmConfig {
            name: name.to_string(),
            shot_duration: get("shot_duration", Quantity::Time)?,
            dummy_power: get("dummy_power", Quantity::Power)?,
            energy_budget: get("energy_budget", Quantity::Energy)?,
            pulses,
        })
    }
}

fn parse_values(t: &Table, q: Quantity) -> Result<Vec<f64>, String> {
    let linspace = |from: &Value, to: &Value, count: &Value| -> Result<Vec<f64>, String> {
        let (a, b) = (parse_quantity(from, q)?, parse_quantity(to, q)?);
        let n = as_uint(count)? as usize;
        if n < 2 {
            return Err("a linspace needs at least 2 points".into());
        }
        Ok((0..n).map(|i| if i == n - 1 { b } else { a + (b - a) * i as f64 / (n - 1) as f64 }).collect())
    };
    let values = match (t.get("values"), t.get("linspace")) {
        (Some(Value::Array(items)), None) => items.iter().map(|v| parse_quantity(v, q)).collect::<Result<Vec<_>, _>>()?,
        (Some(Value::Table(r)), None) => match (r.get("from"), r.get("to"), r.get("count")) {
            (Some(a), Some(b), Some(n)) => linspace(a, b, n)?,
            _ => return Err("range needs from, to and count".into()),
        },
        (None, Some(Value::Array(l))) if l.len() == 3 => linspace(&l[0], &l[1], &l[2])?,
        (None, None) => return Err("missing values".into()),
        _ => return Err("expected values = [..], values = { from, to, count } or linspace = [from, to, count]".into()),
    };
    if values.is_empty() {
        return Err("no values".into());
    }
    Ok(values)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_strings() {
        let f = |s: &str| parse_quantity(&Value::String(s.into()), Quantity::Frequency).unwrap();
        assert!((f("3.3 kHz") - TAU * 3300.0).abs() < 1e-9);
        assert!((f("1.81MHz") - TAU * 1.81e6).abs() < 1e-6);
        assert!((f("-3 kHz") + TAU * 3000.0).abs() < 1e-9);
        assert_eq!(f("5 rad/s"), 5.0);
        let t = parse_quantity(&Value::String("2.8 us".into()), Quantity::Time).unwrap();
        assert!((t - 2.8e-6).abs() < 1e-18);
        assert_eq!(parse_quantity(&Value::Integer(2), Quantity::Frequency).unwrap(), 2.0 * TAU);
        assert!(parse_quantity(&Value::String("3 kg".into()), Quantity::Frequency).is_err());
        assert!(parse_quantity(&Value::String("fast".into()), Quantity::Time).is_err());
    }

    #[test]
    fn builtin_presets_resolve() {
        let c = Catalog::builtin();
        for name in ["fast-gate-n1", "fast-gate-n2", "slow-gate-dd"] {
            let g = c.gate(name).unwrap();
            assert!(g.resolve().is_ok(), "{name}");
        }
        let n2 = c.gate("fast-gate-n2").unwrap();
        assert_eq!(n2.params.loops, 2);
        assert!((n2.params.ramp_time - 2.8e-6).abs() < 1e-18);
        for name in c.names("sweep") {
            c.sweep(&name).unwrap();
        }
        c.mpm("fast-gate-n1").unwrap().plan().unwrap();
    }

    #[test]
    fn field_errors_carry_lines() {
        let mut c = Catalog::default();
        let text = "[gate.g]\ngate_rabi = \"3 kHz\"\nmode_freq = \"4 MHz\"\nwalsh_order = \"seven\"\n";
        c.load_str("t.toml", text, None).unwrap();
        let e = c.gate("g").unwrap_err().to_string();
        assert!(e.starts_with("t.toml:4: gate.g.walsh_order"), "{e}");
    }

    #[test]
    fn syntax_error_line() {
        let mut c = Catalog::default();
        let e = c.load_str("bad.toml", "[gate.g]\ngate_rabi = = 3\n", None).unwrap_err().to_string();
        assert!(e.starts_with("bad.toml:2:"), "{e}");
    }

    #[test]
    fn unsupported_walsh_order_is_a_config_error() {
        let mut c = Catalog::builtin();
        c.load_str("o.toml", "[gate.w5]\nextends = \"slow-gate-dd\"\nwalsh_order = 5\n", None).unwrap();
        let e = c.gate("w5").unwrap_err();
        assert!(matches!(e, ConfigError::Field { .. }));
        assert!(e.to_string().contains("o.toml:1"), "{e}");
    }

    #[test]
    fn assignments_override() {
        let mut g = Catalog::builtin().gate("fast-gate-n1").unwrap();
        g.set_assignment("zeeman_shift = \"1 kHz\"").unwrap();
        assert!((g.params.zeeman_shift - TAU * 1e3).abs() < 1e-9);
        g.set_assignment("dd_mode=walsh").unwrap();
        assert_eq!(g.params.dd_mode, DecouplingMode::Walsh);
        g.set_assignment("dd_drift.a2=0.1").unwrap();
        assert_eq!(g.params.dd_drift[1], 0.1);
        assert!(g.set_assignment("nonsense=1").is_err());
    }

    #[test]
    fn include_cycle_detected() {
        let dir = std::env::temp_dir().join(format!("msgate-cycle-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        std::fs::write(dir.join("a.toml"), "include = [\"b.toml\"]\n").unwrap();
        std::fs::write(dir.join("b.toml"), "include = [\"a.toml\"]\n").unwrap();
        let e = Catalog::default().load_file(&dir.join("a.toml")).unwrap_err();
        assert!(matches!(e, ConfigError::Cycle(_)));
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn linspace_endpoints_exact() {
        let mut c = Catalog::builtin();
        c.load_str(
            "s.toml",
            "[sweep.s]\nbase = \"fast-gate-n1\"\naxis = \"a1\"\nlinspace = [-0.2, 0.2, 5]\n",
            None,
        )
        .unwrap();
        let s = c.sweep("s").unwrap();
        assert_eq!(s.axis, "dd_drift.a1");
        let want = [-0.2, -0.1, 0.0, 0.1, 0.2];
        assert_eq!(s.values.len(), 5);
        assert!(s.values.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-15));
        assert_eq!(s.values[4], 0.2);
        assert_eq!(s.variants.len(), 1);
    }
}
