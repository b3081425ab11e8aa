//! `msgate`: run gate simulations, sweeps, parity fits, MPM plans and Walsh checks
//! from TOML configuration.
//!
//! Exit status: 0 on success, 1 when a simulation or I/O step fails, 2 for
//! configuration and usage errors.

use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msgate::config::{Catalog, ConfigError, CONFIG_DIR_ENV};
use msgate::plot::emit_plot;
use msgate::sweep::{format_float, run_single, run_sweep, write_csv_file, SweepOptions};
use msgate::tomography::{bell_error_report, fit_parity_mle, BellInputs, FitOptions, ParityDataset};
use msgate::walsh::{unit_moments, SUPPORTED_ORDERS};

#[derive(Debug, Parser)]
#[command(name = "msgate", version, about = "Microwave MS gate simulation and analysis")]
struct Cli {
    /// Extra configuration file, loaded after the built-in presets.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named gate, sweep or MPM block to use.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for sweeps; 0 means one per core.
    #[arg(long, global = true, default_value_t = 0)]
    jobs: usize,
    /// Also write an SVG plot.
    #[arg(long, global = true)]
    plot: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate one gate and report its Bell errors.
    Simulate {
        /// Field override, e.g. `--set zeeman_shift="1 kHz"`.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Run a parameter sweep and write CSV.
    Sweep {
        /// Override applied to the sweep's base gate.
        #[arg(long = "set", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Fit a parity scan (CSV with phi_rad,shots,count_odd).
    ParityFit {
        data: PathBuf,
        /// Per-qubit readout error used for the Bell error report.
        #[arg(long, default_value_t = 0.0)]
        spam: f64,
        /// Measured P00 and P11, to report the Bell error.
        #[arg(long, num_args = 2, value_names = ["P00", "P11"])]
        populations: Option<Vec<f64>>,
    },
    /// Plan one power-managed shot.
    MpmPlan,
    /// Print exact Walsh moment integrals on the unit interval.
    WalshCheck {
        #[arg(long)]
        order: Option<u32>,
        #[arg(long, default_value_t = 4)]
        max_moment: u32,
    },
    /// List the available presets.
    List,
}

enum Failure {
    Config(String),
    Runtime(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("msgate: configuration error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(msg)) => {
            eprintln!("msgate: {msg}");
            ExitCode::from(1)
        }
    }
}

fn run(cli: &Cli) -> Result<(), Failure> {
    match &cli.command {
        Command::WalshCheck { order, max_moment } => return walsh_check(*order, *max_moment),
        Command::ParityFit { data, spam, populations } => return parity_fit(cli, data, *spam, populations.as_deref()),
        _ => {}
    }
    let catalog = Catalog::standard(cli.config.as_deref())?;
    match &cli.command {
        Command::Simulate { overrides } => simulate(cli, &catalog, overrides),
        Command::Sweep { overrides } => sweep(cli, &catalog, overrides),
        Command::MpmPlan => mpm_plan(cli, &catalog),
        Command::List => {
            for section in ["gate", "sweep", "mpm"] {
                println!("{section}: {}", catalog.names(section).join(" "));
            }
            if std::env::var_os(CONFIG_DIR_ENV).is_none() {
                println!("(set {CONFIG_DIR_ENV} to add a directory of configuration files)");
            }
            Ok(())
        }
        Command::WalshCheck { .. } | Command::ParityFit { .. } => unreachable!(),
    }
}

fn ensure_out(dir: &Path) -> Result<(), Failure> {
    std::fs::create_dir_all(dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))
}

fn simulate(cli: &Cli, catalog: &Catalog, overrides: &[String]) -> Result<(), Failure> {
    let name = cli.preset.as_deref().unwrap_or("fast-gate-n1");
    let mut cfg = catalog.gate(name)?;
    for o in overrides {
        cfg.set_assignment(o).map_err(|e| Failure::Config(format!("--set {e}")))?;
    }
    cfg.resolve().map_err(|e| Failure::Config(format!("gate.{name}: {e}")))?;
    let report = run_single(&cfg, cli.seed.unwrap_or(0)).map_err(Failure::Runtime)?;
    let text = report.to_text();
    print!("{text}");
    ensure_out(&cli.out)?;
    write_text(&cli.out.join(format!("{name}.report.txt")), &text)?;
    write_text(&cli.out.join(format!("{name}.bell.txt")), &report.tomography.to_text())?;
    Ok(())
}

fn sweep(cli: &Cli, catalog: &Catalog, overrides: &[String]) -> Result<(), Failure> {
    let name = cli.preset.as_deref().unwrap_or("zeeman-dd");
    let mut spec = catalog.sweep(name)?;
    for o in overrides {
        spec.base.set_assignment(o).map_err(|e| Failure::Config(format!("--set {e}")))?;
    }
    spec.validate().map_err(|e| Failure::Config(format!("sweep.{name}: {e}")))?;
    if let Some(seed) = cli.seed {
        spec.seed = seed;
    }
    ensure_out(&cli.out)?;
    let csv_path = cli.out.join(format!("{name}.csv"));
    let checkpoint = cli.out.join(format!("{name}.csv.partial"));
    let opts = SweepOptions { jobs: cli.jobs, checkpoint: Some(checkpoint.clone()) };
    let result = run_sweep(&spec, &opts).map_err(runtime)?;
    write_csv_file(&result, &csv_path).map_err(runtime)?;
    let _ = std::fs::remove_file(&checkpoint);
    let failed = result.rows.iter().filter(|r| r.error.is_some()).count();
    let leaked = result.rows.iter().filter(|r| r.leakage_flag).count();
    println!("wrote {} rows to {}", result.rows.len(), csv_path.display());
    if cli.plot {
        let svg = cli.out.join(format!("{name}.svg"));
        emit_plot(&result, &svg).map_err(|e| Failure::Runtime(format!("{}: {e}", svg.display())))?;
        println!("wrote {}", svg.display());
    }
    if leaked > 0 {
        eprintln!("warning: {leaked} points still leak at the maximum Fock cutoff");
    }
    if failed > 0 {
        eprintln!("warning: {failed} of {} points failed; see the error column", result.rows.len());
    }
    Ok(())
}

fn parity_fit(cli: &Cli, data: &Path, spam: f64, populations: Option<&[f64]>) -> Result<(), Failure> {
    let file = File::open(data).map_err(|e| Failure::Runtime(format!("{}: {e}", data.display())))?;
    let ds = ParityDataset::read_csv(file).map_err(|e| Failure::Config(format!("{}: {e}", data.display())))?;
    let fit = fit_parity_mle(&ds, &FitOptions::default()).map_err(runtime)?;
    let mut text = format!(
        "contrast={}\ncontrast_lo={}\ncontrast_hi={}\nphase_offset_rad={}\np_mid={}\nlog_likelihood={}\ndegenerate={}\n",
        format_float(fit.contrast),
        format_float(fit.contrast_interval.0),
        format_float(fit.contrast_interval.1),
        format_float(fit.phase_offset),
        format_float(fit.p_mid),
        format_float(fit.log_likelihood),
        fit.degenerate,
    );
    if let Some(&[p00, p11]) = populations {
        let report = bell_error_report(&BellInputs {
            p00,
            p11,
            contrast: fit.contrast,
            phase_offset: fit.phase_offset,
            spam_per_qubit: spam,
            contrast_sigma: fit.contrast_sigma(),
            ..Default::default()
        })
        .map_err(|e| Failure::Config(e.to_string()))?;
        text.push_str(&report.to_text());
    }
    print!("{text}");
    ensure_out(&cli.out)?;
    write_text(&cli.out.join("parity_fit.txt"), &text)
}

fn mpm_plan(cli: &Cli, catalog: &Catalog) -> Result<(), Failure> {
    let name = cli.preset.as_deref().unwrap_or("fast-gate-n1");
    let cfg = catalog.mpm(name)?;
    let shot = cfg.plan().map_err(|e| Failure::Config(format!("mpm.{name}: {e}")))?;
    println!("shot_duration_s={}", format_float(shot.shot_duration));
    println!("energy_budget_j={}", format_float(shot.energy_budget));
    println!("experiment_energy_j={}", format_float(shot.experiment_energy()));
    println!("dummy_power_w={}", format_float(shot.dummy_power));
    println!("dummy_duration_s={}", format_float(shot.dummy_duration));
    println!("injected_energy_j={}", format_float(shot.injected_energy()));
    println!("idle_power_w={}", format_float(shot.idle_power()));
    Ok(())
}

fn walsh_check(order: Option<u32>, max_moment: u32) -> Result<(), Failure> {
    let orders: Vec<u32> = match order {
        Some(o) => vec![o],
        None => SUPPORTED_ORDERS.to_vec(),
    };
    for o in orders {
        let moments = unit_moments(o, max_moment).map_err(|e| Failure::Config(e.to_string()))?;
        let cells: Vec<String> = moments.iter().enumerate().map(|(m, v)| format!("m{m}={v}")).collect();
        println!("order {o}: {}", cells.join(" "));
    }
    Ok(())
}
