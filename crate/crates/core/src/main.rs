use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use zenopm::plant::PointerConfig;
use zenopm::scenario::{self, Expectations, RunOptions, Scenario, ScenarioError};

/// Zeno protective-measurement simulator and reproduction harness.
///
/// Exit status: 0 success, 1 verification failure, 2 configuration or I/O error.
#[derive(Parser)]
#[command(name = "zenopm", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a bundled scenario by name, or a scenario file.
    Run {
        scenario: String,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default: out/<scenario name>).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Use the full-length duration instead of the desk-scale one.
        #[arg(long)]
        full: bool,
    },
    /// Check a manifest against expectations (a file or a bundled scenario name).
    Verify { manifest: PathBuf, expectations: String },
    /// Noise-free predictions over polarization angle or loop count.
    Sweep {
        #[arg(long, value_enum, default_value_t = Axis::Theta)]
        over: Axis,
        #[arg(long, default_value_t = 13)]
        loops: usize,
        #[arg(long, default_value_t = 19)]
        steps: usize,
        #[arg(long, default_value_t = std::f64::consts::FRAC_PI_4)]
        theta_rad: f64,
        #[arg(long, default_value_t = 0.483)]
        tau_loop_ns: f64,
        #[arg(long, default_value_t = 2.5)]
        pulse_fwhm_ns: f64,
        #[arg(long, default_value = "sweep.csv")]
        out: PathBuf,
    },
    /// Write plot-ready CSV files from a run directory.
    EmitPlots {
        run_dir: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Axis {
    Theta,
    Loops,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode, ScenarioError> {
    match command {
        Command::Run { scenario, seed, out, full } => {
            let s = Scenario::load(&scenario)?;
            let out_dir = out.unwrap_or_else(|| PathBuf::from("out").join(&s.name));
            let manifest = scenario::run_scenario(&s, &RunOptions { out_dir: out_dir.clone(), seed, full })?;
            for w in &manifest.warnings {
                eprintln!("warning: {w}");
            }
            for (key, value) in &manifest.summary {
                println!("{key:<32} {value:.6}");
            }
            println!("wrote {}", out_dir.join(scenario::MANIFEST_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { manifest, expectations } => {
            let exp = if scenario::bundled_names().contains(&expectations.as_str()) {
                scenario::bundled_expectations(&expectations)?
            } else {
                Expectations::from_path(&PathBuf::from(&expectations))?
            };
            let report = scenario::verify(&manifest, &exp);
            println!("{report}");
            Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Sweep { over, loops, steps, theta_rad, tau_loop_ns, pulse_fwhm_ns, out } => {
            let pointer = PointerConfig { loops, tau_loop_ns, pulse_fwhm_ns };
            let points = match over {
                Axis::Theta => scenario::sweep_theta(&pointer, steps)?,
                Axis::Loops => scenario::sweep_loops(&pointer, theta_rad, loops)?,
            };
            scenario::write_sweep(&out, &points)?;
            println!("wrote {} points to {}", points.len(), out.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::EmitPlots { run_dir, out } => {
            let out = out.unwrap_or_else(|| run_dir.join("plots"));
            for name in scenario::emit_plots(&run_dir, &out)? {
                println!("wrote {}", out.join(name).display());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
