use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use evochns_core::geometry::{GeometryPreset, HarmonicMode};
use evochns_core::{parse_config, run_suite, run_to_dir, Error, Suite};

/// Two-phase Cahn-Hilliard-Navier-Stokes flow on evolving spheres.
#[derive(Parser)]
#[command(name = "evochns", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a simulation and write VTK snapshots, CSV diagnostics and a manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite against closed-form oracles.
    Verify {
        #[arg(long, value_enum, default_value_t = SuiteArg::All)]
        suite: SuiteArg,
    },
    /// List the geometry presets and their parameters.
    Presets,
}

#[derive(Clone, Copy, ValueEnum)]
enum SuiteArg {
    Geometry,
    Laplace,
    Stokes,
    CahnHilliard,
    Pullback,
    All,
}

impl From<SuiteArg> for Suite {
    fn from(s: SuiteArg) -> Self {
        match s {
            SuiteArg::Geometry => Suite::Geometry,
            SuiteArg::Laplace => Suite::Laplace,
            SuiteArg::Stokes => Suite::Stokes,
            SuiteArg::CahnHilliard => Suite::CahnHilliard,
            SuiteArg::Pullback => Suite::Pullback,
            SuiteArg::All => Suite::All,
        }
    }
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_ABORT: u8 = 2;
const EXIT_VERIFY: u8 = 3;

fn error_code(e: &Error) -> u8 {
    if e.is_validation() {
        EXIT_VALIDATION
    } else {
        EXIT_ABORT
    }
}

fn run(config: PathBuf, out: PathBuf) -> u8 {
    let cfg = match parse_config(&config) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    match run_to_dir(&cfg, &out) {
        Ok(outcome) => {
            let last = outcome.rows.last().expect("initial row");
            println!(
                "wrote {} ({} output rows, t = {}, energy = {:.6e}, mass = {:.6e})",
                out.display(),
                outcome.rows.len(),
                last.t,
                last.energy,
                last.mass
            );
            match outcome.abort {
                Some(a) => {
                    eprintln!("aborted at step {} (t = {}): {}", a.step, a.t, a.message);
                    EXIT_ABORT
                }
                None => 0,
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            error_code(&e)
        }
    }
}

fn verify(suite: Suite) -> u8 {
    match run_suite(suite) {
        Ok(reports) => {
            for r in &reports {
                println!("{}", r.summary());
            }
            let failed = reports.iter().filter(|r| !r.pass).count();
            println!("{} of {} checks passed", reports.len() - failed, reports.len());
            if failed == 0 {
                0
            } else {
                EXIT_VERIFY
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_VERIFY
        }
    }
}

fn presets() {
    let examples = [
        GeometryPreset::StationarySphere { radius: 1.0 },
        GeometryPreset::oscillating_default(),
        GeometryPreset::CustomNormalField {
            radius: 1.0,
            modes: vec![HarmonicMode {
                l: 3,
                m: 1,
                amplitude: 0.1,
                frequency: std::f64::consts::TAU,
                phase: 0.0,
            }],
        },
    ];
    for p in examples {
        println!("{}", p.describe());
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, out } => run(config, out),
        Command::Verify { suite } => verify(suite.into()),
        Command::Presets => {
            presets();
            0
        }
    };
    ExitCode::from(code)
}
