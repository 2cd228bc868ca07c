//! `dipole-backflow` command-line front end.
//!
//! Exit codes: 0 success, 2 usage or configuration error, 3 numerical
//! divergence, 4 acceptance failure.

mod commands;
mod range;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dipole_backflow::FormulaSource;

use crate::range::AxisRange;

#[derive(Parser, Debug)]
#[command(name = "dipole-backflow", version, about = "Ensemble dynamics and information backflow of a driven two-level dipole")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Mode {
    Derived,
    AsPrinted,
}

impl From<Mode> for FormulaSource {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Derived => FormulaSource::Derived,
            Mode::AsPrinted => FormulaSource::AsPrinted,
        }
    }
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum Format {
    Csv,
    Json,
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// Parameter file with keys omega, kappa, beta_s, i0, beta.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "derived")]
    mode: Mode,
    /// Output file; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Print the closed-form constants for a configuration.
    Derive {
        #[command(flatten)]
        common: Common,
    },
    /// Averaged Bloch vector and purity over time.
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        m0: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        w0: f64,
        /// Horizon in time units of the configuration.
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Trace distance of the antipodal pair at angle theta and its rate.
    Distance {
        #[command(flatten)]
        common: Common,
        /// Pair angle in [0, pi/2]; 0 is the inversion pair.
        #[arg(long)]
        theta: f64,
        #[arg(long)]
        tmax: f64,
        #[arg(long, default_value_t = 200)]
        steps: usize,
    },
    /// Backflow measure maximised over the pair angle.
    Nonmark {
        #[command(flatten)]
        common: Common,
        /// Horizon: physical time with --config, else in units of 1/gamma.
        #[arg(long)]
        tmax: f64,
        /// Reduced-model lambda/gamma (without --config).
        #[arg(long)]
        lambda: Option<f64>,
        /// Reduced-model Omega/gamma (without --config).
        #[arg(long)]
        omega: Option<f64>,
        #[arg(long, default_value_t = dipole_backflow::blp::DEFAULT_THETA_GRID)]
        theta_grid: usize,
        /// Also report the integral of the pointwise maximum of both branch integrands.
        #[arg(long)]
        literal_eq_nt: bool,
    },
    /// Both branch integrals over a (lambda, Omega, T) grid.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// MIN:MAX:N
        #[arg(long)]
        lambda: AxisRange,
        /// MIN:MAX:N
        #[arg(long)]
        omega: AxisRange,
        /// MIN:MAX:N
        #[arg(long)]
        tmax: AxisRange,
    },
    /// Monte-Carlo check of the closed forms.
    McVerify {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        m0: f64,
        #[arg(long, default_value_t = -1.0, allow_hyphen_values = true)]
        w0: f64,
        /// Horizon; defaults to 5/gamma.
        #[arg(long)]
        horizon: Option<f64>,
        /// Grid step; defaults to the largest step the field sampler allows.
        #[arg(long)]
        dt: Option<f64>,
        /// Run outside the weak-coupling regime.
        #[arg(long)]
        allow_strong: bool,
        /// Write the first field realisation as `t,E` CSV.
        #[arg(long)]
        dump_field: Option<PathBuf>,
    },
    /// Averaged periodogram of sampled fields with a Lorentzian fit.
    Spectrum {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 200)]
        n: usize,
        /// Realisation length in units of 1/beta.
        #[arg(long, default_value_t = 200.0)]
        length: f64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
