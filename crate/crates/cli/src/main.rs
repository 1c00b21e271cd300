//! `cc-critical`: command-line driver for the network-model library.

mod commands;
mod config;
mod output;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Failure classes, mapped to exit codes 2 and 3.
#[derive(Debug)]
pub enum CliError {
    /// Bad flags, config file, paths.
    Config(String),
    /// Singular systems, failed fits, failed checks.
    Numerical(String),
}

impl From<cc_core::Error> for CliError {
    fn from(e: cc_core::Error) -> Self {
        if e.is_numerical() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

#[derive(Parser, Debug)]
#[command(name = "cc-critical", version, about = "Chalker-Coddington network model at criticality")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by the commands that write files.
#[derive(Args, Debug, Clone)]
pub struct Common {
    /// Flat key=value file; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// File stem for the outputs (default: command name).
    #[arg(long)]
    pub name: Option<String>,
}

/// Options of the disorder-averaged commands.
#[derive(Args, Debug, Clone)]
pub struct EnsembleArgs {
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub samples: Option<u64>,
    /// Scattering angle; π/4 is critical.
    #[arg(long, allow_hyphen_values = true)]
    pub beta: Option<f64>,
    /// Checkpoint file; an existing one is resumed.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run the exactness suite; nonzero exit on any failure.
    Validate {
        /// Torus size of the Bloch and Kirchhoff checks.
        #[arg(long)]
        l: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// Exchange left and right turns in U_s (negative control).
        #[arg(long, hide = true)]
        swap_turns: bool,
        #[command(flatten)]
        common: Common,
    },
    /// Write links, nodes and medial edges as CSV.
    DumpGeometry {
        #[arg(long)]
        lx: Option<usize>,
        #[arg(long)]
        ly: Option<usize>,
        /// torus or cylinder
        #[arg(long)]
        topology: Option<String>,
        #[command(flatten)]
        common: Common,
    },
    /// Clean Bloch eigenphases and Z4 quadruplets of a disordered torus.
    Spectrum {
        #[arg(long)]
        l: Option<usize>,
        /// Size of the disordered torus for the quadruplet report.
        #[arg(long)]
        quad_l: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Σzz and Υzz on an absorbing torus, with level and ratio estimates.
    SigmaScan {
        #[arg(long)]
        l: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<f64>,
        /// Side of the block of source nodes.
        #[arg(long = "box")]
        box_size: Option<usize>,
        #[arg(long)]
        rmin: Option<f64>,
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        resamples: Option<usize>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Mean Kubo conductance of an L x L cylinder.
    Conductance {
        #[arg(long)]
        l: Option<usize>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Multifractal exponents of point-contact states.
    Multifractal {
        #[arg(long)]
        l: Option<usize>,
        /// Comma-separated q values; must include 1.
        #[arg(long, allow_hyphen_values = true)]
        q: Option<String>,
        #[arg(long)]
        rmin: Option<f64>,
        #[arg(long)]
        rmax: Option<f64>,
        #[arg(long)]
        resamples: Option<usize>,
        /// "x,y,dir" of the contact link.
        #[arg(long, allow_hyphen_values = true)]
        contacts: Option<String>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Circulation of point-contact currents around squares.
    Circulation {
        #[arg(long)]
        l: Option<usize>,
        /// Comma-separated square sides.
        #[arg(long)]
        sides: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        contacts: Option<String>,
        #[command(flatten)]
        ensemble: EnsembleArgs,
        #[command(flatten)]
        common: Common,
    },
    /// Truncated Fock-space identities.
    FockCheck {
        /// Number of links (1 or 2).
        #[arg(long)]
        links: Option<usize>,
        #[arg(long)]
        nmax: Option<usize>,
        #[arg(long, allow_hyphen_values = true)]
        mu: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[command(flatten)]
        common: Common,
    },
    /// Render CSV columns as an SVG scatter plot.
    Plot {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        x: String,
        /// One or more comma-separated column names.
        #[arg(long)]
        y: String,
        #[arg(long)]
        output: PathBuf,
        #[arg(long)]
        logx: bool,
        #[arg(long)]
        logy: bool,
        /// Reference slopes, comma-separated.
        #[arg(long, allow_hyphen_values = true)]
        slope: Option<String>,
        #[arg(long)]
        title: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = match &e {
                CliError::Config(m) => format!("configuration error: {m}"),
                CliError::Numerical(m) => format!("numerical failure: {m}"),
            };
            eprintln!("{msg}");
            ExitCode::from(e.exit_code())
        }
    }
}
