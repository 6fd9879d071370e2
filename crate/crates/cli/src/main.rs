//! `pontryagin`: run realization computations on system files.
//!
//! Systems travel as JSON system files over files or standard streams, so
//! commands compose in pipelines:
//!
//! ```text
//! pontryagin example --name recip-blaschke --a 0.5 | pontryagin classify --format text
//! ```

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use output::{emit, CliError, Format};

#[derive(Parser)]
#[command(name = "pontryagin", version, about = "Realizations of passive systems on Pontryagin spaces")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
pub struct Global {
    /// Numerical tolerance; each command has its own default when unset.
    #[arg(long, global = true, env = "PONTRYAGIN_TOL")]
    pub tol: Option<f64>,
    /// Seed for every randomized step.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Write the result here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
}

/// A system file path; `-` or nothing reads standard input.
#[derive(Args, Clone)]
pub struct Input {
    pub input: Option<PathBuf>,
}

#[derive(Subcommand)]
pub enum Command {
    /// Passivity class of the system operator and structural properties of the state.
    Classify(Input),
    /// Evaluate the transfer function at one point.
    Transfer {
        #[command(flatten)]
        input: Input,
        /// `re` or `re,im`.
        #[arg(long, allow_hyphen_values = true)]
        z: String,
    },
    /// Markov parameters `D, CB, CAB, ...` up to index `n`.
    Markov {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 8)]
        n: usize,
    },
    /// The dual system.
    Dual(Input),
    /// Restriction to an invariant or minimal state subspace.
    Restrict {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        which: Which,
    },
    /// The system extended by its defect channels; its system operator is unitary.
    JuliaEmbed(Input),
    /// A truncated dilation of the given depth.
    Dilate {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum, default_value_t = Kind::Conservative)]
        kind: Kind,
        #[arg(long, default_value_t = 8)]
        depth: usize,
    },
    /// Sampled lower bound for the negative squares of the transfer function.
    Negsq {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sampler: Sampler,
    },
    /// Whether the state negative index matches the negative squares of the transfer function.
    Admissible {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sampler: Sampler,
    },
    /// Sampled energy order against another realization of the same transfer function.
    Compare {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        other: PathBuf,
        #[arg(long, default_value_t = pontryagin::optimality::DEFAULT_TRIALS)]
        trials: usize,
        #[arg(long, default_value_t = pontryagin::optimality::DEFAULT_HORIZON)]
        horizon: usize,
    },
    /// Decide unitary similarity with another minimal system.
    Similar {
        #[command(flatten)]
        input: Input,
        #[arg(long)]
        other: PathBuf,
    },
    /// Realization of a defect function of the transfer function.
    Defect {
        #[command(flatten)]
        input: Input,
        #[arg(long, value_enum)]
        side: SideArg,
    },
    /// Compare vanishing defect functions with containments of the controllable and observable parts.
    Sepontulos(Input),
    /// Compare similarity of minimal passive realizations with the negative squares of the extended function.
    Kulma {
        #[command(flatten)]
        input: Input,
        #[command(flatten)]
        sampler: Sampler,
    },
    /// Generate a seeded corpus from a JSON spec file.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        /// Emit only this entry as a single system file.
        #[arg(long)]
        index: Option<usize>,
    },
    /// A named closed-form example.
    Example {
        #[arg(long, value_enum)]
        name: ExampleName,
        #[arg(long, allow_hyphen_values = true)]
        a: f64,
    },
    /// Test the defect inequalities on a grid of the unit circle (Hilbert channels only).
    BoundaryCheck {
        #[command(flatten)]
        input: Input,
        #[arg(long, default_value_t = 256)]
        grid: usize,
    },
}

#[derive(Args, Clone, Copy)]
pub struct Sampler {
    #[arg(long, default_value_t = 10)]
    pub rounds: usize,
    #[arg(long, default_value_t = 8)]
    pub points: usize,
    /// Defaults to `0.4 / max(1, rho(A))`.
    #[arg(long)]
    pub radius: Option<f64>,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Which {
    Controllable,
    Observable,
    Simple,
    Min1,
    Min2,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum Kind {
    Conservative,
    Isometric,
    Coisometric,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum SideArg {
    Left,
    Right,
}

#[derive(ValueEnum, Clone, Copy, Debug)]
pub enum ExampleName {
    Blaschke,
    RecipBlaschke,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let name = commands::name(&cli.command);
    let result = commands::run(&cli.command, &cli.global);
    match emit(name, result, &cli.global) {
        Ok(code) => code,
        Err(CliError { message, .. }) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}
