//! Command-line arguments and dispatch.

use std::io::Read;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use transferlab::Tolerance;

use crate::commands::{
    run_analyze, run_bh_demo, run_construct_complete, run_construct_from_expectation, run_enumerate, run_sample,
    run_verify, DemoParams, DensityChoice, Outcome,
};
use crate::document::{parse_operator_document, parse_system_document};
use crate::error::{CliError, EXIT_OK};
use crate::report::Format;

#[derive(Debug, Parser)]
#[command(name = "transferlab", version, about = "Transfer operators of finite-dimensional C*-dynamical systems")]
pub struct Cli {
    /// Equality tolerance for elements and maps.
    #[arg(long, global = true, default_value_t = 1e-9)]
    pub tol: f64,

    /// Allowed negativity of eigenvalues in positivity tests.
    #[arg(long, global = true, default_value_t = 1e-10)]
    pub psd_tol: f64,

    #[arg(long, global = true, value_enum, default_value_t = FormatArg::Human)]
    pub format: FormatArg,

    /// Write the result to this file instead of standard output.
    #[arg(short, long, global = true)]
    pub output: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Human,
    Machine,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Human => Format::Human,
            FormatArg::Machine => Format::Machine,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Kernel, range, completeness and parameter space of a system.
    Analyze {
        /// System document; standard input when omitted or `-`.
        input: Option<PathBuf>,
        #[command(flatten)]
        density: DensityArgs,
    },
    /// Check a candidate operator against the transfer axioms.
    Verify {
        system: PathBuf,
        operator: PathBuf,
        /// Also fail when the operator is degenerate.
        #[arg(long)]
        require_nondegenerate: bool,
    },
    /// Build a transfer operator.
    #[command(subcommand)]
    Construct(ConstructCommand),
    /// Commutative systems on finitely many points.
    #[command(subcommand)]
    Commutative(CommutativeCommand),
    /// Isometry families.
    #[command(subcommand)]
    Bh(BhCommand),
}

#[derive(Debug, Subcommand)]
pub enum ConstructCommand {
    /// The complete transfer operator, when the range is hereditary.
    Complete { input: Option<PathBuf> },
    /// The transfer operator of a conditional expectation onto the range.
    FromExpectation { system: PathBuf, expectation: PathBuf },
}

#[derive(Debug, Subcommand)]
pub enum CommutativeCommand {
    /// Every partial self-map of a small point set.
    Enumerate {
        #[arg(long)]
        points: usize,
    },
    /// A random non-degenerate transfer operator.
    Sample {
        input: Option<PathBuf>,
        #[arg(long, env = "TRANSFERLAB_SEED", default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Debug, Subcommand)]
pub enum BhCommand {
    /// Analyze a random isometry family.
    Demo {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        /// Ambient dimension; defaults to n·d.
        #[arg(long = "big-d")]
        big_d: Option<usize>,
        #[arg(long, env = "TRANSFERLAB_SEED", default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        density: DensityArgs,
    },
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    /// Density matrix: `diag w1 w2 ..`, `uniform`, or a JSON matrix.
    #[arg(long, conflicts_with = "mu")]
    pub rho: Option<String>,
    /// Diagonal weights.
    #[arg(long)]
    pub mu: Option<String>,
    /// Basis in which `--mu` is diagonal: `identity`, `hadamard`, `fourier`, or a JSON matrix.
    #[arg(long, requires = "mu")]
    pub unitary: Option<String>,
}

impl DensityArgs {
    fn choice(&self) -> Option<DensityChoice> {
        match (&self.rho, &self.mu) {
            (Some(r), _) => Some(DensityChoice::Rho(r.clone())),
            (None, Some(m)) => Some(DensityChoice::Mu { mu: m.clone(), unitary: self.unitary.clone() }),
            (None, None) => None,
        }
    }
}

pub fn read_input(path: Option<&PathBuf>) -> Result<String, CliError> {
    match path {
        Some(p) if p.as_os_str() != "-" => std::fs::read_to_string(p).map_err(|source| CliError::Io {
            path: p.display().to_string(),
            source,
        }),
        _ => {
            let mut s = String::new();
            std::io::stdin()
                .read_to_string(&mut s)
                .map_err(|source| CliError::Io { path: "<stdin>".into(), source })?;
            Ok(s)
        }
    }
}

/// Runs a parsed command line and returns what to print.
pub fn run(cli: &Cli) -> Result<Outcome, CliError> {
    let tol = Tolerance::new(cli.tol, cli.psd_tol)?;
    let format = Format::from(cli.format);
    let ok = |text: String| Outcome { text, code: EXIT_OK };
    match &cli.command {
        Command::Analyze { input, density } => {
            let doc = parse_system_document(&read_input(input.as_ref())?, &tol)?;
            Ok(ok(run_analyze(&doc, &tol, density.choice().as_ref())?.render(format)))
        }
        Command::Verify { system, operator, require_nondegenerate } => {
            let doc = parse_system_document(&read_input(Some(system))?, &tol)?;
            let op = parse_operator_document(&read_input(Some(operator))?, &tol)?;
            let (report, code) = run_verify(&doc, &op, &tol, *require_nondegenerate)?;
            Ok(Outcome { text: report.render(format), code })
        }
        Command::Construct(ConstructCommand::Complete { input }) => {
            let doc = parse_system_document(&read_input(input.as_ref())?, &tol)?;
            run_construct_complete(&doc, &tol, format)
        }
        Command::Construct(ConstructCommand::FromExpectation { system, expectation }) => {
            let doc = parse_system_document(&read_input(Some(system))?, &tol)?;
            let e = parse_operator_document(&read_input(Some(expectation))?, &tol)?;
            run_construct_from_expectation(&doc, &e, &tol, format)
        }
        Command::Commutative(CommutativeCommand::Enumerate { points }) => run_enumerate(*points, &tol, format),
        Command::Commutative(CommutativeCommand::Sample { input, seed }) => {
            let doc = parse_system_document(&read_input(input.as_ref())?, &tol)?;
            run_sample(&doc, *seed, &tol, format)
        }
        Command::Bh(BhCommand::Demo { n, d, big_d, seed, density }) => {
            let params = DemoParams { n: *n, d: *d, big_d: *big_d, seed: *seed };
            Ok(ok(run_bh_demo(&params, density.choice().as_ref(), &tol)?.render(format)))
        }
    }
}
