//! Command-line entry point: `dmpdiffuse run|compare|converge|mesh-gen --config <path> [--out <dir>]`.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{error::ErrorKind, Parser, Subcommand};

use crate::config::load_config;
use crate::driver;
use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_SOLVER: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "dmpdiffuse", version, about = "Bound-preserving transient diffusion solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, clap::Args)]
struct Common {
    /// TOML configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `[output] dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the single configured scheme.
    Run(Common),
    /// Run all configured schemes on one mesh and summarize bound violations.
    Compare(Common),
    /// Mesh refinement study with dt proportional to h^2.
    Converge(Common),
    /// Write the configured mesh as Gmsh and VTK.
    MeshGen(Common),
}

/// Maps an error to the process exit code.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Io(_) => EXIT_SOLVER,
        e if e.is_solver_failure() => EXIT_SOLVER,
        _ => EXIT_CONFIG,
    }
}

/// Parses arguments (including the program name), runs the subcommand and
/// returns the exit code.
pub fn run_cli<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_CONFIG,
            };
        }
    };
    let (common, cmd) = match &cli.command {
        Command::Run(c) => (c, "run"),
        Command::Compare(c) => (c, "compare"),
        Command::Converge(c) => (c, "converge"),
        Command::MeshGen(c) => (c, "mesh-gen"),
    };
    let spec = match load_config(&common.config) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("dmpdiffuse {cmd}: {e}");
            return exit_code(&e);
        }
    };
    let out = common.out.clone().unwrap_or_else(|| spec.output.dir.clone());
    let result = match cli.command {
        Command::Run(_) => driver::run(&spec, &out),
        Command::Compare(_) => driver::compare(&spec, &out).map(|(r, _)| r),
        Command::Converge(_) => driver::converge(&spec, &out).map(|(r, _)| r),
        Command::MeshGen(_) => driver::mesh_gen(&spec, &out),
    };
    match result {
        Ok(report) => {
            print!("{}", report.text);
            EXIT_OK
        }
        Err(e) => {
            eprintln!("dmpdiffuse {cmd}: {e}");
            exit_code(&e)
        }
    }
}
