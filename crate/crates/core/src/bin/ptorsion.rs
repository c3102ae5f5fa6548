use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ptorsion::cli::{error_json, exit_code_for, run, Command, EXIT_SOLVER};
use ptorsion::config::{parse_value, RunConfig};

#[derive(Parser)]
#[command(name = "ptorsion", version, about = "p-torsion solver and inequality verification suite")]
struct Args {
    #[command(subcommand)]
    command: Sub,
    /// Run configuration file.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory; overrides [output] dir.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Replace the configured spacings with this one (e.g. 1/64).
    #[arg(long = "h-override", global = true, value_name = "H")]
    h_override: Option<String>,
    /// Write only the JSON document, no CSV or PGM files.
    #[arg(long = "json-only", global = true)]
    json_only: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Solve for the torsion function on every configured domain.
    Torsion,
    /// Compute Poincaré constants.
    Poincare,
    /// Run the inequality suite.
    Verify,
    /// Classify ball chains.
    Chain,
    /// Sample the convexity and Young inequalities.
    Young,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let command = match args.command {
        Sub::Torsion => Command::Torsion,
        Sub::Poincare => Command::Poincare,
        Sub::Verify => Command::Verify,
        Sub::Chain => Command::Chain,
        Sub::Young => Command::Young,
    };
    let fail = |e: ptorsion::Error| {
        print!("{}", error_json(Some(command), None, &e));
        ExitCode::from(exit_code_for(&e) as u8)
    };
    let Some(path) = args.config else {
        return fail(ptorsion::Error::Config {
            line: 0,
            message: "--config PATH is required".into(),
        });
    };
    let mut config = match RunConfig::from_file(&path) {
        Ok(c) => c,
        Err(ptorsion::Error::Io(e)) => {
            return fail(ptorsion::Error::Config {
                line: 0,
                message: format!("cannot read {}: {e}", path.display()),
            })
        }
        Err(e) => return fail(e),
    };
    if let Some(h) = &args.h_override {
        if let Err(e) = parse_value(h).and_then(|h| config.override_spacing(h)) {
            return fail(e);
        }
    }
    let outcome = run(command, &config);
    print!("{}", outcome.json);
    if let Some(dir) = args.out.or(config.output.clone()) {
        if let Err(e) = outcome.write(command, &dir, args.json_only) {
            eprintln!("{e}");
            return ExitCode::from(EXIT_SOLVER as u8);
        }
    }
    ExitCode::from(outcome.exit_code as u8)
}
