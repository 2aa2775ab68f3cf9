//! `loopsim`: compile gate programs for the loop processor, run them under
//! the ideal or realistic model, rebuild the reference tables and figure
//! data, and check the symbolic gate identities.
//!
//! Every subcommand exits 0 on success and 1 when validation or
//! verification fails; clap reports usage errors with exit code 2.

// validation guards are written `!(x > 0.0)` so that NaN fails them too
#![allow(clippy::neg_cmp_op_on_partial_ord)]

/// stdout print that dies quietly with the conventional SIGPIPE code when
/// the reader has gone away (`loopsim run ... | head`), instead of the
/// default broken-pipe panic.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        if writeln!(std::io::stdout(), $($arg)*).is_err() {
            std::process::exit(141);
        }
    }};
}

mod artifacts;
mod commands;
mod manifest;
mod program;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "loopsim", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compile a gate program into a time-binned schedule and driver table.
    Compile(commands::CompileArgs),
    /// Run a program on the simulated loop and report the output state.
    Run(commands::RunArgs),
    /// Re-create a reference bundle: table1, fig3, fig4 or fig5.
    Reproduce(commands::ReproduceArgs),
    /// Verify the measurement-induced cubic gate identity exactly.
    VerifyCubic(commands::VerifyCubicArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Compile(args) => commands::compile(args),
        Command::Run(args) => commands::run(args),
        Command::Reproduce(args) => commands::reproduce(args),
        Command::VerifyCubic(args) => commands::verify_cubic(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
