//! Command-line front end for HKRR experiments: `gen`, `fit`, `cv`, `eval` and
//! `toymap`. Exit codes are 0 on success, 2 for usage or configuration errors
//! and 3 for numerical failures.

pub mod args;
pub mod commands;
pub mod config;
pub mod output;

pub use args::{Cli, Command};
pub use config::RunConfig;

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NUMERIC: u8 = 3;

pub fn run(cli: &Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Gen(a) => commands::gen(a),
        Command::Fit(a) => commands::fit(a),
        Command::Cv(a) => commands::cv(a),
        Command::Eval(a) => commands::eval(a),
        Command::Toymap(a) => commands::toymap(a),
    }
}

/// Exit code for a failed command: numerical failures of the core library map
/// to [`EXIT_NUMERIC`], everything else to [`EXIT_USAGE`].
pub fn exit_code(err: &anyhow::Error) -> u8 {
    let numeric = err
        .chain()
        .filter_map(|e| e.downcast_ref::<hkrr::Error>())
        .any(hkrr::Error::is_numeric);
    if numeric {
        EXIT_NUMERIC
    } else {
        EXIT_USAGE
    }
}
