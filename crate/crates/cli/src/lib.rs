//! The `paramix` command-line tool.
//!
//! Every subcommand writes its primary output to `--out` (or stdout) and a
//! `<out>.manifest.json` run manifest holding the resolved configuration,
//! the seed, the arguments and SHA-256 digests of all inputs and outputs.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::Parser;

pub mod args;
mod commands;
pub mod manifest;

pub use args::Cli;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_UNKNOWN_COMMAND: i32 = 64;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Lib(#[from] paramix::Error),
    #[error("{}: {source}", path.display())]
    File {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
    #[error("replayed command exited with status {0}")]
    Replay(i32),
}

impl CliError {
    pub fn file(path: &Path, source: std::io::Error) -> Self {
        CliError::File {
            path: path.to_path_buf(),
            source,
        }
    }

    /// Path context for library errors raised while handling `path`.
    pub fn at(path: &Path, err: paramix::Error) -> Self {
        match err {
            paramix::Error::Io(source) => CliError::file(path, source),
            e if e.is_numerical() => CliError::Lib(e),
            e => CliError::Usage(format!("{}: {e}", path.display())),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Lib(e) if e.is_numerical() => EXIT_NUMERICAL,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Replay(code) => *code,
            _ => EXIT_VALIDATION,
        }
    }
}

/// Parses `argv` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let argv: Vec<OsString> = argv.into_iter().map(Into::into).collect();
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                ErrorKind::InvalidSubcommand => EXIT_UNKNOWN_COMMAND,
                _ => EXIT_VALIDATION,
            };
            let _ = e.print();
            return code;
        }
    };
    let rest: Vec<String> = argv
        .iter()
        .skip(1)
        .map(|a| a.to_string_lossy().into_owned())
        .collect();
    match commands::execute(cli.command, rest) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
