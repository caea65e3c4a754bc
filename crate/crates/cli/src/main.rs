mod args;
mod commands;

use std::process::ExitCode;

use clap::Parser;
use falltime_core::Error;

use args::Cli;

/// Process exit code for each error kind. Usage errors exit with 64.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Io { .. } => 2,
        Error::Format { .. } => 3,
        Error::InvalidParams(_) => 4,
        Error::InvalidConfig(_) => 5,
        Error::IntegrationDiverged { .. } => 6,
        Error::NonFiniteState => 7,
        Error::CalibrationFailed(_) => 8,
        Error::UnknownFeatureSet(_) => 9,
        Error::DegenerateSeries(_) => 10,
        Error::LeadTimeOutOfRange(_) => 11,
        Error::TooFewTrajectories { .. } => 12,
        Error::SingularR => 13,
        Error::InsufficientData(_) => 14,
        Error::NoConvergence { .. } => 15,
        Error::NoFeasibleLeadTime => 16,
        Error::HashMismatch(_) => 17,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 64 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.common.log_level)
        .format_timestamp(None)
        .init();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
