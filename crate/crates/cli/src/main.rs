//! `gmmot` command-line tool.
//!
//! Exit codes: 0 on success, 1 for usage and input errors, 2 when a numerical
//! stage fails (the message names the stage).

mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match args::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests also come through here.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &anyhow::Error) -> u8 {
    let numerical = e
        .chain()
        .filter_map(|c| c.downcast_ref::<gmmot::Error>())
        .any(gmmot::Error::is_numerical);
    if numerical { 2 } else { 1 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use anyhow::Context;

    #[test]
    fn exit_codes_follow_the_error_kind() {
        let numerical: anyhow::Result<()> =
            Err(gmmot::Error::Numerical { stage: "dadil".into(), message: "boom".into() }.into());
        let err = numerical.context("dictionary learning").unwrap_err();
        assert_eq!(exit_code(&err), 2);
        assert!(format!("{err:#}").contains("dadil"));
        assert_eq!(exit_code(&anyhow::Error::from(gmmot::Error::InvalidInput("x".into()))), 1);
        assert_eq!(exit_code(&anyhow::anyhow!("plain")), 1);
    }
}
