mod args;
mod commands;
mod manifest;

use std::process::ExitCode;

use bcaid_core::Error;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};
use manifest::Manifest;

const EXIT_VALIDATION: u8 = 1;
const EXIT_RUNTIME: u8 = 2;

/// Bad input is the caller's to fix; anything else is a runtime failure.
fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Validation(_)
        | Error::Parse { .. }
        | Error::Config(_)
        | Error::NotFound(_)
        | Error::Capacity { .. } => EXIT_VALIDATION,
        _ => EXIT_RUNTIME,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // help and version go to stdout and are not errors
            return if e.use_stderr() { ExitCode::from(EXIT_VALIDATION) } else { ExitCode::SUCCESS };
        }
    };
    let filter = EnvFilter::try_new(&cli.global.log).unwrap_or_else(|_| EnvFilter::new("warn"));
    tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr).init();

    let g = &cli.global;
    let mut m = Manifest::new(cli.command.name());
    let result = match &cli.command {
        Command::Ingest(a) => commands::ingest(g, a, &mut m),
        Command::Verbalize(a) => commands::verbalize(g, a, &mut m),
        Command::Annotate(a) => commands::annotate(g, a, &mut m),
        Command::Summarize(a) => commands::summarize(g, a, &mut m),
        Command::Evaluate(a) => commands::evaluate(g, a, &mut m),
        Command::Baseline(a) => commands::baseline(g, a, &mut m),
        Command::Ora(a) => commands::ora(g, a, &mut m),
        Command::Wordfreq(a) => commands::wordfreq(g, a, &mut m),
        Command::Export(a) => commands::export(g, a, &mut m),
        Command::Serve(a) => commands::serve(g, a, &mut m),
    }
    .map_err(|e| {
        let code = exit_code(&e);
        (e, code)
    });

    m.finish(&result);
    if let Err(e) = m.write(&g.out) {
        eprintln!("bcaid: cannot write run manifest: {e}");
    }
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err((e, code)) => {
            eprintln!("bcaid {}: {e}", cli.command.name());
            ExitCode::from(code)
        }
    }
}
