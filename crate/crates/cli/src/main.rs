use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match agriprice_cli::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            // --help and --version
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let rendered = e.render().to_string();
            let first = rendered.lines().next().unwrap_or_default();
            let msg = first.strip_prefix("error: ").unwrap_or(first);
            eprintln!("error[usage]: {msg} (see --help)");
            return ExitCode::from(agriprice_cli::EXIT_USAGE);
        }
    };
    agriprice_cli::init_logging(cli.verbose);
    match agriprice_cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error[{}]: {}", e.kind(), e);
            ExitCode::from(e.exit_code())
        }
    }
}
