use std::process::ExitCode;
use std::sync::Arc;

use clap::Parser;
use infodensity_cli::cli::{Cli, Command};
use infodensity_cli::commands::{self, init_logging};
use infodensity_cli::{server, CliError, EngineConfig};

async fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = EngineConfig::resolve(&cli.globals)?;
    init_logging(cfg.log_level()?);
    match cli.command {
        Command::Score(args) => {
            let summary = commands::score(&cfg, &args).await?;
            println!("{}", summary.render());
        }
        Command::Analyze(args) => {
            let summary = commands::analyze(&cfg, &args).await?;
            println!("{}", commands::render_analysis(&summary));
        }
        Command::Serve(args) => {
            if let Some(bind) = args.bind {
                cfg.service.bind = bind;
            }
            cfg.validate()?;
            let engine = Arc::new(commands::build_engine(&cfg)?);
            server::serve(engine, cfg.bind_addr()?, server::shutdown_signal()).await?;
        }
        Command::MockDemo(args) => {
            let out = commands::mock_demo(&cfg, &args).await?;
            println!("{}", commands::render_demo(&out));
        }
    }
    Ok(())
}

#[tokio::main]
async fn main() -> ExitCode {
    match run(Cli::parse()).await {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            tracing::error!(error = %e, "command failed");
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
