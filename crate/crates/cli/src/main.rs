use std::process::ExitCode;

use clap::{CommandFactory, Parser};
use coexbo_cli::{export_session, replay, run_suite, run_sweep, Cli, Command, SuiteSpec};
use tracing_subscriber::EnvFilter;

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Bench(a) => {
            let spec = SuiteSpec::from_bench(&a)?;
            let report = run_suite(&spec, &a.suite.out)?;
            print!("{}", coexbo_cli::summary_csv(&report.summary)?);
            if !report.manifest.failures.is_empty() {
                eprintln!("{} run(s) failed; see manifest.json", report.manifest.failures.len());
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Sweep(a) => {
            let failed: usize = run_sweep(&a)?.iter().map(|m| m.failures.len()).sum();
            print!("{}", std::fs::read_to_string(a.suite.out.join("sweep_summary.csv"))?);
            if failed > 0 {
                eprintln!("{failed} run(s) failed; see the manifests");
                return Ok(ExitCode::FAILURE);
            }
        }
        Command::Replay(a) => {
            let text = replay(&a.out)?;
            if a.check {
                let existing = std::fs::read_to_string(a.out.join("summary.csv"))?;
                if existing != text {
                    eprintln!("replayed summary differs from summary.csv");
                    return Ok(ExitCode::FAILURE);
                }
            }
            print!("{text}");
        }
        Command::Serve(a) => {
            let (bind, dir) = coexbo_service::env_settings();
            let bind = a.bind.unwrap_or(bind);
            let dir = a.data_dir.unwrap_or(dir);
            tokio::runtime::Runtime::new()?.block_on(coexbo_service::serve(&bind, dir))?;
        }
        Command::Export(a) => {
            let text = export_session(&a.session)?;
            match a.out {
                Some(p) => std::fs::write(p, text)?,
                None => println!("{text}"),
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("warn")))
        .with_writer(std::io::stderr)
        .init();
    if std::env::args_os().len() <= 1 {
        Cli::command().print_help().ok();
        println!();
        return ExitCode::SUCCESS;
    }
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
