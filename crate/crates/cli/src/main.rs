use std::process::ExitCode;

use clap::Parser;

use omitlab::{run, Cli};

/// Honor `OMITLAB_THREADS` as a cap on worker threads.
fn configure_threads() {
    let Ok(value) = std::env::var("OMITLAB_THREADS") else {
        return;
    };
    match value.trim().parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global()
            {
                log::warn!("cannot size thread pool: {e}");
            }
        }
        _ => log::warn!("ignoring OMITLAB_THREADS={value}: expected a positive integer"),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    configure_threads();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(report) => {
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            if !cli.quiet {
                for line in &report.summary {
                    println!("{line}");
                }
                for f in &report.files {
                    println!("wrote {}", f.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
