use clap::Parser;
use tcs_cli::cli::{execute, Cli, WORKERS_ENV};

fn main() {
    let cli = Cli::parse();
    let level = if cli.command.quiet() { "warn" } else { "info" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Ok(v) = std::env::var(WORKERS_ENV) {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                    log::warn!("{WORKERS_ENV}: {e}");
                }
            }
            _ => {
                eprintln!("config error: {WORKERS_ENV} must be a positive integer, got `{v}`");
                std::process::exit(2);
            }
        }
    }
    if let Err(e) = execute(cli) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
