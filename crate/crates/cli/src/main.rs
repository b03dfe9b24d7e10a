use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use resochain_cli::commands;
use resochain_cli::config::Config;
use resochain_cli::CliError;

#[derive(Parser)]
#[command(version, about = "Localisation experiments in time-modulated resonator chains")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Band structure over the Brillouin zone (band.csv, gaps.csv, band.svg)
    Band(Common),
    /// Super-cell modes and degrees of localisation (modes.csv, dol.svg)
    Modes(Common),
    /// Time evolution and d_*(t) (dstar.csv, snapshots.csv, SVGs)
    Evolve(Common),
    /// Toeplitz determinant roots for single-resonator chains (roots.csv)
    Roots(Common),
    /// Band and momentum gaps only (gaps.csv)
    Gaps(Common),
}

#[derive(Args)]
struct Common {
    /// TOML experiment configuration
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides output.directory)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, common): (fn(&Config, &std::path::Path) -> Result<String, CliError>, Common) = match cli.command {
        Command::Band(c) => (commands::run_band, c),
        Command::Modes(c) => (commands::run_modes, c),
        Command::Evolve(c) => (commands::run_evolve, c),
        Command::Roots(c) => (commands::run_roots, c),
        Command::Gaps(c) => (commands::run_gaps, c),
    };
    env_logger::Builder::new()
        .filter_level(if common.verbose { log::LevelFilter::Info } else { log::LevelFilter::Warn })
        .parse_default_env()
        .init();
    if let Some(n) = common.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start thread pool: {e}");
            return ExitCode::from(3);
        }
    }
    let result = Config::load(&common.config).and_then(|cfg| {
        let out = common.out.clone().unwrap_or_else(|| PathBuf::from(&cfg.output.directory));
        log::info!("writing to {}", out.display());
        run(&cfg, &out)
    });
    match result {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
