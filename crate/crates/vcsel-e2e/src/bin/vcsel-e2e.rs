use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use vcsel_e2e::cli::{self, Overrides};

#[derive(Parser)]
#[command(version, about = "Run VCSEL link experiments from TOML configs")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write its artifacts.
    Run {
        config: PathBuf,
        /// Output directory (overrides `out_dir`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Root seed (overrides `seed`).
        #[arg(long)]
        seed: Option<u64>,
        /// Symbol cap per SNR point of error-rate sweeps.
        #[arg(long, value_name = "SYMBOLS")]
        budget: Option<u64>,
    },
    /// Check a config without running anything.
    Validate { config: PathBuf },
    /// Print the built-in laser profiles.
    ListProfiles,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let result = match args.command {
        Command::Run { config, out, seed, budget } => {
            let t0 = Instant::now();
            cli::run(&config, &Overrides { out, seed, budget }).map(|s| {
                println!("{}", serde_json::to_string_pretty(&s.metrics).unwrap_or_default());
                eprintln!("wrote {} files to {} in {:.1?}", s.files.len() + 1, s.out_dir.display(), t0.elapsed());
            })
        }
        Command::Validate { config } => cli::validate(&config).map(|_| println!("ok")),
        Command::ListProfiles => {
            let mut text = String::new();
            for (name, p) in cli::list_profiles() {
                text += &format!("[{name}]\n{}\n", toml::to_string(&p).unwrap_or_default());
            }
            // a closed pipe (`| head`) is not an error
            let _ = std::io::stdout().lock().write_all(text.as_bytes());
            Ok(())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
