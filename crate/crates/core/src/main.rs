use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ristrack::cli::{exit_code, load_config, output_override, parse_vary, run_scenario, run_sweep};
use ristrack::{selftest, Error};

#[derive(Parser)]
#[command(
    name = "ristrack",
    version,
    about = "RIS-assisted mmWave beam tracking simulator"
)]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file.
    Run { config: PathBuf },
    /// Run a scenario once per value of one parameter.
    Sweep {
        config: PathBuf,
        /// section.key=v1,v2,...
        #[arg(long)]
        vary: String,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn run(args: Args) -> Result<bool, Error> {
    match args.command {
        Command::Run { config } => {
            let mut scenario = load_config(&config)?;
            if let Some(dir) = output_override() {
                scenario.output_dir = dir;
            }
            let outcomes = run_scenario(&scenario)?;
            println!(
                "{} runs written to {}",
                outcomes.len(),
                scenario.output_dir.display()
            );
            print!(
                "{}",
                std::fs::read_to_string(scenario.output_dir.join("summary.txt"))
                    .unwrap_or_default()
            );
        }
        Command::Sweep { config, vary } => {
            let (key, values) = parse_vary(&vary)?;
            let src = std::fs::read_to_string(&config).map_err(|e| Error::Io {
                path: config.clone(),
                source: e,
            })?;
            let file = run_sweep(&src, &config, &key, &values, output_override().as_deref())?;
            println!("sweep written to {}", file.display());
        }
        Command::Selftest => {
            let results = selftest::run_all();
            let mut failed = 0;
            for r in &results {
                println!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.name,
                    r.detail
                );
                failed += usize::from(!r.passed);
            }
            if failed > 0 {
                eprintln!("{failed} self-checks failed");
                return Ok(false);
            }
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    match run(Args::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
