use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mftrpo::harness::{self, RunOptions};
use mftrpo::{Error, Result};

#[derive(Parser)]
#[command(name = "mftrpo", version, about = "Mean-field game solvers and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the configured solver for every seed and write CSV/SVG output.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Exploitability and equilibrium residuals of a stored policy and mean field.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        policy: PathBuf,
        #[arg(long)]
        mu: PathBuf,
    },
    /// Monotonicity probe and mixing fit; writes assumptions.csv.
    CheckAssumptions {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// List or write the bundled configs.
    Presets {
        #[command(subcommand)]
        action: PresetAction,
    },
}

#[derive(Subcommand)]
enum PresetAction {
    List,
    Write {
        name: String,
        /// Destination file; defaults to `<name>.cfg`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out_dir,
            seed_override,
        } => {
            let cfg = harness::parse_config(&config)?;
            let opts = RunOptions {
                out_dir,
                seed_override,
                threads: harness::threads_from_env()?,
            };
            let out = harness::run_experiment(&cfg, &opts)?;
            for r in &out.runs {
                let phi = r.trace.final_exploitability.or(r.trace.last_exploitability());
                println!(
                    "seed {}: initial exploitability {}, final {}",
                    r.seed,
                    fmt(r.trace.initial.exploitability),
                    fmt(phi)
                );
            }
            println!("wrote {} files to {}", out.files.len(), out.dir.display());
        }
        Command::Eval { config, policy, mu } => {
            let cfg = harness::parse_config(&config)?;
            let threads = harness::threads_from_env()?;
            let summary = harness::with_threads(threads, || harness::evaluate_files(&cfg, &policy, &mu))??;
            print!("{}", summary.to_lines());
        }
        Command::CheckAssumptions { config, out_dir } => {
            let cfg = harness::parse_config(&config)?;
            let dir = out_dir.unwrap_or_else(|| cfg.output.directory.clone());
            let threads = harness::threads_from_env()?;
            let report = harness::with_threads(threads, || harness::write_assumptions(&cfg, &dir))??;
            print!("{}", report.to_csv());
            for n in &report.notes {
                println!("note: {n}");
            }
            println!("wrote {}", dir.join("assumptions.csv").display());
        }
        Command::Presets { action } => match action {
            PresetAction::List => {
                for (name, text) in harness::PRESETS {
                    println!("{name:<20} {}", harness::preset_summary(text));
                }
            }
            PresetAction::Write { name, out } => {
                let text =
                    harness::preset(&name).ok_or_else(|| Error::InvalidArgument(format!("unknown preset `{name}`")))?;
                let path = out.unwrap_or_else(|| Path::new(&name).with_extension("cfg"));
                std::fs::write(&path, text).map_err(|source| Error::Io {
                    path: path.clone(),
                    source,
                })?;
                println!("wrote {}", path.display());
            }
        },
    }
    Ok(())
}

fn fmt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.6}")).unwrap_or_else(|| "n/a".into())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let msg = e.to_string().replace('\\', "\\\\").replace('"', "\\\"").replace('\n', " ");
            eprintln!("error: kind={} msg=\"{msg}\"", e.kind());
            ExitCode::FAILURE
        }
    }
}
