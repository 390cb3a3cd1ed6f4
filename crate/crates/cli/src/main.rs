use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use qecqm_cli::config::{parse_config, ConfigError};
use qecqm_cli::corpus::{run_corpus, CorpusOptions, Status};
use qecqm_cli::report::Format;
use qecqm_cli::runner::run_config;

#[derive(Parser)]
#[command(name = "qecqm", version, about = "Run error-corrected metrology scenarios")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and write its reports.
    Run {
        config: PathBuf,
        /// Reports go to DIR/<scenario name>/.
        #[arg(long, env = "QECQM_OUT_DIR", default_value = "qecqm-out")]
        out: PathBuf,
        /// Write only this format; both by default.
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        /// Override the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Validate a scenario file without running it.
    Check { config: PathBuf },
    /// Run every shipped scenario and compare against golden reports.
    Corpus {
        #[arg(long)]
        golden: Option<PathBuf>,
        /// Rewrite the golden files instead of comparing.
        #[arg(long)]
        bless: bool,
        /// Also write every report under DIR/<scenario name>/.
        #[arg(long, env = "QECQM_OUT_DIR")]
        out: Option<PathBuf>,
        #[arg(long, value_enum)]
        format: Option<FormatArg>,
        #[arg(long)]
        workers: Option<usize>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

fn formats(f: Option<FormatArg>) -> Vec<Format> {
    match f {
        Some(FormatArg::Csv) => vec![Format::Csv],
        Some(FormatArg::Json) => vec![Format::Json],
        None => vec![Format::Csv, Format::Json],
    }
}

fn init_pool(workers: Option<usize>) -> Result<()> {
    if let Some(n) = workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("starting the worker pool")?;
    }
    Ok(())
}

fn load(path: &PathBuf) -> Result<Vec<u8>> {
    std::fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn real_main() -> Result<ExitCode> {
    match Cli::parse().command {
        Command::Check { config } => match parse_config(&load(&config)?) {
            Ok(cfg) => {
                println!("ok: {} ({} analyses)", cfg.name, cfg.outputs.len());
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => {
                report_config_error(&config, &e);
                Ok(ExitCode::from(2))
            }
        },
        Command::Run {
            config,
            out,
            format,
            seed,
            workers,
        } => {
            init_pool(workers)?;
            let mut cfg = match parse_config(&load(&config)?) {
                Ok(cfg) => cfg,
                Err(e) => {
                    report_config_error(&config, &e);
                    return Ok(ExitCode::from(2));
                }
            };
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let report = match run_config(&cfg) {
                Ok(r) => r,
                Err(issues) => {
                    report_config_error(&config, &ConfigError::Invalid(issues));
                    return Ok(ExitCode::from(2));
                }
            };
            let dir = out.join(&report.scenario);
            for path in report.write(&dir, &formats(format)).with_context(|| format!("writing {}", dir.display()))? {
                println!("{}", path.display());
            }
            for (name, e) in report.errors() {
                eprintln!("warning: analysis {name} failed: {e}");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Corpus {
            golden,
            bless,
            out,
            format,
            workers,
        } => {
            init_pool(workers)?;
            let entries = run_corpus(&CorpusOptions {
                golden,
                bless,
                out,
                formats: formats(format),
            })?;
            let mut failed = 0;
            for e in &entries {
                let line = match &e.status {
                    Status::Match => "match".to_string(),
                    Status::Blessed => "blessed".to_string(),
                    Status::MissingGolden => "missing golden".to_string(),
                    Status::Drift(d) => format!("DRIFT {d}"),
                    Status::Failed(m) => format!("FAILED {m}"),
                };
                failed += usize::from(!e.status.ok());
                println!("{:<24} {line}", e.name);
            }
            Ok(if failed == 0 { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
    }
}

fn report_config_error(path: &PathBuf, e: &ConfigError) {
    eprintln!("{}: {e}", path.display());
}
