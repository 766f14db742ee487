//! `hybeam` — configuration-driven runner for the multiuser mmWave hybrid
//! precoding simulator. `run` executes a config's experiments and writes
//! one CSV per experiment plus a JSON manifest; `list` shows the bundled
//! figure-style configs; `validate` checks a config without running it.

use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Parser, Subcommand};
use thiserror::Error;

use hybeam::evaluation::{monte_carlo, EvaluationError, Scheme};

mod config;
mod output;

use config::{Overrides, Plan};
use output::{ManifestRun, RunManifest};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}: {source}")]
    Parse {
        path: String,
        source: Box<toml::de::Error>,
    },
    #[error("{path}: {source}")]
    ParseManifest {
        path: String,
        source: serde_json::Error,
    },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
    #[error("{0}")]
    BadOverride(String),
    #[error(transparent)]
    Evaluation(#[from] EvaluationError),
    #[error("{context}: {source}")]
    Io {
        context: String,
        source: std::io::Error,
    },
}

#[derive(Parser)]
#[command(name = "hybeam", version, about = "Multiuser mmWave hybrid precoding simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Execute a config's experiments; write CSV reports and a manifest.
    Run {
        /// Bundled config name (see `list`), config file path, or a
        /// manifest.json from a previous run.
        config: String,
        /// Directory for the CSV files and manifest.json.
        #[arg(long)]
        out: PathBuf,
        /// Override the gain draws per SNR point.
        #[arg(long)]
        trials: Option<usize>,
        /// Override the master seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Replace the SNR grid: start:stop:step in dB.
        #[arg(long, value_name = "A:B:STEP", allow_hyphen_values = true)]
        snr_grid: Option<String>,
        /// Keep only runs using this scheme (repeatable).
        #[arg(long = "scheme", value_name = "NAME")]
        schemes: Vec<String>,
    },
    /// List the bundled example configs.
    List,
    /// Parse and validate a config without executing it.
    Validate {
        /// Bundled config name, config file path, or manifest.json.
        config: String,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run {
            config,
            out,
            trials,
            seed,
            snr_grid,
            schemes,
        } => overrides(trials, seed, snr_grid, schemes)
            .and_then(|ov| cmd_run(&config, &out, &ov)),
        Command::List => cmd_list(),
        Command::Validate { config } => cmd_validate(&config),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::FAILURE
        }
    }
}

fn overrides(
    trials: Option<usize>,
    seed: Option<u64>,
    snr_grid: Option<String>,
    schemes: Vec<String>,
) -> Result<Overrides, CliError> {
    let snr_grid = snr_grid
        .map(|text| parse_snr_grid(&text))
        .transpose()?;
    let schemes = schemes
        .iter()
        .map(|name| Scheme::from_str(name).map_err(|e| CliError::BadOverride(e.to_string())))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Overrides {
        trials,
        seed,
        snr_grid,
        schemes,
    })
}

fn parse_snr_grid(text: &str) -> Result<Vec<f64>, CliError> {
    let bad = || {
        CliError::BadOverride(format!(
            "bad --snr-grid `{text}`; expected start:stop:step like -10:20:5"
        ))
    };
    let parts: Vec<&str> = text.split(':').collect();
    let [start, stop, step] = parts.as_slice() else {
        return Err(bad());
    };
    let parse = |s: &str| s.trim().parse::<f64>().map_err(|_| bad());
    config::grid_points(parse(start)?, parse(stop)?, parse(step)?)
        .map_err(CliError::BadOverride)
}

/// Runs every experiment in the plan, then writes all outputs at once —
/// a failed run leaves nothing behind.
fn cmd_run(input: &str, out: &std::path::Path, overrides: &Overrides) -> Result<(), CliError> {
    let plan = config::load(input, overrides)?;
    let mut rendered = Vec::with_capacity(plan.runs.len());
    for run in &plan.runs {
        let reports = run
            .configs
            .iter()
            .map(monte_carlo)
            .collect::<Result<Vec<_>, _>>()?;
        rendered.push((run.file.clone(), output::render_csv(&reports)));
    }
    let manifest = manifest_for(&plan, out);

    let write = |name: &str, contents: &str| -> Result<(), CliError> {
        let path = out.join(name);
        std::fs::write(&path, contents).map_err(|source| CliError::Io {
            context: format!("writing {}", path.display()),
            source,
        })?;
        println!("wrote {}", path.display());
        Ok(())
    };
    std::fs::create_dir_all(out).map_err(|source| CliError::Io {
        context: format!("creating {}", out.display()),
        source,
    })?;
    for (file, contents) in &rendered {
        write(file, contents)?;
    }
    write("manifest.json", &output::render_manifest(&manifest))
}

fn manifest_for(plan: &Plan, out: &std::path::Path) -> RunManifest {
    RunManifest {
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        config_path: plan.config_path.clone(),
        output_dir: out.display().to_string(),
        master_seed: plan.master_seed,
        runs: plan
            .runs
            .iter()
            .map(|run| ManifestRun {
                label: run.label.clone(),
                file: run.file.clone(),
                configs: run.configs.clone(),
            })
            .collect(),
    }
}

fn cmd_list() -> Result<(), CliError> {
    for (name, text) in config::BUNDLED {
        println!("{name:<7} {}", config::bundled_description(text));
    }
    Ok(())
}

fn cmd_validate(input: &str) -> Result<(), CliError> {
    let plan = config::load(input, &Overrides::default())?;
    let configs: usize = plan.runs.iter().map(|run| run.configs.len()).sum();
    println!(
        "ok: {} experiments ({configs} engine configs) from {}",
        plan.runs.len(),
        plan.config_path
    );
    Ok(())
}
