//! Experiment-config loading: the TOML schema, the bundled example
//! configs, command-line overrides, and resolution into validated
//! [`ExperimentConfig`] lists ready for the Monte Carlo engine.
//!
//! A config file names one channel scenario and a list of runs; each run
//! becomes one experiment (one CSV file). Runs share the file-level SNR
//! grid, trial count, and master seed — shared seeds pair the random draws
//! across schemes, so scheme comparisons see common random numbers. A run
//! with a `"R+dof"` split expands into one single-SNR experiment per grid
//! point, with the quantizer budget scaled to hold one degree of freedom
//! per user at that SNR.

use std::fmt::Write as _;
use std::str::FromStr;

use serde::Deserialize;

use hybeam::channel::{ScenarioKind, ScenarioSpec};
use hybeam::evaluation::{
    dof_feedback_bits, ExperimentConfig, FeedbackSplit, Scheme, DEFAULT_TRIALS,
};

use crate::output::RunManifest;
use crate::CliError;

/// Bundled example configs, in `list` order.
pub const BUNDLED: [(&str, &str); 10] = [
    ("fig3a", include_str!("../configs/fig3a.toml")),
    ("fig3b", include_str!("../configs/fig3b.toml")),
    ("fig4a", include_str!("../configs/fig4a.toml")),
    ("fig4b", include_str!("../configs/fig4b.toml")),
    ("fig5a", include_str!("../configs/fig5a.toml")),
    ("fig5b", include_str!("../configs/fig5b.toml")),
    ("fig6a", include_str!("../configs/fig6a.toml")),
    ("fig6b", include_str!("../configs/fig6b.toml")),
    ("fig7a", include_str!("../configs/fig7a.toml")),
    ("fig7b", include_str!("../configs/fig7b.toml")),
];

/// Command-line overrides applied to a loaded config before validation.
#[derive(Debug, Default)]
pub struct Overrides {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub snr_grid: Option<Vec<f64>>,
    /// Keep only runs whose scheme is listed; empty means keep all.
    pub schemes: Vec<Scheme>,
}

/// A loaded, override-applied, validated set of experiments.
#[derive(Debug)]
pub struct Plan {
    /// Where the experiments came from (`bundled:fig3a` or a file path).
    pub config_path: String,
    pub master_seed: u64,
    pub runs: Vec<RunPlan>,
}

/// One experiment: one output CSV assembled from one or more engine
/// configs (several only for dof-scaled runs, one per SNR point).
#[derive(Debug)]
pub struct RunPlan {
    pub label: String,
    /// Output file name within the run directory.
    pub file: String,
    pub configs: Vec<ExperimentConfig>,
}

// --- TOML schema -------------------------------------------------------------------

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    /// One-line summary shown by `list`.
    #[serde(default)]
    description: String,
    /// Master seed; every random stream in every run derives from it.
    seed: u64,
    /// Gain draws per SNR point; defaults to the engine's standard count.
    trials: Option<usize>,
    snr_db: SnrGrid,
    scenario: ScenarioTable,
    #[serde(default)]
    defaults: RunDefaults,
    runs: Vec<RunTable>,
}

#[derive(Debug, Deserialize)]
#[serde(
    untagged,
    expecting = "an SNR list like [0.0, 10.0] or a range { start, stop, step } in dB"
)]
enum SnrGrid {
    List(Vec<f64>),
    Range { start: f64, stop: f64, step: f64 },
}

impl SnrGrid {
    fn points(&self) -> Result<Vec<f64>, String> {
        match self {
            SnrGrid::List(points) => Ok(points.clone()),
            SnrGrid::Range { start, stop, step } => grid_points(*start, *stop, *step),
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioTable {
    kind: ScenarioKind,
    antennas: usize,
    users: usize,
    paths: usize,
    #[serde(default)]
    overlap: f64,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunDefaults {
    /// Feedback budget applied to runs that do not set their own.
    total_bits: Option<u32>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RunTable {
    scheme: Scheme,
    /// Distinguishes runs sharing a scheme (antenna or budget sweeps);
    /// defaults to the scheme name, and also names the output file.
    label: Option<String>,
    total_bits: Option<u32>,
    /// `"B_RF+B_BB"`, `"sweep-optimal"`, or `"B_RF+dof"`.
    split: Option<String>,
    #[serde(default)]
    t_search: bool,
    /// Per-run antenna count, for array-size sweeps.
    antennas: Option<usize>,
}

/// Inclusive dB grid `start, start+step, …` up to `stop`.
pub fn grid_points(start: f64, stop: f64, step: f64) -> Result<Vec<f64>, String> {
    if !(step > 0.0) || !step.is_finite() || !start.is_finite() || !stop.is_finite() {
        return Err(format!("bad SNR range {start}:{stop}:{step}; step must be positive"));
    }
    if stop < start {
        return Err(format!("bad SNR range {start}:{stop}:{step}; stop is below start"));
    }
    let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
    Ok((0..count).map(|i| start + i as f64 * step).collect())
}

// --- Loading -----------------------------------------------------------------------

/// Loads a bundled config name, a config file path, or a previously
/// written run manifest; applies overrides; and validates every resolved
/// experiment. Nothing is executed and nothing is written.
pub fn load(input: &str, overrides: &Overrides) -> Result<Plan, CliError> {
    if let Some((name, text)) = BUNDLED.iter().find(|(name, _)| *name == input) {
        let path = format!("bundled:{name}");
        return resolve_config(&path, text, overrides);
    }
    let text = std::fs::read_to_string(input).map_err(|source| CliError::Io {
        context: format!("reading config `{input}`"),
        source,
    })?;
    if input.ends_with(".json") {
        resolve_manifest(input, &text, overrides)
    } else {
        resolve_config(input, &text, overrides)
    }
}

fn resolve_config(path: &str, text: &str, overrides: &Overrides) -> Result<Plan, CliError> {
    let file: ConfigFile = toml::from_str(text).map_err(|source| CliError::Parse {
        path: path.to_string(),
        source: Box::new(source),
    })?;
    let invalid = |message: String| CliError::Invalid {
        path: path.to_string(),
        message,
    };

    let master_seed = overrides.seed.unwrap_or(file.seed);
    let trials = overrides.trials.or(file.trials).unwrap_or(DEFAULT_TRIALS);
    let snr_db = match &overrides.snr_grid {
        Some(grid) => grid.clone(),
        None => file.snr_db.points().map_err(invalid)?,
    };
    if file.runs.is_empty() {
        return Err(invalid("the config lists no runs".into()));
    }

    let mut runs = Vec::new();
    for (index, run) in file.runs.iter().enumerate() {
        if !overrides.schemes.is_empty() && !overrides.schemes.contains(&run.scheme) {
            continue;
        }
        let label = run
            .label
            .clone()
            .unwrap_or_else(|| run.scheme.name().to_string());
        let context = format!("run {} ({label})", index + 1);
        let scenario = ScenarioSpec {
            kind: file.scenario.kind,
            antennas: run.antennas.unwrap_or(file.scenario.antennas),
            users: file.scenario.users,
            paths: file.scenario.paths,
            overlap: file.scenario.overlap,
            seed: master_seed,
        };
        let configs = expand_run(run, &file.defaults, scenario, &snr_db, trials, master_seed)
            .map_err(|message| invalid(format!("{context}: {message}")))?;
        for config in &configs {
            config
                .validate()
                .map_err(|e| invalid(format!("{context}: {e}")))?;
        }
        runs.push(RunPlan {
            label,
            file: String::new(), // named below, after filtering settles indices
            configs,
        });
    }
    if runs.is_empty() {
        return Err(invalid("no runs left after the scheme filter".into()));
    }
    assign_file_names(&mut runs).map_err(invalid)?;
    Ok(Plan {
        config_path: path.to_string(),
        master_seed,
        runs,
    })
}

/// Builds the engine configs for one run. Dof-scaled splits expand into
/// one single-SNR config per grid point; everything else is one config.
fn expand_run(
    run: &RunTable,
    defaults: &RunDefaults,
    scenario: ScenarioSpec,
    snr_db: &[f64],
    trials: usize,
    seed: u64,
) -> Result<Vec<ExperimentConfig>, String> {
    let make = |total_bits, split, snr: Vec<f64>| ExperimentConfig {
        scenario: scenario.clone(),
        scheme: run.scheme,
        total_bits,
        split,
        snr_db: snr,
        trials,
        seed,
        t_search: run.t_search,
    };

    if let Some(rf_bits) = dof_split(run.split.as_deref())? {
        if run.total_bits.is_some() {
            return Err(
                "dof-scaled runs compute the budget per SNR point; omit total_bits".into(),
            );
        }
        let rank = scenario.paths.min(scenario.users);
        return Ok(snr_db
            .iter()
            .map(|&snr| {
                // the second stage keeps at least one bit so the config
                // stays a valid two-stage experiment at low SNR
                let bb = dof_feedback_bits(1, rank, scenario.users, snr).max(1);
                make(
                    rf_bits + bb,
                    Some(FeedbackSplit::Fixed {
                        rf_bits,
                        baseband_bits: bb,
                    }),
                    vec![snr],
                )
            })
            .collect());
    }

    let split = run
        .split
        .as_deref()
        .map(FeedbackSplit::from_str)
        .transpose()
        .map_err(|e| e.to_string())?;
    let total_bits = run
        .total_bits
        .or(defaults.total_bits)
        .ok_or("missing total_bits (set it on the run or under [defaults])")?;
    Ok(vec![make(total_bits, split, snr_db.to_vec())])
}

/// `"R+dof"` → `Some(R)`; any other split string is handled elsewhere.
fn dof_split(split: Option<&str>) -> Result<Option<u32>, String> {
    let Some(s) = split else { return Ok(None) };
    let Some(rf) = s.strip_suffix("+dof") else {
        return Ok(None);
    };
    rf.trim()
        .parse()
        .map(Some)
        .map_err(|_| format!("bad dof-scaled split `{s}`; expected `B_RF+dof` like `4+dof`"))
}

fn assign_file_names(runs: &mut [RunPlan]) -> Result<(), String> {
    let mut seen: Vec<String> = Vec::new();
    for (index, run) in runs.iter_mut().enumerate() {
        let slug = slugify(&run.label);
        if seen.contains(&slug) {
            return Err(format!(
                "two runs would write the same file (label `{}`); give them distinct labels",
                run.label
            ));
        }
        let mut file = String::new();
        write!(file, "{:02}-{slug}.csv", index + 1).expect("writing to a string");
        run.file = file;
        seen.push(slug);
    }
    Ok(())
}

fn slugify(label: &str) -> String {
    let mut slug = String::with_capacity(label.len());
    for ch in label.chars() {
        if ch.is_ascii_alphanumeric() {
            slug.push(ch.to_ascii_lowercase());
        } else if !slug.ends_with('-') && !slug.is_empty() {
            slug.push('-');
        }
    }
    slug.trim_end_matches('-').to_string()
}

/// Re-loads the experiments recorded in a run manifest, so a finished run
/// can be reproduced bit-exactly from its own provenance record.
fn resolve_manifest(path: &str, text: &str, overrides: &Overrides) -> Result<Plan, CliError> {
    let manifest: RunManifest =
        serde_json::from_str(text).map_err(|source| CliError::ParseManifest {
            path: path.to_string(),
            source,
        })?;
    let invalid = |message: String| CliError::Invalid {
        path: path.to_string(),
        message,
    };
    if overrides.snr_grid.is_some() {
        return Err(invalid(
            "the SNR grid override applies to config files, not manifests \
             (dof-scaled budgets were already expanded per point)"
                .into(),
        ));
    }
    let master_seed = overrides.seed.unwrap_or(manifest.master_seed);
    let mut runs = Vec::new();
    for entry in manifest.runs {
        if !overrides.schemes.is_empty() {
            let scheme = entry.configs.first().map(|c| c.scheme);
            if scheme.is_none_or(|s| !overrides.schemes.contains(&s)) {
                continue;
            }
        }
        let mut configs = entry.configs;
        for config in &mut configs {
            if let Some(trials) = overrides.trials {
                config.trials = trials;
            }
            if let Some(seed) = overrides.seed {
                config.seed = seed;
                config.scenario.seed = seed;
            }
            config
                .validate()
                .map_err(|e| invalid(format!("run `{}`: {e}", entry.label)))?;
        }
        runs.push(RunPlan {
            label: entry.label,
            file: entry.file,
            configs,
        });
    }
    if runs.is_empty() {
        return Err(invalid("no runs left after the scheme filter".into()));
    }
    Ok(Plan {
        config_path: path.to_string(),
        master_seed,
        runs,
    })
}

/// Parses a `list` entry: name plus the config's own description line.
pub fn bundled_description(text: &str) -> String {
    toml::from_str::<ConfigFile>(text)
        .map(|file| file.description)
        .unwrap_or_default()
}
