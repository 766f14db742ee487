//! Report rendering: the versioned CSV format and the JSON run manifest
//! written alongside every set of outputs.

use serde::{Deserialize, Serialize};

use hybeam::evaluation::{ExperimentConfig, RateReport};

/// Provenance record written next to the CSVs. Feeding the manifest back
/// to `run` reproduces the outputs bit-exactly: it stores the fully
/// resolved experiment configs (overrides already applied) and the output
/// file names.
#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    /// What was loaded: `bundled:<name>`, a config path, or a manifest path.
    pub config_path: String,
    pub output_dir: String,
    pub master_seed: u64,
    pub runs: Vec<ManifestRun>,
}

/// One experiment: the CSV it wrote and the engine configs behind it.
#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestRun {
    pub label: String,
    pub file: String,
    pub configs: Vec<ExperimentConfig>,
}

/// Renders one experiment's reports as CSV: a `#schema=1` version line, a
/// header, then one row per SNR point in report order. Mean and standard
/// error use fixed six-decimal formatting so reruns are byte-stable; the
/// flags cell joins the nonzero flag counters as `name=count;…` and stays
/// empty on clean points.
pub fn render_csv(reports: &[RateReport]) -> String {
    let mut out = String::from("#schema=1\nsnr_db,scheme,mean_sum_rate,stderr,b_rf,b_bb,flags\n");
    for report in reports {
        for point in &report.points {
            let flags = point
                .flags
                .entries()
                .iter()
                .filter(|(_, count)| *count > 0)
                .map(|(name, count)| format!("{name}={count}"))
                .collect::<Vec<_>>()
                .join(";");
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{},{},{}\n",
                point.snr_db,
                report.config.scheme.name(),
                point.mean_sum_rate,
                point.stderr,
                point.rf_bits,
                point.baseband_bits,
                flags
            ));
        }
    }
    out
}

/// Pretty-printed manifest JSON with a trailing newline; field order is
/// fixed by the struct definitions, so the bytes are stable too.
pub fn render_manifest(manifest: &RunManifest) -> String {
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest types serialize");
    text.push('\n');
    text
}
