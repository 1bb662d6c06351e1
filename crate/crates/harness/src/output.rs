//! Run artifacts.
//!
//! A run directory holds three files:
//! - `manifest.toml`: format version, master seed, per-trial seeds, truth
//!   snapping, detector settings and the full config under `[config]`;
//! - `heatmap.csv`: one row per grid cell,
//!   `angle_deg,velocity_mps,range_m,count,truth`;
//! - `trials.jsonl`: one JSON object per trial with detections, amplitudes
//!   and per-stage solver diagnostics.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use stepfreq_core::scene::rad_to_deg;

use crate::config::ExperimentConfig;
use crate::error::HarnessError;
use crate::experiment::{Experiment, OccurrenceMap, RunOutcome, Snap, TrialRecord};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const HEATMAP_FILE: &str = "heatmap.csv";
pub const TRIALS_FILE: &str = "trials.jsonl";
pub const FORMAT_VERSION: u32 = 1;
/// Environment variable overriding the output directory.
pub const OUTPUT_DIR_ENV: &str = "STEPFREQ_OUTPUT_DIR";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub master_seed: u64,
    /// Hex, since TOML integers are signed 64-bit.
    pub trial_seeds: Vec<String>,
    pub trials_failed: usize,
    pub snaps: Vec<Snap>,
    /// How detections become counts; recorded so maps can be compared.
    pub detector: String,
    pub config: ExperimentConfig,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = fs::read_to_string(path).map_err(|e| io(path, e))?;
        toml::from_str(&text).map_err(|e| HarnessError::Output(format!("{}: {e}", path.display())))
    }
}

fn io(path: &Path, source: std::io::Error) -> HarnessError {
    HarnessError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Output directory: environment override, then config, then `fallback`.
pub fn resolve_output_dir(config: &ExperimentConfig, fallback: &Path) -> PathBuf {
    if let Ok(dir) = std::env::var(OUTPUT_DIR_ENV) {
        if !dir.is_empty() {
            return PathBuf::from(dir);
        }
    }
    config
        .experiment
        .output_dir
        .as_ref()
        .map(PathBuf::from)
        .unwrap_or_else(|| fallback.to_path_buf())
}

fn detector_summary(config: &ExperimentConfig) -> String {
    let stages: Vec<String> = config
        .estimator
        .stages
        .iter()
        .map(|s| format!("lambda {:?}, detection {:?}", s.lambda, s.detection))
        .collect();
    format!(
        "Dantzig selector ({} sided polygon); {}; one count per detected cell per trial",
        config.estimator.polygon_sides,
        stages.join(" | ")
    )
}

pub fn write_manifest(exp: &Experiment, out: &RunOutcome, dir: &Path) -> Result<PathBuf, HarnessError> {
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        master_seed: exp.config.experiment.seed,
        trial_seeds: out.records.iter().map(|r| format!("{:#018x}", r.seed)).collect(),
        trials_failed: out.failed(),
        snaps: exp.snaps.clone(),
        detector: detector_summary(&exp.config),
        config: exp.config.clone(),
    };
    let text = toml::to_string(&manifest).map_err(|e| HarnessError::Output(e.to_string()))?;
    let path = dir.join(MANIFEST_FILE);
    fs::write(&path, text).map_err(|e| io(&path, e))?;
    Ok(path)
}

#[derive(Debug, Serialize)]
struct HeatmapRow {
    angle_deg: f64,
    velocity_mps: f64,
    range_m: f64,
    count: u32,
    truth: u8,
}

pub fn write_heatmap(map: &OccurrenceMap, dir: &Path) -> Result<PathBuf, HarnessError> {
    let path = dir.join(HEATMAP_FILE);
    let mut w = csv::Writer::from_path(&path).map_err(|e| HarnessError::Output(e.to_string()))?;
    for ((p, &count), &truth) in map.cells.iter().zip(&map.counts).zip(&map.truth) {
        w.serialize(HeatmapRow {
            angle_deg: rad_to_deg(p.angle),
            velocity_mps: p.velocity,
            range_m: p.range,
            count,
            truth: truth as u8,
        })
        .map_err(|e| HarnessError::Output(e.to_string()))?;
    }
    w.flush().map_err(|e| io(&path, e))?;
    Ok(path)
}

pub fn write_trials(records: &[TrialRecord], dir: &Path) -> Result<PathBuf, HarnessError> {
    let path = dir.join(TRIALS_FILE);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| io(&path, e))?);
    for r in records {
        serde_json::to_writer(&mut w, r).map_err(|e| HarnessError::Output(e.to_string()))?;
        w.write_all(b"\n").map_err(|e| io(&path, e))?;
    }
    w.flush().map_err(|e| io(&path, e))?;
    Ok(path)
}

/// Writes all three artifacts into `dir`, creating it if needed.
pub fn emit_results(exp: &Experiment, out: &RunOutcome, dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    write_manifest(exp, out, dir)?;
    write_heatmap(&out.map, dir)?;
    write_trials(&out.records, dir)?;
    Ok(())
}

#[derive(Debug, Deserialize)]
pub struct HeatmapEntry {
    pub angle_deg: f64,
    pub velocity_mps: f64,
    pub range_m: f64,
    pub count: u32,
    pub truth: u8,
}

pub fn read_heatmap(path: &Path) -> Result<Vec<HeatmapEntry>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| HarnessError::Output(e.to_string()))?;
    r.deserialize()
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::Output(e.to_string()))
}
