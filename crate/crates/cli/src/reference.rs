//! Long pCN reference runs, cached on disk by configuration hash.

use std::path::{Path, PathBuf};

use mlsvgd::diagnostics::SampleSet;
use mlsvgd::mcmc::{mean_with_se, run_pcn, PcnConfig};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};
use crate::experiment::{hex_digest, problem_hash, Problem};
use crate::io::{read_json, read_points, write_json, write_points};

pub const REFERENCE_FILE: &str = "reference.json";
pub const REFERENCE_SAMPLES_FILE: &str = "reference_samples.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferenceFile {
    pub problem_hash: String,
    /// Hash of the problem together with the chain settings.
    pub config_hash: String,
    pub level: usize,
    pub pcn: PcnConfig,
    pub num_samples: usize,
    pub mean: Vec<f64>,
    pub standard_error: Vec<f64>,
    pub mean_acceptance: f64,
    pub solver_failures: usize,
}

fn config_hash(problem_hash: &str, level: usize, pcn: &PcnConfig) -> String {
    let key = serde_json::json!({ "problem": problem_hash, "level": level, "pcn": pcn });
    hex_digest(key.to_string().as_bytes())
}

pub fn load_reference(path: &Path) -> Result<ReferenceFile> {
    read_json(path)
}

/// Loads the samples stored next to a reference file.
pub fn load_reference_samples(reference_path: &Path) -> Result<SampleSet> {
    let dir = reference_path.parent().unwrap_or(Path::new("."));
    let points = read_points(&dir.join(REFERENCE_SAMPLES_FILE))?;
    Ok(SampleSet::new(points, "reference")?)
}

/// Runs the reference chains for `cfg` at the finest level and writes
/// `reference.json` and `reference_samples.csv` into `dir`. An existing file
/// with a matching hash is reused unless `force` is set.
pub fn make_reference(cfg: &ExperimentConfig, dir: &Path, force: bool) -> Result<(ReferenceFile, PathBuf, bool)> {
    cfg.validate()?;
    let problem = Problem::build(cfg)?;
    let hier = problem.hierarchy();
    let level = hier.num_levels();
    let pcn = cfg.reference.to_config(cfg.seed);
    let phash = problem_hash(cfg);
    let chash = config_hash(&phash, level, &pcn);
    let path = dir.join(REFERENCE_FILE);
    if !force && path.exists() && dir.join(REFERENCE_SAMPLES_FILE).exists() {
        if let Ok(existing) = load_reference(&path) {
            if existing.config_hash == chash {
                return Ok((existing, path, true));
            }
        }
    }
    let run = run_pcn(hier, level, &pcn)?;
    if run.samples.is_empty() {
        return Err(CliError::Numerical("reference run retained no samples".into()));
    }
    let (mean, standard_error) = mean_with_se(&run.samples.samples)?;
    let file = ReferenceFile {
        problem_hash: phash,
        config_hash: chash,
        level,
        pcn,
        num_samples: run.samples.len(),
        mean,
        standard_error,
        mean_acceptance: run.mean_acceptance(),
        solver_failures: run.solver_failures(),
    };
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_points(&dir.join(REFERENCE_SAMPLES_FILE), &run.samples.samples)?;
    write_json(&path, &file)?;
    Ok((file, path, false))
}
