//! Run reports and their on-disk form: `trace.csv`, `summary.json` and an
//! optional `particles.csv`.

use std::path::Path;

use mlsvgd::Points;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::Result;
use crate::io::{read_csv, read_json, read_points, write_csv, write_json, write_points};

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const PARTICLES_FILE: &str = "particles.csv";

/// One trace row. `cost` is the accumulated model-unit cost before the
/// row's update; `grad_norm` is empty for pCN rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub level: usize,
    pub grad_norm: Option<f64>,
    pub cost: f64,
    pub wall_seconds: f64,
    pub rel_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub level: usize,
    pub tolerance: f64,
    pub iterations: usize,
    pub cost: f64,
    pub cost_share: f64,
    pub tolerance_met: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcnSummary {
    pub acceptance_rates: Vec<f64>,
    pub mean_acceptance: f64,
    pub solver_failures: usize,
    pub retained_samples: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub label: String,
    pub config: ExperimentConfig,
    pub algorithm: String,
    pub dimension: usize,
    pub target_level: usize,
    pub bandwidth: Option<f64>,
    pub total_iterations: usize,
    pub total_cost: f64,
    pub wall_seconds: f64,
    pub tolerance_met: bool,
    pub levels: Vec<LevelRecord>,
    pub final_mean: Vec<f64>,
    pub relative_error: Option<f64>,
    pub mmd_squared: Option<f64>,
    pub mmd_bandwidth: Option<f64>,
    pub pcn: Option<PcnSummary>,
    /// Metrics that could not be computed, with the reason.
    pub notes: Vec<String>,
    #[serde(skip)]
    pub trace: Vec<TraceRecord>,
    #[serde(skip)]
    pub particles: Option<Points>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct WriteOptions {
    /// Keep measured wall time in `trace.csv`. Off by default so that
    /// reruns produce byte-identical traces.
    pub wall_time: bool,
}

impl RunReport {
    pub fn write(&self, dir: &Path, opts: WriteOptions) -> Result<()> {
        let rows: Vec<TraceRecord> = self
            .trace
            .iter()
            .map(|r| TraceRecord {
                wall_seconds: if opts.wall_time { r.wall_seconds } else { 0.0 },
                ..r.clone()
            })
            .collect();
        write_csv(&dir.join(TRACE_FILE), &rows)?;
        write_json(&dir.join(SUMMARY_FILE), self)?;
        if self.config.diagnostics.write_particles {
            if let Some(p) = &self.particles {
                write_points(&dir.join(PARTICLES_FILE), p)?;
            }
        }
        Ok(())
    }

    /// Reads a run directory written by [`RunReport::write`].
    pub fn load(dir: &Path) -> Result<Self> {
        let mut report: RunReport = read_json(&dir.join(SUMMARY_FILE))?;
        report.trace = read_csv(&dir.join(TRACE_FILE))?;
        let particles = dir.join(PARTICLES_FILE);
        if particles.exists() {
            report.particles = Some(read_points(&particles)?);
        }
        Ok(report)
    }
}
