//! Side-by-side comparison of finished runs.

use std::path::Path;

use mlsvgd::diagnostics::{mmd_squared, SampleSet};
use mlsvgd::kernel::median_heuristic;
use mlsvgd::{KernelSpec, Points};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::io::write_csv;
use crate::report::RunReport;

pub const COMPARISON_FILE: &str = "comparison.csv";
pub const MMD_FILE: &str = "mmd.csv";
pub const SUMMARY_TABLE_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub label: String,
    pub algorithm: String,
    pub target_level: usize,
    pub total_iterations: usize,
    pub total_cost: f64,
    /// Cost divided by the cost of the first run.
    pub cost_ratio: f64,
    pub wall_seconds: f64,
    pub tolerance_met: bool,
    pub relative_error: Option<f64>,
    pub mmd_to_reference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MmdEntry {
    pub a: String,
    pub b: String,
    pub mmd_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryEntry {
    pub metric: String,
    pub best: String,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    pub mmd: Vec<MmdEntry>,
    pub summary: Vec<SummaryEntry>,
    /// Kernel bandwidth shared by every MMD entry.
    pub mmd_bandwidth: Option<f64>,
}

fn sample_set(r: &RunReport) -> Result<Option<SampleSet>> {
    match &r.particles {
        Some(p) if !p.is_empty() => Ok(Some(SampleSet::new(p.clone(), r.label.clone())?)),
        _ => Ok(None),
    }
}

/// Keeps at most `max` evenly spaced rows of `set`, so that quadratic-cost
/// kernel statistics stay affordable for long reference chains.
pub fn thin_samples(set: &SampleSet, max: usize) -> Result<SampleSet> {
    if max == 0 {
        return Err(CliError::Config("reference sample cap must be >= 1".into()));
    }
    if set.len() <= max {
        return Ok(set.clone());
    }
    let stride = set.len().div_ceil(max);
    let rows: Vec<&[f64]> = set.samples.rows().step_by(stride).collect();
    let thinned = Points::from_rows(&rows)?;
    Ok(SampleSet {
        samples: thinned,
        ..set.clone()
    }
    .with_meta("thinning_stride", stride))
}

fn best_by(rows: &[ComparisonRow], metric: &str, f: impl Fn(&ComparisonRow) -> Option<f64>) -> Option<SummaryEntry> {
    rows.iter()
        .filter_map(|r| f(r).map(|v| (r, v)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map(|(r, v)| SummaryEntry {
            metric: metric.into(),
            best: r.label.clone(),
            value: v,
        })
}

/// Compares runs by cost and accuracy. MMD values use one median-heuristic
/// bandwidth computed from the reference set, or from the first run with
/// particles if there is no reference.
pub fn compare_runs(runs: &[RunReport], reference: Option<&SampleSet>) -> Result<ComparisonTable> {
    let Some(first) = runs.first() else {
        return Err(CliError::Config("compare needs at least one run".into()));
    };
    if let Some(r) = runs.iter().find(|r| r.dimension != first.dimension) {
        return Err(CliError::Config(format!(
            "run {} has dimension {} but {} has {}",
            r.label, r.dimension, first.label, first.dimension
        )));
    }
    if let Some(reference) = reference {
        if reference.dim() != first.dimension {
            return Err(CliError::Config(format!(
                "reference samples have dimension {} but runs have {}",
                reference.dim(),
                first.dimension
            )));
        }
    }
    let sets = runs.iter().map(sample_set).collect::<Result<Vec<_>>>()?;
    let basis = reference.or_else(|| sets.iter().flatten().next());
    let kernel = match basis {
        Some(b) if b.len() > 1 => Some(KernelSpec::new(median_heuristic(&b.samples)?, first.dimension)?),
        _ => None,
    };

    let base_cost = first.total_cost;
    let mut rows = Vec::with_capacity(runs.len());
    for (r, set) in runs.iter().zip(&sets) {
        let mmd_to_reference = match (&kernel, reference, set) {
            (Some(k), Some(reference), Some(s)) => Some(mmd_squared(s, reference, k)?),
            _ => None,
        };
        rows.push(ComparisonRow {
            label: r.label.clone(),
            algorithm: r.algorithm.clone(),
            target_level: r.target_level,
            total_iterations: r.total_iterations,
            total_cost: r.total_cost,
            cost_ratio: if base_cost > 0.0 {
                r.total_cost / base_cost
            } else {
                f64::NAN
            },
            wall_seconds: r.wall_seconds,
            tolerance_met: r.tolerance_met,
            relative_error: r.relative_error,
            mmd_to_reference,
        });
    }

    let mut mmd = Vec::new();
    if let Some(k) = &kernel {
        for i in 0..runs.len() {
            for j in i + 1..runs.len() {
                if let (Some(a), Some(b)) = (&sets[i], &sets[j]) {
                    mmd.push(MmdEntry {
                        a: runs[i].label.clone(),
                        b: runs[j].label.clone(),
                        mmd_squared: mmd_squared(a, b, k)?,
                    });
                }
            }
        }
    }

    let summary = [
        best_by(&rows, "total_cost", |r| Some(r.total_cost)),
        best_by(&rows, "relative_error", |r| r.relative_error),
        best_by(&rows, "mmd_to_reference", |r| r.mmd_to_reference),
    ]
    .into_iter()
    .flatten()
    .collect();

    Ok(ComparisonTable {
        rows,
        mmd,
        summary,
        mmd_bandwidth: kernel.map(|k| k.bandwidth()),
    })
}

impl ComparisonTable {
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
        write_csv(&dir.join(COMPARISON_FILE), &self.rows)?;
        write_csv(&dir.join(MMD_FILE), &self.mmd)?;
        write_csv(&dir.join(SUMMARY_TABLE_FILE), &self.summary)
    }
}
