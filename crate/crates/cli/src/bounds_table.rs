//! Tabulates the single-level and multilevel cost bounds over a tolerance grid.

use std::path::Path;

use mlsvgd::bounds::{bounds_table, BoundsRow, RateFunction};

use crate::config::BoundsTableConfig;
use crate::error::{CliError, Result};
use crate::io::write_csv;

pub const BOUNDS_FILE: &str = "bounds.csv";

pub fn compute_bounds(cfg: &BoundsTableConfig) -> Result<Vec<BoundsRow>> {
    let rate = match &cfg.rate_function {
        Some(r) => r.clone(),
        None => RateFunction::exponential(cfg.rates.lambda)?,
    };
    Ok(bounds_table(&cfg.rates, &cfg.bip, &rate, &cfg.eps)?)
}

pub fn write_bounds(cfg: &BoundsTableConfig, dir: &Path) -> Result<Vec<BoundsRow>> {
    let rows = compute_bounds(cfg)?;
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    write_csv(&dir.join(BOUNDS_FILE), &rows)?;
    Ok(rows)
}
