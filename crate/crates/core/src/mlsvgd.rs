//! Multilevel SVGD: SVGD is run at levels `1, 2, …, L` in turn, each level
//! warm-started from the previous level's final ensemble and stopped once the
//! mean Stein-gradient norm falls below that level's tolerance.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bounds;
use crate::error::{Error, Result};
use crate::hierarchy::PosteriorHierarchy;
use crate::svgd::{run_level, ParticleEnsemble, RunTrace, SvgdConfig};

/// Ordered levels with nonincreasing tolerances `ε₁ ≥ … ≥ ε_L`, `ε_L ≤ ε`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelSchedule {
    levels: Vec<usize>,
    tolerances: Vec<f64>,
    final_tolerance: f64,
}

/// Monotone map applied to theory-side tolerances to obtain gradient-norm
/// thresholds.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ToleranceMap {
    #[default]
    Identity,
    /// `ε ↦ scale · ε^exponent`
    Power { scale: f64, exponent: f64 },
}

impl ToleranceMap {
    pub fn apply(&self, eps: f64) -> f64 {
        match *self {
            ToleranceMap::Identity => eps,
            ToleranceMap::Power { scale, exponent } => scale * eps.powf(exponent),
        }
    }

    fn validate(&self) -> Result<()> {
        match *self {
            ToleranceMap::Power { scale, exponent } if !(scale > 0.0 && exponent > 0.0) => {
                Err(Error::Config("tolerance map needs scale > 0 and exponent > 0".into()))
            }
            _ => Ok(()),
        }
    }
}

impl LevelSchedule {
    pub fn new(levels: Vec<usize>, tolerances: Vec<f64>, final_tolerance: f64) -> Result<Self> {
        if levels.is_empty() || levels.len() != tolerances.len() {
            return Err(Error::Config("schedule needs one tolerance per level".into()));
        }
        if levels[0] == 0 || levels.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::Config(
                "schedule levels must be >= 1 and strictly increasing".into(),
            ));
        }
        if tolerances.iter().any(|&t| !(t > 0.0)) || !(final_tolerance > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        if tolerances.windows(2).any(|w| w[1] > w[0]) {
            return Err(Error::Config("tolerances must be nonincreasing".into()));
        }
        if *tolerances.last().unwrap() > final_tolerance {
            return Err(Error::Config("last tolerance exceeds the final tolerance".into()));
        }
        Ok(Self {
            levels,
            tolerances,
            final_tolerance,
        })
    }

    /// Levels `1..=num_levels`, all with tolerance `eps`.
    pub fn uniform(num_levels: usize, eps: f64) -> Result<Self> {
        Self::new((1..=num_levels).collect(), vec![eps; num_levels], eps)
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn tolerances(&self) -> &[f64] {
        &self.tolerances
    }

    pub fn final_tolerance(&self) -> f64 {
        self.final_tolerance
    }

    pub fn finest(&self) -> usize {
        *self.levels.last().unwrap()
    }

    /// Applies `map` to every tolerance (the final tolerance included).
    pub fn mapped(&self, map: ToleranceMap) -> Result<Self> {
        map.validate()?;
        let tolerances = self.tolerances.iter().map(|&t| map.apply(t)).collect();
        Self::new(self.levels.clone(), tolerances, map.apply(self.final_tolerance))
    }
}

/// Schedule with `L` from [`bounds::level_for_tolerance`] and
/// `ε_ℓ = √(2k₁) s^(−αℓ/2)`; the last tolerance is clamped to `eps`.
///
/// For `eps ≥ √(2k₁)` this degenerates to one level with tolerance `eps`.
pub fn theoretical_schedule(k1: f64, s: f64, alpha: f64, eps: f64) -> Result<LevelSchedule> {
    if !(k1 > 0.0 && s > 1.0 && alpha > 0.0 && eps > 0.0) {
        return Err(Error::Input("schedule needs k1 > 0, s > 1, alpha > 0, eps > 0".into()));
    }
    let root = (2.0 * k1).sqrt();
    if eps >= root {
        return LevelSchedule::new(vec![1], vec![eps], eps);
    }
    let l = bounds::level_index(k1, s, alpha, eps);
    let mut tolerances: Vec<f64> = (1..=l).map(|i| root * s.powf(-alpha * i as f64 / 2.0)).collect();
    let last = tolerances.last_mut().unwrap();
    *last = last.min(eps);
    LevelSchedule::new((1..=l).collect(), tolerances, eps)
}

/// Runs the multilevel loop. The returned trace holds every level's rows
/// (tagged by level) and one [`crate::svgd::LevelSummary`] per level visited.
/// A level that hits `cfg.max_iterations` ends the run early with a partial
/// trace.
pub fn run_mlsvgd<H: PosteriorHierarchy + ?Sized>(
    init: ParticleEnsemble,
    hier: &H,
    schedule: &LevelSchedule,
    cfg: &SvgdConfig,
) -> Result<(ParticleEnsemble, RunTrace)> {
    for &l in schedule.levels() {
        hier.check_level(l)?;
    }
    let clock = Instant::now();
    let mut trace = RunTrace::default();
    let mut ens = init;
    for (&level, &tol) in schedule.levels().iter().zip(schedule.tolerances()) {
        ens = run_level(ens, hier, level, cfg, tol, clock, &mut trace)?;
        if !trace.levels.last().unwrap().tolerance_met {
            break;
        }
    }
    Ok((ens, trace))
}
