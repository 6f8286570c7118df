//! Sample-quality metrics: MMD, relative error, closed-form Gaussian KL and
//! Hellinger distances, and geometric decay-rate fits.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hierarchy::cholesky;
use crate::kernel::{median_heuristic, KernelSpec};
use crate::par;
use crate::points::{canonical_order, lexicographic, Points};

/// Labeled samples with free-form metadata (level, sampler, seed, ...).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleSet {
    pub samples: Points,
    pub label: String,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl SampleSet {
    pub fn new(samples: Points, label: impl Into<String>) -> Result<Self> {
        if !samples.all_finite() {
            return Err(Error::Input("samples contain non-finite entries".into()));
        }
        Ok(Self {
            samples,
            label: label.into(),
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl ToString) -> Self {
        self.metadata.insert(key.into(), value.to_string());
        self
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.samples.dim()
    }
}

/// `Σ_i Σ_j K(x_i, y_j)` with both sums in canonical order. Rows are
/// evaluated in parallel; the final reduction runs in index order.
fn gram_sum(kernel: &KernelSpec, x: &Points, ox: &[usize], y: &Points, oy: &[usize]) -> f64 {
    let rows = par::map_indexed(ox.len(), |a| {
        let xi = x.row(ox[a]);
        oy.iter().map(|&j| kernel.eval_unchecked(xi, y.row(j))).sum::<f64>()
    });
    rows.iter().sum()
}

fn compare_sets(a: &Points, oa: &[usize], b: &Points, ob: &[usize]) -> Ordering {
    oa.iter()
        .zip(ob)
        .map(|(&i, &j)| lexicographic(a.row(i), b.row(j)))
        .find(|o| o.is_ne())
        .unwrap_or_else(|| oa.len().cmp(&ob.len()))
}

/// Biased V-statistic estimate of `MMD²(a, b)`, diagonal terms included.
///
/// The result does not depend on row order within either set and is
/// bit-identical under swapping `a` and `b`.
pub fn mmd_squared(a: &SampleSet, b: &SampleSet, kernel: &KernelSpec) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Input("MMD needs nonempty sample sets".into()));
    }
    if a.dim() != b.dim() {
        return Err(Error::Input(format!(
            "MMD sample dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    if kernel.dimension() != a.dim() {
        return Err(Error::Input(format!(
            "kernel dimension {} does not match samples of dimension {}",
            kernel.dimension(),
            a.dim()
        )));
    }
    let (x, y) = (&a.samples, &b.samples);
    let (ox, oy) = (canonical_order(x), canonical_order(y));
    let (x, ox, y, oy) = if compare_sets(x, &ox, y, &oy).is_gt() {
        (y, oy, x, ox)
    } else {
        (x, ox, y, oy)
    };
    let (n, m) = (x.len() as f64, y.len() as f64);
    let kxx = gram_sum(kernel, x, &ox, x, &ox) / (n * n);
    let kyy = gram_sum(kernel, y, &oy, y, &oy) / (m * m);
    let kxy = gram_sum(kernel, x, &ox, y, &oy) / (n * m);
    Ok(kxx + kyy - 2.0 * kxy)
}

/// [`mmd_squared`] with the bandwidth from [`median_heuristic`] on the pooled
/// samples. Returns `(mmd², bandwidth)`.
pub fn mmd_squared_median(a: &SampleSet, b: &SampleSet) -> Result<(f64, f64)> {
    if a.dim() != b.dim() {
        return Err(Error::Input(format!(
            "MMD sample dimensions differ: {} vs {}",
            a.dim(),
            b.dim()
        )));
    }
    let mut pooled = a.samples.clone();
    pooled.extend(&b.samples)?;
    let h = median_heuristic(&pooled)?;
    let kernel = KernelSpec::new(h, a.dim())?;
    Ok((mmd_squared(a, b, &kernel)?, h))
}

/// `‖mean − reference‖₂ / ‖reference‖₂`.
pub fn relative_error(mean: &[f64], reference: &[f64]) -> Result<f64> {
    if mean.len() != reference.len() {
        return Err(Error::DimensionMismatch {
            expected: reference.len(),
            got: mean.len(),
        });
    }
    let denom = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
    if !(denom > 0.0) {
        return Err(Error::Input("reference vector is zero".into()));
    }
    let num = mean
        .iter()
        .zip(reference)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt();
    Ok(num / denom)
}

fn check_gaussian(m: &DVector<f64>, s: &DMatrix<f64>, d: usize) -> Result<()> {
    if m.len() != d || s.nrows() != d || s.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: m.len().max(s.nrows()),
        });
    }
    Ok(())
}

/// `KL(N(m1, S1) ‖ N(m2, S2))`.
pub fn gaussian_kl(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let d = m1.len();
    check_gaussian(m1, s1, d)?;
    check_gaussian(m2, s2, d)?;
    let c1 = cholesky(s1, "first covariance")?;
    let c2 = cholesky(s2, "second covariance")?;
    let trace = c2.solve(s1).trace();
    let dm = m2 - m1;
    let quad = dm.dot(&c2.solve(&dm));
    let logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| 2.0 * c.l().diagonal().map(f64::ln).sum();
    let kl = 0.5 * (trace + quad - d as f64 + logdet(&c2) - logdet(&c1));
    Ok(kl.max(0.0))
}

/// Hellinger distance `d_H` between `N(m1, S1)` and `N(m2, S2)`, with
/// `d_H² = 1 − ∫ √(p q)`.
pub fn gaussian_hellinger(m1: &DVector<f64>, s1: &DMatrix<f64>, m2: &DVector<f64>, s2: &DMatrix<f64>) -> Result<f64> {
    let d = m1.len();
    check_gaussian(m1, s1, d)?;
    check_gaussian(m2, s2, d)?;
    let c1 = cholesky(s1, "first covariance")?;
    let c2 = cholesky(s2, "second covariance")?;
    let avg = (s1 + s2) * 0.5;
    let ca = cholesky(&avg, "averaged covariance")?;
    let half_logdet = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| c.l().diagonal().map(f64::ln).sum();
    let dm = m1 - m2;
    let quad = dm.dot(&ca.solve(&dm));
    let log_bc = 0.5 * (half_logdet(&c1) + half_logdet(&c2)) - half_logdet(&ca) - quad / 8.0;
    let h2 = -log_bc.exp_m1();
    Ok(h2.clamp(0.0, 1.0).sqrt())
}

/// Result of fitting `value ≈ C s^(−rate·ℓ)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub rate: f64,
    /// Intercept of the fit of `log_s(value)` against level.
    pub intercept: f64,
    pub r_squared: f64,
}

/// Least-squares fit of `log_s(value)` against level. A fit with zero
/// residual (including constant values) reports `r² = 1`.
pub fn fit_decay_rate(levels: &[usize], values: &[f64], s: f64) -> Result<DecayFit> {
    if levels.len() != values.len() {
        return Err(Error::Input("levels and values differ in length".into()));
    }
    if levels.len() < 2 {
        return Err(Error::Input("decay fit needs at least 2 points".into()));
    }
    if !(s > 1.0) {
        return Err(Error::Input(format!("decay base must exceed 1, got {s}")));
    }
    if values.iter().any(|&v| !(v > 0.0) || !v.is_finite()) {
        return Err(Error::Input("decay fit needs positive finite values".into()));
    }
    let n = levels.len() as f64;
    let x: Vec<f64> = levels.iter().map(|&l| l as f64).collect();
    let y: Vec<f64> = values.iter().map(|v| v.ln() / s.ln()).collect();
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    if sxx == 0.0 {
        return Err(Error::Input("decay fit needs at least 2 distinct levels".into()));
    }
    let sxy: f64 = x.iter().zip(&y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x.iter().zip(&y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let ss_tot: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let scale = y.iter().map(|b| b * b).sum::<f64>().max(1.0);
    let r_squared = if ss_res <= 1e-24 * scale {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Ok(DecayFit {
        rate: -slope,
        intercept,
        r_squared,
    })
}
