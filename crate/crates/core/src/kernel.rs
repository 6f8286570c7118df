//! Gaussian RBF kernel `K(x, y) = exp(-‖x - y‖² / (2h²))`, its gradient in the
//! first argument, and the median-heuristic bandwidth.

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::points::{sq_dist, Points};

/// Exponent convention, echoed into run reports.
pub const KERNEL_CONVENTION: &str = "exp(-|x-y|^2 / (2 h^2))";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    bandwidth: f64,
    dimension: usize,
}

impl KernelSpec {
    pub fn new(bandwidth: f64, dimension: usize) -> Result<Self> {
        if !(bandwidth > 0.0 && bandwidth.is_finite()) {
            return Err(Error::Input(format!(
                "kernel bandwidth must be positive, got {bandwidth}"
            )));
        }
        if dimension == 0 {
            return Err(Error::Input("kernel dimension must be >= 1".into()));
        }
        Ok(Self { bandwidth, dimension })
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    fn check(&self, x: &[f64], y: &[f64]) -> Result<()> {
        check_dim(self.dimension, x.len())?;
        check_dim(self.dimension, y.len())
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check(x, y)?;
        Ok(self.eval_unchecked(x, y))
    }

    pub fn grad1(&self, x: &[f64], y: &[f64]) -> Result<Vec<f64>> {
        self.check(x, y)?;
        let mut out = vec![0.0; x.len()];
        self.grad1_into(x, y, &mut out);
        Ok(out)
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        (-sq_dist(x, y) / (2.0 * self.bandwidth * self.bandwidth)).exp()
    }

    /// Writes `∇₁K(x, y)` into `out` and returns `K(x, y)`.
    #[inline]
    pub(crate) fn grad1_into(&self, x: &[f64], y: &[f64], out: &mut [f64]) -> f64 {
        let h2 = self.bandwidth * self.bandwidth;
        let k = self.eval_unchecked(x, y);
        for ((o, a), b) in out.iter_mut().zip(x).zip(y) {
            *o = -(a - b) / h2 * k;
        }
        k
    }
}

/// Bandwidth `h = med / sqrt(2 ln(N + 1))`, where `med` is the median pairwise
/// Euclidean distance (mean of the two middle values for an even count).
pub fn median_heuristic(points: &Points) -> Result<f64> {
    let n = points.len();
    if n < 2 {
        return Err(Error::Input(format!(
            "median heuristic needs at least 2 points, got {n}"
        )));
    }
    let mut dists = Vec::with_capacity(n * (n - 1) / 2);
    for i in 0..n {
        for j in (i + 1)..n {
            dists.push(sq_dist(points.row(i), points.row(j)).sqrt());
        }
    }
    dists.sort_by(f64::total_cmp);
    let m = dists.len();
    let med = if m % 2 == 1 {
        dists[m / 2]
    } else {
        0.5 * (dists[m / 2 - 1] + dists[m / 2])
    };
    if med <= 0.0 {
        return Err(Error::Degenerate("median pairwise distance is zero".into()));
    }
    Ok(med / (2.0 * ((n + 1) as f64).ln()).sqrt())
}
