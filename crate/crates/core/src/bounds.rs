//! Cost-complexity bounds for single-level and multilevel SVGD, the level
//! selection rule, and rate-function inverses.
//!
//! All logarithms are natural; `log_s(x)` is computed as `ln x / ln s`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rate constants: cost `c_ℓ = c₀ s^(γℓ)`, bias `KL(π^(ℓ)‖π) ≤ k₁ s^(−αℓ)`,
/// successive-level `KL(π^(ℓ−1)‖π^(ℓ)) ≤ k₂ s^(−αℓ)`, remainder
/// `R_ℓ ≤ k₃ s^(−αℓ)`, SVGD rate `λ`, and `kl0 = KL(μ₀‖π^(L))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateConstants {
    pub c0: f64,
    pub s: f64,
    pub gamma: f64,
    pub alpha: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
    pub lambda: f64,
    pub kl0: f64,
}

impl RateConstants {
    pub fn validate(&self) -> Result<()> {
        let ok = self.c0 > 0.0
            && self.s > 1.0
            && self.gamma > 0.0
            && self.alpha > 0.0
            && self.k1 > 0.0
            && self.k2 >= 0.0
            && self.k3 >= 0.0
            && self.lambda > 0.0
            && self.kl0 >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid rate constants {self:?}")))
        }
    }
}

/// Constants of the Bayesian-inverse-problem bound: model error `b₀`,
/// misfit bound `b₁`, `b₂`, and the density cover constant `b₃`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipConstants {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
}

impl BipConstants {
    pub fn validate(&self) -> Result<()> {
        if [self.b0, self.b1, self.b2, self.b3].iter().all(|&b| b > 0.0) {
            Ok(())
        } else {
            Err(Error::Input(format!("invalid BIP constants {self:?}")))
        }
    }
}

/// A decreasing KL-decay rate `r: [0, ∞) → [0, 1]` with `r(0) = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RateFunction {
    /// `r(t) = exp(−λt)`
    Exponential { lambda: f64 },
    /// Linear interpolation of `(times, values)`; constant after the last time.
    Tabulated { times: Vec<f64>, values: Vec<f64> },
}

impl RateFunction {
    pub fn exponential(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0) {
            return Err(Error::Input("rate lambda must be positive".into()));
        }
        Ok(RateFunction::Exponential { lambda })
    }

    pub fn tabulated(times: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        let r = RateFunction::Tabulated { times, values };
        r.validate()?;
        Ok(r)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            RateFunction::Exponential { lambda } if *lambda > 0.0 => Ok(()),
            RateFunction::Exponential { .. } => Err(Error::Input("rate lambda must be positive".into())),
            RateFunction::Tabulated { times, values } => {
                if times.is_empty() || times.len() != values.len() {
                    return Err(Error::Input("tabulated rate needs matching nonempty grids".into()));
                }
                if times[0] != 0.0 || values[0] != 1.0 {
                    return Err(Error::Input("tabulated rate must start at r(0) = 1".into()));
                }
                if times.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::Input("tabulated times must be strictly increasing".into()));
                }
                if values.windows(2).any(|w| w[1] > w[0]) || values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
                    return Err(Error::Input("tabulated values must be nonincreasing in [0, 1]".into()));
                }
                Ok(())
            }
        }
    }

    pub fn eval(&self, t: f64) -> f64 {
        match self {
            RateFunction::Exponential { lambda } => (-lambda * t).exp(),
            RateFunction::Tabulated { times, values } => {
                let k = times.partition_point(|&x| x <= t);
                if k == 0 {
                    values[0]
                } else if k == times.len() {
                    *values.last().unwrap()
                } else {
                    let w = (t - times[k - 1]) / (times[k] - times[k - 1]);
                    (1.0 - w) * values[k - 1] + w * values[k]
                }
            }
        }
    }
}

/// `r⁻¹(ε) = min{t ≥ 0 : r(t) ≤ ε}`.
///
/// Exponential rates invert exactly. Tabulated rates return the smallest grid
/// time whose value is `≤ ε`, an upper bound on the exact minimum of the
/// interpolant. `ε ≥ 1` gives 0.
pub fn rate_inverse(r: &RateFunction, eps: f64) -> Result<f64> {
    r.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Range(format!("rate inverse needs eps > 0, got {eps}")));
    }
    if eps >= 1.0 {
        return Ok(0.0);
    }
    match r {
        RateFunction::Exponential { lambda } => Ok(-eps.ln() / lambda),
        RateFunction::Tabulated { times, values } => values
            .iter()
            .position(|&v| v <= eps)
            .map(|k| times[k])
            .ok_or_else(|| Error::Range(format!("eps {eps} below tabulated minimum {}", values.last().unwrap()))),
    }
}

fn log_s(x: f64, s: f64) -> f64 {
    x.ln() / s.ln()
}

/// Slack for the ceiling so exact integers are not bumped up by rounding.
const CEIL_SLACK: f64 = 1e-12;

pub(crate) fn level_index(k1: f64, s: f64, alpha: f64, eps: f64) -> usize {
    let x = log_s((2.0 * k1).sqrt() / eps, s) / (2.0 * alpha);
    let l = (x - CEIL_SLACK).ceil();
    if l < 1.0 {
        1
    } else {
        l as usize
    }
}

/// High-fidelity level `L = ⌈(1/(2α)) log_s(√(2k₁)/ε)⌉`, at least 1.
pub fn level_for_tolerance(rc: &RateConstants, eps: f64) -> Result<usize> {
    rc.validate()?;
    if !(eps > 0.0) {
        return Err(Error::Input("tolerance must be positive".into()));
    }
    Ok(level_index(rc.k1, rc.s, rc.alpha, eps))
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Input(format!("tolerance must be positive, got {eps}")))
    }
}

fn power_factor(rc: &RateConstants, eps: f64) -> f64 {
    ((2.0 * rc.k1).sqrt() / eps).powf(2.0 * rc.gamma / rc.alpha)
}

/// Single-level bound `(2c₀s^γ/λ) (√(2k₁)/ε)^(2γ/α) ln(√kl0 / (√2 ε))`.
/// Defined for `ε < √(kl0/2)`.
pub fn sl_cost_bound(rc: &RateConstants, eps: f64) -> Result<f64> {
    rc.validate()?;
    check_eps(eps)?;
    let arg = rc.kl0.sqrt() / (2f64.sqrt() * eps);
    if arg <= 1.0 {
        return Err(Error::Range(format!(
            "single-level bound needs eps < sqrt(kl0/2) = {}",
            (rc.kl0 / 2.0).sqrt()
        )));
    }
    Ok(2.0 * rc.c0 * rc.s.powf(rc.gamma) / rc.lambda * power_factor(rc, eps) * arg.ln())
}

/// Multilevel bound
/// `(c₀s^(2γ) / (λγ ln s)) ln(s^α + (k₂+k₃)/k₁) (√(2k₁)/ε)^(2γ/α)`.
pub fn ml_cost_bound(rc: &RateConstants, eps: f64) -> Result<f64> {
    rc.validate()?;
    check_eps(eps)?;
    let pre = rc.c0 * rc.s.powf(2.0 * rc.gamma) / (rc.lambda * rc.gamma * rc.s.ln());
    let log = (rc.s.powf(rc.alpha) + (rc.k2 + rc.k3) / rc.k1).ln();
    Ok(pre * log * power_factor(rc, eps))
}

/// General-rate single-level bound
/// `2c₀s^γ (2k₁)^(γ/α) r⁻¹(ε²/(2 kl0)) ε^(−2γ/α)`.
pub fn sl_cost_bound_general(rc: &RateConstants, r: &RateFunction, eps: f64) -> Result<f64> {
    rc.validate()?;
    check_eps(eps)?;
    let arg = if rc.kl0 > 0.0 {
        eps * eps / (2.0 * rc.kl0)
    } else {
        f64::INFINITY
    };
    let t = rate_inverse(r, arg)?;
    Ok(2.0
        * rc.c0
        * rc.s.powf(rc.gamma)
        * (2.0 * rc.k1).powf(rc.gamma / rc.alpha)
        * t
        * eps.powf(-2.0 * rc.gamma / rc.alpha))
}

fn ml_general_with(rc: &RateConstants, r: &RateFunction, eps: f64, prefactor_k: f64, inverse_arg: f64) -> Result<f64> {
    let t = rate_inverse(r, inverse_arg)?;
    let pre = rc.c0 * rc.s.powf(2.0 * rc.gamma) * prefactor_k.powf(rc.gamma / rc.alpha) / (rc.s.powf(rc.gamma) - 1.0);
    Ok(pre * t * eps.powf(-2.0 * rc.gamma / rc.alpha))
}

/// General-rate multilevel bound
/// `(c₀s^(2γ)(2k₁)^(γ/α) / (s^γ − 1)) r⁻¹(1/(s^α + (k₂+k₃)/k₁)) ε^(−2γ/α)`.
pub fn ml_cost_bound_general(rc: &RateConstants, r: &RateFunction, eps: f64) -> Result<f64> {
    rc.validate()?;
    check_eps(eps)?;
    let arg = 1.0 / (rc.s.powf(rc.alpha) + (rc.k2 + rc.k3) / rc.k1);
    ml_general_with(rc, r, eps, 2.0 * rc.k1, arg)
}

/// Bound value plus the `(k₁, k₂, k₃)` implied by the BIP constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BipBound {
    pub value: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

/// Bayesian-inverse-problem bound
/// `(c₀s^(2γ)(3b₁b₂b₀)^(γ/α) / (s^γ − 1)) r⁻¹(1/(s^α + (1+s^α)(4 + 3b₃/b₂))) ε^(−2γ/α)`.
///
/// Uses `c₀, s, γ, α` from `rc`; its `k` constants are ignored. The implied
/// constants are `k₁ = (3/2)b₀b₁b₂`, `k₂ = k₁(1+s^α)`,
/// `k₃ = (b₀b₁/2)(b₂+b₃)(1+s^α)`.
pub fn bip_cost_bound(rc: &RateConstants, bc: &BipConstants, r: &RateFunction, eps: f64) -> Result<BipBound> {
    rc.validate()?;
    bc.validate()?;
    check_eps(eps)?;
    let sa = rc.s.powf(rc.alpha);
    let k1 = 1.5 * bc.b0 * bc.b1 * bc.b2;
    let k2 = k1 * (1.0 + sa);
    let k3 = 0.5 * bc.b0 * bc.b1 * (bc.b2 + bc.b3) * (1.0 + sa);
    let arg = 1.0 / (sa + (1.0 + sa) * (4.0 + 3.0 * bc.b3 / bc.b2));
    let value = ml_general_with(rc, r, eps, 3.0 * bc.b1 * bc.b2 * bc.b0, arg)?;
    Ok(BipBound { value, k1, k2, k3 })
}

/// One row of a bounds table; entries outside their domain are `None`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundsRow {
    pub eps: f64,
    pub level: usize,
    pub sl_bound: Option<f64>,
    pub ml_bound: Option<f64>,
    pub sl_general: Option<f64>,
    pub ml_general: Option<f64>,
    pub bip_bound: Option<f64>,
}

pub fn bounds_table(
    rc: &RateConstants,
    bc: &BipConstants,
    r: &RateFunction,
    eps_grid: &[f64],
) -> Result<Vec<BoundsRow>> {
    rc.validate()?;
    bc.validate()?;
    r.validate()?;
    eps_grid
        .iter()
        .map(|&eps| {
            Ok(BoundsRow {
                eps,
                level: level_for_tolerance(rc, eps)?,
                sl_bound: sl_cost_bound(rc, eps).ok(),
                ml_bound: ml_cost_bound(rc, eps).ok(),
                sl_general: sl_cost_bound_general(rc, r, eps).ok(),
                ml_general: ml_cost_bound_general(rc, r, eps).ok(),
                bip_bound: bip_cost_bound(rc, bc, r, eps).ok().map(|b| b.value),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn rc() -> RateConstants {
        RateConstants {
            c0: 1.0,
            s: 2.0,
            gamma: 1.0,
            alpha: 1.0,
            k1: 0.5,
            k2: 1.0,
            k3: 0.0,
            lambda: 1.0,
            kl0: 2.0,
        }
    }

    fn exp1() -> RateFunction {
        RateFunction::exponential(1.0).unwrap()
    }

    #[test]
    fn rate_inverse_examples() {
        let r = RateFunction::exponential(2.0).unwrap();
        assert_relative_eq!(rate_inverse(&r, (-4.0f64).exp()).unwrap(), 2.0, max_relative = 1e-15);
        assert_eq!(rate_inverse(&r, 1.0).unwrap(), 0.0);
        let step = RateFunction::tabulated(vec![0.0, 1.0], vec![1.0, 0.1]).unwrap();
        assert_eq!(rate_inverse(&step, 0.5).unwrap(), 1.0);
        assert_eq!(rate_inverse(&step, 1.0).unwrap(), 0.0);
        assert!(matches!(rate_inverse(&step, 0.01), Err(Error::Range(_))));
        assert!(RateFunction::tabulated(vec![0.0, 1.0], vec![0.9, 0.1]).is_err());
        assert!(RateFunction::tabulated(vec![0.0, 1.0], vec![1.0, 1.1]).is_err());
    }

    #[test]
    fn tabulated_inverse_properties() {
        let times: Vec<f64> = (0..20).map(|i| i as f64 * 0.5).collect();
        let values: Vec<f64> = times.iter().map(|t| (-0.7 * t).exp()).collect();
        let r = RateFunction::tabulated(times.clone(), values.clone()).unwrap();
        for (t, v) in times.iter().zip(&values) {
            assert!(rate_inverse(&r, *v).unwrap() <= *t);
        }
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let eps = values[19] + (1.0 - values[19]) * k as f64 / 100.0;
            let t = rate_inverse(&r, eps).unwrap();
            assert!(t <= prev);
            prev = t;
        }
    }

    #[test]
    fn hand_values() {
        let c = rc();
        assert_relative_eq!(
            sl_cost_bound(&c, 0.1).unwrap(),
            400.0 * 10f64.ln(),
            max_relative = 1e-14
        );
        assert_relative_eq!(sl_cost_bound(&c, 0.1).unwrap(), 921.0340371976183, max_relative = 1e-12);
        assert_relative_eq!(ml_cost_bound(&c, 0.1).unwrap(), 800.0, max_relative = 1e-12);
        assert_relative_eq!(
            ml_cost_bound_general(&c, &exp1(), 0.1).unwrap(),
            554.5177444479563,
            max_relative = 1e-12
        );
        assert_relative_eq!(
            sl_cost_bound_general(&c, &exp1(), 0.1).unwrap(),
            400.0 * 400f64.ln(),
            max_relative = 1e-12
        );
        assert_eq!(level_for_tolerance(&c, 0.25).unwrap(), 1);
        assert_eq!(level_for_tolerance(&c, 0.05).unwrap(), 3);
        assert_eq!(level_for_tolerance(&c, 5.0).unwrap(), 1);
    }

    #[test]
    fn sl_bound_domain_and_endpoint() {
        let c = rc();
        assert!(matches!(sl_cost_bound(&c, 1.0), Err(Error::Range(_))));
        let near = sl_cost_bound(&c, 1.0 - 1e-9).unwrap();
        assert!(near > 0.0 && near < 1e-6);
        // ε → ε/2 multiplies by 4 (1 + ln2 / ln(√kl0/(√2ε)))
        let eps = 0.05;
        let ratio = sl_cost_bound(&c, eps / 2.0).unwrap() / sl_cost_bound(&c, eps).unwrap();
        let log = (c.kl0.sqrt() / (2f64.sqrt() * eps)).ln();
        assert_relative_eq!(ratio, 4.0 * (1.0 + 2f64.ln() / log), max_relative = 1e-12);
    }

    #[test]
    fn ml_bound_scaling_and_log_identity() {
        let c = rc();
        let r = ml_cost_bound(&c, 0.05).unwrap() / ml_cost_bound(&c, 0.1).unwrap();
        assert_relative_eq!(r, 4.0, max_relative = 1e-12);
        let e = RateConstants {
            k2: 0.0,
            k3: 0.0,
            alpha: 1.0 / 2f64.ln(),
            ..c
        };
        // s^α = e, so the log factor is 1
        let v = ml_cost_bound(&e, 0.1).unwrap();
        let pre = 4.0 / 2f64.ln() * (1.0f64 / 0.1).powf(2.0 / e.alpha);
        assert_relative_eq!(v, pre, max_relative = 1e-12);
    }

    #[test]
    fn general_bounds_behaviour() {
        let c = rc();
        let r = exp1();
        let a = sl_cost_bound_general(&c, &r, 0.1).unwrap();
        let b = sl_cost_bound_general(&c, &r, 0.05).unwrap();
        let (ta, tb) = (
            rate_inverse(&r, 0.01 / 4.0).unwrap(),
            rate_inverse(&r, 0.0025 / 4.0).unwrap(),
        );
        assert_relative_eq!(b / a, 4.0 * tb / ta, max_relative = 1e-12);
        let zero = RateFunction::tabulated(vec![0.0, 1.0], vec![1.0, 0.5]).unwrap();
        let big = RateConstants { kl0: 1e-6, ..c };
        assert_eq!(sl_cost_bound_general(&big, &zero, 0.1).unwrap(), 0.0);
        let mut prev = 0.0;
        for eps in [1e-1, 1e-2, 1e-3] {
            let ratio = sl_cost_bound_general(&c, &r, eps).unwrap() / ml_cost_bound_general(&c, &r, eps).unwrap();
            assert!(ratio > prev);
            prev = ratio;
        }
        let mut prev = 0.0;
        for s in [2.0, 3.0, 5.0, 10.0, 20.0] {
            let v = ml_cost_bound_general(&RateConstants { s, ..c }, &r, 0.1).unwrap();
            assert!(v > prev);
            prev = v;
        }
    }

    #[test]
    fn bip_hand_value_and_implied_constants() {
        let c = rc();
        let ones = BipConstants {
            b0: 1.0,
            b1: 1.0,
            b2: 1.0,
            b3: 1.0,
        };
        let b = bip_cost_bound(&c, &ones, &exp1(), 0.1).unwrap();
        assert_relative_eq!(b.value, 1200.0 * 23f64.ln(), max_relative = 1e-12);
        assert_relative_eq!(b.value, 3762.5930591149795, max_relative = 1e-12);
        assert_eq!((b.k1, b.k2, b.k3), (1.5, 4.5, 3.0));
    }

    #[test]
    fn bip_monotone_in_b2_b3() {
        let c = rc();
        let r = exp1();
        let mut prev = f64::INFINITY;
        for (b2, b3) in [(1.0, 1.0), (2.0, 0.5), (4.0, 0.25), (8.0, 0.1)] {
            let bc = BipConstants {
                b0: 1.0,
                b1: 1.0,
                b2,
                b3,
            };
            let arg = 1.0 / (c.s.powf(c.alpha) + (1.0 + c.s.powf(c.alpha)) * (4.0 + 3.0 * b3 / b2));
            let v = bip_cost_bound(&c, &bc, &r, 0.1).unwrap().value / (3.0 * b2).powf(c.gamma / c.alpha);
            assert!(v < prev, "arg {arg}");
            prev = v;
        }
    }

    #[test]
    fn bounds_table_marks_out_of_domain() {
        let rows = bounds_table(
            &rc(),
            &BipConstants {
                b0: 1.0,
                b1: 1.0,
                b2: 1.0,
                b3: 1.0,
            },
            &exp1(),
            &[2.0, 0.1],
        )
        .unwrap();
        assert!(rows[0].sl_bound.is_none());
        assert!(rows[1].sl_bound.is_some());
        assert_eq!(rows[1].level, level_for_tolerance(&rc(), 0.1).unwrap());
    }

    #[test]
    fn bip_matches_general_bound_at_implied_constants() {
        // The implied constants give the argument 1/(s^α + (1+s^α)(1 + (b₂+b₃)/(3b₂))),
        // which differs from the printed 4 + 3b₃/b₂. Both prefactors agree.
        let c = rc();
        let r = exp1();
        let mut state = 0x9e3779b97f4a7c15u64;
        let mut uniform = || {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            0.2 + 3.0 * (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let bc = BipConstants {
                b0: uniform(),
                b1: uniform(),
                b2: uniform(),
                b3: uniform(),
            };
            let b = bip_cost_bound(&c, &bc, &r, 0.1).unwrap();
            let implied = RateConstants {
                k1: b.k1,
                k2: b.k2,
                k3: b.k3,
                ..c
            };
            let general = ml_cost_bound_general(&implied, &r, 0.1).unwrap();
            let sa = c.s.powf(c.alpha);
            let printed = 1.0 / (sa + (1.0 + sa) * (4.0 + 3.0 * bc.b3 / bc.b2));
            let derived = 1.0 / (sa + (1.0 + sa) * (1.0 + (bc.b2 + bc.b3) / (3.0 * bc.b2)));
            let pre = b.value / rate_inverse(&r, printed).unwrap();
            assert_relative_eq!(general, pre * rate_inverse(&r, derived).unwrap(), max_relative = 1e-12);
            assert!(general < b.value);
        }
        let ones = BipConstants {
            b0: 1.0,
            b1: 1.0,
            b2: 1.0,
            b3: 1.0,
        };
        let b = bip_cost_bound(&c, &ones, &r, 0.1).unwrap();
        let implied = RateConstants {
            k1: b.k1,
            k2: b.k2,
            k3: b.k3,
            ..c
        };
        assert_relative_eq!(
            ml_cost_bound_general(&implied, &r, 0.1).unwrap(),
            2335.092178866376,
            max_relative = 1e-12
        );
    }

    /// Exponent `p` such that `value(ε) ε^p` is affine in `ln(1/ε)` over three
    /// consecutive decades, found by bisection on the second difference.
    fn fitted_exponent(f: impl Fn(f64) -> f64, e0: f64, guess: f64) -> f64 {
        let xs = [e0, e0 / 10.0, e0 / 100.0];
        let curvature = |p: f64| {
            let g: Vec<f64> = xs.iter().map(|&e| f(e) * e.powf(p)).collect();
            (g[0] - 2.0 * g[1] + g[2]) / g[1]
        };
        let (mut lo, mut hi) = (guess - 0.05, guess + 0.05);
        assert!(curvature(lo).signum() != curvature(hi).signum());
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if curvature(mid).signum() == curvature(lo).signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn single_level_analyses_share_exponent() {
        let c = rc();
        let r = exp1();
        for e0 in [1e-1, 1e-2] {
            let a = fitted_exponent(|e| sl_cost_bound(&c, e).unwrap(), e0, 2.0);
            let b = fitted_exponent(|e| sl_cost_bound_general(&c, &r, e).unwrap(), e0, 2.0);
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
            assert!((a - 2.0 * c.gamma / c.alpha).abs() < 1e-6);
        }
    }

    #[test]
    fn ml_over_sl_decreases_to_zero() {
        for c in [
            rc(),
            RateConstants {
                s: 3.0,
                gamma: 2.0,
                alpha: 1.5,
                k3: 0.7,
                ..rc()
            },
        ] {
            let mut prev = f64::INFINITY;
            for k in 1..40 {
                let eps = 10f64.powf(-0.5 * k as f64);
                let ratio = ml_cost_bound(&c, eps).unwrap() / sl_cost_bound(&c, eps).unwrap();
                assert!(ratio < prev);
                prev = ratio;
            }
            assert!(prev < 0.1);
        }
    }

    #[test]
    fn all_bounds_increase_as_eps_shrinks() {
        let c = rc();
        let r = RateFunction::tabulated(
            (0..400).map(|i| i as f64 * 0.1).collect(),
            (0..400).map(|i| (-0.1 * i as f64).exp()).collect(),
        )
        .unwrap();
        let ones = BipConstants {
            b0: 1.0,
            b1: 1.0,
            b2: 1.0,
            b3: 1.0,
        };
        let grid: Vec<f64> = (0..30).map(|k| 0.9 * 0.7f64.powi(k)).collect();
        for w in grid.windows(2) {
            let (big, small) = (w[0], w[1]);
            assert!(sl_cost_bound(&c, small).unwrap() > sl_cost_bound(&c, big).unwrap());
            assert!(ml_cost_bound(&c, small).unwrap() > ml_cost_bound(&c, big).unwrap());
            assert!(ml_cost_bound_general(&c, &r, small).unwrap() > ml_cost_bound_general(&c, &r, big).unwrap());
            assert!(
                bip_cost_bound(&c, &ones, &r, small).unwrap().value > bip_cost_bound(&c, &ones, &r, big).unwrap().value
            );
            for rate in [&exp1(), &r] {
                if let (Ok(a), Ok(b)) = (
                    sl_cost_bound_general(&c, rate, small),
                    sl_cost_bound_general(&c, rate, big),
                ) {
                    assert!(a > b);
                }
            }
        }
    }

    #[test]
    fn invalid_inputs_rejected() {
        let c = rc();
        assert!(ml_cost_bound(&RateConstants { s: 1.0, ..c }, 0.1).is_err());
        assert!(ml_cost_bound(&RateConstants { k1: 0.0, ..c }, 0.1).is_err());
        assert!(ml_cost_bound(&c, 0.0).is_err());
        assert!(level_for_tolerance(&c, -1.0).is_err());
        assert!(bip_cost_bound(
            &c,
            &BipConstants {
                b0: 0.0,
                b1: 1.0,
                b2: 1.0,
                b3: 1.0
            },
            &exp1(),
            0.1
        )
        .is_err());
        assert!(RateFunction::exponential(0.0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn rate_inverse_nonincreasing(lambda in 0.1f64..5.0, a in 1e-6f64..1.0, b in 1e-6f64..1.0) {
            let r = RateFunction::exponential(lambda).unwrap();
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            proptest::prop_assert!(rate_inverse(&r, lo).unwrap() >= rate_inverse(&r, hi).unwrap());
            let t = rate_inverse(&r, lo).unwrap();
            proptest::prop_assert!(r.eval(t) <= lo * (1.0 + 1e-12));
        }

        #[test]
        fn level_index_is_smallest_admissible(k1 in 0.01f64..10.0, s in 1.1f64..8.0, alpha in 0.2f64..3.0, eps in 1e-4f64..1.0) {
            let l = level_index(k1, s, alpha, eps);
            let x = ((2.0 * k1).sqrt() / eps).ln() / s.ln() / (2.0 * alpha);
            proptest::prop_assert!(l >= 1);
            proptest::prop_assert!(l as f64 >= x - 1e-9);
            if l > 1 {
                proptest::prop_assert!(((l - 1) as f64) < x);
            }
        }
    }
}
