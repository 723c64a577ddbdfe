//! Closed-form and series targets: the Kesten density and CDF of the Sinai
//! limit variable V, its variance, the fluctuation scale χ_n and the limit
//! covariances the simulations are compared against.
//!
//! The density is
//!
//! ```text
//! p(x) = (2/π) Σ_{k≥0} (-1)^k / (2k+1) · exp(-a_k |x|),   a_k = (2k+1)² π² / 8.
//! ```
//!
//! That series converges slowly as `x → 0`. Poisson summation over the odd
//! character mod 4 gives the dual form
//!
//! ```text
//! p(x) = 1/2 - Σ_{k≥0} (-1)^k erfc((2k+1) / √(2|x|)),
//! ```
//!
//! which converges fastest exactly where the first one is slow. Both are
//! integrated term by term for the CDF.

use serde::{Deserialize, Serialize};
use libm::erfc;
use std::f64::consts::PI;

use crate::cooling::Regime;
use crate::error::{Error, Result};

/// E[V²] = (4096/π⁷) Σ (-1)^k / (2k+1)⁷ = 4096 β(7) / π⁷ = 61/45.
pub const SIGMA_V_SQ: f64 = 61.0 / 45.0;

/// Default number of terms of the exponential series.
pub const DEFAULT_TRUNCATION: usize = 64;

const AGREEMENT: f64 = 1e-12;
const MAX_TERMS: usize = 1 << 22;
// Below this |x| the erfc form is used.
const DUAL_CROSSOVER: f64 = 1.0;

#[inline]
fn rate(k: usize) -> f64 {
    let m = (2 * k + 1) as f64;
    m * m * PI * PI / 8.0
}

#[inline]
fn sign(k: usize) -> f64 {
    if k.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Partial sum of the exponential series for p(x) with `terms` terms.
pub fn kesten_density_partial(x: f64, terms: usize) -> f64 {
    let a = x.abs();
    let s: f64 = (0..terms)
        .map(|k| sign(k) / (2 * k + 1) as f64 * (-rate(k) * a).exp())
        .sum();
    2.0 / PI * s
}

/// Partial sum of the term-wise integrated series for F(x) with `terms`
/// terms; `F(x) = 1 - F(-x)` for negative `x`.
pub fn kesten_cdf_partial(x: f64, terms: usize) -> f64 {
    let a = x.abs();
    let s: f64 = (0..terms)
        .map(|k| sign(k) / (2 * k + 1) as f64 / rate(k) * -(-rate(k) * a).exp_m1())
        .sum();
    let upper = 0.5 + 2.0 / PI * s;
    let f = if x >= 0.0 { upper } else { 1.0 - upper };
    f.clamp(0.0, 1.0)
}

fn dual_density(a: f64) -> f64 {
    let scale = (2.0 * a).sqrt();
    let mut s = 0.0;
    for k in 0.. {
        let term = erfc((2 * k + 1) as f64 / scale);
        if term == 0.0 {
            break;
        }
        s += sign(k) * term;
    }
    0.5 - s
}

fn dual_cdf_upper(a: f64) -> f64 {
    // ∫_0^a erfc(c/√u) du = (a + 2c²) erfc(c/√a) - 2c √(a/π) e^{-c²/a}
    // with c = (2k+1)/√2.
    let scale = (2.0 * a).sqrt();
    let mut s = 0.0;
    for k in 0.. {
        let m = (2 * k + 1) as f64;
        let z = m / scale;
        let e = erfc(z);
        if e == 0.0 {
            break;
        }
        let term = (a + m * m) * e - m * (2.0 * a / PI).sqrt() * (-z * z).exp();
        s += sign(k) * term;
    }
    0.5 + 0.5 * a - s
}

/// Evaluator for p and F with a base truncation that is doubled until two
/// successive partial sums agree to 1e-12.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KestenSeries {
    truncation: usize,
}

impl Default for KestenSeries {
    fn default() -> Self {
        KestenSeries {
            truncation: DEFAULT_TRUNCATION,
        }
    }
}

impl KestenSeries {
    pub fn new(truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::domain("series truncation must be at least 1"));
        }
        Ok(KestenSeries { truncation })
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    fn adaptive(&self, f: impl Fn(usize) -> f64) -> f64 {
        let mut k = self.truncation;
        let mut prev = f(k);
        while k < MAX_TERMS {
            k *= 2;
            let next = f(k);
            if (next - prev).abs() <= AGREEMENT {
                return next;
            }
            prev = next;
        }
        prev
    }

    pub fn density(&self, x: f64) -> f64 {
        let a = x.abs();
        if a == 0.0 {
            0.5
        } else if a < DUAL_CROSSOVER {
            dual_density(a)
        } else {
            self.adaptive(|k| kesten_density_partial(a, k)).max(0.0)
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let a = x.abs();
        let upper = if a == 0.0 {
            0.5
        } else if a < DUAL_CROSSOVER {
            dual_cdf_upper(a)
        } else {
            // F(x) = 1 - (16/π³) Σ (-1)^k/(2k+1)³ e^{-a_k x}; same partial sums
            // as kesten_cdf_partial with the constant part summed exactly.
            self.adaptive(|k| {
                let tail: f64 = (0..k)
                    .map(|j| sign(j) / ((2 * j + 1) as f64).powi(3) * (-rate(j) * a).exp())
                    .sum();
                1.0 - 16.0 / PI.powi(3) * tail
            })
        };
        let f = if x >= 0.0 { upper } else { 1.0 - upper };
        f.clamp(0.0, 1.0)
    }
}

/// p(x) with the default series settings.
pub fn kesten_density(x: f64) -> f64 {
    KestenSeries::default().density(x)
}

/// F(x) with the default series settings.
pub fn kesten_cdf(x: f64) -> f64 {
    KestenSeries::default().cdf(x)
}

fn sigma_v_partial(terms: usize) -> f64 {
    let s: f64 = (0..terms)
        .map(|k| sign(k) / ((2 * k + 1) as f64).powi(7))
        .sum();
    4096.0 / PI.powi(7) * s
}

/// σ_V² = E[V²] from the term-wise integrated series, starting at `terms`
/// terms and doubling until successive partial sums agree to 1e-12.
pub fn sigma_v_sq(terms: usize) -> Result<f64> {
    Ok(KestenSeries::new(terms)?.adaptive(sigma_v_partial))
}

/// σ_μ², σ_V² and the cooling regime.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScalingConstants {
    pub sigma_mu_sq: f64,
    pub sigma_v_sq: f64,
    pub regime: Regime,
}

impl ScalingConstants {
    pub fn new(sigma_mu_sq: f64, sigma_v_sq: f64, regime: Regime) -> Result<Self> {
        if !(sigma_mu_sq > 0.0 && sigma_mu_sq.is_finite()) {
            return Err(Error::domain(format!("σ_μ² = {sigma_mu_sq} must be positive")));
        }
        if !(sigma_v_sq > 0.0 && sigma_v_sq.is_finite()) {
            return Err(Error::domain(format!("σ_V² = {sigma_v_sq} must be positive")));
        }
        match regime {
            Regime::R1 { b, beta } if !(b > 0.0) || !(beta > 1.0) => {
                return Err(Error::domain("R1 needs B > 0 and β > 1"));
            }
            Regime::R2 { c } if !(c > 0.0) => return Err(Error::domain("R2 needs C > 0")),
            _ => {}
        }
        Ok(ScalingConstants {
            sigma_mu_sq,
            sigma_v_sq,
            regime,
        })
    }

    /// (σ_μ² σ_V)², with σ_V the standard deviation of V.
    pub fn prefactor(&self) -> f64 {
        self.sigma_mu_sq * self.sigma_mu_sq * self.sigma_v_sq
    }

    /// The variance scale χ_n(τ).
    ///
    /// R1: `(σ_μ²σ_V)² ((β-1)/β)⁴ (n/B)^{1/β} ln⁴ n`;
    /// R2: `(σ_μ²σ_V)² ln⁵ n / (5 C⁵)`.
    pub fn chi_n(&self, n: f64) -> Result<f64> {
        if !(n >= 2.0) {
            return Err(Error::domain(format!("chi_n needs n >= 2, got {n}")));
        }
        let ln = n.ln();
        Ok(match self.regime {
            Regime::R1 { b, beta } => {
                self.prefactor() * ((beta - 1.0) / beta).powi(4) * (n / b).powf(1.0 / beta) * ln.powi(4)
            }
            Regime::R2 { c } => self.prefactor() / (5.0 * c.powi(5)) * ln.powi(5),
        })
    }
}

/// The limit process on the time grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum LimitLaw {
    /// `B_{t^{1/β}}` on `[0, 1]`.
    TimeChangedBrownian { beta: f64 },
    /// `N_t = N ~ N(0, 1)` on `[a, 1]`.
    RandomConstant { a: f64 },
}

impl LimitLaw {
    pub fn for_regime(regime: Regime, a: f64) -> Self {
        match regime {
            Regime::R1 { beta, .. } => LimitLaw::TimeChangedBrownian { beta },
            Regime::R2 { .. } => LimitLaw::RandomConstant { a },
        }
    }

    /// Lower end of the window on which the law is stated.
    pub fn window_start(&self) -> f64 {
        match self {
            LimitLaw::TimeChangedBrownian { .. } => 0.0,
            LimitLaw::RandomConstant { a } => *a,
        }
    }
}

/// Covariance of the limit process at times `t`, `s`.
pub fn limit_cov(t: f64, s: f64, law: &LimitLaw) -> Result<f64> {
    let lo = law.window_start();
    for v in [t, s] {
        if !(lo..=1.0).contains(&v) {
            return Err(Error::domain(format!("time {v} outside [{lo}, 1]")));
        }
    }
    Ok(match law {
        LimitLaw::TimeChangedBrownian { beta } => t.min(s).powf(1.0 / beta),
        LimitLaw::RandomConstant { .. } => 1.0,
    })
}

/// Asymptotic block variance `(σ_μ²σ_V)² ln⁴ T_j`.
pub fn block_variance_target(gap: f64, sigma_mu_sq: f64, sigma_v_sq: f64) -> Result<f64> {
    if !(gap >= 2.0) {
        return Err(Error::domain(format!("block length {gap} < 2")));
    }
    Ok(sigma_mu_sq * sigma_mu_sq * sigma_v_sq * gap.ln().powi(4))
}

/// Limit of the increment variance over `[t, s]`: `χ (s^{1/β} - t^{1/β})`.
pub fn increment_var_target(t: f64, s: f64, chi: f64, beta: f64) -> Result<f64> {
    if !(t < s) || t < 0.0 || s > 1.0 {
        return Err(Error::domain(format!("need 0 <= t < s <= 1, got ({t}, {s})")));
    }
    Ok(chi * (s.powf(1.0 / beta) - t.powf(1.0 / beta)))
}
