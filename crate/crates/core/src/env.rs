//! Resampling rules and lazily materialized environments.
//!
//! A [`ResamplingRule`] is the single-site law α on `(0, 1)`. An
//! [`Environment`] is one i.i.d. field ω drawn from α for a fixed
//! `(seed, replica, block)`; site values are generated on first touch from a
//! keyed stream and cached in a dense window around the walker.

use rand_chacha::ChaCha8Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::quad;
use crate::stream::{self, Purpose};

/// Default tolerance on `|E[log ρ]|` for accepting a rule as recurrent.
pub const DEFAULT_RECURRENCE_TOL: f64 = 1e-9;

const WEIGHT_SUM_TOL: f64 = 1e-12;

/// The single-site law α.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ResamplingRule {
    /// Values `p` and `1 - p`, each with weight ½.
    TwoPoint { p: f64 },
    /// Arbitrary finite support.
    Finite { values: Vec<f64>, weights: Vec<f64> },
    /// Beta(a, a).
    SymmetricBeta { a: f64 },
}

/// Outcome of [`validate_recurrent`].
#[derive(Debug, Clone, PartialEq)]
pub enum Recurrence {
    Accept,
    Reject(RejectReason),
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    NonzeroDrift { mean: f64 },
    ZeroVariance,
    InfiniteVariance,
}

impl std::fmt::Display for RejectReason {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RejectReason::NonzeroDrift { mean } => write!(f, "nonzero drift E[log rho] = {mean}"),
            RejectReason::ZeroVariance => f.write_str("zero variance of log rho"),
            RejectReason::InfiniteVariance => f.write_str("variance of log rho is not finite"),
        }
    }
}

impl ResamplingRule {
    pub fn two_point(p: f64) -> Result<Self> {
        let rule = ResamplingRule::TwoPoint { p };
        rule.check()?;
        Ok(rule)
    }

    pub fn finite(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        let rule = ResamplingRule::Finite { values, weights };
        rule.check()?;
        Ok(rule)
    }

    pub fn symmetric_beta(a: f64) -> Result<Self> {
        let rule = ResamplingRule::SymmetricBeta { a };
        rule.check()?;
        Ok(rule)
    }

    /// Checks the support and weight invariants.
    pub fn check(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        match self {
            ResamplingRule::TwoPoint { p } => {
                if !in_unit(*p) {
                    return Err(Error::InvalidRule(format!("p = {p} must lie in (0, 1)")));
                }
            }
            ResamplingRule::Finite { values, weights } => {
                if values.is_empty() || values.len() != weights.len() {
                    return Err(Error::InvalidRule(format!(
                        "{} values but {} weights",
                        values.len(),
                        weights.len()
                    )));
                }
                if let Some(v) = values.iter().find(|v| !in_unit(**v)) {
                    return Err(Error::InvalidRule(format!(
                        "support value {v} outside (0, 1)"
                    )));
                }
                if let Some(w) = weights.iter().find(|w| !(**w > 0.0) || !w.is_finite()) {
                    return Err(Error::InvalidRule(format!("weight {w} is not positive")));
                }
                let total: f64 = weights.iter().sum();
                if (total - 1.0).abs() > WEIGHT_SUM_TOL {
                    return Err(Error::InvalidRule(format!(
                        "weights sum to {total}, not 1"
                    )));
                }
            }
            ResamplingRule::SymmetricBeta { a } => {
                if !(*a > 0.0) || !a.is_finite() {
                    return Err(Error::InvalidRule(format!("beta shape {a} must be positive")));
                }
            }
        }
        Ok(())
    }

    /// `(value, weight)` pairs for discrete rules, `None` for beta.
    pub fn support(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ResamplingRule::TwoPoint { p } => Some(vec![(*p, 0.5), (1.0 - p, 0.5)]),
            ResamplingRule::Finite { values, weights } => {
                Some(values.iter().copied().zip(weights.iter().copied()).collect())
            }
            ResamplingRule::SymmetricBeta { .. } => None,
        }
    }

    /// Draws one site value. Discrete rules consume exactly one `u64`.
    pub fn sample(&self, rng: &mut ChaCha8Rng) -> f64 {
        match self {
            ResamplingRule::TwoPoint { p } => {
                if stream::unit_f64(rng) < 0.5 {
                    *p
                } else {
                    1.0 - p
                }
            }
            ResamplingRule::Finite { values, weights } => {
                let u = stream::unit_f64(rng);
                let mut acc = 0.0;
                for (v, w) in values.iter().zip(weights) {
                    acc += w;
                    if u < acc {
                        return *v;
                    }
                }
                *values.last().expect("non-empty support")
            }
            ResamplingRule::SymmetricBeta { a } => {
                let dist = Beta::new(*a, *a).expect("validated shape");
                loop {
                    // Beta draws can round to the closed endpoints for tiny a.
                    let w: f64 = dist.sample(rng);
                    if w > 0.0 && w < 1.0 {
                        return w;
                    }
                }
            }
        }
    }
}

/// `(E[log ρ(0)], Var(log ρ(0)))` with `ρ = (1 - ω) / ω`, natural log.
///
/// Closed form for discrete rules. For Beta(a, a) the moments are integrals of
/// the logit density `e^{a y} / (1 + e^y)^{2a} / B(a, a)` over the real line,
/// evaluated by adaptive quadrature.
pub fn log_rho_moments(rule: &ResamplingRule) -> Result<(f64, f64)> {
    rule.check()?;
    match rule.support() {
        Some(support) => {
            let mean: f64 = support
                .iter()
                .map(|(v, w)| w * ((1.0 - v) / v).ln())
                .sum();
            let var: f64 = support
                .iter()
                .map(|(v, w)| {
                    let d = ((1.0 - v) / v).ln() - mean;
                    w * d * d
                })
                .sum();
            Ok((mean, var))
        }
        None => {
            let ResamplingRule::SymmetricBeta { a } = *rule else {
                unreachable!()
            };
            let ln_b = 2.0 * ln_gamma(a) - ln_gamma(2.0 * a);
            // log ρ = -y where y = logit(ω).
            let density = move |y: f64| {
                let softplus = |z: f64| if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() };
                (-a * softplus(-y) - a * softplus(y) - ln_b).exp()
            };
            // Tails decay like e^{-a|y|}; stop where y^2 e^{-a|y|} < 1e-30.
            let mut half = 10.0;
            while half * half * (-a * half).exp() > 1e-30 {
                half *= 1.5;
            }
            let mean = -quad::integrate(|y| y * density(y), -half, half, 1e-15, 1e-13);
            let second = quad::integrate(|y| y * y * density(y), -half, half, 1e-15, 1e-13);
            Ok((mean, second - mean * mean))
        }
    }
}

/// Accepts `rule` iff `|E[log ρ]| <= tol` and `Var(log ρ)` is positive and
/// finite.
pub fn validate_recurrent(rule: &ResamplingRule, tol: f64) -> Result<Recurrence> {
    let (mean, var) = log_rho_moments(rule)?;
    Ok(if !var.is_finite() {
        Recurrence::Reject(RejectReason::InfiniteVariance)
    } else if mean.abs() > tol {
        Recurrence::Reject(RejectReason::NonzeroDrift { mean })
    } else if var <= 0.0 {
        Recurrence::Reject(RejectReason::ZeroVariance)
    } else {
        Recurrence::Accept
    })
}

/// `E[ω(0)]`.
pub fn mean_omega(rule: &ResamplingRule) -> f64 {
    match rule.support() {
        Some(s) => s.iter().map(|(v, w)| v * w).sum(),
        None => 0.5,
    }
}

/// Source of site values for the walker. [`Environment`] is the production
/// implementation; tests substitute forced fields.
pub trait OmegaField {
    /// Switches to the environment of cooling block `block`; the walker is
    /// currently at `position`.
    fn refresh(&mut self, block: u64, position: i64);
    fn omega(&mut self, site: i64) -> f64;
}

/// One realization of ω for a fixed `(seed, replica, block)`.
#[derive(Debug, Clone)]
pub struct Environment<'a> {
    rule: &'a ResamplingRule,
    seed: u64,
    replica: u64,
    block: u64,
    key: [u8; 32],
    // values[i] holds ω(lo + i); 0.0 marks a site not yet drawn.
    lo: i64,
    values: Vec<f64>,
}

const WINDOW_INIT: usize = 64;

impl<'a> Environment<'a> {
    pub fn new(rule: &'a ResamplingRule, seed: u64, replica: u64, block: u64) -> Self {
        Environment {
            rule,
            seed,
            replica,
            block,
            key: stream::key(seed, Purpose::Environment, replica, block),
            lo: -(WINDOW_INIT as i64) / 2,
            values: vec![0.0; WINDOW_INIT],
        }
    }

    pub fn replica(&self) -> u64 {
        self.replica
    }

    pub fn block(&self) -> u64 {
        self.block
    }

    /// Rebinds to another block and drops the cache. Recenters the window on
    /// `center`.
    pub fn rebind(&mut self, block: u64, center: i64) {
        self.block = block;
        self.key = stream::key(self.seed, Purpose::Environment, self.replica, block);
        self.values.clear();
        self.values.resize(WINDOW_INIT, 0.0);
        self.lo = center - (WINDOW_INIT as i64) / 2;
    }

    /// ω at `site`; a pure function of `(seed, replica, block, site)`.
    #[inline]
    pub fn omega_at(&mut self, site: i64) -> f64 {
        let idx = site.wrapping_sub(self.lo);
        if idx >= 0 && (idx as usize) < self.values.len() {
            let v = self.values[idx as usize];
            if v != 0.0 {
                return v;
            }
            let v = self.draw(site);
            self.values[idx as usize] = v;
            return v;
        }
        self.grow_to(site);
        self.omega_at(site)
    }

    /// Number of sites realized in the current block.
    pub fn realized(&self) -> usize {
        self.values.iter().filter(|v| **v != 0.0).count()
    }

    fn draw(&self, site: i64) -> f64 {
        let mut rng = stream::stream(self.key, site as u64);
        self.rule.sample(&mut rng)
    }

    #[cold]
    fn grow_to(&mut self, site: i64) {
        let len = self.values.len() as i64;
        let hi = self.lo + len;
        let new_lo = self.lo.min(site - len / 2);
        let new_hi = hi.max(site + len / 2 + 1);
        let mut values = vec![0.0; (new_hi - new_lo) as usize];
        let shift = (self.lo - new_lo) as usize;
        values[shift..shift + self.values.len()].copy_from_slice(&self.values);
        self.values = values;
        self.lo = new_lo;
    }
}

impl OmegaField for Environment<'_> {
    fn refresh(&mut self, block: u64, position: i64) {
        self.rebind(block, position);
    }

    #[inline]
    fn omega(&mut self, site: i64) -> f64 {
        self.omega_at(site)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LN2: f64 = std::f64::consts::LN_2;

    #[test]
    fn two_point_third_moments() {
        let rule = ResamplingRule::two_point(1.0 / 3.0).unwrap();
        let (m, v) = log_rho_moments(&rule).unwrap();
        assert!(m.abs() < 1e-15);
        assert!((v - LN2 * LN2).abs() < 1e-15);
        assert!((v - 0.480453).abs() < 1e-6);
    }

    #[test]
    fn point_mass_half() {
        let rule = ResamplingRule::finite(vec![0.5], vec![1.0]).unwrap();
        assert_eq!(log_rho_moments(&rule).unwrap(), (0.0, 0.0));
        assert_eq!(
            validate_recurrent(&rule, 1e-9).unwrap(),
            Recurrence::Reject(RejectReason::ZeroVariance)
        );
    }

    #[test]
    fn drifting_rule() {
        let rule = ResamplingRule::finite(vec![0.25, 0.5], vec![0.5, 0.5]).unwrap();
        let (m, v) = log_rho_moments(&rule).unwrap();
        let ln3 = 3f64.ln();
        assert!((m - 0.5 * ln3).abs() < 1e-15);
        assert!((m - 0.549306).abs() < 1e-6);
        assert!((v - 0.25 * ln3 * ln3).abs() < 1e-15);
        assert!(matches!(
            validate_recurrent(&rule, 1e-9).unwrap(),
            Recurrence::Reject(RejectReason::NonzeroDrift { .. })
        ));
        assert!((mean_omega(&rule) - 0.375).abs() < 1e-16);
    }

    #[test]
    fn accept_symmetric_two_point() {
        let rule = ResamplingRule::two_point(1.0 / 3.0).unwrap();
        assert_eq!(validate_recurrent(&rule, 1e-12).unwrap(), Recurrence::Accept);
        assert_eq!(mean_omega(&rule), 0.5);
    }

    #[test]
    fn beta_moments_match_trigamma() {
        // Var(logit ω) = 2 ψ'(a) for ω ~ Beta(a, a).
        let pi2 = std::f64::consts::PI.powi(2);
        for (a, expected) in [(1.0, pi2 / 3.0), (2.0, pi2 / 3.0 - 2.0), (0.5, pi2)] {
            let rule = ResamplingRule::symmetric_beta(a).unwrap();
            let (m, v) = log_rho_moments(&rule).unwrap();
            assert!(m.abs() < 1e-10, "a={a} mean {m}");
            assert!(((v - expected) / expected).abs() < 1e-10, "a={a}: {v} vs {expected}");
            assert_eq!(validate_recurrent(&rule, DEFAULT_RECURRENCE_TOL).unwrap(), Recurrence::Accept);
        }
        assert_eq!(mean_omega(&ResamplingRule::symmetric_beta(3.0).unwrap()), 0.5);
    }

    #[test]
    fn rejects_bad_rules() {
        assert!(ResamplingRule::two_point(1.0).is_err());
        assert!(ResamplingRule::finite(vec![0.2, 0.8], vec![0.5, 0.6]).is_err());
        assert!(ResamplingRule::finite(vec![0.2, 1.2], vec![0.5, 0.5]).is_err());
        assert!(ResamplingRule::finite(vec![0.2], vec![0.5, 0.5]).is_err());
        assert!(ResamplingRule::symmetric_beta(0.0).is_err());
    }

    #[test]
    fn omega_deterministic_and_in_support() {
        let rule = ResamplingRule::two_point(1.0 / 3.0).unwrap();
        let mut env = Environment::new(&rule, 11, 2, 5);
        let first = env.omega_at(0);
        assert_eq!(first.to_bits(), env.omega_at(0).to_bits());
        let mut fresh = Environment::new(&rule, 11, 2, 5);
        for s in (-300..300).rev() {
            fresh.omega_at(s);
        }
        assert_eq!(first.to_bits(), fresh.omega_at(0).to_bits());
        for s in -1000..1000 {
            let w = env.omega_at(s);
            assert!(w == 1.0 / 3.0 || w == 1.0 - 1.0 / 3.0);
        }
    }

    #[test]
    fn site_frequencies() {
        let rule = ResamplingRule::two_point(1.0 / 3.0).unwrap();
        let mut env = Environment::new(&rule, 3, 0, 0);
        let n = 1_000_000;
        let high = (0..n).filter(|s| env.omega_at(*s) > 0.5).count();
        let freq = high as f64 / n as f64;
        // binomial standard error sqrt(1/4 / 1e6) = 5e-4
        assert!((freq - 0.5).abs() < 3.0 * 5e-4, "freq {freq}");
    }

    #[test]
    fn beta_draws_in_unit_interval() {
        let rule = ResamplingRule::symmetric_beta(0.3).unwrap();
        let mut env = Environment::new(&rule, 5, 1, 1);
        let mut sum = 0.0;
        for s in 0..20_000 {
            let w = env.omega_at(s);
            assert!(w > 0.0 && w < 1.0);
            sum += w;
        }
        assert!((sum / 20_000.0 - 0.5).abs() < 0.02);
    }

    #[test]
    fn blocks_and_replicas_independent() {
        // Agreement rate of the two atoms between neighbouring blocks, and
        // between neighbouring replicas, at the same sites.
        let rule = ResamplingRule::two_point(0.25).unwrap();
        let sites = 100_000i64;
        let mut a = Environment::new(&rule, 4, 0, 0);
        let mut b = Environment::new(&rule, 4, 0, 1);
        let mut c = Environment::new(&rule, 4, 1, 0);
        let (mut same_block, mut same_replica) = (0, 0);
        for x in 0..sites {
            let w = a.omega_at(x);
            same_block += (w == b.omega_at(x)) as i64;
            same_replica += (w == c.omega_at(x)) as i64;
        }
        // Independent draws agree half the time; sd is 0.0016.
        for same in [same_block, same_replica] {
            assert!((same as f64 / sites as f64 - 0.5).abs() < 0.008);
        }
    }
}
