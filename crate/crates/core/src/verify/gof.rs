//! Goodness-of-fit statistics: one-sample Kolmogorov–Smirnov against a
//! continuous CDF and Pearson chi-square against an exact pmf.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use libm::erfc;
use statrs::function::gamma::gamma_ur;

use super::pmf::Pmf;
use crate::error::{Error, Result};

/// Minimum expected count per chi-square cell after pooling.
pub const MIN_EXPECTED: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GofReport {
    pub statistic: f64,
    pub p_value: f64,
    pub sample_size: usize,
    pub target: String,
    /// Degrees of freedom (chi-square only).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dof: Option<usize>,
}

/// Standard normal CDF.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * erfc(-x / std::f64::consts::SQRT_2)
}

/// `sup_x |F_n(x) - F(x)|` over the sample.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    for (i, &x) in sorted.iter().enumerate() {
        let f = cdf(x);
        let above = (i + 1) as f64 / n - f;
        let below = f - i as f64 / n;
        d = d.max(above.abs()).max(below.abs());
    }
    Ok(d)
}

/// Kolmogorov tail `Q(λ) = P(K > λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`.
///
/// For small λ the equivalent Jacobi form
/// `1 - (√(2π)/λ) Σ_{k≥1} e^{-(2k-1)²π²/(8λ²)}` converges faster.
pub fn kolmogorov_q(lambda: f64) -> f64 {
    if !(lambda > 0.0) {
        return 1.0;
    }
    let q = if lambda < 1.18 {
        let pi2 = std::f64::consts::PI.powi(2);
        let mut s = 0.0;
        for k in 1..=50 {
            let m = (2 * k - 1) as f64;
            let term = (-m * m * pi2 / (8.0 * lambda * lambda)).exp();
            s += term;
            if term < 1e-300 {
                break;
            }
        }
        1.0 - (2.0 * std::f64::consts::PI).sqrt() / lambda * s
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            let term = (-2.0 * kf * kf * lambda * lambda).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-300 {
                break;
            }
        }
        2.0 * s
    };
    q.clamp(0.0, 1.0)
}

/// Asymptotic p-value `Q(√n D)`.
pub fn ks_pvalue(statistic: f64, n: usize) -> f64 {
    kolmogorov_q((n as f64).sqrt() * statistic)
}

/// KS statistic and p-value in one report.
pub fn ks_test(samples: &[f64], cdf: impl Fn(f64) -> f64, target: &str) -> Result<GofReport> {
    let statistic = ks_statistic(samples, cdf)?;
    Ok(GofReport {
        statistic,
        p_value: ks_pvalue(statistic, samples.len()),
        sample_size: samples.len(),
        target: target.to_string(),
        dof: None,
    })
}

/// Pearson chi-square of observed integer counts against `exact`.
///
/// Cells are scanned in ascending order and merged until each holds an
/// expected count of at least [`MIN_EXPECTED`]; a short final run is merged
/// into its left neighbour. Observations outside the pmf support land in the
/// adjacent pooled cell.
pub fn chi_square_gof(counts: &BTreeMap<i64, u64>, exact: &Pmf) -> Result<GofReport> {
    let total: u64 = counts.values().sum();
    if total == 0 {
        return Err(Error::EmptySample);
    }
    let overlap: u64 = counts
        .iter()
        .filter(|(x, _)| exact.get(**x) > 0.0)
        .map(|(_, c)| c)
        .sum();
    if overlap == 0 {
        return Err(Error::NoCells("observed and target supports are disjoint".into()));
    }
    let mut keys: Vec<i64> = exact.support().map(|(x, _)| x).collect();
    keys.extend(counts.keys().copied());
    keys.sort_unstable();
    keys.dedup();

    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let mut acc = (0.0, 0.0);
    for x in keys {
        acc.0 += n * exact.get(x);
        acc.1 += *counts.get(&x).unwrap_or(&0) as f64;
        if acc.0 >= MIN_EXPECTED {
            cells.push(acc);
            acc = (0.0, 0.0);
        }
    }
    if acc.0 > 0.0 || acc.1 > 0.0 {
        match cells.last_mut() {
            Some(last) => {
                last.0 += acc.0;
                last.1 += acc.1;
            }
            None => cells.push(acc),
        }
    }
    if cells.len() < 2 {
        return Err(Error::NoCells(format!(
            "only {} cell(s) left after pooling to expected >= {MIN_EXPECTED}",
            cells.len()
        )));
    }
    let statistic: f64 = cells.iter().map(|(e, o)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let p_value = if statistic == 0.0 {
        1.0
    } else {
        gamma_ur(dof as f64 / 2.0, statistic / 2.0).clamp(0.0, 1.0)
    };
    Ok(GofReport {
        statistic,
        p_value,
        sample_size: total as usize,
        target: "exact pmf".into(),
        dof: Some(dof),
    })
}

/// Tallies integer samples.
pub fn tally(samples: impl IntoIterator<Item = i64>) -> BTreeMap<i64, u64> {
    let mut out = BTreeMap::new();
    for x in samples {
        *out.entry(x).or_insert(0) += 1;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ks_single_point() {
        assert!((ks_statistic(&[0.0], normal_cdf).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn ks_empty() {
        assert!(matches!(ks_statistic(&[], normal_cdf), Err(Error::EmptySample)));
    }

    #[test]
    fn ks_constant_samples() {
        let d = ks_statistic(&[0.3; 50], normal_cdf).unwrap();
        assert!(d >= 0.5);
    }

    #[test]
    fn pvalue_reference_points() {
        assert_eq!(ks_pvalue(0.0, 100), 1.0);
        assert!((kolmogorov_q(1.3581) - 0.05).abs() < 1e-4);
        assert!((kolmogorov_q(1.6276) - 0.01).abs() < 1e-4);
        assert!(ks_pvalue(1.0, 20) < 1e-12);
        // Both branches agree around the switch point.
        let lo = {
            let pi2 = std::f64::consts::PI.powi(2);
            let l: f64 = 1.18;
            let s: f64 = (1..50)
                .map(|k| (-((2 * k - 1) as f64).powi(2) * pi2 / (8.0 * l * l)).exp())
                .sum();
            1.0 - (2.0 * std::f64::consts::PI).sqrt() / l * s
        };
        assert!((lo - kolmogorov_q(1.18)).abs() < 1e-12);
    }

    #[test]
    fn chi_square_proportional_counts() {
        let pmf = Pmf::new(-2, vec![0.25, 0.0, 0.5, 0.0, 0.25]).unwrap();
        let counts = BTreeMap::from([(-2, 250), (0, 500), (2, 250)]);
        let r = chi_square_gof(&counts, &pmf).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.dof, Some(2));
    }

    #[test]
    fn chi_square_disjoint() {
        let pmf = Pmf::new(-1, vec![0.5, 0.0, 0.5]).unwrap();
        let counts = BTreeMap::from([(4, 10), (6, 3)]);
        assert!(matches!(chi_square_gof(&counts, &pmf), Err(Error::NoCells(_))));
    }

    #[test]
    fn chi_square_pools_tails() {
        let pmf = Pmf::new(0, vec![0.001, 0.499, 0.499, 0.001]).unwrap();
        let counts = BTreeMap::from([(0, 1), (1, 500), (2, 498), (3, 1)]);
        let r = chi_square_gof(&counts, &pmf).unwrap();
        assert_eq!(r.dof, Some(1));
    }

    #[test]
    fn chi_square_all_pooled() {
        let pmf = Pmf::new(0, vec![0.5, 0.5]).unwrap();
        let counts = BTreeMap::from([(0, 3), (1, 3)]);
        assert!(matches!(chi_square_gof(&counts, &pmf), Err(Error::NoCells(_))));
    }

    #[test]
    fn chi_square_detects_shift() {
        let pmf = Pmf::new(0, vec![0.5, 0.5]).unwrap();
        let counts = BTreeMap::from([(0, 700), (1, 300)]);
        let r = chi_square_gof(&counts, &pmf).unwrap();
        assert!(r.p_value < 1e-20);
    }
}
