//! Theorem-level checks on rescaled paths: the Gaussian marginal at t = 1,
//! the finite-dimensional covariance structure, and flatness of the path on
//! `[a, 1]`.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gof::{ks_test, normal_cdf, GofReport};
use crate::error::{Error, Result};
use crate::stream::{self, Purpose};
use crate::theory::{limit_cov, LimitLaw};
use crate::walker::{check_grid, compensated_sum};

/// Replica floor for the suites.
pub const MIN_REPLICAS: usize = 1000;

/// Default bootstrap resample count for covariance standard errors.
pub const BOOTSTRAP_RESAMPLES: usize = 200;

fn require_replicas(got: usize) -> Result<()> {
    if got < MIN_REPLICAS {
        return Err(Error::TooFewReplicas {
            needed: MIN_REPLICAS,
            got,
        });
    }
    Ok(())
}

/// KS test of `X^n_1` samples against N(0, 1).
pub fn verify_marginal(samples: &[f64]) -> Result<GofReport> {
    require_replicas(samples.len())?;
    ks_test(samples, normal_cdf, "N(0,1)")
}

/// Empirical covariance/correlation on the grid compared with the limit law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FddReport {
    pub grid: Vec<f64>,
    pub law: LimitLaw,
    pub replicas: usize,
    pub covariance: Vec<Vec<f64>>,
    pub covariance_std_err: Vec<Vec<f64>>,
    pub limit_covariance: Vec<Vec<f64>>,
    pub correlation: Vec<Vec<f64>>,
    pub limit_correlation: Vec<Vec<f64>>,
    pub max_cov_error: f64,
    pub max_corr_error: f64,
    pub min_correlation: f64,
    /// `(t, s, corr(X_t, X_s - X_t))` for every grid pair `t < s`; empty for
    /// the random-constant law.
    pub increment_correlations: Vec<(f64, f64, f64)>,
    pub max_increment_corr: f64,
}

fn covariance(paths: &[Vec<f64>], weights: Option<&[u32]>) -> Vec<Vec<f64>> {
    let m = paths[0].len();
    let (total, w): (f64, Box<dyn Fn(usize) -> f64>) = match weights {
        Some(w) => (w.iter().map(|&c| c as f64).sum(), Box::new(move |i| w[i] as f64)),
        None => (paths.len() as f64, Box::new(|_| 1.0)),
    };
    let mean: Vec<f64> = (0..m)
        .map(|c| compensated_sum(paths.iter().enumerate().map(|(i, p)| w(i) * p[c])) / total)
        .collect();
    let mut cov = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in a..m {
            let s = compensated_sum(
                paths
                    .iter()
                    .enumerate()
                    .map(|(i, p)| w(i) * (p[a] - mean[a]) * (p[b] - mean[b])),
            );
            cov[a][b] = s / (total - 1.0);
            cov[b][a] = cov[a][b];
        }
    }
    cov
}

fn correlation(cov: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let m = cov.len();
    let mut out = vec![vec![f64::NAN; m]; m];
    for a in 0..m {
        for b in 0..m {
            let d = (cov[a][a] * cov[b][b]).sqrt();
            if d > 0.0 {
                out[a][b] = cov[a][b] / d;
            }
        }
    }
    out
}

fn pearson(x: impl Iterator<Item = (f64, f64)> + Clone) -> f64 {
    let n = x.clone().count() as f64;
    let mx = compensated_sum(x.clone().map(|p| p.0)) / n;
    let my = compensated_sum(x.clone().map(|p| p.1)) / n;
    let sxy = compensated_sum(x.clone().map(|p| (p.0 - mx) * (p.1 - my)));
    let sxx = compensated_sum(x.clone().map(|p| (p.0 - mx).powi(2)));
    let syy = compensated_sum(x.map(|p| (p.1 - my).powi(2)));
    sxy / (sxx * syy).sqrt()
}

/// Compares the empirical covariance of `(X^n_{t_1}, ..., X^n_{t_m})` with
/// the limit law entrywise. `paths[r][i]` is replica `r` at `grid[i]`.
///
/// Standard errors come from `resamples` bootstrap resamples drawn from the
/// bootstrap stream of `seed`.
pub fn verify_fdd(
    paths: &[Vec<f64>],
    grid: &[f64],
    law: &LimitLaw,
    seed: u64,
    resamples: usize,
) -> Result<FddReport> {
    check_grid(grid)?;
    require_replicas(paths.len())?;
    if paths.iter().any(|p| p.len() != grid.len()) {
        return Err(Error::domain("path length differs from grid"));
    }
    let m = grid.len();
    let mut limit = vec![vec![0.0; m]; m];
    for a in 0..m {
        for b in 0..m {
            limit[a][b] = limit_cov(grid[a], grid[b], law)?;
        }
    }
    let cov = covariance(paths, None);
    let corr = correlation(&cov);
    let limit_corr = correlation(&limit);

    let r = paths.len();
    let mut boot: Vec<Vec<Vec<f64>>> = Vec::with_capacity(resamples);
    for b in 0..resamples {
        let mut rng = stream::keyed(seed, Purpose::Bootstrap, b as u64, 0, 0);
        let mut counts = vec![0u32; r];
        for _ in 0..r {
            counts[rng.random_range(0..r)] += 1;
        }
        boot.push(covariance(paths, Some(&counts)));
    }
    let mut se = vec![vec![0.0; m]; m];
    if resamples > 1 {
        for a in 0..m {
            for b in 0..m {
                let vals: Vec<f64> = boot.iter().map(|c| c[a][b]).collect();
                let mean = compensated_sum(vals.iter().copied()) / resamples as f64;
                let ss = compensated_sum(vals.iter().map(|v| (v - mean).powi(2)));
                se[a][b] = (ss / (resamples as f64 - 1.0)).sqrt();
            }
        }
    }

    let mut max_cov_error = 0.0f64;
    let mut max_corr_error = 0.0f64;
    let mut min_correlation = f64::INFINITY;
    for a in 0..m {
        for b in 0..m {
            max_cov_error = max_cov_error.max((cov[a][b] - limit[a][b]).abs());
            if corr[a][b].is_finite() && limit_corr[a][b].is_finite() {
                max_corr_error = max_corr_error.max((corr[a][b] - limit_corr[a][b]).abs());
            }
            if corr[a][b].is_finite() {
                min_correlation = min_correlation.min(corr[a][b]);
            }
        }
    }

    let mut increments = Vec::new();
    if let LimitLaw::TimeChangedBrownian { .. } = law {
        for a in 0..m {
            for b in a + 1..m {
                let c = pearson(paths.iter().map(|p| (p[a], p[b] - p[a])));
                increments.push((grid[a], grid[b], c));
            }
        }
    }
    let max_increment_corr = increments
        .iter()
        .filter(|x| x.2.is_finite())
        .fold(0.0f64, |acc, x| acc.max(x.2.abs()));

    Ok(FddReport {
        grid: grid.to_vec(),
        law: *law,
        replicas: r,
        covariance: cov,
        covariance_std_err: se,
        limit_covariance: limit,
        correlation: corr,
        limit_correlation: limit_corr,
        max_cov_error,
        max_corr_error,
        min_correlation,
        increment_correlations: increments,
        max_increment_corr,
    })
}

/// Distribution summary of `sup_{t ∈ [a,1]} |X^n_t - X^n_a|` at one horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlatnessSummary {
    pub horizon: u64,
    pub replicas: usize,
    pub median: f64,
    pub p90: f64,
}

/// Linear-interpolation quantile of a sorted slice.
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Sup-gap of each path over the grid points in `[a, 1]`.
pub fn sup_gaps(paths: &[Vec<f64>], grid: &[f64], a: f64) -> Result<Vec<f64>> {
    check_grid(grid)?;
    let start = grid
        .iter()
        .position(|t| (t - a).abs() < 1e-12)
        .ok_or_else(|| Error::domain(format!("grid does not contain a = {a}")))?;
    if (grid[grid.len() - 1] - 1.0).abs() > 1e-12 {
        return Err(Error::domain("grid does not reach t = 1"));
    }
    paths
        .iter()
        .map(|p| {
            if p.len() != grid.len() {
                return Err(Error::domain("path length differs from grid"));
            }
            Ok(p[start..]
                .iter()
                .map(|v| (v - p[start]).abs())
                .fold(0.0, f64::max))
        })
        .collect()
}

/// Median and 90th percentile of the sup-gap at one horizon.
pub fn verify_flatness(
    paths: &[Vec<f64>],
    grid: &[f64],
    a: f64,
    horizon: u64,
) -> Result<FlatnessSummary> {
    if paths.is_empty() {
        return Err(Error::EmptySample);
    }
    let mut gaps = sup_gaps(paths, grid, a)?;
    gaps.sort_by(f64::total_cmp);
    Ok(FlatnessSummary {
        horizon,
        replicas: gaps.len(),
        median: quantile(&gaps, 0.5),
        p90: quantile(&gaps, 0.9),
    })
}

/// True iff there are at least three horizons and the medians strictly
/// decrease as the horizon grows.
pub fn flatness_trend(summaries: &[FlatnessSummary]) -> bool {
    summaries.len() >= 3
        && summaries.windows(2).all(|w| w[0].horizon < w[1].horizon && w[1].median < w[0].median)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normals(seed: u64, n: usize, scale: f64) -> Vec<f64> {
        let mut rng = stream::keyed(seed, Purpose::Synthetic, 0, 0, 0);
        (0..n)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                scale * z
            })
            .collect()
    }

    #[test]
    fn marginal_null_and_power() {
        let ok = verify_marginal(&normals(1, 10_000, 1.0)).unwrap();
        assert!(ok.p_value > 0.001, "{ok:?}");
        let wide = verify_marginal(&normals(2, 10_000, 2.0)).unwrap();
        assert!(wide.p_value < 1e-6);
        let flat = verify_marginal(&[0.0; 1000]).unwrap();
        assert!(flat.statistic >= 0.5);
        assert!(matches!(
            verify_marginal(&[0.0; 10]),
            Err(Error::TooFewReplicas { .. })
        ));
    }

    #[test]
    fn constant_paths_covariance() {
        let n = normals(3, 2000, 1.0);
        let grid = [0.5, 0.75, 1.0];
        let paths: Vec<Vec<f64>> = n.iter().map(|v| vec![*v; 3]).collect();
        let law = LimitLaw::RandomConstant { a: 0.5 };
        let r = verify_fdd(&paths, &grid, &law, 1, 20).unwrap();
        let m = compensated_sum(n.iter().copied()) / n.len() as f64;
        let var = compensated_sum(n.iter().map(|v| (v - m).powi(2))) / (n.len() as f64 - 1.0);
        for row in &r.covariance {
            for c in row {
                assert!((c - var).abs() < 1e-12);
            }
        }
        assert!(r.increment_correlations.is_empty());
        assert_eq!(sup_gaps(&paths, &grid, 0.5).unwrap().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn degenerate_grid_rejected() {
        let paths = vec![vec![0.0, 1.0]; 1000];
        let law = LimitLaw::TimeChangedBrownian { beta: 2.0 };
        assert!(verify_fdd(&paths, &[0.5, 0.5], &law, 1, 10).is_err());
        assert!(verify_fdd(&paths, &[], &law, 1, 10).is_err());
        assert!(sup_gaps(&paths, &[0.4, 1.0], 0.5).is_err());
        assert!(sup_gaps(&paths, &[0.5, 0.9], 0.5).is_err());
    }

    #[test]
    fn trend_rule() {
        let s = |h, m| FlatnessSummary { horizon: h, replicas: 1, median: m, p90: m };
        assert!(flatness_trend(&[s(1, 3.0), s(2, 2.0), s(3, 1.0)]));
        assert!(!flatness_trend(&[s(1, 3.0), s(2, 2.0)]));
        assert!(!flatness_trend(&[s(1, 3.0), s(2, 2.0), s(3, 2.0)]));
    }

    #[test]
    fn quantiles() {
        let v = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(quantile(&v, 0.5), 2.5);
        assert_eq!(quantile(&v, 0.0), 1.0);
        assert_eq!(quantile(&v, 1.0), 4.0);
    }
}
