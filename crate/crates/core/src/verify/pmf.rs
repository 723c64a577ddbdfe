use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// A probability mass function on a contiguous integer range starting at
/// `min`. Cells of the wrong parity simply hold zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub min: i64,
    pub probs: Vec<f64>,
}

impl Pmf {
    pub fn new(min: i64, probs: Vec<f64>) -> Result<Self> {
        if probs.iter().any(|p| !(*p >= 0.0)) {
            return Err(Error::domain("negative or NaN probability"));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::domain(format!("pmf mass {total} differs from 1")));
        }
        Ok(Pmf { min, probs })
    }

    pub fn point(x: i64) -> Self {
        Pmf {
            min: x,
            probs: vec![1.0],
        }
    }

    pub fn max(&self) -> i64 {
        self.min + self.probs.len() as i64 - 1
    }

    pub fn get(&self, x: i64) -> f64 {
        let i = x - self.min;
        if i < 0 {
            return 0.0;
        }
        self.probs.get(i as usize).copied().unwrap_or(0.0)
    }

    /// `(x, p)` for every `p > 0`, ascending in `x`.
    pub fn support(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.probs
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(move |(i, p)| (self.min + i as i64, *p))
    }

    pub fn mean(&self) -> f64 {
        self.support().map(|(x, p)| x as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.support().map(|(x, p)| (x as f64 - m).powi(2) * p).sum()
    }

    pub fn convolve(&self, other: &Pmf) -> Pmf {
        let mut probs = vec![0.0; self.probs.len() + other.probs.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate() {
                probs[i + j] += a * b;
            }
        }
        Pmf {
            min: self.min + other.min,
            probs,
        }
    }
}

/// A pmf with exact rational probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactPmf {
    pub min: i64,
    pub probs: Vec<BigRational>,
}

impl ExactPmf {
    pub fn point(x: i64) -> Self {
        ExactPmf {
            min: x,
            probs: vec![BigRational::one()],
        }
    }

    pub fn get(&self, x: i64) -> BigRational {
        let i = x - self.min;
        if i < 0 {
            return BigRational::zero();
        }
        self.probs
            .get(i as usize)
            .cloned()
            .unwrap_or_else(BigRational::zero)
    }

    pub fn mass(&self) -> BigRational {
        self.probs.iter().fold(BigRational::zero(), |acc, p| acc + p)
    }

    pub fn mean(&self) -> BigRational {
        self.probs
            .iter()
            .enumerate()
            .fold(BigRational::zero(), |acc, (i, p)| {
                acc + p * BigRational::from_integer(BigInt::from(self.min + i as i64))
            })
    }

    pub fn convolve(&self, other: &ExactPmf) -> ExactPmf {
        let mut probs = vec![BigRational::zero(); self.probs.len() + other.probs.len() - 1];
        for (i, a) in self.probs.iter().enumerate() {
            if a.is_zero() {
                continue;
            }
            for (j, b) in other.probs.iter().enumerate() {
                if !b.is_zero() {
                    probs[i + j] += a * b;
                }
            }
        }
        ExactPmf {
            min: self.min + other.min,
            probs,
        }
    }

    /// Rounds every probability to the nearest `f64`.
    pub fn to_pmf(&self) -> Pmf {
        Pmf {
            min: self.min,
            probs: self
                .probs
                .iter()
                .map(|p| p.to_f64().unwrap_or(f64::NAN))
                .collect(),
        }
    }
}

/// Law of `2 Binomial(n, p) - n`, the position of a walk that steps right
/// with probability `p`.
pub fn srw_pmf(n: u64, p: f64) -> Result<Pmf> {
    if !(p > 0.0 && p < 1.0) {
        return Err(Error::domain(format!("p = {p} outside (0, 1)")));
    }
    let step = Pmf {
        min: -1,
        probs: vec![1.0 - p, 0.0, p],
    };
    let mut out = Pmf::point(0);
    for _ in 0..n {
        out = out.convolve(&step);
    }
    Ok(out)
}

/// [`srw_pmf`] in exact arithmetic.
pub fn srw_pmf_exact(n: u64, p: &BigRational) -> Result<ExactPmf> {
    if !(p > &BigRational::zero() && p < &BigRational::one()) {
        return Err(Error::domain("p outside (0, 1)"));
    }
    let step = ExactPmf {
        min: -1,
        probs: vec![BigRational::one() - p, BigRational::zero(), p.clone()],
    };
    let mut out = ExactPmf::point(0);
    for _ in 0..n {
        out = out.convolve(&step);
    }
    Ok(out)
}
