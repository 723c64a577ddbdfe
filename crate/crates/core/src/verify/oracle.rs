//! Exact annealed laws for small horizons.
//!
//! Under the annealed law a path's probability factorizes over the sites it
//! visits: a site left `l` times and right `r` times contributes
//! `M(r, l) = E[ω^r (1 - ω)^l]`, because each site's ω is an independent draw
//! from α and is fixed for the whole block. Averaging the quenched path
//! probabilities over every environment on `-(m-1)..=(m-1)` is therefore the
//! same as summing `Π_x M(r_x, l_x)` over the `2^m` paths, which is what
//! [`exact_block_pmf`] does in rational arithmetic.

use std::collections::HashMap;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::pmf::ExactPmf;
use crate::cooling::CoolingSchedule;
use crate::env::ResamplingRule;
use crate::error::{Error, Result};

/// Default maximum block length the oracle will enumerate.
pub const DEFAULT_CAP: u64 = 12;

/// The rule's support as exact rationals: `(value, weight)`.
///
/// Each `f64` parameter is converted exactly. A two-point rule keeps the
/// values `p` and `1 - p` exactly complementary, and finite-support weights
/// are renormalized to sum to exactly one.
pub fn exact_support(rule: &ResamplingRule) -> Result<Vec<(BigRational, BigRational)>> {
    rule.check()?;
    let exact = |v: f64| {
        BigRational::from_float(v).ok_or_else(|| Error::domain(format!("{v} is not finite")))
    };
    let half = BigRational::new(BigInt::one(), BigInt::from(2));
    match rule {
        ResamplingRule::TwoPoint { p } => {
            let r = exact(*p)?;
            Ok(vec![
                (r.clone(), half.clone()),
                (BigRational::one() - r, half),
            ])
        }
        ResamplingRule::Finite { values, weights } => {
            let ws: Vec<BigRational> = weights.iter().map(|w| exact(*w)).collect::<Result<_>>()?;
            let total = ws.iter().fold(BigRational::zero(), |a, w| a + w);
            values
                .iter()
                .zip(ws)
                .map(|(v, w)| Ok((exact(*v)?, w / &total)))
                .collect()
        }
        ResamplingRule::SymmetricBeta { .. } => Err(Error::domain(
            "the exact oracle needs a finite-support rule",
        )),
    }
}

/// `E[ω]` in exact arithmetic.
pub fn exact_mean_omega(rule: &ResamplingRule) -> Result<BigRational> {
    Ok(exact_support(rule)?
        .iter()
        .fold(BigRational::zero(), |acc, (v, w)| acc + v * w))
}

struct Moments {
    // table[r][l] = E[ω^r (1-ω)^l]
    table: Vec<Vec<BigRational>>,
}

impl Moments {
    fn new(support: &[(BigRational, BigRational)], m: usize) -> Self {
        let mut table = vec![vec![BigRational::zero(); m + 1]; m + 1];
        for (v, w) in support {
            let q = BigRational::one() - v;
            let mut vr = BigRational::one();
            for row in table.iter_mut() {
                let mut ql = vr.clone();
                for cell in row.iter_mut() {
                    *cell += w * &ql;
                    ql *= &q;
                }
                vr *= v;
            }
        }
        Moments { table }
    }
}

struct Enumerator<'a> {
    moments: &'a Moments,
    m: usize,
    right: Vec<usize>,
    left: Vec<usize>,
    probs: Vec<BigRational>,
}

impl Enumerator<'_> {
    fn walk(&mut self, depth: usize, x: i64) {
        let offset = self.m as i64;
        if depth == self.m {
            let mut weight = BigRational::one();
            for (r, l) in self.right.iter().zip(&self.left) {
                if r + l > 0 {
                    weight *= &self.moments.table[*r][*l];
                }
            }
            self.probs[(x + offset) as usize] += weight;
            return;
        }
        let i = (x + offset) as usize;
        self.right[i] += 1;
        self.walk(depth + 1, x + 1);
        self.right[i] -= 1;
        self.left[i] += 1;
        self.walk(depth + 1, x - 1);
        self.left[i] -= 1;
    }
}

/// Exact annealed law of `Z_m`, the walk in one static environment drawn
/// from a finite-support rule.
pub fn exact_block_pmf(rule: &ResamplingRule, m: u64, cap: u64) -> Result<ExactPmf> {
    if m > cap {
        return Err(Error::CapExceeded { len: m, cap });
    }
    if m == 0 {
        return Ok(ExactPmf::point(0));
    }
    let support = exact_support(rule)?;
    let m = m as usize;
    let moments = Moments::new(&support, m);
    let mut e = Enumerator {
        moments: &moments,
        m,
        right: vec![0; 2 * m + 1],
        left: vec![0; 2 * m + 1],
        probs: vec![BigRational::zero(); 2 * m + 1],
    };
    e.walk(0, 0);
    Ok(ExactPmf {
        min: -(m as i64),
        probs: e.probs,
    })
}

/// Exact annealed law of `X_n` under `schedule`: the convolution of the block
/// laws for `T_1, ..., T_{k(n)}` and the remainder `T̄_n`.
pub fn exact_walk_pmf(
    rule: &ResamplingRule,
    schedule: &CoolingSchedule,
    n: u64,
    cap: u64,
) -> Result<ExactPmf> {
    let k = schedule.k_of_n(n)?;
    let mut lengths: Vec<u64> = (1..=k).map(|j| schedule.gap(j)).collect::<Result<_>>()?;
    lengths.push(schedule.remainders(n)?.0);
    if let Some(&len) = lengths.iter().find(|&&len| len > cap) {
        return Err(Error::CapExceeded { len, cap });
    }
    let mut cache: HashMap<u64, ExactPmf> = HashMap::new();
    let mut out = ExactPmf::point(0);
    for len in lengths {
        if len == 0 {
            continue;
        }
        let block = match cache.entry(len) {
            std::collections::hash_map::Entry::Occupied(e) => e.into_mut(),
            std::collections::hash_map::Entry::Vacant(e) => e.insert(exact_block_pmf(rule, len, cap)?),
        };
        out = out.convolve(block);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::verify::pmf::srw_pmf_exact;

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn third() -> ResamplingRule {
        ResamplingRule::two_point(1.0 / 3.0).unwrap()
    }

    #[test]
    fn one_step() {
        let p = exact_block_pmf(&third(), 1, DEFAULT_CAP).unwrap();
        assert_eq!(p.get(1), q(1, 2));
        assert_eq!(p.get(-1), q(1, 2));
    }

    #[test]
    fn two_steps_match_srw() {
        let p = exact_block_pmf(&third(), 2, DEFAULT_CAP).unwrap();
        assert_eq!(p.get(-2), q(1, 4));
        assert_eq!(p.get(0), q(1, 2));
        assert_eq!(p.get(2), q(1, 4));
    }

    #[test]
    fn three_rights() {
        for rule in [third(), ResamplingRule::finite(vec![0.25, 0.5, 0.75], vec![0.25, 0.5, 0.25]).unwrap()] {
            let p = exact_block_pmf(&rule, 3, DEFAULT_CAP).unwrap();
            assert_eq!(p.get(3), q(1, 8));
        }
    }

    #[test]
    fn mass_and_symmetry() {
        for m in 1..=10 {
            let p = exact_block_pmf(&third(), m, DEFAULT_CAP).unwrap();
            assert_eq!(p.mass(), BigRational::one());
            for x in -(m as i64)..=(m as i64) {
                assert_eq!(p.get(x), p.get(-x));
            }
        }
    }

    #[test]
    fn trapping_narrows_the_law() {
        // Static environments make returns more likely than for a simple walk.
        let p = exact_block_pmf(&third(), 4, DEFAULT_CAP).unwrap();
        let srw = srw_pmf_exact(4, &q(1, 2)).unwrap();
        assert!(p.get(0) > srw.get(0));
    }

    #[test]
    fn cap_enforced() {
        assert!(matches!(
            exact_block_pmf(&third(), 13, DEFAULT_CAP),
            Err(Error::CapExceeded { len: 13, cap: 12 })
        ));
        let s = CoolingSchedule::polynomial(1.0, 3.0).unwrap();
        assert!(exact_walk_pmf(&third(), &s, 30, DEFAULT_CAP).is_err());
    }

    #[test]
    fn beta_rejected() {
        let rule = ResamplingRule::symmetric_beta(1.0).unwrap();
        assert!(exact_block_pmf(&rule, 2, DEFAULT_CAP).is_err());
    }

    #[test]
    fn single_block_walk() {
        let s = CoolingSchedule::explicit(vec![8, 20]).unwrap();
        for n in 0..=8 {
            let walk = exact_walk_pmf(&third(), &s, n, DEFAULT_CAP).unwrap();
            let block = exact_block_pmf(&third(), n, DEFAULT_CAP).unwrap();
            assert_eq!(walk.to_pmf().support().collect::<Vec<_>>(), block.to_pmf().support().collect::<Vec<_>>());
        }
    }

    #[test]
    fn unit_schedule_is_srw() {
        let s = CoolingSchedule::unit();
        let drift = ResamplingRule::finite(vec![0.25, 0.5], vec![0.5, 0.5]).unwrap();
        for rule in [third(), drift] {
            let p = exact_mean_omega(&rule).unwrap();
            for n in 0..=20 {
                let walk = exact_walk_pmf(&rule, &s, n, DEFAULT_CAP).unwrap();
                let srw = srw_pmf_exact(n, &p).unwrap();
                for x in -(n as i64)..=(n as i64) {
                    assert_eq!(walk.get(x), srw.get(x), "n={n} x={x}");
                }
            }
        }
    }

    #[test]
    fn symmetric_rule_symmetric_walk() {
        let s = CoolingSchedule::explicit(vec![2, 5, 9]).unwrap();
        let p = exact_walk_pmf(&third(), &s, 5, DEFAULT_CAP).unwrap();
        assert_eq!(p.mean(), BigRational::zero());
        for x in 0..=5 {
            assert_eq!(p.get(x), p.get(-x));
        }
    }
}
