//! The path-enumeration oracle against environment enumeration, and both
//! against simulation.

use std::collections::BTreeMap;

use num_rational::BigRational;
use num_traits::{One, Zero};

use rwcre::cooling::CoolingSchedule;
use rwcre::env::ResamplingRule;
use rwcre::verify::{chi_square_gof, exact_block_pmf, exact_support, exact_walk_pmf, tally, DEFAULT_CAP};
use rwcre::walker::positions_at;

/// Annealed law of Z_m: enumerate every environment on -(m-1)..=(m-1), run
/// the quenched forward recursion in each, weight by the environment's
/// probability.
fn by_environment(rule: &ResamplingRule, m: usize) -> BTreeMap<i64, BigRational> {
    let support = exact_support(rule).unwrap();
    let sites = 2 * m - 1;
    let width = 2 * m + 1;
    let mut out: BTreeMap<i64, BigRational> = BTreeMap::new();
    let mut digits = vec![0usize; sites];
    loop {
        let mut weight = BigRational::one();
        for &d in &digits {
            weight *= &support[d].1;
        }
        // dist[x + m] = P_ω(Z_i = x)
        let mut dist = vec![BigRational::zero(); width];
        dist[m] = BigRational::one();
        for _ in 0..m {
            let mut next = vec![BigRational::zero(); width];
            for (i, p) in dist.iter().enumerate() {
                if p.is_zero() {
                    continue;
                }
                let site = i as i64 - m as i64;
                let w = &support[digits[(site + m as i64 - 1) as usize]].0;
                next[i + 1] += p * w;
                next[i - 1] += p * (BigRational::one() - w);
            }
            dist = next;
        }
        for (i, p) in dist.into_iter().enumerate() {
            if !p.is_zero() {
                *out.entry(i as i64 - m as i64).or_insert_with(BigRational::zero) += p * &weight;
            }
        }
        // next environment
        let mut j = 0;
        while j < sites {
            digits[j] += 1;
            if digits[j] < support.len() {
                break;
            }
            digits[j] = 0;
            j += 1;
        }
        if j == sites {
            return out;
        }
    }
}

#[test]
fn path_and_environment_enumeration_agree() {
    let rules = [
        ResamplingRule::two_point(1.0 / 3.0).unwrap(),
        ResamplingRule::two_point(0.1).unwrap(),
        ResamplingRule::finite(vec![0.25, 0.5, 0.875], vec![0.25, 0.5, 0.25]).unwrap(),
    ];
    for rule in &rules {
        for m in 1..=5usize {
            let paths = exact_block_pmf(rule, m as u64, DEFAULT_CAP).unwrap();
            let envs = by_environment(rule, m);
            for x in -(m as i64)..=(m as i64) {
                let e = envs.get(&x).cloned().unwrap_or_else(BigRational::zero);
                assert_eq!(paths.get(x), e, "rule={rule:?} m={m} x={x}");
            }
        }
    }
}

#[test]
fn simulation_matches_exact_law() {
    let rule = ResamplingRule::finite(vec![0.2, 0.5, 0.8], vec![0.25, 0.5, 0.25]).unwrap();
    let schedule = CoolingSchedule::exponential(0.8).unwrap().prepared(9).unwrap();
    let exact = exact_walk_pmf(&rule, &schedule, 9, DEFAULT_CAP).unwrap().to_pmf();
    let ends = (0..200_000u64).map(|r| positions_at(&rule, &schedule, 9, 5, r, &[9]).unwrap()[0]);
    let rep = chi_square_gof(&tally(ends), &exact).unwrap();
    assert!(rep.p_value > 1e-4, "{rep:?}");
}

#[test]
fn chi_square_rejects_wrong_law() {
    // Same walk, but compared with a simple random walk law.
    let rule = ResamplingRule::two_point(0.1).unwrap();
    let schedule = CoolingSchedule::explicit(vec![12, 13]).unwrap();
    let srw = rwcre::verify::srw_pmf(12, 0.5).unwrap();
    let ends = (0..50_000u64).map(|r| positions_at(&rule, &schedule, 12, 5, r, &[12]).unwrap()[0]);
    let rep = chi_square_gof(&tally(ends), &srw).unwrap();
    assert!(rep.p_value < 1e-6, "{rep:?}");
}
