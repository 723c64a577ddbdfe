use proptest::prelude::*;

use rwcre::cooling::CoolingSchedule;
use rwcre::env::ResamplingRule;
use rwcre::theory::increment_var_target;
use rwcre::verify::{ks_statistic, normal_cdf};
use rwcre::walker::{decompose_at, positions_at, simulate};

fn schedule() -> impl Strategy<Value = CoolingSchedule> {
    prop_oneof![
        (0.1f64..5.0, 1.05f64..4.0).prop_map(|(b, beta)| CoolingSchedule::polynomial(b, beta).unwrap()),
        (0.05f64..3.0).prop_map(|c| CoolingSchedule::exponential(c).unwrap()),
        Just(CoolingSchedule::unit()),
        proptest::collection::btree_set(1u64..5000, 1..40)
            .prop_map(|s| CoolingSchedule::explicit(s.into_iter().collect()).unwrap()),
    ]
}

fn rule() -> impl Strategy<Value = ResamplingRule> {
    prop_oneof![
        (0.02f64..0.98).prop_map(|p| ResamplingRule::two_point(p).unwrap()),
        (0.3f64..5.0).prop_map(|a| ResamplingRule::symmetric_beta(a).unwrap()),
    ]
}

proptest! {
    #[test]
    fn k_of_n_brackets_n(s in schedule(), n in 0u64..4000) {
        // Explicit schedules end; stay inside them.
        let k = match s.k_of_n(n) {
            Ok(k) => k,
            Err(_) => return Ok(()),
        };
        prop_assert!(s.tau(k).unwrap() <= n);
        if let Ok(next) = s.tau(k + 1) {
            prop_assert!(n < next);
            let gaps: u64 = (1..=k + 1).map(|j| s.gap(j).unwrap()).sum();
            prop_assert_eq!(gaps, next);
        }
    }

    #[test]
    fn tau_strictly_increasing(s in schedule(), k in 1u64..60) {
        if let (Ok(a), Ok(b)) = (s.tau(k - 1), s.tau(k)) {
            prop_assert!(a < b);
            prop_assert!(b >= k);
        }
    }

    #[test]
    fn decomposition_sums_to_endpoint(
        r in rule(),
        c in 0.2f64..1.5,
        n in 1u64..3000,
        seed in any::<u64>(),
    ) {
        let s = CoolingSchedule::exponential(c).unwrap();
        let traj = simulate(&r, &s, n + 50, seed, 0).unwrap();
        let m = n / 2 + 1;
        let d = decompose_at(&traj, &s, m).unwrap();
        prop_assert_eq!(d.total(), traj.positions[m as usize]);
        prop_assert_eq!(d.blocks.len() as u64, s.k_of_n(m).unwrap());
    }

    #[test]
    fn walker_parity_and_steps(r in rule(), s in schedule(), n in 0u64..2000, seed in any::<u64>()) {
        let Ok(traj) = simulate(&r, &s, n, seed, 3) else { return Ok(()) };
        prop_assert_eq!(traj.positions.len() as u64, n + 1);
        for (i, w) in traj.positions.windows(2).enumerate() {
            prop_assert_eq!((w[1] - w[0]).abs(), 1);
            prop_assert_eq!((w[1] - (i as i64 + 1)).rem_euclid(2), 0);
        }
    }

    #[test]
    fn recorded_positions_match_full_path(seed in any::<u64>(), mut times in proptest::collection::vec(0u64..500, 1..20)) {
        times.sort_unstable();
        let r = ResamplingRule::two_point(0.25).unwrap();
        let s = CoolingSchedule::polynomial(1.0, 1.5).unwrap();
        let traj = simulate(&r, &s, 500, seed, 11).unwrap();
        let at = positions_at(&r, &s, 500, seed, 11, &times).unwrap();
        let direct: Vec<i64> = times.iter().map(|&t| traj.positions[t as usize]).collect();
        prop_assert_eq!(at, direct);
    }

    #[test]
    fn increment_target_additive(
        mut ts in proptest::array::uniform3(0.0f64..=1.0),
        chi in 1e-3f64..1e6,
        beta in 1.01f64..5.0,
    ) {
        ts.sort_by(f64::total_cmp);
        let [t, u, s] = ts;
        prop_assume!(t < u && u < s);
        let whole = increment_var_target(t, s, chi, beta).unwrap();
        let parts = increment_var_target(t, u, chi, beta).unwrap() + increment_var_target(u, s, chi, beta).unwrap();
        prop_assert!((whole - parts).abs() <= 1e-12 * chi.max(1.0));
    }

    #[test]
    fn ks_affine_invariant(
        xs in proptest::collection::vec(-5.0f64..5.0, 1..200),
        scale in 0.1f64..10.0,
        shift in -50.0f64..50.0,
    ) {
        let base = ks_statistic(&xs, normal_cdf).unwrap();
        let moved: Vec<f64> = xs.iter().map(|x| scale * x + shift).collect();
        let d = ks_statistic(&moved, |y| normal_cdf((y - shift) / scale)).unwrap();
        prop_assert!((base - d).abs() < 1e-9);
    }
}
