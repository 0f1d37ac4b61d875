//! Property tests for invariants that hold across parameter space.

use num_rational::Ratio;
use proptest::prelude::*;

use wavelab_core::dalembert::{duhamel_l, duhamel_lt, free_solution, huygens_residual, ClosureField, QuadConfig};
use wavelab_core::model::{InitialData, NonlinearTerm, ProblemSpec, Profile};
use wavelab_core::regimes::{
    combined_exponent, combined_window, constant_combined_exponent, invert_law, kitamura, ktw23_nonzero_mean,
    ktw23_zero_mean, matching_branches, BranchParams, InverseKind,
};
use wavelab_core::solver::GridConfig;
use wavelab_core::sweep::{fit_power_law, EpsilonGrid, SweepConfig, Verdict};

type Q = Ratio<i64>;

fn rational(lo: i64, hi: i64, den: i64) -> impl Strategy<Value = Q> {
    (lo * den..=hi * den).prop_map(move |n| Q::new(n, den))
}

fn inverse_kind() -> impl Strategy<Value = InverseKind<f64>> {
    prop_oneof![
        Just(InverseKind::Phi),
        (0.2..4.0f64).prop_map(|p| InverseKind::Psi { p }),
        (-3.0..-0.05f64).prop_map(|a| InverseKind::Phi1 { a }),
        (0.5..4.0f64, -3.0..-0.05f64).prop_map(|(p, a)| InverseKind::Psi1 { p, a }),
        (1.0..4.0f64, -3.0..-0.05f64).prop_map(|(p, b)| InverseKind::Psi2 { p, b }),
        Just(InverseKind::BImplicit),
    ]
}

proptest! {
    #[test]
    fn characteristic_tables_partition_the_plane(
        p in rational(1, 5, 6),
        a in rational(-4, 4, 12),
        b in rational(-8, 8, 12),
    ) {
        let params = BranchParams { p, a, b };
        prop_assert_eq!(matching_branches(&ktw23_nonzero_mean(), &params).len(), 1);
        prop_assert_eq!(matching_branches(&ktw23_zero_mean(), &params).len(), 1);
        prop_assert_eq!(matching_branches(&kitamura(), &params).len(), 1);
    }

    #[test]
    fn combined_effect_beats_both_single_terms(
        r in rational(1, 8, 24).prop_filter("r > 1", |r| *r > Q::from_integer(1)),
        t in rational(0, 1, 97),
        q in rational(0, 1, 5),
    ) {
        let one = Q::from_integer(1);
        let knee = (r + one) / 2;
        let s = knee + (r - knee) * t;
        let p = s - q;
        prop_assume!(combined_window(&p, &q, &r));
        let e = combined_exponent(&p, &q, &r);
        prop_assert!(e < s - one);
        prop_assert!(e < r * (r - one) / (r + one));
        prop_assert_eq!(constant_combined_exponent(&p, &q, &r, true), e);
    }

    #[test]
    fn epsilon_grid_is_geometric_and_decreasing(
        max in 0.01..1.0f64,
        shrink in 1.5..1000.0f64,
        count in 4usize..40,
    ) {
        let grid = EpsilonGrid { max, min: max / shrink, count };
        prop_assert!(grid.validate().is_ok());
        let v = grid.values();
        prop_assert_eq!(v.len(), count);
        prop_assert_eq!(v[0], max);
        prop_assert_eq!(v[count - 1], max / shrink);
        prop_assert!(v.windows(2).all(|w| w[0] > w[1]));
        let ratios: Vec<f64> = v.windows(2).map(|w| w[1] / w[0]).collect();
        prop_assert!(ratios.iter().all(|r| (r / ratios[0] - 1.0).abs() < 1e-9));
    }

    #[test]
    fn power_fit_recovers_exact_laws(
        c in 0.1..100.0f64,
        e in 0.05..3.0f64,
        max in 0.05..1.0f64,
        n in 4usize..12,
    ) {
        let pts: Vec<(f64, f64)> = (0..n)
            .map(|i| {
                let eps = max * 0.5f64.powi(i as i32);
                (eps, c * eps.powf(-e))
            })
            .collect();
        let fit = fit_power_law(&pts, Some(e), 0.01).unwrap();
        prop_assert!((fit.exponent() + fit.slope).abs() < 1e-12);
        prop_assert!((fit.slope + e).abs() < 1e-9);
        prop_assert!(fit.r_squared > 1.0 - 1e-9);
        prop_assert_eq!(fit.verdict, Verdict::Consistent);
    }

    #[test]
    fn inverse_laws_round_trip(kind in inverse_kind(), log_y in -4.0..10.0f64) {
        let y = 10f64.powf(log_y);
        let s = invert_law(&kind, y).unwrap();
        prop_assert!(s > 0.0);
        prop_assert!((kind.value(s) - y).abs() <= 1e-10 * y);
    }

    #[test]
    fn duhamel_of_constants_is_exact(c in -5.0..5.0f64, x in -3.0..3.0f64, t in 0.0..4.0f64, step in 0.01..0.5f64) {
        let v = ClosureField::new(move |_, _| c);
        let quad = QuadConfig::new(step);
        prop_assert!((duhamel_l(&v, x, t, quad).unwrap() - c * t * t / 2.0).abs() <= 1e-12 * (1.0 + t * t));
        prop_assert!((duhamel_lt(&v, x, t, quad).unwrap() - c * t).abs() <= 1e-12 * (1.0 + t));
    }

    #[test]
    fn antisymmetric_data_obey_huygens(
        amp in -3.0..3.0f64,
        offset in 0.0..1.5f64,
        width in 0.1..1.0f64,
        eps in 0.001..1.0f64,
        x in -1.0..1.0f64,
        dt in 0.0..100.0f64,
    ) {
        let g = Profile::dipole(amp, offset, width);
        let radius = g.reach().max(1.01);
        let data = InitialData::new(Profile::zero(), g, radius).unwrap();
        let t = radius + dt;
        let sup = huygens_residual(&data, eps, &[(x * dt, t)]).unwrap();
        prop_assert!(sup <= 1e-12 * eps);
    }

    #[test]
    fn free_solution_is_linear_in_epsilon(eps in 0.0..2.0f64, x in -5.0..5.0f64, t in 0.0..5.0f64) {
        let data = InitialData::new(Profile::single(0.8, 0.2, 1.0), Profile::single(-0.5, -0.3, 0.7), 1.5).unwrap();
        let one = free_solution(&data, 1.0, x, t);
        let scaled = free_solution(&data, eps, x, t);
        prop_assert!((scaled.u - eps * one.u).abs() <= 1e-14);
        prop_assert!((scaled.ut - eps * one.ut).abs() <= 1e-14);
    }

    #[test]
    fn config_hash_ignores_worker_count(workers in 1usize..64, r in 1.1..5.0f64) {
        let data = InitialData::new(Profile::zero(), Profile::single(1.0, 0.0, 1.0), 1.5).unwrap();
        let spec = ProblemSpec::new(vec![NonlinearTerm::power(r)], data, 1.0, "hash").unwrap();
        let grid = EpsilonGrid { max: 0.4, min: 0.05, count: 6 };
        let base = SweepConfig::new(spec, grid, GridConfig::for_radius(1.5, 100.0));
        let mut other = base.clone();
        other.workers = workers;
        prop_assert_eq!(base.hash(), other.hash());
        other.tolerance *= 2.0;
        prop_assert_ne!(base.hash(), other.hash());
    }
}
