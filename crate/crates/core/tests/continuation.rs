use qlode::bifurcation::{degeneracy_instant, eigenfunction_even};
use qlode::continuation::{
    continue_branch, count_zeros, distinct_solutions, shoot_half_period, solve_branch_point,
    PeriodicSolution, ShootingConfig, SolveError,
};
use qlode::integrator::{integrate, IntegratorConfig};
use qlode::ode::{amplitude_bound, center_energy, PhasePoint, ProblemParams};
use qlode::period::{orbit_for_period, turning_points};
use std::f64::consts::PI;

const TWO_PI: f64 = 2.0 * PI;

/// Turning points of the q=3, mu=3 orbits with periods 2 pi and pi, from the
/// closed-form elliptic period evaluated at 40 digits.
const U_PLUS_2PI: f64 = 1.414_000_664_904_346;
const U_MINUS_2PI: f64 = 0.024_538_126_457_967_562;
const U_PLUS_PI: f64 = 1.351_105_320_222_181_4;

fn params(q: f64, mu: f64) -> ProblemParams {
    ProblemParams::new(q, mu, TWO_PI).unwrap()
}

fn oracle_max(p: &ProblemParams, k: u32) -> f64 {
    let level = orbit_for_period(p, p.period() / f64::from(k))
        .unwrap()
        .unwrap();
    turning_points(p, &level).1
}

#[test]
fn constant_start_has_zero_residual() {
    let p = params(3.0, 3.0);
    for k in 1..=3 {
        assert_eq!(shoot_half_period(&p, k, 1.0).unwrap().0, 0.0);
    }
}

#[test]
fn oracle_orbit_closes_under_shooting() {
    let p = params(3.0, 3.0);
    let a = oracle_max(&p, 1);
    assert!((a - U_PLUS_2PI).abs() < 1e-12);
    assert!(shoot_half_period(&p, 1, a).unwrap().0.abs() < 1e-9);
    // the minimum is an equally valid starting point
    assert!(shoot_half_period(&p, 1, U_MINUS_2PI).unwrap().0.abs() < 1e-9);
}

#[test]
fn residual_keeps_sign_below_first_instant() {
    let p = params(3.0, 0.25);
    let signs: Vec<bool> = (1..100)
        .map(|i| 1.0 + (2f64.sqrt() - 1.0) * f64::from(i) / 100.0)
        .map(|a| shoot_half_period(&p, 1, a).unwrap().0 > 0.0)
        .collect();
    assert!(signs.iter().all(|&s| s == signs[0]));
}

#[test]
fn shooting_rejects_points_outside_the_loop() {
    let p = params(3.0, 3.0);
    assert!(matches!(
        shoot_half_period(&p, 1, 1.5),
        Err(SolveError::OutsideRegion(_))
    ));
    assert!(matches!(
        shoot_half_period(&p, 1, 0.0),
        Err(SolveError::OutsideRegion(_))
    ));
}

#[test]
fn branch_points_match_oracle() {
    let cfg = ShootingConfig::default();
    let p = params(3.0, 3.0);
    let s1 = solve_branch_point(&p, 1, 1.3, &cfg).unwrap();
    assert_eq!(s1.zero_count, 2);
    assert!((s1.a - U_PLUS_2PI).abs() < 1e-8);
    assert!((s1.u_min - U_MINUS_2PI).abs() < 1e-8);

    let s2 = solve_branch_point(&p, 2, 1.2, &cfg).unwrap();
    assert_eq!(s2.zero_count, 4);
    assert!((s2.a - U_PLUS_PI).abs() < 1e-8);
    // minimal period pi: shifting by half the grid reproduces the profile
    let n = s2.grid_size();
    for j in 0..n {
        let (x, y) = (s2.profile[j], s2.profile[(j + n / 2) % n]);
        assert!(x.distance(&y) < 1e-9);
    }
}

#[test]
fn no_branch_point_below_instant() {
    let cfg = ShootingConfig::default();
    let err = solve_branch_point(&params(3.0, 0.4), 1, 1.2, &cfg).unwrap_err();
    match err {
        SolveError::BelowInstant {
            mu_k, eigenvalue, ..
        } => {
            assert!((mu_k - 0.5).abs() < 1e-15);
            assert!(eigenvalue > 0.0);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn bad_guess_still_lands_on_the_right_branch() {
    let cfg = ShootingConfig::default();
    let p = params(3.0, 3.0);
    for guess in [1.0, 1.0001, 0.999, 1.414, 1e-6] {
        let s = solve_branch_point(&p, 1, guess, &cfg).unwrap();
        assert!((s.a - U_PLUS_2PI).abs() < 1e-8, "guess {guess}");
    }
}

#[test]
fn first_branch_follows_oracle_curve() {
    let cfg = ShootingConfig::default();
    let br = continue_branch(3.0, TWO_PI, 1, 5.0, &cfg).unwrap();
    assert!(br.points.len() > 10);
    assert_eq!(br.points.last().unwrap().mu, 5.0);
    // the quadrature oracle cannot resolve periods within ~1e-7 of the center period
    for pt in br.points.iter().filter(|pt| pt.mu >= 0.6) {
        let p = params(3.0, pt.mu);
        assert!(
            (pt.solution.a - oracle_max(&p, 1)).abs() < 1e-7,
            "mu {}",
            pt.mu
        );
    }
    let amps: Vec<f64> = br.points.iter().map(|pt| pt.solution.a).collect();
    assert!(amps.windows(2).all(|w| w[1] > w[0]));
    assert!(amps.iter().all(|&a| a < 2f64.sqrt()));
}

#[test]
fn second_branch_starts_at_its_instant() {
    let cfg = ShootingConfig::default();
    let br = continue_branch(3.0, TWO_PI, 2, 5.0, &cfg).unwrap();
    assert!((br.origin.mu_k - 2.0).abs() < 1e-14);
    assert!(br.points.iter().all(|pt| pt.mu > 2.0));
    assert!(br.points.iter().all(|pt| pt.solution.zero_count == 4));
    assert!(br.points[0].mu - 2.0 < 1e-3);
    assert!(br.points[0].solution.a - 1.0 < 2e-3);
}

#[test]
fn amplitude_approaches_bound_as_mu_grows() {
    let cfg = ShootingConfig::default();
    let br = continue_branch(3.0, TWO_PI, 1, 40.0, &cfg).unwrap();
    let bound = 2f64.sqrt();
    let gaps: Vec<f64> = br.points.iter().map(|pt| bound - pt.solution.a).collect();
    assert!(gaps.iter().all(|&g| g >= -1e-12));
    assert!(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-13));
    assert!(*gaps.last().unwrap() < 1e-9);
}

#[test]
fn continuation_refuses_targets_below_instant() {
    let cfg = ShootingConfig::default();
    assert!(matches!(
        continue_branch(3.0, TWO_PI, 2, 1.5, &cfg),
        Err(SolveError::BelowInstant { .. })
    ));
}

#[test]
fn distinct_solution_examples() {
    let cfg = ShootingConfig::default();
    let only = distinct_solutions(3.0, TWO_PI, 0.3, &cfg).unwrap();
    assert_eq!(only.found_count(), 1);
    assert!(only.solutions()[0].is_constant());

    for &(q, mu) in &[(2.0, 4.5), (3.0, 3.0)] {
        let set = distinct_solutions(q, TWO_PI, mu, &cfg).unwrap();
        assert_eq!(set.lower_bound, 2);
        assert_eq!(set.found_count(), 3);
        let zeros: Vec<usize> = set.solutions().iter().map(|s| s.zero_count).collect();
        assert_eq!(zeros, vec![0, 2, 4]);
        assert!(set.findings.is_empty());
        let p = params(q, mu);
        for s in set.solutions().iter().skip(1) {
            assert!((s.a - oracle_max(&p, s.k)).abs() < 1e-8);
        }
    }
}

#[test]
fn zero_counting() {
    let cfg = ShootingConfig::default();
    let c = PeriodicSolution::constant(params(3.0, 3.0), 64);
    assert_eq!(count_zeros(&c).unwrap().count, 0);

    let s = solve_branch_point(&params(3.0, 3.0), 1, 1.3, &cfg).unwrap();
    let z = count_zeros(&s).unwrap();
    assert_eq!(z.count, 2);
    assert!(z.all_simple);
    // crossings are symmetric about T/2
    assert!((z.crossings[0].t + z.crossings[1].t - TWO_PI).abs() < 1e-9);
}

#[test]
fn near_bifurcation_solutions_have_eigenfunction_zeros() {
    let cfg = ShootingConfig::default();
    for k in 1..=3 {
        let mu = degeneracy_instant(3.0, TWO_PI, k).unwrap().mu_k + 1e-4;
        let s = solve_branch_point(&params(3.0, mu), k, 1.01, &cfg).unwrap();
        assert_eq!(count_zeros(&s).unwrap().count, 2 * k as usize);
        // the profile is close to 1 + c cos(k t) in shape
        let e = eigenfunction_even(TWO_PI, k);
        let amp = s.a - 1.0;
        for (t, x) in s.times().iter().zip(&s.profile) {
            assert!((x.u - 1.0 - amp * e(*t)).abs() < 0.1 * amp);
        }
    }
}

#[test]
fn grid_cell_with_hidden_crossings_is_resolved() {
    // coarse grid: the maximum of a k=3 profile hides a crossing pair inside
    // the first and last cells
    let cfg = ShootingConfig {
        grid_size: 16,
        ..ShootingConfig::default()
    };
    let s = solve_branch_point(&params(3.0, 30.0), 3, 1.4, &cfg).unwrap();
    assert_eq!(count_zeros(&s).unwrap().count, 6);
}

#[test]
fn stored_orbit_reproduces_its_translates() {
    let cfg = ShootingConfig::default();
    let s = solve_branch_point(&params(2.0, 4.5), 2, 1.2, &cfg).unwrap();
    let n = s.grid_size();
    let h = s.grid_step();
    let icfg = IntegratorConfig::with_tolerances(1e-12, 1e-15);
    for &(j, m) in &[(0usize, 300usize), (100, 900), (511, 1023)] {
        let end = integrate(&s.params, s.profile[j], (0.0, (m - j) as f64 * h), &icfg)
            .unwrap()
            .final_state();
        assert!(end.distance(&s.profile[m % n]) < 1e-8);
    }
}

#[test]
fn solution_invariants_hold_across_branches() {
    let cfg = ShootingConfig::default();
    for &(q, mu) in &[(3.0, 10.0), (2.0, 20.0), (5.0, 6.0)] {
        let p = params(q, mu);
        let set = distinct_solutions(q, TWO_PI, mu, &cfg).unwrap();
        assert_eq!(set.nonconstant_count() as u32, set.lower_bound);
        let mut seen = std::collections::HashSet::new();
        for s in set.solutions() {
            s.check_invariants().unwrap();
            assert!(seen.insert(s.zero_count), "two branches share a zero count");
            assert!(s.a <= amplitude_bound(&p) + 1e-12);
            if !s.is_constant() {
                assert!(s.energy > center_energy(&p) && s.energy < 0.0);
            }
            for j in 0..s.grid_size() {
                assert!((s.profile[j].u - s.reflected(j).u).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn configuration_is_validated() {
    let bad = ShootingConfig {
        grid_size: 1000,
        ..ShootingConfig::default()
    };
    assert!(matches!(
        distinct_solutions(3.0, TWO_PI, 3.0, &bad),
        Err(SolveError::Config(_))
    ));
    let bad = ShootingConfig {
        newton_tol: 0.0,
        ..ShootingConfig::default()
    };
    assert!(bad.validate().is_err());
}

#[test]
fn solving_from_the_other_side_gives_the_same_orbit() {
    let cfg = ShootingConfig::default();
    let p = params(3.0, 3.0);
    let from_max = solve_branch_point(&p, 1, 1.41, &cfg).unwrap();
    let from_min = solve_branch_point(&p, 1, 0.03, &cfg).unwrap();
    assert!((from_max.energy - from_min.energy).abs() < 1e-12);
    let x = PhasePoint::new(from_max.a, 0.0);
    assert!(x.distance(&from_min.profile[0]) < 1e-12);
}

mod properties {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn branch_points_satisfy_invariants(q in 1.5f64..5.0, x in 1.05f64..5.0) {
            let mu = x * x / (q - 1.0);
            let p = params(q, mu);
            let cfg = ShootingConfig { grid_size: 512, ..ShootingConfig::default() };
            let set = distinct_solutions(q, TWO_PI, mu, &cfg).unwrap();
            prop_assert!(set.findings.is_empty());
            prop_assert_eq!(set.nonconstant_count() as u32, set.lower_bound);
            let mut zeros = std::collections::HashSet::new();
            for s in set.solutions() {
                s.check_invariants().unwrap();
                prop_assert!(zeros.insert(s.zero_count));
                prop_assert!(s.a <= amplitude_bound(&p));
                for j in 0..s.grid_size() {
                    prop_assert!((s.profile[j].u - s.reflected(j).u).abs() < 1e-9);
                }
                if s.is_constant() {
                    continue;
                }
                prop_assert_eq!(s.zero_count, 2 * s.k as usize);
                prop_assert!(s.energy > center_energy(&p) && s.energy < 0.0);
                let mu_k = degeneracy_instant(q, TWO_PI, s.k).unwrap().mu_k;
                if mu > 1.02 * mu_k {
                    // Quadrature may refuse orbits hugging the saddle; it must not refuse others.
                    match orbit_for_period(&p, TWO_PI / f64::from(s.k)) {
                        Ok(Some(level)) => {
                            prop_assert!((s.a - turning_points(&p, &level).1).abs() < 1e-7);
                        }
                        _ => prop_assert!(s.energy / center_energy(&p).abs() > -1e-6),
                    }
                }
            }
        }

        #[test]
        fn translates_stay_on_the_orbit(q in 1.5f64..5.0, x in 1.2f64..3.0, j in 0usize..256, m in 1usize..256) {
            let mu = x * x / (q - 1.0);
            let cfg = ShootingConfig { grid_size: 256, ..ShootingConfig::default() };
            let s = solve_branch_point(&params(q, mu), 1, 1.1, &cfg).unwrap();
            let icfg = IntegratorConfig::with_tolerances(1e-14, 1e-17);
            let end = integrate(&s.params, s.profile[j], (0.0, m as f64 * s.grid_step()), &icfg)
                .unwrap()
                .final_state();
            prop_assert!(end.distance(&s.profile[(j + m) % 256]) < 1e-8);
        }
    }
}
