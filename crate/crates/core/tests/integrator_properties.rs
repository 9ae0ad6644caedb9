use proptest::prelude::*;
use qlode::integrator::{integrate, integrate_with_variational, IntegratorConfig};
use qlode::ode::{
    amplitude_bound, center_energy, energy, in_invariant_region, potential, PhasePoint,
    ProblemParams,
};
use qlode::period::{period, EnergyLevel};

/// Interior start: `u0 = f A_q`, `v0 = g sqrt(-2 V(u0))`, so that `H < 0`.
fn interior_start(p: &ProblemParams, f: f64, g: f64) -> PhasePoint {
    let u = f * amplitude_bound(p);
    let v = g * (-2.0 * potential(p, u).unwrap()).sqrt();
    PhasePoint::new(u, v)
}

fn orbit_period(p: &ProblemParams, x: PhasePoint) -> f64 {
    let level = EnergyLevel::new(p, energy(p, x).unwrap()).unwrap();
    period(p, &level).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn energy_conserved_over_one_period(
        q in 1.5f64..6.0, mu in 0.1f64..20.0, f in 0.1f64..0.95, g in -0.8f64..0.8,
    ) {
        let p = ProblemParams::new(q, mu, 1.0).unwrap();
        let x0 = interior_start(&p, f, g);
        let t = orbit_period(&p, x0);
        let cfg = IntegratorConfig::default();
        let tr = integrate(&p, x0, (0.0, t), &cfg).unwrap();
        let e0 = energy(&p, x0).unwrap();
        let drift = tr.states.iter().map(|x| (energy(&p, *x).unwrap() - e0).abs()).fold(0.0, f64::max);
        prop_assert!(drift < 100.0 * cfg.rel_tol * center_energy(&p).abs(), "drift {drift}");
    }

    #[test]
    fn sensitivity_matches_central_differences(
        q in 1.5f64..6.0, mu in 0.1f64..10.0, f in 0.2f64..0.9, g in -0.7f64..0.7, t in 0.5f64..3.0,
    ) {
        let p = ProblemParams::new(q, mu, 1.0).unwrap();
        let x0 = interior_start(&p, f, g);
        let cfg = IntegratorConfig::with_tolerances(1e-13, 1e-15);
        let s = integrate_with_variational(&p, x0, (0.0, t), &cfg).unwrap().final_sensitivity().unwrap();
        let h = 1e-6;
        let flow = |x: PhasePoint| integrate(&p, x, (0.0, t), &cfg).unwrap().final_state();
        let cols = [
            (flow(PhasePoint::new(x0.u + h, x0.v)), flow(PhasePoint::new(x0.u - h, x0.v))),
            (flow(PhasePoint::new(x0.u, x0.v + h)), flow(PhasePoint::new(x0.u, x0.v - h))),
        ];
        let norm = s.iter().flatten().map(|x| x.abs()).fold(0.0, f64::max);
        for (j, (a, b)) in cols.iter().enumerate() {
            let fd = [(a.u - b.u) / (2.0 * h), (a.v - b.v) / (2.0 * h)];
            for i in 0..2 {
                prop_assert!((s[i][j] - fd[i]).abs() < 1e-4 * norm, "{i}{j}: {} vs {}", s[i][j], fd[i]);
            }
        }
    }

    #[test]
    fn orbits_stay_in_invariant_region(
        q in 1.5f64..6.0, mu in 0.1f64..20.0, f in 0.1f64..0.95, g in -0.8f64..0.8,
    ) {
        let p = ProblemParams::new(q, mu, 1.0).unwrap();
        let x0 = interior_start(&p, f, g);
        let t = 10.0 * orbit_period(&p, x0);
        let tr = integrate(&p, x0, (0.0, t), &IntegratorConfig::default()).unwrap();
        prop_assert!(tr.states.iter().all(|x| in_invariant_region(&p, *x)));
    }
}
