use proptest::prelude::*;

use adhesion1d::cone::{in_subdifferential, minimal_selection, omega, proj_h, proj_k, sample_normal_cone, subdifferential_tol};
use adhesion1d::gradflow::gradient_flow_step;
use adhesion1d::measures::{d_dist, quantile, quantile_cost, transport_cost, wasserstein, Cost};
use adhesion1d::particles::merge;
use adhesion1d::rng::seeded;
use adhesion1d::semigroup::{residual_liii, step};
use adhesion1d::step_fn::{legendre, lower_convex_envelope, lp_distance, primitive, refine_common};
use adhesion1d::{DiscreteMeasure, LagrangianState, MassVelocityState, ParticleSystem, StepFn};

fn step_fn() -> impl Strategy<Value = StepFn> {
    prop::collection::vec((0.05f64..1.0, -2.0f64..2.0), 1..12).prop_map(|cells| {
        let total: f64 = cells.iter().map(|c| c.0).sum();
        let widths: Vec<f64> = cells.iter().map(|c| c.0 / total).collect();
        let values: Vec<f64> = cells.iter().map(|c| c.1).collect();
        StepFn::from_widths(&widths, &values).unwrap()
    })
}

fn monotone() -> impl Strategy<Value = StepFn> {
    step_fn().prop_map(|f| {
        let mut level = 0.0;
        let values: Vec<f64> = f
            .values()
            .iter()
            .map(|v| {
                level += v.abs() + 0.01;
                level
            })
            .collect();
        StepFn::from_widths(&f.widths(), &values).unwrap()
    })
}

fn state() -> impl Strategy<Value = MassVelocityState> {
    prop::collection::vec((0.05f64..1.0, 0.0f64..1.0, -1.0f64..1.0), 1..20)
        .prop_map(|atoms| MassVelocityState::normalized(&atoms).unwrap())
}

fn measure() -> impl Strategy<Value = DiscreteMeasure> {
    prop::collection::vec((0.05f64..1.0, -1.0f64..1.0), 1..10).prop_map(|atoms| DiscreteMeasure::normalized(&atoms).unwrap())
}

proptest! {
    #[test]
    fn envelope_is_a_convex_minorant(f in step_fn()) {
        let big_f = primitive(&f);
        let env = lower_convex_envelope(&big_f).unwrap();
        prop_assert!(env.is_convex(1e-12));
        for (x, y) in big_f.knots() {
            prop_assert!(env.eval(x).unwrap() <= y + 1e-12);
        }
        for w in [0.0, 1.0] {
            prop_assert!((env.eval(w).unwrap() - big_f.eval(w).unwrap()).abs() <= 1e-12);
        }
    }

    #[test]
    fn legendre_twice_is_identity(f in step_fn()) {
        let env = lower_convex_envelope(&primitive(&f)).unwrap();
        let back = legendre(&legendre(&env).unwrap()).unwrap();
        prop_assert_eq!(back.domain(), env.domain());
        for (x, y) in env.knots() {
            prop_assert!((back.eval(x).unwrap() - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn refinement_keeps_distances(a in step_fn(), b in step_fn()) {
        let (ra, rb) = refine_common(&a, &b).into_step_fns();
        for p in [1.0, 2.0, 4.0, f64::INFINITY] {
            let d = lp_distance(&a, &b, p).unwrap();
            prop_assert!((lp_distance(&ra, &rb, p).unwrap() - d).abs() <= 1e-15 * (1.0 + d));
        }
    }

    #[test]
    fn csv_round_trip(f in step_fn()) {
        prop_assert_eq!(StepFn::from_csv_str(&f.to_csv_string()).unwrap(), f);
    }

    #[test]
    fn projection_is_orthogonal(f in step_fn()) {
        let p = proj_k(&f);
        prop_assert!(p.is_nondecreasing());
        prop_assert!(f.sub(&p).dot(&p).abs() <= 1e-12);
        prop_assert!(lp_distance(&proj_k(&p), &p, f64::INFINITY).unwrap() <= 1e-15);
    }

    #[test]
    fn projection_only_grows_plateaus(f in step_fn()) {
        prop_assert!(omega(&f).is_subset_of(&omega(&proj_k(&f))));
    }

    #[test]
    fn residual_is_a_normal_vector(f in step_fn()) {
        let p = proj_k(&f);
        let xi = f.sub(&p);
        prop_assert!(in_subdifferential(&xi, &p, subdifferential_tol(&xi)).unwrap());
    }

    #[test]
    fn minimal_selection_is_closest(g in monotone(), h in monotone(), z in step_fn(), seed in any::<u64>()) {
        let xi = sample_normal_cone(&g, 3, 2.0, &mut seeded(seed));
        prop_assert!(in_subdifferential(&xi, &g, subdifferential_tol(&xi)).unwrap());
        let z = proj_h(&omega(&g), &z);
        let best = lp_distance(&z.sub(&h), &minimal_selection(&g, &h), 2.0).unwrap();
        let other = lp_distance(&z.sub(&h), &xi, 2.0).unwrap();
        prop_assert!(best <= other + 1e-12);
    }

    #[test]
    fn quantiles_are_isometric(a in measure(), b in measure()) {
        let w = wasserstein(&a, &b, 2.0).unwrap();
        let l = lp_distance(&quantile(&a), &quantile(&b), 2.0).unwrap();
        prop_assert!((w - l).abs() <= 1e-15);
    }

    #[test]
    fn phase_distance_triangle(a in state(), b in state(), c in state()) {
        for p in [1.0, 2.0, 4.0] {
            let ab = d_dist(&a, &b, p).unwrap();
            let bc = d_dist(&b, &c, p).unwrap();
            let ac = d_dist(&a, &c, p).unwrap();
            prop_assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn push_forward_of_polynomials(rho in measure(), coeffs in prop::collection::vec(-1.0f64..1.0, 5)) {
        let zeta = |x: f64| coeffs.iter().rev().fold(0.0, |acc, c| acc * x + c);
        let by_quantile: f64 = quantile(&rho).cells().map(|(a, b, x)| (b - a) * zeta(x)).sum();
        prop_assert!((rho.integrate(zeta) - by_quantile).abs() <= 1e-13);
    }

    #[test]
    fn particles_conserve_and_dissipate(mu in state(), times in prop::collection::vec(0.0f64..5.0, 1..8)) {
        let mut times = times;
        times.sort_by(f64::total_cmp);
        let mut sys = ParticleSystem::new(&mu);
        let mut energy = sys.kinetic_energy();
        let mut seen = 0;
        for &t in &times {
            sys.evolve(t).unwrap();
            prop_assert!((sys.total_mass() - 1.0).abs() <= 1e-12);
            prop_assert!((sys.momentum() - mu.momentum()).abs() <= 1e-12);
            let e = sys.kinetic_energy();
            prop_assert!(e <= energy + 1e-15);
            if sys.events().len() > seen {
                prop_assert!(e < energy);
            }
            seen = sys.events().len();
            energy = e;
            for w in sys.clusters().windows(2) {
                prop_assert!(w[0].position < w[1].position);
            }
        }
    }

    #[test]
    fn merging_is_associative(atoms in prop::collection::vec((0.05f64..1.0, -1.0f64..1.0), 3)) {
        let total: f64 = atoms.iter().map(|a| a.0).sum();
        let masses: Vec<f64> = atoms.iter().map(|a| a.0 / total).collect();
        let velocities: Vec<f64> = atoms.iter().map(|a| a.1).collect();
        let sys = ParticleSystem::from_particles(&masses, &[0.0, 1e-14, 2e-14], &velocities).unwrap();
        let all = merge(&sys, &[0, 1]).unwrap();
        let left = merge(&merge(&sys, &[0]).unwrap(), &[0]).unwrap();
        let right = merge(&merge(&sys, &[1]).unwrap(), &[0]).unwrap();
        for other in [&left, &right] {
            prop_assert_eq!(other.clusters().len(), 1);
            prop_assert!((other.clusters()[0].velocity - all.clusters()[0].velocity).abs() <= 1e-15);
            prop_assert!((other.clusters()[0].mass - all.clusters()[0].mass).abs() <= 1e-15);
        }
    }

    #[test]
    fn rescaled_form_holds(mu in state(), t in 0.01f64..5.0) {
        let s0 = LagrangianState::from_state(&mu);
        prop_assert!(residual_liii(&s0, t).unwrap() <= 1e-9);
    }

    #[test]
    fn velocity_norms_do_not_grow(mu in state(), s in 0.0f64..3.0, dt in 0.0f64..3.0) {
        let s0 = LagrangianState::from_state(&mu);
        let (a, b) = (step(&s0, s).unwrap(), step(&s0, s + dt).unwrap());
        for p in [1.0, 2.0, 4.0] {
            prop_assert!(b.v().lp_norm(p).unwrap() <= a.v().lp_norm(p).unwrap() + 1e-12);
            let bound = dt * s0.v().lp_norm(p).unwrap();
            prop_assert!(lp_distance(a.x(), b.x(), p).unwrap() <= bound + 1e-12);
        }
    }

    #[test]
    fn convex_cost_stability(m1 in state(), m2 in state(), t in 0.0f64..5.0) {
        let quartic = Cost::power(4.0).unwrap();
        let (s1, s2) = (LagrangianState::from_state(&m1), LagrangianState::from_state(&m2));
        let (a, b) = (step(&s1, t).unwrap(), step(&s2, t).unwrap());
        let lhs = transport_cost(&a.to_state().density(), &b.to_state().density(), &quartic);
        let rhs = quantile_cost(&s1.x().axpy(t, s1.v()), &s2.x().axpy(t, s2.v()), &quartic);
        prop_assert!(lhs <= rhs + 1e-12 * (1.0 + rhs));
    }

    #[test]
    fn euler_iterates_stay_monotone(x in monotone(), sigma in monotone(), h in 0.001f64..0.5) {
        let mut it = x;
        for _ in 0..5 {
            it = gradient_flow_step(&it, &sigma, h).unwrap();
            prop_assert!(it.is_nondecreasing());
            prop_assert!(it.sup_norm().is_finite());
        }
    }
}
