use proptest::prelude::*;
use saddle_flow_core::experiments::{example1, multiplier_line_problem, random_qp, structured_lift};
use saddle_flow_core::flows::{ah_field, gah_field, lagrangian_identity_residual, AahParams};
use saddle_flow_core::linalg::{self, dot, norm, norm_sq};
use saddle_flow_core::model::condition_c_residual;
use saddle_flow_core::{
    Matrix, PrimalDualState, QuadraticObjective, SaddleProblem, StructuredPoint, StructuredProblem,
};

fn coords(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0..10.0f64, len)
}

fn qp(seed: u64) -> saddle_flow_core::experiments::RandomQp {
    random_qp(seed, 5, 3, (0.2, 1.0), (1.5, 5.0)).expect("valid arguments")
}

fn flat_operator(p: &SaddleProblem, z: &PrimalDualState) -> Vec<f64> {
    p.saddle_operator(z).unwrap().to_flat()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn operator_is_monotone(seed in 0u64..50, a in coords(8), b in coords(8)) {
        let p = qp(seed).problem;
        let z = PrimalDualState::from_flat(&a, 5);
        let w = PrimalDualState::from_flat(&b, 5);
        let dt = linalg::sub(&flat_operator(&p, &z), &flat_operator(&p, &w));
        let dz = linalg::sub(&a, &b);
        prop_assert!(dot(&dt, &dz) >= -1e-12 * norm_sq(&dz));
    }

    #[test]
    fn strong_monotonicity_gap_bound_on_example1(a in coords(4), b in coords(4)) {
        // ⟨T(x,λ), (x,λ) − (y,η)⟩ ≥ L(x,η) − L(y,λ) + α‖x − y‖²/2
        let p = example1().problem;
        let z = PrimalDualState::from_flat(&a, 2);
        let w = PrimalDualState::from_flat(&b, 2);
        let lhs = dot(&flat_operator(&p, &z), &linalg::sub(&a, &b));
        let rhs = p.lagrangian_at(&z.x, &w.lambda) - p.lagrangian_at(&w.x, &z.lambda)
            + 0.25 * linalg::dist_sq(&z.x, &w.x);
        prop_assert!(lhs - rhs >= -1e-10 * (1.0 + lhs.abs()));
    }

    #[test]
    fn condition_c_vanishes_for_quadratics(seed in 0u64..50, x in coords(5), y in coords(5)) {
        let o = qp(seed).problem.objective;
        let r = condition_c_residual(&o, &x, &y).unwrap();
        prop_assert!(r.abs() <= 1e-12 * (1.0 + norm_sq(&linalg::sub(&x, &y))) * 10.0);
    }

    #[test]
    fn multiplier_projection_is_idempotent_and_nonexpansive(a in coords(2), b in coords(2)) {
        let p = multiplier_line_problem();
        let xi = [1.0];
        let pa = p.multiplier_projection(&xi, &a).unwrap();
        let pb = p.multiplier_projection(&xi, &b).unwrap();
        let ppa = p.multiplier_projection(&xi, &pa).unwrap();
        prop_assert!(linalg::dist_sq(&pa, &ppa).sqrt() <= 1e-12 * (1.0 + norm(&pa)));
        prop_assert!(linalg::dist_sq(&pa, &pb) <= linalg::dist_sq(&a, &b) * (1.0 + 1e-12) + 1e-24);
        prop_assert!((pa[0] + pa[1] + 1.0).abs() < 1e-12 * (1.0 + norm(&a)));
    }

    #[test]
    fn lagrangian_identity_on_random_qps(seed in 0u64..50, a in coords(8)) {
        let p = qp(seed).problem;
        let z = PrimalDualState::from_flat(&a, 5);
        let zdot = ah_field(&p, &z).unwrap();
        let r = lagrangian_identity_residual(&p, &z, &zdot).unwrap();
        prop_assert!(r <= 1e-12 * (1.0 + zdot.norm_sq()), "residual {r}");
    }

    #[test]
    fn field_is_negated_operator_on_random_qps(seed in 0u64..50, a in coords(8)) {
        let p = qp(seed).problem;
        let z = PrimalDualState::from_flat(&a, 5);
        let f = ah_field(&p, &z).unwrap().to_flat();
        let t = flat_operator(&p, &z);
        prop_assert!(f.iter().zip(&t).all(|(f, t)| *f == -*t));
    }

    #[test]
    fn gah_degenerates_to_ah_without_second_block(seed in 0u64..50, a in coords(8)) {
        let p = qp(seed).problem;
        let g = QuadraticObjective::pure(Matrix::zeros(1, 1)).unwrap();
        let sp = StructuredProblem::new(p.objective.clone(), g, p.constraint.a.clone(), Matrix::zeros(3, 1), p.constraint.b.clone()).unwrap();
        let z = PrimalDualState::from_flat(&a, 5);
        let pt = StructuredPoint { x: z.x.clone(), y: vec![0.37], lambda: z.lambda.clone() };
        let d = gah_field(&sp, &pt).unwrap();
        let ah = ah_field(&p, &z).unwrap();
        prop_assert_eq!(d.x, ah.x);
        prop_assert_eq!(d.lambda, ah.lambda);
        prop_assert_eq!(d.y, vec![0.0]);
    }

    #[test]
    fn aah_theta_bounds_are_enforced(nu in 3.0..10.0f64, theta in -1.0..1.0f64) {
        let lo = 1.0 / (nu - 1.0);
        let ok = AahParams::new(nu, theta, 0.5, 1.0).is_ok();
        prop_assert_eq!(ok, theta >= lo && theta <= 0.5);
    }
}

#[test]
fn lagrangian_identity_at_many_example1_states() {
    use rand_chacha::rand_core::SeedableRng;
    use rand_distr::{Distribution, Uniform};
    let p = example1().problem;
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(11);
    let u = Uniform::new(-100.0, 100.0).unwrap();
    for _ in 0..10_000 {
        let z = PrimalDualState::new(
            (0..2).map(|_| u.sample(&mut rng)).collect(),
            (0..2).map(|_| u.sample(&mut rng)).collect(),
        );
        let zdot = ah_field(&p, &z).unwrap();
        let r = lagrangian_identity_residual(&p, &z, &zdot).unwrap();
        assert!(r <= 1e-12 * (1.0 + zdot.norm_sq()), "residual {r}");
    }
}

#[test]
fn random_qps_are_certified_and_in_range() {
    for seed in 0..50 {
        let qp = qp(seed);
        assert!(qp.saddle.stationarity_residual <= 1e-8 && qp.saddle.feasibility_residual <= 1e-8);
        let op = flat_operator(&qp.problem, &qp.saddle.state());
        assert!(norm(&op) <= 1e-10, "seed {seed}: {}", norm(&op));
        let (al, ga) = qp.problem.objective.convexity_constants();
        assert!((0.2 - 1e-9..=1.0 + 1e-9).contains(&al));
        assert!((1.5 - 1e-9..=5.0 + 1e-9).contains(&ga));
        assert_eq!(qp, random_qp(seed, 5, 3, (0.2, 1.0), (1.5, 5.0)).unwrap());
    }
}

#[test]
fn lifted_saddle_extends_the_original() {
    let p = example1().problem;
    let (pt, _) = structured_lift(&p).kkt_solve().unwrap();
    let sp = p.kkt_solve().unwrap();
    assert!(linalg::dist_sq(&pt.x, &sp.xi) < 1e-24);
    assert!(linalg::dist_sq(&pt.lambda, &sp.eta) < 1e-24);
}
