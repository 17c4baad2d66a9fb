use proptest::prelude::*;
use qtraj_finsler::identities::{flat_residual, identity_sweep, is_admissible, test_fields};
use qtraj_finsler::oracle::AnalyticQ;
use qtraj_finsler::{cartan_tensor, lambda_fn, ExtendedState, Geometry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn identities_hold_on_random_admissible_states() {
    let geom = Geometry::default();
    for n in 1..=2 {
        let mut rng = ChaCha8Rng::seed_from_u64(20 + n as u64);
        let r = identity_sweep(&mut rng, &test_fields(n), 400, &geom, true).unwrap();
        println!("{n}-d: {r:?}");
        assert_eq!(r.states, 1200);
        assert!(r.metric_fd < 1e-6);
        assert!(r.euler < 1e-10);
        assert!(r.cartan_y < 1e-10);
        assert!(r.n_dual < 1e-8);
        assert!(r.n_spray < 1e-8);
        assert!(r.curvature < 1e-6);
    }
}

#[test]
fn constant_q_is_flat() {
    let geom = Geometry::default();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..50 {
        let s = qtraj_finsler::sample_state(&mut rng, 2, 1.0, 1.0);
        assert!(flat_residual(&s, -1.7, &geom).unwrap() < 1e-10);
    }
}

#[test]
fn cartan_tensor_is_totally_symmetric() {
    let s = ExtendedState::new(0.1, &[0.2, -0.3], 1.05, &[0.8, 0.45]);
    let q = AnalyticQ::Constant { dim: 2, value: -1.0 };
    let c = cartan_tensor(&s, &q, &Geometry::default()).unwrap();
    let d = 3;
    let at = |a: usize, b: usize, e: usize| c[(a * d + b) * d + e];
    for a in 0..d {
        for b in 0..d {
            for e in 0..d {
                let v = at(a, b, e);
                for w in [at(a, e, b), at(b, a, e), at(b, e, a), at(e, a, b), at(e, b, a)] {
                    assert!((v - w).abs() <= 1e-14 * v.abs().max(1.0));
                }
            }
        }
    }
}

#[test]
fn admissibility_filter_matches_energy_condition() {
    let q = AnalyticQ::Constant { dim: 1, value: -0.3 };
    let geom = Geometry::default();
    assert!(is_admissible(&ExtendedState::new(0.0, &[0.0], 1.0, &[0.5]), &q, &geom).unwrap());
    assert!(!is_admissible(&ExtendedState::new(0.0, &[0.0], 1.0, &[0.9]), &q, &geom).unwrap());
}

proptest! {
    #[test]
    fn lambda_is_positively_homogeneous(
        y0 in 0.2f64..5.0,
        v in prop::collection::vec(-3.0f64..3.0, 2),
        qp in -2.0f64..2.0,
        k in 0.01f64..50.0,
    ) {
        let geom = Geometry::default();
        let oracle = AnalyticQ::Constant { dim: 2, value: qp };
        let s = ExtendedState::new(0.0, &[0.0, 0.0], y0, &v);
        let scaled = ExtendedState::new(0.0, &[0.0, 0.0], k * y0, &[k * v[0], k * v[1]]);
        let a = lambda_fn(&scaled, &oracle, &geom).unwrap();
        let b = k * lambda_fn(&s, &oracle, &geom).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0));
    }
}
