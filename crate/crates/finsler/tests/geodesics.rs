use qtraj_core::{PotentialSpec, Provenance};
use qtraj_finsler::oracle::{AnalyticQ, Folded};
use qtraj_finsler::{run_geodesic, ExtendedState, Form, GeodesicConfig, GeodesicRunner, QField};

fn bump() -> AnalyticQ {
    AnalyticQ::Bump { amplitude: -0.8, center: vec![0.5, -0.2], drift: vec![0.2, 0.1], width: 1.0, breathing: 0.3 }
}

#[test]
fn gamma_and_n_forms_trace_the_same_curve() {
    let s0 = ExtendedState::new(0.0, &[-0.5, 0.3], 1.0, &[0.9, -0.2]);
    let run = |form| {
        let cfg = GeodesicConfig { form, dtau: 1e-2, ..GeodesicConfig::default() };
        run_geodesic(s0.clone(), &bump(), &cfg, 100, Provenance::default()).unwrap()
    };
    let (a, b) = (run(Form::Gamma), run(Form::N));
    assert_eq!(a.times.len(), 101);
    let worst = a.tracks[0].positions.iter().zip(&b.tracks[0].positions).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max);
    let moved = (a.tracks[0].position(100, 2)[0] - (-0.5)).abs();
    println!("max form deviation {worst:.3e}, displacement {moved:.3}");
    assert!(worst < 1e-6);
    assert!(moved > 0.5);
}

fn classical(v: &PotentialSpec, q: &[f64], u: &[f64], t_end: f64, dt: f64) -> Vec<f64> {
    let n = q.len();
    let f = |z: &[f64]| -> Vec<f64> {
        let g = v.gradient_at(&z[..n]);
        z[n..].iter().cloned().chain(g.iter().map(|x| -x)).collect()
    };
    let mut z: Vec<f64> = q.iter().chain(u).cloned().collect();
    let steps = (t_end / dt).round() as usize;
    for _ in 0..steps {
        let k1 = f(&z);
        let z2: Vec<f64> = z.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k2 = f(&z2);
        let z3: Vec<f64> = z.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
        let k3 = f(&z3);
        let z4: Vec<f64> = z.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
        let k4 = f(&z4);
        for i in 0..2 * n {
            z[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    z
}

#[test]
fn newtonian_limit_matches_a_classical_integrator() {
    let v = PotentialSpec::SoftCoulomb { center: vec![0.0, 0.0], charge: 1.0, softening: 1.0 };
    let q0 = [3.0, 0.5];
    let u0 = [-0.2, 0.4];
    let t_end = 5.0;
    let reference = classical(&v, &q0, &u0, t_end, 1e-3);
    let zero = AnalyticQ::Constant { dim: 2, value: 0.0 };
    let folded = Folded { inner: zero.clone(), potential: v.clone() };
    let s0 = ExtendedState::new(0.0, &q0, 1.0, &u0);

    let force = GeodesicConfig { potential: Some(v.clone()), dtau: 2e-3, ..GeodesicConfig::default() };
    let mut a = GeodesicRunner::new(s0.clone(), &zero, force, Provenance::default()).unwrap();
    a.advance_to(&zero, t_end).unwrap();
    let plain = GeodesicConfig { dtau: 2e-3, ..GeodesicConfig::default() };
    let mut b = GeodesicRunner::new(s0, &folded, plain, Provenance::default()).unwrap();
    b.advance_to(&folded, t_end).unwrap();

    for r in [&a, &b] {
        assert!(r.is_alive());
        let dq = r.state.q().iter().zip(&reference).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        let dv = r.state.physical_velocity().iter().zip(&reference[2..]).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        println!("newtonian deviation q {dq:.3e} v {dv:.3e}");
        assert!(dq < 1e-8 && dv < 1e-8);
    }
}

#[test]
fn lambda_is_conserved_along_geodesics() {
    let s0 = ExtendedState::new(0.0, &[-0.5, 0.3], 1.0, &[0.9, -0.2]);
    let q = AnalyticQ::Bump { amplitude: -0.8, center: vec![0.5, -0.2], drift: vec![0.0, 0.0], width: 1.0, breathing: 0.0 };
    let cfg = GeodesicConfig { dtau: 1e-2, ..GeodesicConfig::default() };
    let b = run_geodesic(s0, &q, &cfg, 300, Provenance::default()).unwrap();
    let lam: Vec<f64> = b.tracks[0].extra.chunks(3).map(|c| c[1]).collect();
    let spread = lam.iter().map(|l| (l - lam[0]).abs()).fold(0.0, f64::max);
    assert!(spread < 1e-9, "{spread:e}");
}

#[test]
fn free_gaussian_geodesic_is_the_bohmian_path() {
    let sigma: f64 = 1.5;
    let c = [0.0, 0.0];
    let k0 = [0.8, -0.3];
    let q = AnalyticQ::FreeGaussian { sigma, center: c.to_vec(), k0: k0.to_vec() };
    let s4 = 4.0 * sigma.powi(4);
    let q0 = [0.9, 0.6];
    let velocity = |q: &[f64], t: f64| -> Vec<f64> { (0..2).map(|i| k0[i] + (q[i] - c[i] - k0[i] * t) * t / (s4 + t * t)).collect() };
    let path = |t: f64| -> Vec<f64> {
        let grow = (1.0 + (t / (2.0 * sigma * sigma)).powi(2)).sqrt();
        (0..2).map(|i| c[i] + k0[i] * t + (q0[i] - c[i]) * grow).collect()
    };
    let s0 = ExtendedState::new(0.0, &q0, 1.0, &velocity(&q0, 0.0));
    let mut r = GeodesicRunner::new(s0, &q, GeodesicConfig { dtau: 1e-2, ..GeodesicConfig::default() }, Provenance::default()).unwrap();
    let mut worst: f64 = 0.0;
    for k in 1..=20 {
        let t = k as f64;
        r.advance_to(&q, t).unwrap();
        assert!(r.is_alive(), "{:?}", r.terminated);
        let exact = path(t);
        worst = r.state.q().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(worst, f64::max);
    }
    println!("geodesic vs Bohmian path over t = 20: {worst:.3e}");
    assert!(worst < 1e-6);
    assert!(q.dim() == 2);
}
