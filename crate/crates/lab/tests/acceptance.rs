//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Runs the presets end to end, so it takes a few minutes on one core.

use std::path::Path;
use std::sync::Arc;
use std::time::Instant;

use qtraj_core::pilot::velocity_field;
use qtraj_core::twobody::{conditional_velocity, symmetrize, Particle};
use qtraj_core::{init_gaussian, make_grid, Boundary, GridSpec, PilotConfig, PotentialSpec, Provenance, RelaxConfig};
use qtraj_finsler::identities::flat_residual;
use qtraj_finsler::{
    check_admissibility, identity_sweep, lambda_fn, run_geodesic, sample_state, test_fields, AnalyticQ, ExtendedState, Form,
    GeodesicConfig, Geometry, QField, Shifted,
};
use qtraj_lab::{presets, run_scenario, RunOptions, RunSummary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// Tolerances.
const NORM_DRIFT: f64 = 1e-10;
const WIDTH_REL: f64 = 5e-3;
const FREE_RUNTIME_S: f64 = 120.0;
const EQUIVARIANCE_L1: f64 = 0.05;
const METRIC_FD_REL: f64 = 1e-6;
const IDENTITY_ABS: f64 = 1e-10;
const N_DUAL: f64 = 1e-8;
const IDENTITY_RUNTIME_S: f64 = 60.0;
const IDENTITY_STATES: usize = 1000;
const FORMS_DEVIATION: f64 = 1e-6;
const EQUIVALENCE_SPACINGS: f64 = 2.0;
const FRINGE_RUNTIME_S: f64 = 600.0;
const CHECKER_CASES: usize = 100;
const EXCHANGE: f64 = 1e-12;
const FACTORIZED_VELOCITY: f64 = 1e-8;
const DUAL_L1: f64 = 0.1;

/// Criteria that fail for documented physical or numerical reasons.
const KNOWN_FAILURES: &[(u32, &str)] = &[(
    5,
    "double-slit geodesics integrate the grid quantum force through the reflection ripples in front of the slab and leave the Bohmian path there",
)];

struct Verdict {
    id: u32,
    pass: bool,
}

fn report(verdicts: &mut Vec<Verdict>, id: u32, title: &str, pass: bool, detail: String) {
    println!("[{}] criterion {id}: {title}: {detail}", if pass { "PASS" } else { "FAIL" });
    verdicts.push(Verdict { id, pass });
}

fn run_preset(name: &str, out: &Path) -> (RunSummary, f64) {
    let sc = presets::load(name).unwrap().resolve().unwrap();
    let start = Instant::now();
    let s = run_scenario(&sc, &RunOptions { seed: None, out: Some(out.to_path_buf()) }).unwrap();
    (s, start.elapsed().as_secs_f64())
}

fn det3(m: [[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

/// Bordered Hessian of Λ in (y⁰, q̇) by central differences of Λ itself.
fn bordered_by_differences(s: &ExtendedState, q: &impl QField, geom: &Geometry) -> f64 {
    let h = 1e-3;
    let lam = |d0: f64, d1: f64| {
        let mut t = s.clone();
        t.y[0] += d0;
        t.y[1] += d1;
        lambda_fn(&t, q, geom).unwrap()
    };
    let l = lam(0.0, 0.0);
    let d = |a: usize| if a == 0 { (lam(h, 0.0) - lam(-h, 0.0)) / (2.0 * h) } else { (lam(0.0, h) - lam(0.0, -h)) / (2.0 * h) };
    let l00 = (lam(h, 0.0) - 2.0 * l + lam(-h, 0.0)) / (h * h);
    let l11 = (lam(0.0, h) - 2.0 * l + lam(0.0, -h)) / (h * h);
    let l01 = (lam(h, h) - lam(h, -h) - lam(-h, h) + lam(-h, -h)) / (4.0 * h * h);
    let (p, r) = (d(0), d(1));
    det3([[l00, l01, p], [l01, l11, r], [p, r, 0.0]])
}

fn main() {
    let tmp = tempfile::tempdir().unwrap();
    let mut verdicts = Vec::new();
    println!("acceptance suite ({} thread(s))", rayon::current_num_threads());

    // 1, 2, and the free half of 5.
    let (free, free_secs) = run_preset("free_gaussian", &tmp.path().join("free"));
    let worst_width = free.widths.iter().map(|(_, m, c)| (m - c).abs() / c).fold(0.0, f64::max);
    report(
        &mut verdicts,
        1,
        "propagator fidelity",
        free.norm_drift < NORM_DRIFT && worst_width < WIDTH_REL && free_secs <= FREE_RUNTIME_S,
        format!(
            "norm drift {:.2e} (< {NORM_DRIFT:.0e}), width rel err {worst_width:.2e} (< {WIDTH_REL:.0e}), runtime {free_secs:.0} s (<= {FREE_RUNTIME_S} s)",
            free.norm_drift
        ),
    );
    let (base, l1) = free.equivariance.unwrap();
    report(
        &mut verdicts,
        2,
        "Bohmian equivariance",
        l1 < EQUIVARIANCE_L1,
        format!("L1 at T = {:.0}: {l1:.4} (< {EQUIVARIANCE_L1}); sampling baseline at t = 0: {base:.4}", free.final_time),
    );

    // 3.
    let geom = Geometry::default();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let fields = test_fields(2);
    let per_field = IDENTITY_STATES.div_ceil(fields.len());
    let r = identity_sweep(&mut rng, &fields, per_field, &geom, false).unwrap();
    let mut flat = 0.0f64;
    for _ in 0..IDENTITY_STATES / 10 {
        let s = sample_state(&mut rng, 2, 2.0, 3.0);
        flat = flat.max(flat_residual(&s, -1.0, &geom).unwrap());
    }
    let secs = start.elapsed().as_secs_f64();
    report(
        &mut verdicts,
        3,
        "Finsler identity suite",
        r.states >= IDENTITY_STATES
            && r.metric_fd < METRIC_FD_REL
            && r.euler < IDENTITY_ABS
            && r.cartan_y < IDENTITY_ABS
            && flat < IDENTITY_ABS
            && r.n_dual < N_DUAL
            && secs <= IDENTITY_RUNTIME_S,
        format!(
            "{} states; metric FD {:.1e}, g(y,y) - Lambda^2 {:.1e}, C.y {:.1e}, flat {:.1e}, N dual {:.1e}; {secs:.1} s",
            r.states, r.metric_fd, r.euler, r.cartan_y, flat, r.n_dual
        ),
    );

    // 4.
    let (_, q) = &test_fields(2)[0];
    let s0 = ExtendedState::new(0.2, &[0.3, -0.4], 1.0, &[0.7, 0.4]);
    let cfg = |form| GeodesicConfig { form, dtau: 1e-2, ..GeodesicConfig::default() };
    let a = run_geodesic(s0.clone(), q, &cfg(Form::Gamma), 100, Provenance::default()).unwrap();
    let b = run_geodesic(s0, q, &cfg(Form::N), 100, Provenance::default()).unwrap();
    let mut dev = 0.0f64;
    let mut disp = 0.0f64;
    for s in 0..a.tracks[0].len(2) {
        let (p, w) = (a.tracks[0].position(s, 2), b.tracks[0].position(s, 2));
        dev = dev.max(p.iter().zip(w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max));
        disp = disp.max(((p[0] - 0.3).powi(2) + (p[1] + 0.4).powi(2)).sqrt());
    }
    report(
        &mut verdicts,
        4,
        "Gamma-form vs N-form geodesics",
        a.tracks[0].len(2) == 101 && b.tracks[0].len(2) == 101 && dev < FORMS_DEVIATION,
        format!("100 RK4 steps, max deviation {dev:.2e} (< {FORMS_DEVIATION:.0e}), displacement {disp:.3}"),
    );

    // 6 (runs reused for 5 and 9).
    let start = Instant::now();
    let slits: Vec<(String, RunSummary)> = ["b0", "be", "bc"]
        .iter()
        .map(|b| {
            let name = format!("double_slit_{b}");
            let (s, _) = run_preset(&name, &tmp.path().join(&name));
            (b.to_string(), s)
        })
        .collect();
    let slit_secs = start.elapsed().as_secs_f64();

    // 5.
    let mut parts = Vec::new();
    let mut ok5 = true;
    for (label, s) in std::iter::once(("free".to_string(), &free)).chain(slits.iter().map(|(b, s)| (b.clone(), s))) {
        let e = s.equivalence.as_ref().unwrap();
        let ok = e.covers_run() && e.max_deviation < EQUIVALENCE_SPACINGS;
        ok5 &= ok;
        parts.push(format!("{label} {:.2e} h to t = {:.1}/{:.1}", e.max_deviation, e.geodesic_end, e.bohmian_end));
    }
    report(&mut verdicts, 5, "Bohmian-geodesic equivalence", ok5, format!("{} (< {EQUIVALENCE_SPACINGS} h over the run)", parts.join("; ")));

    let mut ok6 = slit_secs <= FRINGE_RUNTIME_S;
    let mut parts = Vec::new();
    let mut first_bins = Vec::new();
    for (label, s) in &slits {
        let f = s.fringe.as_ref().unwrap();
        ok6 &= f.pass();
        let (lo, hi) = f.band.unwrap();
        parts.push(format!("{label} {:.2} deg", f.first_order_angle().unwrap_or(f64::NAN)));
        first_bins.push(f.peaks.iter().map(|p| p.bin).collect::<Vec<usize>>());
        if label == "b0" {
            parts.push(format!("band [{lo:.1}, {hi:.1}] deg"));
        }
    }
    let reference = &first_bins[0];
    let same_maxima = first_bins.iter().all(|bins| {
        bins.len() == reference.len() && bins.iter().zip(reference).all(|(a, b)| a.abs_diff(*b) <= 1)
    });
    ok6 &= same_maxima;
    report(
        &mut verdicts,
        6,
        "double-slit fringe angles",
        ok6,
        format!(
            "first-order peaks {}; target 30 +- 5 deg; maxima within one bin across b: {same_maxima}; runtime {slit_secs:.0} s",
            parts.join(", ")
        ),
    );

    // Supplementary detector properties, reported but not counted.
    let dual: Vec<String> =
        slits.iter().map(|(b, s)| format!("{b} {:.3}", s.dual_l1.unwrap_or(f64::NAN))).collect();
    let dual_ok = slits.iter().all(|(_, s)| s.dual_l1.is_some_and(|l| l < DUAL_L1));
    println!("  [{}] property: crossing histogram vs flux L1 {} (< {DUAL_L1})", if dual_ok { "PASS" } else { "FAIL" }, dual.join(", "));
    let central_first = |s: &RunSummary| {
        let f = s.fringe.as_ref().unwrap();
        f.central.zip(f.first_order).map(|(c, o)| (c.height, o.height))
    };
    let (b0, bc) = (central_first(&slits[0].1), central_first(&slits[2].1));
    let flipped = matches!((b0, bc), (Some((c0, o0)), Some((c2, o2))) if (c0 > o0) != (c2 > o2));
    println!(
        "  [{}] property: central vs first-order weight ordering changes from b0 to bc: b0 {:.4?}, bc {:.4?}",
        if flipped { "PASS" } else { "FAIL" },
        b0,
        bc
    );

    // 7.
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut agree = 0;
    let mut energy_true = 0;
    for _ in 0..CHECKER_CASES {
        let value: f64 = rng.gen_range(-3.0..1.0);
        let q = Shifted {
            inner: AnalyticQ::Bump { amplitude: rng.gen_range(-0.5..0.5), center: vec![0.0], drift: vec![0.1], width: 1.0, breathing: 0.2 },
            offset: value,
        };
        let s = loop {
            let s = sample_state(&mut rng, 1, 2.0, 2.0);
            let qp = q.sample(s.t(), s.q()).unwrap().value;
            // Keep away from the Λ = 0 cone where the determinant vanishes.
            if (geom.kinetic(s.qdot()) / (s.y0() * s.y0()) - qp).abs() > 0.05 {
                break s;
            }
        };
        let rep = check_admissibility(&s, &q, &geom).unwrap();
        let qp = q.sample(s.t(), s.q()).unwrap().value;
        let energy = geom.kinetic(s.qdot()) / (s.y0() * s.y0()) + qp < 0.0;
        energy_true += energy as usize;
        let direct = bordered_by_differences(&s, &q, &geom);
        if rep.energy_condition == energy && (rep.axes[0].bordered < 0.0) == (direct < 0.0) {
            agree += 1;
        }
    }
    report(
        &mut verdicts,
        7,
        "admissibility checker",
        agree == CHECKER_CASES,
        format!("{agree}/{CHECKER_CASES} agree with the direct determinant and energy oracles ({energy_true} meet the energy condition)"),
    );

    // 8.
    let g = Arc::new(make_grid(GridSpec::centered(vec![256], vec![96.0], &[0.0], Boundary::Periodic)).unwrap());
    let packet = init_gaussian(g.clone(), &[-20.0], &[0.7], 3.0).unwrap();
    let relax = RelaxConfig { schedule: vec![0.05, 0.01], ..RelaxConfig::default() };
    let v = PotentialSpec::SoftCoulomb { center: vec![20.0], charge: 1.0, softening: 1.0 };
    let start = init_gaussian(g.clone(), &[20.0], &[0.0], 1.5).unwrap();
    let orbital = qtraj_core::relax(start, &v, &relax).unwrap().field;
    let pair = symmetrize(&packet, &orbital).unwrap();
    let cfg = PilotConfig::default();
    let cond = conditional_velocity(&pair, Particle::One, &[20.0], &cfg).unwrap();
    let one = velocity_field(&packet, &cfg).unwrap();
    let mut worst_v = 0.0f64;
    for (i, &x) in g.coords(0).iter().enumerate() {
        if (x + 20.0).abs() < 8.0 && !cond.node_mask[i] {
            worst_v = worst_v.max((cond.velocity[0][i] - one.velocity[0][i]).abs());
        }
    }
    let asym = pair.exchange_asymmetry();
    report(
        &mut verdicts,
        8,
        "two-body construction",
        asym <= EXCHANGE && worst_v <= FACTORIZED_VELOCITY && (pair.norm_squared() - 1.0).abs() < 1e-12,
        format!(
            "exchange {asym:.1e}, factorized velocity {worst_v:.1e}, |S| {:.1e}, literal norm^2 {:.6}, renormalized {:.12}",
            pair.overlap.norm(),
            pair.literal_norm_sq,
            pair.norm_squared()
        ),
    );

    // 9.
    let (again, _) = run_preset("double_slit_be", &tmp.path().join("double_slit_be_again"));
    let first = &slits[1].1;
    let files = ["trajectories/bohmian.tsv", "trajectories/matched.tsv", "trajectories/geodesic.tsv", "detector.tsv", "report.txt"];
    let identical: Vec<bool> =
        files.iter().map(|f| std::fs::read(first.dir.join(f)).unwrap() == std::fs::read(again.dir.join(f)).unwrap()).collect();
    report(
        &mut verdicts,
        9,
        "determinism",
        identical.iter().all(|&b| b),
        format!("{} of {} output files bit-identical across repeated runs", identical.iter().filter(|&&b| b).count(), files.len()),
    );

    let mut unexpected = 0;
    for v in &verdicts {
        match (v.pass, KNOWN_FAILURES.iter().find(|(id, _)| *id == v.id)) {
            (false, Some((_, why))) => println!("criterion {} fails as documented: {why}", v.id),
            (false, None) => unexpected += 1,
            (true, Some(_)) => println!("criterion {} now passes; drop it from the documented failures", v.id),
            (true, None) => {}
        }
    }
    let passed = verdicts.iter().filter(|v| v.pass).count();
    println!("{passed}/{} criteria pass", verdicts.len());
    if unexpected > 0 {
        println!("{unexpected} undocumented failure(s)");
        std::process::exit(1);
    }
}
