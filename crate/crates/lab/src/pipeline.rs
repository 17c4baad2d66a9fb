//! One scenario end to end: initial packet, propagation with observers,
//! analysis and the run directory.

use std::fmt::Write as _;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use log::info;
use qtraj_core::ground::{init_1s_with, RelaxConfig};
use qtraj_core::pilot::VelocitySource;
use qtraj_core::snapshot::write_snapshot;
use qtraj_core::twobody::literal_prefactor;
use qtraj_core::{
    derive_pilot, init_gaussian, make_grid, overlap, sample_initial_positions, BohmianSwarm, Grid, Observer, PilotConfig,
    PilotField, PotentialSpec, Propagator, PropagatorConfig, Provenance, TrajectoryBundle, WaveField,
};
use qtraj_finsler::{ExtendedState, Folded, GeodesicConfig, GeodesicRunner, QField, Shifted, SnapshotSeries};

use crate::analysis::{compare_pictures, equivariance_l1, lobe_count, mirror_asymmetry, Equivalence};
use crate::config::{GeodesicSetup, Scenario};
use crate::detector::{accumulate_flux, CrossingTracker, DetectorRecord};
use crate::error::{LabError, Result};
use crate::fringe::{fringe_analysis, FringeReport};

pub const INCOMPLETE: &str = "INCOMPLETE";

#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    /// Overrides the trajectory seed of the config.
    pub seed: Option<u64>,
    /// Run directory; defaults to `<output.dir or runs>/<name>-<id>`.
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyOverlap {
    pub s_abs: f64,
    /// ‖ψ‖² of the symmetrised product under the literal prefactor.
    pub literal_norm_sq: f64,
    pub relax_energy: f64,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub id: String,
    pub dir: PathBuf,
    pub seed: u64,
    pub threads: usize,
    pub final_time: f64,
    pub norm_drift: f64,
    /// (axis, measured std, closed form) for free propagation.
    pub widths: Vec<(usize, f64, f64)>,
    /// (t = 0 sampling baseline, final) L¹ along the beam axis.
    pub equivariance: Option<(f64, f64)>,
    pub equivalence: Option<Equivalence>,
    pub detector: Option<DetectorRecord>,
    pub fringe: Option<FringeReport>,
    pub count_fringe: Option<FringeReport>,
    /// L¹ between trajectory-crossing and flux distributions.
    pub dual_l1: Option<f64>,
    pub mirror_asymmetry: Option<f64>,
    pub lobes: Option<usize>,
    pub overlap: Option<TwoBodyOverlap>,
    pub bohmian_alive: Option<(usize, usize)>,
    pub report: String,
}

/// Closed-form position spread of a free Gaussian with initial spread σ.
pub fn free_width(sigma: f64, t: f64) -> f64 {
    sigma * (1.0 + (t / (2.0 * sigma * sigma)).powi(2)).sqrt()
}

fn grid_label(g: &Grid) -> String {
    let dims: Vec<String> = g.dims().iter().map(|d| d.to_string()).collect();
    let lens: Vec<String> = g.box_lengths().iter().map(|l| format!("{l}")).collect();
    format!("{} box {} {:?}", dims.join("x"), lens.join("x"), g.boundary())
}

struct Observers<'a> {
    sc: &'a Scenario,
    pilot_cfg: PilotConfig,
    needs_pilot: bool,
    provenance: Provenance,
    seed: u64,
    now: Option<Arc<PilotField>>,
    swarm: Option<BohmianSwarm>,
    initial_positions: Vec<Vec<f64>>,
    tracker: Option<CrossingTracker>,
    detector: Option<DetectorRecord>,
    matched: Option<BohmianSwarm>,
    geodesic_setup: Option<GeodesicSetup>,
    geodesic_launch: Option<ExtendedState>,
    geodesic: Option<GeodesicRunner>,
    snapshot_dir: PathBuf,
    initial_norm: f64,
    stage: &'static str,
}

fn geodesic_config(setup: &GeodesicSetup, potential: &PotentialSpec) -> GeodesicConfig {
    GeodesicConfig {
        dtau: setup.dtau,
        form: setup.form,
        potential: setup.force.then(|| potential.clone()),
        ..GeodesicConfig::default()
    }
}

fn advance_geodesic<O: QField>(
    runner: &mut Option<GeodesicRunner>,
    launch: &mut Option<ExtendedState>,
    oracle: &O,
    cfg: GeodesicConfig,
    provenance: &Provenance,
    t_target: f64,
) -> Result<()> {
    if let Some(start) = launch.take() {
        let prov = provenance.clone();
        *runner = Some(GeodesicRunner::new(start, oracle, cfg, prov).map_err(|e| LabError::stage("geodesic", e))?);
    }
    if let Some(r) = runner.as_mut() {
        r.advance_to(oracle, t_target).map_err(|e| LabError::stage("geodesic", e))?;
    }
    Ok(())
}

impl Observers<'_> {
    fn pilot(&self, field: &WaveField) -> Result<Arc<PilotField>> {
        derive_pilot(field, &self.pilot_cfg).map(Arc::new).map_err(|e| LabError::stage("pilot", e))
    }

    fn snapshot(&self, step: usize, field: &WaveField) -> Result<()> {
        let every = self.sc.snapshot_every;
        if every == 0 || step % every != 0 {
            return Ok(());
        }
        let path = self.snapshot_dir.join(format!("step_{step:06}.snap"));
        write_snapshot(&path, field, 1, &[("scenario", self.sc.id.clone()), ("step", step.to_string())])
            .map_err(|e| LabError::stage("snapshot", e))
    }

    fn start(&mut self, field: &WaveField) -> Result<()> {
        self.initial_norm = field.norm_squared();
        self.stage = "snapshot";
        self.snapshot(0, field)?;
        if !self.needs_pilot {
            return Ok(());
        }
        self.stage = "pilot";
        let pilot = self.pilot(field)?;
        self.stage = "trajectories";
        if let Some(mode) = &self.sc.launch {
            let n = self.sc.config.trajectories.count;
            let positions = sample_initial_positions(field, n, mode, self.seed).map_err(|e| LabError::stage("trajectories", e))?;
            self.initial_positions = positions.clone();
            let every = self.sc.config.trajectories.record_every;
            let swarm = BohmianSwarm::new(positions, pilot.as_ref(), field.time, every, self.provenance.clone())
                .map_err(|e| LabError::stage("trajectories", e))?;
            if self.detector.is_some() {
                self.tracker = Some(CrossingTracker::new(swarm.walkers.len(), self.sc.beam_axis, self.sc.transverse_axis));
            }
            self.swarm = Some(swarm);
        }
        if let Some(g) = &self.geodesic_setup {
            self.stage = "geodesic";
            let q0: Vec<f64> = self.sc.center.iter().zip(&g.launch_offset).map(|(c, o)| c + o).collect();
            if !pilot.inside(&q0) {
                return Err(LabError::stage("geodesic", "launch point lies outside the usable box"));
            }
            let mut v0 = vec![0.0; q0.len()];
            pilot.velocity_into(&q0, &mut v0).map_err(|e| LabError::stage("geodesic", e))?;
            self.geodesic_launch = Some(ExtendedState::new(field.time, &q0, 1.0, &v0));
            let matched = BohmianSwarm::new(vec![q0], pilot.as_ref(), field.time, 1, self.provenance.clone())
                .map_err(|e| LabError::stage("geodesic", e))?;
            self.matched = Some(matched);
        }
        self.now = Some(pilot);
        Ok(())
    }

    fn advance(&mut self, step: usize, field: &WaveField) -> Result<()> {
        self.stage = "snapshot";
        self.snapshot(step, field)?;
        let Some(now) = self.now.take() else { return Ok(()) };
        self.stage = "pilot";
        let next = self.pilot(field)?;
        let dt = next.time - now.time;
        if let Some(swarm) = self.swarm.as_mut() {
            self.stage = "trajectories";
            swarm.step(now.as_ref(), next.as_ref(), dt).map_err(|e| LabError::stage("trajectories", e))?;
            if let (Some(t), Some(d)) = (self.tracker.as_mut(), self.detector.as_mut()) {
                t.update(&swarm.walkers, d);
            }
        }
        if let Some(d) = self.detector.as_mut() {
            self.stage = "detector";
            accumulate_flux(d, &now, self.sc.beam_axis, self.sc.transverse_axis, 0.5 * dt)?;
            accumulate_flux(d, &next, self.sc.beam_axis, self.sc.transverse_axis, 0.5 * dt)?;
        }
        if let Some(m) = self.matched.as_mut() {
            self.stage = "geodesic";
            m.step(now.as_ref(), next.as_ref(), dt).map_err(|e| LabError::stage("geodesic", e))?;
        }
        if let Some(setup) = &self.geodesic_setup {
            self.stage = "geodesic";
            let series = SnapshotSeries::pair(now.clone(), next.clone()).map_err(|e| LabError::stage("geodesic", e))?;
            let cfg = geodesic_config(setup, &self.sc.potential);
            let offset = setup.gauge_offset;
            if setup.force {
                let oracle = Shifted { inner: series, offset };
                advance_geodesic(&mut self.geodesic, &mut self.geodesic_launch, &oracle, cfg, &self.provenance, next.time)?;
            } else {
                let oracle = Shifted { inner: Folded { inner: series, potential: self.sc.potential.clone() }, offset };
                advance_geodesic(&mut self.geodesic, &mut self.geodesic_launch, &oracle, cfg, &self.provenance, next.time)?;
            }
        }
        self.now = Some(next);
        Ok(())
    }
}

impl Observer for Observers<'_> {
    fn begin(&mut self, field: &WaveField) -> std::result::Result<(), String> {
        self.start(field).map_err(|e| e.to_string())
    }

    fn observe(&mut self, step: usize, field: &WaveField) -> std::result::Result<(), String> {
        if step % 100 == 0 {
            info!("step {step}/{}", self.sc.n_steps);
        }
        self.advance(step, field).map_err(|e| e.to_string())
    }
}

fn write_bundle(path: &Path, bundle: &TrajectoryBundle) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    bundle.write(&mut w).map_err(|e| LabError::stage("output", e))
}

pub fn default_run_dir(sc: &Scenario) -> PathBuf {
    let base = sc.config.output.dir.clone().unwrap_or_else(|| "runs".into());
    Path::new(&base).join(format!("{}-{}", sc.config.name, sc.id))
}

/// Runs a scenario; on failure the run directory holds an INCOMPLETE marker
/// naming the failed stage.
pub fn run_scenario(sc: &Scenario, opts: &RunOptions) -> Result<RunSummary> {
    let dir = opts.out.clone().unwrap_or_else(|| default_run_dir(sc));
    fs::create_dir_all(dir.join("snapshots"))?;
    fs::create_dir_all(dir.join("trajectories"))?;
    let marker = dir.join(INCOMPLETE);
    fs::write(&marker, "stage: setup\n")?;
    match execute(sc, opts, &dir) {
        Ok(summary) => {
            fs::remove_file(&marker)?;
            Ok(summary)
        }
        Err(e) => {
            let stage = match &e {
                LabError::Stage { stage, .. } => *stage,
                LabError::Config(_) => "config",
                LabError::Io(_) => "io",
            };
            fs::write(&marker, format!("scenario: {}\nstage: {stage}\nerror: {e}\n", sc.id))?;
            Err(e)
        }
    }
}

fn execute(sc: &Scenario, opts: &RunOptions, dir: &Path) -> Result<RunSummary> {
    let seed = opts.seed.unwrap_or(sc.config.trajectories.seed);
    let threads = rayon::current_num_threads();
    let mut text = sc.config.canonical();
    if let Some(out) = &sc.config.output.dir {
        let _ = writeln!(text, "\n[output]\ndir = {out:?}");
    }
    fs::write(dir.join("config.cfg"), text)?;

    let grid = Arc::new(make_grid(sc.grid.clone()).map_err(|e| LabError::stage("grid", e))?);
    let field = init_gaussian(grid.clone(), &sc.center, &sc.k0, sc.sigma).map_err(|e| LabError::stage("init", e))?;
    let initial = field.clone();
    let prop_cfg = PropagatorConfig { scheme: sc.scheme, dt: sc.dt, ..PropagatorConfig::default() };
    let propagator = Propagator::new(grid.clone(), &sc.potential, prop_cfg).map_err(|e| LabError::stage("propagate", e))?;

    let provenance = Provenance { scenario: sc.id.clone(), seed, grid: grid_label(&grid), notes: vec![("name".into(), sc.config.name.clone())] };
    let detector = sc.detector.as_ref().map(|d| DetectorRecord::new(d, sc.axis_transverse));
    if let Some(d) = &detector {
        let xs = grid.coords(sc.beam_axis);
        if !(d.plane > xs[0] && d.plane < xs[xs.len() - 1]) {
            return Err(LabError::stage("detector", format!("plane {} lies outside the box", d.plane)));
        }
    }
    let k = sc.k0.iter().map(|k| k * k).sum::<f64>().sqrt();
    let mut obs = Observers {
        sc,
        pilot_cfg: PilotConfig::for_wavenumber(k),
        needs_pilot: sc.launch.is_some() || sc.geodesic.is_some() || detector.is_some(),
        provenance: provenance.clone(),
        seed,
        now: None,
        swarm: None,
        initial_positions: Vec::new(),
        tracker: None,
        detector,
        matched: None,
        geodesic_setup: sc.geodesic.clone(),
        geodesic_launch: None,
        geodesic: None,
        snapshot_dir: dir.join("snapshots"),
        initial_norm: 0.0,
        stage: "propagate",
    };
    let result = propagator.run(field, sc.n_steps, &mut [&mut obs]);
    let last = match result {
        Ok(f) => f,
        Err(e) => {
            let stage = obs.stage;
            return Err(LabError::stage(if stage == "propagate" { "propagate" } else { stage }, e));
        }
    };
    let t_end = last.time;
    let norm_drift = (last.norm_squared() - obs.initial_norm).abs();
    let widths = if sc.potential.is_free() {
        (0..grid.ndim()).map(|a| (a, last.position_std(a), free_width(sc.sigma, t_end - initial.time))).collect()
    } else {
        Vec::new()
    };

    // Trajectory outputs.
    let mut equivariance = None;
    let mut bohmian_alive = None;
    if let Some(swarm) = obs.swarm.take() {
        let alive: Vec<&[f64]> = swarm.walkers.iter().filter(|w| w.alive).map(|w| w.q.as_slice()).collect();
        bohmian_alive = Some((alive.len(), swarm.walkers.len()));
        if sc.launch == Some(qtraj_core::LaunchMode::DensitySampled) && !alive.is_empty() {
            let start: Vec<&[f64]> = obs.initial_positions.iter().map(|p| p.as_slice()).collect();
            let base = equivariance_l1(&start, &initial, sc.beam_axis)?;
            let end = equivariance_l1(&alive, &last, sc.beam_axis)?;
            equivariance = Some((base, end));
        }
        let bundle = swarm.finish().map_err(|e| LabError::stage("trajectories", e))?;
        write_bundle(&dir.join("trajectories/bohmian.tsv"), &bundle)?;
    }
    let mut equivalence = None;
    if let Some(m) = obs.matched.take() {
        let matched = m.finish().map_err(|e| LabError::stage("geodesic", e))?;
        write_bundle(&dir.join("trajectories/matched.tsv"), &matched)?;
        if let Some(g) = obs.geodesic.take() {
            let geo = g.finish();
            write_bundle(&dir.join("trajectories/geodesic.tsv"), &geo)?;
            equivalence = Some(compare_pictures(&matched, &geo, grid.min_spacing())?);
        }
    }

    // Detector.
    let mut fringe = None;
    let mut count_fringe = None;
    let mut dual_l1 = None;
    let detector = obs.detector.take();
    if let (Some(d), Some(setup)) = (&detector, &sc.detector) {
        let mut w = BufWriter::new(File::create(dir.join("detector.tsv"))?);
        d.write_tsv(&mut w, &sc.id)?;
        let flux = d.flux_distribution();
        let f = fringe_analysis(d, &flux, setup.wavelength, &setup.d_candidates, setup.prominence, setup.expected_deg, setup.tolerance_deg);
        fringe = Some(f);
        if !d.is_empty() {
            let counts = d.count_distribution();
            count_fringe = Some(fringe_analysis(
                d,
                &counts,
                setup.wavelength,
                &setup.d_candidates,
                setup.prominence,
                setup.expected_deg,
                setup.tolerance_deg,
            ));
            dual_l1 = Some(counts.iter().zip(&flux).map(|(a, b)| (a - b).abs()).sum());
        }
    }

    let (mirror, lobes) = if grid.ndim() >= 2 {
        let m = mirror_asymmetry(&last, sc.transverse_axis, sc.axis_transverse);
        let lobes = match &sc.potential {
            PotentialSpec::SlabSlits { plane, thickness, .. } => {
                Some(lobe_count(&last, sc.beam_axis, sc.transverse_axis, plane + 0.5 * thickness, 0.05))
            }
            _ => None,
        };
        (Some(m), lobes)
    } else {
        (None, None)
    };

    let overlap = match (&sc.scatterer, sc.config.twobody.overlap) {
        (Some((center, a)), true) => {
            let relax = RelaxConfig { schedule: vec![0.05], tol: 1e-9, residual_tol: 1e-4, max_iterations: 20_000, ..RelaxConfig::default() };
            let s1 = init_1s_with(grid.clone(), center, *a, &relax).map_err(|e| LabError::stage("twobody", e))?;
            let s = overlap(&initial, &s1.field).map_err(|e| LabError::stage("twobody", e))?;
            let p = literal_prefactor(s);
            Some(TwoBodyOverlap { s_abs: s.norm(), literal_norm_sq: p * p * (2.0 + 2.0 * s.norm_sqr()), relax_energy: s1.energy })
        }
        _ => None,
    };

    let mut summary = RunSummary {
        id: sc.id.clone(),
        dir: dir.to_path_buf(),
        seed,
        threads,
        final_time: t_end,
        norm_drift,
        widths,
        equivariance,
        equivalence,
        detector,
        fringe,
        count_fringe,
        dual_l1,
        mirror_asymmetry: mirror,
        lobes,
        overlap,
        bohmian_alive,
        report: String::new(),
    };
    summary.report = render_report(sc, &summary);
    fs::write(dir.join("report.txt"), &summary.report)?;
    Ok(summary)
}

pub fn render_report(sc: &Scenario, s: &RunSummary) -> String {
    let mut r = String::new();
    let w = &mut r;
    let _ = writeln!(w, "scenario: {} ({})", sc.config.name, s.id);
    if !sc.config.description.is_empty() {
        let _ = writeln!(w, "description: {}", sc.config.description);
    }
    let _ = writeln!(w, "threads: {}", s.threads);
    let _ = writeln!(w, "seed: {}", s.seed);
    let _ = writeln!(w, "scheme: {} dt = {} steps = {} final t = {:.4}", sc.scheme.name(), sc.dt, sc.n_steps, s.final_time);
    let _ = writeln!(w, "grid: {:?} box {:?} spacing {:.5}", sc.grid.dims, sc.grid.box_lengths, sc.grid.box_lengths[0] / sc.grid.dims[0] as f64);
    let _ = writeln!(w, "packet: sigma {:.4} center {:?} k0 {:?}", sc.sigma, sc.center, sc.k0);
    let _ = writeln!(w, "impact parameter: {} = {:.4} bohr", sc.impact_label, sc.impact);
    if !sc.slits.is_empty() {
        let _ = writeln!(w, "slits (transverse, bohr): {:?}", sc.slits);
    }
    let _ = writeln!(w, "norm drift: {:.3e}", s.norm_drift);
    for (a, m, c) in &s.widths {
        let _ = writeln!(w, "width axis {a}: {m:.6} (free closed form {c:.6}, rel err {:.3e})", (m - c).abs() / c);
    }
    if let Some((alive, total)) = s.bohmian_alive {
        let _ = writeln!(w, "bohmian trajectories alive at end: {alive}/{total}");
    }
    if let Some((b, e)) = s.equivariance {
        let _ = writeln!(w, "equivariance L1 along axis {}: t=0 baseline {b:.4}, final {e:.4}", sc.beam_axis);
    }
    if let (Some(eq), Some(g)) = (&s.equivalence, &sc.geodesic) {
        let _ = writeln!(
            w,
            "geodesic: form {:?}, dtau {}, potential {}, gauge offset {:.4}",
            g.form,
            g.dtau,
            if g.force { "force" } else { "folded" },
            g.gauge_offset
        );
        let _ = writeln!(w, "geodesic vs matched bohmian, max deviation: {:.4e} grid spacings", eq.max_deviation);
        let _ = writeln!(w, "geodesic reached t = {:.4} of {:.4}", eq.geodesic_end, eq.bohmian_end);
        if let Some(t) = &eq.geodesic_terminated {
            let _ = writeln!(w, "geodesic terminated: {t}");
        }
        let _ = writeln!(w, "deviation curve (t, deviation / h):");
        let stride = (eq.curve.len() / 50).max(1);
        for (i, (t, d)) in eq.curve.iter().enumerate() {
            if i % stride == 0 || i + 1 == eq.curve.len() {
                let _ = writeln!(w, "  {t:10.4}  {d:.4e}");
            }
        }
    }
    if let (Some(d), Some(setup)) = (&s.detector, &sc.detector) {
        let _ = writeln!(
            w,
            "detector: plane {:.4} bohr, {:.4} past the reference plane {:.4}; {} bins over [{:.3}, {:.3}]",
            d.plane,
            d.plane - d.reference,
            d.reference,
            d.bins(),
            d.lo,
            d.hi
        );
        let _ = writeln!(w, "detector distances in use elsewhere: 5.82 A in the text, 2 A in the figure caption");
        let _ = writeln!(w, "lambda: {:.4} bohr", setup.wavelength);
        let _ = writeln!(w, "trajectory crossings: {} (outside bins {})", d.crossings(), d.missed);
        if d.is_empty() {
            let _ = writeln!(w, "trajectory record: empty");
        }
        if let Some(l1) = s.dual_l1 {
            let _ = writeln!(w, "crossings vs flux L1: {l1:.4}");
        }
        if let Some(f) = &s.fringe {
            let _ = writeln!(w, "-- flux distribution --");
            let _ = write!(w, "{f}");
        }
        if let Some(f) = &s.count_fringe {
            let _ = writeln!(w, "-- trajectory crossings --");
            let _ = write!(w, "{f}");
        }
    }
    if let Some(m) = s.mirror_asymmetry {
        let _ = writeln!(w, "mirror asymmetry about transverse {:.4}: {m:.3e}", sc.axis_transverse);
    }
    if let Some(l) = s.lobes {
        let _ = writeln!(w, "lobes past the slab: {l}");
    }
    if let Some(o) = &s.overlap {
        let _ = writeln!(w, "1s relaxation energy: {:.6}", o.relax_energy);
        let _ = writeln!(w, "overlap |S| with the 1s orbital: {:.3e}", o.s_abs);
        let _ = writeln!(w, "symmetrised product norm^2 with the literal prefactor: {:.6} (renormalised to 1)", o.literal_norm_sq);
    }
    r
}
