//! Trajectory bundles, Bohmian swarms and initial-position sampling.

use std::io::{BufRead, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::field::WaveField;
use crate::pilot::VelocitySource;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrajectoryKind {
    Bohmian,
    Geodesic,
}

impl TrajectoryKind {
    pub fn name(self) -> &'static str {
        match self {
            TrajectoryKind::Bohmian => "bohmian",
            TrajectoryKind::Geodesic => "geodesic",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Provenance {
    pub scenario: String,
    pub seed: u64,
    pub grid: String,
    pub notes: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Track {
    pub id: usize,
    /// Row-major (sample, axis).
    pub positions: Vec<f64>,
    pub velocities: Vec<f64>,
    /// Row-major (sample, extra column).
    pub extra: Vec<f64>,
    /// Reason the track stopped early, if it did.
    pub terminated: Option<String>,
    /// Set when the track ever sampled a node region.
    pub flagged: bool,
}

impl Track {
    pub fn len(&self, ndim: usize) -> usize {
        self.positions.len() / ndim
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn position(&self, sample: usize, ndim: usize) -> &[f64] {
        &self.positions[sample * ndim..(sample + 1) * ndim]
    }

    pub fn velocity(&self, sample: usize, ndim: usize) -> &[f64] {
        &self.velocities[sample * ndim..(sample + 1) * ndim]
    }
}

/// Timestamped paths sharing one time axis. A terminated track holds a
/// prefix of the samples.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBundle {
    pub kind: TrajectoryKind,
    pub ndim: usize,
    pub times: Vec<f64>,
    pub extra_columns: Vec<String>,
    pub tracks: Vec<Track>,
    pub provenance: Provenance,
}

impl TrajectoryBundle {
    pub fn new(kind: TrajectoryKind, ndim: usize, n_tracks: usize, extra_columns: Vec<String>, provenance: Provenance) -> Self {
        let tracks = (0..n_tracks)
            .map(|id| Track { id, positions: Vec::new(), velocities: Vec::new(), extra: Vec::new(), terminated: None, flagged: false })
            .collect();
        TrajectoryBundle { kind, ndim, times: Vec::new(), extra_columns, tracks, provenance }
    }

    /// Starts a new sample row at time `t`.
    pub fn push_time(&mut self, t: f64) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if !(t > last) {
                return Err(CoreError::InvalidParameter(format!("timestamps must increase ({last} then {t})")));
            }
        }
        self.times.push(t);
        Ok(())
    }

    /// Appends a sample to a track at the latest timestamp.
    pub fn record(&mut self, track: usize, q: &[f64], v: &[f64], extra: &[f64]) {
        let tr = &mut self.tracks[track];
        debug_assert_eq!(tr.positions.len() / self.ndim + 1, self.times.len());
        tr.positions.extend_from_slice(q);
        tr.velocities.extend_from_slice(v);
        tr.extra.extend_from_slice(extra);
    }

    /// Final recorded position of every track that was never terminated.
    pub fn final_positions(&self) -> Vec<&[f64]> {
        let n = self.ndim;
        self.tracks
            .iter()
            .filter(|t| t.terminated.is_none() && t.len(n) == self.times.len() && !t.is_empty())
            .map(|t| t.position(t.len(n) - 1, n))
            .collect()
    }

    /// Plain-text table: a `#` header block with provenance, a column line,
    /// then one row per (track, sample).
    pub fn write(&self, out: &mut impl Write) -> Result<()> {
        let n = self.ndim;
        writeln!(out, "# kind={}", self.kind.name())?;
        writeln!(out, "# scenario={}", self.provenance.scenario)?;
        writeln!(out, "# seed={}", self.provenance.seed)?;
        writeln!(out, "# grid={}", self.provenance.grid)?;
        for (k, v) in &self.provenance.notes {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "# tracks={} samples={}", self.tracks.len(), self.times.len())?;
        let mut cols = vec!["id".to_string(), "t".to_string()];
        cols.extend((0..n).map(|a| format!("q{a}")));
        cols.extend((0..n).map(|a| format!("v{a}")));
        cols.extend(self.extra_columns.iter().cloned());
        cols.push("status".into());
        writeln!(out, "{}", cols.join("\t"))?;
        let ne = self.extra_columns.len();
        for tr in &self.tracks {
            let len = tr.len(n);
            for s in 0..len {
                write!(out, "{}\t{:.12e}", tr.id, self.times[s])?;
                for x in tr.position(s, n).iter().chain(tr.velocity(s, n)).chain(&tr.extra[s * ne..(s + 1) * ne]) {
                    write!(out, "\t{x:.12e}")?;
                }
                let status = if s + 1 == len && tr.terminated.is_some() {
                    "terminated"
                } else if tr.flagged {
                    "flagged"
                } else {
                    "ok"
                };
                writeln!(out, "\t{status}")?;
            }
        }
        Ok(())
    }

    /// Parses the output of [`TrajectoryBundle::write`]. Full-precision
    /// round-trips are not guaranteed (values are printed with 13 digits).
    pub fn read(input: impl BufRead) -> Result<Self> {
        let mut kind = TrajectoryKind::Bohmian;
        let mut provenance = Provenance::default();
        let mut columns: Vec<String> = Vec::new();
        let mut rows: Vec<(usize, f64, Vec<f64>, String)> = Vec::new();
        for line in input.lines() {
            let line = line?;
            if let Some(h) = line.strip_prefix("# ") {
                if let Some((k, v)) = h.split_once('=') {
                    match k {
                        "kind" => {
                            kind = match v {
                                "bohmian" => TrajectoryKind::Bohmian,
                                "geodesic" => TrajectoryKind::Geodesic,
                                other => return Err(CoreError::Format(format!("trajectory kind {other}"))),
                            }
                        }
                        "scenario" => provenance.scenario = v.to_string(),
                        "seed" => provenance.seed = v.parse().map_err(|_| CoreError::Format(format!("seed {v}")))?,
                        "grid" => provenance.grid = v.to_string(),
                        "tracks" => {}
                        _ => provenance.notes.push((k.to_string(), v.to_string())),
                    }
                }
                continue;
            }
            if columns.is_empty() {
                columns = line.split('\t').map(String::from).collect();
                continue;
            }
            let f: Vec<&str> = line.split('\t').collect();
            if f.len() != columns.len() {
                return Err(CoreError::Format(format!("row has {} fields, expected {}", f.len(), columns.len())));
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| CoreError::Format(format!("bad number {s:?}")));
            let id = f[0].parse().map_err(|_| CoreError::Format(format!("bad id {:?}", f[0])))?;
            let t = num(f[1])?;
            let vals = f[2..f.len() - 1].iter().map(|s| num(s)).collect::<Result<Vec<_>>>()?;
            rows.push((id, t, vals, f[f.len() - 1].to_string()));
        }
        let ndim = columns.iter().filter(|c| c.starts_with('q') && c[1..].parse::<usize>().is_ok()).count();
        if ndim == 0 {
            return Err(CoreError::Format("no position columns".into()));
        }
        let extra_columns: Vec<String> = columns[2 + 2 * ndim..columns.len() - 1].to_vec();
        let mut times: Vec<f64> = Vec::new();
        let n_tracks = rows.iter().map(|r| r.0 + 1).max().unwrap_or(0);
        let mut b = TrajectoryBundle::new(kind, ndim, n_tracks, extra_columns, provenance);
        for (id, t, vals, status) in rows {
            let tr = &mut b.tracks[id];
            let s = tr.positions.len() / ndim;
            if s == times.len() {
                times.push(t);
            }
            tr.positions.extend_from_slice(&vals[..ndim]);
            tr.velocities.extend_from_slice(&vals[ndim..2 * ndim]);
            tr.extra.extend_from_slice(&vals[2 * ndim..]);
            match status.as_str() {
                "terminated" => tr.terminated = Some("terminated".into()),
                "flagged" => tr.flagged = true,
                _ => {}
            }
        }
        b.times = times;
        Ok(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Walker {
    pub q: Vec<f64>,
    pub v: Vec<f64>,
    /// Position before the latest step.
    pub prev_q: Vec<f64>,
    pub alive: bool,
    pub flagged: bool,
}

/// Trajectories advanced in lock-step with the field.
#[derive(Debug, Clone)]
pub struct BohmianSwarm {
    pub walkers: Vec<Walker>,
    pub bundle: TrajectoryBundle,
    pub time: f64,
    pub steps: usize,
    /// Record every this many steps (the last step is always recorded by `finish`).
    pub record_every: usize,
}

impl BohmianSwarm {
    pub fn new<P: VelocitySource>(
        positions: Vec<Vec<f64>>,
        pilot: &P,
        t0: f64,
        record_every: usize,
        provenance: Provenance,
    ) -> Result<Self> {
        let n = pilot.dim();
        let mut walkers = Vec::with_capacity(positions.len());
        for q in positions {
            if q.len() != n {
                return Err(CoreError::ShapeMismatch(format!("{}-d start on a {n}-d pilot", q.len())));
            }
            let mut v = vec![0.0; n];
            let alive = pilot.inside(&q);
            let flagged = if alive { pilot.velocity_into(&q, &mut v)? } else { false };
            walkers.push(Walker { prev_q: q.clone(), q, v, alive, flagged });
        }
        let bundle = TrajectoryBundle::new(TrajectoryKind::Bohmian, n, walkers.len(), Vec::new(), provenance);
        let mut swarm = BohmianSwarm { walkers, bundle, time: t0, steps: 0, record_every: record_every.max(1) };
        for (i, w) in swarm.walkers.iter().enumerate() {
            if !w.alive {
                swarm.bundle.tracks[i].terminated = Some("started outside the box".into());
            }
        }
        swarm.record()?;
        Ok(swarm)
    }

    fn record(&mut self) -> Result<()> {
        self.bundle.push_time(self.time)?;
        for (i, w) in self.walkers.iter().enumerate() {
            if w.alive {
                self.bundle.record(i, &w.q, &w.v, &[]);
            }
        }
        Ok(())
    }

    pub fn alive(&self) -> usize {
        self.walkers.iter().filter(|w| w.alive).count()
    }

    /// One RK4 step of dq/dt = v(q, t), with v linear in time between the
    /// two pilots.
    pub fn step<P: VelocitySource>(&mut self, now: &P, next: &P, dt: f64) -> Result<()> {
        let step_index = self.steps + 1;
        let results: Vec<Result<Option<String>>> =
            self.walkers.par_iter_mut().map(|w| advance(w, now, next, dt, step_index)).collect();
        let mut newly_terminated = Vec::new();
        for (i, r) in results.into_iter().enumerate() {
            if let Some(reason) = r? {
                newly_terminated.push((i, reason));
            }
        }
        self.steps += 1;
        self.time += dt;
        let record_now = self.steps % self.record_every == 0;
        if record_now {
            self.record()?;
        }
        for (i, reason) in newly_terminated {
            let tr = &mut self.bundle.tracks[i];
            tr.terminated = Some(reason);
            tr.flagged |= self.walkers[i].flagged;
        }
        for (i, w) in self.walkers.iter().enumerate() {
            self.bundle.tracks[i].flagged |= w.flagged;
        }
        Ok(())
    }

    /// Records the current state if the last step was not on the cadence.
    pub fn finish(mut self) -> Result<TrajectoryBundle> {
        if self.bundle.times.last() != Some(&self.time) {
            self.record()?;
        }
        Ok(self.bundle)
    }
}

fn advance<P: VelocitySource>(w: &mut Walker, now: &P, next: &P, dt: f64, step: usize) -> Result<Option<String>> {
    w.prev_q.copy_from_slice(&w.q);
    if !w.alive {
        return Ok(None);
    }
    let n = w.q.len();
    let mut flagged = false;
    let mut eval = |p: &[f64], s: f64, out: &mut [f64]| -> Result<bool> {
        if !(now.inside(p) && next.inside(p)) {
            return Ok(false);
        }
        let mut a = [0.0; 8];
        let mut b = [0.0; 8];
        flagged |= now.velocity_into(p, &mut a[..n])?;
        flagged |= next.velocity_into(p, &mut b[..n])?;
        for k in 0..n {
            out[k] = (1.0 - s) * a[k] + s * b[k];
            if !out[k].is_finite() {
                return Err(CoreError::NonFinite { step, detail: format!("velocity at {p:?}") });
            }
        }
        Ok(true)
    };
    let mut k1 = [0.0; 8];
    let mut k2 = [0.0; 8];
    let mut k3 = [0.0; 8];
    let mut k4 = [0.0; 8];
    let mut tmp = [0.0; 8];
    let q = w.q.clone();
    let left = |w: &mut Walker| {
        w.alive = false;
        Ok(Some("left the box".to_string()))
    };
    if !eval(&q, 0.0, &mut k1)? {
        return left(w);
    }
    for k in 0..n {
        tmp[k] = q[k] + 0.5 * dt * k1[k];
    }
    if !eval(&tmp[..n], 0.5, &mut k2)? {
        return left(w);
    }
    for k in 0..n {
        tmp[k] = q[k] + 0.5 * dt * k2[k];
    }
    if !eval(&tmp[..n], 0.5, &mut k3)? {
        return left(w);
    }
    for k in 0..n {
        tmp[k] = q[k] + dt * k3[k];
    }
    if !eval(&tmp[..n], 1.0, &mut k4)? {
        return left(w);
    }
    for k in 0..n {
        w.q[k] = q[k] + dt / 6.0 * (k1[k] + 2.0 * k2[k] + 2.0 * k3[k] + k4[k]);
    }
    if !eval(&w.q.clone(), 1.0, &mut tmp)? {
        w.q.copy_from_slice(&q);
        return left(w);
    }
    w.v.copy_from_slice(&tmp[..n]);
    w.flagged |= flagged;
    Ok(None)
}

/// Synchronous RK4 step of a whole swarm.
pub fn step_bohmian<P: VelocitySource>(swarm: &mut BohmianSwarm, now: &P, next: &P, dt: f64) -> Result<()> {
    swarm.step(now, next, dt)
}

#[derive(Debug, Clone, PartialEq)]
pub enum LaunchMode {
    /// i.i.d. draws from |ψ|² (node chosen by inverse CDF, then uniform within its cell).
    DensitySampled,
    /// Equispaced points on an axis-aligned segment of the given length,
    /// centred on `center` (or on ⟨q⟩ when absent).
    RegularGridLine { axis: usize, length: f64, center: Option<Vec<f64>> },
}

pub fn sample_initial_positions(field: &WaveField, n: usize, mode: &LaunchMode, seed: u64) -> Result<Vec<Vec<f64>>> {
    if n == 0 {
        return Err(CoreError::InvalidParameter("at least one trajectory is required".into()));
    }
    let g = &field.grid;
    let nd = g.ndim();
    match mode {
        LaunchMode::DensitySampled => {
            let mut cdf = Vec::with_capacity(g.len());
            let mut acc = 0.0;
            for z in &field.values {
                acc += z.norm_sqr();
                cdf.push(acc);
            }
            if !(acc > 0.0 && acc.is_finite()) {
                return Err(CoreError::DegenerateDensity(format!("total density {acc}")));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut idx = vec![0; nd];
            let mut out = Vec::with_capacity(n);
            for _ in 0..n {
                let u: f64 = rng.gen::<f64>() * acc;
                let node = cdf.partition_point(|&c| c <= u).min(g.len() - 1);
                g.unravel(node, &mut idx);
                let mut p = Vec::with_capacity(nd);
                for a in 0..nd {
                    let h = g.spacing()[a];
                    let mut x = g.coords(a)[idx[a]] + (rng.gen::<f64>() - 0.5) * h;
                    if !g.boundary().is_periodic() {
                        let lo = g.coords(a)[0];
                        let hi = g.coords(a)[g.dims()[a] - 1];
                        x = x.clamp(lo, hi);
                    }
                    p.push(x);
                }
                out.push(p);
            }
            Ok(out)
        }
        LaunchMode::RegularGridLine { axis, length, center } => {
            if *axis >= nd {
                return Err(CoreError::ShapeMismatch(format!("axis {axis} on a {nd}-d grid")));
            }
            let c: Vec<f64> = match center {
                Some(c) if c.len() == nd => c.clone(),
                Some(c) => return Err(CoreError::ShapeMismatch(format!("{}-d line center", c.len()))),
                None => {
                    if !(field.norm_squared() > 0.0) {
                        return Err(CoreError::DegenerateDensity("empty field".into()));
                    }
                    (0..nd).map(|a| field.mean_position(a)).collect()
                }
            };
            if n == 1 {
                return Ok(vec![c]);
            }
            let spacing = length / (n - 1) as f64;
            Ok((0..n)
                .map(|i| {
                    let mut p = c.clone();
                    p[*axis] = c[*axis] - 0.5 * length + i as f64 * spacing;
                    p
                })
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{init_gaussian, nearest_grid_wavenumber, plane_wave};
    use crate::grid::{make_grid, Boundary, GridSpec};
    use crate::pilot::{derive_pilot, PilotConfig};
    use std::sync::Arc;

    #[test]
    fn plane_wave_paths_are_straight() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![64, 64], vec![40.0, 40.0], &[0.0, 0.0], Boundary::Periodic)).unwrap());
        let k = [nearest_grid_wavenumber(&g, 0, 0.8), nearest_grid_wavenumber(&g, 1, -0.3)];
        let p = derive_pilot(&plane_wave(g, &k), &PilotConfig::default()).unwrap();
        let starts = vec![vec![0.0, 0.0], vec![3.3, -7.1]];
        let mut s = BohmianSwarm::new(starts.clone(), &p, 0.0, 1, Provenance::default()).unwrap();
        for _ in 0..50 {
            s.step(&p, &p, 0.1).unwrap();
        }
        for (w, q0) in s.walkers.iter().zip(&starts) {
            for a in 0..2 {
                assert!((w.q[a] - (q0[a] + k[a] * 5.0)).abs() < 1e-9);
            }
        }
        let b = s.finish().unwrap();
        assert_eq!(b.times.len(), 51);
        assert_eq!(b.final_positions().len(), 2);
    }

    #[test]
    fn regular_line() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![64, 64], vec![40.0, 40.0], &[0.0, 0.0], Boundary::Periodic)).unwrap());
        let f = init_gaussian(g, &[1.0, 2.0], &[0.0, 0.0], 4.0).unwrap();
        let mode = LaunchMode::RegularGridLine { axis: 1, length: 9.8, center: None };
        let pts = sample_initial_positions(&f, 50, &mode, 0).unwrap();
        assert_eq!(pts.len(), 50);
        assert!((pts[1][1] - pts[0][1] - 0.2).abs() < 1e-12);
        assert!(pts.iter().all(|p| (p[0] - 1.0).abs() < 1e-3));
        let one = sample_initial_positions(&f, 1, &mode, 0).unwrap();
        assert!((one[0][0] - 1.0).abs() < 1e-3 && (one[0][1] - 2.0).abs() < 1e-3);
        assert!(sample_initial_positions(&f, 0, &mode, 0).is_err());
    }

    #[test]
    fn density_sampling_is_seeded() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![256], vec![64.0], &[0.0], Boundary::Periodic)).unwrap());
        let f = init_gaussian(g, &[3.0], &[0.0], 5.0).unwrap();
        let a = sample_initial_positions(&f, 1000, &LaunchMode::DensitySampled, 7).unwrap();
        let b = sample_initial_positions(&f, 1000, &LaunchMode::DensitySampled, 7).unwrap();
        let c = sample_initial_positions(&f, 1000, &LaunchMode::DensitySampled, 8).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn bundle_text_round_trip() {
        let mut b = TrajectoryBundle::new(TrajectoryKind::Geodesic, 2, 2, vec!["y0".into()], Provenance {
            scenario: "abc".into(),
            seed: 3,
            grid: "64x64".into(),
            notes: vec![("nodes".into(), "clamped".into())],
        });
        for (s, t) in [0.0, 0.5, 1.0].iter().enumerate() {
            b.push_time(*t).unwrap();
            b.record(0, &[s as f64, 1.0], &[0.5, 0.25], &[1.0]);
            if s < 2 {
                b.record(1, &[-1.0, s as f64], &[0.0, 1.0], &[1.0]);
            }
        }
        b.tracks[1].terminated = Some("left".into());
        assert!(b.push_time(1.0).is_err());
        let mut text = Vec::new();
        b.write(&mut text).unwrap();
        let r = TrajectoryBundle::read(std::io::Cursor::new(text)).unwrap();
        assert_eq!(r.times, b.times);
        assert_eq!(r.tracks[0].positions, b.tracks[0].positions);
        assert_eq!(r.tracks[1].len(2), 2);
        assert!(r.tracks[1].terminated.is_some());
        assert_eq!(r.extra_columns, vec!["y0".to_string()]);
        assert_eq!(r.provenance.scenario, "abc");
    }
}
