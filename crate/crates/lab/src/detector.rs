//! Screen records: first crossings of trajectories and time-integrated
//! probability flux through a plane normal to the beam.

use std::io::{BufRead, Write};

use qtraj_core::pilot::PilotField;
use qtraj_core::trajectory::Walker;
use qtraj_core::TrajectoryBundle;

use crate::config::DetectorSetup;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRecord {
    pub plane: f64,
    pub reference: f64,
    pub axis_transverse: f64,
    pub lo: f64,
    pub hi: f64,
    /// Trajectory first crossings per bin.
    pub counts: Vec<u64>,
    /// ∫ j·n dt per bin.
    pub flux: Vec<f64>,
    /// Crossings that fell outside the binned range.
    pub missed: u64,
}

impl DetectorRecord {
    pub fn new(setup: &DetectorSetup, axis_transverse: f64) -> Self {
        DetectorRecord {
            plane: setup.plane,
            reference: setup.reference,
            axis_transverse,
            lo: setup.lo,
            hi: setup.hi,
            counts: vec![0; setup.bins],
            flux: vec![0.0; setup.bins],
            missed: 0,
        }
    }

    pub fn bins(&self) -> usize {
        self.counts.len()
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.bins() as f64
    }

    pub fn center(&self, bin: usize) -> f64 {
        self.lo + (bin as f64 + 0.5) * self.bin_width()
    }

    /// Geometric angle of a bin centre seen from the reference plane.
    pub fn angle_deg(&self, bin: usize) -> f64 {
        (self.center(bin) - self.axis_transverse).atan2(self.plane - self.reference).to_degrees()
    }

    pub fn crossings(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.crossings() == 0
    }

    pub fn add_crossing(&mut self, y: f64) {
        let b = ((y - self.lo) / self.bin_width()).floor();
        if b >= 0.0 && (b as usize) < self.bins() {
            self.counts[b as usize] += 1;
        } else {
            self.missed += 1;
        }
    }

    /// Adds `weight` spread uniformly over [a, b] to the flux bins.
    fn deposit(&mut self, a: f64, b: f64, weight: f64) {
        let w = self.bin_width();
        let first = ((a - self.lo) / w).floor().max(0.0) as usize;
        let last = (((b - self.lo) / w).floor() as isize).min(self.bins() as isize - 1);
        if last < 0 {
            return;
        }
        for bin in first..=last as usize {
            let (lo, hi) = (self.lo + bin as f64 * w, self.lo + (bin + 1) as f64 * w);
            let overlap = hi.min(b) - lo.max(a);
            if overlap > 0.0 {
                self.flux[bin] += weight * overlap / (b - a);
            }
        }
    }

    /// Counts normalised to unit sum (zeros when empty).
    pub fn count_distribution(&self) -> Vec<f64> {
        let total = self.crossings() as f64;
        self.counts.iter().map(|&c| if total > 0.0 { c as f64 / total } else { 0.0 }).collect()
    }

    /// Flux normalised to unit sum (zeros when there is no net flux).
    pub fn flux_distribution(&self) -> Vec<f64> {
        let total: f64 = self.flux.iter().sum();
        self.flux.iter().map(|&f| if total > 0.0 { f / total } else { 0.0 }).collect()
    }

    /// Bin-wise sum; the order of merging does not matter.
    pub fn merge(&mut self, other: &DetectorRecord) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        for (a, b) in self.flux.iter_mut().zip(&other.flux) {
            *a += b;
        }
        self.missed += other.missed;
    }

    pub fn write_tsv(&self, out: &mut impl Write, scenario: &str) -> Result<()> {
        writeln!(out, "# scenario={scenario}")?;
        writeln!(
            out,
            "# plane={:?} reference={:?} axis={:?} lo={:?} hi={:?} missed={}",
            self.plane, self.reference, self.axis_transverse, self.lo, self.hi, self.missed
        )?;
        writeln!(out, "bin\tcenter\tangle_deg\tcounts\tflux")?;
        for b in 0..self.bins() {
            writeln!(out, "{b}\t{:.10e}\t{:.6}\t{}\t{:.10e}", self.center(b), self.angle_deg(b), self.counts[b], self.flux[b])?;
        }
        Ok(())
    }

    pub fn read_tsv(input: impl BufRead) -> Result<(Self, String)> {
        let bad = |m: &str| LabError::Stage { stage: "detector", message: m.to_string() };
        let mut lines = input.lines();
        let mut next = || -> Result<String> { lines.next().ok_or_else(|| bad("truncated detector file"))?.map_err(LabError::from) };
        let scenario = next()?.strip_prefix("# scenario=").ok_or_else(|| bad("missing scenario line"))?.to_string();
        let geom = next()?;
        let field = |key: &str| -> Result<f64> {
            geom.split_whitespace()
                .find_map(|kv| kv.strip_prefix(&format!("{key}=")).map(str::to_string))
                .ok_or_else(|| bad(&format!("missing {key}")))?
                .parse::<f64>()
                .map_err(|e| bad(&e.to_string()))
        };
        let mut rec = DetectorRecord {
            plane: field("plane")?,
            reference: field("reference")?,
            axis_transverse: field("axis")?,
            lo: field("lo")?,
            hi: field("hi")?,
            counts: Vec::new(),
            flux: Vec::new(),
            missed: field("missed")? as u64,
        };
        next()?;
        for line in lines {
            let line = line?;
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 5 {
                return Err(bad("detector rows need five columns"));
            }
            rec.counts.push(cols[3].parse().map_err(|_| bad("bad count"))?);
            rec.flux.push(cols[4].parse().map_err(|_| bad("bad flux"))?);
        }
        if rec.counts.is_empty() {
            return Err(bad("no detector rows"));
        }
        Ok((rec, scenario))
    }
}

/// Bins first crossings of walkers moving through the plane in +beam direction.
#[derive(Debug, Clone)]
pub struct CrossingTracker {
    pub beam_axis: usize,
    pub transverse_axis: usize,
    crossed: Vec<bool>,
}

fn crossing_point(a: &[f64], b: &[f64], beam: usize, transverse: usize, plane: f64) -> Option<f64> {
    if a[beam] < plane && b[beam] >= plane {
        let f = (plane - a[beam]) / (b[beam] - a[beam]);
        Some(a[transverse] + f * (b[transverse] - a[transverse]))
    } else {
        None
    }
}

impl CrossingTracker {
    pub fn new(n: usize, beam_axis: usize, transverse_axis: usize) -> Self {
        CrossingTracker { beam_axis, transverse_axis, crossed: vec![false; n] }
    }

    pub fn update(&mut self, walkers: &[Walker], record: &mut DetectorRecord) {
        for (w, done) in walkers.iter().zip(self.crossed.iter_mut()) {
            if *done {
                continue;
            }
            if let Some(y) = crossing_point(&w.prev_q, &w.q, self.beam_axis, self.transverse_axis, record.plane) {
                record.add_crossing(y);
                *done = true;
            }
        }
    }
}

/// First crossings read off recorded bundle samples.
pub fn accumulate_bundle(record: &mut DetectorRecord, bundle: &TrajectoryBundle, beam_axis: usize, transverse_axis: usize) {
    let n = bundle.ndim;
    for tr in &bundle.tracks {
        for s in 1..tr.len(n) {
            if let Some(y) = crossing_point(tr.position(s - 1, n), tr.position(s, n), beam_axis, transverse_axis, record.plane) {
                record.add_crossing(y);
                break;
            }
        }
    }
}

/// Adds dt·∫ j·n over the plane, with j = A²v sampled linearly between the
/// two node layers that bracket it.
pub fn accumulate_flux(record: &mut DetectorRecord, pilot: &PilotField, beam_axis: usize, transverse_axis: usize, dt: f64) -> Result<()> {
    let g = &pilot.grid;
    let xs = g.coords(beam_axis);
    let h = g.spacing()[beam_axis];
    let i = ((record.plane - xs[0]) / h).floor();
    if !(i >= 0.0 && (i as usize) + 1 < xs.len()) {
        return Err(LabError::Stage { stage: "detector", message: format!("plane {} lies outside the box", record.plane) });
    }
    let i = i as usize;
    let f = (record.plane - xs[i]) / h;
    let ht = g.spacing()[transverse_axis];
    let other: f64 = (0..g.ndim()).filter(|&a| a != beam_axis && a != transverse_axis).map(|a| g.spacing()[a]).product();
    let mut idx = vec![0; g.ndim()];
    for flat in 0..g.len() {
        g.unravel(flat, &mut idx);
        let w = if idx[beam_axis] == i {
            1.0 - f
        } else if idx[beam_axis] == i + 1 {
            f
        } else {
            continue;
        };
        let a = pilot.amplitude[flat];
        let j = a * a * pilot.velocity[beam_axis][flat];
        let y = g.coords(transverse_axis)[idx[transverse_axis]];
        record.deposit(y - 0.5 * ht, y + 0.5 * ht, w * j * ht * other * dt);
    }
    Ok(())
}
