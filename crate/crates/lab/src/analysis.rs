//! Post-run comparisons: geodesic vs Bohmian paths, equivariance, and simple
//! density shape measures.

use qtraj_core::stats::{l1_against_marginal, Marginal};
use qtraj_core::{TrajectoryBundle, WaveField};

use crate::error::{LabError, Result};
use crate::fringe::find_peaks;

#[derive(Debug, Clone, PartialEq)]
pub struct Equivalence {
    /// (t, |q_geo − q_bohm| / h) at every Bohmian sample the geodesic reached.
    pub curve: Vec<(f64, f64)>,
    pub max_deviation: f64,
    /// Time the geodesic covered, against the Bohmian span.
    pub geodesic_end: f64,
    pub bohmian_end: f64,
    pub geodesic_terminated: Option<String>,
}

impl Equivalence {
    pub fn covers_run(&self) -> bool {
        self.geodesic_terminated.is_none() && self.geodesic_end >= self.bohmian_end - 1e-9
    }
}

fn interpolate_track(bundle: &TrajectoryBundle, t: f64) -> Option<Vec<f64>> {
    let n = bundle.ndim;
    let tr = bundle.tracks.first()?;
    let len = tr.len(n);
    if len == 0 {
        return None;
    }
    let times = &bundle.times[..len];
    let tol = 1e-9 * t.abs().max(1.0);
    let k = times.partition_point(|&s| s <= t);
    if k == 0 {
        return ((times[0] - t).abs() <= tol).then(|| tr.position(0, n).to_vec());
    }
    if k == len {
        return ((t - times[len - 1]).abs() <= tol).then(|| tr.position(len - 1, n).to_vec());
    }
    let (t0, t1) = (times[k - 1], times[k]);
    let f = (t - t0) / (t1 - t0);
    let (a, b) = (tr.position(k - 1, n), tr.position(k, n));
    Some(a.iter().zip(b).map(|(x, y)| x + f * (y - x)).collect())
}

/// Deviation of the first geodesic track from the first Bohmian track, in
/// units of `h`, sampled at the Bohmian times.
pub fn compare_pictures(bohmian: &TrajectoryBundle, geodesic: &TrajectoryBundle, h: f64) -> Result<Equivalence> {
    if bohmian.provenance.scenario != geodesic.provenance.scenario {
        return Err(LabError::stage(
            "compare",
            format!("bundles come from different scenarios ({} vs {})", bohmian.provenance.scenario, geodesic.provenance.scenario),
        ));
    }
    if bohmian.ndim != geodesic.ndim || bohmian.tracks.is_empty() || geodesic.tracks.is_empty() {
        return Err(LabError::stage("compare", "bundles do not hold matching tracks"));
    }
    let n = bohmian.ndim;
    let b = &bohmian.tracks[0];
    let g_len = geodesic.tracks[0].len(n);
    let geodesic_end = if g_len > 0 { geodesic.times[g_len - 1] } else { f64::NEG_INFINITY };
    let mut curve = Vec::new();
    for s in 0..b.len(n) {
        let t = bohmian.times[s];
        let Some(qg) = interpolate_track(geodesic, t) else { break };
        let d = qg.iter().zip(b.position(s, n)).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
        curve.push((t, d / h));
    }
    let max_deviation = curve.iter().map(|c| c.1).fold(0.0, f64::max);
    let bohmian_end = if b.len(n) > 0 { bohmian.times[b.len(n) - 1] } else { 0.0 };
    Ok(Equivalence { curve, max_deviation, geodesic_end, bohmian_end, geodesic_terminated: geodesic.tracks[0].terminated.clone() })
}

/// L¹ between the histogram of positions along `axis` and the marginal of |ψ|².
pub fn equivariance_l1(positions: &[&[f64]], field: &WaveField, axis: usize) -> Result<f64> {
    let samples: Vec<f64> = positions.iter().map(|p| p[axis]).collect();
    let m = Marginal::of(field, axis).map_err(|e| LabError::stage("equivariance", e))?;
    Ok(l1_against_marginal(&samples, &m).map_err(|e| LabError::stage("equivariance", e))?.l1)
}

/// Σ|ρ(q) − ρ(mirror q)| / Σρ for the reflection y → 2c − y on `axis`.
pub fn mirror_asymmetry(field: &WaveField, axis: usize, c: f64) -> f64 {
    let g = &field.grid;
    let rho = field.density();
    let ys = g.coords(axis);
    let h = g.spacing()[axis];
    let stride = g.strides()[axis];
    let n = g.dims()[axis];
    let mut idx = vec![0; g.ndim()];
    let (mut diff, mut total) = (0.0, 0.0);
    for flat in 0..g.len() {
        g.unravel(flat, &mut idx);
        let i = idx[axis];
        let r = (2.0 * c - ys[i] - ys[0]) / h;
        let lo = r.floor();
        let f = r - lo;
        let value_at = |j: f64| -> f64 {
            if j < 0.0 || j >= n as f64 {
                0.0
            } else {
                let j = j as usize;
                rho[flat - i * stride + j * stride]
            }
        };
        let mirrored = (1.0 - f) * value_at(lo) + if f > 0.0 { f * value_at(lo + 1.0) } else { 0.0 };
        diff += (rho[flat] - mirrored).abs();
        total += rho[flat];
    }
    if total > 0.0 {
        diff / total
    } else {
        0.0
    }
}

/// Density integrated over beam coordinates ≥ `from`, as a function of the
/// transverse coordinate.
pub fn transverse_profile(field: &WaveField, beam_axis: usize, transverse_axis: usize, from: f64) -> Vec<f64> {
    let g = &field.grid;
    let rho = field.density();
    let mut out = vec![0.0; g.dims()[transverse_axis]];
    let mut idx = vec![0; g.ndim()];
    for (flat, r) in rho.iter().enumerate() {
        g.unravel(flat, &mut idx);
        if g.coords(beam_axis)[idx[beam_axis]] >= from {
            out[idx[transverse_axis]] += r;
        }
    }
    out
}

/// Number of maxima in the transverse profile past `from` with prominence
/// at least `threshold` of the largest.
pub fn lobe_count(field: &WaveField, beam_axis: usize, transverse_axis: usize, from: f64, threshold: f64) -> usize {
    find_peaks(&transverse_profile(field, beam_axis, transverse_axis, from), threshold).len()
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use qtraj_core::trajectory::Provenance;
    use qtraj_core::{init_gaussian, make_grid, Boundary, GridSpec, TrajectoryKind};

    use super::*;

    fn bundle(kind: TrajectoryKind, times: &[f64], xs: &[f64], scenario: &str) -> TrajectoryBundle {
        let prov = Provenance { scenario: scenario.into(), ..Default::default() };
        let mut b = TrajectoryBundle::new(kind, 1, 1, Vec::new(), prov);
        for (&t, &x) in times.iter().zip(xs) {
            b.push_time(t).unwrap();
            b.record(0, &[x], &[0.0], &[]);
        }
        b
    }

    #[test]
    fn identical_paths_have_zero_deviation() {
        let a = bundle(TrajectoryKind::Bohmian, &[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], "s");
        let g = bundle(TrajectoryKind::Geodesic, &[0.0, 0.5, 1.0, 1.5, 2.0], &[0.0, 0.5, 1.0, 1.5, 2.0], "s");
        let e = compare_pictures(&a, &g, 0.1).unwrap();
        assert_eq!(e.curve.len(), 3);
        assert!(e.max_deviation < 1e-12);
        assert!(e.covers_run());
    }

    #[test]
    fn short_geodesic_is_reported() {
        let a = bundle(TrajectoryKind::Bohmian, &[0.0, 1.0, 2.0], &[0.0, 1.0, 2.0], "s");
        let g = bundle(TrajectoryKind::Geodesic, &[0.0, 1.0], &[0.0, 1.2], "s");
        let e = compare_pictures(&a, &g, 0.1).unwrap();
        assert_eq!(e.curve.len(), 2);
        assert!((e.max_deviation - 2.0).abs() < 1e-9);
        assert!(!e.covers_run());
    }

    #[test]
    fn mismatched_scenarios_are_rejected() {
        let a = bundle(TrajectoryKind::Bohmian, &[0.0], &[0.0], "a");
        let g = bundle(TrajectoryKind::Geodesic, &[0.0], &[0.0], "b");
        assert!(compare_pictures(&a, &g, 1.0).is_err());
    }

    #[test]
    fn centred_gaussian_is_mirror_symmetric() {
        let grid = Arc::new(make_grid(GridSpec::centered(vec![32, 32], vec![20.0, 20.0], &[0.0, 0.0], Boundary::Periodic)).unwrap());
        let f = init_gaussian(grid.clone(), &[1.0, 0.0], &[0.5, 0.0], 2.5).unwrap();
        assert!(mirror_asymmetry(&f, 1, 0.0) < 1e-3);
        let off = init_gaussian(grid, &[0.0, 3.0], &[0.5, 0.0], 2.5).unwrap();
        assert!(mirror_asymmetry(&off, 1, 0.0) > 0.5);
        assert_eq!(lobe_count(&off, 0, 1, -100.0, 0.05), 1);
    }
}
