//! Admissibility of Λ at states drawn from a scenario's initial packet.

use std::fmt;
use std::sync::Arc;

use qtraj_core::pilot::VelocitySource;
use qtraj_core::{derive_pilot, init_gaussian, make_grid, sample_initial_positions, LaunchMode, PilotConfig, Propagator, PropagatorConfig};
use qtraj_finsler::{check_admissibility, ExtendedState, Folded, Geometry, Shifted, SnapshotSeries};

use crate::config::Scenario;
use crate::error::{LabError, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct FinslerCheck {
    pub states: usize,
    /// States where Λ could not be evaluated (node regions, box edge).
    pub skipped: usize,
    pub energy_condition: usize,
    pub convex: usize,
    pub positive: usize,
    pub positive_with_gauge: usize,
    pub gauge_offset: f64,
    pub max_homogeneity: f64,
}

impl fmt::Display for FinslerCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.states;
        writeln!(f, "states checked: {n} (skipped {})", self.skipped)?;
        writeln!(f, "energy condition T/y0^2 + Q' < 0: {}/{n}", self.energy_condition)?;
        writeln!(f, "bordered determinants negative on every axis: {}/{n}", self.convex)?;
        writeln!(f, "Lambda > 0: {}/{n}", self.positive)?;
        writeln!(f, "Lambda > 0 with gauge offset {:.4}: {}/{n}", self.gauge_offset, self.positive_with_gauge)?;
        write!(f, "max homogeneity residual: {:.3e}", self.max_homogeneity)
    }
}

/// Draws `n` states from |ψ(0)|² with q̇ = v^Ψ and y⁰ spread over [0.9, 1.1],
/// and evaluates the admissibility checks for Q' = Q + V.
pub fn check_scenario(sc: &Scenario, n: usize, seed: u64) -> Result<FinslerCheck> {
    let stage = |e: &dyn fmt::Display| LabError::stage("check-finsler", e);
    let grid = Arc::new(make_grid(sc.grid.clone()).map_err(|e| stage(&e))?);
    let field = init_gaussian(grid.clone(), &sc.center, &sc.k0, sc.sigma).map_err(|e| stage(&e))?;
    let prop = Propagator::new(grid, &sc.potential, PropagatorConfig { scheme: sc.scheme, dt: sc.dt, ..PropagatorConfig::default() })
        .map_err(|e| stage(&e))?;
    let next = prop.step(&field).map_err(|e| stage(&e))?;
    let k = sc.k0.iter().map(|k| k * k).sum::<f64>().sqrt();
    let cfg = PilotConfig::for_wavenumber(k);
    let p0 = Arc::new(derive_pilot(&field, &cfg).map_err(|e| stage(&e))?);
    let p1 = Arc::new(derive_pilot(&next, &cfg).map_err(|e| stage(&e))?);
    let series = SnapshotSeries::pair(p0.clone(), p1).map_err(|e| stage(&e))?;
    let raw = Folded { inner: series, potential: sc.potential.clone() };
    let gauge_offset = sc.geodesic.as_ref().map(|g| g.gauge_offset).unwrap_or(-(2.0 * k * k + 1.0));
    let shifted = Shifted { inner: raw.clone(), offset: gauge_offset };
    let geom = Geometry::default();

    let positions = sample_initial_positions(&field, n, &LaunchMode::DensitySampled, seed).map_err(|e| stage(&e))?;
    let mut out = FinslerCheck {
        states: 0,
        skipped: 0,
        energy_condition: 0,
        convex: 0,
        positive: 0,
        positive_with_gauge: 0,
        gauge_offset,
        max_homogeneity: 0.0,
    };
    let mut v = vec![0.0; sc.k0.len()];
    for (i, q) in positions.iter().enumerate() {
        if !p0.inside(q) {
            out.skipped += 1;
            continue;
        }
        p0.velocity_into(q, &mut v).map_err(|e| stage(&e))?;
        let y0 = 0.9 + 0.2 * (i as f64 + 0.5) / n as f64;
        let qdot: Vec<f64> = v.iter().map(|x| x * y0).collect();
        let state = ExtendedState::new(field.time, q, y0, &qdot);
        let (Ok(r), Ok(g)) = (check_admissibility(&state, &raw, &geom), check_admissibility(&state, &shifted, &geom)) else {
            out.skipped += 1;
            continue;
        };
        out.states += 1;
        out.energy_condition += r.energy_condition as usize;
        out.convex += r.convex() as usize;
        out.positive += r.positive as usize;
        out.positive_with_gauge += g.positive as usize;
        out.max_homogeneity = out.max_homogeneity.max(r.homogeneity_residual);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::ScenarioConfig;

    #[test]
    fn gauge_offset_makes_lambda_positive() {
        let text = r#"
name = "check"
[grid]
dims = [48, 48]
box = [40.0, 40.0]
boundary = "periodic"
[initial]
sigma = 3.0
center = [0.0, 0.0]
wavenumber = 0.5
[run]
n_steps = 1
"#;
        let sc = ScenarioConfig::parse(text).unwrap().resolve().unwrap();
        let c = check_scenario(&sc, 100, 3).unwrap();
        assert_eq!(c.states + c.skipped, 100);
        assert_eq!(c.positive_with_gauge, c.states);
        assert!(c.max_homogeneity < 1e-10);
    }
}
