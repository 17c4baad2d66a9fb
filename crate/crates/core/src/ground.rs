//! Ground states by imaginary-time relaxation.

use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CoreError, Result};
use crate::field::WaveField;
use crate::grid::Grid;
use crate::potential::PotentialSpec;
use crate::propagator::{Propagator, PropagatorConfig, Scheme};

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxConfig {
    /// Imaginary time steps, used in order; each stage runs to convergence.
    pub schedule: Vec<f64>,
    /// Energy change allowed over `check_every` steps at convergence (a.u.).
    pub tol: f64,
    /// Bound on ‖Δψ‖ / (check_every · dt), an estimate of ‖(H − E)ψ‖.
    pub residual_tol: f64,
    pub check_every: usize,
    /// Step limit per stage.
    pub max_iterations: usize,
}

impl Default for RelaxConfig {
    fn default() -> Self {
        RelaxConfig { schedule: vec![0.05, 0.01], tol: 1e-11, residual_tol: 1e-6, check_every: 10, max_iterations: 200_000 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Relaxed {
    pub field: WaveField,
    pub energy: f64,
    pub iterations: usize,
    /// Energy change over the last convergence window.
    pub last_delta: f64,
    pub residual: f64,
}

/// Relaxes `start` towards the ground state of `potential`.
///
/// The energy reported is ⟨H⟩ of the relaxed state, which is variational:
/// the splitting error of the imaginary-time step enters only at second order.
/// The absorbing mask is not applied during relaxation.
pub fn relax(start: WaveField, potential: &PotentialSpec, config: &RelaxConfig) -> Result<Relaxed> {
    if config.schedule.is_empty() || config.check_every == 0 {
        return Err(CoreError::InvalidParameter("empty relaxation schedule".into()));
    }
    let grid = start.grid.clone();
    let values = potential.evaluate(&grid)?;
    let mut field = start;
    field.normalize()?;
    let mut iterations = 0;
    let mut energy = f64::NAN;
    let mut last_delta = f64::INFINITY;
    let mut residual = f64::INFINITY;
    for &dt in &config.schedule {
        let cfg = PropagatorConfig { scheme: Scheme::SplitOperator, dt, imaginary_time: true, ..Default::default() };
        let prop = Propagator::with_values(grid.clone(), values.clone(), cfg)?;
        energy = prop.energy(&field);
        let mut stage = 0;
        loop {
            let before = field.values.clone();
            for _ in 0..config.check_every {
                iterations += 1;
                prop.step_in_place(&mut field, iterations)?;
            }
            stage += config.check_every;
            let e = prop.energy(&field);
            last_delta = (e - energy).abs();
            energy = e;
            let moved: f64 = field.values.iter().zip(&before).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>() * grid.cell_volume();
            residual = moved.sqrt() / (config.check_every as f64 * dt);
            if last_delta < config.tol && residual < config.residual_tol {
                break;
            }
            if stage >= config.max_iterations {
                return Err(CoreError::RelaxationNonConvergence { iterations, delta: last_delta });
            }
        }
    }
    // The ground state of a real Hamiltonian is real; drop FFT round-off.
    for z in field.values.iter_mut() {
        z.im = 0.0;
    }
    field.time = 0.0;
    Ok(Relaxed { field, energy, iterations, last_delta, residual })
}

/// Normalized ground state of a soft-Coulomb well (Z = 1, softening `a`)
/// centred at `center`.
pub fn init_1s(grid: Arc<Grid>, center: &[f64], a: f64) -> Result<WaveField> {
    init_1s_with(grid, center, a, &RelaxConfig::default()).map(|r| r.field)
}

pub fn init_1s_with(grid: Arc<Grid>, center: &[f64], a: f64, config: &RelaxConfig) -> Result<Relaxed> {
    let n = grid.ndim();
    if center.len() != n {
        return Err(CoreError::ShapeMismatch(format!("{}-d center on a {n}-d grid", center.len())));
    }
    let h = grid.spacing().iter().cloned().fold(0.0, f64::max);
    if !(a > 2.0 * h) {
        return Err(CoreError::InvalidParameter(format!("softening {a} is under-resolved (needs > 2h = {})", 2.0 * h)));
    }
    let potential = PotentialSpec::SoftCoulomb { center: center.to_vec(), charge: 1.0, softening: a };
    let mut idx = vec![0; n];
    let values = (0..grid.len())
        .map(|flat| {
            grid.unravel(flat, &mut idx);
            let r2: f64 = (0..n).map(|k| (grid.coords(k)[idx[k]] - center[k]).powi(2)).sum();
            Complex64::new((-(r2 + a * a).sqrt()).exp(), 0.0)
        })
        .collect();
    let start = WaveField::new(grid, values, 0.0)?;
    relax(start, &potential, config)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{make_grid, Boundary, GridSpec};

    #[test]
    fn relaxed_state_is_a_fixed_point() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![128], vec![32.0], &[0.0], Boundary::Periodic)).unwrap());
        let r = init_1s_with(g, &[0.0], 1.0, &RelaxConfig::default()).unwrap();
        assert!((r.field.norm_squared() - 1.0).abs() < 1e-12);
        let v = PotentialSpec::SoftCoulomb { center: vec![0.0], charge: 1.0, softening: 1.0 };
        let again = relax(r.field.clone(), &v, &RelaxConfig::default()).unwrap();
        assert!((again.energy - r.energy).abs() < 1e-10);
        assert!(r.field.values.iter().all(|z| z.re > -1e-12 && z.im == 0.0));
    }

    #[test]
    fn rejects_unresolved_softening() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![32], vec![32.0], &[0.0], Boundary::Periodic)).unwrap());
        assert!(init_1s(g, &[0.0], 1.5).is_err());
    }
}
