//! Time evolution under H = −∇²/2 + V.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::fft::FftNd;
use crate::field::WaveField;
use crate::grid::Grid;
use crate::potential::PotentialSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    /// Strang splitting e^{−iKdt/2} e^{−iVdt} e^{−iKdt/2} with spectral kinetic energy.
    SplitOperator,
    /// Cayley form solved as symmetric sweeps of one-dimensional
    /// tridiagonal systems (three-point Laplacian, V split evenly over axes).
    CayleyAdi,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::SplitOperator => "split_operator",
            Scheme::CayleyAdi => "cayley_adi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "split_operator" => Some(Scheme::SplitOperator),
            "cayley_adi" => Some(Scheme::CayleyAdi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PropagatorConfig {
    pub scheme: Scheme,
    /// Time step (a.u.). Negative values propagate backwards.
    pub dt: f64,
    pub imaginary_time: bool,
    /// Relative residual accepted from each tridiagonal solve.
    pub solver_tol: f64,
}

impl Default for PropagatorConfig {
    fn default() -> Self {
        PropagatorConfig { scheme: Scheme::SplitOperator, dt: 0.1, imaginary_time: false, solver_tol: 1e-10 }
    }
}

/// Receives every propagated field before the next step starts.
pub trait Observer {
    /// Called once with the initial field.
    fn begin(&mut self, _field: &WaveField) -> std::result::Result<(), String> {
        Ok(())
    }

    /// Called after step `step` (1-based) with the new field.
    fn observe(&mut self, step: usize, field: &WaveField) -> std::result::Result<(), String>;
}

impl<F: FnMut(usize, &WaveField) -> std::result::Result<(), String>> Observer for F {
    fn observe(&mut self, step: usize, field: &WaveField) -> std::result::Result<(), String> {
        self(step, field)
    }
}

#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Arc<Grid>,
    config: PropagatorConfig,
    potential: Vec<f64>,
    kinetic: Vec<f64>,
    kinetic_half: Vec<Complex64>,
    potential_full: Vec<Complex64>,
    mask: Option<Vec<f64>>,
    fft: FftNd,
}

impl Propagator {
    pub fn new(grid: Arc<Grid>, potential: &PotentialSpec, config: PropagatorConfig) -> Result<Self> {
        let values = potential.evaluate(&grid)?;
        Self::with_values(grid, values, config)
    }

    /// Builds a propagator from a pre-sampled potential.
    pub fn with_values(grid: Arc<Grid>, potential: Vec<f64>, config: PropagatorConfig) -> Result<Self> {
        if !(config.dt.is_finite() && config.dt != 0.0) {
            return Err(CoreError::InvalidParameter(format!("dt = {}", config.dt)));
        }
        if config.imaginary_time && config.dt < 0.0 {
            return Err(CoreError::InvalidParameter("imaginary-time steps must be positive".into()));
        }
        if !(config.solver_tol > 0.0) {
            return Err(CoreError::InvalidParameter(format!("solver tolerance {}", config.solver_tol)));
        }
        if potential.len() != grid.len() {
            return Err(CoreError::ShapeMismatch(format!("{} potential values on {} nodes", potential.len(), grid.len())));
        }
        if let Some(i) = potential.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFinite { step: 0, detail: format!("potential at node {i}") });
        }
        let n = grid.ndim();
        let ekin_max: f64 = (0..n).map(|a| 0.5 * grid.k_max(a).powi(2)).sum();
        if config.scheme == Scheme::SplitOperator && config.dt.abs() * ekin_max >= 0.5 {
            log::warn!(
                "dt·E_kin,max = {:.3} ≥ 0.5: split-operator phases of the highest modes are not resolved",
                config.dt.abs() * ekin_max
            );
        }
        let mut kinetic = vec![0.0; grid.len()];
        let mut idx = vec![0; n];
        for (flat, k) in kinetic.iter_mut().enumerate() {
            grid.unravel(flat, &mut idx);
            *k = (0..n).map(|a| 0.5 * grid.wavenumbers(a)[idx[a]].powi(2)).sum();
        }
        let dt = config.dt;
        let phase = |e: f64, tau: f64| {
            if config.imaginary_time {
                Complex64::new((-e * tau).exp(), 0.0)
            } else {
                Complex64::from_polar(1.0, -e * tau)
            }
        };
        let kinetic_half = kinetic.iter().map(|&k| phase(k, 0.5 * dt)).collect();
        let potential_full = potential.iter().map(|&v| phase(v, dt)).collect();
        let mask = grid.absorbing_mask();
        let fft = FftNd::new(grid.dims());
        Ok(Propagator { grid, config, potential, kinetic, kinetic_half, potential_full, mask, fft })
    }

    pub fn grid(&self) -> &Arc<Grid> {
        &self.grid
    }

    pub fn config(&self) -> &PropagatorConfig {
        &self.config
    }

    pub fn potential(&self) -> &[f64] {
        &self.potential
    }

    /// The same propagator running backwards in time (dt → −dt).
    pub fn reversed(&self) -> Result<Self> {
        let config = PropagatorConfig { dt: -self.config.dt, ..self.config };
        Self::with_values(self.grid.clone(), self.potential.clone(), config)
    }

    /// Advances a fresh copy of `field` by one step.
    pub fn step(&self, field: &WaveField) -> Result<WaveField> {
        let mut next = field.clone();
        self.step_in_place(&mut next, 0)?;
        Ok(next)
    }

    /// One step in place. The absorbing mask (if any) is applied after the
    /// unitary update in real-time mode; imaginary-time steps renormalize.
    pub fn step_in_place(&self, field: &mut WaveField, step_index: usize) -> Result<()> {
        if !Arc::ptr_eq(&field.grid, &self.grid) && *field.grid != *self.grid {
            return Err(CoreError::ShapeMismatch("field and propagator grids differ".into()));
        }
        match self.config.scheme {
            Scheme::SplitOperator => self.split_step(&mut field.values),
            Scheme::CayleyAdi => self.cayley_step(&mut field.values)?,
        }
        if self.config.imaginary_time {
            field.normalize().map_err(|_| CoreError::NonFinite {
                step: step_index,
                detail: "field vanished during imaginary-time relaxation".into(),
            })?;
        } else {
            field.time += self.config.dt;
            if let Some(mask) = &self.mask {
                field.values.par_iter_mut().zip(mask.par_iter()).for_each(|(z, m)| *z *= *m);
            }
        }
        field.check_finite(step_index)
    }

    fn split_step(&self, psi: &mut [Complex64]) {
        let mul = |psi: &mut [Complex64], f: &[Complex64]| psi.par_iter_mut().zip(f.par_iter()).for_each(|(z, f)| *z *= *f);
        self.fft.forward(psi);
        mul(psi, &self.kinetic_half);
        self.fft.inverse(psi);
        mul(psi, &self.potential_full);
        self.fft.forward(psi);
        mul(psi, &self.kinetic_half);
        self.fft.inverse(psi);
    }

    fn cayley_step(&self, psi: &mut [Complex64]) -> Result<()> {
        let n = self.grid.ndim();
        let tau = 0.5 * self.config.dt;
        for axis in 0..n {
            self.cayley_axis(psi, axis, tau)?;
        }
        for axis in (0..n).rev() {
            self.cayley_axis(psi, axis, tau)?;
        }
        Ok(())
    }

    /// Solves (1 + αH_a)ψ' = (1 − αH_a)ψ along every line of `axis`, with
    /// α = iτ/2 (real time) or τ/2 (imaginary time).
    fn cayley_axis(&self, psi: &mut [Complex64], axis: usize, tau: f64) -> Result<()> {
        let g = &self.grid;
        let len = g.dims()[axis];
        let stride = g.strides()[axis];
        let h = g.spacing()[axis];
        let share = 1.0 / g.ndim() as f64;
        let alpha = if self.config.imaginary_time { Complex64::new(0.5 * tau, 0.0) } else { Complex64::new(0.0, 0.5 * tau) };
        let periodic = g.boundary().is_periodic();
        let tol = self.config.solver_tol;
        let block = len * stride;
        let off_h = -0.5 / (h * h);
        let diag_h = 1.0 / (h * h);
        let worst = psi
            .par_chunks_mut(block)
            .enumerate()
            .map(|(chunk_index, chunk)| {
                let mut line = vec![Complex64::default(); len];
                let mut rhs = vec![Complex64::default(); len];
                let mut diag = vec![Complex64::default(); len];
                let mut scratch = vec![Complex64::default(); 3 * len];
                let mut worst: f64 = 0.0;
                for i in 0..stride {
                    for j in 0..len {
                        line[j] = chunk[j * stride + i];
                        let v = self.potential[chunk_index * block + j * stride + i] * share;
                        diag[j] = Complex64::new(diag_h + v, 0.0);
                    }
                    for j in 0..len {
                        let left = if j > 0 { line[j - 1] } else if periodic { line[len - 1] } else { Complex64::default() };
                        let right = if j + 1 < len { line[j + 1] } else if periodic { line[0] } else { Complex64::default() };
                        let hpsi = diag[j] * line[j] + (left + right) * off_h;
                        rhs[j] = line[j] - alpha * hpsi;
                    }
                    let lower = alpha * off_h;
                    for d in diag.iter_mut() {
                        *d = Complex64::new(1.0, 0.0) + alpha * *d;
                    }
                    let x = &mut line;
                    x.copy_from_slice(&rhs);
                    if periodic {
                        solve_cyclic(lower, &diag, lower, x, &mut scratch);
                    } else {
                        solve_tridiagonal(lower, &diag, lower, x, &mut scratch[..len]);
                    }
                    worst = worst.max(residual(lower, &diag, lower, x, &rhs, periodic));
                    for j in 0..len {
                        chunk[j * stride + i] = x[j];
                    }
                }
                worst
            })
            .reduce(|| 0.0, f64::max);
        if !(worst <= tol) {
            return Err(CoreError::SolverNonConvergence { residual: worst, tol });
        }
        Ok(())
    }

    /// ⟨H⟩ with spectral kinetic energy, normalized by ⟨ψ|ψ⟩.
    pub fn energy(&self, field: &WaveField) -> f64 {
        let mut spec = field.values.clone();
        self.fft.forward(&mut spec);
        let (mut ek, mut nk) = (0.0, 0.0);
        for (z, k) in spec.iter().zip(&self.kinetic) {
            let p = z.norm_sqr();
            ek += p * k;
            nk += p;
        }
        let (mut ev, mut nv) = (0.0, 0.0);
        for (z, v) in field.values.iter().zip(&self.potential) {
            let p = z.norm_sqr();
            ev += p * v;
            nv += p;
        }
        ek / nk + ev / nv
    }

    /// Applies `n_steps` steps, handing each new field to every observer.
    pub fn run(&self, mut field: WaveField, n_steps: usize, observers: &mut [&mut dyn Observer]) -> Result<WaveField> {
        if n_steps == 0 {
            return Err(CoreError::InvalidParameter("run needs at least one step".into()));
        }
        field.check_finite(0)?;
        for obs in observers.iter_mut() {
            obs.begin(&field).map_err(|message| CoreError::Observer { step: 0, message })?;
        }
        for step in 1..=n_steps {
            self.step_in_place(&mut field, step)?;
            for obs in observers.iter_mut() {
                obs.observe(step, &field).map_err(|message| CoreError::Observer { step, message })?;
            }
        }
        Ok(field)
    }
}

/// Thomas algorithm for constant off-diagonals; `x` holds the rhs on entry.
fn solve_tridiagonal(lower: Complex64, diag: &[Complex64], upper: Complex64, x: &mut [Complex64], cp: &mut [Complex64]) {
    let n = diag.len();
    let mut denom = diag[0];
    cp[0] = upper / denom;
    x[0] /= denom;
    for j in 1..n {
        denom = diag[j] - lower * cp[j - 1];
        cp[j] = upper / denom;
        x[j] = (x[j] - lower * x[j - 1]) / denom;
    }
    for j in (0..n - 1).rev() {
        let next = x[j + 1];
        x[j] -= cp[j] * next;
    }
}

/// Periodic tridiagonal system (row 0 couples to x[n−1] through `lower`,
/// row n−1 to x[0] through `upper`)
/// by the Sherman–Morrison correction.
fn solve_cyclic(lower: Complex64, diag: &[Complex64], upper: Complex64, x: &mut [Complex64], scratch: &mut [Complex64]) {
    let n = diag.len();
    let (bb, rest) = scratch.split_at_mut(n);
    let (z, cp) = rest.split_at_mut(n);
    let alpha = upper; // A[n−1][0]
    let beta = lower; // A[0][n−1]
    let gamma = -diag[0];
    bb.copy_from_slice(diag);
    bb[0] = diag[0] - gamma;
    bb[n - 1] = diag[n - 1] - alpha * beta / gamma;
    solve_tridiagonal(lower, bb, upper, x, cp);
    z.fill(Complex64::default());
    z[0] = gamma;
    z[n - 1] = alpha;
    solve_tridiagonal(lower, bb, upper, z, cp);
    let fact = (x[0] + beta * x[n - 1] / gamma) / (Complex64::new(1.0, 0.0) + z[0] + beta * z[n - 1] / gamma);
    for (xi, zi) in x.iter_mut().zip(z.iter()) {
        *xi -= fact * *zi;
    }
}

fn residual(lower: Complex64, diag: &[Complex64], upper: Complex64, x: &[Complex64], rhs: &[Complex64], periodic: bool) -> f64 {
    let n = diag.len();
    let scale = rhs.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let mut worst: f64 = 0.0;
    for j in 0..n {
        let left = if j > 0 { x[j - 1] } else if periodic { x[n - 1] } else { Complex64::default() };
        let right = if j + 1 < n { x[j + 1] } else if periodic { x[0] } else { Complex64::default() };
        let r = diag[j] * x[j] + lower * left + upper * right - rhs[j];
        worst = worst.max(r.norm());
    }
    worst / scale
}
