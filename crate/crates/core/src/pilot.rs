//! Pilot-wave fields: amplitude, quantum potential and velocity.
//!
//! Q and ∇Q are built from derivatives of ψ itself rather than of A = |ψ|,
//! which has a kink at every node: with w = ∇ψ/ψ, L = ∇²ψ/ψ,
//! M_ij = ∂_i∂_jψ/ψ and T_j = ∂_j∇²ψ/ψ,
//!
//!   v = Im w,   Q = −½ (Re L + |v|²),
//!   ∂_jQ = −½ Re(T_j − L w_j) − Σ_i v_i Im(M_ij − w_i w_j).

use std::collections::VecDeque;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::field::{central4, stencil, DerivativeMethod, Spectral, WaveField};
use crate::grid::Grid;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PilotConfig {
    /// Nodes are where A < node_eps_rel · max A.
    pub node_eps_rel: f64,
    /// Absolute floor on A for the node test (used for conditional slices,
    /// whose own maximum says nothing about the full two-body field).
    pub node_floor: f64,
    /// Speed clamp inside node regions (a.u.).
    pub v_max: f64,
    pub method: DerivativeMethod,
    /// Also compute second derivatives of Q.
    pub hessian: bool,
}

impl Default for PilotConfig {
    fn default() -> Self {
        PilotConfig { node_eps_rel: 1e-6, node_floor: 0.0, v_max: 10.0, method: DerivativeMethod::Spectral, hessian: false }
    }
}

impl PilotConfig {
    /// Defaults with v_max = 10·|k₀|.
    pub fn for_wavenumber(k0: f64) -> Self {
        PilotConfig { v_max: 10.0 * k0.abs().max(0.1), ..Default::default() }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PilotField {
    pub grid: Arc<Grid>,
    pub time: f64,
    pub amplitude: Vec<f64>,
    pub q: Vec<f64>,
    /// v per axis.
    pub velocity: Vec<Vec<f64>>,
    /// ∂Q per axis.
    pub grad_q: Vec<Vec<f64>>,
    /// ∂_j∂_kQ stored at j·n + k, when requested.
    pub hess_q: Option<Vec<Vec<f64>>>,
    pub node_mask: Vec<bool>,
    pub config: PilotConfig,
}

/// Velocity-only pilot (used for conditional slices).
#[derive(Debug, Clone, PartialEq)]
pub struct VelocityField {
    pub grid: Arc<Grid>,
    pub velocity: Vec<Vec<f64>>,
    pub node_mask: Vec<bool>,
}

struct Derivatives {
    d1: Vec<Vec<Complex64>>,
    /// Upper triangle, index i·n + j with i ≤ j.
    d2: Vec<Option<Vec<Complex64>>>,
    lap: Vec<Complex64>,
    d3: Vec<Vec<Complex64>>,
}

fn derivatives(grid: &Arc<Grid>, psi: &[Complex64], method: DerivativeMethod, full: bool) -> Derivatives {
    let n = grid.ndim();
    let mut d2: Vec<Option<Vec<Complex64>>> = vec![None; n * n];
    match method {
        DerivativeMethod::Spectral => {
            let sp = Spectral::new(grid.clone());
            let spec = sp.forward(psi);
            let unit = |orders: &[(usize, usize)]| {
                let mut o = vec![0; n];
                for &(a, k) in orders {
                    o[a] += k;
                }
                o
            };
            let d1 = (0..n).map(|i| sp.partial(&spec, &unit(&[(i, 1)]))).collect();
            if !full {
                return Derivatives { d1, d2, lap: Vec::new(), d3: Vec::new() };
            }
            for i in 0..n {
                for j in i..n {
                    d2[i * n + j] = Some(sp.partial(&spec, &unit(&[(i, 1), (j, 1)])));
                }
            }
            let lap = sp.laplacian(&spec);
            let lap_spec = sp.forward(&lap);
            let d3 = (0..n).map(|j| sp.partial(&lap_spec, &unit(&[(j, 1)]))).collect();
            Derivatives { d1, d2, lap, d3 }
        }
        DerivativeMethod::Central4 => {
            let d1: Vec<Vec<Complex64>> = (0..n).map(|i| central4(grid, psi, i, 1)).collect();
            if !full {
                return Derivatives { d1, d2, lap: Vec::new(), d3: Vec::new() };
            }
            for i in 0..n {
                d2[i * n + i] = Some(central4(grid, psi, i, 2));
                for j in i + 1..n {
                    d2[i * n + j] = Some(central4(grid, &d1[i], j, 1));
                }
            }
            let mut lap = vec![Complex64::default(); psi.len()];
            for i in 0..n {
                for (l, d) in lap.iter_mut().zip(d2[i * n + i].as_ref().expect("diagonal")) {
                    *l += *d;
                }
            }
            let d3 = (0..n).map(|j| central4(grid, &lap, j, 1)).collect();
            Derivatives { d1, d2, lap, d3 }
        }
    }
}

fn node_mask(amplitude: &[f64], config: &PilotConfig) -> Result<Vec<bool>> {
    let amax = amplitude.iter().cloned().fold(0.0, f64::max);
    let eps = (config.node_eps_rel * amax).max(config.node_floor);
    if !(amax > 0.0) || !amax.is_finite() || amplitude.iter().all(|&a| a < eps) {
        return Err(CoreError::AllNodes);
    }
    Ok(amplitude.iter().map(|&a| !(a >= eps) || a == 0.0).collect())
}

/// For every masked node, the nearest unmasked node by breadth-first search
/// over axis neighbours (ties broken by visiting order, so deterministic).
fn fill_sources(grid: &Grid, mask: &[bool]) -> Vec<usize> {
    let n = grid.ndim();
    let periodic = grid.boundary().is_periodic();
    let mut source: Vec<usize> = (0..mask.len()).collect();
    let mut seen: Vec<bool> = mask.iter().map(|m| !m).collect();
    let mut queue: VecDeque<usize> = (0..mask.len()).filter(|&i| !mask[i]).collect();
    let mut idx = vec![0; n];
    while let Some(cur) = queue.pop_front() {
        grid.unravel(cur, &mut idx);
        for a in 0..n {
            let dim = grid.dims()[a];
            let stride = grid.strides()[a];
            for step in [-1isize, 1] {
                let j = idx[a] as isize + step;
                let j = if periodic {
                    j.rem_euclid(dim as isize) as usize
                } else if j < 0 || j >= dim as isize {
                    continue;
                } else {
                    j as usize
                };
                let nb = cur - idx[a] * stride + j * stride;
                if !seen[nb] {
                    seen[nb] = true;
                    source[nb] = source[cur];
                    queue.push_back(nb);
                }
            }
        }
    }
    source
}

fn fill(values: &mut [f64], mask: &[bool], source: &[usize]) {
    for i in 0..values.len() {
        if mask[i] {
            values[i] = values[source[i]];
        }
    }
}

fn clamp_speeds(velocity: &mut [Vec<f64>], mask: &[bool], v_max: f64) {
    for i in 0..mask.len() {
        if !mask[i] {
            continue;
        }
        let s2: f64 = velocity.iter().map(|v| v[i] * v[i]).sum();
        if s2 > v_max * v_max {
            let f = v_max / s2.sqrt();
            for v in velocity.iter_mut() {
                v[i] *= f;
            }
        }
    }
}

/// A, v, Q and ∇Q (and optionally ∂²Q) from a wavefield.
pub fn derive_pilot(field: &WaveField, config: &PilotConfig) -> Result<PilotField> {
    let grid = field.grid.clone();
    let n = grid.ndim();
    let psi = &field.values;
    let amplitude: Vec<f64> = psi.iter().map(|z| z.norm()).collect();
    let mask = node_mask(&amplitude, config)?;
    let d = derivatives(&grid, psi, config.method, true);
    let len = psi.len();
    let mut velocity = vec![vec![0.0; len]; n];
    let mut grad_q = vec![vec![0.0; len]; n];
    let mut q = vec![0.0; len];

    // Node-local algebra; results are gathered per node then scattered.
    let rows: Vec<(f64, [f64; 4], [f64; 4])> = (0..len)
        .into_par_iter()
        .map(|p| {
            let mut v = [0.0; 4];
            let mut gq = [0.0; 4];
            if mask[p] {
                return (0.0, v, gq);
            }
            let inv = 1.0 / psi[p];
            let mut w = [Complex64::default(); 4];
            for i in 0..n {
                w[i] = d.d1[i][p] * inv;
                v[i] = w[i].im;
            }
            let l = d.lap[p] * inv;
            let v2: f64 = v[..n].iter().map(|x| x * x).sum();
            let qv = -0.5 * (l.re + v2);
            for j in 0..n {
                let t = d.d3[j][p] * inv;
                let mut acc = -0.5 * (t - l * w[j]).re;
                for i in 0..n {
                    let (a, b) = if i <= j { (i, j) } else { (j, i) };
                    let m = d.d2[a * n + b].as_ref().expect("second derivative")[p] * inv;
                    acc -= v[i] * (m - w[i] * w[j]).im;
                }
                gq[j] = acc;
            }
            (qv, v, gq)
        })
        .collect();
    for (p, (qv, v, gq)) in rows.into_iter().enumerate() {
        q[p] = qv;
        for a in 0..n {
            velocity[a][p] = v[a];
            grad_q[a][p] = gq[a];
        }
    }

    if mask.iter().any(|&m| m) {
        let source = fill_sources(&grid, &mask);
        fill(&mut q, &mask, &source);
        for a in 0..n {
            fill(&mut velocity[a], &mask, &source);
            fill(&mut grad_q[a], &mask, &source);
        }
        clamp_speeds(&mut velocity, &mask, config.v_max);
    }

    let hess_q = if config.hessian {
        let mut h = vec![Vec::new(); n * n];
        for j in 0..n {
            for k in j..n {
                let a = central4(&grid, &grad_q[j], k, 1);
                let b = central4(&grid, &grad_q[k], j, 1);
                let s: Vec<f64> = a.iter().zip(&b).map(|(x, y)| 0.5 * (x + y)).collect();
                h[k * n + j] = s.clone();
                h[j * n + k] = s;
            }
        }
        Some(h)
    } else {
        None
    };

    Ok(PilotField { grid, time: field.time, amplitude, q, velocity, grad_q, hess_q, node_mask: mask, config: *config })
}

/// v = Im(∇ψ/ψ) only; ψ need not be normalized.
pub fn velocity_field(field: &WaveField, config: &PilotConfig) -> Result<VelocityField> {
    let grid = field.grid.clone();
    let n = grid.ndim();
    let psi = &field.values;
    let amplitude: Vec<f64> = psi.iter().map(|z| z.norm()).collect();
    let mask = node_mask(&amplitude, config)?;
    let d = derivatives(&grid, psi, config.method, false);
    let mut velocity: Vec<Vec<f64>> = (0..n)
        .map(|a| (0..psi.len()).map(|p| if mask[p] { 0.0 } else { (d.d1[a][p] / psi[p]).im }).collect())
        .collect();
    if mask.iter().any(|&m| m) {
        let source = fill_sources(&grid, &mask);
        for v in velocity.iter_mut() {
            fill(v, &mask, &source);
        }
        clamp_speeds(&mut velocity, &mask, config.v_max);
    }
    Ok(VelocityField { grid, velocity, node_mask: mask })
}

/// Velocity lookup shared by one-body and conditional pilots.
pub trait VelocitySource: Sync {
    /// Number of coordinates of a point.
    fn dim(&self) -> usize;
    /// Whether a trajectory at `p` is still in the usable (unmasked) box.
    fn inside(&self, p: &[f64]) -> bool;
    /// Writes v(p) into `out`; returns whether the stencil touches a node.
    fn velocity_into(&self, p: &[f64], out: &mut [f64]) -> Result<bool>;
}

fn sample_vector(grid: &Grid, comps: &[Vec<f64>], mask: &[bool], p: &[f64], out: &mut [f64]) -> Result<bool> {
    let st = stencil(grid, p)?;
    for (o, c) in out.iter_mut().zip(comps) {
        *o = st.apply(c);
    }
    Ok(st.corners().iter().any(|&i| mask[i]))
}

impl VelocitySource for PilotField {
    fn dim(&self) -> usize {
        self.grid.ndim()
    }

    fn inside(&self, p: &[f64]) -> bool {
        self.grid.in_interior(p)
    }

    fn velocity_into(&self, p: &[f64], out: &mut [f64]) -> Result<bool> {
        sample_vector(&self.grid, &self.velocity, &self.node_mask, p, out)
    }
}

impl VelocitySource for VelocityField {
    fn dim(&self) -> usize {
        self.grid.ndim()
    }

    fn inside(&self, p: &[f64]) -> bool {
        self.grid.in_interior(p)
    }

    fn velocity_into(&self, p: &[f64], out: &mut [f64]) -> Result<bool> {
        sample_vector(&self.grid, &self.velocity, &self.node_mask, p, out)
    }
}

impl PilotField {
    pub fn sample_q(&self, p: &[f64]) -> Result<f64> {
        Ok(stencil(&self.grid, p)?.apply(&self.q))
    }

    pub fn sample_grad_q(&self, p: &[f64], out: &mut [f64]) -> Result<bool> {
        sample_vector(&self.grid, &self.grad_q, &self.node_mask, p, out)
    }

    /// ∂_j∂_kQ at `p`, row-major n×n.
    pub fn sample_hessian(&self, p: &[f64], out: &mut [f64]) -> Result<()> {
        let h = self
            .hess_q
            .as_ref()
            .ok_or_else(|| CoreError::InvalidParameter("pilot was derived without second derivatives of Q".into()))?;
        let st = stencil(&self.grid, p)?;
        for (o, c) in out.iter_mut().zip(h) {
            *o = st.apply(c);
        }
        Ok(())
    }

    pub fn masked_fraction(&self) -> f64 {
        self.node_mask.iter().filter(|&&m| m).count() as f64 / self.node_mask.len() as f64
    }
}
