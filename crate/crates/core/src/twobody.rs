//! Two-electron singlet states built from one-particle orbitals.
//!
//! The spatial part is φ_G(q₁)φ_1s(q₂) + φ_G(q₂)φ_1s(q₁) scaled by
//! 1/(2√(1+|S|²)). That prefactor gives norm² = ½ for every S (the
//! bracket has norm² 2 + 2|S|²), so the norm is measured, kept, and the
//! field renormalized. The spin singlet factors out of every observable
//! and is not stored.

use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::field::{stencil, DerivativeMethod, Spectral, WaveField};
use crate::grid::{make_grid_with_budget, Grid, GridSpec, DEFAULT_POINT_BUDGET};
use crate::pilot::{velocity_field, PilotConfig, VelocityField, VelocitySource};
use crate::potential::PotentialSpec;
use crate::propagator::{Propagator, PropagatorConfig};

/// ψ(q₁, q₂) on the product grid; particle 1 owns the leading axes.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoBodyField {
    pub particle_grid: Arc<Grid>,
    pub product_grid: Arc<Grid>,
    pub values: Vec<Complex64>,
    pub overlap: Complex64,
    /// ∫|ψ|² under the literal prefactor, before renormalization.
    pub literal_norm_sq: f64,
    pub time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Particle {
    One,
    Two,
}

pub fn overlap(a: &WaveField, b: &WaveField) -> Result<Complex64> {
    if *a.grid != *b.grid {
        return Err(CoreError::ShapeMismatch("overlap of fields on different grids".into()));
    }
    let s: Complex64 = a.values.iter().zip(&b.values).map(|(x, y)| x.conj() * y).sum();
    Ok(s * a.grid.cell_volume())
}

/// Literal prefactor 1/(2√(1+|S|²)).
pub fn literal_prefactor(s: Complex64) -> f64 {
    1.0 / (2.0 * (1.0 + s.norm_sqr()).sqrt())
}

pub fn product_grid(particle: &Grid, budget: usize) -> Result<Grid> {
    let s = particle.spec();
    let twice = |v: &[f64]| v.iter().chain(v).cloned().collect::<Vec<f64>>();
    let dims: Vec<usize> = s.dims.iter().chain(&s.dims).cloned().collect();
    make_grid_with_budget(GridSpec::new(dims, twice(&s.box_lengths), twice(&s.origin), s.boundary), budget)
}

pub fn symmetrize(phi_g: &WaveField, phi_1s: &WaveField) -> Result<TwoBodyField> {
    symmetrize_with_budget(phi_g, phi_1s, DEFAULT_POINT_BUDGET)
}

pub fn symmetrize_with_budget(phi_g: &WaveField, phi_1s: &WaveField, budget: usize) -> Result<TwoBodyField> {
    if phi_g.grid.ndim() > 2 {
        return Err(CoreError::ShapeMismatch("two-body fields support at most 2 axes per particle".into()));
    }
    let s = overlap(phi_g, phi_1s)?;
    let product = Arc::new(product_grid(&phi_g.grid, budget)?);
    let n = phi_g.grid.len();
    let c = literal_prefactor(s);
    let g = &phi_g.values;
    let h = &phi_1s.values;
    let mut values = vec![Complex64::default(); n * n];
    values.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        for (j, z) in row.iter_mut().enumerate() {
            // (a + b) and (b + a) round identically, so ψ(i,j) == ψ(j,i) bit for bit.
            *z = (g[i] * h[j] + g[j] * h[i]) * c;
        }
    });
    let dv = product.cell_volume();
    let literal_norm_sq = values.iter().map(|z| z.norm_sqr()).sum::<f64>() * dv;
    if !(literal_norm_sq > 0.0) {
        return Err(CoreError::DegenerateDensity("symmetrized state vanishes".into()));
    }
    let r = 1.0 / literal_norm_sq.sqrt();
    values.par_iter_mut().for_each(|z| *z *= r);
    Ok(TwoBodyField { particle_grid: phi_g.grid.clone(), product_grid: product, values, overlap: s, literal_norm_sq, time: phi_g.time })
}

impl TwoBodyField {
    pub fn norm_squared(&self) -> f64 {
        self.values.iter().map(|z| z.norm_sqr()).sum::<f64>() * self.product_grid.cell_volume()
    }

    /// max |ψ(q₁,q₂) − ψ(q₂,q₁)|.
    pub fn exchange_asymmetry(&self) -> f64 {
        let n = self.particle_grid.len();
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                worst = worst.max((self.values[i * n + j] - self.values[j * n + i]).norm());
            }
        }
        worst
    }

    pub fn as_wavefield(&self) -> WaveField {
        WaveField { grid: self.product_grid.clone(), values: self.values.clone(), time: self.time }
    }

    /// ψ(·, q̄₂) (active particle one) or ψ(q̄₁, ·), multilinear in the
    /// frozen coordinate; not normalized.
    pub fn conditional_slice(&self, which: Particle, frozen: &[f64]) -> Result<WaveField> {
        let pg = &self.particle_grid;
        let st = stencil(pg, frozen)?;
        let n = pg.len();
        let values: Vec<Complex64> = (0..n)
            .map(|k| {
                let mut acc = Complex64::default();
                for c in 0..st.len {
                    let idx = match which {
                        Particle::One => k * n + st.index[c],
                        Particle::Two => st.index[c] * n + k,
                    };
                    acc += self.values[idx] * st.weight[c];
                }
                acc
            })
            .collect();
        Ok(WaveField { grid: pg.clone(), values, time: self.time })
    }

    pub fn max_amplitude(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// Velocity of the active particle with the partner frozen at `frozen`.
pub fn conditional_velocity(psi2: &TwoBodyField, which: Particle, frozen: &[f64], config: &PilotConfig) -> Result<VelocityField> {
    let slice = psi2.conditional_slice(which, frozen)?;
    let floor = config.node_eps_rel * psi2.max_amplitude();
    let cfg = PilotConfig { node_floor: config.node_floor.max(floor), ..*config };
    velocity_field(&slice, &cfg)
}

/// Propagates both orbitals independently under the same potential and
/// hands the symmetrized state to `visit` every `every` steps (and at t = 0).
pub fn evolve_pair_with(
    phi_g: WaveField,
    phi_1s: WaveField,
    potential: &PotentialSpec,
    config: PropagatorConfig,
    n_steps: usize,
    every: usize,
    mut visit: impl FnMut(usize, &TwoBodyField) -> Result<()>,
) -> Result<(WaveField, WaveField)> {
    if n_steps == 0 || every == 0 {
        return Err(CoreError::InvalidParameter("evolve_pair needs n ≥ 1 and a cadence ≥ 1".into()));
    }
    let prop = Propagator::new(phi_g.grid.clone(), potential, config)?;
    let (mut a, mut b) = (phi_g, phi_1s);
    visit(0, &symmetrize(&a, &b)?)?;
    for step in 1..=n_steps {
        let (ra, rb) = rayon::join(|| prop.step_in_place(&mut a, step), || prop.step_in_place(&mut b, step));
        ra?;
        rb?;
        if step % every == 0 {
            visit(step, &symmetrize(&a, &b)?)?;
        }
    }
    Ok((a, b))
}

pub fn evolve_pair(
    phi_g: WaveField,
    phi_1s: WaveField,
    potential: &PotentialSpec,
    config: PropagatorConfig,
    n_steps: usize,
    every: usize,
) -> Result<Vec<TwoBodyField>> {
    let mut out = Vec::new();
    evolve_pair_with(phi_g, phi_1s, potential, config, n_steps, every, |_, f| {
        out.push(f.clone());
        Ok(())
    })?;
    Ok(out)
}

/// Pair velocities evaluated pointwise from the two orbitals, without
/// building the product grid. Points are (q₁, q₂) concatenated.
#[derive(Debug, Clone)]
pub struct PairPilot {
    grid: Arc<Grid>,
    phi_g: Vec<Complex64>,
    phi_1s: Vec<Complex64>,
    grad_g: Vec<Vec<Complex64>>,
    grad_1s: Vec<Vec<Complex64>>,
    node_eps: f64,
    v_max: f64,
}

impl PairPilot {
    pub fn new(phi_g: &WaveField, phi_1s: &WaveField, config: &PilotConfig) -> Result<Self> {
        if *phi_g.grid != *phi_1s.grid {
            return Err(CoreError::ShapeMismatch("orbitals live on different grids".into()));
        }
        let grid = phi_g.grid.clone();
        let n = grid.ndim();
        let grads = |f: &WaveField| -> Vec<Vec<Complex64>> {
            match config.method {
                DerivativeMethod::Spectral => {
                    let sp = Spectral::new(grid.clone());
                    let spec = sp.forward(&f.values);
                    (0..n)
                        .map(|a| {
                            let mut o = vec![0; n];
                            o[a] = 1;
                            sp.partial(&spec, &o)
                        })
                        .collect()
                }
                DerivativeMethod::Central4 => (0..n).map(|a| crate::field::central4(&grid, &f.values, a, 1)).collect(),
            }
        };
        let amax = |v: &[Complex64]| v.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let scale = 2.0 * amax(&phi_g.values) * amax(&phi_1s.values);
        if !(scale > 0.0) {
            return Err(CoreError::AllNodes);
        }
        Ok(PairPilot {
            grad_g: grads(phi_g),
            grad_1s: grads(phi_1s),
            phi_g: phi_g.values.clone(),
            phi_1s: phi_1s.values.clone(),
            node_eps: config.node_eps_rel * scale,
            v_max: config.v_max,
            grid,
        })
    }

    /// ψ (up to a constant) and its gradients with respect to q₁ and q₂.
    fn evaluate(&self, p: &[f64]) -> Result<(Complex64, [Complex64; 4])> {
        let n = self.grid.ndim();
        let s1 = stencil(&self.grid, &p[..n])?;
        let s2 = stencil(&self.grid, &p[n..])?;
        let g1 = s1.apply(&self.phi_g);
        let h1 = s1.apply(&self.phi_1s);
        let g2 = s2.apply(&self.phi_g);
        let h2 = s2.apply(&self.phi_1s);
        let psi = g1 * h2 + g2 * h1;
        let mut grad = [Complex64::default(); 4];
        for a in 0..n {
            grad[a] = s1.apply(&self.grad_g[a]) * h2 + g2 * s1.apply(&self.grad_1s[a]);
            grad[n + a] = g1 * s2.apply(&self.grad_1s[a]) + s2.apply(&self.grad_g[a]) * h1;
        }
        Ok((psi, grad))
    }
}

impl VelocitySource for PairPilot {
    fn dim(&self) -> usize {
        2 * self.grid.ndim()
    }

    fn inside(&self, p: &[f64]) -> bool {
        let n = self.grid.ndim();
        self.grid.in_interior(&p[..n]) && self.grid.in_interior(&p[n..])
    }

    fn velocity_into(&self, p: &[f64], out: &mut [f64]) -> Result<bool> {
        let (psi, grad) = self.evaluate(p)?;
        let m = 2 * self.grid.ndim();
        let node = psi.norm() < self.node_eps;
        if psi.norm() == 0.0 {
            out[..m].fill(0.0);
            return Ok(true);
        }
        for k in 0..m {
            out[k] = (grad[k] / psi).im;
        }
        if node {
            let s = out[..m].iter().map(|x| x * x).sum::<f64>().sqrt();
            if s > self.v_max {
                out[..m].iter_mut().for_each(|x| *x *= self.v_max / s);
            }
        }
        Ok(node)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::init_gaussian;
    use crate::grid::{make_grid, Boundary};

    fn line() -> Arc<Grid> {
        Arc::new(make_grid(GridSpec::centered(vec![48], vec![40.0], &[0.0], Boundary::Periodic)).unwrap())
    }

    #[test]
    fn overlap_limits() {
        let g = line();
        let a = init_gaussian(g.clone(), &[0.0], &[0.0], 3.0).unwrap();
        assert!((overlap(&a, &a).unwrap() - 1.0).norm() < 1e-10);
        let odd: Vec<Complex64> = g.coords(0).iter().map(|&x| Complex64::new(x * (-x * x / 8.0).exp(), 0.0)).collect();
        let odd = WaveField::new(g, odd, 0.0).unwrap();
        assert!(overlap(&a, &odd).unwrap().norm() < 1e-10);
    }

    #[test]
    fn literal_norm_is_one_half() {
        let g = line();
        let a = init_gaussian(g.clone(), &[-8.0], &[0.6], 3.0).unwrap();
        let b = init_gaussian(g, &[8.0], &[0.0], 2.8).unwrap();
        let t = symmetrize(&a, &b).unwrap();
        assert!(t.overlap.norm() > 1e-4);
        assert!((t.literal_norm_sq - 0.5).abs() < 1e-10);
        assert!((t.norm_squared() - 1.0).abs() < 1e-12);
        assert_eq!(t.exchange_asymmetry(), 0.0);
    }

    #[test]
    fn identical_orbitals_factorize() {
        let g = line();
        let a = init_gaussian(g.clone(), &[1.0], &[0.4], 3.0).unwrap();
        let t = symmetrize(&a, &a).unwrap();
        assert!((t.overlap - 1.0).norm() < 1e-10);
        assert!((t.norm_squared() - 1.0).abs() < 1e-10);
        let n = g.len();
        for i in (0..n).step_by(5) {
            for j in (0..n).step_by(7) {
                assert!((t.values[i * n + j] - a.values[i] * a.values[j]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn budget_is_enforced() {
        let g = line();
        let a = init_gaussian(g, &[0.0], &[0.0], 3.0).unwrap();
        assert!(matches!(symmetrize_with_budget(&a, &a, 1000), Err(CoreError::BudgetExceeded { .. })));
    }

    #[test]
    fn separated_pair_reduces_to_one_body_velocity() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![128], vec![64.0], &[0.0], Boundary::Periodic)).unwrap());
        let a = init_gaussian(g.clone(), &[-15.0], &[0.7], 2.0).unwrap();
        let b = init_gaussian(g.clone(), &[15.0], &[0.0], 2.0).unwrap();
        let t = symmetrize(&a, &b).unwrap();
        let cfg = PilotConfig::default();
        let cond = conditional_velocity(&t, Particle::One, &[15.0], &cfg).unwrap();
        let one = velocity_field(&a, &cfg).unwrap();
        let mut checked = 0;
        for (i, &x) in g.coords(0).iter().enumerate() {
            if (x + 15.0).abs() < 6.0 && !cond.node_mask[i] {
                assert!((cond.velocity[0][i] - one.velocity[0][i]).abs() < 1e-8);
                checked += 1;
            }
        }
        assert!(checked > 20);
    }

    #[test]
    fn conditional_velocities_respect_exchange() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![16], vec![12.0], &[0.0], Boundary::Periodic)).unwrap());
        let a = init_gaussian(g.clone(), &[-1.0], &[0.4], 2.5).unwrap();
        let b = init_gaussian(g.clone(), &[1.5], &[-0.2], 2.4).unwrap();
        let t = symmetrize(&a, &b).unwrap();
        let cfg = PilotConfig::default();
        let frozen = [0.37];
        let one = conditional_velocity(&t, Particle::One, &frozen, &cfg).unwrap();
        let two = conditional_velocity(&t, Particle::Two, &frozen, &cfg).unwrap();
        for (u, w) in one.velocity[0].iter().zip(&two.velocity[0]) {
            assert!((u - w).abs() < 1e-10);
        }
    }

    #[test]
    fn real_slices_have_no_velocity() {
        let g = line();
        let a = init_gaussian(g.clone(), &[-3.0], &[0.0], 3.0).unwrap();
        let b = init_gaussian(g, &[4.0], &[0.0], 3.0).unwrap();
        let t = symmetrize(&a, &b).unwrap();
        let v = conditional_velocity(&t, Particle::Two, &[1.0], &PilotConfig::default()).unwrap();
        assert!(v.velocity[0].iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn pair_pilot_matches_conditional_slices() {
        let g = Arc::new(make_grid(GridSpec::centered(vec![64], vec![40.0], &[0.0], Boundary::Periodic)).unwrap());
        let a = init_gaussian(g.clone(), &[-4.0], &[0.6], 3.0).unwrap();
        let b = init_gaussian(g.clone(), &[3.0], &[-0.1], 2.5).unwrap();
        let t = symmetrize(&a, &b).unwrap();
        let cfg = PilotConfig::default();
        let pair = PairPilot::new(&a, &b, &cfg).unwrap();
        let (x1, x2) = (g.coords(0)[28], g.coords(0)[35]);
        let mut v = [0.0; 2];
        assert!(!pair.velocity_into(&[x1, x2], &mut v).unwrap());
        let c1 = conditional_velocity(&t, Particle::One, &[x2], &cfg).unwrap();
        let c2 = conditional_velocity(&t, Particle::Two, &[x1], &cfg).unwrap();
        assert!((v[0] - c1.velocity[0][28]).abs() < 1e-9);
        assert!((v[1] - c2.velocity[0][35]).abs() < 1e-9);
    }
}
