//! External potentials V(q).

use std::f64::consts::PI;

use rayon::prelude::*;

use crate::error::{CoreError, Result};
use crate::grid::Grid;

#[derive(Debug, Clone, PartialEq)]
pub enum PotentialSpec {
    Free,
    /// V = −Z/√(|q−R|² + a²).
    SoftCoulomb { center: Vec<f64>, charge: f64, softening: f64 },
    /// Opaque slab of height V₀ normal to `beam_axis`, pierced by slits
    /// along `transverse_axis`. Every edge is an error-function step of width s.
    SlabSlits {
        beam_axis: usize,
        transverse_axis: usize,
        plane: f64,
        thickness: f64,
        height: f64,
        slits: Vec<(f64, f64)>,
        smoothing: f64,
    },
    Sum(Vec<PotentialSpec>),
}

/// Smooth indicator of [lo, hi] and its derivative.
fn window(x: f64, lo: f64, hi: f64, s: f64) -> (f64, f64) {
    let a = (x - lo) / s;
    let b = (x - hi) / s;
    let value = 0.5 * (libm::erf(a) - libm::erf(b));
    let slope = ((-a * a).exp() - (-b * b).exp()) / (PI.sqrt() * s);
    (value, slope)
}

impl PotentialSpec {
    pub fn validate(&self, ndim: usize) -> Result<()> {
        match self {
            PotentialSpec::Free => Ok(()),
            PotentialSpec::SoftCoulomb { center, charge, softening } => {
                if center.len() != ndim {
                    return Err(CoreError::ShapeMismatch(format!("soft-Coulomb center is {}-d on a {ndim}-d grid", center.len())));
                }
                if !(*softening > 0.0) || !charge.is_finite() {
                    return Err(CoreError::InvalidParameter("soft-Coulomb needs a > 0 and finite Z".into()));
                }
                Ok(())
            }
            PotentialSpec::SlabSlits { beam_axis, transverse_axis, thickness, height, slits, smoothing, plane } => {
                if *beam_axis >= ndim || *transverse_axis >= ndim || beam_axis == transverse_axis {
                    return Err(CoreError::ShapeMismatch(format!(
                        "slab axes ({beam_axis}, {transverse_axis}) invalid on a {ndim}-d grid"
                    )));
                }
                if !(*height > 0.0 && *smoothing > 0.0 && *thickness > 0.0 && plane.is_finite()) {
                    return Err(CoreError::InvalidParameter("slab needs V0 > 0, s > 0 and thickness > 0".into()));
                }
                let mut sorted = slits.clone();
                sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
                for (lo, hi) in &sorted {
                    if !(lo < hi) {
                        return Err(CoreError::InvalidParameter(format!("empty slit [{lo}, {hi}]")));
                    }
                }
                for w in sorted.windows(2) {
                    if w[1].0 < w[0].1 {
                        return Err(CoreError::InvalidParameter("slit intervals overlap".into()));
                    }
                }
                Ok(())
            }
            PotentialSpec::Sum(parts) => parts.iter().try_for_each(|p| p.validate(ndim)),
        }
    }

    pub fn is_free(&self) -> bool {
        match self {
            PotentialSpec::Free => true,
            PotentialSpec::Sum(parts) => parts.iter().all(|p| p.is_free()),
            _ => false,
        }
    }

    /// V at a point. The caller is responsible for `validate`.
    pub fn value_at(&self, q: &[f64]) -> f64 {
        match self {
            PotentialSpec::Free => 0.0,
            PotentialSpec::SoftCoulomb { center, charge, softening } => {
                let r2: f64 = q.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                -charge / (r2 + softening * softening).sqrt()
            }
            PotentialSpec::SlabSlits { beam_axis, transverse_axis, plane, thickness, height, slits, smoothing } => {
                let (slab, _) = window(q[*beam_axis], plane - 0.5 * thickness, plane + 0.5 * thickness, *smoothing);
                let open: f64 = slits.iter().map(|&(lo, hi)| window(q[*transverse_axis], lo, hi, *smoothing).0).sum();
                height * slab * (1.0 - open)
            }
            PotentialSpec::Sum(parts) => parts.iter().map(|p| p.value_at(q)).sum(),
        }
    }

    /// Analytic ∇V at a point.
    pub fn gradient_at(&self, q: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; q.len()];
        self.add_gradient(q, &mut g);
        g
    }

    fn add_gradient(&self, q: &[f64], g: &mut [f64]) {
        match self {
            PotentialSpec::Free => {}
            PotentialSpec::SoftCoulomb { center, charge, softening } => {
                let r2: f64 = q.iter().zip(center).map(|(x, c)| (x - c) * (x - c)).sum();
                let d = (r2 + softening * softening).powf(1.5);
                for (a, gi) in g.iter_mut().enumerate() {
                    *gi += charge * (q[a] - center[a]) / d;
                }
            }
            PotentialSpec::SlabSlits { beam_axis, transverse_axis, plane, thickness, height, slits, smoothing } => {
                let (slab, dslab) = window(q[*beam_axis], plane - 0.5 * thickness, plane + 0.5 * thickness, *smoothing);
                let (mut open, mut dopen) = (0.0, 0.0);
                for &(lo, hi) in slits {
                    let (w, dw) = window(q[*transverse_axis], lo, hi, *smoothing);
                    open += w;
                    dopen += dw;
                }
                g[*beam_axis] += height * dslab * (1.0 - open);
                g[*transverse_axis] -= height * slab * dopen;
            }
            PotentialSpec::Sum(parts) => parts.iter().for_each(|p| p.add_gradient(q, g)),
        }
    }

    /// V on every grid node.
    pub fn evaluate(&self, grid: &Grid) -> Result<Vec<f64>> {
        self.validate(grid.ndim())?;
        if self.is_free() {
            return Ok(vec![0.0; grid.len()]);
        }
        let n = grid.ndim();
        let mut out = vec![0.0; grid.len()];
        out.par_iter_mut().enumerate().for_each(|(flat, v)| {
            let mut idx = [0usize; 8];
            grid.unravel(flat, &mut idx[..n]);
            let q: Vec<f64> = (0..n).map(|a| grid.coords(a)[idx[a]]).collect();
            *v = self.value_at(&q);
        });
        Ok(out)
    }

    /// ∇V at a point, checked against the grid's dimensionality.
    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.validate(q.len())?;
        Ok(self.gradient_at(q))
    }
}
