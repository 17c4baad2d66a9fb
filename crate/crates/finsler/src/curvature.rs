//! Non-linear and horizontal linear curvature by nested five-point central
//! differences of connection evaluations.

use crate::connection::{connections_from_metric, Connections};
use crate::error::{FinslerError, Result};
use crate::metric::{metric, ExtendedState, Geometry, MetricEval};
use crate::oracle::QField;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvatureSteps {
    pub h_x: f64,
    pub h_y: f64,
}

impl Default for CurvatureSteps {
    fn default() -> Self {
        CurvatureSteps { h_x: 1e-3, h_y: 1e-3 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curvatures {
    pub dim: usize,
    /// Rᵃ_bc at (a·d + b)·d + c.
    pub nonlinear: Vec<f64>,
    /// ˡRᵠ_cab at ((q·d + c)·d + a)·d + b.
    pub linear: Vec<f64>,
    /// R_ca = Σ_q ˡRᵠ_caq.
    pub ricci: Vec<f64>,
    pub scalar: f64,
}

impl Curvatures {
    pub fn nonlinear(&self, a: usize, b: usize, c: usize) -> f64 {
        self.nonlinear[(a * self.dim + b) * self.dim + c]
    }

    pub fn linear(&self, q: usize, c: usize, a: usize, b: usize) -> f64 {
        self.linear[((q * self.dim + c) * self.dim + a) * self.dim + b]
    }
}

fn evaluate(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<(MetricEval, Connections)> {
    let m = metric(state, oracle, geom)?;
    let c = connections_from_metric(&m, &state.y);
    Ok((m, c))
}

pub fn curvatures(state: &ExtendedState, oracle: &impl QField, geom: &Geometry, steps: CurvatureSteps) -> Result<Curvatures> {
    if !oracle.has_second_derivatives() {
        return Err(FinslerError::MissingSecondDerivatives);
    }
    let d = state.dim();
    let (m, conn) = evaluate(state, oracle, geom)?;

    // Fourth-order central differences of (N, Γ̃) along every x and y coordinate.
    let mut dn_x = Vec::with_capacity(d);
    let mut dn_y = Vec::with_capacity(d);
    let mut dgt_x = Vec::with_capacity(d);
    let mut dgt_y = Vec::with_capacity(d);
    for (vertical, h) in [(false, steps.h_x), (true, steps.h_y)] {
        for k in 0..d {
            let shifted = |sign: f64| {
                let mut s = state.clone();
                if vertical {
                    s.y[k] += sign * h;
                } else {
                    s.x[k] += sign * h;
                }
                evaluate(&s, oracle, geom).map(|(_, c)| c)
            };
            let [m2, m1, p1, p2] = [shifted(-2.0)?, shifted(-1.0)?, shifted(1.0)?, shifted(2.0)?];
            let stencil = |f: fn(&Connections) -> &Vec<f64>| -> Vec<f64> {
                (0..f(&p1).len())
                    .map(|i| (8.0 * (f(&p1)[i] - f(&m1)[i]) - (f(&p2)[i] - f(&m2)[i])) / (12.0 * h))
                    .collect()
            };
            let dn_k = stencil(|c| &c.n);
            let dgt_k = stencil(|c| &c.gamma_tilde);
            if vertical {
                dn_y.push(dn_k);
                dgt_y.push(dgt_k);
            } else {
                dn_x.push(dn_k);
                dgt_x.push(dgt_k);
            }
        }
    }
    // δ_c X = ∂_c X − Nᵉ_c ∂̄_e X
    let horizontal = |dx: &[Vec<f64>], dy: &[Vec<f64>], c: usize, idx: usize| -> f64 {
        dx[c][idx] - (0..d).map(|e| conn.n(e, c) * dy[e][idx]).sum::<f64>()
    };

    let mut nonlinear = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                let dc_nab = horizontal(&dn_x, &dn_y, c, a * d + b);
                let db_nac = horizontal(&dn_x, &dn_y, b, a * d + c);
                nonlinear[(a * d + b) * d + c] = dc_nab - db_nac;
            }
        }
    }
    let r = |a: usize, b: usize, c: usize| nonlinear[(a * d + b) * d + c];
    let gt = |c: usize, a: usize, b: usize| conn.gamma_tilde(c, a, b);
    let c_up = |q: usize, c: usize, k: usize| -> f64 { (0..d).map(|e| m.g_inv[(q, e)] * m.cartan(e, c, k)).sum() };

    let mut linear = vec![0.0; d * d * d * d];
    for q in 0..d {
        for c in 0..d {
            for a in 0..d {
                for b in 0..d {
                    let da = horizontal(&dgt_x, &dgt_y, a, (q * d + c) * d + b);
                    let db = horizontal(&dgt_x, &dgt_y, b, (q * d + c) * d + a);
                    let mut v = da - db;
                    for k in 0..d {
                        v += gt(q, k, a) * gt(k, c, b) - gt(q, k, b) * gt(k, c, a);
                        v -= c_up(q, c, k) * r(k, a, b);
                    }
                    linear[((q * d + c) * d + a) * d + b] = v;
                }
            }
        }
    }
    let mut ricci = vec![0.0; d * d];
    for c in 0..d {
        for a in 0..d {
            ricci[c * d + a] = (0..d).map(|q| linear[((q * d + c) * d + a) * d + q]).sum();
        }
    }
    let scalar = (0..d).map(|c| (0..d).map(|a| m.g_inv[(c, a)] * ricci[c * d + a]).sum::<f64>()).sum();
    Ok(Curvatures { dim: d, nonlinear, linear, ricci, scalar })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticQ;

    #[test]
    fn flat_space_is_flat() {
        let s = ExtendedState::new(0.0, &[0.3, 0.2], 1.0, &[0.5, 0.5]);
        let k = curvatures(&s, &AnalyticQ::Constant { dim: 2, value: -1.0 }, &Geometry::default(), CurvatureSteps::default()).unwrap();
        assert!(k.nonlinear.iter().chain(&k.linear).chain(&k.ricci).all(|v| v.abs() < 1e-10));
        assert!(k.scalar.abs() < 1e-10);
    }

    #[test]
    fn nonlinear_curvature_is_antisymmetric() {
        let q = AnalyticQ::Bump { amplitude: -0.8, center: vec![0.0], drift: vec![0.2], width: 1.0, breathing: 0.1 };
        let s = ExtendedState::new(0.3, &[0.4], 1.04, &[0.7]);
        let k = curvatures(&s, &q, &Geometry::default(), CurvatureSteps::default()).unwrap();
        for a in 0..2 {
            for b in 0..2 {
                for c in 0..2 {
                    assert_eq!(k.nonlinear(a, b, c), -k.nonlinear(a, c, b));
                }
            }
        }
    }
}
