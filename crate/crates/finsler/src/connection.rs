//! Formal Christoffel symbols, the non-linear Cartan connection and the
//! horizontal coefficients of the Cartan linear connection.

use crate::error::Result;
use crate::metric::{metric, ExtendedState, Geometry, MetricEval};
use crate::oracle::QField;

#[derive(Debug, Clone, PartialEq)]
pub struct Connections {
    pub dim: usize,
    /// Γᵃ_bc at (a·d + b)·d + c.
    pub gamma: Vec<f64>,
    /// Nᵃ_b = Γᵃ_bc yᶜ − Cᵃ_bc Γᶜ_pq yᵖ y^q, at a·d + b.
    pub n: Vec<f64>,
    /// Nᵃ_b = ½ ∂̄_b(Γᵃ_cd yᶜ yᵈ), at a·d + b.
    pub n_from_spray: Vec<f64>,
    /// Γ̃ᶜ_ab at (c·d + a)·d + b.
    pub gamma_tilde: Vec<f64>,
}

impl Connections {
    pub fn gamma(&self, a: usize, b: usize, c: usize) -> f64 {
        self.gamma[(a * self.dim + b) * self.dim + c]
    }

    pub fn n(&self, a: usize, b: usize) -> f64 {
        self.n[a * self.dim + b]
    }

    pub fn gamma_tilde(&self, c: usize, a: usize, b: usize) -> f64 {
        self.gamma_tilde[(c * self.dim + a) * self.dim + b]
    }

    /// Γᵃ_bc yᵇ yᶜ.
    pub fn spray(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d)
            .map(|a| (0..d).map(|b| (0..d).map(|c| self.gamma(a, b, c) * y[b] * y[c]).sum::<f64>()).sum())
            .collect()
    }

    /// Nᵃ_b yᵇ.
    pub fn n_contracted(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|a| (0..d).map(|b| self.n(a, b) * y[b]).sum()).collect()
    }

    /// Nᵃ_b yᵇ with N taken from the spray derivative.
    pub fn n_from_spray_contracted(&self, y: &[f64]) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|a| (0..d).map(|b| self.n_from_spray[a * d + b] * y[b]).sum()).collect()
    }
}

/// Γᵃ_bc = ½ gᵃᵈ(∂_b g_dc + ∂_c g_db − ∂_d g_bc).
pub fn christoffel(m: &MetricEval) -> Vec<f64> {
    let d = m.dim();
    let mut lowered = vec![0.0; d * d * d];
    for e in 0..d {
        for b in 0..d {
            for c in 0..d {
                lowered[(e * d + b) * d + c] = 0.5 * (m.dg_dx[b][(e, c)] + m.dg_dx[c][(e, b)] - m.dg_dx[e][(b, c)]);
            }
        }
    }
    let mut gamma = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            for c in 0..d {
                gamma[(a * d + b) * d + c] = (0..d).map(|e| m.g_inv[(a, e)] * lowered[(e * d + b) * d + c]).sum();
            }
        }
    }
    gamma
}

/// The non-linear connection from Γ and the Cartan tensor.
fn nonlinear_from_cartan(m: &MetricEval, gamma: &[f64], y: &[f64]) -> Vec<f64> {
    let d = m.dim();
    let gm = |a: usize, b: usize, c: usize| gamma[(a * d + b) * d + c];
    let spray: Vec<f64> = (0..d).map(|a| (0..d).map(|p| (0..d).map(|q| gm(a, p, q) * y[p] * y[q]).sum::<f64>()).sum()).collect();
    let mut n = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            let gy: f64 = (0..d).map(|c| gm(a, b, c) * y[c]).sum();
            let mut cg = 0.0;
            for c in 0..d {
                // Cᵃ_bc = gᵃᵉ C_ebc
                let c_up: f64 = (0..d).map(|e| m.g_inv[(a, e)] * m.cartan(e, b, c)).sum();
                cg += c_up * spray[c];
            }
            n[a * d + b] = gy - cg;
        }
    }
    n
}

/// ½ ∂̄_b(Γᵃ_cd yᶜ yᵈ), differentiating the inverse metric analytically.
/// The x-derivatives of g do not depend on y for this Λ.
fn nonlinear_from_spray(m: &MetricEval, y: &[f64]) -> Vec<f64> {
    let d = m.dim();
    let dx = |c: usize, a: usize, b: usize| m.dg_dx[c][(a, b)];
    // Φ_e = 2 ∂_c g_ed yᶜ yᵈ − ∂_e g_cd yᶜ yᵈ, so that Γᵃ_cd yᶜ yᵈ = ½ gᵃᵉ Φ_e.
    let phi: Vec<f64> = (0..d)
        .map(|e| {
            let mut s = 0.0;
            for c in 0..d {
                for k in 0..d {
                    s += (2.0 * dx(c, e, k) - dx(e, c, k)) * y[c] * y[k];
                }
            }
            s
        })
        .collect();
    let mut n = vec![0.0; d * d];
    for b in 0..d {
        // ∂̄_b Φ_e
        let dphi: Vec<f64> = (0..d)
            .map(|e| {
                let mut s = 0.0;
                for c in 0..d {
                    s += 2.0 * (dx(b, e, c) + dx(c, e, b)) * y[c] - 2.0 * dx(e, b, c) * y[c];
                }
                s
            })
            .collect();
        // ∂̄_b gᵃᵉ = −gᵃᵖ (∂̄_b g_pq) g^qe
        let dginv = -(&m.g_inv * &m.dg_dy[b] * &m.g_inv);
        for a in 0..d {
            let s: f64 = (0..d).map(|e| dginv[(a, e)] * phi[e] + m.g_inv[(a, e)] * dphi[e]).sum();
            n[a * d + b] = 0.25 * s;
        }
    }
    n
}

/// Γ̃ᶜ_ab = ½ gᶜᵠ(δ_a g_bq + δ_b g_aq − δ_q g_ab), δ_a = ∂_a − Nᵉ_a ∂̄_e.
fn horizontal(m: &MetricEval, n: &[f64]) -> Vec<f64> {
    let d = m.dim();
    // δ_a g_bq at (a·d + b)·d + q
    let mut dg = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            for q in 0..d {
                let vertical: f64 = (0..d).map(|e| n[e * d + a] * m.dg_dy[e][(b, q)]).sum();
                dg[(a * d + b) * d + q] = m.dg_dx[a][(b, q)] - vertical;
            }
        }
    }
    let dgi = |a: usize, b: usize, q: usize| dg[(a * d + b) * d + q];
    let mut out = vec![0.0; d * d * d];
    for c in 0..d {
        for a in 0..d {
            for b in 0..d {
                out[(c * d + a) * d + b] =
                    0.5 * (0..d).map(|q| m.g_inv[(c, q)] * (dgi(a, b, q) + dgi(b, a, q) - dgi(q, a, b))).sum::<f64>();
            }
        }
    }
    out
}

pub fn connections_from_metric(m: &MetricEval, y: &[f64]) -> Connections {
    let gamma = christoffel(m);
    let n = nonlinear_from_cartan(m, &gamma, y);
    let n_from_spray = nonlinear_from_spray(m, y);
    let gamma_tilde = horizontal(m, &n);
    Connections { dim: m.dim(), gamma, n, n_from_spray, gamma_tilde }
}

pub fn connections(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<Connections> {
    let m = metric(state, oracle, geom)?;
    Ok(connections_from_metric(&m, &state.y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticQ;

    fn bump() -> AnalyticQ {
        AnalyticQ::Bump { amplitude: -0.6, center: vec![0.2, -0.4], drift: vec![0.3, 0.1], width: 1.1, breathing: 0.3 }
    }

    #[test]
    fn flat_geometry_has_no_connection() {
        let s = ExtendedState::new(0.4, &[1.0, 2.0], 1.02, &[0.3, -0.8]);
        let c = connections(&s, &AnalyticQ::Constant { dim: 2, value: -0.7 }, &Geometry::default()).unwrap();
        assert!(c.gamma.iter().chain(&c.n).chain(&c.n_from_spray).chain(&c.gamma_tilde).all(|v| *v == 0.0));
    }

    #[test]
    fn the_two_nonlinear_connections_agree() {
        let s = ExtendedState::new(0.7, &[0.5, -0.1], 0.95, &[0.4, 0.9]);
        let c = connections(&s, &bump(), &Geometry::default()).unwrap();
        let scale = c.n.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in c.n.iter().zip(&c.n_from_spray) {
            assert!((a - b).abs() < 1e-12 * scale.max(1.0), "{a} vs {b}");
        }
        let ny = c.n_contracted(&s.y);
        for (u, v) in ny.iter().zip(c.spray(&s.y)) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn spray_derivative_matches_finite_differences() {
        let geom = Geometry::default();
        let s = ExtendedState::new(0.2, &[0.1, 0.3], 1.07, &[-0.6, 0.5]);
        let c = connections(&s, &bump(), &geom).unwrap();
        let d = s.dim();
        let h = 1e-5;
        for b in 0..d {
            let mut up = s.clone();
            up.y[b] += h;
            let mut dn = s.clone();
            dn.y[b] -= h;
            let su = connections(&up, &bump(), &geom).unwrap().spray(&up.y);
            let sd = connections(&dn, &bump(), &geom).unwrap().spray(&dn.y);
            for a in 0..d {
                let fd = 0.5 * (su[a] - sd[a]) / (2.0 * h);
                assert!((fd - c.n(a, b)).abs() < 1e-7, "N[{a}][{b}]: {fd} vs {}", c.n(a, b));
            }
        }
    }
}
