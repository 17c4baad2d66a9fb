//! Diagnostic checks that Λ is an admissible Finsler function at a state:
//! degree-one homogeneity, positivity, and the bordered-Hessian convexity
//! test with its sufficient and energy conditions.

use std::fmt;

use crate::error::Result;
use crate::metric::{lambda_value, ExtendedState, Geometry};
use crate::oracle::QField;

pub const GAUGE_NOTE: &str = "a negative Λ can be shifted by a total derivative dS(x)/dτ without changing geodesics";

const SCALES: [f64; 4] = [0.5, 2.0, 3.0, 10.0];

/// Bordered-determinant test in the (y⁰, q̇ᵢ) plane.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisCheck {
    pub axis: usize,
    /// det of the bordered Hessian with the exact ∂²Λ/∂(y⁰)² = 2T/(y⁰)³.
    pub bordered: f64,
    /// Same determinant with ∂²Λ/∂(y⁰)² = T/(y⁰)³ in place of the exact entry.
    pub bordered_halved: f64,
    /// Q' < u(1 − √2), u = mᵢ(q̇ⁱ)²/(2(y⁰)²).
    pub sufficient: bool,
}

impl AxisCheck {
    pub fn negative(&self) -> bool {
        self.bordered < 0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdmissibilityReport {
    pub lambda: f64,
    pub q_prime: f64,
    /// max over k of |Λ(x, ky) − kΛ(x, y)|.
    pub homogeneity_residual: f64,
    pub positive: bool,
    pub gauge_note: &'static str,
    pub axes: Vec<AxisCheck>,
    /// T/(y⁰)² + Q' < 0.
    pub energy_condition: bool,
}

impl AdmissibilityReport {
    pub fn convex(&self) -> bool {
        self.axes.iter().all(AxisCheck::negative)
    }
}

impl fmt::Display for AdmissibilityReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mark = |b: bool| if b { "pass" } else { "fail" };
        writeln!(f, "Lambda = {:.6e}, Q' = {:.6e}", self.lambda, self.q_prime)?;
        writeln!(f, "homogeneity residual {:.3e}", self.homogeneity_residual)?;
        writeln!(f, "positivity {} ({})", mark(self.positive), self.gauge_note)?;
        for a in &self.axes {
            writeln!(
                f,
                "axis {}: bordered det {:.6e} ({}), with halved y0 entry {:.6e}, sufficient inequality {}",
                a.axis,
                a.bordered,
                mark(a.negative()),
                a.bordered_halved,
                mark(a.sufficient)
            )?;
        }
        write!(f, "energy condition {}", mark(self.energy_condition))
    }
}

/// det [[a, b, p], [b, c, r], [p, r, 0]].
pub fn bordered_det(a: f64, b: f64, c: f64, p: f64, r: f64) -> f64 {
    -a * r * r + 2.0 * b * p * r - c * p * p
}

pub fn check_admissibility(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<AdmissibilityReport> {
    let sample = oracle.sample(state.t(), state.q())?;
    let qp = sample.value;
    let y0 = state.y0();
    let t_kin = geom.kinetic(state.qdot());
    let lambda = lambda_value(t_kin, qp, y0);
    let homogeneity_residual = SCALES
        .iter()
        .map(|&k| {
            let scaled: Vec<f64> = state.qdot().iter().map(|v| k * v).collect();
            (lambda_value(geom.kinetic(&scaled), qp, k * y0) - k * lambda).abs()
        })
        .fold(0.0, f64::max);

    let axes = state
        .qdot()
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            let m = geom.mass(i);
            let l0 = -t_kin / (y0 * y0) - qp;
            let li = m * v / y0;
            let l0i = -m * v / (y0 * y0);
            let lii = m / y0;
            let l00 = 2.0 * t_kin / y0.powi(3);
            let u = 0.5 * m * v * v / (y0 * y0);
            AxisCheck {
                axis: i,
                bordered: bordered_det(l00, l0i, lii, l0, li),
                bordered_halved: bordered_det(0.5 * l00, l0i, lii, l0, li),
                sufficient: qp < u * (1.0 - 2f64.sqrt()),
            }
        })
        .collect();
    Ok(AdmissibilityReport {
        lambda,
        q_prime: qp,
        homogeneity_residual,
        positive: lambda > 0.0,
        gauge_note: GAUGE_NOTE,
        axes,
        energy_condition: t_kin / (y0 * y0) + qp < 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticQ;

    fn report(qp: f64) -> AdmissibilityReport {
        let s = ExtendedState::new(0.0, &[0.0], 1.0, &[1.0]);
        check_admissibility(&s, &AnalyticQ::Constant { dim: 1, value: qp }, &Geometry::default()).unwrap()
    }

    #[test]
    fn deep_well_passes() {
        let r = report(-10.0);
        assert!(r.energy_condition && r.convex() && r.positive);
        assert!(r.axes[0].sufficient);
        assert!(r.axes[0].bordered_halved < 0.0);
        assert!(r.homogeneity_residual < 1e-13);
    }

    #[test]
    fn repulsive_q_fails_energy_condition() {
        let r = report(1.0);
        assert!(!r.energy_condition);
        assert!(!r.axes[0].sufficient);
    }

    #[test]
    fn one_dimensional_closed_form() {
        // det = −(m/y⁰)(T/(y⁰)² − Q')² in 1D.
        let geom = Geometry::default();
        let s = ExtendedState::new(0.0, &[0.0], 1.2, &[0.7]);
        let qp = -0.3;
        let r = check_admissibility(&s, &AnalyticQ::Constant { dim: 1, value: qp }, &geom).unwrap();
        let t = geom.kinetic(s.qdot());
        let expected = -(1.0 / 1.2) * (t / 1.44 - qp).powi(2);
        assert!((r.axes[0].bordered - expected).abs() < 1e-13);
    }
}
