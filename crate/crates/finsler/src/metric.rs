//! Λ(x, y) = T(q̇)/y⁰ − Q'(x)·y⁰ and the tensors derived from Λ².

use nalgebra::DMatrix;

use crate::error::{FinslerError, Result};
use crate::oracle::{QField, QSample};

/// A point of the tangent bundle: x = (t, q), y = (y⁰, q̇).
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedState {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl ExtendedState {
    pub fn new(t: f64, q: &[f64], y0: f64, qdot: &[f64]) -> Self {
        ExtendedState {
            x: std::iter::once(t).chain(q.iter().cloned()).collect(),
            y: std::iter::once(y0).chain(qdot.iter().cloned()).collect(),
        }
    }

    /// Number of extended coordinates (spatial dimension + 1).
    pub fn dim(&self) -> usize {
        self.x.len()
    }

    pub fn t(&self) -> f64 {
        self.x[0]
    }

    pub fn q(&self) -> &[f64] {
        &self.x[1..]
    }

    pub fn y0(&self) -> f64 {
        self.y[0]
    }

    pub fn qdot(&self) -> &[f64] {
        &self.y[1..]
    }

    pub fn speed(&self) -> f64 {
        self.qdot().iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// dq/dt.
    pub fn physical_velocity(&self) -> Vec<f64> {
        self.qdot().iter().map(|v| v / self.y0()).collect()
    }
}

/// Constants of the geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct Geometry {
    /// One mass per spatial coordinate; empty means unit masses.
    pub masses: Vec<f64>,
    pub v_min: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Geometry { masses: Vec::new(), v_min: 1e-3 }
    }
}

impl Geometry {
    pub fn mass(&self, i: usize) -> f64 {
        self.masses.get(i).copied().unwrap_or(1.0)
    }

    pub fn kinetic(&self, qdot: &[f64]) -> f64 {
        0.5 * qdot.iter().enumerate().map(|(i, v)| self.mass(i) * v * v).sum::<f64>()
    }

    pub fn check(&self, state: &ExtendedState) -> Result<()> {
        if !(state.y0() > 0.0) {
            return Err(FinslerError::NonPositiveY0(state.y0()));
        }
        let speed = state.speed();
        if !(speed > self.v_min) {
            return Err(FinslerError::SlowVelocity { speed, v_min: self.v_min });
        }
        Ok(())
    }
}

/// Λ from T, Q' and y⁰.
pub fn lambda_value(t_kin: f64, q_prime: f64, y0: f64) -> f64 {
    t_kin / y0 - q_prime * y0
}

pub fn lambda_fn(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<f64> {
    if !(state.y0() > 0.0) {
        return Err(FinslerError::NonPositiveY0(state.y0()));
    }
    let s = oracle.sample(state.t(), state.q())?;
    Ok(lambda_value(geom.kinetic(state.qdot()), s.value, state.y0()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEval {
    pub lambda: f64,
    pub q: QSample,
    pub g: DMatrix<f64>,
    pub g_inv: DMatrix<f64>,
    /// ∂g/∂xᶜ for each c.
    pub dg_dx: Vec<DMatrix<f64>>,
    /// ∂g/∂yᶜ for each c; equals 2·C_{··c}.
    pub dg_dy: Vec<DMatrix<f64>>,
    pub det: f64,
}

impl MetricEval {
    pub fn dim(&self) -> usize {
        self.g.nrows()
    }

    /// C_abc = ¼ ∂³Λ²/∂yᵃ∂yᵇ∂yᶜ.
    pub fn cartan(&self, a: usize, b: usize, c: usize) -> f64 {
        0.5 * self.dg_dy[c][(a, b)]
    }
}

/// g_ab = ½ ∂²Λ²/∂yᵃ∂yᵇ at given y and Q'.
pub fn metric_matrix(y: &[f64], q_prime: f64, geom: &Geometry) -> DMatrix<f64> {
    let d = y.len();
    let y0 = y[0];
    let v = &y[1..];
    let t = geom.kinetic(v);
    DMatrix::from_fn(d, d, |a, b| match (a, b) {
        (0, 0) => 3.0 * t * t / y0.powi(4) + q_prime * q_prime,
        (0, j) | (j, 0) => -2.0 * t * geom.mass(j - 1) * v[j - 1] / y0.powi(3),
        (i, j) => {
            let (mi, mj) = (geom.mass(i - 1), geom.mass(j - 1));
            let diag = if i == j { (t / (y0 * y0) - q_prime) * mi } else { 0.0 };
            diag + mi * mj * v[i - 1] * v[j - 1] / (y0 * y0)
        }
    })
}

/// ∂g/∂yᶜ.
fn metric_y_derivative(y: &[f64], c: usize, geom: &Geometry) -> DMatrix<f64> {
    let d = y.len();
    let y0 = y[0];
    let v = &y[1..];
    let t = geom.kinetic(v);
    let m = |i: usize| geom.mass(i);
    let delta = |i: usize, j: usize| if i == j { 1.0 } else { 0.0 };
    if c == 0 {
        DMatrix::from_fn(d, d, |a, b| match (a, b) {
            (0, 0) => -12.0 * t * t / y0.powi(5),
            (0, j) | (j, 0) => 6.0 * t * m(j - 1) * v[j - 1] / y0.powi(4),
            (i, j) => -2.0 * (t * m(i - 1) * delta(i, j) + m(i - 1) * m(j - 1) * v[i - 1] * v[j - 1]) / y0.powi(3),
        })
    } else {
        let k = c - 1;
        let pk = m(k) * v[k];
        DMatrix::from_fn(d, d, |a, b| match (a, b) {
            (0, 0) => 6.0 * t * pk / y0.powi(4),
            (0, j) | (j, 0) => {
                let i = j - 1;
                -2.0 * m(i) * (pk * v[i] + t * delta(i, k)) / y0.powi(3)
            }
            (i, j) => {
                let (i, j) = (i - 1, j - 1);
                (pk * m(i) * delta(i, j) + m(i) * m(j) * (delta(i, k) * v[j] + v[i] * delta(j, k))) / (y0 * y0)
            }
        })
    }
}

/// ∂g/∂Q'; g depends on x only through Q', and this factor is independent of y.
pub fn metric_q_derivative(d: usize, q_prime: f64, geom: &Geometry) -> DMatrix<f64> {
    DMatrix::from_fn(d, d, |a, b| match (a, b) {
        (0, 0) => 2.0 * q_prime,
        (i, j) if i == j => -geom.mass(i - 1),
        _ => 0.0,
    })
}

pub fn metric(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<MetricEval> {
    let s = oracle.sample(state.t(), state.q())?;
    metric_from_sample(state, s, geom)
}

pub fn metric_from_sample(state: &ExtendedState, q: QSample, geom: &Geometry) -> Result<MetricEval> {
    geom.check(state)?;
    let d = state.dim();
    if q.grad.len() + 1 != d {
        return Err(FinslerError::Shape(format!("{}-d oracle for a {d}-d extended state", q.grad.len())));
    }
    let g = metric_matrix(&state.y, q.value, geom);
    let det = g.determinant();
    let scale = g.amax().powi(d as i32);
    if !(det.abs() > 1e-12 * scale) {
        return Err(FinslerError::DegenerateMetric { det, scale });
    }
    let g_inv = g.clone().try_inverse().ok_or(FinslerError::DegenerateMetric { det, scale })?;
    let dq = metric_q_derivative(d, q.value, geom);
    let dg_dx = q.extended_gradient().iter().map(|&c| &dq * c).collect();
    let dg_dy = (0..d).map(|c| metric_y_derivative(&state.y, c, geom)).collect();
    let lambda = lambda_value(geom.kinetic(state.qdot()), q.value, state.y0());
    Ok(MetricEval { lambda, q, g, g_inv, dg_dx, dg_dy, det })
}

/// C_abc, flattened as (a·d + b)·d + c.
pub fn cartan_tensor(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<Vec<f64>> {
    let m = metric(state, oracle, geom)?;
    let d = m.dim();
    let mut c = vec![0.0; d * d * d];
    for a in 0..d {
        for b in 0..d {
            for e in 0..d {
                c[(a * d + b) * d + e] = m.cartan(a, b, e);
            }
        }
    }
    Ok(c)
}

/// Λ² at (y, Q'), for finite-difference cross-checks.
pub fn lambda_squared(y: &[f64], q_prime: f64, geom: &Geometry) -> f64 {
    lambda_value(geom.kinetic(&y[1..]), q_prime, y[0]).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticQ;

    fn flat(n: usize, q: f64) -> AnalyticQ {
        AnalyticQ::Constant { dim: n, value: q }
    }

    #[test]
    fn lambda_examples() {
        let g = Geometry::default();
        // T = 0.5 with unit speed.
        let s = ExtendedState::new(0.0, &[0.0], 1.0, &[1.0]);
        assert_eq!(lambda_fn(&s, &flat(1, -1.0), &g).unwrap(), 1.5);
        let s2 = ExtendedState::new(0.0, &[0.0], 2.0, &[2.0]);
        assert_eq!(lambda_fn(&s2, &flat(1, -1.0), &g).unwrap(), 3.0);
        let v = 0.7;
        let s3 = ExtendedState::new(0.0, &[0.0], 1.3, &[v]);
        assert!((lambda_fn(&s3, &flat(1, 0.0), &g).unwrap() - v * v / (2.0 * 1.3)).abs() < 1e-15);
        let bad = ExtendedState::new(0.0, &[0.0], 0.0, &[1.0]);
        assert!(matches!(lambda_fn(&bad, &flat(1, 0.0), &g), Err(FinslerError::NonPositiveY0(_))));
    }

    #[test]
    fn one_dimensional_free_metric() {
        let v = 0.8;
        let s = ExtendedState::new(0.0, &[0.0], 1.0, &[v]);
        let m = metric(&s, &flat(1, 0.0), &Geometry::default()).unwrap();
        assert!((m.g[(1, 1)] - 1.5 * v * v).abs() < 1e-15);
    }

    #[test]
    fn cross_term_contributes_minus_q_m() {
        let geom = Geometry { masses: vec![1.0, 2.5], v_min: 1e-3 };
        let y = [1.05, 0.4, -0.9];
        let q = 0.37;
        let with = metric_matrix(&y, q, &geom);
        let without = metric_matrix(&y, 0.0, &geom);
        for i in 1..3 {
            assert!((with[(i, i)] - without[(i, i)] + q * geom.mass(i - 1)).abs() < 1e-14);
        }
    }

    #[test]
    fn euler_identity_and_cartan_contraction() {
        let geom = Geometry::default();
        let s = ExtendedState::new(0.0, &[0.0, 0.0], 0.93, &[0.6, -0.3]);
        let m = metric(&s, &flat(2, -0.4), &geom).unwrap();
        let y = nalgebra::DVector::from_column_slice(&s.y);
        let gyy = (y.transpose() * &m.g * &y)[(0, 0)];
        assert!((gyy - m.lambda * m.lambda).abs() < 1e-12 * gyy.abs());
        for a in 0..3 {
            for b in 0..3 {
                let cy: f64 = (0..3).map(|c| m.cartan(a, b, c) * s.y[c]).sum();
                assert!(cy.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn slow_states_are_rejected() {
        let s = ExtendedState::new(0.0, &[0.0], 1.0, &[1e-4]);
        assert!(matches!(metric(&s, &flat(1, 0.0), &Geometry::default()), Err(FinslerError::SlowVelocity { .. })));
    }
}
