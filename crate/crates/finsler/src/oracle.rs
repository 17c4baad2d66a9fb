//! Sources of the (generalized) quantum potential Q'(t, q).

use std::sync::Arc;

use qtraj_core::pilot::PilotField;
use qtraj_core::PotentialSpec;

use crate::error::{FinslerError, Result};

/// Q' and its derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct QSample {
    pub value: f64,
    /// ∂Q'/∂q.
    pub grad: Vec<f64>,
    /// ∂Q'/∂t.
    pub dt: f64,
    /// ∂²Q'/∂q∂q, row-major.
    pub hessian: Option<Vec<f64>>,
}

impl QSample {
    /// (∂ₜQ', ∇Q'), indexed like the extended coordinates.
    pub fn extended_gradient(&self) -> Vec<f64> {
        std::iter::once(self.dt).chain(self.grad.iter().cloned()).collect()
    }
}

pub trait QField: Sync {
    fn dim(&self) -> usize;

    fn sample(&self, t: f64, q: &[f64]) -> Result<QSample>;

    fn contains(&self, _t: f64, _q: &[f64]) -> bool {
        true
    }

    fn has_second_derivatives(&self) -> bool {
        true
    }
}

impl<F: QField + ?Sized> QField for &F {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn sample(&self, t: f64, q: &[f64]) -> Result<QSample> {
        (**self).sample(t, q)
    }
    fn contains(&self, t: f64, q: &[f64]) -> bool {
        (**self).contains(t, q)
    }
    fn has_second_derivatives(&self) -> bool {
        (**self).has_second_derivatives()
    }
}

/// Closed-form test fields.
#[derive(Debug, Clone, PartialEq)]
pub enum AnalyticQ {
    Constant { dim: usize, value: f64 },
    /// A(1 + β sin t)·exp(−|q − c − u t|²/(2w²)).
    Bump { amplitude: f64, center: Vec<f64>, drift: Vec<f64>, width: f64, breathing: f64 },
    /// Quantum potential of a freely spreading Gaussian packet (unit mass).
    FreeGaussian { sigma: f64, center: Vec<f64>, k0: Vec<f64> },
    /// ½ Σ κᵢ qᵢ².
    Quadratic { curvature: Vec<f64> },
}

impl QField for AnalyticQ {
    fn dim(&self) -> usize {
        match self {
            AnalyticQ::Constant { dim, .. } => *dim,
            AnalyticQ::Bump { center, .. } | AnalyticQ::FreeGaussian { center, .. } => center.len(),
            AnalyticQ::Quadratic { curvature } => curvature.len(),
        }
    }

    fn sample(&self, t: f64, q: &[f64]) -> Result<QSample> {
        let n = self.dim();
        if q.len() != n {
            return Err(FinslerError::Shape(format!("{}-d point for a {n}-d field", q.len())));
        }
        let mut hess = vec![0.0; n * n];
        let s = match self {
            AnalyticQ::Constant { value, .. } => QSample { value: *value, grad: vec![0.0; n], dt: 0.0, hessian: None },
            AnalyticQ::Bump { amplitude, center, drift, width, breathing } => {
                let w2 = width * width;
                let u: Vec<f64> = (0..n).map(|i| q[i] - center[i] - drift[i] * t).collect();
                let r2: f64 = u.iter().map(|x| x * x).sum();
                let e = (-r2 / (2.0 * w2)).exp();
                let value = amplitude * (1.0 + breathing * t.sin()) * e;
                let grad: Vec<f64> = u.iter().map(|ui| -value * ui / w2).collect();
                for i in 0..n {
                    for j in 0..n {
                        hess[i * n + j] = value * (u[i] * u[j] / (w2 * w2) - if i == j { 1.0 / w2 } else { 0.0 });
                    }
                }
                let ud: f64 = u.iter().zip(drift).map(|(a, b)| a * b).sum();
                let dt = amplitude * breathing * t.cos() * e + value * ud / w2;
                QSample { value, grad, dt, hessian: None }
            }
            AnalyticQ::FreeGaussian { sigma, center, k0 } => {
                let s2 = sigma * sigma;
                let st = s2 * (1.0 + (t / (2.0 * s2)).powi(2));
                let dst = t / (2.0 * s2);
                let u: Vec<f64> = (0..n).map(|i| q[i] - center[i] - k0[i] * t).collect();
                let r2: f64 = u.iter().map(|x| x * x).sum();
                let uk: f64 = u.iter().zip(k0).map(|(a, b)| a * b).sum();
                let nf = n as f64;
                let value = nf / (4.0 * st) - r2 / (8.0 * st * st);
                let grad: Vec<f64> = u.iter().map(|ui| -ui / (4.0 * st * st)).collect();
                for i in 0..n {
                    hess[i * n + i] = -1.0 / (4.0 * st * st);
                }
                let dt = -nf * dst / (4.0 * st * st) + uk / (4.0 * st * st) + r2 * dst / (4.0 * st * st * st);
                QSample { value, grad, dt, hessian: None }
            }
            AnalyticQ::Quadratic { curvature } => {
                let value = 0.5 * (0..n).map(|i| curvature[i] * q[i] * q[i]).sum::<f64>();
                let grad = (0..n).map(|i| curvature[i] * q[i]).collect();
                for i in 0..n {
                    hess[i * n + i] = curvature[i];
                }
                QSample { value, grad, dt: 0.0, hessian: None }
            }
        };
        Ok(QSample { hessian: Some(hess), ..s })
    }
}

/// Q' + c. A constant shift adds c·y⁰ = d(c·t)/dτ to Λ, a total
/// derivative, so geodesics in coordinate time are unchanged while Λ and
/// the metric conditioning are not.
#[derive(Debug, Clone)]
pub struct Shifted<F> {
    pub inner: F,
    pub offset: f64,
}

impl<F: QField> QField for Shifted<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, t: f64, q: &[f64]) -> Result<QSample> {
        let mut s = self.inner.sample(t, q)?;
        s.value += self.offset;
        Ok(s)
    }

    fn contains(&self, t: f64, q: &[f64]) -> bool {
        self.inner.contains(t, q)
    }

    fn has_second_derivatives(&self) -> bool {
        self.inner.has_second_derivatives()
    }
}

/// Q' = Q + V for a static potential V.
#[derive(Debug, Clone)]
pub struct Folded<F> {
    pub inner: F,
    pub potential: PotentialSpec,
}

/// Central-difference Hessian of a static potential from its analytic gradient.
pub fn potential_hessian(v: &PotentialSpec, q: &[f64]) -> Vec<f64> {
    let n = q.len();
    let h = 1e-5;
    let mut out = vec![0.0; n * n];
    let mut p = q.to_vec();
    for j in 0..n {
        p[j] = q[j] + h;
        let up = v.gradient_at(&p);
        p[j] = q[j] - h;
        let dn = v.gradient_at(&p);
        p[j] = q[j];
        for i in 0..n {
            out[i * n + j] = (up[i] - dn[i]) / (2.0 * h);
        }
    }
    for i in 0..n {
        for j in 0..i {
            let m = 0.5 * (out[i * n + j] + out[j * n + i]);
            out[i * n + j] = m;
            out[j * n + i] = m;
        }
    }
    out
}

impl<F: QField> QField for Folded<F> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn sample(&self, t: f64, q: &[f64]) -> Result<QSample> {
        let mut s = self.inner.sample(t, q)?;
        s.value += self.potential.value_at(q);
        for (g, dv) in s.grad.iter_mut().zip(self.potential.gradient_at(q)) {
            *g += dv;
        }
        if let Some(h) = s.hessian.as_mut() {
            for (a, b) in h.iter_mut().zip(potential_hessian(&self.potential, q)) {
                *a += b;
            }
        }
        Ok(s)
    }

    fn contains(&self, t: f64, q: &[f64]) -> bool {
        self.inner.contains(t, q)
    }

    fn has_second_derivatives(&self) -> bool {
        self.inner.has_second_derivatives()
    }
}

/// Q from a time-ordered sequence of pilot fields: values, gradients and
/// Hessians are linear in time between snapshots, ∂ₜQ is the forward
/// difference across the bracketing pair. Outside the covered interval
/// the nearest pair is extrapolated.
#[derive(Debug, Clone)]
pub struct SnapshotSeries {
    snapshots: Vec<Arc<PilotField>>,
}

impl SnapshotSeries {
    pub fn new(snapshots: Vec<Arc<PilotField>>) -> Result<Self> {
        if snapshots.len() < 2 {
            return Err(FinslerError::Shape("a snapshot oracle needs at least two pilot fields".into()));
        }
        for w in snapshots.windows(2) {
            if !(w[1].time > w[0].time) {
                return Err(FinslerError::Shape(format!("snapshot times {} and {} are not increasing", w[0].time, w[1].time)));
            }
            if *w[0].grid != *w[1].grid {
                return Err(FinslerError::Shape("snapshots live on different grids".into()));
            }
        }
        Ok(SnapshotSeries { snapshots })
    }

    pub fn pair(a: Arc<PilotField>, b: Arc<PilotField>) -> Result<Self> {
        Self::new(vec![a, b])
    }

    pub fn span(&self) -> (f64, f64) {
        (self.snapshots[0].time, self.snapshots[self.snapshots.len() - 1].time)
    }

    fn bracket(&self, t: f64) -> usize {
        let k = self.snapshots.partition_point(|s| s.time <= t);
        k.clamp(1, self.snapshots.len() - 1) - 1
    }
}

impl QField for SnapshotSeries {
    fn dim(&self) -> usize {
        self.snapshots[0].grid.ndim()
    }

    fn sample(&self, t: f64, q: &[f64]) -> Result<QSample> {
        if !self.contains(t, q) {
            return Err(FinslerError::OutOfDomain { t, q: q.to_vec() });
        }
        let k = self.bracket(t);
        let (a, b) = (&self.snapshots[k], &self.snapshots[k + 1]);
        let span = b.time - a.time;
        let w = (t - a.time) / span;
        let n = q.len();
        let qa = a.sample_q(q)?;
        let qb = b.sample_q(q)?;
        let mut ga = vec![0.0; n];
        let mut gb = vec![0.0; n];
        a.sample_grad_q(q, &mut ga)?;
        b.sample_grad_q(q, &mut gb)?;
        let hessian = if a.hess_q.is_some() && b.hess_q.is_some() {
            let mut ha = vec![0.0; n * n];
            let mut hb = vec![0.0; n * n];
            a.sample_hessian(q, &mut ha)?;
            b.sample_hessian(q, &mut hb)?;
            Some(ha.iter().zip(&hb).map(|(x, y)| x + w * (y - x)).collect())
        } else {
            None
        };
        Ok(QSample {
            value: qa + w * (qb - qa),
            grad: ga.iter().zip(&gb).map(|(x, y)| x + w * (y - x)).collect(),
            dt: (qb - qa) / span,
            hessian,
        })
    }

    fn contains(&self, _t: f64, q: &[f64]) -> bool {
        self.snapshots[0].grid.in_interior(q)
    }

    fn has_second_derivatives(&self) -> bool {
        self.snapshots.iter().all(|s| s.hess_q.is_some())
    }
}
