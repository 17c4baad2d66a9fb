//! Geodesics of Λ, parametrised by τ and integrated with RK4 on (x, y, s),
//! where s accumulates ∫Λ dτ.
//!
//! A static potential V can either be folded into Q' (see [`Folded`]) or
//! kept as an external force. The force form is the Euler–Lagrange equation
//! of Λ_Q − V·y⁰ rewritten around the geodesic spray of Λ_Q:
//!
//! ẍᵃ = −Γᵃ_bc yᵇyᶜ + Λ_Q gᵃᵇ f_b + κ yᵃ,  f = (∇V·q̇, −y⁰∇V),
//! κ = (y⁰ ∇V·q̇ + V B⁰) / (Λ_Q − V y⁰),
//!
//! with B the first two terms. It reproduces the folded geodesic exactly.
//!
//! [`Folded`]: crate::oracle::Folded

use qtraj_core::{PotentialSpec, Provenance, TrajectoryBundle, TrajectoryKind};

use crate::connection::connections_from_metric;
use crate::error::{FinslerError, Result};
use crate::metric::{metric, ExtendedState, Geometry};
use crate::oracle::QField;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Form {
    /// ẍ = −Γᵃ_bc yᵇ yᶜ
    Gamma,
    /// ẍ = −Nᵃ_b yᵇ, N = ½∂̄(Γyy) evaluated independently of Γ
    N,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeodesicConfig {
    pub dtau: f64,
    pub form: Form,
    pub geometry: Geometry,
    /// Static potential applied as a force instead of folded into Q'.
    pub potential: Option<PotentialSpec>,
    pub max_halvings: usize,
}

impl Default for GeodesicConfig {
    fn default() -> Self {
        GeodesicConfig { dtau: 1e-2, form: Form::Gamma, geometry: Geometry::default(), potential: None, max_halvings: 10 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub state: ExtendedState,
    /// Increment of s = ∫Λ dτ over the step.
    pub ds: f64,
    /// The τ step actually taken.
    pub dtau: f64,
    pub halvings: usize,
}

/// (ẍ, Λ) at a state, Λ including −V·y⁰ when V is a force.
fn rhs(state: &ExtendedState, oracle: &impl QField, cfg: &GeodesicConfig) -> Result<(Vec<f64>, f64)> {
    if !oracle.contains(state.t(), state.q()) {
        return Err(FinslerError::OutOfDomain { t: state.t(), q: state.q().to_vec() });
    }
    let m = metric(state, oracle, &cfg.geometry)?;
    let conn = connections_from_metric(&m, &state.y);
    let y = &state.y;
    let mut acc: Vec<f64> = match cfg.form {
        Form::Gamma => conn.spray(y),
        Form::N => conn.n_from_spray_contracted(y),
    }
    .into_iter()
    .map(|v| -v)
    .collect();
    let Some(v) = &cfg.potential else {
        return Ok((acc, m.lambda));
    };
    let q = state.q();
    let y0 = state.y0();
    let vq = v.value_at(q);
    let grad = v.gradient_at(q);
    let power: f64 = grad.iter().zip(state.qdot()).map(|(g, u)| g * u).sum();
    let f: Vec<f64> = std::iter::once(power).chain(grad.iter().map(|g| -y0 * g)).collect();
    let d = state.dim();
    for (a, acc_a) in acc.iter_mut().enumerate() {
        *acc_a += m.lambda * (0..d).map(|b| m.g_inv[(a, b)] * f[b]).sum::<f64>();
    }
    let lambda = m.lambda - vq * y0;
    if !(lambda.abs() > 0.0) {
        return Err(FinslerError::DegenerateMetric { det: lambda, scale: m.lambda.abs() });
    }
    let kappa = (y0 * power + vq * acc[0]) / lambda;
    for (acc_a, ya) in acc.iter_mut().zip(y) {
        *acc_a += kappa * ya;
    }
    Ok((acc, lambda))
}

fn rk4(state: &ExtendedState, oracle: &impl QField, cfg: &GeodesicConfig, h: f64) -> Result<(ExtendedState, f64)> {
    let d = state.dim();
    let shift = |dx: &[f64], dy: &[f64], c: f64| ExtendedState {
        x: state.x.iter().zip(dx).map(|(x, v)| x + c * v).collect(),
        y: state.y.iter().zip(dy).map(|(y, a)| y + c * a).collect(),
    };
    let (a1, l1) = rhs(state, oracle, cfg)?;
    let v1 = state.y.clone();
    let s2 = shift(&v1, &a1, 0.5 * h);
    let (a2, l2) = rhs(&s2, oracle, cfg)?;
    let s3 = shift(&s2.y, &a2, 0.5 * h);
    let (a3, l3) = rhs(&s3, oracle, cfg)?;
    let s4 = shift(&s3.y, &a3, h);
    let (a4, l4) = rhs(&s4, oracle, cfg)?;
    let mut next = state.clone();
    for k in 0..d {
        next.x[k] += h / 6.0 * (v1[k] + 2.0 * s2.y[k] + 2.0 * s3.y[k] + s4.y[k]);
        next.y[k] += h / 6.0 * (a1[k] + 2.0 * a2[k] + 2.0 * a3[k] + a4[k]);
    }
    let ds = h / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
    Ok((next, ds))
}

/// One RK4 step of `dtau`, halved on degenerate intermediate states.
/// Leaving the oracle domain is reported immediately.
pub fn geodesic_step(state: &ExtendedState, oracle: &impl QField, cfg: &GeodesicConfig, dtau: f64) -> Result<StepOutcome> {
    let mut h = dtau;
    let mut last = String::new();
    for halvings in 0..=cfg.max_halvings {
        match rk4(state, oracle, cfg, h) {
            Ok((next, ds)) => return Ok(StepOutcome { state: next, ds, dtau: h, halvings }),
            Err(e @ (FinslerError::OutOfDomain { .. } | FinslerError::Core(_) | FinslerError::Shape(_))) => {
                if halvings == 0 {
                    return Err(e);
                }
                last = e.to_string();
            }
            Err(e) => last = e.to_string(),
        }
        h *= 0.5;
    }
    Err(FinslerError::StepRejected { halvings: cfg.max_halvings, reason: last })
}

const EXTRAS: [&str; 3] = ["y0", "Lambda", "s"];

/// Advances one geodesic to requested coordinate times while recording a
/// single-track bundle. Once terminated it ignores further requests.
#[derive(Debug, Clone)]
pub struct GeodesicRunner {
    pub state: ExtendedState,
    pub s: f64,
    pub cfg: GeodesicConfig,
    pub bundle: TrajectoryBundle,
    pub terminated: Option<String>,
    lambda: f64,
}

impl GeodesicRunner {
    pub fn new(initial: ExtendedState, oracle: &impl QField, cfg: GeodesicConfig, provenance: Provenance) -> Result<Self> {
        let (_, lambda) = rhs(&initial, oracle, &cfg)?;
        let extras = EXTRAS.iter().map(|s| s.to_string()).collect();
        let bundle = TrajectoryBundle::new(TrajectoryKind::Geodesic, initial.dim() - 1, 1, extras, provenance);
        let mut r = GeodesicRunner { state: initial, s: 0.0, cfg, bundle, terminated: None, lambda };
        r.record()?;
        Ok(r)
    }

    pub fn is_alive(&self) -> bool {
        self.terminated.is_none()
    }

    /// Current Λ (including −V·y⁰ in force mode).
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    fn record(&mut self) -> Result<()> {
        self.bundle.push_time(self.state.t())?;
        let extra = [self.state.y0(), self.lambda, self.s];
        self.bundle.record(0, self.state.q(), &self.state.physical_velocity(), &extra);
        Ok(())
    }

    fn terminate(&mut self, reason: String) {
        self.bundle.tracks[0].terminated = Some(reason.clone());
        self.terminated = Some(reason);
    }

    /// Takes one step of at most `dtau`. Errors other than malformed input
    /// terminate the runner rather than propagate.
    pub fn step(&mut self, oracle: &impl QField, dtau: f64) -> Result<()> {
        if !self.is_alive() {
            return Ok(());
        }
        match geodesic_step(&self.state, oracle, &self.cfg, dtau) {
            // The endpoint must itself be usable before it is accepted.
            Ok(out) => match rhs(&out.state, oracle, &self.cfg) {
                Ok((_, l)) => {
                    self.state = out.state;
                    self.s += out.ds;
                    self.lambda = l;
                    self.record()
                }
                Err(e) => {
                    self.terminate(e.to_string());
                    Ok(())
                }
            },
            Err(e @ (FinslerError::Shape(_) | FinslerError::Core(_))) => Err(e),
            Err(e) => {
                self.terminate(e.to_string());
                Ok(())
            }
        }
    }

    /// Steps until x⁰ reaches `t_target`, shortening the last step to land on it.
    pub fn advance_to(&mut self, oracle: &impl QField, t_target: f64) -> Result<()> {
        let tol = 1e-12 * t_target.abs().max(1.0);
        while self.is_alive() && self.state.t() < t_target - tol {
            let remaining = (t_target - self.state.t()) / self.state.y0();
            self.step(oracle, self.cfg.dtau.min(remaining))?;
        }
        Ok(())
    }

    pub fn finish(self) -> TrajectoryBundle {
        self.bundle
    }
}

/// Integrates `n_steps` steps of `cfg.dtau` from `initial`.
pub fn run_geodesic(
    initial: ExtendedState,
    oracle: &impl QField,
    cfg: &GeodesicConfig,
    n_steps: usize,
    provenance: Provenance,
) -> Result<TrajectoryBundle> {
    let mut r = GeodesicRunner::new(initial, oracle, cfg.clone(), provenance)?;
    for _ in 0..n_steps {
        if !r.is_alive() {
            break;
        }
        r.step(oracle, cfg.dtau)?;
    }
    Ok(r.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::AnalyticQ;

    #[test]
    fn constant_q_gives_straight_lines() {
        let q = AnalyticQ::Constant { dim: 2, value: -0.3 };
        let s0 = ExtendedState::new(0.0, &[0.0, 1.0], 1.0, &[0.5, -0.2]);
        let b = run_geodesic(s0, &q, &GeodesicConfig::default(), 50, Provenance::default()).unwrap();
        let tr = &b.tracks[0];
        let last = tr.position(50, 2);
        assert!((last[0] - 0.25).abs() < 1e-12 && (last[1] - 0.9).abs() < 1e-12);
        assert!((b.times[50] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn force_mode_matches_folded_potential() {
        let v = PotentialSpec::SoftCoulomb { center: vec![0.0, 0.0], charge: 1.0, softening: 1.0 };
        let q = AnalyticQ::Constant { dim: 2, value: -0.05 };
        let folded = crate::oracle::Folded { inner: q.clone(), potential: v.clone() };
        let s0 = ExtendedState::new(0.0, &[2.0, 0.5], 1.0, &[-0.3, 0.4]);
        let force = GeodesicConfig { potential: Some(v), dtau: 1e-2, ..GeodesicConfig::default() };
        let plain = GeodesicConfig { dtau: 1e-2, ..GeodesicConfig::default() };
        let mut a = GeodesicRunner::new(s0.clone(), &q, force, Provenance::default()).unwrap();
        let mut b = GeodesicRunner::new(s0, &folded, plain, Provenance::default()).unwrap();
        a.advance_to(&q, 2.0).unwrap();
        b.advance_to(&folded, 2.0).unwrap();
        for (u, w) in a.state.q().iter().zip(b.state.q()) {
            assert!((u - w).abs() < 1e-8, "{u} vs {w}");
        }
        assert!((a.lambda() - b.lambda()).abs() < 1e-8);
    }

    #[test]
    fn leaving_the_domain_terminates() {
        let q = AnalyticQ::Constant { dim: 1, value: 0.0 };
        struct Boxed(AnalyticQ);
        impl QField for Boxed {
            fn dim(&self) -> usize {
                1
            }
            fn sample(&self, t: f64, q: &[f64]) -> Result<crate::oracle::QSample> {
                self.0.sample(t, q)
            }
            fn contains(&self, _t: f64, q: &[f64]) -> bool {
                q[0].abs() < 1.0
            }
        }
        let b = Boxed(q);
        let s0 = ExtendedState::new(0.0, &[0.0], 1.0, &[1.0]);
        let mut r = GeodesicRunner::new(s0, &b, GeodesicConfig { dtau: 0.1, ..Default::default() }, Provenance::default()).unwrap();
        r.advance_to(&b, 5.0).unwrap();
        assert!(!r.is_alive());
        assert!(r.state.q()[0] < 1.0);
    }
}
