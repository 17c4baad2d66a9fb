//! Randomised checks of the tensor identities of Λ on closed-form Q fields.
//! Used by the test suites and by the `check-finsler` sweep.

use rand::Rng;

use crate::connection::connections_from_metric;
use crate::curvature::{curvatures, CurvatureSteps};
use crate::error::{FinslerError, Result};
use crate::metric::{lambda_squared, metric, ExtendedState, Geometry};
use crate::oracle::{AnalyticQ, QField, Shifted};

/// y⁰ ∈ [0.9, 1.1], |q̇| ∈ [0.1, 1.5] in a uniform direction, q in the cube of
/// half-width `q_half`, t ∈ [0, t_max].
pub fn sample_state(rng: &mut impl Rng, n: usize, q_half: f64, t_max: f64) -> ExtendedState {
    let q: Vec<f64> = (0..n).map(|_| rng.gen_range(-q_half..=q_half)).collect();
    let dir: Vec<f64> = loop {
        let d: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        let r2: f64 = d.iter().map(|v| v * v).sum();
        if r2 > 1e-4 && r2 <= 1.0 {
            let r = r2.sqrt();
            break d.into_iter().map(|v| v / r).collect();
        }
    };
    let speed = rng.gen_range(0.1..=1.5);
    let qdot: Vec<f64> = dir.iter().map(|d| d * speed).collect();
    ExtendedState::new(rng.gen_range(0.0..=t_max), &q, rng.gen_range(0.9..=1.1), &qdot)
}

/// Smooth, time-dependent test fields in `n` dimensions, offset so that
/// sampled states readily meet the energy condition.
pub fn test_fields(n: usize) -> Vec<(&'static str, Shifted<AnalyticQ>)> {
    let ramp = |a: f64, b: f64| (0..n).map(|i| a + b * i as f64).collect::<Vec<f64>>();
    let offset = |inner: AnalyticQ, offset: f64| Shifted { inner, offset };
    vec![
        (
            "bump",
            offset(AnalyticQ::Bump { amplitude: -0.7, center: ramp(0.2, -0.3), drift: ramp(0.25, 0.1), width: 1.3, breathing: 0.4 }, -0.6),
        ),
        ("free-gaussian", offset(AnalyticQ::FreeGaussian { sigma: 1.2, center: ramp(-0.1, 0.2), k0: ramp(0.6, -0.4) }, -1.5)),
        ("quadratic", offset(AnalyticQ::Quadratic { curvature: ramp(-0.3, -0.15) }, -0.4)),
    ]
}

/// Nondegenerate metric and T/(y⁰)² + Q' < 0.
pub fn is_admissible(state: &ExtendedState, oracle: &impl QField, geom: &Geometry) -> Result<bool> {
    if geom.check(state).is_err() {
        return Ok(false);
    }
    let q = oracle.sample(state.t(), state.q())?;
    Ok(geom.kinetic(state.qdot()) / (state.y0() * state.y0()) + q.value < 0.0)
}

/// Largest residual of each identity over a sample, each relative to the
/// natural scale of the quantity (at least 1 for N and R).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct IdentityResiduals {
    pub states: usize,
    /// Analytic g against second differences of Λ².
    pub metric_fd: f64,
    /// g_ab yᵃ yᵇ against Λ².
    pub euler: f64,
    /// C_abc yᵃ.
    pub cartan_y: f64,
    /// N from Γ and C against N from the spray.
    pub n_dual: f64,
    /// Nᵃ_b yᵇ against Γᵃ_bc yᵇ yᶜ.
    pub n_spray: f64,
    /// Rᵠ_ab + ˡRᵠ_cab yᶜ.
    pub curvature: f64,
}

impl IdentityResiduals {
    fn merge(&mut self, o: &IdentityResiduals) {
        self.states += o.states;
        self.metric_fd = self.metric_fd.max(o.metric_fd);
        self.euler = self.euler.max(o.euler);
        self.cartan_y = self.cartan_y.max(o.cartan_y);
        self.n_dual = self.n_dual.max(o.n_dual);
        self.n_spray = self.n_spray.max(o.n_spray);
        self.curvature = self.curvature.max(o.curvature);
    }
}

fn amax(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| m.max(x.abs()))
}

/// g from central second differences of ½Λ² in y at fixed Q'.
pub fn metric_by_differences(y: &[f64], q_prime: f64, geom: &Geometry, h: f64) -> Vec<f64> {
    let d = y.len();
    let f = |da: usize, sa: f64, db: usize, sb: f64| {
        let mut p = y.to_vec();
        p[da] += sa * h;
        p[db] += sb * h;
        0.5 * lambda_squared(&p, q_prime, geom)
    };
    let mut g = vec![0.0; d * d];
    for a in 0..d {
        for b in 0..d {
            g[a * d + b] = if a == b {
                let mut p = y.to_vec();
                p[a] += h;
                let up = 0.5 * lambda_squared(&p, q_prime, geom);
                p[a] -= 2.0 * h;
                let dn = 0.5 * lambda_squared(&p, q_prime, geom);
                (up - 2.0 * 0.5 * lambda_squared(y, q_prime, geom) + dn) / (h * h)
            } else {
                (f(a, 1.0, b, 1.0) - f(a, 1.0, b, -1.0) - f(a, -1.0, b, 1.0) + f(a, -1.0, b, -1.0)) / (4.0 * h * h)
            };
        }
    }
    g
}

/// Residuals at one state. `with_curvature` adds the (costlier) curvature identity.
pub fn residuals_at(state: &ExtendedState, oracle: &impl QField, geom: &Geometry, with_curvature: bool) -> Result<IdentityResiduals> {
    let d = state.dim();
    let m = metric(state, oracle, geom)?;
    let y = &state.y;
    let gscale = m.g.amax();

    let fd = metric_by_differences(y, m.q.value, geom, 1e-4);
    let metric_fd = amax((0..d * d).map(|k| m.g[(k / d, k % d)] - fd[k])) / gscale;

    let gyy: f64 = (0..d).map(|a| (0..d).map(|b| m.g[(a, b)] * y[a] * y[b]).sum::<f64>()).sum();
    let yscale: f64 = y.iter().map(|v| v * v).sum();
    let euler = (gyy - m.lambda * m.lambda).abs() / (m.lambda * m.lambda).max(gscale * yscale);

    let cscale = amax((0..d * d * d).map(|k| m.cartan(k / (d * d), (k / d) % d, k % d))).max(f64::MIN_POSITIVE);
    let cartan_y = amax((0..d * d).map(|k| (0..d).map(|a| m.cartan(a, k / d, k % d) * y[a]).sum::<f64>())) / (cscale * yscale.sqrt());

    let conn = connections_from_metric(&m, y);
    let nscale = amax(conn.n.iter().cloned()).max(1.0);
    let n_dual = amax(conn.n.iter().zip(&conn.n_from_spray).map(|(a, b)| a - b)) / nscale;
    let spray = conn.spray(y);
    let n_spray = amax(conn.n_contracted(y).iter().zip(&spray).map(|(a, b)| a - b)) / amax(spray.iter().cloned()).max(1.0);

    let curvature = if with_curvature {
        let k = curvatures(state, oracle, geom, CurvatureSteps::default())?;
        let scale = amax(k.nonlinear.iter().cloned()).max(1.0);
        let mut worst: f64 = 0.0;
        for q in 0..d {
            for a in 0..d {
                for b in 0..d {
                    let contracted: f64 = (0..d).map(|c| k.linear(q, c, a, b) * y[c]).sum();
                    worst = worst.max((k.nonlinear(q, a, b) + contracted).abs() / scale);
                }
            }
        }
        worst
    } else {
        0.0
    };
    Ok(IdentityResiduals { states: 1, metric_fd, euler, cartan_y, n_dual, n_spray, curvature })
}

/// Draws `n` admissible states per field and returns the worst residuals.
pub fn identity_sweep<F: QField>(
    rng: &mut impl Rng,
    fields: &[(&str, F)],
    n: usize,
    geom: &Geometry,
    with_curvature: bool,
) -> Result<IdentityResiduals> {
    let mut total = IdentityResiduals::default();
    for (_, field) in fields {
        let mut accepted = 0;
        let mut tries = 0;
        while accepted < n {
            tries += 1;
            if tries > 100 * n {
                return Err(FinslerError::Shape(format!("could not draw {n} admissible states")));
            }
            let s = sample_state(rng, field.dim(), 2.0, 3.0);
            if !is_admissible(&s, field, geom)? {
                continue;
            }
            match residuals_at(&s, field, geom, with_curvature) {
                Ok(r) => {
                    total.merge(&r);
                    accepted += 1;
                }
                Err(FinslerError::DegenerateMetric { .. } | FinslerError::SlowVelocity { .. }) => continue,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(total)
}

/// Largest |Γ|, |N|, |ˡR|, |R| for a constant Q'.
pub fn flat_residual(state: &ExtendedState, value: f64, geom: &Geometry) -> Result<f64> {
    let q = AnalyticQ::Constant { dim: state.dim() - 1, value };
    let m = metric(state, &q, geom)?;
    let conn = connections_from_metric(&m, &state.y);
    let k = curvatures(state, &q, geom, CurvatureSteps::default())?;
    Ok(amax(conn.gamma.iter().chain(&conn.n).chain(&conn.n_from_spray).chain(&k.nonlinear).chain(&k.linear).cloned()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn small_sweep_is_clean() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let r = identity_sweep(&mut rng, &test_fields(2), 10, &Geometry::default(), true).unwrap();
        assert_eq!(r.states, 30);
        assert!(r.metric_fd < 1e-6, "{r:?}");
        assert!(r.euler < 1e-10 && r.cartan_y < 1e-10, "{r:?}");
        assert!(r.n_dual < 1e-8 && r.n_spray < 1e-8, "{r:?}");
        assert!(r.curvature < 1e-6, "{r:?}");
    }

    #[test]
    fn sampled_states_respect_bounds() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let s = sample_state(&mut rng, 3, 1.0, 1.0);
            assert!((0.9..=1.1).contains(&s.y0()));
            assert!(s.speed() >= 0.1 - 1e-15 && s.speed() <= 1.5 + 1e-12);
        }
    }
}
