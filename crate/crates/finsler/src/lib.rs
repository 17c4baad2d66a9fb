//! Extended Finsler geometry of the quantum potential.
//!
//! Λ(x, y) = T(q̇)/y⁰ − Q'(x)·y⁰ on the extended configuration space
//! x = (t, q), its metric, Cartan tensor, connections and curvatures, and
//! geodesics of Λ integrated in either the Christoffel or the non-linear
//! connection form.

pub mod admissibility;
pub mod connection;
pub mod curvature;
pub mod error;
pub mod geodesic;
pub mod identities;
pub mod metric;
pub mod oracle;

pub use admissibility::{check_admissibility, AdmissibilityReport};
pub use connection::{connections, Connections};
pub use curvature::{curvatures, CurvatureSteps, Curvatures};
pub use error::{FinslerError, Result};
pub use geodesic::{geodesic_step, run_geodesic, Form, GeodesicConfig, GeodesicRunner, StepOutcome};
pub use identities::{identity_sweep, sample_state, test_fields, IdentityResiduals};
pub use metric::{cartan_tensor, lambda_fn, metric, ExtendedState, Geometry, MetricEval};
pub use oracle::{AnalyticQ, Folded, QField, QSample, Shifted, SnapshotSeries};
