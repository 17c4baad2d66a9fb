//! Grid wavefields, external potentials, time propagation, pilot-wave
//! quantities and two-electron construction.

pub mod error;
pub mod fft;
pub mod field;
pub mod grid;
pub mod ground;
pub mod pilot;
pub mod potential;
pub mod propagator;
pub mod snapshot;
pub mod stats;
pub mod trajectory;
pub mod twobody;
pub mod units;

pub use error::{CoreError, Result};
pub use field::{init_gaussian, DerivativeMethod, WaveField};
pub use grid::{make_grid, Boundary, Grid, GridSpec};
pub use potential::PotentialSpec;
pub use propagator::{Observer, Propagator, PropagatorConfig, Scheme};
pub use ground::{init_1s, relax, RelaxConfig};
pub use pilot::{derive_pilot, PilotConfig, PilotField};
pub use twobody::{conditional_velocity, evolve_pair, overlap, symmetrize, PairPilot, Particle, TwoBodyField};
pub use trajectory::{sample_initial_positions, step_bohmian, BohmianSwarm, LaunchMode, Provenance, TrajectoryBundle, TrajectoryKind};
