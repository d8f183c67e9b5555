//! Minimum-ΔV two-impulse phase-free orbit transfers computed as geodesics of
//! the Jacobi metric.
//!
//! A spacecraft moving at fixed specific energy `E` in a potential `V` follows
//! geodesics of the conformally flat metric `2(E - V(r)) I`. Transfer planning
//! therefore reduces to sampling endpoint pairs on the initial and target
//! orbits plus a transfer energy, computing the connecting geodesic, and
//! scoring it by total impulse. Two geodesic backends are provided:
//!
//! * [`kepler`]: closed-form conic arcs for the point-mass potential,
//! * [`heatflow`]: a Chebyshev pseudospectral geometric heat-flow solver that
//!   works for any conformally flat Jacobi metric (used for J2).
//!
//! [`planner`] implements the coarse sampling / evolutionary refinement loop,
//! and [`scenario`] holds the bundled benchmark fixtures and report formats
//! used by the command-line tool.

pub mod astro;
pub mod error;
pub mod heatflow;
pub mod integrator;
pub mod io;
pub mod kepler;
pub mod metric;
pub mod planner;
pub mod scenario;
pub mod spectral;

pub use astro::{BodyConstants, GravityModel, ModelKind, OrbitState, Vec3};
pub use error::{Error, Result};
pub use heatflow::{GeodesicResult, HeatFlowConfig, Homotopy};
pub use kepler::{Arc, EllipseTransfer};
pub use metric::{DiscreteCurve, JacobiMetric};
pub use planner::{Backend, Branch, PlannerConfig, TransferProblem, TransferSolution};
