//! Sampling and refinement search for minimum-ΔV phase-free transfers.
//!
//! A candidate transfer is encoded as `x = (u0, uf, w, b) ∈ [0,1]^4`:
//! position fractions along the initial and target orbits, the fraction of
//! the admissible energy interval, and a rounded branch selector. The coarse
//! stage evaluates a full tensor grid of samples, the best few seed a
//! covariance-adaptation evolution strategy (optionally wrapped in monotonic
//! basin hopping).

mod cmaes;
mod coarse;
mod contour;
mod evaluate;
mod problem;
mod refine;
mod trajectory;

use serde::{Deserialize, Serialize};

use crate::astro::Vec3;
use crate::error::{Error, Result};
use crate::heatflow::{HeatFlowConfig, Homotopy};
use crate::kepler::Arc;
use crate::metric::DiscreteCurve;

pub use cmaes::{minimize, CmaesOptions, CmaesOutcome};
pub use coarse::{coarse_search, CoarseOutcome, SearchDiagnostics};
pub use contour::{contour_grid, count_near_optimal_regions, ContourGrid};
pub use evaluate::{decode_branch, energy_bounds, evaluate, level_fractions, Decision};
pub use problem::{OrbitTrack, TransferProblem};
pub use refine::{refine, refine_only, RefineOutcome};
pub use trajectory::{propagation_miss, reconstruct_states, time_of_flight, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Ellipse,
    Heatflow,
}

/// Discrete part of a candidate transfer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Branch {
    Ellipse { focus: usize, arc: Arc },
    Heatflow { homotopy: Homotopy },
    /// Departure and arrival points coincide; no transfer arc is flown.
    Coast,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Coarse,
    Refined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlannerConfig {
    pub backend: Backend,
    /// Position samples per orbit period.
    pub n_pos_samples: usize,
    pub n_energy_samples: usize,
    /// Sampling horizon for perturbed orbits, in osculating periods.
    pub n_periods: usize,
    pub n_best: usize,
    /// Upper bound factor on `a_min` (ellipse) or `E_min` (heat flow).
    pub sma_or_energy_multiplier: f64,
    pub refine_generations: usize,
    /// Evolution-strategy population; `None` uses `4 + floor(3 ln 4)`.
    #[serde(default)]
    pub population_size: Option<usize>,
    pub refine_tol: f64,
    pub use_mbh: bool,
    pub mbh_max_step: f64,
    /// Consecutive unsuccessful hops that end basin hopping.
    #[serde(default = "default_mbh_stop")]
    pub mbh_stop: usize,
    /// Initial step size of the evolution strategy in normalized coordinates.
    #[serde(default = "default_sigma")]
    pub initial_sigma: f64,
    pub seed: u64,
    #[serde(default = "HeatFlowConfig::coarse")]
    pub coarse_flow: HeatFlowConfig,
    #[serde(default = "HeatFlowConfig::refine")]
    pub refine_flow: HeatFlowConfig,
}

fn default_mbh_stop() -> usize {
    5
}

fn default_sigma() -> f64 {
    0.05
}

impl PlannerConfig {
    /// Coarse-to-fine settings for the closed-form backend.
    pub fn ellipse_default() -> Self {
        PlannerConfig {
            backend: Backend::Ellipse,
            n_pos_samples: 90,
            n_energy_samples: 3,
            n_periods: 1,
            n_best: 5,
            sma_or_energy_multiplier: 2.0,
            refine_generations: 1000,
            population_size: None,
            refine_tol: 1e-12,
            use_mbh: true,
            mbh_max_step: 0.05,
            mbh_stop: default_mbh_stop(),
            initial_sigma: default_sigma(),
            seed: 0,
            coarse_flow: HeatFlowConfig::coarse(),
            refine_flow: HeatFlowConfig::refine(),
        }
    }

    /// Coarse-to-fine settings for the heat-flow backend.
    pub fn heatflow_default() -> Self {
        PlannerConfig {
            backend: Backend::Heatflow,
            n_periods: 2,
            refine_generations: 100,
            refine_tol: 1e-10,
            ..PlannerConfig::ellipse_default()
        }
    }

    /// Refine-only settings: evenly spaced initial population, no basin hopping.
    pub fn refine_only_default() -> Self {
        PlannerConfig {
            population_size: Some(50),
            refine_generations: 5000,
            use_mbh: false,
            initial_sigma: 0.5,
            ..PlannerConfig::ellipse_default()
        }
    }

    /// This configuration with the refine-only search settings applied.
    pub fn refine_only_variant(&self) -> Self {
        let r = PlannerConfig::refine_only_default();
        PlannerConfig {
            population_size: r.population_size,
            refine_generations: r.refine_generations,
            use_mbh: r.use_mbh,
            initial_sigma: r.initial_sigma,
            ..self.clone()
        }
    }

    pub fn population(&self) -> usize {
        self.population_size.unwrap_or(4 + (3.0 * 4f64.ln()).floor() as usize)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_pos_samples", self.n_pos_samples),
            ("n_energy_samples", self.n_energy_samples),
            ("n_periods", self.n_periods),
            ("n_best", self.n_best),
            ("refine_generations", self.refine_generations),
            ("mbh_stop", self.mbh_stop),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::invalid(format!("{name} must be at least 1")));
            }
        }
        if self.n_pos_samples < 2 {
            return Err(Error::invalid("n_pos_samples must be at least 2"));
        }
        if self.population() < 2 {
            return Err(Error::invalid("population_size must be at least 2"));
        }
        if !(self.sma_or_energy_multiplier > 1.0) || !self.sma_or_energy_multiplier.is_finite() {
            return Err(Error::invalid("sma_or_energy_multiplier must exceed 1"));
        }
        if !(self.mbh_max_step > 0.0 && self.mbh_max_step <= 1.0) {
            return Err(Error::invalid("mbh_max_step must lie in (0, 1]"));
        }
        if !(self.refine_tol > 0.0) || !(self.initial_sigma > 0.0) {
            return Err(Error::invalid("refine_tol and initial_sigma must be positive"));
        }
        self.coarse_flow.validate()?;
        self.refine_flow.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferSolution {
    pub p0: Vec3,
    pub pf: Vec3,
    /// Orbit velocities at the endpoints.
    pub v_initial: Vec3,
    pub v_target: Vec3,
    /// Transfer velocities at departure and arrival.
    pub v_depart: Vec3,
    pub v_arrive: Vec3,
    pub dv0: Vec3,
    pub dvf: Vec3,
    pub total_dv: f64,
    pub energy: f64,
    pub tof: f64,
    pub branch: Branch,
    /// `None` for coasts.
    pub curve: Option<DiscreteCurve>,
    pub provenance: Provenance,
    pub decision: Decision,
    /// Scaled geodesic residual of the curve.
    pub residual: f64,
}
