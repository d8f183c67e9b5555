use serde::{Deserialize, Serialize};

use crate::astro::{self, GravityModel, OrbitState};
use crate::error::{Error, Result};
use crate::metric::{DiscreteCurve, JacobiMetric};

use super::TransferSolution;

/// Time-tagged states along a transfer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<OrbitState>,
    pub tof: f64,
}

/// `dt/ds = |c_s| / sqrt(2(E - V))` at every node.
fn time_rate(metric: &JacobiMetric, curve: &DiscreteCurve) -> Result<Vec<f64>> {
    curve
        .nodes
        .iter()
        .zip(curve.tangents())
        .enumerate()
        .map(|(k, (r, t))| {
            let phi = metric.conformal_factor(r)?;
            if !(phi > 0.0) {
                return Err(Error::HillViolation { node: Some(k), factor: phi });
            }
            Ok(t.norm() / phi.sqrt())
        })
        .collect()
}

pub fn time_of_flight(metric: &JacobiMetric, curve: &DiscreteCurve) -> Result<f64> {
    let rate = time_rate(metric, curve)?;
    Ok(curve.grid().cumulative_integral(&rate, &[1.0])[0])
}

/// States at `n` uniform parameter values along the solution curve, timed by
/// integrating `|dc| / sqrt(2(E - V))`. Speeds satisfy `|v|^2 = 2(E - V)`.
pub fn reconstruct_states(model: &GravityModel, sol: &TransferSolution, n: usize) -> Result<Trajectory> {
    if n < 2 {
        return Err(Error::invalid("trajectory needs at least 2 samples"));
    }
    let Some(curve) = &sol.curve else {
        let start = OrbitState { r: sol.p0, v: sol.v_depart };
        return Ok(Trajectory { times: vec![0.0], states: vec![start], tof: 0.0 });
    };
    let metric = JacobiMetric::new(*model, sol.energy);
    let grid = curve.grid();
    let rate = time_rate(&metric, curve)?;
    let targets: Vec<f64> = (0..n).map(|k| k as f64 / (n - 1) as f64).collect();
    let times = grid.cumulative_integral(&rate, &targets);
    let tangents = curve.tangents();
    let mut states = Vec::with_capacity(n);
    for (k, &s) in targets.iter().enumerate() {
        let weights = grid.basis_at(s);
        let r = if k == 0 {
            curve.start()
        } else if k == n - 1 {
            curve.end()
        } else {
            crate::metric::combine(&weights, &curve.nodes)
        };
        let t = crate::metric::combine(&weights, &tangents);
        let phi = metric.conformal_factor(&r)?;
        if !(phi > 0.0) {
            return Err(Error::HillViolation { node: None, factor: phi });
        }
        states.push(OrbitState { r, v: t.normalize() * phi.sqrt() });
    }
    let tof = times[n - 1];
    Ok(Trajectory { times, states, tof })
}

/// Distance from the arrival point after propagating the departure state for
/// the solution's time of flight.
pub fn propagation_miss(model: &GravityModel, sol: &TransferSolution) -> Result<f64> {
    let start = OrbitState { r: sol.p0, v: sol.v_depart };
    let end = astro::propagate(model, &start, sol.tof, astro::SAMPLING_TOL)?;
    Ok((end.r - sol.pf).norm())
}
