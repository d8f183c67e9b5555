//! Geodesics of a conformally flat Jacobi metric by geometric heat flow.
//!
//! The curve `c(s, tau)` evolves under `c_tau = c_ss + Γ(c)(c_s, c_s)` with
//! endpoints held fixed, discretized in `s` on Chebyshev–Lobatto nodes. The
//! semi-discrete system is stiff, so it is advanced with a linearly implicit
//! Euler step using the analytic Jacobian, with the step size grown as the
//! flow settles. Large steps turn the scheme into Newton's method on the
//! collocation equations, so the steady state is reached in a few dozen steps.

use std::f64::consts::{PI, TAU};

use nalgebra::{DMatrix, DVector, Matrix3};
use serde::{Deserialize, Serialize};

use crate::astro::Vec3;
use crate::error::{Error, Result};
use crate::metric::{self, DiscreteCurve, JacobiMetric};
use crate::spectral::{self, Grid};

/// The two ways around the central body.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Homotopy {
    /// Initial guess sweeps the angle below pi.
    Direct,
    /// Initial guess goes the other way around the origin.
    Reflected,
}

impl Homotopy {
    pub const ALL: [Homotopy; 2] = [Homotopy::Direct, Homotopy::Reflected];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeatFlowConfig {
    pub n_nodes: usize,
    /// Target for the scaled geodesic residual.
    pub residual_tol: f64,
    pub max_flow_time: f64,
    /// Local error tolerance of the pseudo-time stepper, relative to the chord.
    pub ode_tol: f64,
    pub max_steps: usize,
    pub initial_step: f64,
}

impl Default for HeatFlowConfig {
    fn default() -> Self {
        HeatFlowConfig::refine()
    }
}

impl HeatFlowConfig {
    /// Cheap setting used while sampling.
    pub fn coarse() -> Self {
        HeatFlowConfig { n_nodes: 25, residual_tol: 1e-6, ..HeatFlowConfig::refine() }
    }

    pub fn refine() -> Self {
        HeatFlowConfig {
            n_nodes: 30,
            residual_tol: 1e-10,
            max_flow_time: 1e8,
            ode_tol: 2e-2,
            max_steps: 400,
            initial_step: 1e-3,
        }
    }

    pub fn with_nodes(self, n_nodes: usize) -> Self {
        HeatFlowConfig { n_nodes, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_nodes < 5 {
            return Err(Error::invalid("heat flow needs at least 5 nodes"));
        }
        let positive = [self.residual_tol, self.max_flow_time, self.ode_tol, self.initial_step];
        if positive.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
            return Err(Error::invalid("heat flow tolerances and times must be positive"));
        }
        if self.max_steps == 0 {
            return Err(Error::invalid("heat flow needs max_steps >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicResult {
    pub curve: DiscreteCurve,
    pub metric: JacobiMetric,
    pub homotopy: Homotopy,
    pub converged: bool,
    pub final_residual: f64,
    /// Tolerance the residual was judged against.
    pub residual_tol: f64,
    /// Jacobi length of the curve.
    pub length: f64,
    pub flow_time: f64,
    pub steps: usize,
}

impl GeodesicResult {
    pub fn energy(&self) -> f64 {
        self.metric.energy
    }

    /// Interpolate onto `n_nodes` Lobatto nodes and re-evaluate the residual.
    pub fn resample(&self, n_nodes: usize) -> Result<GeodesicResult> {
        let curve = resample_curve(&self.curve, n_nodes)?;
        let final_residual = self.metric.scaled_residual(&curve)?;
        Ok(GeodesicResult {
            length: self.metric.curve_length(&curve)?,
            converged: self.converged && final_residual <= self.residual_tol,
            final_residual,
            curve,
            ..self.clone()
        })
    }
}

/// Barycentric interpolation of a curve onto `n_nodes` Lobatto parameters.
pub fn resample_curve(curve: &DiscreteCurve, n_nodes: usize) -> Result<DiscreteCurve> {
    if n_nodes < 3 {
        return Err(Error::invalid("curve needs at least 3 nodes"));
    }
    let targets = spectral::lobatto_params(n_nodes);
    if targets == curve.params {
        return Ok(curve.clone());
    }
    let grid = curve.grid();
    let l = grid.interpolation_matrix(&targets);
    let mut nodes = metric::apply(&l, &curve.nodes);
    nodes[0] = curve.start();
    nodes[n_nodes - 1] = curve.end();
    DiscreteCurve::new(nodes, targets)
}

/// Unit normal of the plane through the origin, `p0` and `pf`.
pub fn plane_normal(p0: &Vec3, pf: &Vec3) -> Result<Vec3> {
    let (r0, rf) = (p0.norm(), pf.norm());
    if r0 == 0.0 || rf == 0.0 {
        return Err(Error::Singular);
    }
    let c = p0.cross(pf);
    if c.norm() <= 1e-10 * r0 * rf {
        return Err(Error::DegeneratePlane);
    }
    Ok(c.normalize())
}

/// Circular-arc initial guess with linearly interpolated radius.
pub fn initial_curve(p0: &Vec3, pf: &Vec3, homotopy: Homotopy, n_nodes: usize) -> Result<DiscreteCurve> {
    if n_nodes < 3 {
        return Err(Error::invalid("curve needs at least 3 nodes"));
    }
    let n = plane_normal(p0, pf)?;
    let (r0, rf) = (p0.norm(), pf.norm());
    let x = p0 / r0;
    let y = n.cross(&x);
    let theta = y.dot(pf).atan2(x.dot(pf));
    let sweep = match homotopy {
        Homotopy::Direct => theta,
        Homotopy::Reflected => theta - TAU,
    };
    let params = spectral::lobatto_params(n_nodes);
    let mut nodes: Vec<Vec3> = params
        .iter()
        .map(|&s| {
            let (sn, cs) = (s * sweep).sin_cos();
            (x * cs + y * sn) * (r0 + s * (rf - r0))
        })
        .collect();
    nodes[0] = *p0;
    nodes[n_nodes - 1] = *pf;
    debug_assert!(theta > 0.0 && theta < PI);
    DiscreteCurve::new(nodes, params)
}

/// Flow the circular-arc guess of the given homotopy class to a geodesic.
pub fn flow_to_geodesic(
    metric: &JacobiMetric,
    p0: &Vec3,
    pf: &Vec3,
    homotopy: Homotopy,
    cfg: &HeatFlowConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    let curve = initial_curve(p0, pf, homotopy, cfg.n_nodes)?;
    flow_from(metric, &curve, homotopy, cfg)
}

/// Flow an arbitrary starting curve (resampled to `cfg.n_nodes`).
pub fn flow_from(
    metric: &JacobiMetric,
    start: &DiscreteCurve,
    homotopy: Homotopy,
    cfg: &HeatFlowConfig,
) -> Result<GeodesicResult> {
    cfg.validate()?;
    let curve = resample_curve(start, cfg.n_nodes)?;
    let grid = Grid::lobatto(cfg.n_nodes);
    let mut flow = Flow::new(metric, &grid, curve.nodes.clone())?;
    let axis = curve.start().cross(&curve.end());
    let winding = curve.winding_sign(&axis);
    let outcome = flow.run(cfg)?;
    let curve = DiscreteCurve::new(flow.nodes, curve.params)?;
    let same_class = curve.winding_sign(&axis) == winding;
    if !same_class {
        log::debug!("heat flow changed homotopy class; discarding");
    }
    Ok(GeodesicResult {
        length: metric.curve_length(&curve)?,
        curve,
        metric: *metric,
        homotopy,
        converged: outcome.converged && same_class,
        final_residual: outcome.residual,
        residual_tol: cfg.residual_tol,
        flow_time: outcome.time,
        steps: outcome.steps,
    })
}

struct Outcome {
    converged: bool,
    residual: f64,
    time: f64,
    steps: usize,
}

/// Semi-discrete heat flow on a fixed grid.
struct Flow<'a> {
    metric: &'a JacobiMetric,
    grid: &'a Grid,
    nodes: Vec<Vec3>,
    chord: f64,
}

/// Right-hand side at every node plus what the Jacobian needs.
struct Evaluation {
    rhs: Vec<Vec3>,
    tangents: Vec<Vec3>,
}

impl<'a> Flow<'a> {
    fn new(metric: &'a JacobiMetric, grid: &'a Grid, nodes: Vec<Vec3>) -> Result<Self> {
        let n = nodes.len();
        let chord = (nodes[n - 1] - nodes[0]).norm().max(1e-300);
        Ok(Flow { metric, grid, nodes, chord })
    }

    fn evaluate(&self, nodes: &[Vec3]) -> Result<Evaluation> {
        let tangents = metric::apply(self.grid.d1(), nodes);
        let rhs = self.metric.residual_on(self.grid, nodes)?;
        Ok(Evaluation { rhs, tangents })
    }

    fn scaled(&self, ev: &Evaluation) -> f64 {
        metric::scale_residual(&ev.rhs, &ev.tangents)
    }

    /// `dF/dc` restricted to interior nodes, 3x3 blocks.
    fn jacobian(&self, ev: &Evaluation) -> Result<DMatrix<f64>> {
        let n = self.nodes.len();
        let m = n - 2;
        let d1 = self.grid.d1();
        let d2 = self.grid.d2();
        let mut jac = DMatrix::zeros(3 * m, 3 * m);
        for k in 1..n - 1 {
            let r = &self.nodes[k];
            let u = &ev.tangents[k];
            let lf = self.metric.log_factor(r, Some(k))?;
            let g = &lf.grad;
            let a = u * g.transpose() + Matrix3::identity() * g.dot(u) - g * u.transpose();
            let hess = self.metric.log_factor_hessian(r, &lf)?;
            let b = (u * u.transpose() - Matrix3::identity() * (0.5 * u.norm_squared())) * hess;
            let row = 3 * (k - 1);
            for j in 1..n - 1 {
                let col = 3 * (j - 1);
                let mut block = a * d1[(k, j)];
                for i in 0..3 {
                    block[(i, i)] += d2[(k, j)];
                }
                if j == k {
                    block += b;
                }
                jac.view_mut((row, col), (3, 3)).copy_from(&block);
            }
        }
        Ok(jac)
    }

    fn run(&mut self, cfg: &HeatFlowConfig) -> Result<Outcome> {
        let n = self.nodes.len();
        let m = n - 2;
        let mut ev = self.evaluate(&self.nodes)?;
        let mut residual = self.scaled(&ev);
        let mut dt = cfg.initial_step;
        let mut time = 0.0;
        let mut steps = 0;
        let mut best = residual;
        let mut since_best = 0;
        const MIN_STEP: f64 = 1e-12;
        const MAX_STEP: f64 = 1e6;
        const STALL_STEPS: usize = 30;
        while residual > cfg.residual_tol && steps < cfg.max_steps && time < cfg.max_flow_time {
            steps += 1;
            let jac = self.jacobian(&ev)?;
            let mut f = DVector::zeros(3 * m);
            for k in 1..n - 1 {
                f.rows_mut(3 * (k - 1), 3).copy_from(&ev.rhs[k]);
            }
            let trial = loop {
                let lhs = DMatrix::identity(3 * m, 3 * m) / dt - &jac;
                let attempt = lhs.lu().solve(&f).and_then(|delta| {
                    let mut next = self.nodes.clone();
                    for k in 1..n - 1 {
                        next[k] += Vec3::new(delta[3 * k - 3], delta[3 * k - 2], delta[3 * k - 1]);
                    }
                    let next_ev = self.evaluate(&next).ok()?;
                    let change = ev
                        .rhs
                        .iter()
                        .zip(&next_ev.rhs)
                        .skip(1)
                        .take(m)
                        .fold(0.0f64, |acc, (a, b)| acc.max((b - a).norm()));
                    let err = 0.5 * dt * change / self.chord;
                    err.is_finite().then_some((next, next_ev, err))
                });
                match attempt {
                    Some((next, next_ev, err)) if err <= cfg.ode_tol => {
                        let grow = if err > 0.0 { 0.9 * (cfg.ode_tol / err).sqrt() } else { 10.0 };
                        break Some((next, next_ev, dt, grow.clamp(1.0, 10.0)));
                    }
                    Some((_, _, err)) => dt *= (0.9 * (cfg.ode_tol / err).sqrt()).clamp(0.2, 0.9),
                    None => dt *= 0.2,
                }
                if dt < MIN_STEP {
                    break None;
                }
            };
            let Some((next, next_ev, used, grow)) = trial else {
                let node = self.worst_node();
                let factor = node.map_or(f64::NAN, |k| {
                    self.metric.conformal_factor(&self.nodes[k]).unwrap_or(f64::NAN)
                });
                return Err(Error::HillViolation { node, factor });
            };
            self.nodes = next;
            ev = next_ev;
            time += used;
            dt = (used * grow).min(MAX_STEP);
            residual = self.scaled(&ev);
            if residual < 0.9 * best {
                best = residual;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= STALL_STEPS {
                    break;
                }
            }
        }
        Ok(Outcome { converged: residual <= cfg.residual_tol, residual, time, steps })
    }

    /// Interior node with the smallest conformal factor.
    fn worst_node(&self) -> Option<usize> {
        let n = self.nodes.len();
        (1..n - 1).min_by(|&a, &b| {
            let fa = self.metric.conformal_factor(&self.nodes[a]).unwrap_or(f64::NEG_INFINITY);
            let fb = self.metric.conformal_factor(&self.nodes[b]).unwrap_or(f64::NEG_INFINITY);
            fa.total_cmp(&fb)
        })
    }
}

/// Endpoint velocities of a geodesic: speed from the energy, direction from
/// the spectral tangent.
pub fn endpoint_velocities(result: &GeodesicResult) -> Result<(Vec3, Vec3)> {
    let curve = &result.curve;
    let tangents = curve.tangents();
    let scale = curve.polyline_length().max(1e-300);
    let mut out = [Vec3::zeros(); 2];
    for (slot, k) in out.iter_mut().zip([0, curve.len() - 1]) {
        let t = tangents[k];
        if t.norm() <= 1e-12 * scale {
            return Err(Error::TangentDegeneracy);
        }
        let phi = result.metric.conformal_factor(&curve.nodes[k])?;
        if !(phi > 0.0) {
            return Err(Error::HillViolation { node: Some(k), factor: phi });
        }
        *slot = t.normalize() * phi.sqrt();
    }
    Ok((out[0], out[1]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{BodyConstants, GravityModel};
    use crate::kepler;

    const MU: f64 = 3.986e5;

    fn earth(energy: f64) -> JacobiMetric {
        JacobiMetric::new(GravityModel::kepler(BodyConstants::EARTH), energy)
    }

    #[test]
    fn initial_guess_geometry() {
        let r = 9000.0;
        let p0 = Vec3::new(r, 0.0, 0.0);
        let pf = Vec3::new(0.0, r, 0.0);
        let direct = initial_curve(&p0, &pf, Homotopy::Direct, 17).unwrap();
        let reflected = initial_curve(&p0, &pf, Homotopy::Reflected, 17).unwrap();
        for node in &direct.nodes {
            assert!((node.norm() - r).abs() < 1e-9);
        }
        let axis = p0.cross(&pf);
        assert_eq!(direct.winding_sign(&axis), 1.0);
        assert_eq!(reflected.winding_sign(&axis), -1.0);
        assert!(matches!(
            initial_curve(&p0, &(-p0), Homotopy::Direct, 17),
            Err(Error::DegeneratePlane)
        ));
    }

    #[test]
    fn resample_same_size_is_identity() {
        let p0 = Vec3::new(7000.0, 0.0, 0.0);
        let pf = Vec3::new(1000.0, 9000.0, 300.0);
        let c = initial_curve(&p0, &pf, Homotopy::Direct, 25).unwrap();
        assert_eq!(resample_curve(&c, 25).unwrap(), c);
        let up = resample_curve(&c, 30).unwrap();
        let down = resample_curve(&up, 25).unwrap();
        for (a, b) in down.nodes.iter().zip(&c.nodes) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn recovers_kepler_ellipse() {
        let p0 = Vec3::new(7000.0, 1000.0, -500.0);
        let pf = Vec3::new(-3000.0, 11000.0, 2500.0);
        let a = kepler::a_min(&p0, &pf) * 1.5;
        let ellipse = kepler::transfer_for_branch(MU, &p0, &pf, a, 2).unwrap();
        let metric = earth(ellipse.energy());
        let res = flow_to_geodesic(&metric, &p0, &pf, Homotopy::Direct, &HeatFlowConfig::refine()).unwrap();
        assert!(res.converged, "residual {}", res.final_residual);
        let exact = ellipse.to_discrete_curve(30).unwrap();
        let dev = res
            .curve
            .nodes
            .iter()
            .zip(&exact.nodes)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).norm()));
        assert!(dev < 1e-3 * (pf - p0).norm(), "deviation {dev}");
        let (v0, vf) = endpoint_velocities(&res).unwrap();
        assert!((v0 - ellipse.departure_velocity().unwrap()).norm() < 1e-6);
        assert!((vf - ellipse.arrival_velocity().unwrap()).norm() < 1e-6);
        let l = res.length;
        let e = metric.curve_energy(&res.curve).unwrap();
        assert!((e - l * l).abs() <= 1e-6 * e);
    }

    #[test]
    fn endpoints_stay_pinned() {
        let p0 = Vec3::new(7000.0, 0.0, 0.0);
        let pf = Vec3::new(-5000.0, 8000.0, 100.0);
        let metric = earth(kepler::energy_of_sma(MU, 9000.0).unwrap());
        for h in Homotopy::ALL {
            let res = flow_to_geodesic(&metric, &p0, &pf, h, &HeatFlowConfig::coarse()).unwrap();
            assert_eq!(res.curve.start(), p0);
            assert_eq!(res.curve.end(), pf);
        }
    }

    #[test]
    fn bad_config_rejected() {
        let mut cfg = HeatFlowConfig::coarse();
        cfg.n_nodes = 4;
        assert!(cfg.validate().is_err());
        cfg = HeatFlowConfig::coarse();
        cfg.ode_tol = 0.0;
        assert!(cfg.validate().is_err());
    }
}
