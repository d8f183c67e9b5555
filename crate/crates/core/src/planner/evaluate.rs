use crate::astro::{OrbitState, Vec3};
use crate::error::{Error, Result};
use crate::heatflow::{self, HeatFlowConfig, Homotopy};
use crate::kepler::{self, Arc, EllipseTransfer};
use crate::metric::JacobiMetric;

use super::problem::{OrbitTrack, TransferProblem};
use super::trajectory;
use super::{Backend, Branch, PlannerConfig, Provenance, TransferSolution};

/// Normalized decision vector `(u0, uf, w, b)`.
pub type Decision = [f64; 4];

/// Offset of the lowest sampled energy level above the minimum-energy bound.
pub const LEVEL_OFFSET: f64 = 1e-6;

/// Curve resolution attached to closed-form solutions.
pub const ELLIPSE_CURVE_NODES: usize = 64;

/// Energy interval `[E_min, E_max]` searched for a transfer between `p0` and `pf`.
///
/// Both backends share the Kepler minimum-energy bound; the upper end is the
/// energy of an ellipse with `multiplier * a_min`, i.e. `E_min / multiplier`.
pub fn energy_bounds(_backend: Backend, mu: f64, p0: &Vec3, pf: &Vec3, multiplier: f64) -> (f64, f64) {
    let e_min = -mu / (2.0 * kepler::a_min(p0, pf));
    (e_min, e_min / multiplier)
}

/// Sampled fractions of the energy interval: the lowest sits just above the
/// bound, the rest are evenly spaced up to the top.
pub fn level_fractions(n: usize) -> Vec<f64> {
    if n <= 1 {
        return vec![LEVEL_OFFSET];
    }
    (0..n).map(|k| LEVEL_OFFSET + (1.0 - LEVEL_OFFSET) * k as f64 / (n - 1) as f64).collect()
}

/// Branch index encoded by `b`: `0..4` for ellipses, `0..2` for homotopies.
pub fn decode_branch(backend: Backend, b: f64) -> usize {
    let count = match backend {
        Backend::Ellipse => 4,
        Backend::Heatflow => 2,
    };
    ((b * count as f64).floor().max(0.0) as usize).min(count - 1)
}

/// Centre of the `b` interval selecting branch `index`.
pub(crate) fn branch_centre(backend: Backend, index: usize) -> f64 {
    let count = match backend {
        Backend::Ellipse => 4.0,
        Backend::Heatflow => 2.0,
    };
    (index as f64 + 0.5) / count
}

/// Evaluate one decision vector. Convenience wrapper over [`Evaluator`].
pub fn evaluate(problem: &TransferProblem, cfg: &PlannerConfig, x: &Decision) -> Result<TransferSolution> {
    let ev = Evaluator::new(problem, cfg)?;
    let mut sol = ev.evaluate(x, &cfg.refine_flow)?;
    ev.attach_curve(&mut sol)?;
    Ok(sol)
}

pub(crate) struct Evaluator<'a> {
    pub problem: &'a TransferProblem,
    pub cfg: &'a PlannerConfig,
    pub tracks: [OrbitTrack; 2],
}

impl<'a> Evaluator<'a> {
    pub fn new(problem: &'a TransferProblem, cfg: &'a PlannerConfig) -> Result<Self> {
        problem.validate()?;
        cfg.validate()?;
        let t0 = OrbitTrack::new(&problem.model, &problem.initial, cfg.n_periods, cfg.n_pos_samples)?;
        let tf = OrbitTrack::new(&problem.model, &problem.target, cfg.n_periods, cfg.n_pos_samples)?;
        Ok(Evaluator { problem, cfg, tracks: [t0, tf] })
    }

    pub fn mu(&self) -> f64 {
        self.problem.model.mu()
    }

    pub fn periodic(&self) -> bool {
        self.tracks[0].is_periodic()
    }

    pub fn endpoints(&self, x: &Decision) -> Result<(OrbitState, OrbitState)> {
        Ok((self.tracks[0].state(x[0])?, self.tracks[1].state(x[1])?))
    }

    /// Total ΔV, or infinity when the candidate is infeasible.
    pub fn objective(&self, x: &Decision, flow: &HeatFlowConfig) -> f64 {
        match self.evaluate(x, flow) {
            Ok(s) if s.total_dv.is_finite() => s.total_dv,
            _ => f64::INFINITY,
        }
    }

    pub fn evaluate(&self, x: &Decision, flow: &HeatFlowConfig) -> Result<TransferSolution> {
        let (s0, sf) = self.endpoints(x)?;
        if is_same_point(&s0.r, &sf.r) {
            return Ok(coast(&s0, &sf, self.problem.model.specific_energy(&s0)?, *x));
        }
        match self.cfg.backend {
            Backend::Ellipse => {
                let a = self.sma_at(&s0.r, &sf.r, x[2]);
                let idx = decode_branch(Backend::Ellipse, x[3]);
                let t = kepler::transfer_for_branch(self.mu(), &s0.r, &sf.r, a, idx)?;
                ellipse_solution(&t, &s0, &sf, *x)
            }
            Backend::Heatflow => {
                let homotopy = Homotopy::ALL[decode_branch(Backend::Heatflow, x[3])];
                self.heatflow_solution(&s0, &sf, x, homotopy, flow)
            }
        }
    }

    /// Semi-major axis for fraction `w`, uniform in `a`.
    pub fn sma_at(&self, p0: &Vec3, pf: &Vec3, w: f64) -> f64 {
        let am = kepler::a_min(p0, pf);
        am * (1.0 + w.clamp(0.0, 1.0) * (self.cfg.sma_or_energy_multiplier - 1.0))
    }

    /// Energy for fraction `w`, uniform in `E`.
    pub fn energy_at(&self, p0: &Vec3, pf: &Vec3, w: f64) -> f64 {
        let (lo, hi) = energy_bounds(self.cfg.backend, self.mu(), p0, pf, self.cfg.sma_or_energy_multiplier);
        lo + w.clamp(0.0, 1.0) * (hi - lo)
    }

    /// All ellipse branches at one sample, in branch order. Entries are
    /// `None` where the branch does not exist or fails.
    pub fn ellipse_branches(&self, s0: &OrbitState, sf: &OrbitState, u0: f64, uf: f64, w: f64) -> Result<Vec<TransferSolution>> {
        let a = self.sma_at(&s0.r, &sf.r, w);
        let all = kepler::solve_transfer_ellipses(self.mu(), &s0.r, &sf.r, a)?;
        all.iter()
            .map(|t| {
                let idx = 2 * t.focus + usize::from(t.arc == Arc::Long);
                ellipse_solution(t, s0, sf, [u0, uf, w, branch_centre(Backend::Ellipse, idx)])
            })
            .collect()
    }

    pub fn heatflow_solution(
        &self,
        s0: &OrbitState,
        sf: &OrbitState,
        x: &Decision,
        homotopy: Homotopy,
        flow: &HeatFlowConfig,
    ) -> Result<TransferSolution> {
        let energy = self.energy_at(&s0.r, &sf.r, x[2]);
        let metric = JacobiMetric::new(self.problem.model, energy);
        let geo = heatflow::flow_to_geodesic(&metric, &s0.r, &sf.r, homotopy, flow)?;
        if !geo.converged {
            return Err(Error::NotConverged { residual: geo.final_residual });
        }
        let (v_depart, v_arrive) = heatflow::endpoint_velocities(&geo)?;
        let tof = trajectory::time_of_flight(&metric, &geo.curve)?;
        let mut sol = assemble(s0, sf, v_depart, v_arrive, energy, tof, Branch::Heatflow { homotopy }, *x);
        sol.residual = geo.final_residual;
        sol.curve = Some(geo.curve);
        Ok(sol)
    }

    /// Attach a sampled curve to closed-form solutions that lack one.
    pub fn attach_curve(&self, sol: &mut TransferSolution) -> Result<()> {
        if sol.curve.is_some() {
            return Ok(());
        }
        if let Branch::Ellipse { .. } = sol.branch {
            let t = self.ellipse_of(sol)?;
            let curve = t.to_discrete_curve(ELLIPSE_CURVE_NODES)?;
            sol.residual = t.metric().scaled_residual(&curve)?;
            sol.curve = Some(curve);
        }
        Ok(())
    }

    /// Rebuild the closed-form transfer behind an ellipse solution.
    pub fn ellipse_of(&self, sol: &TransferSolution) -> Result<EllipseTransfer> {
        let a = kepler::sma_of_energy(self.mu(), sol.energy)?;
        let idx = decode_branch(Backend::Ellipse, sol.decision[3]);
        kepler::transfer_for_branch(self.mu(), &sol.p0, &sol.pf, a, idx)
    }
}

pub(crate) fn is_same_point(a: &Vec3, b: &Vec3) -> bool {
    (a - b).norm() <= kepler::SAME_POINT_TOL * a.norm().max(b.norm())
}

fn coast(s0: &OrbitState, sf: &OrbitState, energy: f64, x: Decision) -> TransferSolution {
    // No transfer arc: the single impulse moves the state from one orbit to the other.
    assemble(s0, sf, s0.v, s0.v, energy, 0.0, Branch::Coast, x)
}

fn ellipse_solution(t: &EllipseTransfer, s0: &OrbitState, sf: &OrbitState, x: Decision) -> Result<TransferSolution> {
    let v_depart = t.departure_velocity()?;
    let v_arrive = t.arrival_velocity()?;
    let branch = Branch::Ellipse { focus: t.focus, arc: t.arc };
    Ok(assemble(s0, sf, v_depart, v_arrive, t.energy(), t.time_of_flight(), branch, x))
}

#[allow(clippy::too_many_arguments)]
fn assemble(
    s0: &OrbitState,
    sf: &OrbitState,
    v_depart: Vec3,
    v_arrive: Vec3,
    energy: f64,
    tof: f64,
    branch: Branch,
    decision: Decision,
) -> TransferSolution {
    let dv0 = v_depart - s0.v;
    let dvf = sf.v - v_arrive;
    TransferSolution {
        p0: s0.r,
        pf: sf.r,
        v_initial: s0.v,
        v_target: sf.v,
        v_depart,
        v_arrive,
        dv0,
        dvf,
        total_dv: dv0.norm() + dvf.norm(),
        energy,
        tof,
        branch,
        curve: None,
        provenance: Provenance::Coarse,
        decision,
        residual: 0.0,
    }
}
