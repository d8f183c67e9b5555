use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

use super::cmaes::{minimize, CmaesOptions};
use super::evaluate::{branch_centre, Decision, Evaluator};
use super::problem::TransferProblem;
use super::{Backend, PlannerConfig, Provenance, TransferSolution};

#[derive(Debug, Clone)]
pub struct RefineOutcome {
    pub best: TransferSolution,
    pub evaluations: usize,
    pub local_runs: usize,
    /// Basin hops that improved the incumbent.
    pub hops_accepted: usize,
}

/// Refine coarse candidates with CMA-ES, optionally inside monotonic basin
/// hopping. Never returns anything worse than the best seed.
pub fn refine(problem: &TransferProblem, cfg: &PlannerConfig, seeds: &[TransferSolution]) -> Result<RefineOutcome> {
    let ev = Evaluator::new(problem, cfg)?;
    refine_with(&ev, seeds)
}

fn options(ev: &Evaluator, lambda: usize) -> CmaesOptions {
    let p = ev.periodic();
    CmaesOptions {
        lambda,
        sigma0: ev.cfg.initial_sigma,
        max_generations: ev.cfg.refine_generations,
        ftol: ev.cfg.refine_tol,
        periodic: vec![p, p, false, false],
    }
}

fn to_decision(x: &[f64]) -> Decision {
    [x[0], x[1], x[2], x[3]]
}

pub(crate) fn refine_with(ev: &Evaluator, seeds: &[TransferSolution]) -> Result<RefineOutcome> {
    if seeds.is_empty() {
        return Err(Error::invalid("refinement needs at least one seed"));
    }
    let cfg = ev.cfg;
    let flow = cfg.refine_flow;
    let objective = |x: &[f64]| ev.objective(&to_decision(x), &flow);
    let opts = options(ev, cfg.population());
    let mut evaluations = 0;
    let mut local_runs = 0;
    let mut hops_accepted = 0;
    let mut best: Option<(f64, Decision)> = None;

    for (si, seed) in seeds.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ (0x9E37_79B9_7F4A_7C15u64.wrapping_mul(si as u64 + 1)));
        let seed_f = objective(&seed.decision);
        evaluations += 1;
        let run = minimize(&objective, &seed.decision, &opts, &mut rng);
        local_runs += 1;
        evaluations += run.evaluations;
        let (mut inc_f, mut inc_x) = if run.f < seed_f { (run.f, to_decision(&run.x)) } else { (seed_f, seed.decision) };
        if cfg.use_mbh {
            let mut failures = 0;
            while failures < cfg.mbh_stop {
                let start: Vec<f64> = inc_x
                    .iter()
                    .map(|&v| v + rng.random_range(-cfg.mbh_max_step..=cfg.mbh_max_step))
                    .collect();
                let hop = minimize(&objective, &start, &opts, &mut rng);
                local_runs += 1;
                evaluations += hop.evaluations;
                if hop.f < inc_f {
                    inc_f = hop.f;
                    inc_x = to_decision(&hop.x);
                    hops_accepted += 1;
                    failures = 0;
                } else {
                    failures += 1;
                }
            }
        }
        log::debug!("seed {si}: coarse {:.9} refined {:.9}", seed.total_dv, inc_f);
        if best.is_none_or(|(f, _)| inc_f < f) {
            best = Some((inc_f, inc_x));
        }
    }

    let (best_f, best_x) = best.expect("at least one seed");
    let best = if best_f.is_finite() {
        let mut sol = ev.evaluate(&best_x, &flow)?;
        ev.attach_curve(&mut sol)?;
        sol.provenance = Provenance::Refined;
        sol
    } else {
        // Nothing evaluates at refinement fidelity; fall back to the coarse winner.
        let mut sol = seeds
            .iter()
            .min_by(|a, b| a.total_dv.total_cmp(&b.total_dv))
            .expect("non-empty")
            .clone();
        ev.attach_curve(&mut sol)?;
        sol
    };
    Ok(RefineOutcome { best, evaluations, local_runs, hops_accepted })
}

/// Skip the coarse grid: start CMA-ES from the best member of an evenly
/// spaced population of minimum-energy transfers.
pub fn refine_only(problem: &TransferProblem, cfg: &PlannerConfig) -> Result<RefineOutcome> {
    if cfg.backend != Backend::Ellipse {
        return Err(Error::invalid("refine-only mode uses the ellipse backend"));
    }
    let ev = Evaluator::new(problem, cfg)?;
    refine_only_with(&ev)
}

pub(crate) fn refine_only_with(ev: &Evaluator) -> Result<RefineOutcome> {
    let cfg = ev.cfg;
    let pop = cfg.population();
    let side = ((pop / 2) as f64).sqrt().floor().max(1.0) as usize;
    // a = a_min (1 + 1e-6): just clear of the focus tangency.
    let w = 1e-6 / (cfg.sma_or_energy_multiplier - 1.0);
    let mut initial: Vec<Decision> = Vec::with_capacity(2 * side * side);
    for i in 0..side {
        for j in 0..side {
            for branch in [0, 1] {
                let b = branch_centre(cfg.backend, branch);
                initial.push([i as f64 / side as f64, j as f64 / side as f64, w, b]);
            }
        }
    }
    let flow = cfg.refine_flow;
    let scores: Vec<f64> = initial.par_iter().map(|x| ev.objective(x, &flow)).collect();
    let (start, start_f) = scores
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1).then(a.0.cmp(&b.0)))
        .map(|(i, f)| (initial[i], *f))
        .expect("non-empty population");
    if !start_f.is_finite() {
        return Err(Error::EmptyResult);
    }
    let objective = |x: &[f64]| ev.objective(&to_decision(x), &flow);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let run = minimize(&objective, &start, &options(ev, pop), &mut rng);
    let x = if run.f < start_f { to_decision(&run.x) } else { start };
    let mut best = ev.evaluate(&x, &flow)?;
    ev.attach_curve(&mut best)?;
    best.provenance = Provenance::Refined;
    Ok(RefineOutcome { best, evaluations: initial.len() + run.evaluations, local_runs: 1, hops_accepted: 0 })
}
