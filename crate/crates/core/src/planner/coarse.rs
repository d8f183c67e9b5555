use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::astro::OrbitState;
use crate::error::{Error, Result};
use crate::heatflow::Homotopy;

use super::evaluate::{branch_centre, is_same_point, level_fractions, Evaluator};
use super::problem::TransferProblem;
use super::{Backend, PlannerConfig, TransferSolution};

/// Counters collected while searching.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SearchDiagnostics {
    /// Endpoint pairs on the coarse grid.
    pub position_pairs: usize,
    /// Endpoint pairs times energy levels times two traversal directions.
    pub sample_directions: usize,
    /// Geodesic candidates attempted (every branch of every sample).
    pub candidates: usize,
    pub feasible: usize,
    /// Hill-region violations, non-convergence and other per-sample failures.
    pub infeasible: usize,
    /// Collinear endpoint pairs skipped.
    pub degenerate: usize,
    /// Objective evaluations during refinement.
    pub refine_evaluations: usize,
}

impl SearchDiagnostics {
    fn absorb(&mut self, other: &SearchDiagnostics) {
        self.position_pairs += other.position_pairs;
        self.sample_directions += other.sample_directions;
        self.candidates += other.candidates;
        self.feasible += other.feasible;
        self.infeasible += other.infeasible;
        self.degenerate += other.degenerate;
        self.refine_evaluations += other.refine_evaluations;
    }
}

#[derive(Debug, Clone)]
pub struct CoarseOutcome {
    /// Best candidates, lowest ΔV first.
    pub ranked: Vec<TransferSolution>,
    pub diagnostics: SearchDiagnostics,
}

/// Keeps the `cap` lowest `(dv, order)` entries.
struct Best {
    cap: usize,
    items: Vec<(f64, usize, TransferSolution)>,
}

impl Best {
    fn new(cap: usize) -> Self {
        Best { cap, items: Vec::with_capacity(cap + 1) }
    }

    fn offer(&mut self, order: usize, sol: TransferSolution) {
        let key = (sol.total_dv, order);
        if self.items.len() == self.cap {
            let worst = self.items.last().expect("cap >= 1");
            if cmp_key(&key, &(worst.0, worst.1)).is_ge() {
                return;
            }
        }
        let pos = self.items.partition_point(|e| cmp_key(&(e.0, e.1), &key).is_lt());
        self.items.insert(pos, (sol.total_dv, order, sol));
        self.items.truncate(self.cap);
    }
}

fn cmp_key(a: &(f64, usize), b: &(f64, usize)) -> std::cmp::Ordering {
    a.0.total_cmp(&b.0).then(a.1.cmp(&b.1))
}

/// Evaluate every sample of the coarse grid and keep the `n_best` cheapest
/// feasible candidates. Rows are processed in parallel and merged by sample
/// index, so the result does not depend on scheduling.
pub fn coarse_search(problem: &TransferProblem, cfg: &PlannerConfig) -> Result<CoarseOutcome> {
    let ev = Evaluator::new(problem, cfg)?;
    coarse_with(&ev)
}

pub(crate) fn coarse_with(ev: &Evaluator) -> Result<CoarseOutcome> {
    let cfg = ev.cfg;
    let u0s = ev.tracks[0].sample_fractions(cfg.n_pos_samples);
    let ufs = ev.tracks[1].sample_fractions(cfg.n_pos_samples);
    let s0s = u0s.iter().map(|&u| ev.tracks[0].state(u)).collect::<Result<Vec<_>>>()?;
    let sfs = ufs.iter().map(|&u| ev.tracks[1].state(u)).collect::<Result<Vec<_>>>()?;
    let levels = level_fractions(cfg.n_energy_samples);
    let n_branch = 4;
    let rows = s0s.len();
    let done = std::sync::atomic::AtomicUsize::new(0);
    let per_row: Vec<(Best, SearchDiagnostics)> = (0..rows)
        .into_par_iter()
        .map(|i| {
            let mut best = Best::new(cfg.n_best);
            let mut diag = SearchDiagnostics::default();
            for (j, sf) in sfs.iter().enumerate() {
                diag.position_pairs += 1;
                for (k, &w) in levels.iter().enumerate() {
                    diag.sample_directions += 2;
                    let base = ((i * sfs.len() + j) * levels.len() + k) * n_branch;
                    let x = [u0s[i], ufs[j], w, 0.0];
                    sample(ev, &s0s[i], sf, x, base, &mut best, &mut diag);
                }
            }
            let finished = done.fetch_add(1, std::sync::atomic::Ordering::Relaxed) + 1;
            if cfg.backend == Backend::Heatflow && finished.is_multiple_of((rows / 10).max(1)) {
                log::info!("coarse search: {finished}/{rows} rows");
            }
            (best, diag)
        })
        .collect();
    let mut diagnostics = SearchDiagnostics::default();
    let mut merged = Best::new(cfg.n_best);
    for (best, diag) in per_row {
        diagnostics.absorb(&diag);
        for (_, order, sol) in best.items {
            merged.offer(order, sol);
        }
    }
    if merged.items.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok(CoarseOutcome { ranked: merged.items.into_iter().map(|e| e.2).collect(), diagnostics })
}

fn sample(
    ev: &Evaluator,
    s0: &OrbitState,
    sf: &OrbitState,
    x: [f64; 4],
    base: usize,
    best: &mut Best,
    diag: &mut SearchDiagnostics,
) {
    if is_same_point(&s0.r, &sf.r) {
        diag.candidates += 1;
        match ev.evaluate(&x, &ev.cfg.coarse_flow) {
            Ok(sol) => {
                diag.feasible += 1;
                best.offer(base, sol);
            }
            Err(_) => diag.infeasible += 1,
        }
        return;
    }
    match ev.cfg.backend {
        Backend::Ellipse => match ev.ellipse_branches(s0, sf, x[0], x[1], x[2]) {
            Ok(sols) => {
                diag.candidates += 4;
                diag.feasible += sols.len();
                diag.infeasible += 4 - sols.len();
                for sol in sols {
                    let idx = super::decode_branch(Backend::Ellipse, sol.decision[3]);
                    best.offer(base + idx, sol);
                }
            }
            Err(Error::DegeneratePlane) => diag.degenerate += 1,
            Err(_) => {
                diag.candidates += 4;
                diag.infeasible += 4;
            }
        },
        Backend::Heatflow => {
            for (h, homotopy) in Homotopy::ALL.into_iter().enumerate() {
                diag.candidates += 1;
                let xh = [x[0], x[1], x[2], branch_centre(Backend::Heatflow, h)];
                match ev.heatflow_solution(s0, sf, &xh, homotopy, &ev.cfg.coarse_flow) {
                    Ok(sol) => {
                        diag.feasible += 1;
                        best.offer(base + h, sol);
                    }
                    Err(Error::DegeneratePlane) => {
                        diag.candidates -= 1;
                        diag.degenerate += 1;
                        break;
                    }
                    Err(e) => {
                        log::trace!("sample {base}: {e}");
                        diag.infeasible += 1;
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn best_keeps_lowest_in_order() {
        let mk = |dv: f64| TransferSolution {
            total_dv: dv,
            ..dummy()
        };
        let mut b = Best::new(2);
        b.offer(5, mk(3.0));
        b.offer(1, mk(2.0));
        b.offer(7, mk(2.0));
        b.offer(0, mk(9.0));
        let orders: Vec<usize> = b.items.iter().map(|e| e.1).collect();
        assert_eq!(orders, vec![1, 7]);
    }

    fn dummy() -> TransferSolution {
        use crate::astro::Vec3;
        TransferSolution {
            p0: Vec3::x(),
            pf: Vec3::y(),
            v_initial: Vec3::zeros(),
            v_target: Vec3::zeros(),
            v_depart: Vec3::zeros(),
            v_arrive: Vec3::zeros(),
            dv0: Vec3::zeros(),
            dvf: Vec3::zeros(),
            total_dv: 0.0,
            energy: -1.0,
            tof: 0.0,
            branch: super::super::Branch::Coast,
            curve: None,
            provenance: super::super::Provenance::Coarse,
            decision: [0.0; 4],
            residual: 0.0,
        }
    }
}
