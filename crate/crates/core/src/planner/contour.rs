use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::evaluate::{branch_centre, is_same_point, Evaluator};
use super::problem::TransferProblem;
use super::{Backend, PlannerConfig};

/// Optimal ΔV over `(u0, uf)` with `u = i / n` for `i` in `0..=n`, so the
/// last row and column repeat the first. Cells without a feasible transfer hold NaN.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourGrid {
    pub u0: Vec<f64>,
    pub uf: Vec<f64>,
    /// Row-major: `values[i][j]` is at `(u0[i], uf[j])`.
    pub values: Vec<Vec<f64>>,
}

impl ContourGrid {
    /// Smallest finite value and its cell.
    pub fn minimum(&self) -> Option<(f64, usize, usize)> {
        let mut best: Option<(f64, usize, usize)> = None;
        for (i, row) in self.values.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                if v.is_finite() && best.is_none_or(|b| v < b.0) {
                    best = Some((v, i, j));
                }
            }
        }
        best
    }
}

const SCAN_POINTS: usize = 16;
const GOLDEN_TOL: f64 = 1e-10;

/// Optimal ΔV over an `n0 x nf` division of both orbits (one extra closing
/// row and column): for each cell
/// and branch the energy fraction is minimized by a scan followed by golden
/// section search.
pub fn contour_grid(problem: &TransferProblem, cfg: &PlannerConfig, n0: usize, nf: usize) -> Result<ContourGrid> {
    if cfg.backend != Backend::Ellipse {
        return Err(Error::invalid("contour grids use the ellipse backend"));
    }
    if n0 < 1 || nf < 1 {
        return Err(Error::invalid("contour resolution must be at least 1"));
    }
    let ev = Evaluator::new(problem, cfg)?;
    let u0: Vec<f64> = (0..=n0).map(|i| i as f64 / n0 as f64).collect();
    let uf: Vec<f64> = (0..=nf).map(|j| j as f64 / nf as f64).collect();
    // Wrap the closing fraction to 0 so row n0 reproduces row 0 bit for bit.
    let wrap = |u: f64| if u >= 1.0 { 0.0 } else { u };
    let s0s = u0.iter().map(|&u| ev.tracks[0].state(wrap(u))).collect::<Result<Vec<_>>>()?;
    let sfs = uf.iter().map(|&u| ev.tracks[1].state(wrap(u))).collect::<Result<Vec<_>>>()?;
    let values = s0s
        .par_iter()
        .enumerate()
        .map(|(i, s0)| {
            sfs.iter()
                .enumerate()
                .map(|(j, sf)| {
                    if is_same_point(&s0.r, &sf.r) {
                        return (sf.v - s0.v).norm();
                    }
                    (0..4)
                        .map(|b| {
                            let x = |w: f64| [wrap(u0[i]), wrap(uf[j]), w, branch_centre(Backend::Ellipse, b)];
                            let f = |w: f64| ev.objective(&x(w), &cfg.refine_flow);
                            minimize_scalar(&f)
                        })
                        .fold(f64::NAN, |m, v| if v.is_finite() && !(v >= m) { v } else { m })
                })
                .collect()
        })
        .collect();
    Ok(ContourGrid { u0, uf, values })
}

/// Minimum of `f` on `[0, 1]`: coarse scan, then golden section around the
/// best scan point.
fn minimize_scalar(f: &dyn Fn(f64) -> f64) -> f64 {
    let pts: Vec<(f64, f64)> = (0..=SCAN_POINTS)
        .map(|k| {
            let w = k as f64 / SCAN_POINTS as f64;
            (w, f(w))
        })
        .collect();
    let (k, &(_, fk)) = pts
        .iter()
        .enumerate()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .expect("scan is non-empty");
    if !fk.is_finite() {
        return f64::NAN;
    }
    let mut lo = pts[k.saturating_sub(1)].0;
    let mut hi = pts[(k + 1).min(SCAN_POINTS)].0;
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - ratio * (hi - lo);
    let mut b = lo + ratio * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    while hi - lo > GOLDEN_TOL * (1.0 + hi.abs()) {
        if fa <= fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - ratio * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + ratio * (hi - lo);
            fb = f(b);
        }
    }
    [fk, fa, fb, f(lo), f(hi)].into_iter().filter(|v| v.is_finite()).fold(f64::INFINITY, f64::min)
}

/// Connected groups of cells within `tol` of the grid minimum, with the grid
/// treated as a torus (the duplicated closing row and column are dropped).
pub fn count_near_optimal_regions(grid: &ContourGrid, tol: f64) -> usize {
    let Some((min, _, _)) = grid.minimum() else {
        return 0;
    };
    let rows = grid.values.len().saturating_sub(1);
    let cols = grid.values.first().map_or(0, |r| r.len()).saturating_sub(1);
    if rows == 0 || cols == 0 {
        return 0;
    }
    let near = |i: usize, j: usize| {
        let v = grid.values[i][j];
        v.is_finite() && v <= min + tol
    };
    let mut seen = vec![vec![false; cols]; rows];
    let mut regions = 0;
    for i in 0..rows {
        for j in 0..cols {
            if seen[i][j] || !near(i, j) {
                continue;
            }
            regions += 1;
            let mut stack = vec![(i, j)];
            seen[i][j] = true;
            while let Some((a, b)) = stack.pop() {
                let nbrs = [((a + 1) % rows, b), ((a + rows - 1) % rows, b), (a, (b + 1) % cols), (a, (b + cols - 1) % cols)];
                for (x, y) in nbrs {
                    if !seen[x][y] && near(x, y) {
                        seen[x][y] = true;
                        stack.push((x, y));
                    }
                }
            }
        }
    }
    regions
}
