//! Covariance matrix adaptation evolution strategy on the unit box.
//!
//! Standard (mu/mu_w, lambda) CMA-ES with rank-one and rank-mu updates and
//! cumulative step-size adaptation. Out-of-box samples are repaired (clamped,
//! or wrapped for periodic coordinates) and clamped ones pay a quadratic
//! penalty. A generation is evaluated in parallel and consumed in sample order.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesOptions {
    pub lambda: usize,
    pub sigma0: f64,
    pub max_generations: usize,
    /// Stop once the objective spread over recent generations is below this.
    pub ftol: f64,
    /// Coordinates that wrap around instead of being clamped.
    pub periodic: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CmaesOutcome {
    pub x: Vec<f64>,
    pub f: f64,
    pub generations: usize,
    pub evaluations: usize,
}

const PENALTY: f64 = 1e3;
const HISTORY: usize = 10;

fn repair(x: &[f64], periodic: &[bool]) -> (Vec<f64>, f64) {
    let mut dist = 0.0;
    let out = x
        .iter()
        .zip(periodic)
        .map(|(&v, &p)| {
            if p {
                v.rem_euclid(1.0)
            } else {
                let c = v.clamp(0.0, 1.0);
                dist += (v - c) * (v - c);
                c
            }
        })
        .collect();
    (out, dist)
}

pub fn minimize<F, R>(f: &F, mean0: &[f64], opts: &CmaesOptions, rng: &mut R) -> CmaesOutcome
where
    F: Fn(&[f64]) -> f64 + Sync,
    R: Rng,
{
    let n = mean0.len();
    assert_eq!(opts.periodic.len(), n, "periodic mask length");
    let lambda = opts.lambda.max(2);
    let mu = lambda / 2;
    let raw: Vec<f64> = (0..mu).map(|i| (mu as f64 + 0.5).ln() - ((i + 1) as f64).ln()).collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let nf = n as f64;
    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = DVector::from_column_slice(mean0);
    let mut sigma = opts.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut pc = DVector::<f64>::zeros(n);
    let mut ps = DVector::<f64>::zeros(n);

    let (x0, _) = repair(mean0, &opts.periodic);
    let mut best_f = f(&x0);
    let mut best_x = x0;
    let mut evaluations = 1;
    let mut recent: Vec<f64> = Vec::new();
    let mut generations = 0;

    while generations < opts.max_generations {
        generations += 1;
        let eig = SymmetricEigen::new(cov.clone());
        let d: Vec<f64> = eig.eigenvalues.iter().map(|v| v.max(1e-300).sqrt()).collect();
        let b = &eig.eigenvectors;
        let mut zs = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z: DVector<f64> = DVector::from_fn(n, |_, _| rng.sample(StandardNormal));
            zs.push(z);
        }
        let ys: Vec<DVector<f64>> = zs
            .iter()
            .map(|z| b * DVector::from_fn(n, |i, _| d[i] * z[i]))
            .collect();
        let xs: Vec<DVector<f64>> = ys.iter().map(|y| &mean + y * sigma).collect();
        let scored: Vec<(f64, Vec<f64>)> = xs
            .par_iter()
            .map(|x| {
                let (xr, dist) = repair(x.as_slice(), &opts.periodic);
                let v = f(&xr);
                (v + PENALTY * dist, xr)
            })
            .collect();
        evaluations += lambda;
        let fitness: Vec<f64> = scored.iter().map(|s| s.0).collect();
        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
        let top = order[0];
        if fitness[top] < best_f {
            best_f = fitness[top];
            best_x = scored[top].1.clone();
        }
        if !fitness[top].is_finite() {
            if generations >= HISTORY {
                break;
            }
            continue;
        }

        let old = mean.clone();
        mean = DVector::zeros(n);
        for (w, &i) in weights.iter().zip(&order) {
            mean += &xs[i] * *w;
        }
        let step = (&mean - &old) / sigma;
        let inv_sqrt = b * DMatrix::from_diagonal(&DVector::from_fn(n, |i, _| 1.0 / d[i])) * b.transpose();
        ps = &ps * (1.0 - cs) + &inv_sqrt * &step * (cs * (2.0 - cs) * mueff).sqrt();
        let norm_ps = ps.norm();
        let hsig = norm_ps / (1.0 - (1.0 - cs).powi(2 * generations as i32)).sqrt() / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hs = if hsig { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &step * (hs * (cc * (2.0 - cc) * mueff).sqrt());
        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &i) in weights.iter().zip(&order) {
            let y = (&xs[i] - &old) / sigma;
            rank_mu += &y * y.transpose() * *w;
        }
        cov = &cov * (1.0 - c1 - cmu)
            + (&pc * pc.transpose() + &cov * ((1.0 - hs) * cc * (2.0 - cc))) * c1
            + rank_mu * cmu;
        cov = (&cov + cov.transpose()) * 0.5;
        sigma *= ((cs / damps) * (norm_ps / chi_n - 1.0)).exp();

        recent.push(fitness[top]);
        if recent.len() > HISTORY {
            recent.remove(0);
        }
        let finite: Vec<f64> = order.iter().map(|&i| fitness[i]).filter(|v| v.is_finite()).collect();
        let spread_gen = finite.last().copied().unwrap_or(f64::INFINITY) - finite[0];
        let hi = recent.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lo = recent.iter().copied().fold(f64::INFINITY, f64::min);
        if generations >= HISTORY && spread_gen.max(hi - lo) <= opts.ftol {
            break;
        }
        let dmax = d.iter().copied().fold(0.0, f64::max);
        if sigma * dmax < 1e-13 || !sigma.is_finite() {
            break;
        }
    }
    CmaesOutcome { x: best_x, f: best_f, generations, evaluations }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn opts(periodic: Vec<bool>) -> CmaesOptions {
        CmaesOptions { lambda: 8, sigma0: 0.2, max_generations: 2000, ftol: 1e-14, periodic }
    }

    #[test]
    fn finds_quadratic_minimum() {
        let target = [0.3, 0.7, 0.45, 0.12];
        let f = |x: &[f64]| x.iter().zip(&target).map(|(a, b)| (a - b).powi(2) * 10.0).sum::<f64>();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let out = minimize(&f, &[0.5; 4], &opts(vec![false; 4]), &mut rng);
        for (a, b) in out.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-6, "{:?}", out.x);
        }
    }

    #[test]
    fn minimum_on_boundary() {
        let f = |x: &[f64]| (x[0] + 1.0).powi(2) + (x[1] - 0.5).powi(2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let out = minimize(&f, &[0.5, 0.5], &opts(vec![false; 2]), &mut rng);
        assert!(out.x[0] < 1e-8 && (out.x[1] - 0.5).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn periodic_coordinate_wraps() {
        // Minimum at 0.95 reached from 0.1 by wrapping below zero.
        let f = |x: &[f64]| {
            let d = (x[0] - 0.95 + 0.5).rem_euclid(1.0) - 0.5;
            d * d
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = minimize(&f, &[0.1], &opts(vec![true]), &mut rng);
        assert!((out.x[0] - 0.95).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn deterministic_for_seed() {
        let f = |x: &[f64]| (x[0] - 0.2).powi(2) + (x[1] * 3.0).sin();
        let run = || minimize(&f, &[0.5, 0.5], &opts(vec![false; 2]), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(run(), run());
    }
}
