//! Polynomial collocation on `s ∈ [0, 1]`: Chebyshev–Lobatto nodes,
//! barycentric interpolation, differentiation matrices and quadrature.
//!
//! Nodes are ordered with `s` increasing. Any strictly increasing node set is
//! accepted; Chebyshev–Lobatto nodes get closed-form barycentric weights.

use std::f64::consts::PI;

use nalgebra::DMatrix;

/// Chebyshev–Lobatto parameters `s_k = sin²(πk / 2(n-1))`, `k = 0..n`.
pub fn lobatto_params(n: usize) -> Vec<f64> {
    assert!(n >= 2, "need at least two nodes");
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| {
            let s = (PI * k as f64 / (2.0 * m)).sin();
            s * s
        })
        .collect()
}

/// True when `params` coincide with the Chebyshev–Lobatto set of the same size.
pub fn is_lobatto(params: &[f64]) -> bool {
    params.len() >= 2
        && lobatto_params(params.len())
            .iter()
            .zip(params)
            .all(|(a, b)| (a - b).abs() <= 1e-14)
}

/// Differentiation and quadrature operators for one node set.
#[derive(Debug, Clone)]
pub struct Grid {
    params: Vec<f64>,
    bary: Vec<f64>,
    d1: DMatrix<f64>,
    d2: DMatrix<f64>,
    quad: Vec<f64>,
}

impl Grid {
    pub fn lobatto(n: usize) -> Self {
        let params = lobatto_params(n);
        let bary = (0..n)
            .map(|k| {
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                if k == 0 || k == n - 1 {
                    0.5 * sign
                } else {
                    sign
                }
            })
            .collect();
        let quad = clenshaw_curtis(n);
        Self::build(params, bary, Some(quad))
    }

    /// Grid on arbitrary strictly increasing parameters.
    pub fn from_params(params: &[f64]) -> Self {
        if is_lobatto(params) {
            return Self::lobatto(params.len());
        }
        let n = params.len();
        let mut bary = vec![1.0; n];
        for k in 0..n {
            for j in 0..n {
                if j != k {
                    bary[k] /= params[k] - params[j];
                }
            }
        }
        let scale = bary.iter().fold(0.0f64, |m, w| m.max(w.abs()));
        bary.iter_mut().for_each(|w| *w /= scale);
        Self::build(params.to_vec(), bary, None)
    }

    fn build(params: Vec<f64>, bary: Vec<f64>, quad: Option<Vec<f64>>) -> Self {
        let n = params.len();
        let mut d1 = DMatrix::zeros(n, n);
        let mut d2 = DMatrix::zeros(n, n);
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = (bary[j] / bary[i]) / (params[i] - params[j]);
                    d1[(i, j)] = v;
                    diag -= v;
                }
            }
            d1[(i, i)] = diag;
        }
        // Second derivative via the barycentric recurrence; diagonal by the
        // negative-sum rule so constants and linear functions stay exact.
        for i in 0..n {
            let mut diag = 0.0;
            for j in 0..n {
                if i != j {
                    let v = 2.0 * d1[(i, j)] * (d1[(i, i)] - 1.0 / (params[i] - params[j]));
                    d2[(i, j)] = v;
                    diag -= v;
                }
            }
            d2[(i, i)] = diag;
        }
        let mut grid = Grid { params, bary, d1, d2, quad: Vec::new() };
        grid.quad = match quad {
            Some(q) => q,
            None => {
                // Integrate the interpolant exactly: map onto a Lobatto grid of
                // equal size and use Clenshaw–Curtis there.
                let target = lobatto_params(n);
                let cc = clenshaw_curtis(n);
                let l = grid.interpolation_matrix(&target);
                (0..n).map(|j| (0..n).map(|i| cc[i] * l[(i, j)]).sum()).collect()
            }
        };
        grid
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn d1(&self) -> &DMatrix<f64> {
        &self.d1
    }

    pub fn d2(&self) -> &DMatrix<f64> {
        &self.d2
    }

    /// Quadrature weights integrating the interpolant over `[0, 1]`.
    pub fn quadrature(&self) -> &[f64] {
        &self.quad
    }

    /// Barycentric Lagrange basis values at `x`.
    pub fn basis_at(&self, x: f64) -> Vec<f64> {
        let n = self.len();
        let mut out = vec![0.0; n];
        if let Some(k) = self.params.iter().position(|&p| p == x) {
            out[k] = 1.0;
            return out;
        }
        let mut denom = 0.0;
        for k in 0..n {
            let t = self.bary[k] / (x - self.params[k]);
            out[k] = t;
            denom += t;
        }
        out.iter_mut().for_each(|v| *v /= denom);
        out
    }

    pub fn interpolation_matrix(&self, targets: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(targets.len(), self.len());
        for (i, &x) in targets.iter().enumerate() {
            for (j, b) in self.basis_at(x).into_iter().enumerate() {
                m[(i, j)] = b;
            }
        }
        m
    }

    /// `∫_0^{t} p(s) ds` for each target, where `p` interpolates `values`.
    pub fn cumulative_integral(&self, values: &[f64], targets: &[f64]) -> Vec<f64> {
        let n = self.len();
        let lobatto_values: Vec<f64> = if is_lobatto(&self.params) {
            values.to_vec()
        } else {
            let l = self.interpolation_matrix(&lobatto_params(n));
            (0..n).map(|i| (0..n).map(|j| l[(i, j)] * values[j]).sum()).collect()
        };
        let coeffs = chebyshev_coefficients(&lobatto_values);
        let integral = integrate_coefficients(&coeffs);
        // Anchor at the left end so the integral starts at exactly zero.
        let base = clenshaw(&integral, -1.0);
        targets.iter().map(|&t| 0.5 * (clenshaw(&integral, 2.0 * t - 1.0) - base)).collect()
    }
}

/// Clenshaw–Curtis weights for `n` Lobatto points on `[0, 1]`.
pub fn clenshaw_curtis(n: usize) -> Vec<f64> {
    assert!(n >= 2);
    let m = n - 1;
    let mf = m as f64;
    let mut w = vec![0.0; n];
    if m == 1 {
        return vec![0.5, 0.5];
    }
    let mut v = vec![1.0; m - 1];
    if m.is_multiple_of(2) {
        w[0] = 1.0 / (mf * mf - 1.0);
        w[m] = w[0];
        for k in 1..m / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                let theta = PI * (i + 1) as f64 / mf;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
        for (i, vi) in v.iter_mut().enumerate() {
            let theta = PI * (i + 1) as f64 / mf;
            *vi -= (mf * theta).cos() / (mf * mf - 1.0);
        }
    } else {
        w[0] = 1.0 / (mf * mf);
        w[m] = w[0];
        for k in 1..=(m - 1) / 2 {
            let kf = k as f64;
            for (i, vi) in v.iter_mut().enumerate() {
                let theta = PI * (i + 1) as f64 / mf;
                *vi -= 2.0 * (2.0 * kf * theta).cos() / (4.0 * kf * kf - 1.0);
            }
        }
    }
    for i in 1..m {
        w[i] = 2.0 * v[i - 1] / mf;
    }
    // [-1, 1] -> [0, 1]
    w.iter_mut().for_each(|x| *x *= 0.5);
    w
}

/// Chebyshev coefficients (in `x = 2s - 1`) of the interpolant through values
/// on Lobatto nodes ordered by increasing `s`.
pub fn chebyshev_coefficients(values: &[f64]) -> Vec<f64> {
    let n = values.len();
    let m = n - 1;
    let mf = m as f64;
    // g_j = value at x_j = cos(πj/m), i.e. reversed order.
    let g: Vec<f64> = values.iter().rev().copied().collect();
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for (j, gj) in g.iter().enumerate() {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                acc += w * gj * (PI * (k * j) as f64 / mf).cos();
            }
            let c = 2.0 * acc / mf;
            if k == 0 || k == m {
                0.5 * c
            } else {
                c
            }
        })
        .collect()
}

/// Coefficients of the antiderivative in `x` vanishing at `x = -1`.
fn integrate_coefficients(a: &[f64]) -> Vec<f64> {
    let n = a.len();
    let get = |k: usize| if k < n { a[k] } else { 0.0 };
    let mut b = vec![0.0; n + 1];
    for k in 1..=n {
        let prev = if k == 1 { 2.0 * get(0) } else { get(k - 1) };
        b[k] = (prev - get(k + 1)) / (2.0 * k as f64);
    }
    let at_minus_one: f64 = b
        .iter()
        .enumerate()
        .skip(1)
        .map(|(k, bk)| if k % 2 == 0 { *bk } else { -bk })
        .sum();
    b[0] = -at_minus_one;
    b
}

/// Evaluate a Chebyshev series at `x ∈ [-1, 1]`.
pub fn clenshaw(coeffs: &[f64], x: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * x * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    x * b1 - b2 + coeffs[0]
}
