//! The Jacobi metric `g = 2(E - V(r)) I` of a gravity model at fixed energy,
//! plus discretized curves and the length/energy/geodesic-residual functionals
//! evaluated on them.

use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

use crate::astro::{GravityModel, Vec3};
use crate::error::{Error, Result};
use crate::spectral::{self, Grid};

/// Christoffel symbols `Γ[i][j][k] = Γ^i_{jk}`.
pub type Christoffel = [[[f64; 3]; 3]; 3];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JacobiMetric {
    pub model: GravityModel,
    /// Specific mechanical energy (km²/s²).
    pub energy: f64,
}

/// Conformal factor with its log-gradient at a point.
#[derive(Debug, Clone, Copy)]
pub(crate) struct LogFactor {
    pub phi: f64,
    /// `∇ ln φ`.
    pub grad: Vec3,
}

impl JacobiMetric {
    pub fn new(model: GravityModel, energy: f64) -> Self {
        JacobiMetric { model, energy }
    }

    /// `φ(r) = 2(E - V(r))`, unchecked for sign.
    pub fn conformal_factor(&self, r: &Vec3) -> Result<f64> {
        Ok(2.0 * (self.energy - self.model.potential(r)?))
    }

    fn hill_checked(&self, r: &Vec3, node: Option<usize>) -> Result<f64> {
        let phi = self.conformal_factor(r)?;
        if phi > 0.0 && phi.is_finite() {
            Ok(phi)
        } else {
            Err(Error::HillViolation { node, factor: phi })
        }
    }

    pub fn in_hill_region(&self, r: &Vec3) -> bool {
        self.hill_checked(r, None).is_ok()
    }

    pub fn metric_at(&self, r: &Vec3) -> Result<Matrix3<f64>> {
        Ok(Matrix3::identity() * self.hill_checked(r, None)?)
    }

    pub(crate) fn log_factor(&self, r: &Vec3, node: Option<usize>) -> Result<LogFactor> {
        let phi = self.hill_checked(r, node)?;
        let grad_phi = self.model.grad_potential(r)? * -2.0;
        Ok(LogFactor { phi, grad: grad_phi / phi })
    }

    /// Hessian of `ln φ`.
    pub(crate) fn log_factor_hessian(&self, r: &Vec3, lf: &LogFactor) -> Result<Matrix3<f64>> {
        let hess_phi = self.model.hessian_potential(r)? * -2.0;
        Ok(hess_phi / lf.phi - lf.grad * lf.grad.transpose())
    }

    /// Christoffel symbols of the conformally flat metric:
    /// `Γ^i_{jk} = ½ φ⁻¹ (δ_ij ∂_k φ + δ_ik ∂_j φ − δ_jk ∂_i φ)`.
    pub fn christoffel(&self, r: &Vec3) -> Result<Christoffel> {
        let lf = self.log_factor(r, None)?;
        let g = 0.5 * lf.grad;
        let mut out = [[[0.0; 3]; 3]; 3];
        for (i, gi) in out.iter_mut().enumerate() {
            for (j, gij) in gi.iter_mut().enumerate() {
                for (k, v) in gij.iter_mut().enumerate() {
                    let mut acc = 0.0;
                    if i == j {
                        acc += g[k];
                    }
                    if i == k {
                        acc += g[j];
                    }
                    if j == k {
                        acc -= g[i];
                    }
                    *v = acc;
                }
            }
        }
        Ok(out)
    }

    /// Contraction `Γ^i_{jk} u^j u^k`.
    pub fn christoffel_contract(&self, r: &Vec3, u: &Vec3) -> Result<Vec3> {
        let lf = self.log_factor(r, None)?;
        Ok(contract(&lf.grad, u))
    }

    pub fn curve_length(&self, curve: &DiscreteCurve) -> Result<f64> {
        let (speeds, grid) = self.jacobi_speed_squared(curve)?;
        Ok(grid.quadrature().iter().zip(&speeds).map(|(w, s2)| w * s2.sqrt()).sum())
    }

    pub fn curve_energy(&self, curve: &DiscreteCurve) -> Result<f64> {
        let (speeds, grid) = self.jacobi_speed_squared(curve)?;
        Ok(grid.quadrature().iter().zip(&speeds).map(|(w, s2)| w * s2).sum())
    }

    /// `c_sᵀ G(c) c_s` at every node.
    fn jacobi_speed_squared(&self, curve: &DiscreteCurve) -> Result<(Vec<f64>, Grid)> {
        let grid = curve.grid();
        let tangents = curve.tangents_on(&grid);
        let speeds = curve
            .nodes
            .iter()
            .zip(&tangents)
            .enumerate()
            .map(|(k, (r, t))| Ok(self.hill_checked(r, Some(k))? * t.norm_squared()))
            .collect::<Result<Vec<_>>>()?;
        Ok((speeds, grid))
    }

    /// Geodesic-equation residual `c'' + Γ(c)(c', c')` at every node.
    pub fn geodesic_residual(&self, curve: &DiscreteCurve) -> Result<Vec<Vec3>> {
        let grid = curve.grid();
        self.residual_on(&grid, &curve.nodes)
    }

    pub(crate) fn residual_on(&self, grid: &Grid, nodes: &[Vec3]) -> Result<Vec<Vec3>> {
        let first = apply(grid.d1(), nodes);
        let second = apply(grid.d2(), nodes);
        nodes
            .iter()
            .enumerate()
            .map(|(k, r)| {
                let lf = self.log_factor(r, Some(k))?;
                Ok(second[k] + contract(&lf.grad, &first[k]))
            })
            .collect()
    }

    /// Max interior residual normalized by the RMS coordinate speed `|c_s|`,
    /// giving a dimensionless convergence measure.
    pub fn scaled_residual(&self, curve: &DiscreteCurve) -> Result<f64> {
        let residual = self.geodesic_residual(curve)?;
        Ok(scale_residual(&residual, &curve.tangents()))
    }
}

pub(crate) fn scale_residual(residual: &[Vec3], tangents: &[Vec3]) -> f64 {
    let n = residual.len();
    let rms = (tangents.iter().map(|t| t.norm_squared()).sum::<f64>() / n as f64).sqrt();
    let max = residual[1..n - 1].iter().fold(0.0f64, |m, r| m.max(r.norm()));
    max / rms
}

/// `Γ(u, u)` for the conformal metric with log-gradient `g`.
#[inline]
pub(crate) fn contract(g: &Vec3, u: &Vec3) -> Vec3 {
    u * g.dot(u) - g * (0.5 * u.norm_squared())
}

pub(crate) fn apply(m: &nalgebra::DMatrix<f64>, nodes: &[Vec3]) -> Vec<Vec3> {
    (0..m.nrows())
        .map(|i| {
            let mut acc = Vec3::zeros();
            for (j, node) in nodes.iter().enumerate() {
                acc += node * m[(i, j)];
            }
            acc
        })
        .collect()
}

/// A curve sampled at parameters `0 = s_0 < … < s_last = 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteCurve {
    pub nodes: Vec<Vec3>,
    pub params: Vec<f64>,
}

impl DiscreteCurve {
    pub fn new(nodes: Vec<Vec3>, params: Vec<f64>) -> Result<Self> {
        let curve = DiscreteCurve { nodes, params };
        curve.validate()?;
        Ok(curve)
    }

    /// Nodes given on Chebyshev–Lobatto parameters.
    pub fn lobatto(nodes: Vec<Vec3>) -> Result<Self> {
        let params = spectral::lobatto_params(nodes.len().max(2));
        Self::new(nodes, params)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.nodes.len();
        if n < 3 {
            return Err(Error::invalid("curve needs at least 3 nodes"));
        }
        if self.params.len() != n {
            return Err(Error::invalid("curve nodes and params differ in length"));
        }
        if self.params[0] != 0.0 || self.params[n - 1] != 1.0 {
            return Err(Error::invalid("curve params must start at 0 and end at 1"));
        }
        if self.params.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::invalid("curve params must be strictly increasing"));
        }
        if self.nodes.iter().any(|p| p.iter().any(|c| !c.is_finite())) {
            return Err(Error::invalid("curve has non-finite nodes"));
        }
        if self.nodes.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("curve is not regular: coincident consecutive nodes"));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn start(&self) -> Vec3 {
        self.nodes[0]
    }

    pub fn end(&self) -> Vec3 {
        self.nodes[self.nodes.len() - 1]
    }

    pub fn grid(&self) -> Grid {
        Grid::from_params(&self.params)
    }

    /// `c_s` at every node (spectral differentiation).
    pub fn tangents(&self) -> Vec<Vec3> {
        self.tangents_on(&self.grid())
    }

    fn tangents_on(&self, grid: &Grid) -> Vec<Vec3> {
        apply(grid.d1(), &self.nodes)
    }

    /// Interpolated position at arbitrary `s`.
    pub fn point_at(&self, grid: &Grid, s: f64) -> Vec3 {
        combine(&grid.basis_at(s), &self.nodes)
    }

    /// Euclidean polyline length through the nodes (a cheap scale measure).
    pub fn polyline_length(&self) -> f64 {
        self.nodes.windows(2).map(|w| (w[1] - w[0]).norm()).sum()
    }

    /// Sign of the net rotation about `axis` swept by the curve: +1 for
    /// counter-clockwise, -1 for clockwise.
    pub fn winding_sign(&self, axis: &Vec3) -> f64 {
        let swept: f64 = self.nodes.windows(2).map(|w| w[0].cross(&w[1]).dot(axis)).sum();
        swept.signum()
    }
}

pub(crate) fn combine(weights: &[f64], nodes: &[Vec3]) -> Vec3 {
    weights.iter().zip(nodes).fold(Vec3::zeros(), |acc, (w, n)| acc + n * *w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::astro::{BodyConstants, ModelKind};
    use approx::assert_relative_eq;

    fn earth_metric(a: f64) -> JacobiMetric {
        let model = GravityModel::kepler(BodyConstants::EARTH);
        JacobiMetric::new(model, -model.mu() / (2.0 * a))
    }

    /// Flat metric with `2E = 2`: a Kepler body with negligible mu far away
    /// is not flat, so use the potential-free limit via a tiny mu.
    fn nearly_flat() -> JacobiMetric {
        let body = BodyConstants { mu: 1e-300, j2: 0.0, r_body: 1.0 };
        JacobiMetric::new(GravityModel::kepler(body), 1.0)
    }

    #[test]
    fn vis_viva_metric_value() {
        let a = 9000.0;
        let m = earth_metric(a);
        let g = m.metric_at(&Vec3::new(0.0, a, 0.0)).unwrap();
        let expected = 3.986e5 / a;
        assert_relative_eq!(g, Matrix3::identity() * expected, max_relative = 1e-14);
        assert_eq!(g[(0, 1)], 0.0);
    }

    #[test]
    fn hill_violation_outside_region() {
        let m = earth_metric(7000.0);
        // Hill radius is 2a = 14000 km.
        assert!(matches!(
            m.metric_at(&Vec3::new(15000.0, 0.0, 0.0)),
            Err(Error::HillViolation { .. })
        ));
        assert!(m.metric_at(&Vec3::new(13000.0, 0.0, 0.0)).is_ok());
    }

    #[test]
    fn j2_without_oblateness_matches_kepler_metric() {
        let kep = earth_metric(8000.0);
        let j2 = JacobiMetric::new(
            GravityModel { body: BodyConstants::EARTH, kind: ModelKind::J2 },
            kep.energy,
        );
        let r = Vec3::new(3000.0, 4000.0, -2000.0);
        assert_eq!(kep.metric_at(&r).unwrap(), j2.metric_at(&r).unwrap());
    }

    #[test]
    fn christoffel_vanishes_for_constant_potential() {
        let gamma = nearly_flat().christoffel(&Vec3::new(1.0, 2.0, 3.0)).unwrap();
        assert!(gamma.iter().flatten().flatten().all(|v| v.abs() < 1e-250));
    }

    #[test]
    fn straight_chord_in_flat_metric() {
        let m = nearly_flat();
        let p0 = Vec3::new(1.0, 0.0, 0.0);
        let pf = Vec3::new(4.0, 4.0, 0.0);
        let params = spectral::lobatto_params(9);
        let nodes = params.iter().map(|&s| p0 + (pf - p0) * s).collect();
        let curve = DiscreteCurve::new(nodes, params).unwrap();
        let l = m.curve_length(&curve).unwrap();
        let e = m.curve_energy(&curve).unwrap();
        assert_relative_eq!(l, 2.0f64.sqrt() * 5.0, max_relative = 1e-13);
        assert_relative_eq!(e, l * l, max_relative = 1e-13);
        let res = m.geodesic_residual(&curve).unwrap();
        assert!(res.iter().all(|r| r.norm() < 1e-10));
    }

    #[test]
    fn curve_validation() {
        let p = Vec3::new(1.0, 0.0, 0.0);
        assert!(DiscreteCurve::lobatto(vec![p, p * 2.0]).is_err());
        assert!(DiscreteCurve::lobatto(vec![p, p, p * 2.0]).is_err());
        assert!(DiscreteCurve::new(vec![p, p * 2.0, p * 3.0], vec![0.0, 0.7, 0.5]).is_err());
        assert!(DiscreteCurve::new(vec![p, p * 2.0, p * 3.0], vec![0.0, 0.5, 1.0]).is_ok());
    }

    #[test]
    fn winding_sign_follows_rotation() {
        let nodes: Vec<Vec3> = (0..5)
            .map(|k| {
                let t = k as f64 * 0.3;
                Vec3::new(t.cos(), t.sin(), 0.0)
            })
            .collect();
        let c = DiscreteCurve::lobatto(nodes.clone()).unwrap();
        assert_eq!(c.winding_sign(&Vec3::z()), 1.0);
        let rev = DiscreteCurve::lobatto(nodes.into_iter().rev().collect()).unwrap();
        assert_eq!(rev.winding_sign(&Vec3::z()), -1.0);
    }
}
