//! Two-body state representation, point-mass and J2 potentials, numerical
//! propagation and orbit sampling.

use std::f64::consts::TAU;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{self, Tolerance};

pub type Vec3 = Vector3<f64>;

/// Absolute position tolerance used by the propagator (km).
pub const PROPAGATION_ABS_TOL: f64 = 1e-9;

/// Central-body constants. Units: km, s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BodyConstants {
    /// Gravitational parameter GM (km³/s²).
    pub mu: f64,
    /// Dimensionless oblateness coefficient; zero for a point mass.
    #[serde(default)]
    pub j2: f64,
    /// Equatorial radius (km).
    pub r_body: f64,
}

impl BodyConstants {
    pub const SUN: BodyConstants = BodyConstants { mu: 1.327e11, j2: 0.0, r_body: 6.95e5 };
    pub const EARTH: BodyConstants = BodyConstants { mu: 3.986e5, j2: 0.0, r_body: 6378.0 };
    pub const JUPITER: BodyConstants =
        BodyConstants { mu: 126.687e6, j2: 1.475e-2, r_body: 69911.0 };

    pub fn new(mu: f64, j2: f64, r_body: f64) -> Result<Self> {
        let body = BodyConstants { mu, j2, r_body };
        body.validate()?;
        Ok(body)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(Error::invalid(format!("body.mu must be positive, got {}", self.mu)));
        }
        if !(self.r_body > 0.0 && self.r_body.is_finite()) {
            return Err(Error::invalid(format!(
                "body.r_body must be positive, got {}",
                self.r_body
            )));
        }
        if !(self.j2 >= 0.0 && self.j2.is_finite()) {
            return Err(Error::invalid(format!("body.j2 must be non-negative, got {}", self.j2)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Kepler,
    J2,
}

/// Gravity field of the central body.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GravityModel {
    pub body: BodyConstants,
    pub kind: ModelKind,
}

impl GravityModel {
    pub fn new(body: BodyConstants, kind: ModelKind) -> Result<Self> {
        let model = GravityModel { body, kind };
        model.validate()?;
        Ok(model)
    }

    pub fn kepler(body: BodyConstants) -> Self {
        GravityModel { body, kind: ModelKind::Kepler }
    }

    pub fn j2(body: BodyConstants) -> Result<Self> {
        Self::new(body, ModelKind::J2)
    }

    pub fn validate(&self) -> Result<()> {
        self.body.validate()?;
        if self.kind == ModelKind::J2 && self.body.j2 <= 0.0 {
            return Err(Error::invalid("J2 gravity model requires body.j2 > 0"));
        }
        Ok(())
    }

    pub fn mu(&self) -> f64 {
        self.body.mu
    }

    /// Coefficient of the J2 term, `mu J2 R² / 2`; zero for the Kepler model.
    fn j2_strength(&self) -> f64 {
        match self.kind {
            ModelKind::Kepler => 0.0,
            ModelKind::J2 => 0.5 * self.body.mu * self.body.j2 * self.body.r_body.powi(2),
        }
    }

    /// Potential energy per unit mass (km²/s²).
    pub fn potential(&self, r: &Vec3) -> Result<f64> {
        let rn = checked_norm(r)?;
        let kepler = -self.body.mu / rn;
        let k = self.j2_strength();
        if k == 0.0 {
            return Ok(kepler);
        }
        let z = r.z;
        Ok(kepler + k * (3.0 * z * z - rn * rn) / rn.powi(5))
    }

    /// Gradient of [`potential`](Self::potential); the acceleration is its negative.
    pub fn grad_potential(&self, r: &Vec3) -> Result<Vec3> {
        let rn = checked_norm(r)?;
        let r3 = rn.powi(3);
        let mut g = r * (self.body.mu / r3);
        let k = self.j2_strength();
        if k != 0.0 {
            let z = r.z;
            let r5 = r3 * rn * rn;
            let r7 = r5 * rn * rn;
            g += r * (k * (3.0 / r5 - 15.0 * z * z / r7));
            g.z += k * 6.0 * z / r5;
        }
        Ok(g)
    }

    /// Hessian of the potential.
    pub fn hessian_potential(&self, r: &Vec3) -> Result<Matrix3<f64>> {
        let rn = checked_norm(r)?;
        let r2 = rn * rn;
        let r3 = r2 * rn;
        let r5 = r3 * r2;
        let rrt = r * r.transpose();
        let mut h = Matrix3::identity() * (self.body.mu / r3) - rrt * (3.0 * self.body.mu / r5);
        let k = self.j2_strength();
        if k != 0.0 {
            let z = r.z;
            let r7 = r5 * r2;
            let r9 = r7 * r2;
            let e3 = Vec3::z();
            // d/dx_j [6 z δ_i3 r^-5 - 15 z² x_i r^-7 + 3 x_i r^-5]
            let mut t = Matrix3::identity() * (3.0 / r5 - 15.0 * z * z / r7);
            t += rrt * (105.0 * z * z / r9 - 15.0 / r7);
            t += (e3 * r.transpose() + r * e3.transpose()) * (-30.0 * z / r7);
            t[(2, 2)] += 6.0 / r5;
            h += t * k;
        }
        Ok(h)
    }

    pub fn acceleration(&self, r: &Vec3) -> Result<Vec3> {
        Ok(-self.grad_potential(r)?)
    }

    /// Specific mechanical energy ½|v|² + V(r).
    pub fn specific_energy(&self, state: &OrbitState) -> Result<f64> {
        Ok(0.5 * state.v.norm_squared() + self.potential(&state.r)?)
    }
}

fn checked_norm(r: &Vec3) -> Result<f64> {
    let n = r.norm();
    if n > 0.0 && n.is_finite() {
        Ok(n)
    } else {
        Err(Error::Singular)
    }
}

/// Cartesian position (km) and velocity (km/s).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitState {
    pub r: Vec3,
    pub v: Vec3,
}

impl OrbitState {
    pub fn new(r: Vec3, v: Vec3) -> Result<Self> {
        let s = OrbitState { r, v };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.r.iter().chain(self.v.iter()).any(|c| !c.is_finite()) {
            return Err(Error::invalid("state vector has non-finite components"));
        }
        if self.r.norm() <= 0.0 {
            return Err(Error::Singular);
        }
        Ok(())
    }

    pub fn angular_momentum(&self) -> Vec3 {
        self.r.cross(&self.v)
    }

    fn to_array(self) -> [f64; 6] {
        [self.r.x, self.r.y, self.r.z, self.v.x, self.v.y, self.v.z]
    }

    fn from_array(a: [f64; 6]) -> Self {
        OrbitState { r: Vec3::new(a[0], a[1], a[2]), v: Vec3::new(a[3], a[4], a[5]) }
    }
}

/// Integrate `r̈ = -∇V(r)` for `duration` seconds (negative runs backward).
pub fn propagate(model: &GravityModel, state: &OrbitState, duration: f64, tol: f64) -> Result<OrbitState> {
    if !duration.is_finite() {
        return Err(Error::invalid("propagation duration must be finite"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid("propagation tolerance must be positive"));
    }
    state.validate()?;
    if duration == 0.0 {
        return Ok(*state);
    }
    let rhs = |_t: f64, y: &[f64; 6]| -> [f64; 6] {
        let r = Vec3::new(y[0], y[1], y[2]);
        // A singular position makes the step fail via non-finite values.
        let a = model.acceleration(&r).unwrap_or(Vec3::repeat(f64::NAN));
        [y[3], y[4], y[5], a.x, a.y, a.z]
    };
    let tol = Tolerance { abs: PROPAGATION_ABS_TOL, rel: tol };
    let (y, _) = integrator::integrate(rhs, 0.0, state.to_array(), duration, tol)?;
    Ok(OrbitState::from_array(y))
}

/// Keplerian period of the osculating orbit defined by `state`'s specific
/// energy, using the point-mass energy relation `a = -mu / (2 E)`.
pub fn osculating_period(model: &GravityModel, state: &OrbitState) -> Result<f64> {
    let energy = model.specific_energy(state)?;
    if energy >= 0.0 {
        return Err(Error::NonElliptic { energy });
    }
    let a = -model.mu() / (2.0 * energy);
    Ok(TAU * (a.powi(3) / model.mu()).sqrt())
}

/// Closed conic of the point-mass problem, held in perifocal form.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConicOrbit {
    pub mu: f64,
    /// Semi-latus rectum (km).
    pub p: f64,
    pub e: f64,
    /// Unit vector toward periapsis (toward the epoch position when circular).
    pub p_hat: Vec3,
    pub q_hat: Vec3,
    pub h_hat: Vec3,
    /// True anomaly of the defining state.
    pub nu_epoch: f64,
}

/// Eccentricities below this are treated as circular when picking a frame.
pub const CIRCULAR_ECCENTRICITY: f64 = 1e-12;

impl ConicOrbit {
    pub fn from_state(mu: f64, state: &OrbitState) -> Result<Self> {
        state.validate()?;
        let r = state.r.norm();
        let energy = 0.5 * state.v.norm_squared() - mu / r;
        if energy >= 0.0 {
            return Err(Error::NonElliptic { energy });
        }
        let h = state.angular_momentum();
        let hn = h.norm();
        if hn <= 1e-14 * r * state.v.norm() {
            return Err(Error::invalid("rectilinear orbit has no orbital plane"));
        }
        let h_hat = h / hn;
        let e_vec = state.v.cross(&h) / mu - state.r / r;
        let e = e_vec.norm();
        let p_hat = if e < CIRCULAR_ECCENTRICITY { state.r / r } else { e_vec / e };
        let q_hat = h_hat.cross(&p_hat);
        let nu_epoch = q_hat.dot(&state.r).atan2(p_hat.dot(&state.r));
        Ok(ConicOrbit { mu, p: hn * hn / mu, e, p_hat, q_hat, h_hat, nu_epoch })
    }

    pub fn semi_major_axis(&self) -> f64 {
        self.p / (1.0 - self.e * self.e)
    }

    pub fn period(&self) -> f64 {
        TAU * (self.semi_major_axis().powi(3) / self.mu).sqrt()
    }

    pub fn state_at(&self, nu: f64) -> OrbitState {
        let (s, c) = nu.sin_cos();
        let r = self.p / (1.0 + self.e * c);
        let vs = (self.mu / self.p).sqrt();
        OrbitState {
            r: (self.p_hat * c + self.q_hat * s) * r,
            v: (self.p_hat * (-s) + self.q_hat * (self.e + c)) * vs,
        }
    }
}

/// Sample an orbit for transfer planning.
///
/// Kepler orbits close, so one period is sampled uniformly in true anomaly
/// starting at the given state, whatever `n_periods` is. Perturbed orbits are
/// propagated over `n_periods` osculating periods and sampled at uniform time
/// steps (`n_per_period` per period).
pub fn sample_orbit(
    model: &GravityModel,
    state: &OrbitState,
    n_periods: usize,
    n_per_period: usize,
) -> Result<Vec<OrbitState>> {
    if n_periods < 1 || n_per_period < 2 {
        return Err(Error::invalid("sample_orbit needs n_periods >= 1 and n_per_period >= 2"));
    }
    match model.kind {
        ModelKind::Kepler => {
            let conic = ConicOrbit::from_state(model.mu(), state)?;
            Ok((0..n_per_period)
                .map(|k| conic.state_at(conic.nu_epoch + TAU * k as f64 / n_per_period as f64))
                .collect())
        }
        ModelKind::J2 => {
            let period = osculating_period(model, state)?;
            let dt = period / n_per_period as f64;
            let total = n_periods * n_per_period;
            let mut out = Vec::with_capacity(total);
            let mut current = *state;
            out.push(current);
            for _ in 1..total {
                current = propagate(model, &current, dt, SAMPLING_TOL)?;
                out.push(current);
            }
            Ok(out)
        }
    }
}

/// Relative tolerance used when sampling perturbed orbits.
pub const SAMPLING_TOL: f64 = 1e-12;
