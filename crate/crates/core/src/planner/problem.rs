use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::astro::{self, ConicOrbit, GravityModel, ModelKind, OrbitState};
use crate::error::{Error, Result};

/// Initial and target orbits under one gravity model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransferProblem {
    pub model: GravityModel,
    pub initial: OrbitState,
    pub target: OrbitState,
}

impl TransferProblem {
    pub fn new(model: GravityModel, initial: OrbitState, target: OrbitState) -> Result<Self> {
        let p = TransferProblem { model, initial, target };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        for (name, s) in [("initial", &self.initial), ("target", &self.target)] {
            s.validate()?;
            let energy = self.model.specific_energy(s)?;
            if !(energy < 0.0) {
                return Err(Error::invalid(format!("{name} orbit is not elliptic (energy {energy})")));
            }
            if s.r.norm() <= self.model.body.r_body {
                return Err(Error::invalid(format!("{name} state lies inside the central body")));
            }
        }
        Ok(())
    }

    /// The same transfer flown backwards: orbits swapped, velocities negated.
    pub fn time_reversed(&self) -> Self {
        let flip = |s: &OrbitState| OrbitState { r: s.r, v: -s.v };
        TransferProblem { model: self.model, initial: flip(&self.target), target: flip(&self.initial) }
    }
}

/// An orbit parameterized by `u ∈ [0, 1]`.
///
/// Kepler orbits use the true anomaly `nu_epoch + 2 pi u` and are periodic in
/// `u`. Perturbed orbits use time `u * n_periods * T`, where `T` is the
/// osculating period; states come from the nearest stored sample propagated
/// the remaining interval, so grid points reproduce the stored samples exactly.
#[derive(Debug, Clone)]
pub enum OrbitTrack {
    Conic(ConicOrbit),
    Sampled { model: GravityModel, samples: Vec<OrbitState>, step: f64 },
}

impl OrbitTrack {
    pub fn new(model: &GravityModel, state: &OrbitState, n_periods: usize, n_per_period: usize) -> Result<Self> {
        match model.kind {
            ModelKind::Kepler => Ok(OrbitTrack::Conic(ConicOrbit::from_state(model.mu(), state)?)),
            ModelKind::J2 => {
                let period = astro::osculating_period(model, state)?;
                let mut samples = astro::sample_orbit(model, state, n_periods, n_per_period)?;
                // Closing sample so u = 1 is also stored.
                let step = period / n_per_period as f64;
                let last = *samples.last().expect("sample_orbit returns samples");
                samples.push(astro::propagate(model, &last, step, astro::SAMPLING_TOL)?);
                Ok(OrbitTrack::Sampled { model: *model, samples, step })
            }
        }
    }

    pub fn is_periodic(&self) -> bool {
        matches!(self, OrbitTrack::Conic(_))
    }

    /// The coarse sample fractions: `n` per period over the track.
    pub fn sample_fractions(&self, n_per_period: usize) -> Vec<f64> {
        match self {
            OrbitTrack::Conic(_) => (0..n_per_period).map(|k| k as f64 / n_per_period as f64).collect(),
            OrbitTrack::Sampled { samples, .. } => {
                let total = samples.len() - 1;
                (0..total).map(|k| k as f64 / total as f64).collect()
            }
        }
    }

    pub fn state(&self, u: f64) -> Result<OrbitState> {
        match self {
            OrbitTrack::Conic(c) => Ok(c.state_at(c.nu_epoch + TAU * u.rem_euclid(1.0))),
            OrbitTrack::Sampled { model, samples, step } => {
                let total = (samples.len() - 1) as f64;
                let t = u.clamp(0.0, 1.0) * total;
                let k = t.round() as usize;
                let remaining = (t - k as f64) * step;
                if remaining == 0.0 {
                    Ok(samples[k])
                } else {
                    astro::propagate(model, &samples[k], remaining, astro::SAMPLING_TOL)
                }
            }
        }
    }
}
