//! Two-body Keplerian propagation.
//!
//! Elements are stored in degrees at the type boundary and converted to
//! radians once, when an [`Orbit`] is prepared for repeated evaluation.

use std::f64::consts::{PI, TAU};

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Earth gravitational parameter, km³/s².
pub const MU_EARTH_KM3_S2: f64 = 398_600.441_8;
/// Earth equatorial radius, km (spherical Earth).
pub const EARTH_RADIUS_KM: f64 = 6378.137;

const KEPLER_TOLERANCE_RAD: f64 = 1e-12;
const NEWTON_MAX_ITER: usize = 50;
const BISECTION_MAX_ITER: usize = 200;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OrbitError {
    #[error("eccentricity {0} outside [0, 1)")]
    Eccentricity(f64),
    #[error("semi-major axis {0} km must exceed the Earth radius")]
    SemiMajorAxis(f64),
    #[error("perigee radius {0} km is below the Earth surface")]
    Perigee(f64),
    #[error("non-finite orbital element: {0}")]
    NonFinite(&'static str),
    #[error("negative propagation time {0} s")]
    NegativeTime(f64),
    #[error("Kepler solver failed to converge (M = {mean_anomaly}, e = {eccentricity})")]
    KeplerNonConvergence { mean_anomaly: f64, eccentricity: f64 },
}

/// Keplerian state of one satellite at the simulation epoch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub semi_major_axis_km: f64,
    pub eccentricity: f64,
    pub inclination_deg: f64,
    pub raan_deg: f64,
    pub arg_perigee_deg: f64,
    /// Mean anomaly at t = 0.
    pub mean_anomaly_epoch_deg: f64,
}

impl OrbitalElements {
    /// Builds validated elements with every angle normalized to [0, 360).
    pub fn new(
        semi_major_axis_km: f64,
        eccentricity: f64,
        inclination_deg: f64,
        raan_deg: f64,
        arg_perigee_deg: f64,
        mean_anomaly_epoch_deg: f64,
    ) -> Result<Self, OrbitError> {
        let elements = Self {
            semi_major_axis_km,
            eccentricity,
            inclination_deg: normalize_deg(inclination_deg),
            raan_deg: normalize_deg(raan_deg),
            arg_perigee_deg: normalize_deg(arg_perigee_deg),
            mean_anomaly_epoch_deg: normalize_deg(mean_anomaly_epoch_deg),
        };
        elements.validate()?;
        Ok(elements)
    }

    /// Circular orbit at `altitude_km` above the spherical Earth.
    pub fn circular(
        altitude_km: f64,
        inclination_deg: f64,
        raan_deg: f64,
        mean_anomaly_epoch_deg: f64,
    ) -> Result<Self, OrbitError> {
        Self::new(
            EARTH_RADIUS_KM + altitude_km,
            0.0,
            inclination_deg,
            raan_deg,
            0.0,
            mean_anomaly_epoch_deg,
        )
    }

    pub fn validate(&self) -> Result<(), OrbitError> {
        let fields = [
            ("semi_major_axis_km", self.semi_major_axis_km),
            ("eccentricity", self.eccentricity),
            ("inclination_deg", self.inclination_deg),
            ("raan_deg", self.raan_deg),
            ("arg_perigee_deg", self.arg_perigee_deg),
            ("mean_anomaly_epoch_deg", self.mean_anomaly_epoch_deg),
        ];
        if let Some((name, _)) = fields.iter().find(|(_, v)| !v.is_finite()) {
            return Err(OrbitError::NonFinite(name));
        }
        if !(0.0..1.0).contains(&self.eccentricity) {
            return Err(OrbitError::Eccentricity(self.eccentricity));
        }
        if self.semi_major_axis_km <= EARTH_RADIUS_KM {
            return Err(OrbitError::SemiMajorAxis(self.semi_major_axis_km));
        }
        let perigee = self.perigee_radius_km();
        if perigee <= EARTH_RADIUS_KM {
            return Err(OrbitError::Perigee(perigee));
        }
        Ok(())
    }

    pub fn perigee_radius_km(&self) -> f64 {
        self.semi_major_axis_km * (1.0 - self.eccentricity)
    }

    pub fn apogee_radius_km(&self) -> f64 {
        self.semi_major_axis_km * (1.0 + self.eccentricity)
    }

    pub fn period_s(&self) -> f64 {
        2.0 * PI * (self.semi_major_axis_km.powi(3) / MU_EARTH_KM3_S2).sqrt()
    }
}

/// Inertial position and velocity at a simulation time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EciState {
    pub position_km: Vector3<f64>,
    pub velocity_km_s: Vector3<f64>,
    pub time_s: f64,
}

/// Wraps an angle in degrees into [0, 360).
pub fn normalize_deg(angle: f64) -> f64 {
    let wrapped = angle.rem_euclid(360.0);
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if wrapped >= 360.0 {
        0.0
    } else {
        wrapped
    }
}

/// Solves Kepler's equation `E - e sin E = M` for the eccentric anomaly.
///
/// The mean anomaly is reduced to [0, 2π) first and the returned anomaly lies
/// in the same interval. Newton iteration starts from `M` (or π for e ≥ 0.8);
/// if it fails to reach the tolerance a bisection on [0, 2π] takes over.
pub fn solve_kepler(mean_anomaly_rad: f64, eccentricity: f64) -> Result<f64, OrbitError> {
    if !mean_anomaly_rad.is_finite() {
        return Err(OrbitError::NonFinite("mean_anomaly"));
    }
    if !(0.0..1.0).contains(&eccentricity) {
        return Err(OrbitError::Eccentricity(eccentricity));
    }
    let m = reduce_rad(mean_anomaly_rad);
    let residual = |e_anom: f64| e_anom - eccentricity * e_anom.sin() - m;

    let mut e_anom = if eccentricity < 0.8 { m } else { PI };
    for _ in 0..NEWTON_MAX_ITER {
        let f = residual(e_anom);
        if f.abs() < KEPLER_TOLERANCE_RAD {
            return Ok(e_anom);
        }
        let slope = 1.0 - eccentricity * e_anom.cos();
        e_anom -= f / slope;
        if !(0.0..=TAU).contains(&e_anom) {
            break;
        }
    }

    // f(0) = -M <= 0 and f(2π) = 2π - M > 0 bracket the root.
    let (mut lo, mut hi) = (0.0_f64, TAU);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        let f = residual(mid);
        if f.abs() < KEPLER_TOLERANCE_RAD {
            return Ok(mid);
        }
        if f < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON {
            break;
        }
    }
    Err(OrbitError::KeplerNonConvergence {
        mean_anomaly: mean_anomaly_rad,
        eccentricity,
    })
}

fn reduce_rad(angle: f64) -> f64 {
    let r = angle.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Orbital period for a semi-major axis, seconds.
pub fn orbital_period(semi_major_axis_km: f64) -> Result<f64, OrbitError> {
    if !semi_major_axis_km.is_finite() || semi_major_axis_km <= EARTH_RADIUS_KM {
        return Err(OrbitError::SemiMajorAxis(semi_major_axis_km));
    }
    Ok(2.0 * PI * (semi_major_axis_km.powi(3) / MU_EARTH_KM3_S2).sqrt())
}

/// Propagates `elements` to time `t` seconds after the epoch.
pub fn propagate(elements: &OrbitalElements, t: f64) -> Result<EciState, OrbitError> {
    Orbit::new(elements)?.state_at(t)
}

/// Elements pre-converted for repeated evaluation: the perifocal basis
/// vectors are computed once per satellite.
#[derive(Debug, Clone)]
pub struct Orbit {
    elements: OrbitalElements,
    a: f64,
    e: f64,
    mean_motion: f64,
    m0: f64,
    semi_minor_factor: f64,
    p_hat: Vector3<f64>,
    q_hat: Vector3<f64>,
}

impl Orbit {
    pub fn new(elements: &OrbitalElements) -> Result<Self, OrbitError> {
        elements.validate()?;
        let a = elements.semi_major_axis_km;
        let e = elements.eccentricity;
        let (sin_raan, cos_raan) = elements.raan_deg.to_radians().sin_cos();
        let (sin_argp, cos_argp) = elements.arg_perigee_deg.to_radians().sin_cos();
        let (sin_inc, cos_inc) = elements.inclination_deg.to_radians().sin_cos();

        let p_hat = Vector3::new(
            cos_raan * cos_argp - sin_raan * sin_argp * cos_inc,
            sin_raan * cos_argp + cos_raan * sin_argp * cos_inc,
            sin_argp * sin_inc,
        );
        let q_hat = Vector3::new(
            -cos_raan * sin_argp - sin_raan * cos_argp * cos_inc,
            -sin_raan * sin_argp + cos_raan * cos_argp * cos_inc,
            cos_argp * sin_inc,
        );
        Ok(Self {
            elements: *elements,
            a,
            e,
            mean_motion: (MU_EARTH_KM3_S2 / a.powi(3)).sqrt(),
            m0: elements.mean_anomaly_epoch_deg.to_radians(),
            semi_minor_factor: (1.0 - e * e).sqrt(),
            p_hat,
            q_hat,
        })
    }

    pub fn elements(&self) -> &OrbitalElements {
        &self.elements
    }

    pub fn period_s(&self) -> f64 {
        TAU / self.mean_motion
    }

    fn eccentric_anomaly(&self, t: f64) -> Result<f64, OrbitError> {
        if !(t >= 0.0) {
            return Err(OrbitError::NegativeTime(t));
        }
        let m = self.m0 + self.mean_motion * t;
        if self.e == 0.0 {
            return Ok(reduce_rad(m));
        }
        solve_kepler(m, self.e)
    }

    /// Inertial position only; skips the velocity terms.
    pub fn position_at(&self, t: f64) -> Result<Vector3<f64>, OrbitError> {
        let (sin_e, cos_e) = self.eccentric_anomaly(t)?.sin_cos();
        let x = self.a * (cos_e - self.e);
        let y = self.a * self.semi_minor_factor * sin_e;
        Ok(self.p_hat * x + self.q_hat * y)
    }

    pub fn state_at(&self, t: f64) -> Result<EciState, OrbitError> {
        let (sin_e, cos_e) = self.eccentric_anomaly(t)?.sin_cos();
        let x = self.a * (cos_e - self.e);
        let y = self.a * self.semi_minor_factor * sin_e;
        let e_dot = self.mean_motion / (1.0 - self.e * cos_e);
        let vx = -self.a * sin_e * e_dot;
        let vy = self.a * self.semi_minor_factor * cos_e * e_dot;
        Ok(EciState {
            position_km: self.p_hat * x + self.q_hat * y,
            velocity_km_s: self.p_hat * vx + self.q_hat * vy,
            time_s: t,
        })
    }
}
