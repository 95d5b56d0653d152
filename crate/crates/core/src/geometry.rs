//! Inertial → Earth-fixed → topocentric transforms and visibility.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::handover::SatId;
use crate::orbits::{EciState, Orbit, OrbitError, EARTH_RADIUS_KM};

/// Earth rotation rate, rad/s.
pub const EARTH_ROTATION_RAD_S: f64 = 7.292_115_9e-5;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid ground station: {0}")]
    Station(String),
    #[error("satellite not visible at t = {time_s} s (elevation {elevation_deg:.3} deg < mask {mask_deg} deg)")]
    NotVisible {
        time_s: f64,
        elevation_deg: f64,
        mask_deg: f64,
    },
    #[error("search step and horizon must be positive")]
    SearchWindow,
    #[error(transparent)]
    Orbit(#[from] OrbitError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundStation {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    #[serde(default)]
    pub altitude_km: f64,
}

impl GroundStation {
    /// Aachen, Germany.
    pub const AACHEN: GroundStation = GroundStation {
        latitude_deg: 50.7753,
        longitude_deg: 6.0839,
        altitude_km: 0.0,
    };

    pub fn new(latitude_deg: f64, longitude_deg: f64, altitude_km: f64) -> Result<Self, GeometryError> {
        let gs = Self {
            latitude_deg,
            longitude_deg,
            altitude_km,
        };
        gs.validate()?;
        Ok(gs)
    }

    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(-90.0..=90.0).contains(&self.latitude_deg) {
            out.push(format!("latitude {} outside [-90, 90]", self.latitude_deg));
        }
        if !(-180.0..180.0).contains(&self.longitude_deg) {
            out.push(format!("longitude {} outside [-180, 180)", self.longitude_deg));
        }
        if !(self.altitude_km >= 0.0 && self.altitude_km.is_finite()) {
            out.push(format!("altitude {} must be >= 0", self.altitude_km));
        }
        out
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(GeometryError::Station(problems.join("; ")))
        }
    }

    /// Local east-north-up frame anchored at the station.
    pub fn frame(&self) -> StationFrame {
        let (sin_lat, cos_lat) = self.latitude_deg.to_radians().sin_cos();
        let (sin_lon, cos_lon) = self.longitude_deg.to_radians().sin_cos();
        StationFrame {
            position: ground_station_ecef(self),
            east: Vector3::new(-sin_lon, cos_lon, 0.0),
            north: Vector3::new(-sin_lat * cos_lon, -sin_lat * sin_lon, cos_lat),
            up: Vector3::new(cos_lat * cos_lon, cos_lat * sin_lon, sin_lat),
        }
    }
}

/// Look angles from a station to a satellite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Topocentric {
    pub elevation_deg: f64,
    pub azimuth_deg: f64,
    pub slant_range_km: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct StationFrame {
    pub position: Vector3<f64>,
    pub east: Vector3<f64>,
    pub north: Vector3<f64>,
    pub up: Vector3<f64>,
}

impl StationFrame {
    pub fn elevation_deg(&self, sat_ecef: &Vector3<f64>) -> f64 {
        let los = sat_ecef - self.position;
        (los.dot(&self.up) / los.norm()).clamp(-1.0, 1.0).asin().to_degrees()
    }

    pub fn look(&self, sat_ecef: &Vector3<f64>) -> Topocentric {
        let los = sat_ecef - self.position;
        let range = los.norm();
        let elevation = (los.dot(&self.up) / range).clamp(-1.0, 1.0).asin().to_degrees();
        let azimuth = los.dot(&self.east).atan2(los.dot(&self.north)).to_degrees();
        Topocentric {
            elevation_deg: elevation,
            azimuth_deg: azimuth.rem_euclid(360.0) % 360.0,
            slant_range_km: range,
        }
    }
}

/// Earth rotation angle at simulation time `t`; frames coincide at t = 0.
pub fn earth_rotation_angle(t: f64) -> f64 {
    EARTH_ROTATION_RAD_S * t
}

fn rotate_to_earth_fixed(v: &Vector3<f64>, theta: f64) -> Vector3<f64> {
    let (s, c) = theta.sin_cos();
    Vector3::new(c * v.x + s * v.y, -s * v.x + c * v.y, v.z)
}

/// Earth-fixed position of an inertial state at time `t`.
pub fn eci_to_ecef(state: &EciState, t: f64) -> Vector3<f64> {
    position_to_ecef(&state.position_km, t)
}

pub fn position_to_ecef(position_km: &Vector3<f64>, t: f64) -> Vector3<f64> {
    rotate_to_earth_fixed(position_km, earth_rotation_angle(t))
}

/// Velocity relative to the rotating Earth, expressed in Earth-fixed axes.
pub fn velocity_to_ecef(state: &EciState, t: f64) -> Vector3<f64> {
    let omega = Vector3::new(0.0, 0.0, EARTH_ROTATION_RAD_S);
    let relative = state.velocity_km_s - omega.cross(&state.position_km);
    rotate_to_earth_fixed(&relative, earth_rotation_angle(t))
}

/// Spherical-Earth station position.
pub fn ground_station_ecef(gs: &GroundStation) -> Vector3<f64> {
    let r = EARTH_RADIUS_KM + gs.altitude_km;
    let (sin_lat, cos_lat) = gs.latitude_deg.to_radians().sin_cos();
    let (sin_lon, cos_lon) = gs.longitude_deg.to_radians().sin_cos();
    Vector3::new(r * cos_lat * cos_lon, r * cos_lat * sin_lon, r * sin_lat)
}

pub fn topocentric(sat_ecef: &Vector3<f64>, gs: &GroundStation) -> Topocentric {
    gs.frame().look(sat_ecef)
}

/// Satellites at or above `min_elevation_deg`, ascending by id.
pub fn visible_set(
    sat_ecef: &[Vector3<f64>],
    gs: &GroundStation,
    min_elevation_deg: f64,
) -> Vec<(SatId, Topocentric)> {
    visible_from_frame(sat_ecef, &gs.frame(), min_elevation_deg)
}

pub fn visible_from_frame(
    sat_ecef: &[Vector3<f64>],
    frame: &StationFrame,
    min_elevation_deg: f64,
) -> Vec<(SatId, Topocentric)> {
    sat_ecef
        .iter()
        .enumerate()
        .filter_map(|(id, pos)| {
            let look = frame.look(pos);
            (look.elevation_deg >= min_elevation_deg).then_some((SatId(id as u32), look))
        })
        .collect()
}

fn elevation_at(orbit: &Orbit, frame: &StationFrame, t: f64) -> Result<f64, GeometryError> {
    let eci = orbit.position_at(t)?;
    Ok(frame.elevation_deg(&position_to_ecef(&eci, t)))
}

/// Time the satellite stays above the mask, sampled on a `search_step_s` grid.
///
/// Returns the last visible offset before the first sample below the mask,
/// or `horizon_s` if the satellite is still visible at the horizon.
pub fn remaining_visibility(
    orbit: &Orbit,
    t: f64,
    gs: &GroundStation,
    min_elevation_deg: f64,
    search_step_s: f64,
    horizon_s: f64,
) -> Result<f64, GeometryError> {
    remaining_visibility_from_frame(orbit, t, &gs.frame(), min_elevation_deg, search_step_s, horizon_s)
}

pub fn remaining_visibility_from_frame(
    orbit: &Orbit,
    t: f64,
    frame: &StationFrame,
    min_elevation_deg: f64,
    search_step_s: f64,
    horizon_s: f64,
) -> Result<f64, GeometryError> {
    if !(search_step_s > 0.0 && horizon_s > 0.0) {
        return Err(GeometryError::SearchWindow);
    }
    let now = elevation_at(orbit, frame, t)?;
    if now < min_elevation_deg {
        return Err(GeometryError::NotVisible {
            time_s: t,
            elevation_deg: now,
            mask_deg: min_elevation_deg,
        });
    }
    let mut k = 1u64;
    loop {
        let offset = k as f64 * search_step_s;
        if offset > horizon_s {
            return Ok(horizon_s);
        }
        if elevation_at(orbit, frame, t + offset)? < min_elevation_deg {
            return Ok(offset - search_step_s);
        }
        k += 1;
    }
}
