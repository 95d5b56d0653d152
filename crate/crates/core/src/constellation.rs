//! Constellation catalog and Walker-delta element generation.
//!
//! Built-in entries live as JSON documents under `data/catalog/` and use the
//! same file format accepted by [`ConstellationSpec::from_json`], so every
//! layout choice in the catalog can be overridden by a user file.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::orbits::{OrbitalElements, EARTH_RADIUS_KM};

#[derive(Debug, Error)]
pub enum CatalogError {
    #[error("unknown constellation '{name}'; available: {}", available.join(", "))]
    Unknown { name: String, available: Vec<String> },
    #[error("invalid constellation spec '{name}': {}", problems.join("; "))]
    Invalid { name: String, problems: Vec<String> },
    #[error("cannot parse constellation file: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("cannot read constellation file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Radial geometry of a shell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ShellOrbit {
    Elliptical {
        perigee_km: f64,
        apogee_km: f64,
        #[serde(default)]
        arg_perigee_deg: f64,
    },
    Circular {
        altitude_km: f64,
    },
}

impl ShellOrbit {
    /// Semi-major axis and eccentricity from altitudes above the spherical Earth.
    pub fn semi_major_axis_and_eccentricity(&self) -> (f64, f64) {
        match *self {
            ShellOrbit::Circular { altitude_km } => (EARTH_RADIUS_KM + altitude_km, 0.0),
            ShellOrbit::Elliptical { perigee_km, apogee_km, .. } => {
                let rp = EARTH_RADIUS_KM + perigee_km;
                let ra = EARTH_RADIUS_KM + apogee_km;
                ((rp + ra) / 2.0, (ra - rp) / (ra + rp))
            }
        }
    }

    fn arg_perigee_deg(&self) -> f64 {
        match *self {
            ShellOrbit::Circular { .. } => 0.0,
            ShellOrbit::Elliptical { arg_perigee_deg, .. } => arg_perigee_deg,
        }
    }
}

/// One Walker-delta shell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    #[serde(flatten)]
    pub orbit: ShellOrbit,
    pub inclination_deg: f64,
    pub num_planes: u32,
    pub sats_per_plane: u32,
    #[serde(default)]
    pub phasing_factor: u32,
    /// 360 for a full delta, 180 for polar star patterns.
    #[serde(default = "full_circle")]
    pub raan_spread_deg: f64,
    /// RAAN of plane 0.
    #[serde(default)]
    pub raan_offset_deg: f64,
}

fn full_circle() -> f64 {
    360.0
}

impl ShellSpec {
    pub fn total(&self) -> usize {
        self.num_planes as usize * self.sats_per_plane as usize
    }

    fn problems(&self, index: usize, out: &mut Vec<String>) {
        let tag = format!("shell {index}");
        if self.num_planes == 0 {
            out.push(format!("{tag}: num_planes must be >= 1"));
        }
        if self.sats_per_plane == 0 {
            out.push(format!("{tag}: sats_per_plane must be >= 1"));
        }
        if self.num_planes > 0 && self.phasing_factor >= self.num_planes {
            out.push(format!(
                "{tag}: phasing_factor {} must be < num_planes {}",
                self.phasing_factor, self.num_planes
            ));
        }
        if !(self.raan_spread_deg > 0.0 && self.raan_spread_deg <= 360.0) {
            out.push(format!("{tag}: raan_spread_deg {} outside (0, 360]", self.raan_spread_deg));
        }
        if !self.raan_offset_deg.is_finite() {
            out.push(format!("{tag}: raan_offset_deg must be finite"));
        }
        if !(0.0..=180.0).contains(&self.inclination_deg) {
            out.push(format!("{tag}: inclination_deg {} outside [0, 180]", self.inclination_deg));
        }
        match self.orbit {
            ShellOrbit::Circular { altitude_km } => {
                if !(altitude_km > 0.0) {
                    out.push(format!("{tag}: altitude_km must be > 0"));
                }
            }
            ShellOrbit::Elliptical { perigee_km, apogee_km, arg_perigee_deg } => {
                if !(perigee_km > 0.0) {
                    out.push(format!("{tag}: perigee_km must be > 0"));
                }
                if !(apogee_km >= perigee_km) {
                    out.push(format!("{tag}: apogee_km must be >= perigee_km"));
                }
                if !arg_perigee_deg.is_finite() {
                    out.push(format!("{tag}: arg_perigee_deg must be finite"));
                }
            }
        }
    }
}

/// A named constellation: shell layout plus downlink radio parameters.
///
/// Frequencies are held in Hz; the file format uses MHz and GHz.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConstellationFile", into = "ConstellationFile")]
pub struct ConstellationSpec {
    pub name: String,
    pub shells: Vec<ShellSpec>,
    pub eirpd_max_dbw_hz: f64,
    pub channel_width_hz: f64,
    pub downlink_freq_hz: f64,
    pub min_elevation_deg: f64,
    pub notes: Option<String>,
}

/// On-disk form of [`ConstellationSpec`].
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstellationFile {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notes: Option<String>,
    pub eirpd_max_dbw_hz: f64,
    pub channel_width_mhz: f64,
    #[serde(default = "default_downlink_ghz")]
    pub downlink_freq_ghz: f64,
    #[serde(default = "default_min_elevation")]
    pub min_elevation_deg: f64,
    pub shells: Vec<ShellSpec>,
}

pub const DEFAULT_DOWNLINK_FREQ_GHZ: f64 = 19.0;
pub const DEFAULT_MIN_ELEVATION_DEG: f64 = 10.0;

fn default_downlink_ghz() -> f64 {
    DEFAULT_DOWNLINK_FREQ_GHZ
}

fn default_min_elevation() -> f64 {
    DEFAULT_MIN_ELEVATION_DEG
}

impl TryFrom<ConstellationFile> for ConstellationSpec {
    type Error = CatalogError;

    fn try_from(file: ConstellationFile) -> Result<Self, Self::Error> {
        let spec = ConstellationSpec {
            name: file.name,
            shells: file.shells,
            eirpd_max_dbw_hz: file.eirpd_max_dbw_hz,
            channel_width_hz: file.channel_width_mhz * 1e6,
            downlink_freq_hz: file.downlink_freq_ghz * 1e9,
            min_elevation_deg: file.min_elevation_deg,
            notes: file.notes,
        };
        spec.validate()?;
        Ok(spec)
    }
}

impl From<ConstellationSpec> for ConstellationFile {
    fn from(spec: ConstellationSpec) -> Self {
        ConstellationFile {
            name: spec.name,
            notes: spec.notes,
            eirpd_max_dbw_hz: spec.eirpd_max_dbw_hz,
            channel_width_mhz: spec.channel_width_hz / 1e6,
            downlink_freq_ghz: spec.downlink_freq_hz / 1e9,
            min_elevation_deg: spec.min_elevation_deg,
            shells: spec.shells,
        }
    }
}

impl ConstellationSpec {
    pub fn from_json(text: &str) -> Result<Self, CatalogError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, CatalogError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| CatalogError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("constellation spec serializes")
    }

    pub fn total_satellites(&self) -> usize {
        self.shells.iter().map(ShellSpec::total).sum()
    }

    /// All field violations, empty when the spec is valid.
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.name.trim().is_empty() {
            out.push("name must not be empty".to_string());
        }
        if self.shells.is_empty() {
            out.push("at least one shell is required".to_string());
        }
        if !(-60.0..=10.0).contains(&self.eirpd_max_dbw_hz) {
            out.push(format!("eirpd_max_dbw_hz {} outside [-60, 10]", self.eirpd_max_dbw_hz));
        }
        if !(self.channel_width_hz > 0.0 && self.channel_width_hz.is_finite()) {
            out.push("channel width must be > 0".to_string());
        }
        if !(self.downlink_freq_hz > 0.0 && self.downlink_freq_hz.is_finite()) {
            out.push("downlink frequency must be > 0".to_string());
        }
        if !(0.0..90.0).contains(&self.min_elevation_deg) {
            out.push(format!("min_elevation_deg {} outside [0, 90)", self.min_elevation_deg));
        }
        for (i, shell) in self.shells.iter().enumerate() {
            shell.problems(i, &mut out);
        }
        out
    }

    pub fn validate(&self) -> Result<(), CatalogError> {
        let problems = self.problems();
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CatalogError::Invalid {
                name: self.name.clone(),
                problems,
            })
        }
    }

    /// Semi-major axis of the outermost shell, used to bound look-ahead searches.
    pub fn max_semi_major_axis_km(&self) -> f64 {
        self.shells
            .iter()
            .map(|s| s.orbit.semi_major_axis_and_eccentricity().0)
            .fold(0.0, f64::max)
    }
}

/// Generates per-satellite elements for every shell, in shell order, plane
/// by plane. Satellite ids used elsewhere are indices into this vector.
///
/// Plane `p` of `P` gets RAAN `offset + p * spread / P`; satellite `s` of `S`
/// in that plane gets mean anomaly `s * 360 / S + p * F * 360 / (P * S)`.
pub fn build_elements(spec: &ConstellationSpec) -> Result<Vec<OrbitalElements>, CatalogError> {
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.total_satellites());
    for (index, shell) in spec.shells.iter().enumerate() {
        let (a, e) = shell.orbit.semi_major_axis_and_eccentricity();
        let planes = shell.num_planes as f64;
        let per_plane = shell.sats_per_plane as f64;
        let total = planes * per_plane;
        for p in 0..shell.num_planes {
            let raan = shell.raan_offset_deg + p as f64 * shell.raan_spread_deg / planes;
            for s in 0..shell.sats_per_plane {
                let m0 = s as f64 * 360.0 / per_plane
                    + p as f64 * shell.phasing_factor as f64 * 360.0 / total;
                let el = OrbitalElements::new(
                    a,
                    e,
                    shell.inclination_deg,
                    raan,
                    shell.orbit.arg_perigee_deg(),
                    m0,
                )
                .map_err(|err| CatalogError::Invalid {
                    name: spec.name.clone(),
                    problems: vec![format!("shell {index}: {err}")],
                })?;
                out.push(el);
            }
        }
    }
    Ok(out)
}

const BUILTIN: &[(&str, &str)] = &[
    ("kuiper", include_str!("../data/catalog/kuiper.json")),
    ("oneweb_phase1", include_str!("../data/catalog/oneweb_phase1.json")),
    ("mangata_meo", include_str!("../data/catalog/mangata_meo.json")),
    ("pleiades", include_str!("../data/catalog/pleiades.json")),
];

/// Names of the built-in catalog entries, in catalog order.
pub fn catalog_names() -> Vec<String> {
    BUILTIN.iter().map(|(name, _)| name.to_string()).collect()
}

pub fn load_catalog(name: &str) -> Result<ConstellationSpec, CatalogError> {
    let (_, text) = BUILTIN
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| CatalogError::Unknown {
            name: name.to_string(),
            available: catalog_names(),
        })?;
    ConstellationSpec::from_json(text)
}

/// Loads a catalog entry by name, or a constellation file when `name_or_path`
/// points to an existing file.
pub fn resolve(name_or_path: &str) -> Result<ConstellationSpec, CatalogError> {
    let path = Path::new(name_or_path);
    if path.is_file() {
        ConstellationSpec::from_file(path)
    } else {
        load_catalog(name_or_path)
    }
}
