//! Downlink budget: path loss, SNR, MODCOD mapping, rate, delay and Doppler.
//!
//! The budget is kept in per-Hz form: EIRP density minus free-space loss plus
//! receiver G/T minus lumped extra losses, referenced to Boltzmann's constant.
//! Signal and noise are both densities, so bandwidth cancels and the result is
//! the SNR fed to the MODCOD table.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::handover::SatId;

/// Speed of light, km/s.
pub const SPEED_OF_LIGHT_KM_S: f64 = 299_792.458;
/// -10 log10(k), dBW/K/Hz.
pub const BOLTZMANN_DB: f64 = 228.6;
pub const MAX_SPECTRAL_EFFICIENCY: f64 = 6.0;

pub const DEFAULT_G_OVER_T_DB_K: f64 = 20.0;
pub const DEFAULT_EXTRA_LOSSES_DB: f64 = 0.0;

const DEFAULT_MODCOD: &str = include_str!("../data/dvbs2x_modcod.csv");

#[derive(Debug, Error)]
pub enum LinkError {
    #[error("modcod table line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid modcod table: {0}")]
    Table(String),
    #[error("cannot read modcod table {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Domain(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinkBudgetParams {
    pub eirpd_dbw_hz: f64,
    pub gs_g_over_t_db_k: f64,
    pub extra_losses_db: f64,
    pub downlink_freq_hz: f64,
}

impl LinkBudgetParams {
    pub fn problems(&self) -> Vec<String> {
        let mut out = Vec::new();
        if !(self.extra_losses_db >= 0.0 && self.extra_losses_db.is_finite()) {
            out.push(format!("extra_losses_db {} must be >= 0", self.extra_losses_db));
        }
        if !(-10.0..=45.0).contains(&self.gs_g_over_t_db_k) {
            out.push(format!("g_over_t {} outside [-10, 45] dB/K", self.gs_g_over_t_db_k));
        }
        if !(self.downlink_freq_hz > 0.0 && self.downlink_freq_hz.is_finite()) {
            out.push("downlink frequency must be > 0".to_string());
        }
        if !self.eirpd_dbw_hz.is_finite() {
            out.push("eirpd must be finite".to_string());
        }
        out
    }
}

/// Free-space path loss in dB for a distance in km and a frequency in Hz.
pub fn fspl_db(distance_km: f64, freq_hz: f64) -> f64 {
    let wavelength_km = SPEED_OF_LIGHT_KM_S / freq_hz;
    20.0 * (4.0 * std::f64::consts::PI * distance_km / wavelength_km).log10()
}

pub fn downlink_snr_db(params: &LinkBudgetParams, distance_km: f64) -> f64 {
    params.eirpd_dbw_hz - fspl_db(distance_km, params.downlink_freq_hz) + params.gs_g_over_t_db_k
        - params.extra_losses_db
        + BOLTZMANN_DB
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModcodRow {
    pub snr_threshold_db: f64,
    pub spectral_efficiency_bps_hz: f64,
}

/// SNR thresholds and spectral efficiencies, strictly increasing in both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModcodTable {
    rows: Vec<ModcodRow>,
}

impl ModcodTable {
    pub fn new(rows: Vec<ModcodRow>) -> Result<Self, LinkError> {
        if rows.is_empty() {
            return Err(LinkError::Table("table has no rows".into()));
        }
        for row in &rows {
            if !row.snr_threshold_db.is_finite() || !row.spectral_efficiency_bps_hz.is_finite() {
                return Err(LinkError::Table("non-finite entry".into()));
            }
            if row.spectral_efficiency_bps_hz <= 0.0 {
                return Err(LinkError::Table("spectral efficiency must be > 0".into()));
            }
        }
        for pair in rows.windows(2) {
            if pair[1].snr_threshold_db <= pair[0].snr_threshold_db
                || pair[1].spectral_efficiency_bps_hz <= pair[0].spectral_efficiency_bps_hz
            {
                return Err(LinkError::Table(format!(
                    "rows must increase strictly in both columns ({} -> {} dB)",
                    pair[0].snr_threshold_db, pair[1].snr_threshold_db
                )));
            }
        }
        let max = rows.last().map(|r| r.spectral_efficiency_bps_hz).unwrap_or(0.0);
        if max > MAX_SPECTRAL_EFFICIENCY {
            return Err(LinkError::Table(format!("max efficiency {max} exceeds {MAX_SPECTRAL_EFFICIENCY}")));
        }
        Ok(Self { rows })
    }

    /// Parses `snr_threshold_db,spectral_efficiency` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Self, LinkError> {
        let mut rows = Vec::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let fields: Vec<&str> = content.split(',').map(str::trim).collect();
            if fields.len() != 2 {
                return Err(LinkError::Parse {
                    line,
                    message: format!("expected 2 comma-separated fields, found {}", fields.len()),
                });
            }
            let number = |s: &str| {
                s.parse::<f64>().map_err(|e| LinkError::Parse {
                    line,
                    message: format!("'{s}': {e}"),
                })
            };
            rows.push(ModcodRow {
                snr_threshold_db: number(fields[0])?,
                spectral_efficiency_bps_hz: number(fields[1])?,
            });
        }
        Self::new(rows)
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, LinkError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| LinkError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    /// The shipped DVB-S2X table.
    pub fn dvb_s2x() -> Self {
        Self::parse(DEFAULT_MODCOD).expect("bundled modcod table is valid")
    }

    pub fn rows(&self) -> &[ModcodRow] {
        &self.rows
    }

    pub fn max_efficiency(&self) -> f64 {
        self.rows[self.rows.len() - 1].spectral_efficiency_bps_hz
    }
}

impl Default for ModcodTable {
    fn default() -> Self {
        Self::dvb_s2x()
    }
}

/// Highest efficiency whose threshold the SNR meets; 0 below the table.
pub fn snr_to_spectral_efficiency(snr_db: f64, table: &ModcodTable) -> f64 {
    let met = table.rows.partition_point(|row| row.snr_threshold_db <= snr_db);
    if met == 0 {
        0.0
    } else {
        table.rows[met - 1].spectral_efficiency_bps_hz
    }
}

pub fn data_rate_bps(spectral_efficiency: f64, channel_width_hz: f64) -> f64 {
    spectral_efficiency * channel_width_hz
}

/// One-way propagation delay in milliseconds.
pub fn propagation_delay_ms(slant_range_km: f64) -> Result<f64, LinkError> {
    if !(slant_range_km > 0.0) {
        return Err(LinkError::Domain(format!("slant range {slant_range_km} km must be > 0")));
    }
    Ok(slant_range_km / SPEED_OF_LIGHT_KM_S * 1000.0)
}

/// Doppler shift in Hz; `radial_velocity_km_s` is positive when closing.
pub fn doppler_hz(radial_velocity_km_s: f64, freq_hz: f64) -> f64 {
    radial_velocity_km_s / SPEED_OF_LIGHT_KM_S * freq_hz
}

/// Link metrics of the serving satellite at one time step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkMetrics {
    pub sat_id: SatId,
    pub slant_range_km: f64,
    pub elevation_deg: f64,
    pub snr_db: f64,
    pub spectral_efficiency_bps_hz: f64,
    pub data_rate_bps: f64,
    pub delay_ms: f64,
    pub doppler_hz: f64,
}

/// One time step; `link` is `None` during an outage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSample {
    pub time_s: f64,
    pub link: Option<LinkMetrics>,
}

impl LinkSample {
    pub fn connected(&self) -> bool {
        self.link.is_some()
    }
}

impl fmt::Display for LinkSample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.link {
            Some(l) => write!(
                f,
                "t={}s sat={} el={:.2} range={:.1}km snr={:.2}dB se={} delay={:.3}ms",
                self.time_s, l.sat_id, l.elevation_deg, l.slant_range_km, l.snr_db, l.spectral_efficiency_bps_hz, l.delay_ms
            ),
            None => write!(f, "t={}s outage", self.time_s),
        }
    }
}

/// Builds the metrics for a serving satellite from its range, elevation and
/// closing speed.
pub fn measure(
    sat_id: SatId,
    slant_range_km: f64,
    elevation_deg: f64,
    radial_velocity_km_s: f64,
    params: &LinkBudgetParams,
    channel_width_hz: f64,
    table: &ModcodTable,
) -> Result<LinkMetrics, LinkError> {
    let snr_db = downlink_snr_db(params, slant_range_km);
    let spectral_efficiency_bps_hz = snr_to_spectral_efficiency(snr_db, table);
    Ok(LinkMetrics {
        sat_id,
        slant_range_km,
        elevation_deg,
        snr_db,
        spectral_efficiency_bps_hz,
        data_rate_bps: data_rate_bps(spectral_efficiency_bps_hz, channel_width_hz),
        delay_ms: propagation_delay_ms(slant_range_km)?,
        doppler_hz: doppler_hz(radial_velocity_km_s, params.downlink_freq_hz),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn kuiper() -> LinkBudgetParams {
        LinkBudgetParams {
            eirpd_dbw_hz: -43.9,
            gs_g_over_t_db_k: 20.0,
            extra_losses_db: 0.0,
            downlink_freq_hz: 19e9,
        }
    }

    // Textbook form: 92.45 + 20 log10(f / GHz) + 20 log10(d / km).
    fn fspl_oracle(d_km: f64, f_ghz: f64) -> f64 {
        92.45 + 20.0 * f_ghz.log10() + 20.0 * d_km.log10()
    }

    #[test]
    fn fspl_examples() {
        assert_abs_diff_eq!(fspl_oracle(1000.0, 19.0), 178.03, epsilon = 0.005);
        assert_abs_diff_eq!(fspl_db(1000.0, 19e9), 178.03, epsilon = 0.01);
        assert_abs_diff_eq!(fspl_db(600.0, 19e9), 173.59, epsilon = 0.01);
        assert_abs_diff_eq!(fspl_db(1200.0, 19e9) - fspl_db(600.0, 19e9), 20.0 * 2f64.log10(), epsilon = 1e-12);
    }

    #[test]
    fn snr_examples() {
        let p = kuiper();
        assert_abs_diff_eq!(downlink_snr_db(&p, 600.0), 31.11, epsilon = 0.01);
        assert_abs_diff_eq!(downlink_snr_db(&p, 600.0) - downlink_snr_db(&p, 1200.0), 6.0206, epsilon = 1e-4);
        let lossy = LinkBudgetParams { extra_losses_db: 3.5, ..p };
        assert_abs_diff_eq!(downlink_snr_db(&p, 900.0) - downlink_snr_db(&lossy, 900.0), 3.5, epsilon = 1e-12);
    }

    #[test]
    fn snr_decreases_with_distance() {
        let p = kuiper();
        let table = ModcodTable::dvb_s2x();
        let mut last_snr = f64::INFINITY;
        let mut last_se = f64::INFINITY;
        for d in (1..400).map(|k| k as f64 * 100.0) {
            let snr = downlink_snr_db(&p, d);
            let se = snr_to_spectral_efficiency(snr, &table);
            assert!(snr < last_snr);
            assert!(se <= last_se);
            last_snr = snr;
            last_se = se;
        }
    }

    #[test]
    fn modcod_lookup_edges() {
        let table = ModcodTable::dvb_s2x();
        let first = table.rows()[0];
        assert_eq!(snr_to_spectral_efficiency(first.snr_threshold_db - 0.01, &table), 0.0);
        assert_eq!(snr_to_spectral_efficiency(100.0, &table), table.max_efficiency());
        assert!(table.max_efficiency() <= MAX_SPECTRAL_EFFICIENCY);
        for row in table.rows() {
            assert_eq!(snr_to_spectral_efficiency(row.snr_threshold_db, &table), row.spectral_efficiency_bps_hz);
        }
    }

    #[test]
    fn bundled_table_tops_out_at_5_9() {
        assert_eq!(ModcodTable::dvb_s2x().max_efficiency(), 5.90);
    }

    #[test]
    fn modcod_parse_errors_carry_line_numbers() {
        let text = "# header\n1.0, 1.0\n\n2.0; 2.0\n";
        match ModcodTable::parse(text) {
            Err(LinkError::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("unexpected {other:?}"),
        }
        match ModcodTable::parse("1.0, 1.0\n2.0, abc # bad\n") {
            Err(LinkError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(ModcodTable::parse("1.0,2.0\n0.5,3.0\n"), Err(LinkError::Table(_))));
        assert!(matches!(ModcodTable::parse("1.0,2.0\n2.0,7.0\n"), Err(LinkError::Table(_))));
        assert!(matches!(ModcodTable::parse("# empty\n"), Err(LinkError::Table(_))));
        let ok = ModcodTable::parse("-1.0, 0.5  # qpsk\n3.0,2.0\n").unwrap();
        assert_eq!(ok.rows().len(), 2);
    }

    #[test]
    fn rate_examples() {
        assert_abs_diff_eq!(data_rate_bps(6.0, 155e6), 930e6, epsilon = 1e-3);
        assert_eq!(data_rate_bps(0.0, 155e6), 0.0);
        assert_abs_diff_eq!(data_rate_bps(1.0, 25e6), 25e6, epsilon = 1e-9);
    }

    #[test]
    fn delay_examples() {
        assert_abs_diff_eq!(propagation_delay_ms(600.0).unwrap(), 2.0014, epsilon = 1e-4);
        assert_abs_diff_eq!(propagation_delay_ms(26980.0).unwrap(), 90.0, epsilon = 0.05);
        assert!(propagation_delay_ms(0.0).is_err());
    }

    #[test]
    fn doppler_examples() {
        assert_eq!(doppler_hz(0.0, 19e9), 0.0);
        assert_abs_diff_eq!(doppler_hz(7.5, 19e9), 475.3e3, epsilon = 50.0);
        assert_eq!(doppler_hz(-7.5, 19e9), -doppler_hz(7.5, 19e9));
    }

    #[test]
    fn measure_is_consistent() {
        let table = ModcodTable::dvb_s2x();
        let m = measure(SatId(3), 800.0, 45.0, 1.0, &kuiper(), 100e6, &table).unwrap();
        assert_eq!(m.delay_ms, propagation_delay_ms(800.0).unwrap());
        assert_eq!(m.data_rate_bps, m.spectral_efficiency_bps_hz * 100e6);
    }
}
