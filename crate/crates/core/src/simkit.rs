//! Fixed-step simulation driver and run summaries.
//!
//! Each step propagates every satellite, builds the visible set for the
//! ground station, lets the configured strategy choose the serving satellite
//! and records the link metrics plus any change of serving satellite.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::constellation::{build_elements, CatalogError, ConstellationSpec};
use crate::geometry::{
    position_to_ecef, remaining_visibility_from_frame, velocity_to_ecef, GeometryError, GroundStation,
    StationFrame, Topocentric,
};
use crate::handover::{
    handover_count, handover_rate, record_transition, select_strategy1, select_strategy2, HandoverError,
    HandoverEvent, SatId, StrategyId,
};
use crate::link::{
    measure, LinkBudgetParams, LinkError, LinkSample, ModcodTable, DEFAULT_EXTRA_LOSSES_DB, DEFAULT_G_OVER_T_DB_K,
};
use crate::orbits::{Orbit, OrbitError};

pub const DEFAULT_DURATION_S: f64 = 10_000.0;
pub const DEFAULT_STEP_S: f64 = 1.0;
/// Remaining-visibility resolution, independent of the simulation step.
pub const DEFAULT_VISIBILITY_SEARCH_STEP_S: f64 = 1.0;
const MAX_STEPS: f64 = 1e7;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid configuration: {}", .0.join("; "))]
    Config(Vec<String>),
    #[error(transparent)]
    Catalog(#[from] CatalogError),
    #[error(transparent)]
    Orbit(#[from] OrbitError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Handover(#[from] HandoverError),
    #[error(transparent)]
    Link(#[from] LinkError),
    #[error("run {index} ({constellation}, {strategy}) failed: {source}")]
    Run {
        index: usize,
        constellation: String,
        strategy: StrategyId,
        #[source]
        source: Box<SimError>,
    },
}

/// Ground-station receiver side of the link budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReceiverParams {
    pub g_over_t_db_k: f64,
    pub extra_losses_db: f64,
}

impl Default for ReceiverParams {
    fn default() -> Self {
        Self {
            g_over_t_db_k: DEFAULT_G_OVER_T_DB_K,
            extra_losses_db: DEFAULT_EXTRA_LOSSES_DB,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub constellation: ConstellationSpec,
    pub ground_station: GroundStation,
    pub strategy: StrategyId,
    pub duration_s: f64,
    pub step_s: f64,
    pub receiver: ReceiverParams,
    pub modcod: ModcodTable,
    /// Look-ahead grid for remaining visibility; [`DEFAULT_VISIBILITY_SEARCH_STEP_S`] if unset.
    pub visibility_search_step_s: Option<f64>,
}

impl SimConfig {
    /// Defaults: Aachen, 10 000 s at 1 s steps, bundled DVB-S2X table.
    pub fn new(constellation: ConstellationSpec, strategy: StrategyId) -> Self {
        Self {
            constellation,
            ground_station: GroundStation::AACHEN,
            strategy,
            duration_s: DEFAULT_DURATION_S,
            step_s: DEFAULT_STEP_S,
            receiver: ReceiverParams::default(),
            modcod: ModcodTable::dvb_s2x(),
            visibility_search_step_s: None,
        }
    }

    pub fn link(&self) -> LinkBudgetParams {
        LinkBudgetParams {
            eirpd_dbw_hz: self.constellation.eirpd_max_dbw_hz,
            gs_g_over_t_db_k: self.receiver.g_over_t_db_k,
            extra_losses_db: self.receiver.extra_losses_db,
            downlink_freq_hz: self.constellation.downlink_freq_hz,
        }
    }

    pub fn search_step_s(&self) -> f64 {
        self.visibility_search_step_s.unwrap_or(DEFAULT_VISIBILITY_SEARCH_STEP_S)
    }

    /// Number of samples a run produces: floor(duration / step) + 1.
    pub fn sample_count(&self) -> usize {
        (self.duration_s / self.step_s + 1e-9).floor() as usize + 1
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let mut problems = Vec::new();
        if !(self.duration_s > 0.0 && self.duration_s.is_finite()) {
            problems.push(format!("duration_s {} must be > 0", self.duration_s));
        }
        if !(self.step_s > 0.0 && self.step_s.is_finite()) {
            problems.push(format!("step_s {} must be > 0", self.step_s));
        }
        if self.duration_s > 0.0 && self.step_s > 0.0 && self.duration_s / self.step_s > MAX_STEPS {
            problems.push(format!("duration_s / step_s exceeds {MAX_STEPS:e} steps"));
        }
        if let Some(s) = self.visibility_search_step_s {
            if !(s > 0.0 && s.is_finite()) {
                problems.push(format!("visibility_search_step_s {s} must be > 0"));
            }
        }
        problems.extend(self.constellation.problems().into_iter().map(|p| format!("constellation: {p}")));
        problems.extend(self.ground_station.problems().into_iter().map(|p| format!("ground station: {p}")));
        problems.extend(self.link().problems().into_iter().map(|p| format!("link: {p}")));
        if problems.is_empty() {
            Ok(())
        } else {
            Err(SimError::Config(problems))
        }
    }

    /// SHA-256 over the canonical JSON form of the full configuration.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub min: f64,
    pub mean: f64,
    pub max: f64,
}

impl Stat {
    pub fn from_values(values: impl IntoIterator<Item = f64>) -> Option<Stat> {
        let mut n = 0usize;
        let (mut sum, mut min, mut max) = (0.0, f64::INFINITY, f64::NEG_INFINITY);
        for v in values {
            n += 1;
            sum += v;
            min = min.min(v);
            max = max.max(v);
        }
        // keeps min <= mean <= max when rounding nudges the mean past an extreme
        (n > 0).then(|| Stat {
            min,
            mean: (sum / n as f64).clamp(min, max),
            max,
        })
    }
}

/// Statistics over connected samples; outages only show up in `outage_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub spectral_efficiency_bps_hz: Option<Stat>,
    pub data_rate_bps: Option<Stat>,
    pub delay_ms: Option<Stat>,
    pub handover_count: usize,
    pub handover_rate_per_hour: f64,
    pub outage_fraction: f64,
    pub samples: usize,
    pub connected_samples: usize,
}

impl SummaryStats {
    pub fn compute(samples: &[LinkSample], events: &[HandoverEvent], duration_s: f64) -> Self {
        let links: Vec<_> = samples.iter().filter_map(|s| s.link).collect();
        let total = samples.len();
        SummaryStats {
            spectral_efficiency_bps_hz: Stat::from_values(links.iter().map(|l| l.spectral_efficiency_bps_hz)),
            data_rate_bps: Stat::from_values(links.iter().map(|l| l.data_rate_bps)),
            delay_ms: Stat::from_values(links.iter().map(|l| l.delay_ms)),
            handover_count: handover_count(events),
            handover_rate_per_hour: handover_rate(events, duration_s),
            outage_fraction: if total == 0 {
                0.0
            } else {
                (total - links.len()) as f64 / total as f64
            },
            samples: total,
            connected_samples: links.len(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub samples: Vec<LinkSample>,
    pub events: Vec<HandoverEvent>,
    pub summary: SummaryStats,
}

impl RunResult {
    /// Per-sample flag: true where a counted handover happened.
    pub fn handover_flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.samples.len()];
        let mut idx = 0;
        for ev in self.events.iter().filter(|e| e.cause.is_handover()) {
            while idx < self.samples.len() && self.samples[idx].time_s < ev.time_s {
                idx += 1;
            }
            if idx < self.samples.len() {
                flags[idx] = true;
            }
        }
        flags
    }
}

fn look_all(orbits: &[Orbit], frame: &StationFrame, t: f64, mask: f64) -> Result<Vec<(SatId, Topocentric)>, SimError> {
    let looks: Vec<Option<(SatId, Topocentric)>> = orbits
        .par_iter()
        .enumerate()
        .map(|(id, orbit)| {
            let ecef = position_to_ecef(&orbit.position_at(t)?, t);
            let look = frame.look(&ecef);
            Ok((look.elevation_deg >= mask).then_some((SatId(id as u32), look)))
        })
        .collect::<Result<_, OrbitError>>()?;
    Ok(looks.into_iter().flatten().collect())
}

/// Runs one configuration.
pub fn run(config: &SimConfig) -> Result<RunResult, SimError> {
    config.validate()?;
    let orbits: Vec<Orbit> = build_elements(&config.constellation)?
        .iter()
        .map(Orbit::new)
        .collect::<Result<_, _>>()?;
    let frame = config.ground_station.frame();
    let mask = config.constellation.min_elevation_deg;
    let link = config.link();
    let search_step = config.search_step_s();

    let count = config.sample_count();
    let mut samples = Vec::with_capacity(count);
    let mut events = Vec::new();
    let mut serving: Option<SatId> = None;

    for k in 0..count {
        let t = k as f64 * config.step_s;
        let visible = look_all(&orbits, &frame, t, mask)?;
        let is_visible = |id: SatId| visible.iter().any(|(v, _)| *v == id);
        let prev_visible = serving.is_some_and(is_visible);

        let next = match config.strategy {
            StrategyId::ClosestSatellite => select_strategy1(&visible),
            StrategyId::MaxRemainingVisibility if prev_visible => serving,
            StrategyId::MaxRemainingVisibility => {
                // Only evaluated when a new satellite must be chosen.
                let remaining: HashMap<SatId, f64> = visible
                    .par_iter()
                    .map(|(id, _)| {
                        let orbit = &orbits[id.0 as usize];
                        let r = remaining_visibility_from_frame(orbit, t, &frame, mask, search_step, orbit.period_s())?;
                        Ok((*id, r))
                    })
                    .collect::<Result<_, GeometryError>>()?;
                select_strategy2(serving, &visible, &remaining)?
            }
        };

        if let Some(ev) = record_transition(serving, next, t, prev_visible, k == 0) {
            events.push(ev);
        }
        serving = next;

        let sample_link = match next {
            None => None,
            Some(id) => {
                let look = visible
                    .iter()
                    .find(|(v, _)| *v == id)
                    .map(|(_, look)| *look)
                    .expect("serving satellite is visible");
                let state = orbits[id.0 as usize].state_at(t)?;
                let los = position_to_ecef(&state.position_km, t) - frame.position;
                let closing = -velocity_to_ecef(&state, t).dot(&los) / los.norm();
                Some(measure(
                    id,
                    look.slant_range_km,
                    look.elevation_deg,
                    closing,
                    &link,
                    config.constellation.channel_width_hz,
                    &config.modcod,
                )?)
            }
        };
        samples.push(LinkSample { time_s: t, link: sample_link });
    }

    let summary = SummaryStats::compute(&samples, &events, config.duration_s);
    Ok(RunResult { samples, events, summary })
}

/// One cell of a comparison grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub constellation: String,
    pub strategy: StrategyId,
    pub config_digest: String,
    pub summary: SummaryStats,
}

/// Runs every configuration independently; output order follows input order.
pub fn compare(configs: &[SimConfig]) -> Result<Vec<GridEntry>, SimError> {
    compare_with_results(configs).map(|v| v.into_iter().map(|(entry, _)| entry).collect())
}

/// Like [`compare`] but keeps the full run results alongside each entry.
pub fn compare_with_results(configs: &[SimConfig]) -> Result<Vec<(GridEntry, RunResult)>, SimError> {
    if configs.is_empty() {
        return Err(SimError::Config(vec!["compare needs at least one configuration".into()]));
    }
    configs
        .par_iter()
        .enumerate()
        .map(|(index, cfg)| {
            let result = run(cfg).map_err(|source| SimError::Run {
                index,
                constellation: cfg.constellation.name.clone(),
                strategy: cfg.strategy,
                source: Box::new(source),
            })?;
            let entry = GridEntry {
                constellation: cfg.constellation.name.clone(),
                strategy: cfg.strategy,
                config_digest: cfg.digest(),
                summary: result.summary.clone(),
            };
            Ok((entry, result))
        })
        .collect()
}
