//! Serving-satellite selection policies and handover accounting.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Topocentric;

/// Index of a satellite in the generated constellation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SatId(pub u32);

impl fmt::Display for SatId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error)]
pub enum HandoverError {
    #[error("no remaining-visibility entry for visible satellite {0}")]
    MissingRemaining(SatId),
    #[error("unknown strategy '{0}' (expected closest or max-visibility)")]
    UnknownStrategy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyId {
    /// Always serve from the closest visible satellite.
    ClosestSatellite,
    /// Pick the satellite that stays visible longest, keep it until it sets.
    MaxRemainingVisibility,
}

impl StrategyId {
    pub const ALL: [StrategyId; 2] = [StrategyId::ClosestSatellite, StrategyId::MaxRemainingVisibility];

    /// Short label used on the command line and in output keys.
    pub fn label(&self) -> &'static str {
        match self {
            StrategyId::ClosestSatellite => "closest",
            StrategyId::MaxRemainingVisibility => "max-visibility",
        }
    }
}

impl fmt::Display for StrategyId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for StrategyId {
    type Err = HandoverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "closest" | "closest_satellite" | "1" => Ok(StrategyId::ClosestSatellite),
            "max-visibility" | "max_remaining_visibility" | "2" => Ok(StrategyId::MaxRemainingVisibility),
            other => Err(HandoverError::UnknownStrategy(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HandoverCause {
    InitialAcquisition,
    StrategySwitch,
    VisibilityLoss,
    OutageStart,
    OutageEnd,
}

impl HandoverCause {
    /// Causes that count towards the handover rate.
    pub fn is_handover(&self) -> bool {
        matches!(self, HandoverCause::StrategySwitch | HandoverCause::VisibilityLoss)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HandoverEvent {
    pub time_s: f64,
    pub from_sat: Option<SatId>,
    pub to_sat: Option<SatId>,
    pub cause: HandoverCause,
}

/// Closest visible satellite, lowest id on ties; `None` for an empty set.
pub fn select_strategy1(visible: &[(SatId, Topocentric)]) -> Option<SatId> {
    visible
        .iter()
        .min_by(|a, b| {
            a.1.slant_range_km
                .total_cmp(&b.1.slant_range_km)
                .then(a.0.cmp(&b.0))
        })
        .map(|(id, _)| *id)
}

/// Keeps `current` while it is visible; otherwise picks the visible satellite
/// with the largest remaining visibility, lowest id on ties.
pub fn select_strategy2(
    current: Option<SatId>,
    visible: &[(SatId, Topocentric)],
    remaining: &HashMap<SatId, f64>,
) -> Result<Option<SatId>, HandoverError> {
    if let Some(cur) = current {
        if visible.iter().any(|(id, _)| *id == cur) {
            return Ok(Some(cur));
        }
    }
    let mut best: Option<(SatId, f64)> = None;
    for (id, _) in visible {
        let r = *remaining.get(id).ok_or(HandoverError::MissingRemaining(*id))?;
        best = match best {
            Some((bid, br)) if br > r || (br == r && bid < *id) => Some((bid, br)),
            _ => Some((*id, r)),
        };
    }
    Ok(best.map(|(id, _)| id))
}

/// Classifies a change of serving satellite. `prev_visible` tells whether the
/// previous satellite is still in the visible set at `time_s`; `first_step`
/// marks the first sample of a run.
pub fn record_transition(
    prev: Option<SatId>,
    next: Option<SatId>,
    time_s: f64,
    prev_visible: bool,
    first_step: bool,
) -> Option<HandoverEvent> {
    let cause = match (prev, next) {
        (None, None) => return None,
        (Some(a), Some(b)) if a == b => return None,
        (None, Some(_)) if first_step => HandoverCause::InitialAcquisition,
        (None, Some(_)) => HandoverCause::OutageEnd,
        (Some(_), None) => HandoverCause::OutageStart,
        (Some(_), Some(_)) if prev_visible => HandoverCause::StrategySwitch,
        (Some(_), Some(_)) => HandoverCause::VisibilityLoss,
    };
    Some(HandoverEvent {
        time_s,
        from_sat: prev,
        to_sat: next,
        cause,
    })
}

/// Strategy switches plus visibility losses per hour.
pub fn handover_rate(events: &[HandoverEvent], duration_s: f64) -> f64 {
    if !(duration_s > 0.0) {
        return 0.0;
    }
    let count = events.iter().filter(|e| e.cause.is_handover()).count();
    count as f64 / duration_s * 3600.0
}

pub fn handover_count(events: &[HandoverEvent]) -> usize {
    events.iter().filter(|e| e.cause.is_handover()).count()
}
