use std::collections::BTreeMap;
use std::sync::OnceLock;

use ngso_sim::constellation::{build_elements, catalog_names};
use ngso_sim::geometry::{position_to_ecef, visible_set};
use ngso_sim::handover::HandoverCause;
use ngso_sim::orbits::Orbit;
use ngso_sim::simkit::compare_with_results;
use ngso_sim::{load_catalog, run, RunResult, SatId, SimConfig, StrategyId};

const S1: StrategyId = StrategyId::ClosestSatellite;
const S2: StrategyId = StrategyId::MaxRemainingVisibility;

type Grid = BTreeMap<(String, StrategyId), RunResult>;

fn grid(step_s: f64) -> Grid {
    let mut configs = Vec::new();
    for name in catalog_names() {
        for strategy in StrategyId::ALL {
            let mut cfg = SimConfig::new(load_catalog(&name).unwrap(), strategy);
            cfg.step_s = step_s;
            configs.push(cfg);
        }
    }
    compare_with_results(&configs)
        .unwrap()
        .into_iter()
        .map(|(e, r)| ((e.constellation, e.strategy), r))
        .collect()
}

fn fine_grid() -> &'static Grid {
    static GRID: OnceLock<Grid> = OnceLock::new();
    GRID.get_or_init(|| grid(1.0))
}

fn serving(r: &RunResult) -> Vec<Option<SatId>> {
    r.samples.iter().map(|s| s.link.map(|l| l.sat_id)).collect()
}

/// Visible ids at every sample time of a short run.
fn visible_ids(cfg: &SimConfig) -> Vec<Vec<SatId>> {
    let orbits: Vec<Orbit> = build_elements(&cfg.constellation).unwrap().iter().map(|e| Orbit::new(e).unwrap()).collect();
    (0..cfg.sample_count())
        .map(|k| {
            let t = k as f64 * cfg.step_s;
            let ecef: Vec<_> = orbits.iter().map(|o| position_to_ecef(&o.position_at(t).unwrap(), t)).collect();
            visible_set(&ecef, &cfg.ground_station, cfg.constellation.min_elevation_deg)
                .into_iter()
                .map(|(id, _)| id)
                .collect()
        })
        .collect()
}

#[test]
fn strategy1_serves_a_closest_visible_satellite() {
    let mut cfg = SimConfig::new(load_catalog("oneweb_phase1").unwrap(), S1);
    cfg.duration_s = 1500.0;
    let result = run(&cfg).unwrap();
    let orbits: Vec<Orbit> = build_elements(&cfg.constellation).unwrap().iter().map(|e| Orbit::new(e).unwrap()).collect();
    for sample in &result.samples {
        let t = sample.time_s;
        let ecef: Vec<_> = orbits.iter().map(|o| position_to_ecef(&o.position_at(t).unwrap(), t)).collect();
        let visible = visible_set(&ecef, &cfg.ground_station, cfg.constellation.min_elevation_deg);
        let link = sample.link.expect("oneweb covers Aachen");
        assert!(visible.iter().all(|(_, look)| look.slant_range_km >= link.slant_range_km), "t={t}");
        assert!(visible.iter().any(|(id, _)| *id == link.sat_id));
    }
}

#[test]
fn strategy2_switches_only_when_serving_satellite_sets() {
    for name in ["kuiper", "oneweb_phase1"] {
        let mut cfg = SimConfig::new(load_catalog(name).unwrap(), S2);
        cfg.duration_s = 3000.0;
        let result = run(&cfg).unwrap();
        let visible = visible_ids(&cfg);
        let ids = serving(&result);
        let mut switches = 0;
        for k in 1..ids.len() {
            if let (Some(prev), Some(next)) = (ids[k - 1], ids[k]) {
                if prev != next {
                    switches += 1;
                    assert!(!visible[k].contains(&prev), "{name}: left visible {prev} at step {k}");
                }
            }
        }
        assert!(switches > 0, "{name}: expected at least one handover in 3000 s");
    }
}

#[test]
fn events_are_ordered_and_match_serving_changes() {
    for ((name, strategy), result) in fine_grid() {
        let ids = serving(result);
        let times: Vec<f64> = result.events.iter().map(|e| e.time_s).collect();
        assert!(times.windows(2).all(|w| w[0] <= w[1]), "{name}/{strategy}");
        let changes = ids.windows(2).filter(|w| w[0] != w[1]).count() + usize::from(ids[0].is_some());
        assert_eq!(changes, result.events.len(), "{name}/{strategy}");
        for ev in &result.events {
            let k = (ev.time_s / 1.0).round() as usize;
            assert_eq!(ids[k], ev.to_sat);
            if ev.cause != HandoverCause::InitialAcquisition {
                assert_eq!(ids[k - 1], ev.from_sat);
            }
        }
    }
}

#[test]
fn catalog_runs_have_no_outage_and_strategy2_hands_over_less() {
    let g = fine_grid();
    for name in catalog_names() {
        let a = &g[&(name.clone(), S1)];
        let b = &g[&(name.clone(), S2)];
        assert_eq!(a.summary.outage_fraction, 0.0, "{name}");
        assert_eq!(b.summary.outage_fraction, 0.0, "{name}");
        assert!(b.summary.handover_count <= a.summary.handover_count, "{name}");
    }
}

#[test]
fn strategy1_delay_dominates_strategy2() {
    let g = fine_grid();
    for name in catalog_names() {
        let a = &g[&(name.clone(), S1)];
        let b = &g[&(name.clone(), S2)];
        for (x, y) in a.samples.iter().zip(&b.samples) {
            if let (Some(l1), Some(l2)) = (x.link, y.link) {
                assert!(l1.delay_ms <= l2.delay_ms, "{name} t={}", x.time_s);
            }
        }
    }
}

#[test]
fn mean_delay_is_step_insensitive() {
    let fine = fine_grid();
    let coarse = grid(10.0);
    let mut report = Vec::new();
    let mut ok = true;
    for (key, result) in &coarse {
        let c = result.summary.delay_ms.unwrap().mean;
        let f = fine[key].summary.delay_ms.unwrap().mean;
        let rel = (c - f).abs() / f;
        ok &= rel < 0.01;
        report.push(format!("{}/{}: {:.3}%", key.0, key.1, 100.0 * rel));
    }
    assert!(ok, "mean delay change 10 s vs 1 s exceeds 1%: {}", report.join(", "));
}
