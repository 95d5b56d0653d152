use std::fs;
use std::path::Path;
use std::process::Command;

use ngso_sim::cli::{self, format_sig6, read_series, SeriesRow, SERIES_HEADER};
use ngso_sim::{load_catalog, run, SimConfig, StrategyId};
use serde_json::Value;

fn invoke(args: &[&str]) -> (i32, String, String) {
    let mut all = vec!["ngso-sim"];
    all.extend_from_slice(args);
    let (mut out, mut err) = (Vec::new(), Vec::new());
    let code = cli::run_with(all, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn summary_of(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn single_run(summary: &Value) -> &Value {
    let runs = summary["runs"].as_object().unwrap();
    assert_eq!(runs.len(), 1);
    runs.values().next().unwrap()
}

#[test]
fn full_kuiper_run_has_fencepost_row_count() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("series.csv");
    let (code, _, err) = invoke(&[
        "run",
        "--constellation",
        "kuiper",
        "--strategy",
        "closest",
        "--duration",
        "10000",
        "--step",
        "1",
        "--gs",
        "50.7753,6.0839",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), SERIES_HEADER.join(","));
    assert_eq!(lines.count(), 10_001);
}

#[test]
fn unknown_constellation_exits_1_and_names_catalog() {
    let (code, _, err) = invoke(&["run", "--constellation", "nope"]);
    assert_eq!(code, 1);
    for name in ["kuiper", "oneweb_phase1", "mangata_meo", "pleiades"] {
        assert!(err.contains(name), "{err}");
    }
}

#[test]
fn usage_errors_exit_1_help_exits_0() {
    let (code, _, err) = invoke(&["run", "--bogus"]);
    assert_eq!(code, 1);
    assert!(err.contains("Usage"), "{err}");
    assert_eq!(invoke(&["frobnicate"]).0, 1);
    assert_eq!(invoke(&[]).0, 1);
    let (code, out, _) = invoke(&["--help"]);
    assert_eq!(code, 0);
    assert!(out.contains("compare"));
}

#[test]
fn invalid_values_exit_1_runtime_failures_exit_2() {
    let (code, _, err) = invoke(&["run", "--constellation", "pleiades", "--step", "0", "--duration", "-5"]);
    assert_eq!(code, 1);
    assert!(err.contains("step_s") && err.contains("duration_s"), "{err}");
    assert_eq!(invoke(&["run", "--constellation", "pleiades", "--strategy", "fastest"]).0, 1);
    assert_eq!(invoke(&["run", "--constellation", "pleiades", "--gs", "91,0"]).0, 1);

    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("missing").join("series.csv");
    let (code, _, err) = invoke(&["run", "--constellation", "pleiades", "--duration", "10", "--out", path_str(&out)]);
    assert_eq!(code, 2);
    assert!(err.contains("series.csv"), "{err}");
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_ngso-sim");
    let list = Command::new(bin).arg("list").output().unwrap();
    assert!(list.status.success());
    let text = String::from_utf8(list.stdout).unwrap();
    for (name, eirpd) in [("kuiper", "-43.9"), ("oneweb_phase1", "-38.7"), ("mangata_meo", "-36.3"), ("pleiades", "-24.7")] {
        let line = text.lines().find(|l| l.starts_with(name)).unwrap();
        assert!(line.contains(eirpd), "{line}");
    }
    let bad = Command::new(bin).args(["run", "--constellation", "nope"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let files: Vec<_> = (0..2).map(|k| dir.path().join(format!("run{k}.csv"))).collect();
    for f in &files {
        let args = ["run", "--constellation", "oneweb_phase1", "--strategy", "max-visibility", "--duration", "3000", "--out", path_str(f)];
        assert_eq!(invoke(&args).0, 0);
    }
    assert_eq!(fs::read(&files[0]).unwrap(), fs::read(&files[1]).unwrap());
}

fn run_to_files(dir: &Path, extra: &[&str]) -> (Vec<SeriesRow>, Value) {
    let csv = dir.join("series.csv");
    let summary = dir.join("summary.json");
    let mut args = vec!["run", "--out", path_str(&csv), "--summary", path_str(&summary)];
    args.extend_from_slice(extra);
    let (code, _, err) = invoke(&args);
    assert_eq!(code, 0, "{err}");
    (read_series(&csv).unwrap(), summary_of(&summary))
}

#[test]
fn handover_column_sums_to_event_count() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, summary) = run_to_files(dir.path(), &["--constellation", "kuiper", "--duration", "4000"]);
    let flagged: u64 = rows.iter().map(|r| u64::from(r.handover)).sum();
    let count = single_run(&summary)["summary"]["handover_count"].as_u64().unwrap();
    assert!(count > 0);
    assert_eq!(flagged, count);
}

#[test]
fn summary_mean_delay_matches_series() {
    let spec = load_catalog("mangata_meo").unwrap();
    let mut cfg = SimConfig::new(spec, StrategyId::MaxRemainingVisibility);
    cfg.duration_s = 5000.0;
    let result = run(&cfg).unwrap();
    let delays: Vec<f64> = result.samples.iter().filter_map(|s| s.link.map(|l| l.delay_ms)).collect();
    let exact_mean = delays.iter().sum::<f64>() / delays.len() as f64;
    let summary_mean = result.summary.delay_ms.unwrap().mean;
    assert!((summary_mean - exact_mean).abs() < 1e-9);

    // Printed values carry 6 significant digits, so each row is within half a unit of the 6th digit.
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    cli::write_series(&result, &path).unwrap();
    let rows = read_series(&path).unwrap();
    let printed: Vec<f64> = rows.iter().filter_map(|r| r.delay_ms).collect();
    let printed_mean = printed.iter().sum::<f64>() / printed.len() as f64;
    assert!((printed_mean - summary_mean).abs() <= 5e-6 * summary_mean);
}

fn recompute(values: impl Iterator<Item = f64>) -> (f64, f64, f64) {
    let v: Vec<f64> = values.collect();
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (min, v.iter().sum::<f64>() / v.len() as f64, max)
}

#[test]
fn csv_round_trip_reproduces_summary_at_printed_precision() {
    let dir = tempfile::tempdir().unwrap();
    let (rows, summary) = run_to_files(
        dir.path(),
        &["--constellation", "pleiades", "--strategy", "closest", "--duration", "10000", "--step", "5"],
    );
    let s = &single_run(&summary)["summary"];
    let check = |column: fn(&SeriesRow) -> Option<f64>, key: &str, scale: f64| {
        let (min, mean, max) = recompute(rows.iter().filter_map(column));
        let stat = &s[key];
        let field = |f: &str| stat[f].as_f64().unwrap() / scale;
        assert_eq!(format_sig6(min), format_sig6(field("min")), "{key} min");
        assert_eq!(format_sig6(max), format_sig6(field("max")), "{key} max");
        assert!((mean - field("mean")).abs() <= 5e-6 * field("mean").abs(), "{key} mean");
    };
    check(|r| r.delay_ms, "delay_ms", 1.0);
    check(|r| r.spectral_efficiency_bps_hz, "spectral_efficiency_bps_hz", 1.0);
    check(|r| r.data_rate_mbps, "data_rate_bps", 1e6);

    let disconnected = rows.iter().filter(|r| r.connected == 0).count();
    let outage = disconnected as f64 / rows.len() as f64;
    assert_eq!(outage, s["outage_fraction"].as_f64().unwrap());
    assert_eq!(rows.len() as u64, s["samples"].as_u64().unwrap());
    let flagged: u64 = rows.iter().map(|r| u64::from(r.handover)).sum();
    assert_eq!(flagged, s["handover_count"].as_u64().unwrap());
}

#[test]
fn outage_rows_carry_empty_link_fields() {
    let dir = tempfile::tempdir().unwrap();
    let constellation = dir.path().join("lonely.json");
    fs::write(
        &constellation,
        r#"{"name": "lonely", "eirpd_max_dbw_hz": -40, "channel_width_mhz": 100,
            "shells": [{"altitude_km": 600, "inclination_deg": 0, "num_planes": 1, "sats_per_plane": 1}]}"#,
    )
    .unwrap();
    let out = dir.path().join("s.csv");
    let (code, _, err) = invoke(&["run", "--constellation", path_str(&constellation), "--duration", "10", "--out", path_str(&out)]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(&out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 12);
    for line in &lines[1..] {
        let fields: Vec<&str> = line.split(',').collect();
        assert_eq!(fields.len(), SERIES_HEADER.len());
        assert_eq!(fields[2], "0");
        assert!(fields[1].is_empty() && fields[3..10].iter().all(|f| f.is_empty()), "{line}");
        assert_eq!(fields[10], "0");
    }
}

#[test]
fn config_file_sets_fields_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sim.json");
    fs::write(
        &config,
        r#"{"constellation": "pleiades", "strategy": "max-visibility", "duration_s": 20, "step_s": 2,
            "ground_station": {"latitude_deg": 48.0, "longitude_deg": 11.0},
            "receiver": {"g_over_t_db_k": 15, "extra_losses_db": 1}}"#,
    )
    .unwrap();
    let csv = dir.path().join("a.csv");
    let summary = dir.path().join("a.json");
    let base = ["run", "--config", path_str(&config), "--out", path_str(&csv), "--summary", path_str(&summary)];
    assert_eq!(invoke(&base).0, 0);
    assert_eq!(read_series(&csv).unwrap().len(), 11);
    let first = summary_of(&summary);
    let entry = single_run(&first);
    assert_eq!(entry["strategy"], "max_remaining_visibility");

    let mut overridden = base.to_vec();
    overridden.extend_from_slice(&["--duration", "30", "--gt", "20"]);
    assert_eq!(invoke(&overridden).0, 0);
    assert_eq!(read_series(&csv).unwrap().len(), 16);
    assert_ne!(single_run(&summary_of(&summary))["config_digest"], entry["config_digest"]);

    fs::write(&config, r#"{"constellation": "pleiades", "stepsize": 2}"#).unwrap();
    assert_eq!(invoke(&base).0, 1);
}

#[test]
fn compare_writes_keyed_grid() {
    let dir = tempfile::tempdir().unwrap();
    let (code, out, err) = invoke(&["compare", "--duration", "20", "--out-dir", path_str(dir.path())]);
    assert_eq!(code, 0, "{err}");
    assert_eq!(out.lines().count(), 9);
    let summary = summary_of(&dir.path().join("summary.json"));
    assert_eq!(summary["format_version"], 1);
    let runs = summary["runs"].as_object().unwrap();
    assert_eq!(runs.len(), 8);
    for name in ["kuiper", "oneweb_phase1", "mangata_meo", "pleiades"] {
        for strategy in ["closest", "max-visibility"] {
            assert!(runs.contains_key(&format!("{name}/{strategy}")));
            assert_eq!(read_series(&dir.path().join(format!("{name}_{strategy}.csv"))).unwrap().len(), 21);
        }
    }

    let sub = tempfile::tempdir().unwrap();
    let args = ["compare", "--constellations", "pleiades", "--strategies", "closest", "--duration", "10", "--out-dir", path_str(sub.path())];
    assert_eq!(invoke(&args).0, 0);
    assert_eq!(summary_of(&sub.path().join("summary.json"))["runs"].as_object().unwrap().len(), 1);
}
