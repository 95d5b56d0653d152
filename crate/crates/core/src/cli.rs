//! Command-line front end.
//!
//! Defaults come from [`SimConfig::new`]; flags and `--config` files only
//! override fields. Exit codes: 0 success, 1 configuration or usage error,
//! 2 runtime failure.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constellation::{self, catalog_names, load_catalog, ConstellationSpec, ShellOrbit};
use crate::geometry::GroundStation;
use crate::handover::StrategyId;
use crate::link::ModcodTable;
use crate::simkit::{compare_with_results, run, GridEntry, ReceiverParams, RunResult, SimConfig};

/// Bumped whenever the series columns or summary layout change.
pub const FORMAT_VERSION: u32 = 1;

pub const SERIES_HEADER: [&str; 11] = [
    "time_s",
    "sat_id",
    "connected",
    "elevation_deg",
    "slant_range_km",
    "snr_db",
    "spectral_efficiency_bps_hz",
    "data_rate_mbps",
    "delay_ms",
    "doppler_khz",
    "handover",
];

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Config(String),
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "ngso-sim", version, about = "NGSO constellation handover simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// List the built-in constellations and their downlink parameters.
    List,
    /// Simulate one constellation with one handover strategy.
    Run(RunArgs),
    /// Simulate a grid of constellations and strategies.
    Compare(CompareArgs),
}

#[derive(Debug, Args)]
struct CommonArgs {
    /// Full simulation config file (JSON); flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Simulated duration in seconds [default: 10000].
    #[arg(long, allow_negative_numbers = true)]
    duration: Option<f64>,
    /// Time step in seconds [default: 1].
    #[arg(long, allow_negative_numbers = true)]
    step: Option<f64>,
    /// Ground station as lat,lon[,alt_km] [default: Aachen 50.7753,6.0839].
    #[arg(long, value_parser = parse_station, allow_hyphen_values = true)]
    gs: Option<GroundStation>,
    /// Override the constellation's minimum elevation, degrees.
    #[arg(long, allow_negative_numbers = true)]
    min_elevation: Option<f64>,
    /// Ground station G/T in dB/K [default: 20].
    #[arg(long, allow_negative_numbers = true)]
    gt: Option<f64>,
    /// Lumped extra losses in dB [default: 0].
    #[arg(long, allow_negative_numbers = true)]
    losses: Option<f64>,
    /// MODCOD table file, one "snr_db,efficiency" row per line.
    #[arg(long)]
    modcod: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Catalog name or constellation file.
    #[arg(long)]
    constellation: Option<String>,
    /// closest or max-visibility [default: closest].
    #[arg(long)]
    strategy: Option<String>,
    #[command(flatten)]
    common: CommonArgs,
    /// Output CSV path; written to stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional summary JSON path.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CompareArgs {
    /// Comma-separated catalog names or files [default: the whole catalog].
    #[arg(long, value_delimiter = ',')]
    constellations: Vec<String>,
    /// Comma-separated strategies [default: closest,max-visibility].
    #[arg(long, value_delimiter = ',')]
    strategies: Vec<String>,
    #[command(flatten)]
    common: CommonArgs,
    /// Directory receiving one CSV per run plus summary.json.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
}

fn parse_station(text: &str) -> Result<GroundStation, String> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("'{p}': {e}")))
        .collect::<Result<_, _>>()?;
    let (lat, lon, alt) = match parts.as_slice() {
        [lat, lon] => (*lat, *lon, 0.0),
        [lat, lon, alt] => (*lat, *lon, *alt),
        _ => return Err("expected lat,lon[,alt_km]".into()),
    };
    GroundStation::new(lat, lon, alt).map_err(|e| e.to_string())
}

/// Either a catalog name or an inline constellation document.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ConstellationRef {
    Named(String),
    Inline(Box<ConstellationSpec>),
}

/// On-disk simulation config; every field is optional.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimConfigFile {
    pub constellation: Option<ConstellationRef>,
    pub ground_station: Option<GroundStation>,
    pub strategy: Option<String>,
    pub duration_s: Option<f64>,
    pub step_s: Option<f64>,
    pub receiver: Option<ReceiverParams>,
    /// Path to a MODCOD table, relative to the config file.
    pub modcod: Option<PathBuf>,
    pub visibility_search_step_s: Option<f64>,
}

impl SimConfigFile {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        let file: SimConfigFile = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("invalid config {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((file, base))
    }
}

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn resolve_constellation(name_or_path: &str) -> Result<ConstellationSpec, CliError> {
    constellation::resolve(name_or_path).map_err(config_err)
}

fn parse_strategy(s: &str) -> Result<StrategyId, CliError> {
    s.parse().map_err(config_err)
}

/// Applies file values, then flags, on top of [`SimConfig::new`] defaults.
fn build_config(
    constellation: ConstellationSpec,
    strategy: StrategyId,
    file: Option<&(SimConfigFile, PathBuf)>,
    common: &CommonArgs,
) -> Result<SimConfig, CliError> {
    let mut cfg = SimConfig::new(constellation, strategy);
    if let Some((file, base)) = file {
        if let Some(gs) = file.ground_station {
            cfg.ground_station = gs;
        }
        if let Some(d) = file.duration_s {
            cfg.duration_s = d;
        }
        if let Some(s) = file.step_s {
            cfg.step_s = s;
        }
        if let Some(r) = file.receiver {
            cfg.receiver = r;
        }
        if let Some(path) = &file.modcod {
            cfg.modcod = ModcodTable::from_file(base.join(path)).map_err(config_err)?;
        }
        cfg.visibility_search_step_s = file.visibility_search_step_s;
    }
    if let Some(d) = common.duration {
        cfg.duration_s = d;
    }
    if let Some(s) = common.step {
        cfg.step_s = s;
    }
    if let Some(gs) = common.gs {
        cfg.ground_station = gs;
    }
    if let Some(m) = common.min_elevation {
        cfg.constellation.min_elevation_deg = m;
    }
    if let Some(g) = common.gt {
        cfg.receiver.g_over_t_db_k = g;
    }
    if let Some(l) = common.losses {
        cfg.receiver.extra_losses_db = l;
    }
    if let Some(path) = &common.modcod {
        cfg.modcod = ModcodTable::from_file(path).map_err(config_err)?;
    }
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn load_file(common: &CommonArgs) -> Result<Option<(SimConfigFile, PathBuf)>, CliError> {
    common.config.as_deref().map(SimConfigFile::load).transpose()
}

fn constellation_from_file(file: &Option<(SimConfigFile, PathBuf)>) -> Result<Option<ConstellationSpec>, CliError> {
    match file.as_ref().and_then(|(f, base)| f.constellation.clone().map(|c| (c, base))) {
        None => Ok(None),
        Some((ConstellationRef::Inline(spec), _)) => Ok(Some(*spec)),
        Some((ConstellationRef::Named(name), base)) => {
            let relative = base.join(&name);
            if relative.is_file() {
                ConstellationSpec::from_file(relative).map(Some).map_err(config_err)
            } else {
                resolve_constellation(&name).map(Some)
            }
        }
    }
}

/// Formats a float with 6 significant digits, trailing zeros trimmed.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return if x.is_finite() { "0".into() } else { x.to_string() };
    }
    // Round through scientific notation first so the digit count is exact.
    let rounded: f64 = format!("{x:.5e}").parse().expect("formatted float parses");
    let exponent = rounded.abs().log10().floor() as i32;
    let decimals = (5 - exponent).max(0) as usize;
    let mut s = format!("{rounded:.decimals$}");
    if s.contains('.') {
        while s.ends_with('0') {
            s.pop();
        }
        if s.ends_with('.') {
            s.pop();
        }
    }
    if s == "-0" {
        s = "0".into();
    }
    s
}

/// One CSV row of a time series.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputRecord {
    pub time_s: String,
    pub sat_id: String,
    pub connected: u8,
    pub elevation_deg: String,
    pub slant_range_km: String,
    pub snr_db: String,
    pub spectral_efficiency_bps_hz: String,
    pub data_rate_mbps: String,
    pub delay_ms: String,
    pub doppler_khz: String,
    pub handover: u8,
}

pub fn output_records(result: &RunResult) -> Vec<OutputRecord> {
    let flags = result.handover_flags();
    result
        .samples
        .iter()
        .zip(flags)
        .map(|(s, flag)| {
            let f = |v: Option<f64>| v.map(format_sig6).unwrap_or_default();
            let l = s.link;
            OutputRecord {
                time_s: s.time_s.to_string(),
                sat_id: l.map(|l| l.sat_id.to_string()).unwrap_or_default(),
                connected: u8::from(l.is_some()),
                elevation_deg: f(l.map(|l| l.elevation_deg)),
                slant_range_km: f(l.map(|l| l.slant_range_km)),
                snr_db: f(l.map(|l| l.snr_db)),
                spectral_efficiency_bps_hz: f(l.map(|l| l.spectral_efficiency_bps_hz)),
                data_rate_mbps: f(l.map(|l| l.data_rate_bps / 1e6)),
                delay_ms: f(l.map(|l| l.delay_ms)),
                doppler_khz: f(l.map(|l| l.doppler_hz / 1e3)),
                handover: u8::from(flag),
            }
        })
        .collect()
}

pub fn write_series_to<W: Write>(result: &RunResult, writer: W) -> Result<(), CliError> {
    let runtime = |e: csv::Error| CliError::Runtime(format!("cannot write series: {e}"));
    let mut w = csv::Writer::from_writer(writer);
    for record in output_records(result) {
        w.serialize(record).map_err(runtime)?;
    }
    w.flush().map_err(|e| CliError::Runtime(format!("cannot write series: {e}")))?;
    Ok(())
}

pub fn write_series(result: &RunResult, path: &Path) -> Result<(), CliError> {
    let io_err = |e: io::Error| CliError::Runtime(format!("cannot write {}: {e}", path.display()));
    let file = fs::File::create(path).map_err(io_err)?;
    write_series_to(result, io::BufWriter::new(file))
        .map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
}

/// A parsed series row; link fields are `None` on outage rows.
#[derive(Debug, Clone, PartialEq, Deserialize)]
pub struct SeriesRow {
    pub time_s: f64,
    pub sat_id: Option<u32>,
    pub connected: u8,
    pub elevation_deg: Option<f64>,
    pub slant_range_km: Option<f64>,
    pub snr_db: Option<f64>,
    pub spectral_efficiency_bps_hz: Option<f64>,
    pub data_rate_mbps: Option<f64>,
    pub delay_ms: Option<f64>,
    pub doppler_khz: Option<f64>,
    pub handover: u8,
}

pub fn read_series(path: &Path) -> Result<Vec<SeriesRow>, CliError> {
    let mut reader = csv::Reader::from_path(path)
        .map_err(|e| CliError::Runtime(format!("cannot read {}: {e}", path.display())))?;
    reader
        .deserialize()
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Runtime(format!("cannot parse {}: {e}", path.display())))
}

pub fn summary_key(entry: &GridEntry) -> String {
    format!("{}/{}", entry.constellation, entry.strategy)
}

#[derive(Serialize)]
struct SummaryDocument<'a> {
    format_version: u32,
    runs: BTreeMap<String, &'a GridEntry>,
}

/// JSON document keyed by `constellation/strategy`.
pub fn write_summary(grid: &[GridEntry]) -> String {
    let doc = SummaryDocument {
        format_version: FORMAT_VERSION,
        runs: grid.iter().map(|e| (summary_key(e), e)).collect(),
    };
    serde_json::to_string_pretty(&doc).expect("summary serializes")
}

fn write_text(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn summary_table(grid: &[GridEntry]) -> String {
    let mut out = format!(
        "{:<16} {:<15} {:>8} {:>9} {:>10} {:>10} {:>10} {:>8}\n",
        "constellation", "strategy", "HO/h", "SE mean", "Mbps mean", "delay min", "delay max", "outage"
    );
    for e in grid {
        let s = &e.summary;
        let stat = |v: Option<crate::simkit::Stat>, f: fn(crate::simkit::Stat) -> f64| {
            v.map(|x| format!("{:.3}", f(x))).unwrap_or_else(|| "-".into())
        };
        out.push_str(&format!(
            "{:<16} {:<15} {:>8.2} {:>9} {:>10} {:>10} {:>10} {:>8.4}\n",
            e.constellation,
            e.strategy.label(),
            s.handover_rate_per_hour,
            stat(s.spectral_efficiency_bps_hz, |x| x.mean),
            stat(s.data_rate_bps.map(|x| crate::simkit::Stat { min: x.min / 1e6, mean: x.mean / 1e6, max: x.max / 1e6 }), |x| x.mean),
            stat(s.delay_ms, |x| x.min),
            stat(s.delay_ms, |x| x.max),
            s.outage_fraction,
        ));
    }
    out
}

fn list_catalog() -> Result<String, CliError> {
    let mut out = format!(
        "{:<16} {:>7} {:<28} {:>12} {:>10} {:>9}\n",
        "name", "sats", "altitude [km]", "EIRPD dBW/Hz", "width MHz", "mask deg"
    );
    for name in catalog_names() {
        let spec = load_catalog(&name).map_err(|e| CliError::Runtime(e.to_string()))?;
        let mut altitudes: Vec<String> = Vec::new();
        for shell in &spec.shells {
            let text = match shell.orbit {
                ShellOrbit::Circular { altitude_km } => format!("{altitude_km}"),
                ShellOrbit::Elliptical { perigee_km, apogee_km, .. } => {
                    format!("perigee {perigee_km} apogee {apogee_km}")
                }
            };
            if !altitudes.contains(&text) {
                altitudes.push(text);
            }
        }
        out.push_str(&format!(
            "{:<16} {:>7} {:<28} {:>12} {:>10} {:>9}\n",
            name,
            spec.total_satellites(),
            altitudes.join("/"),
            spec.eirpd_max_dbw_hz,
            spec.channel_width_hz / 1e6,
            spec.min_elevation_deg,
        ));
    }
    Ok(out)
}

fn cmd_run(args: RunArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = load_file(&args.common)?;
    let constellation = match &args.constellation {
        Some(name) => resolve_constellation(name)?,
        None => constellation_from_file(&file)?
            .ok_or_else(|| CliError::Config("no constellation given (use --constellation or --config)".into()))?,
    };
    let strategy = match args
        .strategy
        .as_deref()
        .or_else(|| file.as_ref().and_then(|(f, _)| f.strategy.as_deref()))
    {
        Some(s) => parse_strategy(s)?,
        None => StrategyId::ClosestSatellite,
    };
    let cfg = build_config(constellation, strategy, file.as_ref(), &args.common)?;
    let result = run(&cfg).map_err(|e| CliError::Runtime(e.to_string()))?;
    let entry = GridEntry {
        constellation: cfg.constellation.name.clone(),
        strategy: cfg.strategy,
        config_digest: cfg.digest(),
        summary: result.summary.clone(),
    };
    match &args.out {
        Some(path) => {
            write_series(&result, path)?;
            write!(stdout, "{}", summary_table(std::slice::from_ref(&entry)))
                .map_err(|e| CliError::Runtime(e.to_string()))?;
        }
        None => write_series_to(&result, &mut *stdout)?,
    }
    if let Some(path) = &args.summary {
        write_text(path, &write_summary(std::slice::from_ref(&entry)))?;
    }
    Ok(())
}

fn cmd_compare(args: CompareArgs, stdout: &mut dyn Write) -> Result<(), CliError> {
    let file = load_file(&args.common)?;
    let constellations = if args.constellations.is_empty() {
        match constellation_from_file(&file)? {
            Some(spec) => vec![spec],
            None => catalog_names()
                .iter()
                .map(|n| resolve_constellation(n))
                .collect::<Result<_, _>>()?,
        }
    } else {
        args.constellations
            .iter()
            .map(|n| resolve_constellation(n))
            .collect::<Result<Vec<_>, _>>()?
    };
    let strategies = if args.strategies.is_empty() {
        StrategyId::ALL.to_vec()
    } else {
        args.strategies.iter().map(|s| parse_strategy(s)).collect::<Result<_, _>>()?
    };
    let mut configs = Vec::new();
    for spec in &constellations {
        for strategy in &strategies {
            configs.push(build_config(spec.clone(), *strategy, file.as_ref(), &args.common)?);
        }
    }
    let results = compare_with_results(&configs).map_err(|e| CliError::Runtime(e.to_string()))?;
    fs::create_dir_all(&args.out_dir)
        .map_err(|e| CliError::Runtime(format!("cannot create {}: {e}", args.out_dir.display())))?;
    for (entry, result) in &results {
        let path = args.out_dir.join(series_file_name(entry));
        write_series(result, &path)?;
    }
    let grid: Vec<GridEntry> = results.into_iter().map(|(e, _)| e).collect();
    write_text(&args.out_dir.join("summary.json"), &write_summary(&grid))?;
    write!(stdout, "{}", summary_table(&grid)).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(())
}

/// `<constellation>_<strategy>.csv`
pub fn series_file_name(entry: &GridEntry) -> String {
    format!("{}_{}.csv", entry.constellation, entry.strategy.label())
}

/// Runs the CLI with explicit output streams and returns the exit code.
pub fn run_with<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = write!(stdout, "{}", e.render());
                    0
                }
                _ => {
                    let _ = write!(stderr, "{}", e.render());
                    1
                }
            };
        }
    };
    let outcome = match cli.command {
        Command::List => list_catalog().and_then(|text| {
            stdout
                .write_all(text.as_bytes())
                .map_err(|e| CliError::Runtime(e.to_string()))
        }),
        Command::Run(args) => cmd_run(args, stdout),
        Command::Compare(args) => cmd_compare(args, stdout),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            e.exit_code()
        }
    }
}

pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let stdout = io::stdout();
    let stderr = io::stderr();
    run_with(args, &mut stdout.lock(), &mut stderr.lock())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sig6_formatting() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(914.5), "914.5");
        assert_eq!(format_sig6(2.001388), "2.00139");
        assert_eq!(format_sig6(123456.789), "123457");
        assert_eq!(format_sig6(1234567.0), "1234570");
        assert_eq!(format_sig6(-0.000123456789), "-0.000123457");
        assert_eq!(format_sig6(9.9999996), "10");
        assert_eq!(format_sig6(5.9), "5.9");
    }

    #[test]
    fn station_flag() {
        assert_eq!(parse_station("50.7753,6.0839").unwrap(), GroundStation::AACHEN);
        assert_eq!(parse_station("10,20,0.5").unwrap().altitude_km, 0.5);
        assert!(parse_station("10").is_err());
        assert!(parse_station("100,0").is_err());
        assert!(parse_station("a,b").is_err());
    }

    #[test]
    fn help_defaults_match_sim_config() {
        use clap::CommandFactory;
        let defaults = SimConfig::new(load_catalog("kuiper").unwrap(), StrategyId::ClosestSatellite);
        let mut cmd = Cli::command();
        let run = cmd.find_subcommand_mut("run").unwrap();
        let help = run.render_help().to_string();
        assert!(help.contains(&format!("[default: {}]", defaults.duration_s)), "{help}");
        assert!(help.contains(&format!("[default: {}]", defaults.step_s)));
        assert!(help.contains(&format!("[default: {}]", defaults.receiver.g_over_t_db_k)));
        assert!(help.contains(&format!("[default: {}]", defaults.receiver.extra_losses_db)));
        assert!(help.contains(&format!(
            "{},{}",
            defaults.ground_station.latitude_deg, defaults.ground_station.longitude_deg
        )));
        assert!(help.contains(&format!("[default: {}]", defaults.strategy.label())));
    }
}
