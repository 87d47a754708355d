//! Command-line front end.
//!
//! Four subcommands: `simulate` runs one scenario file, `sweep` runs a named
//! comparison preset over reader counts and seeds, `dist` prints the skewed
//! slot distribution, and `replay` re-runs a scenario and checks that its
//! event log reproduces the recorded per-reader energy exactly.
//!
//! Exit codes: 0 success (including `--help`/`--version`), 1 bad invocation,
//! 2 unusable scenario or distribution parameters, 3 simulation or replay
//! failure.

use crate::config::{parse_str, preset, ScenarioConfig};
use crate::engine::{replay_energy, run_batch, Engine, SimFault};
use crate::metrics::MetricsReport;
use crate::sift::sift_distribution;
use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

#[derive(Parser)]
#[command(
    name = "dre-sim",
    version,
    about = "Deterministic simulator for dense-reader RFID networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario file and emit a one-row metrics CSV.
    Simulate {
        /// Scenario file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the metrics CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Also write the event log to this file.
        #[arg(long)]
        events: Option<PathBuf>,
    },
    /// Run a comparison preset across reader counts and seeds.
    Sweep {
        /// Preset name (scenario1..scenario5).
        #[arg(long)]
        preset: String,
        /// Comma-separated reader counts.
        #[arg(long, required = true, value_delimiter = ',')]
        readers: Vec<u32>,
        /// Seeds per configuration (base_seed, base_seed+1, ...).
        #[arg(long, default_value_t = 1)]
        seeds: u32,
        /// First seed of the range.
        #[arg(long, default_value_t = 1)]
        base_seed: u64,
        /// Write the metrics CSV here instead of stdout.
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Print the skewed slot distribution for k slots and population m.
    Dist {
        /// Number of contention slots.
        #[arg(long)]
        k: u32,
        /// Assumed contender population.
        #[arg(long)]
        m: u64,
    },
    /// Run a scenario, write its event log, and verify that replaying the log
    /// reproduces the recorded per-reader energy bit for bit.
    Replay {
        /// Scenario file (`key = value` lines).
        #[arg(long)]
        config: PathBuf,
        /// Override the scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Event log destination.
        #[arg(long)]
        events: PathBuf,
    },
}

enum CliError {
    /// The scenario or distribution parameters cannot be used (exit 2).
    Scenario(String),
    /// The simulation or its verification failed (exit 3).
    Run(String),
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Scenario(_) => 2,
            CliError::Run(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Scenario(m) | CliError::Run(m) => m,
        }
    }
}

fn fault_error(fault: SimFault) -> CliError {
    match fault {
        SimFault::InvalidScenario(_) => CliError::Scenario(fault.to_string()),
        SimFault::ContractViolation(_) => CliError::Run(fault.to_string()),
    }
}

/// Parses `args` and runs the requested subcommand, returning the process
/// exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(err) => {
            let code = match err.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = err.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Simulate { config, seed, output, events } => {
            simulate(&config, seed, output.as_deref(), events.as_deref())
        }
        Command::Sweep { preset, readers, seeds, base_seed, output } => {
            sweep(&preset, &readers, seeds, base_seed, output.as_deref())
        }
        Command::Dist { k, m } => dist(k, m),
        Command::Replay { config, seed, events } => replay(&config, seed, &events),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.code()
        }
    }
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))?;
    let mut config = parse_str(&text).map_err(|e| CliError::Scenario(e.to_string()))?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    config.validate().map_err(|e| CliError::Scenario(e.to_string()))?;
    Ok(config)
}

fn write_or_print(path: Option<&Path>, content: &str) -> Result<(), CliError> {
    match path {
        Some(path) => fs::write(path, content)
            .map_err(|e| CliError::Scenario(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn simulate(
    config_path: &Path,
    seed: Option<u64>,
    output: Option<&Path>,
    events: Option<&Path>,
) -> Result<(), CliError> {
    let config = load_config(config_path, seed)?;
    let mut engine = Engine::new(config, events.is_some()).map_err(fault_error)?;
    engine.run().map_err(fault_error)?;
    let (report, log) = engine.into_output();
    if let Some(path) = events {
        fs::write(path, log.to_lines())
            .map_err(|e| CliError::Scenario(format!("{}: {e}", path.display())))?;
    }
    write_or_print(output, &render_csv(&[report]))
}

/// Worker threads for sweeps; 0 lets the runtime pick.
fn configured_threads() -> usize {
    std::env::var("DRE_SIM_THREADS")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(0)
}

fn sweep(
    preset_name: &str,
    readers: &[u32],
    seeds: u32,
    base_seed: u64,
    output: Option<&Path>,
) -> Result<(), CliError> {
    if seeds == 0 {
        return Err(CliError::Scenario("seeds must be at least 1".to_string()));
    }
    let mut configs = Vec::new();
    for &count in readers {
        let batch = preset(preset_name, count).map_err(|e| CliError::Scenario(e.to_string()))?;
        for offset in 0..seeds {
            for mut config in batch.clone() {
                config.seed = base_seed + offset as u64;
                configs.push(config);
            }
        }
    }
    let reports = run_batch(&configs, configured_threads()).map_err(fault_error)?;
    write_or_print(output, &render_csv(&reports))
}

fn dist(k: u32, m: u64) -> Result<(), CliError> {
    let dist = sift_distribution(k, m).map_err(|e| CliError::Scenario(e.to_string()))?;
    let mut out = String::from("slot,probability\n");
    for (index, p) in dist.probs().iter().enumerate() {
        let _ = writeln!(out, "{},{}", index + 1, format_sig6(*p));
    }
    print!("{out}");
    Ok(())
}

fn replay(config_path: &Path, seed: Option<u64>, events_path: &Path) -> Result<(), CliError> {
    let config = load_config(config_path, seed)?;
    let mut engine = Engine::new(config.clone(), true).map_err(fault_error)?;
    engine.run().map_err(fault_error)?;
    let (report, log) = engine.into_output();
    fs::write(events_path, log.to_lines())
        .map_err(|e| CliError::Scenario(format!("{}: {e}", events_path.display())))?;
    let replayed = replay_energy(&log, &config);
    if replayed.len() != report.reader_energy_j.len() {
        return Err(CliError::Run(format!(
            "replay covers {} readers, simulation charged {}",
            replayed.len(),
            report.reader_energy_j.len()
        )));
    }
    for (reader, recorded) in &report.reader_energy_j {
        let from_log = replayed.get(reader).copied().unwrap_or(0.0);
        if from_log != *recorded {
            return Err(CliError::Run(format!(
                "reader {reader}: replayed energy {from_log} J != recorded {recorded} J"
            )));
        }
    }
    println!(
        "replay ok: {} events reproduce {} J across {} readers",
        log.len(),
        format_sig6(report.network_energy_j),
        report.readers
    );
    Ok(())
}

/// Formats with six significant digits; integers in magnitude >= 10^6 keep
/// all their integer digits.
pub fn format_sig6(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let mut exp = x.abs().log10().floor() as i32;
    // log10 can land a hair below an exact power of ten; nudge it back.
    if 10f64.powi(exp + 1) <= x.abs() {
        exp += 1;
    }
    let decimals = (5 - exp).max(0) as usize;
    format!("{x:.decimals$}")
}

/// Renders metrics as CSV, one row per run, sorted by protocol, reader count,
/// channel count, and seed so equal inputs always produce equal bytes.
pub fn render_csv(reports: &[MetricsReport]) -> String {
    let mut rows: Vec<&MetricsReport> = reports.iter().collect();
    rows.sort_by(|a, b| {
        a.protocol
            .cmp(&b.protocol)
            .then(a.readers.cmp(&b.readers))
            .then(a.channels.cmp(&b.channels))
            .then(a.seed.cmp(&b.seed))
    });
    let mut out = String::from(
        "protocol,readers,channels,seed,rounds,successful_reads,throughput_rps,unique_tags_known,avg_waiting_time_s,network_energy_j\n",
    );
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.protocol,
            r.readers,
            r.channels,
            r.seed,
            r.rounds,
            r.successful_reads,
            format_sig6(r.throughput_rps),
            r.unique_tags_known,
            format_sig6(r.avg_waiting_time_s),
            format_sig6(r.network_energy_j),
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeMap;

    #[test]
    fn six_significant_digits_round_correctly() {
        assert_eq!(format_sig6(0.0), "0");
        assert_eq!(format_sig6(0.8752136), "0.875214");
        assert_eq!(format_sig6(123.456789), "123.457");
        assert_eq!(format_sig6(1.0), "1.00000");
        assert_eq!(format_sig6(0.00012345678), "0.000123457");
        assert_eq!(format_sig6(1234567.89), "1234568");
        assert_eq!(format_sig6(-0.8752136), "-0.875214");
        assert_eq!(format_sig6(1000.0), "1000.00");
    }

    fn sample_report(protocol: &str, readers: u32, seed: u64) -> MetricsReport {
        MetricsReport {
            protocol: protocol.to_string(),
            readers,
            channels: 4,
            seed,
            rounds: 2,
            successful_reads: 5,
            redundant_reads: 1,
            unique_tags_known: 4,
            elapsed_s: 1.79966,
            throughput_rps: 2.77830,
            avg_waiting_time_s: 0.8752136,
            acquisitions: 9,
            acquisition_rate_per_s: 5.00094,
            avg_time_per_tag_s: 0.35,
            network_energy_j: 12.345678,
            reader_energy_j: BTreeMap::new(),
            per_round: Vec::new(),
        }
    }

    #[test]
    fn csv_rows_are_sorted_and_pinned_to_ten_columns() {
        let reports = vec![
            sample_report("nfra", 200, 1),
            sample_report("ierap", 100, 2),
            sample_report("ierap", 100, 1),
        ];
        let csv = render_csv(&reports);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 4);
        assert_eq!(
            lines[0],
            "protocol,readers,channels,seed,rounds,successful_reads,throughput_rps,unique_tags_known,avg_waiting_time_s,network_energy_j"
        );
        assert!(lines[1].starts_with("ierap,100,4,1,"));
        assert!(lines[2].starts_with("ierap,100,4,2,"));
        assert!(lines[3].starts_with("nfra,200,4,1,"));
        for line in &lines[1..] {
            assert_eq!(line.split(',').count(), 10);
        }
        assert!(lines[1].contains(",0.875214,"));
    }

    #[test]
    fn help_and_bad_flags_map_to_the_documented_codes() {
        assert_eq!(run(["dre-sim", "--help"]), 0);
        assert_eq!(run(["dre-sim", "--version"]), 0);
        assert_eq!(run(["dre-sim", "frobnicate"]), 1);
        assert_eq!(run(["dre-sim", "simulate"]), 1);
        assert_eq!(run(["dre-sim", "dist", "--k", "0", "--m", "4"]), 2);
    }

    #[test]
    fn missing_config_file_is_a_scenario_error() {
        assert_eq!(
            run(["dre-sim", "simulate", "--config", "/nonexistent/run.conf"]),
            2
        );
    }
}
