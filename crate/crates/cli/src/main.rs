use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand, ValueEnum};

use sentinel_core::analytics::{fleet_report, synthetic_fleet, AnonymizedEvent, RiskParams, SyntheticFleet};
use sentinel_core::codec::parse_hex_dump;
use sentinel_core::harness::{
    canonical_scenarios, check_expectations, emit_report, run_table, scan_parameter_sweep, Detector, Expectations,
    ReportFormat, Scenario, SweepConfig,
};
use sentinel_core::ios::{IosConfig, IosEngine, TaEvent};
use sentinel_core::record::{read_json_lines, write_json_lines};

#[derive(Parser)]
#[command(name = "sentinel", version, about = "Simulate Find My trackers and run tracking-detection engines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EngineArg {
    Airguard,
    Ios,
    Both,
}

impl EngineArg {
    fn engines(self) -> Vec<Detector> {
        match self {
            EngineArg::Airguard => vec![Detector::AirGuard],
            EngineArg::Ios => vec![Detector::Ios],
            EngineArg::Both => Detector::ALL.to_vec(),
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

impl From<FormatArg> for ReportFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Table => ReportFormat::Table,
            FormatArg::Json => ReportFormat::Json,
            FormatArg::Csv => ReportFormat::Csv,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run scenario files, or the bundled pocket/backpack/car set with `canonical`.
    Run {
        #[arg(required = true)]
        scenarios: Vec<String>,
        #[arg(long, value_enum, default_value = "both")]
        engine: EngineArg,
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
        /// Replace every scenario's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Expectation file; exit with 3 when any row violates it.
        #[arg(long)]
        expect: Option<PathBuf>,
    },
    /// Decode a hex dump with one frame (address then payload) per line.
    Decode { hexdump: PathBuf },
    /// Devices discovered per scan duration and scan mode.
    Sweep {
        #[arg(long, value_enum, default_value = "table")]
        format: FormatArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 8)]
        devices: usize,
    },
    /// Fleet statistics over anonymized JSON-lines events.
    Fleet {
        events: PathBuf,
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
        /// Count Apple-device notifications towards risk levels.
        #[arg(long)]
        include_other: bool,
    },
    /// Write a calibrated synthetic fleet as JSON-lines events.
    Synth {
        #[arg(long, default_value_t = 500)]
        users: u32,
        #[arg(long, default_value_t = 28)]
        days: i64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Replay a JSON-lines event log through the iOS engine.
    Replay { events: PathBuf },
}

/// Configuration problems exit with 2.
struct ConfigError(anyhow::Error);

impl<E: Into<anyhow::Error>> From<E> for ConfigError {
    fn from(e: E) -> Self {
        ConfigError(e.into())
    }
}

fn read(path: &Path) -> Result<String, ConfigError> {
    Ok(fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?)
}

fn load_scenarios(args: &[String]) -> Result<Vec<Scenario>, ConfigError> {
    let mut out = Vec::new();
    for a in args {
        if a == "canonical" {
            out.extend(canonical_scenarios());
        } else {
            let text = read(Path::new(a))?;
            out.push(Scenario::from_toml(&text).with_context(|| format!("in {a}"))?);
        }
    }
    Ok(out)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(ConfigError(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode, ConfigError> {
    match cli.command {
        Command::Run { scenarios, engine, format, seed, expect } => {
            let mut scenarios = load_scenarios(&scenarios)?;
            if let Some(seed) = seed {
                scenarios.iter_mut().for_each(|s| s.seed = seed);
            }
            let expectations = match &expect {
                Some(p) => Some(Expectations::from_toml(&read(p)?).with_context(|| format!("in {}", p.display()))?),
                None => None,
            };
            let rows = run_table(&scenarios, &engine.engines())?;
            print!("{}", emit_report(&rows, None, format.into()));
            if let Some(exp) = expectations {
                let misses = check_expectations(&rows, &exp);
                for m in &misses {
                    eprintln!("mismatch: {m}");
                }
                if !misses.is_empty() {
                    return Ok(ExitCode::from(3));
                }
            }
        }
        Command::Decode { hexdump } => {
            let text = read(&hexdump)?;
            let mut bad = 0;
            for (line, result) in parse_hex_dump(&text) {
                match result {
                    Ok(adv) => {
                        let category = adv.category().map_or("-", |c| c.label());
                        let key = adv.public_key().map(|k| hex(&k.0)).unwrap_or_else(|| "-".into());
                        println!("{line}: {} {:?} {category} key={key}", adv.address, adv.mode);
                    }
                    Err(e) => {
                        bad += 1;
                        println!("{line}: error: {e}");
                    }
                }
            }
            if bad > 0 {
                return Ok(ExitCode::from(1));
            }
        }
        Command::Sweep { format, seed, devices } => {
            let m = scan_parameter_sweep(&SweepConfig { seed, devices, ..Default::default() });
            match format {
                FormatArg::Table => print!("{}", m.to_table()),
                FormatArg::Csv => print!("{}", m.to_csv()),
                FormatArg::Json => println!("{}", serde_json::to_string(&m)?),
            }
        }
        Command::Fleet { events, format, include_other } => {
            let file = fs::File::open(&events).with_context(|| format!("reading {}", events.display()))?;
            let events: Vec<AnonymizedEvent> = read_json_lines(std::io::BufReader::new(file))?;
            let report = fleet_report(&events, &RiskParams { include_other, ..Default::default() });
            match format {
                FormatArg::Json | FormatArg::Table => println!("{}", serde_json::to_string_pretty(&report)?),
                FormatArg::Csv => {
                    for (name, table) in report.csv_tables()? {
                        println!("# {name}");
                        print!("{table}");
                    }
                }
            }
        }
        Command::Synth { users, days, seed } => {
            let events = synthetic_fleet(&SyntheticFleet { users, days, seed, ..Default::default() });
            write_json_lines(std::io::stdout().lock(), &events)?;
        }
        Command::Replay { events } => {
            let file = fs::File::open(&events).with_context(|| format!("reading {}", events.display()))?;
            let events: Vec<TaEvent> = read_json_lines(std::io::BufReader::new(file))?;
            let verdicts = IosEngine::replay(IosConfig::default(), events);
            write_json_lines(std::io::stdout().lock(), &verdicts)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
