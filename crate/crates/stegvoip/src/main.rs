//! Thin command-line front end over the library: run scenario files and
//! inspect captures for covert content.
//!
//! Exit codes: 0 success, 1 usage error, 2 config error, 3 I/O error.
//! A simulation that ends in a dropped session still exits 0; the drop is
//! a result, not a failure.

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

use stegvoip::config::{ConfigError, Scenario};
use stegvoip::inspect::inspect_packets;
use stegvoip::pcap::{pcap_read, pcap_write, PcapError};
use stegvoip::sim::{run_scenario, AttackerKind, SimError};

const EXIT_USAGE: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_IO: u8 = 3;

#[derive(Parser)]
#[command(
    name = "stegvoip",
    version,
    about = "Covert VoIP control protocol simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario config; write the report and the receiver-side pcap.
    Simulate {
        /// Scenario config file (TOML).
        config: PathBuf,
        /// Override the session seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the duration in packets per direction.
        #[arg(long)]
        duration: Option<u32>,
        /// Override the attacker kind.
        #[arg(long, value_parser = parse_attacker)]
        attacker: Option<AttackerKind>,
        /// Output directory for report.txt and trace.pcap.
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// List covert headers and reassembled parameters from a capture.
    Inspect {
        /// Capture file (classic pcap, raw IP).
        pcap: PathBuf,
        /// Scenario config providing the carrier map and watermark codec.
        #[arg(long)]
        map: PathBuf,
    },
}

fn parse_attacker(s: &str) -> Result<AttackerKind, String> {
    match s {
        "none" => Ok(AttackerKind::None),
        "header_scrub" => Ok(AttackerKind::HeaderScrub),
        "param_tamper" => Ok(AttackerKind::ParamTamper),
        "packet_drop" => Ok(AttackerKind::PacketDrop),
        "replay" => Ok(AttackerKind::Replay),
        other => Err(format!(
            "unknown attacker {other:?}; expected none|header_scrub|param_tamper|packet_drop|replay"
        )),
    }
}

enum CliError {
    Config(String),
    Io(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io(_) => EXIT_IO,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) => m,
        }
    }
}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> CliError {
        match e {
            ConfigError::Io(io) => CliError::Io(format!("config not found or unreadable: {io}")),
            other => CliError::Config(other.to_string()),
        }
    }
}

impl From<SimError> for CliError {
    fn from(e: SimError) -> CliError {
        CliError::Config(e.to_string())
    }
}

impl From<PcapError> for CliError {
    fn from(e: PcapError) -> CliError {
        match e {
            PcapError::Io(io) => CliError::Io(io.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }
}

/// Stdout writes go through this so that piping into `head` ends the
/// program quietly instead of panicking on the broken pipe.
fn emit(out: &mut impl Write, text: std::fmt::Arguments<'_>) -> Result<(), CliError> {
    match out.write_fmt(text) {
        Ok(()) => Ok(()),
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => std::process::exit(0),
        Err(e) => Err(CliError::Io(e.to_string())),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("stegvoip: {}", e.message());
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate {
            config,
            seed,
            duration,
            attacker,
            out,
        } => {
            let mut scenario = Scenario::from_path(&config)?;
            if let Some(seed) = seed {
                scenario.session.seed = seed;
            }
            if let Some(duration) = duration {
                scenario.session.duration_packets = duration;
            }
            if let Some(kind) = attacker {
                scenario.attacker.kind = kind;
            }
            let report = run_scenario(&scenario.session, &scenario.attacker)?;
            std::fs::create_dir_all(&out).map_err(|e| CliError::Io(e.to_string()))?;
            let report_path = out.join("report.txt");
            let pcap_path = out.join("trace.pcap");
            std::fs::write(&report_path, report.to_text())
                .map_err(|e| CliError::Io(e.to_string()))?;
            pcap_write(&pcap_path, &report.delivered_packets)?;
            let stdout = std::io::stdout();
            let mut stdout = stdout.lock();
            emit(&mut stdout, format_args!("{}", report.summary()))?;
            emit(
                &mut stdout,
                format_args!("report: {}\n", report_path.display()),
            )?;
            emit(
                &mut stdout,
                format_args!("pcap:   {}\n", pcap_path.display()),
            )?;
            Ok(())
        }
        Command::Inspect { pcap, map } => {
            let scenario = Scenario::from_path(&map)?;
            let packets = pcap_read(&pcap)?;
            let inspection = inspect_packets(
                &packets,
                &scenario.session.carrier_map,
                &scenario.session.codec,
            )
            .map_err(|e| CliError::Config(e.to_string()))?;
            let stdout = std::io::stdout();
            let mut stdout = stdout.lock();
            for p in &inspection.packets {
                emit(
                    &mut stdout,
                    format_args!(
                        "packet idx={} ssrc={:08x} seq={} p={:04b} s={} c={} fresh={}\n",
                        p.index,
                        p.ssrc,
                        p.seq,
                        p.header.code,
                        p.header.side.bit(),
                        u8::from(p.header.start),
                        u8::from(p.fresh),
                    ),
                )?;
            }
            for param in &inspection.parameters {
                emit(
                    &mut stdout,
                    format_args!(
                        "param ssrc={:08x} packet={} code={:04b} side={} value={:016x}\n",
                        param.ssrc,
                        param.packet_index,
                        param.code,
                        param.side.label(),
                        param.value,
                    ),
                )?;
            }
            for (index, error) in &inspection.errors {
                emit(
                    &mut stdout,
                    format_args!("error packet={index} detail={error:?}\n"),
                )?;
            }
            Ok(())
        }
    }
}
