//! A full simulated call over a clean channel: both endpoints exchange
//! QoS and security parameters covertly while trust climbs.
//!
//!     cargo run --example clean_call

use stegvoip::pdu::ParameterKind;
use stegvoip::sim::{run_scenario, AttackerModel, Direction, SessionConfig};

fn main() {
    let cfg = SessionConfig {
        duration_packets: 1000, // 20 seconds of call
        voice_auth_cadence: 5,
        seed: 42,
        ..SessionConfig::default()
    };
    let report = run_scenario(&cfg, &AttackerModel::default()).unwrap();

    print!("{}", report.summary());

    println!("\nfirst parameters on the a->b stream:");
    println!("  slot  code  side      kind            value       check");
    for r in report.received_for(Direction::AToB).take(10) {
        println!(
            "  {:>4}  {:04b}  {:<8}  {:<14}  {:#010x}  {}",
            r.slot,
            r.code,
            r.side.label(),
            r.kind.label(),
            r.value,
            match r.verification {
                None => "-",
                Some(true) => "verified",
                Some(false) => "FAILED",
            }
        );
    }

    let chains = report
        .received_parameters
        .iter()
        .filter(|r| r.kind == ParameterKind::SecurityChain)
        .count();
    let voice = report
        .received_parameters
        .iter()
        .filter(|r| r.kind == ParameterKind::SecurityVoice)
        .count();
    println!("\nsecurity parameters verified: {chains} chain, {voice} voice-auth");

    println!("\ntrust trajectory (endpoint a, every 8th event):");
    for event in report
        .lot_events
        .iter()
        .filter(|l| l.side.label() == "a")
        .step_by(8)
    {
        println!(
            "  slot {:>4}: level {:>2} after {} {}",
            event.slot,
            event.level,
            if event.verified { "verified" } else { "failed" },
            event.cause,
        );
    }

    for q in &report.qos {
        println!(
            "\nendpoint {}: received {}/{} packets, jitter {}, lost {}",
            q.side.label(),
            q.received,
            q.expected,
            q.jitter,
            q.cumulative_lost
        );
    }
}
