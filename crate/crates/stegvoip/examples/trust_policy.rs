//! The level-of-trust policy: verified parameters raise the level by
//! their weight, failures lower it, silence runs a timer out, and the
//! session breaks at the critical level.
//!
//!     cargo run --example trust_policy

use stegvoip::lot::{max_safe_spoofs, LotConfig, LotState, LotStatus};
use stegvoip::pdu::ParameterKind;

fn main() {
    let cfg = LotConfig::default(); // a = 2, x = 10, k = 3000 ms
    println!(
        "config: critical level {}, initial {}, timer limit {} ms, weights 1/2/5",
        cfg.critical_level, cfg.initial_level, cfg.timer_limit_ms
    );

    // A mixed run of verifications.
    let mut state = LotState::init(&cfg).unwrap();
    println!("\nevent                        level  status");
    println!(
        "start                        {:>5}  {}",
        state.level,
        state.status.label()
    );
    let events = [
        (ParameterKind::Informational, true),
        (ParameterKind::Informational, true),
        (ParameterKind::SecurityVoice, true),
        (ParameterKind::SecurityChain, true),
        (ParameterKind::SecurityChain, false),
        (ParameterKind::Informational, true),
        (ParameterKind::SecurityVoice, false),
        (ParameterKind::SecurityChain, false),
    ];
    for (kind, verified) in events {
        if !state.is_active() {
            break;
        }
        let update = state.on_parameter(kind, verified, &cfg).unwrap();
        println!(
            "{:<16} {:<10}  {:>5}  {}{}",
            kind.label(),
            if verified { "verified" } else { "failed" },
            update.level_after,
            update.status_after.label(),
            if update.saturated {
                " (saturation reset)"
            } else {
                ""
            },
        );
    }

    // Saturation: the level is clamped back to x when it reaches a*x.
    let mut rich = LotState::init_at_level(&cfg, 19).unwrap();
    let update = rich
        .on_parameter(ParameterKind::Informational, true, &cfg)
        .unwrap();
    println!(
        "\nlevel 19 + verified info -> {} (clamped at a*x = {})",
        update.level_after,
        cfg.saturation()
    );

    // Timeout: nothing verified for longer than k.
    let mut silent = LotState::init(&cfg).unwrap();
    let mut elapsed = 0;
    while silent.is_active() {
        silent.on_tick(20, &cfg).unwrap();
        elapsed += 20;
    }
    println!(
        "silent call drops after {elapsed} ms: {}",
        silent.status.label()
    );

    // The spoofing window: an attacker who waits for the level to reach
    // a*x - 1 can feed exactly this many weight-1 failures safely.
    println!("\nspoofing bound a*x - 1 - (a + 1) across configs:");
    for (a, x) in [(2i64, 10i64), (3, 12), (1, 3), (5, 20)] {
        let cfg = LotConfig {
            critical_level: a,
            initial_level: x,
            ..LotConfig::default()
        };
        let bound = max_safe_spoofs(&cfg);
        let mut st = LotState::init_at_level(&cfg, cfg.saturation() - 1).unwrap();
        let mut survived = 0;
        while st
            .on_parameter(ParameterKind::Informational, false, &cfg)
            .map(|u| u.status_after == LotStatus::Active)
            .unwrap_or(false)
        {
            survived += 1;
        }
        println!("  a={a:<2} x={x:<3} formula {bound:>3}, measured {survived:>3}");
    }
}
