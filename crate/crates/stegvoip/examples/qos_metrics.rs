//! The QoS statistics the protocol transports: jitter, loss accounting,
//! extended sequence numbers and the last-report/delay pair.
//!
//!     cargo run --example qos_metrics

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stegvoip::covert::Side;
use stegvoip::metrics::{snapshot_parameters, ClockSnapshot, ReceptionStats};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut stats = ReceptionStats::new();

    // Feed a jittery, slightly lossy stream: 500 packets at nominally
    // 160 timestamp units (20 ms) apart, arrivals wobbling around that.
    let mut arrival: u64 = 0;
    let mut seq: u16 = 65_500; // crosses the wrap early on
    let mut ts: u32 = 0;
    let mut fed = 0;
    for _ in 0..500 {
        seq = seq.wrapping_add(1);
        ts = ts.wrapping_add(160);
        arrival += rng.random_range(130..=190);
        if rng.random_bool(0.04) {
            continue; // lost on the way
        }
        stats.update_on_packet(seq, ts, arrival);
        fed += 1;
    }

    println!("packets fed:        {fed}");
    println!("received (unique):  {}", stats.received_count());
    println!("expected:           {}", stats.expected());
    println!("cumulative lost:    {}", stats.cumulative_lost());
    println!(
        "ext highest seq:    {} (wrapped past 65535)",
        stats.extended_highest_seq()
    );
    println!("jitter (ts units):  {}", stats.jitter());

    // The loss fraction is an 8-bit fixed-point value per reporting
    // interval: 256 * lost / expected within the interval.
    println!(
        "\nfraction lost this interval: {}/256",
        stats.fraction_lost_interval()
    );

    // The peer's NTP timestamp parameter plays the sender-report role.
    let one_second_later = arrival + 8000;
    stats.on_sender_report(0x0000_1234_5678_9ABC, arrival);
    println!("\nafter a peer NTP timestamp:");
    println!("  lsr  (mid 32 bits): {:#010x}", stats.lsr());
    println!(
        "  dlsr (1/65536 s):   {} (~1 s)",
        stats.dlsr(one_second_later)
    );

    // A full snapshot emits every parameter of one report side.
    let clocks = ClockSnapshot {
        ntp_timestamp: 0x0000_2222_0000_0000,
        rtp_timestamp: ts,
        now_units: one_second_later,
    };
    println!("\nreceiver-report snapshot:");
    for p in snapshot_parameters(&mut stats, Side::Receiver, &clocks, 0) {
        println!("  {:<18} {:#x}", p.descriptor().name, p.value_u64());
    }
    println!("sender-report snapshot:");
    for p in snapshot_parameters(&mut stats, Side::Sender, &clocks, 500) {
        println!("  {:<18} {:#x}", p.descriptor().name, p.value_u64());
    }
}
