//! One parameter across several packets: a 32-bit interarrival-jitter
//! value at 10 watermark bits per packet needs exactly four packets.
//!
//!     cargo run --example fragmentation

use stegvoip::covert::Side;
use stegvoip::pdu::{
    codes, fragment_parameter, parameter_of_code, Parameter, ReassemblyBuffer, ReassemblyOutcome,
};

fn main() {
    let value = 0x0000_2A7Fu64;
    let param = Parameter::from_value(codes::JITTER, Side::Sender, value).unwrap();
    let capacity = 10;
    let fragments = fragment_parameter(&param, capacity).unwrap();

    println!(
        "parameter {} ({} bits), value {:#010x}, {} bits/packet:",
        param.descriptor().name,
        param.descriptor().width_bits,
        value,
        capacity
    );
    println!("packet  p     s  c  bits");
    for (i, f) in fragments.iter().enumerate() {
        let bits: String = f.bits.iter().map(|&b| if b { '1' } else { '0' }).collect();
        println!(
            "  {}     {:04b}  {}  {}  {bits}",
            i + 1,
            f.header.code,
            f.header.side.bit(),
            u8::from(f.header.start),
        );
    }

    // The receiver collects fragments in a per-side buffer and announces
    // completion once the full width has arrived.
    let mut buf = ReassemblyBuffer::new();
    for (i, f) in fragments.iter().enumerate() {
        match buf.push(f.header, &f.bits) {
            ReassemblyOutcome::Collecting { accumulated } => {
                println!("after packet {}: {accumulated}/32 bits", i + 1);
            }
            ReassemblyOutcome::Complete(p) => {
                println!(
                    "after packet {}: complete, value {:#010x}",
                    i + 1,
                    p.value_u64()
                );
                assert_eq!(p, param);
            }
            ReassemblyOutcome::Error(e) => println!("error: {e}"),
        }
    }

    // A lost fragment leaves the parameter incomplete; a fresh start
    // discards the remains, so no wrong value is ever produced.
    println!("\nreplaying with packet 2 lost:");
    let mut buf = ReassemblyBuffer::new();
    for (i, f) in fragments.iter().enumerate() {
        if i == 1 {
            println!("  packet 2 lost in transit");
            continue;
        }
        match buf.push(f.header, &f.bits) {
            ReassemblyOutcome::Collecting { accumulated } => {
                println!("  after packet {}: {accumulated}/32 bits", i + 1)
            }
            ReassemblyOutcome::Complete(_) => unreachable!("cannot complete"),
            ReassemblyOutcome::Error(e) => println!("  error: {e}"),
        }
    }
    println!("  still incomplete: {}", buf.in_progress());

    // Fragment counts for every assigned code at this capacity.
    println!("\npackets needed at {capacity} bits/packet:");
    for code in [
        codes::VOICE_AUTH,
        codes::JITTER,
        codes::CUMULATIVE_LOST,
        codes::FRACTION_LOST,
        codes::NTP_TIMESTAMP,
    ] {
        let d = parameter_of_code(code).unwrap();
        println!(
            "  {:<20} {:>2} bits -> {} packets",
            d.name,
            d.width_bits,
            d.width_bits.div_ceil(capacity)
        );
    }
}
