//! The covert control channel: pack the 6-bit header and hide it inside
//! IP/UDP/RTP header fields according to a session carrier map.
//!
//!     cargo run --example covert_channel

use stegvoip::covert::{
    embed_control_bits, extract_control_bits, ip_covert_capacity_bits, CarrierMap, ControlHeader,
    Side,
};
use stegvoip::packet::{build_packet, StreamConfig};

fn main() {
    // A control header: parameter code 0100 (interarrival jitter), sender
    // report, first fragment of a new parameter.
    let header = ControlHeader::new(0b0100, Side::Sender, true).unwrap();
    println!(
        "control header: p={:04b} s={} c={}",
        header.code,
        header.side.bit(),
        u8::from(header.start)
    );
    println!(
        "packed 6-bit value: {:#08b} ({})",
        header.pack(),
        header.pack()
    );

    // Hide it in a voice packet using the default map: the six low bits of
    // the IP identification field.
    let map = CarrierMap::identification_low();
    let mut packet = build_packet(0, 0, &[0u8; 20], &StreamConfig::default()).unwrap();
    packet.ip.identification = 0xAB00;
    packet.refresh();
    println!("\nidentification before: {:#06x}", packet.ip.identification);
    embed_control_bits(&mut packet, header, &map).unwrap();
    println!("identification after:  {:#06x}", packet.ip.identification);
    println!("checksum still valid:  {}", packet.ip.checksum_ok());

    let recovered = extract_control_bits(&packet, &map).unwrap();
    assert_eq!(recovered, header);
    println!(
        "recovered header matches: p={:04b} s={} c={}",
        recovered.code,
        recovered.side.bit(),
        u8::from(recovered.start)
    );

    // A scattered map spreads the six bits over three protocol layers.
    let scattered = CarrierMap::scattered();
    println!("\nscattered map slots:");
    for (i, slot) in scattered.slots.iter().enumerate() {
        println!(
            "  packed bit {i} -> {}.{} bit {}",
            slot.field.layer(),
            slot.field.field_name(),
            slot.bit
        );
    }
    let mut packet2 = build_packet(1, 160, &[0u8; 20], &StreamConfig::default()).unwrap();
    embed_control_bits(&mut packet2, header, &scattered).unwrap();
    assert_eq!(extract_control_bits(&packet2, &scattered).unwrap(), header);
    println!("scattered map round-trips too");

    // Maps are validated: wrong length, duplicates, disallowed fields.
    let mut broken = CarrierMap::identification_low();
    broken.slots.pop();
    println!("\nvalidating a five-slot map: {:?}", broken.validate());

    println!(
        "\nIP header covert capacity: {} bits with DF set, {} without",
        ip_covert_capacity_bits(true),
        ip_covert_capacity_bits(false)
    );
}
