//! The 6-bit covert control header and its placement inside IP/UDP/RTP
//! header fields.
//!
//! The header packs a 4-bit parameter code, a side flag and a continuity
//! flag. A [`CarrierMap`] names six header bit positions, one per packed
//! header bit; the map is a session secret shared out of band.

use thiserror::Error;

use crate::packet::{VoicePacket, IP_FLAG_RESERVED};

/// Which party's statistics a parameter describes, mirroring the RTCP
/// sender/receiver report split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Side {
    Receiver,
    Sender,
}

impl Side {
    pub fn bit(self) -> u8 {
        match self {
            Side::Receiver => 0,
            Side::Sender => 1,
        }
    }

    pub fn from_bit(bit: u8) -> Side {
        if bit & 1 == 1 {
            Side::Sender
        } else {
            Side::Receiver
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Side::Receiver => "receiver",
            Side::Sender => "sender",
        }
    }
}

/// The P/S/C control header carried covertly with every packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ControlHeader {
    /// 4-bit parameter code (P).
    pub code: u8,
    /// Report side (S): sender = 1, receiver = 0.
    pub side: Side,
    /// Continuity flag (C): true marks the first fragment of a parameter.
    pub start: bool,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CovertError {
    #[error("packed control header value {0} does not fit 6 bits")]
    ValueTooWide(u8),
    #[error("parameter code {0} does not fit 4 bits")]
    CodeTooWide(u8),
    #[error("carrier map invalid: {0:?}")]
    InvalidMap(Vec<MapViolation>),
}

impl ControlHeader {
    pub fn new(code: u8, side: Side, start: bool) -> Result<ControlHeader, CovertError> {
        if code > 0xF {
            return Err(CovertError::CodeTooWide(code));
        }
        Ok(ControlHeader { code, side, start })
    }

    /// Pack into 6 bits: code in bits 5..2, side in bit 1, continuity in bit 0.
    pub fn pack(&self) -> u8 {
        (self.code << 2) | (self.side.bit() << 1) | u8::from(self.start)
    }

    /// Inverse of [`ControlHeader::pack`]. Fails for values above 63.
    pub fn unpack(value: u8) -> Result<ControlHeader, CovertError> {
        if value > 0x3F {
            return Err(CovertError::ValueTooWide(value));
        }
        Ok(ControlHeader {
            code: value >> 2,
            side: Side::from_bit(value >> 1),
            start: value & 1 == 1,
        })
    }
}

/// Header fields a carrier slot can name. Only a subset is allowed for
/// embedding; the rest exist so misconfigured maps can be diagnosed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum CarrierField {
    IpTos,
    IpIdentification,
    /// The reserved bit of the IP flags field (1 bit wide).
    IpFlagsReserved,
    IpFragmentOffset,
    UdpChecksum,
    RtpPadding,
    // Recognized but disallowed as carriers: rewritten in transit or
    // load-bearing for parsing.
    IpTtl,
    IpChecksum,
    RtpMarker,
}

impl CarrierField {
    pub fn width(self) -> u8 {
        match self {
            CarrierField::IpTos | CarrierField::IpTtl => 8,
            CarrierField::IpIdentification
            | CarrierField::UdpChecksum
            | CarrierField::IpChecksum => 16,
            CarrierField::IpFlagsReserved | CarrierField::RtpPadding | CarrierField::RtpMarker => 1,
            CarrierField::IpFragmentOffset => 13,
        }
    }

    /// Fields the protocol may write control bits into.
    pub fn allowed(self) -> bool {
        matches!(
            self,
            CarrierField::IpTos
                | CarrierField::IpIdentification
                | CarrierField::IpFlagsReserved
                | CarrierField::IpFragmentOffset
                | CarrierField::UdpChecksum
                | CarrierField::RtpPadding
        )
    }

    pub fn layer(self) -> &'static str {
        match self {
            CarrierField::IpTos
            | CarrierField::IpIdentification
            | CarrierField::IpFlagsReserved
            | CarrierField::IpFragmentOffset
            | CarrierField::IpTtl
            | CarrierField::IpChecksum => "ip",
            CarrierField::UdpChecksum => "udp",
            CarrierField::RtpPadding | CarrierField::RtpMarker => "rtp",
        }
    }

    pub fn field_name(self) -> &'static str {
        match self {
            CarrierField::IpTos => "tos",
            CarrierField::IpIdentification => "identification",
            CarrierField::IpFlagsReserved => "flags_reserved",
            CarrierField::IpFragmentOffset => "fragment_offset",
            CarrierField::UdpChecksum => "checksum",
            CarrierField::RtpPadding => "padding",
            CarrierField::IpTtl => "ttl",
            CarrierField::IpChecksum => "checksum",
            CarrierField::RtpMarker => "marker",
        }
    }

    /// Resolve a `(layer, field)` pair from a scenario config.
    pub fn from_names(layer: &str, field: &str) -> Option<CarrierField> {
        match (layer, field) {
            ("ip", "tos") => Some(CarrierField::IpTos),
            ("ip", "identification") => Some(CarrierField::IpIdentification),
            ("ip", "flags_reserved") => Some(CarrierField::IpFlagsReserved),
            ("ip", "fragment_offset") => Some(CarrierField::IpFragmentOffset),
            ("ip", "ttl") => Some(CarrierField::IpTtl),
            ("ip", "checksum") => Some(CarrierField::IpChecksum),
            ("udp", "checksum") => Some(CarrierField::UdpChecksum),
            ("rtp", "padding") => Some(CarrierField::RtpPadding),
            ("rtp", "marker") => Some(CarrierField::RtpMarker),
            _ => None,
        }
    }

    fn get_bit(self, p: &VoicePacket, bit: u8) -> bool {
        match self {
            CarrierField::IpTos => p.ip.tos >> bit & 1 == 1,
            CarrierField::IpIdentification => p.ip.identification >> bit & 1 == 1,
            CarrierField::IpFlagsReserved => p.ip.flags & IP_FLAG_RESERVED != 0,
            CarrierField::IpFragmentOffset => p.ip.fragment_offset >> bit & 1 == 1,
            CarrierField::UdpChecksum => p.udp.checksum >> bit & 1 == 1,
            CarrierField::RtpPadding => p.rtp.padding,
            CarrierField::IpTtl => p.ip.ttl >> bit & 1 == 1,
            CarrierField::IpChecksum => p.ip.checksum >> bit & 1 == 1,
            CarrierField::RtpMarker => p.rtp.marker,
        }
    }

    fn set_bit(self, p: &mut VoicePacket, bit: u8, value: bool) {
        fn put16(word: &mut u16, bit: u8, value: bool) {
            *word = *word & !(1 << bit) | u16::from(value) << bit;
        }
        fn put8(byte: &mut u8, bit: u8, value: bool) {
            *byte = *byte & !(1 << bit) | u8::from(value) << bit;
        }
        match self {
            CarrierField::IpTos => put8(&mut p.ip.tos, bit, value),
            CarrierField::IpIdentification => put16(&mut p.ip.identification, bit, value),
            CarrierField::IpFlagsReserved => {
                put8(&mut p.ip.flags, 2, value);
            }
            CarrierField::IpFragmentOffset => put16(&mut p.ip.fragment_offset, bit, value),
            CarrierField::UdpChecksum => put16(&mut p.udp.checksum, bit, value),
            CarrierField::RtpPadding => p.rtp.padding = value,
            CarrierField::IpTtl => put8(&mut p.ip.ttl, bit, value),
            CarrierField::IpChecksum => put16(&mut p.ip.checksum, bit, value),
            CarrierField::RtpMarker => p.rtp.marker = value,
        }
    }
}

/// One bit position inside a carrier field; bit 0 is the least significant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CarrierSlot {
    pub field: CarrierField,
    pub bit: u8,
}

impl CarrierSlot {
    pub fn new(field: CarrierField, bit: u8) -> CarrierSlot {
        CarrierSlot { field, bit }
    }
}

/// Ordered assignment of the six packed control-header bits to carrier
/// slots: slot `i` carries packed bit `i`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CarrierMap {
    pub slots: Vec<CarrierSlot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MapViolation {
    WrongLength(usize),
    DuplicateSlot(CarrierSlot),
    DisallowedField(CarrierField),
    BitOutOfRange(CarrierSlot),
}

impl CarrierMap {
    pub fn new(slots: Vec<CarrierSlot>) -> CarrierMap {
        CarrierMap { slots }
    }

    /// The default session map: the six low bits of IP identification.
    /// A single-field map keeps worked examples easy to follow; scattered
    /// maps come from the scenario config.
    pub fn identification_low() -> CarrierMap {
        CarrierMap {
            slots: (0..6)
                .map(|bit| CarrierSlot::new(CarrierField::IpIdentification, bit))
                .collect(),
        }
    }

    /// A map spread over four header fields across all three layers.
    pub fn scattered() -> CarrierMap {
        CarrierMap {
            slots: vec![
                CarrierSlot::new(CarrierField::IpTos, 0),
                CarrierSlot::new(CarrierField::IpTos, 7),
                CarrierSlot::new(CarrierField::IpIdentification, 11),
                CarrierSlot::new(CarrierField::IpFragmentOffset, 5),
                CarrierSlot::new(CarrierField::UdpChecksum, 9),
                CarrierSlot::new(CarrierField::RtpPadding, 0),
            ],
        }
    }

    /// Check length, slot uniqueness, field policy and bit ranges.
    /// Returns every violation found rather than stopping at the first.
    pub fn validate(&self) -> Vec<MapViolation> {
        let mut violations = Vec::new();
        if self.slots.len() != 6 {
            violations.push(MapViolation::WrongLength(self.slots.len()));
        }
        let mut seen = Vec::new();
        for &slot in &self.slots {
            if seen.contains(&slot) {
                violations.push(MapViolation::DuplicateSlot(slot));
            }
            seen.push(slot);
            if !slot.field.allowed() {
                violations.push(MapViolation::DisallowedField(slot.field));
            }
            if slot.bit >= slot.field.width() {
                violations.push(MapViolation::BitOutOfRange(slot));
            }
        }
        violations
    }

    fn checked(&self) -> Result<(), CovertError> {
        let violations = self.validate();
        if violations.is_empty() {
            Ok(())
        } else {
            Err(CovertError::InvalidMap(violations))
        }
    }
}

/// Overwrite the map's carrier bits with the packed header and re-derive the
/// IP checksum. No other bit of the packet changes.
pub fn embed_control_bits(
    packet: &mut VoicePacket,
    header: ControlHeader,
    map: &CarrierMap,
) -> Result<(), CovertError> {
    map.checked()?;
    let packed = header.pack();
    for (i, slot) in map.slots.iter().enumerate() {
        slot.field.set_bit(packet, slot.bit, packed >> i & 1 == 1);
    }
    packet.refresh_ip_checksum();
    Ok(())
}

/// Read the map's carrier bits back into a control header. Any 6-bit value
/// unpacks; semantic validation of the code happens during reassembly.
pub fn extract_control_bits(
    packet: &VoicePacket,
    map: &CarrierMap,
) -> Result<ControlHeader, CovertError> {
    map.checked()?;
    let mut packed = 0u8;
    for (i, slot) in map.slots.iter().enumerate() {
        packed |= u8::from(slot.field.get_bit(packet, slot.bit)) << i;
    }
    ControlHeader::unpack(packed)
}

/// Per-packet covert capacity, in bits, of the IP header fields identified
/// in the covert-channel literature: TOS (8), identification (16), the
/// reserved flag (1), fragment offset (13, usable only under DF), TTL (8)
/// and the header checksum (16). The protocol itself embeds into a stricter
/// subset (see [`CarrierField::allowed`]); TTL and the checksum are counted
/// here but rejected as carriers because routers rewrite them.
pub fn ip_covert_capacity_bits(df_set: bool) -> u32 {
    let fields: &[(CarrierField, bool)] = &[
        (CarrierField::IpTos, false),
        (CarrierField::IpIdentification, false),
        (CarrierField::IpFlagsReserved, false),
        (CarrierField::IpFragmentOffset, true),
        (CarrierField::IpTtl, false),
        (CarrierField::IpChecksum, false),
    ];
    fields
        .iter()
        .filter(|(_, needs_df)| !needs_df || df_set)
        .map(|(f, _)| u32::from(f.width()))
        .sum()
}
