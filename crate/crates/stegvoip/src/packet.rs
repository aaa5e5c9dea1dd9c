//! Bit-exact in-memory model and wire serialization of the IPv4/UDP/RTP
//! packets that carry a voice call.
//!
//! Only the shape used by the simulator is supported: IPv4 without options
//! (IHL = 5) and a fixed 12-byte RTP header (no CSRC list, no extensions).
//! The UDP checksum is left at 0 ("not computed", legal over IPv4) so that
//! covert mutation of IP fields never forces a UDP checksum update.

use std::net::Ipv4Addr;

use thiserror::Error;

/// IPv4 header length in bytes (IHL = 5, no options).
pub const IPV4_HEADER_LEN: usize = 20;
/// UDP header length in bytes.
pub const UDP_HEADER_LEN: usize = 8;
/// Fixed RTP header length in bytes (CC = 0, no extension).
pub const RTP_HEADER_LEN: usize = 12;
/// Total header bytes above the voice payload.
pub const HEADERS_LEN: usize = IPV4_HEADER_LEN + UDP_HEADER_LEN + RTP_HEADER_LEN;
/// Largest voice payload accepted by the builder.
pub const MAX_PAYLOAD: usize = 1400;

/// IPv4 "don't fragment" flag within the 3-bit flags field (LSB = MF).
pub const IP_FLAG_DF: u8 = 0b010;
/// IPv4 reserved flag bit (the MSB of the 3-bit flags field).
pub const IP_FLAG_RESERVED: u8 = 0b100;

pub const PROTOCOL_UDP: u8 = 17;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PacketError {
    #[error("voice payload of {0} bytes exceeds the {MAX_PAYLOAD}-byte limit")]
    PayloadTooLarge(usize),
    #[error("truncated input: {0} bytes, need at least {HEADERS_LEN}")]
    Truncated(usize),
    #[error("bad IP version {0}, expected 4")]
    BadIpVersion(u8),
    #[error("unsupported IHL {0}, only option-less headers (IHL 5) are handled")]
    UnsupportedIhl(u8),
    #[error("bad RTP version {0}, expected 2")]
    BadRtpVersion(u8),
    #[error("IP total length {total} disagrees with buffer of {actual} bytes")]
    LengthMismatch { total: u16, actual: usize },
}

/// IPv4 header, version 4 / IHL 5 implied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ipv4Header {
    pub tos: u8,
    pub total_length: u16,
    pub identification: u16,
    /// 3-bit flags value; bit 2 is the reserved bit, bit 1 DF, bit 0 MF.
    pub flags: u8,
    /// 13-bit fragment offset.
    pub fragment_offset: u16,
    pub ttl: u8,
    pub protocol: u8,
    pub checksum: u16,
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
}

impl Ipv4Header {
    /// Serialize the 20 header bytes with the stored checksum.
    pub fn to_bytes(&self) -> [u8; IPV4_HEADER_LEN] {
        let mut b = [0u8; IPV4_HEADER_LEN];
        b[0] = 0x45; // version 4, IHL 5
        b[1] = self.tos;
        b[2..4].copy_from_slice(&self.total_length.to_be_bytes());
        b[4..6].copy_from_slice(&self.identification.to_be_bytes());
        let frag_word = ((self.flags as u16 & 0x7) << 13) | (self.fragment_offset & 0x1FFF);
        b[6..8].copy_from_slice(&frag_word.to_be_bytes());
        b[8] = self.ttl;
        b[9] = self.protocol;
        b[10..12].copy_from_slice(&self.checksum.to_be_bytes());
        b[12..16].copy_from_slice(&self.src.octets());
        b[16..20].copy_from_slice(&self.dst.octets());
        b
    }

    /// Recompute the header checksum from the current field values.
    pub fn compute_checksum(&self) -> u16 {
        let mut bytes = self.to_bytes();
        bytes[10] = 0;
        bytes[11] = 0;
        ones_complement_checksum(&bytes)
    }

    /// True when the stored checksum matches the other header fields.
    pub fn checksum_ok(&self) -> bool {
        self.checksum == self.compute_checksum()
    }
}

/// Ones'-complement checksum over 16-bit big-endian words (RFC 791 style).
pub fn ones_complement_checksum(bytes: &[u8]) -> u16 {
    let mut sum = 0u32;
    let mut chunks = bytes.chunks_exact(2);
    for word in &mut chunks {
        sum += u32::from(u16::from_be_bytes([word[0], word[1]]));
    }
    if let [last] = chunks.remainder() {
        sum += u32::from(u16::from_be_bytes([*last, 0]));
    }
    while sum > 0xFFFF {
        sum = (sum & 0xFFFF) + (sum >> 16);
    }
    !(sum as u16)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UdpHeader {
    pub src_port: u16,
    pub dst_port: u16,
    pub length: u16,
    /// 0 means "not computed" (allowed over IPv4).
    pub checksum: u16,
}

/// RTP fixed header, version 2 / CC 0 / no extension implied.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RtpHeader {
    pub padding: bool,
    pub marker: bool,
    /// 7-bit payload type.
    pub payload_type: u8,
    pub sequence_number: u16,
    pub timestamp: u32,
    pub ssrc: u32,
}

/// One voice packet: IPv4 + UDP + RTP headers and the voice frame.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoicePacket {
    pub ip: Ipv4Header,
    pub udp: UdpHeader,
    pub rtp: RtpHeader,
    pub payload: Vec<u8>,
}

/// Per-direction stream parameters used by the packet builder.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamConfig {
    pub src: Ipv4Addr,
    pub dst: Ipv4Addr,
    pub src_port: u16,
    pub dst_port: u16,
    pub ssrc: u32,
    pub payload_type: u8,
    pub ttl: u8,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            src: Ipv4Addr::new(10, 0, 0, 1),
            dst: Ipv4Addr::new(10, 0, 0, 2),
            src_port: 5004,
            dst_port: 5004,
            ssrc: 0x1111_1111,
            payload_type: 0, // PCMU, 8 kHz
            ttl: 64,
        }
    }
}

/// Build a consistent packet: all length fields derived, checksum valid,
/// DF set, identification seeded from the sequence number.
pub fn build_packet(
    seq: u16,
    timestamp: u32,
    payload: &[u8],
    stream: &StreamConfig,
) -> Result<VoicePacket, PacketError> {
    if payload.len() > MAX_PAYLOAD {
        return Err(PacketError::PayloadTooLarge(payload.len()));
    }
    let mut packet = VoicePacket {
        ip: Ipv4Header {
            tos: 0,
            total_length: 0,
            identification: seq,
            flags: IP_FLAG_DF,
            fragment_offset: 0,
            ttl: stream.ttl,
            protocol: PROTOCOL_UDP,
            checksum: 0,
            src: stream.src,
            dst: stream.dst,
        },
        udp: UdpHeader {
            src_port: stream.src_port,
            dst_port: stream.dst_port,
            length: 0,
            checksum: 0,
        },
        rtp: RtpHeader {
            padding: false,
            marker: false,
            payload_type: stream.payload_type & 0x7F,
            sequence_number: seq,
            timestamp,
            ssrc: stream.ssrc,
        },
        payload: payload.to_vec(),
    };
    packet.refresh();
    Ok(packet)
}

impl VoicePacket {
    /// Re-derive the length fields and the IP checksum after any mutation.
    pub fn refresh(&mut self) {
        self.ip.total_length = (HEADERS_LEN + self.payload.len()) as u16;
        self.udp.length = (UDP_HEADER_LEN + RTP_HEADER_LEN + self.payload.len()) as u16;
        self.ip.checksum = self.ip.compute_checksum();
    }

    /// Recompute only the IP checksum, leaving every other field untouched.
    pub fn refresh_ip_checksum(&mut self) {
        self.ip.checksum = self.ip.compute_checksum();
    }

    /// Serialize to network byte order. Stored field values are written
    /// verbatim; call [`VoicePacket::refresh`] first if fields were mutated.
    pub fn serialize(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(HEADERS_LEN + self.payload.len());
        out.extend_from_slice(&self.ip.to_bytes());
        out.extend_from_slice(&self.udp.src_port.to_be_bytes());
        out.extend_from_slice(&self.udp.dst_port.to_be_bytes());
        out.extend_from_slice(&self.udp.length.to_be_bytes());
        out.extend_from_slice(&self.udp.checksum.to_be_bytes());
        let b0 = 0x80 | u8::from(self.rtp.padding) << 5;
        out.push(b0);
        out.push(u8::from(self.rtp.marker) << 7 | (self.rtp.payload_type & 0x7F));
        out.extend_from_slice(&self.rtp.sequence_number.to_be_bytes());
        out.extend_from_slice(&self.rtp.timestamp.to_be_bytes());
        out.extend_from_slice(&self.rtp.ssrc.to_be_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Inverse of [`VoicePacket::serialize`]. A wrong IP checksum is not an
    /// error: it stays in the parsed header and shows up via
    /// [`Ipv4Header::checksum_ok`], which tamper scenarios rely on.
    pub fn parse(bytes: &[u8]) -> Result<VoicePacket, PacketError> {
        if bytes.len() < HEADERS_LEN {
            return Err(PacketError::Truncated(bytes.len()));
        }
        let version = bytes[0] >> 4;
        if version != 4 {
            return Err(PacketError::BadIpVersion(version));
        }
        let ihl = bytes[0] & 0x0F;
        if ihl != 5 {
            return Err(PacketError::UnsupportedIhl(ihl));
        }
        let total_length = u16::from_be_bytes([bytes[2], bytes[3]]);
        if usize::from(total_length) != bytes.len() {
            return Err(PacketError::LengthMismatch {
                total: total_length,
                actual: bytes.len(),
            });
        }
        let frag_word = u16::from_be_bytes([bytes[6], bytes[7]]);
        let ip = Ipv4Header {
            tos: bytes[1],
            total_length,
            identification: u16::from_be_bytes([bytes[4], bytes[5]]),
            flags: (frag_word >> 13) as u8,
            fragment_offset: frag_word & 0x1FFF,
            ttl: bytes[8],
            protocol: bytes[9],
            checksum: u16::from_be_bytes([bytes[10], bytes[11]]),
            src: Ipv4Addr::new(bytes[12], bytes[13], bytes[14], bytes[15]),
            dst: Ipv4Addr::new(bytes[16], bytes[17], bytes[18], bytes[19]),
        };
        let u = &bytes[IPV4_HEADER_LEN..];
        let udp = UdpHeader {
            src_port: u16::from_be_bytes([u[0], u[1]]),
            dst_port: u16::from_be_bytes([u[2], u[3]]),
            length: u16::from_be_bytes([u[4], u[5]]),
            checksum: u16::from_be_bytes([u[6], u[7]]),
        };
        let r = &bytes[IPV4_HEADER_LEN + UDP_HEADER_LEN..];
        let rtp_version = r[0] >> 6;
        if rtp_version != 2 {
            return Err(PacketError::BadRtpVersion(rtp_version));
        }
        let rtp = RtpHeader {
            padding: r[0] & 0x20 != 0,
            marker: r[1] & 0x80 != 0,
            payload_type: r[1] & 0x7F,
            sequence_number: u16::from_be_bytes([r[2], r[3]]),
            timestamp: u32::from_be_bytes([r[4], r[5], r[6], r[7]]),
            ssrc: u32::from_be_bytes([r[8], r[9], r[10], r[11]]),
        };
        Ok(VoicePacket {
            ip,
            udp,
            rtp,
            payload: bytes[HEADERS_LEN..].to_vec(),
        })
    }
}
