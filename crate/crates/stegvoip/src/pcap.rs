//! Classic pcap reader/writer for raw-IP captures (linktype 101).
//!
//! Files are written little-endian with the microsecond magic 0xa1b2c3d4.
//! The reader also accepts big-endian files. Record timestamps are synthetic
//! (20 ms per packet, the default voice frame spacing) so that identical
//! packet sequences always produce byte-identical files.

use std::fs::File;
use std::io::{self, Read, Write};
use std::path::Path;

use thiserror::Error;

use crate::packet::{PacketError, VoicePacket};

pub const PCAP_MAGIC: u32 = 0xa1b2c3d4;
/// LINKTYPE_RAW: packets start at the IPv4 header.
pub const LINKTYPE_RAW: u32 = 101;
const SNAPLEN: u32 = 65535;
const PACKET_SPACING_US: u64 = 20_000;

#[derive(Debug, Error)]
pub enum PcapError {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
    #[error("not a classic pcap file (magic 0x{0:08x})")]
    BadMagic(u32),
    #[error("unsupported linktype {0}, expected raw IP (101)")]
    UnknownLinktype(u32),
    #[error("truncated pcap record")]
    TruncatedRecord,
    #[error("record {index}: {source}")]
    BadPacket { index: usize, source: PacketError },
}

/// Write packets to `path` as a raw-IP pcap capture.
pub fn pcap_write(path: impl AsRef<Path>, packets: &[VoicePacket]) -> Result<(), PcapError> {
    let mut file = File::create(path)?;
    pcap_write_to(&mut file, packets)
}

pub fn pcap_write_to(w: &mut impl Write, packets: &[VoicePacket]) -> Result<(), PcapError> {
    w.write_all(&PCAP_MAGIC.to_le_bytes())?;
    w.write_all(&2u16.to_le_bytes())?; // version major
    w.write_all(&4u16.to_le_bytes())?; // version minor
    w.write_all(&0i32.to_le_bytes())?; // thiszone
    w.write_all(&0u32.to_le_bytes())?; // sigfigs
    w.write_all(&SNAPLEN.to_le_bytes())?;
    w.write_all(&LINKTYPE_RAW.to_le_bytes())?;
    for (i, packet) in packets.iter().enumerate() {
        let ts = i as u64 * PACKET_SPACING_US;
        let wire = packet.serialize();
        w.write_all(&((ts / 1_000_000) as u32).to_le_bytes())?;
        w.write_all(&((ts % 1_000_000) as u32).to_le_bytes())?;
        w.write_all(&(wire.len() as u32).to_le_bytes())?;
        w.write_all(&(wire.len() as u32).to_le_bytes())?;
        w.write_all(&wire)?;
    }
    Ok(())
}

/// Read a raw-IP pcap capture back into packets.
pub fn pcap_read(path: impl AsRef<Path>) -> Result<Vec<VoicePacket>, PcapError> {
    let mut file = File::open(path)?;
    pcap_read_from(&mut file)
}

pub fn pcap_read_from(r: &mut impl Read) -> Result<Vec<VoicePacket>, PcapError> {
    let mut data = Vec::new();
    r.read_to_end(&mut data)?;
    if data.len() < 24 {
        return Err(PcapError::TruncatedRecord);
    }
    let magic_le = u32::from_le_bytes([data[0], data[1], data[2], data[3]]);
    let magic_be = u32::from_be_bytes([data[0], data[1], data[2], data[3]]);
    let big_endian = if magic_le == PCAP_MAGIC {
        false
    } else if magic_be == PCAP_MAGIC {
        true
    } else {
        return Err(PcapError::BadMagic(magic_le));
    };
    let read_u32 = |b: &[u8]| -> u32 {
        let arr = [b[0], b[1], b[2], b[3]];
        if big_endian {
            u32::from_be_bytes(arr)
        } else {
            u32::from_le_bytes(arr)
        }
    };
    let linktype = read_u32(&data[20..24]);
    if linktype != LINKTYPE_RAW {
        return Err(PcapError::UnknownLinktype(linktype));
    }
    let mut packets = Vec::new();
    let mut offset = 24;
    while offset < data.len() {
        if data.len() - offset < 16 {
            return Err(PcapError::TruncatedRecord);
        }
        let incl_len = read_u32(&data[offset + 8..offset + 12]) as usize;
        offset += 16;
        if data.len() - offset < incl_len {
            return Err(PcapError::TruncatedRecord);
        }
        let wire = &data[offset..offset + incl_len];
        offset += incl_len;
        let packet = VoicePacket::parse(wire).map_err(|source| PcapError::BadPacket {
            index: packets.len(),
            source,
        })?;
        packets.push(packet);
    }
    Ok(packets)
}
