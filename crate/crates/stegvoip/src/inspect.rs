//! Recover covert content from a capture: the informed-receiver view.
//!
//! Given the session's carrier map and watermark codec, inspection replays
//! exactly what a receiving endpoint does (extract control bits, extract
//! watermark bits, reassemble per stream and per report side) over the
//! packets of a capture. Streams are told apart by RTP SSRC, so a
//! bidirectional capture demultiplexes cleanly.

use std::collections::BTreeMap;

use crate::covert::{extract_control_bits, CarrierMap, ControlHeader, CovertError, Side};
use crate::metrics::ReceptionStats;
use crate::packet::VoicePacket;
use crate::pdu::{Parameter, ReassemblyBuffer, ReassemblyOutcome};
use crate::watermark::{extract_bits, WatermarkCodec};

/// One packet's extracted control header.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InspectedPacket {
    pub index: usize,
    pub ssrc: u32,
    pub seq: u16,
    pub header: ControlHeader,
    /// False for packets skipped as duplicates of an earlier sequence.
    pub fresh: bool,
}

/// One parameter reassembled out of a stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InspectedParameter {
    pub ssrc: u32,
    /// Capture index of the packet that completed it.
    pub packet_index: usize,
    pub code: u8,
    pub side: Side,
    pub value: u64,
}

#[derive(Debug, Clone, Default)]
pub struct Inspection {
    pub packets: Vec<InspectedPacket>,
    pub parameters: Vec<InspectedParameter>,
    /// Reassembly complaints, (packet index, description).
    pub errors: Vec<(usize, String)>,
}

impl Inspection {
    /// Parameters of one stream in completion order.
    pub fn parameters_for(&self, ssrc: u32) -> impl Iterator<Item = &InspectedParameter> {
        self.parameters.iter().filter(move |p| p.ssrc == ssrc)
    }
}

#[derive(Default)]
struct StreamState {
    stats: ReceptionStats,
    sender_buf: ReassemblyBuffer,
    receiver_buf: ReassemblyBuffer,
}

/// Walk a capture with the session secrets and pull out everything the
/// covert channel carried. With the wrong map this still "works": it
/// yields garbled headers and mostly unassigned codes, which is the point
/// of keeping the map secret.
pub fn inspect_packets(
    packets: &[VoicePacket],
    map: &CarrierMap,
    codec: &WatermarkCodec,
) -> Result<Inspection, CovertError> {
    let mut out = Inspection::default();
    let mut streams: BTreeMap<u32, StreamState> = BTreeMap::new();
    for (index, packet) in packets.iter().enumerate() {
        let ssrc = packet.rtp.ssrc;
        let state = streams.entry(ssrc).or_default();
        // Same dedupe rule as a live receiver: one shot per extended
        // sequence number. Arrival time is irrelevant here.
        let fresh = state.stats.update_on_packet(
            packet.rtp.sequence_number,
            packet.rtp.timestamp,
            index as u64,
        );
        let header = extract_control_bits(packet, map)?;
        out.packets.push(InspectedPacket {
            index,
            ssrc,
            seq: packet.rtp.sequence_number,
            header,
            fresh,
        });
        if !fresh {
            continue;
        }
        let buf = match header.side {
            Side::Sender => &mut state.sender_buf,
            Side::Receiver => &mut state.receiver_buf,
        };
        let expected = buf.expected_fragment_len(&header, codec.capacity_bits_per_packet);
        let bits = match extract_bits(&packet.payload, expected, codec) {
            Ok(bits) => bits,
            Err(e) => {
                out.errors.push((index, e.to_string()));
                continue;
            }
        };
        match buf.push(header, &bits) {
            ReassemblyOutcome::Collecting { .. } => {}
            ReassemblyOutcome::Error(e) => out.errors.push((index, e.to_string())),
            ReassemblyOutcome::Complete(param) => {
                let Parameter { code, side, .. } = param;
                out.parameters.push(InspectedParameter {
                    ssrc,
                    packet_index: index,
                    code,
                    side,
                    value: param.value_u64(),
                });
            }
        }
    }
    Ok(out)
}
