//! Session report: everything a scenario run produced, plus its rendering
//! as line-delimited records. Two runs with the same configuration must
//! produce byte-identical text.

use std::fmt::Write as _;

use crate::covert::Side;
use crate::lot::LotStatus;
use crate::packet::VoicePacket;
use crate::pdu::ParameterKind;

use super::{Direction, EndpointId};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Disposition {
    Delivered { deliver_slot: u32 },
    DroppedChannel,
    DroppedAttacker,
}

impl Disposition {
    pub fn label(self) -> &'static str {
        match self {
            Disposition::Delivered { .. } => "delivered",
            Disposition::DroppedChannel => "dropped_channel",
            Disposition::DroppedAttacker => "dropped_attacker",
        }
    }
}

/// One on-wire packet, as sent. Replay duplicates get their own record
/// flagged `replay`; those are attacker products, not sent packets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PacketRecord {
    pub slot: u32,
    pub dir: Direction,
    pub seq: u16,
    pub replay: bool,
    pub disposition: Disposition,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SentParameter {
    pub dir: Direction,
    pub index: usize,
    pub slot: u32,
    pub code: u8,
    pub side: Side,
    pub kind: ParameterKind,
    pub value: u64,
    /// All fragments left the sender before the session ended.
    pub fully_sent: bool,
    /// Filled after the run by order-preserving matching against the
    /// receiver's completions.
    pub delivered: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReceivedParameter {
    pub dir: Direction,
    pub index: usize,
    pub slot: u32,
    pub code: u8,
    pub side: Side,
    pub kind: ParameterKind,
    pub value: u64,
    /// `None` for informational parameters, which complete without a check.
    pub verification: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LotRecord {
    pub side: EndpointId,
    pub slot: u32,
    /// Parameter kind label, or "timeout" for a timer expiry.
    pub cause: &'static str,
    pub verified: bool,
    pub level: i64,
    pub status: LotStatus,
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProtocolEvent {
    pub slot: u32,
    pub dir: Direction,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TerminalRecord {
    pub side: EndpointId,
    pub status: LotStatus,
    pub level: i64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QosRecord {
    pub side: EndpointId,
    pub jitter: u32,
    pub expected: u64,
    pub received: u64,
    pub cumulative_lost: u32,
    pub ext_highest_seq: u32,
    pub lsr: u32,
    pub dlsr: u32,
}

#[derive(Debug, Clone, Default)]
pub struct SessionReport {
    pub config_line: String,
    pub packets: Vec<PacketRecord>,
    pub sent_parameters: Vec<SentParameter>,
    pub received_parameters: Vec<ReceivedParameter>,
    pub lot_events: Vec<LotRecord>,
    pub protocol_events: Vec<ProtocolEvent>,
    pub qos: Vec<QosRecord>,
    pub terminal: Vec<TerminalRecord>,
    pub end_slot: u32,
    /// Wire packets as the receivers saw them, in arrival order. This is
    /// the receiver-side capture: what `pcap` output and `inspect` work on.
    pub delivered_packets: Vec<VoicePacket>,
}

impl SessionReport {
    /// Sent parameters of one direction in transmission order.
    pub fn sent_for(&self, dir: Direction) -> impl Iterator<Item = &SentParameter> {
        self.sent_parameters.iter().filter(move |p| p.dir == dir)
    }

    /// Completed parameters of one direction in completion order.
    pub fn received_for(&self, dir: Direction) -> impl Iterator<Item = &ReceivedParameter> {
        self.received_parameters
            .iter()
            .filter(move |p| p.dir == dir)
    }

    pub fn terminal_for(&self, side: EndpointId) -> Option<&TerminalRecord> {
        self.terminal.iter().find(|t| t.side == side)
    }

    /// Line-delimited machine-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str("stegvoip-report v1\n");
        let _ = writeln!(out, "config {}", self.config_line);
        for p in &self.packets {
            let _ = write!(
                out,
                "packet slot={} dir={} seq={} replay={} disposition={}",
                p.slot,
                p.dir.label(),
                p.seq,
                u8::from(p.replay),
                p.disposition.label()
            );
            if let Disposition::Delivered { deliver_slot } = p.disposition {
                let _ = write!(out, " deliver_slot={deliver_slot}");
            }
            out.push('\n');
        }
        for s in &self.sent_parameters {
            let _ = writeln!(
                out,
                "param-sent dir={} idx={} slot={} code={:04b} side={} kind={} value={:016x} fully_sent={} delivered={}",
                s.dir.label(),
                s.index,
                s.slot,
                s.code,
                s.side.label(),
                s.kind.label(),
                s.value,
                u8::from(s.fully_sent),
                u8::from(s.delivered),
            );
        }
        for r in &self.received_parameters {
            let verification = match r.verification {
                None => "-",
                Some(true) => "verified",
                Some(false) => "failed",
            };
            let _ = writeln!(
                out,
                "param-received dir={} idx={} slot={} code={:04b} side={} kind={} value={:016x} verification={}",
                r.dir.label(),
                r.index,
                r.slot,
                r.code,
                r.side.label(),
                r.kind.label(),
                r.value,
                verification,
            );
        }
        for l in &self.lot_events {
            let _ = writeln!(
                out,
                "lot side={} slot={} cause={} verified={} level={} status={} saturated={}",
                l.side.label(),
                l.slot,
                l.cause,
                u8::from(l.verified),
                l.level,
                l.status.label(),
                u8::from(l.saturated),
            );
        }
        for e in &self.protocol_events {
            let _ = writeln!(
                out,
                "event slot={} dir={} detail={:?}",
                e.slot,
                e.dir.label(),
                e.detail
            );
        }
        for q in &self.qos {
            let _ = writeln!(
                out,
                "qos side={} jitter={} expected={} received={} cumulative_lost={} ext_highest_seq={} lsr={} dlsr={}",
                q.side.label(),
                q.jitter,
                q.expected,
                q.received,
                q.cumulative_lost,
                q.ext_highest_seq,
                q.lsr,
                q.dlsr,
            );
        }
        for t in &self.terminal {
            let _ = writeln!(
                out,
                "terminal side={} status={} level={}",
                t.side.label(),
                t.status.label(),
                t.level
            );
        }
        let _ = writeln!(out, "end slot={}", self.end_slot);
        out
    }

    /// Short human-readable summary for the CLI.
    pub fn summary(&self) -> String {
        let mut out = String::new();
        let sent = self.packets.iter().filter(|p| !p.replay).count();
        let delivered = self
            .packets
            .iter()
            .filter(|p| !p.replay && matches!(p.disposition, Disposition::Delivered { .. }))
            .count();
        let _ = writeln!(out, "packets sent: {sent}, delivered: {delivered}");
        let _ = writeln!(
            out,
            "parameters sent: {}, completed: {}, verified: {}, failed: {}",
            self.sent_parameters.len(),
            self.received_parameters.len(),
            self.received_parameters
                .iter()
                .filter(|r| r.verification == Some(true))
                .count(),
            self.received_parameters
                .iter()
                .filter(|r| r.verification == Some(false))
                .count(),
        );
        for t in &self.terminal {
            let _ = writeln!(
                out,
                "endpoint {}: {} (level {})",
                t.side.label(),
                t.status.label(),
                t.level
            );
        }
        let _ = writeln!(out, "ended at slot {}", self.end_slot);
        out
    }
}
