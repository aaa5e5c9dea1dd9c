//! On-path attacker models applied between sender and receiver.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::covert::CarrierField;
use crate::packet::VoicePacket;

#[derive(Debug, Error, PartialEq)]
pub enum AttackerError {
    #[error("attack rate {0} outside [0, 1]")]
    BadRate(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AttackerKind {
    #[default]
    None,
    /// Normalize every header field that could smuggle covert bits.
    HeaderScrub,
    /// Invert the watermark bit plane of the voice payload.
    ParamTamper,
    PacketDrop,
    /// Deliver the packet and an immediate duplicate.
    Replay,
}

impl AttackerKind {
    pub fn label(self) -> &'static str {
        match self {
            AttackerKind::None => "none",
            AttackerKind::HeaderScrub => "header_scrub",
            AttackerKind::ParamTamper => "param_tamper",
            AttackerKind::PacketDrop => "packet_drop",
            AttackerKind::Replay => "replay",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackerModel {
    pub kind: AttackerKind,
    /// Per-packet probability that the attack applies.
    pub rate: f64,
    /// ParamTamper only: touch only packets carrying security fragments.
    /// Models an attacker with knowledge of the parameter schedule.
    pub security_only: bool,
    pub seed: u64,
}

impl Default for AttackerModel {
    fn default() -> Self {
        AttackerModel {
            kind: AttackerKind::None,
            rate: 1.0,
            security_only: false,
            seed: 0,
        }
    }
}

/// What the simulator knows about a packet when the attacker sees it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PacketMeta {
    pub carries_security: bool,
}

/// Result of pushing one packet through the attacker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttackOutcome {
    Pass(VoicePacket),
    Dropped,
    /// Original plus one duplicate, delivered back to back.
    Replayed(VoicePacket),
}

impl AttackerModel {
    pub fn validate(&self) -> Result<(), AttackerError> {
        if !(0.0..=1.0).contains(&self.rate) {
            return Err(AttackerError::BadRate(self.rate));
        }
        Ok(())
    }

    /// Apply the model to a packet in transit; `None` stays `None` (the
    /// channel already lost the packet). Deterministic for a given rng.
    pub fn apply(
        &self,
        packet: Option<VoicePacket>,
        meta: &PacketMeta,
        rng: &mut ChaCha8Rng,
    ) -> Option<AttackOutcome> {
        let packet = packet?;
        if self.kind == AttackerKind::None {
            return Some(AttackOutcome::Pass(packet));
        }
        // Draw before filtering so rng consumption does not depend on
        // packet content.
        let applies = rng.random_bool(self.rate);
        if !applies {
            return Some(AttackOutcome::Pass(packet));
        }
        match self.kind {
            AttackerKind::None => Some(AttackOutcome::Pass(packet)),
            AttackerKind::PacketDrop => Some(AttackOutcome::Dropped),
            AttackerKind::Replay => Some(AttackOutcome::Replayed(packet)),
            AttackerKind::HeaderScrub => {
                let mut p = packet;
                scrub_carrier_fields(&mut p);
                Some(AttackOutcome::Pass(p))
            }
            AttackerKind::ParamTamper => {
                if self.security_only && !meta.carries_security {
                    return Some(AttackOutcome::Pass(packet));
                }
                let mut p = packet;
                for byte in &mut p.payload {
                    *byte ^= 1;
                }
                Some(AttackOutcome::Pass(p))
            }
        }
    }
}

/// Zero every field the covert channel could use. The attacker does not
/// know the session's carrier map, so it normalizes the whole candidate
/// set and re-forges the IP checksum, the way a sanitizing middlebox would.
fn scrub_carrier_fields(p: &mut VoicePacket) {
    debug_assert!(CarrierField::IpTos.allowed());
    p.ip.tos = 0;
    p.ip.identification = 0;
    p.ip.flags &= 0b011; // clear the reserved bit
    p.ip.fragment_offset = 0;
    p.udp.checksum = 0;
    p.rtp.padding = false;
    p.refresh_ip_checksum();
}
