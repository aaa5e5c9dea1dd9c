//! Scenario configuration files.
//!
//! A scenario is a TOML document with sections mirroring the session
//! structure. Every field has a default, so a minimal file can be empty.
//! Example:
//!
//! ```toml
//! [session]
//! seed = 42
//! duration_packets = 2000
//! chain_length = 4
//! voice_auth_cadence = 8
//! schedule = ["jitter", "fraction_lost", "cumulative_lost"]
//!
//! [watermark]
//! scheme = "lsb"
//! capacity_bits_per_packet = 10
//!
//! [channel]
//! packet_loss_prob = 0.0
//! watermark_bitflip_prob = 0.0
//! reorder_window = 0
//! rng_seed = 0
//!
//! [lot]
//! critical_level = 2
//! initial_level = 10
//! timer_limit_ms = 3000
//!
//! [security]
//! user_id_a = "alice@example.net"
//! user_id_b = "bob@example.net"
//! voice_pattern = "seeded"        # "identity", "seeded", or 32 indices
//! chain_pattern = "seeded"
//!
//! [carrier_map]
//! preset = "identification_low"   # or "scattered", or explicit slots:
//! # slots = [{ layer = "ip", field = "identification", bit = 0 }, ...]
//!
//! [attacker]
//! kind = "none"                   # header_scrub|param_tamper|packet_drop|replay
//! rate = 1.0
//! ```

use std::net::Ipv4Addr;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;
use thiserror::Error;

use crate::covert::{CarrierField, CarrierMap, CarrierSlot};
use crate::lot::{LotConfig, LotWeights};
use crate::packet::StreamConfig;
use crate::pdu::code_by_name;
use crate::security::{BitSelectionPattern, SecurityError};
use crate::sim::{AttackerKind, AttackerModel, SessionConfig, SimError};
use crate::watermark::{ChannelModel, WatermarkCodec, WatermarkScheme};

const VOICE_PATTERN_TAG: u64 = 0x76;
const CHAIN_PATTERN_TAG: u64 = 0x63;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config: {0}")]
    Io(#[from] std::io::Error),
    #[error("config parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("unknown watermark scheme {0:?}, expected \"lsb\" or \"null\"")]
    UnknownScheme(String),
    #[error("unknown carrier map preset {0:?}")]
    UnknownPreset(String),
    #[error("unknown carrier field {layer:?}.{field:?}")]
    UnknownField { layer: String, field: String },
    #[error("unknown attacker kind {0:?}")]
    UnknownAttacker(String),
    #[error("unknown parameter name {0:?}")]
    UnknownParameter(String),
    #[error("unknown pattern preset {0:?}, expected \"identity\" or \"seeded\"")]
    UnknownPattern(String),
    #[error("invalid address {0:?}")]
    BadAddress(String),
    #[error(transparent)]
    Pattern(#[from] SecurityError),
    #[error("invalid session: {0}")]
    Session(#[from] SimError),
}

/// A parsed and validated scenario: the session plus its attacker.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub session: SessionConfig,
    pub attacker: AttackerModel,
}

impl Scenario {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Scenario, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Scenario::from_str(&text)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn from_str(text: &str) -> Result<Scenario, ConfigError> {
        let file: ScenarioFile = toml::from_str(text)?;
        file.build()
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default)]
    session: SessionSection,
    #[serde(default)]
    watermark: WatermarkSection,
    #[serde(default)]
    channel: ChannelSection,
    #[serde(default)]
    lot: LotSection,
    #[serde(default)]
    security: SecuritySection,
    #[serde(default)]
    carrier_map: CarrierMapSection,
    #[serde(default)]
    attacker: AttackerSection,
    #[serde(default)]
    stream_a: Option<StreamSection>,
    #[serde(default)]
    stream_b: Option<StreamSection>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SessionSection {
    seed: u64,
    duration_packets: u32,
    warmup_packets: u32,
    chain_length: usize,
    voice_auth_cadence: usize,
    schedule: Vec<String>,
    voice_frame_bytes: usize,
    terminate_on_drop: bool,
    protocol_enabled: bool,
    lot_start_override: Option<i64>,
}

impl Default for SessionSection {
    fn default() -> Self {
        let d = SessionConfig::default();
        SessionSection {
            seed: d.seed,
            duration_packets: d.duration_packets,
            warmup_packets: d.warmup_packets,
            chain_length: d.chain_length,
            voice_auth_cadence: d.voice_auth_cadence,
            schedule: vec![
                "jitter".into(),
                "fraction_lost".into(),
                "cumulative_lost".into(),
            ],
            voice_frame_bytes: d.voice_frame_bytes,
            terminate_on_drop: d.terminate_on_drop,
            protocol_enabled: d.protocol_enabled,
            lot_start_override: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct WatermarkSection {
    scheme: String,
    capacity_bits_per_packet: usize,
}

impl Default for WatermarkSection {
    fn default() -> Self {
        WatermarkSection {
            scheme: "lsb".into(),
            capacity_bits_per_packet: 10,
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct ChannelSection {
    packet_loss_prob: f64,
    watermark_bitflip_prob: f64,
    reorder_window: u32,
    rng_seed: u64,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct LotSection {
    critical_level: i64,
    initial_level: i64,
    timer_limit_ms: u64,
    informational_weight: i64,
    voice_weight: i64,
    chain_weight: i64,
}

impl Default for LotSection {
    fn default() -> Self {
        let d = LotConfig::default();
        LotSection {
            critical_level: d.critical_level,
            initial_level: d.initial_level,
            timer_limit_ms: d.timer_limit_ms,
            informational_weight: d.weights.informational,
            voice_weight: d.weights.security_voice,
            chain_weight: d.weights.security_chain,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum PatternSpec {
    Preset(String),
    Indices(Vec<usize>),
}

impl Default for PatternSpec {
    fn default() -> Self {
        PatternSpec::Preset("seeded".into())
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct SecuritySection {
    user_id_a: String,
    user_id_b: String,
    voice_pattern: PatternSpec,
    chain_pattern: PatternSpec,
}

impl Default for SecuritySection {
    fn default() -> Self {
        SecuritySection {
            user_id_a: "caller-a".into(),
            user_id_b: "caller-b".into(),
            voice_pattern: PatternSpec::default(),
            chain_pattern: PatternSpec::default(),
        }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct CarrierMapSection {
    preset: Option<String>,
    slots: Option<Vec<SlotSection>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SlotSection {
    layer: String,
    field: String,
    bit: u8,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
struct AttackerSection {
    kind: String,
    rate: f64,
    security_only: bool,
    seed: u64,
}

impl Default for AttackerSection {
    fn default() -> Self {
        AttackerSection {
            kind: "none".into(),
            rate: 1.0,
            security_only: false,
            seed: 0,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct StreamSection {
    src: String,
    dst: String,
    src_port: u16,
    dst_port: u16,
    ssrc: u32,
    payload_type: u8,
    #[serde(default = "default_ttl")]
    ttl: u8,
}

fn default_ttl() -> u8 {
    64
}

fn parse_addr(s: &str) -> Result<Ipv4Addr, ConfigError> {
    s.parse()
        .map_err(|_| ConfigError::BadAddress(s.to_string()))
}

fn stream_from_section(s: &StreamSection) -> Result<StreamConfig, ConfigError> {
    Ok(StreamConfig {
        src: parse_addr(&s.src)?,
        dst: parse_addr(&s.dst)?,
        src_port: s.src_port,
        dst_port: s.dst_port,
        ssrc: s.ssrc,
        payload_type: s.payload_type,
        ttl: s.ttl,
    })
}

fn pattern_from_spec(
    spec: &PatternSpec,
    seed: u64,
    tag: u64,
) -> Result<BitSelectionPattern, ConfigError> {
    match spec {
        PatternSpec::Preset(name) => match name.as_str() {
            "identity" => Ok(BitSelectionPattern::identity()),
            // Session-specific pattern drawn from the shared seed, the
            // per-conversation rotation the protocol asks for.
            "seeded" => {
                let mut rng =
                    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37).wrapping_add(tag));
                Ok(BitSelectionPattern::random(&mut rng, 256))
            }
            other => Err(ConfigError::UnknownPattern(other.to_string())),
        },
        PatternSpec::Indices(indices) => Ok(BitSelectionPattern::new(indices.clone())?),
    }
}

impl ScenarioFile {
    fn build(self) -> Result<Scenario, ConfigError> {
        let scheme = match self.watermark.scheme.as_str() {
            "lsb" => WatermarkScheme::LsbReference,
            "null" => WatermarkScheme::Null,
            other => return Err(ConfigError::UnknownScheme(other.to_string())),
        };
        let codec = WatermarkCodec {
            scheme,
            capacity_bits_per_packet: self.watermark.capacity_bits_per_packet,
        };

        let carrier_map = match (&self.carrier_map.preset, &self.carrier_map.slots) {
            (None, None) => CarrierMap::identification_low(),
            (Some(name), None) => match name.as_str() {
                "identification_low" => CarrierMap::identification_low(),
                "scattered" => CarrierMap::scattered(),
                other => return Err(ConfigError::UnknownPreset(other.to_string())),
            },
            (_, Some(slots)) => {
                let mut out = Vec::with_capacity(slots.len());
                for s in slots {
                    let field = CarrierField::from_names(&s.layer, &s.field).ok_or_else(|| {
                        ConfigError::UnknownField {
                            layer: s.layer.clone(),
                            field: s.field.clone(),
                        }
                    })?;
                    out.push(CarrierSlot::new(field, s.bit));
                }
                CarrierMap::new(out)
            }
        };

        let mut schedule = Vec::with_capacity(self.session.schedule.len());
        for name in &self.session.schedule {
            let descriptor =
                code_by_name(name).ok_or_else(|| ConfigError::UnknownParameter(name.clone()))?;
            schedule.push(descriptor.code);
        }

        let seed = self.session.seed;
        let voice_pattern =
            pattern_from_spec(&self.security.voice_pattern, seed, VOICE_PATTERN_TAG)?;
        let chain_pattern =
            pattern_from_spec(&self.security.chain_pattern, seed, CHAIN_PATTERN_TAG)?;

        let defaults = SessionConfig::default();
        let stream_a = match &self.stream_a {
            None => defaults.stream_a.clone(),
            Some(s) => stream_from_section(s)?,
        };
        let stream_b = match &self.stream_b {
            None => defaults.stream_b.clone(),
            Some(s) => stream_from_section(s)?,
        };

        let session = SessionConfig {
            carrier_map,
            codec,
            channel: ChannelModel {
                packet_loss_prob: self.channel.packet_loss_prob,
                watermark_bitflip_prob: self.channel.watermark_bitflip_prob,
                reorder_window: self.channel.reorder_window,
                rng_seed: self.channel.rng_seed,
            },
            lot: LotConfig {
                critical_level: self.lot.critical_level,
                initial_level: self.lot.initial_level,
                timer_limit_ms: self.lot.timer_limit_ms,
                weights: LotWeights {
                    informational: self.lot.informational_weight,
                    security_voice: self.lot.voice_weight,
                    security_chain: self.lot.chain_weight,
                },
            },
            chain_length: self.session.chain_length,
            voice_pattern,
            chain_pattern,
            schedule,
            voice_auth_cadence: self.session.voice_auth_cadence,
            duration_packets: self.session.duration_packets,
            warmup_packets: self.session.warmup_packets,
            voice_frame_bytes: self.session.voice_frame_bytes,
            seed,
            user_id_a: self.security.user_id_a.into_bytes(),
            user_id_b: self.security.user_id_b.into_bytes(),
            stream_a,
            stream_b,
            terminate_on_drop: self.session.terminate_on_drop,
            protocol_enabled: self.session.protocol_enabled,
            lot_start_override: self.session.lot_start_override,
        };
        session.validate()?;

        let kind = match self.attacker.kind.as_str() {
            "none" => AttackerKind::None,
            "header_scrub" => AttackerKind::HeaderScrub,
            "param_tamper" => AttackerKind::ParamTamper,
            "packet_drop" => AttackerKind::PacketDrop,
            "replay" => AttackerKind::Replay,
            other => return Err(ConfigError::UnknownAttacker(other.to_string())),
        };
        let attacker = AttackerModel {
            kind,
            rate: self.attacker.rate,
            security_only: self.attacker.security_only,
            seed: self.attacker.seed,
        };
        attacker.validate().map_err(SimError::from)?;

        Ok(Scenario { session, attacker })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_gives_defaults() {
        let scenario = Scenario::from_str("").unwrap();
        assert_eq!(scenario.session.duration_packets, 1000);
        assert_eq!(scenario.session.codec.capacity_bits_per_packet, 10);
        assert_eq!(scenario.attacker.kind, AttackerKind::None);
        assert_eq!(
            scenario.session.carrier_map,
            CarrierMap::identification_low()
        );
    }

    #[test]
    fn full_config_parses() {
        let text = r#"
            [session]
            seed = 7
            duration_packets = 500
            warmup_packets = 10
            chain_length = 3
            voice_auth_cadence = 4
            schedule = ["jitter", "ntp_timestamp"]
            voice_frame_bytes = 24
            terminate_on_drop = false
            protocol_enabled = true

            [watermark]
            scheme = "lsb"
            capacity_bits_per_packet = 8

            [channel]
            packet_loss_prob = 0.05
            watermark_bitflip_prob = 0.001
            reorder_window = 3
            rng_seed = 11

            [lot]
            critical_level = 3
            initial_level = 12
            timer_limit_ms = 4000
            informational_weight = 1
            voice_weight = 2
            chain_weight = 5

            [security]
            user_id_a = "alice"
            user_id_b = "bob"
            voice_pattern = "identity"
            chain_pattern = [0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30, 255]

            [carrier_map]
            preset = "scattered"

            [attacker]
            kind = "replay"
            rate = 0.5
            security_only = false
            seed = 2

            [stream_a]
            src = "192.168.1.10"
            dst = "192.168.1.20"
            src_port = 16384
            dst_port = 16384
            ssrc = 123456
            payload_type = 8
        "#;
        let scenario = Scenario::from_str(text).unwrap();
        assert_eq!(scenario.session.chain_length, 3);
        assert_eq!(scenario.session.schedule.len(), 2);
        assert_eq!(scenario.session.stream_a.src_port, 16384);
        assert_eq!(scenario.attacker.kind, AttackerKind::Replay);
        assert_eq!(
            scenario.session.voice_pattern,
            BitSelectionPattern::identity()
        );
    }

    #[test]
    fn seeded_patterns_depend_on_seed_only() {
        let a = Scenario::from_str("[session]\nseed = 5").unwrap();
        let b = Scenario::from_str("[session]\nseed = 5").unwrap();
        let c = Scenario::from_str("[session]\nseed = 6").unwrap();
        assert_eq!(a.session.voice_pattern, b.session.voice_pattern);
        assert_ne!(a.session.voice_pattern, c.session.voice_pattern);
        assert_ne!(a.session.voice_pattern, a.session.chain_pattern);
    }

    #[test]
    fn explicit_slots_parse() {
        let text = r#"
            [carrier_map]
            slots = [
                { layer = "ip", field = "tos", bit = 0 },
                { layer = "ip", field = "tos", bit = 1 },
                { layer = "ip", field = "identification", bit = 15 },
                { layer = "ip", field = "fragment_offset", bit = 2 },
                { layer = "udp", field = "checksum", bit = 7 },
                { layer = "rtp", field = "padding", bit = 0 },
            ]
        "#;
        let scenario = Scenario::from_str(text).unwrap();
        assert_eq!(scenario.session.carrier_map.slots.len(), 6);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(matches!(
            Scenario::from_str("[watermark]\nscheme = \"dct\""),
            Err(ConfigError::UnknownScheme(_))
        ));
        assert!(matches!(
            Scenario::from_str("[session]\nschedule = [\"chain_auth\"]"),
            Err(ConfigError::Session(_))
        ));
        assert!(matches!(
            Scenario::from_str("[session]\nschedule = [\"nonsense\"]"),
            Err(ConfigError::UnknownParameter(_))
        ));
        assert!(matches!(
            Scenario::from_str("[attacker]\nkind = \"mitm\""),
            Err(ConfigError::UnknownAttacker(_))
        ));
        assert!(matches!(
            Scenario::from_str("[stream_a]\nsrc = \"nope\"\ndst = \"10.0.0.2\"\nsrc_port = 1\ndst_port = 1\nssrc = 1\npayload_type = 0"),
            Err(ConfigError::BadAddress(_))
        ));
        // An invalid session (capacity above frame size) fails validation.
        assert!(matches!(
            Scenario::from_str("[watermark]\ncapacity_bits_per_packet = 21"),
            Err(ConfigError::Session(SimError::CapacityTooLarge { .. }))
        ));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(matches!(
            Scenario::from_str("[session]\nbogus_key = 1"),
            Err(ConfigError::Parse(_))
        ));
    }
}
