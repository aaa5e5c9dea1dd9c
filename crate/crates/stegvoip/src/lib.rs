//! Covert control and security protocol for VoIP streams.
//!
//! An RTP voice call carries a hidden control protocol: a 6-bit header
//! spread over unused IP/UDP/RTP header fields (the covert channel) and
//! parameter payload bits embedded into the voice frames (the watermark
//! channel). Parameters are RTCP-style QoS statistics plus two security
//! payloads: voice/source authentication and a chained hash over the
//! previous parameters. A level-of-trust policy drops the call when
//! verifications fail or the channel goes silent. Nothing of this adds a
//! single byte to the wire: packets are the same length with the protocol
//! on or off.
//!
//! The crate is a library plus a deterministic two-party call simulator.
//! Start with the runnable examples:
//!
//! ```text
//! cargo run --example covert_channel        # header packing + carrier maps
//! cargo run --example watermark_channel     # payload bits in voice frames
//! cargo run --example fragmentation         # one parameter across packets
//! cargo run --example voice_authentication  # id + voice features parameter
//! cargo run --example chain_authentication  # every n-th parameter signs the rest
//! cargo run --example trust_policy          # level-of-trust lifecycle
//! cargo run --example qos_metrics           # jitter / loss accounting
//! cargo run --example clean_call            # full simulated call
//! cargo run --example attack_scenarios      # header scrub and tamper attacks
//! cargo run --example pcap_roundtrip        # capture files and inspection
//! ```
//!
//! The `stegvoip` binary wraps the simulator: `stegvoip simulate <config>`
//! runs a scenario file and `stegvoip inspect <pcap> --map <config>`
//! recovers covert content from a capture.

pub mod bits;
pub mod config;
pub mod covert;
pub mod inspect;
pub mod lot;
pub mod metrics;
pub mod packet;
pub mod pcap;
pub mod pdu;
pub mod security;
pub mod sim;
pub mod watermark;

pub use covert::{
    embed_control_bits, extract_control_bits, CarrierField, CarrierMap, CarrierSlot, ControlHeader,
    Side,
};
pub use lot::{max_safe_spoofs, LotConfig, LotState, LotStatus, LotWeights};
pub use packet::{build_packet, StreamConfig, VoicePacket};
pub use pdu::{
    fragment_parameter, parameter_of_code, Fragment, Parameter, ParameterKind, ReassemblyBuffer,
    ReassemblyOutcome,
};
pub use security::{
    compute_chain_auth_param, compute_voice_auth_param, select_bits, verify_security_param,
    BitSelectionPattern, ChainBuffer, Sha256Hash, Verification, VoiceAuthInput,
};
pub use sim::{run_scenario, AttackerKind, AttackerModel, SessionConfig, SessionReport};
pub use watermark::{
    channel_degrade, embed_bits, extract_bits, ChannelModel, WatermarkCodec, WatermarkScheme,
};
