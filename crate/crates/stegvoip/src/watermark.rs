//! The watermark channel: parameter payload bits carried inside voice
//! frames, plus a degradation model standing in for codec compression and
//! transit noise.
//!
//! Real audio watermarking DSP is out of scope; the protocol layer only
//! needs "k bits per packet survive with some error rate". The reference
//! codec writes bit `i` into the least significant bit of payload byte `i`.
//! A null codec that carries nothing exists for timeout experiments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum WatermarkError {
    #[error("{bits} bits exceed the codec capacity of {capacity}")]
    CapacityExceeded { bits: usize, capacity: usize },
    #[error("payload of {payload} bytes cannot carry {bits} bits")]
    PayloadTooShort { payload: usize, bits: usize },
    #[error("channel probability {0} outside [0, 1]")]
    BadProbability(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WatermarkScheme {
    /// Reference bit embedding: one bit per payload byte, in the LSB.
    LsbReference,
    /// Carries nothing; extraction always yields zero bits.
    Null,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct WatermarkCodec {
    pub scheme: WatermarkScheme,
    pub capacity_bits_per_packet: usize,
}

impl WatermarkCodec {
    pub fn lsb(capacity_bits_per_packet: usize) -> WatermarkCodec {
        WatermarkCodec {
            scheme: WatermarkScheme::LsbReference,
            capacity_bits_per_packet,
        }
    }

    /// A codec that delivers nothing. The capacity still paces how the
    /// sender fragments parameters; the bits just never arrive.
    pub fn null(capacity_bits_per_packet: usize) -> WatermarkCodec {
        WatermarkCodec {
            scheme: WatermarkScheme::Null,
            capacity_bits_per_packet,
        }
    }
}

/// Convert a bit/s watermark rate into per-packet capacity at a packet
/// rate, never below one bit per packet.
pub fn capacity_from_bitrate(bits_per_second: u32, packets_per_second: u32) -> usize {
    (bits_per_second as usize)
        .div_ceil(packets_per_second as usize)
        .max(1)
}

/// Transit degradation applied to extracted watermark bits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelModel {
    pub packet_loss_prob: f64,
    pub watermark_bitflip_prob: f64,
    /// Largest delivery delay, in packet slots, a packet may pick up.
    pub reorder_window: u32,
    pub rng_seed: u64,
}

impl Default for ChannelModel {
    fn default() -> Self {
        ChannelModel {
            packet_loss_prob: 0.0,
            watermark_bitflip_prob: 0.0,
            reorder_window: 0,
            rng_seed: 0,
        }
    }
}

impl ChannelModel {
    pub fn validate(&self) -> Result<(), WatermarkError> {
        for p in [self.packet_loss_prob, self.watermark_bitflip_prob] {
            if !(0.0..=1.0).contains(&p) {
                return Err(WatermarkError::BadProbability(p));
            }
        }
        Ok(())
    }
}

/// Embed `bits` into a copy of `payload`. Output length equals input length
/// and only the LSBs of the first `bits.len()` bytes may differ.
pub fn embed_bits(
    payload: &[u8],
    bits: &[bool],
    codec: &WatermarkCodec,
) -> Result<Vec<u8>, WatermarkError> {
    match codec.scheme {
        WatermarkScheme::Null => Ok(payload.to_vec()),
        WatermarkScheme::LsbReference => {
            if bits.len() > codec.capacity_bits_per_packet {
                return Err(WatermarkError::CapacityExceeded {
                    bits: bits.len(),
                    capacity: codec.capacity_bits_per_packet,
                });
            }
            if bits.len() > payload.len() {
                return Err(WatermarkError::PayloadTooShort {
                    payload: payload.len(),
                    bits: bits.len(),
                });
            }
            let mut out = payload.to_vec();
            for (byte, &bit) in out.iter_mut().zip(bits) {
                *byte = *byte & 0xFE | u8::from(bit);
            }
            Ok(out)
        }
    }
}

/// Read `count` watermark bits back out of a payload.
pub fn extract_bits(
    payload: &[u8],
    count: usize,
    codec: &WatermarkCodec,
) -> Result<Vec<bool>, WatermarkError> {
    match codec.scheme {
        WatermarkScheme::Null => Ok(Vec::new()),
        WatermarkScheme::LsbReference => {
            if count > codec.capacity_bits_per_packet {
                return Err(WatermarkError::CapacityExceeded {
                    bits: count,
                    capacity: codec.capacity_bits_per_packet,
                });
            }
            if count > payload.len() {
                return Err(WatermarkError::PayloadTooShort {
                    payload: payload.len(),
                    bits: count,
                });
            }
            Ok(payload[..count].iter().map(|b| b & 1 == 1).collect())
        }
    }
}

/// Clear every bit position the codec may write, so that both call sides
/// can derive watermark-independent voice features from a frame.
pub fn mask_watermark_bits(payload: &[u8], codec: &WatermarkCodec) -> Vec<u8> {
    match codec.scheme {
        WatermarkScheme::Null => payload.to_vec(),
        WatermarkScheme::LsbReference => payload.iter().map(|b| b & 0xFE).collect(),
    }
}

/// Flip each bit independently with the model's bit-flip probability.
/// Deterministic for a given rng state.
pub fn channel_degrade(bits: &[bool], model: &ChannelModel, rng: &mut ChaCha8Rng) -> Vec<bool> {
    bits.iter()
        .map(|&b| {
            if rng.random_bool(model.watermark_bitflip_prob) {
                !b
            } else {
                b
            }
        })
        .collect()
}
