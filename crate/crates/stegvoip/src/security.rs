//! Security payload computation: voice/source authentication and the
//! chained authentication of earlier parameters.
//!
//! A session-secret bit-selection pattern picks the 32 transmitted bits out
//! of the hash digest, so an attacker without the pattern cannot forge a
//! matching parameter even with the hash function known.

use rand::seq::index;
use rand::RngCore;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::bits::{bits_from_bytes, bytes_from_bits, u64_from_bits};
use crate::covert::Side;
use crate::pdu::{codes, Parameter};

/// Width of every security parameter value.
pub const SECURITY_PARAM_BITS: usize = 32;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SecurityError {
    #[error("bit-selection pattern needs exactly {SECURITY_PARAM_BITS} indices, got {0}")]
    PatternWrongLength(usize),
    #[error("bit-selection pattern has duplicate index {0}")]
    PatternDuplicate(usize),
    #[error("pattern index {index} out of range for a {digest_bits}-bit digest")]
    PatternIndexOutOfRange { index: usize, digest_bits: usize },
    #[error("user global id must not be empty")]
    EmptyUserId,
    #[error("chain buffer holds {have} blocks, needs {need}")]
    ChainBufferNotFull { have: usize, need: usize },
    #[error("chain buffer already holds {0} blocks")]
    ChainBufferFull(usize),
    #[error("chain length must be at least 2")]
    ChainTooShort,
}

/// Hash function handle. The protocol never pins a specific algorithm;
/// SHA-256 is the reference choice.
pub trait HashFn {
    fn digest(&self, data: &[u8]) -> Vec<u8>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Sha256Hash;

impl HashFn for Sha256Hash {
    fn digest(&self, data: &[u8]) -> Vec<u8> {
        Sha256::digest(data).to_vec()
    }
}

/// Ordered choice of 32 distinct digest bit positions. Output bit `j` of a
/// selection is digest bit `indices[j]`, with digest bits numbered MSB
/// first within each byte.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitSelectionPattern {
    indices: Vec<usize>,
}

impl BitSelectionPattern {
    pub fn new(indices: Vec<usize>) -> Result<BitSelectionPattern, SecurityError> {
        if indices.len() != SECURITY_PARAM_BITS {
            return Err(SecurityError::PatternWrongLength(indices.len()));
        }
        let mut seen = std::collections::HashSet::new();
        for &i in &indices {
            if !seen.insert(i) {
                return Err(SecurityError::PatternDuplicate(i));
            }
        }
        Ok(BitSelectionPattern { indices })
    }

    /// The first 32 digest bits in order.
    pub fn identity() -> BitSelectionPattern {
        BitSelectionPattern {
            indices: (0..SECURITY_PARAM_BITS).collect(),
        }
    }

    /// Draw 32 distinct positions from a `digest_bits`-wide digest.
    pub fn random(rng: &mut impl RngCore, digest_bits: usize) -> BitSelectionPattern {
        let picked = index::sample(rng, digest_bits, SECURITY_PARAM_BITS);
        BitSelectionPattern {
            indices: picked.into_vec(),
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn validate_for(&self, digest_bits: usize) -> Result<(), SecurityError> {
        for &index in &self.indices {
            if index >= digest_bits {
                return Err(SecurityError::PatternIndexOutOfRange { index, digest_bits });
            }
        }
        Ok(())
    }
}

/// Assemble the 32-bit security value from a digest: output bit `j` (MSB
/// first) is digest bit `pattern[j]`.
pub fn select_bits(digest: &[u8], pattern: &BitSelectionPattern) -> Result<u32, SecurityError> {
    pattern.validate_for(digest.len() * 8)?;
    let mut value = 0u32;
    for (j, &index) in pattern.indices.iter().enumerate() {
        let bit = digest[index / 8] >> (7 - index % 8) & 1;
        value |= u32::from(bit) << (31 - j);
    }
    Ok(value)
}

/// Inputs of the voice/source authentication parameter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VoiceAuthInput {
    pub user_global_id: Vec<u8>,
    pub voice_features: Vec<u8>,
}

/// Voice features extracted from frames. Pluggable because the protocol
/// does not pin what a "feature" is; the reference implementation simply
/// digests the frame bytes it is given.
pub trait VoiceFeatureExtractor {
    fn extract(&self, frames: &[Vec<u8>]) -> Vec<u8>;
}

/// Reference extractor: SHA-256 over the concatenated frame bytes. Callers
/// pass watermark-masked frames so the features are invariant to the bits
/// embedded on top of the voice.
#[derive(Debug, Clone, Copy, Default)]
pub struct DigestFeatures;

impl VoiceFeatureExtractor for DigestFeatures {
    fn extract(&self, frames: &[Vec<u8>]) -> Vec<u8> {
        let mut hasher = Sha256::new();
        for frame in frames {
            hasher.update(frame);
        }
        hasher.finalize().to_vec()
    }
}

/// The 32-bit voice-auth value: the id/feature concatenation itself when it
/// fits, otherwise a pattern selection from its hash.
pub fn voice_auth_value(
    input: &VoiceAuthInput,
    pattern: &BitSelectionPattern,
    hash: &dyn HashFn,
) -> Result<u32, SecurityError> {
    if input.user_global_id.is_empty() {
        return Err(SecurityError::EmptyUserId);
    }
    let concat: Vec<u8> = input
        .user_global_id
        .iter()
        .chain(&input.voice_features)
        .copied()
        .collect();
    if concat.len() * 8 <= SECURITY_PARAM_BITS {
        // Left-aligned, zero-padded to 32 bits.
        let mut bits = bits_from_bytes(&concat);
        bits.resize(SECURITY_PARAM_BITS, false);
        Ok(u64_from_bits(&bits) as u32)
    } else {
        select_bits(&hash.digest(&concat), pattern)
    }
}

pub fn compute_voice_auth_param(
    input: &VoiceAuthInput,
    pattern: &BitSelectionPattern,
    hash: &dyn HashFn,
    side: Side,
) -> Result<Parameter, SecurityError> {
    let value = voice_auth_value(input, pattern, hash)?;
    Ok(
        Parameter::from_value(codes::VOICE_AUTH, side, u64::from(value))
            .expect("voice auth code is assigned"),
    )
}

/// Sender-side store of the parameters awaiting chained authentication.
/// Holds at most `n - 1` blocks in transmission order; chain parameters
/// themselves never enter it.
#[derive(Debug, Clone)]
pub struct ChainBuffer {
    n: usize,
    blocks: Vec<Parameter>,
}

impl ChainBuffer {
    pub fn new(n: usize) -> Result<ChainBuffer, SecurityError> {
        if n < 2 {
            return Err(SecurityError::ChainTooShort);
        }
        Ok(ChainBuffer {
            n,
            blocks: Vec::with_capacity(n - 1),
        })
    }

    pub fn chain_length(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn is_full(&self) -> bool {
        self.blocks.len() == self.n - 1
    }

    pub fn blocks(&self) -> &[Parameter] {
        &self.blocks
    }

    pub fn push(&mut self, param: Parameter) -> Result<(), SecurityError> {
        if self.is_full() {
            return Err(SecurityError::ChainBufferFull(self.blocks.len()));
        }
        self.blocks.push(param);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.blocks.clear();
    }
}

/// Hash-and-select over a block sequence: the raw value bits of each block,
/// big-endian packed, concatenated in transmission order.
pub fn chain_digest_value(
    blocks: &[Parameter],
    pattern: &BitSelectionPattern,
    hash: &dyn HashFn,
) -> Result<u32, SecurityError> {
    let mut data = Vec::new();
    for block in blocks {
        data.extend_from_slice(&bytes_from_bits(&block.value_bits));
    }
    select_bits(&hash.digest(&data), pattern)
}

/// Compute the chain parameter over a full buffer and clear it.
pub fn compute_chain_auth_param(
    buf: &mut ChainBuffer,
    pattern: &BitSelectionPattern,
    hash: &dyn HashFn,
    side: Side,
) -> Result<Parameter, SecurityError> {
    if !buf.is_full() {
        return Err(SecurityError::ChainBufferNotFull {
            have: buf.blocks.len(),
            need: buf.n - 1,
        });
    }
    let value = chain_digest_value(&buf.blocks, pattern, hash)?;
    buf.clear();
    Ok(
        Parameter::from_value(codes::CHAIN_AUTH, side, u64::from(value))
            .expect("chain auth code is assigned"),
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verification {
    Verified,
    Failed,
}

impl Verification {
    pub fn is_verified(self) -> bool {
        self == Verification::Verified
    }
}

/// Compare a received security parameter with the locally recomputed value.
pub fn verify_security_param(received: &Parameter, recomputed: u32) -> Verification {
    if received.value_u64() == u64::from(recomputed) {
        Verification::Verified
    } else {
        Verification::Failed
    }
}
