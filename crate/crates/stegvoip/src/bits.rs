//! Bit-sequence helpers shared by the covert, watermark and security layers.
//!
//! All conversions are most-significant-bit first, matching the big-endian
//! wire convention used everywhere else in this crate.

/// Expand the low `width` bits of `value` into a bit vector, MSB first.
pub fn bits_from_u64(value: u64, width: usize) -> Vec<bool> {
    assert!(width <= 64, "width must be <= 64");
    (0..width)
        .map(|i| (value >> (width - 1 - i)) & 1 == 1)
        .collect()
}

/// Fold an MSB-first bit slice back into an integer. Panics if longer than 64 bits.
pub fn u64_from_bits(bits: &[bool]) -> u64 {
    assert!(bits.len() <= 64, "at most 64 bits fit a u64");
    bits.iter().fold(0u64, |acc, &b| (acc << 1) | u64::from(b))
}

/// Expand bytes into bits, MSB first within each byte.
pub fn bits_from_bytes(bytes: &[u8]) -> Vec<bool> {
    bytes
        .iter()
        .flat_map(|&byte| (0..8).map(move |i| (byte >> (7 - i)) & 1 == 1))
        .collect()
}

/// Pack an MSB-first bit slice into bytes, zero-padding the final byte.
pub fn bytes_from_bits(bits: &[bool]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &bit) in bits.iter().enumerate() {
        if bit {
            out[i / 8] |= 1 << (7 - i % 8);
        }
    }
    out
}
