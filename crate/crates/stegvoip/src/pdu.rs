//! Protocol parameters and their fragmentation across packets.
//!
//! A parameter is a typed QoS or security value. Its bits travel
//! most-significant-first, split into per-packet fragments whose control
//! headers share the parameter code and side; only the first fragment sets
//! the continuity flag. The receiver reassembles per side in an independent
//! buffer.

use thiserror::Error;

use crate::bits::{bits_from_u64, u64_from_bits};
use crate::covert::{ControlHeader, Side};

pub mod codes {
    //! Assigned 4-bit parameter codes.
    pub const VOICE_AUTH: u8 = 0b0001;
    pub const LSR: u8 = 0b0010;
    pub const DLSR: u8 = 0b0011;
    pub const JITTER: u8 = 0b0100;
    pub const EXT_HIGHEST_SEQ: u8 = 0b0101;
    /// Chained authentication of earlier parameters. The code list leaves
    /// this slot unassigned; the receiver has to tell the two security
    /// payload kinds apart by code, so the gap is allocated to the chain.
    pub const CHAIN_AUTH: u8 = 0b0110;
    pub const CUMULATIVE_LOST: u8 = 0b0111;
    pub const FRACTION_LOST: u8 = 0b1000;
    pub const SENDER_PACKET_COUNT: u8 = 0b1001;
    pub const RTP_TIMESTAMP: u8 = 0b1010;
    pub const NTP_TIMESTAMP: u8 = 0b1011;
}

/// Payload class of a parameter, deciding verification and trust weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParameterKind {
    Informational,
    /// Voice/source authentication (user id + voice features).
    SecurityVoice,
    /// Chained authentication of the previous n-1 parameters.
    SecurityChain,
}

impl ParameterKind {
    pub fn label(self) -> &'static str {
        match self {
            ParameterKind::Informational => "info",
            ParameterKind::SecurityVoice => "security_voice",
            ParameterKind::SecurityChain => "security_chain",
        }
    }
}

/// Static descriptor of an assigned parameter code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCode {
    pub code: u8,
    pub name: &'static str,
    pub width_bits: usize,
}

const CODE_TABLE: &[ParameterCode] = &[
    ParameterCode {
        code: codes::VOICE_AUTH,
        name: "voice_auth",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::LSR,
        name: "lsr",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::DLSR,
        name: "dlsr",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::JITTER,
        name: "jitter",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::EXT_HIGHEST_SEQ,
        name: "ext_highest_seq",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::CHAIN_AUTH,
        name: "chain_auth",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::CUMULATIVE_LOST,
        name: "cumulative_lost",
        width_bits: 24,
    },
    ParameterCode {
        code: codes::FRACTION_LOST,
        name: "fraction_lost",
        width_bits: 8,
    },
    ParameterCode {
        code: codes::SENDER_PACKET_COUNT,
        name: "sender_packet_count",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::RTP_TIMESTAMP,
        name: "rtp_timestamp",
        width_bits: 32,
    },
    ParameterCode {
        code: codes::NTP_TIMESTAMP,
        name: "ntp_timestamp",
        width_bits: 64,
    },
];

/// Look up an assigned code; `None` marks the code as unassigned.
pub fn parameter_of_code(code: u8) -> Option<&'static ParameterCode> {
    CODE_TABLE.iter().find(|c| c.code == code)
}

/// Look up a code by its config-file name.
pub fn code_by_name(name: &str) -> Option<&'static ParameterCode> {
    CODE_TABLE.iter().find(|c| c.name == name)
}

pub fn kind_of_code(code: u8) -> Option<ParameterKind> {
    parameter_of_code(code).map(|_| match code {
        codes::VOICE_AUTH => ParameterKind::SecurityVoice,
        codes::CHAIN_AUTH => ParameterKind::SecurityChain,
        _ => ParameterKind::Informational,
    })
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PduError {
    #[error("parameter code {0:#06b} is unassigned")]
    UnassignedCode(u8),
    #[error("value of {got} bits does not match the {want}-bit width of code {code:#06b}")]
    WidthMismatch { code: u8, want: usize, got: usize },
    #[error("fragment capacity must be at least 1 bit")]
    ZeroCapacity,
}

/// A typed protocol value in transit: code, side and exactly `width_bits`
/// value bits (MSB first).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Parameter {
    pub code: u8,
    pub side: Side,
    pub value_bits: Vec<bool>,
}

impl Parameter {
    pub fn new(code: u8, side: Side, value_bits: Vec<bool>) -> Result<Parameter, PduError> {
        let descriptor = parameter_of_code(code).ok_or(PduError::UnassignedCode(code))?;
        if value_bits.len() != descriptor.width_bits {
            return Err(PduError::WidthMismatch {
                code,
                want: descriptor.width_bits,
                got: value_bits.len(),
            });
        }
        Ok(Parameter {
            code,
            side,
            value_bits,
        })
    }

    /// Build from an integer value, truncated to the code's width.
    pub fn from_value(code: u8, side: Side, value: u64) -> Result<Parameter, PduError> {
        let descriptor = parameter_of_code(code).ok_or(PduError::UnassignedCode(code))?;
        Ok(Parameter {
            code,
            side,
            value_bits: bits_from_u64(value, descriptor.width_bits),
        })
    }

    pub fn descriptor(&self) -> &'static ParameterCode {
        parameter_of_code(self.code).expect("constructed from an assigned code")
    }

    pub fn kind(&self) -> ParameterKind {
        kind_of_code(self.code).expect("constructed from an assigned code")
    }

    pub fn value_u64(&self) -> u64 {
        u64_from_bits(&self.value_bits)
    }
}

/// The slice of a parameter carried by one packet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fragment {
    pub header: ControlHeader,
    pub bits: Vec<bool>,
}

/// Split a parameter into `ceil(width / capacity)` fragments. The first
/// fragment starts the parameter; the last one carries the remainder.
pub fn fragment_parameter(param: &Parameter, capacity: usize) -> Result<Vec<Fragment>, PduError> {
    if capacity == 0 {
        return Err(PduError::ZeroCapacity);
    }
    Ok(param
        .value_bits
        .chunks(capacity)
        .enumerate()
        .map(|(i, chunk)| Fragment {
            header: ControlHeader {
                code: param.code,
                side: param.side,
                start: i == 0,
            },
            bits: chunk.to_vec(),
        })
        .collect())
}

/// Why a pushed fragment was rejected. These are recorded events, not
/// aborts: a disturbed channel produces them in normal operation.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ReassemblyError {
    #[error("continuation without a parameter in progress")]
    ContinuationWithoutStart,
    #[error("start fragment with unassigned code {0:#06b}")]
    UnassignedCode(u8),
    #[error("continuation for code {got_code:#06b}/{got_side:?} but {want_code:#06b}/{want_side:?} in progress")]
    StreamMismatch {
        want_code: u8,
        want_side: Side,
        got_code: u8,
        got_side: Side,
    },
    #[error(
        "fragment overflows the {width}-bit parameter ({have} bits accumulated, {pushed} pushed)"
    )]
    Overflow {
        width: usize,
        have: usize,
        pushed: usize,
    },
}

/// Result of feeding one fragment to the buffer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ReassemblyOutcome {
    /// Fragment accepted, parameter still incomplete.
    Collecting {
        accumulated: usize,
    },
    Complete(Parameter),
    Error(ReassemblyError),
}

#[derive(Debug, Clone)]
struct InProgress {
    code: u8,
    side: Side,
    width: usize,
    bits: Vec<bool>,
}

/// Single-stream reassembly state. Use one buffer per report side; the
/// fragments of one side never interleave because a sender transmits its
/// parameters strictly one after another.
#[derive(Debug, Clone, Default)]
pub struct ReassemblyBuffer {
    current: Option<InProgress>,
}

impl ReassemblyBuffer {
    pub fn new() -> ReassemblyBuffer {
        ReassemblyBuffer::default()
    }

    /// Bits the peer will have put in the next fragment for this stream,
    /// given the per-packet capacity: full capacity mid-parameter, the
    /// remainder at the end, zero when nothing sensible can follow.
    pub fn expected_fragment_len(&self, header: &ControlHeader, capacity: usize) -> usize {
        if header.start {
            match parameter_of_code(header.code) {
                Some(d) => d.width_bits.min(capacity),
                None => 0,
            }
        } else {
            match &self.current {
                Some(p) if p.code == header.code && p.side == header.side => {
                    (p.width - p.bits.len()).min(capacity)
                }
                _ => 0,
            }
        }
    }

    /// True while a parameter is partially assembled.
    pub fn in_progress(&self) -> bool {
        self.current.is_some()
    }

    /// Feed one fragment. A start fragment discards any incomplete
    /// predecessor: the sender never interleaves parameters of one side, so
    /// a fresh start means the previous transmission died.
    pub fn push(&mut self, header: ControlHeader, bits: &[bool]) -> ReassemblyOutcome {
        if header.start {
            let descriptor = match parameter_of_code(header.code) {
                Some(d) => d,
                None => {
                    return ReassemblyOutcome::Error(ReassemblyError::UnassignedCode(header.code))
                }
            };
            self.current = Some(InProgress {
                code: header.code,
                side: header.side,
                width: descriptor.width_bits,
                bits: Vec::with_capacity(descriptor.width_bits),
            });
        } else {
            match &self.current {
                None => return ReassemblyOutcome::Error(ReassemblyError::ContinuationWithoutStart),
                Some(p) if p.code != header.code || p.side != header.side => {
                    return ReassemblyOutcome::Error(ReassemblyError::StreamMismatch {
                        want_code: p.code,
                        want_side: p.side,
                        got_code: header.code,
                        got_side: header.side,
                    });
                }
                Some(_) => {}
            }
        }
        let current = self.current.as_mut().expect("set above");
        if current.bits.len() + bits.len() > current.width {
            let err = ReassemblyError::Overflow {
                width: current.width,
                have: current.bits.len(),
                pushed: bits.len(),
            };
            self.current = None;
            return ReassemblyOutcome::Error(err);
        }
        current.bits.extend_from_slice(bits);
        if current.bits.len() == current.width {
            let done = self.current.take().expect("set above");
            ReassemblyOutcome::Complete(Parameter {
                code: done.code,
                side: done.side,
                value_bits: done.bits,
            })
        } else {
            ReassemblyOutcome::Collecting {
                accumulated: current.bits.len(),
            }
        }
    }

    /// Drop any partial parameter.
    pub fn reset(&mut self) {
        self.current = None;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn jitter_param(value: u64) -> Parameter {
        Parameter::from_value(codes::JITTER, Side::Sender, value).unwrap()
    }

    #[test]
    fn four_packet_walkthrough_fragments() {
        let param = jitter_param(0xDEAD_BEEF);
        let frags = fragment_parameter(&param, 10).unwrap();
        assert_eq!(frags.len(), 4);
        assert_eq!(
            frags.iter().map(|f| f.bits.len()).collect::<Vec<_>>(),
            vec![10, 10, 10, 2]
        );
        assert!(frags[0].header.start);
        for f in &frags[1..] {
            assert!(!f.header.start);
            assert_eq!(f.header.code, codes::JITTER);
            assert_eq!(f.header.side, Side::Sender);
        }
    }

    #[test]
    fn fraction_lost_fits_one_packet() {
        let param = Parameter::from_value(codes::FRACTION_LOST, Side::Receiver, 64).unwrap();
        let frags = fragment_parameter(&param, 10).unwrap();
        assert_eq!(frags.len(), 1);
        assert_eq!(frags[0].bits.len(), 8);
        assert!(frags[0].header.start);
    }

    #[test]
    fn ntp_at_capacity_one_is_sixty_four_fragments() {
        let param =
            Parameter::from_value(codes::NTP_TIMESTAMP, Side::Sender, 0x0123_4567_89AB_CDEF)
                .unwrap();
        let frags = fragment_parameter(&param, 1).unwrap();
        assert_eq!(frags.len(), 64);
        let concatenated: Vec<bool> = frags.iter().flat_map(|f| f.bits.clone()).collect();
        assert_eq!(concatenated, param.value_bits);
    }

    #[test]
    fn zero_capacity_is_an_error() {
        assert_eq!(
            fragment_parameter(&jitter_param(1), 0),
            Err(PduError::ZeroCapacity)
        );
    }

    #[test]
    fn reassemble_walkthrough_sequence() {
        let param = jitter_param(0xCAFE_F00D);
        let frags = fragment_parameter(&param, 10).unwrap();
        let mut buf = ReassemblyBuffer::new();
        for (i, f) in frags.iter().enumerate() {
            match buf.push(f.header, &f.bits) {
                ReassemblyOutcome::Collecting { accumulated } => {
                    assert!(i < 3);
                    assert_eq!(accumulated, (i + 1) * 10);
                }
                ReassemblyOutcome::Complete(p) => {
                    assert_eq!(i, 3);
                    assert_eq!(p, param);
                }
                ReassemblyOutcome::Error(e) => panic!("unexpected error {e}"),
            }
        }
        assert!(!buf.in_progress());
    }

    #[test]
    fn continuation_without_start_is_reported() {
        let mut buf = ReassemblyBuffer::new();
        let header = ControlHeader {
            code: codes::JITTER,
            side: Side::Sender,
            start: false,
        };
        assert_eq!(
            buf.push(header, &[true; 10]),
            ReassemblyOutcome::Error(ReassemblyError::ContinuationWithoutStart)
        );
    }

    #[test]
    fn unassigned_start_is_reported() {
        let mut buf = ReassemblyBuffer::new();
        let header = ControlHeader {
            code: 0b1111,
            side: Side::Sender,
            start: true,
        };
        assert_eq!(
            buf.push(header, &[true; 4]),
            ReassemblyOutcome::Error(ReassemblyError::UnassignedCode(0b1111))
        );
        assert!(!buf.in_progress());
    }

    #[test]
    fn mismatched_continuation_is_reported() {
        let param = jitter_param(7);
        let frags = fragment_parameter(&param, 10).unwrap();
        let mut buf = ReassemblyBuffer::new();
        buf.push(frags[0].header, &frags[0].bits);
        let stray = ControlHeader {
            code: codes::LSR,
            side: Side::Sender,
            start: false,
        };
        assert!(matches!(
            buf.push(stray, &[false; 10]),
            ReassemblyOutcome::Error(ReassemblyError::StreamMismatch { .. })
        ));
        // The in-progress parameter is preserved.
        assert!(buf.in_progress());
    }

    #[test]
    fn new_start_discards_incomplete_predecessor() {
        let first = jitter_param(1);
        let second = jitter_param(2);
        let f1 = fragment_parameter(&first, 10).unwrap();
        let f2 = fragment_parameter(&second, 10).unwrap();
        let mut buf = ReassemblyBuffer::new();
        buf.push(f1[0].header, &f1[0].bits);
        buf.push(f1[1].header, &f1[1].bits);
        // Fresh start: the old parameter dies, the new one completes clean.
        for (i, f) in f2.iter().enumerate() {
            match buf.push(f.header, &f.bits) {
                ReassemblyOutcome::Complete(p) => {
                    assert_eq!(i, 3);
                    assert_eq!(p, second);
                }
                ReassemblyOutcome::Collecting { .. } => assert!(i < 3),
                ReassemblyOutcome::Error(e) => panic!("unexpected error {e}"),
            }
        }
    }

    #[test]
    fn overflow_is_reported_and_resets() {
        let param = Parameter::from_value(codes::FRACTION_LOST, Side::Receiver, 3).unwrap();
        let frags = fragment_parameter(&param, 6).unwrap();
        let mut buf = ReassemblyBuffer::new();
        buf.push(frags[0].header, &frags[0].bits);
        // 6 accumulated, 2 remaining; push 6 more.
        assert!(matches!(
            buf.push(frags[1].header, &[true; 6]),
            ReassemblyOutcome::Error(ReassemblyError::Overflow {
                width: 8,
                have: 6,
                pushed: 6
            })
        ));
        assert!(!buf.in_progress());
    }

    #[test]
    fn all_codes_roundtrip_at_all_capacities() {
        for descriptor in CODE_TABLE {
            for capacity in 1..=64usize {
                let value = 0x0123_4567_89AB_CDEFu64;
                let param = Parameter::from_value(descriptor.code, Side::Receiver, value).unwrap();
                let frags = fragment_parameter(&param, capacity).unwrap();
                assert_eq!(frags.len(), descriptor.width_bits.div_ceil(capacity));
                assert_eq!(
                    frags.iter().map(|f| f.bits.len()).sum::<usize>(),
                    descriptor.width_bits
                );
                let mut buf = ReassemblyBuffer::new();
                let mut done = None;
                for f in &frags {
                    if let ReassemblyOutcome::Complete(p) = buf.push(f.header, &f.bits) {
                        done = Some(p);
                    }
                }
                assert_eq!(done.as_ref(), Some(&param));
            }
        }
    }

    #[test]
    fn lost_fragment_prevents_completion() {
        let param = jitter_param(0xFFFF_FFFF);
        let frags = fragment_parameter(&param, 8).unwrap();
        for lost in 0..frags.len() {
            let mut buf = ReassemblyBuffer::new();
            let mut completed = false;
            for (i, f) in frags.iter().enumerate() {
                if i == lost {
                    continue;
                }
                match buf.push(f.header, &f.bits) {
                    ReassemblyOutcome::Complete(_) => completed = true,
                    ReassemblyOutcome::Collecting { .. } | ReassemblyOutcome::Error(_) => {}
                }
            }
            assert!(!completed, "losing fragment {lost} must prevent completion");
        }
    }

    #[test]
    fn code_lookup_matches_table() {
        let jitter = parameter_of_code(0b0100).unwrap();
        assert_eq!(jitter.name, "jitter");
        assert_eq!(jitter.width_bits, 32);
        let lost = parameter_of_code(0b0111).unwrap();
        assert_eq!(lost.name, "cumulative_lost");
        assert_eq!(lost.width_bits, 24);
        assert!(parameter_of_code(0b1111).is_none());
        assert!(parameter_of_code(0b0000).is_none());
    }

    #[test]
    fn widths_stay_within_32_bits_except_ntp() {
        for d in CODE_TABLE {
            if d.code == codes::NTP_TIMESTAMP {
                assert_eq!(d.width_bits, 64);
            } else {
                assert!(d.width_bits <= 32, "{} too wide", d.name);
            }
        }
    }

    #[test]
    fn kinds_follow_codes() {
        assert_eq!(
            kind_of_code(codes::VOICE_AUTH),
            Some(ParameterKind::SecurityVoice)
        );
        assert_eq!(
            kind_of_code(codes::CHAIN_AUTH),
            Some(ParameterKind::SecurityChain)
        );
        assert_eq!(
            kind_of_code(codes::JITTER),
            Some(ParameterKind::Informational)
        );
        assert_eq!(kind_of_code(0b1111), None);
    }
}
