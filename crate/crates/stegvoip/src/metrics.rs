//! QoS statistics transported by the protocol: interarrival jitter,
//! fraction lost, cumulative lost, extended highest sequence, sender
//! counters and the last-report/delay pair.
//!
//! The arithmetic follows the classic RTCP receiver-report rules: integer
//! jitter smoothing `J += (|D| - J) / 16`, an 8-bit fixed-point loss
//! fraction per reporting interval and a clamped 24-bit cumulative loss.
//! One deviation: duplicate packets are detected by extended sequence
//! number and skipped entirely, so they count once toward the received
//! total and never disturb the jitter estimate.

use std::collections::HashSet;

use crate::covert::Side;
use crate::pdu::{codes, Parameter};

/// Clock values a snapshot needs beyond the reception state: the local
/// wall clock in NTP format, the current RTP timestamp of the outgoing
/// stream and "now" in RTP timestamp units (8 kHz).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ClockSnapshot {
    pub ntp_timestamp: u64,
    pub rtp_timestamp: u32,
    pub now_units: u64,
}

/// Reception accounting for one incoming stream.
#[derive(Debug, Clone, Default)]
pub struct ReceptionStats {
    base_seq_ext: Option<u32>,
    max_seq: u16,
    cycles: u32,
    received_count: u64,
    expected_prior: u64,
    received_prior: u64,
    jitter: i64,
    last_transit: Option<i64>,
    last_sr_ntp_mid32: u32,
    last_sr_arrival_units: Option<u64>,
    seen: HashSet<u32>,
}

impl ReceptionStats {
    pub fn new() -> ReceptionStats {
        ReceptionStats::default()
    }

    /// Extend a 16-bit sequence number across wraps. Packets up to half the
    /// sequence space ahead advance the highest-seen counter; anything else
    /// is treated as a reordered packet from the current or previous cycle.
    fn extend(&mut self, seq: u16) -> u32 {
        if self.base_seq_ext.is_none() {
            self.max_seq = seq;
            self.cycles = 0;
            let ext = u32::from(seq);
            self.base_seq_ext = Some(ext);
            return ext;
        }
        let delta = seq.wrapping_sub(self.max_seq);
        if delta != 0 && delta < 0x8000 {
            if seq < self.max_seq {
                self.cycles = self.cycles.wrapping_add(1);
            }
            self.max_seq = seq;
            (self.cycles << 16) | u32::from(seq)
        } else {
            // Old or duplicate packet; it belongs to the previous cycle
            // when its 16-bit value is above the current maximum.
            let cycle = if seq > self.max_seq {
                self.cycles.wrapping_sub(1)
            } else {
                self.cycles
            };
            (cycle << 16) | u32::from(seq)
        }
    }

    /// Account one arriving packet. Returns `false` for duplicates, which
    /// are ignored beyond the bookkeeping that already saw them.
    pub fn update_on_packet(&mut self, seq: u16, rtp_ts: u32, arrival_units: u64) -> bool {
        let ext = self.extend(seq);
        if !self.seen.insert(ext) {
            return false;
        }
        self.received_count += 1;
        let transit = arrival_units as i64 - i64::from(rtp_ts);
        if let Some(last) = self.last_transit {
            let d = (transit - last).abs();
            self.jitter += (d - self.jitter) / 16;
        }
        self.last_transit = Some(transit);
        true
    }

    /// Record the peer's NTP timestamp parameter, the analogue of
    /// receiving a sender report.
    pub fn on_sender_report(&mut self, ntp_timestamp: u64, arrival_units: u64) {
        self.last_sr_ntp_mid32 = (ntp_timestamp >> 16) as u32;
        self.last_sr_arrival_units = Some(arrival_units);
    }

    pub fn received_count(&self) -> u64 {
        self.received_count
    }

    pub fn extended_highest_seq(&self) -> u32 {
        if self.base_seq_ext.is_none() {
            return 0;
        }
        (self.cycles << 16) | u32::from(self.max_seq)
    }

    /// Packets expected so far: highest extended sequence minus the first,
    /// plus one.
    pub fn expected(&self) -> u64 {
        match self.base_seq_ext {
            None => 0,
            Some(base) => u64::from(self.extended_highest_seq()) - u64::from(base) + 1,
        }
    }

    /// Signed loss count before clamping.
    pub fn cumulative_lost_raw(&self) -> i64 {
        self.expected() as i64 - self.received_count as i64
    }

    /// Loss count clamped into the 24-bit parameter range.
    pub fn cumulative_lost(&self) -> u32 {
        self.cumulative_lost_raw().clamp(0, 0x7F_FFFF) as u32
    }

    pub fn jitter(&self) -> u32 {
        self.jitter as u32
    }

    /// 8-bit fixed-point loss fraction since the previous call; calling
    /// this closes the reporting interval.
    pub fn fraction_lost_interval(&mut self) -> u8 {
        let expected = self.expected();
        let received = self.received_count;
        let expected_interval = expected - self.expected_prior;
        let received_interval = received - self.received_prior;
        self.expected_prior = expected;
        self.received_prior = received;
        if expected_interval == 0 {
            return 0;
        }
        let lost = expected_interval as i64 - received_interval as i64;
        if lost <= 0 {
            0
        } else {
            ((lost << 8) / expected_interval as i64).min(255) as u8
        }
    }

    /// Middle 32 bits of the last peer NTP timestamp; 0 before any arrived.
    pub fn lsr(&self) -> u32 {
        match self.last_sr_arrival_units {
            Some(_) => self.last_sr_ntp_mid32,
            None => 0,
        }
    }

    /// Delay since the last peer NTP timestamp in 1/65536 s; 0 before any.
    pub fn dlsr(&self, now_units: u64) -> u32 {
        match self.last_sr_arrival_units {
            None => 0,
            Some(arrival) => {
                let delta = now_units.saturating_sub(arrival);
                ((delta << 16) / 8000) as u32
            }
        }
    }

    /// Current value of one informational parameter code.
    /// Reads of the loss fraction advance its reporting interval.
    pub fn parameter_value(
        &mut self,
        code: u8,
        clocks: &ClockSnapshot,
        packets_sent: u32,
    ) -> Option<u64> {
        match code {
            codes::JITTER => Some(u64::from(self.jitter())),
            codes::FRACTION_LOST => Some(u64::from(self.fraction_lost_interval())),
            codes::CUMULATIVE_LOST => Some(u64::from(self.cumulative_lost())),
            codes::EXT_HIGHEST_SEQ => Some(u64::from(self.extended_highest_seq())),
            codes::LSR => Some(u64::from(self.lsr())),
            codes::DLSR => Some(u64::from(self.dlsr(clocks.now_units))),
            codes::SENDER_PACKET_COUNT => Some(u64::from(packets_sent)),
            codes::NTP_TIMESTAMP => Some(clocks.ntp_timestamp),
            codes::RTP_TIMESTAMP => Some(u64::from(clocks.rtp_timestamp)),
            _ => None,
        }
    }
}

/// Emit every parameter of one report side with its current value.
pub fn snapshot_parameters(
    stats: &mut ReceptionStats,
    side: Side,
    clocks: &ClockSnapshot,
    packets_sent: u32,
) -> Vec<Parameter> {
    let codes_for_side: &[u8] = match side {
        Side::Receiver => &[
            codes::FRACTION_LOST,
            codes::CUMULATIVE_LOST,
            codes::EXT_HIGHEST_SEQ,
            codes::JITTER,
            codes::LSR,
            codes::DLSR,
        ],
        Side::Sender => &[
            codes::NTP_TIMESTAMP,
            codes::RTP_TIMESTAMP,
            codes::SENDER_PACKET_COUNT,
        ],
    };
    codes_for_side
        .iter()
        .map(|&code| {
            let value = stats
                .parameter_value(code, clocks, packets_sent)
                .expect("informational code");
            Parameter::from_value(code, side, value).expect("assigned code")
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_spacing_keeps_jitter_zero() {
        let mut st = ReceptionStats::new();
        for i in 0..100u16 {
            st.update_on_packet(i, u32::from(i) * 160, u64::from(i) * 160 + 5);
        }
        assert_eq!(st.jitter(), 0);
    }

    #[test]
    fn sequence_wrap_extends_by_one() {
        let mut st = ReceptionStats::new();
        st.update_on_packet(65535, 0, 0);
        assert_eq!(st.extended_highest_seq(), 65535);
        st.update_on_packet(0, 160, 160);
        assert_eq!(st.extended_highest_seq(), 65536);
        assert_eq!(st.expected(), 2);
    }

    #[test]
    fn jitter_matches_formula_on_a_known_trace() {
        // Arrival offsets chosen by hand; oracle computed step by step.
        let mut st = ReceptionStats::new();
        let arrivals = [0i64, 200, 310, 520, 640];
        let mut oracle_jitter = 0i64;
        let mut last_transit: Option<i64> = None;
        for (i, &arrival) in arrivals.iter().enumerate() {
            let ts = i as u32 * 160;
            st.update_on_packet(i as u16, ts, arrival as u64);
            let transit = arrival - i64::from(ts);
            if let Some(last) = last_transit {
                let d = (transit - last).abs();
                oracle_jitter += (d - oracle_jitter) / 16;
            }
            last_transit = Some(transit);
            assert_eq!(i64::from(st.jitter()), oracle_jitter, "step {i}");
        }
        assert!(st.jitter() > 0);
    }

    #[test]
    fn no_loss_means_zero_fraction() {
        let mut st = ReceptionStats::new();
        for i in 0..10u16 {
            st.update_on_packet(i, 0, 0);
        }
        assert_eq!(st.fraction_lost_interval(), 0);
        assert_eq!(st.cumulative_lost(), 0);
    }

    #[test]
    fn one_lost_of_four_is_sixty_four() {
        let mut st = ReceptionStats::new();
        st.update_on_packet(0, 0, 0);
        st.fraction_lost_interval();
        // Interval: expect 1..=4, receive 3 of them.
        st.update_on_packet(1, 160, 160);
        st.update_on_packet(2, 320, 320);
        st.update_on_packet(4, 640, 640);
        assert_eq!(st.fraction_lost_interval(), 64);
        assert_eq!(st.cumulative_lost(), 1);
    }

    #[test]
    fn cumulative_is_expected_minus_received() {
        let mut st = ReceptionStats::new();
        for i in [0u16, 1, 2, 5, 9] {
            st.update_on_packet(i, 0, 0);
        }
        assert_eq!(st.expected(), 10);
        assert_eq!(st.received_count(), 5);
        assert_eq!(st.cumulative_lost_raw(), 5);
    }

    #[test]
    fn duplicates_count_once() {
        let mut st = ReceptionStats::new();
        assert!(st.update_on_packet(0, 0, 0));
        assert!(st.update_on_packet(1, 160, 165));
        assert!(!st.update_on_packet(1, 160, 170));
        assert_eq!(st.received_count(), 2);
        let jitter_before = st.jitter();
        assert!(!st.update_on_packet(0, 0, 400));
        assert_eq!(st.jitter(), jitter_before);
    }

    #[test]
    fn reordered_packet_keeps_highest() {
        let mut st = ReceptionStats::new();
        st.update_on_packet(0, 0, 0);
        st.update_on_packet(3, 480, 480);
        assert!(st.update_on_packet(1, 160, 500));
        assert_eq!(st.extended_highest_seq(), 3);
        assert_eq!(st.received_count(), 3);
    }

    #[test]
    fn reordered_across_wrap_lands_in_previous_cycle() {
        let mut st = ReceptionStats::new();
        st.update_on_packet(65534, 0, 0);
        st.update_on_packet(1, 480, 480); // wraps, cycle 1
        assert_eq!(st.extended_highest_seq(), 65537);
        // 65535 arrives late: previous cycle, still new.
        assert!(st.update_on_packet(65535, 160, 500));
        assert_eq!(st.extended_highest_seq(), 65537);
        assert_eq!(st.received_count(), 3);
    }

    #[test]
    fn lsr_dlsr_default_to_zero() {
        let st = ReceptionStats::new();
        assert_eq!(st.lsr(), 0);
        assert_eq!(st.dlsr(123_456), 0);
    }

    #[test]
    fn lsr_dlsr_after_sender_report() {
        let mut st = ReceptionStats::new();
        let ntp = 0x0001_0203_0405_0607u64;
        st.on_sender_report(ntp, 8000);
        assert_eq!(st.lsr(), 0x0203_0405);
        // One second later: 8000 units -> 65536.
        assert_eq!(st.dlsr(16_000), 65536);
    }

    #[test]
    fn snapshot_emits_both_report_sides() {
        let mut st = ReceptionStats::new();
        for i in 0..4u16 {
            st.update_on_packet(i, u32::from(i) * 160, u64::from(i) * 160);
        }
        let clocks = ClockSnapshot {
            ntp_timestamp: 1 << 32,
            rtp_timestamp: 640,
            now_units: 640,
        };
        let receiver = snapshot_parameters(&mut st, Side::Receiver, &clocks, 0);
        assert_eq!(receiver.len(), 6);
        assert!(receiver.iter().all(|p| p.side == Side::Receiver));
        let sender = snapshot_parameters(&mut st, Side::Sender, &clocks, 99);
        assert_eq!(sender.len(), 3);
        let count = sender
            .iter()
            .find(|p| p.code == codes::SENDER_PACKET_COUNT)
            .unwrap();
        assert_eq!(count.value_u64(), 99);
        let ntp = sender
            .iter()
            .find(|p| p.code == codes::NTP_TIMESTAMP)
            .unwrap();
        assert_eq!(ntp.value_u64(), 1 << 32);
    }
}
