//! Comparison protocols: four server-slotted schemes sharing the round
//! skeleton, plus the distributed contention-window scheme the engine drives
//! separately.
//!
//! None of them keeps tag knowledge or shares it (the contention-window
//! scheme shares locally, which the engine handles); winners always read.

use crate::protocol::{ReaderMode, ReaderProtocol, ReaderState, ServerMessage, WinAction};
use crate::sift::SlotDistribution;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Truncated geometric slot distribution over `slots` slots:
/// P(k) proportional to p * (1-p)^(k-1).
pub fn geometric_distribution(slots: u32, p: f64) -> SlotDistribution {
    let norm: f64 = 1.0 - (1.0 - p).powi(slots as i32);
    let probs = (1..=slots)
        .map(|k| p * (1.0 - p).powi((k - 1) as i32) / norm)
        .collect();
    SlotDistribution::from_probs(probs)
}

/// Uniform slot distribution over `slots` slots.
pub fn uniform_distribution(slots: u32) -> SlotDistribution {
    SlotDistribution::from_probs(vec![1.0 / f64::from(slots); slots as usize])
}

fn draw_uniform_channel(channels: u32, rng: &mut ChaCha8Rng) -> u32 {
    if channels > 1 {
        rng.gen_range(1..=channels)
    } else {
        1
    }
}

// ---------------------------------------------------------------------------
// Single-channel slotted scheme with clear-to-read frames
// ---------------------------------------------------------------------------

/// Uniform slot draw on one channel; collision-free beacons transmit a
/// clear-to-read frame and read; colliding readers are out for the round.
pub struct NfraProtocol {
    slot_dist: SlotDistribution,
}

impl NfraProtocol {
    pub fn new(slots: u32) -> Self {
        NfraProtocol { slot_dist: uniform_distribution(slots) }
    }
}

impl ReaderProtocol for NfraProtocol {
    fn name(&self) -> &'static str {
        "nfra"
    }

    fn sends_clear_frame(&self) -> bool {
        true
    }

    fn on_round_start(&self, reader: &mut ReaderState, _msg: &ServerMessage, rng: &mut ChaCha8Rng) {
        reader.slot_choice = self.slot_dist.sample(rng);
        reader.channel_choice = 1;
        reader.mode = ReaderMode::Contending;
    }

    fn on_win(&self, _reader: &ReaderState, _unknown_in_range: usize) -> WinAction {
        WinAction::Read
    }
}

// ---------------------------------------------------------------------------
// Geometric slot draw, multi-channel
// ---------------------------------------------------------------------------

/// Geometric slot distribution (most mass on early slots) with a uniform
/// channel draw.
pub struct GdraProtocol {
    slot_dist: SlotDistribution,
    channels: u32,
}

impl GdraProtocol {
    pub fn new(slots: u32, geometric_p: f64, channels: u32) -> Self {
        GdraProtocol { slot_dist: geometric_distribution(slots, geometric_p), channels }
    }
}

impl ReaderProtocol for GdraProtocol {
    fn name(&self) -> &'static str {
        "gdra"
    }

    fn on_round_start(&self, reader: &mut ReaderState, _msg: &ServerMessage, rng: &mut ChaCha8Rng) {
        reader.slot_choice = self.slot_dist.sample(rng);
        reader.channel_choice = draw_uniform_channel(self.channels, rng);
        reader.mode = ReaderMode::Contending;
    }

    fn on_win(&self, _reader: &ReaderState, _unknown_in_range: usize) -> WinAction {
        WinAction::Read
    }
}

// ---------------------------------------------------------------------------
// Uniform slot and channel draws
// ---------------------------------------------------------------------------

/// Uniform slot draw plus a per-round uniform channel draw; beacons collide
/// only within a channel.
pub struct Frca1Protocol {
    slot_dist: SlotDistribution,
    channels: u32,
}

impl Frca1Protocol {
    pub fn new(slots: u32, channels: u32) -> Self {
        Frca1Protocol { slot_dist: uniform_distribution(slots), channels }
    }
}

impl ReaderProtocol for Frca1Protocol {
    fn name(&self) -> &'static str {
        "frca1"
    }

    fn on_round_start(&self, reader: &mut ReaderState, _msg: &ServerMessage, rng: &mut ChaCha8Rng) {
        reader.slot_choice = self.slot_dist.sample(rng);
        reader.channel_choice = draw_uniform_channel(self.channels, rng);
        reader.mode = ReaderMode::Contending;
    }

    fn on_win(&self, _reader: &ReaderState, _unknown_in_range: usize) -> WinAction {
        WinAction::Read
    }
}

/// Like [`Frca1Protocol`], but same-slot winners on different channels whose
/// read disks overlap are reduced to the lowest id; the others keep their
/// channel allocation without reading.
pub struct Frca2Protocol {
    inner: Frca1Protocol,
}

impl Frca2Protocol {
    pub fn new(slots: u32, channels: u32) -> Self {
        Frca2Protocol { inner: Frca1Protocol::new(slots, channels) }
    }
}

impl ReaderProtocol for Frca2Protocol {
    fn name(&self) -> &'static str {
        "frca2"
    }

    fn restricts_overlapping_winners(&self) -> bool {
        true
    }

    fn on_round_start(&self, reader: &mut ReaderState, msg: &ServerMessage, rng: &mut ChaCha8Rng) {
        self.inner.on_round_start(reader, msg, rng);
    }

    fn on_win(&self, _reader: &ReaderState, _unknown_in_range: usize) -> WinAction {
        WinAction::Read
    }
}

// ---------------------------------------------------------------------------
// Distributed contention-window scheme
// ---------------------------------------------------------------------------

/// Parameters for the serverless scheme: repeated contention windows of
/// `window` backoff ticks on a single data channel, with local sharing of
/// read tags after each successful read.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WindowParams {
    /// Backoff ticks per contention window.
    pub window: u32,
    /// Neighbours within this distance receive a successful reader's tags.
    pub sharing_distance: f64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn geometric_first_slot_mass() {
        // P(1) = p / (1 - (1-p)^slots); at p = 0.5 and 128 slots this is
        // 0.5 to within rounding.
        let dist = geometric_distribution(128, 0.5);
        let want = 0.5 / (1.0 - 0.5f64.powi(128));
        assert!((dist.probs()[0] - want).abs() < 1e-12);
        let sum: f64 = dist.probs().iter().sum();
        assert!((sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn geometric_sampling_matches_mass() {
        let dist = geometric_distribution(128, 0.5);
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let n = 100_000u32;
        let mut first = 0u32;
        for _ in 0..n {
            if dist.sample(&mut rng) == 1 {
                first += 1;
            }
        }
        let freq = f64::from(first) / f64::from(n);
        assert!((freq - 0.5).abs() < 0.005, "slot-1 frequency {freq}");
    }

    #[test]
    fn uniform_draws_cover_all_slots() {
        let proto = NfraProtocol::new(128);
        let msg = ServerMessage::RoundStart { max_slot: 128, channels: 1 };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut reader = ReaderState::new(0);
        let mut counts = vec![0u32; 128];
        for _ in 0..128_000 {
            proto.on_round_start(&mut reader, &msg, &mut rng);
            counts[(reader.slot_choice - 1) as usize] += 1;
            assert_eq!(reader.channel_choice, 1);
        }
        for c in counts {
            // Expect 1000 per slot; allow a generous band.
            assert!((700..=1300).contains(&c), "slot count {c}");
        }
    }

    #[test]
    fn channel_draws_span_the_range() {
        let proto = Frca1Protocol::new(128, 4);
        let msg = ServerMessage::RoundStart { max_slot: 128, channels: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mut reader = ReaderState::new(0);
        let mut seen = [false; 4];
        for _ in 0..1000 {
            proto.on_round_start(&mut reader, &msg, &mut rng);
            seen[(reader.channel_choice - 1) as usize] = true;
        }
        assert!(seen.iter().all(|s| *s));
    }

    #[test]
    fn baseline_winners_always_read() {
        let reader = ReaderState::new(0);
        assert_eq!(NfraProtocol::new(8).on_win(&reader, 0), WinAction::Read);
        assert_eq!(GdraProtocol::new(8, 0.5, 2).on_win(&reader, 0), WinAction::Read);
        assert_eq!(Frca1Protocol::new(8, 2).on_win(&reader, 0), WinAction::Read);
        assert_eq!(Frca2Protocol::new(8, 2).on_win(&reader, 0), WinAction::Read);
    }

    #[test]
    fn only_the_guarded_variant_restricts_winners() {
        assert!(!Frca1Protocol::new(8, 2).restricts_overlapping_winners());
        assert!(Frca2Protocol::new(8, 2).restricts_overlapping_winners());
        assert!(NfraProtocol::new(8).sends_clear_frame());
        assert!(!GdraProtocol::new(8, 0.5, 2).sends_clear_frame());
    }
}
