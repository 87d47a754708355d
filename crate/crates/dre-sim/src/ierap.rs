//! The flagship anti-collision protocol: geometric slot draws, pairwise
//! collision resolution by success counter and estimated distance, duplicate
//! read avoidance, and end-of-round information sharing.

use crate::protocol::{
    LossAction, ReaderMode, ReaderProtocol, ReaderState, ServerMessage, WinAction,
};
use crate::sift::SlotDistribution;
use crate::ReaderId;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;

/// Flagship protocol behaviour.
///
/// Slot choices come from the geometric slot distribution over the round's
/// slot range; channels are drawn uniformly. A two-reader collision is won by
/// the reader with the lower published success counter (ties to the lower
/// id, adjudicated by the engine); the loser either sleeps (estimated
/// distance says the read disks conflict) or redraws a later slot and tries
/// again.
pub struct FlagshipProtocol {
    slot_dist: SlotDistribution,
    channels: u32,
    /// Test hook: preset (slot, channel) per reader id, bypassing the draw.
    forced_draws: Option<BTreeMap<ReaderId, (u32, u32)>>,
}

impl FlagshipProtocol {
    pub fn new(slot_dist: SlotDistribution, channels: u32) -> Self {
        FlagshipProtocol { slot_dist, channels, forced_draws: None }
    }

    /// Preset a reader's slot and channel at round start (applies every
    /// round); re-contention redraws still come from the distribution.
    pub fn with_forced_draws(mut self, draws: BTreeMap<ReaderId, (u32, u32)>) -> Self {
        self.forced_draws = Some(draws);
        self
    }
}

impl ReaderProtocol for FlagshipProtocol {
    fn name(&self) -> &'static str {
        "ierap"
    }

    fn uses_share_phase(&self) -> bool {
        true
    }

    fn resolves_pairwise(&self) -> bool {
        true
    }

    fn on_round_start(&self, reader: &mut ReaderState, msg: &ServerMessage, rng: &mut ChaCha8Rng) {
        let ServerMessage::RoundStart { max_slot, channels } = msg else {
            return;
        };
        debug_assert_eq!(*max_slot, self.slot_dist.slots());
        debug_assert_eq!(*channels, self.channels);
        if let Some(forced) = &self.forced_draws {
            if let Some(&(k, f)) = forced.get(&reader.id) {
                reader.slot_choice = k;
                reader.channel_choice = f;
                reader.mode = ReaderMode::Contending;
                return;
            }
        }
        reader.slot_choice = self.slot_dist.sample(rng);
        reader.channel_choice = if self.channels > 1 {
            rng.gen_range(1..=self.channels)
        } else {
            1
        };
        reader.mode = ReaderMode::Contending;
    }

    fn on_win(&self, _reader: &ReaderState, unknown_in_range: usize) -> WinAction {
        if unknown_in_range > 0 {
            WinAction::Read
        } else {
            WinAction::Leave
        }
    }

    fn on_contention_loss(
        &self,
        reader: &mut ReaderState,
        estimated_distance: f64,
        current_slot: u32,
        read_range: f64,
        rng: &mut ChaCha8Rng,
    ) -> LossAction {
        if estimated_distance <= 2.0 * read_range {
            // The rival's read disk can reach ours; yield for the round.
            return LossAction::SleepForRound;
        }
        // Far rival: redraw, bump one slot, and rejoin if time remains.
        let redrawn = self.slot_dist.sample(rng);
        let bumped = redrawn.saturating_add(1).min(self.slot_dist.slots());
        if bumped <= current_slot {
            LossAction::SleepForRound
        } else {
            reader.slot_choice = bumped;
            LossAction::Recontend { slot: bumped }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocol::SlotAction;
    use crate::sift::sift_distribution;
    use rand::SeedableRng;

    fn protocol(slots: u32, channels: u32) -> FlagshipProtocol {
        FlagshipProtocol::new(sift_distribution(slots, slots as u64).unwrap(), channels)
    }

    #[test]
    fn round_start_draw_matches_distribution() {
        // 100_000 draws of the slot choice against the closed form, per slot.
        let slots = 128u32;
        let proto = protocol(slots, 4);
        let expected = sift_distribution(slots, slots as u64).unwrap();
        let mut counts = vec![0u32; slots as usize];
        let msg = ServerMessage::RoundStart { max_slot: slots, channels: 4 };
        let n = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut reader = ReaderState::new(0);
        for _ in 0..n {
            proto.on_round_start(&mut reader, &msg, &mut rng);
            counts[(reader.slot_choice - 1) as usize] += 1;
            assert!((1..=4).contains(&reader.channel_choice));
            assert_eq!(reader.mode, ReaderMode::Contending);
        }
        for (i, p) in expected.probs().iter().enumerate() {
            let freq = f64::from(counts[i]) / f64::from(n);
            assert!((freq - p).abs() < 0.005, "slot {}: {freq} vs {p}", i + 1);
        }
    }

    #[test]
    fn beacons_only_at_own_slot() {
        let proto = protocol(8, 2);
        let mut reader = ReaderState::new(1);
        reader.slot_choice = 5;
        reader.mode = ReaderMode::Contending;
        assert_eq!(proto.on_slot(&reader, 4), SlotAction::Stay);
        assert_eq!(proto.on_slot(&reader, 5), SlotAction::Beacon);
        reader.mode = ReaderMode::Asleep;
        assert_eq!(proto.on_slot(&reader, 5), SlotAction::Stay);
    }

    #[test]
    fn unknown_tags_trigger_a_read() {
        let proto = protocol(8, 2);
        let reader = ReaderState::new(1);
        assert_eq!(proto.on_win(&reader, 3), WinAction::Read);
    }

    #[test]
    fn known_or_absent_tags_mean_leaving() {
        // Fully known and empty in-range sets both skip the read.
        let proto = protocol(8, 2);
        let reader = ReaderState::new(1);
        assert_eq!(proto.on_win(&reader, 0), WinAction::Leave);
    }

    #[test]
    fn near_loser_sleeps_for_the_round() {
        let proto = protocol(128, 4);
        let mut reader = ReaderState::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // Estimated distance 15 m <= 2 * 10 m: the loser yields.
        let action = proto.on_contention_loss(&mut reader, 15.0, 3, 10.0, &mut rng);
        assert_eq!(action, LossAction::SleepForRound);
    }

    #[test]
    fn far_loser_redraws_to_a_later_slot_or_sleeps() {
        let proto = protocol(128, 4);
        let read_range = 10.0;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for current_slot in [1u32, 64, 127] {
            for _ in 0..200 {
                let mut reader = ReaderState::new(2);
                match proto.on_contention_loss(&mut reader, 25.0, current_slot, read_range, &mut rng)
                {
                    LossAction::Recontend { slot } => {
                        assert!(slot > current_slot, "rejoined at slot {slot} <= {current_slot}");
                        assert!(slot <= 128);
                        assert_eq!(reader.slot_choice, slot);
                    }
                    LossAction::SleepForRound => {}
                }
            }
        }
    }

    #[test]
    fn far_loser_at_last_slot_always_sleeps() {
        let proto = protocol(128, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut reader = ReaderState::new(2);
            let action = proto.on_contention_loss(&mut reader, 25.0, 128, 10.0, &mut rng);
            assert_eq!(action, LossAction::SleepForRound);
        }
    }

    #[test]
    fn boundary_distance_counts_as_near() {
        // Exactly 2 * read_range is inclusive, matching the range predicates.
        let proto = protocol(128, 4);
        let mut reader = ReaderState::new(2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let action = proto.on_contention_loss(&mut reader, 20.0, 3, 10.0, &mut rng);
        assert_eq!(action, LossAction::SleepForRound);
    }

    #[test]
    fn forced_draws_override_round_start() {
        let proto =
            protocol(4, 4).with_forced_draws(BTreeMap::from([(1u32, (3u32, 2u32))]));
        let msg = ServerMessage::RoundStart { max_slot: 4, channels: 4 };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut reader = ReaderState::new(1);
        proto.on_round_start(&mut reader, &msg, &mut rng);
        assert_eq!((reader.slot_choice, reader.channel_choice), (3, 2));
        let mut other = ReaderState::new(2);
        proto.on_round_start(&mut other, &msg, &mut rng);
        assert!((1..=4).contains(&other.slot_choice));
    }
}
