//! Shared protocol plumbing: round timing, server messages, reader state,
//! and the end-of-round information-sharing store.
//!
//! The engine drives rounds; protocol implementations only decide *what* a
//! reader does in response to each message. All mutation of world state
//! (channel occupancy, tag knowledge, energy) happens in the engine.

use crate::{ReaderId, TagId};
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("information sharing store already closed for this round")]
    StoreClosed,
}

// ---------------------------------------------------------------------------
// Timing
// ---------------------------------------------------------------------------

/// Durations (seconds) and the slot count that shape one round.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TimingParams {
    /// Contention slot length.
    pub slot: f64,
    /// One tag-reading operation.
    pub read: f64,
    /// Reader beacon.
    pub beacon: f64,
    /// Round-opening broadcast (slot range + channel range).
    pub msg_a: f64,
    /// Per-slot marker broadcast in the flagship protocol.
    pub msg_c: f64,
    /// Share-phase broadcast closing a round.
    pub msg_sh: f64,
    /// Per-slot marker in the slotted baselines.
    pub oc: f64,
    /// Clear-to-read frame a winning baseline reader transmits.
    pub of_frame: f64,
    /// Carrier-sense/beacon tick in the contention-window baseline.
    pub window_beacon: f64,
    /// Transfer time per shared record (0 = sharing is free).
    pub isp_record: f64,
    /// Slots per round (the broadcast slot range upper bound).
    pub slots_per_round: u32,
}

impl Default for TimingParams {
    fn default() -> Self {
        TimingParams {
            slot: 0.005,
            read: 0.46,
            beacon: 0.0003,
            msg_a: 0.00283,
            msg_c: 0.002,
            msg_sh: 0.001,
            oc: 0.001,
            of_frame: 0.0003,
            window_beacon: 0.005,
            isp_record: 0.0,
            slots_per_round: 128,
        }
    }
}

impl TimingParams {
    /// How many contention slots one read blocks a channel for.
    pub fn read_occupancy_slots(&self) -> u32 {
        (self.read / self.slot).ceil() as u32
    }
}

// ---------------------------------------------------------------------------
// Server messages
// ---------------------------------------------------------------------------

/// Broadcasts the coordinating server sends during a round.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ServerMessage {
    /// Opens a round: slot range [1, max_slot], channel range [1, channels].
    RoundStart { max_slot: u32, channels: u32 },
    /// Marks the start of contention slot `slot`.
    SlotMark { slot: u32 },
    /// Wakes every reader and opens the information-sharing phase.
    SharePhase,
}

// ---------------------------------------------------------------------------
// Reader state
// ---------------------------------------------------------------------------

/// What a reader is doing right now.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReaderMode {
    /// Awake, between rounds.
    Idle,
    /// Waiting for its chosen slot to beacon.
    Contending,
    /// Mid-read, holding a channel.
    Reading,
    /// Won a channel but has nothing new to read; releases at the next
    /// slot mark, then sleeps.
    Leaving,
    /// Out for the rest of the round.
    Asleep,
}

/// Per-reader protocol state carried across rounds.
#[derive(Clone, Debug)]
pub struct ReaderState {
    pub id: ReaderId,
    /// Chosen contention slot for the current round (1-based).
    pub slot_choice: u32,
    /// Chosen channel for the current round (1-based).
    pub channel_choice: u32,
    /// Lifetime count of completed read operations.
    pub successful_reads: u64,
    /// Tag ids this reader knows, from its own reads and from sharing.
    pub known_tags: BTreeSet<TagId>,
    pub mode: ReaderMode,
    /// Records queued for the next share phase.
    pub pending_share: Vec<IspRecord>,
}

impl ReaderState {
    pub fn new(id: ReaderId) -> Self {
        ReaderState {
            id,
            slot_choice: 0,
            channel_choice: 0,
            successful_reads: 0,
            known_tags: BTreeSet::new(),
            mode: ReaderMode::Idle,
            pending_share: Vec::new(),
        }
    }
}

// ---------------------------------------------------------------------------
// Information sharing
// ---------------------------------------------------------------------------

/// One reader's contribution to the share phase: the tags it just read and
/// its updated success counter.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IspRecord {
    pub reporter: ReaderId,
    pub tag_ids: Vec<TagId>,
    pub s_count: u64,
}

/// Round-scoped store the share phase distributes to every reader.
///
/// Append-only while the round is open; closed by the share-phase broadcast.
/// Duplicate (reporter, tag) pairs within a round are kept once.
#[derive(Clone, Debug, Default)]
pub struct IspStore {
    records: Vec<IspRecord>,
    seen: BTreeSet<(ReaderId, TagId)>,
    closed: bool,
}

impl IspStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Reset for a new round.
    pub fn open_round(&mut self) {
        self.records.clear();
        self.seen.clear();
        self.closed = false;
    }

    /// Mark the share phase as started; later publishes are contract faults.
    pub fn close(&mut self) {
        self.closed = true;
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[IspRecord] {
        &self.records
    }

    /// Queue a record for distribution. Duplicate (reporter, tag) pairs are
    /// dropped; publishing after the share phase opened is an error.
    pub fn publish(&mut self, record: IspRecord) -> Result<(), ProtocolError> {
        if self.closed {
            return Err(ProtocolError::StoreClosed);
        }
        let mut tags = Vec::with_capacity(record.tag_ids.len());
        for t in record.tag_ids {
            if self.seen.insert((record.reporter, t)) {
                tags.push(t);
            }
        }
        self.records.push(IspRecord {
            reporter: record.reporter,
            tag_ids: tags,
            s_count: record.s_count,
        });
        Ok(())
    }

    /// Merge every published tag id into `known`, returning how many were new.
    pub fn merge_into(&self, known: &mut BTreeSet<TagId>) -> usize {
        let mut added = 0;
        for rec in &self.records {
            for t in &rec.tag_ids {
                if known.insert(*t) {
                    added += 1;
                }
            }
        }
        added
    }

    /// Latest published success counters, by reporter.
    pub fn published_counters(&self) -> BTreeMap<ReaderId, u64> {
        let mut out = BTreeMap::new();
        for rec in &self.records {
            let e = out.entry(rec.reporter).or_insert(0u64);
            *e = (*e).max(rec.s_count);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Protocol interface
// ---------------------------------------------------------------------------

/// What a reader does when its slot mark arrives.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SlotAction {
    /// Nothing this slot.
    Stay,
    /// Transmit a beacon on the reader's chosen channel.
    Beacon,
}

/// Disposition after winning a channel, given the tags in range.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WinAction {
    /// Start a read operation.
    Read,
    /// Nothing new in range: hold until the next slot mark, then sleep.
    Leave,
}

/// Disposition for the loser of a two-reader contention.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossAction {
    /// Give up until the next round.
    SleepForRound,
    /// Re-enter contention at a later slot.
    Recontend { slot: u32 },
}

/// Decision logic for the slotted protocols. Callbacks never mutate world
/// state; they update only the reader's own choices and return declarative
/// actions the engine applies.
pub trait ReaderProtocol {
    /// Protocol name as it appears in configs and reports.
    fn name(&self) -> &'static str;

    /// Whether rounds end with a share phase that distributes tag knowledge.
    fn uses_share_phase(&self) -> bool {
        false
    }

    /// Whether a two-reader collision is resolved pairwise instead of
    /// failing both contenders.
    fn resolves_pairwise(&self) -> bool {
        false
    }

    /// Whether same-slot winners on different channels with overlapping read
    /// disks are reduced to the lowest id.
    fn restricts_overlapping_winners(&self) -> bool {
        false
    }

    /// Whether winners transmit a clear-to-read frame before reading.
    fn sends_clear_frame(&self) -> bool {
        false
    }

    /// Draw this round's slot and channel and enter contention.
    fn on_round_start(&self, reader: &mut ReaderState, msg: &ServerMessage, rng: &mut ChaCha8Rng);

    /// React to a slot mark.
    fn on_slot(&self, reader: &ReaderState, slot: u32) -> SlotAction {
        if reader.mode == ReaderMode::Contending && reader.slot_choice == slot {
            SlotAction::Beacon
        } else {
            SlotAction::Stay
        }
    }

    /// Winner disposition given how many in-range tags are unknown to it.
    fn on_win(&self, reader: &ReaderState, unknown_in_range: usize) -> WinAction;

    /// Loser disposition after a pairwise contention; only called when
    /// [`resolves_pairwise`](Self::resolves_pairwise) is true.
    fn on_contention_loss(
        &self,
        _reader: &mut ReaderState,
        _estimated_distance: f64,
        _current_slot: u32,
        _read_range: f64,
        _rng: &mut ChaCha8Rng,
    ) -> LossAction {
        LossAction::SleepForRound
    }

    /// Close out the round (share-phase reaction happens in the engine).
    fn on_round_end(&self, reader: &mut ReaderState) {
        if reader.mode != ReaderMode::Idle {
            reader.mode = ReaderMode::Idle;
        }
    }
}
