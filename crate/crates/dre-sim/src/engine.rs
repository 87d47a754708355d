//! Deterministic discrete-event core.
//!
//! The engine owns the world (reader/tag positions, reader state, the shared
//! information store), advances a floating-point clock through rounds or
//! contention windows, applies protocol decisions, charges energy for every
//! transmission/reception/read, and optionally records an event log from
//! which the per-reader energy totals can be reproduced exactly.

use crate::baselines::{Frca1Protocol, Frca2Protocol, GdraProtocol, NfraProtocol, WindowParams};
use crate::config::{ProtocolKind, ScenarioConfig, WaitingScope};
use crate::geometry::{
    self, distance, place_uniform, step_mobility, within, MobilityModel, Point, WaypointState,
};
use crate::ierap::FlagshipProtocol;
use crate::metrics::{EnergyLedger, MetricsReport, RoundMetrics};
use crate::protocol::{
    IspRecord, IspStore, LossAction, ReaderMode, ReaderProtocol, ReaderState, ServerMessage,
    SlotAction, TimingParams, WinAction,
};
use crate::radio::{
    detect_beacon_collisions, estimate_distance, received_interference, BeaconEvent,
};
use crate::sift::sift_distribution;
use crate::{ReaderId, TagId};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, BTreeSet};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use thiserror::Error;

/// Failures the engine can report while constructing or running a scenario.
#[derive(Debug, Error)]
pub enum SimFault {
    /// The scenario parameters cannot produce a runnable world.
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    /// A protocol implementation broke an engine-enforced contract.
    #[error("contract violation: {0}")]
    ContractViolation(String),
}

// ---------------------------------------------------------------------------
// Random substreams
// ---------------------------------------------------------------------------

/// Stream tag for reader placement.
pub const STREAM_READERS: u64 = 1;
/// Stream tag for tag placement.
pub const STREAM_TAGS: u64 = 2;
/// Stream tag for per-round, per-reader contention draws.
pub const STREAM_DRAW: u64 = 3;
/// Stream tag for mobility decisions.
pub const STREAM_MOBILITY: u64 = 4;
/// Stream tag for per-reader backoff draws in the windowed protocol.
pub const STREAM_WINDOW: u64 = 5;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives an independent named random stream from the scenario seed.
///
/// Draws on one stream never disturb any other stream, so per-reader and
/// per-round decisions stay reproducible regardless of what else runs.
pub fn substream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix64(seed);
    for &p in parts {
        h = splitmix64(h ^ p);
    }
    ChaCha8Rng::seed_from_u64(h)
}

// ---------------------------------------------------------------------------
// Event log
// ---------------------------------------------------------------------------

/// One observable thing that happened to one reader.
#[derive(Clone, Debug, PartialEq)]
pub enum EventKind {
    /// Received the round-opening broadcast.
    MsgA,
    /// Listened to a per-slot marker (its own slot's, or the one a departing
    /// reader waits for before releasing its channel).
    MsgC { slot: u32 },
    /// Transmitted a contention beacon.
    Beacon { slot: u32, channel: u32 },
    /// Beaconed into a collision of `group_size` readers.
    Collision { slot: u32, channel: u32, group_size: u32 },
    /// Came out of contention holding the channel.
    Win { slot: u32, channel: u32 },
    /// Began a read operation.
    ReadStart { channel: u32, tags_in_range: u32 },
    /// Finished a read operation; `new_tags` were previously unknown to the
    /// reading reader.
    ReadEnd { new_tags: u32 },
    /// Won but declined to read because every tag in range was already known.
    SkipKnown { slot: u32, channel: u32 },
    /// Released a held channel for reuse.
    Release { channel: u32 },
    /// Gave up on the current round or window.
    Sleep,
    /// Received the share-phase broadcast and published `published` records.
    Sh { published: u32 },
    /// Learned `new_tags` previously unknown tags from other readers.
    IspMerge { new_tags: u32 },
}

/// An event stamped with the round (or window) index, absolute time, and the
/// reader it happened to.
#[derive(Clone, Debug, PartialEq)]
pub struct EventRecord {
    pub round: u32,
    pub t: f64,
    pub reader: ReaderId,
    pub kind: EventKind,
}

impl EventRecord {
    fn line(&self) -> String {
        let kind = match &self.kind {
            EventKind::MsgA => "kind=msg_a".to_string(),
            EventKind::MsgC { slot } => format!("kind=msg_c slot={slot}"),
            EventKind::Beacon { slot, channel } => {
                format!("kind=beacon slot={slot} channel={channel}")
            }
            EventKind::Collision { slot, channel, group_size } => {
                format!("kind=collision slot={slot} channel={channel} size={group_size}")
            }
            EventKind::Win { slot, channel } => format!("kind=win slot={slot} channel={channel}"),
            EventKind::ReadStart { channel, tags_in_range } => {
                format!("kind=read_start channel={channel} tags={tags_in_range}")
            }
            EventKind::ReadEnd { new_tags } => format!("kind=read_end new={new_tags}"),
            EventKind::SkipKnown { slot, channel } => {
                format!("kind=skip_known slot={slot} channel={channel}")
            }
            EventKind::Release { channel } => format!("kind=release channel={channel}"),
            EventKind::Sleep => "kind=sleep".to_string(),
            EventKind::Sh { published } => format!("kind=sh published={published}"),
            EventKind::IspMerge { new_tags } => format!("kind=isp_merge new={new_tags}"),
        };
        format!("round={} t={} reader={} {}", self.round, self.t, self.reader, kind)
    }
}

/// Chronological record of everything that happened during a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct EventLog {
    records: Vec<EventRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        EventLog::default()
    }

    pub fn push(&mut self, record: EventRecord) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[EventRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Renders the log as one line per event for file output.
    pub fn to_lines(&self) -> String {
        let mut out = String::new();
        for rec in &self.records {
            out.push_str(&rec.line());
            out.push('\n');
        }
        out
    }

    fn sort_chronologically(&mut self) {
        // Stable: simultaneous events keep their insertion order, which is
        // the order the engine processed (and charged energy for) them.
        self.records
            .sort_by(|a, b| a.t.partial_cmp(&b.t).expect("event times are never NaN"));
    }
}

/// Recomputes every reader's energy from an event log alone.
///
/// Each event kind that costs energy maps to a duration from the scenario's
/// timing table and one of the three power draws; replaying a log therefore
/// reproduces the ledger the engine built while simulating, bit for bit.
pub fn replay_energy(log: &EventLog, config: &ScenarioConfig) -> BTreeMap<ReaderId, f64> {
    let t = config.timing();
    let p = config.power();
    let slot_marker = if config.protocol == ProtocolKind::Ierap { t.msg_c } else { t.oc };
    let beacon = if config.protocol == ProtocolKind::Dmrcp { t.window_beacon } else { t.beacon };
    let mut ledger = EnergyLedger::new();
    for rec in log.records() {
        match &rec.kind {
            EventKind::MsgA => ledger.add_receive(rec.reader, t.msg_a),
            EventKind::MsgC { .. } => ledger.add_receive(rec.reader, slot_marker),
            EventKind::Beacon { .. } => ledger.add_send(rec.reader, beacon),
            EventKind::Win { .. } => {
                if config.protocol == ProtocolKind::Nfra {
                    ledger.add_send(rec.reader, t.of_frame);
                }
            }
            EventKind::ReadStart { .. } => ledger.add_read(rec.reader, t.read),
            EventKind::Sh { published } => {
                ledger.add_receive(rec.reader, t.msg_sh);
                if *published > 0 && t.isp_record > 0.0 {
                    ledger.add_send(rec.reader, t.isp_record);
                }
            }
            EventKind::Collision { .. }
            | EventKind::ReadEnd { .. }
            | EventKind::SkipKnown { .. }
            | EventKind::Release { .. }
            | EventKind::Sleep
            | EventKind::IspMerge { .. } => {}
        }
    }
    ledger.per_reader(&p)
}

// ---------------------------------------------------------------------------
// Engine
// ---------------------------------------------------------------------------

enum Driver {
    /// Server-coordinated slotted rounds (flagship and slotted baselines).
    Slotted(Box<dyn ReaderProtocol>),
    /// Self-timed contention windows with carrier sensing.
    Window(WindowParams),
}

/// A channel hold: `reader` keeps a channel busy for slots `from..=to`.
struct Hold {
    reader: usize,
    from: u32,
    to: u32,
}

/// A read operation in flight.
struct PendingRead {
    reader: usize,
    start: f64,
    end: f64,
    tags: Vec<TagId>,
}

/// What a batch of completed reads contributed.
struct CompletionBatch {
    completed: u32,
    new_unique: u32,
    last_end: f64,
}

/// Tracks when each reader first acquired tags in a round, and the global
/// inter-acquisition intervals, for the two waiting-time definitions.
fn note_acquisition(
    last_acq: &mut BTreeMap<usize, f64>,
    interval_sum: &mut f64,
    interval_count: &mut u64,
    first_acq: &mut BTreeMap<usize, f64>,
    reader: usize,
    t_abs: f64,
    round_start: f64,
) {
    first_acq.entry(reader).or_insert((t_abs - round_start).max(0.0));
    let last = last_acq.get(&reader).copied().unwrap_or(0.0);
    *interval_sum += t_abs - last;
    *interval_count += 1;
    last_acq.insert(reader, t_abs);
}

/// Deterministic simulator for one scenario.
pub struct Engine {
    config: ScenarioConfig,
    timing: TimingParams,
    driver: Driver,
    readers: Vec<ReaderState>,
    reader_pos: Vec<Point>,
    waypoints: Vec<Option<WaypointState>>,
    tag_pos: Vec<Point>,
    isp: IspStore,
    /// Success counters as last published at a share phase (flagship only).
    published_s: BTreeMap<ReaderId, u64>,
    ledger: EnergyLedger,
    events: Option<EventLog>,
    clock: f64,
    round_index: u32,
    global_known: BTreeSet<TagId>,
    redundant_reads: u64,
    per_round: Vec<RoundMetrics>,
    /// Per-reader time of the most recent acquisition (global waiting scope).
    last_acq: BTreeMap<usize, f64>,
    waiting_interval_sum: f64,
    waiting_interval_count: u64,
    /// Windowed-driver state: per-reader backoff and mobility streams plus
    /// reads still in flight across window boundaries.
    window_rngs: Vec<ChaCha8Rng>,
    window_mobility_rngs: Vec<ChaCha8Rng>,
    in_flight: Vec<PendingRead>,
}

impl Engine {
    /// Builds the world for a validated scenario. Set `log_events` to record
    /// an event log (costs memory proportional to activity).
    pub fn new(config: ScenarioConfig, log_events: bool) -> Result<Engine, SimFault> {
        config
            .validate()
            .map_err(|e| SimFault::InvalidScenario(e.to_string()))?;
        let driver = match config.protocol {
            ProtocolKind::Ierap => {
                let dist = sift_distribution(config.slots, config.sift_population())
                    .map_err(|e| SimFault::InvalidScenario(e.to_string()))?;
                Driver::Slotted(Box::new(FlagshipProtocol::new(dist, config.channels)))
            }
            ProtocolKind::Nfra => Driver::Slotted(Box::new(NfraProtocol::new(config.slots))),
            ProtocolKind::Gdra => Driver::Slotted(Box::new(GdraProtocol::new(
                config.slots,
                config.gdra_p,
                config.channels,
            ))),
            ProtocolKind::Frca1 => {
                Driver::Slotted(Box::new(Frca1Protocol::new(config.slots, config.channels)))
            }
            ProtocolKind::Frca2 => {
                Driver::Slotted(Box::new(Frca2Protocol::new(config.slots, config.channels)))
            }
            ProtocolKind::Dmrcp => Driver::Window(WindowParams {
                window: config.dmrcp_cw,
                sharing_distance: config.sharing_distance(),
            }),
        };
        let arena = config.arena();
        let mut reader_rng = substream(config.seed, &[STREAM_READERS]);
        let reader_pos = place_uniform(config.readers as usize, &arena, &mut reader_rng);
        let mut tag_rng = substream(config.seed, &[STREAM_TAGS]);
        let tag_pos = place_uniform(config.tags as usize, &arena, &mut tag_rng);
        Ok(Engine::assemble(config, driver, reader_pos, tag_pos, log_events))
    }

    /// Builds a world from explicit positions and a caller-supplied slotted
    /// protocol, for tests that need full control over geometry and draws.
    pub fn with_parts(
        config: ScenarioConfig,
        protocol: Box<dyn ReaderProtocol>,
        reader_pos: Vec<Point>,
        tag_pos: Vec<Point>,
        log_events: bool,
    ) -> Result<Engine, SimFault> {
        config
            .validate()
            .map_err(|e| SimFault::InvalidScenario(e.to_string()))?;
        if reader_pos.len() != config.readers as usize {
            return Err(SimFault::InvalidScenario(format!(
                "{} reader positions supplied for {} readers",
                reader_pos.len(),
                config.readers
            )));
        }
        if tag_pos.len() != config.tags as usize {
            return Err(SimFault::InvalidScenario(format!(
                "{} tag positions supplied for {} tags",
                tag_pos.len(),
                config.tags
            )));
        }
        Ok(Engine::assemble(config, Driver::Slotted(protocol), reader_pos, tag_pos, log_events))
    }

    fn assemble(
        config: ScenarioConfig,
        driver: Driver,
        reader_pos: Vec<Point>,
        tag_pos: Vec<Point>,
        log_events: bool,
    ) -> Engine {
        let n = reader_pos.len();
        let readers = (0..n).map(|i| ReaderState::new(i as ReaderId)).collect();
        let (window_rngs, window_mobility_rngs) = if matches!(driver, Driver::Window(_)) {
            (
                (0..n).map(|i| substream(config.seed, &[STREAM_WINDOW, i as u64])).collect(),
                (0..n).map(|i| substream(config.seed, &[STREAM_MOBILITY, i as u64])).collect(),
            )
        } else {
            (Vec::new(), Vec::new())
        };
        let timing = config.timing();
        Engine {
            config,
            timing,
            driver,
            readers,
            reader_pos,
            waypoints: vec![None; n],
            tag_pos,
            isp: IspStore::new(),
            published_s: BTreeMap::new(),
            ledger: EnergyLedger::new(),
            events: log_events.then(EventLog::new),
            clock: 0.0,
            round_index: 0,
            global_known: BTreeSet::new(),
            redundant_reads: 0,
            per_round: Vec::new(),
            last_acq: BTreeMap::new(),
            waiting_interval_sum: 0.0,
            waiting_interval_count: 0,
            window_rngs,
            window_mobility_rngs,
            in_flight: Vec::new(),
        }
    }

    fn push_event(events: &mut Option<EventLog>, round: u32, t: f64, reader: usize, kind: EventKind) {
        if let Some(log) = events {
            log.push(EventRecord { round, t, reader: reader as ReaderId, kind });
        }
    }

    fn tags_in_range(&self, reader: usize) -> Vec<TagId> {
        let pos = self.reader_pos[reader];
        self.tag_pos
            .iter()
            .enumerate()
            .filter(|(_, &tp)| within(pos, tp, self.config.read_range))
            .map(|(id, _)| id as TagId)
            .collect()
    }

    /// Runs the whole scenario.
    pub fn run(&mut self) -> Result<(), SimFault> {
        for _ in 0..self.config.rounds {
            self.step()?;
        }
        self.finalize();
        Ok(())
    }

    /// Advances the simulation by one round (slotted) or one window.
    pub fn step(&mut self) -> Result<(), SimFault> {
        match &self.driver {
            Driver::Slotted(_) => self.run_round(),
            Driver::Window(p) => {
                let params = *p;
                self.run_window(params)
            }
        }
    }

    /// Completes any still-running reads and sorts the event log.
    fn finalize(&mut self) {
        if let Driver::Window(p) = &self.driver {
            let params = *p;
            if !self.in_flight.is_empty() {
                let round = self.round_index;
                let windows_end = self.clock;
                let mut first_acq = BTreeMap::new();
                let batch = self.complete_window_reads(
                    f64::INFINITY,
                    round.saturating_sub(1),
                    windows_end,
                    &params,
                    &mut first_acq,
                );
                if batch.last_end > self.clock {
                    self.clock = batch.last_end;
                }
                if let Some(last) = self.per_round.last_mut() {
                    last.successful_reads += batch.completed;
                    last.new_unique_tags += batch.new_unique;
                }
            }
        }
        if let Some(log) = &mut self.events {
            log.sort_chronologically();
        }
    }

    /// Consumes the engine, producing the metrics report and the event log
    /// (empty when logging was disabled).
    pub fn into_output(self) -> (MetricsReport, EventLog) {
        let n = self.readers.len();
        let elapsed = self.clock;
        let successful_reads: u64 = self.readers.iter().map(|r| r.successful_reads).sum();
        let acquisitions: u64 = self.readers.iter().map(|r| r.known_tags.len() as u64).sum();
        let avg_waiting = match self.config.waiting_scope {
            WaitingScope::Round => {
                let samples = (n as u64) * (self.per_round.len() as u64);
                if samples == 0 {
                    0.0
                } else {
                    let total: f64 = self.per_round.iter().map(|r| r.waiting_s).sum();
                    total / samples as f64
                }
            }
            WaitingScope::Global => {
                let mut sum = self.waiting_interval_sum;
                let mut count = self.waiting_interval_count;
                for i in 0..n {
                    if !self.last_acq.contains_key(&i) {
                        sum += elapsed;
                        count += 1;
                    }
                }
                if count == 0 { 0.0 } else { sum / count as f64 }
            }
        };
        let avg_time_per_tag = if n == 0 {
            0.0
        } else {
            let per_reader: f64 = self
                .readers
                .iter()
                .map(|r| {
                    if r.known_tags.is_empty() {
                        elapsed
                    } else {
                        elapsed / r.known_tags.len() as f64
                    }
                })
                .sum();
            per_reader / n as f64
        };
        let power = self.config.power();
        let report = MetricsReport {
            protocol: self.config.protocol.as_str().to_string(),
            readers: self.config.readers,
            channels: self.config.channels,
            seed: self.config.seed,
            rounds: self.per_round.len() as u32,
            successful_reads,
            redundant_reads: self.redundant_reads,
            unique_tags_known: self.global_known.len() as u64,
            elapsed_s: elapsed,
            throughput_rps: MetricsReport::rate(successful_reads, elapsed),
            avg_waiting_time_s: avg_waiting,
            acquisitions,
            acquisition_rate_per_s: MetricsReport::rate(acquisitions, elapsed),
            avg_time_per_tag_s: avg_time_per_tag,
            network_energy_j: self.ledger.network_energy(&power),
            reader_energy_j: self.ledger.per_reader(&power),
            per_round: self.per_round,
        };
        (report, self.events.unwrap_or_default())
    }

    // -----------------------------------------------------------------------
    // Slotted rounds
    // -----------------------------------------------------------------------

    fn run_round(&mut self) -> Result<(), SimFault> {
        let round = self.round_index;
        let round_start = self.clock;
        let n = self.readers.len();
        let t = self.timing;
        let Driver::Slotted(proto) = &self.driver else {
            unreachable!("windowed driver has no slotted rounds");
        };
        let share_phase = proto.uses_share_phase();
        let slot_msg = if share_phase { t.msg_c } else { t.oc };
        let channels = self.config.channels as usize;
        let interference = self.config.interference_range;
        let occupancy_slots = t.read_occupancy_slots();
        let radio = self.config.radio();
        let noise = self.config.interference_noise;

        let mut rngs: Vec<ChaCha8Rng> = (0..n)
            .map(|i| substream(self.config.seed, &[STREAM_DRAW, round as u64, i as u64]))
            .collect();

        self.isp.open_round();

        // Round-opening broadcast: every reader listens, then draws its slot
        // and channel for this round.
        let open = ServerMessage::RoundStart {
            max_slot: t.slots_per_round,
            channels: self.config.channels,
        };
        for i in 0..n {
            proto.on_round_start(&mut self.readers[i], &open, &mut rngs[i]);
            self.ledger.add_receive(i as ReaderId, t.msg_a);
            Self::push_event(&mut self.events, round, round_start, i, EventKind::MsgA);
        }
        self.clock += t.msg_a;

        let mut by_slot: BTreeMap<u32, Vec<usize>> = BTreeMap::new();
        for i in 0..n {
            if self.readers[i].mode == ReaderMode::Contending {
                let k = self.readers[i].slot_choice;
                if k == 0 || k > t.slots_per_round {
                    return Err(SimFault::ContractViolation(format!(
                        "reader {i} drew slot {k} outside 1..={}",
                        t.slots_per_round
                    )));
                }
                by_slot.entry(k).or_default().push(i);
            }
        }

        // Channel occupancy; index 0 unused so channel numbers index directly.
        let mut occupancy: Vec<Vec<Hold>> = (0..=channels).map(|_| Vec::new()).collect();
        let mut release_next_slot: BTreeMap<u32, Vec<(usize, u32)>> = BTreeMap::new();
        let mut release_at_end: Vec<(usize, u32)> = Vec::new();
        let mut pending_reads: Vec<PendingRead> = Vec::new();

        for p in 1..=t.slots_per_round {
            let c_time = self.clock;

            // Departing winners of the previous slot wait for this marker,
            // then hand their channel back before new beacons go out.
            if let Some(releases) = release_next_slot.remove(&p) {
                for (i, ch) in releases {
                    self.ledger.add_receive(i as ReaderId, slot_msg);
                    Self::push_event(&mut self.events, round, c_time, i, EventKind::MsgC { slot: p });
                    occupancy[ch as usize].retain(|h| h.reader != i);
                    Self::push_event(&mut self.events, round, c_time, i, EventKind::Release {
                        channel: ch,
                    });
                    self.readers[i].mode = ReaderMode::Asleep;
                }
            }
            self.clock += slot_msg;
            let slot_start = self.clock;

            // Contenders whose slot arrived listen to the marker, sense their
            // channel, and beacon if it is free.
            let mut beacons: Vec<BeaconEvent> = Vec::new();
            let contenders = by_slot.get(&p).cloned().unwrap_or_default();
            for i in contenders {
                let reader = &self.readers[i];
                if reader.mode != ReaderMode::Contending || reader.slot_choice != p {
                    continue;
                }
                if proto.on_slot(reader, p) != SlotAction::Beacon {
                    continue;
                }
                self.ledger.add_receive(i as ReaderId, slot_msg);
                Self::push_event(&mut self.events, round, c_time, i, EventKind::MsgC { slot: p });
                let ch = reader.channel_choice;
                if ch == 0 || ch as usize > channels {
                    return Err(SimFault::ContractViolation(format!(
                        "reader {i} drew channel {ch} outside 1..={channels}"
                    )));
                }
                let pos = self.reader_pos[i];
                let busy = occupancy[ch as usize].iter().any(|h| {
                    h.from <= p && p <= h.to && within(pos, self.reader_pos[h.reader], interference)
                });
                if busy {
                    self.readers[i].mode = ReaderMode::Asleep;
                    Self::push_event(&mut self.events, round, slot_start, i, EventKind::Sleep);
                    continue;
                }
                self.ledger.add_send(i as ReaderId, t.beacon);
                Self::push_event(&mut self.events, round, slot_start, i, EventKind::Beacon {
                    slot: p,
                    channel: ch,
                });
                beacons.push(BeaconEvent { reader: i as ReaderId, channel: ch, position: pos });
            }

            // Resolve beacon collisions per channel neighbourhood.
            let groups = detect_beacon_collisions(&beacons, interference);
            let mut winners: Vec<usize> = Vec::new();
            for group in &groups {
                let ch = self.readers[group[0] as usize].channel_choice;
                if group.len() == 1 {
                    winners.push(group[0] as usize);
                    continue;
                }
                for &id in group {
                    Self::push_event(&mut self.events, round, slot_start, id as usize, EventKind::Collision {
                        slot: p,
                        channel: ch,
                        group_size: group.len() as u32,
                    });
                }
                if group.len() == 2 && proto.resolves_pairwise() {
                    let a = group[0] as usize;
                    let b = group[1] as usize;
                    let sa = self.published_s.get(&(a as ReaderId)).copied().unwrap_or(0);
                    let sb = self.published_s.get(&(b as ReaderId)).copied().unwrap_or(0);
                    // Lower published success count wins; ties go to the
                    // lower id (groups list members in ascending order).
                    let (w, l) = if sa < sb {
                        (a, b)
                    } else if sb < sa {
                        (b, a)
                    } else {
                        (a, b)
                    };
                    let d_true = distance(self.reader_pos[w], self.reader_pos[l]);
                    let d_est = if d_true <= 0.0 {
                        0.0
                    } else {
                        let clean = received_interference(&radio, d_true)
                            .map_err(|e| SimFault::ContractViolation(e.to_string()))?;
                        let measured = if noise > 0.0 {
                            clean * (1.0 + rngs[l].gen_range(-noise..=noise))
                        } else {
                            clean
                        };
                        estimate_distance(&radio, measured)
                            .map_err(|e| SimFault::ContractViolation(e.to_string()))?
                    };
                    match proto.on_contention_loss(
                        &mut self.readers[l],
                        d_est,
                        p,
                        self.config.read_range,
                        &mut rngs[l],
                    ) {
                        LossAction::SleepForRound => {
                            self.readers[l].mode = ReaderMode::Asleep;
                            Self::push_event(&mut self.events, round, slot_start, l, EventKind::Sleep);
                        }
                        LossAction::Recontend { slot } => {
                            if slot <= p || slot > t.slots_per_round {
                                return Err(SimFault::ContractViolation(format!(
                                    "reader {l} re-contends in slot {slot} from slot {p}"
                                )));
                            }
                            by_slot.entry(slot).or_default().push(l);
                        }
                    }
                    winners.push(w);
                } else {
                    for &id in group {
                        self.readers[id as usize].mode = ReaderMode::Asleep;
                        Self::push_event(&mut self.events, round, slot_start, id as usize, EventKind::Sleep);
                    }
                }
            }

            // Optionally let only one winner proceed per overlapping cluster.
            let mut restricted: BTreeSet<usize> = BTreeSet::new();
            if proto.restricts_overlapping_winners() && winners.len() > 1 {
                restricted = restricted_winners(&winners, &self.reader_pos, 2.0 * self.config.read_range);
            }

            winners.sort_unstable();
            for w in winners {
                let ch = self.readers[w].channel_choice;
                Self::push_event(&mut self.events, round, slot_start, w, EventKind::Win {
                    slot: p,
                    channel: ch,
                });
                if restricted.contains(&w) {
                    // Holds the channel for a full read window without
                    // transmitting, mirroring the cluster mate that reads.
                    occupancy[ch as usize].push(Hold {
                        reader: w,
                        from: p,
                        to: p.saturating_add(occupancy_slots - 1),
                    });
                    self.readers[w].mode = ReaderMode::Asleep;
                    Self::push_event(&mut self.events, round, slot_start, w, EventKind::Sleep);
                    continue;
                }
                let in_range = self.tags_in_range(w);
                let unknown = in_range
                    .iter()
                    .filter(|tid| !self.readers[w].known_tags.contains(tid))
                    .count();
                match proto.on_win(&self.readers[w], unknown) {
                    WinAction::Read => {
                        let mut start = slot_start + t.beacon;
                        if proto.sends_clear_frame() {
                            self.ledger.add_send(w as ReaderId, t.of_frame);
                            start += t.of_frame;
                        }
                        let end = start + t.read;
                        occupancy[ch as usize].push(Hold {
                            reader: w,
                            from: p,
                            to: p.saturating_add(occupancy_slots - 1),
                        });
                        self.ledger.add_read(w as ReaderId, t.read);
                        Self::push_event(&mut self.events, round, start, w, EventKind::ReadStart {
                            channel: ch,
                            tags_in_range: in_range.len() as u32,
                        });
                        pending_reads.push(PendingRead { reader: w, start, end, tags: in_range });
                        self.readers[w].mode = ReaderMode::Reading;
                    }
                    WinAction::Leave => {
                        // Keeps the channel only until the next marker (or
                        // the share phase, after the final slot).
                        occupancy[ch as usize].push(Hold { reader: w, from: p, to: u32::MAX });
                        Self::push_event(&mut self.events, round, slot_start, w, EventKind::SkipKnown {
                            slot: p,
                            channel: ch,
                        });
                        self.readers[w].mode = ReaderMode::Leaving;
                        if p < t.slots_per_round {
                            release_next_slot.entry(p + 1).or_default().push((w, ch));
                        } else {
                            release_at_end.push((w, ch));
                        }
                    }
                }
            }

            self.clock += t.slot;
        }

        let slots_end = self.clock;

        // Reads run to completion before the round closes.
        pending_reads.sort_by(|a, b| {
            a.end
                .partial_cmp(&b.end)
                .expect("read end times are never NaN")
                .then(a.reader.cmp(&b.reader))
        });
        let mut reads_this_round: u32 = 0;
        let mut new_unique: u32 = 0;
        let mut first_acq: BTreeMap<usize, f64> = BTreeMap::new();
        let mut last_end = slots_end;
        for pr in &pending_reads {
            let mut new_tags: u32 = 0;
            {
                let reader = &mut self.readers[pr.reader];
                for &tid in &pr.tags {
                    if reader.known_tags.insert(tid) {
                        new_tags += 1;
                    }
                }
                reader.successful_reads += 1;
                if share_phase {
                    let record = IspRecord {
                        reporter: pr.reader as ReaderId,
                        tag_ids: pr.tags.clone(),
                        s_count: reader.successful_reads,
                    };
                    reader.pending_share.push(record);
                }
            }
            reads_this_round += 1;
            if new_tags == 0 {
                self.redundant_reads += 1;
            }
            for &tid in &pr.tags {
                if self.global_known.insert(tid) {
                    new_unique += 1;
                }
            }
            Self::push_event(&mut self.events, round, pr.end, pr.reader, EventKind::ReadEnd {
                new_tags,
            });
            if new_tags > 0 {
                note_acquisition(
                    &mut self.last_acq,
                    &mut self.waiting_interval_sum,
                    &mut self.waiting_interval_count,
                    &mut first_acq,
                    pr.reader,
                    pr.end,
                    round_start,
                );
            }
            last_end = last_end.max(pr.end);
        }
        let sh_start = last_end;
        self.clock = sh_start;

        // Winners that skipped reading in the final slot release when the
        // round closes.
        for (i, ch) in release_at_end {
            occupancy[ch as usize].retain(|h| h.reader != i);
            Self::push_event(&mut self.events, round, sh_start, i, EventKind::Release { channel: ch });
            self.readers[i].mode = ReaderMode::Asleep;
        }

        if share_phase {
            // Share-phase broadcast: everyone listens; publishers append the
            // round's records; the pooled store is then merged back into
            // every reader's knowledge.
            for i in 0..n {
                self.ledger.add_receive(i as ReaderId, t.msg_sh);
            }
            self.clock += t.msg_sh;
            let merge_time = self.clock;
            if self.config.isp {
                for i in 0..n {
                    let records: Vec<IspRecord> = self.readers[i].pending_share.drain(..).collect();
                    let published = records.len() as u32;
                    if published > 0 && t.isp_record > 0.0 {
                        self.ledger.add_send(i as ReaderId, t.isp_record);
                    }
                    for record in records {
                        self.isp
                            .publish(record)
                            .map_err(|e| SimFault::ContractViolation(e.to_string()))?;
                    }
                    Self::push_event(&mut self.events, round, sh_start, i, EventKind::Sh { published });
                }
                self.isp.close();
                for i in 0..n {
                    let added = self.isp.merge_into(&mut self.readers[i].known_tags);
                    if added > 0 {
                        Self::push_event(&mut self.events, round, merge_time, i, EventKind::IspMerge {
                            new_tags: added as u32,
                        });
                        note_acquisition(
                            &mut self.last_acq,
                            &mut self.waiting_interval_sum,
                            &mut self.waiting_interval_count,
                            &mut first_acq,
                            i,
                            merge_time,
                            round_start,
                        );
                    }
                }
                for i in 0..n {
                    self.published_s.insert(i as ReaderId, self.readers[i].successful_reads);
                }
            } else {
                // Sharing disabled: the broadcast still closes the round but
                // nothing is published or merged.
                for i in 0..n {
                    self.readers[i].pending_share.clear();
                    Self::push_event(&mut self.events, round, sh_start, i, EventKind::Sh { published: 0 });
                }
            }
        }

        for i in 0..n {
            proto.on_round_end(&mut self.readers[i]);
        }

        let duration = self.clock - round_start;
        let mut waiting_sum = 0.0;
        for i in 0..n {
            waiting_sum += first_acq.get(&i).copied().unwrap_or(duration);
        }
        self.per_round.push(RoundMetrics {
            round,
            successful_reads: reads_this_round,
            new_unique_tags: new_unique,
            duration_s: duration,
            waiting_s: waiting_sum,
        });

        if self.config.mobility != MobilityModel::Static {
            let mobility = self.config.mobility_config();
            let arena = self.config.arena();
            let mut mrngs: Vec<ChaCha8Rng> = (0..n)
                .map(|i| substream(self.config.seed, &[STREAM_MOBILITY, round as u64, i as u64]))
                .collect();
            step_mobility(&mut self.reader_pos, &mut self.waypoints, &mobility, duration, &arena, &mut mrngs);
        }

        self.round_index += 1;
        Ok(())
    }

    // -----------------------------------------------------------------------
    // Contention windows
    // -----------------------------------------------------------------------

    /// Completes in-flight reads ending at or before `cutoff`. Completion
    /// merges the read tags into the reader and shares them with neighbours
    /// inside the sharing radius.
    fn complete_window_reads(
        &mut self,
        cutoff: f64,
        round: u32,
        round_start: f64,
        params: &WindowParams,
        first_acq: &mut BTreeMap<usize, f64>,
    ) -> CompletionBatch {
        let mut due: Vec<PendingRead> = Vec::new();
        let mut rest: Vec<PendingRead> = Vec::new();
        for pr in self.in_flight.drain(..) {
            if pr.end <= cutoff {
                due.push(pr);
            } else {
                rest.push(pr);
            }
        }
        self.in_flight = rest;
        due.sort_by(|a, b| {
            a.end
                .partial_cmp(&b.end)
                .expect("read end times are never NaN")
                .then(a.reader.cmp(&b.reader))
        });
        let mut batch = CompletionBatch { completed: 0, new_unique: 0, last_end: 0.0 };
        for pr in &due {
            let mut new_tags: u32 = 0;
            {
                let reader = &mut self.readers[pr.reader];
                for &tid in &pr.tags {
                    if reader.known_tags.insert(tid) {
                        new_tags += 1;
                    }
                }
                reader.successful_reads += 1;
                reader.mode = ReaderMode::Idle;
            }
            batch.completed += 1;
            batch.last_end = batch.last_end.max(pr.end);
            if new_tags == 0 {
                self.redundant_reads += 1;
            }
            for &tid in &pr.tags {
                if self.global_known.insert(tid) {
                    batch.new_unique += 1;
                }
            }
            Self::push_event(&mut self.events, round, pr.end, pr.reader, EventKind::ReadEnd {
                new_tags,
            });
            if new_tags > 0 {
                note_acquisition(
                    &mut self.last_acq,
                    &mut self.waiting_interval_sum,
                    &mut self.waiting_interval_count,
                    first_acq,
                    pr.reader,
                    pr.end,
                    round_start,
                );
            }
            // Hand the read tags to neighbours inside the sharing radius.
            let src = self.reader_pos[pr.reader];
            for j in 0..self.readers.len() {
                if j == pr.reader || !within(src, self.reader_pos[j], params.sharing_distance) {
                    continue;
                }
                let mut added: u32 = 0;
                for &tid in &pr.tags {
                    if self.readers[j].known_tags.insert(tid) {
                        added += 1;
                    }
                }
                if added > 0 {
                    Self::push_event(&mut self.events, round, pr.end, j, EventKind::IspMerge {
                        new_tags: added,
                    });
                    note_acquisition(
                        &mut self.last_acq,
                        &mut self.waiting_interval_sum,
                        &mut self.waiting_interval_count,
                        first_acq,
                        j,
                        pr.end,
                        round_start,
                    );
                }
            }
        }
        batch
    }

    fn run_window(&mut self, params: WindowParams) -> Result<(), SimFault> {
        let round = self.round_index;
        let win_start = self.clock;
        let n = self.readers.len();
        let tick = self.timing.window_beacon;
        let cw = params.window;
        let interference = self.config.interference_range;
        let mut first_acq: BTreeMap<usize, f64> = BTreeMap::new();

        // Finish reads that ended before this window opened.
        let batch = self.complete_window_reads(win_start, round, win_start, &params, &mut first_acq);

        // Every reader that is not mid-read draws a backoff tick.
        let mut backoff: Vec<u32> = vec![0; n];
        for i in 0..n {
            if self.readers[i].mode != ReaderMode::Reading {
                backoff[i] = self.window_rngs[i].gen_range(1..=cw);
            }
        }

        let mut out_this_window: Vec<bool> = vec![false; n];
        for b in 1..=cw {
            let sense_t = win_start + (b - 1) as f64 * tick;
            let mut clear: Vec<BeaconEvent> = Vec::new();
            for i in 0..n {
                if backoff[i] != b || out_this_window[i] || self.readers[i].mode == ReaderMode::Reading
                {
                    continue;
                }
                // Carrier sense: a neighbour's in-flight read keeps the
                // shared channel busy.
                let pos = self.reader_pos[i];
                let busy = self.in_flight.iter().any(|pr| {
                    pr.start <= sense_t
                        && sense_t < pr.end
                        && within(pos, self.reader_pos[pr.reader], interference)
                });
                if busy {
                    out_this_window[i] = true;
                    Self::push_event(&mut self.events, round, sense_t, i, EventKind::Sleep);
                    continue;
                }
                self.ledger.add_send(i as ReaderId, tick);
                Self::push_event(&mut self.events, round, sense_t, i, EventKind::Beacon {
                    slot: b,
                    channel: 1,
                });
                clear.push(BeaconEvent { reader: i as ReaderId, channel: 1, position: pos });
            }
            if clear.is_empty() {
                continue;
            }
            let groups = detect_beacon_collisions(&clear, interference);
            for group in &groups {
                if group.len() == 1 {
                    let w = group[0] as usize;
                    Self::push_event(&mut self.events, round, sense_t, w, EventKind::Win {
                        slot: b,
                        channel: 1,
                    });
                    let start = sense_t + tick;
                    let end = start + self.timing.read;
                    let tags = self.tags_in_range(w);
                    self.ledger.add_read(w as ReaderId, self.timing.read);
                    Self::push_event(&mut self.events, round, start, w, EventKind::ReadStart {
                        channel: 1,
                        tags_in_range: tags.len() as u32,
                    });
                    self.in_flight.push(PendingRead { reader: w, start, end, tags });
                    self.readers[w].mode = ReaderMode::Reading;
                    out_this_window[w] = true;
                } else {
                    // Simultaneous clear-channel senses collide and void every
                    // participant's attempt for this window.
                    for &id in group {
                        out_this_window[id as usize] = true;
                        Self::push_event(&mut self.events, round, sense_t, id as usize, EventKind::Collision {
                            slot: b,
                            channel: 1,
                            group_size: group.len() as u32,
                        });
                    }
                }
            }
        }

        self.clock = win_start + cw as f64 * tick;
        let duration = self.clock - win_start;

        let mut waiting_sum = 0.0;
        for i in 0..n {
            waiting_sum += first_acq.get(&i).copied().unwrap_or(duration);
        }
        self.per_round.push(RoundMetrics {
            round,
            successful_reads: batch.completed,
            new_unique_tags: batch.new_unique,
            duration_s: duration,
            waiting_s: waiting_sum,
        });

        if self.config.mobility != MobilityModel::Static {
            let mobility = self.config.mobility_config();
            let arena = self.config.arena();
            for i in 0..n {
                self.reader_pos[i] = geometry::step_reader(
                    self.reader_pos[i],
                    &mut self.waypoints[i],
                    &mobility,
                    duration,
                    &arena,
                    &mut self.window_mobility_rngs[i],
                );
            }
        }

        self.round_index += 1;
        Ok(())
    }
}

/// Splits `winners` into clusters whose read zones could overlap (centres
/// within `limit`) and returns every member except each cluster's lowest id.
fn restricted_winners(winners: &[usize], positions: &[Point], limit: f64) -> BTreeSet<usize> {
    let mut parent: Vec<usize> = (0..winners.len()).collect();
    fn find(parent: &mut [usize], x: usize) -> usize {
        if parent[x] != x {
            let root = find(parent, parent[x]);
            parent[x] = root;
        }
        parent[x]
    }
    for a in 0..winners.len() {
        for b in a + 1..winners.len() {
            if within(positions[winners[a]], positions[winners[b]], limit) {
                let ra = find(&mut parent, a);
                let rb = find(&mut parent, b);
                if ra != rb {
                    parent[ra.max(rb)] = ra.min(rb);
                }
            }
        }
    }
    let mut keeper: BTreeMap<usize, usize> = BTreeMap::new();
    for x in 0..winners.len() {
        let root = find(&mut parent, x);
        let entry = keeper.entry(root).or_insert(winners[x]);
        *entry = (*entry).min(winners[x]);
    }
    let mut restricted = BTreeSet::new();
    for x in 0..winners.len() {
        let root = find(&mut parent, x);
        if keeper[&root] != winners[x] {
            restricted.insert(winners[x]);
        }
    }
    restricted
}

// ---------------------------------------------------------------------------
// Batch running
// ---------------------------------------------------------------------------

/// Runs one scenario to completion and returns its metrics.
pub fn run_scenario(config: &ScenarioConfig) -> Result<MetricsReport, SimFault> {
    let mut engine = Engine::new(config.clone(), false)?;
    engine.run()?;
    Ok(engine.into_output().0)
}

/// Runs one scenario with event logging enabled.
pub fn run_scenario_with_events(
    config: &ScenarioConfig,
) -> Result<(MetricsReport, EventLog), SimFault> {
    let mut engine = Engine::new(config.clone(), true)?;
    engine.run()?;
    Ok(engine.into_output())
}

/// Runs many scenarios across `threads` worker threads (0 = all available).
/// Results come back in input order; the first failure aborts the batch.
pub fn run_batch(configs: &[ScenarioConfig], threads: usize) -> Result<Vec<MetricsReport>, SimFault> {
    if configs.is_empty() {
        return Ok(Vec::new());
    }
    let workers = if threads == 0 {
        std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
    } else {
        threads
    }
    .min(configs.len());
    if workers <= 1 {
        return configs.iter().map(run_scenario).collect();
    }
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<MetricsReport, SimFault>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= configs.len() {
                    break;
                }
                let outcome = run_scenario(&configs[i]);
                results.lock().expect("result lock")[i] = Some(outcome);
            });
        }
    });
    let collected = results.into_inner().expect("result lock");
    let mut out = Vec::with_capacity(configs.len());
    for slot in collected {
        out.push(slot.expect("every batch slot filled")?);
    }
    Ok(out)
}
