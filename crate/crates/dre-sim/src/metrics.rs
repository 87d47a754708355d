//! Energy accounting and per-run reports.
//!
//! The ledger accumulates airtime per reader and activity class; joules are
//! the product of airtime and the class power, so a replay that walks the
//! event log in order reproduces every total bit-for-bit.

use crate::ReaderId;
use std::collections::BTreeMap;

/// Power draw in watts per activity class. A sleeping reader draws nothing.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerParams {
    pub send: f64,
    pub receive: f64,
    pub read: f64,
}

impl Default for PowerParams {
    fn default() -> Self {
        PowerParams { send: 2.3, receive: 0.5, read: 2.3 }
    }
}

/// Energy spent on one activity.
#[inline]
pub fn energy(power_w: f64, seconds: f64) -> f64 {
    power_w * seconds
}

/// Per-reader airtime by activity class.
///
/// Durations are summed in event order and multiplied by the class power
/// only when reporting, which keeps ledger totals exactly reproducible from
/// the event log.
#[derive(Clone, Debug, Default)]
pub struct EnergyLedger {
    send_s: BTreeMap<ReaderId, f64>,
    receive_s: BTreeMap<ReaderId, f64>,
    read_s: BTreeMap<ReaderId, f64>,
}

impl EnergyLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_send(&mut self, reader: ReaderId, seconds: f64) {
        *self.send_s.entry(reader).or_insert(0.0) += seconds;
    }

    pub fn add_receive(&mut self, reader: ReaderId, seconds: f64) {
        *self.receive_s.entry(reader).or_insert(0.0) += seconds;
    }

    pub fn add_read(&mut self, reader: ReaderId, seconds: f64) {
        *self.read_s.entry(reader).or_insert(0.0) += seconds;
    }

    /// Total joules one reader spent, all classes combined.
    pub fn reader_energy(&self, reader: ReaderId, power: &PowerParams) -> f64 {
        let send = self.send_s.get(&reader).copied().unwrap_or(0.0);
        let receive = self.receive_s.get(&reader).copied().unwrap_or(0.0);
        let read = self.read_s.get(&reader).copied().unwrap_or(0.0);
        energy(power.send, send) + energy(power.receive, receive) + energy(power.read, read)
    }

    /// Joules per reader, for every reader the ledger has seen.
    pub fn per_reader(&self, power: &PowerParams) -> BTreeMap<ReaderId, f64> {
        let mut ids: Vec<ReaderId> = self.send_s.keys().copied().collect();
        ids.extend(self.receive_s.keys().copied());
        ids.extend(self.read_s.keys().copied());
        ids.sort_unstable();
        ids.dedup();
        ids.into_iter().map(|id| (id, self.reader_energy(id, power))).collect()
    }

    /// Network total: the sum over readers in id order.
    pub fn network_energy(&self, power: &PowerParams) -> f64 {
        self.per_reader(power).values().sum()
    }
}

/// One round's (or, for the contention-window protocol, one window's) tallies.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RoundMetrics {
    pub round: u32,
    /// Read operations completed this round.
    pub successful_reads: u32,
    /// Tags read this round that no reader in the network knew before.
    pub new_unique_tags: u32,
    /// Wall-clock length of the round, including any reading tail.
    pub duration_s: f64,
    /// Summed per-reader waiting contribution for this round.
    pub waiting_s: f64,
}

/// Aggregate outcome of one simulation run.
///
/// Alongside the raw read-operation counts this carries per-reader
/// acquisition figures (distinct tags a reader came to know, through its own
/// reads or through sharing), which is what cross-protocol comparisons use:
/// a protocol that re-reads the same tags forever scores read operations
/// without ever learning anything new.
#[derive(Clone, Debug)]
pub struct MetricsReport {
    pub protocol: String,
    pub readers: u32,
    pub channels: u32,
    pub seed: u64,
    pub rounds: u32,
    /// Completed read operations over the whole run.
    pub successful_reads: u64,
    /// Reads that yielded no tag the reader did not already know.
    pub redundant_reads: u64,
    /// Distinct tags known by at least one reader at the end.
    pub unique_tags_known: u64,
    /// Total simulated time, including message overheads and reading tails.
    pub elapsed_s: f64,
    /// Read operations per simulated second.
    pub throughput_rps: f64,
    /// Mean waiting time under the configured scope (see `waiting_scope`).
    pub avg_waiting_time_s: f64,
    /// Sum over readers of distinct tags each knows at the end.
    pub acquisitions: u64,
    /// Acquisitions per simulated second.
    pub acquisition_rate_per_s: f64,
    /// Mean over readers of elapsed time per acquired tag; readers that
    /// acquired nothing contribute the full elapsed time.
    pub avg_time_per_tag_s: f64,
    pub network_energy_j: f64,
    pub reader_energy_j: BTreeMap<ReaderId, f64>,
    pub per_round: Vec<RoundMetrics>,
}

impl MetricsReport {
    /// Reads per second given a tally and a horizon; zero time means zero rate.
    pub fn rate(count: u64, elapsed_s: f64) -> f64 {
        if elapsed_s > 0.0 {
            count as f64 / elapsed_s
        } else {
            0.0
        }
    }
}
