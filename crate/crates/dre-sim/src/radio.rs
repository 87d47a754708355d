//! Reader-to-reader interference strength, distance estimation from it, and
//! beacon collision grouping.
//!
//! The channel model is an inverse power law: a beacon transmitted with power
//! `P` through antenna gains `G_tx * G_rx` arrives attenuated by `K0 * D^a`.
//! Inverting the same law turns a measured interference level back into a
//! distance estimate, which is what colliding readers use to decide whether
//! their read ranges can coexist.

use crate::geometry::{in_interference_range, Point};
use crate::ReaderId;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum RadioError {
    #[error("distance must be positive, got {0}")]
    NonPositiveDistance(f64),
    #[error("interference level must be positive, got {0}")]
    NonPositiveInterference(f64),
}

/// Link-budget parameters shared by all readers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadioParams {
    /// Transmit power in watts.
    pub power: f64,
    /// Transmitter antenna gain (dimensionless).
    pub gain_tx: f64,
    /// Receiver antenna gain (dimensionless).
    pub gain_rx: f64,
    /// Environment constant scaling the attenuation.
    pub k0: f64,
    /// Path-loss exponent; 2 is free space.
    pub path_loss_exponent: f64,
}

impl Default for RadioParams {
    fn default() -> Self {
        RadioParams {
            power: 2.3,
            gain_tx: 1.0,
            gain_rx: 1.0,
            k0: 1.0,
            path_loss_exponent: 2.0,
        }
    }
}

/// Interference power one reader receives from another at `distance` metres:
/// `P * G_tx * G_rx / (K0 * D^a)`.
pub fn received_interference(params: &RadioParams, distance: f64) -> Result<f64, RadioError> {
    if distance <= 0.0 {
        return Err(RadioError::NonPositiveDistance(distance));
    }
    let num = params.power * params.gain_tx * params.gain_rx;
    Ok(num / (params.k0 * distance.powf(params.path_loss_exponent)))
}

/// Invert the attenuation law: `D = (P * G_tx * G_rx / (K0 * I))^(1/a)`.
pub fn estimate_distance(params: &RadioParams, interference: f64) -> Result<f64, RadioError> {
    if interference <= 0.0 {
        return Err(RadioError::NonPositiveInterference(interference));
    }
    let num = params.power * params.gain_tx * params.gain_rx;
    Ok((num / (params.k0 * interference)).powf(1.0 / params.path_loss_exponent))
}

/// A beacon transmitted in the current slot.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BeaconEvent {
    pub reader: ReaderId,
    pub channel: u32,
    pub position: Point,
}

/// Partition simultaneous beacons into collision groups.
///
/// Two beacons collide when they share a channel and their senders are within
/// interference range; groups are the connected components of that relation,
/// so readers on different channels never land in the same group. Singleton
/// groups are clean wins. Output order is canonical: groups sorted by their
/// smallest reader id, members ascending, independent of input order.
pub fn detect_beacon_collisions(
    beacons: &[BeaconEvent],
    interference_range: f64,
) -> Vec<Vec<ReaderId>> {
    let n = beacons.len();
    // Union-find over beacon indices.
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, mut i: usize) -> usize {
        while parent[i] != i {
            parent[i] = parent[parent[i]];
            i = parent[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if beacons[i].channel == beacons[j].channel
                && in_interference_range(beacons[i].position, beacons[j].position, interference_range)
            {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[rj] = ri;
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<ReaderId>> = std::collections::BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(beacons[i].reader);
    }
    let mut out: Vec<Vec<ReaderId>> = groups.into_values().collect();
    for g in &mut out {
        g.sort_unstable();
    }
    out.sort_by_key(|g| g[0]);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn default_link_at_ten_metres() {
        // 2.3 * 1 * 1 / (1 * 10^2) = 0.023 W.
        let i = received_interference(&RadioParams::default(), 10.0).unwrap();
        assert!((i - 0.023).abs() < 1e-15);
    }

    #[test]
    fn estimate_inverts_measurement() {
        let params = RadioParams::default();
        let d = 17.3;
        let i = received_interference(&params, d).unwrap();
        let back = estimate_distance(&params, i).unwrap();
        assert!((back - d).abs() / d < 1e-9);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let params = RadioParams::default();
        assert!(matches!(
            received_interference(&params, 0.0),
            Err(RadioError::NonPositiveDistance(_))
        ));
        assert!(matches!(
            received_interference(&params, -1.0),
            Err(RadioError::NonPositiveDistance(_))
        ));
        assert!(matches!(
            estimate_distance(&params, 0.0),
            Err(RadioError::NonPositiveInterference(_))
        ));
    }

    #[test]
    fn same_channel_in_range_collides() {
        let beacons = [
            BeaconEvent { reader: 1, channel: 2, position: Point::new(0.0, 0.0) },
            BeaconEvent { reader: 2, channel: 2, position: Point::new(5.0, 0.0) },
        ];
        let groups = detect_beacon_collisions(&beacons, 10.0);
        assert_eq!(groups, vec![vec![1, 2]]);
    }

    #[test]
    fn different_channels_never_collide() {
        let beacons = [
            BeaconEvent { reader: 1, channel: 1, position: Point::new(0.0, 0.0) },
            BeaconEvent { reader: 2, channel: 2, position: Point::new(0.0, 0.0) },
        ];
        let groups = detect_beacon_collisions(&beacons, 10.0);
        assert_eq!(groups, vec![vec![1], vec![2]]);
    }

    #[test]
    fn out_of_range_same_channel_are_separate() {
        let beacons = [
            BeaconEvent { reader: 3, channel: 1, position: Point::new(0.0, 0.0) },
            BeaconEvent { reader: 4, channel: 1, position: Point::new(100.0, 0.0) },
        ];
        let groups = detect_beacon_collisions(&beacons, 10.0);
        assert_eq!(groups, vec![vec![3], vec![4]]);
    }

    #[test]
    fn chains_merge_into_one_group() {
        // A-B in range, B-C in range, A-C not: still one component.
        let beacons = [
            BeaconEvent { reader: 1, channel: 1, position: Point::new(0.0, 0.0) },
            BeaconEvent { reader: 2, channel: 1, position: Point::new(8.0, 0.0) },
            BeaconEvent { reader: 3, channel: 1, position: Point::new(16.0, 0.0) },
        ];
        let groups = detect_beacon_collisions(&beacons, 10.0);
        assert_eq!(groups, vec![vec![1, 2, 3]]);
    }

    proptest! {
        #[test]
        fn interference_decreases_with_distance(
            d1 in 0.1..500.0f64, extra in 0.1..500.0f64, a in 1.5..4.0f64,
        ) {
            let params = RadioParams { path_loss_exponent: a, ..RadioParams::default() };
            let near = received_interference(&params, d1).unwrap();
            let far = received_interference(&params, d1 + extra).unwrap();
            prop_assert!(far < near);
        }

        #[test]
        fn round_trip_is_tight(
            d in 0.1..1000.0f64, a in 1.5..6.0f64, k0 in 0.1..10.0f64, g in 0.1..10.0f64,
        ) {
            let params = RadioParams {
                power: 2.3,
                gain_tx: g,
                gain_rx: g,
                k0,
                path_loss_exponent: a,
            };
            let i = received_interference(&params, d).unwrap();
            let back = estimate_distance(&params, i).unwrap();
            prop_assert!((back - d).abs() / d < 1e-9);
        }

        #[test]
        fn grouping_ignores_input_order(seed in 0u64..100) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut beacons = vec![
                BeaconEvent { reader: 1, channel: 1, position: Point::new(0.0, 0.0) },
                BeaconEvent { reader: 2, channel: 1, position: Point::new(4.0, 0.0) },
                BeaconEvent { reader: 3, channel: 2, position: Point::new(0.0, 1.0) },
                BeaconEvent { reader: 4, channel: 1, position: Point::new(50.0, 0.0) },
                BeaconEvent { reader: 5, channel: 2, position: Point::new(3.0, 1.0) },
            ];
            let canonical = detect_beacon_collisions(&beacons, 10.0);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            beacons.shuffle(&mut rng);
            prop_assert_eq!(detect_beacon_collisions(&beacons, 10.0), canonical);
        }
    }
}
