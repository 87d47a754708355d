//! Slot-selection probability distributions and contention-win analysis.
//!
//! Readers pick a time slot from a geometrically increasing distribution so
//! that, with high probability, exactly one contender holds the earliest
//! occupied slot. `sift_distribution` is the closed form used by the live
//! protocol; `pstar_distribution` is the recursive optimal form it
//! approximates; `win_probability` is the chance that a group of rivals
//! resolves without a tie on the minimum slot.

use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DistributionError {
    #[error("slot count must be at least 1")]
    ZeroSlots,
    #[error("population estimate must be at least 1")]
    ZeroPopulation,
    #[error("rival count must be at least 2 for the recursive form")]
    TooFewRivals,
    #[error("win probability needs at least 2 slots and 1 rival")]
    BadWinArguments,
}

/// A probability distribution over slots 1..=K with a precomputed CDF.
#[derive(Clone, Debug, PartialEq)]
pub struct SlotDistribution {
    probs: Vec<f64>,
    cdf: Vec<f64>,
}

impl SlotDistribution {
    /// Wrap raw slot probabilities (must already sum to ~1).
    pub fn from_probs(probs: Vec<f64>) -> Self {
        let mut cdf = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cdf.push(acc);
        }
        SlotDistribution { probs, cdf }
    }

    pub fn slots(&self) -> u32 {
        self.probs.len() as u32
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// P(slot <= k), 1-based.
    pub fn cumulative(&self, k: u32) -> f64 {
        self.cdf[(k - 1) as usize]
    }

    /// Draw a 1-based slot by inverse-CDF lookup.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.gen();
        // Binary search for the first cdf entry >= u.
        let mut lo = 0usize;
        let mut hi = self.cdf.len() - 1;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] < u {
                lo = mid + 1;
            } else {
                hi = mid;
            }
        }
        (lo + 1) as u32
    }
}

/// Draw one slot from a prepared distribution.
pub fn sample_slot<R: Rng>(dist: &SlotDistribution, rng: &mut R) -> u32 {
    dist.sample(rng)
}

/// Geometrically increasing slot distribution over `k` slots for an assumed
/// population of `m` contenders.
///
/// P_j = (1 - a) * a^k / (1 - a^k) * a^(-j) with a = m^(-1/(k-1)).
/// Degenerate cases: one slot yields [1.0]; m = 1 yields the uniform 1/k
/// (the a -> 1 limit of the closed form).
pub fn sift_distribution(k: u32, m: u64) -> Result<SlotDistribution, DistributionError> {
    if k == 0 {
        return Err(DistributionError::ZeroSlots);
    }
    if m == 0 {
        return Err(DistributionError::ZeroPopulation);
    }
    if k == 1 {
        return Ok(SlotDistribution::from_probs(vec![1.0]));
    }
    if m == 1 {
        let p = 1.0 / f64::from(k);
        return Ok(SlotDistribution::from_probs(vec![p; k as usize]));
    }
    let alpha = (m as f64).powf(-1.0 / f64::from(k - 1));
    // P_j = c * alpha^(k - j) keeps every term well-scaled for large k.
    let c = (1.0 - alpha) / (1.0 - alpha.powi(k as i32));
    let probs = (1..=k).map(|j| c * alpha.powi((k - j) as i32)).collect();
    Ok(SlotDistribution::from_probs(probs))
}

/// Recursive reference distribution the geometric form approximates.
///
/// Computed left to right: slot j gets ((1 - f)/(r - f)) of the remaining
/// mass, where f = f_(k-j)(r) follows f_n(r) = ((r-1)/(r - f_(n-1)(r)))^(r-1)
/// with f_1(r) = 0; the final slot absorbs the residual mass.
pub fn pstar_distribution(k: u32, r: u32) -> Result<SlotDistribution, DistributionError> {
    if k == 0 {
        return Err(DistributionError::ZeroSlots);
    }
    if r < 2 {
        return Err(DistributionError::TooFewRivals);
    }
    if k == 1 {
        return Ok(SlotDistribution::from_probs(vec![1.0]));
    }
    let rf = f64::from(r);
    // f[n] for n = 1..=k-1.
    let mut f = vec![0.0; k as usize];
    f[1] = 0.0;
    for n in 2..k as usize {
        f[n] = ((rf - 1.0) / (rf - f[n - 1])).powf(rf - 1.0);
    }
    let mut probs = Vec::with_capacity(k as usize);
    let mut remaining = 1.0;
    for j in 1..k {
        let fv = f[(k - j) as usize];
        let p = (1.0 - fv) / (rf - fv) * remaining;
        probs.push(p);
        remaining -= p;
    }
    probs.push(remaining);
    Ok(SlotDistribution::from_probs(probs))
}

/// Probability that exactly one of `r` contenders holds the strict minimum
/// slot when all draw independently from the (k, m) geometric distribution:
/// r * sum over j=1..k-1 of P_j * (1 - sum_{z<=j} P_z)^(r-1).
pub fn win_probability(k: u32, m: u64, r: u32) -> Result<f64, DistributionError> {
    if k < 2 || r < 1 {
        return Err(DistributionError::BadWinArguments);
    }
    let dist = sift_distribution(k, m)?;
    let mut total = 0.0;
    let mut cum = 0.0;
    for j in 0..(k - 1) as usize {
        cum += dist.probs[j];
        let above = (1.0 - cum).max(0.0);
        total += dist.probs[j] * above.powi((r - 1) as i32);
    }
    Ok((f64::from(r) * total).clamp(0.0, 1.0))
}
