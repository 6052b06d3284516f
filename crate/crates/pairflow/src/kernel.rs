//! Hamming geometry and posterior row weights.
//!
//! For a dataset row `d` and a state `z` at mixing weight `kappa`, the
//! posterior probability that the flow is heading to `d` is proportional to
//! `gamma^(-hamming(d, z))` with
//!
//! ```text
//! gamma = (1 + (K - 1) kappa) / (1 - kappa)
//! ```
//!
//! Weights are computed in log space with the minimum distance subtracted,
//! so they are invariant to shifting all distances by a constant and never
//! overflow. At `kappa = 1` the ratio diverges; that limit is represented
//! explicitly and puts uniform weight on the rows nearest to `z`.

use rand::seq::SliceRandom;
use rayon::prelude::*;

use crate::data::DatasetStore;
use crate::error::{Error, Result};
use crate::seed::{SeedSpec, StreamDomain};

/// Row count above which profile computation goes parallel.
const PAR_THRESHOLD: usize = 1 << 14;

/// Number of positions where two equal-length sequences differ.
pub fn hamming(a: &[u32], b: &[u32]) -> Result<usize> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    Ok(hamming_unchecked(a, b))
}

#[inline]
pub(crate) fn hamming_unchecked(a: &[u32], b: &[u32]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

/// Hamming distance from one state to every dataset row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HammingProfile {
    dists: Vec<u32>,
}

impl HammingProfile {
    pub fn new(dists: Vec<u32>) -> Result<Self> {
        if dists.is_empty() {
            return Err(Error::EmptyDataset);
        }
        Ok(HammingProfile { dists })
    }

    pub fn len(&self) -> usize {
        self.dists.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.dists
    }

    pub fn min(&self) -> u32 {
        *self.dists.iter().min().expect("profile is nonempty")
    }
}

/// Distances from `z` to every row of `ds`.
pub fn hamming_profile(ds: &DatasetStore, z: &[u32]) -> Result<HammingProfile> {
    ds.validate_seq(z)?;
    let n = ds.n();
    let dists = if ds.len() >= PAR_THRESHOLD {
        ds.tokens()
            .par_chunks_exact(n)
            .map(|row| hamming_unchecked(row, z) as u32)
            .collect()
    } else {
        ds.iter_rows()
            .map(|row| hamming_unchecked(row, z) as u32)
            .collect()
    };
    HammingProfile::new(dists)
}

/// `ln gamma`, with the `kappa = 1` divergence kept as an explicit variant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LogGamma {
    Finite(f64),
    Infinite,
}

impl LogGamma {
    pub fn is_finite(&self) -> bool {
        matches!(self, LogGamma::Finite(_))
    }
}

/// `ln((1 + (K-1) kappa) / (1 - kappa))` for `kappa` in [0, 1].
pub fn log_gamma(kappa: f64, k: u32) -> Result<LogGamma> {
    if k < 2 {
        return Err(Error::VocabTooSmall(k));
    }
    if !(0.0..=1.0).contains(&kappa) || kappa.is_nan() {
        return Err(Error::OutOfDomain {
            name: "kappa",
            value: kappa,
            lo: 0.0,
            hi: 1.0,
        });
    }
    if kappa == 1.0 {
        return Ok(LogGamma::Infinite);
    }
    let num = ((k - 1) as f64 * kappa).ln_1p();
    let den = (-kappa).ln_1p();
    Ok(LogGamma::Finite(num - den))
}

/// Normalized posterior weight per dataset row.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightSet {
    weights: Vec<f64>,
    log_gamma: LogGamma,
}

impl WeightSet {
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn log_gamma(&self) -> LogGamma {
        self.log_gamma
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Softmax of `-dist * ln gamma` over rows, minimum distance subtracted.
///
/// With the infinite sentinel this is the limit distribution: uniform over
/// the rows at minimal distance, zero elsewhere.
pub fn posterior_weights(profile: &HammingProfile, log_gamma: LogGamma) -> WeightSet {
    let dists = profile.as_slice();
    let h_min = profile.min();
    let mut weights = Vec::with_capacity(dists.len());
    match log_gamma {
        LogGamma::Finite(lg) => {
            let mut total = 0.0;
            for &h in dists {
                let u = (-((h - h_min) as f64) * lg).exp();
                total += u;
                weights.push(u);
            }
            for w in &mut weights {
                *w /= total;
            }
        }
        LogGamma::Infinite => {
            let count = dists.iter().filter(|&&h| h == h_min).count() as f64;
            for &h in dists {
                weights.push(if h == h_min { 1.0 / count } else { 0.0 });
            }
        }
    }
    WeightSet {
        weights,
        log_gamma,
    }
}

/// Disjoint cover of row indices `0..M` by `S` near-equal subsets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    subsets: Vec<Vec<u32>>,
    membership: Vec<u32>,
}

impl Partition {
    pub fn subset_count(&self) -> usize {
        self.subsets.len()
    }

    /// Row indices of subset `s`, in shuffle order.
    pub fn subset(&self, s: usize) -> &[u32] {
        &self.subsets[s]
    }

    pub fn subsets(&self) -> &[Vec<u32>] {
        &self.subsets
    }

    /// Subset id that row `m` belongs to.
    pub fn membership(&self, m: usize) -> u32 {
        self.membership[m]
    }

    pub fn memberships(&self) -> &[u32] {
        &self.membership
    }
}

/// Splits the dataset rows into `subsets` random groups whose sizes differ
/// by at most one. The split depends only on the seed, not on thread count.
pub fn partition_subsets(ds: &DatasetStore, subsets: usize, seeds: &SeedSpec) -> Result<Partition> {
    let m = ds.len();
    if subsets == 0 || subsets > m {
        return Err(Error::BadSubsetCount { subsets, rows: m });
    }
    let mut order: Vec<u32> = (0..m as u32).collect();
    let mut rng = seeds.stream(StreamDomain::Partition, 0);
    order.shuffle(&mut rng);

    let base = m / subsets;
    let extra = m % subsets;
    let mut membership = vec![0u32; m];
    let mut out = Vec::with_capacity(subsets);
    let mut start = 0;
    for s in 0..subsets {
        let size = base + usize::from(s < extra);
        let chunk = order[start..start + size].to_vec();
        for &row in &chunk {
            membership[row as usize] = s as u32;
        }
        out.push(chunk);
        start += size;
    }
    Ok(Partition {
        subsets: out,
        membership,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn hamming_basics() {
        assert_eq!(hamming(&[1, 2, 3], &[1, 2, 3]).unwrap(), 0);
        assert_eq!(hamming(&[1, 2, 3], &[1, 0, 0]).unwrap(), 2);
        assert!(hamming(&[1, 2], &[1, 2, 3]).is_err());
    }

    #[test]
    fn log_gamma_values() {
        // K = 2, kappa = 1/2: gamma = (1 + 1/2) / (1/2) = 3.
        match log_gamma(0.5, 2).unwrap() {
            LogGamma::Finite(lg) => assert!((lg - 3.0f64.ln()).abs() < 1e-15),
            _ => panic!("expected finite"),
        }
        assert_eq!(log_gamma(0.0, 7).unwrap(), LogGamma::Finite(0.0));
        assert_eq!(log_gamma(1.0, 2).unwrap(), LogGamma::Infinite);
        assert!(log_gamma(-0.1, 2).is_err());
        assert!(log_gamma(1.1, 2).is_err());
        assert!(log_gamma(0.5, 1).is_err());
    }

    #[test]
    fn log_gamma_is_monotone_in_kappa() {
        let mut prev = f64::NEG_INFINITY;
        for i in 0..1000 {
            let kappa = i as f64 / 1000.0;
            match log_gamma(kappa, 5).unwrap() {
                LogGamma::Finite(lg) => {
                    assert!(lg > prev);
                    prev = lg;
                }
                _ => unreachable!(),
            }
        }
    }

    #[test]
    fn weights_match_hand_computed_example() {
        // Distances [0, 1] at gamma = 3 give weights [3/4, 1/4].
        let profile = HammingProfile::new(vec![0, 1]).unwrap();
        let ws = posterior_weights(&profile, LogGamma::Finite(3.0f64.ln()));
        assert!((ws.weights()[0] - 0.75).abs() < 1e-15);
        assert!((ws.weights()[1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sentinel_is_uniform_over_nearest() {
        let profile = HammingProfile::new(vec![2, 5, 2, 3]).unwrap();
        let ws = posterior_weights(&profile, LogGamma::Infinite);
        assert_eq!(ws.weights(), &[0.5, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn zero_log_gamma_is_uniform() {
        let profile = HammingProfile::new(vec![0, 3, 7]).unwrap();
        let ws = posterior_weights(&profile, LogGamma::Finite(0.0));
        for &w in ws.weights() {
            assert!((w - 1.0 / 3.0).abs() < 1e-15);
        }
    }

    #[test]
    fn huge_finite_log_gamma_approaches_sentinel() {
        let n = 12u32;
        let profile = HammingProfile::new(vec![4, 4, 5, 9, 12]).unwrap();
        let finite = posterior_weights(&profile, LogGamma::Finite(40.0 * n as f64));
        let limit = posterior_weights(&profile, LogGamma::Infinite);
        for (a, b) in finite.weights().iter().zip(limit.weights()) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_against_store() {
        let ds = DatasetStore::new(3, 4, vec![0, 0, 0, 1, 1, 1, 0, 1, 2]).unwrap();
        let p = hamming_profile(&ds, &[0, 1, 2]).unwrap();
        assert_eq!(p.as_slice(), &[2, 2, 0]);
        assert!(hamming_profile(&ds, &[0, 1]).is_err());
        assert!(hamming_profile(&ds, &[0, 1, 9]).is_err());
    }

    #[test]
    fn partition_covers_and_balances() {
        let ds = DatasetStore::new(1, 2, vec![0; 10].into_iter().map(|_| 0).collect()).unwrap();
        let seeds = SeedSpec::new(3);
        let part = partition_subsets(&ds, 3, &seeds).unwrap();
        let mut seen = vec![false; 10];
        for (sid, sub) in part.subsets().iter().enumerate() {
            for &row in sub {
                assert!(!seen[row as usize], "row {row} appears twice");
                seen[row as usize] = true;
                assert_eq!(part.membership(row as usize) as usize, sid);
            }
        }
        assert!(seen.into_iter().all(|s| s));
        let sizes: Vec<usize> = part.subsets().iter().map(|s| s.len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 10);
        assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);

        assert!(partition_subsets(&ds, 0, &seeds).is_err());
        assert!(partition_subsets(&ds, 11, &seeds).is_err());
    }

    #[test]
    fn partition_is_seed_deterministic() {
        let ds = DatasetStore::new(1, 2, vec![0; 100]).unwrap();
        let a = partition_subsets(&ds, 4, &SeedSpec::new(9)).unwrap();
        let b = partition_subsets(&ds, 4, &SeedSpec::new(9)).unwrap();
        let c = partition_subsets(&ds, 4, &SeedSpec::new(10)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn weights_sum_to_one(dists in prop::collection::vec(0u32..40, 1..512), lg in 0.0f64..30.0) {
            let profile = HammingProfile::new(dists).unwrap();
            let ws = posterior_weights(&profile, LogGamma::Finite(lg));
            let sum: f64 = ws.weights().iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-12);
            prop_assert!(ws.weights().iter().all(|&w| w >= 0.0));
        }

        #[test]
        fn weights_shift_invariant(dists in prop::collection::vec(0u32..20, 1..64), shift in 0u32..20, lg in 0.0f64..10.0) {
            let base = posterior_weights(&HammingProfile::new(dists.clone()).unwrap(), LogGamma::Finite(lg));
            let shifted: Vec<u32> = dists.iter().map(|d| d + shift).collect();
            let moved = posterior_weights(&HammingProfile::new(shifted).unwrap(), LogGamma::Finite(lg));
            // Subtracting the minimum makes the shift cancel exactly.
            prop_assert_eq!(base.weights(), moved.weights());
        }

        #[test]
        fn weights_monotone_in_distance(dists in prop::collection::vec(0u32..20, 2..64), lg in 0.01f64..10.0) {
            let profile = HammingProfile::new(dists.clone()).unwrap();
            let ws = posterior_weights(&profile, LogGamma::Finite(lg));
            for i in 0..dists.len() {
                for j in 0..dists.len() {
                    if dists[i] < dists[j] {
                        prop_assert!(ws.weights()[i] > ws.weights()[j]);
                    }
                }
            }
        }

        #[test]
        fn partition_complete_for_any_shape(m in 1usize..200, s in 1usize..16, seed in 0u64..1000) {
            prop_assume!(s <= m);
            let ds = DatasetStore::new(1, 2, vec![0; m]).unwrap();
            let part = partition_subsets(&ds, s, &SeedSpec::new(seed)).unwrap();
            let mut all: Vec<u32> = part.subsets().iter().flatten().copied().collect();
            all.sort_unstable();
            let expect: Vec<u32> = (0..m as u32).collect();
            prop_assert_eq!(all, expect);
            let sizes: Vec<usize> = part.subsets().iter().map(|x| x.len()).collect();
            prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        }
    }
}
