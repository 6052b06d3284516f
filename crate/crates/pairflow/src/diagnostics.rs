//! Coverage, dependence and pairing-quality measurements.
//!
//! Coverage compares how many distinct dataset rows the sampler actually
//! reproduces against the closed-form expectation for sampling rows
//! uniformly with replacement. Total correlation measures how much the
//! positions of a sampler's output depend on each other when everything
//! except the random seed is held fixed; factorized samplers should score
//! near zero. Pair statistics summarize how far noise endpoints moved from
//! their data rows.

use std::collections::{HashMap, HashSet};

use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::data::DatasetStore;
use crate::error::{Error, Result};
use crate::schedule::Scheduler;
use crate::seed::{SeedSpec, StreamDomain};
use crate::transport::{sample_forward, PairSet, StepConfig};

/// Probability that a fixed row is hit at least once in `draws` uniform
/// draws with replacement from `rows` rows; equals the expected covered
/// fraction.
pub fn expected_coverage(rows: usize, draws: usize) -> f64 {
    assert!(rows > 0);
    1.0 - (1.0 - 1.0 / rows as f64).powi(draws as i32)
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub rows: usize,
    pub draws: usize,
    /// Distinct dataset rows reproduced exactly by at least one draw.
    pub matched_unique: usize,
    /// Draws that did not match any dataset row.
    pub unmatched_draws: usize,
    pub empirical: f64,
    pub predicted: f64,
}

/// Draws `draws` forward samples (one stream per draw) and counts how many
/// distinct dataset rows were reproduced exactly.
///
/// The prediction assumes dataset rows are distinct; duplicated rows are
/// collapsed on the empirical side.
pub fn empirical_coverage(
    ds: &DatasetStore,
    draws: usize,
    cfg: &StepConfig,
    sched: &Scheduler,
    seeds: &SeedSpec,
) -> Result<CoverageReport> {
    let samples: Vec<Vec<u32>> = (0..draws)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.stream(StreamDomain::CoverageDraw, i as u64);
            sample_forward(ds, cfg, sched, &mut rng)
        })
        .collect::<Result<_>>()?;

    let mut row_ids: HashMap<&[u32], usize> = HashMap::with_capacity(ds.len());
    for (m, row) in ds.iter_rows().enumerate() {
        row_ids.entry(row).or_insert(m);
    }
    let mut hit: HashSet<usize> = HashSet::new();
    let mut unmatched = 0usize;
    for s in &samples {
        match row_ids.get(s.as_slice()) {
            Some(&id) => {
                hit.insert(id);
            }
            None => unmatched += 1,
        }
    }
    Ok(CoverageReport {
        rows: ds.len(),
        draws,
        matched_unique: hit.len(),
        unmatched_draws: unmatched,
        empirical: hit.len() as f64 / ds.len() as f64,
        predicted: expected_coverage(ds.len(), draws),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PairStats {
    pub pairs: usize,
    pub positions: usize,
    pub mean: f64,
    pub std: f64,
    /// `histogram[d]` counts pairs at Hamming distance d.
    pub histogram: Vec<u64>,
    /// Expected distance if endpoints were paired independently:
    /// `N * (1 - 1/K)`.
    pub independent_baseline: f64,
}

/// Hamming distance summary between the endpoints of every pair.
pub fn pair_hamming_stats(ps: &PairSet) -> Result<PairStats> {
    if ps.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let n = ps.n();
    let mut histogram = vec![0u64; n + 1];
    let mut sum = 0.0;
    let mut sum_sq = 0.0;
    for rec in ps.records() {
        let d = crate::kernel::hamming(&rec.x0, &rec.x1)?;
        histogram[d] += 1;
        sum += d as f64;
        sum_sq += (d * d) as f64;
    }
    let count = ps.len() as f64;
    let mean = sum / count;
    let var = (sum_sq / count - mean * mean).max(0.0);
    Ok(PairStats {
        pairs: ps.len(),
        positions: n,
        mean,
        std: var.sqrt(),
        histogram,
        independent_baseline: n as f64 * (1.0 - 1.0 / ps.k() as f64),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TcReport {
    pub anchors: usize,
    pub replicates: usize,
    /// Plug-in total correlation per anchor, in nats.
    pub per_anchor: Vec<f64>,
    pub mean_nats: f64,
    pub std_error: f64,
}

/// Plug-in total correlation of a conditional sampler.
///
/// For each anchor the sampler is called `replicates` times with fresh
/// seed streams and everything else fixed; the statistic is the sum of
/// empirical per-position entropies minus the empirical joint entropy.
/// It is nonnegative by construction and biased upward by roughly
/// `(support sizes - 1) / (2 * replicates)` nats.
///
/// The sampler receives `(anchor, replicate, rng)` and must not draw
/// randomness from anywhere else.
pub fn total_correlation<F>(
    sampler: F,
    anchors: usize,
    replicates: usize,
    seeds: &SeedSpec,
) -> Result<TcReport>
where
    F: Fn(usize, usize, &mut ChaCha8Rng) -> Result<Vec<u32>> + Sync,
{
    if anchors == 0 || replicates < 2 {
        return Err(Error::OutOfDomain {
            name: "anchors/replicates",
            value: replicates as f64,
            lo: 2.0,
            hi: f64::INFINITY,
        });
    }
    let per_anchor: Vec<f64> = (0..anchors)
        .into_par_iter()
        .map(|a| {
            let mut joint: HashMap<Vec<u32>, u32> = HashMap::new();
            let mut marginals: Vec<HashMap<u32, u32>> = Vec::new();
            for r in 0..replicates {
                let mut rng = seeds.stream(
                    StreamDomain::TcReplicate,
                    (a * replicates + r) as u64,
                );
                let seq = sampler(a, r, &mut rng)?;
                if marginals.is_empty() {
                    marginals = vec![HashMap::new(); seq.len()];
                } else if marginals.len() != seq.len() {
                    return Err(Error::LengthMismatch {
                        left: seq.len(),
                        right: marginals.len(),
                    });
                }
                for (i, &tok) in seq.iter().enumerate() {
                    *marginals[i].entry(tok).or_insert(0) += 1;
                }
                *joint.entry(seq).or_insert(0) += 1;
            }
            let total = replicates as f64;
            let marginal_sum: f64 = marginals
                .iter()
                .map(|counts| entropy(counts.values().copied(), total))
                .sum();
            let joint_entropy = entropy(joint.values().copied(), total);
            Ok(marginal_sum - joint_entropy)
        })
        .collect::<Result<_>>()?;

    let mean = per_anchor.iter().sum::<f64>() / anchors as f64;
    let std_error = if anchors > 1 {
        let var = per_anchor
            .iter()
            .map(|x| (x - mean).powi(2))
            .sum::<f64>()
            / (anchors - 1) as f64;
        (var / anchors as f64).sqrt()
    } else {
        0.0
    };
    Ok(TcReport {
        anchors,
        replicates,
        per_anchor,
        mean_nats: mean,
        std_error,
    })
}

fn entropy(counts: impl Iterator<Item = u32>, total: f64) -> f64 {
    let mut h = 0.0;
    for c in counts {
        if c > 0 {
            let p = c as f64 / total;
            h -= p * p.ln();
        }
    }
    h
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub total: usize,
    /// Distinct sequences among the samples.
    pub unique: usize,
    /// Distinct sequences that do not appear in the dataset.
    pub novel: usize,
}

/// Counts distinct samples and distinct samples absent from the dataset.
pub fn uniqueness_novelty(samples: &[Vec<u32>], ds: &DatasetStore) -> UniquenessReport {
    let dataset_rows: HashSet<&[u32]> = ds.iter_rows().collect();
    let distinct: HashSet<&[u32]> = samples.iter().map(|s| s.as_slice()).collect();
    let novel = distinct
        .iter()
        .filter(|s| !dataset_rows.contains(*s))
        .count();
    UniquenessReport {
        total: samples.len(),
        unique: distinct.len(),
        novel,
    }
}
