#![allow(dead_code)]

use std::collections::HashSet;

use pairflow::DatasetStore;
use rand::Rng;

pub fn random_seq(n: usize, k: u32, rng: &mut impl Rng) -> Vec<u32> {
    (0..n).map(|_| rng.gen_range(0..k)).collect()
}

pub fn random_dataset(n: usize, k: u32, m: usize, rng: &mut impl Rng) -> DatasetStore {
    let tokens = (0..n * m).map(|_| rng.gen_range(0..k)).collect();
    DatasetStore::new(n, k, tokens).unwrap()
}

/// Random rows with duplicates rejected, so coverage counting is exact.
pub fn distinct_random_dataset(n: usize, k: u32, m: usize, rng: &mut impl Rng) -> DatasetStore {
    let mut seen = HashSet::with_capacity(m);
    let mut rows = Vec::with_capacity(m * n);
    while seen.len() < m {
        let row = random_seq(n, k, rng);
        if seen.insert(row.clone()) {
            rows.extend(row);
        }
    }
    DatasetStore::new(n, k, rows).unwrap()
}

/// Two complementary binary centers with independent per-position flips.
pub fn two_cluster_dataset(n: usize, m: usize, flip: f64, rng: &mut impl Rng) -> DatasetStore {
    let center: Vec<u32> = random_seq(n, 2, rng);
    let mut rows = Vec::with_capacity(m * n);
    for i in 0..m {
        for &c in &center {
            let base = if i % 2 == 0 { c } else { 1 - c };
            let tok = if rng.gen::<f64>() < flip { 1 - base } else { base };
            rows.push(tok);
        }
    }
    DatasetStore::new(n, 2, rows).unwrap()
}
