//! Exhaustive reference implementations.
//!
//! These compute the same posteriors as [`crate::velocity`] by summing the
//! factorized interpolation kernel over every source sequence `x0` in `V^N`
//! and every dataset row, with no algebraic shortcuts:
//!
//! ```text
//! weight(x0, m) = prod_j ( kappa * [d_m[j] == z[j]] + (1 - kappa) * [x0[j] == z[j]] )
//! ```
//!
//! Cost is `O(K^N * M * N)`, so instances are guarded by `K^N <= 10^6`.
//! They exist to pin down the closed forms in tests and stay available as
//! library calls for small instances; they are not meant for production
//! sizes. `kappa = 1` is rejected because the raw sum degenerates to 0/0
//! whenever `z` is not itself a dataset row; approach it with
//! `kappa = 1 - eps` instead.

use crate::data::DatasetStore;
use crate::error::{Error, Result};
use crate::velocity::{DistributionGrid, GridKind};

const ENUM_LIMIT: f64 = 1e6;

fn check_instance(ds: &DatasetStore, kappa: f64) -> Result<()> {
    let combos = (ds.k() as f64).powi(ds.n() as i32);
    if !combos.is_finite() || combos > ENUM_LIMIT {
        return Err(Error::InstanceTooLarge {
            requested: combos,
            limit: ENUM_LIMIT,
        });
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::OutOfDomain {
            name: "kappa",
            value: kappa,
            lo: 0.0,
            hi: 1.0,
        });
    }
    Ok(())
}

/// Advances `x0` through `V^N` in odometer order; false once exhausted.
fn next_source(x0: &mut [u32], k: u32) -> bool {
    for slot in x0.iter_mut().rev() {
        *slot += 1;
        if *slot < k {
            return true;
        }
        *slot = 0;
    }
    false
}

/// What the numerator of the enumeration scores: the clean token (row
/// token) or the source token.
#[derive(Clone, Copy)]
enum Target {
    Clean,
    Source,
}

fn enumerate(ds: &DatasetStore, z: &[u32], kappa: f64, target: Target) -> Result<DistributionGrid> {
    check_instance(ds, kappa)?;
    ds.validate_seq(z)?;
    let n = ds.n();
    let k = ds.k() as usize;

    let mut numerator = vec![0.0f64; n * k];
    let mut denominator = 0.0f64;
    let mut x0 = vec![0u32; n];
    loop {
        for row in ds.iter_rows() {
            let mut w = 1.0;
            for j in 0..n {
                let clean = if row[j] == z[j] { kappa } else { 0.0 };
                let source = if x0[j] == z[j] { 1.0 - kappa } else { 0.0 };
                w *= clean + source;
            }
            if w == 0.0 {
                continue;
            }
            denominator += w;
            match target {
                Target::Clean => {
                    for (i, &d) in row.iter().enumerate() {
                        numerator[i * k + d as usize] += w;
                    }
                }
                Target::Source => {
                    for (i, &x) in x0.iter().enumerate() {
                        numerator[i * k + x as usize] += w;
                    }
                }
            }
        }
        if !next_source(&mut x0, ds.k()) {
            break;
        }
    }

    let mut grid = DistributionGrid::zeros(n, ds.k(), GridKind::Probability);
    for (slot, num) in grid.values_mut().iter_mut().zip(&numerator) {
        *slot = num / denominator;
    }
    Ok(grid)
}

/// Brute-force posterior of the clean token per position.
pub fn denoiser(ds: &DatasetStore, z: &[u32], kappa: f64) -> Result<DistributionGrid> {
    enumerate(ds, z, kappa, Target::Clean)
}

/// Brute-force posterior of the source token per position.
pub fn noise_predictor(ds: &DatasetStore, z: &[u32], kappa: f64) -> Result<DistributionGrid> {
    enumerate(ds, z, kappa, Target::Source)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_oversized_instances() {
        let ds = DatasetStore::new(30, 4, vec![0; 30]).unwrap();
        assert!(matches!(
            denoiser(&ds, &[0; 30], 0.5),
            Err(Error::InstanceTooLarge { .. })
        ));
    }

    #[test]
    fn rejects_kappa_one() {
        let ds = DatasetStore::new(2, 2, vec![0, 0]).unwrap();
        assert!(denoiser(&ds, &[0, 0], 1.0).is_err());
    }

    #[test]
    fn denoiser_reproduces_hand_enumeration() {
        // ds = {(0,0), (0,1)}, z = (0,0), kappa = 1/2. Summing the kernel by
        // hand gives row masses 2.25 and 0.75, so position 2 of the clean
        // posterior is [0.75, 0.25].
        let ds = DatasetStore::new(2, 2, vec![0, 0, 0, 1]).unwrap();
        let g = denoiser(&ds, &[0, 0], 0.5).unwrap();
        assert!((g.get(1, 0) - 0.75).abs() < 1e-14);
        assert!((g.get(1, 1) - 0.25).abs() < 1e-14);
        assert!((g.get(0, 0) - 1.0).abs() < 1e-14);
    }

    #[test]
    fn noise_predictor_reproduces_hand_enumeration() {
        // Same instance; source masses at position 2 work out to
        // [2.25, 0.75] / 3 = [0.75, 0.25].
        let ds = DatasetStore::new(2, 2, vec![0, 0, 0, 1]).unwrap();
        let g = noise_predictor(&ds, &[0, 0], 0.5).unwrap();
        assert!((g.get(1, 0) - 0.75).abs() < 1e-14);
        assert!((g.get(1, 1) - 0.25).abs() < 1e-14);
    }

    #[test]
    fn rows_are_distributions() {
        let ds = DatasetStore::new(3, 3, vec![0, 1, 2, 2, 1, 0, 1, 1, 1]).unwrap();
        for kappa in [0.0, 0.3, 0.8, 0.999] {
            for grid in [
                denoiser(&ds, &[1, 0, 2], kappa).unwrap(),
                noise_predictor(&ds, &[1, 0, 2], kappa).unwrap(),
            ] {
                assert!(grid.max_row_sum_error() < 1e-12);
                assert!(grid.min_entry() >= 0.0);
            }
        }
    }
}
