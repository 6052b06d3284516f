//! Closed-form denoisers and per-position flow velocities.
//!
//! Given a dataset of M rows and a state `z`, the factorized posterior over
//! clean sequences weights row `d_m` by `gamma^(-hamming(d_m, z))`. Every
//! quantity here is an N x K grid derived from those weights:
//!
//! * `denoiser_forward`: probability that position i ends at token x,
//! * `velocity_forward`: rate field transporting mass toward the data,
//! * `noise_predictor`: probability that position i started at token x,
//! * `velocity_backward`: rate field transporting mass back to noise.
//!
//! The forward velocity scales by `1 / (1 - kappa)` and is singular at
//! `t = 1`; callers must finish a forward trajectory with a terminal jump
//! rather than an Euler step. The backward velocity stays finite on the
//! whole interval, with the `t = 1` weights given by the nearest-row limit.

use crate::data::DatasetStore;
use crate::error::{Error, Result};
use crate::kernel::{hamming_profile, log_gamma, HammingProfile, LogGamma};
use crate::schedule::Scheduler;

/// What the rows of a grid represent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GridKind {
    /// Rows are probability distributions: nonnegative, sum 1.
    Probability,
    /// Rows are rate vectors: sum 0.
    Velocity,
}

/// Dense N x K matrix, one row per sequence position, one column per token.
#[derive(Debug, Clone, PartialEq)]
pub struct DistributionGrid {
    n: usize,
    k: u32,
    kind: GridKind,
    values: Vec<f64>,
}

impl DistributionGrid {
    pub(crate) fn zeros(n: usize, k: u32, kind: GridKind) -> Self {
        DistributionGrid {
            n,
            k,
            kind,
            values: vec![0.0; n * k as usize],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn kind(&self) -> GridKind {
        self.kind
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let k = self.k as usize;
        &self.values[i * k..(i + 1) * k]
    }

    pub fn get(&self, i: usize, token: u32) -> f64 {
        self.values[i * self.k as usize + token as usize]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.values.chunks_exact(self.k as usize)
    }

    /// Largest deviation of any row sum from its target (1 or 0).
    pub fn max_row_sum_error(&self) -> f64 {
        let target = match self.kind {
            GridKind::Probability => 1.0,
            GridKind::Velocity => 0.0,
        };
        self.rows()
            .map(|r| (r.iter().sum::<f64>() - target).abs())
            .fold(0.0, f64::max)
    }

    /// Most negative entry (0 if none); probability grids should be >= 0.
    pub fn min_entry(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Largest absolute difference against another grid of the same shape.
    pub fn max_abs_diff(&self, other: &DistributionGrid) -> f64 {
        assert_eq!(self.n, other.n);
        assert_eq!(self.k, other.k);
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }
}

/// Per-row multiplier table: `pow[j] = exp(-j * lg)` for distance offsets
/// `j = h - h_min`. Entries underflow to exact 0 for far rows, which lets
/// hot loops skip them without changing any result.
pub(crate) fn offset_weight_table(n: usize, lg: f64) -> Vec<f64> {
    (0..=n).map(|j| (-(j as f64) * lg).exp()).collect()
}

/// Accumulates the normalized agreement fraction per position:
/// `s[i] = sum_m w_m * [d_m[i] == z[i]]` with posterior weights `w`.
///
/// Writes into `s` (length N) and returns nothing else; this is the shared
/// inner pass of the noise predictor and the backward velocity.
pub(crate) fn accumulate_agreement(
    ds: &DatasetStore,
    z: &[u32],
    profile: &[u32],
    lg: LogGamma,
    s: &mut [f64],
) {
    let n = ds.n();
    debug_assert_eq!(s.len(), n);
    debug_assert_eq!(profile.len(), ds.len());
    s.fill(0.0);
    let h_min = *profile.iter().min().expect("dataset is nonempty");
    match lg {
        LogGamma::Finite(lg) => {
            let table = offset_weight_table(n, lg);
            let mut total = 0.0;
            for (row, &h) in ds.iter_rows().zip(profile) {
                let u = table[(h - h_min) as usize];
                if u == 0.0 {
                    continue;
                }
                total += u;
                for (si, (&d, &zi)) in s.iter_mut().zip(row.iter().zip(z)) {
                    *si += if d == zi { u } else { 0.0 };
                }
            }
            for si in s.iter_mut() {
                *si /= total;
            }
        }
        LogGamma::Infinite => {
            let mut count = 0.0;
            for (row, &h) in ds.iter_rows().zip(profile) {
                if h != h_min {
                    continue;
                }
                count += 1.0;
                for (si, (&d, &zi)) in s.iter_mut().zip(row.iter().zip(z)) {
                    *si += if d == zi { 1.0 } else { 0.0 };
                }
            }
            for si in s.iter_mut() {
                *si /= count;
            }
        }
    }
}

/// Accumulates the normalized posterior token mixture per position:
/// `mix[i][x] = sum_m w_m * [d_m[i] == x]`.
fn accumulate_mixture(ds: &DatasetStore, profile: &[u32], lg: LogGamma, mix: &mut [f64]) {
    let n = ds.n();
    let k = ds.k() as usize;
    debug_assert_eq!(mix.len(), n * k);
    mix.fill(0.0);
    let h_min = *profile.iter().min().expect("dataset is nonempty");
    match lg {
        LogGamma::Finite(lg) => {
            let table = offset_weight_table(n, lg);
            let mut total = 0.0;
            for (row, &h) in ds.iter_rows().zip(profile) {
                let u = table[(h - h_min) as usize];
                if u == 0.0 {
                    continue;
                }
                total += u;
                for (i, &d) in row.iter().enumerate() {
                    mix[i * k + d as usize] += u;
                }
            }
            for v in mix.iter_mut() {
                *v /= total;
            }
        }
        LogGamma::Infinite => {
            let mut count = 0.0;
            for (row, &h) in ds.iter_rows().zip(profile) {
                if h != h_min {
                    continue;
                }
                count += 1.0;
                for (i, &d) in row.iter().enumerate() {
                    mix[i * k + d as usize] += 1.0;
                }
            }
            for v in mix.iter_mut() {
                *v /= count;
            }
        }
    }
}

/// Posterior distribution of the clean token at every position given `z`
/// at mixing weight `kappa`. At `kappa = 1` this is the nearest-row limit.
pub fn denoiser_forward(ds: &DatasetStore, z: &[u32], kappa: f64) -> Result<DistributionGrid> {
    let lg = log_gamma(kappa, ds.k())?;
    let profile = hamming_profile(ds, z)?;
    Ok(denoiser_from_profile(ds, &profile, lg))
}

pub(crate) fn denoiser_from_profile(
    ds: &DatasetStore,
    profile: &HammingProfile,
    lg: LogGamma,
) -> DistributionGrid {
    let mut grid = DistributionGrid::zeros(ds.n(), ds.k(), GridKind::Probability);
    accumulate_mixture(ds, profile.as_slice(), lg, grid.values_mut());
    grid
}

/// Forward transport rates at time `t < 1`:
/// `v[i][x] = kappa_dot / (1 - kappa) * (denoiser[i][x] - [x == z[i]])`.
pub fn velocity_forward(
    ds: &DatasetStore,
    z: &[u32],
    t: f64,
    sched: &Scheduler,
) -> Result<DistributionGrid> {
    let kappa = sched.kappa(t)?;
    if kappa >= 1.0 {
        return Err(Error::SingularTime);
    }
    let rate = sched.kappa_dot(t)? / (1.0 - kappa);
    let mut grid = denoiser_forward(ds, z, kappa)?;
    let k = grid.k as usize;
    for (i, &zi) in z.iter().enumerate() {
        let row = &mut grid.values[i * k..(i + 1) * k];
        for v in row.iter_mut() {
            *v *= rate;
        }
        row[zi as usize] -= rate;
    }
    grid.kind = GridKind::Velocity;
    Ok(grid)
}

/// Posterior distribution of the source token at every position:
/// `p0[i][x] = [x == z[i]] - kappa (K [x == z[i]] - 1) / (1 + (K-1) kappa) * s[i]`
/// where `s[i]` is the weighted fraction of rows agreeing with `z` at `i`.
pub fn noise_predictor(ds: &DatasetStore, z: &[u32], kappa: f64) -> Result<DistributionGrid> {
    let lg = log_gamma(kappa, ds.k())?;
    let profile = hamming_profile(ds, z)?;
    let k = ds.k();
    let mut s = vec![0.0; ds.n()];
    accumulate_agreement(ds, z, profile.as_slice(), lg, &mut s);

    let coeff = kappa / (1.0 + (k - 1) as f64 * kappa);
    let mut grid = DistributionGrid::zeros(ds.n(), k, GridKind::Probability);
    let kk = k as usize;
    for (i, (&zi, &si)) in z.iter().zip(&s).enumerate() {
        let off = coeff * si;
        let row = &mut grid.values[i * kk..(i + 1) * kk];
        row.fill(off);
        row[zi as usize] = 1.0 - (k - 1) as f64 * off;
    }
    Ok(grid)
}

/// Backward transport rates, finite on all of [0, 1]:
/// `v[i][x] = kappa_dot (K [x == z[i]] - 1) / (1 + (K-1) kappa) * s[i]`.
///
/// At `t = 1` the weights defining `s` are the nearest-row limit.
pub fn velocity_backward(
    ds: &DatasetStore,
    z: &[u32],
    t: f64,
    sched: &Scheduler,
) -> Result<DistributionGrid> {
    let kappa = sched.kappa(t)?;
    let kappa_dot = sched.kappa_dot(t)?;
    let lg = log_gamma(kappa, ds.k())?;
    let profile = hamming_profile(ds, z)?;
    let mut s = vec![0.0; ds.n()];
    accumulate_agreement(ds, z, profile.as_slice(), lg, &mut s);
    Ok(backward_grid_from_agreement(ds.n(), ds.k(), z, &s, kappa, kappa_dot))
}

pub(crate) fn backward_grid_from_agreement(
    n: usize,
    k: u32,
    z: &[u32],
    s: &[f64],
    kappa: f64,
    kappa_dot: f64,
) -> DistributionGrid {
    let pref = kappa_dot / (1.0 + (k - 1) as f64 * kappa);
    let mut grid = DistributionGrid::zeros(n, k, GridKind::Velocity);
    let kk = k as usize;
    for (i, (&zi, &si)) in z.iter().zip(s).enumerate() {
        let off = -pref * si;
        let row = &mut grid.values[i * kk..(i + 1) * kk];
        row.fill(off);
        row[zi as usize] = (k - 1) as f64 * pref * si;
    }
    grid
}
