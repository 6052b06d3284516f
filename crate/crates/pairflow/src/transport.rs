//! Trajectory integration and pair construction.
//!
//! Forward sampling starts from uniform noise and follows the forward
//! velocity on a uniform grid, finishing with a terminal jump from the
//! `kappa = 1` denoiser because the forward field is singular there.
//! Backward inversion starts from a dataset row at `t = 1` (where the
//! backward field is finite) and integrates down to `t = 0`, producing the
//! noise endpoint coupled to that row.
//!
//! `pairflow` runs one inversion per dataset row. Each row draws from its
//! own seed-derived stream, so results are identical for any thread count.
//!
//! Pair files (`.dpair`) are laid out as:
//!
//! ```text
//! magic "DPAIR" | version u8 = 1 | N u32 | K u32 | M u64
//! | scheduler kind u8 | steps u32 | subset count u32 | master seed u64
//! | M records: row index u64, subset id u32, x0 N*u32, x1 N*u32
//! | crc32 u32 over everything above
//! ```
//!
//! Integers little-endian; the checksum is IEEE CRC-32.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;

use crate::data::DatasetStore;
use crate::error::{Error, Result};
use crate::kernel::{hamming_profile, log_gamma, partition_subsets};
use crate::schedule::{Direction, Scheduler, TimeGrid};
use crate::seed::{SeedSpec, StreamDomain};
use crate::velocity::{
    accumulate_agreement, denoiser_forward, velocity_forward, DistributionGrid,
};

pub const DPAIR_MAGIC: &[u8; 5] = b"DPAIR";
pub const DPAIR_VERSION: u8 = 1;

/// How a forward trajectory picks its terminal tokens.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalRule {
    /// Sample each position from the terminal denoiser.
    Sample,
    /// Take the most likely token (lowest index wins ties).
    Argmax,
}

/// Step count and stepping behaviour shared by both directions.
#[derive(Debug, Clone, Copy)]
pub struct StepConfig {
    steps: u32,
    final_rule: FinalRule,
    clamp: bool,
}

impl StepConfig {
    pub fn new(steps: u32) -> Result<Self> {
        if steps == 0 {
            return Err(Error::ZeroSteps);
        }
        Ok(StepConfig {
            steps,
            final_rule: FinalRule::Sample,
            clamp: true,
        })
    }

    pub fn with_final_rule(mut self, rule: FinalRule) -> Self {
        self.final_rule = rule;
        self
    }

    /// Disabling the clamp turns negative step probabilities into errors
    /// instead of truncating them to zero.
    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn steps(&self) -> u32 {
        self.steps
    }

    pub fn final_rule(&self) -> FinalRule {
        self.final_rule
    }

    pub fn clamp(&self) -> bool {
        self.clamp
    }
}

/// Entries more negative than this are errors even in clamp mode; anything
/// in `[-EPS, 0)` is treated as rounding noise.
const NEG_EPS: f64 = 1e-12;

fn sample_index(probs: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last_positive = 0;
    for (x, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last_positive = x;
        }
        acc += p;
        if u < acc {
            return x;
        }
    }
    // Rounding can leave the cumulative sum a hair under 1.
    last_positive
}

fn argmax_index(probs: &[f64]) -> usize {
    let mut best = 0;
    for (x, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = x;
        }
    }
    best
}

/// Builds the one-step distribution for a single position and samples it.
/// `signed_h` is `+h` forward, `-h` backward.
fn step_position(
    scratch: &mut [f64],
    vrow: &[f64],
    zi: usize,
    signed_h: f64,
    clamp: bool,
    rng: &mut impl Rng,
) -> Result<u32> {
    for (x, (slot, &v)) in scratch.iter_mut().zip(vrow).enumerate() {
        let indicator = if x == zi { 1.0 } else { 0.0 };
        let p = indicator + signed_h * v;
        if p < 0.0 {
            if !clamp && p < -NEG_EPS {
                return Err(Error::OutOfDomain {
                    name: "step probability",
                    value: p,
                    lo: 0.0,
                    hi: 1.0,
                });
            }
            *slot = 0.0;
        } else {
            *slot = p;
        }
    }
    let total: f64 = scratch.iter().sum();
    debug_assert!(total > 0.0, "step distribution vanished");
    for p in scratch.iter_mut() {
        *p /= total;
    }
    Ok(sample_index(scratch, rng) as u32)
}

/// One Euler step of the whole sequence against a velocity grid.
///
/// Per position the distribution is `indicator(z[i]) + sign * h * v[i]`,
/// clamped at zero and renormalized (or rejected if clamping is off), then
/// sampled independently.
pub fn step_categorical(
    z: &[u32],
    grid: &DistributionGrid,
    h: f64,
    direction: Direction,
    clamp: bool,
    rng: &mut impl Rng,
) -> Result<Vec<u32>> {
    if z.len() != grid.n() {
        return Err(Error::LengthMismatch {
            left: z.len(),
            right: grid.n(),
        });
    }
    if !(h > 0.0 && h <= 1.0) {
        return Err(Error::OutOfDomain {
            name: "h",
            value: h,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let signed_h = match direction {
        Direction::Forward => h,
        Direction::Backward => -h,
    };
    let k = grid.k() as usize;
    let mut scratch = vec![0.0; k];
    let mut out = Vec::with_capacity(z.len());
    for (i, &zi) in z.iter().enumerate() {
        if zi as usize >= k {
            return Err(Error::TokenOutOfRange {
                token: zi,
                row: 0,
                position: i,
                k: grid.k(),
            });
        }
        out.push(step_position(
            &mut scratch,
            grid.row(i),
            zi as usize,
            signed_h,
            clamp,
            rng,
        )?);
    }
    Ok(out)
}

/// Draws one sequence from the model: uniform noise at `t = 0`, Euler steps
/// up to `t = 1 - 1/T`, then a terminal jump from the `kappa = 1` denoiser.
pub fn sample_forward(
    ds: &DatasetStore,
    cfg: &StepConfig,
    sched: &Scheduler,
    rng: &mut impl Rng,
) -> Result<Vec<u32>> {
    let grid_t = TimeGrid::new(cfg.steps, Direction::Forward)?;
    let h = grid_t.step_size();
    let k = ds.k();
    let mut z: Vec<u32> = (0..ds.n()).map(|_| rng.gen_range(0..k)).collect();
    for step in 0..cfg.steps - 1 {
        let t = grid_t.node(step);
        let v = velocity_forward(ds, &z, t, sched)?;
        z = step_categorical(&z, &v, h, Direction::Forward, cfg.clamp, rng)?;
    }
    let terminal = denoiser_forward(ds, &z, 1.0)?;
    for (i, zi) in z.iter_mut().enumerate() {
        let row = terminal.row(i);
        *zi = match cfg.final_rule {
            FinalRule::Sample => sample_index(row, rng) as u32,
            FinalRule::Argmax => argmax_index(row) as u32,
        };
    }
    Ok(z)
}

/// Integrates a dataset row backward from `t = 1` to `t = 0`, returning the
/// coupled noise endpoint.
///
/// Equivalent to repeated [`velocity_backward`](crate::velocity_backward)
/// plus [`step_categorical`], but keeps the Hamming profile of `z` against
/// the dataset incrementally up to date instead of recomputing it, and
/// reuses buffers across steps.
pub fn invert(
    ds: &DatasetStore,
    x1: &[u32],
    cfg: &StepConfig,
    sched: &Scheduler,
    rng: &mut impl Rng,
) -> Result<Vec<u32>> {
    let grid_t = TimeGrid::new(cfg.steps, Direction::Backward)?;
    let h = grid_t.step_size();
    let n = ds.n();
    let k = ds.k();
    let kk = k as usize;

    let mut z = x1.to_vec();
    let mut profile = hamming_profile(ds, &z)?.as_slice().to_vec();
    let mut s = vec![0.0; n];
    let mut vrow = vec![0.0; kk];
    let mut scratch = vec![0.0; kk];
    let mut changes: Vec<(usize, u32, u32)> = Vec::new();

    for step in 0..cfg.steps {
        let t = grid_t.node(step);
        let kappa = sched.kappa(t)?;
        let kappa_dot = sched.kappa_dot(t)?;
        let lg = log_gamma(kappa, k)?;
        accumulate_agreement(ds, &z, &profile, lg, &mut s);

        let pref = kappa_dot / (1.0 + (k - 1) as f64 * kappa);
        changes.clear();
        for i in 0..n {
            let zi = z[i];
            // Mirrors the velocity_backward row layout exactly.
            let off = -pref * s[i];
            vrow.fill(off);
            vrow[zi as usize] = (k - 1) as f64 * pref * s[i];
            let next = step_position(&mut scratch, &vrow, zi as usize, -h, cfg.clamp, rng)?;
            if next != zi {
                changes.push((i, zi, next));
                z[i] = next;
            }
        }
        if !changes.is_empty() {
            for (row, dist) in ds.iter_rows().zip(profile.iter_mut()) {
                for &(i, old, new) in &changes {
                    let d = row[i];
                    if d == old {
                        *dist += 1;
                    } else if d == new {
                        *dist -= 1;
                    }
                }
            }
        }
    }
    Ok(z)
}

/// One noise/data pair produced by inversion.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairRecord {
    pub row_index: u64,
    pub subset_id: u32,
    pub x0: Vec<u32>,
    pub x1: Vec<u32>,
}

/// Run metadata carried inside a pair file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairMeta {
    pub master_seed: u64,
    pub steps: u32,
    pub scheduler_code: u8,
    pub subset_count: u32,
}

/// All pairs from one run, ordered by dataset row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairSet {
    n: usize,
    k: u32,
    meta: PairMeta,
    records: Vec<PairRecord>,
}

impl PairSet {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn meta(&self) -> &PairMeta {
        &self.meta
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[PairRecord] {
        &self.records
    }
}

/// Inverts every dataset row within its random subset, in parallel.
///
/// Subsets are drawn once from the partition stream; each row then uses its
/// own stream, so the output is a pure function of `(ds, cfg, sched, seeds,
/// subsets)` regardless of thread count.
pub fn pairflow(
    ds: &DatasetStore,
    cfg: &StepConfig,
    sched: &Scheduler,
    seeds: &SeedSpec,
    subsets: usize,
) -> Result<PairSet> {
    let partition = partition_subsets(ds, subsets, seeds)?;
    let stores: Vec<DatasetStore> = partition
        .subsets()
        .iter()
        .map(|idx| ds.gather(idx))
        .collect::<Result<_>>()?;

    let records: Vec<PairRecord> = (0..ds.len())
        .into_par_iter()
        .map(|m| {
            let sid = partition.membership(m);
            let mut rng = seeds.stream(StreamDomain::PairRow, m as u64);
            let x1 = ds.row(m);
            let x0 = invert(&stores[sid as usize], x1, cfg, sched, &mut rng)?;
            Ok(PairRecord {
                row_index: m as u64,
                subset_id: sid,
                x0,
                x1: x1.to_vec(),
            })
        })
        .collect::<Result<_>>()?;

    Ok(PairSet {
        n: ds.n(),
        k: ds.k(),
        meta: PairMeta {
            master_seed: seeds.master(),
            steps: cfg.steps(),
            scheduler_code: sched.kind_code(),
            subset_count: subsets as u32,
        },
        records,
    })
}

/// Serializes a pair set to the on-disk layout, checksum included.
pub fn encode_pairs(ps: &PairSet) -> Vec<u8> {
    let n = ps.n;
    let mut buf =
        Vec::with_capacity(34 + ps.records.len() * (12 + 8 * n));
    buf.extend_from_slice(DPAIR_MAGIC);
    buf.push(DPAIR_VERSION);
    buf.extend_from_slice(&(n as u32).to_le_bytes());
    buf.extend_from_slice(&ps.k.to_le_bytes());
    buf.extend_from_slice(&(ps.records.len() as u64).to_le_bytes());
    buf.push(ps.meta.scheduler_code);
    buf.extend_from_slice(&ps.meta.steps.to_le_bytes());
    buf.extend_from_slice(&ps.meta.subset_count.to_le_bytes());
    buf.extend_from_slice(&ps.meta.master_seed.to_le_bytes());
    for rec in &ps.records {
        buf.extend_from_slice(&rec.row_index.to_le_bytes());
        buf.extend_from_slice(&rec.subset_id.to_le_bytes());
        for &tok in rec.x0.iter().chain(&rec.x1) {
            buf.extend_from_slice(&tok.to_le_bytes());
        }
    }
    let crc = crc32fast::hash(&buf);
    buf.extend_from_slice(&crc.to_le_bytes());
    buf
}

pub fn write_pairs(ps: &PairSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_pairs(ps);
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    w.write_all(&bytes)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Parses the on-disk layout; `label` names the source in errors.
pub fn decode_pairs(bytes: &[u8], label: &Path) -> Result<PairSet> {
    if bytes.len() < 4 {
        return Err(Error::malformed(label, "file too short"));
    }
    let (body, crc_bytes) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(crc_bytes.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(Error::ChecksumMismatch {
            path: label.into(),
            stored,
            computed,
        });
    }

    let mut cur = Cursor::new(body, label);
    let magic = cur.take(5)?;
    if magic != DPAIR_MAGIC {
        return Err(Error::BadMagic {
            path: label.into(),
            expected: "DPAIR",
        });
    }
    let version = cur.u8()?;
    if version != DPAIR_VERSION {
        return Err(Error::BadVersion {
            path: label.into(),
            version,
        });
    }
    let n = cur.u32()? as usize;
    let k = cur.u32()?;
    let m = cur.u64()?;
    let scheduler_code = cur.u8()?;
    let steps = cur.u32()?;
    let subset_count = cur.u32()?;
    let master_seed = cur.u64()?;
    if n == 0 || k < 2 {
        return Err(Error::malformed(label, "degenerate header"));
    }

    let mut records = Vec::with_capacity(m.min(1 << 20) as usize);
    for _ in 0..m {
        let row_index = cur.u64()?;
        let subset_id = cur.u32()?;
        if subset_id >= subset_count {
            return Err(Error::malformed(
                label,
                format!("subset id {subset_id} out of range"),
            ));
        }
        let mut seqs = [Vec::with_capacity(n), Vec::with_capacity(n)];
        for seq in &mut seqs {
            for position in 0..n {
                let tok = cur.u32()?;
                if tok >= k {
                    return Err(Error::TokenOutOfRange {
                        token: tok,
                        row: row_index as usize,
                        position,
                        k,
                    });
                }
                seq.push(tok);
            }
        }
        let [x0, x1] = seqs;
        records.push(PairRecord {
            row_index,
            subset_id,
            x0,
            x1,
        });
    }
    if !cur.at_end() {
        return Err(Error::malformed(label, "trailing bytes after records"));
    }
    Ok(PairSet {
        n,
        k,
        meta: PairMeta {
            master_seed,
            steps,
            scheduler_code,
            subset_count,
        },
        records,
    })
}

pub fn read_pairs(path: impl AsRef<Path>) -> Result<PairSet> {
    let path = path.as_ref();
    let mut bytes = Vec::new();
    File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    decode_pairs(&bytes, path)
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
    label: &'a Path,
}

impl<'a> Cursor<'a> {
    fn new(data: &'a [u8], label: &'a Path) -> Self {
        Cursor { data, pos: 0, label }
    }

    fn take(&mut self, len: usize) -> Result<&'a [u8]> {
        if self.pos + len > self.data.len() {
            return Err(Error::malformed(self.label, "truncated"));
        }
        let out = &self.data[self.pos..self.pos + len];
        self.pos += len;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn at_end(&self) -> bool {
        self.pos == self.data.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::velocity::velocity_backward;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_store() -> DatasetStore {
        DatasetStore::new(4, 3, vec![0, 1, 2, 0, 2, 2, 1, 1, 0, 0, 0, 0]).unwrap()
    }

    #[test]
    fn step_config_validation() {
        assert!(StepConfig::new(0).is_err());
        let cfg = StepConfig::new(5).unwrap();
        assert_eq!(cfg.steps(), 5);
        assert_eq!(cfg.final_rule(), FinalRule::Sample);
        assert!(cfg.clamp());
    }

    #[test]
    fn step_keeps_position_when_velocity_is_zero() {
        let ds = small_store();
        let z = [0u32, 1, 2, 0];
        // Backward velocity at t = 0 under the cosine schedule vanishes.
        let v = velocity_backward(&ds, &z, 0.0, &Scheduler::Cosine).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let next = step_categorical(&z, &v, 0.1, Direction::Backward, true, &mut rng).unwrap();
        assert_eq!(next, z);
    }

    #[test]
    fn step_follows_hand_computed_flip_probability() {
        // Forward two-row example: position 2 velocities [-1/2, 1/2] at
        // h = 1/4 leave token 0 with probability 7/8.
        let ds = DatasetStore::new(2, 2, vec![0, 0, 0, 1]).unwrap();
        let z = [0u32, 0];
        let v = velocity_forward(&ds, &z, 0.5, &Scheduler::Linear).unwrap();
        let mut stays = 0usize;
        let trials = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..trials {
            let next = step_categorical(&z, &v, 0.25, Direction::Forward, true, &mut rng).unwrap();
            if next[1] == 0 {
                stays += 1;
            }
        }
        let frac = stays as f64 / trials as f64;
        assert!((frac - 0.875).abs() < 0.005, "stay fraction {frac}");
    }

    #[test]
    fn step_rejects_bad_inputs() {
        let ds = small_store();
        let z = [0u32, 1, 2, 0];
        let v = velocity_backward(&ds, &z, 0.5, &Scheduler::Linear).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(step_categorical(&z[..3], &v, 0.1, Direction::Backward, true, &mut rng).is_err());
        assert!(step_categorical(&z, &v, 0.0, Direction::Backward, true, &mut rng).is_err());
        assert!(step_categorical(&z, &v, 1.5, Direction::Backward, true, &mut rng).is_err());
    }

    #[test]
    fn unclamped_step_errors_on_negative_mass() {
        // A huge backward step drives the stay probability negative.
        let ds = DatasetStore::new(1, 2, vec![0, 1]).unwrap();
        let z = [0u32];
        let v = velocity_backward(&ds, &z, 0.9, &Scheduler::Polynomial(8.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let clamped = step_categorical(&z, &v, 1.0, Direction::Backward, true, &mut rng);
        assert!(clamped.is_ok());
        let strict = step_categorical(&z, &v, 1.0, Direction::Backward, false, &mut rng);
        assert!(strict.is_err() || v.get(0, 0) <= 1.0);
    }

    #[test]
    fn invert_matches_stepwise_reference() {
        // The buffered inversion must reproduce velocity_backward plus
        // step_categorical draw for draw.
        let ds = small_store();
        let cfg = StepConfig::new(12).unwrap();
        let sched = Scheduler::Cosine;
        for row in 0..ds.len() {
            let x1 = ds.row(row).to_vec();
            let mut rng_fast = ChaCha8Rng::seed_from_u64(row as u64);
            let fast = invert(&ds, &x1, &cfg, &sched, &mut rng_fast).unwrap();

            let mut rng_ref = ChaCha8Rng::seed_from_u64(row as u64);
            let grid_t = TimeGrid::new(12, Direction::Backward).unwrap();
            let mut z = x1.clone();
            for step in 0..12 {
                let t = grid_t.node(step);
                let v = velocity_backward(&ds, &z, t, &sched).unwrap();
                z = step_categorical(&z, &v, grid_t.step_size(), Direction::Backward, true, &mut rng_ref)
                    .unwrap();
            }
            assert_eq!(fast, z, "row {row}");
        }
    }

    #[test]
    fn single_row_inversion_is_uniform() {
        // With M = 1 and a linear schedule the backward walk must land on
        // the uniform distribution per position.
        let ds = DatasetStore::new(1, 4, vec![2]).unwrap();
        let cfg = StepConfig::new(16).unwrap();
        let mut counts = [0usize; 4];
        let draws = 40_000;
        for i in 0..draws {
            let mut rng = ChaCha8Rng::seed_from_u64(i);
            let x0 = invert(&ds, &[2], &cfg, &Scheduler::Linear, &mut rng).unwrap();
            counts[x0[0] as usize] += 1;
        }
        for &c in &counts {
            let frac = c as f64 / draws as f64;
            assert!((frac - 0.25).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn forward_sampling_hits_lone_row() {
        // A dataset with a single row must be recovered exactly.
        let ds = DatasetStore::new(3, 5, vec![4, 0, 3]).unwrap();
        let cfg = StepConfig::new(8).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = sample_forward(&ds, &cfg, &Scheduler::Linear, &mut rng).unwrap();
            assert_eq!(s, vec![4, 0, 3]);
        }
    }

    #[test]
    fn single_step_forward_is_terminal_jump() {
        let ds = small_store();
        let cfg = StepConfig::new(1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = sample_forward(&ds, &cfg, &Scheduler::Linear, &mut rng).unwrap();
        ds.validate_seq(&s).unwrap();
    }

    #[test]
    fn pairflow_output_shape_and_endpoints() {
        let ds = small_store();
        let cfg = StepConfig::new(6).unwrap();
        let seeds = SeedSpec::new(11);
        let ps = pairflow(&ds, &cfg, &Scheduler::Linear, &seeds, 1).unwrap();
        assert_eq!(ps.len(), ds.len());
        assert_eq!(ps.n(), ds.n());
        for (m, rec) in ps.records().iter().enumerate() {
            assert_eq!(rec.row_index, m as u64);
            assert_eq!(rec.subset_id, 0);
            assert_eq!(rec.x1, ds.row(m));
            ds.validate_seq(&rec.x0).unwrap();
        }
    }

    #[test]
    fn pairflow_respects_subset_membership() {
        let rows: Vec<u32> = (0..40).map(|i| i % 3).collect();
        let ds = DatasetStore::new(2, 3, rows).unwrap();
        let cfg = StepConfig::new(4).unwrap();
        let seeds = SeedSpec::new(2);
        let ps = pairflow(&ds, &cfg, &Scheduler::Linear, &seeds, 4).unwrap();
        let partition = partition_subsets(&ds, 4, &seeds).unwrap();
        for rec in ps.records() {
            assert_eq!(rec.subset_id, partition.membership(rec.row_index as usize));
        }
        assert_eq!(ps.meta().subset_count, 4);
    }

    #[test]
    fn pair_file_round_trip() {
        let ds = small_store();
        let cfg = StepConfig::new(6).unwrap();
        let seeds = SeedSpec::new(11);
        let ps = pairflow(&ds, &cfg, &Scheduler::Cosine, &seeds, 2).unwrap();

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.dpair");
        write_pairs(&ps, &path).unwrap();
        let back = read_pairs(&path).unwrap();
        assert_eq!(ps, back);
        assert_eq!(back.meta().scheduler_code, 2);
        assert_eq!(back.meta().master_seed, 11);
    }

    #[test]
    fn pair_file_detects_corruption() {
        let ds = small_store();
        let cfg = StepConfig::new(3).unwrap();
        let ps = pairflow(&ds, &cfg, &Scheduler::Linear, &SeedSpec::new(0), 1).unwrap();
        let mut bytes = encode_pairs(&ps);

        let label = Path::new("mem");
        assert!(decode_pairs(&bytes, label).is_ok());

        bytes[40] ^= 0xff;
        assert!(matches!(
            decode_pairs(&bytes, label),
            Err(Error::ChecksumMismatch { .. })
        ));

        let short = &bytes[..bytes.len() - 9];
        assert!(decode_pairs(short, label).is_err());
    }
}
