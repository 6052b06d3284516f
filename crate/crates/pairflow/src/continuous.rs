//! Gaussian-source counterpart over point clouds in R^D.
//!
//! The closed-form velocity at `(x, t)` is a softmax-weighted pull toward
//! the dataset points:
//!
//! ```text
//! w_m  proportional to  exp(-0.5 || (x - t d_m) / (1 - t) ||^2)
//! v(x, t) = sum_m w_m (d_m - x) / (1 - t)
//! ```
//!
//! The field is singular at `t = 1`, where trajectories collapse onto the
//! nearest dataset point. Integration therefore walks a uniform grid up to
//! `t = 1 - 1/T` and finishes the last interval with a fixed number of
//! interval-halving Euler steps before snapping to the nearest point; the
//! halving tail keeps every evaluation finite while closing all but
//! `2^-12 / T` of the remaining gap, so the snap only bridges a vanishing
//! distance.
//!
//! Point files (`.cpts`) are `magic "CPTS" | version u8 = 1 | D u32 |
//! M u64 | M*D f64`, little-endian, row-major.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::seed::{SeedSpec, StreamDomain};

pub const CPTS_MAGIC: &[u8; 4] = b"CPTS";
pub const CPTS_VERSION: u8 = 1;

/// Extra interval-halving Euler steps after the uniform grid.
const TAIL_HALVINGS: u32 = 12;

/// Dense M x D point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointSet {
    d: usize,
    points: Vec<f64>,
}

impl PointSet {
    pub fn new(d: usize, points: Vec<f64>) -> Result<Self> {
        if d == 0 {
            return Err(Error::EmptySequence);
        }
        if points.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if points.len() % d != 0 {
            return Err(Error::LengthMismatch {
                left: points.len(),
                right: d,
            });
        }
        Ok(PointSet { d, points })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point(&self, m: usize) -> &[f64] {
        &self.points[m * self.d..(m + 1) * self.d]
    }

    pub fn iter_points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn coords(&self) -> &[f64] {
        &self.points
    }

    pub fn write_cpts(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| {
            w.write_all(CPTS_MAGIC)?;
            w.write_all(&[CPTS_VERSION])?;
            w.write_all(&(self.d as u32).to_le_bytes())?;
            w.write_all(&(self.len() as u64).to_le_bytes())?;
            for &v in &self.points {
                w.write_all(&v.to_le_bytes())?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read_cpts(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        if bytes.len() < 17 {
            return Err(Error::malformed(path, "file too short"));
        }
        if &bytes[0..4] != CPTS_MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: "CPTS",
            });
        }
        if bytes[4] != CPTS_VERSION {
            return Err(Error::BadVersion {
                path: path.into(),
                version: bytes[4],
            });
        }
        let d = u32::from_le_bytes(bytes[5..9].try_into().unwrap()) as usize;
        let m = u64::from_le_bytes(bytes[9..17].try_into().unwrap());
        let payload = &bytes[17..];
        let expect = (m as usize)
            .checked_mul(d)
            .and_then(|c| c.checked_mul(8))
            .ok_or_else(|| Error::malformed(path, format!("implausible size {m} x {d}")))?;
        if payload.len() != expect {
            return Err(Error::malformed(
                path,
                format!("payload is {} bytes, expected {expect}", payload.len()),
            ));
        }
        let points: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        PointSet::new(d, points)
    }

    /// Reads comma-separated coordinate rows.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut points = Vec::new();
        let mut d = 0usize;
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<f64>, _> =
                line.split(',').map(|f| f.trim().parse::<f64>()).collect();
            let row =
                row.map_err(|e| Error::malformed(path, format!("line {}: {e}", lineno + 1)))?;
            if d == 0 {
                d = row.len();
            } else if row.len() != d {
                return Err(Error::malformed(
                    path,
                    format!("line {}: {} fields, expected {d}", lineno + 1, row.len()),
                ));
            }
            points.extend(row);
        }
        PointSet::new(d, points)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| {
            for p in self.iter_points() {
                let mut first = true;
                for &v in p {
                    if !first {
                        w.write_all(b",")?;
                    }
                    write!(w, "{v}")?;
                    first = false;
                }
                w.write_all(b"\n")?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }
}

fn check_dim(ps: &PointSet, x: &[f64]) -> Result<()> {
    if x.len() != ps.dim() {
        return Err(Error::DimMismatch {
            left: x.len(),
            right: ps.dim(),
        });
    }
    Ok(())
}

/// Gaussian-source closed-form velocity; `t` must lie in [0, 1).
pub fn velocity_gaussian(ps: &PointSet, x: &[f64], t: f64) -> Result<Vec<f64>> {
    check_dim(ps, x)?;
    if !(0.0..1.0).contains(&t) || t.is_nan() {
        return Err(Error::OutOfDomain {
            name: "t",
            value: t,
            lo: 0.0,
            hi: 1.0,
        });
    }
    let mut logw = vec![0.0; ps.len()];
    let mut v = vec![0.0; ps.dim()];
    velocity_gaussian_into(ps, x, t, &mut logw, &mut v);
    Ok(v)
}

/// Buffered inner version shared with the integrator.
fn velocity_gaussian_into(ps: &PointSet, x: &[f64], t: f64, logw: &mut [f64], v: &mut [f64]) {
    let inv = 1.0 / (1.0 - t);
    let mut max_l = f64::NEG_INFINITY;
    for (m, p) in ps.iter_points().enumerate() {
        let mut sq = 0.0;
        for (xi, di) in x.iter().zip(p) {
            let r = (xi - t * di) * inv;
            sq += r * r;
        }
        let l = -0.5 * sq;
        logw[m] = l;
        if l > max_l {
            max_l = l;
        }
    }
    v.fill(0.0);
    let mut total = 0.0;
    for (m, p) in ps.iter_points().enumerate() {
        let w = (logw[m] - max_l).exp();
        if w == 0.0 {
            continue;
        }
        total += w;
        for (vi, (di, xi)) in v.iter_mut().zip(p.iter().zip(x)) {
            *vi += w * (di - xi);
        }
    }
    let scale = inv / total;
    for vi in v.iter_mut() {
        *vi *= scale;
    }
}

/// Result of integrating one source point to the data side.
#[derive(Debug, Clone, PartialEq)]
pub struct ContinuousPair {
    pub x0: Vec<f64>,
    /// Terminal state after the snap stage.
    pub x1: Vec<f64>,
    /// Index of the dataset point snapped to, if within tolerance.
    pub snapped: Option<usize>,
    /// Distance from the pre-snap state to the nearest dataset point.
    pub residual: f64,
}

/// Transports `x0` from `t = 0` toward `t = 1`.
///
/// Walks `steps - 1` uniform Euler steps to `1 - 1/steps`, then halves the
/// remaining interval [`TAIL_HALVINGS`] more Euler steps, then snaps to the
/// nearest dataset point when the residual is within `snap_tol` (otherwise
/// the raw state is kept and `snapped` is `None`).
pub fn integrate_forward(
    ps: &PointSet,
    x0: &[f64],
    steps: u32,
    snap_tol: f64,
) -> Result<ContinuousPair> {
    check_dim(ps, x0)?;
    if steps == 0 {
        return Err(Error::ZeroSteps);
    }
    let h = 1.0 / steps as f64;
    let mut x = x0.to_vec();
    let mut logw = vec![0.0; ps.len()];
    let mut v = vec![0.0; ps.dim()];

    for k in 0..steps - 1 {
        let t = k as f64 * h;
        velocity_gaussian_into(ps, &x, t, &mut logw, &mut v);
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += h * vi;
        }
    }
    // Tail: from 1 - h, step over half the remaining gap each time.
    let mut remaining = h;
    for _ in 0..TAIL_HALVINGS {
        let t = 1.0 - remaining;
        let dt = remaining / 2.0;
        velocity_gaussian_into(ps, &x, t, &mut logw, &mut v);
        for (xi, vi) in x.iter_mut().zip(&v) {
            *xi += dt * vi;
        }
        remaining = dt;
    }

    let (nearest, dist) = nearest_point(ps, &x);
    let snapped = dist <= snap_tol;
    let x1 = if snapped {
        ps.point(nearest).to_vec()
    } else {
        x.clone()
    };
    Ok(ContinuousPair {
        x0: x0.to_vec(),
        x1,
        snapped: snapped.then_some(nearest),
        residual: dist,
    })
}

fn nearest_point(ps: &PointSet, x: &[f64]) -> (usize, f64) {
    let mut best = 0;
    let mut best_sq = f64::INFINITY;
    for (m, p) in ps.iter_points().enumerate() {
        let mut sq = 0.0;
        for (xi, di) in x.iter().zip(p) {
            let r = xi - di;
            sq += r * r;
        }
        if sq < best_sq {
            best_sq = sq;
            best = m;
        }
    }
    (best, best_sq.sqrt())
}

/// Batch pairing of Gaussian draws with their transported endpoints.
#[derive(Debug, Clone)]
pub struct ContinuousPairing {
    pub x0: PointSet,
    pub x1: PointSet,
    /// Snap target per sample, `None` where the residual exceeded the
    /// tolerance.
    pub snapped: Vec<Option<usize>>,
    pub snap_rate: f64,
    pub mean_residual: f64,
}

/// Draws `count` standard Gaussian sources and transports each;
/// sample `i` uses the seed stream `(SourceDraw, i)`.
pub fn pair_continuous(
    ps: &PointSet,
    count: usize,
    steps: u32,
    snap_tol: f64,
    seeds: &SeedSpec,
) -> Result<ContinuousPairing> {
    if count == 0 {
        return Err(Error::EmptyDataset);
    }
    let pairs: Vec<ContinuousPair> = (0..count)
        .into_par_iter()
        .map(|i| {
            let mut rng = seeds.stream(StreamDomain::SourceDraw, i as u64);
            let x0: Vec<f64> = (0..ps.dim()).map(|_| rng.sample(StandardNormal)).collect();
            integrate_forward(ps, &x0, steps, snap_tol)
        })
        .collect::<Result<_>>()?;

    let d = ps.dim();
    let mut x0_flat = Vec::with_capacity(count * d);
    let mut x1_flat = Vec::with_capacity(count * d);
    let mut snapped = Vec::with_capacity(count);
    let mut hits = 0usize;
    let mut residual_sum = 0.0;
    for p in &pairs {
        x0_flat.extend_from_slice(&p.x0);
        x1_flat.extend_from_slice(&p.x1);
        if p.snapped.is_some() {
            hits += 1;
        }
        residual_sum += p.residual;
        snapped.push(p.snapped);
    }
    Ok(ContinuousPairing {
        x0: PointSet::new(d, x0_flat)?,
        x1: PointSet::new(d, x1_flat)?,
        snapped,
        snap_rate: hits as f64 / count as f64,
        mean_residual: residual_sum / count as f64,
    })
}

/// `folds` independent two-moons problems stacked into 2*folds dimensions.
///
/// Per fold: a fair coin picks the moon, the angle is uniform on [0, pi],
/// and isotropic Gaussian noise of scale `noise` is added. The first moon
/// is the upper unit half-circle at the origin; the second is reflected
/// and offset by (1, 0.5).
pub fn two_moons_nfold(
    folds: usize,
    samples: usize,
    noise: f64,
    seeds: &SeedSpec,
) -> Result<PointSet> {
    if folds == 0 || samples == 0 {
        return Err(Error::EmptyDataset);
    }
    if !(noise >= 0.0) {
        return Err(Error::OutOfDomain {
            name: "noise",
            value: noise,
            lo: 0.0,
            hi: f64::INFINITY,
        });
    }
    let d = 2 * folds;
    let points: Vec<f64> = (0..samples)
        .into_par_iter()
        .flat_map_iter(|i| {
            let mut rng = seeds.stream(StreamDomain::PointGen, i as u64);
            let mut coords = Vec::with_capacity(d);
            for _ in 0..folds {
                let theta = rng.gen::<f64>() * std::f64::consts::PI;
                let (mut px, mut py) = (theta.cos(), theta.sin());
                if rng.gen::<bool>() {
                    px = 1.0 - px;
                    py = 0.5 - py;
                }
                let nx: f64 = rng.sample(StandardNormal);
                let ny: f64 = rng.sample(StandardNormal);
                coords.push(px + noise * nx);
                coords.push(py + noise * ny);
            }
            coords
        })
        .collect();
    PointSet::new(d, points)
}

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ChamferReport {
    /// Symmetric mean of squared nearest-neighbour distances.
    pub squared: f64,
    /// Same with plain Euclidean distances.
    pub euclidean: f64,
    /// Number of coordinates compared.
    pub dims: usize,
}

/// Symmetric Chamfer discrepancy between two clouds; the primary value is
/// the squared convention, the Euclidean variant is reported alongside.
/// With `first_two_only` the comparison uses only the leading plane, which
/// is how stacked-fold clouds are projected for evaluation.
pub fn chamfer(a: &PointSet, b: &PointSet, first_two_only: bool) -> Result<ChamferReport> {
    if a.dim() != b.dim() {
        return Err(Error::DimMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    let dims = if first_two_only {
        if a.dim() < 2 {
            return Err(Error::DimMismatch {
                left: a.dim(),
                right: 2,
            });
        }
        2
    } else {
        a.dim()
    };

    // Fixed chunk boundaries and an ordered final sum keep the result
    // independent of thread scheduling.
    let dir = |from: &PointSet, to: &PointSet| -> (f64, f64) {
        let d = from.dim();
        let partials: Vec<(f64, f64)> = from
            .coords()
            .par_chunks(d * 256)
            .map(|chunk| {
                let mut sq_sum = 0.0;
                let mut eu_sum = 0.0;
                for p in chunk.chunks_exact(d) {
                    let mut best = f64::INFINITY;
                    for q in to.iter_points() {
                        let mut sq = 0.0;
                        for j in 0..dims {
                            let r = p[j] - q[j];
                            sq += r * r;
                        }
                        if sq < best {
                            best = sq;
                        }
                    }
                    sq_sum += best;
                    eu_sum += best.sqrt();
                }
                (sq_sum, eu_sum)
            })
            .collect();
        let mut sq = 0.0;
        let mut eu = 0.0;
        for (s, e) in partials {
            sq += s;
            eu += e;
        }
        (sq / from.len() as f64, eu / from.len() as f64)
    };

    let (ab_sq, ab_eu) = dir(a, b);
    let (ba_sq, ba_eu) = dir(b, a);
    Ok(ChamferReport {
        squared: ab_sq + ba_sq,
        euclidean: ab_eu + ba_eu,
        dims,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid_points() -> PointSet {
        PointSet::new(2, vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0]).unwrap()
    }

    #[test]
    fn velocity_single_point_is_linear_pull() {
        let ps = PointSet::new(2, vec![2.0, -1.0]).unwrap();
        let x = [0.0, 0.0];
        let v = velocity_gaussian(&ps, &x, 0.0).unwrap();
        assert!((v[0] - 2.0).abs() < 1e-12);
        assert!((v[1] + 1.0).abs() < 1e-12);
        // At t = 0.5 the remaining pull doubles: (d - x) / (1 - t).
        let v = velocity_gaussian(&ps, &x, 0.5).unwrap();
        assert!((v[0] - 4.0).abs() < 1e-12);
        assert!((v[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn velocity_rejects_bad_inputs() {
        let ps = grid_points();
        assert!(velocity_gaussian(&ps, &[0.0], 0.5).is_err());
        assert!(velocity_gaussian(&ps, &[0.0, 0.0], 1.0).is_err());
        assert!(velocity_gaussian(&ps, &[0.0, 0.0], -0.1).is_err());
    }

    #[test]
    fn velocity_is_rotation_equivariant() {
        let ps = PointSet::new(2, vec![1.0, 0.3, -0.4, 0.9, 0.2, -1.1]).unwrap();
        let x = [0.3, -0.2];
        let t = 0.6;
        let (c, s) = (0.8, 0.6);
        let rot = |p: &[f64]| vec![c * p[0] - s * p[1], s * p[0] + c * p[1]];

        let rotated: Vec<f64> = ps.iter_points().flat_map(|p| rot(p)).collect();
        let ps_rot = PointSet::new(2, rotated).unwrap();
        let v = velocity_gaussian(&ps, &x, t).unwrap();
        let v_rot = velocity_gaussian(&ps_rot, &rot(&x), t).unwrap();
        let expect = rot(&v);
        assert!((v_rot[0] - expect[0]).abs() < 1e-10);
        assert!((v_rot[1] - expect[1]).abs() < 1e-10);
    }

    #[test]
    fn single_point_integration_follows_analytic_path() {
        // With one target the exact solution is x(t) = d t + x0 (1 - t);
        // the raw endpoint must close all but 2^-12 of the final interval.
        let ps = PointSet::new(2, vec![1.0, 2.0]).unwrap();
        let x0 = [0.4, -0.6];
        let steps = 64u32;
        let pair = integrate_forward(&ps, &x0, steps, 0.0).unwrap();
        assert!(pair.snapped.is_none());
        let gap = (1.0 / steps as f64) * 2f64.powi(-(TAIL_HALVINGS as i32));
        let expect = |d: f64, x: f64| d * (1.0 - gap) + x * gap;
        assert!((pair.x1[0] - expect(1.0, 0.4)).abs() < 1e-9);
        assert!((pair.x1[1] - expect(2.0, -0.6)).abs() < 1e-9);
    }

    #[test]
    fn snapping_reaches_dataset_point() {
        let ps = grid_points();
        let pair = integrate_forward(&ps, &[-0.3, -0.3], 32, 1e-3).unwrap();
        assert!(pair.snapped.is_some());
        let target = ps.point(pair.snapped.unwrap());
        assert_eq!(pair.x1, target);
        assert!(pair.residual <= 1e-3);
    }

    #[test]
    fn moons_shapes_and_determinism() {
        let seeds = SeedSpec::new(4);
        let a = two_moons_nfold(3, 100, 0.05, &seeds).unwrap();
        assert_eq!(a.dim(), 6);
        assert_eq!(a.len(), 100);
        let b = two_moons_nfold(3, 100, 0.05, &seeds).unwrap();
        assert_eq!(a, b);
        // Noise-free points lie on the unit circle or its offset mirror.
        let clean = two_moons_nfold(1, 500, 0.0, &seeds).unwrap();
        for p in clean.iter_points() {
            let on_first = (p[0] * p[0] + p[1] * p[1] - 1.0).abs() < 1e-9 && p[1] >= -1e-12;
            let (qx, qy) = (1.0 - p[0], 0.5 - p[1]);
            let on_second = (qx * qx + qy * qy - 1.0).abs() < 1e-9 && qy >= -1e-12;
            assert!(on_first || on_second, "{p:?}");
        }
        assert!(two_moons_nfold(0, 10, 0.1, &seeds).is_err());
        assert!(two_moons_nfold(1, 10, -0.1, &seeds).is_err());
    }

    #[test]
    fn chamfer_identity_and_symmetry() {
        let a = grid_points();
        let same = chamfer(&a, &a, false).unwrap();
        assert_eq!(same.squared, 0.0);
        assert_eq!(same.euclidean, 0.0);

        let b = PointSet::new(2, vec![0.5, 0.5]).unwrap();
        let ab = chamfer(&a, &b, false).unwrap();
        let ba = chamfer(&b, &a, false).unwrap();
        assert!((ab.squared - ba.squared).abs() < 1e-12);
        assert!(ab.squared > 0.0);
    }

    #[test]
    fn chamfer_known_value() {
        // {0} vs {1} in 1D... using 2D points on a line: distance 1 both
        // ways, so squared = 2 and euclidean = 2.
        let a = PointSet::new(2, vec![0.0, 0.0]).unwrap();
        let b = PointSet::new(2, vec![1.0, 0.0]).unwrap();
        let r = chamfer(&a, &b, false).unwrap();
        assert!((r.squared - 2.0).abs() < 1e-12);
        assert!((r.euclidean - 2.0).abs() < 1e-12);
    }

    #[test]
    fn chamfer_projection_uses_leading_plane() {
        let a = PointSet::new(4, vec![0.0, 0.0, 9.0, 9.0]).unwrap();
        let b = PointSet::new(4, vec![0.0, 0.0, -9.0, -9.0]).unwrap();
        let proj = chamfer(&a, &b, true).unwrap();
        assert_eq!(proj.squared, 0.0);
        let full = chamfer(&a, &b, false).unwrap();
        assert!(full.squared > 0.0);
    }

    #[test]
    fn cpts_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.cpts");
        let ps = PointSet::new(3, vec![0.125, -4.5, 1e-300, 7.0, f64::MIN_POSITIVE, 2.0]).unwrap();
        ps.write_cpts(&path).unwrap();
        let back = PointSet::read_cpts(&path).unwrap();
        assert_eq!(ps, back);

        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 1);
        let bad = dir.path().join("bad.cpts");
        std::fs::write(&bad, &bytes).unwrap();
        assert!(PointSet::read_cpts(&bad).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pts.csv");
        let ps = PointSet::new(2, vec![0.5, -1.25, 3.0, 0.1]).unwrap();
        ps.write_csv(&path).unwrap();
        let back = PointSet::read_csv(&path).unwrap();
        assert_eq!(ps, back);
    }
}
