//! Token sequence storage and on-disk formats.
//!
//! A dataset is a dense M x N matrix of `u32` tokens drawn from a vocabulary
//! `{0, .., K-1}`. The binary format (`.dtok`) is:
//!
//! ```text
//! magic "DTOK" | version u8 = 1 | N u32 | K u32 | M u64 | M*N tokens u32
//! ```
//!
//! All integers little-endian, tokens row-major. The CSV format is one row
//! per line, comma-separated token integers.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DTOK_MAGIC: &[u8; 4] = b"DTOK";
pub const DTOK_VERSION: u8 = 1;

/// Vocabulary of size K >= 2; tokens are `0..K`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Vocab {
    k: u32,
}

impl Vocab {
    pub fn new(k: u32) -> Result<Self> {
        if k < 2 {
            return Err(Error::VocabTooSmall(k));
        }
        Ok(Vocab { k })
    }

    pub fn size(&self) -> u32 {
        self.k
    }

    pub fn contains(&self, token: u32) -> bool {
        token < self.k
    }
}

/// One token sequence of fixed length.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TokenSeq(Vec<u32>);

impl TokenSeq {
    pub fn new(tokens: Vec<u32>) -> Result<Self> {
        if tokens.is_empty() {
            return Err(Error::EmptySequence);
        }
        Ok(TokenSeq(tokens))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn as_slice(&self) -> &[u32] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<u32> {
        self.0
    }
}

impl AsRef<[u32]> for TokenSeq {
    fn as_ref(&self) -> &[u32] {
        &self.0
    }
}

impl std::ops::Index<usize> for TokenSeq {
    type Output = u32;
    fn index(&self, i: usize) -> &u32 {
        &self.0[i]
    }
}

/// Dense dataset of M rows, each a length-N sequence over vocabulary K.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DatasetStore {
    n: usize,
    vocab: Vocab,
    rows: Vec<u32>,
}

impl DatasetStore {
    /// Builds a store from row-major tokens; every token is range-checked.
    pub fn new(n: usize, k: u32, rows: Vec<u32>) -> Result<Self> {
        let vocab = Vocab::new(k)?;
        if n == 0 {
            return Err(Error::EmptySequence);
        }
        if rows.is_empty() {
            return Err(Error::EmptyDataset);
        }
        if rows.len() % n != 0 {
            return Err(Error::LengthMismatch {
                left: rows.len(),
                right: n,
            });
        }
        for (idx, &tok) in rows.iter().enumerate() {
            if !vocab.contains(tok) {
                return Err(Error::TokenOutOfRange {
                    token: tok,
                    row: idx / n,
                    position: idx % n,
                    k,
                });
            }
        }
        Ok(DatasetStore { n, vocab, rows })
    }

    pub fn from_rows<S: AsRef<[u32]>>(k: u32, rows: &[S]) -> Result<Self> {
        let n = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut flat = Vec::with_capacity(rows.len() * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::LengthMismatch {
                    left: r.len(),
                    right: n,
                });
            }
            flat.extend_from_slice(r);
        }
        DatasetStore::new(n, k, flat)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> u32 {
        self.vocab.size()
    }

    pub fn vocab(&self) -> Vocab {
        self.vocab
    }

    /// Number of rows M.
    pub fn len(&self) -> usize {
        self.rows.len() / self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn row(&self, m: usize) -> &[u32] {
        &self.rows[m * self.n..(m + 1) * self.n]
    }

    pub fn iter_rows(&self) -> impl Iterator<Item = &[u32]> {
        self.rows.chunks_exact(self.n)
    }

    pub fn tokens(&self) -> &[u32] {
        &self.rows
    }

    /// Checks that `z` has length N and every token is in the vocabulary.
    pub fn validate_seq(&self, z: &[u32]) -> Result<()> {
        if z.len() != self.n {
            return Err(Error::LengthMismatch {
                left: z.len(),
                right: self.n,
            });
        }
        for (i, &tok) in z.iter().enumerate() {
            if !self.vocab.contains(tok) {
                return Err(Error::TokenOutOfRange {
                    token: tok,
                    row: 0,
                    position: i,
                    k: self.vocab.size(),
                });
            }
        }
        Ok(())
    }

    /// Copies the given rows (in order) into a new store.
    pub fn gather(&self, indices: &[u32]) -> Result<Self> {
        if indices.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut flat = Vec::with_capacity(indices.len() * self.n);
        for &m in indices {
            flat.extend_from_slice(self.row(m as usize));
        }
        Ok(DatasetStore {
            n: self.n,
            vocab: self.vocab,
            rows: flat,
        })
    }

    pub fn write_dtok(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| {
            w.write_all(DTOK_MAGIC)?;
            w.write_all(&[DTOK_VERSION])?;
            w.write_all(&(self.n as u32).to_le_bytes())?;
            w.write_all(&self.k().to_le_bytes())?;
            w.write_all(&(self.len() as u64).to_le_bytes())?;
            for &tok in &self.rows {
                w.write_all(&tok.to_le_bytes())?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }

    pub fn read_dtok(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);

        let mut magic = [0u8; 4];
        r.read_exact(&mut magic).map_err(|e| Error::io(path, e))?;
        if &magic != DTOK_MAGIC {
            return Err(Error::BadMagic {
                path: path.into(),
                expected: "DTOK",
            });
        }
        let version = read_u8(&mut r, path)?;
        if version != DTOK_VERSION {
            return Err(Error::BadVersion {
                path: path.into(),
                version,
            });
        }
        let n = read_u32(&mut r, path)? as usize;
        let k = read_u32(&mut r, path)?;
        let m = read_u64(&mut r, path)?;
        if n == 0 {
            return Err(Error::malformed(path, "sequence length is zero"));
        }
        if m == 0 {
            return Err(Error::malformed(path, "dataset has zero rows"));
        }
        let total = m
            .checked_mul(n as u64)
            .filter(|&t| t <= usize::MAX as u64 / 4)
            .ok_or_else(|| Error::malformed(path, format!("implausible size {m} x {n}")))?;

        let mut rows = vec![0u32; total as usize];
        let mut buf = [0u8; 4];
        for slot in rows.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::malformed(path, "truncated token payload"))?;
            *slot = u32::from_le_bytes(buf);
        }
        if r.read(&mut buf).map_err(|e| Error::io(path, e))? != 0 {
            return Err(Error::malformed(path, "trailing bytes after token payload"));
        }
        DatasetStore::new(n, k, rows)
    }

    /// Reads comma-separated token rows; K must be supplied by the caller.
    pub fn read_csv(path: impl AsRef<Path>, k: u32) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut rows: Vec<Vec<u32>> = Vec::new();
        for (lineno, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let row: std::result::Result<Vec<u32>, _> =
                line.split(',').map(|f| f.trim().parse::<u32>()).collect();
            let row = row.map_err(|e| {
                Error::malformed(path, format!("line {}: {e}", lineno + 1))
            })?;
            rows.push(row);
        }
        if rows.is_empty() {
            return Err(Error::malformed(path, "no rows"));
        }
        DatasetStore::from_rows(k, &rows)
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let res = (|| {
            for row in self.iter_rows() {
                let mut first = true;
                for &tok in row {
                    if !first {
                        w.write_all(b",")?;
                    }
                    write!(w, "{tok}")?;
                    first = false;
                }
                w.write_all(b"\n")?;
            }
            w.flush()
        })();
        res.map_err(|e| Error::io(path, e))
    }
}

fn read_u8(r: &mut impl Read, path: &Path) -> Result<u8> {
    let mut b = [0u8; 1];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(b[0])
}

fn read_u32(r: &mut impl Read, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(|e| Error::io(path, e))?;
    Ok(u64::from_le_bytes(b))
}
