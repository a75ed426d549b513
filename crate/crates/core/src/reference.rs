//! The persisted reference index: 2-bit packed chromosomes plus, for each
//! chromosome, the repeat-masked list of q-gram positions sorted by q-gram
//! code.
//!
//! File layout (all integers little-endian):
//!
//! ```text
//! magic "QGRI" | u32 version | u32 q | u64 seed | u32 mask_threshold | u32 chromosome count
//! per chromosome:
//!   u32 name length | name bytes (UTF-8) | u64 length | ceil(length/4) packed bytes
//!   u64 position count | count x (u32 code, u32 position)
//! u64 xxh3-64 checksum of every preceding byte
//! ```
//!
//! Packed bytes hold four bases each, the first base in the two low bits.

use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use xxhash_rust::xxh3::xxh3_64;

use crate::error::{Error, Result};
use crate::io::{read_fasta_file, FastaRecord};
use crate::seq::{check_q, encode_qgram, encode_seq, is_ambiguous, Base, QGram};

pub const MAGIC: &[u8; 4] = b"QGRI";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_MASK_THRESHOLD: u32 = 1000;

/// A reference position together with the code of the q-gram starting there.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RefPosition {
    pub code: QGram,
    pub pos: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Chromosome {
    pub name: String,
    len: u64,
    packed: Vec<u8>,
    positions: Vec<RefPosition>,
}

impl Chromosome {
    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn base(&self, i: usize) -> Base {
        Base::from_code(self.packed[i / 4] >> (2 * (i % 4)))
    }

    pub fn sequence(&self) -> Vec<Base> {
        (0..self.len as usize).map(|i| self.base(i)).collect()
    }

    /// Retained positions, sorted by q-gram code and then position.
    pub fn positions(&self) -> &[RefPosition] {
        &self.positions
    }
}

fn pack(seq: &[Base]) -> Vec<u8> {
    seq.chunks(4)
        .map(|c| {
            c.iter()
                .enumerate()
                .fold(0u8, |b, (k, base)| b | base.code() << (2 * k))
        })
        .collect()
}

/// Start positions whose q-gram lies clear of every run of at least `q`
/// ambiguous symbols.
fn unmasked_starts(raw: &[u8], q: usize) -> Vec<bool> {
    let mut blocked = vec![false; raw.len()];
    let mut run_start = None;
    for i in 0..=raw.len() {
        let amb = i < raw.len() && is_ambiguous(raw[i]);
        match (amb, run_start) {
            (true, None) => run_start = Some(i),
            (false, Some(s)) => {
                if i - s >= q {
                    blocked[s..i].iter_mut().for_each(|b| *b = true);
                }
                run_start = None;
            }
            _ => {}
        }
    }
    let windows = (raw.len() + 1).saturating_sub(q);
    let mut ok = vec![false; windows];
    let mut blocked_in_window = blocked[..q.min(raw.len())].iter().filter(|&&b| b).count();
    for p in 0..windows {
        if p > 0 {
            blocked_in_window -= blocked[p - 1] as usize;
            blocked_in_window += blocked[p + q - 1] as usize;
        }
        ok[p] = blocked_in_window == 0;
    }
    ok
}

fn masked_positions(seq: &[Base], raw: &[u8], q: usize, threshold: u32) -> Vec<RefPosition> {
    let ok = unmasked_starts(raw, q);
    let mut positions: Vec<RefPosition> = (0..ok.len())
        .into_par_iter()
        .filter(|&p| ok[p])
        .map(|p| RefPosition {
            code: encode_qgram(&seq[p..p + q]),
            pos: p as u32,
        })
        .collect();
    positions.par_sort_unstable();

    let mut kept = Vec::with_capacity(positions.len());
    for run in positions.chunk_by(|a, b| a.code == b.code) {
        if run.len() as u64 <= threshold as u64 {
            kept.extend_from_slice(run);
        }
    }
    kept
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReferenceIndex {
    q: usize,
    mask_threshold: u32,
    seed: u64,
    chromosomes: Vec<Chromosome>,
}

impl ReferenceIndex {
    /// Builds the index from in-memory FASTA records. Ambiguous bases are
    /// replaced by draws from a generator seeded with `seed`, consumed in
    /// record order.
    pub fn from_records(records: &[FastaRecord], q: usize, mask_threshold: u32, seed: u64) -> Result<Self> {
        check_q(q)?;
        if records.iter().all(|r| r.seq.is_empty()) {
            return Err(Error::EmptyReference);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chromosomes = Vec::with_capacity(records.len());
        for rec in records {
            if rec.seq.len() > u32::MAX as usize {
                return Err(Error::Config(format!(
                    "chromosome {} has {} bases, more than 32-bit positions allow",
                    rec.name,
                    rec.seq.len()
                )));
            }
            let seq = encode_seq(&rec.seq, &mut rng)?;
            let positions = masked_positions(&seq, &rec.seq, q, mask_threshold);
            chromosomes.push(Chromosome {
                name: rec.name.clone(),
                len: seq.len() as u64,
                packed: pack(&seq),
                positions,
            });
        }
        Ok(ReferenceIndex {
            q,
            mask_threshold,
            seed,
            chromosomes,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn mask_threshold(&self) -> u32 {
        self.mask_threshold
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn chromosomes(&self) -> &[Chromosome] {
        &self.chromosomes
    }

    /// Retained q-gram positions over all chromosomes.
    pub fn total_positions(&self) -> u64 {
        self.chromosomes.iter().map(|c| c.positions.len() as u64).sum()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.q as u32).to_le_bytes());
        out.extend_from_slice(&self.seed.to_le_bytes());
        out.extend_from_slice(&self.mask_threshold.to_le_bytes());
        out.extend_from_slice(&(self.chromosomes.len() as u32).to_le_bytes());
        for c in &self.chromosomes {
            out.extend_from_slice(&(c.name.len() as u32).to_le_bytes());
            out.extend_from_slice(c.name.as_bytes());
            out.extend_from_slice(&c.len.to_le_bytes());
            out.extend_from_slice(&c.packed);
            out.extend_from_slice(&(c.positions.len() as u64).to_le_bytes());
            for p in &c.positions {
                out.extend_from_slice(&p.code.to_le_bytes());
                out.extend_from_slice(&p.pos.to_le_bytes());
            }
        }
        let checksum = xxh3_64(&out);
        out.extend_from_slice(&checksum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 4 {
            return Err(Error::CorruptIndex("file is truncated".into()));
        }
        if &bytes[..4] != MAGIC {
            return Err(Error::BadMagic);
        }
        if bytes.len() < 8 {
            return Err(Error::CorruptIndex("file is truncated".into()));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != FORMAT_VERSION {
            return Err(Error::UnsupportedVersion {
                found: version,
                expected: FORMAT_VERSION,
            });
        }
        if bytes.len() < 16 {
            return Err(Error::CorruptIndex("file is truncated".into()));
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        if xxh3_64(body) != u64::from_le_bytes(tail.try_into().unwrap()) {
            return Err(Error::CorruptIndex(
                "checksum mismatch (truncated or modified file)".into(),
            ));
        }

        let mut r = Cursor { bytes: body, at: 8 };
        let q = r.u32()? as usize;
        check_q(q).map_err(|_| Error::CorruptIndex(format!("q-gram length {q} out of range")))?;
        let seed = r.u64()?;
        let mask_threshold = r.u32()?;
        let count = r.u32()?;
        let mut chromosomes = Vec::new();
        for _ in 0..count {
            let name_len = r.u32()? as usize;
            let name = String::from_utf8(r.take(name_len)?.to_vec())
                .map_err(|_| Error::CorruptIndex("chromosome name is not UTF-8".into()))?;
            let len = r.u64()?;
            let packed = r.take(len.div_ceil(4) as usize)?.to_vec();
            let n = r.u64()? as usize;
            let raw = r.take(
                n.checked_mul(8)
                    .ok_or_else(|| Error::CorruptIndex("position count".into()))?,
            )?;
            let positions = raw
                .chunks_exact(8)
                .map(|c| RefPosition {
                    code: u32::from_le_bytes(c[..4].try_into().unwrap()),
                    pos: u32::from_le_bytes(c[4..].try_into().unwrap()),
                })
                .collect();
            chromosomes.push(Chromosome {
                name,
                len,
                packed,
                positions,
            });
        }
        if r.at != body.len() {
            return Err(Error::CorruptIndex("trailing bytes after last chromosome".into()));
        }
        Ok(ReferenceIndex {
            q,
            mask_threshold,
            seed,
            chromosomes,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .at
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::CorruptIndex("unexpected end of data".into()))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Reads a FASTA file (plain or gzip) and builds its reference index.
pub fn build_reference_index(fasta: &Path, q: usize, mask_threshold: u32, seed: u64) -> Result<ReferenceIndex> {
    let records = read_fasta_file(fasta)?;
    ReferenceIndex::from_records(&records, q, mask_threshold, seed)
}
