//! Banded bit-parallel semi-global edit distance (Myers / Hyyrö) used to
//! validate filtration hits.
//!
//! The band is one machine word of diagonals. Instead of holding a whole
//! column, the bit-vectors hold the `band_width` cells of the current column
//! that fall inside the band; moving to the next column shifts the band one
//! row down, so the work per column is constant and reads of any length are
//! handled in `O(len)` word operations.
//!
//! The scan runs over the reversed read and reversed window, so the best
//! alignment *end* found by the scan is the best alignment *start* in
//! forward orientation.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filtration::Hit;
use crate::seq::Base;

pub const DEFAULT_BAND_WIDTH: u32 = 32;
pub const DEFAULT_IDENTITY_THRESHOLD: f64 = 0.80;
pub const MAX_BAND_WIDTH: u32 = 64;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandConfig {
    pub band_width: u32,
    pub identity_threshold: f64,
}

impl Default for BandConfig {
    fn default() -> Self {
        BandConfig {
            band_width: DEFAULT_BAND_WIDTH,
            identity_threshold: DEFAULT_IDENTITY_THRESHOLD,
        }
    }
}

impl BandConfig {
    pub fn new(band_width: u32, identity_threshold: f64) -> Result<Self> {
        if !(2..=MAX_BAND_WIDTH).contains(&band_width) {
            return Err(Error::Config(format!(
                "band width {band_width} must be between 2 and {MAX_BAND_WIDTH}"
            )));
        }
        if !(0.0..=1.0).contains(&identity_threshold) {
            return Err(Error::Config(format!(
                "identity threshold {identity_threshold} must lie in [0, 1]"
            )));
        }
        Ok(BandConfig {
            band_width,
            identity_threshold,
        })
    }

    /// Bases added before the putative start when cutting a window.
    pub fn slack(&self) -> i64 {
        self.band_width as i64 / 2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BandedAlignment {
    pub distance: u32,
    /// Offset of the alignment start inside the window.
    pub start_offset: usize,
}

/// Minimum semi-global edit distance of `read` against `window`, restricted
/// to start offsets (in the forward window) inside a band of `band_width`
/// diagonals anchored at the window's right end: an ungapped alignment may
/// start anywhere in `window.len() - read.len() - band_width + 1 ..=
/// window.len() - read.len()`. Among equally good starts the leftmost wins.
///
/// Returns `None` for an empty read or when no cell of the last read row
/// falls inside the window and band.
pub fn myers_banded(read: &[Base], window: &[Base], band_width: u32) -> Option<BandedAlignment> {
    let n = read.len();
    let w = band_width as usize;
    assert!((1..=MAX_BAND_WIDTH as usize).contains(&w), "unsupported band width {w}");
    if n == 0 {
        return None;
    }
    let mask = if w == 64 { u64::MAX } else { (1u64 << w) - 1 };
    let top = 1u64 << (w - 1);
    let cols = window.len().min(n + w - 1);

    // Bit k at column j stands for row j - (w - 1) + k of the reversed
    // problem. Rows <= 0 are virtual and match every symbol, which keeps
    // them at distance 0 and gives row 0 the free start of semi-global
    // alignment.
    let mut peq = [mask; 4];
    let mut vp = 0u64;
    let mut vn = 0u64;
    let mut score = 0u32;
    let mut best: Option<(u32, usize)> = None;

    for j in 1..=cols {
        let entering = if j <= n {
            Some(read[n - j].code() as usize)
        } else {
            None
        };
        for (c, eq) in peq.iter_mut().enumerate() {
            *eq = (*eq >> 1) | if entering == Some(c) { top } else { 0 };
        }
        // The entering row's cell left of the band is one below its upper neighbour.
        vp = (vp >> 1) | top;
        vn >>= 1;

        let eq = peq[window[window.len() - j].code() as usize];
        let d0 = ((((eq & vp).wrapping_add(vp)) ^ vp) | eq | vn) & mask;
        let hp = (vn | !(d0 | vp)) & mask;
        let hn = vp & d0;

        if j <= n {
            // follow the bottom diagonal until it reaches the last row
            score += (d0 & top == 0) as u32;
        } else {
            let k = n + w - 1 - j;
            score += (hp >> k & 1) as u32;
            score -= (hn >> k & 1) as u32;
        }
        if j >= n && best.is_none_or(|(b, _)| score <= b) {
            best = Some((score, j));
        }

        let hp = (hp << 1) & mask;
        let hn = (hn << 1) & mask;
        vp = (hn | !(d0 | hp)) & mask;
        vn = hp & d0;
    }

    best.map(|(distance, j)| BandedAlignment {
        distance,
        start_offset: window.len() - j,
    })
}

/// Fraction of read bases not paying for an edit.
pub fn identity(read_len: usize, distance: u32) -> f64 {
    (read_len as f64 - distance as f64) / read_len as f64
}

/// True when `(read_len - distance) / read_len >= threshold`, tolerant to
/// rounding of thresholds given in percent.
pub fn passes_threshold(read_len: usize, distance: u32, threshold: f64) -> bool {
    distance as usize <= read_len && identity(read_len, distance) + 1e-9 >= threshold
}

/// Reference range cut for a hit on `diagonal`, clamped to the chromosome.
pub fn hit_window(diagonal: i64, read_len: usize, chrom_len: usize, band_width: u32) -> std::ops::Range<usize> {
    let slack = band_width as i64 / 2;
    let start = (diagonal - slack).clamp(0, chrom_len as i64) as usize;
    let end = (diagonal - slack + read_len as i64 + band_width as i64 - 1).clamp(0, chrom_len as i64) as usize;
    start..end.max(start)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ValidatedHit {
    pub read: u32,
    pub ref_start: u64,
    pub distance: u32,
    pub identity: f64,
    pub diagonal: i64,
}

/// Validates each hit against `chromosome`; `reads[r]` is the read with id
/// `r`. Output keeps input order and drops hits below the identity threshold.
pub fn validate_hits<S: AsRef<[Base]> + Sync>(
    hits: &[Hit],
    reads: &[S],
    chromosome: &[Base],
    band: &BandConfig,
) -> Vec<ValidatedHit> {
    hits.par_iter()
        .with_min_len(64)
        .filter_map(|h| {
            let read = reads[h.read as usize].as_ref();
            let window = hit_window(h.diagonal, read.len(), chromosome.len(), band.band_width);
            let aln = myers_banded(read, &chromosome[window.clone()], band.band_width)?;
            passes_threshold(read.len(), aln.distance, band.identity_threshold).then(|| ValidatedHit {
                read: h.read,
                ref_start: (window.start + aln.start_offset) as u64,
                distance: aln.distance,
                identity: identity(read.len(), aln.distance),
                diagonal: h.diagonal,
            })
        })
        .collect()
}
