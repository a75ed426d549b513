//! The q-group index over a [`PackedReadText`].
//!
//! Q-gram codes are split into groups of `w` consecutive codes. For every
//! group one `w`-bit word records which of its q-grams occur in the text;
//! group `i`'s base offset plus the rank of bit `j` inside that word gives
//! the slot of q-gram `i * w + j` in the per-q-gram offset array, which in
//! turn delimits its occurrence positions. Only occurring q-grams take an
//! offset slot, so the index shrinks to about `2 * 4^q / w + 2|T|` words
//! when q-grams are sparse.

use std::fmt::Write as _;
use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rayon::prelude::*;
use xxhash_rust::xxh3::Xxh3;

use crate::dataparallel::{exclusive_scan_map, exclusive_scan_with_total, scatter_with_counters, CounterArray};
use crate::error::Result;
use crate::seq::{PackedReadText, QGram};

/// Machine word used for one group's occupancy bitmask.
pub trait GroupWord: Copy + Send + Sync + Eq + std::fmt::Debug + 'static {
    const BITS: u32;
    type Atomic: Send + Sync;

    fn new_atomic() -> Self::Atomic;
    fn set_bit(word: &Self::Atomic, bit: u32);
    fn into_word(word: Self::Atomic) -> Self;
    fn is_zero(self) -> bool;
    fn test(self, bit: u32) -> bool;
    fn popcount(self) -> u32;
    /// Number of set bits strictly below `bit`.
    fn rank(self, bit: u32) -> u32;
    fn to_le_bytes_vec(self) -> Vec<u8>;
}

impl GroupWord for u32 {
    const BITS: u32 = 32;
    type Atomic = AtomicU32;

    fn new_atomic() -> AtomicU32 {
        AtomicU32::new(0)
    }
    #[inline]
    fn set_bit(word: &AtomicU32, bit: u32) {
        word.fetch_or(1 << bit, Ordering::Relaxed);
    }
    fn into_word(word: AtomicU32) -> u32 {
        word.into_inner()
    }
    #[inline]
    fn is_zero(self) -> bool {
        self == 0
    }
    #[inline]
    fn test(self, bit: u32) -> bool {
        self >> bit & 1 == 1
    }
    #[inline]
    fn popcount(self) -> u32 {
        self.count_ones()
    }
    #[inline]
    fn rank(self, bit: u32) -> u32 {
        (self & ((1u32 << bit) - 1)).count_ones()
    }
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}

impl GroupWord for u64 {
    const BITS: u32 = 64;
    type Atomic = AtomicU64;

    fn new_atomic() -> AtomicU64 {
        AtomicU64::new(0)
    }
    #[inline]
    fn set_bit(word: &AtomicU64, bit: u32) {
        word.fetch_or(1 << bit, Ordering::Relaxed);
    }
    fn into_word(word: AtomicU64) -> u64 {
        word.into_inner()
    }
    #[inline]
    fn is_zero(self) -> bool {
        self == 0
    }
    #[inline]
    fn test(self, bit: u32) -> bool {
        self >> bit & 1 == 1
    }
    #[inline]
    fn popcount(self) -> u32 {
        self.count_ones()
    }
    #[inline]
    fn rank(self, bit: u32) -> u32 {
        (self & ((1u64 << bit) - 1)).count_ones()
    }
    fn to_le_bytes_vec(self) -> Vec<u8> {
        self.to_le_bytes().to_vec()
    }
}

/// Splits a q-gram code into its group and the bit inside the group word.
#[inline]
pub fn group_and_bit(g: QGram, w: u32) -> (usize, u32) {
    ((g / w) as usize, g % w)
}

/// Rank of bit `j` among the set bits of `word`.
#[inline]
pub fn grouprank<W: GroupWord>(word: W, j: u32) -> u32 {
    word.rank(j)
}

/// Number of groups needed to cover all `4^q` q-gram codes.
pub fn group_count(q: usize, w: u32) -> usize {
    (1usize << (2 * q)).div_ceil(w as usize)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct QGroupIndex<W: GroupWord = u32> {
    q: usize,
    /// One occupancy word per group.
    occupancy: Vec<W>,
    /// Group base offsets into `qgram_starts`, total appended. When
    /// `sampled`, only even groups are stored (plus the total).
    group_starts: Vec<u32>,
    sampled: bool,
    /// Start of each occurring q-gram's occurrence interval, total appended.
    qgram_starts: Vec<u32>,
    /// Text positions grouped by q-gram in code order.
    positions: Vec<u32>,
}

impl<W: GroupWord> QGroupIndex<W> {
    /// Builds the index over the valid q-gram positions of `text`.
    ///
    /// Four data-parallel passes: set occupancy bits; scan group popcounts
    /// into group offsets; count occurrences per occurring q-gram and scan
    /// them into interval starts; scatter positions into their intervals.
    pub fn build(text: &PackedReadText) -> Result<Self> {
        let q = text.q();
        let valid = text.valid_positions();
        let codes: Vec<QGram> = valid.par_iter().map(|&p| text.qgram_at(p)).collect();

        let bits: Vec<W::Atomic> = (0..group_count(q, W::BITS)).map(|_| W::new_atomic()).collect();
        codes.par_iter().for_each(|&g| {
            let (i, j) = group_and_bit(g, W::BITS);
            W::set_bit(&bits[i], j);
        });
        let occupancy: Vec<W> = bits.into_iter().map(W::into_word).collect();

        let group_starts = exclusive_scan_map(&occupancy, |w| w.popcount())?;
        let distinct = *group_starts.last().expect("scan appends a total") as usize;

        let slot_of = |g: QGram| {
            let (i, j) = group_and_bit(g, W::BITS);
            (group_starts[i] + occupancy[i].rank(j)) as usize
        };

        let counts = CounterArray::zeroed(distinct);
        codes.par_iter().for_each(|&g| {
            counts.increment(slot_of(g));
        });
        let qgram_starts = exclusive_scan_with_total(&counts.into_values())?;

        let mut positions = vec![0u32; codes.len()];
        let fill = CounterArray::zeroed(distinct);
        scatter_with_counters(codes.len(), &qgram_starts, &fill, &mut positions, |t| {
            Some((slot_of(codes[t]), valid[t]))
        })?;

        Ok(QGroupIndex {
            q,
            occupancy,
            group_starts,
            sampled: false,
            qgram_starts,
            positions,
        })
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn word_bits(&self) -> u32 {
        W::BITS
    }

    pub fn is_sampled(&self) -> bool {
        self.sampled
    }

    pub fn occupancy(&self) -> &[W] {
        &self.occupancy
    }

    pub fn group_starts(&self) -> &[u32] {
        &self.group_starts
    }

    pub fn qgram_starts(&self) -> &[u32] {
        &self.qgram_starts
    }

    pub fn positions(&self) -> &[u32] {
        &self.positions
    }

    /// Number of distinct q-grams present in the text.
    pub fn distinct_qgrams(&self) -> usize {
        self.qgram_starts.len() - 1
    }

    #[inline]
    fn group_start(&self, i: usize) -> u32 {
        if self.sampled {
            let base = self.group_starts[i >> 1];
            if i & 1 == 1 {
                base + self.occupancy[i - 1].popcount()
            } else {
                base
            }
        } else {
            self.group_starts[i]
        }
    }

    /// Half-open interval of the position array holding `g`'s occurrences,
    /// or `None` if `g` does not occur.
    #[inline]
    pub fn index_pair(&self, g: QGram) -> Option<(usize, usize)> {
        let (i, j) = group_and_bit(g, W::BITS);
        let word = *self.occupancy.get(i)?;
        if word.is_zero() || !word.test(j) {
            return None;
        }
        let slot = (self.group_start(i) + word.rank(j)) as usize;
        Some((self.qgram_starts[slot] as usize, self.qgram_starts[slot + 1] as usize))
    }

    /// Text positions where `g` occurs; order within the result is unspecified.
    #[inline]
    pub fn occurrences(&self, g: QGram) -> &[u32] {
        match self.index_pair(g) {
            Some((start, end)) => &self.positions[start..end],
            None => &[],
        }
    }

    /// Keeps only the group offsets of even groups; odd groups recover theirs
    /// with one extra popcount of the preceding occupancy word.
    pub fn sample_group_starts(mut self) -> Self {
        if self.sampled {
            return self;
        }
        let groups = self.occupancy.len();
        let total = self.group_starts[groups];
        let mut sampled: Vec<u32> = self.group_starts[..groups].iter().step_by(2).copied().collect();
        sampled.push(total);
        self.group_starts = sampled;
        self.sampled = true;
        self
    }

    /// Entries held across the four arrays, sentinels included.
    pub fn allocated_words(&self) -> usize {
        self.occupancy.len() + self.group_starts.len() + self.qgram_starts.len() + self.positions.len()
    }

    /// One line per array with its length and an xxh3 checksum.
    pub fn summary(&self) -> String {
        fn digest<T: Copy>(items: &[T], bytes: impl Fn(T) -> Vec<u8>) -> u64 {
            let mut h = Xxh3::new();
            for &x in items {
                h.update(&bytes(x));
            }
            h.digest()
        }
        let le32 = |x: u32| x.to_le_bytes().to_vec();
        let mut out = String::new();
        let _ = writeln!(out, "q\t{}\tw\t{}\tsampled\t{}", self.q, W::BITS, self.sampled);
        let _ = writeln!(
            out,
            "I\t{}\t{:016x}",
            self.occupancy.len(),
            digest(&self.occupancy, W::to_le_bytes_vec)
        );
        let _ = writeln!(
            out,
            "S\t{}\t{:016x}",
            self.group_starts.len(),
            digest(&self.group_starts, le32)
        );
        let _ = writeln!(
            out,
            "S'\t{}\t{:016x}",
            self.qgram_starts.len(),
            digest(&self.qgram_starts, le32)
        );
        let _ = writeln!(
            out,
            "O\t{}\t{:016x}",
            self.positions.len(),
            digest(&self.positions, le32)
        );
        out
    }
}

/// Word counts of a q-group index and a conventional q-gram index.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IndexSize {
    pub qgroup_words: u64,
    pub classic_words: u64,
    pub ratio: f64,
}

/// Upper-bound size of a q-group index (`2 * 4^q / w + min(4^q, |T|) + |T|`
/// words) against a conventional q-gram index (`4^q + |T|` words).
pub fn index_size_words(q: usize, text_len: u64, w: u32) -> IndexSize {
    let kmers = 1u64 << (2 * q);
    let qgroup_words = (2 * kmers).div_ceil(w as u64) + kmers.min(text_len) + text_len;
    let classic_words = kmers + text_len;
    IndexSize {
        qgroup_words,
        classic_words,
        ratio: qgroup_words as f64 / classic_words as f64,
    }
}
