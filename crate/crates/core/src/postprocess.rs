//! Turns validated hits into mapping records: duplicate removal, strata,
//! hit-rank, mapping quality, mate pairing and CIGAR traceback.

use std::cmp::Ordering;
use std::fmt;

use crate::error::{Error, Result};
use crate::seq::Base;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strand {
    Forward,
    Reverse,
}

/// A validated alignment of one query sequence, located on a chromosome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Alignment {
    pub chrom: u32,
    pub strand: Strand,
    pub ref_start: u64,
    pub distance: u32,
    pub identity: f64,
    pub read_len: u32,
}

impl Alignment {
    /// End of the alignment assuming no net indel; used for pairing only.
    pub fn approx_end(&self) -> u64 {
        self.ref_start + self.read_len as u64
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StratumMode {
    #[default]
    BestStratum,
    All,
}

impl std::str::FromStr for StratumMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "best-stratum" => Ok(StratumMode::BestStratum),
            "all" => Ok(StratumMode::All),
            other => Err(Error::Config(format!(
                "unknown mode {other:?} (expected best-stratum or all)"
            ))),
        }
    }
}

/// Accepted outer distance of a proper pair, inclusive on both ends.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct InsertRange {
    pub min: u64,
    pub max: u64,
}

impl Default for InsertRange {
    fn default() -> Self {
        InsertRange { min: 0, max: 1000 }
    }
}

/// Removes duplicates of the same alignment (same chromosome, strand and
/// start), keeping the one with the smallest distance.
pub fn dedup_hits(mut hits: Vec<Alignment>) -> Vec<Alignment> {
    hits.sort_by(|a, b| {
        (a.chrom, a.strand, a.ref_start, a.distance).cmp(&(b.chrom, b.strand, b.ref_start, b.distance))
    });
    hits.dedup_by(|later, kept| {
        (later.chrom, later.strand, later.ref_start) == (kept.chrom, kept.strand, kept.ref_start)
    });
    hits
}

/// Orders by non-increasing score, ties by chromosome, position and strand.
pub fn rank_order(a: &Alignment, b: &Alignment) -> Ordering {
    b.identity
        .total_cmp(&a.identity)
        .then((a.chrom, a.ref_start, a.strand).cmp(&(b.chrom, b.ref_start, b.strand)))
}

/// Hit-rank of each score: how many scores are at least as high, itself included.
pub fn hit_ranks(scores: &[f64]) -> Vec<u32> {
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    scores
        .iter()
        .map(|&s| sorted.partition_point(|&x| x >= s) as u32)
        .collect()
}

/// Stratum index of each score: 0 for the best score, 1 for the next
/// distinct score, and so on.
pub fn strata(scores: &[f64]) -> Vec<u32> {
    let mut distinct = scores.to_vec();
    distinct.sort_by(|a, b| b.total_cmp(a));
    distinct.dedup();
    scores
        .iter()
        .map(|&s| distinct.partition_point(|&x| x > s) as u32)
        .collect()
}

/// PHRED-scaled probability that a score this good arises by chance, with
/// `Pr = (rank - 1) / positions`, rounded half up and clamped to `0..=255`.
pub fn mapping_quality(rank: u32, positions: u64) -> u8 {
    if rank <= 1 {
        return 255;
    }
    let p = (rank - 1) as f64 / positions.max(1) as f64;
    let q = -10.0 * p.log10();
    (q + 0.5).floor().clamp(0.0, 255.0) as u8
}

/// Keeps only the best-scoring items in best-stratum mode.
pub fn stratify<T>(items: Vec<T>, score: impl Fn(&T) -> f64, mode: StratumMode) -> Vec<T> {
    match mode {
        StratumMode::All => items,
        StratumMode::BestStratum => {
            let Some(best) = items.iter().map(&score).max_by(f64::total_cmp) else {
                return items;
            };
            items.into_iter().filter(|x| score(x) == best).collect()
        }
    }
}

/// Outer distance of a forward/reverse pair if the two form a proper pair.
pub fn proper_insert(a: &Alignment, b: &Alignment, insert: InsertRange) -> Option<u64> {
    if a.chrom != b.chrom || a.strand == b.strand {
        return None;
    }
    let (fwd, rev) = if a.strand == Strand::Forward { (a, b) } else { (b, a) };
    let end = rev.approx_end();
    if end < fwd.ref_start {
        return None;
    }
    let span = end - fwd.ref_start;
    (insert.min..=insert.max).contains(&span).then_some(span)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Pairing {
    /// Index pairs `(first mate, second mate)`.
    pub pairs: Vec<(usize, usize)>,
    pub singles_first: Vec<usize>,
    pub singles_second: Vec<usize>,
}

/// Pairs alignments of the two mates greedily by summed identity; each
/// alignment joins at most one pair and the rest stay singletons.
pub fn pair_mates(first: &[Alignment], second: &[Alignment], insert: InsertRange) -> Pairing {
    let mut by_pos: Vec<usize> = (0..second.len()).collect();
    by_pos.sort_by_key(|&j| (second[j].chrom, second[j].ref_start));

    let mut candidates = Vec::new();
    for (i, a) in first.iter().enumerate() {
        let reach = insert.max + a.read_len.max(1) as u64 + 1 + max_len(second);
        let lo = a.ref_start.saturating_sub(reach);
        let from = by_pos.partition_point(|&j| (second[j].chrom, second[j].ref_start) < (a.chrom, lo));
        for &j in &by_pos[from..] {
            let b = &second[j];
            if b.chrom != a.chrom || b.ref_start > a.ref_start + reach {
                break;
            }
            if proper_insert(a, b, insert).is_some() {
                candidates.push((i, j));
            }
        }
    }
    candidates.sort_by(|&(i1, j1), &(i2, j2)| {
        let s1 = first[i1].identity + second[j1].identity;
        let s2 = first[i2].identity + second[j2].identity;
        s2.total_cmp(&s1).then(
            (first[i1].chrom, first[i1].ref_start.min(second[j1].ref_start), i1, j1).cmp(&(
                first[i2].chrom,
                first[i2].ref_start.min(second[j2].ref_start),
                i2,
                j2,
            )),
        )
    });

    let mut used_first = vec![false; first.len()];
    let mut used_second = vec![false; second.len()];
    let mut pairing = Pairing::default();
    for (i, j) in candidates {
        if !used_first[i] && !used_second[j] {
            used_first[i] = true;
            used_second[j] = true;
            pairing.pairs.push((i, j));
        }
    }
    pairing.singles_first = (0..first.len()).filter(|&i| !used_first[i]).collect();
    pairing.singles_second = (0..second.len()).filter(|&j| !used_second[j]).collect();
    pairing
}

fn max_len(alns: &[Alignment]) -> u64 {
    alns.iter().map(|a| a.read_len as u64).max().unwrap_or(0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CigarOp {
    /// Match or mismatch.
    Match,
    /// Read base absent from the reference.
    Ins,
    /// Reference base absent from the read.
    Del,
}

impl CigarOp {
    fn symbol(self) -> char {
        match self {
            CigarOp::Match => 'M',
            CigarOp::Ins => 'I',
            CigarOp::Del => 'D',
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Cigar(pub Vec<(u32, CigarOp)>);

impl Cigar {
    fn push(&mut self, op: CigarOp) {
        match self.0.last_mut() {
            Some((n, last)) if *last == op => *n += 1,
            _ => self.0.push((1, op)),
        }
    }

    pub fn read_len(&self) -> u64 {
        self.0
            .iter()
            .filter(|(_, op)| *op != CigarOp::Del)
            .map(|&(n, _)| n as u64)
            .sum()
    }

    pub fn ref_len(&self) -> u64 {
        self.0
            .iter()
            .filter(|(_, op)| *op != CigarOp::Ins)
            .map(|&(n, _)| n as u64)
            .sum()
    }
}

impl fmt::Display for Cigar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &(n, op) in &self.0 {
            write!(f, "{n}{}", op.symbol())?;
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Traceback {
    pub cigar: Cigar,
    pub ref_start: u64,
    pub ref_end: u64,
    pub edits: u32,
}

/// Semi-global alignment of `read` around `ref_start` with traceback.
///
/// The DP covers diagonals within `2 * band_width` of the validated start,
/// twice the validation band, so an indel pushed past the validation band
/// can still be placed. Among optimal end columns the rightmost is taken;
/// the traceback prefers a diagonal step, then a deletion, then an insertion.
pub fn traceback_cigar(read: &[Base], reference: &[Base], ref_start: u64, band_width: u32) -> Traceback {
    const INF: u32 = u32::MAX / 2;
    let n = read.len();
    let reach = 2 * band_width as usize;
    let win_start = (ref_start as usize).saturating_sub(reach).min(reference.len());
    let win_end = (ref_start as usize + n + reach).min(reference.len());
    let window = &reference[win_start..win_end];
    let m = window.len();
    let center = ref_start as i64 - win_start as i64;
    let (lo, hi) = (center - reach as i64, center + reach as i64);
    let width = (hi - lo + 1) as usize;

    // cell (i, j) lives at row i, column (j - i) - lo
    let at = |i: usize, j: usize| -> Option<usize> {
        let d = j as i64 - i as i64;
        (lo..=hi).contains(&d).then(|| i * width + (d - lo) as usize)
    };
    let mut cost = vec![INF; (n + 1) * width];
    for j in 0..=m {
        if let Some(c) = at(0, j) {
            cost[c] = 0;
        }
    }
    let get = |cost: &[u32], i: usize, j: usize| at(i, j).map_or(INF, |c| cost[c]);
    for i in 1..=n {
        let j_lo = (i as i64 + lo).max(0);
        let j_hi = (i as i64 + hi).min(m as i64);
        if j_lo > j_hi {
            continue;
        }
        for j in j_lo as usize..=j_hi as usize {
            let mut best = get(&cost, i - 1, j) + 1;
            if j > 0 {
                best = best
                    .min(get(&cost, i - 1, j - 1) + (read[i - 1] != window[j - 1]) as u32)
                    .min(get(&cost, i, j - 1) + 1);
            }
            cost[at(i, j).unwrap()] = best;
        }
    }

    let mut end = None;
    for j in 0..=m {
        let c = get(&cost, n, j);
        if c < INF && end.is_none_or(|(bc, _)| c <= bc) {
            end = Some((c, j));
        }
    }
    let Some((edits, end_col)) = end else {
        // nothing fits inside the window: report the read as inserted
        let mut cigar = Cigar::default();
        for _ in 0..n {
            cigar.push(CigarOp::Ins);
        }
        return Traceback {
            cigar,
            ref_start,
            ref_end: ref_start,
            edits: n as u32,
        };
    };

    let mut ops = Vec::with_capacity(n + 2 * reach);
    let (mut i, mut j) = (n, end_col);
    while i > 0 {
        let here = get(&cost, i, j);
        if j > 0 && here == get(&cost, i - 1, j - 1) + (read[i - 1] != window[j - 1]) as u32 {
            ops.push(CigarOp::Match);
            i -= 1;
            j -= 1;
        } else if j > 0 && here == get(&cost, i, j - 1) + 1 {
            ops.push(CigarOp::Del);
            j -= 1;
        } else {
            ops.push(CigarOp::Ins);
            i -= 1;
        }
    }
    let mut cigar = Cigar::default();
    for op in ops.into_iter().rev() {
        cigar.push(op);
    }
    Traceback {
        cigar,
        ref_start: (win_start + j) as u64,
        ref_end: (win_start + end_col) as u64,
        edits,
    }
}
