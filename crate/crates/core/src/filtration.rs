//! Streams reference q-gram positions against the read-side index and emits
//! one `(diagonal, read)` candidate per shared q-gram occurrence.

use rayon::prelude::*;

use crate::dataparallel::{compact, exclusive_scan_map, split_intervals_mut};
use crate::error::{Error, Result};
use crate::qgroup::{GroupWord, QGroupIndex};
use crate::reference::RefPosition;

/// A filtration candidate: read `read` may start at reference position
/// `diagonal` (negative when the read would overhang the chromosome start).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Hit {
    pub diagonal: i64,
    pub read: u32,
}

/// Produces every hit for `positions` against `index`, whose text was laid
/// out at `stride`. Order of the output is unspecified.
///
/// Passes: count occurrences per position, drop positions without any,
/// scan the counts into output intervals, then fill each interval.
pub fn filter_reference<W: GroupWord>(
    positions: &[RefPosition],
    index: &QGroupIndex<W>,
    stride: usize,
    max_hits: u64,
) -> Result<Vec<Hit>> {
    let counted: Vec<(RefPosition, u32)> = positions
        .par_iter()
        .map(|&p| {
            let n = index.index_pair(p.code).map_or(0, |(s, e)| e - s);
            (p, n as u32)
        })
        .collect();
    let live = compact(&counted, |&(_, n)| n > 0);
    let offsets = exclusive_scan_map(&live, |&(_, n)| n as u64)?;
    let total = *offsets.last().expect("scan appends a total");
    if total > max_hits {
        return Err(Error::HitOverflow {
            hits: total,
            limit: max_hits,
        });
    }

    let stride = stride as u64;
    let mut hits = vec![Hit::default(); total as usize];
    split_intervals_mut(&mut hits, &offsets)
        .into_par_iter()
        .zip(live.par_iter())
        .for_each(|(out, &(p, _))| {
            for (slot, &text_pos) in out.iter_mut().zip(index.occurrences(p.code)) {
                let text_pos = text_pos as u64;
                *slot = Hit {
                    diagonal: p.pos as i64 - (text_pos % stride) as i64,
                    read: (text_pos / stride) as u32,
                };
            }
        });
    Ok(hits)
}

/// Drops hits whose diagonal lies more than `slack` before the chromosome
/// start or at/after its end.
pub fn retain_in_bounds(hits: &mut Vec<Hit>, chrom_len: u64, slack: i64) {
    hits.retain(|h| h.diagonal >= -slack && h.diagonal < chrom_len as i64);
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seq::{encode_qgram, pack_reads, Base};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bases(s: &str) -> Vec<Base> {
        crate::seq::encode_seq(s.as_bytes(), &mut ChaCha8Rng::seed_from_u64(0)).unwrap()
    }

    fn all_positions(reference: &[Base], q: usize) -> Vec<RefPosition> {
        let mut v: Vec<RefPosition> = (0..(reference.len() + 1).saturating_sub(q))
            .map(|p| RefPosition {
                code: encode_qgram(&reference[p..p + q]),
                pos: p as u32,
            })
            .collect();
        v.sort_unstable();
        v
    }

    /// Nested-loop matcher: compares every reference q-gram with every read q-gram.
    fn naive(reference: &[Base], positions: &[RefPosition], reads: &[Vec<Base>], q: usize) -> Vec<Hit> {
        let mut out = Vec::new();
        for p in positions {
            let rq = &reference[p.pos as usize..p.pos as usize + q];
            for (r, read) in reads.iter().enumerate() {
                for off in 0..(read.len() + 1).saturating_sub(q) {
                    if &read[off..off + q] == rq {
                        out.push(Hit {
                            diagonal: p.pos as i64 - off as i64,
                            read: r as u32,
                        });
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    fn run(reference: &[Base], reads: &[Vec<Base>], q: usize) -> Vec<Hit> {
        let stride = reads.iter().map(Vec::len).max().unwrap_or(0);
        let text = crate::seq::PackedReadText::from_encoded(reads, stride, q).unwrap();
        let index = QGroupIndex::<u32>::build(&text).unwrap();
        let mut hits = filter_reference(&all_positions(reference, q), &index, stride, u64::MAX).unwrap();
        hits.sort_unstable();
        hits
    }

    #[test]
    fn two_reads_example() {
        let reads = vec![bases("ACGT"), bases("TACG")];
        let hits = run(&bases("ACGT"), &reads, 2);
        assert_eq!(hits.iter().filter(|h| **h == Hit { diagonal: 0, read: 0 }).count(), 3);
        assert!(hits.contains(&Hit { diagonal: -1, read: 1 }));
        assert_eq!(
            hits,
            naive(&bases("ACGT"), &all_positions(&bases("ACGT"), 2), &reads, 2)
        );
    }

    #[test]
    fn no_positions_no_hits() {
        let text = pack_reads(&["ACGT"], 4, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let index = QGroupIndex::<u32>::build(&text).unwrap();
        assert!(filter_reference(&[], &index, 4, u64::MAX).unwrap().is_empty());
    }

    #[test]
    fn unrelated_read_gets_no_hits() {
        let reads = vec![bases("ACGTAC"), bases("TTTTTT")];
        let hits = run(&bases("ACGTACGTAC"), &reads, 3);
        assert!(hits.iter().all(|h| h.read == 0));
        assert!(!hits.is_empty());
    }

    #[test]
    fn overflow_is_rejected() {
        let text = pack_reads(&["AAAA"], 4, 2, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let index = QGroupIndex::<u32>::build(&text).unwrap();
        let positions = all_positions(&bases("AAAAAA"), 2);
        let err = filter_reference(&positions, &index, 4, 10).unwrap_err();
        assert!(matches!(err, Error::HitOverflow { hits: 15, limit: 10 }));
    }

    #[test]
    fn bounds_filter() {
        let mut hits = vec![
            Hit { diagonal: -40, read: 0 },
            Hit { diagonal: -16, read: 0 },
            Hit { diagonal: 99, read: 0 },
            Hit { diagonal: 100, read: 0 },
        ];
        retain_in_bounds(&mut hits, 100, 16);
        assert_eq!(
            hits,
            vec![Hit { diagonal: -16, read: 0 }, Hit { diagonal: 99, read: 0 }]
        );
    }

    proptest! {
        #[test]
        fn matches_nested_loop_oracle(
            reference in prop::collection::vec(0u8..4, 0..400),
            reads in prop::collection::vec(prop::collection::vec(0u8..4, 0..30), 0..12),
            q in 2usize..5,
        ) {
            let reference: Vec<Base> = reference.into_iter().map(Base::from_code).collect();
            let reads: Vec<Vec<Base>> = reads.into_iter().map(|r| r.into_iter().map(Base::from_code).collect()).collect();
            let got = run(&reference, &reads, q);
            prop_assert_eq!(got, naive(&reference, &all_positions(&reference, q), &reads, q));
        }
    }
}
