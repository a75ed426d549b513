//! DNA alphabet, q-gram codes and the fixed-stride read text the read-side
//! index is built over.

use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Longest q-gram whose code fits a 32-bit word.
pub const MAX_Q: usize = 16;

/// Numeric q-gram code in `[0, 4^q)`, first base most significant.
pub type QGram = u32;

/// A nucleotide stored as its 2-bit code (A=0, C=1, G=2, T=3).
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[repr(transparent)]
pub struct Base(u8);

impl Base {
    pub const A: Base = Base(0);
    pub const C: Base = Base(1);
    pub const G: Base = Base(2);
    pub const T: Base = Base(3);

    /// Builds a base from the low two bits of `code`.
    #[inline]
    pub const fn from_code(code: u8) -> Base {
        Base(code & 3)
    }

    #[inline]
    pub const fn code(self) -> u8 {
        self.0
    }

    #[inline]
    pub const fn complement(self) -> Base {
        Base(3 - self.0)
    }

    pub const fn to_ascii(self) -> u8 {
        b"ACGT"[self.0 as usize]
    }
}

/// Returns true for IUPAC symbols that do not name a single base.
pub fn is_ambiguous(symbol: u8) -> bool {
    matches!(
        symbol.to_ascii_uppercase(),
        b'N' | b'R' | b'Y' | b'S' | b'W' | b'K' | b'M' | b'B' | b'D' | b'H' | b'V'
    )
}

/// Returns true if `symbol` is accepted by [`encode_base`].
pub fn is_nucleotide(symbol: u8) -> bool {
    matches!(symbol.to_ascii_uppercase(), b'A' | b'C' | b'G' | b'T' | b'U') || is_ambiguous(symbol)
}

/// Encodes one nucleotide symbol. Ambiguous symbols (N and the other IUPAC
/// codes) are replaced by a uniform draw from `rng`.
pub fn encode_base<R: Rng + ?Sized>(symbol: u8, rng: &mut R) -> Result<Base> {
    match symbol.to_ascii_uppercase() {
        b'A' => Ok(Base::A),
        b'C' => Ok(Base::C),
        b'G' => Ok(Base::G),
        b'T' | b'U' => Ok(Base::T),
        s if is_ambiguous(s) => Ok(Base(rng.random_range(0..4))),
        _ => Err(Error::InvalidSymbol(symbol as char)),
    }
}

/// Encodes a whole sequence, drawing replacements for ambiguous symbols in order.
pub fn encode_seq<R: Rng + ?Sized>(seq: &[u8], rng: &mut R) -> Result<Vec<Base>> {
    seq.iter().map(|&s| encode_base(s, rng)).collect()
}

pub fn reverse_complement(seq: &[Base]) -> Vec<Base> {
    seq.iter().rev().map(|b| b.complement()).collect()
}

/// Reverse complement of an ASCII sequence; ambiguous symbols map to `N`.
pub fn reverse_complement_ascii(seq: &[u8]) -> Vec<u8> {
    seq.iter()
        .rev()
        .map(|&s| match s.to_ascii_uppercase() {
            b'A' => b'T',
            b'C' => b'G',
            b'G' => b'C',
            b'T' | b'U' => b'A',
            _ => b'N',
        })
        .collect()
}

/// Base-4 code of `window`; the window length is the q-gram length.
#[inline]
pub fn encode_qgram(window: &[Base]) -> QGram {
    debug_assert!(window.len() <= MAX_Q);
    window.iter().fold(0, |g, b| (g << 2) | b.0 as QGram)
}

pub fn decode_qgram(g: QGram, q: usize) -> Vec<Base> {
    (0..q).rev().map(|t| Base::from_code((g >> (2 * t)) as u8)).collect()
}

pub fn check_q(q: usize) -> Result<()> {
    if q == 0 || q > MAX_Q {
        return Err(Error::InvalidQ(q));
    }
    Ok(())
}

/// Reads laid out back to back at a fixed stride.
///
/// Read `r` occupies `codes[r * stride .. r * stride + len_r]`; the rest of
/// its slot is padding. Only q-grams lying entirely inside one read are
/// listed in `valid_positions`, so padding and read junctions never produce
/// index entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedReadText {
    codes: Vec<Base>,
    stride: usize,
    q: usize,
    read_lengths: Vec<u32>,
    valid_positions: Vec<u32>,
}

impl PackedReadText {
    pub fn from_encoded<S: AsRef<[Base]> + Sync>(reads: &[S], stride: usize, q: usize) -> Result<Self> {
        check_q(q)?;
        if let Some((index, r)) = reads.iter().enumerate().find(|(_, r)| r.as_ref().len() > stride) {
            return Err(Error::ReadTooLong {
                index,
                len: r.as_ref().len(),
                stride,
            });
        }
        let total = reads.len() * stride;
        if total > u32::MAX as usize {
            return Err(Error::TextTooLarge(total));
        }

        let mut codes = vec![Base::A; total];
        codes
            .par_chunks_mut(stride.max(1))
            .zip(reads.par_iter())
            .for_each(|(slot, read)| {
                let read = read.as_ref();
                slot[..read.len()].copy_from_slice(read);
            });

        let read_lengths: Vec<u32> = reads.iter().map(|r| r.as_ref().len() as u32).collect();
        let valid_positions = read_lengths
            .par_iter()
            .enumerate()
            .flat_map_iter(|(r, &len)| {
                let base = (r * stride) as u32;
                let windows = (len as usize + 1).saturating_sub(q) as u32;
                (0..windows).map(move |off| base + off)
            })
            .collect();

        Ok(PackedReadText {
            codes,
            stride,
            q,
            read_lengths,
            valid_positions,
        })
    }

    pub fn codes(&self) -> &[Base] {
        &self.codes
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn read_count(&self) -> usize {
        self.read_lengths.len()
    }

    pub fn read_lengths(&self) -> &[u32] {
        &self.read_lengths
    }

    /// Start positions of all q-grams that lie inside a single read, ascending.
    pub fn valid_positions(&self) -> &[u32] {
        &self.valid_positions
    }

    #[inline]
    pub fn qgram_at(&self, pos: u32) -> QGram {
        let p = pos as usize;
        encode_qgram(&self.codes[p..p + self.q])
    }

    pub fn read(&self, r: usize) -> &[Base] {
        let start = r * self.stride;
        &self.codes[start..start + self.read_lengths[r] as usize]
    }
}

/// Encodes `reads` (ambiguous symbols drawn from `rng`, in read order) and
/// lays them out at stride `stride`.
pub fn pack_reads<S: AsRef<[u8]>, R: Rng + ?Sized>(
    reads: &[S],
    stride: usize,
    q: usize,
    rng: &mut R,
) -> Result<PackedReadText> {
    let encoded = reads
        .iter()
        .map(|r| encode_seq(r.as_ref(), rng))
        .collect::<Result<Vec<_>>>()?;
    PackedReadText::from_encoded(&encoded, stride, q)
}
