//! Synthetic genomes and reads with known origin, and scoring of SAM
//! output against that origin.

use std::collections::HashMap;
use std::io::Write;

use rand::Rng;

use crate::io::{FastaRecord, FastqRecord};
use crate::sam::flags;
use crate::seq::reverse_complement_ascii;

const BASES: &[u8; 4] = b"ACGT";

fn random_base<R: Rng + ?Sized>(rng: &mut R) -> u8 {
    BASES[rng.random_range(0..4)]
}

fn other_base<R: Rng + ?Sized>(b: u8, rng: &mut R) -> u8 {
    loop {
        let c = random_base(rng);
        if c != b {
            return c;
        }
    }
}

/// Interspersed repeat families planted into a random genome.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RepeatSpec {
    pub families: usize,
    pub unit_len: usize,
    pub copies: usize,
    /// Per-base substitution probability of each copy relative to its family.
    pub divergence: f64,
}

/// Uniform random chromosomes of the given lengths, with repeat copies
/// written over random locations of any chromosome.
pub fn random_genome<R: Rng + ?Sized>(chroms: &[(&str, usize)], repeats: RepeatSpec, rng: &mut R) -> Vec<FastaRecord> {
    let mut records: Vec<FastaRecord> = chroms
        .iter()
        .map(|&(name, len)| FastaRecord {
            name: name.to_string(),
            seq: (0..len).map(|_| random_base(rng)).collect(),
        })
        .collect();
    let eligible: Vec<usize> = (0..records.len())
        .filter(|&c| records[c].seq.len() > repeats.unit_len)
        .collect();
    if eligible.is_empty() {
        return records;
    }
    for _ in 0..repeats.families {
        let unit: Vec<u8> = (0..repeats.unit_len).map(|_| random_base(rng)).collect();
        for _ in 0..repeats.copies {
            let c = eligible[rng.random_range(0..eligible.len())];
            let start = rng.random_range(0..=records[c].seq.len() - repeats.unit_len);
            for (k, &b) in unit.iter().enumerate() {
                records[c].seq[start + k] = if rng.random_bool(repeats.divergence) {
                    other_base(b, rng)
                } else {
                    b
                };
            }
        }
    }
    records
}

/// Per-base error model of the read simulator. At each template position
/// an error happens with probability `error_rate`; it is an insertion or a
/// deletion with probability `indel_fraction`, otherwise a substitution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorModel {
    pub read_len: usize,
    pub error_rate: f64,
    pub indel_fraction: f64,
    pub max_indel: usize,
}

/// Where a simulated read came from: `[start, end)` on chromosome `chrom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Origin {
    pub chrom: String,
    pub start: u64,
    pub end: u64,
    pub reverse: bool,
}

impl Origin {
    /// Read name carrying the origin, parsed back by [`parse_origin`].
    pub fn read_name(&self, id: usize) -> String {
        let strand = if self.reverse { '-' } else { '+' };
        format!("sim{id}:{}:{}:{}:{strand}", self.chrom, self.start, self.end)
    }
}

pub fn parse_origin(name: &str) -> Option<Origin> {
    let mut parts = name.rsplitn(4, ':');
    let strand = parts.next()?;
    let end = parts.next()?.parse().ok()?;
    let start = parts.next()?.parse().ok()?;
    let (_, chrom) = parts.next()?.split_once(':')?;
    Some(Origin {
        chrom: chrom.to_string(),
        start,
        end,
        reverse: match strand {
            "+" => false,
            "-" => true,
            _ => return None,
        },
    })
}

/// Draws `count` reads from `genome` under `model`; both strands equally.
pub fn simulate_reads<R: Rng + ?Sized>(
    genome: &[FastaRecord],
    count: usize,
    model: ErrorModel,
    rng: &mut R,
) -> Vec<FastqRecord> {
    let n = model.read_len;
    // enough template for the read even if every error were a deletion
    let span = n + n * model.max_indel.max(1);
    let weights: Vec<u64> = genome
        .iter()
        .map(|c| (c.seq.len() as u64).saturating_sub(span as u64))
        .collect();
    let total: u64 = weights.iter().sum();
    assert!(total > 0, "genome too short for reads of length {n}");

    (0..count)
        .map(|id| {
            let mut x = rng.random_range(0..total);
            let c = weights.iter().position(|&w| {
                x < w || {
                    x -= w;
                    false
                }
            });
            let chrom = &genome[c.expect("weights cover the draw")];
            let start = rng.random_range(0..chrom.seq.len() - span);
            let mut seq = Vec::with_capacity(n);
            let mut p = start;
            while seq.len() < n {
                if rng.random_bool(model.error_rate) {
                    if rng.random_bool(model.indel_fraction) {
                        let len = rng.random_range(1..=model.max_indel.max(1));
                        if rng.random_bool(0.5) {
                            for _ in 0..len.min(n - seq.len()) {
                                seq.push(random_base(rng));
                            }
                        } else {
                            p += len;
                        }
                        continue;
                    }
                    seq.push(other_base(chrom.seq[p], rng));
                } else {
                    seq.push(chrom.seq[p]);
                }
                p += 1;
            }
            let reverse = rng.random_bool(0.5);
            if reverse {
                seq = reverse_complement_ascii(&seq);
            }
            let origin = Origin {
                chrom: chrom.name.clone(),
                start: start as u64,
                end: p as u64,
                reverse,
            };
            FastqRecord {
                name: origin.read_name(id),
                qual: vec![b'I'; seq.len()],
                seq,
            }
        })
        .collect()
}

pub fn write_fasta<W: Write>(records: &[FastaRecord], out: &mut W) -> std::io::Result<()> {
    for r in records {
        writeln!(out, ">{}", r.name)?;
        for line in r.seq.chunks(80) {
            out.write_all(line)?;
            out.write_all(b"\n")?;
        }
    }
    Ok(())
}

pub fn write_fastq<W: Write>(records: &[FastqRecord], out: &mut W) -> std::io::Result<()> {
    for r in records {
        writeln!(out, "@{}", r.name)?;
        out.write_all(&r.seq)?;
        out.write_all(b"\n+\n")?;
        out.write_all(&r.qual)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Recall and rank-split precision of a mapping run over simulated reads.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct Evaluation {
    pub reads: u64,
    /// Reads with at least one record overlapping their origin.
    pub recalled: u64,
    pub rank1_records: u64,
    pub rank1_true: u64,
    pub rank2plus_records: u64,
    pub rank2plus_true: u64,
}

impl Evaluation {
    pub fn recall(&self) -> f64 {
        self.recalled as f64 / self.reads.max(1) as f64
    }

    pub fn rank1_precision(&self) -> f64 {
        self.rank1_true as f64 / self.rank1_records.max(1) as f64
    }

    pub fn rank2plus_precision(&self) -> f64 {
        self.rank2plus_true as f64 / self.rank2plus_records.max(1) as f64
    }
}

fn cigar_ref_len(cigar: &str) -> u64 {
    let mut total = 0;
    let mut n = 0u64;
    for c in cigar.chars() {
        match c.to_digit(10) {
            Some(d) => n = n * 10 + d as u64,
            None => {
                if matches!(c, 'M' | 'D' | 'N' | '=' | 'X') {
                    total += n;
                }
                n = 0;
            }
        }
    }
    total
}

/// Scores single-end SAM output whose read names were made by
/// [`Origin::read_name`]. Records with an unparseable name are ignored.
pub fn evaluate_sam(sam: &str) -> Evaluation {
    let mut eval = Evaluation::default();
    let mut seen: HashMap<&str, bool> = HashMap::new();
    for line in sam.lines().filter(|l| !l.starts_with('@')) {
        let f: Vec<&str> = line.split('\t').collect();
        if f.len() < 11 {
            continue;
        }
        let Some(origin) = parse_origin(f[0]) else { continue };
        let recalled = seen.entry(f[0]).or_insert(false);
        let flag: u16 = f[1].parse().unwrap_or(flags::UNMAPPED);
        if flag & flags::UNMAPPED != 0 {
            continue;
        }
        let pos: u64 = f[3].parse().unwrap_or(0);
        let start = pos.saturating_sub(1);
        let end = start + cigar_ref_len(f[5]);
        let hit = f[2] == origin.chrom && start < origin.end && origin.start < end;
        *recalled |= hit;
        let rank = f[11..]
            .iter()
            .find_map(|t| t.strip_prefix("XR:i:"))
            .and_then(|r| r.parse::<u32>().ok());
        match rank {
            Some(1) => {
                eval.rank1_records += 1;
                eval.rank1_true += hit as u64;
            }
            Some(_) => {
                eval.rank2plus_records += 1;
                eval.rank2plus_true += hit as u64;
            }
            None => {}
        }
    }
    eval.reads = seen.len() as u64;
    eval.recalled = seen.values().filter(|&&v| v).count() as u64;
    eval
}
