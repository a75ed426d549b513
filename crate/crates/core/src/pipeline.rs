//! Streaming read mapping in three stages: ingest, filtration plus
//! validation, and postprocessing plus SAM emission. The stages run on
//! their own threads and hand buffers over through bounded queues; the
//! data-parallel work inside a stage runs on a shared rayon pool.

use std::io::Write;
use std::sync::mpsc::sync_channel;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filtration::{filter_reference, retain_in_bounds, Hit};
use crate::io::FastqRecord;
use crate::postprocess::{
    dedup_hits, hit_ranks, mapping_quality, pair_mates, rank_order, stratify, traceback_cigar, Alignment, InsertRange,
    Strand, StratumMode,
};
use crate::qgroup::{GroupWord, QGroupIndex};
use crate::reference::{RefPosition, ReferenceIndex};
use crate::sam::{flags, SamHeader, SamRecord};
use crate::seq::{encode_seq, reverse_complement, reverse_complement_ascii, Base, PackedReadText};
use crate::validation::{validate_hits, BandConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct MapConfig {
    /// Buffer capacity in bases, counting both orientations of each read.
    pub query_buffer_bases: u64,
    pub band: BandConfig,
    pub mode: StratumMode,
    pub insert: InsertRange,
    /// Seeds the replacement of ambiguous read bases.
    pub seed: u64,
    /// Worker threads; 0 lets rayon decide.
    pub threads: usize,
    /// Bits per occupancy word of the read index: 32 or 64.
    pub group_width: u32,
    /// Run the stages one after another on the calling thread.
    pub serial: bool,
    pub queue_capacity: usize,
    /// Hit array limit for one filtration call; larger batches are split.
    pub max_hits: u64,
    /// Reference positions handed to one filtration call.
    pub position_chunk: usize,
}

impl Default for MapConfig {
    fn default() -> Self {
        MapConfig {
            query_buffer_bases: 10_000_000,
            band: BandConfig::default(),
            mode: StratumMode::BestStratum,
            insert: InsertRange::default(),
            seed: 0,
            threads: 0,
            group_width: 32,
            serial: false,
            queue_capacity: 2,
            max_hits: 1 << 24,
            position_chunk: 1 << 20,
        }
    }
}

/// One read, or both mates of a read pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Fragment {
    pub name: String,
    pub mates: Vec<FastqRecord>,
}

pub type FragmentSource<'a> = Box<dyn Iterator<Item = Result<Fragment>> + Send + 'a>;

fn strip_mate_suffix(name: &str) -> &str {
    name.strip_suffix("/1")
        .or_else(|| name.strip_suffix("/2"))
        .unwrap_or(name)
}

/// Single-end fragments from one record stream.
pub fn single_end<'a, I>(records: I) -> FragmentSource<'a>
where
    I: Iterator<Item = Result<FastqRecord>> + Send + 'a,
{
    Box::new(records.map(|r| {
        r.map(|rec| Fragment {
            name: rec.name.clone(),
            mates: vec![rec],
        })
    }))
}

/// Paired fragments from two record streams read in lockstep.
pub fn paired_end<'a, I, J>(first: I, second: J) -> FragmentSource<'a>
where
    I: Iterator<Item = Result<FastqRecord>> + Send + 'a,
    J: Iterator<Item = Result<FastqRecord>> + Send + 'a,
{
    let mut first = first.fuse();
    let mut second = second.fuse();
    Box::new(std::iter::from_fn(move || match (first.next(), second.next()) {
        (None, None) => None,
        (Some(Err(e)), _) | (_, Some(Err(e))) => Some(Err(e)),
        (Some(Ok(a)), Some(Ok(b))) => Some(Ok(Fragment {
            name: strip_mate_suffix(&a.name).to_string(),
            mates: vec![a, b],
        })),
        (Some(Ok(a)), None) => Some(Err(Error::Config(format!(
            "second mate file ends before the mate of {}",
            a.name
        )))),
        (None, Some(Ok(b))) => Some(Err(Error::Config(format!(
            "first mate file ends before the mate of {}",
            b.name
        )))),
    }))
}

/// Reads collected for one pass over the reference.
#[derive(Clone, Debug)]
pub struct ReadBuffer {
    pub fragments: Vec<Fragment>,
    /// Forward encoding of every mate, fragment-major.
    encoded: Vec<Vec<Base>>,
    mates: usize,
}

impl ReadBuffer {
    pub fn bases(&self) -> u64 {
        self.encoded.iter().map(|s| 2 * s.len() as u64).sum()
    }

    fn seq_index(&self, fragment: usize, mate: usize) -> usize {
        fragment * self.mates + mate
    }

    /// Forward and reverse-complement orientations; read id `2s + strand`
    /// holds sequence `s`.
    fn oriented(&self) -> Vec<Vec<Base>> {
        self.encoded
            .iter()
            .flat_map(|s| [s.clone(), reverse_complement(s)])
            .collect()
    }
}

/// Groups fragments into buffers of at most `capacity` bases (both
/// orientations counted). A fragment larger than the capacity gets a
/// buffer of its own; mates are never split.
struct Buffering<'a> {
    source: FragmentSource<'a>,
    capacity: u64,
    rng: ChaCha8Rng,
    pending: Option<Fragment>,
    mates: Option<usize>,
}

impl Buffering<'_> {
    fn next_buffer(&mut self) -> Result<Option<ReadBuffer>> {
        let mut fragments = Vec::new();
        let mut encoded = Vec::new();
        let mut bases = 0u64;
        loop {
            let frag = match self.pending.take() {
                Some(f) => f,
                None => match self.source.next() {
                    Some(f) => f?,
                    None => break,
                },
            };
            let size: u64 = frag.mates.iter().map(|m| 2 * m.seq.len() as u64).sum();
            if !fragments.is_empty() && bases + size > self.capacity {
                self.pending = Some(frag);
                break;
            }
            match self.mates {
                None => self.mates = Some(frag.mates.len()),
                Some(n) if n != frag.mates.len() => {
                    return Err(Error::Config("mixed single and paired fragments".into()));
                }
                Some(_) => {}
            }
            for mate in &frag.mates {
                encoded.push(encode_seq(&mate.seq, &mut self.rng)?);
            }
            bases += size;
            fragments.push(frag);
        }
        Ok((!fragments.is_empty()).then(|| ReadBuffer {
            fragments,
            encoded,
            mates: self.mates.unwrap_or(1),
        }))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MapStats {
    pub buffers: u64,
    pub fragments: u64,
    pub sequences: u64,
    pub mapped_sequences: u64,
    pub records: u64,
}

pub fn sam_header(reference: &ReferenceIndex, config: &MapConfig, command_line: &str) -> SamHeader {
    SamHeader {
        references: reference
            .chromosomes()
            .iter()
            .map(|c| (c.name.clone(), c.len()))
            .collect(),
        program_version: env!("CARGO_PKG_VERSION").to_string(),
        command_line: command_line.to_string(),
        read_seed: config.seed,
        reference_seed: reference.seed(),
    }
}

struct Context<'a> {
    reference: &'a ReferenceIndex,
    chromosomes: Vec<Vec<Base>>,
    config: &'a MapConfig,
}

/// Maps every fragment of `source` and writes SAM (header included) to `out`.
pub fn map_reads<W: Write>(
    reference: &ReferenceIndex,
    source: FragmentSource<'_>,
    config: &MapConfig,
    header: &SamHeader,
    out: &mut W,
) -> Result<MapStats> {
    if config.group_width != 32 && config.group_width != 64 {
        return Err(Error::Config(format!(
            "group width must be 32 or 64, got {}",
            config.group_width
        )));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    header.write_to(out)?;
    let ctx = Context {
        reference,
        chromosomes: pool.install(|| reference.chromosomes().par_iter().map(|c| c.sequence()).collect()),
        config,
    };
    let mut buffering = Buffering {
        source,
        capacity: config.query_buffer_bases,
        rng: ChaCha8Rng::seed_from_u64(config.seed),
        pending: None,
        mates: None,
    };
    let mut stats = MapStats::default();

    if config.serial {
        while let Some(buffer) = buffering.next_buffer()? {
            let hits = pool.install(|| search_buffer(&ctx, &buffer))?;
            emit_buffer(&ctx, &pool, buffer, hits, out, &mut stats)?;
        }
        out.flush()?;
        return Ok(stats);
    }

    let capacity = config.queue_capacity;
    std::thread::scope(|s| {
        let (to_search, searched_rx) = sync_channel::<Result<ReadBuffer>>(capacity);
        let (to_emit, emit_rx) = sync_channel::<Result<(ReadBuffer, Vec<Vec<Alignment>>)>>(capacity);
        s.spawn(move || loop {
            let item = buffering.next_buffer().transpose();
            let Some(item) = item else { break };
            let failed = item.is_err();
            if to_search.send(item).is_err() || failed {
                break;
            }
        });
        let (ctx, pool) = (&ctx, &pool);
        s.spawn(move || {
            for item in searched_rx {
                let item = item.and_then(|b| pool.install(|| search_buffer(ctx, &b)).map(|h| (b, h)));
                let failed = item.is_err();
                if to_emit.send(item).is_err() || failed {
                    break;
                }
            }
        });
        for item in emit_rx {
            let (buffer, hits) = item?;
            emit_buffer(ctx, pool, buffer, hits, out, &mut stats)?;
        }
        out.flush()?;
        Ok(stats)
    })
}

/// Validated alignments of every sequence in the buffer, indexed by sequence.
fn search_buffer(ctx: &Context<'_>, buffer: &ReadBuffer) -> Result<Vec<Vec<Alignment>>> {
    match ctx.config.group_width {
        64 => search_buffer_with::<u64>(ctx, buffer),
        _ => search_buffer_with::<u32>(ctx, buffer),
    }
}

fn search_buffer_with<W: GroupWord>(ctx: &Context<'_>, buffer: &ReadBuffer) -> Result<Vec<Vec<Alignment>>> {
    let mut per_seq: Vec<Vec<Alignment>> = vec![Vec::new(); buffer.encoded.len()];
    let oriented = buffer.oriented();
    let stride = oriented.iter().map(Vec::len).max().unwrap_or(0);
    let text = PackedReadText::from_encoded(&oriented, stride, ctx.reference.q())?;
    if text.valid_positions().is_empty() {
        return Ok(per_seq);
    }
    let index = QGroupIndex::<W>::build(&text)?;
    drop(text);
    let band = &ctx.config.band;

    for (c, chrom) in ctx.reference.chromosomes().iter().enumerate() {
        let seq = &ctx.chromosomes[c];
        for chunk in chrom.positions().chunks(ctx.config.position_chunk.max(1)) {
            let mut hits = filter_split(chunk, &index, stride, ctx.config.max_hits)?;
            retain_in_bounds(&mut hits, chrom.len(), band.band_width as i64);
            hits.par_sort_unstable();
            hits.dedup();
            for v in validate_hits(&hits, &oriented, seq, band) {
                let read_len = oriented[v.read as usize].len() as u32;
                per_seq[v.read as usize / 2].push(Alignment {
                    chrom: c as u32,
                    strand: if v.read % 2 == 0 {
                        Strand::Forward
                    } else {
                        Strand::Reverse
                    },
                    ref_start: v.ref_start,
                    distance: v.distance,
                    identity: v.identity,
                    read_len,
                });
            }
        }
    }
    Ok(per_seq)
}

/// Filtration that halves the position batch until the hit array fits.
fn filter_split<W: GroupWord>(
    positions: &[RefPosition],
    index: &QGroupIndex<W>,
    stride: usize,
    max_hits: u64,
) -> Result<Vec<Hit>> {
    match filter_reference(positions, index, stride, max_hits) {
        Err(Error::HitOverflow { .. }) if positions.len() > 1 => {
            let (a, b) = positions.split_at(positions.len() / 2);
            let mut hits = filter_split(a, index, stride, max_hits)?;
            hits.extend(filter_split(b, index, stride, max_hits)?);
            Ok(hits)
        }
        other => other,
    }
}

fn emit_buffer<W: Write>(
    ctx: &Context<'_>,
    pool: &rayon::ThreadPool,
    buffer: ReadBuffer,
    hits: Vec<Vec<Alignment>>,
    out: &mut W,
    stats: &mut MapStats,
) -> Result<()> {
    let mates = buffer.mates;
    let mut hits = hits.into_iter();
    let per_fragment: Vec<Vec<Vec<Alignment>>> = (0..buffer.fragments.len())
        .map(|_| hits.by_ref().take(mates).collect())
        .collect();
    let records: Vec<Vec<SamRecord>> = pool.install(|| {
        per_fragment
            .into_par_iter()
            .enumerate()
            .map(|(f, alns)| {
                let seqs: Vec<&[Base]> = (0..mates)
                    .map(|m| &buffer.encoded[buffer.seq_index(f, m)][..])
                    .collect();
                fragment_records(ctx, &buffer.fragments[f], &seqs, alns)
            })
            .collect()
    });
    stats.buffers += 1;
    for (frag, recs) in buffer.fragments.iter().zip(&records) {
        stats.fragments += 1;
        stats.sequences += frag.mates.len() as u64;
        for m in 0..frag.mates.len() {
            let mate_flag = mate_bit(frag.mates.len(), m);
            if recs
                .iter()
                .any(|r| r.flag & flags::UNMAPPED == 0 && r.flag & (flags::FIRST | flags::LAST) == mate_flag)
            {
                stats.mapped_sequences += 1;
            }
        }
        for r in recs {
            writeln!(out, "{r}")?;
            stats.records += 1;
        }
    }
    Ok(())
}

fn mate_bit(mates: usize, m: usize) -> u16 {
    match (mates, m) {
        (1, _) => 0,
        (_, 0) => flags::FIRST,
        _ => flags::LAST,
    }
}

/// An alignment ready for output.
#[derive(Clone, Debug)]
struct Placed {
    aln: Alignment,
    pos: u64,
    end: u64,
    cigar: String,
    edits: u32,
    rank: u32,
    mapq: u8,
}

fn place(ctx: &Context<'_>, seq: &[Base], aln: Alignment, rank: u32) -> Placed {
    let oriented = match aln.strand {
        Strand::Forward => seq.to_vec(),
        Strand::Reverse => reverse_complement(seq),
    };
    let chrom = &ctx.chromosomes[aln.chrom as usize];
    let tb = traceback_cigar(&oriented, chrom, aln.ref_start, ctx.config.band.band_width);
    Placed {
        aln,
        pos: tb.ref_start,
        end: tb.ref_end,
        cigar: tb.cigar.to_string(),
        edits: tb.edits,
        rank,
        mapq: mapping_quality(rank, ctx.reference.total_positions()),
    }
}

/// Deduplicated alignments in rank order, with hit-ranks.
fn ranked(alns: Vec<Alignment>) -> Vec<(Alignment, u32)> {
    let mut alns = dedup_hits(alns);
    alns.sort_by(rank_order);
    let ranks = hit_ranks(&alns.iter().map(|a| a.identity).collect::<Vec<_>>());
    alns.into_iter().zip(ranks).collect()
}

fn base_record(ctx: &Context<'_>, qname: &str, mate: &FastqRecord, placed: Option<&Placed>) -> SamRecord {
    let mut rec = SamRecord {
        qname: qname.to_string(),
        seq: mate.seq.to_ascii_uppercase(),
        qual: mate.qual.clone(),
        ..Default::default()
    };
    match placed {
        None => rec.flag |= flags::UNMAPPED,
        Some(p) => {
            rec.rname = Some(ctx.reference.chromosomes()[p.aln.chrom as usize].name.clone());
            rec.pos = p.pos + 1;
            rec.mapq = p.mapq;
            rec.cigar = Some(p.cigar.clone());
            rec.nm = Some(p.edits);
            rec.hit_rank = Some(p.rank);
            if p.aln.strand == Strand::Reverse {
                rec.flag |= flags::REVERSE;
                rec.seq = reverse_complement_ascii(&rec.seq);
                rec.qual.reverse();
            }
        }
    }
    rec
}

/// Fills the mate columns of `rec` from the mate's representative placement.
fn set_mate(ctx: &Context<'_>, rec: &mut SamRecord, own: Option<&Placed>, mate: Option<&Placed>) {
    match mate {
        None => rec.flag |= flags::MATE_UNMAPPED,
        Some(m) => {
            let same = own.is_none_or(|o| o.aln.chrom == m.aln.chrom);
            rec.rnext = Some(if same {
                "=".to_string()
            } else {
                ctx.reference.chromosomes()[m.aln.chrom as usize].name.clone()
            });
            rec.pnext = m.pos + 1;
            if m.aln.strand == Strand::Reverse {
                rec.flag |= flags::MATE_REVERSE;
            }
            if own.is_none() {
                // unplaced mate takes its partner's coordinates
                rec.rname = Some(ctx.reference.chromosomes()[m.aln.chrom as usize].name.clone());
                rec.pos = m.pos + 1;
            }
        }
    }
}

fn fragment_records(ctx: &Context<'_>, frag: &Fragment, seqs: &[&[Base]], alns: Vec<Vec<Alignment>>) -> Vec<SamRecord> {
    let mode = ctx.config.mode;
    if frag.mates.len() == 1 {
        let alns = alns.into_iter().next().unwrap_or_default();
        let kept = stratify(ranked(alns), |(a, _)| a.identity, mode);
        if kept.is_empty() {
            return vec![base_record(ctx, &frag.name, &frag.mates[0], None)];
        }
        return kept
            .into_iter()
            .enumerate()
            .map(|(i, (a, rank))| {
                let placed = place(ctx, seqs[0], a, rank);
                let mut rec = base_record(ctx, &frag.name, &frag.mates[0], Some(&placed));
                if i > 0 {
                    rec.flag |= flags::SECONDARY;
                }
                rec
            })
            .collect();
    }

    let mut alns = alns.into_iter();
    let first = ranked(alns.next().unwrap_or_default());
    let second = ranked(alns.next().unwrap_or_default());
    let plain = |v: &[(Alignment, u32)]| v.iter().map(|(a, _)| *a).collect::<Vec<_>>();
    let pairing = pair_mates(&plain(&first), &plain(&second), ctx.config.insert);

    let mut records = Vec::new();
    let bits = [flags::PAIRED | flags::FIRST, flags::PAIRED | flags::LAST];

    if !pairing.pairs.is_empty() {
        let sums: Vec<f64> = pairing
            .pairs
            .iter()
            .map(|&(i, j)| first[i].0.identity + second[j].0.identity)
            .collect();
        let ranks = hit_ranks(&sums);
        let pairs: Vec<((usize, usize), u32, f64)> = pairing
            .pairs
            .iter()
            .zip(ranks)
            .zip(&sums)
            .map(|((&p, r), &s)| (p, r, s))
            .collect();
        let pairs = stratify(pairs, |&(_, _, s)| s, mode);
        let mut primary: Option<(Placed, Placed)> = None;
        for (n, &((i, j), rank, _)) in pairs.iter().enumerate() {
            let a = place(ctx, seqs[0], first[i].0, rank);
            let b = place(ctx, seqs[1], second[j].0, rank);
            let left = a.pos.min(b.pos);
            let right = a.end.max(b.end);
            let tlen = (right - left) as i64;
            for (m, (own, other)) in [(&a, &b), (&b, &a)].into_iter().enumerate() {
                let mut rec = base_record(ctx, &frag.name, &frag.mates[m], Some(own));
                rec.flag |= bits[m] | flags::PROPER_PAIR;
                if n > 0 {
                    rec.flag |= flags::SECONDARY;
                }
                set_mate(ctx, &mut rec, Some(own), Some(other));
                let leftmost = own.pos < other.pos || (own.pos == other.pos && m == 0);
                rec.tlen = if leftmost { tlen } else { -tlen };
                records.push(rec);
            }
            if n == 0 {
                primary = Some((a, b));
            }
        }
        if mode == StratumMode::All {
            let (pa, pb) = primary.expect("at least one pair was kept");
            for (m, singles, hits, partner) in [
                (0, &pairing.singles_first, &first, &pb),
                (1, &pairing.singles_second, &second, &pa),
            ] {
                for &i in singles {
                    let (aln, rank) = hits[i];
                    let placed = place(ctx, seqs[m], aln, rank);
                    let mut rec = base_record(ctx, &frag.name, &frag.mates[m], Some(&placed));
                    rec.flag |= bits[m] | flags::SECONDARY;
                    set_mate(ctx, &mut rec, Some(&placed), Some(partner));
                    records.push(rec);
                }
            }
        }
        return records;
    }

    // no proper pair: each mate is reported on its own
    let placed: Vec<Vec<Placed>> = [(&first, 0), (&second, 1)]
        .into_iter()
        .map(|(hits, m)| {
            stratify(hits.clone(), |(a, _)| a.identity, mode)
                .into_iter()
                .map(|(a, rank)| place(ctx, seqs[m], a, rank))
                .collect()
        })
        .collect();
    for m in 0..2 {
        let partner = placed[1 - m].first();
        if placed[m].is_empty() {
            let mut rec = base_record(ctx, &frag.name, &frag.mates[m], None);
            rec.flag |= bits[m];
            set_mate(ctx, &mut rec, None, partner);
            records.push(rec);
        }
        for (n, p) in placed[m].iter().enumerate() {
            let mut rec = base_record(ctx, &frag.name, &frag.mates[m], Some(p));
            rec.flag |= bits[m];
            if n > 0 {
                rec.flag |= flags::SECONDARY;
            }
            set_mate(ctx, &mut rec, Some(p), partner);
            records.push(rec);
        }
    }
    records
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::io::FastaRecord;

    fn rec(name: &str, seq: &str) -> FastqRecord {
        FastqRecord {
            name: name.into(),
            seq: seq.as_bytes().to_vec(),
            qual: vec![b'I'; seq.len()],
        }
    }

    fn source(recs: Vec<FastqRecord>) -> FragmentSource<'static> {
        single_end(recs.into_iter().map(Ok))
    }

    fn genome(len: usize, seed: u64) -> Vec<u8> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| b"ACGT"[rng.random_range(0..4)]).collect()
    }

    fn reference(seqs: &[(&str, Vec<u8>)], q: usize) -> ReferenceIndex {
        let records: Vec<FastaRecord> = seqs
            .iter()
            .map(|(n, s)| FastaRecord {
                name: n.to_string(),
                seq: s.clone(),
            })
            .collect();
        ReferenceIndex::from_records(&records, q, 1000, 1).unwrap()
    }

    fn run(reference: &ReferenceIndex, src: FragmentSource<'_>, config: &MapConfig) -> String {
        let header = sam_header(reference, config, "test");
        let mut out = Vec::new();
        map_reads(reference, src, config, &header, &mut out).unwrap();
        String::from_utf8(out).unwrap()
    }

    fn body(sam: &str) -> Vec<Vec<String>> {
        sam.lines()
            .filter(|l| !l.starts_with('@'))
            .map(|l| l.split('\t').map(String::from).collect())
            .collect()
    }

    #[test]
    fn buffering_respects_capacity_and_mates() {
        let frags: Vec<Result<Fragment>> = (0..5)
            .map(|i| {
                Ok(Fragment {
                    name: format!("f{i}"),
                    mates: vec![rec("a", "ACGTACGTAC"), rec("b", "ACGTACGTAC")],
                })
            })
            .collect();
        let mut b = Buffering {
            source: Box::new(frags.into_iter()),
            capacity: 85,
            rng: ChaCha8Rng::seed_from_u64(0),
            pending: None,
            mates: None,
        };
        let sizes: Vec<usize> = std::iter::from_fn(|| b.next_buffer().unwrap())
            .map(|buf| {
                assert!(buf.bases() <= 85);
                assert_eq!(buf.encoded.len(), 2 * buf.fragments.len());
                buf.fragments.len()
            })
            .collect();
        assert_eq!(sizes, vec![2, 2, 1]);
    }

    #[test]
    fn oversized_fragment_gets_its_own_buffer() {
        let mut b = Buffering {
            source: source(vec![rec("r", "ACGTACGT")]),
            capacity: 4,
            rng: ChaCha8Rng::seed_from_u64(0),
            pending: None,
            mates: None,
        };
        assert_eq!(b.next_buffer().unwrap().unwrap().fragments.len(), 1);
        assert!(b.next_buffer().unwrap().is_none());
    }

    #[test]
    fn paired_streams_must_agree_in_length() {
        let frags: Vec<_> = paired_end(
            vec![Ok(rec("x/1", "AC")), Ok(rec("y/1", "AC"))].into_iter(),
            vec![Ok(rec("x/2", "GT"))].into_iter(),
        )
        .collect();
        assert_eq!(frags[0].as_ref().unwrap().name, "x");
        assert!(frags[1].is_err());
    }

    #[test]
    fn exact_forward_hit() {
        let g = genome(2000, 5);
        let refx = reference(&[("chr1", g.clone())], 11);
        let read = std::str::from_utf8(&g[10..110]).unwrap();
        let sam = run(&refx, source(vec![rec("r1", read)]), &MapConfig::default());
        let rows = body(&sam);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!(&r[1..6], ["0", "chr1", "11", "255", "100M"]);
        assert_eq!(r[11], "NM:i:0");
        assert_eq!(r[12], "XR:i:1");
    }

    #[test]
    fn reverse_hit_is_flagged_and_complemented() {
        let g = genome(2000, 6);
        let refx = reference(&[("chr1", g.clone())], 11);
        let rc = reverse_complement_ascii(&g[500..600]);
        let sam = run(
            &refx,
            source(vec![rec("r1", std::str::from_utf8(&rc).unwrap())]),
            &MapConfig::default(),
        );
        let rows = body(&sam);
        assert_eq!(rows[0][1], "16");
        assert_eq!(rows[0][3], "501");
        assert_eq!(rows[0][9].as_bytes(), &g[500..600]);
    }

    #[test]
    fn equal_hits_give_primary_and_secondary() {
        let unit = genome(300, 7);
        let mut chrom = genome(400, 8);
        chrom.extend_from_slice(&unit);
        chrom.extend(genome(400, 9));
        chrom.extend_from_slice(&unit);
        chrom.extend(genome(400, 10));
        let refx = reference(&[("chr1", chrom)], 11);
        let read = std::str::from_utf8(&unit[100..200]).unwrap();
        let config = MapConfig {
            mode: StratumMode::All,
            ..MapConfig::default()
        };
        let rows = body(&run(&refx, source(vec![rec("r1", read)]), &config));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][1], "0");
        assert_eq!(rows[1][1], "256");
        assert_eq!(rows[0][3], "501");
        assert_eq!(rows[1][3], "1201");
        // two hits of rank 2 among ~2000 positions
        assert!(rows.iter().all(|r| r[12] == "XR:i:2"));
    }

    #[test]
    fn unmapped_and_empty_reads() {
        let g = genome(1000, 11);
        let refx = reference(&[("chr1", g)], 11);
        let sam = run(
            &refx,
            source(vec![rec("n", "NNNNNNNNNNNNNNNNNNNN"), rec("e", "")]),
            &MapConfig::default(),
        );
        let rows = body(&sam);
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r[1] == "4" && r[2] == "*"));
        assert_eq!(rows[1][9], "*");
        assert_eq!(crate::sam::check_sam(&sam), Ok(2));
    }

    #[test]
    fn empty_input_writes_header_only() {
        let refx = reference(&[("chr1", genome(500, 12))], 11);
        let sam = run(&refx, source(vec![]), &MapConfig::default());
        assert!(sam.lines().all(|l| l.starts_with('@')));
        assert!(sam.contains("@SQ\tSN:chr1\tLN:500"));
    }

    #[test]
    fn proper_pair_flags() {
        let g = genome(3000, 13);
        let refx = reference(&[("chr1", g.clone())], 11);
        let m1 = std::str::from_utf8(&g[1000..1100]).unwrap().to_string();
        let m2 = String::from_utf8(reverse_complement_ascii(&g[1250..1350])).unwrap();
        let src = paired_end(
            vec![Ok(rec("p/1", &m1))].into_iter(),
            vec![Ok(rec("p/2", &m2))].into_iter(),
        );
        let rows = body(&run(&refx, src, &MapConfig::default()));
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0][0], "p");
        let f0: u16 = rows[0][1].parse().unwrap();
        let f1: u16 = rows[1][1].parse().unwrap();
        assert_eq!(
            f0,
            flags::PAIRED | flags::PROPER_PAIR | flags::FIRST | flags::MATE_REVERSE
        );
        assert_eq!(f1, flags::PAIRED | flags::PROPER_PAIR | flags::LAST | flags::REVERSE);
        assert_eq!(
            (rows[0][6].as_str(), rows[0][7].as_str(), rows[0][8].as_str()),
            ("=", "1251", "350")
        );
        assert_eq!((rows[1][7].as_str(), rows[1][8].as_str()), ("1001", "-350"));
    }

    #[test]
    fn lone_mate_marks_partner_unmapped() {
        let g = genome(3000, 14);
        let refx = reference(&[("chr1", g.clone())], 11);
        let m1 = std::str::from_utf8(&g[1000..1100]).unwrap().to_string();
        let src = paired_end(
            vec![Ok(rec("p/1", &m1))].into_iter(),
            vec![Ok(rec("p/2", &"N".repeat(50)))].into_iter(),
        );
        let rows = body(&run(&refx, src, &MapConfig::default()));
        let f0: u16 = rows[0][1].parse().unwrap();
        let f1: u16 = rows[1][1].parse().unwrap();
        assert_eq!(f0, flags::PAIRED | flags::FIRST | flags::MATE_UNMAPPED);
        assert_eq!(f1, flags::PAIRED | flags::LAST | flags::UNMAPPED);
        assert_eq!((rows[1][2].as_str(), rows[1][3].as_str()), ("chr1", "1001"));
    }

    #[test]
    fn group_width_must_be_supported() {
        let refx = reference(&[("chr1", genome(500, 15))], 11);
        let config = MapConfig {
            group_width: 16,
            ..MapConfig::default()
        };
        let header = sam_header(&refx, &config, "");
        let err = map_reads(&refx, source(vec![]), &config, &header, &mut Vec::new()).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn split_filtration_matches_unsplit() {
        let g = genome(5000, 16);
        let refx = reference(&[("chr1", g.clone())], 8);
        let reads: Vec<FastqRecord> = (0..20)
            .map(|i| {
                rec(
                    &format!("r{i}"),
                    std::str::from_utf8(&g[i * 200..i * 200 + 80]).unwrap(),
                )
            })
            .collect();
        let base = MapConfig {
            mode: StratumMode::All,
            ..MapConfig::default()
        };
        let tight = MapConfig {
            max_hits: 50,
            position_chunk: 700,
            ..base.clone()
        };
        assert_eq!(
            run(&refx, source(reads.clone()), &base),
            run(&refx, source(reads), &tight)
        );
    }
}
