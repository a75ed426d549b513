//! Acceptance suite. Runs every criterion in sequence, prints one
//! `[PASS]`/`[FAIL]` line per criterion and exits non-zero on any failure.
//!
//! Run with `cargo test -p qgmap-core --test acceptance`.

use std::collections::HashMap;
use std::time::{Duration, Instant};

use qgmap::filtration::filter_reference;
use qgmap::io::{FastaRecord, FastqRecord};
use qgmap::pipeline::{map_reads, sam_header, single_end, MapConfig};
use qgmap::postprocess::{mapping_quality, StratumMode};
use qgmap::qgroup::{index_size_words, QGroupIndex};
use qgmap::reference::{ReferenceIndex, DEFAULT_MASK_THRESHOLD};
use qgmap::sam::check_sam;
use qgmap::seq::{encode_qgram, Base, PackedReadText};
use qgmap::simulate::{evaluate_sam, random_genome, simulate_reads, ErrorModel, Evaluation, RepeatSpec};
use qgmap::validation::{myers_banded, BandConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn random_bases(rng: &mut ChaCha8Rng, n: usize) -> Vec<Base> {
    (0..n).map(|_| Base::from_code(rng.random_range(0..4))).collect()
}

// ---------------------------------------------------------------------------
// 1. index against a naive scan

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0xC1);
    let mut mismatches = 0usize;
    let mut checked = 0usize;
    for t in 0..200 {
        let q = 2 + t % 7;
        let total = rng.random_range(1..=100_000usize);
        let stride = rng.random_range(q.max(4)..=400.min(total.max(q.max(4))));
        let count = (total / stride).max(1);
        let reads: Vec<Vec<Base>> = (0..count)
            .map(|_| {
                let len = rng.random_range(0..=stride);
                random_bases(&mut rng, len)
            })
            .collect();
        let text = PackedReadText::from_encoded(&reads, stride, q).unwrap();
        let index = QGroupIndex::<u32>::build(&text).unwrap();

        // naive scan: slide over every read, bucket q-gram starts by code
        let mut naive: HashMap<u32, Vec<u32>> = HashMap::new();
        for (r, read) in reads.iter().enumerate() {
            for off in 0..(read.len() + 1).saturating_sub(q) {
                naive
                    .entry(encode_qgram(&read[off..off + q]))
                    .or_default()
                    .push((r * stride + off) as u32);
            }
        }
        for g in 0..1u32 << (2 * q) {
            let mut got = index.occurrences(g).to_vec();
            got.sort_unstable();
            if got != naive.get(&g).cloned().unwrap_or_default() {
                mismatches += 1;
            }
            checked += 1;
        }
    }
    let elapsed = start.elapsed();
    outcome(
        mismatches == 0 && elapsed < Duration::from_secs(60),
        format!("{checked} q-grams over 200 texts, {mismatches} mismatches, {elapsed:.1?} (limit 60 s)"),
    )
}

// ---------------------------------------------------------------------------
// 2. size formula

fn criterion_2() -> Outcome {
    let full = index_size_words(16, 100_000_000, 32).ratio;
    // break-even: 4^q / |T| = 16/15
    let breakeven = index_size_words(8, 65_536 * 15 / 16, 32).ratio;
    // epsilon = |T| / 4^q = 1
    let eps1 = index_size_words(10, 1 << 20, 32).ratio;
    let pass = (0.105..=0.110).contains(&full) && (breakeven - 1.0).abs() <= 1e-9 && (eps1 - 1.031).abs() <= 0.002;
    outcome(
        pass,
        format!(
            "q=16 |T|=1e8: {full:.4} (want 0.105..0.110); K=16/15: {breakeven:.6} (want 1.0); eps=1: {eps1:.5} (want 1.031 +- 0.002)"
        ),
    )
}

// ---------------------------------------------------------------------------
// 3. pigeonhole sensitivity of filtration

fn criterion_3() -> Outcome {
    let start = Instant::now();
    let q = 16;
    let n = 100;
    let mut rng = ChaCha8Rng::seed_from_u64(0xC3);
    let genome: Vec<u8> = (0..1_000_000).map(|_| b"ACGT"[rng.random_range(0..4)]).collect();
    let reference = ReferenceIndex::from_records(
        &[FastaRecord {
            name: "chr".into(),
            seq: genome.clone(),
        }],
        q,
        DEFAULT_MASK_THRESHOLD,
        0,
    )
    .unwrap();
    let chrom_seq = reference.chromosomes()[0].sequence();

    let mut origins = Vec::new();
    let reads: Vec<Vec<Base>> = (0..10_000)
        .map(|_| {
            let start = rng.random_range(0..=chrom_seq.len() - n);
            origins.push(start as i64);
            let mut read = chrom_seq[start..start + n].to_vec();
            let e = rng.random_range(0..=5);
            let mut sites: Vec<usize> = (0..n).collect();
            for k in 0..e {
                let pick = rng.random_range(k..n);
                sites.swap(k, pick);
                let p = sites[k];
                read[p] = Base::from_code(read[p].code() + rng.random_range(1..4));
            }
            read
        })
        .collect();

    let text = PackedReadText::from_encoded(&reads, n, q).unwrap();
    let index = QGroupIndex::<u32>::build(&text).unwrap();
    let hits = filter_reference(reference.chromosomes()[0].positions(), &index, n, u64::MAX).unwrap();
    let mut found = vec![false; reads.len()];
    for h in hits {
        if origins[h.read as usize] == h.diagonal {
            found[h.read as usize] = true;
        }
    }
    let ok = found.iter().filter(|&&f| f).count();
    let elapsed = start.elapsed();
    outcome(
        ok == reads.len() && elapsed < Duration::from_secs(120),
        format!(
            "{ok}/{} reads produce their true (d,r) hit, {elapsed:.1?} (limit 120 s)",
            reads.len()
        ),
    )
}

// ---------------------------------------------------------------------------
// 4, 7, 8, 9. end-to-end runs on one simulated data set

struct Dataset {
    genome: Vec<FastaRecord>,
    reads_5: Vec<FastqRecord>,
    reads_20: Vec<FastqRecord>,
}

fn dataset() -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC4);
    let genome = random_genome(
        &[("chr1", 600_000), ("chr2", 400_000)],
        RepeatSpec {
            families: 30,
            unit_len: 1500,
            copies: 4,
            divergence: 0.03,
        },
        &mut rng,
    );
    let model = |error_rate| ErrorModel {
        read_len: 100,
        error_rate,
        indel_fraction: 0.2,
        max_indel: 3,
    };
    let reads_5 = simulate_reads(&genome, 1000, model(0.05), &mut rng);
    let reads_20 = simulate_reads(&genome, 1000, model(0.20), &mut rng);
    Dataset {
        genome,
        reads_5,
        reads_20,
    }
}

fn map_config(threads: usize) -> MapConfig {
    MapConfig {
        band: BandConfig::new(32, 0.60).unwrap(),
        mode: StratumMode::All,
        threads,
        seed: 7,
        ..MapConfig::default()
    }
}

fn map(reference: &ReferenceIndex, reads: &[FastqRecord], threads: usize) -> (String, Duration) {
    let start = Instant::now();
    let config = map_config(threads);
    let header = sam_header(reference, &config, "acceptance");
    let mut out = Vec::new();
    map_reads(
        reference,
        single_end(reads.iter().cloned().map(Ok)),
        &config,
        &header,
        &mut out,
    )
    .unwrap();
    (String::from_utf8(out).unwrap(), start.elapsed())
}

fn normalized(sam: &str) -> Vec<&str> {
    let mut v: Vec<&str> = sam.lines().filter(|l| !l.starts_with('@')).collect();
    v.sort_unstable();
    v
}

fn describe(e: &Evaluation) -> String {
    format!("{}/{} reads ({:.2}%)", e.recalled, e.reads, 100.0 * e.recall())
}

const THREADS: usize = 4;

fn end_to_end(results: &mut Vec<(String, Outcome)>) {
    let data = dataset();
    let ref16 = ReferenceIndex::from_records(&data.genome, 16, DEFAULT_MASK_THRESHOLD, 11).unwrap();
    let (sam_5, t_5) = map(&ref16, &data.reads_5, THREADS);
    let eval_5 = evaluate_sam(&sam_5);

    let ref8 = ReferenceIndex::from_records(&data.genome, 8, DEFAULT_MASK_THRESHOLD, 11).unwrap();
    let (sam_20, t_20) = map(&ref8, &data.reads_20, THREADS);
    let eval_20 = evaluate_sam(&sam_20);

    let pass_5 = eval_5.recall() >= 0.995;
    let pass_20 = eval_20.recall() >= 0.98;
    let pass_time = t_5 + t_20 < Duration::from_secs(300);
    results.push((
        "4 end-to-end sensitivity".into(),
        outcome(
            pass_5 && pass_20 && pass_time,
            format!(
                "5% error, q=16: {} (want >= 99.5%); 20% error, q=8: {} (want >= 98%); {:.1?} (limit 300 s)",
                describe(&eval_5),
                describe(&eval_20),
                t_5 + t_20
            ),
        ),
    ));

    // Informational: the 20% arm at q=16, where error-free 16-mers are rare.
    let (sam_20_16, _) = map(&ref16, &data.reads_20, THREADS);
    println!(
        "[INFO] 4 at 20% error with q=16: {}",
        describe(&evaluate_sam(&sam_20_16))
    );

    let gap = eval_5.rank1_precision() - eval_5.rank2plus_precision();
    results.push((
        "7 hit-rank separation".into(),
        outcome(
            gap >= 0.20,
            format!(
                "precision R=1 {:.2}% ({} records), R>=2 {:.2}% ({} records), gap {:.2} pt (want >= 20)",
                100.0 * eval_5.rank1_precision(),
                eval_5.rank1_records,
                100.0 * eval_5.rank2plus_precision(),
                eval_5.rank2plus_records,
                100.0 * gap
            ),
        ),
    ));

    let (single, _) = map(&ref16, &data.reads_5, 1);
    let same = normalized(&single) == normalized(&sam_5);
    results.push((
        "8 pipeline determinism".into(),
        outcome(
            same,
            format!(
                "1 thread vs {THREADS} threads: {} records, normalized output {}",
                normalized(&single).len(),
                if same { "identical" } else { "differs" }
            ),
        ),
    ));

    let mut problems = Vec::new();
    let mut records = 0;
    for (name, sam) in [("5%", &sam_5), ("20%", &sam_20)] {
        match check_sam(sam) {
            Ok(n) => records += n,
            Err(e) => problems.push(format!("{name}: {e}")),
        }
        let sq = sam.lines().filter(|l| l.starts_with("@SQ")).count();
        if sq != data.genome.len() {
            problems.push(format!("{name}: {sq} @SQ lines for {} sequences", data.genome.len()));
        }
    }
    results.push((
        "9 SAM validity".into(),
        outcome(
            problems.is_empty(),
            if problems.is_empty() {
                format!("{records} records checked")
            } else {
                problems.join("; ")
            },
        ),
    ));
}

// ---------------------------------------------------------------------------
// 5. banded Myers against full dynamic programming

/// Semi-global edit distance (free start and end in `window`), optionally
/// restricted to diagonals `j - i` in `lo..=hi`.
fn dp_distance(read: &[Base], window: &[Base], band: Option<(i64, i64)>) -> u32 {
    const INF: u32 = u32::MAX / 2;
    let (n, m) = (read.len(), window.len());
    let inside = |i: usize, j: usize| band.is_none_or(|(lo, hi)| (lo..=hi).contains(&(j as i64 - i as i64)));
    let mut prev: Vec<u32> = (0..=m).map(|j| if inside(0, j) { 0 } else { INF }).collect();
    let mut cur = vec![INF; m + 1];
    for i in 1..=n {
        for j in 0..=m {
            cur[j] = if !inside(i, j) {
                INF
            } else {
                let mut best = prev[j] + 1;
                if j > 0 {
                    best = best
                        .min(prev[j - 1] + (read[i - 1] != window[j - 1]) as u32)
                        .min(cur[j - 1] + 1);
                }
                best.min(INF)
            };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev.into_iter().min().unwrap_or(INF)
}

fn mutate(rng: &mut ChaCha8Rng, seq: &[Base], edits: usize) -> Vec<Base> {
    let mut out = seq.to_vec();
    for _ in 0..edits {
        if out.is_empty() {
            break;
        }
        let p = rng.random_range(0..out.len());
        match rng.random_range(0..3) {
            0 => out[p] = Base::from_code(out[p].code() + rng.random_range(1..4)),
            1 => out.insert(p, Base::from_code(rng.random_range(0..4))),
            _ => {
                out.remove(p);
            }
        }
    }
    out
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0xC5);
    let (mut confined, mut equal, mut drawn) = (0, 0, 0);
    while confined < 10_000 {
        drawn += 1;
        let w = [8u32, 16, 32, 64][rng.random_range(0..4)];
        let n = rng.random_range(20..=150);
        let template = random_bases(&mut rng, n + w as usize - 1);
        let off = rng.random_range(0..w as usize);
        let edits = rng.random_range(0..=n / 10);
        let read = mutate(&mut rng, &template[off..off + n], edits);
        if read.is_empty() {
            continue;
        }
        let m = template.len();
        let hi = m as i64 - read.len() as i64;
        let band = (hi - w as i64 + 1, hi);
        let full = dp_distance(&read, &template, None);
        // keep pairs whose optimum is reachable inside the band
        if dp_distance(&read, &template, Some(band)) != full {
            continue;
        }
        confined += 1;
        if myers_banded(&read, &template, w).map(|a| a.distance) == Some(full) {
            equal += 1;
        }
    }

    let mut conservative = 0;
    let unconstrained = 10_000;
    for _ in 0..unconstrained {
        let w = rng.random_range(2..=64u32);
        let read = {
            let k = rng.random_range(1..=80);
            random_bases(&mut rng, k)
        };
        let window = if rng.random_bool(0.5) {
            {
                let k = rng.random_range(0..=150);
                random_bases(&mut rng, k)
            }
        } else {
            let mut wdw = {
                let k = rng.random_range(0..=60);
                random_bases(&mut rng, k)
            };
            let edits = rng.random_range(0..=10);
            wdw.extend(mutate(&mut rng, &read, edits));
            wdw.extend({
                let k = rng.random_range(0..=60);
                random_bases(&mut rng, k)
            });
            wdw
        };
        let full = dp_distance(&read, &window, None);
        let banded = myers_banded(&read, &window, w).map_or(u32::MAX, |a| a.distance);
        conservative += (banded >= full) as usize;
    }
    outcome(
        equal == confined && conservative == unconstrained,
        format!(
            "{equal}/{confined} band-confined pairs equal to DP ({drawn} drawn); {conservative}/{unconstrained} unconstrained pairs with k_banded >= k_DP"
        ),
    )
}

// ---------------------------------------------------------------------------
// 6. mapping quality table

fn criterion_6() -> Outcome {
    let table = [(1u32, 1_000_000u64, 255u8), (2, 1_000_000, 60), (11, 1_000_000, 50)];
    let got: Vec<u8> = table.iter().map(|&(r, p, _)| mapping_quality(r, p)).collect();
    let want: Vec<u8> = table.iter().map(|&(_, _, m)| m).collect();
    outcome(
        got == want,
        format!("R=1 -> {}, R=2 -> {}, R=11 -> {} (|P|=1e6)", got[0], got[1], got[2]),
    )
}

fn main() {
    let mut results: Vec<(String, Outcome)> = Vec::new();
    let mut run = |name: &str, f: fn() -> Outcome| {
        let o = f();
        report(name, &o);
        results.push((name.to_string(), o));
    };
    run("1 index oracle equivalence", criterion_1);
    run("2 size formula", criterion_2);
    run("3 pigeonhole sensitivity", criterion_3);
    run("5 banded Myers vs DP", criterion_5);
    run("6 mapping quality", criterion_6);

    let mut e2e = Vec::new();
    end_to_end(&mut e2e);
    for (name, o) in &e2e {
        report(name, o);
    }
    results.extend(e2e);

    let failed: Vec<&str> = results
        .iter()
        .filter(|(_, o)| !o.pass)
        .map(|(n, _)| n.as_str())
        .collect();
    println!(
        "acceptance: {} passed, {} failed",
        results.len() - failed.len(),
        failed.len()
    );
    if !failed.is_empty() {
        std::process::exit(1);
    }
}

fn report(name: &str, o: &Outcome) {
    let tag = if o.pass { "PASS" } else { "FAIL" };
    println!("[{tag}] {name}: {}", o.detail);
}
