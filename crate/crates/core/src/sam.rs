//! SAM text output and a syntactic checker for it.

use std::fmt;
use std::io::Write;

use crate::error::Result;

pub mod flags {
    pub const PAIRED: u16 = 0x1;
    pub const PROPER_PAIR: u16 = 0x2;
    pub const UNMAPPED: u16 = 0x4;
    pub const MATE_UNMAPPED: u16 = 0x8;
    pub const REVERSE: u16 = 0x10;
    pub const MATE_REVERSE: u16 = 0x20;
    pub const FIRST: u16 = 0x40;
    pub const LAST: u16 = 0x80;
    pub const SECONDARY: u16 = 0x100;
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamHeader {
    /// `(name, length)` for each reference sequence, in index order.
    pub references: Vec<(String, u64)>,
    pub program_version: String,
    pub command_line: String,
    pub read_seed: u64,
    pub reference_seed: u64,
}

impl SamHeader {
    pub fn write_to<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "@HD\tVN:1.6\tSO:unsorted")?;
        for (name, len) in &self.references {
            writeln!(out, "@SQ\tSN:{name}\tLN:{len}")?;
        }
        writeln!(
            out,
            "@PG\tID:qgmap\tPN:qgmap\tVN:{}\tCL:{}",
            self.program_version,
            self.command_line.replace(['\t', '\n'], " ")
        )?;
        writeln!(
            out,
            "@CO\tread-seed:{} reference-seed:{}",
            self.read_seed, self.reference_seed
        )?;
        Ok(())
    }
}

/// One alignment line. `pos` and `pnext` are 1-based, 0 when unavailable.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SamRecord {
    pub qname: String,
    pub flag: u16,
    pub rname: Option<String>,
    pub pos: u64,
    pub mapq: u8,
    pub cigar: Option<String>,
    /// `Some("=")` when the mate is on the same reference.
    pub rnext: Option<String>,
    pub pnext: u64,
    pub tlen: i64,
    pub seq: Vec<u8>,
    pub qual: Vec<u8>,
    /// Edit distance, written as `NM:i`.
    pub nm: Option<u32>,
    /// Hit-rank, written as `XR:i`.
    pub hit_rank: Option<u32>,
}

fn star(s: &Option<String>) -> &str {
    s.as_deref().unwrap_or("*")
}

fn bytes_or_star(b: &[u8]) -> &str {
    if b.is_empty() {
        "*"
    } else {
        std::str::from_utf8(b).unwrap_or("*")
    }
}

impl fmt::Display for SamRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.qname,
            self.flag,
            star(&self.rname),
            self.pos,
            self.mapq,
            star(&self.cigar),
            star(&self.rnext),
            self.pnext,
            self.tlen,
            bytes_or_star(&self.seq),
            bytes_or_star(&self.qual),
        )?;
        if let Some(nm) = self.nm {
            write!(f, "\tNM:i:{nm}")?;
        }
        if let Some(r) = self.hit_rank {
            write!(f, "\tXR:i:{r}")?;
        }
        Ok(())
    }
}

/// Checks SAM text for the mandatory fields, CIGAR/SEQ length agreement
/// and that every mapped RNAME has an `@SQ` line. Returns the number of
/// alignment lines.
pub fn check_sam(text: &str) -> std::result::Result<usize, String> {
    let mut refs = std::collections::HashMap::new();
    let mut records = 0;
    let mut in_header = true;
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        let err = |msg: String| format!("line {lineno}: {msg}");
        if line.starts_with('@') {
            if !in_header {
                return Err(err("header line after alignment lines".into()));
            }
            let tag = &line[..line.len().min(3)];
            if tag.len() != 3 || !line[3..].is_empty() && !line[3..].starts_with('\t') {
                return Err(err("malformed header line".into()));
            }
            if tag == "@SQ" {
                let field = |key: &str| line.split('\t').find_map(|f| f.strip_prefix(key));
                let (Some(name), Some(len)) = (field("SN:"), field("LN:")) else {
                    return Err(err("@SQ without SN or LN".into()));
                };
                let len: u64 = len.parse().map_err(|_| err(format!("bad LN {len:?}")))?;
                if refs.insert(name.to_string(), len).is_some() {
                    return Err(err(format!("duplicate @SQ {name}")));
                }
            }
            continue;
        }
        in_header = false;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() < 11 {
            return Err(err(format!("{} fields, expected at least 11", fields.len())));
        }
        let flag: u16 = fields[1]
            .parse()
            .map_err(|_| err(format!("bad FLAG {:?}", fields[1])))?;
        let pos: u64 = fields[3].parse().map_err(|_| err(format!("bad POS {:?}", fields[3])))?;
        fields[4]
            .parse::<u8>()
            .map_err(|_| err(format!("bad MAPQ {:?}", fields[4])))?;
        fields[7]
            .parse::<u64>()
            .map_err(|_| err(format!("bad PNEXT {:?}", fields[7])))?;
        fields[8]
            .parse::<i64>()
            .map_err(|_| err(format!("bad TLEN {:?}", fields[8])))?;
        let (rname, cigar, seq, qual) = (fields[2], fields[5], fields[9], fields[10]);
        if rname != "*" {
            let Some(&len) = refs.get(rname) else {
                return Err(err(format!("RNAME {rname} has no @SQ line")));
            };
            if pos == 0 || pos > len {
                return Err(err(format!("POS {pos} outside 1..={len}")));
            }
        }
        if flag & flags::UNMAPPED == 0 && (rname == "*" || cigar == "*") {
            return Err(err("mapped record without RNAME or CIGAR".into()));
        }
        if seq != "*" && !seq.bytes().all(|b| b.is_ascii_alphabetic() || b == b'=' || b == b'.') {
            return Err(err("SEQ has invalid characters".into()));
        }
        if qual != "*" && seq != "*" && qual.len() != seq.len() {
            return Err(err("QUAL and SEQ lengths differ".into()));
        }
        if cigar != "*" && seq != "*" {
            let query_len = cigar_query_len(cigar).ok_or_else(|| err(format!("bad CIGAR {cigar:?}")))?;
            if query_len != seq.len() as u64 {
                return Err(err(format!("CIGAR consumes {query_len} bases, SEQ has {}", seq.len())));
            }
        }
        records += 1;
    }
    Ok(records)
}

fn cigar_query_len(cigar: &str) -> Option<u64> {
    let mut total = 0;
    let mut n: Option<u64> = None;
    for c in cigar.chars() {
        if let Some(d) = c.to_digit(10) {
            n = Some(n.unwrap_or(0) * 10 + d as u64);
        } else {
            let len = n.take()?;
            match c {
                'M' | 'I' | 'S' | '=' | 'X' => total += len,
                'D' | 'N' | 'H' | 'P' => {}
                _ => return None,
            }
        }
    }
    n.is_none().then_some(total)
}
