//! FASTA and FASTQ readers. Gzip input is detected from its magic bytes.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use flate2::read::MultiGzDecoder;

use crate::error::{Error, Result};
use crate::seq::is_nucleotide;

/// Opens `path` for buffered reading, transparently decompressing gzip.
pub fn open_input(path: &Path) -> Result<Box<dyn BufRead + Send>> {
    let mut reader = BufReader::new(File::open(path)?);
    let gz = reader.fill_buf()?.starts_with(&[0x1f, 0x8b]);
    Ok(if gz {
        Box::new(BufReader::new(MultiGzDecoder::new(reader)))
    } else {
        Box::new(reader)
    })
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastaRecord {
    pub name: String,
    pub seq: Vec<u8>,
}

fn parse_error(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn header_name(header: &str) -> &str {
    header.split_whitespace().next().unwrap_or("")
}

/// Parses a whole FASTA stream. `source` names the input in error messages.
pub fn read_fasta<R: Read>(reader: R, source: &str) -> Result<Vec<FastaRecord>> {
    let reader = BufReader::new(reader);
    let mut records: Vec<FastaRecord> = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let lineno = idx + 1;
        let line = line?;
        let line = line.trim_end();
        if let Some(header) = line.strip_prefix('>') {
            let name = header_name(header);
            if name.is_empty() {
                return Err(parse_error(source, lineno, "empty sequence name"));
            }
            records.push(FastaRecord {
                name: name.to_string(),
                seq: Vec::new(),
            });
        } else if line.is_empty() || line.starts_with(';') {
            continue;
        } else {
            let Some(record) = records.last_mut() else {
                return Err(parse_error(source, lineno, "sequence data before the first '>' header"));
            };
            if let Some(bad) = line.bytes().find(|&b| !is_nucleotide(b)) {
                return Err(parse_error(
                    source,
                    lineno,
                    format!("invalid nucleotide {:?}", bad as char),
                ));
            }
            record.seq.extend_from_slice(line.as_bytes());
        }
    }
    Ok(records)
}

pub fn read_fasta_file(path: &Path) -> Result<Vec<FastaRecord>> {
    read_fasta(open_input(path)?, &path.display().to_string())
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FastqRecord {
    pub name: String,
    pub seq: Vec<u8>,
    pub qual: Vec<u8>,
}

/// Streaming four-line FASTQ parser.
pub struct FastqReader<R> {
    reader: R,
    source: String,
    line: usize,
    buf: String,
}

impl<R: BufRead> FastqReader<R> {
    pub fn new(reader: R, source: impl Into<String>) -> Self {
        FastqReader {
            reader,
            source: source.into(),
            line: 0,
            buf: String::new(),
        }
    }

    fn next_line(&mut self) -> Result<Option<&str>> {
        self.buf.clear();
        if self.reader.read_line(&mut self.buf)? == 0 {
            return Ok(None);
        }
        self.line += 1;
        Ok(Some(self.buf.trim_end_matches(['\n', '\r'])))
    }

    fn require_line(&mut self, what: &str) -> Result<String> {
        let line = self.line;
        match self.next_line()? {
            Some(l) => Ok(l.to_string()),
            None => Err(parse_error(
                &self.source,
                line + 1,
                format!("unexpected end of file, expected {what}"),
            )),
        }
    }

    fn read_record(&mut self) -> Result<Option<FastqRecord>> {
        let header = loop {
            match self.next_line()? {
                None => return Ok(None),
                Some("") => continue,
                Some(l) => break l.to_string(),
            }
        };
        let Some(header) = header.strip_prefix('@') else {
            return Err(parse_error(&self.source, self.line, "expected '@' record header"));
        };
        let name = header_name(header).to_string();
        if name.is_empty() {
            return Err(parse_error(&self.source, self.line, "empty read name"));
        }
        let seq = self.require_line("sequence")?.into_bytes();
        if let Some(bad) = seq.iter().find(|&&b| !is_nucleotide(b)) {
            return Err(parse_error(
                &self.source,
                self.line,
                format!("invalid nucleotide {:?}", *bad as char),
            ));
        }
        let plus = self.require_line("'+' separator")?;
        if !plus.starts_with('+') {
            return Err(parse_error(&self.source, self.line, "expected '+' separator"));
        }
        let qual = self.require_line("quality string")?.into_bytes();
        if qual.len() != seq.len() {
            return Err(parse_error(
                &self.source,
                self.line,
                format!(
                    "quality length {} differs from sequence length {}",
                    qual.len(),
                    seq.len()
                ),
            ));
        }
        Ok(Some(FastqRecord { name, seq, qual }))
    }
}

impl<R: BufRead> Iterator for FastqReader<R> {
    type Item = Result<FastqRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        self.read_record().transpose()
    }
}

pub fn open_fastq(path: &Path) -> Result<FastqReader<Box<dyn BufRead + Send>>> {
    Ok(FastqReader::new(open_input(path)?, path.display().to_string()))
}
