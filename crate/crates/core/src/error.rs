use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid nucleotide symbol {0:?}")]
    InvalidSymbol(char),

    #[error("read {index} has length {len}, longer than the stride {stride}")]
    ReadTooLong { index: usize, len: usize, stride: usize },

    #[error("q-gram length {0} is outside the supported range 1..=16")]
    InvalidQ(usize),

    #[error("text of {0} positions exceeds 32-bit addressing")]
    TextTooLarge(usize),

    #[error("prefix sum overflows the index word")]
    ScanOverflow,

    #[error("scatter overflowed the capacity of interval {0}")]
    ScatterOverflow(usize),

    #[error("scatter offsets are not non-decreasing")]
    ScatterOffsets,

    #[error("filtration produced {hits} hits, above the limit of {limit}; use a smaller read buffer")]
    HitOverflow { hits: u64, limit: u64 },

    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },

    #[error("reference contains no sequence")]
    EmptyReference,

    #[error("not a reference index file (bad magic bytes)")]
    BadMagic,

    #[error("reference index format version {found} is not supported (expected {expected}); rebuild the index")]
    UnsupportedVersion { found: u32, expected: u32 },

    #[error("corrupt reference index: {0}")]
    CorruptIndex(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
