use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use qgmap::pipeline::{map_reads, paired_end, sam_header, single_end, MapConfig};
use qgmap::postprocess::{InsertRange, StratumMode};
use qgmap::reference::{build_reference_index, ReferenceIndex, DEFAULT_MASK_THRESHOLD};
use qgmap::validation::BandConfig;

/// Short-read mapper built on a q-group index.
#[derive(Parser)]
#[command(name = "qgmap", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a reference index from a FASTA file.
    Index(IndexArgs),
    /// Map FASTQ reads against a reference index and write SAM.
    Map(MapArgs),
}

#[derive(Args)]
struct IndexArgs {
    /// Reference FASTA, optionally gzipped.
    fasta: PathBuf,
    /// Output index file.
    #[arg(short, long)]
    output: PathBuf,
    /// q-gram length, 1 to 16.
    #[arg(short, default_value_t = 16)]
    q: usize,
    /// Drop q-grams occurring more often than this in a chromosome.
    #[arg(long, default_value_t = DEFAULT_MASK_THRESHOLD)]
    mask_threshold: u32,
    /// Seed for replacing ambiguous bases.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct MapArgs {
    /// Reference index built by `qgmap index`.
    index: PathBuf,
    /// Reads (FASTQ, optionally gzipped); first mates when paired.
    reads1: PathBuf,
    /// Second mates for paired-end mapping.
    reads2: Option<PathBuf>,
    /// SAM output file; standard output when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Read buffer capacity in bases, counting both orientations.
    #[arg(long, default_value_t = 10_000_000)]
    query_buffer_bases: u64,
    /// Minimum percent identity of a reported alignment.
    #[arg(long, default_value_t = 80.0)]
    percent_identity: f64,
    /// Report only the best stratum, or every alignment above the threshold.
    #[arg(long, default_value = "best-stratum", value_parser = ["best-stratum", "all"])]
    mode: String,
    /// Smallest accepted outer distance of a proper pair.
    #[arg(long, default_value_t = 0)]
    insert_min: u64,
    /// Largest accepted outer distance of a proper pair.
    #[arg(long, default_value_t = 1000)]
    insert_max: u64,
    /// Seed for replacing ambiguous read bases.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads; 0 uses every core.
    #[arg(long, env = "QGMAP_THREADS", default_value_t = 0)]
    threads: usize,
    /// Alignment band width in diagonals, 2 to 64.
    #[arg(long, default_value_t = 32)]
    band_width: u32,
    /// Occupancy word width of the read index.
    #[arg(long, default_value_t = 32, value_parser = parse_group_width)]
    group_width: u32,
    /// Run the pipeline stages one after another.
    #[arg(long)]
    serial: bool,
    /// Buffers held between pipeline stages.
    #[arg(long, default_value_t = 2)]
    queue_capacity: usize,
}

fn parse_group_width(s: &str) -> Result<u32, String> {
    match s {
        "32" => Ok(32),
        "64" => Ok(64),
        _ => Err("expected 32 or 64".into()),
    }
}

/// Failure carrying the process exit code.
struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 1,
        error: error.into(),
    }
}

fn data(error: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: error.into(),
    }
}

fn run_index(args: IndexArgs) -> Result<(), Failure> {
    qgmap::seq::check_q(args.q).map_err(usage)?;
    let index = build_reference_index(&args.fasta, args.q, args.mask_threshold, args.seed)
        .with_context(|| format!("cannot index {}", args.fasta.display()))
        .map_err(data)?;
    index
        .save(&args.output)
        .with_context(|| format!("cannot write {}", args.output.display()))
        .map_err(data)?;
    eprintln!(
        "indexed {} sequences, {} positions kept",
        index.chromosomes().len(),
        index.total_positions()
    );
    Ok(())
}

fn map_config(args: &MapArgs) -> Result<MapConfig, Failure> {
    if args.insert_min > args.insert_max {
        return Err(usage(anyhow::anyhow!("--insert-min exceeds --insert-max")));
    }
    Ok(MapConfig {
        query_buffer_bases: args.query_buffer_bases,
        band: BandConfig::new(args.band_width, args.percent_identity / 100.0).map_err(usage)?,
        mode: args.mode.parse::<StratumMode>().map_err(usage)?,
        insert: InsertRange {
            min: args.insert_min,
            max: args.insert_max,
        },
        seed: args.seed,
        threads: args.threads,
        group_width: args.group_width,
        serial: args.serial,
        queue_capacity: args.queue_capacity,
        ..MapConfig::default()
    })
}

fn run_map(args: MapArgs) -> Result<(), Failure> {
    let config = map_config(&args)?;
    let reference = ReferenceIndex::load(&args.index)
        .with_context(|| format!("cannot load index {}", args.index.display()))
        .map_err(data)?;
    let open = |p: &PathBuf| {
        qgmap::io::open_fastq(p)
            .with_context(|| format!("cannot open {}", p.display()))
            .map_err(data)
    };
    let source = match &args.reads2 {
        None => single_end(open(&args.reads1)?),
        Some(r2) => paired_end(open(&args.reads1)?, open(r2)?),
    };
    let command_line = std::env::args().collect::<Vec<_>>().join(" ");
    let header = sam_header(&reference, &config, &command_line);
    let mut out: Box<dyn Write> = match &args.output {
        Some(p) => Box::new(BufWriter::new(
            File::create(p)
                .with_context(|| format!("cannot create {}", p.display()))
                .map_err(data)?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    };
    let stats = map_reads(&reference, source, &config, &header, &mut out).map_err(data)?;
    eprintln!(
        "mapped {} of {} sequences, {} records",
        stats.mapped_sequences, stats.sequences, stats.records
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Index(args) => run_index(args),
        Command::Map(args) => run_map(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}
