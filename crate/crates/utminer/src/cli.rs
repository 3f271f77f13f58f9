//! Command line surface: `mine`, `verify`, `sweep`, and `gen`.
//!
//! Exit codes: 0 success (and verified), 1 usage error, 2 verification
//! mismatch, 3 I/O or format error.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use clap::{Args, Parser, Subcommand, ValueEnum};
use thiserror::Error;

use crate::dataset::{
    self, GeneratorConfig, ItemTable, Itemset, TransactionDatabase, Utility,
};
use crate::miner;
use crate::oracle;
use crate::preprocess;
use crate::utree;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_MISMATCH: i32 = 2;
pub const EXIT_IO: i32 = 3;

pub const STATS_CSV_HEADER: &str = "algorithm,theta,num_itemsets,candidates,peak_local_nodes,\
num_transactions,num_items,avg_transaction_len,total_utility,elapsed_ms";

const STATS_HELP: &str = "Write run statistics as CSV (header plus one row per run).\n\
Columns: algorithm,theta,num_itemsets,candidates,peak_local_nodes,num_transactions,\
num_items,avg_transaction_len,total_utility,elapsed_ms.\n\
elapsed_ms stays empty unless --timings is given, so identical runs produce \
byte-identical files; wall-clock timing is always printed to stderr.";

#[derive(Parser, Debug)]
#[command(
    name = "utminer",
    version,
    about = "High-utility itemset mining over a prefix-shared utility tree",
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Mine high-utility itemsets from a database file
    Mine(MineArgs),
    /// Run the tree miner and the brute-force oracle, compare their output
    Verify(VerifyArgs),
    /// Mine a descending threshold list, one stats row per threshold
    Sweep(SweepArgs),
    /// Generate a seeded synthetic database
    Gen(GenArgs),
}

#[derive(Args, Debug)]
#[group(required = true, multiple = false)]
pub struct ThresholdArgs {
    /// Absolute minimum utility threshold (at least 1)
    #[arg(long, value_name = "INT")]
    pub min_util: Option<Utility>,
    /// Threshold as a percentage of total database utility (0 to 100)
    #[arg(long, value_name = "PCT")]
    pub min_util_pct: Option<f64>,
}

impl ThresholdArgs {
    pub fn resolve(&self, db: &TransactionDatabase) -> Result<Utility, CliError> {
        match (self.min_util, self.min_util_pct) {
            (Some(0), _) => Err(CliError::Usage(
                "--min-util must be at least 1".to_string(),
            )),
            (Some(theta), None) => Ok(theta),
            (None, Some(pct)) => preprocess::resolve_threshold(db, pct)
                .map_err(|e| CliError::Usage(e.to_string())),
            _ => unreachable!("clap enforces exactly one threshold flag"),
        }
    }
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
pub enum Algorithm {
    /// One-phase mining over the utility tree
    Utminer,
    /// Exhaustive subset enumeration; small databases only
    Bruteforce,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Utminer => "utminer",
            Algorithm::Bruteforce => "bruteforce",
        }
    }
}

#[derive(Args, Debug)]
pub struct MineArgs {
    /// Input database file (`items:TU:utilities` lines)
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Mining algorithm
    #[arg(long, value_enum, default_value_t = Algorithm::Utminer)]
    pub algo: Algorithm,
    /// Results file, one `<labels> #UTIL: <u>` line per itemset
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
    /// Stats CSV file
    #[arg(long, value_name = "FILE", long_help = STATS_HELP)]
    pub stats: Option<PathBuf>,
    /// Record elapsed milliseconds in the stats row
    #[arg(long)]
    pub timings: bool,
    /// Distinct-item cap for the brute-force algorithm
    #[arg(long, value_name = "N", default_value_t = oracle::DEFAULT_MAX_ITEMS)]
    pub max_oracle_items: usize,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    /// Input database file
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub threshold: ThresholdArgs,
    /// Distinct-item cap for the brute-force oracle
    #[arg(long, value_name = "N", default_value_t = oracle::DEFAULT_MAX_ITEMS)]
    pub max_oracle_items: usize,
}

#[derive(Args, Debug)]
pub struct SweepArgs {
    /// Input database file
    #[arg(long, value_name = "FILE")]
    pub input: PathBuf,
    /// Comma-separated absolute thresholds, non-increasing
    #[arg(long, value_name = "LIST", value_delimiter = ',', required = true)]
    pub thresholds: Vec<Utility>,
    /// Mining algorithm
    #[arg(long, value_enum, default_value_t = Algorithm::Utminer)]
    pub algo: Algorithm,
    /// Stats CSV file; stdout when omitted
    #[arg(long, value_name = "FILE", long_help = STATS_HELP)]
    pub stats: Option<PathBuf>,
    /// Record elapsed milliseconds in the stats rows
    #[arg(long)]
    pub timings: bool,
    /// Distinct-item cap for the brute-force algorithm
    #[arg(long, value_name = "N", default_value_t = oracle::DEFAULT_MAX_ITEMS)]
    pub max_oracle_items: usize,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Number of transactions
    #[arg(long, value_name = "N")]
    pub tx: usize,
    /// Number of distinct items
    #[arg(long, value_name = "N")]
    pub items: u32,
    /// Average transaction length
    #[arg(long, value_name = "N")]
    pub avg_len: u32,
    /// RNG seed
    #[arg(long, value_name = "SEED", default_value_t = 0)]
    pub seed: u64,
    /// Mean of the per-item external-utility Gaussian
    #[arg(long, value_name = "REAL", default_value_t = 5.0)]
    pub ext_mean: f64,
    /// Standard deviation of that Gaussian
    #[arg(long, value_name = "REAL", default_value_t = 2.0)]
    pub ext_sd: f64,
    /// Output database file
    #[arg(long, value_name = "FILE")]
    pub output: PathBuf,
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: dataset::DatasetError,
    },
    #[error("{0}")]
    Oracle(#[from] oracle::OracleError),
    #[error("{0}")]
    Generator(#[from] dataset::GeneratorError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Oracle(_) | CliError::Generator(_) => EXIT_USAGE,
            CliError::Io { .. } | CliError::Format { .. } => EXIT_IO,
        }
    }
}

/// One stats CSV row. `elapsed` is None unless timings were requested;
/// the column is then left empty so identical runs serialize identically.
#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub algorithm: &'static str,
    pub theta: Utility,
    pub num_itemsets: usize,
    pub candidates: u64,
    pub peak_local_nodes: u64,
    pub num_transactions: usize,
    pub num_items: usize,
    pub avg_transaction_len: f64,
    pub total_utility: Utility,
    pub elapsed: Option<Duration>,
}

impl RunStats {
    pub fn csv_row(&self) -> String {
        let elapsed = self
            .elapsed
            .map(|d| d.as_millis().to_string())
            .unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{:.3},{},{}",
            self.algorithm,
            self.theta,
            self.num_itemsets,
            self.candidates,
            self.peak_local_nodes,
            self.num_transactions,
            self.num_items,
            self.avg_transaction_len,
            self.total_utility,
            elapsed
        )
    }
}

pub fn run(cli: Cli) -> i32 {
    let outcome = match cli.command {
        Command::Mine(args) => cmd_mine(&args),
        Command::Verify(args) => cmd_verify(&args),
        Command::Sweep(args) => cmd_sweep(&args),
        Command::Gen(args) => cmd_gen(&args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            err.exit_code()
        }
    }
}

struct MineOutcome {
    itemsets: BTreeMap<Itemset, Utility>,
    candidates: u64,
    peak_local_nodes: u64,
    runtime: Duration,
}

fn run_algorithm(
    db: &TransactionDatabase,
    theta: Utility,
    algo: Algorithm,
    max_oracle_items: usize,
) -> Result<MineOutcome, CliError> {
    match algo {
        Algorithm::Utminer => {
            let twu = preprocess::compute_twu(db);
            let rdb = preprocess::prune_and_reorganize(db, &twu, theta);
            let mut tree = utree::build_tree(&rdb);
            let result = miner::mine(&mut tree, &rdb, theta);
            Ok(MineOutcome {
                itemsets: result.itemsets,
                candidates: result.stats.candidates,
                peak_local_nodes: result.stats.peak_local_nodes,
                runtime: result.stats.runtime,
            })
        }
        Algorithm::Bruteforce => {
            let start = Instant::now();
            let result = oracle::mine_bruteforce(db, theta, max_oracle_items, true)?;
            let promising = oracle::promising_universe(db, theta).len() as u32;
            let candidates = if promising >= 64 {
                u64::MAX
            } else {
                (1u64 << promising) - 1
            };
            Ok(MineOutcome {
                itemsets: result.itemsets,
                candidates,
                peak_local_nodes: 0,
                runtime: start.elapsed(),
            })
        }
    }
}

fn load(path: &Path) -> Result<TransactionDatabase, CliError> {
    let file = File::open(path).map_err(|source| CliError::Io {
        path: path.to_owned(),
        source,
    })?;
    dataset::load_database(BufReader::new(file)).map_err(|source| match source {
        dataset::DatasetError::Io(source) => CliError::Io {
            path: path.to_owned(),
            source,
        },
        other => CliError::Format {
            path: path.to_owned(),
            source: other,
        },
    })
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|source| CliError::Io {
            path: path.to_owned(),
            source,
        })
}

fn io_err(path: &Path, source: io::Error) -> CliError {
    CliError::Io {
        path: path.to_owned(),
        source,
    }
}

fn make_stats(
    db: &TransactionDatabase,
    theta: Utility,
    algo: Algorithm,
    outcome: &MineOutcome,
    timings: bool,
) -> RunStats {
    RunStats {
        algorithm: algo.name(),
        theta,
        num_itemsets: outcome.itemsets.len(),
        candidates: outcome.candidates,
        peak_local_nodes: outcome.peak_local_nodes,
        num_transactions: db.num_transactions(),
        num_items: db.num_items(),
        avg_transaction_len: db.avg_transaction_len(),
        total_utility: db.total_utility,
        elapsed: timings.then_some(outcome.runtime),
    }
}

fn write_stats_file(path: &Path, rows: &[RunStats]) -> Result<(), CliError> {
    let mut out = create(path)?;
    writeln!(out, "{STATS_CSV_HEADER}").map_err(|e| io_err(path, e))?;
    for row in rows {
        writeln!(out, "{}", row.csv_row()).map_err(|e| io_err(path, e))?;
    }
    out.flush().map_err(|e| io_err(path, e))
}

fn cmd_mine(args: &MineArgs) -> Result<i32, CliError> {
    let db = load(&args.input)?;
    let theta = args.threshold.resolve(&db)?;
    let outcome = run_algorithm(&db, theta, args.algo, args.max_oracle_items)?;
    let num_itemsets = outcome.itemsets.len();

    let stats = make_stats(&db, theta, args.algo, &outcome, args.timings);
    let mut out = create(&args.output)?;
    dataset::write_results(outcome.itemsets, &db.items, &mut out)
        .map_err(|e| io_err(&args.output, e))?;
    out.flush().map_err(|e| io_err(&args.output, e))?;
    if let Some(path) = &args.stats {
        write_stats_file(path, std::slice::from_ref(&stats))?;
    }
    eprintln!(
        "{}: {} itemsets at theta {} ({} candidates, peak {} local nodes, {:?})",
        stats.algorithm, num_itemsets, theta, stats.candidates, stats.peak_local_nodes,
        outcome.runtime
    );
    Ok(EXIT_OK)
}

fn render(set: &Itemset, items: &ItemTable) -> String {
    let mut labels: Vec<&str> = set.items().iter().map(|&i| items.label(i)).collect();
    labels.sort_unstable();
    labels.join(" ")
}

fn cmd_verify(args: &VerifyArgs) -> Result<i32, CliError> {
    let db = load(&args.input)?;
    let theta = args.threshold.resolve(&db)?;
    let mined = run_algorithm(&db, theta, Algorithm::Utminer, args.max_oracle_items)?.itemsets;
    let expected = oracle::mine_bruteforce(&db, theta, args.max_oracle_items, true)?.itemsets;

    if mined == expected {
        println!("verified: {} itemsets at theta {}", mined.len(), theta);
        return Ok(EXIT_OK);
    }

    let mut discrepancies = Vec::new();
    for (set, util) in &expected {
        match mined.get(set) {
            None => discrepancies.push(format!(
                "missing: {} (expected utility {util})",
                render(set, &db.items)
            )),
            Some(got) if got != util => discrepancies.push(format!(
                "utility mismatch: {} (got {got}, expected {util})",
                render(set, &db.items)
            )),
            Some(_) => {}
        }
    }
    for set in mined.keys() {
        if !expected.contains_key(set) {
            discrepancies.push(format!(
                "spurious: {} (utility {})",
                render(set, &db.items),
                mined[set]
            ));
        }
    }
    println!(
        "verification failed at theta {}: {} discrepancies",
        theta,
        discrepancies.len()
    );
    for line in discrepancies.iter().take(10) {
        println!("  {line}");
    }
    Ok(EXIT_MISMATCH)
}

fn cmd_sweep(args: &SweepArgs) -> Result<i32, CliError> {
    if args.thresholds.is_empty() {
        return Err(CliError::Usage("no thresholds given".to_string()));
    }
    if args.thresholds.contains(&0) {
        return Err(CliError::Usage("thresholds must be at least 1".to_string()));
    }
    if args.thresholds.windows(2).any(|w| w[0] < w[1]) {
        return Err(CliError::Usage(
            "thresholds must be non-increasing".to_string(),
        ));
    }
    let db = load(&args.input)?;
    let mut rows = Vec::with_capacity(args.thresholds.len());
    for &theta in &args.thresholds {
        // Pruning depends on theta, so every run rebuilds from scratch.
        let outcome = run_algorithm(&db, theta, args.algo, args.max_oracle_items)?;
        eprintln!(
            "theta {}: {} itemsets, {} candidates, {:?}",
            theta,
            outcome.itemsets.len(),
            outcome.candidates,
            outcome.runtime
        );
        rows.push(make_stats(&db, theta, args.algo, &outcome, args.timings));
    }
    match &args.stats {
        Some(path) => write_stats_file(path, &rows)?,
        None => {
            println!("{STATS_CSV_HEADER}");
            for row in &rows {
                println!("{}", row.csv_row());
            }
        }
    }
    Ok(EXIT_OK)
}

fn cmd_gen(args: &GenArgs) -> Result<i32, CliError> {
    let cfg = GeneratorConfig {
        num_tx: args.tx,
        num_items: args.items,
        avg_len: args.avg_len,
        seed: args.seed,
        ext_mean: args.ext_mean,
        ext_sd: args.ext_sd,
    };
    let db = dataset::generate_synthetic(&cfg)?;
    let mut out = create(&args.output)?;
    dataset::write_database(&db, &mut out).map_err(|e| io_err(&args.output, e))?;
    out.flush().map_err(|e| io_err(&args.output, e))?;
    eprintln!(
        "generated {} transactions over {} items (total utility {})",
        db.num_transactions(),
        db.num_items(),
        db.total_utility
    );
    Ok(EXIT_OK)
}
