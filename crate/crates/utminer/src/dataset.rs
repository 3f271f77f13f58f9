//! Data model, text-format parsing/serialization, and seeded synthetic
//! database generation.
//!
//! The on-disk format is the de-facto utility-transaction text format:
//! one transaction per line, `<labels>:<TU>:<utilities>`, labels and
//! utilities single-space separated, TU equal to the sum of the line's
//! utilities. Results are written as `<labels> #UTIL: <u>` lines.

use std::collections::HashMap;
use std::io::{self, BufRead, Write};

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

/// Dense internal item id, assigned in first-appearance order.
pub type ItemId = u32;
/// Transaction id, assigned in line order starting at 0.
pub type Tid = u32;
/// Utility amount. All utility arithmetic is exact 64-bit integer.
pub type Utility = u64;

/// Bijective mapping between external item labels and dense internal ids.
#[derive(Debug, Clone, Default)]
pub struct ItemTable {
    labels: Vec<String>,
    ids: HashMap<String, ItemId>,
}

impl ItemTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Returns the id for `label`, interning it if unseen.
    pub fn intern(&mut self, label: &str) -> ItemId {
        if let Some(&id) = self.ids.get(label) {
            return id;
        }
        let id = self.labels.len() as ItemId;
        self.labels.push(label.to_string());
        self.ids.insert(label.to_string(), id);
        id
    }

    pub fn id(&self, label: &str) -> Option<ItemId> {
        self.ids.get(label).copied()
    }

    /// Panics if `id` was never interned.
    pub fn label(&self, id: ItemId) -> &str {
        &self.labels[id as usize]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

impl PartialEq for ItemTable {
    fn eq(&self, other: &Self) -> bool {
        self.labels == other.labels
    }
}

impl Eq for ItemTable {}

/// One transaction: distinct items with positive utilities, in input order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transaction {
    pub tid: Tid,
    pub entries: Vec<(ItemId, Utility)>,
}

impl Transaction {
    /// Transaction utility: sum of all entry utilities.
    pub fn tu(&self) -> Utility {
        self.entries.iter().map(|&(_, u)| u).sum()
    }

    pub fn utility_of(&self, item: ItemId) -> Option<Utility> {
        self.entries
            .iter()
            .find(|&&(i, _)| i == item)
            .map(|&(_, u)| u)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransactionDatabase {
    pub items: ItemTable,
    pub transactions: Vec<Transaction>,
    pub total_utility: Utility,
}

impl TransactionDatabase {
    pub fn new() -> Self {
        Self::default()
    }

    /// Appends a transaction, assigning the next dense tid.
    pub fn add_transaction(&mut self, entries: Vec<(ItemId, Utility)>) -> Tid {
        let tid = self.transactions.len() as Tid;
        self.total_utility += entries.iter().map(|&(_, u)| u).sum::<Utility>();
        self.transactions.push(Transaction { tid, entries });
        tid
    }

    pub fn num_transactions(&self) -> usize {
        self.transactions.len()
    }

    pub fn num_items(&self) -> usize {
        self.items.len()
    }

    pub fn avg_transaction_len(&self) -> f64 {
        if self.transactions.is_empty() {
            return 0.0;
        }
        let entries: usize = self.transactions.iter().map(|t| t.entries.len()).sum();
        entries as f64 / self.transactions.len() as f64
    }
}

/// Sorted, duplicate-free set of item ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Itemset(Vec<ItemId>);

impl Itemset {
    pub fn new(mut items: Vec<ItemId>) -> Self {
        items.sort_unstable();
        items.dedup();
        Itemset(items)
    }

    pub fn items(&self) -> &[ItemId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, item: ItemId) -> bool {
        self.0.binary_search(&item).is_ok()
    }
}

impl FromIterator<ItemId> for Itemset {
    fn from_iter<T: IntoIterator<Item = ItemId>>(iter: T) -> Self {
        Itemset::new(iter.into_iter().collect())
    }
}

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("line {line}: expected 3 colon-separated fields, found {found}")]
    FieldCount { line: usize, found: usize },
    #[error("line {line}: {count_items} items but {count_utils} utilities")]
    CountMismatch {
        line: usize,
        count_items: usize,
        count_utils: usize,
    },
    #[error("line {line}: invalid integer token `{token}`")]
    BadToken { line: usize, token: String },
    #[error("line {line}: utility {value} for item `{label}` is below 1")]
    UtilityBelowOne {
        line: usize,
        label: String,
        value: u64,
    },
    #[error("line {line}: duplicate item `{label}` within transaction")]
    DuplicateItem { line: usize, label: String },
    #[error("line {line}: declared TU {declared} but utilities sum to {computed}")]
    TuMismatch {
        line: usize,
        declared: Utility,
        computed: Utility,
    },
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

/// Parses a database from the text format. Tids follow line order; blank
/// lines are skipped but still counted for error reporting (1-based).
pub fn load_database<R: BufRead>(reader: R) -> Result<TransactionDatabase, DatasetError> {
    let mut db = TransactionDatabase::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(':').collect();
        if fields.len() != 3 {
            return Err(DatasetError::FieldCount {
                line: lineno,
                found: fields.len(),
            });
        }
        let labels: Vec<&str> = fields[0].split_whitespace().collect();
        let declared: Utility = fields[1].trim().parse().map_err(|_| DatasetError::BadToken {
            line: lineno,
            token: fields[1].trim().to_string(),
        })?;
        let utils: Vec<&str> = fields[2].split_whitespace().collect();
        if labels.len() != utils.len() {
            return Err(DatasetError::CountMismatch {
                line: lineno,
                count_items: labels.len(),
                count_utils: utils.len(),
            });
        }
        let mut entries = Vec::with_capacity(labels.len());
        let mut seen: Vec<ItemId> = Vec::with_capacity(labels.len());
        let mut computed: Utility = 0;
        for (label, tok) in labels.iter().zip(&utils) {
            let value: Utility = tok.parse().map_err(|_| DatasetError::BadToken {
                line: lineno,
                token: tok.to_string(),
            })?;
            if value < 1 {
                return Err(DatasetError::UtilityBelowOne {
                    line: lineno,
                    label: label.to_string(),
                    value,
                });
            }
            let id = db.items.intern(label);
            if seen.contains(&id) {
                return Err(DatasetError::DuplicateItem {
                    line: lineno,
                    label: label.to_string(),
                });
            }
            seen.push(id);
            computed += value;
            entries.push((id, value));
        }
        if computed != declared {
            return Err(DatasetError::TuMismatch {
                line: lineno,
                declared,
                computed,
            });
        }
        db.add_transaction(entries);
    }
    Ok(db)
}

/// Serializes in the input text format; inverse of `load_database`.
pub fn write_database<W: Write>(db: &TransactionDatabase, mut writer: W) -> io::Result<()> {
    for tx in &db.transactions {
        let labels: Vec<&str> = tx.entries.iter().map(|&(i, _)| db.items.label(i)).collect();
        let utils: Vec<String> = tx.entries.iter().map(|&(_, u)| u.to_string()).collect();
        writeln!(
            writer,
            "{}:{}:{}",
            labels.join(" "),
            tx.tu(),
            utils.join(" ")
        )?;
    }
    Ok(())
}

/// Writes `<labels> #UTIL: <u>` lines, labels sorted within each itemset
/// and lines sorted lexicographically by label sequence.
pub fn write_results<W: Write, I>(results: I, items: &ItemTable, mut writer: W) -> io::Result<()>
where
    I: IntoIterator<Item = (Itemset, Utility)>,
{
    let mut lines: Vec<(Vec<&str>, Utility)> = results
        .into_iter()
        .map(|(set, util)| {
            let mut labels: Vec<&str> = set.items().iter().map(|&i| items.label(i)).collect();
            labels.sort_unstable();
            (labels, util)
        })
        .collect();
    lines.sort();
    for (labels, util) in lines {
        writeln!(writer, "{} #UTIL: {}", labels.join(" "), util)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeneratorConfig {
    pub num_tx: usize,
    pub num_items: u32,
    pub avg_len: u32,
    pub seed: u64,
    /// Mean of the Gaussian used for fixed per-item external utilities.
    pub ext_mean: f64,
    /// Standard deviation of that Gaussian.
    pub ext_sd: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum GeneratorError {
    #[error("num_items must be at least 1")]
    NoItems,
    #[error("avg_len {avg_len} not in 1..={num_items}")]
    BadAvgLen { avg_len: u32, num_items: u32 },
    #[error("external-utility Gaussian needs finite mean and finite sd >= 0 (got mean {mean}, sd {sd})")]
    BadGaussian { mean: f64, sd: f64 },
}

/// Generates a synthetic database, fully determined by the config.
///
/// Draw order is part of the determinism contract: first one external
/// utility per item (`max(1, round(|N(mean, sd)|))`, items in id order),
/// then per transaction a length uniform in `[1, 2*avg_len - 1]` clamped
/// to `num_items`, an item sample without replacement, and one internal
/// utility uniform in `[1, 10]` per chosen item in ascending item order.
/// Entry utility = internal * external. Labels are `"1"..="num_items"`.
pub fn generate_synthetic(cfg: &GeneratorConfig) -> Result<TransactionDatabase, GeneratorError> {
    if cfg.num_items < 1 {
        return Err(GeneratorError::NoItems);
    }
    if cfg.avg_len < 1 || cfg.avg_len > cfg.num_items {
        return Err(GeneratorError::BadAvgLen {
            avg_len: cfg.avg_len,
            num_items: cfg.num_items,
        });
    }
    if !cfg.ext_mean.is_finite() || !cfg.ext_sd.is_finite() || cfg.ext_sd < 0.0 {
        return Err(GeneratorError::BadGaussian {
            mean: cfg.ext_mean,
            sd: cfg.ext_sd,
        });
    }
    let normal = Normal::new(cfg.ext_mean, cfg.ext_sd).map_err(|_| GeneratorError::BadGaussian {
        mean: cfg.ext_mean,
        sd: cfg.ext_sd,
    })?;

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let externals: Vec<Utility> = (0..cfg.num_items)
        .map(|_| {
            let draw: f64 = normal.sample(&mut rng);
            let rounded = draw.abs().round();
            if rounded < 1.0 {
                1
            } else {
                rounded as Utility
            }
        })
        .collect();

    let mut db = TransactionDatabase::new();
    let max_len = (2 * cfg.avg_len - 1).min(cfg.num_items) as usize;
    for _ in 0..cfg.num_tx {
        let len = rng.random_range(1..=max_len);
        let mut chosen = rand::seq::index::sample(&mut rng, cfg.num_items as usize, len).into_vec();
        chosen.sort_unstable();
        let entries: Vec<(ItemId, Utility)> = chosen
            .into_iter()
            .map(|idx| {
                let internal: Utility = rng.random_range(1..=10);
                let label = (idx + 1).to_string();
                let id = db.items.intern(&label);
                (id, internal * externals[idx])
            })
            .collect();
        db.add_transaction(entries);
    }
    Ok(db)
}

/// The worked-example database shared by tests across modules.
#[cfg(test)]
pub(crate) const EXAMPLE_DB: &str = include_str!("../testdata/example_db.txt");

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn example() -> TransactionDatabase {
        load_database(Cursor::new(EXAMPLE_DB)).unwrap()
    }

    #[test]
    fn parses_well_formed_line() {
        let db = load_database(Cursor::new("3 5:33:30 3\n")).unwrap();
        assert_eq!(db.num_transactions(), 1);
        let tx = &db.transactions[0];
        assert_eq!(tx.tu(), 33);
        assert_eq!(tx.utility_of(db.items.id("3").unwrap()), Some(30));
        assert_eq!(tx.utility_of(db.items.id("5").unwrap()), Some(3));
    }

    #[test]
    fn parses_example_database() {
        let db = example();
        assert_eq!(db.num_transactions(), 10);
        assert_eq!(db.total_utility, 159);
        let t1 = &db.transactions[0];
        assert_eq!(t1.tu(), 18);
        assert_eq!(t1.utility_of(db.items.id("F").unwrap()), Some(13));
        // Internal ids follow first appearance: C before B, B before A.
        assert!(db.items.id("C").unwrap() < db.items.id("B").unwrap());
        assert!(db.items.id("B").unwrap() < db.items.id("A").unwrap());
    }

    #[test]
    fn empty_input_gives_empty_database() {
        let db = load_database(Cursor::new("")).unwrap();
        assert_eq!(db.num_transactions(), 0);
        assert_eq!(db.total_utility, 0);
    }

    #[test]
    fn blank_lines_are_skipped_but_counted() {
        let err = load_database(Cursor::new("a:1:1\n\nb:2:1\n")).unwrap_err();
        assert!(matches!(err, DatasetError::TuMismatch { line: 3, .. }));
        let db = load_database(Cursor::new("a:1:1\n\nb:2:2\n")).unwrap();
        assert_eq!(db.num_transactions(), 2);
    }

    #[test]
    fn rejects_wrong_field_count() {
        let err = load_database(Cursor::new("a b:3\n")).unwrap_err();
        assert!(matches!(err, DatasetError::FieldCount { line: 1, found: 2 }));
    }

    #[test]
    fn rejects_item_utility_count_mismatch() {
        let err = load_database(Cursor::new("a b:3:3\n")).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::CountMismatch {
                line: 1,
                count_items: 2,
                count_utils: 1
            }
        ));
    }

    #[test]
    fn rejects_bad_tokens() {
        let err = load_database(Cursor::new("a:x:1\n")).unwrap_err();
        assert!(matches!(err, DatasetError::BadToken { line: 1, .. }));
        let err = load_database(Cursor::new("a:1:y\n")).unwrap_err();
        assert!(matches!(err, DatasetError::BadToken { line: 1, .. }));
    }

    #[test]
    fn rejects_zero_utility() {
        let err = load_database(Cursor::new("a b:5:5 0\n")).unwrap_err();
        assert!(matches!(err, DatasetError::UtilityBelowOne { line: 1, .. }));
    }

    #[test]
    fn rejects_duplicate_item() {
        let err = load_database(Cursor::new("a a:2:1 1\n")).unwrap_err();
        assert!(matches!(err, DatasetError::DuplicateItem { line: 1, .. }));
    }

    #[test]
    fn rejects_tu_mismatch() {
        let err = load_database(Cursor::new("ok:1:1\na b:9:5 3\n")).unwrap_err();
        assert!(matches!(
            err,
            DatasetError::TuMismatch {
                line: 2,
                declared: 9,
                computed: 8
            }
        ));
    }

    #[test]
    fn database_round_trips() {
        let db = example();
        let mut buf = Vec::new();
        write_database(&db, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), EXAMPLE_DB);
        let reloaded = load_database(Cursor::new(&buf)).unwrap();
        assert_eq!(reloaded, db);
    }

    #[test]
    fn total_utility_matches_tu_sum() {
        let db = example();
        let sum: Utility = db.transactions.iter().map(|t| t.tu()).sum();
        assert_eq!(db.total_utility, sum);
    }

    #[test]
    fn itemset_sorts_and_dedups() {
        let set = Itemset::new(vec![3, 1, 3, 2]);
        assert_eq!(set.items(), &[1, 2, 3]);
        assert!(set.contains(2));
        assert!(!set.contains(0));
    }

    #[test]
    fn writes_results_sorted_by_label_sequence() {
        let db = example();
        let id = |l: &str| db.items.id(l).unwrap();
        let results = vec![
            (Itemset::new(vec![id("C"), id("F")]), 29),
            (Itemset::new(vec![id("A"), id("C"), id("D")]), 19),
        ];
        let mut buf = Vec::new();
        write_results(results, &db.items, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "A C D #UTIL: 19\nC F #UTIL: 29\n"
        );
    }

    #[test]
    fn writes_empty_results_as_empty_output() {
        let mut buf = Vec::new();
        write_results(Vec::new(), &ItemTable::new(), &mut buf).unwrap();
        assert!(buf.is_empty());
    }

    #[test]
    fn generator_rejects_bad_params() {
        let base = GeneratorConfig {
            num_tx: 1,
            num_items: 5,
            avg_len: 2,
            seed: 0,
            ext_mean: 5.0,
            ext_sd: 2.0,
        };
        let cfg = GeneratorConfig { num_items: 0, ..base.clone() };
        assert_eq!(generate_synthetic(&cfg), Err(GeneratorError::NoItems));
        let cfg = GeneratorConfig { avg_len: 6, ..base.clone() };
        assert!(matches!(
            generate_synthetic(&cfg),
            Err(GeneratorError::BadAvgLen { .. })
        ));
        let cfg = GeneratorConfig { avg_len: 0, ..base.clone() };
        assert!(matches!(
            generate_synthetic(&cfg),
            Err(GeneratorError::BadAvgLen { .. })
        ));
        let cfg = GeneratorConfig { ext_sd: -1.0, ..base };
        assert!(matches!(
            generate_synthetic(&cfg),
            Err(GeneratorError::BadGaussian { .. })
        ));
    }

    #[test]
    fn generator_is_deterministic() {
        let cfg = GeneratorConfig {
            num_tx: 50,
            num_items: 20,
            avg_len: 5,
            seed: 7,
            ext_mean: 5.0,
            ext_sd: 2.0,
        };
        let a = generate_synthetic(&cfg).unwrap();
        let b = generate_synthetic(&cfg).unwrap();
        assert_eq!(a, b);
        let mut buf_a = Vec::new();
        let mut buf_b = Vec::new();
        write_database(&a, &mut buf_a).unwrap();
        write_database(&b, &mut buf_b).unwrap();
        assert_eq!(buf_a, buf_b);
        let other = generate_synthetic(&GeneratorConfig { seed: 8, ..cfg }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn generator_respects_structural_bounds() {
        let cfg = GeneratorConfig {
            num_tx: 200,
            num_items: 12,
            avg_len: 4,
            seed: 3,
            ext_mean: 4.0,
            ext_sd: 3.0,
        };
        let db = generate_synthetic(&cfg).unwrap();
        assert_eq!(db.num_transactions(), 200);
        for tx in &db.transactions {
            assert!(!tx.entries.is_empty());
            assert!(tx.entries.len() <= 7); // 2 * avg_len - 1
            let mut ids: Vec<ItemId> = tx.entries.iter().map(|&(i, _)| i).collect();
            ids.dedup();
            assert_eq!(ids.len(), tx.entries.len());
            for &(_, u) in &tx.entries {
                assert!(u >= 1);
            }
        }
        assert!(db.num_items() <= 12);
        let round: TransactionDatabase = {
            let mut buf = Vec::new();
            write_database(&db, &mut buf).unwrap();
            load_database(Cursor::new(buf)).unwrap()
        };
        assert_eq!(round, db);
    }

    #[test]
    fn generator_zero_transactions_is_empty() {
        let cfg = GeneratorConfig {
            num_tx: 0,
            num_items: 3,
            avg_len: 2,
            seed: 1,
            ext_mean: 5.0,
            ext_sd: 1.0,
        };
        let db = generate_synthetic(&cfg).unwrap();
        assert_eq!(db.num_transactions(), 0);
        assert_eq!(db.total_utility, 0);
    }
}
