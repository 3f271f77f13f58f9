//! Brute-force high-utility itemset miner used as ground truth in tests
//! and by the `verify` command.
//!
//! Deliberately written against the raw database only, with its own
//! inline TWU computation, so it shares no code path with the engine it
//! cross-checks.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use itertools::Itertools;
use thiserror::Error;

use crate::dataset::{ItemId, Itemset, TransactionDatabase, Utility};

/// Guard against 2^m subset blowup.
pub const DEFAULT_MAX_ITEMS: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OracleResult {
    pub itemsets: BTreeMap<Itemset, Utility>,
}

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("database has {found} distinct items, above the oracle limit {limit}")]
    TooManyItems { found: usize, limit: usize },
}

/// Exact utility of `set` over the database: for every transaction
/// containing all of `set`, the sum of its items' utilities there.
pub fn utility_of(db: &TransactionDatabase, set: &Itemset) -> Utility {
    if set.is_empty() {
        return 0;
    }
    let mut total = 0;
    for tx in &db.transactions {
        let mut sum = 0;
        let mut hits = 0;
        for &(item, util) in &tx.entries {
            if set.contains(item) {
                sum += util;
                hits += 1;
            }
        }
        if hits == set.len() {
            total += sum;
        }
    }
    total
}

/// Items whose TWU reaches `theta`, ascending by id. TWU is recomputed
/// inline here to keep the oracle path self-contained.
pub fn promising_universe(db: &TransactionDatabase, theta: Utility) -> Vec<ItemId> {
    let mut twu: HashMap<ItemId, Utility> = HashMap::new();
    for tx in &db.transactions {
        let tu = tx.tu();
        for &(item, _) in &tx.entries {
            *twu.entry(item).or_insert(0) += tu;
        }
    }
    let mut universe: Vec<ItemId> = twu
        .into_iter()
        .filter(|&(_, u)| u >= theta)
        .map(|(i, _)| i)
        .collect();
    universe.sort_unstable();
    universe
}

/// Enumerates every non-empty subset of the item universe by increasing
/// cardinality, then lexicographically, keeping those with utility >= theta.
///
/// With `twu_skip` the universe is first restricted to items whose TWU
/// reaches theta; TWU anti-monotonicity makes that a pure speedup, and a
/// test asserts both settings agree.
pub fn mine_bruteforce(
    db: &TransactionDatabase,
    theta: Utility,
    max_items: usize,
    twu_skip: bool,
) -> Result<OracleResult, OracleError> {
    let mut universe: BTreeSet<ItemId> = BTreeSet::new();
    for tx in &db.transactions {
        for &(item, _) in &tx.entries {
            universe.insert(item);
        }
    }
    if universe.len() > max_items {
        return Err(OracleError::TooManyItems {
            found: universe.len(),
            limit: max_items,
        });
    }
    let universe: Vec<ItemId> = if twu_skip {
        promising_universe(db, theta)
    } else {
        universe.into_iter().collect()
    };

    let mut itemsets = BTreeMap::new();
    for k in 1..=universe.len() {
        for combo in universe.iter().copied().combinations(k) {
            let set = Itemset::new(combo);
            let util = utility_of(db, &set);
            if util >= theta {
                itemsets.insert(set, util);
            }
        }
    }
    Ok(OracleResult { itemsets })
}
