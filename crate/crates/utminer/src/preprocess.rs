//! Database reorganization ahead of tree construction: TWU computation,
//! unpromising-item pruning, increasing-TWU entry order, transaction
//! merging, and per-entry exact/remaining utility annotation.
//!
//! TWU is computed once on the raw database and deliberately not iterated
//! after pruning; the pipeline performs exactly two scans.

use std::collections::HashMap;

use thiserror::Error;

use crate::dataset::{ItemId, Tid, TransactionDatabase, Utility};

/// Transaction-weighted utility per item: the sum of TU over transactions
/// containing it. Anti-monotone upper bound on any superset's utility.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TwuTable {
    map: HashMap<ItemId, Utility>,
}

impl TwuTable {
    pub fn get(&self, item: ItemId) -> Option<Utility> {
        self.map.get(&item).copied()
    }

    /// Sort key realizing the fixed total order: increasing TWU, ties by
    /// ascending item id. Exploration ascends it, tree paths descend it.
    pub fn rank_key(&self, item: ItemId) -> (Utility, ItemId) {
        (self.get(item).unwrap_or(0), item)
    }

    pub fn iter(&self) -> impl Iterator<Item = (ItemId, Utility)> + '_ {
        self.map.iter().map(|(&i, &u)| (i, u))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }
}

pub fn compute_twu(db: &TransactionDatabase) -> TwuTable {
    let mut map: HashMap<ItemId, Utility> = HashMap::new();
    for tx in &db.transactions {
        let tu = tx.tu();
        for &(item, _) in &tx.entries {
            *map.entry(item).or_insert(0) += tu;
        }
    }
    TwuTable { map }
}

#[derive(Debug, Error, PartialEq)]
#[error("threshold percentage {pct} out of range 0..=100")]
pub struct ThresholdError {
    pub pct: f64,
}

/// Absolute threshold from a percentage of total database utility:
/// ceil(pct/100 * total), floored at 1 so zero-utility itemsets never
/// qualify vacuously.
pub fn resolve_threshold(db: &TransactionDatabase, pct: f64) -> Result<Utility, ThresholdError> {
    if !(0.0..=100.0).contains(&pct) {
        return Err(ThresholdError { pct });
    }
    let raw = (pct / 100.0 * db.total_utility as f64).ceil() as Utility;
    Ok(raw.max(1))
}

/// Entry of a reorganized transaction. `ru` is the summed utility of the
/// entries strictly after this one (the remaining utility).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorgEntry {
    pub item: ItemId,
    pub utility: Utility,
    pub ru: Utility,
}

impl ReorgEntry {
    /// Exact utility of the item in this transaction.
    pub fn eu(&self) -> Utility {
        self.utility
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReorganizedTransaction {
    pub tid: Tid,
    pub entries: Vec<ReorgEntry>,
}

/// Pruned, merged database with entries in increasing-TWU order.
#[derive(Debug, Clone, PartialEq)]
pub struct ReorganizedDatabase {
    pub transactions: Vec<ReorganizedTransaction>,
    pub twu: TwuTable,
    pub theta: Utility,
    /// Per item: (sum of eu, sum of ru) over the reorganized database.
    pub item_eu_ru: HashMap<ItemId, (Utility, Utility)>,
    items_by_rank: Vec<ItemId>,
}

impl ReorganizedDatabase {
    /// Surviving items in increasing (TWU, id) order.
    pub fn ranked_items(&self) -> &[ItemId] {
        &self.items_by_rank
    }
}

/// Drops entries of items with TWU below theta and then empty
/// transactions, sorts entries by increasing (TWU, id), sorts transactions
/// lexicographically by item-id sequence, merges adjacent duplicates by
/// summing per-item utilities, renumbers tids densely in the new order,
/// and annotates eu/ru.
pub fn prune_and_reorganize(
    db: &TransactionDatabase,
    twu: &TwuTable,
    theta: Utility,
) -> ReorganizedDatabase {
    let mut pending: Vec<Vec<(ItemId, Utility)>> = Vec::new();
    for tx in &db.transactions {
        let mut entries: Vec<(ItemId, Utility)> = tx
            .entries
            .iter()
            .copied()
            .filter(|&(item, _)| twu.get(item).unwrap_or(0) >= theta)
            .collect();
        if entries.is_empty() {
            continue;
        }
        entries.sort_by_key(|&(item, _)| twu.rank_key(item));
        pending.push(entries);
    }
    pending.sort_by(|a, b| {
        let key = |e: &[(ItemId, Utility)]| e.iter().map(|&(i, _)| i).collect::<Vec<_>>();
        key(a).cmp(&key(b))
    });

    let mut merged: Vec<Vec<(ItemId, Utility)>> = Vec::new();
    for entries in pending {
        match merged.last_mut() {
            Some(prev)
                if prev.len() == entries.len()
                    && prev.iter().map(|&(i, _)| i).eq(entries.iter().map(|&(i, _)| i)) =>
            {
                for (p, e) in prev.iter_mut().zip(&entries) {
                    p.1 += e.1;
                }
            }
            _ => merged.push(entries),
        }
    }

    let mut item_eu_ru: HashMap<ItemId, (Utility, Utility)> = HashMap::new();
    let mut transactions = Vec::with_capacity(merged.len());
    for (tid, entries) in merged.into_iter().enumerate() {
        let mut ru: Utility = entries.iter().map(|&(_, u)| u).sum();
        let entries: Vec<ReorgEntry> = entries
            .into_iter()
            .map(|(item, utility)| {
                ru -= utility;
                let slot = item_eu_ru.entry(item).or_insert((0, 0));
                slot.0 += utility;
                slot.1 += ru;
                ReorgEntry { item, utility, ru }
            })
            .collect();
        transactions.push(ReorganizedTransaction {
            tid: tid as Tid,
            entries,
        });
    }

    let mut items_by_rank: Vec<ItemId> = item_eu_ru.keys().copied().collect();
    items_by_rank.sort_by_key(|&item| twu.rank_key(item));

    ReorganizedDatabase {
        transactions,
        twu: twu.clone(),
        theta,
        item_eu_ru,
        items_by_rank,
    }
}

/// Items worth exploring from the empty prefix: summed eu + ru at least
/// theta, in increasing (TWU, id) order. This is the bottom-up
/// exploration order of the miner's root call.
pub fn initial_extension_list(rdb: &ReorganizedDatabase) -> Vec<ItemId> {
    rdb.items_by_rank
        .iter()
        .copied()
        .filter(|item| {
            let (eu, ru) = rdb.item_eu_ru[item];
            eu + ru >= rdb.theta
        })
        .collect()
}
