//! The one-phase mining recursion over the utility tree.
//!
//! Items are explored bottom-up in increasing (TWU, id) order. For each
//! candidate itemset the header chain of its last item yields the anchor
//! nodes; their eu/ru mass gives the exact utility and the EU-RU upper
//! bound. Local TWU statistics over the anchors' ancestors identify
//! unpromising extension items, whose exact utility is subtracted from
//! the bound before deciding to expand. Expansion pushes projection
//! records onto promising ancestors (the lightweight projected database)
//! and recurses; backtracking pops them, so the tree is reusable for the
//! next sibling.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use crate::dataset::{ItemId, Itemset, Tid, Utility};
use crate::preprocess::{initial_extension_list, ReorganizedDatabase};
use crate::utree::{NodeId, UtilityTree};

/// One node hosting the current itemset: the tids routed through it and
/// the itemset's exact utility over them.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Anchor {
    pub node: NodeId,
    pub tids: Vec<Tid>,
    pub prefix_utility: Utility,
}

/// State of one expanded prefix during the recursion.
#[derive(Debug, Clone)]
pub struct PrefixFrame {
    /// Items in exploration order (not sorted by id).
    pub itemset: Vec<ItemId>,
    /// 0 for the empty root prefix; fresh per expanded frame otherwise.
    pub prefix_id: u64,
    pub anchors: Vec<Anchor>,
    pub sum_eu: Utility,
    pub sum_ru: Utility,
    pub extensions: Vec<ItemId>,
}

impl PrefixFrame {
    pub fn root(extensions: Vec<ItemId>) -> Self {
        PrefixFrame {
            itemset: Vec::new(),
            prefix_id: 0,
            anchors: Vec::new(),
            sum_eu: 0,
            sum_ru: 0,
            extensions,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtensionEval {
    pub sum_eu: Utility,
    pub sum_ru: Utility,
    pub anchors: Vec<Anchor>,
}

/// Local statistics of one ancestor item of the current itemset.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AncestorEntry {
    pub item: ItemId,
    /// Sum of the itemset's eu+ru mass over anchors below this item.
    pub local_twu: Utility,
    /// Sum of this item's own eu over those transactions.
    pub local_ext_utility: Utility,
}

/// Ancestor entries in increasing exploration-rank order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AncestorStats {
    pub entries: Vec<AncestorEntry>,
}

impl AncestorStats {
    pub fn get(&self, item: ItemId) -> Option<&AncestorEntry> {
        self.entries.iter().find(|e| e.item == item)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningStats {
    /// Itemsets formed (prefix plus extension) across all calls.
    pub candidates: u64,
    pub runtime: Duration,
    /// Peak number of live LocalNodes, the memory cost of projection.
    pub peak_local_nodes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiningResult {
    pub itemsets: BTreeMap<Itemset, Utility>,
    pub stats: MiningStats,
}

/// Everything observable about one evaluated candidate; handed to the
/// tracing observer right after the expand-or-skip decision.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidateTrace {
    pub itemset: Itemset,
    pub sum_eu: Utility,
    pub sum_ru: Utility,
    /// Summed prefix utility over the anchors (the PU sent on expansion).
    pub anchor_prefix_utility: Utility,
    pub ancestors: AncestorStats,
    pub unpromising: Vec<ItemId>,
    pub updated_ub: Utility,
    pub expanded: bool,
    /// The hlist built for this candidate; empty when not expanded.
    pub extensions: Vec<ItemId>,
}

/// Mines every itemset whose exact utility reaches `theta`. The tree must
/// have been built from `rdb`; its local stacks are used during the run
/// and are all empty again on return.
pub fn mine(tree: &mut UtilityTree, rdb: &ReorganizedDatabase, theta: Utility) -> MiningResult {
    mine_inner(tree, rdb, theta, None)
}

/// `mine` plus a per-candidate observer, for tests and diagnostics.
pub fn mine_traced(
    tree: &mut UtilityTree,
    rdb: &ReorganizedDatabase,
    theta: Utility,
    observer: &mut dyn FnMut(&CandidateTrace),
) -> MiningResult {
    mine_inner(tree, rdb, theta, Some(observer))
}

struct MineCtx<'a> {
    theta: Utility,
    itemsets: BTreeMap<Itemset, Utility>,
    candidates: u64,
    live_local_nodes: u64,
    peak_local_nodes: u64,
    next_prefix_id: u64,
    observer: Option<&'a mut dyn FnMut(&CandidateTrace)>,
}

fn mine_inner(
    tree: &mut UtilityTree,
    rdb: &ReorganizedDatabase,
    theta: Utility,
    observer: Option<&mut dyn FnMut(&CandidateTrace)>,
) -> MiningResult {
    let start = Instant::now();
    let mut ctx = MineCtx {
        theta,
        itemsets: BTreeMap::new(),
        candidates: 0,
        live_local_nodes: 0,
        peak_local_nodes: 0,
        next_prefix_id: 1,
        observer,
    };
    let root = PrefixFrame::root(initial_extension_list(rdb));
    for &item in root.extensions.clone().iter() {
        explore(&mut ctx, tree, &root, item);
    }
    debug_assert!(tree.all_stacks_empty());
    MiningResult {
        itemsets: ctx.itemsets,
        stats: MiningStats {
            candidates: ctx.candidates,
            runtime: start.elapsed(),
            peak_local_nodes: ctx.peak_local_nodes,
        },
    }
}

fn explore(ctx: &mut MineCtx, tree: &mut UtilityTree, parent: &PrefixFrame, item: ItemId) {
    ctx.candidates += 1;
    let eval = evaluate_extension(tree, parent, item);
    let mut itemset = parent.itemset.clone();
    itemset.push(item);
    if eval.sum_eu >= ctx.theta {
        ctx.itemsets
            .insert(Itemset::new(itemset.clone()), eval.sum_eu);
    }
    let stats = ancestor_stats(tree, &eval.anchors);
    let (updated_ub, unpromising) = tighten_bound(eval.sum_eu, eval.sum_ru, &stats, ctx.theta);
    if updated_ub < ctx.theta {
        // A failed bound abandons only this extension; siblings are
        // independent and still explored by the caller's loop.
        if ctx.observer.is_some() {
            emit_trace(ctx, itemset, &eval, stats, unpromising, updated_ub, false, Vec::new());
        }
        return;
    }

    let prefix_id = ctx.next_prefix_id;
    ctx.next_prefix_id += 1;
    let mut frame = PrefixFrame {
        itemset,
        prefix_id,
        anchors: eval.anchors.clone(),
        sum_eu: eval.sum_eu,
        sum_ru: eval.sum_ru,
        extensions: Vec::new(),
    };
    let pushed = project(tree, &frame, &unpromising);
    ctx.live_local_nodes += pushed.len() as u64;
    ctx.peak_local_nodes = ctx.peak_local_nodes.max(ctx.live_local_nodes);
    frame.extensions = build_hlist(tree, prefix_id, &pushed, ctx.theta);

    if ctx.observer.is_some() {
        emit_trace(
            ctx,
            frame.itemset.clone(),
            &eval,
            stats,
            unpromising,
            updated_ub,
            true,
            frame.extensions.clone(),
        );
    }

    for &ext in frame.extensions.clone().iter() {
        explore(ctx, tree, &frame, ext);
    }

    for &node in pushed.iter().rev() {
        tree.pop_local(node, prefix_id);
    }
    ctx.live_local_nodes -= pushed.len() as u64;
}

#[allow(clippy::too_many_arguments)]
fn emit_trace(
    ctx: &mut MineCtx,
    itemset: Vec<ItemId>,
    eval: &ExtensionEval,
    ancestors: AncestorStats,
    unpromising: Vec<ItemId>,
    updated_ub: Utility,
    expanded: bool,
    extensions: Vec<ItemId>,
) {
    let trace = CandidateTrace {
        itemset: Itemset::new(itemset),
        sum_eu: eval.sum_eu,
        sum_ru: eval.sum_ru,
        anchor_prefix_utility: eval.anchors.iter().map(|a| a.prefix_utility).sum(),
        ancestors,
        unpromising,
        updated_ub,
        expanded,
        extensions,
    };
    if let Some(obs) = ctx.observer.as_deref_mut() {
        obs(&trace);
    }
}

/// Sums the exact and remaining utility of `parent`'s itemset extended by
/// `item`, walking the item's header chain. For the empty prefix every
/// chain node contributes its whole gmap; otherwise only nodes whose top
/// LocalNode belongs to `parent`'s frame contribute, through their lmaps.
pub fn evaluate_extension(
    tree: &UtilityTree,
    parent: &PrefixFrame,
    item: ItemId,
) -> ExtensionEval {
    let mut sum_eu = 0;
    let mut sum_ru = 0;
    let mut anchors = Vec::new();
    if parent.itemset.is_empty() {
        for node_id in tree.header_nodes(item) {
            let gmap = tree.node(node_id).gmap();
            let mut eu = 0;
            let mut ru = 0;
            let mut tids = Vec::with_capacity(gmap.len());
            for g in gmap {
                eu += g.eu;
                ru += g.ru;
                tids.push(g.tid);
            }
            sum_eu += eu;
            sum_ru += ru;
            anchors.push(Anchor {
                node: node_id,
                tids,
                prefix_utility: eu,
            });
        }
    } else {
        for node_id in tree.header_nodes(item) {
            let Some(local) = tree.node(node_id).local_top() else {
                continue;
            };
            if local.prefix_id != parent.prefix_id {
                continue;
            }
            let mut eu = 0;
            let mut ru = 0;
            let mut tids = Vec::new();
            for (_, entry) in &local.lmap {
                eu += entry.prefix_utility + entry.ext_utility;
                ru += entry.rem_utility;
                tids.extend_from_slice(&entry.tids);
            }
            tids.sort_unstable();
            sum_eu += eu;
            sum_ru += ru;
            anchors.push(Anchor {
                node: node_id,
                tids,
                prefix_utility: eu,
            });
        }
    }
    ExtensionEval {
        sum_eu,
        sum_ru,
        anchors,
    }
}

/// Local TWU and exact-utility totals of every strict-ancestor item of
/// the anchors. The weight a transaction contributes is the itemset's
/// eu+ru mass in it (its prefix utility plus the anchor's remaining
/// utility), not the raw transaction utility.
pub fn ancestor_stats(tree: &UtilityTree, anchors: &[Anchor]) -> AncestorStats {
    let mut acc: BTreeMap<ItemId, (Utility, Utility)> = BTreeMap::new();
    for anchor in anchors {
        let host = tree.node(anchor.node);
        let ru: Utility = anchor
            .tids
            .iter()
            .map(|&t| host.gmap_get(t).expect("anchor tid in own gmap").ru)
            .sum();
        let weight = anchor.prefix_utility + ru;
        for ancestor in tree.ancestors(anchor.node) {
            let node = tree.node(ancestor);
            let item = node.item.expect("non-root ancestor");
            let eu: Utility = anchor
                .tids
                .iter()
                .map(|&t| node.gmap_get(t).expect("anchor tid on ancestor path").eu)
                .sum();
            let slot = acc.entry(item).or_insert((0, 0));
            slot.0 += weight;
            slot.1 += eu;
        }
    }
    let mut entries: Vec<AncestorEntry> = acc
        .into_iter()
        .map(|(item, (local_twu, local_ext_utility))| AncestorEntry {
            item,
            local_twu,
            local_ext_utility,
        })
        .collect();
    entries.sort_by_key(|e| tree.exploration_rank(e.item));
    AncestorStats { entries }
}

/// Splits the ancestors into promising and unpromising at `theta` and
/// subtracts the unpromising items' exact utility from the EU-RU bound.
pub fn tighten_bound(
    sum_eu: Utility,
    sum_ru: Utility,
    stats: &AncestorStats,
    theta: Utility,
) -> (Utility, Vec<ItemId>) {
    let mut ub = sum_eu + sum_ru;
    let mut unpromising = Vec::new();
    for entry in &stats.entries {
        if entry.local_twu < theta {
            ub -= entry.local_ext_utility;
            unpromising.push(entry.item);
        }
    }
    (ub, unpromising)
}

/// Sends each anchor's (contributor id, prefix utility, tids) to all of
/// its promising strict ancestors. Returns the nodes that received a
/// fresh LocalNode, in push order; the caller pops them in reverse.
pub fn project(tree: &mut UtilityTree, frame: &PrefixFrame, unpromising: &[ItemId]) -> Vec<NodeId> {
    let mut pushed = Vec::new();
    for anchor in &frame.anchors {
        if anchor.tids.is_empty() {
            continue;
        }
        let ancestors: Vec<NodeId> = tree.ancestors(anchor.node).collect();
        for ancestor in ancestors {
            let item = tree.node(ancestor).item.expect("non-root ancestor");
            if unpromising.contains(&item) {
                continue;
            }
            let fresh = tree.push_local(
                ancestor,
                frame.prefix_id,
                anchor.node,
                &anchor.tids,
                anchor.prefix_utility,
            );
            if fresh {
                pushed.push(ancestor);
            }
        }
    }
    pushed
}

/// Extension items worth recursing into: projected EU-RU (prefix, ext and
/// rem utility summed over the frame's LocalNodes) at least `theta`, in
/// increasing exploration-rank order.
pub fn build_hlist(
    tree: &UtilityTree,
    prefix_id: u64,
    pushed: &[NodeId],
    theta: Utility,
) -> Vec<ItemId> {
    let mut score: BTreeMap<ItemId, Utility> = BTreeMap::new();
    for &node_id in pushed {
        let node = tree.node(node_id);
        let local = node.local_top().expect("freshly projected node");
        debug_assert_eq!(local.prefix_id, prefix_id);
        let item = node.item.expect("non-root projected node");
        let mass: Utility = local
            .lmap
            .iter()
            .map(|(_, e)| e.prefix_utility + e.ext_utility + e.rem_utility)
            .sum();
        *score.entry(item).or_insert(0) += mass;
    }
    let mut hlist: Vec<ItemId> = score
        .into_iter()
        .filter(|&(_, mass)| mass >= theta)
        .map(|(item, _)| item)
        .collect();
    hlist.sort_by_key(|&item| tree.exploration_rank(item));
    hlist
}
