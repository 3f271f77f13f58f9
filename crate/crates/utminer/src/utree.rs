//! The utility tree: a prefix-shared tree over the reorganized database.
//!
//! Transactions are inserted root-to-leaf in decreasing (TWU, id) order,
//! so shared prefixes collapse into shared paths. Every node keeps a
//! tid-indexed (eu, ru) map for the transactions passing through it, and
//! a stack of per-prefix projection records (`LocalNode`) that the miner
//! pushes while expanding a prefix and pops on backtrack. A header table
//! chains all nodes of an item in creation order.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::dataset::{ItemId, ItemTable, Tid, Utility};
use crate::preprocess::ReorganizedDatabase;

/// Dense arena index of a tree node; assigned in creation order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Per-transaction utilities at a node. `ru` is the summed eu of the
/// node's strict ancestors for the same tid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GmapEntry {
    pub tid: Tid,
    pub eu: Utility,
    pub ru: Utility,
}

/// One contributor's share of a projection: the tids it routed here plus
/// this node's eu/ru mass over them and the prefix utility sent along.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LmapEntry {
    pub tids: Vec<Tid>,
    pub ext_utility: Utility,
    pub rem_utility: Utility,
    pub prefix_utility: Utility,
}

/// Projection record for one prefix frame, stacked on a node.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LocalNode {
    pub prefix_id: u64,
    pub lmap: Vec<(NodeId, LmapEntry)>,
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: NodeId,
    /// None only for the root.
    pub item: Option<ItemId>,
    pub parent: Option<NodeId>,
    children: HashMap<ItemId, NodeId>,
    gmap: Vec<GmapEntry>,
    local_stack: Vec<LocalNode>,
    /// Next node with the same item, in creation order.
    pub hlink: Option<NodeId>,
}

impl TreeNode {
    pub fn child(&self, item: ItemId) -> Option<NodeId> {
        self.children.get(&item).copied()
    }

    pub fn num_children(&self) -> usize {
        self.children.len()
    }

    pub fn children(&self) -> impl Iterator<Item = (ItemId, NodeId)> + '_ {
        self.children.iter().map(|(&i, &n)| (i, n))
    }

    /// Entries sorted by tid.
    pub fn gmap(&self) -> &[GmapEntry] {
        &self.gmap
    }

    pub fn gmap_get(&self, tid: Tid) -> Option<&GmapEntry> {
        self.gmap
            .binary_search_by_key(&tid, |g| g.tid)
            .ok()
            .map(|i| &self.gmap[i])
    }

    pub fn local_top(&self) -> Option<&LocalNode> {
        self.local_stack.last()
    }

    pub fn local_depth(&self) -> usize {
        self.local_stack.len()
    }
}

/// Header row: one item, its TWU, and the head of its node chain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeaderEntry {
    pub item: ItemId,
    pub twu: Utility,
    pub link: Option<NodeId>,
}

#[derive(Debug, Clone)]
pub struct UtilityTree {
    nodes: Vec<TreeNode>,
    root: NodeId,
    /// Ordered by decreasing (TWU, id): the reverse of exploration order.
    header: Vec<HeaderEntry>,
    header_pos: HashMap<ItemId, usize>,
}

/// Builds the tree by inserting every reorganized transaction along the
/// reverse (decreasing TWU) of its stored entry order, sharing existing
/// children and recording (tid, eu, ru) at each visited node. All local
/// stacks start empty.
pub fn build_tree(rdb: &ReorganizedDatabase) -> UtilityTree {
    let ranked = rdb.ranked_items();
    let mut header: Vec<HeaderEntry> = ranked
        .iter()
        .rev()
        .map(|&item| HeaderEntry {
            item,
            twu: rdb.twu.get(item).unwrap_or(0),
            link: None,
        })
        .collect();
    let header_pos: HashMap<ItemId, usize> = header
        .iter()
        .enumerate()
        .map(|(pos, e)| (e.item, pos))
        .collect();
    let mut chain_tail: Vec<Option<NodeId>> = vec![None; header.len()];

    let root = NodeId(0);
    let mut tree = UtilityTree {
        nodes: vec![TreeNode {
            id: root,
            item: None,
            parent: None,
            children: HashMap::new(),
            gmap: Vec::new(),
            local_stack: Vec::new(),
            hlink: None,
        }],
        root,
        header: Vec::new(),
        header_pos: HashMap::new(),
    };

    for tx in &rdb.transactions {
        let mut cur = root;
        for entry in tx.entries.iter().rev() {
            let next = match tree.nodes[cur.index()].child(entry.item) {
                Some(n) => n,
                None => {
                    let id = NodeId(tree.nodes.len() as u32);
                    tree.nodes.push(TreeNode {
                        id,
                        item: Some(entry.item),
                        parent: Some(cur),
                        children: HashMap::new(),
                        gmap: Vec::new(),
                        local_stack: Vec::new(),
                        hlink: None,
                    });
                    tree.nodes[cur.index()].children.insert(entry.item, id);
                    let pos = header_pos[&entry.item];
                    match chain_tail[pos] {
                        Some(tail) => tree.nodes[tail.index()].hlink = Some(id),
                        None => header[pos].link = Some(id),
                    }
                    chain_tail[pos] = Some(id);
                    id
                }
            };
            let node = &mut tree.nodes[next.index()];
            debug_assert!(node.gmap.last().is_none_or(|g| g.tid < tx.tid));
            node.gmap.push(GmapEntry {
                tid: tx.tid,
                eu: entry.utility,
                ru: entry.ru,
            });
            cur = next;
        }
    }

    tree.header = header;
    tree.header_pos = header_pos;
    tree
}

impl UtilityTree {
    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn node(&self, id: NodeId) -> &TreeNode {
        &self.nodes[id.index()]
    }

    /// Total node count, root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.nodes.len()).map(|i| NodeId(i as u32))
    }

    pub fn header(&self) -> &[HeaderEntry] {
        &self.header
    }

    pub fn header_entry(&self, item: ItemId) -> Option<&HeaderEntry> {
        self.header_pos.get(&item).map(|&pos| &self.header[pos])
    }

    /// Position in the bottom-up exploration order (0 = lowest TWU);
    /// the reverse of the header position.
    pub fn exploration_rank(&self, item: ItemId) -> Option<usize> {
        self.header_pos
            .get(&item)
            .map(|&pos| self.header.len() - 1 - pos)
    }

    /// All nodes labeled `item`, in creation order; empty for unknown items.
    pub fn header_nodes(&self, item: ItemId) -> HeaderNodes<'_> {
        HeaderNodes {
            tree: self,
            cur: self.header_entry(item).and_then(|e| e.link),
        }
    }

    /// Strict ancestors of `node`, bottom-up, excluding the root.
    pub fn ancestors(&self, node: NodeId) -> Ancestors<'_> {
        Ancestors { tree: self, cur: node }
    }

    pub fn depth(&self, node: NodeId) -> usize {
        let mut depth = 0;
        let mut cur = node;
        while let Some(parent) = self.node(cur).parent {
            depth += 1;
            cur = parent;
        }
        depth
    }

    /// Records `contributor`'s projection on `node` for the frame
    /// `prefix_id`: extends the top LocalNode when it already belongs to
    /// that frame, otherwise pushes a fresh one (returning true). The
    /// node's eu/ru mass over `tids` is read from its gmap.
    ///
    /// Panics if some tid is absent from the gmap: projections only ever
    /// route tids upward along their own insertion paths, so that is a
    /// caller bug, not an input condition.
    pub fn push_local(
        &mut self,
        node: NodeId,
        prefix_id: u64,
        contributor: NodeId,
        tids: &[Tid],
        prefix_utility: Utility,
    ) -> bool {
        let (ext, rem) = {
            let host = self.node(node);
            let mut ext = 0;
            let mut rem = 0;
            for &tid in tids {
                let g = host.gmap_get(tid).unwrap_or_else(|| {
                    panic!(
                        "projection bug: tid {tid} not in gmap of node {}",
                        node.0
                    )
                });
                ext += g.eu;
                rem += g.ru;
            }
            (ext, rem)
        };
        let host = &mut self.nodes[node.index()];
        let fresh = host
            .local_stack
            .last()
            .is_none_or(|l| l.prefix_id != prefix_id);
        if fresh {
            host.local_stack.push(LocalNode {
                prefix_id,
                lmap: Vec::new(),
            });
        }
        let local = host.local_stack.last_mut().unwrap();
        match local.lmap.iter_mut().find(|(c, _)| *c == contributor) {
            Some((_, entry)) => {
                entry.tids.extend_from_slice(tids);
                entry.ext_utility += ext;
                entry.rem_utility += rem;
                entry.prefix_utility += prefix_utility;
            }
            None => local.lmap.push((
                contributor,
                LmapEntry {
                    tids: tids.to_vec(),
                    ext_utility: ext,
                    rem_utility: rem,
                    prefix_utility,
                },
            )),
        }
        fresh
    }

    /// Removes the top LocalNode of `node`, which must belong to
    /// `prefix_id`; anything else means the push/pop recursion discipline
    /// was broken, so it panics.
    pub fn pop_local(&mut self, node: NodeId, prefix_id: u64) {
        let host = &mut self.nodes[node.index()];
        match host.local_stack.last() {
            Some(top) if top.prefix_id == prefix_id => {
                host.local_stack.pop();
            }
            Some(top) => panic!(
                "unbalanced projection: node {} top has prefix {}, expected {prefix_id}",
                node.0, top.prefix_id
            ),
            None => panic!(
                "unbalanced projection: pop from empty local stack of node {}",
                node.0
            ),
        }
    }

    pub fn all_stacks_empty(&self) -> bool {
        self.nodes.iter().all(|n| n.local_stack.is_empty())
    }

    /// DOT dump for debugging; node label = item/eu-sum/ru-sum. Not a
    /// stability contract.
    pub fn to_dot(&self, items: &ItemTable) -> String {
        let mut out = String::from("digraph utree {\n");
        for node in &self.nodes {
            match node.item {
                None => {
                    let _ = writeln!(out, "  n{} [label=\"root\"];", node.id.0);
                }
                Some(item) => {
                    let eu: Utility = node.gmap.iter().map(|g| g.eu).sum();
                    let ru: Utility = node.gmap.iter().map(|g| g.ru).sum();
                    let _ = writeln!(
                        out,
                        "  n{} [label=\"{}/{}/{}\"];",
                        node.id.0,
                        items.label(item),
                        eu,
                        ru
                    );
                }
            }
        }
        for node in &self.nodes {
            let mut kids: Vec<(ItemId, NodeId)> = node.children().collect();
            kids.sort_unstable();
            for (_, child) in kids {
                let _ = writeln!(out, "  n{} -> n{};", node.id.0, child.0);
            }
        }
        out.push_str("}\n");
        out
    }
}

pub struct HeaderNodes<'a> {
    tree: &'a UtilityTree,
    cur: Option<NodeId>,
}

impl Iterator for HeaderNodes<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let id = self.cur?;
        self.cur = self.tree.node(id).hlink;
        Some(id)
    }
}

pub struct Ancestors<'a> {
    tree: &'a UtilityTree,
    cur: NodeId,
}

impl Iterator for Ancestors<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        let parent = self.tree.node(self.cur).parent?;
        if parent == self.tree.root {
            return None;
        }
        self.cur = parent;
        Some(parent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{load_database, TransactionDatabase};
    use crate::preprocess::{compute_twu, prune_and_reorganize};
    use std::io::Cursor;

    fn example() -> TransactionDatabase {
        load_database(Cursor::new(crate::dataset::EXAMPLE_DB)).unwrap()
    }

    fn example_tree(theta: Utility) -> (TransactionDatabase, UtilityTree) {
        let db = example();
        let twu = compute_twu(&db);
        let rdb = prune_and_reorganize(&db, &twu, theta);
        let tree = build_tree(&rdb);
        (db, tree)
    }

    fn id(db: &TransactionDatabase, label: &str) -> ItemId {
        db.items.id(label).unwrap()
    }

    #[test]
    fn example_tree_shape() {
        let (db, tree) = example_tree(20);
        assert_eq!(tree.len(), 21);
        let counts: Vec<(&str, usize)> = ["A", "B", "C", "D", "E", "F", "G"]
            .iter()
            .map(|&l| (l, tree.header_nodes(id(&db, l)).count()))
            .collect();
        assert_eq!(
            counts,
            [
                ("A", 1),
                ("B", 5),
                ("C", 4),
                ("D", 4),
                ("E", 3),
                ("F", 2),
                ("G", 1)
            ]
        );
    }

    #[test]
    fn header_is_reverse_exploration_order() {
        let (db, tree) = example_tree(20);
        let order: Vec<&str> = tree
            .header()
            .iter()
            .map(|e| db.items.label(e.item))
            .collect();
        // D before C: same TWU 85, descending id breaks the tie.
        assert_eq!(order, ["G", "F", "E", "D", "C", "B", "A"]);
        assert_eq!(tree.header()[0].twu, 130);
        assert_eq!(tree.exploration_rank(id(&db, "A")), Some(0));
        assert_eq!(tree.exploration_rank(id(&db, "G")), Some(6));
        assert_eq!(tree.exploration_rank(999), None);
    }

    #[test]
    fn first_transaction_path_and_gmap() {
        let (db, tree) = example_tree(20);
        let root = tree.node(tree.root());
        let g = root.child(id(&db, "G")).expect("G under root");
        let f = tree.node(g).child(id(&db, "F")).expect("F under G");
        let e = tree.node(f).child(id(&db, "E")).expect("E under F");
        let c = tree.node(e).child(id(&db, "C")).expect("C under E");
        // The reorganized database renumbers tids; the first transaction
        // in lexicographic order is the original T1, so its tid is 0.
        let entry = tree.node(c).gmap_get(0).expect("tid 0 at C node");
        assert_eq!((entry.eu, entry.ru), (1, 17));
        assert_eq!(tree.node(c).gmap_get(99), None);
    }

    #[test]
    fn b_nodes_have_no_a_ancestor() {
        let (db, tree) = example_tree(20);
        let a = id(&db, "A");
        let allowed: Vec<ItemId> = ["C", "D", "E", "F", "G"]
            .iter()
            .map(|&l| id(&db, l))
            .collect();
        let mut seen_b = 0;
        for b_node in tree.header_nodes(id(&db, "B")) {
            seen_b += 1;
            for anc in tree.ancestors(b_node) {
                let item = tree.node(anc).item.unwrap();
                assert_ne!(item, a);
                assert!(allowed.contains(&item));
            }
        }
        assert_eq!(seen_b, 5);
    }

    #[test]
    fn ancestors_walk_bottom_up() {
        let (db, tree) = example_tree(20);
        let g = tree.node(tree.root()).child(id(&db, "G")).unwrap();
        let f = tree.node(g).child(id(&db, "F")).unwrap();
        let e = tree.node(f).child(id(&db, "E")).unwrap();
        let c = tree.node(e).child(id(&db, "C")).unwrap();
        let walk: Vec<NodeId> = tree.ancestors(c).collect();
        assert_eq!(walk, [e, f, g]);
        assert_eq!(tree.ancestors(g).count(), 0);
        assert_eq!(tree.depth(c), 4);
        for node in tree.node_ids() {
            if node != tree.root() {
                assert_eq!(tree.ancestors(node).count(), tree.depth(node) - 1);
            }
        }
    }

    #[test]
    fn eu_mass_is_conserved() {
        let db = example();
        let twu = compute_twu(&db);
        for theta in [1, 20, 40, 90] {
            let rdb = prune_and_reorganize(&db, &twu, theta);
            let tree = build_tree(&rdb);
            let tree_mass: Utility = tree
                .node_ids()
                .map(|n| tree.node(n).gmap().iter().map(|g| g.eu).sum::<Utility>())
                .sum();
            let db_mass: Utility = rdb
                .transactions
                .iter()
                .flat_map(|t| t.entries.iter().map(|e| e.utility))
                .sum();
            assert_eq!(tree_mass, db_mass, "theta {theta}");
        }
    }

    #[test]
    fn per_tid_ru_matches_ancestor_eu_sum() {
        let (_, tree) = example_tree(20);
        for node in tree.node_ids() {
            if node == tree.root() {
                continue;
            }
            for g in tree.node(node).gmap() {
                let anc_eu: Utility = tree
                    .ancestors(node)
                    .map(|a| {
                        let e = tree
                            .node(a)
                            .gmap_get(g.tid)
                            .expect("tid present on every ancestor");
                        e.eu
                    })
                    .sum();
                assert_eq!(g.ru, anc_eu);
            }
        }
    }

    #[test]
    fn paths_descend_the_twu_order() {
        let (_, tree) = example_tree(20);
        for node in tree.node_ids() {
            let n = tree.node(node);
            let (Some(item), Some(parent)) = (n.item, n.parent) else {
                continue;
            };
            let Some(parent_item) = tree.node(parent).item else {
                continue;
            };
            let child_rank = tree.exploration_rank(item).unwrap();
            let parent_rank = tree.exploration_rank(parent_item).unwrap();
            assert!(parent_rank > child_rank);
        }
    }

    #[test]
    fn pruned_item_has_empty_chain() {
        let (db, tree) = example_tree(40);
        assert_eq!(tree.header_nodes(id(&db, "A")).count(), 0);
        assert!(tree.header_entry(id(&db, "A")).is_none());
        assert_eq!(tree.header().len(), 6);
    }

    #[test]
    fn empty_database_builds_root_only() {
        let db = TransactionDatabase::new();
        let twu = compute_twu(&db);
        let rdb = prune_and_reorganize(&db, &twu, 1);
        let tree = build_tree(&rdb);
        assert!(tree.is_empty());
        assert_eq!(tree.len(), 1);
        assert!(tree.header().is_empty());
        assert!(tree.all_stacks_empty());
    }

    #[test]
    fn single_transaction_gives_one_node_per_item() {
        let db = load_database(Cursor::new("x y z:6:1 2 3\n")).unwrap();
        let twu = compute_twu(&db);
        let rdb = prune_and_reorganize(&db, &twu, 1);
        let tree = build_tree(&rdb);
        assert_eq!(tree.len(), 4);
        for label in ["x", "y", "z"] {
            assert_eq!(tree.header_nodes(id(&db, label)).count(), 1);
        }
    }

    #[test]
    fn push_local_groups_by_prefix_and_contributor() {
        let (db, mut tree) = example_tree(20);
        let g = tree.node(tree.root()).child(id(&db, "G")).unwrap();
        let f = tree.node(g).child(id(&db, "F")).unwrap();
        let tids: Vec<Tid> = tree.node(f).gmap().iter().take(2).map(|e| e.tid).collect();

        let created = tree.push_local(f, 1, NodeId(99), &tids[..1], 7);
        assert!(created);
        let created = tree.push_local(f, 1, NodeId(98), &tids[1..], 9);
        assert!(!created);
        let top = tree.node(f).local_top().unwrap();
        assert_eq!(top.prefix_id, 1);
        assert_eq!(top.lmap.len(), 2);
        let g0 = tree.node(f).gmap_get(tids[0]).unwrap();
        assert_eq!(top.lmap[0].1.ext_utility, g0.eu);
        assert_eq!(top.lmap[0].1.rem_utility, g0.ru);
        assert_eq!(top.lmap[0].1.prefix_utility, 7);

        // Same contributor again extends the entry in place.
        tree.push_local(f, 1, NodeId(99), &tids[1..], 3);
        let top = tree.node(f).local_top().unwrap();
        assert_eq!(top.lmap.len(), 2);
        assert_eq!(top.lmap[0].1.prefix_utility, 10);
        assert_eq!(top.lmap[0].1.tids.len(), 2);

        // A different prefix stacks on top; popping restores the old one.
        let created = tree.push_local(f, 2, NodeId(97), &tids[..1], 1);
        assert!(created);
        assert_eq!(tree.node(f).local_depth(), 2);
        tree.pop_local(f, 2);
        assert_eq!(tree.node(f).local_top().unwrap().prefix_id, 1);
        tree.pop_local(f, 1);
        assert!(tree.all_stacks_empty());
    }

    #[test]
    #[should_panic(expected = "projection bug")]
    fn push_local_rejects_foreign_tid() {
        let (db, mut tree) = example_tree(20);
        let g = tree.node(tree.root()).child(id(&db, "G")).unwrap();
        tree.push_local(g, 1, NodeId(99), &[999], 0);
    }

    #[test]
    #[should_panic(expected = "unbalanced projection")]
    fn pop_local_rejects_wrong_prefix() {
        let (db, mut tree) = example_tree(20);
        let g = tree.node(tree.root()).child(id(&db, "G")).unwrap();
        let tids: Vec<Tid> = tree.node(g).gmap().iter().take(1).map(|e| e.tid).collect();
        tree.push_local(g, 1, NodeId(99), &tids, 0);
        tree.pop_local(g, 2);
    }

    #[test]
    #[should_panic(expected = "unbalanced projection")]
    fn pop_local_rejects_empty_stack() {
        let (db, mut tree) = example_tree(20);
        let g = tree.node(tree.root()).child(id(&db, "G")).unwrap();
        tree.pop_local(g, 1);
    }

    #[test]
    fn dot_dump_labels_nodes() {
        let (db, tree) = example_tree(20);
        let dot = tree.to_dot(&db.items);
        assert!(dot.starts_with("digraph utree {"));
        assert!(dot.contains("[label=\"root\"]"));
        // The single G node carries all of G's eu (31) and no ru.
        assert!(dot.contains("[label=\"G/31/0\"]"));
        assert!(dot.trim_end().ends_with('}'));
    }
}
