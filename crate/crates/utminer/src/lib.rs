//! High-utility itemset mining over a prefix-shared utility tree.
//!
//! A transaction database with per-item utilities is reorganized once
//! (transaction-weighted utility pruning, remaining-utility annotation,
//! transaction merging) and loaded into a tree whose paths share prefixes
//! in decreasing utility-weight order. The miner then enumerates itemsets
//! bottom-up directly on the tree, maintaining lightweight projected
//! databases as stacks on the nodes, so no candidate generation phase or
//! per-pattern database copy is needed.
//!
//! The crate also ships a brute-force oracle for cross-checking results,
//! a seeded synthetic database generator, and a command line front end
//! for mining, verification, threshold sweeps, and data generation.

pub mod cli;
pub mod dataset;
pub mod miner;
pub mod oracle;
pub mod preprocess;
pub mod utree;
