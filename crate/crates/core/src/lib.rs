//! Stratified association-rule mining over categorical records.
//!
//! Records are encoded as transactions of `variable=category` items, mined
//! for frequent itemsets with an Apriori-style level search, and turned into
//! rules toward a chosen consequent item. Rules that do not beat every
//! generalization on confidence are pruned. A random-forest importance
//! screen can narrow the variable set beforehand.

pub mod bitmap;
pub mod error;
pub mod fixture;
pub mod ingest;
pub mod miner;
pub mod model;
pub mod oracle;
pub mod report;
pub mod rulegen;
pub mod varselect;

pub use error::{Error, Result};
pub use miner::{mine_frequent, FrequentItemsetTable, MiningParams};
pub use model::{
    Item, ItemDictionary, ItemId, ItemsetSupport, Record, Transaction, TransactionDatabase,
};
pub use rulegen::{generate_rules, prune_redundant, Rule, RuleSet, RuleThresholds};
