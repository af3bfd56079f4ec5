//! Level-wise Apriori frequent-itemset mining.
//!
//! Candidates of size `k + 1` are formed from pairs of frequent `k`-itemsets
//! that share their first `k - 1` ids, pruned by downward closure, and
//! counted against the vertical bitmap index. All candidates that extend the
//! same frequent `k`-itemset are counted from one shared prefix bitmap.

use std::collections::HashSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ItemDictionary, ItemId, ItemsetSupport, TransactionDatabase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningParams {
    /// Minimum support of the whole itemset, as a ratio of `N`.
    pub min_support: f64,
    /// Maximum itemset size, antecedent and consequent together.
    pub max_len: usize,
    /// When set, itemsets of size two or more are reported only if they
    /// contain this item.
    pub must_include: Option<ItemId>,
    pub min_confidence: f64,
    pub min_lift: f64,
}

impl Default for MiningParams {
    fn default() -> Self {
        MiningParams {
            min_support: 0.001,
            max_len: 4,
            must_include: None,
            min_confidence: 0.5,
            min_lift: 1.1,
        }
    }
}

impl MiningParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.min_support) {
            return Err(Error::InvalidParams(format!(
                "min_support {} is outside [0, 1]",
                self.min_support
            )));
        }
        if self.max_len < 1 {
            return Err(Error::InvalidParams("max_len must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.min_confidence) {
            return Err(Error::InvalidParams(format!(
                "min_confidence {} is outside [0, 1]",
                self.min_confidence
            )));
        }
        if !(self.min_lift >= 0.0 && self.min_lift.is_finite()) {
            return Err(Error::InvalidParams(format!(
                "min_lift {} must be a finite non-negative number",
                self.min_lift
            )));
        }
        Ok(())
    }

    /// Whether `count` out of `n` transactions meets `min_support`. An
    /// itemset that never occurs is not frequent, even at `min_support = 0`.
    pub fn is_frequent(&self, count: u64, n: u64) -> bool {
        count > 0 && count as f64 / n as f64 >= self.min_support
    }
}

/// Frequent itemsets by size: `levels[k - 1]` holds the `k`-itemsets for
/// `k = 1..=max_len`, each level sorted lexicographically by id sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequentItemsetTable {
    pub n: u64,
    pub levels: Vec<Vec<ItemsetSupport>>,
}

impl FrequentItemsetTable {
    pub fn level(&self, k: usize) -> &[ItemsetSupport] {
        k.checked_sub(1)
            .and_then(|i| self.levels.get(i))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn get(&self, itemset: &[ItemId]) -> Option<&ItemsetSupport> {
        let level = self.level(itemset.len());
        level
            .binary_search_by(|s| s.itemset.as_slice().cmp(itemset))
            .ok()
            .map(|i| &level[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = &ItemsetSupport> {
        self.levels.iter().flatten()
    }

    pub fn len(&self) -> usize {
        self.levels.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Candidates sharing one frequent `k`-itemset as their prefix: each
/// candidate is `prefix + [ext]`.
struct CandidateGroup {
    prefix: Vec<ItemId>,
    extensions: Vec<ItemId>,
}

fn candidate_groups(level: &[Vec<ItemId>], dict: &ItemDictionary) -> Vec<CandidateGroup> {
    let known: HashSet<&[ItemId]> = level.iter().map(Vec::as_slice).collect();
    let mut groups = Vec::new();
    let mut start = 0;
    while start < level.len() {
        let k = level[start].len();
        let head = &level[start][..k - 1];
        let mut end = start + 1;
        while end < level.len() && &level[end][..k - 1] == head {
            end += 1;
        }
        // level[start..end] share their first k-1 ids.
        for i in start..end {
            let prefix = &level[i];
            let last = prefix[k - 1];
            let mut extensions = Vec::new();
            let mut probe = prefix.clone();
            for other in &level[i + 1..end] {
                let ext = other[k - 1];
                // Two categories of one variable never co-occur.
                if dict.variable_of(last) == dict.variable_of(ext) {
                    continue;
                }
                // Every k-subset must be frequent; the two that drop `last`
                // or `ext` are `other` and `prefix` themselves.
                probe.push(ext);
                let closed = (0..k - 1).all(|skip| {
                    let subset: Vec<ItemId> = probe
                        .iter()
                        .enumerate()
                        .filter(|&(j, _)| j != skip)
                        .map(|(_, &id)| id)
                        .collect();
                    known.contains(subset.as_slice())
                });
                probe.pop();
                if closed {
                    extensions.push(ext);
                }
            }
            if !extensions.is_empty() {
                groups.push(CandidateGroup {
                    prefix: prefix.clone(),
                    extensions,
                });
            }
        }
        start = end;
    }
    groups
}

/// Apriori join-and-prune: `(k+1)`-candidates from a lexicographically
/// sorted list of frequent `k`-itemsets.
pub fn generate_candidates(level: &[Vec<ItemId>], dict: &ItemDictionary) -> Vec<Vec<ItemId>> {
    candidate_groups(level, dict)
        .into_iter()
        .flat_map(|g| {
            g.extensions.into_iter().map(move |ext| {
                let mut c = g.prefix.clone();
                c.push(ext);
                c
            })
        })
        .collect()
}

/// Mines every itemset of size at most `max_len` whose support reaches
/// `min_support`.
///
/// With `must_include` set, the reported levels of size two and above keep
/// only itemsets containing that item; intermediate levels are still mined
/// in full so that closure pruning stays exact.
pub fn mine_frequent(
    db: &TransactionDatabase,
    params: &MiningParams,
) -> Result<FrequentItemsetTable> {
    params.validate()?;
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let n = db.n();
    let dict = db.dictionary();
    if let Some(m) = params.must_include {
        if m as usize >= dict.len() {
            return Err(Error::InvalidItem(m));
        }
    }

    let singletons: Vec<ItemsetSupport> = (0..dict.len() as ItemId)
        .filter_map(|id| {
            let count = db.item_bitmap(id).count_ones();
            params
                .is_frequent(count, n)
                .then(|| ItemsetSupport::new(vec![id], count, n))
        })
        .collect();

    let mut reported = vec![singletons.clone()];
    let mut current = singletons;
    for k in 1..params.max_len {
        if current.is_empty() {
            break;
        }
        let ids: Vec<Vec<ItemId>> = current.iter().map(|s| s.itemset.clone()).collect();
        let mut groups = candidate_groups(&ids, dict);
        let last_level = k + 1 == params.max_len;
        if let (true, Some(m)) = (last_level, params.must_include) {
            // Nothing above this level needs the unconstrained itemsets.
            for g in &mut groups {
                if !g.prefix.contains(&m) {
                    g.extensions.retain(|&e| e == m);
                }
            }
            groups.retain(|g| !g.extensions.is_empty());
        }
        let counted: Vec<Vec<ItemsetSupport>> = groups
            .par_iter()
            .map(|g| {
                let cover = db.cover(&g.prefix);
                g.extensions
                    .iter()
                    .filter_map(|&ext| {
                        let count = cover.and_count(db.item_bitmap(ext));
                        params.is_frequent(count, n).then(|| {
                            let mut itemset = g.prefix.clone();
                            itemset.push(ext);
                            ItemsetSupport::new(itemset, count, n)
                        })
                    })
                    .collect()
            })
            .collect();
        let next: Vec<ItemsetSupport> = counted.into_iter().flatten().collect();
        let shown = match params.must_include {
            Some(m) => next
                .iter()
                .filter(|s| s.itemset.contains(&m))
                .cloned()
                .collect(),
            None => next.clone(),
        };
        reported.push(shown);
        current = next;
    }
    reported.resize_with(params.max_len, Vec::new);
    Ok(FrequentItemsetTable {
        n,
        levels: reported,
    })
}
