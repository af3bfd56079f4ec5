//! Consequent-constrained rules `A -> K` with support, confidence and lift.
//!
//! Every metric is one division of exact integer counts:
//!
//! * support    `S(A->K) = count_ak / N`
//! * confidence `C(A->K) = count_ak / count_a`
//! * lift       `L(A->K) = count_ak * N / (count_a * count_k)`
//!
//! Orderings and the redundancy test compare the underlying fractions by
//! cross-multiplication, so they never depend on floating-point rounding.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::miner::FrequentItemsetTable;
use crate::model::{ItemId, TransactionDatabase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rule {
    pub antecedent: Vec<ItemId>,
    pub consequent: ItemId,
    pub n: u64,
    pub count_a: u64,
    pub count_k: u64,
    pub count_ak: u64,
    pub support: f64,
    pub confidence: f64,
    pub lift: f64,
}

impl Rule {
    /// Builds a rule from raw counts. `count_a` must be positive.
    pub fn from_counts(
        antecedent: Vec<ItemId>,
        consequent: ItemId,
        n: u64,
        count_a: u64,
        count_k: u64,
        count_ak: u64,
    ) -> Self {
        let (lift_num, lift_den) = lift_fraction(n, count_a, count_k, count_ak);
        Rule {
            antecedent,
            consequent,
            n,
            count_a,
            count_k,
            count_ak,
            support: count_ak as f64 / n as f64,
            confidence: count_ak as f64 / count_a as f64,
            lift: lift_num as f64 / lift_den as f64,
        }
    }

    /// Lift as an exact fraction. A consequent that never occurs gives 0/1.
    pub fn lift_fraction(&self) -> (u128, u128) {
        lift_fraction(self.n, self.count_a, self.count_k, self.count_ak)
    }

    pub fn confidence_fraction(&self) -> (u128, u128) {
        (u128::from(self.count_ak), u128::from(self.count_a))
    }

    pub fn support_fraction(&self) -> (u128, u128) {
        (u128::from(self.count_ak), u128::from(self.n))
    }
}

fn lift_fraction(n: u64, count_a: u64, count_k: u64, count_ak: u64) -> (u128, u128) {
    if count_k == 0 {
        return (0, 1);
    }
    (
        u128::from(count_ak) * u128::from(n),
        u128::from(count_a) * u128::from(count_k),
    )
}

/// Compares `a.0 / a.1` with `b.0 / b.1` (denominators positive).
pub fn cmp_fraction(a: (u128, u128), b: (u128, u128)) -> Ordering {
    match (a.0.checked_mul(b.1), b.0.checked_mul(a.1)) {
        (Some(l), Some(r)) => l.cmp(&r),
        // Only reachable for databases far beyond 2^32 transactions.
        _ => (a.0 as f64 / a.1 as f64).total_cmp(&(b.0 as f64 / b.1 as f64)),
    }
}

/// Lift desc, then confidence desc, then support desc, then antecedent ids asc.
pub fn rule_order(a: &Rule, b: &Rule) -> Ordering {
    cmp_fraction(b.lift_fraction(), a.lift_fraction())
        .then_with(|| cmp_fraction(b.confidence_fraction(), a.confidence_fraction()))
        .then_with(|| cmp_fraction(b.support_fraction(), a.support_fraction()))
        .then_with(|| a.antecedent.cmp(&b.antecedent))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleThresholds {
    pub rhs: ItemId,
    pub min_confidence: f64,
    pub min_lift: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub rules: Vec<Rule>,
    pub thresholds: RuleThresholds,
    /// Rules passing the confidence and lift thresholds, before pruning.
    pub generated_before_pruning: usize,
    pub retained_after_pruning: usize,
}

impl RuleSet {
    pub fn len(&self) -> usize {
        self.rules.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rules.is_empty()
    }
}

fn insert_sorted(items: &[ItemId], extra: ItemId) -> Vec<ItemId> {
    let mut out = Vec::with_capacity(items.len() + 1);
    let pos = items.partition_point(|&id| id < extra);
    out.extend_from_slice(&items[..pos]);
    out.push(extra);
    out.extend_from_slice(&items[pos..]);
    out
}

/// Metrics of `A -> K` counted directly from the database. An empty
/// antecedent is allowed and gives the baseline rule with `C = S(K)`.
pub fn compute_metrics(
    antecedent: &[ItemId],
    consequent: ItemId,
    db: &TransactionDatabase,
) -> Result<Rule> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let item_count = db.dictionary().len();
    let mut a = antecedent.to_vec();
    a.sort_unstable();
    for w in a.windows(2) {
        if w[0] == w[1] {
            return Err(Error::DuplicateItem(w[0]));
        }
    }
    if let Some(&bad) = a
        .iter()
        .chain(std::iter::once(&consequent))
        .find(|&&id| id as usize >= item_count)
    {
        return Err(Error::InvalidItem(bad));
    }
    if a.contains(&consequent) {
        return Err(Error::InvalidParams(format!(
            "consequent {consequent} also appears in the antecedent"
        )));
    }
    let count_a = db.count(&a);
    if count_a == 0 {
        return Err(Error::UndefinedConfidence);
    }
    let count_k = db.count(&[consequent]);
    let count_ak = db.count(&insert_sorted(&a, consequent));
    Ok(Rule::from_counts(
        a,
        consequent,
        db.n(),
        count_a,
        count_k,
        count_ak,
    ))
}

/// One candidate rule per frequent itemset containing `rhs` (antecedent
/// non-empty), kept when confidence and lift reach their thresholds, then
/// pruned and sorted.
pub fn generate_rules(
    freq: &FrequentItemsetTable,
    db: &TransactionDatabase,
    rhs: ItemId,
    min_confidence: f64,
    min_lift: f64,
) -> Result<RuleSet> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    if db.dictionary().item(rhs).is_none() {
        return Err(Error::InvalidItem(rhs));
    }
    let n = db.n();
    let count_k = db.count(&[rhs]);
    let candidates: Vec<&crate::model::ItemsetSupport> = freq
        .levels
        .iter()
        .skip(1)
        .flatten()
        .filter(|s| s.itemset.contains(&rhs))
        .collect();
    let rules: Vec<Rule> = candidates
        .par_iter()
        .filter_map(|s| {
            let antecedent: Vec<ItemId> =
                s.itemset.iter().copied().filter(|&id| id != rhs).collect();
            let count_a = db.count(&antecedent);
            let rule = Rule::from_counts(antecedent, rhs, n, count_a, count_k, s.count);
            (rule.confidence >= min_confidence && rule.lift >= min_lift).then_some(rule)
        })
        .collect();
    let generated = rules.len();
    let set = RuleSet {
        retained_after_pruning: generated,
        rules,
        thresholds: RuleThresholds {
            rhs,
            min_confidence,
            min_lift,
        },
        generated_before_pruning: generated,
    };
    Ok(sort_rules(prune_redundant(set, db)))
}

/// Whether `rule` strictly beats the confidence of every rule obtained by
/// dropping antecedent items, down to the empty antecedent (`C = S(K)`).
pub fn improves_on_all_generalizations(rule: &Rule, db: &TransactionDatabase) -> bool {
    let a = &rule.antecedent;
    let full = (1u64 << a.len()) - 1;
    let own = rule.confidence_fraction();
    (0..full).all(|mask| {
        let sub: Vec<ItemId> = a
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, &id)| id)
            .collect();
        let count_sub = db.count(&sub);
        let count_sub_k = db.count(&insert_sorted(&sub, rule.consequent));
        cmp_fraction((u128::from(count_sub_k), u128::from(count_sub)), own) == Ordering::Less
    })
}

/// Drops every rule that does not strictly improve on all of its
/// generalizations. Sub-rule confidences come from the database, whether or
/// not the sub-rule itself passed the thresholds.
pub fn prune_redundant(rules: RuleSet, db: &TransactionDatabase) -> RuleSet {
    let kept: Vec<Rule> = rules
        .rules
        .into_par_iter()
        .filter(|r| improves_on_all_generalizations(r, db))
        .collect();
    RuleSet {
        retained_after_pruning: kept.len(),
        rules: kept,
        ..rules
    }
}

pub fn sort_rules(mut rules: RuleSet) -> RuleSet {
    rules.rules.sort_by(rule_order);
    rules
}
