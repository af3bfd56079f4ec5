//! Brute-force reference for mining, rule metrics, pruning and ordering.
//!
//! Enumerates every itemset up to `max_len` and counts each one with a full
//! scan of the transactions, held as one `u64` item mask per row. Ordering
//! and pruning comparisons use exact rationals. Meant for equivalence tests
//! on small databases only.

use num_rational::Ratio;

use crate::error::{Error, Result};
use crate::miner::{FrequentItemsetTable, MiningParams};
use crate::model::{ItemId, ItemsetSupport, TransactionDatabase};
use crate::rulegen::{Rule, RuleSet, RuleThresholds};

/// Largest item universe the oracle accepts (one bit per item).
pub const MAX_ORACLE_ITEMS: usize = 64;

struct Scan {
    rows: Vec<u64>,
    items: usize,
    n: u64,
}

impl Scan {
    fn new(db: &TransactionDatabase) -> Result<Self> {
        let items = db.dictionary().len();
        if items > MAX_ORACLE_ITEMS {
            return Err(Error::TooLargeForOracle {
                items,
                bound: MAX_ORACLE_ITEMS,
            });
        }
        if db.is_empty() {
            return Err(Error::EmptyDatabase);
        }
        let rows = db
            .transactions()
            .iter()
            .map(|t| t.items.iter().fold(0u64, |m, &id| m | (1u64 << id)))
            .collect();
        Ok(Scan {
            rows,
            items,
            n: db.n(),
        })
    }

    fn count(&self, set: &[ItemId]) -> u64 {
        let mask = set.iter().fold(0u64, |m, &id| m | (1u64 << id));
        self.rows.iter().filter(|&&row| row & mask == mask).count() as u64
    }
}

/// All `k`-combinations of `pool`, in lexicographic order.
fn combinations(pool: &[ItemId], k: usize) -> Vec<Vec<ItemId>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(k);
    fn walk(pool: &[ItemId], k: usize, current: &mut Vec<ItemId>, out: &mut Vec<Vec<ItemId>>) {
        if current.len() == k {
            out.push(current.clone());
            return;
        }
        for (i, &id) in pool.iter().enumerate() {
            current.push(id);
            walk(&pool[i + 1..], k, current, out);
            current.pop();
        }
    }
    walk(pool, k, &mut current, &mut out);
    out
}

fn frequent(count: u64, n: u64, min_support: f64) -> bool {
    count >= 1 && (count as f64) / (n as f64) >= min_support
}

pub fn brute_force_frequent(
    db: &TransactionDatabase,
    params: &MiningParams,
) -> Result<FrequentItemsetTable> {
    params.validate()?;
    let scan = Scan::new(db)?;
    let universe: Vec<ItemId> = (0..scan.items as ItemId).collect();
    let levels = (1..=params.max_len)
        .map(|k| {
            combinations(&universe, k)
                .into_iter()
                .filter(|set| match params.must_include {
                    Some(m) if k >= 2 => set.contains(&m),
                    _ => true,
                })
                .filter_map(|set| {
                    let count = scan.count(&set);
                    frequent(count, scan.n, params.min_support).then(|| ItemsetSupport {
                        support: count as f64 / scan.n as f64,
                        itemset: set,
                        count,
                    })
                })
                .collect()
        })
        .collect();
    Ok(FrequentItemsetTable { n: scan.n, levels })
}

fn ratio(num: u64, den: u64) -> Ratio<u128> {
    Ratio::new(u128::from(num), u128::from(den))
}

pub fn brute_force_rules(
    db: &TransactionDatabase,
    params: &MiningParams,
    rhs: ItemId,
) -> Result<RuleSet> {
    params.validate()?;
    let scan = Scan::new(db)?;
    let thresholds = RuleThresholds {
        rhs,
        min_confidence: params.min_confidence,
        min_lift: params.min_lift,
    };
    let empty = RuleSet {
        rules: Vec::new(),
        thresholds: thresholds.clone(),
        generated_before_pruning: 0,
        retained_after_pruning: 0,
    };
    if rhs as usize >= scan.items {
        return Ok(empty);
    }
    let n = scan.n;
    let count_k = scan.count(&[rhs]);
    if count_k == 0 {
        return Ok(empty);
    }
    let others: Vec<ItemId> = (0..scan.items as ItemId).filter(|&id| id != rhs).collect();

    let mut candidates = Vec::new();
    for size in 1..params.max_len {
        for antecedent in combinations(&others, size) {
            let mut whole = antecedent.clone();
            whole.push(rhs);
            whole.sort_unstable();
            let count_ak = scan.count(&whole);
            if !frequent(count_ak, n, params.min_support) {
                continue;
            }
            let count_a = scan.count(&antecedent);
            // S(A->K) / S(A) and S(A->K) / (S(A) * S(K)), with the N's cancelled.
            let confidence = count_ak as f64 / count_a as f64;
            let lift = (u128::from(count_ak) * u128::from(n)) as f64
                / (u128::from(count_a) * u128::from(count_k)) as f64;
            if confidence >= params.min_confidence && lift >= params.min_lift {
                candidates.push(Rule {
                    antecedent,
                    consequent: rhs,
                    n,
                    count_a,
                    count_k,
                    count_ak,
                    support: count_ak as f64 / n as f64,
                    confidence,
                    lift,
                });
            }
        }
    }
    let generated = candidates.len();

    let mut kept: Vec<Rule> = candidates
        .into_iter()
        .filter(|rule| {
            let own = ratio(rule.count_ak, rule.count_a);
            let m = rule.antecedent.len();
            (0..m).all(|size| {
                combinations(&rule.antecedent, size).into_iter().all(|sub| {
                    let mut with_k = sub.clone();
                    with_k.push(rhs);
                    ratio(scan.count(&with_k), scan.count(&sub)) < own
                })
            })
        })
        .collect();

    let key = |r: &Rule| {
        (
            Ratio::new(
                u128::from(r.count_ak) * u128::from(n),
                u128::from(r.count_a) * u128::from(count_k),
            ),
            ratio(r.count_ak, r.count_a),
            ratio(r.count_ak, n),
        )
    };
    kept.sort_by(|a, b| {
        let (ka, kb) = (key(a), key(b));
        kb.0.cmp(&ka.0)
            .then(kb.1.cmp(&ka.1))
            .then(kb.2.cmp(&ka.2))
            .then_with(|| a.antecedent.cmp(&b.antecedent))
    });
    Ok(RuleSet {
        retained_after_pruning: kept.len(),
        rules: kept,
        thresholds,
        generated_before_pruning: generated,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::miner::mine_frequent;
    use crate::model::Record;
    use crate::rulegen::generate_rules;

    fn db(rows: &[&[(&str, &str)]]) -> TransactionDatabase {
        let records: Vec<(String, Record)> = rows
            .iter()
            .enumerate()
            .map(|(i, r)| {
                (
                    i.to_string(),
                    r.iter()
                        .map(|(v, c)| (v.to_string(), c.to_string()))
                        .collect(),
                )
            })
            .collect();
        let vars: Vec<String> = records[0].1.keys().cloned().collect();
        TransactionDatabase::from_records(&records, &vars).unwrap()
    }

    #[test]
    fn matches_miner_on_two_transactions() {
        let db = db(&[&[("x", "a"), ("y", "b")], &[("x", "a"), ("y", "c")]]);
        let params = MiningParams {
            min_support: 0.5,
            max_len: 3,
            ..Default::default()
        };
        assert_eq!(
            brute_force_frequent(&db, &params).unwrap(),
            mine_frequent(&db, &params).unwrap()
        );
    }

    #[test]
    fn empty_database_and_bound() {
        let empty = TransactionDatabase::from_records(&[], &["x".into()]).unwrap();
        assert!(matches!(
            brute_force_frequent(&empty, &MiningParams::default()),
            Err(Error::EmptyDatabase)
        ));
        let wide: Vec<(String, Record)> = (0..65)
            .map(|i| {
                (
                    i.to_string(),
                    [("x".to_string(), format!("c{i}"))].into_iter().collect(),
                )
            })
            .collect();
        let wide = TransactionDatabase::from_records(&wide, &["x".into()]).unwrap();
        assert!(matches!(
            brute_force_frequent(&wide, &MiningParams::default()),
            Err(Error::TooLargeForOracle { items: 65, .. })
        ));
    }

    #[test]
    fn improving_pair_survives_in_both() {
        // {x=1,y=1} -> k=1 has confidence 0.9 against 0.8, 0.5 and S(k) = 0.4.
        let mut rows: Vec<[(&str, &str); 3]> = Vec::new();
        for (x, y, k, times) in [
            ("1", "1", "1", 9),
            ("1", "1", "0", 1),
            ("1", "0", "1", 7),
            ("1", "0", "0", 3),
            ("0", "1", "1", 1),
            ("0", "1", "0", 9),
            ("0", "0", "1", 3),
            ("0", "0", "0", 17),
        ] {
            for _ in 0..times {
                rows.push([("x", x), ("y", y), ("k", k)]);
            }
        }
        let refs: Vec<&[(&str, &str)]> = rows.iter().map(|r| r.as_slice()).collect();
        let db = db(&refs);
        let d = db.dictionary();
        let k1 = d.lookup("k", "1").unwrap();
        let pair = vec![d.lookup("x", "1").unwrap(), d.lookup("y", "1").unwrap()];
        let params = MiningParams {
            min_support: 0.0,
            max_len: 3,
            must_include: Some(k1),
            min_confidence: 0.0,
            min_lift: 0.0,
        };
        let oracle = brute_force_rules(&db, &params, k1).unwrap();
        let freq = mine_frequent(&db, &params).unwrap();
        let fast = generate_rules(&freq, &db, k1, 0.0, 0.0).unwrap();
        assert!(oracle.rules.iter().any(|r| r.antecedent == pair));
        assert_eq!(oracle, fast);
    }

    #[test]
    fn zero_thresholds_count_identity() {
        let db = db(&[
            &[("x", "a"), ("y", "b"), ("k", "1")],
            &[("x", "a"), ("y", "c"), ("k", "1")],
            &[("x", "d"), ("y", "c"), ("k", "0")],
        ]);
        let k1 = db.dictionary().lookup("k", "1").unwrap();
        let params = MiningParams {
            min_support: 0.0,
            max_len: 3,
            must_include: Some(k1),
            min_confidence: 0.0,
            min_lift: 0.0,
        };
        let rules = brute_force_rules(&db, &params, k1).unwrap();
        let freq = brute_force_frequent(&db, &params).unwrap();
        let with_rhs = freq.iter().filter(|s| s.itemset.len() >= 2).count();
        assert_eq!(rules.generated_before_pruning, with_rhs);
    }

    #[test]
    fn absent_rhs_gives_empty_set() {
        let db = db(&[&[("x", "a")]]);
        let rules = brute_force_rules(&db, &MiningParams::default(), 7).unwrap();
        assert!(rules.is_empty());
    }
}
