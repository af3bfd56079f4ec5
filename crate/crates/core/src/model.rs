//! Categorical transaction model: items, the item dictionary, transactions
//! and exact support counting.
//!
//! An item is a `(variable, category)` pair. Every record contributes exactly
//! one item per variable, so a transaction is a sorted list of item ids with
//! one entry per dictionary variable. Support counts are taken against the
//! whole database size `N`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::bitmap::Bitmap;
use crate::error::{Error, Result};

pub type ItemId = u32;

/// A record as a `variable -> category` map.
pub type Record = BTreeMap<String, String>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Item {
    pub id: ItemId,
    pub variable: String,
    pub category: String,
}

impl Item {
    /// `variable=category`, the form accepted on the command line.
    pub fn label(&self) -> String {
        format!("{}={}", self.variable, self.category)
    }
}

/// Bijection between `(variable, category)` pairs and dense item ids.
///
/// Ids are assigned in ascending lexicographic order of `(variable, category)`
/// when the dictionary is built, so the items of one variable occupy a
/// contiguous id range.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ItemDictionary {
    items: Vec<Item>,
    variables: Vec<String>,
    variable_of: Vec<u32>,
    ranges: Vec<std::ops::Range<ItemId>>,
}

impl ItemDictionary {
    /// Freezes a set of observed pairs into a dictionary.
    pub fn from_pairs<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (String, String)>,
    {
        let mut by_var: BTreeMap<String, std::collections::BTreeSet<String>> = BTreeMap::new();
        for (variable, category) in pairs {
            by_var.entry(variable).or_default().insert(category);
        }
        let mut dict = ItemDictionary::default();
        for (var_index, (variable, categories)) in by_var.into_iter().enumerate() {
            let start = dict.items.len() as ItemId;
            for category in categories {
                let id = dict.items.len() as ItemId;
                dict.items.push(Item {
                    id,
                    variable: variable.clone(),
                    category,
                });
                dict.variable_of.push(var_index as u32);
            }
            dict.ranges.push(start..dict.items.len() as ItemId);
            dict.variables.push(variable);
        }
        dict
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn items(&self) -> &[Item] {
        &self.items
    }

    pub fn item(&self, id: ItemId) -> Option<&Item> {
        self.items.get(id as usize)
    }

    /// Variable names in ascending order.
    pub fn variables(&self) -> &[String] {
        &self.variables
    }

    pub fn variable_index(&self, variable: &str) -> Option<usize> {
        self.variables
            .binary_search_by(|v| v.as_str().cmp(variable))
            .ok()
    }

    /// Index (into [`variables`](Self::variables)) of the variable an item belongs to.
    pub fn variable_of(&self, id: ItemId) -> usize {
        self.variable_of[id as usize] as usize
    }

    /// Item ids of one variable, ascending by category.
    pub fn variable_items(&self, variable: &str) -> Option<std::ops::Range<ItemId>> {
        self.variable_index(variable)
            .map(|i| self.ranges[i].clone())
    }

    pub fn lookup(&self, variable: &str, category: &str) -> Option<ItemId> {
        let range = self.variable_items(variable)?;
        let slice = &self.items[range.start as usize..range.end as usize];
        slice
            .binary_search_by(|it| it.category.as_str().cmp(category))
            .ok()
            .map(|i| range.start + i as ItemId)
    }

    /// Looks up `variable=category` (whitespace around `=` is ignored).
    pub fn parse_item(&self, spec: &str) -> Result<ItemId> {
        let (variable, category) = spec.split_once('=').ok_or_else(|| {
            Error::InvalidParams(format!(
                "item {spec:?} is not of the form variable=category"
            ))
        })?;
        let (variable, category) = (variable.trim(), category.trim());
        self.lookup(variable, category)
            .ok_or_else(|| Error::UnknownItem {
                variable: variable.to_string(),
                category: category.to_string(),
            })
    }

    pub fn label(&self, id: ItemId) -> String {
        self.items[id as usize].label()
    }
}

/// Builds the dictionary over the variables of the first record.
///
/// Every record must carry a non-empty category for each of those variables.
pub fn build_dictionary(records: &[Record]) -> Result<ItemDictionary> {
    let first = records
        .first()
        .ok_or_else(|| Error::EmptyInput("no records to build a dictionary from".into()))?;
    let variables: Vec<String> = first.keys().cloned().collect();
    build_dictionary_over(records, &variables)
}

/// Builds the dictionary over an explicit variable list, ignoring other keys.
pub fn build_dictionary_over(records: &[Record], variables: &[String]) -> Result<ItemDictionary> {
    freeze(
        records.iter().enumerate().map(|(i, r)| (i.to_string(), r)),
        variables,
    )
}

fn freeze<'a, I>(records: I, variables: &[String]) -> Result<ItemDictionary>
where
    I: Iterator<Item = (String, &'a Record)>,
{
    if variables.is_empty() {
        return Err(Error::SchemaViolation("no variables declared".into()));
    }
    let mut pairs = Vec::new();
    for (label, record) in records {
        for variable in variables {
            match record.get(variable) {
                Some(category) if !category.is_empty() => {
                    pairs.push((variable.clone(), category.clone()))
                }
                Some(_) => {
                    return Err(Error::SchemaViolation(format!(
                        "record {label} has an empty category for variable {variable}"
                    )))
                }
                None => {
                    return Err(Error::SchemaViolation(format!(
                        "record {label} is missing variable {variable}"
                    )))
                }
            }
        }
    }
    if pairs.is_empty() {
        return Err(Error::EmptyInput(
            "no records to build a dictionary from".into(),
        ));
    }
    Ok(ItemDictionary::from_pairs(pairs))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Transaction {
    pub record_id: String,
    /// Strictly ascending, one item per dictionary variable.
    pub items: Vec<ItemId>,
}

/// Encodes one record into its ascending item-id list.
pub fn encode_record(record: &Record, dict: &ItemDictionary) -> Result<Vec<ItemId>> {
    let mut items = Vec::with_capacity(record.len());
    for (variable, category) in record {
        let id = dict
            .lookup(variable, category)
            .ok_or_else(|| Error::UnknownItem {
                variable: variable.clone(),
                category: category.clone(),
            })?;
        items.push(id);
    }
    if items.len() != dict.variables().len() {
        let missing = dict
            .variables()
            .iter()
            .find(|v| !record.contains_key(*v))
            .cloned()
            .unwrap_or_default();
        return Err(Error::SchemaViolation(format!(
            "record is missing variable {missing}"
        )));
    }
    // BTreeMap iteration is ordered by variable and ids are grouped by variable,
    // so `items` is already ascending.
    debug_assert!(items.windows(2).all(|w| w[0] < w[1]));
    Ok(items)
}

pub fn decode_items(items: &[ItemId], dict: &ItemDictionary) -> Record {
    items
        .iter()
        .map(|&id| {
            let item = &dict.items()[id as usize];
            (item.variable.clone(), item.category.clone())
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemsetSupport {
    pub itemset: Vec<ItemId>,
    pub count: u64,
    pub support: f64,
}

impl ItemsetSupport {
    pub fn new(itemset: Vec<ItemId>, count: u64, n: u64) -> Self {
        ItemsetSupport {
            itemset,
            count,
            support: count as f64 / n as f64,
        }
    }
}

/// The encoded database `T` of `N` transactions.
///
/// Besides the row-wise transactions it keeps one bitmap per item (the
/// vertical layout) so that the count of any itemset is the population count
/// of the AND of its item bitmaps. Immutable once built.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransactionDatabase {
    dictionary: ItemDictionary,
    columns: Vec<String>,
    transactions: Vec<Transaction>,
    index: Vec<Bitmap>,
}

impl TransactionDatabase {
    /// Encodes records over `variables`. An empty record list yields an empty
    /// database that still remembers its column names.
    pub fn from_records(records: &[(String, Record)], variables: &[String]) -> Result<Self> {
        if variables.is_empty() {
            return Err(Error::SchemaViolation("empty variable list".into()));
        }
        if records.is_empty() {
            return Ok(TransactionDatabase {
                dictionary: ItemDictionary::default(),
                columns: variables.to_vec(),
                transactions: Vec::new(),
                index: Vec::new(),
            });
        }
        let dictionary = freeze(records.iter().map(|(id, r)| (id.clone(), r)), variables)?;
        let projected = records.iter().map(|(_, r)| {
            variables
                .iter()
                .filter_map(|v| r.get(v).map(|c| (v.clone(), c.clone())))
                .collect::<Record>()
        });
        let transactions = records
            .iter()
            .zip(projected)
            .map(|((id, _), rec)| {
                Ok(Transaction {
                    record_id: id.clone(),
                    items: encode_record(&rec, &dictionary)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self::assemble(dictionary, variables.to_vec(), transactions))
    }

    fn assemble(
        dictionary: ItemDictionary,
        columns: Vec<String>,
        transactions: Vec<Transaction>,
    ) -> Self {
        let n = transactions.len();
        let mut index = vec![Bitmap::zeros(n); dictionary.len()];
        for (row, t) in transactions.iter().enumerate() {
            for &id in &t.items {
                index[id as usize].set(row);
            }
        }
        TransactionDatabase {
            dictionary,
            columns,
            transactions,
            index,
        }
    }

    pub fn n(&self) -> u64 {
        self.transactions.len() as u64
    }

    pub fn is_empty(&self) -> bool {
        self.transactions.is_empty()
    }

    pub fn dictionary(&self) -> &ItemDictionary {
        &self.dictionary
    }

    /// Variable names in their persisted column order.
    pub fn columns(&self) -> &[String] {
        &self.columns
    }

    pub fn transactions(&self) -> &[Transaction] {
        &self.transactions
    }

    pub fn decode(&self, t: &Transaction) -> Record {
        decode_items(&t.items, &self.dictionary)
    }

    pub fn item_bitmap(&self, id: ItemId) -> &Bitmap {
        &self.index[id as usize]
    }

    /// Count of transactions containing every id in `itemset`. Ids must be
    /// valid; the empty itemset counts every transaction.
    pub fn count(&self, itemset: &[ItemId]) -> u64 {
        match itemset {
            [] => self.n(),
            [a] => self.index[*a as usize].count_ones(),
            [a, b] => self.index[*a as usize].and_count(&self.index[*b as usize]),
            [first, rest @ .., last] => {
                let mut acc = self.index[*first as usize].clone();
                for id in rest {
                    acc.and_assign(&self.index[*id as usize]);
                }
                acc.and_count(&self.index[*last as usize])
            }
        }
    }

    /// Bitmap of the transactions containing every id in `itemset`.
    pub fn cover(&self, itemset: &[ItemId]) -> Bitmap {
        let mut acc = Bitmap::ones(self.transactions.len());
        for &id in itemset {
            acc.and_assign(&self.index[id as usize]);
        }
        acc
    }

    fn validate_itemset(&self, itemset: &[ItemId]) -> Result<Vec<ItemId>> {
        let mut sorted = itemset.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[0] == w[1] {
                return Err(Error::DuplicateItem(w[0]));
            }
        }
        if let Some(&bad) = sorted
            .iter()
            .find(|&&id| id as usize >= self.dictionary.len())
        {
            return Err(Error::InvalidItem(bad));
        }
        Ok(sorted)
    }
}

/// Exact support of an itemset: `count / N`.
pub fn support_count(db: &TransactionDatabase, itemset: &[ItemId]) -> Result<ItemsetSupport> {
    if db.is_empty() {
        return Err(Error::EmptyDatabase);
    }
    let sorted = db.validate_itemset(itemset)?;
    let count = db.count(&sorted);
    Ok(ItemsetSupport::new(sorted, count, db.n()))
}

/// Absolute count of every item, descending by count, ties by ascending id.
pub fn item_frequencies(db: &TransactionDatabase) -> Vec<(ItemId, u64)> {
    let mut freq: Vec<(ItemId, u64)> = (0..db.dictionary().len() as ItemId)
        .map(|id| (id, db.item_bitmap(id).count_ones()))
        .collect();
    freq.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    freq
}
