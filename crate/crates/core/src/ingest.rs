//! Source-table preparation: join on a shared key, recode and band values,
//! filter, and encode the result as a transaction database.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Record, TransactionDatabase};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TableSpec {
    pub name: String,
    pub path: PathBuf,
    pub key: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VariableSpec {
    pub name: String,
    pub table: String,
    pub column: String,
}

/// Half-open numeric interval `[lower, upper)`; no upper bound when `upper` is absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub lower: f64,
    #[serde(default)]
    pub upper: Option<f64>,
    pub label: String,
}

impl Band {
    fn contains(&self, x: f64) -> bool {
        x >= self.lower && self.upper.is_none_or(|u| x < u)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterSpec {
    pub variable: String,
    pub allowed: Vec<String>,
}

fn default_missing() -> String {
    "unknown".to_string()
}

fn default_delimiter() -> char {
    ','
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemaConfig {
    pub tables: Vec<TableSpec>,
    pub variables: Vec<VariableSpec>,
    #[serde(default)]
    pub recodes: BTreeMap<String, BTreeMap<String, String>>,
    #[serde(default)]
    pub bands: BTreeMap<String, Vec<Band>>,
    #[serde(default)]
    pub filters: Vec<FilterSpec>,
    #[serde(default = "default_missing")]
    pub missing_label: String,
    #[serde(default = "default_delimiter")]
    pub delimiter: char,
}

impl SchemaConfig {
    /// Reads a JSON config. Relative table paths resolve against the
    /// config file's directory.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut config: SchemaConfig = serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        let base = path.parent().unwrap_or(Path::new(""));
        for t in &mut config.tables {
            if t.path.is_relative() {
                t.path = base.join(&t.path);
            }
        }
        config.validate()?;
        Ok(config)
    }

    pub fn variable_names(&self) -> Vec<String> {
        self.variables.iter().map(|v| v.name.clone()).collect()
    }

    fn declares(&self, variable: &str) -> bool {
        self.variables.iter().any(|v| v.name == variable)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::SchemaViolation(m));
        if self.tables.is_empty() {
            return bad("no tables declared".into());
        }
        if self.variables.is_empty() {
            return bad("no variables declared".into());
        }
        if !self.delimiter.is_ascii() {
            return bad(format!("delimiter {:?} is not ASCII", self.delimiter));
        }
        let mut tables = HashSet::new();
        for t in &self.tables {
            if !tables.insert(t.name.as_str()) {
                return bad(format!("table {} declared twice", t.name));
            }
        }
        let mut names = HashSet::new();
        for v in &self.variables {
            if !names.insert(v.name.as_str()) {
                return bad(format!("variable {} declared twice", v.name));
            }
            if !tables.contains(v.table.as_str()) {
                return bad(format!(
                    "variable {} reads undeclared table {}",
                    v.name, v.table
                ));
            }
        }
        for var in self.recodes.keys().chain(self.bands.keys()) {
            if !self.declares(var) {
                return bad(format!("recode or band for undeclared variable {var}"));
            }
        }
        for f in &self.filters {
            if !self.declares(&f.variable) {
                return bad(format!("filter on undeclared variable {}", f.variable));
            }
        }
        for (var, bands) in &self.bands {
            for (i, b) in bands.iter().enumerate() {
                if !b.lower.is_finite() || b.upper.is_some_and(|u| u.is_nan() || u <= b.lower) {
                    return bad(format!("band {} of {var} is empty or not finite", b.label));
                }
                if let Some(next) = bands.get(i + 1) {
                    match b.upper {
                        Some(u) if u <= next.lower => {}
                        _ => return bad(format!("bands of {var} overlap or are out of order")),
                    }
                }
            }
        }
        Ok(())
    }
}

/// Per-stage bookkeeping carried alongside the records.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub rows_read: BTreeMap<String, u64>,
    pub duplicate_keys: BTreeMap<String, u64>,
    /// Keys seen in some table but missing from this one.
    pub unmatched_keys: BTreeMap<String, u64>,
    pub joined: u64,
    pub missing_values: BTreeMap<String, u64>,
    pub unmapped_values: BTreeMap<String, u64>,
    pub unparseable_values: BTreeMap<String, u64>,
    /// `(variable, dropped)` in filter order.
    pub filter_drops: Vec<(String, u64)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordSet {
    pub records: Vec<(String, Record)>,
    pub counters: Counters,
}

struct TableRows {
    order: Vec<String>,
    rows: HashMap<String, Vec<String>>,
}

fn csv_reader(path: &Path, delimiter: char) -> Result<csv::Reader<File>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::ReaderBuilder::new()
        .delimiter(delimiter as u8)
        .has_headers(true)
        .from_reader(file))
}

fn parse_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse {
            path: path.to_path_buf(),
            message: format!("{other:?}"),
        },
    }
}

fn read_table(
    spec: &TableSpec,
    columns: &[&str],
    delimiter: char,
    counters: &mut Counters,
) -> Result<TableRows> {
    let path = spec.path.as_path();
    let mut rdr = csv_reader(path, delimiter)?;
    let header = rdr.headers().map_err(|e| parse_error(path, e))?.clone();
    let find = |col: &str| {
        header.iter().position(|h| h == col).ok_or_else(|| {
            Error::SchemaViolation(format!(
                "table {} ({}) has no column {col}",
                spec.name,
                path.display()
            ))
        })
    };
    let key_idx = find(&spec.key)?;
    let idx: Vec<usize> = columns.iter().map(|c| find(c)).collect::<Result<_>>()?;

    let mut out = TableRows {
        order: Vec::new(),
        rows: HashMap::new(),
    };
    let mut read = 0u64;
    let mut dups = 0u64;
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(path, e))?;
        read += 1;
        let key = rec.get(key_idx).unwrap_or("").to_string();
        if out.rows.contains_key(&key) {
            dups += 1;
            continue;
        }
        let values = idx
            .iter()
            .map(|&i| rec.get(i).unwrap_or("").to_string())
            .collect();
        out.order.push(key.clone());
        out.rows.insert(key, values);
    }
    counters.rows_read.insert(spec.name.clone(), read);
    counters.duplicate_keys.insert(spec.name.clone(), dups);
    Ok(out)
}

/// Inner join of all tables on their key columns. Records follow the first
/// table's row order; within a table the first row of a repeated key wins.
pub fn load_and_join(config: &SchemaConfig) -> Result<RecordSet> {
    config.validate()?;
    let mut counters = Counters::default();
    let mut tables = Vec::with_capacity(config.tables.len());
    for spec in &config.tables {
        let columns: Vec<&str> = config
            .variables
            .iter()
            .filter(|v| v.table == spec.name)
            .map(|v| v.column.as_str())
            .collect();
        tables.push(read_table(spec, &columns, config.delimiter, &mut counters)?);
    }

    let mut all_keys: HashSet<&str> = HashSet::new();
    for t in &tables {
        all_keys.extend(t.order.iter().map(String::as_str));
    }
    for (spec, t) in config.tables.iter().zip(&tables) {
        let missing = all_keys
            .iter()
            .filter(|k| !t.rows.contains_key(**k))
            .count();
        counters
            .unmatched_keys
            .insert(spec.name.clone(), missing as u64);
    }

    let mut records = Vec::new();
    for key in &tables[0].order {
        if !tables.iter().all(|t| t.rows.contains_key(key)) {
            continue;
        }
        let mut record = Record::new();
        for (spec, t) in config.tables.iter().zip(&tables) {
            let values = &t.rows[key];
            let names = config.variables.iter().filter(|v| v.table == spec.name);
            for (var, value) in names.zip(values) {
                record.insert(var.name.clone(), value.clone());
            }
        }
        records.push((key.clone(), record));
    }
    counters.joined = records.len() as u64;
    Ok(RecordSet { records, counters })
}

/// Maps raw values to categories. Empty values become the missing label; a
/// recode entry wins over bands; values a recode map or band list cannot
/// place also become the missing label and are counted.
pub fn apply_recode(rs: &RecordSet, config: &SchemaConfig) -> RecordSet {
    let mut counters = rs.counters.clone();
    let missing = &config.missing_label;
    let bump = |map: &mut BTreeMap<String, u64>, var: &str| {
        *map.entry(var.to_string()).or_insert(0) += 1;
    };
    let records = rs
        .records
        .iter()
        .map(|(id, record)| {
            let mut out = Record::new();
            for v in &config.variables {
                let raw = record.get(&v.name).map_or("", |s| s.trim());
                let recode = config.recodes.get(&v.name);
                let value = if raw.is_empty() {
                    bump(&mut counters.missing_values, &v.name);
                    missing.clone()
                } else if let Some(mapped) = recode.and_then(|m| m.get(raw)) {
                    mapped.clone()
                } else if let Some(bands) = config.bands.get(&v.name) {
                    let hit = raw
                        .parse::<f64>()
                        .ok()
                        .and_then(|x| bands.iter().find(|b| b.contains(x)));
                    match hit {
                        Some(b) => b.label.clone(),
                        None => {
                            bump(&mut counters.unparseable_values, &v.name);
                            missing.clone()
                        }
                    }
                } else if recode.is_some() {
                    bump(&mut counters.unmapped_values, &v.name);
                    missing.clone()
                } else {
                    raw.to_string()
                };
                out.insert(v.name.clone(), value);
            }
            (id.clone(), out)
        })
        .collect();
    RecordSet { records, counters }
}

/// Keeps records whose filtered variables hold allowed categories. A dropped
/// record is charged to the first filter it fails.
pub fn apply_filters(rs: &RecordSet, config: &SchemaConfig) -> Result<RecordSet> {
    for f in &config.filters {
        if !config.declares(&f.variable) {
            return Err(Error::SchemaViolation(format!(
                "filter on undeclared variable {}",
                f.variable
            )));
        }
    }
    let allowed: Vec<HashSet<&str>> = config
        .filters
        .iter()
        .map(|f| f.allowed.iter().map(String::as_str).collect())
        .collect();
    let mut drops = vec![0u64; config.filters.len()];
    let records = rs
        .records
        .iter()
        .filter(|(_, record)| {
            let failed = config.filters.iter().zip(&allowed).position(|(f, ok)| {
                !record
                    .get(&f.variable)
                    .is_some_and(|value| ok.contains(value.as_str()))
            });
            match failed {
                Some(i) => {
                    drops[i] += 1;
                    false
                }
                None => true,
            }
        })
        .cloned()
        .collect();
    let mut counters = rs.counters.clone();
    counters.filter_drops.extend(
        config
            .filters
            .iter()
            .zip(drops)
            .map(|(f, n)| (f.variable.clone(), n)),
    );
    Ok(RecordSet { records, counters })
}

pub fn build_database(rs: &RecordSet, variables: &[String]) -> Result<TransactionDatabase> {
    TransactionDatabase::from_records(&rs.records, variables)
}

/// Join, recode, filter and encode over every declared variable.
pub fn run_pipeline(config: &SchemaConfig) -> Result<(TransactionDatabase, Counters)> {
    let joined = load_and_join(config)?;
    let recoded = apply_recode(&joined, config);
    let filtered = apply_filters(&recoded, config)?;
    let db = build_database(&filtered, &config.variable_names())?;
    Ok((db, filtered.counters))
}

/// Writes `record_id` plus one category column per variable.
pub fn write_database_csv<W: Write>(db: &TransactionDatabase, out: W) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["record_id".to_string()];
    header.extend(db.columns().iter().cloned());
    w.write_record(&header)?;
    for t in db.transactions() {
        let record = db.decode(t);
        let mut row = vec![t.record_id.clone()];
        row.extend(db.columns().iter().map(|c| record[c].clone()));
        w.write_record(&row)?;
    }
    w.flush()
}

pub fn save_database(db: &TransactionDatabase, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_database_csv(db, &mut w)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

/// Reads a database written by [`save_database`].
pub fn load_database(path: &Path) -> Result<TransactionDatabase> {
    let mut rdr = csv_reader(path, ',')?;
    let header = rdr.headers().map_err(|e| parse_error(path, e))?.clone();
    if header.get(0) != Some("record_id") {
        return Err(Error::SchemaViolation(format!(
            "{}: first column must be record_id",
            path.display()
        )));
    }
    let columns: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut records = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| parse_error(path, e))?;
        let id = rec.get(0).unwrap_or("").to_string();
        let record: Record = columns
            .iter()
            .cloned()
            .zip(rec.iter().skip(1).map(str::to_string))
            .collect();
        records.push((id, record));
    }
    TransactionDatabase::from_records(&records, &columns)
}
