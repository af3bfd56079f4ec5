use crate::error::{Error, Result};
use crate::model::TransactionDatabase;

/// Largest number of categories a variable may have (one mask bit each).
pub const MAX_LEVELS: usize = 64;

/// Column-major table of category codes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategoricalTable {
    names: Vec<String>,
    levels: Vec<Vec<String>>,
    columns: Vec<Vec<u8>>,
    rows: usize,
}

impl CategoricalTable {
    /// `columns[v][r]` indexes `levels[v]`.
    pub fn new(
        names: Vec<String>,
        levels: Vec<Vec<String>>,
        columns: Vec<Vec<u8>>,
    ) -> Result<Self> {
        if names.len() != levels.len() || names.len() != columns.len() {
            return Err(Error::InvalidParams(
                "names, levels and columns differ in length".into(),
            ));
        }
        let rows = columns.first().map_or(0, Vec::len);
        for ((name, lv), col) in names.iter().zip(&levels).zip(&columns) {
            if lv.len() > MAX_LEVELS {
                return Err(Error::InvalidParams(format!(
                    "{name} has {} categories; at most {MAX_LEVELS} supported",
                    lv.len()
                )));
            }
            if col.len() != rows {
                return Err(Error::InvalidParams(format!(
                    "column {name} has a different length"
                )));
            }
            if col.iter().any(|&c| c as usize >= lv.len()) {
                return Err(Error::InvalidParams(format!(
                    "column {name} has an undeclared code"
                )));
            }
        }
        Ok(CategoricalTable {
            names,
            levels,
            columns,
            rows,
        })
    }

    /// One column per database column, codes in dictionary order.
    pub fn from_database(db: &TransactionDatabase) -> Result<Self> {
        let dict = db.dictionary();
        let mut names = Vec::new();
        let mut levels = Vec::new();
        let mut columns = Vec::new();
        for name in db.columns() {
            let range = dict
                .variable_items(name)
                .ok_or_else(|| Error::UnknownVariable(name.clone()))?;
            levels.push(
                range
                    .clone()
                    .map(|id| dict.items()[id as usize].category.clone())
                    .collect::<Vec<_>>(),
            );
            let var = dict
                .variable_index(name)
                .expect("column is a dictionary variable");
            columns.push(
                db.transactions()
                    .iter()
                    .map(|t| {
                        let id = t.items[var];
                        (id - range.start) as u8
                    })
                    .collect(),
            );
            names.push(name.clone());
        }
        if levels.iter().any(|l| l.len() > MAX_LEVELS) {
            return Err(Error::InvalidParams(format!(
                "a variable exceeds {MAX_LEVELS} categories"
            )));
        }
        Ok(CategoricalTable {
            names,
            levels,
            columns,
            rows: db.transactions().len(),
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn levels(&self, var: usize) -> &[String] {
        &self.levels[var]
    }

    pub fn column(&self, var: usize) -> &[u8] {
        &self.columns[var]
    }
}
