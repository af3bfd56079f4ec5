//! Random-forest variable screening with permutation importance.
//!
//! Importance of a predictor is the mean, over trees, of the drop in the
//! tree's out-of-bag accuracy when that predictor's values are shuffled among
//! the tree's out-of-bag records. Values are raw accuracy fractions.

mod table;
mod tree;

use std::io::Write;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use table::{CategoricalTable, MAX_LEVELS};
pub use tree::{Node, Tree, EXHAUSTIVE_ARITY, RANDOM_PARTITIONS};

/// Stream domain for permutation passes; training streams use domain 0.
const PERMUTATION_DOMAIN: u64 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub tree_count: usize,
    /// Predictors tried per split; `None` means `max(1, ⌊√p⌋)`.
    pub mtry: Option<usize>,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            tree_count: 500,
            mtry: None,
            max_depth: None,
            min_leaf: 1,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn resolved_mtry(&self, predictors: usize) -> usize {
        self.mtry
            .unwrap_or_else(|| ((predictors as f64).sqrt().floor() as usize).max(1))
    }

    fn validate(&self, predictors: usize) -> Result<()> {
        if self.tree_count == 0 {
            return Err(Error::InvalidParams("tree_count must be at least 1".into()));
        }
        if self.min_leaf == 0 {
            return Err(Error::InvalidParams("min_leaf must be at least 1".into()));
        }
        let m = self.resolved_mtry(predictors);
        if m == 0 || m > predictors {
            return Err(Error::InvalidParams(format!(
                "mtry {m} outside 1..={predictors}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForestModel {
    pub response: String,
    pub classes: Vec<String>,
    /// Table column indices of the predictors, in tree variable order.
    pub predictors: Vec<usize>,
    pub trees: Vec<Tree>,
    /// Ascending out-of-bag row indices per tree.
    pub oob: Vec<Vec<u32>>,
    pub params: ForestParams,
}

fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Fits `tree_count` trees predicting `response` from every other column.
pub fn fit_forest(
    table: &CategoricalTable,
    response: &str,
    params: &ForestParams,
) -> Result<ForestModel> {
    let y_idx = table
        .index_of(response)
        .ok_or_else(|| Error::UnknownVariable(response.to_string()))?;
    if table.rows() == 0 {
        return Err(Error::EmptyInput("table has no records".into()));
    }
    let y = table.column(y_idx);
    let classes = table.levels(y_idx).to_vec();
    let mut seen = vec![false; classes.len()];
    y.iter().for_each(|&c| seen[c as usize] = true);
    if seen.iter().filter(|&&s| s).count() < 2 || table.rows() < 2 {
        return Err(Error::DegenerateResponse(response.to_string()));
    }
    let predictors: Vec<usize> = (0..table.names().len()).filter(|&v| v != y_idx).collect();
    if predictors.is_empty() {
        return Err(Error::EmptyInput("no predictor variables".into()));
    }
    params.validate(predictors.len())?;
    let settings = tree::TreeSettings {
        mtry: params.resolved_mtry(predictors.len()),
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
    };

    let n = table.rows();
    let grown: Vec<(Tree, Vec<u32>)> = (0..params.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(params.seed, t as u64);
            let bag: Vec<u32> = (0..n).map(|_| rng.gen_range(0..n as u32)).collect();
            let mut in_bag = vec![false; n];
            bag.iter().for_each(|&r| in_bag[r as usize] = true);
            let oob = (0..n as u32).filter(|&r| !in_bag[r as usize]).collect();
            let tree = tree::grow(
                table,
                &predictors,
                y,
                classes.len(),
                bag,
                &settings,
                &mut rng,
            );
            (tree, oob)
        })
        .collect();
    let (trees, oob) = grown.into_iter().unzip();
    Ok(ForestModel {
        response: response.to_string(),
        classes,
        predictors,
        trees,
        oob,
        params: params.clone(),
    })
}

impl ForestModel {
    fn predict_row(&self, tree: &Tree, table: &CategoricalTable, row: usize) -> u8 {
        tree.predict(|v| table.column(self.predictors[v])[row])
    }

    /// Majority-vote accuracy over records that are out of bag for at least
    /// one tree; `None` if there are none.
    pub fn oob_accuracy(&self, table: &CategoricalTable) -> Option<f64> {
        let y_idx = table.index_of(&self.response)?;
        let y = table.column(y_idx);
        let k = self.classes.len();
        let mut votes = vec![0u32; table.rows() * k];
        for (tree, oob) in self.trees.iter().zip(&self.oob) {
            for &r in oob {
                let p = self.predict_row(tree, table, r as usize);
                votes[r as usize * k + p as usize] += 1;
            }
        }
        let (mut voted, mut correct) = (0u64, 0u64);
        for (row, v) in votes.chunks(k).enumerate() {
            if v.iter().all(|&x| x == 0) {
                continue;
            }
            voted += 1;
            let mut best = 0;
            for c in 1..k {
                if v[c] > v[best] {
                    best = c;
                }
            }
            correct += u64::from(best == y[row] as usize);
        }
        (voted > 0).then(|| correct as f64 / voted as f64)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceEntry {
    pub variable: String,
    pub mda: f64,
}

/// One entry per predictor, highest importance first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableImportance {
    pub entries: Vec<ImportanceEntry>,
}

impl VariableImportance {
    /// Sorts by mda descending; equal values keep their given order.
    pub fn new(mut entries: Vec<ImportanceEntry>) -> Self {
        entries.sort_by(|a, b| b.mda.total_cmp(&a.mda));
        VariableImportance { entries }
    }

    pub fn get(&self, variable: &str) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.variable == variable)
            .map(|e| e.mda)
    }

    pub fn rank(&self, variable: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.variable == variable)
    }
}

pub fn mean_decrease_accuracy(model: &ForestModel, table: &CategoricalTable) -> VariableImportance {
    let y = table.column(
        table
            .index_of(&model.response)
            .expect("model fitted on this table"),
    );
    let p = model.predictors.len();
    let seed = model.params.seed;
    let per_tree: Vec<Option<Vec<f64>>> = model
        .trees
        .par_iter()
        .zip(&model.oob)
        .enumerate()
        .map(|(t, (tree, oob))| {
            if oob.is_empty() {
                return None;
            }
            let m = oob.len() as f64;
            let base = oob
                .iter()
                .filter(|&&r| model.predict_row(tree, table, r as usize) == y[r as usize])
                .count() as f64
                / m;
            let drops = (0..p)
                .map(|v| {
                    let column = table.column(model.predictors[v]);
                    let mut shuffled: Vec<u8> = oob.iter().map(|&r| column[r as usize]).collect();
                    let stream = PERMUTATION_DOMAIN << 56 | (t as u64) << 24 | v as u64;
                    shuffled.shuffle(&mut rng_for(seed, stream));
                    let hits = oob
                        .iter()
                        .zip(&shuffled)
                        .filter(|&(&r, &sv)| {
                            let r = r as usize;
                            let pred = tree.predict(|u| {
                                if u == v {
                                    sv
                                } else {
                                    table.column(model.predictors[u])[r]
                                }
                            });
                            pred == y[r]
                        })
                        .count();
                    base - hits as f64 / m
                })
                .collect();
            Some(drops)
        })
        .collect();

    let mut sums = vec![0.0f64; p];
    let mut used = 0usize;
    for drops in per_tree.into_iter().flatten() {
        used += 1;
        for (s, d) in sums.iter_mut().zip(drops) {
            *s += d;
        }
    }
    let entries = model
        .predictors
        .iter()
        .zip(sums)
        .map(|(&col, s)| ImportanceEntry {
            variable: table.names()[col].clone(),
            mda: if used == 0 { 0.0 } else { s / used as f64 },
        })
        .collect();
    VariableImportance::new(entries)
}

/// Variables whose importance reaches `fraction` of the largest one, in
/// descending importance order.
pub fn select_variables(imp: &VariableImportance, fraction: f64) -> Result<Vec<String>> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidParams(format!(
            "fraction {fraction} outside [0, 1]"
        )));
    }
    let Some(max) = imp.entries.iter().map(|e| e.mda).reduce(f64::max) else {
        return Err(Error::EmptyInput("no importance entries".into()));
    };
    if max.is_nan() || max <= 0.0 {
        return Err(Error::EmptySelection);
    }
    let threshold = fraction * max;
    Ok(imp
        .entries
        .iter()
        .filter(|e| e.mda >= threshold)
        .map(|e| e.variable.clone())
        .collect())
}

/// `variable,mda,selected` rows in importance order.
pub fn write_importance_csv<W: Write>(
    imp: &VariableImportance,
    selected: &[String],
    out: W,
) -> std::io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["variable", "mda", "selected"])?;
    for e in &imp.entries {
        let flag = if selected.contains(&e.variable) {
            "1"
        } else {
            "0"
        };
        w.write_record([e.variable.as_str(), &format!("{:.6}", e.mda), flag])?;
    }
    w.flush()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn entries(values: &[(&str, f64)]) -> VariableImportance {
        VariableImportance::new(
            values
                .iter()
                .map(|&(v, mda)| ImportanceEntry {
                    variable: v.to_string(),
                    mda,
                })
                .collect(),
        )
    }

    #[test]
    fn selection_threshold_is_relative() {
        let imp = entries(&[("a", 64.1), ("b", 32.05), ("c", 32.04), ("d", 50.0)]);
        assert_eq!(select_variables(&imp, 0.5).unwrap(), ["a", "d", "b"]);
        assert_eq!(select_variables(&imp, 1.0).unwrap(), ["a"]);
        let flat = entries(&[("a", 0.2), ("b", 0.2)]);
        assert_eq!(select_variables(&flat, 0.5).unwrap().len(), 2);
        let dead = entries(&[("a", 0.0), ("b", -0.1)]);
        assert!(matches!(
            select_variables(&dead, 0.5),
            Err(Error::EmptySelection)
        ));
        assert!(matches!(
            select_variables(&entries(&[]), 0.5),
            Err(Error::EmptyInput(_))
        ));
    }

    fn planted(n: usize, seed: u64) -> CategoricalTable {
        let mut rng = rng_for(seed, 99);
        let signal: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let noise: Vec<u8> = (0..n).map(|_| rng.gen_range(0..3)).collect();
        let constant = vec![0u8; n];
        let y: Vec<u8> = signal
            .iter()
            .map(|&s| {
                if rng.gen_bool(0.1) {
                    (s + rng.gen_range(1..3)) % 3
                } else {
                    s
                }
            })
            .collect();
        let lv = |k: usize| (0..k).map(|c| c.to_string()).collect::<Vec<_>>();
        CategoricalTable::new(
            vec![
                "signal".into(),
                "noise".into(),
                "constant".into(),
                "y".into(),
            ],
            vec![lv(3), lv(3), lv(1), lv(3)],
            vec![signal, noise, constant, y],
        )
        .unwrap()
    }

    #[test]
    fn forest_finds_planted_signal() {
        let t = planted(600, 5);
        let params = ForestParams {
            tree_count: 40,
            seed: 11,
            ..Default::default()
        };
        let model = fit_forest(&t, "y", &params).unwrap();
        assert!(model.oob_accuracy(&t).unwrap() > 0.8);
        let imp = mean_decrease_accuracy(&model, &t);
        assert_eq!(imp.entries[0].variable, "signal");
        assert_eq!(imp.get("constant"), Some(0.0));
        assert_eq!(imp.entries.len(), 3);
    }

    #[test]
    fn fitting_is_deterministic() {
        let t = planted(200, 2);
        let params = ForestParams {
            tree_count: 5,
            seed: 7,
            ..Default::default()
        };
        let a = fit_forest(&t, "y", &params).unwrap();
        let b = fit_forest(&t, "y", &params).unwrap();
        assert_eq!(a, b);
        assert_eq!(
            mean_decrease_accuracy(&a, &t),
            mean_decrease_accuracy(&b, &t)
        );
    }

    #[test]
    fn fit_errors() {
        let t = planted(50, 1);
        assert!(matches!(
            fit_forest(&t, "constant", &ForestParams::default()),
            Err(Error::DegenerateResponse(_))
        ));
        assert!(matches!(
            fit_forest(&t, "nope", &ForestParams::default()),
            Err(Error::UnknownVariable(_))
        ));
        let bad = ForestParams {
            tree_count: 0,
            ..Default::default()
        };
        assert!(matches!(
            fit_forest(&t, "y", &bad),
            Err(Error::InvalidParams(_))
        ));
        let empty = CategoricalTable::new(
            vec!["a".into(), "y".into()],
            vec![vec!["0".into()], vec!["0".into(), "1".into()]],
            vec![vec![], vec![]],
        )
        .unwrap();
        assert!(matches!(
            fit_forest(&empty, "y", &ForestParams::default()),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn importance_csv_layout() {
        let imp = entries(&[("a", 0.25), ("b", 0.1)]);
        let mut buf = Vec::new();
        write_importance_csv(&imp, &["a".to_string()], &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "variable,mda,selected\na,0.250000,1\nb,0.100000,0\n"
        );
    }
}
