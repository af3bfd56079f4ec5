//! Rule tables, item frequency tables and stratified cross-tabulations.
//!
//! Displayed numbers are half-up decimal roundings of exact count ratios,
//! computed in integer arithmetic.

use std::fmt;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{item_frequencies, ItemDictionary, ItemId, TransactionDatabase};
use crate::rulegen::{Rule, RuleSet};

/// `num / den` rounded half-up to `decimals` places, as a decimal string.
pub fn round_half_up(num: u128, den: u128, decimals: u32) -> String {
    assert!(den > 0, "zero denominator");
    let scale = 10u128.pow(decimals);
    let q = (2 * num * scale + den) / (2 * den);
    if decimals == 0 {
        return q.to_string();
    }
    format!(
        "{}.{:0width$}",
        q / scale,
        q % scale,
        width = decimals as usize
    )
}

/// Percentage `100 * part / whole` rounded half-up.
pub fn percent(part: u64, whole: u64, decimals: u32) -> String {
    round_half_up(u128::from(part) * 100, u128::from(whole), decimals)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
    Text,
}

impl FromStr for OutputFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            "text" | "txt" => Ok(OutputFormat::Text),
            other => Err(Error::InvalidParams(format!("unknown format {other:?}"))),
        }
    }
}

impl fmt::Display for OutputFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
            OutputFormat::Text => "text",
        })
    }
}

/// `variable = category` items joined by `", "`.
pub fn render_itemset(items: &[ItemId], dict: &ItemDictionary) -> String {
    items
        .iter()
        .map(|&id| {
            let it = &dict.items()[id as usize];
            format!("{} = {}", it.variable, it.category)
        })
        .collect::<Vec<_>>()
        .join(", ")
}

/// One displayed rule: rank label, rendered antecedent, rounded metrics and
/// the raw counts they were rounded from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RuleRow {
    pub id: String,
    pub antecedent: String,
    pub support_pct: String,
    pub confidence_pct: String,
    pub lift: String,
    pub consequent: String,
    pub count_a: u64,
    pub count_k: u64,
    pub count_ak: u64,
    pub n: u64,
}

pub const RULE_CSV_HEADER: [&str; 10] = [
    "id",
    "antecedent",
    "support_pct",
    "confidence_pct",
    "lift",
    "consequent",
    "count_a",
    "count_k",
    "count_ak",
    "n",
];

impl RuleRow {
    /// `rank` is 1-based.
    pub fn from_rule(rank: usize, rule: &Rule, dict: &ItemDictionary) -> Self {
        let (lift_num, lift_den) = rule.lift_fraction();
        RuleRow {
            id: format!("R{rank}"),
            antecedent: render_itemset(&rule.antecedent, dict),
            support_pct: percent(rule.count_ak, rule.n, 2),
            confidence_pct: percent(rule.count_ak, rule.count_a, 2),
            lift: round_half_up(lift_num, lift_den, 2),
            consequent: render_itemset(&[rule.consequent], dict),
            count_a: rule.count_a,
            count_k: rule.count_k,
            count_ak: rule.count_ak,
            n: rule.n,
        }
    }

    pub fn to_fields(&self) -> Vec<String> {
        vec![
            self.id.clone(),
            self.antecedent.clone(),
            self.support_pct.clone(),
            self.confidence_pct.clone(),
            self.lift.clone(),
            self.consequent.clone(),
            self.count_a.to_string(),
            self.count_k.to_string(),
            self.count_ak.to_string(),
            self.n.to_string(),
        ]
    }

    pub fn from_fields<S: AsRef<str>>(fields: &[S]) -> Result<Self> {
        if fields.len() != RULE_CSV_HEADER.len() {
            return Err(Error::InvalidParams(format!(
                "rule row has {} fields, expected {}",
                fields.len(),
                RULE_CSV_HEADER.len()
            )));
        }
        let f = |i: usize| fields[i].as_ref().to_string();
        let int = |i: usize| {
            fields[i].as_ref().parse::<u64>().map_err(|_| {
                Error::InvalidParams(format!(
                    "{} is not a count: {:?}",
                    RULE_CSV_HEADER[i],
                    fields[i].as_ref()
                ))
            })
        };
        Ok(RuleRow {
            id: f(0),
            antecedent: f(1),
            support_pct: f(2),
            confidence_pct: f(3),
            lift: f(4),
            consequent: f(5),
            count_a: int(6)?,
            count_k: int(7)?,
            count_ak: int(8)?,
            n: int(9)?,
        })
    }

    /// Whether the displayed metrics are the roundings of the stored counts.
    pub fn is_consistent(&self) -> bool {
        if self.n == 0 || self.count_a == 0 || self.count_k == 0 {
            return false;
        }
        self.support_pct == percent(self.count_ak, self.n, 2)
            && self.confidence_pct == percent(self.count_ak, self.count_a, 2)
            && self.lift
                == round_half_up(
                    u128::from(self.count_ak) * u128::from(self.n),
                    u128::from(self.count_a) * u128::from(self.count_k),
                    2,
                )
    }
}

#[derive(Serialize)]
struct JsonItem<'a> {
    variable: &'a str,
    category: &'a str,
}

#[derive(Serialize)]
struct JsonRule<'a> {
    id: String,
    antecedent: Vec<JsonItem<'a>>,
    consequent: JsonItem<'a>,
    support: f64,
    confidence: f64,
    lift: f64,
    support_pct: String,
    confidence_pct: String,
    lift_rounded: String,
    count_a: u64,
    count_k: u64,
    count_ak: u64,
    n: u64,
}

fn json_item(id: ItemId, dict: &ItemDictionary) -> JsonItem<'_> {
    let it = &dict.items()[id as usize];
    JsonItem {
        variable: &it.variable,
        category: &it.category,
    }
}

/// Writes rules in their stored order, labelled `R1..Rn`, keeping at most
/// `top` rows when given.
pub fn write_rule_table<W: Write>(
    rules: &RuleSet,
    dict: &ItemDictionary,
    format: OutputFormat,
    top: Option<usize>,
    out: W,
) -> io::Result<()> {
    let shown = &rules.rules[..top.map_or(rules.len(), |k| k.min(rules.len()))];
    let rows: Vec<RuleRow> = shown
        .iter()
        .enumerate()
        .map(|(i, r)| RuleRow::from_rule(i + 1, r, dict))
        .collect();
    match format {
        OutputFormat::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(RULE_CSV_HEADER)?;
            for row in &rows {
                w.write_record(row.to_fields())?;
            }
            w.flush()
        }
        OutputFormat::Json => {
            let docs: Vec<JsonRule> = shown
                .iter()
                .zip(&rows)
                .map(|(r, row)| JsonRule {
                    id: row.id.clone(),
                    antecedent: r.antecedent.iter().map(|&id| json_item(id, dict)).collect(),
                    consequent: json_item(r.consequent, dict),
                    support: r.support,
                    confidence: r.confidence,
                    lift: r.lift,
                    support_pct: row.support_pct.clone(),
                    confidence_pct: row.confidence_pct.clone(),
                    lift_rounded: row.lift.clone(),
                    count_a: r.count_a,
                    count_k: r.count_k,
                    count_ak: r.count_ak,
                    n: r.n,
                })
                .collect();
            let mut out = out;
            serde_json::to_writer_pretty(&mut out, &docs)?;
            writeln!(out)
        }
        OutputFormat::Text => {
            let header = [
                "ID",
                "Antecedent (s)",
                "S (%)",
                "C (%)",
                "L",
                "count_a",
                "count_k",
                "count_ak",
            ];
            let body: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let mut f = r.to_fields();
                    f.truncate(9);
                    f.remove(5);
                    f
                })
                .collect();
            write_aligned(
                out,
                &header,
                &body,
                &[false, false, true, true, true, true, true, true],
            )
        }
    }
}

fn write_aligned<W: Write>(
    mut out: W,
    header: &[&str],
    body: &[Vec<String>],
    right: &[bool],
) -> io::Result<()> {
    let mut widths: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for row in body {
        for (w, cell) in widths.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let line = |cells: Vec<&str>| -> String {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .zip(right)
            .map(|((c, &w), &r)| {
                if r {
                    format!("{c:>w$}")
                } else {
                    format!("{c:<w$}")
                }
            })
            .collect();
        parts.join("  ").trim_end().to_string()
    };
    writeln!(out, "{}", line(header.to_vec()))?;
    for row in body {
        writeln!(out, "{}", line(row.iter().map(String::as_str).collect()))?;
    }
    Ok(())
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    File::create(path)
        .map(BufWriter::new)
        .map_err(|e| Error::io(path, e))
}

fn finish(path: &Path, res: io::Result<()>) -> Result<()> {
    res.map_err(|e| Error::io(path, e))
}

pub fn emit_rule_table(
    rules: &RuleSet,
    dict: &ItemDictionary,
    destination: &Path,
    format: OutputFormat,
    top: Option<usize>,
) -> Result<()> {
    let mut w = create(destination)?;
    let res = write_rule_table(rules, dict, format, top, &mut w).and_then(|_| w.flush());
    finish(destination, res)
}

/// `item,count` rows, most frequent item first.
pub fn write_frequency_table<W: Write>(db: &TransactionDatabase, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["item", "count"])?;
    for (id, count) in item_frequencies(db) {
        w.write_record([db.dictionary().label(id), count.to_string()])?;
    }
    w.flush()
}

pub fn emit_frequency_table(db: &TransactionDatabase, destination: &Path) -> Result<()> {
    let mut w = create(destination)?;
    let res = write_frequency_table(db, &mut w).and_then(|_| w.flush());
    finish(destination, res)
}

/// Counts of one variable's categories within each category of a stratifier.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Crosstab {
    pub variable: String,
    pub stratifier: String,
    pub categories: Vec<String>,
    pub strata: Vec<String>,
    /// `counts[row][stratum]`.
    pub counts: Vec<Vec<u64>>,
    pub stratum_totals: Vec<u64>,
}

impl Crosstab {
    pub fn percent(&self, row: usize, stratum: usize) -> String {
        percent(self.counts[row][stratum], self.stratum_totals[stratum], 1)
    }
}

pub fn crosstab(db: &TransactionDatabase, variable: &str, stratifier: &str) -> Result<Crosstab> {
    let dict = db.dictionary();
    let rows = dict
        .variable_items(variable)
        .ok_or_else(|| Error::UnknownVariable(variable.to_string()))?;
    let cols = dict
        .variable_items(stratifier)
        .ok_or_else(|| Error::UnknownVariable(stratifier.to_string()))?;
    let counts: Vec<Vec<u64>> = rows
        .clone()
        .map(|r| cols.clone().map(|c| db.count(&pair(r, c))).collect())
        .collect();
    let stratum_totals = cols.clone().map(|c| db.count(&[c])).collect();
    let name = |id: ItemId| dict.items()[id as usize].category.clone();
    Ok(Crosstab {
        variable: variable.to_string(),
        stratifier: stratifier.to_string(),
        categories: rows.map(name).collect(),
        strata: cols.map(name).collect(),
        counts,
        stratum_totals,
    })
}

fn pair(a: ItemId, b: ItemId) -> Vec<ItemId> {
    if a == b {
        vec![a]
    } else {
        vec![a.min(b), a.max(b)]
    }
}

/// `category, <stratum>_n, <stratum>_pct, ...` with percentages of each
/// stratum's total, one decimal.
pub fn write_crosstab<W: Write>(table: &Crosstab, out: W) -> io::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec![table.variable.clone()];
    for s in &table.strata {
        header.push(format!("{s}_n"));
        header.push(format!("{s}_pct"));
    }
    w.write_record(&header)?;
    for (row, category) in table.categories.iter().enumerate() {
        let mut rec = vec![category.clone()];
        for stratum in 0..table.strata.len() {
            rec.push(table.counts[row][stratum].to_string());
            rec.push(table.percent(row, stratum));
        }
        w.write_record(&rec)?;
    }
    w.flush()
}

pub fn emit_crosstab(
    db: &TransactionDatabase,
    variable: &str,
    stratifier: &str,
    destination: &Path,
) -> Result<()> {
    let table = crosstab(db, variable, stratifier)?;
    let mut w = create(destination)?;
    let res = write_crosstab(&table, &mut w).and_then(|_| w.flush());
    finish(destination, res)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Record;
    use crate::rulegen::RuleThresholds;

    #[test]
    fn half_up_rounding() {
        assert_eq!(round_half_up(882 * 100, 8249, 2), "10.69");
        assert_eq!(round_half_up(882 * 100, 1168, 2), "75.51");
        assert_eq!(round_half_up(1, 8, 2), "0.13"); // 0.125
        assert_eq!(round_half_up(1, 200, 2), "0.01"); // 0.005
        assert_eq!(round_half_up(3066 * 100, 3784, 1), "81.0");
        assert_eq!(round_half_up(7, 2, 0), "4");
        assert_eq!(round_half_up(0, 5, 2), "0.00");
    }

    #[test]
    fn format_parsing() {
        assert_eq!("CSV".parse::<OutputFormat>().unwrap(), OutputFormat::Csv);
        assert_eq!("text".parse::<OutputFormat>().unwrap(), OutputFormat::Text);
        assert!("xml".parse::<OutputFormat>().is_err());
    }

    fn small_db() -> TransactionDatabase {
        let rows = [("a", "k1"), ("a", "k1"), ("b", "k1"), ("b", "k2")];
        let records: Vec<(String, Record)> = rows
            .iter()
            .enumerate()
            .map(|(i, (x, k))| {
                (
                    i.to_string(),
                    [
                        ("x".to_string(), x.to_string()),
                        ("k".to_string(), k.to_string()),
                    ]
                    .into_iter()
                    .collect(),
                )
            })
            .collect();
        TransactionDatabase::from_records(&records, &["x".into(), "k".into()]).unwrap()
    }

    fn empty_set() -> RuleSet {
        RuleSet {
            rules: vec![],
            thresholds: RuleThresholds {
                rhs: 0,
                min_confidence: 0.5,
                min_lift: 1.1,
            },
            generated_before_pruning: 0,
            retained_after_pruning: 0,
        }
    }

    #[test]
    fn empty_rule_table_is_header_only() {
        let db = small_db();
        let mut buf = Vec::new();
        write_rule_table(
            &empty_set(),
            db.dictionary(),
            OutputFormat::Csv,
            None,
            &mut buf,
        )
        .unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            RULE_CSV_HEADER.join(",") + "\n"
        );
        let mut buf = Vec::new();
        write_rule_table(
            &empty_set(),
            db.dictionary(),
            OutputFormat::Json,
            None,
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "[]");
        let mut buf = Vec::new();
        write_rule_table(
            &empty_set(),
            db.dictionary(),
            OutputFormat::Text,
            None,
            &mut buf,
        )
        .unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    #[test]
    fn rows_round_trip_through_csv() {
        let db = small_db();
        let d = db.dictionary();
        let (xa, k1) = (d.lookup("x", "a").unwrap(), d.lookup("k", "k1").unwrap());
        let rule = crate::rulegen::compute_metrics(&[xa], k1, &db).unwrap();
        let set = RuleSet {
            rules: vec![rule],
            ..empty_set()
        };
        let mut buf = Vec::new();
        write_rule_table(&set, d, OutputFormat::Csv, None, &mut buf).unwrap();
        let mut rdr = csv::Reader::from_reader(buf.as_slice());
        let rec = rdr.records().next().unwrap().unwrap();
        let fields: Vec<&str> = rec.iter().collect();
        let row = RuleRow::from_fields(&fields).unwrap();
        assert!(row.is_consistent());
        assert_eq!(fields[..5].join(", "), "R1, x = a, 50.00, 100.00, 1.33");
    }

    #[test]
    fn crosstab_and_frequencies() {
        let db = small_db();
        let t = crosstab(&db, "x", "k").unwrap();
        assert_eq!(t.categories, vec!["a", "b"]);
        assert_eq!(t.strata, vec!["k1", "k2"]);
        assert_eq!(t.counts, vec![vec![2, 0], vec![1, 1]]);
        assert_eq!(t.percent(0, 0), "66.7");
        assert!(matches!(
            crosstab(&db, "nope", "k"),
            Err(Error::UnknownVariable(_))
        ));

        let mut buf = Vec::new();
        write_frequency_table(&db, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().nth(1), Some("k=k1,3"));
        let total: u64 = text
            .lines()
            .skip(1)
            .map(|l| l.rsplit(',').next().unwrap().parse::<u64>().unwrap())
            .sum();
        assert_eq!(total, db.n() * 2);
    }

    #[test]
    fn single_stratum_is_a_plain_frequency_column() {
        let rows = [("a", "s"), ("b", "s"), ("b", "s")];
        let records: Vec<(String, Record)> = rows
            .iter()
            .enumerate()
            .map(|(i, (x, k))| {
                (
                    i.to_string(),
                    [
                        ("x".to_string(), x.to_string()),
                        ("k".to_string(), k.to_string()),
                    ]
                    .into_iter()
                    .collect(),
                )
            })
            .collect();
        let db = TransactionDatabase::from_records(&records, &["x".into(), "k".into()]).unwrap();
        let mut buf = Vec::new();
        write_crosstab(&crosstab(&db, "x", "k").unwrap(), &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "x,s_n,s_pct\na,1,33.3\nb,2,66.7\n"
        );
    }

    #[test]
    fn unwritable_destination_is_io_error() {
        let db = small_db();
        let err = emit_frequency_table(&db, Path::new("/nonexistent-dir/x/freq.csv")).unwrap_err();
        assert!(err.is_io());
    }
}
