//! Reconstruction of the published crash overview as a record-level database.
//!
//! Only per-stratum marginals are published, so each (stratum, variable)
//! column is filled with exactly the published counts and then shuffled with
//! a fixed seed. Single-variable statistics within and across strata are
//! therefore exact; joint distributions across variables are synthetic.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::model::{Record, TransactionDatabase};

pub const STRATIFIER: &str = "lighting_condition";

/// Stratum categories, in column order.
pub const STRATA: [&str; 3] = ["daylight", "dark_with_streetlight", "dark_no_streetlight"];

pub const STRATUM_SIZES: [u64; 3] = [3784, 3042, 1423];

const SEED: u64 = 0x5eed_0f7a_b1e1;

/// How far a cell's published values can be trusted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CellFlag {
    Exact,
    /// Count not printed; derived from the column total.
    DerivedCount,
    /// Printed count contradicts the column total and the printed percentage.
    AmbiguousCount,
    /// Printed percentage does not match the printed count.
    MisprintedPercent,
}

#[derive(Debug, Clone, Copy)]
pub struct Cell {
    pub count: u64,
    /// Percentage of the stratum as printed; absent when not printed.
    pub printed_pct: Option<f64>,
    pub flag: CellFlag,
}

#[derive(Debug, Clone, Copy)]
pub struct Row {
    pub variable: &'static str,
    pub category: &'static str,
    pub cells: [Cell; 3],
}

const fn c(count: u64, pct: f64) -> Cell {
    Cell {
        count,
        printed_pct: Some(pct),
        flag: CellFlag::Exact,
    }
}

const fn row(variable: &'static str, category: &'static str, cells: [Cell; 3]) -> Row {
    Row {
        variable,
        category,
        cells,
    }
}

pub const ROWS: &[Row] = &[
    row(
        "severity",
        "fatal",
        [c(211, 5.6), c(412, 13.5), c(465, 32.7)],
    ),
    row(
        "severity",
        "severe",
        [c(507, 13.4), c(658, 21.6), c(257, 18.1)],
    ),
    row(
        "severity",
        "moderate",
        [c(3066, 81.0), c(1972, 64.8), c(701, 49.3)],
    ),
    row(
        "ped_action",
        "crossing_intersection",
        [c(991, 26.2), c(647, 21.3), c(110, 7.7)],
    ),
    row(
        "ped_action",
        "crossing_midblock",
        [c(1049, 27.7), c(918, 30.2), c(278, 19.5)],
    ),
    row(
        "ped_action",
        "walking_with_traffic",
        [c(221, 5.8), c(344, 11.3), c(346, 24.3)],
    ),
    row(
        "ped_action",
        "walking_against_traffic",
        [c(101, 2.7), c(121, 4.0), c(119, 8.4)],
    ),
    row(
        "ped_action",
        "other_inappropriate",
        [c(1234, 32.6), c(845, 27.8), c(531, 37.3)],
    ),
    row(
        "ped_action",
        "unknown",
        [c(188, 5.0), c(167, 5.5), c(39, 2.7)],
    ),
    row(
        "ped_alcohol_drug",
        "yes",
        [
            c(156, 4.1),
            c(524, 17.2),
            Cell {
                count: 370,
                printed_pct: None,
                flag: CellFlag::DerivedCount,
            },
        ],
    ),
    row(
        "ped_alcohol_drug",
        "no",
        [c(2665, 70.4), c(1396, 45.9), c(568, 39.9)],
    ),
    row(
        "ped_alcohol_drug",
        "others",
        [
            c(963, 25.4),
            c(1122, 36.9),
            Cell {
                count: 485,
                printed_pct: Some(34.9),
                flag: CellFlag::MisprintedPercent,
            },
        ],
    ),
    row("ped_age", "<15", [c(882, 23.3), c(228, 7.5), c(58, 4.1)]),
    row(
        "ped_age",
        "15-24",
        [c(649, 17.2), c(632, 20.8), c(297, 20.9)],
    ),
    row(
        "ped_age",
        "25-40",
        [c(765, 20.2), c(892, 29.3), c(515, 36.2)],
    ),
    row(
        "ped_age",
        "41-64",
        [c(1058, 28.0), c(1070, 35.2), c(460, 32.3)],
    ),
    row("ped_age", ">64", [c(365, 9.6), c(144, 4.7), c(68, 4.8)]),
    row("ped_age", "unknown", [c(65, 1.7), c(76, 2.5), c(25, 1.8)]),
    row(
        "ped_dark_cloth",
        "yes",
        [c(955, 25.2), c(1214, 39.9), c(700, 49.2)],
    ),
    row(
        "ped_dark_cloth",
        "no",
        [c(2829, 74.8), c(1828, 60.1), c(723, 50.8)],
    ),
    row(
        "driver_age",
        "15-24",
        [c(567, 15.0), c(456, 15.0), c(242, 17.0)],
    ),
    row(
        "driver_age",
        "25-34",
        [c(714, 18.9), c(585, 19.2), c(305, 21.4)],
    ),
    row(
        "driver_age",
        "35-44",
        [
            c(580, 15.3),
            c(404, 13.3),
            Cell {
                count: 218,
                printed_pct: Some(11.8),
                flag: CellFlag::MisprintedPercent,
            },
        ],
    ),
    row(
        "driver_age",
        "45-54",
        [c(500, 13.2), c(343, 11.3), c(168, 11.8)],
    ),
    row(
        "driver_age",
        "55-64",
        [c(421, 11.1), c(269, 8.8), c(127, 8.9)],
    ),
    row("driver_age", ">64", [c(433, 11.4), c(203, 6.7), c(98, 6.9)]),
    row(
        "driver_age",
        "unknown",
        [c(569, 15.0), c(782, 25.7), c(265, 18.6)],
    ),
    row(
        "driver_condition",
        "normal",
        [c(2127, 56.2), c(1568, 51.5), c(873, 61.3)],
    ),
    row(
        "driver_condition",
        "inattentive_distracted",
        [c(763, 20.2), c(310, 10.2), c(130, 9.1)],
    ),
    row(
        "driver_condition",
        "illness_fatigued_asleep",
        [c(28, 0.7), c(8, 0.3), c(8, 0.6)],
    ),
    row(
        "driver_condition",
        "alcohol_drug",
        [c(96, 2.5), c(226, 7.4), c(92, 6.5)],
    ),
    row(
        "driver_condition",
        "other_unknown",
        [c(770, 20.3), c(930, 30.6), c(320, 22.5)],
    ),
    row(
        "violation_type",
        "no_violations",
        [c(1754, 46.4), c(1441, 47.4), c(872, 61.3)],
    ),
    row(
        "violation_type",
        "careless_operation",
        [c(537, 14.2), c(378, 12.4), c(103, 7.2)],
    ),
    row(
        "violation_type",
        "failure_to_yield",
        [c(330, 8.7), c(98, 3.2), c(22, 1.5)],
    ),
    row(
        "violation_type",
        "others",
        [c(1163, 30.7), c(1125, 37.0), c(426, 29.9)],
    ),
    row(
        "location_type",
        "business_industrial",
        [c(1039, 27.5), c(944, 31.0), c(256, 18.0)],
    ),
    row(
        "location_type",
        "business_mixed_residential",
        [c(1193, 31.5), c(1211, 39.8), c(361, 25.4)],
    ),
    row(
        "location_type",
        "residential",
        [c(1331, 35.2), c(768, 25.2), c(520, 36.5)],
    ),
    row(
        "location_type",
        "open_country",
        [c(115, 3.0), c(44, 1.4), c(254, 17.8)],
    ),
    row(
        "location_type",
        "other_locality",
        [c(106, 2.8), c(75, 2.5), c(32, 2.2)],
    ),
    row(
        "road_type",
        "one_way",
        [c(519, 13.7), c(371, 12.2), c(58, 4.1)],
    ),
    row(
        "road_type",
        "two_no_separation",
        [c(2327, 61.5), c(1789, 58.8), c(996, 70.0)],
    ),
    row(
        "road_type",
        "two_separation",
        [c(864, 22.8), c(844, 27.7), c(366, 25.7)],
    ),
    row(
        "road_type",
        "other_unknown",
        [c(74, 2.0), c(38, 1.2), c(3, 0.2)],
    ),
    row(
        "highway_type",
        "interstate",
        [c(109, 2.9), c(116, 3.8), c(148, 10.4)],
    ),
    row(
        "highway_type",
        "us_highway",
        [c(321, 8.5), c(408, 13.4), c(251, 17.6)],
    ),
    row(
        "highway_type",
        "state_highway",
        [c(604, 16.0), c(648, 21.3), c(556, 39.1)],
    ),
    row(
        "highway_type",
        "city_street",
        [c(2202, 58.2), c(1554, 51.1), c(264, 18.6)],
    ),
    row(
        "highway_type",
        "parish_road",
        [
            c(496, 13.1),
            c(275, 9.0),
            Cell {
                count: 198,
                printed_pct: Some(13.9),
                flag: CellFlag::AmbiguousCount,
            },
        ],
    ),
    row(
        "highway_type",
        "others",
        [c(52, 1.4), c(41, 1.3), c(6, 0.4)],
    ),
    row(
        "speed_limit",
        "<30",
        [c(1439, 38.0), c(754, 24.8), c(162, 11.4)],
    ),
    row(
        "speed_limit",
        "30-35",
        [c(1201, 31.7), c(1035, 34.0), c(212, 14.9)],
    ),
    row(
        "speed_limit",
        "40-45",
        [c(558, 14.7), c(771, 25.3), c(387, 27.2)],
    ),
    row(
        "speed_limit",
        "50-55",
        [c(172, 4.5), c(178, 5.9), c(424, 29.8)],
    ),
    row(
        "speed_limit",
        ">55",
        [c(109, 2.9), c(103, 3.4), c(173, 12.2)],
    ),
    row(
        "speed_limit",
        "unknown",
        [c(305, 8.1), c(201, 6.6), c(65, 4.6)],
    ),
    row(
        "day_of_week",
        "weekday",
        [c(2901, 76.7), c(1917, 63.0), c(960, 67.5)],
    ),
    row(
        "day_of_week",
        "weekend",
        [c(883, 23.3), c(1125, 37.0), c(463, 32.5)],
    ),
];

/// Predictor variables in table order, without the stratifier.
pub fn predictors() -> Vec<&'static str> {
    let mut out: Vec<&'static str> = Vec::new();
    for r in ROWS {
        if out.last() != Some(&r.variable) {
            out.push(r.variable);
        }
    }
    out
}

/// All variables including the stratifier.
pub fn variables() -> Vec<String> {
    let mut v: Vec<String> = predictors().into_iter().map(String::from).collect();
    v.push(STRATIFIER.to_string());
    v
}

/// One record per crash, ids `1..=N` zero-padded, strata in column order.
pub fn records() -> Vec<(String, Record)> {
    let predictors = predictors();
    let total: u64 = STRATUM_SIZES.iter().sum();
    let width = total.to_string().len();
    let mut out = Vec::with_capacity(total as usize);
    for (s, (&stratum, &size)) in STRATA.iter().zip(&STRATUM_SIZES).enumerate() {
        let columns: Vec<Vec<&'static str>> = predictors
            .iter()
            .enumerate()
            .map(|(v, &var)| {
                let mut col: Vec<&'static str> = ROWS
                    .iter()
                    .filter(|r| r.variable == var)
                    .flat_map(|r| std::iter::repeat_n(r.category, r.cells[s].count as usize))
                    .collect();
                assert_eq!(col.len() as u64, size, "{var} does not close in {stratum}");
                let mut rng = ChaCha8Rng::seed_from_u64(SEED);
                rng.set_stream((s * 64 + v) as u64);
                col.shuffle(&mut rng);
                col
            })
            .collect();
        for i in 0..size as usize {
            let mut record: Record = predictors
                .iter()
                .zip(&columns)
                .map(|(var, col)| (var.to_string(), col[i].to_string()))
                .collect();
            record.insert(STRATIFIER.to_string(), stratum.to_string());
            let id = format!("{:0width$}", out.len() + 1);
            out.push((id, record));
        }
    }
    out
}

pub fn database() -> Result<TransactionDatabase> {
    TransactionDatabase::from_records(&records(), &variables())
}
