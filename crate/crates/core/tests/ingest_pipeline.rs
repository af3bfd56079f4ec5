use std::fs;
use std::path::Path;

use rulestrata::ingest::{
    apply_filters, apply_recode, build_database, load_and_join, load_database, run_pipeline,
    save_database, SchemaConfig,
};
use rulestrata::Error;

fn write(dir: &Path, name: &str, body: &str) {
    fs::write(dir.join(name), body).unwrap();
}

/// Four tables keyed on `crash_id`; crash 4 has no vehicle row and crash 2
/// has two vehicle rows.
fn setup(dir: &Path) -> SchemaConfig {
    write(
        dir,
        "crash.csv",
        "crash_id,severity,light,speed,day\n1,A,A,25,weekday\n2,B,C,35,weekend\n3,D,D,57,weekday\n4,C,B,45,weekday\n5,C,E,,weekday\n",
    );
    write(
        dir,
        "person.csv",
        "crash_id,age\n1,<15\n2,25-40\n3,>64\n4,41-64\n5,15-24\n",
    );
    write(
        dir,
        "vehicle.csv",
        "crash_id,vtype\n1,car\n2,van\n2,truck\n3,car\n5,car\n",
    );
    write(
        dir,
        "road.csv",
        "crash_id,road\n1,one_way\n2,one_way\n3,two_way\n4,two_way\n5,one_way\n",
    );
    let config = r#"{
        "tables": [
            {"name": "crash", "path": "crash.csv", "key": "crash_id"},
            {"name": "person", "path": "person.csv", "key": "crash_id"},
            {"name": "vehicle", "path": "vehicle.csv", "key": "crash_id"},
            {"name": "road", "path": "road.csv", "key": "crash_id"}
        ],
        "variables": [
            {"name": "severity", "table": "crash", "column": "severity"},
            {"name": "lighting_condition", "table": "crash", "column": "light"},
            {"name": "speed_limit", "table": "crash", "column": "speed"},
            {"name": "ped_age", "table": "person", "column": "age"},
            {"name": "veh_type", "table": "vehicle", "column": "vtype"},
            {"name": "road_type", "table": "road", "column": "road"}
        ],
        "recodes": {
            "severity": {"A": "fatal", "B": "severe", "C": "moderate", "D": "complaint"},
            "lighting_condition": {"A": "daylight", "B": "dark_no_streetlight",
                                   "C": "dark_with_streetlight", "D": "dark_with_streetlight",
                                   "E": "dusk"}
        },
        "bands": {"speed_limit": [
            {"lower": 0, "upper": 30, "label": "<30"},
            {"lower": 30, "upper": 40, "label": "30-35"},
            {"lower": 40, "upper": 50, "label": "40-45"},
            {"lower": 50, "upper": 56, "label": "50-55"},
            {"lower": 56, "label": ">55"}
        ]},
        "filters": [
            {"variable": "severity", "allowed": ["fatal", "severe", "moderate"]},
            {"variable": "lighting_condition",
             "allowed": ["daylight", "dark_no_streetlight", "dark_with_streetlight"]}
        ]
    }"#;
    write(dir, "schema.json", config);
    SchemaConfig::from_path(&dir.join("schema.json")).unwrap()
}

#[test]
fn inner_join_with_counters() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let rs = load_and_join(&config).unwrap();
    let ids: Vec<&str> = rs.records.iter().map(|(id, _)| id.as_str()).collect();
    assert_eq!(ids, ["1", "2", "3", "5"]);
    assert_eq!(rs.counters.unmatched_keys["vehicle"], 1);
    assert_eq!(rs.counters.unmatched_keys["crash"], 0);
    assert_eq!(rs.counters.duplicate_keys["vehicle"], 1);
    assert_eq!(rs.counters.rows_read["vehicle"], 5);
    // First row in file order wins.
    assert_eq!(rs.records[1].1["veh_type"], "van");
}

#[test]
fn recode_then_filter_accounts_for_every_record() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let joined = load_and_join(&config).unwrap();
    let recoded = apply_recode(&joined, &config);
    let filtered = apply_filters(&recoded, &config).unwrap();
    let dropped: u64 = filtered.counters.filter_drops.iter().map(|(_, n)| n).sum();
    assert_eq!(
        filtered.records.len() as u64 + dropped,
        recoded.records.len() as u64
    );
    assert_eq!(
        filtered.counters.filter_drops,
        vec![
            ("severity".to_string(), 1),
            ("lighting_condition".to_string(), 1)
        ]
    );
    let r2 = &filtered.records[1].1;
    assert_eq!(r2["lighting_condition"], "dark_with_streetlight");
    assert_eq!(r2["speed_limit"], "30-35");
    assert_eq!(recoded.records[3].1["speed_limit"], "unknown");

    let db = build_database(&filtered, &config.variable_names()).unwrap();
    assert_eq!(db.n(), 2);
}

#[test]
fn pipeline_is_deterministic_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let config = setup(dir.path());
    let (a, counters) = run_pipeline(&config).unwrap();
    let (b, _) = run_pipeline(&config).unwrap();
    assert_eq!(a, b);
    assert_eq!(counters.joined, 4);
    let out = dir.path().join("db.csv");
    save_database(&a, &out).unwrap();
    let first = fs::read(&out).unwrap();
    let reread = load_database(&out).unwrap();
    assert_eq!(reread.n(), a.n());
    assert_eq!(reread.dictionary(), a.dictionary());
    save_database(&reread, &out).unwrap();
    assert_eq!(fs::read(&out).unwrap(), first);
}

#[test]
fn empty_result_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path());
    config.filters[0].allowed.clear();
    let (db, _) = run_pipeline(&config).unwrap();
    assert!(db.is_empty());
    let out = dir.path().join("empty.csv");
    save_database(&db, &out).unwrap();
    assert_eq!(
        fs::read_to_string(&out).unwrap(),
        "record_id,severity,lighting_condition,speed_limit,ped_age,veh_type,road_type\n"
    );
    assert!(load_database(&out).unwrap().is_empty());
}

#[test]
fn missing_file_and_column_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = setup(dir.path());
    let mut gone = config.clone();
    gone.tables[2].path = dir.path().join("nope.csv");
    let err = load_and_join(&gone).unwrap_err();
    assert!(err.is_io());
    assert!(err.to_string().contains("nope.csv"));

    config.variables[3].column = "birth_year".into();
    assert!(matches!(
        load_and_join(&config),
        Err(Error::SchemaViolation(m)) if m.contains("birth_year")
    ));
}

#[test]
fn delimiter_is_configurable() {
    let dir = tempfile::tempdir().unwrap();
    write(dir.path(), "t.tsv", "id\tcolor\n1\tred\n2\tblue\n");
    write(
        dir.path(),
        "s.json",
        r#"{"tables": [{"name": "t", "path": "t.tsv", "key": "id"}],
            "variables": [{"name": "color", "table": "t", "column": "color"}],
            "delimiter": "\t"}"#,
    );
    let config = SchemaConfig::from_path(&dir.path().join("s.json")).unwrap();
    let (db, _) = run_pipeline(&config).unwrap();
    assert_eq!((db.n(), db.dictionary().len()), (2, 2));
}
