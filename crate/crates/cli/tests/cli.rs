use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_rulestrata"));
    c.env_remove("RULESTRATA_THREADS");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_db(dir: &Path) -> PathBuf {
    let path = dir.join("db.csv");
    let mut body = String::from("record_id,color,size,light\n");
    for i in 0..60 {
        let color = ["red", "blue", "green"][i % 3];
        let size = if i % 4 == 0 { "big" } else { "small" };
        let light = if color == "red" || i % 5 == 0 {
            "day"
        } else {
            "night"
        };
        body.push_str(&format!("{i},{color},{size},{light}\n"));
    }
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn mine_writes_table_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let db = small_db(dir.path());
    let out = dir.path().join("rules.csv");
    let o = run(&[
        "mine",
        "--db",
        s(&db),
        "--rhs",
        "light=day",
        "--min-support",
        "0.01",
        "--min-confidence",
        "0.5",
        "--min-lift",
        "1.1",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let table = fs::read_to_string(&out).unwrap();
    assert!(table.starts_with("id,antecedent,support_pct"));
    assert!(table.contains("R1,color = red,"));
    let manifest = fs::read_to_string(dir.path().join("rules.csv.manifest.json")).unwrap();
    assert!(manifest.contains("\"min_support_percent\": \"1%\""));
    assert!(!manifest.contains("thread"));
}

#[test]
fn mine_to_stdout_in_text_format() {
    let dir = tempfile::tempdir().unwrap();
    let db = small_db(dir.path());
    let o = run(&[
        "mine",
        "--db",
        s(&db),
        "--rhs",
        "light=day",
        "--format",
        "text",
        "--top",
        "1",
    ]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert_eq!(text.lines().count(), 2);
    assert!(text.starts_with("ID"));
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let db = small_db(dir.path());
    let unknown_rhs = run(&["mine", "--db", s(&db), "--rhs", "light=dusk"]);
    assert_eq!(code(&unknown_rhs), 2);
    assert!(String::from_utf8_lossy(&unknown_rhs.stderr).contains("light=dusk"));
    let bad_threshold = run(&[
        "mine",
        "--db",
        s(&db),
        "--rhs",
        "light=day",
        "--min-support",
        "1.5",
    ]);
    assert_eq!(code(&bad_threshold), 2);
    let both = run(&[
        "report",
        "--db",
        s(&db),
        "--freq",
        "--crosstab",
        "color",
        "--by",
        "light",
    ]);
    assert_eq!(code(&both), 2);
    let neither = run(&["report", "--db", s(&db)]);
    assert_eq!(code(&neither), 2);
    let out = dir.path().join("imp.csv");
    let unknown_response = run(&[
        "select",
        "--db",
        s(&db),
        "--response",
        "mood",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&unknown_response), 2);
    let unknown_var = run(&[
        "report",
        "--db",
        s(&db),
        "--crosstab",
        "shape",
        "--by",
        "light",
    ]);
    assert_eq!(code(&unknown_var), 2);
}

#[test]
fn missing_files_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let gone = dir.path().join("absent.csv");
    let o = run(&["mine", "--db", s(&gone), "--rhs", "a=b"]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("absent.csv"));

    fs::write(
        dir.path().join("schema.json"),
        r#"{"tables": [{"name": "t", "path": "missing_table.csv", "key": "id"}],
            "variables": [{"name": "x", "table": "t", "column": "x"}]}"#,
    )
    .unwrap();
    let out = dir.path().join("db.csv");
    let o = run(&[
        "ingest",
        "--config",
        s(&dir.path().join("schema.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing_table.csv"));
}

#[test]
fn ingest_with_nothing_left_still_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("t.csv"), "id,x\n1,a\n2,b\n").unwrap();
    fs::write(
        dir.path().join("schema.json"),
        r#"{"tables": [{"name": "t", "path": "t.csv", "key": "id"}],
            "variables": [{"name": "x", "table": "t", "column": "x"}],
            "filters": [{"variable": "x", "allowed": []}]}"#,
    )
    .unwrap();
    let out = dir.path().join("db.csv");
    let o = run(&[
        "ingest",
        "--config",
        s(&dir.path().join("schema.json")),
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    assert_eq!(fs::read_to_string(&out).unwrap(), "record_id,x\n");
    assert!(String::from_utf8_lossy(&o.stderr).contains("no records"));
    assert!(dir.path().join("db.csv.manifest.json").exists());
}

#[test]
fn select_is_deterministic_and_replayable() {
    let dir = tempfile::tempdir().unwrap();
    let db = small_db(dir.path());
    let out = dir.path().join("imp.csv");
    let args = [
        "select",
        "--db",
        s(&db),
        "--response",
        "light",
        "--trees",
        "1",
        "--seed",
        "7",
        "--out",
        s(&out),
    ];
    let first = run(&args);
    assert_eq!(
        code(&first),
        0,
        "{}",
        String::from_utf8_lossy(&first.stderr)
    );
    let table = fs::read(&out).unwrap();
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(fs::read(&out).unwrap(), table);
    assert!(String::from_utf8_lossy(&table).starts_with("variable,mda,selected\n"));

    let manifest = dir.path().join("imp.csv.manifest.json");
    let replay = run(&["replay", "--manifest", s(&manifest)]);
    assert_eq!(
        code(&replay),
        0,
        "{}",
        String::from_utf8_lossy(&replay.stderr)
    );

    fs::write(&db, "record_id,color,light\n1,red,day\n2,blue,night\n").unwrap();
    let stale = run(&["replay", "--manifest", s(&manifest)]);
    assert_eq!(code(&stale), 2);
}

#[test]
fn degenerate_response_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let db = dir.path().join("db.csv");
    fs::write(&db, "record_id,x,y\n1,a,k\n2,b,k\n").unwrap();
    let out = dir.path().join("imp.csv");
    let o = run(&[
        "select",
        "--db",
        s(&db),
        "--response",
        "y",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 2);
}

#[test]
fn report_tables() {
    let dir = tempfile::tempdir().unwrap();
    let db = small_db(dir.path());
    let o = run(&["report", "--db", s(&db), "--freq"]);
    assert_eq!(code(&o), 0);
    let freq = String::from_utf8(o.stdout).unwrap();
    assert_eq!(freq.lines().nth(1), Some("size=small,45"));

    let out = dir.path().join("xt.csv");
    let o = run(&[
        "report",
        "--db",
        s(&db),
        "--crosstab",
        "color",
        "--by",
        "light",
        "--out",
        s(&out),
    ]);
    assert_eq!(code(&o), 0);
    let xt = fs::read_to_string(&out).unwrap();
    assert_eq!(
        xt.lines().next(),
        Some("color,day_n,day_pct,night_n,night_pct")
    );
}

#[test]
fn threads_env_is_a_fallback() {
    let dir = tempfile::tempdir().unwrap();
    let db = small_db(dir.path());
    let o = bin()
        .env("RULESTRATA_THREADS", "2")
        .args(["report", "--db", s(&db), "--freq"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let o = bin()
        .env("RULESTRATA_THREADS", "many")
        .args(["report", "--db", s(&db), "--freq"])
        .output()
        .unwrap();
    assert_eq!(code(&o), 2);
}
