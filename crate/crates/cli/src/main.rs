//! `rulestrata` command-line driver.
//!
//! Exit codes: 0 success, 1 filesystem failure, 2 invalid input or arguments.

mod manifest;

use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{ArgGroup, Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use rulestrata::ingest::{self, SchemaConfig};
use rulestrata::miner::{mine_frequent, MiningParams};
use rulestrata::report::{self, OutputFormat};
use rulestrata::rulegen::generate_rules;
use rulestrata::varselect::{self, CategoricalTable, ForestParams};
use rulestrata::{fixture, Error};

use manifest::{io_err, sha256_file, FileDigest, RunManifest};

#[derive(Parser, Debug)]
#[command(
    name = "rulestrata",
    version,
    about = "Stratified association rule mining"
)]
struct Cli {
    /// Worker threads (defaults to the number of cores).
    #[arg(long, global = true, env = "RULESTRATA_THREADS")]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Join, recode and filter source tables into an encoded database CSV.
    Ingest(IngestArgs),
    /// Rank variables by random-forest permutation importance.
    Select(SelectArgs),
    /// Mine rules toward one consequent item.
    Mine(MineArgs),
    /// Item frequencies or a stratified cross-tabulation.
    Report(ReportArgs),
    /// Write the built-in reconstructed crash database.
    Fixture(FixtureArgs),
    /// Re-run the command recorded in a manifest and verify its outputs.
    Replay(ReplayArgs),
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SelectArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    response: String,
    #[arg(long, default_value_t = 500)]
    trees: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.5)]
    fraction: f64,
    /// Predictors tried per split (defaults to floor(sqrt(p))).
    #[arg(long)]
    mtry: Option<usize>,
    #[arg(long)]
    max_depth: Option<usize>,
    #[arg(long, default_value_t = 1)]
    min_leaf: usize,
    /// Importance table (variable, mda, selected).
    #[arg(long)]
    out: PathBuf,
}

#[derive(ValueEnum, Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Csv,
    Json,
    Text,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Csv => OutputFormat::Csv,
            Format::Json => OutputFormat::Json,
            Format::Text => OutputFormat::Text,
        }
    }
}

#[derive(Args, Debug)]
struct MineArgs {
    #[arg(long)]
    db: PathBuf,
    /// Consequent item as `variable=category`.
    #[arg(long)]
    rhs: String,
    /// Minimum rule support as a ratio (0.001 is 0.1%).
    #[arg(long, default_value_t = 0.001)]
    min_support: f64,
    #[arg(long, default_value_t = 0.5)]
    min_confidence: f64,
    #[arg(long, default_value_t = 1.1)]
    min_lift: f64,
    /// Items per rule, consequent included.
    #[arg(long, default_value_t = 4)]
    max_len: usize,
    #[arg(long)]
    top: Option<usize>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    /// Destination file; stdout when absent (no manifest is written then).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
#[command(group(ArgGroup::new("table").required(true).args(["freq", "crosstab"])))]
struct ReportArgs {
    #[arg(long)]
    db: PathBuf,
    #[arg(long)]
    freq: bool,
    #[arg(long, value_name = "VARIABLE", requires = "by")]
    crosstab: Option<String>,
    #[arg(long, value_name = "VARIABLE", requires = "crosstab")]
    by: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
}

type Outcome = Result<(), Error>;

fn path_arg(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

fn percent_form(ratio: f64) -> String {
    format!("{}%", ratio * 100.0)
}

/// Writes to `out`, or to stdout when absent.
fn emit(out: Option<&Path>, write: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> Outcome {
    match out {
        Some(path) => {
            let file = std::fs::File::create(path).map_err(|e| io_err(path, e))?;
            let mut w = io::BufWriter::new(file);
            write(&mut w)
                .and_then(|_| w.flush())
                .map_err(|e| io_err(path, e))
        }
        None => {
            let stdout = io::stdout();
            let mut lock = stdout.lock();
            write(&mut lock)
                .and_then(|_| lock.flush())
                .map_err(|e| io_err(Path::new("<stdout>"), e))
        }
    }
}

fn finish(mut m: RunManifest, outputs: &[&Path]) -> Outcome {
    for p in outputs {
        m.outputs.push(FileDigest::of(p)?);
    }
    let path = m.write_beside(outputs[0])?;
    info!("manifest written to {}", path.display());
    Ok(())
}

fn cmd_ingest(a: &IngestArgs) -> Outcome {
    let config = SchemaConfig::from_path(&a.config)?;
    let (db, counters) = ingest::run_pipeline(&config)?;
    if db.is_empty() {
        warn!("no records survived the filters; writing an empty database");
    }
    ingest::save_database(&db, &a.out)?;

    let argv = vec![
        "ingest".into(),
        "--config".into(),
        path_arg(&a.config),
        "--out".into(),
        path_arg(&a.out),
    ];
    let mut m = RunManifest::new("ingest", argv);
    m.config = Some(a.config.clone());
    m.inputs.push(FileDigest::of(&a.config)?);
    for t in &config.tables {
        m.inputs.push(FileDigest::of(&t.path)?);
    }
    m.param("schema", &config)
        .note("records", db.n())
        .note("items", db.dictionary().len())
        .note("counters", &counters);
    finish(m, &[&a.out])
}

fn cmd_fixture(a: &FixtureArgs) -> Outcome {
    let db = fixture::database()?;
    ingest::save_database(&db, &a.out)?;
    let mut m = RunManifest::new(
        "fixture",
        vec!["fixture".into(), "--out".into(), path_arg(&a.out)],
    );
    m.note("records", db.n())
        .note("items", db.dictionary().len());
    finish(m, &[&a.out])
}

fn cmd_select(a: &SelectArgs) -> Outcome {
    let db = ingest::load_database(&a.db)?;
    let table = CategoricalTable::from_database(&db)?;
    let params = ForestParams {
        tree_count: a.trees,
        mtry: a.mtry,
        max_depth: a.max_depth,
        min_leaf: a.min_leaf,
        seed: a.seed,
    };
    let model = varselect::fit_forest(&table, &a.response, &params)?;
    let imp = varselect::mean_decrease_accuracy(&model, &table);
    let selected = varselect::select_variables(&imp, a.fraction)?;
    emit(Some(&a.out), |w| {
        varselect::write_importance_csv(&imp, &selected, w)
    })?;
    emit(None, |w| {
        selected.iter().try_for_each(|v| writeln!(w, "{v}"))
    })?;

    let mut argv: Vec<String> = vec![
        "select".into(),
        "--db".into(),
        path_arg(&a.db),
        "--response".into(),
        a.response.clone(),
        "--trees".into(),
        a.trees.to_string(),
        "--seed".into(),
        a.seed.to_string(),
        "--fraction".into(),
        a.fraction.to_string(),
        "--min-leaf".into(),
        a.min_leaf.to_string(),
    ];
    if let Some(m) = a.mtry {
        argv.extend(["--mtry".into(), m.to_string()]);
    }
    if let Some(d) = a.max_depth {
        argv.extend(["--max-depth".into(), d.to_string()]);
    }
    argv.extend(["--out".into(), path_arg(&a.out)]);
    let mut m = RunManifest::new("select", argv);
    m.inputs.push(FileDigest::of(&a.db)?);
    m.param("response", &a.response)
        .param("trees", a.trees)
        .param("seed", a.seed)
        .param("fraction", a.fraction)
        .param("fraction_percent", percent_form(a.fraction))
        .param("mtry", params.resolved_mtry(model.predictors.len()))
        .param("max_depth", a.max_depth)
        .param("min_leaf", a.min_leaf)
        .note("oob_accuracy", model.oob_accuracy(&table))
        .note("selected", &selected);
    finish(m, &[&a.out])
}

fn cmd_mine(a: &MineArgs) -> Outcome {
    let db = ingest::load_database(&a.db)?;
    let rhs = db.dictionary().parse_item(&a.rhs)?;
    let params = MiningParams {
        min_support: a.min_support,
        max_len: a.max_len,
        must_include: Some(rhs),
        min_confidence: a.min_confidence,
        min_lift: a.min_lift,
    };
    let freq = mine_frequent(&db, &params)?;
    let rules = generate_rules(&freq, &db, rhs, a.min_confidence, a.min_lift)?;
    info!(
        "{} frequent itemsets; {} rules before pruning, {} retained",
        freq.len(),
        rules.generated_before_pruning,
        rules.retained_after_pruning
    );
    emit(a.out.as_deref(), |w| {
        report::write_rule_table(&rules, db.dictionary(), a.format.into(), a.top, w)
    })?;
    let Some(out) = &a.out else {
        return Ok(());
    };

    let mut argv: Vec<String> = vec![
        "mine".into(),
        "--db".into(),
        path_arg(&a.db),
        "--rhs".into(),
        a.rhs.clone(),
        "--min-support".into(),
        a.min_support.to_string(),
        "--min-confidence".into(),
        a.min_confidence.to_string(),
        "--min-lift".into(),
        a.min_lift.to_string(),
        "--max-len".into(),
        a.max_len.to_string(),
    ];
    if let Some(k) = a.top {
        argv.extend(["--top".into(), k.to_string()]);
    }
    argv.extend([
        "--format".into(),
        OutputFormat::from(a.format).to_string(),
        "--out".into(),
        path_arg(out),
    ]);
    let mut m = RunManifest::new("mine", argv);
    m.inputs.push(FileDigest::of(&a.db)?);
    m.param("rhs", &a.rhs)
        .param("min_support", a.min_support)
        .param("min_support_percent", percent_form(a.min_support))
        .param("min_confidence", a.min_confidence)
        .param("min_confidence_percent", percent_form(a.min_confidence))
        .param("min_lift", a.min_lift)
        .param("max_len", a.max_len)
        .param("top", a.top)
        .param("format", OutputFormat::from(a.format))
        .note("records", db.n())
        .note("frequent_itemsets", freq.len())
        .note("generated_before_pruning", rules.generated_before_pruning)
        .note("retained_after_pruning", rules.retained_after_pruning);
    finish(m, &[out])
}

fn cmd_report(a: &ReportArgs) -> Outcome {
    let db = ingest::load_database(&a.db)?;
    let mut argv: Vec<String> = vec!["report".into(), "--db".into(), path_arg(&a.db)];
    match (&a.crosstab, &a.by) {
        (Some(var), Some(by)) => {
            let table = report::crosstab(&db, var, by)?;
            emit(a.out.as_deref(), |w| report::write_crosstab(&table, w))?;
            argv.extend(["--crosstab".into(), var.clone(), "--by".into(), by.clone()]);
        }
        _ => {
            emit(a.out.as_deref(), |w| report::write_frequency_table(&db, w))?;
            argv.push("--freq".into());
        }
    }
    let Some(out) = &a.out else {
        return Ok(());
    };
    argv.extend(["--out".into(), path_arg(out)]);
    let mut m = RunManifest::new("report", argv);
    m.inputs.push(FileDigest::of(&a.db)?);
    m.param("freq", a.freq)
        .param("crosstab", &a.crosstab)
        .param("by", &a.by)
        .note("records", db.n());
    finish(m, &[out])
}

fn cmd_replay(a: &ReplayArgs) -> Outcome {
    let recorded = RunManifest::read(&a.manifest)?;
    if recorded.argv.first().map(String::as_str) == Some("replay") {
        return Err(Error::InvalidParams("manifest records a replay".into()));
    }
    for input in &recorded.inputs {
        if sha256_file(&input.path)? != input.sha256 {
            return Err(Error::InvalidParams(format!(
                "input {} changed since the recorded run",
                input.path.display()
            )));
        }
    }
    let argv = std::iter::once("rulestrata".to_string()).chain(recorded.argv.iter().cloned());
    let cli = Cli::try_parse_from(argv)
        .map_err(|e| Error::InvalidParams(format!("recorded arguments: {e}")))?;
    dispatch(&cli.command)?;
    for output in &recorded.outputs {
        if sha256_file(&output.path)? != output.sha256 {
            return Err(Error::InvalidParams(format!(
                "output {} differs from the recorded run",
                output.path.display()
            )));
        }
    }
    println!("replay reproduced {} output(s)", recorded.outputs.len());
    Ok(())
}

fn dispatch(command: &Command) -> Outcome {
    match command {
        Command::Ingest(a) => cmd_ingest(a),
        Command::Select(a) => cmd_select(a),
        Command::Mine(a) => cmd_mine(a),
        Command::Report(a) => cmd_report(a),
        Command::Fixture(a) => cmd_fixture(a),
        Command::Replay(a) => cmd_replay(a),
    }
}

fn exit_code(e: &Error) -> ExitCode {
    ExitCode::from(if e.is_io() { 1 } else { 2 })
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker threads: {e}");
            return ExitCode::from(2);
        }
    };
    let started = Instant::now();
    let result = pool.install(|| dispatch(&cli.command));
    info!(
        "finished in {:.3}s on {} thread(s)",
        started.elapsed().as_secs_f64(),
        pool.current_num_threads()
    );
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
