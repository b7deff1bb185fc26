//! SQLite execution with a wall-clock timeout, result normalization, and
//! the four-way outcome taxonomy.
//!
//! Queries run on read-only connections. The timeout uses two layers: a
//! progress handler interrupts the statement once the deadline passes,
//! and the calling thread enforces a hard cap by waiting on a channel
//! with its own slightly longer deadline, so the call returns within
//! `timeout_ms + 500` even if the engine stalls between progress
//! callbacks.

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::mpsc;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use rusqlite::types::ValueRef;
use rusqlite::{Connection, OpenFlags};
use serde::{Deserialize, Serialize};

use crate::canon::has_top_level_order_by;
use crate::error::{Error, Result};
use crate::grid::{CellValue, TableGrid};

/// Default query timeout, milliseconds.
pub const DEFAULT_TIMEOUT_MS: u64 = 2000;

/// Extra wall-clock budget for the hard cap; the public contract is that
/// `execute_with_timeout` returns within `timeout_ms + 500`.
const HARD_CAP_GRACE: Duration = Duration::from_millis(400);

/// Raw value from the engine.
#[derive(Debug, Clone, PartialEq)]
pub enum SqlValue {
    Null,
    Integer(i64),
    Real(f64),
    Text(String),
    Blob(Vec<u8>),
}

/// Result of a successfully executed query.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<SqlValue>>,
    pub had_order_by: bool,
}

/// What happened when a query was run under the timeout.
#[derive(Debug, Clone, PartialEq)]
pub enum ExecStatus {
    Completed(ExecResult),
    TimedOut,
    /// Engine-level failure: syntax error, missing relation, runtime
    /// error, or a write rejected by the read-only connection.
    Failed(String),
}

/// Four-way classification of one prediction.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "outcome", content = "reason", rename_all = "snake_case")]
pub enum ExecutionOutcome {
    Correct,
    ExecutableWrong,
    Timeout,
    NonExecutable(String),
}

/// Run `sql` against the database file under a wall-clock timeout.
///
/// Infrastructure problems (unreadable database file) are `Err`; anything
/// the query itself did wrong comes back as `ExecStatus::Failed` data.
pub fn execute_with_timeout(sql: &str, db_path: &Path, timeout_ms: u64) -> Result<ExecStatus> {
    let conn = Connection::open_with_flags(
        db_path,
        OpenFlags::SQLITE_OPEN_READ_ONLY | OpenFlags::SQLITE_OPEN_NO_MUTEX,
    )
    .map_err(|e| Error::Internal(format!("open {}: {e}", db_path.display())))?;
    let had_order_by = has_top_level_order_by(sql);
    let deadline = Instant::now() + Duration::from_millis(timeout_ms);
    conn.progress_handler(1000, Some(move || Instant::now() >= deadline))
        .map_err(|e| Error::Internal(format!("install progress handler: {e}")))?;
    let interrupt = conn.get_interrupt_handle();

    let (tx, rx) = mpsc::channel();
    let sql_owned = sql.to_string();
    std::thread::spawn(move || {
        let outcome = run_query(&conn, &sql_owned);
        let _ = tx.send(outcome);
    });

    match rx.recv_timeout(Duration::from_millis(timeout_ms) + HARD_CAP_GRACE) {
        Ok(Ok(mut result)) => {
            result.had_order_by = had_order_by;
            Ok(ExecStatus::Completed(result))
        }
        Ok(Err(e)) => {
            if is_interrupt(&e) {
                Ok(ExecStatus::TimedOut)
            } else {
                Ok(ExecStatus::Failed(e.to_string()))
            }
        }
        Err(_) => {
            // The worker missed even the grace window; interrupt it and
            // let the detached thread drain on its own.
            interrupt.interrupt();
            Ok(ExecStatus::TimedOut)
        }
    }
}

fn is_interrupt(e: &rusqlite::Error) -> bool {
    matches!(
        e,
        rusqlite::Error::SqliteFailure(
            rusqlite::ffi::Error {
                code: rusqlite::ErrorCode::OperationInterrupted,
                ..
            },
            _,
        )
    )
}

fn run_query(conn: &Connection, sql: &str) -> rusqlite::Result<ExecResult> {
    let mut stmt = conn.prepare(sql)?;
    let column_count = stmt.column_count();
    let columns: Vec<String> = stmt.column_names().iter().map(|s| s.to_string()).collect();
    let mut rows = Vec::new();
    let mut iter = stmt.query([])?;
    while let Some(row) = iter.next()? {
        let mut cells = Vec::with_capacity(column_count);
        for i in 0..column_count {
            cells.push(match row.get_ref(i)? {
                ValueRef::Null => SqlValue::Null,
                ValueRef::Integer(v) => SqlValue::Integer(v),
                ValueRef::Real(v) => SqlValue::Real(v),
                ValueRef::Text(t) => SqlValue::Text(String::from_utf8_lossy(t).into_owned()),
                ValueRef::Blob(b) => SqlValue::Blob(b.to_vec()),
            });
        }
        rows.push(cells);
    }
    Ok(ExecResult {
        columns,
        rows,
        had_order_by: false,
    })
}

/// Normalized cell. Reals are bucketized to 6 significant decimals and
/// integral reals collapse into the integer form, so `2.0` and `2`
/// normalize identically and `0.1+0.2` meets `0.3`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NormCell {
    Null,
    Num(String),
    Text(String),
}

impl NormCell {
    fn rank(&self) -> u8 {
        match self {
            NormCell::Null => 0,
            NormCell::Num(_) => 1,
            NormCell::Text(_) => 2,
        }
    }
}

impl Ord for NormCell {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        use std::cmp::Ordering;
        match self.rank().cmp(&other.rank()) {
            Ordering::Equal => match (self, other) {
                (NormCell::Num(a), NormCell::Num(b)) => {
                    let fa: f64 = a.parse().unwrap_or(0.0);
                    let fb: f64 = b.parse().unwrap_or(0.0);
                    fa.partial_cmp(&fb)
                        .unwrap_or(Ordering::Equal)
                        .then_with(|| a.cmp(b))
                }
                (NormCell::Text(a), NormCell::Text(b)) => a.cmp(b),
                _ => Ordering::Equal,
            },
            unequal => unequal,
        }
    }
}

impl PartialOrd for NormCell {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Result after cell normalization and the row-order rule. Two values are
/// equal exactly when `compare_results` would accept the pair they came
/// from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NormalizedResult {
    pub column_count: usize,
    pub rows: Vec<Vec<NormCell>>,
    pub order_sensitive: bool,
}

/// Round to 6 significant decimal digits through the shortest scientific
/// form; parsing back gives a canonical representative of the tolerance
/// bucket.
fn round_sig6(f: f64) -> f64 {
    if f == 0.0 {
        return 0.0;
    }
    format!("{:.5e}", f).parse().unwrap_or(f)
}

pub fn normalize_cell(v: &SqlValue) -> NormCell {
    match v {
        SqlValue::Null => NormCell::Null,
        SqlValue::Integer(i) => NormCell::Num(i.to_string()),
        SqlValue::Real(f) => {
            let r = round_sig6(*f);
            if r.fract() == 0.0 && r.abs() < 9.0e15 {
                NormCell::Num((r as i64).to_string())
            } else {
                NormCell::Num(r.to_string())
            }
        }
        SqlValue::Text(s) => NormCell::Text(s.clone()),
        SqlValue::Blob(b) => {
            let mut tagged = String::from("blob:");
            for byte in b {
                tagged.push_str(&format!("{byte:02x}"));
            }
            NormCell::Text(tagged)
        }
    }
}

pub fn normalize_result(r: &ExecResult, order_sensitive: bool) -> NormalizedResult {
    let mut rows: Vec<Vec<NormCell>> = r
        .rows
        .iter()
        .map(|row| row.iter().map(normalize_cell).collect())
        .collect();
    if !order_sensitive {
        rows.sort();
    }
    NormalizedResult {
        column_count: r.columns.len(),
        rows,
        order_sensitive,
    }
}

/// Positional result equality. Row order counts only when both queries
/// carried a top-level ORDER BY; column names never count.
pub fn compare_results(pred: &ExecResult, gold: &ExecResult) -> bool {
    let order_sensitive = pred.had_order_by && gold.had_order_by;
    normalize_result(pred, order_sensitive) == normalize_result(gold, order_sensitive)
}

/// Memoized gold-side execution, keyed by (gold SQL, database path).
#[derive(Default)]
pub struct GoldCache {
    inner: Mutex<HashMap<(String, PathBuf), Arc<ExecResult>>>,
}

impl GoldCache {
    pub fn new() -> Self {
        Self::default()
    }

    fn get(&self, key: &(String, PathBuf)) -> Option<Arc<ExecResult>> {
        self.inner.lock().expect("gold cache lock").get(key).cloned()
    }

    fn put(&self, key: (String, PathBuf), value: Arc<ExecResult>) {
        self.inner.lock().expect("gold cache lock").insert(key, value);
    }
}

/// Classify one prediction against its gold query on one database.
///
/// Gold failure of any kind is a dataset-integrity error, not a model
/// outcome.
pub fn classify_outcome(
    pred_sql: &str,
    gold_sql: &str,
    db_path: &Path,
    timeout_ms: u64,
) -> Result<ExecutionOutcome> {
    classify_outcome_cached(pred_sql, gold_sql, db_path, timeout_ms, &GoldCache::new())
}

pub fn classify_outcome_cached(
    pred_sql: &str,
    gold_sql: &str,
    db_path: &Path,
    timeout_ms: u64,
    cache: &GoldCache,
) -> Result<ExecutionOutcome> {
    let key = (gold_sql.to_string(), db_path.to_path_buf());
    let gold = match cache.get(&key) {
        Some(g) => g,
        None => {
            let gold = match execute_with_timeout(gold_sql, db_path, timeout_ms)? {
                ExecStatus::Completed(r) => Arc::new(r),
                ExecStatus::TimedOut => {
                    return Err(Error::DatasetIntegrity(format!(
                        "gold query timed out on {}: {gold_sql}",
                        db_path.display()
                    )))
                }
                ExecStatus::Failed(msg) => {
                    return Err(Error::DatasetIntegrity(format!(
                        "gold query failed on {}: {msg}: {gold_sql}",
                        db_path.display()
                    )))
                }
            };
            cache.put(key, gold.clone());
            gold
        }
    };
    if pred_sql.trim().is_empty() {
        return Ok(ExecutionOutcome::NonExecutable(
            "empty prediction".to_string(),
        ));
    }
    match execute_with_timeout(pred_sql, db_path, timeout_ms)? {
        ExecStatus::TimedOut => Ok(ExecutionOutcome::Timeout),
        ExecStatus::Failed(msg) => Ok(ExecutionOutcome::NonExecutable(msg)),
        ExecStatus::Completed(pred) => {
            if compare_results(&pred, &gold) {
                Ok(ExecutionOutcome::Correct)
            } else {
                Ok(ExecutionOutcome::ExecutableWrong)
            }
        }
    }
}

/// Taxonomy counts with the derived fractions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutcomeBreakdown {
    pub total: usize,
    pub correct: usize,
    pub executable_wrong: usize,
    pub timeout: usize,
    pub non_executable: usize,
}

impl OutcomeBreakdown {
    pub fn exacc(&self) -> f64 {
        self.correct as f64 / self.total as f64
    }

    /// Fraction of predictions that at least executed: everything except
    /// Timeout and NonExecutable.
    pub fn valid_sql(&self) -> f64 {
        (self.correct + self.executable_wrong) as f64 / self.total as f64
    }

    pub fn fraction(&self, outcome_kind: &str) -> f64 {
        let n = match outcome_kind {
            "correct" => self.correct,
            "executable_wrong" => self.executable_wrong,
            "timeout" => self.timeout,
            "non_executable" => self.non_executable,
            _ => 0,
        };
        n as f64 / self.total as f64
    }
}

/// Tally outcomes into the taxonomy. EXAcc is `breakdown.exacc()`.
pub fn exacc(outcomes: &[ExecutionOutcome]) -> Result<OutcomeBreakdown> {
    if outcomes.is_empty() {
        return Err(Error::UndefinedMetric(
            "execution accuracy over an empty outcome list".to_string(),
        ));
    }
    let mut b = OutcomeBreakdown {
        total: outcomes.len(),
        correct: 0,
        executable_wrong: 0,
        timeout: 0,
        non_executable: 0,
    };
    for o in outcomes {
        match o {
            ExecutionOutcome::Correct => b.correct += 1,
            ExecutionOutcome::ExecutableWrong => b.executable_wrong += 1,
            ExecutionOutcome::Timeout => b.timeout += 1,
            ExecutionOutcome::NonExecutable(_) => b.non_executable += 1,
        }
    }
    Ok(b)
}

/// Materialize a grid as a SQLite table (convenience for dataset builds
/// and fixtures). The table is created fresh; an existing table with the
/// same name is an error.
pub fn write_grid_to_sqlite(grid: &TableGrid, db_path: &Path) -> Result<()> {
    let conn = Connection::open(db_path)
        .map_err(|e| Error::Internal(format!("open {}: {e}", db_path.display())))?;
    write_grid_to_connection(grid, &conn)
}

pub fn write_grid_to_connection(grid: &TableGrid, conn: &Connection) -> Result<()> {
    let quoted = |name: &str| format!("\"{}\"", name.replace('"', "\"\""));
    let mut columns_sql = Vec::with_capacity(grid.column_count());
    for (c, name) in grid.columns().iter().enumerate() {
        let mut ty = "TEXT";
        let mut any_text = false;
        let mut any_real = false;
        let mut any_int = false;
        for row in grid.rows() {
            match row[c] {
                CellValue::Text(_) => any_text = true,
                CellValue::Real(_) => any_real = true,
                CellValue::Integer(_) => any_int = true,
                CellValue::Null => {}
            }
        }
        if !any_text {
            if any_real {
                ty = "REAL";
            } else if any_int {
                ty = "INTEGER";
            }
        }
        columns_sql.push(format!("{} {ty}", quoted(name)));
    }
    conn.execute(
        &format!(
            "CREATE TABLE {} ({})",
            quoted(grid.name()),
            columns_sql.join(", ")
        ),
        [],
    )?;
    let placeholders = vec!["?"; grid.column_count()].join(", ");
    let mut stmt = conn.prepare(&format!(
        "INSERT INTO {} VALUES ({placeholders})",
        quoted(grid.name())
    ))?;
    for row in grid.rows() {
        let params: Vec<rusqlite::types::Value> = row
            .iter()
            .map(|cell| match cell {
                CellValue::Text(s) => rusqlite::types::Value::Text(s.clone()),
                CellValue::Integer(i) => rusqlite::types::Value::Integer(*i),
                CellValue::Real(f) => rusqlite::types::Value::Real(*f),
                CellValue::Null => rusqlite::types::Value::Null,
            })
            .collect();
        stmt.execute(rusqlite::params_from_iter(params))?;
    }
    Ok(())
}
