//! Dataset construction, perturbation application, evaluation, and
//! robustness reporting.
//!
//! Everything here is deterministic given (inputs, seed, config): rebuilding
//! a dataset reproduces it byte for byte, and evaluation reports are
//! identical for any worker count except for per-row wall-clock fields.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::canon;
use crate::error::{Error, Result};
use crate::exec::{
    classify_outcome_cached, execute_with_timeout, exacc, write_grid_to_sqlite, ExecStatus,
    ExecutionOutcome, GoldCache, OutcomeBreakdown, DEFAULT_TIMEOUT_MS,
};
use crate::grid::{linearize, load_grid, TableGrid};
use crate::manifest::{
    DatasetManifest, ManifestRecord, PredictionSet, QuestionRecord, KNOWN_TAGS,
};
use crate::perturb::{
    delta_p, derangement, example_rng, header_mask, style_shift, PerturbationSpec,
};
use crate::render::{render, StylePool, StyleTemplate};
use crate::tokens::{
    count_table_text_tokens, ensure_matching_tokenizer, tokenizer_by_id, tsr, BudgetConfig,
    TokenStats,
};

/// Snaps a fraction to a 1e-9 grid so that aggregates computed from counts
/// compare exactly across reports and runs.
pub fn round_fraction(x: f64) -> f64 {
    (x * 1e9).round() / 1e9
}

/// Settings used while constructing a clean dataset.
#[derive(Debug, Clone)]
pub struct BuildConfig {
    pub tables_dir: PathBuf,
    pub questions_file: PathBuf,
    pub dbs_dir: PathBuf,
    pub out_dir: PathBuf,
    pub style: StyleTemplate,
    pub timeout_ms: u64,
    /// Create any missing database from the table grid instead of failing.
    pub synthesize_missing_dbs: bool,
}

impl BuildConfig {
    pub fn new(
        tables_dir: impl Into<PathBuf>,
        questions_file: impl Into<PathBuf>,
        dbs_dir: impl Into<PathBuf>,
        out_dir: impl Into<PathBuf>,
    ) -> Self {
        let style = StylePool::builtin().get("base").expect("builtin pool has base").clone();
        BuildConfig {
            tables_dir: tables_dir.into(),
            questions_file: questions_file.into(),
            dbs_dir: dbs_dir.into(),
            out_dir: out_dir.into(),
            style,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            synthesize_missing_dbs: false,
        }
    }
}

/// Path string for the manifest: relative to `root` when the file lives
/// under it, absolute otherwise. Both sides are absolutized first so a
/// relative input path never ends up re-resolved against the manifest
/// directory later.
fn store_path(path: &Path, root: &Path) -> String {
    let abs = std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf());
    let root = std::path::absolute(root).unwrap_or_else(|_| root.to_path_buf());
    match abs.strip_prefix(&root) {
        Ok(rel) => rel.to_string_lossy().into_owned(),
        Err(_) => abs.to_string_lossy().into_owned(),
    }
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn write_image_and_sidecar(
    img: &crate::render::RenderedImage,
    out_dir: &Path,
    example_id: &str,
) -> Result<String> {
    let rel = format!("images/{example_id}.png");
    write_bytes(&out_dir.join(&rel), &img.to_png_bytes()?)?;
    let sidecar = serde_json::to_vec_pretty(&img.geometry())
        .map_err(|e| Error::Internal(format!("serialize geometry sidecar: {e}")))?;
    write_bytes(&out_dir.join(format!("images/{example_id}.geometry.json")), &sidecar)?;
    Ok(rel)
}

/// Builds a clean dataset: renders every table, validates every gold query
/// against its database, and writes images, geometry sidecars, and the
/// manifest under `cfg.out_dir`.
///
/// Gold validation failures abort the build and list every offending
/// example, so a broken dataset is never half-written.
pub fn build_dataset(cfg: &BuildConfig) -> Result<DatasetManifest> {
    cfg.style.validate()?;
    let questions = crate::manifest::load_questions(&cfg.questions_file)?;

    struct Prepared {
        question: QuestionRecord,
        grid: TableGrid,
        table_path: PathBuf,
        db_path: PathBuf,
    }

    let mut prepared = Vec::with_capacity(questions.len());
    let mut offenders = Vec::new();
    for q in questions {
        let table_path = cfg.tables_dir.join(format!("{}.json", q.table));
        let grid = load_grid(&table_path)?;
        let mut db_path = cfg.dbs_dir.join(format!("{}.sqlite", q.table));
        if !db_path.exists() {
            if cfg.synthesize_missing_dbs {
                db_path = cfg.out_dir.join(format!("dbs/{}.sqlite", q.table));
                if !db_path.exists() {
                    if let Some(parent) = db_path.parent() {
                        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
                    }
                    write_grid_to_sqlite(&grid, &db_path)?;
                }
            } else {
                return Err(Error::DatasetIntegrity(format!(
                    "example '{}' references missing database {}",
                    q.example_id,
                    db_path.display()
                )));
            }
        }
        match execute_with_timeout(&q.gold_sql, &db_path, cfg.timeout_ms)? {
            ExecStatus::Completed(_) => {}
            ExecStatus::TimedOut => {
                offenders.push(format!("{}: gold query timed out", q.example_id));
            }
            ExecStatus::Failed(msg) => offenders.push(format!("{}: {msg}", q.example_id)),
        }
        prepared.push(Prepared { question: q, grid, table_path, db_path });
    }
    if !offenders.is_empty() {
        return Err(Error::DatasetIntegrity(format!(
            "gold SQL validation failed for {} example(s): {}",
            offenders.len(),
            offenders.join("; ")
        )));
    }

    let mut records = Vec::with_capacity(prepared.len());
    for p in &prepared {
        let img = render(&p.grid, &cfg.style)?;
        let image_rel = write_image_and_sidecar(&img, &cfg.out_dir, &p.question.example_id)?;
        records.push(ManifestRecord {
            example_id: p.question.example_id.clone(),
            question: p.question.question.clone(),
            gold_sql: p.question.gold_sql.clone(),
            table_file: store_path(&p.table_path, &cfg.out_dir),
            db_file: store_path(&p.db_path, &cfg.out_dir),
            image_file: Some(image_rel),
            template_id: cfg.style.template_id.clone(),
            perturbation_tag: "clean".into(),
            mask_record: None,
        });
    }
    let manifest = DatasetManifest::new(records, cfg.out_dir.clone())?;
    manifest.save(&cfg.out_dir.join("manifest.jsonl"))?;
    Ok(manifest)
}

fn resolve_template(pool: &StylePool, template_id: &str) -> Result<StyleTemplate> {
    if let Some(t) = pool.get(template_id) {
        return Ok(t.clone());
    }
    if let Some(t) = StylePool::builtin().get(template_id) {
        return Ok(t.clone());
    }
    Err(Error::Config(format!(
        "template '{template_id}' is neither in pool '{}' nor built in",
        pool.pool_id()
    )))
}

/// Applies one perturbation to every record of a clean manifest, writing the
/// perturbed images (where the perturbation touches pixels) and the new
/// manifest under `out_dir`.
///
/// All randomness flows through per-example generators derived from `seed`,
/// so the result is independent of iteration order.
pub fn perturb_dataset(
    manifest: &DatasetManifest,
    spec: &PerturbationSpec,
    seed: u64,
    pool: &StylePool,
    out_dir: &Path,
) -> Result<DatasetManifest> {
    spec.validate()?;
    let tag = spec.tag();
    let reroot = |stored: &str| store_path(&manifest.resolve(stored), out_dir);

    let mut records: Vec<ManifestRecord> = manifest
        .records()
        .iter()
        .map(|r| {
            let mut r = r.clone();
            r.table_file = reroot(&r.table_file);
            r.db_file = reroot(&r.db_file);
            r.image_file = r.image_file.as_deref().map(reroot);
            r.perturbation_tag = tag.to_string();
            r
        })
        .collect();

    match spec {
        PerturbationSpec::NoImage => {
            for r in &mut records {
                crate::perturb::no_image(&mut r.image_file);
                r.mask_record = None;
            }
        }
        PerturbationSpec::WrongTable => {
            let mut rng = example_rng(seed, "\u{0}wrongtable");
            let perm = derangement(records.len(), &mut rng)?;
            let sources: Vec<(Option<String>, String, Option<crate::perturb::MaskRecord>)> =
                records
                    .iter()
                    .map(|r| (r.image_file.clone(), r.template_id.clone(), r.mask_record.clone()))
                    .collect();
            for (i, r) in records.iter_mut().enumerate() {
                let (image, template, mask) = sources[perm[i]].clone();
                r.image_file = image;
                r.template_id = template;
                r.mask_record = mask;
            }
        }
        PerturbationSpec::StyleShift { pool_id } => {
            if pool.pool_id() != pool_id {
                return Err(Error::Config(format!(
                    "style shift asked for pool '{pool_id}' but pool '{}' was supplied",
                    pool.pool_id()
                )));
            }
            for r in &mut records {
                let mut rng = example_rng(seed, &r.example_id);
                let template = style_shift(&r.template_id, pool, &mut rng)?.clone();
                let grid = load_grid(out_dir.join(&r.table_file))?;
                let mut img = render(&grid, &template)?;
                img.seed = seed;
                r.image_file = Some(write_image_and_sidecar(&img, out_dir, &r.example_id)?);
                r.template_id = template.template_id.clone();
            }
        }
        PerturbationSpec::HeaderMask { ratio_cap, max_spans } => {
            let mut mask_lines = Vec::new();
            for r in &mut records {
                let template = resolve_template(pool, &r.template_id)?;
                let grid = load_grid(out_dir.join(&r.table_file))?;
                let mut img = render(&grid, &template)?;
                let mut rng = example_rng(seed, &r.example_id);
                let mask =
                    header_mask(&mut img, &r.example_id, *ratio_cap, *max_spans, &mut rng)?;
                img.seed = seed;
                r.image_file = Some(write_image_and_sidecar(&img, out_dir, &r.example_id)?);
                serde_json::to_writer(&mut mask_lines, &mask)
                    .map_err(|e| Error::Internal(format!("serialize mask record: {e}")))?;
                mask_lines.push(b'\n');
                r.mask_record = Some(mask);
            }
            write_bytes(&out_dir.join("masks.jsonl"), &mask_lines)?;
        }
    }

    let perturbed = DatasetManifest::new(records, out_dir.to_path_buf())?;
    perturbed.save(&out_dir.join("manifest.jsonl"))?;
    Ok(perturbed)
}

/// Evaluation settings; `jobs` is the worker count and everything else is
/// echoed into the report.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    pub seed: u64,
    pub timeout_ms: u64,
    pub jobs: usize,
    pub tokenizer_id: String,
    pub optical_budget: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            seed: 0,
            timeout_ms: DEFAULT_TIMEOUT_MS,
            jobs: 1,
            tokenizer_id: crate::tokens::DEFAULT_TOKENIZER_ID.into(),
            optical_budget: 256,
        }
    }
}

impl EvalConfig {
    fn validate(&self) -> Result<()> {
        if self.jobs == 0 {
            return Err(Error::Config("jobs must be at least 1".into()));
        }
        if self.timeout_ms == 0 {
            return Err(Error::Config("timeout must be at least 1 ms".into()));
        }
        tokenizer_by_id(&self.tokenizer_id)?;
        BudgetConfig::new(self.optical_budget)?;
        Ok(())
    }

    pub fn echo(&self) -> ConfigEcho {
        ConfigEcho {
            seed: self.seed,
            timeout_ms: self.timeout_ms,
            tokenizer_id: self.tokenizer_id.clone(),
            optical_budget: self.optical_budget,
        }
    }
}

/// Provenance block embedded in every report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub seed: u64,
    pub timeout_ms: u64,
    pub tokenizer_id: String,
    pub optical_budget: u64,
}

/// One persisted per-example evaluation row. Reports are recomputable from
/// these rows alone; `wall_ms` is the only field allowed to vary between
/// runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub example_id: String,
    #[serde(flatten)]
    pub outcome: ExecutionOutcome,
    pub ex_can: bool,
    pub canonical_pred: String,
    pub canonical_gold: String,
    pub pred_parse_ok: bool,
    pub gold_parse_ok: bool,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyEntry {
    pub count: usize,
    pub percent: f64,
}

/// Counts and percentages for the four execution outcomes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TaxonomyBreakdown {
    pub total: usize,
    pub correct: TaxonomyEntry,
    pub executable_wrong: TaxonomyEntry,
    pub timeout: TaxonomyEntry,
    pub non_executable: TaxonomyEntry,
}

impl TaxonomyBreakdown {
    pub fn from_counts(b: &OutcomeBreakdown) -> Self {
        let entry = |count: usize| TaxonomyEntry {
            count,
            percent: round_fraction(count as f64 / b.total as f64) * 100.0,
        };
        TaxonomyBreakdown {
            total: b.total,
            correct: entry(b.correct),
            executable_wrong: entry(b.executable_wrong),
            timeout: entry(b.timeout),
            non_executable: entry(b.non_executable),
        }
    }
}

/// Aggregate evaluation report. All fractions sit on a 1e-9 grid so reports
/// from different runs compare exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub perturbation_tag: String,
    pub exacc: f64,
    pub ex_can: f64,
    pub valid_sql: f64,
    pub taxonomy: TaxonomyBreakdown,
    pub token_stats: TokenStats,
    pub deltas: BTreeMap<String, f64>,
    pub config: ConfigEcho,
}

impl MetricsReport {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::json(path, e))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Internal(format!("serialize report: {e}")))?;
        write_bytes(path, &text)
    }

    /// Renders the report as an aligned text table.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("split: {}\n\n", self.perturbation_tag));
        out.push_str(&format!("{:<10} {:>10}\n", "metric", "value"));
        out.push_str(&format!("{:<10} {:>10.4}\n", "EXAcc", self.exacc));
        out.push_str(&format!("{:<10} {:>10.4}\n", "EX-Can", self.ex_can));
        out.push_str(&format!("{:<10} {:>10.4}\n", "ValidSQL", self.valid_sql));
        out.push_str(&format!("{:<10} {:>10.4}\n\n", "TSR", self.token_stats.tsr));
        out.push_str(&format!("{:<17} {:>6} {:>8}\n", "outcome", "count", "percent"));
        let rows = [
            ("correct", self.taxonomy.correct),
            ("executable_wrong", self.taxonomy.executable_wrong),
            ("timeout", self.taxonomy.timeout),
            ("non_executable", self.taxonomy.non_executable),
        ];
        for (name, entry) in rows {
            out.push_str(&format!(
                "{:<17} {:>6} {:>7.2}%\n",
                name, entry.count, entry.percent
            ));
        }
        if !self.deltas.is_empty() {
            out.push_str(&format!("\n{:<13} {:>8}\n", "perturbation", "delta"));
            for (tag, delta) in &self.deltas {
                out.push_str(&format!("{tag:<13} {delta:>8.4}\n"));
            }
        }
        out.push_str(&format!(
            "\nconfig: seed={} timeout_ms={} tokenizer={} budget={}\n",
            self.config.seed,
            self.config.timeout_ms,
            self.config.tokenizer_id,
            self.config.optical_budget
        ));
        out
    }
}

/// A metrics report plus the per-example rows it was computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub metrics: MetricsReport,
    pub rows: Vec<EvalRow>,
}

impl EvalReport {
    /// Writes `report.json`, `rows.jsonl`, and `report.txt` under `out_dir`.
    pub fn save(&self, out_dir: &Path) -> Result<()> {
        self.metrics.save(&out_dir.join("report.json"))?;
        let mut lines = Vec::new();
        for row in &self.rows {
            serde_json::to_writer(&mut lines, row)
                .map_err(|e| Error::Internal(format!("serialize row: {e}")))?;
            lines.push(b'\n');
        }
        write_bytes(&out_dir.join("rows.jsonl"), &lines)?;
        write_bytes(&out_dir.join("report.txt"), self.metrics.to_text().as_bytes())
    }
}

/// Counts table-text tokens for every manifest example and computes the
/// savings ratio against the optical budget. Examples sharing a table file
/// share one count.
pub fn token_stats_for_manifest(
    manifest: &DatasetManifest,
    tokenizer_id: &str,
    optical_budget: u64,
) -> Result<TokenStats> {
    let tokenizer = tokenizer_by_id(tokenizer_id)?;
    let budget = BudgetConfig::new(optical_budget)?;
    let mut count_by_table: HashMap<String, u64> = HashMap::new();
    let mut counts = Vec::with_capacity(manifest.records().len());
    for record in manifest.records() {
        let count = match count_by_table.get(&record.table_file) {
            Some(&c) => c,
            None => {
                let grid = load_grid(manifest.resolve(&record.table_file))?;
                let c = count_table_text_tokens(&linearize(&grid), tokenizer.as_ref());
                count_by_table.insert(record.table_file.clone(), c);
                c
            }
        };
        counts.push((record.example_id.clone(), count));
    }
    tsr(&counts, tokenizer_id, &budget)
}

/// Outcome counts and the canonical-match fraction recomputed from rows.
pub fn summarize_rows(rows: &[EvalRow]) -> Result<(OutcomeBreakdown, f64)> {
    let outcomes: Vec<ExecutionOutcome> = rows.iter().map(|r| r.outcome.clone()).collect();
    let breakdown = exacc(&outcomes)?;
    let ex_can_fraction =
        round_fraction(rows.iter().filter(|r| r.ex_can).count() as f64 / rows.len() as f64);
    Ok((breakdown, ex_can_fraction))
}

fn canonical_text(sql: &str) -> (String, bool) {
    match canon::canonicalize(sql) {
        Ok(c) => (c.text, c.parse_succeeded),
        Err(_) => (sql.trim().to_string(), false),
    }
}

fn eval_one(
    record: &ManifestRecord,
    manifest: &DatasetManifest,
    predictions: &PredictionSet,
    cfg: &EvalConfig,
    cache: &GoldCache,
) -> Result<EvalRow> {
    let started = Instant::now();
    let db_path = manifest.resolve(&record.db_file);
    let prediction = predictions.get(&record.example_id);
    let outcome = match prediction {
        None => ExecutionOutcome::NonExecutable("missing".into()),
        Some(sql) => {
            classify_outcome_cached(sql, &record.gold_sql, &db_path, cfg.timeout_ms, cache)?
        }
    };
    let (canonical_gold, gold_parse_ok) = canonical_text(&record.gold_sql);
    let (canonical_pred, pred_parse_ok, ex_can) = match prediction {
        None => (String::new(), false, false),
        Some(sql) => {
            let (text, ok) = canonical_text(sql);
            let matches = canon::ex_can(sql, &record.gold_sql);
            (text, ok, matches)
        }
    };
    Ok(EvalRow {
        example_id: record.example_id.clone(),
        outcome,
        ex_can,
        canonical_pred,
        canonical_gold,
        pred_parse_ok,
        gold_parse_ok,
        wall_ms: started.elapsed().as_millis() as u64,
    })
}

/// Scores `predictions` against `manifest`.
///
/// Work fans out to `cfg.jobs` workers over an atomic index; rows land in
/// index-addressed slots, so the report does not depend on scheduling. A
/// missing prediction scores as non-executable with reason "missing"; a
/// prediction for an unknown example id is a hard error.
pub fn evaluate(
    manifest: &DatasetManifest,
    predictions: &PredictionSet,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    cfg.validate()?;
    predictions.check_against(manifest)?;
    for record in manifest.records() {
        if let Some(image) = &record.image_file {
            let path = manifest.resolve(image);
            if !path.exists() {
                return Err(Error::DatasetIntegrity(format!(
                    "example '{}' references missing image {}",
                    record.example_id,
                    path.display()
                )));
            }
        }
    }

    let records = manifest.records();
    let cache = GoldCache::new();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<(usize, Result<EvalRow>)>();
    std::thread::scope(|scope| {
        for _ in 0..cfg.jobs.min(records.len()).max(1) {
            let tx = tx.clone();
            let cache = &cache;
            let next = &next;
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= records.len() {
                    break;
                }
                let row = eval_one(&records[i], manifest, predictions, cfg, cache);
                if tx.send((i, row)).is_err() {
                    break;
                }
            });
        }
    });
    drop(tx);

    let mut slots: Vec<Option<Result<EvalRow>>> = (0..records.len()).map(|_| None).collect();
    for (i, row) in rx {
        slots[i] = Some(row);
    }
    let mut rows = Vec::with_capacity(records.len());
    for (i, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(row) => rows.push(row?),
            None => {
                return Err(Error::Internal(format!("evaluation produced no row for index {i}")))
            }
        }
    }

    let (breakdown, ex_can_fraction) = summarize_rows(&rows)?;
    let token_stats =
        token_stats_for_manifest(manifest, &cfg.tokenizer_id, cfg.optical_budget)?;

    let tag = manifest.uniform_tag().map(str::to_string).unwrap_or_else(|_| "mixed".into());
    let metrics = MetricsReport {
        perturbation_tag: tag,
        exacc: round_fraction(breakdown.exacc()),
        ex_can: ex_can_fraction,
        valid_sql: round_fraction(breakdown.valid_sql()),
        taxonomy: TaxonomyBreakdown::from_counts(&breakdown),
        token_stats,
        deltas: BTreeMap::new(),
        config: cfg.echo(),
    };
    Ok(EvalReport { metrics, rows })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessRow {
    pub perturbation_tag: String,
    pub exacc: f64,
    pub delta: f64,
}

/// Clean accuracy next to each perturbed accuracy and its drop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RobustnessTable {
    pub clean_exacc: f64,
    pub rows: Vec<RobustnessRow>,
    pub config: ConfigEcho,
}

impl RobustnessTable {
    pub fn deltas(&self) -> BTreeMap<String, f64> {
        self.rows.iter().map(|r| (r.perturbation_tag.clone(), r.delta)).collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_vec_pretty(self)
            .map_err(|e| Error::Internal(format!("serialize robustness table: {e}")))?;
        write_bytes(path, &text)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("{:<13} {:>8} {:>8}\n", "perturbation", "exacc", "delta"));
        out.push_str(&format!("{:<13} {:>8.4} {:>8}\n", "clean", self.clean_exacc, "-"));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<13} {:>8.4} {:>8.4}\n",
                row.perturbation_tag, row.exacc, row.delta
            ));
        }
        out
    }
}

/// Computes the accuracy drop of each perturbed report against the clean
/// one. Reports must agree on tokenizer, budget, and timeout, the clean
/// report must actually be clean, and no perturbation may appear twice.
pub fn report_diff(
    clean: &MetricsReport,
    perturbed: &[MetricsReport],
) -> Result<RobustnessTable> {
    if clean.perturbation_tag != "clean" {
        return Err(Error::Config(format!(
            "baseline report has perturbation_tag '{}', expected 'clean'",
            clean.perturbation_tag
        )));
    }
    let mut rows = Vec::with_capacity(perturbed.len());
    let mut seen = HashSet::new();
    for report in perturbed {
        ensure_matching_tokenizer(&clean.config.tokenizer_id, &report.config.tokenizer_id)?;
        if report.config.optical_budget != clean.config.optical_budget {
            return Err(Error::Config(format!(
                "optical budgets differ: {} vs {}",
                clean.config.optical_budget, report.config.optical_budget
            )));
        }
        if report.config.timeout_ms != clean.config.timeout_ms {
            return Err(Error::Config(format!(
                "timeouts differ: {} ms vs {} ms",
                clean.config.timeout_ms, report.config.timeout_ms
            )));
        }
        let tag = report.perturbation_tag.as_str();
        if tag == "clean" || !KNOWN_TAGS.contains(&tag) {
            return Err(Error::Config(format!(
                "perturbed report has unusable perturbation_tag '{tag}'"
            )));
        }
        if !seen.insert(tag.to_string()) {
            return Err(Error::Config(format!("two reports share perturbation_tag '{tag}'")));
        }
        rows.push(RobustnessRow {
            perturbation_tag: tag.to_string(),
            exacc: report.exacc,
            delta: round_fraction(delta_p(clean.exacc, report.exacc)?),
        });
    }
    Ok(RobustnessTable { clean_exacc: clean.exacc, rows, config: clean.config.clone() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{grid_to_document, CellValue};
    use crate::manifest::PredictionRecord;

    fn sample_grid(name: &str, rows: usize) -> TableGrid {
        let data: Vec<Vec<CellValue>> = (0..rows)
            .map(|i| {
                vec![
                    CellValue::Integer(i as i64 + 1),
                    CellValue::text(format!("item{}", i + 1)),
                    CellValue::Real((i as f64 + 1.0) * 2.5),
                ]
            })
            .collect();
        TableGrid::new(name, vec!["id".into(), "label".into(), "price".into()], data).unwrap()
    }

    struct Fixture {
        _dir: tempfile::TempDir,
        cfg: BuildConfig,
    }

    fn fixture(n_examples: usize) -> Fixture {
        let dir = tempfile::tempdir().unwrap();
        let tables = dir.path().join("tables");
        std::fs::create_dir_all(&tables).unwrap();
        let grid = sample_grid("inventory", 4);
        std::fs::write(tables.join("inventory.json"), grid_to_document(&grid)).unwrap();

        let questions: Vec<String> = (0..n_examples)
            .map(|i| {
                serde_json::to_string(&QuestionRecord {
                    example_id: format!("ex-{i}"),
                    question: "How many items?".into(),
                    table: "inventory".into(),
                    gold_sql: format!("select count(*) from inventory where id >= {}", i % 3),
                })
                .unwrap()
            })
            .collect();
        let questions_file = dir.path().join("questions.jsonl");
        std::fs::write(&questions_file, questions.join("\n") + "\n").unwrap();

        let mut cfg = BuildConfig::new(
            tables,
            questions_file,
            dir.path().join("dbs"),
            dir.path().join("out"),
        );
        cfg.synthesize_missing_dbs = true;
        Fixture { _dir: dir, cfg }
    }

    #[test]
    fn build_produces_a_clean_manifest_with_images_and_sidecars() {
        let f = fixture(3);
        let manifest = build_dataset(&f.cfg).unwrap();
        assert_eq!(manifest.records().len(), 3);
        assert_eq!(manifest.uniform_tag().unwrap(), "clean");
        for r in manifest.records() {
            let image = manifest.resolve(r.image_file.as_ref().unwrap());
            assert!(image.exists());
            assert!(image.with_extension("").with_extension("geometry.json").exists());
            assert!(manifest.resolve(&r.db_file).exists());
            assert_eq!(r.template_id, "base");
        }
        assert!(f.cfg.out_dir.join("manifest.jsonl").exists());
    }

    #[test]
    fn rebuilding_is_byte_identical() {
        let f = fixture(2);
        build_dataset(&f.cfg).unwrap();
        let manifest_bytes = std::fs::read(f.cfg.out_dir.join("manifest.jsonl")).unwrap();
        let image_bytes = std::fs::read(f.cfg.out_dir.join("images/ex-0.png")).unwrap();
        build_dataset(&f.cfg).unwrap();
        assert_eq!(std::fs::read(f.cfg.out_dir.join("manifest.jsonl")).unwrap(), manifest_bytes);
        assert_eq!(std::fs::read(f.cfg.out_dir.join("images/ex-0.png")).unwrap(), image_bytes);
    }

    #[test]
    fn build_aborts_listing_every_bad_gold_query() {
        let f = fixture(2);
        let extra = [
            QuestionRecord {
                example_id: "bad-1".into(),
                question: "?".into(),
                table: "inventory".into(),
                gold_sql: "select missing_column from inventory".into(),
            },
            QuestionRecord {
                example_id: "bad-2".into(),
                question: "?".into(),
                table: "inventory".into(),
                gold_sql: "select * from nonexistent_table".into(),
            },
        ];
        let mut text = std::fs::read_to_string(&f.cfg.questions_file).unwrap();
        for q in &extra {
            text.push_str(&serde_json::to_string(q).unwrap());
            text.push('\n');
        }
        std::fs::write(&f.cfg.questions_file, text).unwrap();
        let err = build_dataset(&f.cfg).unwrap_err();
        let msg = err.to_string();
        assert!(matches!(err, Error::DatasetIntegrity(_)));
        assert!(msg.contains("bad-1") && msg.contains("bad-2"), "got: {msg}");
        assert!(!f.cfg.out_dir.join("manifest.jsonl").exists());
    }

    fn predictions_matching_gold(manifest: &DatasetManifest) -> PredictionSet {
        let records: Vec<PredictionRecord> = manifest
            .records()
            .iter()
            .map(|r| PredictionRecord {
                example_id: r.example_id.clone(),
                predicted_sql: r.gold_sql.clone(),
            })
            .collect();
        PredictionSet::from_records(records).unwrap()
    }

    #[test]
    fn perfect_predictions_score_one_across_the_board() {
        let f = fixture(4);
        let manifest = build_dataset(&f.cfg).unwrap();
        let report =
            evaluate(&manifest, &predictions_matching_gold(&manifest), &EvalConfig::default())
                .unwrap();
        assert_eq!(report.metrics.exacc, 1.0);
        assert_eq!(report.metrics.ex_can, 1.0);
        assert_eq!(report.metrics.valid_sql, 1.0);
        assert_eq!(report.metrics.taxonomy.correct.count, 4);
        assert_eq!(report.metrics.perturbation_tag, "clean");
        assert!(report.rows.iter().all(|r| r.gold_parse_ok && r.pred_parse_ok));
    }

    #[test]
    fn missing_predictions_score_as_missing_and_unknown_ids_fail() {
        let f = fixture(3);
        let manifest = build_dataset(&f.cfg).unwrap();
        let one = PredictionSet::from_records(vec![PredictionRecord {
            example_id: "ex-0".into(),
            predicted_sql: manifest.records()[0].gold_sql.clone(),
        }])
        .unwrap();
        let report = evaluate(&manifest, &one, &EvalConfig::default()).unwrap();
        assert_eq!(report.metrics.taxonomy.correct.count, 1);
        assert_eq!(report.metrics.taxonomy.non_executable.count, 2);
        let missing: Vec<&EvalRow> = report
            .rows
            .iter()
            .filter(|r| r.outcome == ExecutionOutcome::NonExecutable("missing".into()))
            .collect();
        assert_eq!(missing.len(), 2);
        assert!(missing.iter().all(|r| !r.ex_can && r.canonical_pred.is_empty()));

        let stranger = PredictionSet::from_records(vec![PredictionRecord {
            example_id: "ghost".into(),
            predicted_sql: "select 1".into(),
        }])
        .unwrap();
        let err = evaluate(&manifest, &stranger, &EvalConfig::default()).unwrap_err();
        assert!(err.to_string().contains("ghost"));
    }

    #[test]
    fn worker_count_does_not_change_the_report() {
        let f = fixture(12);
        let manifest = build_dataset(&f.cfg).unwrap();
        let preds = predictions_matching_gold(&manifest);
        let one = evaluate(&manifest, &preds, &EvalConfig { jobs: 1, ..Default::default() })
            .unwrap();
        let eight = evaluate(&manifest, &preds, &EvalConfig { jobs: 8, ..Default::default() })
            .unwrap();
        assert_eq!(one.metrics, eight.metrics);
        let strip = |rows: &[EvalRow]| -> Vec<EvalRow> {
            rows.iter().cloned().map(|mut r| {
                r.wall_ms = 0;
                r
            })
            .collect()
        };
        assert_eq!(strip(&one.rows), strip(&eight.rows));
    }

    #[test]
    fn aggregates_are_recomputable_from_persisted_rows() {
        let f = fixture(5);
        let manifest = build_dataset(&f.cfg).unwrap();
        let mut records: Vec<PredictionRecord> = manifest
            .records()
            .iter()
            .map(|r| PredictionRecord {
                example_id: r.example_id.clone(),
                predicted_sql: r.gold_sql.clone(),
            })
            .collect();
        records[0].predicted_sql = "select broken from".into();
        records[1].predicted_sql = "select count(*) from inventory where id >= 999".into();
        let preds = PredictionSet::from_records(records).unwrap();
        let report = evaluate(&manifest, &preds, &EvalConfig::default()).unwrap();
        let (breakdown, ex_can_fraction) = summarize_rows(&report.rows).unwrap();
        assert_eq!(report.metrics.exacc, round_fraction(breakdown.exacc()));
        assert_eq!(report.metrics.ex_can, ex_can_fraction);
        assert_eq!(report.metrics.valid_sql, round_fraction(breakdown.valid_sql()));
        assert_eq!(report.metrics.taxonomy, TaxonomyBreakdown::from_counts(&breakdown));
        assert!(report.metrics.exacc <= report.metrics.valid_sql);
    }

    #[test]
    fn eval_outputs_round_trip_on_disk() {
        let f = fixture(2);
        let manifest = build_dataset(&f.cfg).unwrap();
        let report =
            evaluate(&manifest, &predictions_matching_gold(&manifest), &EvalConfig::default())
                .unwrap();
        let out = f.cfg.out_dir.join("eval");
        report.save(&out).unwrap();
        let loaded = MetricsReport::load(&out.join("report.json")).unwrap();
        assert_eq!(loaded, report.metrics);
        let rows_text = std::fs::read_to_string(out.join("rows.jsonl")).unwrap();
        assert_eq!(rows_text.lines().count(), 2);
        let text = std::fs::read_to_string(out.join("report.txt")).unwrap();
        assert!(text.contains("EXAcc"));
    }

    #[test]
    fn no_image_perturbation_nulls_images_and_is_idempotent() {
        let f = fixture(3);
        let manifest = build_dataset(&f.cfg).unwrap();
        let out = f.cfg.out_dir.join("noimage");
        let pool = StylePool::builtin();
        let perturbed =
            perturb_dataset(&manifest, &PerturbationSpec::NoImage, 9, &pool, &out).unwrap();
        assert_eq!(perturbed.uniform_tag().unwrap(), "noimage");
        assert!(perturbed.records().iter().all(|r| r.image_file.is_none()));
        let again =
            perturb_dataset(&perturbed, &PerturbationSpec::NoImage, 9, &pool, &out).unwrap();
        assert_eq!(again.records(), perturbed.records());
    }

    #[test]
    fn wrong_table_derangement_moves_every_image_and_reproduces() {
        let f = fixture(5);
        let manifest = build_dataset(&f.cfg).unwrap();
        let pool = StylePool::builtin();
        let out_a = f.cfg.out_dir.join("wrong-a");
        let out_b = f.cfg.out_dir.join("wrong-b");
        let a = perturb_dataset(&manifest, &PerturbationSpec::WrongTable, 4, &pool, &out_a)
            .unwrap();
        let b = perturb_dataset(&manifest, &PerturbationSpec::WrongTable, 4, &pool, &out_b)
            .unwrap();
        for (orig, moved) in manifest.records().iter().zip(a.records()) {
            assert_ne!(
                manifest.resolve(orig.image_file.as_ref().unwrap()),
                a.resolve(moved.image_file.as_ref().unwrap()),
                "every example must get a different example's image"
            );
            assert_eq!(orig.gold_sql, moved.gold_sql);
        }
        let images = |m: &DatasetManifest| -> Vec<Option<String>> {
            m.records().iter().map(|r| r.image_file.clone()).collect()
        };
        assert_eq!(images(&a), images(&b));
    }

    #[test]
    fn style_shift_changes_templates_and_writes_new_images() {
        let f = fixture(3);
        let manifest = build_dataset(&f.cfg).unwrap();
        let pool = StylePool::builtin();
        let out = f.cfg.out_dir.join("shift");
        let spec = PerturbationSpec::StyleShift { pool_id: "builtin".into() };
        let shifted = perturb_dataset(&manifest, &spec, 21, &pool, &out).unwrap();
        for r in shifted.records() {
            assert_ne!(r.template_id, "base");
            assert!(shifted.resolve(r.image_file.as_ref().unwrap()).exists());
        }
        let wrong_pool = PerturbationSpec::StyleShift { pool_id: "elsewhere".into() };
        assert!(perturb_dataset(&manifest, &wrong_pool, 21, &pool, &out).is_err());
    }

    #[test]
    fn header_mask_records_masks_in_manifest_and_sidecar_file() {
        let f = fixture(3);
        let manifest = build_dataset(&f.cfg).unwrap();
        let pool = StylePool::builtin();
        let out = f.cfg.out_dir.join("mask");
        let shifted = perturb_dataset(
            &manifest,
            &PerturbationSpec::header_mask_default(),
            13,
            &pool,
            &out,
        )
        .unwrap();
        assert_eq!(shifted.uniform_tag().unwrap(), "headermask");
        for r in shifted.records() {
            let mask = r.mask_record.as_ref().unwrap();
            assert_eq!(mask.example_id, r.example_id);
            assert!(mask.warning.is_none());
        }
        let masks = std::fs::read_to_string(out.join("masks.jsonl")).unwrap();
        assert_eq!(masks.lines().count(), 3);
    }

    fn report_with(tag: &str, exacc: f64) -> MetricsReport {
        let cfg = EvalConfig::default();
        MetricsReport {
            perturbation_tag: tag.into(),
            exacc,
            ex_can: exacc,
            valid_sql: exacc,
            taxonomy: TaxonomyBreakdown::from_counts(&OutcomeBreakdown {
                total: 100,
                correct: (exacc * 100.0) as usize,
                executable_wrong: 0,
                timeout: 0,
                non_executable: 100 - (exacc * 100.0) as usize,
            }),
            token_stats: TokenStats {
                tokenizer_id: cfg.tokenizer_id.clone(),
                optical_budget: cfg.optical_budget,
                mean_table_text_tokens: 100.0,
                mean_optical_tokens: cfg.optical_budget as f64,
                tsr: 100.0 / cfg.optical_budget as f64,
                per_example: vec![],
            },
            deltas: BTreeMap::new(),
            config: cfg.echo(),
        }
    }

    #[test]
    fn report_diff_computes_exact_deltas() {
        let clean = report_with("clean", 0.66);
        let perturbed = [
            report_with("noimage", 0.15),
            report_with("wrongtable", 0.22),
            report_with("headermask", 0.06),
        ];
        let table = report_diff(&clean, &perturbed).unwrap();
        assert_eq!(table.clean_exacc, 0.66);
        let deltas = table.deltas();
        assert_eq!(deltas["noimage"], 0.51);
        assert_eq!(deltas["wrongtable"], 0.44);
        assert_eq!(deltas["headermask"], 0.60);
        let text = table.to_text();
        assert!(text.contains("clean") && text.contains("noimage"));
    }

    #[test]
    fn report_diff_rejects_mismatched_or_malformed_inputs() {
        let clean = report_with("clean", 0.5);
        let mut other_tok = report_with("noimage", 0.4);
        other_tok.config.tokenizer_id = "other".into();
        assert!(report_diff(&clean, &[other_tok]).is_err());

        let mut other_budget = report_with("noimage", 0.4);
        other_budget.config.optical_budget = 64;
        assert!(report_diff(&clean, &[other_budget]).is_err());

        let not_clean = report_with("noimage", 0.5);
        assert!(report_diff(&not_clean, &[report_with("headermask", 0.4)]).is_err());

        let dup = [report_with("noimage", 0.4), report_with("noimage", 0.3)];
        assert!(report_diff(&clean, &dup).is_err());

        assert!(report_diff(&clean, &[report_with("clean", 0.4)]).is_err());

        let same = report_diff(&clean, &[report_with("noimage", 0.5)]).unwrap();
        assert_eq!(same.rows[0].delta, 0.0);
    }

    #[test]
    fn evaluation_fails_when_a_referenced_image_is_missing() {
        let f = fixture(2);
        let manifest = build_dataset(&f.cfg).unwrap();
        std::fs::remove_file(f.cfg.out_dir.join("images/ex-1.png")).unwrap();
        let err =
            evaluate(&manifest, &predictions_matching_gold(&manifest), &EvalConfig::default())
                .unwrap_err();
        assert!(matches!(err, Error::DatasetIntegrity(_)));
        assert!(err.to_string().contains("ex-1"));
    }
}
