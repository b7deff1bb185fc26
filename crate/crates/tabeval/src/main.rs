//! Command-line front end over the library: dataset construction,
//! perturbation, evaluation, token accounting, canonicalization, and
//! robustness diffing.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 dataset or input
//! integrity error, 3 internal error.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Deserialize;

use tabeval::error::{Error, Result};
use tabeval::harness::{
    build_dataset, evaluate, perturb_dataset, report_diff, token_stats_for_manifest,
    BuildConfig, EvalConfig, MetricsReport,
};
use tabeval::manifest::{DatasetManifest, PredictionSet};
use tabeval::perturb::{PerturbationSpec, DEFAULT_MAX_SPANS, MAX_RATIO_CAP};
use tabeval::render::StylePool;

/// Environment variable consulted for the seed when neither the flag nor the
/// config file provides one.
const ENV_SEED: &str = "TABEVAL_SEED";

#[derive(Parser)]
#[command(
    name = "tabeval",
    version,
    about = "Dataset toolkit and execution-based evaluation harness for SQL over rendered tables",
    after_help = "Option precedence: command-line flags, then the --config file, then the \
TABEVAL_SEED environment variable (seed only), then built-in defaults."
)]
struct Cli {
    /// JSON file with default values for seed, timeout_ms, jobs, tokenizer,
    /// and budget.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render tables, validate gold SQL, and write a clean dataset.
    Build(BuildArgs),
    /// Apply a seeded visual perturbation to a built dataset.
    Perturb(PerturbArgs),
    /// Score a prediction file against a dataset manifest.
    Eval(EvalArgs),
    /// Report table-text token counts and the savings ratio.
    Tokens(TokensArgs),
    /// Canonicalize one SQL statement from a file or stdin.
    Canon(CanonArgs),
    /// Compare perturbed evaluation reports against a clean baseline.
    ReportDiff(ReportDiffArgs),
}

#[derive(Args)]
struct BuildArgs {
    /// Directory holding one <table>.json grid file per table.
    #[arg(long, value_name = "DIR")]
    tables: PathBuf,
    /// Newline-delimited question records.
    #[arg(long, value_name = "FILE")]
    questions: PathBuf,
    /// Directory holding one <table>.sqlite database per table.
    #[arg(long, value_name = "DIR")]
    dbs: PathBuf,
    /// Output dataset directory.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Template id to render with.
    #[arg(long, default_value = "base")]
    style: String,
    /// Style pool file to resolve --style against (default: built-in pool).
    #[arg(long, value_name = "FILE")]
    style_pool: Option<PathBuf>,
    #[arg(long, value_name = "MS")]
    timeout_ms: Option<u64>,
    /// Create missing databases from the table grids.
    #[arg(long)]
    synthesize_dbs: bool,
}

#[derive(Copy, Clone, PartialEq, Eq, ValueEnum)]
enum PerturbKind {
    Styleshift,
    Headermask,
    Noimage,
    Wrongtable,
}

#[derive(Args)]
struct PerturbArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_enum)]
    kind: PerturbKind,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Style pool file (default: built-in pool).
    #[arg(long, value_name = "FILE")]
    pool: Option<PathBuf>,
    /// Header-mask cover fraction cap, in (0, 1/3].
    #[arg(long)]
    ratio_cap: Option<f64>,
    /// Header-mask maximum span count.
    #[arg(long)]
    max_spans: Option<u32>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long, value_name = "FILE")]
    predictions: PathBuf,
    /// Directory for report.json, rows.jsonl, and report.txt.
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, value_name = "MS")]
    timeout_ms: Option<u64>,
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    tokenizer: Option<String>,
    /// Optical tokens per image.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct TokensArgs {
    #[arg(long, value_name = "FILE")]
    manifest: PathBuf,
    #[arg(long)]
    tokenizer: Option<String>,
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Args)]
struct CanonArgs {
    /// SQL file to canonicalize; stdin when omitted.
    #[arg(value_name = "FILE")]
    input: Option<PathBuf>,
}

#[derive(Args)]
struct ReportDiffArgs {
    /// Clean baseline report (report.json from eval).
    #[arg(long, value_name = "FILE")]
    clean: PathBuf,
    /// Perturbed reports to diff against the baseline.
    #[arg(long, value_name = "FILE", num_args = 1.., required = true)]
    perturbed: Vec<PathBuf>,
    /// File to write the robustness table to as JSON.
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

/// Defaults file; flags override anything set here.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    timeout_ms: Option<u64>,
    jobs: Option<usize>,
    tokenizer: Option<String>,
    budget: Option<u64>,
}

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else { return Ok(FileConfig::default()) };
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("config file {}: {e}", path.display())))
    }

    fn seed(&self, flag: Option<u64>) -> Result<u64> {
        if let Some(seed) = flag.or(self.seed) {
            return Ok(seed);
        }
        match std::env::var(ENV_SEED) {
            Ok(raw) => raw.parse().map_err(|_| {
                Error::Config(format!("{ENV_SEED} must be an unsigned integer, got '{raw}'"))
            }),
            Err(_) => Ok(0),
        }
    }

    fn eval_config(&self, args: &EvalArgs) -> Result<EvalConfig> {
        let defaults = EvalConfig::default();
        Ok(EvalConfig {
            seed: self.seed(args.seed)?,
            timeout_ms: args.timeout_ms.or(self.timeout_ms).unwrap_or(defaults.timeout_ms),
            jobs: args.jobs.or(self.jobs).unwrap_or(defaults.jobs),
            tokenizer_id: args
                .tokenizer
                .clone()
                .or_else(|| self.tokenizer.clone())
                .unwrap_or(defaults.tokenizer_id),
            optical_budget: args.budget.or(self.budget).unwrap_or(defaults.optical_budget),
        })
    }
}

fn load_pool(path: Option<&Path>) -> Result<StylePool> {
    match path {
        Some(p) => StylePool::from_file(p),
        None => Ok(StylePool::builtin()),
    }
}

/// Writes to stdout, swallowing closed-pipe errors so `tabeval ... | head`
/// ends quietly instead of panicking.
fn emit(text: &str) {
    use std::io::Write;
    let _ = std::io::stdout().write_all(text.as_bytes());
}

fn emitln(text: &str) {
    emit(text);
    emit("\n");
}

fn run(cli: Cli) -> Result<()> {
    let file_cfg = FileConfig::load(cli.config.as_deref())?;
    match cli.command {
        Command::Build(args) => {
            let pool = load_pool(args.style_pool.as_deref())?;
            let style = pool.get(&args.style).cloned().ok_or_else(|| {
                Error::Config(format!(
                    "template '{}' not found in pool '{}'",
                    args.style,
                    pool.pool_id()
                ))
            })?;
            let mut cfg = BuildConfig::new(args.tables, args.questions, args.dbs, args.out);
            cfg.style = style;
            if let Some(t) = args.timeout_ms.or(file_cfg.timeout_ms) {
                cfg.timeout_ms = t;
            }
            cfg.synthesize_missing_dbs = args.synthesize_dbs;
            let manifest = build_dataset(&cfg)?;
            emitln(&format!(
                "built {} examples into {}",
                manifest.records().len(),
                cfg.out_dir.display()
            ));
        }
        Command::Perturb(args) => {
            let seed = file_cfg.seed(args.seed)?;
            let manifest = DatasetManifest::load(&args.manifest)?;
            let pool = load_pool(args.pool.as_deref())?;
            let spec = match args.kind {
                PerturbKind::Styleshift => {
                    PerturbationSpec::StyleShift { pool_id: pool.pool_id().to_string() }
                }
                PerturbKind::Headermask => PerturbationSpec::HeaderMask {
                    ratio_cap: args.ratio_cap.unwrap_or(MAX_RATIO_CAP),
                    max_spans: args.max_spans.unwrap_or(DEFAULT_MAX_SPANS),
                },
                PerturbKind::Noimage => PerturbationSpec::NoImage,
                PerturbKind::Wrongtable => PerturbationSpec::WrongTable,
            };
            let perturbed = perturb_dataset(&manifest, &spec, seed, &pool, &args.out)?;
            emitln(&format!(
                "wrote {} {} examples to {}",
                perturbed.records().len(),
                spec.tag(),
                args.out.display()
            ));
        }
        Command::Eval(args) => {
            let cfg = file_cfg.eval_config(&args)?;
            let manifest = DatasetManifest::load(&args.manifest)?;
            let predictions = PredictionSet::load(&args.predictions)?;
            let report = evaluate(&manifest, &predictions, &cfg)?;
            report.save(&args.out)?;
            emit(&report.metrics.to_text());
        }
        Command::Tokens(args) => {
            let manifest = DatasetManifest::load(&args.manifest)?;
            let defaults = EvalConfig::default();
            let tokenizer = args
                .tokenizer
                .or_else(|| file_cfg.tokenizer.clone())
                .unwrap_or(defaults.tokenizer_id);
            let budget = args.budget.or(file_cfg.budget).unwrap_or(defaults.optical_budget);
            let stats = token_stats_for_manifest(&manifest, &tokenizer, budget)?;
            let json = serde_json::to_string_pretty(&stats)
                .map_err(|e| Error::Internal(format!("serialize token stats: {e}")))?;
            emitln(&json);
        }
        Command::Canon(args) => {
            let sql = match &args.input {
                Some(path) => {
                    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?
                }
                None => {
                    let mut buf = String::new();
                    std::io::stdin()
                        .read_to_string(&mut buf)
                        .map_err(|e| Error::Internal(format!("read stdin: {e}")))?;
                    buf
                }
            };
            let canonical = tabeval::canon::canonicalize(&sql)?;
            if !canonical.parse_succeeded {
                eprintln!("warning: statement did not parse; string-level passes only");
            }
            emitln(&canonical.text);
        }
        Command::ReportDiff(args) => {
            let clean = MetricsReport::load(&args.clean)?;
            let perturbed = args
                .perturbed
                .iter()
                .map(|p| MetricsReport::load(p))
                .collect::<Result<Vec<_>>>()?;
            let table = report_diff(&clean, &perturbed)?;
            if let Some(out) = &args.out {
                table.save(out)?;
            }
            emit(&table.to_text());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let usage_ok =
                matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion);
            let _ = e.print();
            return if usage_ok { ExitCode::SUCCESS } else { ExitCode::from(1) };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
