//! `fflm` command line: `score`, `tune`, `eval-detect`, `eval-rate`.
//!
//! Scoring is the only step that talks to a backend; it writes one JSON
//! line per example holding every delta, so tuning and evaluation can be
//! rerun under different weights without re-querying the model.
//!
//! Exit codes: 2 configuration error, 3 dataset error, 4 backend error.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backend::{
    CachedBackend, CountingBackend, HttpBackend, ReplayStore, ScoringBackend, StoreMode,
    SyntheticBackend,
};
use crate::dataset::{self, DatasetMode, EvalExample, Split};
use crate::eval::{
    self, error_type_analysis, CorrelationLevel, CorrelationReport, ErrorAnalysisConfig,
    ErrorTypeReport, EvalError,
};
use crate::extraction::{
    build_pair_bundle, BundleMeta, ExtractionConfig, ExtractionError, TruncationPolicy,
    DEFAULT_CONTEXT_BUDGET,
};
use crate::metrics::{self, Ablation, DeltaForm, DeltaTriple, MetricScores, MetricWeights};
use crate::par;
use crate::serde_ext::extended_f64;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("dataset error: {0}")]
    Dataset(String),
    #[error("backend error: {0}")]
    Backend(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Config(_) => 2,
            CliError::Dataset(_) => 3,
            CliError::Backend(_) => 4,
        }
    }
}

impl From<dataset::DatasetError> for CliError {
    fn from(e: dataset::DatasetError) -> Self {
        CliError::Dataset(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        CliError::Dataset(e.to_string())
    }
}

impl From<ExtractionError> for CliError {
    fn from(e: ExtractionError) -> Self {
        match e {
            ExtractionError::InvalidConfig(m) => CliError::Config(m),
            ExtractionError::EmptyInput(_) | ExtractionError::BudgetExceeded(_) => {
                CliError::Dataset(e.to_string())
            }
            ExtractionError::Backend { .. } | ExtractionError::Misaligned(_) => {
                CliError::Backend(e.to_string())
            }
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "fflm",
    version,
    about = "Summary faithfulness scoring and evaluation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every (document, summary) pair in a dataset.
    Score(ScoreArgs),
    /// Grid-search weights and a threshold on a validation split.
    Tune(TuneArgs),
    /// Balanced accuracy on a test split with tuned weights and threshold.
    EvalDetect(EvalDetectArgs),
    /// Correlation with human ratings at summary or system level.
    EvalRate(EvalRateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AblateFlag {
    /// Subtract probabilities instead of log probabilities.
    Log,
    /// Drop the per-token e^p weights.
    Weights,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TruncationArg {
    Tail,
    Error,
}

#[derive(Debug, Clone, Args)]
pub struct ScoreArgs {
    /// Dataset (JSON lines).
    #[arg(long)]
    pub input: PathBuf,
    /// `http:<url>`, `synthetic:<seed>` or `replay-only`.
    #[arg(long)]
    pub backend: String,
    /// Replay store (JSON lines); read-write unless the backend is replay-only.
    #[arg(long)]
    pub replay: Option<PathBuf>,
    #[arg(long, default_value = "default")]
    pub model_id: String,
    /// Separator between conditioning and target; `\n` and `\t` escapes are
    /// expanded.
    #[arg(long, default_value = "\\nTL;DR\\n")]
    pub separator: String,
    /// Text between the summary prefix and the document.
    #[arg(long, default_value = "\\n")]
    pub joiner: String,
    #[arg(long, default_value_t = DEFAULT_CONTEXT_BUDGET)]
    pub context_budget: usize,
    #[arg(long, value_enum, default_value = "tail")]
    pub truncation: TruncationArg,
    /// alpha,beta,delta
    #[arg(long, default_value = "0.25,0.25,0.5")]
    pub weights: String,
    #[arg(long, value_enum)]
    pub ablate: Vec<AblateFlag>,
    #[arg(long, default_value_t = 1)]
    pub parallelism: usize,
    /// Only score this split.
    #[arg(long)]
    pub split: Option<Split>,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct TuneArgs {
    /// Score file written by `score`.
    #[arg(long)]
    pub scores: PathBuf,
    /// Detection dataset with labels.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "val")]
    pub split: Split,
    #[arg(long, default_value_t = 0.1)]
    pub step: f64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct EvalDetectArgs {
    #[arg(long)]
    pub scores: PathBuf,
    #[arg(long)]
    pub input: PathBuf,
    /// JSON written by `tune`.
    #[arg(long)]
    pub tuned: PathBuf,
    #[arg(long, default_value = "test")]
    pub split: Split,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MetricArg {
    Fflm,
    Cop,
    Harim,
    AvgLogprob,
    DYPrior,
    DXPrior,
    DYCond,
}

#[derive(Debug, Clone, Args)]
pub struct EvalRateArgs {
    #[arg(long)]
    pub scores: PathBuf,
    /// Rating dataset.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value = "summary")]
    pub level: CorrelationLevel,
    #[arg(long, value_enum, default_value = "fflm")]
    pub metric: MetricArg,
    /// Recombine FFLM with these weights instead of the ones used at
    /// scoring time.
    #[arg(long)]
    pub weights: Option<String>,
    #[arg(long)]
    pub split: Option<Split>,
    /// Also run the per-error-type analysis with this many errors per draw.
    #[arg(long)]
    pub n_per_type: Option<usize>,
    #[arg(long, default_value_t = 10)]
    pub repeats: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BackendSpec {
    Http(String),
    Synthetic(u64),
    ReplayOnly,
}

impl std::str::FromStr for BackendSpec {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "replay-only" {
            return Ok(BackendSpec::ReplayOnly);
        }
        if let Some(seed) = s.strip_prefix("synthetic:") {
            return seed
                .parse()
                .map(BackendSpec::Synthetic)
                .map_err(|_| format!("bad synthetic seed {seed:?}"));
        }
        if s.starts_with("http://") || s.starts_with("https://") {
            return Ok(BackendSpec::Http(s.to_owned()));
        }
        if let Some(url) = s.strip_prefix("http:") {
            if url.is_empty() {
                return Err("http backend needs a url".into());
            }
            return Ok(BackendSpec::Http(url.to_owned()));
        }
        Err(format!(
            "unknown backend {s:?} (expected http:<url>, synthetic:<seed> or replay-only)"
        ))
    }
}

/// Parses `a,b,d` into validated weights.
pub fn parse_weights(s: &str) -> Result<MetricWeights, CliError> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(CliError::Config(format!(
            "--weights expects a,b,d; got {s:?}"
        )));
    }
    let mut v = [0.0; 3];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p
            .parse()
            .map_err(|_| CliError::Config(format!("bad weight {p:?}")))?;
    }
    MetricWeights::new(v[0], v[1], v[2]).map_err(|e| CliError::Config(e.to_string()))
}

/// Expands `\n`, `\t`, `\r` and `\\`.
pub fn unescape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('\\') => out.push('\\'),
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

/// Everything needed to reproduce a score file. Thread count and output
/// path are excluded: they do not affect the rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub input: PathBuf,
    pub backend: String,
    pub replay: Option<PathBuf>,
    pub extraction: ExtractionConfig,
    pub weights: MetricWeights,
    pub ablation: Ablation,
    pub split: Option<Split>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRow {
    pub id: String,
    pub scores: MetricScores,
    pub meta: BundleMeta,
    pub run: RunConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScoreRunStats {
    pub rows: usize,
    /// Calls that reached the model backend (HTTP or synthetic).
    pub backend_calls: usize,
    pub cache_hits: usize,
}

fn ablation_from(flags: &[AblateFlag]) -> Ablation {
    Ablation {
        use_log: !flags.contains(&AblateFlag::Log),
        use_token_weights: !flags.contains(&AblateFlag::Weights),
    }
}

impl<B: ScoringBackend + ?Sized> ScoringBackend for Arc<B> {
    fn score(
        &self,
        request: &crate::backend::ScoreRequest,
    ) -> Result<crate::backend::TokenProbSeries, crate::backend::BackendError> {
        (**self).score(request)
    }

    fn count_tokens(&self, text: &str) -> usize {
        (**self).count_tokens(text)
    }
}

/// Writes `contents` atomically to `path`, or to stdout when `path` is
/// `None`. Nothing is left behind on failure.
fn write_output(path: Option<&Path>, contents: &[u8]) -> Result<(), CliError> {
    let Some(path) = path else {
        let mut stdout = std::io::stdout().lock();
        return stdout
            .write_all(contents)
            .and_then(|_| stdout.flush())
            .map_err(|e| CliError::Io(e.to_string()));
    };
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    tmp.write_all(contents)
        .map_err(|e| CliError::Io(e.to_string()))?;
    tmp.persist(path)
        .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(())
}

fn to_json_doc<T: Serialize>(value: &T) -> Result<Vec<u8>, CliError> {
    let mut out = serde_json::to_vec_pretty(value).map_err(|e| CliError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

pub fn cmd_score(args: &ScoreArgs) -> Result<ScoreRunStats, CliError> {
    let spec: BackendSpec = args.backend.parse().map_err(CliError::Config)?;
    let weights = parse_weights(&args.weights)?;
    if args.parallelism == 0 {
        return Err(CliError::Config("--parallelism must be >= 1".into()));
    }
    let extraction = ExtractionConfig {
        separator: unescape(&args.separator),
        prefix_joiner: unescape(&args.joiner),
        context_budget: args.context_budget,
        truncation_policy: match args.truncation {
            TruncationArg::Tail => TruncationPolicy::TruncateDocumentTail,
            TruncationArg::Error => TruncationPolicy::Error,
        },
        model_id: args.model_id.clone(),
    };
    extraction.validate()?;
    let ablation = ablation_from(&args.ablate);
    if spec == BackendSpec::ReplayOnly && args.replay.is_none() {
        return Err(CliError::Config("replay-only needs --replay".into()));
    }

    let (examples, _) = dataset::load_dataset_any(&args.input)?;
    let examples = match args.split {
        Some(split) => dataset::split_filter(&examples, split),
        None => examples,
    };

    let upstream: Option<Arc<CountingBackend<Box<dyn ScoringBackend>>>> = match &spec {
        BackendSpec::Http(url) => Some(Arc::new(CountingBackend::new(Box::new(HttpBackend::new(
            url,
        ))))),
        BackendSpec::Synthetic(seed) => Some(Arc::new(CountingBackend::new(Box::new(
            SyntheticBackend::new(*seed),
        )))),
        BackendSpec::ReplayOnly => None,
    };
    let cached = match &args.replay {
        Some(path) => {
            let mode = if upstream.is_some() {
                StoreMode::ReadWrite
            } else {
                StoreMode::ReadOnly
            };
            let store =
                ReplayStore::open(path, mode).map_err(|e| CliError::Backend(e.to_string()))?;
            let inner = upstream
                .clone()
                .map(|b| Box::new(b) as Box<dyn ScoringBackend>);
            Some(CachedBackend::new(store, inner))
        }
        None => None,
    };
    let backend: &dyn ScoringBackend = match (&cached, &upstream) {
        (Some(c), _) => c,
        (None, Some(u)) => u,
        (None, None) => unreachable!("replay-only without --replay rejected above"),
    };

    let run = RunConfig {
        input: args.input.clone(),
        backend: args.backend.clone(),
        replay: args.replay.clone(),
        extraction: extraction.clone(),
        weights,
        ablation,
        split: args.split,
    };

    let results: Vec<Result<ScoreRow, CliError>> = par::with_threads(args.parallelism, || {
        par::map(&examples, |example| {
            let bundle =
                build_pair_bundle(&example.document, &example.summary, &extraction, backend)
                    .map_err(|e| match CliError::from(e) {
                        CliError::Backend(m) => {
                            CliError::Backend(format!("example {}: {m}", example.id))
                        }
                        CliError::Dataset(m) => {
                            CliError::Dataset(format!("example {}: {m}", example.id))
                        }
                        other => other,
                    })?;
            let scores = metrics::score_pair(&bundle, &weights, ablation)
                .map_err(|e| CliError::Backend(format!("example {}: {e}", example.id)))?;
            Ok(ScoreRow {
                id: example.id.clone(),
                scores,
                meta: bundle.meta,
                run: run.clone(),
            })
        })
    });

    let mut out = Vec::new();
    for row in results {
        let row = row?;
        serde_json::to_writer(&mut out, &row).map_err(|e| CliError::Io(e.to_string()))?;
        out.push(b'\n');
    }
    write_output(args.output.as_deref(), &out)?;

    let stats = ScoreRunStats {
        rows: examples.len(),
        backend_calls: upstream.as_ref().map_or(0, |u| u.calls()),
        cache_hits: cached.as_ref().map_or(0, |c| c.hits()),
    };
    log::info!(
        "scored {} examples: {} backend calls, {} cache hits",
        stats.rows,
        stats.backend_calls,
        stats.cache_hits
    );
    Ok(stats)
}

pub fn read_score_rows(path: &Path) -> Result<Vec<ScoreRow>, CliError> {
    let file =
        File::open(path).map_err(|e| CliError::Dataset(format!("{}: {e}", path.display())))?;
    let mut rows = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| CliError::Dataset(e.to_string()))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: ScoreRow = serde_json::from_str(&line)
            .map_err(|e| CliError::Dataset(format!("{} line {}: {e}", path.display(), i + 1)))?;
        rows.push(row);
    }
    Ok(rows)
}

/// Pairs the examples of `split` with their score rows. Every score id must
/// exist in the dataset, and every example of the split must be scored.
fn join_scores<'a>(
    rows: &'a [ScoreRow],
    examples: &'a [EvalExample],
    split: Option<Split>,
) -> Result<Vec<(&'a EvalExample, &'a ScoreRow)>, CliError> {
    let by_id: HashMap<&str, &EvalExample> = examples.iter().map(|e| (e.id.as_str(), e)).collect();
    let mut scored: HashMap<&str, &ScoreRow> = HashMap::new();
    for row in rows {
        if !by_id.contains_key(row.id.as_str()) {
            return Err(CliError::Dataset(format!(
                "scored id {:?} is not in the dataset",
                row.id
            )));
        }
        if scored.insert(row.id.as_str(), row).is_some() {
            return Err(CliError::Dataset(format!(
                "id {:?} is scored twice",
                row.id
            )));
        }
    }
    examples
        .iter()
        .filter(|e| split.is_none_or(|s| e.split == s))
        .map(|e| {
            scored
                .get(e.id.as_str())
                .map(|row| (e, *row))
                .ok_or_else(|| CliError::Dataset(format!("example {:?} has no score row", e.id)))
        })
        .collect()
}

fn uniform_form(pairs: &[(&EvalExample, &ScoreRow)]) -> Result<DeltaForm, CliError> {
    let mut forms = pairs.iter().map(|(_, r)| r.scores.deltas_weighted.form);
    let first = forms
        .next()
        .ok_or_else(|| CliError::Dataset("no examples in the selected split".into()))?;
    if forms.any(|f| f != first) {
        return Err(CliError::Dataset(
            "score rows mix different delta forms".into(),
        ));
    }
    Ok(first)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneOutput {
    pub weights: MetricWeights,
    #[serde(with = "extended_f64")]
    pub threshold: f64,
    pub validation_ba: f64,
    pub combos_evaluated: usize,
    pub step: f64,
    pub delta_form: DeltaForm,
    pub n: usize,
    pub split: Split,
    pub scores: PathBuf,
    pub input: PathBuf,
}

pub fn cmd_tune(args: &TuneArgs) -> Result<TuneOutput, CliError> {
    let (examples, _) = dataset::load_dataset(&args.input, DatasetMode::Detection)?;
    let rows = read_score_rows(&args.scores)?;
    let pairs = join_scores(&rows, &examples, Some(args.split))?;
    let form = uniform_form(&pairs)?;
    let deltas: Vec<DeltaTriple> = pairs
        .iter()
        .map(|(_, r)| r.scores.deltas_weighted)
        .collect();
    let labels: Vec<bool> = pairs.iter().map(|(e, _)| e.label == Some(1)).collect();
    let result = eval::grid_search_weights(&deltas, &labels, args.step)?;
    log::info!("evaluated {} weight combinations", result.combos_evaluated);
    let output = TuneOutput {
        weights: result.weights,
        threshold: result.threshold,
        validation_ba: result.balanced_accuracy,
        combos_evaluated: result.combos_evaluated,
        step: args.step,
        delta_form: form,
        n: pairs.len(),
        split: args.split,
        scores: args.scores.clone(),
        input: args.input.clone(),
    };
    write_output(args.output.as_deref(), &to_json_doc(&output)?)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectOutput {
    #[serde(flatten)]
    pub report: eval::DetectionReport,
    pub split: Split,
    pub delta_form: DeltaForm,
    pub scores: PathBuf,
    pub input: PathBuf,
    pub tuned: PathBuf,
}

pub fn cmd_eval_detect(args: &EvalDetectArgs) -> Result<DetectOutput, CliError> {
    let tuned: TuneOutput = {
        let text = std::fs::read_to_string(&args.tuned)
            .map_err(|e| CliError::Config(format!("{}: {e}", args.tuned.display())))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {e}", args.tuned.display())))?
    };
    tuned
        .weights
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (examples, _) = dataset::load_dataset(&args.input, DatasetMode::Detection)?;
    let rows = read_score_rows(&args.scores)?;
    let pairs = join_scores(&rows, &examples, Some(args.split))?;
    let form = uniform_form(&pairs)?;
    if form != tuned.delta_form {
        return Err(CliError::Config(format!(
            "tuned on {:?} deltas but scores hold {:?} deltas",
            tuned.delta_form, form
        )));
    }
    let scores: Vec<f64> = pairs
        .iter()
        .map(|(_, r)| metrics::fflm(&r.scores.deltas_weighted, &tuned.weights))
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let labels: Vec<bool> = pairs.iter().map(|(e, _)| e.label == Some(1)).collect();
    let report = eval::evaluate_detection(&scores, &labels, tuned.threshold, tuned.weights)?;
    let output = DetectOutput {
        report,
        split: args.split,
        delta_form: form,
        scores: args.scores.clone(),
        input: args.input.clone(),
        tuned: args.tuned.clone(),
    };
    write_output(args.output.as_deref(), &to_json_doc(&output)?)?;
    Ok(output)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateOutput {
    #[serde(flatten)]
    pub report: CorrelationReport,
    pub metric: MetricArg,
    pub weights: Option<MetricWeights>,
    pub split: Option<Split>,
    pub scores: PathBuf,
    pub input: PathBuf,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_analysis: Option<ErrorTypeReport>,
}

fn metric_value(
    scores: &MetricScores,
    metric: MetricArg,
    weights: Option<&MetricWeights>,
) -> Result<f64, CliError> {
    let d = &scores.deltas_weighted;
    Ok(match metric {
        MetricArg::Fflm => match weights {
            Some(w) => metrics::fflm(d, w).map_err(|e| CliError::Config(e.to_string()))?,
            None => scores.fflm,
        },
        MetricArg::Cop => scores.cop,
        MetricArg::Harim => scores.harim,
        MetricArg::AvgLogprob => scores.avg_logprob,
        MetricArg::DYPrior => d.d_y_prior,
        MetricArg::DXPrior => d.d_x_prior,
        MetricArg::DYCond => d.d_y_cond,
    })
}

pub fn cmd_eval_rate(args: &EvalRateArgs) -> Result<RateOutput, CliError> {
    let weights = args.weights.as_deref().map(parse_weights).transpose()?;
    let (examples, _) = dataset::load_dataset(&args.input, DatasetMode::Rating)?;
    let rows = read_score_rows(&args.scores)?;
    let pairs = join_scores(&rows, &examples, args.split)?;
    if pairs.is_empty() {
        return Err(CliError::Dataset(
            "no examples in the selected split".into(),
        ));
    }
    let scores: Vec<f64> = pairs
        .iter()
        .map(|(_, r)| metric_value(&r.scores, args.metric, weights.as_ref()))
        .collect::<Result<_, _>>()?;
    let ratings: Vec<f64> = pairs
        .iter()
        .map(|(e, _)| e.rating.expect("rating-mode examples carry ratings"))
        .collect();

    let report = match args.level {
        CorrelationLevel::Summary => eval::summary_level_report(&scores, &ratings)?,
        CorrelationLevel::System => {
            let systems: Vec<Option<String>> =
                pairs.iter().map(|(e, _)| e.system.clone()).collect();
            eval::system_level_report(&systems, &scores, &ratings)?
        }
    };

    let error_analysis = match args.n_per_type {
        Some(n) => {
            let selected: Vec<EvalExample> = pairs.iter().map(|(e, _)| (*e).clone()).collect();
            Some(error_type_analysis(
                &selected,
                &scores,
                &ErrorAnalysisConfig {
                    n_per_type: n,
                    repeats: args.repeats,
                    seed: args.seed,
                    types: None,
                },
            )?)
        }
        None => None,
    };

    let output = RateOutput {
        report,
        metric: args.metric,
        weights,
        split: args.split,
        scores: args.scores.clone(),
        input: args.input.clone(),
        error_analysis,
    };
    write_output(args.output.as_deref(), &to_json_doc(&output)?)?;
    Ok(output)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Score(a) => cmd_score(&a).map(|_| ()),
        Command::Tune(a) => cmd_tune(&a).map(|_| ()),
        Command::EvalDetect(a) => cmd_eval_detect(&a).map(|_| ()),
        Command::EvalRate(a) => cmd_eval_rate(&a).map(|_| ()),
    }
}
