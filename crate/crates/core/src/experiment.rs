//! End-to-end experiment drivers behind the command-line tool: evaluation
//! tables, top-cited rankings, the `k` sensitivity sweep and corpus synthesis.
//!
//! Every driver is a pure function of its inputs and seed; outputs go to
//! distinct files under the spec's output directory.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::baselines::{Baseline, Fallback, NeighborIndex, DEFAULT_NEIGHBORS};
use crate::dataset::{self, CitationRecord, Corpus, SplitSpec, DEFAULT_HORIZON};
use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::metrics::{self, EvaluationReport, Mode, Window, OVERALL};
use crate::model::{self, ModelConfig, PredictionResult, Seq2SeqModel};
use crate::par::Execution;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Method {
    Nncp,
    Mey,
    Avr,
    Gmm,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Nncp, Method::Mey, Method::Avr, Method::Gmm];

    pub fn name(self) -> &'static str {
        match self {
            Method::Nncp => "NNCP",
            Method::Mey => "MEY",
            Method::Avr => "AVR",
            Method::Gmm => "GMM",
        }
    }

    fn baseline(self) -> Option<Baseline> {
        match self {
            Method::Nncp => None,
            Method::Mey => Some(Baseline::Mey),
            Method::Avr => Some(Baseline::Avr),
            Method::Gmm => Some(Baseline::Gmm),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "NNCP" => Ok(Method::Nncp),
            "MEY" => Ok(Method::Mey),
            "AVR" => Ok(Method::Avr),
            "GMM" => Ok(Method::Gmm),
            other => Err(Error::Argument(format!(
                "unknown method {other:?}, expected NNCP, MEY, AVR or GMM"
            ))),
        }
    }
}

/// Parses a comma-separated method list, dropping duplicates.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let mut out = Vec::new();
    for m in list.split(',').filter(|s| !s.trim().is_empty()) {
        let m: Method = m.parse()?;
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Argument("method list is empty".into()));
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ExperimentSpec {
    pub k: usize,
    pub n: usize,
    pub methods: Vec<Method>,
    pub neighbors: usize,
    pub seed: u64,
    pub split: SplitSpec,
    /// Network hyperparameters; `k`, `n` and `seed` are overridden per run.
    pub model: ModelConfig,
    /// Also report the pooled yearly score next to the per-year average.
    pub pooled_yearly: bool,
    pub out_dir: PathBuf,
    pub execution: Execution,
    /// Print training progress to stderr.
    pub progress: bool,
}

impl ExperimentSpec {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        ExperimentSpec {
            k: 5,
            n: DEFAULT_HORIZON,
            methods: Method::ALL.to_vec(),
            neighbors: DEFAULT_NEIGHBORS,
            seed: 42,
            split: SplitSpec::default(),
            model: ModelConfig::new(5, DEFAULT_HORIZON),
            pooled_yearly: false,
            out_dir: out_dir.into(),
            execution: Execution::default(),
            progress: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k >= self.n {
            return Err(Error::Argument(format!(
                "k = {} must be below n = {}",
                self.k, self.n
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Argument("no methods requested".into()));
        }
        if self.neighbors == 0 {
            return Err(Error::Argument("--neighbors must be positive".into()));
        }
        self.model_config(self.k).validate()
    }

    fn model_config(&self, k: usize) -> ModelConfig {
        ModelConfig {
            k,
            n: self.n,
            seed: self.seed,
            ..self.model.clone()
        }
    }

    fn modes(&self) -> Vec<Mode> {
        if self.pooled_yearly {
            vec![Mode::Yearly, Mode::YearlyPooled, Mode::Total]
        } else {
            vec![Mode::Yearly, Mode::Total]
        }
    }

    fn plot_dir(&self) -> Result<PathBuf> {
        let dir = self.out_dir.join("plotdata");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

fn check_horizon(corpus: &Corpus, n: usize) -> Result<()> {
    if corpus.horizon() < n {
        return Err(Error::Argument(format!(
            "corpus horizon {} is shorter than n = {n}",
            corpus.horizon()
        )));
    }
    Ok(())
}

/// Cache key for a trained model: corpus content plus full configuration.
fn model_key(train: &Corpus, config: &ModelConfig) -> Result<String> {
    let mut h = Sha256::new();
    h.update(train.fingerprint().as_bytes());
    h.update(serde_json::to_vec(config)?);
    Ok(h.finalize()
        .iter()
        .take(8)
        .map(|b| format!("{b:02x}"))
        .collect())
}

/// Trains NNCP, or loads it from `cache_dir` when a model with the same
/// corpus and configuration was trained before.
pub fn obtain_model(
    train: &Corpus,
    config: &ModelConfig,
    cache_dir: Option<&Path>,
    exec: Execution,
    progress: bool,
) -> Result<Seq2SeqModel> {
    let cached = match cache_dir {
        Some(dir) => Some(dir.join(format!(
            "nncp-k{}-s{}-{}.ckpt",
            config.k,
            config.seed,
            model_key(train, config)?
        ))),
        None => None,
    };
    if let Some(path) = cached.as_ref().filter(|p| p.exists()) {
        let model = model::load_model(path)?;
        if &model.config == config {
            return Ok(model);
        }
    }
    if progress {
        eprintln!(
            "training NNCP: k={} n={} hidden={} epochs={} on {} papers",
            config.k,
            config.n,
            config.hidden_dim,
            config.epochs,
            train.len()
        );
    }
    let epochs = config.epochs;
    let out = model::train_with(config, train, exec, |e, loss| {
        if progress && (e % 10 == 0 || e + 1 == epochs) {
            eprintln!("  epoch {:>4}  loss {loss:.4}", e + 1);
        }
    })?;
    if let Some(path) = cached {
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        model::save_model(&path, &out.model)?;
    }
    Ok(out.model)
}

/// Predictions of one method plus its per-journal fallback counts.
pub struct MethodPredictions {
    pub method: Method,
    pub predictions: Vec<PredictionResult>,
    pub fallbacks: BTreeMap<String, (usize, usize)>,
}

/// Runs every baseline in `methods` (NNCP is skipped) over `records`.
#[allow(clippy::too_many_arguments)]
pub fn predict_baselines(
    train: &Corpus,
    records: &[CitationRecord],
    methods: &[Method],
    k: usize,
    n: usize,
    neighbors: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<MethodPredictions>> {
    let index = NeighborIndex::build(train, k, n)?;
    let mut out = Vec::new();
    for &method in methods {
        let Some(baseline) = method.baseline() else {
            continue;
        };
        let results = exec.map(records, |r| baseline.predict(&index, r, neighbors, seed));
        let mut predictions = Vec::with_capacity(records.len());
        let mut fallbacks: BTreeMap<String, (usize, usize)> = BTreeMap::new();
        for (r, res) in records.iter().zip(results) {
            let (p, fb) = res?;
            match fb {
                Some(Fallback::FewerNeighbors(_)) => {
                    fallbacks.entry(r.journal_id.clone()).or_default().0 += 1
                }
                Some(Fallback::Mey) => fallbacks.entry(r.journal_id.clone()).or_default().1 += 1,
                None => {}
            }
            predictions.push(p);
        }
        out.push(MethodPredictions {
            method,
            predictions,
            fallbacks,
        });
    }
    Ok(out)
}

pub fn predict_nncp(
    model: &Seq2SeqModel,
    records: &[CitationRecord],
    exec: Execution,
) -> Result<Vec<PredictionResult>> {
    exec.map(records, |r| model::predict(model, r, model.config.k))
        .into_iter()
        .collect()
}

/// Predictions for every requested method, in the requested order.
fn predict_methods(
    spec: &ExperimentSpec,
    train: &Corpus,
    records: &[CitationRecord],
    k: usize,
    cache_dir: Option<&Path>,
) -> Result<(Vec<MethodPredictions>, Option<Seq2SeqModel>)> {
    let mut baselines = predict_baselines(
        train,
        records,
        &spec.methods,
        k,
        spec.n,
        spec.neighbors,
        spec.seed,
        spec.execution,
    )?
    .into_iter();
    let mut trained = None;
    let mut out = Vec::with_capacity(spec.methods.len());
    for &method in &spec.methods {
        if method == Method::Nncp {
            let model = obtain_model(
                train,
                &spec.model_config(k),
                cache_dir,
                spec.execution,
                spec.progress,
            )?;
            out.push(MethodPredictions {
                method,
                predictions: predict_nncp(&model, records, spec.execution)?,
                fallbacks: BTreeMap::new(),
            });
            trained = Some(model);
        } else {
            out.push(baselines.next().expect("one entry per baseline"));
        }
    }
    Ok((out, trained))
}

fn fallback_notes(preds: &[MethodPredictions], notes: &mut Vec<String>) {
    for p in preds {
        for (journal, (fewer, mey)) in &p.fallbacks {
            if *fewer > 0 {
                notes.push(format!(
                    "{}: {fewer} {journal} papers used every available neighbour (journal has fewer than L training papers)",
                    p.method.name()
                ));
            }
            if *mey > 0 {
                notes.push(format!(
                    "{}: {mey} {journal} papers fell back to MEY (fewer than 3 training papers)",
                    p.method.name()
                ));
            }
        }
    }
}

fn split_for(corpus: &Corpus, spec: &ExperimentSpec) -> Result<dataset::Split> {
    check_horizon(corpus, spec.n)?;
    let s = dataset::split(corpus, &spec.split)?;
    if s.train.is_empty() {
        return Err(Error::InsufficientData("training split is empty".into()));
    }
    if s.test.is_empty() {
        return Err(Error::InsufficientData("test split is empty".into()));
    }
    Ok(s)
}

fn dropped_note(dropped: usize) -> Option<String> {
    (dropped > 0).then(|| format!("{dropped} papers outside both year ranges were dropped"))
}

/// Plot table: one row per `x`, one column per method.
fn plot_csv(x_label: &str, methods: &[String], rows: &[(String, Vec<Option<f64>>)]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{x_label},{}", methods.join(","));
    for (x, values) in rows {
        out.push_str(x);
        for v in values {
            match v {
                Some(v) => {
                    let _ = write!(out, ",{v}");
                }
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

fn report_plots(report: &EvaluationReport, methods: &[String]) -> Vec<(String, String)> {
    let mut journals: Vec<&str> = Vec::new();
    for r in &report.rows {
        if !journals.contains(&r.journal.as_str()) {
            journals.push(&r.journal);
        }
    }
    let modes: Vec<Mode> = {
        let mut m: Vec<Mode> = report.rows.iter().map(|r| r.mode).collect();
        m.sort();
        m.dedup();
        m
    };
    let mut files = Vec::new();
    for mode in modes {
        for (metric, pick) in [("r2", true), ("rmse", false)] {
            let rows: Vec<(String, Vec<Option<f64>>)> = journals
                .iter()
                .map(|j| {
                    let vals = methods
                        .iter()
                        .map(|m| {
                            report.find(j, m, mode).and_then(|r| {
                                if pick {
                                    r.score.r2
                                } else {
                                    Some(r.score.rmse)
                                }
                            })
                        })
                        .collect();
                    (j.to_string(), vals)
                })
                .collect();
            files.push((
                format!("{}_{metric}.csv", mode.label()),
                plot_csv("journal", methods, &rows),
            ));
        }
    }
    files
}

/// Trains on the training split, predicts the test split with every
/// requested method and writes `report.json`, `report.txt`,
/// `plotdata/{yearly,total}_{r2,rmse}.csv` and, when NNCP ran, `model.ckpt`.
pub fn run_evaluate(corpus: &Corpus, spec: &ExperimentSpec) -> Result<EvaluationReport> {
    spec.validate()?;
    let s = split_for(corpus, spec)?;
    let (preds, model) = predict_methods(
        spec,
        &s.train,
        s.test.records(),
        spec.k,
        Some(&spec.out_dir.join("models")),
    )?;

    let named: Vec<(String, Vec<PredictionResult>)> = preds
        .iter()
        .map(|p| (p.method.name().to_string(), p.predictions.clone()))
        .collect();
    let mut report = metrics::evaluate(
        s.test.records(),
        &named,
        spec.k,
        spec.n,
        Window::after(spec.k, spec.n),
        &spec.modes(),
    )?;
    report.notes.extend(dropped_note(s.dropped));
    fallback_notes(&preds, &mut report.notes);

    write_file(&spec.out_dir.join("report.json"), &report.to_json()?)?;
    write_file(&spec.out_dir.join("report.txt"), &report.to_text())?;
    let methods: Vec<String> = spec.methods.iter().map(|m| m.name().to_string()).collect();
    let plot_dir = spec.plot_dir()?;
    for (name, body) in report_plots(&report, &methods) {
        write_file(&plot_dir.join(name), &body)?;
    }
    if let Some(model) = model {
        model::save_model(spec.out_dir.join("model.ckpt"), &model)?;
    }
    Ok(report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct JournalRanking {
    pub journal: String,
    /// Papers ranked: `min(100, test papers in the journal)`.
    pub ranked: usize,
    /// Best-prediction credit per method, in method order. Ties share one
    /// credit equally, so the values sum to `ranked`.
    pub wins: Vec<f64>,
    /// Papers on which two or more methods tied for the smallest RMSE.
    pub ties: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Top100Report {
    pub schema_version: u32,
    pub k: usize,
    pub n: usize,
    pub top: usize,
    pub methods: Vec<String>,
    pub journals: Vec<JournalRanking>,
    pub notes: Vec<String>,
}

impl Top100Report {
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "best-prediction frequency, top {} papers per journal by total citations, k = {}, n = {}",
            self.top, self.k, self.n
        );
        let _ = write!(out, "{:<10} {:>6}", "journal", "papers");
        for m in &self.methods {
            let _ = write!(out, " {m:>8}");
        }
        out.push('\n');
        for j in &self.journals {
            let _ = write!(out, "{:<10} {:>6}", j.journal, j.ranked);
            for w in &j.wins {
                let _ = write!(out, " {w:>8.2}");
            }
            out.push('\n');
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

pub const TOP_PAPERS: usize = 100;

/// Credits, per method, the papers on which it had the smallest RMSE over
/// years `k+1..=n`. `errors[p][m]` is method `m`'s error on paper `p`.
pub fn best_method_counts(errors: &[Vec<f64>]) -> (Vec<f64>, usize) {
    let methods = errors.first().map_or(0, Vec::len);
    let mut wins = vec![0.0; methods];
    let mut ties = 0;
    for row in errors {
        let best = row.iter().copied().fold(f64::INFINITY, f64::min);
        let winners: Vec<usize> = (0..methods).filter(|&m| row[m] == best).collect();
        if winners.len() > 1 {
            ties += 1;
        }
        let share = 1.0 / winners.len() as f64;
        for m in winners {
            wins[m] += share;
        }
    }
    (wins, ties)
}

/// Ranks each journal's most-cited test papers (total citations over all
/// observed years, ties by `paper_id`) and counts how often each method gives
/// the best prediction. Writes `top100.json`, `top100.txt` and
/// `plotdata/top100_frequency.csv`.
pub fn run_top100(corpus: &Corpus, spec: &ExperimentSpec) -> Result<Top100Report> {
    spec.validate()?;
    let s = split_for(corpus, spec)?;
    let mut notes: Vec<String> = dropped_note(s.dropped).into_iter().collect();

    let mut selected: Vec<CitationRecord> = Vec::new();
    let mut per_journal: Vec<(String, usize)> = Vec::new();
    for journal in s.test.journals() {
        let mut papers: Vec<&CitationRecord> = s.test.by_journal(journal).collect();
        if papers.is_empty() {
            notes.push(format!("{journal}: no test papers, skipped"));
            continue;
        }
        papers.sort_by(|a, b| {
            b.lifetime_citations()
                .cmp(&a.lifetime_citations())
                .then_with(|| a.paper_id.cmp(&b.paper_id))
        });
        let take = papers.len().min(TOP_PAPERS);
        if take < TOP_PAPERS {
            notes.push(format!(
                "{journal}: only {take} test papers, ranked all of them"
            ));
        }
        selected.extend(papers[..take].iter().map(|r| (*r).clone()));
        per_journal.push((journal.clone(), take));
    }

    let (preds, _) = predict_methods(
        spec,
        &s.train,
        &selected,
        spec.k,
        Some(&spec.out_dir.join("models")),
    )?;
    fallback_notes(&preds, &mut notes);
    let window = Window::after(spec.k, spec.n);
    let mut errors: Vec<Vec<f64>> = Vec::with_capacity(selected.len());
    for (i, r) in selected.iter().enumerate() {
        let actual = r.future(spec.k, spec.n);
        let row = preds
            .iter()
            .map(|p| {
                let pr = &p.predictions[i];
                let lo = window.first - pr.first_year;
                metrics::rmse(&actual, &pr.yearly[lo..lo + window.len()])
            })
            .collect::<Result<Vec<f64>>>()?;
        errors.push(row);
    }

    let mut journals = Vec::new();
    let mut offset = 0;
    for (journal, take) in per_journal {
        let (wins, ties) = best_method_counts(&errors[offset..offset + take]);
        offset += take;
        journals.push(JournalRanking {
            journal,
            ranked: take,
            wins,
            ties,
        });
    }
    let report = Top100Report {
        schema_version: metrics::REPORT_SCHEMA_VERSION,
        k: spec.k,
        n: spec.n,
        top: TOP_PAPERS,
        methods: spec.methods.iter().map(|m| m.name().to_string()).collect(),
        journals,
        notes,
    };

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(&spec.out_dir.join("top100.json"), &json)?;
    write_file(&spec.out_dir.join("top100.txt"), &report.to_text())?;
    let rows: Vec<(String, Vec<Option<f64>>)> = report
        .journals
        .iter()
        .map(|j| (j.journal.clone(), j.wins.iter().map(|&w| Some(w)).collect()))
        .collect();
    write_file(
        &spec.plot_dir()?.join("top100_frequency.csv"),
        &plot_csv("journal", &report.methods, &rows),
    )?;
    Ok(report)
}

pub const SENSITIVITY_WINDOW_START: usize = 7;
pub const SENSITIVITY_MAX_K: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityPoint {
    pub k: usize,
    pub window: Window,
    pub method: String,
    pub yearly: metrics::Score,
    pub total: metrics::Score,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub schema_version: u32,
    pub n: usize,
    pub methods: Vec<String>,
    pub points: Vec<SensitivityPoint>,
    pub notes: Vec<String>,
}

impl SensitivityReport {
    pub fn point(&self, k: usize, method: &str) -> Option<&SensitivityPoint> {
        self.points.iter().find(|p| p.k == k && p.method == method)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "sensitivity to k, target years {SENSITIVITY_WINDOW_START}..={}",
            self.n
        );
        let _ = writeln!(
            out,
            "{:>2}  {:<6} {:>10} {:>10} {:>10} {:>10}",
            "k", "method", "total_r2", "total_rmse", "yearly_r2", "yearly_rmse"
        );
        let fmt = |v: Option<f64>| v.map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}"));
        for p in &self.points {
            let _ = writeln!(
                out,
                "{:>2}  {:<6} {:>10} {:>10.4} {:>10} {:>10.4}",
                p.k,
                p.method,
                fmt(p.total.r2),
                p.total.rmse,
                fmt(p.yearly.r2),
                p.yearly.rmse
            );
        }
        for n in &self.notes {
            let _ = writeln!(out, "note: {n}");
        }
        out
    }
}

/// For `k = 0..=7`, predicts the fixed target years `7..=n` of every test
/// paper with each method (at `k = 7` only years after `k` are scored).
/// NNCP is retrained per `k`. Writes `sensitivity.json`, `sensitivity.txt`
/// and `plotdata/sensitivity_{total,yearly}_{r2,rmse}.csv`.
pub fn run_sensitivity(corpus: &Corpus, spec: &ExperimentSpec) -> Result<SensitivityReport> {
    if spec.n <= SENSITIVITY_MAX_K {
        return Err(Error::Argument(format!(
            "sensitivity sweep needs n >= {}, got {}",
            SENSITIVITY_MAX_K + 1,
            spec.n
        )));
    }
    spec.validate()?;
    let s = split_for(corpus, spec)?;
    let mut notes: Vec<String> = dropped_note(s.dropped).into_iter().collect();
    notes.push(format!(
        "k = {SENSITIVITY_MAX_K}: year {SENSITIVITY_WINDOW_START} is a known input, scored years start at {}",
        SENSITIVITY_MAX_K + 1
    ));
    let test: Vec<&CitationRecord> = s.test.records().iter().collect();
    let mut points = Vec::new();
    for k in 0..=SENSITIVITY_MAX_K {
        let window = Window {
            first: SENSITIVITY_WINDOW_START.max(k + 1),
            last: spec.n,
        };
        let (preds, _) = predict_methods(
            spec,
            &s.train,
            s.test.records(),
            k,
            Some(&spec.out_dir.join("models")),
        )?;
        if k == 0 {
            fallback_notes(&preds, &mut notes);
        }
        for p in &preds {
            let lookup = p
                .predictions
                .iter()
                .map(|x| (x.paper_id.as_str(), x))
                .collect();
            points.push(SensitivityPoint {
                k,
                window,
                method: p.method.name().to_string(),
                yearly: metrics::score(&test, &lookup, window, Mode::Yearly)?,
                total: metrics::score(&test, &lookup, window, Mode::Total)?,
            });
        }
    }
    let report = SensitivityReport {
        schema_version: metrics::REPORT_SCHEMA_VERSION,
        n: spec.n,
        methods: spec.methods.iter().map(|m| m.name().to_string()).collect(),
        points,
        notes,
    };

    let mut json = serde_json::to_string_pretty(&report)?;
    json.push('\n');
    write_file(&spec.out_dir.join("sensitivity.json"), &json)?;
    write_file(&spec.out_dir.join("sensitivity.txt"), &report.to_text())?;
    let plot_dir = spec.plot_dir()?;
    type Pick = fn(&SensitivityPoint) -> Option<f64>;
    let series: [(&str, Pick); 4] = [
        ("total_r2", |p| p.total.r2),
        ("total_rmse", |p| Some(p.total.rmse)),
        ("yearly_r2", |p| p.yearly.r2),
        ("yearly_rmse", |p| Some(p.yearly.rmse)),
    ];
    for (name, pick) in series {
        let rows: Vec<(String, Vec<Option<f64>>)> = (0..=SENSITIVITY_MAX_K)
            .map(|k| {
                let vals = report
                    .methods
                    .iter()
                    .map(|m| report.point(k, m).and_then(pick))
                    .collect();
                (k.to_string(), vals)
            })
            .collect();
        write_file(
            &plot_dir.join(format!("sensitivity_{name}.csv")),
            &plot_csv("k", &report.methods, &rows),
        )?;
    }
    Ok(report)
}

#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub papers: usize,
    pub horizon: usize,
    pub seed: u64,
    pub journal_mix: BTreeMap<String, f64>,
    pub config: dataset::SyntheticConfig,
    pub out: PathBuf,
}

/// Generates a synthetic corpus, writes it as CSV and returns a summary.
pub fn run_synth(spec: &SynthSpec) -> Result<(Corpus, String)> {
    let corpus = dataset::generate_synthetic_with(
        &mut Rng::new(spec.seed),
        spec.papers,
        spec.horizon,
        &spec.journal_mix,
        &spec.config,
    )?;
    dataset::write_corpus(&spec.out, &corpus)?;
    Ok((corpus.clone(), corpus_summary(&corpus)))
}

pub fn corpus_summary(corpus: &Corpus) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{} papers, horizon {}", corpus.len(), corpus.horizon());
    for j in corpus.journals() {
        let papers: Vec<&CitationRecord> = corpus.by_journal(j).collect();
        let total: u64 = papers.iter().map(|r| r.lifetime_citations()).sum();
        let zero = papers
            .iter()
            .filter(|r| r.lifetime_citations() == 0)
            .count();
        let _ = writeln!(
            out,
            "{j:<10} {:>7} papers  mean lifetime citations {:>8.2}  uncited {zero}",
            papers.len(),
            total as f64 / papers.len() as f64
        );
    }
    out
}

/// Trains NNCP on the training split and writes `model.ckpt` and
/// `training_loss.csv`.
pub fn run_train(corpus: &Corpus, spec: &ExperimentSpec) -> Result<model::TrainOutput> {
    spec.validate()?;
    let s = split_for(corpus, spec)?;
    let config = spec.model_config(spec.k);
    let epochs = config.epochs;
    let progress = spec.progress;
    let out = model::train_with(&config, &s.train, spec.execution, |e, loss| {
        if progress && (e % 10 == 0 || e + 1 == epochs) {
            eprintln!("  epoch {:>4}  loss {loss:.4}", e + 1);
        }
    })?;
    fs::create_dir_all(&spec.out_dir).map_err(|e| Error::io(&spec.out_dir, e))?;
    model::save_model(spec.out_dir.join("model.ckpt"), &out.model)?;
    let mut csv = String::from("epoch,loss\n");
    for (e, l) in out.epoch_losses.iter().enumerate() {
        let _ = writeln!(csv, "{},{l}", e + 1);
    }
    write_file(&spec.out_dir.join("training_loss.csv"), &csv)?;
    Ok(out)
}

/// Predicts every paper of `corpus` with a saved model and writes
/// `predictions.csv` (`paper_id,journal_id,total,c{k+1}..c{n}`).
pub fn run_predict(
    model: &Seq2SeqModel,
    corpus: &Corpus,
    out_dir: &Path,
    exec: Execution,
) -> Result<Vec<PredictionResult>> {
    let preds = predict_nncp(model, corpus.records(), exec)?;
    let (k, n) = (model.config.k, model.config.n);
    let mut csv = String::from("paper_id,journal_id,total");
    for i in k + 1..=n {
        let _ = write!(csv, ",c{i}");
    }
    csv.push('\n');
    for (r, p) in corpus.records().iter().zip(&preds) {
        let _ = write!(csv, "{},{},{:.4}", r.paper_id, r.journal_id, p.total);
        for v in &p.yearly {
            let _ = write!(csv, ",{v:.4}");
        }
        csv.push('\n');
    }
    write_file(&out_dir.join("predictions.csv"), &csv)?;
    Ok(preds)
}

/// Overall total-mode R² of `method`, if present and defined.
pub fn overall_total_r2(report: &EvaluationReport, method: Method) -> Option<f64> {
    report
        .find(OVERALL, method.name(), Mode::Total)
        .and_then(|r| r.score.r2)
}
