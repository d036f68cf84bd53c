//! RMSE and R² scoring in yearly and total modes, aggregated per journal and
//! overall, plus the report container and its JSON / text renderings.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::dataset::CitationRecord;
use crate::error::{Error, Result};
use crate::model::PredictionResult;

pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Journal label of the rows that pool every test paper.
pub const OVERALL: &str = "ALL";

pub fn rmse(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "rmse over {} actual vs {} predicted values",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.is_empty() {
        return Err(Error::Argument("rmse of empty vectors".into()));
    }
    let sse: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    Ok((sse / actual.len() as f64).sqrt())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
///
/// When every actual value is equal, `SS_tot` is zero: the score is 1 for a
/// perfect prediction and `f64::NEG_INFINITY` otherwise. Reports carry the
/// latter as an undefined score (see [`defined_r2`]).
pub fn r2(actual: &[f64], predicted: &[f64]) -> Result<f64> {
    if actual.len() != predicted.len() {
        return Err(Error::Shape(format!(
            "r2 over {} actual vs {} predicted values",
            actual.len(),
            predicted.len()
        )));
    }
    if actual.len() < 2 {
        return Err(Error::Argument("r2 needs at least two samples".into()));
    }
    let mean = actual.iter().sum::<f64>() / actual.len() as f64;
    let ss_tot: f64 = actual.iter().map(|a| (a - mean) * (a - mean)).sum();
    let ss_res: f64 = actual
        .iter()
        .zip(predicted)
        .map(|(a, p)| (a - p) * (a - p))
        .sum();
    if ss_tot == 0.0 {
        return Ok(if ss_res == 0.0 {
            1.0
        } else {
            f64::NEG_INFINITY
        });
    }
    Ok(1.0 - ss_res / ss_tot)
}

/// `None` for the undefined sentinel.
pub fn defined_r2(score: f64) -> Option<f64> {
    score.is_finite().then_some(score)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    /// Score each year across papers, then average the per-year scores.
    Yearly,
    /// Score all (paper, year) pairs as one sample.
    YearlyPooled,
    /// Score `C` against `Ĉ`, one sample per paper.
    Total,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Mode::Yearly => "yearly",
            Mode::YearlyPooled => "yearly_pooled",
            Mode::Total => "total",
        }
    }
}

/// Inclusive range of post-publication years being scored.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub first: usize,
    pub last: usize,
}

impl Window {
    /// Years `k+1..=n`.
    pub fn after(k: usize, n: usize) -> Self {
        Window {
            first: k + 1,
            last: n,
        }
    }

    pub fn len(&self) -> usize {
        self.last + 1 - self.first
    }

    pub fn is_empty(&self) -> bool {
        self.last < self.first
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub rmse: f64,
    /// `None` when undefined: fewer than two samples, or zero variance in the
    /// actual values with a non-zero residual.
    pub r2: Option<f64>,
    pub papers: usize,
    /// Yearly mode only: years whose R² was undefined and left out of the average.
    #[serde(default, skip_serializing_if = "is_zero")]
    pub undefined_years: usize,
}

fn is_zero(v: &usize) -> bool {
    *v == 0
}

fn r2_or_undefined(actual: &[f64], predicted: &[f64]) -> Result<Option<f64>> {
    if actual.len() < 2 {
        return Ok(None);
    }
    Ok(defined_r2(r2(actual, predicted)?))
}

/// Actual and predicted values over `window` for one paper.
fn window_values(
    record: &CitationRecord,
    prediction: &PredictionResult,
    window: Window,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if window.is_empty() || window.last >= record.citations.len() {
        return Err(Error::Argument(format!(
            "window {}..={} outside paper {}'s {} observed years",
            window.first,
            window.last,
            record.paper_id,
            record.citations.len()
        )));
    }
    let pred_last = prediction.first_year + prediction.yearly.len();
    if window.first < prediction.first_year || window.last + 1 > pred_last {
        return Err(Error::Argument(format!(
            "prediction for {} covers years {}..{}, window needs {}..={}",
            record.paper_id, prediction.first_year, pred_last, window.first, window.last
        )));
    }
    let actual = record.citations[window.first..=window.last]
        .iter()
        .map(|&c| c as f64)
        .collect();
    let lo = window.first - prediction.first_year;
    let predicted = prediction.yearly[lo..lo + window.len()].to_vec();
    Ok((actual, predicted))
}

/// Scores one method's predictions for `records` over `window`.
///
/// Papers are processed in ascending `paper_id` order so the result does not
/// depend on the order of `records`.
pub fn score(
    records: &[&CitationRecord],
    predictions: &HashMap<&str, &PredictionResult>,
    window: Window,
    mode: Mode,
) -> Result<Score> {
    if records.is_empty() {
        return Err(Error::Argument("no papers to score".into()));
    }
    let mut ordered: Vec<&CitationRecord> = records.to_vec();
    ordered.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));

    let mut per_paper = Vec::with_capacity(ordered.len());
    for r in &ordered {
        let p = predictions.get(r.paper_id.as_str()).ok_or_else(|| {
            Error::Argument(format!("missing prediction for paper {}", r.paper_id))
        })?;
        per_paper.push(window_values(r, p, window)?);
    }
    let papers = per_paper.len();

    match mode {
        Mode::Total => {
            let actual: Vec<f64> = per_paper.iter().map(|(a, _)| a.iter().sum()).collect();
            let predicted: Vec<f64> = per_paper.iter().map(|(_, p)| p.iter().sum()).collect();
            Ok(Score {
                rmse: rmse(&actual, &predicted)?,
                r2: r2_or_undefined(&actual, &predicted)?,
                papers,
                undefined_years: 0,
            })
        }
        Mode::YearlyPooled => {
            let actual: Vec<f64> = per_paper
                .iter()
                .flat_map(|(a, _)| a.iter().copied())
                .collect();
            let predicted: Vec<f64> = per_paper
                .iter()
                .flat_map(|(_, p)| p.iter().copied())
                .collect();
            Ok(Score {
                rmse: rmse(&actual, &predicted)?,
                r2: r2_or_undefined(&actual, &predicted)?,
                papers,
                undefined_years: 0,
            })
        }
        Mode::Yearly => {
            let mut rmse_sum = 0.0;
            let mut r2_sum = 0.0;
            let mut r2_count = 0usize;
            for y in 0..window.len() {
                let actual: Vec<f64> = per_paper.iter().map(|(a, _)| a[y]).collect();
                let predicted: Vec<f64> = per_paper.iter().map(|(_, p)| p[y]).collect();
                rmse_sum += rmse(&actual, &predicted)?;
                if let Some(v) = r2_or_undefined(&actual, &predicted)? {
                    r2_sum += v;
                    r2_count += 1;
                }
            }
            let years = window.len();
            Ok(Score {
                rmse: rmse_sum / years as f64,
                r2: (r2_count > 0).then(|| r2_sum / r2_count as f64),
                papers,
                undefined_years: years - r2_count,
            })
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub journal: String,
    pub method: String,
    pub mode: Mode,
    #[serde(flatten)]
    pub score: Score,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub schema_version: u32,
    pub k: usize,
    pub n: usize,
    pub window: Window,
    pub rows: Vec<ReportRow>,
    /// Baseline fallbacks, dropped papers and similar annotations.
    pub notes: Vec<String>,
}

impl EvaluationReport {
    pub fn new(k: usize, n: usize, window: Window) -> Self {
        EvaluationReport {
            schema_version: REPORT_SCHEMA_VERSION,
            k,
            n,
            window,
            rows: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn find(&self, journal: &str, method: &str, mode: Mode) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.journal == journal && r.method == method && r.mode == mode)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    /// Aligned text table; scores rounded to 4 decimals.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "k = {}, n = {}, scored years {}..={}",
            self.k, self.n, self.window.first, self.window.last
        );
        let headers = ["journal", "method", "mode", "papers", "rmse", "r2"];
        let body: Vec<[String; 6]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.journal.clone(),
                    r.method.clone(),
                    r.mode.label().to_string(),
                    r.score.papers.to_string(),
                    format!("{:.4}", r.score.rmse),
                    r.score
                        .r2
                        .map_or_else(|| "undefined".to_string(), |v| format!("{v:.4}")),
                ]
            })
            .collect();
        let mut widths = headers.map(str::len);
        for row in &body {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let line = |cells: [&str; 6]| {
            let mut l = String::new();
            for (i, (c, w)) in cells.iter().zip(widths).enumerate() {
                if i < 3 {
                    let _ = write!(l, "{c:<w$}  ");
                } else {
                    let _ = write!(l, "{c:>w$}  ");
                }
            }
            l.trim_end().to_string()
        };
        let _ = writeln!(out, "{}", line(headers));
        let _ = writeln!(
            out,
            "{}",
            widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("  ")
        );
        for row in &body {
            let _ = writeln!(out, "{}", line(row.each_ref().map(String::as_str)));
        }
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

/// Scores every method in `predictions` per journal and overall, for each of
/// `modes`. Methods keep the order given; journals are sorted with the
/// overall rows last.
pub fn evaluate(
    test: &[CitationRecord],
    predictions: &[(String, Vec<PredictionResult>)],
    k: usize,
    n: usize,
    window: Window,
    modes: &[Mode],
) -> Result<EvaluationReport> {
    if k >= n {
        return Err(Error::Argument(format!("k = {k} must be below n = {n}")));
    }
    let mut journals: BTreeMap<&str, Vec<&CitationRecord>> = BTreeMap::new();
    for r in test {
        journals.entry(r.journal_id.as_str()).or_default().push(r);
    }
    let all: Vec<&CitationRecord> = test.iter().collect();
    let groups = journals
        .iter()
        .map(|(j, rs)| (*j, rs.as_slice()))
        .chain(std::iter::once((OVERALL, all.as_slice())));

    let lookups: Vec<(&str, HashMap<&str, &PredictionResult>)> = predictions
        .iter()
        .map(|(method, preds)| {
            (
                method.as_str(),
                preds.iter().map(|p| (p.paper_id.as_str(), p)).collect(),
            )
        })
        .collect();

    let mut report = EvaluationReport::new(k, n, window);
    for (journal, records) in groups {
        for (method, lookup) in &lookups {
            for &mode in modes {
                report.rows.push(ReportRow {
                    journal: journal.to_string(),
                    method: method.to_string(),
                    mode,
                    score: score(records, lookup, window, mode)?,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Rng;
    use proptest::prelude::*;

    fn rec(id: &str, journal: &str, cites: &[u32]) -> CitationRecord {
        CitationRecord {
            paper_id: id.into(),
            journal_id: journal.into(),
            publication_year: 2000,
            citations: cites.to_vec(),
        }
    }

    #[test]
    fn rmse_examples() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert!((rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap() - 12.5f64.sqrt()).abs() < 1e-12);
        assert_eq!(
            rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap(),
            rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap()
        );
        assert!(matches!(rmse(&[], &[]), Err(Error::Argument(_))));
        assert!(matches!(rmse(&[1.0], &[]), Err(Error::Shape(_))));
    }

    #[test]
    fn r2_examples() {
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        assert_eq!(r2(&[1.0, 2.0, 3.0], &[2.0, 2.0, 2.0]).unwrap(), 0.0);
        assert!((r2(&[1.0, 2.0, 3.0], &[1.0, 2.0, 5.0]).unwrap() + 1.0).abs() < 1e-12);
        assert!(matches!(r2(&[1.0], &[1.0]), Err(Error::Argument(_))));
    }

    #[test]
    fn r2_constant_actual() {
        assert_eq!(r2(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 1.0);
        let s = r2(&[2.0, 2.0], &[2.0, 3.0]).unwrap();
        assert_eq!(s, f64::NEG_INFINITY);
        assert_eq!(defined_r2(s), None);
    }

    #[test]
    fn single_paper_perfect_prediction() {
        let r = rec("A", "J", &[1, 2, 3, 4]);
        let p = PredictionResult::new("A", 2, vec![3.0, 4.0]);
        let report = evaluate(
            &[r],
            &[("M".into(), vec![p])],
            1,
            3,
            Window::after(1, 3),
            &[Mode::Yearly, Mode::Total],
        )
        .unwrap();
        let total = report.find(OVERALL, "M", Mode::Total).unwrap();
        assert_eq!(total.score.r2, None);
        let yearly = report.find(OVERALL, "M", Mode::Yearly).unwrap();
        assert_eq!(yearly.score.rmse, 0.0);
    }

    #[test]
    fn total_mode_uses_window_sums() {
        // Sample row P1 with k = 5: C = 114; MEY predicts 17 per year, Ĉ = 153.
        let p1 = rec(
            "P1",
            "NATURE",
            &[1, 19, 21, 22, 19, 20, 17, 11, 15, 13, 12, 13, 14, 9, 10],
        );
        let p2 = rec(
            "P2",
            "NATURE",
            &[0, 1, 2, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0],
        );
        let mey = |r: &CitationRecord| {
            let m = r.citations[..=5].iter().sum::<u32>() as f64 / 6.0;
            PredictionResult::new(&r.paper_id, 6, vec![m; 9])
        };
        let preds = [mey(&p1), mey(&p2)];
        let records = [&p1, &p2];
        let lookup: HashMap<&str, &PredictionResult> =
            preds.iter().map(|p| (p.paper_id.as_str(), p)).collect();
        let s = score(&records, &lookup, Window::after(5, 14), Mode::Total).unwrap();
        // P2: C = 0, Ĉ = 9 * 0.5 = 4.5.
        let want = ((1521.0 + 4.5f64 * 4.5) / 2.0).sqrt();
        assert!((s.rmse - want).abs() < 1e-12);
    }

    #[test]
    fn yearly_is_mean_of_per_year_scores() {
        let rs = [
            rec("a", "J", &[0, 1, 5, 2]),
            rec("b", "J", &[0, 3, 1, 7]),
            rec("c", "J", &[1, 0, 4, 4]),
        ];
        let preds = [
            PredictionResult::new("a", 1, vec![1.5, 4.0, 2.5]),
            PredictionResult::new("b", 1, vec![2.0, 2.0, 6.0]),
            PredictionResult::new("c", 1, vec![0.5, 3.0, 3.0]),
        ];
        let refs: Vec<&CitationRecord> = rs.iter().collect();
        let lookup: HashMap<&str, &PredictionResult> =
            preds.iter().map(|p| (p.paper_id.as_str(), p)).collect();
        let s = score(&refs, &lookup, Window::after(0, 3), Mode::Yearly).unwrap();
        let mut rmse_direct = 0.0;
        let mut r2_direct = 0.0;
        for y in 0..3 {
            let a: Vec<f64> = rs.iter().map(|r| r.citations[y + 1] as f64).collect();
            let p: Vec<f64> = preds.iter().map(|p| p.yearly[y]).collect();
            rmse_direct += rmse(&a, &p).unwrap() / 3.0;
            r2_direct += r2(&a, &p).unwrap() / 3.0;
        }
        assert!((s.rmse - rmse_direct).abs() < 1e-12);
        assert!((s.r2.unwrap() - r2_direct).abs() < 1e-12);
    }

    #[test]
    fn missing_prediction_is_error() {
        let rs = vec![rec("a", "J", &[0, 1, 5]), rec("b", "J", &[0, 1, 5])];
        let preds = vec![PredictionResult::new("a", 1, vec![1.0, 5.0])];
        let err = evaluate(
            &rs,
            &[("M".into(), preds)],
            0,
            2,
            Window::after(0, 2),
            &[Mode::Total],
        );
        assert!(matches!(err, Err(Error::Argument(_))));
    }

    #[test]
    fn text_and_json_render() {
        let rs = vec![rec("a", "J", &[0, 1, 5]), rec("b", "K", &[2, 1, 0])];
        let preds = vec![
            PredictionResult::new("a", 1, vec![1.0, 4.0]),
            PredictionResult::new("b", 1, vec![1.0, 1.0]),
        ];
        let report = evaluate(
            &rs,
            &[("MEY".into(), preds)],
            0,
            2,
            Window::after(0, 2),
            &[Mode::Yearly, Mode::Total],
        )
        .unwrap();
        assert_eq!(report.rows.len(), 6);
        assert_eq!(report.rows.last().unwrap().journal, OVERALL);
        let text = report.to_text();
        assert!(text.contains("undefined"));
        let back = EvaluationReport::from_json(&report.to_json().unwrap()).unwrap();
        assert_eq!(back, report);
    }

    proptest! {
        #[test]
        fn rmse_zero_iff_equal(a in prop::collection::vec(0.0f64..100.0, 1..20), bump in 0usize..20) {
            prop_assert_eq!(rmse(&a, &a).unwrap(), 0.0);
            let mut b = a.clone();
            let i = bump % b.len();
            b[i] += 1.0;
            prop_assert!(rmse(&a, &b).unwrap() > 0.0);
        }

        #[test]
        fn r2_self_is_one_and_bounded(a in prop::collection::vec(0.0f64..100.0, 2..20),
                                      p in prop::collection::vec(0.0f64..100.0, 20)) {
            prop_assert_eq!(r2(&a, &a).unwrap(), 1.0);
            prop_assert!(r2(&a, &p[..a.len()]).unwrap() <= 1.0);
        }

        #[test]
        fn evaluate_order_invariant(
            cites in prop::collection::vec(prop::collection::vec(0u32..50, 6), 3..15),
            noise in prop::collection::vec(0.0f64..10.0, 15 * 4),
            seed in any::<u64>(),
        ) {
            let rs: Vec<CitationRecord> = cites.iter().enumerate()
                .map(|(i, c)| rec(&format!("p{i}"), if i % 2 == 0 { "A" } else { "B" }, c))
                .collect();
            let preds: Vec<PredictionResult> = rs.iter().enumerate()
                .map(|(i, r)| PredictionResult::new(&r.paper_id, 2, noise[i * 4..i * 4 + 4].to_vec()))
                .collect();
            let mut shuffled = rs.clone();
            Rng::new(seed).shuffle(&mut shuffled);
            let modes = [Mode::Yearly, Mode::YearlyPooled, Mode::Total];
            let a = evaluate(&rs, &[("M".into(), preds.clone())], 1, 5, Window::after(1, 5), &modes).unwrap();
            let b = evaluate(&shuffled, &[("M".into(), preds)], 1, 5, Window::after(1, 5), &modes).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
