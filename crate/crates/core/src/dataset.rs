//! Citation-history corpora: CSV loading and writing, year-based splits and a
//! seeded synthetic generator.
//!
//! File layout (UTF-8, no quoting):
//!
//! ```text
//! paper_id,journal_id,publication_year,c0,c1,...,c{n}
//! P1,NATURE,1999,1,19,21,22,19,20,17,11,15,13,12,13,14,9,10
//! ```

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use rand_distr::{Distribution, LogNormal, Poisson};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::linalg::Rng;

pub const DEFAULT_HORIZON: usize = 14;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CitationRecord {
    pub paper_id: String,
    pub journal_id: String,
    pub publication_year: i32,
    /// Yearly counts `c_0..=c_n`.
    pub citations: Vec<u32>,
}

impl CitationRecord {
    pub fn horizon(&self) -> usize {
        self.citations.len().saturating_sub(1)
    }

    /// `c_0..=c_k` as reals.
    pub fn early(&self, k: usize) -> Vec<f64> {
        self.citations[..=k].iter().map(|&c| c as f64).collect()
    }

    /// `c_{k+1}..=c_n` as reals.
    pub fn future(&self, k: usize, n: usize) -> Vec<f64> {
        self.citations[k + 1..=n]
            .iter()
            .map(|&c| c as f64)
            .collect()
    }

    /// Sum of all observed years, `c_0 + ... + c_n`.
    pub fn lifetime_citations(&self) -> u64 {
        self.citations.iter().map(|&c| c as u64).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Corpus {
    records: Vec<CitationRecord>,
    horizon_n: usize,
    journals: BTreeSet<String>,
}

impl Corpus {
    /// Validates that every record has `horizon_n + 1` counts and that paper
    /// ids are unique.
    pub fn new(records: Vec<CitationRecord>, horizon_n: usize) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for r in &records {
            if r.citations.len() != horizon_n + 1 {
                return Err(Error::Validation(format!(
                    "paper {} has {} yearly counts, expected {}",
                    r.paper_id,
                    r.citations.len(),
                    horizon_n + 1
                )));
            }
            if !seen.insert(r.paper_id.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate paper_id {}",
                    r.paper_id
                )));
            }
        }
        let journals = records.iter().map(|r| r.journal_id.clone()).collect();
        Ok(Corpus {
            records,
            horizon_n,
            journals,
        })
    }

    pub fn records(&self) -> &[CitationRecord] {
        &self.records
    }

    pub fn horizon(&self) -> usize {
        self.horizon_n
    }

    pub fn journals(&self) -> &BTreeSet<String> {
        &self.journals
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn get(&self, paper_id: &str) -> Option<&CitationRecord> {
        self.records.iter().find(|r| r.paper_id == paper_id)
    }

    /// Records of one journal, in corpus order.
    pub fn by_journal<'a>(
        &'a self,
        journal: &'a str,
    ) -> impl Iterator<Item = &'a CitationRecord> + 'a {
        self.records.iter().filter(move |r| r.journal_id == journal)
    }

    /// Content hash of the serialized corpus; used to key cached models.
    pub fn fingerprint(&self) -> String {
        let mut buf = Vec::new();
        write_csv(&mut buf, self).expect("writing to a Vec cannot fail");
        let digest = Sha256::digest(&buf);
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }
}

fn header(horizon_n: usize) -> Vec<String> {
    let mut h = vec![
        "paper_id".to_string(),
        "journal_id".to_string(),
        "publication_year".to_string(),
    ];
    h.extend((0..=horizon_n).map(|i| format!("c{i}")));
    h
}

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
}

pub fn load_corpus(path: impl AsRef<Path>, horizon_n: usize) -> Result<Corpus> {
    let path = path.as_ref();
    let mut text = String::new();
    File::open(path)
        .and_then(|mut f| f.read_to_string(&mut text))
        .map_err(|e| Error::io(path, e))?;
    parse_corpus(&text, horizon_n)
}

/// Parses corpus text. Line numbers in errors are 1-based and count the
/// header.
pub fn parse_corpus(text: &str, horizon_n: usize) -> Result<Corpus> {
    let expected_cols = horizon_n + 4;
    let mut lines = text.lines().enumerate();

    let (_, head) = lines.next().ok_or(Error::Parse {
        line: 1,
        message: "empty file, expected header row".into(),
    })?;
    let head: Vec<&str> = head
        .trim_end_matches('\r')
        .split(',')
        .map(str::trim)
        .collect();
    if head != header(horizon_n) {
        return Err(Error::Parse {
            line: 1,
            message: format!(
                "header does not match horizon {horizon_n}: expected {} columns \
                 paper_id,journal_id,publication_year,c0..c{horizon_n}",
                expected_cols
            ),
        });
    }

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (idx, raw) in lines {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if raw.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = raw.split(',').map(str::trim).collect();
        if fields.len() != expected_cols {
            return Err(Error::Parse {
                line,
                message: format!("expected {expected_cols} columns, found {}", fields.len()),
            });
        }
        let paper_id = fields[0];
        let journal_id = fields[1];
        if !is_token(paper_id) || !is_token(journal_id) {
            return Err(Error::Parse {
                line,
                message: "paper_id and journal_id must be non-empty alphanumeric tokens".into(),
            });
        }
        let publication_year: i32 = fields[2].parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid publication year {:?}", fields[2]),
        })?;
        let citations = fields[3..]
            .iter()
            .enumerate()
            .map(|(i, f)| {
                f.parse::<u32>().map_err(|_| Error::Parse {
                    line,
                    message: if f.starts_with('-') {
                        format!("negative citation count {f} in c{i}")
                    } else {
                        format!("invalid citation count {f:?} in c{i}")
                    },
                })
            })
            .collect::<Result<Vec<_>>>()?;
        if !seen.insert(paper_id.to_string()) {
            return Err(Error::Validation(format!(
                "duplicate paper_id {paper_id} at line {line}"
            )));
        }
        records.push(CitationRecord {
            paper_id: paper_id.to_string(),
            journal_id: journal_id.to_string(),
            publication_year,
            citations,
        });
    }
    Corpus::new(records, horizon_n)
}

pub fn write_csv<W: Write>(mut w: W, corpus: &Corpus) -> std::io::Result<()> {
    writeln!(w, "{}", header(corpus.horizon()).join(","))?;
    for r in corpus.records() {
        write!(w, "{},{},{}", r.paper_id, r.journal_id, r.publication_year)?;
        for c in &r.citations {
            write!(w, ",{c}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

pub fn write_corpus(path: impl AsRef<Path>, corpus: &Corpus) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    write_csv(&mut w, corpus)
        .and_then(|_| w.flush())
        .map_err(|e| Error::io(path, e))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct YearRange {
    pub lo: i32,
    pub hi: i32,
}

impl YearRange {
    pub fn new(lo: i32, hi: i32) -> Result<Self> {
        if lo > hi {
            return Err(Error::Argument(format!("empty year range {lo}:{hi}")));
        }
        Ok(YearRange { lo, hi })
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.lo..=self.hi).contains(&year)
    }

    fn overlaps(&self, other: &YearRange) -> bool {
        self.lo <= other.hi && other.lo <= self.hi
    }
}

impl std::str::FromStr for YearRange {
    type Err = Error;

    /// `LO:HI`, inclusive.
    fn from_str(s: &str) -> Result<Self> {
        let (lo, hi) = s
            .split_once(':')
            .ok_or_else(|| Error::Argument(format!("year range {s:?} is not LO:HI")))?;
        let parse = |v: &str| {
            v.trim()
                .parse::<i32>()
                .map_err(|_| Error::Argument(format!("invalid year {v:?} in range {s:?}")))
        };
        YearRange::new(parse(lo)?, parse(hi)?)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train: YearRange,
    pub test: YearRange,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train: YearRange { lo: 1980, hi: 1997 },
            test: YearRange { lo: 1998, hi: 2002 },
        }
    }
}

#[derive(Clone, Debug)]
pub struct Split {
    pub train: Corpus,
    pub test: Corpus,
    /// Records whose year falls in neither range.
    pub dropped: usize,
}

pub fn split(corpus: &Corpus, spec: &SplitSpec) -> Result<Split> {
    if spec.train.overlaps(&spec.test) {
        return Err(Error::Argument(format!(
            "train years {}:{} overlap test years {}:{}",
            spec.train.lo, spec.train.hi, spec.test.lo, spec.test.hi
        )));
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    let mut dropped = 0;
    for r in corpus.records() {
        if spec.train.contains(r.publication_year) {
            train.push(r.clone());
        } else if spec.test.contains(r.publication_year) {
            test.push(r.clone());
        } else {
            dropped += 1;
        }
    }
    Ok(Split {
        train: Corpus::new(train, corpus.horizon())?,
        test: Corpus::new(test, corpus.horizon())?,
        dropped,
    })
}

/// Shapes of synthetic citation curves. Each paper draws an archetype, then
/// yearly counts `c_t ~ Poisson(rate_t)` from the archetype's rate curve:
///
/// * `RiseDecay`: peak year `p ~ U{2,3,4}`, amplitude `A ~ LogNormal(ln 8, 0.7)`,
///   decay `d ~ U[0.03, 0.15)`; `rate_0 = 0.1 A` (partial first year),
///   `rate_t = A t/p` for `1 <= t <= p`, `A exp(-d (t-p))` after.
/// * `FlatLow`: `rate_t = flat_low_rate` for every year.
/// * `SleepingBeauty`: dormant rate 0.2 until wake year `w ~ U{4..=9}`, then a
///   three-year linear ramp to `A ~ LogNormal(ln 6, 0.5)` held flat.
/// * `MonotoneDecay`: `A ~ LogNormal(ln 6, 0.6)`, `d ~ U[0.15, 0.50)`,
///   `rate_t = A exp(-d t)`.
///
/// Amplitudes are multiplied by a per-journal impact factor spread evenly over
/// `[0.6, 1.4]` in journal-name order.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Archetype {
    RiseDecay,
    FlatLow,
    SleepingBeauty,
    MonotoneDecay,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    /// Archetype probabilities; must sum to 1.
    pub archetype_mix: Vec<(Archetype, f64)>,
    pub flat_low_rate: f64,
    pub years: YearRange,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            archetype_mix: vec![
                (Archetype::RiseDecay, 0.55),
                (Archetype::FlatLow, 0.20),
                (Archetype::SleepingBeauty, 0.10),
                (Archetype::MonotoneDecay, 0.15),
            ],
            flat_low_rate: 1.0,
            years: YearRange { lo: 1980, hi: 2002 },
        }
    }
}

impl SyntheticConfig {
    pub fn single(archetype: Archetype) -> Self {
        SyntheticConfig {
            archetype_mix: vec![(archetype, 1.0)],
            ..SyntheticConfig::default()
        }
    }
}

/// The five journals of the reference dataset with their relative sizes.
pub fn default_journal_mix() -> BTreeMap<String, f64> {
    [
        ("NATURE", 72_797.0),
        ("SCIENCE", 52_646.0),
        ("NEJM", 39_022.0),
        ("CELL", 10_114.0),
        ("PNAS", 853.0),
    ]
    .into_iter()
    .map(|(j, n)| (j.to_string(), n / 175_432.0))
    .collect()
}

fn check_fractions(what: &str, fractions: impl Iterator<Item = f64>) -> Result<()> {
    let mut total = 0.0;
    for f in fractions {
        if !(0.0..=1.0).contains(&f) {
            return Err(Error::Argument(format!(
                "{what} fraction {f} outside [0, 1]"
            )));
        }
        total += f;
    }
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::Argument(format!(
            "{what} fractions sum to {total}, not 1"
        )));
    }
    Ok(())
}

fn pick<T: Copy>(rng: &mut Rng, weighted: &[(T, f64)]) -> T {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for &(item, w) in weighted {
        acc += w;
        if u < acc {
            return item;
        }
    }
    weighted.iter().rev().find(|(_, w)| *w > 0.0).unwrap().0
}

pub fn generate_synthetic(
    rng: &mut Rng,
    n_papers: usize,
    horizon_n: usize,
    journal_mix: &BTreeMap<String, f64>,
) -> Result<Corpus> {
    generate_synthetic_with(
        rng,
        n_papers,
        horizon_n,
        journal_mix,
        &SyntheticConfig::default(),
    )
}

pub fn generate_synthetic_with(
    rng: &mut Rng,
    n_papers: usize,
    horizon_n: usize,
    journal_mix: &BTreeMap<String, f64>,
    config: &SyntheticConfig,
) -> Result<Corpus> {
    if n_papers == 0 {
        return Err(Error::Argument("n_papers must be positive".into()));
    }
    if journal_mix.is_empty() {
        return Err(Error::Argument("journal mix is empty".into()));
    }
    if let Some(j) = journal_mix.keys().find(|j| !is_token(j)) {
        return Err(Error::Argument(format!(
            "journal id {j:?} is not a plain token"
        )));
    }
    check_fractions("journal", journal_mix.values().copied())?;
    check_fractions("archetype", config.archetype_mix.iter().map(|a| a.1))?;
    if !(config.flat_low_rate >= 0.0 && config.flat_low_rate.is_finite()) {
        return Err(Error::Argument("flat-low rate must be non-negative".into()));
    }

    let n_journals = journal_mix.len();
    let journals: Vec<(usize, f64)> = journal_mix.values().copied().enumerate().collect();
    let names: Vec<&String> = journal_mix.keys().collect();
    let base_seed = rng.next_u64();
    let span = (config.years.hi - config.years.lo + 1) as usize;

    let records = (0..n_papers)
        .map(|i| {
            let mut r = Rng::derive(base_seed, &[i as u64]);
            let j = pick(&mut r, &journals);
            let impact = if n_journals == 1 {
                1.0
            } else {
                0.6 + 0.8 * j as f64 / (n_journals - 1) as f64
            };
            let year = config.years.lo + r.below(span) as i32;
            let archetype = pick(&mut r, &config.archetype_mix);
            let rates = rate_curve(&mut r, archetype, horizon_n, impact, config.flat_low_rate);
            let citations = rates
                .iter()
                .map(|&lambda| poisson(&mut r, lambda))
                .collect();
            CitationRecord {
                paper_id: format!("S{i:07}"),
                journal_id: names[j].clone(),
                publication_year: year,
                citations,
            }
        })
        .collect();
    Corpus::new(records, horizon_n)
}

fn poisson(rng: &mut Rng, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        return 0;
    }
    let d = Poisson::new(lambda).expect("positive finite rate");
    d.sample(rng) as u32
}

fn lognormal(rng: &mut Rng, median: f64, sigma: f64) -> f64 {
    LogNormal::new(median.ln(), sigma)
        .expect("valid lognormal")
        .sample(rng)
}

fn rate_curve(
    rng: &mut Rng,
    archetype: Archetype,
    n: usize,
    impact: f64,
    flat_rate: f64,
) -> Vec<f64> {
    match archetype {
        Archetype::RiseDecay => {
            let peak = 2 + rng.below(3);
            let amp = impact * lognormal(rng, 8.0, 0.7);
            let decay = 0.03 + 0.12 * rng.next_f64();
            (0..=n)
                .map(|t| {
                    if t == 0 {
                        0.1 * amp
                    } else if t <= peak {
                        amp * t as f64 / peak as f64
                    } else {
                        amp * (-decay * (t - peak) as f64).exp()
                    }
                })
                .collect()
        }
        Archetype::FlatLow => vec![flat_rate; n + 1],
        Archetype::SleepingBeauty => {
            let wake = 4 + rng.below(6);
            let amp = impact * lognormal(rng, 6.0, 0.5);
            (0..=n)
                .map(|t| {
                    if t < wake {
                        0.2
                    } else {
                        amp * (((t - wake + 1) as f64) / 3.0).min(1.0)
                    }
                })
                .collect()
        }
        Archetype::MonotoneDecay => {
            let amp = impact * lognormal(rng, 6.0, 0.6);
            let decay = 0.15 + 0.35 * rng.next_f64();
            (0..=n).map(|t| amp * (-decay * t as f64).exp()).collect()
        }
    }
}
