//! Comparison predictors: MEY (mean of early years), AVR (average future of
//! the `L` nearest same-journal papers) and GMM (three-component Gaussian
//! mixture over those neighbours' futures).

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap};

use serde::{Deserialize, Serialize};

use crate::dataset::{CitationRecord, Corpus};
use crate::error::{Error, Result};
use crate::linalg::Rng;
use crate::model::PredictionResult;

pub const DEFAULT_NEIGHBORS: usize = 20;
pub const GMM_COMPONENTS: usize = 3;
pub const GMM_MAX_ITER: usize = 200;
pub const GMM_TOL: f64 = 1e-6;
pub const GMM_VARIANCE_FLOOR: f64 = 1e-6;
pub const GMM_RESTARTS: usize = 5;

/// Constant forecast equal to the mean of `c_0..=c_k`.
pub fn mey_predict(record: &CitationRecord, k: usize, n: usize) -> Result<PredictionResult> {
    if k >= n || record.citations.len() < k + 1 {
        return Err(Error::Argument(format!(
            "MEY needs k < n and {} known years for paper {}",
            k + 1,
            record.paper_id
        )));
    }
    let early = record.early(k);
    let mean = early.iter().sum::<f64>() / early.len() as f64;
    Ok(PredictionResult::new(
        &record.paper_id,
        k + 1,
        vec![mean; n - k],
    ))
}

/// Dissimilarity between two early-citation segments.
pub type MatchingError = fn(&[f64], &[f64]) -> f64;

/// Euclidean distance; panics on unequal lengths (see [`matching_error`]).
pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    assert_eq!(x.len(), y.len());
    x.iter()
        .zip(y)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        .sqrt()
}

pub fn matching_error(x_early: &[f64], y_early: &[f64]) -> Result<f64> {
    if x_early.len() != y_early.len() {
        return Err(Error::Shape(format!(
            "matching segments of length {} and {}",
            x_early.len(),
            y_early.len()
        )));
    }
    Ok(euclidean(x_early, y_early))
}

#[derive(Clone, Debug, PartialEq)]
pub struct IndexedPaper {
    pub paper_id: String,
    /// `c_0..=c_k`
    pub early: Vec<f64>,
    /// `c_{k+1}..=c_n`
    pub future: Vec<f64>,
}

/// Training papers grouped by journal, each journal sorted by `paper_id`.
#[derive(Clone, Debug)]
pub struct NeighborIndex {
    k: usize,
    n: usize,
    journals: BTreeMap<String, Vec<IndexedPaper>>,
    metric: MatchingError,
}

impl NeighborIndex {
    pub fn build(train: &Corpus, k: usize, n: usize) -> Result<Self> {
        if k >= n || n > train.horizon() {
            return Err(Error::Argument(format!(
                "index needs k < n <= horizon, got k = {k}, n = {n}, horizon = {}",
                train.horizon()
            )));
        }
        let mut journals: BTreeMap<String, Vec<IndexedPaper>> = BTreeMap::new();
        for r in train.records() {
            journals
                .entry(r.journal_id.clone())
                .or_default()
                .push(IndexedPaper {
                    paper_id: r.paper_id.clone(),
                    early: r.early(k),
                    future: r.future(k, n),
                });
        }
        for papers in journals.values_mut() {
            papers.sort_by(|a, b| a.paper_id.cmp(&b.paper_id));
        }
        Ok(NeighborIndex {
            k,
            n,
            journals,
            metric: euclidean,
        })
    }

    /// Replaces the matching error used by neighbour search.
    pub fn with_metric(mut self, metric: MatchingError) -> Self {
        self.metric = metric;
        self
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn journal(&self, journal: &str) -> &[IndexedPaper] {
        self.journals.get(journal).map_or(&[], Vec::as_slice)
    }

    pub fn journal_size(&self, journal: &str) -> usize {
        self.journal(journal).len()
    }

    pub fn metric(&self) -> MatchingError {
        self.metric
    }
}

/// Heap entry ordered by (distance, paper_id); the max-heap root is the worst
/// of the current best `L`.
struct Candidate<'a> {
    dist: f64,
    paper: &'a IndexedPaper,
}

impl Ord for Candidate<'_> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.dist
            .total_cmp(&other.dist)
            .then_with(|| self.paper.paper_id.cmp(&other.paper.paper_id))
    }
}

impl PartialOrd for Candidate<'_> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate<'_> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate<'_> {}

/// The `l` same-journal training papers closest to `record`'s early segment,
/// nearest first, ties broken by ascending `paper_id`.
pub fn find_neighbors<'a>(
    index: &'a NeighborIndex,
    record: &CitationRecord,
    l: usize,
) -> Result<Vec<&'a IndexedPaper>> {
    let papers = index.journal(&record.journal_id);
    if l == 0 || papers.len() < l {
        return Err(Error::InsufficientData(format!(
            "journal {} has {} training papers, {l} neighbours requested",
            record.journal_id,
            papers.len()
        )));
    }
    if record.citations.len() < index.k + 1 {
        return Err(Error::Argument(format!(
            "paper {} has fewer than {} known years",
            record.paper_id,
            index.k + 1
        )));
    }
    let query = record.early(index.k);
    let mut heap = BinaryHeap::with_capacity(l + 1);
    for paper in papers {
        let cand = Candidate {
            dist: (index.metric)(&query, &paper.early),
            paper,
        };
        if heap.len() < l {
            heap.push(cand);
        } else if cand < *heap.peek().expect("heap holds l > 0 items") {
            heap.pop();
            heap.push(cand);
        }
    }
    Ok(heap
        .into_sorted_vec()
        .into_iter()
        .map(|c| c.paper)
        .collect())
}

fn mean_of(vectors: &[&[f64]]) -> Vec<f64> {
    let dim = vectors[0].len();
    let mut out = vec![0.0; dim];
    for v in vectors {
        for (o, x) in out.iter_mut().zip(*v) {
            *o += x;
        }
    }
    let count = vectors.len() as f64;
    out.iter_mut().for_each(|o| *o /= count);
    out
}

/// Per-year mean of the `l` nearest neighbours' futures.
pub fn avr_predict(
    index: &NeighborIndex,
    record: &CitationRecord,
    l: usize,
) -> Result<PredictionResult> {
    let neighbors = find_neighbors(index, record, l)?;
    let futures: Vec<&[f64]> = neighbors.iter().map(|p| p.future.as_slice()).collect();
    Ok(PredictionResult::new(
        &record.paper_id,
        index.k + 1,
        mean_of(&futures),
    ))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Diagonal variances, each at least [`GMM_VARIANCE_FLOOR`].
    pub variances: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct GmmFit {
    pub params: GmmParams,
    /// `responsibilities[i][c]` under the final parameters.
    pub responsibilities: Vec<Vec<f64>>,
    /// Log-likelihood after the initial E-step and after every EM iteration
    /// of the winning restart.
    pub log_likelihood: Vec<f64>,
}

impl GmmFit {
    pub fn final_log_likelihood(&self) -> f64 {
        *self
            .log_likelihood
            .last()
            .expect("at least the initial E-step")
    }
}

/// E-step: fills `resp` and returns the total log-likelihood.
fn e_step(data: &[&[f64]], p: &GmmParams, resp: &mut [Vec<f64>]) -> f64 {
    const LN_2PI: f64 = 1.837_877_066_409_345_5;
    let comps = p.weights.len();
    // Per-component constant: ln w_c - 0.5 sum_d ln(2 pi var_cd).
    let consts: Vec<f64> = (0..comps)
        .map(|c| {
            if p.weights[c] <= 0.0 {
                f64::NEG_INFINITY
            } else {
                p.weights[c].ln()
                    - 0.5 * p.variances[c].iter().map(|v| LN_2PI + v.ln()).sum::<f64>()
            }
        })
        .collect();
    let mut total = 0.0;
    let mut logp = vec![0.0; comps];
    for (x, r) in data.iter().zip(resp.iter_mut()) {
        for c in 0..comps {
            logp[c] = if consts[c] == f64::NEG_INFINITY {
                f64::NEG_INFINITY
            } else {
                let quad: f64 = x
                    .iter()
                    .zip(&p.means[c])
                    .zip(&p.variances[c])
                    .map(|((xi, m), v)| (xi - m) * (xi - m) / v)
                    .sum();
                consts[c] - 0.5 * quad
            };
        }
        let max = logp.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = logp.iter().map(|l| (l - max).exp()).sum();
        let lse = max + sum.ln();
        for c in 0..comps {
            r[c] = (logp[c] - lse).exp();
        }
        total += lse;
    }
    total
}

/// M-step. Means are accumulated as offsets from the first data point so a
/// set of identical points yields that point exactly. A component with no
/// responsibility keeps its mean and variance and gets weight zero.
fn m_step(data: &[&[f64]], resp: &[Vec<f64>], p: &mut GmmParams) {
    let n = data.len() as f64;
    let dim = data[0].len();
    let origin = data[0];
    for c in 0..p.weights.len() {
        let nk: f64 = resp.iter().map(|r| r[c]).sum();
        if nk < 1e-12 {
            p.weights[c] = 0.0;
            continue;
        }
        p.weights[c] = nk / n;
        let mut offset = vec![0.0; dim];
        for (x, r) in data.iter().zip(resp) {
            for d in 0..dim {
                offset[d] += r[c] * (x[d] - origin[d]);
            }
        }
        let mean: Vec<f64> = (0..dim).map(|d| origin[d] + offset[d] / nk).collect();
        let mut var = vec![0.0; dim];
        for (x, r) in data.iter().zip(resp) {
            for d in 0..dim {
                var[d] += r[c] * (x[d] - mean[d]) * (x[d] - mean[d]);
            }
        }
        p.variances[c] = var
            .iter()
            .map(|v| (v / nk).max(GMM_VARIANCE_FLOOR))
            .collect();
        p.means[c] = mean;
    }
}

/// Picks `comps` distinct indices, preferring points with distinct values.
fn init_indices(data: &[&[f64]], comps: usize, rng: &mut Rng) -> Vec<usize> {
    let mut unique: Vec<usize> = Vec::new();
    for (i, x) in data.iter().enumerate() {
        if !unique.iter().any(|&u| data[u] == *x) {
            unique.push(i);
        }
    }
    let mut pool = if unique.len() >= comps {
        unique
    } else {
        (0..data.len()).collect()
    };
    // Partial Fisher-Yates.
    for i in 0..comps {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    pool.truncate(comps);
    pool
}

fn fit_once(data: &[&[f64]], comps: usize, rng: &mut Rng) -> GmmFit {
    let dim = data[0].len();
    let all = mean_of(data);
    let spread: Vec<f64> = (0..dim)
        .map(|d| {
            let v = data.iter().map(|x| (x[d] - all[d]).powi(2)).sum::<f64>() / data.len() as f64;
            v.max(GMM_VARIANCE_FLOOR)
        })
        .collect();
    let mut params = GmmParams {
        weights: vec![1.0 / comps as f64; comps],
        means: init_indices(data, comps, rng)
            .into_iter()
            .map(|i| data[i].to_vec())
            .collect(),
        variances: vec![spread; comps],
    };
    let mut resp = vec![vec![0.0; comps]; data.len()];
    let mut trace = vec![e_step(data, &params, &mut resp)];
    for _ in 0..GMM_MAX_ITER {
        m_step(data, &resp, &mut params);
        let ll = e_step(data, &params, &mut resp);
        let prev = *trace.last().unwrap();
        trace.push(ll);
        if ll - prev < GMM_TOL {
            break;
        }
    }
    GmmFit {
        params,
        responsibilities: resp,
        log_likelihood: trace,
    }
}

/// Diagonal-covariance EM, best of [`GMM_RESTARTS`] random starts by final
/// log-likelihood.
pub fn fit_gmm(vectors: &[&[f64]], components: usize, rng: &mut Rng) -> Result<GmmFit> {
    if components == 0 || vectors.len() < components {
        return Err(Error::InsufficientData(format!(
            "{} points cannot support {components} mixture components",
            vectors.len()
        )));
    }
    let dim = vectors[0].len();
    if dim == 0 || vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Shape(
            "mixture data must be non-empty vectors of one length".into(),
        ));
    }
    let mut best: Option<GmmFit> = None;
    for _ in 0..GMM_RESTARTS {
        let fit = fit_once(vectors, components, rng);
        if best
            .as_ref()
            .is_none_or(|b| fit.final_log_likelihood() > b.final_log_likelihood())
        {
            best = Some(fit);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// Fits the mixture on the neighbours' futures, then forecasts with the mean
/// of the component whose responsibility-weighted early-segment centroid is
/// closest to `record`'s early segment.
pub fn gmm_predict(
    index: &NeighborIndex,
    record: &CitationRecord,
    l: usize,
    rng: &mut Rng,
) -> Result<PredictionResult> {
    let neighbors = find_neighbors(index, record, l)?;
    if neighbors.len() < GMM_COMPONENTS {
        return Err(Error::InsufficientData(format!(
            "GMM needs at least {GMM_COMPONENTS} neighbours, got {}",
            neighbors.len()
        )));
    }
    let futures: Vec<&[f64]> = neighbors.iter().map(|p| p.future.as_slice()).collect();
    let fit = fit_gmm(&futures, GMM_COMPONENTS, rng)?;
    let query = record.early(index.k);
    let dim = query.len();

    let mut best: Option<(f64, usize)> = None;
    for c in 0..GMM_COMPONENTS {
        let weight: f64 = fit.responsibilities.iter().map(|r| r[c]).sum();
        if weight < 1e-12 {
            continue;
        }
        let origin = &neighbors[0].early;
        let mut centroid = vec![0.0; dim];
        for (p, r) in neighbors.iter().zip(&fit.responsibilities) {
            for d in 0..dim {
                centroid[d] += r[c] * (p.early[d] - origin[d]);
            }
        }
        for d in 0..dim {
            centroid[d] = origin[d] + centroid[d] / weight;
        }
        let dist = (index.metric)(&query, &centroid);
        if best.is_none_or(|(bd, _)| dist < bd) {
            best = Some((dist, c));
        }
    }
    let (_, chosen) = best.expect("responsibilities sum to one, so some component has weight");
    let yearly = fit.params.means[chosen]
        .iter()
        .map(|&v| v.max(0.0))
        .collect();
    Ok(PredictionResult::new(&record.paper_id, index.k + 1, yearly))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Baseline {
    Mey,
    Avr,
    Gmm,
}

/// How a neighbour baseline was degraded for a journal with too few papers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Fallback {
    /// Used every available paper (fewer than `L`, at least three).
    FewerNeighbors(usize),
    /// Fewer than three papers: predicted with MEY.
    Mey,
}

/// 64-bit FNV-1a, used to key per-paper random streams.
pub fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| {
        (h ^ b as u64).wrapping_mul(0x0000_0100_0000_01b3)
    })
}

impl Baseline {
    pub fn name(self) -> &'static str {
        match self {
            Baseline::Mey => "MEY",
            Baseline::Avr => "AVR",
            Baseline::Gmm => "GMM",
        }
    }

    /// Predicts `record`, shrinking `l` to the journal's population when it
    /// has at least three training papers and falling back to MEY below
    /// that. GMM draws its restarts from a stream keyed by `(seed, paper_id)`,
    /// so the result does not depend on evaluation order.
    pub fn predict(
        self,
        index: &NeighborIndex,
        record: &CitationRecord,
        l: usize,
        seed: u64,
    ) -> Result<(PredictionResult, Option<Fallback>)> {
        let (k, n) = (index.k(), index.n());
        if self == Baseline::Mey {
            return Ok((mey_predict(record, k, n)?, None));
        }
        let available = index.journal_size(&record.journal_id);
        let (l, fallback) = if available >= l {
            (l, None)
        } else if available >= GMM_COMPONENTS {
            (available, Some(Fallback::FewerNeighbors(available)))
        } else {
            return Ok((mey_predict(record, k, n)?, Some(Fallback::Mey)));
        };
        let result = match self {
            Baseline::Avr => avr_predict(index, record, l)?,
            Baseline::Gmm => {
                let mut rng = Rng::derive(seed, &[stable_hash(&record.paper_id)]);
                gmm_predict(index, record, l, &mut rng)?
            }
            Baseline::Mey => unreachable!(),
        };
        Ok((result, fallback))
    }
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
            publication_year: 1990,
            citations: cites.to_vec(),
        }
    }

    fn p1() -> CitationRecord {
        rec(
            "P1",
            "NATURE",
            &[1, 19, 21, 22, 19, 20, 17, 11, 15, 13, 12, 13, 14, 9, 10],
        )
    }

    #[test]
    fn mey_table_row() {
        let p = mey_predict(&p1(), 5, 14).unwrap();
        assert_eq!(p.yearly, vec![17.0; 9]);
        assert_eq!(p.total, 153.0);
        assert_eq!(p.first_year, 6);
    }

    #[test]
    fn mey_edge_cases() {
        let zero = rec("Z", "J", &[0; 15]);
        assert!(mey_predict(&zero, 5, 14)
            .unwrap()
            .yearly
            .iter()
            .all(|&v| v == 0.0));
        let p = mey_predict(&p1(), 0, 14).unwrap();
        assert_eq!(p.yearly, vec![1.0; 14]);
    }

    #[test]
    fn mey_mean_minimises_squared_error() {
        let early = p1().early(5);
        let sse = |c: f64| early.iter().map(|x| (x - c).powi(2)).sum::<f64>();
        let mey = mey_predict(&p1(), 5, 14).unwrap().yearly[0];
        // Scan candidate constants on a fine grid.
        let best = (0..=3000)
            .map(|i| i as f64 / 100.0)
            .min_by(|a, b| sse(*a).total_cmp(&sse(*b)))
            .unwrap();
        assert!((best - mey).abs() < 1e-9);
    }

    #[test]
    fn matching_error_examples() {
        assert_eq!(matching_error(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(matching_error(&[0.0, 0.0], &[3.0, 4.0]).unwrap(), 5.0);
        assert_eq!(
            matching_error(&[1.0, 7.0], &[3.0, 4.0]).unwrap(),
            matching_error(&[3.0, 4.0], &[1.0, 7.0]).unwrap()
        );
        assert!(matches!(
            matching_error(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape(_))
        ));
    }

    fn corpus(rows: &[(&str, &str, &[u32])]) -> Corpus {
        let n = rows[0].2.len() - 1;
        Corpus::new(rows.iter().map(|(i, j, c)| rec(i, j, c)).collect(), n).unwrap()
    }

    #[test]
    fn nearest_single_neighbor_is_exact_match() {
        let c = corpus(&[
            ("a", "J", &[1, 2, 3, 4]),
            ("b", "J", &[5, 5, 9, 9]),
            ("c", "J", &[0, 0, 1, 1]),
        ]);
        let index = NeighborIndex::build(&c, 1, 3).unwrap();
        let q = rec("q", "J", &[5, 5, 0, 0]);
        let found = find_neighbors(&index, &q, 1).unwrap();
        assert_eq!(found[0].paper_id, "b");
        assert!(matches!(
            find_neighbors(&index, &q, 4),
            Err(Error::InsufficientData(_))
        ));
        let other = rec("q", "K", &[5, 5, 0, 0]);
        assert!(matches!(
            find_neighbors(&index, &other, 1),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn ties_break_by_paper_id() {
        let c = corpus(&[
            ("z", "J", &[1, 1, 0]),
            ("m", "J", &[1, 1, 5]),
            ("a", "J", &[1, 1, 9]),
        ]);
        let index = NeighborIndex::build(&c, 1, 2).unwrap();
        let found = find_neighbors(&index, &rec("q", "J", &[1, 1, 0]), 2).unwrap();
        let ids: Vec<&str> = found.iter().map(|p| p.paper_id.as_str()).collect();
        assert_eq!(ids, ["a", "m"]);
    }

    #[test]
    fn avr_examples() {
        let c = corpus(&[
            ("a", "J", &[1, 2, 4]),
            ("b", "J", &[1, 4, 8]),
            ("c", "J", &[50, 0, 0]),
        ]);
        let index = NeighborIndex::build(&c, 0, 2).unwrap();
        let q = rec("q", "J", &[1, 0, 0]);
        assert_eq!(avr_predict(&index, &q, 2).unwrap().yearly, vec![3.0, 6.0]);
        let single = avr_predict(&index, &rec("q", "J", &[49, 0, 0]), 1).unwrap();
        assert_eq!(single.yearly, vec![0.0, 0.0]);
    }

    #[test]
    fn avr_identical_neighbors() {
        let c = corpus(&[
            ("a", "J", &[1, 3, 7]),
            ("b", "J", &[1, 3, 7]),
            ("c", "J", &[1, 3, 7]),
        ]);
        let index = NeighborIndex::build(&c, 0, 2).unwrap();
        let p = avr_predict(&index, &rec("q", "J", &[2, 0, 0]), 3).unwrap();
        assert_eq!(p.yearly, vec![3.0, 7.0]);
        assert_eq!(p.total, 10.0);
    }

    fn gaussian_clusters(seed: u64, dim: usize) -> Vec<Vec<f64>> {
        let mut r = Rng::new(seed);
        [0.0, 50.0, 100.0]
            .iter()
            .flat_map(|&m| {
                (0..40)
                    .map(|_| {
                        (0..dim)
                            .map(|_| m + r.next_gaussian())
                            .collect::<Vec<f64>>()
                    })
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn gmm_recovers_separated_clusters() {
        let data = gaussian_clusters(1, 1);
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let fit = fit_gmm(&refs, 3, &mut Rng::new(2)).unwrap();
        let mut means: Vec<f64> = fit.params.means.iter().map(|m| m[0]).collect();
        means.sort_by(f64::total_cmp);
        for (got, want) in means.iter().zip([0.0, 50.0, 100.0]) {
            assert!((got - want).abs() < 1.0, "{means:?}");
        }
    }

    #[test]
    fn gmm_responsibilities_and_weights_normalised() {
        let data = gaussian_clusters(3, 4);
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        let fit = fit_gmm(&refs, 3, &mut Rng::new(4)).unwrap();
        for r in &fit.responsibilities {
            assert!((r.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
        assert!((fit.params.weights.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(fit
            .params
            .variances
            .iter()
            .flatten()
            .all(|&v| v >= GMM_VARIANCE_FLOOR));
        for w in fit.log_likelihood.windows(2) {
            assert!(w[1] >= w[0] - 1e-9);
        }
    }

    #[test]
    fn gmm_needs_three_points() {
        let data = [vec![1.0], vec![2.0]];
        let refs: Vec<&[f64]> = data.iter().map(Vec::as_slice).collect();
        assert!(matches!(
            fit_gmm(&refs, 3, &mut Rng::new(1)),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn gmm_identical_neighbors_predict_shared_future() {
        let rows: Vec<(String, [u32; 5])> =
            (0..6).map(|i| (format!("p{i}"), [2, 2, 9, 4, 1])).collect();
        let c = Corpus::new(rows.iter().map(|(i, cs)| rec(i, "J", cs)).collect(), 4).unwrap();
        let index = NeighborIndex::build(&c, 1, 4).unwrap();
        let p = gmm_predict(
            &index,
            &rec("q", "J", &[3, 1, 0, 0, 0]),
            5,
            &mut Rng::new(1),
        )
        .unwrap();
        assert_eq!(p.yearly, vec![9.0, 4.0, 1.0]);
    }

    #[test]
    fn gmm_predict_deterministic_and_nonnegative() {
        let mut r = Rng::new(17);
        let rows: Vec<CitationRecord> = (0..40)
            .map(|i| {
                rec(
                    &format!("p{i:02}"),
                    "J",
                    &(0..8).map(|_| r.below(30) as u32).collect::<Vec<_>>(),
                )
            })
            .collect();
        let c = Corpus::new(rows, 7).unwrap();
        let index = NeighborIndex::build(&c, 3, 7).unwrap();
        let q = rec("q", "J", &[4, 9, 12, 10, 0, 0, 0, 0]);
        let (a, _) = Baseline::Gmm.predict(&index, &q, 20, 42).unwrap();
        let (b, _) = Baseline::Gmm.predict(&index, &q, 20, 42).unwrap();
        assert_eq!(a, b);
        assert!(a.yearly.iter().all(|&v| v >= 0.0));
        assert_eq!(a.total, a.yearly.iter().sum::<f64>());
    }

    #[test]
    fn fallbacks_for_small_journals() {
        let c = corpus(&[
            ("a", "J", &[1, 2, 4]),
            ("b", "J", &[1, 4, 8]),
            ("c", "J", &[3, 0, 0]),
            ("d", "K", &[3, 0, 0]),
        ]);
        let index = NeighborIndex::build(&c, 0, 2).unwrap();
        let (p, fb) = Baseline::Avr
            .predict(&index, &rec("q", "J", &[1, 0, 0]), 20, 1)
            .unwrap();
        assert_eq!(fb, Some(Fallback::FewerNeighbors(3)));
        assert_eq!(p.yearly.len(), 2);
        let (p, fb) = Baseline::Gmm
            .predict(&index, &rec("q", "K", &[4, 0, 0]), 20, 1)
            .unwrap();
        assert_eq!(fb, Some(Fallback::Mey));
        assert_eq!(p.yearly, vec![4.0, 4.0]);
    }

    proptest! {
        #[test]
        fn avr_order_invariant(futures in prop::collection::vec(prop::collection::vec(0u32..40, 3), 1..12), seed in any::<u64>()) {
            let mut refs: Vec<&[f64]> = Vec::new();
            let owned: Vec<Vec<f64>> = futures.iter().map(|f| f.iter().map(|&v| v as f64).collect()).collect();
            refs.extend(owned.iter().map(Vec::as_slice));
            let a = mean_of(&refs);
            Rng::new(seed).shuffle(&mut refs);
            let b = mean_of(&refs);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-9);
            }
        }

        #[test]
        fn em_log_likelihood_monotone(points in prop::collection::vec(prop::collection::vec(0u32..60, 4), 3..25), seed in any::<u64>()) {
            let owned: Vec<Vec<f64>> = points.iter().map(|p| p.iter().map(|&v| v as f64).collect()).collect();
            let refs: Vec<&[f64]> = owned.iter().map(Vec::as_slice).collect();
            let fit = fit_gmm(&refs, 3, &mut Rng::new(seed)).unwrap();
            for w in fit.log_likelihood.windows(2) {
                prop_assert!(w[1] >= w[0] - 1e-9, "{:?}", fit.log_likelihood);
            }
            let total: f64 = fit.params.weights.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-9);
            prop_assert!(fit.params.weights.iter().all(|w| (0.0..=1.0).contains(w)));
        }
    }
}
