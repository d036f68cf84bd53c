use std::fs;

use citecast::dataset::{self, Corpus};
use citecast::experiment::{self, ExperimentSpec, Method};
use citecast::linalg::Rng;
use citecast::metrics::EvaluationReport;
use citecast::model::ModelConfig;
use citecast::par::Execution;

fn corpus(papers: usize) -> Corpus {
    dataset::generate_synthetic(
        &mut Rng::new(11),
        papers,
        14,
        &dataset::default_journal_mix(),
    )
    .unwrap()
}

fn small_spec(dir: &std::path::Path) -> ExperimentSpec {
    ExperimentSpec {
        model: ModelConfig {
            hidden_dim: 8,
            epochs: 3,
            learning_rate: 1e-3,
            ..ModelConfig::new(5, 14)
        },
        ..ExperimentSpec::new(dir)
    }
}

#[test]
fn corpus_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(300);
    let path = dir.path().join("c.csv");
    dataset::write_corpus(&path, &c).unwrap();
    let back = dataset::load_corpus(&path, 14).unwrap();
    assert_eq!(back.records(), c.records());
    assert_eq!(back.fingerprint(), c.fingerprint());
}

#[test]
fn report_json_round_trips_and_lists_every_method() {
    let dir = tempfile::tempdir().unwrap();
    let report = experiment::run_evaluate(&corpus(400), &small_spec(dir.path())).unwrap();
    let text = fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert_eq!(EvaluationReport::from_json(&text).unwrap(), report);
    for m in Method::ALL {
        assert!(
            experiment::overall_total_r2(&report, m).is_some(),
            "{}",
            m.name()
        );
    }
}

#[test]
fn sequential_and_parallel_reports_are_identical() {
    let c = corpus(400);
    let run = |exec| {
        let dir = tempfile::tempdir().unwrap();
        let spec = ExperimentSpec {
            execution: exec,
            ..small_spec(dir.path())
        };
        experiment::run_evaluate(&c, &spec).unwrap();
        fs::read(dir.path().join("report.json")).unwrap()
    };
    assert_eq!(run(Execution::Sequential), run(Execution::Parallel));
}

#[test]
fn cached_model_is_reused() {
    let dir = tempfile::tempdir().unwrap();
    let c = corpus(300);
    let spec = small_spec(dir.path());
    let first = experiment::run_evaluate(&c, &spec).unwrap();
    let cached: Vec<_> = fs::read_dir(dir.path().join("models")).unwrap().collect();
    assert_eq!(cached.len(), 1);
    let second = experiment::run_evaluate(&c, &spec).unwrap();
    assert_eq!(first, second);
}

#[test]
fn top100_credits_sum_to_ranked_papers() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        methods: vec![Method::Mey, Method::Avr, Method::Gmm],
        ..small_spec(dir.path())
    };
    let report = experiment::run_top100(&corpus(1500), &spec).unwrap();
    assert!(!report.journals.is_empty());
    for j in &report.journals {
        assert!(j.ranked <= experiment::TOP_PAPERS);
        assert!((j.wins.iter().sum::<f64>() - j.ranked as f64).abs() < 1e-9);
    }
}

#[test]
fn empty_test_split_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let spec = ExperimentSpec {
        split: dataset::SplitSpec {
            train: "1980:2002".parse().unwrap(),
            test: "2050:2060".parse().unwrap(),
        },
        ..small_spec(dir.path())
    };
    let err = experiment::run_evaluate(&corpus(100), &spec).unwrap_err();
    assert!(matches!(err, citecast::Error::InsufficientData(_)));
}

#[test]
fn sensitivity_mey_at_k0_predicts_first_year() {
    use citecast::metrics::{self, Mode, Window};
    use citecast::model::PredictionResult;
    use std::collections::HashMap;

    let dir = tempfile::tempdir().unwrap();
    let c = corpus(600);
    let spec = ExperimentSpec {
        methods: vec![Method::Mey],
        ..small_spec(dir.path())
    };
    let report = experiment::run_sensitivity(&c, &spec).unwrap();
    assert_eq!(report.points.len(), 8);

    let s = dataset::split(&c, &dataset::SplitSpec::default()).unwrap();
    let test: Vec<_> = s.test.records().iter().collect();
    let preds: Vec<PredictionResult> = test
        .iter()
        .map(|r| PredictionResult::new(&r.paper_id, 7, vec![f64::from(r.citations[0]); 8]))
        .collect();
    let lookup: HashMap<&str, &PredictionResult> =
        preds.iter().map(|p| (p.paper_id.as_str(), p)).collect();
    let want = metrics::score(&test, &lookup, Window { first: 7, last: 14 }, Mode::Total).unwrap();
    assert_eq!(report.point(0, "MEY").unwrap().total, want);
    assert_eq!(
        report.point(7, "MEY").unwrap().window,
        Window { first: 8, last: 14 }
    );
}
