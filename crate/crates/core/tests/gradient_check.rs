mod common;

use common::{analytic_gradient, batch_loss, max_relative_error, numeric_gradient, random_problem};

#[test]
fn bptt_matches_finite_differences() {
    for seed in 0..20 {
        let (model, batch) = random_problem(seed, 3);
        let (loss, analytic) = analytic_gradient(&model, &batch);
        assert!((loss - batch_loss(&model, &batch)).abs() < 1e-12 * loss.max(1.0));
        let numeric = numeric_gradient(&model, &batch, 1e-5);
        let err = max_relative_error(&analytic, &numeric);
        assert!(analytic.tensors().iter().any(|t| t.max_abs() > 0.0));
        assert!(
            err < 1e-4,
            "seed {seed}: H={} k={} n={} max relative error {err}",
            model.config.hidden_dim,
            model.config.k,
            model.config.n
        );
    }
}
