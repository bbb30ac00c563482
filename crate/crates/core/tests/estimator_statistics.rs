use weakpairs::data::{TaskGenerator, TaskSpec};
use weakpairs::estimators::{corrected_scd_risk, PairLosses, PairScores};
use weakpairs::seeding::stream;
use weakpairs::{Correction, LossKind, Mlp64};

/// With a balanced prior and clean labels every partial sum of the corrected
/// joint estimator is nonnegative on all but a few mini-batches, so the two
/// corrections almost always coincide.
#[test]
fn relu_and_abs_agree_on_balanced_minibatches() {
    let gen = TaskGenerator::new(TaskSpec::canonical(0.5), 21).unwrap();
    let prior = gen.prior();
    for (hidden, seed) in [(vec![16, 16], 1u64), (vec![32], 2)] {
        let model = Mlp64::new(2, &hidden, seed).unwrap();
        for batch in [64, 256] {
            let n_batches = 1000;
            let agree = (0..n_batches)
                .filter(|&b| {
                    let data = gen.fork(stream::MONTE_CARLO, b).annotate_pairs_exact(batch).unwrap();
                    let scores = model.forward(data.stacked_features().view()).unwrap();
                    let losses = PairLosses::evaluate(&LossKind::Logistic, &PairScores::from_stacked(scores.as_slice().unwrap()));
                    let (relu, _) = corrected_scd_risk(&data, &prior, &losses, Correction::Relu).unwrap();
                    let (abs, _) = corrected_scd_risk(&data, &prior, &losses, Correction::Abs).unwrap();
                    (relu - abs).abs() <= 1e-12
                })
                .count();
            let rate = agree as f64 / n_batches as f64;
            assert!(rate >= 0.99, "hidden {hidden:?}, batch {batch}: agreement {rate}");
        }
    }
}
