use super::*;
use crate::data::TaskSpec;
use crate::estimators::partial_sums;
use crate::loss::{ConstantLoss, LossKind};
use crate::pairs::{PairTruth, WeakPair};
use proptest::prelude::*;

fn gen(pi: f64, seed: u64) -> TaskGenerator {
    TaskGenerator::new(TaskSpec::canonical(pi), seed).unwrap()
}

fn random_model(seed: u64) -> Mlp<f64> {
    Mlp::new(2, &[8, 8], seed).unwrap()
}

proptest! {
    #[test]
    fn report_passes_iff_z_within_threshold(samples in prop::collection::vec(-5.0f64..5.0, 2..40), reference in -2.0f64..2.0, t in 0.5f64..5.0) {
        let r = McReport::new("x".into(), &samples, reference, 0.0, t);
        prop_assert_eq!(r.pass, r.z.abs() <= t);
        prop_assert_eq!(r.n_reps, samples.len());
        if samples.iter().any(|&v| v != samples[0]) {
            prop_assert!(r.stderr > 0.0);
        }
    }
}

#[test]
fn mean_stderr_matches_direct_formula() {
    let v = [1.0, 2.0, 4.0, 7.0];
    let (m, se) = mean_stderr(&v);
    assert_eq!(m, 3.5);
    let var = ((2.5f64).powi(2) + 1.5f64.powi(2) + 0.5f64.powi(2) + 3.5f64.powi(2)) / 3.0;
    assert!((se - (var / 4.0).sqrt()).abs() < 1e-15);
    assert!((sample_variance(&v) - var).abs() < 1e-15);
}

#[test]
fn oracle_examples() {
    let mut g = gen(0.3, 1);
    let m = random_model(2);
    assert_eq!(supervised_risk_oracle(&mut g, &m, &ConstantLoss(1.0), 1000).unwrap(), (1.0, 0.0));

    let zero = Mlp::<f64>::zeros(2, &[4]).unwrap();
    let (v, se) = supervised_risk_oracle(&mut g, &zero, &LossKind::Logistic, 5000).unwrap();
    assert!((v - std::f64::consts::LN_2).abs() < 1e-12 && se < 1e-12);

    let far = TaskSpec { pi_plus: 0.4, mu_plus: vec![10.0, 0.0], mu_minus: vec![-10.0, 0.0], sigma: 1.0 };
    let mut gf = TaskGenerator::new(far, 3).unwrap();
    let sep = Mlp::linear(&[10.0, 0.0], 0.0).unwrap();
    let (v, _) = supervised_risk_oracle(&mut gf, &sep, &LossKind::Logistic, 2000).unwrap();
    assert!(v < 1e-20, "{v}");

    assert!(supervised_risk_oracle(&mut g, &m, &LossKind::Logistic, 999).is_err());
}

#[test]
fn unbiasedness_examples() {
    let m = random_model(4);
    let r = mc_unbiasedness(&gen(0.5, 5), &m, &LossKind::Logistic, &EstimatorSpec::scd(), 50, 300, 4.0).unwrap();
    assert!(r.pass, "{r:?}");
    assert!(r.stderr > 0.0);

    let err = mc_unbiasedness(&gen(0.5, 5), &m, &LossKind::Logistic, &EstimatorSpec::sconf(), 50, 300, 4.0);
    assert!(matches!(err, Err(Error::PriorDegenerate(_))));
    for f in [Correction::Relu, Correction::Abs] {
        let spec = EstimatorSpec::corrected_scd(f);
        assert!(mc_unbiasedness(&gen(0.3, 5), &m, &LossKind::Logistic, &spec, 50, 300, 4.0).is_err());
    }
}

#[test]
fn unbiasedness_is_reproducible_and_paired() {
    let g = gen(0.2, 6);
    let m = random_model(7);
    let specs = [EstimatorSpec::scd(), EstimatorSpec::scd_lambda(0.5)];
    let a = mc_unbiasedness_many(&g, &m, &LossKind::Logistic, &specs, 20, 50, 4.0).unwrap();
    let b = mc_unbiasedness_many(&g, &m, &LossKind::Logistic, &specs, 20, 50, 4.0).unwrap();
    assert_eq!(a, b);
    // Same replicates: lambda = 1/2 is the joint estimator itself.
    assert!((a[0].mean - a[1].mean).abs() < 1e-12);
}

/// Pairs with `x = x'` and `c = 0` make the forward and reverse losses equal,
/// so every member of the family takes the same value.
fn symmetric_dataset(r: usize) -> Result<PairDataset<f64>> {
    let mut g = gen(0.3, 100 + r as u64);
    let pairs = (0..30)
        .map(|_| {
            let (x, _) = g.draw();
            let p = g.posterior(&x);
            WeakPair::new(x.clone(), x, p * p + (1.0 - p) * (1.0 - p), 0.0)
        })
        .collect::<Result<Vec<_>>>()?;
    PairDataset::new(pairs)
}

#[test]
fn variance_profile_is_flat_on_symmetric_pairs() {
    let prior = ClassPrior::new(0.3).unwrap();
    let lambdas = [0.0, 0.3, 0.5, 0.8, 1.0];
    let p = variance_profile_with(symmetric_dataset, &prior, &random_model(8), &LossKind::Logistic, &lambdas, 40, 20, 9).unwrap();
    let v0 = p.rows[0].variance;
    assert!(v0 > 0.0);
    for r in &p.rows {
        assert!((r.variance - v0).abs() <= 1e-12, "{r:?}");
    }
    assert!(p.minimum_at_half(0.0) && p.symmetric(0.0));
}

#[test]
fn variance_profile_preconditions() {
    let g = gen(0.3, 10);
    let m = random_model(11);
    assert!(variance_profile(&g, &m, &LossKind::Logistic, &[0.0, 1.0], 10, 10, 10).is_err());
    assert!(variance_profile(&g, &m, &LossKind::Logistic, &[0.5, 1.2], 10, 10, 10).is_err());
    let p = variance_profile(&g, &m, &LossKind::Logistic, &[0.0, 0.5, 1.0], 20, 30, 50).unwrap();
    assert_eq!(p.rows.len(), 3);
    assert!(p.rows.iter().all(|r| r.stderr > 0.0));
}

#[test]
fn rel_error_examples() {
    assert_eq!(rel_error(0.0, 0.0), 0.0);
    assert_eq!(rel_error(1e-9, 0.0), 1e-3);
    assert_eq!(rel_error(2.0, 1.0), 0.5);
}

#[test]
fn grad_check_linear_scd() {
    let mut g = gen(0.3, 12);
    let d = g.annotate_pairs_exact(40).unwrap();
    let m = Mlp::linear(&[0.7, -0.2], 0.1).unwrap();
    let r = grad_check(&m, &d, &g.prior(), &EstimatorSpec::scd(), &LossKind::Logistic, 1e-5, 0).unwrap();
    assert_eq!(r.n_checked, 3);
    assert!(r.max_rel_error <= 1e-5, "{r:?}");
}

#[test]
fn grad_check_abs_with_negative_partial_sum() {
    let loss = LossKind::Logistic;
    let m = Mlp::linear(&[1.5, 0.3], -0.4).unwrap();
    let spec = EstimatorSpec::corrected_scd(Correction::Abs);
    let found = (0..200u64).find_map(|seed| {
        let mut g = gen(0.2, seed);
        let d = g.annotate_pairs_exact(6).unwrap();
        let scores = m.forward(d.stacked_features().view()).unwrap();
        let losses = PairLosses::evaluate(&loss, &PairScores::from_stacked(scores.as_slice().unwrap()));
        let sums = partial_sums(&spec, &d, &g.prior(), &losses).unwrap();
        sums.iter().any(|&s| s < -1e-3).then_some((d, g.prior()))
    });
    let (d, prior) = found.expect("some small dataset has a negative partial sum");
    let r = grad_check(&m, &d, &prior, &spec, &loss, 1e-5, 0).unwrap();
    assert!(r.max_rel_error <= 1e-5, "{r:?}");
}

#[test]
fn grad_check_rejects_evaluation_only_loss() {
    let mut g = gen(0.3, 13);
    let d = g.annotate_pairs_exact(5).unwrap();
    let m = Mlp::linear(&[1.0, 0.0], 0.0).unwrap();
    assert!(grad_check(&m, &d, &g.prior(), &EstimatorSpec::scd(), &LossKind::ZeroOne, 1e-5, 0).is_err());
}

#[test]
fn supervised_kind_needs_truth() {
    let d = PairDataset::new(vec![WeakPair::new(vec![0.0, 1.0], vec![1.0, 0.0], 0.5, 0.0).unwrap()]).unwrap();
    let m = Mlp::linear(&[1.0, 0.0], 0.0).unwrap();
    let prior = ClassPrior::new(0.3).unwrap();
    assert!(grad_check(&m, &d, &prior, &EstimatorSpec::supervised(), &LossKind::Logistic, 1e-5, 0).is_err());
    let truth = vec![PairTruth { p: 0.9, p_prime: 0.1, y: crate::pairs::Label::Pos, y_prime: crate::pairs::Label::Neg }];
    let d = d.with_truth(truth).unwrap();
    assert!(grad_check(&m, &d, &prior, &EstimatorSpec::supervised(), &LossKind::Logistic, 1e-5, 0).is_ok());
}

#[test]
fn corrected_bias_and_trend() {
    let g = gen(0.2, 14);
    let m = random_model(15);
    let a = corrected_bias(&g, &m, &LossKind::Logistic, Correction::Abs, 20, 100, 4.0).unwrap();
    assert!(a.paired_bias >= 0.0, "{a:?}");
    assert!(a.nonnegative);
    let mut b = a.clone();
    b.paired_bias = a.paired_bias * 0.5;
    assert!(bias_non_increasing(&[a.clone(), b.clone()], 0.0));
    b.paired_bias = a.paired_bias + 10.0 * (a.paired_stderr + 1.0);
    assert!(!bias_non_increasing(&[a, b], 3.0));
}

fn small_config() -> VerifyConfig {
    VerifyConfig {
        calibration_datasets: 20,
        priors: vec![0.2, 0.5],
        n_pairs: 30,
        n_reps: 100,
        n_bootstrap: 50,
        model_hidden: vec![4],
        bias_sizes: vec![20, 80],
        bias_reps: 100,
        annotation_pairs: 5000,
        ..VerifyConfig::default()
    }
}

#[test]
fn check_selection() {
    let all = run_checks(&small_config(), &["all".to_string()]).unwrap();
    let names: Vec<&str> = all.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(names, CHECK_NAMES);
    let cal = &all[0];
    assert!(cal.pass, "{:?}", cal.statistics);
    assert!(cal.statistics["max_residual"].as_f64().unwrap() <= 1e-12);
    let grads = &all[3];
    assert!(grads.pass, "{:?}", grads.statistics);
    assert!(grads.inputs["n_params"].as_u64().unwrap() >= 100);

    let one = run_checks(&small_config(), &["annotation".to_string()]).unwrap();
    assert_eq!(one.len(), 1);
    assert_eq!(one[0], all[5]);

    let err = run_checks(&small_config(), &["nope".to_string()]).unwrap_err().to_string();
    assert!(err.contains("nope") && err.contains("calibration"), "{err}");
}

#[test]
fn verify_config_round_trips_and_rejects_unknown_keys() {
    let c = VerifyConfig::default();
    let text = toml::to_string(&c).unwrap();
    assert_eq!(toml::from_str::<VerifyConfig>(&text).unwrap(), c);
    assert_eq!(toml::from_str::<VerifyConfig>("n_reps = 10").unwrap().n_reps, 10);
    assert!(toml::from_str::<VerifyConfig>("n_repz = 10").is_err());
    assert!(VerifyConfig { priors: vec![0.5, 1.0], ..c }.validate().is_err());
}
