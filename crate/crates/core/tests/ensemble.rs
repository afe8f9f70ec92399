use proptest::prelude::*;
use zadr::dist::PredictiveDistribution;
use zadr::ensemble::roster::select;
use zadr::ensemble::stack::check_disjoint;
use zadr::ensemble::{
    extract_quantiles, fit_combiners, roster, run_all_algorithms, stack_apply, stack_fit, ExperimentSettings,
    QuantileMatrix, TauGrid,
};
use zadr::features::{generate_synthetic, split_three_way, SyntheticSpec};
use zadr::metrics::quantile_loss;
use zadr::model::{BaseLearner, LearnerSettings};
use zadr::{Error, Family};

fn true_quantiles(family: Family, seed: u64, n: usize) -> (QuantileMatrix, Vec<f64>) {
    true_quantiles_for(SyntheticSpec::default_for(family, n, seed))
}

fn true_quantiles_for(spec: SyntheticSpec) -> (QuantileMatrix, Vec<f64>) {
    let family = spec.family;
    let data = generate_synthetic(&spec).unwrap();
    let preds: Vec<PredictiveDistribution> =
        data.truth.iter().map(|p| PredictiveDistribution::new(family, *p)).collect();
    (extract_quantiles(&preds, &TauGrid::default()).unwrap(), data.dataset.targets().to_vec())
}

#[test]
fn single_true_base_is_reproduced() {
    let grid = TauGrid::default();
    for seed in [3, 4, 5] {
        // the combiner slope carries sampling noise of order cv / sqrt(n); at
        // cv 0.3 and n = 10 000 it sits inside the 1% bound
        let mut spec = SyntheticSpec::default_for(Family::Zaga, 10_000, seed);
        spec.beta_sigma[0] = 0.3f64.ln();
        let (q, y) = true_quantiles_for(spec);
        let s = fit_combiners(&[BaseLearner::GamlssZaga], &[&q], &y, &grid).unwrap();
        let out = stack_apply(&s, &[&q]).unwrap();
        // relative to the mean magnitude: entry-wise ratios blow up for the
        // tiny quantiles just above the atom
        let (mut dev, mut size) = (0.0, 0.0);
        for i in 0..q.n_rows() {
            for j in 0..grid.len() {
                dev += (out.get(i, j) - q.get(i, j)).abs();
                size += q.get(i, j);
            }
        }
        assert!(dev / size <= 0.01, "seed {seed}: mean absolute relative deviation {}", dev / size);
    }
}

#[test]
fn combiner_never_loses_to_a_base_column_on_its_training_rows() {
    let grid = TauGrid::default();
    let (q1, y) = true_quantiles(Family::Zaga, 5, 1500);
    let (q2, _) = true_quantiles(Family::Zaig, 6, 1500);
    let s = fit_combiners(&[BaseLearner::DrfZaga, BaseLearner::DrfZaig], &[&q1, &q2], &y, &grid).unwrap();
    for (j, &tau) in grid.levels().iter().enumerate() {
        for (k, base) in [&q1, &q2].into_iter().enumerate() {
            let direct = (0..y.len()).map(|i| quantile_loss(base.get(i, j), y[i], tau)).sum::<f64>() / y.len() as f64;
            assert!((direct - s.base_train_loss[k][j]).abs() <= 1e-9 * (1.0 + direct));
            assert!(s.train_loss[j] <= direct + 1e-9, "tau {tau}: {} > {direct}", s.train_loss[j]);
        }
    }
}

#[test]
fn overlapping_sets_are_a_precondition_error() {
    let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaga, 300, 1)).unwrap();
    let d = &data.dataset;
    let a = d.subset(&(0..200).collect::<Vec<_>>());
    let b = d.subset(&(150..300).collect::<Vec<_>>());
    assert!(matches!(check_disjoint(&a, &b), Err(Error::Precondition(_))));
    let bases = [BaseLearner::GamlssZaig, BaseLearner::GamlssZaga];
    let err = stack_fit(&a, &b, &bases, &TauGrid::default(), &LearnerSettings::default(), 1).unwrap_err();
    assert!(matches!(err, Error::Precondition(_)));
}

#[test]
fn failing_base_is_named() {
    let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaga, 90, 1)).unwrap();
    let split = split_three_way(&data.dataset, 1).unwrap();
    // 30 rows are fewer than the forest's two minimum leaves
    let bases = [BaseLearner::GamlssZaga, BaseLearner::DrfZaga];
    let err = stack_fit(&split.set1, &split.set2, &bases, &TauGrid::default(), &LearnerSettings::default(), 1)
        .unwrap_err()
        .to_string();
    assert!(err.contains("DRF-ZAGA"), "{err}");
}

fn small_settings() -> ExperimentSettings {
    let mut s = ExperimentSettings { seed: 9, ..Default::default() };
    s.learners.forest.n_trees = 10;
    s
}

#[test]
fn protocol_emits_valid_matrices_and_is_repeatable() {
    let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaga, 900, 4)).unwrap();
    let split = split_three_way(&data.dataset, 4).unwrap();
    let settings = small_settings();
    let a = run_all_algorithms(&split, &roster(), &settings);
    assert_eq!(a.results.len(), 17);
    for r in &a.results {
        let q = r.quantiles.as_ref().unwrap_or_else(|| panic!("{} failed: {:?}", r.id, r.error));
        assert_eq!((q.n_rows(), q.n_cols()), (split.set3.len(), 17));
        assert!(q.is_valid(), "{}", r.id);
    }
    assert_eq!(a.base_reports.len(), 4 + 6);
    let b = run_all_algorithms(&split, &roster(), &settings);
    for (x, y) in a.results.iter().zip(&b.results) {
        assert_eq!(x.quantiles, y.quantiles, "{}", x.id);
    }
}

#[test]
fn base_failure_only_removes_its_dependents() {
    let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaga, 900, 4)).unwrap();
    let split = split_three_way(&data.dataset, 4).unwrap();
    let mut settings = small_settings();
    // too large a minimum leaf for 600 training rows
    settings.learners.forest.min_leaf = 400;
    let out = run_all_algorithms(&split, &roster(), &settings);
    for r in &out.results {
        let spec = roster().into_iter().find(|a| a.id == r.id).unwrap();
        let uses_forest = spec.inputs().iter().any(|b| matches!(b, BaseLearner::DrfZaig | BaseLearner::DrfZaga));
        assert_eq!(r.succeeded(), !uses_forest, "{}: {:?}", r.id, r.error);
        if uses_forest {
            assert!(r.error.as_ref().unwrap().contains("DRF-"), "{:?}", r.error);
        }
    }
}

#[test]
fn algorithm_subsets_fit_only_what_they_need() {
    let data = generate_synthetic(&SyntheticSpec::default_for(Family::Zaig, 600, 2)).unwrap();
    let split = split_three_way(&data.dataset, 2).unwrap();
    let algs = select(&["GAMLSS-ZAIG".into(), "Mean_GAMLSS-ZAIG-Splines_GAMLSS-ZAGA-Splines".into()]).unwrap();
    let out = run_all_algorithms(&split, &algs, &small_settings());
    assert_eq!(out.results.len(), 2);
    assert!(out.results.iter().all(|r| r.succeeded()));
    let mut fitted: Vec<BaseLearner> = out.base_reports.iter().map(|r| r.learner).collect();
    fitted.sort();
    assert_eq!(fitted, vec![BaseLearner::GamlssZaig, BaseLearner::GamlssZaigSplines, BaseLearner::GamlssZagaSplines]);
}

fn matrix_strategy(n: usize, k: usize) -> impl Strategy<Value = QuantileMatrix> {
    proptest::collection::vec(proptest::collection::vec(0.0f64..100.0, k), n).prop_map(move |mut rows| {
        for r in rows.iter_mut() {
            r.sort_by(f64::total_cmp);
        }
        QuantileMatrix::from_rows(rows, k).unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn stacked_output_is_sorted_non_negative_and_dominant(
        a in matrix_strategy(30, 3),
        b in matrix_strategy(30, 3),
        y in proptest::collection::vec(prop_oneof![Just(0.0), 0.0f64..150.0], 30),
    ) {
        let grid = TauGrid::new(vec![0.1, 0.5, 0.9]).unwrap();
        let s = fit_combiners(&[BaseLearner::DrfZaig, BaseLearner::DrfZaga], &[&a, &b], &y, &grid).unwrap();
        for j in 0..3 {
            let best = s.base_train_loss.iter().map(|l| l[j]).fold(f64::INFINITY, f64::min);
            prop_assert!(s.train_loss[j] <= best + 1e-9);
        }
        let out = stack_apply(&s, &[&a, &b]).unwrap();
        prop_assert!(out.is_valid());
    }
}
