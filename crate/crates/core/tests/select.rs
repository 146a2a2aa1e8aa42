mod common;

use ndarray::Array2;
use planshare_core::glm::{ClassLabels, CoefficientTensor, DesignMatrix, SolverConfig};
use planshare_core::select::{
    cv_curve, evaluate, kfold_split, read_cv_report, select_lambda, train_test_split,
    write_cv_report, SelectError, SelectionRule,
};
use planshare_testkit::rng::SplitMix64;
use proptest::prelude::*;

fn class_sized_labels() -> ClassLabels {
    let mut v = vec![1; 47];
    v.extend(vec![2; 60]);
    v.extend(vec![3; 65]);
    // interleave so class blocks are not contiguous
    let mut rng = SplitMix64::new(5);
    for i in (1..v.len()).rev() {
        v.swap(i, rng.below(i + 1));
    }
    ClassLabels::new(v, 3).unwrap()
}

#[test]
fn unstratified_ten_rows_five_folds() {
    let labels = ClassLabels::new(vec![1, 2, 1, 2, 1, 2, 1, 2, 1, 2], 2).unwrap();
    let f = kfold_split(&labels, 5, 1, false).unwrap();
    assert_eq!(f.sizes(), vec![2; 5]);
    assert_eq!(f, kfold_split(&labels, 5, 1, false).unwrap());
}

#[test]
fn stratified_class_sized_counts() {
    let labels = class_sized_labels();
    let f = kfold_split(&labels, 5, 2024, true).unwrap();
    for (c, size) in [(1usize, 47usize), (2, 60), (3, 65)] {
        let lo = size / 5;
        for fold in 1..=5 {
            let count = (0..172)
                .filter(|&i| f.fold_of[i] == fold && labels.values()[i] == c)
                .count();
            assert!(
                count == lo || count == lo + 1,
                "class {c} fold {fold}: {count}"
            );
        }
    }
    let sizes = f.sizes();
    assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
}

#[test]
fn stratification_rejects_small_class() {
    let labels = ClassLabels::new(vec![1, 1, 1, 1, 1, 2, 2, 2, 2, 2, 3], 3).unwrap();
    assert!(matches!(
        kfold_split(&labels, 5, 0, true),
        Err(SelectError::ClassTooSmall {
            class: 3,
            size: 1,
            ..
        })
    ));
}

#[test]
fn leave_one_out_six_rows() {
    let x = Array2::from_shape_vec((6, 1), vec![0.1, 0.4, 0.3, 0.9, 0.6, 0.8]).unwrap();
    let x = DesignMatrix::unnamed(x).unwrap();
    let y = ClassLabels::new(vec![1, 1, 2, 2, 1, 2], 2).unwrap();
    let f = kfold_split(&y, 6, 9, false).unwrap();
    assert_eq!(f.sizes(), vec![1; 6]);
    for fold in 1..=6 {
        assert_eq!(f.test_rows(fold).len(), 1);
    }
    let config = SolverConfig {
        lambda_count: 5,
        ..Default::default()
    };
    let curve = cv_curve(&x, &y, &config, &f).unwrap();
    assert_eq!(curve.points.len(), 5);
    assert!(curve.points.iter().all(|p| p.converged_folds == 6));
}

#[test]
fn holdout_split_is_stratified_and_disjoint() {
    let labels = class_sized_labels();
    let (train, test) = train_test_split(&labels, 0.2, 7).unwrap();
    assert_eq!(train.len() + test.len(), 172);
    assert!(train.iter().all(|i| !test.contains(i)));
    let test_labels = labels.select(&test);
    assert_eq!(test_labels.counts(), vec![9, 12, 13]);
    assert_eq!(
        (train, test.clone()),
        train_test_split(&labels, 0.2, 7).unwrap()
    );
}

/// One strong feature and two noise columns.
fn signal_instance(seed: u64, n: usize) -> (DesignMatrix, ClassLabels) {
    let mut rng = SplitMix64::new(seed);
    let mut x = Array2::zeros((n, 3));
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let s = rng.uniform();
        x[[i, 0]] = s;
        x[[i, 1]] = rng.uniform();
        x[[i, 2]] = rng.uniform();
        let eta = [0.0, 4.0 * s, 8.0 * s];
        let z: f64 = eta.iter().map(|e| (e - 8.0).exp()).sum();
        let u = rng.uniform() * z;
        let mut acc = 0.0;
        let mut label = 3;
        for (c, e) in eta.iter().enumerate() {
            acc += (e - 8.0).exp();
            if u < acc {
                label = c + 1;
                break;
            }
        }
        y.push(label);
    }
    (
        DesignMatrix::unnamed(x).unwrap(),
        ClassLabels::new(y, 3).unwrap(),
    )
}

#[test]
fn dominant_feature_lowers_cv_deviance() {
    let (x, y) = signal_instance(17, 150);
    let config = SolverConfig::default();
    let folds = kfold_split(&y, 5, 1, true).unwrap();
    let curve = cv_curve(&x, &y, &config, &folds).unwrap();
    let first = &curve.points[0];
    let last = curve.points.last().unwrap();
    assert!(
        last.mean_deviance < first.mean_deviance,
        "{} vs {}",
        last.mean_deviance,
        first.mean_deviance
    );
    assert_eq!(first.nonzero_count, 0);
    assert!(curve.points.iter().all(|p| p.converged_folds == 5));
}

#[test]
fn pure_noise_minimum_near_lambda_max() {
    let config = SolverConfig {
        lambda_count: 30,
        ..Default::default()
    };
    let mut near = 0;
    for seed in 0..10 {
        let mut rng = SplitMix64::new(1000 + seed);
        let n = 400;
        let x = Array2::from_shape_fn((n, 3), |_| rng.uniform());
        let y: Vec<usize> = (0..n).map(|_| 1 + rng.below(3)).collect();
        let x = DesignMatrix::unnamed(x).unwrap();
        let y = ClassLabels::new(y, 3).unwrap();
        let folds = kfold_split(&y, 5, seed, true).unwrap();
        let curve = cv_curve(&x, &y, &config, &folds).unwrap();
        let s = select_lambda(&curve, SelectionRule::Min).unwrap();
        if s.index <= 1 {
            near += 1;
        }
    }
    assert!(near > 5, "minimum near λ_max on only {near} of 10 seeds");
}

#[test]
fn cv_is_deterministic_and_permutation_equivariant() {
    let (x, y) = signal_instance(4, 90);
    let config = SolverConfig {
        lambda_count: 25,
        ..Default::default()
    };
    let folds = kfold_split(&y, 5, 11, true).unwrap();
    let a = cv_curve(&x, &y, &config, &folds).unwrap();
    assert_eq!(a, cv_curve(&x, &y, &config, &folds).unwrap());

    let mut rng = SplitMix64::new(99);
    let mut perm: Vec<usize> = (0..90).collect();
    for i in (1..perm.len()).rev() {
        perm.swap(i, rng.below(i + 1));
    }
    let px = x.select_rows(&perm).unwrap();
    let py = y.select(&perm);
    let mut pf = folds.clone();
    pf.fold_of = perm.iter().map(|&i| folds.fold_of[i]).collect();
    let b = cv_curve(&px, &py, &config, &pf).unwrap();
    for (p, q) in a.points.iter().zip(&b.points) {
        assert!((p.lambda - q.lambda).abs() <= 1e-12 * p.lambda);
        assert!(
            (p.mean_deviance - q.mean_deviance).abs() <= 1e-10,
            "{} vs {}",
            p.mean_deviance,
            q.mean_deviance
        );
        assert!((p.sd_deviance - q.sd_deviance).abs() <= 1e-10);
    }
}

#[test]
fn cv_report_round_trips() {
    let (x, y) = signal_instance(4, 90);
    let config = SolverConfig {
        lambda_count: 10,
        ..Default::default()
    };
    let folds = kfold_split(&y, 5, 2, true).unwrap();
    let curve = cv_curve(&x, &y, &config, &folds).unwrap();
    let mut buf = Vec::new();
    write_cv_report(&mut buf, &curve).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("lambda,mean_deviance,sd_deviance,nonzero_count,converged_folds\n"));
    assert_eq!(read_cv_report(buf.as_slice(), 5).unwrap(), curve);
}

#[test]
fn evaluation_trivial_cases() {
    let x =
        DesignMatrix::unnamed(Array2::from_shape_vec((4, 1), vec![0.0, 1.0, 0.0, 1.0]).unwrap())
            .unwrap();
    let y = ClassLabels::new(vec![1, 2, 1, 2], 2).unwrap();
    let perfect = CoefficientTensor::new(ndarray::array![[1.0, 0.0], [-2.0, 0.0]]).unwrap();
    let r = evaluate(&perfect, &x, &y).unwrap();
    assert_eq!(r.accuracy, 1.0);
    assert_eq!(r.confusion, vec![vec![2, 0], vec![0, 2]]);

    let all_two = ClassLabels::new(vec![2, 2, 2, 2], 2).unwrap();
    let r = evaluate(&CoefficientTensor::zeros(1, 2), &x, &all_two).unwrap();
    assert_eq!(r.accuracy, 0.0);
    assert_eq!(r.confusion, vec![vec![0, 0], vec![4, 0]]);
    assert_eq!(r.n_test, 4);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn folds_partition_rows(
        raw in prop::collection::vec(1usize..4, 15..80),
        k in 2usize..6,
        seed in any::<u64>(),
        stratified in any::<bool>(),
    ) {
        let labels = ClassLabels::new(raw, 3).unwrap();
        match kfold_split(&labels, k, seed, stratified) {
            Ok(f) => {
                prop_assert!(f.fold_of.iter().all(|&v| (1..=k).contains(&v)));
                let sizes = f.sizes();
                prop_assert_eq!(sizes.iter().sum::<usize>(), labels.len());
                prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                for fold in 1..=k {
                    let mut all = f.train_rows(fold);
                    all.extend(f.test_rows(fold));
                    all.sort_unstable();
                    prop_assert_eq!(all, (0..labels.len()).collect::<Vec<_>>());
                }
            }
            Err(SelectError::ClassTooSmall { .. }) => prop_assert!(stratified),
            Err(e) => prop_assert!(false, "{}", e),
        }
    }

    #[test]
    fn accuracy_is_trace_over_n(raw in prop::collection::vec(1usize..4, 2..40), seed in any::<u64>()) {
        let n = raw.len();
        let labels = ClassLabels::new(raw, 3).unwrap();
        let mut rng = SplitMix64::new(seed);
        let x = DesignMatrix::unnamed(Array2::from_shape_fn((n, 2), |_| rng.uniform())).unwrap();
        let coef = CoefficientTensor::new(Array2::from_shape_fn((3, 3), |_| rng.normal())).unwrap();
        let r = evaluate(&coef, &x, &labels).unwrap();
        let total: usize = r.confusion.iter().flatten().sum();
        prop_assert_eq!(total, n);
        let trace: usize = (0..3).map(|c| r.confusion[c][c]).sum();
        prop_assert_eq!(r.accuracy, trace as f64 / n as f64);
    }
}
