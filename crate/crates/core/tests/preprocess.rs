use approx::assert_abs_diff_eq;
use ndarray::Array2;
use planshare_core::ingest::{compute_market_share, filter_contracts, write_dataset};
use planshare_core::preprocess::{
    bucket_market_share, correlation_matrix, min_max_normalize, one_hot_encode, run_preprocess,
    variance_inflation_factors, ColumnData, DropReason, FeatureKind, PreprocessConfig,
    PreprocessError, RawColumn, RawDataset, VifMode, DEFAULT_CUTPOINTS,
};
use planshare_core::synthetic::{fixture_preprocess_config, plan_fixture};
use planshare_testkit::rng::SplitMix64;
use proptest::prelude::*;

fn fixture_dataset(seed: u64) -> RawDataset {
    let fx = plan_fixture(seed);
    let kept = filter_contracts(&fx.records);
    let shares = compute_market_share(&kept, &fx.year_totals).unwrap();
    let mut buf = Vec::new();
    write_dataset(&mut buf, &kept, &shares).unwrap();
    RawDataset::read_csv(
        buf.as_slice(),
        b',',
        &PreprocessConfig::default().categorical,
    )
    .unwrap()
}

#[test]
fn fixture_yields_172_rows_and_42_features() {
    let raw = fixture_dataset(7);
    let out = run_preprocess(&raw, &fixture_preprocess_config()).unwrap();
    assert_eq!(out.encoded.design.n(), 172);
    assert_eq!(
        out.encoded.design.p(),
        42,
        "{:?}",
        out.encoded.design.column_names()
    );
    assert_eq!(out.encoded.labels.counts(), vec![47, 60, 65]);

    let reasons = |r: DropReason| -> Vec<&str> {
        out.report
            .dropped
            .iter()
            .filter(|d| d.reason == r)
            .map(|d| d.feature.as_str())
            .collect()
    };
    assert_eq!(
        reasons(DropReason::ZeroVariance),
        [
            "d12_In-Home_Safety_Assessment",
            "d25_Telemonitoring_Services"
        ]
    );
    assert_eq!(
        reasons(DropReason::HighCorrelation),
        ["Copay_Plan", "Rehabilitation_services_physical"]
    );
    assert!(reasons(DropReason::Manual).contains(&"Membership"));
    assert_eq!(reasons(DropReason::RedundantAggregate).len(), 4);
    assert!(reasons(DropReason::HighVif).is_empty());

    let brands = out
        .encoded
        .feature_kinds
        .keys()
        .filter(|k| k.starts_with("brand="))
        .count();
    assert_eq!(brands, 7);
}

#[test]
fn encoded_ranges_and_one_hot_groups() {
    let raw = fixture_dataset(11);
    let out = run_preprocess(&raw, &fixture_preprocess_config()).unwrap();
    let x = out.encoded.design.values();
    for (j, (name, kind)) in out.encoded.feature_kinds.iter().enumerate() {
        let col = x.column(j);
        match kind {
            FeatureKind::ContinuousMinmax => {
                assert!(col.iter().all(|v| (0.0..=1.0).contains(v)), "{name}");
                assert_eq!(col.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
                assert_eq!(col.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
            }
            FeatureKind::OneHotLevel => assert!(col.iter().all(|v| *v == 0.0 || *v == 1.0)),
        }
    }
    for prefix in ["brand=", "year=", "Star_Rating="] {
        let idx: Vec<usize> = out
            .encoded
            .feature_kinds
            .keys()
            .enumerate()
            .filter(|(_, k)| k.starts_with(prefix))
            .map(|(j, _)| j)
            .collect();
        assert!(!idx.is_empty());
        for row in x.rows() {
            assert_eq!(idx.iter().map(|&j| row[j]).sum::<f64>(), 1.0);
        }
    }
}

#[test]
fn rerun_is_bit_identical() {
    let raw = fixture_dataset(3);
    let a = run_preprocess(&raw, &fixture_preprocess_config()).unwrap();
    let b = run_preprocess(&raw, &fixture_preprocess_config()).unwrap();
    assert_eq!(a, b);
    assert_eq!(
        serde_json::to_string(&a.report).unwrap(),
        serde_json::to_string(&b.report).unwrap()
    );
}

#[test]
fn transform_reapplies_to_held_out_rows() {
    let raw = fixture_dataset(5);
    let train: Vec<usize> = (0..raw.n_rows()).filter(|i| i % 5 != 0).collect();
    let test: Vec<usize> = (0..raw.n_rows()).filter(|i| i % 5 == 0).collect();
    let fit = run_preprocess(&raw.select_rows(&train), &fixture_preprocess_config()).unwrap();
    let json = serde_json::to_string(&fit.transform).unwrap();
    let transform: planshare_core::preprocess::Transform = serde_json::from_str(&json).unwrap();
    assert_eq!(transform, fit.transform);
    let held = transform.apply(&raw.select_rows(&test)).unwrap();
    assert_eq!(
        held.design.column_names(),
        fit.encoded.design.column_names()
    );
    assert!(held.design.values().iter().all(|v| (0.0..=1.0).contains(v)));
    let again = transform.apply(&raw.select_rows(&train)).unwrap();
    assert_eq!(again.design, fit.encoded.design);
}

fn numeric(name: &str, v: Vec<f64>) -> RawColumn {
    RawColumn {
        name: name.into(),
        data: ColumnData::Numeric(v),
    }
}

#[test]
fn membership_dropped_as_manual_and_clean_data_drops_nothing() {
    let share = vec![0.001, 0.005, 0.02, 0.002, 0.01, 0.05];
    let a = vec![1.0, 2.0, 3.0, 1.0, 5.0, 2.0];
    let b = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0];
    let config = PreprocessConfig::default();

    let clean = RawDataset::new(vec![
        numeric("a", a.clone()),
        numeric("b", b.clone()),
        numeric("market_share", share.clone()),
    ])
    .unwrap();
    let out = run_preprocess(&clean, &config).unwrap();
    assert!(out.report.dropped.is_empty());
    assert_eq!(out.encoded.design.p(), 2);

    let with_membership = RawDataset::new(vec![
        numeric("a", a),
        numeric("Membership", vec![10.0, 50.0, 200.0, 20.0, 100.0, 500.0]),
        numeric("b", b),
        numeric("market_share", share),
    ])
    .unwrap();
    let out = run_preprocess(&with_membership, &config).unwrap();
    assert_eq!(out.report.dropped.len(), 1);
    assert_eq!(out.report.dropped[0].feature, "Membership");
    assert_eq!(out.report.dropped[0].reason, DropReason::Manual);
}

#[test]
fn duplicate_column_handled_by_both_screens() {
    let share = vec![0.001, 0.005, 0.02, 0.002, 0.01, 0.05, 0.004, 0.03];
    let a = vec![1.0, 2.0, 3.0, 1.0, 5.0, 2.0, 7.0, 4.0];
    let b = vec![0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 0.0, 1.0];
    let raw = RawDataset::new(vec![
        numeric("a", a.clone()),
        numeric("b", b),
        numeric("a_copy", a),
        numeric("market_share", share),
    ])
    .unwrap();
    let out = run_preprocess(&raw, &PreprocessConfig::default()).unwrap();
    assert_eq!(out.report.dropped[0].feature, "a_copy");
    assert_eq!(out.report.dropped[0].reason, DropReason::HighCorrelation);

    let config = PreprocessConfig {
        correlation_threshold: 1.0,
        ..Default::default()
    };
    let out = run_preprocess(&raw, &config).unwrap();
    assert!(out.report.vif["a"].0.is_infinite());
    assert!(out.report.vif["a_copy"].0.is_infinite());
    let json = serde_json::to_string(&out.report).unwrap();
    assert!(json.contains("\"a_copy\":\"inf\""), "{json}");
    assert_eq!(out.report.dropped.len(), 1);
    assert_eq!(out.report.dropped[0].reason, DropReason::HighVif);

    let report_only = PreprocessConfig {
        vif_mode: VifMode::ReportOnly,
        ..config
    };
    let out = run_preprocess(&raw, &report_only).unwrap();
    assert!(out.report.dropped.is_empty());
    assert_eq!(out.encoded.design.p(), 3);
}

#[test]
fn unseen_level_at_transform_time() {
    let share = vec![0.001, 0.005, 0.02, 0.002];
    let cat = |v: &[&str]| RawColumn {
        name: "brand".into(),
        data: ColumnData::Categorical(v.iter().map(|s| s.to_string()).collect()),
    };
    let train = RawDataset::new(vec![
        cat(&["a", "b", "a", "b"]),
        numeric("market_share", share.clone()),
    ])
    .unwrap();
    let fit = run_preprocess(&train, &PreprocessConfig::default()).unwrap();
    let test = RawDataset::new(vec![
        cat(&["a", "c", "a", "b"]),
        numeric("market_share", share),
    ])
    .unwrap();
    assert!(matches!(
        fit.transform.apply(&test),
        Err(PreprocessError::UnseenLevel { .. })
    ));
}

#[test]
fn empty_cell_is_an_error() {
    let csv = "a,market_share\n1,0.01\n,0.02\n";
    let err = RawDataset::read_csv(csv.as_bytes(), b',', &[]).unwrap_err();
    assert!(
        matches!(err, PreprocessError::MissingValue { row: 3, .. }),
        "{err}"
    );
}

/// Columns with a prescribed correlation `rho` between the first two.
fn correlated_instance(seed: u64, n: usize, p: usize, rho: f64) -> Array2<f64> {
    let mut rng = SplitMix64::new(seed);
    let mut x = Array2::from_shape_fn((n, p), |_| rng.normal());
    for i in 0..n {
        x[[i, 1]] = rho * x[[i, 0]] + (1.0 - rho * rho).sqrt() * x[[i, 1]];
    }
    x
}

fn oracle_vif(x: &Array2<f64>) -> Vec<Option<f64>> {
    let cols: Vec<Vec<f64>> = x.columns().into_iter().map(|c| c.to_vec()).collect();
    planshare_testkit::lsq::vif(&cols)
}

#[test]
fn vif_matches_normal_equations_oracle() {
    for seed in 0..10 {
        let x = correlated_instance(seed, 40, 3 + (seed as usize % 3), 0.9);
        let ours = variance_inflation_factors(x.view()).unwrap();
        let theirs = oracle_vif(&x);
        for (a, b) in ours.iter().zip(&theirs) {
            let b = b.expect("well conditioned");
            assert!(
                (a - b).abs() <= 1e-8 * b.max(1.0),
                "seed {seed}: {a} vs {b}"
            );
        }
    }
}

#[test]
fn vif_duplicate_column_is_sentinel() {
    let mut x = correlated_instance(42, 30, 3, 0.5);
    let dup = x.column(0).to_owned();
    x.push_column(dup.view()).unwrap();
    let v = variance_inflation_factors(x.view()).unwrap();
    assert!(v[0].is_infinite() && v[3].is_infinite());
    assert!(v[1].is_finite() && v[2].is_finite());
}

#[test]
fn correlation_five_vectors() {
    let x = Array2::from_shape_vec((5, 2), vec![1., 2., 2., 1., 3., 4., 4., 3., 5., 6.]).unwrap();
    let r = correlation_matrix(x.view()).unwrap();
    // cross-product 10, sums of squares 10 and 14.8
    assert_abs_diff_eq!(r[[0, 1]], 10.0 / 148f64.sqrt(), epsilon = 1e-12);
    assert_eq!(r[[0, 0]], 1.0);
    assert_eq!(r[[0, 1]], r[[1, 0]]);
}

#[test]
fn bucket_counts_47_60_65() {
    let mut rng = SplitMix64::new(9);
    let mut shares = Vec::new();
    for (count, lo, hi) in [(47, 0.0, 0.003), (60, 0.003, 0.015), (65, 0.015, 0.3)] {
        shares.extend((0..count).map(|_| lo + (hi - lo) * rng.uniform()));
    }
    shares.extend([0.0, 0.003, 0.015]);
    let mut counts = [0usize; 3];
    for s in &shares[..172] {
        counts[bucket_market_share(*s, &DEFAULT_CUTPOINTS).unwrap() - 1] += 1;
    }
    assert_eq!(counts, [47, 60, 65]);
    assert_eq!(bucket_market_share(0.003, &DEFAULT_CUTPOINTS).unwrap(), 2);
    assert_eq!(
        bucket_market_share(0.0149999, &DEFAULT_CUTPOINTS).unwrap(),
        2
    );
    assert_eq!(bucket_market_share(0.015, &DEFAULT_CUTPOINTS).unwrap(), 3);
}

proptest! {
    #[test]
    fn min_max_hits_both_ends_and_preserves_order(v in prop::collection::vec(-1e6f64..1e6, 2..40)) {
        prop_assume!(v.iter().any(|x| *x != v[0]));
        let out = min_max_normalize(&v).unwrap();
        prop_assert_eq!(out.iter().cloned().fold(f64::INFINITY, f64::min), 0.0);
        prop_assert_eq!(out.iter().cloned().fold(f64::NEG_INFINITY, f64::max), 1.0);
        for i in 0..v.len() {
            for j in 0..v.len() {
                if v[i] < v[j] {
                    prop_assert!(out[i] <= out[j]);
                }
            }
        }
    }

    #[test]
    fn one_hot_rows_sum_to_one(idx in prop::collection::vec(0usize..4, 1..50)) {
        let levels: Vec<String> = ["w", "x", "y", "z"].iter().map(|s| s.to_string()).collect();
        let values: Vec<&str> = idx.iter().map(|&i| levels[i].as_str()).collect();
        let m = one_hot_encode(&values, &levels).unwrap();
        for (i, row) in m.rows().into_iter().enumerate() {
            prop_assert_eq!(row.sum(), 1.0);
            prop_assert_eq!(row[idx[i]], 1.0);
        }
    }

    #[test]
    fn bucketing_is_monotone(a in 0.0f64..0.3, b in 0.0f64..0.3) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(
            bucket_market_share(lo, &DEFAULT_CUTPOINTS).unwrap()
                <= bucket_market_share(hi, &DEFAULT_CUTPOINTS).unwrap()
        );
    }

    #[test]
    fn orthogonal_design_has_unit_vif(scale in prop::collection::vec(0.5f64..5.0, 3)) {
        // columns of a 4x4 Hadamard matrix without the constant one
        let h = [[1., 1., 1.], [-1., 1., -1.], [1., -1., -1.], [-1., -1., 1.]];
        let mut rows = Vec::new();
        for _ in 0..2 {
            for r in &h {
                rows.extend(r.iter().zip(&scale).map(|(a, s)| a * s));
            }
        }
        let x = Array2::from_shape_vec((8, 3), rows).unwrap();
        for v in variance_inflation_factors(x.view()).unwrap() {
            prop_assert!((v - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn design_file_round_trips_exactly() {
    let raw = fixture_dataset(2);
    let out = run_preprocess(&raw, &fixture_preprocess_config()).unwrap();
    let mut buf = Vec::new();
    planshare_core::preprocess::write_design_csv(
        &mut buf,
        &out.encoded.design,
        &out.encoded.labels,
    )
    .unwrap();
    let (x, y) = planshare_core::preprocess::read_design_csv(buf.as_slice(), 3).unwrap();
    assert_eq!(x, out.encoded.design);
    assert_eq!(y, out.encoded.labels);
}
