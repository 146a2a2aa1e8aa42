use std::str::FromStr;

use planshare_core::payment::{
    benchmark_adjustment, breakdown_for, rebate_for, rebate_percentage, revenue_for,
    weighted_benchmark, StarTier,
};
use proptest::prelude::*;
use rust_decimal::Decimal;

fn d(s: &str) -> Decimal {
    Decimal::from_str(s).unwrap()
}

fn cents() -> impl Strategy<Value = Decimal> {
    (1i64..500_000).prop_map(|c| Decimal::new(c, 2))
}

fn tier() -> impl Strategy<Value = StarTier> {
    prop::sample::select(StarTier::ALL.to_vec())
}

#[test]
fn schedule() {
    use StarTier::*;
    let adj: Vec<Decimal> = StarTier::ALL
        .iter()
        .map(|t| benchmark_adjustment(*t))
        .collect();
    assert_eq!(
        adj,
        [d("0.05"), d("0.05"), d("0.05"), d("0.035"), d("0"), d("0")]
    );
    let pct: Vec<Decimal> = StarTier::ALL
        .iter()
        .map(|t| rebate_percentage(*t))
        .collect();
    assert_eq!(
        pct,
        [
            d("0.70"),
            d("0.70"),
            d("0.65"),
            d("0.65"),
            d("0.65"),
            d("0.50")
        ]
    );
    assert_eq!(benchmark_adjustment(New), d("0.035"));
}

#[test]
fn worked_examples() {
    assert_eq!(
        rebate_for(d("1000"), d("900"), StarTier::FourHalf).to_string(),
        "70.00"
    );
    assert_eq!(
        rebate_for(d("1000"), d("1000"), StarTier::FourHalf).to_string(),
        "0.00"
    );
    assert_eq!(
        rebate_for(d("1000"), d("900"), StarTier::ThreeOrLess).to_string(),
        "50.00"
    );
    assert_eq!(
        revenue_for(d("1000"), d("900"), d("1.0"), StarTier::FourHalf).to_string(),
        "970.00"
    );
    assert_eq!(
        revenue_for(d("1000"), d("1000"), d("1.0"), StarTier::FourHalf).to_string(),
        "1000.00"
    );
    let above = breakdown_for(d("1000"), d("1100"), d("1.0"), StarTier::FourHalf, None);
    assert_eq!(above.premium.to_string(), "100.00");
    assert_eq!(above.revenue.to_string(), "1100.00");
}

#[test]
fn weighted_benchmarks() {
    assert_eq!(
        weighted_benchmark(&[(d("1234.56"), d("7"))]).unwrap(),
        d("1234.56")
    );
    assert_eq!(
        weighted_benchmark(&[(d("1000"), d("1")), (d("2000"), d("1"))]).unwrap(),
        d("1500")
    );
    assert_eq!(
        weighted_benchmark(&[(d("1000"), d("3")), (d("2000"), d("1"))]).unwrap(),
        d("1250")
    );
}

proptest! {
    #[test]
    fn rebate_nonnegative_and_nonincreasing_in_bid(bench in cents(), a in cents(), b in cents(), t in tier()) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let r_lo = rebate_for(bench, lo, t);
        let r_hi = rebate_for(bench, hi, t);
        prop_assert!(r_hi >= Decimal::ZERO);
        prop_assert!(r_hi <= r_lo);
    }

    #[test]
    fn revenue_continuous_at_benchmark(bench in cents(), t in tier()) {
        let at = revenue_for(bench, bench, Decimal::ONE, t);
        let just_below = revenue_for(bench, bench - Decimal::new(1, 2), Decimal::ONE, t);
        let just_above = revenue_for(bench, bench + Decimal::new(1, 2), Decimal::ONE, t);
        prop_assert_eq!(at, bench.round_dp(2));
        prop_assert!((at - just_below).abs() <= Decimal::new(1, 2));
        prop_assert!((just_above - at).abs() <= Decimal::new(1, 2));
    }

    #[test]
    fn doubling_risk_doubles_base_component(bench in cents(), bid in cents(), risk in 1i64..300, t in tier()) {
        let r = Decimal::new(risk, 2);
        let one = breakdown_for(bench, bid, r, t, None);
        let two = breakdown_for(bench, bid, r * Decimal::TWO, t, None);
        prop_assert_eq!(one.premium, two.premium);
        prop_assert_eq!(one.rebate, two.rebate);
        prop_assert_eq!(two.base_component(r * Decimal::TWO), one.base_component(r) * Decimal::TWO);
        prop_assert_eq!(one.revenue, planshare_core::payment::money(one.base_component(r) + one.premium + one.rebate));
    }

    #[test]
    fn weighted_benchmark_within_range(pairs in prop::collection::vec((cents(), 0i64..100), 1..8)) {
        let pairs: Vec<(Decimal, Decimal)> = pairs.into_iter().map(|(b, w)| (b, Decimal::from(w))).collect();
        prop_assume!(pairs.iter().any(|(_, w)| !w.is_zero()));
        let wb = weighted_benchmark(&pairs).unwrap();
        let min = pairs.iter().map(|p| p.0).min().unwrap();
        let max = pairs.iter().map(|p| p.0).max().unwrap();
        prop_assert!(wb >= min && wb <= max);
    }
}
