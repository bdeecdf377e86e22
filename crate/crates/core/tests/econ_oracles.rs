use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use taxsim::{compute_income_tax, compute_penalty, CalibrationData, EnforcementPolicy, IncomeTaxSchedule, Money};

/// Walks the income one dollar at a time, charging each dollar at the
/// marginal rate of the bracket it falls in. Rates are whole percents, so
/// whole dollars are tallied in integer cents.
fn marginal_oracle(income: f64, brackets: &[(u64, u64)]) -> f64 {
    let rate_at = |dollar: u64| brackets.iter().rev().find(|&&(lo, _)| dollar >= lo).map_or(0, |&(_, r)| r);
    let whole = income.floor() as u64;
    let cents: u64 = (0..whole).map(rate_at).sum();
    cents as f64 / 100.0 + (income - whole as f64) * rate_at(whole) as f64 / 100.0
}

fn bundled_brackets() -> Vec<(u64, u64)> {
    let schedule = &CalibrationData::bundled().tax_schedule;
    schedule
        .brackets
        .iter()
        .map(|b| (b.lower_bound.0 as u64, (b.rate * 100.0).round() as u64))
        .collect()
}

#[test]
fn income_tax_matches_marginal_oracle_on_1000_incomes() {
    let schedule = CalibrationData::bundled().tax_schedule;
    let brackets = bundled_brackets();
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    for _ in 0..1000 {
        let income = (rng.random_range(0.0..700_000.0_f64) * 100.0).round() / 100.0;
        let closed = compute_income_tax(Money(income), &schedule).unwrap().0;
        let oracle = marginal_oracle(income, &brackets);
        assert!((closed - oracle).abs() < 0.005, "income {income}: {closed} vs {oracle}");
    }
}

#[test]
fn bracket_edges_match_oracle() {
    let schedule = CalibrationData::bundled().tax_schedule;
    let brackets = bundled_brackets();
    for &(lo, _) in &brackets {
        for income in [lo.saturating_sub(1), lo, lo + 1] {
            let closed = compute_income_tax(Money(income as f64), &schedule).unwrap().0;
            assert!((closed - marginal_oracle(income as f64, &brackets)).abs() < 0.005);
        }
    }
}

#[test]
fn fifty_thousand_worked_example() {
    let schedule = CalibrationData::bundled().tax_schedule;
    let expected = 0.10 * 11_000.0 + 0.12 * 33_725.0 + 0.22 * 5_275.0;
    assert!((compute_income_tax(Money(50_000.0), &schedule).unwrap().0 - expected).abs() < 1e-6);
}

proptest! {
    #[test]
    fn tax_is_monotone_and_below_income(a in 0.0..2_000_000.0f64, b in 0.0..2_000_000.0f64) {
        let schedule = CalibrationData::bundled().tax_schedule;
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let t_lo = compute_income_tax(Money(lo), &schedule).unwrap().0;
        let t_hi = compute_income_tax(Money(hi), &schedule).unwrap().0;
        prop_assert!(t_lo <= t_hi + 1e-9);
        prop_assert!(t_hi <= hi * schedule.top_rate() + 1e-9);
    }

    #[test]
    fn flat_schedule_is_proportional(rate in 0.0..1.0f64, income in 0.0..1e6f64) {
        let schedule = IncomeTaxSchedule::flat(rate).unwrap();
        let t = compute_income_tax(Money(income), &schedule).unwrap().0;
        prop_assert!((t - rate * income).abs() <= 1e-9 * income.max(1.0));
    }

    #[test]
    fn penalty_is_affine_in_gap(gap in 0.01..1e6f64, alpha in 0.0..2.0f64, fine in 0.0..1e5f64) {
        let policy = EnforcementPolicy { audit_probability: 0.1, penalty_rate: alpha, fixed_fine: Money(fine), audit_period: 30 };
        let p = compute_penalty(Money(gap), &policy).unwrap().0;
        // back taxes are waived, so only α·gap + fine is charged
        prop_assert!((p - (gap * alpha + fine)).abs() < 1e-9 * (gap + fine + 1.0));
    }
}
