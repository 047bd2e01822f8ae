//! Conformal risk control over the integer score grid.
//!
//! A calibration point pairs a sentence's support score with its
//! ground-truth entailment label (1 = factual). The controlled risk is the
//! fraction of factual sentences that get flagged:
//!
//! ```text
//! L_c(lambda) = (1/c) * sum_i [score_i < lambda] * entailed_i
//! B(lambda)   = (c/(c+1)) * L_c(lambda) + 1/(c+1)
//! ```
//!
//! Because scores are integers in [0, n], the grid {0, 1, ..., n+1} is
//! exhaustive: lambda = 0 flags nothing, lambda = n+1 flags everything.
//! L_c is nondecreasing in lambda, so the feasible set {lambda : B <= alpha}
//! is a prefix of the grid and the chosen threshold is its largest element:
//! the most aggressive flagging whose risk bound still clears alpha. With c
//! points the bound can never drop below 1/(c+1); an alpha at or under that
//! floor is unreachable and reported as "calibration set too small".
//!
//! `BoundFormula::Inflated` evaluates the inflated-factor variant
//! ((c+1)/c instead of c/(c+1)) with infimum selection, for side-by-side
//! comparison; it is not used for threshold selection by default.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One labeled calibration sentence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    /// Support score in [0, n].
    pub score: u32,
    /// 1 when the ground truth completely entails the sentence.
    pub entailed: bool,
}

/// Which risk-bound variant drives threshold selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum BoundFormula {
    /// (c/(c+1))·L + 1/(c+1), largest feasible lambda. The default.
    #[default]
    Standard,
    /// ((c+1)/c)·L + 1/(c+1), smallest feasible lambda. Comparison only.
    Inflated,
}

/// Outcome of lambda1 selection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lambda1Choice {
    pub lambda1: u32,
    /// L_c at the chosen lambda1.
    pub empirical_risk: f64,
    /// B at the chosen lambda1.
    pub adjusted_bound: f64,
}

/// Calibrated thresholds plus the inputs needed to audit them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub lambda1: u32,
    /// Report-level threshold at the first configured target fraction.
    pub lambda2: u32,
    /// Every swept (fraction, lambda2) pair, keyed by the fraction's decimal string.
    pub lambda2_by_fraction: BTreeMap<String, u32>,
    pub alpha: f64,
    pub n: u32,
    #[serde(rename = "c")]
    pub calibration_size: usize,
    #[serde(rename = "empirical_risk")]
    pub empirical_risk_at_lambda1: f64,
    pub formula_variant: BoundFormula,
}

/// Fraction of points that are factual AND would be flagged at `lambda`.
pub fn empirical_risk(points: &[CalibrationPoint], lambda: u32) -> Result<f64> {
    if points.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let hits = points
        .iter()
        .filter(|p| p.score < lambda && p.entailed)
        .count();
    Ok(hits as f64 / points.len() as f64)
}

fn adjusted_bound(risk: f64, c: usize, formula: BoundFormula) -> f64 {
    let c = c as f64;
    match formula {
        BoundFormula::Standard => (c / (c + 1.0)) * risk + 1.0 / (c + 1.0),
        BoundFormula::Inflated => ((c + 1.0) / c) * risk + 1.0 / (c + 1.0),
    }
}

/// Selects lambda1 on the grid {0..n+1} under the standard bound.
pub fn calibrate_lambda1(points: &[CalibrationPoint], alpha: f64, n: u32) -> Result<Lambda1Choice> {
    calibrate_lambda1_with(points, alpha, n, BoundFormula::Standard)
}

/// Selects lambda1 under an explicit bound variant.
pub fn calibrate_lambda1_with(
    points: &[CalibrationPoint],
    alpha: f64,
    n: u32,
    formula: BoundFormula,
) -> Result<Lambda1Choice> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(format!(
            "alpha must be in (0, 1), got {alpha}"
        )));
    }
    if points.is_empty() {
        return Err(Error::EmptyCalibration);
    }
    let c = points.len();

    let mut feasible: Option<Lambda1Choice> = None;
    for lambda in 0..=n + 1 {
        let risk = empirical_risk(points, lambda)?;
        let bound = adjusted_bound(risk, c, formula);
        if bound <= alpha {
            let choice = Lambda1Choice {
                lambda1: lambda,
                empirical_risk: risk,
                adjusted_bound: bound,
            };
            match formula {
                // Risk is nondecreasing, so keep overwriting: the last
                // feasible lambda is the largest.
                BoundFormula::Standard => feasible = Some(choice),
                // The inflated variant takes the first (infimum) feasible lambda.
                BoundFormula::Inflated => {
                    feasible = Some(choice);
                    break;
                }
            }
        }
    }
    feasible.ok_or(Error::CalibrationInfeasible {
        alpha,
        c,
        floor: 1.0 / (c as f64 + 1.0),
    })
}

/// For each target fraction, the smallest lambda2 whose flagged-report
/// fraction does not exceed it. `max(counts)+1` flags nothing, so a result
/// always exists.
pub fn sweep_lambda2(
    report_flag_counts: &[u32],
    target_fractions: &[f64],
) -> Result<BTreeMap<String, u32>> {
    if report_flag_counts.is_empty() {
        return Err(Error::Config(
            "sweep_lambda2 needs at least one report".into(),
        ));
    }
    for &f in target_fractions {
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!(
                "target fraction must be in (0, 1), got {f}"
            )));
        }
    }
    let total = report_flag_counts.len() as f64;
    let max_count = report_flag_counts.iter().copied().max().unwrap_or(0);

    let mut out = BTreeMap::new();
    for &fraction in target_fractions {
        let mut chosen = max_count + 1;
        for lambda2 in 1..=max_count + 1 {
            let flagged = report_flag_counts.iter().filter(|&&h| h >= lambda2).count();
            if flagged as f64 / total <= fraction {
                chosen = lambda2;
                break;
            }
        }
        out.insert(fraction_key(fraction), chosen);
    }
    Ok(out)
}

/// Canonical map key for a target fraction ("0.05", "0.1", ...).
pub fn fraction_key(fraction: f64) -> String {
    // f64 Display is shortest-roundtrip, so 0.05 prints as "0.05" and keys
    // stay stable across platforms.
    format!("{fraction}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pts(raw: &[(u32, u8)]) -> Vec<CalibrationPoint> {
        raw.iter()
            .map(|&(score, entailed)| CalibrationPoint {
                score,
                entailed: entailed == 1,
            })
            .collect()
    }

    #[test]
    fn risk_counts_flagged_factual_fraction() {
        let points = pts(&[(0, 1), (5, 1), (9, 0)]);
        assert_eq!(empirical_risk(&points, 6).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn risk_at_lambda_zero_is_zero() {
        let points = pts(&[(0, 1), (3, 1), (7, 0)]);
        assert_eq!(empirical_risk(&points, 0).unwrap(), 0.0);
    }

    #[test]
    fn risk_ignores_non_entailed_points() {
        let points = pts(&[(0, 0), (1, 0), (2, 0)]);
        for lambda in 0..=11 {
            assert_eq!(empirical_risk(&points, lambda).unwrap(), 0.0);
        }
    }

    #[test]
    fn risk_rejects_empty_input() {
        assert!(matches!(
            empirical_risk(&[], 3),
            Err(Error::EmptyCalibration)
        ));
    }

    #[test]
    fn all_factual_free_points_calibrate_to_grid_max() {
        let points: Vec<CalibrationPoint> = (0..100)
            .map(|i| CalibrationPoint {
                score: i % 11,
                entailed: false,
            })
            .collect();
        let choice = calibrate_lambda1(&points, 0.05, 10).unwrap();
        assert_eq!(choice.lambda1, 11);
        assert_eq!(choice.empirical_risk, 0.0);
    }

    #[test]
    fn infeasible_alpha_is_reported() {
        // c = 9 gives a floor of 0.1; alpha below it can never be met.
        let points = pts(&[(0, 0); 9]);
        match calibrate_lambda1(&points, 0.05, 10) {
            Err(Error::CalibrationInfeasible { c, floor, .. }) => {
                assert_eq!(c, 9);
                assert!((floor - 0.1).abs() < 1e-12);
            }
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn inflated_variant_selects_infimum() {
        // Risk is 0 up to lambda=3, so the prefix of feasible lambdas starts
        // at 0; the inflated variant must return 0 while the standard variant
        // walks as far right as the bound allows.
        let points: Vec<CalibrationPoint> = (0..99)
            .map(|i| CalibrationPoint {
                score: 3 + (i % 8),
                entailed: true,
            })
            .collect();
        let inflated = calibrate_lambda1_with(&points, 0.05, 10, BoundFormula::Inflated).unwrap();
        assert_eq!(inflated.lambda1, 0);
        let standard = calibrate_lambda1(&points, 0.05, 10).unwrap();
        assert!(standard.lambda1 >= 3);
    }

    #[test]
    fn sweep_picks_smallest_feasible_lambda2() {
        // 20 reports: 1 with 4 flags, 1 with 2, 3 with 1, 15 clean.
        let counts = [4, 2, 1, 1, 1, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0];
        let swept = sweep_lambda2(&counts, &[0.05, 0.25]).unwrap();
        // fraction(h >= 3) = 1/20 = 0.05 <= 0.05, and fraction(h >= 2) = 0.1 > 0.05.
        assert_eq!(swept["0.05"], 3);
        // fraction(h >= 1) = 5/20 = 0.25 <= 0.25.
        assert_eq!(swept["0.25"], 1);
    }

    #[test]
    fn sweep_on_all_zero_counts_returns_one() {
        let swept = sweep_lambda2(&[0, 0, 0, 0], &[0.05, 0.5]).unwrap();
        assert_eq!(swept["0.05"], 1);
        assert_eq!(swept["0.5"], 1);
    }

    #[test]
    fn sweep_rejects_bad_fraction() {
        assert!(sweep_lambda2(&[1, 2], &[0.0]).is_err());
        assert!(sweep_lambda2(&[1, 2], &[1.0]).is_err());
    }

    // Brute-force oracle: enumerate the grid and check the bound directly,
    // sharing no code with the implementation under test.
    fn oracle_lambda1(points: &[(u32, bool)], alpha: f64, n: u32) -> Option<u32> {
        let c = points.len() as f64;
        let mut best = None;
        for lambda in 0..=n + 1 {
            let mut flagged_factual = 0.0;
            for &(score, entailed) in points {
                if entailed && score < lambda {
                    flagged_factual += 1.0;
                }
            }
            let bound = (c * (flagged_factual / c) + 1.0) / (c + 1.0);
            if bound <= alpha && best.is_none_or(|b| lambda > b) {
                best = Some(lambda);
            }
        }
        best
    }

    proptest! {
        #[test]
        fn risk_is_monotone_in_lambda(
            raw in proptest::collection::vec((0u32..=10, proptest::bool::ANY), 1..80),
            n in 10u32..=10,
        ) {
            let points: Vec<CalibrationPoint> = raw
                .iter()
                .map(|&(score, entailed)| CalibrationPoint { score, entailed })
                .collect();
            let mut prev = 0.0;
            for lambda in 0..=n + 1 {
                let risk = empirical_risk(&points, lambda).unwrap();
                prop_assert!(risk >= prev);
                prev = risk;
            }
        }

        #[test]
        fn calibration_matches_bruteforce_oracle(
            raw in proptest::collection::vec((0u32..=10, proptest::bool::ANY), 1..60),
            alpha in 0.01f64..0.5,
        ) {
            let points: Vec<CalibrationPoint> = raw
                .iter()
                .map(|&(score, entailed)| CalibrationPoint { score, entailed })
                .collect();
            let got = calibrate_lambda1(&points, alpha, 10).ok().map(|c| c.lambda1);
            let want = oracle_lambda1(&raw, alpha, 10);
            prop_assert_eq!(got, want);
        }

        #[test]
        fn calibration_is_monotone_in_alpha(
            raw in proptest::collection::vec((0u32..=10, proptest::bool::ANY), 5..60),
            lo in 0.02f64..0.3,
            delta in 0.0f64..0.5,
        ) {
            let points: Vec<CalibrationPoint> = raw
                .iter()
                .map(|&(score, entailed)| CalibrationPoint { score, entailed })
                .collect();
            let hi = (lo + delta).min(0.9);
            let at_lo = calibrate_lambda1(&points, lo, 10);
            let at_hi = calibrate_lambda1(&points, hi, 10);
            match (at_lo, at_hi) {
                (Ok(a), Ok(b)) => prop_assert!(a.lambda1 <= b.lambda1),
                // Feasibility only improves as alpha grows.
                (Err(_), _) => {}
                (Ok(_), Err(_)) => prop_assert!(false, "feasible at {} but not at {}", lo, hi),
            }
        }
    }
}
