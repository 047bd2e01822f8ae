//! Sentence-threshold selection under a miss-risk budget.
//!
//! Flagging a sentence whose score is below λ₁ is a miss when the sentence
//! was actually entailed by the reference report. Over c labeled
//! calibration sentences the empirical miss risk at λ is
//!
//!   L_c(λ) = #{score < λ and entailed} / c,
//!
//! nondecreasing in λ. The finite-sample adjustment
//!
//!   B(λ) = (c/(c+1))·L_c(λ) + 1/(c+1)
//!
//! accounts for the one unseen exchangeable point; choosing the largest
//! grid λ with B(λ) ≤ α keeps the expected miss risk on fresh data at or
//! below α. Note B ≥ 1/(c+1) even at λ = 0, so a tiny calibration set
//! cannot certify a tiny α — that infeasibility is an error, not a silent
//! clamp.

use radguard::calibration::{calibrate_lambda1, empirical_risk};
use radguard::fixtures::{self, read_calibration_points};

fn main() -> radguard::Result<()> {
    for (name, file) in [
        ("medversa", "calibration_medversa.jsonl"),
        ("radialog", "calibration_radialog.jsonl"),
    ] {
        let points = read_calibration_points(&fixtures::fixtures_dir().join(file))?;
        println!("{name}: {} labeled sentences", points.len());
        for alpha in [0.05, 0.02] {
            let choice = calibrate_lambda1(&points, alpha, 10)?;
            println!(
                "  alpha = {alpha:<4}  lambda1 = {}  L_c = {:.4}  B = {:.4}",
                choice.lambda1, choice.empirical_risk, choice.adjusted_bound
            );
        }
        print!("  risk curve:");
        for lambda in 0..=11 {
            print!(" {:.3}", empirical_risk(&points, lambda)?);
        }
        println!("\n");
    }
    Ok(())
}
