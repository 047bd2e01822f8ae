//! Empirical check of the calibration guarantee.
//!
//! The claim: calibrate λ₁ on c exchangeable labeled sentences with budget
//! α, then measure the miss risk on fresh sentences from the same
//! distribution — the mean held-out risk over many trials stays at or
//! below α. This simulation draws both sets from a fixed generative model
//! (factual sentences get Binomial(n, 0.82) support, hallucinated ones
//! Binomial(n, 0.35)), so each trial is a few microseconds of counting and
//! the long-run average is an honest estimate.
//!
//! Output shows mean held-out risk vs α together with the binomial
//! standard error of the estimate; "risk ≤ α" should hold comfortably at
//! every budget.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use radguard::calibration::{calibrate_lambda1, empirical_risk};
use radguard::fixtures::SyntheticSentenceModel;

fn main() -> radguard::Result<()> {
    let trials = 1000;
    let calibration_size = 300;
    let holdout_size = 600;
    let model = SyntheticSentenceModel::default();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    println!("{trials} trials, {calibration_size} calibration / {holdout_size} held-out sentences");
    println!(
        "{:>6} {:>12} {:>10} {:>14}",
        "alpha", "mean risk", "std err", "mean lambda1"
    );
    for alpha in [0.02, 0.05, 0.1] {
        let mut risk_sum = 0.0;
        let mut risk_sq_sum = 0.0;
        let mut lambda_sum = 0u64;
        for _ in 0..trials {
            let calibration = model.draw_many(&mut rng, calibration_size);
            let holdout = model.draw_many(&mut rng, holdout_size);
            let choice = calibrate_lambda1(&calibration, alpha, model.n)?;
            let risk = empirical_risk(&holdout, choice.lambda1)?;
            risk_sum += risk;
            risk_sq_sum += risk * risk;
            lambda_sum += u64::from(choice.lambda1);
        }
        let mean = risk_sum / trials as f64;
        let variance = risk_sq_sum / trials as f64 - mean * mean;
        let std_err = (variance / trials as f64).sqrt();
        println!(
            "{alpha:>6} {mean:>12.5} {std_err:>10.5} {:>14.2}  risk <= alpha: {}",
            lambda_sum as f64 / trials as f64,
            mean <= alpha
        );
    }
    Ok(())
}
