//! Paired t-test and confidence interval on two sets of error rates.

use gelo::stats::{mean_confidence_interval, paired_t_test, student_t_quantile, PairedTest};

fn main() -> gelo::Result<()> {
    let elo = [0.341, 0.329, 0.352, 0.319, 0.301, 0.322, 0.317, 0.305, 0.311, 0.336];
    let gelo = [0.335, 0.327, 0.344, 0.316, 0.302, 0.315, 0.313, 0.301, 0.309, 0.330];

    let (lo, hi) = mean_confidence_interval(&gelo, 0.95)?;
    println!("gelo mean error 95% CI: [{lo:.4}, {hi:.4}]");
    println!("t(0.975, 9) = {:.4}", student_t_quantile(0.975, 9.0));

    match paired_t_test(&elo, &gelo)? {
        PairedTest::Regular(r) => println!(
            "mean diff {:.4}, t = {:.3}, p = {:.4}, CI [{:.4}, {:.4}]",
            r.mean_diff, r.t_statistic, r.p_value, r.ci_low, r.ci_high
        ),
        PairedTest::Degenerate { mean_diff, .. } => println!("all differences equal {mean_diff}"),
    }
    Ok(())
}
