//! Mollify a nonlinear functional of a measure and watch `U_n(μ) → U(μ)`.

use mflab::measures::{sample, Functional};
use mflab::mollifier::{mollify_estimate, MollifierParams, Moment};
use mflab::DistributionSpec;

fn main() -> mflab::Result<()> {
    let mu = sample(&DistributionSpec::Gaussian { mean: 0.3, var: 0.5 }, 64, 7)?;
    let u = Moment(Functional::AbsDeviation);
    let exact = mu.functional(Functional::AbsDeviation)?;
    println!("U(mu) = {exact:.5}");
    for n in [4, 8, 16] {
        let params = MollifierParams::new(n, 256, 3, 11)?;
        let est = mollify_estimate(&u, &mu, &params)?;
        println!("n = {n:>2}: U_n(mu) = {:.5} ± {:.5}   |U_n - U| = {:.5}", est.value, est.stderr, (est.value - exact).abs());
    }
    Ok(())
}
