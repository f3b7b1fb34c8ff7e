//! `E[W1²(μ^N, μ)]` against `N` with a log-log fit.

use mflab::nash::empirical_rate_experiment;
use mflab::DistributionSpec;

fn main() -> mflab::Result<()> {
    let ns: Vec<usize> = (4..=10).map(|k| 1 << k).collect();
    let r = empirical_rate_experiment(&DistributionSpec::standard_normal(), &ns, 100, 5)?;
    r.write_csv(std::io::stdout())?;
    println!("slope {:?}", r.slope());
    Ok(())
}
