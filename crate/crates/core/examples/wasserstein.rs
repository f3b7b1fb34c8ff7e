//! Empirical measures: sampling, W1/W2, exact W1 to a law, CSV and JSON.

use mflab::measures::{sample, w1_distance, w1_to_law, w2_distance};
use mflab::{DistributionSpec, EmpiricalMeasure};

fn main() -> mflab::Result<()> {
    let law = DistributionSpec::standard_normal();
    let a = sample(&law, 500, 1)?;
    let b = sample(&DistributionSpec::Gaussian { mean: 1.0, var: 1.0 }, 500, 2)?;
    println!("W1(a, b) = {:.4}   W2(a, b) = {:.4}", w1_distance(&a, &b)?, w2_distance(&a, &b)?);
    for n in [16usize, 256, 4096] {
        let mut mean = 0.0;
        for seed in 0..20 {
            mean += w1_to_law(&sample(&law, n, seed)?, &law)? / 20.0;
        }
        println!("N = {n:>5}: mean W1(mu^N, N(0,1)) = {mean:.5}   sqrt(N) x mean = {:.3}", mean * (n as f64).sqrt());
    }

    let mut csv = Vec::new();
    a.write_csv(&mut csv)?;
    assert_eq!(EmpiricalMeasure::read_csv(&csv[..])?, a);
    let json = a.to_json()?;
    assert_eq!(EmpiricalMeasure::from_json(&json)?, a);
    println!("CSV header: {}", String::from_utf8_lossy(&csv).lines().next().unwrap_or_default());
    Ok(())
}
