//! `V(t, x, μ)` for the quadratic coupling `G = (x - m_μ)²`.

use mflab::hjb::CouplingSpec;
use mflab::measures::sample;
use mflab::mfg::{MfgConfig, ValueFunction};
use mflab::DistributionSpec;

fn main() -> mflab::Result<()> {
    let mut cfg = MfgConfig::new(CouplingSpec::quadratic(), 0.2);
    cfg.particles = 5000;
    let v = ValueFunction::new(cfg.build()?, 1, 1)?;
    let mu = sample(&DistributionSpec::Gaussian { mean: 0.5, var: 1.0 }, 64, 2)?;
    for x in [-1.0, 0.5, 2.0] {
        println!("V(0, {x:>4}, mu) = {:.5}   d/dx = {:.5}", v.eval(0.0, x, &mu)?, v.grad_x(0.0, x, &mu)?);
    }
    println!("V(0.1, 0.0, mu) = {:.5}", v.eval(0.1, 0.0, &mu)?);
    Ok(())
}
