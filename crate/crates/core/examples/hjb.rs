//! Backward HJB solve for `G = x²`, `H = z²/2` against `u = a x² - ½ ln(1 - 2τ)`.

use mflab::hjb::{solve_backward, HjbOptions, Quadratic, SpaceTimeGrid};

fn main() -> mflab::Result<()> {
    let horizon = 0.3;
    let grid = SpaceTimeGrid::new(-8.0, 8.0, 801, 0.0, horizon, 300)?;
    let u = solve_backward(&grid, &Quadratic, &|_, _| 0.0, &|x| x * x, &HjbOptions::default())?;
    let a = 1.0 / (1.0 - 2.0 * horizon);
    let k = -0.5 * (1.0f64 - 2.0 * horizon).ln();
    for x in [-1.0, 0.0, 0.5, 2.0] {
        let exact = a * x * x + k;
        println!("u(0, {x:>4}) = {:.5}   exact {exact:.5}   du = {:.4}", u.value(0, x), u.grad(0, x));
    }
    Ok(())
}
