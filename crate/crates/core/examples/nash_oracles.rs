//! N-player quadratic Nash values: the Riccati oracle and the 2-d grid solve.

use mflab::nash::{nash_grid2p, nash_lq, Grid2pOptions};

fn main() -> mflab::Result<()> {
    for n in [2usize, 4, 16, 256] {
        let o = nash_lq(n, 0.1)?;
        let [a, b, c, e, k] = o.lq_coefficients().expect("lq").at(0.0);
        println!("N = {n:>3}: a {a:.5} b {b:.5} c {c:.5} e {e} k {k:.5}  residual {:.1e}", o.certificate().max_residual);
    }
    let grid = nash_grid2p(0.1, &Grid2pOptions::default())?;
    let lq = nash_lq(2, 0.1)?;
    let x = [0.7, -0.4];
    println!("N = 2 at {x:?}: grid {:.6}  oracle {:.6}", grid.value(0, 0.0, &x), lq.value(0, 0.0, &x));
    Ok(())
}
