use mflab::nash::{chaos_experiment, empirical_rate_experiment, nash_grid2p, nash_lq, ChaosConfig, Grid2pOptions, NashFamily};
use mflab::DistributionSpec;

/// Closed form of the quadratic N-player game with `M = N - 1` others at
/// time-to-go `τ`: `v = a(x - m)² + k`.
fn lq_exact(players: usize, tau: f64) -> (f64, f64) {
    let m = (players - 1) as f64;
    let r = 1.0 + 2.0 / m;
    let a = 1.0 / (1.0 - 2.0 * r * tau);
    let k = (1.0 + 1.0 / m) * (-(1.0 - 2.0 * r * tau).ln()) / (2.0 * r);
    (a, k)
}

#[test]
fn lq_coefficients_match_closed_form() {
    for players in [2usize, 3, 5, 16, 200] {
        let horizon = 0.1;
        let o = nash_lq(players, horizon).unwrap();
        assert!(o.certificate().passes());
        let coef = o.lq_coefficients().unwrap();
        for t in [0.0, 0.03, 0.07, 0.1] {
            let (a, k) = lq_exact(players, horizon - t);
            let [ca, cb, cc, ce, ck] = coef.at(t);
            assert!((ca - a).abs() < 1e-8 * a, "N={players} t={t}: a {ca} vs {a}");
            assert!((cb + 2.0 * a).abs() < 2e-8 * a && (cc - a).abs() < 1e-8 * a);
            assert_eq!(ce, 0.0);
            assert!((ck - k).abs() < 1e-8, "N={players} t={t}: k {ck} vs {k}");
        }
        let x: Vec<f64> = (0..players).map(|i| (i as f64 * 0.7).sin()).collect();
        let mean_others = (x.iter().sum::<f64>() - x[0]) / (players - 1) as f64;
        let (a, k) = lq_exact(players, horizon);
        assert!((o.value(0, 0.0, &x) - (a * (x[0] - mean_others).powi(2) + k)).abs() < 1e-7);
    }
}

#[test]
fn lq_values_are_symmetric() {
    let o = nash_lq(4, 0.2).unwrap();
    let x = [0.4, -1.1, 2.0, 0.3];
    let swapped = [0.4, 2.0, 0.3, -1.1];
    assert!((o.value(0, 0.05, &x) - o.value(0, 0.05, &swapped)).abs() < 1e-12);
    let rolled = [-1.1, 2.0, 0.3, 0.4];
    assert!((o.value(0, 0.05, &x) - o.value(3, 0.05, &rolled)).abs() < 1e-12);
}

#[test]
fn two_player_grid_matches_closed_form() {
    let opts = Grid2pOptions { nx: 121, ..Grid2pOptions::default() };
    let g = nash_grid2p(0.1, &opts).unwrap();
    let (a, k) = lq_exact(2, 0.1);
    for (x1, x2) in [(0.0, 0.0), (0.5, -0.5), (1.0, 0.25), (-1.5, 1.0)] {
        let exact = a * (x1 - x2) * (x1 - x2) + k;
        let v = g.value(0, 0.0, &[x1, x2]);
        assert!((v - exact).abs() < 5e-3, "({x1}, {x2}): {v} vs {exact}");
        assert!((g.value(1, 0.0, &[x1, x2]) - g.value(0, 0.0, &[x2, x1])).abs() < 1e-12);
    }
}

#[test]
fn quadratic_blows_up_past_one_sixth_for_two_players() {
    assert!(nash_lq(2, 0.15).is_ok());
    assert_eq!(nash_lq(2, 0.2).unwrap_err().kind(), "blowup");
}

#[test]
fn uniform_empirical_rate() {
    let law = DistributionSpec::Uniform { a: 0.0, b: 1.0 };
    let r = empirical_rate_experiment(&law, &[16, 64, 256, 1024], 100, 3).unwrap();
    let s = r.slope().unwrap();
    assert!((s + 1.0).abs() < 0.15, "slope {s}");
    assert!(r.values.iter().all(|&v| v > 0.0));
}

#[test]
fn shared_drift_chaos_is_exactly_zero() {
    let mut c = ChaosConfig::new(NashFamily::Separable);
    c.n_grid = vec![4, 8];
    c.trials = 8;
    c.particles = 2000;
    c.grid.nx = 201;
    c.grid.dt = 0.01;
    let r = chaos_experiment(&c, 5).unwrap();
    assert!(r.path.values.iter().all(|&v| v == 0.0), "{:?}", r.path.values);
    // at t = 0 the players are iid draws from the law
    assert!(r.flow_at_zero.iter().all(|&v| v > 0.0));
    assert!(r.flow_at_zero[1] < r.flow_at_zero[0]);
}
