//! N-player Nash systems: certified oracles and the convergence
//! experiments against the mean-field limit.

pub mod experiments;
pub mod oracle;

pub use experiments::{
    chaos_experiment, empirical_rate_experiment, nash_convergence_experiment, ChaosConfig, ChaosReport,
    NashRateConfig, NashRateReport, RateFit,
};
pub use oracle::{
    nash_grid2p, nash_lq, nash_separable, others_moments, solve_grid2p, Grid2p, Grid2pOptions, LqCoefficients,
    NashFamily, NashOracle, ResidualCertificate,
};
