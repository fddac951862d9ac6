//! Equilibrium analysis of the proof-of-work mining game with hardware investment.

pub mod empirics;
pub mod equilibrium;
pub mod error;
pub mod investment;
pub mod metrics;
pub mod model;
pub mod sensitivities;
pub mod tol;

pub use empirics::{
    fit_loglog, fit_loglog_dated, load_series, monthly_mean, read_series, regression_returns, seven_day_average,
    three_month_returns, Field, MarketSeries, Observation, RegressionFit, ReturnSeries,
};
pub use equilibrium::{active_count, best_response, solve, solve_numeric, BestResponse, MiningEquilibrium};
pub use error::{Error, Result};
pub use investment::{
    approximation_error, cost_reduction, equilibrium_investment, optimal_level, ApproximationErrors, InvestmentOutcome,
};
pub use metrics::{
    attack_cost_curve, calibrate, concentration_curve, reward_sweep, CalibratedModel, CalibrationSpec, CurvePoints,
    SweepPoint,
};
pub use model::{
    effective_cost, payoff, GameParams, HashProfile, InvestmentProfile, MinerPopulation, ModelInstance,
};
pub use sensitivities::{
    analytic_sensitivities, finite_difference_check, sensitivities, FdCheck, MinerPartials, SensitivityReport,
};
