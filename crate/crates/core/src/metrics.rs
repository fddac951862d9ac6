//! Calibration to network aggregates, concentration and attack-cost curves, reward sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{solve, MiningEquilibrium};
use crate::error::{Error, Result};
use crate::model::{GameParams, MinerPopulation, ModelInstance};

/// Inputs of the calibration recipe. Hash is in millions of TH/s and money in dollars.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationSpec {
    pub reward_per_day: f64,
    pub network_hash: f64,
    pub miner_count: usize,
    pub efficiency_j_per_th: f64,
    pub electricity_per_kwh: f64,
    pub hours: f64,
    pub eta_default: f64,
}

impl Default for CalibrationSpec {
    fn default() -> Self {
        Self {
            reward_per_day: 20e6,
            network_hash: 120.0,
            miner_count: 20,
            efficiency_j_per_th: 29.5,
            electricity_per_kwh: 0.05,
            hours: 24.0,
            eta_default: 1.0,
        }
    }
}

pub const UNIT_NOTE: &str = "hash rate in millions of TH/s; costs in dollars per million TH/s per day; \
reward in dollars per day; gamma in dollars per (million TH/s)^2 per day";

impl CalibrationSpec {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("reward_per_day", self.reward_per_day),
            ("network_hash", self.network_hash),
            ("efficiency_j_per_th", self.efficiency_j_per_th),
            ("electricity_per_kwh", self.electricity_per_kwh),
            ("hours", self.hours),
            ("eta_default", self.eta_default),
        ];
        for (field, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(field, format!("must be positive, got {v}")));
            }
        }
        if self.miner_count < 2 {
            return Err(Error::invalid("miner_count", format!("must be at least 2, got {}", self.miner_count)));
        }
        Ok(())
    }

    /// Electricity cost of the most efficient hardware per million TH/s per day.
    pub fn lowest_cost(&self) -> f64 {
        // J/TH at 1 TH/s is W; /1000 gives kW.
        self.efficiency_j_per_th / 1000.0 * self.electricity_per_kwh * self.hours * 1e6
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CalibratedModel {
    #[serde(skip)]
    pub pop: MinerPopulation,
    pub params: GameParams,
    pub implied_gamma: f64,
    pub unit_note: String,
    pub instance: ModelInstance,
}

/// Evenly spaced costs from the frontier electricity cost up to break-even R/H, with γ
/// chosen so that all `N` miners reproduce the target network hash rate.
pub fn calibrate(spec: &CalibrationSpec) -> Result<CalibratedModel> {
    spec.validate()?;
    let n = spec.miner_count;
    let r = spec.reward_per_day;
    let h = spec.network_hash;
    let first = spec.lowest_cost();
    let last = r / h;
    let costs: Vec<f64> = (0..n)
        .map(|i| first + (last - first) * i as f64 / (n - 1) as f64)
        .collect();
    let cost_sum: f64 = costs.iter().sum();
    let implied_gamma = ((n - 1) as f64 * r / h - cost_sum) / h;
    if implied_gamma.is_nan() || implied_gamma < 0.0 {
        return Err(Error::InconsistentCalibration(implied_gamma));
    }
    let params = GameParams::quadratic(r, implied_gamma)?;
    let pop = MinerPopulation::new(costs.clone(), first, spec.eta_default)?;
    let instance = ModelInstance {
        initial_costs: costs,
        frontier_cost: Some(first),
        eta: Some(spec.eta_default),
        reward: r,
        gamma: implied_gamma,
        entry_cost: 0.0,
        delta: 1.0,
    };
    Ok(CalibratedModel {
        pop,
        params,
        implied_gamma,
        unit_note: UNIT_NOTE.to_string(),
        instance,
    })
}

/// Piecewise-linear curve through knots with strictly increasing x.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CurvePoints {
    pub knots: Vec<(f64, f64)>,
}

impl CurvePoints {
    /// Linear interpolation, constant beyond the end knots.
    pub fn eval(&self, x: f64) -> f64 {
        let k = &self.knots;
        if x <= k[0].0 {
            return k[0].1;
        }
        if x >= k[k.len() - 1].0 {
            return k[k.len() - 1].1;
        }
        let j = k.partition_point(|p| p.0 <= x);
        let (x0, y0) = k[j - 1];
        let (x1, y1) = k[j];
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y\n");
        for (x, y) in &self.knots {
            out.push_str(&format!("{x},{y}\n"));
        }
        out
    }
}

/// Cumulative hash-rate share of the k largest miners, k = 0..=n.
pub fn concentration_curve(eq: &MiningEquilibrium) -> CurvePoints {
    let mut knots = vec![(0.0, 0.0)];
    let mut acc = 0.0;
    for k in 0..eq.active_count {
        acc += eq.shares[k];
        knots.push(((k + 1) as f64, acc));
    }
    CurvePoints { knots }
}

/// Per-period spending needed to run the largest miners' combined share p.
pub fn attack_cost_curve(eq: &MiningEquilibrium, costs: &[f64], params: &GameParams) -> CurvePoints {
    let mut knots = vec![(0.0, 0.0)];
    let (mut p, mut spend) = (0.0, 0.0);
    for ((&h, &s), &c) in eq.rates.iter().zip(&eq.shares).zip(costs).take(eq.active_count) {
        p += s;
        spend += c * h + params.capacity_cost(h);
        knots.push((p, spend));
    }
    CurvePoints { knots }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub multiplier: f64,
    pub equilibrium: MiningEquilibrium,
    pub concentration: CurvePoints,
    pub attack_cost: CurvePoints,
}

/// Re-solves the model with the reward scaled by each multiplier.
pub fn reward_sweep(costs: &[f64], params: &GameParams, multipliers: &[f64]) -> Result<Vec<SweepPoint>> {
    for &m in multipliers {
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::invalid("reward_mult", format!("multipliers must be positive, got {m}")));
        }
    }
    multipliers
        .par_iter()
        .map(|&m| {
            let p = params.with_reward(params.reward * m);
            let eq = solve(costs, &p)?;
            Ok(SweepPoint {
                multiplier: m,
                concentration: concentration_curve(&eq),
                attack_cost: attack_cost_curve(&eq, costs, &p),
                equilibrium: eq,
            })
        })
        .collect()
}
