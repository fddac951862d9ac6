//! Exogenous data of the game and the primitive cost and payoff functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// The miner universe: initial costs-per-hash, frontier cost and adjustment-cost scale.
///
/// Costs are stored sorted non-decreasing. `order[k]` is the caller index of the
/// miner at sorted position `k`; ties keep their input order.
#[derive(Debug, Clone, PartialEq)]
pub struct MinerPopulation {
    initial_costs: Vec<f64>,
    order: Vec<usize>,
    frontier_cost: f64,
    adjustment_scale: f64,
}

impl MinerPopulation {
    pub fn new(initial_costs: Vec<f64>, frontier_cost: f64, adjustment_scale: f64) -> Result<Self> {
        if initial_costs.is_empty() {
            return Err(Error::invalid("initial_costs", "must not be empty"));
        }
        for (i, &c) in initial_costs.iter().enumerate() {
            if !(c.is_finite() && c > 0.0) {
                return Err(Error::invalid(
                    "initial_costs",
                    format!("entry {i} must be positive and finite, got {c}"),
                ));
            }
        }
        if !(frontier_cost.is_finite() && frontier_cost > 0.0) {
            return Err(Error::invalid("frontier_cost", format!("must be positive, got {frontier_cost}")));
        }
        if !(adjustment_scale.is_finite() && adjustment_scale >= 0.0) {
            return Err(Error::invalid("eta", format!("must be non-negative, got {adjustment_scale}")));
        }
        let mut order: Vec<usize> = (0..initial_costs.len()).collect();
        order.sort_by(|&a, &b| initial_costs[a].total_cmp(&initial_costs[b]));
        let sorted: Vec<f64> = order.iter().map(|&k| initial_costs[k]).collect();
        if frontier_cost > sorted[0] {
            return Err(Error::invalid(
                "frontier_cost",
                format!("{frontier_cost} exceeds the smallest initial cost {}", sorted[0]),
            ));
        }
        Ok(Self {
            initial_costs: sorted,
            order,
            frontier_cost,
            adjustment_scale,
        })
    }

    /// Sorted initial costs.
    pub fn initial_costs(&self) -> &[f64] {
        &self.initial_costs
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn frontier_cost(&self) -> f64 {
        self.frontier_cost
    }

    pub fn adjustment_scale(&self) -> f64 {
        self.adjustment_scale
    }

    pub fn len(&self) -> usize {
        self.initial_costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.initial_costs.is_empty()
    }

    /// Efficiency gap c̃_i − c̃_0 of the miner at sorted position `i`.
    pub fn gap(&self, i: usize) -> f64 {
        self.initial_costs[i] - self.frontier_cost
    }

    /// Miner-specific adjustment cost η_i = η (c̃_i − c̃_0).
    pub fn miner_adjustment(&self, i: usize) -> f64 {
        self.adjustment_scale * self.gap(i)
    }

    pub fn with_adjustment_scale(&self, eta: f64) -> Result<Self> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(Error::invalid("eta", format!("must be non-negative, got {eta}")));
        }
        Ok(Self {
            adjustment_scale: eta,
            ..self.clone()
        })
    }

    /// Reorders a per-miner vector from sorted order back to caller order.
    pub fn to_caller_order<T: Clone>(&self, sorted: &[T]) -> Vec<T> {
        let mut out = sorted.to_vec();
        for (k, &orig) in self.order.iter().enumerate() {
            out[orig] = sorted[k].clone();
        }
        out
    }
}

/// Reward, capacity coefficient, entry cost and capacity-cost exponent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GameParams {
    pub reward: f64,
    pub capacity_coeff: f64,
    pub entry_cost: f64,
    pub cost_exponent: f64,
}

impl GameParams {
    pub fn new(reward: f64, capacity_coeff: f64, entry_cost: f64, cost_exponent: f64) -> Result<Self> {
        let p = Self {
            reward,
            capacity_coeff,
            entry_cost,
            cost_exponent,
        };
        p.validate()?;
        Ok(p)
    }

    /// Quadratic capacity cost and no entry cost.
    pub fn quadratic(reward: f64, capacity_coeff: f64) -> Result<Self> {
        Self::new(reward, capacity_coeff, 0.0, 1.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.reward.is_finite() && self.reward > 0.0) {
            return Err(Error::invalid("reward", format!("must be positive, got {}", self.reward)));
        }
        if !(self.capacity_coeff.is_finite() && self.capacity_coeff >= 0.0) {
            return Err(Error::invalid("gamma", format!("must be non-negative, got {}", self.capacity_coeff)));
        }
        if !(self.entry_cost.is_finite() && self.entry_cost >= 0.0) {
            return Err(Error::invalid("entry_cost", format!("must be non-negative, got {}", self.entry_cost)));
        }
        if !(self.cost_exponent.is_finite() && self.cost_exponent > 0.0) {
            return Err(Error::invalid("delta", format!("must be positive, got {}", self.cost_exponent)));
        }
        Ok(())
    }

    pub fn is_quadratic(&self) -> bool {
        self.cost_exponent == 1.0
    }

    pub fn with_reward(self, reward: f64) -> Self {
        Self { reward, ..self }
    }

    pub fn with_capacity_coeff(self, capacity_coeff: f64) -> Self {
        Self { capacity_coeff, ..self }
    }

    /// Capacity cost γ/(1+δ)·h^{1+δ}.
    pub fn capacity_cost(&self, h: f64) -> f64 {
        if self.is_quadratic() {
            0.5 * self.capacity_coeff * h * h
        } else {
            generalized_capacity_cost(self.capacity_coeff, self.cost_exponent, h)
        }
    }

    /// Marginal capacity cost γ·h^δ.
    pub fn marginal_capacity_cost(&self, h: f64) -> f64 {
        if self.is_quadratic() {
            self.capacity_coeff * h
        } else {
            self.capacity_coeff * h.powf(self.cost_exponent)
        }
    }
}

pub fn generalized_capacity_cost(gamma: f64, delta: f64, h: f64) -> f64 {
    gamma / (1.0 + delta) * h.powf(1.0 + delta)
}

/// Investment levels β_i in [0, 1], in sorted miner order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvestmentProfile {
    pub levels: Vec<f64>,
}

impl InvestmentProfile {
    pub fn new(levels: Vec<f64>) -> Result<Self> {
        for (i, &b) in levels.iter().enumerate() {
            if !(0.0..=1.0).contains(&b) {
                return Err(Error::invalid("beta", format!("entry {i} must lie in [0,1], got {b}")));
            }
        }
        Ok(Self { levels })
    }

    pub fn zeros(n: usize) -> Self {
        Self { levels: vec![0.0; n] }
    }
}

/// Hash rates and their aggregate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HashProfile {
    pub rates: Vec<f64>,
    pub aggregate: f64,
}

impl HashProfile {
    pub fn new(rates: Vec<f64>) -> Result<Self> {
        for (i, &h) in rates.iter().enumerate() {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::invalid("rates", format!("entry {i} must be non-negative, got {h}")));
            }
        }
        let aggregate = rates.iter().sum();
        Ok(Self { rates, aggregate })
    }
}

/// Cost-per-hash after replacing a fraction `beta` of hardware:
/// c̃_i − β(c̃_i − c̃_0) + (η_i/2)β².
pub fn effective_cost(pop: &MinerPopulation, i: usize, beta: f64) -> Result<f64> {
    if i >= pop.len() {
        return Err(Error::IndexOutOfRange { index: i, len: pop.len() });
    }
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::invalid("beta", format!("must lie in [0,1], got {beta}")));
    }
    Ok(effective_cost_unchecked(pop, i, beta))
}

pub(crate) fn effective_cost_unchecked(pop: &MinerPopulation, i: usize, beta: f64) -> f64 {
    let gap = pop.gap(i);
    pop.initial_costs()[i] - beta * gap + 0.5 * pop.miner_adjustment(i) * beta * beta
}

/// Effective costs for a whole profile, in sorted order.
pub fn effective_costs(pop: &MinerPopulation, beta: &InvestmentProfile) -> Result<Vec<f64>> {
    if beta.levels.len() != pop.len() {
        return Err(Error::invalid(
            "beta",
            format!("length {} does not match {} miners", beta.levels.len(), pop.len()),
        ));
    }
    (0..pop.len()).map(|i| effective_cost(pop, i, beta.levels[i])).collect()
}

/// Mining-stage objective of miner `i`; zero when nobody hashes.
pub fn payoff(
    pop: &MinerPopulation,
    params: &GameParams,
    beta: &InvestmentProfile,
    h: &HashProfile,
    i: usize,
    entrant: bool,
) -> Result<f64> {
    if i >= pop.len() || i >= h.rates.len() || i >= beta.levels.len() {
        return Err(Error::IndexOutOfRange { index: i, len: pop.len() });
    }
    let c = effective_cost(pop, i, beta.levels[i])?;
    let entry = if entrant && beta.levels[i] > 0.0 { params.entry_cost } else { 0.0 };
    Ok(mining_profit(c, params, h.rates[i], h.aggregate) - entry)
}

/// (h/H)R − c·h − capacity cost, zero when H = 0.
pub fn mining_profit(cost: f64, params: &GameParams, h: f64, aggregate: f64) -> f64 {
    if aggregate <= 0.0 {
        return 0.0;
    }
    h / aggregate * params.reward - cost * h - params.capacity_cost(h)
}

/// Model instance as read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelInstance {
    pub initial_costs: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frontier_cost: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eta: Option<f64>,
    pub reward: f64,
    pub gamma: f64,
    #[serde(default)]
    pub entry_cost: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
}

fn default_delta() -> f64 {
    1.0
}

impl ModelInstance {
    pub fn params(&self) -> Result<GameParams> {
        GameParams::new(self.reward, self.gamma, self.entry_cost, self.delta)
    }

    /// Population with the frontier cost defaulting to the smallest initial cost and η to 0.
    pub fn population(&self) -> Result<MinerPopulation> {
        let frontier = match self.frontier_cost {
            Some(f) => f,
            None => self
                .initial_costs
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min),
        };
        MinerPopulation::new(self.initial_costs.clone(), frontier, self.eta.unwrap_or(0.0))
    }

    pub fn validate(&self) -> Result<()> {
        self.params()?;
        let pop = self.population()?;
        if pop.len() < 2 {
            return Err(Error::TooFewMiners(pop.len()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let inst: Self = serde_json::from_str(text).map_err(|e| Error::invalid("model", e.to_string()))?;
        inst.validate()?;
        Ok(inst)
    }
}
