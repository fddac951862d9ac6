//! Mining-stage Nash equilibrium: closed form, active set, and best-response oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{mining_profit, GameParams};
use crate::tol;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiningEquilibrium {
    #[serde(rename = "n")]
    pub active_count: usize,
    #[serde(rename = "H")]
    pub aggregate: f64,
    pub rates: Vec<f64>,
    pub shares: Vec<f64>,
    pub marginal_costs: Vec<f64>,
    /// Gross of any entry cost.
    pub profits: Vec<f64>,
    pub break_even: f64,
}

impl MiningEquilibrium {
    pub fn total_profit(&self) -> f64 {
        self.profits.iter().sum()
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.rates.get(i).is_some_and(|&h| h > 0.0)
    }

    /// Largest relative violation of R·H₋ᵢ/H² = c_i + γh_i^δ over active miners.
    pub fn first_order_residual(&self, costs: &[f64], params: &GameParams) -> f64 {
        let big_h = self.aggregate;
        self.rates
            .iter()
            .zip(costs)
            .filter(|(h, _)| **h > 0.0)
            .map(|(&h, &c)| {
                let gain = params.reward * (big_h - h) / (big_h * big_h);
                let cost = c + params.marginal_capacity_cost(h);
                (gain - cost).abs() / cost
            })
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BestResponse {
    pub rate: f64,
    /// Set when the opponents exert no hash rate, so no maximiser exists.
    pub degenerate: bool,
}

pub(crate) fn check_costs(costs: &[f64]) -> Result<()> {
    if costs.len() < 2 {
        return Err(Error::TooFewMiners(costs.len()));
    }
    for (i, &c) in costs.iter().enumerate() {
        if !(c.is_finite() && c > 0.0) {
            return Err(Error::invalid("costs", format!("entry {i} must be positive, got {c}")));
        }
    }
    if costs.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::invalid("costs", "must be sorted non-decreasing"));
    }
    Ok(())
}

/// Number of active miners: the largest n in 2..=N with c_n(n−1) < c^(n) + Rγ/c_n.
///
/// Near-equality within [`tol::BREAK_EVEN_RTOL`] counts as inactive. For δ ≠ 1 the
/// count comes from the numeric solver.
pub fn active_count(costs: &[f64], params: &GameParams) -> Result<usize> {
    check_costs(costs)?;
    params.validate()?;
    if !params.is_quadratic() {
        return Ok(solve_numeric(costs, params)?.active_count);
    }
    Ok(active_count_unchecked(costs, params))
}

pub(crate) fn active_count_unchecked(costs: &[f64], params: &GameParams) -> usize {
    let r_gamma = params.reward * params.capacity_coeff;
    let mut prefix = 0.0;
    let mut best = 2;
    for (k, &c) in costs.iter().enumerate() {
        prefix += c;
        let n = k + 1;
        if n < 2 {
            continue;
        }
        let lhs = c * (n - 1) as f64;
        let rhs = prefix + r_gamma / c;
        if lhs < rhs * (1.0 - tol::BREAK_EVEN_RTOL) {
            best = n;
        }
    }
    best
}

/// Aggregate hash rate for `n` active miners with summed cost `cost_sum`.
pub fn aggregate_hash(n: usize, cost_sum: f64, params: &GameParams) -> f64 {
    let nm1 = (n - 1) as f64;
    let r = params.reward;
    let g = params.capacity_coeff;
    if g == 0.0 {
        nm1 * r / cost_sum
    } else {
        let quad_discriminant_term = 4.0 * nm1 * r * g;
        2.0 * nm1 * r / ((cost_sum * cost_sum + quad_discriminant_term).sqrt() + cost_sum)
    }
}

/// Closed-form equilibrium; δ ≠ 1 is delegated to [`solve_numeric`].
pub fn solve(costs: &[f64], params: &GameParams) -> Result<MiningEquilibrium> {
    check_costs(costs)?;
    params.validate()?;
    if !params.is_quadratic() {
        return solve_numeric(costs, params);
    }
    let n = active_count_unchecked(costs, params);
    let cost_sum: f64 = costs[..n].iter().sum();
    let big_h = aggregate_hash(n, cost_sum, params);
    let r = params.reward;
    let denom = r + params.capacity_coeff * big_h * big_h;
    let rates: Vec<f64> = costs
        .iter()
        .enumerate()
        .map(|(i, &c)| if i < n { (big_h * (r - c * big_h) / denom).max(0.0) } else { 0.0 })
        .collect();
    Ok(assemble(costs, params, rates, big_h))
}

fn assemble(costs: &[f64], params: &GameParams, rates: Vec<f64>, big_h: f64) -> MiningEquilibrium {
    let shares = rates.iter().map(|h| h / big_h).collect();
    let marginal_costs = rates
        .iter()
        .zip(costs)
        .map(|(&h, &c)| c + params.marginal_capacity_cost(h))
        .collect();
    let profits = rates
        .iter()
        .zip(costs)
        .map(|(&h, &c)| mining_profit(c, params, h, big_h))
        .collect();
    MiningEquilibrium {
        active_count: rates.iter().filter(|&&h| h > 0.0).count(),
        aggregate: big_h,
        rates,
        shares,
        marginal_costs,
        profits,
        break_even: params.reward / big_h,
    }
}

/// Unique maximiser of miner `i`'s payoff given the opponents' aggregate `h_others`.
pub fn best_response(costs: &[f64], params: &GameParams, i: usize, h_others: f64) -> Result<BestResponse> {
    if i >= costs.len() {
        return Err(Error::IndexOutOfRange { index: i, len: costs.len() });
    }
    if !(h_others.is_finite() && h_others >= 0.0) {
        return Err(Error::invalid("h_others", format!("must be non-negative, got {h_others}")));
    }
    Ok(best_response_rate(costs[i], params, h_others))
}

pub(crate) fn best_response_rate(cost: f64, params: &GameParams, h_others: f64) -> BestResponse {
    if h_others <= 0.0 {
        return BestResponse { rate: 0.0, degenerate: true };
    }
    let r = params.reward;
    // Marginal gain minus marginal cost; strictly decreasing in h.
    let residual = |h: f64| r * h_others / ((h_others + h) * (h_others + h)) - cost - params.marginal_capacity_cost(h);
    if residual(0.0) <= 0.0 {
        return BestResponse { rate: 0.0, degenerate: false };
    }
    let mut lo = 0.0;
    let mut hi = r / cost;
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if residual(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    BestResponse {
        rate: 0.5 * (lo + hi),
        degenerate: false,
    }
}

/// Simultaneous best-response iteration; the only solver for δ ≠ 1.
///
/// Starts from h_i = R/(2N c_i) and halves the step length whenever consecutive sweeps
/// point in opposing directions. Rates shrink at most geometrically, so exits are gradual.
pub fn solve_numeric(costs: &[f64], params: &GameParams) -> Result<MiningEquilibrium> {
    check_costs(costs)?;
    params.validate()?;
    let n = costs.len();
    let r = params.reward;
    let mut h: Vec<f64> = costs.iter().map(|&c| r / (n as f64 * c * 2.0)).collect();
    let mut br = vec![0.0; n];
    let mut step = vec![0.0; n];
    let mut prev_step = vec![0.0; n];
    let mut damping: f64 = 1.0;
    let mut calm_sweeps = 0usize;
    let mut max_step = f64::INFINITY;
    let mut converged = false;

    for _ in 0..tol::MAX_SWEEPS {
        let total: f64 = h.iter().sum();
        let scale = h.iter().copied().fold(0.0, f64::max);
        for i in 0..n {
            let resp = best_response_rate(costs[i], params, (total - h[i]).max(0.0));
            // Alone in the market the payoff supremum is approached as h → 0⁺.
            br[i] = if resp.degenerate { 0.5 * h[i] } else { resp.rate };
            step[i] = br[i] - h[i];
        }
        // Per-component relative change, so small active miners converge as tightly as large ones.
        max_step = (0..n)
            .map(|i| {
                let size = h[i].max(br[i]);
                if size > 0.0 { step[i].abs() / size } else { 0.0 }
            })
            .fold(0.0, f64::max);
        if max_step < tol::FIXED_POINT_TOL {
            converged = true;
            break;
        }
        let dot: f64 = step.iter().zip(&prev_step).map(|(a, b)| a * b).sum();
        if dot < 0.0 {
            damping = (damping * 0.5).max(tol::MIN_DAMPING);
            calm_sweeps = 0;
        } else {
            calm_sweeps += 1;
            if calm_sweeps >= 20 {
                damping = (damping * 1.25).min(1.0);
                calm_sweeps = 0;
            }
        }
        for i in 0..n {
            // At most halve per sweep so a miner leaves only through the snap below.
            let next = (h[i] + damping * step[i]).max(0.5 * h[i]);
            h[i] = if br[i] == 0.0 && next < tol::FIXED_POINT_TOL * scale { 0.0 } else { next };
        }
        std::mem::swap(&mut prev_step, &mut step);
    }

    if !converged {
        return Err(Error::NonConvergence {
            sweeps: tol::MAX_SWEEPS,
            max_step,
            residuals: br.iter().zip(&h).map(|(b, x)| b - x).collect(),
            last_iterate: h,
        });
    }

    // Miners whose best response is zero at the fixed point are inactive.
    let total: f64 = h.iter().sum();
    for i in 0..n {
        if best_response_rate(costs[i], params, (total - h[i]).max(0.0)).rate == 0.0 {
            h[i] = 0.0;
        }
    }
    let big_h = h.iter().sum();
    Ok(assemble(costs, params, h, big_h))
}
