//! Hardware investment stage: equilibrium upgrade levels, entry, and first-order expansions.

use serde::Serialize;

use crate::equilibrium::{solve, MiningEquilibrium};
use crate::error::{Error, Result};
use crate::model::{effective_cost_unchecked, GameParams, InvestmentProfile, MinerPopulation};
use crate::tol;

/// Upgrade level minimising c_i(β) on [0, 1]: min{1/η, 1}.
pub fn optimal_level(eta: f64) -> f64 {
    if eta > 1.0 {
        1.0 / eta
    } else {
        1.0
    }
}

/// Cost reduction c_i(0) − c_i(β*) of miner `i` (sorted position) when it upgrades.
pub fn cost_reduction(pop: &MinerPopulation, i: usize) -> Result<f64> {
    if i >= pop.len() {
        return Err(Error::IndexOutOfRange { index: i, len: pop.len() });
    }
    let gap = pop.gap(i);
    let eta = pop.adjustment_scale();
    Ok(if eta > 1.0 { gap / (2.0 * eta) } else { (1.0 - eta / 2.0) * gap })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinerCoefficients {
    pub a_own: f64,
    pub a_others: f64,
    pub alpha: f64,
    pub b_own: f64,
    pub b_others: f64,
}

/// First-order predictions of the post-investment equilibrium around the pre-investment one.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproxExpansion {
    /// False when investment changes the set of miners the expansion is taken over.
    pub valid: bool,
    /// Miners in the expansion: the active ones plus any sitting exactly at break-even.
    pub expansion_count: usize,
    /// H ≈ H₀(1 + a Ī).
    pub aggregate_coeff: f64,
    pub share_scale: f64,
    pub miners: Vec<MinerCoefficients>,
    /// Only present when expansion costs are homogeneous.
    pub welfare_coeff: Option<f64>,
    pub aggregate: f64,
    pub rates: Vec<f64>,
    pub shares: Vec<f64>,
    pub profits: Vec<f64>,
    pub total_profit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvestmentOutcome {
    pub beta_star: InvestmentProfile,
    pub pre_active_count: usize,
    pub invested_count: usize,
    pub entrant_count: usize,
    pub cost_reductions: Vec<f64>,
    pub total_reduction: f64,
    pub pre_costs: Vec<f64>,
    pub post_costs: Vec<f64>,
    pub pre: MiningEquilibrium,
    pub exact_post: MiningEquilibrium,
    pub approx: ApproxExpansion,
}

impl InvestmentOutcome {
    /// Ī − I_i.
    pub fn others_reduction(&self, i: usize) -> f64 {
        self.total_reduction - self.cost_reductions[i]
    }

    pub fn share_changes(&self) -> Vec<f64> {
        diff(&self.exact_post.shares, &self.pre.shares)
    }

    pub fn profit_changes(&self) -> Vec<f64> {
        diff(&self.exact_post.profits, &self.pre.profits)
    }

    /// (π_i(β*) − π_i(0)) / h_i(0) for miners active before investment.
    pub fn profit_changes_per_hash(&self) -> Vec<f64> {
        (0..self.pre.active_count)
            .map(|i| (self.exact_post.profits[i] - self.pre.profits[i]) / self.pre.rates[i])
            .collect()
    }

    pub fn welfare_change(&self) -> f64 {
        self.exact_post.total_profit() - self.pre.total_profit()
    }
}

fn diff(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Equilibrium investment and the induced mining equilibrium.
///
/// Upgrading miners are the cheapest `k` for the largest admissible `k ≥ |A(0)|`: miner
/// `k` must be active after everyone up to it upgrades, and a newcomer must earn gross
/// profit strictly above the entry cost.
pub fn equilibrium_investment(pop: &MinerPopulation, params: &GameParams) -> Result<InvestmentOutcome> {
    if pop.len() < 2 {
        return Err(Error::TooFewMiners(pop.len()));
    }
    if !params.is_quadratic() {
        return Err(Error::invalid("delta", "the investment stage requires delta = 1"));
    }
    let pre_costs = pop.initial_costs().to_vec();
    let pre = solve(&pre_costs, params)?;
    let level = optimal_level(pop.adjustment_scale());
    let upgraded: Vec<f64> = (0..pop.len()).map(|j| effective_cost_unchecked(pop, j, level)).collect();
    let costs_with = |k: usize| -> Vec<f64> {
        (0..pop.len()).map(|j| if j < k { upgraded[j] } else { pre_costs[j] }).collect()
    };

    let a0 = pre.active_count;
    let mut chosen = (a0, solve(&costs_with(a0), params)?);
    for k in a0 + 1..=pop.len() {
        let eq = solve(&costs_with(k), params)?;
        if eq.is_active(k - 1) && eq.profits[k - 1] > params.entry_cost {
            chosen = (k, eq);
        }
    }
    let (invested_count, exact_post) = chosen;

    let levels: Vec<f64> = (0..pop.len()).map(|j| if j < invested_count { level } else { 0.0 }).collect();
    let cost_reductions: Vec<f64> = (0..pop.len())
        .map(|j| if j < invested_count { cost_reduction(pop, j) } else { Ok(0.0) })
        .collect::<Result<_>>()?;
    let total_reduction = cost_reductions.iter().sum();
    let post_costs = costs_with(invested_count);

    let mut approx = first_order_predictions(&pre, &pre_costs, params, &cost_reductions)?;
    approx.valid = exact_post.active_count == approx.expansion_count && invested_count == approx.expansion_count;

    Ok(InvestmentOutcome {
        beta_star: InvestmentProfile { levels },
        pre_active_count: a0,
        invested_count,
        entrant_count: invested_count - a0,
        cost_reductions,
        total_reduction,
        pre_costs,
        post_costs,
        pre,
        exact_post,
        approx,
    })
}

/// Number of miners the expansion runs over: the active ones plus any inactive miner whose
/// cost equals the pre-investment break-even level.
fn expansion_count(pre: &MiningEquilibrium, costs: &[f64]) -> usize {
    let mut m = pre.active_count;
    while m < costs.len() && (costs[m] - pre.break_even).abs() <= tol::BREAK_EVEN_MEMBER_RTOL * pre.break_even {
        m += 1;
    }
    m
}

/// First-order expansion of the equilibrium in the cost reductions.
pub fn first_order_predictions(
    pre: &MiningEquilibrium,
    costs: &[f64],
    params: &GameParams,
    reductions: &[f64],
) -> Result<ApproxExpansion> {
    if reductions.len() != costs.len() || pre.rates.len() != costs.len() {
        return Err(Error::invalid("reductions", "length does not match the population"));
    }
    let m = expansion_count(pre, costs);
    let r = params.reward;
    let gamma = params.capacity_coeff;
    let h0 = pre.aggregate;
    let csum: f64 = costs[..m].iter().sum();
    let d0 = csum + 2.0 * gamma * h0;
    let q0 = r + gamma * h0 * h0;
    let total: f64 = reductions[..m].iter().sum();

    let aggregate_coeff = 1.0 / d0;
    let share_scale = h0 / q0;
    let rho = r / q0;

    let miners: Vec<MinerCoefficients> = (0..m)
        .map(|i| {
            let (c, h) = (costs[i], pre.rates[i]);
            let w = c + 2.0 * gamma * h;
            let a_others = (h - h0 * h0 / q0 * w) / d0;
            let alpha = w / d0;
            let b_others = -alpha * (rho + (c + gamma * h) / w);
            MinerCoefficients {
                a_own: h0 * h0 / q0 + a_others,
                a_others,
                alpha,
                b_own: 1.0 + rho + b_others,
                b_others,
            }
        })
        .collect();

    let n = costs.len();
    let mut rates = pre.rates.clone();
    let mut shares = pre.shares.clone();
    let mut profits = pre.profits.clone();
    for (i, k) in miners.iter().enumerate() {
        let own = reductions[i];
        let others = total - own;
        rates[i] += k.a_own * own + k.a_others * others;
        shares[i] += share_scale * ((1.0 - k.alpha) * own - k.alpha * others);
        profits[i] += pre.rates[i] * (k.b_own * own + k.b_others * others);
    }
    for i in m..n {
        rates[i] = 0.0;
        shares[i] = 0.0;
        profits[i] = 0.0;
    }

    let (lo, hi) = costs[..m]
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &c| (lo.min(c), hi.max(c)));
    let welfare_coeff = (hi - lo <= 1e-12 * hi).then(|| (1.0 - (csum + gamma * h0) / d0) / m as f64);

    Ok(ApproxExpansion {
        valid: true,
        expansion_count: m,
        aggregate_coeff,
        share_scale,
        miners,
        welfare_coeff,
        aggregate: h0 * (1.0 + aggregate_coeff * total),
        total_profit: profits.iter().sum(),
        rates,
        shares,
        profits,
    })
}

/// Errors of the first-order predictions against the exact post-investment equilibrium.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationErrors {
    pub aggregate: f64,
    /// Per-miner relative errors over the expansion set.
    pub rates: Vec<f64>,
    pub shares: Vec<f64>,
    pub profits: Vec<f64>,
    /// Max absolute error divided by max absolute exact value, per quantity.
    pub rates_family: f64,
    pub shares_family: f64,
    pub profits_family: f64,
}

pub fn approximation_error(outcome: &InvestmentOutcome) -> ApproximationErrors {
    let m = outcome.approx.expansion_count;
    let exact = &outcome.exact_post;
    let approx = &outcome.approx;
    let rel = |a: f64, e: f64| (a - e).abs() / e.abs().max(tol::REL_ERR_FLOOR);
    let per_miner = |a: &[f64], e: &[f64]| (0..m).map(|i| rel(a[i], e[i])).collect::<Vec<_>>();
    let family = |a: &[f64], e: &[f64]| {
        let err = (0..m).map(|i| (a[i] - e[i]).abs()).fold(0.0, f64::max);
        let scale = (0..m).map(|i| e[i].abs()).fold(0.0, f64::max);
        err / scale.max(tol::REL_ERR_FLOOR)
    };
    ApproximationErrors {
        aggregate: rel(approx.aggregate, exact.aggregate),
        rates: per_miner(&approx.rates, &exact.rates),
        shares: per_miner(&approx.shares, &exact.shares),
        profits: per_miner(&approx.profits, &exact.profits),
        rates_family: family(&approx.rates, &exact.rates),
        shares_family: family(&approx.shares, &exact.shares),
        profits_family: family(&approx.profits, &exact.profits),
    }
}
