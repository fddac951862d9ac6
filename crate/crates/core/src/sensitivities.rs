//! Closed-form comparative statics of the mining equilibrium and their validation.

use serde::Serialize;

use crate::equilibrium::{active_count_unchecked, check_costs, solve, MiningEquilibrium};
use crate::error::{Error, Result};
use crate::model::GameParams;
use crate::tol;

/// Partials of the aggregate hash rate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregatePartials {
    /// ∂H/∂c_i for each active miner.
    pub cost: Vec<f64>,
    pub gamma: f64,
    pub reward: f64,
}

/// Partials for one active miner. `*_direct` holds the aggregate fixed; `*_indirect`
/// acts through the aggregate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinerPartials {
    pub index: usize,
    pub share: f64,
    pub rate_own_direct: f64,
    pub rate_own_indirect: f64,
    pub rate_own: f64,
    pub rate_cross: f64,
    pub rate_gamma_direct: f64,
    pub rate_gamma_indirect: f64,
    pub rate_gamma: f64,
    pub rate_reward_direct: f64,
    pub rate_reward_indirect: f64,
    pub rate_reward: f64,
    pub share_own_direct: f64,
    pub share_own_indirect: f64,
    pub share_own: f64,
    pub share_cross: f64,
    pub share_gamma: f64,
    pub share_reward: f64,
    pub profit_own: f64,
    pub profit_cross: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SensitivityReport {
    #[serde(rename = "n")]
    pub active_count: usize,
    pub aggregate: AggregatePartials,
    pub miners: Vec<MinerPartials>,
}

/// Refuses states where a relative nudge of any cost, of γ or of R changes the active count.
pub fn check_interior(costs: &[f64], params: &GameParams) -> Result<()> {
    check_costs(costs)?;
    params.validate()?;
    let n = active_count_unchecked(costs, params);
    let eps = tol::BOUNDARY_PROBE;
    for j in 0..costs.len() {
        for sign in [-1.0, 1.0] {
            let mut probe = costs.to_vec();
            probe[j] *= 1.0 + sign * eps;
            probe.sort_by(f64::total_cmp);
            if active_count_unchecked(&probe, params) != n {
                return Err(Error::BoundaryState { parameter: format!("cost[{j}]") });
            }
        }
    }
    for sign in [-1.0, 1.0] {
        let r = params.with_reward(params.reward * (1.0 + sign * eps));
        if active_count_unchecked(costs, &r) != n {
            return Err(Error::BoundaryState { parameter: "reward".into() });
        }
        let g = params.capacity_coeff;
        let nudged = if g > 0.0 { g * (1.0 + sign * eps) } else { (sign * eps).max(0.0) };
        if active_count_unchecked(costs, &params.with_capacity_coeff(nudged)) != n {
            return Err(Error::BoundaryState { parameter: "gamma".into() });
        }
    }
    Ok(())
}

/// Closed-form partials at an interior equilibrium with quadratic capacity cost.
pub fn analytic_sensitivities(eq: &MiningEquilibrium, costs: &[f64], params: &GameParams) -> Result<SensitivityReport> {
    if !params.is_quadratic() {
        return Err(Error::invalid("delta", "closed-form sensitivities require delta = 1"));
    }
    if eq.rates.len() != costs.len() {
        return Err(Error::invalid("costs", "length does not match the equilibrium"));
    }
    check_interior(costs, params)?;

    let n = eq.active_count;
    let r = params.reward;
    let gamma = params.capacity_coeff;
    let g = eq.aggregate;
    let csum: f64 = costs[..n].iter().sum();
    let d = csum + 2.0 * gamma * g;
    let q = r + gamma * g * g;
    let nm1 = (n - 1) as f64;

    let aggregate = AggregatePartials {
        cost: vec![-g / d; n],
        gamma: -g * g / d,
        reward: nm1 / d,
    };

    let miners = (0..n)
        .map(|i| {
            let c = costs[i];
            let f = eq.rates[i];
            let mc = c + gamma * f;
            let excess = r / g - 2.0 * mc;
            let df_dg = g / q * excess;

            let rate_own_direct = -g * g / q;
            let rate_own_indirect = df_dg * (-g / d);
            let rate_own = -g * g / q * (1.0 + excess / d);

            let rate_gamma_direct = -g * g * g * (r - c * g) / (q * q);
            let rate_gamma_indirect = df_dg * (-g * g / d);
            let rate_gamma = -f * g * g / q * (1.0 + g / f * excess / d);

            let rate_reward_direct = g * g * (c + gamma * g) / (q * q);
            let rate_reward_indirect = df_dg * nm1 / d;
            let rate_reward = g * g * mc / (r * q) * (1.0 + excess / mc * (csum + gamma * g) / d);

            let w = c + 2.0 * gamma * f;
            let share_own_direct = -g / q;
            let share_cross = g / q * w / d;
            let share_own = -g / q * (1.0 - w / d);
            let share_gamma = -(f * g - g * g / d * w) / q;
            let share_reward = (g / r * mc - nm1 * w / d) / q;

            let margin = r / g - c - gamma * f;
            let profit_own = f * (r / (g * d) - 1.0) + rate_own * margin;
            let profit_cross = f * r / (g * d) + rate_own_indirect * margin;

            MinerPartials {
                index: i,
                share: eq.shares[i],
                rate_own_direct,
                rate_own_indirect,
                rate_own,
                rate_cross: rate_own_indirect,
                rate_gamma_direct,
                rate_gamma_indirect,
                rate_gamma,
                rate_reward_direct,
                rate_reward_indirect,
                rate_reward,
                share_own_direct,
                share_own_indirect: share_cross,
                share_own,
                share_cross,
                share_gamma,
                share_reward,
                profit_own,
                profit_cross,
            }
        })
        .collect();

    Ok(SensitivityReport {
        active_count: n,
        aggregate,
        miners,
    })
}

/// Solves and differentiates in one call.
pub fn sensitivities(costs: &[f64], params: &GameParams) -> Result<SensitivityReport> {
    let eq = solve(costs, params)?;
    analytic_sensitivities(&eq, costs, params)
}

/// True iff the share partials in γ and in R are non-decreasing across active miners.
pub fn share_monotonicity_check(eq: &MiningEquilibrium, report: &SensitivityReport) -> bool {
    if eq.active_count < 2 {
        return false;
    }
    // Slack in each quantity's natural unit; ∂s/∂R vanishes identically at γ = 0.
    let reward = eq.break_even * eq.aggregate;
    let ok = |values: Vec<f64>, unit: f64| {
        values.windows(2).all(|w| {
            let scale = w[0].abs().max(w[1].abs()).max(unit);
            w[1] >= w[0] - 1e-12 * scale
        })
    };
    ok(report.miners.iter().map(|m| m.share_gamma).collect(), eq.aggregate * eq.aggregate / reward)
        && ok(report.miners.iter().map(|m| m.share_reward).collect(), 1.0 / reward)
}

/// Sign claims that are proven for every interior state. Returns the violated ones.
pub fn sign_violations(report: &SensitivityReport) -> Vec<String> {
    let mut out = Vec::new();
    let mut claim = |holds: bool, what: String| {
        if !holds {
            out.push(what);
        }
    };
    for (i, &v) in report.aggregate.cost.iter().enumerate() {
        claim(v < 0.0, format!("dH/dc[{i}] < 0"));
    }
    claim(report.aggregate.gamma < 0.0, "dH/dgamma < 0".into());
    claim(report.aggregate.reward > 0.0, "dH/dR > 0".into());
    for m in &report.miners {
        let i = m.index;
        let half = m.share - 0.5;
        let decided = half.abs() > 1e-12;
        claim(m.rate_own < 0.0, format!("dh[{i}]/dc[{i}] < 0"));
        claim(m.rate_own_direct < 0.0, format!("direct dh[{i}]/dc[{i}] < 0"));
        claim(!decided || (m.rate_cross > 0.0) == (half < 0.0), format!("dh[{i}]/dc_j > 0 iff share < 1/2"));
        claim(m.rate_gamma_direct < 0.0, format!("direct dh[{i}]/dgamma < 0"));
        claim(
            !decided || (m.rate_gamma_indirect > 0.0) == (half < 0.0),
            format!("indirect dh[{i}]/dgamma > 0 iff share < 1/2"),
        );
        claim(m.rate_reward > 0.0, format!("dh[{i}]/dR > 0"));
        claim(m.rate_reward_direct > 0.0, format!("direct dh[{i}]/dR > 0"));
        claim(
            !decided || (m.rate_reward_indirect < 0.0) == (half < 0.0),
            format!("indirect dh[{i}]/dR < 0 iff share < 1/2"),
        );
        claim(m.share_own < 0.0, format!("ds[{i}]/dc[{i}] < 0"));
        claim(m.share_cross > 0.0, format!("ds[{i}]/dc_j > 0"));
        claim(m.profit_own < 0.0, format!("dpi[{i}]/dc[{i}] < 0"));
        claim(m.profit_cross > 0.0, format!("dpi[{i}]/dc_j > 0"));
    }
    out
}

/// Outcome of comparing analytic partials with finite differences.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FdCheck {
    pub max_rel_error: f64,
    pub worst: String,
    pub compared: usize,
}

/// Observables of an equilibrium: H, then h, shares and profits of the first `n` miners.
struct Observables {
    n: usize,
    values: Vec<f64>,
}

fn observe(costs: &[f64], params: &GameParams, n: usize) -> Result<Observables> {
    // Costs may be out of order after a perturbation; solve sorted and map back.
    let mut idx: Vec<usize> = (0..costs.len()).collect();
    idx.sort_by(|&a, &b| costs[a].total_cmp(&costs[b]));
    let sorted: Vec<f64> = idx.iter().map(|&k| costs[k]).collect();
    let eq = solve(&sorted, params)?;
    let mut rates = vec![0.0; costs.len()];
    let mut shares = vec![0.0; costs.len()];
    let mut profits = vec![0.0; costs.len()];
    for (pos, &orig) in idx.iter().enumerate() {
        rates[orig] = eq.rates[pos];
        shares[orig] = eq.shares[pos];
        profits[orig] = eq.profits[pos];
    }
    let mut values = Vec::with_capacity(1 + 3 * n);
    values.push(eq.aggregate);
    values.extend_from_slice(&rates[..n]);
    values.extend_from_slice(&shares[..n]);
    values.extend_from_slice(&profits[..n]);
    Ok(Observables {
        n: eq.active_count,
        values,
    })
}

/// Richardson-extrapolated derivative of the observables along one parameter.
fn richardson<F>(x: f64, step: f64, n: usize, parameter: &str, eval: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Observables>,
{
    let mut h = step;
    for _ in 0..4 {
        let central = x - h >= 0.0;
        let attempt = if central {
            let d = |h: f64| -> Result<Option<Vec<f64>>> {
                let (up, down) = (eval(x + h)?, eval(x - h)?);
                if up.n != n || down.n != n {
                    return Ok(None);
                }
                Ok(Some(up.values.iter().zip(&down.values).map(|(a, b)| (a - b) / (2.0 * h)).collect()))
            };
            match (d(h)?, d(h / 2.0)?) {
                (Some(full), Some(half)) => Some(full.iter().zip(&half).map(|(a, b)| (4.0 * b - a) / 3.0).collect()),
                _ => None,
            }
        } else {
            let base = eval(x)?;
            let d = |h: f64| -> Result<Option<Vec<f64>>> {
                let up = eval(x + h)?;
                if up.n != n {
                    return Ok(None);
                }
                Ok(Some(up.values.iter().zip(&base.values).map(|(a, b)| (a - b) / h).collect()))
            };
            match (d(h)?, d(h / 2.0)?) {
                (Some(full), Some(half)) => Some(full.iter().zip(&half).map(|(a, b)| 2.0 * b - a).collect()),
                _ => None,
            }
        };
        if let Some(v) = attempt {
            return Ok(v);
        }
        h /= 10.0;
    }
    Err(Error::StencilCrossing {
        parameter: parameter.to_string(),
    })
}

/// Largest relative gap between analytic partials and Richardson central differences.
///
/// The step for parameter x is `step_scale · max(|x|, 1)`; γ falls back to a forward
/// stencil when it is closer to zero than the step.
pub fn finite_difference_check(costs: &[f64], params: &GameParams, step_scale: f64) -> Result<FdCheck> {
    if !(step_scale.is_finite() && step_scale > 0.0) {
        return Err(Error::invalid("step_scale", format!("must be positive, got {step_scale}")));
    }
    let eq = solve(costs, params)?;
    let report = analytic_sensitivities(&eq, costs, params)?;
    let n = eq.active_count;
    let step_for = |x: f64| step_scale * x.abs().max(1.0);

    let mut check = FdCheck {
        max_rel_error: 0.0,
        worst: String::new(),
        compared: 0,
    };
    let mut compare = |analytic: f64, fd: f64, label: String| {
        let err = (analytic - fd).abs() / analytic.abs().max(tol::REL_ERR_FLOOR);
        check.compared += 1;
        if err > check.max_rel_error || check.worst.is_empty() {
            check.max_rel_error = err;
            check.worst = label;
        }
    };

    for j in 0..n {
        let fd = richardson(costs[j], step_for(costs[j]), n, &format!("cost[{j}]"), |x| {
            let mut c = costs.to_vec();
            c[j] = x;
            observe(&c, params, n)
        })?;
        compare(report.aggregate.cost[j], fd[0], format!("dH/dc[{j}]"));
        for (i, m) in report.miners.iter().enumerate() {
            let (rate, share, profit) = if i == j {
                (m.rate_own, m.share_own, m.profit_own)
            } else {
                (m.rate_cross, m.share_cross, m.profit_cross)
            };
            compare(rate, fd[1 + i], format!("dh[{i}]/dc[{j}]"));
            compare(share, fd[1 + n + i], format!("ds[{i}]/dc[{j}]"));
            compare(profit, fd[1 + 2 * n + i], format!("dpi[{i}]/dc[{j}]"));
        }
    }

    let gamma = params.capacity_coeff;
    let fd = richardson(gamma, step_for(gamma), n, "gamma", |x| {
        observe(costs, &params.with_capacity_coeff(x), n)
    })?;
    compare(report.aggregate.gamma, fd[0], "dH/dgamma".into());
    for (i, m) in report.miners.iter().enumerate() {
        compare(m.rate_gamma, fd[1 + i], format!("dh[{i}]/dgamma"));
        compare(m.share_gamma, fd[1 + n + i], format!("ds[{i}]/dgamma"));
    }

    let r = params.reward;
    let fd = richardson(r, step_for(r), n, "reward", |x| observe(costs, &params.with_reward(x), n))?;
    compare(report.aggregate.reward, fd[0], "dH/dR".into());
    for (i, m) in report.miners.iter().enumerate() {
        compare(m.rate_reward, fd[1 + i], format!("dh[{i}]/dR"));
        // Shares do not depend on R at all when γ = 0.
        if gamma > 0.0 {
            compare(m.share_reward, fd[1 + n + i], format!("ds[{i}]/dR"));
        }
    }

    Ok(check)
}
