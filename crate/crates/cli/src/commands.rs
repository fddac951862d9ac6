use std::path::Path;

use powgame_core::empirics::{fit_loglog_dated, load_series, regression_returns, seven_day_average, Field};
use powgame_core::investment::{approximation_error, equilibrium_investment, optimal_level, ApproximationErrors};
use powgame_core::metrics::{attack_cost_curve, calibrate as run_calibration, concentration_curve, reward_sweep};
use powgame_core::sensitivities::{finite_difference_check, sensitivities, share_monotonicity_check, sign_violations};
use powgame_core::{
    solve, CalibratedModel, CalibrationSpec, CurvePoints, FdCheck, GameParams, MinerPopulation, MiningEquilibrium,
    ModelInstance, SensitivityReport,
};
use serde::Serialize;

use crate::output::{csv, json, Format};
use crate::{Emit, Overrides, Regressor};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] powgame_core::Error),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] ::csv::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Reads a model instance, or the `instance` member of a calibration report, and applies overrides.
fn load_model(path: Option<&Path>, o: &Overrides, reward_list: bool) -> Result<ModelInstance> {
    let path = path.ok_or_else(|| usage("--model is required"))?;
    let text = std::fs::read_to_string(path)?;
    let mut value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| usage(format!("invalid model: {e}")))?;
    if value.get("initial_costs").is_none() {
        if let Some(inner) = value.get_mut("instance") {
            value = inner.take();
        }
    }
    let mut inst: ModelInstance =
        serde_json::from_value(value).map_err(|e| usage(format!("invalid model: {e}")))?;
    if let Some(v) = o.eta {
        inst.eta = Some(v);
    }
    if let Some(v) = o.gamma {
        inst.gamma = v;
    }
    if let Some(v) = o.delta {
        inst.delta = v;
    }
    if let Some(v) = o.entry_cost {
        inst.entry_cost = v;
    }
    if !reward_list {
        match o.reward_mult.as_slice() {
            [] => {}
            [m] => inst.reward *= m,
            _ => return Err(usage("--reward-mult takes a single value here")),
        }
    }
    inst.validate()?;
    Ok(inst)
}

fn setup(inst: &ModelInstance) -> Result<(MinerPopulation, GameParams)> {
    Ok((inst.population()?, inst.params()?))
}

fn caller_order(pop: &MinerPopulation, eq: MiningEquilibrium) -> MiningEquilibrium {
    MiningEquilibrium {
        rates: pop.to_caller_order(&eq.rates),
        shares: pop.to_caller_order(&eq.shares),
        marginal_costs: pop.to_caller_order(&eq.marginal_costs),
        profits: pop.to_caller_order(&eq.profits),
        ..eq
    }
}

#[derive(Serialize)]
struct EquilibriumRow {
    miner: usize,
    cost: f64,
    rate: f64,
    share: f64,
    marginal_cost: f64,
    profit: f64,
}

pub fn equilibrium(model: Option<&Path>, o: &Overrides, format: Format) -> Result<String> {
    let inst = load_model(model, o, false)?;
    let (pop, params) = setup(&inst)?;
    let eq = caller_order(&pop, solve(pop.initial_costs(), &params)?);
    match format {
        Format::Json => json(&eq),
        Format::Csv => {
            let rows: Vec<EquilibriumRow> = (0..eq.rates.len())
                .map(|i| EquilibriumRow {
                    miner: i,
                    cost: inst.initial_costs[i],
                    rate: eq.rates[i],
                    share: eq.shares[i],
                    marginal_cost: eq.marginal_costs[i],
                    profit: eq.profits[i],
                })
                .collect();
            csv(&rows)
        }
    }
}

#[derive(Clone, Serialize)]
struct InvestRow {
    miner: usize,
    cost: f64,
    beta: f64,
    cost_reduction: f64,
    post_cost: f64,
    rate_pre: f64,
    rate_exact: f64,
    rate_approx: f64,
    share_pre: f64,
    share_exact: f64,
    share_approx: f64,
    profit_pre: f64,
    profit_exact: f64,
    profit_approx: f64,
}

#[derive(Serialize)]
struct Triple {
    pre: f64,
    exact: f64,
    approx: f64,
}

#[derive(Serialize)]
struct InvestReport {
    beta_star: f64,
    pre_active_count: usize,
    invested_count: usize,
    entrant_count: usize,
    approximation_valid: bool,
    aggregate: Triple,
    total_profit: Triple,
    errors: ApproximationErrors,
    miners: Vec<InvestRow>,
}

pub fn invest(model: Option<&Path>, o: &Overrides, format: Format) -> Result<String> {
    let inst = load_model(model, o, false)?;
    let eta = inst
        .eta
        .ok_or_else(|| usage("invalid eta: required for invest; set it in the model or pass --eta"))?;
    let (pop, params) = setup(&inst)?;
    let out = equilibrium_investment(&pop, &params)?;
    let sorted: Vec<InvestRow> = (0..pop.len())
        .map(|k| InvestRow {
            miner: pop.order()[k],
            cost: out.pre_costs[k],
            beta: out.beta_star.levels[k],
            cost_reduction: out.cost_reductions[k],
            post_cost: out.post_costs[k],
            rate_pre: out.pre.rates[k],
            rate_exact: out.exact_post.rates[k],
            rate_approx: out.approx.rates[k],
            share_pre: out.pre.shares[k],
            share_exact: out.exact_post.shares[k],
            share_approx: out.approx.shares[k],
            profit_pre: out.pre.profits[k],
            profit_exact: out.exact_post.profits[k],
            profit_approx: out.approx.profits[k],
        })
        .collect();
    let rows = pop.to_caller_order(&sorted);
    match format {
        Format::Csv => csv(&rows),
        Format::Json => json(&InvestReport {
            beta_star: optimal_level(eta),
            pre_active_count: out.pre_active_count,
            invested_count: out.invested_count,
            entrant_count: out.entrant_count,
            approximation_valid: out.approx.valid,
            aggregate: Triple {
                pre: out.pre.aggregate,
                exact: out.exact_post.aggregate,
                approx: out.approx.aggregate,
            },
            total_profit: Triple {
                pre: out.pre.total_profit(),
                exact: out.exact_post.total_profit(),
                approx: out.approx.total_profit,
            },
            errors: approximation_error(&out),
            miners: rows,
        }),
    }
}

#[derive(Serialize)]
struct Verification {
    finite_differences: FdCheck,
    sign_violations: Vec<String>,
    shares_monotone: bool,
}

#[derive(Serialize)]
struct StaticsReport {
    #[serde(flatten)]
    report: SensitivityReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    verification: Option<Verification>,
}

#[derive(Serialize)]
struct StaticsRow {
    miner: usize,
    share: f64,
    aggregate_cost: f64,
    rate_own: f64,
    rate_cross: f64,
    rate_gamma: f64,
    rate_reward: f64,
    share_own: f64,
    share_cross: f64,
    share_gamma: f64,
    share_reward: f64,
    profit_own: f64,
    profit_cross: f64,
}

pub fn statics(model: Option<&Path>, o: &Overrides, verify: bool, format: Format) -> Result<String> {
    let inst = load_model(model, o, false)?;
    let (pop, params) = setup(&inst)?;
    let costs = pop.initial_costs();
    let mut report = sensitivities(costs, &params)?;
    let verification = if verify {
        let eq = solve(costs, &params)?;
        Some(Verification {
            finite_differences: finite_difference_check(costs, &params, 1e-6)?,
            sign_violations: sign_violations(&report),
            shares_monotone: share_monotonicity_check(&eq, &report),
        })
    } else {
        None
    };
    for m in &mut report.miners {
        m.index = pop.order()[m.index];
    }
    match format {
        Format::Json => json(&StaticsReport { report, verification }),
        Format::Csv => {
            let rows: Vec<StaticsRow> = report
                .miners
                .iter()
                .zip(&report.aggregate.cost)
                .map(|(m, &dh)| StaticsRow {
                    miner: m.index,
                    share: m.share,
                    aggregate_cost: dh,
                    rate_own: m.rate_own,
                    rate_cross: m.rate_cross,
                    rate_gamma: m.rate_gamma,
                    rate_reward: m.rate_reward,
                    share_own: m.share_own,
                    share_cross: m.share_cross,
                    share_gamma: m.share_gamma,
                    share_reward: m.share_reward,
                    profit_own: m.profit_own,
                    profit_cross: m.profit_cross,
                })
                .collect();
            csv(&rows)
        }
    }
}

#[derive(Serialize)]
struct CalibrationReport<'a> {
    #[serde(flatten)]
    model: &'a CalibratedModel,
    equilibrium_aggregate: f64,
    active_count: usize,
}

#[derive(Serialize)]
struct NamedValue {
    name: String,
    value: String,
}

pub fn calibrate(spec: &CalibrationSpec, format: Format) -> Result<String> {
    let model = run_calibration(spec)?;
    let eq = solve(model.pop.initial_costs(), &model.params)?;
    match format {
        Format::Json => json(&CalibrationReport {
            model: &model,
            equilibrium_aggregate: eq.aggregate,
            active_count: eq.active_count,
        }),
        Format::Csv => {
            let mut rows = vec![
                ("reward", model.params.reward.to_string()),
                ("gamma", model.implied_gamma.to_string()),
                ("frontier_cost", spec.lowest_cost().to_string()),
                ("eta", spec.eta_default.to_string()),
                ("equilibrium_aggregate", eq.aggregate.to_string()),
                ("active_count", eq.active_count.to_string()),
            ]
            .into_iter()
            .map(|(n, v)| NamedValue { name: n.to_string(), value: v })
            .collect::<Vec<_>>();
            rows.extend(model.pop.initial_costs().iter().enumerate().map(|(i, c)| NamedValue {
                name: format!("cost_{i}"),
                value: c.to_string(),
            }));
            csv(&rows)
        }
    }
}

#[derive(Serialize)]
struct CurveSet {
    n: usize,
    #[serde(rename = "H")]
    aggregate: f64,
    attack_cost_at_majority: f64,
    concentration: CurvePoints,
    attack_cost: CurvePoints,
}

impl CurveSet {
    fn new(eq: &MiningEquilibrium, costs: &[f64], params: &GameParams) -> Self {
        let attack_cost = attack_cost_curve(eq, costs, params);
        Self {
            n: eq.active_count,
            aggregate: eq.aggregate,
            attack_cost_at_majority: attack_cost.eval(0.51),
            concentration: concentration_curve(eq),
            attack_cost,
        }
    }

    fn rows(&self, suffix: &str) -> Vec<CurveRow> {
        let tag = |name: &str| if suffix.is_empty() { name.to_string() } else { format!("{name}_{suffix}") };
        let mut out = Vec::new();
        for (name, curve) in [("concentration", &self.concentration), ("attack_cost", &self.attack_cost)] {
            out.extend(curve.knots.iter().map(|&(x, y)| CurveRow { curve: tag(name), x, y }));
        }
        out
    }
}

#[derive(Serialize)]
struct CurveRow {
    curve: String,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct MetricsReport {
    base: CurveSet,
    #[serde(skip_serializing_if = "Option::is_none")]
    invested: Option<CurveSet>,
}

pub fn metrics(model: Option<&Path>, o: &Overrides, format: Format) -> Result<String> {
    let inst = load_model(model, o, false)?;
    let (pop, params) = setup(&inst)?;
    let eq = solve(pop.initial_costs(), &params)?;
    let base = CurveSet::new(&eq, pop.initial_costs(), &params);
    let invested = match inst.eta {
        Some(_) => {
            let out = equilibrium_investment(&pop, &params)?;
            Some(CurveSet::new(&out.exact_post, &out.post_costs, &params))
        }
        None => None,
    };
    match format {
        Format::Json => json(&MetricsReport { base, invested }),
        Format::Csv => {
            let mut rows = base.rows("");
            if let Some(inv) = &invested {
                rows.extend(inv.rows("invested"));
            }
            csv(&rows)
        }
    }
}

#[derive(Serialize)]
struct SweepEntry {
    multiplier: f64,
    #[serde(flatten)]
    curves: CurveSet,
}

#[derive(Serialize)]
struct SweepRow {
    multiplier: f64,
    curve: String,
    x: f64,
    y: f64,
}

pub fn sweep(model: Option<&Path>, o: &Overrides, format: Format, dir: Option<&Path>) -> Result<()> {
    let inst = load_model(model, o, true)?;
    if o.reward_mult.is_empty() {
        return Err(usage("sweep needs --reward-mult, e.g. 0.5,1,2"));
    }
    let (pop, params) = setup(&inst)?;
    let costs = pop.initial_costs();
    let entries: Vec<SweepEntry> = reward_sweep(costs, &params, &o.reward_mult)?
        .into_iter()
        .map(|p| SweepEntry {
            multiplier: p.multiplier,
            curves: CurveSet::new(&p.equilibrium, costs, &params.with_reward(params.reward * p.multiplier)),
        })
        .collect();
    let render_rows = |e: &SweepEntry| -> Vec<SweepRow> {
        e.curves
            .rows("")
            .into_iter()
            .map(|r| SweepRow { multiplier: e.multiplier, curve: r.curve, x: r.x, y: r.y })
            .collect()
    };
    match dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            for e in &entries {
                let text = match format {
                    Format::Json => json(e)?,
                    Format::Csv => csv(&render_rows(e))?,
                };
                std::fs::write(dir.join(format!("reward_x{}.{}", e.multiplier, format.extension())), text)?;
            }
            Ok(())
        }
        None => {
            let text = match format {
                Format::Json => json(&entries)?,
                Format::Csv => csv(&entries.iter().flat_map(render_rows).collect::<Vec<_>>())?,
            };
            crate::output::write(&text, None)
        }
    }
}

#[derive(Serialize)]
struct FitSummary {
    alpha: f64,
    beta: f64,
    r2: f64,
    n: usize,
}

#[derive(Serialize)]
struct ReturnRow {
    date: String,
    hash_rate_return: f64,
    regressor_return_lagged: f64,
}

#[derive(Serialize)]
struct SmoothedRow {
    date: String,
    hash_rate: f64,
    reward_usd: f64,
    price_usd: f64,
}

pub fn regress(data: Option<&Path>, regressor: Regressor, emit: Emit, every: u32, format: Format) -> Result<String> {
    let path = data.ok_or_else(|| usage("--data is required"))?;
    let series = load_series(path)?;
    let field = match regressor {
        Regressor::Reward => Field::Reward,
        Regressor::Price => Field::Price,
    };
    match emit {
        Emit::Fit => {
            let (rh, rr) = regression_returns(&series, field);
            let fit = fit_loglog_dated(&rh, &rr)?;
            let summary = FitSummary {
                alpha: fit.alpha_hat,
                beta: fit.beta_hat,
                r2: fit.r_squared,
                n: fit.n_obs,
            };
            match format {
                Format::Json => json(&summary),
                Format::Csv => csv(&[summary]),
            }
        }
        Emit::Returns => {
            let (rh, rr) = regression_returns(&series, field);
            let rows: Vec<ReturnRow> = rh
                .points
                .iter()
                .filter_map(|p| {
                    rr.points.iter().find(|q| q.date == p.date).map(|q| ReturnRow {
                        date: p.date.to_string(),
                        hash_rate_return: p.value,
                        regressor_return_lagged: q.value,
                    })
                })
                .collect();
            match format {
                Format::Json => json(&rows),
                Format::Csv => csv(&rows),
            }
        }
        Emit::Smoothed => {
            let h = seven_day_average(&series, Field::HashRate, every)?;
            let r = seven_day_average(&series, Field::Reward, every)?;
            let p = seven_day_average(&series, Field::Price, every)?;
            let rows: Vec<SmoothedRow> = h
                .iter()
                .zip(&r)
                .zip(&p)
                .map(|((h, r), p)| SmoothedRow {
                    date: h.0.to_string(),
                    hash_rate: h.1,
                    reward_usd: r.1,
                    price_usd: p.1,
                })
                .collect();
            match format {
                Format::Json => json(&rows),
                Format::Csv => csv(&rows),
            }
        }
    }
}
