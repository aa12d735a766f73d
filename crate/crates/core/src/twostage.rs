//! Two-stage models: SP and RO extensive forms, their EV/MV companions and
//! wait-and-see bounds, greedy warm starts and uniqueness checks.

#[cfg(not(target_arch = "wasm32"))]
use std::time::Instant;

/// The browser target has no monotonic clock; timings read zero there.
#[cfg(target_arch = "wasm32")]
#[derive(Clone, Copy)]
struct Instant;

#[cfg(target_arch = "wasm32")]
impl Instant {
    fn now() -> Self {
        Instant
    }
    fn elapsed(&self) -> std::time::Duration {
        std::time::Duration::ZERO
    }
}

use serde::{Deserialize, Serialize};

use crate::engine::{self, EngineConfig, SolveResult, SolveStatus};
use crate::error::{Error, Result};
use crate::geometry::PfVariant;
use crate::grid::{aggregate_max, aggregate_mean, component_status, convert_depths, GridCase, IndicatorMatrix, ScenarioSet};
use crate::mitigation::{budget_threshold, plan_cost, CostTable, MitigationPlan, ThresholdKind};
use crate::model::{LinExpr, ModelIR, Sense, VarGroup};
use crate::recourse::{FirstStage, RecourseContext, XVars};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ModelKind {
    Sp,
    Ro,
    Ev,
    Eev,
    Ews,
    Mv,
    Mmv,
    Mws,
}

impl ModelKind {
    pub const ALL: [ModelKind; 8] =
        [ModelKind::Sp, ModelKind::Ro, ModelKind::Ev, ModelKind::Eev, ModelKind::Ews, ModelKind::Mv, ModelKind::Mmv, ModelKind::Mws];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Sp => "SP",
            ModelKind::Ro => "RO",
            ModelKind::Ev => "EV",
            ModelKind::Eev => "EEV",
            ModelKind::Ews => "EWS",
            ModelKind::Mv => "MV",
            ModelKind::Mmv => "MMV",
            ModelKind::Mws => "MWS",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        ModelKind::ALL
            .into_iter()
            .find(|k| k.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::Input(format!("unknown model kind '{s}'")))
    }

    /// Whether the model aggregates scenarios by their maximum.
    pub fn is_robust(self) -> bool {
        matches!(self, ModelKind::Ro | ModelKind::Mv | ModelKind::Mmv | ModelKind::Mws)
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Weights of the greedy benefit score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GreedyWeights {
    pub w_load: f64,
    pub w_cap: f64,
}

impl Default for GreedyWeights {
    fn default() -> Self {
        Self { w_load: 1.0, w_cap: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyOptions {
    pub engine: EngineConfig,
    pub warmstart: bool,
    pub weights: GreedyWeights,
}

impl StudyOptions {
    /// Default options with engine tolerances taken from the case config.
    pub fn for_case(case: &GridCase) -> Self {
        Self { engine: EngineConfig::from_grid(case.config()), ..Self::default() }
    }

    pub fn with_case_tolerances(&self, case: &GridCase) -> Self {
        Self { engine: EngineConfig::from_grid(case.config()), ..self.clone() }
    }
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self { engine: EngineConfig::default(), warmstart: true, weights: GreedyWeights::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StudyResult {
    pub kind: ModelKind,
    pub variant: PfVariant,
    pub budget: u64,
    pub z: f64,
    /// The first-stage plan, absent for the wait-and-see bounds.
    pub plan: Option<MitigationPlan>,
    /// Per-scenario optimal plans of EWS and MWS.
    pub scenario_plans: Vec<MitigationPlan>,
    /// `L(x, xi_w)` for every scenario, or the per-scenario optimum for
    /// EWS and MWS, and the aggregate scenario's value for EV and MV.
    pub scenario_objectives: Vec<f64>,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub cuts: usize,
    pub seconds: f64,
}

/// Outcome of a no-good re-solve.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Uniqueness {
    /// The restricted problem is worse by more than the tolerance, or
    /// infeasible (`None`).
    Unique { restricted: Option<f64> },
    Alternate { plan: MitigationPlan, z: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CrossGap {
    pub z_cross: f64,
    pub z_star: f64,
    /// Relative gap, or the absolute difference when `absolute` is set.
    pub gap: f64,
    pub absolute: bool,
}

/// An extensive-form model: shared first stage plus one block per scenario.
struct Extensive {
    model: ModelIR,
    x: XVars,
    loss: LinExpr,
}

/// A case, a scenario set and a power flow variant with everything
/// precomputed for repeated solves.
#[derive(Debug, Clone)]
pub struct Study {
    pub ctx: RecourseContext,
    pub scenarios: ScenarioSet,
    pub xis: Vec<IndicatorMatrix>,
    pub probs: Vec<f64>,
    pub costs: CostTable,
    pub ev_xi: IndicatorMatrix,
    pub mv_xi: IndicatorMatrix,
    pub options: StudyOptions,
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn dot(p: &[f64], v: &[f64]) -> f64 {
    p.iter().zip(v).map(|(a, b)| a * b).sum()
}

fn pin_tol(z: f64) -> f64 {
    1e-9 * (1.0 + z.abs())
}

impl Study {
    pub fn new(case: &GridCase, scenarios: &ScenarioSet, variant: PfVariant, options: StudyOptions) -> Result<Self> {
        scenarios.validate_for(case)?;
        let xis = scenarios.indicators(case)?;
        let levels = scenarios.levels();
        let ev = aggregate_mean(scenarios, case)?;
        let mv = aggregate_max(scenarios, case)?;
        Ok(Self {
            ctx: RecourseContext::new(case, variant)?,
            xis,
            probs: scenarios.probabilities(),
            costs: CostTable::from_case(case, levels),
            ev_xi: convert_depths(&ev.depth_vector(case)?, &scenarios.thresholds)?,
            mv_xi: convert_depths(&mv.depth_vector(case)?, &scenarios.thresholds)?,
            scenarios: scenarios.clone(),
            options,
        })
    }

    pub fn case(&self) -> &GridCase {
        &self.ctx.case
    }

    pub fn variant(&self) -> PfVariant {
        self.ctx.variant()
    }

    fn extensive(&self, xis: &[&IndicatorMatrix], weights: &[f64], robust: bool, budget: u64) -> Result<Extensive> {
        let mut model = ModelIR::new();
        let x = XVars::add(&mut model, self.case(), &self.costs, budget);
        let mut objs = Vec::with_capacity(xis.len());
        for (w, xi) in xis.iter().enumerate() {
            let tag = if xis.len() == 1 { String::new() } else { format!("s{w}.") };
            objs.push(self.ctx.add_block(&mut model, xi, FirstStage::Vars(&x), &tag)?.objective);
        }
        let loss = if robust {
            let z = model.continuous("z", 0.0, f64::INFINITY, VarGroup::Epigraph);
            for (w, obj) in objs.iter().enumerate() {
                model.add_constraint(format!("epigraph[{w}]"), &LinExpr::var(z), Sense::Ge, obj);
            }
            LinExpr::var(z)
        } else {
            let mut loss = LinExpr::default();
            for (obj, &p) in objs.iter().zip(weights) {
                loss.add(&obj.scaled(p));
            }
            loss
        };
        model.set_objective(&loss);
        Ok(Extensive { model, x, loss })
    }

    /// The extensive form solved for SP, RO, EV or MV at `budget`.
    pub fn build_model(&self, kind: ModelKind, budget: u64) -> Result<ModelIR> {
        let all: Vec<&IndicatorMatrix> = self.xis.iter().collect();
        let ext = match kind {
            ModelKind::Sp => self.extensive(&all, &self.probs, false, budget)?,
            ModelKind::Ro => self.extensive(&all, &self.probs, true, budget)?,
            ModelKind::Ev => self.extensive(&[&self.ev_xi], &[1.0], false, budget)?,
            ModelKind::Mv => self.extensive(&[&self.mv_xi], &[1.0], false, budget)?,
            _ => return Err(Error::Input(format!("{kind} is evaluated from other solves and has no single model"))),
        };
        Ok(ext.model)
    }

    /// Full-model point for `plan`, found by solving with the plan fixed.
    fn warm_vector(&self, ext: &Extensive, plan: &MitigationPlan) -> Option<Vec<f64>> {
        let mut m = ext.model.clone();
        ext.x.fix_to(&mut m, plan);
        match engine::solve(&m, &self.options.engine, None) {
            Ok(r) if r.status == SolveStatus::Optimal => Some(r.values),
            _ => None,
        }
    }

    fn optimize(&self, model: &ModelIR, warm: Option<&[f64]>) -> Result<SolveResult> {
        let res = engine::solve(model, &self.options.engine, warm)?;
        match res.status {
            SolveStatus::Optimal => Ok(res),
            SolveStatus::Infeasible => Err(Error::solver("extensive form is infeasible", None)),
            SolveStatus::CapReached => Err(Error::solver(
                format!("node cap reached with gap {:.3e}", res.gap()),
                res.has_incumbent().then_some(res.objective),
            )),
        }
    }

    /// Solves `min_x` of the weighted sum (or maximum) of the recourse
    /// losses over `xis`.
    fn solve_over(&self, xis: &[&IndicatorMatrix], weights: &[f64], robust: bool, budget: u64) -> Result<(MitigationPlan, SolveResult)> {
        let ext = self.extensive(xis, weights, robust, budget)?;
        let warm = if self.options.warmstart {
            let owned: Vec<IndicatorMatrix> = xis.iter().map(|x| (*x).clone()).collect();
            let plan = greedy_warmstart(self.case(), &owned, weights, &self.costs, budget, robust, self.options.weights);
            self.warm_vector(&ext, &plan)
        } else {
            None
        };
        let res = self.optimize(&ext.model, warm.as_deref())?;
        Ok((ext.x.plan(&res.values), res))
    }

    /// `L(plan, xi_w)` for every scenario.
    pub fn evaluate_plan(&self, plan: &MitigationPlan) -> Result<Vec<f64>> {
        par_map(&self.xis, |xi| self.ctx.evaluate(plan, xi, &self.options.engine).map(|s| s.objective)).into_iter().collect()
    }

    fn result(&self, kind: ModelKind, budget: u64, z: f64, plan: Option<MitigationPlan>, objs: Vec<f64>, start: Instant) -> StudyResult {
        StudyResult {
            kind,
            variant: self.variant(),
            budget,
            z,
            plan,
            scenario_plans: Vec::new(),
            scenario_objectives: objs,
            nodes: 0,
            lp_iterations: 0,
            cuts: 0,
            seconds: start.elapsed().as_secs_f64(),
        }
    }

    fn with_stats(mut r: StudyResult, res: &SolveResult) -> StudyResult {
        r.nodes += res.nodes;
        r.lp_iterations += res.lp_iterations;
        r.cuts += res.cuts;
        r
    }

    pub fn solve(&self, kind: ModelKind, budget: u64) -> Result<StudyResult> {
        match kind {
            ModelKind::Sp => self.solve_sp(budget),
            ModelKind::Ro => self.solve_ro(budget),
            ModelKind::Ev => self.solve_ev(budget),
            ModelKind::Eev => self.eval_eev(budget),
            ModelKind::Ews => self.bound_ews(budget),
            ModelKind::Mv => self.solve_mv(budget),
            ModelKind::Mmv => self.eval_mmv(budget),
            ModelKind::Mws => self.bound_mws(budget),
        }
    }

    pub fn solve_sp(&self, budget: u64) -> Result<StudyResult> {
        let start = Instant::now();
        let xis: Vec<&IndicatorMatrix> = self.xis.iter().collect();
        let (plan, res) = self.solve_over(&xis, &self.probs, false, budget)?;
        let objs = self.evaluate_plan(&plan)?;
        let z = res.objective;
        Ok(Self::with_stats(self.result(ModelKind::Sp, budget, z, Some(plan), objs, start), &res))
    }

    pub fn solve_ro(&self, budget: u64) -> Result<StudyResult> {
        let start = Instant::now();
        let xis: Vec<&IndicatorMatrix> = self.xis.iter().collect();
        let (plan, res) = self.solve_over(&xis, &self.probs, true, budget)?;
        let objs = self.evaluate_plan(&plan)?;
        Ok(Self::with_stats(self.result(ModelKind::Ro, budget, res.objective, Some(plan), objs, start), &res))
    }

    fn solve_aggregate(&self, kind: ModelKind, xi: &IndicatorMatrix, budget: u64) -> Result<StudyResult> {
        let start = Instant::now();
        let (plan, res) = self.solve_over(&[xi], &[1.0], false, budget)?;
        Ok(Self::with_stats(self.result(kind, budget, res.objective, Some(plan), vec![res.objective], start), &res))
    }

    /// Mean-value problem: the plan `x_bar` optimal for the mean-depth scenario.
    pub fn solve_ev(&self, budget: u64) -> Result<StudyResult> {
        self.solve_aggregate(ModelKind::Ev, &self.ev_xi, budget)
    }

    /// Max-value problem: the plan `x_hat` optimal for the substation-wise
    /// maximum scenario.
    pub fn solve_mv(&self, budget: u64) -> Result<StudyResult> {
        self.solve_aggregate(ModelKind::Mv, &self.mv_xi, budget)
    }

    fn eval_companion(&self, kind: ModelKind, budget: u64) -> Result<StudyResult> {
        let start = Instant::now();
        let (solve_kind, tkind, agg) = match kind {
            ModelKind::Eev => (ModelKind::Ev, ThresholdKind::Eev, &self.ev_xi),
            _ => (ModelKind::Mv, ThresholdKind::Mmv, &self.mv_xi),
        };
        // above the threshold the threshold-budget plan is reused
        let cap = budget_threshold(tkind, &self.xis, Some(agg), &self.costs)?;
        let first = self.solve(solve_kind, budget.min(cap))?;
        let plan = first.plan.clone().expect("aggregate solves return a plan");
        let objs = self.evaluate_plan(&plan)?;
        let z = if kind == ModelKind::Eev { dot(&self.probs, &objs) } else { max_of(&objs) };
        let mut r = self.result(kind, budget, z, Some(plan), objs, start);
        r.nodes = first.nodes;
        r.lp_iterations = first.lp_iterations;
        r.cuts = first.cuts;
        Ok(r)
    }

    /// Expected loss of the EV plan; an upper bound on `z_SP`.
    pub fn eval_eev(&self, budget: u64) -> Result<StudyResult> {
        self.eval_companion(ModelKind::Eev, budget)
    }

    /// Worst-case loss of the MV plan; an upper bound on `z_RO`.
    pub fn eval_mmv(&self, budget: u64) -> Result<StudyResult> {
        self.eval_companion(ModelKind::Mmv, budget)
    }

    fn wait_and_see(&self, kind: ModelKind, budget: u64) -> Result<StudyResult> {
        let start = Instant::now();
        let solved: Vec<(MitigationPlan, SolveResult)> =
            par_map(&self.xis, |xi| self.solve_over(&[xi], &[1.0], false, budget)).into_iter().collect::<Result<_>>()?;
        let objs: Vec<f64> = solved.iter().map(|(_, r)| r.objective).collect();
        let z = if kind == ModelKind::Ews { dot(&self.probs, &objs) } else { max_of(&objs) };
        let mut r = self.result(kind, budget, z, None, objs, start);
        for (plan, res) in solved {
            r = Self::with_stats(r, &res);
            r.scenario_plans.push(plan);
        }
        Ok(r)
    }

    /// Expected wait-and-see loss; a lower bound on `z_SP`.
    pub fn bound_ews(&self, budget: u64) -> Result<StudyResult> {
        self.wait_and_see(ModelKind::Ews, budget)
    }

    /// Worst per-scenario optimum; a lower bound on `z_RO`.
    pub fn bound_mws(&self, budget: u64) -> Result<StudyResult> {
        self.wait_and_see(ModelKind::Mws, budget)
    }

    /// Cheapest plan whose loss over `xis` stays within the pin tolerance of `z`.
    fn min_cost_plan(&self, xis: &[&IndicatorMatrix], weights: &[f64], robust: bool, budget: u64, z: f64) -> Result<MitigationPlan> {
        let mut ext = self.extensive(xis, weights, robust, budget)?;
        let loss = ext.loss.clone();
        ext.model.add_constraint("loss_pin", &loss, Sense::Le, &LinExpr::constant(z + pin_tol(z)));
        let mut cost = LinExpr::default();
        for (k, row) in ext.x.vars.iter().enumerate() {
            for (r, &v) in row.iter().enumerate() {
                cost = cost.term(v, f64::from(self.costs.get(k, r + 1)));
            }
        }
        ext.model.set_objective(&cost);
        let res = self.optimize(&ext.model, None)?;
        Ok(ext.x.plan(&res.values))
    }

    /// Budget above which `kind` cannot improve. SP, EEV, EWS and MMV use
    /// the coverage-cost rule; RO and MWS are found by a minimum-cost solve
    /// at the optimal loss.
    pub fn threshold(&self, kind: ModelKind) -> Result<u64> {
        match kind {
            ModelKind::Sp => budget_threshold(ThresholdKind::Sp, &self.xis, None, &self.costs),
            ModelKind::Ews => budget_threshold(ThresholdKind::Ews, &self.xis, None, &self.costs),
            ModelKind::Ev | ModelKind::Eev => budget_threshold(ThresholdKind::Eev, &self.xis, Some(&self.ev_xi), &self.costs),
            ModelKind::Mv | ModelKind::Mmv => budget_threshold(ThresholdKind::Mmv, &self.xis, Some(&self.mv_xi), &self.costs),
            ModelKind::Ro => {
                let f = self.threshold(ModelKind::Sp)?;
                let z = self.solve_ro(f)?.z;
                let xis: Vec<&IndicatorMatrix> = self.xis.iter().collect();
                Ok(plan_cost(&self.min_cost_plan(&xis, &self.probs, true, f, z)?, &self.costs))
            }
            ModelKind::Mws => {
                let f = self.threshold(ModelKind::Sp)?;
                let z = self.bound_mws(f)?.z;
                // each scenario must reach the worst per-scenario optimum
                let per: Vec<u64> = par_map(&self.xis, |xi| {
                    self.min_cost_plan(&[xi], &[1.0], false, f, z).map(|p| plan_cost(&p, &self.costs))
                })
                .into_iter()
                .collect::<Result<_>>()?;
                Ok(per.into_iter().max().unwrap_or(0))
            }
        }
    }

    /// Re-solves `kind` with the no-good cut of `x_star`. The plan is unique
    /// when the restricted optimum exceeds `z_star` by more than `1e-9`.
    pub fn check_uniqueness(&self, kind: ModelKind, budget: u64, x_star: &MitigationPlan, z_star: f64) -> Result<Uniqueness> {
        let (xis, weights, robust): (Vec<&IndicatorMatrix>, Vec<f64>, bool) = match kind {
            ModelKind::Sp => (self.xis.iter().collect(), self.probs.clone(), false),
            ModelKind::Ro => (self.xis.iter().collect(), self.probs.clone(), true),
            ModelKind::Ev => (vec![&self.ev_xi], vec![1.0], false),
            ModelKind::Mv => (vec![&self.mv_xi], vec![1.0], false),
            _ => return Err(Error::Input(format!("uniqueness is defined for SP, RO, EV and MV, not {kind}"))),
        };
        let mut ext = self.extensive(&xis, &weights, robust, budget)?;
        ext.x.add_no_good(&mut ext.model, x_star)?;
        let res = engine::solve(&ext.model, &self.options.engine, None)?;
        match res.status {
            SolveStatus::Infeasible => Ok(Uniqueness::Unique { restricted: None }),
            SolveStatus::CapReached => Err(Error::solver("node cap reached in the uniqueness re-solve", None)),
            SolveStatus::Optimal if res.objective > z_star + 1e-9 => Ok(Uniqueness::Unique { restricted: Some(res.objective) }),
            SolveStatus::Optimal => Ok(Uniqueness::Alternate { plan: ext.x.plan(&res.values), z: res.objective }),
        }
    }

    /// Loss of `plan` under SP or RO aggregation in this study.
    pub fn plan_loss(&self, plan: &MitigationPlan, kind: ModelKind) -> Result<f64> {
        let objs = self.evaluate_plan(plan)?;
        Ok(if kind.is_robust() { max_of(&objs) } else { dot(&self.probs, &objs) })
    }

    /// Relative suboptimality of `plan` in this study against its optimum `z_star`.
    pub fn cross_evaluate(&self, plan: &MitigationPlan, kind: ModelKind, z_star: f64) -> Result<CrossGap> {
        let z_cross = self.plan_loss(plan, kind)?;
        Ok(if z_star == 0.0 {
            CrossGap { z_cross, z_star, gap: z_cross - z_star, absolute: true }
        } else {
            CrossGap { z_cross, z_star, gap: (z_cross - z_star) / z_star, absolute: false }
        })
    }
}

/// Value of the stochastic solution `EEV - SP`.
pub fn vss(eev: f64, sp: f64) -> f64 {
    eev - sp
}

/// Expected value of perfect information `SP - EWS`.
pub fn evpi(sp: f64, ews: f64) -> f64 {
    sp - ews
}

fn score(case: &GridCase, plan: &MitigationPlan, xi: &IndicatorMatrix, w: GreedyWeights) -> f64 {
    let st = component_status(plan, xi, case);
    let load: f64 = case.loads().iter().enumerate().filter(|(d, _)| st.alpha[case.load_bus(*d)]).map(|(_, l)| l.p_load).sum();
    let cap: f64 = case.branches().iter().enumerate().filter(|(l, _)| st.beta[case.branch_edge(*l)]).map(|(_, b)| b.s_max).sum();
    w.w_load * load + w.w_cap * cap
}

/// Load at dead buses minus generation capacity at live ones.
fn exposure(case: &GridCase, plan: &MitigationPlan, xi: &IndicatorMatrix) -> f64 {
    let st = component_status(plan, xi, case);
    let dead: f64 = case.loads().iter().enumerate().filter(|(d, _)| !st.alpha[case.load_bus(*d)]).map(|(_, l)| l.p_load).sum();
    let gen: f64 = case.generators().iter().enumerate().filter(|(g, _)| st.alpha[case.gen_bus(*g)]).map(|(_, g)| g.p_max).sum();
    dead - gen
}

/// Greedy plan: repeatedly raise the substation whose upgrade gives the
/// largest weighted gain in live load and live branch capacity per
/// resource. `robust` scores upgrades on the current worst scenario instead
/// of in expectation.
pub fn greedy_warmstart(
    case: &GridCase,
    xis: &[IndicatorMatrix],
    probs: &[f64],
    costs: &CostTable,
    budget: u64,
    robust: bool,
    weights: GreedyWeights,
) -> MitigationPlan {
    let levels = costs.levels();
    let ks = case.substations().len();
    let mut achieved = vec![0usize; ks];
    let mut spent = 0u64;
    loop {
        let plan = MitigationPlan::from_levels(&achieved, levels);
        let active: Vec<(f64, &IndicatorMatrix)> = if robust {
            let worst = (0..xis.len())
                .max_by(|&a, &b| exposure(case, &plan, &xis[a]).total_cmp(&exposure(case, &plan, &xis[b])).then(b.cmp(&a)))
                .expect("at least one scenario");
            vec![(1.0, &xis[worst])]
        } else {
            probs.iter().copied().zip(xis).collect()
        };
        let base: Vec<f64> = active.iter().map(|(_, xi)| score(case, &plan, xi, weights)).collect();
        let mut best: Option<(f64, usize, usize, u64)> = None;
        for k in 0..ks {
            // the top level is inexorable
            for t in achieved[k] + 1..levels {
                let cost = costs.cumulative(k, t) - costs.cumulative(k, achieved[k]);
                if spent + cost > budget {
                    break;
                }
                let mut next = achieved.clone();
                next[k] = t;
                let cand = MitigationPlan::from_levels(&next, levels);
                let gain: f64 =
                    active.iter().zip(&base).map(|((p, xi), b)| p * (score(case, &cand, xi, weights) - b)).sum();
                let ratio = gain / cost as f64;
                if gain > 1e-12 && best.is_none_or(|(r, ..)| ratio > r + 1e-12) {
                    best = Some((ratio, k, t, cost));
                }
            }
        }
        match best {
            Some((_, k, t, cost)) => {
                achieved[k] = t;
                spent += cost;
            }
            None => return plan,
        }
    }
}
