//! Second-stage models: the adapted DC and LPAC recourse problems as
//! [`ModelIR`] blocks, for a fixed plan or for first-stage variables.

use serde::Serialize;

use crate::bigm::{BigMSet, Interval};
use crate::engine::{self, EngineConfig, SolveStatus};
use crate::error::{Error, Result};
use crate::geometry::{b1, disc_halfplanes, regular_polygon, CosModel, DiscModel, PfVariant, VariantGeometry};
use crate::grid::{component_status, GridCase, IndicatorMatrix};
use crate::mitigation::{CostTable, MitigationPlan};
use crate::model::{LinExpr, ModelIR, QuadConstraint, Sense, VarGroup, VarId};

/// First-stage variables `x[k][r-1]`; the top level is fixed to zero.
#[derive(Debug, Clone, PartialEq)]
pub struct XVars {
    pub vars: Vec<Vec<VarId>>,
}

impl XVars {
    /// Adds binaries with the cumulative, inexorable-level and budget rows.
    pub fn add(model: &mut ModelIR, case: &GridCase, costs: &CostTable, budget: u64) -> Self {
        let levels = costs.levels();
        let mut vars = Vec::new();
        let mut spend = Vec::new();
        for (k, sub) in case.substations().iter().enumerate() {
            let row: Vec<VarId> = (1..=levels)
                .map(|r| {
                    let v = model.binary(format!("x[{},{r}]", sub.id), VarGroup::X);
                    if r == levels {
                        model.fix(v, 0.0);
                    }
                    spend.push((v, f64::from(costs.get(k, r))));
                    v
                })
                .collect();
            for r in 1..levels {
                model.add_row(format!("cumulative[{},{}]", sub.id, r + 1), vec![(row[r], 1.0), (row[r - 1], -1.0)], Sense::Le, 0.0);
            }
            vars.push(row);
        }
        model.add_row("budget", spend, Sense::Le, budget as f64);
        XVars { vars }
    }

    pub fn plan(&self, values: &[f64]) -> MitigationPlan {
        MitigationPlan { x: self.vars.iter().map(|row| row.iter().map(|v| values[v.0] > 0.5).collect()).collect() }
    }

    /// Fixes the variables to `plan` through their bounds.
    pub fn fix_to(&self, model: &mut ModelIR, plan: &MitigationPlan) {
        for (row, prow) in self.vars.iter().zip(&plan.x) {
            for (&v, &b) in row.iter().zip(prow) {
                model.fix(v, if b { 1.0 } else { 0.0 });
            }
        }
    }

    /// `(1 - x*)' x >= 1`.
    pub fn add_no_good(&self, model: &mut ModelIR, x_star: &MitigationPlan) -> Result<()> {
        let cut = crate::mitigation::no_good_cut(x_star)?;
        let mut coefs = Vec::new();
        for (row, crow) in self.vars.iter().zip(&cut.coeffs) {
            for (&v, &c) in row.iter().zip(crow) {
                if c != 0.0 {
                    coefs.push((v, c));
                }
            }
        }
        model.add_row("no_good", coefs, Sense::Ge, cut.rhs);
        Ok(())
    }

    pub fn write(&self, values: &mut [f64], plan: &MitigationPlan) {
        for (row, prow) in self.vars.iter().zip(&plan.x) {
            for (&v, &b) in row.iter().zip(prow) {
                values[v.0] = if b { 1.0 } else { 0.0 };
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub enum FirstStage<'a> {
    Fixed(&'a MitigationPlan),
    Vars(&'a XVars),
}

/// Variable handles of one recourse block.
#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub variant: PfVariant,
    pub chi: VarId,
    pub alpha: Vec<VarId>,
    pub beta: Vec<VarId>,
    pub delta: Vec<VarId>,
    pub p_gen: Vec<VarId>,
    pub q_gen: Vec<VarId>,
    pub p_over: Vec<VarId>,
    /// DC: one flow per branch. LPAC: `2l` is the from-side flow of branch
    /// `l`, `2l + 1` the to-side flow.
    pub p_flow: Vec<VarId>,
    pub q_flow: Vec<VarId>,
    pub theta: Vec<VarId>,
    /// One per edge, oriented `edge.from -> edge.to`.
    pub sin: Vec<VarId>,
    pub cos: Vec<VarId>,
    pub phi: Vec<VarId>,
    /// Loss of this block.
    pub objective: LinExpr,
    pub p_load: Vec<f64>,
    pub lambda_shed: f64,
    pub lambda_over: f64,
}

/// A standalone recourse model.
#[derive(Debug, Clone, PartialEq)]
pub struct RecourseModel {
    pub model: ModelIR,
    pub block: Block,
    pub x: Option<XVars>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RecourseSolution {
    pub objective: f64,
    pub load_shed: f64,
    pub overgeneration: f64,
    pub chi: bool,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub delta: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    pub p_over: Vec<f64>,
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub theta: Vec<f64>,
    pub sin: Vec<f64>,
    pub cos: Vec<f64>,
    pub phi: Vec<f64>,
}

/// Adds `lhs (sense) rhs`. Fixed variables are folded into the constant
/// and a row left with one variable becomes a bound.
fn constrain(model: &mut ModelIR, name: String, lhs: &LinExpr, sense: Sense, rhs: &LinExpr) {
    let mut coefs: Vec<(VarId, f64)> = Vec::new();
    let mut k = rhs.constant - lhs.constant;
    let terms = lhs.terms.iter().copied().chain(rhs.terms.iter().map(|&(v, c)| (v, -c)));
    for (v, c) in terms {
        let var = &model.vars[v.0];
        if var.lb == var.ub {
            k -= c * var.lb;
            continue;
        }
        match coefs.iter_mut().find(|(u, _)| *u == v) {
            Some(e) => e.1 += c,
            None => coefs.push((v, c)),
        }
    }
    coefs.retain(|&(_, c)| c != 0.0);
    if let [(v, c)] = coefs[..] {
        let bound = k / c;
        let var = &mut model.vars[v.0];
        let upper = matches!((sense, c > 0.0), (Sense::Le, true) | (Sense::Ge, false));
        match sense {
            Sense::Eq => {
                var.lb = var.lb.max(bound);
                var.ub = var.ub.min(bound);
            }
            _ if upper => var.ub = var.ub.min(bound),
            _ => var.lb = var.lb.max(bound),
        }
        return;
    }
    model.add_row(name, coefs, sense, k);
}

/// `lo (1 - beta) <= expr <= hi (1 - beta)`.
fn big_m_pair(model: &mut ModelIR, name: &str, expr: &LinExpr, beta: &LinExpr, m: Interval) {
    let lo = LinExpr::constant(m.lo).tap_add(&beta.scaled(-m.lo));
    let hi = LinExpr::constant(m.hi).tap_add(&beta.scaled(-m.hi));
    constrain(model, format!("{name}_lo"), expr, Sense::Ge, &lo);
    constrain(model, format!("{name}_hi"), expr, Sense::Le, &hi);
}

trait TapAdd {
    fn tap_add(self, other: &LinExpr) -> LinExpr;
}

impl TapAdd for LinExpr {
    fn tap_add(mut self, other: &LinExpr) -> LinExpr {
        self.add(other);
        self
    }
}

/// Bus statuses as affine expressions in `x`, plus the rows linking them.
fn status_exprs(
    model: &mut ModelIR,
    case: &GridCase,
    xi: &IndicatorMatrix,
    first: FirstStage,
    tag: &str,
) -> (Vec<VarId>, Vec<VarId>) {
    let mut alpha = Vec::new();
    match first {
        FirstStage::Fixed(plan) => {
            let st = component_status(plan, xi, case);
            for (n, bus) in case.buses().iter().enumerate() {
                let v = model.continuous(format!("{tag}alpha[{}]", bus.id), 0.0, 1.0, VarGroup::Alpha);
                model.fix(v, if st.alpha[n] { 1.0 } else { 0.0 });
                alpha.push(v);
            }
            let beta = case
                .edges()
                .iter()
                .enumerate()
                .map(|(e, edge)| {
                    let name = format!("{tag}beta[{},{}]", case.buses()[edge.from].id, case.buses()[edge.to].id);
                    let v = model.continuous(name, 0.0, 1.0, VarGroup::Beta);
                    model.fix(v, if st.beta[e] { 1.0 } else { 0.0 });
                    v
                })
                .collect();
            (alpha, beta)
        }
        FirstStage::Vars(xv) => {
            let levels = xi.levels();
            for (n, bus) in case.buses().iter().enumerate() {
                let k = case.bus_substation(n);
                let a = model.continuous(format!("{tag}alpha[{}]", bus.id), 0.0, 1.0, VarGroup::Alpha);
                // term_r = 1 - xi_kr (1 - x_kr)
                let term = |r: usize| -> LinExpr {
                    if xi.get(k, r) {
                        LinExpr::var(xv.vars[k][r - 1])
                    } else {
                        LinExpr::constant(1.0)
                    }
                };
                let mut sum = LinExpr::constant(1.0 - levels as f64);
                for r in 1..=levels {
                    sum.add(&term(r));
                }
                constrain(model, format!("{tag}alpha_lo[{}]", bus.id), &LinExpr::var(a), Sense::Ge, &sum);
                for r in 1..=levels {
                    if xi.get(k, r) {
                        constrain(model, format!("{tag}alpha_hi[{},{r}]", bus.id), &LinExpr::var(a), Sense::Le, &term(r));
                    }
                }
                alpha.push(a);
            }
            let mut beta = Vec::new();
            for edge in case.edges() {
                let (bn, bm) = (&case.buses()[edge.from].id, &case.buses()[edge.to].id);
                let b = model.continuous(format!("{tag}beta[{bn},{bm}]"), 0.0, 1.0, VarGroup::Beta);
                let (an, am) = (alpha[edge.from], alpha[edge.to]);
                model.add_row(format!("{tag}beta_lo[{bn},{bm}]"), vec![(b, 1.0), (an, -1.0), (am, -1.0)], Sense::Ge, -1.0);
                model.add_row(format!("{tag}beta_n[{bn},{bm}]"), vec![(b, 1.0), (an, -1.0)], Sense::Le, 0.0);
                model.add_row(format!("{tag}beta_m[{bn},{bm}]"), vec![(b, 1.0), (am, -1.0)], Sense::Le, 0.0);
                beta.push(b);
            }
            (alpha, beta)
        }
    }
}

fn check_inputs(case: &GridCase, xi: &IndicatorMatrix, bigm: &BigMSet, variant: PfVariant) -> Result<()> {
    if bigm.branches.len() != case.branches().len() {
        return Err(Error::Input(format!(
            "big-M set covers {} branches, case has {}",
            bigm.branches.len(),
            case.branches().len()
        )));
    }
    if bigm.variant.is_lpac() != variant.is_lpac() || (variant.is_lpac() && bigm.variant != variant) {
        return Err(Error::Input(format!("big-M set calibrated for {}, model is {}", bigm.variant, variant)));
    }
    if xi.substations() != case.substations().len() {
        return Err(Error::Input(format!(
            "indicator matrix has {} substations, case has {}",
            xi.substations(),
            case.substations().len()
        )));
    }
    Ok(())
}

/// Adds one recourse block to `model`. Names are prefixed with `tag`.
pub fn add_block(
    model: &mut ModelIR,
    case: &GridCase,
    xi: &IndicatorMatrix,
    first: FirstStage,
    bigm: &BigMSet,
    geometry: &VariantGeometry,
    tag: &str,
) -> Result<Block> {
    let variant = geometry.variant;
    check_inputs(case, xi, bigm, variant)?;
    let cfg = case.config();
    let lpac = variant.is_lpac();
    let (alpha, beta) = status_exprs(model, case, xi, first, tag);
    let buses = case.buses();

    let chi = model.binary(format!("{tag}chi"), VarGroup::Chi);
    let delta: Vec<VarId> = case
        .loads()
        .iter()
        .map(|d| {
            let v = model.continuous(format!("{tag}delta[{}]", d.id), 0.0, 1.0, VarGroup::Delta);
            model.add_row(format!("{tag}served[{}]", d.id), vec![(v, 1.0), (chi, 1.0)], Sense::Le, 1.0);
            v
        })
        .collect();

    let mut p_gen = Vec::new();
    let mut q_gen = Vec::new();
    let mut p_over = Vec::new();
    for (g, gen) in case.generators().iter().enumerate() {
        let a = LinExpr::var(alpha[case.gen_bus(g)]);
        let p = model.continuous(format!("{tag}pg[{}]", gen.id), (-gen.p_min).min(0.0), gen.p_max.max(0.0), VarGroup::PGen);
        let lower = a.scaled(gen.p_min).term(chi, -gen.p_min);
        constrain(model, format!("{tag}pg_lo[{}]", gen.id), &LinExpr::var(p), Sense::Ge, &lower);
        constrain(model, format!("{tag}pg_hi[{}]", gen.id), &LinExpr::var(p), Sense::Le, &a.scaled(gen.p_max));
        let o = model.continuous(format!("{tag}po[{}]", gen.id), 0.0, gen.p_max.max(0.0), VarGroup::POver);
        model.add_row(format!("{tag}po_le_pg[{}]", gen.id), vec![(o, 1.0), (p, -1.0)], Sense::Le, 0.0);
        p_gen.push(p);
        p_over.push(o);
        if lpac {
            let q = model.continuous(format!("{tag}qg[{}]", gen.id), gen.q_min, gen.q_max, VarGroup::QGen);
            constrain(model, format!("{tag}qg_lo[{}]", gen.id), &LinExpr::var(q), Sense::Ge, &a.scaled(gen.q_min));
            constrain(model, format!("{tag}qg_hi[{}]", gen.id), &LinExpr::var(q), Sense::Le, &a.scaled(gen.q_max));
            q_gen.push(q);
        }
    }

    let theta: Vec<VarId> = buses
        .iter()
        .enumerate()
        .map(|(n, b)| {
            let v = model.continuous(format!("{tag}theta[{}]", b.id), -cfg.theta_max, cfg.theta_max, VarGroup::Theta);
            if n == case.reference_bus() {
                model.fix(v, 0.0);
            }
            v
        })
        .collect();
    let phi: Vec<VarId> = if lpac {
        buses
            .iter()
            .map(|b| model.continuous(format!("{tag}phi[{}]", b.id), b.v_min - b.v_target, b.v_max - b.v_target, VarGroup::Phi))
            .collect()
    } else {
        vec![]
    };

    // sine and cosine per edge
    let span = 2.0 * cfg.theta_max;
    let mut sin = Vec::new();
    let mut cos = Vec::new();
    for (e, edge) in case.edges().iter().enumerate() {
        let en = format!("{},{}", buses[edge.from].id, buses[edge.to].id);
        let s = model.continuous(format!("{tag}sin[{en}]"), -span, span, VarGroup::Sin);
        model.add_row(format!("{tag}sin_def[{en}]"), vec![(s, 1.0), (theta[edge.from], -1.0), (theta[edge.to], 1.0)], Sense::Eq, 0.0);
        let shrink = span - cfg.theta_delta_max;
        let b = LinExpr::var(beta[e]);
        let cap = LinExpr::constant(span).tap_add(&b.scaled(-shrink));
        constrain(model, format!("{tag}sin_hi[{en}]"), &LinExpr::var(s), Sense::Le, &cap);
        constrain(model, format!("{tag}sin_lo[{en}]"), &LinExpr::var(s).scaled(-1.0), Sense::Le, &cap);
        sin.push(s);
        if lpac {
            let (clo, chi_) = geometry.cos_range(cfg.theta_delta_max);
            let c = model.continuous(format!("{tag}cos[{en}]"), clo, chi_, VarGroup::Cos);
            match &geometry.cos {
                CosModel::Unit => model.fix(c, 1.0),
                CosModel::Tangents(ts) => {
                    for (t, &h) in ts.points.iter().enumerate() {
                        let kk = 1.0 - b1(-span, h).min(b1(span, h));
                        // cos <= (1 - beta) kk + (h - sin) sin h + cos h
                        let rhs = LinExpr::constant(kk + h * h.sin() + h.cos()).term(beta[e], -kk).term(s, -h.sin());
                        constrain(model, format!("{tag}cos_tan[{en},{t}]"), &LinExpr::var(c), Sense::Le, &rhs);
                    }
                }
                CosModel::Quadratic { k } => {
                    let open = 4.0 * k * cfg.theta_max * cfg.theta_max;
                    model.add_quad(QuadConstraint::SumSquares {
                        name: format!("{tag}cos_quad[{en}]"),
                        terms: vec![LinExpr { terms: vec![(s, k.sqrt())], constant: 0.0 }],
                        rhs: LinExpr::constant(1.0 + open).term(beta[e], -open).term(c, -1.0),
                    });
                }
            }
            cos.push(c);
        }
    }

    // flows, Ohm's law and flow limits
    let mut p_flow = Vec::new();
    let mut q_flow = Vec::new();
    let disc_angles = match &geometry.disc {
        DiscModel::Polygon(a) => a.clone(),
        DiscModel::Exact => regular_polygon(4),
    };
    for (l, br) in case.branches().iter().enumerate() {
        let e = case.branch_edge(l);
        let b_e = LinExpr::var(beta[e]);
        let sign = if case.branch_aligned(l) { 1.0 } else { -1.0 };
        let (nf, nt) = case.branch_ends(l);
        if !lpac {
            let p = model.continuous(format!("{tag}pf[{}]", br.id), -br.s_max, br.s_max, VarGroup::PFlow);
            let expr = LinExpr { terms: vec![(p, -1.0), (sin[e], -br.b * sign)], constant: 0.0 };
            big_m_pair(model, &format!("{tag}ohm[{}]", br.id), &expr, &b_e, bigm.branches[l].dc);
            constrain(model, format!("{tag}pf_hi[{}]", br.id), &LinExpr::var(p), Sense::Le, &b_e.scaled(br.s_max));
            constrain(model, format!("{tag}pf_lo[{}]", br.id), &LinExpr::var(p), Sense::Ge, &b_e.scaled(-br.s_max));
            p_flow.push(p);
            continue;
        }
        for (dir, (n, m, side)) in [(nf, nt, "fr"), (nt, nf, "to")].into_iter().enumerate() {
            let dsign = if dir == 0 { sign } else { -sign };
            let (vn, vm, g, b) = (buses[n].v_target, buses[m].v_target, br.g, br.b);
            let nm = format!("{}_{side}", br.id);
            let p = model.continuous(format!("{tag}pf[{nm}]"), -br.s_max, br.s_max, VarGroup::PFlow);
            let q = model.continuous(format!("{tag}qf[{nm}]"), -br.s_max, br.s_max, VarGroup::QFlow);
            let active = LinExpr {
                terms: vec![(p, -1.0), (chi, vn * g * (vm - vn)), (cos[e], -vn * vm * g), (sin[e], -vn * vm * b * dsign)],
                constant: vn * vn * g,
            };
            let reactive = LinExpr {
                terms: vec![
                    (q, -1.0),
                    (chi, vn * b * (vn - vm)),
                    (sin[e], -vn * vm * g * dsign),
                    (cos[e], vn * vm * b),
                    (phi[n], -b * (2.0 * vn - vm)),
                    (phi[m], vn * b),
                ],
                constant: -vn * vn * b,
            };
            let mm = bigm.branches[l].lpac[dir];
            big_m_pair(model, &format!("{tag}ohm_p[{nm}]"), &active, &b_e, mm.p);
            big_m_pair(model, &format!("{tag}ohm_q[{nm}]"), &reactive, &b_e, mm.q);
            for (t, hp) in disc_halfplanes(&disc_angles, br.s_max).iter().enumerate() {
                let lhs = LinExpr { terms: vec![(p, hp.a), (q, hp.b)], constant: 0.0 };
                constrain(model, format!("{tag}disc[{nm},{t}]"), &lhs, Sense::Le, &b_e.scaled(hp.rhs_factor));
            }
            if geometry.disc == DiscModel::Exact {
                model.add_quad(QuadConstraint::Disc { name: format!("{tag}disc_quad[{nm}]"), p, q, radius: br.s_max, scale: b_e.clone() });
            }
            p_flow.push(p);
            q_flow.push(q);
        }
    }

    // Kirchhoff's current law
    for (n, bus) in buses.iter().enumerate() {
        let mut pk = Vec::new();
        let mut qk = Vec::new();
        for (g, _) in case.generators().iter().enumerate().filter(|(g, _)| case.gen_bus(*g) == n) {
            pk.push((p_gen[g], 1.0));
            pk.push((p_over[g], -1.0));
            if lpac {
                qk.push((q_gen[g], 1.0));
            }
        }
        for (d, load) in case.loads().iter().enumerate().filter(|(d, _)| case.load_bus(*d) == n) {
            pk.push((delta[d], -load.p_load));
            if lpac {
                qk.push((delta[d], -load.q_load));
            }
        }
        for l in 0..case.branches().len() {
            let (f, t) = case.branch_ends(l);
            if lpac {
                if f == n {
                    pk.push((p_flow[2 * l], -1.0));
                    qk.push((q_flow[2 * l], -1.0));
                }
                if t == n {
                    pk.push((p_flow[2 * l + 1], -1.0));
                    qk.push((q_flow[2 * l + 1], -1.0));
                }
            } else {
                if t == n {
                    pk.push((p_flow[l], 1.0));
                }
                if f == n {
                    pk.push((p_flow[l], -1.0));
                }
            }
        }
        model.add_row(format!("{tag}kcl_p[{}]", bus.id), pk, Sense::Eq, 0.0);
        if lpac {
            model.add_row(format!("{tag}kcl_q[{}]", bus.id), qk, Sense::Eq, 0.0);
        }
    }

    let mut objective = LinExpr::constant(cfg.lambda_shed * case.total_load());
    for (d, load) in case.loads().iter().enumerate() {
        objective = objective.term(delta[d], -cfg.lambda_shed * load.p_load);
    }
    for &o in &p_over {
        objective = objective.term(o, cfg.lambda_over);
    }

    Ok(Block {
        variant,
        chi,
        alpha,
        beta,
        delta,
        p_gen,
        q_gen,
        p_over,
        p_flow,
        q_flow,
        theta,
        sin,
        cos,
        phi,
        objective,
        p_load: case.loads().iter().map(|d| d.p_load).collect(),
        lambda_shed: cfg.lambda_shed,
        lambda_over: cfg.lambda_over,
    })
}

fn build(first: FirstStageSpec, xi: &IndicatorMatrix, case: &GridCase, bigm: &BigMSet, geometry: &VariantGeometry) -> Result<RecourseModel> {
    let mut model = ModelIR::new();
    let (block, x) = match first {
        FirstStageSpec::Plan(plan) => (add_block(&mut model, case, xi, FirstStage::Fixed(plan), bigm, geometry, "")?, None),
        FirstStageSpec::Budget { costs, budget } => {
            let xv = XVars::add(&mut model, case, costs, budget);
            (add_block(&mut model, case, xi, FirstStage::Vars(&xv), bigm, geometry, "")?, Some(xv))
        }
    };
    model.set_objective(&block.objective);
    Ok(RecourseModel { model, block, x })
}

/// How the first stage enters a standalone recourse model.
#[derive(Debug, Clone, Copy)]
pub enum FirstStageSpec<'a> {
    Plan(&'a MitigationPlan),
    Budget { costs: &'a CostTable, budget: u64 },
}

/// Adapted DC model.
pub fn build_dc(first: FirstStageSpec, xi: &IndicatorMatrix, case: &GridCase, bigm: &BigMSet) -> Result<RecourseModel> {
    let geometry = VariantGeometry::new(PfVariant::Dc, case.config().theta_delta_max, case.config().t_cos)?;
    build(first, xi, case, bigm, &geometry)
}

/// Adapted LPAC model in one of its three variants.
pub fn build_lpac(
    first: FirstStageSpec,
    xi: &IndicatorMatrix,
    case: &GridCase,
    bigm: &BigMSet,
    geometry: &VariantGeometry,
) -> Result<RecourseModel> {
    if !geometry.variant.is_lpac() {
        return Err(Error::Input(format!("{} is not an LPAC variant", geometry.variant)));
    }
    build(first, xi, case, bigm, geometry)
}

/// Everything needed to build blocks of one variant for one case.
#[derive(Debug, Clone)]
pub struct RecourseContext {
    pub case: GridCase,
    pub bigm: BigMSet,
    pub geometry: VariantGeometry,
}

impl RecourseContext {
    pub fn new(case: &GridCase, variant: PfVariant) -> Result<Self> {
        let cfg = case.config();
        Ok(Self {
            case: case.clone(),
            bigm: crate::bigm::calibrate(case, variant),
            geometry: VariantGeometry::new(variant, cfg.theta_delta_max, cfg.t_cos)?,
        })
    }

    pub fn variant(&self) -> PfVariant {
        self.geometry.variant
    }

    pub fn build(&self, first: FirstStageSpec, xi: &IndicatorMatrix) -> Result<RecourseModel> {
        build(first, xi, &self.case, &self.bigm, &self.geometry)
    }

    pub fn add_block(&self, model: &mut ModelIR, xi: &IndicatorMatrix, first: FirstStage, tag: &str) -> Result<Block> {
        add_block(model, &self.case, xi, first, &self.bigm, &self.geometry, tag)
    }

    /// `L(x, xi)` for a fixed plan.
    pub fn evaluate(&self, plan: &MitigationPlan, xi: &IndicatorMatrix, engine: &EngineConfig) -> Result<RecourseSolution> {
        let rm = self.build(FirstStageSpec::Plan(plan), xi)?;
        solve_recourse(&rm, engine)
    }
}

impl Block {
    pub fn extract(&self, values: &[f64]) -> RecourseSolution {
        let get = |vs: &[VarId]| vs.iter().map(|v| values[v.0]).collect::<Vec<f64>>();
        let delta = get(&self.delta);
        let p_over = get(&self.p_over);
        let load_shed = self.p_load.iter().zip(&delta).map(|(p, x)| p * (1.0 - x)).sum();
        let overgeneration = p_over.iter().sum();
        RecourseSolution {
            objective: self.objective.eval(values),
            load_shed,
            overgeneration,
            chi: values[self.chi.0] > 0.5,
            // implied integral by the status rows
            alpha: get(&self.alpha).into_iter().map(f64::round).collect(),
            beta: get(&self.beta).into_iter().map(f64::round).collect(),
            delta,
            p_gen: get(&self.p_gen),
            q_gen: get(&self.q_gen),
            p_over,
            p_flow: get(&self.p_flow),
            q_flow: get(&self.q_flow),
            theta: get(&self.theta),
            sin: get(&self.sin),
            cos: get(&self.cos),
            phi: get(&self.phi),
        }
        .with_objective_check(self.lambda_shed, self.lambda_over)
    }

    /// Writes the trivial all-shed point into `values`.
    pub fn write_trivial(&self, values: &mut [f64], alpha: &[f64], beta: &[f64]) {
        for (v, &a) in self.alpha.iter().zip(alpha) {
            values[v.0] = a;
        }
        for (v, &b) in self.beta.iter().zip(beta) {
            values[v.0] = b;
        }
        values[self.chi.0] = 1.0;
        for v in self
            .delta
            .iter()
            .chain(&self.p_gen)
            .chain(&self.q_gen)
            .chain(&self.p_over)
            .chain(&self.p_flow)
            .chain(&self.q_flow)
            .chain(&self.theta)
            .chain(&self.sin)
            .chain(&self.phi)
        {
            values[v.0] = 0.0;
        }
        for v in &self.cos {
            values[v.0] = 1.0;
        }
    }
}

impl RecourseSolution {
    fn with_objective_check(self, lambda_shed: f64, lambda_over: f64) -> Self {
        debug_assert!(
            (self.objective - (lambda_shed * self.load_shed + lambda_over * self.overgeneration)).abs() <= 1e-9 * (1.0 + self.objective.abs()),
            "objective {} does not match shed {} and overgeneration {}",
            self.objective,
            self.load_shed,
            self.overgeneration
        );
        self
    }
}

impl RecourseModel {
    /// Point with `chi = 1`, nothing generated, served or flowing.
    pub fn trivial_point(&self, plan: &MitigationPlan, xi: &IndicatorMatrix, case: &GridCase) -> Vec<f64> {
        let mut values: Vec<f64> = self.model.vars.iter().map(|v| if v.lb.is_finite() { v.lb } else { 0.0 }).collect();
        if let Some(xv) = &self.x {
            xv.write(&mut values, plan);
        }
        let st = component_status(plan, xi, case);
        self.block.write_trivial(&mut values, &st.alpha_f64(), &st.beta_f64());
        values
    }
}

/// The trivial solution of the recourse problem.
pub fn trivial_solution(case: &GridCase, xi: &IndicatorMatrix, plan: &MitigationPlan) -> RecourseSolution {
    let st = component_status(plan, xi, case);
    let total = case.total_load();
    let nl = case.loads().len();
    let ng = case.generators().len();
    RecourseSolution {
        objective: case.config().lambda_shed * total,
        load_shed: total,
        overgeneration: 0.0,
        chi: true,
        alpha: st.alpha_f64(),
        beta: st.beta_f64(),
        delta: vec![0.0; nl],
        p_gen: vec![0.0; ng],
        q_gen: vec![0.0; ng],
        p_over: vec![0.0; ng],
        p_flow: vec![0.0; case.branches().len()],
        q_flow: vec![0.0; case.branches().len()],
        theta: vec![0.0; case.buses().len()],
        sin: vec![0.0; case.edges().len()],
        cos: vec![1.0; case.edges().len()],
        phi: vec![0.0; case.buses().len()],
    }
}

/// Solves a standalone recourse model to optimality.
pub fn solve_recourse(rm: &RecourseModel, engine: &EngineConfig) -> Result<RecourseSolution> {
    let res = engine::solve(&rm.model, engine, None)?;
    match res.status {
        SolveStatus::Optimal => Ok(rm.block.extract(&res.values)),
        SolveStatus::Infeasible => Err(Error::solver("recourse model is infeasible", None)),
        SolveStatus::CapReached => Err(Error::solver("engine cap reached", res.has_incumbent().then_some(res.objective))),
    }
}
