//! First-stage decisions: the mitigation plan, its cost, the feasible set,
//! budget thresholds, plan similarity and the no-good cut.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{GridCase, IndicatorMatrix};

/// Marginal resource cost `c[k][r-1]` of raising substation `k` from level
/// `r-1` to level `r`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostTable {
    pub c: Vec<Vec<u32>>,
}

impl CostTable {
    /// Costs grow linearly with the level, scaled by substation size:
    /// small (1, 2, 3), medium (2, 4, 6), large (3, 6, 9).
    pub fn from_case(case: &GridCase, levels: usize) -> Self {
        let c = case
            .substations()
            .iter()
            .map(|s| (1..=levels as u32).map(|r| r * s.size_class.cost_multiplier()).collect())
            .collect();
        Self { c }
    }

    pub fn get(&self, k: usize, r: usize) -> u32 {
        self.c[k][r - 1]
    }

    /// Cost of protecting `k` against every level up to and including `level`.
    pub fn cumulative(&self, k: usize, level: usize) -> u64 {
        self.c[k][..level].iter().map(|&c| u64::from(c)).sum()
    }

    pub fn levels(&self) -> usize {
        self.c.first().map_or(0, Vec::len)
    }
}

/// Binary mitigation matrix `x[k][r-1]`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MitigationPlan {
    pub x: Vec<Vec<bool>>,
}

impl MitigationPlan {
    pub fn empty(substations: usize, levels: usize) -> Self {
        Self { x: vec![vec![false; levels]; substations] }
    }

    /// Plan that protects substation `k` through `levels[k]`.
    pub fn from_levels(levels: &[usize], total_levels: usize) -> Self {
        Self { x: levels.iter().map(|&l| (1..=total_levels).map(|r| r <= l).collect()).collect() }
    }

    pub fn get(&self, k: usize, r: usize) -> bool {
        self.x[k][r - 1]
    }

    pub fn substations(&self) -> usize {
        self.x.len()
    }

    pub fn levels(&self) -> usize {
        self.x.first().map_or(0, Vec::len)
    }

    /// Achieved protection level per substation (count of leading ones).
    pub fn achieved_levels(&self) -> Vec<usize> {
        self.x.iter().map(|row| row.iter().take_while(|&&b| b).count()).collect()
    }

    pub fn flat(&self) -> Vec<bool> {
        self.x.iter().flatten().copied().collect()
    }

    pub fn from_flat(bits: &[bool], levels: usize) -> Self {
        Self { x: bits.chunks(levels).map(<[bool]>::to_vec).collect() }
    }

    pub fn is_empty(&self) -> bool {
        self.x.iter().flatten().all(|&b| !b)
    }

    /// `{substation_id: achieved level}` for every protected substation.
    pub fn to_level_map(&self, case: &GridCase) -> BTreeMap<String, usize> {
        self.achieved_levels()
            .into_iter()
            .enumerate()
            .filter(|&(_, l)| l > 0)
            .map(|(k, l)| (case.substations()[k].id.clone(), l))
            .collect()
    }

    pub fn from_level_map(map: &BTreeMap<String, usize>, case: &GridCase, levels: usize) -> Result<Self> {
        let mut lv = vec![0; case.substations().len()];
        for (id, &l) in map {
            let k = case
                .substation_index(id)
                .ok_or_else(|| Error::Input(format!("plan names unknown substation '{id}'")))?;
            if l >= levels {
                return Err(Error::Input(format!("plan level {l} at '{id}' is not attainable")));
            }
            lv[k] = l;
        }
        Ok(Self::from_levels(&lv, levels))
    }

    /// Compact text form, e.g. `1.0.2`, used in ledgers and hashes.
    pub fn key(&self) -> String {
        self.achieved_levels().iter().map(usize::to_string).collect::<Vec<_>>().join(".")
    }
}

pub fn plan_cost(plan: &MitigationPlan, costs: &CostTable) -> u64 {
    plan.x
        .iter()
        .enumerate()
        .flat_map(|(k, row)| row.iter().enumerate().filter(|(_, &b)| b).map(move |(r, _)| (k, r)))
        .map(|(k, r)| u64::from(costs.c[k][r]))
        .sum()
}

/// Cumulative and inexorable-level rules plus the budget.
pub fn is_feasible(plan: &MitigationPlan, costs: &CostTable, budget: u64) -> bool {
    let cumulative = plan.x.iter().all(|row| row.windows(2).all(|w| w[0] || !w[1]));
    let inexorable = plan.x.iter().all(|row| !row.last().copied().unwrap_or(false));
    cumulative && inexorable && plan_cost(plan, costs) <= budget
}

/// Every feasible plan at `budget`, in lexicographic level order.
pub fn enumerate_plans(costs: &CostTable, budget: u64) -> Vec<MitigationPlan> {
    let ks = costs.c.len();
    let levels = costs.levels();
    let mut out = Vec::new();
    let mut lv = vec![0usize; ks];
    fn rec(k: usize, lv: &mut Vec<usize>, spent: u64, costs: &CostTable, budget: u64, out: &mut Vec<MitigationPlan>) {
        if k == lv.len() {
            out.push(MitigationPlan::from_levels(lv, costs.levels()));
            return;
        }
        for l in 0..costs.levels() {
            let c = spent + costs.cumulative(k, l);
            if c > budget {
                break;
            }
            lv[k] = l;
            rec(k + 1, lv, c, costs, budget, out);
        }
        lv[k] = 0;
    }
    if levels > 0 {
        rec(0, &mut lv, 0, costs, budget, &mut out);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ThresholdKind {
    Sp,
    Eev,
    Ews,
    Mmv,
}

/// Resources needed to protect `k` against all of its flooding in `xi`,
/// or zero when that flooding is inexorable.
pub fn coverage_cost(k: usize, xi: &IndicatorMatrix, costs: &CostTable) -> u64 {
    if xi.inexorable(k) {
        0
    } else {
        costs.cumulative(k, xi.depth_level(k))
    }
}

/// Resources that can usefully be deployed against a single scenario.
pub fn scenario_threshold(xi: &IndicatorMatrix, costs: &CostTable) -> u64 {
    (0..xi.substations()).map(|k| coverage_cost(k, xi, costs)).sum()
}

/// Budget above which the given model cannot improve.
///
/// `scenarios` are the per-scenario indicators; `aggregate` is the EV
/// indicator matrix for [`ThresholdKind::Eev`] and the MV one for
/// [`ThresholdKind::Mmv`] (ignored otherwise).
pub fn budget_threshold(
    kind: ThresholdKind,
    scenarios: &[IndicatorMatrix],
    aggregate: Option<&IndicatorMatrix>,
    costs: &CostTable,
) -> Result<u64> {
    match kind {
        ThresholdKind::Sp => {
            let ks = costs.c.len();
            Ok((0..ks)
                .map(|k| scenarios.iter().map(|xi| coverage_cost(k, xi, costs)).max().unwrap_or(0))
                .sum())
        }
        ThresholdKind::Ews => Ok(scenarios.iter().map(|xi| scenario_threshold(xi, costs)).max().unwrap_or(0)),
        ThresholdKind::Eev | ThresholdKind::Mmv => {
            let xi = aggregate.ok_or_else(|| Error::Input(format!("{kind:?} threshold needs the aggregate scenario")))?;
            Ok(scenario_threshold(xi, costs))
        }
    }
}

/// Cost-weighted overlap `x_A' diag(c) x_B`.
pub fn abs_sim(a: &MitigationPlan, b: &MitigationPlan, costs: &CostTable) -> u64 {
    let mut s = 0;
    for (k, (ra, rb)) in a.x.iter().zip(&b.x).enumerate() {
        for (r, (&xa, &xb)) in ra.iter().zip(rb).enumerate() {
            if xa && xb {
                s += u64::from(costs.c[k][r]);
            }
        }
    }
    s
}

/// Overlap normalized by the costlier of the two plans; two empty plans
/// are identical (1).
pub fn rel_sim(a: &MitigationPlan, b: &MitigationPlan, costs: &CostTable) -> f64 {
    let denom = plan_cost(a, costs).max(plan_cost(b, costs));
    if denom == 0 {
        1.0
    } else {
        abs_sim(a, b, costs) as f64 / denom as f64
    }
}

/// `sum_i coeffs[i] * x_i >= rhs` over the flattened plan vector.
#[derive(Debug, Clone, PartialEq)]
pub struct NoGoodCut {
    pub coeffs: Vec<Vec<f64>>,
    pub rhs: f64,
}

impl NoGoodCut {
    pub fn is_satisfied(&self, plan: &MitigationPlan) -> bool {
        let lhs: f64 = self
            .coeffs
            .iter()
            .flatten()
            .zip(plan.x.iter().flatten())
            .map(|(&c, &x)| if x { c } else { 0.0 })
            .sum();
        lhs >= self.rhs
    }
}

/// `(1 - x*)' x >= 1`. An all-ones `x*` yields an empty left side, which no
/// plan can satisfy, so it is rejected.
pub fn no_good_cut(x_star: &MitigationPlan) -> Result<NoGoodCut> {
    if x_star.x.iter().flatten().all(|&b| b) {
        return Err(Error::Input("no-good cut of the all-ones plan excludes everything".into()));
    }
    let coeffs = x_star.x.iter().map(|row| row.iter().map(|&b| if b { 0.0 } else { 1.0 }).collect()).collect();
    Ok(NoGoodCut { coeffs, rhs: 1.0 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{convert_depths, DEFAULT_THRESHOLDS};
    use proptest::prelude::*;

    fn small(n: usize) -> CostTable {
        CostTable { c: vec![vec![1, 2, 3]; n] }
    }

    fn row(bits: [bool; 3]) -> MitigationPlan {
        MitigationPlan { x: vec![bits.to_vec()] }
    }

    #[test]
    fn plan_cost_examples() {
        let c = small(1);
        assert_eq!(plan_cost(&row([true, false, false]), &c), 1);
        assert_eq!(plan_cost(&row([true, true, false]), &c), 3);
        assert_eq!(plan_cost(&row([false, false, false]), &c), 0);
    }

    #[test]
    fn feasibility_examples() {
        let c = small(1);
        assert!(!is_feasible(&row([false, true, false]), &c, 10));
        assert!(!is_feasible(&row([true, true, true]), &c, 10));
        assert!(is_feasible(&row([true, true, false]), &c, 3));
        assert!(!is_feasible(&row([true, true, false]), &c, 2));
    }

    #[test]
    fn medium_and_large_costs() {
        let case = crate::synthetic::toy_case();
        let mut data = case.data().clone();
        data.substations[0].size_class = crate::grid::SizeClass::Medium;
        data.substations[1].size_class = crate::grid::SizeClass::Large;
        let c = CostTable::from_case(&GridCase::new(data).unwrap(), 3);
        assert_eq!(c.c, vec![vec![2, 4, 6], vec![3, 6, 9]]);
    }

    fn toy_xis() -> Vec<IndicatorMatrix> {
        vec![
            convert_depths(&[0.8, 0.0], &DEFAULT_THRESHOLDS).unwrap(),
            convert_depths(&[0.0, 0.3], &DEFAULT_THRESHOLDS).unwrap(),
        ]
    }

    #[test]
    fn threshold_examples() {
        let c = small(2);
        let xis = toy_xis();
        assert_eq!(budget_threshold(ThresholdKind::Sp, &xis, None, &c).unwrap(), 4);
        assert_eq!(budget_threshold(ThresholdKind::Ews, &xis, None, &c).unwrap(), 3);
        let ev = convert_depths(&[0.4, 0.15], &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(budget_threshold(ThresholdKind::Eev, &xis, Some(&ev), &c).unwrap(), 2);
        assert!(budget_threshold(ThresholdKind::Mmv, &xis, None, &c).is_err());
    }

    #[test]
    fn inexorable_substations_cost_nothing() {
        let c = small(2);
        let mv = convert_depths(&[1.4, 0.3], &DEFAULT_THRESHOLDS).unwrap();
        assert_eq!(budget_threshold(ThresholdKind::Mmv, &[], Some(&mv), &c).unwrap(), 1);
    }

    #[test]
    fn similarity_examples() {
        let c = small(1);
        let a = row([true, false, false]);
        assert_eq!(abs_sim(&a, &a, &c), 1);
        assert_eq!(rel_sim(&a, &a, &c), 1.0);
        let b = row([true, true, false]);
        assert_eq!(abs_sim(&b, &a, &c), 1);
        assert!((rel_sim(&b, &a, &c) - 1.0 / 3.0).abs() < 1e-15);
        let two = small(2);
        let p = MitigationPlan::from_levels(&[1, 0], 3);
        let q = MitigationPlan::from_levels(&[0, 2], 3);
        assert_eq!(abs_sim(&p, &q, &two), 0);
        assert_eq!(rel_sim(&p, &q, &two), 0.0);
        let e = MitigationPlan::empty(2, 3);
        assert_eq!(rel_sim(&e, &e, &two), 1.0);
    }

    #[test]
    fn no_good_cut_examples() {
        let cut = no_good_cut(&MitigationPlan { x: vec![vec![true, false]] }).unwrap();
        assert_eq!(cut.coeffs, vec![vec![0.0, 1.0]]);
        let cut = no_good_cut(&MitigationPlan { x: vec![vec![false, false]] }).unwrap();
        assert_eq!(cut.coeffs, vec![vec![1.0, 1.0]]);
        assert!(no_good_cut(&MitigationPlan { x: vec![vec![true, true]] }).is_err());
    }

    #[test]
    fn enumeration_respects_budget() {
        let c = small(2);
        let plans = enumerate_plans(&c, 1);
        assert_eq!(plans.len(), 3);
        assert!(plans.iter().all(|p| is_feasible(p, &c, 1)));
        assert_eq!(enumerate_plans(&c, 100).len(), 9);
    }

    fn arb_plan(ks: usize) -> impl Strategy<Value = MitigationPlan> {
        proptest::collection::vec(0usize..3, ks).prop_map(|l| MitigationPlan::from_levels(&l, 3))
    }

    proptest! {
        #[test]
        fn similarity_properties(a in arb_plan(3), b in arb_plan(3)) {
            let c = CostTable { c: vec![vec![1, 2, 3], vec![2, 4, 6], vec![3, 6, 9]] };
            prop_assert_eq!(abs_sim(&a, &b, &c), abs_sim(&b, &a, &c));
            prop_assert_eq!(abs_sim(&a, &a, &c), plan_cost(&a, &c));
            prop_assert_eq!(rel_sim(&a, &a, &c), 1.0);
            let r = rel_sim(&a, &b, &c);
            prop_assert!((0.0..=1.0).contains(&r));
        }

        #[test]
        fn budget_monotone_feasibility(a in arb_plan(3), f in 0u64..20, extra in 1u64..5) {
            let c = CostTable { c: vec![vec![1, 2, 3], vec![2, 4, 6], vec![3, 6, 9]] };
            if is_feasible(&a, &c, f) {
                prop_assert!(is_feasible(&a, &c, f + extra));
            }
        }

        #[test]
        fn cut_excludes_only_what_it_should(star in arb_plan(3), other in arb_plan(3)) {
            let cut = no_good_cut(&star).unwrap();
            prop_assert!(!cut.is_satisfied(&star));
            let covers_new = star.x.iter().flatten().zip(other.x.iter().flatten()).any(|(&s, &o)| o && !s);
            prop_assert_eq!(cut.is_satisfied(&other), covers_new);
        }

        #[test]
        fn threshold_orderings(depths in proptest::collection::vec(proptest::collection::vec(0.0f64..1.4, 3), 1..4)) {
            let c = CostTable { c: vec![vec![1, 2, 3], vec![2, 4, 6], vec![3, 6, 9]] };
            let xis: Vec<_> = depths.iter().map(|d| convert_depths(d, &DEFAULT_THRESHOLDS).unwrap()).collect();
            let sp = budget_threshold(ThresholdKind::Sp, &xis, None, &c).unwrap();
            let ews = budget_threshold(ThresholdKind::Ews, &xis, None, &c).unwrap();
            prop_assert!(sp >= ews);
            for xi in &xis {
                prop_assert!(ews >= scenario_threshold(xi, &c));
            }
        }
    }
}
