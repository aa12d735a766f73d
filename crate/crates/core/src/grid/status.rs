use super::{GridCase, IndicatorMatrix};
use crate::mitigation::MitigationPlan;

/// Operational status of every bus and every edge.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComponentStatus {
    pub alpha: Vec<bool>,
    pub beta: Vec<bool>,
}

impl ComponentStatus {
    pub fn alpha_f64(&self) -> Vec<f64> {
        self.alpha.iter().map(|&a| if a { 1.0 } else { 0.0 }).collect()
    }
    pub fn beta_f64(&self) -> Vec<f64> {
        self.beta.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
    }
}

/// Evaluates `alpha_n = prod_r (1 - xi_kr (1 - x_kr))` and `beta_nm = alpha_n alpha_m`.
pub fn component_status(plan: &MitigationPlan, xi: &IndicatorMatrix, case: &GridCase) -> ComponentStatus {
    let substation_up: Vec<bool> = (0..case.substations().len())
        .map(|k| {
            (1..=xi.levels())
                .map(|r| 1 - u8::from(xi.get(k, r)) * (1 - u8::from(plan.get(k, r))))
                .product::<u8>()
                == 1
        })
        .collect();
    let alpha: Vec<bool> = (0..case.buses().len())
        .map(|n| substation_up[case.bus_substation(n)])
        .collect();
    let beta = case.edges().iter().map(|e| alpha[e.from] && alpha[e.to]).collect();
    ComponentStatus { alpha, beta }
}
