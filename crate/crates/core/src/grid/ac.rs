//! Residuals of the polar AC power-flow equations.
//!
//! Used as a plausibility check on operating points produced by the linear
//! approximations. A full nonlinear AC solve is deliberately outside this
//! crate; anything that produces an [`AcPoint`] can be checked here.

use super::GridCase;
use crate::error::{Error, Result};

/// An operating point. Flows are directed: `*_from` leaves the branch's
/// from-bus, `*_to` leaves its to-bus.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AcPoint {
    pub v: Vec<f64>,
    pub theta: Vec<f64>,
    pub p_gen: Vec<f64>,
    pub q_gen: Vec<f64>,
    /// Fraction of each load that is served.
    pub load_served: Vec<f64>,
    pub p_from: Vec<f64>,
    pub q_from: Vec<f64>,
    pub p_to: Vec<f64>,
    pub q_to: Vec<f64>,
    /// Buses to check; `None` checks every bus. Branches touching an
    /// unchecked bus are skipped.
    pub bus_up: Option<Vec<bool>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AcResiduals {
    pub p_kcl: Vec<f64>,
    pub q_kcl: Vec<f64>,
    pub p_ohm_from: Vec<f64>,
    pub p_ohm_to: Vec<f64>,
    pub q_ohm_from: Vec<f64>,
    pub q_ohm_to: Vec<f64>,
}

impl AcResiduals {
    pub fn flat(&self) -> Vec<f64> {
        [&self.p_kcl, &self.q_kcl, &self.p_ohm_from, &self.p_ohm_to, &self.q_ohm_from, &self.q_ohm_to]
            .into_iter()
            .flatten()
            .copied()
            .collect()
    }

    pub fn max_norm(&self) -> f64 {
        self.flat().into_iter().fold(0.0, |m, r| m.max(r.abs()))
    }
}

/// Active and reactive flow leaving bus `n` towards `m` on a series branch.
pub fn branch_flow(vn: f64, vm: f64, dtheta: f64, g: f64, b: f64) -> (f64, f64) {
    let (s, c) = dtheta.sin_cos();
    let p = vn * vn * g - vn * vm * g * c - vn * vm * b * s;
    let q = -vn * vn * b + vn * vm * b * c - vn * vm * g * s;
    (p, q)
}

pub fn ac_residuals(point: &AcPoint, case: &GridCase) -> Result<AcResiduals> {
    let nb = case.buses().len();
    let nl = case.branches().len();
    let checks: [(&str, usize, usize); 9] = [
        ("v", point.v.len(), nb),
        ("theta", point.theta.len(), nb),
        ("p_gen", point.p_gen.len(), case.generators().len()),
        ("q_gen", point.q_gen.len(), case.generators().len()),
        ("load_served", point.load_served.len(), case.loads().len()),
        ("p_from", point.p_from.len(), nl),
        ("q_from", point.q_from.len(), nl),
        ("p_to", point.p_to.len(), nl),
        ("q_to", point.q_to.len(), nl),
    ];
    for (name, got, want) in checks {
        if got != want {
            return Err(Error::Input(format!("operating point field '{name}' has {got} entries, expected {want}")));
        }
    }
    if let Some(up) = &point.bus_up {
        if up.len() != nb {
            return Err(Error::Input(format!("bus_up has {} entries, expected {nb}", up.len())));
        }
    }
    let up = |n: usize| point.bus_up.as_ref().map_or(true, |u| u[n]);

    let mut p_kcl = vec![0.0; nb];
    let mut q_kcl = vec![0.0; nb];
    for g in 0..case.generators().len() {
        let n = case.gen_bus(g);
        p_kcl[n] += point.p_gen[g];
        q_kcl[n] += point.q_gen[g];
    }
    for (d, load) in case.loads().iter().enumerate() {
        let n = case.load_bus(d);
        p_kcl[n] -= load.p_load * point.load_served[d];
        q_kcl[n] -= load.q_load * point.load_served[d];
    }

    let mut p_ohm_from = vec![0.0; nl];
    let mut p_ohm_to = vec![0.0; nl];
    let mut q_ohm_from = vec![0.0; nl];
    let mut q_ohm_to = vec![0.0; nl];
    for (l, br) in case.branches().iter().enumerate() {
        let (f, t) = case.branch_ends(l);
        p_kcl[f] -= point.p_from[l];
        q_kcl[f] -= point.q_from[l];
        p_kcl[t] -= point.p_to[l];
        q_kcl[t] -= point.q_to[l];
        if !(up(f) && up(t)) {
            continue;
        }
        let dtheta = point.theta[f] - point.theta[t];
        let (pf, qf) = branch_flow(point.v[f], point.v[t], dtheta, br.g, br.b);
        let (pt, qt) = branch_flow(point.v[t], point.v[f], -dtheta, br.g, br.b);
        p_ohm_from[l] = point.p_from[l] - pf;
        q_ohm_from[l] = point.q_from[l] - qf;
        p_ohm_to[l] = point.p_to[l] - pt;
        q_ohm_to[l] = point.q_to[l] - qt;
    }
    for n in 0..nb {
        if !up(n) {
            p_kcl[n] = 0.0;
            q_kcl[n] = 0.0;
        }
    }
    Ok(AcResiduals { p_kcl, q_kcl, p_ohm_from, p_ohm_to, q_ohm_from, q_ohm_to })
}
