//! Big-M constants for the switched Ohm's law constraints.
//!
//! Each constant is stored as the interval `[lo, hi]` that the Ohm
//! right-hand side can take on an open edge. Constraints are emitted as
//! `lo (1 - beta) <= rhs <= hi (1 - beta)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::geometry::PfVariant;
use crate::grid::{Branch, Bus, Config, GridCase};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const ZERO: Interval = Interval { lo: 0.0, hi: 0.0 };

    /// Range of `coef * y` for `y` in `[a, b]`.
    pub fn scaled(coef: f64, a: f64, b: f64) -> Self {
        let (x, y) = (coef * a, coef * b);
        Interval { lo: x.min(y), hi: x.max(y) }
    }

    pub fn point(v: f64) -> Self {
        Interval { lo: v, hi: v }
    }

    pub fn contains(&self, v: f64, tol: f64) -> bool {
        v >= self.lo - tol && v <= self.hi + tol
    }

    /// Distance by which `v` lies outside, zero when inside.
    pub fn excess(&self, v: f64) -> f64 {
        (self.lo - v).max(v - self.hi).max(0.0)
    }
}

impl std::ops::Add for Interval {
    type Output = Interval;
    fn add(self, o: Interval) -> Interval {
        Interval { lo: self.lo + o.lo, hi: self.hi + o.hi }
    }
}

/// Range of `-b sin` with `sin` free in `[-2 theta_max, 2 theta_max]`.
pub fn dc_big_m(branch: &Branch, config: &Config) -> Interval {
    let r = 2.0 * config.theta_max * branch.b.abs();
    Interval { lo: -r, hi: r }
}

/// Active Ohm right-hand side without the flow term, for the directed
/// branch `n -> m`.
pub fn lpac_active_rhs(vn: f64, vm: f64, g: f64, b: f64, chi: f64, cos: f64, sin: f64) -> f64 {
    vn * g * (vm - vn) * chi + vn * vn * g - vn * vm * (g * cos + b * sin)
}

/// Reactive Ohm right-hand side without the flow term.
#[allow(clippy::too_many_arguments)]
pub fn lpac_reactive_rhs(vn: f64, vm: f64, g: f64, b: f64, chi: f64, cos: f64, sin: f64, phi_n: f64, phi_m: f64) -> f64 {
    vn * b * (vn - vm) * chi - vn * vn * b - vn * vm * (g * sin - b * cos) - vn * b * (phi_n - phi_m) - (vn - vm) * b * phi_n
}

/// Boxes of the variables appearing in the Ohm right-hand sides on an open edge.
#[derive(Debug, Clone, Copy)]
pub struct OpenBox {
    pub sin: (f64, f64),
    pub cos: (f64, f64),
    pub phi_n: (f64, f64),
    pub phi_m: (f64, f64),
}

impl OpenBox {
    pub fn new(from: &Bus, to: &Bus, variant: PfVariant, config: &Config) -> Self {
        let s = 2.0 * config.theta_max;
        let cos = if matches!(variant, PfVariant::LpacF | PfVariant::Qpac) {
            (config.theta_delta_max.cos(), 1.0)
        } else {
            (1.0, 1.0)
        };
        OpenBox {
            sin: (-s, s),
            cos,
            phi_n: (from.v_min - from.v_target, from.v_max - from.v_target),
            phi_m: (to.v_min - to.v_target, to.v_max - to.v_target),
        }
    }
}

/// Active and reactive intervals of one directed branch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LpacBigM {
    pub p: Interval,
    pub q: Interval,
}

/// Termwise extrema of the LPAC right-hand sides for `n -> m`.
pub fn lpac_big_m(branch: &Branch, from: &Bus, to: &Bus, variant: PfVariant, config: &Config) -> LpacBigM {
    let (vn, vm, g, b) = (from.v_target, to.v_target, branch.g, branch.b);
    let bx = OpenBox::new(from, to, variant, config);
    let p = Interval::scaled(vn * g * (vm - vn), 0.0, 1.0)
        + Interval::point(vn * vn * g)
        + Interval::scaled(-vn * vm * g, bx.cos.0, bx.cos.1)
        + Interval::scaled(-vn * vm * b, bx.sin.0, bx.sin.1);
    let q = Interval::scaled(vn * b * (vn - vm), 0.0, 1.0)
        + Interval::point(-vn * vn * b)
        + Interval::scaled(-vn * vm * g, bx.sin.0, bx.sin.1)
        + Interval::scaled(vn * vm * b, bx.cos.0, bx.cos.1)
        + Interval::scaled(-b * (2.0 * vn - vm), bx.phi_n.0, bx.phi_n.1)
        + Interval::scaled(vn * b, bx.phi_m.0, bx.phi_m.1);
    LpacBigM { p, q }
}

/// Constants for every branch. `lpac[0]` is the from-to direction,
/// `lpac[1]` the reverse.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BranchBigM {
    pub dc: Interval,
    pub lpac: [LpacBigM; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BigMSet {
    pub variant: PfVariant,
    pub branches: Vec<BranchBigM>,
}

pub fn calibrate(case: &GridCase, variant: PfVariant) -> BigMSet {
    let cfg = case.config();
    let branches = case
        .branches()
        .iter()
        .enumerate()
        .map(|(l, br)| {
            let (f, t) = case.branch_ends(l);
            let (bf, bt) = (&case.buses()[f], &case.buses()[t]);
            BranchBigM {
                dc: dc_big_m(br, cfg),
                lpac: [lpac_big_m(br, bf, bt, variant, cfg), lpac_big_m(br, bt, bf, variant, cfg)],
            }
        })
        .collect();
    BigMSet { variant, branches }
}

/// One line of the sampling audit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditRow {
    pub branch: String,
    pub variant: String,
    /// `dc`, or `p`/`q` followed by `ft`/`tf` for the direction.
    pub kind: String,
    pub lo: f64,
    pub hi: f64,
    pub sampled_min: f64,
    pub sampled_max: f64,
    /// Largest distance of a sample outside `[lo, hi]`; 0 when valid.
    pub max_violation: f64,
}

fn audit_row(branch: &str, variant: PfVariant, kind: &str, iv: Interval, samples: impl Iterator<Item = f64>) -> AuditRow {
    let (mut mn, mut mx, mut viol) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64);
    for v in samples {
        mn = mn.min(v);
        mx = mx.max(v);
        viol = viol.max(iv.excess(v));
    }
    AuditRow {
        branch: branch.to_string(),
        variant: variant.name().to_string(),
        kind: kind.to_string(),
        lo: iv.lo,
        hi: iv.hi,
        sampled_min: mn,
        sampled_max: mx,
        max_violation: viol,
    }
}

/// Evaluate every right-hand side at `samples` random points of its open
/// box and report how far outside the calibrated interval any landed.
pub fn audit(case: &GridCase, variant: PfVariant, samples: usize, seed: u64) -> Vec<AuditRow> {
    let cfg = case.config();
    let set = calibrate(case, variant);
    let mut rows = Vec::new();
    for (l, br) in case.branches().iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (l as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
        let (f, t) = case.branch_ends(l);
        if variant == PfVariant::Dc {
            let s = 2.0 * cfg.theta_max;
            let it = (0..samples).map(|_| -br.b * rng.gen_range(-s..=s));
            rows.push(audit_row(&br.id, variant, "dc", set.branches[l].dc, it));
            continue;
        }
        for (dir, (n, m), name) in [(0usize, (f, t), "ft"), (1, (t, f), "tf")] {
            let (bn, bm) = (&case.buses()[n], &case.buses()[m]);
            let bx = OpenBox::new(bn, bm, variant, cfg);
            let mut pts = Vec::with_capacity(samples);
            for _ in 0..samples {
                let chi = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
                let cos = rng.gen_range(bx.cos.0..=bx.cos.1);
                let sin = rng.gen_range(bx.sin.0..=bx.sin.1);
                let pn = rng.gen_range(bx.phi_n.0..=bx.phi_n.1);
                let pm = rng.gen_range(bx.phi_m.0..=bx.phi_m.1);
                pts.push((chi, cos, sin, pn, pm));
            }
            let (vn, vm) = (bn.v_target, bm.v_target);
            let mb = set.branches[l].lpac[dir];
            rows.push(audit_row(
                &br.id,
                variant,
                &format!("p{name}"),
                mb.p,
                pts.iter().map(|&(chi, cos, sin, _, _)| lpac_active_rhs(vn, vm, br.g, br.b, chi, cos, sin)),
            ));
            rows.push(audit_row(
                &br.id,
                variant,
                &format!("q{name}"),
                mb.q,
                pts.iter().map(|&(chi, cos, sin, pn, pm)| lpac_reactive_rhs(vn, vm, br.g, br.b, chi, cos, sin, pn, pm)),
            ));
        }
    }
    rows
}
