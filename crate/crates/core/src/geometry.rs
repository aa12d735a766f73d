//! Sine, cosine and disc relaxation geometry for the recourse models, and
//! the minimax placement of cosine tangent points.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Line tangent to `cos` at `theta_hat`, evaluated at `theta`.
pub fn b1(theta: f64, theta_hat: f64) -> f64 {
    (theta_hat - theta) * theta_hat.sin() + theta_hat.cos()
}

/// Quadratic upper bound on `cos` through `(±theta_delta_max, cos theta_delta_max)` and `(0, 1)`.
pub fn b2(theta: f64, theta_delta_max: f64) -> f64 {
    1.0 - b2_coefficient(theta_delta_max) * theta * theta
}

/// `k` in `b2(theta) = 1 - k theta^2`.
pub fn b2_coefficient(theta_delta_max: f64) -> f64 {
    (1.0 - theta_delta_max.cos()) / (theta_delta_max * theta_delta_max)
}

/// Where the tangents at `a` and `b` cross, and the common value there.
pub fn intersection(a: f64, b: f64) -> Result<(f64, f64)> {
    let (sa, ca) = a.sin_cos();
    let (sb, cb) = b.sin_cos();
    let den = sa - sb;
    if den.abs() <= 1e-14 * (1.0 + sa.abs().max(sb.abs())) {
        return Err(Error::Degenerate(format!("tangents at {a} and {b} are parallel")));
    }
    let theta = (a * sa - b * sb + ca - cb) / den;
    let value = (sa * cb - ca * sb - (a - b) * sa * sb) / den;
    Ok((theta, value))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentSet {
    pub points: Vec<f64>,
    pub theta_delta_max: f64,
}

impl TangentSet {
    /// Lowest tangent at `theta`.
    pub fn envelope(&self, theta: f64) -> f64 {
        self.points.iter().map(|&h| b1(theta, h)).fold(f64::INFINITY, f64::min)
    }

    pub fn error_at(&self, theta: f64) -> f64 {
        self.envelope(theta) - theta.cos()
    }
}

/// Worst gap between the tangent envelope and `cos` on
/// `[-theta_delta_max, theta_delta_max]`, taken over the interval ends and
/// the crossings of adjacent tangents.
pub fn max_relax_error(tangents: &TangentSet) -> f64 {
    let d = tangents.theta_delta_max;
    let mut worst = tangents.error_at(-d).max(tangents.error_at(d));
    for w in tangents.points.windows(2) {
        if let Ok((theta, _)) = intersection(w[0], w[1]) {
            if (-d..=d).contains(&theta) {
                worst = worst.max(tangents.error_at(theta));
            }
        }
    }
    worst
}

/// `T` points evenly spaced across `[-theta_delta_max, theta_delta_max]`.
pub fn equidistant_tangent_points(t: usize, theta_delta_max: f64) -> Result<TangentSet> {
    if t < 2 {
        return Err(Error::Input(format!("equidistant tangent sets need T >= 2 (got {t})")));
    }
    let points = (1..=t)
        .map(|i| (2.0 * i as f64 - t as f64 - 1.0) / (t as f64 - 1.0) * theta_delta_max)
        .collect();
    Ok(TangentSet { points, theta_delta_max })
}

fn pair_error(a: f64, b: f64) -> f64 {
    match intersection(a, b) {
        Ok((theta, value)) => value - theta.cos(),
        Err(_) => 0.0,
    }
}

/// Largest `x` in `[lo, hi]` with `f(x) <= z`, for `f` nondecreasing.
fn last_below(lo: f64, hi: f64, z: f64, f: impl Fn(f64) -> f64) -> f64 {
    if f(hi) <= z {
        return hi;
    }
    let (mut a, mut b) = (lo, hi);
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if m <= a || m >= b {
            break;
        }
        if f(m) <= z {
            a = m;
        } else {
            b = m;
        }
    }
    a
}

/// Place points left to right, each as far as the error level `z` allows.
fn greedy_cover(t: usize, d: f64, z: f64) -> (bool, Vec<f64>) {
    let mut pts = vec![last_below(-d, d, z, |h| b1(-d, h) - d.cos())];
    while pts.len() < t {
        let a = *pts.last().unwrap();
        let next = if a >= d { d } else { last_below(a, d, z, |h| pair_error(a, h)) };
        pts.push(next);
    }
    let ok = b1(d, pts[t - 1]) - d.cos() <= z;
    (ok, pts)
}

/// Tangent points that minimize [`max_relax_error`].
///
/// Bisects on the error level; at each level a left-to-right greedy cover
/// decides feasibility. The result is symmetrized and then checked by
/// moving each point by `±1e-4`.
pub fn optimal_tangent_points(t: usize, theta_delta_max: f64) -> Result<TangentSet> {
    if t == 0 {
        return Err(Error::Input("tangent sets need T >= 1".into()));
    }
    if !(theta_delta_max > 0.0 && theta_delta_max < PI / 2.0 + 1e-12) {
        return Err(Error::Input(format!("theta_delta_max must lie in (0, pi/2] (got {theta_delta_max})")));
    }
    let d = theta_delta_max;
    let (mut lo, mut hi) = (0.0, 1.0 - d.cos() + (d * d.sin()).abs() + 1.0);
    let mut best = greedy_cover(t, d, hi).1;
    const MAX_ITER: usize = 400;
    let mut iter = 0;
    while hi - lo > 1e-15 * hi.max(1e-300) && iter < MAX_ITER {
        let z = 0.5 * (lo + hi);
        if z <= lo || z >= hi {
            break;
        }
        let (ok, pts) = greedy_cover(t, d, z);
        if ok {
            hi = z;
            best = pts;
        } else {
            lo = z;
        }
        iter += 1;
    }

    let mut points = best.clone();
    for i in 0..t / 2 {
        let j = t - 1 - i;
        let m = 0.5 * (points[j] - points[i]);
        points[i] = -m;
        points[j] = m;
    }
    if t % 2 == 1 {
        points[t / 2] = 0.0;
    }
    let set = TangentSet { points, theta_delta_max };
    let err = max_relax_error(&set);

    for i in 0..t {
        for step in [-1e-4, 1e-4] {
            let mut moved = set.clone();
            moved.points[i] = (moved.points[i] + step).clamp(-d, d);
            moved.points.sort_by(f64::total_cmp);
            if max_relax_error(&moved) < err - 1e-12 {
                return Err(Error::NoConvergence { iterations: iter, best_error: err, best: set.points });
            }
        }
    }
    Ok(set)
}

/// Relaxation flavour of the recourse problem.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PfVariant {
    #[serde(rename = "DC")]
    Dc,
    #[serde(rename = "LPAC-C")]
    LpacC,
    #[serde(rename = "LPAC-F")]
    LpacF,
    #[serde(rename = "QPAC")]
    Qpac,
}

impl PfVariant {
    pub const ALL: [PfVariant; 4] = [PfVariant::Dc, PfVariant::LpacC, PfVariant::LpacF, PfVariant::Qpac];

    pub fn name(self) -> &'static str {
        match self {
            PfVariant::Dc => "DC",
            PfVariant::LpacC => "LPAC-C",
            PfVariant::LpacF => "LPAC-F",
            PfVariant::Qpac => "QPAC",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().replace('_', "-").as_str() {
            "DC" => Ok(PfVariant::Dc),
            "LPAC-C" => Ok(PfVariant::LpacC),
            "LPAC-F" => Ok(PfVariant::LpacF),
            "QPAC" => Ok(PfVariant::Qpac),
            _ => Err(Error::Input(format!("unknown power flow variant '{s}'"))),
        }
    }

    pub fn is_lpac(self) -> bool {
        self != PfVariant::Dc
    }
}

impl std::fmt::Display for PfVariant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Cosine relaxation of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum CosModel {
    /// `cos` fixed to 1.
    Unit,
    /// Tangent lines at these points.
    Tangents(TangentSet),
    /// `cos <= 1 - k theta^2`.
    Quadratic { k: f64 },
}

/// Apparent-power limit of one variant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum DiscModel {
    Polygon(Vec<f64>),
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariantGeometry {
    pub variant: PfVariant,
    pub cos: CosModel,
    pub disc: DiscModel,
}

/// Angles `t 2pi / n`, `t = 1..n`.
pub fn regular_polygon(n: usize) -> Vec<f64> {
    (1..=n).map(|t| t as f64 * 2.0 * PI / n as f64).collect()
}

impl VariantGeometry {
    pub fn new(variant: PfVariant, theta_delta_max: f64, t_cos: usize) -> Result<Self> {
        Ok(match variant {
            PfVariant::Dc | PfVariant::LpacC => {
                VariantGeometry { variant, cos: CosModel::Unit, disc: DiscModel::Polygon(regular_polygon(4)) }
            }
            PfVariant::LpacF => VariantGeometry {
                variant,
                cos: CosModel::Tangents(optimal_tangent_points(t_cos, theta_delta_max)?),
                disc: DiscModel::Polygon(regular_polygon(12)),
            },
            PfVariant::Qpac => VariantGeometry {
                variant,
                cos: CosModel::Quadratic { k: b2_coefficient(theta_delta_max) },
                disc: DiscModel::Exact,
            },
        })
    }

    /// Range of the cosine variable on an open edge.
    pub fn cos_range(&self, theta_delta_max: f64) -> (f64, f64) {
        match self.cos {
            CosModel::Unit => (1.0, 1.0),
            _ => (theta_delta_max.cos(), 1.0),
        }
    }
}

/// One disc halfplane `a p + b q <= rhs_factor * beta`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Halfplane {
    pub a: f64,
    pub b: f64,
    pub rhs_factor: f64,
}

impl Halfplane {
    pub fn slack(&self, p: f64, q: f64, beta: f64) -> f64 {
        self.rhs_factor * beta - (self.a * p + self.b * q)
    }
}

pub fn disc_halfplanes(angles: &[f64], s_max: f64) -> Vec<Halfplane> {
    angles.iter().map(|&t| Halfplane { a: t.cos(), b: t.sin(), rhs_factor: s_max }).collect()
}

/// Samples `(theta, cos, envelope, b2)` on an even grid over the tangent
/// set's interval.
pub fn envelope_samples(tangents: &TangentSet, n: usize) -> Vec<[f64; 4]> {
    let d = tangents.theta_delta_max;
    (0..n)
        .map(|i| {
            let theta = -d + 2.0 * d * i as f64 / (n.max(2) - 1) as f64;
            [theta, theta.cos(), tangents.envelope(theta), b2(theta, d)]
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4, FRAC_PI_6};

    #[test]
    fn b1_examples() {
        assert_eq!(b1(0.0, 0.0), 1.0);
        assert!((b1(0.7, 0.7) - 0.764_842_187_284_488_5).abs() < 1e-15);
        assert_eq!(b1(FRAC_PI_2, 0.0), 1.0);
    }

    #[test]
    fn b2_examples() {
        assert_eq!(b2(0.0, FRAC_PI_2), 1.0);
        assert!(b2(FRAC_PI_2, FRAC_PI_2).abs() < 1e-15);
        assert!((b2(FRAC_PI_4, FRAC_PI_2) - 0.75).abs() < 1e-15);
        assert!(b2(FRAC_PI_4, FRAC_PI_2) >= FRAC_PI_4.cos());
    }

    #[test]
    fn intersection_examples() {
        let a = FRAC_PI_4;
        let (theta, value) = intersection(-a, a).unwrap();
        assert!(theta.abs() < 1e-15);
        assert!((value - (a * a.sin() + a.cos())).abs() < 1e-15);
        assert!((value - 1.262_467_148_5).abs() < 1e-9);

        assert!(matches!(intersection(0.3, 0.3), Err(Error::Degenerate(_))));

        let (theta, value) = intersection(0.0, FRAC_PI_3).unwrap();
        assert!((b1(theta, 0.0) - b1(theta, FRAC_PI_3)).abs() < 1e-12);
        assert!((value - b1(theta, 0.0)).abs() < 1e-12);
    }

    #[test]
    fn max_error_examples() {
        let single = TangentSet { points: vec![0.0], theta_delta_max: FRAC_PI_2 };
        assert!((max_relax_error(&single) - 1.0).abs() < 1e-15);

        // crossing at 0 dominates: envelope at pi/2 is b1(pi/2; pi/4) ~ 0.1517
        let a = FRAC_PI_4;
        let pair = TangentSet { points: vec![-a, a], theta_delta_max: FRAC_PI_2 };
        let at_zero = a * a.sin() + a.cos() - 1.0;
        let at_end = b1(FRAC_PI_2, a);
        assert!((at_end - 0.151_746_413_9).abs() < 1e-9);
        assert!((max_relax_error(&pair) - at_zero.max(at_end)).abs() < 1e-15);
        assert!((max_relax_error(&pair) - 0.262_467_148_5).abs() < 1e-9);
    }

    #[test]
    fn equidistant_examples() {
        let s = equidistant_tangent_points(7, FRAC_PI_2).unwrap().points;
        let want = [-FRAC_PI_2, -FRAC_PI_3, -FRAC_PI_6, 0.0, FRAC_PI_6, FRAC_PI_3, FRAC_PI_2];
        for (a, b) in s.iter().zip(want) {
            assert!((a - b).abs() < 1e-15);
        }
        assert_eq!(equidistant_tangent_points(2, 0.4).unwrap().points, vec![-0.4, 0.4]);
        assert_eq!(equidistant_tangent_points(3, 1.0).unwrap().points, vec![-1.0, 0.0, 1.0]);
        assert!(equidistant_tangent_points(1, 1.0).is_err());
    }

    #[test]
    fn optimal_seven_points() {
        let s = optimal_tangent_points(7, FRAC_PI_2).unwrap();
        let want = [-1.211, -0.735, -0.354, 0.0, 0.354, 0.735, 1.211];
        for (a, b) in s.points.iter().zip(want) {
            assert!((a - b).abs() < 5e-3, "{:?}", s.points);
        }
    }

    #[test]
    fn optimal_one_point_is_zero() {
        let s = optimal_tangent_points(1, FRAC_PI_2).unwrap();
        assert_eq!(s.points, vec![0.0]);
        // independent sweep: no single point beats 0
        for i in -100..=100 {
            let h = i as f64 * FRAC_PI_2 / 100.0;
            let e = max_relax_error(&TangentSet { points: vec![h], theta_delta_max: FRAC_PI_2 });
            assert!(e >= max_relax_error(&s) - 1e-15);
        }
    }

    #[test]
    fn optimal_two_points_equalize() {
        let s = optimal_tangent_points(2, FRAC_PI_2).unwrap();
        let a = s.points[1];
        assert!((s.points[0] + a).abs() < 1e-15);
        // independent 1-D bisection on a: error at 0 rises with a, error at the ends falls
        let f = |a: f64| (a * a.sin() + a.cos() - 1.0) - b1(FRAC_PI_2, a);
        let (mut lo, mut hi) = (0.0, FRAC_PI_2);
        for _ in 0..200 {
            let m = 0.5 * (lo + hi);
            if f(m) < 0.0 {
                lo = m;
            } else {
                hi = m;
            }
        }
        assert!((a - lo).abs() < 1e-9, "{a} vs {lo}");
    }

    #[test]
    fn optimal_beats_equidistant() {
        for t in [5, 7] {
            let opt = max_relax_error(&optimal_tangent_points(t, FRAC_PI_2).unwrap());
            let eq = max_relax_error(&equidistant_tangent_points(t, FRAC_PI_2).unwrap());
            assert!(opt < eq, "T={t}: {opt} vs {eq}");
        }
    }

    #[test]
    fn candidate_points_match_fine_grid() {
        for t in [2, 3, 5, 7] {
            for set in [optimal_tangent_points(t, FRAC_PI_2).unwrap(), equidistant_tangent_points(t, FRAC_PI_2).unwrap()] {
                let grid = (0..=100_000)
                    .map(|i| set.error_at(-FRAC_PI_2 + PI * i as f64 / 100_000.0))
                    .fold(f64::NEG_INFINITY, f64::max);
                let exact = max_relax_error(&set);
                // the grid misses kinks by at most half a step times the slope (< 1)
                assert!(grid <= exact + 1e-12 && exact - grid < 0.5 * PI / 100_000.0, "T={t}: {exact} vs {grid}");
            }
        }
    }

    #[test]
    fn disc_examples() {
        let square = disc_halfplanes(&regular_polygon(4), 1.0);
        assert_eq!(square.len(), 4);
        for h in &square {
            assert!(h.a.abs() < 1e-15 || h.b.abs() < 1e-15);
        }
        assert!(square.iter().all(|h| h.slack(1.0, 0.0, 1.0) >= -1e-15));

        let dodeca = disc_halfplanes(&regular_polygon(12), 1.0);
        assert_eq!(dodeca.len(), 12);
        let on_boundary = dodeca.iter().map(|h| h.slack(1.0, 0.0, 1.0)).fold(f64::INFINITY, f64::min);
        assert!(on_boundary.abs() < 1e-15);
        assert!(dodeca.iter().any(|h| h.slack(0.8, 0.8, 1.0) < 0.0));
    }

    #[test]
    fn polygons_contain_disc() {
        for n in [4, 6, 12, 24] {
            let hp = disc_halfplanes(&regular_polygon(n), 2.0);
            for h in &hp {
                // the halfplane touches the circle of radius 2 at one point
                assert!((h.slack(2.0 * h.a, 2.0 * h.b, 1.0)).abs() < 1e-12);
            }
            for i in 0..3600 {
                let t = i as f64 * 2.0 * PI / 3600.0;
                assert!(hp.iter().all(|h| h.slack(2.0 * t.cos(), 2.0 * t.sin(), 1.0) >= -1e-12));
            }
        }
    }

    proptest! {
        #[test]
        fn tangent_envelope_dominates_cos(mut pts in proptest::collection::vec(-1.5f64..1.5, 1..9), d in 0.2f64..1.5) {
            pts.sort_by(f64::total_cmp);
            let set = TangentSet { points: pts, theta_delta_max: d };
            for i in 0..=1000 {
                let theta = -d + 2.0 * d * i as f64 / 1000.0;
                prop_assert!(set.error_at(theta) >= -1e-12);
            }
        }

        #[test]
        fn b2_dominates_cos(d in 0.1f64..FRAC_PI_2, u in -1.0f64..1.0) {
            let theta = u * d;
            prop_assert!(b2(theta, d) - theta.cos() >= -1e-12);
        }
    }
}
