//! Small built-in cases: the two-substation toy and seeded random instances.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::grid::{
    Branch, Bus, CaseData, Config, FloodScenario, Generator, GridCase, Load, ScenarioSet, SizeClass, Substation,
    DEFAULT_THRESHOLDS,
};

fn bus(id: &str, k: &str, reference: bool) -> Bus {
    Bus { id: id.into(), substation_id: k.into(), v_target: 1.0, v_min: 0.9, v_max: 1.1, is_reference: reference }
}

fn substation(id: &str, buses: &[&str], size_class: SizeClass) -> Substation {
    Substation { id: id.into(), bus_ids: buses.iter().map(|b| b.to_string()).collect(), size_class }
}

/// Two small substations joined by one lossless branch: `k1` holds a
/// generator in `[0.1, 1.0]` and the reference bus, `k2` a 0.5 pu load.
pub fn toy_case() -> GridCase {
    GridCase::new(toy_data()).expect("toy case is valid")
}

pub fn toy_data() -> CaseData {
    CaseData {
        substations: vec![substation("k1", &["b1"], SizeClass::Small), substation("k2", &["b2"], SizeClass::Small)],
        buses: vec![bus("b1", "k1", true), bus("b2", "k2", false)],
        branches: vec![Branch { id: "l1".into(), from_bus: "b1".into(), to_bus: "b2".into(), b: -10.0, g: 0.0, s_max: 1.0 }],
        generators: vec![Generator { id: "g1".into(), bus_id: "b1".into(), p_min: 0.1, p_max: 1.0, q_min: 0.0, q_max: 0.0 }],
        loads: vec![Load { id: "d1".into(), bus_id: "b2".into(), p_load: 0.5, q_load: 0.0 }],
        config: Config::default(),
    }
}

/// The toy with reactive support and a 1.2 + 0.4j load, so the apparent
/// power disc binds and the LPAC variants differ.
pub fn qpac_toy_case() -> GridCase {
    let mut data = toy_data();
    data.generators[0].p_max = 2.0;
    data.generators[0].q_min = -0.5;
    data.generators[0].q_max = 0.5;
    data.loads[0].p_load = 1.2;
    data.loads[0].q_load = 0.4;
    GridCase::new(data).expect("toy variant is valid")
}

fn scenario(id: &str, prob: f64, depths: &[(&str, f64)]) -> FloodScenario {
    FloodScenario {
        id: id.into(),
        prob,
        depths: depths.iter().map(|&(k, d)| (k.to_string(), d)).collect::<BTreeMap<_, _>>(),
    }
}

/// Two equiprobable scenarios: `k1` under 0.8 m, or `k2` under 0.3 m.
pub fn toy_scenarios() -> ScenarioSet {
    ScenarioSet {
        thresholds: DEFAULT_THRESHOLDS.to_vec(),
        scenarios: vec![scenario("w1", 0.5, &[("k1", 0.8)]), scenario("w2", 0.5, &[("k2", 0.3)])],
    }
}

/// A single scenario flooding `k2` to level 1.
pub fn toy_load_flood() -> ScenarioSet {
    ScenarioSet { thresholds: DEFAULT_THRESHOLDS.to_vec(), scenarios: vec![scenario("w", 1.0, &[("k2", 0.3)])] }
}

/// A generator substation feeding two load substations over separate
/// branches. With equal loads, both single-resource plans tie.
pub fn star_case(load_a: f64, load_b: f64) -> GridCase {
    let data = CaseData {
        substations: vec![
            substation("kg", &["bg"], SizeClass::Small),
            substation("ka", &["ba"], SizeClass::Small),
            substation("kb", &["bb"], SizeClass::Small),
        ],
        buses: vec![bus("bg", "kg", true), bus("ba", "ka", false), bus("bb", "kb", false)],
        branches: vec![
            Branch { id: "la".into(), from_bus: "bg".into(), to_bus: "ba".into(), b: -10.0, g: 0.0, s_max: 1.0 },
            Branch { id: "lb".into(), from_bus: "bg".into(), to_bus: "bb".into(), b: -10.0, g: 0.0, s_max: 1.0 },
        ],
        generators: vec![Generator { id: "g".into(), bus_id: "bg".into(), p_min: 0.0, p_max: 2.0, q_min: 0.0, q_max: 0.0 }],
        loads: vec![
            Load { id: "da".into(), bus_id: "ba".into(), p_load: load_a, q_load: 0.0 },
            Load { id: "db".into(), bus_id: "bb".into(), p_load: load_b, q_load: 0.0 },
        ],
        config: Config::default(),
    };
    GridCase::new(data).expect("star case is valid")
}

/// Both load substations of [`star_case`] flooded to level 1.
pub fn star_scenarios() -> ScenarioSet {
    ScenarioSet {
        thresholds: DEFAULT_THRESHOLDS.to_vec(),
        scenarios: vec![scenario("w", 1.0, &[("ka", 0.3), ("kb", 0.3)])],
    }
}

/// Bounds on the size of [`random_instance`] outputs.
#[derive(Debug, Clone, Copy)]
pub struct RandomSpec {
    pub max_substations: usize,
    pub max_scenarios: usize,
    pub lossy: bool,
}

impl Default for RandomSpec {
    fn default() -> Self {
        Self { max_substations: 4, max_scenarios: 3, lossy: false }
    }
}

/// A connected random grid with one bus per substation (occasionally two)
/// and a matching random scenario set. Deterministic in `seed`.
pub fn random_instance(seed: u64, spec: RandomSpec) -> (GridCase, ScenarioSet) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ks = rng.gen_range(2..=spec.max_substations.max(2));
    let mut substations = Vec::new();
    let mut buses = Vec::new();
    for k in 0..ks {
        let nb = if rng.gen_bool(0.2) { 2 } else { 1 };
        let ids: Vec<String> = (0..nb).map(|i| format!("b{k}_{i}")).collect();
        let size_class = match rng.gen_range(0..10) {
            0..=6 => SizeClass::Small,
            7..=8 => SizeClass::Medium,
            _ => SizeClass::Large,
        };
        for id in &ids {
            let v_target = if spec.lossy { rng.gen_range(0.97..1.03) } else { 1.0 };
            buses.push(Bus {
                id: id.clone(),
                substation_id: format!("k{k}"),
                v_target,
                v_min: 0.9,
                v_max: 1.1,
                is_reference: buses.is_empty(),
            });
        }
        substations.push(Substation { id: format!("k{k}"), bus_ids: ids, size_class });
    }

    let n = buses.len();
    let mut branches = Vec::new();
    let add_branch = |rng: &mut ChaCha8Rng, a: usize, b: usize, branches: &mut Vec<Branch>| {
        let g = if spec.lossy { rng.gen_range(0.0..2.0) } else { 0.0 };
        branches.push(Branch {
            id: format!("l{}", branches.len()),
            from_bus: buses[a].id.clone(),
            to_bus: buses[b].id.clone(),
            b: -rng.gen_range(5.0..20.0),
            g,
            s_max: [0.5, 1.0, 2.0][rng.gen_range(0..3)],
        });
    };
    for i in 1..n {
        let j = rng.gen_range(0..i);
        add_branch(&mut rng, j, i, &mut branches);
    }
    if n >= 3 && rng.gen_bool(0.5) {
        let a = rng.gen_range(0..n);
        let b = (a + rng.gen_range(1..n)) % n;
        add_branch(&mut rng, a, b, &mut branches);
    }

    let mut generators = Vec::new();
    let mut loads = Vec::new();
    let gen_count = rng.gen_range(1..=2.min(n));
    for (g, i) in rand::seq::index::sample(&mut rng, n, gen_count).into_iter().enumerate() {
        let p_max = rng.gen_range(0.5..2.0);
        let p_min = if rng.gen_bool(0.5) { rng.gen_range(0.0..0.3) } else { 0.0 };
        let q = if spec.lossy { rng.gen_range(0.2..1.0) } else { 0.0 };
        generators.push(Generator { id: format!("g{g}"), bus_id: buses[i].id.clone(), p_min, p_max, q_min: -q, q_max: q });
    }
    for (i, b) in buses.iter().enumerate() {
        if generators.iter().any(|g| g.bus_id == b.id) && rng.gen_bool(0.7) {
            continue;
        }
        let p_load = (rng.gen_range(0.1..1.0f64) * 100.0).round() / 100.0;
        let q_load = if spec.lossy { p_load * rng.gen_range(0.0..0.3) } else { 0.0 };
        loads.push(Load { id: format!("d{i}"), bus_id: b.id.clone(), p_load, q_load });
    }
    if loads.is_empty() {
        loads.push(Load { id: "d".into(), bus_id: buses[n - 1].id.clone(), p_load: 0.4, q_load: 0.0 });
    }

    let data = CaseData { substations, buses, branches, generators, loads, config: Config::default() };
    let case = GridCase::new(data).expect("random case is valid");

    let ns = rng.gen_range(1..=spec.max_scenarios.max(1));
    let equiprobable = rng.gen_bool(0.5);
    let mut weights: Vec<f64> = (0..ns).map(|_| if equiprobable { 1.0 } else { rng.gen_range(0.2..1.0) }).collect();
    let total: f64 = weights.iter().sum();
    weights.iter_mut().for_each(|w| *w /= total);
    if !equiprobable {
        let head: f64 = weights[..ns - 1].iter().sum();
        weights[ns - 1] = 1.0 - head;
    }
    const DEPTHS: [f64; 5] = [0.0, 0.3, 0.7, 0.9, 1.3];
    let scenarios = weights
        .into_iter()
        .enumerate()
        .map(|(w, prob)| {
            let depths = (0..ks)
                .filter_map(|k| {
                    let d = if rng.gen_bool(0.5) { 0.0 } else { DEPTHS[rng.gen_range(1..DEPTHS.len())] };
                    (d > 0.0).then(|| (format!("k{k}"), d))
                })
                .collect();
            FloodScenario { id: format!("w{w}"), prob, depths }
        })
        .collect();
    (case, ScenarioSet { thresholds: DEFAULT_THRESHOLDS.to_vec(), scenarios })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn random_instances_validate() {
        for seed in 0..200 {
            let (case, set) = random_instance(seed, RandomSpec { lossy: seed % 2 == 0, ..Default::default() });
            set.validate_for(&case).unwrap();
            assert!(case.substations().len() <= 4);
            assert!(set.scenarios.len() <= 3);
        }
    }

    #[test]
    fn random_instances_are_reproducible() {
        let a = random_instance(7, RandomSpec::default());
        let b = random_instance(7, RandomSpec::default());
        assert_eq!(a.0, b.0);
        assert_eq!(a.1, b.1);
    }
}
