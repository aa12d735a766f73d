use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GridCase;
use crate::error::{Error, Result};

/// Dam heights (meters) at which resilience levels 1, 2 and 3 begin.
pub const DEFAULT_THRESHOLDS: [f64; 3] = [0.0, 0.534, 1.0];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FloodScenario {
    pub id: String,
    pub prob: f64,
    /// Flood depth per substation id in meters. Missing entries are dry.
    #[serde(default)]
    pub depths: BTreeMap<String, f64>,
}

impl FloodScenario {
    /// Depths ordered by substation index.
    pub fn depth_vector(&self, case: &GridCase) -> Result<Vec<f64>> {
        let mut out = vec![0.0; case.substations().len()];
        for (id, &depth) in &self.depths {
            let k = case
                .substation_index(id)
                .ok_or_else(|| Error::Input(format!("scenario '{}': unknown substation '{id}'", self.id)))?;
            out[k] = depth;
        }
        Ok(out)
    }

    fn from_vector(id: &str, prob: f64, depths: &[f64], case: &GridCase) -> Self {
        let depths = case
            .substations()
            .iter()
            .zip(depths)
            .filter(|(_, &d)| d != 0.0)
            .map(|(s, &d)| (s.id.clone(), d))
            .collect();
        Self { id: id.to_string(), prob, depths }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    /// Ascending depth thresholds `t_1 = 0 < t_2 < ...`; one per flood level.
    pub thresholds: Vec<f64>,
    pub scenarios: Vec<FloodScenario>,
}

impl ScenarioSet {
    pub fn violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.thresholds.is_empty() {
            out.push("scenarios: thresholds must not be empty".to_string());
        } else if self.thresholds[0] != 0.0 {
            out.push(format!("scenarios: first threshold must be 0 (got {})", self.thresholds[0]));
        }
        if self.thresholds.windows(2).any(|w| !(w[0] < w[1])) {
            out.push("scenarios: thresholds must be strictly ascending".to_string());
        }
        if self.scenarios.is_empty() {
            out.push("scenarios: at least one scenario required".to_string());
        }
        let mut total = 0.0;
        for s in &self.scenarios {
            if !(0.0..=1.0).contains(&s.prob) {
                out.push(format!("scenario '{}': probability {} outside [0, 1]", s.id, s.prob));
            }
            total += s.prob;
            for (k, &d) in &s.depths {
                if !(d >= 0.0) || !d.is_finite() {
                    out.push(format!("scenario '{}': depth at '{k}' must be finite and >= 0 (got {d})", s.id));
                }
            }
        }
        if !self.scenarios.is_empty() && (total - 1.0).abs() > 1e-9 {
            out.push(format!("scenarios: probabilities sum to {total}, expected 1"));
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Checks that every depth key names a substation of `case`.
    pub fn validate_for(&self, case: &GridCase) -> Result<()> {
        let mut v = self.violations();
        for s in &self.scenarios {
            for k in s.depths.keys() {
                if case.substation_index(k).is_none() {
                    v.push(format!("scenario '{}': unknown substation '{k}'", s.id));
                }
            }
        }
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Validation(v))
        }
    }

    /// Number of flood levels (the inexorable level is the last).
    pub fn levels(&self) -> usize {
        self.thresholds.len()
    }

    pub fn indicators(&self, case: &GridCase) -> Result<Vec<IndicatorMatrix>> {
        self.scenarios
            .iter()
            .map(|s| convert_depths(&s.depth_vector(case)?, &self.thresholds))
            .collect()
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.scenarios.iter().map(|s| s.prob).collect()
    }
}

/// Flood indicators `xi[k][r-1]`, true when substation `k` floods to level `r`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct IndicatorMatrix {
    pub xi: Vec<Vec<bool>>,
}

impl IndicatorMatrix {
    pub fn dry(substations: usize, levels: usize) -> Self {
        Self { xi: vec![vec![false; levels]; substations] }
    }

    pub fn substations(&self) -> usize {
        self.xi.len()
    }

    pub fn levels(&self) -> usize {
        self.xi.first().map_or(0, Vec::len)
    }

    pub fn get(&self, k: usize, r: usize) -> bool {
        self.xi[k][r - 1]
    }

    /// Highest flooded level at `k`, 0 when dry.
    pub fn depth_level(&self, k: usize) -> usize {
        self.xi[k].iter().take_while(|&&f| f).count()
    }

    /// Flooding at the top level cannot be prevented.
    pub fn inexorable(&self, k: usize) -> bool {
        self.xi[k].last().copied().unwrap_or(false)
    }

    pub fn is_row_monotone(&self) -> bool {
        self.xi.iter().all(|row| row.windows(2).all(|w| w[0] || !w[1]))
    }

    /// Elementwise `self >= other`.
    pub fn dominates(&self, other: &IndicatorMatrix) -> bool {
        self.xi
            .iter()
            .zip(&other.xi)
            .all(|(a, b)| a.iter().zip(b).all(|(&x, &y)| x || !y))
    }
}

/// Maps flood depths to level indicators: `xi[k][r] = depth[k] > t[r]`.
pub fn convert_depths(depths: &[f64], thresholds: &[f64]) -> Result<IndicatorMatrix> {
    let xi = depths
        .iter()
        .enumerate()
        .map(|(k, &d)| {
            if !(d >= 0.0) {
                return Err(Error::Input(format!("negative or NaN depth {d} at substation index {k}")));
            }
            Ok(thresholds.iter().map(|&t| d > t).collect())
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(IndicatorMatrix { xi })
}

fn aggregate(set: &ScenarioSet, case: &GridCase, id: &str, mean: bool) -> Result<FloodScenario> {
    if set.scenarios.is_empty() {
        return Err(Error::Input("cannot aggregate an empty scenario set".into()));
    }
    let mut acc = vec![0.0; case.substations().len()];
    for s in &set.scenarios {
        let v = s.depth_vector(case)?;
        for (a, d) in acc.iter_mut().zip(v) {
            if mean {
                *a += s.prob * d;
            } else {
                *a = f64::max(*a, d);
            }
        }
    }
    Ok(FloodScenario::from_vector(id, 1.0, &acc, case))
}

/// Probability-weighted mean depth scenario.
pub fn aggregate_mean(set: &ScenarioSet, case: &GridCase) -> Result<FloodScenario> {
    aggregate(set, case, "mean", true)
}

/// Substation-wise maximum depth scenario.
pub fn aggregate_max(set: &ScenarioSet, case: &GridCase) -> Result<FloodScenario> {
    aggregate(set, case, "max", false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::toy_case;

    #[test]
    fn depth_conversion_examples() {
        let t = DEFAULT_THRESHOLDS;
        assert_eq!(convert_depths(&[0.3], &t).unwrap().xi[0], vec![true, false, false]);
        assert_eq!(convert_depths(&[0.0], &t).unwrap().xi[0], vec![false, false, false]);
        assert_eq!(convert_depths(&[1.2], &t).unwrap().xi[0], vec![true, true, true]);
        // a dam of exactly the threshold height protects that depth
        assert_eq!(convert_depths(&[1.0], &t).unwrap().xi[0], vec![true, true, false]);
        assert!(convert_depths(&[-0.1], &t).is_err());
    }

    fn two(probs: (f64, f64), d1: (f64, f64)) -> ScenarioSet {
        let mk = |id: &str, p: f64, d: f64| FloodScenario {
            id: id.into(),
            prob: p,
            depths: [("k1".to_string(), d)].into_iter().collect(),
        };
        ScenarioSet {
            thresholds: DEFAULT_THRESHOLDS.to_vec(),
            scenarios: vec![mk("w1", probs.0, d1.0), mk("w2", probs.1, d1.1)],
        }
    }

    #[test]
    fn aggregation_examples() {
        let case = toy_case();
        let s = two((0.5, 0.5), (0.8, 0.0));
        assert!((aggregate_mean(&s, &case).unwrap().depths["k1"] - 0.4).abs() < 1e-15);
        assert_eq!(aggregate_max(&s, &case).unwrap().depths["k1"], 0.8);
        let s = two((0.25, 0.75), (1.0, 0.2));
        assert!((aggregate_mean(&s, &case).unwrap().depths["k1"] - 0.4).abs() < 1e-15);

        let mut single = two((1.0, 0.0), (0.7, 0.0));
        single.scenarios.truncate(1);
        assert_eq!(aggregate_mean(&single, &case).unwrap().depths, single.scenarios[0].depths);
        assert_eq!(aggregate_max(&single, &case).unwrap().depths, single.scenarios[0].depths);

        let empty = ScenarioSet { thresholds: DEFAULT_THRESHOLDS.to_vec(), scenarios: vec![] };
        assert!(aggregate_mean(&empty, &case).is_err());
    }

    #[test]
    fn max_of_three() {
        let case = toy_case();
        let mut s = two((0.3, 0.3), (0.2, 1.1));
        s.scenarios.push(FloodScenario {
            id: "w3".into(),
            prob: 0.4,
            depths: [("k1".to_string(), 0.5)].into_iter().collect(),
        });
        assert_eq!(aggregate_max(&s, &case).unwrap().depths["k1"], 1.1);
    }

    #[test]
    fn probability_sum_checked() {
        let s = two((0.5, 0.4), (0.0, 0.0));
        let err = s.validate().unwrap_err().to_string();
        assert!(err.contains("sum to"), "{err}");
    }
}
