//! Command implementations behind the `gridflood` binary.

use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use gridflood::grid::{load_case, sha256_hex, to_canonical_json, Config, GridCase, ScenarioSet};

pub mod commands;
pub mod ledger;

/// Environment variable naming a JSON config that overrides the case's own.
pub const CONFIG_ENV: &str = "GRIDFLOOD_CONFIG";

pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_SOLVER: i32 = 2;
pub const EXIT_IO: i32 = 3;

/// An error that carries its own exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub message: String,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl std::error::Error for Failure {}

impl Failure {
    pub fn validation(message: impl Into<String>) -> anyhow::Error {
        Failure { code: EXIT_VALIDATION, message: message.into() }.into()
    }
    pub fn solver(message: impl Into<String>) -> anyhow::Error {
        Failure { code: EXIT_SOLVER, message: message.into() }.into()
    }
}

/// Maps an error chain to the process exit code.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    for cause in err.chain() {
        if let Some(f) = cause.downcast_ref::<Failure>() {
            return f.code;
        }
        if let Some(e) = cause.downcast_ref::<gridflood::Error>() {
            return match e {
                gridflood::Error::Io(_) => EXIT_IO,
                gridflood::Error::Parse(_) | gridflood::Error::Validation(_) | gridflood::Error::Input(_) => EXIT_VALIDATION,
                gridflood::Error::Solver { .. } | gridflood::Error::NoConvergence { .. } | gridflood::Error::Degenerate(_) => {
                    EXIT_SOLVER
                }
            };
        }
        if cause.downcast_ref::<std::io::Error>().is_some() || cause.downcast_ref::<csv::Error>().is_some() {
            return EXIT_IO;
        }
    }
    EXIT_VALIDATION
}

/// Case and scenario files plus an optional config override.
#[derive(Debug, Clone)]
pub struct InputPaths {
    pub case: PathBuf,
    pub scenarios: Option<PathBuf>,
    pub config: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct Inputs {
    pub case: GridCase,
    pub scenarios: Option<ScenarioSet>,
    pub case_hash: String,
    pub scenarios_hash: String,
    pub config_hash: String,
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| gridflood::Error::Parse(format!("{}: {e}", path.display())).into())
}

pub fn load_scenario_file(path: &Path) -> Result<ScenarioSet> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading scenarios {}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| gridflood::Error::Parse(format!("{}: {e}", path.display())).into())
}

impl InputPaths {
    pub fn load(&self) -> Result<Inputs> {
        let mut case = load_case(&self.case).with_context(|| format!("loading case {}", self.case.display()))?;
        if let Some(p) = &self.config {
            case = case.with_config(load_config(p)?)?;
        }
        let scenarios = match &self.scenarios {
            Some(p) => {
                let set = load_scenario_file(p)?;
                set.validate_for(&case)?;
                Some(set)
            }
            None => None,
        };
        let hash = |s: &str| sha256_hex(s.as_bytes())[..16].to_string();
        Ok(Inputs {
            case_hash: hash(&to_canonical_json(case.data())?),
            scenarios_hash: scenarios.as_ref().map(|s| to_canonical_json(s).map(|t| hash(&t))).transpose()?.unwrap_or_default(),
            config_hash: hash(&to_canonical_json(case.config())?),
            case,
            scenarios,
        })
    }
}

impl Inputs {
    pub fn scenarios(&self) -> Result<&ScenarioSet> {
        self.scenarios.as_ref().ok_or_else(|| Failure::validation("this command needs --scenarios"))
    }
}

/// Parses `3`, `0..4` (inclusive), `0..=4`, `0,2,5` or `auto`.
/// `auto` is returned as `None`.
pub fn parse_budgets(spec: &str) -> Result<Option<Vec<u64>>> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    let num = |s: &str| -> Result<u64> {
        s.trim().parse::<u64>().map_err(|_| Failure::validation(format!("budget '{s}' is not a nonnegative integer")))
    };
    let out: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let (a, b) = (num(a)?, num(b.trim_start_matches('='))?);
        if a > b {
            return Err(Failure::validation(format!("empty budget range {spec}")));
        }
        (a..=b).collect()
    } else {
        spec.split(',').filter(|s| !s.trim().is_empty()).map(num).collect::<Result<_>>()?
    };
    if out.is_empty() {
        return Err(Failure::validation("empty budget list"));
    }
    Ok(Some(out))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn budget_specs() {
        assert_eq!(parse_budgets("0..4").unwrap(), Some(vec![0, 1, 2, 3, 4]));
        assert_eq!(parse_budgets("0..=2").unwrap(), Some(vec![0, 1, 2]));
        assert_eq!(parse_budgets("3,1").unwrap(), Some(vec![3, 1]));
        assert_eq!(parse_budgets("auto").unwrap(), None);
        assert!(parse_budgets("").is_err());
        assert!(parse_budgets("-1").is_err());
        assert!(parse_budgets("4..2").is_err());
    }

    #[test]
    fn exit_codes_follow_the_cause() {
        assert_eq!(exit_code(&Failure::solver("x")), EXIT_SOLVER);
        assert_eq!(exit_code(&gridflood::Error::Input("x".into()).into()), EXIT_VALIDATION);
        let io: anyhow::Error = std::io::Error::other("x").into();
        assert_eq!(exit_code(&io.context("wrapped")), EXIT_IO);
    }
}
