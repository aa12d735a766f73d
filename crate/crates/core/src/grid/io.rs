use std::fs;
use std::path::Path;

use serde::Serialize;

use super::{CaseData, GridCase, ScenarioSet};
use crate::error::{Error, Result};

/// Serialize with sorted keys and shortest round-trip floats.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // serde_json::Value keeps object keys in a BTreeMap, which sorts them.
    let tree = serde_json::to_value(value).map_err(|e| Error::Parse(e.to_string()))?;
    let mut text = serde_json::to_string_pretty(&tree).map_err(|e| Error::Parse(e.to_string()))?;
    text.push('\n');
    Ok(text)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

pub fn load_case(path: impl AsRef<Path>) -> Result<GridCase> {
    let text = fs::read_to_string(path.as_ref())?;
    let data: CaseData = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    GridCase::new(data)
}

pub fn save_case(case: &GridCase, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_canonical_json(case.data())?)?;
    Ok(())
}

pub fn load_scenarios(path: impl AsRef<Path>) -> Result<ScenarioSet> {
    let text = fs::read_to_string(path.as_ref())?;
    let set: ScenarioSet = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.as_ref().display())))?;
    set.validate()?;
    Ok(set)
}

pub fn save_scenarios(set: &ScenarioSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, to_canonical_json(set)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    #[test]
    fn sha256_of_abc() {
        assert_eq!(super::sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }
}
