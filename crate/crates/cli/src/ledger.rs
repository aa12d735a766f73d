//! Append-only results ledger.

use std::fs::OpenOptions;
use std::path::Path;

use anyhow::Result;
use gridflood::grid::sha256_hex;
use serde::{Deserialize, Serialize};

/// One solved (kind, variant, budget) cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LedgerRow {
    pub run_id: String,
    pub timestamp: String,
    pub case_hash: String,
    pub scenarios_hash: String,
    pub config_hash: String,
    pub kind: String,
    pub pf: String,
    pub budget: u64,
    /// `ok` or `error`
    pub status: String,
    pub z: String,
    /// JSON map from substation id to achieved level; empty for bounds.
    pub plan: String,
    pub plan_hash: String,
    pub nodes: usize,
    pub lp_iterations: usize,
    pub cuts: usize,
    pub seconds: String,
    pub error: String,
}

impl LedgerRow {
    /// The row without its run-specific fields.
    fn stable(&self) -> LedgerRow {
        LedgerRow { run_id: String::new(), timestamp: String::new(), seconds: String::new(), ..self.clone() }
    }
}

pub fn append(path: &Path, rows: &[LedgerRow]) -> Result<()> {
    let fresh = !path.exists() || std::fs::metadata(path)?.len() == 0;
    let file = OpenOptions::new().create(true).append(true).open(path)?;
    let mut w = csv::WriterBuilder::new().has_headers(fresh).from_writer(file);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read(path: &Path) -> Result<Vec<LedgerRow>> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Hash of the ledger with run ids, timestamps and timings blanked.
pub fn digest(rows: &[LedgerRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r.stable())?;
    }
    Ok(sha256_hex(&w.into_inner()?))
}
