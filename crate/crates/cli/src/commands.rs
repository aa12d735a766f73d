use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use gridflood::bigm::{audit, AuditRow};
use gridflood::engine::export_lp;
use gridflood::geometry::{envelope_samples, equidistant_tangent_points, max_relax_error, optimal_tangent_points, PfVariant, TangentSet};
use gridflood::grid::{load_case, sha256_hex, GridCase, ScenarioSet};
use gridflood::mitigation::{abs_sim, rel_sim, MitigationPlan};
use gridflood::twostage::{ModelKind, Study, StudyOptions, StudyResult, Uniqueness};
use serde::Serialize;

use crate::ledger::{self, LedgerRow};
use crate::{load_scenario_file, Failure, InputPaths, Inputs};

#[derive(Debug, Clone, Serialize)]
pub struct ValidationReport {
    pub problems: Vec<String>,
}

/// Collects every case and scenario problem instead of stopping at the first.
pub fn validate(paths: &InputPaths) -> Result<ValidationReport> {
    let mut problems = Vec::new();
    let case = match load_case(&paths.case) {
        Ok(c) => Some(c),
        Err(gridflood::Error::Validation(v)) => {
            problems.extend(v);
            None
        }
        Err(e) => return Err(e.into()),
    };
    let case = match (case, &paths.config) {
        (Some(c), Some(p)) => match c.with_config(crate::load_config(p)?) {
            Ok(c) => Some(c),
            Err(gridflood::Error::Validation(v)) => {
                problems.extend(v);
                None
            }
            Err(e) => return Err(e.into()),
        },
        (c, _) => c,
    };
    if let Some(p) = &paths.scenarios {
        let set = load_scenario_file(p)?;
        match &case {
            Some(c) => {
                if let Err(gridflood::Error::Validation(v)) = set.validate_for(c) {
                    problems.extend(v);
                }
            }
            None => problems.extend(set.violations()),
        }
    }
    Ok(ValidationReport { problems })
}

pub struct SweepSpec {
    /// `None` sweeps from 0 to the SP budget threshold.
    pub budgets: Option<Vec<u64>>,
    pub kinds: Vec<ModelKind>,
    pub variants: Vec<PfVariant>,
    pub out: PathBuf,
    pub options: StudyOptions,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub run_id: String,
    pub rows: usize,
    pub failures: usize,
    pub ledger: PathBuf,
}

fn now() -> String {
    let d = SystemTime::now().duration_since(UNIX_EPOCH).unwrap_or_default();
    format!("{}.{:03}", d.as_secs(), d.subsec_millis())
}

fn plan_json(plan: &MitigationPlan, case: &GridCase) -> String {
    serde_json::to_string(&plan.to_level_map(case)).expect("level maps serialize")
}

fn parse_plan(text: &str, case: &GridCase, levels: usize) -> Result<MitigationPlan> {
    let map: BTreeMap<String, usize> = serde_json::from_str(text).with_context(|| format!("bad plan '{text}'"))?;
    Ok(MitigationPlan::from_level_map(&map, case, levels)?)
}

fn row_for(inputs: &Inputs, run_id: &str, kind: ModelKind, pf: PfVariant, budget: u64, res: Result<StudyResult>) -> LedgerRow {
    let mut row = LedgerRow {
        run_id: run_id.to_string(),
        timestamp: now(),
        case_hash: inputs.case_hash.clone(),
        scenarios_hash: inputs.scenarios_hash.clone(),
        config_hash: inputs.config_hash.clone(),
        kind: kind.name().to_string(),
        pf: pf.name().to_string(),
        budget,
        status: "ok".into(),
        z: String::new(),
        plan: String::new(),
        plan_hash: String::new(),
        nodes: 0,
        lp_iterations: 0,
        cuts: 0,
        seconds: String::new(),
        error: String::new(),
    };
    match res {
        Ok(r) => {
            row.z = format!("{}", r.z);
            if let Some(p) = &r.plan {
                row.plan = plan_json(p, &inputs.case);
                row.plan_hash = sha256_hex(row.plan.as_bytes())[..16].to_string();
            }
            row.nodes = r.nodes;
            row.lp_iterations = r.lp_iterations;
            row.cuts = r.cuts;
            row.seconds = format!("{:.3}", r.seconds);
        }
        Err(e) => {
            row.status = "error".into();
            row.error = format!("{e:#}");
        }
    }
    row
}

/// Solves every (variant, kind, budget) cell on a worker pool, appends the
/// rows to `ledger.csv` in cell order and writes one `(f, z)` series per
/// kind and variant.
pub fn sweep(paths: &InputPaths, spec: &SweepSpec) -> Result<SweepSummary> {
    let inputs = paths.load()?;
    let set = inputs.scenarios()?;
    if spec.kinds.is_empty() || spec.variants.is_empty() {
        return Err(Failure::validation("sweep needs at least one kind and one variant"));
    }
    let studies: Vec<Study> = spec
        .variants
        .iter()
        .map(|&v| Study::new(&inputs.case, set, v, spec.options.with_case_tolerances(&inputs.case)))
        .collect::<gridflood::Result<_>>()?;
    let budgets = match &spec.budgets {
        Some(b) => b.clone(),
        None => (0..=studies[0].threshold(ModelKind::Sp)?).collect(),
    };
    let mut cells: Vec<(usize, ModelKind, u64)> = Vec::new();
    for s in 0..studies.len() {
        for &k in &spec.kinds {
            cells.extend(budgets.iter().map(|&f| (s, k, f)));
        }
    }

    let run_id = uuid::Uuid::new_v4().to_string();
    let results: Mutex<Vec<Option<LedgerRow>>> = Mutex::new(vec![None; cells.len()]);
    let next = AtomicUsize::new(0);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get()).min(cells.len()).max(1);
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&(s, kind, f)) = cells.get(i) else { break };
                let study = &studies[s];
                let row = row_for(&inputs, &run_id, kind, study.variant(), f, study.solve(kind, f).map_err(Into::into));
                results.lock().expect("no worker panicked")[i] = Some(row);
            });
        }
    });
    let rows: Vec<LedgerRow> = results.into_inner().expect("no worker panicked").into_iter().map(|r| r.expect("every cell ran")).collect();

    std::fs::create_dir_all(&spec.out)?;
    let ledger_path = spec.out.join("ledger.csv");
    ledger::append(&ledger_path, &rows)?;
    for study in &studies {
        for &kind in &spec.kinds {
            let path = spec.out.join(format!("series_{}_{}.csv", kind.name(), study.variant().name()));
            let mut w = csv::Writer::from_path(path)?;
            w.write_record(["f", "z"])?;
            for r in rows.iter().filter(|r| r.kind == kind.name() && r.pf == study.variant().name() && r.status == "ok") {
                w.write_record([r.budget.to_string(), r.z.clone()])?;
            }
            w.flush()?;
        }
    }
    let failures = rows.iter().filter(|r| r.status != "ok").count();
    Ok(SweepSummary { run_id, rows: rows.len(), failures, ledger: ledger_path })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimilarityRow {
    pub case: String,
    pub model: String,
    pub budget: u64,
    pub pf_a: String,
    pub pf_b: String,
    pub abs_sim: u64,
    pub rel_sim: f64,
    /// Suboptimality of A's plan in B; empty for kinds without a cross evaluation.
    pub gap_ab: String,
    pub gap_ba: String,
    /// `rel`, or `abs` when the reference optimum is zero.
    pub gap_kind: String,
}

fn latest(rows: Vec<LedgerRow>) -> BTreeMap<(String, String, String, u64), LedgerRow> {
    rows.into_iter()
        .filter(|r| r.status == "ok")
        .map(|r| ((r.case_hash.clone(), r.scenarios_hash.clone(), r.kind.clone(), r.budget), r))
        .collect()
}

/// Compares the plans of two ledgers cell by cell. Only cells whose plans
/// differ are reported; SP and RO cells get cross-evaluated gaps.
pub fn similarity(a: &Path, b: &Path, paths: &InputPaths, options: &StudyOptions) -> Result<Vec<SimilarityRow>> {
    let inputs = paths.load()?;
    let set = inputs.scenarios()?;
    let (ra, rb) = (latest(ledger::read(a)?), latest(ledger::read(b)?));
    let ka: Vec<_> = ra.keys().collect();
    let kb: Vec<_> = rb.keys().collect();
    if ka != kb {
        let only_a = ra.keys().filter(|k| !rb.contains_key(*k)).count();
        let only_b = rb.keys().filter(|k| !ra.contains_key(*k)).count();
        return Err(Failure::validation(format!("ledger keys differ: {only_a} cell(s) only in A, {only_b} only in B")));
    }
    let levels = set.levels();
    let mut studies: BTreeMap<String, Study> = BTreeMap::new();
    let mut study = |pf: &str| -> Result<Study> {
        if let Some(s) = studies.get(pf) {
            return Ok(s.clone());
        }
        let s = Study::new(&inputs.case, set, PfVariant::parse(pf)?, options.with_case_tolerances(&inputs.case))?;
        studies.insert(pf.to_string(), s.clone());
        Ok(s)
    };
    let mut out = Vec::new();
    for (key, x) in &ra {
        let y = &rb[key];
        if x.case_hash != inputs.case_hash {
            return Err(Failure::validation("ledger rows were produced from a different case"));
        }
        if x.plan.is_empty() || x.plan == y.plan {
            continue;
        }
        let (pa, pb) = (parse_plan(&x.plan, &inputs.case, levels)?, parse_plan(&y.plan, &inputs.case, levels)?);
        let sa = study(&x.pf)?;
        let sb = study(&y.pf)?;
        let kind = ModelKind::parse(&x.kind)?;
        let (mut gap_ab, mut gap_ba, mut gap_kind) = (String::new(), String::new(), String::new());
        if matches!(kind, ModelKind::Sp | ModelKind::Ro) {
            let zb: f64 = y.z.parse()?;
            let za: f64 = x.z.parse()?;
            let ab = sb.cross_evaluate(&pa, kind, zb)?;
            let ba = sa.cross_evaluate(&pb, kind, za)?;
            gap_ab = format!("{}", ab.gap);
            gap_ba = format!("{}", ba.gap);
            gap_kind = if ab.absolute || ba.absolute { "abs" } else { "rel" }.into();
        }
        out.push(SimilarityRow {
            case: x.case_hash.clone(),
            model: x.kind.clone(),
            budget: x.budget,
            pf_a: x.pf.clone(),
            pf_b: y.pf.clone(),
            abs_sim: abs_sim(&pa, &pb, &sa.costs),
            rel_sim: rel_sim(&pa, &pb, &sa.costs),
            gap_ab,
            gap_ba,
            gap_kind,
        });
    }
    Ok(out)
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T], header: &[&str]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        w.write_record(header)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize)]
pub struct TangentReport {
    pub points: Vec<f64>,
    pub max_error: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    pub t: usize,
    pub theta_delta_max: f64,
    pub optimal: TangentReport,
    pub equidistant: TangentReport,
}

fn tangent_report(set: &TangentSet) -> TangentReport {
    TangentReport { points: set.points.clone(), max_error: max_relax_error(set) }
}

/// Optimal and equidistant tangent sets; with `out`, also writes
/// `envelope.csv` with `samples` rows.
pub fn geometry(t: usize, theta_delta_max: f64, out: Option<&Path>, samples: usize) -> Result<GeometryReport> {
    let opt = optimal_tangent_points(t, theta_delta_max)?;
    // a single tangent has no equidistant counterpart other than itself
    let eq = if t >= 2 { equidistant_tangent_points(t, theta_delta_max)? } else { opt.clone() };
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let mut w = csv::Writer::from_path(dir.join("envelope.csv"))?;
        w.write_record(["theta", "cos", "optimal", "equidistant", "b2"])?;
        for (a, b) in envelope_samples(&opt, samples).iter().zip(envelope_samples(&eq, samples)) {
            w.write_record([a[0], a[1], a[2], b[2], a[3]].map(|v| v.to_string()))?;
        }
        w.flush()?;
    }
    Ok(GeometryReport { t, theta_delta_max, optimal: tangent_report(&opt), equidistant: tangent_report(&eq) })
}

#[derive(Debug, Clone, Serialize)]
pub struct ExportReport {
    pub path: PathBuf,
    pub variables: usize,
    pub rows: usize,
    pub quadratic_rows: usize,
    pub objective: Option<f64>,
    pub external_objective: Option<f64>,
}

/// Last number printed by the external solver.
fn last_number(text: &str) -> Option<f64> {
    text.split_whitespace().rev().find_map(|w| w.parse::<f64>().ok())
}

/// Writes the extensive form of `kind` as an LP file. With `external`,
/// runs `external <lp file>`, reads the last number it prints as its
/// optimum and compares it against the embedded engine within `tol`.
pub fn export(paths: &InputPaths, kind: ModelKind, pf: PfVariant, budget: u64, out: &Path, external: Option<&Path>, tol: f64) -> Result<ExportReport> {
    let inputs = paths.load()?;
    let study = Study::new(&inputs.case, inputs.scenarios()?, pf, StudyOptions::for_case(&inputs.case))?;
    let model = study.build_model(kind, budget)?;
    export_lp(&model, out)?;
    let mut report = ExportReport {
        path: out.to_path_buf(),
        variables: model.vars.len(),
        rows: model.rows.len(),
        quadratic_rows: model.quads.len(),
        objective: None,
        external_objective: None,
    };
    if let Some(bin) = external {
        let ours = study.solve(kind, budget)?.z;
        let output = std::process::Command::new(bin).arg(out).output().with_context(|| format!("running {}", bin.display()))?;
        let text = String::from_utf8_lossy(&output.stdout);
        if !output.status.success() {
            return Err(Failure::solver(format!("external solver failed: {}", String::from_utf8_lossy(&output.stderr))));
        }
        let theirs = last_number(&text).ok_or_else(|| Failure::solver("external solver printed no objective"))?;
        report.objective = Some(ours);
        report.external_objective = Some(theirs);
        if (ours - theirs).abs() > tol {
            return Err(Failure::solver(format!("objective mismatch: engine {ours}, external {theirs}")));
        }
    }
    Ok(report)
}

/// Samples every big-M right-hand side of the listed variants.
pub fn bigm_audit(case: &GridCase, variants: &[PfVariant], samples: usize, seed: u64) -> Vec<AuditRow> {
    variants.iter().flat_map(|&v| audit(case, v, samples, seed)).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct UniquenessReport {
    pub kind: ModelKind,
    pub pf: PfVariant,
    pub budget: u64,
    pub z: f64,
    pub plan: BTreeMap<String, usize>,
    pub unique: bool,
    pub alternate: Option<BTreeMap<String, usize>>,
    pub restricted_z: Option<f64>,
}

pub fn uniqueness(inputs: &Inputs, set: &ScenarioSet, kind: ModelKind, pf: PfVariant, budget: u64, options: &StudyOptions) -> Result<UniquenessReport> {
    let study = Study::new(&inputs.case, set, pf, options.with_case_tolerances(&inputs.case))?;
    let r = study.solve(kind, budget)?;
    let plan = r.plan.ok_or_else(|| Failure::validation(format!("{kind} has no first-stage plan")))?;
    let u = study.check_uniqueness(kind, budget, &plan, r.z)?;
    let (unique, alternate, restricted_z) = match u {
        Uniqueness::Unique { restricted } => (true, None, restricted),
        Uniqueness::Alternate { plan, z } => (false, Some(plan.to_level_map(&inputs.case)), Some(z)),
    };
    Ok(UniquenessReport { kind, pf, budget, z: r.z, plan: plan.to_level_map(&inputs.case), unique, alternate, restricted_z })
}
