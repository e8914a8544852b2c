//! Experiment orchestration and result files.
//!
//! Every run writes one table per artifact plus `manifest.json` into the
//! output directory. Tables in CSV form start with the full configuration
//! echoed as `# `-prefixed TOML lines, followed by a column header and the
//! data rows; floats use the shortest representation that round-trips. The
//! JSON form holds the same configuration under `parameters`, the column
//! names under `columns` and one object per row under `rows`.
//!
//! | artifact | columns |
//! |---|---|
//! | `<label>` (histogram modes) | `x_center,density` |
//! | `<label>_observables` | `trajectory,sample,t,q,p,energy,duffing_energy,number` |
//! | `<label>_expectations` | `t,q,p,number,duffing_energy,purity` |
//! | `<label>` (compare) | `x_center,quantum,classical,oracle` |
//! | `<label>` (nems_map), `<label>_report` | `quantity,value` |

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use num_complex::Complex64;
use serde::Serialize;
use serde_json::json;
use thiserror::Error;

use crate::classical::{classical_histogram, CloudSpec};
use crate::config::{
    emit, ConfigError, InitialState, Mode, OutputFormat, Panel, Resolved, SimConfig,
};
use crate::ensemble::{run_ensemble_from, EnsembleResult};
use crate::histogram::{Histogram, NormalizedHistogram};
use crate::linalg::{trace_distance, CMatrix};
use crate::nems::{self, potential_coefficients};
use crate::observables::HermiteTable;
use crate::operators::{build_operator_set, OperatorSet};
use crate::oracle::{check_invariants, evolve_master_sampled, MasterState};
use crate::qsd::{rk4_step_limit, suggested_dt, trajectory_seed, SampleSchedule, StateVector};
use crate::Error;

/// Environment variable capping the worker thread count.
pub const THREADS_ENV: &str = "QSD_DUFFING_THREADS";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("configuration error: {0}")]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] Error),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invariant check failed: {0}")]
    Invariant(String),
}

impl RunError {
    /// 2 configuration, 3 numerical blowup, 4 invariant failure, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Sim(e) => match e {
                Error::Blowup { .. } => 3,
                Error::OracleFailure { .. } | Error::NumericalInconsistency { .. } => 4,
                _ => 2,
            },
            RunError::Invariant(_) => 4,
            RunError::Io { .. } => 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Bool(v) => v.to_string(),
            Cell::Text(v) => v.clone(),
        }
    }
}

/// Shortest round-trip form; scientific notation outside `[1e-4, 1e16)`.
pub fn format_float(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || !a.is_finite() || (1e-4..1e16).contains(&a) {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    fn new(columns: &[&'static str]) -> Self {
        Self {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    fn quantity(&mut self, name: &str, value: Cell) {
        self.rows.push(vec![Cell::Text(name.to_string()), value]);
    }

    /// Data rows in CSV form, without the parameter header.
    pub fn csv_body(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let line: Vec<String> = row.iter().map(Cell::csv).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InvariantRecord {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub passed: bool,
}

impl InvariantRecord {
    fn at_most(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value <= limit,
        }
    }

    fn at_least(name: &str, value: f64, limit: f64) -> Self {
        Self {
            name: name.into(),
            value,
            limit,
            passed: value >= limit,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LeakageRecord {
    pub max_population: f64,
    pub threshold: f64,
    pub flagged_trajectories: u64,
    pub trajectories: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PanelRecord {
    pub label: String,
    pub mode: Mode,
    pub note: Option<String>,
    pub status: String,
    pub config: SimConfig,
    pub defaulted: Vec<crate::config::Defaulted>,
    pub master_seed: u64,
    pub first_trajectory_seed: u64,
    pub seconds: f64,
    pub artifacts: Vec<String>,
    pub leakage: Option<LeakageRecord>,
    pub invariants: Vec<InvariantRecord>,
    pub summary: Vec<(String, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub program: &'static str,
    pub version: &'static str,
    pub preset: Option<String>,
    pub threads: usize,
    pub panels: Vec<PanelRecord>,
}

/// Run a single configuration, labelled by its mode.
pub fn run(resolved: &Resolved) -> Result<Manifest, RunError> {
    let panel = Panel {
        label: resolved.config.mode.name().to_string(),
        resolved: resolved.clone(),
        note: None,
    };
    run_panels(&[panel], None)
}

/// Run every panel in order, writing artifacts and a shared manifest into the
/// output directory of the first panel.
pub fn run_panels(panels: &[Panel], preset: Option<&str>) -> Result<Manifest, RunError> {
    let out_dir = match panels.first() {
        Some(p) => p.resolved.config.output_path.clone(),
        None => {
            return Err(RunError::Config(ConfigError {
                message: "no panels to run".into(),
                line: None,
            }))
        }
    };
    fs::create_dir_all(&out_dir).map_err(|source| RunError::Io {
        path: out_dir.clone(),
        source,
    })?;
    let mut manifest = Manifest {
        program: env!("CARGO_PKG_NAME"),
        version: env!("CARGO_PKG_VERSION"),
        preset: preset.map(str::to_string),
        threads: rayon::current_num_threads(),
        panels: Vec::new(),
    };
    let mut failure: Option<RunError> = None;
    for panel in panels {
        let cfg = &panel.resolved.config;
        let mut record = PanelRecord {
            label: panel.label.clone(),
            mode: cfg.mode,
            note: panel.note.clone(),
            status: "ok".into(),
            config: cfg.clone(),
            defaulted: panel.resolved.defaulted.clone(),
            master_seed: cfg.ensemble.master_seed,
            first_trajectory_seed: trajectory_seed(cfg.ensemble.master_seed, 0),
            seconds: 0.0,
            artifacts: Vec::new(),
            leakage: None,
            invariants: Vec::new(),
            summary: Vec::new(),
        };
        if let Some(note) = &panel.note {
            log::warn!("{}: {note}", panel.label);
        }
        log::info!("running {} ({})", panel.label, cfg.mode.name());
        let start = Instant::now();
        let outcome = execute(cfg, &out_dir, &panel.label, &mut record);
        record.seconds = start.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => {
                if let Some(bad) = record.invariants.iter().find(|r| !r.passed) {
                    record.status = "invariant_failure".into();
                    failure.get_or_insert(RunError::Invariant(format!(
                        "{}: {} = {:e} (limit {:e})",
                        panel.label, bad.name, bad.value, bad.limit
                    )));
                }
                manifest.panels.push(record);
            }
            Err(e) => {
                record.status = format!("error: {e}");
                manifest.panels.push(record);
                write_manifest(&out_dir, &manifest)?;
                return Err(e);
            }
        }
    }
    write_manifest(&out_dir, &manifest)?;
    match failure {
        Some(e) => Err(e),
        None => Ok(manifest),
    }
}

fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<(), RunError> {
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    fs::write(&path, text + "\n").map_err(|source| RunError::Io { path, source })
}

fn execute(
    cfg: &SimConfig,
    dir: &Path,
    label: &str,
    record: &mut PanelRecord,
) -> Result<(), RunError> {
    match cfg.mode {
        Mode::QsdEnsemble => {
            let ops = quantum_operators(cfg)?;
            let res = ensemble(cfg, &ops, record)?;
            record
                .artifacts
                .push(write_table(cfg, dir, label, &histogram_table(&res.p_avg))?);
            record.artifacts.push(write_table(
                cfg,
                dir,
                &format!("{label}_observables"),
                &observable_table(&res),
            )?);
            summarize(&res.p_avg, record);
        }
        Mode::MasterOracle => {
            let ops = quantum_operators(cfg)?;
            let (_, hist, table) = oracle(cfg, &ops, record)?;
            record
                .artifacts
                .push(write_table(cfg, dir, label, &histogram_table(&hist))?);
            record.artifacts.push(write_table(
                cfg,
                dir,
                &format!("{label}_expectations"),
                &table,
            )?);
            summarize(&hist, record);
        }
        Mode::Classical => {
            let hist = classical(cfg)?;
            record
                .artifacts
                .push(write_table(cfg, dir, label, &histogram_table(&hist))?);
            summarize(&hist, record);
        }
        Mode::NemsMap => {
            record
                .artifacts
                .push(write_table(cfg, dir, label, &nems_table(cfg)?)?);
        }
        Mode::Compare => {
            let ops = quantum_operators(cfg)?;
            let quantum = ensemble(cfg, &ops, record)?;
            let classical = classical(cfg)?;
            let (rho, oracle_hist, _) = oracle(cfg, &ops, record)?;
            let mut table = Table::new(&["x_center", "quantum", "classical", "oracle"]);
            for (b, x) in quantum.p_avg.grid.centers().into_iter().enumerate() {
                table.rows.push(vec![
                    Cell::Float(x),
                    Cell::Float(quantum.p_avg.density[b]),
                    Cell::Float(classical.density[b]),
                    Cell::Float(oracle_hist.density[b]),
                ]);
            }
            let td = trace_distance(&quantum.density_matrix.rho, &rho);
            let l1 = |a: &NormalizedHistogram, b: &NormalizedHistogram| {
                a.density
                    .iter()
                    .zip(&b.density)
                    .map(|(x, y)| (x - y).abs())
                    .sum::<f64>()
                    * a.grid.width()
            };
            let mut report = Table::new(&["quantity", "value"]);
            report.quantity("trace_distance_qsd_oracle", Cell::Float(td));
            report.quantity(
                "l1_qsd_oracle",
                Cell::Float(l1(&quantum.p_avg, &oracle_hist)),
            );
            report.quantity(
                "l1_qsd_classical",
                Cell::Float(l1(&quantum.p_avg, &classical)),
            );
            report.quantity(
                "l1_oracle_classical",
                Cell::Float(l1(&oracle_hist, &classical)),
            );
            record
                .summary
                .push(("trace_distance_qsd_oracle".into(), td));
            record.artifacts.push(write_table(cfg, dir, label, &table)?);
            record
                .artifacts
                .push(write_table(cfg, dir, &format!("{label}_report"), &report)?);
            summarize(&quantum.p_avg, record);
        }
    }
    Ok(())
}

/// Operators for a quantum mode, refusing steps beyond the stability bound.
fn quantum_operators(cfg: &SimConfig) -> Result<OperatorSet, RunError> {
    let ops = build_operator_set(&cfg.physics, cfg.dim)?;
    let limit = rk4_step_limit(&ops);
    if cfg.integrator.dt > limit {
        return Err(RunError::Config(ConfigError {
            message: format!(
                "`integrator.dt` = {} exceeds the stability bound {limit:.3e} at dim {}; \
                 use dt = \"auto\" ({:.3e}) or a smaller basis",
                cfg.integrator.dt,
                cfg.dim,
                suggested_dt(&ops)
            ),
            line: None,
        }));
    }
    Ok(ops)
}

fn initial_state(cfg: &SimConfig) -> StateVector {
    match cfg.initial {
        InitialState::WellGround => StateVector::well_ground_state(&cfg.physics, cfg.dim),
        InitialState::Fock { level } => StateVector::fock(cfg.dim, level),
    }
}

fn ensemble(
    cfg: &SimConfig,
    ops: &OperatorSet,
    record: &mut PanelRecord,
) -> Result<EnsembleResult, RunError> {
    let res = run_ensemble_from(ops, &cfg.integrator, &cfg.ensemble, &initial_state(cfg))?;
    let report = res.density_matrix.report();
    record.invariants.extend([
        InvariantRecord::at_most("qsd_rho_hermiticity", report.hermiticity_error, 1e-10),
        InvariantRecord::at_most("qsd_rho_trace_error", report.trace_error, 1e-10),
        InvariantRecord::at_least("qsd_rho_min_eigenvalue", report.min_eigenvalue, -1e-8),
    ]);
    record.leakage = Some(LeakageRecord {
        max_population: res.max_leakage,
        threshold: cfg.integrator.leakage_threshold,
        flagged_trajectories: res.leakage_warnings,
        trajectories: res.trajectories,
    });
    if res.leakage_warnings > 0 {
        log::warn!(
            "{} of {} trajectories exceeded the leakage threshold (max {:e}); consider a larger dim",
            res.leakage_warnings,
            res.trajectories,
            res.max_leakage
        );
    }
    Ok(res)
}

/// Sample-averaged master-equation state, its position histogram and the
/// expectation values at the sample times.
fn oracle(
    cfg: &SimConfig,
    ops: &OperatorSet,
    record: &mut PanelRecord,
) -> Result<(CMatrix, NormalizedHistogram, Table), RunError> {
    let times = SampleSchedule::from_config(&cfg.integrator, cfg.ensemble.samples)?.sample_times();
    let init = MasterState::pure(&initial_state(cfg));
    let states = evolve_master_sampled(ops, &init, cfg.integrator.dt, &times)?;
    let grid = cfg.ensemble.grid;
    let hermite = HermiteTable::new(grid, cfg.dim);
    let mut hist = Histogram::empty(grid);
    let mut rho = CMatrix::zeros(cfg.dim, cfg.dim);
    let mut table = Table::new(&["t", "q", "p", "number", "duffing_energy", "purity"]);
    for s in &states {
        hist.add_density(&hermite.density_matrix_density(&s.rho), 1.0);
        rho += &s.rho;
        let number: f64 = (0..cfg.dim).map(|k| k as f64 * s.rho[(k, k)].re).sum();
        table.rows.push(vec![
            Cell::Float(s.time),
            Cell::Float(s.expect(ops.q()).re),
            Cell::Float(s.expect(ops.p()).re),
            Cell::Float(number),
            Cell::Float(s.expect(ops.h_duffing()).re),
            Cell::Float(s.purity()),
        ]);
    }
    rho /= Complex64::new(states.len() as f64, 0.0);
    let check = check_invariants(&rho);
    record.invariants.extend([
        InvariantRecord::at_most("oracle_rho_hermiticity", check.hermiticity_error, 1e-8),
        InvariantRecord::at_most("oracle_rho_trace_error", check.trace_error, 1e-8),
        InvariantRecord::at_least("oracle_rho_min_eigenvalue", check.min_eigenvalue, -1e-6),
    ]);
    Ok((rho, hist.finalize(), table))
}

fn classical(cfg: &SimConfig) -> Result<NormalizedHistogram, RunError> {
    let cloud = CloudSpec::matching_quantum(
        &cfg.physics,
        cfg.ensemble.trajectories,
        cfg.ensemble.master_seed,
    );
    let h = classical_histogram(
        &cfg.physics,
        &cfg.integrator,
        &cloud,
        cfg.ensemble.grid,
        cfg.ensemble.samples,
    )?;
    Ok(h.finalize())
}

fn nems_table(cfg: &SimConfig) -> Result<Table, RunError> {
    let beam = cfg.beam.ok_or_else(|| {
        RunError::Config(ConfigError {
            message: "nems_map mode requires a [beam] section".into(),
            line: None,
        })
    })?;
    let spec = beam.spec;
    let c = potential_coefficients(&spec)?;
    let mut t = Table::new(&["quantity", "value"]);
    t.quantity("flexural_rigidity", Cell::Float(spec.flexural_rigidity()));
    t.quantity("critical_tension", Cell::Float(spec.critical_tension()));
    t.quantity("t0", Cell::Float(spec.t0));
    t.quantity("lambda", Cell::Float(spec.compression()));
    t.quantity("c2", Cell::Float(c.c2));
    t.quantity("c4", Cell::Float(c.c4));
    t.quantity("is_double_well", Cell::Bool(c.is_double_well));
    t.quantity(
        "beta_squared_prefactor",
        Cell::Float(nems::beta_squared_prefactor(&spec)?),
    );
    match nems::beta_squared(&spec) {
        Ok(b2) => {
            t.quantity("beta_squared", Cell::Float(b2));
            t.quantity("beta", Cell::Float(b2.sqrt()));
        }
        Err(Error::Domain(msg)) => {
            log::warn!("{msg}");
            t.quantity("beta", Cell::Text("undefined (not buckled)".into()));
        }
        Err(e) => return Err(e.into()),
    }
    if let Some(q) = beam.quality_factor {
        t.quantity("quality_factor", Cell::Float(q));
        t.quantity("gamma", Cell::Float(nems::quality_factor_to_gamma(q)?));
    }
    Ok(t)
}

fn histogram_table(h: &NormalizedHistogram) -> Table {
    let mut t = Table::new(&["x_center", "density"]);
    for (x, d) in h.grid.centers().into_iter().zip(&h.density) {
        t.rows.push(vec![Cell::Float(x), Cell::Float(*d)]);
    }
    t
}

fn observable_table(res: &EnsembleResult) -> Table {
    let mut t = Table::new(&[
        "trajectory",
        "sample",
        "t",
        "q",
        "p",
        "energy",
        "duffing_energy",
        "number",
    ]);
    for r in &res.rows {
        t.rows.push(vec![
            Cell::Int(r.trajectory),
            Cell::Int(r.sample as u64),
            Cell::Float(r.t),
            Cell::Float(r.q),
            Cell::Float(r.p),
            Cell::Float(r.energy),
            Cell::Float(r.duffing_energy),
            Cell::Float(r.number),
        ]);
    }
    t
}

fn summarize(h: &NormalizedHistogram, record: &mut PanelRecord) {
    record.summary.extend([
        ("right_mass".to_string(), h.right_mass()),
        ("mode".to_string(), h.mode()),
        ("mean".to_string(), h.mean()),
        ("variance".to_string(), h.variance()),
        ("asymmetry".to_string(), h.asymmetry()),
        ("peak_count".to_string(), h.peak_count(0.2) as f64),
        ("captured_mass".to_string(), h.captured_mass),
    ]);
}

/// Render `table` with the configuration header in `cfg.output_format`.
pub fn render_table(cfg: &SimConfig, table: &Table) -> String {
    match cfg.output_format {
        OutputFormat::Csv => {
            let mut out = String::new();
            for line in emit(cfg).lines().filter(|l| !l.trim().is_empty()) {
                out.push_str("# ");
                out.push_str(line);
                out.push('\n');
            }
            out.push_str(&table.csv_body());
            out
        }
        OutputFormat::Json => {
            let rows: Vec<serde_json::Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: serde_json::Map<String, serde_json::Value> = table
                        .columns
                        .iter()
                        .zip(row)
                        .map(|(c, v)| (c.to_string(), serde_json::to_value(v).expect("cell")))
                        .collect();
                    serde_json::Value::Object(obj)
                })
                .collect();
            let doc = json!({ "parameters": cfg, "columns": table.columns, "rows": rows });
            serde_json::to_string_pretty(&doc).expect("table serializes") + "\n"
        }
    }
}

fn write_table(cfg: &SimConfig, dir: &Path, stem: &str, table: &Table) -> Result<String, RunError> {
    let name = format!("{stem}.{}", cfg.output_format.extension());
    let path = dir.join(&name);
    fs::write(&path, render_table(cfg, table)).map_err(|source| RunError::Io { path, source })?;
    Ok(name)
}
