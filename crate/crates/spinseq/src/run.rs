//! Mode dispatch and report types.

use core::f64::consts::TAU;
use std::io;

use chrono::{SecondsFormat, Utc};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Serialize;
use serde_json::json;
use spinseq_core::analysis::{self, AnalysisError, CycleReport, EffectiveCouplingReport};
use spinseq_core::propagate::{self, SimError};
use spinseq_core::scan::{self, PointMap, ScanError};
use spinseq_core::sequence::{Schedule, ScheduleDocument, ScheduleError, Scheme, SchemeSpec};
use spinseq_core::spin::{self, EquivalenceReport, IdentityReport, ModelError, PhipParams};
use spinseq_core::{Advisory, DnpParams, DriveSample};
use thiserror::Error;

use crate::config::{ConfigError, Mode, RunConfig, System};
use crate::output::{self, output_path};
use crate::parallel::RayonMap;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("{0}")]
    Threads(String),
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

impl RunError {
    pub fn code(&self) -> &'static str {
        match self {
            RunError::Config(ConfigError::Syntax { .. }) => "config_syntax",
            RunError::Config(ConfigError::MissingField { .. }) => "missing_field",
            RunError::Config(ConfigError::BadValue { .. }) => "bad_value",
            RunError::Model(_) => "model",
            RunError::Schedule(_) => "schedule",
            RunError::Simulation(_) => "simulation",
            RunError::Analysis(_) => "analysis",
            RunError::Scan(_) => "scan",
            RunError::Threads(_) => "threads",
            RunError::Io(_) => "io",
            RunError::VerificationFailed(_) => "verification_failed",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) | RunError::Threads(_) => 2,
            RunError::Model(_) | RunError::Schedule(_) => 3,
            RunError::Simulation(_) | RunError::Analysis(_) | RunError::Scan(_) => 4,
            RunError::Io(_) => 5,
            RunError::VerificationFailed(_) => 6,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut v = json!({ "error": self.code(), "message": self.to_string() });
        if let RunError::Config(c) = self {
            if let Some(p) = c.path() {
                v["path"] = json!(p);
            }
        }
        v
    }
}

/// Files written by a run, in order.
#[derive(Debug, Clone, Default, Serialize)]
pub struct RunOutcome {
    pub files: Vec<String>,
}

impl RunOutcome {
    fn push(&mut self, p: &std::path::Path) {
        self.files.push(p.display().to_string());
    }
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

pub fn run(cfg: &RunConfig, mode: Mode, mapper: &RayonMap) -> Result<RunOutcome, RunError> {
    let mut cfg = cfg.clone();
    cfg.mode = Some(mode);
    let mut out = RunOutcome::default();
    let path = output_path(&cfg.output, ".config.json")?;
    output::write_json(&path, &cfg)?;
    out.push(&path);
    match mode {
        Mode::Simulate => run_simulate(&cfg, &mut out)?,
        Mode::Scan => run_scan(&cfg, mapper, &mut out)?,
        Mode::Multiscan => run_multiscan(&cfg, mapper, &mut out)?,
        Mode::Verify => run_verify(&cfg, &mut out)?,
        Mode::Astar => run_astar(&cfg, &mut out)?,
    }
    Ok(out)
}

fn prepared(cfg: &RunConfig, sys: &System) -> Result<(SchemeSpec, Schedule), RunError> {
    let spec = cfg.scheme()?.clone();
    let sch = spec.build(&sys.dnp)?;
    let sch = match spec.options.n_reps {
        Some(_) => sch,
        None => propagate::with_selected_repetitions(sch, &sys.dnp, cfg.n_max)?,
    };
    Ok((spec, sch))
}

fn advisories(sys: &System, spec: &SchemeSpec) -> Vec<Advisory> {
    let mut a = sys.advisories.clone();
    a.extend(spec.advisories(&sys.dnp));
    a
}

#[derive(Debug, Serialize)]
struct SimulateSummary<'a> {
    scheme: Scheme,
    params: DnpParams,
    errors: spinseq_core::ErrorModel,
    n_reps: usize,
    total_duration: f64,
    transferred_polarization: f64,
    advisories: Vec<Advisory>,
    schedule: &'a ScheduleDocument,
    code_version: &'static str,
}

fn run_simulate(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), RunError> {
    let sys = cfg.system()?;
    let (spec, sch) = prepared(cfg, &sys)?;
    let traj = propagate::simulate(&sch, &sys.dnp, &cfg.errors, &propagate::initial_state())?;
    let path = output_path(&cfg.output, ".trajectory.csv")?;
    output::write_csv_file(&path, |w| output::write_trajectory_csv(w, &traj))?;
    out.push(&path);
    let doc = sch.to_document();
    let summary = SimulateSummary {
        scheme: spec.scheme,
        params: sys.dnp,
        errors: cfg.errors,
        n_reps: sch.n_reps,
        total_duration: sch.total_duration(),
        transferred_polarization: traj.transferred_polarization,
        advisories: advisories(&sys, &spec),
        schedule: &doc,
        code_version: spinseq_core::VERSION,
    };
    let path = output_path(&cfg.output, ".summary.json")?;
    output::write_json(&path, &summary)?;
    out.push(&path);
    Ok(())
}

fn write_timestamps(cfg: &RunConfig, started: String, threads: usize, out: &mut RunOutcome) -> Result<(), RunError> {
    let path = output_path(&cfg.output, ".timestamps.json")?;
    output::write_json(&path, &json!({ "started": started, "finished": now(), "threads": threads }))?;
    out.push(&path);
    Ok(())
}

fn run_scan(cfg: &RunConfig, mapper: &RayonMap, out: &mut RunOutcome) -> Result<(), RunError> {
    let started = now();
    let sys = cfg.system()?;
    let (spec, sch) = prepared(cfg, &sys)?;
    let grid = cfg.grid.to_grid()?;
    let h = scan::scan_schedule(&sch, &spec, &sys.dnp, &grid, mapper as &dyn PointMap);
    let path = output_path(&cfg.output, ".heatmap.csv")?;
    output::write_csv_file(&path, |w| output::write_heatmap_csv(w, &h))?;
    out.push(&path);
    let path = output_path(&cfg.output, ".heatmap.json")?;
    output::write_json(
        &path,
        &json!({
            "meta": h.meta,
            "grid": h.grid,
            "failures": h.failures,
            "advisories": advisories(&sys, &spec),
        }),
    )?;
    out.push(&path);
    write_timestamps(cfg, started, mapper.threads(), out)
}

fn run_multiscan(cfg: &RunConfig, mapper: &RayonMap, out: &mut RunOutcome) -> Result<(), RunError> {
    let started = now();
    let sys = cfg.system()?;
    let spec = cfg.scheme()?;
    let grid = cfg.grid.to_grid()?;
    let [ni, nj] = cfg.halvings;
    let panels = scan::multi_regime_scan(spec, &sys.dnp, (ni, nj), &grid, mapper)?;
    let mut index = Vec::with_capacity(panels.len());
    for p in &panels {
        let path = output_path(&cfg.output, &format!(".panel_a{}_w{}.csv", p.i, p.j))?;
        output::write_csv_file(&path, |w| output::write_heatmap_csv(w, &p.heatmap))?;
        out.push(&path);
        index.push(json!({
            "a_perp_halvings": p.i,
            "omega_i_halvings": p.j,
            "csv": path.display().to_string(),
            "meta": p.heatmap.meta,
            "failures": p.heatmap.failures,
            "t_fin": p.t_fin,
            "t_fin_ratio": p.t_fin_ratio,
        }));
    }
    let path = output_path(&cfg.output, ".panels.json")?;
    output::write_json(&path, &json!({ "grid": grid, "panels": index }))?;
    out.push(&path);
    write_timestamps(cfg, started, mapper.threads(), out)
}

#[derive(Debug, Clone, Serialize)]
pub struct EquivalenceCase {
    pub params: PhipParams,
    pub report: EquivalenceReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub identities: IdentityReport,
    pub equivalence: Vec<EquivalenceCase>,
    pub sz_tolerance: f64,
    pub leakage_tolerance: f64,
    pub passed: bool,
}

pub const EQUIVALENCE_SZ_TOLERANCE: f64 = 1e-10;
pub const LEAKAGE_TOLERANCE: f64 = 1e-12;

/// A random parameter set with |J| ≥ 4|J¹ − J²| and a random piecewise
/// constant drive on S.
pub fn random_equivalence_case(rng: &mut StdRng, segments: usize) -> (PhipParams, Vec<(DriveSample, f64)>) {
    let j = rng.gen_range(10.0..50.0);
    let diff = j * rng.gen_range(0.02..0.25);
    let j2 = rng.gen_range(-5.0..5.0);
    let p = PhipParams {
        omega_i0: rng.gen_range(200.0..2000.0),
        omega_s: rng.gen_range(50.0..500.0),
        j,
        j1: j2 + diff,
        j2,
    };
    let drive = (0..segments)
        .map(|_| {
            let d = DriveSample::new(rng.gen_range(0.0..2.0 * j), rng.gen_range(0.0..TAU));
            (d, rng.gen_range(0.01..0.2) * TAU / j)
        })
        .collect();
    (p, drive)
}

pub fn verify(target: &PhipParams, sets: usize, segments: usize, seed: u64) -> Result<VerifyReport, RunError> {
    let identities = spin::pseudospin_identities_report_for(target);
    let mut rng = StdRng::seed_from_u64(seed);
    let rho0 = propagate::initial_state();
    let mut equivalence = Vec::with_capacity(sets);
    for _ in 0..sets {
        let (params, drive) = random_equivalence_case(&mut rng, segments);
        let report = spin::equivalence_check(&params, &rho0, &drive)?;
        equivalence.push(EquivalenceCase { params, report });
    }
    let passed = identities.all_passed()
        && equivalence.iter().all(|c| {
            c.report.max_sz_deviation <= EQUIVALENCE_SZ_TOLERANCE && c.report.max_leakage <= LEAKAGE_TOLERANCE
        });
    Ok(VerifyReport {
        identities,
        equivalence,
        sz_tolerance: EQUIVALENCE_SZ_TOLERANCE,
        leakage_tolerance: LEAKAGE_TOLERANCE,
        passed,
    })
}

fn run_verify(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), RunError> {
    let sys = cfg.system()?;
    let target = sys
        .phip
        .ok_or_else(|| ConfigError::BadValue { path: "phip".into(), reason: "verify needs hydrogen-pair parameters".into() })?;
    let report = verify(&target, cfg.verify.random_sets, cfg.verify.segments, cfg.verify.seed)?;
    let path = output_path(&cfg.output, ".verify.json")?;
    output::write_json(&path, &report)?;
    out.push(&path);
    if report.passed {
        Ok(())
    } else {
        Err(RunError::VerificationFailed(format!(
            "max identity residual {:e}, see {}",
            report.identities.max_residual(),
            path.display()
        )))
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CycleSummary {
    pub blocks_per_cycle: usize,
    pub period: f64,
    pub coupling_tensor: [[f64; 3]; 3],
    pub singular_values: [f64; 3],
    pub flip_flop: f64,
    pub a_star: f64,
}

impl From<&CycleReport> for CycleSummary {
    fn from(c: &CycleReport) -> Self {
        Self {
            blocks_per_cycle: c.blocks_per_cycle,
            period: c.period,
            coupling_tensor: c.coupling_tensor,
            singular_values: c.singular_values,
            flip_flop: c.flip_flop,
            a_star: c.a_star(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum Outcome<T> {
    Ok(T),
    Err { error: String },
}

impl<T, E: std::fmt::Display> From<Result<T, E>> for Outcome<T> {
    fn from(r: Result<T, E>) -> Self {
        match r {
            Ok(v) => Outcome::Ok(v),
            Err(e) => Outcome::Err { error: e.to_string() },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AstarEntry {
    pub scheme: Scheme,
    /// A*/A⊥ from closed form, where one exists.
    pub theory_ratio: Option<f64>,
    pub first_maximum: Outcome<EffectiveCouplingReport>,
    pub cycle_log: Outcome<CycleSummary>,
}

pub fn astar_entry(spec: &SchemeSpec, p: &DnpParams) -> AstarEntry {
    let cycle = spec
        .build(p)
        .map_err(AnalysisError::from)
        .and_then(|sch| analysis::cycle_effective_hamiltonian(&sch, p))
        .map(|c| CycleSummary::from(&c));
    AstarEntry {
        scheme: spec.scheme,
        theory_ratio: spec.scheme.a_star_theory(),
        first_maximum: analysis::estimate_a_star(spec, p).into(),
        cycle_log: cycle.into(),
    }
}

fn run_astar(cfg: &RunConfig, out: &mut RunOutcome) -> Result<(), RunError> {
    let sys = cfg.system()?;
    let specs: Vec<SchemeSpec> = match &cfg.scheme {
        Some(s) => vec![s.clone()],
        None => {
            let omega = 4.0 * sys.dnp.omega_i;
            Scheme::ALL.iter().filter(|&&s| s != Scheme::B1Sweep).map(|&s| SchemeSpec::new(s, omega)).collect()
        }
    };
    let entries: Vec<AstarEntry> = specs.iter().map(|s| astar_entry(s, &sys.dnp)).collect();
    let targets: serde_json::Map<String, serde_json::Value> = Scheme::ALL
        .iter()
        .filter_map(|s| s.a_star_theory().map(|r| (s.name().to_string(), json!(r))))
        .collect();
    let path = output_path(&cfg.output, ".astar.json")?;
    output::write_json(
        &path,
        &json!({ "params": sys.dnp, "theory_ratios": targets, "entries": entries, "code_version": spinseq_core::VERSION }),
    )?;
    out.push(&path);
    Ok(())
}

/// One line per scheme: name, drive kind, whether it repeats, A*/A⊥ target.
pub fn schemes_table() -> String {
    let mut s = format!("{:<14} {:<7} {:<8} {:>8}  {}\n", "scheme", "drive", "repeats", "A*/A⊥", "correspondence");
    for sc in Scheme::ALL {
        let theory = sc.a_star_theory().map_or_else(|| "-".to_string(), |r| format!("{r:.4}"));
        let (a, b) = sc.correspondence();
        s.push_str(&format!(
            "{:<14} {:<7} {:<8} {:>8}  {a} / {b}\n",
            sc.name(),
            if sc.is_pulsed() { "pulsed" } else { "cw" },
            if sc.repeats() { "yes" } else { "no" },
            theory
        ));
    }
    s
}
