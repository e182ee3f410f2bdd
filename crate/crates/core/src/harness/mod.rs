//! Experiment runner behind the CLI: JSON configs, point ingestion, CSV
//! traces and JSON run summaries.

mod ingest;
mod trace;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub use ingest::ingest_points;
pub use trace::emit_trace;

use crate::error::{Error, Result};
use crate::flows::{descent_slacks, error_bound, fejer_slacks, ppa_run, resolvent_path, StepSchedule, Trajectory};
use crate::functionals::{Functional, SequenceWindow};
use crate::geometry::{cat0_slack_unchecked, Point, Space};
use crate::mosco::{
    envelope_resolvent_convergence, log_grid, mosco_check, semigroup_convergence, wijsman_check, FunctionalFamily,
    SetFamily,
};
use crate::prox::{default_tol, resolvent, slope_upper};
use crate::varying::{ar_axioms_check, mosco_ar_check, semigroup_ar_check, ArInstance, VaryingFamily};
use crate::weak::{asymptotic_center, default_center_tol, default_probes, weak_limit_score};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operation {
    SpaceCheck,
    Prox,
    Flow,
    Ppa,
    Median,
    Mean,
    Center,
    Mosco,
    Wijsman,
    Ar,
}

impl Operation {
    pub fn name(self) -> &'static str {
        match self {
            Operation::SpaceCheck => "space-check",
            Operation::Prox => "prox",
            Operation::Flow => "flow",
            Operation::Ppa => "ppa",
            Operation::Median => "median",
            Operation::Mean => "mean",
            Operation::Center => "center",
            Operation::Mosco => "mosco",
            Operation::Wijsman => "wijsman",
            Operation::Ar => "ar",
        }
    }
}

/// Target values checked after a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Expect {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub point: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default = "default_within")]
    pub within: f64,
}

fn default_within() -> f64 {
    1e-6
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub operation: Operation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub space: Option<Space>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional: Option<Functional>,
    /// Built-in functional family (`mosco`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<FunctionalFamily>,
    /// Built-in set family (`wijsman`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sets: Option<SetFamily>,
    /// Asymptotic relation (`ar`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar: Option<ArInstance>,
    /// Functionals on the varying spaces (`ar`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub varying: Option<VaryingFamily>,
    /// Start point, evaluation point or candidate limit.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x: Option<Point>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<Vec<Point>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points_file: Option<PathBuf>,
    /// Sequence index of the first point (`center`).
    #[serde(default)]
    pub window_start: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Backward-Euler steps for flows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Largest sequence index for `mosco`, `wijsman` and `ar`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<usize>,
    /// PPA iterations.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<StepSchedule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub expect: Option<Expect>,
}

fn config_error(path: &str, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

/// Parse and validate a JSON config; errors name the offending field.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: ExperimentConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        config_error(&path, e.into_inner().to_string())
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: impl AsRef<Path>) -> Result<ExperimentConfig> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut cfg = parse_config(&text)?;
    // Point files are relative to the config.
    if let (Some(f), Some(dir)) = (&cfg.points_file, path.parent()) {
        if f.is_relative() {
            cfg.points_file = Some(dir.join(f));
        }
    }
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: Option<f64>| match v {
            Some(v) if !(v > 0.0 && v.is_finite()) => Err(config_error(name, format!("{v} must be positive and finite"))),
            _ => Ok(()),
        };
        positive("lambda", self.lambda)?;
        positive("tol", self.tol)?;
        if let Some(t) = self.t {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(config_error("t", format!("{t} must be finite and nonnegative")));
            }
        }
        for (name, v) in [("n", self.n), ("n_max", self.n_max), ("steps", self.steps), ("samples", self.samples)] {
            if v == Some(0) {
                return Err(config_error(name, "must be positive"));
            }
        }
        if let Some(s) = &self.schedule {
            s.validate(self.steps.unwrap_or(1))
                .map_err(|e| config_error("schedule", e.to_string()))?;
        }
        if let Some(e) = &self.expect {
            positive("expect.within", Some(e.within))?;
        }
        let need = |field: &str, present: bool| {
            if present {
                Ok(())
            } else {
                Err(config_error(field, format!("required by `{}`", self.operation.name())))
            }
        };
        use Operation::*;
        match self.operation {
            SpaceCheck => need("space", self.space.is_some()),
            Prox => {
                need("space", self.space.is_some())?;
                need("functional", self.functional.is_some())?;
                need("x", self.x.is_some())?;
                need("lambda", self.lambda.is_some())
            }
            Flow => {
                need("space", self.space.is_some())?;
                need("functional", self.functional.is_some())?;
                need("x", self.x.is_some())?;
                need("t", self.t.is_some())
            }
            Ppa => {
                need("space", self.space.is_some())?;
                need("functional", self.functional.is_some())?;
                need("x", self.x.is_some())?;
                need("steps", self.steps.is_some())
            }
            Median | Mean | Center => {
                need("space", self.space.is_some())?;
                need("points", self.points.is_some() || self.points_file.is_some())
            }
            Mosco => {
                need("family", self.family.is_some())?;
                need("x", self.x.is_some())
            }
            Wijsman => {
                need("sets", self.sets.is_some())?;
                need("x", self.x.is_some())
            }
            Ar => {
                need("ar", self.ar.is_some())?;
                if self.varying.is_some() {
                    need("x", self.x.is_some())?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Status {
    Pass,
    Fail,
    SolverFailure,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunSummary {
    pub config: ExperimentConfig,
    pub status: Status,
    pub metrics: BTreeMap<String, Value>,
    /// Files written next to the summary.
    pub artifacts: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::Pass => 0,
            Status::Fail => 2,
            Status::SolverFailure => 3,
        }
    }
}

/// Exit code for an error that prevented a summary.
pub fn error_exit_code(e: &Error) -> i32 {
    match e {
        Error::Certification(_) => 2,
        Error::SolverFailure { .. } | Error::PartialRun { .. } => 3,
        _ => 1,
    }
}

/// Size the global thread pool from `HFLOW_THREADS`, if set.
pub fn init_thread_pool() -> Result<()> {
    match std::env::var("HFLOW_THREADS") {
        Ok(v) => {
            let n: usize = v
                .parse()
                .ok()
                .filter(|n| *n > 0)
                .ok_or_else(|| config_error("HFLOW_THREADS", format!("`{v}` is not a positive integer")))?;
            // A pool that already exists keeps its size.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            Ok(())
        }
        Err(_) => Ok(()),
    }
}

/// Output of one operation before it is wrapped in a summary.
struct Outcome {
    passed: bool,
    metrics: BTreeMap<String, Value>,
    trace: Option<Trajectory>,
    /// Extra CSV files: name and contents.
    tables: Vec<(String, Vec<u8>)>,
    message: Option<String>,
}

impl Outcome {
    fn new() -> Self {
        Outcome {
            passed: true,
            metrics: BTreeMap::new(),
            trace: None,
            tables: Vec::new(),
            message: None,
        }
    }

    fn put(&mut self, key: &str, v: impl Serialize) {
        self.metrics.insert(key.into(), serde_json::to_value(v).expect("metric serializes"));
    }

    fn require(&mut self, ok: bool, what: impl Into<String>) {
        if !ok {
            self.passed = false;
            if self.message.is_none() {
                self.message = Some(what.into());
            }
        }
    }

    fn expect(&mut self, cfg: &ExperimentConfig, space: &Space, point: &Point, value: f64) {
        let Some(e) = &cfg.expect else { return };
        if let Some(p) = &e.point {
            let gap = space.distance(point, p).unwrap_or(f64::INFINITY);
            self.put("expect_point_gap", gap);
            self.require(gap <= e.within, format!("point misses its target by {gap:e}"));
        }
        if let Some(v) = e.value {
            let gap = (value - v).abs();
            self.put("expect_value_gap", gap);
            self.require(gap <= e.within, format!("value misses its target by {gap:e}"));
        }
    }
}

/// Run one experiment. With `out`, writes `summary.json` and any trace or
/// table files there. Solver failures become a summary; other errors are
/// returned.
pub fn run_experiment(cfg: &ExperimentConfig, out: Option<&Path>) -> Result<RunSummary> {
    cfg.validate()?;
    let outcome = match dispatch(cfg) {
        Ok(o) => o,
        Err(e @ (Error::SolverFailure { .. } | Error::PartialRun { .. })) => {
            let mut o = Outcome::new();
            o.passed = false;
            o.message = Some(e.to_string());
            if let Error::PartialRun { step, trajectory, .. } = &e {
                o.put("failed_step", step);
                o.trace = Some((**trajectory).clone());
            }
            let summary = RunSummary {
                config: cfg.clone(),
                status: Status::SolverFailure,
                metrics: o.metrics.clone(),
                artifacts: Vec::new(),
                message: o.message.clone(),
            };
            return finish(summary, o, out);
        }
        Err(Error::Certification(msg)) => {
            let mut o = Outcome::new();
            o.passed = false;
            o.message = Some(msg);
            o
        }
        Err(e) => return Err(e),
    };
    let summary = RunSummary {
        config: cfg.clone(),
        status: if outcome.passed { Status::Pass } else { Status::Fail },
        metrics: outcome.metrics.clone(),
        artifacts: Vec::new(),
        message: outcome.message.clone(),
    };
    finish(summary, outcome, out)
}

fn finish(mut summary: RunSummary, outcome: Outcome, out: Option<&Path>) -> Result<RunSummary> {
    let Some(dir) = out else { return Ok(summary) };
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    if let Some(traj) = &outcome.trace {
        emit_trace(traj, dir.join("trace.csv"))?;
        summary.artifacts.push("trace.csv".into());
    }
    for (name, bytes) in &outcome.tables {
        let p = dir.join(name);
        fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
        summary.artifacts.push(name.clone());
    }
    summary.artifacts.push("summary.json".into());
    let p = dir.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    fs::write(&p, text + "\n").map_err(|e| Error::io(&p, e))?;
    Ok(summary)
}

fn dispatch(cfg: &ExperimentConfig) -> Result<Outcome> {
    match cfg.operation {
        Operation::SpaceCheck => space_check(cfg),
        Operation::Prox => prox(cfg),
        Operation::Flow => flow(cfg),
        Operation::Ppa => ppa(cfg),
        Operation::Median => barycenter(cfg, 1),
        Operation::Mean => barycenter(cfg, 2),
        Operation::Center => center(cfg),
        Operation::Mosco => mosco(cfg),
        Operation::Wijsman => wijsman(cfg),
        Operation::Ar => ar(cfg),
    }
}

fn space_of(cfg: &ExperimentConfig) -> &Space {
    cfg.space.as_ref().expect("validated")
}

fn functional_of(cfg: &ExperimentConfig) -> Result<&Functional> {
    let f = cfg.functional.as_ref().expect("validated");
    f.check(space_of(cfg))
        .map_err(|e| config_error("functional", e.to_string()))?;
    Ok(f)
}

fn point_of(cfg: &ExperimentConfig, space: &Space) -> Result<Point> {
    let x = cfg.x.clone().expect("validated");
    space.validate(&x).map_err(|e| config_error("x", e.to_string()))?;
    Ok(space.normalize(x))
}

fn points_of(cfg: &ExperimentConfig, space: &Space) -> Result<Vec<Point>> {
    let pts = match (&cfg.points, &cfg.points_file) {
        (Some(p), _) => {
            for (i, q) in p.iter().enumerate() {
                space
                    .validate(q)
                    .map_err(|e| config_error(&format!("points[{i}]"), e.to_string()))?;
            }
            p.iter().map(|q| space.normalize(q.clone())).collect()
        }
        (None, Some(path)) => ingest_points(path, space)?,
        (None, None) => unreachable!("validated"),
    };
    if pts.is_empty() {
        return Err(config_error("points", "no points"));
    }
    Ok(pts)
}

const SPACE_CHECK_CHUNKS: u64 = 64;

fn space_check(cfg: &ExperimentConfig) -> Result<Outcome> {
    let space = space_of(cfg);
    let samples = cfg.samples.unwrap_or(100_000) as u64;
    let tol = cfg.tol.unwrap_or(1e-9);
    // One stream per chunk keeps the result independent of scheduling.
    let min = (0..SPACE_CHECK_CHUNKS)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(chunk);
            let count = samples / SPACE_CHECK_CHUNKS + u64::from(chunk < samples % SPACE_CHECK_CHUNKS);
            (0..count)
                .map(|_| {
                    let p = space.sample_point(&mut rng, 2.0);
                    let x = space.sample_point(&mut rng, 2.0);
                    let y = space.sample_point(&mut rng, 2.0);
                    let t = rng.random_range(0.0..=1.0);
                    cat0_slack_unchecked(space, &p, &x, &y, t)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    let mut o = Outcome::new();
    o.put("samples", samples);
    o.put("min_cat0_slack", min);
    o.require(min >= -tol, format!("CAT(0) slack {min:e} below −{tol:e}"));
    Ok(o)
}

fn prox(cfg: &ExperimentConfig) -> Result<Outcome> {
    let space = space_of(cfg);
    let f = functional_of(cfg)?;
    let x = point_of(cfg, space)?;
    let tol = cfg.tol.unwrap_or_else(|| default_tol(space, f, &x));
    let r = resolvent(space, f, &x, cfg.lambda.expect("validated"), tol)?;
    let mut o = Outcome::new();
    o.put("point", &r.point);
    o.put("envelope", r.objective);
    o.put("growth_gap", r.growth_gap);
    o.put("iterations", r.iterations);
    o.expect(cfg, space, &r.point, f.value(space, &r.point));
    Ok(o)
}

fn flow(cfg: &ExperimentConfig) -> Result<Outcome> {
    let space = space_of(cfg);
    let f = functional_of(cfg)?;
    let x = point_of(cfg, space)?;
    let t = cfg.t.expect("validated");
    let n = cfg.n.unwrap_or(1000);
    let tol = cfg.tol.unwrap_or_else(|| default_tol(space, f, &x));
    let mut o = Outcome::new();
    if t == 0.0 {
        o.put("point", &x);
        o.put("value", f.value(space, &x));
        o.expect(cfg, space, &x, f.value(space, &x));
        return Ok(o);
    }
    let traj = ppa_run(space, f, &x, &StepSchedule::Constant { lambda: t / n as f64 }, n, tol, None)?;
    let last = traj.last().expect("start record").clone();
    o.put("point", &last.point);
    o.put("value", last.value);
    o.put("steps", last.n);
    if let Ok(slope) = slope_upper(space, f, &x, 1e-4 * t.min(1.0)) {
        o.put("slope_estimate", slope);
        o.put("error_bound", error_bound(t, slope, n));
    }
    o.expect(cfg, space, &last.point, last.value);
    o.trace = Some(traj);
    Ok(o)
}

fn ppa(cfg: &ExperimentConfig) -> Result<Outcome> {
    let space = space_of(cfg);
    let f = functional_of(cfg)?;
    let x = point_of(cfg, space)?;
    let steps = cfg.steps.expect("validated");
    let schedule = cfg.schedule.clone().unwrap_or_default();
    let tol = cfg.tol.unwrap_or_else(|| default_tol(space, f, &x));
    let reference = cfg.expect.as_ref().and_then(|e| e.point.clone());
    let traj = ppa_run(space, f, &x, &schedule, steps, tol, reference.as_ref())?;
    let last = traj.last().expect("start record").clone();
    let mut o = Outcome::new();
    o.put("point", &last.point);
    o.put("value", last.value);
    o.put("steps", last.n);
    o.put("converged", traj.converged);
    let descent = descent_slacks(&traj).into_iter().fold(f64::INFINITY, f64::min);
    if descent.is_finite() {
        o.put("min_descent_slack", descent);
        o.require(descent >= -1e-9 * (1.0 + last.value.abs()), "objective increased along the run");
    }
    if let Some(r) = &reference {
        let fejer = fejer_slacks(space, &traj, std::slice::from_ref(r))
            .into_iter()
            .flatten()
            .fold(f64::INFINITY, f64::min);
        if fejer.is_finite() {
            o.put("min_fejer_slack", fejer);
            o.require(fejer >= -1e-9, "iterates moved away from the expected minimizer");
        }
    }
    o.expect(cfg, space, &last.point, last.value);
    o.trace = Some(traj);
    Ok(o)
}

/// Minimizer of the uniform `p`-Fermat–Weber functional, by resolvents of
/// growing `λ` from the start point.
fn barycenter(cfg: &ExperimentConfig, p: u32) -> Result<Outcome> {
    let space = space_of(cfg);
    let pts = points_of(cfg, space)?;
    let f = Functional::uniform_fermat_weber(pts.clone(), p)?;
    let x0 = match &cfg.x {
        Some(_) => point_of(cfg, space)?,
        None => pts[0].clone(),
    };
    let tol = cfg.tol.unwrap_or_else(|| default_tol(space, &f, &x0));
    let lambdas: Vec<f64> = (0..=6).map(|k| 10f64.powi(k)).collect();
    let traj = resolvent_path(space, &f, &x0, &lambdas, tol)?;
    let last = traj.last().expect("nonempty path").clone();
    let mut o = Outcome::new();
    o.put("point", &last.point);
    o.put("value", last.value);
    o.put("last_move", last.step_move);
    o.put("points", pts.len());
    o.expect(cfg, space, &last.point, last.value);
    o.trace = Some(traj);
    Ok(o)
}

fn center(cfg: &ExperimentConfig) -> Result<Outcome> {
    let space = space_of(cfg);
    let window = SequenceWindow::new(points_of(cfg, space)?, cfg.window_start)?;
    let tol = cfg.tol.unwrap_or_else(|| default_center_tol(space, &window));
    let c = asymptotic_center(space, &window, tol)?;
    let mut weak = json!({
        "center": c.center,
        "omega": c.omega_value,
        "growth_gap": c.growth_gap,
        "sensitivity": c.window_sensitivity,
        "iterations": c.iterations,
    });
    if cfg.x.is_some() {
        let x = point_of(cfg, space)?;
        let probes = default_probes(space, &x);
        if let Ok(score) = weak_limit_score(space, &window, &x, &probes) {
            weak["score"] = json!(score);
        }
    }
    let mut o = Outcome::new();
    o.put("weak", weak);
    o.expect(cfg, space, &c.center, c.omega_value);
    Ok(o)
}

fn mosco(cfg: &ExperimentConfig) -> Result<Outcome> {
    let seq = cfg
        .family
        .as_ref()
        .expect("validated")
        .sequence()
        .map_err(|e| config_error("family", e.to_string()))?;
    let x = point_of(cfg, &seq.space)?;
    let lambda = cfg.lambda.unwrap_or(1.0);
    let n_max = cfg.n_max.unwrap_or(1000);
    let tol = cfg.tol.unwrap_or(1e-10);
    let report = envelope_resolvent_convergence(&seq, &x, lambda, n_max, tol)?;
    let m = mosco_check(&seq, &x, &[], n_max)?;
    let mut o = Outcome::new();
    o.put("family", &report.family);
    o.put("lambda", lambda);
    if let Some(&(n, env, res)) = report.gaps.last() {
        o.put("final", json!({ "n": n, "env_gap": env, "res_gap": res }));
    }
    if let Some(m2) = &m.m2 {
        o.put("m2_gap", m2.gap);
    }
    o.put("failures", &report.failures);
    o.require(report.passed, "envelope or resolvent gaps exceed the declared rate");
    let mut table = Vec::new();
    report.write_csv(&mut table)?;
    o.tables.push(("gaps.csv".into(), table));
    if let Some(t) = cfg.t {
        let n_steps = cfg.n.unwrap_or(100);
        let sem = semigroup_convergence(&seq, &x, t, n_max, n_steps, tol)?;
        if let Some(&(n, g)) = sem.gaps.last() {
            o.put("final_semigroup", json!({ "n": n, "sem_gap": g }));
        }
        o.require(sem.passed, "semigroup gaps exceed the propagated resolvent rate");
    }
    Ok(o)
}

fn wijsman(cfg: &ExperimentConfig) -> Result<Outcome> {
    let sets = cfg.sets.as_ref().expect("validated");
    sets.validate().map_err(|e| config_error("sets", e.to_string()))?;
    let x = point_of(cfg, &sets.space())?;
    let report = wijsman_check(sets, &x, cfg.n_max.unwrap_or(1000), cfg.tol.unwrap_or(1e-12))?;
    let mut o = Outcome::new();
    o.put("family", &report.family);
    if let Some(&(n, d, p)) = report.gaps.last() {
        o.put("final", json!({ "n": n, "dist_gap": d, "proj_gap": p }));
    }
    if let Ok(limit) = crate::mosco::monotone_set_limit(sets) {
        o.put("monotone_limit", limit);
    }
    o.require(report.passed, "distance or projection gaps exceed the declared rate");
    o.tables.push(("gaps.csv".into(), rows_csv(&["n", "dist_gap", "proj_gap"], &report.gaps, |r| {
        vec![r.0.to_string(), r.1.to_string(), r.2.to_string()]
    })));
    Ok(o)
}

fn ar(cfg: &ExperimentConfig) -> Result<Outcome> {
    let inst = cfg.ar.as_ref().expect("validated");
    let grid = log_grid(cfg.n_max.unwrap_or(100));
    let samples = cfg.samples.unwrap_or(1000);
    let tol = cfg.tol.unwrap_or(1e-12);
    let axioms = grid
        .par_iter()
        .map(|&n| ar_axioms_check(inst, n, samples, tol))
        .collect::<Result<Vec<_>>>()?;
    let mut o = Outcome::new();
    o.put("instance", inst.id());
    let worst = axioms
        .iter()
        .map(|r| json!({ "n": r.n, "epsilon": r.epsilon, "a3": r.a3_residual, "a4": r.a4_residual }))
        .collect::<Vec<_>>();
    o.put("axioms", worst);
    o.put("structural", ["A1", "A2"]);
    o.tables.push((
        "ar.csv".into(),
        rows_csv(&["n", "epsilon_n", "distortion", "lift_error", "a3_residual", "a4_residual"], &axioms, |r| {
            vec![
                r.n.to_string(),
                r.epsilon.to_string(),
                r.distortion.to_string(),
                r.lift_error.to_string(),
                r.a3_residual.to_string(),
                r.a4_residual.to_string(),
            ]
        }),
    ));
    if let Some(fam) = &cfg.varying {
        let vseq = fam.sequence(inst).map_err(|e| config_error("varying", e.to_string()))?;
        let lim = inst.limit()?;
        let x = point_of(cfg, &lim)?;
        let lambda = cfg.lambda.unwrap_or(1.0);
        let rep = mosco_ar_check(inst, &vseq, &x, lambda, &grid, tol)?;
        o.require(rep.failures.is_empty(), "resolvent failures on the varying spaces");
        for &(n, eps, _, res) in &rep.gaps {
            o.require(res <= 2.0 * eps + 10.0 * tol, format!("resolvent gap {res:e} at n = {n} exceeds 2εₙ"));
        }
        o.tables.push(("gaps.csv".into(), rows_csv(&["n", "epsilon_n", "env_gap", "res_gap"], &rep.gaps, |r| {
            vec![r.0.to_string(), r.1.to_string(), r.2.to_string(), r.3.to_string()]
        })));
        if let Some(&(n, eps, env, res)) = rep.gaps.last() {
            o.put("final", json!({ "n": n, "epsilon_n": eps, "env_gap": env, "res_gap": res }));
        }
        if let Some(t) = cfg.t {
            let n_steps = cfg.n.unwrap_or(100);
            let sem = semigroup_ar_check(inst, &vseq, &x, t, &grid, n_steps, tol)?;
            for &(n, eps, g) in &sem.gaps {
                let bound = 2.0 * eps + 1.0 / n_steps as f64 + 10.0 * tol;
                o.require(g <= bound, format!("semigroup gap {g:e} at n = {n} exceeds {bound:e}"));
            }
            if let Some(&(n, _, g)) = sem.gaps.last() {
                o.put("final_semigroup", json!({ "n": n, "sem_gap": g }));
            }
        }
    }
    Ok(o)
}

fn rows_csv<T>(header: &[&str], rows: &[T], fields: impl Fn(&T) -> Vec<String>) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(fields(r)).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ppa_soft_threshold_example() {
        let cfg = parse_config(
            r#"{"operation": "ppa", "space": {"kind": "euclidean", "dim": 1},
                "functional": {"kind": "dist", "p": 1, "anchor": [0.0]},
                "x": [5.0], "schedule": {"kind": "constant", "lambda": 1.0}, "steps": 10}"#,
        )
        .unwrap();
        let s = run_experiment(&cfg, None).unwrap();
        assert_eq!(s.status, Status::Pass);
        assert_eq!(s.metrics["point"], json!({"kind": "vector", "coords": [0.0]}));
    }

    #[test]
    fn negative_lambda_is_a_config_error() {
        let e = parse_config(
            r#"{"operation": "prox", "space": {"kind": "euclidean", "dim": 1},
                "functional": {"kind": "dist", "p": 2, "anchor": [0.0]}, "x": [1.0], "lambda": -1}"#,
        )
        .unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "lambda"));
        assert_eq!(error_exit_code(&e), 1);
        let e = parse_config(r#"{"operation": "prox", "space": {"kind": "euclidean", "dim": "two"}}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { path, .. } if path == "space"), "{e}");
    }

    #[test]
    fn tripod_space_check() {
        let cfg = parse_config(
            r#"{"operation": "space-check", "samples": 2000,
                "space": {"kind": "tree", "nodes": 4, "edges": [[0,1,1.0],[0,2,1.0],[0,3,1.0]]}}"#,
        )
        .unwrap();
        let s = run_experiment(&cfg, None).unwrap();
        assert_eq!(s.status, Status::Pass);
        assert!(s.metrics["min_cat0_slack"].as_f64().unwrap() >= -1e-9);
    }

    #[test]
    fn summaries_are_deterministic_and_round_trip() {
        let cfg = parse_config(
            r#"{"operation": "ppa", "space": {"kind": "euclidean", "dim": 2},
                "functional": {"kind": "dist", "p": 2, "anchor": [1.0, 2.0]},
                "x": [0.0, 0.0], "steps": 3, "seed": 9}"#,
        )
        .unwrap();
        let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
        let s = run_experiment(&cfg, Some(a.path())).unwrap();
        run_experiment(&cfg, Some(b.path())).unwrap();
        for f in &s.artifacts {
            assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap());
        }
        let text = fs::read_to_string(a.path().join("summary.json")).unwrap();
        let back: RunSummary = serde_json::from_str(&text).unwrap();
        back.config.validate().unwrap();
        assert_eq!(fs::read_to_string(a.path().join("trace.csv")).unwrap().lines().count(), 4);
    }

    #[test]
    fn exit_codes() {
        assert_eq!(error_exit_code(&Error::solver("cap", None, 1.0)), 3);
        assert_eq!(error_exit_code(&Error::Certification("w".into())), 2);
        assert_eq!(error_exit_code(&Error::invalid("x")), 1);
    }

    #[test]
    fn families_run_from_config() {
        let cfg = parse_config(r#"{"operation": "wijsman", "sets": {"kind": "nested_intervals"}, "x": [2.0], "n_max": 64}"#).unwrap();
        assert_eq!(run_experiment(&cfg, None).unwrap().status, Status::Pass);
        let cfg = parse_config(
            r#"{"operation": "mosco", "family": {"kind": "translated_quadratic"}, "x": [2.0], "n_max": 64, "t": 1.0, "n": 50}"#,
        )
        .unwrap();
        assert_eq!(run_experiment(&cfg, None).unwrap().status, Status::Pass);
        let cfg = parse_config(
            r#"{"operation": "ar", "ar": {"kind": "scaled_tripod", "rate": "1/n"}, "n_max": 16, "samples": 100,
                "varying": {"kind": "quadratic_anchor", "anchor": {"node": 1}, "weight": 2.0},
                "x": {"node": 0}, "t": 1.0, "n": 20}"#,
        )
        .unwrap();
        let s = run_experiment(&cfg, None).unwrap();
        assert_eq!(s.status, Status::Pass, "{:?}", s.message);
    }

    #[test]
    fn median_of_points() {
        let cfg = parse_config(
            r#"{"operation": "median", "space": {"kind": "euclidean", "dim": 1},
                "points": [[0.0], [1.0], [5.0]], "expect": {"point": [1.0], "within": 1e-6}}"#,
        )
        .unwrap();
        let s = run_experiment(&cfg, None).unwrap();
        assert_eq!(s.status, Status::Pass, "{:?}", s.message);
    }
}
