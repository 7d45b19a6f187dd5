//! Runs a configuration end to end and writes its artifacts.
//!
//! A run directory holds
//!
//! | file                   | content                                        |
//! |------------------------|------------------------------------------------|
//! | `config.toml`          | the resolved configuration                     |
//! | `ledger.csv`           | one row per time step                          |
//! | `clock.csv`            | band clock samples                             |
//! | `snapshots/*.json`     | nodal fields at the configured cadence         |
//! | `report.json`          | final summary                                  |
//! | `manifest.json`        | version, config and SHA-256 of every file above|
//! | `timings.log`          | wall-clock timings, not hashed                 |
//!
//! Everything except `timings.log` is a pure function of the config and
//! the build, so two runs produce identical bytes.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::aniso::{prepare_initial, AnisoSolver, AnisoState};
use crate::catalog::InitialData;
use crate::config::{Monitor, RunConfig, SystemKind};
use crate::convergence::{sweep, GateReport, PairParams, PairedRun, SweepResult};
use crate::energy::{
    aniso_data_norm, hydro_data_norm, smallness_check, track_aniso, track_hydro, track_vorticity,
    vorticity_data_norm, EnergyLedger, LedgerKind, SmallnessReport,
};
use crate::error::{Error, Result};
use crate::field::Field2D;
use crate::fmt_f64;
use crate::grid::Grid;
use crate::hydro::{HydroSolver, HydroState};
use crate::band::AnalyticBandState;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_BLOW_UP: i32 = 3;
pub const EXIT_BAND: i32 = 4;
pub const EXIT_ACCEPTANCE: i32 = 5;
/// Anything else: I/O failures, internal invariants.
pub const EXIT_OTHER: i32 = 1;

/// Process exit code for an error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config { .. }
        | Error::UnknownCatalog(_)
        | Error::InvalidGrid(_)
        | Error::TomlDe(_)
        | Error::TomlSer(_)
        | Error::Compatibility { .. }
        | Error::WeightOverflow { .. } => EXIT_CONFIG,
        Error::BlowUp { .. } | Error::StepTooLarge { .. } => EXIT_BLOW_UP,
        Error::BandExhausted { .. } => EXIT_BAND,
        _ => EXIT_OTHER,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Ok,
    BlowUp,
    BandExhausted,
}

impl RunStatus {
    pub fn exit_code(self) -> i32 {
        match self {
            RunStatus::Ok => EXIT_OK,
            RunStatus::BlowUp => EXIT_BLOW_UP,
            RunStatus::BandExhausted => EXIT_BAND,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClockSummary {
    pub kind: String,
    pub rate: f64,
    pub clock: f64,
    pub band_width: f64,
    /// `a / (2 · rate)`.
    pub limit: f64,
    pub within_limit: bool,
}

impl ClockSummary {
    fn of(band: &AnalyticBandState) -> Self {
        let limit = band.a / (2.0 * band.rate);
        ClockSummary {
            kind: format!("{:?}", band.kind).to_lowercase(),
            rate: band.rate,
            clock: band.clock,
            band_width: band.width(),
            limit,
            within_limit: band.clock < limit,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FunctionalSummary {
    pub kind: LedgerKind,
    pub s: f64,
    pub lhs: f64,
    pub sup_part: f64,
    pub data_norm: f64,
    pub ratio: Option<f64>,
    pub terms: Vec<(String, f64)>,
}

impl FunctionalSummary {
    fn of(l: &EnergyLedger) -> Self {
        FunctionalSummary {
            kind: l.kind,
            s: l.s,
            lhs: l.lhs(),
            sup_part: l.sup_part(),
            data_norm: l.data_norm,
            ratio: l.ratio(),
            terms: l.values(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.lhs.is_finite() && self.terms.iter().all(|t| t.1.is_finite())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RemainderSummary {
    pub eps: f64,
    pub terminal_norm: f64,
    pub lhs: f64,
    pub data_norm: f64,
}

/// Final summary of a run, written as `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub system: SystemKind,
    pub status: RunStatus,
    pub event: Option<String>,
    pub steps_requested: usize,
    pub steps_completed: usize,
    pub t_final: f64,
    pub dt: f64,
    pub eps: Option<f64>,
    pub r: f64,
    pub amplitude: f64,
    pub smallness: SmallnessReport,
    pub clock: ClockSummary,
    /// Paired runs: the hydrostatic θ and the comparison η clocks.
    pub extra_clocks: Vec<ClockSummary>,
    /// Hydrostatic runs: largest `|∫_0^1 u dy|` over the run.
    pub mean_drift: Option<f64>,
    /// Anisotropic runs: initial and largest `‖∂_x u + ∂_y v‖_{L²}`.
    pub divergence_initial: Option<f64>,
    pub divergence_max: Option<f64>,
    /// Anisotropic runs: largest per-step increase of `E_ε`.
    pub linear_energy_max_increase: Option<f64>,
    pub functionals: Vec<FunctionalSummary>,
    pub remainder: Option<RemainderSummary>,
}

/// Report plus the in-memory ledger, for callers that skip the disk.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub ledger_csv: String,
    pub clock_csv: String,
}

/// Collects outputs of one run directory and hashes them on write.
struct RunWriter {
    dir: PathBuf,
    files: Vec<(String, String)>,
}

impl RunWriter {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(RunWriter {
            dir: dir.to_path_buf(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent)?;
        }
        fs::write(&path, bytes)?;
        self.files.push((rel.to_string(), hex::encode(Sha256::digest(bytes))));
        Ok(())
    }

    fn write_json<T: Serialize>(&mut self, rel: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(rel, text.as_bytes())
    }

    fn finish(mut self, config: &RunConfig, timings: &str) -> Result<()> {
        self.files.sort();
        let manifest = Manifest {
            name: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            config: config.clone(),
            files: self
                .files
                .iter()
                .map(|(p, h)| ManifestEntry {
                    path: p.clone(),
                    sha256: h.clone(),
                })
                .collect(),
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join("manifest.json"), text)?;
        fs::write(self.dir.join("timings.log"), timings)?;
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub version: String,
    pub config: RunConfig,
    pub files: Vec<ManifestEntry>,
}

/// Nodal values of a snapshot.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// `(name, values)` with values in row-major `[x][y]` order.
    pub fields: Vec<(String, Vec<f64>)>,
}

impl Snapshot {
    fn new(step: usize, t: f64, fields: &[(&str, &Field2D)]) -> Self {
        let g = fields[0].1.grid();
        Snapshot {
            step,
            t,
            x: (0..g.nx()).map(|i| g.x(i)).collect(),
            y: g.y().to_vec(),
            fields: fields
                .iter()
                .map(|(n, f)| (n.to_string(), f.inverse_transform()))
                .collect(),
        }
    }
}

/// Observation hooks shared by the three systems.
struct Recorder {
    header: Vec<String>,
    rows: String,
    snapshots: Vec<Snapshot>,
    every: usize,
}

impl Recorder {
    fn new(columns: Vec<String>, every: usize) -> Self {
        let mut rows = columns.join(",");
        rows.push('\n');
        Recorder {
            header: columns,
            rows,
            snapshots: Vec::new(),
            every,
        }
    }

    fn row(&mut self, step: usize, values: &[f64]) {
        debug_assert_eq!(values.len() + 1, self.header.len());
        let _ = write!(self.rows, "{step}");
        for v in values {
            self.rows.push(',');
            self.rows.push_str(&fmt_f64(*v));
        }
        self.rows.push('\n');
    }

    fn wants(&self, step: usize) -> bool {
        self.every > 0 && step % self.every == 0
    }
}

fn trapezoid_weight(step: usize, steps: usize, dt: f64) -> f64 {
    if step == 0 || step == steps {
        0.5 * dt
    } else {
        dt
    }
}

/// Turns a runtime event into a status, passing other errors through.
/// A stability-limit violation on the very first step is a config error.
fn classify(err: Error, step: usize) -> Result<(RunStatus, String)> {
    match err {
        Error::BlowUp { .. } => Ok((RunStatus::BlowUp, err.to_string())),
        Error::StepTooLarge { dt, limit } if step > 0 => Ok((
            RunStatus::BlowUp,
            format!("stability limit {limit} fell below dt = {dt} at step {step}"),
        )),
        Error::StepTooLarge { dt, limit } => Err(Error::config(
            "dt",
            format!("dt = {dt} exceeds the initial stability limit {limit}"),
        )),
        Error::BandExhausted { .. } => Ok((RunStatus::BandExhausted, err.to_string())),
        e => Err(e),
    }
}

fn exhausted(band: &AnalyticBandState) -> Option<Error> {
    band.exhausted_at.map(|time| Error::BandExhausted {
        time,
        width: band.width(),
    })
}

struct Context {
    grid: std::sync::Arc<Grid>,
    data: InitialData,
    smallness: SmallnessReport,
    r: f64,
}

fn context(cfg: &RunConfig) -> Result<Context> {
    cfg.validate()?;
    let grid = Grid::new(cfg.grid.clone())?;
    let data = cfg.data.build(&grid, cfg.band.a, cfg.c0)?;
    let smallness = smallness_check(&data.u0, &data.u1, cfg.band.a, cfg.c0)?;
    Ok(Context {
        grid,
        data,
        smallness,
        r: cfg.resolved_r()?,
    })
}

fn base_report(cfg: &RunConfig, ctx: &Context, clock: ClockSummary) -> RunReport {
    RunReport {
        system: cfg.system,
        status: RunStatus::Ok,
        event: None,
        steps_requested: cfg.steps(),
        steps_completed: 0,
        t_final: 0.0,
        dt: cfg.dt,
        eps: cfg.eps,
        r: ctx.r,
        amplitude: ctx.data.amplitude,
        smallness: ctx.smallness.clone(),
        clock,
        extra_clocks: Vec::new(),
        mean_drift: None,
        divergence_initial: None,
        divergence_max: None,
        linear_energy_max_increase: None,
        functionals: Vec::new(),
        remainder: None,
    }
}

fn run_hydro(cfg: &RunConfig, ctx: &Context, every: usize) -> Result<(RunOutcome, Vec<Snapshot>)> {
    let (a, s_energy) = (cfg.band.a, 0.5);
    let solver = HydroSolver::new(&ctx.grid, cfg.dt, cfg.physics)?;
    let mut state = HydroState::new(ctx.data.u0.clone(), ctx.data.u1.clone(), a, cfg.band.lambda);
    let mut energy = cfg.monitors.contains(&Monitor::Energy).then(|| -> Result<EnergyLedger> {
        let dn = hydro_data_norm(&ctx.data.u0, &ctx.data.u1, a, s_energy)?;
        Ok(EnergyLedger::new(&ctx.grid, LedgerKind::Hydro, ctx.r, s_energy, dn))
    }).transpose()?;
    let mut vort: Vec<EnergyLedger> = if cfg.monitors.contains(&Monitor::Vorticity) {
        cfg.vorticity_s
            .iter()
            .map(|&s| {
                let dn = vorticity_data_norm(&ctx.data.u0, &ctx.data.u1, a, s)?;
                Ok(EnergyLedger::new(&ctx.grid, LedgerKind::Vorticity, ctx.r, s, dn))
            })
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let mut cols: Vec<String> = ["step", "t", "theta", "band_width", "max_abs_u", "mean_defect"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if energy.is_some() {
        cols.push("energy_lhs".into());
    }
    for l in &vort {
        cols.push(format!("vorticity_lhs_s{}", l.s));
    }
    let mut rec = Recorder::new(cols, every);
    let steps = cfg.steps();
    let mut drift = state.mean_defect();
    let feed = |state: &HydroState, step: usize, energy: &mut Option<EnergyLedger>, vort: &mut Vec<EnergyLedger>| -> Result<()> {
        let w = trapezoid_weight(step, steps, cfg.dt);
        if let Some(l) = energy.as_mut() {
            track_hydro(l, state, w)?;
        }
        for l in vort.iter_mut() {
            track_vorticity(l, state, w)?;
        }
        Ok(())
    };
    feed(&state, 0, &mut energy, &mut vort)?;
    if rec.wants(0) {
        rec.snapshots.push(Snapshot::new(0, 0.0, &[("u", &state.u), ("ut", &state.ut)]));
    }
    let mut report = base_report(cfg, ctx, ClockSummary::of(&state.band));
    for step in 1..=steps {
        let res = solver
            .step(&mut state)
            .and_then(|_| exhausted(&state.band).map_or(Ok(()), Err));
        if let Err(e) = res {
            let (status, msg) = classify(e, step - 1)?;
            report.status = status;
            report.event = Some(msg);
            break;
        }
        feed(&state, step, &mut energy, &mut vort)?;
        let defect = state.mean_defect();
        drift = drift.max(defect);
        let mut vals = vec![state.t, state.band.clock, state.band.width(), state.u.max_abs(), defect];
        if let Some(l) = &energy {
            vals.push(l.lhs());
        }
        for l in &vort {
            vals.push(l.lhs());
        }
        rec.row(step, &vals);
        if rec.wants(step) {
            rec.snapshots.push(Snapshot::new(step, state.t, &[("u", &state.u), ("ut", &state.ut)]));
        }
        report.steps_completed = step;
    }
    if !rec.wants(report.steps_completed) {
        rec.snapshots.push(Snapshot::new(report.steps_completed, state.t, &[("u", &state.u), ("ut", &state.ut)]));
    }
    report.t_final = state.t;
    report.clock = ClockSummary::of(&state.band);
    report.mean_drift = Some(drift);
    report.functionals = energy.iter().chain(&vort).map(FunctionalSummary::of).collect();
    Ok((
        RunOutcome {
            report,
            ledger_csv: rec.rows,
            clock_csv: state.band.history_csv(),
        },
        rec.snapshots,
    ))
}

fn aniso_snapshot(step: usize, s: &AnisoState) -> Snapshot {
    Snapshot::new(step, s.t, &[("u", &s.u), ("ut", &s.ut), ("v", &s.v), ("vt", &s.vt)])
}

fn run_aniso(cfg: &RunConfig, ctx: &Context, every: usize) -> Result<(RunOutcome, Vec<Snapshot>)> {
    let eps = cfg.eps.ok_or_else(|| Error::config("eps", "required for the anisotropic system"))?;
    let a = cfg.band.a;
    let solver = AnisoSolver::new(&ctx.grid, eps, cfg.dt, cfg.physics)?;
    let mut state = prepare_initial(&ctx.data.u0, &ctx.data.u1, eps, a, cfg.band.lambda)?;
    let mut energy = if cfg.monitors.contains(&Monitor::Energy) {
        let dn = aniso_data_norm(&ctx.data.u0, &ctx.data.u1, eps, a)?;
        Some(EnergyLedger::new(&ctx.grid, LedgerKind::Aniso, ctx.r, 0.5, dn))
    } else {
        None
    };
    let mut cols: Vec<String> = ["step", "t", "tau", "band_width", "max_abs_u", "div", "div_t", "linear_energy"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    if energy.is_some() {
        cols.push("energy_lhs".into());
    }
    let mut rec = Recorder::new(cols, every);
    let steps = cfg.steps();
    if let Some(l) = energy.as_mut() {
        track_aniso(l, &state, trapezoid_weight(0, steps, cfg.dt))?;
    }
    if rec.wants(0) {
        rec.snapshots.push(aniso_snapshot(0, &state));
    }
    let div0 = state.divergence().0;
    let mut div_max = div0;
    let mut e_prev = state.linear_energy();
    let mut e_inc = f64::NEG_INFINITY;
    let mut report = base_report(cfg, ctx, ClockSummary::of(&state.band));
    for step in 1..=steps {
        let res = solver
            .step(&mut state)
            .and_then(|_| exhausted(&state.band).map_or(Ok(()), Err));
        if let Err(e) = res {
            let (status, msg) = classify(e, step - 1)?;
            report.status = status;
            report.event = Some(msg);
            break;
        }
        if let Some(l) = energy.as_mut() {
            track_aniso(l, &state, trapezoid_weight(step, steps, cfg.dt))?;
        }
        let (d, dt_div) = state.divergence();
        div_max = div_max.max(d);
        let e = state.linear_energy();
        e_inc = e_inc.max(e - e_prev);
        e_prev = e;
        let mut vals = vec![state.t, state.band.clock, state.band.width(), state.u.max_abs(), d, dt_div, e];
        if let Some(l) = &energy {
            vals.push(l.lhs());
        }
        rec.row(step, &vals);
        if rec.wants(step) {
            rec.snapshots.push(aniso_snapshot(step, &state));
        }
        report.steps_completed = step;
    }
    if !rec.wants(report.steps_completed) {
        rec.snapshots.push(aniso_snapshot(report.steps_completed, &state));
    }
    report.t_final = state.t;
    report.clock = ClockSummary::of(&state.band);
    report.divergence_initial = Some(div0);
    report.divergence_max = Some(div_max);
    report.linear_energy_max_increase = (report.steps_completed > 0).then_some(e_inc);
    report.functionals = energy.iter().map(FunctionalSummary::of).collect();
    Ok((
        RunOutcome {
            report,
            ledger_csv: rec.rows,
            clock_csv: state.band.history_csv(),
        },
        rec.snapshots,
    ))
}

fn run_paired(cfg: &RunConfig, ctx: &Context, every: usize) -> Result<(RunOutcome, Vec<Snapshot>)> {
    let eps = cfg
        .eps
        .or_else(|| cfg.eps_list.as_ref().and_then(|l| l.first().copied()))
        .ok_or_else(|| Error::config("eps", "paired runs need eps or eps_list"))?;
    let params = PairParams::from_config(cfg)?;
    let mut run = PairedRun::new(&ctx.data, eps, params)?;
    let cols: Vec<String> = [
        "step", "t", "theta", "tau", "eta", "eta_width", "sum_norm", "dy_norm", "eps_dx_norm", "dt_norm",
        "remainder_lhs",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let mut rec = Recorder::new(cols, every);
    let snap = |step: usize, run: &PairedRun| -> Result<Snapshot> {
        let r = crate::convergence::remainder(&run.aniso, &run.hydro)?;
        Ok(Snapshot::new(step, run.aniso.t, &[("r1", &r.r1), ("rt1", &r.rt1), ("r2", &r.r2), ("rt2", &r.rt2)]))
    };
    if rec.wants(0) {
        rec.snapshots.push(snap(0, &run)?);
    }
    let mut report = base_report(cfg, ctx, ClockSummary::of(&run.aniso.band));
    report.eps = Some(eps);
    for step in 1..=params.steps {
        if let Err(e) = run.step() {
            let (status, msg) = classify(e, step - 1)?;
            report.status = status;
            report.event = Some(msg);
            break;
        }
        let r = run.record();
        let g = r.groupings.last().copied().unwrap_or([0.0; 4]);
        rec.row(
            step,
            &[
                run.aniso.t,
                run.hydro.band.clock,
                run.aniso.band.clock,
                run.eta.clock,
                run.eta.width(),
                g[0],
                g[1],
                g[2],
                g[3],
                run.ledger.lhs(),
            ],
        );
        if rec.wants(step) {
            rec.snapshots.push(snap(step, &run)?);
        }
        report.steps_completed = step;
    }
    if !rec.wants(report.steps_completed) {
        rec.snapshots.push(snap(report.steps_completed, &run)?);
    }
    let record = run.record();
    report.t_final = run.aniso.t;
    report.clock = ClockSummary::of(&run.aniso.band);
    report.extra_clocks = vec![ClockSummary::of(&run.hydro.band), ClockSummary::of(&run.eta)];
    report.functionals = vec![FunctionalSummary::of(&run.ledger)];
    report.remainder = Some(RemainderSummary {
        eps,
        terminal_norm: record.terminal_norm,
        lhs: record.lhs,
        data_norm: record.data_norm,
    });
    let mut clock_csv = String::from("clock,t,value\n");
    for (name, band) in [("theta", &run.hydro.band), ("tau", &run.aniso.band), ("eta", &run.eta)] {
        for (t, c) in &band.history {
            let _ = writeln!(clock_csv, "{name},{},{}", fmt_f64(*t), fmt_f64(*c));
        }
    }
    Ok((
        RunOutcome {
            report,
            ledger_csv: rec.rows,
            clock_csv,
        },
        rec.snapshots,
    ))
}

/// Executes a configuration. With `out_dir` set, writes the run directory;
/// runtime events end up in the report's status, not in the error.
pub fn run(cfg: &RunConfig, out_dir: Option<&Path>) -> Result<RunOutcome> {
    let start = Instant::now();
    let ctx = context(cfg)?;
    let setup = start.elapsed().as_secs_f64();
    let every = cfg.output.as_ref().map_or(0, |o| o.snapshot_every);
    let (outcome, snapshots) = match cfg.system {
        SystemKind::Hydrostatic => run_hydro(cfg, &ctx, every)?,
        SystemKind::Anisotropic => run_aniso(cfg, &ctx, every)?,
        SystemKind::Paired => run_paired(cfg, &ctx, every)?,
    };
    let total = start.elapsed().as_secs_f64();
    if let Some(dir) = out_dir {
        let stored = stored_config(cfg);
        let mut w = RunWriter::new(dir)?;
        w.write("config.toml", stored.to_toml()?.as_bytes())?;
        w.write("ledger.csv", outcome.ledger_csv.as_bytes())?;
        w.write("clock.csv", outcome.clock_csv.as_bytes())?;
        for s in &snapshots {
            w.write_json(&format!("snapshots/step_{:06}.json", s.step), s)?;
        }
        w.write_json("report.json", &outcome.report)?;
        let timings = format!(
            "setup_seconds {setup:.6}\ntotal_seconds {total:.6}\nsteps {}\n",
            outcome.report.steps_completed
        );
        w.finish(&stored, &timings)?;
    }
    Ok(outcome)
}

/// The config as stored in a run directory: the output path is replaced by
/// `.` so the bytes do not depend on where the run was written.
fn stored_config(cfg: &RunConfig) -> RunConfig {
    let mut c = cfg.clone();
    if let Some(o) = c.output.as_mut() {
        o.dir = ".".into();
    }
    c
}

/// Output directory of a config, if any.
pub fn output_dir(cfg: &RunConfig) -> Option<PathBuf> {
    cfg.output.as_ref().map(|o| PathBuf::from(&o.dir))
}

/// Sweep over `eps_list` plus the optional refinement gate, written as
/// `sweep.csv`, `sweep.json` and `gate.json`.
pub fn run_sweep(cfg: &RunConfig, eps_list: &[f64], gate: Option<GateReport>, out_dir: Option<&Path>) -> Result<SweepResult> {
    let start = Instant::now();
    let ctx = context(cfg)?;
    let result = sweep(&ctx.data, PairParams::from_config(cfg)?, eps_list)?;
    if let Some(dir) = out_dir {
        let stored = stored_config(cfg);
        let mut w = RunWriter::new(dir)?;
        w.write("config.toml", stored.to_toml()?.as_bytes())?;
        w.write("sweep.csv", result.to_csv().as_bytes())?;
        w.write_json("sweep.json", &result)?;
        if let Some(g) = &gate {
            w.write_json("gate.json", g)?;
        }
        w.finish(&stored, &format!("total_seconds {:.6}\n", start.elapsed().as_secs_f64()))?;
    }
    Ok(result)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExportFormat {
    Csv,
    Json,
}

impl std::str::FromStr for ExportFormat {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ExportFormat::Csv),
            "json" => Ok(ExportFormat::Json),
            other => Err(Error::config("format", format!("expected csv or json, got {other:?}"))),
        }
    }
}

/// Converts a run directory into a plot-ready bundle under `export/`.
/// Returns the written paths relative to the run directory.
pub fn export(run_dir: &Path, format: ExportFormat) -> Result<Vec<String>> {
    let ledger = fs::read_to_string(run_dir.join("ledger.csv"))?;
    let mut snaps: Vec<PathBuf> = match fs::read_dir(run_dir.join("snapshots")) {
        Ok(entries) => entries
            .map(|e| e.map(|e| e.path()))
            .collect::<std::io::Result<_>>()?,
        Err(_) => Vec::new(),
    };
    snaps.sort();
    let out = run_dir.join("export");
    fs::create_dir_all(&out)?;
    let mut written = Vec::new();
    let mut put = |name: String, text: String| -> Result<()> {
        fs::write(out.join(&name), text)?;
        written.push(format!("export/{name}"));
        Ok(())
    };
    match format {
        ExportFormat::Csv => {
            put("ledger.csv".into(), ledger)?;
            for p in &snaps {
                let snap: Snapshot = serde_json::from_str(&fs::read_to_string(p)?)?;
                let mut s = String::from("x,y");
                for (n, _) in &snap.fields {
                    s.push(',');
                    s.push_str(n);
                }
                s.push('\n');
                let ny = snap.y.len();
                for (i, x) in snap.x.iter().enumerate() {
                    for (j, y) in snap.y.iter().enumerate() {
                        s.push_str(&fmt_f64(*x));
                        s.push(',');
                        s.push_str(&fmt_f64(*y));
                        for (_, v) in &snap.fields {
                            s.push(',');
                            s.push_str(&fmt_f64(v[i * ny + j]));
                        }
                        s.push('\n');
                    }
                }
                put(format!("step_{:06}.csv", snap.step), s)?;
            }
        }
        ExportFormat::Json => {
            let mut lines = ledger.lines();
            let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
            let mut rows = Vec::new();
            for line in lines {
                let mut obj = serde_json::Map::new();
                for (k, v) in header.iter().zip(line.split(',')) {
                    let num: f64 = v
                        .parse()
                        .map_err(|_| Error::Invariant(format!("bad ledger value {v:?}")))?;
                    obj.insert(k.to_string(), serde_json::json!(num));
                }
                rows.push(serde_json::Value::Object(obj));
            }
            put("ledger.json".into(), serde_json::to_string_pretty(&rows)? + "\n")?;
            let mut all = Vec::new();
            for p in &snaps {
                let snap: Snapshot = serde_json::from_str(&fs::read_to_string(p)?)?;
                all.push(snap);
            }
            put("snapshots.json".into(), serde_json::to_string(&all)? + "\n")?;
        }
    }
    Ok(written)
}

/// Data rows of a ledger (lines after the header).
pub fn ledger_rows(csv: &str) -> usize {
    csv.lines().skip(1).filter(|l| !l.is_empty()).count()
}
