//! The verbs behind the `stefan` binary.

use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use stefan_core::analysis::{settling_time, Diagnostics, KernelParams, Settling, SETTLING_LEVELS};
use stefan_core::oracle::oracle_run;
use stefan_core::physics::{check_assumptions, internal_energy, s_infinity, AdmissibilityReport};
use stefan_core::{derive, DerivedParams, GridSpec, Law, RunStatus, Trace};

use crate::config::ScenarioConfig;
use crate::error::CliError;
use crate::manifest::{RunDir, RunManifest};

/// Finished run: its manifest and directory.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub manifest: RunManifest,
    pub dir: PathBuf,
}

impl RunOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.manifest.succeeded() {
            0
        } else {
            4
        }
    }
}

fn derived(cfg: &ScenarioConfig) -> Result<DerivedParams, CliError> {
    derive(&cfg.params).map_err(|e| CliError::Config(e.to_string()))
}

/// Admissibility of the configured initial state. The setpoint restriction
/// is not applied to the uncontrolled law.
pub fn admissibility(cfg: &ScenarioConfig) -> Result<(AdmissibilityReport, bool), CliError> {
    cfg.validate()?;
    let dp = derived(cfg)?;
    let st = cfg.scenario().initial_state();
    let rep = check_assumptions(&st, &dp, cfg.controller.setpoint, cfg.side);
    let ok = match cfg.controller.law {
        Law::Zero => {
            rep.interface_interior.ok
                && rep.liquid_cone.ok
                && rep.solid_cone.ok
                && rep.s_inf_interior.ok
        }
        _ => rep.all_pass(),
    };
    Ok((rep, ok))
}

fn require_admissible(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let (rep, ok) = admissibility(cfg)?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Admissibility(rep.to_string()))
    }
}

/// Initial-state conditions only; the setpoint is irrelevant when two
/// solvers are compared on the same input.
fn require_state_admissible(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let (rep, _) = admissibility(cfg)?;
    if rep.interface_interior.ok && rep.liquid_cone.ok && rep.solid_cone.ok && rep.s_inf_interior.ok {
        Ok(())
    } else {
        Err(CliError::Admissibility(rep.to_string()))
    }
}

/// Trace-level checks written to every summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Audit {
    pub min_s: f64,
    pub max_s: f64,
    pub min_q: f64,
    pub max_q: f64,
    pub min_liquid_boundary: f64,
    /// `max |E - E(0) - injected| / E(0)`.
    pub energy_residual: f64,
    pub model_valid: bool,
    pub flux_signs: bool,
}

impl Audit {
    pub fn of(trace: &Trace) -> Self {
        let e0 = trace.samples.first().map_or(1.0, |s| s.energy.abs().max(f64::MIN_POSITIVE));
        let e_init = trace.samples.first().map_or(0.0, |s| s.energy);
        let mut a = Audit {
            min_s: f64::INFINITY,
            max_s: f64::NEG_INFINITY,
            min_q: f64::INFINITY,
            max_q: f64::NEG_INFINITY,
            min_liquid_boundary: f64::INFINITY,
            energy_residual: 0.0,
            model_valid: true,
            flux_signs: true,
        };
        for s in &trace.samples {
            a.min_s = a.min_s.min(s.s);
            a.max_s = a.max_s.max(s.s);
            a.min_q = a.min_q.min(s.q_c);
            a.max_q = a.max_q.max(s.q_c);
            a.min_liquid_boundary = a.min_liquid_boundary.min(s.liquid_boundary);
            a.energy_residual = a
                .energy_residual
                .max((s.energy - e_init - s.injected).abs() / e0);
            a.model_valid &= s.validity.model_valid();
            a.flux_signs &= s.validity.liquid_flux_sign.ok && s.validity.solid_flux_sign.ok;
        }
        a
    }
}

/// Sign checks on `q_c` allow `-Q_REL_TOL * |q_c(0)|`: once the energy
/// error has decayed, the control is round-off of `E - γ s_r`.
pub const Q_REL_TOL: f64 = 1e-9;

impl Audit {
    pub fn q_nonnegative(&self, trace: &Trace) -> bool {
        let q0 = trace.samples.first().map_or(0.0, |s| s.q_c.abs());
        self.min_q >= -Q_REL_TOL * q0
    }

    pub fn q_nonpositive(&self, trace: &Trace) -> bool {
        let q0 = trace.samples.first().map_or(0.0, |s| s.q_c.abs());
        self.max_q <= Q_REL_TOL * q0
    }
}

pub(crate) fn fmt(x: f64) -> String {
    format!("{x:e}")
}

fn settling_text(st: &Settling) -> String {
    match st {
        Settling::Settled { tau } => fmt(*tau),
        Settling::NotSettled { .. } => "unsettled".into(),
    }
}

fn trace_error(trace: &Trace) -> Option<String> {
    match &trace.status {
        RunStatus::Completed => None,
        RunStatus::Failed(e) => Some(e.to_string()),
    }
}

fn write_summary(
    w: &mut dyn Write,
    cfg: &ScenarioConfig,
    dp: &DerivedParams,
    trace: &Trace,
    diag: Option<&Diagnostics>,
) -> std::io::Result<()> {
    let st = cfg.scenario().initial_state();
    let audit = Audit::of(trace);
    writeln!(w, "name = {}", cfg.name)?;
    writeln!(
        w,
        "status = {}",
        trace_error(trace).map_or("completed".into(), |e| format!("failed: {e}"))
    )?;
    writeln!(w, "law = {}", law_name(&cfg.controller.law))?;
    writeln!(w, "s0 = {}", fmt(st.s))?;
    writeln!(w, "s_r = {}", fmt(cfg.controller.setpoint))?;
    writeln!(w, "s_inf = {}", fmt(s_infinity(&st, dp)))?;
    writeln!(w, "E0 = {}", fmt(internal_energy(&st, dp)))?;
    if let Some(last) = trace.last() {
        writeln!(w, "t_end = {}", fmt(last.t))?;
        writeln!(w, "s_end = {}", fmt(last.s))?;
    }
    writeln!(w, "s.min = {}", fmt(audit.min_s))?;
    writeln!(w, "s.max = {}", fmt(audit.max_s))?;
    writeln!(w, "q_c.min = {}", fmt(audit.min_q))?;
    writeln!(w, "q_c.max = {}", fmt(audit.max_q))?;
    writeln!(w, "energy.max_rel_residual = {}", fmt(audit.energy_residual))?;
    writeln!(w, "validity.model = {}", audit.model_valid)?;
    writeln!(w, "validity.flux_signs = {}", audit.flux_signs)?;
    match diag {
        Some(d) => d.write_summary(&mut *w)?,
        None => {
            for e in SETTLING_LEVELS {
                let s = settling_time(trace, cfg.controller.setpoint, e);
                writeln!(w, "settling.{e}pct = {}", settling_text(&s))?;
            }
        }
    }
    Ok(())
}

pub fn law_name(law: &Law) -> &'static str {
    match law {
        Law::TwoPhase => "two-phase",
        Law::OnePhase => "one-phase",
        Law::Robust { .. } => "robust",
        Law::ConservativeRobust { .. } => "conservative-robust",
        Law::OpenLoopOracle { .. } => "open-loop-oracle",
        Law::Cooling => "cooling",
        Law::Zero => "zero",
    }
}

fn simulate(cfg: &ScenarioConfig) -> Result<Trace, CliError> {
    cfg.scenario().simulate().map_err(|e| match e {
        stefan_core::StefanError::Config(_)
        | stefan_core::StefanError::Stencil { .. }
        | stefan_core::StefanError::ParameterDomain { .. }
        | stefan_core::StefanError::Perturbation(_) => CliError::Config(e.to_string()),
        other => CliError::Numerical(other.to_string()),
    })
}

fn diagnostics(
    cfg: &ScenarioConfig,
    dp: &DerivedParams,
    trace: &Trace,
) -> Result<Diagnostics, String> {
    if cfg.controller.gain <= 0.0 {
        return Err("diagnostics skipped: the functionals need a positive gain".into());
    }
    let kp = KernelParams::select(cfg.controller.gain, dp, cfg.params.length)
        .map_err(|e| format!("diagnostics skipped: {e}"))?;
    Diagnostics::compute(trace, dp, cfg.controller.setpoint, &kp)
        .map_err(|e| format!("diagnostics skipped: {e}"))
}

/// Checks, simulates and writes one run directory.
///
/// Config problems and admissibility failures return `Err` before anything
/// is written. A run that stops early still writes its partial outputs and
/// a manifest with a numerical-failure status.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    out_root: &Path,
    command: &str,
) -> Result<RunOutcome, CliError> {
    run_scenario_traced(cfg, out_root, command).map(|(out, _)| out)
}

/// [`run_scenario`], also handing back the in-memory trace.
pub fn run_scenario_traced(
    cfg: &ScenarioConfig,
    out_root: &Path,
    command: &str,
) -> Result<(RunOutcome, Trace), CliError> {
    require_admissible(cfg)?;
    let dp = derived(cfg)?;
    let trace = simulate(cfg)?;
    let mut dir = RunDir::create(out_root, &cfg.name, command, &cfg.hash())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    write_trace_outputs(&mut dir, cfg, &dp, &trace, "")?;
    let error = trace_error(&trace);
    let path = dir.path().to_path_buf();
    let manifest = dir.finish(error)?;
    Ok((
        RunOutcome {
            manifest,
            dir: path,
        },
        trace,
    ))
}

fn write_trace_outputs(
    dir: &mut RunDir,
    cfg: &ScenarioConfig,
    dp: &DerivedParams,
    trace: &Trace,
    prefix: &str,
) -> Result<(), CliError> {
    if cfg.outputs.samples {
        dir.write(&format!("{prefix}samples.csv"), |w| {
            trace.write_samples(w).map_err(std::io::Error::other)
        })?;
    }
    if cfg.outputs.profiles && !trace.snapshots.is_empty() {
        dir.write(&format!("{prefix}profiles.csv"), |w| {
            trace.write_profiles(w).map_err(std::io::Error::other)
        })?;
    }
    let diag = if cfg.outputs.diagnostics {
        match diagnostics(cfg, dp, trace) {
            Ok(d) => {
                dir.write(&format!("{prefix}diagnostics.csv"), |w| {
                    d.write_series(w).map_err(std::io::Error::other)
                })?;
                Some(d)
            }
            Err(msg) => {
                dir.warn(msg);
                None
            }
        }
    } else {
        None
    };
    for msg in &trace.warnings {
        dir.warn(msg.clone());
    }
    dir.write(&format!("{prefix}summary.txt"), |w| {
        write_summary(w, cfg, dp, trace, diag.as_ref())
    })
}

/// Prints the admissibility report; `Ok(true)` when the run may start.
pub fn check(cfg: &ScenarioConfig, out: &mut dyn Write) -> Result<bool, CliError> {
    let (rep, ok) = admissibility(cfg)?;
    let io = |e| CliError::io("<stdout>", e);
    writeln!(out, "{rep}").map_err(io)?;
    if matches!(cfg.controller.law, Law::Zero) {
        writeln!(out, "(setpoint restriction not required for the uncontrolled law)").map_err(io)?;
    }
    writeln!(out, "{}", if ok { "admissible" } else { "NOT admissible" }).map_err(io)?;
    Ok(ok)
}

// ---------------------------------------------------------------- crosscheck

#[derive(Debug, Clone, PartialEq)]
pub struct CrossLevel {
    pub grid: GridSpec,
    pub cells: usize,
    pub dt: f64,
    pub max_ds: f64,
    pub max_de: f64,
    pub oracle_mushy_warnings: usize,
}

/// Interpolates a sample column at `t`.
fn interp(trace: &Trace, t: f64, f: impl Fn(&stefan_core::Sample) -> f64) -> Option<f64> {
    let smp = &trace.samples;
    if smp.is_empty() || t < smp[0].t || t > smp[smp.len() - 1].t {
        return None;
    }
    let i = smp.partition_point(|x| x.t < t);
    if i == 0 {
        return Some(f(&smp[0]));
    }
    let (a, b) = (&smp[i - 1], &smp[i]);
    let w = (t - a.t) / (b.t - a.t);
    Some(f(a) + w * (f(b) - f(a)))
}

/// `max |Δs|` and `max |ΔE|` over the oracle sample times both traces cover.
pub fn compare(primary: &Trace, oracle: &Trace) -> (f64, f64) {
    let mut ds: f64 = 0.0;
    let mut de: f64 = 0.0;
    for o in &oracle.samples {
        if let (Some(s), Some(e)) = (interp(primary, o.t, |x| x.s), interp(primary, o.t, |x| x.energy)) {
            ds = ds.max((s - o.s).abs());
            de = de.max((e - o.energy).abs());
        }
    }
    (ds, de)
}

/// Level `k` doubles the grid, the oracle cells and halves dt `k` times.
pub fn refine_config(cfg: &ScenarioConfig, k: u32) -> ScenarioConfig {
    let f = 1usize << k;
    let mut c = cfg.clone();
    c.grid = GridSpec {
        n_l: (cfg.grid.n_l - 1) * f + 1,
        n_s: (cfg.grid.n_s - 1) * f + 1,
    };
    c.oracle.cells = cfg.oracle.cells * f;
    c.stepper.dt = cfg.stepper.dt / f as f64;
    c.stepper.output_stride = cfg.stepper.output_stride * f;
    c
}

pub fn crosscheck_level(cfg: &ScenarioConfig) -> Result<(CrossLevel, Trace, Trace), CliError> {
    cfg.validate()?;
    let mut quiet = cfg.clone();
    quiet.stepper.profile_stride = 0;
    let primary = simulate(&quiet)?;
    if let Some(e) = trace_error(&primary) {
        return Err(CliError::Numerical(format!("primary solver: {e}")));
    }
    let st = cfg.scenario().initial_state();
    let mut input = cfg.controller;
    let oracle = oracle_run(&st, &mut input, &cfg.params, cfg.side, &cfg.oracle_config())
        .map_err(|e| CliError::Numerical(format!("oracle: {e}")))?;
    if let Some(e) = trace_error(&oracle) {
        return Err(CliError::Numerical(format!("oracle: {e}")));
    }
    let (max_ds, max_de) = compare(&primary, &oracle);
    Ok((
        CrossLevel {
            grid: cfg.grid,
            cells: cfg.oracle.cells,
            dt: cfg.stepper.dt,
            max_ds,
            max_de,
            oracle_mushy_warnings: oracle.warnings.len(),
        },
        primary,
        oracle,
    ))
}

/// Primary solver against the enthalpy oracle, optionally on a refinement
/// ladder of `levels` runs.
pub fn crosscheck(cfg: &ScenarioConfig, levels: u32, out_root: &Path) -> Result<RunOutcome, CliError> {
    require_state_admissible(cfg)?;
    let levels = levels.max(1);
    let results: Vec<_> = (0..levels)
        .into_par_iter()
        .map(|k| crosscheck_level(&refine_config(cfg, k)))
        .collect::<Result<_, _>>()?;
    let mut dir = RunDir::create(out_root, &format!("{}-crosscheck", cfg.name), "crosscheck", &cfg.hash())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    let (_, primary, oracle) = &results[0];
    dir.write("primary.csv", |w| primary.write_samples(w).map_err(std::io::Error::other))?;
    dir.write("oracle.csv", |w| oracle.write_samples(w).map_err(std::io::Error::other))?;
    dir.write("crosscheck.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["level", "n_l", "n_s", "cells", "dt", "max_abs_ds", "max_abs_dE"])?;
        for (k, (lv, _, _)) in results.iter().enumerate() {
            c.write_record([
                k.to_string(),
                lv.grid.n_l.to_string(),
                lv.grid.n_s.to_string(),
                lv.cells.to_string(),
                fmt(lv.dt),
                fmt(lv.max_ds),
                fmt(lv.max_de),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    for (k, (_, _, o)) in results.iter().enumerate() {
        for msg in &o.warnings {
            dir.warn(format!("level {k} oracle: {msg}"));
        }
    }
    let monotone = results.windows(2).all(|w| w[1].0.max_ds < w[0].0.max_ds);
    dir.write("report.txt", |w| {
        for (k, (lv, _, o)) in results.iter().enumerate() {
            writeln!(
                w,
                "level {k}: grid {}/{} cells {} dt {} -> max|ds| = {} m, max|dE| = {} J/m^2{}",
                lv.grid.n_l,
                lv.grid.n_s,
                lv.cells,
                fmt(lv.dt),
                fmt(lv.max_ds),
                fmt(lv.max_de),
                if o.warnings.is_empty() { "" } else { " (oracle warnings)" }
            )?;
        }
        if results.len() > 1 {
            writeln!(w, "monotone_ds = {monotone}")?;
        }
        Ok(())
    })?;
    let path = dir.path().to_path_buf();
    Ok(RunOutcome {
        manifest: dir.finish(None)?,
        dir: path,
    })
}

// --------------------------------------------------------------------- sweep

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub eps_l: f64,
    pub eps_f: f64,
    pub eps_s: f64,
    /// Ordering `ε_l ≥ ε_f ≥ ε_s` and the ratio bound both hold.
    pub guaranteed: bool,
    pub status: String,
    pub valid: bool,
    pub min_q: f64,
    pub tau_1pct: Option<f64>,
    pub s_end: f64,
    pub converged: bool,
    pub run_id: Option<String>,
}

pub fn guaranteed(eps_l: f64, eps_f: f64, eps_s: f64, ratio_bound: f64) -> bool {
    eps_l >= eps_f && eps_f >= eps_s && (eps_f - eps_l).abs() / (1.0 + eps_l) <= ratio_bound
}

fn sweep_cell(
    base: &ScenarioConfig,
    (eps_l, eps_f, eps_s): (f64, f64, f64),
    idx: usize,
    ratio_bound: f64,
    out_root: &Path,
) -> Result<SweepCell, CliError> {
    let mut cfg = base.clone();
    cfg.sweep = None;
    cfg.name = format!("{}-cell{idx:03}", base.name);
    cfg.controller.law = Law::Robust {
        eps_l,
        eps_s,
        eps_f,
    };
    let mut cell = SweepCell {
        eps_l,
        eps_f,
        eps_s,
        guaranteed: guaranteed(eps_l, eps_f, eps_s, ratio_bound),
        status: String::new(),
        valid: false,
        min_q: f64::NAN,
        tau_1pct: None,
        s_end: f64::NAN,
        converged: false,
        run_id: None,
    };
    match run_scenario_traced(&cfg, out_root, "sweep") {
        Ok((out, tr)) => {
            cell.status = if out.manifest.succeeded() {
                "completed".into()
            } else {
                "numerical-failure".into()
            };
            cell.run_id = Some(out.manifest.run_id.clone());
            let audit = Audit::of(&tr);
            cell.valid = audit.model_valid && out.manifest.succeeded();
            cell.min_q = audit.min_q;
            cell.s_end = tr.last().map_or(f64::NAN, |s| s.s);
            cell.tau_1pct = settling_time(&tr, cfg.controller.setpoint, 1.0).tau();
            cell.converged = out.manifest.succeeded() && cell.tau_1pct.is_some();
        }
        Err(CliError::Admissibility(_)) => cell.status = "inadmissible".into(),
        Err(CliError::Numerical(msg)) => cell.status = format!("numerical-failure: {msg}"),
        Err(e) => return Err(e),
    }
    Ok(cell)
}

/// Runs every robust-law triple of the config's `[sweep]` table.
pub fn sweep(cfg: &ScenarioConfig, workers: Option<usize>, out_root: &Path) -> Result<(RunOutcome, Vec<SweepCell>), CliError> {
    cfg.validate()?;
    let sw = cfg
        .sweep
        .clone()
        .ok_or_else(|| CliError::Config("sweep needs a [sweep] table with eps_l, eps_f, eps_s lists".into()))?;
    let mut triples = Vec::new();
    for &l in &sw.eps_l {
        for &f in &sw.eps_f {
            for &s in &sw.eps_s {
                triples.push((l, f, s));
            }
        }
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = workers {
        if n == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        pool = pool.num_threads(n);
    }
    let pool = pool
        .build()
        .map_err(|e| CliError::Config(format!("worker pool: {e}")))?;
    let cells: Vec<SweepCell> = pool.install(|| {
        triples
            .par_iter()
            .enumerate()
            .map(|(i, &tr)| sweep_cell(cfg, tr, i, sw.ratio_bound, out_root))
            .collect::<Result<_, _>>()
    })?;

    let mut dir = RunDir::create(out_root, &format!("{}-sweep", cfg.name), "sweep", &cfg.hash())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    dir.write("sweep.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record([
            "eps_l", "eps_f", "eps_s", "guaranteed", "status", "valid", "min_q", "tau_1pct", "s_end", "converged",
        ])?;
        for cell in &cells {
            c.write_record([
                fmt(cell.eps_l),
                fmt(cell.eps_f),
                fmt(cell.eps_s),
                cell.guaranteed.to_string(),
                cell.status.clone(),
                cell.valid.to_string(),
                fmt(cell.min_q),
                cell.tau_1pct.map_or("unsettled".into(), fmt),
                fmt(cell.s_end),
                cell.converged.to_string(),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    dir.write("cells.txt", |w| {
        for (i, cell) in cells.iter().enumerate() {
            writeln!(w, "{i} {}", cell.run_id.as_deref().unwrap_or("-"))?;
        }
        Ok(())
    })?;
    for cell in cells.iter().filter(|c| c.guaranteed && !c.converged) {
        dir.warn(format!(
            "covered triple ({}, {}, {}) did not reach the 1% band: {}",
            cell.eps_l, cell.eps_f, cell.eps_s, cell.status
        ));
    }
    let path = dir.path().to_path_buf();
    let manifest = dir.finish(None)?;
    Ok((RunOutcome { manifest, dir: path }, cells))
}

// ------------------------------------------------------------------- presets

/// The reference scenario with the two designs side by side.
#[derive(Debug, Clone)]
pub struct Comparison {
    pub two_phase: Trace,
    pub one_phase: Trace,
    pub setpoint: f64,
}

fn with_law(cfg: &ScenarioConfig, law: Law) -> ScenarioConfig {
    let mut c = cfg.clone();
    c.controller.law = law;
    c
}

pub fn compare_designs(cfg: &ScenarioConfig) -> Result<Comparison, CliError> {
    let two = with_law(cfg, Law::TwoPhase);
    let one = with_law(cfg, Law::OnePhase);
    require_admissible(&two)?;
    require_admissible(&one)?;
    let (a, b) = rayon::join(|| simulate(&two), || simulate(&one));
    let (a, b) = (a?, b?);
    for (name, tr) in [("two-phase", &a), ("one-phase", &b)] {
        if let Some(e) = trace_error(tr) {
            return Err(CliError::Numerical(format!("{name}: {e}")));
        }
    }
    Ok(Comparison {
        two_phase: a,
        one_phase: b,
        setpoint: cfg.controller.setpoint,
    })
}

/// `τ_ε` for both designs: `(ε, two-phase, one-phase)`.
pub fn settling_table(cmp: &Comparison) -> Vec<(f64, Settling, Settling)> {
    SETTLING_LEVELS
        .iter()
        .map(|&e| {
            (
                e,
                settling_time(&cmp.two_phase, cmp.setpoint, e),
                settling_time(&cmp.one_phase, cmp.setpoint, e),
            )
        })
        .collect()
}

/// Interface, heat input and `T_l(0)` responses of both designs.
pub fn preset_fig3(cfg: &ScenarioConfig, out_root: &Path) -> Result<RunOutcome, CliError> {
    let cmp = compare_designs(cfg)?;
    let dp = derived(cfg)?;
    let mut dir = RunDir::create(out_root, &format!("{}-fig3", cfg.name), "preset-fig3", &cfg.hash())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    let two_cfg = with_law(cfg, Law::TwoPhase);
    let one_cfg = with_law(cfg, Law::OnePhase);
    write_trace_outputs(&mut dir, &two_cfg, &dp, &cmp.two_phase, "two-phase-")?;
    write_trace_outputs(&mut dir, &one_cfg, &dp, &cmp.one_phase, "one-phase-")?;
    let tm = cfg.params.t_melt;
    dir.write("responses.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["t", "s_two_phase", "q_two_phase", "Tl0_two_phase", "s_one_phase", "q_one_phase", "Tl0_one_phase"])?;
        for (a, b) in cmp.two_phase.samples.iter().zip(&cmp.one_phase.samples) {
            c.write_record([
                fmt(a.t),
                fmt(a.s),
                fmt(a.q_c),
                fmt(tm + a.liquid_boundary),
                fmt(b.s),
                fmt(b.q_c),
                fmt(tm + b.liquid_boundary),
            ])?;
        }
        c.flush()?;
        Ok(())
    })?;
    let s0 = cfg.initial.s0();
    dir.write("fig3.txt", |w| {
        writeln!(w, "horizon = {}", fmt(cfg.stepper.t_end))?;
        writeln!(w, "q_tolerance = {} * |q_c(0)|", fmt(Q_REL_TOL))?;
        for (name, tr) in [("two_phase", &cmp.two_phase), ("one_phase", &cmp.one_phase)] {
            let a = Audit::of(tr);
            let end = tr.last().map_or(f64::NAN, |s| s.s);
            writeln!(w, "{name}.s_min = {}", fmt(a.min_s))?;
            writeln!(w, "{name}.dips_below_s0 = {}", a.min_s < s0)?;
            writeln!(w, "{name}.s_end = {}", fmt(end))?;
            writeln!(w, "{name}.final_error = {}", fmt((end - cmp.setpoint).abs()))?;
            writeln!(w, "{name}.q_min = {}", fmt(a.min_q))?;
            writeln!(w, "{name}.q_nonnegative = {}", a.q_nonnegative(tr))?;
            writeln!(w, "{name}.Tl0_above_melting = {}", a.min_liquid_boundary >= 0.0)?;
        }
        Ok(())
    })?;
    let path = dir.path().to_path_buf();
    Ok(RunOutcome {
        manifest: dir.finish(None)?,
        dir: path,
    })
}

/// Settling-time table of both designs.
pub fn preset_fig5(cfg: &ScenarioConfig, out_root: &Path) -> Result<RunOutcome, CliError> {
    let cmp = compare_designs(cfg)?;
    let table = settling_table(&cmp);
    let mut dir = RunDir::create(out_root, &format!("{}-fig5", cfg.name), "preset-fig5", &cfg.hash())?;
    dir.write_text("config.toml", &cfg.to_toml())?;
    dir.write("settling.csv", |w| {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["eps_percent", "tau_two_phase", "tau_one_phase", "ratio"])?;
        for (e, a, b) in &table {
            let ratio = match (a.tau(), b.tau()) {
                (Some(x), Some(y)) if x > 0.0 => fmt(y / x),
                _ => "unsettled".into(),
            };
            c.write_record([fmt(*e), settling_text(a), settling_text(b), ratio])?;
        }
        c.flush()?;
        Ok(())
    })?;
    for (e, a, b) in &table {
        if a.tau().is_none() || b.tau().is_none() {
            dir.warn(format!("{e}% band not reached by both designs within {} s", cfg.stepper.t_end));
        }
    }
    let path = dir.path().to_path_buf();
    Ok(RunOutcome {
        manifest: dir.finish(None)?,
        dir: path,
    })
}
