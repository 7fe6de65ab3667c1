//! The five subcommands. Each returns the checks it performed; the caller
//! turns them (and any error) into an exit code and a manifest.

use std::f64::consts::PI;
use std::time::Instant;

use nc_sigma::flow::{perturb, relax, stable_step, FlowConfig, FlowStatus};
use nc_sigma::instanton::{
    battery_for, build_projection_with, gaussian_section, lattice_generators, lattice_translate,
    moduli_scan, DualityBranch, PairKind, ScanSample, CHARGE_SIGN, INSTANTON_BRANCH,
};
use nc_sigma::io::{series_from_json, series_to_json};
use nc_sigma::module::{ModuleGeometry, SectionFile};
use nc_sigma::sigma::ProjectionReport;
use nc_sigma::tolerances::Tolerances;
use nc_sigma::{ConformalStructure, TwistedSeries, C64};
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{parse_amplitudes, Mode, ReportLevel, RunConfig};
use crate::output::{Check, Conventions, OutputDir, RunManifest};
use crate::{selftest, CliError, EXIT_NUMERIC, EXIT_OK};

/// Limits asserted on a freshly built instanton.
pub mod limits {
    pub const IDEMPOTENCY: f64 = 1e-8;
    pub const HERMITICITY: f64 = 1e-10;
    pub const CHARGE: f64 = 1e-6;
    pub const ACTION: f64 = 1e-3;
    pub const BP_GAP: f64 = 1e-3;
    pub const EOM: f64 = 1e-6;
    pub const DUALITY: f64 = 1e-6;
    pub const TRACE_MOD_ONE: f64 = 1e-4;
    pub const FLOW_MONOTONE: f64 = 1e-9;
    pub const FLOW_CHARGE_DRIFT: f64 = 1e-4;
}

/// Distance of `x` to the nearest integer.
pub fn mod_one_distance(x: f64) -> f64 {
    (x - x.round()).abs()
}

/// Checks every property a Gaussian instanton is expected to have.
pub fn instanton_checks(report: &ProjectionReport, geometry: &ModuleGeometry) -> Vec<Check> {
    let q = geometry.q as f64;
    let expected_charge = (CHARGE_SIGN * geometry.q) as f64;
    let branch = match INSTANTON_BRANCH {
        DualityBranch::SelfDual => report.sd_residual,
        DualityBranch::AntiSelfDual => report.asd_residual,
    };
    let trace_target = geometry.r as f64 + q * geometry.theta;
    vec![
        Check::flag("projection_valid", report.valid, "idempotent, hermitian, integral charge"),
        Check::at_most("idempotency", report.idempotency_residual, limits::IDEMPOTENCY),
        Check::at_most("hermiticity", report.hermiticity_residual, limits::HERMITICITY),
        Check::at_most("charge", (report.charge_raw - expected_charge).abs(), limits::CHARGE),
        Check::at_most("action", (report.action - 2.0 * q).abs(), limits::ACTION),
        Check::at_most("bp_gap", report.bp_gap, limits::BP_GAP),
        Check::at_most("eom_residual", report.eom_residual, limits::EOM),
        Check::at_most("duality_branch_residual", branch, limits::DUALITY),
        Check::at_most(
            "trace_mod_one",
            mod_one_distance(report.trace - trace_target),
            limits::TRACE_MOD_ONE,
        ),
    ]
}

fn report_csv(report: &ProjectionReport) -> String {
    format!("{}\n{}\n", ProjectionReport::CSV_HEADER, report.csv_row())
}

fn window_hint(window: usize) -> String {
    format!(
        "window M = {window}: the truncated Gram element or projection did not reach tolerance; \
         a larger window usually fixes this"
    )
}

pub fn cmd_build(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    build_inner(cfg, out).map_err(|e| e.with_context(|| window_hint(cfg.window)))
}

fn build_inner(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let icfg = cfg.instanton()?;
    let psi = gaussian_section(&icfg)?;
    out.write_json("section.json", &SectionFile::from(&psi))?;
    let battery = battery_for(&icfg)?;
    let inst = build_projection_with(&icfg, &battery)?;
    out.write_text("projection.json", &(series_to_json(&inst.projection)? + "\n"))?;
    out.write_json("report.json", &inst.report)?;
    out.write_text("report.csv", &report_csv(&inst.report))?;
    out.write_json("diagnostics.json", &inst.diagnostics)?;
    Ok(instanton_checks(&inst.report, &icfg.geometry))
}

fn read_series(path: &std::path::Path) -> Result<TwistedSeries, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    Ok(series_from_json(&text)?)
}

pub fn cmd_verify(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let input = cfg
        .input
        .as_ref()
        .ok_or_else(|| CliError::Config("verify needs --input <projection.json>".into()))?;
    let p = read_series(input)?;
    let cs = ConformalStructure::new(cfg.tau())?;
    let report = ProjectionReport::evaluate(&p, &cs, &cfg.tolerances)?;
    out.write_json("report.json", &report)?;
    out.write_text("report.csv", &report_csv(&report))?;
    Ok(vec![Check::flag(
        "projection_valid",
        report.valid,
        "idempotent, hermitian, integral charge",
    )])
}

#[derive(Serialize)]
struct FlowSummary<'a> {
    seed: u64,
    settings: &'a crate::config::FlowSettings,
    step: f64,
    status: &'a FlowStatus,
    accepted_steps: usize,
    rejected: usize,
    charge_drift: f64,
    max_action_increase: f64,
    initial: &'a nc_sigma::flow::FlowRecord,
    last: &'a nc_sigma::flow::FlowRecord,
    final_report: ProjectionReport,
}

pub fn cmd_flow(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let fs = &cfg.flow;
    let cs = ConformalStructure::new(cfg.tau())?;
    // `flow.input` wins over the generic `--input`
    let start = match fs.input.as_ref().or(cfg.input.as_ref()) {
        Some(path) => read_series(path)?,
        None => {
            let icfg = cfg.instanton()?;
            let battery = battery_for(&icfg)?;
            nc_sigma::instanton::build_projection_only(&icfg, &battery)?.0
        }
    };
    let start = if fs.perturb_amplitude > 0.0 {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        perturb(&start, &mut rng, fs.perturb_amplitude, fs.perturb_radius, &cfg.tolerances)?
    } else {
        start
    };
    out.write_text("start.json", &(series_to_json(&start)? + "\n"))?;
    let step = fs.step.unwrap_or_else(|| stable_step(start.half_width(), &cs));
    let flow_cfg = FlowConfig {
        step,
        max_steps: fs.max_steps,
        purify_every: fs.purify_every,
        stop_grad_tol: fs.stop_grad_tol,
        min_step: fs.min_step.min(step),
        cs,
        tolerances: cfg.tolerances.clone(),
    };
    flow_cfg
        .validate()
        .map_err(|e| CliError::Config(e.to_string()))?;
    let (p, trace) = relax(&start, &flow_cfg)?;
    out.write_text("final.json", &(series_to_json(&p)? + "\n"))?;
    out.write_text("trace.csv", &trace.csv())?;
    let final_report = ProjectionReport::evaluate(&p, &cs, &cfg.tolerances)?;
    let initial = trace.records.first().expect("trace starts with the input");
    let last = trace.last().expect("trace starts with the input");
    let accepted = trace.records.len() - 1;
    let summary = FlowSummary {
        seed: cfg.seed,
        settings: fs,
        step,
        status: &trace.status,
        accepted_steps: accepted,
        rejected: trace.rejected,
        charge_drift: trace.charge_drift(),
        max_action_increase: trace.max_action_increase(),
        initial,
        last,
        final_report,
    };
    out.write_json("trace.json", &summary)?;
    let progressed = match &trace.status {
        FlowStatus::Converged => true,
        FlowStatus::Aborted { .. } => false,
        _ => accepted > 0,
    };
    Ok(vec![
        Check::flag("flow_progress", progressed, format!("{:?}, {accepted} accepted steps", trace.status)),
        Check::at_most("monotone_action", trace.max_action_increase(), limits::FLOW_MONOTONE),
        Check::at_most("charge_drift", trace.charge_drift(), limits::FLOW_CHARGE_DRIFT),
        Check::at_most("final_bp_gap", last.bp_gap, fs.bp_gap_tol),
    ])
}

/// Samples and flagged pairs of a scan configuration.
pub fn scan_plan(
    cfg: &RunConfig,
    geometry: &ModuleGeometry,
    cs: &ConformalStructure,
) -> Result<(Vec<ScanSample>, Vec<(usize, usize, PairKind)>, Vec<bool>), CliError> {
    let sc = &cfg.scan;
    let [l1, l2] = lattice_generators(cs);
    let mut lambdas = Vec::new();
    for i in 0..sc.grid {
        for j in 0..sc.grid {
            let (x, y) = (i as f64 / sc.grid as f64, j as f64 / sc.grid as f64);
            lambdas.push(l1 * x + l2 * y);
        }
    }
    lambdas.extend(sc.lambdas.iter().map(|v| C64::new(v[0], v[1])));
    let amp_sets: Vec<Vec<C64>> = if sc.amplitude_sets.is_empty() {
        vec![cfg.amplitudes(geometry.q)?]
    } else {
        sc.amplitude_sets.iter().map(|a| parse_amplitudes(a)).collect()
    };
    if lambdas.is_empty() || amp_sets.is_empty() {
        return Err(CliError::Config("empty scan grid".into()));
    }
    let mut samples = Vec::new();
    let mut pairs = Vec::new();
    let mut is_base = Vec::new();
    for &lambda in &lambdas {
        let mut firsts = Vec::new();
        for amps in &amp_sets {
            let b = samples.len();
            firsts.push(b);
            samples.push(ScanSample {
                lambda,
                amplitudes: amps.clone(),
            });
            is_base.push(true);
            if sc.lattice_duplicates && amps.len() == geometry.q as usize {
                for (m, n) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (l, a) = lattice_translate(lambda, amps, m, n, geometry, cs)?;
                    pairs.push((b, samples.len(), PairKind::Lattice));
                    samples.push(ScanSample {
                        lambda: l,
                        amplitudes: a,
                    });
                    is_base.push(false);
                }
            }
            if sc.phase_duplicates {
                let phase = C64::from_polar(1.0, 0.7 * PI);
                pairs.push((b, samples.len(), PairKind::Phase));
                samples.push(ScanSample {
                    lambda,
                    amplitudes: amps.iter().map(|a| a * phase).collect(),
                });
                is_base.push(false);
            }
        }
        for w in firsts.windows(2) {
            pairs.push((w[0], w[1], PairKind::Distinct));
        }
    }
    Ok((samples, pairs, is_base))
}

pub fn cmd_scan(cfg: &RunConfig, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let icfg = cfg.instanton()?;
    let (samples, pairs, is_base) = scan_plan(cfg, &icfg.geometry, &icfg.cs)?;
    let battery = battery_for(&icfg)?;
    let all = cfg.scan.reports == ReportLevel::All;
    let mut table = moduli_scan(&icfg, &samples, &pairs, &battery, all)?;
    if cfg.scan.reports == ReportLevel::Base {
        let reports: Vec<_> = table
            .rows
            .par_iter()
            .zip(is_base.par_iter())
            .map(|(row, &base)| match (&row.projection, base) {
                (Some(p), true) => ProjectionReport::evaluate(p, &icfg.cs, &icfg.tolerances).map(Some),
                _ => Ok(None),
            })
            .collect::<nc_sigma::Result<Vec<_>>>()?;
        for (row, rep) in table.rows.iter_mut().zip(reports) {
            if rep.is_some() {
                row.report = rep;
            }
        }
    }
    for (i, row) in table.rows.iter().enumerate() {
        if let Some(p) = &row.projection {
            out.write_text(&format!("projections/row-{i:04}.json"), &(series_to_json(p)? + "\n"))?;
        }
    }
    out.write_text("scan.csv", &table.csv())?;
    out.write_json("scan.json", &table)?;
    let mut checks = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        if let Some(e) = &row.error {
            checks.push(Check::flag(&format!("row_{i}"), false, e.clone()));
        } else if let Some(rep) = &row.report {
            checks.push(Check::flag(&format!("row_{i}"), rep.valid, "report valid"));
        }
    }
    for p in &table.pairs {
        let name = format!("pair_{}_{}_{:?}", p.first, p.second, p.kind).to_lowercase();
        checks.push(Check {
            name,
            pass: p.pass,
            value: p.distance,
            limit: match p.kind {
                PairKind::Distinct => None,
                _ => Some(table.equivalence_tolerance),
            },
            detail: None,
        });
    }
    Ok(checks)
}

/// Runs one subcommand end to end and returns the process exit code.
/// Configuration problems yield 2 before anything is written.
pub fn run(mode: Mode, mut cfg: RunConfig) -> i32 {
    cfg.mode = Some(mode);
    let started = Instant::now();
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    // selftest carries its own geometry; the others need a valid one up front
    let bezout = if mode == Mode::Selftest || mode == Mode::Verify {
        None
    } else {
        match cfg.geometry() {
            Ok(g) => Some([g.a, g.b]),
            Err(e) => {
                eprintln!("error: {e}");
                return e.exit_code();
            }
        }
    };
    let mut out = match OutputDir::create(&cfg.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return e.exit_code();
        }
    };
    let result = match mode {
        Mode::Build => cmd_build(&cfg, &mut out),
        Mode::Verify => cmd_verify(&cfg, &mut out),
        Mode::Flow => cmd_flow(&cfg, &mut out),
        Mode::Scan => cmd_scan(&cfg, &mut out),
        Mode::Selftest => selftest::cmd_selftest(&cfg, &mut out),
    };
    let (checks, code) = match result {
        Ok(checks) => {
            let ok = checks.iter().all(|c| c.pass);
            for c in checks.iter().filter(|c| !c.pass) {
                eprintln!(
                    "check failed: {} (value {:?}, limit {:?}) {}",
                    c.name,
                    c.value,
                    c.limit,
                    c.detail.as_deref().unwrap_or("")
                );
            }
            (checks, if ok { EXIT_OK } else { EXIT_NUMERIC })
        }
        Err(e) => {
            eprintln!("error: {e}");
            let code = e.exit_code();
            (vec![Check::flag("run", false, e.to_string())], code)
        }
    };
    let tolerances: Tolerances = cfg.tolerances.clone();
    let manifest = RunManifest {
        tool: "ncsigma".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        library_version: nc_sigma::VERSION.into(),
        command: mode.name().into(),
        conventions: Conventions::new(bezout, cfg.selftest.variant),
        config: cfg,
        tolerances,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        exit_code: code,
        checks,
        files: Vec::new(),
    };
    if let Err(e) = out.finish(manifest) {
        eprintln!("error: {e}");
        return e.exit_code();
    }
    code
}
