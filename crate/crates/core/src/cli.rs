//! Command-line front end: run configuration, the `solve`, `verify` and
//! `sweep` subcommands, and artifact emission.
//!
//! Every file is written by the calling thread after all solves have joined.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::energy::{EnergyParams, DEFAULT_DELTA, DEFAULT_P};
use crate::error::{Error, Result};
use crate::grid::distance;
use crate::potential::{Potential, PotentialSpec, WellGeometry};
use crate::solver::{
    solve_multiplicity, Discretization, MultiplicityRun, SolveResult, SolverConfig, StepRule,
};
use crate::verify::{audit, identity_suite, IdentityConfig, VerificationReport};

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(
    name = "lognls",
    version,
    about = "Multiple positive solutions of the logarithmic Schrödinger equation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Worker threads for concurrent per-well solves.
    #[arg(long, global = true, default_value_t = 1)]
    pub jobs: usize,
    /// Output directory; overrides `outputs.dir`.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Seed for probes and random fields; overrides `rng_seed`.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub verbose: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One localized solution per well, audited.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Identity and inequality suite.
    Verify,
    /// Solve over a decreasing list of epsilon values.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated, strictly decreasing; overrides `sweep_eps`.
        #[arg(long, value_delimiter = ',')]
        eps: Option<Vec<f64>>,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialConfig {
    pub wells: Vec<Vec<f64>>,
    pub v_inf: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub dim: usize,
    pub potential: PotentialConfig,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NumericsConfig {
    pub h: f64,
    pub r_schedule: Vec<f64>,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "default_p")]
    pub p: f64,
    /// Radius of the constant-coefficient reference solves; `None` picks 10 in 1D, 8 in 2D.
    #[serde(default)]
    pub ground_radius: Option<f64>,
}

fn default_delta() -> f64 {
    DEFAULT_DELTA
}

fn default_p() -> f64 {
    DEFAULT_P
}

/// Overrides of [`SolverConfig`]; absent keys keep the library defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSection {
    pub grad_tol: Option<f64>,
    pub nehari_tol: Option<f64>,
    pub max_iters: Option<usize>,
    pub step: Option<StepRule>,
    pub gamma: Option<f64>,
    pub rho0: Option<f64>,
    pub r0: Option<f64>,
    pub barycenter_tol: Option<f64>,
    pub weak_tol: Option<f64>,
    pub distinct_rel_l2: Option<f64>,
    pub probes: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default = "default_dir")]
    pub dir: PathBuf,
    #[serde(default = "yes")]
    pub dump_fields: bool,
    #[serde(default)]
    pub log_history: bool,
    /// 0 quiet, 1 per-well summary, 2 per-check detail.
    #[serde(default)]
    pub verbosity: u8,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: default_dir(),
            dump_fields: true,
            log_history: false,
            verbosity: 0,
        }
    }
}

fn default_dir() -> PathBuf {
    PathBuf::from("out")
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    pub numerics: NumericsConfig,
    #[serde(default)]
    pub solver: SolverSection,
    #[serde(default)]
    pub outputs: OutputConfig,
    #[serde(default)]
    pub rng_seed: u64,
    #[serde(default)]
    pub sweep_eps: Vec<f64>,
}

/// A validated configuration, ready to run.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub params: EnergyParams,
    pub solver: SolverConfig,
    pub disc: Discretization,
    pub outputs: OutputConfig,
}

fn field_err(field: &str, e: impl std::fmt::Display) -> Error {
    Error::Config(format!("{field}: {e}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<RunConfig> {
        serde_json::from_str(text).map_err(|e| Error::Config(format!("config parse error: {e}")))
    }

    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        RunConfig::from_json(&text)
    }

    /// Checks every parameter against the range its module declares.
    pub fn prepare(&self) -> Result<Prepared> {
        let pr = &self.problem;
        if pr.dim != 1 && pr.dim != 2 {
            return Err(field_err(
                "problem.dim",
                Error::UnsupportedDimension(pr.dim),
            ));
        }
        let pot = &pr.potential;
        let spec = PotentialSpec::multiwell(pr.dim, &pot.wells, pot.v_inf, pot.width)
            .map_err(|e| field_err("problem.potential", e))?;
        let num = &self.numerics;
        if !(num.h > 0.0) || !num.h.is_finite() {
            return Err(field_err("numerics.h", Error::NonPositiveSpacing(num.h)));
        }
        let params = EnergyParams::new(pr.eps, Potential::MultiWell(spec.clone()))
            .map_err(|e| field_err("problem.eps", e))?
            .with_delta(num.delta)
            .map_err(|e| field_err("numerics.delta", e))?
            .with_p(num.p)
            .map_err(|e| field_err("numerics.p", e))?;

        let s = &self.solver;
        let mut geometry = WellGeometry::default_for(spec.wells());
        if let Some(rho0) = s.rho0 {
            geometry.rho0 = rho0;
        }
        if let Some(r0) = s.r0 {
            geometry.r0 = r0;
        }
        let issues = geometry.violations(spec.wells());
        if !issues.is_empty() {
            return Err(field_err("solver.rho0/r0", issues.join("; ")));
        }
        let mut solver = SolverConfig::new(geometry, num.r_schedule.clone());
        solver.grad_tol = s.grad_tol.unwrap_or(solver.grad_tol);
        solver.nehari_tol = s.nehari_tol.unwrap_or(solver.nehari_tol);
        solver.max_iters = s.max_iters.unwrap_or(solver.max_iters);
        solver.step = s.step.unwrap_or(solver.step);
        solver.gamma = s.gamma;
        solver.barycenter_tol = s.barycenter_tol.unwrap_or(solver.barycenter_tol);
        solver.weak_tol = s.weak_tol.unwrap_or(solver.weak_tol);
        solver.distinct_rel_l2 = s.distinct_rel_l2.unwrap_or(solver.distinct_rel_l2);
        solver.probes = s.probes.unwrap_or(solver.probes);
        solver.probe_seed = self.rng_seed;
        solver.record_history = self.outputs.log_history;
        solver.validate()?;
        for (k, &r) in num.r_schedule.iter().enumerate() {
            crate::grid::Grid::build(pr.dim, r, num.h)
                .map_err(|e| field_err(&format!("numerics.r_schedule[{k}]"), e))?;
        }

        let ground_radius = num
            .ground_radius
            .unwrap_or(if pr.dim == 1 { 10.0 } else { 8.0 });
        crate::grid::Grid::build(pr.dim, ground_radius, num.h)
            .map_err(|e| field_err("numerics.ground_radius", e))?;
        let disc = Discretization {
            dim: pr.dim,
            h: num.h,
            ground_radius,
        };
        Ok(Prepared {
            params,
            solver,
            disc,
            outputs: self.outputs.clone(),
        })
    }
}

/// Shortest round-trip decimal, in exponent form for very small or large
/// magnitudes.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e16).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

/// [`fmt_f64`], empty for `None`.
fn num(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

fn status_label(r: &std::result::Result<SolveResult, Error>) -> String {
    match r {
        Ok(r) => format!("{:?}", r.status),
        Err(_) => "Error".into(),
    }
}

/// `well,status,level,q_x,q_y,distance_to_well,nehari_res,grad_norm,weak_res,r_final,iterations`
pub fn levels_table(run: &MultiplicityRun, report: &VerificationReport) -> String {
    let mut out = String::from("well,status,level,q_x,q_y,distance_to_well,nehari_res,grad_norm,weak_res,r_final,iterations\n");
    for (outcome, a) in run.wells.iter().zip(&report.wells) {
        let ok = outcome.result.as_ref().ok();
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            outcome.well,
            status_label(&outcome.result),
            num(ok.map(|r| r.level)),
            num(ok.map(|r| r.barycenter[0])),
            num(ok.map(|r| r.barycenter[1])),
            num(a.distance_to_well),
            num(ok.map(|r| r.nehari_res)),
            num(ok.map(|r| r.grad_norm)),
            num(ok.map(|r| r.weak_res)),
            num(ok.map(|r| r.r_final)),
            ok.map(|r| r.iterations.to_string()).unwrap_or_default(),
        )
        .expect("writing to a string");
    }
    out
}

fn history_table(r: &SolveResult) -> String {
    let mut out = String::from("iter,level,nehari_res,grad_norm,q_x,q_y,step,log_sobolev_gap\n");
    for h in &r.history {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            h.iter,
            fmt_f64(h.level),
            fmt_f64(h.nehari_res),
            fmt_f64(h.grad_norm),
            fmt_f64(h.q[0]),
            fmt_f64(h.q[1]),
            fmt_f64(h.step),
            fmt_f64(h.log_sobolev_gap)
        )
        .expect("writing to a string");
    }
    out
}

fn write(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir)?;
    }
    fs::write(path, text)?;
    Ok(())
}

/// Writes the levels table, report and (optionally) field dumps of every
/// well that produced a field, whatever happened to the others.
pub fn write_solve_outputs(
    dir: &Path,
    run: &MultiplicityRun,
    report: &VerificationReport,
    outputs: &OutputConfig,
) -> Result<()> {
    fs::create_dir_all(dir)?;
    write(&dir.join("levels.csv"), &levels_table(run, report))?;
    write(&dir.join("report.json"), &report.to_json())?;
    for outcome in &run.wells {
        let Ok(r) = &outcome.result else { continue };
        if outputs.dump_fields {
            let fields = dir.join("fields");
            fs::create_dir_all(&fields)?;
            r.u.save_csv(&r.grid, &fields.join(format!("u_well{}.csv", outcome.well)))?;
            let (vg, v) = r.rescaled()?;
            v.save_csv(&vg, &fields.join(format!("v_well{}.csv", outcome.well)))?;
        }
        if outputs.log_history {
            write(
                &dir.join("history")
                    .join(format!("well{}.csv", outcome.well)),
                &history_table(r),
            )?;
        }
    }
    Ok(())
}

fn print_run(run: &MultiplicityRun, report: &VerificationReport, verbose: bool) {
    println!(
        "eps = {}  c0 = {}  c_inf = {}  gamma = {}",
        fmt_f64(run.eps),
        fmt_f64(run.c0),
        fmt_f64(run.c_inf),
        fmt_f64(run.gamma)
    );
    for (outcome, a) in run.wells.iter().zip(&report.wells) {
        match &outcome.result {
            Ok(r) => {
                println!(
                    "well {}: {:?}  level {}  |Q - z| {}  {}",
                    outcome.well,
                    r.status,
                    fmt_f64(r.level),
                    num(a.distance_to_well),
                    if a.passed { "ok" } else { "FAILED" }
                );
                if verbose {
                    println!(
                        "    grad {}  nehari {}  weak {}  R {}  iters {}  localized {}  below ceiling {}",
                        fmt_f64(r.grad_norm),
                        fmt_f64(r.nehari_res),
                        fmt_f64(r.weak_res),
                        r.r_final,
                        r.iterations,
                        a.localized,
                        a.separation_ok
                    );
                }
            }
            Err(e) => println!("well {}: error: {e}", outcome.well),
        }
    }
    println!(
        "converged {}  localized {}  separation {}  distinct {}  => {}",
        report.all_converged,
        report.localization_failures.is_empty(),
        report.separation_ok,
        report.distinct_ok,
        if report.success { "success" } else { "failure" }
    );
}

fn exit_for(e: &Error) -> u8 {
    match e {
        Error::Config(_)
        | Error::InvalidDelta(_)
        | Error::InvalidExponent(_)
        | Error::NonPositiveEpsilon(_)
        | Error::NonPositiveSpacing(_)
        | Error::NonPositiveRadius(_)
        | Error::DomainTooCoarse { .. }
        | Error::NonConformingSpacing { .. }
        | Error::UnsupportedDimension(_) => EXIT_USAGE,
        _ => EXIT_FAILURE,
    }
}

fn load(path: &Path, cli: &Cli) -> Result<(RunConfig, Prepared)> {
    let mut config = RunConfig::load(path)?;
    if let Some(seed) = cli.seed {
        config.rng_seed = seed;
    }
    let prepared = config.prepare()?;
    Ok((config, prepared))
}

fn out_dir(cli: &Cli, outputs: &OutputConfig) -> PathBuf {
    cli.out.clone().unwrap_or_else(|| outputs.dir.clone())
}

pub fn cmd_solve(cli: &Cli, path: &Path) -> u8 {
    let (_, prep) = match load(path, cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let verbose = cli.verbose || prep.outputs.verbosity > 0;
    let run = match solve_multiplicity(&prep.params, &prep.solver, &prep.disc, cli.jobs) {
        Ok(run) => run,
        Err(e) => {
            eprintln!("error: {e}");
            return exit_for(&e);
        }
    };
    let report = match audit(&run, &prep.params, &prep.solver) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: audit: {e}");
            return EXIT_FAILURE;
        }
    };
    print_run(&run, &report, verbose);
    let dir = out_dir(cli, &prep.outputs);
    if let Err(e) = write_solve_outputs(&dir, &run, &report, &prep.outputs) {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return EXIT_FAILURE;
    }
    if report.success {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

pub fn cmd_verify(cli: &Cli) -> u8 {
    let config = IdentityConfig {
        seed: cli.seed.unwrap_or(0),
        ..IdentityConfig::default()
    };
    let report = match identity_suite(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_FAILURE;
        }
    };
    for c in &report.checks {
        let mark = if c.passed { "PASS" } else { "FAIL" };
        if cli.verbose {
            println!(
                "{mark}  {:<24} samples {:>8}  failures {:>6}  worst {}  tol {}  slack {}",
                c.name,
                c.samples,
                c.failures,
                fmt_f64(c.worst),
                fmt_f64(c.tolerance),
                fmt_f64(c.slack())
            );
        } else {
            println!("{mark}  {}", c.name);
        }
    }
    if report.passed {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

/// One row of the sweep table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub well: usize,
    pub level: Option<f64>,
    pub distance_to_well: Option<f64>,
    pub status: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepSummary {
    pub eps: Vec<f64>,
    /// Per ε: every well converged and the audit passed.
    pub success: Vec<bool>,
    /// Largest swept ε from which every smaller swept ε has all wells converged.
    pub localization_onset: Option<f64>,
    pub reports: Vec<VerificationReport>,
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut out = String::from("eps,well,level,distance_to_well,status\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.eps,
            r.well,
            num(r.level),
            num(r.distance_to_well),
            r.status
        )
        .expect("writing to a string");
    }
    out
}

fn sweep_rows(run: &MultiplicityRun, wells: &[crate::grid::Point]) -> Vec<SweepRow> {
    run.wells
        .iter()
        .map(|o| {
            let ok = o.result.as_ref().ok();
            SweepRow {
                eps: run.eps,
                well: o.well,
                level: ok.map(|r| r.level),
                distance_to_well: ok
                    .and_then(|r| wells.get(o.well - 1).map(|&z| distance(r.barycenter, z))),
                status: status_label(&o.result),
            }
        })
        .collect()
}

pub fn cmd_sweep(cli: &Cli, path: &Path, eps: Option<&[f64]>) -> u8 {
    let (config, prep) = match load(path, cli) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_USAGE;
        }
    };
    let list: Vec<f64> = eps.map(<[f64]>::to_vec).unwrap_or(config.sweep_eps);
    if list.is_empty() {
        eprintln!("error: empty eps list (pass --eps or set sweep_eps)");
        return EXIT_USAGE;
    }
    if let Some(bad) = list.iter().find(|&&e| !(e > 0.0) || !e.is_finite()) {
        eprintln!("error: sweep eps {bad} must be positive");
        return EXIT_USAGE;
    }
    if list.windows(2).any(|w| !(w[1] < w[0])) {
        eprintln!("error: sweep eps list {list:?} must be strictly decreasing");
        return EXIT_USAGE;
    }
    let verbose = cli.verbose || prep.outputs.verbosity > 0;
    let wells = prep.params.potential.wells().to_vec();
    let mut rows = Vec::new();
    let mut summary = SweepSummary {
        eps: list.clone(),
        success: Vec::new(),
        localization_onset: None,
        reports: Vec::new(),
    };
    let mut all_conv = Vec::new();
    for &e in &list {
        let params = EnergyParams {
            eps: e,
            ..prep.params.clone()
        };
        let outcome = solve_multiplicity(&params, &prep.solver, &prep.disc, cli.jobs)
            .and_then(|run| audit(&run, &params, &prep.solver).map(|report| (run, report)));
        match outcome {
            Ok((run, report)) => {
                print_run(&run, &report, verbose);
                rows.extend(sweep_rows(&run, &wells));
                summary.success.push(report.success);
                all_conv.push(report.all_converged);
                summary.reports.push(report);
            }
            Err(err) => {
                eprintln!("eps = {e}: error: {err}");
                rows.extend((1..=wells.len()).map(|well| SweepRow {
                    eps: e,
                    well,
                    level: None,
                    distance_to_well: None,
                    status: "Error".into(),
                }));
                summary.success.push(false);
                all_conv.push(false);
            }
        }
    }
    // list is decreasing, so scan from the smallest ε upward
    for (k, &e) in list.iter().enumerate().rev() {
        if !all_conv[k] {
            break;
        }
        summary.localization_onset = Some(e);
    }
    match summary.localization_onset {
        Some(e) => println!("localization onset: all wells converged for every swept eps <= {e}"),
        None => println!("localization onset: not reached on the swept eps values"),
    }
    let dir = out_dir(cli, &prep.outputs);
    let written = write(&dir.join("sweep.csv"), &sweep_table(&rows)).and_then(|_| {
        write(
            &dir.join("sweep.json"),
            &serde_json::to_string_pretty(&summary).expect("summary serializes"),
        )
    });
    if let Err(e) = written {
        eprintln!("error: writing outputs to {}: {e}", dir.display());
        return EXIT_FAILURE;
    }
    if summary.success.iter().all(|&s| s) {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}

/// Parses arguments and dispatches; returns the process exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if cli.jobs == 0 {
        eprintln!("error: --jobs must be at least 1");
        return EXIT_USAGE;
    }
    match &cli.command {
        Command::Solve { config } => cmd_solve(&cli, config),
        Command::Verify => cmd_verify(&cli),
        Command::Sweep { config, eps } => cmd_sweep(&cli, config, eps.as_deref()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"{
        "problem": {"dim": 1, "potential": {"wells": [[0.0], [2.0]], "v_inf": 2.0, "width": 0.25}, "eps": 0.1},
        "numerics": {"h": 0.05, "r_schedule": [30.0, 60.0]}
    }"#;

    #[test]
    fn parses_and_prepares_defaults() {
        let c = RunConfig::from_json(BASE).unwrap();
        assert_eq!(c.outputs, OutputConfig::default());
        let p = c.prepare().unwrap();
        assert_eq!(p.params.delta, DEFAULT_DELTA);
        assert_eq!(p.disc.ground_radius, 10.0);
        assert_eq!(p.solver.geometry, WellGeometry { rho0: 0.5, r0: 4.0 });
    }

    fn prepare_with(edit: impl FnOnce(&mut serde_json::Value)) -> Result<Prepared> {
        let mut v: serde_json::Value = serde_json::from_str(BASE).unwrap();
        edit(&mut v);
        RunConfig::from_json(&v.to_string())?.prepare()
    }

    #[test]
    fn field_precise_rejections() {
        let e = prepare_with(|v| v["numerics"]["delta"] = 0.5.into())
            .unwrap_err()
            .to_string();
        assert!(
            e.starts_with("numerics.delta") && e.contains("e^(-3/2)"),
            "{e}"
        );
        let e = prepare_with(|v| v["problem"]["eps"] = 0.0.into())
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("problem.eps"), "{e}");
        let e = prepare_with(|v| v["problem"]["potential"]["v_inf"] = 1.0.into())
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("problem.potential"), "{e}");
        let e = prepare_with(|v| v["numerics"]["h"] = 0.07.into())
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("numerics.r_schedule[0]"), "{e}");
        let e = prepare_with(|v| v["solver"] = serde_json::json!({"rho0": 1.5}))
            .unwrap_err()
            .to_string();
        assert!(e.starts_with("solver.rho0"), "{e}");
        let e = RunConfig::from_json(r#"{"problem": {"dim": 1}}"#)
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 1"), "{e}");
        let e = prepare_with(|v| v["numerics"]["bogus"] = 1.into())
            .unwrap_err()
            .to_string();
        assert!(e.contains("bogus"), "{e}");
    }

    #[test]
    fn sweep_table_format() {
        let rows = vec![
            SweepRow {
                eps: 0.4,
                well: 1,
                level: Some(6.5),
                distance_to_well: Some(1e-6),
                status: "Converged".into(),
            },
            SweepRow {
                eps: 0.4,
                well: 2,
                level: None,
                distance_to_well: None,
                status: "Error".into(),
            },
        ];
        assert_eq!(
            sweep_table(&rows),
            "eps,well,level,distance_to_well,status\n0.4,1,6.5,1e-6,Converged\n0.4,2,,,Error\n"
        );
    }

    #[test]
    fn float_format_round_trips() {
        for v in [
            0.0,
            1.0,
            -2.5,
            6.673399600156703,
            5.06e-17,
            1e-4,
            9.9e-5,
            3e20,
            -7.1e-300,
        ] {
            assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
        }
        assert_eq!(fmt_f64(60.0), "60");
        assert_eq!(fmt_f64(5e-17), "5e-17");
    }

    #[test]
    fn usage_errors_exit_2() {
        assert_eq!(run(["lognls", "frobnicate"]), EXIT_USAGE);
        assert_eq!(run(["lognls", "solve"]), EXIT_USAGE);
        assert_eq!(
            run(["lognls", "solve", "--config", "/nonexistent/x.json"]),
            EXIT_USAGE
        );
    }
}
