//! `sonic-annulus check|solve|verify|sweep`.
//!
//! Exit codes: 0 success, 1 input error, 2 hypotheses unsatisfied, 3 verification failure,
//! 4 solver divergence.

mod manifest;
pub mod output;

use std::ffi::OsString;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, LevelFilter};
use serde_json::json;
use sonic_annulus::fields::{reconstruct, write_atomic, FieldArrays, Format};
use sonic_annulus::model::check_hypotheses;
use sonic_annulus::verify::{verify_profile, Check, VerificationReport};
use sonic_annulus::{
    subsonic, supersonic, Error, Problem, Profile, RadialGrid, Regime, Scheme, Solution, Spacing, SubsonicParams,
    SupersonicParams,
};

pub use manifest::RunManifest;
use output::{detect_format, read_solution, sidecar, write_solution, SolutionFile};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_HYPOTHESES: i32 = 2;
pub const EXIT_VERIFICATION: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "sonic-annulus", version, about = "Sonic-boundary steady states of the radial Euler-Poisson model")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate the existence hypotheses of both regimes
    Check {
        config: PathBuf,
        /// decide the exit code by this regime only
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
        /// print the reports as JSON
        #[arg(long)]
        json: bool,
    },
    /// Run the continuation, verify the result and write the fields
    Solve(SolveArgs),
    /// Recompute every check from a stored solution
    Verify(VerifyArgs),
    /// Independent solves over a list of tau or doping scale values
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct SolverFlags {
    #[arg(long, value_enum)]
    pub regime: RegimeArg,
    /// number of grid cells (nodes - 1)
    #[arg(long, default_value_t = 1024)]
    pub nodes: usize,
    #[arg(long, value_enum, default_value_t = GridArg::Uniform)]
    pub grid: GridArg,
    #[arg(long, value_enum, default_value_t = SchemeArg::FluxForm)]
    pub scheme: SchemeArg,
    /// keep the last continuation stage instead of polishing onto the limit equations
    #[arg(long)]
    pub no_polish: bool,
    /// plain fixed-point iteration only
    #[arg(long)]
    pub no_newton: bool,
    /// iteration cap per stage (Picard, or inner and outer)
    #[arg(long)]
    pub max_iter: Option<usize>,
}

#[derive(Debug, Clone, Args)]
pub struct SolveArgs {
    pub config: PathBuf,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// output file; sidecars are written next to it
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
}

#[derive(Debug, Clone, Args)]
pub struct VerifyArgs {
    pub solution: PathBuf,
    pub config: PathBuf,
    /// needed for CSV files whose interior straddles J
    #[arg(long, value_enum)]
    pub regime: Option<RegimeArg>,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// write the report (and a manifest) here
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    pub config: PathBuf,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// comma separated
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    pub values: Vec<f64>,
    #[command(flatten)]
    pub solver: SolverFlags,
    /// output directory
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub format: Option<FormatArg>,
    /// concurrent solves; defaults to the available parallelism
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    Subsonic,
    Supersonic,
}

impl From<RegimeArg> for Regime {
    fn from(r: RegimeArg) -> Self {
        match r {
            RegimeArg::Subsonic => Regime::Subsonic,
            RegimeArg::Supersonic => Regime::Supersonic,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GridArg {
    Uniform,
    Clustered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    FluxForm,
    Nodal,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

impl From<FormatArg> for Format {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Tau,
    #[value(name = "doping_scale", alias = "doping-scale")]
    DopingScale,
}

/// Reads SONIC_ANNULUS_LOG (error, info or debug; default error).
pub fn init_logging() {
    let level = match std::env::var("SONIC_ANNULUS_LOG") {
        Ok(v) => match v.trim().to_ascii_lowercase().as_str() {
            "error" => LevelFilter::Error,
            "info" => LevelFilter::Info,
            "debug" => LevelFilter::Debug,
            other => {
                eprintln!("warning: SONIC_ANNULUS_LOG = '{other}' is not one of error, info, debug; using error");
                LevelFilter::Error
            }
        },
        Err(_) => LevelFilter::Error,
    };
    let _ = env_logger::Builder::new().filter_level(level).format_timestamp(None).try_init();
}

pub fn run<I, A>(args: I) -> i32
where
    I: IntoIterator<Item = A>,
    A: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_INPUT,
            };
        }
    };
    match cli.command {
        Command::Check { config, regime, json } => cmd_check(&config, regime.map(Regime::from), json),
        Command::Solve(a) => cmd_solve(&a),
        Command::Verify(a) => cmd_verify(&a),
        Command::Sweep(a) => cmd_sweep(&a),
    }
}

/// Exit code for a library error raised while solving.
pub fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::InvalidConfig(_) | Error::Json(_) | Error::Io(_) | Error::GridMismatch(_) | Error::Precondition(_) => EXIT_INPUT,
        Error::Hypotheses(_) => EXIT_HYPOTHESES,
        _ => EXIT_DIVERGENCE,
    }
}

pub fn load_problem(path: &Path) -> Result<Problem<f64>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    Problem::from_json(&text).map_err(|e| format!("{}: {e}", path.display()))
}

pub fn cmd_check(config: &Path, regime: Option<Regime>, as_json: bool) -> i32 {
    let problem = match load_problem(config) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    };
    let mut reports = Vec::new();
    for r in [Regime::Subsonic, Regime::Supersonic] {
        match check_hypotheses(&problem, r) {
            Ok(rep) => reports.push(rep),
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INPUT;
            }
        }
    }
    if as_json {
        println!("{}", serde_json::to_string_pretty(&reports).expect("reports serialize"));
    } else {
        println!("J = {}", problem.big_j());
        for rep in &reports {
            println!("{rep}");
        }
    }
    let ok = reports.iter().filter(|r| regime.map_or(true, |want| r.regime == want)).all(|r| r.satisfied());
    if ok {
        EXIT_OK
    } else {
        EXIT_HYPOTHESES
    }
}

pub fn subsonic_params(flags: &SolverFlags) -> SubsonicParams<f64> {
    let mut p = SubsonicParams::default();
    p.scheme = scheme_of(flags.scheme);
    p.polish = !flags.no_polish;
    p.newton = !flags.no_newton;
    if let Some(n) = flags.max_iter {
        p.picard_max_iter = n;
    }
    p
}

pub fn supersonic_params(flags: &SolverFlags) -> SupersonicParams<f64> {
    let mut p = SupersonicParams::default();
    p.scheme = scheme_of(flags.scheme);
    p.polish = !flags.no_polish;
    p.newton = !flags.no_newton;
    if let Some(n) = flags.max_iter {
        p.inner_max_iter = n;
        p.outer_max_iter = n;
    }
    p
}

fn scheme_of(s: SchemeArg) -> Scheme {
    match s {
        SchemeArg::FluxForm => Scheme::FluxForm,
        SchemeArg::Nodal => Scheme::Nodal,
    }
}

fn parameters_json(flags: &SolverFlags) -> serde_json::Value {
    let regime = Regime::from(flags.regime);
    let common = json!({
        "regime": regime,
        "cells": flags.nodes,
        "grid": format!("{:?}", flags.grid).to_lowercase(),
        "scheme": scheme_of(flags.scheme),
        "polish": !flags.no_polish,
        "newton": !flags.no_newton,
    });
    let specific = match regime {
        Regime::Subsonic => {
            let p = subsonic_params(flags);
            json!({
                "picard_tol": p.picard_tol,
                "picard_max_iter": p.picard_max_iter,
                "sigma_schedule": p.sigma_schedule,
                "continuation_tol": p.continuation_tol,
                "newton_switch": p.newton_switch,
                "clamp": p.clamp,
            })
        }
        Regime::Supersonic => {
            let p = supersonic_params(flags);
            json!({
                "inner_tol": p.inner_tol,
                "inner_max_iter": p.inner_max_iter,
                "outer_tol": p.outer_tol,
                "outer_max_iter": p.outer_max_iter,
                "k0_schedule": p.k0_schedule,
                "continuation_tol": p.continuation_tol,
                "omega": p.omega,
                "newton_switch": p.newton_switch,
            })
        }
    };
    let mut v = common;
    if let (Some(a), serde_json::Value::Object(b)) = (v.as_object_mut(), specific) {
        a.extend(b);
    }
    v
}

/// What a single solve produced; also one row of the sweep table.
#[derive(Debug, Clone)]
pub struct SolveOutcome {
    pub exit_code: i32,
    pub hypotheses_satisfied: bool,
    pub converged: bool,
    pub verified: Option<bool>,
    /// lambda* (subsonic) or the floor ell (supersonic)
    pub lambda_or_ell: Option<f64>,
    pub weak_residual_linf: Option<f64>,
    pub weak_residual_l2: Option<f64>,
    pub message: String,
    pub outputs: Vec<PathBuf>,
    pub report: Option<VerificationReport>,
}

impl SolveOutcome {
    fn failed(exit_code: i32, hypotheses_satisfied: bool, message: String) -> Self {
        Self {
            exit_code,
            hypotheses_satisfied,
            converged: false,
            verified: None,
            lambda_or_ell: None,
            weak_residual_linf: None,
            weak_residual_l2: None,
            message,
            outputs: Vec::new(),
            report: None,
        }
    }
}

pub fn run_solver(problem: &Problem<f64>, flags: &SolverFlags) -> sonic_annulus::Result<Solution<f64>> {
    let c = &problem.config;
    let spacing = match flags.grid {
        GridArg::Uniform => Spacing::Uniform,
        GridArg::Clustered => Spacing::Clustered,
    };
    let grid = RadialGrid::new(c.r0(), c.r1(), flags.nodes, spacing)?;
    match Regime::from(flags.regime) {
        Regime::Subsonic => subsonic::continuation_solve(problem, &grid, &subsonic_params(flags)),
        Regime::Supersonic => supersonic::continuation_solve_supersonic(problem, &grid, &supersonic_params(flags)),
    }
}

/// Hypotheses, continuation, verification and output files for one problem.
pub fn solve_and_write(problem: &Problem<f64>, flags: &SolverFlags, out: &Path, format: Format) -> SolveOutcome {
    let regime = Regime::from(flags.regime);
    let hyp = match check_hypotheses(problem, regime) {
        Ok(h) => h,
        Err(e) => return SolveOutcome::failed(EXIT_INPUT, false, e.to_string()),
    };
    if !hyp.satisfied() {
        let bad: Vec<&str> = hyp.conditions.iter().filter(|c| !c.satisfied).map(|c| c.name.as_str()).collect();
        return SolveOutcome::failed(EXIT_HYPOTHESES, false, format!("{regime} hypotheses not satisfied: {}", bad.join("; ")));
    }
    let sol = match run_solver(problem, flags) {
        Ok(s) => s,
        Err(e) => return SolveOutcome::failed(exit_code_for(&e), true, e.to_string()),
    };
    let checked = reconstruct(&sol.m, problem).and_then(|f| Ok((f, verify_profile(problem, &sol.m, regime, None)?)));
    let (fields, report) = match checked {
        Ok(x) => x,
        Err(e) => return SolveOutcome::failed(EXIT_DIVERGENCE, true, format!("post-processing failed: {e}")),
    };
    let file = SolutionFile {
        regime,
        reg_param: sol.reg_param,
        fields: FieldArrays::from_fields(&fields),
        diagnostics: sol.diagnostics.clone(),
        verification: report.clone(),
    };
    let mut outcome = SolveOutcome {
        exit_code: if report.passed { EXIT_OK } else { EXIT_VERIFICATION },
        hypotheses_satisfied: true,
        converged: true,
        verified: Some(report.passed),
        lambda_or_ell: report.lambda_star.or(report.ell),
        weak_residual_linf: Some(report.weak_residual_linf),
        weak_residual_l2: Some(report.weak_residual_l2),
        message: failed_checks(&report),
        outputs: Vec::new(),
        report: Some(report),
    };
    match write_solution(out, format, &file) {
        Ok(paths) => outcome.outputs = paths,
        Err(e) => {
            outcome.exit_code = EXIT_INPUT;
            outcome.message = format!("cannot write {}: {e}", out.display());
        }
    }
    for w in &sol.diagnostics.warnings {
        info!("warning: {w}");
    }
    outcome
}

fn failed_checks(report: &VerificationReport) -> String {
    let bad: Vec<String> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.clone()).collect();
    if bad.is_empty() {
        String::new()
    } else {
        format!("failed: {}", bad.join("; "))
    }
}

pub fn format_report(report: &VerificationReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "verification ({}): {}", report.regime, if report.passed { "PASSED" } else { "FAILED" });
    for c in &report.checks {
        let _ = writeln!(s, "  {:<28} {:>14.6e}  limit {:>12.4e}  {}", c.name, c.value, c.threshold, if c.passed { "ok" } else { "FAIL" });
    }
    let _ = write!(s, "  holder seminorm {:.6}", report.holder_seminorm);
    s
}

fn write_manifest(path: &Path, manifest: &RunManifest) -> Result<(), String> {
    let text = serde_json::to_string_pretty(manifest).map_err(|e| e.to_string())?;
    write_atomic(path, text.as_bytes()).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

pub fn cmd_solve(args: &SolveArgs) -> i32 {
    let problem = match load_problem(&args.config) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    };
    let format = match (args.format, &args.out) {
        (Some(f), _) => Format::from(f),
        (None, Some(p)) => detect_format(p, None),
        (None, None) => Format::Csv,
    };
    let out = args.out.clone().unwrap_or_else(|| {
        PathBuf::from(match format {
            Format::Csv => "solution.csv",
            Format::Json => "solution.json",
        })
    });
    let outcome = solve_and_write(&problem, &args.solver, &out, format);
    if outcome.exit_code == EXIT_HYPOTHESES {
        if let Ok(rep) = check_hypotheses(&problem, Regime::from(args.solver.regime)) {
            eprintln!("{rep}");
        }
    }
    report_outcome(&outcome);
    let mut manifest = RunManifest::new("solve", &args.config, parameters_json(&args.solver));
    manifest.outputs = outcome.outputs.iter().map(|p| p.display().to_string()).collect();
    manifest.exit_code = outcome.exit_code;
    if !outcome.outputs.is_empty() {
        let mpath = sidecar(&out, "manifest");
        if let Err(msg) = write_manifest(&mpath, &manifest) {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    }
    outcome.exit_code
}

fn report_outcome(outcome: &SolveOutcome) {
    if let Some(rep) = &outcome.report {
        println!("{}", format_report(rep));
    }
    match outcome.exit_code {
        EXIT_OK | EXIT_VERIFICATION => {
            for p in &outcome.outputs {
                println!("wrote {}", p.display());
            }
            if outcome.exit_code == EXIT_VERIFICATION {
                eprintln!("verification {}", outcome.message);
            }
        }
        _ => eprintln!("error: {}", outcome.message),
    }
}

/// Regime implied by the side of J the interior lies on (majority of nodes).
fn infer_regime(m: &Profile<f64>, big_j: f64) -> Regime {
    let v = m.values();
    let inner = &v[1..v.len() - 1];
    let above = inner.iter().filter(|&&x| x > big_j).count();
    if 2 * above >= inner.len() {
        Regime::Subsonic
    } else {
        Regime::Supersonic
    }
}

/// Stored derived columns against a fresh reconstruction from the stored m.
fn consistency_check(arrays: &FieldArrays, m: &Profile<f64>, problem: &Problem<f64>) -> Check {
    let value = match reconstruct(m, problem) {
        Ok(f) => {
            let fresh = FieldArrays::from_fields(&f);
            let cols = [
                (&arrays.rho, &fresh.rho),
                (&arrays.u, &fresh.u),
                (&arrays.flux, &fresh.flux),
                (&arrays.e, &fresh.e),
                (&arrays.mach, &fresh.mach),
            ];
            cols.iter()
                .flat_map(|(a, b)| a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs() / y.abs().max(1.0)))
                .fold(0.0, f64::max)
        }
        Err(_) => f64::INFINITY,
    };
    let threshold = 1e-9;
    Check { name: "stored fields match m".into(), value, threshold, passed: value < threshold }
}

pub fn cmd_verify(args: &VerifyArgs) -> i32 {
    let problem = match load_problem(&args.config) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    };
    let format = detect_format(&args.solution, args.format.map(Format::from));
    let (arrays, stored) = match read_solution(&args.solution, format) {
        Ok(x) => x,
        Err(e) => {
            eprintln!("error: {}: {e}", args.solution.display());
            return EXIT_INPUT;
        }
    };
    let profile = arrays.check_shape().and_then(|_| {
        let grid = RadialGrid::from_nodes(arrays.r.clone())?;
        let c = &problem.config;
        if !grid.matches_interval(c.r0(), c.r1()) {
            return Err(Error::GridMismatch(format!(
                "stored grid spans [{}, {}], the configuration [{}, {}]",
                grid.r0(),
                grid.r1(),
                c.r0(),
                c.r1()
            )));
        }
        Profile::new(grid, arrays.m.clone())
    });
    let m = match profile {
        Ok(m) => m,
        Err(e) => {
            eprintln!("error: {}: {e}", args.solution.display());
            return EXIT_INPUT;
        }
    };
    let regime = args.regime.map(Regime::from).or(stored).unwrap_or_else(|| infer_regime(&m, problem.big_j()));
    let mut report = match verify_profile(&problem, &m, regime, None) {
        Ok(r) => r,
        Err(e @ (Error::GridMismatch(_) | Error::InvalidConfig(_))) => {
            eprintln!("error: {e}");
            return EXIT_INPUT;
        }
        Err(e) => {
            eprintln!("verification could not be completed: {e}");
            return EXIT_VERIFICATION;
        }
    };
    report.checks.push(consistency_check(&arrays, &m, &problem));
    report.passed = report.checks.iter().all(|c| c.passed);
    println!("{}", format_report(&report));
    let code = if report.passed { EXIT_OK } else { EXIT_VERIFICATION };
    if let Some(out) = &args.out {
        let text = match serde_json::to_string_pretty(&report) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_INPUT;
            }
        };
        if let Err(e) = write_atomic(out, text.as_bytes()) {
            eprintln!("error: cannot write {}: {e}", out.display());
            return EXIT_INPUT;
        }
        let mut manifest = RunManifest::new(
            "verify",
            &args.config,
            json!({ "solution": args.solution.display().to_string(), "regime": regime }),
        );
        manifest.outputs = vec![out.display().to_string()];
        manifest.exit_code = code;
        if let Err(msg) = write_manifest(&sidecar(out, "manifest"), &manifest) {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    }
    code
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub outcome: SolveOutcome,
}

pub const SWEEP_HEADER: &str =
    "value,hypotheses_satisfied,converged,verified,exit_code,lambda_star_or_ell,weak_residual_linf,weak_residual_l2,output,message";

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:?}")).unwrap_or_default()
}

fn csv_quote(s: &str) -> String {
    let flat = s.replace('\n', " ");
    if flat.contains(',') || flat.contains('"') {
        format!("\"{}\"", flat.replace('"', "\"\""))
    } else {
        flat
    }
}

pub fn sweep_table(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_HEADER);
    s.push('\n');
    for r in rows {
        let o = &r.outcome;
        let _ = writeln!(
            s,
            "{:?},{},{},{},{},{},{},{},{},{}",
            r.value,
            o.hypotheses_satisfied,
            o.converged,
            o.verified.map(|b| b.to_string()).unwrap_or_default(),
            o.exit_code,
            opt(o.lambda_or_ell),
            opt(o.weak_residual_linf),
            opt(o.weak_residual_l2),
            o.outputs.first().map(|p| csv_quote(&p.display().to_string())).unwrap_or_default(),
            csv_quote(&o.message)
        );
    }
    s
}

pub fn sweep_problem(base: &Problem<f64>, param: SweepParam, value: f64) -> sonic_annulus::Result<Problem<f64>> {
    match param {
        SweepParam::Tau => base.with_tau(value),
        SweepParam::DopingScale => base.with_doping_scale(value),
    }
}

pub fn cmd_sweep(args: &SweepArgs) -> i32 {
    let base = match load_problem(&args.config) {
        Ok(p) => p,
        Err(msg) => {
            eprintln!("error: {msg}");
            return EXIT_INPUT;
        }
    };
    if args.values.is_empty() {
        eprintln!("error: --values is empty");
        return EXIT_INPUT;
    }
    let format = args.format.map(Format::from).unwrap_or(Format::Csv);
    let mut manifest = RunManifest::new("sweep", &args.config, parameters_json(&args.solver));
    if let Some(obj) = manifest.parameters.as_object_mut() {
        obj.insert("sweep_param".into(), json!(format!("{:?}", args.param)));
        obj.insert("values".into(), json!(args.values));
    }
    let manifest_path = args.out.join("manifest.json");
    if let Err(msg) = std::fs::create_dir_all(&args.out).map_err(|e| e.to_string()).and_then(|_| write_manifest(&manifest_path, &manifest)) {
        eprintln!("error: output directory {} is not writable: {msg}", args.out.display());
        return EXIT_INPUT;
    }
    let jobs = args
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
        .clamp(1, args.values.len());
    let ext = match format {
        Format::Csv => "csv",
        Format::Json => "json",
    };
    let tag = match args.param {
        SweepParam::Tau => "tau",
        SweepParam::DopingScale => "doping_scale",
    };
    let slots: Mutex<Vec<Option<SweepRow>>> = Mutex::new(vec![None; args.values.len()]);
    let next = AtomicUsize::new(0);
    std::thread::scope(|s| {
        for _ in 0..jobs {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                if i >= args.values.len() {
                    break;
                }
                let value = args.values[i];
                let out = args.out.join(format!("{tag}_{i:03}.{ext}"));
                let outcome = match sweep_problem(&base, args.param, value) {
                    Ok(p) => solve_and_write(&p, &args.solver, &out, format),
                    Err(e) => SolveOutcome::failed(EXIT_INPUT, false, e.to_string()),
                };
                info!("sweep {tag} = {value}: exit {}", outcome.exit_code);
                slots.lock().expect("sweep results lock")[i] = Some(SweepRow { value, outcome });
            });
        }
    });
    let rows: Vec<SweepRow> = slots.into_inner().expect("sweep results lock").into_iter().flatten().collect();
    let table = sweep_table(&rows);
    print!("{table}");
    let summary = args.out.join("summary.csv");
    if let Err(e) = write_atomic(&summary, table.as_bytes()) {
        eprintln!("error: cannot write {}: {e}", summary.display());
        return EXIT_INPUT;
    }
    manifest.outputs = std::iter::once(summary.display().to_string())
        .chain(rows.iter().flat_map(|r| r.outcome.outputs.iter().map(|p| p.display().to_string())))
        .collect();
    if let Err(msg) = write_manifest(&manifest_path, &manifest) {
        eprintln!("error: {msg}");
        return EXIT_INPUT;
    }
    EXIT_OK
}
