//! `cfdo`: batch front end over the pencil library.
//!
//! `cfdo run --config <path>` executes one configured mode and writes
//! its artifacts; `cfdo check` runs the built-in invariant suite. Exit
//! status is 0 on success, 2 for invalid input (rejected before any
//! computation), 3 for a numerical failure (diagnostics land in the
//! run log).

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Parser, Subcommand};
use num_complex::Complex64;

use cfdo_core::problem::{self, ProblemSpec};
use cfdo_core::solver::magnus::DeltaEngine;
use cfdo_core::spectrum::{self, Spectrum};
use cfdo_core::trace::{self, TraceReport};
use cfdo_core::{check, CfdoError};

use config::{Mode, RunConfig};
use output::OutputBundle;

const EXIT_VALIDATION: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cfdo",
    version,
    about = "Pencil spectra and regularized trace audits"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Execute a configured run and write CSV/JSON artifacts.
    Run {
        /// Path to the JSON run configuration.
        #[arg(long)]
        config: PathBuf,
        /// Output directory; overrides the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Worker threads (falls back to CFDO_THREADS, then all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run the built-in invariant suite and report each check.
    Check {
        /// Seed for the randomized checks.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        threads: Option<usize>,
    },
}

fn main() -> ExitCode {
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            out,
            threads,
        } => run(&config, out, threads),
        Cmd::Check { seed, threads } => run_check(seed, threads),
    }
}

/// Resolve --threads, then CFDO_THREADS, then leave the pool at its
/// default. Zero or unparsable values are validation errors.
fn configure_threads(flag: Option<usize>) -> Result<Option<usize>, String> {
    let requested = match flag {
        Some(k) => Some(k),
        None => match std::env::var("CFDO_THREADS") {
            Ok(s) => Some(
                s.parse::<usize>()
                    .map_err(|e| format!("CFDO_THREADS={s:?} is not a thread count: {e}"))?,
            ),
            Err(_) => None,
        },
    };
    if let Some(k) = requested {
        if k == 0 {
            return Err("thread count must be at least 1".into());
        }
        // A second build attempt in the same process is fine to ignore.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(k)
            .build_global();
    }
    Ok(requested)
}

fn exit_for(e: &CfdoError) -> ExitCode {
    if e.is_validation() {
        ExitCode::from(EXIT_VALIDATION)
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    }
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn run(config_path: &Path, out_override: Option<PathBuf>, threads: Option<usize>) -> ExitCode {
    let text = match std::fs::read_to_string(config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("cannot read config {}: {e}", config_path.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    let mut cfg: RunConfig = match serde_json::from_str(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("invalid config {}: {e}", config_path.display());
            return ExitCode::from(EXIT_VALIDATION);
        }
    };
    if let Some(out) = out_override {
        cfg.output = out;
    }
    if let Err(e) = cfg.validate() {
        eprintln!("{e}");
        return exit_for(&e);
    }
    let threads = match configure_threads(threads) {
        Ok(t) => t,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(EXIT_VALIDATION);
        }
    };

    let spec = match cfg.problem() {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{e}");
            return exit_for(&e);
        }
    };
    if let Err(e) = std::fs::create_dir_all(&cfg.output) {
        eprintln!(
            "cannot create output directory {}: {e}",
            cfg.output.display()
        );
        return ExitCode::from(EXIT_NUMERICAL);
    }

    let mut log = vec![
        format!("cfdo run started at unix {}", unix_now()),
        format!("config: {}", config_path.display()),
        format!(
            "mode: {}, N = {}, shift mode: {}, seed: {}",
            cfg.mode, cfg.n, cfg.shift_mode, cfg.seed
        ),
        format!(
            "problem: alpha = {}, p = \"{}\", q = \"{}\", h = {}, H = {}",
            cfg.alpha, cfg.p, cfg.q, cfg.h, cfg.big_h
        ),
        format!(
            "tolerances: ode = {:e}, quadrature = {:e}, root = {:e}",
            cfg.tolerances.ode, cfg.tolerances.quadrature, cfg.tolerances.root
        ),
        match threads {
            Some(k) => format!("threads: {k}"),
            None => "threads: library default".into(),
        },
    ];

    let bundle = OutputBundle {
        spectrum_csv: cfg.output.join("spectrum.csv"),
        trace_json: matches!(cfg.mode, Mode::Trace1 | Mode::Trace2 | Mode::AuditAll)
            .then(|| cfg.output.join("trace.json")),
        convergence_csv: (!matches!(cfg.mode, Mode::Spectrum))
            .then(|| cfg.output.join("convergence.csv")),
        log: cfg.output.join("run.log"),
    };

    match execute(&cfg, &spec, &bundle, &mut log) {
        Ok(()) => {}
        Err(RunError::Numerics(e)) => {
            log.push(format!("error: {e}"));
            eprintln!("{e}");
            let _ = output::write_log(&bundle.log, &log);
            return exit_for(&e);
        }
        Err(RunError::Io(e)) => {
            log.push(format!("io error: {e}"));
            eprintln!("io error: {e}");
            let _ = output::write_log(&bundle.log, &log);
            return ExitCode::from(EXIT_NUMERICAL);
        }
    }

    log.push(format!("cfdo run finished at unix {}", unix_now()));
    if let Err(e) = output::write_log(&bundle.log, &log) {
        eprintln!("cannot write log: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    if let Err(e) = bundle.verify() {
        eprintln!("artifact verification failed: {e}");
        return ExitCode::from(EXIT_NUMERICAL);
    }
    for p in bundle.declared() {
        println!("wrote {}", p.display());
    }
    ExitCode::SUCCESS
}

enum RunError {
    Numerics(CfdoError),
    Io(std::io::Error),
}

impl From<CfdoError> for RunError {
    fn from(e: CfdoError) -> Self {
        RunError::Numerics(e)
    }
}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

fn execute(
    cfg: &RunConfig,
    spec: &ProblemSpec,
    bundle: &OutputBundle,
    log: &mut Vec<String>,
) -> Result<(), RunError> {
    let t0 = Instant::now();
    let spectrum = spectrum::find_eigenvalues(spec, cfg.n)?;
    log.push(format!(
        "spectrum: {} eigenvalues certified inside radius {:.6} in {:.3}s",
        spectrum.certified_count,
        spectrum.winding_radius,
        t0.elapsed().as_secs_f64()
    ));
    for note in &spectrum.notes {
        log.push(format!("note: {note}"));
    }
    output::write_spectrum_csv(&bundle.spectrum_csv, &spectrum)?;

    let mut reports: Vec<TraceReport> = Vec::new();
    let formulas: &[fn(
        &ProblemSpec,
        &Spectrum,
        problem::ShiftMode,
    ) -> cfdo_core::Result<TraceReport>] = match cfg.mode {
        Mode::Trace1 => &[trace::trace1_with_spectrum],
        Mode::Trace2 => &[trace::trace2_with_spectrum],
        Mode::AuditAll => &[trace::trace1_with_spectrum, trace::trace2_with_spectrum],
        Mode::Spectrum | Mode::Asymptotics => &[],
    };
    for f in formulas {
        let t = Instant::now();
        let report = f(spec, &spectrum, cfg.shift_mode)?;
        log.push(format!(
            "{}: lhs = {:.6e}, rhs = {:.6e}, residual = {:.3e}, convergence delta = {:.3e} ({:.3}s)",
            report.formula,
            report.lhs_extrapolated,
            report.rhs_closed_form,
            report.residual,
            report.convergence_delta,
            t.elapsed().as_secs_f64()
        ));
        if !report.flags.is_empty() {
            log.push(format!(
                "{} flags: {}",
                report.formula,
                report.flags.join("; ")
            ));
        }
        reports.push(report);
    }
    if let Some(path) = &bundle.trace_json {
        output::write_trace_json(path, &reports, spec.constants()?)?;
    }

    match cfg.mode {
        Mode::Asymptotics => {
            let t = Instant::now();
            let rows = asymptotic_ladder(spec)?;
            let slope = loglog_slope(&rows);
            log.push(format!(
                "asymptotics: {} probe points, closed-form error log-log slope {:.3} ({:.3}s)",
                rows.len(),
                slope,
                t.elapsed().as_secs_f64()
            ));
            if let Some(path) = &bundle.convergence_csv {
                output::write_asymptotics_csv(path, &rows)?;
            }
        }
        _ => {
            if let Some(path) = &bundle.convergence_csv {
                output::write_convergence_csv(path, &reports)?;
            }
        }
    }
    Ok(())
}

/// Relative error of the leading-order characteristic value along a
/// complex ray of moduli in [20, 200]. The ray leans 45 degrees off the
/// real axis, flattened when the exponential growth scale would leave
/// double range.
fn asymptotic_ladder(spec: &ProblemSpec) -> cfdo_core::Result<Vec<(f64, f64)>> {
    let engine = DeltaEngine::new(spec);
    let u_cap = spec.constants()?.u_cap;
    let mut rows = Vec::with_capacity(24);
    for i in 0..24 {
        let r = 20.0 * (200.0f64 / 20.0).powf(i as f64 / 23.0);
        let im = (r * std::f64::consts::FRAC_1_SQRT_2).min(600.0 / u_cap);
        let re = (r * r - im * im).sqrt();
        let probe = Complex64::new(re, im);
        let closed = problem::asymptotic_delta(spec, probe)?;
        let err = (engine.eval_complex(probe).to_plain() - closed).norm() / closed.norm();
        rows.push((r, err));
    }
    Ok(rows)
}

fn loglog_slope(rows: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|(_, e)| *e > 0.0 && e.is_finite())
        .map(|(r, e)| (r.ln(), e.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

fn run_check(seed: u64, threads: Option<usize>) -> ExitCode {
    if let Err(msg) = configure_threads(threads) {
        eprintln!("{msg}");
        return ExitCode::from(EXIT_VALIDATION);
    }
    let results = check::run_all(seed);
    let mut failed = 0usize;
    for r in &results {
        let verdict = if r.passed { "PASS" } else { "FAIL" };
        println!("{verdict} {}: {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "self-check: {}/{} passed (seed {seed})",
        results.len() - failed,
        results.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(EXIT_NUMERICAL)
    }
}
