//! The four flows and their exit codes.

use std::fs;
use std::path::{Path, PathBuf};

use fbvp::fracops::gamma;
use fbvp::hypotheses::{check_condition_31, check_hypotheses, condition_31_from, Cond31Report};
use fbvp::registry::{verify_section4, ExampleId};
use fbvp::resonance::{build_resonance, verify_structure, ResonanceData};
use fbvp::solver::{solve, InitialGuess};
use fbvp::Error;

use crate::config::{parse_file, resolve, ConfigError, Overrides, ProblemSource, RunConfig};
use crate::report::{solution_csv, sweep_csv, Report};

pub const EXIT_OK: i32 = 0;
/// Non-resonant problem, or the solvability condition fails.
pub const EXIT_CONDITION: i32 = 1;
pub const EXIT_NO_CONVERGENCE: i32 = 2;
pub const EXIT_INPUT: i32 = 3;

/// Grid used by `verify-example` when none is given; the quadrature
/// constants need it to reach 1e-6.
pub const VERIFY_GRID: usize = 4096;
/// Structure-check samples per run.
pub const STRUCTURE_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Analyze,
    Solve,
    CheckHypotheses,
    VerifyExample,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Analyze => "analyze",
            Self::Solve => "solve",
            Self::CheckHypotheses => "check-hypotheses",
            Self::VerifyExample => "verify-example",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Invocation {
    pub command: Command,
    pub config: Option<PathBuf>,
    pub overrides: Overrides,
    pub out: PathBuf,
    /// Extra solves from random kernel initial guesses.
    pub sweep: usize,
    pub sweep_scale: f64,
}

/// What a run produced, before anything is written.
#[derive(Debug)]
pub struct Outcome {
    pub code: i32,
    pub report: String,
    pub solution: Option<String>,
    pub sweep: Option<String>,
}

/// Executes the flow and writes `report.txt`, plus `solution.csv` and
/// `sweep.csv` when produced. Returns the exit code.
pub fn run(inv: &Invocation) -> i32 {
    let outcome = execute(inv);
    match write_outputs(&inv.out, &outcome) {
        Ok(()) => outcome.code,
        Err(e) => {
            eprintln!("error: cannot write to {}: {e}", inv.out.display());
            EXIT_INPUT
        }
    }
}

fn write_outputs(dir: &Path, o: &Outcome) -> std::io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), &o.report)?;
    if let Some(s) = &o.solution {
        fs::write(dir.join("solution.csv"), s)?;
    }
    if let Some(s) = &o.sweep {
        fs::write(dir.join("sweep.csv"), s)?;
    }
    Ok(())
}

/// Runs the flow without touching the file system.
pub fn execute(inv: &Invocation) -> Outcome {
    let mut report = Report::new("fbvp report");
    report.kv("command", inv.command.name());
    let rc = match load(inv) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e}");
            report.section("status");
            report.kv("error", &e);
            report.kv("exit code", EXIT_INPUT);
            return Outcome {
                code: EXIT_INPUT,
                report: report.into_string(),
                solution: None,
                sweep: None,
            };
        }
    };
    let mut out = Outcome {
        code: EXIT_OK,
        report: String::new(),
        solution: None,
        sweep: None,
    };
    let status = match flow(inv, &rc, &mut report, &mut out) {
        Ok((code, why)) => {
            out.code = code;
            why
        }
        Err(e) => {
            out.code = exit_code_for(&e);
            eprintln!("error: {e}");
            e.to_string()
        }
    };
    report.section("status");
    report.kv("outcome", status);
    report.kv("exit code", out.code);
    out.report = report.into_string();
    out
}

fn load(inv: &Invocation) -> Result<RunConfig, ConfigError> {
    let mut ov = inv.overrides.clone();
    let file = match &inv.config {
        Some(p) => Some((parse_file(p)?, p.clone())),
        None => None,
    };
    if inv.command == Command::VerifyExample
        && ov.grid.is_none()
        && file.as_ref().is_none_or(|(f, _)| f.problem.grid_n.is_none())
    {
        ov.grid = Some(VERIFY_GRID);
    }
    resolve(file.as_ref().map(|(f, p)| (f, p.as_path())), &ov)
}

fn exit_code_for(e: &Error) -> i32 {
    match e {
        Error::NonResonant => EXIT_CONDITION,
        Error::NonFiniteRhs { .. } | Error::NoBound(_) => EXIT_NO_CONVERGENCE,
        _ => EXIT_INPUT,
    }
}

fn header(rc: &RunConfig, report: &mut Report) {
    match &rc.source {
        ProblemSource::Builtin(id) => report.kv("problem", format!("builtin {} (k = {})", id.name(), id.dim() / 3)),
        ProblemSource::File(p) => report.kv("problem", p.display()),
    }
    let s = &rc.spec;
    report.kv("alpha", s.ord.alpha());
    report.kv("xi", s.xi);
    report.kv("n", s.dim());
    report.kv("grid N", s.grid_n);
    report.kv("seed", rc.seed);
    report.kv("rhs", s.rhs.describe());
}

/// The condition triple. A non-resonant `M` is invertible, so
/// `‖I − M⁺M‖ = 0` there.
fn condition(rc: &RunConfig, rd: Option<&ResonanceData>) -> fbvp::Result<Option<Cond31Report>> {
    let Some(g) = &rc.growth else { return Ok(None) };
    Ok(Some(match rd {
        Some(rd) => check_condition_31(rc.spec.ord, rd, g)?,
        None => condition_31_from(gamma(rc.spec.ord.alpha())?, 0.0, g.a1.l1_norm(), g.b1.l1_norm()),
    }))
}

fn flow(inv: &Invocation, rc: &RunConfig, report: &mut Report, out: &mut Outcome) -> fbvp::Result<(i32, String)> {
    header(rc, report);
    if inv.command == Command::VerifyExample {
        return verify(rc, report, out);
    }
    let rd = match build_resonance(&rc.spec, 0.0) {
        Ok(rd) => rd,
        Err(Error::NonResonant) => {
            if let Some(c) = condition(rc, None)? {
                report.condition(&c);
            }
            return Ok((EXIT_CONDITION, Error::NonResonant.to_string()));
        }
        Err(e) => return Err(e),
    };
    report.resonance(&rd);
    let cond = condition(rc, Some(&rd))?;
    if let Some(c) = &cond {
        report.condition(c);
    }
    let cond_failed = cond.as_ref().is_some_and(|c| !c.pass);

    match inv.command {
        Command::Analyze => {
            report.structure(&verify_structure(&rc.spec, &rd, STRUCTURE_SAMPLES, rc.seed)?);
            Ok(condition_status(cond_failed))
        }
        Command::CheckHypotheses => {
            let h = check_hypotheses(&rc.spec, &rd, rc.growth.as_ref(), &rc.probes)?;
            match &h.h1 {
                Some(h1) => report.h1(h1),
                None => {
                    report.section("growth bound (H1)");
                    report.line("no [growth] data supplied");
                }
            }
            report.h2(&h.h2);
            report.h3(&h.h3);
            Ok(condition_status(cond_failed))
        }
        Command::Solve => {
            let sr = solve(&rc.spec, &rd, &rc.solver)?;
            report.solve(&sr);
            out.solution = Some(solution_csv(rc.spec.ord, &sr)?);
            if inv.sweep > 0 {
                let mut rows = Vec::with_capacity(inv.sweep);
                for i in 0..inv.sweep {
                    let mut opts = rc.solver.clone();
                    opts.initial = InitialGuess::RandomKernel { scale: inv.sweep_scale };
                    opts.seed = rc.seed.wrapping_add(1 + i as u64);
                    rows.push((opts.seed, solve(&rc.spec, &rd, &opts)?));
                }
                let converged = rows.iter().filter(|(_, r)| r.converged).count();
                report.section("sweep");
                report.kv("runs", rows.len());
                report.kv("converged", converged);
                report.kv("initial kernel scale", inv.sweep_scale);
                out.sweep = Some(sweep_csv(&rows));
            }
            if sr.converged {
                Ok((EXIT_OK, "solver converged".into()))
            } else {
                Ok((EXIT_NO_CONVERGENCE, format!("solver did not converge: {:?}", sr.termination)))
            }
        }
        Command::VerifyExample => unreachable!("handled above"),
    }
}

fn condition_status(failed: bool) -> (i32, String) {
    if failed {
        (EXIT_CONDITION, "smallness condition fails".into())
    } else {
        (EXIT_OK, "ok".into())
    }
}

fn verify(rc: &RunConfig, report: &mut Report, out: &mut Outcome) -> fbvp::Result<(i32, String)> {
    let k = match &rc.source {
        ProblemSource::Builtin(ExampleId::Section4 { k }) => *k,
        ProblemSource::File(_) => {
            return Err(Error::Input(
                "verify-example needs a builtin problem (--builtin section4)".into(),
            ))
        }
    };
    let g = verify_section4(k, rc.spec.grid_n, &rc.solver)?;
    if let Ok(rd) = build_resonance(&rc.spec, 0.0) {
        report.resonance(&rd);
    }
    report.condition(&g.cond31);
    report.section("golden checks");
    report.checks(&g.checks);
    report.section("notes");
    for n in &g.notes {
        report.line(n);
    }
    report.h1(&g.h1);
    report.h3(&g.h3);
    report.solve(&g.solve);
    out.solution = Some(solution_csv(rc.spec.ord, &g.solve)?);

    let failures = g.failures();
    report.section("failed checks");
    if failures.is_empty() {
        report.line("none");
    }
    for c in &failures {
        report.check(c);
    }
    let passed = g.checks.len() - failures.len();
    Ok((
        EXIT_OK,
        format!("{passed} of {} golden checks pass, {} fail", g.checks.len(), failures.len()),
    ))
}
