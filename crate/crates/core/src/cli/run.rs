//! The `run` command: iterate a problem and write its trace.

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;
use serde_json::json;

use super::problem::{ConstValue, Problem, ProblemKind};
use super::{write_file, CliError};
use crate::estimate::{estimate_lipschitz_k, estimate_lipschitz_m, DEFAULT_SAFETY_FACTOR, DEFAULT_SAMPLES};
use crate::greens::{bound_propagate, pointwise_steps, run_integral_iteration, GridFunction};
use crate::majorant::{check_first_step, precheck, AssumptionCheck, PrecheckReport, ProblemConstants, DEFAULT_HORIZON};
use crate::schemes::{audit_theorem, run_outer, IterationTrace, SchemeTag, StopReason};
use crate::space::{BallDomain, Vector};

pub const EXIT_CONVERGED: i32 = 0;
pub const EXIT_VALIDATION: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_UNFINISHED: i32 = 3;

pub const TRACE_HEADER: &str = "n,r_n,R_n,r_tilde_n,residual_n,inner_defect_n,injected_n";

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f(v: f64) -> String {
    format!("{v:.16e}")
}

fn fmt_opt(v: Option<&f64>) -> String {
    v.map(|x| fmt_f(*x)).unwrap_or_default()
}

pub fn trace_csv(t: &IterationTrace) -> String {
    let mut s = String::from(TRACE_HEADER);
    s.push('\n');
    for n in 0..t.iterates.len() {
        let _ = writeln!(
            s,
            "{n},{},{},{},{},{},{}",
            fmt_opt(t.r.get(n)),
            fmt_opt(t.r_partial.get(n)),
            fmt_opt(t.r_tilde.get(n)),
            fmt_opt(t.residual.get(n)),
            fmt_opt(t.inner_defect.get(n)),
            fmt_opt(t.injected.get(n)),
        );
    }
    s
}

pub fn iterates_csv(t: &IterationTrace) -> String {
    let dim = t.iterates[0].dim();
    let mut s = String::from("n");
    for i in 1..=dim {
        let _ = write!(s, ",x{i}");
    }
    s.push('\n');
    for (n, x) in t.iterates.iter().enumerate() {
        s.push_str(&n.to_string());
        for v in x.coords() {
            s.push(',');
            s.push_str(&fmt_f(*v));
        }
        s.push('\n');
    }
    s
}

/// Iterates of an integral run in long form, one node per line.
pub fn grid_iterates_csv(t: &IterationTrace, grid: &GridFunction) -> String {
    let mut s = String::from("n,t,value\n");
    for (n, x) in t.iterates.iter().enumerate() {
        for (tn, v) in grid.nodes().iter().zip(x.coords()) {
            let _ = writeln!(s, "{n},{},{}", fmt_f(*tn), fmt_f(*v));
        }
    }
    s
}

/// The constants actually used, with their provenance.
#[derive(Clone, Debug, Serialize)]
pub struct ConstantsReport {
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "K")]
    pub k: f64,
    pub m_source: String,
    pub k_source: String,
    pub eps: f64,
    pub eps_source: &'static str,
    /// `|A'(x_0)|` for modified Newton, `|beta|` for the relaxed scheme.
    pub b_norm: f64,
    pub m_star: f64,
}

/// Builds [`ProblemConstants`] from the file, estimating where asked, with
/// `eps` taken from the plan or else from the measured `|A(x_0) - x_0|`.
pub fn resolve_constants(
    p: &Problem,
    residual0: f64,
    horizon: usize,
) -> Result<Option<(ProblemConstants, ConstantsReport)>, CliError> {
    let Some(sec) = &p.file.constants else { return Ok(None) };
    let center = match p.file.kind {
        ProblemKind::Integral => {
            let v = p.x0.coords();
            Vector::from_slice(&[v.iter().sum::<f64>() / v.len() as f64]).expect("finite mean")
        }
        _ => p.x0.clone(),
    };
    let radius = sec.radius.unwrap_or(0.5);
    let safety = sec.safety_factor.unwrap_or(DEFAULT_SAFETY_FACTOR);
    let samples = sec.samples.unwrap_or(DEFAULT_SAMPLES);
    let ball = BallDomain::new(center, radius, p.config.norm).map_err(|e| CliError::Validation(e.to_string()))?;
    let resolve = |v: &ConstValue, which: char| -> Result<(f64, String), CliError> {
        match v {
            ConstValue::Value(x) => Ok((*x, "declared".into())),
            ConstValue::Word(_) => {
                let est = if which == 'M' {
                    estimate_lipschitz_m(&p.a, &ball, samples, p.seed)
                } else {
                    estimate_lipschitz_k(&p.a, &ball, samples, p.seed)
                }
                .map_err(|e| CliError::Validation(format!("estimating {which}: {e}")))?;
                Ok((
                    est.inflated(safety),
                    format!(
                        "empirical lower bound {:e} from {} sampled pairs (seed {}), inflated by {safety}",
                        est.value, est.samples, est.seed
                    ),
                ))
            }
        }
    };
    let (m, m_source) = resolve(&sec.m, 'M')?;
    let (k, k_source) = resolve(&sec.k, 'K')?;
    let (eps, eps_source) = match p.plan.eps0 {
        Some(e) => (e, "declared"),
        None => (residual0, "measured |A(x_0) - x_0|"),
    };
    let tag = p.scheme.tag();
    let b_norm = match tag {
        SchemeTag::ModifiedNewton => {
            let j = p.a.jacobian(&p.x0).map_err(|e| CliError::Validation(format!("A'(x_0): {e}")))?;
            p.config.norm.matrix_norm(&j)
        }
        SchemeTag::Custom => p.file.relaxation().abs(),
        _ => 0.0,
    };
    let c = ProblemConstants::for_scheme(tag, m, k, eps, &p.plan, b_norm, horizon);
    let report = ConstantsReport { m, k, m_source, k_source, eps, eps_source, b_norm, m_star: c.m_star };
    Ok(Some((c, report)))
}

/// Everything a run produced, before anything is written.
pub struct RunOutcome {
    pub trace: Option<IterationTrace>,
    pub summary: serde_json::Value,
    pub exit: i32,
}

pub fn exit_for(stop: &StopReason) -> i32 {
    match stop {
        s if s.converged() => EXIT_CONVERGED,
        s if s.diverged() => EXIT_DIVERGED,
        _ => EXIT_UNFINISHED,
    }
}

fn precheck_json(pre: &PrecheckReport, first: &AssumptionCheck) -> serde_json::Value {
    json!({ "passed": pre.passed(), "checks": pre.checks, "first_step": first })
}

pub fn execute(p: &Problem, horizon: Option<usize>) -> Result<RunOutcome, CliError> {
    let horizon = horizon.unwrap_or(DEFAULT_HORIZON);
    let mut summary = json!({
        "name": p.file.display_name(),
        "kind": p.file.kind,
        "scheme": p.scheme.tag(),
        "norm": p.config.norm,
        "dim": p.file.dim,
        "seed": p.seed,
        "inner_tol": p.config.inner_tol,
        "problem_hash": p.hash(),
    });
    let result = match &p.integral {
        Some(g) => run_integral_iteration(&g.kernel, &p.a, &p.scheme, &g.grid, &p.plan, &p.stop, &p.config)
            .map_err(|e| e.to_string()),
        None => run_outer(&p.a, &p.scheme, &p.x0, &p.plan, &p.stop, &p.config).map_err(|e| e.to_string()),
    };
    let trace = match result {
        Ok(t) => t,
        Err(msg) => {
            summary["stop"] = json!({ "reason": "step_failure" });
            summary["stop_message"] = json!(msg);
            summary["converged"] = json!(false);
            return Ok(RunOutcome { trace: None, summary, exit: EXIT_UNFINISHED });
        }
    };
    let exit = exit_for(&trace.stop);
    summary["stop"] = serde_json::to_value(&trace.stop).expect("serializable");
    summary["stop_message"] = json!(trace.stop.to_string());
    summary["converged"] = json!(trace.stop.converged());
    summary["steps"] = json!(trace.steps());
    summary["final_residual"] = json!(trace.final_residual());

    let constants = resolve_constants(p, trace.residual[0], horizon)?;
    if let Some((c, report)) = &constants {
        summary["constants"] = serde_json::to_value(report).expect("serializable");
        let first = check_first_step(c, trace.r.first().copied().unwrap_or(0.0));
        summary["precheck"] = precheck_json(&precheck(c), &first);
    }

    match &p.integral {
        None => {
            summary["x_final"] = json!(trace.last().coords());
            if let Some((c, _)) = &constants {
                let audit = audit_theorem(&trace, c, p.scheme.tag(), p.config.inner_tol);
                summary["audit"] = json!({
                    "passed": audit.passed(),
                    "rows": audit.rows.len(),
                    "violations": audit.violations().count(),
                    "flagged": audit.flagged().count(),
                    "min_margin": audit.min_margin(),
                    "slack": audit.slack,
                });
            }
        }
        Some(g) => {
            let last =
                g.grid.with_values(trace.last().coords().to_vec()).map_err(|e| CliError::Validation(e.to_string()))?;
            let mut info = json!({ "m": g.grid.intervals(), "t_end": g.kernel.t_end, "kernel": g.kernel.to_string() });
            if let Some(exact) = &g.exact {
                let mut err = 0.0f64;
                for (t, v) in last.nodes().iter().zip(last.values()) {
                    let e =
                        exact.eval_slots(&[*t]).map_err(|e| CliError::Validation(format!("integral.exact: {e}")))?;
                    err = err.max((v - e).abs());
                }
                info["exact_error"] = json!(err);
            }
            if let Some((c, _)) = &constants {
                let steps = pointwise_steps(&trace, &g.grid).map_err(|e| CliError::Validation(e.to_string()))?;
                let scale = trace.iterates.iter().map(|x| x.norm(crate::space::NormKind::Sup)).fold(0.0, f64::max);
                let mut checks = Vec::new();
                let mut all = true;
                for n in 1..steps.len() {
                    let rep = bound_propagate(&g.kernel, c, &steps[n - 1], &steps[n], p.scheme.tag(), n)
                        .map_err(|e| CliError::Validation(e.to_string()))?
                        .allow_roundoff(scale);
                    all &= rep.passed;
                    checks.push(json!({
                        "n": rep.n,
                        "min_margin": rep.min_margin,
                        "argmin_t": g.grid.nodes()[rep.argmin],
                        "slack": rep.slack,
                        "roundoff": rep.roundoff,
                        "passed": rep.passed,
                    }));
                }
                info["bound_checks"] = json!(checks);
                info["bound_passed"] = json!(all);
            }
            summary["integral"] = info;
        }
    }
    Ok(RunOutcome { trace: Some(trace), summary, exit })
}

pub fn write_outputs(p: &Problem, outcome: &RunOutcome, out: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    if let Some(t) = &outcome.trace {
        write_file(&out.join("trace.csv"), &trace_csv(t))?;
        match &p.integral {
            None => write_file(&out.join("iterates.csv"), &iterates_csv(t))?,
            Some(g) => {
                write_file(&out.join("iterates.csv"), &grid_iterates_csv(t, &g.grid))?;
                let last =
                    g.grid.with_values(t.last().coords().to_vec()).map_err(|e| CliError::Validation(e.to_string()))?;
                write_file(&out.join("solution.csv"), &last.to_csv())?;
            }
        }
    }
    let text = serde_json::to_string_pretty(&outcome.summary).expect("serializable");
    write_file(&out.join("run.json"), &(text + "\n"))
}
