//! The `sweep` command: one run per parameter value, in parallel.

use std::fmt::Write as _;
use std::path::Path;

use rayon::prelude::*;

use super::certify::{evaluate, parse_trace_csv};
use super::problem::{ModeName, Overrides, Problem, ProblemFile};
use super::run::{execute, fmt_f, trace_csv, write_outputs};
use super::{write_file, CliError};
use crate::rootfind::GammaSpec;
use crate::seq::Sequence;

pub const SWEEP_PARAMS: &[&str] = &["eps", "sigma", "gamma", "m", "alpha"];

pub const SUMMARY_HEADER: &str = "value,exit_code,steps,final_residual,stop,exact_error,certificates_valid";

/// The file with `param` set to `value`.
pub fn apply(file: &ProblemFile, param: &str, value: f64) -> Result<ProblemFile, CliError> {
    let bad = |msg: String| CliError::Validation(format!("sweep {param} = {value}: {msg}"));
    let mut f = file.clone();
    let pert = &mut f.perturbation;
    let amp = |s: &Option<Sequence>| s.as_ref().map_or(Sequence::constant(value), |s| s.with_amplitude(value));
    match param {
        "eps" | "sigma" | "gamma" => {
            if !(value >= 0.0 && value.is_finite()) {
                return Err(bad("amplitudes must be finite and nonnegative".into()));
            }
            match param {
                "eps" => pert.eps = Some(amp(&pert.eps)),
                "sigma" => pert.sigma = Some(amp(&pert.sigma)),
                _ => pert.gamma = Some(amp(&pert.gamma)),
            }
            if pert.mode == ModeName::None {
                pert.mode = ModeName::Deterministic;
            }
        }
        "m" => {
            let sec = f.integral.as_mut().ok_or_else(|| bad("the problem has no [integral] block".into()))?;
            if !(value >= 2.0 && value.fract() == 0.0 && value <= 1e7) {
                return Err(bad("grid size must be an integer >= 2".into()));
            }
            sec.m = value as usize;
        }
        "alpha" => match f.gamma {
            Some(GammaSpec::Damped { .. }) => f.gamma = Some(GammaSpec::Damped { alpha: value }),
            _ => return Err(bad("alpha needs a damped [gamma] block".into())),
        },
        other => {
            return Err(CliError::Validation(format!(
                "unknown sweep parameter `{other}`; expected one of {}",
                SWEEP_PARAMS.join(", ")
            )))
        }
    }
    Ok(f)
}

pub fn parse_values(text: &str) -> Result<Vec<(String, f64)>, CliError> {
    let values: Vec<(String, f64)> = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map(|v| (s.to_string(), v))
                .map_err(|_| CliError::Validation(format!("bad sweep value `{s}`")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Validation("the sweep value list is empty".into()));
    }
    Ok(values)
}

struct Row {
    label: String,
    exit: i32,
    steps: Option<usize>,
    final_residual: Option<f64>,
    stop: String,
    exact_error: Option<f64>,
    certified: Option<bool>,
}

fn run_one(p: &Problem, label: &str, out: &Path, horizon: Option<usize>) -> Result<Row, CliError> {
    let outcome = execute(p, horizon)?;
    write_outputs(p, &outcome, out)?;
    let s = &outcome.summary;
    let certified = match &outcome.trace {
        Some(t) if !p.file.certify.is_empty() && p.integral.is_none() => {
            let rec = parse_trace_csv(&trace_csv(t))?;
            let c = evaluate(p, &rec, None, horizon)?;
            let text = serde_json::to_string_pretty(&c.report).expect("serializable");
            write_file(&out.join("certify.json"), &(text + "\n"))?;
            Some(c.all_valid)
        }
        _ => None,
    };
    Ok(Row {
        label: label.to_string(),
        exit: outcome.exit,
        steps: s["steps"].as_u64().map(|v| v as usize),
        final_residual: s["final_residual"].as_f64(),
        stop: s["stop"]["reason"].as_str().unwrap_or("").to_string(),
        exact_error: s["integral"]["exact_error"].as_f64(),
        certified,
    })
}

/// Validates every variant first, then runs them concurrently into
/// `out/<param>=<value>/` and writes `out/summary.csv` in input order.
pub fn sweep(
    file: &ProblemFile,
    param: &str,
    values: &[(String, f64)],
    out: &Path,
    ov: Overrides,
) -> Result<String, CliError> {
    if values.is_empty() {
        return Err(CliError::Validation("the sweep value list is empty".into()));
    }
    let problems = values
        .iter()
        .map(|(label, v)| Ok((label.clone(), Problem::build(apply(file, param, *v)?, ov)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    std::fs::create_dir_all(out).map_err(|e| CliError::io(out, e))?;
    let rows = problems
        .par_iter()
        .map(|(label, p)| run_one(p, label, &out.join(format!("{param}={label}")), ov.horizon))
        .collect::<Result<Vec<_>, _>>()?;
    let mut csv = String::from(SUMMARY_HEADER);
    csv.push('\n');
    let opt = |v: Option<f64>| v.map(fmt_f).unwrap_or_default();
    for r in rows {
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{},{}",
            r.label,
            r.exit,
            r.steps.map(|s| s.to_string()).unwrap_or_default(),
            opt(r.final_residual),
            r.stop,
            opt(r.exact_error),
            r.certified.map(|b| b.to_string()).unwrap_or_default(),
        );
    }
    write_file(&out.join("summary.csv"), &csv)?;
    Ok(csv)
}
