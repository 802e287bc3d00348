//! The `certify` command: check a recorded trace against majorant
//! certificates.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde_json::json;

use super::problem::{CertifyRequest, Problem, ProblemKind, Witness};
use super::run::{resolve_constants, TRACE_HEADER};
use super::{write_file, CliError};
use crate::majorant::{
    cert_bounded, cert_geometric, cert_quadratic, cert_remark1, cert_sandwich, search_geometric, search_quadratic,
    search_sandwich, tail_bound, theorem_to_recurrence, Certificate, MajorantParams, Regime, DEFAULT_HORIZON,
};

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_NOT_CERTIFIED: i32 = 4;

/// Columns of a recorded trace.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RecordedTrace {
    pub r: Vec<f64>,
    pub residual: Vec<f64>,
}

pub fn parse_trace_csv(text: &str) -> Result<RecordedTrace, CliError> {
    let mut lines = text.lines();
    if lines.next() != Some(TRACE_HEADER) {
        return Err(CliError::Validation(format!("trace.csv: expected header `{TRACE_HEADER}`")));
    }
    let mut out = RecordedTrace::default();
    for (i, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 7 {
            return Err(CliError::Validation(format!("trace.csv line {}: expected 7 fields", i + 2)));
        }
        let num = |s: &str| -> Result<Option<f64>, CliError> {
            if s.is_empty() {
                return Ok(None);
            }
            s.parse().map(Some).map_err(|_| CliError::Validation(format!("trace.csv line {}: bad number `{s}`", i + 2)))
        };
        if let Some(r) = num(fields[1])? {
            out.r.push(r);
        }
        if let Some(v) = num(fields[4])? {
            out.residual.push(v);
        }
    }
    if out.residual.is_empty() {
        return Err(CliError::Validation("trace.csv holds no rows".into()));
    }
    Ok(out)
}

/// Resolves `--trace` given as a run directory or a `trace.csv` path.
pub fn trace_paths(trace: &Path) -> (PathBuf, PathBuf) {
    if trace.is_dir() {
        (trace.join("trace.csv"), trace.join("run.json"))
    } else {
        let dir = trace.parent().unwrap_or(Path::new("."));
        (trace.to_path_buf(), dir.join("run.json"))
    }
}

fn witness(values: &BTreeMap<String, f64>, name: &str) -> Result<f64, String> {
    values.get(name).copied().ok_or_else(|| format!("missing witness `{name}`"))
}

fn failed(regime: Regime, horizon: usize, reason: String) -> Certificate {
    Certificate::rejected(regime, horizon, reason)
}

/// Builds the certificate a request asks for.
pub fn certificate_for(req: &CertifyRequest, p: &MajorantParams, horizon: usize) -> Certificate {
    let regime = Regime::parse(&req.regime).expect("validated regime");
    let explicit = match &req.witness {
        Witness::Values(v) => Some(v),
        Witness::Word(_) => None,
    };
    let pick = |found: Option<Certificate>, what: &str| {
        found.unwrap_or_else(|| failed(regime, horizon, format!("no {what} witness found on the search grid")))
    };
    let built = match (regime, explicit) {
        (Regime::Bounded, _) => Ok(cert_bounded(p, horizon)),
        (Regime::UniformMax, _) => Ok(cert_remark1(p, horizon)),
        (Regime::Sandwich, None) => Ok(pick(search_sandwich(p, horizon), "sandwich")),
        (Regime::Geometric, None) => Ok(pick(search_geometric(p, horizon), "geometric")),
        (Regime::Quadratic, None) => Ok(pick(search_quadratic(p, horizon), "quadratic")),
        (Regime::Sandwich, Some(w)) => (|| Ok(cert_sandwich(p, horizon, witness(w, "C1")?, witness(w, "C2")?)))(),
        (Regime::Geometric, Some(w)) => (|| {
            let default_lt0 = if p.lambda.at(0) > 0.0 { p.lambda.at(0) } else { 1.0 };
            let lt0 = w.get("lambda_tilde0").copied().unwrap_or(default_lt0);
            Ok(cert_geometric(p, horizon, witness(w, "chi")?, witness(w, "mu")?, lt0, witness(w, "C_mu")?))
        })(),
        (Regime::Quadratic, Some(w)) => (|| Ok(cert_quadratic(p, horizon, witness(w, "chi")?, witness(w, "mu")?)))(),
    };
    built.unwrap_or_else(|e: String| failed(regime, horizon, e))
}

fn finite_or_null(v: f64) -> serde_json::Value {
    if v.is_finite() {
        json!(v)
    } else {
        serde_json::Value::Null
    }
}

pub struct CertifyOutcome {
    pub report: serde_json::Value,
    pub exit: i32,
    pub all_valid: bool,
}

/// Certifies a recorded step sequence; `expected_hash` is the hash stored
/// with the trace.
pub fn evaluate(
    p: &Problem,
    rec: &RecordedTrace,
    expected_hash: Option<&str>,
    horizon: Option<usize>,
) -> Result<CertifyOutcome, CliError> {
    if p.file.kind == ProblemKind::Integral {
        return Err(CliError::Validation(
            "certificates are defined for scalar step sequences of fixed-point and root problems; integral runs carry their bound checks in run.json".into(),
        ));
    }
    let hash = p.hash();
    if let Some(expected) = expected_hash {
        if expected != hash {
            return Err(CliError::HashMismatch { expected: expected.to_string(), found: hash });
        }
    }
    let default_horizon = horizon.unwrap_or(DEFAULT_HORIZON);
    let (c, report) = resolve_constants(p, rec.residual[0], default_horizon)?
        .ok_or_else(|| CliError::Validation("certify needs a [constants] block".into()))?;
    let tag = p.scheme.tag();
    let r = &rec.r;
    if r.is_empty() {
        return Err(CliError::Validation("the trace has no steps to certify".into()));
    }
    let requests = if p.file.certify.is_empty() {
        vec![CertifyRequest { regime: "bounded".into(), witness: Witness::default(), offset: 0, horizon: None }]
    } else {
        p.file.certify.clone()
    };

    let mut all_valid = true;
    let mut certs = Vec::new();
    for req in &requests {
        let h = req.horizon.or(horizon).unwrap_or(DEFAULT_HORIZON);
        let o = req.offset;
        let cert = if o >= r.len() {
            failed(
                Regime::parse(&req.regime).expect("validated"),
                h,
                format!("offset {o} is beyond the {} recorded steps", r.len()),
            )
        } else {
            match theorem_to_recurrence(&c, tag, r[o], h + o) {
                Err(e) => failed(Regime::parse(&req.regime).expect("validated"), h, e.to_string()),
                Ok(full) => {
                    let shifted =
                        MajorantParams::new(full.eta, full.lambda.shifted(o, h), full.rho.shifted(o, h), r[o]);
                    certificate_for(req, &shifted, h)
                }
            }
        };
        let measured = if o < r.len() { &r[o..] } else { &r[0..0] };
        let check = cert.check_upper(measured);
        let ok = cert.valid && check.ok();
        all_valid &= ok;
        let shown = check.compared;
        certs.push(json!({
            "regime": cert.regime,
            "offset": o,
            "horizon": cert.checked_horizon,
            "valid": cert.valid,
            "reason": cert.reason,
            "witnesses": cert.witnesses,
            "notes": cert.notes,
            "compared": check.compared,
            "violations": check.violations,
            "min_upper_margin": check.min_upper_margin,
            "upper": cert.upper.iter().take(shown).map(|v| finite_or_null(*v)).collect::<Vec<_>>(),
            "measured": measured.iter().take(shown).collect::<Vec<_>>(),
            "ok": ok,
        }));
    }

    let tails = match theorem_to_recurrence(&c, tag, r[0], default_horizon) {
        Ok(full) => (1..=r.len())
            .map(|n| match tail_bound(r, &full, n) {
                Ok(b) => json!({ "n": n, "bound": b }),
                Err(e) => json!({ "n": n, "bound": null, "reason": e.to_string() }),
            })
            .collect::<Vec<_>>(),
        Err(e) => vec![json!({ "n": null, "bound": null, "reason": e.to_string() })],
    };

    let report_json = json!({
        "name": p.file.display_name(),
        "problem_hash": hash,
        "scheme": tag,
        "constants": report,
        "certificates": certs,
        "tail_bounds": tails,
        "all_valid": all_valid,
    });
    Ok(CertifyOutcome {
        report: report_json,
        exit: if all_valid { EXIT_CERTIFIED } else { EXIT_NOT_CERTIFIED },
        all_valid,
    })
}

/// Reads a run directory, certifies it and writes `certify.json`.
pub fn certify_files(p: &Problem, trace: &Path, out: Option<&Path>, horizon: Option<usize>) -> Result<i32, CliError> {
    let (csv_path, json_path) = trace_paths(trace);
    let csv = std::fs::read_to_string(&csv_path).map_err(|e| CliError::io(&csv_path, e))?;
    let rec = parse_trace_csv(&csv)?;
    let run_json = std::fs::read_to_string(&json_path).map_err(|e| CliError::io(&json_path, e))?;
    let run: serde_json::Value =
        serde_json::from_str(&run_json).map_err(|e| CliError::Validation(format!("{}: {e}", json_path.display())))?;
    let expected = run["problem_hash"]
        .as_str()
        .ok_or_else(|| CliError::Validation(format!("{} has no problem_hash", json_path.display())))?;
    let outcome = evaluate(p, &rec, Some(expected), horizon)?;
    let dir = out.map(Path::to_path_buf).unwrap_or_else(|| csv_path.parent().unwrap_or(Path::new(".")).to_path_buf());
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let text = serde_json::to_string_pretty(&outcome.report).expect("serializable");
    write_file(&dir.join("certify.json"), &(text + "\n"))?;
    Ok(outcome.exit)
}
