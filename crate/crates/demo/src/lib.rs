//! Browser bindings for three views of the library: a scalar iteration
//! against its majorant, the majorant recurrence with its certificates, and
//! Picard iteration on the Volterra test equation. Every export returns a
//! JSON string; failures come back as `{"error": "..."}`.

use nkv::greens::{build_volterra_kernel, run_integral_iteration, GridFunction};
use nkv::majorant::{
    cert_bounded, cert_remark1, search_geometric, search_quadratic, search_sandwich, simulate_recurrence,
    theorem_to_recurrence, Certificate,
};
use nkv::schemes::{InjectionMode, RunConfig, SchemeTag};
use nkv::{
    expr::parse_expr, MajorantParams, OperatorSpec, PerturbationPlan, ProblemConstants, SchemeKind, Sequence, StopRule,
    Vector,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

fn finish(result: Result<Value, String>) -> String {
    result.unwrap_or_else(|e| json!({ "error": e })).to_string()
}

/// Finite values only; JSON has no infinity.
fn finite(v: &[f64]) -> Vec<Option<f64>> {
    v.iter().map(|x| x.is_finite().then_some(*x)).collect()
}

fn scalar_operator(text: &str) -> Result<OperatorSpec, String> {
    let e = parse_expr(text, &["x"]).map_err(|e| e.to_string())?;
    Ok(OperatorSpec::new(1, move |v| {
        let y = e.eval_slots(v.coords()).map_err(|e| nkv::OperatorError::Eval(e.to_string()))?;
        Vector::new(vec![y]).map_err(|_| nkv::OperatorError::NonFinite { x: v.coords().to_vec() })
    }))
}

fn parse_scheme(name: &str) -> Result<SchemeTag, String> {
    match name {
        "contraction" => Ok(SchemeTag::Contraction),
        "newton" => Ok(SchemeTag::Newton),
        _ => Err(format!("unknown scheme `{name}`; expected contraction or newton")),
    }
}

fn trace_vs_majorant_impl(
    expr: &str,
    scheme: &str,
    x0: f64,
    m: f64,
    k: f64,
    eps: f64,
    steps: usize,
) -> Result<Value, String> {
    let a = scalar_operator(expr)?;
    let tag = parse_scheme(scheme)?;
    let kind = if tag == SchemeTag::Newton { SchemeKind::Newton } else { SchemeKind::Contraction };
    let plan = if eps > 0.0 {
        PerturbationPlan::additive(Sequence::constant(eps), InjectionMode::AdditiveDeterministic)
    } else {
        PerturbationPlan::exact()
    };
    let x0 = Vector::new(vec![x0]).map_err(|e| e.to_string())?;
    let stop = StopRule { max_steps: steps.clamp(1, 200), r_tol: None, residual_tol: Some(1e-15) };
    let t = nkv::schemes::run_outer(&a, &kind, &x0, &plan, &stop, &RunConfig::default()).map_err(|e| e.to_string())?;
    let r0 = t.r.first().copied().unwrap_or(0.0);
    let c = ProblemConstants::for_scheme(tag, m, k, t.residual[0], &plan, 0.0, 200);
    let p = theorem_to_recurrence(&c, tag, r0, 200).map_err(|e| e.to_string())?;
    let sim = simulate_recurrence(&p, t.r.len().saturating_sub(1));
    let bounded = cert_bounded(&p, 200);
    Ok(json!({
        "x": t.iterates.iter().map(|v| v.coords()[0]).collect::<Vec<_>>(),
        "r": t.r,
        "residual": t.residual,
        "majorant": finite(&sim.r),
        "eta": p.eta,
        "lambda0": p.lambda.at(0),
        "rho0": p.rho.at(0),
        "bound": bounded.valid.then(|| bounded.witnesses["C"]),
        "stop": t.stop.to_string(),
    }))
}

/// Iterates `x = f(x)` with the given scheme and returns the step sizes
/// next to the simulated majorant built from `M`, `K` and `eps`.
#[wasm_bindgen]
pub fn trace_vs_majorant(expr: &str, scheme: &str, x0: f64, m: f64, k: f64, eps: f64, steps: usize) -> String {
    finish(trace_vs_majorant_impl(expr, scheme, x0, m, k, eps, steps))
}

fn cert_json(c: &Certificate) -> Value {
    json!({
        "regime": c.regime.name(),
        "valid": c.valid,
        "reason": c.reason,
        "witnesses": c.witnesses.iter().map(|(k, v)| (k.clone(), json!(v.is_finite().then_some(*v)))).collect::<serde_json::Map<_, _>>(),
        "lower": finite(&c.lower),
        "upper": finite(&c.upper),
    })
}

fn majorant_explorer_impl(
    eta: f64,
    lambda: f64,
    q_lambda: f64,
    rho: f64,
    q_rho: f64,
    r0: f64,
    horizon: usize,
) -> Result<Value, String> {
    let horizon = horizon.clamp(1, 200);
    let p = MajorantParams::new(eta, Sequence::geometric(lambda, q_lambda), Sequence::geometric(rho, q_rho), r0);
    p.validate(horizon).map_err(|e| e.to_string())?;
    let sim = simulate_recurrence(&p, horizon);
    let mut certs = vec![cert_bounded(&p, horizon), cert_remark1(&p, horizon)];
    certs.extend(
        [search_sandwich(&p, horizon), search_geometric(&p, horizon), search_quadratic(&p, horizon.min(12))]
            .into_iter()
            .flatten(),
    );
    Ok(json!({
        "r": sim.r,
        "diverged_at": sim.diverged_at,
        "certificates": certs.iter().map(cert_json).collect::<Vec<_>>(),
    }))
}

/// Simulates `r_n = eta r_{n-1}^2 + lambda q_l^{n-1} r_{n-1} + rho q_r^{n-1}`
/// and tries every certificate on it.
#[wasm_bindgen]
pub fn majorant_explorer(
    eta: f64,
    lambda: f64,
    q_lambda: f64,
    rho: f64,
    q_rho: f64,
    r0: f64,
    horizon: usize,
) -> String {
    finish(majorant_explorer_impl(eta, lambda, q_lambda, rho, q_rho, r0, horizon))
}

fn volterra_picard_impl(m: usize, t_end: f64) -> Result<Value, String> {
    if !(2..=2000).contains(&m) {
        return Err(format!("grid size {m} outside 2..=2000"));
    }
    let kernel = build_volterra_kernel(t_end).map_err(|e| e.to_string())?;
    let grid = GridFunction::uniform(t_end, m, |_| 0.0).map_err(|e| e.to_string())?;
    let a = OperatorSpec::from_fn(1, |x: &[f64]| vec![x[0] + 1.0]);
    let stop = StopRule { max_steps: 80, r_tol: Some(1e-13), residual_tol: None };
    let t = run_integral_iteration(
        &kernel,
        &a,
        &SchemeKind::Contraction,
        &grid,
        &PerturbationPlan::exact(),
        &stop,
        &RunConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    let exact: Vec<f64> = grid.nodes().iter().map(|t| t.exp() - 1.0).collect();
    let err = |v: &Vector| v.coords().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    // a handful of early iterates, enough to watch the factorial phase
    let shown: Vec<Vec<f64>> = t.iterates.iter().take(8).map(|v| v.coords().to_vec()).collect();
    Ok(json!({
        "t": grid.nodes(),
        "exact": exact,
        "iterates": shown,
        "r": t.r,
        "error": t.iterates.iter().map(err).collect::<Vec<_>>(),
        "steps": t.steps(),
        "stop": t.stop.to_string(),
    }))
}

/// Picard iteration for `x(t) = int_0^t (x(s) + 1) ds` on `[0, t_end]`.
#[wasm_bindgen]
pub fn volterra_picard(m: usize, t_end: f64) -> String {
    finish(volterra_picard_impl(m, t_end))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn majorant_dominates_cos_iteration() {
        let v = parse(trace_vs_majorant("cos(x)", "contraction", 1.0, 1f64.sin(), 0.0, 0.0, 30));
        let r = v["r"].as_array().unwrap();
        let maj = v["majorant"].as_array().unwrap();
        assert!(r.len() >= 20);
        for (a, b) in r.iter().zip(maj) {
            assert!(a.as_f64().unwrap() <= b.as_f64().unwrap() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn errors_are_reported_as_json() {
        assert!(parse(trace_vs_majorant("cos(", "newton", 1.0, 0.5, 1.0, 0.0, 10))["error"].is_string());
        assert!(parse(trace_vs_majorant("x", "secant", 1.0, 0.5, 1.0, 0.0, 10))["error"].is_string());
        assert!(parse(volterra_picard(1, 2.0))["error"].is_string());
    }

    #[test]
    fn explorer_certifies_quadratic_case() {
        let v = parse(majorant_explorer(1.0, 0.0, 0.5, 0.0, 0.5, 0.5, 10));
        let certs = v["certificates"].as_array().unwrap();
        let quad = certs.iter().find(|c| c["regime"] == "quadratic").unwrap();
        assert_eq!(quad["valid"], true);
        assert_eq!(v["r"][2].as_f64(), Some(0.0625));
    }

    #[test]
    fn volterra_converges() {
        let v = parse(volterra_picard(200, 2.0));
        let err = v["error"].as_array().unwrap().last().unwrap().as_f64().unwrap();
        assert!(err < 2e-4, "{err}");
    }
}
