//! Problem files: TOML documents describing one fixed-point, root or
//! integral problem, validated into runnable objects before anything runs.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::CliError;
use crate::expr::{coordinate_names, parse_expr, Expr};
use crate::greens::{build_volterra_kernel, expression_kernel, GridFunction, KernelSpec};
use crate::rootfind::{wrap_root_problem, GammaSpec};
use crate::schemes::{InjectionMode, PerturbationPlan, RunConfig, SchemeKind, SchemeTag, StopRule};
use crate::seq::Sequence;
use crate::space::{NormKind, OperatorError, OperatorSpec, Vector};

/// Relaxation used by the custom scheme when the file does not set one.
pub const DEFAULT_RELAXATION: f64 = -0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    FixedPoint,
    Root,
    Integral,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub kind: ProblemKind,
    pub dim: usize,
    #[serde(default)]
    pub norm: NormKind,
    #[serde(default = "default_scheme")]
    pub scheme: SchemeTag,
    /// `beta` of the relaxed custom scheme.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relaxation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub operator: OperatorSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<GammaSpec>,
    #[serde(default)]
    pub perturbation: PerturbationSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constants: Option<ConstantsSection>,
    #[serde(default)]
    pub stop: StopSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integral: Option<IntegralSection>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub certify: Vec<CertifyRequest>,
}

fn default_scheme() -> SchemeTag {
    SchemeTag::Contraction
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorSection {
    /// One expression per coordinate in `x1..xd`.
    pub components: Vec<String>,
    /// Jacobian rows; finite differences are used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derivative: Option<Vec<Vec<String>>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeName {
    #[default]
    None,
    Deterministic,
    Random,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbationSection {
    #[serde(default)]
    pub mode: ModeName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eps: Option<Sequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Sequence>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<Sequence>,
}

/// A constant given as a number or the word `"estimate"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConstValue {
    Value(f64),
    Word(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstantsSection {
    #[serde(rename = "M")]
    pub m: ConstValue,
    #[serde(rename = "K", default = "zero_const")]
    pub k: ConstValue,
    /// Radius of the working ball around `x0` used for estimation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub safety_factor: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
}

fn zero_const() -> ConstValue {
    ConstValue::Value(0.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StopSection {
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub residual_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub guard_radius: Option<f64>,
}

fn default_max_steps() -> usize {
    50
}

impl Default for StopSection {
    fn default() -> Self {
        Self { max_steps: default_max_steps(), r_tol: None, residual_tol: Some(1e-12), guard_radius: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralSection {
    /// `"volterra_unit"` or an expression in `t` and `s`.
    pub kernel: String,
    pub t_end: f64,
    pub m: usize,
    /// Starting function of `t`.
    #[serde(default = "default_initial")]
    pub initial: String,
    /// Exact solution of `t`, for error reporting.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
}

fn default_initial() -> String {
    "0".into()
}

/// Witness constants by name, or `"search"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Witness {
    Word(String),
    Values(BTreeMap<String, f64>),
}

impl Default for Witness {
    fn default() -> Self {
        Witness::Word("search".into())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertifyRequest {
    pub regime: String,
    #[serde(default)]
    pub witness: Witness,
    /// Start the majorant at `r_offset` instead of `r_0`.
    #[serde(default)]
    pub offset: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
}

/// Settings that come from the command line rather than the file.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub inner_tol: Option<f64>,
    pub horizon: Option<usize>,
}

/// Grid data of an integral problem.
#[derive(Clone, Debug)]
pub struct IntegralSetup {
    pub kernel: KernelSpec,
    pub grid: GridFunction,
    pub exact: Option<Expr>,
}

/// A validated problem, ready to run.
#[derive(Clone, Debug)]
pub struct Problem {
    pub file: ProblemFile,
    pub seed: u64,
    /// The fixed-point operator; pointwise `A` for integral problems.
    pub a: OperatorSpec,
    pub x0: Vector,
    pub scheme: SchemeKind,
    pub plan: PerturbationPlan,
    pub stop: StopRule,
    pub config: RunConfig,
    pub integral: Option<IntegralSetup>,
}

impl ProblemFile {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Validation(format!("problem file: {e}")))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("problem files serialize")
    }

    pub fn display_name(&self) -> &str {
        self.name.as_deref().unwrap_or("unnamed")
    }

    pub fn relaxation(&self) -> f64 {
        self.relaxation.unwrap_or(DEFAULT_RELAXATION)
    }
}

fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Validation(msg.into())
}

fn parse_field(text: &str, vars: &[&str], field: &str) -> Result<Expr, CliError> {
    parse_expr(text, vars).map_err(|e| invalid(format!("{field}: {e} in `{text}`")))
}

fn eval_err(e: impl std::fmt::Display) -> OperatorError {
    OperatorError::Eval(e.to_string())
}

fn expression_operator(components: Vec<Expr>, jacobian: Option<Vec<Vec<Expr>>>) -> OperatorSpec {
    let dim = components.len();
    let op = OperatorSpec::new(dim, move |x| {
        let v = components.iter().map(|c| c.eval_slots(x.coords())).collect::<Result<Vec<_>, _>>().map_err(eval_err)?;
        Vector::new(v).map_err(|_| OperatorError::NonFinite { x: x.coords().to_vec() })
    });
    match jacobian {
        None => op,
        Some(rows) => op.with_derivative(move |x, h| {
            let mut m = DMatrix::zeros(dim, dim);
            for (i, row) in rows.iter().enumerate() {
                for (j, e) in row.iter().enumerate() {
                    m[(i, j)] = e.eval_slots(x.coords()).map_err(eval_err)?;
                }
            }
            let y = &m * nalgebra::DVector::from_column_slice(h.coords());
            Vector::new(y.as_slice().to_vec()).map_err(|_| OperatorError::NonFinite { x: x.coords().to_vec() })
        }),
    }
}

fn check_positive(v: Option<f64>, field: &str) -> Result<(), CliError> {
    match v {
        Some(x) if !(x > 0.0 && x.is_finite()) => Err(invalid(format!("{field} = {x} must be positive and finite"))),
        _ => Ok(()),
    }
}

impl Problem {
    pub fn build(file: ProblemFile, ov: Overrides) -> Result<Self, CliError> {
        let f = &file;
        if f.dim == 0 {
            return Err(invalid("dim must be at least 1"));
        }
        let names = coordinate_names(f.dim);
        let vars: Vec<&str> = names.iter().map(String::as_str).collect();
        if f.operator.components.len() != f.dim {
            return Err(invalid(format!(
                "operator.components has {} entries but dim = {}",
                f.operator.components.len(),
                f.dim
            )));
        }
        let components = f
            .operator
            .components
            .iter()
            .enumerate()
            .map(|(i, c)| parse_field(c, &vars, &format!("operator.components[{i}]")))
            .collect::<Result<Vec<_>, _>>()?;
        let jacobian = match &f.operator.derivative {
            None => None,
            Some(rows) => {
                if rows.len() != f.dim || rows.iter().any(|r| r.len() != f.dim) {
                    return Err(invalid(format!("operator.derivative must be a {0} x {0} array", f.dim)));
                }
                let mut out = Vec::new();
                for (i, row) in rows.iter().enumerate() {
                    let parsed = row
                        .iter()
                        .enumerate()
                        .map(|(j, e)| parse_field(e, &vars, &format!("operator.derivative[{i}][{j}]")))
                        .collect::<Result<Vec<_>, _>>()?;
                    out.push(parsed);
                }
                Some(out)
            }
        };
        let base = expression_operator(components, jacobian);

        let a = match f.kind {
            ProblemKind::Root => {
                let g = f.gamma.ok_or_else(|| invalid("kind = \"root\" needs a [gamma] block"))?;
                wrap_root_problem(&base, g).map_err(|e| invalid(format!("gamma: {e}")))?
            }
            _ => {
                if f.gamma.is_some() {
                    return Err(invalid("[gamma] is only meaningful for kind = \"root\""));
                }
                base
            }
        };

        let seed = ov.seed.or(f.seed).unwrap_or(0);
        let plan = build_plan(&f.perturbation, seed)?;
        plan.validate().map_err(|e| invalid(format!("perturbation: {e}")))?;
        if f.scheme == SchemeTag::Newton && plan.gamma_seq.is_some() {
            return Err(invalid("perturbation.gamma applies to modified_newton, not newton"));
        }
        if f.scheme == SchemeTag::ModifiedNewton && plan.sigma_seq.is_some() {
            return Err(invalid("perturbation.sigma applies to newton, not modified_newton"));
        }
        if let Some(beta) = f.relaxation {
            if f.scheme != SchemeTag::Custom {
                return Err(invalid("relaxation is only used by scheme = \"custom\""));
            }
            if !(beta.abs() < 1.0) {
                return Err(invalid(format!("relaxation = {beta} must satisfy |beta| < 1")));
            }
        }

        let s = &f.stop;
        if s.max_steps == 0 {
            return Err(invalid("stop.max_steps must be at least 1"));
        }
        check_positive(s.r_tol, "stop.r_tol")?;
        check_positive(s.residual_tol, "stop.residual_tol")?;
        check_positive(s.guard_radius, "stop.guard_radius")?;
        let stop = StopRule { max_steps: s.max_steps, r_tol: s.r_tol, residual_tol: s.residual_tol };
        let inner_tol = ov.inner_tol.unwrap_or(RunConfig::default().inner_tol);
        check_positive(Some(inner_tol), "--inner-tol")?;
        let config = RunConfig { norm: f.norm, inner_tol, guard_radius: s.guard_radius, ..RunConfig::default() };

        if let Some(c) = &f.constants {
            for (name, v) in [("M", &c.m), ("K", &c.k)] {
                match v {
                    ConstValue::Value(x) if !(*x >= 0.0 && x.is_finite()) => {
                        return Err(invalid(format!("constants.{name} = {x} must be finite and nonnegative")))
                    }
                    ConstValue::Word(w) if w != "estimate" => {
                        return Err(invalid(format!("constants.{name} = \"{w}\": expected a number or \"estimate\"")))
                    }
                    _ => {}
                }
            }
            check_positive(c.radius, "constants.radius")?;
            check_positive(c.safety_factor, "constants.safety_factor")?;
            if matches!(c.samples, Some(n) if n < 10) {
                return Err(invalid("constants.samples must be at least 10"));
            }
        }
        for (i, req) in f.certify.iter().enumerate() {
            if crate::majorant::Regime::parse(&req.regime).is_none() {
                return Err(invalid(format!(
                    "certify[{i}].regime = \"{}\": expected bounded, uniform_max, sandwich, geometric or quadratic",
                    req.regime
                )));
            }
            if let Witness::Word(w) = &req.witness {
                if w != "search" {
                    return Err(invalid(format!("certify[{i}].witness = \"{w}\": expected \"search\" or a table")));
                }
            }
        }

        let (x0, integral) = match f.kind {
            ProblemKind::Integral => {
                if f.dim != 1 {
                    return Err(invalid("integral problems take a scalar A (dim = 1)"));
                }
                if f.x0.is_some() {
                    return Err(invalid("integral problems start from integral.initial, not x0"));
                }
                if f.scheme != SchemeTag::Contraction {
                    return Err(invalid("integral problems support scheme = \"contraction\" only"));
                }
                let sec =
                    f.integral.as_ref().ok_or_else(|| invalid("kind = \"integral\" needs an [integral] block"))?;
                if !(sec.t_end > 0.0 && sec.t_end.is_finite()) {
                    return Err(invalid(format!("integral.t_end = {} must be positive", sec.t_end)));
                }
                if sec.m < 2 {
                    return Err(invalid("integral.m must be at least 2"));
                }
                let kernel = if sec.kernel == "volterra_unit" {
                    build_volterra_kernel(sec.t_end).map_err(|e| invalid(format!("integral.kernel: {e}")))?
                } else {
                    expression_kernel(&sec.kernel, sec.t_end).map_err(|e| invalid(format!("integral.kernel: {e}")))?
                };
                let init = parse_field(&sec.initial, &["t"], "integral.initial")?;
                let zero =
                    GridFunction::uniform(sec.t_end, sec.m, |_| 0.0).map_err(|e| invalid(format!("integral: {e}")))?;
                let values = zero
                    .nodes()
                    .iter()
                    .map(|&t| init.eval_slots(&[t]).map_err(|e| invalid(format!("integral.initial at t = {t}: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let grid = zero.with_values(values).map_err(|e| invalid(format!("integral.initial: {e}")))?;
                let exact = sec.exact.as_ref().map(|e| parse_field(e, &["t"], "integral.exact")).transpose()?;
                let x0 = Vector::new(grid.values().to_vec()).map_err(|e| invalid(format!("integral.initial: {e}")))?;
                (x0, Some(IntegralSetup { kernel, grid, exact }))
            }
            _ => {
                if f.integral.is_some() {
                    return Err(invalid("[integral] is only meaningful for kind = \"integral\""));
                }
                let x0 = f.x0.as_ref().ok_or_else(|| invalid("x0 is required"))?;
                if x0.len() != f.dim {
                    return Err(invalid(format!("x0 has {} entries but dim = {}", x0.len(), f.dim)));
                }
                (Vector::new(x0.clone()).map_err(|e| invalid(format!("x0: {e}")))?, None)
            }
        };

        let scheme = match f.scheme {
            SchemeTag::Contraction => SchemeKind::Contraction,
            SchemeTag::Newton => SchemeKind::Newton,
            SchemeTag::ModifiedNewton => SchemeKind::ModifiedNewton,
            SchemeTag::Custom => SchemeKind::relaxed(&a, f.relaxation()),
        };
        Ok(Self { file, seed, a, x0, scheme, plan, stop, config, integral })
    }

    /// Hex SHA-256 of the canonical JSON form of the file plus the seed and
    /// inner tolerance, which together determine the trace.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(&self.file).expect("problem files serialize");
        let mut h = Sha256::new();
        h.update(canonical.as_bytes());
        h.update(format!("\nseed={}\ninner_tol={:e}", self.seed, self.config.inner_tol).as_bytes());
        hex::encode(h.finalize())
    }
}

fn build_plan(p: &PerturbationSection, seed: u64) -> Result<PerturbationPlan, CliError> {
    let mode = match p.mode {
        ModeName::None => InjectionMode::None,
        ModeName::Deterministic => InjectionMode::AdditiveDeterministic,
        ModeName::Random => InjectionMode::AdditiveSeededRandom { seed },
    };
    if mode == InjectionMode::None
        && [&p.eps, &p.sigma, &p.gamma].iter().any(|s| s.as_ref().is_some_and(|s| !s.is_zero()))
    {
        return Err(invalid("perturbation sequences are nonzero but mode = \"none\"; choose deterministic or random"));
    }
    Ok(PerturbationPlan {
        eps0: p.eps0,
        eps_seq: p.eps.clone().unwrap_or_default(),
        sigma_seq: p.sigma.clone(),
        gamma_seq: p.gamma.clone(),
        mode,
    })
}
