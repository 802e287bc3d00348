//! The generalized iteration `x_n = B_{n-1}(x_n)` in four concrete schemes:
//!
//! * contraction: `B_{n-1}(x) = A(x_{n-1})`;
//! * modified Newton: `B_{n-1}(x) = A'(x_0) x - A'(x_0) x_{n-1} + A(x_{n-1})`;
//! * Newton: `B_{n-1}(x) = A'(x_{n-1}) x - A'(x_{n-1}) x_{n-1} + A(x_{n-1})`;
//! * custom: a caller-supplied factory producing `B_{n-1}` from
//!   `(n, x_{n-1}, x_0)`, solved by inner fixed-point iteration.
//!
//! The affine inner equations of the Newton variants are solved directly.

pub mod audit;
pub mod perturb;

use std::fmt;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg;
use crate::space::{NormKind, OperatorError, OperatorSpec, Vector};

pub use audit::{audit_theorem, AuditRow, TheoremAudit};
pub use perturb::{InjectionMode, Injector, PerturbationPlan};

pub const DEFAULT_INNER_TOL: f64 = 1e-12;
pub const DEFAULT_MAX_INNER: usize = 10_000;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SchemeError {
    #[error("step {step}: {source}")]
    Operator { step: usize, source: OperatorError },
    #[error("step {step}: I - B' is singular (pivot {pivot:e}); the scheme's preconditions fail")]
    Singular { step: usize, pivot: f64 },
    #[error("step {step}: inner iteration diverged after {iterations} iterations (distance {distance:e})")]
    InnerDivergence { step: usize, iterations: usize, distance: f64 },
    #[error("step {step}: inner defect {defect:e} exceeds tolerance {tol:e}")]
    InnerTolerance { step: usize, defect: f64, tol: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
}

impl SchemeError {
    fn op(step: usize) -> impl FnOnce(OperatorError) -> SchemeError {
        move |source| SchemeError::Operator { step, source }
    }
}

/// Builds `B_{n-1}` from `(n, x_{n-1}, x_0)`.
pub type CustomFactory = Arc<dyn Fn(usize, &Vector, &Vector) -> Result<OperatorSpec, OperatorError> + Send + Sync>;

#[derive(Clone)]
pub enum SchemeKind {
    Contraction,
    ModifiedNewton,
    Newton,
    Custom(CustomFactory),
}

impl fmt::Debug for SchemeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.tag())
    }
}

/// Scheme identity without the custom factory.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemeTag {
    Contraction,
    ModifiedNewton,
    Newton,
    Custom,
}

impl SchemeKind {
    pub fn tag(&self) -> SchemeTag {
        match self {
            SchemeKind::Contraction => SchemeTag::Contraction,
            SchemeKind::ModifiedNewton => SchemeTag::ModifiedNewton,
            SchemeKind::Newton => SchemeTag::Newton,
            SchemeKind::Custom(_) => SchemeTag::Custom,
        }
    }

    pub fn custom<F>(factory: F) -> Self
    where
        F: Fn(usize, &Vector, &Vector) -> Result<OperatorSpec, OperatorError> + Send + Sync + 'static,
    {
        SchemeKind::Custom(Arc::new(factory))
    }

    /// Relaxed Picard step `B_{n-1}(x) = A(x_{n-1}) + beta (x - x_{n-1})`.
    /// Each `B_{n-1}` matches `A` at `x_{n-1}` and has Lipschitz constant
    /// `|beta|`; its fixed point is `x_{n-1} + (A(x_{n-1}) - x_{n-1}) / (1 - beta)`.
    pub fn relaxed(a: &OperatorSpec, beta: f64) -> Self {
        let a = a.clone();
        SchemeKind::custom(move |_n, x_prev, _x0| {
            let anchor = a.eval(x_prev)?;
            let base = x_prev.clone();
            Ok(OperatorSpec::new(anchor.dim(), move |x| Ok(anchor.axpy(beta, &(x - &base))))
                .with_lipschitz(Some(beta.abs()), Some(0.0)))
        })
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SchemeTag::Contraction => "contraction",
            SchemeTag::ModifiedNewton => "modified_newton",
            SchemeTag::Newton => "newton",
            SchemeTag::Custom => "custom",
        };
        f.write_str(s)
    }
}

/// Result of one outer step producing `x_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct StepOutput {
    pub x: Vector,
    /// `|B_{n-1}(x_n) - x_n|` for the map actually used.
    pub inner_defect: f64,
    /// Norm of the additive perturbation injected into `B_{n-1}`.
    pub injected: f64,
    /// Operator norm of the derivative perturbation injected into `B_{n-1}`.
    pub injected_derivative: f64,
    /// Lipschitz constant of `B_{n-1}`, when known.
    pub b_lipschitz: Option<f64>,
}

/// `x_n = A(x_{n-1}) + delta_{n-1}`.
pub fn step_contraction(
    a: &OperatorSpec,
    x_prev: &Vector,
    inj: &mut Injector,
    n: usize,
) -> Result<StepOutput, SchemeError> {
    let ax = a.eval(x_prev).map_err(SchemeError::op(n))?;
    let residual = &ax - x_prev;
    let delta = inj.additive(n - 1, a.dim(), &residual);
    let injected = delta.as_ref().map_or(0.0, |d| d.norm(inj.norm()));
    let x = match &delta {
        Some(d) => &ax + d,
        None => ax,
    };
    Ok(StepOutput { x, inner_defect: 0.0, injected, injected_derivative: 0.0, b_lipschitz: Some(0.0) })
}

/// Solves `x = a + J (x - x_prev)` for the affine map of a Newton-type step.
fn affine_step(
    jac: &DMatrix<f64>,
    anchor: &Vector,
    x_prev: &Vector,
    norm: NormKind,
    n: usize,
    inner_tol: f64,
) -> Result<(Vector, f64), SchemeError> {
    let d = x_prev.dim();
    let lhs = DMatrix::<f64>::identity(d, d) - jac;
    let rhs = anchor - x_prev;
    let z = linalg::solve(&lhs, rhs.coords()).map_err(|e| SchemeError::Singular { step: n, pivot: e.pivot })?;
    let z = Vector::from_raw(z);
    let x = x_prev + &z;
    // defect of the affine map at the returned point
    let jz = jac * DVector::from_column_slice(z.coords());
    let bx = anchor.axpy(1.0, &Vector::from_raw(jz.as_slice().to_vec()));
    let defect = (&bx - &x).norm(norm);
    if !(defect <= inner_tol) {
        return Err(SchemeError::InnerTolerance { step: n, defect, tol: inner_tol });
    }
    Ok((x, defect))
}

/// Newton-Kantorovich step with `sigma`-type derivative perturbation.
pub fn step_newton(
    a: &OperatorSpec,
    x_prev: &Vector,
    inj: &mut Injector,
    n: usize,
    inner_tol: f64,
) -> Result<StepOutput, SchemeError> {
    let norm = inj.norm();
    let ax = a.eval(x_prev).map_err(SchemeError::op(n))?;
    let residual = &ax - x_prev;
    let mut jac = a.jacobian(x_prev).map_err(SchemeError::op(n))?;
    let sigma = inj.plan().sigma(n - 1);
    let dj = inj.rank_one(sigma, a.dim(), &residual);
    let injected_derivative = dj.as_ref().map_or(0.0, |m| norm.matrix_norm(m));
    if let Some(m) = dj {
        jac += m;
    }
    let delta = inj.additive(n - 1, a.dim(), &residual);
    let injected = delta.as_ref().map_or(0.0, |d| d.norm(norm));
    let anchor = match &delta {
        Some(d) => &ax + d,
        None => ax,
    };
    let (x, inner_defect) = affine_step(&jac, &anchor, x_prev, norm, n, inner_tol)?;
    Ok(StepOutput { x, inner_defect, injected, injected_derivative, b_lipschitz: Some(norm.matrix_norm(&jac)) })
}

/// Modified Newton step: derivative frozen at `x_0`, with `gamma`-type
/// perturbation of the frozen derivative.
pub fn step_modified_newton(
    a: &OperatorSpec,
    x_prev: &Vector,
    x0: &Vector,
    inj: &mut Injector,
    n: usize,
    inner_tol: f64,
) -> Result<StepOutput, SchemeError> {
    let frozen = a.jacobian(x0).map_err(SchemeError::op(n))?;
    step_modified_newton_frozen(a, &frozen, x_prev, inj, n, inner_tol)
}

fn step_modified_newton_frozen(
    a: &OperatorSpec,
    frozen: &DMatrix<f64>,
    x_prev: &Vector,
    inj: &mut Injector,
    n: usize,
    inner_tol: f64,
) -> Result<StepOutput, SchemeError> {
    let norm = inj.norm();
    let ax = a.eval(x_prev).map_err(SchemeError::op(n))?;
    let residual = &ax - x_prev;
    let mut jac = frozen.clone();
    let gamma = inj.plan().gamma(n - 1);
    let dj = inj.rank_one(gamma, a.dim(), &residual);
    let injected_derivative = dj.as_ref().map_or(0.0, |m| norm.matrix_norm(m));
    if let Some(m) = dj {
        jac += m;
    }
    let delta = inj.additive(n - 1, a.dim(), &residual);
    let injected = delta.as_ref().map_or(0.0, |d| d.norm(norm));
    let anchor = match &delta {
        Some(d) => &ax + d,
        None => ax,
    };
    let (x, inner_defect) = affine_step(&jac, &anchor, x_prev, norm, n, inner_tol)?;
    Ok(StepOutput { x, inner_defect, injected, injected_derivative, b_lipschitz: Some(norm.matrix_norm(&jac)) })
}

/// Inner fixed-point iteration `y <- B(y)` from `y = x_prev` until
/// `|B(y) - y| <= inner_tol`. Fails when `max_inner` is exceeded or `y`
/// leaves the ball of radius `radius` around `x_prev`.
pub fn step_custom(
    b: &OperatorSpec,
    x_prev: &Vector,
    norm: NormKind,
    inner_tol: f64,
    max_inner: usize,
    radius: f64,
    n: usize,
) -> Result<(Vector, f64), SchemeError> {
    // one application first, so a small outer residual cannot freeze x
    let mut y = b.eval(x_prev).map_err(SchemeError::op(n))?;
    for it in 0..=max_inner {
        let by = b.eval(&y).map_err(SchemeError::op(n))?;
        let defect = (&by - &y).norm(norm);
        if defect <= inner_tol {
            return Ok((y, defect));
        }
        if it == max_inner {
            break;
        }
        let distance = (&by - x_prev).norm(norm);
        if !(distance <= radius) {
            return Err(SchemeError::InnerDivergence { step: n, iterations: it + 1, distance });
        }
        y = by;
    }
    let distance = (&y - x_prev).norm(norm);
    Err(SchemeError::InnerDivergence { step: n, iterations: max_inner, distance })
}

/// Stopping rule of an outer run. Disabled tolerances are `None`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StopRule {
    pub max_steps: usize,
    #[serde(default)]
    pub r_tol: Option<f64>,
    #[serde(default)]
    pub residual_tol: Option<f64>,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { max_steps: 50, r_tol: None, residual_tol: Some(1e-12) }
    }
}

impl StopRule {
    pub fn steps(max_steps: usize) -> Self {
        Self { max_steps, r_tol: None, residual_tol: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RunConfig {
    pub norm: NormKind,
    pub inner_tol: f64,
    pub max_inner: usize,
    /// Divergence guard radius around `x_0`; defaults to `1e6 (1 + |x_0|)`.
    pub guard_radius: Option<f64>,
    /// Stop with [`StopReason::NonContraction`] after this many consecutive
    /// steps with `r_n >= r_{n-1} > 0`, up to rounding.
    pub stall_window: Option<usize>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            norm: NormKind::Sup,
            inner_tol: DEFAULT_INNER_TOL,
            max_inner: DEFAULT_MAX_INNER,
            guard_radius: None,
            stall_window: None,
        }
    }
}

impl RunConfig {
    pub fn with_norm(norm: NormKind) -> Self {
        Self { norm, ..Self::default() }
    }

    pub fn radius_for(&self, x0: &Vector) -> f64 {
        self.guard_radius.unwrap_or_else(|| 1e6 * (1.0 + x0.norm(self.norm)))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "reason", rename_all = "snake_case")]
pub enum StopReason {
    StepTolerance { n: usize },
    ResidualTolerance { n: usize },
    MaxSteps,
    Diverged { n: usize, distance: f64, radius: f64 },
    NonContraction { n: usize, window: usize },
}

impl StopReason {
    pub fn converged(&self) -> bool {
        matches!(self, StopReason::StepTolerance { .. } | StopReason::ResidualTolerance { .. })
    }

    pub fn diverged(&self) -> bool {
        matches!(self, StopReason::Diverged { .. } | StopReason::NonContraction { .. })
    }
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StopReason::StepTolerance { n } => write!(f, "step tolerance reached at n = {n}"),
            StopReason::ResidualTolerance { n } => write!(f, "residual tolerance reached at n = {n}"),
            StopReason::MaxSteps => write!(f, "maximum number of steps"),
            StopReason::Diverged { n, distance, radius } => {
                write!(f, "divergence guard at n = {n}: |x_n - x_0| = {distance:e} > {radius:e}")
            }
            StopReason::NonContraction { n, window } => {
                write!(f, "non-contraction at n = {n}: r did not decrease for {window} consecutive steps")
            }
        }
    }
}

/// Full record of an outer run.
///
/// Indexing: `iterates`, `r_tilde`, `residual`, `inner_defect` run over
/// `n = 0..=N`; `r`, `r_partial` over `n = 0..N` with `r_n = |x_{n+1} - x_n|`;
/// `injected`, `injected_derivative`, `b_lipschitz` over `k = 0..N` and
/// describe `B_k`, the map used to produce `x_{k+1}`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct IterationTrace {
    pub norm: NormKind,
    pub iterates: Vec<Vector>,
    pub r: Vec<f64>,
    pub r_partial: Vec<f64>,
    pub r_tilde: Vec<f64>,
    pub residual: Vec<f64>,
    pub inner_defect: Vec<f64>,
    pub injected: Vec<f64>,
    pub injected_derivative: Vec<f64>,
    pub b_lipschitz: Vec<Option<f64>>,
    pub stop: StopReason,
}

impl IterationTrace {
    pub fn steps(&self) -> usize {
        self.iterates.len() - 1
    }

    pub fn last(&self) -> &Vector {
        self.iterates.last().expect("trace holds x_0")
    }

    pub fn final_residual(&self) -> f64 {
        *self.residual.last().expect("trace holds x_0")
    }
}

/// Runs `x_n = B_{n-1}(x_n)` until the stopping rule fires, the divergence
/// guard trips, or a step fails.
pub fn run_outer(
    a: &OperatorSpec,
    scheme: &SchemeKind,
    x0: &Vector,
    plan: &PerturbationPlan,
    stop: &StopRule,
    config: &RunConfig,
) -> Result<IterationTrace, SchemeError> {
    if x0.dim() != a.dim() {
        return Err(SchemeError::Config(format!("x0 has dimension {} but the operator has {}", x0.dim(), a.dim())));
    }
    plan.validate().map_err(SchemeError::Config)?;
    if !(config.inner_tol > 0.0) {
        return Err(SchemeError::Config("inner tolerance must be positive".into()));
    }
    let norm = config.norm;
    let radius = config.radius_for(x0);
    let mut inj = Injector::new(plan, norm);
    let frozen = match scheme {
        SchemeKind::ModifiedNewton => Some(a.jacobian(x0).map_err(SchemeError::op(1))?),
        _ => None,
    };

    let res0 = (&a.eval(x0).map_err(SchemeError::op(0))? - x0).norm(norm);
    let mut trace = IterationTrace {
        norm,
        iterates: vec![x0.clone()],
        r: Vec::new(),
        r_partial: Vec::new(),
        r_tilde: vec![0.0],
        residual: vec![res0],
        inner_defect: vec![0.0],
        injected: Vec::new(),
        injected_derivative: Vec::new(),
        b_lipschitz: Vec::new(),
        stop: StopReason::MaxSteps,
    };
    if stop.residual_tol.is_some_and(|tol| res0 <= tol) {
        trace.stop = StopReason::ResidualTolerance { n: 0 };
        return Ok(trace);
    }

    let mut stalled = 0usize;
    for n in 1..=stop.max_steps {
        let x_prev = trace.iterates.last().expect("nonempty").clone();
        let out = match scheme {
            SchemeKind::Contraction => step_contraction(a, &x_prev, &mut inj, n)?,
            SchemeKind::Newton => step_newton(a, &x_prev, &mut inj, n, config.inner_tol)?,
            SchemeKind::ModifiedNewton => step_modified_newton_frozen(
                a,
                frozen.as_ref().expect("frozen derivative"),
                &x_prev,
                &mut inj,
                n,
                config.inner_tol,
            )?,
            SchemeKind::Custom(factory) => {
                let b = factory(n, &x_prev, x0).map_err(SchemeError::op(n))?;
                let ax = a.eval(&x_prev).map_err(SchemeError::op(n))?;
                let delta = inj.additive(n - 1, a.dim(), &(&ax - &x_prev));
                let injected = delta.as_ref().map_or(0.0, |d| d.norm(norm));
                let b_lip = b.lipschitz_m;
                let b = match delta {
                    Some(d) => {
                        let inner = b.clone();
                        OperatorSpec::new(b.dim(), move |y| Ok(&inner.eval(y)? + &d))
                            .with_lipschitz(b.lipschitz_m, b.lipschitz_k)
                    }
                    None => b,
                };
                let (x, inner_defect) = step_custom(&b, &x_prev, norm, config.inner_tol, config.max_inner, radius, n)?;
                StepOutput { x, inner_defect, injected, injected_derivative: 0.0, b_lipschitz: b_lip }
            }
        };

        let dist0 = (&out.x - x0).norm(norm);
        if !out.x.is_finite() || !(dist0 <= radius) {
            trace.stop = StopReason::Diverged { n, distance: dist0, radius };
            return Ok(trace);
        }
        let step = &out.x - &x_prev;
        inj.observe_step(&step);
        let r = step.norm(norm);
        let partial = trace.r_partial.last().copied().unwrap_or(0.0) + r;
        let residual = (&a.eval(&out.x).map_err(SchemeError::op(n))? - &out.x).norm(norm);

        trace.r.push(r);
        trace.r_partial.push(partial);
        trace.r_tilde.push(dist0);
        trace.residual.push(residual);
        trace.inner_defect.push(out.inner_defect);
        trace.injected.push(out.injected);
        trace.injected_derivative.push(out.injected_derivative);
        trace.b_lipschitz.push(out.b_lipschitz);
        trace.iterates.push(out.x);

        if stop.r_tol.is_some_and(|tol| r <= tol) {
            trace.stop = StopReason::StepTolerance { n };
            return Ok(trace);
        }
        if stop.residual_tol.is_some_and(|tol| residual <= tol) {
            trace.stop = StopReason::ResidualTolerance { n };
            return Ok(trace);
        }
        if let Some(window) = config.stall_window {
            let len = trace.r.len();
            let grew = len >= 2 && trace.r[len - 2] > 0.0 && trace.r[len - 1] >= trace.r[len - 2] * (1.0 - 1e-9);
            stalled = if grew { stalled + 1 } else { 0 };
            if stalled >= window {
                trace.stop = StopReason::NonContraction { n, window };
                return Ok(trace);
            }
        }
    }
    Ok(trace)
}
