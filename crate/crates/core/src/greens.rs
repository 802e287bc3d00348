//! Integral reformulation `x(t) = int_0^T G(t, s) A(x(s)) ds` on a 1-D
//! grid, its Picard iteration, and the pointwise check of the propagated
//! step bound
//! `r_n(t) <= int |G(t, s)| (M_n r_n(s) + (M + M_{n-1}) r_{n-1}(s) + eps_{n-1} + eps_n) ds`.

use std::fmt;

use thiserror::Error;

use crate::expr::{parse_expr, Expr, ExprError};
use crate::majorant::ProblemConstants;
use crate::schemes::{
    run_outer, IterationTrace, PerturbationPlan, RunConfig, SchemeError, SchemeKind, SchemeTag, StopRule,
};
use crate::space::{NormKind, OperatorError, OperatorSpec, Vector};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GreensError {
    #[error("a grid needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("grid nodes must be strictly increasing (t_{index} = {value})")]
    NotIncreasing { index: usize, value: f64 },
    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("interval end {0} must be positive and finite")]
    BadInterval(f64),
    #[error("grid mismatch: {0}")]
    Mismatch(String),
    #[error("kernel evaluation failed at (t, s) = ({t}, {s}): {source}")]
    Kernel { t: f64, s: f64, source: ExprError },
    #[error("operator evaluation failed at t = {t}: {source}")]
    Operator { t: f64, source: OperatorError },
    #[error("the pointwise operator must be scalar, got dimension {0}")]
    NotScalar(usize),
    #[error("only the contraction scheme is available for integral problems, got {0}")]
    UnsupportedScheme(SchemeTag),
    #[error(transparent)]
    Scheme(#[from] SchemeError),
}

/// Scalar function sampled on a grid `0 = t_0 < ... < t_m = T`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    nodes: Vec<f64>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(nodes: Vec<f64>, values: Vec<f64>) -> Result<Self, GreensError> {
        if nodes.len() < 2 {
            return Err(GreensError::TooFewNodes(nodes.len()));
        }
        if nodes.len() != values.len() {
            return Err(GreensError::Mismatch(format!("{} nodes but {} values", nodes.len(), values.len())));
        }
        for (i, w) in nodes.windows(2).enumerate() {
            if !(w[1] > w[0]) {
                return Err(GreensError::NotIncreasing { index: i + 1, value: w[1] });
            }
        }
        if let Some((index, value)) = nodes.iter().chain(&values).copied().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(GreensError::NonFinite { index: index % nodes.len(), value });
        }
        Ok(Self { nodes, values })
    }

    /// Uniform grid with `m` intervals on `[0, t_end]`, sampling `f`.
    pub fn uniform(t_end: f64, m: usize, f: impl Fn(f64) -> f64) -> Result<Self, GreensError> {
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(GreensError::BadInterval(t_end));
        }
        if m < 1 {
            return Err(GreensError::TooFewNodes(m + 1));
        }
        let nodes: Vec<f64> = (0..=m).map(|i| t_end * i as f64 / m as f64).collect();
        let values = nodes.iter().map(|t| f(*t)).collect();
        Self::new(nodes, values)
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Number of intervals.
    pub fn intervals(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self, GreensError> {
        Self::new(self.nodes.clone(), values)
    }

    pub fn sup_distance(&self, other: &GridFunction) -> f64 {
        self.values.iter().zip(&other.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
    }

    fn is_uniform(&self) -> bool {
        let h = self.nodes[1] - self.nodes[0];
        self.nodes.windows(2).all(|w| ((w[1] - w[0]) - h).abs() <= 1e-12 * h.max(1.0))
    }

    /// `node,value` lines with full precision.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("node,value\n");
        for (t, v) in self.nodes.iter().zip(&self.values) {
            out.push_str(&format!("{t:.16e},{v:.16e}\n"));
        }
        out
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum KernelKind {
    /// `G(t, s) = 1` for `s <= t`, else `0`: the Green's function of `d/dt`
    /// with `x(0) = 0`.
    VolterraUnit,
    /// `G(t, s)` given as an expression in `t`, `s`.
    Expression(Expr),
}

#[derive(Clone, Debug, PartialEq)]
pub struct KernelSpec {
    pub kind: KernelKind,
    pub t_end: f64,
}

impl fmt::Display for KernelSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            KernelKind::VolterraUnit => write!(f, "volterra_unit on [0, {}]", self.t_end),
            KernelKind::Expression(e) => write!(f, "G(t, s) = {e} on [0, {}]", self.t_end),
        }
    }
}

pub fn build_volterra_kernel(t_end: f64) -> Result<KernelSpec, GreensError> {
    if !(t_end > 0.0 && t_end.is_finite()) {
        return Err(GreensError::BadInterval(t_end));
    }
    Ok(KernelSpec { kind: KernelKind::VolterraUnit, t_end })
}

/// Kernel from an expression in the variables `t` and `s`.
pub fn expression_kernel(text: &str, t_end: f64) -> Result<KernelSpec, ExprError> {
    let e = parse_expr(text, &["t", "s"])?;
    Ok(KernelSpec { kind: KernelKind::Expression(e), t_end })
}

impl KernelSpec {
    pub fn eval(&self, t: f64, s: f64) -> Result<f64, GreensError> {
        match &self.kind {
            KernelKind::VolterraUnit => Ok(if s <= t { 1.0 } else { 0.0 }),
            KernelKind::Expression(e) => e.eval_slots(&[t, s]).map_err(|source| GreensError::Kernel { t, s, source }),
        }
    }

    pub fn is_volterra(&self) -> bool {
        matches!(self.kind, KernelKind::VolterraUnit)
    }

    fn check_grid(&self, x: &GridFunction) -> Result<(), GreensError> {
        let last = *x.nodes.last().expect("at least two nodes");
        if x.nodes[0] != 0.0 || (last - self.t_end).abs() > 1e-12 * self.t_end.max(1.0) {
            return Err(GreensError::Mismatch(format!(
                "grid spans [{}, {last}] but the kernel lives on [0, {}]",
                x.nodes[0], self.t_end
            )));
        }
        Ok(())
    }

    /// `int_0^T |G(t_i, s)| f(s) ds` at every node by the composite
    /// trapezoid rule (cumulative for the Volterra kernel).
    fn integrate_abs(&self, nodes: &[f64], f: &[f64]) -> Result<Vec<f64>, GreensError> {
        match &self.kind {
            KernelKind::VolterraUnit => Ok(cumulative_trapezoid(nodes, f)),
            KernelKind::Expression(_) => {
                let w = trapezoid_weights(nodes);
                let mut out = Vec::with_capacity(nodes.len());
                for &t in nodes {
                    let mut acc = 0.0;
                    for (j, &s) in nodes.iter().enumerate() {
                        acc += w[j] * self.eval(t, s)?.abs() * f[j];
                    }
                    out.push(acc);
                }
                Ok(out)
            }
        }
    }
}

fn trapezoid_weights(nodes: &[f64]) -> Vec<f64> {
    let m = nodes.len();
    let mut w = vec![0.0; m];
    for j in 0..m - 1 {
        let h = nodes[j + 1] - nodes[j];
        w[j] += 0.5 * h;
        w[j + 1] += 0.5 * h;
    }
    w
}

fn cumulative_trapezoid(nodes: &[f64], f: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(nodes.len());
    let mut acc = 0.0;
    out.push(0.0);
    for j in 1..nodes.len() {
        acc += 0.5 * (nodes[j] - nodes[j - 1]) * (f[j] + f[j - 1]);
        out.push(acc);
    }
    out
}

fn scalar_values(a: &OperatorSpec, x: &GridFunction) -> Result<Vec<f64>, GreensError> {
    if a.dim() != 1 {
        return Err(GreensError::NotScalar(a.dim()));
    }
    x.nodes
        .iter()
        .zip(&x.values)
        .map(|(&t, &v)| {
            a.eval(&Vector::from_raw(vec![v]))
                .map(|y| y.coords()[0])
                .map_err(|source| GreensError::Operator { t, source })
        })
        .collect()
}

/// `(T x)(t_i) = int G(t_i, s) A(x(s)) ds` by composite trapezoid over the
/// grid; for the Volterra kernel only nodes `s <= t_i` contribute.
pub fn apply_integral_operator(
    k: &KernelSpec,
    a: &OperatorSpec,
    x: &GridFunction,
) -> Result<GridFunction, GreensError> {
    k.check_grid(x)?;
    let ax = scalar_values(a, x)?;
    let values = match &k.kind {
        KernelKind::VolterraUnit => cumulative_trapezoid(&x.nodes, &ax),
        KernelKind::Expression(_) => {
            let w = trapezoid_weights(&x.nodes);
            let mut out = Vec::with_capacity(x.nodes.len());
            for &t in &x.nodes {
                let mut acc = 0.0;
                for (j, &s) in x.nodes.iter().enumerate() {
                    acc += w[j] * k.eval(t, s)? * ax[j];
                }
                out.push(acc);
            }
            out
        }
    };
    x.with_values(values)
}

/// Number of consecutive non-decreasing steps after which an integral
/// iteration is stopped as non-contracting.
pub const STALL_WINDOW: usize = 5;

/// The discretized map `x -> T x` on the node values, as an operator of
/// dimension `m + 1`.
pub fn integral_operator(k: &KernelSpec, a: &OperatorSpec, grid: &GridFunction) -> OperatorSpec {
    let (k, a, grid) = (k.clone(), a.clone(), grid.clone());
    OperatorSpec::new(grid.nodes.len(), move |v| {
        let x = grid.with_values(v.coords().to_vec()).map_err(|e| OperatorError::Eval(e.to_string()))?;
        let y = apply_integral_operator(&k, &a, &x).map_err(|e| OperatorError::Eval(e.to_string()))?;
        Ok(Vector::from_raw(y.values))
    })
}

/// Picard iteration `x_n = T x_{n-1}` in the sup norm over the nodes.
pub fn run_integral_iteration(
    k: &KernelSpec,
    a: &OperatorSpec,
    scheme: &SchemeKind,
    x0: &GridFunction,
    plan: &PerturbationPlan,
    stop: &StopRule,
    config: &RunConfig,
) -> Result<IterationTrace, GreensError> {
    if scheme.tag() != SchemeTag::Contraction {
        return Err(GreensError::UnsupportedScheme(scheme.tag()));
    }
    k.check_grid(x0)?;
    let op = integral_operator(k, a, x0);
    let config = RunConfig { norm: NormKind::Sup, stall_window: config.stall_window.or(Some(STALL_WINDOW)), ..*config };
    let start = Vector::from_raw(x0.values.clone());
    Ok(run_outer(&op, scheme, &start, plan, stop, &config)?)
}

/// Pointwise step sizes `|x_{n+1}(t) - x_n(t)|` of an integral trace.
pub fn pointwise_steps(trace: &IterationTrace, grid: &GridFunction) -> Result<Vec<GridFunction>, GreensError> {
    trace
        .iterates
        .windows(2)
        .map(|w| grid.with_values(w[1].coords().iter().zip(w[0].coords()).map(|(a, b)| (a - b).abs()).collect()))
        .collect()
}

/// Result of checking the propagated bound at every node.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    /// `RHS(t_i) - r_n(t_i)`.
    pub margins: Vec<f64>,
    pub min_margin: f64,
    /// Index of the node with the smallest margin.
    pub argmin: usize,
    /// Quadrature slack `C / m^2`.
    pub slack: f64,
    pub slack_constant: f64,
    /// Floating-point floor added by [`BoundReport::allow_roundoff`].
    pub roundoff: f64,
    /// Margin threshold: `passed` iff `min_margin >= -tolerance`.
    pub tolerance: f64,
    pub passed: bool,
}

impl BoundReport {
    /// Widens the threshold by `16 eps_mach value_scale`, the rounding
    /// error of steps taken between iterates of size `value_scale`. Steps
    /// near that floor carry no information about the quadrature.
    pub fn allow_roundoff(mut self, value_scale: f64) -> Self {
        self.tolerance -= self.roundoff;
        self.roundoff = 16.0 * f64::EPSILON * value_scale.abs();
        self.tolerance += self.roundoff;
        self.passed = self.min_margin >= -self.tolerance;
        self
    }
}

/// Checks
/// `r_n(t) <= int |G(t, s)| (M_n r_n(s) + (M + M_{n-1}) r_{n-1}(s) + eps_{n-1} + eps_n) ds`
/// (contraction), or the Newton form with
/// `(K + K_{n-1})/2 r_{n-1}(s)^2 + sigma_{n-1} r_{n-1}(s)` in place of the
/// linear term, at every node.
///
/// The right-hand side uses the trapezoid rule with the endpoint
/// derivative correction `-h^2/12 (f'(b) - f'(a))` on uniform grids, so it
/// approximates the exact integral to higher order than the iteration
/// itself. The margin may therefore dip below zero by the trapezoid error
/// of the iteration, `T^3 max|f''| / (12 m^2)`; twice that is the slack.
pub fn bound_propagate(
    k: &KernelSpec,
    c: &ProblemConstants,
    r_prev: &GridFunction,
    r_cur: &GridFunction,
    scheme: SchemeTag,
    n: usize,
) -> Result<BoundReport, GreensError> {
    if r_prev.nodes != r_cur.nodes {
        return Err(GreensError::Mismatch("r_prev and r_cur live on different grids".into()));
    }
    k.check_grid(r_cur)?;
    let nodes = &r_cur.nodes;
    let m_n = c.m_seq.at(n);
    let m_prev = if n == 0 { 0.0 } else { c.m_seq.at(n - 1) };
    let eps_sum = if n == 0 { c.eps + c.eps_seq.at(0) } else { c.eps_seq.at(n - 1) + c.eps_seq.at(n) };
    let k_prev = if n == 0 { 0.0 } else { c.k_seq.at(n - 1) };
    let sigma = if n == 0 { 0.0 } else { c.sigma_seq.at(n - 1) };
    let integrand: Vec<f64> = r_prev
        .values
        .iter()
        .zip(&r_cur.values)
        .map(|(&rp, &rc)| {
            let carried = match scheme {
                SchemeTag::Newton => 0.5 * (c.k + k_prev) * rp * rp + sigma * rp,
                _ => (c.m + m_prev) * rp,
            };
            m_n * rc + carried + eps_sum
        })
        .collect();

    let plain = k.integrate_abs(nodes, &integrand)?;
    let rhs =
        if r_cur.is_uniform() && nodes.len() >= 3 { endpoint_corrected(k, nodes, &integrand, plain)? } else { plain };
    let slack_constant = slack_constant(k, nodes, &integrand)?;
    let m = r_cur.intervals() as f64;
    let slack = slack_constant / (m * m);
    let margins: Vec<f64> = rhs.iter().zip(&r_cur.values).map(|(r, v)| r - v).collect();
    let (argmin, min_margin) =
        margins
            .iter()
            .copied()
            .enumerate()
            .fold((0, f64::INFINITY), |acc, (i, v)| if v < acc.1 { (i, v) } else { acc });
    let tiny = 1e-12 * r_cur.values.iter().copied().fold(0.0, f64::max) + 1e-300;
    let tolerance = slack + tiny;
    Ok(BoundReport {
        n,
        margins,
        min_margin,
        argmin,
        slack,
        slack_constant,
        roundoff: 0.0,
        tolerance,
        passed: min_margin >= -tolerance,
    })
}

fn one_sided_derivatives(f: &[f64], h: f64) -> Vec<f64> {
    let m = f.len() - 1;
    (0..=m)
        .map(|i| {
            if i == 0 {
                (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
            } else if i == m {
                (3.0 * f[m] - 4.0 * f[m - 1] + f[m - 2]) / (2.0 * h)
            } else {
                (f[i + 1] - f[i - 1]) / (2.0 * h)
            }
        })
        .collect()
}

fn endpoint_corrected(k: &KernelSpec, nodes: &[f64], g: &[f64], plain: Vec<f64>) -> Result<Vec<f64>, GreensError> {
    let h = nodes[1] - nodes[0];
    let c = h * h / 12.0;
    match &k.kind {
        KernelKind::VolterraUnit => {
            let d = one_sided_derivatives(g, h);
            Ok(plain.iter().enumerate().map(|(i, p)| if i == 0 { 0.0 } else { p - c * (d[i] - d[0]) }).collect())
        }
        KernelKind::Expression(_) => {
            let mut out = Vec::with_capacity(nodes.len());
            for (i, &t) in nodes.iter().enumerate() {
                let f: Vec<f64> = nodes.iter().zip(g).map(|(&s, gv)| Ok(k.eval(t, s)?.abs() * gv)).collect::<Result<
                    _,
                    GreensError,
                >>(
                )?;
                let d = one_sided_derivatives(&f, h);
                out.push(plain[i] - c * (d[d.len() - 1] - d[0]));
            }
            Ok(out)
        }
    }
}

/// `2 T^3 max|f''| / 12`, with `f''` from second differences of the
/// integrand (for every row `t_i` of an expression kernel).
fn slack_constant(k: &KernelSpec, nodes: &[f64], g: &[f64]) -> Result<f64, GreensError> {
    let t_end = k.t_end;
    let second = |f: &[f64]| -> f64 {
        (1..f.len() - 1)
            .map(|j| {
                let (h0, h1) = (nodes[j] - nodes[j - 1], nodes[j + 1] - nodes[j]);
                let d = 2.0 * ((f[j + 1] - f[j]) / h1 - (f[j] - f[j - 1]) / h0) / (h0 + h1);
                d.abs()
            })
            .fold(0.0, f64::max)
    };
    let f2 = match &k.kind {
        KernelKind::VolterraUnit => second(g),
        KernelKind::Expression(_) => {
            let mut best = 0.0f64;
            for &t in nodes {
                let f: Vec<f64> = nodes.iter().zip(g).map(|(&s, gv)| Ok(k.eval(t, s)?.abs() * gv)).collect::<Result<
                    _,
                    GreensError,
                >>(
                )?;
                best = best.max(second(&f));
            }
            best
        }
    };
    Ok(2.0 * t_end.powi(3) * f2 / 12.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::StopReason;

    fn affine(slope: f64, offset: f64) -> OperatorSpec {
        OperatorSpec::from_fn(1, move |x| vec![slope * x[0] + offset])
    }

    fn zero(t_end: f64, m: usize) -> GridFunction {
        GridFunction::uniform(t_end, m, |_| 0.0).unwrap()
    }

    #[test]
    fn volterra_kernel_values() {
        let k = build_volterra_kernel(1.0).unwrap();
        assert_eq!(k.eval(0.5, 0.2).unwrap(), 1.0);
        assert_eq!(k.eval(0.2, 0.5).unwrap(), 0.0);
        assert!(build_volterra_kernel(0.0).is_err());
    }

    #[test]
    fn integrating_constants_and_first_picard_iterate() {
        let k = build_volterra_kernel(1.0).unwrap();
        let x = zero(1.0, 100);
        for a in [affine(0.0, 1.0), affine(1.0, 1.0)] {
            let y = apply_integral_operator(&k, &a, &x).unwrap();
            for (t, v) in y.nodes().iter().zip(y.values()) {
                assert!((t - v).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn eight_picard_iterates_match_taylor_sums() {
        let k = build_volterra_kernel(1.0).unwrap();
        let a = affine(1.0, 1.0);
        let mut x = zero(1.0, 200);
        for _ in 0..8 {
            x = apply_integral_operator(&k, &a, &x).unwrap();
        }
        let exact = GridFunction::uniform(1.0, 200, |t| t.exp() - 1.0).unwrap();
        let err = x.sup_distance(&exact);
        // Taylor remainder 1/9! plus O(h^2) trapezoid error
        let fact9: f64 = (1..=9).map(|i| i as f64).product();
        assert!(err <= 1.0 / fact9 + 1e-4, "{err}");
    }

    #[test]
    fn trapezoid_is_second_order() {
        let k = build_volterra_kernel(1.0).unwrap();
        let a = OperatorSpec::from_fn(1, |x| vec![x[0].cos()]);
        let err = |m: usize| {
            let x = GridFunction::uniform(1.0, m, |t| t).unwrap();
            let y = apply_integral_operator(&k, &a, &x).unwrap();
            let exact = GridFunction::uniform(1.0, m, f64::sin).unwrap();
            y.sup_distance(&exact)
        };
        for m in [20, 40, 80] {
            let ratio = err(m) / err(2 * m);
            assert!((3.5..=4.5).contains(&ratio), "ratio {ratio}");
        }
    }

    #[test]
    fn expression_kernel_reproduces_volterra() {
        let k = expression_kernel("1 - (s > t)", 1.0);
        // no comparison operators: build the full-interval kernel instead
        assert!(k.is_err());
        let k = expression_kernel("t * s", 1.0).unwrap();
        let x = zero(1.0, 100);
        let y = apply_integral_operator(&k, &affine(0.0, 1.0), &x).unwrap();
        // int_0^1 t s ds = t / 2
        for (t, v) in y.nodes().iter().zip(y.values()) {
            assert!((0.5 * t - v).abs() < 1e-14);
        }
    }

    fn run(k: &KernelSpec, a: &OperatorSpec, x0: &GridFunction, steps: usize, tol: Option<f64>) -> IterationTrace {
        run_integral_iteration(
            k,
            a,
            &SchemeKind::Contraction,
            x0,
            &PerturbationPlan::exact(),
            &StopRule { max_steps: steps, r_tol: None, residual_tol: tol },
            &RunConfig::default(),
        )
        .unwrap()
    }

    #[test]
    fn volterra_converges_without_contraction() {
        let k = build_volterra_kernel(2.0).unwrap();
        let x0 = zero(2.0, 400);
        let t = run(&k, &affine(1.0, 1.0), &x0, 40, Some(1e-6));
        assert!(t.stop.converged());
        let exact: Vec<f64> = x0.nodes().iter().map(|s| s.exp() - 1.0).collect();
        let err = t.last().coords().iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err <= 5e-4, "{err}");
    }

    #[test]
    fn zero_operator_converges_immediately() {
        let k = build_volterra_kernel(1.0).unwrap();
        let t = run(&k, &affine(0.0, 0.0), &zero(1.0, 10), 10, Some(0.0));
        assert_eq!(t.stop, StopReason::ResidualTolerance { n: 0 });
    }

    #[test]
    fn averaging_kernel_is_not_a_contraction() {
        // T x = int_0^1 x ds + 1 shifts every constant by 1
        let k = expression_kernel("1", 1.0).unwrap();
        let x0 = GridFunction::uniform(1.0, 20, |t| t).unwrap();
        let t = run(&k, &affine(1.0, 1.0), &x0, 100, Some(1e-10));
        assert!(matches!(t.stop, StopReason::NonContraction { .. }), "{:?}", t.stop);
        // with A(x) = x the mean of x0 is reached at once and kept
        let t = run(&k, &affine(1.0, 0.0), &x0, 10, Some(1e-12));
        assert!(t.stop.converged());
        assert!(t.last().coords().iter().all(|v| (v - 0.5).abs() < 1e-12));
    }

    #[test]
    fn bound_propagation_is_tight_on_first_step() {
        let k = build_volterra_kernel(1.0).unwrap();
        let x0 = zero(1.0, 100);
        let t = run(&k, &affine(1.0, 1.0), &x0, 3, None);
        let steps = pointwise_steps(&t, &x0).unwrap();
        let c = ProblemConstants::contraction(1.0, 0.0);
        let rep = bound_propagate(&k, &c, &steps[0], &steps[1], SchemeTag::Contraction, 1).unwrap();
        assert!(rep.passed);
        assert!(rep.min_margin.abs() < 1e-14);
        for (t, v) in steps[1].nodes().iter().zip(steps[1].values()) {
            assert!((v - 0.5 * t * t).abs() < 1e-14);
        }
    }

    #[test]
    fn constant_operator_has_zero_second_step() {
        let k = build_volterra_kernel(1.0).unwrap();
        let x0 = zero(1.0, 50);
        let t = run(&k, &affine(0.0, 3.0), &x0, 2, None);
        let steps = pointwise_steps(&t, &x0).unwrap();
        assert!(steps[1].values().iter().all(|v| *v == 0.0));
        let rep = bound_propagate(
            &k,
            &ProblemConstants::contraction(0.0, 0.0),
            &steps[0],
            &steps[1],
            SchemeTag::Contraction,
            1,
        )
        .unwrap();
        assert!(rep.passed);
    }

    #[test]
    fn margin_shrinks_fourfold_under_refinement() {
        let margin = |m: usize| {
            let k = build_volterra_kernel(1.0).unwrap();
            let x0 = zero(1.0, m);
            let t = run(&k, &affine(1.0, 1.0), &x0, 3, None);
            let steps = pointwise_steps(&t, &x0).unwrap();
            let rep = bound_propagate(
                &k,
                &ProblemConstants::contraction(1.0, 0.0),
                &steps[1],
                &steps[2],
                SchemeTag::Contraction,
                2,
            )
            .unwrap();
            assert!(rep.passed);
            rep.min_margin
        };
        let ratio = margin(50) / margin(100);
        assert!((3.5..=4.5).contains(&ratio), "{ratio}");
    }
}
