//! Finite-dimensional normed spaces: vectors, norms, balls, operators and
//! finite-difference Gateaux derivatives.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors raised when constructing space primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpaceError {
    #[error("a vector needs at least one coordinate")]
    Empty,
    #[error("non-finite coordinate {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("ball radius must be finite and nonnegative, got {0}")]
    BadRadius(f64),
}

/// Errors raised while evaluating an operator or its derivative.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("operator produced a non-finite value at x = {x:?}")]
    NonFinite { x: Vec<f64> },
    #[error("singular derivative at x = {x:?}")]
    Singular { x: Vec<f64> },
    #[error("{0}")]
    Eval(String),
}

/// A point of `R^d`. Coordinates are always finite.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Vector {
    coords: Vec<f64>,
}

impl Vector {
    pub fn new(coords: Vec<f64>) -> Result<Self, SpaceError> {
        if coords.is_empty() {
            return Err(SpaceError::Empty);
        }
        if let Some((index, &value)) = coords.iter().enumerate().find(|(_, c)| !c.is_finite()) {
            return Err(SpaceError::NonFinite { index, value });
        }
        Ok(Self { coords })
    }

    pub fn from_slice(coords: &[f64]) -> Result<Self, SpaceError> {
        Self::new(coords.to_vec())
    }

    /// Builds a vector without validation. Callers re-check finiteness at
    /// the boundaries where it matters (operator outputs, iterates).
    pub(crate) fn from_raw(coords: Vec<f64>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim >= 1, "dimension must be positive");
        Self { coords: vec![0.0; dim] }
    }

    pub fn unit(dim: usize, i: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.coords[i] = 1.0;
        v
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn norm(&self, kind: NormKind) -> f64 {
        kind.norm(&self.coords)
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &Vector) -> Vector {
        debug_assert_eq!(self.dim(), other.dim());
        Vector::from_raw(self.coords.iter().zip(&other.coords).map(|(x, y)| x + a * y).collect())
    }

    pub fn scale(&self, a: f64) -> Vector {
        Vector::from_raw(self.coords.iter().map(|x| a * x).collect())
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        self.coords.iter().zip(other).map(|(x, y)| x * y).sum()
    }
}

impl Add for &Vector {
    type Output = Vector;
    fn add(self, rhs: &Vector) -> Vector {
        self.axpy(1.0, rhs)
    }
}

impl Sub for &Vector {
    type Output = Vector;
    fn sub(self, rhs: &Vector) -> Vector {
        self.axpy(-1.0, rhs)
    }
}

impl Mul<&Vector> for f64 {
    type Output = Vector;
    fn mul(self, rhs: &Vector) -> Vector {
        rhs.scale(self)
    }
}

impl Neg for &Vector {
    type Output = Vector;
    fn neg(self) -> Vector {
        self.scale(-1.0)
    }
}

impl fmt::Display for Vector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for (i, c) in self.coords.iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, "]")
    }
}

/// The norm used throughout one problem.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NormKind {
    #[default]
    Sup,
    Euclidean,
    One,
}

impl NormKind {
    pub fn norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Sup => v.iter().fold(0.0, |m, x| m.max(x.abs())),
            NormKind::One => v.iter().map(|x| x.abs()).sum(),
            NormKind::Euclidean => {
                // scaled to avoid overflow for large coordinates
                let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if scale == 0.0 {
                    return 0.0;
                }
                scale * v.iter().map(|x| (x / scale).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    /// Norm of the dual space (sup <-> one, euclidean is self-dual).
    pub fn dual_norm(self, v: &[f64]) -> f64 {
        match self {
            NormKind::Sup => NormKind::One.norm(v),
            NormKind::One => NormKind::Sup.norm(v),
            NormKind::Euclidean => NormKind::Euclidean.norm(v),
        }
    }

    /// A norming functional for `u`: `w . u = |u|` and `|w|_* = 1`.
    pub fn norming_functional(self, u: &[f64]) -> Vec<f64> {
        let n = self.norm(u);
        let mut w = vec![0.0; u.len()];
        if n == 0.0 {
            w[0] = 1.0;
            return w;
        }
        match self {
            NormKind::Euclidean => {
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi = ui / n;
                }
            }
            NormKind::Sup => {
                let (j, _) = u
                    .iter()
                    .enumerate()
                    .fold((0, -1.0), |(bj, bv), (i, x)| if x.abs() > bv { (i, x.abs()) } else { (bj, bv) });
                w[j] = u[j].signum();
            }
            NormKind::One => {
                for (wi, ui) in w.iter_mut().zip(u) {
                    *wi = if *ui < 0.0 { -1.0 } else { 1.0 };
                }
            }
        }
        w
    }

    /// Induced operator norm of a materialized matrix. Exact for `sup`
    /// (max row sum) and `one` (max column sum); the largest singular
    /// value for `euclidean`.
    pub fn matrix_norm(self, m: &DMatrix<f64>) -> f64 {
        match self {
            NormKind::Sup => m.row_iter().map(|r| r.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max),
            NormKind::One => m.column_iter().map(|c| c.iter().map(|x| x.abs()).sum::<f64>()).fold(0.0, f64::max),
            NormKind::Euclidean => m.clone().singular_values().iter().copied().fold(0.0, f64::max),
        }
    }
}

pub fn norm_of(v: &Vector, kind: NormKind) -> f64 {
    v.norm(kind)
}

/// Closed ball `B_R(x_0)` in a fixed norm.
#[derive(Clone, Debug, PartialEq)]
pub struct BallDomain {
    pub center: Vector,
    pub radius: f64,
    pub norm: NormKind,
}

impl BallDomain {
    pub fn new(center: Vector, radius: f64, norm: NormKind) -> Result<Self, SpaceError> {
        if !(radius.is_finite() && radius >= 0.0) {
            return Err(SpaceError::BadRadius(radius));
        }
        Ok(Self { center, radius, norm })
    }

    pub fn contains(&self, v: &Vector) -> bool {
        let tol = 1e-12 * self.radius.max(1.0);
        (v - &self.center).norm(self.norm) <= self.radius + tol
    }

    /// Uniform-ish sample: a random direction scaled to a random fraction of
    /// the radius.
    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vector {
        let d = self.center.dim();
        loop {
            let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..=1.0)).collect();
            let n = self.norm.norm(&dir);
            if n == 0.0 {
                continue;
            }
            let t = self.radius * rng.random::<f64>() / n;
            return self.center.axpy(t, &Vector::from_raw(dir));
        }
    }
}

pub type EvalFn = dyn Fn(&Vector) -> Result<Vector, OperatorError> + Send + Sync;
pub type DerivativeFn = dyn Fn(&Vector, &Vector) -> Result<Vector, OperatorError> + Send + Sync;

/// An evaluable map `R^d -> R^d`, optionally with an analytic directional
/// derivative and known Lipschitz constants (`M` for the map, `K` for its
/// derivative).
#[derive(Clone)]
pub struct OperatorSpec {
    dim: usize,
    evaluator: Arc<EvalFn>,
    derivative: Option<Arc<DerivativeFn>>,
    pub lipschitz_m: Option<f64>,
    pub lipschitz_k: Option<f64>,
}

impl fmt::Debug for OperatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorSpec")
            .field("dim", &self.dim)
            .field("analytic_derivative", &self.derivative.is_some())
            .field("lipschitz_m", &self.lipschitz_m)
            .field("lipschitz_k", &self.lipschitz_k)
            .finish()
    }
}

impl OperatorSpec {
    pub fn new<F>(dim: usize, evaluator: F) -> Self
    where
        F: Fn(&Vector) -> Result<Vector, OperatorError> + Send + Sync + 'static,
    {
        assert!(dim >= 1, "dimension must be positive");
        Self { dim, evaluator: Arc::new(evaluator), derivative: None, lipschitz_m: None, lipschitz_k: None }
    }

    /// Infallible coordinate map; non-finite outputs are still rejected at
    /// evaluation time.
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        Self::new(dim, move |x| Ok(Vector::from_raw(f(x.coords()))))
    }

    pub fn with_derivative<D>(mut self, derivative: D) -> Self
    where
        D: Fn(&Vector, &Vector) -> Result<Vector, OperatorError> + Send + Sync + 'static,
    {
        self.derivative = Some(Arc::new(derivative));
        self
    }

    /// Analytic Jacobian given as a dense row-major matrix function.
    pub fn with_jacobian<J>(self, jacobian: J) -> Self
    where
        J: Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    {
        self.with_derivative(move |x, h| {
            let j = jacobian(x.coords());
            let y = j * nalgebra::DVector::from_column_slice(h.coords());
            Ok(Vector::from_raw(y.as_slice().to_vec()))
        })
    }

    pub fn with_lipschitz(mut self, m: Option<f64>, k: Option<f64>) -> Self {
        self.lipschitz_m = m;
        self.lipschitz_k = k;
        self
    }

    /// `A(x) = C x + b` with its exact derivative.
    pub fn affine(matrix: DMatrix<f64>, offset: Vec<f64>) -> Self {
        let dim = offset.len();
        assert_eq!(matrix.nrows(), dim);
        assert_eq!(matrix.ncols(), dim);
        let m = matrix.clone();
        let b = nalgebra::DVector::from_vec(offset);
        Self::new(dim, move |x| {
            let y = &m * nalgebra::DVector::from_column_slice(x.coords()) + &b;
            Ok(Vector::from_raw(y.as_slice().to_vec()))
        })
        .with_jacobian(move |_| matrix.clone())
        .with_lipschitz(None, Some(0.0))
    }

    pub fn identity(dim: usize) -> Self {
        Self::affine(DMatrix::identity(dim, dim), vec![0.0; dim])
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn has_derivative(&self) -> bool {
        self.derivative.is_some()
    }

    fn check_input(&self, x: &Vector) -> Result<(), OperatorError> {
        if x.dim() != self.dim {
            return Err(OperatorError::Dimension { expected: self.dim, got: x.dim() });
        }
        Ok(())
    }

    fn check_output(&self, x: &Vector, y: Vector) -> Result<Vector, OperatorError> {
        if y.dim() != self.dim {
            return Err(OperatorError::Dimension { expected: self.dim, got: y.dim() });
        }
        if !y.is_finite() {
            return Err(OperatorError::NonFinite { x: x.coords().to_vec() });
        }
        Ok(y)
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector, OperatorError> {
        self.check_input(x)?;
        let y = (self.evaluator)(x)?;
        self.check_output(x, y)
    }

    /// Directional derivative `A'(x) h`: analytic when supplied, otherwise a
    /// central difference with the default step.
    pub fn derivative(&self, x: &Vector, h: &Vector) -> Result<Vector, OperatorError> {
        self.check_input(x)?;
        self.check_input(h)?;
        match &self.derivative {
            Some(d) => {
                let y = d(x, h)?;
                self.check_output(x, y)
            }
            None => gateaux_fd(self, x, h, default_fd_step(x)),
        }
    }

    /// Dense Jacobian built from directional derivatives along the
    /// coordinate axes.
    pub fn jacobian(&self, x: &Vector) -> Result<DMatrix<f64>, OperatorError> {
        let d = self.dim;
        let mut j = DMatrix::zeros(d, d);
        for col in 0..d {
            let image = self.derivative(x, &Vector::unit(d, col))?;
            for (row, v) in image.coords().iter().enumerate() {
                j[(row, col)] = *v;
            }
        }
        Ok(j)
    }
}

/// Default central-difference step, `1e-6 (1 + |x|_sup)`.
pub fn default_fd_step(x: &Vector) -> f64 {
    1e-6 * (1.0 + x.norm(NormKind::Sup))
}

/// Central difference `(A(x + s h) - A(x - s h)) / 2s`.
pub fn gateaux_fd(op: &OperatorSpec, x: &Vector, h: &Vector, step: f64) -> Result<Vector, OperatorError> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(OperatorError::Eval(format!("finite-difference step must be positive, got {step}")));
    }
    let plus = op.eval(&x.axpy(step, h))?;
    let minus = op.eval(&x.axpy(-step, h))?;
    let diff = (&plus - &minus).scale(0.5 / step);
    if !diff.is_finite() {
        return Err(OperatorError::NonFinite { x: x.coords().to_vec() });
    }
    Ok(diff)
}

/// Lower estimate of the induced norm of a linear map. The map is
/// materialized on the coordinate axes; for `sup` and `one` the estimate is
/// then exact. For `euclidean`, the maximum of `|L u|` over the coordinate
/// directions, `samples` seeded random unit directions and a short power
/// iteration is returned.
pub fn operator_norm_estimate<L>(linmap: L, dim: usize, kind: NormKind, samples: usize) -> f64
where
    L: Fn(&Vector) -> Vector,
{
    let mut m = DMatrix::zeros(dim, dim);
    for col in 0..dim {
        let image = linmap(&Vector::unit(dim, col));
        for (row, v) in image.coords().iter().enumerate() {
            m[(row, col)] = *v;
        }
    }
    match kind {
        NormKind::Sup | NormKind::One => kind.matrix_norm(&m),
        NormKind::Euclidean => euclidean_lower_estimate(&m, samples),
    }
}

fn euclidean_lower_estimate(m: &DMatrix<f64>, samples: usize) -> f64 {
    let dim = m.ncols();
    let apply = |u: &nalgebra::DVector<f64>| (m * u).norm();
    let mut best = (0..dim).map(|c| m.column(c).norm()).fold(0.0, f64::max);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start = nalgebra::DVector::from_element(dim, 1.0);
    for _ in 0..samples {
        let u = nalgebra::DVector::from_fn(dim, |_, _| rng.random_range(-1.0..=1.0));
        let n = u.norm();
        if n == 0.0 {
            continue;
        }
        let u = u / n;
        let val = apply(&u);
        if val > best {
            best = val;
            start = u;
        }
    }
    // power iteration on M^T M from the best sampled direction
    let mtm = m.transpose() * m;
    let mut u = start;
    for _ in 0..50 {
        let next = &mtm * &u;
        let n = next.norm();
        if n == 0.0 {
            break;
        }
        u = next / n;
        best = best.max(apply(&u));
    }
    best
}
