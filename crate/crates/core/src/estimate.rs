//! Sampled Lipschitz constants for `A` and `A'` over a ball. Sampling only
//! ever sees pairs of points, so the results are empirical lower bounds;
//! callers inflate them by a declared safety factor.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::space::{operator_norm_estimate, BallDomain, OperatorError, OperatorSpec, Vector};

pub const DEFAULT_SAFETY_FACTOR: f64 = 1.1;
pub const DEFAULT_SAMPLES: usize = 2000;

/// An empirical lower bound and how it was obtained.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub samples: usize,
    pub seed: u64,
}

impl Estimate {
    pub fn inflated(&self, safety_factor: f64) -> f64 {
        self.value * safety_factor
    }
}

/// Pairs drawn from one seeded stream, so a larger sample count extends
/// the smaller one and the maximum can only grow.
fn pairs(ball: &BallDomain, samples: usize, seed: u64) -> impl Iterator<Item = (Vector, Vector)> + '_ {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples).map(move |_| (ball.sample(&mut rng), ball.sample(&mut rng)))
}

/// `max |A(x) - A(y)| / |x - y|` over sampled pairs in `ball`.
pub fn estimate_lipschitz_m(
    a: &OperatorSpec,
    ball: &BallDomain,
    samples: usize,
    seed: u64,
) -> Result<Estimate, OperatorError> {
    let norm = ball.norm;
    let mut best = 0.0f64;
    for (x, y) in pairs(ball, samples, seed) {
        let d = (&x - &y).norm(norm);
        if d == 0.0 {
            continue;
        }
        best = best.max((&a.eval(&x)? - &a.eval(&y)?).norm(norm) / d);
    }
    Ok(Estimate { value: best, samples, seed })
}

/// `max |A'(x) - A'(y)| / |x - y|` over sampled pairs in `ball`, with the
/// operator norm of the Jacobian difference.
pub fn estimate_lipschitz_k(
    a: &OperatorSpec,
    ball: &BallDomain,
    samples: usize,
    seed: u64,
) -> Result<Estimate, OperatorError> {
    let norm = ball.norm;
    let dim = a.dim();
    let mut best = 0.0f64;
    for (x, y) in pairs(ball, samples, seed) {
        let d = (&x - &y).norm(norm);
        if d == 0.0 {
            continue;
        }
        let diff = a.jacobian(&x)? - a.jacobian(&y)?;
        let op = operator_norm_estimate(
            |h| {
                let v = &diff * nalgebra::DVector::from_column_slice(h.coords());
                Vector::from_raw(v.as_slice().to_vec())
            },
            dim,
            norm,
            8,
        );
        best = best.max(op / d);
    }
    Ok(Estimate { value: best, samples, seed })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::NormKind;
    use nalgebra::DMatrix;

    fn ball(c: f64, r: f64) -> BallDomain {
        BallDomain::new(Vector::from_slice(&[c]).unwrap(), r, NormKind::Sup).unwrap()
    }

    fn cos_op() -> OperatorSpec {
        OperatorSpec::from_fn(1, |x| vec![x[0].cos()]).with_jacobian(|x| DMatrix::from_element(1, 1, -x[0].sin()))
    }

    #[test]
    fn affine_and_identity() {
        let a = OperatorSpec::affine(DMatrix::from_element(1, 1, 0.5), vec![1.0]);
        let e = estimate_lipschitz_m(&a, &ball(3.0, 10.0), 100, 1).unwrap();
        assert!((e.value - 0.5).abs() < 1e-12);
        let id = OperatorSpec::identity(1);
        assert!((estimate_lipschitz_m(&id, &ball(0.0, 1.0), 100, 1).unwrap().value - 1.0).abs() < 1e-12);
        assert_eq!(estimate_lipschitz_k(&a, &ball(3.0, 10.0), 100, 1).unwrap().value, 0.0);
    }

    #[test]
    fn half_square_has_unit_k() {
        let a =
            OperatorSpec::from_fn(1, |x| vec![0.5 * x[0] * x[0]]).with_jacobian(|x| DMatrix::from_element(1, 1, x[0]));
        let e = estimate_lipschitz_k(&a, &ball(0.0, 2.0), 200, 3).unwrap();
        assert!((e.value - 1.0).abs() < 1e-10);
    }

    #[test]
    fn cos_constants_approach_dense_scan_from_below() {
        let (lo, hi) = (0.44f64, 1.04f64);
        let scan =
            |f: fn(f64) -> f64| (0..=100_000).map(|i| f(lo + (hi - lo) * i as f64 / 1e5).abs()).fold(0.0, f64::max);
        let m_true = scan(f64::sin);
        let k_true = scan(f64::cos);
        assert!((m_true - 0.8624).abs() < 1e-4 && (k_true - 0.9048).abs() < 1e-4);
        let b = ball(0.74, 0.3);
        let mut prev = 0.0;
        for samples in [10, 100, 1000, 10_000] {
            let e = estimate_lipschitz_m(&cos_op(), &b, samples, 11).unwrap().value;
            assert!(e >= prev && e <= m_true + 1e-9);
            prev = e;
        }
        assert!(prev > m_true - 1e-2);
        let k = estimate_lipschitz_k(&cos_op(), &b, 5000, 11).unwrap().value;
        assert!(k <= k_true + 1e-9 && k > k_true - 1e-2);
    }

    #[test]
    fn deterministic_per_seed() {
        let b = ball(0.0, 1.0);
        let e1 = estimate_lipschitz_m(&cos_op(), &b, 300, 5).unwrap();
        let e2 = estimate_lipschitz_m(&cos_op(), &b, 300, 5).unwrap();
        assert_eq!(e1, e2);
        assert_eq!(e1.inflated(DEFAULT_SAFETY_FACTOR), e1.value * 1.1);
    }
}
