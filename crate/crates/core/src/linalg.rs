//! Dense direct solves for the affine inner equations of Newton-type steps.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
#[error("singular linear system (smallest pivot {pivot:e})")]
pub struct SingularMatrix {
    pub pivot: f64,
}

/// Solves `m z = b` by LU with partial pivoting and one step of iterative
/// refinement. A pivot below `1e-13 max(1, max |m_ij|)` is treated as
/// singular.
pub fn solve(m: &DMatrix<f64>, b: &[f64]) -> Result<Vec<f64>, SingularMatrix> {
    let n = m.nrows();
    assert_eq!(n, m.ncols());
    assert_eq!(n, b.len());
    let lu = m.clone().lu();
    let u = lu.u();
    let pivot = (0..n).map(|i| u[(i, i)].abs()).fold(f64::INFINITY, f64::min);
    let scale = m.iter().fold(1.0f64, |a, x| a.max(x.abs()));
    if !(pivot > 1e-13 * scale) {
        return Err(SingularMatrix { pivot });
    }
    let rhs = DVector::from_column_slice(b);
    let mut z = lu.solve(&rhs).ok_or(SingularMatrix { pivot })?;
    let residual = &rhs - m * &z;
    if let Some(dz) = lu.solve(&residual) {
        z += dz;
    }
    if z.iter().any(|x| !x.is_finite()) {
        return Err(SingularMatrix { pivot });
    }
    Ok(z.as_slice().to_vec())
}
