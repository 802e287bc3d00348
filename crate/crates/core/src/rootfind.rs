//! Root problems `P(x) = 0` recast as `x = x - Gamma(x, P(x))` with
//! `Gamma(x, 0) = 0`.

use serde::{Deserialize, Serialize};

use crate::linalg;
use crate::space::{OperatorError, OperatorSpec, Vector};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GammaSpec {
    /// `Gamma(x, y) = alpha y`.
    Damped { alpha: f64 },
    /// `Gamma(x, y) = P'(x)^{-1} y`.
    Newton,
}

impl GammaSpec {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            GammaSpec::Damped { alpha } if !(*alpha > 0.0 && alpha.is_finite()) => {
                Err(format!("damping alpha = {alpha} must be positive and finite"))
            }
            _ => Ok(()),
        }
    }
}

/// `A(x) = x - Gamma(x, P(x))`. A singular `P'(x)` surfaces as
/// [`OperatorError::Singular`] carrying `x`.
pub fn wrap_root_problem(p: &OperatorSpec, g: GammaSpec) -> Result<OperatorSpec, String> {
    g.validate()?;
    let p = p.clone();
    let dim = p.dim();
    let op = match g {
        GammaSpec::Damped { alpha } => {
            let lip_k = p.lipschitz_k.map(|k| alpha * k);
            let inner = p.clone();
            let op = OperatorSpec::new(dim, move |x| Ok(x.axpy(-alpha, &inner.eval(x)?)));
            // A'(x) h = h - alpha P'(x) h
            let inner = p;
            op.with_derivative(move |x, h| Ok(h.axpy(-alpha, &inner.derivative(x, h)?))).with_lipschitz(None, lip_k)
        }
        GammaSpec::Newton => OperatorSpec::new(dim, move |x| {
            let px = p.eval(x)?;
            let jac = p.jacobian(x)?;
            let z = linalg::solve(&jac, px.coords()).map_err(|_| OperatorError::Singular { x: x.coords().to_vec() })?;
            Ok(x - &Vector::from_raw(z))
        }),
    };
    Ok(op)
}
