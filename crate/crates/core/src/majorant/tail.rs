use super::cert::cert_bounded;
use super::{MajorantError, MajorantParams, DEFAULT_HORIZON};

/// Upper bound on `sum_{k >= n} r_k`, hence on `|x_n - x*|`, for a sequence
/// dominated by the majorant `p` from index `n - 1` on.
///
/// Once `r_k <= C` is certified from `r_{n-1}` onward, every step satisfies
/// `r_k <= lambda_eff r_{k-1} + rho_{k-1}` with
/// `lambda_eff = sup lambda + eta C`, and summing the geometric tail gives
/// `(lambda_eff r_{n-1} + sum_{j >= n-1} rho_j) / (1 - lambda_eff)`.
pub fn tail_bound(trace_r: &[f64], p: &MajorantParams, n: usize) -> Result<f64, MajorantError> {
    if n == 0 || n > trace_r.len() {
        return Err(MajorantError::InvalidParams(format!(
            "tail_bound needs 1 <= n <= {} (r_(n-1) must be known), got n = {n}",
            trace_r.len()
        )));
    }
    let r = trace_r[n - 1];
    let h = DEFAULT_HORIZON;
    let shifted = MajorantParams::new(p.eta, p.lambda.shifted(n - 1, h), p.rho.shifted(n - 1, h), r);
    let lam_sup = shifted.lambda.sup(h);
    let lambda_eff = if p.eta == 0.0 {
        lam_sup
    } else {
        let cert = cert_bounded(&shifted, h);
        if !cert.valid {
            return Err(MajorantError::NoValidMajorant(format!(
                "no uniform bound on r_k from k = {}: {}",
                n - 1,
                cert.reason.unwrap_or_default()
            )));
        }
        lam_sup + p.eta * cert.witnesses["C"]
    };
    if !(lambda_eff < 1.0) {
        return Err(MajorantError::NoValidMajorant(format!("effective rate {lambda_eff} >= 1")));
    }
    let rho_tail =
        p.rho.tail_sum(n - 1).ok_or_else(|| MajorantError::NoValidMajorant("rho_n is not summable".into()))?;
    Ok((lambda_eff * r + rho_tail) / (1.0 - lambda_eff))
}
