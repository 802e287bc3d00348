//! Convergence certificates for the majorant recurrence.
//!
//! Every certificate verifies its side conditions up to a finite horizon
//! `N` and then lists, per index `n = 0..=N`, the lower and upper bounds on
//! `r_n` that it asserts. Unasserted entries are `0` (lower) and `+inf`
//! (upper). All bounds hold for any sequence satisfying the recurrence as
//! an inequality, except the lower bounds, which need equality.

use std::collections::BTreeMap;

use serde::Serialize;

use super::MajorantParams;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Uniform bound `r_n <= C`.
    Bounded,
    /// `rho_{n-1} <= r_n <= C_rho rho_{n-1}`.
    Sandwich,
    /// Linear rate driven by the products of `lambda_k`.
    Geometric,
    /// Quadratic rate `(eta r_0)^{2^n} / eta`.
    Quadratic,
    /// Uniform bound from the first coefficients, for nonincreasing
    /// coefficient sequences.
    UniformMax,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Bounded => "bounded",
            Regime::Sandwich => "sandwich",
            Regime::Geometric => "geometric",
            Regime::Quadratic => "quadratic",
            Regime::UniformMax => "uniform_max",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "bounded" => Regime::Bounded,
            "sandwich" => Regime::Sandwich,
            "geometric" => Regime::Geometric,
            "quadratic" => Regime::Quadratic,
            "uniform_max" | "uniform-max" => Regime::UniformMax,
            _ => return None,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Certificate {
    pub regime: Regime,
    pub witnesses: BTreeMap<String, f64>,
    pub checked_horizon: usize,
    pub valid: bool,
    /// First failed side condition when `valid` is false.
    pub reason: Option<String>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub notes: Vec<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Violation {
    pub n: usize,
    pub side: Side,
    pub value: f64,
    pub bound: f64,
}

/// Comparison of a sequence against the bounds of a certificate.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub compared: usize,
    pub violations: Vec<Violation>,
    /// `min_n (upper_n - r_n) / upper_n` over finite upper bounds.
    pub min_upper_margin: Option<f64>,
}

impl CertificateCheck {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// `a <= b` up to `1e-12` relative and `1e-300` absolute slack.
pub(crate) fn leq(a: f64, b: f64) -> bool {
    a <= b + 1e-12 * b.abs() + 1e-300
}

impl Certificate {
    fn new(regime: Regime, horizon: usize) -> Self {
        Self {
            regime,
            witnesses: BTreeMap::new(),
            checked_horizon: horizon,
            valid: false,
            reason: None,
            lower: vec![0.0; horizon + 1],
            upper: vec![f64::INFINITY; horizon + 1],
            notes: Vec::new(),
        }
    }

    /// An invalid certificate carrying only the reason; used when the
    /// inputs never reach a certificate routine.
    pub fn rejected(regime: Regime, horizon: usize, reason: impl Into<String>) -> Self {
        Self::new(regime, horizon).invalid(reason)
    }

    fn witness(mut self, name: &str, v: f64) -> Self {
        self.witnesses.insert(name.to_string(), v);
        self
    }

    fn invalid(mut self, reason: impl Into<String>) -> Self {
        self.valid = false;
        self.reason = Some(reason.into());
        self.upper.iter_mut().for_each(|u| *u = f64::INFINITY);
        self
    }

    fn valid(mut self) -> Self {
        self.valid = true;
        self.reason = None;
        self
    }

    pub fn witness_value(&self, name: &str) -> Option<f64> {
        self.witnesses.get(name).copied()
    }

    /// Compares `r` with both bound arrays over the common length.
    pub fn check(&self, r: &[f64]) -> CertificateCheck {
        self.compare(r, true)
    }

    /// Compares `r` with the upper bounds only; these are the ones that
    /// transfer from the equality recurrence to any dominated sequence.
    pub fn check_upper(&self, r: &[f64]) -> CertificateCheck {
        self.compare(r, false)
    }

    fn compare(&self, r: &[f64], with_lower: bool) -> CertificateCheck {
        let len = r.len().min(self.upper.len());
        let mut violations = Vec::new();
        let mut margin: Option<f64> = None;
        for n in 0..len {
            let (lo, up) = (self.lower[n], self.upper[n]);
            if with_lower && !leq(lo, r[n]) {
                violations.push(Violation { n, side: Side::Lower, value: r[n], bound: lo });
            }
            if !leq(r[n], up) {
                violations.push(Violation { n, side: Side::Upper, value: r[n], bound: up });
            }
            if up.is_finite() && up > 0.0 {
                let m = (up - r[n]) / up;
                margin = Some(margin.map_or(m, |x: f64| x.min(m)));
            }
        }
        CertificateCheck { compared: len, violations, min_upper_margin: margin }
    }
}

fn mul(a: f64, b: f64) -> f64 {
    if a == 0.0 || b == 0.0 {
        0.0
    } else {
        a * b
    }
}

struct Roots {
    lower: f64,
    upper: f64,
}

/// Roots of `eta r^2 - (1 - lambda) r + rho = 0`, or `None` when the
/// discriminant is not positive. The lower root is computed in the
/// cancellation-free form `2 rho / ((1 - lambda) + sqrt(disc))`, which
/// also covers `eta = 0`; the upper root is then `+inf`.
fn roots(eta: f64, lambda: f64, rho: f64) -> Option<Roots> {
    let a = 1.0 - lambda;
    let disc = a * a - 4.0 * eta * rho;
    if !(disc > 0.0) || a <= 0.0 {
        return None;
    }
    let s = disc.sqrt();
    let lower = 2.0 * rho / (a + s);
    let upper = if eta == 0.0 { f64::INFINITY } else { (a + s) / (2.0 * eta) };
    Some(Roots { lower, upper })
}

/// Uniform bound: `r_n <= C` with `C = max(r_0, sup lower roots)`, valid
/// when `C` does not exceed any upper root.
pub fn cert_bounded(p: &MajorantParams, horizon: usize) -> Certificate {
    let cert = Certificate::new(Regime::Bounded, horizon);
    if let Err(e) = p.validate(horizon) {
        return cert.invalid(e.to_string());
    }
    let mut sup_lower = 0.0f64;
    let mut inf_upper = f64::INFINITY;
    for k in 0..horizon {
        let (l, r) = (p.lambda.at(k), p.rho.at(k));
        match roots(p.eta, l, r) {
            Some(rt) => {
                sup_lower = sup_lower.max(rt.lower);
                inf_upper = inf_upper.min(rt.upper);
            }
            None => {
                return cert.invalid(format!(
                    "4 eta rho_{k} >= (1 - lambda_{k})^2 ({} >= {})",
                    4.0 * p.eta * r,
                    (1.0 - l).powi(2)
                ))
            }
        }
    }
    let c = p.r0.max(sup_lower);
    let mut cert = cert.witness("C", c).witness("sup_lower_root", sup_lower).witness("inf_upper_root", inf_upper);
    if !leq(c, inf_upper) {
        return cert.invalid(format!("C = {c:e} exceeds the smallest upper root {inf_upper:e}"));
    }
    cert.upper.iter_mut().for_each(|u| *u = c);
    cert.valid()
}

/// Uniform bound from the first coefficients when `lambda_n`, `rho_n` are
/// nonincreasing: `r_n <= max(r_0, upper root at n = 0)`.
///
/// Requires `r_0` not to exceed that upper root; beyond it the recurrence
/// grows and no uniform bound exists.
pub fn cert_remark1(p: &MajorantParams, horizon: usize) -> Certificate {
    let mut cert = Certificate::new(Regime::UniformMax, horizon);
    cert.notes.push("side condition r_0 <= upper root at n = 0 added; without it the bound fails".into());
    if let Err(e) = p.validate(horizon) {
        return cert.invalid(e.to_string());
    }
    if !p.lambda.is_nonincreasing(horizon) {
        return cert.invalid("lambda_n is not nonincreasing over the horizon");
    }
    if !p.rho.is_nonincreasing(horizon) {
        return cert.invalid("rho_n is not nonincreasing over the horizon");
    }
    for k in 0..horizon {
        if roots(p.eta, p.lambda.at(k), p.rho.at(k)).is_none() {
            return cert.invalid(format!("4 eta rho_{k} >= (1 - lambda_{k})^2"));
        }
    }
    let Some(first) = roots(p.eta, p.lambda.at(0), p.rho.at(0)) else {
        return cert.invalid("4 eta rho_0 >= (1 - lambda_0)^2");
    };
    let bound = p.r0.max(first.upper);
    cert = cert.witness("bound", bound).witness("upper_root_0", first.upper);
    if !leq(p.r0, first.upper) {
        return cert.invalid(format!("r_0 = {:e} exceeds the upper root {:e}", p.r0, first.upper));
    }
    if p.eta == 0.0 {
        cert.notes.push("eta = 0: the upper root is infinite and the bound is vacuous".into());
    }
    cert.upper.iter_mut().for_each(|u| *u = bound);
    cert.valid()
}

/// `C_rho` for given `C1`, `C2`: the larger root of
/// `eta C2 x^2 - (1 - C1) x + 1 = 0`, or its regular limit `1 / (1 - C1)`
/// when `eta C2 = 0`.
pub fn c_rho(eta: f64, c1: f64, c2: f64) -> f64 {
    let a = 1.0 - c1;
    let e = eta * c2;
    if e == 0.0 {
        return 1.0 / a;
    }
    (a + (a * a - 4.0 * e).max(0.0).sqrt()) / (2.0 * e)
}

/// Two-sided bound `rho_{n-1} <= r_n <= C_rho rho_{n-1}` for `n = 1..=N`.
///
/// Side conditions for `n = 0..N`: `lambda_{n+1} <= C1 rho_{n+1} / rho_n`,
/// `rho_n^2 <= C2 rho_{n+1}`; base condition
/// `eta r_0^2 + lambda_0 r_0 + rho_0 <= C_rho rho_0`.
pub fn cert_sandwich(p: &MajorantParams, horizon: usize, c1: f64, c2: f64) -> Certificate {
    let mut cert = Certificate::new(Regime::Sandwich, horizon).witness("C1", c1).witness("C2", c2);
    cert.notes.push("bounds asserted as rho_{n-1} <= r_n <= C_rho rho_{n-1}".into());
    cert.notes.push(
        "window read as eta r_0^2 + lambda_0 r_0 + rho_0 <= C_rho rho_0; the printed interval is ambiguous".into(),
    );
    if let Err(e) = p.validate(horizon + 1) {
        return cert.invalid(e.to_string());
    }
    let rho: Vec<f64> = p.rho.take(horizon + 1);
    if rho.iter().all(|r| *r == 0.0) {
        return cert.invalid("zero perturbation; use cert_geometric/cert_quadratic");
    }
    if let Some(n) = rho.iter().position(|r| *r == 0.0) {
        return cert.invalid(format!("rho_{n} = 0: the ratios rho_(n+1)/rho_n are undefined"));
    }
    if !(0.0..1.0).contains(&c1) {
        return cert.invalid(format!("C1 = {c1} outside [0, 1)"));
    }
    if !(c2 >= 0.0) {
        return cert.invalid(format!("C2 = {c2} must be nonnegative"));
    }
    if p.eta > 0.0 && !leq(c2, (1.0 - c1).powi(2) / (4.0 * p.eta)) {
        return cert.invalid(format!("C2 = {c2} exceeds (1 - C1)^2 / (4 eta)"));
    }
    let cr = c_rho(p.eta, c1, c2);
    cert = cert.witness("C_rho", cr);
    if p.eta * c2 == 0.0 {
        cert.notes.push("eta C2 = 0: C_rho = 1/(1 - C1)".into());
    }
    for n in 0..horizon {
        let l = p.lambda.at(n + 1);
        if !leq(l, c1 * rho[n + 1] / rho[n]) {
            return cert.invalid(format!("lambda_{} = {l:e} > C1 rho_{}/rho_{n}", n + 1, n + 1));
        }
        if !leq(rho[n] * rho[n], c2 * rho[n + 1]) {
            return cert.invalid(format!("rho_{n}^2 > C2 rho_{}", n + 1));
        }
    }
    let r1 = p.first_step();
    cert = cert.witness("rho_tilde_0", r1);
    if !leq(r1, cr * rho[0]) {
        return cert
            .invalid(format!("eta r_0^2 + lambda_0 r_0 + rho_0 = {r1:e} exceeds C_rho rho_0 = {:e}", cr * rho[0]));
    }
    for n in 1..=horizon {
        cert.lower[n] = rho[n - 1];
        cert.upper[n] = cr * rho[n - 1];
    }
    cert.lower[0] = p.r0;
    cert.upper[0] = p.r0;
    cert.valid()
}

/// Linear-rate bound
/// `r_0 prod_{k<n} lambda_k <= r_n <= C_mu (1 + mu)^n lambda~_0 prod_{k=1}^{n-1} lambda_k`
/// for `n = 1..=N`.
///
/// Conditions: `r_1 <= (1 + mu) lambda~_0 C_mu`; for `n = 1..N`,
/// `rho_n <= chi mu C_mu lambda~_0 prod_{k=1}^n lambda_k` and
/// `eta U_n <= (1 - chi) mu lambda_n` with `U_n` the upper bound itself.
pub fn cert_geometric(
    p: &MajorantParams,
    horizon: usize,
    chi: f64,
    mu: f64,
    lambda_tilde0: f64,
    c_mu: f64,
) -> Certificate {
    let mut cert = Certificate::new(Regime::Geometric, horizon)
        .witness("chi", chi)
        .witness("mu", mu)
        .witness("lambda_tilde0", lambda_tilde0)
        .witness("C_mu", c_mu);
    cert.notes.push("upper bound uses prod_{k=1}^{n-1} lambda_k; lambda~_0 stands in for lambda_0".into());
    cert.notes.push("growth condition carries the factor (1 + mu)^n".into());
    if let Err(e) = p.validate(horizon + 1) {
        return cert.invalid(e.to_string());
    }
    // unconditional for the equality recurrence
    let mut low = p.r0;
    cert.lower[0] = low;
    for n in 1..=horizon {
        low = mul(low, p.lambda.at(n - 1));
        cert.lower[n] = low;
    }
    if !(0.0..=1.0).contains(&chi) {
        return cert.invalid(format!("chi = {chi} outside [0, 1]"));
    }
    let lam_sup = p.lambda.sup(horizon + 1);
    let mu_max = if lam_sup > 0.0 { 1.0 / lam_sup - 1.0 } else { f64::INFINITY };
    if !(mu >= 0.0 && mu <= mu_max) {
        return cert.invalid(format!("mu = {mu} outside [0, 1/lambda - 1] = [0, {mu_max}]"));
    }
    if !(lambda_tilde0 >= 0.0 && c_mu >= 0.0 && (lambda_tilde0 * c_mu).is_finite()) {
        return cert.invalid("lambda~_0 and C_mu must be finite and nonnegative");
    }
    let base = lambda_tilde0 * c_mu;
    let r1 = p.first_step();
    if !leq(r1, (1.0 + mu) * base) {
        return cert.invalid(format!("r_1 = {r1:e} exceeds (1 + mu) lambda~_0 C_mu = {:e}", (1.0 + mu) * base));
    }
    // u = U_n, prod = prod_{k=1}^{n} lambda_k
    let mut u = (1.0 + mu) * base;
    let mut prod = 1.0;
    let mut uppers = vec![f64::INFINITY; horizon + 1];
    if horizon >= 1 {
        uppers[1] = u;
    }
    for n in 1..horizon {
        let ln = p.lambda.at(n);
        prod = mul(prod, ln);
        let rho_n = p.rho.at(n);
        if !leq(rho_n, mul(chi * mu * base, prod)) {
            return cert.invalid(format!("rho_{n} = {rho_n:e} exceeds chi mu C_mu lambda~_0 prod lambda"));
        }
        if p.eta > 0.0 && !leq(mul(p.eta, u), (1.0 - chi) * mu * ln) {
            return cert.invalid(format!("eta U_{n} = {:e} exceeds (1 - chi) mu lambda_{n}", mul(p.eta, u)));
        }
        u = mul(u, (1.0 + mu) * ln);
        uppers[n + 1] = u;
    }
    uppers[0] = p.r0;
    cert.upper = uppers;
    cert.valid()
}

/// Quadratic-rate bound
/// `(eta r_0)^{2^n} / eta <= r_n <= (1 + mu)^{2^n - 1} (eta r_0)^{2^n} / eta`
/// for `n = 0..=N`.
///
/// Conditions for `n = 1..=N`: `lambda_{n-1} <= chi mu (eta r_0)^{2^{n-1}}`
/// and `eta rho_{n-1} <= (1 - chi) mu (eta r_0)^{2^n}`.
pub fn cert_quadratic(p: &MajorantParams, horizon: usize, chi: f64, mu: f64) -> Certificate {
    let mut cert = Certificate::new(Regime::Quadratic, horizon).witness("chi", chi).witness("mu", mu);
    cert.notes.push("upper bound carries (1 + mu)^{2^n - 1}; (1 + mu)^n is not sufficient for mu > 0".into());
    if let Err(e) = p.validate(horizon) {
        return cert.invalid(e.to_string());
    }
    if !(p.eta > 0.0) {
        return cert.invalid("quadratic regime requires eta > 0");
    }
    let a = p.eta * p.r0;
    cert = cert.witness("eta_r0", a);
    // unconditional: r_n >= eta r_{n-1}^2
    let mut pw = a;
    for n in 0..=horizon {
        cert.lower[n] = pw / p.eta;
        pw *= pw;
    }
    if !(a < 1.0) {
        return cert.invalid("quadratic regime requires eta r_0 < 1");
    }
    if !(0.0..=1.0).contains(&chi) || !(mu >= 0.0 && mu.is_finite()) {
        return cert.invalid(format!("chi = {chi} must lie in [0, 1] and mu = {mu} must be nonnegative"));
    }
    // pw = (eta r_0)^{2^{n-1}}, v = (1 + mu)^{2^{n-1} - 1} pw
    let mut pw = a;
    let mut v = a;
    let mut uppers = vec![f64::INFINITY; horizon + 1];
    uppers[0] = p.r0;
    for n in 1..=horizon {
        let l = p.lambda.at(n - 1);
        if !leq(l, chi * mu * pw) {
            return cert.invalid(format!("lambda_{} = {l:e} exceeds chi mu (eta r_0)^(2^{})", n - 1, n - 1));
        }
        let er = p.eta * p.rho.at(n - 1);
        if !leq(er, (1.0 - chi) * mu * pw * pw) {
            return cert.invalid(format!("eta rho_{} = {er:e} exceeds (1 - chi) mu (eta r_0)^(2^{n})", n - 1));
        }
        pw *= pw;
        v = v * v * (1.0 + mu);
        uppers[n] = v / p.eta;
    }
    cert.upper = uppers;
    cert.valid()
}

const GRID: usize = 16;

fn grid(lo: f64, hi: f64) -> impl Iterator<Item = f64> {
    (0..GRID).map(move |i| lo + (hi - lo) * i as f64 / (GRID - 1) as f64)
}

/// First valid sandwich witness on a `16 x 16` grid over
/// `C1 in [0, 1)`, `C2 in [0, (1 - C1)^2 / (4 eta)]`. With `eta = 0` the
/// smallest admissible `C2 = max rho_n^2 / rho_{n+1}` is used.
pub fn search_sandwich(p: &MajorantParams, horizon: usize) -> Option<Certificate> {
    let rho = p.rho.take(horizon + 1);
    let c2_min = (0..horizon).map(|n| rho[n] * rho[n] / rho[n + 1]).fold(0.0, f64::max);
    for i in 0..GRID {
        let c1 = i as f64 / GRID as f64;
        let candidates: Vec<f64> =
            if p.eta > 0.0 { grid(0.0, (1.0 - c1).powi(2) / (4.0 * p.eta)).collect() } else { vec![c2_min] };
        for c2 in candidates {
            let cert = cert_sandwich(p, horizon, c1, c2);
            if cert.valid {
                return Some(cert);
            }
        }
    }
    None
}

/// First valid geometric witness on a `16 x 16` grid over
/// `mu in [0, 1/lambda - 1]`, `chi in [0, 1]`. Only the product
/// `lambda~_0 C_mu` enters the conditions; for each grid point the smallest
/// product compatible with the first two conditions is tried.
pub fn search_geometric(p: &MajorantParams, horizon: usize) -> Option<Certificate> {
    let lam_sup = p.lambda.sup(horizon + 1);
    let mu_max = if lam_sup > 0.0 { 1.0 / lam_sup - 1.0 } else { 15.0 };
    let r1 = p.first_step();
    let lt0 = if p.lambda.at(0) > 0.0 { p.lambda.at(0) } else { 1.0 };
    for mu in grid(0.0, mu_max) {
        for chi in grid(0.0, 1.0) {
            let mut base = r1 / (1.0 + mu);
            let mut prod = 1.0;
            for n in 1..horizon {
                prod = mul(prod, p.lambda.at(n));
                let rho = p.rho.at(n);
                if rho > 0.0 {
                    base = base.max(rho / (chi * mu * prod));
                }
            }
            if !base.is_finite() {
                continue;
            }
            let cert = cert_geometric(p, horizon, chi, mu, lt0, base / lt0);
            if cert.valid {
                return Some(cert);
            }
        }
    }
    None
}

/// First valid quadratic witness scanning `chi` over a 16-point grid; for
/// each `chi` the smallest admissible `mu` is used.
pub fn search_quadratic(p: &MajorantParams, horizon: usize) -> Option<Certificate> {
    if !(p.eta > 0.0) {
        return None;
    }
    let a = p.eta * p.r0;
    for chi in grid(0.0, 1.0) {
        let mut mu = 0.0f64;
        let mut pw = a;
        for n in 1..=horizon {
            let l = p.lambda.at(n - 1);
            let er = p.eta * p.rho.at(n - 1);
            if l > 0.0 {
                mu = mu.max(l / (chi * pw));
            }
            if er > 0.0 {
                mu = mu.max(er / ((1.0 - chi) * pw * pw));
            }
            pw *= pw;
        }
        if !mu.is_finite() {
            continue;
        }
        let cert = cert_quadratic(p, horizon, chi, mu);
        if cert.valid {
            return Some(cert);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::majorant::simulate_recurrence;
    use crate::seq::Sequence;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn params(eta: f64, lam: Sequence, rho: Sequence, r0: f64) -> MajorantParams {
        MajorantParams::new(eta, lam, rho, r0)
    }

    #[test]
    fn bounded_example() {
        let p = params(0.1, Sequence::constant(0.5), Sequence::constant(0.05), 0.2);
        let c = cert_bounded(&p, 100);
        assert!(c.valid);
        let lower = (0.5 - 0.23f64.sqrt()) / 0.2;
        let upper = (0.5 + 0.23f64.sqrt()) / 0.2;
        assert_relative_eq!(c.witnesses["sup_lower_root"], lower, max_relative = 1e-12);
        assert_relative_eq!(c.witnesses["inf_upper_root"], upper, max_relative = 1e-12);
        assert!((lower - 0.102084).abs() < 1e-6 && (upper - 4.897916).abs() < 1e-6);
        assert_eq!(c.witnesses["C"], 0.2);
        let sim = simulate_recurrence(&p, 100);
        assert!(c.check(&sim.r).ok());
        assert!(sim.r.iter().all(|r| *r <= 0.2));
    }

    #[test]
    fn bounded_eta_zero_limit() {
        let p = params(0.0, Sequence::constant(0.5), Sequence::constant(0.1), 0.3);
        let c = cert_bounded(&p, 100);
        assert!(c.valid);
        assert_relative_eq!(c.witnesses["sup_lower_root"], 0.2, max_relative = 1e-15);
        assert_eq!(c.witnesses["inf_upper_root"], f64::INFINITY);
        assert_eq!(c.witnesses["C"], 0.3);
        let sim = simulate_recurrence(&p, 100);
        assert!(sim.r.iter().all(|r| *r <= 0.3));
        // closed form: r_n = 0.2 + 0.1 * 0.5^n
        for (n, r) in sim.r.iter().enumerate().take(40) {
            assert_relative_eq!(*r, 0.2 + 0.1 * 0.5f64.powi(n as i32), max_relative = 1e-14);
        }
    }

    #[test]
    fn bounded_discriminant_failure() {
        let p = params(1.0, Sequence::constant(0.5), Sequence::explicit(vec![0.01, 0.01, 0.1]), 0.0);
        let c = cert_bounded(&p, 10);
        assert!(!c.valid);
        assert!(c.reason.unwrap().contains("rho_2"));
    }

    #[test]
    fn uniform_max_examples() {
        let p = params(0.1, Sequence::constant(0.5), Sequence::constant(0.05), 0.2);
        let c = cert_remark1(&p, 100);
        assert!(c.valid);
        assert!((c.witnesses["bound"] - 4.897916).abs() < 1e-6);
        assert!(c.check(&simulate_recurrence(&p, 100).r).ok());

        let inc = params(0.1, Sequence::explicit(vec![0.1, 0.2, 0.3]), Sequence::constant(0.05), 0.2);
        assert!(!cert_remark1(&inc, 10).valid);
    }

    #[test]
    fn uniform_max_rejects_start_above_upper_root() {
        // r_0 beyond the upper root: the printed bound max(r_0, root) fails
        let p = params(1.0, Sequence::zero(), Sequence::zero(), 1.5);
        let sim = simulate_recurrence(&p, 3);
        assert!(sim.r[1] > 1.5);
        assert!(!cert_remark1(&p, 10).valid);
    }

    #[test]
    fn sandwich_example() {
        let p = params(0.01, Sequence::geometric(0.1, 0.5), Sequence::geometric(0.01, 0.5), 0.02);
        let c = cert_sandwich(&p, 40, 0.2, 0.02);
        assert!(c.valid, "{:?}", c.reason);
        let sim = simulate_recurrence(&p, 40);
        assert!(c.check(&sim.r).ok());
        // window membership of eta r_0^2 + lambda_0 r_0 + rho_0
        assert!(c.witnesses["rho_tilde_0"] <= c.witnesses["C_rho"] * 0.01);
    }

    #[test]
    fn sandwich_degenerate_inputs() {
        let p = params(0.1, Sequence::constant(0.1), Sequence::zero(), 0.1);
        let c = cert_sandwich(&p, 10, 0.5, 0.1);
        assert!(!c.valid);
        assert_eq!(c.reason.as_deref(), Some("zero perturbation; use cert_geometric/cert_quadratic"));
    }

    #[test]
    fn c_rho_limit() {
        assert_eq!(c_rho(0.0, 0.5, 3.0), 2.0);
        // the smaller root tends to 1/(1 - C1) as eta C2 -> 0
        let e = 1e-9;
        let small = 2.0 / (0.5 + (0.25f64 - 4.0 * e).sqrt());
        assert_relative_eq!(small, 2.0, max_relative = 1e-7);
    }

    #[test]
    fn geometric_closed_form() {
        let p = params(0.0, Sequence::constant(0.5), Sequence::zero(), 1.0);
        let c = cert_geometric(&p, 30, 0.0, 0.0, 0.5, 1.0);
        assert!(c.valid, "{:?}", c.reason);
        let sim = simulate_recurrence(&p, 30);
        for n in 0..=30 {
            assert_eq!(sim.r[n], 0.5f64.powi(n as i32));
            assert_eq!(c.upper[n], sim.r[n]);
            assert_eq!(c.lower[n], sim.r[n]);
        }
    }

    #[test]
    fn geometric_search_example() {
        let p = params(0.05, Sequence::constant(0.5), Sequence::geometric(0.001, 0.5), 0.1);
        let c = cert_geometric(&p, 30, 0.5, 0.5, 0.5, 1.0);
        let sim = simulate_recurrence(&p, 30);
        if c.valid {
            assert!(c.check(&sim.r).ok());
        }
        let found = search_geometric(&p, 30).expect("a witness exists");
        assert!(found.check(&sim.r).ok());
    }

    #[test]
    fn quadratic_examples() {
        let p = params(1.0, Sequence::zero(), Sequence::zero(), 0.5);
        let c = cert_quadratic(&p, 6, 0.5, 0.0);
        assert!(c.valid);
        let sim = simulate_recurrence(&p, 6);
        assert_eq!(&sim.r[..3], &[0.5, 0.25, 0.0625]);
        for n in 0..=6 {
            assert_relative_eq!(c.lower[n], sim.r[n], max_relative = 1e-12);
            assert_relative_eq!(c.upper[n], sim.r[n], max_relative = 1e-12);
        }

        let p = params(2.0, Sequence::zero(), Sequence::zero(), 0.25);
        let c = cert_quadratic(&p, 3, 0.0, 0.0);
        assert_eq!(simulate_recurrence(&p, 1).r[1], 0.125);
        assert_eq!(c.lower[1], 0.125);

        let p = params(2.0, Sequence::zero(), Sequence::zero(), 0.5);
        let c = cert_quadratic(&p, 3, 0.0, 0.0);
        assert_eq!(c.reason.as_deref(), Some("quadratic regime requires eta r_0 < 1"));
    }

    #[test]
    fn quadratic_printed_exponent_is_too_small() {
        // rho chosen so the conditions hold with equality; the simulation
        // then exceeds (1 + mu)^{n-1} a^{2^{n-1}} / eta at n - 1 = 3
        let (mu, a) = (0.1f64, 0.5f64);
        let rho: Vec<f64> = (0..10).map(|m| mu * a.powi(1 << (m + 1))).collect();
        let p = params(1.0, Sequence::zero(), Sequence::explicit(rho), a);
        let c = cert_quadratic(&p, 8, 0.0, mu);
        assert!(c.valid);
        let sim = simulate_recurrence(&p, 8);
        assert!(c.check(&sim.r).ok());
        let printed = (1.0 + mu).powi(3) * a.powi(8);
        assert!(sim.r[3] > printed);
    }

    fn regime_params() -> impl Strategy<Value = MajorantParams> {
        (0.0..3.0f64, 0.0..0.9f64, 0.0..0.05f64, 0.0..0.5f64, 0.2..1.0f64).prop_map(|(eta, lam, rho, r0, q)| {
            MajorantParams::new(eta, Sequence::geometric(lam, q), Sequence::geometric(rho, q), r0)
        })
    }

    const H: usize = 40;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn bounded_is_sound(p in regime_params()) {
            let c = cert_bounded(&p, H);
            prop_assume!(c.valid);
            prop_assert!(c.check(&simulate_recurrence(&p, H).r).ok());
        }

        #[test]
        fn uniform_max_is_sound(p in regime_params()) {
            let c = cert_remark1(&p, H);
            prop_assume!(c.valid);
            prop_assert!(c.check(&simulate_recurrence(&p, H).r).ok());
        }

        #[test]
        fn sandwich_is_sound(
            eta in 0.0..3.0f64, c1 in 0.0..0.9f64, u in 0.0..1.0f64, q in 0.2..0.95f64,
            rho0 in 1e-6..1e-2f64, r0 in 0.0..0.05f64,
        ) {
            // lambda_{n+1} = u C1 q^{n+1} <= C1 rho_{n+1}/rho_n, rho_n^2 <= (rho_0 / q) rho_{n+1}
            let p = MajorantParams::new(eta, Sequence::geometric(u * c1, q), Sequence::geometric(rho0, q), r0);
            let c = cert_sandwich(&p, H, c1, rho0 / q);
            prop_assume!(c.valid);
            prop_assert!(c.check(&simulate_recurrence(&p, H).r).ok());
        }

        #[test]
        fn geometric_is_sound(
            eta in 0.0..0.5f64, l in 0.05..0.9f64, fq in 0.1..1.0f64, rho0 in 0.0..0.05f64,
            r0 in 0.0..0.5f64, chi in 0.05..1.0f64, fmu in 0.0..1.0f64,
        ) {
            let p = MajorantParams::new(eta, Sequence::constant(l), Sequence::geometric(rho0, fq * l), r0);
            let mu = fmu * (1.0 / l - 1.0);
            // smallest C_mu meeting the first-step and perturbation conditions
            let mut c_mu = p.first_step() / (l * (1.0 + mu));
            for n in 1..H {
                if chi * mu > 0.0 {
                    c_mu = c_mu.max(p.rho.at(n) / (chi * mu * l * l.powi(n as i32)));
                }
            }
            let c = cert_geometric(&p, H, chi, mu, l, c_mu);
            prop_assume!(c.valid);
            prop_assert!(c.check(&simulate_recurrence(&p, H).r).ok());
        }

        #[test]
        fn quadratic_is_sound(
            eta in 0.1..3.0f64, fa in 0.0..0.95f64, chi in 0.0..1.0f64, mu in 0.0..1.0f64,
            f1 in 0.0..1.0f64, f2 in 0.0..1.0f64,
        ) {
            let a = fa;
            let r0 = a / eta;
            let lam: Vec<f64> = (0..13).map(|n| f1 * chi * mu * a.powf(2f64.powi(n))).collect();
            let rho: Vec<f64> = (0..13).map(|n| f2 * (1.0 - chi) * mu * a.powf(2f64.powi(n + 1)) / eta).collect();
            let p = MajorantParams::new(eta, Sequence::explicit(lam), Sequence::explicit(rho), r0);
            let c = cert_quadratic(&p, 12, chi, mu);
            prop_assert!(c.valid, "{:?}", c.reason);
            prop_assert!(c.check(&simulate_recurrence(&p, 12).r).ok());
        }

        #[test]
        fn searched_witnesses_are_sound(p in regime_params()) {
            let sim = simulate_recurrence(&p, H);
            for c in [search_sandwich(&p, H), search_geometric(&p, H), search_quadratic(&p, 12)].into_iter().flatten() {
                prop_assert!(c.valid);
                prop_assert!(c.check(&sim.r).ok(), "{:?}", c.regime);
            }
        }
    }

    #[test]
    fn quadratic_tightness_without_linear_terms() {
        for r0 in [0.1, 0.3, 0.9] {
            for eta in [0.5, 1.0, 1.1] {
                let p = params(eta, Sequence::zero(), Sequence::zero(), r0);
                let c = cert_quadratic(&p, 6, 0.5, 0.0);
                if !c.valid {
                    assert!(eta * r0 >= 1.0);
                    continue;
                }
                let sim = simulate_recurrence(&p, 6);
                for n in 0..=6 {
                    assert_relative_eq!(c.upper[n], sim.r[n], max_relative = 1e-12);
                    assert_relative_eq!(c.lower[n], sim.r[n], max_relative = 1e-12);
                }
            }
        }
    }
}
