//! The scalar majorant `r_n = eta r_{n-1}^2 + lambda_{n-1} r_{n-1} + rho_{n-1}`,
//! the reduction of the per-step inequalities to this form, convergence
//! certificates and a-posteriori error bounds.

mod cert;
mod tail;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::schemes::{PerturbationPlan, SchemeTag};
use crate::seq::{Sequence, Summability};

pub use cert::{
    cert_bounded, cert_geometric, cert_quadratic, cert_remark1, cert_sandwich, search_geometric, search_quadratic,
    search_sandwich, Certificate, CertificateCheck, Regime, Side, Violation,
};
pub use tail::tail_bound;

/// Default horizon up to which side conditions are verified.
pub const DEFAULT_HORIZON: usize = 200;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MajorantError {
    #[error("M_star = {0} >= 1: the implicit term cannot be moved to the left-hand side")]
    MStarNotBelowOne(f64),
    #[error("invalid constants: {0}")]
    InvalidConstants(String),
    #[error("invalid majorant parameters: {0}")]
    InvalidParams(String),
    #[error("no bound on |x_n - x_0| for the modified Newton step recurrence: {0}")]
    NoTildeBound(String),
    #[error("no valid majorant: {0}")]
    NoValidMajorant(String),
}

/// Lipschitz data of `A` and of the approximating maps `B_n`, plus the
/// perturbation tolerances.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConstants {
    /// Lipschitz constant of `A` on the working ball.
    pub m: f64,
    /// `M_n`: Lipschitz constant of `B_n`.
    pub m_seq: Sequence,
    pub m_star: f64,
    /// Lipschitz constant of `A'`.
    pub k: f64,
    /// `K_n`: Lipschitz constant of `B_n'`.
    pub k_seq: Sequence,
    pub k_star: f64,
    /// Bound on `|A(x_0) - x_0|`.
    pub eps: f64,
    pub eps_seq: Sequence,
    pub sigma_seq: Sequence,
    pub gamma_seq: Sequence,
}

impl ProblemConstants {
    /// Constants of an exact contraction with Lipschitz constant `m`.
    pub fn contraction(m: f64, eps: f64) -> Self {
        Self {
            m,
            m_seq: Sequence::zero(),
            m_star: 0.0,
            k: 0.0,
            k_seq: Sequence::zero(),
            k_star: 0.0,
            eps,
            eps_seq: Sequence::zero(),
            sigma_seq: Sequence::zero(),
            gamma_seq: Sequence::zero(),
        }
    }

    /// Constants for one of the built-in schemes.
    ///
    /// `b_norm` is `|A'(x_0)|` for modified Newton and the relaxation
    /// modulus `|beta|` for the relaxed custom scheme; it is ignored
    /// otherwise. The built-in `B_n` are affine, so `K_n = 0`.
    pub fn for_scheme(
        scheme: SchemeTag,
        m: f64,
        k: f64,
        eps: f64,
        plan: &PerturbationPlan,
        b_norm: f64,
        horizon: usize,
    ) -> Self {
        let sigma = plan.sigma_seq.clone().unwrap_or_default();
        let gamma = plan.gamma_seq.clone().unwrap_or_default();
        let (m_seq, m_star) = match scheme {
            SchemeTag::Contraction => (Sequence::zero(), 0.0),
            SchemeTag::Newton => (sigma.shifted_scaled(m, 1.0, horizon), m + sigma.sup(horizon + 1)),
            SchemeTag::ModifiedNewton => (gamma.shifted_scaled(b_norm, 1.0, horizon), b_norm + gamma.sup(horizon + 1)),
            SchemeTag::Custom => (Sequence::constant(b_norm), b_norm),
        };
        Self {
            m,
            m_seq,
            m_star,
            k,
            k_seq: Sequence::zero(),
            k_star: 0.0,
            eps,
            eps_seq: plan.eps_seq.clone(),
            sigma_seq: sigma,
            gamma_seq: gamma,
        }
    }

    /// `q = (M + M_star) / (1 - M_star)`.
    pub fn q(&self) -> Result<f64, MajorantError> {
        if !(self.m_star < 1.0) {
            return Err(MajorantError::MStarNotBelowOne(self.m_star));
        }
        Ok((self.m + self.m_star) / (1.0 - self.m_star))
    }

    pub fn validate(&self) -> Result<(), MajorantError> {
        let scalars =
            [("M", self.m), ("M_star", self.m_star), ("K", self.k), ("K_star", self.k_star), ("eps", self.eps)];
        for (name, v) in scalars {
            if !(v >= 0.0) || v.is_nan() {
                return Err(MajorantError::InvalidConstants(format!("{name} = {v} must be nonnegative")));
            }
        }
        let seqs = [
            ("M_n", &self.m_seq),
            ("K_n", &self.k_seq),
            ("eps_n", &self.eps_seq),
            ("sigma_n", &self.sigma_seq),
            ("gamma_n", &self.gamma_seq),
        ];
        for (name, s) in seqs {
            s.validate().map_err(|e| MajorantError::InvalidConstants(format!("{name}: {e}")))?;
        }
        Ok(())
    }
}

/// Coefficients of the majorant recurrence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MajorantParams {
    pub eta: f64,
    pub lambda: Sequence,
    pub rho: Sequence,
    pub r0: f64,
}

impl MajorantParams {
    pub fn new(eta: f64, lambda: Sequence, rho: Sequence, r0: f64) -> Self {
        Self { eta, lambda, rho, r0 }
    }

    /// Checks `eta >= 0`, `r0 >= 0`, `rho_n >= 0` and `0 <= lambda_n < 1`
    /// for `n < horizon`.
    pub fn validate(&self, horizon: usize) -> Result<(), MajorantError> {
        let bad = |msg: String| Err(MajorantError::InvalidParams(msg));
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return bad(format!("eta = {} must be finite and nonnegative", self.eta));
        }
        if !(self.r0 >= 0.0 && self.r0.is_finite()) {
            return bad(format!("r0 = {} must be finite and nonnegative", self.r0));
        }
        self.lambda.validate().map_err(|e| MajorantError::InvalidParams(format!("lambda: {e}")))?;
        self.rho.validate().map_err(|e| MajorantError::InvalidParams(format!("rho: {e}")))?;
        for n in 0..horizon {
            let l = self.lambda.at(n);
            if !(0.0..1.0).contains(&l) {
                return bad(format!("lambda_{n} = {l} is outside [0, 1)"));
            }
            let r = self.rho.at(n);
            if !(r >= 0.0 && r.is_finite()) {
                return bad(format!("rho_{n} = {r} must be finite and nonnegative"));
            }
        }
        Ok(())
    }

    /// `r_1` of the equality recurrence.
    pub fn first_step(&self) -> f64 {
        recurrence_step(self.r0, self.eta, self.lambda.at(0), self.rho.at(0))
    }
}

/// `eta r^2 + lambda r + rho`.
pub fn recurrence_step(r_prev: f64, eta: f64, lambda_prev: f64, rho_prev: f64) -> f64 {
    eta * r_prev * r_prev + lambda_prev * r_prev + rho_prev
}

/// Equality simulation `r_0..r_N`, truncated at the first non-finite value.
#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub r: Vec<f64>,
    /// Index of the first value that overflowed.
    pub diverged_at: Option<usize>,
}

pub fn simulate_recurrence(p: &MajorantParams, horizon: usize) -> Simulation {
    let mut r = Vec::with_capacity(horizon + 1);
    r.push(p.r0);
    for n in 1..=horizon {
        let next = recurrence_step(r[n - 1], p.eta, p.lambda.at(n - 1), p.rho.at(n - 1));
        if !next.is_finite() {
            return Simulation { r, diverged_at: Some(n) };
        }
        r.push(next);
    }
    Simulation { r, diverged_at: None }
}

/// Reduces the per-step inequality of `scheme` to the majorant form by
/// moving the implicit `M_n r_n` term left and majorizing per-step
/// constants by `M_star`, `K_star`.
///
/// For modified Newton the `|x_n - x_0|` recurrence is certified first with
/// [`cert_bounded`] over `horizon`; its bound enters `lambda`.
pub fn theorem_to_recurrence(
    c: &ProblemConstants,
    scheme: SchemeTag,
    r0: f64,
    horizon: usize,
) -> Result<MajorantParams, MajorantError> {
    c.validate()?;
    if !(c.m_star < 1.0) {
        return Err(MajorantError::MStarNotBelowOne(c.m_star));
    }
    let f = 1.0 / (1.0 - c.m_star);
    let rho = c.eps_seq.pair_sum_scaled(f);
    let quad = 0.5 * (c.k + c.k_star) * f;
    let params = match scheme {
        SchemeTag::Contraction | SchemeTag::Custom => {
            MajorantParams::new(0.0, Sequence::constant((c.m + c.m_star) * f), rho, r0)
        }
        SchemeTag::Newton => MajorantParams::new(quad, c.sigma_seq.scaled(f), rho, r0),
        SchemeTag::ModifiedNewton => {
            let tilde = tilde_recurrence(c, horizon);
            let cert = cert_bounded(&tilde, horizon);
            if !cert.valid {
                return Err(MajorantError::NoTildeBound(cert.reason.unwrap_or_default()));
            }
            let bound = cert.witnesses["C"];
            let lambda = c.gamma_seq.shifted_scaled((c.k + c.k_star) * bound, f, horizon);
            MajorantParams::new(quad, lambda, rho, r0)
        }
    };
    Ok(params)
}

/// Majorant of `|x_n - x_0|` under modified Newton, starting from 0.
pub fn tilde_recurrence(c: &ProblemConstants, horizon: usize) -> MajorantParams {
    let f = 1.0 / (1.0 - c.m_star);
    MajorantParams::new(
        0.5 * (c.k + c.k_star) * f,
        c.gamma_seq.scaled(f),
        c.eps_seq.shifted_scaled(c.eps, f, horizon),
        0.0,
    )
}

/// Outcome of a single assumption check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Pass,
    Fail,
    Undetermined,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub verdict: Verdict,
    pub detail: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PrecheckReport {
    pub checks: Vec<AssumptionCheck>,
}

impl PrecheckReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.verdict == Verdict::Pass)
    }

    pub fn get(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks the global assumptions on the constants: `M_star < 1`, `q < 1`,
/// summable `eps_n` and finite `K_star`.
pub fn precheck(c: &ProblemConstants) -> PrecheckReport {
    let mut checks = Vec::new();
    let nonneg = c.validate();
    checks.push(AssumptionCheck {
        name: "nonnegative_constants",
        verdict: if nonneg.is_ok() { Verdict::Pass } else { Verdict::Fail },
        detail: nonneg.err().map_or_else(|| "all constants are nonnegative".into(), |e| e.to_string()),
    });
    let m_ok = c.m_star < 1.0;
    checks.push(AssumptionCheck {
        name: "m_star_below_one",
        verdict: if m_ok { Verdict::Pass } else { Verdict::Fail },
        detail: format!("M_star = {}", c.m_star),
    });
    let (verdict, detail) = match c.q() {
        Ok(q) if q < 1.0 => (Verdict::Pass, format!("q = {q:.6}")),
        Ok(q) => (Verdict::Fail, format!("q = {q:.6} >= 1")),
        Err(e) => (Verdict::Fail, format!("q undefined: {e}")),
    };
    checks.push(AssumptionCheck { name: "q_below_one", verdict, detail });
    let (verdict, detail) = match c.eps_seq.summability() {
        Summability::Summable => (Verdict::Pass, "eps_n is summable".to_string()),
        Summability::Divergent(why) => (Verdict::Fail, why),
        Summability::Undetermined(why) => (Verdict::Undetermined, why),
    };
    checks.push(AssumptionCheck { name: "eps_summable", verdict, detail });
    checks.push(AssumptionCheck {
        name: "k_star_finite",
        verdict: if c.k_star.is_finite() { Verdict::Pass } else { Verdict::Fail },
        detail: format!("K_star = {}", c.k_star),
    });
    PrecheckReport { checks }
}

/// First-step bound `r_0 <= (eps + eps_0) / (1 - M_0)` against the measured
/// first step.
pub fn check_first_step(c: &ProblemConstants, r0_measured: f64) -> AssumptionCheck {
    let m0 = c.m_seq.at(0);
    if !(m0 < 1.0) {
        return AssumptionCheck {
            name: "first_step",
            verdict: Verdict::Undetermined,
            detail: format!("M_0 = {m0} >= 1 gives no bound"),
        };
    }
    let bound = (c.eps + c.eps_seq.at(0)) / (1.0 - m0);
    let ok = cert::leq(r0_measured, bound);
    AssumptionCheck {
        name: "first_step",
        verdict: if ok { Verdict::Pass } else { Verdict::Fail },
        detail: format!("r_0 = {r0_measured:e}, bound (eps + eps_0)/(1 - M_0) = {bound:e}"),
    }
}
