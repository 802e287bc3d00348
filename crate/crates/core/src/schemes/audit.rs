//! Step-by-step audit of the inequalities that bound `r_n` in terms of
//! `r_{n-1}` for each scheme.
//!
//! `M_n` is the Lipschitz constant of the map `B_n` actually used (recorded
//! in the trace when known, otherwise taken from the constants); `K_n`,
//! `eps_n`, `sigma_n`, `gamma_n` are the declared values.

use serde::Serialize;

use super::{IterationTrace, SchemeTag};
use crate::majorant::ProblemConstants;

/// Which inequality a row checks.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Inequality {
    /// `r_0 <= M_0 r_0 + eps + eps_0`.
    FirstStep,
    /// `r_n <= M_n r_n + (M + M_{n-1}) r_{n-1} + eps_{n-1} + eps_n`.
    Contraction,
    /// `r_n <= M_n r_n + (K + K_{n-1})/2 r_{n-1}^2 + sigma_{n-1} r_{n-1} + eps_{n-1} + eps_n`.
    Newton,
    /// `r~_n <= M_{n-1} r~_n + (K + K_{n-1})/2 r~_{n-1}^2 + gamma_{n-1} r~_{n-1} + eps + eps_{n-1}`.
    ModifiedNewtonDistance,
    /// `r_n <= M_n r_n + (K + K_{n-1})/2 r_{n-1}^2 + (gamma_{n-1} + (K + K_{n-1}) r~_{n-1}) r_{n-1} + eps_{n-1} + eps_n`.
    ModifiedNewtonStep,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AuditRow {
    pub inequality: Inequality,
    pub n: usize,
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// For the distance inequality only: whether the variant with `M_n` in
    /// place of `M_{n-1}` holds.
    pub shifted_holds: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TheoremAudit {
    pub slack: f64,
    pub rows: Vec<AuditRow>,
}

impl TheoremAudit {
    pub fn violations(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| !r.holds)
    }

    /// Rows that fail as stated but hold with the shifted index.
    pub fn flagged(&self) -> impl Iterator<Item = &AuditRow> {
        self.rows.iter().filter(|r| !r.holds && r.shifted_holds == Some(true))
    }

    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.holds || r.shifted_holds == Some(true))
    }

    pub fn min_margin(&self) -> f64 {
        self.rows.iter().map(|r| r.rhs - r.lhs).fold(f64::INFINITY, f64::min)
    }
}

/// Audits every step of `trace` against the inequality of `scheme`, with
/// absolute slack `10 inner_tol + 1e-12`.
pub fn audit_theorem(trace: &IterationTrace, c: &ProblemConstants, scheme: SchemeTag, inner_tol: f64) -> TheoremAudit {
    let slack = 10.0 * inner_tol + 1e-12;
    let m_n = |n: usize| trace.b_lipschitz.get(n).copied().flatten().unwrap_or_else(|| c.m_seq.at(n));
    let k_n = |n: usize| c.k_seq.at(n);
    let eps = |n: usize| c.eps_seq.at(n);
    let r = &trace.r;
    let rt = &trace.r_tilde;
    let mut rows = Vec::new();
    let mut push = |inequality, n, lhs: f64, rhs: f64, shifted_holds| {
        rows.push(AuditRow { inequality, n, lhs, rhs, holds: lhs <= rhs + slack, shifted_holds });
    };

    if let Some(&r0) = r.first() {
        push(Inequality::FirstStep, 0, r0, m_n(0) * r0 + c.eps + eps(0), None);
    }
    for n in 1..r.len() {
        let (rn, rp) = (r[n], r[n - 1]);
        let tail = eps(n - 1) + eps(n);
        let quad = 0.5 * (c.k + k_n(n - 1)) * rp * rp;
        match scheme {
            SchemeTag::Contraction | SchemeTag::Custom => {
                push(Inequality::Contraction, n, rn, m_n(n) * rn + (c.m + m_n(n - 1)) * rp + tail, None)
            }
            SchemeTag::Newton => {
                push(Inequality::Newton, n, rn, m_n(n) * rn + quad + c.sigma_seq.at(n - 1) * rp + tail, None)
            }
            SchemeTag::ModifiedNewton => {
                let g = c.gamma_seq.at(n - 1);
                let coeff = g + (c.k + k_n(n - 1)) * rt[n - 1];
                push(Inequality::ModifiedNewtonStep, n, rn, m_n(n) * rn + quad + coeff * rp + tail, None);
            }
        }
    }
    if scheme == SchemeTag::ModifiedNewton {
        for n in 1..rt.len() {
            let (tn, tp) = (rt[n], rt[n - 1]);
            let rest = 0.5 * (c.k + k_n(n - 1)) * tp * tp + c.gamma_seq.at(n - 1) * tp + c.eps + eps(n - 1);
            let printed = m_n(n - 1) * tn + rest;
            // M_n exists only when x_{n+1} was computed
            let shifted = (n < trace.b_lipschitz.len()).then(|| tn <= m_n(n) * tn + rest + slack);
            push(Inequality::ModifiedNewtonDistance, n, tn, printed, shifted);
        }
    }
    TheoremAudit { slack, rows }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schemes::{run_outer, InjectionMode, PerturbationPlan, RunConfig, SchemeKind, StopRule};
    use crate::seq::Sequence;
    use crate::space::{OperatorSpec, Vector};
    use nalgebra::DMatrix;

    fn cos_op() -> OperatorSpec {
        OperatorSpec::from_fn(1, |x| vec![x[0].cos()]).with_jacobian(|x| DMatrix::from_element(1, 1, -x[0].sin()))
    }

    fn x(v: f64) -> Vector {
        Vector::from_slice(&[v]).unwrap()
    }

    fn run(a: &OperatorSpec, scheme: SchemeKind, x0: f64, plan: &PerturbationPlan, steps: usize) -> IterationTrace {
        run_outer(a, &scheme, &x(x0), plan, &StopRule::steps(steps), &RunConfig::default()).unwrap()
    }

    #[test]
    fn contraction_on_cos_satisfies_every_step() {
        let a = cos_op();
        let t = run(&a, SchemeKind::Contraction, 1.0, &PerturbationPlan::exact(), 40);
        let c = ProblemConstants::contraction(1f64.sin(), t.residual[0]);
        let audit = audit_theorem(&t, &c, SchemeTag::Contraction, 1e-12);
        assert!(audit.passed());
        assert_eq!(audit.rows.len(), t.r.len());
    }

    #[test]
    fn perturbed_linear_contraction() {
        let a = OperatorSpec::affine(DMatrix::from_element(1, 1, 0.5), vec![1.0]);
        let plan = PerturbationPlan::additive(Sequence::constant(0.01), InjectionMode::AdditiveDeterministic);
        let t = run(&a, SchemeKind::Contraction, 0.0, &plan, 100);
        let mut c = ProblemConstants::contraction(0.5, t.residual[0]);
        c.eps_seq = plan.eps_seq.clone();
        let audit = audit_theorem(&t, &c, SchemeTag::Contraction, 1e-12);
        assert!(audit.passed());
        // without the declared eps the inequality must fail somewhere
        let bare = audit_theorem(&t, &ProblemConstants::contraction(0.5, t.residual[0]), SchemeTag::Contraction, 1e-12);
        assert!(bare.violations().count() > 0);
    }

    #[test]
    fn newton_with_sigma_perturbation() {
        let a = cos_op();
        let plan = PerturbationPlan {
            sigma_seq: Some(Sequence::constant(0.05)),
            eps_seq: Sequence::geometric(1e-4, 0.5),
            mode: InjectionMode::AdditiveSeededRandom { seed: 7 },
            ..PerturbationPlan::default()
        };
        let t = run(&a, SchemeKind::Newton, 1.0, &plan, 15);
        let s1 = 1f64.sin();
        let c = ProblemConstants::for_scheme(SchemeTag::Newton, s1, 1.0, t.residual[0], &plan, 0.0, 20);
        let audit = audit_theorem(&t, &c, SchemeTag::Newton, 1e-12);
        assert!(audit.passed(), "{:?}", audit.violations().collect::<Vec<_>>());
    }

    #[test]
    fn modified_newton_both_inequalities() {
        let a = OperatorSpec::from_fn(1, |x| vec![0.25 * x[0] * x[0] + 0.25])
            .with_jacobian(|x| DMatrix::from_element(1, 1, 0.5 * x[0]));
        let plan = PerturbationPlan {
            gamma_seq: Some(Sequence::constant(0.02)),
            eps_seq: Sequence::geometric(1e-3, 0.5),
            mode: InjectionMode::AdditiveDeterministic,
            ..PerturbationPlan::default()
        };
        let t = run(&a, SchemeKind::ModifiedNewton, 0.5, &plan, 20);
        let c = ProblemConstants::for_scheme(SchemeTag::ModifiedNewton, 0.5, 0.5, t.residual[0], &plan, 0.25, 30);
        let audit = audit_theorem(&t, &c, SchemeTag::ModifiedNewton, 1e-12);
        assert!(audit.passed(), "{:?}", audit.violations().collect::<Vec<_>>());
        assert!(audit.rows.iter().any(|r| r.inequality == Inequality::ModifiedNewtonDistance));
    }
}
