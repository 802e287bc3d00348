//! Perturbation plans and their injection into the approximating maps
//! `B_{n-1}`.
//!
//! Additive perturbations `delta` with `|delta| = eps_k` shift the value of
//! `B_k` at its base point; rank-one perturbations `s u w^T` with
//! `|s u w^T| = sigma_k` (or `gamma_k`) shift its derivative.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::seq::Sequence;
use crate::space::{NormKind, Vector};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum InjectionMode {
    #[default]
    None,
    /// Worst-case direction: aligned with the most recent step (or the
    /// current residual before the first step).
    AdditiveDeterministic,
    /// Random directions from a seeded stream; same seed, same trace.
    AdditiveSeededRandom { seed: u64 },
}

/// Declared tolerances of an inexact run and how they are realized.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PerturbationPlan {
    /// Declared bound on `|A(x_0) - x_0|`; the measured value is used when
    /// absent.
    #[serde(default)]
    pub eps0: Option<f64>,
    /// `eps_k`: bound on `|A(x_k) - B_k(x_k)|`.
    #[serde(default)]
    pub eps_seq: Sequence,
    /// `sigma_k`: bound on `|A'(x_k) - B_k'(x_k)|` (Newton).
    #[serde(default)]
    pub sigma_seq: Option<Sequence>,
    /// `gamma_k`: bound on `|A'(x_0) - B_k'(x_0)|` (modified Newton).
    #[serde(default)]
    pub gamma_seq: Option<Sequence>,
    #[serde(default)]
    pub mode: InjectionMode,
}

impl PerturbationPlan {
    pub fn exact() -> Self {
        Self::default()
    }

    pub fn additive(eps: Sequence, mode: InjectionMode) -> Self {
        Self { eps_seq: eps, mode, ..Self::default() }
    }

    pub fn eps(&self, k: usize) -> f64 {
        self.eps_seq.at(k)
    }

    pub fn sigma(&self, k: usize) -> f64 {
        self.sigma_seq.as_ref().map_or(0.0, |s| s.at(k))
    }

    pub fn gamma(&self, k: usize) -> f64 {
        self.gamma_seq.as_ref().map_or(0.0, |s| s.at(k))
    }

    pub fn validate(&self) -> Result<(), String> {
        if let Some(e) = self.eps0 {
            if !(e.is_finite() && e >= 0.0) {
                return Err(format!("eps0 = {e} must be finite and nonnegative"));
            }
        }
        self.eps_seq.validate().map_err(|e| format!("eps: {e}"))?;
        if let Some(s) = &self.sigma_seq {
            s.validate().map_err(|e| format!("sigma: {e}"))?;
        }
        if let Some(s) = &self.gamma_seq {
            s.validate().map_err(|e| format!("gamma: {e}"))?;
        }
        Ok(())
    }
}

/// Stateful realization of a plan during one run.
#[derive(Clone, Debug)]
pub struct Injector {
    plan: PerturbationPlan,
    norm: NormKind,
    rng: Option<ChaCha8Rng>,
    direction: Option<Vector>,
}

impl Injector {
    pub fn new(plan: &PerturbationPlan, norm: NormKind) -> Self {
        let rng = match plan.mode {
            InjectionMode::AdditiveSeededRandom { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            _ => None,
        };
        Self { plan: plan.clone(), norm, rng, direction: None }
    }

    pub fn exact(norm: NormKind) -> Self {
        Self::new(&PerturbationPlan::exact(), norm)
    }

    pub fn plan(&self) -> &PerturbationPlan {
        &self.plan
    }

    pub fn norm(&self) -> NormKind {
        self.norm
    }

    pub fn is_active(&self) -> bool {
        self.plan.mode != InjectionMode::None
    }

    /// Records the latest step `x_n - x_{n-1}`; deterministic injection
    /// aligns with it.
    pub fn observe_step(&mut self, step: &Vector) {
        if step.norm(self.norm) > 0.0 {
            self.direction = Some(step.clone());
        }
    }

    fn unit_direction(&mut self, dim: usize, fallback: &Vector) -> Vector {
        let raw = match &mut self.rng {
            Some(rng) => loop {
                let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                if self.norm.norm(&d) > 0.0 {
                    break Vector::from_raw(d);
                }
            },
            None => match &self.direction {
                Some(d) => d.clone(),
                None if fallback.norm(self.norm) > 0.0 => fallback.clone(),
                None => Vector::unit(dim, 0),
            },
        };
        let n = raw.norm(self.norm);
        raw.scale(1.0 / n)
    }

    /// Additive perturbation of `B_k` with norm exactly `eps_k`, or `None`
    /// when nothing is injected.
    pub fn additive(&mut self, k: usize, dim: usize, fallback: &Vector) -> Option<Vector> {
        let eps = self.plan.eps(k);
        if !self.is_active() || eps == 0.0 {
            return None;
        }
        Some(self.unit_direction(dim, fallback).scale(eps))
    }

    /// Rank-one derivative perturbation with induced norm exactly `size`.
    pub fn rank_one(&mut self, size: f64, dim: usize, fallback: &Vector) -> Option<DMatrix<f64>> {
        if !self.is_active() || size == 0.0 {
            return None;
        }
        let u = self.unit_direction(dim, fallback);
        let w = match &mut self.rng {
            Some(rng) => {
                let raw: Vec<f64> = loop {
                    let d: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
                    if self.norm.dual_norm(&d) > 0.0 {
                        break d;
                    }
                };
                let dn = self.norm.dual_norm(&raw);
                raw.into_iter().map(|x| x / dn).collect::<Vec<_>>()
            }
            None => self.norm.norming_functional(u.coords()),
        };
        // |u w^T| = |u| |w|_* = 1
        Some(DMatrix::from_fn(dim, dim, |i, j| size * u.coords()[i] * w[j]))
    }
}
