//! Nonnegative scalar sequences given in closed form. They describe the
//! tolerances `eps_n`, `sigma_n`, `gamma_n` of a perturbation plan and the
//! coefficients `lambda_n`, `rho_n` of a majorant recurrence.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Sequence {
    /// `c` for every `n`.
    Constant { c: f64 },
    /// `c q^n`.
    Geometric { c: f64, q: f64 },
    /// `c n^{-p}` for `n >= 1`, and `c` at `n = 0`.
    Power { c: f64, p: f64 },
    /// Listed values; the last one is held beyond the end.
    Explicit { values: Vec<f64> },
}

impl Default for Sequence {
    fn default() -> Self {
        Sequence::zero()
    }
}

/// Outcome of the summability test on a sequence.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "verdict", content = "reason", rename_all = "snake_case")]
pub enum Summability {
    Summable,
    Divergent(String),
    Undetermined(String),
}

impl Sequence {
    pub fn zero() -> Self {
        Sequence::Constant { c: 0.0 }
    }

    pub fn constant(c: f64) -> Self {
        Sequence::Constant { c }
    }

    pub fn geometric(c: f64, q: f64) -> Self {
        Sequence::Geometric { c, q }
    }

    pub fn power(c: f64, p: f64) -> Self {
        Sequence::Power { c, p }
    }

    pub fn explicit(values: Vec<f64>) -> Self {
        Sequence::Explicit { values }
    }

    pub fn at(&self, n: usize) -> f64 {
        match self {
            Sequence::Constant { c } => *c,
            Sequence::Geometric { c, q } => c * q.powi(n as i32),
            Sequence::Power { c, p } => c * (n.max(1) as f64).powf(-p),
            Sequence::Explicit { values } => match values.get(n) {
                Some(v) => *v,
                None => values.last().copied().unwrap_or(0.0),
            },
        }
    }

    pub fn take(&self, len: usize) -> Vec<f64> {
        (0..len).map(|n| self.at(n)).collect()
    }

    /// Amplitude `c` (for explicit sequences, the first value).
    pub fn amplitude(&self) -> f64 {
        match self {
            Sequence::Constant { c } | Sequence::Geometric { c, .. } | Sequence::Power { c, .. } => *c,
            Sequence::Explicit { values } => values.first().copied().unwrap_or(0.0),
        }
    }

    /// Same shape with amplitude `c`. Explicit sequences are rescaled.
    pub fn with_amplitude(&self, amp: f64) -> Self {
        match self {
            Sequence::Constant { .. } => Sequence::Constant { c: amp },
            Sequence::Geometric { q, .. } => Sequence::Geometric { c: amp, q: *q },
            Sequence::Power { p, .. } => Sequence::Power { c: amp, p: *p },
            Sequence::Explicit { values } => {
                let first = values.first().copied().unwrap_or(0.0);
                let s = if first == 0.0 { 0.0 } else { amp / first };
                Sequence::Explicit { values: values.iter().map(|v| v * s).collect() }
            }
        }
    }

    /// `f a_n` with the same shape.
    pub fn scaled(&self, f: f64) -> Self {
        match self {
            Sequence::Explicit { values } => Sequence::Explicit { values: values.iter().map(|v| v * f).collect() },
            other => other.with_amplitude(other.amplitude() * f),
        }
    }

    /// `f (a + a_n)`. Exact for constants and `a = 0`; otherwise the first
    /// `horizon` values are listed and the last one is held, which bounds
    /// the sequence from above whenever it is nonincreasing.
    pub fn shifted_scaled(&self, a: f64, f: f64, horizon: usize) -> Self {
        match self {
            Sequence::Constant { c } => Sequence::Constant { c: f * (a + c) },
            _ if a == 0.0 => self.scaled(f),
            _ => Sequence::Explicit { values: (0..horizon.max(1)).map(|n| f * (a + self.at(n))).collect() },
        }
    }

    /// `f (a_n + a_{n+1})`. Exact for every shape except `Power`, where
    /// `2 f c n^{-p}` is used; it is exact at `n = 0` and an upper bound
    /// for `p >= 0`.
    pub fn pair_sum_scaled(&self, f: f64) -> Self {
        match self {
            Sequence::Constant { c } => Sequence::Constant { c: 2.0 * c * f },
            Sequence::Geometric { c, q } => Sequence::Geometric { c: c * (1.0 + q) * f, q: *q },
            Sequence::Power { c, p } => Sequence::Power { c: 2.0 * c * f, p: *p },
            Sequence::Explicit { values } => {
                Sequence::Explicit { values: (0..values.len()).map(|n| f * (self.at(n) + self.at(n + 1))).collect() }
            }
        }
    }

    /// The sequence `n -> a_{n + k}`. Listed explicitly over `horizon`
    /// values unless the shape is shift-invariant.
    pub fn shifted(&self, k: usize, horizon: usize) -> Self {
        match self {
            Sequence::Constant { .. } => self.clone(),
            Sequence::Geometric { c, q } => Sequence::Geometric { c: c * q.powi(k as i32), q: *q },
            _ => Sequence::Explicit { values: (0..horizon.max(1)).map(|n| self.at(n + k)).collect() },
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Sequence::Explicit { values } => values.iter().all(|v| *v == 0.0),
            other => other.amplitude() == 0.0,
        }
    }

    /// Checks that every value is finite and nonnegative, and that the
    /// closed-form parameters describe such a sequence.
    pub fn validate(&self) -> Result<(), String> {
        let ok = |x: f64| x.is_finite() && x >= 0.0;
        match self {
            Sequence::Constant { c } if !ok(*c) => Err(format!("constant {c} must be finite and nonnegative")),
            Sequence::Geometric { c, q } if !ok(*c) || !ok(*q) => {
                Err(format!("geometric c={c}, q={q} must be finite and nonnegative"))
            }
            Sequence::Power { c, p } if !ok(*c) || !p.is_finite() => Err(format!("power c={c}, p={p} is invalid")),
            Sequence::Explicit { values } => match values.iter().find(|v| !ok(**v)) {
                Some(v) => Err(format!("explicit value {v} must be finite and nonnegative")),
                None => Ok(()),
            },
            _ => Ok(()),
        }
    }

    pub fn sup(&self, len: usize) -> f64 {
        (0..len).map(|n| self.at(n)).fold(0.0, f64::max)
    }

    pub fn is_nonincreasing(&self, len: usize) -> bool {
        (1..len).all(|n| self.at(n) <= self.at(n - 1))
    }

    /// Upper bound on `sum_{j >= from} a_j`, or `None` when the tail is not
    /// summable.
    pub fn tail_sum(&self, from: usize) -> Option<f64> {
        match self {
            Sequence::Constant { c } => (*c == 0.0).then_some(0.0),
            Sequence::Geometric { c, q } => {
                if *c == 0.0 {
                    Some(0.0)
                } else if *q < 1.0 {
                    Some(c * q.powi(from as i32) / (1.0 - q))
                } else {
                    None
                }
            }
            Sequence::Power { c, p } => {
                if *c == 0.0 {
                    return Some(0.0);
                }
                if *p <= 1.0 {
                    return None;
                }
                // sum_{j>=m} j^{-p} <= m^{-p} + m^{1-p}/(p-1)
                let m = from.max(1) as f64;
                let head = if from == 0 { *c } else { 0.0 };
                Some(head + c * (m.powf(-p) + m.powf(1.0 - p) / (p - 1.0)))
            }
            Sequence::Explicit { values } => {
                let last = values.last().copied().unwrap_or(0.0);
                if last > 0.0 {
                    return None;
                }
                Some(values.iter().skip(from).sum())
            }
        }
    }

    /// Summability of the whole series. Closed forms are decided exactly;
    /// explicit lists use a harmonic lower-bound test and a ratio test over
    /// the listed horizon, and report `Undetermined` when neither applies.
    pub fn summability(&self) -> Summability {
        match self {
            Sequence::Explicit { values } => explicit_summability(values),
            Sequence::Power { c, p } if *c > 0.0 && *p <= 1.0 => {
                Summability::Divergent(format!("harmonic lower bound detected (n^-{p} with p <= 1)"))
            }
            Sequence::Constant { c } if *c > 0.0 => Summability::Divergent(format!("constant {c} > 0")),
            Sequence::Geometric { c, q } if *c > 0.0 && *q >= 1.0 => {
                Summability::Divergent(format!("geometric ratio {q} >= 1"))
            }
            _ => Summability::Summable,
        }
    }
}

fn explicit_summability(values: &[f64]) -> Summability {
    let n = values.len();
    if n == 0 || values.iter().rev().take_while(|v| **v == 0.0).count() > 0 {
        return Summability::Summable;
    }
    if n < 8 {
        return Summability::Undetermined(format!("only {n} values listed"));
    }
    // second half of the horizon decides
    let tail = &values[n / 2..];
    let offset = n / 2;
    // harmonic test: n * a_n bounded away from zero
    let harmonic = tail.iter().enumerate().map(|(i, v)| ((offset + i).max(1)) as f64 * v).fold(f64::INFINITY, f64::min);
    let head = values.iter().copied().fold(0.0, f64::max);
    if harmonic > 1e-3 * head.max(f64::MIN_POSITIVE) {
        return Summability::Divergent(format!("harmonic lower bound detected (n a_n >= {harmonic:.3e})"));
    }
    let max_ratio = tail.windows(2).map(|w| if w[0] > 0.0 { w[1] / w[0] } else { 0.0 }).fold(0.0, f64::max);
    if max_ratio < 1.0 - 1e-3 {
        return Summability::Summable;
    }
    Summability::Undetermined("neither ratio nor harmonic test is conclusive".into())
}
