//! Gradient oracles for the test problems.
//!
//! The periodic and sparse problems are piecewise-linear in x, so their
//! gradients are constant in x and depend only on the step index t (and the
//! coin flips, for the stochastic variant). Step indexing starts at t = 1 so
//! that `t mod P == 1` lands on the first step of every period.

use crate::optim::BoxConstraint;
use crate::rng::LabRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ProblemKind {
    #[serde(rename = "periodic1")]
    Periodic1,
    #[serde(rename = "stochastic1")]
    Stochastic1,
    #[serde(rename = "sparse2")]
    Sparse2,
    #[serde(rename = "absvalue")]
    AbsValue,
    #[serde(rename = "noisy_quadratic")]
    NoisyQuadratic,
}

impl ProblemKind {
    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Periodic1 => "periodic1",
            ProblemKind::Stochastic1 => "stochastic1",
            ProblemKind::Sparse2 => "sparse2",
            ProblemKind::AbsValue => "absvalue",
            ProblemKind::NoisyQuadratic => "noisy_quadratic",
        }
    }
}

impl std::str::FromStr for ProblemKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "periodic1" => Ok(ProblemKind::Periodic1),
            "stochastic1" => Ok(ProblemKind::Stochastic1),
            "sparse2" => Ok(ProblemKind::Sparse2),
            "absvalue" | "abs_value" => Ok(ProblemKind::AbsValue),
            "noisy_quadratic" | "noisyquadratic" => Ok(ProblemKind::NoisyQuadratic),
            other => Err(Error::InvalidParameter(format!("unknown problem '{other}'"))),
        }
    }
}

/// A gradient oracle together with its feasible box and known optimum.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    /// Period of the periodic problems; unused otherwise.
    pub p: u32,
    /// Drift of the stochastic problem, in (0, 1).
    pub delta: f64,
    /// Noise level of the noisy quadratic.
    pub noise_sigma: f64,
    /// Parameter dimension (1 for the scalar problems).
    pub dims: usize,
    pub bounds: BoxConstraint,
    pub x_star: Vec<f64>,
    pub x0_default: Vec<f64>,
}

impl ProblemSpec {
    /// Periodic counterexample: gradient P on the first step of each period,
    /// -1 otherwise. Feasible box [-1, 1], optimum x* = -1 (the per-period
    /// loss sums to x).
    pub fn periodic1(p: u32) -> Result<Self> {
        if p < 3 {
            return Err(Error::InvalidParameter(format!(
                "periodic1 requires P >= 3, got {p}"
            )));
        }
        Ok(Self {
            kind: ProblemKind::Periodic1,
            p,
            delta: 0.0,
            noise_sigma: 0.0,
            dims: 1,
            bounds: BoxConstraint::uniform(1, -1.0, 1.0),
            x_star: vec![-1.0],
            x0_default: vec![0.0],
        })
    }

    /// Stochastic variant: gradient P with probability (1+delta)/(P+1), else
    /// -1. The expected gradient is exactly delta.
    pub fn stochastic1(p: u32, delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "stochastic1 requires 0 < delta < 1, got {delta}"
            )));
        }
        if p < 1 {
            return Err(Error::InvalidParameter("stochastic1 requires P >= 1".into()));
        }
        Ok(Self {
            kind: ProblemKind::Stochastic1,
            p,
            delta,
            noise_sigma: 0.0,
            dims: 1,
            bounds: BoxConstraint::uniform(1, -1.0, 1.0),
            x_star: vec![-1.0],
            x0_default: vec![0.0],
        })
    }

    /// Sparse periodic problem: gradient P/2 at phase 1, -1 at phase P-2,
    /// zero elsewhere. Feasible box [0, 1], optimum x* = 0.
    pub fn sparse2(p: u32) -> Result<Self> {
        if p <= 3 {
            return Err(Error::InvalidParameter(format!(
                "sparse2 requires P > 3, got {p}"
            )));
        }
        Ok(Self {
            kind: ProblemKind::Sparse2,
            p,
            delta: 0.0,
            noise_sigma: 0.0,
            dims: 1,
            bounds: BoxConstraint::uniform(1, 0.0, 1.0),
            x_star: vec![0.0],
            x0_default: vec![0.5],
        })
    }

    /// f(x) = |x| with the subgradient 0 at the kink.
    pub fn abs_value() -> Self {
        Self {
            kind: ProblemKind::AbsValue,
            p: 0,
            delta: 0.0,
            noise_sigma: 0.0,
            dims: 1,
            bounds: BoxConstraint::unbounded(1),
            x_star: vec![0.0],
            x0_default: vec![100.0],
        }
    }

    /// f(x) = 0.5 ||x||^2 observed through additive N(0, sigma^2) noise per
    /// coordinate.
    pub fn noisy_quadratic(dims: usize, sigma: f64) -> Result<Self> {
        if sigma < 0.0 {
            return Err(Error::InvalidParameter(format!(
                "noisy_quadratic requires sigma >= 0, got {sigma}"
            )));
        }
        if dims == 0 {
            return Err(Error::InvalidParameter("dims must be >= 1".into()));
        }
        Ok(Self {
            kind: ProblemKind::NoisyQuadratic,
            p: 0,
            delta: 0.0,
            noise_sigma: sigma,
            dims,
            bounds: BoxConstraint::unbounded(dims),
            x_star: vec![0.0; dims],
            x0_default: vec![0.1; dims],
        })
    }

    pub fn from_kind(kind: ProblemKind, p: u32, delta: f64, sigma: f64, dims: usize) -> Result<Self> {
        match kind {
            ProblemKind::Periodic1 => Self::periodic1(p),
            ProblemKind::Stochastic1 => Self::stochastic1(p, delta),
            ProblemKind::Sparse2 => Self::sparse2(p),
            ProblemKind::AbsValue => Ok(Self::abs_value()),
            ProblemKind::NoisyQuadratic => Self::noisy_quadratic(dims, sigma),
        }
    }

    /// Write the gradient at step `t` (1-based) and point `x` into `out`.
    pub fn gradient_into(&self, t: u64, x: &[f64], rng: &mut LabRng, out: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dims);
        debug_assert_eq!(out.len(), self.dims);
        match self.kind {
            ProblemKind::Periodic1 => {
                out[0] = periodic1_value(t, self.p);
            }
            ProblemKind::Stochastic1 => {
                out[0] = stochastic1_value(self.p, self.delta, rng);
            }
            ProblemKind::Sparse2 => {
                out[0] = sparse2_value(t, self.p);
            }
            ProblemKind::AbsValue => {
                out[0] = grad_absvalue(x[0]);
            }
            ProblemKind::NoisyQuadratic => {
                for (o, &xi) in out.iter_mut().zip(x) {
                    *o = xi + self.noise_sigma * rng.standard_normal();
                }
            }
        }
    }

    pub fn gradient(&self, t: u64, x: &[f64], rng: &mut LabRng) -> Vec<f64> {
        let mut g = vec![0.0; self.dims];
        self.gradient_into(t, x, rng, &mut g);
        g
    }
}

/// One gradient observation, optionally with the loss value at the query
/// point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GradSample {
    pub g: Vec<f64>,
    pub t: u64,
    pub f_value: Option<f64>,
}

impl ProblemSpec {
    /// Draw a gradient observation together with the per-step loss where
    /// the problem defines one.
    pub fn sample(&self, t: u64, x: &[f64], rng: &mut LabRng) -> GradSample {
        let g = self.gradient(t, x, rng);
        let f_value = match self.kind {
            ProblemKind::Periodic1 => Some(if t % self.p as u64 == 1 {
                self.p as f64 * x[0]
            } else {
                -x[0]
            }),
            ProblemKind::Sparse2 => {
                let phase = t % self.p as u64;
                Some(if phase == 1 {
                    self.p as f64 / 2.0 * x[0]
                } else if phase == (self.p - 2) as u64 {
                    -x[0]
                } else {
                    0.0
                })
            }
            ProblemKind::AbsValue => Some(x[0].abs()),
            ProblemKind::NoisyQuadratic => {
                Some(0.5 * x.iter().map(|v| v * v).sum::<f64>())
            }
            // The realized loss depends on the coin flip, which the oracle
            // does not expose; only the gradient is observable.
            ProblemKind::Stochastic1 => None,
        };
        GradSample { g, t, f_value }
    }
}

fn periodic1_value(t: u64, p: u32) -> f64 {
    if t % p as u64 == 1 {
        p as f64
    } else {
        -1.0
    }
}

fn stochastic1_value(p: u32, delta: f64, rng: &mut LabRng) -> f64 {
    let p_plus = (1.0 + delta) / (p as f64 + 1.0);
    if rng.uniform() < p_plus {
        p as f64
    } else {
        -1.0
    }
}

fn sparse2_value(t: u64, p: u32) -> f64 {
    let phase = t % p as u64;
    if phase == 1 {
        p as f64 / 2.0
    } else if phase == (p - 2) as u64 {
        -1.0
    } else {
        0.0
    }
}

/// Gradient of the periodic counterexample: P if t mod P == 1, else -1.
pub fn grad_periodic1(t: u64, _x: f64, p: u32) -> Result<f64> {
    if p < 3 {
        return Err(Error::InvalidParameter(format!("P must be >= 3, got {p}")));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("t starts at 1".into()));
    }
    Ok(periodic1_value(t, p))
}

/// One draw of the stochastic counterexample gradient. E[g] = delta.
pub fn grad_stochastic1(_x: f64, p: u32, delta: f64, rng: &mut LabRng) -> Result<f64> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "delta must be in (0,1), got {delta}"
        )));
    }
    Ok(stochastic1_value(p, delta, rng))
}

/// Gradient of the sparse periodic problem: P/2 at phase 1, -1 at phase
/// P-2, zero otherwise.
pub fn grad_sparse2(t: u64, _x: f64, p: u32) -> Result<f64> {
    if p <= 3 {
        return Err(Error::InvalidParameter(format!("P must be > 3, got {p}")));
    }
    if t == 0 {
        return Err(Error::InvalidParameter("t starts at 1".into()));
    }
    Ok(sparse2_value(t, p))
}

/// Subgradient of |x|, choosing 0 at x = 0.
pub fn grad_absvalue(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Noisy gradient of 0.5 ||x||^2: x + sigma * xi, xi ~ N(0, I).
pub fn grad_noisy_quadratic(x: &[f64], sigma: f64, rng: &mut LabRng) -> Vec<f64> {
    x.iter().map(|&xi| xi + sigma * rng.standard_normal()).collect()
}
