//! Optimizer update rules as pure step functions.
//!
//! Seven variants share one state layout: a parameter vector, an EMA of
//! gradients `m`, a second-momentum accumulator (`v` of g^2 for the
//! uncentered variants, `s` of (g - m)^2 for the centered ones), a running
//! max for AMSGrad, and a delay ring buffer for AdaShift.
//!
//! Two conventions are fixed here and relied on by the closed-form limits in
//! [`crate::limits`]:
//!
//! - The centered accumulator update uses the *already updated* mean:
//!   `s_t = b2 * s_{t-1} + (1 - b2) * (g_t - m_t)^2` with
//!   `m_t = b1 * m_{t-1} + (1 - b1) * g_t`. With b1 = 0 this makes `s`
//!   identically zero on any gradient stream.
//! - ACProp divides by the *previous* accumulator: the step-t parameter
//!   update reads `s_{t-1}`, and only afterwards are `m` and `s` advanced.
//!   The step-t denominator is therefore a constant function of `g_t`.
//!
//! AdaShift keeps the last `n` gradients in a ring buffer; the numerator is
//! the oldest buffered gradient and the denominator EMA only ever sees
//! gradients already evicted from the buffer. The parameter is not touched
//! until the buffer is full (`t >= n`).

#![allow(clippy::needless_range_loop)] // multi-array indexed updates
use crate::problems::ProblemSpec;
use crate::rng::LabRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "sgdm")]
    Sgdm,
    #[serde(rename = "rmsprop")]
    RmsProp,
    #[serde(rename = "adam")]
    Adam,
    #[serde(rename = "amsgrad")]
    AmsGrad,
    #[serde(rename = "adabelief")]
    AdaBelief,
    #[serde(rename = "adashift")]
    AdaShift,
    #[serde(rename = "acprop")]
    AcProp,
}

impl Variant {
    pub const ALL: [Variant; 7] = [
        Variant::Sgdm,
        Variant::RmsProp,
        Variant::Adam,
        Variant::AmsGrad,
        Variant::AdaBelief,
        Variant::AdaShift,
        Variant::AcProp,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Sgdm => "sgdm",
            Variant::RmsProp => "rmsprop",
            Variant::Adam => "adam",
            Variant::AmsGrad => "amsgrad",
            Variant::AdaBelief => "adabelief",
            Variant::AdaShift => "adashift",
            Variant::AcProp => "acprop",
        }
    }

    /// True when the step-t denominator is independent of g_t.
    pub fn is_async(self) -> bool {
        matches!(self, Variant::AdaShift | Variant::AcProp)
    }
}

impl std::fmt::Display for Variant {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "sgdm" | "sgd" => Ok(Variant::Sgdm),
            "rmsprop" => Ok(Variant::RmsProp),
            "adam" => Ok(Variant::Adam),
            "amsgrad" => Ok(Variant::AmsGrad),
            "adabelief" => Ok(Variant::AdaBelief),
            "adashift" => Ok(Variant::AdaShift),
            "acprop" => Ok(Variant::AcProp),
            other => Err(Error::InvalidParameter(format!("unknown optimizer '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HyperParams {
    /// Base learning rate; the step-t rate is `alpha0 * t^-eta`.
    pub alpha0: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Learning-rate decay exponent, in [0.5, 1).
    pub eta: f64,
    /// AdaShift delay step (>= 1); ignored by other variants.
    pub delay_n: usize,
    pub bias_correction: bool,
    /// Denominator form: sqrt(a + eps) when true, sqrt(a) + eps when false.
    /// The closed-form analyses use the `false` form, so that is the default.
    pub eps_inside_sqrt: bool,
    pub variant: Variant,
}

impl HyperParams {
    pub fn new(variant: Variant, alpha0: f64) -> Self {
        Self {
            alpha0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            eta: 0.5,
            delay_n: 1,
            bias_correction: false,
            eps_inside_sqrt: false,
            variant,
        }
    }

    pub fn with_betas(mut self, beta1: f64, beta2: f64) -> Self {
        self.beta1 = beta1;
        self.beta2 = beta2;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps = eps;
        self
    }

    pub fn with_delay(mut self, n: usize) -> Self {
        self.delay_n = n;
        self
    }

    #[allow(clippy::neg_cmp_op_on_partial_ord)] // !(x > 0) also rejects NaN
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 0.0 && self.alpha0.is_finite()) {
            return Err(Error::InvalidParameter(format!("alpha0 must be > 0, got {}", self.alpha0)));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return Err(Error::InvalidParameter(format!("beta1 must be in [0,1), got {}", self.beta1)));
        }
        if !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidParameter(format!("beta2 must be in [0,1), got {}", self.beta2)));
        }
        if !(self.eps > 0.0) {
            return Err(Error::InvalidParameter(format!("eps must be > 0, got {}", self.eps)));
        }
        if !(0.5..1.0).contains(&self.eta) {
            return Err(Error::InvalidParameter(format!("eta must be in [0.5,1), got {}", self.eta)));
        }
        if self.delay_n == 0 {
            return Err(Error::InvalidParameter("delay_n must be >= 1".into()));
        }
        Ok(())
    }

    /// Learning rate for step t (1-based).
    pub fn lr_at(&self, t: u64) -> f64 {
        if self.eta == 0.5 {
            self.alpha0 / (t as f64).sqrt()
        } else {
            self.alpha0 * (t as f64).powf(-self.eta)
        }
    }

    /// Denominator value for one second-momentum entry.
    pub fn denom_value(&self, a: f64) -> f64 {
        if self.eps_inside_sqrt {
            (a + self.eps).sqrt()
        } else {
            a.sqrt() + self.eps
        }
    }
}

/// Element-wise box; `None` on a side means unbounded.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoxConstraint {
    pub lo: Option<Vec<f64>>,
    pub hi: Option<Vec<f64>>,
}

impl BoxConstraint {
    pub fn unbounded(_dims: usize) -> Self {
        Self { lo: None, hi: None }
    }

    pub fn uniform(dims: usize, lo: f64, hi: f64) -> Self {
        assert!(lo <= hi);
        Self {
            lo: Some(vec![lo; dims]),
            hi: Some(vec![hi; dims]),
        }
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        let lo_ok = self
            .lo
            .as_ref()
            .is_none_or(|lo| lo.iter().zip(x).all(|(&l, &xi)| xi >= l));
        let hi_ok = self
            .hi
            .as_ref()
            .is_none_or(|hi| hi.iter().zip(x).all(|(&h, &xi)| xi <= h));
        lo_ok && hi_ok
    }

    /// Element-wise clamp onto the box.
    pub fn project(&self, x: &mut [f64]) {
        if let Some(lo) = &self.lo {
            for (xi, &l) in x.iter_mut().zip(lo) {
                if *xi < l {
                    *xi = l;
                }
            }
        }
        if let Some(hi) = &self.hi {
            for (xi, &h) in x.iter_mut().zip(hi) {
                if *xi > h {
                    *xi = h;
                }
            }
        }
    }

    fn check_dims(&self, dims: usize) -> Result<()> {
        for side in [&self.lo, &self.hi].into_iter().flatten() {
            if side.len() != dims {
                return Err(Error::DimensionMismatch {
                    expected: dims,
                    got: side.len(),
                });
            }
        }
        if let (Some(lo), Some(hi)) = (&self.lo, &self.hi) {
            if lo.iter().zip(hi).any(|(l, h)| l > h) {
                return Err(Error::InvalidParameter("box has lo > hi".into()));
            }
        }
        Ok(())
    }
}

/// Ring buffer of the most recent gradients (AdaShift). Slot rotation is
/// derived from the step counter, so only the storage lives here.
#[derive(Debug, Clone, Default)]
struct DelayBuffer {
    slots: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub x: Vec<f64>,
    pub m: Vec<f64>,
    /// v_t for uncentered variants, s_t for centered ones.
    pub second: Vec<f64>,
    /// AMSGrad running element-wise max of `second`.
    pub second_max: Vec<f64>,
    delay: DelayBuffer,
    /// Steps taken so far; starts at 0.
    pub t: u64,
}

impl OptimizerState {
    pub fn new(x0: Vec<f64>, hp: &HyperParams) -> Self {
        let dims = x0.len();
        Self {
            x: x0,
            m: vec![0.0; dims],
            second: vec![0.0; dims],
            second_max: if hp.variant == Variant::AmsGrad {
                vec![0.0; dims]
            } else {
                Vec::new()
            },
            delay: DelayBuffer::default(),
            t: 0,
        }
    }

    pub fn dims(&self) -> usize {
        self.x.len()
    }

    /// Number of gradients currently buffered (AdaShift only).
    pub fn buffered(&self) -> usize {
        self.delay.slots.len()
    }
}

/// Coordinate-wise statistics of the denominator used in one x update.
#[derive(Debug, Clone, Copy)]
pub struct DenomStats {
    pub mean: f64,
    pub min: f64,
    pub max: f64,
}

/// Per-step bookkeeping surfaced to callers.
#[derive(Debug, Clone, Copy)]
pub struct StepOutcome {
    pub lr: f64,
    /// Denominator used in the x update; `None` when no division happened
    /// (SGDM, AdaShift warm-up).
    pub denom: Option<DenomStats>,
    /// False during AdaShift warm-up.
    pub x_updated: bool,
    /// Mean of the second-momentum accumulator after the step.
    pub second_mean: f64,
}

pub fn step(
    state: OptimizerState,
    g: &[f64],
    hp: &HyperParams,
    bounds: &BoxConstraint,
) -> Result<OptimizerState> {
    step_with_info(state, g, hp, bounds).map(|(s, _)| s)
}

/// One optimizer step. Consumes the state and returns the advanced state;
/// no buffers are reallocated, so driving a trajectory through this function
/// is allocation-free after the first step.
pub fn step_with_info(
    mut state: OptimizerState,
    g: &[f64],
    hp: &HyperParams,
    bounds: &BoxConstraint,
) -> Result<(OptimizerState, StepOutcome)> {
    hp.validate()?;
    let dims = state.x.len();
    if g.len() != dims {
        return Err(Error::DimensionMismatch {
            expected: dims,
            got: g.len(),
        });
    }
    bounds.check_dims(dims)?;
    if let Some(i) = g.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteGradient(i));
    }

    let t = state.t + 1;
    let lr = hp.lr_at(t);
    let (b1, b2) = (hp.beta1, hp.beta2);
    let mut denom_sum = 0.0;
    let mut denom_min = f64::INFINITY;
    let mut denom_max = f64::NEG_INFINITY;
    let mut x_updated = true;
    fn note_denom(d: f64, sum: &mut f64, lo: &mut f64, hi: &mut f64) {
        *sum += d;
        if d < *lo {
            *lo = d;
        }
        if d > *hi {
            *hi = d;
        }
    }

    match hp.variant {
        Variant::Sgdm => {
            let corr = if hp.bias_correction {
                1.0 - b1.powi(t as i32)
            } else {
                1.0
            };
            for i in 0..dims {
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
                state.x[i] -= lr * state.m[i] / corr;
            }
        }
        Variant::RmsProp => {
            let corr2 = correction(hp.bias_correction, b2, t);
            for i in 0..dims {
                state.second[i] = b2 * state.second[i] + (1.0 - b2) * g[i] * g[i];
                let d = hp.denom_value(state.second[i] / corr2);
                note_denom(d, &mut denom_sum, &mut denom_min, &mut denom_max);
                state.x[i] -= lr * g[i] / d;
            }
        }
        Variant::Adam => {
            let corr1 = correction(hp.bias_correction, b1, t);
            let corr2 = correction(hp.bias_correction, b2, t);
            for i in 0..dims {
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
                state.second[i] = b2 * state.second[i] + (1.0 - b2) * g[i] * g[i];
                let d = hp.denom_value(state.second[i] / corr2);
                note_denom(d, &mut denom_sum, &mut denom_min, &mut denom_max);
                state.x[i] -= lr * (state.m[i] / corr1) / d;
            }
        }
        Variant::AmsGrad => {
            let corr1 = correction(hp.bias_correction, b1, t);
            let corr2 = correction(hp.bias_correction, b2, t);
            for i in 0..dims {
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
                state.second[i] = b2 * state.second[i] + (1.0 - b2) * g[i] * g[i];
                if state.second[i] > state.second_max[i] {
                    state.second_max[i] = state.second[i];
                }
                let d = hp.denom_value(state.second_max[i] / corr2);
                note_denom(d, &mut denom_sum, &mut denom_min, &mut denom_max);
                state.x[i] -= lr * (state.m[i] / corr1) / d;
            }
        }
        Variant::AdaBelief => {
            let corr1 = correction(hp.bias_correction, b1, t);
            let corr2 = correction(hp.bias_correction, b2, t);
            for i in 0..dims {
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
                let centered = g[i] - state.m[i];
                state.second[i] = b2 * state.second[i] + (1.0 - b2) * centered * centered;
                let d = hp.denom_value(state.second[i] / corr2);
                note_denom(d, &mut denom_sum, &mut denom_min, &mut denom_max);
                state.x[i] -= lr * (state.m[i] / corr1) / d;
            }
        }
        Variant::AcProp => {
            // x first, against s_{t-1}; m and s advance afterwards.
            let corr2 = if hp.bias_correction && t > 1 {
                1.0 - b2.powi((t - 1) as i32)
            } else {
                1.0
            };
            for i in 0..dims {
                let d = hp.denom_value(state.second[i] / corr2);
                note_denom(d, &mut denom_sum, &mut denom_min, &mut denom_max);
                state.x[i] -= lr * g[i] / d;
            }
            for i in 0..dims {
                state.m[i] = b1 * state.m[i] + (1.0 - b1) * g[i];
                let centered = g[i] - state.m[i];
                state.second[i] = b2 * state.second[i] + (1.0 - b2) * centered * centered;
            }
        }
        Variant::AdaShift => {
            let n = hp.delay_n;
            let slot = ((t - 1) as usize) % n;
            if state.delay.slots.len() < n {
                state.delay.slots.push(g.to_vec());
            } else {
                // Evict g_{t-n} into the denominator EMA, then reuse the slot.
                for i in 0..dims {
                    let old = state.delay.slots[slot][i];
                    state.second[i] = b2 * state.second[i] + (1.0 - b2) * old * old;
                }
                state.delay.slots[slot].copy_from_slice(g);
            }
            if t >= n as u64 {
                let evicted = t.saturating_sub(n as u64);
                let corr2 = if hp.bias_correction && evicted > 0 {
                    1.0 - b2.powi(evicted as i32)
                } else {
                    1.0
                };
                let oldest = (t as usize) % n;
                for i in 0..dims {
                    let d = hp.denom_value(state.second[i] / corr2);
                    note_denom(d, &mut denom_sum, &mut denom_min, &mut denom_max);
                    state.x[i] -= lr * state.delay.slots[oldest][i] / d;
                }
            } else {
                x_updated = false;
            }
        }
    }

    if x_updated {
        bounds.project(&mut state.x);
        if state.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteState(t));
        }
    }
    state.t = t;

    let second_mean = state.second.iter().sum::<f64>() / dims as f64;
    let denom = if x_updated && hp.variant != Variant::Sgdm {
        Some(DenomStats {
            mean: denom_sum / dims as f64,
            min: denom_min,
            max: denom_max,
        })
    } else {
        None
    };
    Ok((
        state,
        StepOutcome {
            lr,
            denom,
            x_updated,
            second_mean,
        },
    ))
}

fn correction(on: bool, beta: f64, t: u64) -> f64 {
    if on {
        1.0 - beta.powi(t as i32)
    } else {
        1.0
    }
}

/// Drive `steps` optimizer steps against a problem oracle, invoking `visit`
/// after each step with (t, state, gradient, outcome).
pub fn run_with<F>(
    hp: &HyperParams,
    problem: &ProblemSpec,
    x0: &[f64],
    steps: u64,
    seed: u64,
    mut visit: F,
) -> Result<OptimizerState>
where
    F: FnMut(u64, &OptimizerState, &[f64], &StepOutcome),
{
    hp.validate()?;
    if x0.len() != problem.dims {
        return Err(Error::DimensionMismatch {
            expected: problem.dims,
            got: x0.len(),
        });
    }
    let mut state = OptimizerState::new(x0.to_vec(), hp);
    let mut rng = LabRng::new(seed);
    let mut g = vec![0.0; problem.dims];
    for t in 1..=steps {
        problem.gradient_into(t, &state.x, &mut rng, &mut g);
        let (next, info) = step_with_info(state, &g, hp, &problem.bounds)?;
        state = next;
        visit(t, &state, &g, &info);
    }
    Ok(state)
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryPoint {
    pub t: u64,
    pub x: Vec<f64>,
    pub g: Vec<f64>,
    pub denominator: Option<f64>,
    pub lr: f64,
    pub second_mean: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrajectoryRecord {
    pub points: Vec<TrajectoryPoint>,
    pub final_x: Vec<f64>,
    pub steps: u64,
    pub seed: u64,
}

/// Run a trajectory, recording every `stride`-th step (and always the last).
/// Deterministic given (hp, problem, x0, steps, seed).
pub fn run_trajectory(
    hp: &HyperParams,
    problem: &ProblemSpec,
    x0: &[f64],
    steps: u64,
    seed: u64,
    stride: u64,
) -> Result<TrajectoryRecord> {
    if steps < 1 {
        return Err(Error::InvalidParameter("steps must be >= 1".into()));
    }
    let stride = stride.max(1);
    let mut points = Vec::with_capacity((steps / stride + 2) as usize);
    let final_state = run_with(hp, problem, x0, steps, seed, |t, state, g, info| {
        if t % stride == 0 || t == steps || t == 1 {
            points.push(TrajectoryPoint {
                t,
                x: state.x.clone(),
                g: g.to_vec(),
                denominator: info.denom.map(|d| d.mean),
                lr: info.lr,
                second_mean: info.second_mean,
            });
        }
    })?;
    Ok(TrajectoryRecord {
        points,
        final_x: final_state.x,
        steps,
        seed,
    })
}
