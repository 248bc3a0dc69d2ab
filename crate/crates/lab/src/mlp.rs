//! Two-layer MLP trained by manual backprop on synthetic data.
//!
//! The network (ReLU hidden layer, softmax cross-entropy output) exists to
//! track denominator statistics: the mean of the second-momentum accumulator
//! per training step, for centered vs uncentered optimizers. Data is a
//! two-class Gaussian mixture so runs are fully self-contained and seeded.

use crate::optim::{step_with_info, BoxConstraint, HyperParams, OptimizerState, Variant};
use crate::rng::LabRng;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MlpConfig {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub n_samples: usize,
    pub epochs: usize,
    pub batch: usize,
    pub seed: u64,
    pub hp: HyperParams,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            in_dim: 20,
            hidden_dim: 32,
            out_dim: 2,
            n_samples: 2000,
            epochs: 3,
            batch: 64,
            seed: 0,
            // The async variants' first step divides by eps alone; an eps
            // of 1e-2 caps that step at a tenth of the gradient.
            hp: HyperParams::new(Variant::AcProp, 1e-3).with_eps(1e-2),
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<()> {
        if self.in_dim == 0 || self.hidden_dim == 0 || self.out_dim == 0 {
            return Err(Error::InvalidParameter("layer dims must be >= 1".into()));
        }
        if self.batch == 0 || self.batch > self.n_samples {
            return Err(Error::InvalidParameter(format!(
                "batch ({}) must be in 1..=n_samples ({})",
                self.batch, self.n_samples
            )));
        }
        if self.epochs == 0 {
            return Err(Error::InvalidParameter("epochs must be >= 1".into()));
        }
        self.hp.validate()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<usize>,
}

/// Two balanced Gaussian clusters at +/- separation/2 along a random unit
/// direction, unit isotropic noise.
pub fn gaussian_mixture(n: usize, dim: usize, separation: f64, seed: u64) -> Dataset {
    let mut rng = LabRng::substream(seed, &[0x6d69_7874]);
    let mut dir: Vec<f64> = (0..dim).map(|_| rng.standard_normal()).collect();
    let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt();
    for d in &mut dir {
        *d /= norm;
    }
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = i % 2;
        let sign = if label == 0 { -1.0 } else { 1.0 };
        let sample: Vec<f64> = dir
            .iter()
            .map(|&d| sign * d * separation / 2.0 + rng.standard_normal())
            .collect();
        x.push(sample);
        y.push(label);
    }
    Dataset { x, y }
}

/// Parameter layout of the two-layer network inside one flat vector:
/// [w1 (in*hidden), b1 (hidden), w2 (hidden*out), b2 (out)].
#[derive(Debug, Clone)]
pub struct Mlp {
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
}

impl Mlp {
    pub fn new(in_dim: usize, hidden_dim: usize, out_dim: usize) -> Self {
        Self {
            in_dim,
            hidden_dim,
            out_dim,
        }
    }

    pub fn n_params(&self) -> usize {
        self.in_dim * self.hidden_dim + self.hidden_dim + self.hidden_dim * self.out_dim + self.out_dim
    }

    fn offsets(&self) -> (usize, usize, usize) {
        let w1 = self.in_dim * self.hidden_dim;
        let b1 = w1 + self.hidden_dim;
        let w2 = b1 + self.hidden_dim * self.out_dim;
        (w1, b1, w2)
    }

    /// Scaled-uniform init, bounds sqrt(6 / (fan_in + fan_out)) per layer.
    pub fn init_params(&self, seed: u64) -> Vec<f64> {
        let mut rng = LabRng::substream(seed, &[0x696e_6974]);
        let mut params = vec![0.0; self.n_params()];
        let (w1_end, b1_end, w2_end) = self.offsets();
        let a1 = (6.0 / (self.in_dim + self.hidden_dim) as f64).sqrt();
        let a2 = (6.0 / (self.hidden_dim + self.out_dim) as f64).sqrt();
        for p in &mut params[..w1_end] {
            *p = (rng.uniform() * 2.0 - 1.0) * a1;
        }
        for p in &mut params[b1_end..w2_end] {
            *p = (rng.uniform() * 2.0 - 1.0) * a2;
        }
        params
    }

    /// Mean cross-entropy of a batch; forward pass only.
    pub fn loss(&self, params: &[f64], xb: &[&Vec<f64>], yb: &[usize]) -> f64 {
        let mut grad = Vec::new();
        self.loss_grad_impl(params, xb, yb, &mut grad, false)
    }

    /// Mean cross-entropy and its gradient (manual backprop). `grad` is
    /// resized to the parameter count.
    pub fn loss_grad(&self, params: &[f64], xb: &[&Vec<f64>], yb: &[usize], grad: &mut Vec<f64>) -> f64 {
        self.loss_grad_impl(params, xb, yb, grad, true)
    }

    fn loss_grad_impl(
        &self,
        params: &[f64],
        xb: &[&Vec<f64>],
        yb: &[usize],
        grad: &mut Vec<f64>,
        want_grad: bool,
    ) -> f64 {
        let (w1_end, b1_end, w2_end) = self.offsets();
        let (w1, rest) = params.split_at(w1_end);
        let (b1, rest) = rest.split_at(self.hidden_dim);
        let (w2, b2) = rest.split_at(self.hidden_dim * self.out_dim);
        debug_assert_eq!(b2.len(), self.out_dim);
        let _ = (b1_end, w2_end);

        if want_grad {
            grad.clear();
            grad.resize(self.n_params(), 0.0);
        }
        let scale = 1.0 / xb.len() as f64;
        let mut hidden = vec![0.0; self.hidden_dim];
        let mut pre = vec![0.0; self.hidden_dim];
        let mut logits = vec![0.0; self.out_dim];
        let mut probs = vec![0.0; self.out_dim];
        let mut total = 0.0;

        for (x, &y) in xb.iter().zip(yb) {
            for j in 0..self.hidden_dim {
                let mut acc = b1[j];
                for i in 0..self.in_dim {
                    acc += x[i] * w1[i * self.hidden_dim + j];
                }
                pre[j] = acc;
                hidden[j] = acc.max(0.0);
            }
            for k in 0..self.out_dim {
                let mut acc = b2[k];
                for j in 0..self.hidden_dim {
                    acc += hidden[j] * w2[j * self.out_dim + k];
                }
                logits[k] = acc;
            }
            let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut z = 0.0;
            for k in 0..self.out_dim {
                probs[k] = (logits[k] - max).exp();
                z += probs[k];
            }
            for p in &mut probs {
                *p /= z;
            }
            total += z.ln() + max - logits[y];

            if want_grad {
                let (gw1, grest) = grad.split_at_mut(w1_end);
                let (gb1, grest) = grest.split_at_mut(self.hidden_dim);
                let (gw2, gb2) = grest.split_at_mut(self.hidden_dim * self.out_dim);
                for k in 0..self.out_dim {
                    let dl = (probs[k] - if k == y { 1.0 } else { 0.0 }) * scale;
                    gb2[k] += dl;
                    for j in 0..self.hidden_dim {
                        gw2[j * self.out_dim + k] += hidden[j] * dl;
                    }
                }
                for j in 0..self.hidden_dim {
                    if pre[j] <= 0.0 {
                        continue;
                    }
                    let mut dh = 0.0;
                    for k in 0..self.out_dim {
                        dh += w2[j * self.out_dim + k] * (probs[k] - if k == y { 1.0 } else { 0.0 });
                    }
                    let dpre = dh * scale;
                    gb1[j] += dpre;
                    for i in 0..self.in_dim {
                        gw1[i * self.hidden_dim + j] += x[i] * dpre;
                    }
                }
            }
        }
        total * scale
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct DenomPoint {
    pub step: u64,
    /// Mean of the second-momentum accumulator after this step.
    pub mean_second: f64,
    pub loss: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct DenomTrace {
    pub variant: Variant,
    pub points: Vec<DenomPoint>,
    /// Loss left the finite range; training stopped early.
    pub diverged: bool,
}

pub struct TrainOutput {
    pub trace: DenomTrace,
    /// Recorded per-step gradient vectors (only when requested).
    pub grads: Vec<Vec<f64>>,
    pub final_params: Vec<f64>,
}

/// Train the MLP with one optimizer variant, tracking the accumulator mean
/// and loss per step. Deterministic under the config seed.
pub fn train_mlp(cfg: &MlpConfig, variant: Variant) -> Result<DenomTrace> {
    train_mlp_full(cfg, variant, false).map(|out| out.trace)
}

pub fn train_mlp_full(cfg: &MlpConfig, variant: Variant, keep_grads: bool) -> Result<TrainOutput> {
    cfg.validate()?;
    let data = gaussian_mixture(cfg.n_samples, cfg.in_dim, 2.0, cfg.seed);
    let model = Mlp::new(cfg.in_dim, cfg.hidden_dim, cfg.out_dim);
    let params = model.init_params(cfg.seed);
    let mut hp = cfg.hp.clone();
    hp.variant = variant;
    let bounds = BoxConstraint::unbounded(model.n_params());
    let mut state = OptimizerState::new(params, &hp);
    let mut grad = Vec::new();
    let mut points = Vec::new();
    let mut grads = Vec::new();
    let mut diverged = false;
    let mut step_no = 0u64;

    let mut order: Vec<usize> = (0..cfg.n_samples).collect();
    'outer: for epoch in 0..cfg.epochs {
        shuffle(&mut order, &mut LabRng::substream(cfg.seed, &[0x7368_7566, epoch as u64]));
        for chunk in order.chunks(cfg.batch) {
            let xb: Vec<&Vec<f64>> = chunk.iter().map(|&i| &data.x[i]).collect();
            let yb: Vec<usize> = chunk.iter().map(|&i| data.y[i]).collect();
            let loss = model.loss_grad(&state.x, &xb, &yb, &mut grad);
            if !loss.is_finite() {
                diverged = true;
                break 'outer;
            }
            if keep_grads {
                grads.push(grad.clone());
            }
            let (next, info) = step_with_info(state, &grad, &hp, &bounds)?;
            state = next;
            step_no += 1;
            points.push(DenomPoint {
                step: step_no,
                mean_second: info.second_mean,
                loss,
            });
        }
    }
    Ok(TrainOutput {
        trace: DenomTrace {
            variant,
            points,
            diverged,
        },
        grads,
        final_params: state.x,
    })
}

fn shuffle(order: &mut [usize], rng: &mut LabRng) {
    for i in (1..order.len()).rev() {
        let j = (rng.next_u64() % (i as u64 + 1)) as usize;
        order.swap(i, j);
    }
}

/// Per-step coordinate means of both accumulator recursions driven by the
/// same gradient stream: v (EMA of g^2) and s (EMA of (g - m)^2 with m the
/// updated gradient EMA). Replaying one stream into both isolates the
/// accumulator comparison from trajectory divergence.
pub fn replay_accumulators(grads: &[Vec<f64>], beta1: f64, beta2: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(!grads.is_empty());
    let dims = grads[0].len();
    let (mut m, mut v, mut s) = (vec![0.0; dims], vec![0.0; dims], vec![0.0; dims]);
    let mut v_means = Vec::with_capacity(grads.len());
    let mut s_means = Vec::with_capacity(grads.len());
    for g in grads {
        for i in 0..dims {
            m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
            v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
            let c = g[i] - m[i];
            s[i] = beta2 * s[i] + (1.0 - beta2) * c * c;
        }
        v_means.push(v.iter().sum::<f64>() / dims as f64);
        s_means.push(s.iter().sum::<f64>() / dims as f64);
    }
    (v_means, s_means)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_cfg() -> MlpConfig {
        MlpConfig {
            in_dim: 8,
            hidden_dim: 10,
            out_dim: 2,
            n_samples: 200,
            epochs: 2,
            batch: 32,
            seed: 3,
            hp: HyperParams::new(Variant::AcProp, 1e-3).with_eps(1e-2),
        }
    }

    #[test]
    fn backprop_matches_central_differences() {
        let cfg = small_cfg();
        let data = gaussian_mixture(32, cfg.in_dim, 2.0, 5);
        let model = Mlp::new(cfg.in_dim, cfg.hidden_dim, cfg.out_dim);
        let params = model.init_params(5);
        let xb: Vec<&Vec<f64>> = data.x.iter().collect();
        let yb = data.y.clone();
        let mut grad = Vec::new();
        model.loss_grad(&params, &xb, &yb, &mut grad);

        let (w1_end, b1_end, w2_end) = (
            cfg.in_dim * cfg.hidden_dim,
            cfg.in_dim * cfg.hidden_dim + cfg.hidden_dim,
            cfg.in_dim * cfg.hidden_dim + cfg.hidden_dim + cfg.hidden_dim * cfg.out_dim,
        );
        let layers: [(usize, usize); 4] = [
            (0, w1_end),
            (w1_end, b1_end),
            (b1_end, w2_end),
            (w2_end, model.n_params()),
        ];
        let mut rng = LabRng::new(11);
        let h = 1e-5;
        for (lo, hi) in layers {
            for _ in 0..10 {
                let i = lo + (rng.next_u64() as usize) % (hi - lo);
                let mut plus = params.clone();
                plus[i] += h;
                let mut minus = params.clone();
                minus[i] -= h;
                let numeric = (model.loss(&plus, &xb, &yb) - model.loss(&minus, &xb, &yb)) / (2.0 * h);
                let analytic = grad[i];
                let denom = analytic.abs().max(numeric.abs()).max(1.0);
                assert!(
                    (analytic - numeric).abs() <= 1e-6 * denom,
                    "coord {i}: analytic {analytic} vs numeric {numeric}"
                );
            }
        }
    }

    #[test]
    fn loss_decreases_for_all_variants() {
        let cfg = small_cfg();
        for variant in [
            Variant::Sgdm,
            Variant::RmsProp,
            Variant::Adam,
            Variant::AmsGrad,
            Variant::AdaBelief,
            Variant::AdaShift,
            Variant::AcProp,
        ] {
            let trace = train_mlp(&cfg, variant).unwrap();
            assert!(!trace.diverged, "{variant} diverged");
            let k = trace.points.len() / 4;
            let head: f64 = trace.points[..k].iter().map(|p| p.loss).sum::<f64>() / k as f64;
            let tail: f64 = trace.points[trace.points.len() - k..]
                .iter()
                .map(|p| p.loss)
                .sum::<f64>()
                / k as f64;
            assert!(tail < head, "{variant}: loss {head} -> {tail}");
        }
    }

    #[test]
    fn replay_centered_below_uncentered_on_training_stream() {
        let cfg = small_cfg();
        let out = train_mlp_full(&cfg, Variant::AcProp, true).unwrap();
        let (v_means, s_means) = replay_accumulators(&out.grads, cfg.hp.beta1, cfg.hp.beta2);
        let first_epoch = out.grads.len() / cfg.epochs;
        let v_bar: f64 = v_means[..first_epoch].iter().sum::<f64>() / first_epoch as f64;
        let s_bar: f64 = s_means[..first_epoch].iter().sum::<f64>() / first_epoch as f64;
        assert!(
            s_bar <= v_bar,
            "centered mean {s_bar} above uncentered {v_bar} on identical stream"
        );
    }

    #[test]
    fn constant_gradient_direction_keeps_centered_accumulator_near_zero() {
        // Noise-free constant stream: s sees only the vanishing gap between
        // g and its EMA, so it never grows past a sliver of g^2.
        let g = vec![vec![2.0, -1.0, 0.5]; 200];
        let (v_means, s_means) = replay_accumulators(&g, 0.9, 0.999);
        let g_sq_mean = (4.0 + 1.0 + 0.25) / 3.0;
        let s_peak = s_means.iter().cloned().fold(0.0, f64::max);
        assert!(s_peak < 0.05 * g_sq_mean, "s peak {s_peak}");
        assert!(v_means.last().unwrap() > s_means.last().unwrap());
    }

    /// Two live runs, same data/seed/lr: the centered optimizer's tracked
    /// accumulator stays below the uncentered one's over the early phase.
    /// Needs the full-size run: AdaShift's accumulator lags one step (the
    /// first gradient is only evicted at step two), so a handful of steps
    /// cannot average that edge away.
    #[test]
    fn early_phase_centered_accumulator_below_uncentered_across_runs() {
        let cfg = MlpConfig::default();
        let centered = train_mlp(&cfg, Variant::AcProp).unwrap();
        let uncentered = train_mlp(&cfg, Variant::AdaShift).unwrap();
        let k = (centered.points.len() / 10).max(1);
        let s_early: f64 =
            centered.points[..k].iter().map(|p| p.mean_second).sum::<f64>() / k as f64;
        let v_early: f64 =
            uncentered.points[..k].iter().map(|p| p.mean_second).sum::<f64>() / k as f64;
        assert!(
            s_early <= v_early,
            "early mean s {s_early:.4e} above early mean v {v_early:.4e}"
        );
    }

    #[test]
    fn training_is_deterministic() {
        let cfg = small_cfg();
        let a = train_mlp(&cfg, Variant::Adam).unwrap();
        let b = train_mlp(&cfg, Variant::Adam).unwrap();
        let pa: Vec<f64> = a.points.iter().map(|p| p.loss).collect();
        let pb: Vec<f64> = b.points.iter().map(|p| p.loss).collect();
        assert_eq!(pa, pb);
    }

    #[test]
    fn config_validation() {
        let mut cfg = small_cfg();
        cfg.batch = 0;
        assert!(cfg.validate().is_err());
        let mut cfg = small_cfg();
        cfg.batch = cfg.n_samples + 1;
        assert!(cfg.validate().is_err());
    }
}
