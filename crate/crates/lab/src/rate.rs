//! Empirical convergence-rate measurement on the noisy quadratic.
//!
//! Runs an optimizer on f(x) = 0.5 ||x||^2 observed through Gaussian noise,
//! tracks the running mean of the true gradient norm squared at log-spaced
//! horizons, and fits a log-log slope. With the t^-0.5 schedule the bound
//! predicts a mixture of T^(eta-1) and T^(-eta) terms, so the acceptance
//! window for the slope is a band around -1/2 rather than an exact value.

use crate::optim::{run_with, HyperParams, Variant};
use crate::problems::ProblemSpec;
use crate::rng::{mix_seed, LabRng};
use crate::{Error, Result};
use serde::Serialize;

#[derive(Debug, Clone, Serialize)]
pub struct RateReport {
    pub variant: Variant,
    pub eta: f64,
    pub sigma: f64,
    pub dims: usize,
    pub seeds: u32,
    pub t_values: Vec<u64>,
    /// Running mean of ||grad f(x_t)||^2 up to each horizon, averaged over
    /// seeds.
    pub mean_grad_sq: Vec<f64>,
    pub fitted_slope: f64,
    /// Min/max observed preconditioner entries 1/denominator.
    pub c_l_est: f64,
    pub c_u_est: f64,
    /// Largest second-momentum entry seen (the definitional floor of C_l).
    pub max_second: f64,
    pub eps: f64,
}

/// Log-spaced integer horizons in [lo, hi], deduplicated, endpoints kept.
fn log_horizons(lo: u64, hi: u64, per_decade: usize) -> Vec<u64> {
    let n = ((hi as f64 / lo as f64).log10() * per_decade as f64).ceil() as usize + 1;
    let mut ts: Vec<u64> = (0..=n)
        .map(|i| {
            let f = (lo as f64).ln() + ((hi as f64).ln() - (lo as f64).ln()) * i as f64 / n as f64;
            f.exp().round() as u64
        })
        .collect();
    ts.push(hi);
    ts.sort_unstable();
    ts.dedup();
    ts.retain(|&t| t >= lo && t <= hi);
    ts
}

fn fit_loglog(ts: &[u64], ys: &[f64]) -> f64 {
    let n = ts.len() as f64;
    let xs: Vec<f64> = ts.iter().map(|&t| (t as f64).ln()).collect();
    let ls: Vec<f64> = ys.iter().map(|&y| y.max(1e-300).ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ls.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (x, y) in xs.iter().zip(&ls) {
        num += (x - mx) * (y - my);
        den += (x - mx) * (x - mx);
    }
    num / den
}

/// Measure the decay of the running mean of the true gradient norm.
/// Deterministic: seed i of `n_seeds` runs on a fixed substream and the
/// curves are averaged in seed order.
pub fn measure_rate(
    variant: Variant,
    hp: &HyperParams,
    sigma: f64,
    dims: usize,
    t_max: u64,
    n_seeds: u32,
) -> Result<RateReport> {
    hp.validate()?;
    if t_max < 1_000 {
        return Err(Error::InvalidParameter(format!("t_max must be >= 1000, got {t_max}")));
    }
    if n_seeds == 0 {
        return Err(Error::InvalidParameter("n_seeds must be >= 1".into()));
    }
    let problem = ProblemSpec::noisy_quadratic(dims, sigma)?;
    let x0 = problem.x0_default.clone();
    let horizons = log_horizons(100.min(t_max), t_max, 6);

    let mut mean_curve = vec![0.0f64; horizons.len()];
    let mut c_l = f64::INFINITY;
    let mut c_u = f64::NEG_INFINITY;
    let mut max_second = 0.0f64;

    for seed_idx in 0..n_seeds {
        let seed = mix_seed(0x7261_7465, seed_idx as u64);
        let mut cum = 0.0f64;
        // Gradient for step t is taken at the pre-step iterate.
        let mut pre_sq: f64 = x0.iter().map(|v| v * v).sum();
        let mut next = 0usize;
        // The first step divides by denom(second = 0).
        c_u = c_u.max(1.0 / hp.denom_value(0.0));
        run_with(hp, &problem, &x0, t_max, seed, |t, state, _, info| {
            cum += pre_sq;
            pre_sq = state.x.iter().map(|v| v * v).sum();
            if let Some(d) = info.denom {
                c_l = c_l.min(1.0 / d.max);
                c_u = c_u.max(1.0 / d.min);
            }
            for &s in &state.second {
                if s > max_second {
                    max_second = s;
                }
            }
            while next < horizons.len() && horizons[next] == t {
                mean_curve[next] += cum / t as f64;
                next += 1;
            }
        })?;
    }
    for v in &mut mean_curve {
        *v /= n_seeds as f64;
    }
    let fitted_slope = fit_loglog(&horizons, &mean_curve);
    Ok(RateReport {
        variant,
        eta: hp.eta,
        sigma,
        dims,
        seeds: n_seeds,
        t_values: horizons,
        mean_grad_sq: mean_curve,
        fitted_slope,
        c_l_est: c_l,
        c_u_est: c_u,
        max_second,
        eps: hp.eps,
    })
}

/// The two regret-constant bounds under a stationary gradient stream with
/// mean mu and variance sigma^2: the uncentered accumulator settles near
/// mu^2 + sigma^2, the centered one near sigma^2.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ConstantsReport {
    pub inv_cl_uncentered: f64,
    pub inv_cl_centered: f64,
}

#[allow(clippy::neg_cmp_op_on_partial_ord)] // !(eps > 0) also rejects NaN
pub fn constants_compare(sigma: f64, mu: f64, eps: f64) -> Result<ConstantsReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidParameter("eps must be > 0".into()));
    }
    Ok(ConstantsReport {
        inv_cl_uncentered: (mu * mu + sigma * sigma).sqrt() + eps,
        inv_cl_centered: (sigma * sigma).sqrt() + eps,
    })
}

/// Time-averaged accumulator values under an i.i.d. N(mu, sigma^2) gradient
/// stream, replayed into both recursions. The centered mean is not exactly
/// sigma^2: the gradient EMA has variance of its own and the innovation is
/// damped by beta1^2, so with beta1 = 0.9 the stationary mean sits about
/// 15% under sigma^2 (beta1^2 * 2 / (1 + beta1) of it).
pub fn stationary_second_moments(
    mu: f64,
    sigma: f64,
    beta1: f64,
    beta2: f64,
    steps: u64,
    burn_in: u64,
    seed: u64,
) -> (f64, f64) {
    assert!(burn_in < steps);
    let mut rng = LabRng::new(seed);
    let (mut m, mut v, mut s) = (0.0f64, 0.0f64, 0.0f64);
    let (mut v_acc, mut s_acc) = (0.0f64, 0.0f64);
    for t in 1..=steps {
        let g = rng.normal(mu, sigma);
        m = beta1 * m + (1.0 - beta1) * g;
        v = beta2 * v + (1.0 - beta2) * g * g;
        let c = g - m;
        s = beta2 * s + (1.0 - beta2) * c * c;
        if t > burn_in {
            v_acc += v;
            s_acc += s;
        }
    }
    let n = (steps - burn_in) as f64;
    (v_acc / n, s_acc / n)
}
