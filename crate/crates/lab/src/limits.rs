//! Closed-form limits of the EMA accumulators on the periodic problems.
//!
//! On an exactly periodic gradient stream the accumulators (m, v, s)
//! approach a periodic orbit; each orbit value solves a linear fixed-point
//! equation over one period. This module evaluates those fixed points in
//! closed form and, independently, by direct simulation of the raw EMA
//! recursions (`simulate_problem1_orbit`, `simulate_problem2_orbit`). The
//! simulation never touches the optimizer step code, so agreement between
//! the two routes checks the algebra end to end.
//!
//! Conventions match [`crate::optim`]: the centered accumulator uses the
//! already-updated mean, `s_t = b2 s_{t-1} + (1-b2)(g_t - m_t)^2`. Relative
//! to centering on `m_{t-1}`, every per-step innovation picks up a factor
//! `b1^2`, which scales each s fixed point by `b1^2` and leaves all
//! boundary ratios unchanged.

use crate::{Error, Result};
use serde::Serialize;

/// Default cap on simulated periods before giving up on convergence.
pub const DEFAULT_MAX_PERIODS: u64 = 100_000;
/// Snapshot-to-snapshot tolerance that ends the simulation.
pub const DEFAULT_SNAPSHOT_TOL: f64 = 1e-12;

fn check_p1(p: u32) -> Result<()> {
    if p < 3 {
        return Err(Error::InvalidParameter(format!("P must be >= 3, got {p}")));
    }
    Ok(())
}

fn check_p2(p: u32) -> Result<()> {
    if p <= 3 {
        return Err(Error::InvalidParameter(format!("P must be > 3, got {p}")));
    }
    Ok(())
}

fn check_beta(name: &str, b: f64, allow_zero: bool) -> Result<()> {
    let lo_ok = if allow_zero { b >= 0.0 } else { b > 0.0 };
    if !(lo_ok && b < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "{name} must be in {}, got {b}",
            if allow_zero { "[0,1)" } else { "(0,1)" }
        )));
    }
    Ok(())
}

/// sum_{i=0}^{terms-1} r^i, with the removable singularity at r = 1 taken
/// by direct summation (the ratio form cancels badly near r = 1).
fn geometric_sum(r: f64, terms: u32) -> f64 {
    if (r - 1.0).abs() < 1e-8 {
        (0..terms).map(|i| r.powi(i as i32)).sum()
    } else {
        (1.0 - r.powi(terms as i32)) / (1.0 - r)
    }
}

/// Limit of m at period boundaries for the periodic counterexample:
/// ((P+1) b1^(P-1) - P b1^P - 1) / (1 - b1^P).
pub fn limit_m_problem1(p: u32, beta1: f64) -> Result<f64> {
    check_p1(p)?;
    check_beta("beta1", beta1, true)?;
    let pf = p as f64;
    let num = (pf + 1.0) * beta1.powi(p as i32 - 1) - pf * beta1.powi(p as i32) - 1.0;
    Ok(num / (1.0 - beta1.powi(p as i32)))
}

/// Limit of the centered accumulator at period boundaries for the periodic
/// counterexample. This is the smallest s value within a period, i.e. the
/// denominator that meets the spike gradient.
pub fn limit_s_problem1(p: u32, beta1: f64, beta2: f64) -> Result<f64> {
    check_p1(p)?;
    check_beta("beta1", beta1, true)?;
    check_beta("beta2", beta2, false)?;
    let pf = p as f64;
    let m_inf = limit_m_problem1(p, beta1)?;
    let a = pf - m_inf;
    let b = beta1 * a - (pf + 1.0);
    let geo = geometric_sum(beta1 * beta1 / beta2, p - 1);
    let fixed_point = (1.0 - beta2) / (1.0 - beta2.powi(p as i32))
        * (beta2.powi(p as i32 - 1) * a * a + b * b * beta2.powi(p as i32 - 2) * geo);
    // Innovations are centered on the updated mean, hence the b1^2 factor.
    Ok(beta1 * beta1 * fixed_point)
}

/// Closed-form limits for the sparse periodic problem: accumulator values at
/// the period boundary plus the four denominator values flanking the two
/// non-zero gradients. `s_plus`/`v_plus` meet the +P/2 spike, `s_minus`/
/// `v_minus` meet the -1 gradient.
#[derive(Debug, Clone, Serialize)]
pub struct LimitReport {
    pub p: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub m_inf: f64,
    pub v_inf: f64,
    pub s_inf: f64,
    pub s_plus: f64,
    pub s_minus: f64,
    pub v_plus: f64,
    pub v_minus: f64,
}

/// Gradient of the sparse problem by phase (index mod P).
fn sparse_grad(phase: u32, p: u32) -> f64 {
    if phase == 1 {
        p as f64 / 2.0
    } else if phase == p - 2 {
        -1.0
    } else {
        0.0
    }
}

pub fn limits_problem2(p: u32, beta1: f64, beta2: f64) -> Result<LimitReport> {
    check_p2(p)?;
    check_beta("beta1", beta1, true)?;
    check_beta("beta2", beta2, false)?;
    let pf = p as f64;
    let (b1, b2) = (beta1, beta2);

    let m_inf = (1.0 - b1) / (1.0 - b1.powi(p as i32)) * (pf / 2.0 * b1.powi(p as i32 - 1) - b1 * b1);

    // Roll the mean through one period to get every per-step innovation.
    // innov[j] = (g_j - m_j)^2 at limit index kP + j, j = 1..=P.
    let mut innov = vec![0.0; p as usize + 1];
    let mut m = m_inf;
    for j in 1..=p {
        let g = sparse_grad(j % p, p);
        m = b1 * m + (1.0 - b1) * g;
        let c = g - m;
        innov[j as usize] = c * c;
    }

    let norm = (1.0 - b2) / (1.0 - b2.powi(p as i32));
    let v_inf = norm * (pf * pf / 4.0 * b2.powi(p as i32 - 1) + b2 * b2);

    // Orbit value at any phase is the fixed point of one period of the
    // recursion: a beta2-weighted sum of the P innovations ending at that
    // phase. All terms are non-negative, so unlike inverting the recursion
    // step by step (divide by beta2, subtract the innovation), this form
    // cannot cancel, which matters in the corners where the orbit values
    // are many orders of magnitude apart.
    let inn = |phase: u32| innov[if phase == 0 { p } else { phase } as usize];
    let orbit_s = |q: u32| {
        let mut acc = 0.0;
        for i in 0..p {
            acc += b2.powi(i as i32) * inn((q + p - i) % p);
        }
        norm * acc
    };
    let orbit_v = |q: u32| {
        let mut acc = 0.0;
        for i in 0..p {
            let g = sparse_grad((q + p - i) % p, p);
            acc += b2.powi(i as i32) * g * g;
        }
        norm * acc
    };
    let s_inf = orbit_s(0);

    Ok(LimitReport {
        p,
        beta1,
        beta2,
        m_inf,
        v_inf,
        s_inf,
        s_plus: s_inf,
        s_minus: orbit_s(p - 3),
        v_plus: v_inf,
        v_minus: orbit_v(p - 3),
    })
}

/// Net-progress condition on the sparse problem: one +P/2 update against one
/// -1 update per period requires (denominator at spike)/(denominator at -1)
/// to stay below P^2/4.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RatioVerdict {
    pub ratio_s: f64,
    pub ratio_v: f64,
    pub s_ok: bool,
    pub v_ok: bool,
}

pub fn convergence_ratio_test(report: &LimitReport, p: u32) -> RatioVerdict {
    let bound = (p as f64) * (p as f64) / 4.0;
    let ratio = |plus: f64, minus: f64| {
        if minus == 0.0 {
            f64::INFINITY
        } else {
            plus / minus
        }
    };
    let ratio_s = ratio(report.s_plus, report.s_minus);
    let ratio_v = ratio(report.v_plus, report.v_minus);
    RatioVerdict {
        ratio_s,
        ratio_v,
        s_ok: ratio_s.is_finite() && ratio_s < bound,
        v_ok: ratio_v.is_finite() && ratio_v < bound,
    }
}

/// Periodic orbit of the raw EMA recursions, obtained by simulation.
/// `m[j]`, `v[j]`, `s[j]` hold the limit values at index kP + j; index 0 is
/// the period boundary.
#[derive(Debug, Clone, Serialize)]
pub struct SimulatedOrbit {
    pub p: u32,
    pub periods_run: u64,
    pub converged: bool,
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub s: Vec<f64>,
}

fn simulate_orbit<G: Fn(u32) -> f64>(
    p: u32,
    beta1: f64,
    beta2: f64,
    grad_by_phase: G,
    max_periods: u64,
    tol: f64,
) -> SimulatedOrbit {
    let (b1, b2) = (beta1, beta2);
    let (mut m, mut v, mut s) = (0.0f64, 0.0f64, 0.0f64);
    let mut prev = (f64::NAN, f64::NAN, f64::NAN);
    let mut periods = 0u64;
    let mut converged = false;
    while periods < max_periods {
        for j in 1..=p {
            let g = grad_by_phase(j % p);
            m = b1 * m + (1.0 - b1) * g;
            v = b2 * v + (1.0 - b2) * g * g;
            let c = g - m;
            s = b2 * s + (1.0 - b2) * c * c;
        }
        periods += 1;
        let diff = (m - prev.0).abs() + (v - prev.1).abs() + (s - prev.2).abs();
        prev = (m, v, s);
        if diff < tol {
            converged = true;
            break;
        }
    }
    // One more period to capture the orbit; index 0 is the boundary state.
    let n = p as usize;
    let (mut om, mut ov, mut os) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    om[0] = m;
    ov[0] = v;
    os[0] = s;
    for j in 1..p {
        let g = grad_by_phase(j % p);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let c = g - m;
        s = b2 * s + (1.0 - b2) * c * c;
        om[j as usize] = m;
        ov[j as usize] = v;
        os[j as usize] = s;
    }
    SimulatedOrbit {
        p,
        periods_run: periods,
        converged,
        m: om,
        v: ov,
        s: os,
    }
}

/// Simulate the EMA orbit for the periodic counterexample (gradient P at
/// phase 1, -1 elsewhere).
pub fn simulate_problem1_orbit(
    p: u32,
    beta1: f64,
    beta2: f64,
    max_periods: u64,
    tol: f64,
) -> Result<SimulatedOrbit> {
    check_p1(p)?;
    check_beta("beta1", beta1, true)?;
    check_beta("beta2", beta2, false)?;
    let pf = p as f64;
    Ok(simulate_orbit(
        p,
        beta1,
        beta2,
        move |phase| if phase == 1 { pf } else { -1.0 },
        max_periods,
        tol,
    ))
}

/// Simulate the EMA orbit for the sparse problem (P/2 at phase 1, -1 at
/// phase P-2, zero elsewhere).
pub fn simulate_problem2_orbit(
    p: u32,
    beta1: f64,
    beta2: f64,
    max_periods: u64,
    tol: f64,
) -> Result<SimulatedOrbit> {
    check_p2(p)?;
    check_beta("beta1", beta1, true)?;
    check_beta("beta2", beta2, false)?;
    Ok(simulate_orbit(
        p,
        beta1,
        beta2,
        move |phase| sparse_grad(phase, p),
        max_periods,
        tol,
    ))
}
