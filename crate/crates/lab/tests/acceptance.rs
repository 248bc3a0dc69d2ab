//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them). Tolerances,
//! grids and protocols are pinned here, not configurable.

use acprop_lab::limits::{
    convergence_ratio_test, limit_m_problem1, limit_s_problem1, limits_problem2,
    simulate_problem1_orbit, simulate_problem2_orbit,
};
use acprop_lab::mlp::{replay_accumulators, train_mlp_full, MlpConfig};
use acprop_lab::optim::{
    run_trajectory, step_with_info, BoxConstraint, HyperParams, OptimizerState, Variant,
};
use acprop_lab::problems::{ProblemKind, ProblemSpec};
use acprop_lab::rate::{constants_compare, measure_rate, stationary_second_moments};
use acprop_lab::rng::LabRng;
use acprop_lab::series::{eta_direct, eta_euler, harmonic_sum_check};
use acprop_lab::sweep::{
    boundary_extract, converge_count, judge_cell, run_sweep, CellVerdict, SweepGrid, Verdict,
};
use std::sync::OnceLock;

const BETA1_SLICES: [f64; 3] = [0.5, 0.7, 0.9];
const MASTER_SEED: u64 = 2024;

/// Problem-1 verdicts for all four optimizers on the full figure protocol,
/// shared between criteria 1 and 2.
fn problem1_grid_verdicts() -> &'static Vec<CellVerdict> {
    static CELLS: OnceLock<Vec<CellVerdict>> = OnceLock::new();
    CELLS.get_or_init(|| {
        let mut all = Vec::new();
        for beta1 in BETA1_SLICES {
            let grid = SweepGrid::new(
                ProblemKind::Periodic1,
                beta1,
                vec![Variant::AcProp, Variant::AdaShift, Variant::RmsProp, Variant::Adam],
                MASTER_SEED,
            );
            all.extend(run_sweep(&grid).expect("sweep"));
        }
        all
    })
}

#[test]
fn criterion_01_async_always_convergence_on_periodic_problem() {
    let cells = problem1_grid_verdicts();
    for variant in [Variant::AcProp, Variant::AdaShift] {
        let mine: Vec<&CellVerdict> = cells.iter().filter(|c| c.variant == variant).collect();
        assert_eq!(mine.len(), 3 * 5 * 20, "grid size for {variant}");
        let diverged: Vec<String> = mine
            .iter()
            .filter(|c| c.verdict != Verdict::Converge)
            .map(|c| format!("P={} beta1={} beta2={:.4} err={:.3e}", c.p, c.beta1, c.beta2, c.tail_error))
            .collect();
        assert!(
            diverged.is_empty(),
            "{variant} diverged at {} cells: {:?}",
            diverged.len(),
            diverged
        );
    }
    println!("PASS criterion 1: acprop and adashift(n=1) converge at 100% of 300 cells each");
}

#[test]
fn criterion_02_sync_optimizers_diverge_somewhere_with_monotone_thresholds() {
    let cells = problem1_grid_verdicts();
    for variant in [Variant::RmsProp, Variant::Adam] {
        let diverge = cells
            .iter()
            .filter(|c| c.variant == variant && c.verdict == Verdict::Diverge)
            .count();
        assert!(diverge >= 1, "{variant} never diverged on the grid");
        println!("  {variant}: {diverge} diverging cells");
    }
    // Per-P beta2 thresholds for RMSProp, non-decreasing in P on each slice.
    for beta1 in BETA1_SLICES {
        let slice: Vec<CellVerdict> = cells
            .iter()
            .filter(|c| c.variant == Variant::RmsProp && c.beta1 == beta1)
            .cloned()
            .collect();
        let thresholds = boundary_extract(&slice);
        let mut ordered: Vec<(u32, f64)> = thresholds
            .iter()
            .map(|t| (t.p, t.beta2_star.unwrap_or(f64::INFINITY)))
            .collect();
        ordered.sort_unstable_by_key(|&(p, _)| p);
        for w in ordered.windows(2) {
            assert!(
                w[1].1 >= w[0].1 - 1e-12,
                "beta1={beta1}: threshold drops from P={} ({:.4}) to P={} ({:.4})",
                w[0].0,
                w[0].1,
                w[1].0,
                w[1].1
            );
        }
        println!("  rmsprop thresholds at beta1={beta1}: {ordered:?}");
    }
    // Counterpoint: the async optimizer's threshold is the smallest grid
    // beta2 at every P, because everything converges.
    let smallest = acprop_lab::sweep::default_beta2_grid()[0];
    for beta1 in BETA1_SLICES {
        let slice: Vec<CellVerdict> = cells
            .iter()
            .filter(|c| c.variant == Variant::AcProp && c.beta1 == beta1)
            .cloned()
            .collect();
        for t in boundary_extract(&slice) {
            assert_eq!(t.beta2_star, Some(smallest), "acprop P={} beta1={beta1}", t.p);
        }
    }
    println!("PASS criterion 2: sync divergence exists; rmsprop thresholds non-decreasing in P");
}

#[test]
fn criterion_03_closed_form_limits_match_simulation() {
    let mut rng = LabRng::new(31337);
    let mut max_m_err = 0.0f64;
    let mut max_s_err = 0.0f64;
    for i in 0..20 {
        let p = 3 + (rng.next_u64() % 9) as u32;
        let beta1 = 0.05 + 0.90 * rng.uniform();
        let beta2 = 0.05 + 0.94 * rng.uniform();
        let orbit = simulate_problem1_orbit(p, beta1, beta2, 100_000, 1e-13).unwrap();
        assert!(orbit.converged, "tuple {i} did not converge in 1e5 periods");
        let m = limit_m_problem1(p, beta1).unwrap();
        let s = limit_s_problem1(p, beta1, beta2).unwrap();
        let (em, es) = ((m - orbit.m[0]).abs(), (s - orbit.s[0]).abs());
        assert!(em < 1e-8, "tuple {i} (P={p} b1={beta1:.3} b2={beta2:.3}): m err {em:.2e}");
        assert!(es < 1e-8, "tuple {i} (P={p} b1={beta1:.3} b2={beta2:.3}): s err {es:.2e}");
        max_m_err = max_m_err.max(em);
        max_s_err = max_s_err.max(es);
    }
    let mut max_p2_err = 0.0f64;
    for i in 0..20 {
        let p = 5 + (rng.next_u64() % 17) as u32;
        let beta1 = 0.05 + 0.90 * rng.uniform();
        let beta2 = 0.05 + 0.94 * rng.uniform();
        let orbit = simulate_problem2_orbit(p, beta1, beta2, 100_000, 1e-13).unwrap();
        assert!(orbit.converged);
        let rep = limits_problem2(p, beta1, beta2).unwrap();
        let n = p as usize;
        for (name, closed, sim) in [
            ("m", rep.m_inf, orbit.m[0]),
            ("v", rep.v_inf, orbit.v[0]),
            ("s", rep.s_inf, orbit.s[0]),
            ("s_minus", rep.s_minus, orbit.s[n - 3]),
            ("v_minus", rep.v_minus, orbit.v[n - 3]),
        ] {
            let err = (closed - sim).abs();
            assert!(
                err < 1e-6,
                "tuple {i} (P={p} b1={beta1:.3} b2={beta2:.3}) {name}: {err:.2e}"
            );
            max_p2_err = max_p2_err.max(err);
        }
    }
    println!(
        "PASS criterion 3: 20 periodic tuples (max m err {max_m_err:.2e}, s err {max_s_err:.2e}) and 20 sparse tuples (max err {max_p2_err:.2e})"
    );
}

#[test]
fn criterion_04_centered_dominance_on_sparse_regime_grid() {
    // Pointwise ratio ordering needs the zero-gradient run to be long
    // relative to the momentum memory; the grid lives in that regime
    // (see limits unit tests for the short-period counterexample).
    let beta2s = acprop_lab::sweep::default_beta2_grid();
    let mut tuples = Vec::new();
    for beta1 in [0.2, 0.5, 0.7] {
        for p in [15u32, 17, 21, 25, 31, 41, 51, 71, 101] {
            for &beta2 in &beta2s {
                tuples.push((p, beta1, beta2));
            }
        }
    }
    for p in [51u32, 71, 101] {
        for &beta2 in &beta2s {
            tuples.push((p, 0.9, beta2));
        }
    }
    assert!(tuples.len() >= 500, "grid has {} tuples", tuples.len());

    let mut s_only = 0u32;
    let mut worst_sign = f64::NEG_INFINITY;
    for &(p, beta1, beta2) in &tuples {
        let rep = limits_problem2(p, beta1, beta2).unwrap();
        let verdict = convergence_ratio_test(&rep, p);
        let sign = rep.s_plus / rep.s_minus - rep.v_plus / rep.v_minus;
        worst_sign = worst_sign.max(sign);
        assert!(
            sign <= 0.0,
            "P={p} b1={beta1} b2={beta2:.4}: s+/s- - v+/v- = {sign:.3e} > 0"
        );
        assert!(
            !(verdict.v_ok && !verdict.s_ok),
            "P={p} b1={beta1} b2={beta2:.4}: uncentered ok but centered not"
        );
        if verdict.s_ok && !verdict.v_ok {
            s_only += 1;
        }
    }
    assert!(s_only >= 1, "no point with centered-only convergence condition");

    // The implication itself holds far beyond the sign regime.
    let mut implication_checked = 0u64;
    for p in (5..=101).step_by(4) {
        for ib1 in 1..=9 {
            let beta1 = ib1 as f64 / 10.0;
            for ib2 in 1..=19 {
                let beta2 = ib2 as f64 / 20.0;
                let rep = limits_problem2(p, beta1, beta2).unwrap();
                let v = convergence_ratio_test(&rep, p);
                assert!(!(v.v_ok && !v.s_ok), "implication fails at P={p} b1={beta1} b2={beta2}");
                implication_checked += 1;
            }
        }
    }
    println!(
        "PASS criterion 4: {} tuples all ordered (max sign {:.3e}), {} centered-only points, implication clean on {} extra tuples",
        tuples.len(),
        worst_sign,
        s_only,
        implication_checked
    );
}

#[test]
fn criterion_05_sparse_sweep_centered_beats_uncentered() {
    for beta1 in [0.85, 0.9, 0.95] {
        let grid = SweepGrid::new(
            ProblemKind::Sparse2,
            beta1,
            vec![Variant::AcProp, Variant::AdaShift],
            MASTER_SEED,
        );
        let verdicts = run_sweep(&grid).expect("sweep");
        let ac = converge_count(&verdicts, Variant::AcProp);
        let ada = converge_count(&verdicts, Variant::AdaShift);
        println!("  beta1={beta1}: acprop {ac} vs adashift {ada} converged cells (of {})", 4 * 20);
        assert!(
            ac > ada,
            "beta1={beta1}: acprop {ac} not strictly above adashift {ada}"
        );
    }
    println!("PASS criterion 5: acprop converges on strictly more sparse-problem cells at every beta1");
}

#[test]
fn criterion_06_stochastic_counterexample_converges() {
    let mut grid = SweepGrid::new(
        ProblemKind::Stochastic1,
        0.9,
        vec![Variant::AcProp],
        MASTER_SEED,
    );
    grid.p_values = vec![10];
    grid.delta = 0.1;
    let cell = judge_cell(&grid, 10, 0.999, Variant::AcProp).unwrap();
    assert!(
        cell.tail_error < 0.05,
        "tail-1000 mean |x+1| = {} at best lr {:?}",
        cell.tail_error,
        cell.best_lr
    );
    println!(
        "PASS criterion 6: stochastic drift converges, tail error {:.4} (best lr {:?}, 5 seeds)",
        cell.tail_error, cell.best_lr
    );
}

#[test]
fn criterion_07_harmonic_and_zeta_accuracy() {
    let mut worst_rel = 0.0f64;
    for &eta in &[0.5, 0.7, 0.9, 0.99] {
        for &n in &[1_000u64, 10_000, 100_000, 1_000_000] {
            let c = harmonic_sum_check(n, eta).unwrap();
            let rel = c.rel_err();
            assert!(rel < 1e-6, "N={n} eta={eta}: relative error {rel:.3e}");
            worst_rel = worst_rel.max(rel);
        }
    }
    let mut worst_eta = 0.0f64;
    for &s in &[0.5, 0.7, 0.9, 0.99] {
        let gap = (eta_euler(s) - eta_direct(s, 10_000_000)).abs();
        assert!(gap < 1e-9, "s={s}: accelerated vs direct eta gap {gap:.3e}");
        worst_eta = worst_eta.max(gap);
    }
    println!(
        "PASS criterion 7: harmonic rel err <= {worst_rel:.3e} on 16 (N, eta) pairs; eta dual-route gap <= {worst_eta:.3e}"
    );
}

#[test]
fn criterion_08_absvalue_stability_and_step_shrinkage() {
    let problem = ProblemSpec::abs_value();
    for lr in [1e-5, 1e-2] {
        let hp = HyperParams::new(Variant::AcProp, lr);
        let rec = run_trajectory(&hp, &problem, &[100.0], 100_000, 9, 1).unwrap();
        assert_eq!(rec.points.len(), 100_000);
        let mut prev_x = 100.0f64;
        let mut crossing = None;
        let mut pre_max = 0.0f64;
        let mut post_max = 0.0f64;
        for pt in &rec.points {
            assert!(pt.x[0].is_finite() && pt.g[0].is_finite(), "non-finite at t={}", pt.t);
            let dx = (pt.x[0] - prev_x).abs();
            match crossing {
                None => {
                    pre_max = pre_max.max(dx);
                    if pt.x[0].signum() != 100.0f64.signum() && pt.x[0] != 0.0 {
                        crossing = Some(pt.t);
                    }
                }
                Some(t0) if pt.t <= t0 + 1000 => post_max = post_max.max(dx),
                _ => {}
            }
            prev_x = pt.x[0];
        }
        let t0 = crossing.expect("trajectory never crossed zero");
        assert!(
            post_max < pre_max,
            "lr={lr}: post-crossing max step {post_max:.3e} not below pre-crossing max {pre_max:.3e}"
        );
        println!(
            "  lr={lr}: crossed at t={t0}, pre-max step {pre_max:.3e}, 1000-step post-max {post_max:.3e}"
        );
    }
    println!("PASS criterion 8: no non-finite values over 1e5 steps; steps shrink after the crossing");
}

#[test]
fn criterion_09_accumulator_ordering() {
    // (a) replay of one recorded MLP gradient stream into both recursions.
    let cfg = MlpConfig {
        seed: MASTER_SEED,
        ..MlpConfig::default()
    };
    let out = train_mlp_full(&cfg, Variant::AcProp, true).unwrap();
    assert!(!out.trace.diverged);
    let (v_means, s_means) = replay_accumulators(&out.grads, cfg.hp.beta1, cfg.hp.beta2);
    let steps_per_epoch = out.grads.len() / cfg.epochs;
    let v_bar = v_means[..steps_per_epoch].iter().sum::<f64>() / steps_per_epoch as f64;
    let s_bar = s_means[..steps_per_epoch].iter().sum::<f64>() / steps_per_epoch as f64;
    assert!(
        s_bar <= v_bar,
        "first-epoch centered mean {s_bar:.4e} above uncentered {v_bar:.4e}"
    );

    // (b) long-run bounds under i.i.d. N(3, 1) gradients.
    let (mu, sigma, eps) = (3.0, 1.0, 1e-8);
    let (v_mean, s_mean) = stationary_second_moments(mu, sigma, 0.9, 0.999, 100_000, 10_000, 77);
    let bounds = constants_compare(sigma, mu, eps).unwrap();
    let measured_uncentered = v_mean.sqrt() + eps;
    let measured_centered = s_mean.sqrt() + eps;
    assert!(measured_centered < measured_uncentered);
    let rel_v = (measured_uncentered - bounds.inv_cl_uncentered).abs() / bounds.inv_cl_uncentered;
    let rel_s = (measured_centered - bounds.inv_cl_centered).abs() / bounds.inv_cl_centered;
    assert!(rel_v < 0.10, "uncentered bound off by {:.1}%", 100.0 * rel_v);
    assert!(rel_s < 0.10, "centered bound off by {:.1}%", 100.0 * rel_s);
    println!(
        "PASS criterion 9: replay s_bar {s_bar:.4e} <= v_bar {v_bar:.4e}; stationary bounds within {:.1}%/{:.1}% of sqrt(mu^2+sigma^2)+eps / sigma+eps",
        100.0 * rel_v,
        100.0 * rel_s
    );
}

#[test]
fn criterion_10_denominator_decorrelation_1000_trials() {
    let mut rng = LabRng::new(4242);
    for variant in [
        Variant::AcProp,
        Variant::AdaShift,
        Variant::Adam,
        Variant::RmsProp,
        Variant::AdaBelief,
    ] {
        for trial in 0..1000u32 {
            let delay = 1 + (trial as usize % 5);
            let hp = HyperParams::new(variant, 0.01)
                .with_betas(0.5 + 0.4 * rng.uniform(), 0.5 + 0.49 * rng.uniform())
                .with_delay(delay);
            let mut state = OptimizerState::new(vec![rng.normal(0.0, 1.0)], &hp);
            let bounds = BoxConstraint::unbounded(1);
            for _ in 0..(delay as u64 + 2 + trial as u64 % 3) {
                let g = rng.normal(0.0, 2.0);
                state = acprop_lab::optim::step(state, &[g], &hp, &bounds).unwrap();
            }
            let g1 = rng.normal(0.0, 2.0);
            let g2 = g1 + 0.5 + rng.uniform();
            let (_, a) = step_with_info(state.clone(), &[g1], &hp, &bounds).unwrap();
            let (_, b) = step_with_info(state, &[g2], &hp, &bounds).unwrap();
            let (da, db) = (a.denom.unwrap().mean, b.denom.unwrap().mean);
            if variant.is_async() {
                assert!(
                    da == db,
                    "{variant} trial {trial}: denominator moved with g_t ({da} vs {db})"
                );
            } else {
                assert!(
                    da != db,
                    "{variant} trial {trial}: denominator ignored g_t ({da})"
                );
            }
        }
    }
    println!("PASS criterion 10: 1000 trials per optimizer; async denominators ignore g_t, sync ones react");
}

#[test]
fn criterion_11_rate_slope_window() {
    let hp = HyperParams::new(Variant::AcProp, 0.1).with_eps(1.0);
    let report = measure_rate(Variant::AcProp, &hp, 1.0, 10, 100_000, 5).unwrap();
    assert!(
        report.fitted_slope > -0.8 && report.fitted_slope < -0.3,
        "fitted slope {} outside [-0.8, -0.3]",
        report.fitted_slope
    );
    assert!(report.c_l_est <= report.c_u_est);
    println!(
        "PASS criterion 11: fitted slope {:.4} in [-0.8, -0.3] (C_l {:.3e}, C_u {:.3e})",
        report.fitted_slope, report.c_l_est, report.c_u_est
    );
}
