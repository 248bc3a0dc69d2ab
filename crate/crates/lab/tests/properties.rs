//! Property tests over randomized hyper-parameters and gradient streams.

use acprop_lab::optim::{
    step, step_with_info, BoxConstraint, HyperParams, OptimizerState, Variant,
};
use acprop_lab::problems::{grad_periodic1, grad_sparse2, ProblemSpec};
use acprop_lab::series::zeta;
use proptest::prelude::*;

fn variant_strategy() -> impl Strategy<Value = Variant> {
    prop::sample::select(Variant::ALL.to_vec())
}

fn hp_strategy() -> impl Strategy<Value = HyperParams> {
    (
        variant_strategy(),
        1e-5f64..1.0,
        0.01f64..0.999,
        0.001f64..0.999,
        -12.0f64..0.0,
        0.5f64..0.999,
        1usize..6,
    )
        .prop_map(|(variant, alpha0, beta1, beta2, log_eps, eta, delay)| {
            let mut hp = HyperParams::new(variant, alpha0)
                .with_betas(beta1, beta2)
                .with_eps(10f64.powf(log_eps))
                .with_delay(delay);
            hp.eta = eta;
            hp
        })
}

proptest! {
    /// The second-momentum accumulator stays finite and non-negative for
    /// every variant under any finite gradient stream.
    #[test]
    fn second_momentum_nonnegative(hp in hp_strategy(), grads in prop::collection::vec(-1e3f64..1e3, 1..60)) {
        let mut state = OptimizerState::new(vec![0.0], &hp);
        for g in grads {
            state = step(state, &[g], &hp, &BoxConstraint::unbounded(1)).unwrap();
            prop_assert!(state.second[0].is_finite());
            prop_assert!(state.second[0] >= 0.0);
        }
    }

    /// Iterates never leave the feasible box.
    #[test]
    fn projection_keeps_iterates_in_box(hp in hp_strategy(), grads in prop::collection::vec(-1e3f64..1e3, 1..60)) {
        let bounds = BoxConstraint::uniform(1, -1.0, 1.0);
        let mut state = OptimizerState::new(vec![0.25], &hp);
        for g in grads {
            state = step(state, &[g], &hp, &bounds).unwrap();
            prop_assert!((-1.0..=1.0).contains(&state.x[0]));
        }
    }

    /// Async denominators are constant functions of g_t; sync ones react.
    /// AMSGrad is excluded from the sync side: its running max can absorb a
    /// perturbation without moving.
    #[test]
    fn denominator_decorrelation(hp in hp_strategy(), prefix in prop::collection::vec(-10.0f64..10.0, 0..20), g in -10.0f64..10.0, bump in 0.5f64..5.0) {
        let bounds = BoxConstraint::unbounded(1);
        let mut state = OptimizerState::new(vec![0.0], &hp);
        for p in prefix {
            state = step(state, &[p], &hp, &bounds).unwrap();
        }
        // Past warm-up, both probes update x and report a denominator.
        for _ in 0..hp.delay_n {
            state = step(state, &[1.0], &hp, &bounds).unwrap();
        }
        let (_, a) = step_with_info(state.clone(), &[g], &hp, &bounds).unwrap();
        let (_, b) = step_with_info(state, &[g + bump], &hp, &bounds).unwrap();
        match (hp.variant, a.denom, b.denom) {
            (Variant::Sgdm, None, None) => {}
            (v, Some(da), Some(db)) if v.is_async() => prop_assert_eq!(da.mean, db.mean),
            (Variant::Adam | Variant::RmsProp | Variant::AdaBelief, Some(da), Some(db)) => {
                prop_assert_ne!(da.mean, db.mean)
            }
            (Variant::AmsGrad, Some(_), Some(_)) => {}
            other => prop_assert!(false, "unexpected outcome shape {:?}", other.0),
        }
    }

    /// Identical seeds give bit-identical trajectories on the stochastic
    /// problem.
    #[test]
    fn stochastic_trajectories_deterministic(seed in any::<u64>(), steps in 10u64..200) {
        let problem = ProblemSpec::stochastic1(10, 0.1).unwrap();
        let hp = HyperParams::new(Variant::AcProp, 0.1);
        let a = acprop_lab::optim::run_trajectory(&hp, &problem, &[0.0], steps, seed, 1).unwrap();
        let b = acprop_lab::optim::run_trajectory(&hp, &problem, &[0.0], steps, seed, 1).unwrap();
        prop_assert_eq!(a.final_x, b.final_x);
    }

    /// Periodic oracles repeat exactly with period P.
    #[test]
    fn periodic_oracles_repeat(t in 1u64..10_000, p1 in 3u32..50, p2 in 4u32..50) {
        prop_assert_eq!(
            grad_periodic1(t, 0.0, p1).unwrap(),
            grad_periodic1(t + p1 as u64, 0.0, p1).unwrap()
        );
        prop_assert_eq!(
            grad_sparse2(t, 0.0, p2).unwrap(),
            grad_sparse2(t + p2 as u64, 0.0, p2).unwrap()
        );
    }

    /// zeta is negative on the open unit interval.
    #[test]
    fn zeta_negative_on_unit_interval(s in 0.01f64..0.98) {
        prop_assert!(zeta(s).unwrap() < 0.0);
    }

    /// Sweep cells serialize through the CSV layer and parse back intact.
    #[test]
    fn sweep_csv_row_round_trip(p in 3u32..20, beta2 in 0.01f64..0.999, err in 0.0f64..2.0) {
        use acprop_lab::report::{parse_csv, sweep_csv};
        use acprop_lab::sweep::{CellVerdict, Verdict};
        let cell = CellVerdict {
            variant: Variant::AcProp,
            p,
            beta2,
            beta1: 0.9,
            best_lr: Some(0.1),
            tail_error: err,
            verdict: if err < 0.01 { Verdict::Converge } else { Verdict::Diverge },
        };
        let text = sweep_csv(&[cell], 1, "{}");
        let parsed = parse_csv(&text).unwrap();
        let row = &parsed.rows[0];
        prop_assert_eq!(row[parsed.column("P").unwrap()].parse::<u32>().unwrap(), p);
        let b2 = parsed.f64_cell(row, parsed.column("beta2").unwrap()).unwrap();
        prop_assert_eq!(b2.to_bits(), beta2.to_bits());
        let e = parsed.f64_cell(row, parsed.column("tail_error").unwrap()).unwrap();
        prop_assert_eq!(e.to_bits(), err.to_bits());
    }
}
