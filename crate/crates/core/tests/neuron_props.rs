use ifsnn::neuron::{
    drive, eif_step, lif_step, qif_step, step, NeuronModelKind, NeuronParams, NeuronState, Step,
};
use proptest::prelude::*;

const MODELS: [NeuronModelKind; 3] = [NeuronModelKind::Lif, NeuronModelKind::Eif, NeuronModelKind::Qif];

fn model() -> impl Strategy<Value = NeuronModelKind> {
    prop::sample::select(MODELS.to_vec())
}

prop_compose! {
    fn params()(
        tau_m in 1.0f64..100.0,
        t_frac in 0.01f64..1.0,
        v_thresh in 1.0f64..30.0,
        t_ref in 0.0f64..5.0,
        delta_t in 0.1f64..10.0,
        rh_frac in 0.3f64..0.95,
        a0 in 0.01f64..1.0,
        uc_frac in 0.1f64..0.9,
        peak_extra in 0.0f64..20.0,
    ) -> NeuronParams {
        NeuronParams {
            tau_m,
            t_s: tau_m * t_frac,
            v_thresh,
            t_ref,
            delta_t,
            theta_rh: rh_frac * v_thresh,
            a0,
            u_c: uc_frac * v_thresh,
            v_peak: v_thresh + peak_extra,
            ..NeuronParams::default()
        }
    }
}

proptest! {
    #[test]
    fn step_is_pure(m in model(), p in params(), u in -20.0f64..40.0, i in -50.0f64..50.0, now in 0u64..100) {
        let s = NeuronState::with_potential(u);
        prop_assert_eq!(step(m, &s, i, &p, now).unwrap(), step(m, &s, i, &p, now).unwrap());
    }

    #[test]
    fn spike_resets_and_silence_stays_below_level(
        m in model(), p in params(), u in -20.0f64..40.0, i in -50.0f64..200.0, now in 0u64..100,
    ) {
        let out = step(m, &NeuronState::with_potential(u.min(p.v_peak)), i, &p, now).unwrap();
        if out.spiked {
            prop_assert_eq!(out.new_u, p.v_reset);
            prop_assert_eq!(out.spike_time, Some(now));
            prop_assert_eq!(out.refractory_until, now + p.t_ref_steps());
        } else {
            prop_assert!(out.new_u < m.spike_level(&p));
            prop_assert!(out.spike_time.is_none());
        }
    }

    #[test]
    fn refractory_neuron_is_frozen(
        m in model(), p in params(), u in -20.0f64..20.0, i in -50.0f64..500.0, now in 0u64..100, extra in 1u64..10,
    ) {
        let s = NeuronState { refractory_until: now + extra, ..NeuronState::with_potential(u) };
        let out = step(m, &s, i, &p, now).unwrap();
        prop_assert!(!out.spiked);
        prop_assert_eq!(out.new_u, u);
        prop_assert_eq!(out.refractory_until, now + extra);
    }

    #[test]
    fn emitted_potentials_are_finite_and_capped(
        m in prop::sample::select(vec![NeuronModelKind::Eif, NeuronModelKind::Qif]),
        p in params(),
        u in -1e3f64..1e3,
        i in -1e4f64..1e4,
    ) {
        let out = step(m, &NeuronState::with_potential(u.min(p.v_peak)), i, &p, 0).unwrap();
        prop_assert!(out.new_u.is_finite());
        prop_assert!(out.new_u <= p.v_peak);
    }

    #[test]
    fn lif_free_decay_follows_recurrence(p in params(), u0 in -20.0f64..20.0, n in 1usize..200) {
        let p = NeuronParams { v_thresh: 1e9, ..p };
        let mut s = NeuronState::with_potential(u0);
        for k in 0..n {
            let out = lif_step(&s, 0.0, &p, k as Step).unwrap();
            s.commit(&out);
        }
        let expected = (1.0 - p.t_s / p.tau_m).powi(n as i32) * (u0 - p.u_rest) + p.u_rest;
        prop_assert!((s.u - expected).abs() <= 1e-12 * (1.0 + u0.abs()), "{} vs {}", s.u, expected);
    }

    #[test]
    fn eif_reduces_to_lif_far_below_rheobase(p in params(), depth in 10.0f64..30.0, i in -5.0f64..5.0) {
        let u = p.theta_rh - depth * p.delta_t;
        let s = NeuronState::with_potential(u);
        let lif = NeuronParams { v_thresh: 1e9, ..p };
        let e = eif_step(&s, i, &p, 0).unwrap();
        let l = lif_step(&s, i, &lif, 0).unwrap();
        prop_assume!(!e.spiked && !l.spiked);
        let bound = p.delta_t * (-10.0f64).exp() * (p.t_s / p.tau_m);
        prop_assert!((e.new_u - l.new_u).abs() <= bound * (1.0 + 1e-9) + 1e-12 * u.abs().max(1.0));
    }

    #[test]
    fn qif_drift_sign(p in params(), u in -30.0f64..30.0) {
        let du = drive(NeuronModelKind::Qif, &p, u, 0.0);
        let expected = ((u - p.u_c) * (u - p.u_rest)).signum();
        if du != 0.0 {
            prop_assert_eq!(du.signum(), expected);
        }
        let out = qif_step(&NeuronState::with_potential(u), 0.0, &p, 0).unwrap();
        if !out.spiked && u < p.u_c && u > p.u_rest {
            prop_assert!(out.new_u < u);
        }
    }
}

#[test]
fn non_finite_current_is_rejected_by_every_model() {
    let p = NeuronParams::default();
    for m in MODELS {
        for bad in [f64::NAN, f64::INFINITY, f64::NEG_INFINITY] {
            assert!(step(m, &NeuronState::at_rest(&p), bad, &p, 0).is_err());
        }
    }
}
