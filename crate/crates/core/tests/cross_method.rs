use mfgs_core::comparator::me_steady_state;
use mfgs_core::linalg::C64;
use mfgs_core::mfgs::{steady_state, zeroth_order_state, CorrectionMethod, RenormalizationConvention};
use mfgs_core::oracle::{exact_mean_force_state_with, BathDiscretization, OracleOptions};
use mfgs_core::spectral::{BathParams, Mode, SpectralDensity};
use mfgs_core::spinboson::{build_system, observables, SpinBosonParams};
use proptest::prelude::*;

const NATURAL: RenormalizationConvention = RenormalizationConvention::Natural;
const RENORM: RenormalizationConvention = RenormalizationConvention::Renormalized;

fn c_ss(delta: f64, lq: f64, wc: f64, beta: f64, method: Option<CorrectionMethod>) -> C64 {
    let p = SpinBosonParams::new(1.0, delta).unwrap();
    let sys = build_system(&p).unwrap();
    let sd = SpectralDensity::lorentz_drude(lq, wc).unwrap();
    let bath = BathParams::new(beta, 1.0).unwrap();
    let state = match method {
        Some(m) => steady_state(&sys, &bath, &sd, m, NATURAL, &Default::default()).unwrap().state,
        None => me_steady_state(&sys, &bath, &sd, &Default::default()).unwrap().state(&sys).unwrap(),
    };
    observables(&state, &p).unwrap().c_ss
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn master_equation_tracks_exact_quadrature(
        delta in 0.2..1.5f64,
        lq in 1.0..10.0f64,
        wc in 0.1..1.0f64,
        beta in 0.3..2.0f64,
    ) {
        let me = c_ss(delta, lq, wc, beta, None);
        let ex = c_ss(delta, lq, wc, beta, Some(CorrectionMethod::ExactQuadrature));
        prop_assert!((me - ex).norm() <= 1e-6 * ex.norm(), "{me} vs {ex}");
    }

    #[test]
    fn assembled_states_are_normalized_and_convention_free(
        delta in 0.2..1.5f64,
        lq in 1.0..20.0f64,
        wc in 0.05..0.5f64,
        beta in 0.3..2.0f64,
    ) {
        let p = SpinBosonParams::new(1.0, delta).unwrap();
        let sys = build_system(&p).unwrap();
        let sd = SpectralDensity::lorentz_drude(lq, wc).unwrap();
        let bath = BathParams::new(beta, 1.0).unwrap();
        for m in [CorrectionMethod::ExactQuadrature, CorrectionMethod::HighTemperatureDawson] {
            let a = steady_state(&sys, &bath, &sd, m, RENORM, &Default::default()).unwrap();
            let b = steady_state(&sys, &bath, &sd, m, NATURAL, &Default::default()).unwrap();
            prop_assert!((a.state.matrix().trace() - C64::new(1.0, 0.0)).norm() < 1e-14);
            let diff = a.state.matrix() - b.state.matrix();
            prop_assert!(diff.iter().all(|z| z.norm() < 1e-12));
            let rho = a.state.matrix();
            prop_assert!((rho[(0, 1)] - rho[(1, 0)].conj()).norm() < 1e-15);
        }
    }
}

#[test]
fn fig2_high_temperature_band() {
    let mut prev = 0.0;
    for i in 1..=10 {
        let beta = 0.1 * i as f64;
        let me = c_ss(0.7, 5.0, 0.5, beta, None);
        let ht = c_ss(0.7, 5.0, 0.5, beta, Some(CorrectionMethod::HighTemperatureDawson));
        let gap = (ht / me - 1.0).norm();
        if 0.5 * beta <= 0.2 + 1e-12 {
            assert!(gap < 0.02, "β={beta}: {gap}");
        }
        assert!(gap > prev, "β={beta}");
        prev = gap;
    }
}

#[test]
fn fig1_master_equation_and_high_temperature_close() {
    for lq in [1.0, 2.0, 4.0, 7.0, 10.0] {
        let me = c_ss(0.7, lq, 0.25, 1.0, None);
        let ht = c_ss(0.7, lq, 0.25, 1.0, Some(CorrectionMethod::HighTemperatureDawson));
        assert!((me - ht).norm() < 0.025 * me.norm(), "λ²Q={lq}");
    }
}

#[test]
fn single_mode_first_order_beats_zeroth_order() {
    let p = SpinBosonParams::new(1.0, 0.7).unwrap();
    let sys = build_system(&p).unwrap();
    let bd = BathDiscretization::new(vec![Mode { g: 1.0, omega: 1.0 }], 40).unwrap();
    let sd = bd.spectral_density();
    let opts = OracleOptions { convergence_check: false, ..Default::default() };
    for lambda in [1.5, 2.0, 2.5] {
        let bath = BathParams::new(1.0, lambda).unwrap();
        let oracle = exact_mean_force_state_with(&sys, &bd, &bath, RENORM, &opts).unwrap().state;
        let zero = zeroth_order_state(&sys, &bath, RENORM, &sd).unwrap();
        let first =
            steady_state(&sys, &bath, &sd, CorrectionMethod::ExactQuadrature, RENORM, &Default::default())
                .unwrap()
                .state;
        let d1 = oracle.trace_distance(&first).unwrap();
        let d0 = oracle.trace_distance(&zero).unwrap();
        assert!(d1 < d0, "λ={lambda}: {d1} vs {d0}");
    }
}
