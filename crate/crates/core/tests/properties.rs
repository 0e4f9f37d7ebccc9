use std::f64::consts::FRAC_PI_2;

use coupled_opo_core::criteria::{SpectralPoint, DUAN_BOUND, EPR_BOUND};
use coupled_opo_core::model::fixed_point;
use coupled_opo_core::spectrum::{combined_output_variance, CombinedMode};
use coupled_opo_core::*;
use proptest::prelude::*;

const NAMES: [&str; 8] = ["X1", "Y1", "X2", "Y2", "Xp", "Yp", "Xm", "Ym"];

fn params() -> impl Strategy<Value = SystemParams> {
    (
        0.5f64..2.0,
        0.5f64..2.0,
        0.0f64..5.0,
        0.0f64..5.0,
        -3.0f64..3.0,
        -3.0f64..3.0,
        0.05f64..0.95,
    )
        .prop_map(|(ga, gb, ja, jb, da, db, f)| {
            SystemParams {
                gamma_a: ga,
                gamma_b: gb,
                j_a: ja,
                j_b: jb,
                delta_a: da,
                delta_b: db,
                ..SystemParams::default()
            }
            .with_pump_fraction(f)
        })
}

fn resonant() -> impl Strategy<Value = SystemParams> {
    params().prop_map(|p| {
        let f = p.eps1.re / derived_scales(&p).unwrap().eps_crit;
        SystemParams {
            delta_a: 0.0,
            delta_b: 0.0,
            ..p
        }
        .with_pump_fraction(f)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn spectra_even_in_frequency(p in params(), w in 0.0f64..15.0, theta in 0.0f64..3.2, k in 0usize..8) {
        let q = QuadratureCombination::from_name(NAMES[k], theta).unwrap();
        let a = SpectralPoint::new(&p, w).unwrap().variance(&q);
        let b = SpectralPoint::new(&p, -w).unwrap().variance(&q);
        prop_assert!((a - b).abs() < 1e-12 * a.abs().max(1.0));
    }

    #[test]
    fn modes_are_interchangeable(p in params(), w in 0.0f64..15.0, theta in 0.0f64..3.2) {
        let pt = SpectralPoint::new(&p, w).unwrap();
        let (x1, y1, c1) = pt.single_mode(Mode::One, theta);
        let (x2, y2, c2) = pt.single_mode(Mode::Two, theta);
        prop_assert!((x1 - x2).abs() < 1e-10 * x1.max(1.0));
        prop_assert!((y1 - y2).abs() < 1e-10 * y1.max(1.0));
        prop_assert!((c1 - c2).abs() < 1e-10 * x1.max(1.0));
    }

    #[test]
    fn variances_and_criteria_non_negative(p in params(), w in 0.0f64..15.0, theta in 0.0f64..3.2) {
        let pt = SpectralPoint::new(&p, w).unwrap();
        for n in NAMES {
            prop_assert!(pt.variance(&QuadratureCombination::from_name(n, theta).unwrap()) >= 0.0);
        }
        let r = pt.record(theta, Pairing::XMinusYPlus, Mode::One).unwrap();
        prop_assert!(r.duan_sum >= 0.0 && r.epr_product >= 0.0);
        prop_assert_eq!(r.flags.entangled, r.duan_sum < DUAN_BOUND);
        prop_assert_eq!(r.flags.epr, r.epr_product < EPR_BOUND);
        prop_assert_eq!(r.flags.squeezed, r.s_x.min(r.s_y) < 1.0);
    }

    #[test]
    fn uncoupled_quadrature_ordering(f in 0.0f64..0.95, w in 0.0f64..15.0) {
        let p = SystemParams::default().with_pump_fraction(f);
        let (sx, sy, _) = SpectralPoint::new(&p, w).unwrap().single_mode(Mode::One, 0.0);
        prop_assert!(sx >= 1.0 && sy <= 1.0);
    }

    // With coupling both principal quadratures can be noisier than vacuum,
    // so only the uncertainty bound survives.
    #[test]
    fn resonant_uncertainty_bound(p in resonant(), w in 0.0f64..15.0, theta in 0.0f64..3.2) {
        let (sx, sy, _) = SpectralPoint::new(&p, w).unwrap().single_mode(Mode::One, theta);
        prop_assert!(sx.max(sy) >= 1.0);
        prop_assert!(sx * sy >= 1.0 - 1e-9, "{} {}", sx, sy);
    }

    #[test]
    fn single_opo_minimum_uncertainty(f in 0.0f64..0.99, g in 0.5f64..2.0) {
        let p = SystemParams { gamma_a: g, gamma_b: 1.0 / g, ..SystemParams::default() }.with_pump_fraction(f);
        let (sx, sy, _) = SpectralPoint::new(&p, 0.0).unwrap().single_mode(Mode::One, 0.0);
        // S_Y is a small difference of O(1) terms near threshold; the drift
        // conditioning scales the rounding error roughly like S_X.
        prop_assert!((sy - 1.0 / sx).abs() < 1e-15 * sx.max(1.0), "{} {}", sx, sy);
    }

    #[test]
    fn threshold_separates_stable_and_unstable(p in params(), f in 0.05f64..0.95) {
        let eps_c = derived_scales(&p).unwrap().eps_crit;
        let min_re = |fraction: f64| {
            let q = p.with_pump(fraction * eps_c);
            let m = build_linear_model(&q, &fixed_point(&q).unwrap());
            numeric_eigenvalues(&m).unwrap().iter().map(|z| z.re).fold(f64::INFINITY, f64::min)
        };
        prop_assert!(min_re(f) > 0.0);
        prop_assert!(min_re(2.0 - f) < 0.0);
    }

    #[test]
    fn combined_model_matches_full_model(ja in 0.0f64..12.0, jb in 0.0f64..3.0, f in 0.05f64..0.95, w in 0.0f64..25.0, theta in 0.0f64..3.2) {
        let p = SystemParams::symmetric(1.0, ja, jb, 0.01).with_detunings(ja, jb).with_pump_fraction(f);
        let ss = steady_state(&p).unwrap();
        let cm = build_combined_model(&p, &ss).unwrap();
        let pt = SpectralPoint::new(&p, w).unwrap();
        let cases = [
            (CombinedMode::Sum, QuadratureCombination::x_plus(theta)),
            (CombinedMode::Difference, QuadratureCombination::x_minus(theta)),
            (CombinedMode::Sum, QuadratureCombination::y_plus(theta - FRAC_PI_2)),
        ];
        for (mode, full) in cases {
            let t = full.terms[0].1.theta;
            let reduced = combined_output_variance(&cm, w, mode, t, p.gamma_a).unwrap();
            let direct = pt.variance(&full);
            prop_assert!((reduced - direct).abs() < 1e-10 * direct.max(1.0), "{:?}: {} vs {}", mode, reduced, direct);
        }
    }
}
