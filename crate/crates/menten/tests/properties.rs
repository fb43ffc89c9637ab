//! Property-based invariants over random parameter and state draws.

use proptest::prelude::*;

use menten::kinetics::{
    derive_constants, nondim_hta, nondim_tq, RateConstants, StateLumped, StateMM, Totals,
};
use menten::manifold::{coeffs_general, coeffs_hta, coeffs_tq, PartialDerivs};
use menten::models::{rhs_full_mm, rhs_hta, rhs_lumped, rhs_tq, GeneralSP, TimeFrame};
use menten::qssa::{cminus, sqssa_complex, tq_root_nondim};

fn rate() -> impl Strategy<Value = f64> {
    (-2.0f64..2.0).prop_map(|e| 10f64.powf(e))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn total_eps_is_bounded_by_one_quarter(
        k1 in rate(), km1 in rate(), k2 in rate(), e_t in rate(), x_t in rate()
    ) {
        let rates = RateConstants::new(k1, km1, k2).unwrap();
        let totals = Totals::new(e_t, x_t).unwrap();
        let d = derive_constants(&rates, &totals);
        prop_assert!(d.eps_tq <= 0.25);
        prop_assert!((d.k_m - (d.k_d + d.k)).abs() <= 8.0 * f64::EPSILON * d.k_m);
    }

    #[test]
    fn lumped_system_is_the_full_system_in_new_coordinates(
        k1 in rate(), km1 in rate(), k2 in rate(), e_t in rate(), x_t in rate(),
        x_frac in 0.0f64..1.0, c_frac in 0.0f64..1.0
    ) {
        let rates = RateConstants::new(k1, km1, k2).unwrap();
        let totals = Totals::new(e_t, x_t).unwrap();
        let c = c_frac * e_t.min(x_t);
        let x = x_frac * (x_t - c).max(0.0);
        let state = StateMM { x, c };
        let (dx, dc) = rhs_full_mm(&state, &rates, &totals);
        let (dxb, dc_l) = rhs_lumped(&StateLumped::from_full(&state), &rates, &totals);
        let scale = dx.abs().max(dc.abs()).max(1.0);
        prop_assert!((dxb - (dx + dc)).abs() <= 1e-12 * scale);
        prop_assert!((dc_l - dc).abs() <= 1e-12 * scale);
        // Complex drain identity.
        prop_assert!((dx + dc + rates.k2 * state.c).abs() <= 1e-12 * scale);
    }

    #[test]
    fn inner_frame_is_eps_times_outer_frame(
        k1 in rate(), km1 in rate(), k2 in rate(), e_t in rate(), x_t in rate(),
        u in 0.0f64..1.5, v in 0.0f64..1.5
    ) {
        let rates = RateConstants::new(k1, km1, k2).unwrap();
        let totals = Totals::new(e_t, x_t).unwrap();
        let hta = nondim_hta(&rates, &totals);
        let tq = nondim_tq(&rates, &totals);
        let (so, fo) = rhs_hta(u, v, &hta, TimeFrame::Outer);
        let (si, fi) = rhs_hta(u, v, &hta, TimeFrame::Inner);
        prop_assert!((si - hta.eps * so).abs() <= 1e-12 * si.abs().max(1.0));
        prop_assert!((fi - hta.eps * fo).abs() <= 1e-12 * fi.abs().max(1.0));
        let (so, fo) = rhs_tq(u, v, &tq, TimeFrame::Outer);
        let (si, fi) = rhs_tq(u, v, &tq, TimeFrame::Inner);
        prop_assert!((si - tq.eps * so).abs() <= 1e-12 * si.abs().max(1.0));
        prop_assert!((fi - tq.eps * fo).abs() <= 1e-12 * fi.abs().max(1.0));
    }

    #[test]
    fn cminus_is_bounded_monotone_and_exact(
        e_t in rate(), k_m in rate(), xbar in rate()
    ) {
        let c = cminus(xbar, e_t, k_m).unwrap();
        let scale = (e_t + k_m + xbar) * (e_t + k_m + xbar);
        prop_assert!(c >= 0.0);
        prop_assert!(c <= e_t.min(xbar) + 1e-12 * scale);
        let residual = xbar * e_t - (xbar + e_t + k_m) * c + c * c;
        prop_assert!(residual.abs() <= 1e-10 * scale);
        let c_up = cminus(xbar * 1.25, e_t, k_m).unwrap();
        prop_assert!(c_up >= c - 1e-14 * scale);
    }

    #[test]
    fn nondim_roots_agree_with_dimensional_closure(
        k1 in rate(), km1 in rate(), k2 in rate(), e_t in rate(), x_t in rate(),
        frac in 0.01f64..1.0
    ) {
        let rates = RateConstants::new(k1, km1, k2).unwrap();
        let totals = Totals::new(e_t, x_t).unwrap();
        let d = derive_constants(&rates, &totals);
        let p = nondim_tq(&rates, &totals);
        let xbar = frac * x_t;
        let via_root = tq_root_nondim(xbar / x_t, &p) * p.scales.fast;
        let via_closure = cminus(xbar, e_t, d.k_m).unwrap();
        prop_assert!((via_root - via_closure).abs() <= 1e-9 * via_closure.max(1e-12));
    }

    #[test]
    fn standard_closure_saturates_below_enzyme_total(
        e_t in rate(), k_m in rate(), x in 0.0f64..1e4
    ) {
        let c = sqssa_complex(x, e_t, k_m);
        prop_assert!(c >= 0.0 && c <= e_t);
        prop_assert!(sqssa_complex(x + 1.0, e_t, k_m) >= c);
    }

    #[test]
    fn general_manifold_coefficients_match_closed_forms(
        kappa in 0.1f64..10.0, lambda_frac in 0.05f64..0.95,
        a_raw in 0.1f64..3.0, b_raw in 0.1f64..3.0, c_raw in 0.1f64..3.0
    ) {
        // HTA family.
        let lambda = kappa * lambda_frac;
        let p = menten::kinetics::NondimHTA::from_parts(kappa, lambda, 0.1).unwrap();
        let general = coeffs_general(&PartialDerivs::hta_analytic(&p), 1.0, -kappa).unwrap();
        let closed = coeffs_hta(&p);
        prop_assert!((general.lambda1 - closed.lambda1).abs()
            <= 1e-12 * closed.lambda1.abs().max(1.0));
        prop_assert!((general.lambda2 - closed.lambda2).abs()
            <= 1e-12 * closed.lambda2.abs().max(1.0));

        // Total-QSSA family on the parameter simplex.
        let sum = a_raw + b_raw + c_raw;
        let q = menten::kinetics::NondimTQ::from_parts(
            a_raw / sum, b_raw / sum, 1.0 - a_raw / sum - b_raw / sum, 0.05,
        ).unwrap();
        let general = coeffs_general(
            &PartialDerivs::tq_analytic(&q), 1.0, -(q.eta + q.kappa_m),
        ).unwrap();
        let closed = coeffs_tq(&q);
        prop_assert!((general.lambda1 - closed.lambda1).abs()
            <= 1e-12 * closed.lambda1.abs().max(1.0));
        prop_assert!((general.lambda2 - closed.lambda2).abs()
            <= 1e-12 * closed.lambda2.abs().max(1.0));
        prop_assert_eq!(general.lambda3, 0.0);
    }

    #[test]
    fn canonical_instances_track_named_models(
        kappa in 0.2f64..5.0, lambda_frac in 0.05f64..0.95,
        u in 0.0f64..1.2, v in 0.0f64..1.2
    ) {
        let lambda = kappa * lambda_frac;
        let p = menten::kinetics::NondimHTA::from_parts(kappa, lambda, 0.07).unwrap();
        let sys = GeneralSP::hta(&p);
        let (du, dv) = rhs_hta(u, v, &p, TimeFrame::Inner);
        let (gu, gv) = sys.rhs_inner(u, v, p.eps);
        prop_assert!((du - gu).abs() <= 1e-14 * du.abs().max(1.0));
        prop_assert!((dv - gv).abs() <= 1e-14 * dv.abs().max(1.0));
    }
}
