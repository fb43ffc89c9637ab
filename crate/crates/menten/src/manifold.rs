//! Second-order center-manifold expansions for canonical singularly
//! perturbed systems, with the parameter adjoined as a dependent variable.
//!
//! In the block chart `w = a u + b v` the manifold is the graph
//! `w = h(u, eps) = lambda1 u^2 + lambda2 u eps + lambda3 eps^2`, and for
//! this system class `lambda3 = 0` identically. The coefficients follow
//! from flattening the invariance equation; their quality is measured by the
//! residual operator, which must decay cubically along rays into the origin
//! exactly when the coefficients are correct.

use crate::error::Error;
use crate::kinetics::{NondimHTA, NondimTQ};
use crate::models::GeneralSP;
use crate::numeric;

/// First partials of the slow nonlinearity and second partials of the fast
/// one, all at the origin. Everything a second-order manifold needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartialDerivs {
    pub phi_u: f64,
    pub phi_v: f64,
    pub psi_uu: f64,
    pub psi_uv: f64,
    pub psi_vv: f64,
}

impl PartialDerivs {
    /// Analytic partials of the HTA instance.
    pub fn hta_analytic(p: &NondimHTA) -> Self {
        Self {
            phi_u: -1.0,
            phi_v: p.kappa - p.lambda,
            psi_uu: 0.0,
            psi_uv: -1.0,
            psi_vv: 0.0,
        }
    }

    /// Analytic partials of the tQSSA instance.
    pub fn tq_analytic(p: &NondimTQ) -> Self {
        Self {
            phi_u: 0.0,
            phi_v: -1.0,
            psi_uu: 0.0,
            psi_uv: -p.sigma,
            psi_vv: 2.0 * p.eta * p.sigma,
        }
    }
}

/// Second-order manifold coefficients together with the block-chart map
/// `w = a u + b v` they refer to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldCoeffs {
    pub lambda1: f64,
    pub lambda2: f64,
    /// Identically zero for this system class; kept explicit so the
    /// structure of the expansion stays visible.
    pub lambda3: f64,
    pub a: f64,
    pub b: f64,
}

impl ManifoldCoeffs {
    /// Heuristic radius inside which the local expansion is trusted:
    /// `|u| <= min(1, |b| / (2 max(|lambda1|, 1)))`. Evaluations outside it
    /// are still defined, but callers should flag them.
    pub fn validity_radius(&self) -> f64 {
        (self.b.abs() / (2.0 * self.lambda1.abs().max(1.0))).min(1.0)
    }

    pub fn within_validity(&self, u: f64) -> bool {
        u.abs() <= self.validity_radius()
    }
}

/// Manifold coefficients from origin partials of a canonical system:
///
/// ```text
/// lambda1 = -1/2 [psi_uu - 2 (a/b) psi_uv + (a/b)^2 psi_vv]
/// lambda2 = -(a/b) [phi_u - (a/b) phi_v]
/// lambda3 = 0
/// ```
pub fn coeffs_general(p: &PartialDerivs, a: f64, b: f64) -> Result<ManifoldCoeffs, Error> {
    if !(b < 0.0) || !b.is_finite() {
        return Err(Error::validation("b", "must be finite and negative"));
    }
    let r = a / b;
    Ok(ManifoldCoeffs {
        lambda1: -0.5 * (p.psi_uu - 2.0 * r * p.psi_uv + r * r * p.psi_vv),
        lambda2: -r * (p.phi_u - r * p.phi_v),
        lambda3: 0.0,
        a,
        b,
    })
}

/// Closed-form HTA coefficients: `(1/kappa, -lambda/kappa^2, 0)`.
pub fn coeffs_hta(p: &NondimHTA) -> ManifoldCoeffs {
    ManifoldCoeffs {
        lambda1: 1.0 / p.kappa,
        lambda2: -p.lambda / (p.kappa * p.kappa),
        lambda3: 0.0,
        a: 1.0,
        b: -p.kappa,
    }
}

/// Closed-form tQSSA coefficients:
/// `(sigma kappa_m / (eta + kappa_m)^2, -1/(eta + kappa_m)^2, 0)`.
pub fn coeffs_tq(p: &NondimTQ) -> ManifoldCoeffs {
    let beta = p.eta + p.kappa_m;
    ManifoldCoeffs {
        lambda1: p.sigma * p.kappa_m / (beta * beta),
        lambda2: -1.0 / (beta * beta),
        lambda3: 0.0,
        a: 1.0,
        b: -beta,
    }
}

/// Numerical origin partials of a canonical system by central differences
/// with Richardson extrapolation; absolute accuracy around `1e-8` for
/// unit-scale nonlinearities.
pub fn estimate_partials(sys: &GeneralSP) -> Result<PartialDerivs, Error> {
    const H1: f64 = 1e-3;
    const H2: f64 = 1e-2;
    let probe = |u: f64, v: f64, which: &str| -> Result<(), Error> {
        let val = match which {
            "phi" => sys.phi(u, v),
            _ => sys.psi(u, v),
        };
        if !val.is_finite() {
            return Err(Error::NonFiniteSample { u, v });
        }
        Ok(())
    };
    for s in [-H2, 0.0, H2] {
        probe(s, 0.0, "phi")?;
        probe(0.0, s, "phi")?;
        probe(s, 0.0, "psi")?;
        probe(0.0, s, "psi")?;
        probe(s, s, "psi")?;
        probe(s, -s, "psi")?;
    }
    let out = PartialDerivs {
        phi_u: numeric::richardson_first(&|u| sys.phi(u, 0.0), 0.0, H1),
        phi_v: numeric::richardson_first(&|v| sys.phi(0.0, v), 0.0, H1),
        psi_uu: numeric::richardson_second(&|u| sys.psi(u, 0.0), 0.0, H2),
        psi_uv: numeric::richardson_mixed(&|u, v| sys.psi(u, v), 0.0, 0.0, H2),
        psi_vv: numeric::richardson_second(&|v| sys.psi(0.0, v), 0.0, H2),
    };
    for (name, v) in [
        ("phi_u", out.phi_u),
        ("phi_v", out.phi_v),
        ("psi_uu", out.psi_uu),
        ("psi_uv", out.psi_uv),
        ("psi_vv", out.psi_vv),
    ] {
        if !v.is_finite() {
            return Err(Error::InsufficientData(format!(
                "non-finite estimate for {name}"
            )));
        }
    }
    Ok(out)
}

/// Manifold graph `w = h(u, eps)` truncated at second order.
pub fn manifold_h(c: &ManifoldCoeffs, u: f64, eps: f64) -> f64 {
    c.lambda1 * u * u + c.lambda2 * u * eps + c.lambda3 * eps * eps
}

/// Fast variable reconstructed from the manifold: `v = (h(u, eps) - a u)/b`.
/// Continuous through `u = 0` where it vanishes.
pub fn reconstruct_v(c: &ManifoldCoeffs, u: f64, eps: f64) -> f64 {
    (manifold_h(c, u, eps) - c.a * u) / c.b
}

/// Invariance-equation residual of the truncated graph:
///
/// ```text
/// N(h)(u, eps) = D_u h * [eps phi] - b h - [a eps phi + b psi]
/// ```
///
/// with both nonlinearities evaluated on the graph. The slow transport term
/// `D_u h * eps phi` is third order and drops out of the coefficient
/// derivation, but it belongs to the full residual, which is what makes the
/// cubic-decay diagnostic meaningful.
pub fn manifold_residual(sys: &GeneralSP, c: &ManifoldCoeffs, u: f64, eps: f64) -> f64 {
    let h = manifold_h(c, u, eps);
    let v = sys.v_from_w(u, h);
    let d_u_h = 2.0 * c.lambda1 * u + c.lambda2 * eps;
    d_u_h * (eps * sys.phi(u, v)) - sys.fast_rhs_w(u, h, eps)
}

/// Slow vector field reduced to the manifold, general form:
///
/// ```text
/// du/dtau = -(b/a) lambda2 u + (lambda1 u^2 + lambda2 u eps) phi_v(0,0)/b
/// ```
///
/// (displayed terms only; the remainder is higher order). Requires `a != 0`.
pub fn reduced_field_general(
    c: &ManifoldCoeffs,
    partials: &PartialDerivs,
    u: f64,
    eps: f64,
) -> Result<f64, Error> {
    if c.a == 0.0 {
        return Err(Error::validation(
            "a",
            "general reduced field divides by the slow projection constant a",
        ));
    }
    Ok(-(c.b / c.a) * c.lambda2 * u
        + (c.lambda1 * u * u + c.lambda2 * u * eps) * partials.phi_v / c.b)
}

/// HTA reduced field in outer time:
/// `du/dtau = (lambda/kappa) u [-1 + u/kappa - (eps/kappa)(-1 + lambda/kappa)]`.
pub fn reduced_field_hta(p: &NondimHTA, u: f64, eps: f64) -> f64 {
    let k = p.kappa;
    (p.lambda / k) * u * (-1.0 + u / k - (eps / k) * (-1.0 + p.lambda / k))
}

/// tQSSA reduced field in outer time:
/// `du/dtau = u/(eta+kappa_m) [-1 + sigma kappa_m u/(eta+kappa_m)^2 - eps/(eta+kappa_m)^2]`.
pub fn reduced_field_tq(p: &NondimTQ, u: f64, eps: f64) -> f64 {
    let beta = p.eta + p.kappa_m;
    let b2 = beta * beta;
    u / beta * (-1.0 + p.sigma * p.kappa_m * u / b2 - eps / b2)
}

/// Pointwise comparison of the manifold reconstruction at `eps = 0` against
/// a root curve, with fitted decay orders.
#[derive(Debug, Clone)]
pub struct AsymptoticReport {
    pub u: Vec<f64>,
    /// `|v_manifold(u, 0) - v_root(u)|` per grid point.
    pub differences: Vec<f64>,
    /// Differences divided by `u`; equivalence means these vanish with `u`.
    pub ratios: Vec<f64>,
    /// Fitted log-log order of the differences.
    pub difference_order: f64,
    /// Fitted log-log order of the ratios (`difference_order - 1` up to fit
    /// noise).
    pub ratio_order: f64,
    pub equivalent: bool,
}

/// Compare the `eps = 0` manifold reconstruction with a root evaluator over
/// a grid of `u` values approaching zero.
pub fn asymptotic_compare<R: Fn(f64) -> f64>(
    c: &ManifoldCoeffs,
    root: R,
    grid: &[f64],
) -> Result<AsymptoticReport, Error> {
    if grid.len() < 2 {
        return Err(Error::Precondition(
            "asymptotic comparison needs at least two grid points".to_string(),
        ));
    }
    let u: Vec<f64> = grid.to_vec();
    let differences: Vec<f64> = u
        .iter()
        .map(|&x| (reconstruct_v(c, x, 0.0) - root(x)).abs())
        .collect();
    let ratios: Vec<f64> = u.iter().zip(&differences).map(|(&x, &d)| d / x).collect();
    let difference_order = numeric::loglog_slope(&u, &differences)?;
    let ratio_order = numeric::loglog_slope(&u, &ratios)?;
    let equivalent = difference_order > 1.0 || difference_order.is_infinite();
    Ok(AsymptoticReport {
        u,
        differences,
        ratios,
        difference_order,
        ratio_order,
        equivalent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinetics::{nondim_tq, RateConstants, Totals};
    use crate::numeric::geometric_grid;
    use crate::qssa::{sqssa_root_nondim, tq_root_nondim};

    fn fig3_tq() -> NondimTQ {
        nondim_tq(
            &RateConstants::new(1.0, 3.0, 1.0).unwrap(),
            &Totals::new(1.0, 1.0).unwrap(),
        )
    }

    #[test]
    fn general_coeffs_match_hta_closed_form() {
        let p = NondimHTA::from_parts(2.0, 1.0, 0.1).unwrap();
        let c = coeffs_general(&PartialDerivs::hta_analytic(&p), 1.0, -p.kappa).unwrap();
        assert!((c.lambda1 - 0.5).abs() < 1e-15);
        assert!((c.lambda2 + 0.25).abs() < 1e-15);
        assert_eq!(c.lambda3, 0.0);
        let closed = coeffs_hta(&p);
        assert!((c.lambda1 - closed.lambda1).abs() < 1e-15);
        assert!((c.lambda2 - closed.lambda2).abs() < 1e-15);
    }

    #[test]
    fn general_coeffs_match_tq_closed_form() {
        let p = fig3_tq();
        let c = coeffs_general(&PartialDerivs::tq_analytic(&p), 1.0, -(p.eta + p.kappa_m)).unwrap();
        assert!((c.lambda1 - 0.16).abs() < 1e-15);
        assert!((c.lambda2 + 1.44).abs() < 1e-15);
        let closed = coeffs_tq(&p);
        assert!((c.lambda1 - closed.lambda1).abs() < 1e-15);
        assert!((c.lambda2 - closed.lambda2).abs() < 1e-15);
    }

    #[test]
    fn flat_system_has_flat_manifold() {
        let zero = PartialDerivs {
            phi_u: 0.0,
            phi_v: 0.0,
            psi_uu: 0.0,
            psi_uv: 0.0,
            psi_vv: 0.0,
        };
        let c = coeffs_general(&zero, 1.0, -1.0).unwrap();
        assert_eq!((c.lambda1, c.lambda2, c.lambda3), (0.0, 0.0, 0.0));
        assert!(coeffs_general(&zero, 1.0, 1.0).is_err());
    }

    #[test]
    fn closed_form_reference_normalization() {
        let p = NondimHTA::from_parts(1.0, 0.7, 0.1).unwrap();
        let c = coeffs_hta(&p);
        assert_eq!(c.lambda1, 1.0);
        assert_eq!(c.lambda2, -0.7);
    }

    #[test]
    fn estimated_partials_match_analytic() {
        let hta = GeneralSP::hta(&NondimHTA::from_parts(4.0, 1.0, 0.1).unwrap());
        let est = estimate_partials(&hta).unwrap();
        assert!((est.phi_u + 1.0).abs() < 1e-8);
        assert!((est.phi_v - 3.0).abs() < 1e-8);
        assert!(est.psi_uu.abs() < 1e-8);
        assert!((est.psi_uv + 1.0).abs() < 1e-8);
        assert!(est.psi_vv.abs() < 1e-8);

        let p = fig3_tq();
        let tq = GeneralSP::tq(&p);
        let est = estimate_partials(&tq).unwrap();
        assert!((est.psi_vv - 2.0 * p.eta * p.sigma).abs() < 1e-8);
        assert!((est.psi_uv + p.sigma).abs() < 1e-8);
    }

    #[test]
    fn estimated_partials_reject_nonfinite() {
        let sys = GeneralSP::new(
            1.0,
            -1.0,
            Box::new(|u, _v| if u.abs() > 5e-3 { f64::NAN } else { 0.0 }),
            Box::new(|_u, _v| 0.0),
        )
        .unwrap();
        assert!(matches!(
            estimate_partials(&sys),
            Err(Error::NonFiniteSample { .. })
        ));
    }

    #[test]
    fn graph_and_reconstruction_values() {
        let p = NondimHTA::from_parts(1.0, 1.0 - 1e-9, 0.1).unwrap();
        let c = coeffs_hta(&p);
        assert_eq!(manifold_h(&c, 0.0, 0.3), 0.0);
        assert!((manifold_h(&c, 0.1, 0.0) - 0.01).abs() < 1e-12);
        // Slope in eps at fixed u is lambda2 * u.
        let du = (manifold_h(&c, 0.1, 0.2) - manifold_h(&c, 0.1, 0.1)) / 0.1;
        assert!((du - c.lambda2 * 0.1).abs() < 1e-12);
        assert_eq!(reconstruct_v(&c, 0.0, 0.2), 0.0);
        assert!((reconstruct_v(&c, 0.1, 0.0) - 0.09).abs() < 1e-9);
    }

    #[test]
    fn reconstruction_ratio_to_root_tends_to_one() {
        let p = NondimHTA::from_parts(1.0, 0.5, 0.1).unwrap();
        let c = coeffs_hta(&p);
        let u = 1e-5;
        let ratio = reconstruct_v(&c, u, 0.0) / sqssa_root_nondim(u, p.kappa);
        assert!((ratio - 1.0).abs() < 1e-4);
    }

    #[test]
    fn residual_vanishes_at_origin_and_decays_cubically() {
        let p = NondimHTA::from_parts(4.0, 1.0, 0.1).unwrap();
        let sys = GeneralSP::hta(&p);
        let c = coeffs_hta(&p);
        assert_eq!(manifold_residual(&sys, &c, 0.0, 0.0), 0.0);
        for rho in [1e-2, 1e-3, 1e-4] {
            let big = manifold_residual(&sys, &c, rho, rho).abs();
            let small = manifold_residual(&sys, &c, rho / 2.0, rho / 2.0).abs();
            assert!(
                big / small >= 8.0 * 0.8,
                "rho={rho}: ratio {} below cubic",
                big / small
            );
        }
    }

    #[test]
    fn perturbed_coefficient_degrades_residual_to_quadratic() {
        let p = NondimHTA::from_parts(4.0, 1.0, 0.1).unwrap();
        let sys = GeneralSP::hta(&p);
        let mut c = coeffs_hta(&p);
        c.lambda1 += 0.1;
        let grid = geometric_grid(1e-4, 1e-2, 9);
        let vals: Vec<f64> = grid
            .iter()
            .map(|&r| manifold_residual(&sys, &c, r, r).abs())
            .collect();
        let slope = numeric::loglog_slope(&grid, &vals).unwrap();
        assert!(slope <= 2.3, "slope {slope}");
    }

    #[test]
    fn reduced_field_leading_coefficients() {
        let p = NondimHTA::from_parts(4.0, 1.0, 0.1).unwrap();
        let c = coeffs_hta(&p);
        let partials = PartialDerivs::hta_analytic(&p);
        assert_eq!(reduced_field_hta(&p, 0.0, 0.1), 0.0);
        // Leading coefficient -(b/a) lambda2 = -lambda/kappa.
        let u = 1e-9;
        let lead = reduced_field_general(&c, &partials, u, 0.0).unwrap() / u;
        assert!((lead + p.lambda / p.kappa).abs() < 1e-8);
        let lead_specialized = reduced_field_hta(&p, u, 0.0) / u;
        assert!((lead - lead_specialized).abs() < 1e-8);

        let tq = fig3_tq();
        let u = 1e-9;
        let lead = reduced_field_tq(&tq, u, 0.0) / u;
        assert!((lead + 1.2).abs() < 1e-8);

        let mut c0 = c;
        c0.a = 0.0;
        assert!(reduced_field_general(&c0, &partials, 0.1, 0.0).is_err());
    }

    #[test]
    fn asymptotic_equivalence_hta() {
        let p = NondimHTA::from_parts(4.0, 1.0, 0.1).unwrap();
        let c = coeffs_hta(&p);
        let grid = geometric_grid(1e-4, 1e-2, 9);
        let report = asymptotic_compare(&c, |u| sqssa_root_nondim(u, p.kappa), &grid).unwrap();
        // v_manifold - u/(kappa+u) = O(u^3).
        assert!((report.difference_order - 3.0).abs() < 0.1);
        assert!(report.equivalent);
        assert!(report.ratios.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn asymptotic_equivalence_tq_and_mutual_forms() {
        let p = fig3_tq();
        let c = coeffs_tq(&p);
        let grid = geometric_grid(1e-4, 1e-2, 9);
        let report = asymptotic_compare(&c, |u| tq_root_nondim(u, &p), &grid).unwrap();
        assert!(report.difference_order > 1.9 + 1.0);
        assert!(report.equivalent);
        // The series form and the exact-root form are mutually o(u).
        let beta = p.eta + p.kappa_m;
        for &u in &grid {
            let series = u / beta * (1.0 - p.sigma * p.kappa_m * u / (beta * beta));
            let exact = tq_root_nondim(u, &p);
            assert!((series - exact).abs() / u <= 2.0 * u);
        }
    }

    #[test]
    fn identical_inputs_give_zero_differences() {
        let p = fig3_tq();
        let c = coeffs_tq(&p);
        let grid = geometric_grid(1e-4, 1e-2, 5);
        let report = asymptotic_compare(&c, |u| reconstruct_v(&c, u, 0.0), &grid).unwrap();
        assert!(report.differences.iter().all(|&d| d == 0.0));
        assert!(report.difference_order.is_infinite());
        assert!(report.equivalent);
    }

    #[test]
    fn validity_radius_heuristic() {
        let p = NondimHTA::from_parts(4.0, 1.0, 0.1).unwrap();
        let c = coeffs_hta(&p);
        // |b| = 4, lambda1 = 1/4 -> radius min(1, 4/2) = 1.
        assert_eq!(c.validity_radius(), 1.0);
        assert!(c.within_validity(0.5));
        let tight = ManifoldCoeffs {
            lambda1: 10.0,
            lambda2: 0.0,
            lambda3: 0.0,
            a: 1.0,
            b: -0.5,
        };
        assert!((tight.validity_radius() - 0.025).abs() < 1e-15);
        assert!(!tight.within_validity(0.1));
    }
}
