//! Right-hand sides of every dynamical system in the toolkit, dimensional
//! and nondimensional, in outer and inner (stretched) time, plus the generic
//! singularly perturbed container used by the root finder and the manifold
//! machinery.

use crate::error::Error;
use crate::kinetics::{NondimHTA, NondimTQ, RateConstants, StateLumped, StateMM, Totals};
use crate::numeric;

/// Which time variable a nondimensional right-hand side is expressed in.
///
/// Outer time `tau` carries the slow dynamics; inner time `s = tau/eps`
/// resolves the boundary layer. The slow equation picks up a factor `eps`
/// when moving to the inner frame, the fast equation sheds its `1/eps`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TimeFrame {
    Outer,
    Inner,
}

/// Full system in original variables:
/// `dX/dt = -k1 X (E_T - C) + k_minus1 C`,
/// `dC/dt = k1 [X (E_T - C) - K_M C]`.
pub fn rhs_full_mm(state: &StateMM, rates: &RateConstants, totals: &Totals) -> (f64, f64) {
    let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
    let binding = state.x * (totals.e_t - state.c);
    (
        -rates.k1 * binding + rates.k_minus1 * state.c,
        rates.k1 * (binding - k_m * state.c),
    )
}

/// Lumped system in `(Xbar, C)`:
/// `dXbar/dt = -k2 C`,
/// `dC/dt = k1 [Xbar E_T - (Xbar + E_T + K_M) C + C^2]`.
pub fn rhs_lumped(state: &StateLumped, rates: &RateConstants, totals: &Totals) -> (f64, f64) {
    let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
    (
        -rates.k2 * state.c,
        rates.k1
            * (state.xbar * totals.e_t - (state.xbar + totals.e_t + k_m) * state.c
                + state.c * state.c),
    )
}

/// Heineken-Tsuchiya-Aris system. Outer frame:
/// `du/dtau = -u + (u + kappa - lambda) v`,
/// `eps dv/dtau = u - (u + kappa) v`.
pub fn rhs_hta(u: f64, v: f64, p: &NondimHTA, frame: TimeFrame) -> (f64, f64) {
    let slow = -u + (u + p.kappa - p.lambda) * v;
    let fast = u - (u + p.kappa) * v;
    match frame {
        TimeFrame::Outer => (slow, fast / p.eps),
        TimeFrame::Inner => (p.eps * slow, fast),
    }
}

/// Total-QSSA system. Outer frame:
/// `du/dtau = -v`,
/// `eps dv/dtau = eta sigma v^2 - (eta + kappa_m) v - sigma u v + u`.
pub fn rhs_tq(u: f64, v: f64, p: &NondimTQ, frame: TimeFrame) -> (f64, f64) {
    let slow = -v;
    let fast = p.eta * p.sigma * v * v - (p.eta + p.kappa_m) * v - p.sigma * u * v + u;
    match frame {
        TimeFrame::Outer => (slow, fast / p.eps),
        TimeFrame::Inner => (p.eps * slow, fast),
    }
}

type Evaluator = Box<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// A planar singularly perturbed system in the canonical form
///
/// ```text
/// du/ds = eps * phi(u, v)
/// dv/ds = a u + b v + psi(u, v),    b < 0
/// ```
///
/// with `phi(0,0) = psi(0,0) = 0` and `D psi(0,0) = 0`, so the origin is a
/// fixed point whose linearization splits into a center direction and the
/// stable direction `b`. The substitution `w = a u + b v` brings the system
/// into block form; both coordinate charts are exposed because the root
/// finder and the manifold residual work in `w` while trajectories live in
/// `v`.
pub struct GeneralSP {
    pub a: f64,
    pub b: f64,
    phi: Evaluator,
    psi: Evaluator,
}

impl std::fmt::Debug for GeneralSP {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("GeneralSP")
            .field("a", &self.a)
            .field("b", &self.b)
            .finish_non_exhaustive()
    }
}

/// Spacing of the construction-time derivative checks.
const CHECK_SPACING: f64 = 1e-5;
/// Tolerance of the construction-time flatness checks.
const CHECK_TOL: f64 = 1e-8;

impl GeneralSP {
    /// Build and numerically verify the fixed-point and flatness conditions;
    /// a violated condition is reported by name.
    pub fn new(a: f64, b: f64, phi: Evaluator, psi: Evaluator) -> Result<Self, Error> {
        if !(b < 0.0) || !b.is_finite() {
            return Err(Error::validation("b", "must be finite and negative"));
        }
        if !a.is_finite() {
            return Err(Error::validation("a", "must be finite"));
        }
        let checks: [(&str, f64); 4] = [
            ("phi(0,0)", phi(0.0, 0.0)),
            ("psi(0,0)", psi(0.0, 0.0)),
            (
                "psi_u(0,0)",
                numeric::central_first(&|u| psi(u, 0.0), 0.0, CHECK_SPACING),
            ),
            (
                "psi_v(0,0)",
                numeric::central_first(&|v| psi(0.0, v), 0.0, CHECK_SPACING),
            ),
        ];
        for (name, value) in checks {
            if !value.is_finite() || value.abs() > CHECK_TOL {
                return Err(Error::ConditionViolated {
                    name: name.to_string(),
                    value,
                    tol: CHECK_TOL,
                });
            }
        }
        Ok(Self { a, b, phi, psi })
    }

    /// The HTA system as an instance of the canonical form:
    /// `a = 1`, `b = -kappa`, `psi(u, v) = -u v`.
    pub fn hta(p: &NondimHTA) -> Self {
        let (kappa, lambda) = (p.kappa, p.lambda);
        Self {
            a: 1.0,
            b: -kappa,
            phi: Box::new(move |u, v| -u + (u + kappa - lambda) * v),
            psi: Box::new(move |u, v| -u * v),
        }
    }

    /// The tQSSA system as an instance of the canonical form:
    /// `a = 1`, `b = -(eta + kappa_m)`, `psi(u, v) = eta sigma v^2 - sigma u v`.
    pub fn tq(p: &NondimTQ) -> Self {
        let (sigma, eta, kappa_m) = (p.sigma, p.eta, p.kappa_m);
        Self {
            a: 1.0,
            b: -(eta + kappa_m),
            phi: Box::new(move |_u, v| -v),
            psi: Box::new(move |u, v| eta * sigma * v * v - sigma * u * v),
        }
    }

    pub fn phi(&self, u: f64, v: f64) -> f64 {
        (self.phi)(u, v)
    }

    pub fn psi(&self, u: f64, v: f64) -> f64 {
        (self.psi)(u, v)
    }

    pub fn w_from_v(&self, u: f64, v: f64) -> f64 {
        self.a * u + self.b * v
    }

    pub fn v_from_w(&self, u: f64, w: f64) -> f64 {
        (w - self.a * u) / self.b
    }

    /// Fast equation in original coordinates: `a u + b v + psi(u, v)`.
    pub fn fast_rhs_v(&self, u: f64, v: f64) -> f64 {
        self.a * u + self.b * v + self.psi(u, v)
    }

    /// Inner-frame right-hand side in `(u, v)`.
    pub fn rhs_inner(&self, u: f64, v: f64, eps: f64) -> (f64, f64) {
        (eps * self.phi(u, v), self.fast_rhs_v(u, v))
    }

    /// Outer-frame right-hand side in `(u, v)`.
    pub fn rhs_outer(&self, u: f64, v: f64, eps: f64) -> (f64, f64) {
        (self.phi(u, v), self.fast_rhs_v(u, v) / eps)
    }

    /// Fast equation in the block chart:
    /// `dw/ds = b w + a eps phi + b psi`, both nonlinearities evaluated at
    /// `v = (w - a u)/b`.
    pub fn fast_rhs_w(&self, u: f64, w: f64, eps: f64) -> f64 {
        let v = self.v_from_w(u, w);
        self.b * w + self.a * eps * self.phi(u, v) + self.b * self.psi(u, v)
    }

    /// Inner-frame right-hand side in the block chart `(u, w)`.
    pub fn rhs_w_frame(&self, u: f64, w: f64, eps: f64) -> (f64, f64) {
        let v = self.v_from_w(u, w);
        let slow = eps * self.phi(u, v);
        (slow, self.b * w + self.a * slow + self.b * self.psi(u, v))
    }
}
