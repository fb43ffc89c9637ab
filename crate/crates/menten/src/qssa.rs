//! Quasi-steady-state reductions: the algebraic closures of the complex in
//! both variable sets, the reduced one-dimensional slow equations, and the
//! Newton root finder that realizes the Tihonov reduced problem for a
//! generic singularly perturbed system.

use crate::error::Error;
use crate::kinetics::{NondimTQ, RateConstants, Totals};
use crate::models::GeneralSP;
use crate::numeric;
use crate::ode::{integrate, OdeProblem, SolverConfig, Trajectory};

/// Standard QSSA closure in original variables: `C = E_T X / (X + K_M)`.
pub fn sqssa_complex(x: f64, e_t: f64, k_m: f64) -> f64 {
    e_t * x / (x + k_m)
}

/// Nondimensional twin of [`sqssa_complex`]: `v = u / (kappa + u)`.
pub fn sqssa_root_nondim(u: f64, kappa: f64) -> f64 {
    u / (kappa + u)
}

/// Reduced slow equation of the sQSSA:
/// `dX/dt = -V_max X / (X + K_M)` with `V_max = k2 E_T`.
pub fn sqssa_reduced_rhs(x: f64, rates: &RateConstants, totals: &Totals) -> f64 {
    let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
    -rates.k2 * totals.e_t * x / (x + k_m)
}

/// Biologically admissible root of the total-QSSA quadratic
/// `Xbar E_T - (Xbar + E_T + K_M) C + C^2 = 0`.
///
/// Evaluated in the cancellation-free form
/// `2 E_T Xbar / [(E_T + K_M + Xbar) + sqrt((E_T + K_M + Xbar)^2 - 4 E_T Xbar)]`;
/// the textbook difference form loses precision exactly where the reduction
/// is valid (`4 E_T Xbar` small against the square).
pub fn cminus(xbar: f64, e_t: f64, k_m: f64) -> Result<f64, Error> {
    let s = e_t + k_m + xbar;
    let disc = s * s - 4.0 * e_t * xbar;
    if !(disc >= 0.0) {
        return Err(Error::validation(
            "discriminant",
            format!("negative discriminant {disc} for Xbar={xbar}, E_T={e_t}, K_M={k_m}"),
        ));
    }
    Ok(2.0 * e_t * xbar / (s + disc.sqrt()))
}

/// Reduced slow equation of the tQSSA: `dXbar/dt = -k2 C_-(Xbar)`.
pub fn tqssa_reduced_rhs(xbar: f64, rates: &RateConstants, totals: &Totals) -> Result<f64, Error> {
    let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
    Ok(-rates.k2 * cminus(xbar, totals.e_t, k_m)?)
}

/// Nondimensional total-QSSA root: the admissible solution of
/// `eta sigma v^2 - (eta + kappa_m) v - sigma u v + u = 0`,
/// evaluated in the cancellation-free form. Falls back to the linear root
/// `u / (eta + kappa_m + sigma u)` when the quadratic coefficient vanishes.
pub fn tq_root_nondim(u: f64, p: &NondimTQ) -> f64 {
    let beta = p.eta + p.kappa_m;
    let es = p.eta * p.sigma;
    let s = beta + p.sigma * u;
    if es < 1e-300 {
        return u / s;
    }
    let disc = (s * s - 4.0 * es * u).max(0.0);
    2.0 * u / (s + disc.sqrt())
}

/// Result of a Newton search for the fast-equation root.
///
/// `value` is the root in the block coordinate `w`; map it back with
/// [`GeneralSP::v_from_w`]. `stable` records the sign test
/// `d g / d w < 0` at the root.
#[derive(Debug, Clone, Copy)]
pub struct RootResult {
    pub value: f64,
    pub residual: f64,
    pub stable: bool,
    pub iterations: usize,
}

const ROOT_MAX_ITER: usize = 50;

/// Newton iteration on the fast equation `g(u, w) = 0` of `sys` in the block
/// chart with `eps = 0`.
///
/// The default initial guess places the fast variable on its linearized root
/// `v = u |a/b|`. The derivative is a central difference; a near-zero
/// derivative aborts with a singular-Jacobian error, and non-convergence
/// after 50 iterations reports the last iterate.
pub fn tihonov_root(sys: &GeneralSP, u: f64, guess: Option<f64>) -> Result<RootResult, Error> {
    let g = |w: f64| sys.fast_rhs_w(u, w, 0.0);
    let mut w = guess.unwrap_or_else(|| sys.a * u + sys.b * (u * (sys.a / sys.b).abs()));
    let g_scale = sys.b.abs() * (1.0 + u.abs());
    let mut iterations = 0;
    loop {
        let res = g(w);
        if !res.is_finite() {
            return Err(Error::RootNoConvergence {
                last: w,
                iterations,
            });
        }
        if res.abs() <= 1e-13 * (g_scale + sys.b.abs() * w.abs()) {
            let h = 1e-6 * w.abs().max(1.0);
            let slope = numeric::central_first(&g, w, h);
            return Ok(RootResult {
                value: w,
                residual: res,
                stable: slope < 0.0,
                iterations,
            });
        }
        if iterations >= ROOT_MAX_ITER {
            return Err(Error::RootNoConvergence {
                last: w,
                iterations,
            });
        }
        let h = 1e-6 * w.abs().max(1.0);
        let slope = numeric::central_first(&g, w, h);
        if slope.abs() < 1e-10 * sys.b.abs() {
            return Err(Error::RootSingular { at: w });
        }
        w -= res / slope;
        iterations += 1;
    }
}

/// Which reduction produced a [`ReducedSolution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReducedKind {
    Sqssa,
    Tqssa,
    General,
}

/// Parameters a reduced solution was produced under, kept for comparison
/// safety when solutions from different runs meet in a report.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Snapshot {
    Dimensional {
        rates: RateConstants,
        totals: Totals,
    },
    General,
}

/// A solved reduced problem: the slow trajectory plus the fast variable
/// reconstructed from its algebraic root at every node. The fast variable
/// starts at the root value, not at zero; only the slow initial condition
/// can be imposed on a reduced problem.
#[derive(Debug, Clone)]
pub struct ReducedSolution {
    pub kind: ReducedKind,
    pub slow: Trajectory,
    pub fast: Vec<f64>,
    pub snapshot: Snapshot,
}

impl ReducedSolution {
    /// Slow value and root-reconstructed fast value at each requested time.
    /// Dimensional kinds recompute the root from the interpolated slow value;
    /// a general solution carries no evaluator, so use its stored nodes.
    pub fn sample(&self, times: &[f64]) -> Result<Vec<(f64, f64)>, Error> {
        let (rates, totals) = match &self.snapshot {
            Snapshot::Dimensional { rates, totals } => (rates, totals),
            Snapshot::General => {
                return Err(Error::Precondition(
                    "general reduced solutions sample at stored nodes only".to_string(),
                ))
            }
        };
        let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
        let slow = self.slow.sample(times)?;
        slow.iter()
            .map(|s| {
                let x = s[0];
                let c = match self.kind {
                    ReducedKind::Sqssa => sqssa_complex(x, totals.e_t, k_m),
                    ReducedKind::Tqssa => cminus(x, totals.e_t, k_m)?,
                    ReducedKind::General => unreachable!(),
                };
                Ok((x, c))
            })
            .collect()
    }
}

/// Integrate the one-dimensional reduced equation of the chosen reduction
/// and reconstruct the fast variable along it.
pub fn solve_reduced(
    kind: ReducedKind,
    rates: &RateConstants,
    totals: &Totals,
    x0: f64,
    t_end: f64,
    config: &SolverConfig,
) -> Result<ReducedSolution, Error> {
    if !(x0 >= 0.0) {
        return Err(Error::validation("x0", "must be nonnegative"));
    }
    let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
    let (rates_c, totals_c) = (*rates, *totals);
    let slow = match kind {
        ReducedKind::Sqssa => {
            let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] = sqssa_reduced_rhs(y[0].max(0.0), &rates_c, &totals_c);
            };
            integrate(&OdeProblem::new(rhs, 0.0, t_end, vec![x0])?, config)?
        }
        ReducedKind::Tqssa => {
            let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
                dy[0] =
                    -rates_c.k2 * cminus(y[0].max(0.0), totals_c.e_t, k_m).unwrap_or(totals_c.e_t);
            };
            integrate(&OdeProblem::new(rhs, 0.0, t_end, vec![x0])?, config)?
        }
        ReducedKind::General => {
            return Err(Error::Precondition(
                "use solve_reduced_general for canonical-form systems".to_string(),
            ))
        }
    };
    let fast = slow
        .states
        .iter()
        .map(|s| match kind {
            ReducedKind::Sqssa => Ok(sqssa_complex(s[0], totals.e_t, k_m)),
            ReducedKind::Tqssa => cminus(s[0], totals.e_t, k_m),
            ReducedKind::General => unreachable!(),
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReducedSolution {
        kind,
        slow,
        fast,
        snapshot: Snapshot::Dimensional {
            rates: *rates,
            totals: *totals,
        },
    })
}

/// Tihonov reduced problem for a canonical-form system: integrate
/// `du/dtau = phi(u, v_root(u))` with the root supplied by Newton iteration,
/// then reconstruct `v` along the solution.
pub fn solve_reduced_general(
    sys: &GeneralSP,
    u0: f64,
    tau_end: f64,
    config: &SolverConfig,
) -> Result<ReducedSolution, Error> {
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let u = y[0];
        // Newton from the default guess; on failure freeze the slow flow,
        // which the step controller then rejects via the error estimate.
        dy[0] = match tihonov_root(sys, u, None) {
            Ok(root) => sys.phi(u, sys.v_from_w(u, root.value)),
            Err(_) => 0.0,
        };
    };
    let slow = integrate(&OdeProblem::new(rhs, 0.0, tau_end, vec![u0])?, config)?;
    let fast = slow
        .states
        .iter()
        .map(|s| tihonov_root(sys, s[0], None).map(|r| sys.v_from_w(s[0], r.value)))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(ReducedSolution {
        kind: ReducedKind::General,
        slow,
        fast,
        snapshot: Snapshot::General,
    })
}
