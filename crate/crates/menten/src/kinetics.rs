//! Dimensional and nondimensional kinetic parameters, the derivations
//! between them, and conservation-law residuals.
//!
//! All types are immutable value records; every operation here is pure.
//! Derived constants are computed once at construction and stored, so every
//! consumer sees one consistent set.

use crate::error::Error;
use crate::ode::Trajectory;

fn check_positive(field: &'static str, value: f64) -> Result<(), Error> {
    if !value.is_finite() || value <= 0.0 {
        return Err(Error::validation(
            field,
            format!("must be strictly positive and finite, got {value}"),
        ));
    }
    Ok(())
}

/// Reaction rates of the scheme `X + E <-> C -> X_p + E`.
///
/// `k1` is second order (1/(concentration * time)); `k_minus1` and `k2` are
/// first order (1/time). Zero rates are rejected rather than clamped:
/// degenerate kinetics silently break the nondimensionalizations downstream.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateConstants {
    pub k1: f64,
    pub k_minus1: f64,
    pub k2: f64,
}

impl RateConstants {
    pub fn new(k1: f64, k_minus1: f64, k2: f64) -> Result<Self, Error> {
        check_positive("k1", k1)?;
        check_positive("k_minus1", k_minus1)?;
        check_positive("k2", k2)?;
        Ok(Self { k1, k_minus1, k2 })
    }
}

/// Conserved totals: enzyme `E_T` and substrate `X_T`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Totals {
    pub e_t: f64,
    pub x_t: f64,
}

impl Totals {
    pub fn new(e_t: f64, x_t: f64) -> Result<Self, Error> {
        check_positive("E_T", e_t)?;
        check_positive("X_T", x_t)?;
        Ok(Self { e_t, x_t })
    }
}

/// Constants derived from rates and totals.
///
/// `k_m` is the Michaelis constant `(k_minus1 + k2)/k1`, `k_d` the
/// dissociation constant `k_minus1/k1`, `k` the Van Slyke-Cullen constant
/// `k2/k1`; `k_m = k_d + k` identically. Three perturbation parameters are
/// carried: `eps_hta = E_T/X_T`, `eps_ss = E_T/(X_T + K_M)`, and the total
/// one `eps_tq = K*E_T/(E_T + K_M + X_T)^2`, which is below `1/4` for every
/// positive parameter set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DerivedConstants {
    pub k_m: f64,
    pub k_d: f64,
    pub k: f64,
    pub eps_hta: f64,
    pub eps_ss: f64,
    pub eps_tq: f64,
}

/// Compute every derived constant for a parameter set.
pub fn derive_constants(rates: &RateConstants, totals: &Totals) -> DerivedConstants {
    let k_m = (rates.k_minus1 + rates.k2) / rates.k1;
    let k_d = rates.k_minus1 / rates.k1;
    let k = rates.k2 / rates.k1;
    let total = totals.e_t + k_m + totals.x_t;
    DerivedConstants {
        k_m,
        k_d,
        k,
        eps_hta: totals.e_t / totals.x_t,
        eps_ss: totals.e_t / (totals.x_t + k_m),
        eps_tq: k * totals.e_t / (total * total),
    }
}

/// Scale factors mapping a nondimensional description back to dimensional
/// units: `t = time * tau`, `slow_dimensional = slow * u`,
/// `fast_dimensional = fast * v`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateScales {
    pub time: f64,
    pub slow: f64,
    pub fast: f64,
}

/// Heineken-Tsuchiya-Aris nondimensional parameters.
///
/// `kappa = K_M/X_T`, `lambda = k2/(k1*X_T)`, `eps = E_T/X_T`, with
/// `kappa > lambda > 0` for any valid rate set. The slow variable is
/// `u = X/X_T`, the fast one `v = C/E_T`, and `tau = k1*E_T*t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimHTA {
    pub kappa: f64,
    pub lambda: f64,
    pub eps: f64,
    pub scales: StateScales,
}

impl NondimHTA {
    /// Build directly from nondimensional values (unit scales).
    ///
    /// Every kinetics-derived set satisfies `kappa > lambda` (since
    /// `K_M > K`); raw sets may sit on the `k_minus1 -> 0` boundary
    /// `kappa = lambda`, so only positivity is enforced here.
    pub fn from_parts(kappa: f64, lambda: f64, eps: f64) -> Result<Self, Error> {
        check_positive("kappa", kappa)?;
        check_positive("lambda", lambda)?;
        check_positive("eps", eps)?;
        if kappa < lambda {
            return Err(Error::validation(
                "kappa",
                format!("must be at least lambda (K_M >= K), got kappa={kappa}, lambda={lambda}"),
            ));
        }
        Ok(Self {
            kappa,
            lambda,
            eps,
            scales: StateScales {
                time: 1.0,
                slow: 1.0,
                fast: 1.0,
            },
        })
    }

    /// Constant of the single-parameter normalization used when `kappa = 1`:
    /// the slow equation then reads `du/dtau = -u + (u + c)v` with
    /// `c = kappa - lambda`.
    pub fn carr_c(&self) -> f64 {
        self.kappa - self.lambda
    }

    pub fn to_nondim(&self, state: &StateMM) -> (f64, f64) {
        (state.x / self.scales.slow, state.c / self.scales.fast)
    }

    pub fn to_dimensional(&self, u: f64, v: f64) -> StateMM {
        StateMM {
            x: u * self.scales.slow,
            c: v * self.scales.fast,
        }
    }
}

/// Nondimensionalize via the Heineken-Tsuchiya-Aris scaling.
pub fn nondim_hta(rates: &RateConstants, totals: &Totals) -> NondimHTA {
    let d = derive_constants(rates, totals);
    NondimHTA {
        kappa: d.k_m / totals.x_t,
        lambda: rates.k2 / (rates.k1 * totals.x_t),
        eps: totals.e_t / totals.x_t,
        scales: StateScales {
            time: 1.0 / (rates.k1 * totals.e_t),
            slow: totals.x_t,
            fast: totals.e_t,
        },
    }
}

/// Total-QSSA nondimensional parameters.
///
/// With `D = E_T + K_M + X_T`: `sigma = X_T/D`, `eta = E_T/D`,
/// `kappa_m = K_M/D` (so `sigma + eta + kappa_m = 1`), and
/// `eps = K*E_T/D^2`. The slow variable is `u = Xbar/X_T`, the fast one
/// `v = C*D/(E_T*X_T)`, and the time unit is `D/(k2*E_T)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NondimTQ {
    pub sigma: f64,
    pub eta: f64,
    pub kappa_m: f64,
    pub eps: f64,
    pub scales: StateScales,
}

impl NondimTQ {
    /// Build directly from nondimensional values (unit scales).
    pub fn from_parts(sigma: f64, eta: f64, kappa_m: f64, eps: f64) -> Result<Self, Error> {
        check_positive("sigma", sigma)?;
        check_positive("eta", eta)?;
        check_positive("kappa_m", kappa_m)?;
        if eps < 0.0 || !eps.is_finite() {
            return Err(Error::validation("eps", "must be finite and nonnegative"));
        }
        let sum = sigma + eta + kappa_m;
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::validation(
                "sigma",
                format!("sigma + eta + kappa_m must equal 1, got {sum}"),
            ));
        }
        Ok(Self {
            sigma,
            eta,
            kappa_m,
            eps,
            scales: StateScales {
                time: 1.0,
                slow: 1.0,
                fast: 1.0,
            },
        })
    }

    pub fn to_nondim(&self, state: &StateLumped) -> (f64, f64) {
        (state.xbar / self.scales.slow, state.c / self.scales.fast)
    }

    pub fn to_dimensional(&self, u: f64, v: f64) -> StateLumped {
        StateLumped {
            xbar: u * self.scales.slow,
            c: v * self.scales.fast,
        }
    }
}

/// Nondimensionalize via the total-QSSA scaling.
pub fn nondim_tq(rates: &RateConstants, totals: &Totals) -> NondimTQ {
    let d = derive_constants(rates, totals);
    let total = totals.e_t + d.k_m + totals.x_t;
    NondimTQ {
        sigma: totals.x_t / total,
        eta: totals.e_t / total,
        kappa_m: d.k_m / total,
        eps: d.eps_tq,
        scales: StateScales {
            time: total / (rates.k2 * totals.e_t),
            slow: totals.x_t,
            fast: totals.e_t * totals.x_t / total,
        },
    }
}

/// State of the full system in original variables: free substrate `X` and
/// complex `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateMM {
    pub x: f64,
    pub c: f64,
}

impl StateMM {
    /// Physical admissibility: `0 <= C <= min(E_T, X_T)`, `X >= 0`,
    /// `X + C <= X_T` (up to `slack` to absorb integration error).
    pub fn admissible(&self, totals: &Totals, slack: f64) -> bool {
        self.c >= -slack
            && self.c <= totals.e_t.min(totals.x_t) + slack
            && self.x >= -slack
            && self.x + self.c <= totals.x_t + slack
    }
}

/// State of the lumped system: total substrate `Xbar = X + C` and complex `C`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateLumped {
    pub xbar: f64,
    pub c: f64,
}

impl StateLumped {
    pub fn admissible(&self, totals: &Totals, slack: f64) -> bool {
        self.c >= -slack
            && self.c <= totals.e_t.min(self.xbar + slack) + slack
            && self.xbar >= -slack
            && self.xbar <= totals.x_t + slack
    }

    pub fn from_full(state: &StateMM) -> Self {
        Self {
            xbar: state.x + state.c,
            c: state.c,
        }
    }
}

/// Worst-case conservation residuals along a full-system trajectory in
/// `(X, C)` variables.
///
/// The algebraically eliminated species are reconstructed by quadrature of
/// their production rates (`X_p` from `k2*C`, `E` from `-dC/dt`), not from
/// the conservation laws themselves, which would be identically satisfied.
/// Returns `(max |X + C + X_p - X_T|, max |E + C - E_T|)` over all samples.
/// Quadrature is composite Simpson over four dense-output panels per stored
/// step, so its error stays subordinate to the integration tolerance even
/// through the fast transient.
pub fn conservation_residuals(
    traj: &Trajectory,
    rates: &RateConstants,
    totals: &Totals,
) -> Result<(f64, f64), Error> {
    if traj.times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if traj.dim != 2 {
        return Err(Error::Precondition(format!(
            "conservation check needs a 2-dimensional (X, C) trajectory, got dim {}",
            traj.dim
        )));
    }
    let d = derive_constants(rates, totals);
    let c_rate = |x: f64, c: f64| rates.k1 * (x * (totals.e_t - c) - d.k_m * c);

    let mut xp = 0.0; // integral of k2*C
    let mut q = 0.0; // integral of dC/dt evaluated from states
    let mut res_substrate: f64 = 0.0;
    let mut res_enzyme: f64 = 0.0;
    for i in 0..traj.times.len() {
        let x = traj.states[i][0];
        let c = traj.states[i][1];
        if i > 0 {
            let (t0, t1) = (traj.times[i - 1], traj.times[i]);
            let panel = (t1 - t0) / 4.0;
            for k in 0..4 {
                let a = t0 + panel * k as f64;
                let sa = if k == 0 {
                    traj.states[i - 1].clone()
                } else {
                    traj.state_at(a)?
                };
                let sm = traj.state_at(a + 0.5 * panel)?;
                let sb = if k == 3 {
                    traj.states[i].clone()
                } else {
                    traj.state_at(a + panel)?
                };
                xp += panel / 6.0 * rates.k2 * (sa[1] + 4.0 * sm[1] + sb[1]);
                q += panel / 6.0
                    * (c_rate(sa[0], sa[1]) + 4.0 * c_rate(sm[0], sm[1]) + c_rate(sb[0], sb[1]));
            }
        }
        res_substrate = res_substrate.max((x + c + xp - totals.x_t).abs());
        // E reconstructed as E_T - q, so the enzyme law reduces to |C - q|.
        res_enzyme = res_enzyme.max((c - q).abs());
    }
    Ok((res_substrate, res_enzyme))
}
