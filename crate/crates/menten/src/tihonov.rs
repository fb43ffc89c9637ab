//! Numerical exercises of the singular-perturbation machinery: boundary-layer
//! convergence (domain of influence), mu-tube confinement, convergence of the
//! full solution to the reduced one as the perturbation parameter shrinks,
//! the slow-phase `E*X/C` asymptote, and deviation metrics between the full
//! solution and its approximations.

use std::cell::Cell;

use crate::error::{Error, IntegrationFailure};
use crate::kinetics::{derive_constants, NondimHTA, NondimTQ, RateConstants, Totals};
use crate::manifold::{reconstruct_v, ManifoldCoeffs};
use crate::models::{rhs_hta, rhs_tq, GeneralSP, TimeFrame};
use crate::numeric;
use crate::ode::{integrate, Method, OdeProblem, SolverConfig, Trajectory};
use crate::qssa::{sqssa_root_nondim, tihonov_root, tq_root_nondim, ReducedSolution, Snapshot};

/// Default horizon: three depletion time constants of the reduced slow
/// equation, `3 (X_T + K_M)/(k2 E_T)`.
pub fn default_horizon(rates: &RateConstants, totals: &Totals) -> f64 {
    let d = derive_constants(rates, totals);
    3.0 * (totals.x_t + d.k_m) / (rates.k2 * totals.e_t)
}

/// Integrate the boundary-layer equation `dv/dtau = g(alpha, v)` from
/// `v(0) = beta` and decide whether `(alpha, beta)` lies in the domain of
/// influence of the stable root.
///
/// Convergence requires both `|v(tau_max) - v_root(alpha)| < tol` and a
/// non-increasing `|dv/dtau|` over the final decade of the integration.
/// A divergence to non-finite values reports `(false, last finite value)`.
pub fn boundary_layer_converges(
    sys: &GeneralSP,
    alpha: f64,
    beta: f64,
    tau_max: f64,
    tol: f64,
) -> Result<(bool, f64), Error> {
    if !(tau_max > 0.0) {
        return Err(Error::validation("tau_max", "must be positive"));
    }
    let last_finite = Cell::new(beta);
    let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        if y[0].is_finite() {
            last_finite.set(y[0]);
        }
        dy[0] = sys.fast_rhs_v(alpha, y[0]);
    };
    let problem = OdeProblem::new(rhs, 0.0, tau_max, vec![beta])?;
    let traj = match integrate(&problem, &SolverConfig::default()) {
        Ok(t) => t,
        Err(Error::Integration {
            kind: IntegrationFailure::NonFiniteRhs | IntegrationFailure::StepUnderflow,
            ..
        }) => return Ok((false, last_finite.get())),
        Err(e) => return Err(e),
    };
    let limit = traj.last_state()[0];
    let root = tihonov_root(sys, alpha, None)?;
    let v_root = sys.v_from_w(alpha, root.value);
    let mut converged = (limit - v_root).abs() < tol;
    // Approach speed must not grow over the final decade; sustained growth
    // means the layer is orbiting or escaping, not settling. Speeds below
    // the caller's tolerance are converged noise and exempt.
    let mut prev_speed = f64::INFINITY;
    for i in 0..6 {
        let tau = tau_max / 10.0 * (1.0 + 9.0 * i as f64 / 5.0);
        let v = traj.state_at(tau)?[0];
        let speed = sys.fast_rhs_v(alpha, v).abs();
        if speed > 2.0 * prev_speed + tol {
            converged = false;
        }
        prev_speed = speed;
    }
    Ok((converged, limit))
}

/// Confinement test: does a trajectory that sits inside the mu-tube around
/// the root curve at `entry_time` stay inside it up to `t_end`?
///
/// The trajectory must be two-dimensional with the slow variable first. A
/// trajectory outside the tube at entry is a caller error, not a `false`.
pub fn mu_tube_check<R: Fn(f64) -> f64>(
    traj: &Trajectory,
    root: R,
    mu: f64,
    entry_time: f64,
    t_end: f64,
) -> Result<bool, Error> {
    if traj.dim != 2 {
        return Err(Error::Precondition(
            "mu-tube check needs a (slow, fast) trajectory".to_string(),
        ));
    }
    if !(mu > 0.0) {
        return Err(Error::validation("mu", "must be positive"));
    }
    let entry = traj.state_at(entry_time)?;
    if (entry[1] - root(entry[0])).abs() >= mu {
        return Err(Error::Precondition(format!(
            "trajectory outside the mu-tube at entry time {entry_time}"
        )));
    }
    let distance_ok = |state: &[f64]| (state[1] - root(state[0])).abs() < mu;
    for (i, t) in traj.times.iter().enumerate() {
        if *t >= entry_time && *t <= t_end && !distance_ok(&traj.states[i]) {
            return Ok(false);
        }
    }
    let end = traj.state_at(t_end.min(traj.t_end()))?;
    Ok(distance_ok(&end))
}

/// Model selector for convergence sweeps; carries the base parameters whose
/// perturbation parameter the sweep overrides.
#[derive(Debug, Clone, Copy)]
pub enum SweepModel {
    Hta(NondimHTA),
    Tq(NondimTQ),
}

/// Outcome of an epsilon-convergence sweep.
///
/// `slow_errors[i]` is the sup-norm gap between the full and reduced slow
/// variable on `[0, T]` at `eps[i]`; `fast_errors[i]` the gap of the fast
/// variable on `[t1, T]`, which excludes the boundary layer. On an
/// integration failure the entries computed so far remain and `failure`
/// records the offending epsilon.
#[derive(Debug, Clone)]
pub struct SweepReport {
    pub eps: Vec<f64>,
    pub slow_errors: Vec<f64>,
    pub fast_errors: Vec<f64>,
    pub slow_slope: Option<f64>,
    pub fast_slope: Option<f64>,
    pub failure: Option<(f64, String)>,
}

/// Sweep the perturbation parameter over a strictly decreasing positive list
/// and measure the reduced problem's error against the full one.
///
/// `t1` fixes the start of the fast-variable window; when absent it defaults
/// to `5 eps` per entry, the nominal boundary-layer width in outer time.
pub fn epsilon_sweep(
    model: &SweepModel,
    eps_list: &[f64],
    t_end: f64,
    t1: Option<f64>,
) -> Result<SweepReport, Error> {
    if eps_list.is_empty() {
        return Err(Error::validation("eps_list", "must be non-empty"));
    }
    if eps_list.iter().any(|&e| !(e > 0.0)) {
        return Err(Error::validation("eps_list", "entries must be positive"));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::validation(
            "eps_list",
            "entries must strictly decrease",
        ));
    }
    if !(t_end > 0.0) {
        return Err(Error::validation("t_end", "must be positive"));
    }

    // The reduced problem does not depend on eps: solve it once.
    let reduced_rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let u = y[0];
        dy[0] = match model {
            SweepModel::Hta(p) => -p.lambda * u / (p.kappa + u),
            SweepModel::Tq(p) => -tq_root_nondim(u.max(0.0), p),
        };
    };
    let reduced_cfg = SolverConfig {
        rtol: 1e-10,
        atol: 1e-12,
        ..SolverConfig::default()
    };
    let reduced = integrate(
        &OdeProblem::new(reduced_rhs, 0.0, t_end, vec![1.0])?,
        &reduced_cfg,
    )?;
    let root = |u: f64| match model {
        SweepModel::Hta(p) => sqssa_root_nondim(u, p.kappa),
        SweepModel::Tq(p) => tq_root_nondim(u, p),
    };

    let n_grid = 400;
    let grid: Vec<f64> = (0..=n_grid)
        .map(|i| t_end * i as f64 / n_grid as f64)
        .collect();
    let reduced_samples = reduced.sample(&grid)?;

    let mut report = SweepReport {
        eps: Vec::new(),
        slow_errors: Vec::new(),
        fast_errors: Vec::new(),
        slow_slope: None,
        fast_slope: None,
        failure: None,
    };
    for &eps in eps_list {
        let rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            let (du, dv) = match model {
                SweepModel::Hta(p) => {
                    let mut q = *p;
                    q.eps = eps;
                    rhs_hta(y[0], y[1], &q, TimeFrame::Outer)
                }
                SweepModel::Tq(p) => {
                    let mut q = *p;
                    q.eps = eps;
                    rhs_tq(y[0], y[1], &q, TimeFrame::Outer)
                }
            };
            dy[0] = du;
            dy[1] = dv;
        };
        let cfg = SolverConfig {
            method: Method::ImplicitStiff,
            ..SolverConfig::default()
        };
        let full = match integrate(&OdeProblem::new(rhs, 0.0, t_end, vec![1.0, 0.0])?, &cfg) {
            Ok(t) => t,
            Err(e) => {
                report.failure = Some((eps, e.to_string()));
                break;
            }
        };
        let t1_eps = t1.unwrap_or(5.0 * eps).min(t_end);
        let mut slow_err: f64 = 0.0;
        let mut fast_err: f64 = 0.0;
        for (t, red) in grid.iter().zip(&reduced_samples) {
            let state = full.state_at(*t)?;
            slow_err = slow_err.max((state[0] - red[0]).abs());
            if *t >= t1_eps {
                fast_err = fast_err.max((state[1] - root(red[0])).abs());
            }
        }
        // The window start rarely falls on the grid; include it exactly.
        let state = full.state_at(t1_eps)?;
        let red = reduced.state_at(t1_eps)?;
        fast_err = fast_err.max((state[1] - root(red[0])).abs());

        report.eps.push(eps);
        report.slow_errors.push(slow_err);
        report.fast_errors.push(fast_err);
    }
    if report.eps.len() >= 2 {
        report.slow_slope = numeric::loglog_slope(&report.eps, &report.slow_errors).ok();
        report.fast_slope = numeric::loglog_slope(&report.eps, &report.fast_errors).ok();
    }
    Ok(report)
}

/// Slow-phase asymptote of the ratio `E(t) X(t) / C(t)`.
#[derive(Debug, Clone, Copy)]
pub struct KwReport {
    /// Slow eigenvalue magnitude of the origin linearization.
    pub alpha: f64,
    pub k_w: f64,
    pub k_d: f64,
    pub k_m: f64,
    /// Mean of `E X / C` over the late slow-phase window of the trajectory.
    pub empirical_limit: f64,
    pub relative_gap: f64,
}

/// Evaluate the closed-form `K_W` asymptote and the empirical late-phase
/// ratio from a full-system `(X, C)` trajectory.
///
/// The empirical window is the last tenth of the samples whose complex still
/// exceeds one percent of its peak; beyond that the ratio is numerically
/// 0/0. `K_D < K_W < K_M` holds for every valid parameter set.
pub fn kw_analysis(
    rates: &RateConstants,
    totals: &Totals,
    traj: &Trajectory,
) -> Result<KwReport, Error> {
    if traj.times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if traj.dim != 2 {
        return Err(Error::Precondition(
            "K_W analysis needs a full-system (X, C) trajectory".to_string(),
        ));
    }
    let d = derive_constants(rates, totals);
    let s = d.k_m + totals.e_t;
    let disc = (1.0 - 4.0 * rates.k2 * totals.e_t / (rates.k1 * s * s)).max(0.0);
    let alpha = 0.5 * rates.k1 * s * (1.0 - disc.sqrt());
    let k_w = (rates.k2 - alpha) / alpha * totals.e_t;
    if !(d.k_d < k_w && k_w < d.k_m) {
        return Err(Error::validation(
            "K_W",
            format!(
                "bracket K_D < K_W < K_M violated: {} {} {}",
                d.k_d, k_w, d.k_m
            ),
        ));
    }

    let c_peak = traj
        .states
        .iter()
        .map(|s| s[1])
        .fold(f64::NEG_INFINITY, f64::max);
    let eligible: Vec<usize> = (0..traj.times.len())
        .filter(|&i| traj.states[i][1] > 0.01 * c_peak)
        .collect();
    if eligible.len() < 10 {
        return Err(Error::InsufficientData(
            "complex never rises meaningfully above threshold".to_string(),
        ));
    }
    let start = eligible.len() - (eligible.len() / 10).max(1);
    let window = &eligible[start..];
    let mut acc = 0.0;
    for &i in window {
        let (x, c) = (traj.states[i][0], traj.states[i][1]);
        acc += (totals.e_t - c) * x / c;
    }
    let empirical_limit = acc / window.len() as f64;
    Ok(KwReport {
        alpha,
        k_w,
        k_d: d.k_d,
        k_m: d.k_m,
        empirical_limit,
        relative_gap: (empirical_limit - k_w).abs() / k_w,
    })
}

/// Max/RMS deviation pair.
#[derive(Debug, Clone, Copy, Default)]
pub struct Dev {
    pub max: f64,
    pub rms: f64,
}

/// Deviations split by reaction phase.
#[derive(Debug, Clone, Copy, Default)]
pub struct WindowedDev {
    pub transient: Dev,
    pub slow_phase: Dev,
    pub overall: Dev,
}

/// Slow- and fast-variable deviations of one approximation from the full
/// solution.
#[derive(Debug, Clone, Copy, Default)]
pub struct ApproxSide {
    pub slow: WindowedDev,
    pub fast: WindowedDev,
}

/// Frame in which a center-manifold reconstruction is compared against the
/// full solution's phase-plane graph.
pub enum CmFrame {
    Hta(NondimHTA, ManifoldCoeffs),
    Tq(NondimTQ, ManifoldCoeffs),
}

/// Deviation metrics behind the figure-style comparisons.
#[derive(Debug, Clone, Copy)]
pub struct ApproxReport {
    pub c_peak: f64,
    pub t_peak: f64,
    /// First time the complex reaches 95% of its peak; the transient window
    /// ends here and the slow phase begins.
    pub t_split: f64,
    pub sqssa: ApproxSide,
    pub tqssa: ApproxSide,
    /// Zeroth-order (eps = 0) manifold reconstruction deviation, in complex
    /// units, against the full phase-plane graph over the slow phase (the
    /// boundary layer is vertical in the phase plane and would swamp any
    /// graph-form comparison).
    pub cm0: Option<Dev>,
    /// First-order (eps at its model value) reconstruction deviation.
    pub cm1: Option<Dev>,
}

struct DevAccumulator {
    max: f64,
    sum_sq: f64,
    n: usize,
}

impl DevAccumulator {
    fn new() -> Self {
        Self {
            max: 0.0,
            sum_sq: 0.0,
            n: 0,
        }
    }

    fn push(&mut self, d: f64) {
        let d = d.abs();
        self.max = self.max.max(d);
        self.sum_sq += d * d;
        self.n += 1;
    }

    fn dev(&self) -> Dev {
        Dev {
            max: self.max,
            rms: if self.n == 0 {
                0.0
            } else {
                (self.sum_sq / self.n as f64).sqrt()
            },
        }
    }
}

fn windowed(devs: &[(f64, f64)], t_split: f64) -> WindowedDev {
    let mut transient = DevAccumulator::new();
    let mut slow_phase = DevAccumulator::new();
    let mut overall = DevAccumulator::new();
    for &(t, d) in devs {
        overall.push(d);
        if t <= t_split {
            transient.push(d);
        } else {
            slow_phase.push(d);
        }
    }
    WindowedDev {
        transient: transient.dev(),
        slow_phase: slow_phase.dev(),
        overall: overall.dev(),
    }
}

/// Compare the full `(X, C)` solution with both reduced solutions and,
/// optionally, with the phase-plane center-manifold reconstructions.
///
/// All inputs must stem from the same parameter set; reduced solutions carry
/// their snapshot and a mismatch is an error. Deviations are evaluated on
/// the full trajectory's own nodes, clipped to the shortest common horizon.
pub fn approximation_report(
    full: &Trajectory,
    sqssa: &ReducedSolution,
    tqssa: &ReducedSolution,
    cm: Option<&CmFrame>,
    rates: &RateConstants,
    totals: &Totals,
) -> Result<ApproxReport, Error> {
    if full.times.is_empty() {
        return Err(Error::EmptyTrajectory);
    }
    if full.dim != 2 {
        return Err(Error::Precondition(
            "approximation report needs a full (X, C) trajectory".to_string(),
        ));
    }
    for (name, sol) in [("sqssa", sqssa), ("tqssa", tqssa)] {
        match &sol.snapshot {
            Snapshot::Dimensional {
                rates: r,
                totals: t,
            } => {
                if r != rates || t != totals {
                    return Err(Error::SnapshotMismatch(format!(
                        "{name} solution was produced under different parameters"
                    )));
                }
            }
            Snapshot::General => {
                return Err(Error::SnapshotMismatch(format!(
                    "{name} solution carries no dimensional snapshot"
                )))
            }
        }
    }

    let t_end = full.t_end().min(sqssa.slow.t_end()).min(tqssa.slow.t_end());
    let times: Vec<f64> = full.times.iter().copied().filter(|&t| t <= t_end).collect();
    if times.len() < 2 {
        return Err(Error::InsufficientData(
            "no common time window between full and reduced solutions".to_string(),
        ));
    }

    let mut c_peak = f64::NEG_INFINITY;
    let mut t_peak = times[0];
    for (i, &t) in times.iter().enumerate() {
        if full.states[i][1] > c_peak {
            c_peak = full.states[i][1];
            t_peak = t;
        }
    }
    let t_split = times
        .iter()
        .enumerate()
        .find(|(i, _)| full.states[*i][1] >= 0.95 * c_peak)
        .map(|(_, &t)| t)
        .unwrap_or(t_peak);

    let sq = sqssa.sample(&times)?;
    let tq = tqssa.sample(&times)?;
    let mut sq_slow = Vec::with_capacity(times.len());
    let mut sq_fast = Vec::with_capacity(times.len());
    let mut tq_slow = Vec::with_capacity(times.len());
    let mut tq_fast = Vec::with_capacity(times.len());
    for (i, &t) in times.iter().enumerate() {
        let (x_f, c_f) = (full.states[i][0], full.states[i][1]);
        sq_slow.push((t, sq[i].0 - x_f));
        sq_fast.push((t, sq[i].1 - c_f));
        tq_slow.push((t, tq[i].0 - (x_f + c_f)));
        tq_fast.push((t, tq[i].1 - c_f));
    }

    let (cm0, cm1) = match cm {
        None => (None, None),
        Some(frame) => {
            let mut acc0 = DevAccumulator::new();
            let mut acc1 = DevAccumulator::new();
            for (i, &t) in times.iter().enumerate() {
                if t < t_split {
                    continue;
                }
                let (x_f, c_f) = (full.states[i][0], full.states[i][1]);
                let (u, v_data, coeffs, eps, fast_scale) = match frame {
                    CmFrame::Hta(p, c) => (
                        x_f / p.scales.slow,
                        c_f / p.scales.fast,
                        c,
                        p.eps,
                        p.scales.fast,
                    ),
                    CmFrame::Tq(p, c) => (
                        (x_f + c_f) / p.scales.slow,
                        c_f / p.scales.fast,
                        c,
                        p.eps,
                        p.scales.fast,
                    ),
                };
                acc0.push(fast_scale * (reconstruct_v(coeffs, u, 0.0) - v_data));
                acc1.push(fast_scale * (reconstruct_v(coeffs, u, eps) - v_data));
            }
            (Some(acc0.dev()), Some(acc1.dev()))
        }
    };

    Ok(ApproxReport {
        c_peak,
        t_peak,
        t_split,
        sqssa: ApproxSide {
            slow: windowed(&sq_slow, t_split),
            fast: windowed(&sq_fast, t_split),
        },
        tqssa: ApproxSide {
            slow: windowed(&tq_slow, t_split),
            fast: windowed(&tq_fast, t_split),
        },
        cm0,
        cm1,
    })
}
