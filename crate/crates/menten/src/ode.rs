//! Adaptive time integration: an embedded 4(5) explicit pair with PI step
//! control for non-stiff work, and a step-doubled backward Euler scheme with
//! Richardson extrapolation and a finite-difference Newton iteration for
//! stiff boundary layers. The extrapolated doubling update is L-stable and
//! one order above its own error estimate, so the accumulated error tracks
//! the requested tolerance instead of drifting a power behind it.
//!
//! Each integration owns its workspace; the right-hand side must be pure
//! with respect to the run (same inputs, same outputs). Accepted steps store
//! the state and its derivative, so dense output is cubic Hermite and exact
//! at the nodes.

use crate::error::{Error, IntegrationFailure};

/// Integration scheme selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    ExplicitAdaptive,
    ImplicitStiff,
}

/// Tolerances and step-control limits.
#[derive(Debug, Clone, Copy)]
pub struct SolverConfig {
    pub method: Method,
    pub rtol: f64,
    pub atol: f64,
    /// Initial step; estimated from the problem when absent.
    pub h_init: Option<f64>,
    /// Hard cap on the step size; the full span when absent.
    pub h_max: Option<f64>,
    pub max_steps: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            method: Method::ExplicitAdaptive,
            rtol: 1e-8,
            atol: 1e-10,
            h_init: None,
            h_max: None,
            max_steps: 1_000_000,
        }
    }
}

impl SolverConfig {
    pub fn explicit() -> Self {
        Self::default()
    }

    pub fn implicit() -> Self {
        Self {
            method: Method::ImplicitStiff,
            ..Self::default()
        }
    }

    pub fn with_tolerances(mut self, rtol: f64, atol: f64) -> Self {
        self.rtol = rtol;
        self.atol = atol;
        self
    }

    pub fn validate(&self) -> Result<(), Error> {
        if !(self.rtol >= 1e-14 && self.rtol.is_finite()) {
            return Err(Error::validation("rtol", "must be >= 1e-14 and finite"));
        }
        if !(self.atol > 0.0 && self.atol.is_finite()) {
            return Err(Error::validation("atol", "must be positive and finite"));
        }
        for (name, h) in [("h_init", self.h_init), ("h_max", self.h_max)] {
            if let Some(h) = h {
                if !(h > 0.0 && h.is_finite()) {
                    return Err(Error::validation(name, "must be positive and finite"));
                }
            }
        }
        if self.max_steps == 0 {
            return Err(Error::validation("max_steps", "must be positive"));
        }
        Ok(())
    }
}

/// An initial value problem `dy/dt = rhs(t, y)` on `[t0, t_end]`.
pub struct OdeProblem<F> {
    pub rhs: F,
    pub t0: f64,
    pub t_end: f64,
    pub y0: Vec<f64>,
}

impl<F: Fn(f64, &[f64], &mut [f64])> OdeProblem<F> {
    pub fn new(rhs: F, t0: f64, t_end: f64, y0: Vec<f64>) -> Result<Self, Error> {
        if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
            return Err(Error::validation("t_end", "must be finite and exceed t0"));
        }
        if y0.is_empty() {
            return Err(Error::validation("y0", "must have at least one component"));
        }
        if y0.iter().any(|v| !v.is_finite()) {
            return Err(Error::validation("y0", "must be finite"));
        }
        Ok(Self { rhs, t0, t_end, y0 })
    }
}

/// Work counters from one integration.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Stats {
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    pub rhs_evals: usize,
    pub newton_iters: usize,
    /// Largest scaled local error estimate among accepted steps (<= 1).
    pub max_accepted_err: f64,
}

/// Time-stamped solution sequence with stored derivatives and work counters.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// Right-hand side at each stored node; drives Hermite interpolation.
    pub derivs: Vec<Vec<f64>>,
    /// Optional quartic correction per segment. The dense interpolant is the
    /// cubic Hermite of the bracketing nodes plus `theta^2 (1-theta)^2 *
    /// quartic`; the explicit pair fills it from its stages so that dense
    /// output keeps the order of the discrete solution.
    pub quartic: Vec<Vec<f64>>,
    pub stats: Stats,
    pub dim: usize,
}

impl Trajectory {
    /// Assemble a trajectory from precomputed nodes; times must strictly
    /// increase and all rows must share one dimension.
    pub fn from_nodes(
        times: Vec<f64>,
        states: Vec<Vec<f64>>,
        derivs: Vec<Vec<f64>>,
    ) -> Result<Self, Error> {
        if times.is_empty() || times.len() != states.len() || times.len() != derivs.len() {
            return Err(Error::Precondition(
                "trajectory nodes must be non-empty and aligned".to_string(),
            ));
        }
        let dim = states[0].len();
        if states.iter().any(|s| s.len() != dim) || derivs.iter().any(|d| d.len() != dim) {
            return Err(Error::Precondition(
                "trajectory rows must share one dimension".to_string(),
            ));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Precondition(
                "trajectory times must strictly increase".to_string(),
            ));
        }
        let quartic = vec![vec![0.0; dim]; times.len() - 1];
        Ok(Self {
            times,
            states,
            derivs,
            quartic,
            stats: Stats::default(),
            dim,
        })
    }

    pub fn t0(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        *self.times.last().unwrap()
    }

    pub fn last_state(&self) -> &[f64] {
        self.states.last().unwrap()
    }

    /// Cubic-Hermite dense output at `t`; exact at stored nodes.
    pub fn state_at(&self, t: f64) -> Result<Vec<f64>, Error> {
        let (t0, t_end) = (self.t0(), self.t_end());
        let slack = 1e-9 * (t_end - t0).abs().max(1e-300);
        if t < t0 - slack || t > t_end + slack {
            return Err(Error::SampleOutOfRange { t, t0, t_end });
        }
        let t = t.clamp(t0, t_end);
        // Index of the segment [times[i], times[i+1]] containing t.
        let i = match self
            .times
            .binary_search_by(|probe| probe.partial_cmp(&t).unwrap())
        {
            Ok(k) => return Ok(self.states[k].clone()),
            Err(k) => k.saturating_sub(1).min(self.times.len().saturating_sub(2)),
        };
        if self.times.len() == 1 {
            return Ok(self.states[0].clone());
        }
        let (ta, tb) = (self.times[i], self.times[i + 1]);
        let h = tb - ta;
        let theta = (t - ta) / h;
        let omt = 1.0 - theta;
        let (t2, t3) = (theta * theta, theta * theta * theta);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + theta;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        let bump = t2 * omt * omt;
        let mut out = vec![0.0; self.dim];
        for j in 0..self.dim {
            out[j] = h00 * self.states[i][j]
                + h10 * h * self.derivs[i][j]
                + h01 * self.states[i + 1][j]
                + h11 * h * self.derivs[i + 1][j]
                + bump * self.quartic[i][j];
        }
        Ok(out)
    }

    /// Dense output at each requested time.
    pub fn sample(&self, times: &[f64]) -> Result<Vec<Vec<f64>>, Error> {
        times.iter().map(|&t| self.state_at(t)).collect()
    }
}

const SAFETY: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 5.0;

/// Scaled RMS norm of a local error estimate.
fn error_norm(err: &[f64], y_old: &[f64], y_new: &[f64], atol: f64, rtol: f64) -> f64 {
    let mut acc = 0.0;
    for i in 0..err.len() {
        let sc = atol + rtol * y_old[i].abs().max(y_new[i].abs());
        let e = err[i] / sc;
        acc += e * e;
    }
    (acc / err.len() as f64).sqrt()
}

/// Integrate an initial value problem under the requested scheme.
///
/// Accepted steps keep the scaled local error estimate at or below one
/// (embedded pair for the explicit path, step doubling for the implicit
/// one). Failures carry the last successfully reached time.
pub fn integrate<F: Fn(f64, &[f64], &mut [f64])>(
    problem: &OdeProblem<F>,
    config: &SolverConfig,
) -> Result<Trajectory, Error> {
    config.validate()?;
    match config.method {
        Method::ExplicitAdaptive => integrate_explicit(problem, config),
        Method::ImplicitStiff => integrate_implicit(problem, config),
    }
}

struct Workspace<'a, F> {
    rhs: &'a F,
    evals: usize,
    dim: usize,
}

impl<'a, F: Fn(f64, &[f64], &mut [f64])> Workspace<'a, F> {
    fn eval(&mut self, t: f64, y: &[f64], out: &mut [f64]) {
        (self.rhs)(t, y, out);
        self.evals += 1;
    }

    fn eval_vec(&mut self, t: f64, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval(t, y, &mut out);
        out
    }
}

/// Hairer-style starting step estimate.
fn initial_step<F: Fn(f64, &[f64], &mut [f64])>(
    ws: &mut Workspace<F>,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    span: f64,
    atol: f64,
    rtol: f64,
    order: f64,
) -> f64 {
    let n = y0.len() as f64;
    let sc: Vec<f64> = y0.iter().map(|y| atol + rtol * y.abs()).collect();
    let d0 = (y0
        .iter()
        .zip(&sc)
        .map(|(y, s)| (y / s) * (y / s))
        .sum::<f64>()
        / n)
        .sqrt();
    let d1 = (f0
        .iter()
        .zip(&sc)
        .map(|(f, s)| (f / s) * (f / s))
        .sum::<f64>()
        / n)
        .sqrt();
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let h0 = h0.min(span);
    let y1: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h0 * f).collect();
    let f1 = ws.eval_vec(t0 + h0, &y1);
    let d2 = (f1
        .iter()
        .zip(f0)
        .zip(&sc)
        .map(|((a, b), s)| ((a - b) / s) * ((a - b) / s))
        .sum::<f64>()
        / n)
        .sqrt()
        / h0;
    let h1 = if d1.max(d2) <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / order)
    };
    // Floor above the underflow guard: violent initial transients otherwise
    // drive the estimate below time resolution before any step is taken.
    let floor = 64.0 * f64::EPSILON * t0.abs().max(1.0);
    (100.0 * h0).min(h1).min(span).max(floor)
}

// Dormand-Prince 5(4) tableau.
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 6] = [
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// Difference between the 5th- and embedded 4th-order weights.
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];
// Quartic dense-output weights of the pair (stage 2 carries none).
const D: [f64; 7] = [
    -12715105075.0 / 11282082432.0,
    0.0,
    87487479700.0 / 32700410799.0,
    -10690763975.0 / 1880347072.0,
    701980252875.0 / 199316789632.0,
    -1453857185.0 / 822651844.0,
    69997945.0 / 29380423.0,
];

fn integrate_explicit<F: Fn(f64, &[f64], &mut [f64])>(
    problem: &OdeProblem<F>,
    config: &SolverConfig,
) -> Result<Trajectory, Error> {
    let dim = problem.y0.len();
    let mut ws = Workspace {
        rhs: &problem.rhs,
        evals: 0,
        dim,
    };
    let span = problem.t_end - problem.t0;
    let h_max = config.h_max.unwrap_or(span).min(span);
    let (atol, rtol) = (config.atol, config.rtol);

    let mut t = problem.t0;
    let mut y = problem.y0.clone();
    let mut f = ws.eval_vec(t, &y);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            kind: IntegrationFailure::NonFiniteRhs,
            t_last: t,
        });
    }
    let mut h = config
        .h_init
        .unwrap_or_else(|| initial_step(&mut ws, t, &y, &f, span, atol, rtol, 5.0))
        .min(h_max);

    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut derivs = vec![f.clone()];
    let mut quartic: Vec<Vec<f64>> = Vec::new();
    let mut stats = Stats::default();
    let mut facold: f64 = 1e-4;

    let mut k = vec![vec![0.0; dim]; 7];
    let mut attempts = 0usize;
    while t < problem.t_end {
        if attempts >= config.max_steps {
            return Err(Error::Integration {
                kind: IntegrationFailure::MaxSteps,
                t_last: t,
            });
        }
        attempts += 1;
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Integration {
                kind: IntegrationFailure::StepUnderflow,
                t_last: t,
            });
        }
        h = h.min(problem.t_end - t).min(h_max);

        k[0].copy_from_slice(&f);
        let mut finite = true;
        let mut ytmp = vec![0.0; dim];
        for s in 1..6 {
            for j in 0..dim {
                let mut acc = 0.0;
                for (r, k_r) in k.iter().enumerate().take(s) {
                    acc += A[s - 1][r] * k_r[j];
                }
                ytmp[j] = y[j] + h * acc;
            }
            ws.eval(t + C[s] * h, &ytmp, &mut k[s]);
            if k[s].iter().any(|v| !v.is_finite()) {
                finite = false;
                break;
            }
        }
        // The weights row gives the advanced solution; the last stage is its
        // derivative (FSAL) and doubles as the next step's first stage.
        let mut y_new = vec![0.0; dim];
        if finite {
            for j in 0..dim {
                let mut acc = 0.0;
                for r in 0..6 {
                    acc += A[5][r] * k[r][j];
                }
                y_new[j] = y[j] + h * acc;
            }
            ws.eval(t + h, &y_new, &mut k[6]);
            finite = k[6].iter().all(|v| v.is_finite());
        }
        if !finite || y_new.iter().any(|v| !v.is_finite()) {
            stats.steps_rejected += 1;
            h *= 0.25;
            if h < h_min {
                return Err(Error::Integration {
                    kind: IntegrationFailure::NonFiniteRhs,
                    t_last: t,
                });
            }
            continue;
        }

        let mut err_vec = vec![0.0; dim];
        for j in 0..dim {
            let mut acc = 0.0;
            for (r, e_r) in E.iter().enumerate() {
                acc += e_r * k[r][j];
            }
            err_vec[j] = h * acc;
        }
        let err = error_norm(&err_vec, &y, &y_new, atol, rtol);

        if err <= 1.0 {
            let mut c4 = vec![0.0; dim];
            for j in 0..dim {
                let mut acc = 0.0;
                for (r, d_r) in D.iter().enumerate() {
                    acc += d_r * k[r][j];
                }
                c4[j] = h * acc;
            }
            quartic.push(c4);
            t += h;
            y = y_new;
            f.copy_from_slice(&k[6]);
            times.push(t);
            states.push(y.clone());
            derivs.push(f.clone());
            stats.steps_accepted += 1;
            stats.max_accepted_err = stats.max_accepted_err.max(err);
            let err_c = err.max(1e-16);
            let fac = (SAFETY * err_c.powf(-0.17) * facold.powf(0.04)).clamp(FAC_MIN, FAC_MAX);
            facold = err_c.max(1e-4);
            h *= fac;
        } else {
            stats.steps_rejected += 1;
            h *= (SAFETY * err.powf(-0.2)).clamp(FAC_MIN, 1.0);
        }
    }

    stats.rhs_evals = ws.evals;
    Ok(Trajectory {
        times,
        states,
        derivs,
        quartic,
        stats,
        dim,
    })
}

/// Solve the dense system `a x = b` in place by Gaussian elimination with
/// partial pivoting; `b` is overwritten with the solution.
fn solve_dense(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<(), ()> {
    let n = b.len();
    for col in 0..n {
        let mut piv = col;
        for row in col + 1..n {
            if a[row][col].abs() > a[piv][col].abs() {
                piv = row;
            }
        }
        if a[piv][col].abs() < 1e-300 {
            return Err(());
        }
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let m = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= m * a[col][k];
            }
            b[row] -= m * b[col];
        }
    }
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in col + 1..n {
            acc -= a[col][k] * b[k];
        }
        b[col] = acc / a[col][col];
        if !b[col].is_finite() {
            return Err(());
        }
    }
    Ok(())
}

/// Forward-difference Jacobian with per-component perturbation
/// `sqrt(machine epsilon) * max(|y_j|, 1)`.
fn fd_jacobian<F: Fn(f64, &[f64], &mut [f64])>(
    ws: &mut Workspace<F>,
    t: f64,
    y: &[f64],
    f_y: &[f64],
) -> Vec<Vec<f64>> {
    let n = y.len();
    let mut jac = vec![vec![0.0; n]; n];
    let mut y_pert = y.to_vec();
    let mut f_pert = vec![0.0; n];
    for j in 0..n {
        let delta = f64::EPSILON.sqrt() * y[j].abs().max(1.0);
        y_pert[j] = y[j] + delta;
        ws.eval(t, &y_pert, &mut f_pert);
        y_pert[j] = y[j];
        for (i, row) in jac.iter_mut().enumerate() {
            row[j] = (f_pert[i] - f_y[i]) / delta;
        }
    }
    jac
}

enum NewtonOutcome {
    Converged(Vec<f64>),
    Failed,
    NonFinite,
}

/// One backward-Euler stage: solve `z = y0 + h f(t0 + h, z)` by modified
/// Newton iteration with the Jacobian frozen at the predictor.
fn backward_euler_stage<F: Fn(f64, &[f64], &mut [f64])>(
    ws: &mut Workspace<F>,
    t0: f64,
    y0: &[f64],
    f0: &[f64],
    h: f64,
    rtol: f64,
    atol: f64,
    newton_iters: &mut usize,
) -> NewtonOutcome {
    let n = y0.len();
    let t1 = t0 + h;
    // Forward-Euler predictor.
    let mut z: Vec<f64> = y0.iter().zip(f0).map(|(y, f)| y + h * f).collect();
    let mut fz = vec![0.0; n];
    ws.eval(t1, &z, &mut fz);
    if fz.iter().any(|v| !v.is_finite()) {
        return NewtonOutcome::NonFinite;
    }
    let jac = fd_jacobian(ws, t1, &z, &fz);

    // Three orders below the step tolerance (capped at the contract values):
    // stage-equation leftovers must stay below the extrapolated update's
    // per-step error, which runs well under the step tolerance itself.
    let rtol_n = (rtol * 1e-3).min(1e-10);
    let atol_n = (atol * 1e-3).min(1e-12);
    let mut prev_norm = f64::INFINITY;
    let mut slow_count = 0;
    for _ in 0..15 {
        *newton_iters += 1;
        // Residual of the stage equation.
        let mut res: Vec<f64> = (0..n).map(|i| z[i] - y0[i] - h * fz[i]).collect();
        if res.iter().any(|v| !v.is_finite()) {
            return NewtonOutcome::NonFinite;
        }
        let mut m: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| (if i == j { 1.0 } else { 0.0 }) - h * jac[i][j])
                    .collect()
            })
            .collect();
        for r in res.iter_mut() {
            *r = -*r;
        }
        if solve_dense(&mut m, &mut res).is_err() {
            return NewtonOutcome::Failed;
        }
        let mut norm_acc = 0.0;
        for i in 0..n {
            z[i] += res[i];
            let sc = atol_n + rtol_n * y0[i].abs().max(z[i].abs());
            let e = res[i] / sc;
            norm_acc += e * e;
        }
        let norm = (norm_acc / n as f64).sqrt();
        ws.eval(t1, &z, &mut fz);
        if fz.iter().any(|v| !v.is_finite()) {
            return NewtonOutcome::NonFinite;
        }
        if norm <= 1.0 {
            return NewtonOutcome::Converged(z);
        }
        if norm >= 0.9 * prev_norm {
            slow_count += 1;
            if slow_count >= 2 {
                return NewtonOutcome::Failed;
            }
        } else {
            slow_count = 0;
        }
        prev_norm = norm;
    }
    NewtonOutcome::Failed
}

fn integrate_implicit<F: Fn(f64, &[f64], &mut [f64])>(
    problem: &OdeProblem<F>,
    config: &SolverConfig,
) -> Result<Trajectory, Error> {
    let dim = problem.y0.len();
    let mut ws = Workspace {
        rhs: &problem.rhs,
        evals: 0,
        dim,
    };
    let span = problem.t_end - problem.t0;
    let h_max = config.h_max.unwrap_or(span).min(span);
    let (atol, rtol) = (config.atol, config.rtol);

    let mut t = problem.t0;
    let mut y = problem.y0.clone();
    let mut f = ws.eval_vec(t, &y);
    if f.iter().any(|v| !v.is_finite()) {
        return Err(Error::Integration {
            kind: IntegrationFailure::NonFiniteRhs,
            t_last: t,
        });
    }
    let mut h = config
        .h_init
        .unwrap_or_else(|| initial_step(&mut ws, t, &y, &f, span, atol, rtol, 2.0))
        .min(h_max);

    let mut times = vec![t];
    let mut states = vec![y.clone()];
    let mut derivs = vec![f.clone()];
    let mut quartic: Vec<Vec<f64>> = Vec::new();
    let mut stats = Stats::default();
    let mut attempts = 0usize;

    while t < problem.t_end {
        if attempts >= config.max_steps {
            return Err(Error::Integration {
                kind: IntegrationFailure::MaxSteps,
                t_last: t,
            });
        }
        attempts += 1;
        let h_min = 16.0 * f64::EPSILON * t.abs().max(1.0);
        if h < h_min {
            return Err(Error::Integration {
                kind: IntegrationFailure::StepUnderflow,
                t_last: t,
            });
        }
        h = h.min(problem.t_end - t).min(h_max);

        // One full step and two half steps. Their gap estimates the local
        // error of the fine value; the accepted update adds it back in
        // (Richardson), which cancels the leading error term while keeping
        // the damping of the underlying scheme at infinity.
        let full = backward_euler_stage(&mut ws, t, &y, &f, h, rtol, atol, &mut stats.newton_iters);
        let two_halves = match &full {
            NewtonOutcome::Converged(_) => {
                match backward_euler_stage(
                    &mut ws,
                    t,
                    &y,
                    &f,
                    0.5 * h,
                    rtol,
                    atol,
                    &mut stats.newton_iters,
                ) {
                    NewtonOutcome::Converged(mid) => {
                        let f_mid = ws.eval_vec(t + 0.5 * h, &mid);
                        if f_mid.iter().any(|v| !v.is_finite()) {
                            NewtonOutcome::NonFinite
                        } else {
                            backward_euler_stage(
                                &mut ws,
                                t + 0.5 * h,
                                &mid,
                                &f_mid,
                                0.5 * h,
                                rtol,
                                atol,
                                &mut stats.newton_iters,
                            )
                        }
                    }
                    other => other,
                }
            }
            _ => NewtonOutcome::Failed,
        };

        let (y_full, y_fine) = match (full, two_halves) {
            (NewtonOutcome::Converged(a), NewtonOutcome::Converged(b)) => (a, b),
            (NewtonOutcome::NonFinite, _) | (_, NewtonOutcome::NonFinite) => {
                stats.steps_rejected += 1;
                h *= 0.25;
                if h < h_min {
                    return Err(Error::Integration {
                        kind: IntegrationFailure::NonFiniteRhs,
                        t_last: t,
                    });
                }
                continue;
            }
            _ => {
                // Newton trouble: retry with a smaller step.
                stats.steps_rejected += 1;
                h *= 0.25;
                if h < h_min {
                    return Err(Error::Integration {
                        kind: IntegrationFailure::NewtonDivergence,
                        t_last: t,
                    });
                }
                continue;
            }
        };

        let err_vec: Vec<f64> = y_fine.iter().zip(&y_full).map(|(a, b)| a - b).collect();
        let y_new: Vec<f64> = y_fine.iter().zip(&err_vec).map(|(a, e)| a + e).collect();
        let err = error_norm(&err_vec, &y, &y_new, atol, rtol);
        if err <= 1.0 {
            t += h;
            y = y_new;
            f = ws.eval_vec(t, &y);
            if f.iter().any(|v| !v.is_finite()) {
                return Err(Error::Integration {
                    kind: IntegrationFailure::NonFiniteRhs,
                    t_last: t,
                });
            }
            times.push(t);
            states.push(y.clone());
            derivs.push(f.clone());
            quartic.push(vec![0.0; dim]);
            stats.steps_accepted += 1;
            stats.max_accepted_err = stats.max_accepted_err.max(err);
            h *= (SAFETY * err.max(1e-16).powf(-0.5)).clamp(FAC_MIN, FAC_MAX);
        } else {
            stats.steps_rejected += 1;
            h *= (SAFETY * err.powf(-0.5)).clamp(FAC_MIN, 1.0);
        }
    }

    stats.rhs_evals = ws.evals;
    Ok(Trajectory {
        times,
        states,
        derivs,
        quartic,
        stats,
        dim,
    })
}
