//! Command-line surface: argument parsing, scenario resolution, command
//! execution, and artifact emission.
//!
//! Exit codes: 0 on success, 1 on validation/usage errors, 2 on numerical
//! failure.

use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde_json::json;

use menten::kinetics::{
    conservation_residuals, nondim_hta, nondim_tq, NondimHTA, NondimTQ, StateLumped, StateMM,
};
use menten::manifold::{
    asymptotic_compare, coeffs_general, coeffs_hta, coeffs_tq, estimate_partials,
    manifold_residual, reconstruct_v, ManifoldCoeffs,
};
use menten::models::{rhs_full_mm, rhs_hta, rhs_lumped, GeneralSP, TimeFrame};
use menten::numeric::{geometric_grid, loglog_slope};
use menten::ode::{integrate, OdeProblem, SolverConfig, Trajectory};
use menten::qssa::{solve_reduced, sqssa_root_nondim, tq_root_nondim, ReducedKind};
use menten::tihonov::{
    approximation_report, boundary_layer_converges, epsilon_sweep, kw_analysis, mu_tube_check,
    ApproxSide, CmFrame, Dev, SweepModel,
};

use crate::config::{self, parse_method, Scenario};
use crate::output::{svg_plot, write_text, Table};
use crate::report::RunReport;

#[derive(Parser)]
#[command(
    name = "menten",
    version,
    about = "Quasi-steady-state and center-manifold reduction toolkit for Michaelis-Menten kinetics"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Scenario configuration file (mutually exclusive with --scenario)
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Built-in scenario name (fig1_literal, fig1_consistent, fig2_left,
    /// fig2_right, fig3_left, fig3_right)
    #[arg(long, global = true)]
    scenario: Option<String>,

    /// Output directory for artifacts
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,

    /// Comma-separated artifact formats: csv,json,svg
    #[arg(long, global = true, default_value = "csv,json")]
    format: String,

    /// Relative integration tolerance override
    #[arg(long, global = true)]
    rtol: Option<f64>,

    /// Absolute integration tolerance override
    #[arg(long, global = true)]
    atol: Option<f64>,

    /// Integration scheme override: explicit | implicit
    #[arg(long, global = true)]
    method: Option<String>,

    /// Horizon override (dimensional time; nondimensional for `sweep`)
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the full and lumped systems and check conservation
    Simulate,
    /// Solve both quasi-steady-state reductions and compare with the full run
    Reduce,
    /// Center-manifold coefficients, residual scaling, and reconstructions
    Manifold {
        /// Model family: hta | tq
        #[arg(long, default_value = "hta")]
        model: String,
        #[arg(long)]
        kappa: Option<f64>,
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long)]
        sigma: Option<f64>,
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long)]
        kappa_m: Option<f64>,
        /// Perturbation parameter for the first-order reconstruction
        #[arg(long)]
        eps: Option<f64>,
    },
    /// Perturbation sweep, mu-tube confinement, domain of influence, K_W
    Tihonov,
    /// Emit the comparison dataset behind one of the survey figures
    Figure {
        /// Figure index: 1, 2 or 3
        index: u8,
        /// Panel: left | right (ignored for figure 1, whose panels share one
        /// parameter set)
        panel: Option<String>,
    },
    /// Convergence sweep of the full system against the reduced one
    Sweep {
        /// Model family: hta | tq
        #[arg(long, default_value = "hta")]
        model: String,
        /// Comma-separated, strictly decreasing positive values
        #[arg(long)]
        eps_list: Option<String>,
        /// Fast-variable window start (default 5*eps per entry)
        #[arg(long)]
        t1: Option<f64>,
    },
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Numerical(String),
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn numerical(e: impl std::fmt::Display) -> Failure {
    Failure::Numerical(e.to_string())
}

#[derive(Clone, Copy, PartialEq)]
enum Format {
    Csv,
    Json,
    Svg,
}

fn parse_formats(spec: &str) -> Result<Vec<Format>, Failure> {
    let mut out = Vec::new();
    for item in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        out.push(match item {
            "csv" => Format::Csv,
            "json" => Format::Json,
            "svg" => Format::Svg,
            other => return Err(usage(format!("unknown format '{other}'"))),
        });
    }
    if out.is_empty() {
        return Err(usage("--format must request at least one of csv,json,svg"));
    }
    Ok(out)
}

/// Entry point shared by the binary and the tests: returns the process exit
/// code together with the run report when one was produced.
pub fn run_command<I, S>(args: I) -> (i32, Option<RunReport>)
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            print!("{e}");
            return (0, None);
        }
        Err(e) => {
            eprint!("{e}");
            return (1, None);
        }
    };
    match execute(cli) {
        Ok((report, code)) => (code, Some(report)),
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            (1, None)
        }
        Err(Failure::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            (2, None)
        }
    }
}

fn execute(cli: Cli) -> Result<(RunReport, i32), Failure> {
    let formats = parse_formats(&cli.format)?;
    let default_scenario: Option<String> = match &cli.command {
        Command::Figure { index, panel } => Some(figure_scenario(*index, panel.as_deref())?),
        Command::Manifold { kappa, sigma, .. } if kappa.is_some() || sigma.is_some() => None,
        _ => None,
    };

    let scenario = resolve_scenario(&cli, default_scenario.as_deref())?;
    match &cli.command {
        Command::Simulate => cmd_simulate(&cli, &formats, scenario?),
        Command::Reduce => cmd_reduce(&cli, &formats, scenario?),
        Command::Manifold {
            model,
            kappa,
            lambda,
            sigma,
            eta,
            kappa_m,
            eps,
        } => cmd_manifold(
            &cli,
            &formats,
            scenario,
            model,
            (*kappa, *lambda),
            (*sigma, *eta, *kappa_m),
            *eps,
        ),
        Command::Tihonov => cmd_tihonov(&cli, &formats, scenario?),
        Command::Figure { index, panel } => {
            cmd_figure(&cli, &formats, scenario?, *index, panel.as_deref())
        }
        Command::Sweep {
            model,
            eps_list,
            t1,
        } => cmd_sweep(&cli, &formats, scenario?, model, eps_list.as_deref(), *t1),
    }
}

fn figure_scenario(index: u8, panel: Option<&str>) -> Result<String, Failure> {
    let panel = match panel {
        None | Some("left") => "left",
        Some("right") => "right",
        Some(other) => return Err(usage(format!("panel must be left or right, got '{other}'"))),
    };
    match index {
        // The caption-consistent reading is the default; fig1_literal is
        // available through --scenario.
        1 => Ok("fig1_consistent".to_string()),
        2 => Ok(format!("fig2_{panel}")),
        3 => Ok(format!("fig3_{panel}")),
        other => Err(usage(format!(
            "figure index must be 1, 2 or 3, got {other}"
        ))),
    }
}

/// Scenario resolution with CLI overrides. Commands that can run without a
/// scenario (raw-parameter `manifold`) receive the error unresolved.
fn resolve_scenario(
    cli: &Cli,
    default_name: Option<&str>,
) -> Result<Result<Scenario, Failure>, Failure> {
    if cli.config.is_some() && cli.scenario.is_some() {
        return Err(usage("--config and --scenario are mutually exclusive"));
    }
    let mut scenario = if let Some(path) = &cli.config {
        match config::parse_config(path) {
            Ok(s) => s,
            Err(e) => return Ok(Err(usage(e.to_string()))),
        }
    } else {
        let name = match cli.scenario.as_deref().or(default_name) {
            Some(n) => n,
            None => {
                return Ok(Err(usage(format!(
                    "provide --scenario <name> or --config <path>; built-ins: {}",
                    config::builtin_names().join(", ")
                ))))
            }
        };
        match config::builtin(name) {
            Some(s) => s,
            None => {
                return Ok(Err(usage(format!(
                    "unknown scenario '{name}'; built-ins: {}",
                    config::builtin_names().join(", ")
                ))))
            }
        }
    };
    if let Some(rtol) = cli.rtol {
        scenario.solver.rtol = rtol;
    }
    if let Some(atol) = cli.atol {
        scenario.solver.atol = atol;
    }
    if let Some(method) = &cli.method {
        scenario.solver.method = parse_method(method).map_err(|e| usage(e.to_string()))?;
    }
    if let Some(h) = cli.horizon {
        if !(h > 0.0) {
            return Err(usage("--horizon must be positive"));
        }
        scenario.horizon = Some(h);
    }
    if let Err(e) = scenario.solver.validate() {
        return Ok(Err(usage(e.to_string())));
    }
    Ok(Ok(scenario))
}

fn uniform_grid(t_end: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| t_end * i as f64 / n as f64).collect()
}

fn integrate_full(scn: &Scenario, t_end: f64) -> Result<Trajectory, Failure> {
    let (rates, totals) = (scn.rates, scn.totals);
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (dx, dc) = rhs_full_mm(&StateMM { x: y[0], c: y[1] }, &rates, &totals);
        dy[0] = dx;
        dy[1] = dc;
    };
    let problem = OdeProblem::new(rhs, 0.0, t_end, vec![scn.x0, scn.c0]).map_err(numerical)?;
    integrate(&problem, &scn.solver).map_err(numerical)
}

fn integrate_lumped(scn: &Scenario, t_end: f64) -> Result<Trajectory, Failure> {
    let (rates, totals) = (scn.rates, scn.totals);
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (dxb, dc) = rhs_lumped(
            &StateLumped {
                xbar: y[0],
                c: y[1],
            },
            &rates,
            &totals,
        );
        dy[0] = dxb;
        dy[1] = dc;
    };
    let problem =
        OdeProblem::new(rhs, 0.0, t_end, vec![scn.x0 + scn.c0, scn.c0]).map_err(numerical)?;
    integrate(&problem, &scn.solver).map_err(numerical)
}

struct Emitter<'a> {
    dir: &'a Path,
    formats: &'a [Format],
    written: Vec<String>,
}

impl<'a> Emitter<'a> {
    fn new(dir: &'a Path, formats: &'a [Format]) -> Self {
        Self {
            dir,
            formats,
            written: Vec::new(),
        }
    }

    fn csv(&mut self, name: &str, table: &Table) -> Result<(), Failure> {
        if self.formats.contains(&Format::Csv) {
            write_text(&self.dir.join(name), &table.to_csv())
                .map_err(|e| usage(format!("cannot write {name}: {e}")))?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    fn svg(&mut self, name: &str, content: &str) -> Result<(), Failure> {
        if self.formats.contains(&Format::Svg) {
            write_text(&self.dir.join(name), content)
                .map_err(|e| usage(format!("cannot write {name}: {e}")))?;
            self.written.push(name.to_string());
        }
        Ok(())
    }

    fn finish(mut self, mut report: RunReport) -> Result<RunReport, Failure> {
        let json_name = format!("{}_{}.json", report.name, report.command);
        if self.formats.contains(&Format::Json) {
            self.written.push(json_name.clone());
        }
        report.outputs = self.written;
        if self.formats.contains(&Format::Json) {
            write_text(&self.dir.join(&json_name), &report.to_json())
                .map_err(|e| usage(format!("cannot write {json_name}: {e}")))?;
        }
        Ok(report)
    }
}

fn stats_json(traj: &Trajectory) -> serde_json::Value {
    json!({
        "steps_accepted": traj.stats.steps_accepted,
        "steps_rejected": traj.stats.steps_rejected,
        "rhs_evals": traj.stats.rhs_evals,
        "newton_iters": traj.stats.newton_iters,
    })
}

fn dev_json(d: &Dev) -> serde_json::Value {
    json!({ "max": d.max, "rms": d.rms })
}

fn side_json(s: &ApproxSide) -> serde_json::Value {
    json!({
        "slow": {
            "transient": dev_json(&s.slow.transient),
            "slow_phase": dev_json(&s.slow.slow_phase),
            "overall": dev_json(&s.slow.overall),
        },
        "fast": {
            "transient": dev_json(&s.fast.transient),
            "slow_phase": dev_json(&s.fast.slow_phase),
            "overall": dev_json(&s.fast.overall),
        },
    })
}

fn cmd_simulate(cli: &Cli, formats: &[Format], scn: Scenario) -> Result<(RunReport, i32), Failure> {
    let t_end = scn.effective_horizon();
    let full = integrate_full(&scn, t_end)?;
    let lumped = integrate_lumped(&scn, t_end)?;
    let grid = uniform_grid(t_end, 1000);

    let mut table = Table::new(&["t", "X", "C", "Xbar", "C_lumped"]);
    for &t in &grid {
        let f = full.state_at(t).map_err(numerical)?;
        let l = lumped.state_at(t).map_err(numerical)?;
        table.push(vec![t, f[0], f[1], l[0], l[1]]);
    }
    let (res_substrate, res_enzyme) =
        conservation_residuals(&full, &scn.rates, &scn.totals).map_err(numerical)?;

    let mut emit = Emitter::new(&cli.out, formats);
    let base = scn.name.clone();
    emit.csv(&format!("{base}_simulate.csv"), &table)?;
    if scn.outputs.iter().any(|o| o == "reductions") {
        let (red_table, _) = reduction_table(&scn, t_end, &grid)?;
        emit.csv(&format!("{base}_reductions.csv"), &red_table)?;
    }
    emit.svg(
        &format!("{base}_simulate.svg"),
        &svg_plot(
            &format!("{base}: full system"),
            "t",
            "concentration",
            &[
                ("X".to_string(), table.series(0, 1)),
                ("C".to_string(), table.series(0, 2)),
                ("Xbar".to_string(), table.series(0, 3)),
            ],
        ),
    )?;

    let mut report = RunReport::new("simulate", &scn);
    report.metrics = json!({
        "conservation": { "substrate": res_substrate, "enzyme": res_enzyme },
        "full_stats": stats_json(&full),
        "lumped_stats": stats_json(&lumped),
    });
    Ok((emit.finish(report)?, 0))
}

/// Sampled sQSSA/tQSSA solutions over a grid.
fn reduction_table(
    scn: &Scenario,
    t_end: f64,
    grid: &[f64],
) -> Result<
    (
        Table,
        (menten::qssa::ReducedSolution, menten::qssa::ReducedSolution),
    ),
    Failure,
> {
    let sq = solve_reduced(
        ReducedKind::Sqssa,
        &scn.rates,
        &scn.totals,
        scn.x0,
        t_end,
        &scn.solver,
    )
    .map_err(numerical)?;
    let tq = solve_reduced(
        ReducedKind::Tqssa,
        &scn.rates,
        &scn.totals,
        scn.x0 + scn.c0,
        t_end,
        &scn.solver,
    )
    .map_err(numerical)?;
    let mut table = Table::new(&["t", "X_sqssa", "C_sqssa", "Xbar_tqssa", "C_tqssa"]);
    let sq_samples = sq.sample(grid).map_err(numerical)?;
    let tq_samples = tq.sample(grid).map_err(numerical)?;
    for ((t, s), q) in grid.iter().zip(sq_samples).zip(tq_samples) {
        table.push(vec![*t, s.0, s.1, q.0, q.1]);
    }
    Ok((table, (sq, tq)))
}

fn cmd_reduce(cli: &Cli, formats: &[Format], scn: Scenario) -> Result<(RunReport, i32), Failure> {
    let t_end = scn.effective_horizon();
    let full = integrate_full(&scn, t_end)?;
    let grid = uniform_grid(t_end, 1000);
    let (table, (sq, tq)) = reduction_table(&scn, t_end, &grid)?;

    let p = nondim_tq(&scn.rates, &scn.totals);
    let frame = CmFrame::Tq(p, coeffs_tq(&p));
    let approx = approximation_report(&full, &sq, &tq, Some(&frame), &scn.rates, &scn.totals)
        .map_err(numerical)?;

    let mut emit = Emitter::new(&cli.out, formats);
    let base = scn.name.clone();
    emit.csv(&format!("{base}_reduce.csv"), &table)?;
    emit.svg(
        &format!("{base}_reduce.svg"),
        &svg_plot(
            &format!("{base}: reduced solutions"),
            "t",
            "concentration",
            &[
                ("X_sqssa".to_string(), table.series(0, 1)),
                ("C_sqssa".to_string(), table.series(0, 2)),
                ("Xbar_tqssa".to_string(), table.series(0, 3)),
                ("C_tqssa".to_string(), table.series(0, 4)),
            ],
        ),
    )?;

    let mut report = RunReport::new("reduce", &scn);
    report.metrics = json!({
        "c_peak": approx.c_peak,
        "t_peak": approx.t_peak,
        "t_split": approx.t_split,
        "sqssa": side_json(&approx.sqssa),
        "tqssa": side_json(&approx.tqssa),
        "cm0": approx.cm0.as_ref().map(dev_json),
        "cm1": approx.cm1.as_ref().map(dev_json),
    });
    Ok((emit.finish(report)?, 0))
}

enum ManifoldParams {
    Hta(NondimHTA),
    Tq(NondimTQ),
}

#[allow(clippy::too_many_arguments)]
fn cmd_manifold(
    cli: &Cli,
    formats: &[Format],
    scenario: Result<Scenario, Failure>,
    model: &str,
    hta_raw: (Option<f64>, Option<f64>),
    tq_raw: (Option<f64>, Option<f64>, Option<f64>),
    eps: Option<f64>,
) -> Result<(RunReport, i32), Failure> {
    let (params, source) = match (model, hta_raw, tq_raw) {
        ("hta", (Some(kappa), Some(lambda)), _) => (
            ManifoldParams::Hta(
                NondimHTA::from_parts(kappa, lambda, eps.unwrap_or(0.1))
                    .map_err(|e| usage(e.to_string()))?,
            ),
            None,
        ),
        ("hta", (None, None), _) => {
            let scn = scenario?;
            let mut p = nondim_hta(&scn.rates, &scn.totals);
            if let Some(e) = eps {
                p.eps = e;
            }
            (ManifoldParams::Hta(p), Some(scn))
        }
        ("tq", _, (Some(sigma), Some(eta), Some(kappa_m))) => (
            ManifoldParams::Tq(
                NondimTQ::from_parts(sigma, eta, kappa_m, eps.unwrap_or(0.05))
                    .map_err(|e| usage(e.to_string()))?,
            ),
            None,
        ),
        ("tq", _, (None, None, None)) => {
            let scn = scenario?;
            let mut p = nondim_tq(&scn.rates, &scn.totals);
            if let Some(e) = eps {
                p.eps = e;
            }
            (ManifoldParams::Tq(p), Some(scn))
        }
        ("hta", _, _) => return Err(usage("hta needs both --kappa and --lambda (or a scenario)")),
        ("tq", _, _) => {
            return Err(usage(
                "tq needs --sigma, --eta and --kappa-m together (or a scenario)",
            ))
        }
        (other, _, _) => return Err(usage(format!("unknown model '{other}'"))),
    };

    let (closed, sys, root, eps_used, label): (
        ManifoldCoeffs,
        GeneralSP,
        Box<dyn Fn(f64) -> f64>,
        f64,
        String,
    ) = match &params {
        ManifoldParams::Hta(p) => (
            coeffs_hta(p),
            GeneralSP::hta(p),
            {
                let kappa = p.kappa;
                Box::new(move |u| sqssa_root_nondim(u, kappa))
            },
            p.eps,
            format!("hta kappa={} lambda={} eps={}", p.kappa, p.lambda, p.eps),
        ),
        ManifoldParams::Tq(p) => (
            coeffs_tq(p),
            GeneralSP::tq(p),
            {
                let q = *p;
                Box::new(move |u| tq_root_nondim(u, &q))
            },
            p.eps,
            format!(
                "tq sigma={} eta={} kappa_m={} eps={}",
                p.sigma, p.eta, p.kappa_m, p.eps
            ),
        ),
    };

    let partials = estimate_partials(&sys).map_err(numerical)?;
    let estimated = coeffs_general(&partials, closed.a, closed.b).map_err(numerical)?;

    // Residual scaling along the diagonal ray, exact and with a corrupted
    // leading coefficient as a negative control.
    let rhos = geometric_grid(1e-4, 1e-2, 9);
    let mut residual_table = Table::new(&["rho", "residual_exact", "residual_perturbed"]);
    let mut perturbed = closed;
    perturbed.lambda1 += 0.1;
    let mut exact_vals = Vec::new();
    let mut perturbed_vals = Vec::new();
    for &rho in &rhos {
        let e = manifold_residual(&sys, &closed, rho, rho).abs();
        let p = manifold_residual(&sys, &perturbed, rho, rho).abs();
        exact_vals.push(e);
        perturbed_vals.push(p);
        residual_table.push(vec![rho, e, p]);
    }
    let slope_exact = loglog_slope(&rhos, &exact_vals).map_err(numerical)?;
    let slope_perturbed = loglog_slope(&rhos, &perturbed_vals).map_err(numerical)?;

    // Reconstruction table and asymptotic-equivalence report.
    let mut recon_table = Table::new(&["u", "v_root", "v_cm0", "v_cm1"]);
    for i in 0..=100 {
        let u = 0.5 * i as f64 / 100.0;
        recon_table.push(vec![
            u,
            root(u),
            reconstruct_v(&closed, u, 0.0),
            reconstruct_v(&closed, u, eps_used),
        ]);
    }
    let cmp_grid = geometric_grid(1e-4, 1e-2, 9);
    let asym = asymptotic_compare(&closed, &root, &cmp_grid).map_err(numerical)?;

    let base = match (&source, &params) {
        (Some(scn), _) => scn.name.clone(),
        (None, ManifoldParams::Hta(_)) => "manifold_hta".to_string(),
        (None, ManifoldParams::Tq(_)) => "manifold_tq".to_string(),
    };
    let mut emit = Emitter::new(&cli.out, formats);
    emit.csv(&format!("{base}_reconstruction.csv"), &recon_table)?;
    emit.csv(&format!("{base}_residual.csv"), &residual_table)?;
    emit.svg(
        &format!("{base}_reconstruction.svg"),
        &svg_plot(
            &label,
            "u",
            "v",
            &[
                ("root".to_string(), recon_table.series(0, 1)),
                ("manifold order 0".to_string(), recon_table.series(0, 2)),
                ("manifold order 1".to_string(), recon_table.series(0, 3)),
            ],
        ),
    )?;

    let mut report = match &source {
        Some(scn) => {
            let mut r = RunReport::new("manifold", scn);
            r.name = base.clone();
            r
        }
        None => RunReport::without_scenario("manifold", &base),
    };
    report.metrics = json!({
        "parameters": label,
        "coefficients": {
            "closed_form": [closed.lambda1, closed.lambda2, closed.lambda3],
            "from_estimated_partials": [estimated.lambda1, estimated.lambda2, estimated.lambda3],
            "a": closed.a,
            "b": closed.b,
            "validity_radius": closed.validity_radius(),
        },
        "residual": {
            "slope_exact": slope_exact,
            "slope_perturbed": slope_perturbed,
        },
        "asymptotic": {
            "difference_order": asym.difference_order,
            "ratio_order": asym.ratio_order,
            "equivalent": asym.equivalent,
        },
    });
    Ok((emit.finish(report)?, 0))
}

fn cmd_tihonov(cli: &Cli, formats: &[Format], scn: Scenario) -> Result<(RunReport, i32), Failure> {
    let hta = nondim_hta(&scn.rates, &scn.totals);
    let tq = nondim_tq(&scn.rates, &scn.totals);
    let tau_end = 3.0 * (hta.kappa + 1.0) / hta.lambda;

    // Convergence sweep in the perturbation parameter.
    let eps_list = [1e-1, 3e-2, 1e-2, 3e-3, 1e-3];
    let sweep =
        epsilon_sweep(&SweepModel::Hta(hta), &eps_list, tau_end, None).map_err(numerical)?;
    let mut sweep_table = Table::new(&["eps", "slow_error", "fast_error"]);
    for i in 0..sweep.eps.len() {
        sweep_table.push(vec![
            sweep.eps[i],
            sweep.slow_errors[i],
            sweep.fast_errors[i],
        ]);
    }

    // Mu-tube confinement of a genuinely stiff trajectory.
    let tube_eps = 1e-3;
    let p_tube =
        NondimHTA::from_parts(hta.kappa, hta.lambda, tube_eps).map_err(|e| usage(e.to_string()))?;
    let rhs = move |_t: f64, y: &[f64], dy: &mut [f64]| {
        let (du, dv) = rhs_hta(y[0], y[1], &p_tube, TimeFrame::Outer);
        dy[0] = du;
        dy[1] = dv;
    };
    let tube_traj = integrate(
        &OdeProblem::new(rhs, 0.0, tau_end, vec![1.0, 0.0]).map_err(numerical)?,
        &SolverConfig::implicit(),
    )
    .map_err(numerical)?;
    let kappa = hta.kappa;
    let tube_confined = mu_tube_check(
        &tube_traj,
        move |u| sqssa_root_nondim(u, kappa),
        0.05,
        10.0 * tube_eps,
        tau_end,
    )
    .map_err(numerical)?;

    // Domain of influence: boundary layers from a cold start at u = 1.
    let sys_hta = GeneralSP::hta(&hta);
    let (hta_converged, hta_limit) =
        boundary_layer_converges(&sys_hta, 1.0, 0.0, 40.0 / (1.0 + hta.kappa), 1e-6)
            .map_err(numerical)?;
    let sys_tq = GeneralSP::tq(&tq);
    let (tq_converged, tq_limit) =
        boundary_layer_converges(&sys_tq, 1.0, 0.0, 60.0, 1e-5).map_err(numerical)?;

    // Slow-phase asymptote of E X / C from a long full run.
    let d = menten::kinetics::derive_constants(&scn.rates, &scn.totals);
    let s = d.k_m + scn.totals.e_t;
    let alpha_est = 0.5
        * scn.rates.k1
        * s
        * (1.0
            - (1.0 - 4.0 * scn.rates.k2 * scn.totals.e_t / (scn.rates.k1 * s * s))
                .max(0.0)
                .sqrt());
    let t_kw = scn.effective_horizon().max(6.0 / alpha_est);
    let full = integrate_full(&scn, t_kw)?;
    let kw = kw_analysis(&scn.rates, &scn.totals, &full).map_err(numerical)?;

    let mut emit = Emitter::new(&cli.out, formats);
    let base = scn.name.clone();
    emit.csv(&format!("{base}_tihonov_sweep.csv"), &sweep_table)?;
    emit.svg(
        &format!("{base}_tihonov_sweep.svg"),
        &svg_plot(
            &format!("{base}: reduced-system error vs eps"),
            "eps",
            "sup error",
            &[
                ("slow".to_string(), sweep_table.series(0, 1)),
                ("fast".to_string(), sweep_table.series(0, 2)),
            ],
        ),
    )?;

    let mut report = RunReport::new("tihonov", &scn);
    report.metrics = json!({
        "sweep": {
            "eps": sweep.eps,
            "slow_errors": sweep.slow_errors,
            "fast_errors": sweep.fast_errors,
            "slow_slope": sweep.slow_slope,
            "fast_slope": sweep.fast_slope,
            "failure": sweep.failure.as_ref().map(|(e, m)| json!({"eps": e, "message": m})),
        },
        "mu_tube": { "eps": tube_eps, "mu": 0.05, "confined": tube_confined },
        "boundary_layer": {
            "hta": { "converged": hta_converged, "limit": hta_limit },
            "tq": { "converged": tq_converged, "limit": tq_limit },
        },
        "kw": {
            "alpha": kw.alpha,
            "K_W": kw.k_w,
            "K_D": kw.k_d,
            "K_M": kw.k_m,
            "empirical_limit": kw.empirical_limit,
            "relative_gap": kw.relative_gap,
        },
    });
    Ok((emit.finish(report)?, 0))
}

fn cmd_figure(
    cli: &Cli,
    formats: &[Format],
    scn: Scenario,
    index: u8,
    panel: Option<&str>,
) -> Result<(RunReport, i32), Failure> {
    let t_end = scn.effective_horizon();
    let grid = uniform_grid(t_end, 1000);
    let full = integrate_full(&scn, t_end)?;
    let (_, (sq, tq)) = reduction_table(&scn, t_end, &grid)?;
    let sq_samples = sq.sample(&grid).map_err(numerical)?;
    let tq_samples = tq.sample(&grid).map_err(numerical)?;

    let (table, frame, svg_series): (Table, CmFrame, Vec<(String, Vec<(f64, f64)>)>) = match index {
        1 => {
            let mut t = Table::new(&[
                "t",
                "X_full",
                "C_full",
                "Xbar_full",
                "X_sqssa",
                "C_sqssa",
                "Xbar_tqssa",
                "C_tqssa",
            ]);
            for (i, &time) in grid.iter().enumerate() {
                let f = full.state_at(time).map_err(numerical)?;
                t.push(vec![
                    time,
                    f[0],
                    f[1],
                    f[0] + f[1],
                    sq_samples[i].0,
                    sq_samples[i].1,
                    tq_samples[i].0,
                    tq_samples[i].1,
                ]);
            }
            let p = nondim_tq(&scn.rates, &scn.totals);
            let series = vec![
                ("C_full".to_string(), t.series(0, 2)),
                ("C_sqssa".to_string(), t.series(0, 5)),
                ("C_tqssa".to_string(), t.series(0, 7)),
            ];
            (t, CmFrame::Tq(p, coeffs_tq(&p)), series)
        }
        2 => {
            let p = nondim_hta(&scn.rates, &scn.totals);
            let coeffs = coeffs_hta(&p);
            let mut t = Table::new(&[
                "t", "X_full", "C_full", "X_sqssa", "C_sqssa", "C_cm0", "C_cm1",
            ]);
            for (i, &time) in grid.iter().enumerate() {
                let f = full.state_at(time).map_err(numerical)?;
                let u = f[0] / p.scales.slow;
                t.push(vec![
                    time,
                    f[0],
                    f[1],
                    sq_samples[i].0,
                    sq_samples[i].1,
                    p.scales.fast * reconstruct_v(&coeffs, u, 0.0),
                    p.scales.fast * reconstruct_v(&coeffs, u, p.eps),
                ]);
            }
            let series = vec![
                ("full".to_string(), t.series(1, 2)),
                ("sqssa".to_string(), t.series(3, 4)),
                ("manifold order 0".to_string(), t.series(1, 5)),
                ("manifold order 1".to_string(), t.series(1, 6)),
            ];
            (t, CmFrame::Hta(p, coeffs), series)
        }
        3 => {
            let p = nondim_tq(&scn.rates, &scn.totals);
            let coeffs = coeffs_tq(&p);
            let mut t = Table::new(&[
                "t",
                "Xbar_full",
                "C_full",
                "Xbar_tqssa",
                "C_tqssa",
                "C_cm0",
                "C_cm1",
            ]);
            for (i, &time) in grid.iter().enumerate() {
                let f = full.state_at(time).map_err(numerical)?;
                let xbar = f[0] + f[1];
                let u = xbar / p.scales.slow;
                t.push(vec![
                    time,
                    xbar,
                    f[1],
                    tq_samples[i].0,
                    tq_samples[i].1,
                    p.scales.fast * reconstruct_v(&coeffs, u, 0.0),
                    p.scales.fast * reconstruct_v(&coeffs, u, p.eps),
                ]);
            }
            let series = vec![
                ("full".to_string(), t.series(1, 2)),
                ("tqssa".to_string(), t.series(3, 4)),
                ("manifold order 0".to_string(), t.series(1, 5)),
                ("manifold order 1".to_string(), t.series(1, 6)),
            ];
            (t, CmFrame::Tq(p, coeffs), series)
        }
        other => {
            return Err(usage(format!(
                "figure index must be 1, 2 or 3, got {other}"
            )))
        }
    };

    let approx = approximation_report(&full, &sq, &tq, Some(&frame), &scn.rates, &scn.totals)
        .map_err(numerical)?;
    let (res_substrate, res_enzyme) =
        conservation_residuals(&full, &scn.rates, &scn.totals).map_err(numerical)?;

    let mut emit = Emitter::new(&cli.out, formats);
    let base = scn.name.clone();
    emit.csv(&format!("{base}_figure.csv"), &table)?;
    let (x_label, y_label) = if index == 1 {
        ("t", "concentration")
    } else if index == 2 {
        ("X", "C")
    } else {
        ("Xbar", "C")
    };
    emit.svg(
        &format!("{base}_figure.svg"),
        &svg_plot(
            &format!("figure {index}: {base}"),
            x_label,
            y_label,
            &svg_series,
        ),
    )?;

    let mut report = RunReport::new("figure", &scn);
    report.metrics = json!({
        "figure": index,
        "panel": panel.unwrap_or("left"),
        "c_peak": approx.c_peak,
        "t_peak": approx.t_peak,
        "t_split": approx.t_split,
        "sqssa": side_json(&approx.sqssa),
        "tqssa": side_json(&approx.tqssa),
        "cm0": approx.cm0.as_ref().map(dev_json),
        "cm1": approx.cm1.as_ref().map(dev_json),
        "conservation": { "substrate": res_substrate, "enzyme": res_enzyme },
    });
    Ok((emit.finish(report)?, 0))
}

fn cmd_sweep(
    cli: &Cli,
    formats: &[Format],
    scn: Scenario,
    model: &str,
    eps_list: Option<&str>,
    t1: Option<f64>,
) -> Result<(RunReport, i32), Failure> {
    let eps: Vec<f64> = match eps_list {
        None => vec![1e-1, 3e-2, 1e-2, 3e-3, 1e-3],
        Some(list) => list
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| usage(format!("--eps-list: '{s}' is not a number")))
            })
            .collect::<Result<_, _>>()?,
    };
    let (sweep_model, tau_end) = match model {
        "hta" => {
            let p = nondim_hta(&scn.rates, &scn.totals);
            let tau = cli.horizon.unwrap_or(3.0 * (p.kappa + 1.0) / p.lambda);
            (SweepModel::Hta(p), tau)
        }
        "tq" => {
            let p = nondim_tq(&scn.rates, &scn.totals);
            let tau = cli.horizon.unwrap_or(3.0);
            (SweepModel::Tq(p), tau)
        }
        other => return Err(usage(format!("unknown model '{other}'"))),
    };
    let sweep = epsilon_sweep(&sweep_model, &eps, tau_end, t1).map_err(|e| usage(e.to_string()))?;

    let mut table = Table::new(&["eps", "slow_error", "fast_error"]);
    for i in 0..sweep.eps.len() {
        table.push(vec![
            sweep.eps[i],
            sweep.slow_errors[i],
            sweep.fast_errors[i],
        ]);
    }

    let mut emit = Emitter::new(&cli.out, formats);
    let base = scn.name.clone();
    emit.csv(&format!("{base}_sweep.csv"), &table)?;
    emit.svg(
        &format!("{base}_sweep.svg"),
        &svg_plot(
            &format!("{base}: {model} sweep"),
            "eps",
            "sup error",
            &[
                ("slow".to_string(), table.series(0, 1)),
                ("fast".to_string(), table.series(0, 2)),
            ],
        ),
    )?;

    let failed = sweep.failure.is_some();
    let mut report = RunReport::new("sweep", &scn);
    report.metrics = json!({
        "model": model,
        "tau_end": tau_end,
        "eps": sweep.eps,
        "slow_errors": sweep.slow_errors,
        "fast_errors": sweep.fast_errors,
        "slow_slope": sweep.slow_slope,
        "fast_slope": sweep.fast_slope,
        "failure": sweep.failure.as_ref().map(|(e, m)| json!({"eps": e, "message": m})),
    });
    let report = emit.finish(report)?;
    // A partial sweep is still emitted, but the run counts as a numerical
    // failure for the caller.
    Ok((report, if failed { 2 } else { 0 }))
}
