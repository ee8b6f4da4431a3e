//! `axistream solve | verify | convergence | mellin | hardy`.
//!
//! Exit codes: 0 ok, 2 configuration, 3 solver, 4 estimate not stable,
//! 5 contour too close to a resolvent pole.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::config::RunConfig;
use crate::domain::Grid;
use crate::error::{Error, Result};
use crate::estimates::{find_case, run_sweep, SweepPlan, SweepResult, Verdict};
use crate::hardy::{hardy_check, power_ratio, HardyQuadrature};
use crate::io::{slug, write_contour_csv, write_field, write_json, write_plot_file, write_reports_csv, write_table_csv};
use crate::mellin::{band_difference, contour_samples, k1_band_difference, parseval_check, solve_model, MellinProblem, TauGrid};
use crate::norms::{sobolev_norm_squared, weighted_l2_squared, Region};
use crate::solver::{assemble, divergence, reconstruct_velocity, solve, vorticity_consistency, SolveSummary};

pub const EXIT_OK: u8 = 0;
pub const EXIT_CONFIG: u8 = 2;
pub const EXIT_SOLVER: u8 = 3;
pub const EXIT_ESTIMATE: u8 = 4;
pub const EXIT_POLE: u8 = 5;

#[derive(Debug, Parser)]
#[command(name = "axistream", version, about = "Axisymmetric stream-function solver and estimate checks")]
struct Cli {
    /// TOML run configuration.
    #[arg(long, global = true, env = "AXISTREAM_CONFIG")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, env = "AXISTREAM_OUT")]
    out: Option<PathBuf>,
    /// Worker threads; 1 gives bitwise reproducible output.
    #[arg(long, global = true, env = "AXISTREAM_THREADS")]
    threads: Option<usize>,
    /// Relative tolerance of the linear solver.
    #[arg(long, global = true, env = "AXISTREAM_TOL")]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, clap::Args)]
struct SweepArgs {
    /// Restrict to these estimate ids (repeatable).
    #[arg(long = "estimate")]
    estimates: Vec<String>,
    /// Restrict to these cases (repeatable).
    #[arg(long = "case")]
    cases: Vec<String>,
    /// Comma-separated mesh sizes.
    #[arg(long, value_delimiter = ',')]
    meshes: Option<Vec<usize>>,
    /// Comma-separated weight exponents.
    #[arg(long, value_delimiter = ',')]
    mus: Option<Vec<f64>>,
    /// Assemble with the broken axis stencil.
    #[arg(long)]
    fault_injection: bool,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve one manufactured case and write ψ₁, ψ, v_r, v_z.
    Solve {
        #[arg(long)]
        case: Option<String>,
        #[arg(long)]
        nr: Option<usize>,
        #[arg(long)]
        nz: Option<usize>,
    },
    /// Evaluate every estimate over the case suite and meshes.
    Verify(SweepArgs),
    /// Refinement tables and plot data.
    Convergence(SweepArgs),
    /// Model problem on contours, residue constant across the pole at 0.
    Mellin {
        #[arg(long)]
        h: Option<f64>,
    },
    /// Hardy ratios for x^β.
    Hardy {
        #[arg(long, value_delimiter = ',')]
        alphas: Option<Vec<f64>>,
        #[arg(long, value_delimiter = ',')]
        betas: Option<Vec<f64>>,
    },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidParameter(_) | Error::InvalidDomain(_) | Error::Io(_) => EXIT_CONFIG,
        Error::PoleGuard { .. } | Error::ResolventPole { .. } => EXIT_POLE,
        _ => EXIT_SOLVER,
    }
}

pub fn run<I: IntoIterator<Item = OsString>>(args: I) -> ExitCode {
    ExitCode::from(run_code(args))
}

/// As [`run`], returning the numeric exit code.
pub fn run_code<I: IntoIterator<Item = OsString>>(args: I) -> u8 {
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cfg = match load_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let pool = match rayon::ThreadPoolBuilder::new().num_threads(cli.threads.unwrap_or(0)).build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return EXIT_CONFIG;
        }
    };
    let result = pool.install(|| match &cli.command {
        Command::Solve { case, nr, nz } => cmd_solve(&cfg, case.as_deref(), *nr, *nz),
        Command::Verify(a) => apply_sweep_args(&cfg, a).and_then(|c| cmd_verify(&c)),
        Command::Convergence(a) => apply_sweep_args(&cfg, a).and_then(|c| cmd_convergence(&c)),
        Command::Mellin { h } => {
            let mut c = cfg.clone();
            if let Some(h) = h {
                c.mellin.h = *h;
            }
            cmd_mellin(&c)
        }
        Command::Hardy { alphas, betas } => {
            let mut c = cfg.clone();
            if let Some(a) = alphas {
                c.hardy.alphas = a.clone();
            }
            if let Some(b) = betas {
                c.hardy.betas = b.clone();
            }
            cmd_hardy(&c)
        }
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.output_dir = out.clone();
    }
    if let Some(tol) = cli.tol {
        cfg.solver.tol = tol;
    }
    if cli.threads == Some(0) {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_sweep_args(cfg: &RunConfig, a: &SweepArgs) -> Result<RunConfig> {
    let mut c = cfg.clone();
    if !a.estimates.is_empty() {
        c.estimates = a.estimates.clone();
    }
    if !a.cases.is_empty() {
        c.cases = a.cases.clone();
    }
    if let Some(m) = &a.meshes {
        c.meshes = m.clone();
    }
    if let Some(m) = &a.mus {
        c.mus = m.clone();
    }
    c.solver.broken_axis |= a.fault_injection;
    c.validate()?;
    Ok(c)
}

#[derive(Serialize)]
struct SolveSidecar<'a> {
    case: &'a str,
    solver: SolveSummary,
    tol: f64,
    max_error: f64,
    psi1_l2_squared: f64,
    psi1_h1_squared: f64,
    omega1_l2_squared: f64,
    divergence_l2: f64,
    vorticity_defect_l2: f64,
}

pub fn cmd_solve(cfg: &RunConfig, case: Option<&str>, nr: Option<usize>, nz: Option<usize>) -> Result<u8> {
    let case = find_case(case.unwrap_or(&cfg.solve_case))?;
    let domain = cfg.domain()?;
    let grid = Grid::new(&domain, nr.unwrap_or(cfg.grid.nr), nz.unwrap_or(cfg.grid.nz))
        .map_err(|e| Error::Config(e.to_string()))?;
    let dir = cfg.prepare_output()?;
    let omega1 = case.omega1_field(&grid, &domain)?;
    let sol = solve(&assemble(&grid), &omega1, cfg.solver_options())?;
    let (v_r, v_z) = reconstruct_velocity(&sol.psi, Some(&sol.psi1))?;
    let omega = omega1.map_rz(|r, _, v| r * v)?;
    let div = divergence(&v_r, &v_z)?;
    let sidecar = SolveSidecar {
        case: &case.name,
        solver: sol.summary(),
        tol: cfg.solver.tol,
        max_error: sol.psi1.sub(&case.psi1_field(&grid, &domain)?)?.max_abs(),
        psi1_l2_squared: weighted_l2_squared(&sol.psi1, 1.0, &Region::Full)?,
        psi1_h1_squared: sobolev_norm_squared(&sol.psi1, 1, &Region::Full)?,
        omega1_l2_squared: weighted_l2_squared(&omega1, 1.0, &Region::Full)?,
        divergence_l2: weighted_l2_squared(&div, 1.0, &Region::Full)?.sqrt(),
        vorticity_defect_l2: vorticity_consistency(&v_r, &v_z, &omega)?,
    };
    write_field(&sol.psi1, &dir.join("psi1.csv"))?;
    write_field(&sol.psi, &dir.join("psi.csv"))?;
    write_field(&v_r, &dir.join("v_r.csv"))?;
    write_field(&v_z, &dir.join("v_z.csv"))?;
    write_json(&sidecar, &dir.join("solve.json"))?;
    println!(
        "{}: {}x{} cells, {} iterations, relative residual {:.3e}",
        case.name, grid.nr, grid.nz, sol.iterations, sol.residual_norm
    );
    println!(
        "‖ψ₁‖²_L2 = {:.6e}  ‖ψ₁‖²_H1 = {:.6e}  ‖ω₁‖²_L2 = {:.6e}  max error {:.3e}",
        sidecar.psi1_l2_squared, sidecar.psi1_h1_squared, sidecar.omega1_l2_squared, sidecar.max_error
    );
    Ok(EXIT_OK)
}

fn sweep(cfg: &RunConfig) -> Result<SweepResult> {
    let plan = SweepPlan {
        cases: cfg.selected_cases()?,
        estimates: cfg.selected_estimates(),
        mus: cfg.mus.clone(),
        meshes: cfg.meshes.clone(),
    };
    run_sweep(&plan, &cfg.harness()?)
}

fn write_sweep(res: &SweepResult, dir: &Path) -> Result<()> {
    write_reports_csv(&res.reports, std::fs::File::create(dir.join("reports.csv"))?)?;
    write_json(&res.reports, &dir.join("reports.json"))?;
    write_json(&res.tables, &dir.join("tables.json"))?;
    write_json(&res.constants(), &dir.join("constants.json"))?;
    Ok(())
}

fn table_label(case: &str, id: &str, mu: f64, weighted: bool) -> String {
    if weighted {
        format!("{case}_{}_mu{}", slug(id), slug(&format!("{mu}")))
    } else {
        format!("{case}_{}", slug(id))
    }
}

pub fn cmd_verify(cfg: &RunConfig) -> Result<u8> {
    if cfg.meshes.is_empty() {
        return Err(Error::Config("empty mesh list".into()));
    }
    let dir = cfg.prepare_output()?;
    let res = sweep(cfg)?;
    write_sweep(&res, &dir)?;
    let mut failures = 0;
    for t in &res.tables {
        if !matches!(t.verdict, Verdict::Stable | Verdict::Skipped) {
            failures += 1;
            println!("{:?}: {} {} μ={} drift {:.3e}", t.verdict, t.case, t.estimate_id, t.mu, t.final_drift);
        }
    }
    for r in res.reports.iter().filter(|r| r.warning.is_some()) {
        failures += 1;
        println!("precondition: {} {} n={}: {}", r.case, r.estimate_id, r.nr, r.warning.as_deref().unwrap_or(""));
    }
    let skipped = res.tables.iter().filter(|t| t.verdict == Verdict::Skipped).count();
    println!(
        "{} reports, {} refinement tables ({} skipped), {} not stable",
        res.reports.len(),
        res.tables.len(),
        skipped,
        failures
    );
    Ok(if failures == 0 { EXIT_OK } else { EXIT_ESTIMATE })
}

pub fn cmd_convergence(cfg: &RunConfig) -> Result<u8> {
    if cfg.meshes.len() < 3 {
        return Err(Error::Config(format!("convergence needs at least 3 meshes, got {}", cfg.meshes.len())));
    }
    let dir = cfg.prepare_output()?;
    let res = sweep(cfg)?;
    write_sweep(&res, &dir)?;
    let mut diverging = false;
    let mut errors_written = std::collections::BTreeSet::new();
    for t in &res.tables {
        if t.verdict == Verdict::Skipped {
            continue;
        }
        diverging |= t.verdict == Verdict::Diverging;
        let label = table_label(&t.case, &t.estimate_id, t.mu, crate::estimates::is_weighted(&t.estimate_id));
        write_table_csv(t, std::fs::File::create(dir.join(format!("table_{label}.csv")))?)?;
        let ratios: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.n as f64, r.ratio)).collect();
        write_plot_file(&dir.join(format!("ratio_{label}.dat")), &["n ratio", &label], &ratios)?;
        if errors_written.insert(t.case.clone()) {
            let errs: Vec<(f64, f64)> = t.rows.iter().map(|r| (r.n as f64, r.error)).collect();
            write_plot_file(&dir.join(format!("error_{}.dat", t.case)), &["n max_error", &t.case], &errs)?;
        }
        println!("{} {} μ={} {:?}", t.case, t.estimate_id, t.mu, t.verdict);
        println!("  {:>6} {:>14} {:>12} {:>8}", "n", "ratio", "error", "order");
        for r in &t.rows {
            let order = r.observed_order.map_or("-".to_string(), |o| format!("{o:.3}"));
            println!("  {:>6} {:>14.6e} {:>12.3e} {:>8}", r.n, r.ratio, r.error, order);
        }
    }
    Ok(if diverging { EXIT_ESTIMATE } else { EXIT_OK })
}

#[derive(Serialize)]
struct MellinSidecar {
    h: f64,
    ode_residual: f64,
    parseval_contour: f64,
    parseval_tau: f64,
    parseval_relative_gap: f64,
}

pub fn cmd_mellin(cfg: &RunConfig) -> Result<u8> {
    let m = &cfg.mellin;
    if !(m.width > 0.0) || m.sigma_points < 2 || !(m.sigma_max > 0.0) {
        return Err(Error::Config("mellin: width, sigma_max must be positive and sigma_points ≥ 2".into()));
    }
    let dir = cfg.prepare_output()?;
    let (c, w) = (m.center, m.width);
    let problem = MellinProblem::from_fn(TauGrid::default(), |t| (-(t - c).powi(2) / (2.0 * w * w)).exp())?;
    let sol = solve_model(&problem, m.h)?;
    let parseval = parseval_check(&sol, 0)?;
    let sidecar = MellinSidecar {
        h: m.h,
        ode_residual: sol.ode_residual()?,
        parseval_contour: parseval.contour,
        parseval_tau: parseval.tau,
        parseval_relative_gap: parseval.relative_gap,
    };
    write_json(&sidecar, &dir.join("mellin_model.json"))?;
    let (lo, hi) = (c - 10.0 * w - 20.0, c + 10.0 * w + 20.0);
    let pts: Vec<(f64, f64)> =
        sol.tau.iter().zip(&sol.u).filter(|(t, _)| **t >= lo && **t <= hi).map(|(t, u)| (*t, *u)).collect();
    write_plot_file(&dir.join("mellin_solution.dat"), &["tau u", &format!("h = {}", m.h)], &pts)?;

    let sigmas: Vec<f64> = (0..m.sigma_points)
        .map(|k| -m.sigma_max + 2.0 * m.sigma_max * k as f64 / (m.sigma_points - 1) as f64)
        .collect();
    for (name, h) in [("h", m.h), ("h1", m.h1), ("h2", m.h2)] {
        let samples = contour_samples(h, &sigmas)?;
        write_contour_csv(&samples, std::fs::File::create(dir.join(format!("contour_{name}.csv")))?)?;
    }

    let band = band_difference(&problem, m.h1, m.h2)?;
    write_json(&band, &dir.join("band.json"))?;
    write_plot_file(&dir.join("band_difference.dat"), &["tau u1-u2"], &band.difference)?;
    let k1 = k1_band_difference(&problem, m.hbar1, m.hbar2)?;
    write_json(&k1, &dir.join("band_k1.json"))?;

    println!(
        "h = {}: ODE residual {:.3e}, Parseval gap {:.3e}",
        m.h, sidecar.ode_residual, sidecar.parseval_relative_gap
    );
    println!(
        "bands ({}, {}): c0 = {:.12}, u1(0) = {:.12}, residue {:.12}, constancy stddev {:.3e}",
        band.h1, band.h2, band.c0, band.u1_at_zero, band.residue_c0, band.constancy_stddev
    );
    println!(
        "bands ({}, {}): c0 = {:.12}, ∂_r u order {:?}",
        k1.h1, k1.h2, k1.c0, k1.axis_derivative_order
    );
    Ok(EXIT_OK)
}

#[derive(Serialize)]
struct HardyRow {
    alpha: f64,
    beta: f64,
    measured: Option<f64>,
    closed_form: Option<f64>,
    note: Option<String>,
}

pub fn cmd_hardy(cfg: &RunConfig) -> Result<u8> {
    let h = &cfg.hardy;
    if h.alphas.is_empty() || h.betas.is_empty() {
        return Err(Error::Config("empty Hardy sweep".into()));
    }
    let dir = cfg.prepare_output()?;
    let quad = HardyQuadrature::default();
    let mut rows = Vec::new();
    for &alpha in &h.alphas {
        let mut curve = Vec::new();
        for &beta in &h.betas {
            let note = if !(alpha < 1.0) {
                Some("α ≥ 1: no Hardy inequality".to_string())
            } else if !(2.0 * beta > 1.0 - alpha) {
                Some("2β ≤ 1 − α: left side diverges".to_string())
            } else {
                None
            };
            if let Some(note) = note {
                println!("α = {alpha}, β = {beta}: skipped ({note})");
                rows.push(HardyRow { alpha, beta, measured: None, closed_form: None, note: Some(note) });
                continue;
            }
            let check = hardy_check(|x| x.powf(beta), |x| beta * x.powf(beta - 1.0), alpha, quad)?;
            let exact = power_ratio(alpha, beta);
            curve.push((beta, check.ratio));
            rows.push(HardyRow { alpha, beta, measured: Some(check.ratio), closed_form: Some(exact), note: None });
        }
        if !curve.is_empty() {
            let label = format!("alpha = {alpha}");
            write_plot_file(&dir.join(format!("hardy_alpha_{}.dat", slug(&format!("{alpha}")))), &["beta ratio", &label], &curve)?;
        }
    }
    let mut out = csv::Writer::from_writer(std::fs::File::create(dir.join("hardy.csv"))?);
    out.write_record(["alpha", "beta", "measured", "closed_form", "note"]).map_err(|e| Error::Config(e.to_string()))?;
    for r in &rows {
        let f = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        out.write_record([
            r.alpha.to_string(),
            r.beta.to_string(),
            f(r.measured),
            f(r.closed_form),
            r.note.clone().unwrap_or_default(),
        ])
        .map_err(|e| Error::Config(e.to_string()))?;
        if let (Some(m), Some(e)) = (r.measured, r.closed_form) {
            println!("α = {:>5} β = {:>6}: ratio {:.6} closed form {:.6}", r.alpha, r.beta, m, e);
        }
    }
    out.flush()?;
    Ok(EXIT_OK)
}
