//! Command-line harness: exponent checks, flux-structure verification,
//! single solves, solution verification, and the stability/refinement
//! experiments. Exit codes: 0 = all checks pass, 1 = a check failed,
//! 2 = usage or configuration error.

use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use obstacle_core::entropy;
use obstacle_core::error::Error;
use obstacle_core::field::{check_structure, FieldSpec};
use obstacle_core::mesh::{GridFunction, NormKind};
use obstacle_core::params::{
    check_admissible, check_remark1, q_range, strong_theta_bound, ProblemParams,
};
use obstacle_core::pipeline::{
    self, run_refinement, run_stability, stability::auto_t_grid, ExperimentConfig,
};
use obstacle_core::solver::solve_vi;

#[derive(Parser)]
#[command(name = "obstacle", version, about = "Obstacle-problem solver and verification harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Report format on stdout.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Suppress stdout reports (exit code still reflects the checks).
    #[arg(long, global = true)]
    quiet: bool,
    /// Output directory (overrides the config's output_dir).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Downgrade the mesh-dim = N requirement of window experiments to a flag.
    #[arg(long, global = true)]
    allow_dim_mismatch: bool,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
    Table,
}

#[derive(Subcommand)]
enum Command {
    /// Admissibility of (N, p, r, theta, b), the q window, and endpoint checks
    Exponents {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long = "N")]
        n: Option<u32>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
        #[arg(long)]
        theta: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        b: f64,
    },
    /// Randomized verification of the flux structure conditions
    Structure {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0.0)]
        eps_reg: f64,
    },
    /// Solve one problem; writes solution.csv and diagnostics.json
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Verify a stored solution: entropy inequality, energy profile, bands
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        solution: PathBuf,
        #[arg(long, default_value_t = 50)]
        family: usize,
    },
    /// Data-stability experiment over an approximating sequence
    Stability {
        #[arg(long)]
        config: PathBuf,
    },
    /// Nested-mesh refinement study
    Refine {
        #[arg(long)]
        config: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Aborted(_) => ExitCode::from(1),
                _ => ExitCode::from(2),
            }
        }
    }
}

fn load_config(path: &Path, cli: &Cli) -> Result<ExperimentConfig, Error> {
    let mut config = ExperimentConfig::from_file(path)?;
    if let Some(out) = &cli.out {
        config.output_dir = Some(out.clone());
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if cli.allow_dim_mismatch {
        config.allow_dim_mismatch = true;
    }
    Ok(config)
}

fn run(cli: &Cli) -> Result<bool, Error> {
    match &cli.command {
        Command::Exponents { config, n, p, r, theta, b } => {
            let params = match config {
                Some(path) => load_config(path, cli)?.params,
                None => ProblemParams {
                    n: n.ok_or_else(|| Error::Config("--N required without --config".into()))?,
                    p: p.ok_or_else(|| Error::Config("--p required without --config".into()))?,
                    r: r.ok_or_else(|| Error::Config("--r required without --config".into()))?,
                    theta: theta
                        .ok_or_else(|| Error::Config("--theta required without --config".into()))?,
                    b: *b,
                },
            };
            params.validate()?;
            let report = exponents_report(&params);
            let pass = report.pass;
            emit(cli, &report, render_exponents_table(&report))?;
            Ok(pass)
        }
        Command::Structure { config, p, samples, eps_reg } => {
            let (spec, seed) = match config {
                Some(path) => {
                    let config = load_config(path, cli)?;
                    let mut spec = config.build_field()?;
                    spec.eps_reg = *eps_reg;
                    (spec, config.seed)
                }
                None => {
                    let p =
                        p.ok_or_else(|| Error::Config("--p required without --config".into()))?;
                    (FieldSpec::p_laplacian_with_eps(p, *eps_reg)?, 0)
                }
            };
            let report = check_structure(&spec, *samples, cli.seed.unwrap_or(seed))?;
            let pass = report.pass;
            emit(cli, &report, render_structure_table(&report))?;
            Ok(pass)
        }
        Command::Solve { config } => {
            let config = load_config(config, cli)?;
            let mesh = config.build_mesh()?;
            let problem = config.build_problem(&mesh)?;
            let solution = solve_vi(&problem, &config.solver)?;
            let diagnostics = solution.diagnostics(&problem);
            let dir = config.output_dir.clone().unwrap_or_else(|| PathBuf::from("."));
            pipeline::persist_solution(&dir, "run", &problem, &solution)?;
            emit(cli, &diagnostics, render_kv_table(&diagnostics)?)?;
            let tol = config.solver.scaled_tol(solution.scale);
            Ok(solution.converged && solution.feasibility_violation(&problem) <= tol)
        }
        Command::Verify { config, solution, family } => {
            let config = load_config(config, cli)?;
            let mesh = config.build_mesh()?;
            let problem = config.build_problem(&mesh)?;
            let file = fs::File::open(solution)
                .map_err(|e| Error::Config(format!("{}: {e}", solution.display())))?;
            let u = GridFunction::read_csv(mesh.clone(), BufReader::new(file))?;
            // Definition-level feasibility of the candidate itself
            let feasibility_violation = u
                .values()
                .iter()
                .zip(problem.psi.values())
                .map(|(u, p)| (p - u).max(0.0))
                .fold(0.0, f64::max);
            let candidate_feasible =
                feasibility_violation <= config.solver.scaled_tol(problem.scale());
            let entropy_report =
                entropy::verify_entropy(&problem, &u, *family, &config.s_grid, config.seed)?;
            let t_grid =
                if config.t_grid.is_empty() { auto_t_grid(&u) } else { config.t_grid.clone() };
            let profile = entropy::apriori_profile(&problem, &u, &t_grid)?;
            let k_max = (u.norm(NormKind::Linf)?.ceil() as u32).max(1);
            let bands = entropy::annulus_decomposition(&problem, &u, k_max)?;
            if let Some(dir) = &config.output_dir {
                pipeline::write_json(&dir.join("entropy.json"), &entropy_report)?;
                pipeline::write_json(&dir.join("annulus.json"), &bands)?;
                let mut csv = Vec::new();
                profile.write_csv(&mut csv)?;
                fs::create_dir_all(dir)?;
                fs::write(dir.join("profile.csv"), csv)?;
            }
            let summary = VerifySummary {
                candidate_feasible,
                feasibility_violation,
                entropy_pass: entropy_report.pass,
                entropy_max_violation: entropy_report.max_violation,
                entropy_threshold: entropy_report.threshold,
                fitted_c: profile.fitted_c,
                band_count: bands.k_values.len(),
            };
            let pass = entropy_report.pass && candidate_feasible;
            emit(cli, &summary, render_kv_table(&summary)?)?;
            Ok(pass)
        }
        Command::Stability { config } => {
            let config = load_config(config, cli)?;
            let report = run_stability(&config)?;
            let pass = report.bounded && report.cauchy_decreasing && !report.aborted;
            match cli.format {
                Format::Csv => emit_raw(cli, render_stability_csv(&report))?,
                _ => emit(cli, &report, render_stability_table(&report))?,
            }
            Ok(pass)
        }
        Command::Refine { config } => {
            let config = load_config(config, cli)?;
            let report = run_refinement(&config)?;
            let pass = report.entries.iter().all(|e| e.converged) && !report.aborted;
            match cli.format {
                Format::Csv => emit_raw(cli, render_refinement_csv(&report))?,
                _ => emit(cli, &report, render_refinement_table(&report))?,
            }
            Ok(pass)
        }
    }
}

#[derive(Serialize)]
struct ExponentsReport {
    params: ProblemParams,
    admissibility: obstacle_core::params::AdmissibilityReport,
    window: Option<obstacle_core::params::ExponentRange>,
    q_midpoint: Option<f64>,
    remark_checks: Option<obstacle_core::params::Remark1Report>,
    strong_theta_bound: f64,
    strong_theta: bool,
    pass: bool,
}

#[derive(Serialize)]
struct VerifySummary {
    candidate_feasible: bool,
    feasibility_violation: f64,
    entropy_pass: bool,
    entropy_max_violation: f64,
    entropy_threshold: f64,
    fitted_c: f64,
    band_count: usize,
}

fn exponents_report(params: &ProblemParams) -> ExponentsReport {
    let admissibility = check_admissible(params);
    let window = q_range(params).ok();
    let remark_checks = check_remark1(params).ok();
    let pass = admissibility.pass
        && window.map(|w| w.nonempty).unwrap_or(false)
        && remark_checks.map(|r| r.pass).unwrap_or(false);
    ExponentsReport {
        params: *params,
        admissibility,
        window,
        q_midpoint: window.map(|w| w.midpoint()),
        remark_checks,
        strong_theta_bound: strong_theta_bound(params.n, params.p, params.r),
        strong_theta: params.has_strong_theta(),
        pass,
    }
}

fn emit<T: Serialize>(cli: &Cli, value: &T, table: String) -> Result<(), Error> {
    if cli.quiet {
        return Ok(());
    }
    match cli.format {
        Format::Json => print!("{}", pipeline::to_json_string(value)?),
        Format::Csv | Format::Table => println!("{table}"),
    }
    Ok(())
}

fn emit_raw(cli: &Cli, text: String) -> Result<(), Error> {
    if !cli.quiet {
        println!("{text}");
    }
    Ok(())
}

/// Flat key,value rendering via the JSON object form.
fn render_kv_table<T: Serialize>(value: &T) -> Result<String, Error> {
    let json = serde_json::to_value(value)?;
    let mut out = String::new();
    if let serde_json::Value::Object(map) = json {
        for (k, v) in map {
            out.push_str(&format!("{k:28} {v}\n"));
        }
    }
    Ok(out.trim_end().to_string())
}

fn render_exponents_table(report: &ExponentsReport) -> String {
    let mut out = String::new();
    let p = &report.params;
    out.push_str(&format!(
        "params                N={} p={} r={} theta={} b={}\n",
        p.n, p.p, p.r, p.theta, p.b
    ));
    let a = &report.admissibility;
    out.push_str(&format!(
        "p in ({:.6}, {:.6})    {}\n",
        a.p_lower,
        a.p_upper,
        if a.p_ok { "ok" } else { "FAIL" }
    ));
    out.push_str(&format!("1 <= r < p                {}\n", if a.r_ok { "ok" } else { "FAIL" }));
    out.push_str(&format!(
        "theta < min({:.6}, {:.6})  {}\n",
        a.theta_bound_embedding,
        a.theta_bound_absorption,
        if a.theta_ok { "ok" } else { "FAIL" }
    ));
    match report.window {
        Some(w) => out.push_str(&format!(
            "q window              ({:.9}, {:.9}) branch {:?} midpoint {:.9}\n",
            w.lower,
            w.upper,
            w.branch,
            report.q_midpoint.unwrap_or(f64::NAN)
        )),
        None => out.push_str("q window              unavailable (inadmissible)\n"),
    }
    if let Some(r) = report.remark_checks {
        out.push_str(&format!(
            "endpoint checks       interval {:?} embedding {} upper<p {}\n",
            r.high_r_interval_inside, r.embedding_dominates_r, r.upper_below_p
        ));
    }
    out.push_str(&format!(
        "strong theta bound    {:.9} (theta below: {})\n",
        report.strong_theta_bound, report.strong_theta
    ));
    out.push_str(&format!("overall               {}", if report.pass { "PASS" } else { "FAIL" }));
    out
}

fn render_structure_table(report: &obstacle_core::field::StructureReport) -> String {
    format!(
        "p = {}, eps_reg = {}, samples = {}, seed = {}\n\
         alpha_used            {:.12} (effective: {})\n\
         gamma_used            {:.12}\n\
         coercivity min slack  {:+.3e}\n\
         growth min slack      {:+.3e}\n\
         monotonicity min slack {:+.3e}\n\
         continuity min slack  {:+.3e}\n\
         overall               {}",
        report.p,
        report.eps_reg,
        report.sample_count,
        report.seed,
        report.alpha_used,
        report.alpha_is_effective,
        report.gamma_used,
        report.coercivity_min_slack,
        report.growth_min_slack,
        report.monotonicity_min_slack,
        report.continuity_min_slack,
        if report.pass { "PASS" } else { "FAIL" }
    )
}

fn render_stability_table(report: &obstacle_core::pipeline::ConvergenceReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "q = {:.9} in ({:.9}, {:.9})  in_window={} dim_mismatch={}\n",
        report.q_used, report.q_window_lower, report.q_window_upper, report.q_in_window,
        report.dim_mismatch
    ));
    out.push_str(&format!(
        "{:>6} {:>14} {:>14} {:>14} {:>14} {:>6} {:>8}\n",
        "n", "|f_n|_1", "|f_n-f|_1", "W1q(u_n)", "W1q(u_n-u_N)", "conv", "entropy"
    ));
    for e in &report.entries {
        out.push_str(&format!(
            "{:>6} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e} {:>6} {:>8}\n",
            e.n,
            e.f_l1,
            e.f_l1_diff,
            e.w1q_norm,
            e.diff_w1q,
            e.converged,
            e.entropy_pass.map(|p| p.to_string()).unwrap_or_else(|| "-".into())
        ));
    }
    out.push_str(&format!(
        "bounded={} cauchy_decreasing={} aborted={}",
        report.bounded, report.cauchy_decreasing, report.aborted
    ));
    out
}

fn render_stability_csv(report: &obstacle_core::pipeline::ConvergenceReport) -> String {
    let mut out = String::from("n,f_l1,f_l1_diff,w1q_norm,diff_w1q,converged,entropy_pass\n");
    for e in &report.entries {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            e.n,
            e.f_l1,
            e.f_l1_diff,
            e.w1q_norm,
            e.diff_w1q,
            e.converged,
            e.entropy_pass.map(|p| p.to_string()).unwrap_or_default()
        ));
    }
    out.trim_end().to_string()
}

fn render_refinement_table(report: &obstacle_core::pipeline::RefinementReport) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "{:>10} {:>14} {:>14} {:>6}\n",
        "cells", "sup(u)", "W1p(u)", "conv"
    ));
    for e in &report.entries {
        out.push_str(&format!(
            "{:>10} {:>14.6e} {:>14.6e} {:>6}\n",
            e.resolution, e.sup_norm, e.w1p_norm, e.converged
        ));
    }
    for pair in &report.pairs {
        out.push_str(&format!(
            "{}->{}: diff_sup {:.6e} diff_w1p {:.6e}\n",
            pair.coarse, pair.fine, pair.diff_sup, pair.diff_w1p
        ));
    }
    out.push_str(&format!("orders_sup {:?}", report.orders_sup));
    out
}

fn render_refinement_csv(report: &obstacle_core::pipeline::RefinementReport) -> String {
    let mut out = String::from("resolution,sup_norm,w1p_norm,converged\n");
    for e in &report.entries {
        out.push_str(&format!("{},{},{},{}\n", e.resolution, e.sup_norm, e.w1p_norm, e.converged));
    }
    out.trim_end().to_string()
}
