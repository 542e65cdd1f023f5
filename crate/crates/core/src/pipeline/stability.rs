//! The data-stability experiment: solve along an approximating sequence
//! f_n, verify the entropy inequality on each member, and track Sobolev
//! norms at an exponent drawn from the admissible window.
//!
//! The surrogate limit in all Cauchy-style differences is the finest-n
//! member; no claim about the true limit is made.

use serde::{Deserialize, Serialize};

use crate::entropy;
use crate::error::{Error, Result};
use crate::mesh::NormKind;
use crate::pipeline::config::{ExperimentConfig, SequenceKind};
use crate::pipeline::sequence::{build_sequence, SequenceSpec};
use crate::pipeline::{persist_solution, timestamp_string, write_json};
use crate::solver::{solve_vi, Solution};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityEntry {
    pub n: u32,
    /// ‖f_n‖₁.
    pub f_l1: f64,
    /// ‖f_n − f_ref‖₁ with f_ref the base data (truncation sequences) or the
    /// finest member (spike sequences).
    pub f_l1_diff: f64,
    pub w1q_norm: f64,
    /// ‖u_n − u_{n_max}‖_{W^{1,q}}.
    pub diff_w1q: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub active_set_size: usize,
    pub entropy_pass: Option<bool>,
    pub entropy_max_violation: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema_version: u32,
    pub seed: u64,
    pub q_used: f64,
    pub q_window_lower: f64,
    pub q_window_upper: f64,
    pub q_in_window: bool,
    pub dim_mismatch: bool,
    pub entries: Vec<StabilityEntry>,
    /// max ‖u_n‖ ≤ 10 × median ‖u_n‖.
    pub bounded: bool,
    /// Differences to the finest member nonincreasing over the last half of
    /// the sequence.
    pub cauchy_decreasing: bool,
    pub aborted: bool,
    pub timestamp: String,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

pub fn run_stability(config: &ExperimentConfig) -> Result<ConvergenceReport> {
    config.validate()?;
    let seq_cfg = config
        .sequence
        .as_ref()
        .ok_or_else(|| Error::Config("stability run requires a `sequence` block".into()))?;

    // window experiments must compare like with like unless explicitly waived
    let dim_mismatch = config.params.n as usize != config.mesh.dim;
    if dim_mismatch && !config.allow_dim_mismatch {
        return Err(Error::Config(format!(
            "params.N = {} but mesh.dim = {}; pass allow_dim_mismatch to downgrade window assertions to flags",
            config.params.n, config.mesh.dim
        )));
    }
    let (q_used, window, q_in_window) = config.choose_q()?;

    let mesh = config.build_mesh()?;
    let problem = config.build_problem(&mesh)?;
    let spec = match seq_cfg.kind {
        SequenceKind::TruncateData => SequenceSpec::TruncateData { f: &problem.f },
        SequenceKind::MollifySpike => {
            SequenceSpec::MollifySpike { mass: seq_cfg.mass, base_width: seq_cfg.base_width }
        }
    };

    let mut members = Vec::new();
    let mut solutions: Vec<Solution> = Vec::new();
    let mut failures = 0usize;
    for (idx, &n) in seq_cfg.n_values.iter().enumerate() {
        let member = build_sequence(&mesh, &spec, n)?;
        let mut problem_n = problem.clone();
        problem_n.f = member.f_n.clone();
        let solution = solve_vi(&problem_n, &config.solver)?;
        if !solution.converged {
            failures += 1;
        }
        if let Some(dir) = &config.output_dir {
            persist_solution(dir, &n.to_string(), &problem_n, &solution)?;
        }
        let entropy_report = if config.entropy_family > 0 {
            Some(entropy::verify_entropy(
                &problem_n,
                &solution.u,
                config.entropy_family,
                &config.s_grid,
                config.seed.wrapping_add(n as u64),
            )?)
        } else {
            None
        };
        members.push((n, member, problem_n, entropy_report));
        solutions.push(solution);

        let attempted = idx + 1;
        if failures * 5 > seq_cfg.n_values.len() {
            let report = assemble(
                config, q_used, window.lower, window.upper, q_in_window, dim_mismatch, &members,
                &solutions, true,
            )?;
            persist(config, &report, &members, &solutions)?;
            return Err(Error::Aborted(format!(
                "{failures} of {attempted} solves failed to converge; partial results persisted"
            )));
        }
    }

    let report = assemble(
        config, q_used, window.lower, window.upper, q_in_window, dim_mismatch, &members,
        &solutions, false,
    )?;
    persist(config, &report, &members, &solutions)?;
    Ok(report)
}

type Member = (
    u32,
    crate::pipeline::sequence::ApproxSequence,
    crate::solver::ProblemSpec,
    Option<entropy::EntropyReport>,
);

#[allow(clippy::too_many_arguments)]
fn assemble(
    config: &ExperimentConfig,
    q_used: f64,
    q_window_lower: f64,
    q_window_upper: f64,
    q_in_window: bool,
    dim_mismatch: bool,
    members: &[Member],
    solutions: &[Solution],
    aborted: bool,
) -> Result<ConvergenceReport> {
    let last_idx = members.len() - 1;
    // truncation sequences approximate the base data; spike sequences have
    // no grid limit, so the finest member stands in
    let f_ref = match config.sequence.as_ref().map(|s| s.kind) {
        Some(SequenceKind::TruncateData) => {
            let mesh = members[last_idx].2.mesh.clone();
            crate::mesh::GridFunction::from_fn(mesh, |x| config.data.f.eval(x))
        }
        _ => members[last_idx].1.f_n.clone(),
    };
    let u_last = &solutions[last_idx].u;
    let mut entries = Vec::with_capacity(members.len());
    for ((n, member, problem_n, entropy_report), solution) in members.iter().zip(solutions) {
        let f_diff = member.f_n.difference(&f_ref)?;
        let abs: Vec<f64> = f_diff.values().iter().map(|v| v.abs()).collect();
        let f_l1_diff = problem_n.mesh.integrate_nodal(&abs);
        let w1q_norm = solution.u.norm(NormKind::W1q(q_used))?;
        let diff_w1q = solution.u.difference(u_last)?.norm(NormKind::W1q(q_used))?;
        entries.push(StabilityEntry {
            n: *n,
            f_l1: member.l1_norm,
            f_l1_diff,
            w1q_norm,
            diff_w1q,
            converged: solution.converged,
            outer_iters: solution.outer_iters,
            inner_iters_total: solution.inner_iters_total,
            active_set_size: solution.active_set.len(),
            entropy_pass: entropy_report.as_ref().map(|r| r.pass),
            entropy_max_violation: entropy_report.as_ref().map(|r| r.max_violation),
        });
    }

    let mut norms: Vec<f64> = entries.iter().map(|e| e.w1q_norm).collect();
    norms.sort_by(|a, b| a.total_cmp(b));
    let bounded = !norms.is_empty()
        && norms.last().copied().unwrap_or(0.0) <= 10.0 * median(&norms);

    let diffs: Vec<f64> = entries[..last_idx].iter().map(|e| e.diff_w1q).collect();
    let tail = &diffs[diffs.len() / 2..];
    let cauchy_decreasing =
        !tail.is_empty() && tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9));

    Ok(ConvergenceReport {
        schema_version: config.schema_version,
        seed: config.seed,
        q_used,
        q_window_lower,
        q_window_upper,
        q_in_window,
        dim_mismatch,
        entries,
        bounded,
        cauchy_decreasing,
        aborted,
        timestamp: timestamp_string(),
    })
}

fn persist(
    config: &ExperimentConfig,
    report: &ConvergenceReport,
    members: &[Member],
    solutions: &[Solution],
) -> Result<()> {
    let Some(dir) = &config.output_dir else {
        return Ok(());
    };
    write_json(&dir.join("report.json"), report)?;
    // energy profile of the finest member
    let (_, _, problem_last, _) = &members[members.len() - 1];
    let u_last = &solutions[solutions.len() - 1].u;
    let t_grid = if config.t_grid.is_empty() {
        auto_t_grid(u_last)
    } else {
        config.t_grid.clone()
    };
    let profile = entropy::apriori_profile(problem_last, u_last, &t_grid)?;
    let mut csv = Vec::new();
    profile.write_csv(&mut csv)?;
    std::fs::write(dir.join("profile.csv"), csv)?;
    Ok(())
}

/// 12 geometric truncation levels spanning [0.05, 2]·(1 + ‖u‖∞).
pub fn auto_t_grid(u: &crate::mesh::GridFunction) -> Vec<f64> {
    let top = 1.0 + u.norm(NormKind::Linf).unwrap_or(0.0);
    let lo = 0.05 * top;
    let hi = 2.0 * top;
    (0..12).map(|i| lo * (hi / lo).powf(i as f64 / 11.0)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pipeline::config::{DataConfig, MeshConfig, Profile, QChoice, SequenceConfig};
    use crate::params::ProblemParams;
    use crate::solver::SolverConfig;

    fn config_1d(n_values: Vec<u32>) -> ExperimentConfig {
        ExperimentConfig {
            schema_version: 1,
            params: ProblemParams { n: 3, p: 2.0, r: 1.0, theta: 0.0, b: 0.0 },
            mesh: MeshConfig { dim: 1, extent: vec![[0.0, 1.0]], resolution: 64 },
            field: Default::default(),
            solver: SolverConfig::default(),
            data: DataConfig {
                f: Profile::Constant { value: 3.0 },
                psi: Profile::Constant { value: -10.0 },
                g: Profile::Constant { value: 0.0 },
            },
            sequence: Some(SequenceConfig {
                kind: SequenceKind::TruncateData,
                n_values,
                mass: 1.0,
                base_width: 0.4,
            }),
            q_choice: QChoice::Midpoint,
            t_grid: vec![],
            s_grid: vec![],
            entropy_family: 4,
            resolutions: vec![],
            output_dir: None,
            seed: 7,
            allow_dim_mismatch: true,
        }
    }

    #[test]
    fn constant_data_gives_zero_differences() {
        // truncation is inactive from n = 4 on; those members are identical
        let report = run_stability(&config_1d(vec![4, 8, 16])).unwrap();
        assert!(report.bounded);
        assert!(report.cauchy_decreasing);
        for entry in &report.entries {
            assert!(entry.converged);
            assert!(entry.diff_w1q < 1e-12, "diff {}", entry.diff_w1q);
            assert_eq!(entry.entropy_pass, Some(true));
        }
    }

    #[test]
    fn dim_mismatch_requires_waiver() {
        let mut config = config_1d(vec![2, 4]);
        config.allow_dim_mismatch = false;
        assert!(matches!(run_stability(&config), Err(Error::Config(_))));
        let config = config_1d(vec![2, 4]);
        let report = run_stability(&config).unwrap();
        assert!(report.dim_mismatch);
    }

    #[test]
    fn out_of_window_q_is_flagged_not_fatal() {
        let mut config = config_1d(vec![2, 4]);
        config.q_choice = QChoice::Explicit { q: 5.0 };
        let report = run_stability(&config).unwrap();
        assert!(!report.q_in_window);
        assert!(report.bounded);
    }

    #[test]
    fn truncation_members_converge_toward_base_data() {
        let report = run_stability(&config_1d(vec![1, 2, 3, 4])).unwrap();
        let diffs: Vec<f64> = report.entries.iter().map(|e| e.f_l1_diff).collect();
        assert!(diffs.windows(2).all(|w| w[1] <= w[0] + 1e-14), "{diffs:?}");
        assert_eq!(diffs[3], 0.0, "truncation inactive at n = 4 for f = 3");
    }

    #[test]
    fn persists_run_directory() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = config_1d(vec![2, 4]);
        config.output_dir = Some(dir.path().to_path_buf());
        run_stability(&config).unwrap();
        for name in ["solution_2.csv", "solution_4.csv", "diagnostics_2.json", "report.json", "profile.csv"] {
            assert!(dir.path().join(name).exists(), "{name} missing");
        }
    }
}
