//! Nested-mesh refinement studies: per-resolution solves, coarse-to-fine
//! differences through exact prolongation, and diff-based order estimates.
//! This is the discretization-error control every other check leans on.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{prolongate, NormKind};
use crate::pipeline::config::ExperimentConfig;
use crate::pipeline::{persist_solution, timestamp_string, write_json};
use crate::solver::solve_vi;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementEntry {
    pub resolution: usize,
    pub sup_norm: f64,
    /// W^{1,p} norm (p from the field).
    pub w1p_norm: f64,
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementPair {
    pub coarse: usize,
    pub fine: usize,
    /// Sup difference after prolongating the coarse solution.
    pub diff_sup: f64,
    pub diff_w1p: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RefinementReport {
    pub schema_version: u32,
    pub seed: u64,
    pub resolutions: Vec<usize>,
    pub entries: Vec<RefinementEntry>,
    pub pairs: Vec<RefinementPair>,
    /// log2 ratios of successive sup differences; ≈ the convergence order.
    pub orders_sup: Vec<f64>,
    pub aborted: bool,
    pub timestamp: String,
}

fn resolution_ladder(config: &ExperimentConfig) -> Result<Vec<usize>> {
    if !config.resolutions.is_empty() {
        return Ok(config.resolutions.clone());
    }
    let fine = config.mesh.resolution;
    if !fine.is_multiple_of(4) || fine / 4 < 2 {
        return Err(Error::Config(format!(
            "cannot derive a nested ladder from resolution {fine}; set `resolutions` explicitly"
        )));
    }
    Ok(vec![fine / 4, fine / 2, fine])
}

pub fn run_refinement(config: &ExperimentConfig) -> Result<RefinementReport> {
    config.validate()?;
    let resolutions = resolution_ladder(config)?;
    let p = config.params.p;

    let mut entries = Vec::new();
    let mut solutions = Vec::new();
    let mut meshes = Vec::new();
    let mut failures = 0usize;
    for &res in &resolutions {
        let mesh = config.build_mesh_with_resolution(res)?;
        let problem = config.build_problem(&mesh)?;
        let solution = solve_vi(&problem, &config.solver)?;
        if !solution.converged {
            failures += 1;
        }
        if let Some(dir) = &config.output_dir {
            persist_solution(dir, &format!("res{res}"), &problem, &solution)?;
        }
        entries.push(RefinementEntry {
            resolution: res,
            sup_norm: solution.u.norm(NormKind::Linf)?,
            w1p_norm: solution.u.norm(NormKind::W1q(p))?,
            converged: solution.converged,
            outer_iters: solution.outer_iters,
            inner_iters_total: solution.inner_iters_total,
        });
        solutions.push(solution);
        meshes.push(mesh);

        if failures * 5 > resolutions.len() {
            let report = assemble(config, &resolutions, entries, &solutions, &meshes, true)?;
            if let Some(dir) = &config.output_dir {
                write_json(&dir.join("report.json"), &report)?;
            }
            return Err(Error::Aborted(format!(
                "{failures} refinement solves failed to converge; partial results persisted"
            )));
        }
    }

    let report = assemble(config, &resolutions, entries, &solutions, &meshes, false)?;
    if let Some(dir) = &config.output_dir {
        write_json(&dir.join("report.json"), &report)?;
    }
    Ok(report)
}

fn assemble(
    config: &ExperimentConfig,
    resolutions: &[usize],
    entries: Vec<RefinementEntry>,
    solutions: &[crate::solver::Solution],
    meshes: &[std::sync::Arc<crate::mesh::Mesh>],
    aborted: bool,
) -> Result<RefinementReport> {
    let p = config.params.p;
    let mut pairs = Vec::new();
    for k in 1..solutions.len() {
        let coarse_on_fine = prolongate(&solutions[k - 1].u, &meshes[k])?;
        let diff = solutions[k].u.difference(&coarse_on_fine)?;
        pairs.push(RefinementPair {
            coarse: resolutions[k - 1],
            fine: resolutions[k],
            diff_sup: diff.norm(NormKind::Linf)?,
            diff_w1p: diff.norm(NormKind::W1q(p))?,
        });
    }
    let orders_sup = pairs
        .windows(2)
        .map(|w| (w[0].diff_sup / w[1].diff_sup).log2())
        .collect();
    Ok(RefinementReport {
        schema_version: config.schema_version,
        seed: config.seed,
        resolutions: resolutions.to_vec(),
        entries,
        pairs,
        orders_sup,
        aborted,
        timestamp: timestamp_string(),
    })
}
