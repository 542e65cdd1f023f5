//! Acceptance suite: every shipped criterion runs at its pinned tolerance
//! and prints one pass/fail line. The suite is sequential (single core) and
//! asserts its own wall-clock budget.
//!
//! Run with: cargo test -p obstacle-core --test acceptance -- --nocapture

mod common;

use std::time::Instant;

use common::{obstacle_exact, poisson_exact, sup_error_1d, OBSTACLE_CONTACT};
use obstacle_core::entropy::{apriori_profile, verify_entropy};
use obstacle_core::field::{check_structure, FieldSpec};
use obstacle_core::mesh::GridFunction;
use obstacle_core::params::{check_admissible, check_remark1, q_range, sample_admissible};
use obstacle_core::pipeline::{
    build_sequence, run_refinement, run_stability, ExperimentConfig, SequenceSpec,
};
use obstacle_core::solver::{solve_vi, ProblemSpec, Solution, SolverConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SUITE_BUDGET_SECS: f64 = 120.0;

/// Golden record for the 2D spike stability run (5% tolerance): W^{1,q}
/// norms per member and differences to the finest member.
const GOLDEN_W1Q: [f64; 5] = [
    0.353344261412357,
    0.4366982920909814,
    0.4964088170301565,
    0.5407030236583796,
    0.5739671331157215,
];
const GOLDEN_DIFF_W1Q: [f64; 4] = [
    0.2817011875227634,
    0.1936547340015095,
    0.1210951841581927,
    0.05907606049529679,
];
const GOLDEN_TOL: f64 = 0.05;

struct Outcome {
    index: usize,
    name: &'static str,
    pass: bool,
    detail: String,
}

struct Example {
    name: String,
    problem: ProblemSpec,
    solution: Solution,
    config: SolverConfig,
}

fn solve_config(name: &str) -> (ExperimentConfig, Example) {
    let config = common::load_config(name);
    let mesh = config.build_mesh().unwrap();
    let problem = config.build_problem(&mesh).unwrap();
    let solution = solve_vi(&problem, &config.solver).unwrap();
    (
        config.clone(),
        Example { name: name.to_string(), problem, solution, config: config.solver.clone() },
    )
}

fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

/// Reports stripped of their timestamp for byte comparison.
fn strip_timestamp(json_text: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(json_text).unwrap();
    if let Some(obj) = v.as_object_mut() {
        obj.remove("timestamp");
    }
    serde_json::to_string_pretty(&v).unwrap()
}

#[test]
fn acceptance_suite() {
    let suite_start = Instant::now();
    let mut outcomes: Vec<Outcome> = Vec::new();
    let mut examples: Vec<Example> = Vec::new();

    // ---- criterion 8 runs first so later criteria can reuse its artifacts
    let stability_dir = tempfile::tempdir().unwrap();
    let mut spike_config = common::load_config("spike_2d.json");
    spike_config.output_dir = Some(stability_dir.path().to_path_buf());
    let stability = run_stability(&spike_config).expect("stability run must complete");

    {
        let n_ok = stability.entries.iter().map(|e| e.n).collect::<Vec<_>>() == [2, 4, 8, 16, 32];
        let all_converged = stability.entries.iter().all(|e| e.converged);
        let chain: Vec<f64> = stability.entries[..4].iter().map(|e| e.diff_w1q).collect();
        let chain_decreasing = chain.windows(2).all(|w| w[1] <= w[0]);
        let golden_w1q_ok = stability
            .entries
            .iter()
            .zip(GOLDEN_W1Q)
            .all(|(e, g)| rel_err(e.w1q_norm, g) <= GOLDEN_TOL);
        let golden_diff_ok = stability.entries[..4]
            .iter()
            .zip(GOLDEN_DIFF_W1Q)
            .all(|(e, g)| rel_err(e.diff_w1q, g) <= GOLDEN_TOL);
        let pass = n_ok
            && all_converged
            && stability.bounded
            && chain_decreasing
            && stability.cauchy_decreasing
            && golden_w1q_ok
            && golden_diff_ok
            && stability.q_in_window;
        outcomes.push(Outcome {
            index: 8,
            name: "stability of the spike sequence",
            pass,
            detail: format!(
                "q = {:.6}, W1q = {:?}, diffs = {:?}, bounded = {}, golden within {:.0}%",
                stability.q_used,
                stability.entries.iter().map(|e| e.w1q_norm).collect::<Vec<_>>(),
                chain,
                stability.bounded,
                100.0 * GOLDEN_TOL
            ),
        });
    }

    // ---- criterion 1: exponent suite over random admissible tuples
    {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let mut failures = 0usize;
        let total = 1500usize;
        for _ in 0..total {
            let params = sample_admissible(&mut rng);
            let admissible = check_admissible(&params).pass;
            let window = q_range(&params);
            let remark = check_remark1(&params);
            let ok = admissible
                && window.as_ref().map(|w| w.nonempty).unwrap_or(false)
                && remark.map(|r| r.pass).unwrap_or(false);
            if !ok {
                failures += 1;
            }
        }
        let elapsed = start.elapsed().as_secs_f64();
        outcomes.push(Outcome {
            index: 1,
            name: "exponent suite",
            pass: failures == 0 && elapsed < 1.0,
            detail: format!("{total} tuples, {failures} failures, {elapsed:.3}s"),
        });
    }

    // ---- criterion 2: structure suite at eps_reg = 0
    {
        let mut pass = true;
        let mut details = Vec::new();
        for (i, p) in [1.5, 2.0, 3.0].into_iter().enumerate() {
            let spec = FieldSpec::p_laplacian_exact(p).unwrap();
            let report = check_structure(&spec, 10_000, 100 + i as u64).unwrap();
            pass &= report.pass;
            details.push(format!(
                "p={p}: gamma={:.4}, min slacks [{:.1e}, {:.1e}, {:.1e}, {:.1e}]",
                report.gamma_used,
                report.coercivity_min_slack,
                report.growth_min_slack,
                report.monotonicity_min_slack,
                report.continuity_min_slack
            ));
        }
        outcomes.push(Outcome {
            index: 2,
            name: "structure suite",
            pass,
            detail: details.join("; "),
        });
    }

    // ---- criterion 3: Poisson oracle with refinement ratios
    {
        let config = common::load_config("poisson_1d.json");
        let mut errors = Vec::new();
        for cells in [64usize, 128, 256] {
            let mesh = config.build_mesh_with_resolution(cells).unwrap();
            let problem = config.build_problem(&mesh).unwrap();
            let solution = solve_vi(&problem, &config.solver).unwrap();
            errors.push(sup_error_1d(&solution.u, poisson_exact));
            if cells == 128 {
                examples.push(Example {
                    name: "poisson_1d".into(),
                    problem,
                    solution,
                    config: config.solver.clone(),
                });
            }
        }
        let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
        let pass = errors[1] < 1e-4 && ratios.iter().all(|r| (3.5..=4.5).contains(r));
        outcomes.push(Outcome {
            index: 3,
            name: "Poisson oracle",
            pass,
            detail: format!("sup errors {errors:?}, ratios {ratios:?}"),
        });
    }

    // ---- criterion 4: obstacle oracle (contact position + sup error)
    {
        let config = common::load_config("obstacle_1d.json");
        let mesh = config.build_mesh().unwrap();
        let problem = config.build_problem(&mesh).unwrap();
        let solution = solve_vi(&problem, &config.solver).unwrap();
        let h = 1.0 / mesh.resolution() as f64;
        let sup = sup_error_1d(&solution.u, obstacle_exact);
        let first = *solution.active_set.first().unwrap_or(&0);
        let last = *solution.active_set.last().unwrap_or(&0);
        let x_lo = mesh.node(first)[0];
        let x_hi = mesh.node(last)[0];
        let contact_ok = (x_lo - OBSTACLE_CONTACT).abs() <= h + 1e-12
            && (x_hi - (1.0 - OBSTACLE_CONTACT)).abs() <= h + 1e-12;
        let pass = sup < 5.0 * h && contact_ok && solution.converged;
        outcomes.push(Outcome {
            index: 4,
            name: "obstacle oracle",
            pass,
            detail: format!(
                "sup error {sup:.3e} (< {:.3e}), contact [{x_lo:.6}, {x_hi:.6}] vs [{:.6}, {:.6}]",
                5.0 * h,
                OBSTACLE_CONTACT,
                1.0 - OBSTACLE_CONTACT
            ),
        });
        examples.push(Example {
            name: "obstacle_1d".into(),
            problem,
            solution,
            config: config.solver.clone(),
        });
    }

    // the degenerate 1D example joins the shipped set
    {
        let (_, example) = solve_config("plap_1d.json");
        examples.push(example);
    }

    // ---- criterion 7: profile stability between 64^2 and 128^2
    let spike64 = {
        let t_grid: Vec<f64> = (0..12).map(|i| 0.05 * 1.5_f64.powi(i)).collect();
        let mut results = Vec::new();
        let mut example64 = None;
        for res in [64usize, 128] {
            let mesh = spike_config.build_mesh_with_resolution(res).unwrap();
            let member = build_sequence(
                &mesh,
                &SequenceSpec::MollifySpike { mass: 1.0, base_width: 0.4 },
                8,
            )
            .unwrap();
            let mut problem = spike_config.build_problem(&mesh).unwrap();
            problem.f = member.f_n;
            let u = if res == 128 {
                // the stability run already solved this member; reuse it
                let file = std::fs::File::open(stability_dir.path().join("solution_8.csv")).unwrap();
                GridFunction::read_csv(mesh.clone(), std::io::BufReader::new(file)).unwrap()
            } else {
                let solution = solve_vi(&problem, &spike_config.solver).unwrap();
                let u = solution.u.clone();
                example64 = Some(Example {
                    name: "spike_2d_res64_n8".into(),
                    problem: problem.clone(),
                    solution,
                    config: spike_config.solver.clone(),
                });
                u
            };
            let profile = apriori_profile(&problem, &u, &t_grid).unwrap();
            let nondecreasing = profile.e_values.windows(2).all(|w| w[1] >= w[0]);
            results.push((res, profile.fitted_c, nondecreasing));
        }
        let (c64, c128) = (results[0].1, results[1].1);
        let variation = rel_err(c64, c128);
        let pass = results.iter().all(|r| r.2 && r.1.is_finite() && r.1 > 0.0) && variation < 0.2;
        outcomes.push(Outcome {
            index: 7,
            name: "sublevel energy profile",
            pass,
            detail: format!(
                "fitted_C 64^2 = {c64:.6}, 128^2 = {c128:.6}, variation {:.2}%",
                100.0 * variation
            ),
        });
        example64.unwrap()
    };
    examples.push(spike64);

    // ---- criterion 6: entropy suite + pinned negative control
    {
        let mut pass = true;
        let mut details = Vec::new();
        for example in &examples {
            if !example.solution.converged {
                pass = false;
                details.push(format!("{}: not converged", example.name));
                continue;
            }
            let report =
                verify_entropy(&example.problem, &example.solution.u, 50, &[], 2024).unwrap();
            pass &= report.pass;
            details.push(format!("{} max violation {:.2e}", example.name, report.max_violation));
        }
        // negative control: u ≡ 0 is feasible for the Poisson data but is not
        // a solution; the verification must fail by a wide margin
        let config = common::load_config("poisson_1d.json");
        let mesh = config.build_mesh().unwrap();
        let problem = config.build_problem(&mesh).unwrap();
        let zero = GridFunction::zeros(mesh);
        let control = verify_entropy(&problem, &zero, 50, &[], 2024).unwrap();
        let control_ok = !control.pass && control.max_violation > 100.0 * control.threshold;
        pass &= control_ok;
        details.push(format!(
            "negative control violation {:.2e} (threshold {:.2e}, fails: {})",
            control.max_violation,
            control.threshold,
            !control.pass
        ));
        outcomes.push(Outcome { index: 6, name: "entropy suite", pass, detail: details.join("; ") });
    }

    // ---- criterion 5: feasibility + complementarity on every shipped
    // solution, plus the recorded outer updates settling below outer_tol
    {
        let contraction_ok = |updates: &[f64], outer_tol: f64| -> bool {
            let tail = &updates[updates.len().div_ceil(2) - 1..];
            updates.last().is_some_and(|&d| d <= outer_tol)
                && tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-9))
        };
        let mut violations = 0usize;
        let mut worst: f64 = 0.0;
        for example in &examples {
            let tol = example.config.scaled_tol(example.solution.scale);
            let feas = example.solution.feasibility_violation(&example.problem);
            let comp = example.solution.complementarity_sup();
            worst = worst.max(feas.max(comp) / tol);
            if feas > tol
                || comp > tol
                || !contraction_ok(&example.solution.outer_updates, example.config.outer_tol)
            {
                violations += 1;
            }
        }
        // the 2D members solved inside the stability run report through
        // their persisted diagnostics
        for n in [2u32, 4, 8, 16, 32] {
            let path = stability_dir.path().join(format!("diagnostics_{n}.json"));
            let v: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
            let tol = 10.0 * spike_config.solver.inner_tol * v["scale"].as_f64().unwrap();
            let feas = v["feasibility_violation"].as_f64().unwrap();
            let comp = v["complementarity_sup"].as_f64().unwrap();
            let updates: Vec<f64> = v["outer_updates"]
                .as_array()
                .unwrap()
                .iter()
                .map(|x| x.as_f64().unwrap())
                .collect();
            worst = worst.max(feas.max(comp) / tol);
            if feas > tol || comp > tol || !contraction_ok(&updates, spike_config.solver.outer_tol)
            {
                violations += 1;
            }
        }
        outcomes.push(Outcome {
            index: 5,
            name: "feasibility + complementarity",
            pass: violations == 0,
            detail: format!(
                "{} solutions checked, {violations} violations, worst ratio {worst:.3}",
                examples.len() + 5
            ),
        });
    }

    // ---- criterion 9: θ = 0 solutions bit-identical to the bypass build
    {
        let mut pass = true;
        let mut details = Vec::new();
        for name in ["poisson_1d.json", "obstacle_1d.json", "plap_1d.json"] {
            let mut config = common::load_config(name);
            config.params.theta = 0.0;
            let mesh = config.build_mesh().unwrap();
            let problem = config.build_problem(&mesh).unwrap();
            let plain = solve_vi(&problem, &config.solver).unwrap();
            let mut bypass_cfg = config.solver.clone();
            bypass_cfg.degeneracy_bypass = true;
            let bypass = solve_vi(&problem, &bypass_cfg).unwrap();
            let identical = plain
                .u
                .values()
                .iter()
                .zip(bypass.u.values())
                .all(|(a, b)| a.to_bits() == b.to_bits())
                && plain.outer_iters == bypass.outer_iters
                && plain.inner_iters_total == bypass.inner_iters_total;
            pass &= identical;
            details.push(format!("{name}: {}", if identical { "bit-identical" } else { "DIFFERS" }));
        }
        outcomes.push(Outcome {
            index: 9,
            name: "θ = 0 degeneracy bypass",
            pass,
            detail: details.join("; "),
        });
    }

    // ---- criterion 10: byte-determinism of every report kind + runtime
    {
        let mut pass = true;
        let mut details = Vec::new();

        let structure_pair: Vec<String> = (0..2)
            .map(|_| {
                let spec = FieldSpec::p_laplacian_exact(1.8).unwrap();
                let report = check_structure(&spec, 5_000, 9).unwrap();
                serde_json::to_string_pretty(&report).unwrap()
            })
            .collect();
        let structure_ok = structure_pair[0] == structure_pair[1];
        pass &= structure_ok;
        details.push(format!("structure report deterministic: {structure_ok}"));

        let mut small = spike_config.clone();
        small.mesh.resolution = 48;
        small.sequence.as_mut().unwrap().n_values = vec![2, 4, 8];
        small.entropy_family = 6;
        let mut reports = Vec::new();
        let mut run_files = Vec::new();
        for _ in 0..2 {
            let dir = tempfile::tempdir().unwrap();
            small.output_dir = Some(dir.path().to_path_buf());
            run_stability(&small).unwrap();
            reports.push(strip_timestamp(
                &std::fs::read_to_string(dir.path().join("report.json")).unwrap(),
            ));
            run_files.push((
                std::fs::read(dir.path().join("solution_8.csv")).unwrap(),
                std::fs::read(dir.path().join("profile.csv")).unwrap(),
            ));
        }
        let stability_ok = reports[0] == reports[1]
            && run_files[0].0 == run_files[1].0
            && run_files[0].1 == run_files[1].1;
        pass &= stability_ok;
        details.push(format!("stability run byte-identical: {stability_ok}"));

        let mut refine_config = common::load_config("obstacle_1d.json");
        refine_config.resolutions = vec![32, 64];
        let refine_pair: Vec<String> = (0..2)
            .map(|_| {
                let report = run_refinement(&refine_config).unwrap();
                strip_timestamp(&serde_json::to_string(&report).unwrap())
            })
            .collect();
        let refine_ok = refine_pair[0] == refine_pair[1];
        pass &= refine_ok;
        details.push(format!("refinement report deterministic: {refine_ok}"));

        let elapsed = suite_start.elapsed().as_secs_f64();
        let on_budget = elapsed < SUITE_BUDGET_SECS;
        pass &= on_budget;
        details.push(format!("suite wall time {elapsed:.1}s (< {SUITE_BUDGET_SECS:.0}s)"));
        outcomes.push(Outcome {
            index: 10,
            name: "determinism + runtime",
            pass,
            detail: details.join("; "),
        });
    }

    outcomes.sort_by_key(|o| o.index);
    let mut failed = Vec::new();
    for o in &outcomes {
        println!(
            "ACCEPTANCE {:>2} [{}] {}: {}",
            o.index,
            o.name,
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        if !o.pass {
            failed.push(o.index);
        }
    }
    assert!(failed.is_empty(), "criteria failed: {failed:?}");
}
