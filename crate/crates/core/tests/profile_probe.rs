//! Manual probe for the sublevel-energy profile across resolutions.
//! Run with: cargo test -p obstacle-core --test profile_probe -- --ignored --nocapture

use obstacle_core::entropy::apriori_profile;
use obstacle_core::field::{DegeneracySpec, FieldSpec, LowerOrderSpec};
use obstacle_core::mesh::{GridFunction, Mesh};
use obstacle_core::pipeline::{build_sequence, SequenceSpec};
use obstacle_core::solver::{solve_vi, ProblemSpec, SolverConfig};

#[test]
#[ignore]
fn fitted_c_across_resolutions() {
    let t_grid: Vec<f64> = (0..12).map(|i| 0.05 * 1.5_f64.powi(i)).collect();
    for res in [64, 128] {
        let mesh = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, res).unwrap();
        let member =
            build_sequence(&mesh, &SequenceSpec::MollifySpike { mass: 1.0, base_width: 0.4 }, 8)
                .unwrap();
        let problem = ProblemSpec {
            field: FieldSpec::p_laplacian(1.8).unwrap(),
            degeneracy: DegeneracySpec::new(0.1, 1.8).unwrap(),
            lower_order: LowerOrderSpec::new(0.5, 1.0).unwrap(),
            f: member.f_n,
            psi: GridFunction::from_fn(mesh.clone(), |x| {
                0.01 - 0.1 * ((x[0] - 0.5).powi(2) + (x[1] - 0.5).powi(2))
            }),
            g: GridFunction::zeros(mesh.clone()),
            mesh,
        };
        let config = SolverConfig { damping: 1.0, ..SolverConfig::default() };
        let sol = solve_vi(&problem, &config).unwrap();
        let profile = apriori_profile(&problem, &sol.u, &t_grid).unwrap();
        println!(
            "res {res}: fitted_C = {:.8}, E(last) = {:.8}, sup u = {:.6}",
            profile.fitted_c,
            profile.e_values.last().unwrap(),
            sol.u.norm(obstacle_core::mesh::NormKind::Linf).unwrap()
        );
    }
}
