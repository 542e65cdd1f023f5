//! Discrete variational-inequality solver for the obstacle problem.
//!
//! Outer loop: fixed point on the degeneracy factor frozen at the current
//! iterate, with damped updates. Inner loop: projected nonlinear
//! Gauss–Seidel/SOR: per node a scalar Newton solve of the stationarity
//! equation (bisection fallback on a bracketing interval), then projection
//! onto [ψ_i, ∞). No convergence theorem is claimed for the outer loop;
//! budgets and recorded update norms stand in for one.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DegeneracySpec, FieldKind, FieldSpec, LowerOrderSpec};
use crate::mesh::{GridFunction, Mesh};
use crate::vec2::{self, Vec2};

/// Feasibility slack allowed when validating externally supplied test
/// functions and boundary compatibility.
pub const FEASIBILITY_TOL: f64 = 1e-9;

/// The full discrete problem: operator pieces plus data on one mesh.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub mesh: Arc<Mesh>,
    pub field: FieldSpec,
    pub degeneracy: DegeneracySpec,
    pub lower_order: LowerOrderSpec,
    pub f: GridFunction,
    pub psi: GridFunction,
    pub g: GridFunction,
}

impl ProblemSpec {
    pub fn validate(&self) -> Result<()> {
        for (name, gf) in [("f", &self.f), ("psi", &self.psi), ("g", &self.g)] {
            if !gf.mesh().compatible(&self.mesh) {
                return Err(Error::Mesh(format!("{name} lives on a different mesh")));
            }
            if !gf.is_finite() {
                return Err(Error::NonFinite(format!("{name} has non-finite nodal values")));
            }
        }
        // (psi - g)+ must vanish on the boundary so the constraint set is nonempty
        for i in self.mesh.boundary_nodes() {
            let (psi, g) = (self.psi.values()[i], self.g.values()[i]);
            if psi > g + FEASIBILITY_TOL {
                return Err(Error::Infeasible(format!(
                    "psi = {psi} exceeds boundary datum g = {g} at boundary node {i}"
                )));
            }
        }
        Ok(())
    }

    /// Tolerance scale 1 + ‖f‖₁ + ‖∇g‖_p^p, which makes pass/fail thresholds
    /// resolution independent.
    pub fn scale(&self) -> f64 {
        let abs_f: Vec<f64> = self.f.values().iter().map(|v| v.abs()).collect();
        let f_l1 = self.mesh.integrate_nodal(&abs_f);
        let mut grad_g = 0.0;
        for e in 0..self.mesh.num_elements() {
            let g = vec2::norm(self.g.element_gradient(e));
            grad_g += self.mesh.element_volume(e) * g.powf(self.field.p);
        }
        1.0 + f_l1 + grad_g
    }

    /// Element-averaged degeneracy factor evaluated at nodal values `state`.
    pub fn element_factors(&self, state: &[f64]) -> Vec<f64> {
        (0..self.mesh.num_elements())
            .map(|e| {
                let nodes = self.mesh.element_nodes(e);
                let sum: f64 =
                    nodes.iter().map(|&i| self.degeneracy.factor(state[i as usize])).sum();
                sum / nodes.len() as f64
            })
            .collect()
    }

    /// v ∈ K: v ≥ ψ and v = g on the boundary (up to [`FEASIBILITY_TOL`]).
    pub fn check_feasible(&self, v: &GridFunction) -> Result<()> {
        if !v.mesh().compatible(&self.mesh) {
            return Err(Error::InfeasibleTest("test function on a different mesh".into()));
        }
        for i in 0..self.mesh.num_nodes() {
            let vi = v.values()[i];
            if vi < self.psi.values()[i] - FEASIBILITY_TOL {
                return Err(Error::InfeasibleTest(format!(
                    "v = {vi} below obstacle {} at node {i}",
                    self.psi.values()[i]
                )));
            }
            if self.mesh.is_boundary(i) && (vi - self.g.values()[i]).abs() > FEASIBILITY_TOL {
                return Err(Error::InfeasibleTest(format!(
                    "v = {vi} does not match boundary datum {} at node {i}",
                    self.g.values()[i]
                )));
            }
        }
        Ok(())
    }
}

fn default_outer_tol() -> f64 {
    1e-8
}
fn default_outer_max() -> usize {
    200
}
fn default_inner_tol() -> f64 {
    1e-10
}
fn default_inner_max() -> usize {
    100_000
}
fn default_damping() -> f64 {
    0.7
}
fn default_newton_local() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    /// Sup-norm threshold on successive outer iterates.
    #[serde(default = "default_outer_tol")]
    pub outer_tol: f64,
    #[serde(default = "default_outer_max")]
    pub outer_max: usize,
    /// Threshold on the sup norm of the projected nodal residual, scaled by
    /// the problem scale.
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    /// Sweep budget per inner solve.
    #[serde(default = "default_inner_max")]
    pub inner_max: usize,
    /// Damping of the outer update, in (0, 1].
    #[serde(default = "default_damping")]
    pub damping: f64,
    /// Scalar Newton per node inside the sweeps; plain bisection otherwise.
    #[serde(default = "default_newton_local")]
    pub newton_local: bool,
    /// Over-relaxation factor for the sweeps. `None` picks
    /// min(1.95, 2/(1+sin(π/resolution))).
    #[serde(default)]
    pub sor_omega: Option<f64>,
    /// Skip the degeneracy factor entirely (consistency checks for θ = 0).
    #[serde(default)]
    pub degeneracy_bypass: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            outer_tol: default_outer_tol(),
            outer_max: default_outer_max(),
            inner_tol: default_inner_tol(),
            inner_max: default_inner_max(),
            damping: default_damping(),
            newton_local: default_newton_local(),
            sor_omega: None,
            degeneracy_bypass: false,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > 0.0) || !(self.inner_tol > 0.0) {
            return Err(Error::InvalidParams("tolerances must be positive".into()));
        }
        if !(self.damping > 0.0 && self.damping <= 1.0) {
            return Err(Error::InvalidParams(format!(
                "damping = {} outside (0, 1]",
                self.damping
            )));
        }
        if self.outer_max == 0 || self.inner_max == 0 {
            return Err(Error::InvalidParams("iteration budgets must be >= 1".into()));
        }
        if let Some(w) = self.sor_omega {
            if !(w > 0.0 && w < 2.0) {
                return Err(Error::InvalidParams(format!("sor_omega = {w} outside (0, 2)")));
            }
        }
        Ok(())
    }

    /// Active-set classification width and complementarity threshold.
    pub fn scaled_tol(&self, scale: f64) -> f64 {
        10.0 * self.inner_tol * scale
    }

    fn omega_for(&self, mesh: &Mesh) -> f64 {
        self.sor_omega.unwrap_or_else(|| {
            let n = mesh.resolution() as f64;
            (2.0 / (1.0 + (std::f64::consts::PI / n).sin())).min(1.95)
        })
    }
}

/// Per-node stationarity and complementarity slacks of a returned solution,
/// measured against the energy with the converged frozen factor.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResidualReport {
    /// Volume-normalized nodal gradient of the frozen discrete energy
    /// (boundary nodes hold 0).
    pub stationarity: Vec<f64>,
    /// min(u_i − ψ_i, residual_i) per node (boundary nodes hold 0).
    pub complementarity: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: GridFunction,
    /// Nodes with u_i − ψ_i ≤ 10·inner_tol·scale.
    pub active_set: Vec<usize>,
    pub outer_iters: usize,
    /// Total sweeps across all inner solves.
    pub inner_iters_total: usize,
    pub converged: bool,
    pub residual_report: ResidualReport,
    /// Sup-norm outer updates, one per outer iteration.
    pub outer_updates: Vec<f64>,
    /// Tolerance scale used for every threshold.
    pub scale: f64,
}

/// Serializable solve summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolutionDiagnostics {
    pub converged: bool,
    pub outer_iters: usize,
    pub inner_iters_total: usize,
    pub active_set_size: usize,
    /// Sup of the projected residual: |r| off contact, (−r)+ on contact.
    pub projected_residual_sup: f64,
    pub complementarity_sup: f64,
    pub feasibility_violation: f64,
    pub scale: f64,
    pub outer_updates: Vec<f64>,
}

impl Solution {
    /// Sup of |min(u − ψ, residual)| over interior nodes.
    pub fn complementarity_sup(&self) -> f64 {
        self.residual_report.complementarity.iter().fold(0.0, |m: f64, c| m.max(c.abs()))
    }

    /// Sup of the projected residual over interior nodes.
    pub fn projected_residual_sup(&self, problem: &ProblemSpec) -> f64 {
        let mut sup: f64 = 0.0;
        for i in problem.mesh.interior_nodes() {
            let r = self.residual_report.stationarity[i];
            let viol = if self.u.values()[i] > problem.psi.values()[i] {
                r.abs()
            } else {
                (-r).max(0.0)
            };
            sup = sup.max(viol);
        }
        sup
    }

    /// max over nodes of (ψ_i − u_i)+.
    pub fn feasibility_violation(&self, problem: &ProblemSpec) -> f64 {
        self.u
            .values()
            .iter()
            .zip(problem.psi.values())
            .map(|(u, p)| (p - u).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn diagnostics(&self, problem: &ProblemSpec) -> SolutionDiagnostics {
        SolutionDiagnostics {
            converged: self.converged,
            outer_iters: self.outer_iters,
            inner_iters_total: self.inner_iters_total,
            active_set_size: self.active_set.len(),
            projected_residual_sup: self.projected_residual_sup(problem),
            complementarity_sup: self.complementarity_sup(),
            feasibility_violation: self.feasibility_violation(problem),
            scale: self.scale,
            outer_updates: self.outer_updates.clone(),
        }
    }
}

/// Nodal-residual evaluation context for one frozen inner problem.
struct Kernel<'a> {
    mesh: &'a Mesh,
    p: f64,
    eps2: f64,
    p_is_two: bool,
    lower: LowerOrderSpec,
    f: &'a [f64],
    inv_vol: &'a [f64],
    dbar: Option<&'a [f64]>,
}

impl Kernel<'_> {
    /// Volume-normalized residual (and derivative) at node `i` with trial
    /// value `t`, given element gradients consistent with nodal value `base`
    /// at `i`.
    #[inline]
    fn residual(&self, i: usize, t: f64, base: f64, grads: &[Vec2], want_deriv: bool) -> (f64, f64) {
        let mut res = 0.0;
        let mut der = 0.0;
        let dt = t - base;
        for &(e, local) in self.mesh.node_elements(i) {
            let e = e as usize;
            let gphi = self.mesh.shape_gradient(e, local as usize);
            let c = self.mesh.element_volume(e) * self.dbar.map_or(1.0, |d| d[e]);
            let mut g = grads[e];
            if dt != 0.0 {
                g = vec2::add(g, vec2::scale(dt, gphi));
            }
            let gdot = vec2::dot(g, gphi);
            if self.p_is_two {
                res += c * gdot;
                if want_deriv {
                    der += c * vec2::norm_sq(gphi);
                }
            } else {
                let w = self.eps2 + vec2::norm_sq(g);
                if w == 0.0 {
                    continue;
                }
                let s = w.powf(0.5 * (self.p - 2.0));
                res += c * s * gdot;
                if want_deriv {
                    der += c * s * (vec2::norm_sq(gphi) + (self.p - 2.0) * gdot * gdot / w);
                }
            }
        }
        let iv = self.inv_vol[i];
        let r = res * iv + self.lower.term(t) - self.f[i];
        let dr = if want_deriv { der * iv + self.lower.term_derivative(t) } else { 0.0 };
        (r, dr)
    }

    /// Root of the monotone scalar equation residual(t) = 0.
    fn nodal_root(&self, i: usize, t0: f64, grads: &[Vec2], node_tol: f64, newton: bool) -> f64 {
        let (r0, dr0) = self.residual(i, t0, t0, grads, true);
        if r0.abs() <= node_tol {
            return t0;
        }
        // fast path: near convergence the nodal equation is almost linear and
        // one or two plain Newton steps land inside the tolerance
        if newton && dr0.is_finite() && dr0 > 0.0 {
            let t1 = t0 - r0 / dr0;
            if t1.is_finite() {
                let (r1, dr1) = self.residual(i, t1, t0, grads, true);
                if r1.abs() <= node_tol {
                    return t1;
                }
                if dr1.is_finite() && dr1 > 0.0 {
                    let t2 = t1 - r1 / dr1;
                    // a sign change pins the root between t0 and t1
                    let bracketed = r0 * r1 < 0.0;
                    let inside = !bracketed
                        || (t2 > t0.min(t1) && t2 < t0.max(t1));
                    if t2.is_finite() && inside {
                        let (r2, _) = self.residual(i, t2, t0, grads, false);
                        if r2.abs() <= node_tol {
                            return t2;
                        }
                    }
                }
            }
        }
        // bracket the root; the residual is nondecreasing in t
        let mut step = if dr0.is_finite() && dr0 > 0.0 {
            ((r0.abs() / dr0) * 1.5 + 1e-12).min(1e6 * (1.0 + t0.abs()))
        } else {
            1.0 + 0.1 * t0.abs()
        };
        let (mut lo, mut hi);
        if r0 > 0.0 {
            hi = t0;
            lo = t0 - step;
            let mut tries = 0;
            while self.residual(i, lo, t0, grads, false).0 > 0.0 {
                step *= 4.0;
                lo = t0 - step;
                tries += 1;
                if tries > 60 {
                    return lo;
                }
            }
        } else {
            lo = t0;
            hi = t0 + step;
            let mut tries = 0;
            while self.residual(i, hi, t0, grads, false).0 < 0.0 {
                step *= 4.0;
                hi = t0 + step;
                tries += 1;
                if tries > 60 {
                    return hi;
                }
            }
        }
        let mut t = 0.5 * (lo + hi);
        if newton && dr0.is_finite() && dr0 > 0.0 {
            let guess = t0 - r0 / dr0;
            if guess > lo && guess < hi {
                t = guess;
            }
        }
        for _ in 0..40 {
            let (r, dr) = self.residual(i, t, t0, grads, newton);
            if r.abs() <= node_tol {
                return t;
            }
            if r > 0.0 {
                hi = t;
            } else {
                lo = t;
            }
            if hi - lo <= 1e-15 * (1.0 + t.abs()) {
                return 0.5 * (lo + hi);
            }
            let mut next = if newton && dr.is_finite() && dr > 0.0 { t - r / dr } else { f64::NAN };
            if !(next > lo && next < hi) {
                next = 0.5 * (lo + hi);
            }
            t = next;
        }
        t
    }
}

fn recompute_gradients(mesh: &Mesh, u: &[f64], grads: &mut [Vec2]) {
    let nv = mesh.verts_per_elem();
    for (e, grad) in grads.iter_mut().enumerate() {
        let mut g = [0.0, 0.0];
        for local in 0..nv {
            let nid = mesh.element_nodes(e)[local] as usize;
            g = vec2::add(g, vec2::scale(u[nid], mesh.shape_gradient(e, local)));
        }
        *grad = g;
    }
}

fn projected_residual_sup_of(
    kernel: &Kernel,
    interior: &[u32],
    u: &[f64],
    psi: &[f64],
    grads: &[Vec2],
) -> f64 {
    let mut sup: f64 = 0.0;
    for &i in interior {
        let i = i as usize;
        let (r, _) = kernel.residual(i, u[i], u[i], grads, false);
        let viol = if u[i] > psi[i] { r.abs() } else { (-r).max(0.0) };
        sup = sup.max(viol);
    }
    sup
}

/// Projected SOR sweeps until the projected residual drops below `tol_abs`.
/// Returns (sweeps used, converged).
#[allow(clippy::too_many_arguments)]
fn inner_solve(
    kernel: &Kernel,
    interior: &[u32],
    psi: &[f64],
    u: &mut [f64],
    grads: &mut [Vec2],
    tol_abs: f64,
    max_sweeps: usize,
    omega: f64,
    newton: bool,
) -> (usize, bool) {
    recompute_gradients(kernel.mesh, u, grads);
    let node_tol = 0.05 * tol_abs;
    for sweep in 0..max_sweeps {
        let mut max_update: f64 = 0.0;
        for &i in interior {
            let i = i as usize;
            let t0 = u[i];
            // locked contact node: residual pushes up, projection keeps it
            if t0 == psi[i] && kernel.residual(i, t0, t0, grads, false).0 >= 0.0 {
                continue;
            }
            let root = kernel.nodal_root(i, t0, grads, node_tol, newton);
            let mut relaxed = t0 + omega * (root - t0);
            // over-relaxing across the absorption kink at u = 0 (r < 2) makes
            // dead-core nodes oscillate; take the exact root there instead
            if kernel.lower.b > 0.0
                && kernel.lower.r < 2.0
                && (root * relaxed < 0.0 || root.abs() <= 10.0 * kernel.lower.eps_sign)
            {
                relaxed = root;
            }
            let unew = relaxed.max(psi[i]);
            let delta = unew - t0;
            if delta != 0.0 {
                u[i] = unew;
                for &(e, local) in kernel.mesh.node_elements(i) {
                    let e = e as usize;
                    let gphi = kernel.mesh.shape_gradient(e, local as usize);
                    grads[e] = vec2::add(grads[e], vec2::scale(delta, gphi));
                }
                max_update = max_update.max(delta.abs());
            }
        }
        // termination only on the verified projected residual; gradients are
        // refreshed first to drop incremental rounding drift
        if max_update <= 0.05 * tol_abs || sweep % 8 == 7 || sweep + 1 == max_sweeps {
            recompute_gradients(kernel.mesh, u, grads);
            if projected_residual_sup_of(kernel, interior, u, psi, grads) <= tol_abs {
                return (sweep + 1, true);
            }
        }
    }
    (max_sweeps, false)
}

/// Solves the discrete variational inequality. Budget exhaustion is a flag
/// on the returned solution, not an error.
pub fn solve_vi(problem: &ProblemSpec, config: &SolverConfig) -> Result<Solution> {
    problem.validate()?;
    config.validate()?;
    if problem.field.kind == FieldKind::WeightedPLaplacian && problem.field.weight.is_some() {
        return Err(Error::InvalidParams(
            "solve_vi drives the built-in p-Laplacian potential; the weighted field is a verification plug-in".into(),
        ));
    }

    let mesh = problem.mesh.clone();
    let scale = problem.scale();
    let inner_tol_abs = config.inner_tol * scale;
    let omega = config.omega_for(&mesh);
    let interior: Vec<u32> = mesh.interior_nodes().map(|i| i as u32).collect();
    let psi = problem.psi.values();
    let f = problem.f.values();
    let inv_vol: Vec<f64> = (0..mesh.num_nodes()).map(|i| 1.0 / mesh.lumped_volume(i)).collect();

    // feasible start: boundary datum where it dominates, obstacle elsewhere
    let mut u: Vec<f64> =
        problem.g.values().iter().zip(psi).map(|(g, p)| g.max(*p)).collect();
    for i in mesh.boundary_nodes() {
        u[i] = problem.g.values()[i];
    }
    let w_init = u.clone();

    fn make_kernel<'a>(
        problem: &ProblemSpec,
        mesh: &'a Mesh,
        f: &'a [f64],
        inv_vol: &'a [f64],
        dbar: Option<&'a [f64]>,
    ) -> Kernel<'a> {
        Kernel {
            mesh,
            p: problem.field.p,
            eps2: problem.field.eps_reg * problem.field.eps_reg,
            p_is_two: problem.field.p == 2.0,
            lower: problem.lower_order,
            f,
            inv_vol,
            dbar,
        }
    }

    let mut grads = vec![[0.0, 0.0]; mesh.num_elements()];
    let mut outer_updates = Vec::new();
    let mut inner_total = 0;

    // with θ = 0 (or the bypass) the operator does not depend on the iterate:
    // one full-accuracy monotone solve is the whole fixed point, and the next
    // outer update would be zero by construction
    let static_operator = config.degeneracy_bypass || problem.degeneracy.theta == 0.0;
    if static_operator {
        let dbar_store;
        let dbar = if config.degeneracy_bypass {
            None
        } else {
            dbar_store = problem.element_factors(&u);
            Some(dbar_store.as_slice())
        };
        let kernel = make_kernel(problem, &mesh, f, &inv_vol, dbar);
        let (sweeps, ok) = inner_solve(
            &kernel,
            &interior,
            psi,
            &mut u,
            &mut grads,
            inner_tol_abs,
            config.inner_max,
            omega,
            config.newton_local,
        );
        inner_total += sweeps;
        let delta =
            u.iter().zip(&w_init).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        outer_updates.push(delta);
        outer_updates.push(0.0);
        recompute_gradients(&mesh, &u, &mut grads);
        return finish(problem, config, &kernel, u, &grads, 1, inner_total, ok, outer_updates, scale);
    }

    let mut w = w_init;
    let mut delta_prev = f64::INFINITY;
    let mut outer_iters = 0;
    loop {
        outer_iters += 1;
        let dbar = problem.element_factors(&w);
        let kernel = make_kernel(problem, &mesh, f, &inv_vol, Some(&dbar));
        // inexact inner solves far from the fixed point, full accuracy near it
        let tol_k = inner_tol_abs.max((1e-5 * scale).min(0.02 * delta_prev));
        let (sweeps, inner_ok) = inner_solve(
            &kernel,
            &interior,
            psi,
            &mut u,
            &mut grads,
            tol_k,
            config.inner_max,
            omega,
            config.newton_local,
        );
        inner_total += sweeps;
        let delta = u.iter().zip(&w).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
        outer_updates.push(delta);

        if !inner_ok {
            // the frozen problem itself is out of budget; iterating the outer
            // loop on top of it cannot help
            recompute_gradients(&mesh, &u, &mut grads);
            return finish(
                problem, config, &kernel, u, &grads, outer_iters, inner_total, false,
                outer_updates, scale,
            );
        }
        if delta <= config.outer_tol {
            // polish at full accuracy against the converged frozen factor
            let (sweeps2, ok2) = inner_solve(
                &kernel,
                &interior,
                psi,
                &mut u,
                &mut grads,
                inner_tol_abs,
                config.inner_max,
                omega,
                config.newton_local,
            );
            inner_total += sweeps2;
            recompute_gradients(&mesh, &u, &mut grads);
            let converged = inner_ok && ok2;
            return finish(
                problem, config, &kernel, u, &grads, outer_iters, inner_total, converged,
                outer_updates, scale,
            );
        }
        if outer_iters >= config.outer_max {
            recompute_gradients(&mesh, &u, &mut grads);
            return finish(
                problem, config, &kernel, u, &grads, outer_iters, inner_total, false,
                outer_updates, scale,
            );
        }
        for (wi, ui) in w.iter_mut().zip(&u) {
            *wi += config.damping * (*ui - *wi);
        }
        delta_prev = delta;
    }
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &ProblemSpec,
    config: &SolverConfig,
    kernel: &Kernel,
    u: Vec<f64>,
    grads: &[Vec2],
    outer_iters: usize,
    inner_iters_total: usize,
    converged: bool,
    outer_updates: Vec<f64>,
    scale: f64,
) -> Result<Solution> {
    let mesh = &problem.mesh;
    let psi = problem.psi.values();
    let mut stationarity = vec![0.0; mesh.num_nodes()];
    let mut complementarity = vec![0.0; mesh.num_nodes()];
    for i in mesh.interior_nodes() {
        let (r, _) = kernel.residual(i, u[i], u[i], grads, false);
        stationarity[i] = r;
        complementarity[i] = (u[i] - psi[i]).min(r);
    }
    let active_tol = config.scaled_tol(scale);
    let active_set: Vec<usize> =
        (0..mesh.num_nodes()).filter(|&i| u[i] - psi[i] <= active_tol).collect();
    Ok(Solution {
        u: GridFunction::new(mesh.clone(), u)?,
        active_set,
        outer_iters,
        inner_iters_total,
        converged,
        residual_report: ResidualReport { stationarity, complementarity },
        outer_updates,
        scale,
    })
}

/// LHS − RHS of the discrete variational inequality for candidate `u` and
/// feasible test function `v`; nonpositive (up to tolerance) at a solution,
/// exactly zero for v = u.
pub fn vi_gap(problem: &ProblemSpec, u: &GridFunction, v: &GridFunction) -> Result<f64> {
    problem.check_feasible(v)?;
    if !u.mesh().compatible(&problem.mesh) {
        return Err(Error::Mesh("candidate on a different mesh".into()));
    }
    let mesh = &problem.mesh;
    let dbar = problem.element_factors(u.values());
    let mut gap = 0.0;
    for (e, d) in dbar.iter().enumerate() {
        let gu = u.element_gradient(e);
        let gv = v.element_gradient(e);
        let flux = problem.field.flux(mesh.element_centroid(e), gu);
        gap += mesh.element_volume(e) * d * vec2::dot(flux, vec2::sub(gu, gv));
    }
    for i in 0..mesh.num_nodes() {
        let du = u.values()[i] - v.values()[i];
        gap += mesh.lumped_volume(i)
            * (problem.lower_order.term(u.values()[i]) - problem.f.values()[i])
            * du;
    }
    Ok(gap)
}
