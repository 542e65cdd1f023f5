//! Discrete geometry and calculus: interval and rectangle meshes with
//! piecewise-linear grid functions, element gradients, vertex-rule
//! quadrature, truncation, norms, and level-set measures.
//!
//! Rectangles are split into right triangles along the bottom-left to
//! top-right diagonal of every cell. Level-set measures use lumped nodal
//! volumes (row-sum mass lumping), which is O(h) accurate; every diagnostic
//! built on them states that accuracy.

use std::io::{BufRead, Write};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vec2::{self, Vec2};

/// Conforming simplicial mesh of an interval or an axis-aligned rectangle.
#[derive(Debug)]
pub struct Mesh {
    dim: usize,
    extent: [[f64; 2]; 2],
    resolution: usize,
    nodes: Vec<Vec2>,
    /// Element connectivity, `verts_per_elem` node ids per element.
    elem_nodes: Vec<u32>,
    elem_volume: Vec<f64>,
    /// Shape-function gradients, `verts_per_elem` per element.
    shape_grads: Vec<Vec2>,
    verts_per_elem: usize,
    boundary: Vec<bool>,
    lumped: Vec<f64>,
    /// Flattened node-to-element adjacency: (element id, local vertex id).
    adjacency: Vec<(u32, u8)>,
    adj_offsets: Vec<u32>,
    measure: f64,
}

impl Mesh {
    /// Uniform mesh of the interval [x0, x1] with `cells` segments.
    pub fn interval(x0: f64, x1: f64, cells: usize) -> Result<Arc<Mesh>> {
        if !(x0.is_finite() && x1.is_finite()) || x1 <= x0 {
            return Err(Error::Mesh(format!("bad interval [{x0}, {x1}]")));
        }
        if cells < 2 {
            return Err(Error::Mesh(format!("need at least 2 cells, got {cells}")));
        }
        let n = cells;
        let len = x1 - x0;
        let h = len / n as f64;
        let nodes: Vec<Vec2> = (0..=n)
            .map(|i| [x0 + len * (i as f64 / n as f64), 0.0])
            .collect();
        let mut elem_nodes = Vec::with_capacity(2 * n);
        let mut shape_grads = Vec::with_capacity(2 * n);
        for i in 0..n {
            elem_nodes.push(i as u32);
            elem_nodes.push((i + 1) as u32);
            shape_grads.push([-1.0 / h, 0.0]);
            shape_grads.push([1.0 / h, 0.0]);
        }
        let elem_volume = vec![h; n];
        let mut boundary = vec![false; n + 1];
        boundary[0] = true;
        boundary[n] = true;
        let mesh = Mesh::assemble(
            1,
            [[x0, x1], [0.0, 0.0]],
            n,
            nodes,
            elem_nodes,
            elem_volume,
            shape_grads,
            2,
            boundary,
            len,
        )?;
        Ok(Arc::new(mesh))
    }

    /// Uniform triangulation of [x0, x1] × [y0, y1] with `cells` cells per
    /// axis, each cell split along its bottom-left/top-right diagonal.
    pub fn rectangle(x0: f64, x1: f64, y0: f64, y1: f64, cells: usize) -> Result<Arc<Mesh>> {
        if x1 <= x0 || y1 <= y0 || ![x0, x1, y0, y1].iter().all(|v| v.is_finite()) {
            return Err(Error::Mesh(format!(
                "bad rectangle [{x0}, {x1}] x [{y0}, {y1}]"
            )));
        }
        if cells < 2 {
            return Err(Error::Mesh(format!("need at least 2 cells per axis, got {cells}")));
        }
        let n = cells;
        let (lx, ly) = (x1 - x0, y1 - y0);
        let nn = n + 1;
        let mut nodes = Vec::with_capacity(nn * nn);
        for iy in 0..=n {
            for ix in 0..=n {
                nodes.push([
                    x0 + lx * (ix as f64 / n as f64),
                    y0 + ly * (iy as f64 / n as f64),
                ]);
            }
        }
        let node_id = |ix: usize, iy: usize| (iy * nn + ix) as u32;
        let mut elem_nodes = Vec::with_capacity(6 * n * n);
        let mut shape_grads = Vec::with_capacity(6 * n * n);
        let mut elem_volume = Vec::with_capacity(2 * n * n);
        for iy in 0..n {
            for ix in 0..n {
                let a = node_id(ix, iy);
                let b = node_id(ix + 1, iy);
                let c = node_id(ix + 1, iy + 1);
                let d = node_id(ix, iy + 1);
                for tri in [[a, b, c], [a, c, d]] {
                    let p: Vec<Vec2> = tri.iter().map(|&i| nodes[i as usize]).collect();
                    let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                        - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
                    elem_volume.push(0.5 * two_a);
                    elem_nodes.extend_from_slice(&tri);
                    shape_grads.push([(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a]);
                    shape_grads.push([(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a]);
                    shape_grads.push([(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a]);
                }
            }
        }
        let mut boundary = vec![false; nn * nn];
        for iy in 0..=n {
            for ix in 0..=n {
                if ix == 0 || iy == 0 || ix == n || iy == n {
                    boundary[iy * nn + ix] = true;
                }
            }
        }
        let mesh = Mesh::assemble(
            2,
            [[x0, x1], [y0, y1]],
            n,
            nodes,
            elem_nodes,
            elem_volume,
            shape_grads,
            3,
            boundary,
            lx * ly,
        )?;
        Ok(Arc::new(mesh))
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        dim: usize,
        extent: [[f64; 2]; 2],
        resolution: usize,
        nodes: Vec<Vec2>,
        elem_nodes: Vec<u32>,
        elem_volume: Vec<f64>,
        shape_grads: Vec<Vec2>,
        verts_per_elem: usize,
        boundary: Vec<bool>,
        measure: f64,
    ) -> Result<Mesh> {
        let num_nodes = nodes.len();
        let num_elems = elem_volume.len();
        let mut counts = vec![0u32; num_nodes];
        for &i in &elem_nodes {
            counts[i as usize] += 1;
        }
        let mut adj_offsets = Vec::with_capacity(num_nodes + 1);
        adj_offsets.push(0u32);
        for i in 0..num_nodes {
            adj_offsets.push(adj_offsets[i] + counts[i]);
        }
        let mut adjacency = vec![(0u32, 0u8); elem_nodes.len()];
        let mut cursor: Vec<u32> = adj_offsets[..num_nodes].to_vec();
        for e in 0..num_elems {
            for local in 0..verts_per_elem {
                let nid = elem_nodes[e * verts_per_elem + local] as usize;
                adjacency[cursor[nid] as usize] = (e as u32, local as u8);
                cursor[nid] += 1;
            }
        }
        let mut lumped = vec![0.0; num_nodes];
        let mut vol_sum = 0.0;
        for e in 0..num_elems {
            let vol = elem_volume[e];
            if !(vol > 0.0) {
                return Err(Error::Mesh(format!("element {e} has non-positive volume {vol}")));
            }
            vol_sum += vol;
            let share = vol / verts_per_elem as f64;
            for local in 0..verts_per_elem {
                lumped[elem_nodes[e * verts_per_elem + local] as usize] += share;
            }
        }
        if (vol_sum - measure).abs() > 1e-12 * measure.abs().max(1.0) {
            return Err(Error::Mesh(format!(
                "element volumes sum to {vol_sum}, domain measure is {measure}"
            )));
        }
        let min_interior = if dim == 1 { 2 } else { 3 };
        for i in 0..num_nodes {
            if !boundary[i] && counts[i] < min_interior {
                return Err(Error::Mesh(format!(
                    "interior node {i} belongs to only {} elements",
                    counts[i]
                )));
            }
        }
        Ok(Mesh {
            dim,
            extent,
            resolution,
            nodes,
            elem_nodes,
            elem_volume,
            shape_grads,
            verts_per_elem,
            boundary,
            lumped,
            adjacency,
            adj_offsets,
            measure,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn extent(&self) -> [[f64; 2]; 2] {
        self.extent
    }

    /// Cells per axis.
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn num_elements(&self) -> usize {
        self.elem_volume.len()
    }

    pub fn verts_per_elem(&self) -> usize {
        self.verts_per_elem
    }

    pub fn node(&self, i: usize) -> Vec2 {
        self.nodes[i]
    }

    pub fn is_boundary(&self, i: usize) -> bool {
        self.boundary[i]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| self.boundary[i])
    }

    pub fn interior_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_nodes()).filter(|&i| !self.boundary[i])
    }

    #[inline]
    pub fn element_nodes(&self, e: usize) -> &[u32] {
        &self.elem_nodes[e * self.verts_per_elem..(e + 1) * self.verts_per_elem]
    }

    #[inline]
    pub fn element_volume(&self, e: usize) -> f64 {
        self.elem_volume[e]
    }

    #[inline]
    pub fn shape_gradient(&self, e: usize, local: usize) -> Vec2 {
        self.shape_grads[e * self.verts_per_elem + local]
    }

    pub fn element_centroid(&self, e: usize) -> Vec2 {
        let mut c = [0.0, 0.0];
        for &i in self.element_nodes(e) {
            c = vec2::add(c, self.nodes[i as usize]);
        }
        vec2::scale(1.0 / self.verts_per_elem as f64, c)
    }

    /// Row-sum lumped volume of node `i`.
    #[inline]
    pub fn lumped_volume(&self, i: usize) -> f64 {
        self.lumped[i]
    }

    pub fn domain_measure(&self) -> f64 {
        self.measure
    }

    /// Elements adjacent to node `i` as (element id, local vertex id).
    #[inline]
    pub fn node_elements(&self, i: usize) -> &[(u32, u8)] {
        &self.adjacency[self.adj_offsets[i] as usize..self.adj_offsets[i + 1] as usize]
    }

    /// Vertex-rule quadrature of a nodal quantity; exact for piecewise-linear
    /// integrands.
    pub fn integrate_nodal(&self, nodal: &[f64]) -> f64 {
        nodal.iter().zip(&self.lumped).map(|(v, w)| v * w).sum()
    }

    /// Quadrature of an element-wise constant quantity; exact.
    pub fn integrate_elemental(&self, per_elem: &[f64]) -> f64 {
        per_elem.iter().zip(&self.elem_volume).map(|(v, w)| v * w).sum()
    }

    /// Structural compatibility (same discretization, not necessarily the
    /// same allocation).
    pub fn compatible(&self, other: &Mesh) -> bool {
        self.dim == other.dim && self.resolution == other.resolution && self.extent == other.extent
    }
}

/// Nodal values of a piecewise-linear function on a fixed mesh.
#[derive(Debug, Clone)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

/// Norm selector for [`GridFunction::norm`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NormKind {
    /// Lebesgue norm with exponent p ≥ 1 (vertex-rule quadrature).
    Lp(f64),
    /// Sobolev norm (∫|u|^q + ∫|∇u|^q)^{1/q}, q ≥ 1.
    W1q(f64),
    /// Max nodal absolute value.
    Linf,
}

/// Level-set predicate over nodal values; `t ≤ s` always.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LevelSetQuery {
    pub t: f64,
    pub s: f64,
    pub kind: LevelSetKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LevelSetKind {
    /// {u < t}
    Below,
    /// {u > s}
    Above,
    /// {t ≤ u < s}
    Band,
}

impl LevelSetQuery {
    pub fn below(t: f64) -> Self {
        Self { t, s: t, kind: LevelSetKind::Below }
    }

    pub fn above(s: f64) -> Self {
        Self { t: s, s, kind: LevelSetKind::Above }
    }

    pub fn band(t: f64, s: f64) -> Result<Self> {
        if !(t <= s) {
            return Err(Error::InvalidParams(format!("band requires t <= s, got {t} > {s}")));
        }
        Ok(Self { t, s, kind: LevelSetKind::Band })
    }

    #[inline]
    fn matches(&self, u: f64) -> bool {
        match self.kind {
            LevelSetKind::Below => u < self.t,
            LevelSetKind::Above => u > self.s,
            LevelSetKind::Band => self.t <= u && u < self.s,
        }
    }
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.num_nodes() {
            return Err(Error::Mesh(format!(
                "value count {} does not match node count {}",
                values.len(),
                mesh.num_nodes()
            )));
        }
        Ok(Self { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.num_nodes();
        Self { mesh, values: vec![0.0; n] }
    }

    pub fn constant(mesh: Arc<Mesh>, c: f64) -> Self {
        let n = mesh.num_nodes();
        Self { mesh, values: vec![c; n] }
    }

    pub fn from_fn(mesh: Arc<Mesh>, f: impl Fn(Vec2) -> f64) -> Self {
        let values = (0..mesh.num_nodes()).map(|i| f(mesh.node(i))).collect();
        Self { mesh, values }
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Nodewise truncation T_s(u) = max{−s, min{s, u}}.
    pub fn truncate(&self, s: f64) -> Result<GridFunction> {
        if !(s >= 0.0) {
            return Err(Error::InvalidParams(format!("truncation level s = {s} < 0")));
        }
        let values = self.values.iter().map(|&v| v.clamp(-s, s)).collect();
        Ok(GridFunction { mesh: self.mesh.clone(), values })
    }

    /// Gradient of one element of the piecewise-linear interpolant.
    #[inline]
    pub fn element_gradient(&self, e: usize) -> Vec2 {
        let mut grad = [0.0, 0.0];
        for (local, &i) in self.mesh.element_nodes(e).iter().enumerate() {
            let gphi = self.mesh.shape_gradient(e, local);
            grad = vec2::add(grad, vec2::scale(self.values[i as usize], gphi));
        }
        grad
    }

    /// Exact per-element gradient field; linear in the nodal values.
    pub fn gradient(&self) -> Vec<Vec2> {
        (0..self.mesh.num_elements()).map(|e| self.element_gradient(e)).collect()
    }

    pub fn norm(&self, kind: NormKind) -> Result<f64> {
        match kind {
            NormKind::Linf => Ok(self.values.iter().fold(0.0, |m: f64, &v| m.max(v.abs()))),
            NormKind::Lp(p) => {
                if p < 1.0 {
                    return Err(Error::InvalidExponent(format!("Lp norm needs p >= 1, got {p}")));
                }
                let sum: f64 = (0..self.values.len())
                    .map(|i| self.mesh.lumped_volume(i) * self.values[i].abs().powf(p))
                    .sum();
                Ok(sum.powf(1.0 / p))
            }
            NormKind::W1q(q) => {
                if q < 1.0 {
                    return Err(Error::InvalidExponent(format!("W1q norm needs q >= 1, got {q}")));
                }
                let mut sum: f64 = (0..self.values.len())
                    .map(|i| self.mesh.lumped_volume(i) * self.values[i].abs().powf(q))
                    .sum();
                for e in 0..self.mesh.num_elements() {
                    let g = vec2::norm(self.element_gradient(e));
                    sum += self.mesh.element_volume(e) * g.powf(q);
                }
                Ok(sum.powf(1.0 / q))
            }
        }
    }

    /// Lumped measure of the nodes whose value satisfies the query; O(h).
    pub fn level_set_measure(&self, query: LevelSetQuery) -> f64 {
        (0..self.values.len())
            .filter(|&i| query.matches(self.values[i]))
            .map(|i| self.mesh.lumped_volume(i))
            .sum()
    }

    pub fn linf_diff(&self, other: &GridFunction) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()))
    }

    pub fn difference(&self, other: &GridFunction) -> Result<GridFunction> {
        if !self.mesh.compatible(&other.mesh) {
            return Err(Error::Mesh("difference of functions on different meshes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(GridFunction { mesh: self.mesh.clone(), values })
    }

    /// Nodewise maximum.
    pub fn max_with(&self, other: &GridFunction) -> Result<GridFunction> {
        if !self.mesh.compatible(&other.mesh) {
            return Err(Error::Mesh("max of functions on different meshes".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a.max(*b)).collect();
        Ok(GridFunction { mesh: self.mesh.clone(), values })
    }

    /// CSV serialization: header `x[,y],value`, one node per line in node
    /// order.
    pub fn write_csv(&self, mut w: impl Write) -> Result<()> {
        if self.mesh.dim() == 1 {
            writeln!(w, "x,value")?;
            for i in 0..self.values.len() {
                writeln!(w, "{},{}", self.mesh.node(i)[0], self.values[i])?;
            }
        } else {
            writeln!(w, "x,y,value")?;
            for i in 0..self.values.len() {
                let p = self.mesh.node(i);
                writeln!(w, "{},{},{}", p[0], p[1], self.values[i])?;
            }
        }
        Ok(())
    }

    pub fn read_csv(mesh: Arc<Mesh>, r: impl BufRead) -> Result<GridFunction> {
        let mut values = Vec::with_capacity(mesh.num_nodes());
        for (lineno, line) in r.lines().enumerate() {
            let line = line?;
            if lineno == 0 {
                let expect = if mesh.dim() == 1 { "x,value" } else { "x,y,value" };
                if line.trim() != expect {
                    return Err(Error::Config(format!(
                        "line 1: expected CSV header `{expect}`, got `{line}`"
                    )));
                }
                continue;
            }
            if line.trim().is_empty() {
                continue;
            }
            let field = line.rsplit(',').next().ok_or_else(|| {
                Error::Config(format!("line {}: malformed CSV row", lineno + 1))
            })?;
            let v: f64 = field.trim().parse().map_err(|_| {
                Error::Config(format!("line {}: bad value `{field}`", lineno + 1))
            })?;
            values.push(v);
        }
        GridFunction::new(mesh, values)
    }
}

/// Linear interpolation of a coarse grid function onto the next nested
/// refinement (resolution doubled, same extent). Exact for the
/// piecewise-linear interpolant because fine nodes sit on coarse edges or on
/// the coarse cell diagonal.
pub fn prolongate(coarse: &GridFunction, fine_mesh: &Arc<Mesh>) -> Result<GridFunction> {
    let cm = coarse.mesh();
    if fine_mesh.dim() != cm.dim()
        || fine_mesh.extent() != cm.extent()
        || fine_mesh.resolution() != 2 * cm.resolution()
    {
        return Err(Error::Mesh(
            "prolongation requires the doubled-resolution mesh on the same extent".into(),
        ));
    }
    let cv = coarse.values();
    if fine_mesh.dim() == 1 {
        let nf = fine_mesh.resolution();
        let mut values = Vec::with_capacity(nf + 1);
        for j in 0..=nf {
            let k = j / 2;
            values.push(if j % 2 == 0 { cv[k] } else { 0.5 * (cv[k] + cv[k + 1]) });
        }
        return GridFunction::new(fine_mesh.clone(), values);
    }
    let nf = fine_mesh.resolution();
    let nc = cm.resolution();
    let cid = |ix: usize, iy: usize| iy * (nc + 1) + ix;
    let mut values = Vec::with_capacity((nf + 1) * (nf + 1));
    for iy in 0..=nf {
        for ix in 0..=nf {
            let v = match (ix % 2, iy % 2) {
                (0, 0) => cv[cid(ix / 2, iy / 2)],
                (1, 0) => 0.5 * (cv[cid(ix / 2, iy / 2)] + cv[cid(ix / 2 + 1, iy / 2)]),
                (0, 1) => 0.5 * (cv[cid(ix / 2, iy / 2)] + cv[cid(ix / 2, iy / 2 + 1)]),
                // cell center: midpoint of the coarse diagonal
                _ => 0.5 * (cv[cid(ix / 2, iy / 2)] + cv[cid(ix / 2 + 1, iy / 2 + 1)]),
            };
            values.push(v);
        }
    }
    GridFunction::new(fine_mesh.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn interval_mesh_invariants() {
        let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
        assert_eq!(mesh.num_nodes(), 9);
        assert_eq!(mesh.num_elements(), 8);
        assert!((mesh.domain_measure() - 1.0).abs() < 1e-15);
        let vol_sum: f64 = (0..mesh.num_elements()).map(|e| mesh.element_volume(e)).sum();
        assert!((vol_sum - 1.0).abs() < 1e-14);
        let lump_sum: f64 = (0..mesh.num_nodes()).map(|i| mesh.lumped_volume(i)).sum();
        assert!((lump_sum - 1.0).abs() < 1e-14);
        assert!(mesh.is_boundary(0) && mesh.is_boundary(8) && !mesh.is_boundary(4));
    }

    #[test]
    fn rectangle_mesh_invariants() {
        let mesh = Mesh::rectangle(0.0, 2.0, 0.0, 1.0, 4).unwrap();
        assert_eq!(mesh.num_nodes(), 25);
        assert_eq!(mesh.num_elements(), 32);
        assert!((mesh.domain_measure() - 2.0).abs() < 1e-15);
        let lump_sum: f64 = (0..mesh.num_nodes()).map(|i| mesh.lumped_volume(i)).sum();
        assert!((lump_sum - 2.0).abs() < 1e-13);
        // interior node valence is 6 under the diagonal split
        let center = 2 * 5 + 2;
        assert!(!mesh.is_boundary(center));
        assert_eq!(mesh.node_elements(center).len(), 6);
    }

    #[test]
    fn gradient_of_linear_functions() {
        let mesh = Mesh::interval(0.0, 1.0, 7).unwrap();
        let u = GridFunction::from_fn(mesh.clone(), |x| x[0]);
        for g in u.gradient() {
            assert!((g[0] - 1.0).abs() < 1e-12 && g[1] == 0.0);
        }
        let c = GridFunction::constant(mesh, 3.5);
        for g in c.gradient() {
            assert!(g[0].abs() < 1e-12);
        }
        let mesh2 = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 5).unwrap();
        let v = GridFunction::from_fn(mesh2, |x| 2.0 * x[0] + 3.0 * x[1]);
        for g in v.gradient() {
            assert!((g[0] - 2.0).abs() < 1e-10 && (g[1] - 3.0).abs() < 1e-10);
        }
    }

    #[test]
    fn integrate_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
        let ones = vec![1.0; mesh.num_nodes()];
        assert!((mesh.integrate_nodal(&ones) - 1.0).abs() < 1e-14);
        // gradient energy of u(x) = x at p = 2
        let u = GridFunction::from_fn(mesh.clone(), |x| x[0]);
        let energy: Vec<f64> = u.gradient().iter().map(|g| vec2::norm_sq(*g)).collect();
        assert!((mesh.integrate_elemental(&energy) - 1.0).abs() < 1e-12);
        let mesh2 = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 8).unwrap();
        let ones2 = vec![1.0; mesh2.num_nodes()];
        assert!((mesh2.integrate_nodal(&ones2) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn truncate_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 2).unwrap();
        let u = GridFunction::new(mesh, vec![3.0, 7.0, -7.0]).unwrap();
        let t = u.truncate(5.0).unwrap();
        assert_eq!(t.values(), &[3.0, 5.0, -5.0]);
        let z = u.truncate(0.0).unwrap();
        assert!(z.values().iter().all(|&v| v == 0.0));
        assert!(u.truncate(-1.0).is_err());
    }

    #[test]
    fn norm_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 128).unwrap();
        let c = GridFunction::constant(mesh.clone(), -2.0);
        assert!((c.norm(NormKind::Lp(3.0)).unwrap() - 2.0).abs() < 1e-12);
        let u = GridFunction::from_fn(mesh.clone(), |x| x[0]);
        let l2 = u.norm(NormKind::Lp(2.0)).unwrap();
        assert!((l2 - 1.0 / 3.0_f64.sqrt()).abs() < 1e-4, "got {l2}");
        let z = GridFunction::zeros(mesh);
        assert_eq!(z.norm(NormKind::W1q(1.5)).unwrap(), 0.0);
        assert!(z.norm(NormKind::Lp(0.5)).is_err());
    }

    #[test]
    fn level_set_examples() {
        let mesh = Mesh::interval(0.0, 1.0, 64).unwrap();
        let zero = GridFunction::zeros(mesh.clone());
        let above = zero.level_set_measure(LevelSetQuery::above(1.0));
        let below = zero.level_set_measure(LevelSetQuery::below(-1.0));
        assert_eq!(above + below, 0.0);
        let u = GridFunction::from_fn(mesh.clone(), |x| x[0]);
        let half = u.level_set_measure(LevelSetQuery::below(0.5));
        assert!((half - 0.5).abs() <= 1.0 / 64.0 + 1e-12);
        let band = u.level_set_measure(LevelSetQuery::band(0.25, 0.75).unwrap());
        assert!((band - 0.5).abs() <= 1.0 / 64.0 + 1e-12);
        assert!(LevelSetQuery::band(1.0, 0.5).is_err());
        // partition: below(t) + above(t) + {u = t} = |Ω|
        let t = u.values()[32];
        let eq: f64 = (0..u.values().len())
            .filter(|&i| u.values()[i] == t)
            .map(|i| mesh.lumped_volume(i))
            .sum();
        let total = u.level_set_measure(LevelSetQuery::below(t))
            + u.level_set_measure(LevelSetQuery::above(t))
            + eq;
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn csv_roundtrip() {
        let mesh = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 3).unwrap();
        let u = GridFunction::from_fn(mesh.clone(), |x| x[0] * x[1] - 0.3);
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let back = GridFunction::read_csv(mesh, buf.as_slice()).unwrap();
        assert_eq!(u.values(), back.values());
    }

    #[test]
    fn prolongation_is_exact_on_linears() {
        let coarse = Mesh::interval(0.0, 1.0, 8).unwrap();
        let fine = Mesh::interval(0.0, 1.0, 16).unwrap();
        let u = GridFunction::from_fn(coarse, |x| 2.0 * x[0] - 0.5);
        let up = prolongate(&u, &fine).unwrap();
        let exact = GridFunction::from_fn(fine, |x| 2.0 * x[0] - 0.5);
        assert!(up.linf_diff(&exact) < 1e-12);

        let coarse2 = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 4).unwrap();
        let fine2 = Mesh::rectangle(0.0, 1.0, 0.0, 1.0, 8).unwrap();
        let v = GridFunction::from_fn(coarse2, |x| 1.0 - x[0] + 2.0 * x[1]);
        let vp = prolongate(&v, &fine2).unwrap();
        let exact2 = GridFunction::from_fn(fine2, |x| 1.0 - x[0] + 2.0 * x[1]);
        assert!(vp.linf_diff(&exact2) < 1e-12);
    }

    #[test]
    fn refinement_quadrature_error_is_second_order() {
        // integrate a smooth integrand on nested meshes; error drops ~4x
        let exact = 1.0 - (1.0_f64).cos();
        let err = |cells: usize| {
            let mesh = Mesh::interval(0.0, 1.0, cells).unwrap();
            let vals: Vec<f64> = (0..mesh.num_nodes()).map(|i| mesh.node(i)[0].sin()).collect();
            (mesh.integrate_nodal(&vals) - exact).abs()
        };
        let (e1, e2) = (err(32), err(64));
        let ratio = e1 / e2;
        assert!((3.5..4.5).contains(&ratio), "ratio {ratio}");
    }

    proptest! {
        #[test]
        fn truncation_composes_to_min(vals in proptest::collection::vec(-20.0..20.0f64, 9),
                                      s1 in 0.0..10.0f64, s2 in 0.0..10.0f64) {
            let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
            let u = GridFunction::new(mesh, vals).unwrap();
            let a = u.truncate(s1).unwrap().truncate(s2).unwrap();
            let b = u.truncate(s1.min(s2)).unwrap();
            prop_assert_eq!(a.values(), b.values());
        }

        #[test]
        fn truncation_is_nonexpansive(u_vals in proptest::collection::vec(-5.0..5.0f64, 9),
                                      v_vals in proptest::collection::vec(-5.0..5.0f64, 9),
                                      s in 0.0..6.0f64) {
            let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
            let u = GridFunction::new(mesh.clone(), u_vals).unwrap();
            let v = GridFunction::new(mesh, v_vals).unwrap();
            let lhs = u.truncate(s).unwrap().linf_diff(&v.truncate(s).unwrap());
            prop_assert!(lhs <= u.linf_diff(&v) + 1e-15);
        }

        #[test]
        fn truncated_gradient_vanishes_on_saturated_elements(
            vals in proptest::collection::vec(-4.0..4.0f64, 17), s in 0.1..2.0f64) {
            let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
            let u = GridFunction::new(mesh.clone(), vals).unwrap();
            let t = u.truncate(s).unwrap();
            for e in 0..mesh.num_elements() {
                let nodes = mesh.element_nodes(e);
                let all_hi = nodes.iter().all(|&i| u.values()[i as usize] >= s);
                let all_lo = nodes.iter().all(|&i| u.values()[i as usize] <= -s);
                if all_hi || all_lo {
                    prop_assert!(vec2::norm(t.element_gradient(e)) < 1e-12);
                }
            }
        }

        #[test]
        fn truncation_norm_bound(vals in proptest::collection::vec(-6.0..6.0f64, 17),
                                 s in 0.0..7.0f64, q in 1.0..3.0f64) {
            let mesh = Mesh::interval(0.0, 1.0, 16).unwrap();
            let u = GridFunction::new(mesh, vals).unwrap();
            let lhs = u.truncate(s).unwrap().norm(NormKind::W1q(q)).unwrap();
            let rhs = u.norm(NormKind::W1q(q)).unwrap() + s * 1.0_f64.powf(1.0 / q);
            prop_assert!(lhs <= rhs + 1e-12);
        }

        #[test]
        fn below_measure_monotone(vals in proptest::collection::vec(-3.0..3.0f64, 9),
                                  t1 in -4.0..4.0f64, dt in 0.0..2.0f64) {
            let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
            let u = GridFunction::new(mesh, vals).unwrap();
            let m1 = u.level_set_measure(LevelSetQuery::below(t1));
            let m2 = u.level_set_measure(LevelSetQuery::below(t1 + dt));
            prop_assert!(m2 >= m1);
        }

        #[test]
        fn integrate_is_linear(a in proptest::collection::vec(-2.0..2.0f64, 9),
                               b in proptest::collection::vec(-2.0..2.0f64, 9),
                               c in -3.0..3.0f64) {
            let mesh = Mesh::interval(0.0, 1.0, 8).unwrap();
            let combo: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x + c * y).collect();
            let lhs = mesh.integrate_nodal(&combo);
            let rhs = mesh.integrate_nodal(&a) + c * mesh.integrate_nodal(&b);
            prop_assert!((lhs - rhs).abs() < 1e-12);
        }
    }
}
