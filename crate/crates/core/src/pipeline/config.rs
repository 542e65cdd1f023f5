//! JSON experiment configuration. Keys mirror the domain-type field names;
//! the schema is versioned through `schema_version`.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{DegeneracySpec, FieldKind, FieldSpec, LowerOrderSpec};
use crate::mesh::{GridFunction, Mesh};
use crate::params::{q_range, ExponentRange, ProblemParams};
use crate::solver::{ProblemSpec, SolverConfig};
use crate::vec2::Vec2;

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}
fn default_entropy_family() -> usize {
    12
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExperimentConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    pub params: ProblemParams,
    pub mesh: MeshConfig,
    #[serde(default)]
    pub field: FieldConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    pub data: DataConfig,
    #[serde(default)]
    pub sequence: Option<SequenceConfig>,
    #[serde(default)]
    pub q_choice: QChoice,
    /// Truncation levels for energy profiles; empty = automatic geometric grid.
    #[serde(default)]
    pub t_grid: Vec<f64>,
    /// Truncation levels for entropy verification; empty = automatic grid.
    #[serde(default)]
    pub s_grid: Vec<f64>,
    /// Test-family size for per-member entropy verification in experiments.
    #[serde(default = "default_entropy_family")]
    pub entropy_family: usize,
    /// Nested resolutions for refinement runs; empty = resolution/4, /2, /1.
    #[serde(default)]
    pub resolutions: Vec<usize>,
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    /// Downgrades the mesh-dim = N requirement of window experiments to a flag.
    #[serde(default)]
    pub allow_dim_mismatch: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MeshConfig {
    pub dim: usize,
    /// One [lo, hi] pair per axis.
    pub extent: Vec<[f64; 2]>,
    /// Cells per axis.
    pub resolution: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct FieldConfig {
    #[serde(default = "FieldConfig::default_kind")]
    pub kind: FieldKind,
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub eps_reg: Option<f64>,
}

impl FieldConfig {
    fn default_kind() -> FieldKind {
        FieldKind::PLaplacian
    }
}

impl Default for FieldConfig {
    fn default() -> Self {
        Self { kind: Self::default_kind(), alpha: None, beta: None, gamma: None, eps_reg: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DataConfig {
    pub f: Profile,
    pub psi: Profile,
    pub g: Profile,
}

/// Closed-form nodal data profiles.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Profile {
    Constant { value: f64 },
    /// offset − curvature·|x − center|²
    Paraboloid { center: Vec<f64>, curvature: f64, offset: f64 },
    /// height·(1 − (|x − center|/width)²)² inside the support, 0 outside
    Bump { center: Vec<f64>, width: f64, height: f64 },
}

impl Profile {
    pub fn eval(&self, x: Vec2) -> f64 {
        match self {
            Profile::Constant { value } => *value,
            Profile::Paraboloid { center, curvature, offset } => {
                offset - curvature * dist_sq(x, center)
            }
            Profile::Bump { center, width, height } => {
                let rho2 = dist_sq(x, center) / (width * width);
                if rho2 < 1.0 {
                    height * (1.0 - rho2) * (1.0 - rho2)
                } else {
                    0.0
                }
            }
        }
    }

    fn center_dim_ok(&self, dim: usize) -> bool {
        match self {
            Profile::Constant { .. } => true,
            Profile::Paraboloid { center, .. } | Profile::Bump { center, .. } => {
                center.len() == dim
            }
        }
    }
}

fn dist_sq(x: Vec2, center: &[f64]) -> f64 {
    let mut d = 0.0;
    for (k, c) in center.iter().enumerate() {
        let dx = x[k] - c;
        d += dx * dx;
    }
    d
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// f_n = T_n(f) nodewise.
    TruncateData,
    /// Normalized bump of width base_width/n and fixed mass at the domain
    /// midpoint.
    MollifySpike,
}

fn default_mass() -> f64 {
    1.0
}
fn default_base_width() -> f64 {
    0.4
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SequenceConfig {
    pub kind: SequenceKind,
    pub n_values: Vec<u32>,
    #[serde(default = "default_mass")]
    pub mass: f64,
    #[serde(default = "default_base_width")]
    pub base_width: f64,
}

#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QChoice {
    #[default]
    Midpoint,
    Explicit { q: f64 },
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Parses and validates; parse failures carry serde's line/column.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: ExperimentConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Config(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.params.validate()?;
        self.solver.validate()?;
        if !(self.mesh.dim == 1 || self.mesh.dim == 2) {
            return Err(Error::Config(format!("mesh.dim = {} (must be 1 or 2)", self.mesh.dim)));
        }
        if self.mesh.extent.len() != self.mesh.dim {
            return Err(Error::Config(format!(
                "mesh.extent has {} axes for dim {}",
                self.mesh.extent.len(),
                self.mesh.dim
            )));
        }
        if self.mesh.resolution < 2 {
            return Err(Error::Config("mesh.resolution must be >= 2".into()));
        }
        for profile in [&self.data.f, &self.data.psi, &self.data.g] {
            if !profile.center_dim_ok(self.mesh.dim) {
                return Err(Error::Config("profile center arity does not match mesh.dim".into()));
            }
        }
        if let Some(seq) = &self.sequence {
            if seq.n_values.is_empty() {
                return Err(Error::Config("sequence.n_values is empty".into()));
            }
            if seq.n_values.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::Config("sequence.n_values must be strictly increasing".into()));
            }
            if seq.n_values[0] < 1 {
                return Err(Error::Config("sequence.n_values must start at n >= 1".into()));
            }
            if !(seq.mass > 0.0) || !(seq.base_width > 0.0) {
                return Err(Error::Config("sequence mass and base_width must be positive".into()));
            }
        }
        if self.t_grid.windows(2).any(|w| w[1] <= w[0]) || self.t_grid.first().is_some_and(|&t| t <= 0.0)
        {
            return Err(Error::Config("t_grid must be positive and strictly increasing".into()));
        }
        if self.s_grid.iter().any(|&s| s <= 0.0) {
            return Err(Error::Config("s_grid entries must be positive".into()));
        }
        if !self.resolutions.is_empty() {
            if self.resolutions.len() < 2 {
                return Err(Error::Config("resolutions needs at least two levels".into()));
            }
            if self.resolutions.windows(2).any(|w| w[1] != 2 * w[0]) {
                return Err(Error::Config("resolutions must be nested by factor 2".into()));
            }
        }
        if self.field.kind == FieldKind::WeightedPLaplacian {
            return Err(Error::Config(
                "the weighted field variant is an API plug-in and cannot be configured from JSON".into(),
            ));
        }
        Ok(())
    }

    pub fn build_mesh(&self) -> Result<Arc<Mesh>> {
        self.build_mesh_with_resolution(self.mesh.resolution)
    }

    pub fn build_mesh_with_resolution(&self, resolution: usize) -> Result<Arc<Mesh>> {
        match self.mesh.dim {
            1 => Mesh::interval(self.mesh.extent[0][0], self.mesh.extent[0][1], resolution),
            2 => Mesh::rectangle(
                self.mesh.extent[0][0],
                self.mesh.extent[0][1],
                self.mesh.extent[1][0],
                self.mesh.extent[1][1],
                resolution,
            ),
            d => Err(Error::Config(format!("mesh.dim = {d}"))),
        }
    }

    pub fn build_field(&self) -> Result<FieldSpec> {
        let mut field = FieldSpec::p_laplacian(self.params.p)?;
        if let Some(a) = self.field.alpha {
            field.alpha = a;
        }
        if let Some(b) = self.field.beta {
            field.beta = b;
        }
        if let Some(g) = self.field.gamma {
            field.gamma = g;
        }
        if let Some(e) = self.field.eps_reg {
            if !(e >= 0.0) {
                return Err(Error::Config(format!("eps_reg = {e} must be >= 0")));
            }
            field.eps_reg = e;
        }
        Ok(field)
    }

    pub fn build_problem(&self, mesh: &Arc<Mesh>) -> Result<ProblemSpec> {
        let problem = ProblemSpec {
            mesh: mesh.clone(),
            field: self.build_field()?,
            degeneracy: DegeneracySpec::new(self.params.theta, self.params.p)?,
            lower_order: LowerOrderSpec::new(self.params.b, self.params.r)?,
            f: GridFunction::from_fn(mesh.clone(), |x| self.data.f.eval(x)),
            psi: GridFunction::from_fn(mesh.clone(), |x| self.data.psi.eval(x)),
            g: GridFunction::from_fn(mesh.clone(), |x| self.data.g.eval(x)),
        };
        problem.validate()?;
        Ok(problem)
    }

    /// The exponent used for Sobolev norms: the window midpoint by default,
    /// or the explicit choice with an in-window flag.
    pub fn choose_q(&self) -> Result<(f64, ExponentRange, bool)> {
        let window = q_range(&self.params)?;
        match self.q_choice {
            QChoice::Midpoint => Ok((window.midpoint(), window, true)),
            QChoice::Explicit { q } => Ok((q, window, window.contains(q))),
        }
    }
}
