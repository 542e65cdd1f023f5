//! Data-approximation sequences: nodewise truncations of a given right-hand
//! side, and mass-normalized shrinking bumps standing in for genuinely
//! integrable-but-unbounded data at desk scale.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::mesh::{GridFunction, Mesh};
use crate::vec2::Vec2;

/// One member of an approximating sequence.
#[derive(Debug, Clone, Serialize)]
pub struct ApproxSequence {
    pub n: u32,
    #[serde(skip)]
    pub f_n: GridFunction,
    pub l1_norm: f64,
}

/// What the sequence approximates.
pub enum SequenceSpec<'a> {
    /// f_n = T_n(f) nodewise.
    TruncateData { f: &'a GridFunction },
    /// Bump of radius base_width/n with fixed mass at the domain midpoint;
    /// the nodal values are rescaled so the lumped integral equals `mass`
    /// exactly.
    MollifySpike { mass: f64, base_width: f64 },
}

pub fn build_sequence(mesh: &Arc<Mesh>, spec: &SequenceSpec, n: u32) -> Result<ApproxSequence> {
    if n < 1 {
        return Err(Error::Sequence(format!("n = {n} must be >= 1")));
    }
    match spec {
        SequenceSpec::TruncateData { f } => {
            if !f.mesh().compatible(mesh) {
                return Err(Error::Sequence("base data on a different mesh".into()));
            }
            let f_n = f.truncate(n as f64)?;
            let l1_norm = l1(mesh, &f_n);
            let base_l1 = l1(mesh, f);
            if l1_norm > base_l1 + 1.0 {
                return Err(Error::Sequence(format!(
                    "truncated member has mass {l1_norm} > {base_l1} + 1"
                )));
            }
            Ok(ApproxSequence { n, f_n, l1_norm })
        }
        SequenceSpec::MollifySpike { mass, base_width } => {
            let width = base_width / n as f64;
            let extent = mesh.extent();
            let center: Vec2 = [
                0.5 * (extent[0][0] + extent[0][1]),
                if mesh.dim() == 2 { 0.5 * (extent[1][0] + extent[1][1]) } else { 0.0 },
            ];
            for d in 0..mesh.dim() {
                if center[d] - width <= extent[d][0] || center[d] + width >= extent[d][1] {
                    return Err(Error::Sequence(format!(
                        "bump of radius {width} does not fit inside the domain"
                    )));
                }
            }
            let profile = GridFunction::from_fn(mesh.clone(), |x| {
                let mut d2 = 0.0;
                for k in 0..mesh.dim() {
                    let dx = x[k] - center[k];
                    d2 += dx * dx;
                }
                let rho2 = d2 / (width * width);
                if rho2 < 1.0 {
                    (1.0 - rho2) * (1.0 - rho2)
                } else {
                    0.0
                }
            });
            let raw_mass = l1(mesh, &profile);
            if !(raw_mass > 0.0) {
                return Err(Error::Sequence(format!(
                    "bump of radius {width} is unresolved on a {}-cell mesh",
                    mesh.resolution()
                )));
            }
            let amp = mass / raw_mass;
            let values = profile.values().iter().map(|v| amp * v).collect();
            let f_n = GridFunction::new(mesh.clone(), values)?;
            let l1_norm = l1(mesh, &f_n);
            Ok(ApproxSequence { n, f_n, l1_norm })
        }
    }
}

fn l1(mesh: &Mesh, f: &GridFunction) -> f64 {
    let abs: Vec<f64> = f.values().iter().map(|v| v.abs()).collect();
    mesh.integrate_nodal(&abs)
}
