//! Upper-level distributed guidance: desired velocities and the virtual
//! coordinate rate for each vehicle.

use nalgebra::{DVector, Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::network::{consensus_term, CoordinateView, Topology};
use crate::paths::{FieldSign, PathError};

/// Field gains `k` (one per axis) and consensus gain `c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuidanceGains {
    pub k: Vec<f64>,
    pub c: f64,
}

impl GuidanceGains {
    pub fn uniform(dim: usize, k: f64, c: f64) -> Self {
        GuidanceGains { k: vec![k; dim], c }
    }

    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.k.len() != dim {
            return Err(invalid(format!("expected {dim} field gains, got {}", self.k.len())));
        }
        if self.k.iter().chain(std::iter::once(&self.c)).any(|g| !(*g > 0.0) || !g.is_finite()) {
            return Err(invalid("guidance gains must be strictly positive"));
        }
        Ok(())
    }
}

/// Guidance output for one vehicle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuidanceCommand {
    /// Body-frame surge/sway references and coordinate rate.
    Usv { u_r: f64, v_r: f64, u_omega: f64 },
    /// Inertial velocity reference and coordinate rate.
    Uav { p_r: Vector3<f64>, u_omega: f64 },
}

impl GuidanceCommand {
    pub fn u_omega(&self) -> f64 {
        match *self {
            GuidanceCommand::Usv { u_omega, .. } | GuidanceCommand::Uav { u_omega, .. } => u_omega,
        }
    }
}

/// Constant coordinate rate shared by both domains once on-path.
pub fn desired_coordinate_rate() -> f64 {
    FieldSign::Negative.value()
}

fn check_shapes(phi: &PathError, tangent: &DVector<f64>, gains: &GuidanceGains, dim: usize) -> Result<()> {
    if phi.phi.len() != dim || tangent.len() != dim {
        return Err(invalid(format!("guidance expects {dim}-dimensional error and tangent")));
    }
    gains.validate(dim)
}

/// Spatial part of the field, `s·∂f − k∘φ`, in the inertial frame, plus
/// the coordinate rate `s + Σ k_j φ_j ∂f_j + consensus`.
fn field(phi: &PathError, tangent: &DVector<f64>, gains: &GuidanceGains, consensus: f64) -> (DVector<f64>, f64) {
    let s = desired_coordinate_rate();
    let dim = tangent.len();
    let mut vel = DVector::zeros(dim);
    let mut rate = s;
    for j in 0..dim {
        vel[j] = s * tangent[j] - gains.k[j] * phi.phi[j];
        rate += gains.k[j] * phi.phi[j] * tangent[j];
    }
    (vel, rate + consensus)
}

/// Own-path part of the coordinate rate, `s + Σ k_j φ_j ∂f_j`, without the
/// consensus term.
pub fn path_coordinate_rate(phi: &PathError, tangent: &DVector<f64>, gains: &GuidanceGains) -> Result<f64> {
    check_shapes(phi, tangent, gains, tangent.len())?;
    Ok(field(phi, tangent, gains, 0.0).1)
}

/// Inertial-frame velocity the vessel guidance asks for (before rotation).
pub fn usv_inertial_reference(phi: &PathError, tangent: &DVector<f64>, gains: &GuidanceGains) -> Result<Vector2<f64>> {
    check_shapes(phi, tangent, gains, 2)?;
    let (vel, _) = field(phi, tangent, gains, 0.0);
    Ok(Vector2::new(vel[0], vel[1]))
}

/// Rotates an inertial velocity into the body frame of heading `ψ`.
pub fn to_body_frame(psi: f64, world: &Vector2<f64>) -> (f64, f64) {
    let (s, c) = psi.sin_cos();
    (world[0] * c + world[1] * s, -world[0] * s + world[1] * c)
}

/// Vessel guidance: the planar field rotated into the body frame.
pub fn usv_guidance(
    psi: f64,
    phi: &PathError,
    tangent: &DVector<f64>,
    view: &CoordinateView,
    topology: &Topology,
    gains: &GuidanceGains,
) -> Result<GuidanceCommand> {
    check_shapes(phi, tangent, gains, 2)?;
    let (vel, u_omega) = field(phi, tangent, gains, consensus_term(view, topology, gains.c));
    let (u_r, v_r) = to_body_frame(psi, &Vector2::new(vel[0], vel[1]));
    Ok(GuidanceCommand::Usv { u_r, v_r, u_omega })
}

/// Aerial guidance: the spatial field used directly as velocity reference.
pub fn uav_guidance(
    phi: &PathError,
    tangent: &DVector<f64>,
    view: &CoordinateView,
    topology: &Topology,
    gains: &GuidanceGains,
) -> Result<GuidanceCommand> {
    check_shapes(phi, tangent, gains, 3)?;
    let (vel, u_omega) = field(phi, tangent, gains, consensus_term(view, topology, gains.c));
    Ok(GuidanceCommand::Uav { p_r: Vector3::new(vel[0], vel[1], vel[2]), u_omega })
}
