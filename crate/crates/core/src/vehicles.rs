//! Surface-vessel and aerial-vehicle models and a fixed-step RK4 integrator.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};

/// Planar vessel state. Heading is kept unwrapped.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UsvState {
    pub q: Vector2<f64>,
    pub psi: f64,
    pub u: f64,
    pub v: f64,
    pub r: f64,
    pub omega: f64,
}

impl UsvState {
    /// Inertial velocity `R(ψ)·(u, v)`.
    pub fn world_velocity(&self) -> Vector2<f64> {
        let (s, c) = self.psi.sin_cos();
        Vector2::new(self.u * c - self.v * s, self.u * s + self.v * c)
    }

    fn is_finite(&self) -> bool {
        self.q.iter().all(|x| x.is_finite())
            && [self.psi, self.u, self.v, self.r, self.omega].iter().all(|x| x.is_finite())
    }
}

/// Identified surge/yaw/sway coefficients `ε₁ … ε₇`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UsvParams {
    pub eps: [f64; 7],
}

impl Default for UsvParams {
    fn default() -> Self {
        UsvParams { eps: [-0.5, 0.1, 0.5, -0.8, 0.8, -0.9, -0.3] }
    }
}

impl UsvParams {
    pub fn validate(&self) -> Result<()> {
        let e = &self.eps;
        if e.iter().any(|x| !x.is_finite()) {
            return Err(invalid("USV parameters must be finite"));
        }
        if e[2] == 0.0 || e[4] == 0.0 || e[6] == 0.0 {
            return Err(invalid("ε₃, ε₅ and ε₇ must be non-zero"));
        }
        if !(e[0] < 0.0 && e[3] < 0.0 && e[5] < 0.0) {
            return Err(invalid("ε₁, ε₄ and ε₆ must be negative (open-loop damping)"));
        }
        Ok(())
    }
}

/// Double-integrator aerial vehicle.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UavState {
    pub q: Vector3<f64>,
    pub p: Vector3<f64>,
    pub omega: f64,
}

impl UavState {
    fn is_finite(&self) -> bool {
        self.q.iter().chain(self.p.iter()).all(|x| x.is_finite()) && self.omega.is_finite()
    }
}

/// States that can be advanced by [`integrate_step`]: `self + h·d`.
pub trait OdeState: Sized + Copy {
    fn add_scaled(&self, h: f64, d: &Self) -> Self;
}

impl OdeState for UsvState {
    fn add_scaled(&self, h: f64, d: &Self) -> Self {
        UsvState {
            q: self.q + d.q * h,
            psi: self.psi + h * d.psi,
            u: self.u + h * d.u,
            v: self.v + h * d.v,
            r: self.r + h * d.r,
            omega: self.omega + h * d.omega,
        }
    }
}

impl OdeState for UavState {
    fn add_scaled(&self, h: f64, d: &Self) -> Self {
        UavState { q: self.q + d.q * h, p: self.p + d.p * h, omega: self.omega + h * d.omega }
    }
}

/// Time derivative of a vessel state under actuator pair `(τ_u, τ_r)` and
/// coordinate rate `u_ω`.
pub fn usv_derivative(
    state: &UsvState,
    params: &UsvParams,
    tau: (f64, f64),
    u_omega: f64,
) -> Result<UsvState> {
    if !state.is_finite() {
        return Err(invalid("non-finite USV state"));
    }
    ensure_finite("τ_u", tau.0)?;
    ensure_finite("τ_r", tau.1)?;
    ensure_finite("u_ω", u_omega)?;
    let e = &params.eps;
    let UsvState { u, v, r, .. } = *state;
    Ok(UsvState {
        q: state.world_velocity(),
        psi: r,
        u: e[0] * u + e[1] * v * r + e[2] * tau.0,
        r: e[3] * r + e[4] * tau.1,
        v: e[5] * v + e[6] * u * r,
        omega: u_omega,
    })
}

pub fn uav_derivative(state: &UavState, accel: &Vector3<f64>, u_omega: f64) -> Result<UavState> {
    if !state.is_finite() {
        return Err(invalid("non-finite UAV state"));
    }
    if accel.iter().any(|x| !x.is_finite()) {
        return Err(invalid("non-finite UAV acceleration"));
    }
    ensure_finite("u_ω", u_omega)?;
    Ok(UavState { q: state.p, p: *accel, omega: u_omega })
}

/// One classical fourth-order Runge–Kutta step.
pub fn integrate_step<S, F>(mut deriv: F, state: &S, dt: f64) -> Result<S>
where
    S: OdeState,
    F: FnMut(&S) -> Result<S>,
{
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(invalid(format!("dt must be positive, got {dt}")));
    }
    let k1 = deriv(state)?;
    let k2 = deriv(&state.add_scaled(dt / 2.0, &k1))?;
    let k3 = deriv(&state.add_scaled(dt / 2.0, &k2))?;
    let k4 = deriv(&state.add_scaled(dt, &k3))?;
    Ok(state
        .add_scaled(dt / 6.0, &k1)
        .add_scaled(dt / 3.0, &k2)
        .add_scaled(dt / 3.0, &k3)
        .add_scaled(dt / 6.0, &k4))
}
