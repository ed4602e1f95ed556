//! Lower-level tracking of the guidance references.
//!
//! The vessel law cancels the surge damping and shapes the surge error as
//! `u̇ = (u/u_r)(u̇_r − b₁ũ)`; sway is tracked indirectly through a desired
//! yaw rate. Both divide by a speed (`u_r` and `ε₇u`), so those divisors are
//! held away from zero by a sign-preserving floor. Reference derivatives
//! come from filtered backward differences.

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, invalid, Result};
use crate::guidance::to_body_frame;
use crate::vehicles::{UavState, UsvParams, UsvState};

pub const DEFAULT_SPEED_FLOOR: f64 = 0.05;
pub const DEFAULT_FILTER_POLE: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegulatorGains {
    pub b1: f64,
    pub b2: f64,
    pub b3: f64,
    pub b4: f64,
}

impl Default for RegulatorGains {
    fn default() -> Self {
        RegulatorGains { b1: 2.0, b2: 2.0, b3: 2.0, b4: 2.0 }
    }
}

impl RegulatorGains {
    pub fn validate(&self) -> Result<()> {
        if [self.b1, self.b2, self.b3, self.b4].iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
            return Err(invalid("regulator gains must be strictly positive"));
        }
        Ok(())
    }
}

/// Velocity tracking errors of a vessel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsvTrackingErrors {
    pub u: f64,
    pub v: f64,
    pub r: f64,
}

impl UsvTrackingErrors {
    pub fn new(state: &UsvState, u_r: f64, v_r: f64, r_r: f64) -> Self {
        UsvTrackingErrors { u: state.u - u_r, v: state.v - v_r, r: state.r - r_r }
    }

    /// The surge/sway errors expressed in the inertial frame.
    pub fn inertial(&self, psi: f64) -> Vector2<f64> {
        let (s, c) = psi.sin_cos();
        Vector2::new(self.u * c - self.v * s, self.u * s + self.v * c)
    }
}

/// `p̃ = p − p_r`.
pub fn uav_tracking_error(state: &UavState, p_r: &Vector3<f64>) -> Vector3<f64> {
    state.p - p_r
}

/// First-order filtered backward difference of a sampled reference.
#[derive(Debug, Clone, PartialEq)]
pub struct RefDerivativeEstimator {
    pole: f64,
    prev: Option<f64>,
    deriv: f64,
}

impl RefDerivativeEstimator {
    pub fn new(pole: f64) -> Result<Self> {
        if !(pole > 0.0) || !pole.is_finite() {
            return Err(invalid(format!("filter pole must be positive, got {pole}")));
        }
        Ok(RefDerivativeEstimator { pole, prev: None, deriv: 0.0 })
    }

    pub fn value(&self) -> f64 {
        self.deriv
    }

    /// Feeds one sample. The first sample only primes the filter.
    pub fn update(&mut self, sample: f64, dt: f64) -> Result<f64> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(invalid(format!("dt must be positive, got {dt}")));
        }
        ensure_finite("reference sample", sample)?;
        if let Some(prev) = self.prev {
            let raw = (sample - prev) / dt;
            self.deriv += self.pole * dt * (raw - self.deriv);
        }
        self.prev = Some(sample);
        Ok(self.deriv)
    }
}

pub fn estimate_derivative(est: &mut RefDerivativeEstimator, sample: f64, dt: f64) -> Result<f64> {
    est.update(sample, dt)
}

/// Raises `|x|` to at least `floor`, keeping the sign of `x` (or of
/// `fallback` when `x` is exactly zero). Returns whether clamping happened.
fn floor_magnitude(x: f64, floor: f64, fallback: f64) -> (f64, bool) {
    if x.abs() >= floor {
        return (x, false);
    }
    let sign = if x != 0.0 {
        x.signum()
    } else if fallback != 0.0 {
        fallback.signum()
    } else {
        1.0
    };
    (sign * floor, true)
}

/// Estimated time derivatives of the vessel references.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UsvRefRates {
    pub u_r_dot: f64,
    pub v_r_dot: f64,
    pub r_r_dot: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UsvActuation {
    pub tau_u: f64,
    pub tau_r: f64,
    /// Desired yaw rate.
    pub r_r: f64,
    /// A speed divisor hit the floor.
    pub clamped: bool,
}

/// Desired yaw rate `r_r = (−ε₆v + v̇_r − b₃ṽ)/(ε₇u)`.
pub fn desired_yaw_rate(
    state: &UsvState,
    params: &UsvParams,
    v_r: f64,
    v_r_dot: f64,
    gains: &RegulatorGains,
    floor: f64,
    u_r: f64,
) -> (f64, bool) {
    let e = &params.eps;
    let (u_div, clamped) = floor_magnitude(state.u, floor, u_r);
    let v_err = state.v - v_r;
    ((-e[5] * state.v + v_r_dot - gains.b3 * v_err) / (e[6] * u_div), clamped)
}

/// Surge and yaw actuator commands for a vessel.
pub fn usv_control(
    state: &UsvState,
    params: &UsvParams,
    u_r: f64,
    v_r: f64,
    rates: &UsvRefRates,
    gains: &RegulatorGains,
    floor: f64,
) -> Result<UsvActuation> {
    for (name, x) in [("u", state.u), ("v", state.v), ("r", state.r), ("u_r", u_r), ("v_r", v_r)] {
        ensure_finite(name, x)?;
    }
    for (name, x) in [("u̇_r", rates.u_r_dot), ("v̇_r", rates.v_r_dot), ("ṙ_r", rates.r_r_dot)] {
        ensure_finite(name, x)?;
    }
    let e = &params.eps;
    let (ur, clamp_ref) = floor_magnitude(u_r, floor, state.u);
    let (mut u, mut clamp_u) = floor_magnitude(state.u, floor, ur);
    // The law closes the loop as u̇ = (ū/ū_r)(u̇_r − b₁ũ); a negative ratio
    // would turn the feedback positive, so ū takes the sign of ū_r.
    if u.signum() != ur.signum() {
        u = -u;
        clamp_u = true;
    }
    let u_err = state.u - u_r;
    let (v, r) = (state.v, state.r);
    let tau_u = (rates.u_r_dot * u - e[0] * ur * state.u - e[1] * ur * v * r - gains.b1 * u * u_err) / (e[2] * ur);

    let (r_r, _) = desired_yaw_rate(state, params, v_r, rates.v_r_dot, gains, floor, u_r);
    let r_err = r - r_r;
    let tau_r = (-e[3] * r - gains.b2 * r_err + rates.r_r_dot) / e[4];
    Ok(UsvActuation { tau_u, tau_r, r_r, clamped: clamp_ref || clamp_u })
}

/// `τ = −b₄ p̃ + ṗ_r`.
pub fn uav_control(state: &UavState, p_r: &Vector3<f64>, p_r_dot: &Vector3<f64>, b4: f64) -> Vector3<f64> {
    -uav_tracking_error(state, p_r) * b4 + p_r_dot
}

/// Desired yaw rate solving the yaw law with the heading dependence of
/// `v_r` made explicit.
///
/// With `v_r = F·n(ψ)` the sway reference moves at `v̇_r = Ḟ·n − u_r·ψ̇`.
/// Taking `ψ̇ = r_r` turns the yaw law into a linear equation in `r_r`,
/// solved here as `r_r = (−ε₆v + Ḟ·n − b₃ṽ)/(ε₇u + u_r)`. Feeding the
/// resulting `v̇_r` to [`usv_control`] returns this same `r_r`.
pub fn consistent_yaw_rate(
    state: &UsvState,
    params: &UsvParams,
    u_r: f64,
    v_r: f64,
    field_rate_normal: f64,
    gains: &RegulatorGains,
    floor: f64,
) -> (f64, bool) {
    let e = &params.eps;
    let (u, clamp_u) = floor_magnitude(state.u, floor, u_r);
    let (den, clamp_den) = floor_magnitude(e[6] * u + u_r, floor, u_r);
    let num = -e[5] * state.v + field_rate_normal - gains.b3 * (state.v - v_r);
    (num / den, clamp_u || clamp_den)
}

/// Per-vessel regulator driven by the inertial guidance velocity.
///
/// Only the inertial reference `F` is differentiated numerically; the
/// rotation into the body frame is differentiated exactly, which keeps the
/// heading out of the filtered loop.
#[derive(Debug, Clone)]
pub struct UsvRegulator {
    pub gains: RegulatorGains,
    pub floor: f64,
    fx: RefDerivativeEstimator,
    fy: RefDerivativeEstimator,
    r_ref: RefDerivativeEstimator,
}

impl UsvRegulator {
    pub fn new(gains: RegulatorGains, floor: f64, pole: f64) -> Result<Self> {
        gains.validate()?;
        if !(floor > 0.0) || !floor.is_finite() {
            return Err(invalid(format!("speed floor must be positive, got {floor}")));
        }
        Ok(UsvRegulator {
            gains,
            floor,
            fx: RefDerivativeEstimator::new(pole)?,
            fy: RefDerivativeEstimator::new(pole)?,
            r_ref: RefDerivativeEstimator::new(pole)?,
        })
    }

    pub fn step(&mut self, state: &UsvState, params: &UsvParams, reference: &Vector2<f64>, dt: f64) -> Result<UsvActuation> {
        let fdot = Vector2::new(self.fx.update(reference.x, dt)?, self.fy.update(reference.y, dt)?);
        let (u_r, v_r) = to_body_frame(state.psi, reference);
        let (fdot_t, fdot_n) = to_body_frame(state.psi, &fdot);
        let (r_r, clamped) = consistent_yaw_rate(state, params, u_r, v_r, fdot_n, &self.gains, self.floor);
        let rates = UsvRefRates {
            u_r_dot: fdot_t + state.r * v_r,
            v_r_dot: fdot_n - u_r * r_r,
            r_r_dot: self.r_ref.update(r_r, dt)?,
        };
        let mut act = usv_control(state, params, u_r, v_r, &rates, &self.gains, self.floor)?;
        act.clamped |= clamped;
        Ok(act)
    }
}

#[derive(Debug, Clone)]
pub struct UavRegulator {
    pub b4: f64,
    p_ref: [RefDerivativeEstimator; 3],
}

impl UavRegulator {
    pub fn new(b4: f64, pole: f64) -> Result<Self> {
        if !(b4 > 0.0) || !b4.is_finite() {
            return Err(invalid("b₄ must be positive"));
        }
        let est = RefDerivativeEstimator::new(pole)?;
        Ok(UavRegulator { b4, p_ref: [est.clone(), est.clone(), est] })
    }

    pub fn step(&mut self, state: &UavState, p_r: &Vector3<f64>, dt: f64) -> Result<Vector3<f64>> {
        let mut rate = Vector3::zeros();
        for (j, est) in self.p_ref.iter_mut().enumerate() {
            rate[j] = est.update(p_r[j], dt)?;
        }
        Ok(uav_control(state, p_r, &rate, self.b4))
    }
}
