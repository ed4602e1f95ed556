//! Pairwise separation filter.
//!
//! Each neighbor within three safe radii contributes the half-space
//! `2(q_i − q_k)ᵀu ≥ −γh + 2(q_i − q_k)ᵀv_k` with `h = ‖q_i − q_k‖² − R²`.
//! The filtered velocity is the Euclidean projection of the nominal one onto
//! the intersection, found exactly by enumerating candidate active sets.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub const ACTIVATION_FACTOR: f64 = 3.0;
const COINCIDENT: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SafetyConfig {
    pub enabled: bool,
    pub radius: f64,
    pub gamma: f64,
    pub usv_pairs: bool,
    pub uav_pairs: bool,
    /// Planar constraints between vessels and aerial vehicles.
    pub cross_domain: bool,
}

impl Default for SafetyConfig {
    fn default() -> Self {
        SafetyConfig { enabled: false, radius: 2.0, gamma: 1.0, usv_pairs: true, uav_pairs: true, cross_domain: false }
    }
}

impl SafetyConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0) || !self.radius.is_finite() {
            return Err(invalid(format!("safe radius must be positive, got {}", self.radius)));
        }
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(invalid(format!("barrier gain must be positive, got {}", self.gamma)));
        }
        Ok(())
    }
}

/// Half-space `aᵀu ≥ b`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierConstraint {
    pub a: DVector<f64>,
    pub b: f64,
    /// Barrier value `h` at construction time.
    pub h: f64,
}

impl BarrierConstraint {
    pub fn slack(&self, u: &DVector<f64>) -> f64 {
        self.a.dot(u) - self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NeighborState {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

pub fn build_constraints(own: &DVector<f64>, neighbors: &[NeighborState], cfg: &SafetyConfig) -> Result<Vec<BarrierConstraint>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for nb in neighbors {
        if nb.q.len() != own.len() || nb.v.len() != own.len() {
            return Err(invalid("neighbor dimension mismatch"));
        }
        let d = own - &nb.q;
        let dist = d.norm();
        if dist < COINCIDENT {
            return Err(Error::DegenerateGeometry(format!("coincident vehicles at distance {dist:e}")));
        }
        if dist > ACTIVATION_FACTOR * cfg.radius {
            continue;
        }
        let h = d.norm_squared() - cfg.radius * cfg.radius;
        let a = d * 2.0;
        let b = -cfg.gamma * h + a.dot(&nb.v);
        out.push(BarrierConstraint { a, b, h });
    }
    Ok(out)
}

fn subsets(m: usize, max: usize) -> Vec<Vec<usize>> {
    let mut all = vec![Vec::new()];
    for i in 0..m {
        let extended: Vec<Vec<usize>> = all
            .iter()
            .filter(|s| s.len() < max)
            .map(|s| {
                let mut t = s.clone();
                t.push(i);
                t
            })
            .collect();
        all.extend(extended);
    }
    all.sort_by_key(|s| s.len());
    all
}

/// Minimizes `‖u − nominal‖²` over all constraints.
pub fn qp_filter(nominal: &DVector<f64>, constraints: &[BarrierConstraint]) -> Result<DVector<f64>> {
    let n = nominal.len();
    if constraints.iter().any(|c| c.a.len() != n) {
        return Err(invalid("constraint dimension mismatch"));
    }
    if nominal.iter().any(|x| !x.is_finite()) {
        return Err(invalid("nominal input is not finite"));
    }
    let tol = |c: &BarrierConstraint| FEAS_TOL * (1.0 + c.b.abs() + c.a.norm() * nominal.norm());
    if constraints.iter().all(|c| c.slack(nominal) >= 0.0) {
        return Ok(nominal.clone());
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    for set in subsets(constraints.len(), n).into_iter().skip(1) {
        let k = set.len();
        let a = DMatrix::from_fn(n, k, |r, c| constraints[set[c]].a[r]);
        let gram = a.transpose() * &a;
        let rhs = DVector::from_fn(k, |r, _| constraints[set[r]].b - constraints[set[r]].a.dot(nominal));
        let Some(lambda) = gram.clone().lu().solve(&rhs) else { continue };
        if (&gram * &lambda - &rhs).amax() > 1e-9 * (1.0 + rhs.amax()) {
            continue;
        }
        // Multipliers must be nonnegative for a KKT point.
        if lambda.iter().any(|l| *l < -1e-12) {
            continue;
        }
        let u = nominal + &a * &lambda;
        if constraints.iter().any(|c| c.slack(&u) < -tol(c)) {
            continue;
        }
        let obj = (&u - nominal).norm_squared();
        if best.as_ref().is_none_or(|(o, _)| obj < *o) {
            best = Some((obj, u));
        }
    }
    best.map(|(_, u)| u).ok_or_else(|| Error::Infeasible(format!("no feasible point for {} constraints", constraints.len())))
}
