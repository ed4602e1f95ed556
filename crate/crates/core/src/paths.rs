//! Parametric paths and the guiding vector fields built on them.
//!
//! A path is a map `ω ↦ f(ω) ∈ ℝ^dim` with analytic first and second
//! partials. The path-following error of a point `q` at virtual coordinate
//! `ω` is simply `q − f(ω)`; the augmented field lifts the classic guiding
//! vector field by one dimension so that it never vanishes.

use std::f64::consts::FRAC_PI_2;
use std::fmt;
use std::sync::Arc;

use nalgebra::DVector;

use crate::error::{ensure_finite, invalid, Error, Result};

/// Circle of `radius` around `center`, optionally lifted to a constant altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct Circle {
    pub center: [f64; 2],
    pub radius: f64,
    pub altitude: Option<f64>,
}

/// Per-axis cosine path: `f_j(ω) = A_j cos(n_j ω + p_j) + o_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct Lissajous {
    pub amplitudes: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub phases: Vec<f64>,
    pub offsets: Vec<f64>,
}

impl Lissajous {
    /// The self-intersecting "figure eight" used in the ten-vehicle scenario:
    /// `x = 16 cos(ω/2)`, `y = 6 cos(ω + π/2) − d_o` and, for aerial
    /// vehicles, `z = −2 cos ω`.
    pub fn figure_eight(lateral_offset: f64, aerial: bool) -> Self {
        let mut path = Lissajous {
            amplitudes: vec![16.0, 6.0],
            frequencies: vec![0.5, 1.0],
            phases: vec![0.0, FRAC_PI_2],
            offsets: vec![0.0, -lateral_offset],
        };
        if aerial {
            path.amplitudes.push(-2.0);
            path.frequencies.push(1.0);
            path.phases.push(0.0);
            path.offsets.push(0.0);
        }
        path
    }

    fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

type PathFn = Arc<dyn Fn(f64) -> DVector<f64> + Send + Sync>;

/// A user-supplied path given as three closures.
#[derive(Clone)]
pub struct CustomPath {
    pub dim: usize,
    pub f: PathFn,
    pub df: PathFn,
    pub ddf: PathFn,
}

impl fmt::Debug for CustomPath {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPath").field("dim", &self.dim).finish_non_exhaustive()
    }
}

/// A parametric path in the plane or in space.
#[derive(Debug, Clone)]
pub enum PathSpec {
    Circle(Circle),
    Lissajous(Lissajous),
    Custom(CustomPath),
}

impl PathSpec {
    pub fn circle(center: [f64; 2], radius: f64) -> Self {
        PathSpec::Circle(Circle { center, radius, altitude: None })
    }

    pub fn circle_at_altitude(center: [f64; 2], radius: f64, altitude: f64) -> Self {
        PathSpec::Circle(Circle { center, radius, altitude: Some(altitude) })
    }

    /// Checks the structural parameters of a built-in path.
    pub fn validate(&self) -> Result<()> {
        match self {
            PathSpec::Circle(c) => {
                if !(c.radius > 0.0 && c.radius.is_finite()) {
                    return Err(invalid(format!("circle radius must be positive, got {}", c.radius)));
                }
                if c.center.iter().chain(c.altitude.iter()).any(|x| !x.is_finite()) {
                    return Err(invalid("circle center/altitude must be finite"));
                }
            }
            PathSpec::Lissajous(l) => {
                let d = l.dim();
                if !(d == 2 || d == 3) {
                    return Err(invalid(format!("lissajous path must have 2 or 3 axes, got {d}")));
                }
                if l.frequencies.len() != d || l.phases.len() != d || l.offsets.len() != d {
                    return Err(invalid("lissajous parameter vectors must have equal length"));
                }
                let all = l.amplitudes.iter().chain(&l.frequencies).chain(&l.phases).chain(&l.offsets);
                if all.into_iter().any(|x| !x.is_finite()) {
                    return Err(invalid("lissajous parameters must be finite"));
                }
            }
            PathSpec::Custom(c) => {
                if !(c.dim == 2 || c.dim == 3) {
                    return Err(invalid(format!("custom path must have dim 2 or 3, got {}", c.dim)));
                }
            }
        }
        Ok(())
    }

    /// Workspace dimension (2 or 3).
    pub fn dim(&self) -> usize {
        match self {
            PathSpec::Circle(c) => 2 + usize::from(c.altitude.is_some()),
            PathSpec::Lissajous(l) => l.dim(),
            PathSpec::Custom(c) => c.dim,
        }
    }

    pub fn is_periodic(&self) -> bool {
        self.period().is_some()
    }

    /// Smallest `T > 0` with `f(ω + T) = f(ω)` for the built-in paths.
    ///
    /// Lissajous paths are periodic when every frequency is a rational
    /// multiple of the others; denominators up to 64 are recognised.
    pub fn period(&self) -> Option<f64> {
        match self {
            PathSpec::Circle(_) => Some(std::f64::consts::TAU),
            PathSpec::Lissajous(l) => (1..=64u32).find_map(|m| {
                let m = f64::from(m);
                let whole = l.frequencies.iter().all(|n| *n == 0.0 || ((n * m).round() - n * m).abs() < 1e-9);
                (whole && l.frequencies.iter().any(|n| *n != 0.0)).then(|| {
                    let ints: Vec<u64> = l.frequencies.iter().map(|n| (n * m).round().abs() as u64).filter(|n| *n > 0).collect();
                    let g = ints.iter().fold(0u64, |g, n| gcd(g, *n));
                    std::f64::consts::TAU * m / g as f64
                })
            }),
            PathSpec::Custom(_) => None,
        }
    }

    fn point(&self, w: f64) -> DVector<f64> {
        match self {
            PathSpec::Circle(c) => {
                let mut p = vec![c.center[0] + c.radius * w.cos(), c.center[1] + c.radius * w.sin()];
                p.extend(c.altitude);
                DVector::from_vec(p)
            }
            PathSpec::Lissajous(l) => DVector::from_iterator(
                l.dim(),
                (0..l.dim()).map(|j| l.amplitudes[j] * (l.frequencies[j] * w + l.phases[j]).cos() + l.offsets[j]),
            ),
            PathSpec::Custom(c) => (c.f)(w),
        }
    }

    fn first(&self, w: f64) -> DVector<f64> {
        match self {
            PathSpec::Circle(c) => {
                let mut p = vec![-c.radius * w.sin(), c.radius * w.cos()];
                if c.altitude.is_some() {
                    p.push(0.0);
                }
                DVector::from_vec(p)
            }
            PathSpec::Lissajous(l) => DVector::from_iterator(
                l.dim(),
                (0..l.dim()).map(|j| {
                    -l.amplitudes[j] * l.frequencies[j] * (l.frequencies[j] * w + l.phases[j]).sin()
                }),
            ),
            PathSpec::Custom(c) => (c.df)(w),
        }
    }

    fn second(&self, w: f64) -> DVector<f64> {
        match self {
            PathSpec::Circle(c) => {
                let mut p = vec![-c.radius * w.cos(), -c.radius * w.sin()];
                if c.altitude.is_some() {
                    p.push(0.0);
                }
                DVector::from_vec(p)
            }
            PathSpec::Lissajous(l) => DVector::from_iterator(
                l.dim(),
                (0..l.dim()).map(|j| {
                    let n = l.frequencies[j];
                    -l.amplitudes[j] * n * n * (n * w + l.phases[j]).cos()
                }),
            ),
            PathSpec::Custom(c) => (c.ddf)(w),
        }
    }

    /// `∂f/∂ω` at `ω`.
    pub fn tangent(&self, w: f64) -> Result<DVector<f64>> {
        ensure_finite("ω", w)?;
        Ok(self.first(w))
    }

    /// `∂²f/∂ω²` at `ω`.
    pub fn curvature_term(&self, w: f64) -> Result<DVector<f64>> {
        ensure_finite("ω", w)?;
        Ok(self.second(w))
    }
}

fn gcd(a: u64, b: u64) -> u64 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Path-following error `φ = q − f(ω)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathError {
    pub phi: DVector<f64>,
}

impl PathError {
    pub fn norm(&self) -> f64 {
        self.phi.norm()
    }
}

/// Sign of the propagation term, `(−1)^n` in the general field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FieldSign {
    Positive,
    #[default]
    Negative,
}

impl FieldSign {
    pub fn value(self) -> f64 {
        match self {
            FieldSign::Positive => 1.0,
            FieldSign::Negative => -1.0,
        }
    }
}

pub fn eval_path(path: &PathSpec, w: f64) -> Result<DVector<f64>> {
    ensure_finite("ω", w)?;
    Ok(path.point(w))
}

pub fn path_error(path: &PathSpec, q: &DVector<f64>, w: f64) -> Result<PathError> {
    if q.len() != path.dim() {
        return Err(invalid(format!("point has dim {}, path has dim {}", q.len(), path.dim())));
    }
    let f = eval_path(path, w)?;
    Ok(PathError { phi: q - f })
}

/// The classic (non-augmented) field built from implicit level sets.
///
/// Only circles have an implicit description here: `φ₁ = ‖(x, y) − c‖² − r²`
/// and, for a lifted circle, `φ₂ = z − h`. In the plane the propagation
/// term is the gradient rotated by +90°; in space it is `∇φ₁ × ∇φ₂`.
pub fn gvf_physical(path: &PathSpec, q: &DVector<f64>, gains: &[f64]) -> Result<DVector<f64>> {
    let PathSpec::Circle(c) = path else {
        return Err(Error::Unsupported("physical field is only available for circles".into()));
    };
    let dim = path.dim();
    if q.len() != dim {
        return Err(invalid(format!("point has dim {}, path has dim {dim}", q.len())));
    }
    if gains.len() != dim - 1 {
        return Err(invalid(format!("expected {} gains, got {}", dim - 1, gains.len())));
    }
    let dx = q[0] - c.center[0];
    let dy = q[1] - c.center[1];
    let level = dx * dx + dy * dy - c.radius * c.radius;
    let (gx, gy) = (2.0 * dx, 2.0 * dy);
    match c.altitude {
        None => Ok(DVector::from_vec(vec![
            -gy - gains[0] * level * gx,
            gx - gains[0] * level * gy,
        ])),
        Some(h) => {
            let level_z = q[2] - h;
            // (gx, gy, 0) × (0, 0, 1) = (gy, −gx, 0)
            Ok(DVector::from_vec(vec![
                gy - gains[0] * level * gx,
                -gx - gains[0] * level * gy,
                -gains[1] * level_z,
            ]))
        }
    }
}

/// The singularity-free augmented field in `ℝ^{dim+1}`.
///
/// Components `j < dim` are `s·∂f_j − k_j φ_j`; the last one is
/// `s + Σ k_j φ_j ∂f_j`.
pub fn gvf_augmented(
    path: &PathSpec,
    q: &DVector<f64>,
    w: f64,
    gains: &[f64],
    sign: FieldSign,
) -> Result<DVector<f64>> {
    let dim = path.dim();
    if gains.len() != dim {
        return Err(invalid(format!("expected {dim} gains, got {}", gains.len())));
    }
    if let Some(k) = gains.iter().find(|k| !(**k > 0.0) || !k.is_finite()) {
        return Err(invalid(format!("gains must be strictly positive, got {k}")));
    }
    let err = path_error(path, q, w)?;
    let df = path.first(w);
    let s = sign.value();
    let mut out = DVector::zeros(dim + 1);
    let mut last = s;
    for j in 0..dim {
        out[j] = s * df[j] - gains[j] * err.phi[j];
        last += gains[j] * err.phi[j] * df[j];
    }
    out[dim] = last;
    Ok(out)
}

/// Coordinate of the path point closest to `q` within `[lo, hi]`.
///
/// A uniform grid of `samples` points locates the best cell, then a few
/// safeguarded Newton steps on `(q − f)·∂f = 0` refine it.
pub fn closest_parameter(path: &PathSpec, q: &DVector<f64>, lo: f64, hi: f64, samples: usize) -> Result<f64> {
    ensure_finite("lo", lo)?;
    ensure_finite("hi", hi)?;
    if hi <= lo || samples < 2 {
        return Err(invalid("need hi > lo and at least two samples"));
    }
    let dist = |w: f64| -> Result<f64> { Ok(path_error(path, q, w)?.phi.norm_squared()) };
    let step = (hi - lo) / (samples - 1) as f64;
    let mut best = (lo, dist(lo)?);
    for s in 1..samples {
        let w = lo + step * s as f64;
        let d = dist(w)?;
        if d < best.1 {
            best = (w, d);
        }
    }
    let (a, b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
    let mut w = best.0;
    for _ in 0..20 {
        let phi = q - path.point(w);
        let (df, ddf) = (path.first(w), path.second(w));
        let g = -phi.dot(&df);
        let h = df.norm_squared() - phi.dot(&ddf);
        if !(h > 0.0) {
            break;
        }
        let next = w - g / h;
        if !(a..=b).contains(&next) || dist(next)? > dist(w)? {
            break;
        }
        let done = (next - w).abs() < 1e-14 * (1.0 + w.abs());
        w = next;
        if done {
            break;
        }
    }
    Ok(w)
}

/// Componentwise sup-norms of `f`, `∂f`, `∂²f` over a sampled interval.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivativeBounds {
    pub f: Vec<f64>,
    pub df: Vec<f64>,
    pub ddf: Vec<f64>,
}

impl DerivativeBounds {
    pub fn all_finite(&self) -> bool {
        self.f.iter().chain(&self.df).chain(&self.ddf).all(|x| x.is_finite())
    }
}

/// Samples `[lo, hi]` at `samples` evenly spaced points and records the
/// largest magnitude of each component of the path and its partials.
pub fn derivative_bounds(path: &PathSpec, lo: f64, hi: f64, samples: usize) -> Result<DerivativeBounds> {
    ensure_finite("lo", lo)?;
    ensure_finite("hi", hi)?;
    if hi < lo || samples < 2 {
        return Err(invalid("need hi >= lo and at least two samples"));
    }
    let dim = path.dim();
    let mut bounds = DerivativeBounds { f: vec![0.0; dim], df: vec![0.0; dim], ddf: vec![0.0; dim] };
    for s in 0..samples {
        let w = lo + (hi - lo) * s as f64 / (samples - 1) as f64;
        let (f, df, ddf) = (path.point(w), path.first(w), path.second(w));
        for j in 0..dim {
            bounds.f[j] = bounds.f[j].max(f[j].abs());
            bounds.df[j] = bounds.df[j].max(df[j].abs());
            bounds.ddf[j] = bounds.ddf[j].max(ddf[j].abs());
        }
    }
    Ok(bounds)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    fn field_circle() -> PathSpec {
        PathSpec::circle([-40.0, 50.0], 10.0)
    }

    #[test]
    fn circle_points() {
        let p = field_circle();
        assert_eq!(eval_path(&p, 0.0).unwrap(), v(&[-30.0, 50.0]));
        let top = eval_path(&p, PI / 2.0).unwrap();
        assert_abs_diff_eq!(top[0], -40.0, epsilon = 1e-12);
        assert_abs_diff_eq!(top[1], 60.0, epsilon = 1e-12);
    }

    #[test]
    fn figure_eight_point() {
        let p = PathSpec::Lissajous(Lissajous::figure_eight(7.0, true));
        let pt = eval_path(&p, 0.0).unwrap();
        assert_abs_diff_eq!(pt[0], 16.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pt[1], -7.0, epsilon = 1e-12);
        assert_abs_diff_eq!(pt[2], -2.0, epsilon = 1e-12);
    }

    #[test]
    fn non_finite_coordinate_rejected() {
        assert!(matches!(eval_path(&field_circle(), f64::NAN), Err(Error::InvalidArgument(_))));
        assert!(eval_path(&field_circle(), f64::INFINITY).is_err());
    }

    #[test]
    fn errors() {
        let p = field_circle();
        let on = eval_path(&p, 1.3).unwrap();
        assert_eq!(path_error(&p, &on, 1.3).unwrap().phi, DVector::zeros(2));
        assert_eq!(path_error(&p, &v(&[-29.0, 50.0]), 0.0).unwrap().phi, v(&[1.0, 0.0]));

        let l = PathSpec::Lissajous(Lissajous::figure_eight(7.0, true));
        let phi = path_error(&l, &v(&[16.0, -7.0, 0.0]), 0.0).unwrap().phi;
        assert_abs_diff_eq!(phi[0], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi[1], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(phi[2], 2.0, epsilon = 1e-12);

        assert!(matches!(path_error(&p, &v(&[1.0, 2.0, 3.0]), 0.0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn physical_field_on_path_is_tangent() {
        let r = 10.0;
        let p = PathSpec::circle([0.0, 0.0], r);
        let chi = gvf_physical(&p, &v(&[r, 0.0]), &[1.0]).unwrap();
        assert_eq!(chi, v(&[0.0, 2.0 * r]));
    }

    #[test]
    fn physical_field_vanishes_at_center() {
        let p = field_circle();
        let chi = gvf_physical(&p, &v(&[-40.0, 50.0]), &[1.5]).unwrap();
        assert_eq!(chi, DVector::zeros(2));
        let lifted = PathSpec::circle_at_altitude([-40.0, 50.0], 10.0, 20.0);
        let chi = gvf_physical(&lifted, &v(&[-40.0, 50.0, 20.0]), &[1.5, 1.5]).unwrap();
        assert_eq!(chi, DVector::zeros(3));
    }

    #[test]
    fn physical_field_off_path_matches_hand_evaluation() {
        // q = (1, 2) around the unit circle at the origin, k = 0.5:
        // level = 1 + 4 − 1 = 4, grad = (2, 4)
        // rotated grad = (−4, 2); descent = 0.5·4·(2, 4) = (4, 8)
        let p = PathSpec::circle([0.0, 0.0], 1.0);
        let chi = gvf_physical(&p, &v(&[1.0, 2.0]), &[0.5]).unwrap();
        assert_eq!(chi, v(&[-8.0, -6.0]));
    }

    #[test]
    fn physical_field_rejects_lissajous() {
        let l = PathSpec::Lissajous(Lissajous::figure_eight(0.0, false));
        assert!(matches!(gvf_physical(&l, &v(&[0.0, 0.0]), &[1.0]), Err(Error::Unsupported(_))));
    }

    #[test]
    fn augmented_field_examples() {
        let p = field_circle();
        let chi = gvf_augmented(&p, &v(&[-28.0, 50.0]), 0.0, &[1.5, 1.5], FieldSign::Negative).unwrap();
        // φ = (2, 0), ∂f = (0, 10): (−0 − 3, −10 − 0, −1 + 3·0 + 0·10)
        assert_abs_diff_eq!(chi[0], -3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chi[1], -10.0, epsilon = 1e-12);
        assert_abs_diff_eq!(chi[2], -1.0, epsilon = 1e-12);

        let on = eval_path(&p, 2.0).unwrap();
        let df = p.tangent(2.0).unwrap();
        let chi = gvf_augmented(&p, &on, 2.0, &[1.5, 1.5], FieldSign::Positive).unwrap();
        assert_eq!(chi, v(&[df[0], df[1], 1.0]));
    }

    #[test]
    fn augmented_field_rejects_bad_gains() {
        let p = field_circle();
        let q = v(&[0.0, 0.0]);
        assert!(gvf_augmented(&p, &q, 0.0, &[1.0, 0.0], FieldSign::Negative).is_err());
        assert!(gvf_augmented(&p, &q, 0.0, &[1.0, -2.0], FieldSign::Negative).is_err());
        assert!(gvf_augmented(&p, &q, 0.0, &[1.0], FieldSign::Negative).is_err());
    }

    #[test]
    fn augmented_field_at_center_is_nonzero() {
        let p = field_circle();
        for w in [-3.0, 0.0, 0.7, 12.0] {
            let chi = gvf_augmented(&p, &v(&[-40.0, 50.0]), w, &[1.5, 1.5], FieldSign::Negative).unwrap();
            assert!(chi.norm() > 1.0);
        }
    }

    #[test]
    fn vanishing_spatial_part_forces_last_component() {
        // Choose q so that k_j φ_j = s ∂f_j exactly.
        let p = PathSpec::Lissajous(Lissajous::figure_eight(3.0, true));
        let (w, k, s) = (0.9, [1.5, 0.7, 2.0], -1.0);
        let f = eval_path(&p, w).unwrap();
        let df = p.tangent(w).unwrap();
        let q = DVector::from_iterator(3, (0..3).map(|j| f[j] + s * df[j] / k[j]));
        let chi = gvf_augmented(&p, &q, w, &k, FieldSign::Negative).unwrap();
        for j in 0..3 {
            assert!(chi[j].abs() < 1e-9);
        }
        assert_abs_diff_eq!(chi[3], s * (1.0 + df.norm_squared()), epsilon = 1e-9);
    }

    #[test]
    fn custom_paths_delegate() {
        let line = PathSpec::Custom(CustomPath {
            dim: 2,
            f: Arc::new(|w| DVector::from_vec(vec![w, 2.0 * w])),
            df: Arc::new(|_| DVector::from_vec(vec![1.0, 2.0])),
            ddf: Arc::new(|_| DVector::zeros(2)),
        });
        assert_eq!(eval_path(&line, 3.0).unwrap(), v(&[3.0, 6.0]));
        assert!(!line.is_periodic());
        assert!(line.validate().is_ok());
    }

    #[test]
    fn validation_catches_bad_parameters() {
        assert!(PathSpec::circle([0.0, 0.0], 0.0).validate().is_err());
        let mut l = Lissajous::figure_eight(0.0, true);
        l.phases.pop();
        assert!(PathSpec::Lissajous(l).validate().is_err());
        assert!(PathSpec::Lissajous(Lissajous::figure_eight(14.0, true)).validate().is_ok());
    }

    #[test]
    fn derivative_bounds_are_finite_and_tight() {
        let b = derivative_bounds(&field_circle(), -50.0, 50.0, 20_001).unwrap();
        assert!(b.all_finite());
        assert_abs_diff_eq!(b.f[0], 50.0, epsilon = 1e-3);
        assert_abs_diff_eq!(b.df[1], 10.0, epsilon = 1e-3);
        assert_abs_diff_eq!(b.ddf[0], 10.0, epsilon = 1e-3);

        let l = PathSpec::Lissajous(Lissajous::figure_eight(-14.0, true));
        let b = derivative_bounds(&l, -200.0, 0.0, 100_001).unwrap();
        assert!(b.all_finite());
        assert!(b.df[0] <= 8.0 + 1e-12 && b.ddf[0] <= 4.0 + 1e-12);
        assert!(b.f[1] <= 20.0 + 1e-12);
    }

    fn builtin_paths() -> Vec<PathSpec> {
        vec![
            field_circle(),
            PathSpec::circle_at_altitude([-40.0, 50.0], 10.0, 20.0),
            PathSpec::Lissajous(Lissajous::figure_eight(7.0, false)),
            PathSpec::Lissajous(Lissajous::figure_eight(-14.0, true)),
        ]
    }

    fn rel_close(a: f64, b: f64, scale: f64) -> bool {
        (a - b).abs() <= 1e-6 * scale.max(1.0)
    }

    #[test]
    fn periods() {
        assert_eq!(field_circle().period(), Some(std::f64::consts::TAU));
        let eight = PathSpec::Lissajous(Lissajous::figure_eight(0.0, true));
        let p = eight.period().unwrap();
        assert!((p - 4.0 * PI).abs() < 1e-12);
        for w in [0.3, -2.0, 7.5] {
            assert!((eval_path(&eight, w).unwrap() - eval_path(&eight, w + p).unwrap()).norm() < 1e-12);
        }
        let odd = PathSpec::Lissajous(Lissajous {
            amplitudes: vec![1.0, 1.0],
            frequencies: vec![2.0 / 3.0, 0.5],
            phases: vec![0.0, 0.0],
            offsets: vec![0.0, 0.0],
        });
        assert!((odd.period().unwrap() - 12.0 * PI).abs() < 1e-12);
        let irrational = PathSpec::Lissajous(Lissajous {
            amplitudes: vec![1.0, 1.0],
            frequencies: vec![1.0, 2f64.sqrt()],
            phases: vec![0.0, 0.0],
            offsets: vec![0.0, 0.0],
        });
        assert_eq!(irrational.period(), None);
        assert!(!irrational.is_periodic());
    }

    #[test]
    fn closest_parameter_on_a_circle() {
        let p = field_circle();
        // The nearest circle point to an outside point lies on the ray from the centre.
        let q = v(&[-40.0 + 20.0 * 0.7f64.cos(), 50.0 + 20.0 * 0.7f64.sin()]);
        let w = closest_parameter(&p, &q, -PI, PI, 101).unwrap();
        assert!((w - 0.7).abs() < 1e-10, "{w}");
        assert!(closest_parameter(&p, &q, 1.0, 1.0, 10).is_err());
    }

    proptest! {
        #[test]
        fn partials_match_central_differences(w in -100.0f64..100.0) {
            let h = 1e-5;
            for p in builtin_paths() {
                let fd1 = (p.point(w + h) - p.point(w - h)) / (2.0 * h);
                let fd2 = (p.first(w + h) - p.first(w - h)) / (2.0 * h);
                let (df, ddf) = (p.first(w), p.second(w));
                let scale1 = df.amax();
                let scale2 = ddf.amax();
                for j in 0..p.dim() {
                    prop_assert!(rel_close(df[j], fd1[j], scale1), "df {} vs {}", df[j], fd1[j]);
                    prop_assert!(rel_close(ddf[j], fd2[j], scale2), "ddf {} vs {}", ddf[j], fd2[j]);
                }
            }
        }

        #[test]
        fn phi_bounds_distance_to_path(x in -80.0f64..40.0, y in -30.0f64..90.0, z in -10.0f64..30.0, w in -20.0f64..20.0) {
            for p in builtin_paths() {
                let q = if p.dim() == 2 { v(&[x, y]) } else { v(&[x, y, z]) };
                let phi = path_error(&p, &q, w).unwrap().norm();
                // Grid distance over two periods; a grid point lies within
                // half a cell of ω, so the bound holds up to L·h/2.
                let h = 8.0 * PI / 3999.0;
                let lipschitz = (0..4000).map(|s| p.first(-4.0 * PI + h * s as f64).norm()).fold(0.0, f64::max);
                let dist = (0..4000)
                    .map(|s| {
                        let t = -4.0 * PI + h * s as f64;
                        (&q - p.point(t)).norm()
                    })
                    .fold(f64::INFINITY, f64::min);
                prop_assert!(dist <= phi + lipschitz * h / 2.0 + 1e-9);
            }
        }

        #[test]
        fn augmented_field_never_vanishes(x in -80.0f64..40.0, y in -30.0f64..90.0, z in -10.0f64..30.0, w in -50.0f64..50.0) {
            for p in builtin_paths() {
                let q = if p.dim() == 2 { v(&[x, y]) } else { v(&[x, y, z]) };
                let k = vec![1.5; p.dim()];
                let chi = gvf_augmented(&p, &q, w, &k, FieldSign::Negative).unwrap();
                prop_assert!(chi.norm() > 0.0);
            }
        }

        #[test]
        fn closest_parameter_beats_a_dense_scan(x in -30.0f64..30.0, y in -30.0f64..10.0, w0 in -10.0f64..10.0) {
            let p = PathSpec::Lissajous(Lissajous::figure_eight(0.0, false));
            let q = v(&[x, y]);
            let period = p.period().unwrap();
            let w = closest_parameter(&p, &q, w0 - period / 2.0, w0 + period / 2.0, 2001).unwrap();
            let d = path_error(&p, &q, w).unwrap().norm();
            let scan = (0..=200_000)
                .map(|k| w0 - period / 2.0 + period * k as f64 / 200_000.0)
                .map(|s| path_error(&p, &q, s).unwrap().norm())
                .fold(f64::INFINITY, f64::min);
            prop_assert!(d <= scan + 1e-9, "{} vs {}", d, scan);
        }

        #[test]
        fn on_path_field_is_pure_propagation(w in -50.0f64..50.0) {
            for p in builtin_paths() {
                let q = p.point(w);
                let k = vec![1.5; p.dim()];
                let chi = gvf_augmented(&p, &q, w, &k, FieldSign::Negative).unwrap();
                let df = p.first(w);
                for j in 0..p.dim() {
                    prop_assert_eq!(chi[j], -df[j]);
                }
                prop_assert_eq!(chi[p.dim()], -1.0);
            }
        }
    }
}
