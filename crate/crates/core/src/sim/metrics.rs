//! Summary statistics computed from telemetry alone.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::sim::config::VehicleKind;
use crate::sim::telemetry::{Telemetry, VehicleSample};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricThresholds {
    /// Bound on `‖Φ_i‖` (m).
    pub path: f64,
    /// Bound on `|ω_i − ω_k − Δ_{i,k}|`.
    pub residual: f64,
    /// Start of the window where the Lyapunov trace is checked (s).
    pub transient: f64,
    /// Trailing fraction of the run used for coordinate-rate statistics.
    pub final_fraction: f64,
    /// Length of the start-up window whose maxima serve as bound references (s).
    pub reference_window: f64,
}

impl Default for MetricThresholds {
    fn default() -> Self {
        MetricThresholds { path: 0.1, residual: 0.05, transient: 10.0, final_fraction: 0.2, reference_window: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleMetrics {
    pub id: usize,
    pub kind: VehicleKind,
    pub final_path_error: f64,
    pub path_settle_time: Option<f64>,
    pub omega_rate_mean: Option<f64>,
    pub omega_rate_std: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovStats {
    pub initial: f64,
    pub peak: f64,
    pub final_value: f64,
    /// Largest `V(t₂) − V(t₁)` over `transient ≤ t₁ ≤ t₂`.
    pub max_rise_after_transient: f64,
}

/// Maximum of a quantity during the start-up window and afterwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub quantity: String,
    pub reference: f64,
    pub max_after: f64,
}

impl BoundCheck {
    pub fn within(&self, factor: f64) -> bool {
        self.max_after.is_finite() && self.max_after <= factor * self.reference
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub records: usize,
    pub dt: Option<f64>,
    pub duration: f64,
    pub thresholds: MetricThresholds,
    pub vehicles: Vec<VehicleMetrics>,
    pub max_final_path_error: f64,
    pub final_max_residual: f64,
    pub path_settle_time: Option<f64>,
    pub residual_settle_time: Option<f64>,
    pub min_distance_usv: Option<f64>,
    pub min_distance_uav: Option<f64>,
    pub lyapunov: Option<LyapunovStats>,
    pub bounds: Vec<BoundCheck>,
}

pub fn compute_metrics(telemetry: &Telemetry) -> Result<MetricsSummary> {
    compute_metrics_with(telemetry, &MetricThresholds::default())
}

/// First record time after which `values` stays below `threshold`.
fn settle_time(times: &[f64], values: &[f64], threshold: f64) -> Option<f64> {
    let mut settled = None;
    for (t, v) in times.iter().zip(values).rev() {
        if *v < threshold {
            settled = Some(*t);
        } else {
            break;
        }
    }
    settled
}

fn max_abs_residual(s: &VehicleSample) -> f64 {
    s.residuals.iter().fold(0.0f64, |m, r| m.max(r.abs()))
}

fn speed(s: &VehicleSample) -> f64 {
    s.velocity().iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn compute_metrics_with(telemetry: &Telemetry, th: &MetricThresholds) -> Result<MetricsSummary> {
    let recs = &telemetry.records;
    let first = recs.first().ok_or_else(|| invalid("telemetry is empty"))?;
    let n = first.vehicles.len();
    if recs.iter().any(|r| r.vehicles.len() != n) {
        return Err(invalid("every record must carry the same vehicles"));
    }
    let times: Vec<f64> = recs.iter().map(|r| r.t).collect();
    let t0 = times[0];
    let t_end = *times.last().unwrap_or(&t0);
    let dt = telemetry.dt();
    let last = recs.last().unwrap_or(first);

    let rate_start = t0 + (1.0 - th.final_fraction) * (t_end - t0);
    let mut vehicles = Vec::with_capacity(n);
    for i in 0..n {
        let errs: Vec<f64> = recs.iter().map(|r| r.vehicles[i].phi_norm()).collect();
        let mut rates = Vec::new();
        if let Some(dt) = dt {
            for w in recs.windows(2) {
                if w[1].t > rate_start {
                    rates.push((w[1].vehicles[i].omega - w[0].vehicles[i].omega) / dt);
                }
            }
        }
        let (mean, std) = if rates.is_empty() {
            (None, None)
        } else {
            let m = rates.iter().sum::<f64>() / rates.len() as f64;
            let var = rates.iter().map(|r| (r - m) * (r - m)).sum::<f64>() / rates.len() as f64;
            (Some(m), Some(var.sqrt()))
        };
        vehicles.push(VehicleMetrics {
            id: first.vehicles[i].id,
            kind: first.vehicles[i].kind,
            final_path_error: *errs.last().unwrap_or(&0.0),
            path_settle_time: settle_time(&times, &errs, th.path),
            omega_rate_mean: mean,
            omega_rate_std: std,
        });
    }

    let max_phi: Vec<f64> = recs.iter().map(|r| r.vehicles.iter().fold(0.0f64, |m, s| m.max(s.phi_norm()))).collect();
    let max_res: Vec<f64> = recs.iter().map(|r| r.vehicles.iter().fold(0.0f64, |m, s| m.max(max_abs_residual(s)))).collect();

    let mut min_distance_usv: Option<f64> = None;
    let mut min_distance_uav: Option<f64> = None;
    for r in recs {
        for a in 0..n {
            for b in a + 1..n {
                let (sa, sb) = (&r.vehicles[a], &r.vehicles[b]);
                if sa.kind != sb.kind {
                    continue;
                }
                let d = sa.q.iter().zip(&sb.q).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
                let slot = match sa.kind {
                    VehicleKind::Usv => &mut min_distance_usv,
                    VehicleKind::Uav => &mut min_distance_uav,
                };
                *slot = Some(slot.map_or(d, |m: f64| m.min(d)));
            }
        }
    }

    let lyapunov = if recs.iter().all(|r| r.lyapunov.is_some()) {
        let v: Vec<f64> = recs.iter().map(|r| r.lyapunov.unwrap_or(0.0)).collect();
        let mut running_min = f64::INFINITY;
        let mut rise: f64 = 0.0;
        for (t, x) in times.iter().zip(&v) {
            if *t >= t0 + th.transient {
                running_min = running_min.min(*x);
                rise = rise.max(x - running_min);
            }
        }
        Some(LyapunovStats {
            initial: v[0],
            peak: v.iter().fold(f64::NEG_INFINITY, |m, x| m.max(*x)),
            final_value: *v.last().unwrap_or(&v[0]),
            max_rise_after_transient: rise,
        })
    } else {
        None
    };

    let split = t0 + th.reference_window;
    let bound = |name: &str, values: &dyn Fn(usize) -> f64| -> BoundCheck {
        let mut reference: f64 = 0.0;
        let mut after: f64 = 0.0;
        for (k, t) in times.iter().enumerate() {
            let x = values(k);
            let x = if x.is_nan() { f64::INFINITY } else { x };
            if *t <= split {
                reference = reference.max(x);
            } else {
                after = after.max(x);
            }
        }
        BoundCheck { quantity: name.to_string(), reference, max_after: after }
    };
    let mut bounds = vec![
        bound("path_error", &|k| max_phi[k]),
        bound("omega_tilde", &|k| recs[k].vehicles.iter().fold(0.0f64, |m, s| m.max(s.omega_tilde.map_or(0.0, f64::abs)))),
        bound("speed", &|k| recs[k].vehicles.iter().fold(0.0f64, |m, s| m.max(speed(s)))),
    ];
    if lyapunov.is_some() {
        bounds.push(bound("lyapunov", &|k| recs[k].lyapunov.unwrap_or(0.0)));
    }

    Ok(MetricsSummary {
        records: recs.len(),
        dt,
        duration: t_end - t0,
        thresholds: *th,
        max_final_path_error: last.vehicles.iter().fold(0.0f64, |m, s| m.max(s.phi_norm())),
        final_max_residual: last.vehicles.iter().fold(0.0f64, |m, s| m.max(max_abs_residual(s))),
        path_settle_time: settle_time(&times, &max_phi, th.path),
        residual_settle_time: settle_time(&times, &max_res, th.residual),
        vehicles,
        min_distance_usv,
        min_distance_uav,
        lyapunov,
        bounds,
    })
}
