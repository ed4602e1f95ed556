//! Per-tick records and their CSV form.
//!
//! Floats are written with the shortest representation that parses back to
//! the same bits, so a CSV round trip is lossless. Cells that do not apply
//! to a vehicle type are left empty.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::sim::config::VehicleKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Flags {
    /// A regulator divisor was held at the speed floor.
    pub clamped: bool,
    /// The safety filter changed the guidance velocity.
    pub filtered: bool,
    /// An actuator input hit its bound.
    pub saturated: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VehicleSample {
    pub id: usize,
    pub kind: VehicleKind,
    /// Position, 2 entries for vessels and 3 for aerial vehicles.
    pub q: Vec<f64>,
    /// Vessel heading and body rates `(ψ, u, v, r)`.
    pub body: Option<[f64; 4]>,
    /// Aerial inertial velocity.
    pub p: Option<[f64; 3]>,
    pub omega: f64,
    pub phi: Vec<f64>,
    /// `(u_r, v_r)` for vessels, `p_r` for aerial vehicles.
    pub cmd: Vec<f64>,
    pub u_omega: f64,
    /// `(τ_u, τ_r)` for vessels, the acceleration for aerial vehicles.
    pub tau: Vec<f64>,
    /// Residual `ω_i − ω_k − Δ_{i,k}` against each neighbor.
    pub residuals: Vec<f64>,
    pub omega_tilde: Option<f64>,
    pub flags: Flags,
}

impl VehicleSample {
    pub fn phi_norm(&self) -> f64 {
        self.phi.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Inertial velocity of the vehicle.
    pub fn velocity(&self) -> Vec<f64> {
        match (self.body, self.p) {
            (Some([psi, u, v, _]), _) => {
                let (s, c) = psi.sin_cos();
                vec![u * c - v * s, u * s + v * c]
            }
            (None, Some(p)) => p.to_vec(),
            (None, None) => vec![0.0; self.q.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TelemetryRecord {
    pub t: f64,
    pub lyapunov: Option<f64>,
    pub vehicles: Vec<VehicleSample>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Telemetry {
    pub records: Vec<TelemetryRecord>,
}

impl Telemetry {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Step size recovered from the first two records.
    pub fn dt(&self) -> Option<f64> {
        match self.records.as_slice() {
            [a, b, ..] => Some(b.t - a.t),
            _ => None,
        }
    }

    fn residual_columns(&self) -> usize {
        self.records
            .iter()
            .flat_map(|r| r.vehicles.iter().map(|v| v.residuals.len()))
            .max()
            .unwrap_or(0)
    }

    pub fn header(residuals: usize) -> Vec<String> {
        let mut h: Vec<String> = [
            "t", "id", "type", "qx", "qy", "qz", "psi", "u", "v", "r", "px", "py", "pz", "omega", "phi_x", "phi_y",
            "phi_z", "cmd_1", "cmd_2", "cmd_3", "u_omega", "tau_1", "tau_2", "tau_3",
        ]
        .iter()
        .map(|s| s.to_string())
        .collect();
        h.extend((1..=residuals).map(|j| format!("res_{j}")));
        h.extend(["omega_tilde", "lyapunov", "clamped", "filtered", "saturated"].iter().map(|s| s.to_string()));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let d = self.residual_columns();
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(d)).map_err(io)?;
        let mut row: Vec<String> = Vec::new();
        for rec in &self.records {
            for s in &rec.vehicles {
                row.clear();
                row.push(num(rec.t));
                row.push(s.id.to_string());
                row.push(s.kind.as_str().to_string());
                padded(&mut row, &s.q, 3);
                padded(&mut row, s.body.as_ref().map_or(&[][..], |b| &b[..]), 4);
                padded(&mut row, s.p.as_ref().map_or(&[][..], |p| &p[..]), 3);
                row.push(num(s.omega));
                padded(&mut row, &s.phi, 3);
                padded(&mut row, &s.cmd, 3);
                row.push(num(s.u_omega));
                padded(&mut row, &s.tau, 3);
                padded(&mut row, &s.residuals, d);
                row.push(s.omega_tilde.map(num).unwrap_or_default());
                row.push(rec.lyapunov.map(num).unwrap_or_default());
                for f in [s.flags.clamped, s.flags.filtered, s.flags.saturated] {
                    row.push(if f { "1" } else { "0" }.to_string());
                }
                w.write_record(&row).map_err(io)?;
            }
        }
        w.flush().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        String::from_utf8(buf).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read_csv<R: Read>(input: R) -> Result<Telemetry> {
        let mut r = csv::Reader::from_reader(input);
        let header = r.headers().map_err(io)?.clone();
        let d = header.iter().filter(|h| h.starts_with("res_")).count();
        if header.len() != Self::header(d).len() || header.get(0) != Some("t") {
            return Err(Error::Config("unexpected telemetry header".into()));
        }
        let mut records: Vec<TelemetryRecord> = Vec::new();
        for (line, row) in r.records().enumerate() {
            let row = row.map_err(io)?;
            let cell = |i: usize| row.get(i).unwrap_or("");
            let ctx = |e: String| Error::Config(format!("telemetry row {}: {e}", line + 2));
            let f = |i: usize| -> Result<Option<f64>> {
                let c = cell(i);
                if c.is_empty() {
                    Ok(None)
                } else {
                    c.parse::<f64>().map(Some).map_err(|e| ctx(format!("column {}: {e}", i + 1)))
                }
            };
            let req = |i: usize| -> Result<f64> { f(i)?.ok_or_else(|| ctx(format!("column {} is empty", i + 1))) };
            let many = |start: usize, len: usize| -> Result<Vec<f64>> {
                let mut v = Vec::new();
                for i in start..start + len {
                    match f(i)? {
                        Some(x) => v.push(x),
                        None => break,
                    }
                }
                Ok(v)
            };
            let t = req(0)?;
            let id = cell(1).parse::<usize>().map_err(|e| ctx(e.to_string()))?;
            let kind = match cell(2) {
                "usv" => VehicleKind::Usv,
                "uav" => VehicleKind::Uav,
                other => return Err(ctx(format!("unknown vehicle type {other:?}"))),
            };
            let body = match kind {
                VehicleKind::Usv => Some([req(6)?, req(7)?, req(8)?, req(9)?]),
                VehicleKind::Uav => None,
            };
            let p = match kind {
                VehicleKind::Uav => Some([req(10)?, req(11)?, req(12)?]),
                VehicleKind::Usv => None,
            };
            let base = 24 + d;
            let flag = |i: usize| cell(i) == "1";
            let sample = VehicleSample {
                id,
                kind,
                q: many(3, kind.dim())?,
                body,
                p,
                omega: req(13)?,
                phi: many(14, kind.dim())?,
                cmd: many(17, 3)?,
                u_omega: req(20)?,
                tau: many(21, 3)?,
                residuals: many(24, d)?,
                omega_tilde: f(base)?,
                flags: Flags { clamped: flag(base + 2), filtered: flag(base + 3), saturated: flag(base + 4) },
            };
            let lyapunov = f(base + 1)?;
            match records.last_mut() {
                Some(last) if last.t == t => last.vehicles.push(sample),
                _ => records.push(TelemetryRecord { t, lyapunov, vehicles: vec![sample] }),
            }
        }
        Ok(Telemetry { records })
    }
}

fn io(e: csv::Error) -> Error {
    Error::Config(format!("telemetry csv: {e}"))
}

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn padded(row: &mut Vec<String>, values: &[f64], width: usize) {
    for j in 0..width {
        row.push(values.get(j).map(|x| num(*x)).unwrap_or_default());
    }
}
