//! Fixed-step closed-loop simulation.
//!
//! Each tick broadcasts the virtual coordinates, evaluates guidance for
//! every vehicle, optionally filters the guidance velocities for
//! separation, runs the regulators and records the result. The states then
//! advance by one RK4 step. Actuator inputs and the communicated part of
//! each coordinate rate are held over the step; the own-path part of the
//! coordinate rate is re-evaluated at every stage.

pub mod config;
pub mod lyapunov;
pub mod metrics;
pub mod scenarios;
pub mod telemetry;

use nalgebra::{DVector, Vector2, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::guidance::{
    path_coordinate_rate, to_body_frame, uav_guidance, usv_guidance, usv_inertial_reference, GuidanceCommand,
    GuidanceGains,
};
use crate::network::{exchange, Topology};
use crate::paths::{closest_parameter, eval_path, path_error, PathError, PathSpec};
use crate::regulator::{UavRegulator, UsvRegulator};
use crate::safety::{build_constraints, qp_filter, NeighborState, SafetyConfig};
use crate::vehicles::{integrate_step, uav_derivative, usv_derivative, UavState, UsvParams, UsvState};

pub use config::{CoordinateInit, HeadingInit, ScenarioConfig, VehicleKind};
pub use lyapunov::{coordinate_errors, lyapunov_value};
pub use metrics::{compute_metrics, compute_metrics_with, MetricThresholds, MetricsSummary};
pub use telemetry::{Flags, Telemetry, TelemetryRecord, VehicleSample};

/// Grid size of the nearest-point search used for initial coordinates.
const NEAREST_SAMPLES: usize = 2001;

/// Positions beyond this magnitude abort the run.
pub const DIVERGENCE_LIMIT: f64 = 1e6;

#[derive(Debug, Clone, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Load(#[from] Error),
    #[error("run aborted at t = {t}: {source}")]
    Aborted { t: f64, source: Error, partial: Box<Telemetry> },
}

#[derive(Debug, Clone)]
enum Body {
    Usv { state: UsvState, params: UsvParams, reg: UsvRegulator },
    Uav { state: UavState, reg: UavRegulator },
}

#[derive(Debug, Clone)]
struct Agent {
    kind: VehicleKind,
    path: PathSpec,
    gains: GuidanceGains,
    body: Body,
}

impl Agent {
    fn omega(&self) -> f64 {
        match &self.body {
            Body::Usv { state, .. } => state.omega,
            Body::Uav { state, .. } => state.omega,
        }
    }

    fn position(&self) -> DVector<f64> {
        match &self.body {
            Body::Usv { state, .. } => DVector::from_column_slice(state.q.as_slice()),
            Body::Uav { state, .. } => DVector::from_column_slice(state.q.as_slice()),
        }
    }

    fn velocity(&self) -> DVector<f64> {
        match &self.body {
            Body::Usv { state, .. } => DVector::from_column_slice(state.world_velocity().as_slice()),
            Body::Uav { state, .. } => DVector::from_column_slice(state.p.as_slice()),
        }
    }
}

/// A validated, fully initialized scenario ready to run.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub config: ScenarioConfig,
    topology: Topology,
    agents: Vec<Agent>,
}

fn sample_box(rng: &mut ChaCha8Rng, b: &config::BoxConfig) -> Vec<f64> {
    b.min.iter().zip(&b.max).map(|(lo, hi)| if lo < hi { rng.gen_range(*lo..*hi) } else { *lo }).collect()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

impl Scenario {
    pub fn build(config: ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let topology = config.topology.build(config.vehicles.len())?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let place = &config.placement;

        let mut positions: Vec<Option<Vec<f64>>> = config.vehicles.iter().map(|v| v.initial.position.clone()).collect();
        for i in 0..positions.len() {
            if positions[i].is_some() {
                continue;
            }
            let vc = &config.vehicles[i];
            let kind = vc.kind;
            let around;
            let bx = match (place.jitter, kind) {
                (Some(j), _) => {
                    let centre = eval_path(&vc.path.build(kind)?, vc.initial.omega)?;
                    around = config::BoxConfig {
                        min: centre.iter().map(|c| c - j).collect(),
                        max: centre.iter().map(|c| c + j).collect(),
                    };
                    Some(&around)
                }
                (None, VehicleKind::Usv) => place.usv_box.as_ref(),
                (None, VehicleKind::Uav) => place.uav_box.as_ref(),
            }
            .ok_or_else(|| Error::Config(format!("vehicle {} has no initial position and no {} placement box", vc.name, kind.as_str())))?;
            let mut placed = None;
            for _ in 0..10_000 {
                let cand = sample_box(&mut rng, bx);
                let clear = positions.iter().zip(&config.vehicles).all(|(p, v)| match p {
                    Some(p) if v.kind == kind => distance(p, &cand) >= place.min_separation,
                    _ => true,
                });
                if clear {
                    placed = Some(cand);
                    break;
                }
            }
            positions[i] = Some(placed.ok_or_else(|| Error::Config(format!("cannot place {} with the requested separation", config.vehicles[i].name)))?);
        }

        let theta = topology.potentials();
        let rc = &config.regulator;
        let mut agents = Vec::with_capacity(config.vehicles.len());
        for (v, q) in config.vehicles.iter().zip(positions) {
            let q = q.expect("every vehicle placed");
            let path = v.path.build(v.kind)?;
            let qd = DVector::from_column_slice(&q);
            let omega = match place.coordinate {
                CoordinateInit::Given => v.initial.omega,
                CoordinateInit::Nearest => {
                    let period = path.period().ok_or_else(|| Error::Config(format!("path of {} is not periodic", v.name)))?;
                    let w0 = v.initial.omega;
                    let w = closest_parameter(&path, &qd, w0 - 0.5 * period, w0 + 0.5 * period, NEAREST_SAMPLES)?;
                    // Shift by whole periods towards the formation slot
                    // relative to the first vehicle.
                    match agents.first().map(|a: &Agent| a.omega()) {
                        Some(w_first) => {
                            let slot = w_first + theta[agents.len()] - theta[0];
                            w + period * ((slot - w) / period).round()
                        }
                        None => w,
                    }
                }
            };
            let gains_b = v.regulator.unwrap_or(rc.gains);
            let body = match v.kind {
                VehicleKind::Usv => {
                    let psi = match (v.initial.heading, place.heading) {
                        (Some(h), _) => h,
                        (None, HeadingInit::Zero) => 0.0,
                        (None, HeadingInit::Random) => rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                        (None, HeadingInit::Field) => {
                            let phi = path_error(&path, &qd, omega)?;
                            let f = usv_inertial_reference(&phi, &path.tangent(omega)?, &config.gains_for(v))?;
                            f.y.atan2(f.x)
                        }
                    };
                    let vel = v.initial.velocity.as_deref().map_or(Vector2::zeros(), Vector2::from_column_slice);
                    let (u, sway) = to_body_frame(psi, &vel);
                    Body::Usv {
                        state: UsvState { q: Vector2::new(q[0], q[1]), psi, u, v: sway, r: 0.0, omega },
                        params: v.params.unwrap_or(config.usv_params),
                        reg: UsvRegulator::new(gains_b, rc.speed_floor, rc.filter_pole)?,
                    }
                }
                VehicleKind::Uav => Body::Uav {
                    state: UavState {
                        q: Vector3::new(q[0], q[1], q[2]),
                        p: v.initial.velocity.as_deref().map_or(Vector3::zeros(), Vector3::from_column_slice),
                        omega,
                    },
                    reg: UavRegulator::new(gains_b.b4, rc.filter_pole)?,
                },
            };
            agents.push(Agent { kind: v.kind, path, gains: config.gains_for(v), body });
        }
        Ok(Scenario { config, topology, agents })
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn run(mut self) -> std::result::Result<Telemetry, SimError> {
        let steps = self.config.steps();
        let dt = self.config.dt;
        let anchor = self.agents[0].omega();
        let mut telemetry = Telemetry { records: Vec::with_capacity(steps + 1) };
        for n in 0..=steps {
            let t = n as f64 * dt;
            let tick = self.tick(t, anchor).and_then(|(record, inputs)| {
                telemetry.records.push(record);
                if n < steps {
                    self.advance(&inputs)?;
                }
                Ok(())
            });
            if let Err(source) = tick {
                return Err(SimError::Aborted { t, source, partial: Box::new(telemetry) });
            }
        }
        Ok(telemetry)
    }

    fn safety_applies(cfg: &SafetyConfig, a: VehicleKind, b: VehicleKind) -> bool {
        match (a, b) {
            (VehicleKind::Usv, VehicleKind::Usv) => cfg.usv_pairs,
            (VehicleKind::Uav, VehicleKind::Uav) => cfg.uav_pairs,
            _ => cfg.cross_domain,
        }
    }

    /// Separation constraints for agent `i` built from every other agent's
    /// position and velocity at the start of the tick.
    fn filter_velocity(&self, i: usize, nominal: DVector<f64>, positions: &[DVector<f64>], velocities: &[DVector<f64>]) -> Result<DVector<f64>> {
        let cfg = &self.config.safety;
        let me = self.agents[i].kind;
        let own = &positions[i];
        let dim = own.len();
        let mut neighbors = Vec::new();
        for (k, other) in self.agents.iter().enumerate() {
            if k == i || !Self::safety_applies(cfg, me, other.kind) {
                continue;
            }
            // Cross-domain pairs are separated in the horizontal plane only.
            let q = DVector::from_fn(dim, |j, _| if j < 2 { positions[k][j] } else { own[j] });
            let v = DVector::from_fn(dim, |j, _| if j < 2 { velocities[k][j] } else { 0.0 });
            let (q, v) = if other.kind == me { (positions[k].clone(), velocities[k].clone()) } else { (q, v) };
            neighbors.push(NeighborState { q, v });
        }
        let constraints = build_constraints(own, &neighbors, cfg)?;
        qp_filter(&nominal, &constraints)
    }

    fn tick(&mut self, t: f64, anchor: f64) -> Result<(TelemetryRecord, Vec<Input>)> {
        let dt = self.config.dt;
        let omega: Vec<f64> = self.agents.iter().map(Agent::omega).collect();
        let views = exchange(&omega, &self.topology)?;
        let positions: Vec<DVector<f64>> = self.agents.iter().map(Agent::position).collect();
        let velocities: Vec<DVector<f64>> = self.agents.iter().map(Agent::velocity).collect();

        let mut errors: Vec<PathError> = Vec::with_capacity(self.agents.len());
        let mut commands = Vec::with_capacity(self.agents.len());
        // Inertial velocity references after the safety filter.
        let mut references: Vec<DVector<f64>> = Vec::with_capacity(self.agents.len());
        let mut filtered = vec![false; self.agents.len()];
        for (i, agent) in self.agents.iter().enumerate() {
            let w = omega[i];
            let phi = path_error(&agent.path, &positions[i], w)?;
            let tangent = agent.path.tangent(w)?;
            let mut cmd = match &agent.body {
                Body::Usv { state, .. } => usv_guidance(state.psi, &phi, &tangent, &views[i], &self.topology, &agent.gains)?,
                Body::Uav { .. } => uav_guidance(&phi, &tangent, &views[i], &self.topology, &agent.gains)?,
            };
            let mut reference = match &cmd {
                GuidanceCommand::Usv { .. } => {
                    DVector::from_column_slice(usv_inertial_reference(&phi, &tangent, &agent.gains)?.as_slice())
                }
                GuidanceCommand::Uav { p_r, .. } => DVector::from_column_slice(p_r.as_slice()),
            };
            if self.config.safety.enabled {
                let safe = self.filter_velocity(i, reference.clone(), &positions, &velocities)?;
                if safe != reference {
                    filtered[i] = true;
                    cmd = match (cmd, &agent.body) {
                        (GuidanceCommand::Usv { u_omega, .. }, Body::Usv { state, .. }) => {
                            let (u_r, v_r) = to_body_frame(state.psi, &Vector2::new(safe[0], safe[1]));
                            GuidanceCommand::Usv { u_r, v_r, u_omega }
                        }
                        (GuidanceCommand::Uav { u_omega, .. }, _) => {
                            GuidanceCommand::Uav { p_r: Vector3::new(safe[0], safe[1], safe[2]), u_omega }
                        }
                        (c, _) => c,
                    };
                    reference = safe;
                }
            }
            errors.push(phi);
            commands.push(cmd);
            references.push(reference);
        }

        let tilde = coordinate_errors(&omega, anchor, t, &self.topology)?;
        let lyapunov = if self.topology.is_undirected() {
            let gains: Vec<GuidanceGains> = self.agents.iter().map(|a| a.gains.clone()).collect();
            Some(lyapunov_value(&errors, &tilde, &self.topology, &gains)?)
        } else {
            None
        };

        let limit = self.config.regulator.actuator_limit;
        let saturate = |x: f64, hit: &mut bool| match limit {
            Some(l) if x.abs() > l => {
                *hit = true;
                x.clamp(-l, l)
            }
            _ => x,
        };

        let mut inputs = Vec::with_capacity(self.agents.len());
        let mut samples = Vec::with_capacity(self.agents.len());
        for (i, agent) in self.agents.iter_mut().enumerate() {
            let mut flags = Flags { filtered: filtered[i], ..Flags::default() };
            let residuals: Vec<f64> =
                views[i].received.iter().map(|&(k, wk)| self.topology.residual(i, k, omega[i], wk)).collect();
            let u_omega = commands[i].u_omega();
            // Only the communicated part of the coordinate rate is held over
            // the step; the own-path part is re-evaluated in every stage.
            let held = u_omega - path_coordinate_rate(&errors[i], &agent.path.tangent(omega[i])?, &agent.gains)?;
            let (input, sample) = match (&mut agent.body, commands[i]) {
                (Body::Usv { state, params, reg }, GuidanceCommand::Usv { u_r, v_r, .. }) => {
                    let act = reg.step(state, params, &Vector2::new(references[i][0], references[i][1]), dt)?;
                    flags.clamped = act.clamped;
                    let tau = (saturate(act.tau_u, &mut flags.saturated), saturate(act.tau_r, &mut flags.saturated));
                    let sample = VehicleSample {
                        id: i,
                        kind: agent.kind,
                        q: vec![state.q.x, state.q.y],
                        body: Some([state.psi, state.u, state.v, state.r]),
                        p: None,
                        omega: state.omega,
                        phi: errors[i].phi.iter().copied().collect(),
                        cmd: vec![u_r, v_r],
                        u_omega,
                        tau: vec![tau.0, tau.1],
                        residuals,
                        omega_tilde: Some(tilde[i]),
                        flags,
                    };
                    (Input::Usv { tau, held }, sample)
                }
                (Body::Uav { state, reg }, GuidanceCommand::Uav { p_r, .. }) => {
                    let raw = reg.step(state, &p_r, dt)?;
                    let accel = raw.map(|x| saturate(x, &mut flags.saturated));
                    let sample = VehicleSample {
                        id: i,
                        kind: agent.kind,
                        q: state.q.iter().copied().collect(),
                        body: None,
                        p: Some([state.p.x, state.p.y, state.p.z]),
                        omega: state.omega,
                        phi: errors[i].phi.iter().copied().collect(),
                        cmd: p_r.iter().copied().collect(),
                        u_omega,
                        tau: accel.iter().copied().collect(),
                        residuals,
                        omega_tilde: Some(tilde[i]),
                        flags,
                    };
                    (Input::Uav { accel, held }, sample)
                }
                _ => unreachable!("guidance command matches the vehicle type"),
            };
            inputs.push(input);
            samples.push(sample);
        }
        Ok((TelemetryRecord { t, lyapunov, vehicles: samples }, inputs))
    }

    fn advance(&mut self, inputs: &[Input]) -> Result<()> {
        let dt = self.config.dt;
        for (i, (agent, input)) in self.agents.iter_mut().zip(inputs).enumerate() {
            let (path, gains) = (&agent.path, &agent.gains);
            match (&mut agent.body, *input) {
                (Body::Usv { state, params, .. }, Input::Usv { tau, held }) => {
                    let p = *params;
                    *state = integrate_step(
                        |s| {
                            let q = DVector::from_column_slice(s.q.as_slice());
                            let w = held + own_rate(path, gains, &q, s.omega)?;
                            usv_derivative(s, &p, tau, w)
                        },
                        state,
                        dt,
                    )?;
                }
                (Body::Uav { state, .. }, Input::Uav { accel, held }) => {
                    *state = integrate_step(
                        |s| {
                            let q = DVector::from_column_slice(s.q.as_slice());
                            uav_derivative(s, &accel, held + own_rate(path, gains, &q, s.omega)?)
                        },
                        state,
                        dt,
                    )?;
                }
                _ => unreachable!("inputs are built per vehicle type"),
            }
            let q = agent.position();
            if q.iter().any(|x| !x.is_finite() || x.abs() > DIVERGENCE_LIMIT) || !agent.omega().is_finite() {
                return Err(Error::Diverged(format!("vehicle {i} left the bounded region")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
enum Input {
    Usv { tau: (f64, f64), held: f64 },
    Uav { accel: Vector3<f64>, held: f64 },
}

fn own_rate(path: &PathSpec, gains: &GuidanceGains, q: &DVector<f64>, w: f64) -> Result<f64> {
    path_coordinate_rate(&path_error(path, q, w)?, &path.tangent(w)?, gains)
}

/// Builds and runs a scenario.
pub fn run_scenario(config: &ScenarioConfig) -> std::result::Result<Telemetry, SimError> {
    Scenario::build(config.clone())?.run()
}
