//! JSON scenario description.

use std::sync::Arc;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::guidance::GuidanceGains;
use crate::network::{Edge, Topology};
use crate::paths::{Circle, CustomPath, Lissajous, PathSpec};
use crate::regulator::{RegulatorGains, DEFAULT_FILTER_POLE, DEFAULT_SPEED_FLOOR};
use crate::safety::SafetyConfig;
use crate::vehicles::UsvParams;

fn config(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VehicleKind {
    Usv,
    Uav,
}

impl VehicleKind {
    pub fn as_str(self) -> &'static str {
        match self {
            VehicleKind::Usv => "usv",
            VehicleKind::Uav => "uav",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            VehicleKind::Usv => 2,
            VehicleKind::Uav => 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathConfig {
    Circle {
        center: [f64; 2],
        radius: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        altitude: Option<f64>,
    },
    /// The figure-eight family; the vertical axis is added for aerial vehicles.
    FigureEight { lateral_offset: f64 },
    Lissajous { amplitudes: Vec<f64>, frequencies: Vec<f64>, phases: Vec<f64>, offsets: Vec<f64> },
    /// Straight line `f(ω) = point + ω·direction`.
    Line { point: Vec<f64>, direction: Vec<f64> },
}

impl PathConfig {
    pub fn build(&self, kind: VehicleKind) -> Result<PathSpec> {
        let path = match self {
            PathConfig::Circle { center, radius, altitude } => {
                PathSpec::Circle(Circle { center: *center, radius: *radius, altitude: *altitude })
            }
            PathConfig::FigureEight { lateral_offset } => {
                PathSpec::Lissajous(Lissajous::figure_eight(*lateral_offset, kind == VehicleKind::Uav))
            }
            PathConfig::Lissajous { amplitudes, frequencies, phases, offsets } => PathSpec::Lissajous(Lissajous {
                amplitudes: amplitudes.clone(),
                frequencies: frequencies.clone(),
                phases: phases.clone(),
                offsets: offsets.clone(),
            }),
            PathConfig::Line { point, direction } => line(point, direction)?,
        };
        path.validate()?;
        if path.dim() != kind.dim() {
            return Err(config(format!("{} needs a {}-dimensional path, got {}", kind.as_str(), kind.dim(), path.dim())));
        }
        Ok(path)
    }
}

fn line(point: &[f64], direction: &[f64]) -> Result<PathSpec> {
    if point.len() != direction.len() || point.iter().chain(direction).any(|x| !x.is_finite()) {
        return Err(config("line point and direction must be finite and of equal length"));
    }
    if direction.iter().all(|x| *x == 0.0) {
        return Err(config("line direction must be nonzero"));
    }
    let (p, d) = (DVector::from_column_slice(point), DVector::from_column_slice(direction));
    let dim = p.len();
    let dd = d.clone();
    Ok(PathSpec::Custom(CustomPath {
        dim,
        f: Arc::new(move |w| &p + &d * w),
        df: Arc::new(move |_| dd.clone()),
        ddf: Arc::new(move |_| DVector::zeros(dim)),
    }))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitialConfig {
    /// Drawn from the placement box when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<Vec<f64>>,
    /// Vessel heading; drawn uniformly when absent and placement asks for it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub heading: Option<f64>,
    /// Inertial velocity; zero when absent. Vessels start without yaw rate.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub velocity: Option<Vec<f64>>,
    pub omega: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VehicleConfig {
    pub name: String,
    #[serde(rename = "type")]
    pub kind: VehicleKind,
    pub path: PathConfig,
    #[serde(default)]
    pub initial: InitialConfig,
    /// Overrides the scenario-wide guidance gains.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gains: Option<GuidanceGains>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub params: Option<UsvParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regulator: Option<RegulatorGains>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GuidanceDefaults {
    pub k: f64,
    pub c: f64,
}

impl Default for GuidanceDefaults {
    fn default() -> Self {
        GuidanceDefaults { k: 1.5, c: 2.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegulatorConfig {
    pub gains: RegulatorGains,
    pub speed_floor: f64,
    pub filter_pole: f64,
    /// Symmetric bound on every actuator input; unbounded when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actuator_limit: Option<f64>,
}

impl Default for RegulatorConfig {
    fn default() -> Self {
        RegulatorConfig {
            gains: RegulatorGains::default(),
            speed_floor: DEFAULT_SPEED_FLOOR,
            filter_pole: DEFAULT_FILTER_POLE,
            actuator_limit: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxConfig {
    pub min: Vec<f64>,
    pub max: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub usv_box: Option<BoxConfig>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub uav_box: Option<BoxConfig>,
    /// Half-width of a box around each vehicle's own path point at its
    /// configured coordinate; takes precedence over the domain boxes.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub jitter: Option<f64>,
    /// Minimum distance between same-domain vehicles at start.
    pub min_separation: f64,
    /// Heading of vessels without an explicit initial heading.
    pub heading: HeadingInit,
    /// How the configured initial coordinates are used.
    pub coordinate: CoordinateInit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoordinateInit {
    /// Exactly as configured.
    #[default]
    Given,
    /// Moved to the path point closest to the start position, searching one
    /// period centred on the configured value.
    Nearest,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HeadingInit {
    /// Due east.
    #[default]
    Zero,
    /// Uniform on `[−π, π)`.
    Random,
    /// Along the initial guidance velocity.
    Field,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        PlacementConfig { usv_box: None, uav_box: None, jitter: None, min_separation: 0.0, heading: HeadingInit::Zero, coordinate: CoordinateInit::Given }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyPreset {
    Ring,
    Chain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EdgeConfig {
    pub agent: usize,
    pub neighbor: usize,
    #[serde(default = "unit")]
    pub weight: f64,
    #[serde(default)]
    pub delta: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologyConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<TopologyPreset>,
    /// Displacement between consecutive vehicles of a preset.
    #[serde(default)]
    pub step: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub edges: Vec<EdgeConfig>,
    #[serde(default = "yes")]
    pub undirected: bool,
    /// Coordinates are compared modulo this period when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub period: Option<f64>,
}

fn yes() -> bool {
    true
}

impl TopologyConfig {
    pub fn build(&self, n: usize) -> Result<Topology> {
        let topo = match (self.preset, self.edges.is_empty()) {
            (Some(_), false) => return Err(config("topology takes either a preset or an edge list, not both")),
            (Some(TopologyPreset::Ring), true) => Topology::ring(n, self.step, self.period)?,
            (Some(TopologyPreset::Chain), true) => Topology::chain(n, self.step, self.period)?,
            (None, _) => {
                let edges: Vec<Edge> = self
                    .edges
                    .iter()
                    .map(|e| Edge { agent: e.agent, neighbor: e.neighbor, weight: e.weight, delta: e.delta })
                    .collect();
                Topology::from_edges(n, &edges, self.undirected, self.period)?
            }
        };
        if !topo.has_spanning_tree() {
            return Err(Error::Disconnected(format!("{n} vehicles, {} edges", self.edges.len())));
        }
        Ok(topo)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub telemetry: String,
    pub metrics: String,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { telemetry: "telemetry.csv".into(), metrics: "metrics.json".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub dt: f64,
    pub duration: f64,
    #[serde(default)]
    pub seed: u64,
    pub vehicles: Vec<VehicleConfig>,
    pub topology: TopologyConfig,
    #[serde(default)]
    pub guidance: GuidanceDefaults,
    #[serde(default)]
    pub regulator: RegulatorConfig,
    #[serde(default)]
    pub usv_params: UsvParams,
    #[serde(default)]
    pub placement: PlacementConfig,
    #[serde(default)]
    pub safety: SafetyConfig,
    #[serde(default)]
    pub outputs: OutputConfig,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config(e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    /// Number of integration steps; the record count is one more.
    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn gains_for(&self, v: &VehicleConfig) -> GuidanceGains {
        v.gains.clone().unwrap_or_else(|| GuidanceGains::uniform(v.kind.dim(), self.guidance.k, self.guidance.c))
    }

    /// Checks everything that can be checked without building the fleet.
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(config(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.duration >= 0.0) || !self.duration.is_finite() {
            return Err(config(format!("duration must be nonnegative, got {}", self.duration)));
        }
        let ratio = self.duration / self.dt;
        if (ratio - ratio.round()).abs() > 1e-6 * ratio.max(1.0) {
            return Err(config(format!("duration {} is not a multiple of dt {}", self.duration, self.dt)));
        }
        if self.vehicles.is_empty() {
            return Err(config("scenario has no vehicles"));
        }
        self.usv_params.validate()?;
        self.regulator.gains.validate()?;
        if !(self.regulator.speed_floor > 0.0) || !(self.regulator.filter_pole > 0.0) {
            return Err(config("speed floor and filter pole must be positive"));
        }
        if let Some(limit) = self.regulator.actuator_limit {
            if !(limit > 0.0) {
                return Err(config("actuator limit must be positive"));
            }
        }
        if self.safety.enabled {
            self.safety.validate()?;
        }
        for v in &self.vehicles {
            v.path.build(v.kind).map_err(|e| config(format!("vehicle {}: {e}", v.name)))?;
            self.gains_for(v).validate(v.kind.dim()).map_err(|e| config(format!("vehicle {}: {e}", v.name)))?;
            if let Some(p) = &v.params {
                p.validate()?;
            }
            if let Some(g) = &v.regulator {
                g.validate()?;
            }
            if let Some(pos) = &v.initial.position {
                if pos.len() != v.kind.dim() {
                    return Err(config(format!("vehicle {}: initial position needs {} entries", v.name, v.kind.dim())));
                }
            }
            if let Some(vel) = &v.initial.velocity {
                if vel.len() != v.kind.dim() || vel.iter().any(|x| !x.is_finite()) {
                    return Err(config(format!("vehicle {}: initial velocity needs {} finite entries", v.name, v.kind.dim())));
                }
            }
        }
        if let Some(j) = self.placement.jitter {
            if !(j >= 0.0) || !j.is_finite() {
                return Err(config(format!("placement jitter must be nonnegative, got {j}")));
            }
        }
        for (kind, b) in [(VehicleKind::Usv, &self.placement.usv_box), (VehicleKind::Uav, &self.placement.uav_box)] {
            if let Some(b) = b {
                if b.min.len() != kind.dim() || b.max.len() != kind.dim() || b.min.iter().zip(&b.max).any(|(lo, hi)| !(lo <= hi)) {
                    return Err(config(format!("{} placement box is malformed", kind.as_str())));
                }
            }
        }
        self.topology.build(self.vehicles.len())?;
        Ok(())
    }
}
