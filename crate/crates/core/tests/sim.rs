use gvf_fleet::sim::telemetry::{Flags, Telemetry, TelemetryRecord, VehicleSample};
use gvf_fleet::sim::{compute_metrics, run_scenario, scenarios, Scenario, ScenarioConfig, SimError, VehicleKind};
use gvf_fleet::Error;
use serde_json::json;

fn config(value: serde_json::Value) -> ScenarioConfig {
    ScenarioConfig::from_json(&value.to_string()).unwrap()
}

fn single_on_line(kind: &str, duration: f64) -> ScenarioConfig {
    let (point, direction, velocity) = match kind {
        "uav" => (json!([1.0, -2.0, 5.0]), json!([0.6, 0.8, 0.0]), json!([-0.6, -0.8, 0.0])),
        _ => (json!([1.0, -2.0]), json!([0.6, 0.8]), json!([-0.6, -0.8])),
    };
    let omega: f64 = 3.0;
    let start: Vec<f64> = point
        .as_array()
        .unwrap()
        .iter()
        .zip(direction.as_array().unwrap())
        .map(|(p, d)| p.as_f64().unwrap() + omega * d.as_f64().unwrap())
        .collect();
    config(json!({
        "name": "single",
        "dt": 0.01,
        "duration": duration,
        "vehicles": [{
            "name": "v",
            "type": kind,
            "path": {"kind": "line", "point": point, "direction": direction},
            "initial": {"position": start, "velocity": velocity, "heading": (-0.8f64).atan2(-0.6), "omega": omega}
        }],
        "topology": {"edges": []}
    }))
}

fn short_circular(duration: f64) -> ScenarioConfig {
    let mut cfg = scenarios::circular_6().unwrap();
    cfg.duration = duration;
    cfg
}

#[test]
fn zero_duration_gives_the_initial_record() {
    let tel = run_scenario(&short_circular(0.0)).unwrap();
    assert_eq!(tel.len(), 1);
    assert_eq!(tel.records[0].t, 0.0);
    assert_eq!(tel.records[0].vehicles.len(), 6);
}

#[test]
fn one_record_per_tick() {
    let tel = run_scenario(&short_circular(2.0)).unwrap();
    assert_eq!(tel.len(), 201);
    assert!(tel.records.windows(2).all(|w| w[1].t > w[0].t));
    assert!((tel.records[200].t - 2.0).abs() < 1e-9);
}

#[test]
fn on_path_vehicles_stay_on_a_line() {
    for kind in ["uav", "usv"] {
        let tel = run_scenario(&single_on_line(kind, 20.0)).unwrap();
        let worst = tel.records.iter().map(|r| r.vehicles[0].phi_norm()).fold(0.0, f64::max);
        assert!(worst < 1e-6, "{kind}: {worst}");
        let m = compute_metrics(&tel).unwrap();
        let rate = m.vehicles[0].omega_rate_mean.unwrap();
        assert!((rate + 1.0).abs() < 1e-6, "{kind}: {rate}");
    }
}

#[test]
fn recorded_coordinate_rate_follows_the_command() {
    let tel = run_scenario(&short_circular(40.0)).unwrap();
    let dt = tel.dt().unwrap();
    for w in tel.records.windows(2).skip(2000) {
        for (a, b) in w[0].vehicles.iter().zip(&w[1].vehicles) {
            let rate = (b.omega - a.omega) / dt;
            assert!((rate - a.u_omega).abs() < 0.02, "t = {}: {rate} vs {}", w[0].t, a.u_omega);
        }
    }
}

#[test]
fn identical_configs_give_identical_csv() {
    let cfg = short_circular(10.0);
    let a = run_scenario(&cfg).unwrap().to_csv_string().unwrap();
    let b = run_scenario(&cfg).unwrap().to_csv_string().unwrap();
    assert_eq!(a, b);
    let mut other = cfg.clone();
    other.seed += 1;
    assert_ne!(a, run_scenario(&other).unwrap().to_csv_string().unwrap());
}

#[test]
fn metrics_survive_a_csv_round_trip() {
    let mut cfg = scenarios::lissajous_10().unwrap();
    cfg.duration = 5.0;
    let tel = run_scenario(&cfg).unwrap();
    let csv = tel.to_csv_string().unwrap();
    let back = Telemetry::read_csv(csv.as_bytes()).unwrap();
    assert_eq!(back, tel);
    assert_eq!(compute_metrics(&back).unwrap(), compute_metrics(&tel).unwrap());
}

#[test]
fn header_starts_with_time() {
    let csv = run_scenario(&short_circular(0.1)).unwrap().to_csv_string().unwrap();
    let header = csv.lines().next().unwrap();
    assert!(header.starts_with("t,id,type,"));
    assert_eq!(csv.lines().count(), 1 + 11 * 6);
}

fn sample(id: usize, omega: f64, phi: f64) -> VehicleSample {
    VehicleSample {
        id,
        kind: VehicleKind::Uav,
        q: vec![0.0; 3],
        body: None,
        p: Some([0.0; 3]),
        omega,
        phi: vec![phi, 0.0, 0.0],
        cmd: vec![0.0; 3],
        u_omega: -1.0,
        tau: vec![0.0; 3],
        residuals: vec![0.0],
        omega_tilde: Some(0.0),
        flags: Flags::default(),
    }
}

#[test]
fn two_records_give_unit_rate() {
    let dt = 0.01;
    let tel = Telemetry {
        records: vec![
            TelemetryRecord { t: 0.0, lyapunov: Some(0.0), vehicles: vec![sample(0, 0.0, 0.0)] },
            TelemetryRecord { t: dt, lyapunov: Some(0.0), vehicles: vec![sample(0, -dt, 0.0)] },
        ],
    };
    let m = compute_metrics(&tel).unwrap();
    assert_eq!(m.vehicles[0].omega_rate_mean, Some(-1.0));
    assert_eq!(m.dt, Some(dt));
}

#[test]
fn on_path_telemetry_settles_at_once() {
    let records = (0..5)
        .map(|k| TelemetryRecord { t: k as f64 * 0.1, lyapunov: Some(0.0), vehicles: vec![sample(0, 0.0, 0.0), sample(1, 0.0, 0.0)] })
        .collect();
    let m = compute_metrics(&Telemetry { records }).unwrap();
    assert_eq!(m.path_settle_time, Some(0.0));
    assert_eq!(m.residual_settle_time, Some(0.0));
    assert_eq!(m.final_max_residual, 0.0);
}

#[test]
fn empty_telemetry_is_rejected() {
    assert!(matches!(compute_metrics(&Telemetry::default()), Err(Error::InvalidArgument(_))));
}

#[test]
fn disconnected_topology_fails_to_load() {
    let mut cfg = short_circular(1.0);
    cfg.topology.preset = None;
    cfg.topology.edges = vec![serde_json::from_value(json!({"agent": 0, "neighbor": 1})).unwrap()];
    assert!(matches!(Scenario::build(cfg.clone()), Err(Error::Disconnected(_))));
    assert!(matches!(run_scenario(&cfg), Err(SimError::Load(Error::Disconnected(_)))));
}

#[test]
fn bad_step_is_a_config_error() {
    let mut cfg = short_circular(1.0);
    cfg.dt = 0.0;
    assert!(matches!(Scenario::build(cfg), Err(Error::Config(_))));
    let mut cfg = short_circular(1.0);
    cfg.duration = 1.005;
    assert!(matches!(Scenario::build(cfg), Err(Error::Config(_))));
}

#[test]
fn filter_keeps_converging_vehicles_apart() {
    // Two aerial vehicles asked to occupy the same point of one circle.
    let cfg = config(json!({
        "name": "encounter",
        "dt": 0.01,
        "duration": 30.0,
        "vehicles": [
            {"name": "a", "type": "uav", "path": {"kind": "circle", "center": [0.0, 0.0], "radius": 10.0, "altitude": 5.0},
             "initial": {"position": [10.0, -3.0, 5.0], "omega": -0.3}},
            {"name": "b", "type": "uav", "path": {"kind": "circle", "center": [0.0, 0.0], "radius": 10.0, "altitude": 5.0},
             "initial": {"position": [10.0, 3.0, 5.0], "omega": 0.3}}
        ],
        "topology": {"edges": [{"agent": 0, "neighbor": 1}, {"agent": 1, "neighbor": 0}]},
        "safety": {"enabled": true, "radius": 2.0, "gamma": 1.0}
    }));
    let tel = run_scenario(&cfg).unwrap();
    let m = compute_metrics(&tel).unwrap();
    let engaged = tel.records.iter().filter(|r| r.vehicles.iter().any(|v| v.flags.filtered)).count();
    assert!(engaged > 0, "{engaged} {:?}", m.min_distance_uav);
    assert!(m.min_distance_uav.unwrap() >= 2.0 - 0.05, "{:?}", m.min_distance_uav);

    let mut free = cfg.clone();
    free.safety.enabled = false;
    let m = compute_metrics(&run_scenario(&free).unwrap()).unwrap();
    assert!(m.min_distance_uav.unwrap() < 1.5, "{:?}", m.min_distance_uav);
}
