//! Energy-like diagnostic for the closed loop.
//!
//! `V = ½(ΦᵀKΦ + ω̃ᵀC𝓛ω̃)` with `Φ` the stacked path errors and `ω̃` the
//! coordinate errors against a reference that decreases at unit rate,
//! anchored at vehicle 0 and spread by the prescribed displacements.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Error, Result};
use crate::guidance::{desired_coordinate_rate, GuidanceGains};
use crate::network::Topology;
use crate::paths::PathError;

/// `ω̃_i = ω_i − ω_i*(t)` with `ω_i* = ω_0(0) + s·t + θ_i`.
pub fn coordinate_errors(omega: &[f64], anchor: f64, t: f64, topology: &Topology) -> Result<Vec<f64>> {
    if omega.len() != topology.len() {
        return Err(invalid("one coordinate per vehicle expected"));
    }
    let theta = topology.potentials();
    let base = anchor + desired_coordinate_rate() * t;
    Ok(omega.iter().zip(&theta).map(|(w, th)| w - base - th).collect())
}

pub fn lyapunov_value(errors: &[PathError], omega_tilde: &[f64], topology: &Topology, gains: &[GuidanceGains]) -> Result<f64> {
    let n = topology.len();
    if !topology.is_undirected() {
        return Err(Error::Unsupported("the diagnostic needs an undirected topology".into()));
    }
    if errors.len() != n || omega_tilde.len() != n || gains.len() != n {
        return Err(invalid("one error, coordinate error and gain set per vehicle expected"));
    }
    let total: usize = errors.iter().map(|e| e.phi.len()).sum();
    let mut k = DMatrix::zeros(total, total);
    let mut phi = DVector::zeros(total);
    let mut row = 0;
    for (e, g) in errors.iter().zip(gains) {
        if g.k.len() != e.phi.len() {
            return Err(invalid("gain count does not match error dimension"));
        }
        for j in 0..e.phi.len() {
            k[(row, row)] = g.k[j];
            phi[row] = e.phi[j];
            row += 1;
        }
    }
    let c = DMatrix::from_diagonal(&DVector::from_iterator(n, gains.iter().map(|g| g.c)));
    let w = DVector::from_column_slice(omega_tilde);
    let path = (phi.transpose() * &k * &phi)[(0, 0)];
    let coord = (w.transpose() * c * topology.laplacian() * &w)[(0, 0)];
    Ok(0.5 * (path + coord))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Edge;
    use proptest::prelude::*;
    use std::f64::consts::{PI, TAU};

    fn err(x: &[f64]) -> PathError {
        PathError { phi: DVector::from_column_slice(x) }
    }

    #[test]
    fn zero_on_the_formation() {
        let topo = Topology::ring(6, 2.0 * PI / 3.0, Some(TAU)).unwrap();
        let omega: Vec<f64> = (0..6).map(|i| 3.0 - 2.5 - i as f64 * 2.0 * PI / 3.0).collect();
        let tilde = coordinate_errors(&omega, 3.0, 2.5, &topo).unwrap();
        assert!(tilde.iter().all(|x| x.abs() < 1e-12), "{tilde:?}");
        let errors: Vec<PathError> = (0..6).map(|_| err(&[0.0, 0.0])).collect();
        let gains = vec![GuidanceGains::uniform(2, 1.5, 2.0); 6];
        assert!(lyapunov_value(&errors, &tilde, &topo, &gains).unwrap().abs() < 1e-20);
    }

    #[test]
    fn single_vessel_off_path() {
        let topo = Topology::from_edges(1, &[], true, None).unwrap();
        let v = lyapunov_value(&[err(&[2.0, 0.0])], &[0.0], &topo, &[GuidanceGains::uniform(2, 1.5, 2.0)]).unwrap();
        assert_eq!(v, 3.0);
    }

    #[test]
    fn directed_topology_unsupported() {
        let topo = Topology::chain(3, 0.0, None).unwrap();
        let e = vec![err(&[0.0, 0.0]); 3];
        let g = vec![GuidanceGains::uniform(2, 1.0, 1.0); 3];
        assert!(matches!(lyapunov_value(&e, &[0.0; 3], &topo, &g), Err(Error::Unsupported(_))));
    }

    proptest! {
        #[test]
        fn matches_edge_sum_oracle(
            phis in proptest::collection::vec(-3.0f64..3.0, 13),
            tilde in proptest::collection::vec(-2.0f64..2.0, 5),
            ks in proptest::collection::vec(0.1f64..3.0, 13),
            cs in proptest::collection::vec(0.1f64..3.0, 5),
        ) {
            // Vehicles 0..2 planar, 3..4 spatial.
            let edges: Vec<Edge> = [(0, 1, 1.0), (1, 2, 0.5), (2, 3, 2.0), (3, 4, 1.0), (4, 0, 1.5), (0, 2, 0.7)]
                .iter()
                .map(|&(agent, neighbor, weight)| Edge { agent, neighbor, weight, delta: 0.0 })
                .collect();
            let topo = Topology::from_edges(5, &edges, true, None).unwrap();
            let dims = [2usize, 2, 2, 3, 3];
            let mut errors = Vec::new();
            let mut gains = Vec::new();
            let mut off = 0;
            let mut oracle = 0.0;
            for (i, &d) in dims.iter().enumerate() {
                errors.push(err(&phis[off..off + d]));
                gains.push(GuidanceGains { k: ks[off..off + d].to_vec(), c: cs[i] });
                for j in off..off + d {
                    oracle += ks[j] * phis[j] * phis[j];
                }
                off += d;
            }
            for i in 0..5 {
                for k in 0..5 {
                    oracle += cs[i] * topo.weight(i, k) * tilde[i] * (tilde[i] - tilde[k]);
                }
            }
            oracle *= 0.5;
            let v = lyapunov_value(&errors, &tilde, &topo, &gains).unwrap();
            prop_assert!((v - oracle).abs() < 1e-10 * (1.0 + oracle.abs()));
        }
    }
}
