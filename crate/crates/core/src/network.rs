//! Communication graph, Laplacian machinery and the per-tick exchange of
//! virtual coordinates.
//!
//! Convention: `a[i][k] > 0` means vehicle `i` listens to vehicle `k`
//! (`k ∈ 𝓝_i`), so information flows `k → i`. The prescribed displacement
//! `Δ_{i,k}` is the target value of `ω_i − ω_k`.

use std::collections::VecDeque;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{invalid, Error, Result};

/// One directed listening relation: `agent` receives `neighbor`'s coordinate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub agent: usize,
    pub neighbor: usize,
    pub weight: f64,
    pub delta: f64,
}

/// Immutable communication topology.
#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    adjacency: DMatrix<f64>,
    laplacian: DMatrix<f64>,
    neighbors: Vec<Vec<usize>>,
    delta: DMatrix<f64>,
    period: Option<f64>,
}

/// `x` reduced into `[−P/2, P/2]` when a period is declared.
pub fn wrap_to_period(x: f64, period: Option<f64>) -> f64 {
    match period {
        Some(p) => x - p * (x / p).round(),
        None => x,
    }
}

fn check_adjacency(a: &DMatrix<f64>) -> Result<()> {
    if !a.is_square() {
        return Err(invalid(format!("adjacency must be square, got {}x{}", a.nrows(), a.ncols())));
    }
    for i in 0..a.nrows() {
        for j in 0..a.ncols() {
            let w = a[(i, j)];
            if !w.is_finite() || w < 0.0 {
                return Err(invalid(format!("adjacency weight a[{i}][{j}] = {w} must be finite and nonnegative")));
            }
            if i == j && w != 0.0 {
                return Err(invalid(format!("adjacency diagonal a[{i}][{i}] must be zero")));
            }
        }
    }
    Ok(())
}

/// `l_ii = Σ_s a_is`, `l_ij = −a_ij`.
pub fn build_laplacian(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    check_adjacency(a)?;
    let n = a.nrows();
    let mut l = -a.clone();
    for i in 0..n {
        l[(i, i)] = a.row(i).sum();
    }
    Ok(l)
}

/// True iff some vertex reaches every other vertex along the direction of
/// information flow.
pub fn has_spanning_tree(a: &DMatrix<f64>) -> bool {
    let n = a.nrows();
    if n == 0 || !a.is_square() {
        return false;
    }
    (0..n).any(|root| {
        let mut seen = vec![false; n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        let mut count = 1;
        while let Some(j) = queue.pop_front() {
            for i in 0..n {
                if !seen[i] && a[(i, j)] > 0.0 {
                    seen[i] = true;
                    count += 1;
                    queue.push_back(i);
                }
            }
        }
        count == n
    })
}

impl Topology {
    /// Builds a topology from directed edges. With `undirected`, each edge
    /// also inserts its reverse with displacement `−Δ`.
    pub fn from_edges(n: usize, edges: &[Edge], undirected: bool, period: Option<f64>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("topology needs at least one vehicle"));
        }
        if let Some(p) = period {
            if !(p > 0.0 && p.is_finite()) {
                return Err(invalid(format!("period must be positive, got {p}")));
            }
        }
        let mut adjacency = DMatrix::zeros(n, n);
        let mut delta = DMatrix::zeros(n, n);
        let mut set = vec![vec![false; n]; n];
        let mut insert = |i: usize, k: usize, w: f64, d: f64| -> Result<()> {
            if i >= n || k >= n {
                return Err(invalid(format!("edge ({i}, {k}) out of range for {n} vehicles")));
            }
            if i == k {
                return Err(invalid(format!("self-loop on vehicle {i}")));
            }
            if !(w > 0.0 && w.is_finite()) {
                return Err(invalid(format!("edge ({i}, {k}) weight must be positive, got {w}")));
            }
            if !d.is_finite() {
                return Err(invalid(format!("edge ({i}, {k}) displacement must be finite")));
            }
            if set[i][k] && (adjacency[(i, k)] != w || delta[(i, k)] != d) {
                return Err(Error::Config(format!("edge ({i}, {k}) given twice with different values")));
            }
            set[i][k] = true;
            adjacency[(i, k)] = w;
            delta[(i, k)] = d;
            Ok(())
        };
        for e in edges {
            insert(e.agent, e.neighbor, e.weight, e.delta)?;
            if undirected {
                insert(e.neighbor, e.agent, e.weight, -e.delta)?;
            }
        }
        let laplacian = build_laplacian(&adjacency)?;
        let neighbors = (0..n).map(|i| (0..n).filter(|&k| adjacency[(i, k)] > 0.0).collect()).collect();
        let mut topo = Topology { adjacency, laplacian, neighbors, delta, period };
        topo.check_displacements()?;
        if period.is_some() {
            // Replace each displacement by the potential difference it
            // equals modulo the period, so residuals stay linear in ω.
            let theta = topo.potentials();
            for i in 0..n {
                for k in 0..n {
                    if topo.adjacency[(i, k)] > 0.0 {
                        topo.delta[(i, k)] = theta[i] - theta[k];
                    }
                }
            }
        }
        Ok(topo)
    }

    /// Undirected ring `0 – 1 – … – n−1 – 0` with `Δ_{i,i+1} = step`.
    pub fn ring(n: usize, step: f64, period: Option<f64>) -> Result<Self> {
        if n < 3 {
            return Err(invalid("a ring needs at least three vehicles"));
        }
        let edges: Vec<Edge> =
            (0..n).map(|i| Edge { agent: i, neighbor: (i + 1) % n, weight: 1.0, delta: step }).collect();
        Topology::from_edges(n, &edges, true, period)
    }

    /// Directed chain where vehicle `i+1` listens to vehicle `i`, with
    /// `Δ_{i,i+1} = step` (so `Δ_{i+1,i} = −step`).
    pub fn chain(n: usize, step: f64, period: Option<f64>) -> Result<Self> {
        let edges: Vec<Edge> =
            (0..n.saturating_sub(1)).map(|i| Edge { agent: i + 1, neighbor: i, weight: 1.0, delta: -step }).collect();
        Topology::from_edges(n, &edges, false, period)
    }

    fn check_displacements(&self) -> Result<()> {
        let n = self.len();
        let tol = |d: f64| 1e-9 * (1.0 + d.abs());
        for i in 0..n {
            for k in 0..n {
                if self.adjacency[(i, k)] > 0.0 && self.adjacency[(k, i)] > 0.0 {
                    let (a, b) = (self.delta[(i, k)], self.delta[(k, i)]);
                    if (a + b).abs() > tol(a) {
                        return Err(Error::Config(format!("Δ[{i}][{k}] = {a} is not the negative of Δ[{k}][{i}] = {b}")));
                    }
                }
            }
        }
        let theta = self.potentials();
        for i in 0..n {
            for &k in &self.neighbors[i] {
                let d = self.delta[(i, k)];
                let mismatch = wrap_to_period(theta[i] - theta[k] - d, self.period);
                if mismatch.abs() > 1e-7 * (1.0 + d.abs()) {
                    return Err(Error::Config(format!(
                        "displacements are not cycle-consistent at edge ({i}, {k}): mismatch {mismatch}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Offsets `θ` with `θ_i − θ_k = Δ_{i,k}` along a depth-first tree of
    /// the underlying undirected graph, rooted at vehicle 0 (`θ_0 = 0`) and
    /// visiting lower indices first, so a ring is walked in index order.
    pub fn potentials(&self) -> Vec<f64> {
        let n = self.len();
        let mut theta = vec![0.0; n];
        let mut seen = vec![false; n];
        for root in 0..n {
            if seen[root] {
                continue;
            }
            seen[root] = true;
            let mut stack = vec![root];
            while let Some(&i) = stack.last() {
                let next = (0..n).filter(|&k| !seen[k]).find_map(|k| {
                    if self.adjacency[(i, k)] > 0.0 {
                        Some((k, theta[i] - self.delta[(i, k)]))
                    } else if self.adjacency[(k, i)] > 0.0 {
                        Some((k, theta[i] + self.delta[(k, i)]))
                    } else {
                        None
                    }
                });
                match next {
                    Some((k, value)) => {
                        theta[k] = value;
                        seen[k] = true;
                        stack.push(k);
                    }
                    None => {
                        stack.pop();
                    }
                }
            }
        }
        theta
    }

    pub fn len(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    pub fn laplacian(&self) -> &DMatrix<f64> {
        &self.laplacian
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn weight(&self, i: usize, k: usize) -> f64 {
        self.adjacency[(i, k)]
    }

    /// `Δ_{i,k}`. With a period this is the potential difference congruent
    /// to the configured value, so displacements sum to zero around cycles.
    pub fn displacement(&self, i: usize, k: usize) -> f64 {
        self.delta[(i, k)]
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn is_undirected(&self) -> bool {
        self.adjacency == self.adjacency.transpose()
    }

    pub fn has_spanning_tree(&self) -> bool {
        has_spanning_tree(&self.adjacency)
    }

    /// Coordination residual `ω_i − ω_k − Δ_{i,k}`.
    pub fn residual(&self, i: usize, k: usize, omega_i: f64, omega_k: f64) -> f64 {
        omega_i - omega_k - self.delta[(i, k)]
    }

    /// Second-smallest eigenvalue of `(𝓛 + 𝓛ᵀ)/2`.
    pub fn algebraic_connectivity(&self) -> f64 {
        let sym = (&self.laplacian + self.laplacian.transpose()) * 0.5;
        let mut ev: Vec<f64> = SymmetricEigen::new(sym).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev.get(1).copied().unwrap_or(0.0)
    }
}

/// What vehicle `agent` knows at the start of a tick.
#[derive(Debug, Clone, PartialEq)]
pub struct CoordinateView {
    pub agent: usize,
    pub own: f64,
    pub received: Vec<(usize, f64)>,
}

/// Synchronous lossless broadcast of every vehicle's coordinate.
pub fn exchange(omega: &[f64], topology: &Topology) -> Result<Vec<CoordinateView>> {
    if omega.len() != topology.len() {
        return Err(invalid(format!("{} coordinates for {} vehicles", omega.len(), topology.len())));
    }
    Ok((0..omega.len())
        .map(|i| CoordinateView {
            agent: i,
            own: omega[i],
            received: topology.neighbors(i).iter().map(|&k| (k, omega[k])).collect(),
        })
        .collect())
}

/// `−c_i Σ_k a_ik (ω_i − ω_k − Δ_{i,k})`.
pub fn consensus_term(view: &CoordinateView, topology: &Topology, gain: f64) -> f64 {
    let i = view.agent;
    let sum: f64 = view
        .received
        .iter()
        .map(|&(k, wk)| topology.weight(i, k) * topology.residual(i, k, view.own, wk))
        .sum();
    -gain * sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::{PI, TAU};

    fn ring_adjacency(n: usize) -> DMatrix<f64> {
        DMatrix::from_fn(n, n, |i, j| if (i + 1) % n == j || (j + 1) % n == i { 1.0 } else { 0.0 })
    }

    #[test]
    fn ring_laplacian() {
        let l = build_laplacian(&ring_adjacency(6)).unwrap();
        for i in 0..6 {
            assert_eq!(l[(i, i)], 2.0);
            assert_eq!(l[(i, (i + 1) % 6)], -1.0);
            assert_eq!(l[(i, (i + 5) % 6)], -1.0);
            assert_eq!(l.row(i).sum(), 0.0);
        }
    }

    #[test]
    fn single_node_laplacian() {
        assert_eq!(build_laplacian(&DMatrix::zeros(1, 1)).unwrap(), DMatrix::zeros(1, 1));
    }

    #[test]
    fn laplacian_rejects_bad_weights() {
        let mut a = ring_adjacency(4);
        a[(0, 1)] = -1.0;
        assert!(matches!(build_laplacian(&a), Err(Error::InvalidArgument(_))));
        let mut a = ring_adjacency(4);
        a[(2, 2)] = 1.0;
        assert!(build_laplacian(&a).is_err());
        assert!(build_laplacian(&DMatrix::zeros(2, 3)).is_err());
    }

    #[test]
    fn random_digraph_laplacian_matches_definition() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..50 {
            let n = rng.gen_range(1..9);
            let a = DMatrix::from_fn(n, n, |i, j| if i != j && rng.gen_bool(0.4) { rng.gen_range(0.1..3.0) } else { 0.0 });
            let l = build_laplacian(&a).unwrap();
            let ones = DMatrix::from_element(n, 1, 1.0);
            assert!((&l * &ones).amax() < 1e-12);
            // Degree-minus-adjacency built elementwise.
            for i in 0..n {
                let mut deg = 0.0;
                for s in 0..n {
                    deg += a[(i, s)];
                }
                for j in 0..n {
                    let expected = if i == j { deg } else { -a[(i, j)] };
                    assert_eq!(l[(i, j)], expected);
                }
            }
        }
    }

    fn reachable_from(a: &DMatrix<f64>, root: usize) -> Vec<bool> {
        // Repeated relaxation until nothing changes.
        let n = a.nrows();
        let mut r = vec![false; n];
        r[root] = true;
        loop {
            let mut changed = false;
            for i in 0..n {
                for j in 0..n {
                    if r[j] && !r[i] && a[(i, j)] > 0.0 {
                        r[i] = true;
                        changed = true;
                    }
                }
            }
            if !changed {
                return r;
            }
        }
    }

    #[test]
    fn spanning_tree_cases() {
        let ring = ring_adjacency(6);
        assert!((0..6).all(|r| reachable_from(&ring, r).iter().all(|&x| x)));
        assert!(has_spanning_tree(&ring));

        let mut split = DMatrix::zeros(4, 4);
        split[(0, 1)] = 1.0;
        split[(1, 0)] = 1.0;
        split[(2, 3)] = 1.0;
        split[(3, 2)] = 1.0;
        assert!(!has_spanning_tree(&split));

        let chain = Topology::chain(3, 0.0, None).unwrap();
        assert!(chain.has_spanning_tree());
        assert!(!chain.is_undirected());
        // Reversing the flow leaves vertex 0 unreachable from 2 but 2 is now a root.
        let reversed = chain.adjacency().transpose();
        assert!(has_spanning_tree(&reversed));
        // Two leaders feeding one follower: no single root.
        let mut two = DMatrix::zeros(3, 3);
        two[(2, 0)] = 1.0;
        two[(2, 1)] = 1.0;
        assert!(!has_spanning_tree(&two));
    }

    #[test]
    fn random_spanning_tree_matches_relaxation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let n = rng.gen_range(1..8);
            let a = DMatrix::from_fn(n, n, |i, j| if i != j && rng.gen_bool(0.25) { 1.0 } else { 0.0 });
            let oracle = (0..n).any(|r| reachable_from(&a, r).iter().all(|&x| x));
            assert_eq!(has_spanning_tree(&a), oracle);
        }
    }

    #[test]
    fn exchange_views() {
        let t = Topology::ring(6, TAU / 3.0, Some(TAU)).unwrap();
        let omega = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let views = exchange(&omega, &t).unwrap();
        assert_eq!(views[0].received, vec![(1, 2.0), (5, 6.0)]);
        assert_eq!(views[0].own, 1.0);
        assert_eq!(views, exchange(&omega, &t).unwrap());
        assert!(exchange(&omega[..5], &t).is_err());
    }

    #[test]
    fn isolated_vehicle_has_empty_view() {
        let t = Topology::from_edges(3, &[Edge { agent: 0, neighbor: 1, weight: 1.0, delta: 0.0 }], true, None).unwrap();
        assert!(!t.has_spanning_tree());
        let views = exchange(&[0.0, 0.0, 0.0], &t).unwrap();
        assert!(views[2].received.is_empty());
        assert_eq!(consensus_term(&views[2], &t, 2.0), 0.0);
    }

    #[test]
    fn equal_coordinates_give_negative_displacements() {
        let t = Topology::ring(5, 0.3, None);
        // A 5-ring with equal non-zero steps is not cycle-consistent without a period.
        assert!(t.is_err());
        let t = Topology::chain(4, 0.3, None).unwrap();
        for i in 0..4 {
            for &k in t.neighbors(i) {
                assert_eq!(t.residual(i, k, 1.5, 1.5), -t.displacement(i, k));
            }
        }
    }

    #[test]
    fn consensus_term_examples() {
        let t = Topology::chain(2, 0.0, None).unwrap();
        let views = exchange(&[0.0, 1.0], &t).unwrap();
        assert_eq!(consensus_term(&views[1], &t, 2.0), -2.0);
        let views = exchange(&[0.4, 0.4], &t).unwrap();
        assert_eq!(consensus_term(&views[1], &t, 2.0), 0.0);
    }

    #[test]
    fn periodic_ring_formation_has_zero_consensus() {
        let step = 2.0 * PI / 3.0;
        let t = Topology::ring(6, step, Some(TAU)).unwrap();
        // Vehicles numbered 1..=6 in the formation: ω_i = −i·2π/3.
        let omega: Vec<f64> = (1..=6).map(|i| -(i as f64) * step).collect();
        for view in exchange(&omega, &t).unwrap() {
            assert!(consensus_term(&view, &t, 2.0).abs() < 1e-12);
        }
        // Without the period the wrap-around edge is inconsistent.
        assert!(Topology::ring(6, step, None).is_err());
    }

    #[test]
    fn displacement_antisymmetry_is_enforced() {
        let edges = [
            Edge { agent: 0, neighbor: 1, weight: 1.0, delta: 0.5 },
            Edge { agent: 1, neighbor: 0, weight: 1.0, delta: 0.5 },
        ];
        assert!(matches!(Topology::from_edges(2, &edges, false, None), Err(Error::Config(_))));
        let edges = [
            Edge { agent: 0, neighbor: 1, weight: 1.0, delta: 0.5 },
            Edge { agent: 1, neighbor: 0, weight: 1.0, delta: -0.5 },
        ];
        assert!(Topology::from_edges(2, &edges, false, None).unwrap().is_undirected());
    }

    #[test]
    fn potentials_reproduce_displacements() {
        let t = Topology::ring(10, 0.0, None).unwrap();
        assert!(t.potentials().iter().all(|&x| x == 0.0));
        let t = Topology::ring(6, TAU / 3.0, Some(TAU)).unwrap();
        let th = t.potentials();
        for i in 0..6 {
            for &k in t.neighbors(i) {
                assert!(wrap_to_period(th[i] - th[k] - t.displacement(i, k), Some(TAU)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn periodic_displacements_are_lifted() {
        let step = TAU / 3.0;
        let t = Topology::ring(6, step, Some(TAU)).unwrap();
        let mut around = 0.0;
        for i in 0..6 {
            let d = t.displacement(i, (i + 1) % 6);
            assert!(wrap_to_period(d - step, Some(TAU)).abs() < 1e-12);
            assert_eq!(t.displacement((i + 1) % 6, i), -d);
            around += d;
        }
        assert!(around.abs() < 1e-12);
    }

    #[test]
    fn ring_connectivity_is_positive() {
        let t = Topology::ring(6, 0.0, None).unwrap();
        // λ₂ of the 6-cycle is 2 − 2cos(2π/6) = 1.
        assert!((t.algebraic_connectivity() - 1.0).abs() < 1e-9);
    }

    fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<Edge> {
        // Random spanning tree plus extra random chords.
        let mut edges: Vec<Edge> = (1..n)
            .map(|k| Edge { agent: k, neighbor: rng.gen_range(0..k), weight: rng.gen_range(0.5..2.0), delta: 0.0 })
            .collect();
        for i in 0..n {
            for k in (i + 1)..n {
                if rng.gen_bool(0.15) && !edges.iter().any(|e| (e.agent == k && e.neighbor == i) || (e.agent == i && e.neighbor == k)) {
                    edges.push(Edge { agent: i, neighbor: k, weight: rng.gen_range(0.5..2.0), delta: 0.0 });
                }
            }
        }
        edges
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn pure_consensus_converges(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = 10;
            let mut edges = random_connected_graph(&mut rng, n);
            // Consistent displacements from random potentials.
            let theta: Vec<f64> = (0..n).map(|_| rng.gen_range(-3.0..3.0)).collect();
            for e in &mut edges {
                e.delta = theta[e.agent] - theta[e.neighbor];
            }
            let t = Topology::from_edges(n, &edges, true, None).unwrap();
            prop_assert!(t.algebraic_connectivity() > 0.0);
            let mut omega: Vec<f64> = (0..n).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let dt = 0.01;
            for _ in 0..20_000 {
                let views = exchange(&omega, &t).unwrap();
                let rates: Vec<f64> = views.iter().map(|v| consensus_term(v, &t, 1.0)).collect();
                for (w, r) in omega.iter_mut().zip(rates) {
                    *w += dt * r;
                }
            }
            for i in 0..n {
                for &k in t.neighbors(i) {
                    prop_assert!(t.residual(i, k, omega[i], omega[k]).abs() < 1e-6);
                }
            }
        }

        #[test]
        fn laplacian_annihilates_ones(seed in 0u64..10_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..12);
            let a = DMatrix::from_fn(n, n, |i, j| if i != j && rng.gen_bool(0.3) { rng.gen_range(0.0..5.0) } else { 0.0 });
            let l = build_laplacian(&a).unwrap();
            for i in 0..n {
                prop_assert!(l.row(i).sum().abs() < 1e-12);
            }
        }
    }
}
