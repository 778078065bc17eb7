//! Shared helpers for the integration suites: the six-node motivation
//! example and seeded random instance generation.
#![allow(dead_code)]

use planner::instance::ProblemInstance;
use planner::topology::{parse_topology, DistanceMatrix, FlowProfile, Topology, TopologyFormat};
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

/// The six-node motivation network with degrees 2,3,2,5,3,3.
pub fn fig1_topology() -> Topology {
    let csv = "src,dst\n\
               s1,s4\ns2,s4\ns3,s4\ns5,s4\ns6,s4\n\
               s1,s2\ns2,s5\ns3,s6\ns5,s6\n";
    parse_topology(csv.as_bytes(), TopologyFormat::EdgeCsv).unwrap()
}

/// The motivation instance: A=6, M=12, gamma=3, zero distances.
pub fn fig1_instance() -> ProblemInstance {
    let t = fig1_topology();
    let flows = planner::topology::estimate_flows(&t);
    ProblemInstance::new(flows, DistanceMatrix::zeros(6), 6, 12, 3).unwrap()
}

/// Index of a labelled node in the motivation network.
pub fn fig1_index(label: &str) -> usize {
    fig1_topology()
        .nodes
        .iter()
        .find(|n| n.label == label)
        .unwrap()
        .id
}

/// Euclidean distances between random points in a 100x100 square.
pub fn random_distances(rng: &mut ChaCha8Rng, n: usize) -> DistanceMatrix {
    let pts: Vec<(f64, f64)> = (0..n)
        .map(|_| (rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0)))
        .collect();
    DistanceMatrix::from_upper_triangle(n, |i, j| {
        let dx = pts[i].0 - pts[j].0;
        let dy = pts[i].1 - pts[j].1;
        (dx * dx + dy * dy).sqrt()
    })
}

/// A random instance with N in `[n_lo, n_hi]`, R_i in 1..=9, A in 5..=15,
/// gamma in 1..=4 and M in gamma+1 ..= (gamma+1)*N.
pub fn random_instance(rng: &mut ChaCha8Rng, n_lo: usize, n_hi: usize) -> ProblemInstance {
    let n = rng.gen_range(n_lo..=n_hi);
    let flows = FlowProfile((0..n).map(|_| rng.gen_range(1..=9)).collect());
    let dist = random_distances(rng, n);
    let capacity = rng.gen_range(5..=15);
    let gamma: u64 = rng.gen_range(1..=4);
    let budget = rng.gen_range(gamma + 1..=(gamma + 1) * n as u64);
    ProblemInstance::new(flows, dist, capacity, budget, gamma).unwrap()
}
