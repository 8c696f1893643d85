//! Reference networks used throughout the test-suite and the `example`
//! command: a three-cluster 8-node network and a two-cluster 6-node network.

use crate::graph::{Partition, WeightedNetwork};

/// Eight nodes in clusters `{0,1}`, `{2,3,4}`, `{5,6,7}`; equitable for any
/// positive parameter values.
pub fn example_one(a1: f64, a2: f64, a3: f64, b1: f64, b2: f64) -> (WeightedNetwork, Partition) {
    let edges = [
        (0, 1, a1),
        (2, 3, a2),
        (3, 4, a2),
        (5, 6, a3),
        (5, 7, a3),
        (6, 7, a3),
        (0, 2, b1),
        (0, 3, b1 / 2.0),
        (1, 3, b1 / 2.0),
        (1, 4, b1),
        (2, 5, b2),
        (3, 6, b2),
        (4, 7, b2),
    ];
    let net = WeightedNetwork::from_edges(8, edges).expect("example one is a valid network");
    let part = Partition::for_network(&net, vec![vec![0, 1], vec![2, 3, 4], vec![5, 6, 7]])
        .expect("example one partition is valid");
    (net, part)
}

/// Natural frequencies 0, 5, 10 (rad/s) per cluster of [`example_one`].
pub fn example_one_frequencies() -> Vec<f64> {
    vec![0.0, 0.0, 5.0, 5.0, 5.0, 10.0, 10.0, 10.0]
}

/// Two 3-node paths `{0,1,2}` and `{3,4,5}` joined by the matching
/// `0-5`, `1-4`, `2-3` of weight `b`.
pub fn example_two(a1: f64, a2: f64, b: f64) -> (WeightedNetwork, Partition) {
    let edges = [
        (0, 1, a1),
        (1, 2, a1),
        (3, 4, a2),
        (4, 5, a2),
        (0, 5, b),
        (1, 4, b),
        (2, 3, b),
    ];
    let net = WeightedNetwork::from_edges(6, edges).expect("example two is a valid network");
    let part = Partition::for_network(&net, vec![vec![0, 1, 2], vec![3, 4, 5]])
        .expect("example two partition is valid");
    (net, part)
}

/// Natural frequencies 5 and 1 (rad/s) for the two clusters of [`example_two`].
pub fn example_two_frequencies() -> Vec<f64> {
    vec![5.0, 5.0, 5.0, 1.0, 1.0, 1.0]
}
