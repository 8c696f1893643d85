#![allow(dead_code)]

use kurasync_core::graph::{Partition, WeightedNetwork};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random connected network with `sizes.len()` connected clusters: a random
/// tree inside every cluster plus extra intra links with probability
/// `p_intra`, a random tree over the clusters plus extra inter links with
/// probability `p_inter`. Weights are uniform on `[0.5, 2)`.
pub fn random_clustered(
    rng: &mut ChaCha8Rng,
    sizes: &[usize],
    p_intra: f64,
    p_inter: f64,
) -> (WeightedNetwork, Partition) {
    let part = Partition::contiguous(sizes).unwrap();
    let n = part.n_nodes();
    let mut pairs = std::collections::BTreeSet::new();
    for c in part.clusters() {
        for k in 1..c.len() {
            let parent = c[rng.random_range(0..k)];
            pairs.insert((parent, c[k]));
        }
    }
    let r = sizes.len();
    for q in 1..r {
        let p = rng.random_range(0..q);
        let a = part.clusters()[p][rng.random_range(0..sizes[p])];
        let b = part.clusters()[q][rng.random_range(0..sizes[q])];
        pairs.insert((a.min(b), a.max(b)));
    }
    for i in 0..n {
        for j in i + 1..n {
            let p = if part.cluster_of(i) == part.cluster_of(j) {
                p_intra
            } else {
                p_inter
            };
            if rng.random::<f64>() < p {
                pairs.insert((i, j));
            }
        }
    }
    let edges: Vec<(usize, usize, f64)> = pairs
        .into_iter()
        .map(|(i, j)| (i, j, rng.random_range(0.5..2.0)))
        .collect();
    let net = WeightedNetwork::from_edges(n, edges).unwrap();
    let part = Partition::for_network(&net, part.clusters().to_vec()).unwrap();
    (net, part)
}

/// Random cluster sizes (each 2..=5) with total at most `max_n`.
pub fn random_sizes(rng: &mut ChaCha8Rng, max_n: usize) -> Vec<usize> {
    let r = rng.random_range(2..=4);
    let mut sizes: Vec<usize> = (0..r).map(|_| rng.random_range(2..=5)).collect();
    while sizes.iter().sum::<usize>() > max_n {
        let k = sizes.iter().position(|&s| s > 2).unwrap();
        sizes[k] -= 1;
    }
    sizes
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
