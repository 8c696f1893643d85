use std::collections::VecDeque;
use std::path::Path;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::io::read_matrix_csv;
use crate::error::{KuraError, Result};
use crate::graph::{symmetrize, Partition, WeightedNetwork};

/// Largest weight after normalization.
pub const MAX_REGION_WEIGHT: f64 = 10.0;

#[derive(Debug, Clone)]
pub struct Connectome {
    pub network: WeightedNetwork,
    /// Region indices kept, in the order of the network's nodes.
    pub kept_regions: Vec<usize>,
    /// Regions dropped because they fell outside the largest component.
    pub dropped_regions: Vec<usize>,
    /// Relative asymmetry of the averaged region matrix before symmetrizing.
    pub asymmetry: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct PreprocessReport {
    pub regions: usize,
    pub kept_regions: Vec<usize>,
    pub dropped_regions: Vec<usize>,
    pub asymmetry: f64,
    pub edges: usize,
}

impl Connectome {
    pub fn report(&self) -> PreprocessReport {
        PreprocessReport {
            regions: self.kept_regions.len() + self.dropped_regions.len(),
            kept_regions: self.kept_regions.clone(),
            dropped_regions: self.dropped_regions.clone(),
            asymmetry: self.asymmetry,
            edges: self.network.edges().len(),
        }
    }
}

/// Region-level weight matrix of one subject: binarize, then for every pair
/// of regions `(R, S)` sum the links from subregions of `R` to subregions of
/// `S` and divide by the number of subregions in `S`. Self-links are ignored.
pub fn region_matrix(raw: &DMatrix<f64>, region_map: &[usize], n_regions: usize) -> DMatrix<f64> {
    let mut size = vec![0usize; n_regions];
    for &r in region_map {
        size[r] += 1;
    }
    let mut w = DMatrix::zeros(n_regions, n_regions);
    for a in 0..raw.nrows() {
        for b in 0..raw.ncols() {
            if a != b && raw[(a, b)] > 0.0 {
                w[(region_map[a], region_map[b])] += 1.0;
            }
        }
    }
    for s in 0..n_regions {
        for r in 0..n_regions {
            w[(r, s)] /= size[s] as f64;
        }
        w[(s, s)] = 0.0;
    }
    w
}

/// Turns per-subject subregion matrices into one region-level network with
/// weights in `(0, 10]`.
pub fn preprocess_connectome(raw: &[DMatrix<f64>], region_map: &[usize]) -> Result<Connectome> {
    if raw.is_empty() {
        return Err(KuraError::EmptyInput("no raw connectivity matrices".into()));
    }
    let n0 = region_map.len();
    if let Some(k) = raw.iter().position(|m| m.shape() != (n0, n0)) {
        return Err(KuraError::DimensionMismatch(format!(
            "matrix {k} is {:?}, region map covers {n0} subregions",
            raw[k].shape()
        )));
    }
    let n_regions = region_map.iter().max().map_or(0, |m| m + 1);
    let mut present = vec![false; n_regions];
    region_map.iter().for_each(|&r| present[r] = true);
    if let Some(r) = present.iter().position(|p| !p) {
        return Err(KuraError::InvalidConfig(format!("region {r} has no subregions")));
    }
    let mut avg = DMatrix::zeros(n_regions, n_regions);
    for m in raw {
        avg += region_matrix(m, region_map, n_regions);
    }
    avg /= raw.len() as f64;
    let (sym, asymmetry) = symmetrize(&avg)?;
    let max = sym.max();
    if !(max > 0.0) {
        return Err(KuraError::DisconnectedResult("no links between regions".into()));
    }
    let scaled = sym * (MAX_REGION_WEIGHT / max);

    let component = largest_component(&scaled);
    let dropped: Vec<usize> = (0..n_regions).filter(|r| !component.contains(r)).collect();
    if component.len() < 2 {
        return Err(KuraError::DisconnectedResult("no two regions are linked".into()));
    }
    if !dropped.is_empty() {
        log::warn!(
            "region network is disconnected; keeping {} of {n_regions} regions, dropping {dropped:?}",
            component.len()
        );
    }
    let sub = DMatrix::from_fn(component.len(), component.len(), |a, b| {
        scaled[(component[a], component[b])]
    });
    Ok(Connectome {
        network: WeightedNetwork::from_adjacency(&sub)?,
        kept_regions: component,
        dropped_regions: dropped,
        asymmetry,
    })
}

fn largest_component(a: &DMatrix<f64>) -> Vec<usize> {
    let n = a.nrows();
    let mut seen = vec![false; n];
    let mut best: Vec<usize> = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..n {
                if !seen[v] && a[(u, v)] > 0.0 {
                    seen[v] = true;
                    comp.push(v);
                    queue.push_back(v);
                }
            }
        }
        if comp.len() > best.len() {
            best = comp;
        }
    }
    best.sort_unstable();
    best
}

/// Reads every `*.csv` in `dir` (sorted by name) as one subject matrix.
pub fn load_raw_dir(dir: &Path) -> Result<Vec<DMatrix<f64>>> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")))
        .collect();
    paths.sort();
    paths.iter().map(|p| read_matrix_csv(p)).collect()
}

/// Region map CSV: one `subregion,region` pair per line, optional header.
pub fn load_region_map(path: &Path) -> Result<Vec<usize>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut pairs = Vec::new();
    for (k, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parsed = (rec.get(0).map(str::parse::<usize>), rec.get(1).map(str::parse::<usize>));
        match parsed {
            (Some(Ok(s)), Some(Ok(r))) => pairs.push((s, r)),
            _ if k == 0 => continue,
            _ => {
                return Err(KuraError::InvalidConfig(format!(
                    "{}: line {} is not `subregion,region`",
                    path.display(),
                    k + 1
                )))
            }
        }
    }
    let n = pairs.len();
    let mut map = vec![usize::MAX; n];
    for (s, r) in pairs {
        if s >= n || map[s] != usize::MAX {
            return Err(KuraError::InvalidConfig(format!(
                "region map must list each subregion 0..{n} exactly once (bad entry {s})"
            )));
        }
        map[s] = r;
    }
    Ok(map)
}

/// Parameters of the synthetic modular connectome.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SyntheticSpec {
    pub clusters: usize,
    pub cluster_size: usize,
    pub p_intra: f64,
    pub intra_weight: (f64, f64),
    pub p_inter: f64,
    pub inter_weight: (f64, f64),
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            clusters: 3,
            cluster_size: 22,
            p_intra: 0.6,
            intra_weight: (5.0, 10.0),
            p_inter: 0.1,
            inter_weight: (0.5, 2.0),
        }
    }
}

/// Seeded modular random network with contiguous clusters. Disconnected
/// pieces are joined by extra edges between their lowest-index nodes.
pub fn synthetic_connectome(spec: &SyntheticSpec, seed: u64) -> Result<(WeightedNetwork, Partition)> {
    let n = spec.clusters * spec.cluster_size;
    let part = Partition::contiguous(&vec![spec.cluster_size; spec.clusters])?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let intra = part.cluster_of(i) == part.cluster_of(j);
            let (p, (lo, hi)) = if intra {
                (spec.p_intra, spec.intra_weight)
            } else {
                (spec.p_inter, spec.inter_weight)
            };
            let draw: f64 = rng.random();
            let w: f64 = rng.random_range(lo..hi);
            if draw < p {
                a[(i, j)] = w;
                a[(j, i)] = w;
            }
        }
    }
    for c in part.clusters() {
        join_components(&mut a, c, spec.intra_weight, &mut rng);
    }
    let all: Vec<usize> = (0..n).collect();
    join_components(&mut a, &all, spec.inter_weight, &mut rng);
    let net = WeightedNetwork::from_adjacency(&a)?;
    part.ensure_connected(&net)?;
    Ok((net, part))
}

fn join_components(a: &mut DMatrix<f64>, nodes: &[usize], range: (f64, f64), rng: &mut ChaCha8Rng) {
    let sub = DMatrix::from_fn(nodes.len(), nodes.len(), |x, y| a[(nodes[x], nodes[y])]);
    let mut comp = vec![usize::MAX; nodes.len()];
    let mut heads = Vec::new();
    for s in 0..nodes.len() {
        if comp[s] != usize::MAX {
            continue;
        }
        heads.push(s);
        comp[s] = s;
        let mut queue = VecDeque::from([s]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nodes.len() {
                if comp[v] == usize::MAX && sub[(u, v)] > 0.0 {
                    comp[v] = s;
                    queue.push_back(v);
                }
            }
        }
    }
    for w in heads.windows(2) {
        let (u, v) = (nodes[w[0]], nodes[w[1]]);
        let weight = rng.random_range(range.0..range.1);
        log::debug!("joining components via edge ({u}, {v})");
        a[(u, v)] = weight;
        a[(v, u)] = weight;
    }
}
