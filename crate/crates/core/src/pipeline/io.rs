use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{KuraError, Result};
use crate::graph::{Partition, WeightedNetwork};
use crate::metrics::write_matrix_csv;
use crate::tree::TreeDecomposition;

/// On-disk network: `{"nodes": N, "edges": [[i, j, w], ...], "partition": [[...], ...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkFile {
    pub nodes: usize,
    pub edges: Vec<(usize, usize, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
}

impl NetworkFile {
    pub fn from_network(net: &WeightedNetwork, part: Option<&Partition>) -> Self {
        NetworkFile {
            nodes: net.n_nodes(),
            edges: net.edges().iter().map(|e| (e.i, e.j, e.weight)).collect(),
            partition: part.map(|p| p.clusters().to_vec()),
        }
    }

    pub fn network(&self) -> Result<WeightedNetwork> {
        WeightedNetwork::from_edges(self.nodes, self.edges.iter().copied())
    }
}

/// Reads a network from JSON, or from a dense CSV adjacency matrix when the
/// extension is `.csv` (the partition must then come from elsewhere).
pub fn load_network(path: &Path) -> Result<(WeightedNetwork, Option<Vec<Vec<usize>>>)> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        let a = read_matrix_csv(path)?;
        return Ok((WeightedNetwork::from_adjacency(&a)?, None));
    }
    let file: NetworkFile = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok((file.network()?, file.partition))
}

/// Network plus a connectivity-checked partition, preferring `override_part`.
pub fn load_partitioned(
    path: &Path,
    override_part: Option<&Vec<Vec<usize>>>,
) -> Result<(WeightedNetwork, Partition)> {
    let (net, stored) = load_network(path)?;
    let clusters = override_part
        .cloned()
        .or(stored)
        .ok_or_else(|| KuraError::InvalidPartition(format!("no partition given for {}", path.display())))?;
    let part = Partition::for_network(&net, clusters)?;
    Ok((net, part))
}

pub fn save_network(path: &Path, net: &WeightedNetwork, part: Option<&Partition>) -> Result<()> {
    write_json(path, &NetworkFile::from_network(net, part))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path, s)?;
    Ok(())
}

/// Dense numeric matrix without a header.
pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|e| KuraError::InvalidNetwork(format!("{}: bad number {s:?}: {e}", path.display())))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    let n = rows.len();
    if n == 0 {
        return Err(KuraError::EmptyInput(format!("{} is empty", path.display())));
    }
    if let Some(k) = rows.iter().position(|r| r.len() != rows[0].len()) {
        return Err(KuraError::DimensionMismatch(format!(
            "{}: row {k} has {} columns, expected {}",
            path.display(),
            rows[k].len(),
            rows[0].len()
        )));
    }
    Ok(DMatrix::from_fn(n, rows[0].len(), |i, j| rows[i][j]))
}

pub fn write_matrix_file(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    write_matrix_csv(m, fs::File::create(path)?)
}

/// Writes `B`, the tree incidence and the reduction blocks as CSV files.
pub fn dump_decomposition(dir: &Path, dec: &TreeDecomposition) -> Result<()> {
    fs::create_dir_all(dir)?;
    let inc = dec.incidence();
    let files = [
        ("B.csv", inc.matrix().clone()),
        ("W.csv", inc.weight_matrix()),
        ("B_tilde.csv", dec.b_tilde()),
        ("B_tilde_intra.csv", dec.b_tilde_intra().clone()),
        ("B_tilde_inter.csv", dec.b_tilde_inter().clone()),
        ("R1.csv", dec.r1().clone()),
        ("R3.csv", dec.r3().clone()),
        ("R4.csv", dec.r4().clone()),
    ];
    for (name, m) in files {
        write_matrix_file(&dir.join(name), &m)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::examples;

    #[test]
    fn network_json_round_trip() {
        let (net, part) = examples::example_two(1.0, 0.5, 2.0);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("net.json");
        save_network(&path, &net, Some(&part)).unwrap();
        let (back, p) = load_partitioned(&path, None).unwrap();
        assert_eq!(back.edges(), net.edges());
        assert_eq!(p.clusters(), part.clusters());
        let text = fs::read_to_string(&path).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(v["nodes"], 6);
        assert_eq!(v["edges"][0], serde_json::json!([0, 1, 1.0]));
    }

    #[test]
    fn csv_adjacency_needs_external_partition() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("adj.csv");
        fs::write(&path, "0,1,0,1\n1,0,1,0\n0,1,0,1\n1,0,1,0\n").unwrap();
        assert!(matches!(
            load_partitioned(&path, None),
            Err(KuraError::InvalidPartition(_))
        ));
        let (net, part) = load_partitioned(&path, Some(&vec![vec![0, 1], vec![2, 3]])).unwrap();
        assert_eq!(net.edges().len(), 4);
        assert_eq!(part.n_clusters(), 2);
    }

    #[test]
    fn decomposition_dump_writes_blocks() {
        let (net, part) = examples::example_one(1.0, 1.0, 1.0, 1.0, 1.0);
        let dec = TreeDecomposition::new(&net, &part).unwrap();
        let dir = tempfile::tempdir().unwrap();
        dump_decomposition(dir.path(), &dec).unwrap();
        let b = read_matrix_csv(&dir.path().join("B.csv")).unwrap();
        assert_eq!(b.shape(), (8, 13));
        let r4 = read_matrix_csv(&dir.path().join("R4.csv")).unwrap();
        assert_eq!(r4.shape(), (7, 2));
    }
}
