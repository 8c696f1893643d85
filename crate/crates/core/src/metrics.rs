//! Synchronization measures: order parameters, distance to the cluster
//! synchronization manifold and Pearson correlation matrices.

use std::io::Write;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::dynamics::SimulationRecord;
use crate::error::{KuraError, Result};
use crate::graph::Partition;
use crate::linalg::wrap_angle;

#[derive(Debug, Clone, PartialEq)]
pub struct OrderParameterSeries {
    pub times: Vec<f64>,
    /// `r_p[p][k]` for cluster `p` at sample `k`.
    pub r_p: Vec<Vec<f64>>,
    pub r_global: Vec<f64>,
}

impl OrderParameterSeries {
    /// Time averages `(r_global, r_p...)` over samples with `t >= t_from`.
    pub fn time_average(&self, t_from: f64) -> (f64, Vec<f64>) {
        let idx: Vec<usize> = (0..self.times.len()).filter(|&k| self.times[k] >= t_from).collect();
        let mean = |s: &[f64]| idx.iter().map(|&k| s[k]).sum::<f64>() / idx.len().max(1) as f64;
        (mean(&self.r_global), self.r_p.iter().map(|s| mean(s)).collect())
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["t".to_string(), "r_global".to_string()];
        header.extend((1..=self.r_p.len()).map(|p| format!("r_{p}")));
        out.write_record(&header)?;
        for k in 0..self.times.len() {
            let mut row = vec![self.times[k].to_string(), self.r_global[k].to_string()];
            row.extend(self.r_p.iter().map(|s| s[k].to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `|mean_i exp(j theta_i)|` over the given nodes.
pub fn order_parameter(theta: &[f64], nodes: impl IntoIterator<Item = usize>) -> f64 {
    let mut sum = Complex64::new(0.0, 0.0);
    let mut count = 0usize;
    for i in nodes {
        sum += Complex64::from_polar(1.0, theta[i]);
        count += 1;
    }
    if count == 0 {
        return 0.0;
    }
    (sum / count as f64).norm()
}

/// Per-cluster and global order parameters of one phase vector.
pub fn order_parameters_at(theta: &[f64], part: &Partition) -> (f64, Vec<f64>) {
    let global = order_parameter(theta, 0..theta.len());
    let per = part
        .clusters()
        .iter()
        .map(|c| order_parameter(theta, c.iter().copied()))
        .collect();
    (global, per)
}

/// Incremental builder used when samples arrive from a running simulation.
#[derive(Debug, Clone)]
pub struct OrderParameterAccumulator<'a> {
    part: &'a Partition,
    series: OrderParameterSeries,
}

impl<'a> OrderParameterAccumulator<'a> {
    pub fn new(part: &'a Partition) -> Self {
        OrderParameterAccumulator {
            part,
            series: OrderParameterSeries {
                times: Vec::new(),
                r_p: vec![Vec::new(); part.n_clusters()],
                r_global: Vec::new(),
            },
        }
    }

    pub fn push(&mut self, t: f64, theta: &[f64]) {
        let (g, per) = order_parameters_at(theta, self.part);
        self.series.times.push(t);
        self.series.r_global.push(g);
        for (s, r) in self.series.r_p.iter_mut().zip(per) {
            s.push(r);
        }
    }

    pub fn finish(self) -> OrderParameterSeries {
        self.series
    }
}

pub fn order_parameters(record: &SimulationRecord, part: &Partition) -> Result<OrderParameterSeries> {
    if record.is_empty() {
        return Err(KuraError::EmptyInput("simulation record has no samples".into()));
    }
    let mut acc = OrderParameterAccumulator::new(part);
    for (t, th) in record.rows() {
        acc.push(t, th);
    }
    Ok(acc.finish())
}

/// Distance from `theta` to the cluster synchronization manifold.
///
/// Within each cluster the phases are taken relative to the first member,
/// wrapped to `(-pi, pi]`, and centred; the result is the Euclidean norm of
/// all centred offsets.
pub fn manifold_distance(theta: &[f64], part: &Partition) -> f64 {
    let mut sq = 0.0;
    for c in part.clusters() {
        let base = theta[c[0]];
        let d: Vec<f64> = c.iter().map(|&i| wrap_angle(theta[i] - base)).collect();
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        sq += d.iter().map(|v| (v - mean).powi(2)).sum::<f64>();
    }
    sq.sqrt()
}

/// Largest wrapped phase difference inside any cluster.
pub fn max_intra_difference(theta: &[f64], part: &Partition) -> f64 {
    part.clusters()
        .iter()
        .map(|c| cluster_spread(theta, c))
        .fold(0.0, f64::max)
}

/// Largest wrapped pairwise phase difference inside one cluster.
pub fn cluster_spread(theta: &[f64], cluster: &[usize]) -> f64 {
    let mut worst: f64 = 0.0;
    for (a, &i) in cluster.iter().enumerate() {
        for &j in &cluster[a + 1..] {
            worst = worst.max(wrap_angle(theta[i] - theta[j]).abs());
        }
    }
    worst
}

#[derive(Debug, Clone)]
pub struct CorrelationMatrix {
    /// Pearson coefficients; rows and columns of constant signals are NaN.
    pub matrix: DMatrix<f64>,
    /// Seconds discarded from the start of every series.
    pub burn_in: f64,
    /// Indices of signals that were constant after burn-in.
    pub constant_signals: Vec<usize>,
}

impl CorrelationMatrix {
    /// Dense row-major CSV without a header.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        write_matrix_csv(&self.matrix, w)
    }

    /// Mean coefficient over distinct intra-cluster pairs and over
    /// inter-cluster pairs, ignoring NaN entries.
    pub fn block_means(&self, part: &Partition) -> (f64, f64) {
        let n = self.matrix.nrows();
        let (mut si, mut ni, mut se, mut ne) = (0.0, 0usize, 0.0, 0usize);
        for i in 0..n {
            for j in i + 1..n {
                let v = self.matrix[(i, j)];
                if v.is_nan() {
                    continue;
                }
                if part.cluster_of(i) == part.cluster_of(j) {
                    si += v;
                    ni += 1;
                } else {
                    se += v;
                    ne += 1;
                }
            }
        }
        (si / ni.max(1) as f64, se / ne.max(1) as f64)
    }
}

pub fn write_matrix_csv<W: Write>(m: &DMatrix<f64>, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for i in 0..m.nrows() {
        out.write_record((0..m.ncols()).map(|j| m[(i, j)].to_string()))?;
    }
    out.flush()?;
    Ok(())
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let (dx, dy) = (x - ma, y - mb);
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    (sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0)
}

/// Pearson correlation matrix of `signals[i][k]` sampled at `times[k]`,
/// using only samples with `t >= burn_in`.
pub fn pearson_matrix(times: &[f64], signals: &[Vec<f64>], burn_in: f64) -> Result<CorrelationMatrix> {
    if signals.is_empty() {
        return Err(KuraError::EmptyInput("no signals".into()));
    }
    if let Some(bad) = signals.iter().position(|s| s.len() != times.len()) {
        return Err(KuraError::DimensionMismatch(format!(
            "signal {bad} has {} samples, time grid has {}",
            signals[bad].len(),
            times.len()
        )));
    }
    let start = times.iter().position(|&t| t >= burn_in).unwrap_or(times.len());
    if times.len() - start < 2 {
        return Err(KuraError::EmptyInput(format!(
            "fewer than 2 samples after burn-in {burn_in} s"
        )));
    }
    let windows: Vec<&[f64]> = signals.iter().map(|s| &s[start..]).collect();
    let constant: Vec<usize> = windows
        .iter()
        .enumerate()
        .filter(|(_, w)| w.iter().all(|&v| v == w[0]))
        .map(|(i, _)| i)
        .collect();
    if !constant.is_empty() {
        log::warn!("constant signals after burn-in: {constant:?}; their correlations are NaN");
    }
    let n = signals.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    if constant.contains(&i) || constant.contains(&j) {
                        f64::NAN
                    } else if i == j {
                        1.0
                    } else {
                        pearson(windows[i], windows[j])
                    }
                })
                .collect()
        })
        .collect();
    let matrix = DMatrix::from_fn(n, n, |i, j| if i <= j { rows[i][j] } else { rows[j][i] });
    Ok(CorrelationMatrix {
        matrix,
        burn_in,
        constant_signals: constant,
    })
}

/// Writes `header` (with `t` prepended) followed by one row per sample.
pub fn write_series_csv<W: Write>(
    w: W,
    prefix: &str,
    times: &[f64],
    rows: impl Iterator<Item = Vec<f64>>,
    width: usize,
) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((0..width).map(|i| format!("{prefix}_{i}")));
    out.write_record(&header)?;
    for (t, row) in times.iter().zip(rows) {
        let mut rec = vec![t.to_string()];
        rec.extend(row.iter().map(|v| v.to_string()));
        out.write_record(&rec)?;
    }
    out.flush()?;
    Ok(())
}

/// Trajectory CSV with header `t,theta_0,...`.
pub fn write_trajectory_csv<W: Write>(record: &SimulationRecord, w: W) -> Result<()> {
    write_series_csv(
        w,
        "theta",
        &record.times,
        record.rows().map(|(_, th)| th.to_vec()),
        record.n_nodes(),
    )
}
