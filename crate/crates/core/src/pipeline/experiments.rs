use std::f64::consts::PI;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use super::config::FrequencySpec;
use super::connectome::{synthetic_connectome, SyntheticSpec};
use super::io::write_json;
use crate::certificates::{
    self, CertificateContext, StabilityCertificate, TradeoffPoint, TwoClusterReport,
};
use crate::dynamics::{self, NearManifold, OscillatorConfig, SimulationRecord};
use crate::error::{KuraError, Result};
use crate::examples;
use crate::graph::{Partition, WeightedNetwork};
use crate::hemodynamics::{self, HemoParams};
use crate::metrics::{
    self, cluster_spread, manifold_distance, max_intra_difference, CorrelationMatrix,
    OrderParameterAccumulator, OrderParameterSeries,
};

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ExampleId {
    #[serde(rename = "1")]
    One,
    #[serde(rename = "2-stable")]
    TwoStable,
    #[serde(rename = "2-unstable")]
    TwoUnstable,
}

impl FromStr for ExampleId {
    type Err = KuraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" => Ok(ExampleId::One),
            "2-stable" => Ok(ExampleId::TwoStable),
            "2-unstable" => Ok(ExampleId::TwoUnstable),
            other => Err(KuraError::InvalidConfig(format!(
                "unknown example {other:?}; expected 1, 2-stable or 2-unstable"
            ))),
        }
    }
}

impl ExampleId {
    pub fn network(&self) -> (WeightedNetwork, Partition, Vec<f64>) {
        match self {
            ExampleId::One => {
                let (n, p) = examples::example_one(1.0, 1.0, 1.0, 1.0, 1.0);
                (n, p, examples::example_one_frequencies())
            }
            ExampleId::TwoStable => {
                let (n, p) = examples::example_two(1.0, 1.0, 1.0);
                (n, p, examples::example_two_frequencies())
            }
            ExampleId::TwoUnstable => {
                let (n, p) = examples::example_two(0.01, 1.0, 1.0);
                (n, p, examples::example_two_frequencies())
            }
        }
    }
}

/// Phase differences within clusters over a late time window.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LateBehaviour {
    pub window: (f64, f64),
    /// Largest wrapped intra-cluster difference in the window.
    pub max_intra_difference: f64,
    /// Largest intra-cluster difference per cluster.
    pub per_cluster: Vec<f64>,
    /// Number of separate excursions of the first cluster's spread above
    /// `excursion_level`.
    pub first_cluster_excursions: usize,
    pub excursion_level: f64,
}

pub fn late_behaviour(record: &SimulationRecord, part: &Partition, from: f64, level: f64) -> LateBehaviour {
    let mut per = vec![0.0_f64; part.n_clusters()];
    let mut excursions = 0;
    let mut above = false;
    let mut end = from;
    for (t, th) in record.rows().filter(|(t, _)| *t >= from) {
        end = t;
        for (p, c) in part.clusters().iter().enumerate() {
            per[p] = per[p].max(cluster_spread(th, c));
        }
        let s = cluster_spread(th, &part.clusters()[0]);
        if s > level && !above {
            excursions += 1;
        }
        above = s > level;
    }
    LateBehaviour {
        window: (from, end),
        max_intra_difference: per.iter().cloned().fold(0.0, f64::max),
        per_cluster: per,
        first_cluster_excursions: excursions,
        excursion_level: level,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ExampleReport {
    pub example: ExampleId,
    pub initial_distance: f64,
    pub certificate: StabilityCertificate,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub two_cluster: Option<TwoClusterReport>,
    pub late: LateBehaviour,
    #[serde(skip)]
    pub record: SimulationRecord,
    #[serde(skip)]
    pub tradeoff: Vec<TradeoffPoint>,
}

/// Settings shared by the reference examples.
pub const EXAMPLE_T_END: f64 = 100.0;
pub const EXAMPLE_LATE_FROM: f64 = 60.0;
pub const EXAMPLE_SEED: u64 = 1;

/// `n` log-spaced values from `lo` to `hi`.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n)
        .map(|k| lo * (hi / lo).powf(k as f64 / (n - 1) as f64))
        .collect()
}

/// Builds the example network, certifies it, simulates 100 s from a seeded
/// state within 0.1 of the manifold and, when `out` is given, writes
/// `trajectory.csv`, `order_parameters.csv`, `certificate.json`,
/// `summary.json` and (example 1) `tradeoff.csv`.
pub fn run_example(id: ExampleId, out: Option<&Path>) -> Result<ExampleReport> {
    let (net, part, omega) = id.network();
    let ctx = CertificateContext::new(&net, &part, &omega)?;
    let certificate = ctx.certificate();
    let two_cluster = match id {
        ExampleId::One => None,
        _ => Some(certificates::two_cluster_test(&net, &part, &omega)?),
    };
    let tradeoff = if id == ExampleId::One {
        let g = ctx.params.gamma;
        certificates::tradeoff_curve(ctx.params.rho, ctx.params.lambda2, &log_grid(g * 1e-3, g * 10.0, 20))?
    } else {
        Vec::new()
    };
    let theta0 = NearManifold {
        seed: EXAMPLE_SEED,
        amplitude: 0.1,
        max_distance: Some(0.1),
    }
    .sample(&part);
    let cfg = OscillatorConfig {
        natural_frequencies: omega,
        initial_phases: theta0.clone(),
        dt: 1e-3,
        t_end: EXAMPLE_T_END,
        output_stride: 10,
    };
    let record = dynamics::simulate(&cfg, &net)?;
    let late = late_behaviour(&record, &part, EXAMPLE_LATE_FROM, 0.1);
    let report = ExampleReport {
        example: id,
        initial_distance: manifold_distance(&theta0, &part),
        certificate,
        two_cluster,
        late,
        record,
        tradeoff,
    };
    if let Some(dir) = out {
        fs::create_dir_all(dir)?;
        metrics::write_trajectory_csv(&report.record, create(&dir.join("trajectory.csv"))?)?;
        metrics::order_parameters(&report.record, &part)?.write_csv(create(&dir.join("order_parameters.csv"))?)?;
        write_json(&dir.join("certificate.json"), &report.certificate)?;
        if let Some(tc) = &report.two_cluster {
            write_json(&dir.join("two_cluster.json"), tc)?;
        }
        if !report.tradeoff.is_empty() {
            certificates::write_tradeoff_csv(&report.tradeoff, create(&dir.join("tradeoff.csv"))?)?;
        }
        write_json(&dir.join("summary.json"), &report)?;
    }
    Ok(report)
}

/// Example 1 with the `(0, 2)` link strengthened by `delta`, which breaks the
/// equitable partition by `K = delta`.
pub fn perturbed_example_one(delta: f64) -> (WeightedNetwork, Partition) {
    let (net, part) = examples::example_one(1.0, 1.0, 1.0, 1.0, 1.0);
    let net = net
        .map_weights(|e| if (e.i, e.j) == (0, 2) { e.weight + delta } else { e.weight })
        .expect("perturbation keeps weights positive");
    (net, part)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub multiplier: f64,
    /// Supremum of the manifold distance over the last 20% of the run.
    pub asymptotic_distance: f64,
}

/// Scales intra-cluster weights by each multiplier, simulates from the same
/// initial phases and records the late-time distance to the manifold.
pub fn practical_sweep(
    net: &WeightedNetwork,
    part: &Partition,
    base: &OscillatorConfig,
    multipliers: &[f64],
) -> Result<Vec<SweepPoint>> {
    dynamics::check_intra_frequencies(part, &base.natural_frequencies)?;
    if let Some(c) = multipliers.iter().find(|c| !(**c > 0.0 && c.is_finite())) {
        return Err(KuraError::InvalidConfig(format!("multiplier {c} must be positive")));
    }
    let mut points = multipliers
        .par_iter()
        .map(|&c| {
            let scaled = net.scaled(part, c, 1.0)?;
            let from = 0.8 * base.t_end;
            let mut sup: f64 = 0.0;
            dynamics::simulate_with(base, &scaled, |t, th| {
                if t >= from - 1e-12 {
                    sup = sup.max(manifold_distance(th, part));
                }
            })?;
            Ok(SweepPoint {
                multiplier: c,
                asymptotic_distance: sup,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    points.sort_by(|a, b| a.multiplier.total_cmp(&b.multiplier));
    Ok(points)
}

pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["multiplier", "asymptotic_distance"])?;
    for p in points {
        out.write_record([p.multiplier.to_string(), p.asymptotic_distance.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Homogeneous,
    Heterogeneous,
    StrongIntra,
}

impl FromStr for Scenario {
    type Err = KuraError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "homogeneous" => Ok(Scenario::Homogeneous),
            "heterogeneous" => Ok(Scenario::Heterogeneous),
            "strong-intra" => Ok(Scenario::StrongIntra),
            other => Err(KuraError::InvalidConfig(format!("unknown scenario {other:?}"))),
        }
    }
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Homogeneous, Scenario::Heterogeneous, Scenario::StrongIntra];

    /// Mean natural frequency (Hz) of each of three clusters.
    pub fn mean_hz(&self) -> [f64; 3] {
        match self {
            Scenario::Homogeneous => [60.0; 3],
            Scenario::Heterogeneous | Scenario::StrongIntra => [50.0, 60.0, 70.0],
        }
    }

    pub fn intra_multiplier(&self) -> f64 {
        match self {
            Scenario::StrongIntra => 2.0,
            _ => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrainConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub t_end: f64,
    pub dt: f64,
    pub burn_in: f64,
    /// Sampling interval for order parameters and the BOLD drive (s).
    pub metric_interval: f64,
    /// Sampling interval for correlation matrices (s).
    pub correlation_interval: f64,
    pub std_hz: f64,
}

impl BrainConfig {
    pub fn new(scenario: Scenario, seed: u64) -> Self {
        BrainConfig {
            scenario,
            seed,
            t_end: 100.0,
            dt: 1e-4,
            burn_in: 40.0,
            metric_interval: 1e-3,
            correlation_interval: 1e-2,
            std_hz: 0.5,
        }
    }

    fn stride(&self, interval: f64) -> Result<usize> {
        let k = (interval / self.dt).round();
        if k < 1.0 || ((k * self.dt) - interval).abs() > 1e-9 * interval {
            return Err(KuraError::InvalidConfig(format!(
                "sampling interval {interval} is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(k as usize)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BrainSummary {
    pub scenario: Scenario,
    pub seed: u64,
    pub nodes: usize,
    pub edges: usize,
    /// Time averages after burn-in.
    pub mean_r_global: f64,
    pub mean_r_clusters: Vec<f64>,
    /// (mean intra-cluster, mean inter-cluster) correlation.
    pub neural_block_means: (f64, f64),
    pub bold_block_means: (f64, f64),
}

#[derive(Debug, Clone)]
pub struct BrainOutputs {
    pub summary: BrainSummary,
    pub order: OrderParameterSeries,
    pub neural_correlation: CorrelationMatrix,
    pub bold_correlation: CorrelationMatrix,
    pub bold_times: Vec<f64>,
    /// `bold[i][k]` at `bold_times[k]`.
    pub bold: Vec<Vec<f64>>,
}

/// Natural frequencies and uniformly random initial phases for a brain run.
pub fn brain_initial_state(cfg: &BrainConfig, part: &Partition) -> Result<(Vec<f64>, Vec<f64>)> {
    let spec = FrequencySpec::ClusterGaussian {
        mean_hz: cfg.scenario.mean_hz().to_vec(),
        std_hz: vec![cfg.std_hz; 3],
        seed: cfg.seed,
    };
    let omega = spec.resolve(part)?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(0x9e37_79b9_7f4a_7c15));
    let theta0 = (0..part.n_nodes()).map(|_| rng.random_range(0.0..2.0 * PI)).collect();
    Ok((omega, theta0))
}

/// Runs one brain scenario on `network` (or the seeded synthetic connectome)
/// with clusters of 22 contiguous regions.
pub fn brain_experiment(cfg: &BrainConfig, network: Option<&WeightedNetwork>) -> Result<BrainOutputs> {
    let (base, part) = match network {
        Some(net) => {
            if net.n_nodes() % 3 != 0 {
                return Err(KuraError::InvalidNetwork(format!(
                    "brain runs need three equal clusters; got {} nodes",
                    net.n_nodes()
                )));
            }
            let k = net.n_nodes() / 3;
            let part = Partition::for_network(net, Partition::contiguous(&[k, k, k])?.clusters().to_vec())?;
            (net.clone(), part)
        }
        None => synthetic_connectome(&SyntheticSpec::default(), cfg.seed)?,
    };
    let net = base.scaled(&part, cfg.scenario.intra_multiplier(), 1.0)?;
    let (omega, theta0) = brain_initial_state(cfg, &part)?;
    let metric_stride = cfg.stride(cfg.metric_interval)?;
    let corr_every = cfg.stride(cfg.correlation_interval)? / metric_stride;
    let osc = OscillatorConfig {
        natural_frequencies: omega,
        initial_phases: theta0,
        dt: cfg.dt,
        t_end: cfg.t_end,
        output_stride: metric_stride,
    };
    let n = net.n_nodes();
    let mut acc = OrderParameterAccumulator::new(&part);
    let mut times = Vec::new();
    let mut drive: Vec<Vec<f64>> = vec![Vec::new(); n];
    dynamics::simulate_with(&osc, &net, |t, th| {
        acc.push(t, th);
        times.push(t);
        for (d, x) in drive.iter_mut().zip(th) {
            d.push(x.sin());
        }
    })?;
    let order = acc.finish();

    let coarse: Vec<usize> = (0..times.len()).step_by(corr_every.max(1)).collect();
    let pick = |s: &Vec<f64>| coarse.iter().map(|&k| s[k]).collect::<Vec<f64>>();
    let coarse_times: Vec<f64> = coarse.iter().map(|&k| times[k]).collect();
    let neural_correlation =
        metrics::pearson_matrix(&coarse_times, &drive.iter().map(pick).collect::<Vec<_>>(), cfg.burn_in)?;
    let bold_fine = hemodynamics::simulate_bold(&times, &drive, &HemoParams::default())?;
    let bold: Vec<Vec<f64>> = bold_fine.iter().map(pick).collect();
    let bold_correlation = metrics::pearson_matrix(&coarse_times, &bold, cfg.burn_in)?;

    let (mean_r_global, mean_r_clusters) = order.time_average(cfg.burn_in);
    let summary = BrainSummary {
        scenario: cfg.scenario,
        seed: cfg.seed,
        nodes: n,
        edges: net.edges().len(),
        mean_r_global,
        mean_r_clusters,
        neural_block_means: neural_correlation.block_means(&part),
        bold_block_means: bold_correlation.block_means(&part),
    };
    Ok(BrainOutputs {
        summary,
        order,
        neural_correlation,
        bold_correlation,
        bold_times: coarse_times,
        bold,
    })
}

/// Writes the artifacts of a brain run into `dir`.
pub fn write_brain_outputs(dir: &Path, out: &BrainOutputs) -> Result<()> {
    fs::create_dir_all(dir)?;
    out.order.write_csv(create(&dir.join("order_parameters.csv"))?)?;
    out.neural_correlation.write_csv(create(&dir.join("neural_correlation.csv"))?)?;
    out.bold_correlation.write_csv(create(&dir.join("bold_correlation.csv"))?)?;
    let n = out.bold.len();
    metrics::write_series_csv(
        create(&dir.join("bold.csv"))?,
        "y",
        &out.bold_times,
        (0..out.bold_times.len()).map(|k| out.bold.iter().map(|s| s[k]).collect()),
        n,
    )?;
    let fr = hemodynamics::frequency_response(0.01, 100.0, 200, &HemoParams::default());
    hemodynamics::write_frequency_response_csv(&fr, create(&dir.join("frequency_response.csv"))?)?;
    write_json(&dir.join("summary.json"), &out.summary)?;
    Ok(())
}

/// Largest intra-cluster phase spread of every sample in a record.
pub fn intra_spread_series(record: &SimulationRecord, part: &Partition) -> Vec<f64> {
    record.rows().map(|(_, th)| max_intra_difference(th, part)).collect()
}
