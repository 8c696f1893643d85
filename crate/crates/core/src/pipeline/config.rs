use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::dynamics::{NearManifold, OscillatorConfig, DEFAULT_DT};
use crate::error::{KuraError, Result};
use crate::graph::Partition;

/// How natural frequencies are assigned.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FrequencySpec {
    /// One value per node, in rad/s.
    Explicit { omega: Vec<f64> },
    /// Per-cluster Gaussian in Hz; `omega_i = 2 pi * sample`.
    ClusterGaussian {
        mean_hz: Vec<f64>,
        std_hz: Vec<f64>,
        seed: u64,
    },
}

impl FrequencySpec {
    pub fn resolve(&self, part: &Partition) -> Result<Vec<f64>> {
        match self {
            FrequencySpec::Explicit { omega } => {
                if omega.len() != part.n_nodes() {
                    return Err(KuraError::DimensionMismatch(format!(
                        "{} frequencies for {} nodes",
                        omega.len(),
                        part.n_nodes()
                    )));
                }
                Ok(omega.clone())
            }
            FrequencySpec::ClusterGaussian { mean_hz, std_hz, seed } => {
                let r = part.n_clusters();
                if mean_hz.len() != r || std_hz.len() != r {
                    return Err(KuraError::DimensionMismatch(format!(
                        "{r} clusters but {} means and {} deviations",
                        mean_hz.len(),
                        std_hz.len()
                    )));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let dists = mean_hz
                    .iter()
                    .zip(std_hz)
                    .map(|(&m, &s)| {
                        Normal::new(m, s).map_err(|e| KuraError::InvalidConfig(format!("N({m}, {s}): {e}")))
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok((0..part.n_nodes())
                    .map(|i| 2.0 * PI * dists[part.cluster_of(i)].sample(&mut rng))
                    .collect())
            }
        }
    }
}

fn default_dt() -> f64 {
    DEFAULT_DT
}

fn default_burn_in() -> f64 {
    40.0
}

fn default_stride() -> usize {
    1
}

fn default_multiplier() -> f64 {
    1.0
}

fn default_amplitude() -> f64 {
    0.1
}

/// A reproducible run description, read from and written to JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub network: Option<PathBuf>,
    /// Overrides the partition stored with the network.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub partition: Option<Vec<Vec<usize>>>,
    pub frequencies: FrequencySpec,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub t_end: f64,
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
    #[serde(default = "default_stride")]
    pub output_stride: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
    /// Multiplier applied to intra-cluster weights.
    #[serde(default = "default_multiplier")]
    pub intra_multiplier: f64,
    /// Explicit initial phases; otherwise sampled near the manifold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_phases: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_amplitude")]
    pub initial_amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial_max_distance: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(frequencies: FrequencySpec, t_end: f64) -> Self {
        ExperimentConfig {
            network: None,
            partition: None,
            frequencies,
            dt: DEFAULT_DT,
            t_end,
            burn_in: default_burn_in(),
            output_stride: 1,
            output_dir: None,
            intra_multiplier: 1.0,
            initial_phases: None,
            seed: 0,
            initial_amplitude: default_amplitude(),
            initial_max_distance: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(KuraError::InvalidConfig(format!("{name} = {v} must be positive")))
            }
        };
        positive("dt", self.dt)?;
        positive("t_end", self.t_end)?;
        positive("intra_multiplier", self.intra_multiplier)?;
        if !(self.burn_in >= 0.0 && self.burn_in < self.t_end) {
            return Err(KuraError::InvalidConfig(format!(
                "burn_in = {} must lie in [0, t_end)",
                self.burn_in
            )));
        }
        if self.output_stride == 0 {
            return Err(KuraError::InvalidConfig("output_stride must be >= 1".into()));
        }
        if !(self.initial_amplitude >= 0.0 && self.initial_amplitude.is_finite()) {
            return Err(KuraError::InvalidConfig("initial_amplitude must be >= 0".into()));
        }
        if let FrequencySpec::ClusterGaussian { std_hz, .. } = &self.frequencies {
            if std_hz.iter().any(|s| !(*s >= 0.0 && s.is_finite())) {
                return Err(KuraError::InvalidConfig("std_hz entries must be >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn from_json_str(s: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(s)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn initial_phases_for(&self, part: &Partition) -> Result<Vec<f64>> {
        match &self.initial_phases {
            Some(th) if th.len() != part.n_nodes() => Err(KuraError::DimensionMismatch(format!(
                "{} initial phases for {} nodes",
                th.len(),
                part.n_nodes()
            ))),
            Some(th) => Ok(th.clone()),
            None => Ok(NearManifold {
                seed: self.seed,
                amplitude: self.initial_amplitude,
                max_distance: self.initial_max_distance,
            }
            .sample(part)),
        }
    }

    pub fn oscillator_config(&self, part: &Partition) -> Result<OscillatorConfig> {
        Ok(OscillatorConfig {
            natural_frequencies: self.frequencies.resolve(part)?,
            initial_phases: self.initial_phases_for(part)?,
            dt: self.dt,
            t_end: self.t_end,
            output_stride: self.output_stride,
        })
    }
}
