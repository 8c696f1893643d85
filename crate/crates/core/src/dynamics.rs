//! Kuramoto phase dynamics and their slow/fast split along a spanning tree.
//!
//! Phases are integrated with fixed-step RK4 and stored unwrapped.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{KuraError, Result};
use crate::graph::{Partition, WeightedNetwork};
use crate::ode::Rk4;
use crate::tree::TreeDecomposition;

/// Default integration step (s).
pub const DEFAULT_DT: f64 = 1e-3;
/// `dt * (max|omega| + 2 * max weighted degree)` above this is rejected.
pub const STIFFNESS_LIMIT: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OscillatorConfig {
    /// Natural frequencies (rad/s).
    pub natural_frequencies: Vec<f64>,
    pub initial_phases: Vec<f64>,
    /// Integration step (s).
    pub dt: f64,
    /// Final time (s).
    pub t_end: f64,
    /// Store every `output_stride`-th step.
    pub output_stride: usize,
}

impl OscillatorConfig {
    pub fn validate(&self, net: &WeightedNetwork) -> Result<()> {
        let n = net.n_nodes();
        if self.natural_frequencies.len() != n || self.initial_phases.len() != n {
            return Err(KuraError::DimensionMismatch(format!(
                "network has {n} nodes but {} frequencies and {} initial phases were given",
                self.natural_frequencies.len(),
                self.initial_phases.len()
            )));
        }
        if self
            .natural_frequencies
            .iter()
            .chain(&self.initial_phases)
            .any(|x| !x.is_finite())
        {
            return Err(KuraError::InvalidConfig("non-finite frequency or phase".into()));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) || !(self.t_end > 0.0 && self.t_end.is_finite())
        {
            return Err(KuraError::InvalidConfig(format!(
                "dt = {} and t_end = {} must be positive",
                self.dt, self.t_end
            )));
        }
        if self.output_stride == 0 {
            return Err(KuraError::InvalidConfig("output_stride must be >= 1".into()));
        }
        let max_omega = self
            .natural_frequencies
            .iter()
            .fold(0.0_f64, |a, w| a.max(w.abs()));
        let indicator = self.dt * (max_omega + 2.0 * net.max_weighted_degree());
        if indicator > STIFFNESS_LIMIT {
            return Err(KuraError::StepTooLarge {
                dt: self.dt,
                indicator,
            });
        }
        Ok(())
    }

    pub fn n_steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }
}

/// Sampled phase trajectory, stored row-major (one row of `n_nodes` phases per time).
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationRecord {
    pub times: Vec<f64>,
    n_nodes: usize,
    phases: Vec<f64>,
}

impl SimulationRecord {
    pub fn new(n_nodes: usize) -> Self {
        SimulationRecord {
            times: Vec::new(),
            n_nodes,
            phases: Vec::new(),
        }
    }

    pub fn push(&mut self, t: f64, theta: &[f64]) {
        debug_assert_eq!(theta.len(), self.n_nodes);
        self.times.push(t);
        self.phases.extend_from_slice(theta);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn theta(&self, k: usize) -> &[f64] {
        &self.phases[k * self.n_nodes..(k + 1) * self.n_nodes]
    }

    pub fn rows(&self) -> impl Iterator<Item = (f64, &[f64])> {
        self.times.iter().copied().zip(self.phases.chunks(self.n_nodes))
    }

    /// Time series of one node.
    pub fn node_series(&self, i: usize) -> Vec<f64> {
        self.phases.chunks(self.n_nodes).map(|row| row[i]).collect()
    }

    /// Intra-cluster difference coordinates `x(t_k)` for every sample.
    pub fn x_trajectory(&self, dec: &TreeDecomposition) -> Vec<DVector<f64>> {
        self.rows().map(|(_, th)| dec.x_coords(th)).collect()
    }

    /// Inter-cluster difference coordinates `z(t_k)` for every sample.
    pub fn z_trajectory(&self, dec: &TreeDecomposition) -> Vec<DVector<f64>> {
        self.rows().map(|(_, th)| dec.z_coords(th)).collect()
    }
}

/// Kuramoto vector field `omega - B W sin(B^T theta)`, evaluated edge by edge.
pub fn kuramoto_rhs(net: &WeightedNetwork, omega: &[f64], theta: &[f64], out: &mut [f64]) {
    out.copy_from_slice(omega);
    for e in net.edges() {
        let s = e.weight * (theta[e.j] - theta[e.i]).sin();
        out[e.i] += s;
        out[e.j] -= s;
    }
}

/// Node-wise form `omega_i + sum_j a_ij sin(theta_j - theta_i)` over the dense
/// adjacency. Slower than [`kuramoto_rhs`]; kept as an independent route.
pub fn kuramoto_rhs_summation(net: &WeightedNetwork, omega: &[f64], theta: &[f64]) -> Vec<f64> {
    let a = net.adjacency();
    let n = net.n_nodes();
    (0..n)
        .map(|i| omega[i] + (0..n).map(|j| a[(i, j)] * (theta[j] - theta[i]).sin()).sum::<f64>())
        .collect()
}

/// Integrates the network and hands every stored sample to `observer`.
pub fn simulate_with<F>(config: &OscillatorConfig, net: &WeightedNetwork, mut observer: F) -> Result<()>
where
    F: FnMut(f64, &[f64]),
{
    config.validate(net)?;
    let n = net.n_nodes();
    let omega = &config.natural_frequencies;
    let mut theta = config.initial_phases.clone();
    let mut rk = Rk4::new(n);
    let steps = config.n_steps();
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| kuramoto_rhs(net, omega, y, dy);
    observer(0.0, &theta);
    for k in 0..steps {
        let t = k as f64 * config.dt;
        rk.step(&mut rhs, t, &mut theta, config.dt);
        if (k + 1) % config.output_stride == 0 || k + 1 == steps {
            observer((k + 1) as f64 * config.dt, &theta);
        }
    }
    Ok(())
}

/// Fixed-step RK4 trajectory of the Kuramoto model.
pub fn simulate(config: &OscillatorConfig, net: &WeightedNetwork) -> Result<SimulationRecord> {
    let mut rec = SimulationRecord::new(net.n_nodes());
    simulate_with(config, net, |t, th| rec.push(t, th))?;
    Ok(rec)
}

/// Time-scale separation: `epsilon` and the normalized gaps `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScale {
    pub epsilon: f64,
    pub eta: DVector<f64>,
}

/// Checks that natural frequencies agree within every cluster.
pub fn check_intra_frequencies(part: &Partition, omega: &[f64]) -> Result<()> {
    let scale = omega.iter().fold(0.0_f64, |a, w| a.max(w.abs()));
    let tol = 1e-9 * (1.0 + scale);
    for (p, c) in part.clusters().iter().enumerate() {
        let lo = c.iter().map(|&i| omega[i]).fold(f64::INFINITY, f64::min);
        let hi = c.iter().map(|&i| omega[i]).fold(f64::NEG_INFINITY, f64::max);
        if hi - lo > tol {
            return Err(KuraError::IntraFrequencyMismatch {
                cluster: p,
                spread: hi - lo,
            });
        }
    }
    Ok(())
}

/// `epsilon = 1 / min_{inter edges} |omega_i - omega_j|` and
/// `eta = epsilon * Bt_inter^T omega`.
pub fn epsilon(dec: &TreeDecomposition, part: &Partition, omega: &[f64]) -> Result<TimeScale> {
    if omega.len() != part.n_nodes() {
        return Err(KuraError::DimensionMismatch(format!(
            "{} frequencies for {} nodes",
            omega.len(),
            part.n_nodes()
        )));
    }
    check_intra_frequencies(part, omega)?;
    let mut min_gap = f64::INFINITY;
    for e in dec.incidence().inter_edges() {
        let gap = (omega[e.i] - omega[e.j]).abs();
        if gap == 0.0 {
            return Err(KuraError::ZeroInterFrequencyGap { i: e.i, j: e.j });
        }
        min_gap = min_gap.min(gap);
    }
    let eps = 1.0 / min_gap;
    let eta = dec.b_tilde_inter().transpose() * DVector::from_column_slice(omega) * eps;
    debug_assert!(eta.iter().all(|v| v.abs() >= 1.0 - 1e-12));
    Ok(TimeScale { epsilon: eps, eta })
}

/// Closed-form intra (`f`) and inter (`g`) vector fields in tree coordinates:
///
/// `f(x,z) = -Bt_intra^T B_intra W_intra sin(R1 x) - Bt_intra^T B_inter W_inter sin(R3 x + R4 z)`
/// and `g` likewise with `Bt_inter`.
#[derive(Debug, Clone)]
pub struct PerturbationFields {
    f_intra: DMatrix<f64>,
    f_inter: DMatrix<f64>,
    g_intra: DMatrix<f64>,
    g_inter: DMatrix<f64>,
    r1: DMatrix<f64>,
    r3: DMatrix<f64>,
    r4: DMatrix<f64>,
}

impl PerturbationFields {
    pub fn new(dec: &TreeDecomposition) -> Self {
        let inc = dec.incidence();
        let bw_intra = inc.b_intra() * inc.w_intra();
        let bw_inter = inc.b_inter() * inc.w_inter();
        let bt_intra_t = dec.b_tilde_intra().transpose();
        let bt_inter_t = dec.b_tilde_inter().transpose();
        PerturbationFields {
            f_intra: -&bt_intra_t * &bw_intra,
            f_inter: -&bt_intra_t * &bw_inter,
            g_intra: -&bt_inter_t * &bw_intra,
            g_inter: -&bt_inter_t * &bw_inter,
            r1: dec.r1().clone(),
            r3: dec.r3().clone(),
            r4: dec.r4().clone(),
        }
    }

    fn sines(&self, x: &DVector<f64>, z: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let s_intra = (&self.r1 * x).map(f64::sin);
        let s_inter = (&self.r3 * x + &self.r4 * z).map(f64::sin);
        (s_intra, s_inter)
    }

    pub fn f(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let (si, se) = self.sines(x, z);
        &self.f_intra * si + &self.f_inter * se
    }

    pub fn g(&self, x: &DVector<f64>, z: &DVector<f64>) -> DVector<f64> {
        let (si, se) = self.sines(x, z);
        &self.g_intra * si + &self.g_inter * se
    }

    /// `-Bt_intra^T B_inter W_inter`, the coupling of inter edges into `x`.
    pub fn intra_from_inter(&self) -> &DMatrix<f64> {
        &self.f_inter
    }

    /// `-Bt_intra^T B_intra W_intra`.
    pub fn intra_from_intra(&self) -> &DMatrix<f64> {
        &self.f_intra
    }

    /// `-Bt_inter^T B_inter W_inter`.
    pub fn inter_from_inter(&self) -> &DMatrix<f64> {
        &self.g_inter
    }

    pub fn r1(&self) -> &DMatrix<f64> {
        &self.r1
    }

    pub fn r3(&self) -> &DMatrix<f64> {
        &self.r3
    }

    pub fn r4(&self) -> &DMatrix<f64> {
        &self.r4
    }

    /// Frozen fast subsystem `dz/dtau = eta + epsilon g(0, z)`.
    pub fn frozen_inter_rhs(&self, scale: &TimeScale, z: &DVector<f64>) -> DVector<f64> {
        let x0 = DVector::zeros(self.r1.ncols());
        &scale.eta + self.g(&x0, z) * scale.epsilon
    }

    /// Singular-perturbation form in real time: `(dx/dt, dz/dt) = (f, eta/epsilon + g)`.
    pub fn slow_fast_rhs(
        &self,
        scale: &TimeScale,
        x: &DVector<f64>,
        z: &DVector<f64>,
    ) -> (DVector<f64>, DVector<f64>) {
        let dx = self.f(x, z);
        let dz = &scale.eta / scale.epsilon + self.g(x, z);
        (dx, dz)
    }
}

/// Integrates the frozen fast subsystem in the stretched time `tau`, returning
/// `zeta` at `tau_k = k * dtau`, `k = 0..=steps`.
pub fn integrate_frozen_inter(
    fields: &PerturbationFields,
    scale: &TimeScale,
    z0: &DVector<f64>,
    dtau: f64,
    steps: usize,
) -> Vec<DVector<f64>> {
    let m = z0.len();
    let mut rk = Rk4::new(m);
    let mut z = z0.as_slice().to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(z0.clone());
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
        let d = fields.frozen_inter_rhs(scale, &DVector::from_column_slice(y));
        dy.copy_from_slice(d.as_slice());
    };
    for k in 0..steps {
        rk.step(&mut rhs, k as f64 * dtau, &mut z, dtau);
        out.push(DVector::from_column_slice(&z));
    }
    out
}

/// Initial phases near the cluster synchronization manifold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NearManifold {
    pub seed: u64,
    /// Half-width of the i.i.d. uniform per-node perturbation (rad).
    pub amplitude: f64,
    /// Rescale the perturbation so the manifold distance does not exceed this.
    pub max_distance: Option<f64>,
}

impl Default for NearManifold {
    fn default() -> Self {
        NearManifold {
            seed: 0,
            amplitude: 0.1,
            max_distance: None,
        }
    }
}

impl NearManifold {
    /// Per-cluster common phase uniform on `[0, 2 pi)` plus a uniform
    /// perturbation on `[-amplitude, amplitude]` per node.
    pub fn sample(&self, part: &Partition) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let common: Vec<f64> = (0..part.n_clusters())
            .map(|_| rng.random_range(0.0..2.0 * PI))
            .collect();
        let mut delta: Vec<f64> = (0..part.n_nodes())
            .map(|_| {
                if self.amplitude > 0.0 {
                    rng.random_range(-self.amplitude..=self.amplitude)
                } else {
                    0.0
                }
            })
            .collect();
        if let Some(cap) = self.max_distance {
            let base: Vec<f64> = (0..part.n_nodes()).map(|i| common[part.cluster_of(i)]).collect();
            let theta: Vec<f64> = base.iter().zip(&delta).map(|(b, d)| b + d).collect();
            let dist = crate::metrics::manifold_distance(&theta, part);
            if dist > cap {
                let s = cap / dist;
                delta.iter_mut().for_each(|d| *d *= s);
            }
        }
        (0..part.n_nodes())
            .map(|i| common[part.cluster_of(i)] + delta[i])
            .collect()
    }
}
