//! Averaging-based stability certificates for the cluster synchronization
//! manifold.
//!
//! Matrix norms without a subscript are spectral norms; `inf` denotes the
//! induced infinity norm. The window `T` is measured in the stretched time
//! `tau = t / epsilon`, so the certificate depends on `T` only through
//! `epsilon * T`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{self, PerturbationFields, TimeScale};
use crate::error::{KuraError, Result};
use crate::graph::{self, Partition, WeightedNetwork};
use crate::linalg::{self, inf_norm, spectral_norm};
use crate::ode::Rk4;
use crate::tree::TreeDecomposition;

/// Range of `epsilon * T` searched when minimizing the certificate.
pub const WINDOW_RANGE: (f64, f64) = (1e-3, 1e3);
const WINDOW_GRID: usize = 200;
/// Exhaustive sign enumeration for the exact Jacobian supremum is used up to
/// this many inter-cluster tree edges.
pub const MAX_VERTEX_EDGES: usize = 16;

/// The matrices that enter the Jacobian `J(z) = J_av - M diag(cos(R4 z)) R3`.
#[derive(Debug, Clone)]
pub struct JacobianParts {
    /// `J_av = -Bt_intra^T B_intra W_intra R1`.
    pub j_av: DMatrix<f64>,
    /// `M = Bt_intra^T B_inter W_inter`.
    pub m: DMatrix<f64>,
    pub r3: DMatrix<f64>,
    pub r4: DMatrix<f64>,
    /// `Psi = Bt_inter^T B_inter W_inter R4`.
    pub psi: DMatrix<f64>,
    r4_signed_unit_rows: bool,
}

impl JacobianParts {
    pub fn new(dec: &TreeDecomposition) -> Self {
        let inc = dec.incidence();
        let j_av = -(dec.b_tilde_intra().transpose() * inc.b_intra() * inc.w_intra() * dec.r1());
        let bw_inter = inc.b_inter() * inc.w_inter();
        let m = dec.b_tilde_intra().transpose() * &bw_inter;
        let psi = dec.b_tilde_inter().transpose() * &bw_inter * dec.r4();
        JacobianParts {
            j_av,
            m,
            r3: dec.r3().clone(),
            r4: dec.r4().clone(),
            psi,
            r4_signed_unit_rows: dec.r4_signed_unit_rows(),
        }
    }

    /// `J(z) = d f / d x` at `(0, z)`.
    pub fn jacobian_at(&self, z: &DVector<f64>) -> DMatrix<f64> {
        let c = (&self.r4 * z).map(f64::cos);
        &self.j_av - &self.m * DMatrix::from_diagonal(&c) * &self.r3
    }

    /// Two-cluster split: `J_intra = J_av`, `J_inter = -M R3`.
    pub fn intra_inter(&self) -> (DMatrix<f64>, DMatrix<f64>) {
        (self.j_av.clone(), -(&self.m * &self.r3))
    }
}

pub fn average_jacobian(dec: &TreeDecomposition) -> DMatrix<f64> {
    JacobianParts::new(dec).j_av
}

/// `gamma = ||M|| ||R3|| max{2, ||Psi||_inf}`.
///
/// When `R4` is not a signed selection matrix the bound on
/// `d/dz cos(R4 z)` picks up an extra factor `||R4||_inf`.
pub fn gamma_bound(parts: &JacobianParts) -> f64 {
    let base = spectral_norm(&parts.m) * spectral_norm(&parts.r3) * inf_norm(&parts.psi).max(2.0);
    if parts.r4_signed_unit_rows {
        base
    } else {
        base * inf_norm(&parts.r4).max(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhoMethod {
    /// Maximum of `||J||` over all sign patterns of `cos(z_j)`.
    Vertex,
    /// `||J_av|| + ||M|| ||R3||`.
    Analytic,
}

/// `||J_av|| + ||M|| ||R3||`, valid for any `R4`.
pub fn rho_analytic(parts: &JacobianParts) -> f64 {
    spectral_norm(&parts.j_av) + spectral_norm(&parts.m) * spectral_norm(&parts.r3)
}

/// `sup_z ||J(z)||`.
///
/// With signed selection rows, `cos(R4 z)_k = cos(z_{j(k)})`, so `J` is affine
/// in `c = cos(z) in [-1, 1]^m` and the convex norm peaks at a vertex of the
/// box. Falls back to [`rho_analytic`] otherwise or when `m` is large.
pub fn rho_bound(parts: &JacobianParts) -> (f64, RhoMethod) {
    let m = parts.r4.ncols();
    if !parts.r4_signed_unit_rows || m > MAX_VERTEX_EDGES {
        return (rho_analytic(parts), RhoMethod::Analytic);
    }
    let owner: Vec<usize> = parts
        .r4
        .row_iter()
        .map(|row| row.iter().position(|x| x.abs() > 0.5).expect("signed unit row"))
        .collect();
    let rho = (0u32..1 << m)
        .into_par_iter()
        .map(|mask| {
            let d = DVector::from_iterator(
                owner.len(),
                owner.iter().map(|&j| if mask >> j & 1 == 1 { -1.0 } else { 1.0 }),
            );
            spectral_norm(&(&parts.j_av - &parts.m * DMatrix::from_diagonal(&d) * &parts.r3))
        })
        .reduce(|| 0.0, f64::max);
    (rho, RhoMethod::Vertex)
}

/// `kappa = exp(-lambda2 eps T) + gamma eps T (1/T + eps) + 2 (exp(rho eps T) - 1 - rho eps T)`.
pub fn kappa(gamma: f64, eps: f64, t: f64, rho: f64, lambda2: f64) -> f64 {
    let u = eps * t;
    (-lambda2 * u).exp() + gamma * u * (1.0 / t + eps) + 2.0 * ((rho * u).exp_m1() - rho * u)
}

/// Constants of the certificate that do not depend on `epsilon`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KappaParams {
    pub gamma: f64,
    pub rho: f64,
    pub lambda2: f64,
}

impl KappaParams {
    pub fn kappa(&self, eps: f64, t: f64) -> f64 {
        kappa(self.gamma, eps, t, self.rho, self.lambda2)
    }

    /// Minimizes `kappa` over `T in [1e-3/eps, 1e3/eps]`: a 200-point log grid
    /// followed by golden-section refinement around the best grid point.
    /// Returns `(T_star, kappa_min)`.
    pub fn minimize_over_window(&self, eps: f64) -> (f64, f64) {
        let (lo, hi) = (WINDOW_RANGE.0.ln(), WINDOW_RANGE.1.ln());
        let at = |s: f64| self.kappa(eps, s.exp() / eps);
        let step = (hi - lo) / (WINDOW_GRID - 1) as f64;
        let mut best = (lo, at(lo));
        for k in 1..WINDOW_GRID {
            let s = lo + k as f64 * step;
            let v = at(s);
            if v < best.1 {
                best = (s, v);
            }
        }
        let (mut a, mut b) = ((best.0 - step).max(lo), (best.0 + step).min(hi));
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (at(c), at(d));
        for _ in 0..80 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = at(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = at(d);
            }
            if b - a < 1e-12 {
                break;
            }
        }
        let s = 0.5 * (a + b);
        let v = at(s);
        if v < best.1 {
            best = (s, v);
        }
        (best.0.exp() / eps, best.1)
    }

    pub fn certifies(&self, eps: f64) -> bool {
        self.minimize_over_window(eps).1 < 1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Certified,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityCertificate {
    pub gamma: f64,
    pub rho: f64,
    pub lambda2: f64,
    pub epsilon: f64,
    /// Best window in stretched time.
    #[serde(rename = "T_star")]
    pub t_star: f64,
    #[serde(rename = "kappa")]
    pub kappa_value: f64,
    pub verdict: Verdict,
}

/// Everything the certificate and the related checks need about one instance.
#[derive(Debug, Clone)]
pub struct CertificateContext {
    pub decomposition: TreeDecomposition,
    pub parts: JacobianParts,
    pub scale: TimeScale,
    pub params: KappaParams,
    pub rho_method: RhoMethod,
}

fn assumption<T>(what: &str, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        KuraError::IntraFrequencyMismatch { .. } | KuraError::ZeroInterFrequencyGap { .. } => {
            KuraError::AssumptionViolated(format!("{what}: {e}"))
        }
        other => other,
    })
}

impl CertificateContext {
    pub fn new(net: &WeightedNetwork, part: &Partition, omega: &[f64]) -> Result<Self> {
        let eep = graph::check_partition(net, part)?;
        if !eep.is_exact {
            return Err(KuraError::AssumptionViolated(format!(
                "partition is not equitable (deviation {:.3e})",
                eep.deviation_k
            )));
        }
        let decomposition = TreeDecomposition::new(net, part)?;
        let scale = assumption(
            "frequency assumption",
            dynamics::epsilon(&decomposition, part, omega),
        )?;
        let parts = JacobianParts::new(&decomposition);
        let gamma = gamma_bound(&parts);
        let (rho, rho_method) = rho_bound(&parts);
        let lambda2 = graph::algebraic_connectivity(net, part)?;
        Ok(CertificateContext {
            decomposition,
            parts,
            scale,
            params: KappaParams { gamma, rho, lambda2 },
            rho_method,
        })
    }

    pub fn certificate(&self) -> StabilityCertificate {
        let eps = self.scale.epsilon;
        let (t_star, k) = self.params.minimize_over_window(eps);
        StabilityCertificate {
            gamma: self.params.gamma,
            rho: self.params.rho,
            lambda2: self.params.lambda2,
            epsilon: eps,
            t_star,
            kappa_value: k,
            verdict: if k < 1.0 {
                Verdict::Certified
            } else {
                Verdict::NotCertified
            },
        }
    }
}

pub fn certify(net: &WeightedNetwork, part: &Partition, omega: &[f64]) -> Result<StabilityCertificate> {
    Ok(CertificateContext::new(net, part, omega)?.certificate())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub gamma: f64,
    /// `+inf` when every `epsilon` is certified.
    pub epsilon_star: f64,
}

/// `sup { eps : min_T kappa(gamma, eps, T) < 1 }` by bisection on `log eps`.
pub fn epsilon_star(gamma: f64, rho: f64, lambda2: f64) -> Result<f64> {
    let p = KappaParams { gamma, rho, lambda2 };
    if gamma == 0.0 {
        // kappa no longer depends on eps once T is rescaled
        return if p.certifies(1.0) {
            Ok(f64::INFINITY)
        } else {
            Err(KuraError::NoFeasibleEpsilon { gamma })
        };
    }
    let mut lo = 1.0 / gamma;
    while !p.certifies(lo) {
        lo /= 16.0;
        if lo < 1e-300 {
            return Err(KuraError::NoFeasibleEpsilon { gamma });
        }
    }
    let mut hi = lo * 2.0;
    while p.certifies(hi) {
        lo = hi;
        hi *= 2.0;
        if hi > 1e300 {
            return Ok(f64::INFINITY);
        }
    }
    while hi / lo - 1.0 > 1e-5 {
        let mid = (lo * hi).sqrt();
        if p.certifies(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Boundary of the certified region over `gamma_grid`, in the order given.
pub fn tradeoff_curve(rho: f64, lambda2: f64, gamma_grid: &[f64]) -> Result<Vec<TradeoffPoint>> {
    if let Some(g) = gamma_grid.iter().find(|g| !(g.is_finite() && **g >= 0.0)) {
        return Err(KuraError::InvalidConfig(format!("gamma grid value {g} is not >= 0")));
    }
    let points: Vec<TradeoffPoint> = gamma_grid
        .par_iter()
        .map(|&gamma| epsilon_star(gamma, rho, lambda2).map(|e| TradeoffPoint { gamma, epsilon_star: e }))
        .collect::<Result<_>>()?;
    let mut sorted = points.clone();
    sorted.sort_by(|a, b| a.gamma.total_cmp(&b.gamma));
    for w in sorted.windows(2) {
        assert!(
            w[1].epsilon_star <= w[0].epsilon_star * (1.0 + 1e-4),
            "tradeoff curve increases between gamma = {} and {}",
            w[0].gamma,
            w[1].gamma
        );
    }
    Ok(points)
}

pub fn write_tradeoff_csv<W: std::io::Write>(points: &[TradeoffPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["gamma", "epsilon_star"])?;
    for p in points {
        out.write_record([p.gamma.to_string(), p.epsilon_star.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TwoClusterVerdict {
    CertifiedCommuting,
    NotApplicable,
    NotCertified,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoClusterReport {
    pub verdict: TwoClusterVerdict,
    /// `||[J_intra, J_inter]||_F`.
    pub commutator_norm: f64,
    /// `||[J_intra, J_inter]||_F / (||J_intra||_F ||J_inter||_F)`, 0 when `J_inter = 0`.
    pub relative_commutator: f64,
    pub omega_bar: Option<f64>,
    pub a_bar: Option<f64>,
    /// Period of the frozen inter-cluster motion in stretched time.
    pub period: Option<f64>,
}

/// Commutation test for two clusters.
pub fn two_cluster_test(net: &WeightedNetwork, part: &Partition, omega: &[f64]) -> Result<TwoClusterReport> {
    let dec = TreeDecomposition::new(net, part)?;
    let parts = JacobianParts::new(&dec);
    let (ji, je) = parts.intra_inter();
    let comm = (&ji * &je - &je * &ji).norm();
    let scale = ji.norm() * je.norm();
    let relative = if scale > 0.0 { comm / scale } else { 0.0 };
    let mut report = TwoClusterReport {
        verdict: TwoClusterVerdict::NotApplicable,
        commutator_norm: comm,
        relative_commutator: relative,
        omega_bar: None,
        a_bar: None,
        period: None,
    };
    if part.n_clusters() != 2 {
        return Ok(report);
    }
    let ts = assumption("frequency assumption", dynamics::epsilon(&dec, part, omega))?;
    let eep = graph::check_partition(net, part)?;
    if !eep.is_exact {
        return Err(KuraError::AssumptionViolated(format!(
            "partition is not equitable (deviation {:.3e})",
            eep.deviation_k
        )));
    }
    let (c1, c2) = (&part.clusters()[0], &part.clusters()[1]);
    let omega_bar = 1.0 / ts.epsilon;
    let a_bar = coupling_between(net, c1[0], c2) + coupling_between(net, c2[0], c1);
    report.omega_bar = Some(omega_bar);
    report.a_bar = Some(a_bar);
    if omega_bar <= a_bar {
        return Ok(report);
    }
    report.period = Some(period_t2(omega_bar, a_bar)?);
    report.verdict = if comm <= 1e-9 * scale {
        TwoClusterVerdict::CertifiedCommuting
    } else {
        TwoClusterVerdict::NotCertified
    };
    Ok(report)
}

fn coupling_between(net: &WeightedNetwork, i: usize, cluster: &[usize]) -> f64 {
    cluster.iter().map(|&k| net.weight(i, k)).sum()
}

/// `T2 = 2 pi omega_bar / sqrt(omega_bar^2 - a_bar^2)`.
pub fn period_t2(omega_bar: f64, a_bar: f64) -> Result<f64> {
    if !(omega_bar > a_bar) || a_bar < 0.0 {
        return Err(KuraError::FrequencyDominanceViolated { omega_bar, a_bar });
    }
    Ok(2.0 * std::f64::consts::PI * omega_bar / (omega_bar * omega_bar - a_bar * a_bar).sqrt())
}

/// Period of a one-dimensional rotation `dz/dtau = h(z)` with `h` of fixed
/// sign, measured as the mean time between successive crossings of
/// `z0 + 2 pi k`, with linear interpolation inside a step.
pub fn measure_rotation_period<F>(mut h: F, z0: f64, dtau: f64, periods: usize) -> f64
where
    F: FnMut(f64) -> f64,
{
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut rk = Rk4::new(1);
    let mut z = [z0];
    let mut t = 0.0;
    let mut crossings = vec![0.0];
    let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| dy[0] = h(y[0]);
    while crossings.len() <= periods {
        let prev = (z[0] - z0).abs();
        rk.step(&mut rhs, t, &mut z, dtau);
        t += dtau;
        let cur = (z[0] - z0).abs();
        let target = two_pi * crossings.len() as f64;
        if cur >= target {
            crossings.push(t - dtau + dtau * (target - prev) / (cur - prev));
        }
    }
    (crossings[periods] - crossings[0]) / periods as f64
}

/// Deviation of the windowed average of `J` from `J_av` together with the
/// bound `gamma (1/T + eps)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingSample {
    pub tau: f64,
    pub window: f64,
    pub epsilon: f64,
    pub deviation: f64,
    pub bound: f64,
}

/// `||(1/T) int_tau^{tau+T} J(s, eps) ds - J_av||` along the frozen
/// inter-cluster solution from `z0`, integrated with RK4 at step `dtau` and
/// averaged with the trapezoid rule.
pub fn averaging_deviation(
    fields: &PerturbationFields,
    parts: &JacobianParts,
    eta: &DVector<f64>,
    z0: &DVector<f64>,
    eps: f64,
    tau: f64,
    window: f64,
    dtau: f64,
) -> AveragingSample {
    let scale = TimeScale {
        epsilon: eps,
        eta: eta.clone(),
    };
    let start = (tau / dtau).round() as usize;
    let len = ((window / dtau).round() as usize).max(1);
    let zeta = dynamics::integrate_frozen_inter(fields, &scale, z0, dtau, start + len);
    // the average of J only needs the average of cos(R4 zeta)
    let q = parts.r4.nrows();
    let mut acc = DVector::<f64>::zeros(q);
    for k in start..=start + len {
        let w = if k == start || k == start + len { 0.5 } else { 1.0 };
        acc += (&parts.r4 * &zeta[k]).map(f64::cos) * w;
    }
    acc /= len as f64;
    let dev = spectral_norm(&(&parts.m * DMatrix::from_diagonal(&acc) * &parts.r3));
    let t_eff = len as f64 * dtau;
    AveragingSample {
        tau: start as f64 * dtau,
        window: t_eff,
        epsilon: eps,
        deviation: dev,
        bound: gamma_bound(parts) * (1.0 / t_eff + eps),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport {
    /// Sampling interval in real time.
    pub sample_interval: f64,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    /// `(V_{k+1} - V_k) / (t_{k+1} - t_k)`.
    pub rates: Vec<f64>,
    /// Indices `k` where the sampled decrease condition fails.
    pub violations: Vec<usize>,
    /// Largest `c3` with `rate_k <= -c3 ||x_k||^2` for all `k`; `None` when
    /// every sampled `x_k` vanishes.
    pub c3: Option<f64>,
}

/// Solves `J_av^T P + P J_av = -I`.
pub fn lyapunov_matrix(parts: &JacobianParts) -> Result<DMatrix<f64>> {
    linalg::solve_lyapunov(&parts.j_av)
}

/// Samples `V(x) = x^T P x` every `interval` seconds of a trajectory of `x`
/// and checks that it decreases between consecutive samples.
pub fn lyapunov_sampled_check(
    p: &DMatrix<f64>,
    times: &[f64],
    xs: &[DVector<f64>],
    interval: f64,
) -> LyapunovReport {
    let mut st = Vec::new();
    let mut sx: Vec<&DVector<f64>> = Vec::new();
    let mut next = times.first().copied().unwrap_or(0.0);
    for (t, x) in times.iter().zip(xs) {
        if *t + 1e-9 * interval >= next {
            st.push(*t);
            sx.push(x);
            next += interval;
        }
    }
    let values: Vec<f64> = sx.iter().map(|x| x.dot(&(p * *x))).collect();
    let mut rates = Vec::new();
    let mut violations = Vec::new();
    let mut c3 = f64::INFINITY;
    for k in 0..values.len().saturating_sub(1) {
        let rate = (values[k + 1] - values[k]) / (st[k + 1] - st[k]);
        rates.push(rate);
        let nx2 = sx[k].norm_squared();
        if nx2 > 0.0 {
            if rate >= 0.0 {
                violations.push(k);
            }
            c3 = c3.min(-rate / nx2);
        } else if rate > 0.0 {
            violations.push(k);
        }
    }
    LyapunovReport {
        sample_interval: interval,
        times: st,
        values,
        rates,
        violations,
        c3: if c3.is_finite() { Some(c3) } else { None },
    }
}
