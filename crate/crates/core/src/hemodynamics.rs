//! Balloon–Windkessel hemodynamics and the BOLD readout.
//!
//! Parameter names carry suffixes (`kappa_s`, `gamma_s`, `tau_b`, `alpha_s`)
//! to keep them apart from the stability certificate's symbols.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::{Matrix2, Matrix4, Vector2, Vector4};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{KuraError, Result};
use crate::ode::Rk4;

/// Default hemodynamic integration step (s).
pub const HEMO_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemoParams {
    /// Signal decay rate (1/s).
    pub kappa_s: f64,
    /// Flow-dependent elimination rate (1/s).
    pub gamma_s: f64,
    /// Hemodynamic transit time (s).
    pub tau_b: f64,
    /// Grubb's vessel stiffness exponent.
    pub alpha_s: f64,
    /// Resting oxygen extraction fraction.
    pub e0: f64,
    /// Resting blood volume fraction.
    pub v0: f64,
    pub k1: f64,
    pub k2: f64,
    pub k3: f64,
}

impl Default for HemoParams {
    fn default() -> Self {
        let e0 = 0.34;
        HemoParams {
            kappa_s: 0.65,
            gamma_s: 0.41,
            tau_b: 0.98,
            alpha_s: 0.33,
            e0,
            v0: 0.02,
            k1: 7.0 * e0,
            k2: 2.0,
            k3: 2.0 * e0 - 0.2,
        }
    }
}

impl HemoParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.kappa_s, self.gamma_s, self.tau_b, self.alpha_s, self.e0, self.v0];
        if positive.iter().any(|p| !(*p > 0.0 && p.is_finite()))
            || self.e0 >= 1.0
            || self.alpha_s >= 1.0
        {
            return Err(KuraError::InvalidConfig(format!("invalid hemodynamic parameters {self:?}")));
        }
        Ok(())
    }

    /// Oxygen extraction `E(f) = 1 - (1 - E0)^(1/f)`.
    pub fn extraction(&self, f: f64) -> f64 {
        1.0 - (1.0 - self.e0).powf(1.0 / f)
    }

    /// Outflow `v^(1/alpha)`.
    pub fn outflow(&self, v: f64) -> f64 {
        v.powf(1.0 / self.alpha_s)
    }

    /// Input gain of the linearized volume/deoxyhemoglobin stage.
    pub fn beta(&self) -> f64 {
        (self.e0 + (1.0 - self.e0) * (1.0 - self.e0).ln()) / (self.tau_b * self.e0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HemoState {
    /// Vasodilatory signal.
    pub s: f64,
    /// Blood inflow.
    pub f: f64,
    /// Blood volume.
    pub v: f64,
    /// Deoxyhemoglobin content.
    pub q: f64,
}

impl HemoState {
    pub const EQUILIBRIUM: HemoState = HemoState {
        s: 0.0,
        f: 1.0,
        v: 1.0,
        q: 1.0,
    };

    pub fn as_vector(&self) -> Vector4<f64> {
        Vector4::new(self.s, self.f, self.v, self.q)
    }

    pub fn from_slice(x: &[f64]) -> Self {
        HemoState {
            s: x[0],
            f: x[1],
            v: x[2],
            q: x[3],
        }
    }

    fn check(&self, time: f64) -> Result<()> {
        let ok = |x: f64| x > 0.0 && x.is_finite();
        if !(ok(self.f) && ok(self.v) && ok(self.q) && self.s.is_finite()) {
            return Err(KuraError::NonPhysiologicalState {
                time,
                detail: format!("f = {}, v = {}, q = {}", self.f, self.v, self.q),
            });
        }
        Ok(())
    }
}

fn rhs_unchecked(x: &HemoState, z: f64, p: &HemoParams) -> [f64; 4] {
    let fout = p.outflow(x.v);
    [
        z - p.kappa_s * x.s - p.gamma_s * (x.f - 1.0),
        x.s,
        (x.f - fout) / p.tau_b,
        (x.f * p.extraction(x.f) / p.e0 - fout * x.q / x.v) / p.tau_b,
    ]
}

/// Time derivative of the hemodynamic state driven by neural activity `z`.
pub fn hemo_rhs(x: &HemoState, z: f64, p: &HemoParams) -> Result<HemoState> {
    x.check(f64::NAN)?;
    Ok(HemoState::from_slice(&rhs_unchecked(x, z, p)))
}

/// Analytic Jacobian of [`hemo_rhs`] with respect to `(s, f, v, q)`.
pub fn hemo_jacobian(x: &HemoState, p: &HemoParams) -> Matrix4<f64> {
    let tau = p.tau_b;
    let a = 1.0 / p.alpha_s;
    let ln1e = (1.0 - p.e0).ln();
    // d/df [f E(f)] = E(f) + (1 - E0)^(1/f) ln(1 - E0) / f
    let d_fe = p.extraction(x.f) + (1.0 - p.e0).powf(1.0 / x.f) * ln1e / x.f;
    let d_fout = a * x.v.powf(a - 1.0);
    // outflow * q / v = q v^(a-1)
    let d_qv_v = (a - 1.0) * x.q * x.v.powf(a - 2.0);
    let qv = x.v.powf(a - 1.0);
    Matrix4::new(
        -p.kappa_s, -p.gamma_s, 0.0, 0.0,
        1.0, 0.0, 0.0, 0.0,
        0.0, 1.0 / tau, -d_fout / tau, 0.0,
        0.0, d_fe / (p.e0 * tau), -d_qv_v / tau, -qv / tau,
    )
}

/// BOLD signal `V0 (k1 (1 - q) + k2 (1 - q/v) + k3 (1 - v))`.
pub fn bold(x: &HemoState, p: &HemoParams) -> Result<f64> {
    if !(x.v > 0.0 && x.v.is_finite()) {
        return Err(KuraError::NonPhysiologicalState {
            time: f64::NAN,
            detail: format!("v = {}", x.v),
        });
    }
    Ok(bold_unchecked(x, p))
}

fn bold_unchecked(x: &HemoState, p: &HemoParams) -> f64 {
    p.v0 * (p.k1 * (1.0 - x.q) + p.k2 * (1.0 - x.q / x.v) + p.k3 * (1.0 - x.v))
}

/// Hemodynamic states of one region for a neural signal sampled at `times`,
/// held constant between samples. Integration starts at equilibrium and the
/// state is reported on the input grid.
pub fn integrate_region(times: &[f64], neural: &[f64], p: &HemoParams, dt: f64) -> Result<Vec<HemoState>> {
    if times.len() != neural.len() {
        return Err(KuraError::DimensionMismatch(format!(
            "{} times but {} neural samples",
            times.len(),
            neural.len()
        )));
    }
    if let Some(k) = neural.iter().position(|z| !z.is_finite()) {
        return Err(KuraError::InvalidConfig(format!("non-finite neural sample at index {k}")));
    }
    let mut rk = Rk4::new(4);
    let mut x = [0.0, 1.0, 1.0, 1.0];
    let mut out = Vec::with_capacity(times.len());
    for k in 0..times.len() {
        out.push(HemoState::from_slice(&x));
        if k + 1 == times.len() {
            break;
        }
        let span = times[k + 1] - times[k];
        if !(span > 0.0) {
            return Err(KuraError::InvalidConfig("time grid must be increasing".into()));
        }
        let sub = (span / dt).ceil().max(1.0) as usize;
        let h = span / sub as f64;
        let z = neural[k];
        let mut rhs = |_t: f64, y: &[f64], dy: &mut [f64]| {
            dy.copy_from_slice(&rhs_unchecked(&HemoState::from_slice(y), z, p));
        };
        for j in 0..sub {
            let t = times[k] + j as f64 * h;
            rk.step(&mut rhs, t, &mut x, h);
            HemoState::from_slice(&x).check(t + h)?;
        }
    }
    Ok(out)
}

/// BOLD output of one region on the input grid; see [`integrate_region`].
pub fn simulate_bold_region(times: &[f64], neural: &[f64], p: &HemoParams, dt: f64) -> Result<Vec<f64>> {
    Ok(integrate_region(times, neural, p, dt)?
        .iter()
        .map(|x| bold_unchecked(x, p))
        .collect())
}

/// BOLD series for every region, in parallel across regions.
pub fn simulate_bold(times: &[f64], neural: &[Vec<f64>], p: &HemoParams) -> Result<Vec<Vec<f64>>> {
    p.validate()?;
    neural
        .par_iter()
        .map(|z| simulate_bold_region(times, z, p, HEMO_DT))
        .collect()
}

/// State-space blocks of the linearization at equilibrium: a damped
/// oscillator from neural input to inflow, then a volume/deoxyhemoglobin
/// stage from inflow to BOLD.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearCascade {
    pub a1: Matrix2<f64>,
    pub b1: Vector2<f64>,
    pub c1: Vector2<f64>,
    pub a2: Matrix2<f64>,
    pub b2: Vector2<f64>,
    pub c2: Vector2<f64>,
}

impl LinearCascade {
    pub fn new(p: &HemoParams) -> Self {
        let (tau, al) = (p.tau_b, p.alpha_s);
        LinearCascade {
            a1: Matrix2::new(-p.kappa_s, -p.gamma_s, 1.0, 0.0),
            b1: Vector2::new(1.0, 0.0),
            c1: Vector2::new(0.0, 1.0),
            a2: Matrix2::new(-1.0 / (tau * al), 0.0, -(1.0 - al) / (tau * al), -1.0 / tau),
            b2: Vector2::new(1.0 / tau, p.beta()),
            c2: Vector2::new(p.v0 * (p.k2 - p.k3), p.v0 * (-p.k1 - p.k2)),
        }
    }

    pub fn is_hurwitz(&self) -> bool {
        let stable = |a: &Matrix2<f64>| a.complex_eigenvalues().iter().all(|l| l.re < 0.0);
        stable(&self.a1) && stable(&self.a2)
    }

    fn stage(a: &Matrix2<f64>, b: &Vector2<f64>, c: &Vector2<f64>, s: Complex64) -> Complex64 {
        // c^T (sI - A)^{-1} b for a 2x2 system
        let m00 = s - a[(0, 0)];
        let m01 = Complex64::from(-a[(0, 1)]);
        let m10 = Complex64::from(-a[(1, 0)]);
        let m11 = s - a[(1, 1)];
        let det = m00 * m11 - m01 * m10;
        let x0 = (m11 * b[0] - m01 * b[1]) / det;
        let x1 = (m00 * b[1] - m10 * b[0]) / det;
        x0 * c[0] + x1 * c[1]
    }

    /// Transfer function at complex frequency `s`.
    pub fn transfer(&self, s: Complex64) -> Complex64 {
        Self::stage(&self.a1, &self.b1, &self.c1, s) * Self::stage(&self.a2, &self.b2, &self.c2, s)
    }

    /// Full 4-state realization `(A, B, C)` in `(s, f, v, q)` deviation coordinates.
    pub fn realization(&self) -> (Matrix4<f64>, Vector4<f64>, Vector4<f64>) {
        let mut a = Matrix4::zeros();
        a.fixed_view_mut::<2, 2>(0, 0).copy_from(&self.a1);
        a.fixed_view_mut::<2, 2>(2, 2).copy_from(&self.a2);
        a.fixed_view_mut::<2, 2>(2, 0).copy_from(&(self.b2 * self.c1.transpose()));
        let b = Vector4::new(self.b1[0], self.b1[1], 0.0, 0.0);
        let c = Vector4::new(0.0, 0.0, self.c2[0], self.c2[1]);
        (a, b, c)
    }
}

/// Complex gain of the linearized neural-to-BOLD map at `frequency_hz`.
pub fn linearized_response(frequency_hz: f64, p: &HemoParams) -> Complex64 {
    LinearCascade::new(p).transfer(Complex64::new(0.0, 2.0 * PI * frequency_hz))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyPoint {
    pub f_hz: f64,
    pub magnitude: f64,
    /// Radians.
    pub phase: f64,
}

/// Gain and phase on `n` log-spaced frequencies between `lo` and `hi` Hz.
pub fn frequency_response(lo: f64, hi: f64, n: usize, p: &HemoParams) -> Vec<FrequencyPoint> {
    let cascade = LinearCascade::new(p);
    (0..n)
        .map(|k| {
            let f = if n == 1 {
                lo
            } else {
                lo * (hi / lo).powf(k as f64 / (n - 1) as f64)
            };
            let g = cascade.transfer(Complex64::new(0.0, 2.0 * PI * f));
            FrequencyPoint {
                f_hz: f,
                magnitude: g.norm(),
                phase: g.arg(),
            }
        })
        .collect()
}

pub fn write_frequency_response_csv<W: Write>(points: &[FrequencyPoint], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["f_hz", "magnitude", "phase"])?;
    for p in points {
        out.write_record([p.f_hz.to_string(), p.magnitude.to_string(), p.phase.to_string()])?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn equilibrium_and_unit_drive() {
        let p = HemoParams::default();
        let d = hemo_rhs(&HemoState::EQUILIBRIUM, 0.0, &p).unwrap();
        assert_abs_diff_eq!(d.as_vector(), Vector4::zeros(), epsilon = 1e-15);
        let d = hemo_rhs(&HemoState::EQUILIBRIUM, 1.0, &p).unwrap();
        assert_abs_diff_eq!(d.as_vector(), Vector4::new(1.0, 0.0, 0.0, 0.0), epsilon = 1e-15);
    }

    #[test]
    fn outflow_and_bold_values() {
        let p = HemoParams::default();
        assert_abs_diff_eq!(p.outflow(2.0), 8.1698, epsilon = 1e-4);
        let y = bold(&HemoState { s: 0.0, f: 1.0, v: 1.0, q: 0.9 }, &p).unwrap();
        assert_abs_diff_eq!(y, 0.00876, epsilon = 1e-12);
        assert_eq!(bold(&HemoState::EQUILIBRIUM, &p).unwrap(), 0.0);
        let y2 = bold(&HemoState { s: 0.0, f: 1.0, v: 1.0, q: 0.8 }, &p).unwrap();
        assert_abs_diff_eq!(y2, 2.0 * y, epsilon = 1e-15);
    }

    #[test]
    fn non_physiological_states_are_rejected() {
        let p = HemoParams::default();
        for bad in [
            HemoState { s: 0.0, f: 0.0, v: 1.0, q: 1.0 },
            HemoState { s: 0.0, f: 1.0, v: -1.0, q: 1.0 },
            HemoState { s: 0.0, f: 1.0, v: 1.0, q: 0.0 },
        ] {
            assert!(matches!(
                hemo_rhs(&bad, 0.0, &p),
                Err(KuraError::NonPhysiologicalState { .. })
            ));
        }
        assert!(bold(&HemoState { s: 0.0, f: 1.0, v: 0.0, q: 1.0 }, &p).is_err());
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let p = HemoParams::default();
        let x = HemoState { s: 0.2, f: 1.3, v: 1.1, q: 0.9 };
        let j = hemo_jacobian(&x, &p);
        let base = x.as_vector();
        for col in 0..4 {
            let h = 1e-6;
            let mut up = base;
            let mut dn = base;
            up[col] += h;
            dn[col] -= h;
            let fu = Vector4::from(rhs_unchecked(&HemoState::from_slice(up.as_slice()), 0.0, &p));
            let fd = Vector4::from(rhs_unchecked(&HemoState::from_slice(dn.as_slice()), 0.0, &p));
            let fdiff = (fu - fd) / (2.0 * h);
            for row in 0..4 {
                assert_abs_diff_eq!(j[(row, col)], fdiff[row], epsilon = 1e-7);
            }
        }
    }

    #[test]
    fn jacobian_at_equilibrium_is_the_cascade() {
        let p = HemoParams::default();
        let (a, _, _) = LinearCascade::new(&p).realization();
        let j = hemo_jacobian(&HemoState::EQUILIBRIUM, &p);
        assert_abs_diff_eq!(j, a, epsilon = 1e-12);
        let tau = p.tau_b;
        assert_abs_diff_eq!(j[(3, 2)], -(1.0 - p.alpha_s) / (tau * p.alpha_s), epsilon = 1e-12);
        assert_abs_diff_eq!(j[(3, 1)], p.beta(), epsilon = 1e-12);
    }

    #[test]
    fn cascade_is_stable_low_pass() {
        let p = HemoParams::default();
        assert!(LinearCascade::new(&p).is_hurwitz());
        let dc = linearized_response(0.0, &p);
        assert!(dc.norm().is_finite() && dc.norm() > 0.0);
        assert!(linearized_response(0.1, &p).norm() > 10.0 * linearized_response(60.0, &p).norm());
        let sweep = frequency_response(1.0, 100.0, 50, &p);
        for w in sweep.windows(2) {
            assert!(w[1].magnitude < w[0].magnitude);
        }
    }

    #[test]
    fn zero_input_stays_at_rest() {
        let p = HemoParams::default();
        let times: Vec<f64> = (0..=10_000).map(|k| k as f64 * 0.01).collect();
        let y = simulate_bold(&times, &[vec![0.0; times.len()]], &p).unwrap();
        assert!(y[0].iter().all(|&v| v.abs() < 1e-12));
    }

    #[test]
    fn frequency_response_csv_header() {
        let mut buf = Vec::new();
        write_frequency_response_csv(&frequency_response(0.1, 1.0, 2, &HemoParams::default()), &mut buf).unwrap();
        assert!(String::from_utf8(buf).unwrap().starts_with("f_hz,magnitude,phase\n"));
    }
}
