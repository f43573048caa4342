use num_complex::Complex64;

use super::SimConfig;
use crate::model::{Drive, OscillatorParams, QuadratureState};

/// One-step evolution matrix acting on `(q, p)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMatrix {
    pub m11: f64,
    pub m12: f64,
    pub m21: f64,
    pub m22: f64,
}

impl StepMatrix {
    pub const IDENTITY: Self = Self {
        m11: 1.0,
        m12: 0.0,
        m21: 0.0,
        m22: 1.0,
    };

    pub fn apply(&self, v: QuadratureState) -> QuadratureState {
        QuadratureState::new(self.m11 * v.q + self.m12 * v.p, self.m21 * v.q + self.m22 * v.p)
    }

    /// `self · rhs`.
    pub fn mul(&self, rhs: &Self) -> Self {
        Self {
            m11: self.m11 * rhs.m11 + self.m12 * rhs.m21,
            m12: self.m11 * rhs.m12 + self.m12 * rhs.m22,
            m21: self.m21 * rhs.m11 + self.m22 * rhs.m21,
            m22: self.m21 * rhs.m12 + self.m22 * rhs.m22,
        }
    }

    pub fn det(&self) -> f64 {
        self.m11 * self.m22 - self.m12 * self.m21
    }

    pub fn is_finite(&self) -> bool {
        [self.m11, self.m12, self.m21, self.m22].iter().all(|x| x.is_finite())
    }

    pub fn eigenvalues(&self) -> (Complex64, Complex64) {
        let half_tr = 0.5 * (self.m11 + self.m22);
        let disc = Complex64::new(half_tr * half_tr - self.det(), 0.0).sqrt();
        (half_tr + disc, half_tr - disc)
    }

    /// `selfⁿ` through `M = SΛS⁻¹`. Needs distinct eigenvalues and `m12 != 0`.
    pub fn power_by_eigen(&self, n: u64) -> Self {
        let (l1, l2) = self.eigenvalues();
        // eigenvectors (m12, λ − m11)
        let a = Complex64::new(self.m12, 0.0);
        let (v1, v2) = (l1 - self.m11, l2 - self.m11);
        let det_s = a * (v2 - v1);
        let n = u32::try_from(n).expect("power exponent fits in u32");
        let (p1, p2) = (l1.powu(n), l2.powu(n));
        // S diag(p1, p2) S⁻¹ with S = [[a, a], [v1, v2]], S⁻¹ = [[v2, −a], [−v1, a]]/det_s
        let m11 = (a * p1 * v2 - a * p2 * v1) / det_s;
        let m12 = (-a * a * p1 + a * a * p2) / det_s;
        let m21 = (v1 * p1 * v2 - v2 * p2 * v1) / det_s;
        let m22 = (-v1 * p1 * a + v2 * p2 * a) / det_s;
        Self {
            m11: m11.re,
            m12: m12.re,
            m21: m21.re,
            m22: m22.re,
        }
    }
}

/// `M_n = [[1, Ωdt], [−Ωdt + 2Γ cos(2Ω(n−1)dt + φ) dt, 1 − γdt]]`, `n >= 1`.
pub fn evolution_matrix(step_index: u64, cfg: &SimConfig, params: &OscillatorParams, drive: &Drive) -> StepMatrix {
    assert!(step_index >= 1, "step indices start at 1");
    let dt = cfg.dt;
    let w = params.omega;
    let t = (step_index - 1) as f64 * dt;
    let kick = 2.0 * drive.gamma_mod * (2.0 * w * t + drive.phi).cos() * dt;
    StepMatrix {
        m11: 1.0,
        m12: w * dt,
        m21: -w * dt + kick,
        m22: 1.0 - params.gamma * dt,
    }
}

/// `Mⁿ` for the unmodulated transfer matrix, via eigen-decomposition.
pub fn unmodulated_power(params: &OscillatorParams, dt: f64, n: u64) -> StepMatrix {
    StepMatrix {
        m11: 1.0,
        m12: params.omega * dt,
        m21: -params.omega * dt,
        m22: 1.0 - params.gamma * dt,
    }
    .power_by_eigen(n)
}
