//! Shared domain types and occupancy conventions.
//!
//! Everything is stored dimensionless. For a single resonator Ω = 1; in a
//! multimode set each mode keeps its frequency relative to the reference
//! mode. Quadratures are scaled by the zero-point amplitude so that a
//! classical thermal state at occupancy `n_th` has `⟨q²⟩ = ⟨p²⟩ = n_th`.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::{Error, Result};

/// Modulation depths above this are outside the range the perturbative
/// treatment has been checked against.
pub const PERTURBATIVE_LIMIT: f64 = 0.25;

/// Wraps an angle into `[0, 2π)`.
pub fn wrap_phase(phi: f64) -> f64 {
    let w = phi.rem_euclid(TAU);
    // rem_euclid can round up to exactly TAU for tiny negative inputs
    if w >= TAU {
        0.0
    } else {
        w
    }
}

/// Natural frequency, intrinsic damping and bath occupancy of one resonance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OscillatorParams {
    pub omega: f64,
    pub gamma: f64,
    pub n_th: f64,
}

impl OscillatorParams {
    pub fn new(omega: f64, gamma: f64, n_th: f64) -> Result<Self> {
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::invalid("omega", omega, "omega must be finite and > 0"));
        }
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::invalid("gamma", gamma, "gamma must be finite and >= 0"));
        }
        if gamma >= omega {
            return Err(Error::invalid(
                "gamma",
                gamma,
                "gamma < omega required (weak-damping regime)",
            ));
        }
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::invalid("n_th", n_th, "n_th must be finite and >= 0"));
        }
        Ok(Self { omega, gamma, n_th })
    }

    /// Ω/γ; infinite for an undamped resonator.
    pub fn quality_factor(&self) -> f64 {
        self.omega / self.gamma
    }

    pub fn with_n_th(self, n_th: f64) -> Result<Self> {
        Self::new(self.omega, self.gamma, n_th)
    }
}

/// Parametric modulation `2Γ cos(2Ωt + φ)` acting on the momentum equation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Drive {
    /// Modulation depth Γ/Ω.
    pub b: f64,
    /// Phase in `[0, 2π)`.
    pub phi: f64,
    /// Induced rate Γ = bΩ.
    pub gamma_mod: f64,
}

impl Drive {
    pub fn new(b: f64, phi: f64, omega: f64) -> Result<Self> {
        if !(b.is_finite() && b.abs() < 1.0) {
            return Err(Error::invalid("b", b, "|b| < 1 required"));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi", phi, "phi must be finite"));
        }
        if !(omega.is_finite() && omega > 0.0) {
            return Err(Error::invalid("omega", omega, "omega must be finite and > 0"));
        }
        Ok(Self {
            b,
            phi: wrap_phase(phi),
            gamma_mod: b * omega,
        })
    }

    /// No modulation.
    pub fn off(omega: f64) -> Self {
        Self {
            b: 0.0,
            phi: 0.0,
            gamma_mod: 0.0 * omega,
        }
    }

    pub fn with_phase(self, phi: f64) -> Self {
        Self {
            phi: wrap_phase(phi),
            ..self
        }
    }

    /// False once `b` exceeds the validated perturbative range.
    pub fn is_perturbative(&self) -> bool {
        self.b.abs() <= PERTURBATIVE_LIMIT
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct QuadratureState {
    pub q: f64,
    pub p: f64,
}

impl QuadratureState {
    pub const ZERO: Self = Self { q: 0.0, p: 0.0 };

    pub fn new(q: f64, p: f64) -> Self {
        Self { q, p }
    }

    pub fn is_finite(&self) -> bool {
        self.q.is_finite() && self.p.is_finite()
    }

    pub fn is_zero(&self) -> bool {
        self.q == 0.0 && self.p == 0.0
    }

    /// Squared phase-space radius q² + p².
    pub fn norm_sqr(&self) -> f64 {
        self.q * self.q + self.p * self.p
    }

    /// Rotation by `theta` in phase space (free evolution over θ/Ω).
    pub fn rotated(&self, theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self {
            q: self.q * c + self.p * s,
            p: -self.q * s + self.p * c,
        }
    }
}

impl std::ops::Add for QuadratureState {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        Self::new(self.q + rhs.q, self.p + rhs.p)
    }
}

impl std::ops::Mul<f64> for QuadratureState {
    type Output = Self;
    fn mul(self, k: f64) -> Self {
        Self::new(self.q * k, self.p * k)
    }
}

/// How a single phase-space point is turned into an occupancy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Convention {
    /// `(q² + p²)/2`; thermal mean is `n_th`.
    Classical,
    /// `(q² + p²)/2 − 1/2`; only meaningful as an ensemble mean.
    Quantum,
}

pub fn occupancy_of(state: QuadratureState, convention: Convention) -> f64 {
    let n = 0.5 * state.norm_sqr();
    match convention {
        Convention::Classical => n,
        Convention::Quantum => n - 0.5,
    }
}

/// Draws a classical thermal state: independent zero-mean Gaussians with
/// variance `n_th` per quadrature.
pub fn sample_thermal_state<R: Rng + ?Sized>(n_th: f64, rng: &mut R) -> Result<QuadratureState> {
    if !(n_th.is_finite() && n_th >= 0.0) {
        return Err(Error::invalid("n_th", n_th, "n_th must be finite and >= 0"));
    }
    let sigma = n_th.sqrt();
    let q: f64 = rng.sample(StandardNormal);
    let p: f64 = rng.sample(StandardNormal);
    Ok(QuadratureState::new(sigma * q, sigma * p))
}

/// One recorded point of a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    /// Classical occupancy `(q² + p²)/2`.
    pub n: f64,
    /// Global-frame modulation phase in force at `t`.
    pub phi: f64,
}

impl Sample {
    pub fn new(t: f64, state: QuadratureState, phi: f64) -> Self {
        Self {
            t,
            q: state.q,
            p: state.p,
            n: occupancy_of(state, Convention::Classical),
            phi,
        }
    }

    pub fn state(&self) -> QuadratureState {
        QuadratureState::new(self.q, self.p)
    }
}

/// Parameter snapshot stored alongside a trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct RunMeta {
    pub params: OscillatorParams,
    pub drive: Drive,
    pub scheme: &'static str,
    pub noise: bool,
    pub t_end: f64,
    pub sample_stride: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub samples: Vec<Sample>,
    pub dt: f64,
    pub seed: u64,
    pub meta: RunMeta,
}

impl TrajectoryRecord {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.t)
    }

    pub fn occupancies(&self) -> impl Iterator<Item = f64> + '_ {
        self.samples.iter().map(|s| s.n)
    }

    pub fn first(&self) -> &Sample {
        &self.samples[0]
    }

    pub fn last(&self) -> &Sample {
        self.samples.last().expect("trajectory has at least one sample")
    }

    /// Timestamps strictly increasing and spaced by whole steps.
    pub fn check_invariants(&self) -> bool {
        self.samples.windows(2).all(|w| {
            let steps = (w[1].t - w[0].t) / self.dt;
            w[1].t > w[0].t && steps.round() >= 1.0 && (steps - steps.round()).abs() < 1e-6
        })
    }
}

/// Per-time-bin occupancy statistics over many realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleStats {
    pub time_bins: Vec<f64>,
    pub mean_n: Vec<f64>,
    /// Unbiased sample variance (zero when `count == 1`).
    pub var_n: Vec<f64>,
    pub mean_q2: Vec<f64>,
    pub mean_p2: Vec<f64>,
    pub count: usize,
    pub master_seed: u64,
}

impl EnsembleStats {
    /// Mean of `mean_n` over bins with `t >= t_from`.
    pub fn late_mean_n(&self, t_from: f64) -> f64 {
        late_mean(&self.time_bins, &self.mean_n, t_from)
    }

    pub fn late_mean_q2(&self, t_from: f64) -> f64 {
        late_mean(&self.time_bins, &self.mean_q2, t_from)
    }
}

fn late_mean(t: &[f64], v: &[f64], t_from: f64) -> f64 {
    let (sum, k) = t
        .iter()
        .zip(v)
        .filter(|(t, _)| **t >= t_from)
        .fold((0.0, 0usize), |(s, k), (_, v)| (s + v, k + 1));
    if k == 0 {
        f64::NAN
    } else {
        sum / k as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn occupancy_examples() {
        assert_eq!(occupancy_of(QuadratureState::ZERO, Convention::Classical), 0.0);
        let s = QuadratureState::new(2f64.sqrt(), 0.0);
        assert!((occupancy_of(s, Convention::Classical) - 1.0).abs() < 1e-15);
        assert!((occupancy_of(s, Convention::Quantum) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn thermal_sampling_zero_and_negative() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..10 {
            assert_eq!(sample_thermal_state(0.0, &mut rng).unwrap(), QuadratureState::ZERO);
        }
        assert!(matches!(
            sample_thermal_state(-1.0, &mut rng),
            Err(Error::InvalidParameter { name: "n_th", .. })
        ));
    }

    #[test]
    fn thermal_sampling_is_seeded() {
        let a = sample_thermal_state(50.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = sample_thermal_state(50.0, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn thermal_sample_variance_within_three_standard_errors() {
        // Var of the sample variance of N Gaussians is 2σ⁴/(N−1).
        let n_th = 1e4;
        let count = 100_000;
        let mut rng = ChaCha8Rng::seed_from_u64(2024);
        let qs: Vec<f64> = (0..count)
            .map(|_| sample_thermal_state(n_th, &mut rng).unwrap().q)
            .collect();
        let mean = qs.iter().sum::<f64>() / count as f64;
        let var = qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / (count - 1) as f64;
        let se = (2.0 / (count as f64 - 1.0)).sqrt() * n_th;
        assert!((var - n_th).abs() < 3.0 * se, "var {var}, se {se}");
    }

    #[test]
    fn thermal_ensemble_mean_occupancy_is_n_th() {
        let n_th = 250.0;
        let count = 200_000;
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let mean = (0..count)
            .map(|_| occupancy_of(sample_thermal_state(n_th, &mut rng).unwrap(), Convention::Classical))
            .sum::<f64>()
            / count as f64;
        // n is exponential with mean n_th, so the standard error is n_th/√N.
        assert!((mean - n_th).abs() < 4.0 * n_th / (count as f64).sqrt());
    }

    #[test]
    fn thermal_samples_look_gaussian() {
        let count = 20_000usize;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let qs: Vec<f64> = (0..count)
            .map(|_| sample_thermal_state(1.0, &mut rng).unwrap().q)
            .collect();
        let n = count as f64;
        let mean = qs.iter().sum::<f64>() / n;
        let m2 = qs.iter().map(|q| (q - mean).powi(2)).sum::<f64>() / n;
        let m3 = qs.iter().map(|q| (q - mean).powi(3)).sum::<f64>() / n;
        let m4 = qs.iter().map(|q| (q - mean).powi(4)).sum::<f64>() / n;
        let skew = m3 / m2.powf(1.5);
        let kurt = m4 / (m2 * m2) - 3.0;
        assert!(skew.abs() < 5.0 * (6.0 / n).sqrt(), "skew {skew}");
        assert!(kurt.abs() < 5.0 * (24.0 / n).sqrt(), "kurtosis {kurt}");
    }

    #[test]
    fn params_validation() {
        assert!(OscillatorParams::new(1.0, 1e-6, 1e4).is_ok());
        assert!(OscillatorParams::new(0.0, 0.0, 0.0).is_err());
        assert!(OscillatorParams::new(1.0, -1e-3, 0.0).is_err());
        assert!(OscillatorParams::new(1.0, 2.0, 0.0).is_err());
        assert!(OscillatorParams::new(1.0, 0.0, -1.0).is_err());
        let p = OscillatorParams::new(1.0, 1e-3, 0.0).unwrap();
        assert!((p.quality_factor() - 1e3).abs() < 1e-9);
    }

    #[test]
    fn drive_validation_and_flags() {
        let d = Drive::new(0.05, -std::f64::consts::FRAC_PI_2, 2.0).unwrap();
        assert_eq!(d.gamma_mod / 2.0, d.b);
        assert!((d.phi - 1.5 * std::f64::consts::PI).abs() < 1e-15);
        assert!(d.is_perturbative());
        assert!(!Drive::new(0.3, 0.0, 1.0).unwrap().is_perturbative());
        assert!(Drive::new(1.5, 0.0, 1.0).is_err());
    }

    #[test]
    fn wrap_phase_range() {
        for x in [-1e-18, -TAU, 0.0, TAU, 7.0 * TAU + 0.1, -0.3] {
            let w = wrap_phase(x);
            assert!((0.0..TAU).contains(&w), "{x} -> {w}");
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn occupancy_is_rotation_invariant(q in -1e3f64..1e3, p in -1e3f64..1e3, th in -10.0f64..10.0) {
                let s = QuadratureState::new(q, p);
                let a = occupancy_of(s, Convention::Classical);
                let b = occupancy_of(s.rotated(th), Convention::Classical);
                prop_assert!((a - b).abs() <= 1e-12 * a.max(1.0));
            }

            #[test]
            fn conventions_differ_by_half(q in -1e3f64..1e3, p in -1e3f64..1e3) {
                let s = QuadratureState::new(q, p);
                let d = occupancy_of(s, Convention::Classical) - occupancy_of(s, Convention::Quantum);
                prop_assert!((d - 0.5).abs() < 1e-9);
            }
        }
    }
}
