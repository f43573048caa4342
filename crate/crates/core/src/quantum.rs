//! Noise spectra, susceptibilities and the quantum limit of parametric cooling.
//!
//! Frequencies are in units of the mechanical frequency, so Ω = 1 unless an
//! [`OscillatorParams`] says otherwise. The modulation is treated as an extra
//! bath at rate Γ whose sidebands are `S(Ω) = 2γ(n_th + 1) + 2Γ` and
//! `S(−Ω) = 2γ n_th`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::model::OscillatorParams;
use crate::quadrature::{integrate, QuadOptions};
use crate::{Error, Result};

/// Smallest `|Γ − γ|/γ` for which the closed-form variance is evaluated.
pub const POLE_GUARD: f64 = 1e-6;

/// Largest `|Δ|/Ω` accepted by [`modified_susceptibility`].
pub const MAX_DETUNING: f64 = 0.1;

/// Ratio Γ/γ below which [`final_occupancy_limit`] falls back to the full variance.
pub const ASYMPTOTIC_RATIO: f64 = 10.0;

/// Thermal force spectrum `S_th(ω) = γ (ω/Ω) [coth(ħω/2k_BT) + 1]`.
///
/// `temperature_ratio` is ħΩ/k_BT; pass `f64::INFINITY` for zero temperature.
pub fn thermal_spectrum(omega: f64, temperature_ratio: f64, params: &OscillatorParams) -> Result<f64> {
    if !(omega.is_finite() && omega != 0.0) {
        return Err(Error::invalid("omega", omega, "spectrum frequency must be finite and nonzero"));
    }
    if !(temperature_ratio > 0.0) {
        return Err(Error::invalid(
            "temperature_ratio",
            temperature_ratio,
            "ħΩ/k_BT must be > 0",
        ));
    }
    let x = omega / params.omega;
    let coth = (0.5 * temperature_ratio * x).tanh().recip();
    Ok(params.gamma * x * (coth + 1.0))
}

/// Spectrum at the two mechanical sidebands.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sidebands {
    /// `S(+Ω)`, absorption by the bath.
    pub upper: f64,
    /// `S(−Ω)`, emission by the bath.
    pub lower: f64,
}

impl Sidebands {
    pub fn damping(&self) -> f64 {
        0.5 * (self.upper - self.lower)
    }

    /// Mean occupancy `(S(Ω) + S(−Ω))/(4γ) − 1/2`.
    pub fn occupancy(&self) -> f64 {
        (self.upper + self.lower) / (4.0 * self.damping()) - 0.5
    }
}

pub fn thermal_sidebands(temperature_ratio: f64, params: &OscillatorParams) -> Result<Sidebands> {
    Ok(Sidebands {
        upper: thermal_spectrum(params.omega, temperature_ratio, params)?,
        lower: thermal_spectrum(-params.omega, temperature_ratio, params)?,
    })
}

/// Mechanical susceptibility `χ(ω) = Ω/[(Ω² − ω²) − iγω]`.
pub fn susceptibility(omega: f64, params: &OscillatorParams) -> Complex64 {
    let w0 = params.omega;
    Complex64::new(w0, 0.0) / Complex64::new(w0 * w0 - omega * omega, -params.gamma * omega)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub gamma: f64,
    pub gamma_mod: f64,
    pub phi: f64,
    pub n_th: f64,
}

impl SpectralConfig {
    pub fn new(gamma: f64, gamma_mod: f64, phi: f64, n_th: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::invalid("gamma", gamma, "gamma must be finite and > 0"));
        }
        if !(gamma_mod.is_finite() && gamma_mod >= 0.0) {
            return Err(Error::invalid("gamma_mod", gamma_mod, "Γ must be finite and >= 0"));
        }
        if !phi.is_finite() {
            return Err(Error::invalid("phi", phi, "phi must be finite"));
        }
        if !(n_th.is_finite() && n_th >= 0.0) {
            return Err(Error::invalid("n_th", n_th, "n_th must be finite and >= 0"));
        }
        Ok(Self {
            gamma,
            gamma_mod,
            phi,
            n_th,
        })
    }

    /// Sidebands of the thermal bath plus the effective cooling bath.
    pub fn sidebands(&self) -> Sidebands {
        Sidebands {
            upper: 2.0 * self.gamma * (self.n_th + 1.0) + 2.0 * self.gamma_mod,
            lower: 2.0 * self.gamma * self.n_th,
        }
    }

    fn check_pole(&self) -> Result<()> {
        if self.gamma_mod == 0.0 {
            return Ok(());
        }
        let relative_gap = (self.gamma_mod - self.gamma).abs() / self.gamma;
        if relative_gap < POLE_GUARD {
            return Err(Error::PoleGuard {
                relative_gap,
                guard: POLE_GUARD,
            });
        }
        Ok(())
    }
}

/// `χ̄(Δ) = 1/(4Δ² + Γ² − γ² + 4iγΔ)` near the lower sideband.
pub fn modified_susceptibility(delta: f64, cfg: &SpectralConfig) -> Result<Complex64> {
    if !(delta.abs() <= MAX_DETUNING) {
        return Err(Error::invalid("delta", delta, "|delta| <= 0.1 Ω required"));
    }
    let (g, big) = (cfg.gamma, cfg.gamma_mod);
    Ok(Complex64::new(4.0 * delta * delta + big * big - g * g, 4.0 * g * delta).inv())
}

/// Closed-form `⟨q̂²⟩`, both sides of Γ = γ.
pub fn position_variance_closed(cfg: &SpectralConfig) -> Result<f64> {
    let (g, big, n) = (cfg.gamma, cfg.gamma_mod, cfg.n_th);
    if big == 0.0 {
        return Ok(n + 0.5);
    }
    cfg.check_pole()?;
    let s = cfg.phi.sin();
    let v = if big > g {
        let den = big * big - g * g;
        g * (big + g * s) / den * (n + 0.5) + big * (big + g * s) / (2.0 * den)
    } else {
        let den = g * g - big * big;
        g * (g + big * s) / den * (n + 0.5) + big * (g + big * s) / (2.0 * den)
    };
    Ok(v)
}

fn variance_integrand(delta: f64, cfg: &SpectralConfig) -> f64 {
    let (g, big, n) = (cfg.gamma, cfg.gamma_mod, cfg.n_th);
    let d2 = 4.0 * delta * delta;
    let chi2 = 1.0 / ((d2 + (big + g).powi(2)) * (d2 + (big - g).powi(2)));
    let (s, c) = cfg.phi.sin_cos();
    let common = 2.0 * g * big * s + d2 + big * big + g * g;
    let thermal = 4.0 * g * common * (n + 0.5);
    let cooling = 2.0 * big * (4.0 * delta * (g + big) * c + common);
    chi2 * (thermal + cooling) / (2.0 * PI)
}

/// `⟨q̂²⟩` from direct integration of the position spectrum over Δ.
///
/// Uses `Δ = (√|Γ² − γ²|/2) tan θ`, which maps the real line onto
/// `(−π/2, π/2)` with a bounded integrand.
pub fn position_variance_quadrature(cfg: &SpectralConfig) -> Result<f64> {
    cfg.check_pole()?;
    let scale = 0.5 * (cfg.gamma_mod.powi(2) - cfg.gamma.powi(2)).abs().sqrt();
    let f = |theta: f64| {
        let (s, c) = theta.sin_cos();
        variance_integrand(scale * s / c, cfg) * scale / (c * c)
    };
    let half = 0.5 * PI;
    Ok(integrate(f, -half, half, QuadOptions::default())?.value)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OccupancyLimit {
    pub value: f64,
    /// False when Γ < 10γ and the value is the full closed form minus 1/2.
    pub asymptotic: bool,
}

/// `n_final = (γ/Γ)(n_th + 1/2)` for Γ ≫ γ.
pub fn final_occupancy_limit(cfg: &SpectralConfig) -> Result<OccupancyLimit> {
    if cfg.gamma_mod == 0.0 {
        return Err(Error::invalid("gamma_mod", 0.0, "Γ > 0 required"));
    }
    if cfg.gamma_mod < ASYMPTOTIC_RATIO * cfg.gamma {
        return Ok(OccupancyLimit {
            value: position_variance_closed(cfg)? - 0.5,
            asymptotic: false,
        });
    }
    Ok(OccupancyLimit {
        value: cfg.gamma / cfg.gamma_mod * (cfg.n_th + 0.5),
        asymptotic: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn unit(gamma: f64) -> OscillatorParams {
        OscillatorParams::new(1.0, gamma, 0.0).unwrap()
    }

    #[test]
    fn zero_temperature_sidebands() {
        let p = unit(1e-3);
        let sb = thermal_sidebands(f64::INFINITY, &p).unwrap();
        assert!((sb.upper - 2e-3).abs() < 1e-18);
        assert_eq!(sb.lower, 0.0);
        assert_eq!(sb.occupancy(), 0.0);
    }

    #[test]
    fn sideband_difference_is_damping() {
        let p = unit(3e-4);
        for r in [1e-4, 0.1, 1.0, 7.0, 40.0] {
            let sb = thermal_sidebands(r, &p).unwrap();
            assert!((sb.damping() - 3e-4).abs() <= 1e-12 * sb.upper.max(1e-3), "r={r}");
        }
    }

    #[test]
    fn high_temperature_occupancy() {
        let p = unit(1e-6);
        let r = 1e-4;
        let sb = thermal_sidebands(r, &p).unwrap();
        assert!((sb.occupancy() * r - 1.0).abs() < 1e-4);
        // Bose–Einstein at intermediate temperature
        let sb = thermal_sidebands(2.0, &p).unwrap();
        assert!((sb.occupancy() - 1.0 / (2f64.exp() - 1.0)).abs() < 1e-12);
    }

    #[test]
    fn spectrum_rejects_zero_frequency() {
        assert!(thermal_spectrum(0.0, 1.0, &unit(1e-3)).is_err());
        assert!(thermal_spectrum(1.0, 0.0, &unit(1e-3)).is_err());
    }

    #[test]
    fn susceptibility_values() {
        let p = unit(1e-3);
        assert!((susceptibility(0.0, &p) - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((susceptibility(1.0, &p) - Complex64::new(0.0, 1e3)).norm() < 1e-9);
        let p = unit(1e-6);
        let d = 1e-3;
        let exact = susceptibility(-1.0 + d, &p);
        let approx = Complex64::new(2.0 * d, 1e-6).inv();
        assert!((exact - approx).norm() / exact.norm() <= 1e-3);
    }

    #[test]
    fn modified_susceptibility_values() {
        let cfg = SpectralConfig::new(1e-3, 0.05, 0.0, 10.0).unwrap();
        let at0 = modified_susceptibility(0.0, &cfg).unwrap();
        assert_eq!(at0.im, 0.0);
        assert!((at0.re - 1.0 / (0.05f64.powi(2) - 1e-6)).abs() < 1e-9);
        for d in [1e-4, 3e-3, 0.07] {
            let a = modified_susceptibility(d, &cfg).unwrap();
            let b = modified_susceptibility(-d, &cfg).unwrap();
            assert!((a - b.conj()).norm() <= 1e-15 * a.norm());
        }
        assert!(modified_susceptibility(0.2, &cfg).is_err());
    }

    #[test]
    fn unmodulated_modified_susceptibility_factorises() {
        let cfg = SpectralConfig::new(1e-3, 0.0, 0.0, 0.0).unwrap();
        for k in 0..10 {
            let d = -0.05 + 0.011 * k as f64;
            let chi = modified_susceptibility(d, &cfg).unwrap();
            let expected = Complex64::new(2.0 * d, 1e-3).powi(2).inv();
            assert!((chi - expected).norm() <= 1e-12 * chi.norm());
        }
    }

    #[test]
    fn closed_form_examples() {
        let cfg = SpectralConfig::new(1e-6, 0.0, 1.3, 1e4).unwrap();
        assert_eq!(position_variance_closed(&cfg).unwrap(), 1e4 + 0.5);
        let cfg = SpectralConfig::new(1e-6, 0.05, FRAC_PI_2, 1e4).unwrap();
        let v = position_variance_closed(&cfg).unwrap();
        assert!((v - 0.700_024_0).abs() < 1e-7, "{v}");
    }

    #[test]
    fn pole_guard() {
        let cfg = SpectralConfig::new(1e-3, 1e-3 * (1.0 + 1e-8), 0.0, 1.0).unwrap();
        assert!(matches!(position_variance_closed(&cfg), Err(Error::PoleGuard { .. })));
        assert!(matches!(position_variance_quadrature(&cfg), Err(Error::PoleGuard { .. })));
    }

    #[test]
    fn quadrature_matches_both_branches() {
        for ratio in [0.1, 0.5, 2.0, 10.0, 1e3] {
            for phi in [0.0, 1.0, FRAC_PI_2, PI] {
                let cfg = SpectralConfig::new(1e-6, ratio * 1e-6, phi, 1e4).unwrap();
                let c = position_variance_closed(&cfg).unwrap();
                let q = position_variance_quadrature(&cfg).unwrap();
                assert!((q / c - 1.0).abs() <= 1e-6, "ratio {ratio} phi {phi}: {q} vs {c}");
            }
        }
    }

    #[test]
    fn quadrature_unmodulated_limit() {
        for phi in [0.0, 2.0] {
            let cfg = SpectralConfig::new(1e-4, 0.0, phi, 37.0).unwrap();
            let q = position_variance_quadrature(&cfg).unwrap();
            assert!((q - 37.5).abs() <= 1e-8 * 37.5);
        }
    }

    #[test]
    fn cosine_term_integrates_to_zero() {
        // φ and π − φ share sin φ but flip cos φ.
        for phi in [0.3, 1.0, 1.4] {
            let a = position_variance_quadrature(&SpectralConfig::new(1e-6, 1e-4, phi, 100.0).unwrap()).unwrap();
            let b = position_variance_quadrature(&SpectralConfig::new(1e-6, 1e-4, PI - phi, 100.0).unwrap()).unwrap();
            assert!((a - b).abs() <= 1e-8 * a);
        }
    }

    #[test]
    fn final_occupancy_examples() {
        let cfg = SpectralConfig::new(1e-6, 0.05, 0.0, 1e4).unwrap();
        let lim = final_occupancy_limit(&cfg).unwrap();
        assert!(lim.asymptotic);
        assert!((lim.value - 0.20001).abs() < 1e-10);
        let cfg = SpectralConfig::new(1e-6, 0.05, 0.0, 0.0).unwrap();
        assert!((final_occupancy_limit(&cfg).unwrap().value - 1e-5).abs() < 1e-15);
        let cfg = SpectralConfig::new(1e-6, 0.0, 0.0, 1.0).unwrap();
        assert!(final_occupancy_limit(&cfg).is_err());
        let cfg = SpectralConfig::new(1e-6, 5e-6, 0.0, 100.0).unwrap();
        let lim = final_occupancy_limit(&cfg).unwrap();
        assert!(!lim.asymptotic);
        assert!((lim.value - (position_variance_closed(&cfg).unwrap() - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn final_occupancy_matches_closed_form_at_large_ratio() {
        // With sin φ = 0 the two differ at relative order γ/Γ.
        for ratio in [100.0, 1e3, 1e5] {
            for n_th in [1.0, 1e2, 1e4] {
                let cfg = SpectralConfig::new(1e-6, ratio * 1e-6, 0.0, n_th).unwrap();
                let lim = final_occupancy_limit(&cfg).unwrap().value;
                let full = position_variance_closed(&cfg).unwrap() - 0.5;
                assert!((lim / full - 1.0).abs() <= 1.0 / ratio, "ratio {ratio} n_th {n_th}");
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn variance_floor(g in 1e-8f64..1e-2, ratio in 1.001f64..1e5, phi in 0.0f64..6.3, n_th in 0.0f64..1e6) {
                let cfg = SpectralConfig::new(g, g * ratio, phi, n_th).unwrap();
                prop_assert!(position_variance_closed(&cfg).unwrap() >= 0.5 - 1e-12);
            }

            #[test]
            fn final_occupancy_decreases_with_rate(g in 1e-8f64..1e-3, r1 in 10.0f64..1e4, dr in 1e-3f64..10.0, n_th in 0.0f64..1e5) {
                let a = final_occupancy_limit(&SpectralConfig::new(g, g * r1, 0.0, n_th).unwrap()).unwrap().value;
                let b = final_occupancy_limit(&SpectralConfig::new(g, g * r1 * (1.0 + dr), 0.0, n_th).unwrap()).unwrap().value;
                prop_assert!(b < a);
            }
        }
    }
}
