//! Perturbative solution of the parametrically driven oscillator.
//!
//! Removing the intrinsic damping with `q = q̄ e^{−γt/2}` and shifting time to
//! `t̄ = Ωt + φ/2` maps the noise-free dynamics onto the Mathieu equation
//! `q̈_M + (1 − 2b cos 2t̄) q_M = 0`, which sits at the centre of the first
//! instability tongue. For small `b` the two Floquet branches are
//!
//! ```text
//! q(t) = A− e^{−(γ+Γ)t/2} cos(Ωt + φ′) + A+ e^{−(γ−Γ)t/2} sin(Ωt + φ′),   φ′ = φ/2 + π/4
//! ```
//!
//! This sign convention was fixed against a direct RK4 integration of the
//! ODE (see `convention_matches_direct_integration` in the tests): the `A−`
//! branch is the extra-damped one. `A±` are real and fixed by the initial
//! quadratures; the complex bookkeeping factors of the Floquet expansion are
//! absorbed into them. Ω′ = √(Ω² − γ²/4) is replaced by Ω throughout.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use num_complex::Complex64;

use crate::model::{wrap_phase, Drive, OscillatorParams, QuadratureState};
use crate::{Error, Result};

/// Condition number above which the initial-condition system is reported singular.
pub const SINGULAR_CONDITION: f64 = 1e12;

/// Truncated Floquet expansion `q_M = e^{iβt̄} Σ_{|n|≤N} C_{2n} e^{2int̄}`
/// with `β = −1 + x`.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedFloquet {
    pub truncation_order: usize,
    pub b: f64,
    pub exponent_x: Complex64,
    /// `C_{2n}` for `n = −N..=N`, so `harmonics[N]` is `C_0 = 1`.
    pub harmonics: Vec<Complex64>,
}

impl TruncatedFloquet {
    pub fn coefficient(&self, n: i64) -> Complex64 {
        let big_n = self.truncation_order as i64;
        if n.abs() > big_n {
            Complex64::new(0.0, 0.0)
        } else {
            self.harmonics[(n + big_n) as usize]
        }
    }

    /// Amplitude decay rate of the damped branch per unit of t̄ (≈ b/2).
    pub fn damping_rate(&self) -> f64 {
        self.exponent_x.im
    }

    /// Largest `|C_{2n+2} − D_{2n} C_{2n} + C_{2n−2}|` over the retained `n`.
    pub fn recursion_residual(&self) -> f64 {
        if self.b == 0.0 {
            return 0.0;
        }
        let big_n = self.truncation_order as i64;
        let beta = Complex64::new(-1.0, 0.0) + self.exponent_x;
        (-big_n..=big_n)
            .map(|n| {
                let d = recursion_d(n, beta, self.b);
                (self.coefficient(n + 1) - d * self.coefficient(n) + self.coefficient(n - 1)).norm()
            })
            .fold(0.0, f64::max)
    }
}

fn recursion_d(n: i64, beta: Complex64, b: f64) -> Complex64 {
    let k = beta + 2.0 * n as f64;
    (Complex64::new(1.0, 0.0) - k * k) / b
}

/// Continued-fraction ratios `C_{2n}/C_{2n−2}` (sign = +1) or
/// `C_{−2n}/C_{−2n+2}` (sign = −1) for `n = 1..=N`, with `C_{±(2N+2)} = 0`.
fn ratio_chain(x: Complex64, b: f64, order: usize, sign: i64) -> Vec<Complex64> {
    let beta = Complex64::new(-1.0, 0.0) + x;
    let mut ratios = vec![Complex64::new(0.0, 0.0); order + 2];
    for n in (1..=order).rev() {
        let d = recursion_d(sign * n as i64, beta, b);
        ratios[n] = (d - ratios[n + 1]).inv();
    }
    ratios
}

fn characteristic_residual(x: Complex64, b: f64, order: usize) -> Complex64 {
    let beta = Complex64::new(-1.0, 0.0) + x;
    let up = ratio_chain(x, b, order, 1);
    let down = ratio_chain(x, b, order, -1);
    recursion_d(0, beta, b) - up[1] - down[1]
}

/// Solves the truncated three-term recursion for the characteristic shift
/// `x` and the harmonics, normalised to `C_0 = 1`.
///
/// The root is taken on the branch with `Im x ≥ 0` (the damped solution);
/// at order 1 it is `x ≈ i b/2` with `C_2 ≈ i`.
pub fn characteristic_exponent(b: f64, truncation_order: usize) -> Result<TruncatedFloquet> {
    if !(b.is_finite() && b.abs() < 0.5) {
        return Err(Error::invalid("b", b, "|b| < 0.5 required"));
    }
    if truncation_order < 1 {
        return Err(Error::invalid(
            "truncation_order",
            truncation_order as f64,
            "truncation order >= 1",
        ));
    }
    let size = 2 * truncation_order + 1;
    if b == 0.0 {
        let mut harmonics = vec![Complex64::new(0.0, 0.0); size];
        harmonics[truncation_order] = Complex64::new(1.0, 0.0);
        return Ok(TruncatedFloquet {
            truncation_order,
            b,
            exponent_x: Complex64::new(0.0, 0.0),
            harmonics,
        });
    }

    // Newton iteration on the analytic residual, started from the leading-order root.
    let mut x = Complex64::new(0.0, 0.5 * b.abs());
    let mut converged = false;
    for _ in 0..100 {
        let f = characteristic_residual(x, b, truncation_order);
        let h = 1e-7 * x.norm().max(1e-6);
        let df = (characteristic_residual(x + h, b, truncation_order) - f) / h;
        let step = f / df;
        x -= step;
        if !(x.re.is_finite() && x.im.is_finite()) || x.norm() >= 1.0 {
            break;
        }
        if step.norm() <= 1e-13 * b.abs() {
            converged = true;
            break;
        }
    }
    if !converged || !(x.norm() < 1.0) {
        return Err(Error::NoFloquetRoot { b, last: x.norm() });
    }

    let up = ratio_chain(x, b, truncation_order, 1);
    let down = ratio_chain(x, b, truncation_order, -1);
    let mut harmonics = vec![Complex64::new(0.0, 0.0); size];
    let mid = truncation_order;
    harmonics[mid] = Complex64::new(1.0, 0.0);
    for n in 1..=truncation_order {
        harmonics[mid + n] = harmonics[mid + n - 1] * up[n];
        harmonics[mid - n] = harmonics[mid - n + 1] * down[n];
    }
    Ok(TruncatedFloquet {
        truncation_order,
        b,
        exponent_x: x,
        harmonics,
    })
}

/// Real amplitudes of the damped (`A−`) and antidamped (`A+`) branches.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MathieuSolution {
    pub a_minus: f64,
    pub a_plus: f64,
    /// Modulation phase the solution was built for.
    pub phi: f64,
    /// `φ/2 + π/4`.
    pub phi_prime: f64,
    pub b: f64,
}

impl MathieuSolution {
    /// Envelope rates `((γ+Γ)/2, (γ−Γ)/2)`.
    pub fn rates(&self, params: &OscillatorParams, drive: &Drive) -> (f64, f64) {
        let g = params.gamma;
        let big = drive.gamma_mod;
        (0.5 * (g + big), 0.5 * (g - big))
    }

    /// `|A−/A+|`; infinite when `A+` vanishes.
    pub fn amplitude_ratio(&self) -> f64 {
        self.a_minus.abs() / self.a_plus.abs()
    }
}

fn ic_matrix(phi_prime: f64, b: f64) -> [[f64; 2]; 2] {
    let (s, c) = phi_prime.sin_cos();
    [[c, s], [-s - 0.5 * b * c, c + 0.5 * b * s]]
}

fn condition_number(m: &[[f64; 2]; 2]) -> f64 {
    let fro2 = m[0][0].powi(2) + m[0][1].powi(2) + m[1][0].powi(2) + m[1][1].powi(2);
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let disc = (fro2 * fro2 - 4.0 * det * det).max(0.0).sqrt();
    let smax = (0.5 * (fro2 + disc)).sqrt();
    let smin2 = 0.5 * (fro2 - disc);
    if smin2 <= 0.0 {
        f64::INFINITY
    } else {
        smax / smin2.sqrt()
    }
}

/// Solves the initial-condition system for `A∓` at modulation phase `phi`:
///
/// ```text
///  A− cos φ′ + A+ sin φ′                                   = q0
/// −A− sin φ′ + A+ cos φ′ − (b/2) A− cos φ′ + (b/2) A+ sin φ′ = p0
/// ```
pub fn coefficients_from_initial(q0: f64, p0: f64, phi: f64, b: f64) -> Result<MathieuSolution> {
    if q0 == 0.0 && p0 == 0.0 {
        return Err(Error::ZeroState);
    }
    let phi_prime = 0.5 * phi + FRAC_PI_4;
    let m = ic_matrix(phi_prime, b);
    let condition = condition_number(&m);
    if !(condition < SINGULAR_CONDITION) {
        return Err(Error::SingularSystem { condition });
    }
    let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
    let a_minus = (q0 * m[1][1] - m[0][1] * p0) / det;
    let a_plus = (m[0][0] * p0 - m[1][0] * q0) / det;
    Ok(MathieuSolution {
        a_minus,
        a_plus,
        phi,
        phi_prime,
        b,
    })
}

/// Position from the two-branch closed form. `drive` supplies Γ.
pub fn analytic_trajectory(sol: &MathieuSolution, params: &OscillatorParams, drive: &Drive, t: f64) -> f64 {
    analytic_state(sol, params, drive, t).q
}

/// Position and momentum (`p = q̇/Ω`) from the closed form.
pub fn analytic_state(
    sol: &MathieuSolution,
    params: &OscillatorParams,
    drive: &Drive,
    t: f64,
) -> QuadratureState {
    let (r_minus, r_plus) = sol.rates(params, drive);
    let (s, c) = (params.omega * t + sol.phi_prime).sin_cos();
    let em = sol.a_minus * (-r_minus * t).exp();
    let ep = sol.a_plus * (-r_plus * t).exp();
    let q = em * c + ep * s;
    let qdot = em * (-r_minus * c - params.omega * s) + ep * (-r_plus * s + params.omega * c);
    QuadratureState::new(q, qdot / params.omega)
}

/// Modulation phase that nulls the antidamped branch to leading order:
/// `φ = π/2 + 2·atan2(2q0, 2p0 + b q0)`, wrapped to `[0, 2π)`.
///
/// Equivalent to `π/2 + 2 tan⁻¹[1/(p0/q0 + b/2)]` where that is defined; the
/// two-argument form stays finite at `q0 = 0` and `p0 = 0`.
pub fn optimal_phase(q0: f64, p0: f64, b: f64) -> Result<f64> {
    if q0 == 0.0 && p0 == 0.0 {
        return Err(Error::ZeroState);
    }
    Ok(wrap_phase(FRAC_PI_2 + 2.0 * (2.0 * q0).atan2(2.0 * p0 + b * q0)))
}

/// Estimate of `A−/A+` at the uncorrected (b = 0) optimal phase:
/// `2(q0² − p0²)/(b q0²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RatioEstimate {
    pub value: f64,
    /// Set when the estimate predicts no cooling window (`|value| <= 1`).
    pub degenerate: bool,
}

pub fn amplitude_ratio_estimate(q0: f64, p0: f64, b: f64) -> Result<RatioEstimate> {
    if q0 == 0.0 {
        return Err(Error::invalid("q0", q0, "q0 != 0 required"));
    }
    if b == 0.0 {
        return Err(Error::invalid("b", b, "b != 0 required"));
    }
    let value = 2.0 * (q0 * q0 - p0 * p0) / (b * q0 * q0);
    Ok(RatioEstimate {
        value,
        degenerate: value.abs() <= 1.0,
    })
}

/// Time at which the antidamped branch overtakes the damped one,
/// `τ = ln(|A−|/|A+|)/Γ`.
///
/// Returns `+∞` when `A+ = 0` exactly and `0` when `|A−| <= |A+|`.
pub fn turning_time(sol: &MathieuSolution, drive: &Drive) -> Result<f64> {
    if !(drive.gamma_mod > 0.0) {
        return Err(Error::invalid("gamma_mod", drive.gamma_mod, "Γ > 0 required"));
    }
    if sol.a_plus == 0.0 {
        return Ok(if sol.a_minus == 0.0 { 0.0 } else { f64::INFINITY });
    }
    let ratio = sol.amplitude_ratio();
    if ratio <= 1.0 {
        return Ok(0.0);
    }
    Ok(ratio.ln() / drive.gamma_mod)
}
