//! Time-domain integration of the classical Langevin equations
//!
//! ```text
//! dq = Ω p dt
//! dp = (−γ p − Ω q + 2Γ cos(2Ωt + φ) q) dt + √(2γ n_th) dW
//! ```
//!
//! Two discretisations are provided. [`Integrator::TransferMatrix`] is the
//! explicit scheme `v_n = M_n v_{n−1} + noise`; it multiplies the energy of a
//! free oscillator by `1 + Ω²dt²` per step and is kept for equivalence
//! checks. [`Integrator::RotationSplitting`] rotates exactly by `Ω dt`,
//! applies the exact damping factor `e^{−γ dt}` to `p` and then the
//! parametric and noise kicks; it is the default.
//!
//! Grid times are always `t_n = n·dt`. The step from `t_{n−1}` to `t_n` uses
//! the phase chosen at `t_{n−1}`.

mod ensemble;
mod matrix;
mod reference;

pub use ensemble::{derive_seed, ensemble_run, ic_rng, noise_rng, thermal_sampler};
pub(crate) use ensemble::{for_each_ordered, BinAccumulator};
pub use matrix::{evolution_matrix, unmodulated_power, StepMatrix};
pub use reference::{reference_integrate, reference_integrate_with, REFERENCE_DT, REFERENCE_STRIDE};

use rand::Rng;
use rand_distr::StandardNormal;

use crate::model::{wrap_phase, Drive, OscillatorParams, QuadratureState, RunMeta, Sample, TrajectoryRecord};
use crate::{Error, Result};

/// Largest accepted step, in units of 1/Ω.
pub const MAX_DT: f64 = 1e-2;

/// Production step.
pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    TransferMatrix,
    #[default]
    RotationSplitting,
}

impl Integrator {
    pub fn name(self) -> &'static str {
        match self {
            Integrator::TransferMatrix => "transfer_matrix",
            Integrator::RotationSplitting => "rotation_splitting",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum Noise {
    #[default]
    Off,
    /// Brownian force `√(2γ n_th) dW` on `p`.
    Classical { n_th: f64 },
}

impl Noise {
    pub fn thermal(params: &OscillatorParams) -> Self {
        Noise::Classical { n_th: params.n_th }
    }

    fn n_th(self) -> f64 {
        match self {
            Noise::Off => 0.0,
            Noise::Classical { n_th } => n_th,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub noise: Noise,
    pub sample_stride: usize,
    pub seed: u64,
}

impl SimConfig {
    pub fn new(dt: f64, t_end: f64) -> Result<Self> {
        let cfg = Self {
            dt,
            t_end,
            integrator: Integrator::default(),
            noise: Noise::Off,
            sample_stride: 1,
            seed: 0,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt <= MAX_DT) {
            return Err(Error::invalid("dt", self.dt, "0 < dt <= 1e-2/Ω required"));
        }
        if !(self.t_end.is_finite() && self.t_end >= 0.0) {
            return Err(Error::invalid("t_end", self.t_end, "t_end must be finite and >= 0"));
        }
        if self.sample_stride == 0 {
            return Err(Error::invalid("sample_stride", 0.0, "sample_stride >= 1 required"));
        }
        if let Noise::Classical { n_th } = self.noise {
            if !(n_th.is_finite() && n_th >= 0.0) {
                return Err(Error::invalid("n_th", n_th, "noise n_th must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn with_integrator(self, integrator: Integrator) -> Self {
        Self { integrator, ..self }
    }

    pub fn with_noise(self, noise: Noise) -> Self {
        Self { noise, ..self }
    }

    pub fn with_stride(self, sample_stride: usize) -> Self {
        Self { sample_stride, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    pub fn with_t_end(self, t_end: f64) -> Self {
        Self { t_end, ..self }
    }

    /// Number of steps, `round(t_end/dt)`.
    pub fn steps(&self) -> u64 {
        (self.t_end / self.dt).round() as u64
    }

    pub fn time(&self, n: u64) -> f64 {
        n as f64 * self.dt
    }
}

/// Precomputed per-step constants for one mode.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stepper {
    integrator: Integrator,
    dt: f64,
    omega: f64,
    gamma: f64,
    cos_rot: f64,
    sin_rot: f64,
    damp: f64,
    noise_amp: f64,
    two_gamma_mod: f64,
}

impl Stepper {
    pub(crate) fn new(cfg: &SimConfig, params: &OscillatorParams, drive: &Drive) -> Self {
        let (sin_rot, cos_rot) = (params.omega * cfg.dt).sin_cos();
        Self {
            integrator: cfg.integrator,
            dt: cfg.dt,
            omega: params.omega,
            gamma: params.gamma,
            cos_rot,
            sin_rot,
            damp: (-params.gamma * cfg.dt).exp(),
            noise_amp: (2.0 * params.gamma * cfg.noise.n_th() * cfg.dt).sqrt(),
            two_gamma_mod: 2.0 * drive.gamma_mod,
        }
    }

    pub(crate) fn has_noise(&self) -> bool {
        self.noise_amp > 0.0
    }

    /// Force coefficient `2Γ cos(2Ωt + φ)` of this mode's own drive term.
    #[inline]
    pub(crate) fn own_force(&self, t: f64, phi: f64) -> f64 {
        if self.two_gamma_mod == 0.0 {
            0.0
        } else {
            self.two_gamma_mod * (2.0 * self.omega * t + phi).cos()
        }
    }

    /// Step `n` (from `t_{n−1}` to `t_n`) at phase `phi`.
    #[inline]
    pub(crate) fn advance<R: Rng + ?Sized>(&self, s: QuadratureState, n: u64, phi: f64, rng: &mut R) -> QuadratureState {
        let f = self.own_force(self.force_time(n), phi);
        self.advance_with_force(s, f, rng)
    }

    /// Step with an externally supplied force coefficient `f` (the factor
    /// multiplying `q` in the momentum kick).
    #[inline]
    pub(crate) fn advance_with_force<R: Rng + ?Sized>(&self, s: QuadratureState, f: f64, rng: &mut R) -> QuadratureState {
        let (q, mut p) = match self.integrator {
            Integrator::TransferMatrix => {
                let dt = self.dt;
                (
                    s.q + self.omega * dt * s.p,
                    (-self.omega * dt + f * dt) * s.q + (1.0 - self.gamma * dt) * s.p,
                )
            }
            Integrator::RotationSplitting => {
                let q = s.q * self.cos_rot + s.p * self.sin_rot;
                let p = (-s.q * self.sin_rot + s.p * self.cos_rot) * self.damp;
                (q, p + f * q * self.dt)
            }
        };
        if self.noise_amp > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            p += self.noise_amp * z;
        }
        QuadratureState::new(q, p)
    }

    /// Time at which the parametric force of step `n` is evaluated.
    #[inline]
    pub(crate) fn force_time(&self, n: u64) -> f64 {
        match self.integrator {
            Integrator::TransferMatrix => (n - 1) as f64 * self.dt,
            Integrator::RotationSplitting => n as f64 * self.dt,
        }
    }
}

/// One step of either integrator. `step_index >= 1`.
pub fn step<R: Rng + ?Sized>(
    state: QuadratureState,
    step_index: u64,
    cfg: &SimConfig,
    params: &OscillatorParams,
    drive: &Drive,
    rng: &mut R,
) -> QuadratureState {
    assert!(step_index >= 1, "step indices start at 1");
    Stepper::new(cfg, params, drive).advance(state, step_index, drive.phi, rng)
}

/// Chooses the modulation phase (global frame) for the step leaving grid
/// point `n`, given the state there.
pub trait PhaseController {
    fn phase_at(&mut self, n: u64, t: f64, state: QuadratureState) -> f64;

    /// Stops the run at the current grid point when true. Checked after
    /// every [`phase_at`](Self::phase_at).
    fn finished(&self) -> bool {
        false
    }
}

/// Piecewise-constant phase switched at fixed grid times.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    entries: Vec<(f64, f64)>,
    cursor: usize,
    switch_steps: Vec<u64>,
}

impl PhaseSchedule {
    pub fn constant(phi: f64) -> Self {
        Self {
            entries: vec![(0.0, wrap_phase(phi))],
            cursor: 0,
            switch_steps: Vec::new(),
        }
    }

    /// `(t, φ)` pairs; the first must be at `t = 0` and times must increase.
    pub fn new(entries: Vec<(f64, f64)>) -> Self {
        Self {
            entries: entries.into_iter().map(|(t, p)| (t, wrap_phase(p))).collect(),
            cursor: 0,
            switch_steps: Vec::new(),
        }
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    /// [`bind`](Self::bind) by value.
    pub fn bound(mut self, cfg: &SimConfig) -> Result<Self> {
        self.bind(cfg)?;
        Ok(self)
    }

    /// Checks coverage of `[0, t_end]` and maps switch times onto the grid.
    pub fn bind(&mut self, cfg: &SimConfig) -> Result<()> {
        let gap = |detail: String| Error::ScheduleGap {
            t_end: cfg.t_end,
            detail,
        };
        let Some(&(t0, _)) = self.entries.first() else {
            return Err(gap("schedule is empty".into()));
        };
        if t0.abs() > 0.5 * cfg.dt {
            return Err(gap(format!("first entry at t = {t0}, not 0")));
        }
        let mut steps = Vec::with_capacity(self.entries.len());
        for &(t, phi) in &self.entries {
            if !(t.is_finite() && phi.is_finite()) {
                return Err(gap(format!("non-finite entry ({t}, {phi})")));
            }
            let n = (t / cfg.dt).round().max(0.0) as u64;
            if let Some(&last) = steps.last() {
                if n <= last {
                    return Err(gap(format!("switch at t = {t} does not advance past step {last}")));
                }
            }
            steps.push(n);
        }
        self.switch_steps = steps;
        self.cursor = 0;
        Ok(())
    }
}

impl PhaseController for PhaseSchedule {
    fn phase_at(&mut self, n: u64, _t: f64, _state: QuadratureState) -> f64 {
        assert!(
            self.entries.len() == 1 || !self.switch_steps.is_empty(),
            "a schedule with switches must be bound to a grid first"
        );
        while self.cursor + 1 < self.switch_steps.len() && self.switch_steps[self.cursor + 1] <= n {
            self.cursor += 1;
        }
        self.entries[self.cursor].1
    }
}

/// Integrates from `ic` with a fixed phase schedule. `drive.phi` is ignored
/// in favour of the schedule.
pub fn simulate(
    ic: QuadratureState,
    schedule: &PhaseSchedule,
    cfg: &SimConfig,
    params: &OscillatorParams,
    drive: &Drive,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    let mut schedule = schedule.clone();
    schedule.bind(cfg)?;
    simulate_with(ic, &mut schedule, cfg, params, drive)
}

/// Integrates from `ic`, asking `controller` for the phase at every grid point.
pub fn simulate_with<C: PhaseController + ?Sized>(
    ic: QuadratureState,
    controller: &mut C,
    cfg: &SimConfig,
    params: &OscillatorParams,
    drive: &Drive,
) -> Result<TrajectoryRecord> {
    cfg.validate()?;
    if !ic.is_finite() {
        return Err(Error::invalid("ic", f64::NAN, "initial quadratures must be finite"));
    }
    let stepper = Stepper::new(cfg, params, drive);
    let mut rng = noise_rng(cfg.seed);
    let steps = cfg.steps();
    let stride = cfg.sample_stride as u64;
    let mut samples = Vec::with_capacity((steps / stride + 1).min(1 << 20) as usize);
    let mut last_step = steps;

    let mut state = ic;
    let mut phi = controller.phase_at(0, 0.0, state);
    let phi0 = phi;
    samples.push(Sample::new(0.0, state, phi));
    for n in 1..=steps {
        state = stepper.advance(state, n, phi, &mut rng);
        let t = cfg.time(n);
        phi = controller.phase_at(n, t, state);
        let done = controller.finished();
        if n % stride == 0 || done {
            samples.push(Sample::new(t, state, phi));
        }
        if done {
            last_step = n;
            break;
        }
    }
    Ok(TrajectoryRecord {
        samples,
        dt: cfg.dt,
        seed: cfg.seed,
        meta: RunMeta {
            params: *params,
            drive: drive.with_phase(phi0),
            scheme: cfg.integrator.name(),
            noise: stepper.has_noise(),
            t_end: cfg.time(last_step),
            sample_stride: cfg.sample_stride,
        },
    })
}

/// Deterministic free evolution with weak damping,
/// `q = e^{−γt/2}(q0 cos Ωt + p0 sin Ωt)`, `p = e^{−γt/2}(p0 cos Ωt − q0 sin Ωt)`.
pub fn unmodulated_closed_form(ic: QuadratureState, t: f64, params: &OscillatorParams) -> QuadratureState {
    ic.rotated(params.omega * t) * (-0.5 * params.gamma * t).exp()
}
