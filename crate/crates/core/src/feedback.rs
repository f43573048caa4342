//! Phase-adaptive feedback: measure `(q, p)`, re-optimise φ, repeat.
//!
//! Measurements are noiseless and instantaneous, and the phase switches
//! discontinuously. The optimal-phase formula assumes a drive
//! `cos(2Ω(t − t_j) + φ_j)` that starts at the measurement time, while the
//! integrators use the absolute time. The phase actually applied after an
//! update at `t_j` is therefore `φ_j − 2Ω t_j` (see [`global_phase`]); the log
//! keeps both.

use crate::classical::{coefficients_from_initial, optimal_phase, turning_time};
use crate::engine::{simulate_with, PhaseController, SimConfig};
use crate::model::{wrap_phase, Drive, OscillatorParams, QuadratureState, TrajectoryRecord};
use crate::{Error, Result};

/// Shortest update interval, in steps.
pub const MIN_INTERVAL_STEPS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackMode {
    SingleShot,
    Adaptive,
    /// Updates spaced beyond the turning time.
    Delayed,
}

impl FeedbackMode {
    pub fn name(self) -> &'static str {
        match self {
            FeedbackMode::SingleShot => "single_shot",
            FeedbackMode::Adaptive => "adaptive",
            FeedbackMode::Delayed => "delayed",
        }
    }
}

/// How the time to the next update is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum IntervalPolicy {
    Fixed(f64),
    /// `fraction · τ` of the initial state, then held fixed.
    InitialTurning { fraction: f64 },
    /// `fraction · τ_j` recomputed from the state at every update.
    PerSegment { fraction: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseUpdate {
    pub t: f64,
    pub q: f64,
    pub p: f64,
    /// `optimal_phase(q, p, b)`.
    pub phi: f64,
    /// Phase applied in the global time frame.
    pub phi_applied: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackPlan {
    /// First update interval; infinite for single-shot.
    pub delta_tau: f64,
    pub max_updates: Option<usize>,
    pub mode: FeedbackMode,
    /// Entry 0 is the initial choice at `t = 0`; the rest are updates.
    pub phase_log: Vec<PhaseUpdate>,
}

impl FeedbackPlan {
    pub fn updates(&self) -> usize {
        self.phase_log.len().saturating_sub(1)
    }
}

/// Global-frame phase equivalent to `local` for a drive re-zeroed at `t`.
pub fn global_phase(local: f64, omega: f64, t: f64) -> f64 {
    wrap_phase(local - 2.0 * omega * t)
}

/// Plan with a single phase chosen from the initial quadratures.
pub fn plan_single_shot(ic: QuadratureState, b: f64) -> Result<FeedbackPlan> {
    let phi = optimal_phase(ic.q, ic.p, b)?;
    Ok(FeedbackPlan {
        delta_tau: f64::INFINITY,
        max_updates: Some(0),
        mode: FeedbackMode::SingleShot,
        phase_log: vec![PhaseUpdate {
            t: 0.0,
            q: ic.q,
            p: ic.p,
            phi,
            phi_applied: phi,
        }],
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntervalKind {
    /// `τ/2` of the current state.
    Nominal,
    /// τ exceeded [`turning_time_cap`] (infinite when `A+` vanishes).
    Capped,
    /// Heating-dominated state or τ/2 below the resolution floor: `10·dt`.
    Floor,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalRecommendation {
    pub delta_tau: f64,
    /// Turning time used (after capping).
    pub tau: f64,
    pub kind: IntervalKind,
}

/// Largest turning time used for intervals, `2 ln(2/|b|)/Γ`: twice the
/// shortest `b = 0`-phase turning time over initial-condition angles.
pub fn turning_time_cap(drive: &Drive) -> f64 {
    2.0 * (2.0 / drive.b.abs()).ln() / drive.gamma_mod
}

/// Turning time of `state` under the unmodulated-limit phase `φ(b = 0)`,
/// clamped to [`turning_time_cap`].
fn b0_turning_time(state: QuadratureState, drive: &Drive) -> Result<(f64, bool)> {
    let phi0 = optimal_phase(state.q, state.p, 0.0)?;
    let sol = coefficients_from_initial(state.q, state.p, phi0, drive.b)?;
    let tau = turning_time(&sol, drive)?;
    let cap = turning_time_cap(drive);
    if tau > cap {
        Ok((cap, true))
    } else {
        Ok((tau, false))
    }
}

/// `δτ = τ/2` for the current state, with τ from the coefficients at the
/// `b = 0` optimal phase, floored at `10·dt`.
pub fn recommended_interval(state: QuadratureState, drive: &Drive, dt: f64) -> Result<IntervalRecommendation> {
    interval_with_fraction(state, drive, dt, 0.5)
}

fn interval_with_fraction(state: QuadratureState, drive: &Drive, dt: f64, fraction: f64) -> Result<IntervalRecommendation> {
    if !(drive.gamma_mod > 0.0) {
        return Err(Error::invalid("gamma_mod", drive.gamma_mod, "Γ > 0 required"));
    }
    let floor = MIN_INTERVAL_STEPS * dt;
    let (tau, capped) = b0_turning_time(state, drive)?;
    let nominal = fraction * tau;
    let (delta_tau, kind) = if nominal < floor {
        (floor, IntervalKind::Floor)
    } else if capped {
        (nominal, IntervalKind::Capped)
    } else {
        (nominal, IntervalKind::Nominal)
    };
    Ok(IntervalRecommendation { delta_tau, tau, kind })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeedbackSettings {
    pub policy: IntervalPolicy,
    /// Stop when the update after the last allowed one would be due.
    /// `None` runs to the configured horizon.
    pub max_updates: Option<usize>,
    pub mode: FeedbackMode,
}

impl FeedbackSettings {
    pub fn single_shot() -> Self {
        Self {
            policy: IntervalPolicy::Fixed(f64::INFINITY),
            max_updates: Some(0),
            mode: FeedbackMode::SingleShot,
        }
    }

    pub fn fixed(delta_tau: f64) -> Self {
        Self {
            policy: IntervalPolicy::Fixed(delta_tau),
            max_updates: None,
            mode: FeedbackMode::Adaptive,
        }
    }

    pub fn with_max_updates(self, n: usize) -> Self {
        Self {
            max_updates: Some(n),
            ..self
        }
    }

    pub fn with_mode(self, mode: FeedbackMode) -> Self {
        Self { mode, ..self }
    }
}

/// [`PhaseController`] that re-optimises the phase at scheduled updates.
#[derive(Debug, Clone)]
pub struct FeedbackController {
    settings: FeedbackSettings,
    drive: Drive,
    omega: f64,
    dt: f64,
    next_update: u64,
    phase: f64,
    done: bool,
    first_interval: f64,
    log: Vec<PhaseUpdate>,
}

impl FeedbackController {
    pub fn new(settings: FeedbackSettings, cfg: &SimConfig, params: &OscillatorParams, drive: &Drive) -> Result<Self> {
        let floor = MIN_INTERVAL_STEPS * cfg.dt;
        match settings.policy {
            IntervalPolicy::Fixed(d) if !(d >= floor) => {
                return Err(Error::invalid("delta_tau", d, "delta_tau >= 10·dt required"));
            }
            IntervalPolicy::InitialTurning { fraction } | IntervalPolicy::PerSegment { fraction }
                if !(fraction > 0.0 && fraction.is_finite()) =>
            {
                return Err(Error::invalid("fraction", fraction, "interval fraction must be > 0"));
            }
            _ => {}
        }
        if settings.max_updates != Some(0) && !matches!(settings.policy, IntervalPolicy::Fixed(_)) && !(drive.gamma_mod > 0.0) {
            return Err(Error::invalid("gamma_mod", drive.gamma_mod, "turning-time intervals need Γ > 0"));
        }
        Ok(Self {
            settings,
            drive: *drive,
            omega: params.omega,
            dt: cfg.dt,
            next_update: u64::MAX,
            phase: drive.phi,
            done: false,
            first_interval: f64::INFINITY,
            log: Vec::new(),
        })
    }

    fn interval(&self, state: QuadratureState) -> f64 {
        match self.settings.policy {
            IntervalPolicy::Fixed(d) => d,
            IntervalPolicy::InitialTurning { .. } if self.first_interval.is_finite() => self.first_interval,
            IntervalPolicy::InitialTurning { fraction } | IntervalPolicy::PerSegment { fraction } => {
                interval_with_fraction(state, &self.drive, self.dt, fraction)
                    .map(|r| r.delta_tau)
                    .unwrap_or(MIN_INTERVAL_STEPS * self.dt)
            }
        }
    }

    fn steps_for(&self, delta_tau: f64) -> u64 {
        if delta_tau.is_finite() {
            ((delta_tau / self.dt).round() as u64).max(1)
        } else {
            u64::MAX
        }
    }

    pub fn log(&self) -> &[PhaseUpdate] {
        &self.log
    }

    pub fn into_plan(self) -> FeedbackPlan {
        FeedbackPlan {
            delta_tau: self.first_interval,
            max_updates: self.settings.max_updates,
            mode: self.settings.mode,
            phase_log: self.log,
        }
    }
}

impl PhaseController for FeedbackController {
    fn phase_at(&mut self, n: u64, t: f64, state: QuadratureState) -> f64 {
        let initial = self.log.is_empty();
        if !initial && n < self.next_update {
            return self.phase;
        }
        let updates_done = self.log.len().saturating_sub(1);
        if !initial && self.settings.max_updates.is_some_and(|m| updates_done >= m) {
            self.done = true;
            return self.phase;
        }
        // An exactly zero state has no phase; keep the current one.
        if let Ok(local) = optimal_phase(state.q, state.p, self.drive.b) {
            self.phase = global_phase(local, self.omega, t);
            self.log.push(PhaseUpdate {
                t,
                q: state.q,
                p: state.p,
                phi: local,
                phi_applied: self.phase,
            });
        }
        let interval = self.interval(state);
        if initial {
            self.first_interval = interval;
        }
        self.next_update = n.saturating_add(self.steps_for(interval));
        self.phase
    }

    fn finished(&self) -> bool {
        self.done
    }
}

/// Runs one trajectory under phase feedback. The run ends at `cfg.t_end` or,
/// with `max_updates = Some(N)`, when update `N + 1` would be due.
pub fn run_adaptive(
    ic: QuadratureState,
    settings: FeedbackSettings,
    cfg: &SimConfig,
    params: &OscillatorParams,
    drive: &Drive,
) -> Result<(TrajectoryRecord, FeedbackPlan)> {
    if ic.is_zero() {
        return Err(Error::ZeroState);
    }
    let mut controller = FeedbackController::new(settings, cfg, params, drive)?;
    let record = simulate_with(ic, &mut controller, cfg, params, drive)?;
    Ok((record, controller.into_plan()))
}
