//! The four run kinds behind the `simulate`, `ensemble`, `multimode` and
//! `quantum` subcommands. Each writes its tables plus a summary sidecar that
//! embeds the full config.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use phasecool::analysis::{fit_cooling_rate, fit_initial_cooling_rate, late_time_mean, late_time_mean_n, turning_point};
use phasecool::classical::optimal_phase;
use phasecool::engine::{ensemble_run, ic_rng, simulate_with, PhaseController, PhaseSchedule};
use phasecool::feedback::{FeedbackController, FeedbackSettings};
use phasecool::multimode::{band_partition, ensemble_multimode, isolated_ensembles};
use phasecool::quantum::{final_occupancy_limit, position_variance_closed, position_variance_quadrature, SpectralConfig};
use phasecool::{sample_thermal_state, QuadratureState, TrajectoryRecord};

use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::output::{write_ensemble, write_file, write_trajectory, Summary};

pub const SUMMARY_FORMAT: &str = "phasecool-summary/1";

#[derive(Debug, Clone, Default)]
pub struct RunOutput {
    pub files: Vec<PathBuf>,
    pub summary: Summary,
}

/// Summary header shared by every run: format tag, kind, seed and the config manifest.
pub fn summary_for(kind: &str, cfg: &ExperimentConfig) -> Summary {
    let mut s = Summary::new();
    s.push("format", SUMMARY_FORMAT).push("kind", kind).push("seed", cfg.seed);
    s.extend_prefixed("config", cfg.manifest());
    s
}

/// Explicit `(q0, p0)`, a thermal draw of `n0` from the seed's IC stream, or `(1, 0)`.
pub fn initial_state(cfg: &ExperimentConfig) -> Result<QuadratureState, CliError> {
    let init = &cfg.initial;
    if let Some(n0) = init.n0 {
        return Ok(sample_thermal_state(n0, &mut ic_rng(cfg.seed))?);
    }
    match (init.q0, init.p0) {
        (None, None) => Ok(QuadratureState::new(1.0, 0.0)),
        (q, p) => Ok(QuadratureState::new(q.unwrap_or(0.0), p.unwrap_or(0.0))),
    }
}

/// Fixed phase from the config, or feedback (single-shot when no
/// `[feedback]` section is given).
enum Control {
    Fixed(PhaseSchedule),
    Feedback(Box<FeedbackController>),
}

impl PhaseController for Control {
    fn phase_at(&mut self, n: u64, t: f64, state: QuadratureState) -> f64 {
        match self {
            Control::Fixed(s) => s.phase_at(n, t, state),
            Control::Feedback(c) => c.phase_at(n, t, state),
        }
    }

    fn finished(&self) -> bool {
        match self {
            Control::Fixed(s) => s.finished(),
            Control::Feedback(c) => c.finished(),
        }
    }
}

fn controller(cfg: &ExperimentConfig) -> Result<Control, CliError> {
    let sim = cfg.sim_config()?;
    let params = cfg.params()?;
    let drive = cfg.drive()?;
    match (cfg.drive.phi, &cfg.feedback) {
        (Some(phi), None) => Ok(Control::Fixed(PhaseSchedule::constant(phi).bound(&sim)?)),
        _ => {
            let settings = if cfg.feedback.is_some() {
                cfg.feedback_settings()?
            } else {
                FeedbackSettings::single_shot()
            };
            Ok(Control::Feedback(Box::new(FeedbackController::new(settings, &sim, &params, &drive)?)))
        }
    }
}

fn push_trajectory_stats(s: &mut Summary, record: &TrajectoryRecord, late_fraction: f64) {
    let (t_min, n_min) = turning_point(record);
    s.push("n_initial", record.first().n)
        .push("n_final", record.last().n)
        .push("t_min", t_min)
        .push("n_min", n_min)
        .push("late_mean_n", late_time_mean_n(record, late_fraction))
        .push("t_end", record.meta.t_end)
        .push("phi_initial", record.first().phi);
    let period = PI / record.meta.params.omega;
    let fit = fit_initial_cooling_rate(record, period)
        .map(|f| (f, "half_turning"))
        .or_else(|_| fit_cooling_rate(record, period, t_min).map(|f| (f, "turning")));
    match fit {
        Ok((fit, window)) => {
            s.push("fit.window", window)
                .push("fit.rate", fit.rate)
                .push("fit.points", fit.points)
                .push("fit.t_end", fit.t_end)
                .push("fit.rate_over_gamma_mod", fit.rate / record.meta.drive.gamma_mod);
        }
        Err(e) => {
            s.push("fit.error", e);
        }
    }
}

pub fn run_simulate(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    let sim = cfg.sim_config()?;
    let params = cfg.params()?;
    let drive = cfg.drive()?;
    let ic = initial_state(cfg)?;
    if ic.is_zero() && !(cfg.drive.phi.is_some() && cfg.feedback.is_none()) {
        return Err(phasecool::Error::ZeroState.into());
    }
    let mut control = controller(cfg)?;
    let record = simulate_with(ic, &mut control, &sim, &params, &drive)?;

    let mut summary = summary_for("trajectory", cfg);
    summary.push("q0", ic.q).push("p0", ic.p).push("samples", record.samples.len());
    if let Control::Feedback(c) = &control {
        summary.push("updates", c.log().len().saturating_sub(1));
        if let Ok(local) = optimal_phase(ic.q, ic.p, drive.b) {
            summary.push("phi_optimal", local);
        }
    }
    push_trajectory_stats(&mut summary, &record, 0.2);

    let files = vec![
        write_trajectory(&record, &out_dir.join("trajectory.csv"))?,
        summary.write(&out_dir.join("trajectory.summary.txt"))?,
    ];
    Ok(RunOutput { files, summary })
}

pub fn run_ensemble(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    let e = cfg
        .ensemble
        .ok_or_else(|| CliError::Validation("an [ensemble] section is required".into()))?;
    let sim = cfg.sim_config()?;
    let params = cfg.params()?;
    let drive = cfg.drive()?;
    let n0 = e.n0.unwrap_or(params.n_th);
    controller(cfg)?;
    let stats = ensemble_run(
        |rng: &mut _| sample_thermal_state(n0, rng),
        |_| controller(cfg).expect("validated above"),
        &sim,
        &params,
        &drive,
        e.count,
    )?;

    let late = late_time_mean(&stats.time_bins, &stats.mean_n, e.late_fraction);
    let late_q2 = late_time_mean(&stats.time_bins, &stats.mean_q2, e.late_fraction);
    let mut summary = summary_for("ensemble", cfg);
    summary
        .push("count", stats.count)
        .push("n0", n0)
        .push("late_fraction", e.late_fraction)
        .push("late_mean_n", late)
        .push("late_mean_q2", late_q2)
        .push("equilibrium_estimate", params.gamma * params.n_th / (params.gamma + drive.gamma_mod))
        .push("final_mean_n", stats.mean_n.last().copied().unwrap_or(f64::NAN));

    let files = vec![
        write_ensemble(&stats, &out_dir.join("ensemble.csv"))?,
        summary.write(&out_dir.join("ensemble.summary.txt"))?,
    ];
    Ok(RunOutput { files, summary })
}

pub fn run_multimode(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    let set = cfg.mode_set()?;
    let fb = cfg.multimode_feedback()?;
    let m = cfg.modes.clone().expect("mode_set checked the section");
    let sim = cfg.sim_config()?;
    let n0 = vec![m.n0.unwrap_or(cfg.oscillator.n_th); set.len()];
    let resolution = fb.resolution.unwrap_or(set.max_gamma_mod());
    let bands = band_partition(&set, resolution.max(f64::MIN_POSITIVE))?;

    let stats = ensemble_multimode(&set, &n0, &fb, &sim, m.count)?;
    let baselines = if m.baselines {
        Some(isolated_ensembles(&set, &n0, &fb, &sim, m.count)?)
    } else {
        None
    };

    let mut summary = summary_for("multimode", cfg);
    summary
        .push("modes", set.len())
        .push("bands", bands.len())
        .push("resolution", resolution)
        .push("count", m.count)
        .push("late_fraction", m.late_fraction);
    let mut files = Vec::new();
    for (j, s) in stats.iter().enumerate() {
        let band = bands.iter().find(|b| b.members.contains(&j)).expect("partition covers every mode");
        let late = late_time_mean(&s.time_bins, &s.mean_n, m.late_fraction);
        summary
            .push(format!("mode.{j}.omega"), set.modes[j].omega)
            .push(format!("mode.{j}.degenerate"), band.is_degenerate())
            .push(format!("mode.{j}.n0"), n0[j])
            .push(format!("mode.{j}.late_mean_n"), late);
        files.push(write_ensemble(s, &out_dir.join(format!("mode_{j}.csv")))?);
        if let Some(base) = &baselines {
            let b = &base[j];
            let iso = late_time_mean(&b.time_bins, &b.mean_n, m.late_fraction);
            summary
                .push(format!("mode.{j}.baseline"), iso)
                .push(format!("mode.{j}.ratio_to_baseline"), late / iso);
            files.push(write_ensemble(b, &out_dir.join(format!("baseline_{j}.csv")))?);
        }
    }
    files.push(summary.write(&out_dir.join("multimode.summary.txt"))?);
    Ok(RunOutput { files, summary })
}

/// 20 log-spaced Γ/γ values over `[2, 1e5]` at φ ∈ {0, π/2, π}.
pub fn default_quantum_grid() -> (Vec<f64>, Vec<f64>) {
    let ratios = (0..20).map(|i| 2.0 * (5e4f64).powf(i as f64 / 19.0)).collect();
    (ratios, vec![0.0, PI / 2.0, PI])
}

pub fn run_quantum(cfg: &ExperimentConfig, out_dir: &Path) -> Result<RunOutput, CliError> {
    let params = cfg.params()?;
    if !(params.gamma > 0.0) {
        return Err(CliError::Validation("quantum: oscillator.gamma > 0 required".into()));
    }
    let (ratios, phases) = match &cfg.quantum {
        Some(q) => (q.ratios.clone(), q.phases.clone()),
        None => default_quantum_grid(),
    };
    let mut table = String::from("gamma_ratio,phi,closed,quadrature,rel_diff\n");
    let mut worst: f64 = 0.0;
    for &phi in &phases {
        for &r in &ratios {
            let spectral = SpectralConfig::new(params.gamma, r * params.gamma, phi, params.n_th)?;
            let closed = position_variance_closed(&spectral)?;
            let quad = position_variance_quadrature(&spectral)?;
            let rel = ((closed - quad) / quad).abs();
            worst = worst.max(rel);
            table.push_str(&format!("{r},{phi},{closed},{quad},{rel}\n"));
        }
    }
    let drive = cfg.drive()?;
    let at_config = SpectralConfig::new(params.gamma, drive.gamma_mod, cfg.drive.phi.unwrap_or(PI / 2.0), params.n_th)?;
    let limit = final_occupancy_limit(&at_config)?;
    let thermal = position_variance_closed(&SpectralConfig::new(params.gamma, 0.0, 0.0, params.n_th)?)?;

    let mut summary = summary_for("quantum", cfg);
    summary
        .push("grid_points", ratios.len() * phases.len())
        .push("max_rel_diff", worst)
        .push("n_final", limit.value)
        .push("n_final_asymptotic", limit.asymptotic)
        .push("unmodulated_variance", thermal);
    let files = vec![
        write_file(&out_dir.join("quantum.csv"), &table)?,
        summary.write(&out_dir.join("quantum.summary.txt"))?,
    ];
    Ok(RunOutput { files, summary })
}
