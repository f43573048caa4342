//! Named experiments with fixed parameters. Every preset writes into its own
//! directory and finishes with `preset.summary.txt`.

use std::path::{Path, PathBuf};

use phasecool::engine::derive_seed;
use phasecool::feedback::turning_time_cap;
use phasecool::Drive;

use crate::config::{
    DegenerateName, DriveSection, EnsembleSection, ExperimentConfig, FeedbackSection, ForceName, InitialSection,
    IntegratorName, ModeName, ModesSection, OscillatorSection, PolicyName, SimSection,
};
use crate::error::CliError;
use crate::output::Summary;
use crate::runner::{run_ensemble, run_multimode, run_quantum, run_simulate, RunOutput, SUMMARY_FORMAT};

pub const PRESETS: [&str; 6] = [
    "fig2_single_shot",
    "fig2_sweep_b",
    "fig3_feedback",
    "fig3_ensemble",
    "fig4_multimode",
    "quantum_limit",
];

/// Occupancy of the thermal initial states in the single-mode presets.
pub const N0: f64 = 1e4;

pub fn base_config(seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        seed,
        out_dir: None,
        oscillator: OscillatorSection {
            omega: 1.0,
            gamma: 1e-6,
            n_th: 1e4,
        },
        drive: DriveSection { b: 0.05, phi: None },
        sim: SimSection {
            dt: 1e-3,
            t_end: 400.0,
            integrator: IntegratorName::RotationSplitting,
            noise: false,
            sample_stride: 100,
        },
        initial: InitialSection {
            n0: Some(N0),
            ..InitialSection::default()
        },
        feedback: None,
        ensemble: None,
        modes: None,
        quantum: None,
    }
}

/// Frequency spacing of the multimode comb.
pub const COMB_SPACING: f64 = 0.3;

/// Update interval of the multimode runs, `π / spacing`. The sidebands that a
/// band's phase jumps put on its modulation then vanish at the neighbouring
/// comb lines, which keeps unmodulated degenerate modes from being heated.
pub const COMB_DELTA_TAU: f64 = std::f64::consts::PI / COMB_SPACING;

/// 8 modes at `1 + 0.3 j`, sharing γ = 1e-6, n_th = n0 = 1e5 and b = 0.05.
pub fn multimode_config(seed: u64, frequencies: Vec<f64>) -> ExperimentConfig {
    let mut cfg = base_config(seed);
    cfg.oscillator.n_th = 1e5;
    cfg.sim.t_end = 500.0;
    cfg.sim.noise = true;
    cfg.initial = InitialSection::default();
    cfg.modes = Some(ModesSection {
        frequencies,
        delta_tau: COMB_DELTA_TAU,
        force: ForceName::Shared,
        degenerate: DegenerateName::Unmodulated,
        resolution: None,
        n0: Some(1e5),
        count: 32,
        late_fraction: 0.2,
        baselines: true,
    });
    cfg
}

pub fn equidistant_frequencies() -> Vec<f64> {
    (0..8).map(|j| 1.0 + COMB_SPACING * j as f64).collect()
}

/// Seven comb lines with the fourth one doubled: modes 3 and 4 are degenerate.
pub fn degenerate_frequencies() -> Vec<f64> {
    let comb = equidistant_frequencies();
    let mut f = comb[..4].to_vec();
    f.extend_from_slice(&comb[3..7]);
    f
}

pub fn run_preset(name: &str, seed: u64, out_dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let dir = out_dir.join(name);
    let mut summary = Summary::new();
    summary.push("format", SUMMARY_FORMAT).push("preset", name).push("seed", seed);
    let mut files = Vec::new();
    let mut collect = |tag: &str, out: RunOutput, summary: &mut Summary| {
        for (k, v) in out.summary.pairs() {
            if !k.starts_with("config.") && k != "format" {
                summary.push(format!("{tag}.{k}"), v);
            }
        }
        files.extend(out.files);
    };

    match name {
        "fig2_single_shot" => {
            for i in 0..3 {
                let cfg = base_config(derive_seed(seed, i) >> 1);
                collect(&format!("run{i}"), run_simulate(&cfg, &dir.join(format!("run{i}")))?, &mut summary);
            }
        }
        "fig2_sweep_b" => {
            let mut cfg = base_config(seed);
            for b in [0.05, 0.1, 0.15, 0.25] {
                cfg.drive.b = b;
                let out = run_simulate(&cfg, &dir.join(format!("b{b}")))?;
                collect(&format!("b{b}"), out, &mut summary);
            }
        }
        "fig3_feedback" => {
            let mut fast = base_config(seed);
            fast.sim.t_end = 1000.0;
            fast.sim.noise = true;
            fast.feedback = Some(FeedbackSection {
                mode: ModeName::Adaptive,
                policy: PolicyName::InitialTurning,
                delta_tau: None,
                fraction: 0.5,
                max_updates: None,
            });
            collect("fast", run_simulate(&fast, &dir.join("fast"))?, &mut summary);

            let mut slow = fast.clone();
            let drive = Drive::new(slow.drive.b, 0.0, 1.0)?;
            slow.feedback = Some(FeedbackSection {
                mode: ModeName::Delayed,
                policy: PolicyName::Fixed,
                delta_tau: Some(1.1 * turning_time_cap(&drive)),
                fraction: 0.5,
                max_updates: None,
            });
            collect("delayed", run_simulate(&slow, &dir.join("delayed"))?, &mut summary);
        }
        "fig3_ensemble" => {
            let mut cfg = base_config(seed);
            cfg.sim.noise = true;
            cfg.sim.t_end = 20.0 / cfg.drive.b;
            cfg.initial = InitialSection::default();
            cfg.feedback = Some(FeedbackSection {
                mode: ModeName::Adaptive,
                policy: PolicyName::Fixed,
                delta_tau: Some(2.0),
                fraction: 0.5,
                max_updates: None,
            });
            cfg.ensemble = Some(EnsembleSection {
                count: 100,
                n0: Some(N0),
                late_fraction: 0.2,
            });
            collect("ensemble", run_ensemble(&cfg, &dir)?, &mut summary);
        }
        "fig4_multimode" => {
            let resolved = multimode_config(seed, equidistant_frequencies());
            collect("resolved", run_multimode(&resolved, &dir.join("resolved"))?, &mut summary);
            let degenerate = multimode_config(seed, degenerate_frequencies());
            collect("degenerate", run_multimode(&degenerate, &dir.join("degenerate"))?, &mut summary);
        }
        "quantum_limit" => {
            let cfg = base_config(seed);
            collect("quantum", run_quantum(&cfg, &dir)?, &mut summary);
        }
        other => {
            return Err(CliError::Validation(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )));
        }
    }
    files.push(summary.write(&dir.join("preset.summary.txt"))?);
    Ok(files)
}

