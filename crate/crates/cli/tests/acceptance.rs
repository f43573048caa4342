//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::Instant;

use phasecool::analysis::{envelope_maxima, fit_initial_cooling_rate, turning_point};
use phasecool::classical::{analytic_state, coefficients_from_initial, optimal_phase, turning_time};
use phasecool::engine::{
    derive_seed, ensemble_run, ic_rng, reference_integrate, simulate, thermal_sampler, Integrator, Noise,
    PhaseSchedule, SimConfig,
};
use phasecool::feedback::{run_adaptive, turning_time_cap, FeedbackController, FeedbackMode, FeedbackSettings, IntervalPolicy};
use phasecool::multimode::{ensemble_multimode, isolated_ensembles};
use phasecool::quantum::{final_occupancy_limit, position_variance_closed, position_variance_quadrature, SpectralConfig};
use phasecool::{sample_thermal_state, Drive, OscillatorParams, QuadratureState, Sample};

use phasecool_cli::presets::{degenerate_frequencies, equidistant_frequencies, multimode_config, run_preset};
use phasecool_cli::runner::default_quantum_grid;

const SEED: u64 = 7;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn unit(gamma: f64, n_th: f64) -> OscillatorParams {
    OscillatorParams::new(1.0, gamma, n_th).unwrap()
}

fn ac1_analytic_vs_oracle() -> Outcome {
    let params = unit(0.0, 0.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for b in [0.01, 0.05] {
        let phi = optimal_phase(1.0, 0.0, b).unwrap();
        let drive = Drive::new(b, phi, 1.0).unwrap();
        let sol = coefficients_from_initial(1.0, 0.0, phi, b).unwrap();
        let tau = turning_time(&sol, &drive).unwrap();
        let horizon = tau.min(50.0);
        let reference = reference_integrate(QuadratureState::new(1.0, 0.0), &drive, &params, horizon);
        let mut analytic = reference.clone();
        for s in &mut analytic.samples {
            *s = Sample::new(s.t, analytic_state(&sol, &params, &drive, s.t), phi);
        }
        let a = envelope_maxima(&analytic, PI, horizon);
        let r = envelope_maxima(&reference, PI, horizon);
        let worst = a
            .iter()
            .zip(&r)
            .map(|(x, y)| ((x.1.sqrt() - y.1.sqrt()) / y.1.sqrt()).abs())
            .fold(0.0, f64::max);
        pass &= worst <= 0.05 && !a.is_empty();
        parts.push(format!("b={b}: max envelope error {worst:.2e} over [0, {horizon:.1}]"));
    }
    outcome(pass, format!("{} (tol 5%)", parts.join(", ")))
}

fn ac2_cooling_rate() -> Outcome {
    let params = unit(0.0, 0.0);
    let ic = QuadratureState::new(1.0, 0.0);
    let mut pass = true;
    let mut parts = Vec::new();
    for (b, tol) in [(0.05, 0.10), (0.1, 0.10), (0.25, 0.25)] {
        let phi = optimal_phase(ic.q, ic.p, b).unwrap();
        let drive = Drive::new(b, phi, 1.0).unwrap();
        let t_end = 2.5 * turning_time_cap(&drive);
        let cfg = SimConfig::new(1e-3, t_end).unwrap().with_stride(10);
        let record = simulate(ic, &PhaseSchedule::constant(phi), &cfg, &params, &drive).unwrap();
        match fit_initial_cooling_rate(&record, PI) {
            Ok(fit) => {
                let rel = (fit.rate - drive.gamma_mod).abs() / drive.gamma_mod;
                pass &= rel <= tol;
                parts.push(format!("b={b}: rate {:.4} vs Γ {:.4} ({:.1}%, tol {:.0}%)", fit.rate, drive.gamma_mod, 100.0 * rel, 100.0 * tol));
            }
            Err(e) => {
                pass = false;
                parts.push(format!("b={b}: {e}"));
            }
        }
    }
    outcome(pass, parts.join(", "))
}

fn ac3_single_shot_depth() -> Outcome {
    let params = unit(0.0, 0.0);
    let n0 = 1e4;
    let mut pass = true;
    let mut parts = Vec::new();
    for b in [0.05, 0.1] {
        let mut sum_n0 = 0.0;
        let mut sum_min = 0.0;
        let mut per_ic = Vec::new();
        for i in 0..20 {
            let ic = sample_thermal_state(n0, &mut ic_rng(derive_seed(SEED, i))).unwrap();
            let phi = optimal_phase(ic.q, ic.p, b).unwrap();
            let drive = Drive::new(b, phi, 1.0).unwrap();
            let cfg = SimConfig::new(1e-3, 2.5 * turning_time_cap(&drive)).unwrap().with_stride(10);
            let record = simulate(ic, &PhaseSchedule::constant(phi), &cfg, &params, &drive).unwrap();
            let (_, n_min) = turning_point(&record);
            let first = record.first().n;
            sum_n0 += first;
            sum_min += n_min;
            per_ic.push(b * first / n_min);
        }
        let depth = sum_n0 / sum_min;
        let lo = per_ic.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = per_ic.iter().copied().fold(0.0, f64::max);
        let in_band = depth >= 0.2 / b && depth <= 5.0 / b;
        pass &= in_band;
        parts.push(format!(
            "b={b}: ensemble depth {:.2}/b (per-IC {:.2}/b … {:.2}/b)",
            depth * b,
            lo,
            hi
        ));
    }
    outcome(pass, format!("{} (band 0.2/b … 5/b)", parts.join(", ")))
}

fn ac4_six_steps() -> Outcome {
    let params = unit(0.0, 0.0);
    let b = 0.1;
    let n0: f64 = 1e4;
    let drive = Drive::new(b, 0.0, 1.0).unwrap();
    let settings = FeedbackSettings {
        policy: IntervalPolicy::PerSegment { fraction: 0.5 },
        max_updates: Some(6),
        mode: FeedbackMode::Adaptive,
    };
    let cfg = SimConfig::new(1e-3, 5000.0).unwrap().with_stride(100);
    let mut pass = true;
    let mut parts = Vec::new();
    let amp = (2.0 * n0).sqrt();
    let mut ics = vec![("q-axis".to_string(), QuadratureState::new(amp, 0.0))];
    for i in 0..3 {
        let ic = sample_thermal_state(n0, &mut ic_rng(derive_seed(SEED, 100 + i))).unwrap();
        let scale = (n0 / ic.norm_sqr() * 2.0).sqrt();
        ics.push((format!("thermal{i}"), ic * scale));
    }
    for (label, ic) in ics {
        let (record, plan) = run_adaptive(ic, settings, &cfg, &params, &drive).unwrap();
        let n_final = record.last().n;
        pass &= n_final < 1.0 && plan.updates() == 6;
        parts.push(format!("{label}: n_final {n_final:.3e} after {} updates at t={:.1}", plan.updates(), record.meta.t_end));
    }
    outcome(pass, format!("{} (need < 1 from n0=1e4)", parts.join(", ")))
}

fn ac5_thermalization() -> Outcome {
    let gamma = 1e-3;
    let params = unit(gamma, 100.0);
    let cfg = SimConfig::new(1e-3, 10.0 / gamma)
        .unwrap()
        .with_integrator(Integrator::RotationSplitting)
        .with_noise(Noise::thermal(&params))
        .with_stride(1000)
        .with_seed(SEED);
    let stats = ensemble_run(
        thermal_sampler(0.0),
        |_| PhaseSchedule::constant(0.0),
        &cfg,
        &params,
        &Drive::off(1.0),
        500,
    )
    .unwrap();
    let q2 = stats.late_mean_q2(0.8 * cfg.t_end);
    let rel = (q2 - 100.0).abs() / 100.0;
    outcome(rel <= 0.10, format!("late ⟨q²⟩ = {q2:.2} vs n_th = 100 ({:.1}%, tol 10%), 500 trajectories from rest", 100.0 * rel))
}

fn ac6_feedback_equilibrium() -> Outcome {
    let gamma = 1e-6;
    let b = 0.05;
    let params = unit(gamma, 1e4);
    let drive = Drive::new(b, 0.0, 1.0).unwrap();
    let cfg = SimConfig::new(1e-3, 20.0 / b).unwrap().with_noise(Noise::thermal(&params)).with_stride(100).with_seed(SEED);
    let settings = FeedbackSettings::fixed(2.0);
    let stats = ensemble_run(
        thermal_sampler(1e4),
        |_| FeedbackController::new(settings, &cfg, &params, &drive).unwrap(),
        &cfg,
        &params,
        &drive,
        100,
    )
    .unwrap();
    let late = stats.late_mean_n(0.8 * cfg.t_end);
    let rel = (late - 0.2).abs() / 0.2;
    outcome(rel <= 0.30, format!("late mean n = {late:.4} vs 0.2 ({:.1}%, tol 30%), 100 trajectories, δτ = 2", 100.0 * rel))
}

fn ac7_quantum_quadrature() -> Outcome {
    let gamma = 1e-6;
    let n_th = 1e4;
    let (ratios, phases) = default_quantum_grid();
    let mut worst: f64 = 0.0;
    let mut failures = 0;
    for &phi in &phases {
        for &r in &ratios {
            let cfg = SpectralConfig::new(gamma, r * gamma, phi, n_th).unwrap();
            match (position_variance_closed(&cfg), position_variance_quadrature(&cfg)) {
                (Ok(c), Ok(q)) => worst = worst.max(((c - q) / q).abs()),
                _ => failures += 1,
            }
        }
    }
    let free = position_variance_closed(&SpectralConfig::new(gamma, 0.0, 0.0, n_th).unwrap()).unwrap();
    let free_err = (free - (n_th + 0.5)).abs() / (n_th + 0.5);
    outcome(
        worst <= 1e-6 && failures == 0 && free_err <= 1e-8,
        format!(
            "{} grid points, max rel diff {worst:.2e} (tol 1e-6), {failures} errors; Γ=0 gives {free} (rel err {free_err:.1e}, tol 1e-8)",
            ratios.len() * phases.len()
        ),
    )
}

fn ac8_quantum_limit() -> Outcome {
    let cfg = SpectralConfig::new(1e-6, 0.05, PI / 2.0, 1e4).unwrap();
    let limit = final_occupancy_limit(&cfg).unwrap();
    let err = (limit.value - 0.20001).abs();
    outcome(err <= 1e-5, format!("n_final = {:.7} vs 0.20001 (|Δ| = {err:.1e}, tol 1e-5)", limit.value))
}

fn ac9_multimode() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (label, freqs) in [("resolved", equidistant_frequencies()), ("degenerate", degenerate_frequencies())] {
        let cfg = multimode_config(SEED, freqs);
        let set = cfg.mode_set().unwrap();
        let fb = cfg.multimode_feedback().unwrap();
        let sim = cfg.sim_config().unwrap();
        let m = cfg.modes.clone().unwrap();
        let n0 = m.n0.unwrap();
        let n0s = vec![n0; set.len()];
        let stats = ensemble_multimode(&set, &n0s, &fb, &sim, m.count).unwrap();
        let t_from = (1.0 - m.late_fraction) * sim.t_end;
        let degenerate: Vec<usize> = (0..set.len())
            .filter(|&j| (0..set.len()).any(|k| k != j && set.modes[k].omega == set.modes[j].omega))
            .collect();
        let resolved: Vec<usize> = (0..set.len()).filter(|j| !degenerate.contains(j)).collect();
        let baselines = isolated_ensembles(&set, &n0s, &fb, &sim, m.count).unwrap();
        let mut ratios = Vec::new();
        for &j in &resolved {
            let r = stats[j].late_mean_n(t_from) / baselines[j].late_mean_n(t_from);
            pass &= (0.5..=2.0).contains(&r);
            ratios.push(format!("{r:.2}"));
        }
        parts.push(format!("{label}: resolved/baseline [{}]", ratios.join(" ")));
        if !degenerate.is_empty() {
            let rel: Vec<String> = degenerate
                .iter()
                .map(|&j| {
                    let r = stats[j].late_mean_n(t_from) / n0;
                    pass &= (0.5..=2.0).contains(&r);
                    format!("{r:.2}")
                })
                .collect();
            parts.push(format!("degenerate members n/n0 [{}]", rel.join(" ")));
        }
    }
    outcome(pass, format!("{} (factor 2)", parts.join("; ")))
}

fn ac10_determinism() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let run = |threads: usize, sub: &str| {
        let dir = root.path().join(sub);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
        let mut files = Vec::new();
        for name in ["fig2_single_shot", "fig3_ensemble"] {
            files.extend(pool.install(|| run_preset(name, SEED, &dir)).unwrap());
        }
        files
            .iter()
            .map(|f| (f.strip_prefix(&dir).unwrap().to_path_buf(), std::fs::read(f).unwrap()))
            .collect::<Vec<_>>()
    };
    let a = run(1, "a");
    let b = run(4, "b");
    let c = run(1, "c");
    let same = a == b && a == c;
    outcome(
        same && !a.is_empty(),
        format!("{} files compared across 1, 4 and 1 threads: {}", a.len(), if same { "byte-identical" } else { "differ" }),
    )
}

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    type Check = fn() -> Outcome;
    let criteria: [(&str, &str, Check); 10] = [
        ("AC1", "analytic vs oracle", ac1_analytic_vs_oracle),
        ("AC2", "cooling rate", ac2_cooling_rate),
        ("AC3", "single-shot depth", ac3_single_shot_depth),
        ("AC4", "six feedback steps", ac4_six_steps),
        ("AC5", "thermalization baseline", ac5_thermalization),
        ("AC6", "feedback equilibrium", ac6_feedback_equilibrium),
        ("AC7", "quantum closed form vs quadrature", ac7_quantum_quadrature),
        ("AC8", "quantum limit value", ac8_quantum_limit),
        ("AC9", "multimode", ac9_multimode),
        ("AC10", "determinism", ac10_determinism),
    ];
    let mut failed = 0;
    for (id, name, check) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| f.eq_ignore_ascii_case(id)) {
            continue;
        }
        let start = Instant::now();
        let result = check();
        let verdict = if result.pass { "PASS" } else { "FAIL" };
        println!("{id} {verdict} {name}: {} [{:.1}s]", result.detail, start.elapsed().as_secs_f64());
        if !result.pass {
            failed += 1;
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} acceptance criteria failed");
        ExitCode::FAILURE
    }
}
