//! Several resonances cooled by one parametric actuator.
//!
//! Every mode sees the full modulation `Σ_k 2Γ_k cos(2Ω_k t + φ_k)` on its
//! own position ([`ForceModel::Shared`]); [`ForceModel::Private`] keeps only
//! the mode's own band term, for comparison. Modes closer in frequency than
//! the detection resolution form one band. A resolved band gets one drive
//! term phased from its mode's quadratures. A degenerate band cannot be
//! resolved by the detector; by default it is left undriven
//! ([`DegeneratePolicy::Unmodulated`]).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::late_time_mean_n;
use crate::classical::optimal_phase;
use crate::engine::{derive_seed, for_each_ordered, ic_rng, BinAccumulator, Noise, SimConfig, Stepper};
use crate::feedback::{global_phase, MIN_INTERVAL_STEPS};
use crate::model::{
    sample_thermal_state, Drive, EnsembleStats, OscillatorParams, QuadratureState, RunMeta, Sample, TrajectoryRecord,
};
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ModeSet {
    pub modes: Vec<OscillatorParams>,
    /// Modulation depth `b_j`, so `Γ_j = b_j Ω_j`.
    pub depths: Vec<f64>,
}

impl ModeSet {
    pub fn new(modes: Vec<OscillatorParams>, depths: Vec<f64>) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::invalid("n_res", 0.0, "at least one mode required"));
        }
        if modes.len() != depths.len() {
            return Err(Error::invalid(
                "depths",
                depths.len() as f64,
                "one modulation depth per mode required",
            ));
        }
        for (m, &b) in modes.iter().zip(&depths) {
            Drive::new(b, 0.0, m.omega)?;
        }
        Ok(Self { modes, depths })
    }

    /// Modes at `frequencies` sharing γ, n_th and b.
    pub fn uniform(frequencies: &[f64], gamma: f64, n_th: f64, b: f64) -> Result<Self> {
        let modes = frequencies
            .iter()
            .map(|&w| OscillatorParams::new(w, gamma, n_th))
            .collect::<Result<Vec<_>>>()?;
        Self::new(modes, vec![b; frequencies.len()])
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn gamma_mod(&self, j: usize) -> f64 {
        self.depths[j] * self.modes[j].omega
    }

    pub fn max_gamma_mod(&self) -> f64 {
        (0..self.len()).map(|j| self.gamma_mod(j).abs()).fold(0.0, f64::max)
    }

    /// The set reduced to mode `j`.
    pub fn single(&self, j: usize) -> Self {
        Self {
            modes: vec![self.modes[j]],
            depths: vec![self.depths[j]],
        }
    }

    /// Relabels modes so that new mode `i` is old mode `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            modes: order.iter().map(|&i| self.modes[i]).collect(),
            depths: order.iter().map(|&i| self.depths[i]).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Band {
    /// Mode indices, ascending.
    pub members: Vec<usize>,
}

impl Band {
    pub fn is_degenerate(&self) -> bool {
        self.members.len() > 1
    }
}

/// Groups modes whose frequencies lie within `resolution` of a neighbour.
/// Bands are ordered by frequency.
pub fn band_partition(modes: &ModeSet, resolution: f64) -> Result<Vec<Band>> {
    if !(resolution > 0.0 && resolution.is_finite()) {
        return Err(Error::invalid("resolution", resolution, "resolution must be > 0"));
    }
    let mut order: Vec<usize> = (0..modes.len()).collect();
    order.sort_by(|&a, &b| modes.modes[a].omega.total_cmp(&modes.modes[b].omega).then(a.cmp(&b)));
    let mut bands: Vec<Band> = Vec::new();
    let mut last_freq = f64::NEG_INFINITY;
    for j in order {
        let w = modes.modes[j].omega;
        match bands.last_mut() {
            Some(band) if w - last_freq < resolution => band.members.push(j),
            _ => bands.push(Band { members: vec![j] }),
        }
        last_freq = w;
    }
    for band in &mut bands {
        band.members.sort_unstable();
    }
    Ok(bands)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ForceModel {
    #[default]
    Shared,
    Private,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DegeneratePolicy {
    /// No drive term for a degenerate band.
    #[default]
    Unmodulated,
    /// One drive term phased from the summed quadratures of the members.
    /// Unstable: the difference mode is invisible to the detector and grows.
    SummedQuadratures,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MultimodeFeedback {
    /// Fixed interval between phase updates.
    pub delta_tau: f64,
    pub force: ForceModel,
    pub degenerate: DegeneratePolicy,
    /// Band resolution; `None` uses the largest Γ_j.
    pub resolution: Option<f64>,
}

impl MultimodeFeedback {
    pub fn new(delta_tau: f64) -> Self {
        Self {
            delta_tau,
            force: ForceModel::Shared,
            degenerate: DegeneratePolicy::Unmodulated,
            resolution: None,
        }
    }
}

/// One drive term of the shared modulation.
#[derive(Debug, Clone, Copy)]
struct Term {
    omega: f64,
    b: f64,
    two_gamma_mod: f64,
    phase: f64,
}

struct Plan {
    bands: Vec<Band>,
    terms: Vec<Option<Term>>,
    band_of: Vec<usize>,
}

fn build_plan(modes: &ModeSet, fb: &MultimodeFeedback) -> Result<Plan> {
    let resolution = match fb.resolution {
        Some(r) => r,
        None if modes.max_gamma_mod() > 0.0 => modes.max_gamma_mod(),
        None => f64::MIN_POSITIVE,
    };
    let bands = band_partition(modes, resolution)?;
    let mut band_of = vec![0; modes.len()];
    let mut terms = Vec::with_capacity(bands.len());
    for (k, band) in bands.iter().enumerate() {
        for &j in &band.members {
            band_of[j] = k;
        }
        let term = if !band.is_degenerate() {
            let j = band.members[0];
            let omega = modes.modes[j].omega;
            let b = modes.depths[j];
            Some(Term {
                omega,
                b,
                two_gamma_mod: 2.0 * (b * omega),
                phase: 0.0,
            })
        } else {
            match fb.degenerate {
                DegeneratePolicy::Unmodulated => None,
                DegeneratePolicy::SummedQuadratures => {
                    let m = band.members.len() as f64;
                    let omega = band.members.iter().map(|&j| modes.modes[j].omega).sum::<f64>() / m;
                    let b = band.members.iter().map(|&j| modes.depths[j]).sum::<f64>() / m;
                    Some(Term {
                        omega,
                        b,
                        two_gamma_mod: 2.0 * (b * omega),
                        phase: 0.0,
                    })
                }
            }
        };
        terms.push(term.filter(|t| t.two_gamma_mod != 0.0));
    }
    Ok(Plan { bands, terms, band_of })
}

fn update_phases(plan: &mut Plan, states: &[QuadratureState], t: f64) {
    for (band, term) in plan.bands.iter().zip(plan.terms.iter_mut()) {
        let Some(term) = term else { continue };
        let (q, p) = band
            .members
            .iter()
            .fold((0.0, 0.0), |(q, p), &j| (q + states[j].q, p + states[j].p));
        if let Ok(local) = optimal_phase(q, p, term.b) {
            term.phase = global_phase(local, term.omega, t);
        }
    }
}

/// Runs all modes together under fixed-interval band feedback. Mode `j`
/// draws its noise from stream `j` of `cfg.seed`; with thermal noise each
/// mode uses its own `n_th`.
pub fn simulate_multimode(
    ics: &[QuadratureState],
    modes: &ModeSet,
    fb: &MultimodeFeedback,
    cfg: &SimConfig,
) -> Result<Vec<TrajectoryRecord>> {
    cfg.validate()?;
    if ics.len() != modes.len() {
        return Err(Error::invalid("ics", ics.len() as f64, "one initial state per mode required"));
    }
    if !(fb.delta_tau >= MIN_INTERVAL_STEPS * cfg.dt) {
        return Err(Error::invalid("delta_tau", fb.delta_tau, "delta_tau >= 10·dt required"));
    }
    let mut plan = build_plan(modes, fb)?;
    let steppers: Vec<Stepper> = modes
        .modes
        .iter()
        .map(|m| {
            let noise = match cfg.noise {
                Noise::Off => Noise::Off,
                Noise::Classical { .. } => Noise::thermal(m),
            };
            Stepper::new(&cfg.with_noise(noise), m, &Drive::off(m.omega))
        })
        .collect();
    let mut rngs: Vec<ChaCha8Rng> = (0..modes.len())
        .map(|j| {
            let mut r = ChaCha8Rng::seed_from_u64(cfg.seed);
            r.set_stream(j as u64);
            r
        })
        .collect();
    let interval = ((fb.delta_tau / cfg.dt).round() as u64).max(1);
    let steps = cfg.steps();
    let stride = cfg.sample_stride as u64;
    let capacity = (steps / stride + 1).min(1 << 20) as usize;

    let mut states = ics.to_vec();
    update_phases(&mut plan, &states, 0.0);
    let phase_of = |plan: &Plan, j: usize| plan.terms[plan.band_of[j]].map_or(0.0, |t| t.phase);
    let initial_phases: Vec<f64> = (0..modes.len()).map(|j| phase_of(&plan, j)).collect();
    let mut samples: Vec<Vec<Sample>> = (0..modes.len())
        .map(|j| {
            let mut v = Vec::with_capacity(capacity);
            v.push(Sample::new(0.0, states[j], initial_phases[j]));
            v
        })
        .collect();

    let mut forces = vec![0.0; plan.terms.len()];
    for n in 1..=steps {
        let tf = steppers[0].force_time(n);
        for (f, term) in forces.iter_mut().zip(&plan.terms) {
            *f = term.map_or(0.0, |t| t.two_gamma_mod * (2.0 * t.omega * tf + t.phase).cos());
        }
        let shared = forces.iter().fold(0.0, |acc, f| acc + f);
        for j in 0..states.len() {
            let f = match fb.force {
                ForceModel::Shared => shared,
                ForceModel::Private => forces[plan.band_of[j]],
            };
            states[j] = steppers[j].advance_with_force(states[j], f, &mut rngs[j]);
        }
        let t = cfg.time(n);
        if n % interval == 0 {
            update_phases(&mut plan, &states, t);
        }
        if n % stride == 0 {
            for j in 0..states.len() {
                samples[j].push(Sample::new(t, states[j], phase_of(&plan, j)));
            }
        }
    }

    Ok(samples
        .into_iter()
        .enumerate()
        .map(|(j, samples)| {
            let m = modes.modes[j];
            let driven = plan.terms[plan.band_of[j]].is_some();
            let b = if driven { modes.depths[j] } else { 0.0 };
            TrajectoryRecord {
                samples,
                dt: cfg.dt,
                seed: cfg.seed,
                meta: RunMeta {
                    params: m,
                    drive: Drive {
                        b,
                        phi: initial_phases[j],
                        gamma_mod: b * m.omega,
                    },
                    scheme: cfg.integrator.name(),
                    noise: steppers[j].has_noise(),
                    t_end: cfg.time(steps),
                    sample_stride: cfg.sample_stride,
                },
            }
        })
        .collect())
}

/// Late-time mean occupancy (final `late_fraction` of the run) of mode `j`
/// cooled on its own.
pub fn isolated_baseline(
    j: usize,
    ic: QuadratureState,
    modes: &ModeSet,
    fb: &MultimodeFeedback,
    cfg: &SimConfig,
    late_fraction: f64,
) -> Result<f64> {
    let records = simulate_multimode(&[ic], &modes.single(j), fb, cfg)?;
    Ok(late_time_mean_n(&records[0], late_fraction))
}

/// Per-mode ensemble statistics over `count` seeded runs. Trajectory `i`
/// draws mode initial states in mode order from [`ic_rng`] of
/// `derive_seed(cfg.seed, i)`, each with variance `n0[j]`.
pub fn ensemble_multimode(
    modes: &ModeSet,
    n0: &[f64],
    fb: &MultimodeFeedback,
    cfg: &SimConfig,
    count: usize,
) -> Result<Vec<EnsembleStats>> {
    if count == 0 {
        return Err(Error::invalid("count", 0.0, "count >= 1 required"));
    }
    if n0.len() != modes.len() {
        return Err(Error::invalid("n0", n0.len() as f64, "one initial occupancy per mode required"));
    }
    let job = |i: usize| {
        let seed = derive_seed(cfg.seed, i as u64);
        let mut rng = ic_rng(seed);
        let ics = n0
            .iter()
            .map(|&n| sample_thermal_state(n, &mut rng))
            .collect::<Result<Vec<_>>>()?;
        simulate_multimode(&ics, modes, fb, &cfg.with_seed(seed))
    };
    let mut accs: Vec<BinAccumulator> = vec![BinAccumulator::default(); modes.len()];
    for_each_ordered(count, job, |_, records| {
        for (acc, r) in accs.iter_mut().zip(&records) {
            let t: Vec<f64> = r.times().collect();
            let n: Vec<f64> = r.occupancies().collect();
            let q2: Vec<f64> = r.samples.iter().map(|s| s.q * s.q).collect();
            let p2: Vec<f64> = r.samples.iter().map(|s| s.p * s.p).collect();
            acc.push(&t, &n, &q2, &p2)?;
        }
        Ok(())
    })?;
    Ok(accs.into_iter().map(|a| a.finish(cfg.seed)).collect())
}

/// Ensemble statistics of every mode cooled on its own.
pub fn isolated_ensembles(
    modes: &ModeSet,
    n0: &[f64],
    fb: &MultimodeFeedback,
    cfg: &SimConfig,
    count: usize,
) -> Result<Vec<EnsembleStats>> {
    (0..modes.len())
        .map(|j| Ok(ensemble_multimode(&modes.single(j), &n0[j..=j], fb, cfg, count)?.remove(0)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::feedback::{run_adaptive, FeedbackSettings};

    fn equidistant(n: usize, spacing: f64) -> Vec<f64> {
        (0..n).map(|j| 1.0 + spacing * j as f64).collect()
    }

    #[test]
    fn partition_examples() {
        let set = ModeSet::uniform(&equidistant(8, 0.3), 1e-6, 1e5, 0.05).unwrap();
        let bands = band_partition(&set, set.max_gamma_mod()).unwrap();
        assert_eq!(bands.len(), 8);
        assert!(bands.iter().all(|b| !b.is_degenerate()));

        let set = ModeSet::uniform(&[1.0, 1.5, 1.0], 1e-6, 1e5, 0.05).unwrap();
        let bands = band_partition(&set, 0.05).unwrap();
        assert_eq!(bands, vec![Band { members: vec![0, 2] }, Band { members: vec![1] }]);

        let set = ModeSet::uniform(&[1.0], 1e-6, 1e5, 0.05).unwrap();
        assert_eq!(band_partition(&set, 0.05).unwrap().len(), 1);
        assert!(band_partition(&set, 0.0).is_err());
    }

    #[test]
    fn single_mode_reduces_to_adaptive_run() {
        let params = OscillatorParams::new(1.0, 1e-4, 50.0).unwrap();
        let set = ModeSet::new(vec![params], vec![0.05]).unwrap();
        let cfg = SimConfig::new(1e-3, 60.0).unwrap().with_noise(Noise::thermal(&params)).with_stride(10).with_seed(3);
        let ic = QuadratureState::new(7.0, -3.0);
        let fb = MultimodeFeedback::new(2.5);
        let multi = simulate_multimode(&[ic], &set, &fb, &cfg).unwrap();
        let drive = Drive::new(0.05, 0.0, 1.0).unwrap();
        let (single, _) = run_adaptive(ic, FeedbackSettings::fixed(2.5), &cfg, &params, &drive).unwrap();
        assert_eq!(multi[0].samples, single.samples);
    }

    #[test]
    fn permutation_equivariance() {
        let set = ModeSet::uniform(&[1.0, 1.4, 1.9], 1e-4, 0.0, 0.05).unwrap();
        let ics = [QuadratureState::new(10.0, 0.0), QuadratureState::new(-3.0, 4.0), QuadratureState::new(0.5, 8.0)];
        let cfg = SimConfig::new(1e-3, 30.0).unwrap().with_stride(100);
        let fb = MultimodeFeedback::new(2.0);
        let a = simulate_multimode(&ics, &set, &fb, &cfg).unwrap();
        let order = [2, 0, 1];
        let pics: Vec<_> = order.iter().map(|&i| ics[i]).collect();
        let b = simulate_multimode(&pics, &set.permuted(&order), &fb, &cfg).unwrap();
        for (new, &old) in order.iter().enumerate() {
            for (x, y) in a[old].samples.iter().zip(&b[new].samples) {
                assert!((x.n - y.n).abs() <= 1e-9 * x.n.max(1.0), "mode {old}");
            }
        }
    }

    #[test]
    fn private_model_ignores_other_terms() {
        // With private forces, mode 0 of a pair evolves exactly as if alone.
        let set = ModeSet::uniform(&[1.0, 1.3], 0.0, 0.0, 0.05).unwrap();
        let ics = [QuadratureState::new(10.0, 0.0), QuadratureState::new(0.0, 10.0)];
        let cfg = SimConfig::new(1e-3, 40.0).unwrap().with_stride(100);
        let fb = MultimodeFeedback { force: ForceModel::Private, ..MultimodeFeedback::new(2.0) };
        let pair = simulate_multimode(&ics, &set, &fb, &cfg).unwrap();
        let alone = simulate_multimode(&ics[..1], &set.single(0), &fb, &cfg).unwrap();
        assert_eq!(pair[0].samples, alone[0].samples);
    }

    #[test]
    fn unmodulated_degenerate_band_is_undriven() {
        let set = ModeSet::uniform(&[1.0, 1.0, 1.5], 0.0, 0.0, 0.05).unwrap();
        let ics = [QuadratureState::new(10.0, 0.0), QuadratureState::new(0.0, 10.0), QuadratureState::new(5.0, 5.0)];
        let cfg = SimConfig::new(1e-3, 20.0).unwrap().with_stride(1000);
        let fb = MultimodeFeedback { force: ForceModel::Private, ..MultimodeFeedback::new(2.0) };
        let r = simulate_multimode(&ics, &set, &fb, &cfg).unwrap();
        for rec in &r[..2] {
            assert!(rec.samples.iter().all(|s| (s.n - 50.0).abs() < 1e-9));
            assert_eq!(rec.meta.drive.b, 0.0);
        }
        assert!(r[2].last().n < 25.0);
    }

    #[test]
    fn summed_quadratures_heat_the_difference_mode() {
        let set = ModeSet::uniform(&[1.0, 1.0], 0.0, 0.0, 0.05).unwrap();
        let ics = [QuadratureState::new(10.0, 0.0), QuadratureState::new(0.0, 10.0)];
        let cfg = SimConfig::new(1e-3, 100.0).unwrap().with_stride(1000);
        let fb = MultimodeFeedback { degenerate: DegeneratePolicy::SummedQuadratures, ..MultimodeFeedback::new(2.0) };
        let r = simulate_multimode(&ics, &set, &fb, &cfg).unwrap();
        let (a, b) = (r[0].last(), r[1].last());
        let sum = (a.q + b.q).powi(2) + (a.p + b.p).powi(2);
        let diff = (a.q - b.q).powi(2) + (a.p - b.p).powi(2);
        assert!(sum < 2.0 * 100.0 * 0.1, "{sum}");
        assert!(diff > 2.0 * 100.0 * 10.0, "{diff}");
    }

    #[test]
    fn modes_draw_independent_noise() {
        let set = ModeSet::uniform(&[1.0, 1.0], 1e-2, 10.0, 0.0).unwrap();
        let cfg = SimConfig::new(1e-3, 2.0)
            .unwrap()
            .with_noise(Noise::Classical { n_th: 10.0 })
            .with_stride(100);
        let r = simulate_multimode(&[QuadratureState::ZERO; 2], &set, &MultimodeFeedback::new(1.0), &cfg).unwrap();
        assert!(r[0].samples.iter().zip(&r[1].samples).skip(1).all(|(x, y)| x.q != y.q));
    }

    #[test]
    fn validation() {
        let set = ModeSet::uniform(&[1.0, 1.3], 1e-6, 1.0, 0.05).unwrap();
        let cfg = SimConfig::new(1e-3, 1.0).unwrap();
        let fb = MultimodeFeedback::new(1.0);
        assert!(simulate_multimode(&[QuadratureState::ZERO], &set, &fb, &cfg).is_err());
        let short = MultimodeFeedback::new(1e-3);
        assert!(simulate_multimode(&[QuadratureState::ZERO; 2], &set, &short, &cfg).is_err());
        assert!(ModeSet::new(vec![], vec![]).is_err());
        assert!(ModeSet::uniform(&[1.0], 1e-6, 1.0, 1.2).is_err());
    }
}
