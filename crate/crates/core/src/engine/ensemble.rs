use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{simulate_with, PhaseController, SimConfig};
use crate::model::{sample_thermal_state, Drive, EnsembleStats, OscillatorParams, QuadratureState};
use crate::{Error, Result};

/// Trajectories handed to the thread pool at a time. Results are folded in
/// index order, so the value has no effect on the output.
const CHUNK: usize = 64;

/// Seed of trajectory `index` under `master` (splitmix64 finaliser).
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE5_E9B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream used for the Brownian increments of a trajectory.
pub fn noise_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

/// Stream used to draw a trajectory's initial condition.
pub fn ic_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    rng
}

pub fn thermal_sampler(n0: f64) -> impl Fn(&mut ChaCha8Rng) -> Result<QuadratureState> + Sync {
    move |rng| sample_thermal_state(n0, rng)
}

/// Runs `job(i)` for `i in 0..count` on the current rayon pool and hands the
/// results to `sink` strictly in index order.
pub(crate) fn for_each_ordered<T, J, S>(count: usize, job: J, mut sink: S) -> Result<()>
where
    T: Send,
    J: Fn(usize) -> Result<T> + Sync,
    S: FnMut(usize, T) -> Result<()>,
{
    let mut start = 0;
    while start < count {
        let end = (start + CHUNK).min(count);
        let results: Vec<Result<T>> = (start..end).into_par_iter().map(&job).collect();
        for (i, r) in (start..end).zip(results) {
            sink(i, r?)?;
        }
        start = end;
    }
    Ok(())
}

/// Per-bin running moments, updated in a fixed order.
#[derive(Debug, Clone, Default)]
pub(crate) struct BinAccumulator {
    pub(crate) times: Vec<f64>,
    count: usize,
    mean_n: Vec<f64>,
    m2_n: Vec<f64>,
    sum_q2: Vec<f64>,
    sum_p2: Vec<f64>,
}

impl BinAccumulator {
    pub(crate) fn push(&mut self, times: &[f64], n: &[f64], q2: &[f64], p2: &[f64]) -> Result<()> {
        if self.count == 0 {
            self.times = times.to_vec();
            let z = vec![0.0; times.len()];
            self.mean_n = z.clone();
            self.m2_n = z.clone();
            self.sum_q2 = z.clone();
            self.sum_p2 = z;
        } else if self.times.len() != times.len() {
            return Err(Error::invalid(
                "time_bins",
                times.len() as f64,
                "all ensemble members must share the sampling grid",
            ));
        }
        self.count += 1;
        let k = self.count as f64;
        for i in 0..times.len() {
            let delta = n[i] - self.mean_n[i];
            self.mean_n[i] += delta / k;
            self.m2_n[i] += delta * (n[i] - self.mean_n[i]);
            self.sum_q2[i] += q2[i];
            self.sum_p2[i] += p2[i];
        }
        Ok(())
    }

    pub(crate) fn finish(self, master_seed: u64) -> EnsembleStats {
        let k = self.count as f64;
        let var_n = if self.count > 1 {
            self.m2_n.iter().map(|m| (m / (k - 1.0)).max(0.0)).collect()
        } else {
            vec![0.0; self.times.len()]
        };
        EnsembleStats {
            time_bins: self.times,
            mean_n: self.mean_n,
            var_n,
            mean_q2: self.sum_q2.iter().map(|s| s / k).collect(),
            mean_p2: self.sum_p2.iter().map(|s| s / k).collect(),
            count: self.count,
            master_seed,
        }
    }
}

/// Runs `count` trajectories and aggregates occupancy per sample time.
///
/// Trajectory `i` uses seed `derive_seed(cfg.seed, i)`: its initial condition
/// is drawn from [`ic_rng`] and its noise from [`noise_rng`] of that seed, and
/// `controllers(i)` supplies its phase. The result does not depend on the size
/// of the rayon pool it runs on.
pub fn ensemble_run<S, F, C>(
    ic_sampler: S,
    controllers: F,
    cfg: &SimConfig,
    params: &OscillatorParams,
    drive: &Drive,
    count: usize,
) -> Result<EnsembleStats>
where
    S: Fn(&mut ChaCha8Rng) -> Result<QuadratureState> + Sync,
    F: Fn(usize) -> C + Sync,
    C: PhaseController,
{
    if count == 0 {
        return Err(Error::invalid("count", 0.0, "count >= 1 required"));
    }
    cfg.validate()?;
    let job = |i: usize| {
        let seed = derive_seed(cfg.seed, i as u64);
        let ic = ic_sampler(&mut ic_rng(seed))?;
        let mut controller = controllers(i);
        let record = simulate_with(ic, &mut controller, &cfg.with_seed(seed), params, drive)?;
        let times: Vec<f64> = record.times().collect();
        let n: Vec<f64> = record.occupancies().collect();
        let q2: Vec<f64> = record.samples.iter().map(|s| s.q * s.q).collect();
        let p2: Vec<f64> = record.samples.iter().map(|s| s.p * s.p).collect();
        Ok((times, n, q2, p2))
    };
    let mut acc = BinAccumulator::default();
    for_each_ordered(count, job, |_, (t, n, q2, p2)| acc.push(&t, &n, &q2, &p2))?;
    Ok(acc.finish(cfg.seed))
}
