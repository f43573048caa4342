//! Envelope fits and summary statistics over recorded trajectories.

use crate::model::TrajectoryRecord;
use crate::{Error, Result};

/// Result of a log-linear fit `ln n ≈ intercept − rate·t`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateFit {
    /// Energy (occupancy) decay rate.
    pub rate: f64,
    pub intercept: f64,
    pub points: usize,
    /// End of the window the fit used.
    pub t_end: f64,
}

/// Sample with the smallest occupancy, as `(t, n)`.
pub fn turning_point(record: &TrajectoryRecord) -> (f64, f64) {
    record
        .samples
        .iter()
        .map(|s| (s.t, s.n))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("trajectory has at least one sample")
}

/// Largest occupancy in each full window `[kP, (k+1)P)` ending at or before `t_end`.
pub fn envelope_maxima(record: &TrajectoryRecord, period: f64, t_end: f64) -> Vec<(f64, f64)> {
    let mut out: Vec<(f64, f64)> = Vec::new();
    let windows = (t_end / period + 1e-9).floor() as usize;
    let mut current: Option<(usize, f64, f64)> = None;
    for s in &record.samples {
        let k = (s.t / period).floor() as usize;
        if k >= windows {
            break;
        }
        match current {
            Some((ck, _, n)) if ck == k => {
                if s.n > n {
                    current = Some((k, s.t, s.n));
                }
            }
            _ => {
                if let Some((_, t, n)) = current {
                    out.push((t, n));
                }
                current = Some((k, s.t, s.n));
            }
        }
    }
    if let Some((_, t, n)) = current {
        out.push((t, n));
    }
    out
}

/// Least-squares fit of `ln n` against `t` over the per-period maxima in `[0, t_end]`.
pub fn fit_cooling_rate(record: &TrajectoryRecord, period: f64, t_end: f64) -> Result<RateFit> {
    let points = envelope_maxima(record, period, t_end);
    if points.len() < 2 {
        return Err(Error::Fit(format!(
            "{} envelope maxima in [0, {t_end}], need at least 2",
            points.len()
        )));
    }
    if points.iter().any(|p| !(p.1 > 0.0)) {
        return Err(Error::Fit("non-positive occupancy in fit window".into()));
    }
    let k = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / k;
    let my = points.iter().map(|p| p.1.ln()).sum::<f64>() / k;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1.ln() - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        rate: -slope,
        intercept: my - slope * mt,
        points: points.len(),
        t_end,
    })
}

/// [`fit_cooling_rate`] over `[0, t_min/2]`, where `t_min` is the time of
/// the occupancy minimum.
pub fn fit_initial_cooling_rate(record: &TrajectoryRecord, period: f64) -> Result<RateFit> {
    let (t_min, _) = turning_point(record);
    fit_cooling_rate(record, period, 0.5 * t_min)
}

/// Mean of `values` over the final `fraction` of the time span.
pub fn late_time_mean(times: &[f64], values: &[f64], fraction: f64) -> f64 {
    assert_eq!(times.len(), values.len());
    let (Some(first), Some(last)) = (times.first(), times.last()) else {
        return f64::NAN;
    };
    let t_from = last - fraction * (last - first);
    let (sum, k) = times
        .iter()
        .zip(values)
        .filter(|(t, _)| **t >= t_from)
        .fold((0.0, 0usize), |(s, k), (_, v)| (s + v, k + 1));
    sum / k as f64
}

/// Late-time mean occupancy of one trajectory.
pub fn late_time_mean_n(record: &TrajectoryRecord, fraction: f64) -> f64 {
    let t: Vec<f64> = record.times().collect();
    let n: Vec<f64> = record.occupancies().collect();
    late_time_mean(&t, &n, fraction)
}
