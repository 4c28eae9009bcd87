//! Threshold trajectories on a shared score stream, for initialisation
//! sensitivity and convergence studies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::oracle::{LabelSource, ScoreDistributions};
use crate::rng::rng_from_seed;
use crate::threshold::{Label, ThresholdParams, ThresholdState, TraceRow};

pub const INITIAL_EPSILONS: [f64; 5] = [0.001, 0.05, 0.1, 0.5, 0.8];

/// A labelled score stream: `(score, truly_contaminated)` pairs, each step
/// contaminated with probability `contam_rate`.
pub fn score_stream(dists: &ScoreDistributions, contam_rate: f64, len: usize, seed: u64) -> Result<Vec<(f64, bool)>> {
    dists.validate()?;
    if !(0.0..=1.0).contains(&contam_rate) {
        return config_err("contamination rate outside [0, 1]");
    }
    let mut rng = rng_from_seed(seed);
    Ok((0..len)
        .map(|_| {
            let c = rng.random_bool(contam_rate);
            (dists.sample(c, &mut rng), c)
        })
        .collect())
}

/// Replays `stream` through a fresh threshold started at `initial_epsilon`.
/// The label column holds the decision taken with the pre-update threshold.
pub fn trace_threshold(
    stream: &[(f64, bool)],
    params: ThresholdParams,
    initial_epsilon: f64,
    labels: LabelSource,
) -> Result<Vec<TraceRow>> {
    let mut state = ThresholdState::new(initial_epsilon, params)?;
    stream
        .iter()
        .enumerate()
        .map(|(i, &(score, contaminated))| {
            let decision = state.classify(score);
            let feed = match labels {
                LabelSource::SelfTraining => decision,
                LabelSource::GroundTruth if contaminated => Label::Contam,
                LabelSource::GroundTruth => Label::Benign,
            };
            let step_result = state.update(score, feed)?;
            Ok(TraceRow { step: i + 1, score, label: decision, step_result })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub initial_epsilon: f64,
    pub final_epsilon: f64,
    /// Standard deviation of the threshold over the last `tail` steps.
    pub tail_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceSummary {
    pub steps: usize,
    pub tail: usize,
    pub trajectories: Vec<TrajectorySummary>,
    /// `max - min` of the final thresholds across trajectories.
    pub band_width: f64,
}

fn std_dev(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n).sqrt()
}

pub fn convergence_summary(traces: &[(f64, Vec<TraceRow>)], tail: usize) -> ConvergenceSummary {
    let trajectories: Vec<TrajectorySummary> = traces
        .iter()
        .map(|(eps0, rows)| {
            let eps: Vec<f64> = rows.iter().map(|r| r.step_result.eps).collect();
            let last = &eps[eps.len().saturating_sub(tail)..];
            TrajectorySummary {
                initial_epsilon: *eps0,
                final_epsilon: eps.last().copied().unwrap_or(*eps0),
                tail_std: std_dev(last),
            }
        })
        .collect();
    let finals = trajectories.iter().map(|t| t.final_epsilon);
    let hi = finals.clone().fold(f64::NEG_INFINITY, f64::max);
    let lo = finals.fold(f64::INFINITY, f64::min);
    ConvergenceSummary {
        steps: traces.first().map_or(0, |t| t.1.len()),
        tail,
        band_width: if trajectories.is_empty() { 0.0 } else { hi - lo },
        trajectories,
    }
}
