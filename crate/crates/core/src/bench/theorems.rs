//! Empirical checks of the misclassification bound, the query bound and the
//! threshold reliability guarantee.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::sweep::draw_malicious;
use crate::error::{config_err, Result};
use crate::oracle::{AgentId, ScoreDistributions, SyntheticOracle, SyntheticOracleSpec};
use crate::pasac::{error_bound, pasac_run, query_bound, tree_levels, PasacConfig};
use crate::rng::{derive_seed, rng_from_seed};
use crate::threshold::{Label, ThresholdParams, ThresholdState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// The analytic bound is at least 1, so there is nothing to check.
    Vacuous,
    /// The distributional premise does not hold; not an implementation failure.
    AssumptionUnmet,
}

impl Status {
    pub fn is_failure(self) -> bool {
        self == Status::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    pub theorem: String,
    pub params: Value,
    pub empirical: Value,
    pub bound: Value,
    pub status: Status,
}

/// Monte-Carlo estimate of the probability that a noisy-oracle run mislabels
/// at least one agent, compared against the analytic bound.
pub fn check_error_bound(alpha: f64, beta: f64, n: usize, m: usize, trials: u64, seed: u64) -> Result<TheoremReport> {
    let bound = error_bound(alpha, beta, n, m)?;
    if trials == 0 {
        return config_err("trials must be at least 1");
    }
    let params = json!({ "alpha": alpha, "beta": beta, "n": n, "m": m, "trials": trials, "seed": seed });
    let informative = alpha + beta < 1.0;
    if !informative {
        return Ok(TheoremReport {
            theorem: "error_bound".into(),
            params,
            empirical: json!({ "error_rate": null, "errors": null }),
            bound: json!(bound),
            status: Status::Vacuous,
        });
    }
    let ids: Vec<AgentId> = (0..n).collect();
    let errors: u64 = (0..trials)
        .into_par_iter()
        .map(|t| -> Result<u64> {
            let s = derive_seed(seed, &[t]);
            let truth = draw_malicious(n, m, derive_seed(s, &[0]));
            let spec = SyntheticOracleSpec::new(alpha, beta, truth.iter().copied())?;
            let mut oracle = SyntheticOracle::new(spec, derive_seed(s, &[1]))?;
            let cfg = PasacConfig { record_trace: false, ..PasacConfig::with_seed(derive_seed(s, &[2])) };
            let r = pasac_run(&ids, &mut oracle, &cfg)?;
            Ok(u64::from(!r.matches_truth(&ids, &truth)))
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .sum();
    let rate = errors as f64 / trials as f64;
    let status = if bound >= 1.0 {
        Status::Vacuous
    } else if rate <= bound {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(TheoremReport {
        theorem: "error_bound".into(),
        params,
        empirical: json!({ "error_rate": rate, "errors": errors }),
        bound: json!(bound),
        status,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct QueryBoundStats {
    pub runs: u64,
    /// Runs with more queries than the analytic bound.
    pub violations: u64,
    /// Runs in which some benign agent sat in more than one BENIGN leaf.
    pub repeat_benign: u64,
    /// Runs whose trace is deeper than `ceil(log2 n) + 1`.
    pub depth_violations: u64,
    /// Runs whose classification differs from the ground truth.
    pub misclassified: u64,
    /// Largest `queries / bound` seen.
    pub max_ratio_milli: u64,
}

impl QueryBoundStats {
    fn merge(mut self, o: Self) -> Self {
        self.runs += o.runs;
        self.violations += o.violations;
        self.repeat_benign += o.repeat_benign;
        self.depth_violations += o.depth_violations;
        self.misclassified += o.misclassified;
        self.max_ratio_milli = self.max_ratio_milli.max(o.max_ratio_milli);
        self
    }
}

/// One perfect-oracle run with no early stop, audited against the bounds.
pub fn audit_perfect_run(n: usize, m: usize, seed: u64) -> Result<QueryBoundStats> {
    let ids: Vec<AgentId> = (0..n).collect();
    let truth = draw_malicious(n, m, derive_seed(seed, &[0]));
    let mut oracle = SyntheticOracle::new(SyntheticOracleSpec::perfect(truth.iter().copied()), 0)?;
    let r = pasac_run(&ids, &mut oracle, &PasacConfig::with_seed(derive_seed(seed, &[2])))?;
    let bound = query_bound(n, m)?;
    let mut leaf_hits = vec![0u32; n];
    for rec in r.trace.iter().filter(|t| t.verdict == Label::Benign) {
        for &a in &rec.subset {
            leaf_hits[a] += 1;
        }
    }
    let max_depth = r.trace.iter().map(|t| u64::from(t.depth)).max().unwrap_or(0);
    Ok(QueryBoundStats {
        runs: 1,
        violations: u64::from(r.queries > bound),
        repeat_benign: u64::from(leaf_hits.iter().any(|&h| h > 1)),
        depth_violations: u64::from(max_depth > tree_levels(n) + 1),
        misclassified: u64::from(!r.matches_truth(&ids, &truth)),
        max_ratio_milli: r.queries * 1000 / bound.max(1),
    })
}

/// Random instances with `n` uniform in `n_range` and `m` uniform in
/// `m_range` clipped to `[0, n]`.
pub fn check_query_bound(
    n_range: (usize, usize),
    m_range: (usize, usize),
    trials: u64,
    seed: u64,
) -> Result<TheoremReport> {
    let (n_lo, n_hi) = n_range;
    if n_lo == 0 || n_lo > n_hi || m_range.0 > m_range.1 || trials == 0 {
        return config_err("check_query_bound needs 1 <= n_lo <= n_hi, m_lo <= m_hi and trials >= 1");
    }
    let stats = (0..trials)
        .into_par_iter()
        .map(|t| {
            let s = derive_seed(seed, &[t]);
            let mut rng = rng_from_seed(derive_seed(s, &[9]));
            let n = rng.random_range(n_lo..=n_hi);
            let m_hi = m_range.1.min(n);
            let m = rng.random_range(m_range.0.min(m_hi)..=m_hi);
            audit_perfect_run(n, m, s)
        })
        .collect::<Result<Vec<_>>>()?
        .into_iter()
        .fold(QueryBoundStats::default(), QueryBoundStats::merge);
    let ok = stats.violations == 0 && stats.repeat_benign == 0;
    Ok(TheoremReport {
        theorem: "query_bound".into(),
        params: json!({ "n_range": [n_lo, n_hi], "m_range": [m_range.0, m_range.1], "trials": trials, "seed": seed }),
        empirical: serde_json::to_value(stats).expect("plain struct"),
        bound: json!("2 m max(1, ceil(log2 n)) + (n - m)"),
        status: if ok { Status::Pass } else { Status::Fail },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityStats {
    pub fpr: f64,
    pub fnr: f64,
    pub benign_samples: u64,
    pub contam_samples: u64,
    pub warmup_steps: u64,
    pub final_epsilon: f64,
}

/// Drives an adaptive threshold with ground-truth labels over a stream in
/// which each step is contaminated with probability 1/2. Error rates count
/// the `stream_len` classifications made after both windows reach warm-up.
pub fn reliability_run(
    dists: &ScoreDistributions,
    params: ThresholdParams,
    initial_epsilon: f64,
    stream_len: u64,
    seed: u64,
) -> Result<ReliabilityStats> {
    dists.validate()?;
    let mut state = ThresholdState::new(initial_epsilon, params)?;
    let mut rng = rng_from_seed(seed);
    let (mut fp, mut fnn, mut pos, mut neg, mut warm, mut counted) = (0u64, 0u64, 0u64, 0u64, 0u64, 0u64);
    let warmup_cap = 100 * params.min_window.max(100) as u64;
    while counted < stream_len {
        if warm >= warmup_cap {
            return config_err(format!("threshold windows did not warm up within {warmup_cap} steps"));
        }
        let contaminated = rng.random_bool(0.5);
        let score = dists.sample(contaminated, &mut rng);
        if state.warmed_up() {
            counted += 1;
            let label = state.classify(score);
            if contaminated {
                neg += 1;
                fnn += u64::from(label == Label::Benign);
            } else {
                pos += 1;
                fp += u64::from(label == Label::Contam);
            }
        } else {
            warm += 1;
        }
        let truth = if contaminated { Label::Contam } else { Label::Benign };
        state.update(score, truth)?;
    }
    Ok(ReliabilityStats {
        fpr: if pos == 0 { 0.0 } else { fp as f64 / pos as f64 },
        fnr: if neg == 0 { 0.0 } else { fnn as f64 / neg as f64 },
        benign_samples: pos,
        contam_samples: neg,
        warmup_steps: warm,
        final_epsilon: state.epsilon(),
    })
}

pub const RELIABILITY_TOLERANCE: f64 = 0.02;

pub fn check_reliability(
    dists: &ScoreDistributions,
    params: ThresholdParams,
    initial_epsilon: f64,
    stream_len: u64,
    seed: u64,
) -> Result<TheoremReport> {
    let stats = reliability_run(dists, params, initial_epsilon, stream_len, seed)?;
    let fpr_bound = params.alpha + RELIABILITY_TOLERANCE;
    let fnr_bound = params.beta + RELIABILITY_TOLERANCE;
    let status = if !dists.separated(params.alpha, params.beta) {
        Status::AssumptionUnmet
    } else if stats.fpr <= fpr_bound && stats.fnr <= fnr_bound {
        Status::Pass
    } else {
        Status::Fail
    };
    Ok(TheoremReport {
        theorem: "reliability".into(),
        params: json!({
            "distributions": dists,
            "threshold": params,
            "initial_epsilon": initial_epsilon,
            "stream_len": stream_len,
            "seed": seed,
        }),
        empirical: serde_json::to_value(stats).expect("plain struct"),
        bound: json!({ "fpr": fpr_bound, "fnr": fnr_bound }),
        status,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::TruncNormal;

    #[test]
    fn error_bound_perfect_oracle() {
        let r = check_error_bound(0.0, 0.0, 16, 2, 1000, 1).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.empirical["error_rate"], json!(0.0));
        assert_eq!(r.bound, json!(0.0));
    }

    #[test]
    fn error_bound_vacuous() {
        assert_eq!(check_error_bound(0.2, 0.2, 64, 8, 100, 1).unwrap().status, Status::Vacuous);
        let r = check_error_bound(0.5, 0.5, 16, 2, 100, 1).unwrap();
        assert_eq!(r.status, Status::Vacuous);
        assert!(r.empirical["error_rate"].is_null());
    }

    #[test]
    fn query_bound_small_cases() {
        let r = check_query_bound((1, 1), (0, 0), 5, 0).unwrap();
        assert_eq!(r.status, Status::Pass);
        let s = audit_perfect_run(2, 2, 3).unwrap();
        assert_eq!(s.violations, 0);
        assert_eq!(check_query_bound((1, 20), (0, 20), 500, 4).unwrap().status, Status::Pass);
    }

    #[test]
    fn reliability_point_masses() {
        let d = ScoreDistributions { benign: TruncNormal::point(0.8), contaminated: TruncNormal::point(0.3) };
        let r = check_reliability(&d, ThresholdParams::default(), 0.5, 2000, 3).unwrap();
        assert_eq!(r.status, Status::Pass);
        assert_eq!(r.empirical["fpr"], json!(0.0));
        assert_eq!(r.empirical["fnr"], json!(0.0));
    }

    #[test]
    fn reliability_counts_only_after_warm_up() {
        let d = ScoreDistributions { benign: TruncNormal::point(0.8), contaminated: TruncNormal::point(0.3) };
        let p = ThresholdParams { window: 500, min_window: 500, ..Default::default() };
        let s = reliability_run(&d, p, 0.5, 10, 0).unwrap();
        assert!(s.warmup_steps >= 1000);
        assert_eq!(s.benign_samples + s.contam_samples, 10);
    }

    #[test]
    fn reliability_identical_laws() {
        let p = TruncNormal::new(0.6, 0.1).unwrap();
        let d = ScoreDistributions { benign: p, contaminated: p };
        let r = check_reliability(&d, ThresholdParams::default(), 0.5, 500, 3).unwrap();
        assert_eq!(r.status, Status::AssumptionUnmet);
    }
}
