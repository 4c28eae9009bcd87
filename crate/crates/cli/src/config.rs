use std::path::Path;

use cpguard_core::bench::{Grid, Method, SweepSpec};
use cpguard_core::e2e::E2eConfig;
use cpguard_core::oracle::{LabelSource, ScoreDistributions, TruncNormal};
use cpguard_core::threshold::ThresholdParams;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// Reads `path` as JSON, or falls back to `default` when no path is given.
pub fn load<T: DeserializeOwned>(path: Option<&Path>, default: impl FnOnce() -> T) -> Result<T, String> {
    let Some(path) = path else { return Ok(default()) };
    let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config {}: {e}", path.display()))
}

fn separated() -> ScoreDistributions {
    ScoreDistributions { benign: TruncNormal { mean: 0.8, sigma: 0.05 }, contaminated: TruncNormal { mean: 0.3, sigma: 0.05 } }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorBoundCheck {
    pub alpha: f64,
    pub beta: f64,
    pub n: usize,
    pub m: usize,
    pub trials: u64,
}

impl Default for ErrorBoundCheck {
    fn default() -> Self {
        Self { alpha: 0.005, beta: 0.005, n: 16, m: 2, trials: 50_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QueryBoundCheck {
    pub n_range: (usize, usize),
    pub m_range: (usize, usize),
    pub trials: u64,
}

impl Default for QueryBoundCheck {
    fn default() -> Self {
        Self { n_range: (1, 64), m_range: (0, 64), trials: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReliabilityCheck {
    pub distributions: ScoreDistributions,
    pub threshold: ThresholdParams,
    pub initial_epsilon: f64,
    pub stream_len: u64,
}

impl Default for ReliabilityCheck {
    fn default() -> Self {
        Self {
            distributions: separated(),
            threshold: ThresholdParams::default(),
            initial_epsilon: 0.5,
            stream_len: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheoremsConfig {
    pub error_bound: ErrorBoundCheck,
    pub query_bound: QueryBoundCheck,
    pub reliability: ReliabilityCheck,
}

pub fn default_sweep() -> SweepSpec {
    SweepSpec::new(
        Grid::Counts { ns: vec![8, 16, 32], ms: vec![1, 2, 4] },
        vec![Method::Pasac, Method::Linear, Method::Random],
        1000,
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TraceConfig {
    pub distributions: ScoreDistributions,
    pub threshold: ThresholdParams,
    pub initial_epsilons: Vec<f64>,
    pub steps: usize,
    /// Probability that a stream element comes from a contaminated group.
    pub contam_rate: f64,
    pub labels: LabelSource,
    /// Steps at the end of each trace used for the stability statistic.
    pub tail: usize,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            distributions: separated(),
            threshold: ThresholdParams::default(),
            initial_epsilons: cpguard_core::bench::INITIAL_EPSILONS.to_vec(),
            steps: 600,
            contam_rate: 0.5,
            labels: LabelSource::GroundTruth,
            tail: 100,
        }
    }
}

pub fn default_e2e() -> E2eConfig {
    serde_json::from_str(include_str!("../../../configs/e2e_smoke.json")).expect("bundled smoke config parses")
}
