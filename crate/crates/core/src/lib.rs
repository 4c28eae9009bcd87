//! Malicious-collaborator identification for collaborative perception.
//!
//! The pieces compose as follows: [`sim`] produces per-agent perception
//! outputs, [`consistency`] scores an ego output against a fused one, the
//! [`threshold`] module turns scores into verdicts, [`oracle`] wraps that into
//! group tests, and [`pasac`] isolates attackers with as few tests as possible.
//! [`bench`] and [`e2e`] drive experiments on top.

pub mod bench;
pub mod consistency;
pub mod e2e;
pub mod error;
pub mod oracle;
pub mod pasac;
pub mod rng;
pub mod sim;
pub mod threshold;

pub use consistency::{assign_min_cost, ccloss, ccloss_det, ccloss_seg, CCLossParams, MatchResult};
pub use error::{Error, Result};
pub use oracle::{
    AgentId, AttackPropagation, CclossOracle, GroupOracle, LabelSource, OracleVerdict, ScoreDistributions,
    SyntheticOracle, SyntheticOracleSpec, Threshold, TruncNormal,
};
pub use pasac::{error_bound, linear_scan, pasac_run, query_bound, random_consensus, PasacConfig, PasacResult, SplitMode};
pub use sim::{AttackSpec, BoxProposal, DetectionSet, PerceptionOutput, SegGrid, SimConfig, TaskMode};
pub use threshold::{classify, empirical_quantile, Label, ThresholdParams, ThresholdState};
