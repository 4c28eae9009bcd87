//! Group-consistency oracles: `Test(S) -> BENIGN | CONTAM`.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal as StdNormal};

use crate::consistency::{ccloss, CCLossParams};
use crate::error::{config_err, input_err, Result};
use crate::rng::{derive_seed, rng_from_seed, SimRng};
use crate::sim::{corrupt, fuse_outputs, AttackSpec, PerceptionOutput};
use crate::threshold::{classify, Label, ThresholdState};

pub type AgentId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OracleVerdict {
    pub label: Label,
    /// Consistency score behind the verdict, when the oracle computes one.
    pub score: Option<f64>,
    /// Position of this query in the issuing oracle's sequence, starting at 1.
    /// Free functions that are not tied to an oracle instance report 0.
    pub query_index: u64,
}

/// A stateful group test. Each call counts as one query.
pub trait GroupOracle {
    fn test(&mut self, group: &[AgentId]) -> Result<OracleVerdict>;

    /// Number of queries answered so far.
    fn queries(&self) -> u64;
}

/// An (alpha, beta)-reliable oracle over a known malicious set.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticOracleSpec {
    pub alpha: f64,
    pub beta: f64,
    pub truth: BTreeSet<AgentId>,
}

impl SyntheticOracleSpec {
    pub fn new(alpha: f64, beta: f64, truth: impl IntoIterator<Item = AgentId>) -> Result<Self> {
        let spec = Self { alpha, beta, truth: truth.into_iter().collect() };
        spec.validate()?;
        Ok(spec)
    }

    pub fn perfect(truth: impl IntoIterator<Item = AgentId>) -> Self {
        Self { alpha: 0.0, beta: 0.0, truth: truth.into_iter().collect() }
    }

    pub fn validate(&self) -> Result<()> {
        if !((0.0..1.0).contains(&self.alpha) && (0.0..1.0).contains(&self.beta)) {
            return config_err("oracle alpha and beta must lie in [0, 1)");
        }
        if self.alpha + self.beta >= 1.0 {
            return config_err("oracle must be informative: alpha + beta < 1");
        }
        Ok(())
    }

    fn contaminated(&self, group: &[AgentId]) -> bool {
        group.iter().any(|a| self.truth.contains(a))
    }

    fn draw(&self, group: &[AgentId], rng: &mut impl Rng) -> Result<Label> {
        if group.is_empty() {
            return input_err("cannot test an empty group");
        }
        let u: f64 = rng.random();
        Ok(if self.contaminated(group) {
            if u < self.beta { Label::Benign } else { Label::Contam }
        } else if u < self.alpha {
            Label::Contam
        } else {
            Label::Benign
        })
    }
}

/// One draw of the synthetic oracle for `group`.
pub fn synthetic_test(spec: &SyntheticOracleSpec, group: &[AgentId], seed: u64) -> Result<OracleVerdict> {
    spec.validate()?;
    let label = spec.draw(group, &mut rng_from_seed(seed))?;
    Ok(OracleVerdict { label, score: None, query_index: 0 })
}

/// Synthetic oracle with i.i.d. noise across queries, repeated subsets included.
#[derive(Debug, Clone)]
pub struct SyntheticOracle {
    spec: SyntheticOracleSpec,
    rng: SimRng,
    count: u64,
}

impl SyntheticOracle {
    pub fn new(spec: SyntheticOracleSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec, rng: rng_from_seed(seed), count: 0 })
    }

    pub fn spec(&self) -> &SyntheticOracleSpec {
        &self.spec
    }
}

impl GroupOracle for SyntheticOracle {
    fn test(&mut self, group: &[AgentId]) -> Result<OracleVerdict> {
        let label = self.spec.draw(group, &mut self.rng)?;
        self.count += 1;
        Ok(OracleVerdict { label, score: None, query_index: self.count })
    }

    fn queries(&self) -> u64 {
        self.count
    }
}

/// Normal distribution truncated to `[0, 1]`. `sigma = 0` is a point mass at
/// the (clamped) mean.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruncNormal {
    pub mean: f64,
    pub sigma: f64,
}

impl TruncNormal {
    pub fn new(mean: f64, sigma: f64) -> Result<Self> {
        let d = Self { mean, sigma };
        d.validate()?;
        Ok(d)
    }

    pub fn point(value: f64) -> Self {
        Self { mean: value, sigma: 0.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.mean.is_finite() || !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return config_err("truncated normal needs a finite mean and sigma >= 0");
        }
        if self.sigma > 0.0 && self.mass() <= 1e-12 {
            return config_err("truncated normal has no mass on [0, 1]");
        }
        Ok(())
    }

    fn std(&self) -> StdNormal {
        StdNormal::new(0.0, 1.0).expect("standard normal")
    }

    fn mass(&self) -> f64 {
        let z = self.std();
        z.cdf((1.0 - self.mean) / self.sigma) - z.cdf((0.0 - self.mean) / self.sigma)
    }

    /// Inverse CDF of the truncated law.
    pub fn quantile(&self, q: f64) -> f64 {
        if self.sigma == 0.0 {
            return self.mean.clamp(0.0, 1.0);
        }
        let z = self.std();
        let lo = z.cdf(-self.mean / self.sigma);
        let hi = z.cdf((1.0 - self.mean) / self.sigma);
        let p = (lo + q.clamp(0.0, 1.0) * (hi - lo)).clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON);
        (self.mean + self.sigma * z.inverse_cdf(p)).clamp(0.0, 1.0)
    }

    /// Rejection sampling from the untruncated normal.
    pub fn sample(&self, rng: &mut impl Rng) -> f64 {
        if self.sigma == 0.0 {
            return self.mean.clamp(0.0, 1.0);
        }
        let n = Normal::new(self.mean, self.sigma).expect("validated sigma");
        for _ in 0..10_000 {
            let x = n.sample(rng);
            if (0.0..=1.0).contains(&x) {
                return x;
            }
        }
        self.quantile(rng.random())
    }
}

/// Score laws of benign (`F_P`) and contaminated (`F_N`) groups.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoreDistributions {
    pub benign: TruncNormal,
    pub contaminated: TruncNormal,
}

impl ScoreDistributions {
    pub fn validate(&self) -> Result<()> {
        self.benign.validate()?;
        self.contaminated.validate()
    }

    /// Quantile separation required for the reliability guarantee: the benign
    /// `alpha`-quantile lies strictly above the contaminated `(1 - beta)`-quantile.
    pub fn separated(&self, alpha: f64, beta: f64) -> bool {
        self.benign.quantile(alpha) > self.contaminated.quantile(1.0 - beta)
    }

    pub fn sample(&self, contaminated: bool, rng: &mut impl Rng) -> f64 {
        if contaminated {
            self.contaminated.sample(rng)
        } else {
            self.benign.sample(rng)
        }
    }
}

pub fn sample_score(dists: &ScoreDistributions, contaminated: bool, seed: u64) -> f64 {
    dists.sample(contaminated, &mut rng_from_seed(seed))
}

/// Score `ego` against `fuse(ego, group)` and threshold at `epsilon`.
pub fn ccloss_test(
    ego: &PerceptionOutput,
    group: &[&PerceptionOutput],
    params: &CCLossParams,
    epsilon: f64,
    merge_iou: f64,
) -> Result<OracleVerdict> {
    if !(0.0..=1.0).contains(&epsilon) {
        return input_err(format!("threshold {epsilon} outside [0, 1]"));
    }
    let fused = fuse_outputs(ego, group, merge_iou)?;
    let score = ccloss(ego, &fused, params)?;
    Ok(OracleVerdict { label: classify(score, epsilon), score: Some(score), query_index: 0 })
}

/// Where a malicious collaborator's attack takes effect.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AttackPropagation {
    /// The attack corrupts the fused output of every group containing the
    /// attacker, as an adversary optimising through the aggregator would.
    #[default]
    Fused,
    /// The attack only corrupts the attacker's own message, which is then
    /// late-fused like any other.
    Message,
}

/// Which labels feed the adaptive threshold windows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LabelSource {
    /// The oracle's own decisions.
    #[default]
    SelfTraining,
    /// Whether the group really contains an attacker.
    GroundTruth,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Threshold {
    Fixed(f64),
    Adaptive { state: ThresholdState, labels: LabelSource },
}

impl Threshold {
    pub fn epsilon(&self) -> f64 {
        match self {
            Threshold::Fixed(e) => *e,
            Threshold::Adaptive { state, .. } => state.epsilon(),
        }
    }
}

/// A collaborator's clean observation and, for malicious agents, its attack.
#[derive(Debug, Clone, PartialEq)]
pub struct Member {
    pub output: PerceptionOutput,
    pub attack: Option<AttackSpec>,
}

/// Consistency-score oracle over one frame's collaborator outputs.
///
/// The threshold is carried across frames by moving it in with
/// [`CclossOracle::new`] and out with [`CclossOracle::into_threshold`].
#[derive(Debug, Clone)]
pub struct CclossOracle {
    ego: PerceptionOutput,
    messages: BTreeMap<AgentId, PerceptionOutput>,
    attacks: BTreeMap<AgentId, AttackSpec>,
    propagation: AttackPropagation,
    params: CCLossParams,
    merge_iou: f64,
    threshold: Threshold,
    attack_seed: u64,
    count: u64,
}

impl CclossOracle {
    pub fn new(
        ego: PerceptionOutput,
        members: BTreeMap<AgentId, Member>,
        propagation: AttackPropagation,
        params: CCLossParams,
        merge_iou: f64,
        threshold: Threshold,
        attack_seed: u64,
    ) -> Result<Self> {
        params.validate()?;
        if let Threshold::Fixed(e) = threshold {
            if !(0.0..=1.0).contains(&e) {
                return config_err(format!("fixed threshold {e} outside [0, 1]"));
            }
        }
        let mut messages = BTreeMap::new();
        let mut attacks = BTreeMap::new();
        for (id, m) in members {
            let msg = match (m.attack, propagation) {
                (Some(spec), AttackPropagation::Message) => corrupt(&m.output, &spec, derive_seed(attack_seed, &[id as u64]))?,
                _ => m.output,
            };
            if let Some(spec) = m.attack {
                spec.validate()?;
                attacks.insert(id, spec);
            }
            messages.insert(id, msg);
        }
        Ok(Self { ego, messages, attacks, propagation, params, merge_iou, threshold, attack_seed, count: 0 })
    }

    pub fn threshold(&self) -> &Threshold {
        &self.threshold
    }

    pub fn into_threshold(self) -> Threshold {
        self.threshold
    }

    pub fn malicious(&self) -> BTreeSet<AgentId> {
        self.attacks.keys().copied().collect()
    }

    /// Fused output for `group`, with fused-side attack propagation applied.
    pub fn fused_for(&self, group: &[AgentId]) -> Result<PerceptionOutput> {
        let mut ids: Vec<AgentId> = group.to_vec();
        ids.sort_unstable();
        ids.dedup();
        let outs = ids
            .iter()
            .map(|id| self.messages.get(id).ok_or_else(|| crate::Error::Input(format!("unknown agent {id}"))))
            .collect::<Result<Vec<_>>>()?;
        let mut fused = fuse_outputs(&self.ego, &outs, self.merge_iou)?;
        if self.propagation == AttackPropagation::Fused {
            for id in &ids {
                if let Some(spec) = self.attacks.get(id) {
                    fused = corrupt(&fused, spec, derive_seed(self.attack_seed, &[*id as u64]))?;
                }
            }
        }
        Ok(fused)
    }
}

impl GroupOracle for CclossOracle {
    fn test(&mut self, group: &[AgentId]) -> Result<OracleVerdict> {
        if group.is_empty() {
            return input_err("cannot test an empty group");
        }
        let fused = self.fused_for(group)?;
        let score = ccloss(&self.ego, &fused, &self.params)?;
        let label = classify(score, self.threshold.epsilon());
        let truly_contaminated = group.iter().any(|a| self.attacks.contains_key(a));
        if let Threshold::Adaptive { state, labels } = &mut self.threshold {
            let feed = match labels {
                LabelSource::SelfTraining => label,
                LabelSource::GroundTruth if truly_contaminated => Label::Contam,
                LabelSource::GroundTruth => Label::Benign,
            };
            state.update(score, feed)?;
        }
        self.count += 1;
        Ok(OracleVerdict { label, score: Some(score), query_index: self.count })
    }

    fn queries(&self) -> u64 {
        self.count
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{BoxProposal, DetectionSet};
    use crate::threshold::ThresholdParams;

    #[test]
    fn perfect_oracle_is_exact() {
        let spec = SyntheticOracleSpec::perfect([3]);
        for seed in 0..200 {
            assert_eq!(synthetic_test(&spec, &[1, 2], seed).unwrap().label, Label::Benign);
            assert_eq!(synthetic_test(&spec, &[2, 3], seed).unwrap().label, Label::Contam);
        }
    }

    #[test]
    fn false_positive_rate_matches_alpha() {
        let spec = SyntheticOracleSpec::new(0.1, 0.0, [9]).unwrap();
        let n = 10_000;
        let benign = (0..n).filter(|&s| synthetic_test(&spec, &[1, 2], s).unwrap().label == Label::Benign).count();
        let frac = benign as f64 / n as f64;
        assert!((frac - 0.9).abs() <= 0.01, "benign fraction {frac}");
    }

    #[test]
    fn invalid_specs() {
        assert!(SyntheticOracleSpec::new(0.6, 0.5, []).is_err());
        assert!(SyntheticOracleSpec::new(1.0, 0.0, []).is_err());
        assert!(synthetic_test(&SyntheticOracleSpec::perfect([]), &[], 0).is_err());
    }

    #[test]
    fn query_index_counts_up() {
        let mut o = SyntheticOracle::new(SyntheticOracleSpec::perfect([1]), 0).unwrap();
        for k in 1..=5 {
            assert_eq!(o.test(&[1]).unwrap().query_index, k);
        }
        assert_eq!(o.queries(), 5);
    }

    #[test]
    fn point_mass_scores() {
        let d = ScoreDistributions { benign: TruncNormal::point(0.8), contaminated: TruncNormal::point(0.3) };
        assert_eq!(sample_score(&d, false, 4), 0.8);
        assert_eq!(sample_score(&d, true, 4), 0.3);
    }

    #[test]
    fn trunc_normal_sample_mean() {
        let d = ScoreDistributions {
            benign: TruncNormal::new(0.8, 0.05).unwrap(),
            contaminated: TruncNormal::new(0.3, 0.05).unwrap(),
        };
        let mut rng = rng_from_seed(12);
        let mean: f64 = (0..10_000).map(|_| d.sample(false, &mut rng)).sum::<f64>() / 10_000.0;
        assert!((mean - 0.8).abs() <= 0.01, "mean {mean}");
    }

    #[test]
    fn separation() {
        let d = ScoreDistributions {
            benign: TruncNormal::new(0.8, 0.05).unwrap(),
            contaminated: TruncNormal::new(0.3, 0.05).unwrap(),
        };
        assert!(d.separated(0.05, 0.05));
        let same = ScoreDistributions { benign: d.benign, contaminated: d.benign };
        assert!(!same.separated(0.05, 0.05));
        // 5% quantile of N(0.8, 0.05) ~ 0.8 - 1.645 * 0.05
        assert!((d.benign.quantile(0.05) - (0.8 - 1.6448536 * 0.05)).abs() < 1e-4);
    }

    fn det(boxes: Vec<BoxProposal>) -> PerceptionOutput {
        PerceptionOutput::Detection(DetectionSet { class_count: 1, boxes })
    }

    #[test]
    fn ccloss_test_self_duplicates() {
        let ego = det(vec![BoxProposal::centered(5.0, 5.0, 1.0, 2.0, vec![0.9]).unwrap()]);
        let v = ccloss_test(&ego, &[&ego, &ego], &CCLossParams::default(), 0.99, 0.5).unwrap();
        assert_eq!(v.score, Some(1.0));
        assert_eq!(v.label, Label::Benign);
    }

    #[test]
    fn removal_invisible_to_union_fusion() {
        let ego = det(vec![BoxProposal::centered(5.0, 5.0, 1.0, 1.0, vec![1.0]).unwrap()]);
        let removed = det(vec![]);
        let v = ccloss_test(&ego, &[&removed], &CCLossParams::default(), 0.5, 0.5).unwrap();
        assert_eq!(v.score, Some(1.0));
        assert_eq!(v.label, Label::Benign);
    }

    #[test]
    fn variant_mismatch() {
        let ego = det(vec![]);
        let seg = PerceptionOutput::Segmentation(crate::sim::SegGrid::zeros(1, 1, 1));
        assert!(ccloss_test(&ego, &[&seg], &CCLossParams::default(), 0.5, 0.5).is_err());
    }

    fn shift_fixture() -> (PerceptionOutput, BTreeMap<AgentId, Member>) {
        let boxes: Vec<_> = (0..4)
            .map(|i| BoxProposal::centered(20.0 * i as f64, 10.0, 2.0, 1.0, vec![1.0]).unwrap())
            .collect();
        let ego = det(boxes.clone());
        let mut members = BTreeMap::new();
        members.insert(1, Member { output: det(boxes.clone()), attack: None });
        members.insert(2, Member { output: det(boxes), attack: Some(AttackSpec::Shift { offset_m: 10.0 }) });
        (ego, members)
    }

    #[test]
    fn shift_attack_under_each_propagation() {
        let (ego, members) = shift_fixture();
        let params = CCLossParams::default();
        let mut message = CclossOracle::new(
            ego.clone(),
            members.clone(),
            AttackPropagation::Message,
            params,
            0.5,
            Threshold::Fixed(0.5),
            7,
        )
        .unwrap();
        let v = message.test(&[2]).unwrap();
        assert_eq!(v.label, Label::Benign, "shifted ghosts are fused-only boxes");
        assert!(v.score.unwrap() >= 0.5);

        let strict = CCLossParams { phi: 2.0, ..params };
        let mut fused =
            CclossOracle::new(ego, members, AttackPropagation::Fused, strict, 0.5, Threshold::Fixed(0.5), 7).unwrap();
        let v = fused.test(&[1, 2]).unwrap();
        assert_eq!(v.label, Label::Contam);
        assert!(v.score.unwrap() < 0.5);
        assert_eq!(fused.test(&[1]).unwrap().label, Label::Benign);
        assert_eq!(fused.queries(), 2);
    }

    #[test]
    fn adaptive_threshold_is_fed() {
        let (ego, members) = shift_fixture();
        let st = ThresholdState::new(0.5, ThresholdParams { min_window: 1, ..Default::default() }).unwrap();
        let mut o = CclossOracle::new(
            ego,
            members,
            AttackPropagation::Fused,
            CCLossParams { phi: 2.0, ..Default::default() },
            0.5,
            Threshold::Adaptive { state: st, labels: LabelSource::SelfTraining },
            1,
        )
        .unwrap();
        o.test(&[1]).unwrap();
        o.test(&[2]).unwrap();
        let Threshold::Adaptive { state, .. } = o.into_threshold() else { unreachable!() };
        assert_eq!(state.benign_window().len(), 1);
        assert_eq!(state.contam_window().len(), 1);
        assert_ne!(state.epsilon(), 0.5);
    }
}
