//! Adaptive binary-splitting group testing over collaborators, its analytic
//! bounds, and the linear-scan and random-consensus baselines.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};
use crate::oracle::{AgentId, GroupOracle};
use crate::rng::{rng_from_seed, SimRng};
use crate::threshold::Label;

/// How a subset is divided into its two halves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "seed")]
pub enum SplitMode {
    /// Seeded shuffle before each split.
    Shuffled(u64),
    /// Keep the ascending id order: the first `ceil(k/2)` ids form the left half.
    InOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PasacConfig {
    /// Stop once this many collaborators are accepted. `None` disables early stop.
    pub n_max: Option<usize>,
    pub split: SplitMode,
    /// Query the full collaborator set once before splitting.
    pub query_root: bool,
    /// Keep per-query trace records. Counters are kept regardless.
    pub record_trace: bool,
}

impl Default for PasacConfig {
    fn default() -> Self {
        Self { n_max: None, split: SplitMode::Shuffled(0), query_root: false, record_trace: true }
    }
}

impl PasacConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { split: SplitMode::Shuffled(seed), ..Self::default() }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        match self.n_max {
            Some(k) if k == 0 || k > n => config_err(format!("n_max {k} must lie in [1, {n}]")),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub subset: Vec<AgentId>,
    pub verdict: Label,
    /// The root halves sit at depth 1; a root query, if enabled, at depth 0.
    pub depth: u32,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct PasacResult {
    pub benign: BTreeSet<AgentId>,
    pub malicious: BTreeSet<AgentId>,
    pub queries: u64,
    pub trace: Vec<TraceRecord>,
    pub stopped_early: bool,
    /// Set by [`random_consensus`] when every attempt failed.
    pub exhausted: bool,
}

impl PasacResult {
    /// True when every collaborator is classified and the split matches `truth`.
    pub fn matches_truth(&self, collaborators: &[AgentId], truth: &BTreeSet<AgentId>) -> bool {
        collaborators.len() == self.benign.len() + self.malicious.len()
            && collaborators.iter().all(|a| {
                if truth.contains(a) {
                    self.malicious.contains(a)
                } else {
                    self.benign.contains(a)
                }
            })
    }
}

fn collect_ids(collaborators: &[AgentId]) -> Result<Vec<AgentId>> {
    if collaborators.is_empty() {
        return input_err("collaborator set is empty");
    }
    let set: BTreeSet<AgentId> = collaborators.iter().copied().collect();
    if set.len() != collaborators.len() {
        return input_err("collaborator ids must be distinct");
    }
    Ok(set.into_iter().collect())
}

struct Run<'a, O: GroupOracle + ?Sized> {
    oracle: &'a mut O,
    rng: Option<SimRng>,
    quota: usize,
    record: bool,
    result: PasacResult,
}

impl<O: GroupOracle + ?Sized> Run<'_, O> {
    fn done(&self) -> bool {
        self.result.benign.len() >= self.quota
    }

    fn halves(&mut self, subset: &[AgentId]) -> (Vec<AgentId>, Vec<AgentId>) {
        let mut v = subset.to_vec();
        if let Some(rng) = self.rng.as_mut() {
            v.shuffle(rng);
        }
        let right = v.split_off(v.len().div_ceil(2));
        (v, right)
    }

    fn query(&mut self, subset: &[AgentId], depth: u32) -> Result<Label> {
        let verdict = self.oracle.test(subset)?;
        self.result.queries += 1;
        if self.record {
            let mut s = subset.to_vec();
            s.sort_unstable();
            self.result.trace.push(TraceRecord { subset: s, verdict: verdict.label, depth });
        }
        Ok(verdict.label)
    }

    /// Queries `subset` and resolves it. Returns false once the quota aborts work.
    fn visit(&mut self, subset: &[AgentId], depth: u32) -> Result<bool> {
        if self.done() {
            return Ok(false);
        }
        match self.query(subset, depth)? {
            Label::Benign => {
                self.result.benign.extend(subset.iter().copied());
                Ok(true)
            }
            Label::Contam if subset.len() == 1 => {
                self.result.malicious.insert(subset[0]);
                Ok(true)
            }
            Label::Contam => self.split(subset, depth + 1),
        }
    }

    fn split(&mut self, subset: &[AgentId], depth: u32) -> Result<bool> {
        let (left, right) = self.halves(subset);
        for half in [left, right] {
            if half.is_empty() {
                continue;
            }
            if !self.visit(&half, depth)? {
                return Ok(false);
            }
        }
        Ok(true)
    }
}

/// Isolates malicious collaborators by recursive halving. A BENIGN verdict
/// accepts the whole group; a CONTAM verdict splits it further until singletons.
pub fn pasac_run<O: GroupOracle + ?Sized>(
    collaborators: &[AgentId],
    oracle: &mut O,
    config: &PasacConfig,
) -> Result<PasacResult> {
    let ids = collect_ids(collaborators)?;
    config.validate(ids.len())?;
    let mut run = Run {
        oracle,
        rng: match config.split {
            SplitMode::Shuffled(seed) => Some(rng_from_seed(seed)),
            SplitMode::InOrder => None,
        },
        quota: config.n_max.unwrap_or(usize::MAX),
        record: config.record_trace,
        result: PasacResult::default(),
    };
    let completed = if config.query_root { run.visit(&ids, 0)? } else { run.split(&ids, 1)? };
    run.result.stopped_early = !completed;
    Ok(run.result)
}

/// `ceil(log2 n)`, floored at 1 so a single collaborator still costs one level.
pub fn tree_levels(n: usize) -> u64 {
    if n <= 1 {
        1
    } else {
        u64::from(usize::BITS - (n - 1).leading_zeros())
    }
}

/// Worst-case query count `2 m L + (n - m)` with `L = max(1, ceil(log2 n))`.
pub fn query_bound(n: usize, m: usize) -> Result<u64> {
    if n == 0 {
        return input_err("n must be at least 1");
    }
    if m > n {
        return input_err(format!("m = {m} exceeds n = {n}"));
    }
    Ok(2 * m as u64 * tree_levels(n) + (n - m) as u64)
}

/// Misclassification bound `min(1, (alpha + beta) m L)`.
pub fn error_bound(alpha: f64, beta: f64, n: usize, m: usize) -> Result<f64> {
    if !((0.0..1.0).contains(&alpha) && (0.0..1.0).contains(&beta)) {
        return input_err("alpha and beta must lie in [0, 1)");
    }
    if n == 0 || m > n {
        return input_err(format!("invalid population n = {n}, m = {m}"));
    }
    if m == 0 {
        return Ok(0.0);
    }
    Ok(((alpha + beta) * m as f64 * tree_levels(n) as f64).min(1.0))
}

/// Queries every collaborator on its own, once.
pub fn linear_scan<O: GroupOracle + ?Sized>(collaborators: &[AgentId], oracle: &mut O) -> Result<PasacResult> {
    let ids = collect_ids(collaborators)?;
    let mut result = PasacResult::default();
    for id in ids {
        let verdict = oracle.test(&[id])?;
        result.queries += 1;
        result.trace.push(TraceRecord { subset: vec![id], verdict: verdict.label, depth: 1 });
        match verdict.label {
            Label::Benign => result.benign.insert(id),
            Label::Contam => result.malicious.insert(id),
        };
    }
    Ok(result)
}

/// Random-consensus baseline with a known attacker count: draw uniformly random
/// subsets of size `n - assumed_m` until one tests BENIGN. On success the subset
/// is the benign set and everyone else stays unclassified; on failure the result
/// is empty with `exhausted` set.
pub fn random_consensus<O: GroupOracle + ?Sized>(
    collaborators: &[AgentId],
    oracle: &mut O,
    assumed_m: usize,
    max_attempts: u64,
    seed: u64,
) -> Result<PasacResult> {
    let ids = collect_ids(collaborators)?;
    if assumed_m >= ids.len() {
        return input_err(format!("assumed_m = {assumed_m} leaves no collaborator to sample"));
    }
    if max_attempts == 0 {
        return config_err("max_attempts must be positive");
    }
    let k = ids.len() - assumed_m;
    let mut rng = rng_from_seed(seed);
    let mut result = PasacResult::default();
    let mut pool = ids;
    for _ in 0..max_attempts {
        let (chosen, _) = pool.partial_shuffle(&mut rng, k);
        let mut subset = chosen.to_vec();
        subset.sort_unstable();
        let verdict = oracle.test(&subset)?;
        result.queries += 1;
        let ok = verdict.label == Label::Benign;
        result.trace.push(TraceRecord { subset: subset.clone(), verdict: verdict.label, depth: 1 });
        if ok {
            result.benign = subset.into_iter().collect();
            return Ok(result);
        }
    }
    result.exhausted = true;
    Ok(result)
}
