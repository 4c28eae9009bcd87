//! Frame-by-frame simulation: observe, attack, fuse, score and isolate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::consistency::CCLossParams;
use crate::error::{config_err, Result};
use crate::oracle::{AgentId, AttackPropagation, CclossOracle, LabelSource, Member, Threshold};
use crate::pasac::{pasac_run, PasacConfig, SplitMode};
use crate::rng::derive_seed;
use crate::sim::{gen_scene, observe, AgentRole, SimConfig, TaskMode};
use crate::threshold::{ThresholdParams, ThresholdState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    Fixed,
    #[default]
    Adaptive,
}

fn half() -> f64 {
    0.5
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdConfig {
    #[serde(default)]
    pub mode: ThresholdMode,
    #[serde(default = "half")]
    pub initial_epsilon: f64,
    #[serde(default)]
    pub params: ThresholdParams,
    #[serde(default)]
    pub labels: LabelSource,
}

impl Default for ThresholdConfig {
    fn default() -> Self {
        Self {
            mode: ThresholdMode::Adaptive,
            initial_epsilon: half(),
            params: ThresholdParams::default(),
            labels: LabelSource::SelfTraining,
        }
    }
}

impl ThresholdConfig {
    pub fn build(&self) -> Result<Threshold> {
        if !(0.0..=1.0).contains(&self.initial_epsilon) {
            return config_err(format!("initial_epsilon {} outside [0, 1]", self.initial_epsilon));
        }
        Ok(match self.mode {
            ThresholdMode::Fixed => Threshold::Fixed(self.initial_epsilon),
            ThresholdMode::Adaptive => Threshold::Adaptive {
                state: ThresholdState::new(self.initial_epsilon, self.params)?,
                labels: self.labels,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eConfig {
    pub scene: SimConfig,
    pub frames: usize,
    #[serde(default)]
    pub task: TaskMode,
    /// Early-stop quota on accepted collaborators; `None` classifies everyone.
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub query_root: bool,
    #[serde(default)]
    pub threshold: ThresholdConfig,
    #[serde(default)]
    pub ccloss: CCLossParams,
    #[serde(default)]
    pub attack_propagation: AttackPropagation,
}

impl E2eConfig {
    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        if self.scene.agents.len() < 2 {
            return config_err("need an ego agent and at least one collaborator");
        }
        if self.frames == 0 {
            return config_err("frames must be at least 1");
        }
        if self.task == TaskMode::Segmentation && self.scene.seg.is_none() {
            return config_err("segmentation task needs a `seg` grid in the scene");
        }
        self.ccloss.validate()?;
        self.threshold.build()?;
        PasacConfig { n_max: self.n_max, ..PasacConfig::default() }.validate(self.scene.agents.len() - 1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameResult {
    pub frame: usize,
    pub benign_found: BTreeSet<AgentId>,
    pub malicious_found: BTreeSet<AgentId>,
    pub queries: u64,
    /// Working threshold after the frame.
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct E2eSummary {
    pub frames: usize,
    pub attackers: Vec<AgentId>,
    /// Flagged agents that are truly malicious, over all flags. 1.0 when nothing was flagged.
    pub precision: f64,
    /// Attacker flags over attacker-frames. 1.0 when there are no attackers.
    pub recall: f64,
    /// Frames in which every attacker was flagged.
    pub frames_all_attackers_flagged: usize,
    /// Frames in which no benign collaborator was flagged.
    pub frames_no_false_flag: usize,
    pub total_queries: u64,
    pub max_queries: u64,
    pub final_eps: f64,
}

impl E2eSummary {
    pub fn detection_rate(&self) -> f64 {
        self.frames_all_attackers_flagged as f64 / self.frames as f64
    }

    pub fn clean_rate(&self) -> f64 {
        self.frames_no_false_flag as f64 / self.frames as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct E2eReport {
    pub frames: Vec<FrameResult>,
    pub summary: E2eSummary,
}

pub fn run_e2e(config: &E2eConfig, master_seed: u64) -> Result<E2eReport> {
    config.validate()?;
    let agents = config.scene.agent_models()?;
    let collaborators: Vec<AgentId> = agents[1..].iter().map(|a| a.id).collect();
    let attackers: BTreeSet<AgentId> = agents.iter().filter(|a| a.is_malicious()).map(|a| a.id).collect();
    let mut threshold = config.threshold.build()?;
    let mut frames = Vec::with_capacity(config.frames);

    for f in 0..config.frames {
        let fs = derive_seed(master_seed, &[f as u64]);
        let scene = gen_scene(&config.scene, derive_seed(fs, &[0]))?;
        let ego = observe(&scene, &agents[0], config.task, derive_seed(fs, &[1, 0]))?;
        let mut members = BTreeMap::new();
        for a in &agents[1..] {
            let output = observe(&scene, a, config.task, derive_seed(fs, &[1, a.id as u64]))?;
            let attack = match a.role {
                AgentRole::Malicious(spec) => Some(spec),
                AgentRole::Benign => None,
            };
            members.insert(a.id, Member { output, attack });
        }
        let mut oracle = CclossOracle::new(
            ego,
            members,
            config.attack_propagation,
            config.ccloss,
            config.scene.fusion.merge_iou,
            threshold,
            derive_seed(fs, &[2]),
        )?;
        let pcfg = PasacConfig {
            n_max: config.n_max,
            split: SplitMode::Shuffled(derive_seed(fs, &[3])),
            query_root: config.query_root,
            record_trace: false,
        };
        let r = pasac_run(&collaborators, &mut oracle, &pcfg)?;
        threshold = oracle.into_threshold();
        frames.push(FrameResult {
            frame: f,
            benign_found: r.benign,
            malicious_found: r.malicious,
            queries: r.queries,
            eps: threshold.epsilon(),
        });
    }

    let summary = summarize_frames(&frames, &attackers);
    Ok(E2eReport { frames, summary })
}

fn summarize_frames(frames: &[FrameResult], attackers: &BTreeSet<AgentId>) -> E2eSummary {
    let mut tp = 0usize;
    let mut flagged = 0usize;
    let mut all_found = 0usize;
    let mut clean = 0usize;
    for fr in frames {
        let hits = fr.malicious_found.intersection(attackers).count();
        tp += hits;
        flagged += fr.malicious_found.len();
        all_found += usize::from(hits == attackers.len());
        clean += usize::from(hits == fr.malicious_found.len());
    }
    let positives = attackers.len() * frames.len();
    E2eSummary {
        frames: frames.len(),
        attackers: attackers.iter().copied().collect(),
        precision: if flagged == 0 { 1.0 } else { tp as f64 / flagged as f64 },
        recall: if positives == 0 { 1.0 } else { tp as f64 / positives as f64 },
        frames_all_attackers_flagged: all_found,
        frames_no_false_flag: clean,
        total_queries: frames.iter().map(|f| f.queries).sum(),
        max_queries: frames.iter().map(|f| f.queries).max().unwrap_or(0),
        final_eps: frames.last().map_or(0.0, |f| f.eps),
    }
}

fn join(ids: &BTreeSet<AgentId>) -> String {
    ids.iter().map(|i| i.to_string()).collect::<Vec<_>>().join(";")
}

/// Per-frame CSV: `frame,benign_found,malicious_found,queries,eps` with
/// `;`-separated id lists.
pub fn frames_csv(frames: &[FrameResult]) -> String {
    let mut out = String::from("frame,benign_found,malicious_found,queries,eps\n");
    for f in frames {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            f.frame,
            join(&f.benign_found),
            join(&f.malicious_found),
            f.queries,
            f.eps
        ));
    }
    out
}
