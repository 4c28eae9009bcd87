//! JSON-facing scene and agent configuration.

use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldConfig {
    pub width_m: f64,
    pub height_m: f64,
}

/// Object population. `min_extent_m` / `max_extent_m` bound the half-extents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObjectConfig {
    pub count: usize,
    pub class_count: usize,
    pub min_extent_m: f64,
    pub max_extent_m: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegConfig {
    pub width_px: usize,
    pub height_px: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
}

/// Output-space attack applied by a malicious collaborator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AttackSpec {
    /// Inject `count` fabricated boxes.
    Spoof { count: usize },
    /// Drop `fraction` of the boxes.
    Remove { fraction: f64 },
    /// Translate every box by `offset_m` in a random direction.
    Shift { offset_m: f64 },
    /// Redistribute class probabilities on `fraction` of the pixels.
    SegFlip { fraction: f64 },
}

impl AttackSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            AttackSpec::Spoof { count } if count < 1 => config_err("spoof count must be >= 1"),
            AttackSpec::Remove { fraction } | AttackSpec::SegFlip { fraction }
                if !(0.0..=1.0).contains(&fraction) =>
            {
                config_err(format!("attack fraction {fraction} outside [0, 1]"))
            }
            AttackSpec::Shift { offset_m } if !(offset_m >= 0.0 && offset_m.is_finite()) => {
                config_err(format!("shift offset {offset_m} must be finite and >= 0"))
            }
            _ => Ok(()),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttackSpec::Spoof { .. } => "spoof",
            AttackSpec::Remove { .. } => "remove",
            AttackSpec::Shift { .. } => "shift",
            AttackSpec::SegFlip { .. } => "seg_flip",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleName {
    Benign,
    Malicious,
}

/// One entry of the `agents` array. The first entry is the ego agent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentConfig {
    pub pose: Pose,
    pub fov_radius: f64,
    pub p_detect: f64,
    pub pos_noise_sigma: f64,
    pub false_positive_rate: f64,
    pub role: RoleName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attack: Option<AttackSpec>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    #[serde(default = "default_merge_iou")]
    pub merge_iou: f64,
}

impl Default for FusionConfig {
    fn default() -> Self {
        Self { merge_iou: default_merge_iou() }
    }
}

fn default_merge_iou() -> f64 {
    0.5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub world: WorldConfig,
    pub objects: ObjectConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seg: Option<SegConfig>,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub fusion: FusionConfig,
}

/// Whether an agent reports honestly or applies an attack.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AgentRole {
    Benign,
    Malicious(AttackSpec),
}

/// Sensor model of one agent. Agent 0 is the ego.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentModel {
    pub id: usize,
    pub pose: Pose,
    pub fov_radius: f64,
    pub p_detect: f64,
    pub pos_noise_sigma: f64,
    pub false_positive_rate: f64,
    pub role: AgentRole,
}

impl AgentModel {
    pub fn benign(id: usize, x: f64, y: f64, fov_radius: f64) -> Self {
        Self {
            id,
            pose: Pose { x, y },
            fov_radius,
            p_detect: 1.0,
            pos_noise_sigma: 0.0,
            false_positive_rate: 0.0,
            role: AgentRole::Benign,
        }
    }

    pub fn is_malicious(&self) -> bool {
        matches!(self.role, AgentRole::Malicious(_))
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_radius > 0.0 && self.fov_radius.is_finite()) {
            return config_err(format!("agent {}: fov_radius must be > 0", self.id));
        }
        if !(0.0..=1.0).contains(&self.p_detect) {
            return config_err(format!("agent {}: p_detect must lie in [0, 1]", self.id));
        }
        if !(self.pos_noise_sigma >= 0.0 && self.pos_noise_sigma.is_finite()) {
            return config_err(format!("agent {}: pos_noise_sigma must be >= 0", self.id));
        }
        if !(self.false_positive_rate >= 0.0 && self.false_positive_rate.is_finite()) {
            return config_err(format!("agent {}: false_positive_rate must be >= 0", self.id));
        }
        if let AgentRole::Malicious(spec) = self.role {
            if self.id == 0 {
                return config_err("the ego agent (index 0) must be benign");
            }
            spec.validate()?;
        }
        Ok(())
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        let w = &self.world;
        if !(w.width_m > 0.0 && w.height_m > 0.0 && w.width_m.is_finite() && w.height_m.is_finite()) {
            return config_err("world extent must be positive and finite");
        }
        let o = &self.objects;
        if o.class_count == 0 {
            return config_err("class_count must be >= 1");
        }
        if !(o.min_extent_m > 0.0 && o.min_extent_m <= o.max_extent_m && o.max_extent_m.is_finite()) {
            return config_err("object extents must satisfy 0 < min_extent_m <= max_extent_m");
        }
        if let Some(seg) = &self.seg {
            if seg.width_px == 0 || seg.height_px == 0 {
                return config_err("segmentation grid must be at least 1x1");
            }
        }
        if !(self.fusion.merge_iou > 0.0 && self.fusion.merge_iou <= 1.0) {
            return config_err("fusion.merge_iou must lie in (0, 1]");
        }
        self.agent_models().map(|_| ())
    }

    /// Convert the `agents` array into validated [`AgentModel`]s, ego first.
    pub fn agent_models(&self) -> Result<Vec<AgentModel>> {
        self.agents
            .iter()
            .enumerate()
            .map(|(id, a)| {
                let role = match (a.role, a.attack) {
                    (RoleName::Benign, None) => AgentRole::Benign,
                    (RoleName::Benign, Some(_)) => {
                        return config_err(format!("agent {id}: benign agents cannot carry an attack"))
                    }
                    (RoleName::Malicious, Some(spec)) => AgentRole::Malicious(spec),
                    (RoleName::Malicious, None) => {
                        return config_err(format!("agent {id}: malicious agents need an attack"))
                    }
                };
                let model = AgentModel {
                    id,
                    pose: a.pose,
                    fov_radius: a.fov_radius,
                    p_detect: a.p_detect,
                    pos_noise_sigma: a.pos_noise_sigma,
                    false_positive_rate: a.false_positive_rate,
                    role,
                };
                model.validate()?;
                Ok(model)
            })
            .collect()
    }
}
