//! Scene generation, agent sensor models, output-space attacks and the
//! late-fusion surrogate.

mod attack;
mod config;
mod fusion;
mod output;
mod scene;

pub use attack::corrupt;
pub use config::{
    AgentConfig, AgentModel, AgentRole, AttackSpec, FusionConfig, ObjectConfig, Pose, RoleName, SegConfig,
    SimConfig, WorldConfig,
};
pub use fusion::{fuse_detections, fuse_outputs, fuse_segmaps};
pub use output::{BoxProposal, DetectionSet, PerceptionOutput, SegGrid};
pub use scene::{gen_scene, observe, GroundTruthObject, LabelGrid, Scene, TaskMode, SEG_PROB_NOISE, SEG_TRUE_MASS};
