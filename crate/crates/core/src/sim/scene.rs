use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use super::config::{AgentModel, SimConfig, WorldConfig};
use super::output::{BoxProposal, DetectionSet, PerceptionOutput, SegGrid};
use crate::error::{config_err, Result};
use crate::rng::rng_from_seed;

/// Per-pixel Gaussian noise added to segmentation observations.
pub const SEG_PROB_NOISE: f64 = 0.05;
/// Probability mass placed on the true class of an observed pixel.
pub const SEG_TRUE_MASS: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthObject {
    pub x: f64,
    pub y: f64,
    pub half_w: f64,
    pub half_h: f64,
    pub class: usize,
}

/// Row-major grid of class labels covering the world rectangle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelGrid {
    pub width: usize,
    pub height: usize,
    pub labels: Vec<usize>,
}

impl LabelGrid {
    pub fn label(&self, x: usize, y: usize) -> usize {
        self.labels[y * self.width + x]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub objects: Vec<GroundTruthObject>,
    pub seg_truth: Option<LabelGrid>,
    pub world: WorldConfig,
    pub class_count: usize,
    pub half_extent_range: (f64, f64),
}

/// Which kind of perception output an agent produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum TaskMode {
    #[default]
    Detection,
    Segmentation,
}

impl Scene {
    /// World coordinates of the centre of pixel `(px, py)`.
    pub fn pixel_center(&self, grid_w: usize, grid_h: usize, px: usize, py: usize) -> (f64, f64) {
        (
            (px as f64 + 0.5) * self.world.width_m / grid_w as f64,
            (py as f64 + 0.5) * self.world.height_m / grid_h as f64,
        )
    }
}

/// Sample a ground-truth scene. Objects are uniform over the world rectangle;
/// the optional label grid rasterises them by pixel centre, with class 0
/// doubling as background.
pub fn gen_scene(config: &SimConfig, seed: u64) -> Result<Scene> {
    config.validate()?;
    let mut rng = rng_from_seed(seed);
    let o = config.objects;
    let objects: Vec<GroundTruthObject> = (0..o.count)
        .map(|_| GroundTruthObject {
            x: rng.random_range(0.0..=config.world.width_m),
            y: rng.random_range(0.0..=config.world.height_m),
            half_w: rng.random_range(o.min_extent_m..=o.max_extent_m),
            half_h: rng.random_range(o.min_extent_m..=o.max_extent_m),
            class: rng.random_range(0..o.class_count),
        })
        .collect();

    let mut scene = Scene {
        objects,
        seg_truth: None,
        world: config.world,
        class_count: o.class_count,
        half_extent_range: (o.min_extent_m, o.max_extent_m),
    };
    if let Some(seg) = config.seg {
        let mut labels = vec![0; seg.width_px * seg.height_px];
        for py in 0..seg.height_px {
            for px in 0..seg.width_px {
                let (cx, cy) = scene.pixel_center(seg.width_px, seg.height_px, px, py);
                if let Some(obj) = scene
                    .objects
                    .iter()
                    .find(|ob| (cx - ob.x).abs() <= ob.half_w && (cy - ob.y).abs() <= ob.half_h)
                {
                    labels[py * seg.width_px + px] = obj.class;
                }
            }
        }
        scene.seg_truth = Some(LabelGrid { width: seg.width_px, height: seg.height_px, labels });
    }
    Ok(scene)
}

/// Noisy, range-limited observation of `scene` by `agent`.
///
/// Detection: each object whose centre lies within `fov_radius` is detected
/// with probability `p_detect`, its centre jittered by N(0, sigma^2), with a
/// one-hot posterior on the true class. Poisson(`false_positive_rate`) clutter
/// boxes are scattered uniformly over the field of view.
///
/// Segmentation: pixels inside the field of view carry a smoothed one-hot
/// distribution plus noise; pixels outside carry no mass.
///
/// The agent's role is ignored; attacks are applied separately by
/// [`super::corrupt`].
pub fn observe(scene: &Scene, agent: &AgentModel, task: TaskMode, seed: u64) -> Result<PerceptionOutput> {
    agent.validate()?;
    let mut rng = rng_from_seed(seed);
    match task {
        TaskMode::Detection => observe_detections(scene, agent, &mut rng).map(PerceptionOutput::Detection),
        TaskMode::Segmentation => {
            let Some(truth) = &scene.seg_truth else {
                return config_err("segmentation observation requested but the scene has no label grid");
            };
            Ok(PerceptionOutput::Segmentation(observe_grid(scene, truth, agent, &mut rng)))
        }
    }
}

fn in_fov(agent: &AgentModel, x: f64, y: f64) -> bool {
    let (dx, dy) = (x - agent.pose.x, y - agent.pose.y);
    dx * dx + dy * dy <= agent.fov_radius * agent.fov_radius
}

fn observe_detections(scene: &Scene, agent: &AgentModel, rng: &mut impl Rng) -> Result<DetectionSet> {
    let c = scene.class_count;
    let jitter = Normal::new(0.0, agent.pos_noise_sigma.max(0.0))
        .map_err(|e| crate::Error::Config(format!("bad noise sigma: {e}")))?;
    let mut boxes = Vec::new();
    for obj in &scene.objects {
        if !in_fov(agent, obj.x, obj.y) {
            continue;
        }
        if rng.random::<f64>() >= agent.p_detect {
            continue;
        }
        let (nx, ny) = if agent.pos_noise_sigma > 0.0 {
            (jitter.sample(rng), jitter.sample(rng))
        } else {
            (0.0, 0.0)
        };
        let mut post = vec![0.0; c];
        post[obj.class] = 1.0;
        boxes.push(BoxProposal::centered(obj.x + nx, obj.y + ny, obj.half_w, obj.half_h, post)?);
    }

    if agent.false_positive_rate > 0.0 {
        let clutter = Poisson::new(agent.false_positive_rate)
            .map_err(|e| crate::Error::Config(format!("bad false_positive_rate: {e}")))?;
        let k = clutter.sample(rng) as usize;
        let (lo, hi) = scene.half_extent_range;
        for _ in 0..k {
            let r = agent.fov_radius * rng.random::<f64>().sqrt();
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let hw = rng.random_range(lo..=hi);
            let hh = rng.random_range(lo..=hi);
            let mut post = vec![0.0; c];
            post[rng.random_range(0..c)] = rng.random_range(0.5..1.0);
            boxes.push(BoxProposal::centered(
                agent.pose.x + r * theta.cos(),
                agent.pose.y + r * theta.sin(),
                hw,
                hh,
                post,
            )?);
        }
    }
    Ok(DetectionSet { class_count: c, boxes })
}

fn observe_grid(scene: &Scene, truth: &LabelGrid, agent: &AgentModel, rng: &mut impl Rng) -> SegGrid {
    let c = scene.class_count;
    let mut grid = SegGrid::zeros(truth.width, truth.height, c);
    let noise = Normal::new(0.0, SEG_PROB_NOISE).expect("constant sigma");
    let off_mass = if c > 1 { (1.0 - SEG_TRUE_MASS) / (c - 1) as f64 } else { 0.0 };
    for py in 0..truth.height {
        for px in 0..truth.width {
            let (cx, cy) = scene.pixel_center(truth.width, truth.height, px, py);
            if !in_fov(agent, cx, cy) {
                continue;
            }
            let label = truth.label(px, py);
            for j in 0..c {
                let base = if j == label { SEG_TRUE_MASS } else { off_mass };
                grid.set(px, py, j, (base + noise.sample(rng)).clamp(0.0, 1.0));
            }
        }
    }
    grid
}
