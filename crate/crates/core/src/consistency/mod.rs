//! Collaborative consistency scores between the ego-only output and a fused
//! output. Both scores live in `[0, 1]`; 1 means full agreement.

mod assignment;

pub use assignment::{assign_min_cost, MatchResult};

use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};
use crate::sim::{BoxProposal, DetectionSet, PerceptionOutput, SegGrid};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CCLossParams {
    /// Weight of the localisation term against the posterior term.
    pub phi: f64,
    /// Stabiliser in the inverse-frequency class weights of the segmentation score.
    pub seg_epsilon: f64,
    /// Average the detection score over both directions so that fused-only
    /// boxes are penalised too. Off by default.
    pub symmetric_det: bool,
}

impl Default for CCLossParams {
    fn default() -> Self {
        Self { phi: 1.0, seg_epsilon: 1e-6, symmetric_det: false }
    }
}

impl CCLossParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.phi >= 0.0 && self.phi.is_finite()) {
            return input_err(format!("phi must be finite and >= 0, got {}", self.phi));
        }
        if !(self.seg_epsilon > 0.0 && self.seg_epsilon.is_finite()) {
            return input_err(format!("seg_epsilon must be > 0, got {}", self.seg_epsilon));
        }
        Ok(())
    }
}

/// Intersection over union of two axis-aligned boxes.
pub fn iou(a: &BoxProposal, b: &BoxProposal) -> f64 {
    let iw = a.x_max.min(b.x_max) - a.x_min.max(b.x_min);
    let ih = a.y_max.min(b.y_max) - a.y_min.max(b.y_min);
    if iw <= 0.0 || ih <= 0.0 {
        return 0.0;
    }
    let inter = iw * ih;
    let union = a.area() + b.area() - inter;
    (inter / union).clamp(0.0, 1.0)
}

/// Per-box discrepancy for class `c`:
/// `(max(p_c - p'_c, 0) + phi * (1 - IoU)) / (1 + phi)`.
///
/// `None` stands for the empty padding box, for which the loss is
/// `(p_c + phi) / (1 + phi)`.
pub fn box_loss(y: &BoxProposal, y_prime: Option<&BoxProposal>, c: usize, phi: f64) -> Result<f64> {
    if c >= y.posteriors.len() {
        return input_err(format!("class {c} out of range for {} classes", y.posteriors.len()));
    }
    if !(phi >= 0.0 && phi.is_finite()) {
        return input_err(format!("phi must be finite and >= 0, got {phi}"));
    }
    let p = y.posteriors[c];
    let raw = match y_prime {
        None => p + phi,
        Some(other) => {
            let Some(&q) = other.posteriors.get(c) else {
                return input_err(format!("class {c} out of range for the second box"));
            };
            (p - q).max(0.0) + phi * (1.0 - iou(y, other))
        }
    };
    Ok(raw / (1.0 + phi))
}

/// Detection consistency score.
///
/// For every class predicted by at least one ego box, ego boxes of that class
/// are matched one-to-one to fused boxes of the same class (padded with empty
/// boxes) at minimum total [`box_loss`]; the score is one minus the mean, over
/// those classes, of the per-class average loss. An empty ego set scores 1.
pub fn ccloss_det(ego: &DetectionSet, fused: &DetectionSet, params: &CCLossParams) -> Result<f64> {
    params.validate()?;
    if ego.class_count != fused.class_count {
        return input_err(format!(
            "class count mismatch: {} vs {}",
            ego.class_count, fused.class_count
        ));
    }
    let forward = one_sided_det(ego, fused, params.phi)?;
    if params.symmetric_det {
        let backward = one_sided_det(fused, ego, params.phi)?;
        return Ok((0.5 * (forward + backward)).clamp(0.0, 1.0));
    }
    Ok(forward)
}

fn one_sided_det(ego: &DetectionSet, fused: &DetectionSet, phi: f64) -> Result<f64> {
    let classes = ego.class_count;
    let mut by_class_ego: Vec<Vec<&BoxProposal>> = vec![Vec::new(); classes];
    let mut by_class_fused: Vec<Vec<&BoxProposal>> = vec![Vec::new(); classes];
    for b in &ego.boxes {
        by_class_ego[b.predicted_class()].push(b);
    }
    for b in &fused.boxes {
        by_class_fused[b.predicted_class()].push(b);
    }

    let mut loss_sum = 0.0;
    let mut active = 0usize;
    for c in 0..classes {
        let rows = &by_class_ego[c];
        if rows.is_empty() {
            continue;
        }
        let cands = &by_class_fused[c];
        let dummies = rows.len().saturating_sub(cands.len());
        let matrix = rows
            .iter()
            .map(|y| {
                let mut row = Vec::with_capacity(cands.len() + dummies);
                for y2 in cands {
                    row.push(box_loss(y, Some(y2), c, phi)?);
                }
                let empty = box_loss(y, None, c, phi)?;
                row.extend(std::iter::repeat_n(empty, dummies));
                Ok(row)
            })
            .collect::<Result<Vec<_>>>()?;
        let best = assign_min_cost(&matrix)?;
        loss_sum += best.total_cost / rows.len() as f64;
        active += 1;
    }
    if active == 0 {
        return Ok(1.0);
    }
    Ok((1.0 - loss_sum / active as f64).clamp(0.0, 1.0))
}

/// Segmentation consistency score: a class-weighted soft Dice overlap,
/// `2 * sum_j w_j sum_i p0_ij pf_ij / sum_j w_j sum_i (p0_ij + pf_ij)` with
/// `w_j = 1 / (mass_j + seg_epsilon)^2`. Symmetric in its arguments. Two grids
/// without any probability mass score 1.
pub fn ccloss_seg(ego: &SegGrid, fused: &SegGrid, params: &CCLossParams) -> Result<f64> {
    params.validate()?;
    if !ego.same_shape(fused) {
        return input_err(format!(
            "grid shape mismatch: {}x{}x{} vs {}x{}x{}",
            ego.width, ego.height, ego.classes, fused.width, fused.height, fused.classes
        ));
    }
    let c = ego.classes;
    let mut overlap = vec![0.0; c];
    let mut mass = vec![0.0; c];
    for (i, (a, b)) in ego.probs.iter().zip(&fused.probs).enumerate() {
        let j = i % c;
        overlap[j] += a * b;
        mass[j] += a + b;
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for j in 0..c {
        let w = 1.0 / (mass[j] + params.seg_epsilon).powi(2);
        num += w * overlap[j];
        den += w * mass[j];
    }
    if den == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * num / den).clamp(0.0, 1.0))
}

/// Dispatch on the output variant.
pub fn ccloss(ego: &PerceptionOutput, fused: &PerceptionOutput, params: &CCLossParams) -> Result<f64> {
    match (ego, fused) {
        (PerceptionOutput::Detection(a), PerceptionOutput::Detection(b)) => ccloss_det(a, b, params),
        (PerceptionOutput::Segmentation(a), PerceptionOutput::Segmentation(b)) => ccloss_seg(a, b, params),
        _ => input_err("cannot score a detection output against a segmentation output"),
    }
}
