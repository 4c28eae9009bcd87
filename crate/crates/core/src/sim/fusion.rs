//! Late-fusion surrogate for the learned aggregator.
//!
//! Both operators are invariant to the order of the collaborator outputs,
//! bit for bit: collaborator boxes are processed in a canonical sort order and
//! every floating-point sum runs over a canonically ordered sequence.

use std::cmp::Ordering;

use super::output::{BoxProposal, DetectionSet, PerceptionOutput, SegGrid};
use crate::consistency::iou;
use crate::error::{config_err, Result};

fn canonical_cmp(a: &BoxProposal, b: &BoxProposal) -> Ordering {
    b.max_posterior()
        .total_cmp(&a.max_posterior())
        .then(a.x_min.total_cmp(&b.x_min))
        .then(a.y_min.total_cmp(&b.y_min))
        .then(a.x_max.total_cmp(&b.x_max))
        .then(a.y_max.total_cmp(&b.y_max))
        .then_with(|| {
            a.posteriors
                .iter()
                .zip(&b.posteriors)
                .map(|(x, y)| x.total_cmp(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        })
}

struct Cluster<'a> {
    seed: &'a BoxProposal,
    members: Vec<&'a BoxProposal>,
}

impl Cluster<'_> {
    fn merged(mut self) -> BoxProposal {
        if self.members.len() == 1 {
            return self.seed.clone();
        }
        self.members.sort_by(|a, b| canonical_cmp(a, b));
        let mut weights: Vec<f64> = self.members.iter().map(|b| b.max_posterior()).collect();
        if weights.iter().all(|&w| w == 0.0) {
            weights.iter_mut().for_each(|w| *w = 1.0);
        }
        let total: f64 = weights.iter().sum();
        let s = self.seed;
        // Offsets from the seed keep a cluster of identical boxes bit-exact.
        let corner = |get: fn(&BoxProposal) -> f64| {
            let acc: f64 = self.members.iter().zip(&weights).map(|(m, w)| w * (get(m) - get(s))).sum();
            get(s) + acc / total
        };
        let classes = s.posteriors.len();
        let posteriors = (0..classes)
            .map(|c| self.members.iter().map(|m| m.posteriors[c]).fold(0.0, f64::max))
            .collect();
        let merged = BoxProposal {
            x_min: corner(|b| b.x_min),
            y_min: corner(|b| b.y_min),
            x_max: corner(|b| b.x_max),
            y_max: corner(|b| b.y_max),
            posteriors,
        };
        if merged.x_min < merged.x_max && merged.y_min < merged.y_max {
            merged
        } else {
            BoxProposal { posteriors: merged.posteriors, ..s.clone() }
        }
    }
}

/// Union of the ego boxes and all collaborator boxes, greedily merging
/// collaborator boxes into the cluster whose seed overlaps them most
/// (IoU >= `merge_iou`). Ego boxes always seed their own cluster; unmatched
/// collaborator boxes seed new ones.
///
/// A merged cluster keeps the per-class maximum posterior and the
/// posterior-weighted average of its members' corners.
pub fn fuse_detections(ego: &DetectionSet, others: &[&DetectionSet], merge_iou: f64) -> Result<DetectionSet> {
    if !(merge_iou > 0.0 && merge_iou <= 1.0) {
        return config_err(format!("merge_iou {merge_iou} outside (0, 1]"));
    }
    if let Some(bad) = others.iter().find(|o| o.class_count != ego.class_count) {
        return config_err(format!(
            "class count mismatch: ego has {}, collaborator has {}",
            ego.class_count, bad.class_count
        ));
    }
    let mut clusters: Vec<Cluster> = ego.boxes.iter().map(|b| Cluster { seed: b, members: vec![b] }).collect();

    let mut pool: Vec<&BoxProposal> = others.iter().flat_map(|o| o.boxes.iter()).collect();
    pool.sort_by(|a, b| canonical_cmp(a, b));
    for b in pool {
        let mut best: Option<(usize, f64)> = None;
        for (i, cl) in clusters.iter().enumerate() {
            let overlap = iou(b, cl.seed);
            if overlap >= merge_iou && best.is_none_or(|(_, o)| overlap > o) {
                best = Some((i, overlap));
            }
        }
        match best {
            Some((i, _)) => clusters[i].members.push(b),
            None => clusters.push(Cluster { seed: b, members: vec![b] }),
        }
    }
    Ok(DetectionSet { class_count: ego.class_count, boxes: clusters.into_iter().map(Cluster::merged).collect() })
}

/// Element-wise arithmetic mean of the ego grid and all collaborator grids.
pub fn fuse_segmaps(ego: &SegGrid, others: &[&SegGrid]) -> Result<SegGrid> {
    if let Some(bad) = others.iter().find(|o| !o.same_shape(ego)) {
        return config_err(format!(
            "grid shape mismatch: ego {}x{}x{}, collaborator {}x{}x{}",
            ego.width, ego.height, ego.classes, bad.width, bad.height, bad.classes
        ));
    }
    if others.is_empty() {
        return Ok(ego.clone());
    }
    let k = (others.len() + 1) as f64;
    let mut out = ego.clone();
    let mut diffs = Vec::with_capacity(others.len());
    for (i, e) in ego.probs.iter().enumerate() {
        diffs.clear();
        diffs.extend(others.iter().map(|o| o.probs[i] - e));
        diffs.sort_by(f64::total_cmp);
        let sum: f64 = diffs.iter().sum();
        out.probs[i] = (e + sum / k).clamp(0.0, 1.0);
    }
    Ok(out)
}

/// Dispatch to [`fuse_detections`] or [`fuse_segmaps`].
pub fn fuse_outputs(ego: &PerceptionOutput, others: &[&PerceptionOutput], merge_iou: f64) -> Result<PerceptionOutput> {
    match ego {
        PerceptionOutput::Detection(e) => {
            let sets = others
                .iter()
                .map(|o| o.as_detection().ok_or_else(|| crate::Error::Input("mixed output variants".into())))
                .collect::<Result<Vec<_>>>()?;
            fuse_detections(e, &sets, merge_iou).map(PerceptionOutput::Detection)
        }
        PerceptionOutput::Segmentation(e) => {
            let grids = others
                .iter()
                .map(|o| o.as_segmentation().ok_or_else(|| crate::Error::Input("mixed output variants".into())))
                .collect::<Result<Vec<_>>>()?;
            fuse_segmaps(e, &grids).map(PerceptionOutput::Segmentation)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(x: f64, y: f64, p: f64) -> BoxProposal {
        BoxProposal::centered(x, y, 1.0, 1.0, vec![p, 0.0]).unwrap()
    }

    fn set(boxes: Vec<BoxProposal>) -> DetectionSet {
        DetectionSet { class_count: 2, boxes }
    }

    #[test]
    fn no_collaborators_returns_ego() {
        let ego = set(vec![bx(0.0, 0.0, 0.9), bx(0.5, 0.0, 0.4)]);
        assert_eq!(fuse_detections(&ego, &[], 0.5).unwrap(), ego);
    }

    #[test]
    fn duplicate_collaborator_is_idempotent() {
        let ego = set(vec![bx(0.0, 0.0, 0.9), bx(0.3, 0.1, 0.4), bx(10.0, 3.0, 0.7)]);
        let copy = ego.clone();
        assert_eq!(fuse_detections(&ego, &[&copy], 0.5).unwrap(), ego);
    }

    #[test]
    fn disjoint_boxes_are_unioned() {
        let a = bx(0.0, 0.0, 0.9);
        let b = bx(10.0, 10.0, 0.8);
        assert_eq!(iou(&a, &b), 0.0);
        let fused = fuse_detections(&set(vec![a.clone()]), &[&set(vec![b.clone()])], 0.5).unwrap();
        assert_eq!(fused.boxes, vec![a, b]);
    }

    #[test]
    fn merge_keeps_max_posterior_and_weighted_corners() {
        let a = BoxProposal::new(0.0, 0.0, 2.0, 2.0, vec![0.5, 0.1]).unwrap();
        let b = BoxProposal::new(0.2, 0.0, 2.2, 2.0, vec![1.0, 0.3]).unwrap();
        let fused = fuse_detections(&set(vec![a]), &[&set(vec![b])], 0.5).unwrap();
        assert_eq!(fused.boxes.len(), 1);
        let m = &fused.boxes[0];
        assert_eq!(m.posteriors, vec![1.0, 0.3]);
        // weights 0.5 and 1.0: x_min = 0 + (1.0 * 0.2) / 1.5
        assert!((m.x_min - 0.2 / 1.5).abs() < 1e-12);
        assert!((m.x_max - (2.0 + 0.2 / 1.5)).abs() < 1e-12);
    }

    #[test]
    fn class_count_mismatch() {
        let ego = set(vec![]);
        let other = DetectionSet::empty(3);
        assert!(matches!(fuse_detections(&ego, &[&other], 0.5), Err(crate::Error::Config(_))));
    }

    #[test]
    fn segmap_mean() {
        let zeros = SegGrid::zeros(2, 2, 1);
        let ones = SegGrid::filled(2, 2, 1, 1.0);
        assert_eq!(fuse_segmaps(&zeros, &[]).unwrap(), zeros);
        assert_eq!(fuse_segmaps(&zeros, &[&ones]).unwrap(), SegGrid::filled(2, 2, 1, 0.5));
        let g = SegGrid::from_vec(2, 1, 2, vec![0.1, 0.7, 0.33, 0.9]).unwrap();
        assert_eq!(fuse_segmaps(&g, &[&g, &g]).unwrap(), g);
        assert!(fuse_segmaps(&g, &[&zeros]).is_err());
    }
}
