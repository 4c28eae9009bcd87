use rand::seq::SliceRandom;
use rand::Rng;

use super::config::AttackSpec;
use super::output::{BoxProposal, DetectionSet, PerceptionOutput, SegGrid};
use crate::error::{config_err, Result};
use crate::rng::rng_from_seed;

/// Half-extent of spoofed boxes when the victim output has no boxes to imitate.
const SPOOF_DEFAULT_HALF_EXTENT: f64 = 2.0;
/// Margin around the victim's boxes within which spoofed boxes are placed.
const SPOOF_MARGIN_M: f64 = 10.0;

/// Apply an output-space attack.
///
/// Corruption strength is monotone in the attack magnitude for a fixed seed:
/// SHIFT draws one direction per box independently of the offset, and
/// REMOVE/SEG_FLIP act on a prefix of one seeded permutation, so larger
/// fractions corrupt a superset of the elements.
pub fn corrupt(output: &PerceptionOutput, spec: &AttackSpec, seed: u64) -> Result<PerceptionOutput> {
    spec.validate()?;
    match (output, spec) {
        (PerceptionOutput::Detection(d), AttackSpec::Shift { offset_m }) => {
            Ok(PerceptionOutput::Detection(shift(d, *offset_m, seed)))
        }
        (PerceptionOutput::Detection(d), AttackSpec::Remove { fraction }) => {
            Ok(PerceptionOutput::Detection(remove(d, *fraction, seed)))
        }
        (PerceptionOutput::Detection(d), AttackSpec::Spoof { count }) => {
            spoof(d, *count, seed).map(PerceptionOutput::Detection)
        }
        (PerceptionOutput::Segmentation(g), AttackSpec::SegFlip { fraction }) => {
            Ok(PerceptionOutput::Segmentation(seg_flip(g, *fraction, seed)))
        }
        (out, spec) => config_err(format!("{} attack cannot act on a {} output", spec.name(), out.kind())),
    }
}

fn shift(d: &DetectionSet, offset: f64, seed: u64) -> DetectionSet {
    if offset == 0.0 {
        return d.clone();
    }
    let mut rng = rng_from_seed(seed);
    let boxes = d
        .boxes
        .iter()
        .map(|b| {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            b.translated(offset * theta.cos(), offset * theta.sin())
        })
        .collect();
    DetectionSet { class_count: d.class_count, boxes }
}

fn affected_count(total: usize, fraction: f64) -> usize {
    ((fraction * total as f64).round() as usize).min(total)
}

fn remove(d: &DetectionSet, fraction: f64, seed: u64) -> DetectionSet {
    let n = d.boxes.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut dropped = vec![false; n];
    for &i in &order[..affected_count(n, fraction)] {
        dropped[i] = true;
    }
    let boxes = d.boxes.iter().zip(&dropped).filter(|(_, &x)| !x).map(|(b, _)| b.clone()).collect();
    DetectionSet { class_count: d.class_count, boxes }
}

fn spoof(d: &DetectionSet, count: usize, seed: u64) -> Result<DetectionSet> {
    let mut rng = rng_from_seed(seed);
    let (mut x0, mut y0, mut x1, mut y1, mut half) = (0.0, 0.0, 100.0, 100.0, SPOOF_DEFAULT_HALF_EXTENT);
    if !d.boxes.is_empty() {
        x0 = d.boxes.iter().map(|b| b.x_min).fold(f64::INFINITY, f64::min) - SPOOF_MARGIN_M;
        y0 = d.boxes.iter().map(|b| b.y_min).fold(f64::INFINITY, f64::min) - SPOOF_MARGIN_M;
        x1 = d.boxes.iter().map(|b| b.x_max).fold(f64::NEG_INFINITY, f64::max) + SPOOF_MARGIN_M;
        y1 = d.boxes.iter().map(|b| b.y_max).fold(f64::NEG_INFINITY, f64::max) + SPOOF_MARGIN_M;
        let sizes: f64 = d.boxes.iter().map(|b| 0.25 * ((b.x_max - b.x_min) + (b.y_max - b.y_min))).sum();
        half = sizes / d.boxes.len() as f64;
    }
    let mut boxes = d.boxes.clone();
    for _ in 0..count {
        let cx = rng.random_range(x0..=x1);
        let cy = rng.random_range(y0..=y1);
        let mut post = vec![0.0; d.class_count];
        post[rng.random_range(0..d.class_count)] = 1.0;
        boxes.push(BoxProposal::centered(cx, cy, half, half, post)?);
    }
    Ok(DetectionSet { class_count: d.class_count, boxes })
}

fn seg_flip(g: &SegGrid, fraction: f64, seed: u64) -> SegGrid {
    let n = g.pixels();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let mut out = g.clone();
    let c = g.classes;
    for &pix in &order[..affected_count(n, fraction)] {
        let base = pix * c;
        if c == 1 {
            out.probs[base] = 1.0 - g.probs[base];
        } else {
            for j in 0..c {
                out.probs[base + j] = g.probs[base + (j + 1) % c];
            }
        }
    }
    out
}
