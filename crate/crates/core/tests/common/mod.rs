#![allow(dead_code)]

use cpguard_core::sim::{BoxProposal, DetectionSet, SegGrid};
use rand::Rng;

/// Exhaustive minimum over injective row-to-column assignments of the
/// smaller side. Exponential; meant for matrices up to 7x7.
pub fn brute_force_min_cost(cost: &[Vec<f64>]) -> f64 {
    let rows = cost.len();
    let cols = cost[0].len();
    if rows > cols {
        let t: Vec<Vec<f64>> = (0..cols).map(|c| (0..rows).map(|r| cost[r][c]).collect()).collect();
        return brute_force_min_cost(&t);
    }
    fn rec(cost: &[Vec<f64>], row: usize, used: &mut Vec<bool>, acc: f64, best: &mut f64) {
        if row == cost.len() {
            *best = best.min(acc);
            return;
        }
        for c in 0..used.len() {
            if !used[c] {
                used[c] = true;
                rec(cost, row + 1, used, acc + cost[row][c], best);
                used[c] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(cost, 0, &mut vec![false; cols], 0.0, &mut best);
    best
}

/// `ceil(log2 n)` by repeated doubling, at least 1.
pub fn levels(n: usize) -> u64 {
    let mut l = 0;
    let mut cap = 1usize;
    while cap < n {
        cap *= 2;
        l += 1;
    }
    l.max(1)
}

pub fn random_posteriors(rng: &mut impl Rng, classes: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..classes).map(|_| rng.random::<f64>()).collect();
    let s: f64 = raw.iter().sum::<f64>().max(1e-9);
    raw.iter().map(|x| (x / s).min(1.0)).collect()
}

pub fn random_box(rng: &mut impl Rng, classes: usize) -> BoxProposal {
    let x = rng.random_range(0.0..50.0);
    let y = rng.random_range(0.0..50.0);
    let w = rng.random_range(0.5..6.0);
    let h = rng.random_range(0.5..6.0);
    BoxProposal::new(x, y, x + w, y + h, random_posteriors(rng, classes)).unwrap()
}

pub fn random_detections(rng: &mut impl Rng, classes: usize, max_boxes: usize) -> DetectionSet {
    let k = rng.random_range(0..=max_boxes);
    DetectionSet::new(classes, (0..k).map(|_| random_box(rng, classes)).collect()).unwrap()
}

pub fn random_soft_grid(rng: &mut impl Rng, w: usize, h: usize, c: usize) -> SegGrid {
    SegGrid::from_vec(w, h, c, (0..w * h * c).map(|_| rng.random::<f64>()).collect()).unwrap()
}

pub fn random_binary_grid(rng: &mut impl Rng, w: usize, h: usize, c: usize) -> SegGrid {
    let mut probs = vec![0.0; w * h * c];
    for px in 0..w * h {
        if rng.random_bool(0.8) {
            probs[px * c + rng.random_range(0..c)] = 1.0;
        }
    }
    SegGrid::from_vec(w, h, c, probs).unwrap()
}
