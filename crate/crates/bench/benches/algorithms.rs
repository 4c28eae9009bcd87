use std::hint::black_box;

use cpguard_core::consistency::{assign_min_cost, ccloss_det, ccloss_seg, CCLossParams};
use cpguard_core::oracle::{SyntheticOracle, SyntheticOracleSpec};
use cpguard_core::pasac::{pasac_run, PasacConfig};
use cpguard_core::rng::rng_from_seed;
use cpguard_core::sim::{fuse_detections, BoxProposal, DetectionSet, SegGrid};
use cpguard_core::threshold::{Label, ThresholdParams, ThresholdState};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::seq::index::sample;
use rand::Rng;

fn detections(seed: u64, count: usize) -> DetectionSet {
    let mut rng = rng_from_seed(seed);
    let boxes = (0..count)
        .map(|_| {
            let (x, y) = (rng.random_range(0.0..100.0), rng.random_range(0.0..100.0));
            let p: f64 = rng.random();
            BoxProposal::centered(x, y, rng.random_range(0.5..3.0), rng.random_range(0.5..3.0), vec![p, 1.0 - p]).unwrap()
        })
        .collect();
    DetectionSet::new(2, boxes).unwrap()
}

fn assignment(c: &mut Criterion) {
    let mut g = c.benchmark_group("assign_min_cost");
    for n in [6usize, 32, 128] {
        let mut rng = rng_from_seed(n as u64);
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random()).collect()).collect();
        g.bench_with_input(BenchmarkId::from_parameter(n), &cost, |b, cost| b.iter(|| assign_min_cost(black_box(cost))));
    }
    g.finish();
}

fn consistency(c: &mut Criterion) {
    let p = CCLossParams::default();
    let ego = detections(1, 50);
    let other = detections(2, 50);
    let fused = fuse_detections(&ego, &[&other], 0.5).unwrap();
    c.bench_function("ccloss_det/50_boxes", |b| b.iter(|| ccloss_det(black_box(&ego), black_box(&fused), &p)));
    c.bench_function("fuse_detections/50x2", |b| b.iter(|| fuse_detections(black_box(&ego), &[&other], 0.5)));

    let mut rng = rng_from_seed(3);
    let mut grid = || SegGrid::from_vec(128, 128, 3, (0..128 * 128 * 3).map(|_| rng.random()).collect()).unwrap();
    let (a, b_) = (grid(), grid());
    c.bench_function("ccloss_seg/128x128x3", |b| b.iter(|| ccloss_seg(black_box(&a), black_box(&b_), &p)));
}

fn group_testing(c: &mut Criterion) {
    let mut g = c.benchmark_group("pasac_run");
    for (n, m) in [(16usize, 2usize), (64, 4), (64, 16)] {
        let truth: Vec<usize> = sample(&mut rng_from_seed(7), n, m).into_vec();
        let ids: Vec<usize> = (0..n).collect();
        g.bench_function(BenchmarkId::from_parameter(format!("n{n}_m{m}")), |b| {
            let mut seed = 0;
            b.iter(|| {
                seed += 1;
                let mut o = SyntheticOracle::new(SyntheticOracleSpec::perfect(truth.iter().copied()), seed).unwrap();
                let cfg = PasacConfig { record_trace: false, ..PasacConfig::with_seed(seed) };
                pasac_run(black_box(&ids), &mut o, &cfg).unwrap()
            })
        });
    }
    g.finish();
}

fn threshold(c: &mut Criterion) {
    let mut rng = rng_from_seed(5);
    let stream: Vec<(f64, Label)> = (0..1000)
        .map(|_| if rng.random_bool(0.5) { (rng.random_range(0.7..0.9), Label::Benign) } else { (rng.random_range(0.2..0.4), Label::Contam) })
        .collect();
    c.bench_function("threshold_update/1000", |b| {
        b.iter(|| {
            let mut st = ThresholdState::new(0.5, ThresholdParams::default()).unwrap();
            for &(s, l) in &stream {
                st.update(s, l).unwrap();
            }
            st.epsilon()
        })
    });
}

criterion_group!(benches, assignment, consistency, group_testing, threshold);
criterion_main!(benches);
