mod common;

use std::collections::BTreeSet;
use std::io::Write;
use std::time::Instant;

use cpguard_core::bench::{reliability_run, run_sweep, score_stream, summarize, trace_threshold, Grid, Method, SweepSpec};
use cpguard_core::consistency::{assign_min_cost, ccloss_det, ccloss_seg, CCLossParams};
use cpguard_core::e2e::{run_e2e, E2eConfig};
use cpguard_core::oracle::{LabelSource, ScoreDistributions, SyntheticOracle, SyntheticOracleSpec, TruncNormal};
use cpguard_core::pasac::{pasac_run, PasacConfig};
use cpguard_core::rng::rng_from_seed;
use cpguard_core::sim::SegGrid;
use cpguard_core::threshold::ThresholdParams;
use rand::seq::index::sample;
use rand::Rng;

use common::*;

/// Writes straight to the process stdout so the line survives output capture.
fn report(criterion: u32, pass: bool, detail: String) {
    let verdict = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "acceptance {criterion}: {verdict} {detail}").unwrap();
}

struct Instance {
    n: usize,
    truth: BTreeSet<usize>,
    split_seed: u64,
}

fn instances(count: usize, seed: u64) -> Vec<Instance> {
    let mut rng = rng_from_seed(seed);
    (0..count)
        .map(|_| {
            let n = rng.random_range(1..=64);
            let m = rng.random_range(0..=n);
            let truth = sample(&mut rng, n, m).into_iter().collect();
            Instance { n, truth, split_seed: rng.random() }
        })
        .collect()
}

#[test]
fn criterion_1_perfect_oracle_exactness() {
    let start = Instant::now();
    let mut wrong = 0;
    let runs = instances(10_000, 1);
    for inst in &runs {
        let ids: Vec<usize> = (0..inst.n).collect();
        let mut oracle = SyntheticOracle::new(SyntheticOracleSpec::perfect(inst.truth.iter().copied()), 0).unwrap();
        let r = pasac_run(&ids, &mut oracle, &PasacConfig::with_seed(inst.split_seed)).unwrap();
        let benign: BTreeSet<usize> = ids.iter().copied().filter(|a| !inst.truth.contains(a)).collect();
        if r.malicious != inst.truth || r.benign != benign {
            wrong += 1;
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = wrong == 0 && secs < 10.0;
    report(1, pass, format!("{} runs, {wrong} misclassified, {secs:.2}s (limit 10s)", runs.len()));
    assert!(pass);
}

#[test]
fn criterion_2_query_bound() {
    let mut violations = 0;
    let mut repeated_singletons = 0;
    let mut worst = 0.0f64;
    for inst in instances(10_000, 1) {
        let ids: Vec<usize> = (0..inst.n).collect();
        let m = inst.truth.len();
        let mut oracle = SyntheticOracle::new(SyntheticOracleSpec::perfect(inst.truth.iter().copied()), 0).unwrap();
        let r = pasac_run(&ids, &mut oracle, &PasacConfig::with_seed(inst.split_seed)).unwrap();
        let bound = 2 * m as u64 * levels(inst.n) + (inst.n - m) as u64;
        violations += usize::from(r.queries > bound);
        worst = worst.max(r.queries as f64 / bound as f64);
        for a in ids.iter().filter(|a| !inst.truth.contains(a)) {
            let hits = r.trace.iter().filter(|t| t.subset == [*a]).count();
            repeated_singletons += usize::from(hits > 1);
        }
    }
    let pass = violations == 0 && repeated_singletons == 0;
    report(
        2,
        pass,
        format!("{violations} bound violations, {repeated_singletons} repeated benign singletons, max queries/bound {worst:.3}"),
    );
    assert!(pass);
}

#[test]
fn criterion_3_error_bound() {
    let start = Instant::now();
    let (n, m, trials) = (16usize, 2usize, 50_000u64);
    // (alpha + beta) * m * ceil(log2 16) = 0.01 * 2 * 4
    let bound = 0.08;
    let mut rng = rng_from_seed(3);
    let ids: Vec<usize> = (0..n).collect();
    let mut errors = 0u64;
    for _ in 0..trials {
        let truth: BTreeSet<usize> = sample(&mut rng, n, m).into_iter().collect();
        let spec = SyntheticOracleSpec::new(0.005, 0.005, truth.iter().copied()).unwrap();
        let mut oracle = SyntheticOracle::new(spec, rng.random()).unwrap();
        let cfg = PasacConfig { record_trace: false, ..PasacConfig::with_seed(rng.random()) };
        let r = pasac_run(&ids, &mut oracle, &cfg).unwrap();
        let benign: BTreeSet<usize> = ids.iter().copied().filter(|a| !truth.contains(a)).collect();
        errors += u64::from(r.malicious != truth || r.benign != benign);
    }
    let rate = errors as f64 / trials as f64;
    let secs = start.elapsed().as_secs_f64();
    let pass = rate <= bound && secs < 60.0;
    report(3, pass, format!("empirical error {rate:.5} ({errors}/{trials}) vs bound {bound}, {secs:.2}s (limit 60s)"));
    assert!(pass);
}

fn separated_laws() -> ScoreDistributions {
    ScoreDistributions {
        benign: TruncNormal::new(0.8, 0.05).unwrap(),
        contaminated: TruncNormal::new(0.3, 0.05).unwrap(),
    }
}

#[test]
fn criterion_4_reliability() {
    let start = Instant::now();
    let params = ThresholdParams { alpha: 0.05, beta: 0.05, window: 100, min_window: 10, eta: 0.1 };
    let s = reliability_run(&separated_laws(), params, 0.5, 10_000, 4).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let pass = s.fpr <= 0.07 && s.fnr <= 0.07 && s.benign_samples + s.contam_samples == 10_000 && secs < 10.0;
    report(
        4,
        pass,
        format!("fpr {:.4} fnr {:.4} over 10000 post-warm-up classifications, eps {:.4}, {secs:.2}s", s.fpr, s.fnr, s.final_epsilon),
    );
    assert!(pass);
}

fn std_dev(xs: &[f64]) -> f64 {
    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
    (xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / xs.len() as f64).sqrt()
}

#[test]
fn criterion_5_threshold_robustness() {
    let stream = score_stream(&separated_laws(), 0.5, 500, 5).unwrap();
    let trajectories: Vec<Vec<f64>> = [0.001, 0.05, 0.1, 0.5, 0.8]
        .iter()
        .map(|&e0| {
            trace_threshold(&stream, ThresholdParams::default(), e0, LabelSource::GroundTruth)
                .unwrap()
                .iter()
                .map(|r| r.step_result.eps)
                .collect()
        })
        .collect();
    let finals: Vec<f64> = trajectories.iter().map(|t| t[499]).collect();
    let band = finals.iter().cloned().fold(f64::MIN, f64::max) - finals.iter().cloned().fold(f64::MAX, f64::min);
    let tail_std: Vec<f64> = trajectories.iter().map(|t| std_dev(&t[400..500])).collect();
    let worst_std = tail_std.iter().cloned().fold(0.0, f64::max);
    let pass = band <= 0.05 && worst_std <= 0.01;
    report(
        5,
        pass,
        format!("final eps {finals:.4?}, band {band:.2e} (limit 0.05), max tail std {worst_std:.4} (limit 0.01)"),
    );
    assert!(pass);
}

#[test]
fn criterion_6_spread_and_trend() {
    let ratios = vec![0.2, 0.4, 0.6, 0.8];
    let spec = SweepSpec::new(Grid::Ratios { ns: vec![10], ratios }, vec![Method::Pasac, Method::Random], 1000);
    let summary = summarize(&run_sweep(&spec, 6).unwrap());
    let pick = |method, m| summary.iter().find(|s| s.method == method && s.m == m).unwrap();
    let mut pass = true;
    let mut lines = Vec::new();
    let mut prev_avg = 0.0;
    for m in [2, 4, 6, 8] {
        let p = pick(Method::Pasac, m);
        let r = pick(Method::Random, m);
        pass &= p.max_q - p.min_q <= r.max_q - r.min_q;
        pass &= p.avg_q >= prev_avg;
        pass &= p.error_rate == 0.0;
        prev_avg = p.avg_q;
        lines.push(format!(
            "m={m}: PASAC {}/{}/{:.2} RANDOM {}/{}/{:.2}",
            p.min_q, p.max_q, p.avg_q, r.min_q, r.max_q, r.avg_q
        ));
    }
    report(6, pass, format!("n=10 min/max/avg [{}]", lines.join("; ")));
    assert!(pass);
}

#[test]
fn criterion_7_assignment_vs_brute_force() {
    let mut rng = rng_from_seed(7);
    let mut mismatches = 0;
    for case in 0..1000 {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        let integral = case % 2 == 0;
        let cost: Vec<Vec<f64>> = (0..rows)
            .map(|_| {
                (0..cols)
                    .map(|_| if integral { rng.random_range(0..10) as f64 } else { rng.random_range(0.0..10.0) })
                    .collect()
            })
            .collect();
        let got = assign_min_cost(&cost).unwrap();
        let want = brute_force_min_cost(&cost);
        let used: Vec<usize> = got.assignment.iter().flatten().copied().collect();
        let distinct: BTreeSet<usize> = used.iter().copied().collect();
        let ok = (got.total_cost - want).abs() <= 1e-9 && distinct.len() == used.len() && used.len() == rows.min(cols);
        mismatches += usize::from(!ok);
    }
    let pass = mismatches == 0;
    report(7, pass, format!("1000 matrices up to 6x6, {mismatches} mismatches against exhaustive search"));
    assert!(pass);
}

#[test]
fn criterion_8_ccloss_algebra() {
    let p = CCLossParams::default();
    let mut rng = rng_from_seed(8);
    let mut self_fail = 0;
    for _ in 0..100 {
        let c = rng.random_range(1..=4);
        let d = random_detections(&mut rng, c, 8);
        self_fail += usize::from(ccloss_det(&d, &d, &p).unwrap() != 1.0);
        let (w, h) = (rng.random_range(1..=12), rng.random_range(1..=12));
        let g = random_binary_grid(&mut rng, w, h, c);
        self_fail += usize::from(ccloss_seg(&g, &g, &p).unwrap() != 1.0);
    }
    let mut range_fail = 0;
    let mut asym = 0;
    for _ in 0..10_000 {
        let c = rng.random_range(1..=4);
        let a = random_detections(&mut rng, c, 6);
        let b = random_detections(&mut rng, c, 6);
        let s = ccloss_det(&a, &b, &p).unwrap();
        range_fail += usize::from(!(0.0..=1.0).contains(&s));
        let (w, h) = (rng.random_range(1..=8), rng.random_range(1..=8));
        let x = random_soft_grid(&mut rng, w, h, c);
        let y = random_soft_grid(&mut rng, w, h, c);
        let sxy = ccloss_seg(&x, &y, &p).unwrap();
        let syx = ccloss_seg(&y, &x, &p).unwrap();
        range_fail += usize::from(!(0.0..=1.0).contains(&sxy));
        asym += usize::from(sxy.to_bits() != syx.to_bits());
    }
    let p0 = SegGrid::from_vec(2, 1, 1, vec![1.0, 1.0]).unwrap();
    let pf = SegGrid::from_vec(2, 1, 1, vec![1.0, 0.0]).unwrap();
    let half = ccloss_seg(&p0, &pf, &p).unwrap();
    let hand_ok = (half - 2.0 / 3.0).abs() <= 1e-12;
    let pass = self_fail == 0 && range_fail == 0 && asym == 0 && hand_ok;
    report(
        8,
        pass,
        format!("self-score failures {self_fail}, out-of-range {range_fail}, asymmetric seg pairs {asym}, half-overlap {half:.15}"),
    );
    assert!(pass);
}

#[test]
fn criterion_9_end_to_end_smoke() {
    let start = Instant::now();
    let config: E2eConfig = serde_json::from_str(include_str!("../../../configs/e2e_smoke.json")).unwrap();
    let agents = &config.scene.agents;
    assert_eq!(agents.len() - 1, 8);
    assert_eq!(config.frames, 100);
    assert_eq!(config.threshold.initial_epsilon, 0.5);
    let report_ = run_e2e(&config, 42).unwrap();
    let attackers = &report_.summary.attackers;
    assert_eq!(attackers.len(), 1);
    let frames = report_.frames.len() as f64;
    let flagged = report_.frames.iter().filter(|f| f.malicious_found.contains(&attackers[0])).count() as f64;
    let clean = report_
        .frames
        .iter()
        .filter(|f| f.malicious_found.iter().all(|a| attackers.contains(a)))
        .count() as f64;
    let secs = start.elapsed().as_secs_f64();
    let pass = flagged / frames >= 0.95 && clean / frames >= 0.95 && secs < 30.0;
    report(
        9,
        pass,
        format!(
            "attacker flagged in {:.2} of frames, no benign flagged in {:.2}, final eps {:.3}, {secs:.2}s",
            flagged / frames,
            clean / frames,
            report_.summary.final_eps
        ),
    );
    assert!(pass);
}
