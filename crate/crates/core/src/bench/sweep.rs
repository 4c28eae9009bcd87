//! Parameter sweeps over the identification methods and their aggregation.

use std::collections::BTreeSet;
use std::fmt;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{config_err, Result};
use crate::oracle::{AgentId, SyntheticOracle, SyntheticOracleSpec};
use crate::pasac::{linear_scan, pasac_run, random_consensus, PasacConfig, PasacResult, SplitMode};
use crate::rng::{derive_seed, rng_from_seed};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Method {
    Pasac,
    Linear,
    Random,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Pasac => "PASAC",
            Method::Linear => "LINEAR",
            Method::Random => "RANDOM",
        })
    }
}

/// Grid of population sizes and attacker counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Grid {
    /// Every `(n, m)` pair from the two lists.
    Counts { ns: Vec<usize>, ms: Vec<usize> },
    /// Every `n` with `m = round(ratio * n)`.
    Ratios { ns: Vec<usize>, ratios: Vec<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
}

impl Grid {
    pub fn points(&self) -> Result<Vec<GridPoint>> {
        let mut out = Vec::new();
        match self {
            Grid::Counts { ns, ms } => {
                for &n in ns {
                    for &m in ms {
                        out.push(GridPoint { n, m, ratio: m as f64 / n.max(1) as f64 });
                    }
                }
            }
            Grid::Ratios { ns, ratios } => {
                for &n in ns {
                    for &r in ratios {
                        if !(0.0..=1.0).contains(&r) {
                            return config_err(format!("attack ratio {r} outside [0, 1]"));
                        }
                        out.push(GridPoint { n, m: (r * n as f64).round() as usize, ratio: r });
                    }
                }
            }
        }
        if out.is_empty() {
            return config_err("sweep grid is empty");
        }
        for p in &out {
            if p.n == 0 || p.m > p.n {
                return config_err(format!("invalid grid point n = {}, m = {}", p.n, p.m));
            }
        }
        Ok(out)
    }
}

fn default_max_attempts() -> u64 {
    100_000
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub grid: Grid,
    pub methods: Vec<Method>,
    pub trials: u64,
    #[serde(default)]
    pub alpha: f64,
    #[serde(default)]
    pub beta: f64,
    /// Early-stop quota for PASAC; clipped to `n`. `None` disables it.
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default = "default_max_attempts")]
    pub max_attempts: u64,
    /// Record wall-clock time per trial. Timings make the output non-reproducible.
    #[serde(default)]
    pub timing: bool,
    #[serde(default = "default_true")]
    pub record_trace: bool,
}

fn default_true() -> bool {
    true
}

impl SweepSpec {
    pub fn new(grid: Grid, methods: Vec<Method>, trials: u64) -> Self {
        Self {
            grid,
            methods,
            trials,
            alpha: 0.0,
            beta: 0.0,
            n_max: None,
            max_attempts: default_max_attempts(),
            timing: false,
            record_trace: true,
        }
    }

    pub fn validate(&self) -> Result<Vec<GridPoint>> {
        if self.trials == 0 {
            return config_err("trials must be at least 1");
        }
        if self.methods.is_empty() {
            return config_err("no methods selected");
        }
        if self.max_attempts == 0 {
            return config_err("max_attempts must be positive");
        }
        if self.n_max == Some(0) {
            return config_err("n_max must be positive");
        }
        SyntheticOracleSpec::new(self.alpha, self.beta, [])?;
        let points = self.grid.points()?;
        if self.methods.contains(&Method::Random) {
            if let Some(p) = points.iter().find(|p| p.m == p.n) {
                return config_err(format!("random consensus needs m < n (n = m = {})", p.n));
            }
        }
        Ok(points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub n: usize,
    pub m: usize,
    pub method: Method,
    pub queries: u64,
    pub correct: bool,
    pub stopped_early: bool,
    pub seed: u64,
    pub wall_ns: Option<u64>,
}

/// Ground-truth malicious set for a trial: a uniform `m`-subset of `0..n`.
pub fn draw_malicious(n: usize, m: usize, seed: u64) -> BTreeSet<AgentId> {
    sample(&mut rng_from_seed(seed), n, m).into_iter().collect()
}

/// Seed of trial `trial` at grid point `grid_index`.
pub fn trial_seed(master: u64, grid_index: usize, trial: u64) -> u64 {
    derive_seed(master, &[grid_index as u64, trial])
}

fn run_method(spec: &SweepSpec, method: Method, p: GridPoint, seed: u64) -> Result<(PasacResult, bool)> {
    let ids: Vec<AgentId> = (0..p.n).collect();
    let truth = draw_malicious(p.n, p.m, derive_seed(seed, &[0]));
    let oracle_spec = SyntheticOracleSpec::new(spec.alpha, spec.beta, truth.iter().copied())?;
    let mut oracle = SyntheticOracle::new(oracle_spec, derive_seed(seed, &[1, method as u64]))?;
    Ok(match method {
        Method::Pasac => {
            let cfg = PasacConfig {
                n_max: spec.n_max.map(|k| k.min(p.n)),
                split: SplitMode::Shuffled(derive_seed(seed, &[2])),
                query_root: false,
                record_trace: spec.record_trace,
            };
            let r = pasac_run(&ids, &mut oracle, &cfg)?;
            let ok = if r.stopped_early {
                r.benign.is_disjoint(&truth) && r.malicious.is_subset(&truth)
            } else {
                r.matches_truth(&ids, &truth)
            };
            (r, ok)
        }
        Method::Linear => {
            let r = linear_scan(&ids, &mut oracle)?;
            let ok = r.matches_truth(&ids, &truth);
            (r, ok)
        }
        Method::Random => {
            let r = random_consensus(&ids, &mut oracle, p.m, spec.max_attempts, derive_seed(seed, &[3]))?;
            let ok = !r.exhausted && r.benign.is_disjoint(&truth);
            (r, ok)
        }
    })
}

/// Runs every (grid point, trial, method) combination. Output order is
/// grid point, then trial, then method as listed, regardless of thread count.
pub fn run_sweep(spec: &SweepSpec, master_seed: u64) -> Result<Vec<TrialRecord>> {
    let points = spec.validate()?;
    let tasks: Vec<(usize, u64)> =
        (0..points.len()).flat_map(|g| (0..spec.trials).map(move |t| (g, t))).collect();
    let chunks: Vec<Result<Vec<TrialRecord>>> = tasks
        .par_iter()
        .map(|&(g, t)| {
            let p = points[g];
            let seed = trial_seed(master_seed, g, t);
            spec.methods
                .iter()
                .map(|&method| {
                    let start = spec.timing.then(Instant::now);
                    let (r, correct) = run_method(spec, method, p, seed)?;
                    Ok(TrialRecord {
                        n: p.n,
                        m: p.m,
                        method,
                        queries: r.queries,
                        correct,
                        stopped_early: r.stopped_early,
                        seed,
                        wall_ns: start.map(|s| s.elapsed().as_nanos() as u64),
                    })
                })
                .collect()
        })
        .collect();
    let mut out = Vec::with_capacity(tasks.len() * spec.methods.len());
    for c in chunks {
        out.extend(c?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub n: usize,
    pub m: usize,
    pub ratio: f64,
    pub method: Method,
    pub min_q: u64,
    pub max_q: u64,
    pub avg_q: f64,
    pub error_rate: f64,
    pub trials: u64,
}

impl SweepSummary {
    pub fn spread(&self) -> u64 {
        self.max_q - self.min_q
    }
}

/// Per-(n, m, method) statistics, in order of first appearance.
pub fn summarize(records: &[TrialRecord]) -> Vec<SweepSummary> {
    let mut keys: Vec<(usize, usize, Method)> = Vec::new();
    for r in records {
        let k = (r.n, r.m, r.method);
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    keys.into_iter()
        .map(|(n, m, method)| {
            let group: Vec<&TrialRecord> =
                records.iter().filter(|r| (r.n, r.m, r.method) == (n, m, method)).collect();
            let trials = group.len() as u64;
            let total: u64 = group.iter().map(|r| r.queries).sum();
            let errors = group.iter().filter(|r| !r.correct).count();
            SweepSummary {
                n,
                m,
                ratio: m as f64 / n as f64,
                method,
                min_q: group.iter().map(|r| r.queries).min().unwrap_or(0),
                max_q: group.iter().map(|r| r.queries).max().unwrap_or(0),
                avg_q: total as f64 / trials as f64,
                error_rate: errors as f64 / trials as f64,
                trials,
            }
        })
        .collect()
}

pub fn records_csv(records: &[TrialRecord]) -> String {
    let mut out = String::from("n,m,method,queries,correct,stopped_early,seed,wall_ns\n");
    for r in records {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.n,
            r.m,
            r.method,
            r.queries,
            r.correct,
            r.stopped_early,
            r.seed,
            r.wall_ns.map(|w| w.to_string()).unwrap_or_default()
        ));
    }
    out
}

pub fn summary_csv(rows: &[SweepSummary]) -> String {
    let mut out = String::from("n,m,ratio,method,min_q,max_q,avg_q,error_rate,trials\n");
    for s in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            s.n, s.m, s.ratio, s.method, s.min_q, s.max_q, s.avg_q, s.error_rate, s.trials
        ));
    }
    out
}
