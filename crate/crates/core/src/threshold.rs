//! Dual sliding-window adaptive threshold.
//!
//! Scores labelled BENIGN and CONTAM are kept in two bounded FIFO windows. Once
//! both hold at least `min_window` scores, the provisional threshold is the
//! midpoint of the benign `(1 - alpha)`-quantile and the contaminated
//! `beta`-quantile, and the working threshold follows it through an EWMA.

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{config_err, input_err, Result};

/// Group-test outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Label {
    Benign,
    Contam,
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Label::Benign => "BENIGN",
            Label::Contam => "CONTAM",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThresholdParams {
    pub alpha: f64,
    pub beta: f64,
    pub window: usize,
    pub min_window: usize,
    pub eta: f64,
}

impl Default for ThresholdParams {
    fn default() -> Self {
        Self { alpha: 0.05, beta: 0.05, window: 100, min_window: 10, eta: 0.1 }
    }
}

impl ThresholdParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0 && self.beta > 0.0 && self.beta < 1.0) {
            return config_err("threshold alpha and beta must lie in (0, 1)");
        }
        if self.window == 0 || self.min_window > self.window {
            return config_err("threshold windows need 0 < W and W_min <= W");
        }
        if !(self.eta > 0.0 && self.eta <= 1.0) {
            return config_err("threshold eta must lie in (0, 1]");
        }
        Ok(())
    }
}

/// Smallest window element whose empirical CDF reaches `q`.
pub fn empirical_quantile(window: &[f64], q: f64) -> Result<f64> {
    if window.is_empty() {
        return input_err("empirical quantile of an empty window");
    }
    if !(q > 0.0 && q <= 1.0) {
        return input_err(format!("quantile level {q} outside (0, 1]"));
    }
    let mut sorted = window.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let reaches = |k: usize| k as f64 / n as f64 >= q;
    let mut k = ((q * n as f64).ceil() as usize).clamp(1, n);
    while k > 1 && reaches(k - 1) {
        k -= 1;
    }
    while k < n && !reaches(k) {
        k += 1;
    }
    Ok(sorted[k - 1])
}

/// BENIGN iff `score >= epsilon`.
pub fn classify(score: f64, epsilon: f64) -> Label {
    if score >= epsilon {
        Label::Benign
    } else {
        Label::Contam
    }
}

/// Quantities computed by one [`ThresholdState::update`]; the quantile fields
/// are `None` while either window is below `min_window`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdStep {
    pub q_p: Option<f64>,
    pub q_n: Option<f64>,
    pub eps_provisional: Option<f64>,
    pub eps: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdState {
    window_benign: VecDeque<f64>,
    window_contam: VecDeque<f64>,
    epsilon: f64,
    params: ThresholdParams,
}

impl ThresholdState {
    pub fn new(initial_epsilon: f64, params: ThresholdParams) -> Result<Self> {
        params.validate()?;
        if !(0.0..=1.0).contains(&initial_epsilon) {
            return config_err(format!("initial threshold {initial_epsilon} outside [0, 1]"));
        }
        Ok(Self {
            window_benign: VecDeque::with_capacity(params.window + 1),
            window_contam: VecDeque::with_capacity(params.window + 1),
            epsilon: initial_epsilon,
            params,
        })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn params(&self) -> &ThresholdParams {
        &self.params
    }

    pub fn benign_window(&self) -> &VecDeque<f64> {
        &self.window_benign
    }

    pub fn contam_window(&self) -> &VecDeque<f64> {
        &self.window_contam
    }

    pub fn warmed_up(&self) -> bool {
        self.window_benign.len() >= self.params.min_window && self.window_contam.len() >= self.params.min_window
    }

    pub fn classify(&self, score: f64) -> Label {
        classify(score, self.epsilon)
    }

    /// Push `score` into the window of `label` and refresh the threshold.
    pub fn update(&mut self, score: f64, label: Label) -> Result<ThresholdStep> {
        if !(0.0..=1.0).contains(&score) {
            return input_err(format!("score {score} outside [0, 1]"));
        }
        let w = match label {
            Label::Benign => &mut self.window_benign,
            Label::Contam => &mut self.window_contam,
        };
        w.push_back(score);
        while w.len() > self.params.window {
            w.pop_front();
        }
        if !self.warmed_up() {
            return Ok(ThresholdStep { q_p: None, q_n: None, eps_provisional: None, eps: self.epsilon });
        }
        let q_p = empirical_quantile(self.window_benign.make_contiguous(), 1.0 - self.params.alpha)?;
        let q_n = empirical_quantile(self.window_contam.make_contiguous(), self.params.beta)?;
        let provisional = 0.5 * (q_p + q_n);
        let eta = self.params.eta;
        self.epsilon = ((1.0 - eta) * self.epsilon + eta * provisional).clamp(0.0, 1.0);
        Ok(ThresholdStep { q_p: Some(q_p), q_n: Some(q_n), eps_provisional: Some(provisional), eps: self.epsilon })
    }
}

/// One row of a threshold trace export.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub score: f64,
    pub label: Label,
    pub step_result: ThresholdStep,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// CSV with columns `step,score,label,q_p,q_n,eps_provisional,eps`; empty
/// cells before warm-up, LF line endings.
pub fn trace_csv(rows: &[TraceRow]) -> String {
    let mut out = String::from("step,score,label,q_p,q_n,eps_provisional,eps\n");
    for r in rows {
        let s = r.step_result;
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.step,
            r.score,
            r.label,
            opt(s.q_p),
            opt(s.q_n),
            opt(s.eps_provisional),
            s.eps
        ));
    }
    out
}
