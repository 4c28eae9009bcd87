use serde::{Deserialize, Serialize};

use crate::error::{input_err, Result};

/// Axis-aligned BEV box proposal in world metres with per-class posteriors.
///
/// Posteriors are independent probabilities and need not sum to one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxProposal {
    pub x_min: f64,
    pub y_min: f64,
    pub x_max: f64,
    pub y_max: f64,
    pub posteriors: Vec<f64>,
}

impl BoxProposal {
    pub fn new(x_min: f64, y_min: f64, x_max: f64, y_max: f64, posteriors: Vec<f64>) -> Result<Self> {
        let b = Self { x_min, y_min, x_max, y_max, posteriors };
        b.validate()?;
        Ok(b)
    }

    /// Box centred on `(cx, cy)` with half-extents `(hw, hh)`.
    pub fn centered(cx: f64, cy: f64, hw: f64, hh: f64, posteriors: Vec<f64>) -> Result<Self> {
        Self::new(cx - hw, cy - hh, cx + hw, cy + hh, posteriors)
    }

    pub fn validate(&self) -> Result<()> {
        let coords = [self.x_min, self.y_min, self.x_max, self.y_max];
        if coords.iter().any(|c| !c.is_finite()) {
            return input_err("box corners must be finite");
        }
        if !(self.x_min < self.x_max && self.y_min < self.y_max) {
            return input_err(format!(
                "degenerate box [{}, {}, {}, {}]",
                self.x_min, self.y_min, self.x_max, self.y_max
            ));
        }
        if self.posteriors.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return input_err("posteriors must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn area(&self) -> f64 {
        (self.x_max - self.x_min) * (self.y_max - self.y_min)
    }

    pub fn center(&self) -> (f64, f64) {
        (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))
    }

    pub fn translated(&self, dx: f64, dy: f64) -> Self {
        Self {
            x_min: self.x_min + dx,
            y_min: self.y_min + dy,
            x_max: self.x_max + dx,
            y_max: self.y_max + dy,
            posteriors: self.posteriors.clone(),
        }
    }

    pub fn max_posterior(&self) -> f64 {
        self.posteriors.iter().copied().fold(0.0, f64::max)
    }

    /// Predicted class: argmax of the posteriors, ties to the lowest id.
    pub fn predicted_class(&self) -> usize {
        let mut best = 0;
        for (c, &p) in self.posteriors.iter().enumerate() {
            if p > self.posteriors[best] {
                best = c;
            }
        }
        best
    }
}

/// A set of box proposals sharing a class count `C`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionSet {
    pub class_count: usize,
    pub boxes: Vec<BoxProposal>,
}

impl DetectionSet {
    pub fn new(class_count: usize, boxes: Vec<BoxProposal>) -> Result<Self> {
        let set = Self { class_count, boxes };
        set.validate()?;
        Ok(set)
    }

    pub fn empty(class_count: usize) -> Self {
        Self { class_count, boxes: Vec::new() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.class_count == 0 {
            return input_err("detection set needs at least one class");
        }
        for b in &self.boxes {
            b.validate()?;
            if b.posteriors.len() != self.class_count {
                return input_err(format!(
                    "box has {} posteriors, set has {} classes",
                    b.posteriors.len(),
                    self.class_count
                ));
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.boxes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.boxes.is_empty()
    }
}

/// Dense `width x height x classes` probability grid, stored row-major with the
/// class index fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegGrid {
    pub width: usize,
    pub height: usize,
    pub classes: usize,
    pub probs: Vec<f64>,
}

impl SegGrid {
    pub fn zeros(width: usize, height: usize, classes: usize) -> Self {
        Self { width, height, classes, probs: vec![0.0; width * height * classes] }
    }

    pub fn filled(width: usize, height: usize, classes: usize, value: f64) -> Self {
        Self { width, height, classes, probs: vec![value; width * height * classes] }
    }

    pub fn from_vec(width: usize, height: usize, classes: usize, probs: Vec<f64>) -> Result<Self> {
        let g = Self { width, height, classes, probs };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.classes == 0 {
            return input_err("segmentation grid dimensions must be positive");
        }
        if self.probs.len() != self.width * self.height * self.classes {
            return input_err(format!(
                "grid buffer has {} entries, expected {}",
                self.probs.len(),
                self.width * self.height * self.classes
            ));
        }
        if self.probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return input_err("grid probabilities must lie in [0, 1]");
        }
        Ok(())
    }

    pub fn pixels(&self) -> usize {
        self.width * self.height
    }

    pub fn same_shape(&self, other: &SegGrid) -> bool {
        self.width == other.width && self.height == other.height && self.classes == other.classes
    }

    pub fn index(&self, x: usize, y: usize, c: usize) -> usize {
        (y * self.width + x) * self.classes + c
    }

    pub fn get(&self, x: usize, y: usize, c: usize) -> f64 {
        self.probs[self.index(x, y, c)]
    }

    pub fn set(&mut self, x: usize, y: usize, c: usize, value: f64) {
        let i = self.index(x, y, c);
        self.probs[i] = value;
    }
}

/// The unit compared by the consistency scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PerceptionOutput {
    Detection(DetectionSet),
    Segmentation(SegGrid),
}

impl PerceptionOutput {
    pub fn validate(&self) -> Result<()> {
        match self {
            PerceptionOutput::Detection(d) => d.validate(),
            PerceptionOutput::Segmentation(g) => g.validate(),
        }
    }

    pub fn as_detection(&self) -> Option<&DetectionSet> {
        match self {
            PerceptionOutput::Detection(d) => Some(d),
            PerceptionOutput::Segmentation(_) => None,
        }
    }

    pub fn as_segmentation(&self) -> Option<&SegGrid> {
        match self {
            PerceptionOutput::Segmentation(g) => Some(g),
            PerceptionOutput::Detection(_) => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            PerceptionOutput::Detection(_) => "detection",
            PerceptionOutput::Segmentation(_) => "segmentation",
        }
    }
}
