//! Semantic gating: upsample the low-res semantic mask and keep, per
//! high-res pixel, only the parts whose weight reaches `delta`.

use crate::error::{Error, Result};
use crate::field::{PartMask, PART_COUNT};
use crate::image::Image;
use crate::render::BACKGROUND_OPACITY;

use super::fir;

pub const DEFAULT_DELTA: f64 = 0.0005;

#[derive(Clone, Debug, PartialEq)]
pub struct SemanticGate {
    /// Upsampled semantic weights, `PART_COUNT` channels.
    pub weights: Image,
    /// Upsampled opacity; below [`BACKGROUND_OPACITY`] a pixel is background.
    pub opacity: Image,
    pub delta: f64,
    gates: Vec<PartMask>,
}

impl SemanticGate {
    pub fn width(&self) -> usize {
        self.weights.width()
    }

    pub fn height(&self) -> usize {
        self.weights.height()
    }

    /// Open parts at a pixel; empty for background.
    pub fn gates(&self, x: usize, y: usize) -> PartMask {
        self.gates[y * self.width() + x]
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.opacity.get(x, y, 0) as f64 >= BACKGROUND_OPACITY
    }

    /// Mean open-gate count over foreground pixels.
    pub fn open_gates_mean(&self) -> f64 {
        let fg: Vec<u32> = self
            .gates
            .iter()
            .filter(|g| !g.is_empty())
            .map(|g| g.count())
            .collect();
        if fg.is_empty() {
            return 0.0;
        }
        fg.iter().map(|&c| c as f64).sum::<f64>() / fg.len() as f64
    }

    pub fn foreground_pixels(&self) -> usize {
        self.gates.iter().filter(|g| !g.is_empty()).count()
    }
}

/// Upsamples semantics and opacity by `factor` and thresholds the gates.
/// On foreground pixels the strongest part is always open, even if it falls
/// below `delta`.
pub fn upsample_semantic(semantic: &Image, opacity: &Image, factor: usize, delta: f64) -> Result<SemanticGate> {
    if semantic.channels() != PART_COUNT || opacity.channels() != 1 {
        return Err(Error::ShapeMismatch {
            expected: format!("{PART_COUNT}-channel semantics and 1-channel opacity"),
            actual: format!("{} and {}", semantic.shape_string(), opacity.shape_string()),
        });
    }
    if (semantic.width(), semantic.height()) != (opacity.width(), opacity.height()) {
        return Err(Error::ShapeMismatch {
            expected: semantic.shape_string(),
            actual: opacity.shape_string(),
        });
    }
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(Error::InvalidRecipe(format!("delta must be non-negative, got {delta}")));
    }
    let weights = fir::upsample(semantic, factor)?;
    let opacity = fir::upsample(opacity, factor)?;
    let mut gates = Vec::with_capacity(weights.width() * weights.height());
    for y in 0..weights.height() {
        for x in 0..weights.width() {
            let mut g = PartMask::NONE;
            if opacity.get(x, y, 0) as f64 >= BACKGROUND_OPACITY {
                let w = weights.pixel(x, y);
                let mut best = 0;
                for k in 0..PART_COUNT {
                    if w[k] as f64 >= delta {
                        g.insert(k);
                    }
                    if w[k] > w[best] {
                        best = k;
                    }
                }
                g.insert(best);
            }
            gates.push(g);
        }
    }
    Ok(SemanticGate {
        weights,
        opacity,
        delta,
        gates,
    })
}
