//! Point shading: per-part densities from the body prior plus each part's SDF
//! offset, semantic weights as each part's share of the total density, the
//! density-weighted color blend, and normals from the gradient of the summed
//! SDF.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{PartMask, SemanticScene, Vec3, PART_COUNT};

/// Which side of the surface the sigmoid makes dense.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DensitySign {
    /// `sigmoid(+sdf / beta)`: literal form, dense outside the surface.
    Positive,
    /// `sigmoid(-sdf / beta)`: dense inside the surface.
    Negative,
}

impl DensitySign {
    #[inline]
    pub fn value(self) -> f64 {
        match self {
            DensitySign::Positive => 1.0,
            DensitySign::Negative => -1.0,
        }
    }

    pub fn from_value(v: i32) -> Option<Self> {
        match v {
            1 => Some(DensitySign::Positive),
            -1 => Some(DensitySign::Negative),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityConfig {
    /// Sigmoid length scale, in scene units.
    pub beta: f64,
    pub sign: DensitySign,
    /// Peak density.
    pub scale: f64,
}

impl Default for DensityConfig {
    fn default() -> Self {
        DensityConfig {
            beta: 0.005,
            sign: DensitySign::Negative,
            scale: 200.0,
        }
    }
}

impl DensityConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::InvalidRecipe(format!("beta must be positive, got {}", self.beta)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::InvalidRecipe(format!(
                "density scale must be positive, got {}",
                self.scale
            )));
        }
        Ok(())
    }
}

/// Numerically stable logistic function.
#[inline]
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Density of one part from the body SDF and the part's SDF offset.
#[inline]
pub fn part_density(d_body: f64, delta: f64, cfg: &DensityConfig) -> f64 {
    cfg.scale * logistic(cfg.sign.value() * (d_body + delta) / cfg.beta)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointShading {
    pub density: f64,
    pub color: [f64; 3],
    pub semantic: [f64; PART_COUNT],
    pub normal: Option<Vec3>,
}

impl PointShading {
    pub const VACUUM: PointShading = PointShading {
        density: 0.0,
        color: [0.0; 3],
        semantic: [0.0; PART_COUNT],
        normal: None,
    };
}

/// Shades `x` using the parts in `mask`. Every part outside `mask`
/// contributes exactly nothing; semantic weights are normalized over the
/// parts inside it. Performs `mask.count()` field evaluations.
#[inline]
pub fn shade_masked(scene: &SemanticScene, x: &Vec3, cfg: &DensityConfig, mask: PartMask) -> PointShading {
    let d_body = scene.body_sdf(x);
    let mut sigma = [0.0f64; PART_COUNT];
    let mut colors = [[0.0f64; 3]; PART_COUNT];
    let mut total = 0.0;
    for k in mask.iter() {
        let s = scene.sample_part(k, x);
        let part_sigma = scene.part(k).density_scale * part_density(d_body, s.sdf_offset, cfg);
        sigma[k] = part_sigma;
        colors[k] = s.color;
        total += part_sigma;
    }
    let mut out = PointShading::VACUUM;
    if total > 0.0 {
        out.density = total;
        for k in mask.iter() {
            let w = sigma[k] / total;
            out.semantic[k] = w;
            for c in 0..3 {
                out.color[c] += w * colors[k][c];
            }
        }
    }
    out
}

/// Shades `x` over the scene's enabled parts.
pub fn shade_point(scene: &SemanticScene, x: &Vec3, cfg: &DensityConfig) -> Result<PointShading> {
    let mask = scene.enabled_mask();
    if mask.is_empty() {
        return Err(Error::EmptyScene);
    }
    Ok(shade_masked(scene, x, cfg, mask))
}

/// The summed SDF `d_body + Σ offset_k` over the parts in `mask`.
#[inline]
pub fn summed_sdf(scene: &SemanticScene, x: &Vec3, mask: PartMask) -> f64 {
    mask.iter()
        .fold(scene.body_sdf(x), |acc, k| acc + scene.sample_part(k, x).sdf_offset)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NormalEstimate {
    pub normal: Vec3,
    /// Set when the gradient vanished and `normal` is the +Z fallback.
    pub degenerate: bool,
}

pub const NORMAL_FALLBACK: Vec3 = Vec3::new(0.0, 0.0, 1.0);

/// Default central-difference step.
pub const NORMAL_EPS: f64 = 1e-3;

/// Unit normal from central differences of [`summed_sdf`].
pub fn normal_masked(scene: &SemanticScene, x: &Vec3, eps: f64, mask: PartMask) -> NormalEstimate {
    let mut grad = Vec3::zeros();
    for axis in 0..3 {
        let mut h = Vec3::zeros();
        h[axis] = eps;
        grad[axis] = summed_sdf(scene, &(x + h), mask) - summed_sdf(scene, &(x - h), mask);
    }
    let n = grad.norm();
    if n > 1e-12 && n.is_finite() {
        NormalEstimate {
            normal: grad / n,
            degenerate: false,
        }
    } else {
        NormalEstimate {
            normal: NORMAL_FALLBACK,
            degenerate: true,
        }
    }
}

/// Normal over the scene's enabled parts.
pub fn normal_at(scene: &SemanticScene, x: &Vec3, eps: f64) -> NormalEstimate {
    assert!(eps > 0.0, "normal step must be positive");
    normal_masked(scene, x, eps, scene.enabled_mask())
}
