//! Dense reference renderer: the low-res pipeline with more samples, no
//! gating and, optionally, the high-res planes.

use crate::compositing::DensityConfig;
use crate::error::Result;
use crate::field::SemanticScene;
use crate::render::{render_lowres, Camera, Pose, Render, RenderOptions};
use crate::superres::HighResTriPlanes;

/// 72 stratified plus 72 importance samples, bin midpoints.
pub fn oracle_options(workers: usize) -> RenderOptions {
    RenderOptions {
        n_coarse: 72,
        n_fine: 72,
        jitter: false,
        workers,
        ..Default::default()
    }
}

pub fn render_dense_oracle(
    scene: &SemanticScene,
    hi: Option<&HighResTriPlanes>,
    pose: &Pose,
    camera: &Camera,
    cfg: &DensityConfig,
    opts: &RenderOptions,
) -> Result<Render> {
    match hi {
        Some(hi) => render_lowres(&hi.apply(scene)?, pose, camera, cfg, opts),
        None => render_lowres(scene, pose, camera, cfg, opts),
    }
}
