use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::compositing::{DensityConfig, NORMAL_EPS};
use crate::error::{Error, Result};
use crate::field::SemanticScene;
use crate::io::{write_json, write_pfm};
use crate::render::{render_planned, Camera, Pose, Render, RenderBuffers, Tracer};

use super::gate::{upsample_semantic, SemanticGate, DEFAULT_DELTA};
use super::guidance::{aggregate_depths, centre_only_depths, sort_and_upsample, DepthGuidance, CANDIDATES};
use super::planes::{upsample_triplanes, HighResTriPlanes};

/// Coarse samples per ray in the dense scheme the guided path replaces.
pub const DENSE_SAMPLES: u64 = 72;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperResOptions {
    pub factor: usize,
    /// Probe offset; `None` means one coarse step, `(far - near) / 72`.
    pub tau: Option<f64>,
    pub delta: f64,
    /// Gather the 3x3 neighbourhood; off keeps only the centre depth.
    pub aggregate: bool,
    pub background: [f64; 3],
    pub workers: usize,
    pub normal_eps: f64,
}

impl Default for SuperResOptions {
    fn default() -> Self {
        SuperResOptions {
            factor: 4,
            tau: None,
            delta: DEFAULT_DELTA,
            aggregate: true,
            background: [1.0; 3],
            workers: 0,
            normal_eps: NORMAL_EPS,
        }
    }
}

impl SuperResOptions {
    pub fn tau_for(&self, scene: &SemanticScene) -> f64 {
        self.tau
            .unwrap_or((scene.far() - scene.near()) / DENSE_SAMPLES as f64)
    }
}

/// Renders only at the guided depths and only the gated parts. Intervals
/// between consecutive candidates are floored at `tau / 4`.
#[allow(clippy::too_many_arguments)]
pub fn render_highres_guided(
    scene: &SemanticScene,
    hi: &HighResTriPlanes,
    pose: &Pose,
    camera: &Camera,
    guidance: &DepthGuidance,
    gate: &SemanticGate,
    cfg: &DensityConfig,
    opts: &SuperResOptions,
) -> Result<Render> {
    let size = (camera.width(), camera.height());
    for (what, got) in [
        ("depth guidance", (guidance.width(), guidance.height())),
        ("semantic gate", (gate.width(), gate.height())),
    ] {
        if got != size {
            return Err(Error::ShapeMismatch {
                expected: format!("{what} at {}x{}", size.0, size.1),
                actual: format!("{}x{}", got.0, got.1),
            });
        }
    }
    let hi_scene = hi.apply(scene)?;
    let tr = Tracer::new(&hi_scene, pose, camera, cfg, opts.normal_eps)?;
    render_planned(&tr, opts.background, opts.workers, guidance.tau / 4.0, |ray| {
        let (x, y) = ray.pixel;
        let mask = gate.gates(x, y);
        (!mask.is_empty()).then(|| (guidance.depths(x, y), mask))
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SuperResStats {
    pub evaluations_guided: u64,
    pub evaluations_dense_equivalent: u64,
    pub reduction_ratio: f64,
    pub open_gates_mean: f64,
    pub foreground_pixels: usize,
    /// Largest per-pixel count among foreground pixels.
    pub max_evaluations_per_pixel: u32,
    pub tau: f64,
    pub delta: f64,
}

#[derive(Clone, Debug)]
pub struct SuperRes {
    pub render: Render,
    pub guidance: DepthGuidance,
    pub gate: SemanticGate,
    pub stats: SuperResStats,
}

impl SuperRes {
    /// The high-res buffers, the upsampled gate weights as `gate.pfm` and
    /// the counters as `stats.json`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        self.render.buffers.save(dir)?;
        write_pfm(dir.join("gate.pfm"), &self.gate.weights)?;
        write_json(dir.join("stats.json"), &self.stats)
    }
}

/// The whole second stage: guidance and gates from the low-res buffers,
/// high-res planes, then the guided render at `factor` times `camera`'s
/// resolution.
pub fn superres(
    scene: &SemanticScene,
    pose: &Pose,
    camera: &Camera,
    lowres: &RenderBuffers,
    cfg: &DensityConfig,
    opts: &SuperResOptions,
) -> Result<SuperRes> {
    if (lowres.width(), lowres.height()) != (camera.width(), camera.height()) {
        return Err(Error::ShapeMismatch {
            expected: format!("low-res buffers at {}x{}", camera.width(), camera.height()),
            actual: format!("{}x{}", lowres.width(), lowres.height()),
        });
    }
    let tau = opts.tau_for(scene);
    let candidates = if opts.aggregate {
        aggregate_depths(&lowres.depth, tau)?
    } else {
        centre_only_depths(&lowres.depth, tau)?
    };
    let guidance = sort_and_upsample(&candidates, tau, opts.factor)?;
    let gate = upsample_semantic(&lowres.semantic, &lowres.opacity, opts.factor, opts.delta)?;
    let hi = upsample_triplanes(scene, opts.factor)?;
    let camera_hi = camera.with_resolution(camera.width() * opts.factor, camera.height() * opts.factor);
    let render = render_highres_guided(scene, &hi, pose, &camera_hi, &guidance, &gate, cfg, opts)?;

    let pixels = (camera_hi.width() * camera_hi.height()) as u64;
    let guided = render.stats.total_evaluations();
    let dense = pixels * DENSE_SAMPLES * scene.enabled_mask().count() as u64;
    let stats = SuperResStats {
        evaluations_guided: guided,
        evaluations_dense_equivalent: dense,
        reduction_ratio: guided as f64 / dense as f64,
        open_gates_mean: gate.open_gates_mean(),
        foreground_pixels: gate.foreground_pixels(),
        max_evaluations_per_pixel: render.stats.evaluations.iter().copied().max().unwrap_or(0),
        tau,
        delta: opts.delta,
    };
    debug_assert!(render
        .stats
        .evaluations
        .iter()
        .all(|&e| e as usize <= CANDIDATES * crate::field::PART_COUNT));
    Ok(SuperRes {
        render,
        guidance,
        gate,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{PartMask, Recipe};
    use crate::render::{dense_samples, render_lowres, CameraSpec, PixelStats, RenderOptions};

    fn setup(res: usize) -> (SemanticScene, Pose, Camera) {
        let scene = Recipe::default_figure().bake(64).unwrap();
        let pose = Pose::identity(scene.skeleton());
        let cam = Camera::from_spec(&CameraSpec::front(res)).unwrap();
        (scene, pose, cam)
    }

    #[test]
    fn all_open_gates_with_dense_depths_reproduce_the_dense_render() {
        let (scene, pose, cam) = setup(20);
        let cfg = DensityConfig::default();
        let ro = RenderOptions {
            workers: 2,
            ..Default::default()
        };
        let dense = render_lowres(&scene, &pose, &cam, &cfg, &ro).unwrap();
        let tr = Tracer::new(&scene, &pose, &cam, &cfg, ro.normal_eps).unwrap();
        let planned = render_planned(&tr, ro.background, 2, 0.0, |ray| {
            let (depths, _) = dense_samples(&tr, &ro, PartMask::ALL, ray, &mut PixelStats::default());
            Some((depths, PartMask::ALL))
        })
        .unwrap();
        assert_eq!(planned.buffers, dense.buffers);
        assert_eq!(planned.stats.evaluations, dense.stats.evaluations);
    }

    #[test]
    fn guided_counts_respect_the_gates() {
        let (scene, pose, cam) = setup(16);
        let cfg = DensityConfig::default();
        let low = render_lowres(&scene, &pose, &cam, &cfg, &RenderOptions::default()).unwrap();
        let sr = superres(&scene, &pose, &cam, &low.buffers, &cfg, &SuperResOptions::default()).unwrap();
        let r = &sr.render;
        assert_eq!((r.buffers.width(), r.buffers.height()), (64, 64));
        let mut fg = 0;
        for y in 0..64 {
            for x in 0..64 {
                let e = r.stats.evaluations_at(x, y);
                let gates = sr.gate.gates(x, y);
                if gates.is_empty() {
                    assert_eq!(e, 0);
                    assert_eq!(r.buffers.color.pixel(x, y), &[1.0, 1.0, 1.0]);
                } else {
                    fg += 1;
                    assert_eq!(e, 11 * gates.count());
                }
            }
        }
        assert!(fg > 0);
        assert_eq!(sr.stats.foreground_pixels, fg);
        assert!(sr.stats.reduction_ratio < 11.0 / 72.0);
    }

    #[test]
    fn resolution_mismatch_is_rejected() {
        let (scene, pose, cam) = setup(8);
        let cfg = DensityConfig::default();
        let low = render_lowres(&scene, &pose, &cam, &cfg, &RenderOptions::default()).unwrap();
        let other = cam.with_resolution(9, 9);
        assert!(superres(&scene, &pose, &other, &low.buffers, &cfg, &SuperResOptions::default()).is_err());
    }
}
