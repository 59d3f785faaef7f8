//! Low-resolution volume renderer: camera rays, posed-space sampling,
//! inverse skinning, shading and quadrature.

pub mod buffers;
pub mod camera;
pub mod integrate;
pub mod pose;
pub mod sampling;

use serde::{Deserialize, Serialize};

use crate::compositing::{normal_masked, shade_masked, DensityConfig, PointShading, NORMAL_EPS};
use crate::error::{Error, Result};
use crate::field::{PartMask, SemanticScene, Vec3};

pub use buffers::{PixelOut, RenderBuffers, BACKGROUND_OPACITY};
pub use camera::{Camera, CameraSpec, Ray};
pub use integrate::{integrate_ray, intervals, quadrature_weights, IntervalRule, RayIntegral, SampleSet, NORMAL_WEIGHT_MIN};
pub use pose::{Pose, PoseSpec, PosedSkeleton};
pub use sampling::{coarse_depths, importance_depths, pixel_rng, ImportanceDraw};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    pub n_coarse: usize,
    pub n_fine: usize,
    /// Stratified jitter; off means bin midpoints.
    pub jitter: bool,
    pub seed: u64,
    pub background: [f64; 3],
    /// Worker threads; 0 uses every available core.
    pub workers: usize,
    pub normal_eps: f64,
}

impl Default for RenderOptions {
    fn default() -> Self {
        RenderOptions {
            n_coarse: 36,
            n_fine: 36,
            jitter: true,
            seed: 0,
            background: [1.0; 3],
            workers: 0,
            normal_eps: NORMAL_EPS,
        }
    }
}

impl RenderOptions {
    pub fn validate(&self) -> Result<()> {
        if self.n_coarse < 2 {
            return Err(Error::InvalidRecipe(format!(
                "need at least 2 coarse samples, got {}",
                self.n_coarse
            )));
        }
        if !(self.normal_eps > 0.0) {
            return Err(Error::InvalidRecipe("normal step must be positive".into()));
        }
        Ok(())
    }
}

/// Per-pixel instrumentation.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct PixelStats {
    /// Part-field evaluations made while shading.
    pub evaluations: u32,
    /// Central-difference normals, each costing six summed-SDF lookups.
    pub normal_evaluations: u32,
    pub degenerate_normals: u32,
    pub importance_fallback: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderStats {
    pub width: usize,
    pub height: usize,
    pub evaluations: Vec<u32>,
    pub normal_evaluations: u64,
    pub degenerate_normals: u64,
    pub importance_fallbacks: u64,
}

impl RenderStats {
    fn collect(width: usize, height: usize, px: &[PixelStats]) -> Self {
        RenderStats {
            width,
            height,
            evaluations: px.iter().map(|p| p.evaluations).collect(),
            normal_evaluations: px.iter().map(|p| p.normal_evaluations as u64).sum(),
            degenerate_normals: px.iter().map(|p| p.degenerate_normals as u64).sum(),
            importance_fallbacks: px.iter().filter(|p| p.importance_fallback).count() as u64,
        }
    }

    pub fn total_evaluations(&self) -> u64 {
        self.evaluations.iter().map(|&e| e as u64).sum()
    }

    pub fn evaluations_at(&self, x: usize, y: usize) -> u32 {
        self.evaluations[y * self.width + x]
    }
}

#[derive(Clone, Debug)]
pub struct Render {
    pub buffers: RenderBuffers,
    pub stats: RenderStats,
}

/// One shaded sample, with what normal evaluation needs later.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Shaded {
    pub shading: PointShading,
    pub canonical: Vec3,
    pub bone: usize,
}

/// Everything needed to trace rays through one posed scene.
pub(crate) struct Tracer<'a> {
    pub scene: &'a SemanticScene,
    pub posed: PosedSkeleton,
    pub camera: &'a Camera,
    pub cfg: DensityConfig,
    pub normal_eps: f64,
}

impl<'a> Tracer<'a> {
    pub fn new(
        scene: &'a SemanticScene,
        pose: &Pose,
        camera: &'a Camera,
        cfg: &DensityConfig,
        normal_eps: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        if scene.enabled_mask().is_empty() {
            return Err(Error::EmptyScene);
        }
        Ok(Tracer {
            scene,
            posed: PosedSkeleton::new(scene.skeleton(), pose)?,
            camera,
            cfg: *cfg,
            normal_eps,
        })
    }

    pub fn ray(&self, px: usize, py: usize) -> Ray {
        self.camera.ray(px, py, self.scene.near(), self.scene.far())
    }

    #[inline]
    pub fn shade(&self, ray: &Ray, t: f64, mask: PartMask) -> Shaded {
        let (canonical, bone) = self.posed.deform_to_canonical(&ray.at(t));
        Shaded {
            shading: shade_masked(self.scene, &canonical, &self.cfg, mask),
            canonical,
            bone,
        }
    }

    /// Quadrature over already shaded samples. Normals are evaluated only
    /// where the sample weight exceeds [`NORMAL_WEIGHT_MIN`].
    pub fn resolve(
        &self,
        depths: Vec<f64>,
        mut samples: Vec<Shaded>,
        rule: IntervalRule,
        mask: PartMask,
        stats: &mut PixelStats,
    ) -> RayIntegral {
        let ivals = intervals(&depths, rule);
        let densities: Vec<f64> = samples.iter().map(|s| s.shading.density).collect();
        let weights = quadrature_weights(&densities, &ivals);
        for (s, w) in samples.iter_mut().zip(&weights) {
            if *w > NORMAL_WEIGHT_MIN {
                let est = normal_masked(self.scene, &s.canonical, self.normal_eps, mask);
                stats.normal_evaluations += 1;
                stats.degenerate_normals += est.degenerate as u32;
                s.shading.normal = Some(self.posed.rotate_to_posed(s.bone, &est.normal));
            }
        }
        let set = SampleSet {
            depths,
            shadings: samples.into_iter().map(|s| s.shading).collect(),
            intervals: ivals,
        };
        integrate_ray(&set)
    }
}

/// Coarse then importance depths for one pixel, merged and shaded.
pub(crate) fn dense_samples(
    tr: &Tracer,
    opts: &RenderOptions,
    mask: PartMask,
    ray: &Ray,
    stats: &mut PixelStats,
) -> (Vec<f64>, Vec<Shaded>) {
    let (px, py) = ray.pixel;
    let mut rng = opts.jitter.then(|| pixel_rng(opts.seed, px, py));
    let coarse = coarse_depths(ray.near, ray.far, opts.n_coarse, rng.as_mut());
    let coarse_shaded: Vec<Shaded> = coarse.iter().map(|&t| tr.shade(ray, t, mask)).collect();
    stats.evaluations += (opts.n_coarse as u32) * mask.count();
    if opts.n_fine == 0 {
        return (coarse, coarse_shaded);
    }

    let densities: Vec<f64> = coarse_shaded.iter().map(|s| s.shading.density).collect();
    let rule = IntervalRule { far: ray.far, floor: 0.0 };
    let weights = quadrature_weights(&densities, &intervals(&coarse, rule));
    let draw = importance_depths(ray.near, ray.far, &weights, opts.n_fine, rng.as_mut());
    stats.importance_fallback = draw.fallback;
    let fine_shaded: Vec<Shaded> = draw.depths.iter().map(|&t| tr.shade(ray, t, mask)).collect();
    stats.evaluations += (opts.n_fine as u32) * mask.count();

    // merge two sorted lists; ties keep the coarse sample first
    let n = coarse.len() + draw.depths.len();
    let mut depths = Vec::with_capacity(n);
    let mut shaded = Vec::with_capacity(n);
    let (mut i, mut j) = (0, 0);
    while i < coarse.len() || j < draw.depths.len() {
        if j >= draw.depths.len() || (i < coarse.len() && coarse[i] <= draw.depths[j]) {
            depths.push(coarse[i]);
            shaded.push(coarse_shaded[i]);
            i += 1;
        } else {
            depths.push(draw.depths[j]);
            shaded.push(fine_shaded[j]);
            j += 1;
        }
    }
    (depths, shaded)
}

fn worker_count(requested: usize) -> usize {
    if requested > 0 {
        requested
    } else {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    }
}

/// Evaluates `f` for every pixel in row-major order on a dedicated pool.
/// Rows are the unit of work; the output order never depends on scheduling.
pub(crate) fn par_pixels<T, F>(width: usize, height: usize, workers: usize, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(usize, usize) -> T + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(worker_count(workers))
        .build()
        .map_err(|e| Error::Threads(e.to_string()))?;
    let rows: Vec<Vec<T>> = pool.install(|| {
        (0..height)
            .into_par_iter()
            .map(|y| (0..width).map(|x| f(x, y)).collect())
            .collect()
    });
    Ok(rows.into_iter().flatten().collect())
}

pub(crate) fn assemble(width: usize, height: usize, px: Vec<(PixelOut, PixelStats)>) -> Render {
    let (pixels, stats): (Vec<PixelOut>, Vec<PixelStats>) = px.into_iter().unzip();
    Render {
        buffers: RenderBuffers::from_pixels(width, height, &pixels),
        stats: RenderStats::collect(width, height, &stats),
    }
}

/// Renders at caller-chosen depths. `plan` returns the sorted depths and the
/// parts to shade for a ray, or `None` to leave the pixel as background
/// without touching the fields.
pub(crate) fn render_planned<F>(
    tr: &Tracer,
    background: [f64; 3],
    workers: usize,
    floor: f64,
    plan: F,
) -> Result<Render>
where
    F: Fn(&Ray) -> Option<(Vec<f64>, PartMask)> + Sync,
{
    let (w, h) = (tr.camera.width(), tr.camera.height());
    let far = tr.scene.far();
    let enabled = tr.scene.enabled_mask();
    let px = par_pixels(w, h, workers, |x, y| {
        let mut stats = PixelStats::default();
        let ray = tr.ray(x, y);
        let Some((depths, mask)) = plan(&ray) else {
            return (PixelOut::background(background, far), stats);
        };
        let mask = mask.intersect(enabled);
        if mask.is_empty() {
            return (PixelOut::background(background, far), stats);
        }
        let shaded = depths.iter().map(|&t| tr.shade(&ray, t, mask)).collect();
        stats.evaluations = depths.len() as u32 * mask.count();
        let r = tr.resolve(depths, shaded, IntervalRule { far, floor }, mask, &mut stats);
        (PixelOut::resolve(&r, background, far), stats)
    })?;
    Ok(assemble(w, h, px))
}

/// Renders every buffer at the camera's resolution with `n_coarse`
/// stratified plus `n_fine` importance samples per pixel.
pub fn render_lowres(
    scene: &SemanticScene,
    pose: &Pose,
    camera: &Camera,
    cfg: &DensityConfig,
    opts: &RenderOptions,
) -> Result<Render> {
    opts.validate()?;
    let tr = Tracer::new(scene, pose, camera, cfg, opts.normal_eps)?;
    let mask = scene.enabled_mask();
    let rule = IntervalRule {
        far: scene.far(),
        floor: 0.0,
    };
    let px = par_pixels(camera.width(), camera.height(), opts.workers, |x, y| {
        let mut stats = PixelStats::default();
        let ray = tr.ray(x, y);
        let (depths, shaded) = dense_samples(&tr, opts, mask, &ray, &mut stats);
        let r = tr.resolve(depths, shaded, rule, mask, &mut stats);
        (PixelOut::resolve(&r, opts.background, scene.far()), stats)
    })?;
    Ok(assemble(camera.width(), camera.height(), px))
}
