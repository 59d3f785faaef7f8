//! Wall-time and evaluation-count table for the dense and guided paths.

use std::io::Write;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::compositing::DensityConfig;
use crate::error::{Error, Result};
use crate::field::SemanticScene;
use crate::render::{render_lowres, Camera, Pose, RenderOptions};
use crate::superres::{superres, SuperResOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchConfig {
    pub low_res: usize,
    pub factor: usize,
    pub workers: Vec<usize>,
    pub render: RenderOptions,
    pub superres: SuperResOptions,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            low_res: 256,
            factor: 4,
            workers: vec![1],
            render: RenderOptions::default(),
            superres: SuperResOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    /// `dense<res>` or `guided<res>`.
    pub config: String,
    pub workers: usize,
    pub width: usize,
    pub height: usize,
    pub wall_seconds: f64,
    pub evaluations: u64,
    pub evaluations_per_pixel: f64,
}

pub const CSV_HEADER: &str = "config,workers,width,height,wall_seconds,evaluations,evaluations_per_pixel";

fn row(config: String, workers: usize, w: usize, h: usize, secs: f64, evals: u64) -> BenchRow {
    BenchRow {
        config,
        workers,
        width: w,
        height: h,
        wall_seconds: secs,
        evaluations: evals,
        evaluations_per_pixel: evals as f64 / (w * h) as f64,
    }
}

/// For each worker count: dense at the low resolution, dense at the high
/// resolution, and the guided pass fed by the low-res render. The guided time
/// covers guidance, gating, plane upsampling and the high-res pass.
pub fn bench(
    scene: &SemanticScene,
    pose: &Pose,
    camera: &Camera,
    cfg: &DensityConfig,
    config: &BenchConfig,
) -> Result<Vec<BenchRow>> {
    if config.workers.is_empty() {
        return Err(Error::Threads("no worker counts to benchmark".into()));
    }
    let lo_cam = camera.with_resolution(config.low_res, config.low_res);
    let hi_res = config.low_res * config.factor;
    let hi_cam = camera.with_resolution(hi_res, hi_res);
    let mut rows = Vec::new();
    for &workers in &config.workers {
        let ropts = RenderOptions {
            workers,
            ..config.render.clone()
        };
        let t = Instant::now();
        let lo = render_lowres(scene, pose, &lo_cam, cfg, &ropts)?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(row(
            format!("dense{}", config.low_res),
            workers,
            config.low_res,
            config.low_res,
            secs,
            lo.stats.total_evaluations(),
        ));

        let t = Instant::now();
        let hi = render_lowres(scene, pose, &hi_cam, cfg, &ropts)?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(row(format!("dense{hi_res}"), workers, hi_res, hi_res, secs, hi.stats.total_evaluations()));

        let sopts = SuperResOptions {
            workers,
            factor: config.factor,
            ..config.superres.clone()
        };
        let t = Instant::now();
        let sr = superres(scene, pose, &lo_cam, &lo.buffers, cfg, &sopts)?;
        let secs = t.elapsed().as_secs_f64();
        rows.push(row(format!("guided{hi_res}"), workers, hi_res, hi_res, secs, sr.stats.evaluations_guided));
    }
    Ok(rows)
}

pub fn write_csv(rows: &[BenchRow], out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Recipe;
    use crate::render::CameraSpec;

    #[test]
    fn counts_scale_with_pixels_and_ignore_workers() {
        let scene = Recipe::default_figure().bake(32).unwrap();
        let pose = Pose::identity(scene.skeleton());
        let cam = Camera::from_spec(&CameraSpec::front(8)).unwrap();
        let config = BenchConfig {
            low_res: 8,
            workers: vec![1, 3],
            ..Default::default()
        };
        let rows = bench(&scene, &pose, &cam, &DensityConfig::default(), &config).unwrap();
        assert_eq!(rows.len(), 6);
        assert_eq!(rows[1].evaluations, 16 * rows[0].evaluations);
        for i in 0..3 {
            assert_eq!(rows[i].evaluations, rows[i + 3].evaluations);
            assert_eq!(rows[i].config, rows[i + 3].config);
        }
        assert!(rows[2].evaluations < rows[1].evaluations);

        let mut buf = Vec::new();
        write_csv(&rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 7);
    }
}
