//! Image metrics and the disentanglement check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::compositing::DensityConfig;
use crate::error::{Error, Result};
use crate::field::{PartMask, SemanticScene, PART_NAMES};
use crate::image::Image;
use crate::render::{render_lowres, Camera, PixelOut, Pose, RenderBuffers, RenderOptions};

fn check_same(a: &Image, b: &Image) -> Result<()> {
    if a.same_shape(b) {
        Ok(())
    } else {
        Err(Error::ShapeMismatch {
            expected: a.shape_string(),
            actual: b.shape_string(),
        })
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    check_same(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| {
            let d = *x as f64 - *y as f64;
            d * d
        })
        .sum();
    Ok(sum / a.data().len() as f64)
}

/// Mean absolute error over every pixel and channel.
pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    check_same(a, b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (*x as f64 - *y as f64).abs())
        .sum();
    Ok(sum / a.data().len() as f64)
}

pub fn mae_per_channel(a: &Image, b: &Image) -> Result<Vec<f64>> {
    check_same(a, b)?;
    let c = a.channels();
    let mut sums = vec![0.0; c];
    for (i, (x, y)) in a.data().iter().zip(b.data()).enumerate() {
        sums[i % c] += (*x as f64 - *y as f64).abs();
    }
    let n = (a.width() * a.height()) as f64;
    Ok(sums.into_iter().map(|s| s / n).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Psnr {
    /// `None` when the images are identical.
    pub db: Option<f64>,
    pub infinite: bool,
}

impl Psnr {
    /// Infinite counts as meeting any threshold.
    pub fn at_least(&self, threshold: f64) -> bool {
        self.infinite || self.db.is_some_and(|d| d >= threshold)
    }
}

impl std::fmt::Display for Psnr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self.db {
            Some(d) => write!(f, "{d:.2} dB"),
            None => write!(f, "inf dB"),
        }
    }
}

/// Peak signal-to-noise ratio with a peak of 1.0.
pub fn psnr(a: &Image, b: &Image) -> Result<Psnr> {
    let m = mse(a, b)?;
    Ok(if m == 0.0 {
        Psnr {
            db: None,
            infinite: true,
        }
    } else {
        Psnr {
            db: Some(10.0 * (1.0 / m).log10()),
            infinite: false,
        }
    })
}

/// Mean absolute difference between the box-downsampled high-res image and
/// the low-res one.
pub fn upsample_consistency(hi: &Image, lo: &Image) -> Result<f64> {
    let mismatch = || Error::ShapeMismatch {
        expected: format!("an integer multiple of {}", lo.shape_string()),
        actual: hi.shape_string(),
    };
    if lo.width() == 0 || hi.width() % lo.width() != 0 || hi.channels() != lo.channels() {
        return Err(mismatch());
    }
    let factor = hi.width() / lo.width();
    if hi.height() != lo.height() * factor {
        return Err(mismatch());
    }
    mae(&hi.downsample_box(factor)?, lo)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalCounts {
    pub guided: u64,
    pub dense: u64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: Option<Psnr>,
    pub mae: Vec<f64>,
    pub upsample_consistency: Option<f64>,
    pub eval_counts: EvalCounts,
    /// Seconds per stage.
    pub wall_times: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub extraction: Vec<ExtractionReport>,
}

/// Pixel-wise agreement tolerance of the disentanglement check.
pub const EXTRACTION_TOLERANCE: f64 = 2e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionReport {
    pub part: String,
    /// Pixels where the part is absent from the full render.
    pub absent_pixels: usize,
    /// Color MAE there between "without the part" and "full".
    pub absent_mae: f64,
    /// Pixels the part covers on its own.
    pub present_pixels: usize,
    /// Color MAE there between "only the part" and "full".
    pub present_mae: f64,
    /// Largest deviation from unit length among the extracted part's
    /// foreground normals.
    pub normal_norm_error: f64,
    pub passed: bool,
}

fn vacuum(width: usize, height: usize, bg: [f64; 3], far: f64) -> RenderBuffers {
    let px = vec![PixelOut::background(bg, far); width * height];
    RenderBuffers::from_pixels(width, height, &px)
}

fn masked_color_mae(a: &Image, b: &Image, keep: &[bool]) -> (usize, f64) {
    let n = keep.iter().filter(|&&k| k).count();
    if n == 0 {
        return (0, 0.0);
    }
    let mut sum = 0.0;
    for (i, _) in keep.iter().enumerate().filter(|(_, &k)| k) {
        for c in 0..3 {
            sum += (a.data()[i * 3 + c] as f64 - b.data()[i * 3 + c] as f64).abs();
        }
    }
    (n, sum / (3 * n) as f64)
}

/// Renders the part alone, the scene without it, and the full scene, then
/// checks that removing the part leaves untouched pixels alone and that
/// extracting it reproduces the pixels it owns. `full` may be passed in to
/// share the full render between parts.
pub fn garment_extraction_check(
    scene: &SemanticScene,
    part: usize,
    pose: &Pose,
    camera: &Camera,
    cfg: &DensityConfig,
    opts: &RenderOptions,
    full: Option<&RenderBuffers>,
) -> Result<ExtractionReport> {
    let enabled = scene.enabled_mask();
    if !enabled.contains(part) {
        return Err(Error::InvalidRecipe(format!("part `{}` is disabled", PART_NAMES[part])));
    }
    let owned;
    let full = match full {
        Some(f) => f,
        None => {
            owned = render_lowres(scene, pose, camera, cfg, opts)?.buffers;
            &owned
        }
    };
    let only = render_lowres(&scene.with_enabled(PartMask::single(part)), pose, camera, cfg, opts)?.buffers;
    let mut rest_mask = enabled;
    rest_mask.remove(part);
    let without = if rest_mask.is_empty() {
        vacuum(camera.width(), camera.height(), opts.background, scene.far())
    } else {
        render_lowres(&scene.with_enabled(rest_mask), pose, camera, cfg, opts)?.buffers
    };

    let (w, h) = (camera.width(), camera.height());
    let s = |x: usize, y: usize| full.semantic.get(x, y, part) as f64;
    let mut absent = Vec::with_capacity(w * h);
    let mut present = Vec::with_capacity(w * h);
    let mut normal_err: f64 = 0.0;
    for y in 0..h {
        for x in 0..w {
            absent.push(s(x, y) < 1e-3);
            present.push(s(x, y) > 0.99);
            if only.is_foreground(x, y) {
                let n = only.normal.pixel(x, y);
                let len = (n.iter().map(|v| (*v as f64).powi(2)).sum::<f64>()).sqrt();
                normal_err = normal_err.max((len - 1.0).abs());
            }
        }
    }
    let (absent_pixels, absent_mae) = masked_color_mae(&without.color, &full.color, &absent);
    let (present_pixels, present_mae) = masked_color_mae(&only.color, &full.color, &present);
    Ok(ExtractionReport {
        part: PART_NAMES[part].to_string(),
        absent_pixels,
        absent_mae,
        present_pixels,
        present_mae,
        normal_norm_error: normal_err,
        passed: absent_mae <= EXTRACTION_TOLERANCE && present_mae <= EXTRACTION_TOLERANCE && normal_err <= 1e-5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Recipe;
    use crate::render::CameraSpec;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};

    #[test]
    fn psnr_closed_forms() {
        let a = Image::from_fn(8, 8, 3, |x, y, c| ((x + y + c) % 7) as f32 / 10.0);
        let p = psnr(&a, &a).unwrap();
        assert!(p.infinite && p.db.is_none() && p.at_least(1e9));
        let b = Image::from_fn(8, 8, 3, |x, y, c| a.get(x, y, c) + 0.1);
        assert_abs_diff_eq!(psnr(&a, &b).unwrap().db.unwrap(), 20.0, epsilon = 1e-5);
    }

    #[test]
    fn psnr_matches_direct_mse_under_noise() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let a = Image::from_fn(32, 32, 1, |_, _, _| rng.gen::<f32>());
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let noise: Vec<f32> = (0..1024).map(|_| rng.gen_range(-0.05f32..0.05)).collect();
        let b = Image::from_fn(32, 32, 1, |x, y, _| a.get(x, y, 0) + noise[y * 32 + x]);
        let direct: f64 = a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (*y as f64 - *x as f64).powi(2))
            .sum::<f64>()
            / 1024.0;
        let got = psnr(&a, &b).unwrap().db.unwrap();
        assert_abs_diff_eq!(got, 10.0 * (1.0 / direct).log10(), epsilon = 1e-3);
    }

    #[test]
    fn consistency_identities() {
        let lo = Image::from_fn(6, 4, 3, |x, y, c| ((x * y + c) % 5) as f32 / 5.0);
        let hi = lo.upsample_nearest(4);
        assert_eq!(upsample_consistency(&hi, &lo).unwrap(), 0.0);
        let biased = Image::from_fn(24, 16, 3, |x, y, c| hi.get(x, y, c) + 0.05);
        assert_abs_diff_eq!(upsample_consistency(&biased, &lo).unwrap(), 0.05, epsilon = 1e-6);
        assert!(upsample_consistency(&Image::new(25, 16, 3), &lo).is_err());
        assert!(psnr(&lo, &hi).is_err());
    }

    #[test]
    fn per_channel_mae() {
        let a = Image::new(2, 2, 3);
        let b = Image::from_fn(2, 2, 3, |_, _, c| c as f32);
        assert_eq!(mae_per_channel(&a, &b).unwrap(), vec![0.0, 1.0, 2.0]);
    }

    #[test]
    fn body_alone_extracts_exactly() {
        let scene = Recipe::default_figure().bake(32).unwrap().with_enabled(PartMask::single(0));
        let pose = Pose::identity(scene.skeleton());
        let cam = Camera::from_spec(&CameraSpec::front(16)).unwrap();
        let opts = RenderOptions {
            jitter: false,
            ..Default::default()
        };
        let r = garment_extraction_check(&scene, 0, &pose, &cam, &DensityConfig::default(), &opts, None).unwrap();
        assert_eq!(r.present_mae, 0.0);
        assert!(r.present_pixels > 0);
        assert!(r.passed, "{r:?}");
    }
}
