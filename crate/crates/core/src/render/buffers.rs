use std::path::Path;

use crate::error::Result;
use crate::field::{Vec3, PART_COUNT};
use crate::image::Image;
use crate::io::{read_pfm, read_pfm_planes, write_pfm, write_png};

use super::integrate::RayIntegral;

/// Pixels whose opacity falls below this are background.
pub const BACKGROUND_OPACITY: f64 = 0.01;

/// Final value of one pixel across all buffers.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PixelOut {
    pub color: [f32; 3],
    pub semantic: [f32; PART_COUNT],
    pub depth: f32,
    pub normal: [f32; 3],
    pub opacity: f32,
}

impl PixelOut {
    pub fn background(bg: [f64; 3], far: f64) -> Self {
        PixelOut {
            color: bg.map(|c| c as f32),
            semantic: [0.0; PART_COUNT],
            depth: far as f32,
            normal: [0.0; 3],
            opacity: 0.0,
        }
    }

    /// Composites a ray integral over the background. Foreground depth is
    /// the opacity-normalized expected depth, so it stays within the ray
    /// bounds.
    pub fn resolve(r: &RayIntegral, bg: [f64; 3], far: f64) -> Self {
        if r.opacity < BACKGROUND_OPACITY {
            return PixelOut::background(bg, far);
        }
        let clear = 1.0 - r.opacity;
        let normal = if r.normal == Vec3::zeros() {
            crate::compositing::NORMAL_FALLBACK
        } else {
            r.normal
        };
        PixelOut {
            color: [0, 1, 2].map(|c| (r.color[c] + clear * bg[c]) as f32),
            semantic: r.semantic.map(|s| s as f32),
            depth: (r.depth / r.opacity) as f32,
            normal: [normal.x as f32, normal.y as f32, normal.z as f32],
            opacity: r.opacity as f32,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderBuffers {
    pub color: Image,
    pub semantic: Image,
    pub depth: Image,
    pub normal: Image,
    pub opacity: Image,
}

impl RenderBuffers {
    pub fn from_pixels(width: usize, height: usize, pixels: &[PixelOut]) -> Self {
        assert_eq!(pixels.len(), width * height);
        let mut color = Vec::with_capacity(pixels.len() * 3);
        let mut semantic = Vec::with_capacity(pixels.len() * PART_COUNT);
        let mut depth = Vec::with_capacity(pixels.len());
        let mut normal = Vec::with_capacity(pixels.len() * 3);
        let mut opacity = Vec::with_capacity(pixels.len());
        for p in pixels {
            color.extend_from_slice(&p.color);
            semantic.extend_from_slice(&p.semantic);
            depth.push(p.depth);
            normal.extend_from_slice(&p.normal);
            opacity.push(p.opacity);
        }
        let img = |c, data| Image::from_vec(width, height, c, data).expect("buffer sizes agree");
        RenderBuffers {
            color: img(3, color),
            semantic: img(PART_COUNT, semantic),
            depth: img(1, depth),
            normal: img(3, normal),
            opacity: img(1, opacity),
        }
    }

    pub fn width(&self) -> usize {
        self.color.width()
    }

    pub fn height(&self) -> usize {
        self.color.height()
    }

    pub fn is_foreground(&self, x: usize, y: usize) -> bool {
        self.opacity.get(x, y, 0) as f64 >= BACKGROUND_OPACITY
    }

    /// Writes `color.png` plus one PFM per buffer into `dir`.
    pub fn save(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        write_png(dir.join("color.png"), &self.color)?;
        write_pfm(dir.join("color.pfm"), &self.color)?;
        write_pfm(dir.join("semantic.pfm"), &self.semantic)?;
        write_pfm(dir.join("depth.pfm"), &self.depth)?;
        write_pfm(dir.join("normal.pfm"), &self.normal)?;
        write_pfm(dir.join("opacity.pfm"), &self.opacity)?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let color = read_pfm(dir.join("color.pfm"))?;
        let semantic = read_pfm_planes(dir.join("semantic.pfm"), PART_COUNT)?;
        let depth = read_pfm(dir.join("depth.pfm"))?;
        let normal = read_pfm(dir.join("normal.pfm"))?;
        let opacity = read_pfm(dir.join("opacity.pfm"))?;
        for img in [&semantic, &depth, &normal, &opacity] {
            if (img.width(), img.height()) != (color.width(), color.height()) {
                return Err(crate::Error::ShapeMismatch {
                    expected: format!("{}x{}", color.width(), color.height()),
                    actual: img.shape_string(),
                });
            }
        }
        Ok(RenderBuffers {
            color,
            semantic,
            depth,
            normal,
            opacity,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn faint_pixels_become_background() {
        let r = RayIntegral {
            color: [0.005; 3],
            semantic: [0.001, 0.004, 0.0, 0.0, 0.0, 0.0],
            depth: 0.015,
            normal: Vec3::x(),
            opacity: 0.005,
        };
        let p = PixelOut::resolve(&r, [1.0; 3], 4.0);
        assert_eq!(p, PixelOut::background([1.0; 3], 4.0));
    }

    #[test]
    fn foreground_depth_is_normalized() {
        let r = RayIntegral {
            color: [0.25; 3],
            semantic: [0.5, 0.0, 0.0, 0.0, 0.0, 0.0],
            depth: 1.5,
            normal: Vec3::z(),
            opacity: 0.5,
        };
        let p = PixelOut::resolve(&r, [1.0, 0.0, 0.0], 4.0);
        assert_eq!(p.depth, 3.0);
        assert_eq!(p.color, [0.75, 0.25, 0.25]);
    }

    #[test]
    fn save_load_round_trip() {
        let px: Vec<PixelOut> = (0..6)
            .map(|i| PixelOut {
                color: [i as f32 / 6.0; 3],
                semantic: [0.1 * i as f32; PART_COUNT],
                depth: 2.0 + i as f32,
                normal: [0.0, 0.0, 1.0],
                opacity: 0.5,
            })
            .collect();
        let b = RenderBuffers::from_pixels(3, 2, &px);
        let dir = tempfile::tempdir().unwrap();
        b.save(dir.path()).unwrap();
        assert_eq!(RenderBuffers::load(dir.path()).unwrap(), b);
    }
}
