//! Tri-plane feature grids.
//!
//! A tri-plane stores three axis-aligned 2D grids (XY, XZ, YZ) over a box.
//! A 3D point reads each plane bilinearly at its two matching coordinates and
//! the three results are summed channel-wise. Channel 0 holds the SDF offset,
//! channels 1..4 hold RGB color.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Vec3 = Vector3<f64>;

/// Number of channels every part field carries: SDF offset plus RGB.
pub const FIELD_CHANNELS: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum PlaneAxis {
    Xy = 0,
    Xz = 1,
    Yz = 2,
}

impl PlaneAxis {
    pub const ALL: [PlaneAxis; 3] = [PlaneAxis::Xy, PlaneAxis::Xz, PlaneAxis::Yz];

    /// World axes indexed by (column, row) of this plane.
    #[inline]
    pub fn axes(self) -> (usize, usize) {
        match self {
            PlaneAxis::Xy => (0, 1),
            PlaneAxis::Xz => (0, 2),
            PlaneAxis::Yz => (1, 2),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub const UNIT: Aabb = Aabb {
        min: [-1.0; 3],
        max: [1.0; 3],
    };

    pub fn is_valid(&self) -> bool {
        (0..3).all(|i| self.min[i].is_finite() && self.max[i].is_finite() && self.min[i] < self.max[i])
    }

    #[inline]
    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|i| other.min[i] >= self.min[i] && other.max[i] <= self.max[i])
    }

    /// Euclidean distance from `p` to the box; zero inside.
    #[inline]
    pub fn distance(&self, p: &Vec3) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            let d = (self.min[i] - p[i]).max(p[i] - self.max[i]).max(0.0);
            acc += d * d;
        }
        acc.sqrt()
    }

    #[inline]
    pub fn extent(&self, axis: usize) -> f64 {
        self.max[axis] - self.min[axis]
    }
}

/// Storage for one plane. All-zero planes are kept implicit so that empty
/// planes cost nothing to store or sample.
#[derive(Clone, Debug, PartialEq)]
pub enum PlaneData {
    Zero,
    Dense(Vec<f32>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct TriPlane {
    resolution: usize,
    channels: usize,
    bbox: Aabb,
    planes: [PlaneData; 3],
}

impl TriPlane {
    pub fn zeros(resolution: usize, channels: usize, bbox: Aabb) -> Result<Self> {
        if resolution < 2 || !resolution.is_power_of_two() {
            return Err(Error::InvalidRecipe(format!(
                "tri-plane resolution must be a power of two >= 2, got {resolution}"
            )));
        }
        if channels < FIELD_CHANNELS {
            return Err(Error::InvalidRecipe(format!(
                "tri-plane needs at least {FIELD_CHANNELS} channels, got {channels}"
            )));
        }
        if !bbox.is_valid() {
            return Err(Error::InvalidRecipe(format!("degenerate bbox {bbox:?}")));
        }
        Ok(TriPlane {
            resolution,
            channels,
            bbox,
            planes: [PlaneData::Zero, PlaneData::Zero, PlaneData::Zero],
        })
    }

    #[inline]
    pub fn resolution(&self) -> usize {
        self.resolution
    }

    #[inline]
    pub fn channels(&self) -> usize {
        self.channels
    }

    #[inline]
    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn plane(&self, axis: PlaneAxis) -> &PlaneData {
        &self.planes[axis as usize]
    }

    /// Plane values as a dense slice, materializing zeros.
    pub fn plane_values(&self, axis: PlaneAxis) -> Vec<f32> {
        match &self.planes[axis as usize] {
            PlaneData::Zero => vec![0.0; self.plane_len()],
            PlaneData::Dense(v) => v.clone(),
        }
    }

    #[inline]
    pub fn plane_len(&self) -> usize {
        self.resolution * self.resolution * self.channels
    }

    /// Replaces a plane. Values must be finite; an all-zero plane is stored
    /// implicitly.
    pub fn set_plane(&mut self, axis: PlaneAxis, values: Vec<f32>) -> Result<()> {
        if values.len() != self.plane_len() {
            return Err(Error::ShapeMismatch {
                expected: format!("{} plane values", self.plane_len()),
                actual: format!("{}", values.len()),
            });
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidRecipe(format!("non-finite plane value {bad}")));
        }
        self.planes[axis as usize] = if values.iter().all(|&v| v == 0.0) {
            PlaneData::Zero
        } else {
            PlaneData::Dense(values)
        };
        Ok(())
    }

    /// World coordinate of texel centre `i` along `axis`.
    #[inline]
    pub fn texel_center(&self, axis: usize, i: usize) -> f64 {
        self.bbox.min[axis] + (i as f64 + 0.5) * self.bbox.extent(axis) / self.resolution as f64
    }

    #[inline]
    pub fn texel_size(&self, axis: usize) -> f64 {
        self.bbox.extent(axis) / self.resolution as f64
    }

    /// Continuous texel coordinate along `axis`, snapped to the nearest
    /// integer when within rounding noise of a texel centre.
    #[inline]
    fn texel_coord(&self, axis: usize, v: f64) -> f64 {
        let f = (v - self.bbox.min[axis]) / self.bbox.extent(axis) * self.resolution as f64 - 0.5;
        // f >= -0.5 inside the box, so truncation is floor here; this avoids
        // the slow software rounding on baseline x86-64
        let r = ((f + 0.5).max(0.0) as u64) as f64;
        if (f - r).abs() < 1e-9 {
            r
        } else {
            f
        }
    }

    /// Sums the bilinear samples of all three planes at `p` into `out`
    /// (length `channels`). Returns false, leaving `out` zeroed, when `p` is
    /// outside the bounding box.
    pub fn sample_into(&self, p: &Vec3, out: &mut [f32]) -> bool {
        debug_assert_eq!(out.len(), self.channels);
        out.iter_mut().for_each(|v| *v = 0.0);
        if !self.bbox.contains(p) {
            return false;
        }
        for axis in PlaneAxis::ALL {
            if let PlaneData::Dense(values) = &self.planes[axis as usize] {
                let (ca, ra) = axis.axes();
                let u = self.texel_coord(ca, p[ca]);
                let v = self.texel_coord(ra, p[ra]);
                bilinear_accumulate(values, self.resolution, self.channels, u, v, out);
            }
        }
        true
    }
}

#[inline]
fn split(coord: f64, res: usize) -> (usize, usize, f32) {
    let max = (res - 1) as f64;
    let c = coord.clamp(0.0, max);
    let i0 = c as usize;
    let t = (c - i0 as f64) as f32;
    let i1 = (i0 + 1).min(res - 1);
    (i0, i1, t)
}

#[inline]
fn bilinear_accumulate(values: &[f32], res: usize, channels: usize, u: f64, v: f64, out: &mut [f32]) {
    let (c0, c1, tu) = split(u, res);
    let (r0, r1, tv) = split(v, res);
    let w00 = (1.0 - tu) * (1.0 - tv);
    let w10 = tu * (1.0 - tv);
    let w01 = (1.0 - tu) * tv;
    let w11 = tu * tv;
    let i00 = (r0 * res + c0) * channels;
    let i10 = (r0 * res + c1) * channels;
    let i01 = (r1 * res + c0) * channels;
    let i11 = (r1 * res + c1) * channels;
    for (ch, o) in out.iter_mut().enumerate() {
        *o += values[i00 + ch] * w00
            + values[i10 + ch] * w10
            + values[i01 + ch] * w01
            + values[i11 + ch] * w11;
    }
}
