use std::fmt;
use std::sync::Arc;

use super::body::{BodyPrior, Skeleton};
use super::triplane::{Aabb, TriPlane, Vec3, FIELD_CHANNELS};
use crate::error::{Error, Result};

/// Number of semantic parts.
pub const PART_COUNT: usize = 6;

/// Part names in their fixed order.
pub const PART_NAMES: [&str; PART_COUNT] = ["body", "tops", "outer", "bottoms", "shoes", "accessories"];

pub fn part_index(name: &str) -> Option<usize> {
    PART_NAMES.iter().position(|&n| n == name)
}

/// Set of semantic parts as a bit mask.
#[derive(Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct PartMask(u8);

impl PartMask {
    pub const NONE: PartMask = PartMask(0);
    pub const ALL: PartMask = PartMask((1 << PART_COUNT) - 1);

    pub fn from_bits(bits: u8) -> Self {
        PartMask(bits & Self::ALL.0)
    }

    pub fn single(k: usize) -> Self {
        assert!(k < PART_COUNT);
        PartMask(1 << k)
    }

    #[inline]
    pub fn bits(self) -> u8 {
        self.0
    }

    #[inline]
    pub fn contains(self, k: usize) -> bool {
        self.0 & (1 << k) != 0
    }

    #[inline]
    pub fn insert(&mut self, k: usize) {
        self.0 |= 1 << k;
    }

    #[inline]
    pub fn remove(&mut self, k: usize) {
        self.0 &= !(1 << k);
    }

    #[inline]
    pub fn count(self) -> u32 {
        self.0.count_ones()
    }

    #[inline]
    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    #[inline]
    pub fn intersect(self, other: PartMask) -> PartMask {
        PartMask(self.0 & other.0)
    }

    pub fn iter(self) -> impl Iterator<Item = usize> {
        (0..PART_COUNT).filter(move |&k| self.contains(k))
    }
}

impl fmt::Debug for PartMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter().map(|k| PART_NAMES[k])).finish()
    }
}

/// The 21-bit garment/gender label. Carried as metadata only.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct LabelBits(u32);

impl LabelBits {
    pub const WIDTH: u32 = 21;

    pub fn new(bits: u32) -> Result<Self> {
        if bits >> Self::WIDTH != 0 {
            return Err(Error::InvalidRecipe(format!(
                "label bits {bits:#x} exceed {} bits",
                Self::WIDTH
            )));
        }
        Ok(LabelBits(bits))
    }

    pub fn from_flags(flags: &[u8]) -> Result<Self> {
        if flags.len() != Self::WIDTH as usize {
            return Err(Error::InvalidRecipe(format!(
                "label_bits needs {} entries, got {}",
                Self::WIDTH,
                flags.len()
            )));
        }
        let mut bits = 0;
        for (i, &f) in flags.iter().enumerate() {
            match f {
                0 => {}
                1 => bits |= 1 << i,
                other => {
                    return Err(Error::InvalidRecipe(format!(
                        "label_bits entries must be 0 or 1, got {other}"
                    )))
                }
            }
        }
        Ok(LabelBits(bits))
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn flags(self) -> Vec<u8> {
        (0..Self::WIDTH).map(|i| ((self.0 >> i) & 1) as u8).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Part {
    pub name: String,
    pub field: Arc<TriPlane>,
    pub enabled: bool,
    pub density_scale: f64,
}

/// SDF offset and color read from one part field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PartSample {
    pub sdf_offset: f64,
    pub color: [f64; 3],
}

/// Canonical-space scene: body prior, six part fields, skeleton and ray
/// bounds. Immutable once built; share it freely between render workers.
#[derive(Clone, Debug, PartialEq)]
pub struct SemanticScene {
    body: BodyPrior,
    skeleton: Skeleton,
    parts: Vec<Part>,
    label_bits: LabelBits,
    near: f64,
    far: f64,
    bbox: Aabb,
}

impl SemanticScene {
    pub fn new(
        skeleton: Skeleton,
        smoothing: f64,
        parts: Vec<Part>,
        label_bits: LabelBits,
        near: f64,
        far: f64,
        bbox: Aabb,
    ) -> Result<Self> {
        if parts.len() != PART_COUNT {
            return Err(Error::InvalidRecipe(format!(
                "scene needs exactly {PART_COUNT} parts, got {}",
                parts.len()
            )));
        }
        for (part, &name) in parts.iter().zip(&PART_NAMES) {
            if part.name != name {
                return Err(Error::InvalidRecipe(format!(
                    "part `{}` out of order; expected `{name}`",
                    part.name
                )));
            }
            if !bbox.contains_box(part.field.bbox()) {
                return Err(Error::InvalidRecipe(format!(
                    "part `{name}` bbox is not inside the scene bbox"
                )));
            }
            if !(part.density_scale > 0.0 && part.density_scale.is_finite()) {
                return Err(Error::InvalidRecipe(format!(
                    "part `{name}` density scale must be positive"
                )));
            }
        }
        if !(near.is_finite() && far.is_finite() && near >= 0.0 && near < far) {
            return Err(Error::InvalidRecipe(format!("need 0 <= near < far, got {near}, {far}")));
        }
        if !(smoothing >= 0.0 && smoothing.is_finite()) {
            return Err(Error::InvalidRecipe(format!("invalid smoothing {smoothing}")));
        }
        Ok(SemanticScene {
            body: skeleton.body_prior(smoothing),
            skeleton,
            parts,
            label_bits,
            near,
            far,
            bbox,
        })
    }

    pub fn body(&self) -> &BodyPrior {
        &self.body
    }

    pub fn skeleton(&self) -> &Skeleton {
        &self.skeleton
    }

    pub fn parts(&self) -> &[Part] {
        &self.parts
    }

    pub fn part(&self, k: usize) -> &Part {
        &self.parts[k]
    }

    pub fn label_bits(&self) -> LabelBits {
        self.label_bits
    }

    pub fn near(&self) -> f64 {
        self.near
    }

    pub fn far(&self) -> f64 {
        self.far
    }

    pub fn bbox(&self) -> &Aabb {
        &self.bbox
    }

    pub fn enabled_mask(&self) -> PartMask {
        let mut m = PartMask::NONE;
        for (k, p) in self.parts.iter().enumerate() {
            if p.enabled {
                m.insert(k);
            }
        }
        m
    }

    /// Copy of the scene with exactly the parts in `mask` enabled.
    pub fn with_enabled(&self, mask: PartMask) -> SemanticScene {
        let mut out = self.clone();
        for (k, p) in out.parts.iter_mut().enumerate() {
            p.enabled = mask.contains(k);
        }
        out
    }

    /// Copy of the scene with its part fields replaced.
    pub fn with_fields(&self, fields: Vec<Arc<TriPlane>>) -> Result<SemanticScene> {
        if fields.len() != PART_COUNT {
            return Err(Error::ShapeMismatch {
                expected: format!("{PART_COUNT} fields"),
                actual: format!("{}", fields.len()),
            });
        }
        let mut out = self.clone();
        for (p, f) in out.parts.iter_mut().zip(fields) {
            if f.bbox() != p.field.bbox() {
                return Err(Error::ShapeMismatch {
                    expected: format!("bbox {:?}", p.field.bbox()),
                    actual: format!("{:?}", f.bbox()),
                });
            }
            p.field = f;
        }
        Ok(out)
    }

    /// Signed distance of the canonical body prior.
    #[inline]
    pub fn body_sdf(&self, x: &Vec3) -> f64 {
        self.body.sdf(x)
    }

    /// Samples part `k` at canonical point `x`. Outside the part's box the
    /// offset is the distance to the box and the color is black.
    #[inline]
    pub fn sample_part(&self, k: usize, x: &Vec3) -> PartSample {
        let field = &self.parts[k].field;
        let mut buf = [0.0f32; 8];
        let ch = field.channels();
        if ch <= buf.len() {
            sample_with(field, x, &mut buf[..ch])
        } else {
            sample_with(field, x, &mut vec![0.0; ch])
        }
    }
}

#[inline]
fn sample_with(field: &TriPlane, x: &Vec3, buf: &mut [f32]) -> PartSample {
    if !field.sample_into(x, buf) {
        return PartSample {
            sdf_offset: field.bbox().distance(x),
            color: [0.0; 3],
        };
    }
    debug_assert!(buf.len() >= FIELD_CHANNELS);
    PartSample {
        sdf_offset: buf[0] as f64,
        color: [
            (buf[1] as f64).clamp(0.0, 1.0),
            (buf[2] as f64).clamp(0.0, 1.0),
            (buf[3] as f64).clamp(0.0, 1.0),
        ],
    }
}
