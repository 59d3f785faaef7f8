//! Procedural scene recipes and baking them into tri-plane part fields.
//!
//! Garments are offset shells over the body prior: inside a garment's XY
//! footprint its SDF offset is `-thickness`, outside it is `absent_offset`
//! (large enough that the part carries no density), with an optional
//! smoothstep feather between the two.

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::body::{Bone, Skeleton};
use super::scene::{LabelBits, Part, SemanticScene, PART_COUNT, PART_NAMES};
use super::triplane::{Aabb, PlaneAxis, TriPlane, FIELD_CHANNELS};
use crate::error::{Error, Result};

const DEFAULT_RECIPE: &str = include_str!("../../scenes/default.json");
const OCCLUSION_RECIPE: &str = include_str!("../../scenes/occlusion.json");

fn unit_bbox() -> Aabb {
    Aabb::UNIT
}

fn default_absent() -> f64 {
    0.3
}

fn yes() -> bool {
    true
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoneSpec {
    pub name: String,
    #[serde(default)]
    pub parent: Option<String>,
    pub head: [f64; 3],
    pub tail: [f64; 3],
    pub radius: f64,
}

/// Axis-aligned rectangle in the XY plane.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

/// Horizontal stripes blended into the base color with a sinusoid in y.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Stripes {
    pub period: f64,
    pub color: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartRecipe {
    pub name: String,
    #[serde(default = "yes")]
    pub enabled: bool,
    pub color: [f64; 3],
    #[serde(default)]
    pub stripes: Option<Stripes>,
    /// Shell thickness over the body prior inside the footprint.
    #[serde(default)]
    pub thickness: f64,
    /// Footprint; `None` covers everything.
    #[serde(default)]
    pub regions: Option<Vec<Region>>,
    /// Width of the smoothstep transition at footprint edges.
    #[serde(default)]
    pub feather: f64,
    #[serde(default = "one")]
    pub density_scale: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recipe {
    pub name: String,
    #[serde(default = "unit_bbox")]
    pub bbox: Aabb,
    pub near: f64,
    pub far: f64,
    #[serde(default)]
    pub smoothing: f64,
    #[serde(default = "default_absent")]
    pub absent_offset: f64,
    pub bones: Vec<BoneSpec>,
    #[serde(default)]
    pub label_bits: Option<Vec<u8>>,
    pub parts: Vec<PartRecipe>,
}

#[inline]
fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * (3.0 - 2.0 * t)
}

#[inline]
fn edge(d: f64, feather: f64) -> f64 {
    if feather > 0.0 {
        smoothstep(d / feather + 0.5)
    } else if d >= 0.0 {
        1.0
    } else {
        0.0
    }
}

impl Region {
    fn coverage(&self, x: f64, y: f64, feather: f64) -> f64 {
        edge(x - self.min[0], feather)
            * edge(self.max[0] - x, feather)
            * edge(y - self.min[1], feather)
            * edge(self.max[1] - y, feather)
    }
}

impl PartRecipe {
    /// Footprint coverage in [0, 1] at (x, y).
    pub fn coverage(&self, x: f64, y: f64) -> f64 {
        match &self.regions {
            None => 1.0,
            Some(regions) => regions
                .iter()
                .map(|r| r.coverage(x, y, self.feather))
                .fold(0.0, f64::max),
        }
    }

    /// Analytic SDF offset and color at (x, y).
    pub fn evaluate(&self, x: f64, y: f64, absent_offset: f64) -> (f64, [f64; 3]) {
        let c = self.coverage(x, y);
        let offset = absent_offset + (-self.thickness - absent_offset) * c;
        let color = match &self.stripes {
            None => self.color,
            Some(s) => {
                let w = 0.5 + 0.5 * (std::f64::consts::TAU * y / s.period).sin();
                [0, 1, 2].map(|i| self.color[i] * (1.0 - w) + s.color[i] * w)
            }
        };
        (offset, color)
    }
}

impl Recipe {
    pub fn from_json(text: &str) -> Result<Self> {
        let r: Recipe = serde_json::from_str(text)?;
        Ok(r)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    /// Built-in recipes: `default` (clothed figure) and `occlusion`.
    pub fn builtin(name: &str) -> Option<Self> {
        let text = match name {
            "default" => DEFAULT_RECIPE,
            "occlusion" => OCCLUSION_RECIPE,
            _ => return None,
        };
        Some(Self::from_json(text).expect("built-in recipe parses"))
    }

    pub fn default_figure() -> Self {
        Self::builtin("default").unwrap()
    }

    pub fn occlusion() -> Self {
        Self::builtin("occlusion").unwrap()
    }

    pub fn part(&self, name: &str) -> Option<&PartRecipe> {
        self.parts.iter().find(|p| p.name == name)
    }

    pub fn part_mut(&mut self, name: &str) -> Option<&mut PartRecipe> {
        self.parts.iter_mut().find(|p| p.name == name)
    }

    /// Parts in canonical order.
    fn ordered_parts(&self) -> Result<Vec<&PartRecipe>> {
        if self.parts.len() != PART_COUNT {
            return Err(Error::InvalidRecipe(format!(
                "recipe must list exactly {PART_COUNT} parts, found {}",
                self.parts.len()
            )));
        }
        PART_NAMES
            .iter()
            .map(|&n| {
                let mut matches = self.parts.iter().filter(|p| p.name == n);
                match (matches.next(), matches.next()) {
                    (Some(p), None) => Ok(p),
                    (None, _) => Err(Error::InvalidRecipe(format!("missing part `{n}`"))),
                    (Some(_), Some(_)) => Err(Error::InvalidRecipe(format!("duplicate part `{n}`"))),
                }
            })
            .collect()
    }

    fn skeleton(&self) -> Result<Skeleton> {
        let mut bones = Vec::with_capacity(self.bones.len());
        for spec in &self.bones {
            let parent = match &spec.parent {
                None => None,
                Some(name) => Some(
                    self.bones
                        .iter()
                        .position(|b| &b.name == name)
                        .ok_or_else(|| Error::UnknownBone(name.clone()))?,
                ),
            };
            bones.push(Bone {
                name: spec.name.clone(),
                parent,
                head: spec.head,
                tail: spec.tail,
                radius: spec.radius,
            });
        }
        Skeleton::new(bones).map_err(Error::InvalidRecipe)
    }

    fn validate_part(&self, p: &PartRecipe) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidRecipe(format!("part `{}`: {msg}", p.name)));
        let unit = |c: &[f64; 3]| c.iter().all(|v| (0.0..=1.0).contains(v));
        if !unit(&p.color) {
            return bad(format!("color {:?} outside [0, 1]", p.color));
        }
        if let Some(s) = &p.stripes {
            if !unit(&s.color) || !(s.period > 0.0) {
                return bad("stripes need a positive period and a [0, 1] color".into());
            }
        }
        if !(p.thickness >= 0.0 && p.thickness < self.absent_offset) {
            return bad(format!(
                "thickness {} must be in [0, absent_offset = {})",
                p.thickness, self.absent_offset
            ));
        }
        if !(p.feather >= 0.0) {
            return bad("feather must be non-negative".into());
        }
        if let Some(regions) = &p.regions {
            if regions.iter().any(|r| !(r.min[0] < r.max[0] && r.min[1] < r.max[1])) {
                return bad("empty region".into());
            }
        }
        Ok(())
    }

    /// Rejects garment shells that would leave the scene bounds.
    fn check_shells(&self, skeleton: &Skeleton, parts: &[&PartRecipe]) -> Result<()> {
        let margin_smooth = self.smoothing * 0.25;
        for part in parts.iter().filter(|p| p.enabled) {
            for bone in skeleton.bones() {
                let mut b = bone.capsule().bounds(part.thickness + margin_smooth);
                let covered = match &part.regions {
                    None => true,
                    Some(regions) => {
                        // Clip to the union of footprints grown by half the feather.
                        let h = part.feather * 0.5;
                        let mut any = false;
                        let mut clip = Aabb {
                            min: [f64::INFINITY, f64::INFINITY, b.min[2]],
                            max: [f64::NEG_INFINITY, f64::NEG_INFINITY, b.max[2]],
                        };
                        for r in regions {
                            let lo = [b.min[0].max(r.min[0] - h), b.min[1].max(r.min[1] - h)];
                            let hi = [b.max[0].min(r.max[0] + h), b.max[1].min(r.max[1] + h)];
                            if lo[0] <= hi[0] && lo[1] <= hi[1] {
                                any = true;
                                for i in 0..2 {
                                    clip.min[i] = clip.min[i].min(lo[i]);
                                    clip.max[i] = clip.max[i].max(hi[i]);
                                }
                            }
                        }
                        if any {
                            b = clip;
                        }
                        any
                    }
                };
                if covered && !self.bbox.contains_box(&b) {
                    return Err(Error::ShellOutsideBounds {
                        part: part.name.clone(),
                        bone: bone.name.clone(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Bakes the recipe into a scene with `resolution`² part planes.
    ///
    /// The analytic signal goes into the XY plane; XZ and YZ stay zero, so
    /// sampling at XY texel centres returns the analytic value exactly.
    pub fn bake(&self, resolution: usize) -> Result<SemanticScene> {
        if !self.bbox.is_valid() {
            return Err(Error::InvalidRecipe("degenerate scene bbox".into()));
        }
        if !(self.absent_offset > 0.0) {
            return Err(Error::InvalidRecipe("absent_offset must be positive".into()));
        }
        let parts = self.ordered_parts()?;
        for p in &parts {
            self.validate_part(p)?;
        }
        let skeleton = self.skeleton()?;
        self.check_shells(&skeleton, &parts)?;
        let label_bits = match &self.label_bits {
            None => LabelBits::default(),
            Some(flags) => LabelBits::from_flags(flags)?,
        };

        let mut baked = Vec::with_capacity(PART_COUNT);
        for p in parts {
            let mut field = TriPlane::zeros(resolution, FIELD_CHANNELS, self.bbox)?;
            let mut xy = vec![0.0f32; field.plane_len()];
            for row in 0..resolution {
                let y = field.texel_center(1, row);
                for col in 0..resolution {
                    let x = field.texel_center(0, col);
                    let (offset, color) = p.evaluate(x, y, self.absent_offset);
                    let i = (row * resolution + col) * FIELD_CHANNELS;
                    xy[i] = offset as f32;
                    xy[i + 1] = color[0] as f32;
                    xy[i + 2] = color[1] as f32;
                    xy[i + 3] = color[2] as f32;
                }
            }
            field.set_plane(PlaneAxis::Xy, xy)?;
            baked.push(Part {
                name: p.name.clone(),
                field: Arc::new(field),
                enabled: p.enabled,
                density_scale: p.density_scale,
            });
        }
        SemanticScene::new(
            skeleton,
            self.smoothing,
            baked,
            label_bits,
            self.near,
            self.far,
            self.bbox,
        )
    }
}

/// Bakes `recipe` at `resolution`.
pub fn bake_scene(recipe: &Recipe, resolution: usize) -> Result<SemanticScene> {
    recipe.bake(resolution)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::triplane::Vec3;

    #[test]
    fn builtins_bake() {
        for name in ["default", "occlusion"] {
            let scene = Recipe::builtin(name).unwrap().bake(32).unwrap();
            assert_eq!(scene.parts().len(), PART_COUNT);
            for (p, n) in scene.parts().iter().zip(PART_NAMES) {
                assert_eq!(p.name, n);
            }
            assert!(scene.near() < scene.far());
        }
    }

    #[test]
    fn texel_centres_reproduce_analytic_field_bit_exact() {
        let recipe = Recipe::default_figure();
        for res in [256, 512] {
            let scene = recipe.bake(res).unwrap();
            for (k, p) in recipe.ordered_parts().unwrap().into_iter().enumerate() {
                let field = &scene.part(k).field;
                for row in (0..res).step_by(7) {
                    for col in (0..res).step_by(5) {
                        let x = field.texel_center(0, col);
                        let y = field.texel_center(1, row);
                        let (off, color) = p.evaluate(x, y, recipe.absent_offset);
                        let s = scene.sample_part(k, &Vec3::new(x, y, 0.123));
                        assert_eq!(s.sdf_offset, off as f32 as f64);
                        for c in 0..3 {
                            assert_eq!(s.color[c], color[c] as f32 as f64);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn baking_is_deterministic() {
        let r = Recipe::default_figure();
        assert_eq!(r.bake(64).unwrap(), r.bake(64).unwrap());
    }

    #[test]
    fn rejects_shell_leaving_bbox() {
        let mut r = Recipe::default_figure();
        let hat = r.part_mut("accessories").unwrap();
        hat.thickness = 0.2;
        match r.bake(16) {
            Err(Error::ShellOutsideBounds { part, bone }) => {
                assert_eq!(part, "accessories");
                assert_eq!(bone, "head");
            }
            other => panic!("expected shell error, got {other:?}"),
        }
    }

    #[test]
    fn rejects_missing_or_duplicate_parts() {
        let mut r = Recipe::default_figure();
        r.parts.pop();
        assert!(matches!(r.bake(16), Err(Error::InvalidRecipe(_))));
        let mut r = Recipe::default_figure();
        r.parts[5].name = "tops".into();
        assert!(matches!(r.bake(16), Err(Error::InvalidRecipe(_))));
    }

    #[test]
    fn rejects_unknown_parent_and_fields() {
        let mut r = Recipe::default_figure();
        r.bones[1].parent = Some("nope".into());
        assert!(matches!(r.bake(16), Err(Error::UnknownBone(_))));
        assert!(Recipe::from_json(r#"{"name":"x","near":1,"far":2,"bones":[],"parts":[],"bogus":1}"#).is_err());
    }

    #[test]
    fn feathered_coverage_is_smooth() {
        let p = PartRecipe {
            name: "tops".into(),
            enabled: true,
            color: [1.0, 0.0, 0.0],
            stripes: None,
            thickness: 0.05,
            regions: Some(vec![Region {
                min: [-0.3, 0.0],
                max: [0.3, 0.5],
            }]),
            feather: 0.04,
            density_scale: 1.0,
        };
        assert_eq!(p.coverage(0.0, 0.25), 1.0);
        assert_eq!(p.coverage(0.0, -0.03), 0.0);
        assert!((p.coverage(0.0, 0.0) - 0.5).abs() < 1e-12);
        let (off, _) = p.evaluate(0.0, 0.25, 0.3);
        assert!((off + 0.05).abs() < 1e-12);
        let (off, _) = p.evaluate(0.9, 0.25, 0.3);
        assert!((off - 0.3).abs() < 1e-12);
    }
}
