//! Procedural body prior: a capsule skeleton whose soft union acts as the
//! canonical body SDF (negative inside).

use serde::{Deserialize, Serialize};

use super::triplane::{Aabb, Vec3};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Capsule {
    pub a: Vec3,
    pub b: Vec3,
    pub radius: f64,
}

impl Capsule {
    #[inline]
    pub fn axis_distance(&self, p: &Vec3) -> f64 {
        let ab = self.b - self.a;
        let ap = p - self.a;
        let len2 = ab.norm_squared();
        let h = if len2 > 0.0 {
            (ap.dot(&ab) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        (ap - ab * h).norm()
    }

    #[inline]
    pub fn sdf(&self, p: &Vec3) -> f64 {
        self.axis_distance(p) - self.radius
    }

    /// Axis-aligned bounds of the capsule grown by `margin`.
    pub fn bounds(&self, margin: f64) -> Aabb {
        let r = self.radius + margin;
        let mut min = [0.0; 3];
        let mut max = [0.0; 3];
        for i in 0..3 {
            min[i] = self.a[i].min(self.b[i]) - r;
            max[i] = self.a[i].max(self.b[i]) + r;
        }
        Aabb { min, max }
    }
}

/// Polynomial smooth minimum. The result never exceeds `min(a, b)` and
/// undershoots it by at most `k / 4`. Its partial derivatives are
/// non-negative and sum to one, so the union of 1-Lipschitz distances stays
/// 1-Lipschitz.
#[inline]
pub fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    if k <= 0.0 {
        return a.min(b);
    }
    let h = (k - (a - b).abs()).max(0.0) / k;
    a.min(b) - h * h * k * 0.25
}

#[derive(Clone, Debug, PartialEq)]
pub struct BodyPrior {
    pub capsules: Vec<Capsule>,
    /// Soft-min blend radius; zero gives the exact capsule union.
    pub smoothing: f64,
}

impl BodyPrior {
    pub fn sdf(&self, p: &Vec3) -> f64 {
        let mut iter = self.capsules.iter();
        let Some(first) = iter.next() else {
            return f64::INFINITY;
        };
        iter.fold(first.sdf(p), |acc, c| smooth_min(acc, c.sdf(p), self.smoothing))
    }

    /// Index of the capsule with the smallest signed distance to `p`. This is
    /// the hard skinning weight: the nearest capsule's bone owns the point.
    pub fn nearest(&self, p: &Vec3) -> usize {
        nearest_of(self.capsules.iter(), p)
    }
}

pub(crate) fn nearest_of<'a>(caps: impl Iterator<Item = &'a Capsule>, p: &Vec3) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in caps.enumerate() {
        let d = c.sdf(p);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Bone {
    pub name: String,
    pub parent: Option<usize>,
    /// Joint the bone rotates about, in canonical coordinates.
    pub head: [f64; 3],
    pub tail: [f64; 3],
    pub radius: f64,
}

impl Bone {
    pub fn head(&self) -> Vec3 {
        Vec3::from(self.head)
    }

    pub fn tail(&self) -> Vec3 {
        Vec3::from(self.tail)
    }

    pub fn capsule(&self) -> Capsule {
        Capsule {
            a: self.head(),
            b: self.tail(),
            radius: self.radius,
        }
    }
}

/// Bone hierarchy. Parents always precede their children. Rest transforms
/// are the identity: canonical space is the rest pose.
#[derive(Clone, Debug, PartialEq)]
pub struct Skeleton {
    bones: Vec<Bone>,
}

impl Skeleton {
    /// Builds a skeleton, checking that parent links point backwards.
    pub fn new(bones: Vec<Bone>) -> Result<Self, String> {
        if bones.is_empty() {
            return Err("skeleton has no bones".into());
        }
        for (i, b) in bones.iter().enumerate() {
            if let Some(p) = b.parent {
                if p >= i {
                    return Err(format!(
                        "bone `{}` must come after its parent (index {p})",
                        b.name
                    ));
                }
            }
            if !(b.radius > 0.0 && b.radius.is_finite()) {
                return Err(format!("bone `{}` has invalid radius {}", b.name, b.radius));
            }
            if b.head.iter().chain(&b.tail).any(|v| !v.is_finite()) {
                return Err(format!("bone `{}` has non-finite endpoints", b.name));
            }
            if bones[..i].iter().any(|o| o.name == b.name) {
                return Err(format!("duplicate bone name `{}`", b.name));
            }
        }
        Ok(Skeleton { bones })
    }

    pub fn bones(&self) -> &[Bone] {
        &self.bones
    }

    pub fn len(&self) -> usize {
        self.bones.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bones.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.bones.iter().position(|b| b.name == name)
    }

    pub fn body_prior(&self, smoothing: f64) -> BodyPrior {
        BodyPrior {
            capsules: self.bones.iter().map(Bone::capsule).collect(),
            smoothing,
        }
    }
}
