//! Skeleton posing and the inverse skinning that maps posed-space samples
//! back to canonical space.
//!
//! Each bone carries a local rotation about its head joint. The posed
//! transform of bone `b` is `M_b = M_parent * T(head) * R_b * T(-head)`.
//! Skinning weights are hard: a posed point belongs to the bone whose posed
//! capsule is nearest, and is mapped back with that bone's inverse.

use std::collections::BTreeMap;
use std::path::Path;

use nalgebra::{Isometry3, Rotation3, Translation3, UnitQuaternion};

use crate::error::{Error, Result};
use crate::field::body::nearest_of;
use crate::field::{Capsule, Skeleton, Vec3};

/// Pose file contents: bone name to axis-angle vector (radians).
pub type PoseSpec = BTreeMap<String, [f64; 3]>;

#[derive(Clone, Debug, PartialEq)]
pub struct Pose {
    axis_angles: Vec<[f64; 3]>,
}

impl Pose {
    pub fn identity(skeleton: &Skeleton) -> Pose {
        Pose {
            axis_angles: vec![[0.0; 3]; skeleton.len()],
        }
    }

    /// Bones missing from `spec` keep their rest orientation.
    pub fn from_spec(skeleton: &Skeleton, spec: &PoseSpec) -> Result<Pose> {
        let mut pose = Pose::identity(skeleton);
        for (name, aa) in spec {
            let i = skeleton
                .index_of(name)
                .ok_or_else(|| Error::UnknownBone(name.clone()))?;
            if aa.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidPose(format!("bone `{name}` has a non-finite rotation")));
            }
            pose.axis_angles[i] = *aa;
        }
        Ok(pose)
    }

    pub fn load(skeleton: &Skeleton, path: impl AsRef<Path>) -> Result<Pose> {
        let spec: PoseSpec = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        Pose::from_spec(skeleton, &spec)
    }

    /// Non-rest bones only.
    pub fn to_spec(&self, skeleton: &Skeleton) -> PoseSpec {
        skeleton
            .bones()
            .iter()
            .zip(&self.axis_angles)
            .filter(|(_, aa)| aa.iter().any(|&v| v != 0.0))
            .map(|(b, aa)| (b.name.clone(), *aa))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.axis_angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axis_angles.is_empty()
    }

    pub fn is_identity(&self) -> bool {
        self.axis_angles.iter().flatten().all(|&v| v == 0.0)
    }

    pub fn rotation(&self, bone: usize) -> Rotation3<f64> {
        Rotation3::new(Vec3::from(self.axis_angles[bone]))
    }

    pub fn set_rotation(&mut self, bone: usize, rot: &Rotation3<f64>) {
        self.axis_angles[bone] = rot.scaled_axis().into();
    }

    /// Applies `rot` on top of every root bone's rotation, turning the whole
    /// figure about the root joints.
    pub fn rotated_globally(&self, skeleton: &Skeleton, rot: &Rotation3<f64>) -> Pose {
        let mut out = self.clone();
        for (i, b) in skeleton.bones().iter().enumerate() {
            if b.parent.is_none() {
                out.set_rotation(i, &(rot * self.rotation(i)));
            }
        }
        out
    }

    /// Per-bone spherical interpolation between two poses.
    pub fn interpolate(&self, other: &Pose, t: f64) -> Pose {
        let axis_angles = (0..self.len())
            .map(|i| {
                let a = UnitQuaternion::from_rotation_matrix(&self.rotation(i));
                let b = UnitQuaternion::from_rotation_matrix(&other.rotation(i));
                a.slerp(&b, t).scaled_axis().into()
            })
            .collect();
        Pose { axis_angles }
    }
}

/// World transforms of a posed skeleton.
#[derive(Clone, Debug)]
pub struct PosedSkeleton {
    transforms: Vec<Isometry3<f64>>,
    inverses: Vec<Isometry3<f64>>,
    posed: Vec<Capsule>,
    canonical: Vec<Capsule>,
    identity: bool,
}

impl PosedSkeleton {
    pub fn new(skeleton: &Skeleton, pose: &Pose) -> Result<Self> {
        if pose.len() != skeleton.len() {
            return Err(Error::InvalidPose(format!(
                "pose has {} bones, skeleton has {}",
                pose.len(),
                skeleton.len()
            )));
        }
        let mut transforms: Vec<Isometry3<f64>> = Vec::with_capacity(skeleton.len());
        for (i, b) in skeleton.bones().iter().enumerate() {
            let head = Translation3::from(b.head());
            let rot = UnitQuaternion::from_rotation_matrix(&pose.rotation(i));
            let local = head * Isometry3::from_parts(Translation3::identity(), rot) * head.inverse();
            let world = match b.parent {
                Some(p) => transforms[p] * local,
                None => local,
            };
            transforms.push(world);
        }
        let canonical: Vec<Capsule> = skeleton.bones().iter().map(|b| b.capsule()).collect();
        let posed = canonical
            .iter()
            .zip(&transforms)
            .map(|(c, m)| Capsule {
                a: m.transform_point(&c.a.into()).coords,
                b: m.transform_point(&c.b.into()).coords,
                radius: c.radius,
            })
            .collect();
        Ok(PosedSkeleton {
            inverses: transforms.iter().map(|m| m.inverse()).collect(),
            transforms,
            posed,
            canonical,
            identity: pose.is_identity(),
        })
    }

    pub fn is_identity(&self) -> bool {
        self.identity
    }

    pub fn transform(&self, bone: usize) -> &Isometry3<f64> {
        &self.transforms[bone]
    }

    pub fn posed_capsules(&self) -> &[Capsule] {
        &self.posed
    }

    /// Bone owning the posed-space point `x`.
    pub fn nearest_bone(&self, x: &Vec3) -> usize {
        nearest_of(self.posed.iter(), x)
    }

    /// Maps a posed-space point to canonical space and reports the owning
    /// bone. The rest pose returns `x` unchanged.
    #[inline]
    pub fn deform_to_canonical(&self, x: &Vec3) -> (Vec3, usize) {
        if self.identity {
            return (*x, 0);
        }
        let b = self.nearest_bone(x);
        (self.inverses[b].transform_point(&(*x).into()).coords, b)
    }

    /// Forward skinning with the same hard weights, assigned in canonical
    /// space.
    pub fn skin(&self, x_canonical: &Vec3) -> Vec3 {
        let b = nearest_of(self.canonical.iter(), x_canonical);
        self.transforms[b].transform_point(&(*x_canonical).into()).coords
    }

    /// Rotates a canonical-space direction owned by `bone` into posed space.
    #[inline]
    pub fn rotate_to_posed(&self, bone: usize, v: &Vec3) -> Vec3 {
        if self.identity {
            return *v;
        }
        self.transforms[bone].rotation * v
    }
}
