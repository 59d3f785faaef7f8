//! Canonical-space scene representation: tri-plane part fields over a
//! procedural capsule body prior, plus recipe baking and pack I/O.

pub mod body;
pub mod pack;
pub mod recipe;
pub mod scene;
pub mod triplane;

pub use body::{BodyPrior, Bone, Capsule, Skeleton};
pub use pack::{load_pack, read_pack, save_pack, write_pack};
pub use recipe::{bake_scene, Recipe};
pub use scene::{
    part_index, LabelBits, Part, PartMask, PartSample, SemanticScene, PART_COUNT, PART_NAMES,
};
pub use triplane::{Aabb, PlaneAxis, PlaneData, TriPlane, Vec3, FIELD_CHANNELS};
